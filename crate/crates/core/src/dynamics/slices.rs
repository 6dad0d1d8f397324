use super::DynamicsError;
use crate::market::{Mvno, PhysicalOperator};

/// Commits `amount` of the host's licensed capacity to `mvno` at `unit_price`
/// per unit and epoch. The payment is settled every epoch by the ledger.
pub fn purchase_slice(
    mvno: &mut Mvno,
    host: &mut PhysicalOperator,
    amount: f64,
    unit_price: f64,
) -> Result<(), DynamicsError> {
    if !(amount.is_finite() && amount >= 0.0 && unit_price.is_finite() && unit_price >= 0.0) {
        return Err(DynamicsError::NegativeAmount);
    }
    if mvno.host != host.id {
        return Err(DynamicsError::UnknownProvider(format!(
            "{} is not hosted by {}",
            mvno.id, host.id
        )));
    }
    if amount == 0.0 {
        return Ok(());
    }
    let available = host.uncommitted_capacity();
    if amount > available {
        return Err(DynamicsError::InsufficientCapacity {
            requested: amount,
            available,
        });
    }
    host.sold_slices += amount;
    mvno.purchased_slice += amount;
    mvno.slice_unit_price = unit_price;
    Ok(())
}

/// Returns a slice to the host, e.g. when the MVNO leaves the market.
pub(crate) fn release_slice(mvno: &mut Mvno, host: &mut PhysicalOperator) {
    host.sold_slices = (host.sold_slices - mvno.purchased_slice).max(0.0);
    mvno.purchased_slice = 0.0;
}
