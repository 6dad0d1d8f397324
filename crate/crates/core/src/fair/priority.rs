use serde::{Deserialize, Serialize};

use super::{non_negative, SchedError};

/// Outcome of the licensed-first rule for one operator and one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conservation {
    pub licensed_allocation: f64,
    /// Idle licensed capacity lent to the society pool for this epoch only.
    pub donated_capacity: f64,
    /// Part of the donation the society demand can actually absorb.
    pub donation_used: f64,
}

/// Licensed users take what they need first; the remainder is donated.
///
/// The society demand never enters the licensed side of the computation, so
/// society usage cannot reduce a licensed allocation.
pub fn priority_conserve(
    licensed_capacity: f64,
    licensed_demand: f64,
    society_demand: f64,
) -> Result<Conservation, SchedError> {
    non_negative(licensed_capacity, "licensed capacity")?;
    non_negative(licensed_demand, "licensed demand")?;
    non_negative(society_demand, "society demand")?;
    let licensed_allocation = licensed_capacity.min(licensed_demand);
    let donated_capacity = licensed_capacity - licensed_allocation;
    Ok(Conservation {
        licensed_allocation,
        donated_capacity,
        donation_used: donated_capacity.min(society_demand),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(c: Conservation) -> (f64, f64) {
        (c.licensed_allocation, c.donated_capacity)
    }

    #[test]
    fn fully_idle_spectrum_is_donated() {
        assert_eq!(
            pair(priority_conserve(100.0, 0.0, 50.0).unwrap()),
            (0.0, 100.0)
        );
    }

    #[test]
    fn saturated_spectrum_donates_nothing() {
        assert_eq!(
            pair(priority_conserve(100.0, 100.0, 80.0).unwrap()),
            (100.0, 0.0)
        );
    }

    #[test]
    fn residual_is_donated() {
        let c = priority_conserve(100.0, 60.0, 80.0).unwrap();
        assert_eq!(pair(c), (60.0, 40.0));
        assert_eq!(c.donation_used, 40.0);
    }

    #[test]
    fn split_reassembles_within_an_ulp() {
        // The two parts cannot always sum bit-exactly in binary floating point.
        let cap = 918.7791638654184;
        let c = priority_conserve(cap, 101.12088085323666, 0.0).unwrap();
        assert_eq!(c.donated_capacity, cap - c.licensed_allocation);
        assert!((c.licensed_allocation + c.donated_capacity - cap).abs() <= f64::EPSILON * cap);
    }

    #[test]
    fn negative_inputs_rejected() {
        assert!(priority_conserve(-1.0, 0.0, 0.0).is_err());
        assert!(priority_conserve(1.0, -0.5, 0.0).is_err());
        assert!(priority_conserve(1.0, 0.0, f64::NAN).is_err());
    }
}
