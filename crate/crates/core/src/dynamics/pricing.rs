use serde::{Deserialize, Serialize};

use crate::market::{ColludedPrice, PricingPolicy};

/// One epoch of a provider's price and revenue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub price: f64,
    /// Total income, fees included.
    pub revenue: f64,
    /// Income from the provider's own retail subscribers.
    pub retail: f64,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Price to post after epoch `epoch`.
///
/// `history` ends with the epoch just completed. `anchor` is the price that
/// was in force when the collusion window opened; markups apply to it.
pub fn apply_pricing(
    policy: &PricingPolicy,
    current: f64,
    anchor: Option<f64>,
    history: &[PricePoint],
    epoch: u64,
) -> f64 {
    match policy {
        PricingPolicy::Fixed => current,
        PricingPolicy::Adaptive {
            step,
            min_price,
            max_price,
            period,
        } => {
            // Nobody bought at this price, so revenue carries no signal: cut.
            if history.last().is_some_and(|p| p.retail == 0.0) {
                return (current * (1.0 - step)).clamp(*min_price, *max_price);
            }
            let k = (*period).max(1) as usize;
            if !(epoch + 1).is_multiple_of(k as u64) || history.len() < 2 * k {
                return current;
            }
            let mean = |pts: &[PricePoint]| {
                let n = pts.len() as f64;
                (
                    pts.iter().map(|p| p.price).sum::<f64>() / n,
                    pts.iter().map(|p| p.revenue).sum::<f64>() / n,
                )
            };
            let (last_p, last_r) = mean(&history[history.len() - k..]);
            let (prev_p, prev_r) = mean(&history[history.len() - 2 * k..history.len() - k]);
            let dp = last_p - prev_p;
            let factor = if dp == 0.0 {
                1.0 + step
            } else {
                1.0 + step * sign(last_r - prev_r) * sign(dp)
            };
            (current * factor).clamp(*min_price, *max_price)
        }
        PricingPolicy::Collusion {
            start_epoch,
            end_epoch,
            colluded_price,
            fallback,
        } => {
            if (*start_epoch..*end_epoch).contains(&epoch) {
                match *colluded_price {
                    ColludedPrice::Absolute(p) => p,
                    ColludedPrice::Markup(m) => anchor.unwrap_or(current) * (1.0 + m),
                }
            } else {
                apply_pricing(fallback, current, anchor, history, epoch)
            }
        }
    }
}
