use super::{EpochMetrics, MetricsError};

/// Operator prices per epoch, in operator-id order.
pub fn price_series(metrics: &[EpochMetrics]) -> Vec<Vec<f64>> {
    metrics
        .iter()
        .map(|m| m.operators.values().map(|o| o.price).collect())
        .collect()
}

/// First index `e` such that over `series[e - window ..= e]` every price moves
/// by less than `tolerance` relative to its window minimum.
pub fn detect_equilibrium(
    series: &[Vec<f64>],
    window: usize,
    tolerance: f64,
) -> Result<Option<usize>, MetricsError> {
    if window < 2 || !(tolerance > 0.0) {
        return Err(MetricsError::InvalidWindow);
    }
    if series.len() < window + 1 {
        return Err(MetricsError::SeriesTooShort {
            len: series.len(),
            needed: window + 1,
        });
    }
    let width = series.iter().map(Vec::len).max().unwrap_or(0);
    for e in window..series.len() {
        let span = &series[e - window..=e];
        let stable = (0..width).all(|k| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for row in span {
                let Some(&p) = row.get(k) else { return false };
                lo = lo.min(p);
                hi = hi.max(p);
            }
            let range = hi - lo;
            range == 0.0 || (lo > 0.0 && range / lo < tolerance)
        });
        if stable {
            return Ok(Some(e));
        }
    }
    Ok(None)
}
