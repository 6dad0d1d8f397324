use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{non_negative, SchedError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrrService {
    pub queue: usize,
    pub packet: usize,
    pub size: f64,
    /// How many times the queue had been visited when the packet left (1-based).
    pub round: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrrState {
    pub quanta: Vec<f64>,
    pub deficits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrrOutcome {
    pub services: Vec<DrrService>,
    pub served_bytes: Vec<f64>,
    pub state: DrrState,
    pub budget_left: f64,
}

impl DrrOutcome {
    pub fn served_packets(&self) -> Vec<usize> {
        let mut counts = vec![0; self.served_bytes.len()];
        for s in &self.services {
            counts[s.queue] += 1;
        }
        counts
    }
}

/// Deficit round robin over pre-filled queues of packet sizes.
///
/// Each visit to a backlogged queue adds its quantum to the deficit counter and
/// sends head packets while the counter covers them; a queue that drains has its
/// counter reset to zero. Service stops once every queue is empty or the next
/// packet would exceed the remaining `service_budget`.
pub fn drr_schedule(
    queues: &[Vec<f64>],
    quanta: &[f64],
    service_budget: f64,
) -> Result<DrrOutcome, SchedError> {
    if queues.len() != quanta.len() {
        return Err(SchedError::LengthMismatch {
            queues: queues.len(),
            quanta: quanta.len(),
        });
    }
    for (q, &quantum) in quanta.iter().enumerate() {
        if !(quantum.is_finite() && quantum > 0.0) {
            return Err(SchedError::NonPositiveQuantum(q));
        }
    }
    for (q, queue) in queues.iter().enumerate() {
        if let Some(p) = queue.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(SchedError::NonPositiveSize { flow: q, packet: p });
        }
    }
    non_negative(service_budget, "service budget")?;

    let n = queues.len();
    let mut heads = vec![0usize; n];
    let mut deficits = vec![0.0; n];
    let mut visits = vec![0u64; n];
    let mut served_bytes = vec![0.0; n];
    let mut services = Vec::new();
    let mut budget_left = service_budget;
    let mut active: VecDeque<usize> = (0..n).filter(|&q| !queues[q].is_empty()).collect();

    'serve: while let Some(q) = active.pop_front() {
        visits[q] += 1;
        deficits[q] += quanta[q];
        while let Some(&size) = queues[q].get(heads[q]) {
            if size > deficits[q] {
                break;
            }
            if size > budget_left {
                break 'serve;
            }
            budget_left -= size;
            deficits[q] -= size;
            served_bytes[q] += size;
            services.push(DrrService {
                queue: q,
                packet: heads[q],
                size,
                round: visits[q],
            });
            heads[q] += 1;
        }
        if heads[q] < queues[q].len() {
            active.push_back(q);
        } else {
            deficits[q] = 0.0;
        }
    }

    Ok(DrrOutcome {
        services,
        served_bytes,
        state: DrrState {
            quanta: quanta.to_vec(),
            deficits,
        },
        budget_left,
    })
}
