//! Reference oracles for the simulator test suites.
//!
//! Everything here is written independently of `society-core`: the routines
//! use different algorithms (bisection instead of sorting, event-driven fluid
//! simulation instead of virtual time, round-by-round replay instead of a
//! cursor) so that agreement between the two is meaningful.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Weighted max-min allocation computed by bisection on the water level.
///
/// Flow `i` receives `min(demand_i, weight_i * level)` where `level` is the
/// smallest value that exhausts `min(capacity, total demand)`.
pub fn water_fill_bisection(capacity: f64, flows: &[(f64, f64)]) -> Vec<f64> {
    let total: f64 = flows.iter().map(|&(_, d)| d).sum();
    if total <= capacity {
        return flows.iter().map(|&(_, d)| d).collect();
    }
    let fill = |level: f64| -> f64 { flows.iter().map(|&(w, d)| d.min(w * level)).sum() };
    let mut lo = 0.0_f64;
    let mut hi = flows
        .iter()
        .map(|&(w, d)| d / w)
        .fold(0.0_f64, f64::max)
        .max(1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid) < capacity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    flows.iter().map(|&(w, d)| d.min(w * hi)).collect()
}

/// One packet of an offered trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePacket {
    pub flow: usize,
    pub arrival: f64,
    pub size: f64,
}

/// Piecewise-linear cumulative service of an ideal fluid GPS server.
#[derive(Debug, Clone)]
pub struct FluidGps {
    /// `(time, cumulative service per flow)` breakpoints, ascending in time.
    points: Vec<(f64, Vec<f64>)>,
}

impl FluidGps {
    /// Simulates the fluid server serving `packets` at `rate`.
    pub fn simulate(weights: &[f64], packets: &[TracePacket], rate: f64) -> Self {
        const EPS: f64 = 1e-12;
        let n = weights.len();
        let mut arrivals: Vec<TracePacket> = packets.to_vec();
        arrivals.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));

        let mut backlog = vec![0.0; n];
        let mut served = vec![0.0; n];
        let mut t = arrivals.first().map(|p| p.arrival.min(0.0)).unwrap_or(0.0);
        let mut points = vec![(t, served.clone())];
        let mut next = 0;

        loop {
            while next < arrivals.len() && arrivals[next].arrival <= t + EPS {
                backlog[arrivals[next].flow] += arrivals[next].size;
                next += 1;
            }
            let active: Vec<usize> = (0..n).filter(|&i| backlog[i] > EPS).collect();
            if active.is_empty() {
                if next >= arrivals.len() {
                    break;
                }
                t = arrivals[next].arrival;
                points.push((t, served.clone()));
                continue;
            }
            let active_weight: f64 = active.iter().map(|&i| weights[i]).sum();
            let mut dt = f64::INFINITY;
            for &i in &active {
                let r = rate * weights[i] / active_weight;
                dt = dt.min(backlog[i] / r);
            }
            if next < arrivals.len() {
                dt = dt.min(arrivals[next].arrival - t);
            }
            for &i in &active {
                let r = rate * weights[i] / active_weight;
                let amount = (r * dt).min(backlog[i]);
                served[i] += amount;
                backlog[i] -= amount;
                if backlog[i] < EPS {
                    served[i] += backlog[i];
                    backlog[i] = 0.0;
                }
            }
            t += dt;
            points.push((t, served.clone()));
        }
        Self { points }
    }

    /// Cumulative service of every flow at time `t`.
    pub fn service_at(&self, t: f64) -> Vec<f64> {
        let idx = self.points.partition_point(|(pt, _)| *pt <= t);
        if idx == 0 {
            return vec![0.0; self.points[0].1.len()];
        }
        if idx >= self.points.len() {
            return self.points[self.points.len() - 1].1.clone();
        }
        let (t0, ref s0) = self.points[idx - 1];
        let (t1, ref s1) = self.points[idx];
        if t1 <= t0 {
            return s1.clone();
        }
        let frac = (t - t0) / (t1 - t0);
        s0.iter().zip(s1).map(|(a, b)| a + (b - a) * frac).collect()
    }

    /// Time at which the fluid system finishes all work.
    pub fn end_time(&self) -> f64 {
        self.points.last().map(|p| p.0).unwrap_or(0.0)
    }
}

/// Result of replaying deficit round robin one round at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct DrrReplay {
    pub served_bytes: Vec<f64>,
    pub served_packets: Vec<usize>,
    /// Round (1-based) in which each queue's packets departed.
    pub departure_rounds: Vec<Vec<u64>>,
}

/// Packet-by-packet deficit round robin replay.
///
/// Every round visits the queues in index order; a backlogged queue earns its
/// quantum and then sends head packets while the deficit covers them. Service
/// stops at the first packet that would overrun `budget`.
pub fn drr_replay(queues: &[Vec<f64>], quanta: &[f64], budget: f64) -> DrrReplay {
    let n = queues.len();
    let mut heads = vec![0usize; n];
    let mut deficit = vec![0.0; n];
    let mut out = DrrReplay {
        served_bytes: vec![0.0; n],
        served_packets: vec![0; n],
        departure_rounds: vec![Vec::new(); n],
    };
    let mut used = 0.0;
    let mut round = 0u64;
    'rounds: loop {
        if (0..n).all(|q| heads[q] >= queues[q].len()) {
            break;
        }
        round += 1;
        for q in 0..n {
            if heads[q] >= queues[q].len() {
                deficit[q] = 0.0;
                continue;
            }
            deficit[q] += quanta[q];
            while heads[q] < queues[q].len() && queues[q][heads[q]] <= deficit[q] {
                let size = queues[q][heads[q]];
                if used + size > budget {
                    break 'rounds;
                }
                used += size;
                deficit[q] -= size;
                heads[q] += 1;
                out.served_bytes[q] += size;
                out.served_packets[q] += 1;
                out.departure_rounds[q].push(round);
            }
            if heads[q] >= queues[q].len() {
                deficit[q] = 0.0;
            }
        }
    }
    out
}

/// Slot-level contention micro-simulation.
///
/// The channel offers `slots` transmission opportunities. Contenders arrive at
/// `load` times the nominal rate; under overload every success is preceded by
/// one collision slot per excess contender (carried fractionally). Returns the fraction
/// of slots that carried a successful transmission; without overload every
/// slot succeeds.
pub fn contention_efficiency(load: f64, slots: u64) -> f64 {
    if slots == 0 {
        return 1.0;
    }
    let excess = (load - 1.0).max(0.0);
    let mut carry = 0.0;
    let mut successes = 0u64;
    let mut used = 0u64;
    while used < slots {
        carry += excess;
        while carry >= 1.0 - 1e-12 && used < slots {
            carry -= 1.0;
            used += 1;
        }
        if used >= slots {
            break;
        }
        used += 1;
        successes += 1;
    }
    successes as f64 / slots as f64
}

/// Randomised variant of [`contention_efficiency`]: each contention round
/// resolves with probability `1/load`, otherwise the slot is lost to a collision.
pub fn contention_efficiency_mc(load: f64, slots: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_success = if load <= 1.0 { 1.0 } else { 1.0 / load };
    let successes = (0..slots).filter(|_| rng.gen::<f64>() < p_success).count();
    successes as f64 / slots as f64
}
