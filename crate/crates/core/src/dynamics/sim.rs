use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{step_epoch, DynamicsError, EpochLedger};
use crate::market::{build_market, MarketError, MarketState, ScenarioConfig};
use crate::metrics::EpochMetrics;

/// A market plus the random stream that drives it.
///
/// The run stream is seeded from the market seed but kept apart from the
/// stream used to sample the initial population.
#[derive(Debug, Clone)]
pub struct Simulation {
    state: MarketState,
    rng: ChaCha8Rng,
    metrics: Vec<EpochMetrics>,
}

impl Simulation {
    pub fn new(state: MarketState) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
        rng.set_stream(1);
        Self {
            state,
            rng,
            metrics: Vec::new(),
        }
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    pub fn metrics(&self) -> &[EpochMetrics] {
        &self.metrics
    }

    /// Runs one epoch and returns its ledger.
    pub fn step(&mut self) -> Result<EpochLedger, DynamicsError> {
        let out = step_epoch(&self.state, &mut self.rng)?;
        self.state = out.state;
        self.metrics.push(out.metrics);
        Ok(out.ledger)
    }

    pub fn run(&mut self, epochs: u64) -> Result<(), DynamicsError> {
        for _ in 0..epochs {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_parts(self) -> (MarketState, Vec<EpochMetrics>) {
        (self.state, self.metrics)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub initial: MarketState,
    pub state: MarketState,
    pub metrics: Vec<EpochMetrics>,
}

/// Builds the market for `config` and runs it for `epochs` epochs.
pub fn run_scenario(config: &ScenarioConfig, epochs: u64) -> Result<RunOutput, RunError> {
    let initial = build_market(config)?;
    let mut sim = Simulation::new(initial.clone());
    sim.run(epochs)?;
    let (state, metrics) = sim.into_parts();
    Ok(RunOutput {
        initial,
        state,
        metrics,
    })
}
