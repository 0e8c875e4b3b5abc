//! Shared inputs for the benchmarks.

use multicausal::generate::causal_successor;
use multicausal::seed::SeedSplitter;
use multicausal::spacetime::ModelParams;
use multicausal::wave::{FactorizedWaveState, SimulationConfig, Species};
use multicausal::SliceMeasure;
use rand::Rng;

/// A measure with `atoms` atoms and a causal successor of at most twice that size.
pub fn causal_pair(atoms: usize, seed: u64) -> (SliceMeasure<f64>, SliceMeasure<f64>) {
    let params = ModelParams::new(1.0, 3, 2).expect("valid params");
    let mut rng = SeedSplitter::new(seed).stream(0);
    let weights: Vec<u64> = (0..atoms).map(|_| rng.gen_range(1..100)).collect();
    let total: u64 = weights.iter().sum();
    let mu = SliceMeasure::new(
        params,
        0.0,
        weights
            .iter()
            .map(|&w| ((0..6).map(|_| rng.gen_range(-40i32..40) as f64 * 0.25).collect(), w as f64 / total as f64))
            .collect(),
    )
    .expect("valid measure");
    let nu = causal_successor(&mut rng, &mu, 1, 2 * atoms);
    (mu, nu)
}

/// Initial state of the default simulation for `species`.
pub fn default_state(species: Species) -> (SimulationConfig, FactorizedWaveState) {
    let config = SimulationConfig::default_for(species);
    let state = config.initial_state().expect("default state is valid");
    (config, state)
}
