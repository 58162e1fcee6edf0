//! Std companion to `peoc-core`: configuration files, parallel benchmark
//! runs, the output directory layout, snapshot files and SVG plots.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod svg;

pub use error::{BenchError, Result};

use peoc_core::env::{reset, step_in_place, Action, Level};
use peoc_core::nn::{entropy_of, softmax, PolicyParams};
use peoc_core::rng::SplitMix64;

/// Outcome of running a policy for several episodes on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    /// Mean policy entropy over all visited states.
    pub mean_entropy: f64,
    pub mean_length: f64,
}

/// Samples `episodes` full episodes on `level` with stochastic actions.
pub fn evaluate_policy(params: &PolicyParams, level: &Level, episodes: usize, seed: u64) -> Result<EvalSummary> {
    let mut rng = SplitMix64::new(seed);
    let (mut total_return, mut successes, mut entropy_sum, mut steps) = (0.0, 0usize, 0.0, 0usize);
    for _ in 0..episodes {
        let (mut state, mut obs) = reset(level);
        let mut ret = 0.0;
        loop {
            let (logits, _) = params.forward(&obs)?;
            let dist = softmax(&logits);
            entropy_sum += entropy_of(&dist.probs);
            steps += 1;
            let action = Action::from_index(rng.categorical(&dist.probs)).expect("action index in range");
            let (reward, done) = step_in_place(&mut state, action)?;
            ret += reward;
            if done {
                break;
            }
            obs = peoc_core::env::observe(&state);
        }
        total_return += ret;
        successes += (ret > 0.0) as usize;
    }
    let n = episodes.max(1) as f64;
    Ok(EvalSummary {
        episodes,
        mean_return: total_return / n,
        success_rate: successes as f64 / n,
        mean_entropy: if steps > 0 { entropy_sum / steps as f64 } else { 0.0 },
        mean_length: steps as f64 / n,
    })
}
