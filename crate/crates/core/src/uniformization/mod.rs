//! Certified sojourn-time bounds for arbitrary stable Jackson networks.
//!
//! The sojourn of a marked customer is the absorption time of a Markov
//! process whose state is the network population plus the marked customer's
//! position. Randomizing that process at a constant rate `alpha` turns the
//! absorption time into a mixture of Erlang(n, alpha) laws weighted by the
//! probabilities `h(n)` of absorption at jump `n`. Truncating the mixture
//! after `k` jumps gives two-sided distribution bounds and lower bounds for
//! every moment. Queue lengths are capped to make the state space finite;
//! mass that would cross the cap is dropped rather than renormalized, so the
//! bounds stay valid and the loss is reported as part of the deficit.

mod chain;
mod mixture;
mod state_space;

pub use chain::{build_generator, randomize, Generator, RandomizedChain};
pub use mixture::{
    cdf_bounds, compute_h, initial_distribution, moment_lower_bound, CdfBounds, ErlangMixture, InitialDistribution,
    DEFAULT_MAX_JUMPS,
};
pub use state_space::{build_state_space, MarkedState, MarkedStateSpace, PathMode, MAX_STATES};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{NetworkSpec, TrafficSolution};

/// Smallest cap `C >= 1` with `rho^{C+1} / (1 - rho) < epsilon / (2J)` at every node.
pub fn default_cap(traffic: &TrafficSolution, epsilon: f64) -> usize {
    let target = epsilon / (2.0 * traffic.nodes() as f64);
    traffic
        .rho
        .iter()
        .map(|&rho| {
            if rho <= 0.0 {
                return 1;
            }
            let mut cap = 1;
            while rho.powi(cap as i32 + 1) / (1.0 - rho) >= target {
                cap += 1;
            }
            cap
        })
        .max()
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub epsilon: f64,
    /// Queue-length cap; `None` picks [`default_cap`].
    pub cap: Option<usize>,
    pub max_jumps: usize,
    /// Orders `m` for which moment lower bounds are reported.
    pub moment_orders: Vec<u32>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            cap: None,
            max_jumps: DEFAULT_MAX_JUMPS,
            moment_orders: vec![1, 2],
        }
    }
}

/// Where the probability missing from `sum h(n)` went.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deficits {
    /// Equilibrium mass outside the box when the marked customer arrives.
    pub initial_truncation: f64,
    /// Mass dropped by transitions that would cross the cap.
    pub clipping: f64,
    /// Live mass left after the last jump, at most epsilon.
    pub unresolved: f64,
    /// `1 - sum h(n)`; the constant gap between upper and lower bounds.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub order: u32,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SojournAnalysis {
    pub alpha: f64,
    pub jumps: usize,
    pub cap: usize,
    pub states: usize,
    pub deficits: Deficits,
    pub bounds: CdfBounds,
    pub moment_bounds: Vec<MomentBound>,
    pub mixture: ErlangMixture,
}

/// Runs the whole randomization pipeline for a customer entering at `entry_node`.
pub fn sojourn_analysis(
    spec: &NetworkSpec,
    traffic: &TrafficSolution,
    entry_node: usize,
    mode: &PathMode,
    options: &AnalysisOptions,
    grid: &[f64],
) -> Result<SojournAnalysis> {
    traffic.require_stable()?;
    if !(options.epsilon > 0.0 && options.epsilon < 1.0) {
        return Err(crate::SojournError::InvalidEpsilon(options.epsilon));
    }
    let cap = options.cap.unwrap_or_else(|| default_cap(traffic, options.epsilon));
    let space = build_state_space(spec, traffic, entry_node, mode, cap)?;
    let generator = build_generator(&space, spec);
    let chain = randomize(&generator, generator.alpha)?;
    drop(generator);
    let initial = initial_distribution(&space, traffic)?;
    let mixture = compute_h(&chain, &initial, options.epsilon, options.max_jumps)?;
    let bounds = cdf_bounds(&mixture, grid);
    let moment_bounds = options
        .moment_orders
        .iter()
        .map(|&order| MomentBound {
            order,
            lower_bound: moment_lower_bound(&mixture, order),
        })
        .collect();
    Ok(SojournAnalysis {
        alpha: mixture.alpha,
        jumps: mixture.jumps(),
        cap,
        states: space.len(),
        deficits: Deficits {
            initial_truncation: mixture.initial_deficit,
            clipping: mixture.clipped_mass,
            unresolved: mixture.unresolved_mass,
            total: mixture.deficit(),
        },
        bounds,
        moment_bounds,
        mixture,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erlang::erlang_cdf;

    #[test]
    fn lone_customer_is_one_stage_erlang() {
        let spec = NetworkSpec::new_allow_empty(vec![0.0], vec![2.0], vec![vec![0.0]]).unwrap();
        let traffic = spec.solve_traffic().unwrap();
        let options = AnalysisOptions {
            cap: Some(0),
            ..Default::default()
        };
        let a = sojourn_analysis(&spec, &traffic, 0, &PathMode::RandomRouting, &options, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(a.mixture.h, vec![0.0, 1.0]);
        for (i, &t) in a.bounds.grid.iter().enumerate() {
            assert_eq!(a.bounds.lower[i], erlang_cdf(1, 2.0, t));
        }
    }

    #[test]
    fn single_queue_initial_weights_are_geometric() {
        let spec = NetworkSpec::tandem(1.0, vec![2.0]).unwrap();
        let traffic = spec.solve_traffic().unwrap();
        let space = build_state_space(&spec, &traffic, 0, &PathMode::RandomRouting, 2).unwrap();
        let init = initial_distribution(&space, &traffic).unwrap();
        for (n, w) in [(0, 0.5), (1, 0.25), (2, 0.125)] {
            assert_eq!(init.probs[space.index(0, n, &[n])], w);
        }
        assert_eq!(init.probs.iter().sum::<f64>(), 0.875);
        assert_eq!(init.truncation_deficit, 0.125);
    }

    #[test]
    fn empty_network_starts_with_lone_customer() {
        let spec = NetworkSpec::new_allow_empty(vec![0.0; 2], vec![2.0, 3.0], vec![vec![0.0, 1.0], vec![0.0; 2]]).unwrap();
        let traffic = spec.solve_traffic().unwrap();
        let space = build_state_space(&spec, &traffic, 0, &PathMode::RandomRouting, 2).unwrap();
        let init = initial_distribution(&space, &traffic).unwrap();
        assert_eq!(init.probs[space.index(0, 0, &[0, 0])], 1.0);
        assert_eq!(init.truncation_deficit, 0.0);
    }

    #[test]
    fn entry_at_second_node() {
        let spec = NetworkSpec::new(vec![0.5, 0.5], vec![2.0, 3.0], vec![vec![0.0, 1.0], vec![0.0; 2]]).unwrap();
        let traffic = spec.solve_traffic().unwrap();
        let space = build_state_space(&spec, &traffic, 1, &PathMode::RandomRouting, 3).unwrap();
        let init = initial_distribution(&space, &traffic).unwrap();
        let expected = (1.0 - traffic.rho[0]) * (1.0 - traffic.rho[1]) * traffic.rho[1];
        assert!((init.probs[space.index(1, 1, &[0, 1])] - expected).abs() < 1e-15);
    }

    #[test]
    fn product_form_initial_weights() {
        let spec = NetworkSpec::tandem(1.0, vec![2.0, 2.0]).unwrap();
        let traffic = spec.solve_traffic().unwrap();
        let space = build_state_space(&spec, &traffic, 0, &PathMode::RandomRouting, 3).unwrap();
        let init = initial_distribution(&space, &traffic).unwrap();
        for a in 0..=3usize {
            for b in 0..=3usize {
                let expected = 0.25 * 0.5f64.powi((a + b) as i32);
                assert_eq!(init.probs[space.index(0, a, &[a, b])], expected);
            }
        }
        assert!((init.truncation_deficit - (1.0 - 0.9375f64.powi(2))).abs() < 1e-15);
    }

    #[test]
    fn default_cap_meets_tail_target() {
        let traffic = NetworkSpec::tandem(1.0, vec![2.0; 3]).unwrap().solve_traffic().unwrap();
        let cap = default_cap(&traffic, 1e-6);
        let tail = |c: usize| 0.5f64.powi(c as i32 + 1) / 0.5;
        assert!(tail(cap) < 1e-6 / 6.0);
        assert!(tail(cap - 1) >= 1e-6 / 6.0);
    }
}
