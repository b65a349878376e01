use serde::{Deserialize, Serialize};

use crate::erlang::erlang_cdf_table;
use crate::error::{Result, SojournError};
use crate::network::TrafficSolution;

use super::chain::RandomizedChain;
use super::state_space::MarkedStateSpace;

pub const DEFAULT_MAX_JUMPS: usize = 1_000_000;

/// State distribution of the marked customer at its arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDistribution {
    /// Probability per state id; entry 0 is mass already absorbed.
    pub probs: Vec<f64>,
    /// Equilibrium mass outside the truncated box.
    pub truncation_deficit: f64,
}

/// The arriving marked customer sees the product-form equilibrium restricted
/// to the truncated box and joins the end of the queue at its entry node.
/// The weights are not renormalized; the mass outside the box is reported.
pub fn initial_distribution(space: &MarkedStateSpace, traffic: &TrafficSolution) -> Result<InitialDistribution> {
    traffic.require_stable()?;
    let nodes = space.nodes();
    let cap = space.cap();
    let entry_stage = space.entry_stage();
    let entry = space.stage_node(entry_stage);
    let marginals: Vec<Vec<f64>> = traffic
        .rho
        .iter()
        .map(|&rho| (0..=cap).map(|n| (1.0 - rho) * rho.powi(n as i32)).collect())
        .collect();

    let mut probs = vec![0.0; space.len()];
    let mut counts = vec![0usize; nodes];
    let mut total = 0.0;
    loop {
        let weight: f64 = counts.iter().zip(&marginals).map(|(&c, m)| m[c]).product();
        probs[space.index(entry_stage, counts[entry], &counts)] += weight;
        total += weight;
        // odometer over the box, last node fastest
        let mut j = nodes;
        loop {
            if j == 0 {
                return Ok(InitialDistribution {
                    probs,
                    truncation_deficit: (1.0 - total).max(0.0),
                });
            }
            j -= 1;
            if counts[j] < cap {
                counts[j] += 1;
                break;
            }
            counts[j] = 0;
        }
    }
}

/// Jump-absorption probabilities of the randomized chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErlangMixture {
    pub alpha: f64,
    /// `h[n]`: probability of reaching the absorbing set exactly at jump `n`,
    /// from the one-step flow into it.
    pub h: Vec<f64>,
    /// The same probabilities from successive differences of the live mass,
    /// net of the mass clipped at each jump.
    pub h_mass_form: Vec<f64>,
    pub epsilon: f64,
    /// Mass outside the truncated box at the start.
    pub initial_deficit: f64,
    /// Mass pushed past the cap during the iteration.
    pub clipped_mass: f64,
    /// Live mass left when the iteration stopped.
    pub unresolved_mass: f64,
}

impl ErlangMixture {
    /// Last jump index `k`.
    pub fn jumps(&self) -> usize {
        self.h.len() - 1
    }

    pub fn resolved_mass(&self) -> f64 {
        self.h.iter().sum()
    }

    /// `1 - sum h(n)`: unresolved tail plus truncation losses.
    pub fn deficit(&self) -> f64 {
        (1.0 - self.resolved_mass()).max(0.0)
    }

    /// Truncated mean number of jumps to absorption, `sum n h(n)`.
    pub fn expected_jumps(&self) -> f64 {
        self.h.iter().enumerate().map(|(n, &h)| n as f64 * h).sum()
    }
}

/// Iterates `phi_n = phi_{n-1} R` over live states until the live mass is at
/// most `epsilon`.
///
/// With a truncated space the resulting `h(n)` are lower bounds on the exact
/// absorption probabilities.
pub fn compute_h(chain: &RandomizedChain, initial: &InitialDistribution, epsilon: f64, max_jumps: usize) -> Result<ErlangMixture> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SojournError::InvalidEpsilon(epsilon));
    }
    let n = chain.states();
    let mut current = initial.probs.clone();
    let absorbed0 = current[0];
    current[0] = 0.0;
    let mut mass: f64 = current.iter().sum();
    let mut h = vec![absorbed0];
    let mut h_mass_form = vec![1.0 - mass - initial.truncation_deficit];
    let mut clipped_mass = 0.0;
    let mut next = vec![0.0; n];

    let mut jumps = 0;
    while mass > epsilon {
        if jumps == max_jumps {
            return Err(SojournError::NoConvergence { jumps });
        }
        jumps += 1;
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut absorbed = 0.0;
        let mut lost = 0.0;
        for (x, &p) in current.iter().enumerate().skip(1) {
            if p == 0.0 {
                continue;
            }
            next[x] += p * chain.stay[x];
            lost += p * chain.lost[x];
            for (y, r) in chain.row(x) {
                if y == 0 {
                    absorbed += p * r;
                } else {
                    next[y] += p * r;
                }
            }
        }
        std::mem::swap(&mut current, &mut next);
        let new_mass: f64 = current.iter().sum();
        h.push(absorbed);
        h_mass_form.push(mass - new_mass - lost);
        clipped_mass += lost;
        mass = new_mass;
    }

    Ok(ErlangMixture {
        alpha: chain.alpha,
        h,
        h_mass_form,
        epsilon,
        initial_deficit: initial.truncation_deficit,
        clipped_mass,
        unresolved_mass: mass,
    })
}

/// Pointwise distribution-function bounds on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfBounds {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub epsilon: f64,
}

/// `L_k(t) = sum_{n<=k} h(n) E_{n,alpha}(t)` and
/// `U_k(t) = L_k(t) + 1 - sum_{n<=k} h(n)`.
pub fn cdf_bounds(mixture: &ErlangMixture, grid: &[f64]) -> CdfBounds {
    let deficit = mixture.deficit();
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    for &t in grid {
        let erlang = erlang_cdf_table(mixture.jumps(), mixture.alpha, t.max(0.0));
        let l: f64 = mixture.h.iter().zip(&erlang).map(|(h, e)| h * e).sum();
        let l = l.clamp(0.0, 1.0);
        lower.push(l);
        upper.push((l + deficit).min(1.0));
    }
    CdfBounds {
        grid: grid.to_vec(),
        lower,
        upper,
        epsilon: mixture.epsilon,
    }
}

/// Lower bound on `E[T^m]`, `alpha^{-m} sum_{n<=k} n (n+1) ... (n+m-1) h(n)`.
/// For `m = 1` this is the truncated mean jump count divided by `alpha`.
pub fn moment_lower_bound(mixture: &ErlangMixture, m: u32) -> f64 {
    let sum: f64 = mixture
        .h
        .iter()
        .enumerate()
        .map(|(n, &h)| rising_factorial(n, m) * h)
        .sum();
    sum / mixture.alpha.powi(m as i32)
}

fn rising_factorial(n: usize, m: u32) -> f64 {
    (0..m as usize).map(|i| (n + i) as f64).product()
}
