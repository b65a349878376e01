use crate::error::{Result, SojournError};
use crate::network::NetworkSpec;

use super::state_space::MarkedStateSpace;

/// Row-compressed generator of the marked-customer process over live states.
///
/// Off-diagonal rates are stored per row (target id 0 is the absorbing
/// aggregate). `outflow[x]` is the total rate out of `x`, including the rate
/// of transitions that would push a queue past the cap; that clipped part is
/// also recorded in `clipped[x]` and has no target, so such rows sum to less
/// than zero.
#[derive(Debug, Clone)]
pub struct Generator {
    pub row_ptr: Vec<usize>,
    pub targets: Vec<u32>,
    pub rates: Vec<f64>,
    pub outflow: Vec<f64>,
    pub clipped: Vec<f64>,
    /// State-independent bound on the outflow, `sum v_j + sum mu_j`.
    pub alpha: f64,
}

impl Generator {
    pub fn states(&self) -> usize {
        self.outflow.len()
    }

    pub fn row(&self, id: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[id]..self.row_ptr[id + 1];
        self.targets[span.clone()]
            .iter()
            .zip(&self.rates[span])
            .map(|(&t, &r)| (t as usize, r))
    }

    pub fn max_outflow(&self) -> f64 {
        self.outflow.iter().cloned().fold(0.0, f64::max)
    }

    /// `sum_y Q(x, y)` including the diagonal.
    pub fn row_sum(&self, id: usize) -> f64 {
        self.row(id).map(|(_, r)| r).sum::<f64>() - self.outflow[id]
    }
}

/// Collects the transitions of one row, merging repeated targets.
struct RowBuilder {
    entries: Vec<(u32, f64)>,
    outflow: f64,
    clipped: f64,
}

impl RowBuilder {
    fn push(&mut self, target: usize, rate: f64) {
        if rate > 0.0 {
            self.entries.push((target as u32, rate));
            self.outflow += rate;
        }
    }

    fn clip(&mut self, rate: f64) {
        if rate > 0.0 {
            self.outflow += rate;
            self.clipped += rate;
        }
    }
}

pub fn build_generator(space: &MarkedStateSpace, spec: &NetworkSpec) -> Generator {
    let n = space.len();
    let nodes = spec.nodes();
    let cap = space.cap();
    let arrivals = spec.arrival_rates();
    let services = spec.service_rates();
    let alpha = spec.total_arrival_rate() + services.iter().sum::<f64>();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut targets = Vec::new();
    let mut rates = Vec::new();
    let mut outflow = vec![0.0; n];
    let mut clipped = vec![0.0; n];
    row_ptr.push(0);
    row_ptr.push(0); // absorbing aggregate has no outgoing transitions

    let mut counts = vec![0usize; nodes];
    let mut next = vec![0usize; nodes];
    let mut row = RowBuilder {
        entries: Vec::with_capacity(4 * nodes * nodes),
        outflow: 0.0,
        clipped: 0.0,
    };

    for id in 1..n {
        let (stage, ahead) = space.decode_into(id, &mut counts);
        let marked = space.stage_node(stage);
        row.entries.clear();
        row.outflow = 0.0;
        row.clipped = 0.0;

        // Exogenous arrivals; at the marked node they join behind.
        for j in 0..nodes {
            if arrivals[j] <= 0.0 {
                continue;
            }
            if counts[j] == cap {
                row.clip(arrivals[j]);
            } else {
                next.copy_from_slice(&counts);
                next[j] += 1;
                row.push(space.index(stage, ahead, &next), arrivals[j]);
            }
        }

        // Background service completions.
        for j in 0..nodes {
            let busy_with_background = if j == marked { ahead > 0 } else { counts[j] > 0 };
            if !busy_with_background {
                continue;
            }
            let served_ahead = if j == marked { ahead - 1 } else { ahead };
            let mu = services[j];
            let exit = spec.exit_probability(j);
            if exit > 0.0 {
                next.copy_from_slice(&counts);
                next[j] -= 1;
                row.push(space.index(stage, served_ahead, &next), mu * exit);
            }
            for l in spec.successors(j) {
                let rate = mu * spec.routing_probability(j, l);
                next.copy_from_slice(&counts);
                next[j] -= 1;
                if next[l] == cap {
                    row.clip(rate);
                    continue;
                }
                next[l] += 1;
                let target = space.index(stage, served_ahead, &next);
                if target != id {
                    row.push(target, rate);
                }
            }
        }

        // Marked customer at the head of its queue.
        if ahead == 0 {
            let mu = services[marked];
            if space.is_fixed_path() {
                if stage + 1 < space.stages() {
                    let to = space.stage_node(stage + 1);
                    row.push(space.index(stage + 1, counts[to], &counts), mu);
                } else {
                    row.push(0, mu);
                }
            } else {
                row.push(0, mu * spec.exit_probability(marked));
                for l in spec.successors(marked) {
                    let target = space.index(l, counts[l], &counts);
                    if target != id {
                        row.push(target, mu * spec.routing_probability(marked, l));
                    }
                }
            }
        }

        row.entries.sort_by_key(|&(t, _)| t);
        let start = targets.len();
        for &(t, r) in &row.entries {
            if targets.len() > start && *targets.last().unwrap() == t {
                *rates.last_mut().unwrap() += r;
            } else {
                targets.push(t);
                rates.push(r);
            }
        }
        row_ptr.push(targets.len());
        outflow[id] = row.outflow;
        clipped[id] = row.clipped;
    }

    Generator {
        row_ptr,
        targets,
        rates,
        outflow,
        clipped,
        alpha,
    }
}

/// Randomized chain `R = I + Q / alpha` over live states, with the absorbing
/// column and the clipped mass kept explicitly.
#[derive(Debug, Clone)]
pub struct RandomizedChain {
    pub alpha: f64,
    pub row_ptr: Vec<usize>,
    pub targets: Vec<u32>,
    pub probs: Vec<f64>,
    /// `R(x, x)`
    pub stay: Vec<f64>,
    /// Mass leaving the truncated box from `x` per jump.
    pub lost: Vec<f64>,
}

impl RandomizedChain {
    pub fn states(&self) -> usize {
        self.stay.len()
    }

    pub fn row(&self, id: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[id]..self.row_ptr[id + 1];
        self.targets[span.clone()]
            .iter()
            .zip(&self.probs[span])
            .map(|(&t, &p)| (t as usize, p))
    }

    /// `R(x, B)`
    pub fn absorption(&self, id: usize) -> f64 {
        self.row(id).filter(|&(t, _)| t == 0).map(|(_, p)| p).sum()
    }

    /// Row sum of `R` plus clipped mass; one up to rounding for every live row.
    pub fn row_total(&self, id: usize) -> f64 {
        self.stay[id] + self.row(id).map(|(_, p)| p).sum::<f64>() + self.lost[id]
    }
}

/// `R = I + Q / alpha`; fails when `alpha` is below the largest outflow.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn randomize(generator: &Generator, alpha: f64) -> Result<RandomizedChain> {
    let max_outflow = generator.max_outflow();
    if !(alpha > 0.0) || alpha < max_outflow * (1.0 - 1e-15) {
        return Err(SojournError::AlphaTooSmall { alpha, max_outflow });
    }
    let stay: Vec<f64> = generator
        .outflow
        .iter()
        .map(|&q| (1.0 - q / alpha).max(0.0))
        .collect();
    let lost = generator.clipped.iter().map(|&c| c / alpha).collect();
    let mut stay = stay;
    // The absorbing aggregate is closed.
    stay[0] = 1.0;
    Ok(RandomizedChain {
        alpha,
        row_ptr: generator.row_ptr.clone(),
        targets: generator.targets.clone(),
        probs: generator.rates.iter().map(|&r| r / alpha).collect(),
        stay,
        lost,
    })
}
