//! Exact sojourn-time moments from the network flow equations.
//!
//! `T_j` denotes the remaining time in the network of a customer that has
//! just arrived at node `j`. First moments follow from a linear system for
//! every stable network. Higher moments need the cross terms between `T_l`
//! and the queue length `N_j` found at `j`; when the routing digraph has no
//! self-loops and at most one path between any two nodes these factorize and
//! the flow equations become a recursion over the reverse topological order.
//!
//! The factorized cross term uses the factorial moments of the geometric
//! queue length `P(N = k) = (1 - rho) rho^k`:
//!
//! ```text
//! E[(N + 1)(N + 2) ... (N + n)] = n! / (1 - rho)^n
//! ```
//!
//! so that `mu^{-n} E[prod (N + m)] = n! / (mu - theta)^n`. The `n`-th term is
//! then the `n`-th moment of an exponential with rate `mu - theta`, and the
//! recursion is the binomial expansion of `E[(S_j + T_l)^r]` with `S_j`
//! independent of `T_l`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SojournError};
use crate::network::{classify_topology, topological_order, NetworkSpec, TrafficSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentMethod {
    MatrixFirstMoment,
    OvertakeFreeRecursion,
    ClosedForm,
}

/// `values[j] = E[T_j^order]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub order: u32,
    pub values: Vec<f64>,
    pub method: MomentMethod,
}

/// `E[T] = (I - P)^{-1} b` with `b_j = 1 / (mu_j - theta_j)`; valid for any stable network.
pub fn first_moments(spec: &NetworkSpec, traffic: &TrafficSolution) -> Result<MomentReport> {
    traffic.require_stable()?;
    let n = spec.nodes();
    let system = DMatrix::from_fn(n, n, |j, l| {
        let identity = if j == l { 1.0 } else { 0.0 };
        identity - spec.routing_probability(j, l)
    });
    let rhs = DVector::from_fn(n, |j, _| 1.0 / traffic.sojourn_rate(j));
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or(SojournError::NonInvertibleRouting { radius: f64::NAN })?;
    Ok(MomentReport {
        order: 1,
        values: solution.iter().copied().collect(),
        method: MomentMethod::MatrixFirstMoment,
    })
}

/// Mean number of customers found at `node` by an arrival, `theta / (mu - theta)`.
pub fn mean_queue_length(traffic: &TrafficSolution, node: usize) -> Result<f64> {
    traffic.require_stable()?;
    Ok(traffic.theta[node] / traffic.sojourn_rate(node))
}

/// Second moments by the overtake-free recursion
/// `E[T_j^2] = 2 d_j^{-2} + sum_l p_jl E[T_l^2] + 2 d_j^{-1} sum_l p_jl E[T_l]`,
/// with `d_j = mu_j - theta_j` and `first` the first moments.
pub fn second_moments_overtake_free(
    spec: &NetworkSpec,
    traffic: &TrafficSolution,
    first: &MomentReport,
) -> Result<MomentReport> {
    let order = overtake_free_order(spec, traffic)?;
    let mut second = vec![0.0; spec.nodes()];
    for &j in order.iter().rev() {
        let d = traffic.sojourn_rate(j);
        let mut carry = 0.0;
        let mut cross = 0.0;
        for l in spec.successors(j) {
            let p = spec.routing_probability(j, l);
            carry += p * second[l];
            cross += p * first.values[l];
        }
        second[j] = 2.0 / (d * d) + carry + 2.0 / d * cross;
    }
    Ok(MomentReport {
        order: 2,
        values: second,
        method: MomentMethod::OvertakeFreeRecursion,
    })
}

/// Moments of orders `1..=order` by the overtake-free recursion; element `r - 1`
/// holds order `r`.
pub fn moment_table_overtake_free(spec: &NetworkSpec, traffic: &TrafficSolution, order: u32) -> Result<Vec<Vec<f64>>> {
    let topo = overtake_free_order(spec, traffic)?;
    let n = spec.nodes();
    let max = order as usize;
    // table[r][j] = E[T_j^r], table[0][j] = 1.
    let mut table = vec![vec![0.0; n]; max + 1];
    table[0] = vec![1.0; n];
    for &j in topo.iter().rev() {
        let d = traffic.sojourn_rate(j);
        // exponential moments n!/d^n for n = 0..=max
        let mut exp_moment = vec![1.0; max + 1];
        for k in 1..=max {
            exp_moment[k] = exp_moment[k - 1] * k as f64 / d;
        }
        for r in 1..=max {
            let mut value = exp_moment[r];
            for l in spec.successors(j) {
                let p = spec.routing_probability(j, l);
                let mut binomial = 1.0;
                let mut expansion = 0.0;
                for k in 0..r {
                    // C(r, k) E[S^k] E[T_l^{r-k}]
                    expansion += binomial * exp_moment[k] * table[r - k][l];
                    binomial = binomial * (r - k) as f64 / (k + 1) as f64;
                }
                value += p * expansion;
            }
            table[r][j] = value;
        }
    }
    table.remove(0);
    Ok(table)
}

/// `E[T_j^order]` by the overtake-free recursion.
pub fn higher_moments_overtake_free(spec: &NetworkSpec, traffic: &TrafficSolution, order: u32) -> Result<MomentReport> {
    if order == 0 {
        return Err(SojournError::InvalidSpec("moment order must be at least 1".into()));
    }
    let mut table = moment_table_overtake_free(spec, traffic, order)?;
    Ok(MomentReport {
        order,
        values: table.pop().unwrap_or_default(),
        method: MomentMethod::OvertakeFreeRecursion,
    })
}

fn overtake_free_order(spec: &NetworkSpec, traffic: &TrafficSolution) -> Result<Vec<usize>> {
    if !classify_topology(spec).overtake_free_moment_condition {
        return Err(SojournError::NotOvertakeFree);
    }
    traffic.require_stable()?;
    topological_order(spec).ok_or(SojournError::NotOvertakeFree)
}

/// Variance of the remaining sojourn from `node` in a tandem series,
/// `sum_{l >= node} (mu_l - v)^{-2}`.
pub fn tandem_variance(spec: &NetworkSpec, traffic: &TrafficSolution, node: usize) -> Result<f64> {
    if !spec.is_tandem() {
        return Err(SojournError::NotTandem);
    }
    spec.check_node(node)?;
    traffic.require_stable()?;
    Ok((node..spec.nodes())
        .map(|l| traffic.sojourn_rate(l).powi(-2))
        .sum())
}

fn check_feedback(v: f64, mu: f64, p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(SojournError::InvalidProbability(p));
    }
    if (1.0 - p) * mu <= v {
        return Err(SojournError::UnstableNetwork {
            node: 0,
            rho: v / ((1.0 - p) * mu),
        });
    }
    Ok(())
}

/// Sojourn-time variance of an M/M/1 queue with Bernoulli feedback `p`:
///
/// ```text
/// VAR[T] = 1/((1-p) mu - v)^2 * ((1-p^2) mu + v p) / ((1-p^2) mu - v p)
/// ```
pub fn feedback_variance(v: f64, mu: f64, p: f64) -> Result<f64> {
    check_feedback(v, mu, p)?;
    let gap = (1.0 - p) * mu - v;
    let base = (1.0 - p * p) * mu;
    Ok((base + v * p) / (gap * gap * (base - v * p)))
}

/// Covariance between the queue length found by an arrival and its sojourn
/// time in the Bernoulli-feedback queue, `v (1-p) mu / ((1-p^2) mu - v p)`.
pub fn feedback_covariance(v: f64, mu: f64, p: f64) -> Result<f64> {
    check_feedback(v, mu, p)?;
    Ok(v * (1.0 - p) * mu / ((1.0 - p * p) * mu - v * p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationVerdict {
    ConditionsHold,
    ConditionsFail,
}

/// Evaluated sufficient conditions for positive correlation of the sojourn
/// times at nodes 1 and 3 of the three-node network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCondition {
    pub verdict: CorrelationVerdict,
    /// Left-hand side of the rate inequality; it must be below one.
    pub rate_condition_lhs: f64,
    pub rate_condition_holds: bool,
    /// Admissible interval for the branching probability; `None` when the
    /// discriminant is negative.
    pub p_interval: Option<(f64, f64)>,
    pub discriminant: f64,
}

/// Evaluates the rate inequality and the two-sided bound on `p` exactly in
/// their published form. With `a = v + mu1 + mu2 + mu3`,
/// `x = 1/(mu1 - v)` and `y = 1/(mu3 - v)`:
///
/// ```text
/// 2a ((x + y)/a + x^2 + y^2)^{1/2} < 1
/// z± = 1/(2a) ± (1/a^2 + 4(x + y)/a - 4(x^2 + y^2))^{1/2} / 2
/// mu2 z- / (1 - v z-) < p < mu2 z+ / (1 - v z+)
/// ```
///
/// The verdict is a sufficient condition only and is never used without an
/// independent check of the simulated correlation sign.
pub fn three_node_positive_correlation(v: f64, mu1: f64, mu2: f64, mu3: f64, p: f64) -> Result<CorrelationCondition> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SojournError::InvalidProbability(p));
    }
    for (node, mu, load) in [(0, mu1, v), (1, mu2, p * v), (2, mu3, v)] {
        if mu <= load {
            return Err(SojournError::UnstableNetwork { node, rho: load / mu });
        }
    }
    let a = v + mu1 + mu2 + mu3;
    let x = 1.0 / (mu1 - v);
    let y = 1.0 / (mu3 - v);
    let rate_condition_lhs = 2.0 * a * ((x + y) / a + x * x + y * y).sqrt();
    let rate_condition_holds = rate_condition_lhs < 1.0;

    let discriminant = 1.0 / (a * a) + 4.0 / a * (x + y) - 4.0 * (x * x + y * y);
    let p_interval = (discriminant >= 0.0).then(|| {
        let root = 0.5 * discriminant.sqrt();
        let bound = |z: f64| mu2 * z / (1.0 - v * z);
        (bound(0.5 / a - root), bound(0.5 / a + root))
    });
    let inside = p_interval.is_some_and(|(lo, hi)| lo < p && p < hi);
    let verdict = if rate_condition_holds && inside {
        CorrelationVerdict::ConditionsHold
    } else {
        CorrelationVerdict::ConditionsFail
    };
    Ok(CorrelationCondition {
        verdict,
        rate_condition_lhs,
        rate_condition_holds,
        p_interval,
        discriminant,
    })
}
