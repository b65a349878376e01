//! Open Jackson network model: validation, traffic equations, product-form
//! equilibrium and routing-topology classification.
//!
//! Nodes are indexed from zero in the library API.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::erlang::erlang_cdf;
use crate::error::{Result, SojournError};

const ROW_SUM_TOLERANCE: f64 = 1e-12;
const SPECTRAL_TOLERANCE: f64 = 1e-9;
/// Intensities at or above `1 - STABILITY_MARGIN` are treated as unstable.
pub const STABILITY_MARGIN: f64 = 1e-12;

/// A validated open Jackson network.
///
/// Every node has a single exponential server with FCFS discipline and an
/// unbounded waiting room. After service at node `j` a customer moves to
/// node `l` with probability `routing[j][l]`, or leaves with probability
/// `exit_probability(j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSpec {
    arrival_rates: Vec<f64>,
    service_rates: Vec<f64>,
    routing: Vec<Vec<f64>>,
    exit: Vec<f64>,
}

impl NetworkSpec {
    /// Validates raw network data.
    pub fn new(arrival_rates: Vec<f64>, service_rates: Vec<f64>, routing: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self::new_allow_empty(arrival_rates, service_rates, routing)?;
        if spec.arrival_rates.iter().sum::<f64>() <= 0.0 {
            return Err(SojournError::NoExogenousArrivals);
        }
        Ok(spec)
    }

    /// Like [`NetworkSpec::new`] but accepts a network with no exogenous
    /// arrivals. Such a network is useful only for degenerate analyses of a
    /// lone customer travelling through an otherwise empty system.
    pub fn new_allow_empty(
        arrival_rates: Vec<f64>,
        service_rates: Vec<f64>,
        routing: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let nodes = service_rates.len();
        if nodes == 0 {
            return Err(SojournError::InvalidSpec("network needs at least one node".into()));
        }
        if arrival_rates.len() != nodes {
            return Err(SojournError::InvalidSpec(format!(
                "{} arrival rates for {nodes} nodes",
                arrival_rates.len()
            )));
        }
        if routing.len() != nodes || routing.iter().any(|row| row.len() != nodes) {
            return Err(SojournError::InvalidSpec(format!("routing matrix must be {nodes}x{nodes}")));
        }
        for (j, &v) in arrival_rates.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(SojournError::NegativeRate(format!("arrival rate {v} at node {j}")));
            }
        }
        for (j, &mu) in service_rates.iter().enumerate() {
            if !mu.is_finite() || mu <= 0.0 {
                return Err(SojournError::NegativeRate(format!("service rate {mu} at node {j}")));
            }
        }
        let mut exit = Vec::with_capacity(nodes);
        for (j, row) in routing.iter().enumerate() {
            for (l, &p) in row.iter().enumerate() {
                if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                    return Err(SojournError::InvalidSpec(format!(
                        "routing probability {p} from node {j} to node {l}"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if sum > 1.0 + ROW_SUM_TOLERANCE {
                return Err(SojournError::RowSumExceedsOne { row: j, sum });
            }
            exit.push((1.0 - sum).max(0.0));
        }

        let spec = Self {
            arrival_rates,
            service_rates,
            routing,
            exit,
        };
        let radius = spec.routing_spectral_radius();
        if radius >= 1.0 - SPECTRAL_TOLERANCE {
            return Err(SojournError::NonInvertibleRouting { radius });
        }
        Ok(spec)
    }

    /// Series of `service_rates.len()` M/M/1 queues fed at node 0 with rate `arrival_rate`.
    pub fn tandem(arrival_rate: f64, service_rates: Vec<f64>) -> Result<Self> {
        let nodes = service_rates.len();
        let mut arrivals = vec![0.0; nodes];
        if nodes > 0 {
            arrivals[0] = arrival_rate;
        }
        let mut routing = vec![vec![0.0; nodes]; nodes];
        for j in 1..nodes {
            routing[j - 1][j] = 1.0;
        }
        Self::new(arrivals, service_rates, routing)
    }

    /// Single M/M/1 queue with instantaneous Bernoulli feedback probability `feedback`.
    pub fn feedback_queue(arrival_rate: f64, service_rate: f64, feedback: f64) -> Result<Self> {
        Self::new(vec![arrival_rate], vec![service_rate], vec![vec![feedback]])
    }

    /// Three-node acyclic network: node 0 feeds node 1 with probability `p`
    /// and node 2 with probability `1 - p`; node 1 always feeds node 2.
    pub fn three_node(arrival_rate: f64, service_rates: [f64; 3], p: f64) -> Result<Self> {
        Self::new(
            vec![arrival_rate, 0.0, 0.0],
            service_rates.to_vec(),
            vec![vec![0.0, p, 1.0 - p], vec![0.0, 0.0, 1.0], vec![0.0; 3]],
        )
    }

    pub fn nodes(&self) -> usize {
        self.service_rates.len()
    }

    pub fn arrival_rates(&self) -> &[f64] {
        &self.arrival_rates
    }

    pub fn service_rates(&self) -> &[f64] {
        &self.service_rates
    }

    pub fn routing(&self) -> &[Vec<f64>] {
        &self.routing
    }

    pub fn routing_probability(&self, from: usize, to: usize) -> f64 {
        self.routing[from][to]
    }

    /// Probability `q_j` that a customer leaves the network after service at `node`.
    pub fn exit_probability(&self, node: usize) -> f64 {
        self.exit[node]
    }

    pub fn exit_probabilities(&self) -> &[f64] {
        &self.exit
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.arrival_rates.iter().sum()
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.nodes() {
            Ok(())
        } else {
            Err(SojournError::NodeOutOfRange {
                node,
                nodes: self.nodes(),
            })
        }
    }

    fn routing_matrix(&self) -> DMatrix<f64> {
        let n = self.nodes();
        DMatrix::from_fn(n, n, |j, l| self.routing[j][l])
    }

    fn routing_spectral_radius(&self) -> f64 {
        self.routing_matrix()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Successors of `node` in the routing digraph.
    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.routing[node]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(l, _)| l)
    }

    /// `true` when routing is a chain `0 -> 1 -> ... -> J-1` with arrivals only at node 0.
    pub fn is_tandem(&self) -> bool {
        let n = self.nodes();
        self.arrival_rates[1..].iter().all(|&v| v == 0.0)
            && (0..n).all(|j| {
                (0..n).all(|l| {
                    let expected = if l == j + 1 { 1.0 } else { 0.0 };
                    self.routing[j][l] == expected
                })
            })
    }

    /// Solves `(I - P^T) theta = v` by dense LU.
    pub fn solve_traffic(&self) -> Result<TrafficSolution> {
        solve_traffic_equations(self)
    }
}

/// Total arrival rates and intensities of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSolution {
    pub theta: Vec<f64>,
    pub rho: Vec<f64>,
    pub stable: bool,
    /// Service rates the intensities were derived from.
    pub service_rates: Vec<f64>,
}

impl TrafficSolution {
    /// Errors with the first node whose intensity is not strictly below one.
    pub fn require_stable(&self) -> Result<()> {
        match self.rho.iter().position(|&r| r >= 1.0 - STABILITY_MARGIN) {
            None => Ok(()),
            Some(node) => Err(SojournError::UnstableNetwork {
                node,
                rho: self.rho[node],
            }),
        }
    }

    /// Rate `mu_j - theta_j` of the exponential sojourn time at `node`.
    pub fn sojourn_rate(&self, node: usize) -> f64 {
        self.service_rates[node] - self.theta[node]
    }

    pub fn nodes(&self) -> usize {
        self.theta.len()
    }
}

pub fn solve_traffic_equations(spec: &NetworkSpec) -> Result<TrafficSolution> {
    let n = spec.nodes();
    let system = DMatrix::<f64>::identity(n, n) - spec.routing_matrix().transpose();
    let rhs = DVector::from_column_slice(spec.arrival_rates());
    let theta = system
        .lu()
        .solve(&rhs)
        .ok_or(SojournError::NonInvertibleRouting { radius: f64::NAN })?;
    let theta: Vec<f64> = theta
        .iter()
        .zip(spec.arrival_rates())
        .map(|(&t, &v)| t.max(v))
        .collect();
    let rho: Vec<f64> = theta
        .iter()
        .zip(spec.service_rates())
        .map(|(t, mu)| t / mu)
        .collect();
    let stable = rho.iter().all(|&r| r < 1.0 - STABILITY_MARGIN);
    Ok(TrafficSolution {
        theta,
        rho,
        stable,
        service_rates: spec.service_rates().to_vec(),
    })
}

/// Product-form equilibrium probability of the population vector `counts`.
pub fn stationary_probability(traffic: &TrafficSolution, counts: &[usize]) -> Result<f64> {
    traffic.require_stable()?;
    if counts.len() != traffic.nodes() {
        return Err(SojournError::InvalidSpec(format!(
            "population vector has {} entries for {} nodes",
            counts.len(),
            traffic.nodes()
        )));
    }
    Ok(counts
        .iter()
        .zip(&traffic.rho)
        .map(|(&n, &rho)| (1.0 - rho) * rho.powi(n as i32))
        .product())
}

/// Structural properties of the routing digraph (edge `j -> l` iff `p_jl > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyClass {
    pub acyclic: bool,
    pub has_feedback: bool,
    /// No self-loops and at most one directed path between any ordered pair of nodes.
    pub overtake_free_moment_condition: bool,
}

pub fn classify_topology(spec: &NetworkSpec) -> TopologyClass {
    let order = topological_order(spec);
    let acyclic = order.is_some();
    let no_self_loops = (0..spec.nodes()).all(|j| spec.routing_probability(j, j) == 0.0);
    let single_paths = match &order {
        Some(order) => path_counts(spec, order)
            .iter()
            .all(|row| row.iter().all(|&c| c <= 1)),
        None => false,
    };
    TopologyClass {
        acyclic,
        has_feedback: !acyclic,
        overtake_free_moment_condition: no_self_loops && single_paths,
    }
}

/// Kahn's algorithm, always releasing the lowest-indexed ready node first.
/// Returns `None` when the routing digraph has a cycle.
pub fn topological_order(spec: &NetworkSpec) -> Option<Vec<usize>> {
    let n = spec.nodes();
    let mut indegree = vec![0usize; n];
    for j in 0..n {
        for l in spec.successors(j) {
            indegree[l] += 1;
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&j| indegree[j] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(j) = ready.pop_first() {
        order.push(j);
        for l in spec.successors(j) {
            indegree[l] -= 1;
            if indegree[l] == 0 {
                ready.insert(l);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Number of distinct directed paths of length >= 1 between every ordered pair
/// of a DAG, saturating at `u64::MAX`.
fn path_counts(spec: &NetworkSpec, order: &[usize]) -> Vec<Vec<u64>> {
    let n = spec.nodes();
    let mut counts = vec![vec![0u64; n]; n];
    // paths(s -> t) = sum over successors l of s: [l == t] + paths(l -> t),
    // filled in reverse topological order.
    for &s in order.iter().rev() {
        for l in spec.successors(s) {
            counts[s][l] = counts[s][l].saturating_add(1);
            for t in 0..n {
                counts[s][t] = counts[s][t].saturating_add(counts[l][t]);
            }
        }
    }
    counts
}

/// Distribution function of the sojourn time at `node` of an acyclic network,
/// `1 - exp(-(mu_j - theta_j) t)`.
pub fn node_sojourn_cdf_acyclic(spec: &NetworkSpec, traffic: &TrafficSolution, node: usize, t: f64) -> Result<f64> {
    spec.check_node(node)?;
    if !classify_topology(spec).acyclic {
        return Err(SojournError::NotAcyclic);
    }
    traffic.require_stable()?;
    Ok(exponential_cdf(traffic.sojourn_rate(node), t))
}

fn exponential_cdf(rate: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        -(-rate * t).exp_m1()
    }
}

/// Distribution function of the path sojourn time computed as if the
/// per-node sojourn times along `path` were independent exponentials.
///
/// In overtake-free acyclic networks this is exact; with overtaking it is only
/// an approximation.
pub fn path_sojourn_cdf_independent(
    spec: &NetworkSpec,
    traffic: &TrafficSolution,
    path: &[usize],
    t: f64,
) -> Result<f64> {
    let rates = independent_path_rates(spec, traffic, path)?;
    Ok(hypoexponential_cdf(&rates, t))
}

/// Validates `path` and returns the per-node sojourn rates along it.
pub fn independent_path_rates(spec: &NetworkSpec, traffic: &TrafficSolution, path: &[usize]) -> Result<Vec<f64>> {
    if path.is_empty() {
        return Err(SojournError::UnreachablePath("empty path".into()));
    }
    for &node in path {
        spec.check_node(node)?;
    }
    if !classify_topology(spec).acyclic {
        return Err(SojournError::NotAcyclic);
    }
    let mut seen = vec![false; spec.nodes()];
    for &node in path {
        if std::mem::replace(&mut seen[node], true) {
            return Err(SojournError::RepeatedNode(node));
        }
    }
    traffic.require_stable()?;
    Ok(path.iter().map(|&j| traffic.sojourn_rate(j)).collect())
}

/// Distribution function of a sum of independent exponentials with the given rates.
///
/// All-equal rates (within `1e-8` of the largest) use the Erlang form with the
/// averaged rate; well-separated rates use the partial-fraction form. Mixed
/// configurations, where only some rates nearly coincide, are evaluated by
/// randomizing the pure-birth phase chain, which has no cancellation.
pub fn hypoexponential_cdf(rates: &[f64], t: f64) -> f64 {
    if t <= 0.0 || rates.is_empty() {
        return if rates.is_empty() { 1.0 } else { 0.0 };
    }
    let max_rate = rates.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-8 * max_rate;
    let close = |a: f64, b: f64| (a - b).abs() < tol;

    if rates.iter().all(|&r| close(r, rates[0])) {
        let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
        return erlang_cdf(rates.len(), mean_rate, t);
    }
    let any_close_pair = rates
        .iter()
        .enumerate()
        .any(|(i, &a)| rates[i + 1..].iter().any(|&b| close(a, b)));
    if !any_close_pair {
        let mut survival = 0.0;
        for (i, &ri) in rates.iter().enumerate() {
            let coefficient: f64 = rates
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, &rk)| rk / (rk - ri))
                .product();
            survival += coefficient * (-ri * t).exp();
        }
        return (1.0 - survival).clamp(0.0, 1.0);
    }
    phase_chain_cdf(rates, t)
}

/// Distribution function of the absorption time of the phase chain
/// `0 -> 1 -> ... -> n` with the given stage rates, by uniformization.
fn phase_chain_cdf(rates: &[f64], t: f64) -> f64 {
    let alpha = rates.iter().cloned().fold(0.0, f64::max);
    let stages = rates.len();
    let mut mass = vec![0.0; stages];
    mass[0] = 1.0;
    let mut cdf = 0.0;
    let mut weights = crate::erlang::PoissonWeights::new(alpha * t);
    let mut lower_poisson = 0.0;
    loop {
        let w = weights.next().unwrap_or(0.0);
        lower_poisson += w;
        let mut next = vec![0.0; stages];
        let mut absorbed = 0.0;
        for s in 0..stages {
            let jump = rates[s] / alpha;
            next[s] += mass[s] * (1.0 - jump);
            if s + 1 < stages {
                next[s + 1] += mass[s] * jump;
            } else {
                absorbed = mass[s] * jump;
            }
        }
        mass = next;
        // absorption exactly at this jump contributes h(n) * E_n(t),
        // with E_n(t) = 1 - P(N(t) < n) = 1 - lower_poisson.
        cdf += absorbed * (1.0 - lower_poisson).max(0.0);
        let remaining: f64 = mass.iter().sum();
        if remaining < 1e-17 || lower_poisson >= 1.0 - 1e-17 {
            break;
        }
    }
    cdf.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tandem_validates_with_exit_only_at_last_node() {
        let spec = NetworkSpec::tandem(1.0, vec![2.0, 2.0, 2.0]).unwrap();
        assert_eq!(spec.exit_probabilities(), &[0.0, 0.0, 1.0]);
        assert!(spec.is_tandem());
    }

    #[test]
    fn row_sum_above_one_is_rejected() {
        let err = NetworkSpec::new(vec![1.0, 0.0], vec![2.0, 2.0], vec![vec![0.6, 0.6], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, SojournError::RowSumExceedsOne { row: 0, .. }));
    }

    #[test]
    fn closed_loop_is_rejected() {
        let err = NetworkSpec::feedback_queue(1.0, 2.0, 1.0).unwrap_err();
        assert!(matches!(err, SojournError::NonInvertibleRouting { .. }));
        let err = NetworkSpec::new(
            vec![1.0, 0.0],
            vec![2.0, 2.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap_err();
        assert!(matches!(err, SojournError::NonInvertibleRouting { .. }));
    }

    #[test]
    fn negative_and_missing_arrivals() {
        assert!(matches!(
            NetworkSpec::new(vec![-1.0], vec![2.0], vec![vec![0.0]]),
            Err(SojournError::NegativeRate(_))
        ));
        assert!(matches!(
            NetworkSpec::new(vec![f64::NAN], vec![2.0], vec![vec![0.0]]),
            Err(SojournError::NegativeRate(_))
        ));
        assert!(matches!(
            NetworkSpec::new(vec![0.0], vec![2.0], vec![vec![0.0]]),
            Err(SojournError::NoExogenousArrivals)
        ));
        assert!(NetworkSpec::new_allow_empty(vec![0.0], vec![2.0], vec![vec![0.0]]).is_ok());
    }

    #[test]
    fn traffic_of_reference_topologies() {
        let t = NetworkSpec::tandem(1.0, vec![2.0; 3]).unwrap().solve_traffic().unwrap();
        for &theta in &t.theta {
            assert_relative_eq!(theta, 1.0, max_relative = 1e-12);
        }
        let f = NetworkSpec::new(vec![1.0], vec![3.0], vec![vec![0.5]]).unwrap().solve_traffic().unwrap();
        assert_relative_eq!(f.theta[0], 2.0, max_relative = 1e-12);
        let three = NetworkSpec::three_node(1.0, [2.0, 2.0, 2.0], 0.4).unwrap().solve_traffic().unwrap();
        assert_relative_eq!(three.theta[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(three.theta[1], 0.4, max_relative = 1e-12);
        assert_relative_eq!(three.theta[2], 1.0, max_relative = 1e-12);
        assert!(three.stable);
    }

    #[test]
    fn unstable_flag() {
        let t = NetworkSpec::tandem(2.0, vec![3.0, 2.0]).unwrap().solve_traffic().unwrap();
        assert!(!t.stable);
        assert!(matches!(t.require_stable(), Err(SojournError::UnstableNetwork { node: 1, .. })));
    }

    #[test]
    fn product_form_values() {
        let single = NetworkSpec::tandem(1.0, vec![2.0]).unwrap().solve_traffic().unwrap();
        assert_relative_eq!(stationary_probability(&single, &[0]).unwrap(), 0.5);
        let t = NetworkSpec::tandem(1.0, vec![2.0; 3]).unwrap().solve_traffic().unwrap();
        assert_relative_eq!(stationary_probability(&t, &[0, 0, 0]).unwrap(), 0.125, epsilon = 1e-15);
        assert_relative_eq!(stationary_probability(&t, &[1, 1, 1]).unwrap(), 0.015625, epsilon = 1e-15);
    }

    #[test]
    fn topology_of_reference_networks() {
        let tandem = classify_topology(&NetworkSpec::tandem(1.0, vec![2.0; 4]).unwrap());
        assert!(tandem.acyclic && !tandem.has_feedback && tandem.overtake_free_moment_condition);

        let feedback = classify_topology(&NetworkSpec::feedback_queue(1.0, 3.0, 0.5).unwrap());
        assert!(feedback.has_feedback && !feedback.acyclic && !feedback.overtake_free_moment_condition);

        let three = classify_topology(&NetworkSpec::three_node(1.0, [2.0, 2.0, 2.0], 0.4).unwrap());
        assert!(three.acyclic && !three.overtake_free_moment_condition);
    }

    #[test]
    fn topological_order_breaks_ties_by_index() {
        let spec = NetworkSpec::new(
            vec![1.0, 1.0, 0.0],
            vec![5.0; 3],
            vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0], vec![0.0; 3]],
        )
        .unwrap();
        assert_eq!(topological_order(&spec).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn node_sojourn_cdf_values() {
        let spec = NetworkSpec::tandem(1.0, vec![2.0]).unwrap();
        let t = spec.solve_traffic().unwrap();
        assert_eq!(node_sojourn_cdf_acyclic(&spec, &t, 0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(node_sojourn_cdf_acyclic(&spec, &t, 0, 2f64.ln()).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(node_sojourn_cdf_acyclic(&spec, &t, 0, 1e3).unwrap(), 1.0);
        let fb = NetworkSpec::feedback_queue(1.0, 3.0, 0.5).unwrap();
        let ft = fb.solve_traffic().unwrap();
        assert_eq!(node_sojourn_cdf_acyclic(&fb, &ft, 0, 1.0), Err(SojournError::NotAcyclic));
    }

    #[test]
    fn independent_path_cdf_values() {
        let spec = NetworkSpec::tandem(1.0, vec![2.0; 3]).unwrap();
        let t = spec.solve_traffic().unwrap();
        let v = path_sojourn_cdf_independent(&spec, &t, &[0, 1, 2], 3.0).unwrap();
        assert_relative_eq!(v, 1.0 - (-3.0f64).exp() * 8.5, epsilon = 1e-14);
        assert!((v - 0.5768).abs() < 1e-4);

        let single = path_sojourn_cdf_independent(&spec, &t, &[1], 0.7).unwrap();
        assert_relative_eq!(single, node_sojourn_cdf_acyclic(&spec, &t, 1, 0.7).unwrap(), epsilon = 1e-15);

        assert_eq!(
            path_sojourn_cdf_independent(&spec, &t, &[0, 1, 1], 1.0),
            Err(SojournError::RepeatedNode(1))
        );
    }

    #[test]
    fn two_rate_hypoexponential() {
        for t in [0.1f64, 0.5, 1.0, 2.0, 6.0] {
            let expected = 1.0 - 2.0 * (-t).exp() + (-2.0 * t).exp();
            assert_relative_eq!(hypoexponential_cdf(&[1.0, 2.0], t), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn nearly_equal_rates_fall_back_to_erlang() {
        let v = hypoexponential_cdf(&[1.0, 1.0 + 1e-12, 1.0 - 1e-12], 2.0);
        assert_relative_eq!(v, erlang_cdf(3, 1.0, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn mixed_clusters_match_limit() {
        // Rates (1, 1, 2) against the distinct-rate form just off the coincidence.
        for t in [0.3, 1.0, 2.5, 7.0] {
            let mixed = hypoexponential_cdf(&[1.0, 1.0, 2.0], t);
            let near = hypoexponential_cdf(&[1.0, 1.0 + 1e-4, 2.0], t);
            assert_relative_eq!(mixed, near, epsilon = 1e-4);
        }
    }
}
