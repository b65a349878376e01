//! Side-by-side view of exact results, randomization bounds and simulation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::moments::{feedback_variance, first_moments, moment_table_overtake_free};
use crate::network::{
    classify_topology, hypoexponential_cdf, independent_path_rates, NetworkSpec, TrafficSolution,
};
use crate::simulator::{empirical_cdf, empirical_moments, simulate, SimConfig, SimStats, DEFAULT_BATCHES};
use crate::uniformization::{sojourn_analysis, AnalysisOptions, PathMode, SojournAnalysis};

/// The node sequence every customer entering at `entry` follows, if routing
/// from there is deterministic.
pub fn unique_path(spec: &NetworkSpec, entry: usize) -> Option<Vec<usize>> {
    let mut path = vec![entry];
    let mut node = entry;
    loop {
        if spec.exit_probability(node) >= 1.0 {
            return Some(path);
        }
        let next = spec.successors(node).find(|&l| spec.routing_probability(node, l) >= 1.0)?;
        if path.contains(&next) {
            return None;
        }
        path.push(next);
        node = next;
    }
}

/// Exact `E[S^order]` for a customer entering at `entry`, where some exact
/// route applies.
///
/// Without a fixed path: the first moment always; higher orders under the
/// overtake-free condition, and order two for the single feedback queue.
/// With a fixed path in an acyclic network: the path sum of means always;
/// higher orders when the network is overtake-free, where the per-node
/// sojourns are independent exponentials.
pub fn exact_moment(
    spec: &NetworkSpec,
    traffic: &TrafficSolution,
    entry: usize,
    path: Option<&[usize]>,
    order: u32,
) -> Option<f64> {
    if !traffic.stable || order == 0 {
        return None;
    }
    let topology = classify_topology(spec);
    match path {
        None => {
            if order == 1 {
                return first_moments(spec, traffic).ok().map(|m| m.values[entry]);
            }
            if topology.overtake_free_moment_condition {
                return moment_table_overtake_free(spec, traffic, order)
                    .ok()
                    .map(|t| t[order as usize - 1][entry]);
            }
            if spec.nodes() == 1 && order == 2 {
                let (v, mu, p) = (spec.arrival_rates()[0], spec.service_rates()[0], spec.routing_probability(0, 0));
                let mean = first_moments(spec, traffic).ok()?.values[0];
                return feedback_variance(v, mu, p).ok().map(|var| var + mean * mean);
            }
            None
        }
        Some(path) => {
            let rates = independent_path_rates(spec, traffic, path).ok()?;
            if order == 1 {
                return Some(rates.iter().map(|r| 1.0 / r).sum());
            }
            if !topology.overtake_free_moment_condition {
                return None;
            }
            Some(independent_sum_moments(&rates, order)[order as usize])
        }
    }
}

/// Raw moments `0..=order` of a sum of independent exponentials.
pub fn independent_sum_moments(rates: &[f64], order: u32) -> Vec<f64> {
    let max = order as usize;
    let mut moments = vec![0.0; max + 1];
    moments[0] = 1.0;
    for &rate in rates {
        let mut exp_moment = vec![1.0; max + 1];
        for k in 1..=max {
            exp_moment[k] = exp_moment[k - 1] * k as f64 / rate;
        }
        let previous = moments.clone();
        for r in 0..=max {
            let mut binomial = 1.0;
            let mut value = 0.0;
            for k in 0..=r {
                value += binomial * exp_moment[k] * previous[r - k];
                binomial = binomial * (r - k) as f64 / (k + 1) as f64;
            }
            moments[r] = value;
        }
    }
    moments
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub entry: usize,
    pub path: Option<Vec<usize>>,
    pub analysis: AnalysisOptions,
    pub tags: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
    /// Path law under the independence approximation, when defined.
    pub f_independent: Option<f64>,
    pub empirical: f64,
    pub dkw: f64,
    /// `f_independent` lies outside `[lower, upper]`.
    pub independent_outside: bool,
    /// `empirical` lies outside `[lower - dkw, upper + dkw]`.
    pub empirical_outside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub order: u32,
    pub exact: Option<f64>,
    pub lower_bound: f64,
    pub simulated: f64,
    pub simulated_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub path: Option<Vec<usize>>,
    pub independent_path: Option<Vec<usize>>,
    pub rows: Vec<CompareRow>,
    pub moments: Vec<MomentRow>,
    pub analysis: SojournAnalysis,
    pub simulation: SimStats,
}

pub fn compare(spec: &NetworkSpec, traffic: &TrafficSolution, options: &CompareOptions) -> Result<Comparison> {
    traffic.require_stable()?;
    let mode = match &options.path {
        Some(p) => PathMode::FixedPath(p.clone()),
        None => PathMode::RandomRouting,
    };
    let analysis = sojourn_analysis(spec, traffic, options.entry, &mode, &options.analysis, &options.grid)?;

    let mut sim_config = SimConfig::new(options.seed, options.tags);
    sim_config.path_filter = options.path.clone();
    sim_config.entry_filter = Some(options.entry);
    let simulation = simulate(spec, &sim_config)?;
    let ecdf = empirical_cdf(&simulation.samples, &options.grid)?;

    let independent_path = if classify_topology(spec).acyclic {
        options.path.clone().or_else(|| unique_path(spec, options.entry))
    } else {
        None
    };
    let independent_rates = independent_path
        .as_deref()
        .and_then(|p| independent_path_rates(spec, traffic, p).ok());

    let rows = options
        .grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let lower = analysis.bounds.lower[i];
            let upper = analysis.bounds.upper[i];
            let f_independent = independent_rates.as_deref().map(|r| hypoexponential_cdf(r, t));
            let empirical = ecdf.values[i];
            CompareRow {
                t,
                lower,
                upper,
                f_independent,
                empirical,
                dkw: ecdf.dkw_half_width,
                independent_outside: f_independent.is_some_and(|f| f < lower || f > upper),
                empirical_outside: empirical < lower - ecdf.dkw_half_width || empirical > upper + ecdf.dkw_half_width,
            }
        })
        .collect();

    let mut moments = Vec::new();
    for bound in &analysis.moment_bounds {
        let sim = empirical_moments(&simulation.samples, bound.order, DEFAULT_BATCHES)?;
        moments.push(MomentRow {
            order: bound.order,
            exact: exact_moment(spec, traffic, options.entry, options.path.as_deref(), bound.order),
            lower_bound: bound.lower_bound,
            simulated: sim.mean,
            simulated_se: sim.mean_se,
        });
    }

    Ok(Comparison {
        path: options.path.clone(),
        independent_path,
        rows,
        moments,
        analysis,
        simulation: simulation.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unique_paths() {
        let tandem = NetworkSpec::tandem(1.0, vec![2.0; 3]).unwrap();
        assert_eq!(unique_path(&tandem, 0), Some(vec![0, 1, 2]));
        assert_eq!(unique_path(&tandem, 1), Some(vec![1, 2]));
        let three = NetworkSpec::three_node(1.0, [3.0, 2.0, 3.0], 0.5).unwrap();
        assert_eq!(unique_path(&three, 0), None);
        assert_eq!(unique_path(&three, 1), Some(vec![1, 2]));
    }

    #[test]
    fn erlang_sum_moments() {
        // Erlang(3, 1): n (n+1) ... (n+r-1)
        let m = independent_sum_moments(&[1.0; 3], 4);
        assert_eq!(m, vec![1.0, 3.0, 12.0, 60.0, 360.0]);
    }

    #[test]
    fn exact_moments_by_topology() {
        let tandem = NetworkSpec::tandem(1.0, vec![2.0; 3]).unwrap();
        let t = tandem.solve_traffic().unwrap();
        assert_relative_eq!(exact_moment(&tandem, &t, 0, None, 3).unwrap(), 60.0, max_relative = 1e-12);
        assert_relative_eq!(exact_moment(&tandem, &t, 0, Some(&[0, 1, 2]), 2).unwrap(), 12.0, max_relative = 1e-12);

        let fb = NetworkSpec::feedback_queue(1.0, 3.0, 0.5).unwrap();
        let ft = fb.solve_traffic().unwrap();
        assert_relative_eq!(exact_moment(&fb, &ft, 0, None, 1).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(exact_moment(&fb, &ft, 0, None, 2).unwrap(), 44.0 / 7.0 + 4.0, max_relative = 1e-12);
        assert_eq!(exact_moment(&fb, &ft, 0, None, 3), None);

        let three = NetworkSpec::three_node(1.0, [3.0, 2.0, 3.0], 0.5).unwrap();
        let tt = three.solve_traffic().unwrap();
        assert_relative_eq!(
            exact_moment(&three, &tt, 0, Some(&[0, 1, 2]), 1).unwrap(),
            0.5 + 1.0 / 1.5 + 0.5,
            max_relative = 1e-12
        );
        assert_eq!(exact_moment(&three, &tt, 0, Some(&[0, 1, 2]), 2), None);
    }
}
