use std::fs;
use std::path::Path;

use jackson_sojourn::compare::{compare as run_compare, exact_moment, unique_path, CompareOptions};
use jackson_sojourn::io::{parse_network, GridSpec};
use jackson_sojourn::moments::{
    feedback_covariance, feedback_variance, first_moments, mean_queue_length, moment_table_overtake_free,
    tandem_variance, three_node_positive_correlation, CorrelationCondition,
};
use jackson_sojourn::network::{classify_topology, independent_path_rates, hypoexponential_cdf};
use jackson_sojourn::simulator::{
    correlation, empirical_moments, simulate as run_simulation, CorrelationEstimate, MomentEstimate, SimConfig,
    SimStats, DEFAULT_BATCHES,
};
use jackson_sojourn::uniformization::{default_cap, sojourn_analysis, AnalysisOptions, Deficits, MomentBound, PathMode};
use jackson_sojourn::{NetworkSpec, SojournError, TopologyClass, TrafficSolution};
use serde::Serialize;

use crate::output::{OutDir, RunManifest};
use crate::{AnalyzeArgs, Bounds, CdfArgs, CliError, CliResult, CompareArgs, Route, SimulateArgs};

fn load_network(path: &Path) -> CliResult<NetworkSpec> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_network(&text)?)
}

fn to_internal(spec: &NetworkSpec, node: usize) -> CliResult<usize> {
    if node == 0 {
        return Err(CliError::Usage("nodes are numbered from 1".into()));
    }
    spec.check_node(node - 1)?;
    Ok(node - 1)
}

fn to_external(path: &[usize]) -> Vec<usize> {
    path.iter().map(|j| j + 1).collect()
}

/// Resolves `--entry` and `--path` to 0-based indices.
fn resolve_route(spec: &NetworkSpec, route: &Route, default_entry: bool) -> CliResult<(Option<usize>, Option<Vec<usize>>)> {
    let path = match &route.path {
        Some(p) => Some(p.iter().map(|&j| to_internal(spec, j)).collect::<CliResult<Vec<_>>>()?),
        None => None,
    };
    let entry = match (route.entry, &path) {
        (Some(e), _) => Some(to_internal(spec, e)?),
        (None, Some(p)) => p.first().copied(),
        (None, None) if default_entry => Some(0),
        (None, None) => None,
    };
    if let (Some(e), Some(p)) = (entry, &path) {
        if p.first() != Some(&e) {
            return Err(SojournError::UnreachablePath("path must start at the entry node".into()).into());
        }
    }
    Ok((entry, path))
}

/// `0:5E[T]:101`, with the independent path mean standing in when no exact mean applies.
fn default_grid(spec: &NetworkSpec, traffic: &TrafficSolution, entry: usize, path: Option<&[usize]>) -> GridSpec {
    let mean = exact_moment(spec, traffic, entry, path, 1)
        .unwrap_or_else(|| path.unwrap_or(&[entry]).iter().map(|&j| 1.0 / traffic.sojourn_rate(j)).sum());
    GridSpec {
        start: 0.0,
        stop: 5.0 * mean,
        count: 101,
    }
}

fn analysis_options(bounds: &Bounds) -> AnalysisOptions {
    AnalysisOptions {
        epsilon: bounds.epsilon,
        cap: bounds.cap,
        ..Default::default()
    }
}

fn check_epsilon(epsilon: f64) -> CliResult<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(SojournError::InvalidEpsilon(epsilon).into())
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum Outcome<T> {
    Value { value: T },
    Refused { refused: String },
}

impl<T> Outcome<T> {
    fn from(result: jackson_sojourn::Result<T>) -> Self {
        match result {
            Ok(value) => Outcome::Value { value },
            Err(e) => Outcome::Refused { refused: e.to_string() },
        }
    }

    fn value(&self) -> Option<&T> {
        match self {
            Outcome::Value { value } => Some(value),
            Outcome::Refused { .. } => None,
        }
    }
}

#[derive(Serialize)]
struct ExactMoments {
    mean_queue_length: Vec<f64>,
    first_moment: Vec<f64>,
    second_moment: Outcome<Vec<f64>>,
    variance: Outcome<Vec<f64>>,
    third_moment: Outcome<Vec<f64>>,
    tandem_variance: Outcome<Vec<f64>>,
    feedback_variance: Outcome<f64>,
    feedback_covariance: Outcome<f64>,
    correlation_condition: Outcome<CorrelationCondition>,
}

#[derive(Serialize)]
struct AnalyzeReport {
    nodes: usize,
    theta: Vec<f64>,
    rho: Vec<f64>,
    stable: bool,
    topology: TopologyClass,
    /// Absent when the network is unstable.
    exact: Option<ExactMoments>,
}

/// `(v, mu, p)` when the network is the single queue with feedback.
fn feedback_parameters(spec: &NetworkSpec) -> jackson_sojourn::Result<(f64, f64, f64)> {
    if spec.nodes() != 1 {
        return Err(SojournError::InvalidSpec("closed form needs a single node with feedback".into()));
    }
    Ok((spec.arrival_rates()[0], spec.service_rates()[0], spec.routing_probability(0, 0)))
}

/// `(v, mu1, mu2, mu3, p)` when the network has the three-node shape: node 1
/// fed from outside, splitting to nodes 2 and 3, node 2 feeding node 3.
fn three_node_parameters(spec: &NetworkSpec) -> jackson_sojourn::Result<(f64, f64, f64, f64, f64)> {
    let refuse = || SojournError::InvalidSpec("condition needs the three-node split network".into());
    if spec.nodes() != 3 {
        return Err(refuse());
    }
    let v = spec.arrival_rates();
    let p = spec.routing_probability(0, 1);
    let shape = v[1] == 0.0
        && v[2] == 0.0
        && p > 0.0
        && p < 1.0
        && (spec.routing_probability(0, 2) - (1.0 - p)).abs() < 1e-12
        && spec.routing_probability(1, 2) == 1.0
        && spec.exit_probability(2) == 1.0
        && spec.routing_probability(0, 0) == 0.0
        && spec.routing_probability(1, 0) == 0.0
        && spec.routing_probability(1, 1) == 0.0;
    if !shape {
        return Err(refuse());
    }
    let mu = spec.service_rates();
    Ok((v[0], mu[0], mu[1], mu[2], p))
}

fn exact_moments(spec: &NetworkSpec, traffic: &TrafficSolution) -> CliResult<ExactMoments> {
    let n = spec.nodes();
    let first = first_moments(spec, traffic)?.values;
    let mean_queue_length = (0..n).map(|j| mean_queue_length(traffic, j)).collect::<Result<_, _>>()?;
    let table = moment_table_overtake_free(spec, traffic, 3);
    let feedback = feedback_parameters(spec);
    let second = match (&table, feedback.clone()) {
        (Ok(t), _) => Ok(t[1].clone()),
        (Err(_), Ok((v, mu, p))) if p > 0.0 => feedback_variance(v, mu, p).map(|var| vec![var + first[0] * first[0]]),
        (Err(e), _) => Err(e.clone()),
    };
    let variance = second
        .clone()
        .map(|s| s.iter().zip(&first).map(|(s, m)| s - m * m).collect());
    Ok(ExactMoments {
        mean_queue_length,
        first_moment: first,
        second_moment: Outcome::from(second),
        variance: Outcome::from(variance),
        third_moment: Outcome::from(table.map(|mut t| t.swap_remove(2))),
        tandem_variance: Outcome::from((0..n).map(|j| tandem_variance(spec, traffic, j)).collect()),
        feedback_variance: Outcome::from(feedback.clone().and_then(|(v, mu, p)| feedback_variance(v, mu, p))),
        feedback_covariance: Outcome::from(feedback.and_then(|(v, mu, p)| feedback_covariance(v, mu, p))),
        correlation_condition: Outcome::from(
            three_node_parameters(spec).and_then(|(v, m1, m2, m3, p)| three_node_positive_correlation(v, m1, m2, m3, p)),
        ),
    })
}

fn print_refusal<T>(name: &str, outcome: &Outcome<T>) {
    if let Outcome::Refused { refused } = outcome {
        println!("{name}: refused ({refused})");
    }
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<()> {
    let manifest = RunManifest::start("analyze", &args.common.network);
    let spec = load_network(&args.common.network)?;
    let traffic = spec.solve_traffic()?;
    let topology = classify_topology(&spec);
    let exact = if traffic.stable {
        Some(exact_moments(&spec, &traffic)?)
    } else {
        None
    };

    println!("nodes {}  stable {}", spec.nodes(), traffic.stable);
    println!(
        "topology  acyclic {}  feedback {}  overtake-free {}",
        topology.acyclic, topology.has_feedback, topology.overtake_free_moment_condition
    );
    match &exact {
        None => println!("moments suppressed: network is unstable"),
        Some(m) => {
            println!("{:>5} {:>12} {:>10} {:>12} {:>12} {:>12}", "node", "theta", "rho", "E[T]", "E[T^2]", "VAR[T]");
            for j in 0..spec.nodes() {
                let cell = |o: &Outcome<Vec<f64>>| o.value().map_or("-".to_string(), |v| format!("{:.6}", v[j]));
                println!(
                    "{:>5} {:>12.6} {:>10.6} {:>12.6} {:>12} {:>12}",
                    j + 1,
                    traffic.theta[j],
                    traffic.rho[j],
                    m.first_moment[j],
                    cell(&m.second_moment),
                    cell(&m.variance)
                );
            }
            print_refusal("second moments", &m.second_moment);
            print_refusal("third moments", &m.third_moment);
            if let Some(c) = m.correlation_condition.value() {
                println!(
                    "positive-correlation condition: {:?} (rate lhs {:.6}, p interval {:?})",
                    c.verdict, c.rate_condition_lhs, c.p_interval
                );
            }
        }
    }

    let out = OutDir::create(&args.common.out_dir)?;
    out.summary(manifest, &AnalyzeReport {
        nodes: spec.nodes(),
        theta: traffic.theta.clone(),
        rho: traffic.rho.clone(),
        stable: traffic.stable,
        topology,
        exact,
    })
}

#[derive(Serialize)]
struct CdfRow {
    t: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct CdfRowIndependent {
    t: f64,
    lower: f64,
    upper: f64,
    f_independent: f64,
}

#[derive(Serialize)]
struct CdfSummary {
    entry: usize,
    path: Option<Vec<usize>>,
    alpha: f64,
    k: usize,
    cap: usize,
    states: usize,
    epsilon: f64,
    deficits: Deficits,
    moment_bounds: Vec<MomentBound>,
    exact_mean: Option<f64>,
    independent_path: Option<Vec<usize>>,
}

pub fn cdf(args: &CdfArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("cdf", &args.common.network);
    check_epsilon(args.bounds.epsilon)?;
    let spec = load_network(&args.common.network)?;
    let traffic = spec.solve_traffic()?;
    traffic.require_stable()?;
    let (entry, path) = resolve_route(&spec, &args.route, true)?;
    let entry = entry.expect("entry defaults to node 1");
    let grid = args
        .bounds
        .grid
        .unwrap_or_else(|| default_grid(&spec, &traffic, entry, path.as_deref()));
    let mode = path.clone().map_or(PathMode::RandomRouting, PathMode::FixedPath);

    let independent_path = if args.compare_independent {
        let p = path
            .clone()
            .or_else(|| unique_path(&spec, entry))
            .ok_or_else(|| CliError::Usage("--compare-independent needs --path when routing branches".into()))?;
        Some(p)
    } else {
        None
    };
    let independent_rates = match &independent_path {
        Some(p) => Some(independent_path_rates(&spec, &traffic, p)?),
        None => None,
    };

    let options = analysis_options(&args.bounds);
    let points = grid.points();
    let analysis = sojourn_analysis(&spec, &traffic, entry, &mode, &options, &points)?;

    manifest.parameters.entry = Some(entry + 1);
    manifest.parameters.path = path.as_deref().map(to_external);
    manifest.parameters.epsilon = Some(args.bounds.epsilon);
    manifest.parameters.cap = Some(analysis.cap);
    manifest.parameters.grid = Some(grid.to_string());
    manifest.parameters.compare_independent = args.compare_independent;

    let out = OutDir::create(&args.common.out_dir)?;
    let b = &analysis.bounds;
    match &independent_rates {
        None => {
            let rows: Vec<CdfRow> = (0..points.len())
                .map(|i| CdfRow {
                    t: b.grid[i],
                    lower: b.lower[i],
                    upper: b.upper[i],
                })
                .collect();
            out.csv(&mut manifest, "cdf_bounds.csv", &rows)?;
        }
        Some(rates) => {
            let rows: Vec<CdfRowIndependent> = (0..points.len())
                .map(|i| CdfRowIndependent {
                    t: b.grid[i],
                    lower: b.lower[i],
                    upper: b.upper[i],
                    f_independent: hypoexponential_cdf(rates, b.grid[i]),
                })
                .collect();
            out.csv(&mut manifest, "cdf_bounds.csv", &rows)?;
        }
    }

    println!(
        "alpha {}  k {}  cap {}  states {}  deficit {:.3e}",
        analysis.alpha, analysis.jumps, analysis.cap, analysis.states, analysis.deficits.total
    );
    out.summary(manifest, &CdfSummary {
        entry: entry + 1,
        path: path.as_deref().map(to_external),
        alpha: analysis.alpha,
        k: analysis.jumps,
        cap: analysis.cap,
        states: analysis.states,
        epsilon: args.bounds.epsilon,
        deficits: analysis.deficits,
        moment_bounds: analysis.moment_bounds,
        exact_mean: exact_moment(&spec, &traffic, entry, path.as_deref(), 1),
        independent_path: independent_path.as_deref().map(to_external),
    })
}

#[derive(Serialize)]
struct SampleRow {
    path: String,
    node_sojourns: String,
    total: f64,
}

#[derive(Serialize)]
struct NodePairCorrelation {
    node_a: usize,
    node_b: usize,
    estimate: CorrelationEstimate,
}

#[derive(Serialize)]
struct SimulateSummary {
    stats: SimStats,
    moments: Vec<MomentEstimate>,
    correlations: Vec<NodePairCorrelation>,
}

fn join<T: std::fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("simulate", &args.common.network);
    let spec = load_network(&args.common.network)?;
    let (entry, path) = resolve_route(&spec, &args.route, false)?;
    let traffic = spec.solve_traffic()?;
    if !traffic.stable {
        eprintln!("jsojourn: warning: network is unstable; sojourns grow without bound");
    }
    let mut config = SimConfig::new(args.sampling.seed, args.sampling.tags);
    config.path_filter = path.clone();
    config.entry_filter = entry;
    let sim = run_simulation(&spec, &config)?;

    manifest.parameters.entry = entry.map(|e| e + 1);
    manifest.parameters.path = path.as_deref().map(to_external);
    manifest.parameters.tags = Some(args.sampling.tags);
    manifest.parameters.seed = Some(args.sampling.seed);

    let out = OutDir::create(&args.common.out_dir)?;
    let rows: Vec<SampleRow> = sim
        .samples
        .iter()
        .map(|s| SampleRow {
            path: join(s.path.iter().map(|j| j + 1)),
            node_sojourns: join(&s.node_sojourns),
            total: s.total,
        })
        .collect();
    out.csv(&mut manifest, "samples.csv", &rows)?;

    let moments = if sim.samples.len() >= 2 {
        (1..=2)
            .map(|r| empirical_moments(&sim.samples, r, DEFAULT_BATCHES))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let mut correlations = Vec::new();
    if let Some(p) = &path {
        for (i, &a) in p.iter().enumerate() {
            for &b in &p[i + 1..] {
                if let Ok(estimate) = correlation(&sim.samples, a, b) {
                    correlations.push(NodePairCorrelation {
                        node_a: a + 1,
                        node_b: b + 1,
                        estimate,
                    });
                }
            }
        }
    }
    if let Some(m) = moments.first() {
        println!(
            "samples {}  mean {:.6} (se {:.2e})  variance {:.6} (se {:.2e})",
            sim.samples.len(),
            m.mean,
            m.mean_se,
            m.variance,
            m.variance_se
        );
    }
    out.summary(manifest, &SimulateSummary {
        stats: sim.stats,
        moments,
        correlations,
    })
}

#[derive(Serialize)]
struct CompareCsvRow {
    t: f64,
    #[serde(rename = "L")]
    lower: f64,
    #[serde(rename = "U")]
    upper: f64,
    #[serde(rename = "F_independent")]
    f_independent: Option<f64>,
    empirical: f64,
    dkw_half_width: f64,
    flag: &'static str,
}

#[derive(Serialize)]
struct MomentCsvRow {
    order: u32,
    exact: Option<f64>,
    lower_bound: f64,
    simulated: f64,
    simulated_se: f64,
}

#[derive(Serialize)]
struct CompareSummary {
    entry: usize,
    path: Option<Vec<usize>>,
    independent_path: Option<Vec<usize>>,
    alpha: f64,
    k: usize,
    cap: usize,
    states: usize,
    deficits: Deficits,
    flagged_independent: usize,
    flagged_empirical: usize,
    simulation: SimStats,
}

fn flag(independent_outside: bool, empirical_outside: bool) -> &'static str {
    match (independent_outside, empirical_outside) {
        (false, false) => "",
        (true, false) => "F_outside",
        (false, true) => "empirical_outside",
        (true, true) => "F_outside;empirical_outside",
    }
}

pub fn compare(args: &CompareArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("compare", &args.common.network);
    check_epsilon(args.bounds.epsilon)?;
    let spec = load_network(&args.common.network)?;
    let traffic = spec.solve_traffic()?;
    traffic.require_stable()?;
    let (entry, path) = resolve_route(&spec, &args.route, true)?;
    let entry = entry.expect("entry defaults to node 1");
    let grid = args
        .bounds
        .grid
        .unwrap_or_else(|| default_grid(&spec, &traffic, entry, path.as_deref()));
    let options = CompareOptions {
        entry,
        path: path.clone(),
        analysis: AnalysisOptions {
            cap: Some(args.bounds.cap.unwrap_or_else(|| default_cap(&traffic, args.bounds.epsilon))),
            ..analysis_options(&args.bounds)
        },
        tags: args.sampling.tags,
        seed: args.sampling.seed,
        grid: grid.points(),
    };
    let comparison = run_compare(&spec, &traffic, &options)?;

    manifest.parameters.entry = Some(entry + 1);
    manifest.parameters.path = path.as_deref().map(to_external);
    manifest.parameters.epsilon = Some(args.bounds.epsilon);
    manifest.parameters.cap = Some(comparison.analysis.cap);
    manifest.parameters.grid = Some(grid.to_string());
    manifest.parameters.tags = Some(args.sampling.tags);
    manifest.parameters.seed = Some(args.sampling.seed);

    let out = OutDir::create(&args.common.out_dir)?;
    let rows: Vec<CompareCsvRow> = comparison
        .rows
        .iter()
        .map(|r| CompareCsvRow {
            t: r.t,
            lower: r.lower,
            upper: r.upper,
            f_independent: r.f_independent,
            empirical: r.empirical,
            dkw_half_width: r.dkw,
            flag: flag(r.independent_outside, r.empirical_outside),
        })
        .collect();
    out.csv(&mut manifest, "compare.csv", &rows)?;
    let moments: Vec<MomentCsvRow> = comparison
        .moments
        .iter()
        .map(|m| MomentCsvRow {
            order: m.order,
            exact: m.exact,
            lower_bound: m.lower_bound,
            simulated: m.simulated,
            simulated_se: m.simulated_se,
        })
        .collect();
    out.csv(&mut manifest, "moments.csv", &moments)?;

    let flagged_independent = comparison.rows.iter().filter(|r| r.independent_outside).count();
    let flagged_empirical = comparison.rows.iter().filter(|r| r.empirical_outside).count();
    println!(
        "grid points {}  F outside [L,U] at {}  empirical outside band at {}",
        comparison.rows.len(),
        flagged_independent,
        flagged_empirical
    );
    let a = &comparison.analysis;
    out.summary(manifest, &CompareSummary {
        entry: entry + 1,
        path: path.as_deref().map(to_external),
        independent_path: comparison.independent_path.as_deref().map(to_external),
        alpha: a.alpha,
        k: a.jumps,
        cap: a.cap,
        states: a.states,
        deficits: a.deficits,
        flagged_independent,
        flagged_empirical,
        simulation: comparison.simulation,
    })
}
