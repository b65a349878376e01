//! Discrete-event simulation of a Jackson network with tagged customers.
//!
//! Each node owns three random streams (exogenous arrivals, service times,
//! routing decisions) derived from one seed, so changing a parameter at one
//! node leaves the draws at the others untouched.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SojournError};
use crate::network::NetworkSpec;

pub const DEFAULT_BATCHES: usize = 100;
pub const DEFAULT_MAX_EVENTS: u64 = 2_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Exogenous arrivals to let pass before tagging starts. `None` uses a
    /// warmup period of `10 J max_j 1/(mu_j - theta_j)` time units.
    pub warmup_customers: Option<u64>,
    /// Number of samples to collect (after path filtering).
    pub tagged_customers: usize,
    /// Keep only tagged customers whose realized path is exactly this one.
    pub path_filter: Option<Vec<usize>>,
    /// Tag only customers arriving from outside at this node.
    pub entry_filter: Option<usize>,
    pub max_events: u64,
}

impl SimConfig {
    pub fn new(seed: u64, tagged_customers: usize) -> Self {
        Self {
            seed,
            warmup_customers: None,
            tagged_customers,
            path_filter: None,
            entry_filter: None,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }

    pub fn with_path(mut self, path: Vec<usize>) -> Self {
        self.path_filter = Some(path);
        self
    }
}

/// One tagged customer's journey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SojournSample {
    pub path: Vec<usize>,
    /// Sojourn at each visit, aligned with `path`.
    pub node_sojourns: Vec<f64>,
    pub total: f64,
}

impl SojournSample {
    /// Sojourn at the first visit to `node`, if any.
    pub fn sojourn_at(&self, node: usize) -> Option<f64> {
        self.path.iter().position(|&j| j == node).map(|i| self.node_sojourns[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub events: u64,
    pub tagged: u64,
    pub warmup_time: f64,
    /// Length of the observation window, from the end of warmup until
    /// tagging stops.
    pub observed_time: f64,
    /// Time-average number of customers in the network over the window.
    pub mean_in_system: f64,
    /// Visits per unit time at each node over the window.
    pub throughput: Vec<f64>,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub samples: Vec<SojournSample>,
    pub stats: SimStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival(usize),
    Completion(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Visit {
    arrived: f64,
    tag: Option<usize>,
}

struct Journey {
    path: Vec<usize>,
    sojourns: Vec<f64>,
    done: bool,
}

struct Streams {
    arrivals: Vec<ChaCha8Rng>,
    services: Vec<ChaCha8Rng>,
    routing: Vec<ChaCha8Rng>,
}

impl Streams {
    fn new(seed: u64, nodes: usize) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            arrivals: (0..nodes).map(|j| stream(3 * j as u64)).collect(),
            services: (0..nodes).map(|j| stream(3 * j as u64 + 1)).collect(),
            routing: (0..nodes).map(|j| stream(3 * j as u64 + 2)).collect(),
        }
    }
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Default warmup period in time units.
pub fn default_warmup_time(spec: &NetworkSpec) -> f64 {
    let traffic = spec.solve_traffic().ok();
    let slowest = (0..spec.nodes())
        .map(|j| {
            let gap = match &traffic {
                Some(t) if t.stable => t.sojourn_rate(j),
                _ => spec.service_rates()[j],
            };
            1.0 / gap
        })
        .fold(0.0, f64::max);
    10.0 * spec.nodes() as f64 * slowest
}

pub fn simulate(spec: &NetworkSpec, config: &SimConfig) -> Result<Simulation> {
    if config.tagged_customers == 0 {
        return Err(SojournError::TooFewSamples { needed: 1, got: 0 });
    }
    let nodes = spec.nodes();
    let stable = spec.solve_traffic().map(|t| t.stable).unwrap_or(false);
    let mut streams = Streams::new(config.seed, nodes);
    let mut queues: Vec<VecDeque<Visit>> = (0..nodes).map(|_| VecDeque::new()).collect();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Event>, time: f64, kind: EventKind| {
        heap.push(Event { time, seq, kind });
        seq += 1;
    };
    for j in 0..nodes {
        let v = spec.arrival_rates()[j];
        if v > 0.0 {
            let t = exponential(&mut streams.arrivals[j], v);
            push(&mut heap, t, EventKind::Arrival(j));
        }
    }

    let warmup_time = match config.warmup_customers {
        Some(_) => f64::INFINITY,
        None => default_warmup_time(spec),
    };
    let mut warm = match config.warmup_customers {
        Some(n) => n == 0,
        None => warmup_time <= 0.0,
    };
    let mut warmup_end = 0.0;
    let mut exogenous_seen = 0u64;

    let mut journeys: Vec<Journey> = Vec::new();
    let mut retained = 0usize;
    let mut in_flight = 0usize;
    let mut tagging = true;

    let mut now = 0.0;
    let mut events = 0u64;
    let mut in_system = 0usize;
    let mut area = 0.0;
    let mut visits = vec![0u64; nodes];
    let mut window_end = 0.0;

    let matches = |path: &[usize]| config.path_filter.as_deref().is_none_or(|f| f == path);

    while let Some(event) = heap.pop() {
        events += 1;
        if events > config.max_events {
            return Err(SojournError::MaxEventsExceeded(config.max_events));
        }
        debug_assert!(event.time >= now);
        if warm && tagging {
            area += in_system as f64 * (event.time - now);
        }
        now = event.time;
        if !warm && config.warmup_customers.is_none() && now >= warmup_time {
            warm = true;
            warmup_end = warmup_time;
            area += in_system as f64 * (now - warmup_time);
        }

        match event.kind {
            EventKind::Arrival(j) => {
                let v = spec.arrival_rates()[j];
                let next = now + exponential(&mut streams.arrivals[j], v);
                if tagging || in_flight > 0 {
                    push(&mut heap, next, EventKind::Arrival(j));
                }
                if let Some(n) = config.warmup_customers {
                    if !warm && exogenous_seen >= n {
                        warm = true;
                        warmup_end = now;
                    }
                }
                exogenous_seen += 1;
                let eligible = config.entry_filter.is_none_or(|e| e == j);
                let tag = if warm && tagging && eligible {
                    journeys.push(Journey {
                        path: Vec::new(),
                        sojourns: Vec::new(),
                        done: false,
                    });
                    in_flight += 1;
                    if config.path_filter.is_none() && journeys.len() == config.tagged_customers {
                        tagging = false;
                        window_end = now;
                    }
                    Some(journeys.len() - 1)
                } else {
                    None
                };
                in_system += 1;
                if warm && tagging {
                    visits[j] += 1;
                }
                queues[j].push_back(Visit { arrived: now, tag });
                if queues[j].len() == 1 {
                    let s = exponential(&mut streams.services[j], spec.service_rates()[j]);
                    push(&mut heap, now + s, EventKind::Completion(j));
                }
            }
            EventKind::Completion(j) => {
                let visit = queues[j].pop_front().expect("completion at an empty node");
                if !queues[j].is_empty() {
                    let s = exponential(&mut streams.services[j], spec.service_rates()[j]);
                    push(&mut heap, now + s, EventKind::Completion(j));
                }
                let u: f64 = streams.routing[j].gen();
                let mut acc = 0.0;
                let mut destination = None;
                for (l, &p) in spec.routing()[j].iter().enumerate() {
                    acc += p;
                    if p > 0.0 && u < acc {
                        destination = Some(l);
                        break;
                    }
                }
                if let Some(tag) = visit.tag {
                    let journey = &mut journeys[tag];
                    journey.path.push(j);
                    journey.sojourns.push(now - visit.arrived);
                    if destination.is_none() {
                        journey.done = true;
                        in_flight -= 1;
                        if matches(&journey.path) {
                            retained += 1;
                            if config.path_filter.is_some() && retained >= config.tagged_customers && tagging {
                                tagging = false;
                                window_end = now;
                            }
                        }
                    }
                }
                match destination {
                    Some(l) => {
                        if warm && tagging {
                            visits[l] += 1;
                        }
                        queues[l].push_back(Visit {
                            arrived: now,
                            tag: visit.tag,
                        });
                        if queues[l].len() == 1 {
                            let s = exponential(&mut streams.services[l], spec.service_rates()[l]);
                            push(&mut heap, now + s, EventKind::Completion(l));
                        }
                    }
                    None => in_system -= 1,
                }
            }
        }
        if !tagging && in_flight == 0 {
            break;
        }
    }

    let samples: Vec<SojournSample> = journeys
        .into_iter()
        .filter(|j| j.done && matches(&j.path))
        .take(config.tagged_customers)
        .map(|j| SojournSample {
            total: j.sojourns.iter().sum(),
            path: j.path,
            node_sojourns: j.sojourns,
        })
        .collect();

    let observed_time = (window_end - warmup_end).max(0.0);
    let per_time = |x: f64| if observed_time > 0.0 { x / observed_time } else { 0.0 };
    Ok(Simulation {
        stats: SimStats {
            events,
            tagged: samples.len() as u64,
            warmup_time: warmup_end,
            observed_time,
            mean_in_system: per_time(area),
            throughput: visits.iter().map(|&c| per_time(c as f64)).collect(),
            stable,
        },
        samples,
    })
}

/// Sample mean and variance of `S^order` with batch-means standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: u32,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub samples: usize,
    pub batches: usize,
}

pub fn empirical_moments(samples: &[SojournSample], order: u32, batches: usize) -> Result<MomentEstimate> {
    let values: Vec<f64> = samples.iter().map(|s| s.total.powi(order as i32)).collect();
    moment_estimate(&values, order, batches)
}

fn moment_estimate(values: &[f64], order: u32, batches: usize) -> Result<MomentEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(SojournError::TooFewSamples { needed: 2, got: n });
    }
    let (mean, variance) = mean_variance(values);
    let batches = batches.clamp(2, n / 2).max(1);
    let size = n / batches;
    let (mut batch_means, mut batch_vars) = (Vec::new(), Vec::new());
    if size >= 2 {
        for chunk in values.chunks_exact(size).take(batches) {
            let (m, v) = mean_variance(chunk);
            batch_means.push(m);
            batch_vars.push(v);
        }
    }
    let se = |xs: &[f64]| {
        if xs.len() < 2 {
            f64::NAN
        } else {
            (mean_variance(xs).1 / xs.len() as f64).sqrt()
        }
    };
    Ok(MomentEstimate {
        order,
        mean,
        mean_se: se(&batch_means),
        variance,
        variance_se: se(&batch_vars),
        samples: n,
        batches: batch_means.len(),
    })
}

fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, if xs.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

/// Empirical distribution function with a 99% Dvoretzky-Kiefer-Wolfowitz band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub dkw_half_width: f64,
}

pub fn empirical_cdf(samples: &[SojournSample], grid: &[f64]) -> Result<EmpiricalCdf> {
    if samples.is_empty() {
        return Err(SojournError::TooFewSamples { needed: 1, got: 0 });
    }
    let mut totals: Vec<f64> = samples.iter().map(|s| s.total).collect();
    totals.sort_by(f64::total_cmp);
    let n = totals.len() as f64;
    let values = grid
        .iter()
        .map(|&t| totals.partition_point(|&x| x <= t) as f64 / n)
        .collect();
    Ok(EmpiricalCdf {
        grid: grid.to_vec(),
        values,
        dkw_half_width: ((2.0f64 / 0.01).ln() / (2.0 * n)).sqrt(),
    })
}

/// Pearson correlation with a 95% Fisher-z confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub r: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    /// Batches behind the standard error of `atanh(r)`; 0 for the
    /// independent-pairs formula `1 / sqrt(n - 3)`.
    pub batches: usize,
}

/// Correlation of the sojourns at the first visits to `node_a` and `node_b`,
/// over the samples that visit both.
///
/// Successive tagged customers are dependent, so the standard error of
/// `atanh(r)` comes from [`DEFAULT_BATCHES`] batch means of the per-batch
/// transformed correlations; with fewer than ten pairs per batch the
/// independent-pairs interval is used.
pub fn correlation(samples: &[SojournSample], node_a: usize, node_b: usize) -> Result<CorrelationEstimate> {
    let pairs: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|s| Some((s.sojourn_at(node_a)?, s.sojourn_at(node_b)?)))
        .collect();
    if pairs.len() < 10 * DEFAULT_BATCHES {
        return pearson(&pairs);
    }
    let r = pearson_r(&pairs);
    let size = pairs.len() / DEFAULT_BATCHES;
    let z: Vec<f64> = pairs
        .chunks_exact(size)
        .take(DEFAULT_BATCHES)
        .map(|batch| pearson_r(batch).atanh())
        .collect();
    let (_, var) = mean_variance(&z);
    let half = 1.959963984540054 * (var / z.len() as f64).sqrt();
    let center = r.atanh();
    Ok(CorrelationEstimate {
        r,
        ci_low: (center - half).tanh(),
        ci_high: (center + half).tanh(),
        samples: pairs.len(),
        batches: z.len(),
    })
}

fn pearson_r(pairs: &[(f64, f64)]) -> f64 {
    let nf = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(a, b) in pairs {
        sab += (a - ma) * (b - mb);
        saa += (a - ma) * (a - ma);
        sbb += (b - mb) * (b - mb);
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson correlation of independent pairs with a 95% Fisher-z interval.
pub fn pearson(pairs: &[(f64, f64)]) -> Result<CorrelationEstimate> {
    let n = pairs.len();
    if n < 4 {
        return Err(SojournError::TooFewSamples { needed: 4, got: n });
    }
    let r = pearson_r(pairs);
    let z = r.atanh();
    let half = 1.959963984540054 / (n as f64 - 3.0).sqrt();
    Ok(CorrelationEstimate {
        r,
        ci_low: (z - half).tanh(),
        ci_high: (z + half).tanh(),
        samples: n,
        batches: 0,
    })
}
