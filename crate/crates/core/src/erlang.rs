//! Erlang distribution functions and Poisson weights.
//!
//! Poisson weights are built by the upward recurrence `w_i = w_{i-1} * x / i`
//! carried in log space, so neither `e^{-x}` underflow for large `x` nor
//! factorial overflow for large `i` can occur.

/// Erlang(n, rate) distribution function, `1 - sum_{i<n} e^{-x} x^i / i!`
/// with `x = rate * t`. By convention `erlang_cdf(0, _, _) == 1`: zero
/// exponential stages means the variable is identically zero.
pub fn erlang_cdf(n: usize, rate: f64, t: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let x = rate * t;
    if x <= 0.0 {
        return 0.0;
    }
    if (n as f64) > x {
        // Upper tail is the small side; sum it directly.
        upper_poisson_tail(n, x).min(1.0)
    } else {
        let lower: f64 = PoissonWeights::new(x).take(n).sum();
        (1.0 - lower).clamp(0.0, 1.0)
    }
}

/// Complementary Erlang function, `P(Erlang(n, rate) > t)`.
pub fn erlang_ccdf(n: usize, rate: f64, t: f64) -> f64 {
    1.0 - erlang_cdf(n, rate, t)
}

/// `sum_{i >= n} e^{-x} x^i / i!` for `n > x`, where terms decay geometrically.
fn upper_poisson_tail(n: usize, x: f64) -> f64 {
    let mut log_w = -x + (n as f64) * x.ln() - ln_factorial(n);
    let mut sum = 0.0;
    let mut i = n;
    loop {
        let w = log_w.exp();
        sum += w;
        if w <= sum * 1e-17 || w == 0.0 {
            break;
        }
        i += 1;
        log_w += x.ln() - (i as f64).ln();
    }
    sum
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Iterator over Poisson(x) probabilities `P(N = 0), P(N = 1), ...`.
#[derive(Debug, Clone)]
pub struct PoissonWeights {
    log_x: f64,
    log_w: f64,
    next: usize,
}

impl PoissonWeights {
    pub fn new(x: f64) -> Self {
        Self {
            log_x: x.ln(),
            log_w: -x,
            next: 0,
        }
    }
}

impl Iterator for PoissonWeights {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.next > 0 {
            self.log_w += self.log_x - (self.next as f64).ln();
        }
        self.next += 1;
        Some(self.log_w.exp())
    }
}

/// Erlang distribution values `E_{n,rate}(t)` for every `n` in `0..=max_n`.
///
/// Indices below `x = rate * t` are taken as one minus the lower Poisson sum,
/// the rest as the upper tail accumulated backwards, so both ends keep their
/// relative accuracy.
pub fn erlang_cdf_table(max_n: usize, rate: f64, t: f64) -> Vec<f64> {
    let x = rate * t;
    let mut table = vec![0.0; max_n + 1];
    table[0] = 1.0;
    if max_n == 0 || x <= 0.0 {
        return table;
    }
    // Poisson weights far enough past both max_n and the mode that the
    // remaining tail is below double precision.
    let horizon = (max_n as f64).max(x + 40.0 * x.sqrt() + 40.0).ceil() as usize + 1;
    let weights: Vec<f64> = PoissonWeights::new(x).take(horizon + 1).collect();

    let mut lower = 0.0;
    for n in 1..=max_n {
        lower += weights[n - 1];
        if (n as f64) <= x {
            table[n] = (1.0 - lower).clamp(0.0, 1.0);
        }
    }
    let mut upper = 0.0;
    for i in (1..=horizon).rev() {
        upper += weights[i];
        if i <= max_n && (i as f64) > x {
            table[i] = upper.min(1.0);
        }
    }
    table
}
