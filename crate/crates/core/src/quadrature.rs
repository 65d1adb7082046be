//! Composite trapezoid rules on uniform grids, including log-space cumulative
//! sums for integrands that over- or underflow in linear space.

/// Trapezoid rule for samples `f_0..f_n` with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let interior: f64 = values[1..n - 1].iter().sum();
            h * (interior + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Trapezoid rule for the product `f g` of two sampled functions.
pub fn trapezoid_product(f: &[f64], g: &[f64], h: f64) -> f64 {
    debug_assert_eq!(f.len(), g.len());
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = f[1..n - 1]
        .iter()
        .zip(&g[1..n - 1])
        .map(|(a, b)| a * b)
        .sum();
    h * (interior + 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]))
}

/// Running integral `F_k = ∫_0^{θ_k} f` with `F_0 = 0`.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log ∫_0^{θ_k} e^{f}` for log-samples `f`, with `-inf` at `k = 0`.
pub fn log_cumulative_trapezoid(log_values: &[f64], h: f64) -> Vec<f64> {
    let log_half_h = (0.5 * h).ln();
    let mut out = Vec::with_capacity(log_values.len());
    let mut acc = f64::NEG_INFINITY;
    out.push(acc);
    for w in log_values.windows(2) {
        acc = log_add_exp(acc, log_half_h + log_add_exp(w[0], w[1]));
        out.push(acc);
    }
    out.truncate(log_values.len());
    out
}

/// `log ∫_{θ_k}^{θ_n} e^{f}`, with `-inf` at `k = n`.
pub fn log_reverse_cumulative_trapezoid(log_values: &[f64], h: f64) -> Vec<f64> {
    let log_half_h = (0.5 * h).ln();
    let n = log_values.len();
    let mut out = vec![f64::NEG_INFINITY; n];
    let mut acc = f64::NEG_INFINITY;
    for k in (0..n.saturating_sub(1)).rev() {
        acc = log_add_exp(acc, log_half_h + log_add_exp(log_values[k], log_values[k + 1]));
        out[k] = acc;
    }
    out
}
