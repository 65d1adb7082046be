//! Stationary density of the phase process `dθ = (q3 - q2 q4) dt + q4 dw`.
//!
//! The stationary Fokker–Planck equation integrates once to
//!
//! ```text
//! (-q3 + q2 q4 + q4 q4') p + (1/2) q4^2 p' = J
//! ```
//!
//! with `J` the probability current. Both `J` and the integration constant are
//! fixed by periodicity on the circle and by normalization. Three solvers are
//! provided: a general closed form, a closed form specialized to
//! rotation-scaling diffusion, and a first-order backward-difference scheme on
//! the half circle `[0, π]`.

use std::f64::consts::PI;

use crate::angular::{AngularCoeffs, FpeCoefficients};
use crate::error::{Error, Result};
use crate::model::GameParams;
use crate::quadrature::{
    log_add_exp, log_cumulative_trapezoid, log_reverse_cumulative_trapezoid, trapezoid,
    trapezoid_product,
};

/// Smallest grid accepted by the solvers.
pub const MIN_GRID: usize = 16;
/// Sub-grid refinement for the inner integrals of the closed forms.
pub const REFINEMENT: usize = 4;
/// `|q4|` below this on the grid violates the non-degeneracy hypothesis.
pub const Q4_FLOOR: f64 = 1e-9;
const DENOMINATOR_FLOOR: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `[0, π]`, grid step `π/N`.
    Half,
    /// `[0, 2π]`, grid step `2π/N`.
    Full,
}

impl Domain {
    pub fn length(self) -> f64 {
        match self {
            Domain::Half => PI,
            Domain::Full => 2.0 * PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMethod {
    ClosedForm,
    RotationClosedForm,
    BackwardDifference,
    /// Literal exponential forms as published, normalized but not periodic.
    Printed,
    /// Folded/unfolded from another method.
    Converted,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensityDiagnostics {
    /// The published rotation-scaling exponent has a nonzero linear-in-θ term,
    /// so taken literally it is not a density on the circle.
    pub nonperiodic_printed_form: bool,
    /// Minimum of the unclamped values when the scheme produced negatives.
    pub negative_min: Option<f64>,
}

/// Normalized density sampled at `N + 1` uniform nodes of its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDensity {
    grid: Vec<f64>,
    values: Vec<f64>,
    unclamped: Option<Vec<f64>>,
    domain: Domain,
    method: DensityMethod,
    pub diagnostics: DensityDiagnostics,
}

impl PhaseDensity {
    /// Builds a density from raw nonnegative samples, normalizing by trapezoid.
    pub fn from_samples(values: Vec<f64>, domain: Domain, method: DensityMethod) -> Result<Self> {
        let n = values.len().saturating_sub(1);
        if n < 1 {
            return Err(Error::GridTooCoarse { n, min: 1 });
        }
        let h = domain.length() / n as f64;
        let grid = (0..=n).map(|i| i as f64 * h).collect();
        let mut density = PhaseDensity {
            grid,
            values,
            unclamped: None,
            domain,
            method,
            diagnostics: DensityDiagnostics::default(),
        };
        density.normalize()?;
        Ok(density)
    }

    fn normalize(&mut self) -> Result<()> {
        let integral = trapezoid(&self.values, self.step());
        if !(integral.is_finite() && integral > 0.0) {
            return Err(Error::NormalizationFailure { integral });
        }
        self.values.iter_mut().for_each(|v| *v /= integral);
        if let Some(raw) = self.unclamped.as_mut() {
            raw.iter_mut().for_each(|v| *v /= integral);
        }
        let check = trapezoid(&self.values, self.step());
        if (check - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NormalizationFailure { integral: check });
        }
        Ok(())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Density values, clamped to be nonnegative.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values before clamping; differs from `values` only if the scheme went negative.
    pub fn unclamped_values(&self) -> &[f64] {
        self.unclamped.as_deref().unwrap_or(&self.values)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn method(&self) -> DensityMethod {
        self.method
    }

    /// Number of grid cells `N`.
    pub fn cells(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.domain.length() / self.cells() as f64
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    /// `∫ f(θ) p(θ) dθ` over the density's domain.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let fv: Vec<f64> = self.grid.iter().map(|&t| f(t)).collect();
        trapezoid_product(&fv, &self.values, self.step())
    }

    /// Fold a full-circle density onto `[0, π]`: `p_half(θ) = p(θ) + p(θ + π)`.
    pub fn to_half(&self) -> Result<PhaseDensity> {
        match self.domain {
            Domain::Half => Ok(self.clone()),
            Domain::Full => {
                let n = self.cells();
                if n % 2 != 0 {
                    return Err(Error::GridTooCoarse { n, min: 2 });
                }
                let m = n / 2;
                let values = (0..=m)
                    .map(|i| self.values[i] + self.values[(i + m) % n])
                    .collect();
                PhaseDensity::from_samples(values, Domain::Half, DensityMethod::Converted)
            }
        }
    }

    /// Unfold a π-periodic half-circle density onto `[0, 2π]`.
    pub fn to_full(&self) -> Result<PhaseDensity> {
        match self.domain {
            Domain::Full => Ok(self.clone()),
            Domain::Half => {
                let n = self.cells();
                let values = (0..=2 * n).map(|i| 0.5 * self.values[i % n]).collect();
                PhaseDensity::from_samples(values, Domain::Full, DensityMethod::Converted)
            }
        }
    }

    /// Largest absolute difference at matching nodes; grids must coincide.
    pub fn max_abs_diff(&self, other: &PhaseDensity) -> Option<f64> {
        if self.domain != other.domain || self.cells() != other.cells() {
            return None;
        }
        Some(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// `∫ cos 2θ p` and `∫ sin 2θ p` over the density's domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigMoments {
    pub c2_moment: f64,
    pub s2_moment: f64,
}

pub fn trig_moments(p: &PhaseDensity) -> TrigMoments {
    TrigMoments {
        c2_moment: p.expectation(|t| (2.0 * t).cos()),
        s2_moment: p.expectation(|t| (2.0 * t).sin()),
    }
}

fn check_grid(n: usize) -> Result<()> {
    if n < MIN_GRID {
        return Err(Error::GridTooCoarse { n, min: MIN_GRID });
    }
    Ok(())
}

/// Periodic solution of `p' = Φ' p + const · w` on a uniform grid over one
/// period, given `Φ` (with `Φ_0 = 0`) and `log w` at the nodes. Returns `log p`.
///
/// Uses `p(θ) ∝ e^{Φ(θ)} (∫_0^θ e^{-Φ} w + e^{Φ(T)} ∫_θ^T e^{-Φ} w)`, whose
/// two terms are nonnegative for either sign of the current.
fn log_periodic_solution(phi: &[f64], log_w: &[f64], h: f64) -> Vec<f64> {
    let integrand: Vec<f64> = phi.iter().zip(log_w).map(|(p, w)| w - p).collect();
    let left = log_cumulative_trapezoid(&integrand, h);
    let right = log_reverse_cumulative_trapezoid(&integrand, h);
    let phi_total = *phi.last().expect("non-empty grid");
    phi.iter()
        .zip(left.iter().zip(&right))
        .map(|(p, (l, r))| p + log_add_exp(*l, phi_total + r))
        .collect()
}

fn density_from_log(
    log_values: &[f64],
    stride: usize,
    domain: Domain,
    method: DensityMethod,
) -> Result<PhaseDensity> {
    let sampled: Vec<f64> = log_values.iter().step_by(stride).copied().collect();
    let max = sampled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NormalizationFailure { integral: max });
    }
    let values = sampled.iter().map(|v| (v - max).exp()).collect();
    PhaseDensity::from_samples(values, domain, method)
}

/// General closed form on `[0, 2π]`; requires `q4 ≠ 0` everywhere.
///
/// `Φ(θ) = 2 ∫_0^θ (q3 - q2 q4 - q4 w) / q4^2` and the forcing weight is
/// `1 / q4^2`, where `w` is `q4'` or `q5` depending on `mode`. Inner
/// integrals run on a grid refined by [`REFINEMENT`].
pub fn density_closed_form(
    coeffs: &AngularCoeffs,
    n_grid: usize,
    mode: FpeCoefficients,
) -> Result<PhaseDensity> {
    check_grid(n_grid)?;
    let m = REFINEMENT * n_grid;
    let h = 2.0 * PI / m as f64;
    let mut rate = Vec::with_capacity(m + 1);
    let mut log_w = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let theta = k as f64 * h;
        let v = coeffs.eval(theta);
        if v.q4.abs() <= Q4_FLOOR {
            return Err(Error::DiffusionDegenerate {
                theta,
                value: v.q4.abs(),
            });
        }
        let w = coeffs.closing_term(theta, mode);
        let q4sq = v.q4 * v.q4;
        rate.push(2.0 * (v.q3 - v.q2 * v.q4 - v.q4 * w) / q4sq);
        log_w.push(-q4sq.ln());
    }
    let phi = crate::quadrature::cumulative_trapezoid(&rate, h);
    let log_p = log_periodic_solution(&phi, &log_w, h);
    density_from_log(&log_p, REFINEMENT, Domain::Full, DensityMethod::ClosedForm)
}

/// Closed form for `b = [[α, -β], [β, α]]` on `[0, 2π]`.
///
/// Here `q2 ≡ α`, `q4 ≡ β` and the potential is analytic:
/// `Φ(θ) = β^{-2} ((a21 - a12 - 2αβ) θ + ½(a11 - a22)(cos 2θ - 1) + ½(a21 + a12) sin 2θ)`.
/// A nonzero linear term means a nonzero probability current, handled by the
/// periodic completion.
pub fn density_rotation_closed_form(
    coeffs: &AngularCoeffs,
    alpha: f64,
    beta: f64,
    n_grid: usize,
) -> Result<PhaseDensity> {
    if beta == 0.0 {
        return Err(Error::BetaZero);
    }
    check_grid(n_grid)?;
    let a = &coeffs.source.a;
    let inv_b2 = 1.0 / (beta * beta);
    let linear = a[1][0] - a[0][1] - 2.0 * alpha * beta;
    let cos_coef = 0.5 * (a[0][0] - a[1][1]);
    let sin_coef = 0.5 * (a[1][0] + a[0][1]);

    let m = REFINEMENT * n_grid;
    let h = 2.0 * PI / m as f64;
    let phi: Vec<f64> = (0..=m)
        .map(|k| {
            let t = k as f64 * h;
            let (s2, c2) = (2.0 * t).sin_cos();
            inv_b2 * (linear * t + cos_coef * (c2 - 1.0) + sin_coef * s2)
        })
        .collect();
    let log_w = vec![0.0; m + 1];
    let log_p = log_periodic_solution(&phi, &log_w, h);
    let mut density =
        density_from_log(&log_p, REFINEMENT, Domain::Full, DensityMethod::RotationClosedForm)?;
    density.diagnostics.nonperiodic_printed_form = printed_linear_coefficient(coeffs, alpha, beta) != 0.0;
    Ok(density)
}

/// Linear-in-θ coefficient `a21 - a12 - αβ` of the published rotation-scaling exponent.
pub fn printed_linear_coefficient(coeffs: &AngularCoeffs, alpha: f64, beta: f64) -> f64 {
    let a = &coeffs.source.a;
    a[1][0] - a[0][1] - alpha * beta
}

/// The published rotation-scaling exponential taken literally,
/// `β^{-2} exp{β^{-2} ((a21-a12-αβ)θ + ½(a11-a22) cos 2θ + ½(a21-a12) sin 2θ)}`,
/// normalized over `[0, 2π]`. Not periodic unless its linear coefficient
/// vanishes; kept for reproducing published figures.
pub fn density_rotation_printed(
    coeffs: &AngularCoeffs,
    alpha: f64,
    beta: f64,
    n_grid: usize,
) -> Result<PhaseDensity> {
    if beta == 0.0 {
        return Err(Error::BetaZero);
    }
    check_grid(n_grid)?;
    let a = &coeffs.source.a;
    let inv_b2 = 1.0 / (beta * beta);
    let linear = printed_linear_coefficient(coeffs, alpha, beta);
    let log_p = exponent_samples(n_grid, |t| {
        let (s2, c2) = (2.0 * t).sin_cos();
        inv_b2 * (linear * t + 0.5 * (a[0][0] - a[1][1]) * c2 + 0.5 * (a[1][0] - a[0][1]) * s2)
    });
    let mut density = density_from_log(&log_p, 1, Domain::Full, DensityMethod::Printed)?;
    density.diagnostics.nonperiodic_printed_form = linear != 0.0;
    Ok(density)
}

/// The published game density `g(θ)` for rotation-scaling noise,
/// `exp{β^{-2}(((k1+k2)(c1²-c2²)+αβ)θ - (k1c1-k2c2)(c1+c2) cos 2θ + ½(k1+k2)(c1²-c2²) sin 2θ)}`,
/// normalized over `[0, 2π]` as published (no periodic completion).
pub fn density_game_printed(
    game: &GameParams,
    alpha: f64,
    beta: f64,
    n_grid: usize,
) -> Result<PhaseDensity> {
    if beta == 0.0 {
        return Err(Error::BetaZero);
    }
    check_grid(n_grid)?;
    let GameParams { c1, c2, k1, k2, .. } = *game;
    let inv_b2 = 1.0 / (beta * beta);
    let d = c1 * c1 - c2 * c2;
    let linear = (k1 + k2) * d + alpha * beta;
    let cos_coef = -(k1 * c1 - k2 * c2) * (c1 + c2);
    let sin_coef = 0.5 * (k1 + k2) * d;
    let log_p = exponent_samples(n_grid, |t| {
        let (s2, c2t) = (2.0 * t).sin_cos();
        inv_b2 * (linear * t + cos_coef * c2t + sin_coef * s2)
    });
    let mut density = density_from_log(&log_p, 1, Domain::Full, DensityMethod::Printed)?;
    density.diagnostics.nonperiodic_printed_form = linear != 0.0;
    Ok(density)
}

fn exponent_samples(n_grid: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = 2.0 * PI / n_grid as f64;
    (0..=n_grid).map(|i| f(i as f64 * h)).collect()
}

/// First-order backward-difference scheme on `[0, π]` with `h = π/N`:
///
/// ```text
/// p(i) = (J + q4(i)^2 p(i-1) / (2h)) F(i)
/// F(i) = 2h / (2h (-q3(i) + q2(i) q4(i) + q4(i) w(i)) + q4(i)^2)
/// ```
///
/// The recurrence is affine in the current `J` and the start value `p(-1)`.
/// Two sweeps, `(J, p(-1)) = (1, 0)` and `(0, 1)`, are combined so that the
/// discrete solution wraps periodically (`p(N-1) = p(-1)`, hence
/// `p(N) = p(0)`), then normalized over `[0, π]`.
pub fn density_backward_difference(
    coeffs: &AngularCoeffs,
    n_grid: usize,
    mode: FpeCoefficients,
) -> Result<PhaseDensity> {
    check_grid(n_grid)?;
    let h = PI / n_grid as f64;
    let two_h = 2.0 * h;
    let mut from_current = Vec::with_capacity(n_grid + 1);
    let mut from_start = Vec::with_capacity(n_grid + 1);
    let (mut u, mut v) = (0.0, 1.0);
    for i in 0..=n_grid {
        let theta = i as f64 * h;
        let q = coeffs.eval(theta);
        let w = coeffs.closing_term(theta, mode);
        let q4sq = q.q4 * q.q4;
        let denominator = two_h * (-q.q3 + q.q2 * q.q4 + q.q4 * w) + q4sq;
        if denominator.abs() < DENOMINATOR_FLOOR {
            return Err(Error::SingularRecurrence {
                index: i,
                denominator,
            });
        }
        let f = two_h / denominator;
        let carry = q4sq * f / two_h;
        u = f + carry * u;
        v *= carry;
        from_current.push(u);
        from_start.push(v);
    }
    let current = 1.0 - from_start[n_grid - 1];
    let start = from_current[n_grid - 1];
    let raw: Vec<f64> = from_current
        .iter()
        .zip(&from_start)
        .map(|(u, v)| current * u + start * v)
        .collect();
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularRecurrence {
            index: n_grid,
            denominator: f64::NAN,
        });
    }
    // the overall sign of the combination is arbitrary
    let total: f64 = raw.iter().sum();
    let raw: Vec<f64> = if total < 0.0 {
        raw.iter().map(|v| -v).collect()
    } else {
        raw
    };
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let clamped: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let mut density =
        PhaseDensity::from_samples(clamped, Domain::Half, DensityMethod::BackwardDifference)?;
    if min < 0.0 {
        // rescale the unclamped values by the same normalization
        let scale = density.values.iter().zip(&raw).find_map(|(c, r)| {
            (*r > 0.0).then(|| c / r)
        });
        let scale = scale.unwrap_or(0.0);
        density.unclamped = Some(raw.iter().map(|r| r * scale).collect());
        density.diagnostics.negative_min = Some(min * scale);
    }
    Ok(density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat2;
    use crate::model::{linearize, rotation_scaling, LinearSde2};

    const PAPER_A: Mat2 = [[-0.176, 0.792], [-1.584, -3.52]];

    fn coeffs(a: Mat2, b: Mat2) -> AngularCoeffs {
        AngularCoeffs::new(LinearSde2::new(a, b))
    }

    fn max_dev_from(p: &PhaseDensity, c: f64) -> f64 {
        p.values().iter().map(|v| (v - c).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn uniform_case_all_methods() {
        let c = coeffs([[-1.0, -1.0], [1.0, -1.0]], rotation_scaling(0.0, 1.0));
        let p = density_closed_form(&c, 256, FpeCoefficients::Derived).unwrap();
        assert!(max_dev_from(&p, 1.0 / (2.0 * PI)) < 1e-12);
        let p = density_rotation_closed_form(&c, 0.0, 1.0, 256).unwrap();
        assert!(max_dev_from(&p, 1.0 / (2.0 * PI)) < 1e-12);
        let p = density_backward_difference(&c, 256, FpeCoefficients::Derived).unwrap();
        assert!(max_dev_from(&p, 1.0 / PI) < 1e-6);
    }

    #[test]
    fn degenerate_diffusion_is_rejected() {
        let c = coeffs(PAPER_A, [[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(
            density_closed_form(&c, 64, FpeCoefficients::Derived),
            Err(Error::DiffusionDegenerate { .. })
        ));
        // q4 = b21 cos^2 θ vanishes at θ = π/2
        let c = coeffs(PAPER_A, [[0.0, 0.0], [1.0, 0.0]]);
        match density_closed_form(&c, 64, FpeCoefficients::Derived) {
            Err(Error::DiffusionDegenerate { theta, .. }) => {
                assert!((theta - PI / 2.0).abs() < 1e-12)
            }
            other => panic!("expected DiffusionDegenerate, got {other:?}"),
        }
    }

    #[test]
    fn beta_zero_and_coarse_grids_are_rejected() {
        let c = coeffs(PAPER_A, rotation_scaling(1.0, 0.0));
        assert_eq!(
            density_rotation_closed_form(&c, 1.0, 0.0, 64).unwrap_err(),
            Error::BetaZero
        );
        let c = coeffs(PAPER_A, rotation_scaling(1.0, 1.0));
        assert!(matches!(
            density_backward_difference(&c, 1, FpeCoefficients::Derived),
            Err(Error::GridTooCoarse { .. })
        ));
        assert!(matches!(
            density_backward_difference(&c, 15, FpeCoefficients::Derived),
            Err(Error::GridTooCoarse { n: 15, min: 16 })
        ));
    }

    #[test]
    fn symmetric_drift_gives_even_density() {
        // a12 = a21 = 0 and α = 0: no current, p ∝ exp(½(a11-a22) cos 2θ / β^2)
        let a = [[-2.0, 0.0], [0.0, -0.5]];
        let beta = 1.3;
        let c = coeffs(a, rotation_scaling(0.0, beta));
        let p = density_rotation_closed_form(&c, 0.0, beta, 512).unwrap();
        let n = p.cells();
        for i in 0..=n {
            assert!((p.values()[i] - p.values()[n - i]).abs() < 1e-12);
        }
        let expected: Vec<f64> = p
            .grid()
            .iter()
            .map(|t| (0.5 * (a[0][0] - a[1][1]) * (2.0 * t).cos() / (beta * beta)).exp())
            .collect();
        let reference = PhaseDensity::from_samples(expected, Domain::Full, DensityMethod::Converted).unwrap();
        assert!(p.max_abs_diff(&reference).unwrap() < 1e-10);
    }

    #[test]
    fn closed_forms_agree_for_rotation_scaling() {
        let a = [[-1.2, 2.3], [-0.4, -0.7]];
        for &(alpha, beta) in &[(0.0, 1.0), (1.5, 0.7), (-2.0, 2.5)] {
            let c = coeffs(a, rotation_scaling(alpha, beta));
            let general = density_closed_form(&c, 1024, FpeCoefficients::Derived).unwrap();
            let rotation = density_rotation_closed_form(&c, alpha, beta, 1024).unwrap();
            let d = general.max_abs_diff(&rotation).unwrap();
            assert!(d < 1e-6, "alpha={alpha} beta={beta}: {d}");
            assert!(rotation.diagnostics.nonperiodic_printed_form);
        }
    }

    #[test]
    fn densities_are_normalized_periodic_and_nonnegative() {
        let a = [[0.4, -1.1], [2.0, -1.6]];
        let c = coeffs(a, [[0.9, -0.3], [1.4, 0.2]]);
        for p in [
            density_closed_form(&c, 512, FpeCoefficients::Derived).unwrap(),
            density_closed_form(&c, 512, FpeCoefficients::Printed).unwrap(),
        ] {
            assert!((p.integral() - 1.0).abs() < 1e-8);
            let v = p.values();
            assert!((v[0] - v[v.len() - 1]).abs() < 1e-10 * v[0]);
            assert!(v.iter().all(|x| *x >= 0.0));
        }
    }

    /// Residual of the once-integrated stationary equation: the current
    /// `J(θ) = (-q3 + q2 q4 + q4 q4') p + ½ q4^2 p'` must be constant.
    fn current_spread(c: &AngularCoeffs, p: &PhaseDensity) -> f64 {
        let h = p.step();
        let v = p.values();
        let n = p.cells();
        let currents: Vec<f64> = (0..n)
            .map(|i| {
                let t = p.grid()[i];
                let q = c.eval(t);
                let dp = (v[(i + 1) % n] - v[(i + n - 1) % n]) / (2.0 * h);
                (-q.q3 + q.q2 * q.q4 + q.q4 * q.q4_prime) * v[i] + 0.5 * q.q4 * q.q4 * dp
            })
            .collect();
        let max = currents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = currents.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    #[test]
    fn closed_form_satisfies_stationary_equation_under_refinement() {
        let c = coeffs([[0.4, -1.1], [2.0, -1.6]], [[0.9, -0.3], [1.4, 0.2]]);
        let coarse = current_spread(&c, &density_closed_form(&c, 256, FpeCoefficients::Derived).unwrap());
        let fine = current_spread(&c, &density_closed_form(&c, 512, FpeCoefficients::Derived).unwrap());
        assert!(fine < 1e-3, "fine residual {fine}");
        assert!(coarse / fine > 3.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn printed_closing_term_differs_off_rotation() {
        let c = coeffs([[0.4, -1.1], [2.0, -1.6]], [[0.9, -0.3], [1.4, 0.2]]);
        let derived = density_closed_form(&c, 256, FpeCoefficients::Derived).unwrap();
        let printed = density_closed_form(&c, 256, FpeCoefficients::Printed).unwrap();
        assert!(derived.max_abs_diff(&printed).unwrap() > 1e-3);
    }

    #[test]
    fn backward_difference_converges_to_closed_form() {
        let game = GameParams::with_rotation(0.2, 2.0, 0.2, 0.4, 2.0, 2.0).unwrap();
        let c = AngularCoeffs::new(linearize(&game));
        let mut errors = Vec::new();
        for n in [256, 512, 1024] {
            let bd = density_backward_difference(&c, n, FpeCoefficients::Derived).unwrap();
            let exact = density_rotation_closed_form(&c, 2.0, 2.0, 2 * n).unwrap().to_half().unwrap();
            errors.push(bd.max_abs_diff(&exact).unwrap());
        }
        assert!(errors[0] / errors[1] >= 1.8, "{errors:?}");
        assert!(errors[1] / errors[2] >= 1.8, "{errors:?}");
    }

    #[test]
    fn fold_and_unfold_round_trip() {
        let c = coeffs([[-1.2, 2.3], [-0.4, -0.7]], rotation_scaling(0.5, 1.0));
        let full = density_rotation_closed_form(&c, 0.5, 1.0, 512).unwrap();
        let back = full.to_half().unwrap().to_full().unwrap();
        assert!(full.max_abs_diff(&back).unwrap() < 1e-12);
    }

    #[test]
    fn trig_moment_examples() {
        let uniform = PhaseDensity::from_samples(vec![1.0; 257], Domain::Full, DensityMethod::Converted).unwrap();
        let m = trig_moments(&uniform);
        assert!(m.c2_moment.abs() < 1e-14 && m.s2_moment.abs() < 1e-14);

        let n = 256;
        let h = 2.0 * PI / n as f64;
        let vals = (0..=n).map(|i| 1.0 + (2.0 * i as f64 * h).cos()).collect();
        let p = PhaseDensity::from_samples(vals, Domain::Full, DensityMethod::Converted).unwrap();
        let m = trig_moments(&p);
        assert!((m.c2_moment - 0.5).abs() < 1e-14);
        assert!(m.s2_moment.abs() < 1e-14);

        // narrow wrapped Gaussian at 0
        let width: f64 = 0.01;
        let vals = (0..=4096)
            .map(|i| {
                let t = i as f64 * 2.0 * PI / 4096.0;
                let d = t.min(2.0 * PI - t);
                (-(d * d) / (2.0 * width * width)).exp()
            })
            .collect();
        let p = PhaseDensity::from_samples(vals, Domain::Full, DensityMethod::Converted).unwrap();
        let m = trig_moments(&p);
        assert!((m.c2_moment - 1.0).abs() < 1e-3 && m.s2_moment.abs() < 1e-12);
    }

    #[test]
    fn moments_are_domain_invariant() {
        let c = coeffs([[-1.2, 2.3], [-0.4, -0.7]], rotation_scaling(0.5, 1.0));
        let full = density_rotation_closed_form(&c, 0.5, 1.0, 1024).unwrap();
        let (mf, mh) = (trig_moments(&full), trig_moments(&full.to_half().unwrap()));
        assert!((mf.c2_moment - mh.c2_moment).abs() < 1e-12);
        assert!((mf.s2_moment - mh.s2_moment).abs() < 1e-12);
        assert!(mf.c2_moment.abs() <= 1.0 && mf.s2_moment.abs() <= 1.0);
    }

    #[test]
    fn small_beta_does_not_overflow() {
        let game = GameParams::with_rotation(0.2, 2.0, 0.2, 0.4, 2.0, 0.1).unwrap();
        let c = AngularCoeffs::new(linearize(&game));
        let p = density_rotation_closed_form(&c, 2.0, 0.1, 4096).unwrap();
        assert!(p.values().iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((p.integral() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn printed_forms_are_flagged_nonperiodic() {
        let game = GameParams::with_rotation(0.2, 2.0, 0.2, 0.4, 2.0, 2.0).unwrap();
        let c = AngularCoeffs::new(linearize(&game));
        let p = density_rotation_printed(&c, 2.0, 2.0, 512).unwrap();
        assert!(p.diagnostics.nonperiodic_printed_form);
        let v = p.values();
        assert!((v[0] - v[v.len() - 1]).abs() > 1e-3);
        let g = density_game_printed(&game, 2.0, 2.0, 512).unwrap();
        assert!(g.diagnostics.nonperiodic_printed_form);
        assert!((g.integral() - 1.0).abs() < 1e-12);
    }
}
