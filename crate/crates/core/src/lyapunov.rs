//! Top Lyapunov exponent of the linearized game.
//!
//! The exponent is the stationary mean of the log-amplitude drift,
//! `λ = ∫ (q1 + ½(q4² - q2²)) p(θ) dθ`, so it can be computed by quadrature
//! against a phase density, by the rotation-scaling closed form in terms of
//! the moments of that density, or by simulating the linear SDE directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::angular::{is_rotation_scaling, AngularCoeffs};
use crate::density::{
    density_game_printed, density_rotation_closed_form, trig_moments, Domain, PhaseDensity,
    TrigMoments,
};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};
use crate::model::{linearize, rotation_scaling, GameParams, LinearSde2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovMethod {
    Quadrature,
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diagnostics {
    Quadrature { cells: usize, domain: Domain },
    ClosedForm { moments: TrigMoments },
    MonteCarlo { n_paths: usize, standard_error: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub method: LyapunovMethod,
    pub diagnostics: Diagnostics,
}

impl LyapunovEstimate {
    pub fn standard_error(&self) -> Option<f64> {
        match self.diagnostics {
            Diagnostics::MonteCarlo { standard_error, .. } => Some(standard_error),
            _ => None,
        }
    }
}

pub fn lambda_quadrature(coeffs: &AngularCoeffs, p: &PhaseDensity) -> LyapunovEstimate {
    LyapunovEstimate {
        value: p.expectation(|t| coeffs.log_growth_rate(t)),
        method: LyapunovMethod::Quadrature,
        diagnostics: Diagnostics::Quadrature {
            cells: p.cells(),
            domain: p.domain(),
        },
    }
}

/// Closed form for the game with `b = [[α, -β], [β, α]]`:
///
/// ```text
/// λ = -(k1c1 + k2c2)(c1 + c2) + ½(β² - α²)
///     - (k1c1 - k2c2)(c1 + c2) D2 + ½(k2 - k1)(c1² - c2²) E2
/// ```
///
/// with `D2`, `E2` the `cos 2θ`, `sin 2θ` moments of the phase density.
pub fn lambda_closed_form(game: &GameParams, moments: &TrigMoments) -> Result<LyapunovEstimate> {
    let (alpha, beta) =
        is_rotation_scaling(&linearize(game)).ok_or(Error::NotRotationScaling)?;
    if beta == 0.0 {
        return Err(Error::BetaZero);
    }
    let GameParams { c1, c2, k1, k2, .. } = *game;
    let s = c1 + c2;
    let value = -(k1 * c1 + k2 * c2) * s + 0.5 * (beta * beta - alpha * alpha)
        - (k1 * c1 - k2 * c2) * s * moments.c2_moment
        + 0.5 * (k2 - k1) * (c1 * c1 - c2 * c2) * moments.s2_moment;
    Ok(LyapunovEstimate {
        value,
        method: LyapunovMethod::ClosedForm,
        diagnostics: Diagnostics::ClosedForm { moments: *moments },
    })
}

/// Closed form for any `A` with rotation-scaling `B`:
/// `λ = ½(a11 + a22 + β² - α²) + ½(a11 - a22) c2 + ½(a21 + a12) s2`.
pub fn lambda_rotation_closed_form(sys: &LinearSde2, moments: &TrigMoments) -> Result<LyapunovEstimate> {
    let (alpha, beta) = is_rotation_scaling(sys).ok_or(Error::NotRotationScaling)?;
    if beta == 0.0 {
        return Err(Error::BetaZero);
    }
    let a = &sys.a;
    let value = 0.5 * (a[0][0] + a[1][1] + beta * beta - alpha * alpha)
        + 0.5 * (a[0][0] - a[1][1]) * moments.c2_moment
        + 0.5 * (a[1][0] + a[0][1]) * moments.s2_moment;
    Ok(LyapunovEstimate {
        value,
        method: LyapunovMethod::ClosedForm,
        diagnostics: Diagnostics::ClosedForm { moments: *moments },
    })
}

/// Step map used by the Monte Carlo estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum McIntegrator {
    /// `X ← exp(h(A - ½B²)) exp(B ΔW) X`: exact flows of the Stratonovich
    /// drift and noise parts, composed.
    #[default]
    ExponentialSplitting,
    /// `X ← X + h A X + ΔW B X`.
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub horizon: f64,
    pub step: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub burn_in_fraction: f64,
    pub integrator: McIntegrator,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            horizon: 200.0,
            step: 1e-3,
            n_paths: 256,
            seed: 0,
            burn_in_fraction: 0.1,
            integrator: McIntegrator::default(),
        }
    }
}

/// `exp(w B)` for scalar `w`, with the spectral data of `B` precomputed.
#[derive(Debug, Clone, Copy)]
struct ScaledExp {
    half_trace: f64,
    shifted: Mat2,
    // (t/2)^2 - det
    disc: f64,
    root: f64,
}

impl ScaledExp {
    fn new(b: &Mat2) -> Self {
        let half_trace = 0.5 * linalg::trace(b);
        let disc = half_trace * half_trace - linalg::det(b);
        ScaledExp {
            half_trace,
            shifted: [
                [b[0][0] - half_trace, b[0][1]],
                [b[1][0], b[1][1] - half_trace],
            ],
            disc,
            root: disc.abs().sqrt(),
        }
    }

    #[inline]
    fn at(&self, w: f64) -> Mat2 {
        let x = w * self.root;
        let (c, sh) = if self.root < 1e-12 {
            (1.0, w)
        } else if self.disc > 0.0 {
            (x.cosh(), x.sinh() / self.root)
        } else {
            let (s, c) = x.sin_cos();
            (c, s / self.root)
        };
        let e = (w * self.half_trace).exp();
        let m = &self.shifted;
        [
            [e * (c + sh * m[0][0]), e * sh * m[0][1]],
            [e * sh * m[1][0], e * (c + sh * m[1][1])],
        ]
    }
}

/// Reproducible generator for path `index` of an ensemble seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Per-path growth rates `(1/T') log(r(T)/r(T_burn))` of `dX = AX dt + BX dw`
/// from `X(0) = (1, 0)`, with `T' = T - T_burn`. Ordered by path index.
pub fn monte_carlo_path_rates(sys: &LinearSde2, cfg: &MonteCarloConfig) -> Result<Vec<f64>> {
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::param("step", format!("must be positive, got {}", cfg.step)));
    }
    if !(cfg.horizon >= 100.0 * cfg.step) {
        return Err(Error::param(
            "horizon",
            format!("must be at least 100 steps, got T = {} with h = {}", cfg.horizon, cfg.step),
        ));
    }
    if cfg.n_paths == 0 {
        return Err(Error::param("n_paths", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&cfg.burn_in_fraction) {
        return Err(Error::param("burn_in_fraction", "must lie in [0, 1)"));
    }
    let bound = linalg::max_row_sum(&sys.a);
    if cfg.step * bound > 0.5 {
        return Err(Error::StepTooLarge {
            h: cfg.step,
            bound,
            product: cfg.step * bound,
        });
    }

    let h = cfg.step;
    let n_steps = (cfg.horizon / h).round() as usize;
    let burn = (cfg.burn_in_fraction * n_steps as f64).floor() as usize;
    let averaging_time = (n_steps - burn) as f64 * h;
    let sqrt_h = h.sqrt();
    let noise = ScaledExp::new(&sys.b);
    let drift_flow = linalg::expm(&linalg::scale(
        &linalg::add(&sys.a, &linalg::scale(&linalg::mat_mul(&sys.b, &sys.b), -0.5)),
        h,
    ));

    let run_path = |index: usize| -> f64 {
        let mut rng = path_rng(cfg.seed, index as u64);
        let mut x = [1.0, 0.0];
        let mut log_growth = 0.0;
        for step in 0..n_steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            let dw = sqrt_h * z;
            x = match cfg.integrator {
                McIntegrator::ExponentialSplitting => {
                    linalg::mat_vec(&drift_flow, linalg::mat_vec(&noise.at(dw), x))
                }
                McIntegrator::EulerMaruyama => {
                    let ax = linalg::mat_vec(&sys.a, x);
                    let bx = linalg::mat_vec(&sys.b, x);
                    [x[0] + h * ax[0] + dw * bx[0], x[1] + h * ax[1] + dw * bx[1]]
                }
            };
            let r = linalg::norm(x);
            x = [x[0] / r, x[1] / r];
            if step >= burn {
                log_growth += r.ln();
            }
        }
        log_growth / averaging_time
    };

    Ok((0..cfg.n_paths).into_par_iter().map(run_path).collect())
}

pub fn lambda_monte_carlo(sys: &LinearSde2, cfg: &MonteCarloConfig) -> Result<LyapunovEstimate> {
    let rates = monte_carlo_path_rates(sys, cfg)?;
    let (mean, standard_error) = mean_and_standard_error(&rates);
    Ok(LyapunovEstimate {
        value: mean,
        method: LyapunovMethod::MonteCarlo,
        diagnostics: Diagnostics::MonteCarlo {
            n_paths: rates.len(),
            standard_error,
        },
    })
}

/// Sample mean and standard error of the mean, summed in index order.
pub fn mean_and_standard_error(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMethod {
    /// Quadrature against the rotation-scaling closed-form density.
    Quadrature,
    /// Moment formula with moments of the rotation-scaling closed-form density.
    ClosedForm,
    MonteCarlo,
    /// Moment formula with the published (non-periodic) game density.
    Printed,
}

impl SweepMethod {
    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::Quadrature => "quadrature",
            SweepMethod::ClosedForm => "closed-form",
            SweepMethod::MonteCarlo => "monte-carlo",
            SweepMethod::Printed => "printed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub method: SweepMethod,
    pub grid: usize,
    /// Beta values with `|β|` below this are skipped by the density-based methods.
    pub beta_dead_zone: f64,
    pub monte_carlo: MonteCarloConfig,
}

impl SweepSpec {
    pub fn new(param: SweepParam, from: f64, to: f64, steps: usize, method: SweepMethod) -> Self {
        SweepSpec {
            param,
            from,
            to,
            steps,
            method,
            grid: 4096,
            beta_dead_zone: 0.05,
            monte_carlo: MonteCarloConfig::default(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let span = self.to - self.from;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.to
                } else {
                    self.from + span * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub param: f64,
    pub lambda: Option<f64>,
    pub standard_error: Option<f64>,
    /// Why `lambda` is missing.
    pub gap: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub param: SweepParam,
    pub method: SweepMethod,
    pub points: Vec<SweepPoint>,
}

/// `(α, β)` for a sweep value; the other parameter comes from the template's
/// `b11` (α) or `b21` (β).
fn noise_params(template: &GameParams, param: SweepParam, value: f64) -> (f64, f64) {
    match param {
        SweepParam::Alpha => (value, template.b[1][0]),
        SweepParam::Beta => (template.b[0][0], value),
    }
}

/// λ at one sweep value.
pub fn lambda_at(template: &GameParams, spec: &SweepSpec, value: f64) -> Result<LyapunovEstimate> {
    let (alpha, beta) = noise_params(template, spec.param, value);
    let game = template.with_b(rotation_scaling(alpha, beta));
    let sys = linearize(&game);
    if spec.method != SweepMethod::MonteCarlo && beta.abs() < spec.beta_dead_zone {
        return Err(Error::BetaZero);
    }
    match spec.method {
        SweepMethod::Quadrature => {
            let coeffs = AngularCoeffs::new(sys);
            let p = density_rotation_closed_form(&coeffs, alpha, beta, spec.grid)?;
            Ok(lambda_quadrature(&coeffs, &p))
        }
        SweepMethod::ClosedForm => {
            let coeffs = AngularCoeffs::new(sys);
            let p = density_rotation_closed_form(&coeffs, alpha, beta, spec.grid)?;
            lambda_closed_form(&game, &trig_moments(&p))
        }
        SweepMethod::Printed => {
            let p = density_game_printed(&game, alpha, beta, spec.grid)?;
            lambda_closed_form(&game, &trig_moments(&p))
        }
        SweepMethod::MonteCarlo => lambda_monte_carlo(&sys, &spec.monte_carlo),
    }
}

pub fn sweep(template: &GameParams, spec: &SweepSpec) -> Result<SweepOutput> {
    if spec.steps < 2 {
        return Err(Error::param("steps", format!("must be at least 2, got {}", spec.steps)));
    }
    if !(spec.from.is_finite() && spec.to.is_finite()) {
        return Err(Error::param("range", "sweep bounds must be finite"));
    }
    let (lo, hi) = if spec.from <= spec.to {
        (spec.from, spec.to)
    } else {
        (spec.to, spec.from)
    };
    let ordered = SweepSpec { from: lo, to: hi, ..*spec };
    let values = ordered.values();
    let eval = |&value: &f64| match lambda_at(template, &ordered, value) {
        Ok(est) => SweepPoint {
            param: value,
            lambda: Some(est.value),
            standard_error: est.standard_error(),
            gap: None,
        },
        Err(e) => SweepPoint {
            param: value,
            lambda: None,
            standard_error: None,
            gap: Some(e.to_string()),
        },
    };
    // Monte Carlo parallelizes over paths already
    let points = if spec.method == SweepMethod::MonteCarlo {
        values.iter().map(eval).collect()
    } else {
        values.par_iter().map(eval).collect()
    };
    Ok(SweepOutput {
        param: spec.param,
        method: spec.method,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignChange {
    pub lo: f64,
    pub hi: f64,
    pub root: f64,
}

/// Sign changes between adjacent valid sweep points. With a `refine`
/// function, each bracket is bisected down to width `tol`; otherwise the grid
/// bracket is kept and the root is linearly interpolated.
pub fn find_sign_changes(
    output: &SweepOutput,
    refine: Option<&(dyn Fn(f64) -> Result<f64> + Sync)>,
    tol: f64,
) -> Vec<SignChange> {
    let mut changes = Vec::new();
    for w in output.points.windows(2) {
        let (Some(fa), Some(fb)) = (w[0].lambda, w[1].lambda) else {
            continue;
        };
        if (fa < 0.0) == (fb < 0.0) {
            continue;
        }
        let (a, b) = (w[0].param, w[1].param);
        let change = match refine {
            Some(f) => bisect(f, a, b, fa, tol),
            None => SignChange {
                lo: a,
                hi: b,
                root: a + (b - a) * fa / (fa - fb),
            },
        };
        changes.push(change);
    }
    changes
}

fn bisect(f: &(dyn Fn(f64) -> Result<f64> + Sync), mut lo: f64, mut hi: f64, f_lo: f64, tol: f64) -> SignChange {
    let lo_negative = f_lo < 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match f(mid) {
            Ok(v) if (v < 0.0) == lo_negative => lo = mid,
            Ok(_) => hi = mid,
            // keep the grid bracket if the midpoint cannot be evaluated
            Err(_) => break,
        }
    }
    SignChange {
        lo,
        hi,
        root: 0.5 * (lo + hi),
    }
}

/// Sign changes of a sweep, refined by bisection unless the method is Monte Carlo.
pub fn sweep_roots(template: &GameParams, spec: &SweepSpec, output: &SweepOutput, tol: f64) -> Vec<SignChange> {
    if spec.method == SweepMethod::MonteCarlo {
        return find_sign_changes(output, None, tol);
    }
    let f = |v: f64| lambda_at(template, spec, v).map(|e| e.value);
    find_sign_changes(output, Some(&f), tol)
}
