//! Path simulation of the nonlinear game SDE
//!
//! ```text
//! dx_i = k_i (x_j / (x1 + x2)^2 - c_i) dt + (b_i1 x1 + b_i2 x2 + γ_i) dw
//! ```
//!
//! driven by one scalar Wiener process, plus its deterministic reduction and
//! the scalar phase process of the linearized system.
//!
//! Wiener increments come from `ChaCha8Rng::seed_from_u64(seed)` turned into
//! standard normals by `rand_distr::StandardNormal` and scaled by `√h`. Both
//! algorithms are value-stable across releases of those crates.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rand::SeedableRng;

use crate::angular::AngularCoeffs;
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::model::{drift, GameParams, GammaOffsets};

/// Guard on the demand singularity at `x1 + x2 = 0`.
pub const DEGENERATE_SUM: f64 = 1e-9;
/// States beyond this norm end a trajectory.
pub const BLOWUP_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    pub step: f64,
    pub increments: Vec<f64>,
    pub seed: u64,
}

/// Endless stream of `Normal(0, h)` increments.
pub struct WienerStream {
    rng: ChaCha8Rng,
    sqrt_h: f64,
}

impl WienerStream {
    pub fn new(seed: u64, h: f64) -> Self {
        WienerStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sqrt_h: h.sqrt(),
        }
    }

    #[inline]
    pub fn next_increment(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sqrt_h * z
    }
}

pub fn wiener_path(seed: u64, h: f64, n_steps: usize) -> Result<WienerPath> {
    check_step(h)?;
    let mut stream = WienerStream::new(seed, h);
    Ok(WienerPath {
        step: h,
        increments: (0..n_steps).map(|_| stream.next_increment()).collect(),
        seed,
    })
}

impl WienerPath {
    /// The same Brownian path seen at step `factor · h`: consecutive blocks of
    /// `factor` increments are summed, and an incomplete tail block is dropped.
    pub fn coarsen(&self, factor: usize) -> Result<WienerPath> {
        if factor == 0 {
            return Err(Error::param("factor", "must be at least 1"));
        }
        Ok(WienerPath {
            step: self.step * factor as f64,
            increments: self
                .increments
                .chunks_exact(factor)
                .map(|c| c.iter().sum())
                .collect(),
            seed: self.seed,
        })
    }
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::param("h", format!("must be positive and finite, got {h}")))
    }
}

fn check_state(x: Vec2) -> Result<f64> {
    let s = x[0] + x[1];
    if s.abs() <= DEGENERATE_SUM || !s.is_finite() {
        Err(Error::DegenerateInput { sum: s })
    } else {
        Ok(s)
    }
}

#[inline]
fn noise(game: &GameParams, gamma: &GammaOffsets, x: Vec2) -> Vec2 {
    let b = &game.b;
    [
        b[0][0] * x[0] + b[0][1] * x[1] + gamma.gamma1,
        b[1][0] * x[0] + b[1][1] * x[1] + gamma.gamma2,
    ]
}

pub fn step_euler_maruyama(game: &GameParams, gamma: &GammaOffsets, x: Vec2, h: f64, dw: f64) -> Result<Vec2> {
    check_state(x)?;
    let f = drift(game, x[0], x[1])?;
    let g = noise(game, gamma, x);
    Ok([x[0] + h * f[0] + g[0] * dw, x[1] + h * f[1] + g[1] * dw])
}

/// Second-order Itô–Taylor step for scalar noise:
///
/// ```text
/// x' = x + F h + g G + ½ L¹g (G² - h) + ½ (L¹F + L⁰g) h G + ½ L⁰F h²
/// ```
///
/// with `L⁰ = F·∇ + ½ g gᵀ : ∇²` and `L¹ = g·∇`. Since `g` is affine,
/// `L⁰g = B F` and `L¹g = B g`.
pub fn step_euler2(game: &GameParams, gamma: &GammaOffsets, x: Vec2, h: f64, dw: f64) -> Result<Vec2> {
    let s = check_state(x)?;
    let (x1, x2) = (x[0], x[1]);
    let f = drift(game, x1, x2)?;
    let g = noise(game, gamma, x);
    let b = &game.b;
    let k = [game.k1, game.k2];

    let s3 = s * s * s;
    let s4 = s3 * s;
    // jac[i][j] = ∂_j F_i, hess[i] = (∂11, ∂12, ∂22) of F_i
    let jac = [
        [k[0] * (-2.0 * x2 / s3), k[0] * (x1 - x2) / s3],
        [k[1] * (x2 - x1) / s3, k[1] * (-2.0 * x1 / s3)],
    ];
    let hess = [
        [6.0 * x2, 4.0 * x2 - 2.0 * x1, 2.0 * x2 - 4.0 * x1].map(|v| k[0] * v / s4),
        [2.0 * x1 - 4.0 * x2, 4.0 * x1 - 2.0 * x2, 6.0 * x1].map(|v| k[1] * v / s4),
    ];

    let mut out = [0.0; 2];
    for i in 0..2 {
        let l0_f = f[0] * jac[i][0]
            + f[1] * jac[i][1]
            + 0.5 * (g[0] * g[0] * hess[i][0] + 2.0 * g[0] * g[1] * hess[i][1] + g[1] * g[1] * hess[i][2]);
        let l1_f = g[0] * jac[i][0] + g[1] * jac[i][1];
        let l0_g = b[i][0] * f[0] + b[i][1] * f[1];
        let l1_g = b[i][0] * g[0] + b[i][1] * g[1];
        out[i] = x[i]
            + f[i] * h
            + g[i] * dw
            + 0.5 * l1_g * (dw * dw - h)
            + 0.5 * (l1_f + l0_g) * h * dw
            + 0.5 * l0_f * h * h;
    }
    Ok(out)
}

/// The published second-order recurrence as printed, with the `k_i` factors
/// restored on the drift brackets. Its Milstein term keeps only `b11 g1`
/// (resp. `b22 g2`) and its correction terms keep only diagonal derivatives.
pub fn step_euler2_printed(game: &GameParams, gamma: &GammaOffsets, x: Vec2, h: f64, dw: f64) -> Result<Vec2> {
    let s = check_state(x)?;
    let (x1, x2) = (x[0], x[1]);
    let f = drift(game, x1, x2)?;
    let g = noise(game, gamma, x);
    let b = &game.b;
    let s3 = s * s * s;
    let cross = x1 * x2 / s3;
    let milstein = 0.5 * (dw * dw - h);
    let (half_h2, half_hg) = (0.5 * h * h, 0.5 * h * dw);
    Ok([
        x1 + h * f[0]
            + g[0] * dw
            + b[0][0] * g[0] * milstein
            + (-2.0 * cross * f[0] + g[0] * cross) * half_h2
            + (b[0][0] - 2.0 * x2 / s3) * g[0] * half_hg,
        x2 + h * f[1]
            + g[1] * dw
            + b[1][1] * g[1] * milstein
            + (-2.0 * cross * f[1] + g[1] * cross) * half_h2
            + (b[1][0] - 2.0 * x1 / s3) * g[1] * half_hg,
    ])
}

/// Classic fourth-order Runge–Kutta step for `x' = f(x)`.
pub fn rk4_step(f: impl Fn(Vec2) -> Result<Vec2>, x: Vec2, h: f64) -> Result<Vec2> {
    let shift = |k: Vec2, c: f64| [x[0] + c * k[0], x[1] + c * k[1]];
    let k1 = f(x)?;
    let k2 = f(shift(k1, 0.5 * h))?;
    let k3 = f(shift(k2, 0.5 * h))?;
    let k4 = f(shift(k3, h))?;
    Ok([
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    EulerMaruyama,
    #[default]
    Euler2,
    Euler2Printed,
    OdeRk4,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "euler-maruyama",
            Scheme::Euler2 => "euler2",
            Scheme::Euler2Printed => "euler2-printed",
            Scheme::OdeRk4 => "ode-rk4",
        }
    }

    pub fn parse(name: &str) -> Option<Scheme> {
        [Scheme::EulerMaruyama, Scheme::Euler2, Scheme::Euler2Printed, Scheme::OdeRk4]
            .into_iter()
            .find(|s| s.name() == name)
    }

    pub fn is_stochastic(self) -> bool {
        self != Scheme::OdeRk4
    }

    /// One step of the scheme; `dw` is ignored by the ODE integrator.
    pub fn step(self, game: &GameParams, gamma: &GammaOffsets, x: Vec2, h: f64, dw: f64) -> Result<Vec2> {
        match self {
            Scheme::EulerMaruyama => step_euler_maruyama(game, gamma, x, h, dw),
            Scheme::Euler2 => step_euler2(game, gamma, x, h, dw),
            Scheme::Euler2Printed => step_euler2_printed(game, gamma, x, h, dw),
            Scheme::OdeRk4 => rk4_step(
                |y| {
                    check_state(y)?;
                    drift(game, y[0], y[1])
                },
                x,
                h,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub step: f64,
    /// Step index `n` of each retained state.
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    pub states: Vec<Vec2>,
    /// Index of the last valid state when the path blew up or hit the
    /// demand singularity.
    pub truncated_at: Option<usize>,
}

impl Trajectory {
    pub fn last(&self) -> Vec2 {
        *self.states.last().expect("trajectory holds at least the initial state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub scheme: Scheme,
    pub step: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub keep_every: usize,
}

/// Iterates `spec.scheme` from `x0` with increments drawn from `spec.seed`.
pub fn simulate(game: &GameParams, gamma: &GammaOffsets, x0: Vec2, spec: &SimulationSpec) -> Result<Trajectory> {
    check_step(spec.step)?;
    let mut stream = WienerStream::new(spec.seed, spec.step);
    run(game, gamma, x0, spec, || stream.next_increment())
}

/// As [`simulate`], driven by a given Wiener path of matching step.
pub fn simulate_on_path(
    game: &GameParams,
    gamma: &GammaOffsets,
    x0: Vec2,
    scheme: Scheme,
    path: &WienerPath,
    keep_every: usize,
) -> Result<Trajectory> {
    let spec = SimulationSpec {
        scheme,
        step: path.step,
        n_steps: path.increments.len(),
        seed: path.seed,
        keep_every,
    };
    let mut it = path.increments.iter().copied();
    run(game, gamma, x0, &spec, || it.next().unwrap_or(0.0))
}

fn run(
    game: &GameParams,
    gamma: &GammaOffsets,
    x0: Vec2,
    spec: &SimulationSpec,
    mut next_dw: impl FnMut() -> f64,
) -> Result<Trajectory> {
    check_step(spec.step)?;
    if spec.keep_every == 0 {
        return Err(Error::param("keep_every", "must be at least 1"));
    }
    if !(x0[0].is_finite() && x0[1].is_finite()) {
        return Err(Error::param("x0", "must be finite"));
    }
    check_state(x0)?;

    let h = spec.step;
    let capacity = spec.n_steps / spec.keep_every + 1;
    let mut traj = Trajectory {
        scheme: spec.scheme,
        step: h,
        indices: Vec::with_capacity(capacity),
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        truncated_at: None,
    };
    traj.indices.push(0);
    traj.times.push(0.0);
    traj.states.push(x0);

    let mut x = x0;
    for n in 1..=spec.n_steps {
        let dw = if spec.scheme.is_stochastic() { next_dw() } else { 0.0 };
        let next = spec.scheme.step(game, gamma, x, h, dw);
        let valid = match next {
            Ok(y) => {
                let finite = y[0].is_finite() && y[1].is_finite();
                if finite && y[0].hypot(y[1]) <= BLOWUP_NORM && check_state(y).is_ok() {
                    x = y;
                    true
                } else {
                    false
                }
            }
            Err(_) => false,
        };
        if !valid {
            traj.truncated_at = Some(n - 1);
            break;
        }
        if n % spec.keep_every == 0 {
            traj.indices.push(n);
            traj.times.push(n as f64 * h);
            traj.states.push(x);
        }
    }
    Ok(traj)
}

/// Euler–Maruyama for the phase `dθ = (q3 - q2 q4) dt + q4 dw` of the
/// linearized system. Calls `visit(θ)` after every step past `burn_in`.
pub fn simulate_phase(
    coeffs: &AngularCoeffs,
    theta0: f64,
    h: f64,
    n_steps: usize,
    burn_in: usize,
    seed: u64,
    mut visit: impl FnMut(f64),
) -> Result<f64> {
    check_step(h)?;
    let mut stream = WienerStream::new(seed, h);
    let mut theta = theta0;
    for n in 0..n_steps {
        let v = coeffs.eval(theta);
        theta += (v.q3 - v.q2 * v.q4) * h + v.q4 * stream.next_increment();
        if n >= burn_in {
            visit(theta);
        }
    }
    Ok(theta)
}

/// Occupation histogram of `θ mod π` in `bins` equal cells, normalized to
/// probabilities.
pub fn phase_histogram(
    coeffs: &AngularCoeffs,
    horizon: f64,
    h: f64,
    burn_in_fraction: f64,
    bins: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::param("bins", "must be at least 1"));
    }
    check_step(h)?;
    let n_steps = (horizon / h).round() as usize;
    let burn = (burn_in_fraction * n_steps as f64).floor() as usize;
    let mut counts = vec![0u64; bins];
    let width = std::f64::consts::PI / bins as f64;
    simulate_phase(coeffs, 0.0, h, n_steps, burn, seed, |theta| {
        let folded = theta.rem_euclid(std::f64::consts::PI);
        let idx = ((folded / width) as usize).min(bins - 1);
        counts[idx] += 1;
    })?;
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::param("horizon", "no samples after burn-in"));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}
