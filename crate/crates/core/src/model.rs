//! The Cournot duopoly game with inverse demand `p(x) = 1/x` and linear costs.
//!
//! Each firm adjusts its output at rate `k_i` toward the marginal-profit zero:
//!
//! ```text
//! dx1 = k1 (x2/(x1+x2)^2 - c1) dt + (b11 x1 + b12 x2 + γ1) dw
//! dx2 = k2 (x1/(x1+x2)^2 - c2) dt + (b21 x1 + b22 x2 + γ2) dw
//! ```
//!
//! The offsets `γ_i` are chosen so that the noise vanishes at the stationary
//! state, which makes the stationary state a fixed point of the SDE.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2};

/// Game constants plus the diffusion matrix `b` (row-major, `b[i][j] = b_{i+1,j+1}`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub k2: f64,
    pub b: Mat2,
}

impl GameParams {
    pub fn new(c1: f64, c2: f64, k1: f64, k2: f64, b: Mat2) -> Result<Self> {
        let params = GameParams { c1, c2, k1, k2, b };
        params.validate()?;
        Ok(params)
    }

    /// Game with rotation-scaling diffusion `b = [[alpha, -beta], [beta, alpha]]`.
    pub fn with_rotation(c1: f64, c2: f64, k1: f64, k2: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(c1, c2, k1, k2, rotation_scaling(alpha, beta))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("k1", self.k1), ("k2", self.k2)] {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
            if v <= 0.0 {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        for (i, row) in self.b.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::param(
                        B_NAMES[i][j],
                        format!("must be finite, got {v}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Copy with the diffusion matrix replaced.
    pub fn with_b(&self, b: Mat2) -> Self {
        GameParams { b, ..*self }
    }

    fn cost_sum(&self) -> f64 {
        self.c1 + self.c2
    }
}

const B_NAMES: [[&str; 2]; 2] = [["b11", "b12"], ["b21", "b22"]];

/// `[[alpha, -beta], [beta, alpha]]`
pub fn rotation_scaling(alpha: f64, beta: f64) -> Mat2 {
    [[alpha, -beta], [beta, alpha]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryState {
    pub x10: f64,
    pub x20: f64,
}

impl StationaryState {
    pub fn as_vec(&self) -> Vec2 {
        [self.x10, self.x20]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOffsets {
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Planar linear SDE `dX = A X dt + B X dw` driven by a single Wiener process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSde2 {
    pub a: Mat2,
    pub b: Mat2,
}

impl LinearSde2 {
    pub fn new(a: Mat2, b: Mat2) -> Self {
        LinearSde2 { a, b }
    }

    pub fn is_finite(&self) -> bool {
        self.a
            .iter()
            .chain(self.b.iter())
            .flatten()
            .all(|v| v.is_finite())
    }
}

/// Drift `(k1 f1, k2 f2)` of the game SDE at `(x1, x2)`.
pub fn drift(params: &GameParams, x1: f64, x2: f64) -> Result<Vec2> {
    let s = x1 + x2;
    if s == 0.0 {
        return Err(Error::DegenerateInput { sum: s });
    }
    let inv_s2 = 1.0 / (s * s);
    Ok([
        params.k1 * (x2 * inv_s2 - params.c1),
        params.k2 * (x1 * inv_s2 - params.c2),
    ])
}

/// Diffusion `(g1, g2)` of the game SDE at `(x1, x2)`.
pub fn diffusion(params: &GameParams, gamma: &GammaOffsets, x1: f64, x2: f64) -> Vec2 {
    let b = &params.b;
    [
        b[0][0] * x1 + b[0][1] * x2 + gamma.gamma1,
        b[1][0] * x1 + b[1][1] * x2 + gamma.gamma2,
    ]
}

pub fn stationary_state(params: &GameParams) -> StationaryState {
    let s2 = params.cost_sum().powi(2);
    StationaryState {
        x10: params.c2 / s2,
        x20: params.c1 / s2,
    }
}

pub fn gamma_offsets(params: &GameParams) -> GammaOffsets {
    let s2 = params.cost_sum().powi(2);
    let b = &params.b;
    GammaOffsets {
        gamma1: -(b[0][0] * params.c2 + b[0][1] * params.c1) / s2,
        gamma2: -(b[1][0] * params.c2 + b[1][1] * params.c1) / s2,
    }
}

/// Linearization of the game SDE at its stationary state.
pub fn linearize(params: &GameParams) -> LinearSde2 {
    let GameParams { c1, c2, k1, k2, b } = *params;
    let s = c1 + c2;
    let d = c1 * c1 - c2 * c2;
    LinearSde2 {
        a: [
            [-2.0 * k1 * c1 * s, -k1 * d],
            [k2 * d, -2.0 * k2 * c2 * s],
        ],
        b,
    }
}

/// Roots of `mu^2 - tr(A) mu + det(A) = 0`, the first having the larger real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicRoots {
    pub mu1: Complex64,
    pub mu2: Complex64,
    pub roots_complex: bool,
}

impl CharacteristicRoots {
    pub fn half_trace(&self) -> f64 {
        0.5 * (self.mu1 + self.mu2).re
    }

    pub fn max_real_part(&self) -> f64 {
        self.mu1.re
    }
}

pub fn characteristic_roots(sys: &LinearSde2) -> CharacteristicRoots {
    let half_tr = 0.5 * linalg::trace(&sys.a);
    let det = linalg::det(&sys.a);
    let disc = half_tr * half_tr - det;
    let (r1, r2, complex) = if disc >= 0.0 {
        // avoid cancellation: take the root of larger magnitude first
        let sq = disc.sqrt();
        let big = if half_tr >= 0.0 { half_tr + sq } else { half_tr - sq };
        let small = if big != 0.0 { det / big } else { 0.0 };
        (Complex64::new(big, 0.0), Complex64::new(small, 0.0), false)
    } else {
        let w = (-disc).sqrt();
        (
            Complex64::new(half_tr, w),
            Complex64::new(half_tr, -w),
            true,
        )
    };
    let first_is_top = r1.re > r2.re || (r1.re == r2.re && r1.im >= r2.im);
    let (mu1, mu2) = if first_is_top { (r1, r2) } else { (r2, r1) };
    CharacteristicRoots {
        mu1,
        mu2,
        roots_complex: complex,
    }
}

/// Closed-form half-trace `-(k1 c1 + k2 c2)(c1 + c2)` of the linearized game.
pub fn game_half_trace(params: &GameParams) -> f64 {
    -(params.k1 * params.c1 + params.k2 * params.c2) * params.cost_sum()
}
