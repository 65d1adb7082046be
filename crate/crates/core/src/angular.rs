//! Amplitude–phase decomposition of the planar linear SDE.
//!
//! Writing `X = r (cos θ, sin θ)` turns `dX = A X dt + B X dw` into
//!
//! ```text
//! d log r = (q1 + (q4^2 - q2^2)/2) dt + q2 dw
//! dθ      = (q3 - q2 q4) dt + q4 dw
//! ```
//!
//! where every `q_j` is a quadratic form in `(cos θ, sin θ)` and hence
//! π-periodic.

use crate::error::{Error, Result};
use crate::model::LinearSde2;

/// Coefficient functions `q1..q5` built from a planar linear SDE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularCoeffs {
    pub source: LinearSde2,
}

/// All coefficients evaluated at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValues {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
    pub q5: f64,
    pub q4_prime: f64,
}

/// Which term closes the stationary Fokker–Planck reduction.
///
/// `Derived` uses `q4 q4'`, the exact reduction of the stationary equation.
/// `Printed` uses `q4 q5` with `q5 = -(b12+b21) sin 2θ - (b22-b11) cos 2θ`,
/// which differs from `q4'` in the sign of the `cos 2θ` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FpeCoefficients {
    #[default]
    Derived,
    Printed,
}

impl AngularCoeffs {
    pub fn new(source: LinearSde2) -> Self {
        AngularCoeffs { source }
    }

    /// `q_j(θ)` for `j` in `1..=5`.
    pub fn q(&self, j: usize, theta: f64) -> Result<f64> {
        let v = self.eval(theta);
        match j {
            1 => Ok(v.q1),
            2 => Ok(v.q2),
            3 => Ok(v.q3),
            4 => Ok(v.q4),
            5 => Ok(v.q5),
            _ => Err(Error::IndexOutOfRange(j)),
        }
    }

    pub fn q4_prime(&self, theta: f64) -> f64 {
        let b = &self.source.b;
        let (s2, c2) = (2.0 * theta).sin_cos();
        -(b[0][1] + b[1][0]) * s2 + (b[1][1] - b[0][0]) * c2
    }

    pub fn eval(&self, theta: f64) -> QValues {
        let (a, b) = (&self.source.a, &self.source.b);
        let (s, c) = theta.sin_cos();
        let (cc, cs, ss) = (c * c, c * s, s * s);
        let (s2, c2) = (2.0 * theta).sin_cos();
        QValues {
            q1: a[0][0] * cc + (a[0][1] + a[1][0]) * cs + a[1][1] * ss,
            q2: b[0][0] * cc + (b[0][1] + b[1][0]) * cs + b[1][1] * ss,
            q3: a[1][0] * cc + (a[1][1] - a[0][0]) * cs - a[0][1] * ss,
            q4: b[1][0] * cc + (b[1][1] - b[0][0]) * cs - b[0][1] * ss,
            q5: -(b[0][1] + b[1][0]) * s2 - (b[1][1] - b[0][0]) * c2,
            q4_prime: -(b[0][1] + b[1][0]) * s2 + (b[1][1] - b[0][0]) * c2,
        }
    }

    /// Drift of the log-amplitude, `q1 + (q4^2 - q2^2)/2`; its stationary mean is λ.
    pub fn log_growth_rate(&self, theta: f64) -> f64 {
        let v = self.eval(theta);
        v.q1 + 0.5 * (v.q4 * v.q4 - v.q2 * v.q2)
    }

    /// Drift of the phase process, `q3 - q2 q4`.
    pub fn phase_drift(&self, theta: f64) -> f64 {
        let v = self.eval(theta);
        v.q3 - v.q2 * v.q4
    }

    /// The `w` in the closing term `q4 w` of the first-order stationary equation.
    pub fn closing_term(&self, theta: f64, mode: FpeCoefficients) -> f64 {
        match mode {
            FpeCoefficients::Derived => self.q4_prime(theta),
            FpeCoefficients::Printed => self.eval(theta).q5,
        }
    }
}

/// `(alpha, beta)` if `b = [[alpha, -beta], [beta, alpha]]` within `1e-12`.
pub fn is_rotation_scaling(sys: &LinearSde2) -> Option<(f64, f64)> {
    const TOL: f64 = 1e-12;
    let b = &sys.b;
    if (b[0][0] - b[1][1]).abs() <= TOL && (b[0][1] + b[1][0]).abs() <= TOL {
        Some((b[0][0], b[1][0]))
    } else {
        None
    }
}
