//! Fixed-size 2x2 helpers used by the linear SDE machinery.

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

#[inline]
pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[inline]
pub fn scale(m: &Mat2, s: f64) -> Mat2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

#[inline]
pub fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

#[inline]
pub fn trace(m: &Mat2) -> f64 {
    m[0][0] + m[1][1]
}

#[inline]
pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[inline]
pub fn norm(v: Vec2) -> f64 {
    v[0].hypot(v[1])
}

/// Matrix exponential of a 2x2 matrix via the Cayley–Hamilton closed form
///
/// `exp(M) = e^{t/2} (c(s) I + sh(s) (M - t/2 I))`, where `t = tr M`,
/// `s^2 = (t/2)^2 - det M`, and `c`, `sh` are `cosh(s)`, `sinh(s)/s` (or their
/// trigonometric counterparts when `s^2 < 0`).
pub fn expm(m: &Mat2) -> Mat2 {
    let half_tr = 0.5 * trace(m);
    let disc = half_tr * half_tr - det(m);
    let (c, sh) = if disc > 0.0 {
        let s = disc.sqrt();
        if s < 1e-8 {
            (1.0 + 0.5 * disc, 1.0 + disc / 6.0)
        } else {
            (s.cosh(), s.sinh() / s)
        }
    } else {
        let w = (-disc).sqrt();
        if w < 1e-8 {
            (1.0 + 0.5 * disc, 1.0 + disc / 6.0)
        } else {
            (w.cos(), w.sin() / w)
        }
    };
    let e = half_tr.exp();
    let shifted = [
        [m[0][0] - half_tr, m[0][1]],
        [m[1][0], m[1][1] - half_tr],
    ];
    [
        [e * (c + sh * shifted[0][0]), e * sh * shifted[0][1]],
        [e * sh * shifted[1][0], e * (c + sh * shifted[1][1])],
    ]
}

/// Bound on the drift rate used for explicit step-size checks: max absolute row sum.
pub fn max_row_sum(m: &Mat2) -> f64 {
    (m[0][0].abs() + m[0][1].abs()).max(m[1][0].abs() + m[1][1].abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expm_series(m: &Mat2) -> Mat2 {
        // scaling and squaring around a 30-term Taylor series
        let mut k = 0;
        let mut norm_m = max_row_sum(m);
        while norm_m > 0.25 {
            norm_m *= 0.5;
            k += 1;
        }
        let ms = scale(m, 0.5f64.powi(k));
        let mut term = IDENTITY;
        let mut sum = IDENTITY;
        for n in 1..30 {
            term = scale(&mat_mul(&term, &ms), 1.0 / n as f64);
            sum = add(&sum, &term);
        }
        for _ in 0..k {
            sum = mat_mul(&sum, &sum);
        }
        sum
    }

    fn assert_close(a: &Mat2, b: &Mat2, tol: f64) {
        for i in 0..2 {
            for j in 0..2 {
                let scale = 1.0 + b[i][j].abs();
                assert!(
                    (a[i][j] - b[i][j]).abs() <= tol * scale,
                    "entry ({i},{j}): {} vs {}",
                    a[i][j],
                    b[i][j]
                );
            }
        }
    }

    #[test]
    fn expm_matches_series_on_all_discriminant_regimes() {
        let cases: [Mat2; 5] = [
            [[-0.176, 0.792], [-1.584, -3.52]],
            [[0.0, -1.0], [1.0, 0.0]],
            [[2.0, 1.0], [0.0, 2.0]],
            [[-4.0, 0.0], [0.0, -4.0]],
            [[0.3, -2.5], [1.7, -0.9]],
        ];
        for m in &cases {
            assert_close(&expm(m), &expm_series(m), 1e-12);
        }
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.7;
        let e = expm(&[[0.0, -t], [t, 0.0]]);
        assert_close(&e, &[[t.cos(), -t.sin()], [t.sin(), t.cos()]], 1e-14);
    }
}
