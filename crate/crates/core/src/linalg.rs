//! Fixed-size 2x2 algebra used pointwise by the tensor machinery.

use serde::{Deserialize, Serialize};

/// Symmetric 2x2 matrix, stored once: `[[xx, xy], [xy, yy]]`.
///
/// Index 0 is the radial direction, index 1 the angular one.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, xy: 0.0, yy: 1.0 };
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub const fn diag(xx: f64, yy: f64) -> Self {
        Sym2 { xx, xy: 0.0, yy }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }

    #[inline]
    pub fn to_mat(self) -> Mat2 {
        Mat2([[self.xx, self.xy], [self.xy, self.yy]])
    }

    /// Symmetric part of a general matrix.
    pub fn from_mat_sym(m: &Mat2) -> Self {
        Sym2 { xx: m.0[0][0], xy: 0.5 * (m.0[0][1] + m.0[1][0]), yy: m.0[1][1] }
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    #[inline]
    pub fn scale(&self, c: f64) -> Sym2 {
        Sym2::new(c * self.xx, c * self.xy, c * self.yy)
    }

    #[inline]
    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    #[inline]
    pub fn axpy(&self, c: f64, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx + c * o.xx, self.xy + c * o.xy, self.yy + c * o.yy)
    }

    #[inline]
    pub fn sub(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Sym2::new(self.yy / d, -self.xy / d, self.xx / d))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.xx + self.yy);
        let rad = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        let hi = mean + rad;
        // det / hi keeps the small eigenvalue accurate when the two are far apart.
        let lo = if hi > 0.0 && mean > 0.0 { self.det() / hi } else { mean - rad };
        [lo, hi]
    }

    /// `Eᵀ S E`.
    pub fn congruence(&self, e: &Mat2) -> Sym2 {
        let s = self.to_mat();
        let m = e.transpose().mul(&s).mul(e);
        Sym2::from_mat_sym(&m)
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.xx.abs().max(self.xy.abs()).max(self.yy.abs())
    }
}

/// General 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    #[inline]
    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }

    #[inline]
    pub fn transpose(&self) -> Mat2 {
        let a = &self.0;
        Mat2([[a[0][0], a[1][0]], [a[0][1], a[1][1]]])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let a = &self.0;
        Some(Mat2([[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]))
    }

    #[inline]
    pub fn add(&self, o: &Mat2) -> Mat2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += o.0[i][j];
            }
        }
        out
    }

    #[inline]
    pub fn scale(&self, c: f64) -> Mat2 {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        out
    }
}
