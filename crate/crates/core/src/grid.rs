//! Radial grids and their finite-difference stencils.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of radial points accepted by [`RadialGrid`].
pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    LogUniform,
}

/// Finite-difference weights for one output point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub start: usize,
    pub len: usize,
    pub w: [f64; 4],
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len {
            acc += self.w[k] * values[self.start + k];
        }
        acc
    }

    /// Apply to component `offset` of an interleaved array with `stride` entries per point.
    #[inline]
    pub fn apply_strided(&self, data: &[f64], stride: usize, offset: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len {
            acc += self.w[k] * data[(self.start + k) * stride + offset];
        }
        acc
    }
}

/// Discretized radial chart `r_0 < r_1 < … < r_{N-1}` of a rotationally symmetric surface.
///
/// First derivatives use three-point stencils (centered in the interior, one-sided at the
/// two ends); second derivatives use the compact three-point stencil in the interior and a
/// four-point one-sided stencil at the ends. All are exact for quadratics.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r: Vec<f64>,
    spacing: Spacing,
    d1: Vec<Stencil>,
    d2: Vec<Stencil>,
}

impl RadialGrid {
    pub fn uniform(inner: f64, outer: f64, points: usize) -> Result<Self> {
        check_bounds(inner, outer, points)?;
        let h = (outer - inner) / (points - 1) as f64;
        let mut r: Vec<f64> = (0..points).map(|i| inner + h * i as f64).collect();
        r[points - 1] = outer;
        Self::from_radii(r, Spacing::Uniform)
    }

    pub fn log_uniform(inner: f64, outer: f64, points: usize) -> Result<Self> {
        check_bounds(inner, outer, points)?;
        let step = (outer / inner).ln() / (points - 1) as f64;
        let mut r: Vec<f64> = (0..points).map(|i| inner * (step * i as f64).exp()).collect();
        r[0] = inner;
        r[points - 1] = outer;
        Self::from_radii(r, Spacing::LogUniform)
    }

    pub fn new(spacing: Spacing, inner: f64, outer: f64, points: usize) -> Result<Self> {
        match spacing {
            Spacing::Uniform => Self::uniform(inner, outer, points),
            Spacing::LogUniform => Self::log_uniform(inner, outer, points),
        }
    }

    /// Validate explicit radii against the declared spacing mode.
    pub fn from_radii(r: Vec<f64>, spacing: Spacing) -> Result<Self> {
        let n = r.len();
        if n < MIN_POINTS {
            return Err(Error::Grid(format!("need at least {MIN_POINTS} points, got {n}")));
        }
        if !(r[0] > 0.0) || !r.iter().all(|x| x.is_finite()) {
            return Err(Error::Grid("radii must be finite and positive".into()));
        }
        if let Some(i) = (1..n).find(|&i| r[i] <= r[i - 1]) {
            return Err(Error::Grid(format!("radii not strictly increasing at index {i}")));
        }
        match spacing {
            Spacing::Uniform => {
                let h0 = r[1] - r[0];
                let scale = r[n - 1];
                if let Some(i) = (1..n).find(|&i| ((r[i] - r[i - 1]) - h0).abs() > 1e-9 * scale) {
                    return Err(Error::Grid(format!("uniform spacing broken at index {i}")));
                }
            }
            Spacing::LogUniform => {
                let q0 = r[1] / r[0];
                if let Some(i) = (1..n).find(|&i| ((r[i] / r[i - 1]) / q0 - 1.0).abs() > 1e-12) {
                    return Err(Error::Grid(format!("log-uniform ratio broken at index {i}")));
                }
            }
        }
        let d1 = (0..n).map(|i| build_stencil(&r, i, 1)).collect();
        let d2 = (0..n).map(|i| build_stencil(&r, i, 2)).collect();
        Ok(RadialGrid { r, spacing, d1, d2 })
    }

    /// Contiguous sub-grid `[start, end)`; radii are copied bitwise.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Grid(format!("bad slice {start}..{end} of {}", self.len())));
        }
        Self::from_radii(self.r[start..end].to_vec(), self.spacing)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    #[inline]
    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn inner_radius(&self) -> f64 {
        self.r[0]
    }

    pub fn outer_radius(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.r.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn d1_stencils(&self) -> &[Stencil] {
        &self.d1
    }

    #[inline]
    pub fn d2_stencils(&self) -> &[Stencil] {
        &self.d2
    }

    pub fn d1(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        self.d1.iter().map(|s| s.apply(values)).collect()
    }

    pub fn d2(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        self.d2.iter().map(|s| s.apply(values)).collect()
    }
}

fn check_bounds(inner: f64, outer: f64, points: usize) -> Result<()> {
    if !(inner > 0.0) || !(outer > inner) || !outer.is_finite() {
        return Err(Error::Grid(format!("need 0 < inner < outer, got inner = {inner}, outer = {outer}")));
    }
    if points < MIN_POINTS {
        return Err(Error::Grid(format!("need at least {MIN_POINTS} points, got {points}")));
    }
    Ok(())
}

fn build_stencil(r: &[f64], i: usize, order: usize) -> Stencil {
    let n = r.len();
    let len = if order == 1 {
        3
    } else if i == 0 || i == n - 1 {
        4
    } else {
        3
    };
    let start = if i == 0 {
        0
    } else if i == n - 1 {
        n - len
    } else {
        i - 1
    };
    let w = fornberg_weights(r[i], &r[start..start + len], order);
    let mut arr = [0.0; 4];
    arr[..len].copy_from_slice(&w);
    Stencil { start, len, w: arr }
}

/// Finite-difference weights for the `order`-th derivative at `x0` from nodes `xs`
/// (Fornberg's recursion).
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let m = order;
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}
