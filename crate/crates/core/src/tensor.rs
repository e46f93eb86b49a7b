//! Tensor fields sampled on a radial grid.
//!
//! Components are stored per point, contravariant slots first and covariant slots after,
//! in row-major order over the slot indices (index 0 = `r`, index 1 = `θ`). A field of
//! valence `(p, q)` therefore carries `2^(p+q)` numbers per point.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::linalg::{Mat2, Sym2};

/// Manifold dimension handled by the solver.
pub const DIM: usize = 2;

/// Eigenvalue floor below which a metric is declared not positive definite.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Valence {
    pub contra: usize,
    pub cov: usize,
}

impl Valence {
    pub const fn new(contra: usize, cov: usize) -> Self {
        Valence { contra, cov }
    }

    pub const SCALAR: Valence = Valence::new(0, 0);

    #[inline]
    pub fn rank(&self) -> usize {
        self.contra + self.cov
    }

    #[inline]
    pub fn components(&self) -> usize {
        1 << self.rank()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Arc<RadialGrid>,
    valence: Valence,
    data: Vec<f64>,
    edge_depth: usize,
}

impl TensorField {
    pub fn new(grid: Arc<RadialGrid>, valence: Valence, data: Vec<f64>) -> Result<Self> {
        let want = grid.len() * valence.components();
        if data.len() != want {
            return Err(Error::Shape(format!(
                "valence ({}, {}) on {} points needs {want} components, got {}",
                valence.contra,
                valence.cov,
                grid.len(),
                data.len()
            )));
        }
        Ok(TensorField { grid, valence, data, edge_depth: 0 })
    }

    pub fn zeros(grid: Arc<RadialGrid>, valence: Valence) -> Self {
        let data = vec![0.0; grid.len() * valence.components()];
        TensorField { grid, valence, data, edge_depth: 0 }
    }

    /// Build from a per-point closure that fills the component slice.
    pub fn from_fn(grid: Arc<RadialGrid>, valence: Valence, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let nc = valence.components();
        let mut data = vec![0.0; grid.len() * nc];
        for (i, chunk) in data.chunks_mut(nc).enumerate() {
            f(i, chunk);
        }
        TensorField { grid, valence, data, edge_depth: 0 }
    }

    pub fn scalar(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, Valence::SCALAR, values)
    }

    #[inline]
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    #[inline]
    pub fn valence(&self) -> Valence {
        self.valence
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn points(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn at(&self, i: usize) -> &[f64] {
        let nc = self.valence.components();
        &self.data[i * nc..(i + 1) * nc]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize) -> &mut [f64] {
        let nc = self.valence.components();
        &mut self.data[i * nc..(i + 1) * nc]
    }

    /// Component at point `i` with slot indices `idx` (contravariant first).
    pub fn component(&self, i: usize, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.valence.rank());
        self.at(i)[flat_index(idx)]
    }

    /// Number of points at each grid end whose values involve one-sided stencils.
    pub fn edge_depth(&self) -> usize {
        self.edge_depth
    }

    pub(crate) fn with_edge_depth(mut self, depth: usize) -> Self {
        self.edge_depth = depth;
        self
    }

    /// Indices unaffected by one-sided stencils.
    pub fn interior(&self) -> std::ops::Range<usize> {
        let n = self.points();
        let d = self.edge_depth.min(n / 2);
        d..n - d
    }

    pub fn scale(&self, c: f64) -> TensorField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &TensorField, f: impl Fn(f64, f64) -> f64) -> Result<TensorField> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(TensorField {
            grid: self.grid.clone(),
            valence: self.valence,
            data,
            edge_depth: self.edge_depth.max(other.edge_depth),
        })
    }

    pub fn check_compatible(&self, other: &TensorField) -> Result<()> {
        if self.valence != other.valence {
            return Err(Error::Shape("valence mismatch".into()));
        }
        same_grid(&self.grid, &other.grid)
    }

    /// Largest absolute component over the given point range.
    pub fn max_abs_over(&self, range: std::ops::Range<usize>) -> f64 {
        let nc = self.valence.components();
        self.data[range.start * nc..range.end * nc].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_over(0..self.points())
    }
}

pub(crate) fn same_grid(a: &Arc<RadialGrid>, b: &Arc<RadialGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.radii() == b.radii() {
        Ok(())
    } else {
        Err(Error::Shape("fields live on different grids".into()))
    }
}

#[inline]
pub fn flat_index(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &k| (acc << 1) | k)
}

/// Apply `new_a = Σ_i m[a][i] old_i` on one slot of a per-point component array.
pub fn apply_slot(comps: &mut [f64], rank: usize, slot: usize, m: &Mat2) {
    let stride = 1 << (rank - 1 - slot);
    let n = comps.len();
    let mut base = 0;
    while base < n {
        for off in 0..stride {
            let i0 = base + off;
            let i1 = i0 + stride;
            let x0 = comps[i0];
            let x1 = comps[i1];
            comps[i0] = m.0[0][0] * x0 + m.0[0][1] * x1;
            comps[i1] = m.0[1][0] * x0 + m.0[1][1] * x1;
        }
        base += 2 * stride;
    }
}

/// Coordinate components → components in the frame `e_a = E[:, a]`.
pub fn to_frame(comps: &mut [f64], valence: Valence, e: &Mat2, e_inv: &Mat2) {
    let rank = valence.rank();
    let et = e.transpose();
    for s in 0..rank {
        let m = if s < valence.contra { e_inv } else { &et };
        apply_slot(comps, rank, s, m);
    }
}

/// Frame components → coordinate components (inverse of [`to_frame`]).
pub fn from_frame(comps: &mut [f64], valence: Valence, e: &Mat2, e_inv: &Mat2) {
    let rank = valence.rank();
    let eit = e_inv.transpose();
    for s in 0..rank {
        let m = if s < valence.contra { e } else { &eit };
        apply_slot(comps, rank, s, m);
    }
}

/// Symmetric 2-tensor sampled on the grid; the evolving unknown of the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    grid: Arc<RadialGrid>,
    comps: Vec<Sym2>,
}

impl MetricField {
    /// Validated constructor: every point must clear [`EIGEN_FLOOR`].
    pub fn new(grid: Arc<RadialGrid>, comps: Vec<Sym2>) -> Result<Self> {
        let m = Self::new_unchecked(grid, comps)?;
        m.check_spd()?;
        Ok(m)
    }

    /// Shape-checked only; used for intermediate stages of a time step.
    pub fn new_unchecked(grid: Arc<RadialGrid>, comps: Vec<Sym2>) -> Result<Self> {
        if comps.len() != grid.len() {
            return Err(Error::Shape(format!("metric has {} points, grid has {}", comps.len(), grid.len())));
        }
        Ok(MetricField { grid, comps })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> Sym2) -> Result<Self> {
        let comps = grid.radii().iter().map(|&r| f(r)).collect();
        Self::new(grid, comps)
    }

    pub fn check_spd(&self) -> Result<()> {
        for (i, g) in self.comps.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::NotPositiveDefinite { index: i, eigenvalue: f64::NAN });
            }
            let lo = g.eigenvalues()[0];
            if !(lo > EIGEN_FLOOR) {
                return Err(Error::NotPositiveDefinite { index: i, eigenvalue: lo });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    #[inline]
    pub fn comps(&self) -> &[Sym2] {
        &self.comps
    }

    #[inline]
    pub fn comps_mut(&mut self) -> &mut [Sym2] {
        &mut self.comps
    }

    #[inline]
    pub fn at(&self, i: usize) -> Sym2 {
        self.comps[i]
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn scale(&self, c: f64) -> MetricField {
        MetricField { grid: self.grid.clone(), comps: self.comps.iter().map(|g| g.scale(c)).collect() }
    }

    pub fn to_tensor(&self) -> TensorField {
        TensorField::from_fn(self.grid.clone(), Valence::new(0, 2), |i, c| {
            let g = self.comps[i];
            c.copy_from_slice(&[g.xx, g.xy, g.xy, g.yy]);
        })
    }

    /// Symmetric part of a `(0, 2)` tensor field, validated as a metric.
    pub fn from_tensor(t: &TensorField) -> Result<Self> {
        if t.valence() != Valence::new(0, 2) {
            return Err(Error::Shape("metric needs valence (0, 2)".into()));
        }
        let comps = (0..t.points())
            .map(|i| {
                let c = t.at(i);
                Sym2::new(c[0], 0.5 * (c[1] + c[2]), c[3])
            })
            .collect();
        Self::new(t.grid().clone(), comps)
    }

    /// Sup over points of the largest absolute component difference.
    pub fn max_abs_diff(&self, other: &MetricField) -> f64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| a.sub(b).max_abs()).fold(0.0, f64::max)
    }
}
