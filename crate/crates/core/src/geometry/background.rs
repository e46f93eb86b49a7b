use std::sync::Arc;

use serde::Serialize;

use super::jets::{self, MetricJet};
use super::ops;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::linalg::Mat2;
use crate::tensor::{flat_index, MetricField, TensorField, Valence};

/// Orthonormal frame of the background metric at one point, with its connection
/// coefficients `ω_a = E⁻¹(∂_a E + Γ̃_a E)` for `a = r, θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e: Mat2,
    pub e_inv: Mat2,
    pub omega: [Mat2; 2],
}

/// Curvature hypotheses realized by a background on its working annulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureBounds {
    /// `sup |R̃m|²`.
    pub k0: f64,
    /// `c_s = sup |∇̃^s R̃m|` for `s = 0, 1, 2`.
    pub c: [f64; 3],
    /// `sup ρ^s |∇̃^s R̃m|` for `s = 0, 1, 2`; absent on complete backgrounds.
    pub weighted: Option<[f64; 3]>,
}

/// Fixed reference metric `g̃` with its connection, curvature and distance data.
#[derive(Debug, Clone)]
pub struct BackgroundGeometry {
    grid: Arc<RadialGrid>,
    metric: MetricField,
    jets: Vec<MetricJet>,
    christoffel: TensorField,
    christoffel_dr: TensorField,
    riemann: TensorField,
    frames: Vec<Frame>,
    rho: Vec<f64>,
    bounds: CurvatureBounds,
}

impl BackgroundGeometry {
    /// Build from per-point metric jets (value, first and second `r`-derivatives).
    ///
    /// Connection and curvature are evaluated algebraically from the jets, so analytic
    /// jets give analytic `Γ̃` and `R̃m`. `rho` is the distance to the singular point,
    /// `f64::INFINITY` on complete backgrounds.
    pub fn from_jets(grid: Arc<RadialGrid>, jets: Vec<MetricJet>, rho: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if jets.len() != n || rho.len() != n {
            return Err(Error::Shape("background data length differs from grid".into()));
        }
        let metric = MetricField::new(grid.clone(), jets.iter().map(|j| j.g).collect())?;
        if rho.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument("distance to singularity must be positive".into()));
        }

        let mut gamma = TensorField::zeros(grid.clone(), Valence::new(1, 2));
        let mut dgamma = TensorField::zeros(grid.clone(), Valence::new(1, 2));
        let mut riemann = TensorField::zeros(grid.clone(), Valence::new(1, 3));
        let mut frames = Vec::with_capacity(n);
        for (i, jet) in jets.iter().enumerate() {
            let conn = jets::connection(jet).ok_or(Error::NotPositiveDefinite { index: i, eigenvalue: 0.0 })?;
            let rm = jets::riemann(&conn);
            {
                let g = gamma.at_mut(i);
                for k in 0..2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            g[flat_index(&[k, a, b])] = conn.gamma[k][a][b];
                        }
                    }
                }
            }
            {
                let g = dgamma.at_mut(i);
                for k in 0..2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            g[flat_index(&[k, a, b])] = conn.dgamma[k][a][b];
                        }
                    }
                }
            }
            {
                let out = riemann.at_mut(i);
                for l in 0..2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            for c in 0..2 {
                                out[flat_index(&[l, a, b, c])] = rm[l][a][b][c];
                            }
                        }
                    }
                }
            }
            let (e, e_inv, de) =
                jets::frame_jet(&jet.g, &jet.d1).ok_or(Error::NotPositiveDefinite { index: i, eigenvalue: 0.0 })?;
            let mut omega = [Mat2::default(); 2];
            for (a, om) in omega.iter_mut().enumerate() {
                let mut ga = Mat2::default();
                for k in 0..2 {
                    for m in 0..2 {
                        ga.0[k][m] = conn.gamma[k][a][m];
                    }
                }
                let de_a = if a == 0 { de } else { Mat2::default() };
                *om = e_inv.mul(&de_a.add(&ga.mul(&e)));
            }
            frames.push(Frame { e, e_inv, omega });
        }

        let mut bg = BackgroundGeometry {
            grid,
            metric,
            jets,
            christoffel: gamma,
            christoffel_dr: dgamma,
            riemann,
            frames,
            rho,
            bounds: CurvatureBounds { k0: 0.0, c: [0.0; 3], weighted: None },
        };
        bg.bounds = bg.compute_bounds()?;
        Ok(bg)
    }

    fn compute_bounds(&self) -> Result<CurvatureBounds> {
        let mut c = [0.0; 3];
        let mut weighted = [0.0; 3];
        let complete = self.is_complete();
        let mut t = self.riemann.clone();
        for s in 0..3 {
            if s > 0 {
                t = ops::covariant_derivative(&t, self, 1)?;
            }
            let norms = ops::background_norm(&t, self)?;
            c[s] = norms.iter().cloned().fold(0.0, f64::max);
            if !complete {
                weighted[s] = norms.iter().zip(&self.rho).map(|(v, r)| v * r.powi(s as i32)).fold(0.0, f64::max);
            }
        }
        Ok(CurvatureBounds { k0: c[0] * c[0], c, weighted: if complete { None } else { Some(weighted) } })
    }

    /// Background restricted to grid indices `[start, end)`.
    ///
    /// The hypothesis bounds of the parent are kept: a sup over the parent annulus
    /// bounds the restriction too.
    pub fn restrict(&self, start: usize, end: usize) -> Result<Self> {
        let grid = Arc::new(self.grid.slice(start, end)?);
        let slice_tensor = |t: &TensorField| {
            let nc = t.valence().components();
            TensorField::new(grid.clone(), t.valence(), t.data()[start * nc..end * nc].to_vec())
        };
        Ok(BackgroundGeometry {
            metric: MetricField::new_unchecked(grid.clone(), self.metric.comps()[start..end].to_vec())?,
            jets: self.jets[start..end].to_vec(),
            christoffel: slice_tensor(&self.christoffel)?,
            christoffel_dr: slice_tensor(&self.christoffel_dr)?,
            riemann: slice_tensor(&self.riemann)?,
            frames: self.frames[start..end].to_vec(),
            rho: self.rho[start..end].to_vec(),
            bounds: self.bounds.clone(),
            grid,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    #[inline]
    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    #[inline]
    pub fn jets(&self) -> &[MetricJet] {
        &self.jets
    }

    #[inline]
    pub fn christoffel(&self) -> &TensorField {
        &self.christoffel
    }

    /// `∂_r Γ̃`, same layout as [`Self::christoffel`].
    #[inline]
    pub fn christoffel_dr(&self) -> &TensorField {
        &self.christoffel_dr
    }

    #[inline]
    pub fn riemann(&self) -> &TensorField {
        &self.riemann
    }

    #[inline]
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    #[inline]
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn bounds(&self) -> &CurvatureBounds {
        &self.bounds
    }

    pub fn k0(&self) -> f64 {
        self.bounds.k0
    }

    pub fn is_complete(&self) -> bool {
        self.rho.iter().all(|r| r.is_infinite())
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}
