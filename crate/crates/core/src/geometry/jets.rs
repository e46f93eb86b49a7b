//! Pointwise connection and curvature algebra for metrics depending on `r` only.
//!
//! A [`MetricJet`] carries `g`, `∂_r g` and `∂_r² g` at one point. Everything here is exact
//! algebra on the jet; where the jet comes from finite differences the discretization error
//! lives entirely in the jet.

use crate::linalg::{Mat2, Sym2};

pub type Gamma = [[[f64; 2]; 2]; 2];
pub type Riemann = [[[[f64; 2]; 2]; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricJet {
    pub g: Sym2,
    pub d1: Sym2,
    pub d2: Sym2,
}

impl MetricJet {
    pub fn scale(&self, c: f64) -> MetricJet {
        MetricJet { g: self.g.scale(c), d1: self.d1.scale(c), d2: self.d2.scale(c) }
    }
}

/// Christoffel symbols `Γ^k_{ij}` (indexed `[k][i][j]`) and their `r`-derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConnectionJet {
    pub gamma: Gamma,
    pub dgamma: Gamma,
}

/// `g⁻¹` and `∂_r g⁻¹ = −g⁻¹ (∂_r g) g⁻¹`.
pub fn inverse_jet(jet: &MetricJet) -> Option<(Sym2, Sym2)> {
    let inv = jet.g.inverse()?;
    let gi = inv.to_mat();
    let d = gi.mul(&jet.d1.to_mat()).mul(&gi).scale(-1.0);
    Some((inv, Sym2::from_mat_sym(&d)))
}

#[inline]
fn lowered(d: &Sym2, l: usize, i: usize, j: usize) -> f64 {
    // ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij) with only ∂_r nonzero.
    let mut v = 0.0;
    if i == 0 {
        v += d.get(j, l);
    }
    if j == 0 {
        v += d.get(i, l);
    }
    if l == 0 {
        v -= d.get(i, j);
    }
    0.5 * v
}

pub fn connection(jet: &MetricJet) -> Option<ConnectionJet> {
    let (inv, dinv) = inverse_jet(jet)?;
    let mut out = ConnectionJet::default();
    for k in 0..2 {
        for i in 0..2 {
            for j in i..2 {
                let mut g = 0.0;
                let mut dg = 0.0;
                for l in 0..2 {
                    let low = lowered(&jet.d1, l, i, j);
                    let dlow = lowered(&jet.d2, l, i, j);
                    g += inv.get(k, l) * low;
                    dg += dinv.get(k, l) * low + inv.get(k, l) * dlow;
                }
                out.gamma[k][i][j] = g;
                out.gamma[k][j][i] = g;
                out.dgamma[k][i][j] = dg;
                out.dgamma[k][j][i] = dg;
            }
        }
    }
    Some(out)
}

/// `R^l_{ijk} = ∂_i Γ^l_{jk} − ∂_j Γ^l_{ik} + Γ^l_{im} Γ^m_{jk} − Γ^l_{jm} Γ^m_{ik}`,
/// indexed `[l][i][j][k]`.
pub fn riemann(c: &ConnectionJet) -> Riemann {
    let g = &c.gamma;
    let dg = &c.dgamma;
    let mut out = [[[[0.0; 2]; 2]; 2]; 2];
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut v = 0.0;
                    if i == 0 {
                        v += dg[l][j][k];
                    }
                    if j == 0 {
                        v -= dg[l][i][k];
                    }
                    for m in 0..2 {
                        v += g[l][i][m] * g[m][j][k] - g[l][j][m] * g[m][i][k];
                    }
                    out[l][i][j][k] = v;
                }
            }
        }
    }
    out
}

/// `Ric_{jk} = R^i_{ijk}`, symmetrized.
pub fn ricci(c: &ConnectionJet) -> Sym2 {
    let rm = riemann(c);
    let mut m = Mat2::default();
    for j in 0..2 {
        for k in 0..2 {
            m.0[j][k] = rm[0][0][j][k] + rm[1][1][j][k];
        }
    }
    Sym2::from_mat_sym(&m)
}

pub fn scalar_curvature(jet: &MetricJet, c: &ConnectionJet) -> Option<f64> {
    let inv = jet.g.inverse()?;
    let ric = ricci(c);
    Some(inv.xx * ric.xx + 2.0 * inv.xy * ric.xy + inv.yy * ric.yy)
}

/// Lower-triangular Cholesky factor of an SPD 2x2 matrix and its `r`-derivative.
pub fn cholesky_jet(g: &Sym2, d: &Sym2) -> Option<(Mat2, Mat2)> {
    if !(g.xx > 0.0) {
        return None;
    }
    let l11 = g.xx.sqrt();
    let l21 = g.xy / l11;
    let s = g.yy - l21 * l21;
    if !(s > 0.0) {
        return None;
    }
    let l22 = s.sqrt();
    let dl11 = d.xx / (2.0 * l11);
    let dl21 = (d.xy - l21 * dl11) / l11;
    let dl22 = (d.yy - 2.0 * l21 * dl21) / (2.0 * l22);
    Some((Mat2([[l11, 0.0], [l21, l22]]), Mat2([[dl11, 0.0], [dl21, dl22]])))
}

/// Orthonormal frame `E = L^{-T}` (so `Eᵀ g E = I`), its inverse, and `∂_r E`.
pub fn frame_jet(g: &Sym2, d: &Sym2) -> Option<(Mat2, Mat2, Mat2)> {
    let (l, dl) = cholesky_jet(g, d)?;
    let lt = l.transpose();
    let e = lt.inverse()?;
    let de = e.mul(&dl.transpose()).mul(&e).scale(-1.0);
    Some((e, lt, de))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar_jet(r: f64, beta: f64) -> MetricJet {
        let b2 = beta * beta;
        MetricJet { g: Sym2::diag(1.0, b2 * r * r), d1: Sym2::diag(0.0, 2.0 * b2 * r), d2: Sym2::diag(0.0, 2.0 * b2) }
    }

    #[test]
    fn polar_christoffels() {
        let r = 1.7;
        let c = connection(&polar_jet(r, 1.0)).unwrap();
        assert!((c.gamma[0][1][1] + r).abs() < 1e-14);
        assert!((c.gamma[1][0][1] - 1.0 / r).abs() < 1e-14);
        assert!((c.gamma[1][1][0] - 1.0 / r).abs() < 1e-14);
        assert_eq!(c.gamma[0][0][0], 0.0);
        assert_eq!(c.gamma[1][1][1], 0.0);
        assert_eq!(c.gamma[0][0][1], 0.0);
        assert!((c.dgamma[1][0][1] + 1.0 / (r * r)).abs() < 1e-14);
    }

    #[test]
    fn cone_is_flat() {
        let c = connection(&polar_jet(0.3, 0.5)).unwrap();
        let rm = riemann(&c);
        for v in rm.iter().flatten().flatten().flatten() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_ricci_equals_metric() {
        let r: f64 = 0.9;
        let (s, c) = (r.sin(), r.cos());
        let jet = MetricJet {
            g: Sym2::diag(1.0, s * s),
            d1: Sym2::diag(0.0, 2.0 * s * c),
            d2: Sym2::diag(0.0, 2.0 * (c * c - s * s)),
        };
        let conn = connection(&jet).unwrap();
        let ric = ricci(&conn);
        assert!((ric.xx - 1.0).abs() < 1e-13);
        assert!((ric.yy - s * s).abs() < 1e-13);
        assert!(ric.xy.abs() < 1e-14);
        assert!((scalar_curvature(&jet, &conn).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn frame_orthonormalizes() {
        let g = Sym2::new(2.0, 0.3, 0.7);
        let d = Sym2::new(0.1, -0.2, 0.4);
        let (e, einv, de) = frame_jet(&g, &d).unwrap();
        let id = g.congruence(&e);
        assert!((id.xx - 1.0).abs() < 1e-14 && id.xy.abs() < 1e-14 && (id.yy - 1.0).abs() < 1e-14);
        let p = e.mul(&einv);
        assert!((p.0[0][0] - 1.0).abs() < 1e-14 && p.0[0][1].abs() < 1e-14);
        // d/dr (Eᵀ g E) = 0
        let dm = de
            .transpose()
            .mul(&g.to_mat())
            .mul(&e)
            .add(&e.transpose().mul(&d.to_mat()).mul(&e))
            .add(&e.transpose().mul(&g.to_mat()).mul(&de));
        for row in dm.0 {
            for v in row {
                assert!(v.abs() < 1e-13);
            }
        }
    }
}
