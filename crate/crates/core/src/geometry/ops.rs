//! Background-covariant tensor calculus on a rotationally symmetric surface.

use super::background::BackgroundGeometry;
use super::jets::{self, MetricJet};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Sym2};
use crate::tensor::{apply_slot, flat_index, from_frame, same_grid, to_frame, MetricField, TensorField, Valence};

/// Finite-difference jets `(g, ∂_r g, ∂_r² g)` of every component of `g`.
pub fn metric_jets(g: &MetricField) -> Vec<MetricJet> {
    let grid = g.grid();
    let comps = g.comps();
    let flat: Vec<f64> = comps.iter().flat_map(|s| [s.xx, s.xy, s.yy]).collect();
    grid.d1_stencils()
        .iter()
        .zip(grid.d2_stencils())
        .zip(comps)
        .map(|((s1, s2), v)| {
            let d = |s: &crate::grid::Stencil, c| s.apply_strided(&flat, 3, c);
            MetricJet {
                g: *v,
                d1: Sym2::new(d(s1, 0), d(s1, 1), d(s1, 2)),
                d2: Sym2::new(d(s2, 0), d(s2, 1), d(s2, 2)),
            }
        })
        .collect()
}

fn connections(g: &MetricField) -> Result<Vec<jets::ConnectionJet>> {
    g.check_spd()?;
    metric_jets(g)
        .iter()
        .enumerate()
        .map(|(i, j)| jets::connection(j).ok_or(Error::NotPositiveDefinite { index: i, eigenvalue: 0.0 }))
        .collect()
}

/// Christoffel symbols `Γ^k_{ij}` of `g` from finite differences of its components.
pub fn christoffel(g: &MetricField) -> Result<TensorField> {
    let conn = connections(g)?;
    Ok(TensorField::from_fn(g.grid().clone(), Valence::new(1, 2), |i, c| {
        for k in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    c[flat_index(&[k, a, b])] = conn[i].gamma[k][a][b];
                }
            }
        }
    })
    .with_edge_depth(1))
}

/// Riemann tensor `R^l_{ijk}` of `g` (valence `(1, 3)`).
pub fn riemann(g: &MetricField) -> Result<TensorField> {
    let conn = connections(g)?;
    Ok(TensorField::from_fn(g.grid().clone(), Valence::new(1, 3), |i, c| {
        let rm = jets::riemann(&conn[i]);
        for l in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    for d in 0..2 {
                        c[flat_index(&[l, a, b, d])] = rm[l][a][b][d];
                    }
                }
            }
        }
    })
    .with_edge_depth(1))
}

pub fn ricci(g: &MetricField) -> Result<TensorField> {
    let conn = connections(g)?;
    Ok(TensorField::from_fn(g.grid().clone(), Valence::new(0, 2), |i, c| {
        let r = jets::ricci(&conn[i]);
        c.copy_from_slice(&[r.xx, r.xy, r.xy, r.yy]);
    })
    .with_edge_depth(1))
}

pub fn scalar_curvature(g: &MetricField) -> Result<Vec<f64>> {
    let conn = connections(g)?;
    let jets = metric_jets(g);
    Ok(jets.iter().zip(&conn).map(|(j, c)| jets::scalar_curvature(j, c).unwrap_or(f64::NAN)).collect())
}

fn check_background(t: &TensorField, bg: &BackgroundGeometry) -> Result<()> {
    same_grid(t.grid(), bg.grid())
}

/// `m`-fold covariant derivative with respect to the background connection.
///
/// Each application appends one covariant slot (the derivative index goes last).
/// Derivatives are taken of the components in the orthonormal frame of `g̃`; the
/// frame connection supplies the `Γ̃` correction terms.
pub fn covariant_derivative(t: &TensorField, bg: &BackgroundGeometry, m: usize) -> Result<TensorField> {
    if m == 0 {
        return Err(Error::InvalidArgument("derivative order must be at least 1".into()));
    }
    check_background(t, bg)?;
    let mut cur = nabla_once(t, bg);
    for _ in 1..m {
        cur = nabla_once(&cur, bg);
    }
    Ok(cur)
}

fn nabla_once(t: &TensorField, bg: &BackgroundGeometry) -> TensorField {
    let v = t.valence();
    let nc = v.components();
    let rank = v.rank();
    let frames = bg.frames();
    let n = t.points();

    let mut hat = t.data().to_vec();
    for (i, f) in frames.iter().enumerate() {
        to_frame(&mut hat[i * nc..(i + 1) * nc], v, &f.e, &f.e_inv);
    }

    let out_v = Valence::new(v.contra, v.cov + 1);
    let mut out = vec![0.0; n * nc * 2];
    let stencils = bg.grid().d1_stencils();
    let mut da = [vec![0.0; nc], vec![0.0; nc]];
    let mut tmp = vec![0.0; nc];
    for i in 0..n {
        let f = &frames[i];
        let here = &hat[i * nc..(i + 1) * nc];
        for c in 0..nc {
            da[0][c] = stencils[i].apply_strided(&hat, nc, c);
            da[1][c] = 0.0;
        }
        for (a, d) in da.iter_mut().enumerate() {
            let om = &f.omega[a];
            let omt = om.transpose();
            for s in 0..rank {
                tmp.copy_from_slice(here);
                if s < v.contra {
                    apply_slot(&mut tmp, rank, s, om);
                    d.iter_mut().zip(&tmp).for_each(|(x, y)| *x += y);
                } else {
                    apply_slot(&mut tmp, rank, s, &omt);
                    d.iter_mut().zip(&tmp).for_each(|(x, y)| *x -= y);
                }
            }
        }
        let o = &mut out[i * nc * 2..(i + 1) * nc * 2];
        for c in 0..nc {
            for dslot in 0..2 {
                o[c * 2 + dslot] = f.e.0[0][dslot] * da[0][c] + f.e.0[1][dslot] * da[1][c];
            }
        }
        from_frame(o, out_v, &f.e, &f.e_inv);
    }
    TensorField::new(t.grid().clone(), out_v, out)
        .expect("shape fixed by construction")
        .with_edge_depth(t.edge_depth() + 1)
}

/// `Γ^k_{ij} − Γ̃^k_{ij} = ½ g^{km}(∇̃_j g_{im} + ∇̃_i g_{jm} − ∇̃_m g_{ij})`.
pub fn christoffel_difference(g: &MetricField, bg: &BackgroundGeometry) -> Result<TensorField> {
    g.check_spd()?;
    same_grid(g.grid(), bg.grid())?;
    let x = covariant_derivative(&g.to_tensor(), bg, 1)?;
    let depth = x.edge_depth();
    let out = TensorField::from_fn(g.grid().clone(), Valence::new(1, 2), |p, c| {
        let gi = g.at(p).inverse().expect("checked SPD");
        let xp = x.at(p);
        let nab = |i: usize, j: usize, a: usize| xp[flat_index(&[i, j, a])];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = 0.0;
                    for m in 0..2 {
                        v += gi.get(k, m) * (nab(i, m, j) + nab(j, m, i) - nab(i, j, m));
                    }
                    c[flat_index(&[k, i, j])] = 0.5 * v;
                }
            }
        }
    });
    Ok(out.with_edge_depth(depth))
}

/// `V^k = g^{ij}(Γ^k_{ij} − Γ̃^k_{ij})`.
pub fn deturck_vector(g: &MetricField, bg: &BackgroundGeometry) -> Result<TensorField> {
    let diff = christoffel_difference(g, bg)?;
    let depth = diff.edge_depth();
    Ok(TensorField::from_fn(g.grid().clone(), Valence::new(1, 0), |p, c| {
        let gi = g.at(p).inverse().expect("checked SPD");
        let d = diff.at(p);
        for k in 0..2 {
            let mut v = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    v += gi.get(i, j) * d[flat_index(&[k, i, j])];
                }
            }
            c[k] = v;
        }
    })
    .with_edge_depth(depth))
}

/// Covariant derivative with respect to the Levi-Civita connection of `g`, obtained from
/// `∇̃` by the change-of-connection terms `±(Γ − Γ̃) * T`.
pub fn covariant_derivative_evolving(
    t: &TensorField,
    g: &MetricField,
    bg: &BackgroundGeometry,
    m: usize,
) -> Result<TensorField> {
    if m == 0 {
        return Err(Error::InvalidArgument("derivative order must be at least 1".into()));
    }
    check_background(t, bg)?;
    let diff = christoffel_difference(g, bg)?;
    let mut cur = t.clone();
    for _ in 0..m {
        cur = connection_correct(&cur, &diff, bg)?;
    }
    Ok(cur)
}

fn connection_correct(t: &TensorField, diff: &TensorField, bg: &BackgroundGeometry) -> Result<TensorField> {
    let mut out = nabla_once(t, bg);
    let v = t.valence();
    let nc = v.components();
    let rank = v.rank();
    let mut tmp = vec![0.0; nc];
    for p in 0..t.points() {
        let here = t.at(p).to_vec();
        let d = diff.at(p);
        for a in 0..2 {
            let mut up = Mat2::default();
            let mut down = Mat2::default();
            for i in 0..2 {
                for j in 0..2 {
                    up.0[i][j] = d[flat_index(&[i, a, j])];
                    down.0[i][j] = d[flat_index(&[j, a, i])];
                }
            }
            let o = out.at_mut(p);
            for s in 0..rank {
                tmp.copy_from_slice(&here);
                if s < v.contra {
                    apply_slot(&mut tmp, rank, s, &up);
                    for c in 0..nc {
                        o[c * 2 + a] += tmp[c];
                    }
                } else {
                    apply_slot(&mut tmp, rank, s, &down);
                    for c in 0..nc {
                        o[c * 2 + a] -= tmp[c];
                    }
                }
            }
        }
    }
    let depth = out.edge_depth().max(diff.edge_depth());
    Ok(out.with_edge_depth(depth))
}

/// Pointwise norm with every index raised or lowered by `g̃`.
pub fn background_norm(t: &TensorField, bg: &BackgroundGeometry) -> Result<Vec<f64>> {
    check_background(t, bg)?;
    let v = t.valence();
    let mut buf = vec![0.0; v.components()];
    Ok(bg
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            buf.copy_from_slice(t.at(i));
            to_frame(&mut buf, v, &f.e, &f.e_inv);
            buf.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect())
}

/// Ascending eigenvalues of `g̃⁻¹ g` at every point.
pub fn relative_eigenvalues(g: &MetricField, bg: &BackgroundGeometry) -> Result<Vec<[f64; 2]>> {
    same_grid(g.grid(), bg.grid())?;
    g.check_spd()?;
    Ok(g.comps().iter().zip(bg.frames()).map(|(gp, f)| gp.congruence(&f.e).eigenvalues()).collect())
}

/// Ascending eigenvalues of `h⁻¹ g` for two arbitrary metrics on the same grid.
pub fn relative_eigenvalues_between(g: &MetricField, h: &MetricField) -> Result<Vec<[f64; 2]>> {
    same_grid(g.grid(), h.grid())?;
    g.check_spd()?;
    h.check_spd()?;
    g.comps()
        .iter()
        .zip(h.comps())
        .enumerate()
        .map(|(i, (gp, hp))| {
            let (e, _, _) =
                jets::frame_jet(hp, &Sym2::ZERO).ok_or(Error::NotPositiveDefinite { index: i, eigenvalue: 0.0 })?;
            Ok(gp.congruence(&e).eigenvalues())
        })
        .collect()
}

/// Check `|A * B| ≤ c(n)|A||B|` pointwise, `c(n) = n^{#pairs}`, for the contraction
/// that pairs slot `pairs[k].0` of `A` with slot `pairs[k].1` of `B` through `g̃`.
pub fn star_bound_check(
    a: &TensorField,
    b: &TensorField,
    pairs: &[(usize, usize)],
    bg: &BackgroundGeometry,
) -> Result<bool> {
    let norms = contraction_norms(a, b, pairs, bg)?;
    let c = (crate::tensor::DIM as f64).powi(pairs.len() as i32);
    let na = background_norm(a, bg)?;
    let nb = background_norm(b, bg)?;
    Ok(norms.iter().zip(na.iter().zip(&nb)).all(|(p, (x, y))| *p <= c * x * y * (1.0 + 1e-12) + 1e-300))
}

/// Pointwise `g̃`-norm of the contraction of `A` and `B` over the given slot pairs.
pub fn contraction_norms(
    a: &TensorField,
    b: &TensorField,
    pairs: &[(usize, usize)],
    bg: &BackgroundGeometry,
) -> Result<Vec<f64>> {
    check_background(a, bg)?;
    check_background(b, bg)?;
    let (ra, rb) = (a.valence().rank(), b.valence().rank());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if i >= ra || j >= rb {
            return Err(Error::InvalidArgument(format!("pair ({i}, {j}) out of range")));
        }
        if pairs[..k].iter().any(|&(x, y)| x == i || y == j) {
            return Err(Error::InvalidArgument(format!("slot reused in pair ({i}, {j})")));
        }
    }
    let free_a: Vec<usize> = (0..ra).filter(|s| !pairs.iter().any(|p| p.0 == *s)).collect();
    let free_b: Vec<usize> = (0..rb).filter(|s| !pairs.iter().any(|p| p.1 == *s)).collect();
    let np = pairs.len();
    let nfree = free_a.len() + free_b.len();

    let (va, vb) = (a.valence(), b.valence());
    let mut ha = vec![0.0; va.components()];
    let mut hb = vec![0.0; vb.components()];
    let mut out = Vec::with_capacity(a.points());
    for (p, f) in bg.frames().iter().enumerate() {
        ha.copy_from_slice(a.at(p));
        hb.copy_from_slice(b.at(p));
        to_frame(&mut ha, va, &f.e, &f.e_inv);
        to_frame(&mut hb, vb, &f.e, &f.e_inv);
        let mut total = 0.0;
        let mut ia = vec![0usize; ra];
        let mut ib = vec![0usize; rb];
        for free in 0..(1usize << nfree) {
            let mut acc = 0.0;
            for (k, s) in free_a.iter().chain(free_b.iter()).enumerate() {
                let bit = (free >> (nfree - 1 - k)) & 1;
                if k < free_a.len() {
                    ia[*s] = bit;
                } else {
                    ib[*s] = bit;
                }
            }
            for summed in 0..(1usize << np) {
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    let bit = (summed >> k) & 1;
                    ia[i] = bit;
                    ib[j] = bit;
                }
                acc += ha[flat_index(&ia)] * hb[flat_index(&ib)];
            }
            total += acc * acc;
        }
        out.push(total.sqrt());
    }
    Ok(out)
}
