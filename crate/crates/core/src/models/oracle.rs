//! Scalar reference integrator for conformal flows on flat backgrounds.
//!
//! On `g = e^{2u} g̃` with `g̃` flat the de Turck term vanishes and the flow reduces to
//! `∂_t u = e^{−2u}(u″ + u′/r)`. This file deliberately shares no code with the grid
//! stencils or the tensor solver.

use crate::error::{Error, Result};
use crate::geometry::BackgroundGeometry;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleControl {
    pub cfl_fraction: f64,
    pub max_dt: f64,
    pub max_steps: usize,
}

impl Default for OracleControl {
    fn default() -> Self {
        OracleControl { cfl_fraction: 0.5, max_dt: 1e-3, max_steps: 10_000_000 }
    }
}

/// `u(t_final)` with `u` pinned to `u0` at both ends.
pub fn conformal_scalar_oracle(
    u0: &[f64],
    bg: &BackgroundGeometry,
    t_final: f64,
    control: OracleControl,
) -> Result<Vec<f64>> {
    let r = bg.grid().radii();
    let n = r.len();
    if u0.len() != n {
        return Err(Error::Shape(format!("u0 has {} points, grid has {n}", u0.len())));
    }
    let flat = bg.metric().comps().iter().all(|g| g.xx == 1.0 && g.xy == 0.0);
    if !flat || bg.k0() > 1e-20 {
        return Err(Error::NotApplicable("scalar oracle needs a flat plane or flat cone background".into()));
    }
    if !(t_final >= 0.0) || !(control.cfl_fraction > 0.0 && control.cfl_fraction <= 1.0) {
        return Err(Error::InvalidArgument("bad oracle time control".into()));
    }

    // three-point weights on the (possibly non-uniform) grid
    let mut w1 = vec![[0.0; 3]; n];
    let mut w2 = vec![[0.0; 3]; n];
    for i in 1..n - 1 {
        let hm = r[i] - r[i - 1];
        let hp = r[i + 1] - r[i];
        let den = hm * hp * (hm + hp);
        w1[i] = [-hp * hp / den, (hp * hp - hm * hm) / den, hm * hm / den];
        w2[i] = [2.0 * hp / den, -2.0 * (hm + hp) / den, 2.0 * hm / den];
    }
    let hmin = r.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);

    let rhs = |u: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let s = [u[i - 1], u[i], u[i + 1]];
            let d1: f64 = (0..3).map(|k| w1[i][k] * s[k]).sum();
            let d2: f64 = (0..3).map(|k| w2[i][k] * s[k]).sum();
            out[i] = (-2.0 * u[i]).exp() * (d2 + d1 / r[i]);
        }
    };

    let mut u = u0.to_vec();
    let mut t = 0.0;
    let mut steps = 0usize;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    while t < t_final {
        if steps >= control.max_steps {
            return Err(Error::InvalidArgument(format!("oracle exceeded {} steps", control.max_steps)));
        }
        let gmax = u.iter().map(|v| (-2.0 * v).exp()).fold(0.0, f64::max);
        let mut dt = (control.cfl_fraction * hmin * hmin / (4.0 * gmax)).min(control.max_dt);
        if t + dt > t_final {
            dt = t_final - t;
        }
        rhs(&u, &mut k1);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = u[i] + dt * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..n {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = if t + dt >= t_final { t_final } else { t + dt };
        steps += 1;
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t, index: i });
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::models::{instantiate, GeometrySpec};
    use std::sync::Arc;

    fn plane(n: usize) -> BackgroundGeometry {
        let g = Arc::new(RadialGrid::uniform(0.5, 2.0, n).unwrap());
        instantiate(&GeometrySpec::FlatPlane, g).unwrap()
    }

    #[test]
    fn zero_and_constant_are_stationary() {
        let bg = plane(64);
        let u = conformal_scalar_oracle(&vec![0.0; 64], &bg, 0.05, Default::default()).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
        let u = conformal_scalar_oracle(&vec![0.3; 64], &bg, 0.05, Default::default()).unwrap();
        assert!(u.iter().all(|v| (v - 0.3).abs() < 1e-14));
    }

    #[test]
    fn log_radius_is_harmonic() {
        // u = c log r solves u″ + u′/r = 0 and the scheme is exact on it up to O(h²)
        let bg = plane(128);
        let u0: Vec<f64> = bg.grid().radii().iter().map(|r| 0.1 * r.ln()).collect();
        let u = conformal_scalar_oracle(&u0, &bg, 0.02, Default::default()).unwrap();
        let err = u.iter().zip(&u0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn rejects_curved_background() {
        let g = Arc::new(RadialGrid::uniform(0.5, 2.0, 32).unwrap());
        let bg = instantiate(&GeometrySpec::HyperbolicPlane, g).unwrap();
        assert!(matches!(
            conformal_scalar_oracle(&vec![0.0; 32], &bg, 0.1, Default::default()),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn bump_decays() {
        let bg = plane(128);
        let u0: Vec<f64> = bg.grid().radii().iter().map(|r| 0.1 * (-(r - 1.0) * (r - 1.0) / 0.02).exp()).collect();
        let u = conformal_scalar_oracle(&u0, &bg, 0.01, Default::default()).unwrap();
        let m0 = u0.iter().cloned().fold(0.0, f64::max);
        let m1 = u.iter().cloned().fold(0.0, f64::max);
        assert!(m1 < m0 && m1 > 0.0);
    }
}
