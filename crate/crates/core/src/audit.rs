//! Empirical checks of the a priori estimates along computed flows: equivalence windows,
//! ρ-weighted derivative and curvature profiles, and power-law fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::geometry::jets::frame_jet;
use crate::geometry::{
    background_norm, covariant_derivative, covariant_derivative_evolving, deturck_vector, riemann, BackgroundGeometry,
};
use crate::linalg::Sym2;
use crate::tensor::{to_frame, MetricField, TensorField};

/// Allowed excess of a fitted exponent over the claimed one.
pub const SLOPE_SLACK: f64 = 0.2;
/// Profiles whose maximum is below this are reported as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;
pub const MIN_SHELLS: usize = 4;
pub const MIN_RANGE: f64 = 4.0;
/// Multiple of `ε·ℓ^{-k}` (`ℓ` the local spacing, `k` the number of differentiations)
/// below which a shell value is indistinguishable from roundoff.
pub const NOISE_FACTOR: f64 = 100.0;

/// Extreme relative eigenvalues of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSample {
    pub t: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl From<&FlowState> for EigenSample {
    fn from(s: &FlowState) -> Self {
        EigenSample { t: s.t, lambda_min: s.diagnostics.lambda_min, lambda_max: s.diagnostics.lambda_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub delta: f64,
    pub t_emp: f64,
}

/// Largest snapshot time up to which every relative eigenvalue stays in `[1−δ, 1+δ]`.
///
/// Samples are taken in time order regardless of input order.
pub fn uniform_equivalence_window(samples: &[EigenSample], deltas: &[f64]) -> Result<Vec<WindowEntry>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no snapshots".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.t.total_cmp(&b.t));
    deltas
        .iter()
        .map(|&delta| {
            if !(delta >= 0.0) {
                return Err(Error::InvalidArgument(format!("delta must be nonnegative, got {delta}")));
            }
            let inside = |e: &EigenSample| e.lambda_min >= 1.0 - delta && e.lambda_max <= 1.0 + delta;
            let t_emp = s.iter().take_while(|e| inside(e)).last().map_or(0.0, |e| e.t);
            Ok(WindowEntry { delta, t_emp })
        })
        .collect()
}

/// Which grid radii count as shells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellSelection {
    /// Distance (in ρ) from the inner boundary that is excluded.
    #[serde(default)]
    pub inner_collar: f64,
    /// Distance (in ρ) from the outer boundary that is excluded.
    #[serde(default = "default_outer_collar")]
    pub outer_collar: f64,
}

fn default_outer_collar() -> f64 {
    0.2
}

impl Default for ShellSelection {
    fn default() -> Self {
        ShellSelection { inner_collar: 0.0, outer_collar: default_outer_collar() }
    }
}

/// Norm of one quantity on each shell `ρ = ρ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellProfile {
    pub quantity: String,
    pub order: usize,
    pub t: f64,
    pub rho: Vec<f64>,
    pub norm: Vec<f64>,
    /// Roundoff level of each shell value; empty means no floor.
    #[serde(default)]
    pub floor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub rho: Vec<f64>,
    /// Upper envelope `sup_{ρ' ≥ ρ_j}` of the profile.
    pub sup: Vec<f64>,
    /// Slope of `log sup` against `log(1/ρ)`.
    pub slope: f64,
    pub slope_stderr: f64,
    /// `log` of the fitted constant.
    pub intercept: f64,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    /// The profile vanishes to roundoff; the slope is reported as 0.
    pub degenerate: bool,
}

fn shell_indices(bg: &BackgroundGeometry, edge: usize, sel: &ShellSelection) -> Result<Vec<usize>> {
    if bg.is_complete() {
        return Err(Error::NotApplicable("complete geometry has no distance to a singular point".into()));
    }
    let rho = bg.rho();
    let n = rho.len();
    let (lo, hi) = (rho[0], rho[n - 1]);
    Ok((edge..n.saturating_sub(edge))
        .filter(|&i| {
            let r = rho[i];
            r <= 1.0 && r >= lo + sel.inner_collar && r <= hi - sel.outer_collar
        })
        .collect())
}

fn profile(
    quantity: &str,
    order: usize,
    differentiations: usize,
    t: f64,
    norms: &[f64],
    edge: usize,
    bg: &BackgroundGeometry,
    sel: &ShellSelection,
) -> Result<ShellProfile> {
    let idx = shell_indices(bg, edge, sel)?;
    Ok(ShellProfile {
        quantity: quantity.into(),
        order,
        t,
        rho: idx.iter().map(|&i| bg.rho()[i]).collect(),
        norm: idx.iter().map(|&i| norms[i]).collect(),
        floor: idx.iter().map(|&i| noise_floor(bg, i, differentiations)).collect(),
    })
}

fn noise_floor(bg: &BackgroundGeometry, i: usize, k: usize) -> f64 {
    let r = bg.grid().radii();
    let n = r.len();
    let h = 0.5 * (r[(i + 1).min(n - 1)] - r[i.saturating_sub(1)]) * bg.metric().at(i).xx.sqrt();
    NOISE_FACTOR * f64::EPSILON * h.powi(-(k as i32))
}

/// Shell suprema of `|∇̃^m g|_{g̃}`.
pub fn derivative_profile(
    snapshot: &FlowState,
    bg: &BackgroundGeometry,
    m: usize,
    sel: &ShellSelection,
) -> Result<ShellProfile> {
    if m == 0 {
        return Err(Error::InvalidArgument("derivative order must be at least 1".into()));
    }
    if bg.is_complete() {
        return Err(Error::NotApplicable("complete geometry has no distance to a singular point".into()));
    }
    let d = covariant_derivative(&snapshot.g.to_tensor(), bg, m)?;
    let norms = background_norm(&d, bg)?;
    profile("nabla_g", m, m, snapshot.t, &norms, d.edge_depth(), bg, sel)
}

/// Shell suprema of `|V|_{g̃}`.
pub fn deturck_norm_audit(snapshot: &FlowState, bg: &BackgroundGeometry, sel: &ShellSelection) -> Result<ShellProfile> {
    if bg.is_complete() {
        return Err(Error::NotApplicable("complete geometry has no distance to a singular point".into()));
    }
    let v = deturck_vector(&snapshot.g, bg)?;
    let norms = background_norm(&v, bg)?;
    profile("deturck", 1, 1, snapshot.t, &norms, v.edge_depth(), bg, sel)
}

/// Pointwise norm of `t` with every index raised or lowered by `g`.
pub fn metric_norm(t: &TensorField, g: &MetricField) -> Result<Vec<f64>> {
    let v = t.valence();
    let mut buf = vec![0.0; v.components()];
    g.comps()
        .iter()
        .enumerate()
        .map(|(i, gp)| {
            let (e, e_inv, _) =
                frame_jet(gp, &Sym2::ZERO).ok_or(Error::NotPositiveDefinite { index: i, eigenvalue: 0.0 })?;
            buf.copy_from_slice(t.at(i));
            to_frame(&mut buf, v, &e, &e_inv);
            Ok(buf.iter().map(|x| x * x).sum::<f64>().sqrt())
        })
        .collect()
}

/// `|∇^m Rm|_{g}` with the connection and norm of the evolving metric.
pub fn curvature_norms(g: &MetricField, bg: &BackgroundGeometry, m: usize) -> Result<(Vec<f64>, usize)> {
    let mut rm = riemann(g)?;
    if m > 0 {
        rm = covariant_derivative_evolving(&rm, g, bg, m)?;
    }
    Ok((metric_norm(&rm, g)?, rm.edge_depth()))
}

/// Shell suprema of `|∇^m Rm|_{g(t)}`.
pub fn curvature_audit(
    snapshot: &FlowState,
    bg: &BackgroundGeometry,
    m: usize,
    sel: &ShellSelection,
) -> Result<ShellProfile> {
    if bg.is_complete() {
        return Err(Error::NotApplicable("complete geometry has no distance to a singular point".into()));
    }
    let (norms, edge) = curvature_norms(&snapshot.g, bg, m)?;
    profile("curvature", m, m + 2, snapshot.t, &norms, edge, bg, sel)
}

/// Least-squares power law for the outer upper envelope of a shell profile.
pub fn scaling_exponent_fit(p: &ShellProfile) -> Result<ScalingFit> {
    if p.rho.len() != p.norm.len() {
        return Err(Error::Shape("profile radii and norms differ in length".into()));
    }
    if !p.floor.is_empty() && p.floor.len() != p.norm.len() {
        return Err(Error::Shape("profile floor and norms differ in length".into()));
    }
    let below_floor = !p.floor.is_empty() && p.norm.iter().zip(&p.floor).all(|(v, f)| v <= f);
    let mut pts: Vec<(f64, f64)> = p.rho.iter().cloned().zip(p.norm.iter().cloned()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() < MIN_SHELLS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SHELLS} shells, got {}", pts.len())));
    }
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    if !(hi >= MIN_RANGE * lo) {
        return Err(Error::InvalidArgument(format!("shells span only [{lo}, {hi}]")));
    }
    if pts.iter().any(|(r, v)| !(r.is_finite() && *r > 0.0 && v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("profile has invalid entries".into()));
    }
    let mut sup = vec![0.0; pts.len()];
    let mut run: f64 = 0.0;
    for i in (0..pts.len()).rev() {
        run = run.max(pts[i].1);
        sup[i] = run;
    }
    let rho: Vec<f64> = pts.iter().map(|p| p.0).collect();
    if run <= DEGENERATE_NORM || below_floor {
        return Ok(ScalingFit {
            rho,
            sup,
            slope: 0.0,
            slope_stderr: 0.0,
            intercept: f64::NEG_INFINITY,
            residual: 0.0,
            degenerate: true,
        });
    }
    // shells beyond the last nonzero value carry no information about the law
    let used: Vec<(f64, f64)> =
        rho.iter().zip(&sup).filter(|(_, s)| **s > 0.0).map(|(r, s)| (-r.ln(), s.ln())).collect();
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_stderr = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(ScalingFit { rho, sup, slope, slope_stderr, intercept, residual: (sse / n).sqrt(), degenerate: false })
}

/// Outcome of one audited claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClaimStatus {
    Pass,
    Fail,
    NotApplicable { reason: String },
}

/// A fit together with the exponent it is audited against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub quantity: String,
    pub order: usize,
    pub t: f64,
    pub claimed_exponent: f64,
    pub fit: Option<ScalingFit>,
    #[serde(flatten)]
    pub status: ClaimStatus,
}

impl FitRecord {
    /// Pass when the fitted slope is at most `claimed_exponent + slack`.
    pub fn judge(p: &ShellProfile, claimed_exponent: f64, slack: f64) -> FitRecord {
        let (fit, status) = match scaling_exponent_fit(p) {
            Ok(f) => {
                let ok = f.slope <= claimed_exponent + slack;
                (Some(f), if ok { ClaimStatus::Pass } else { ClaimStatus::Fail })
            }
            Err(e) => (None, ClaimStatus::NotApplicable { reason: e.to_string() }),
        };
        FitRecord { quantity: p.quantity.clone(), order: p.order, t: p.t, claimed_exponent, fit, status }
    }

    pub fn skipped(quantity: &str, order: usize, t: f64, claimed_exponent: f64, reason: String) -> FitRecord {
        FitRecord {
            quantity: quantity.into(),
            order,
            t,
            claimed_exponent,
            fit: None,
            status: ClaimStatus::NotApplicable { reason },
        }
    }
}

/// Everything the auditor measured along one flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub eigenvalues: Vec<EigenSample>,
    pub equivalence_window: Vec<WindowEntry>,
    pub profiles: Vec<ShellProfile>,
    pub fits: Vec<FitRecord>,
}

/// Run every applicable audit on `snapshot` (usually the last one) for derivative
/// orders `1..=max_order` and curvature orders `0..max_order`.
pub fn audit_snapshot(
    snapshot: &FlowState,
    bg: &BackgroundGeometry,
    max_order: usize,
    sel: &ShellSelection,
    slack: f64,
) -> (Vec<ShellProfile>, Vec<FitRecord>) {
    let mut profiles = Vec::new();
    let mut fits = Vec::new();
    let mut push = |res: Result<ShellProfile>, name: &str, order: usize, claim: f64| match res {
        Ok(p) => {
            fits.push(FitRecord::judge(&p, claim, slack));
            profiles.push(p);
        }
        Err(e) => fits.push(FitRecord::skipped(name, order, snapshot.t, claim, e.to_string())),
    };
    for m in 1..=max_order {
        push(derivative_profile(snapshot, bg, m, sel), "nabla_g", m, m as f64);
    }
    push(deturck_norm_audit(snapshot, bg, sel), "deturck", 1, 1.0);
    for m in 0..max_order {
        push(curvature_audit(snapshot, bg, m, sel), "curvature", m, (m + 2) as f64);
    }
    (profiles, fits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::models::{instantiate, GeometrySpec};
    use std::sync::Arc;

    fn synthetic(f: impl Fn(f64) -> f64) -> ShellProfile {
        let rho: Vec<f64> = (0..40).map(|i| 0.01 * 1.1f64.powi(i)).collect();
        ShellProfile {
            quantity: "x".into(),
            order: 0,
            t: 0.0,
            norm: rho.iter().map(|&r| f(r)).collect(),
            rho,
            floor: vec![],
        }
    }

    #[test]
    fn planted_power_law_recovered() {
        let f = scaling_exponent_fit(&synthetic(|r| 3.0 / (r * r))).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-6);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-9);
        assert!(f.residual <= 1e-10);
        let c = scaling_exponent_fit(&synthetic(|_| 0.7)).unwrap();
        assert!(c.slope.abs() < 1e-12 && !c.degenerate);
        let z = scaling_exponent_fit(&synthetic(|_| 0.0)).unwrap();
        assert!(z.degenerate && z.slope == 0.0);
    }

    #[test]
    fn roundoff_floor_marks_degenerate() {
        let mut p = synthetic(|r| 1e-12 / (r * r));
        p.floor = vec![1e-7; p.rho.len()];
        assert!(scaling_exponent_fit(&p).unwrap().degenerate);
        p.floor[3] = 1e-12;
        let f = scaling_exponent_fit(&p).unwrap();
        assert!(!f.degenerate && (f.slope - 2.0).abs() < 1e-6);
    }

    #[test]
    fn fit_preconditions() {
        let p = ShellProfile {
            quantity: "x".into(),
            order: 0,
            t: 0.0,
            rho: vec![0.1, 0.2, 0.3],
            norm: vec![1.0; 3],
            floor: vec![],
        };
        assert!(scaling_exponent_fit(&p).is_err());
        let p = ShellProfile {
            quantity: "x".into(),
            order: 0,
            t: 0.0,
            rho: vec![0.1, 0.15, 0.2, 0.3],
            norm: vec![1.0; 4],
            floor: vec![],
        };
        assert!(scaling_exponent_fit(&p).is_err());
    }

    #[test]
    fn windows_from_samples() {
        let s: Vec<EigenSample> = (0..=100)
            .map(|i| {
                let t = i as f64 * 0.001;
                EigenSample { t, lambda_min: 1.0 - 2.0 * t, lambda_max: 1.0 - 2.0 * t }
            })
            .collect();
        let w = uniform_equivalence_window(&s, &[0.0, 0.05, 0.1]).unwrap();
        assert_eq!(w[0].t_emp, 0.0);
        assert!((w[1].t_emp - 0.025).abs() <= 0.001 + 1e-12);
        assert!((w[2].t_emp - 0.05).abs() <= 0.001 + 1e-12);
        let mut rev = s.clone();
        rev.reverse();
        assert_eq!(uniform_equivalence_window(&rev, &[0.1]).unwrap()[0], w[2]);
        assert!(uniform_equivalence_window(&[], &[0.1]).is_err());
    }

    #[test]
    fn complete_geometry_not_applicable() {
        let g = Arc::new(RadialGrid::uniform(1.0, 2.0, 32).unwrap());
        let bg = instantiate(&GeometrySpec::RoundSphere { radius: 1.0 }, g).unwrap();
        let s = FlowState::initial(bg.metric().clone(), &bg).unwrap();
        assert!(matches!(derivative_profile(&s, &bg, 1, &Default::default()), Err(Error::NotApplicable(_))));
        let (_, fits) = audit_snapshot(&s, &bg, 2, &Default::default(), SLOPE_SLACK);
        assert!(fits.iter().all(|f| matches!(f.status, ClaimStatus::NotApplicable { .. })));
    }

    #[test]
    fn flat_cone_profiles_vanish() {
        let g = Arc::new(RadialGrid::log_uniform(0.02, 1.6, 96).unwrap());
        let bg = instantiate(&GeometrySpec::FlatCone { beta: 0.5 }, g).unwrap();
        let s = FlowState::initial(bg.metric().clone(), &bg).unwrap();
        let sel = ShellSelection::default();
        assert!(matches!(derivative_profile(&s, &bg, 0, &sel), Err(Error::InvalidArgument(_))));
        for p in [
            derivative_profile(&s, &bg, 1, &sel).unwrap(),
            derivative_profile(&s, &bg, 2, &sel).unwrap(),
            deturck_norm_audit(&s, &bg, &sel).unwrap(),
            curvature_audit(&s, &bg, 0, &sel).unwrap(),
        ] {
            // second differences amplify roundoff near the tip
            let tol = if p.quantity == "curvature" { 1e-8 } else { 1e-10 };
            assert!(p.norm.iter().all(|v| *v <= tol), "{} {:?}", p.quantity, p.norm);
            assert!(p.rho.iter().all(|r| *r <= 1.0));
        }
    }

    #[test]
    fn perturbation_gradient_matches_closed_form() {
        use crate::models::{profile_jet, PerturbationProfile};
        let g = Arc::new(RadialGrid::log_uniform(0.02, 1.6, 400).unwrap());
        let cone = instantiate(&GeometrySpec::FlatCone { beta: 0.5 }, g.clone()).unwrap();
        let amp = 0.05;
        let prof = PerturbationProfile::LogSine;
        let pert = GeometrySpec::PerturbedCone { beta: 0.5, amplitude: amp, profile: prof };
        let gm = MetricField::from_fn(g, |r| pert.warp(r).jet().g).unwrap();
        let s = FlowState::initial(gm, &cone).unwrap();
        let p = derivative_profile(&s, &cone, 1, &ShellSelection::default()).unwrap();
        for (r, v) in p.rho.iter().zip(&p.norm) {
            let [u, u1, _] = profile_jet(prof, amp, *r);
            // ∇̃(e^{2u} g̃) = 2u′e^{2u} dr ⊗ g̃ and |dr ⊗ g̃| = √2
            let exact = 2.0 * 2f64.sqrt() * u1.abs() * (2.0 * u).exp();
            assert!((v - exact).abs() <= 0.1 * exact.max(1e-3), "r = {r}: {v} vs {exact}");
        }
    }

    #[test]
    fn sphere_curvature_scales_inversely() {
        use std::f64::consts::PI;
        let g = Arc::new(RadialGrid::uniform(PI / 4.0, 3.0 * PI / 4.0, 128).unwrap());
        let bg = instantiate(&GeometrySpec::RoundSphere { radius: 1.0 }, g).unwrap();
        let gm = bg.metric().scale(0.6);
        let (norms, edge) = curvature_norms(&gm, &bg, 0).unwrap();
        for v in &norms[edge..norms.len() - edge] {
            assert!((v - 2.0 / 0.6).abs() < 1e-2, "{v}");
        }
    }
}
