//! Explicit time stepping of the Ricci de Turck system and its Dirichlet problem.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::jets::{self, ConnectionJet, MetricJet};
use crate::geometry::{background_norm, deturck_vector, BackgroundGeometry};
use crate::grid::RadialGrid;
use crate::linalg::Sym2;
use crate::tensor::{flat_index, same_grid, MetricField, TensorField, DIM, EIGEN_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `sup |V|_{g̃}`; only filled on recorded snapshots.
    pub max_deturck: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub g: MetricField,
    pub step_count: usize,
    pub diagnostics: Diagnostics,
}

impl FlowState {
    pub fn initial(g: MetricField, bg: &BackgroundGeometry) -> Result<Self> {
        same_grid(g.grid(), bg.grid())?;
        g.check_spd()?;
        let mut s = FlowState { t: 0.0, g, step_count: 0, diagnostics: Diagnostics::default() };
        s.diagnostics = eigen_diagnostics(&s.g, bg);
        Ok(s)
    }

    /// Eigenvalue diagnostics plus `sup |V|_{g̃}` on the interior.
    pub fn with_deturck(mut self, bg: &BackgroundGeometry) -> Result<Self> {
        let v = deturck_vector(&self.g, bg)?;
        let norms = background_norm(&v, bg)?;
        self.diagnostics.max_deturck = Some(norms[v.interior()].iter().cloned().fold(0.0, f64::max));
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub cfl_fraction: f64,
    pub max_dt: f64,
    pub t_final: f64,
    #[serde(default = "yes")]
    pub spd_guard_enabled: bool,
    /// Spacing of recorded snapshots; `None` records only the first and last state.
    #[serde(default)]
    pub snapshot_cadence: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn yes() -> bool {
    true
}

fn default_max_steps() -> usize {
    50_000_000
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl_fraction: 0.5,
            max_dt: 1e-3,
            t_final: 0.1,
            spd_guard_enabled: true,
            snapshot_cadence: None,
            max_steps: default_max_steps(),
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.cfl_fraction > 0.0 && self.cfl_fraction <= 1.0) {
            return bad("cfl_fraction must lie in (0, 1]");
        }
        if !(self.max_dt > 0.0) {
            return bad("max_dt must be positive");
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad("t_final must be finite and nonnegative");
        }
        if let Some(c) = self.snapshot_cadence {
            if !(c > 0.0 && c.is_finite()) {
                return bad("snapshot_cadence must be positive");
            }
        }
        Ok(())
    }
}

/// Values imposed on the two boundary circles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryData {
    /// `g = g̃`.
    #[default]
    Background,
    /// Hold the initial boundary values.
    Initial,
    /// `g = (1 + rate·t) g̃`, the trace of a homothety solution.
    Scaled { rate: f64 },
}

/// Initial-boundary-value problem on the annulus of `bg`.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub bg: Arc<BackgroundGeometry>,
    pub initial: MetricField,
    pub boundary: BoundaryData,
}

impl DirichletProblem {
    /// Starts from `g̃` unless `initial` is given.
    pub fn new(bg: Arc<BackgroundGeometry>, initial: Option<MetricField>, boundary: BoundaryData) -> Result<Self> {
        let initial = match initial {
            Some(g) => {
                same_grid(g.grid(), bg.grid())?;
                g.check_spd()?;
                g
            }
            None => bg.metric().clone(),
        };
        Ok(DirichletProblem { bg, initial, boundary })
    }

    fn boundary_values(&self, t: f64) -> [Sym2; 2] {
        let n = self.bg.len();
        let ends = [0, n - 1];
        ends.map(|i| match self.boundary {
            BoundaryData::Background => self.bg.metric().at(i),
            BoundaryData::Initial => self.initial.at(i),
            BoundaryData::Scaled { rate } => self.bg.metric().at(i).scale(1.0 + rate * t),
        })
    }
}

/// Precomputed background connection, shared by every right-hand-side evaluation.
struct Kernel<'a> {
    grid: &'a RadialGrid,
    bg_conn: Vec<ConnectionJet>,
}

impl<'a> Kernel<'a> {
    fn new(bg: &'a BackgroundGeometry) -> Self {
        let gam = bg.christoffel();
        let dgam = bg.christoffel_dr();
        let bg_conn = (0..bg.len())
            .map(|p| {
                let mut c = ConnectionJet::default();
                for k in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            let f = flat_index(&[k, i, j]);
                            c.gamma[k][i][j] = gam.at(p)[f];
                            c.dgamma[k][i][j] = dgam.at(p)[f];
                        }
                    }
                }
                c
            })
            .collect();
        Kernel { grid: bg.grid(), bg_conn }
    }

    fn jet(&self, g: &[Sym2], p: usize) -> MetricJet {
        let s1 = self.grid.d1_stencils()[p];
        let s2 = self.grid.d2_stencils()[p];
        let mut d1 = Sym2::ZERO;
        for k in 0..s1.len {
            d1 = d1.axpy(s1.w[k], &g[s1.start + k]);
        }
        let mut d2 = Sym2::ZERO;
        for k in 0..s2.len {
            d2 = d2.axpy(s2.w[k], &g[s2.start + k]);
        }
        MetricJet { g: g[p], d1, d2 }
    }

    /// `−2Ric + ∇_i V_j + ∇_j V_i` at one point, all from the finite-difference jet.
    fn point(&self, g: &[Sym2], p: usize) -> Option<Sym2> {
        let jet = self.jet(g, p);
        let conn = jets::connection(&jet)?;
        let (inv, dinv) = jets::inverse_jet(&jet)?;
        let bgc = &self.bg_conn[p];
        let ric = jets::ricci(&conn);

        let mut v = [0.0; 2];
        let mut dv = [0.0; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let diff = conn.gamma[k][i][j] - bgc.gamma[k][i][j];
                    let ddiff = conn.dgamma[k][i][j] - bgc.dgamma[k][i][j];
                    v[k] += inv.get(i, j) * diff;
                    dv[k] += dinv.get(i, j) * diff + inv.get(i, j) * ddiff;
                }
            }
        }
        // lowered V and its radial derivative
        let mut vl = [0.0; 2];
        let mut dvl = [0.0; 2];
        for j in 0..2 {
            for k in 0..2 {
                vl[j] += jet.g.get(j, k) * v[k];
                dvl[j] += jet.d1.get(j, k) * v[k] + jet.g.get(j, k) * dv[k];
            }
        }
        let nabla = |i: usize, j: usize| {
            let d = if i == 0 { dvl[j] } else { 0.0 };
            d - (0..2).map(|m| conn.gamma[m][i][j] * vl[m]).sum::<f64>()
        };
        let sym = |i, j| nabla(i, j) + nabla(j, i);
        Some(Sym2::new(-2.0 * ric.xx + sym(0, 0), -2.0 * ric.xy + sym(0, 1), -2.0 * ric.yy + sym(1, 1)))
    }

    fn rhs_into(&self, g: &[Sym2], out: &mut [Sym2]) -> Result<()> {
        out.par_iter_mut().with_min_len(64).enumerate().try_for_each(|(p, o)| {
            *o = self.point(g, p).ok_or(Error::NotPositiveDefinite { index: p, eigenvalue: 0.0 })?;
            Ok(())
        })
    }
}

/// Right-hand side of the Ricci de Turck equation as a `(0,2)` tensor field.
pub fn flow_rhs(g: &MetricField, bg: &BackgroundGeometry) -> Result<TensorField> {
    same_grid(g.grid(), bg.grid())?;
    g.check_spd()?;
    let kernel = Kernel::new(bg);
    let mut out = vec![Sym2::ZERO; g.len()];
    kernel.rhs_into(g.comps(), &mut out)?;
    let rhs = MetricField::new_unchecked(g.grid().clone(), out)?;
    Ok(rhs.to_tensor())
}

/// `cfl · h_min² / (2n · max g^{rr})`, capped at `max_dt`.
///
/// Only radial derivatives are discretized, so the principal symbol is `g^{rr} ξ_r²`.
pub fn cfl_timestep(g: &MetricField, grid: &RadialGrid, control: &StepControl) -> Result<f64> {
    let h = grid.min_spacing();
    let mut sym: f64 = 0.0;
    for (i, p) in g.comps().iter().enumerate() {
        let inv = p.inverse().ok_or(Error::NotPositiveDefinite { index: i, eigenvalue: 0.0 })?;
        sym = sym.max(inv.xx);
    }
    Ok((control.cfl_fraction * h * h / (2.0 * DIM as f64 * sym)).min(control.max_dt))
}

fn eigen_diagnostics(g: &MetricField, bg: &BackgroundGeometry) -> Diagnostics {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, f) in g.comps().iter().zip(bg.frames()) {
        let [a, b] = p.congruence(&f.e).eigenvalues();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Diagnostics { lambda_min: lo, lambda_max: hi, max_deturck: None }
}

/// Non-finite and eigenvalue-floor checks after a step.
fn guard(g: &[Sym2], bg: &BackgroundGeometry, t: f64, spd: bool) -> Result<()> {
    if let Some(i) = g.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { t, index: i });
    }
    if spd {
        for (i, (p, f)) in g.iter().zip(bg.frames()).enumerate() {
            let lo = p.congruence(&f.e).eigenvalues()[0];
            if !(lo > EIGEN_FLOOR) {
                return Err(Error::SpdViolation { t, index: i, eigenvalue: lo });
            }
        }
    }
    Ok(())
}

struct Stepper<'a> {
    problem: &'a DirichletProblem,
    kernel: Kernel<'a>,
    stage: Vec<Sym2>,
    k: [Vec<Sym2>; 4],
}

impl<'a> Stepper<'a> {
    fn new(problem: &'a DirichletProblem) -> Self {
        let n = problem.bg.len();
        Stepper {
            problem,
            kernel: Kernel::new(&problem.bg),
            stage: vec![Sym2::ZERO; n],
            k: std::array::from_fn(|_| vec![Sym2::ZERO; n]),
        }
    }

    fn pin(&self, g: &mut [Sym2], t: f64) {
        let [a, b] = self.problem.boundary_values(t);
        let n = g.len();
        g[0] = a;
        g[n - 1] = b;
    }

    fn step(&mut self, state: &FlowState, dt: f64, control: &StepControl) -> Result<FlowState> {
        let g0 = state.g.comps();
        let t = state.t;
        let fail = |e: Error, t: f64| match e {
            Error::NotPositiveDefinite { index, eigenvalue } => Error::SpdViolation { t, index, eigenvalue },
            e => e,
        };
        self.kernel.rhs_into(g0, &mut self.k[0]).map_err(|e| fail(e, t))?;
        for (s, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            let ts = t + c * dt;
            for (p, out) in self.stage.iter_mut().enumerate() {
                *out = g0[p].axpy(c * dt, &self.k[s - 1][p]);
            }
            let mut stage = std::mem::take(&mut self.stage);
            self.pin(&mut stage, ts);
            let r = self.kernel.rhs_into(&stage, &mut self.k[s]);
            self.stage = stage;
            r.map_err(|e| fail(e, ts))?;
        }
        let t_new = t + dt;
        let mut g: Vec<Sym2> = (0..g0.len())
            .map(|p| {
                let incr = self.k[0][p].add(&self.k[1][p].scale(2.0)).add(&self.k[2][p].scale(2.0)).add(&self.k[3][p]);
                g0[p].axpy(dt / 6.0, &incr)
            })
            .collect();
        self.pin(&mut g, t_new);
        guard(&g, &self.problem.bg, t_new, control.spd_guard_enabled)?;
        let g = MetricField::new_unchecked(state.g.grid().clone(), g)?;
        let diagnostics = eigen_diagnostics(&g, &self.problem.bg);
        Ok(FlowState { t: t_new, g, step_count: state.step_count + 1, diagnostics })
    }
}

/// One RK4 step of size `dt` with boundary rows pinned per `problem`.
pub fn step_with_dt(
    state: &FlowState,
    problem: &DirichletProblem,
    dt: f64,
    control: &StepControl,
) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    same_grid(state.g.grid(), problem.bg.grid())?;
    Stepper::new(problem).step(state, dt, control)
}

/// One CFL-limited RK4 step with boundary rows pinned to `g̃`.
pub fn step(state: &FlowState, bg: &Arc<BackgroundGeometry>, control: &StepControl) -> Result<FlowState> {
    let problem = DirichletProblem::new(bg.clone(), None, BoundaryData::Background)?;
    let dt = cfl_timestep(&state.g, bg.grid(), control)?;
    step_with_dt(state, &problem, dt, control)
}

/// Integrate to `t_final`, calling `observe` on every snapshot (at `t = 0`, every
/// multiple of the cadence, and at `t_final`). Returns the final state.
pub fn run_dirichlet_observed(
    problem: &DirichletProblem,
    control: &StepControl,
    mut observe: impl FnMut(&FlowState),
) -> Result<FlowState> {
    control.validate()?;
    let bg = &problem.bg;
    let mut g0 = problem.initial.comps().to_vec();
    let n = g0.len();
    let [a, b] = problem.boundary_values(0.0);
    g0[0] = a;
    g0[n - 1] = b;
    let mut state = FlowState::initial(MetricField::new_unchecked(bg.grid().clone(), g0)?, bg)?;
    observe(&state.clone().with_deturck(bg)?);

    let mut stepper = Stepper::new(problem);
    let t_final = control.t_final;
    let cadence = control.snapshot_cadence.unwrap_or(f64::INFINITY);
    let mut next_snap = 1usize;
    while state.t < t_final {
        let snap_t = (next_snap as f64 * cadence).min(t_final);
        if state.step_count >= control.max_steps {
            return Err(Error::InvalidArgument(format!("exceeded max_steps = {}", control.max_steps)));
        }
        let mut dt = cfl_timestep(&state.g, bg.grid(), control)?;
        let land = state.t + dt >= snap_t * (1.0 - 1e-12);
        if land {
            dt = snap_t - state.t;
        }
        let mut next = stepper.step(&state, dt, control)?;
        if land {
            next.t = snap_t;
            if snap_t < t_final {
                next_snap += 1;
            }
            observe(&next.clone().with_deturck(bg)?);
        }
        state = next;
    }
    Ok(state)
}

/// Snapshots of the Dirichlet solution.
pub fn run_dirichlet(problem: &DirichletProblem, control: &StepControl) -> Result<Vec<FlowState>> {
    let mut out = Vec::new();
    run_dirichlet_observed(problem, control, |s| out.push(s.clone()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{exact_homothety_solution, instantiate, GeometrySpec};
    use std::f64::consts::PI;

    fn bg(spec: GeometrySpec, lo: f64, hi: f64, n: usize) -> Arc<BackgroundGeometry> {
        let grid = Arc::new(RadialGrid::uniform(lo, hi, n).unwrap());
        Arc::new(instantiate(&spec, grid).unwrap())
    }

    fn rhs_sym(t: &TensorField, p: usize) -> Sym2 {
        let c = t.at(p);
        Sym2::new(c[0], c[1], c[3])
    }

    #[test]
    fn rhs_flat_cone_vanishes() {
        let b = bg(GeometrySpec::FlatCone { beta: 0.5 }, 0.1, 1.0, 64);
        let r = flow_rhs(b.metric(), &b).unwrap();
        assert!(r.max_abs() < 1e-10, "{}", r.max_abs());
    }

    #[test]
    fn rhs_constant_curvature() {
        for (spec, k, lo, hi) in [
            (GeometrySpec::RoundSphere { radius: 1.0 }, 1.0, PI / 4.0, 3.0 * PI / 4.0),
            (GeometrySpec::HyperbolicPlane, -1.0, 0.5, 2.5),
        ] {
            let mut errs = vec![];
            for n in [65, 129] {
                let b = bg(spec, lo, hi, n);
                let r = flow_rhs(b.metric(), &b).unwrap();
                let mut e: f64 = 0.0;
                for p in 0..n {
                    let want = b.metric().at(p).scale(-2.0 * k);
                    let got = rhs_sym(&r, p);
                    e = e.max(got.sub(&want).max_abs() / want.max_abs());
                }
                errs.push(e);
            }
            assert!(errs[1] < 1e-3, "{errs:?}");
            assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
        }
    }

    #[test]
    fn cfl_examples() {
        let b = bg(GeometrySpec::FlatPlane, 0.5, 2.0, 61);
        let c = StepControl { cfl_fraction: 0.8, max_dt: 1.0, ..Default::default() };
        let h: f64 = 1.5 / 60.0;
        let dt = cfl_timestep(b.metric(), b.grid(), &c).unwrap();
        assert!((dt - 0.8 * h * h / 4.0).abs() < 1e-15);
        let b2 = bg(GeometrySpec::FlatPlane, 0.5, 2.0, 121);
        let dt2 = cfl_timestep(b2.metric(), b2.grid(), &c).unwrap();
        assert!((dt / dt2 - 4.0).abs() < 1e-9);
        let dbl = cfl_timestep(&b.metric().scale(2.0), b.grid(), &c).unwrap();
        assert!((dbl / dt - 2.0).abs() < 1e-12);
        let capped = StepControl { max_dt: 1e-9, ..c };
        assert_eq!(cfl_timestep(b.metric(), b.grid(), &capped).unwrap(), 1e-9);
    }

    #[test]
    fn flat_step_changes_only_time() {
        let b = bg(GeometrySpec::FlatPlane, 0.5, 2.0, 64);
        let s = FlowState::initial(b.metric().clone(), &b).unwrap();
        let next = step(&s, &b, &StepControl::default()).unwrap();
        assert!(next.t > 0.0);
        assert_eq!(next.step_count, 1);
        assert!(next.g.max_abs_diff(b.metric()) < 1e-13);
    }

    #[test]
    fn sphere_single_step_shrinks() {
        let b = bg(GeometrySpec::RoundSphere { radius: 1.0 }, PI / 4.0, 3.0 * PI / 4.0, 128);
        let s = FlowState::initial(b.metric().clone(), &b).unwrap();
        let problem = DirichletProblem::new(b.clone(), None, BoundaryData::Scaled { rate: -2.0 }).unwrap();
        let dt = 1e-4;
        let next = step_with_dt(&s, &problem, dt, &StepControl::default()).unwrap();
        assert!((next.diagnostics.lambda_min - (1.0 - 2.0 * dt)).abs() < 1e-6);
        assert!((next.diagnostics.lambda_max - (1.0 - 2.0 * dt)).abs() < 1e-6);
    }

    #[test]
    fn huge_step_is_caught() {
        let b = bg(GeometrySpec::RoundSphere { radius: 1.0 }, PI / 4.0, 3.0 * PI / 4.0, 128);
        let problem = DirichletProblem::new(b.clone(), None, BoundaryData::Background).unwrap();
        let mut s = FlowState::initial(b.metric().clone(), &b).unwrap();
        let control = StepControl::default();
        let mut caught = false;
        for _ in 0..50 {
            match step_with_dt(&s, &problem, 1.0, &control) {
                Ok(n) => s = n,
                Err(e) => {
                    assert!(matches!(e, Error::SpdViolation { .. } | Error::NonFinite { .. }), "{e}");
                    caught = true;
                    break;
                }
            }
        }
        assert!(caught);
    }

    #[test]
    fn zero_final_time_single_snapshot() {
        let b = bg(GeometrySpec::FlatCone { beta: 0.5 }, 0.1, 1.0, 32);
        let problem = DirichletProblem::new(b.clone(), None, BoundaryData::Background).unwrap();
        let snaps = run_dirichlet(&problem, &StepControl { t_final: 0.0, ..Default::default() }).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(&snaps[0].g, b.metric());
    }

    #[test]
    fn snapshots_land_on_cadence_and_pin_boundary() {
        let b = bg(GeometrySpec::HyperbolicPlane, 0.5, 2.5, 48);
        let problem = DirichletProblem::new(b.clone(), None, BoundaryData::Background).unwrap();
        let control = StepControl { t_final: 0.01, snapshot_cadence: Some(0.0025), ..Default::default() };
        let snaps = run_dirichlet(&problem, &control).unwrap();
        let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.0, 0.0025, 0.005, 0.0075, 0.01]);
        for s in &snaps {
            assert_eq!(s.g.at(0), b.metric().at(0));
            assert_eq!(s.g.at(47), b.metric().at(47));
            assert!(s.diagnostics.max_deturck.is_some());
        }
        assert!(snaps.windows(2).all(|w| w[1].step_count > w[0].step_count));
    }

    #[test]
    fn homothety_tracked_with_scaled_boundary() {
        let spec = GeometrySpec::RoundSphere { radius: 1.0 };
        let b = bg(spec, PI / 4.0, 3.0 * PI / 4.0, 64);
        let problem = DirichletProblem::new(b.clone(), None, BoundaryData::Scaled { rate: -2.0 }).unwrap();
        let control = StepControl { t_final: 0.05, ..Default::default() };
        let snaps = run_dirichlet(&problem, &control).unwrap();
        let exact = exact_homothety_solution(&spec, b.grid().clone(), 0.05).unwrap();
        let last = snaps.last().unwrap();
        let err = last.g.max_abs_diff(&exact);
        assert!(err < 1e-3, "{err}");
        assert!(last.g.comps().iter().all(|s| s.xy.abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_control() {
        let b = bg(GeometrySpec::FlatPlane, 0.5, 2.0, 32);
        let problem = DirichletProblem::new(b, None, BoundaryData::Background).unwrap();
        for c in [
            StepControl { cfl_fraction: 1.5, ..Default::default() },
            StepControl { cfl_fraction: 0.0, ..Default::default() },
            StepControl { t_final: -1.0, ..Default::default() },
            StepControl { snapshot_cadence: Some(0.0), ..Default::default() },
        ] {
            assert!(run_dirichlet(&problem, &c).is_err());
        }
    }
}
