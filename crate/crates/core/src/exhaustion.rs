//! Nested Dirichlet problems approaching the singular point, and the Cauchy-gap report
//! certifying their convergence on a fixed window.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{run_dirichlet, BoundaryData, DirichletProblem, FlowState, StepControl};
use crate::geometry::{covariant_derivative, BackgroundGeometry};
use crate::grid::{RadialGrid, Spacing, MIN_POINTS};
use crate::tensor::{to_frame, Valence};

/// Slack allowed when checking that the gaps decrease.
pub const MONOTONE_SLACK: f64 = 1.1;
/// Gaps below this are treated as converged roundoff in the monotonicity check.
pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustionParams {
    pub rho0: f64,
    pub q: f64,
    pub k_max: usize,
    pub r_max: f64,
    pub window: [f64; 2],
    /// Log-uniform points per factor `1/q` in radius.
    #[serde(default = "default_points_per_step")]
    pub points_per_step: usize,
}

fn default_points_per_step() -> usize {
    32
}

/// Annuli `D_k = [ρ_0 q^k, R_max]`, `k = 0..K_max`, all cut from one master log grid so
/// that window points coincide bitwise across members.
#[derive(Debug, Clone)]
pub struct ExhaustionSchedule {
    pub params: ExhaustionParams,
    master: Arc<RadialGrid>,
    starts: Vec<usize>,
    window: std::ops::Range<usize>,
}

impl ExhaustionSchedule {
    pub fn master_grid(&self) -> &Arc<RadialGrid> {
        &self.master
    }

    pub fn members(&self) -> usize {
        self.starts.len()
    }

    /// Nominal inner radii `ρ_0 q^k`.
    pub fn inner_radii(&self) -> Vec<f64> {
        let p = &self.params;
        (0..p.k_max).map(|k| p.rho0 * p.q.powi(k as i32)).collect()
    }

    /// Index range of member `k` within the master grid.
    pub fn member_range(&self, k: usize) -> std::ops::Range<usize> {
        self.starts[k]..self.master.len()
    }

    /// Window indices within the master grid.
    pub fn window_range(&self) -> std::ops::Range<usize> {
        self.window.clone()
    }

    /// Window indices within member `k`.
    pub fn window_in_member(&self, k: usize) -> std::ops::Range<usize> {
        let s = self.starts[k];
        self.window.start - s..self.window.end - s
    }

    pub fn window_radii(&self) -> &[f64] {
        &self.master.radii()[self.window.clone()]
    }
}

pub fn build_exhaustion(params: &ExhaustionParams) -> Result<ExhaustionSchedule> {
    let p = params;
    if !(p.q > 0.0 && p.q < 1.0) {
        return Err(Error::InvalidArgument(format!("ratio q must lie in (0,1), got {}", p.q)));
    }
    if p.k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    if !(p.rho0 > 0.0 && p.r_max > p.rho0 && p.r_max.is_finite()) {
        return Err(Error::InvalidArgument("need 0 < rho0 < r_max".into()));
    }
    let [a, b] = p.window;
    if !(p.rho0 < a && a < b && b < p.r_max) {
        return Err(Error::Domain(format!(
            "window [{a}, {b}] must lie strictly inside D_0 = [{}, {}]",
            p.rho0, p.r_max
        )));
    }
    if p.points_per_step < 2 {
        return Err(Error::InvalidArgument("points_per_step must be at least 2".into()));
    }

    let step = (1.0 / p.q).ln() / p.points_per_step as f64;
    let outer = ((p.r_max / p.rho0).ln() / step).round() as usize;
    if outer + 1 < MIN_POINTS {
        return Err(Error::Grid(format!("D_0 has only {} points; raise points_per_step", outer + 1)));
    }
    let deep = (p.k_max - 1) * p.points_per_step;
    let r: Vec<f64> = (0..=deep + outer).map(|j| p.rho0 * ((j as f64 - deep as f64) * step).exp()).collect();
    let master = Arc::new(RadialGrid::from_radii(r, Spacing::LogUniform)?);
    let starts = (0..p.k_max).map(|k| (p.k_max - 1 - k) * p.points_per_step).collect();

    let rr = master.radii();
    let lo = rr.iter().position(|&x| x >= a * (1.0 - 1e-12)).unwrap_or(rr.len());
    let hi = rr.iter().rposition(|&x| x <= b * (1.0 + 1e-12)).map_or(0, |i| i + 1);
    if lo >= hi || lo <= deep || hi >= rr.len() {
        return Err(Error::Domain("window contains no interior grid points".into()));
    }
    Ok(ExhaustionSchedule { params: *p, master, starts, window: lo..hi })
}

#[derive(Debug, Clone)]
pub struct MemberRun {
    pub k: usize,
    pub inner_radius: f64,
    pub bg: Arc<BackgroundGeometry>,
    pub snapshots: Vec<FlowState>,
}

/// Solve every member from `g̃` with `g = g̃` on both ends. `bg` lives on the master grid.
pub fn run_exhaustion(
    schedule: &ExhaustionSchedule,
    bg: &BackgroundGeometry,
    control: &StepControl,
) -> Result<Vec<MemberRun>> {
    if bg.grid().radii() != schedule.master.radii() {
        return Err(Error::Shape("background is not sampled on the exhaustion master grid".into()));
    }
    let radii = schedule.inner_radii();
    (0..schedule.members())
        .into_par_iter()
        .map(|k| {
            let wrap = |e: Error| Error::Member { k, source: Box::new(e) };
            let range = schedule.member_range(k);
            let member_bg = Arc::new(bg.restrict(range.start, range.end).map_err(wrap)?);
            let problem = DirichletProblem::new(member_bg.clone(), None, BoundaryData::Background).map_err(wrap)?;
            let snapshots = run_dirichlet(&problem, control).map_err(wrap)?;
            Ok(MemberRun { k, inner_radius: radii[k], bg: member_bg, snapshots })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub window: [f64; 2],
    pub inner_radii: Vec<f64>,
    pub max_order: usize,
    /// `gaps[m][k] = sup_{W×[0,T]} |∇̃^m (g_{k+1} − g_k)|_{g̃}`.
    pub gaps: Vec<Vec<f64>>,
    pub monotone: bool,
    /// Last gap per order; absent with a single member.
    pub final_gap: Option<Vec<f64>>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Window samples of `∇̃^m g` for every snapshot of one member.
fn window_derivatives(
    run: &MemberRun,
    window: std::ops::Range<usize>,
    order: usize,
) -> Result<(Valence, Vec<Vec<f64>>)> {
    let mut valence = Valence::new(0, 2 + order);
    let data = run
        .snapshots
        .iter()
        .map(|s| {
            let g = s.g.to_tensor();
            let t = if order == 0 { g } else { covariant_derivative(&g, &run.bg, order)? };
            valence = t.valence();
            let nc = valence.components();
            Ok(t.data()[window.start * nc..window.end * nc].to_vec())
        })
        .collect::<Result<_>>()?;
    Ok((valence, data))
}

/// Cauchy gaps between consecutive members on the window, for `∇̃^m g`, `m = 0..=M`.
pub fn diagonal_convergence(
    schedule: &ExhaustionSchedule,
    runs: &[MemberRun],
    max_order: usize,
    tolerance: f64,
) -> Result<ConvergenceReport> {
    let [a, b] = schedule.params.window;
    let mut report = ConvergenceReport {
        window: [a, b],
        inner_radii: runs.iter().map(|r| r.inner_radius).collect(),
        max_order,
        gaps: vec![Vec::new(); max_order + 1],
        monotone: true,
        final_gap: None,
        tolerance,
        pass: false,
    };
    if runs.len() < 2 {
        return Ok(report);
    }
    let times: Vec<f64> = runs[0].snapshots.iter().map(|s| s.t).collect();
    for r in runs {
        if r.snapshots.iter().map(|s| s.t).ne(times.iter().cloned()) {
            return Err(Error::Shape(format!("member {} has different snapshot times", r.k)));
        }
    }
    let wr = schedule.window_radii();
    for r in runs {
        let w = schedule.window_in_member(r.k);
        if &r.bg.grid().radii()[w] != wr {
            return Err(Error::Shape(format!("member {} window grid differs", r.k)));
        }
    }

    let w0 = schedule.window_in_member(runs[0].k);
    let frames = &runs[0].bg.frames()[w0];
    for m in 0..=max_order {
        let per_member: Vec<(Valence, Vec<Vec<f64>>)> =
            runs.par_iter().map(|r| window_derivatives(r, schedule.window_in_member(r.k), m)).collect::<Result<_>>()?;
        for pair in per_member.windows(2) {
            let (valence, x) = &pair[0];
            let nc = valence.components();
            let mut buf = vec![0.0; nc];
            let mut gap: f64 = 0.0;
            for (xs, ys) in x.iter().zip(&pair[1].1) {
                for (p, f) in frames.iter().enumerate() {
                    for c in 0..nc {
                        buf[c] = ys[p * nc + c] - xs[p * nc + c];
                    }
                    to_frame(&mut buf, *valence, &f.e, &f.e_inv);
                    gap = gap.max(buf.iter().map(|v| v * v).sum::<f64>().sqrt());
                }
            }
            report.gaps[m].push(gap);
        }
    }
    report.monotone =
        report.gaps.iter().all(|g| g.windows(2).all(|w| w[1] <= MONOTONE_SLACK * w[0] || w[1] <= GAP_FLOOR));
    let last: Vec<f64> = report.gaps.iter().map(|g| *g.last().expect("two members")).collect();
    report.pass = report.monotone && last.iter().all(|g| *g <= tolerance);
    report.final_gap = Some(last);
    Ok(report)
}
