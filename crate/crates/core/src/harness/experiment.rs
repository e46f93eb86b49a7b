//! Orchestration: solve, audit, write artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::audit::{audit_snapshot, uniform_equivalence_window, ClaimStatus, EigenSample, ShellProfile};
use crate::barriers::proof_device_suite;
use crate::error::{Error, Result};
use crate::exhaustion::{build_exhaustion, diagonal_convergence, run_exhaustion, ConvergenceReport};
use crate::flow::{run_dirichlet_observed, Diagnostics, DirichletProblem, FlowState};
use crate::geometry::{relative_eigenvalues_between, BackgroundGeometry};
use crate::grid::RadialGrid;
use crate::models::instantiate;
use crate::tensor::MetricField;

use super::config::{ExperimentConfig, InitialData};
use super::report::*;

/// What a run left on disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub report: Option<ExperimentReport>,
    pub error: Option<ErrorDocument>,
}

impl RunOutcome {
    /// 0: completed and every audit passed; 1: completed with a failing audit; 2: aborted.
    pub fn exit_code(&self) -> i32 {
        match (&self.error, &self.report) {
            (Some(_), _) => 2,
            (None, Some(r)) if r.pass => 0,
            _ => 1,
        }
    }
}

pub fn build_background(cfg: &ExperimentConfig) -> Result<Arc<BackgroundGeometry>> {
    let (spacing, lo, hi) = cfg.chart();
    let grid = Arc::new(RadialGrid::new(spacing, lo, hi, cfg.grid.points)?);
    Ok(Arc::new(instantiate(&cfg.geometry, grid)?))
}

pub fn initial_metric(cfg: &ExperimentConfig, bg: &BackgroundGeometry) -> Result<Option<MetricField>> {
    if cfg.initial == InitialData::Background {
        return Ok(None);
    }
    let r = bg.grid().radii();
    let comps = bg
        .metric()
        .comps()
        .iter()
        .zip(r)
        .map(|(g, &r)| g.scale((2.0 * cfg.initial.conformal_exponent(r)).exp()))
        .collect();
    Ok(Some(MetricField::new(bg.grid().clone(), comps)?))
}

/// Solve the configured exhaustion and certify it.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Option<ConvergenceReport>> {
    let Some(x) = &cfg.exhaustion else {
        return Ok(None);
    };
    let schedule = build_exhaustion(&x.params())?;
    let bg = instantiate(&cfg.geometry, schedule.master_grid().clone())?;
    let runs = run_exhaustion(&schedule, &bg, &cfg.step)?;
    Ok(Some(diagonal_convergence(&schedule, &runs, x.max_order, x.tolerance)?))
}

/// Audit a stored or freshly computed flow. `snapshots` must be in time order.
pub fn build_report(
    cfg: &ExperimentConfig,
    bg: &BackgroundGeometry,
    snapshots: &[FlowState],
    convergence: Option<ConvergenceReport>,
) -> Result<(ExperimentReport, BTreeMap<String, Vec<u8>>)> {
    let last = snapshots.last().ok_or_else(|| Error::InvalidArgument("no snapshots to audit".into()))?;
    let a = &cfg.audit;

    let samples: Vec<EigenSample> = snapshots.iter().map(EigenSample::from).collect();
    let mut deltas = a.deltas.clone();
    deltas.sort_by(f64::total_cmp);
    let entries = uniform_equivalence_window(&samples, &deltas)?;
    let monotone = entries.windows(2).all(|w| w[1].t_emp >= w[0].t_emp);
    let equivalence_window = EquivalenceSection { samples, entries, monotone, pass: monotone };

    let (profiles, fits) = audit_snapshot(last, bg, a.max_order, &a.selection(), a.exponent_slack);
    let mut grouped: BTreeMap<String, Vec<&ShellProfile>> = BTreeMap::new();
    for p in &profiles {
        grouped.entry(format!("profile_{}.csv", p.quantity)).or_default().push(p);
    }
    let files =
        grouped.iter().map(|(name, ps)| Ok((name.clone(), profile_csv(ps)?))).collect::<Result<BTreeMap<_, _>>>()?;
    let entries: Vec<ProfileEntry> = profiles
        .iter()
        .map(|p| ProfileEntry { file: format!("profile_{}.csv", p.quantity), profile: p.clone() })
        .collect();
    let pass = entries.iter().all(|e| e.profile.norm.iter().all(|x| x.is_finite() && *x >= 0.0));
    let profiles = ProfilesSection { entries, pass };

    let pass = !fits.iter().any(|f| f.status == ClaimStatus::Fail);
    let fits = FitsSection { exponent_slack: a.exponent_slack, entries: fits, pass };

    let proof_device_audits = if a.proof_devices { Some(proof_device_suite()?) } else { None };

    let pass = equivalence_window.pass
        && profiles.pass
        && fits.pass
        && proof_device_audits.as_ref().map_or(true, |p| p.pass)
        && convergence.as_ref().map_or(true, |c| c.pass);
    let report = ExperimentReport {
        name: cfg.name().into(),
        geometry: cfg.geometry.name().into(),
        t_final: last.t,
        equivalence_window,
        profiles,
        fits,
        proof_device_audits,
        convergence_report: convergence,
        pass,
    };
    Ok((report, files))
}

fn manifest(cfg: &ExperimentConfig, bg: &BackgroundGeometry, status: &str, files: Vec<FileEntry>) -> Result<Manifest> {
    let (spacing, _, _) = cfg.chart();
    Ok(Manifest {
        format_version: FORMAT_VERSION,
        name: cfg.name().into(),
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(&to_json(&cfg.identity())?),
        grid: GridInfo { points: bg.len(), spacing, inner: bg.grid().inner_radius(), outer: bg.grid().outer_radius() },
        status: status.into(),
        files,
    })
}

/// Run the configured flow and every audit, writing artifacts into `cfg.output.dir`.
///
/// Solver failures (SPD guard, non-finite values) are not returned as `Err`: they are
/// recorded in `error.json` and reflected in [`RunOutcome::exit_code`]. `Err` means the
/// run could not be set up or its artifacts could not be written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    let bg = build_background(cfg)?;
    let problem = DirichletProblem::new(bg.clone(), initial_metric(cfg, &bg)?, cfg.boundary.unwrap_or_default())?;

    let mut snapshots = Vec::new();
    let solved = run_dirichlet_observed(&problem, &cfg.step, |s| snapshots.push(s.clone()));

    let mut out = ArtifactWriter::new(&dir)?;
    out.write("config.json", &to_json(&cfg.identity())?)?;
    out.write("snapshots.csv", &snapshots_csv(&snapshots, bg.metric())?)?;

    let failure = match solved {
        Ok(_) => match run_convergence(cfg) {
            Ok(conv) => {
                let (report, files) = build_report(cfg, &bg, &snapshots, conv)?;
                for (name, bytes) in &files {
                    out.write(name, bytes)?;
                }
                out.write("report.json", &to_json(&report)?)?;
                let m = manifest(cfg, &bg, "completed", out.files.clone())?;
                write_manifest(&dir, &m)?;
                return Ok(RunOutcome { dir, manifest: m, report: Some(report), error: None });
            }
            Err(e) => e,
        },
        Err(e) => e,
    };
    let doc = ErrorDocument::new(&failure, snapshots.last().map(|s| s.t));
    out.write("error.json", &to_json(&doc)?)?;
    let m = manifest(cfg, &bg, "aborted", out.files.clone())?;
    write_manifest(&dir, &m)?;
    Ok(RunOutcome { dir, manifest: m, report: None, error: Some(doc) })
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let path = dir.join("manifest.json");
    std::fs::write(&path, to_json(m)?).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

/// Rebuild flow states from a snapshot CSV written for `cfg`.
pub fn load_snapshots(cfg: &ExperimentConfig, csv: &Path) -> Result<(Arc<BackgroundGeometry>, Vec<FlowState>)> {
    let bg = build_background(cfg)?;
    let rows = read_snapshots_csv(csv)?;
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no snapshots", csv.display())));
    }
    let radii = bg.grid().radii();
    let mut states = Vec::with_capacity(rows.len());
    for (t, r, g) in rows {
        let same = r.len() == radii.len() && r.iter().zip(radii).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs());
        if !same {
            return Err(Error::Shape(format!("snapshot at t = {t} is not on the configured grid")));
        }
        let g = MetricField::new_unchecked(bg.grid().clone(), g)?;
        let lam = relative_eigenvalues_between(&g, bg.metric())?;
        let diagnostics = Diagnostics {
            lambda_min: lam.iter().map(|l| l[0]).fold(f64::INFINITY, f64::min),
            lambda_max: lam.iter().map(|l| l[1]).fold(f64::NEG_INFINITY, f64::max),
            max_deturck: None,
        };
        states.push(FlowState { t, g, step_count: 0, diagnostics });
    }
    states.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok((bg, states))
}

/// Re-run the auditors on stored snapshots; the exhaustion study is not repeated.
pub fn audit_stored(cfg: &ExperimentConfig, csv: &Path) -> Result<ExperimentReport> {
    let (bg, states) = load_snapshots(cfg, csv)?;
    Ok(build_report(cfg, &bg, &states, None)?.0)
}
