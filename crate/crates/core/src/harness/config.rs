//! Experiment configuration: a JSON document, schema-checked and then resolved so that
//! every default is explicit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exhaustion::ExhaustionParams;
use crate::flow::{BoundaryData, StepControl};
use crate::grid::{Spacing, MIN_POINTS};
use crate::models::GeometrySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to the geometry name.
    #[serde(default)]
    pub name: Option<String>,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub step: StepControl,
    #[serde(default)]
    pub initial: InitialData,
    /// Defaults to the homothety trace on constant-curvature models, `g̃` otherwise.
    #[serde(default)]
    pub boundary: Option<BoundaryData>,
    #[serde(default)]
    pub exhaustion: Option<ExhaustionConfig>,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    /// Defaults to log-uniform on incomplete models, uniform otherwise.
    pub spacing: Option<Spacing>,
    pub rho_min: Option<f64>,
    pub r_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { points: 256, spacing: None, rho_min: None, r_max: None }
    }
}

/// Initial metric `g(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    #[default]
    Background,
    /// `g(0) = e^{2u} g̃` with `u = amplitude · exp(−(r − center)²/width²)`.
    ConformalBump { amplitude: f64, center: f64, width: f64 },
}

impl InitialData {
    pub fn conformal_exponent(&self, r: f64) -> f64 {
        match *self {
            InitialData::Background => 0.0,
            InitialData::ConformalBump { amplitude, center, width } => {
                amplitude * (-((r - center) / width).powi(2)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustionConfig {
    pub rho0: f64,
    pub q: f64,
    pub k_max: usize,
    pub r_max: f64,
    pub window: [f64; 2],
    #[serde(default = "default_points_per_step")]
    pub points_per_step: usize,
    /// Highest derivative order whose gaps are certified.
    #[serde(default = "one")]
    pub max_order: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_points_per_step() -> usize {
    32
}

fn one() -> usize {
    1
}

fn default_tolerance() -> f64 {
    1e-6
}

impl ExhaustionConfig {
    pub fn params(&self) -> ExhaustionParams {
        ExhaustionParams {
            rho0: self.rho0,
            q: self.q,
            k_max: self.k_max,
            r_max: self.r_max,
            window: self.window,
            points_per_step: self.points_per_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub deltas: Vec<f64>,
    pub max_order: usize,
    pub exponent_slack: f64,
    pub inner_collar: f64,
    pub outer_collar: f64,
    pub proof_devices: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            deltas: vec![0.05, 0.1, 0.2],
            max_order: 2,
            exponent_slack: crate::audit::SLOPE_SLACK,
            inner_collar: 0.0,
            outer_collar: 0.2,
            proof_devices: true,
        }
    }
}

impl AuditConfig {
    pub fn selection(&self) -> crate::audit::ShellSelection {
        crate::audit::ShellSelection { inner_collar: self.inner_collar, outer_collar: self.outer_collar }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("rdt-out") }
    }
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

/// Read, schema-check, resolve defaults and validate.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        config_error(if key == "." { "<root>" } else { &key }, e.inner().to_string())
    })?;
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Minimal config: one geometry, everything else default.
    pub fn for_geometry(geometry: GeometrySpec) -> ExperimentConfig {
        ExperimentConfig {
            name: None,
            geometry,
            grid: GridConfig::default(),
            step: StepControl::default(),
            initial: InitialData::Background,
            boundary: None,
            exhaustion: None,
            audit: AuditConfig::default(),
            output: OutputConfig::default(),
        }
        .resolved()
    }

    /// Fill every geometry-dependent default. Idempotent.
    pub fn resolved(mut self) -> ExperimentConfig {
        let g = self.geometry;
        let (lo, hi) = g.default_chart();
        self.name.get_or_insert_with(|| g.name().to_string());
        self.grid.rho_min.get_or_insert(lo);
        self.grid.r_max.get_or_insert(hi);
        self.grid.spacing.get_or_insert(if g.is_incomplete() { Spacing::LogUniform } else { Spacing::Uniform });
        self.boundary.get_or_insert(match g.constant_curvature() {
            Some(k) => BoundaryData::Scaled { rate: -2.0 * k },
            None => BoundaryData::Background,
        });
        self
    }

    /// The config with the output location reset: what is stored and hashed, so that
    /// runs differing only in where they write produce identical artifacts.
    pub fn identity(&self) -> ExperimentConfig {
        ExperimentConfig { output: OutputConfig::default(), ..self.clone() }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.geometry.name())
    }

    /// `(spacing, ρ_min, R_max)` after resolution.
    pub fn chart(&self) -> (Spacing, f64, f64) {
        let (lo, hi) = self.geometry.default_chart();
        (self.grid.spacing.unwrap_or(Spacing::Uniform), self.grid.rho_min.unwrap_or(lo), self.grid.r_max.unwrap_or(hi))
    }

    /// Semantic checks; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate().map_err(|e| config_error("geometry", e.to_string()))?;

        let (_, lo, hi) = self.chart();
        let (cl, ch) = self.geometry.chart_limits();
        if self.grid.points < MIN_POINTS {
            return Err(config_error("grid.points", format!("must be at least {MIN_POINTS}")));
        }
        if !(lo > cl && lo.is_finite()) {
            return Err(config_error("grid.rho_min", format!("must be in ({cl}, {ch})")));
        }
        if !(hi > lo && hi < ch) {
            return Err(config_error("grid.r_max", format!("must be in (rho_min, {ch})")));
        }

        let s = &self.step;
        if !(s.cfl_fraction > 0.0 && s.cfl_fraction <= 1.0) {
            return Err(config_error("step.cfl_fraction", "must be in (0,1]"));
        }
        if !(s.max_dt > 0.0 && s.max_dt.is_finite()) {
            return Err(config_error("step.max_dt", "must be positive"));
        }
        if !(s.t_final >= 0.0 && s.t_final.is_finite()) {
            return Err(config_error("step.t_final", "must be finite and nonnegative"));
        }
        if let Some(c) = s.snapshot_cadence {
            if !(c > 0.0 && c.is_finite()) {
                return Err(config_error("step.snapshot_cadence", "must be positive"));
            }
        }
        if s.max_steps == 0 {
            return Err(config_error("step.max_steps", "must be positive"));
        }

        if let InitialData::ConformalBump { amplitude, center, width } = self.initial {
            if !(amplitude.is_finite() && center.is_finite() && width > 0.0) {
                return Err(config_error("initial", "bump needs finite amplitude/center and width > 0"));
            }
        }
        if let Some(BoundaryData::Scaled { rate }) = self.boundary {
            if !rate.is_finite() {
                return Err(config_error("boundary.rate", "must be finite"));
            }
        }

        if let Some(x) = &self.exhaustion {
            let [a, b] = x.window;
            if !(a < b) {
                return Err(config_error("exhaustion.window", "window must be increasing"));
            }
            if !(x.q > 0.0 && x.q < 1.0) {
                return Err(config_error("exhaustion.q", "must be in (0,1)"));
            }
            if x.k_max < 1 {
                return Err(config_error("exhaustion.k_max", "must be at least 1"));
            }
            if !(x.rho0 > cl && x.r_max > x.rho0 && x.r_max < ch) {
                return Err(config_error("exhaustion.r_max", "need 0 < rho0 < r_max inside the chart"));
            }
            if !(a > x.rho0 && b < x.r_max) {
                return Err(config_error(
                    "exhaustion.window",
                    format!("window must lie inside D_0 = [{}, {}]", x.rho0, x.r_max),
                ));
            }
            if x.points_per_step < 2 {
                return Err(config_error("exhaustion.points_per_step", "must be at least 2"));
            }
            if !(x.tolerance > 0.0) {
                return Err(config_error("exhaustion.tolerance", "must be positive"));
            }
            if !(1..=2).contains(&x.max_order) {
                return Err(config_error("exhaustion.max_order", "must be 1 or 2"));
            }
        }

        let a = &self.audit;
        if let Some(d) = a.deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return Err(config_error("audit.deltas", format!("every delta must be in (0,1), got {d}")));
        }
        if !(1..=2).contains(&a.max_order) {
            return Err(config_error("audit.max_order", "must be 1 or 2"));
        }
        if !(a.exponent_slack >= 0.0 && a.exponent_slack.is_finite()) {
            return Err(config_error("audit.exponent_slack", "must be finite and nonnegative"));
        }
        if !(a.inner_collar >= 0.0) || !(a.outer_collar >= 0.0) {
            return Err(config_error("audit.outer_collar", "collars must be nonnegative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        match parse_config_str(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_flat_cone_gets_defaults() {
        let c = parse_config_str(r#"{"geometry": {"kind": "flat_cone", "beta": 0.5}}"#).unwrap();
        assert_eq!(c.name(), "flat_cone");
        assert_eq!(c.chart(), (Spacing::LogUniform, 0.05, 1.6));
        assert_eq!(c.grid.points, 256);
        assert_eq!(c.step, StepControl::default());
        assert_eq!(c.boundary, Some(BoundaryData::Background));
        assert_eq!(c.audit.deltas, vec![0.05, 0.1, 0.2]);
    }

    #[test]
    fn sphere_defaults_to_homothety_boundary() {
        let c = parse_config_str(r#"{"geometry": {"kind": "sphere"}}"#).unwrap();
        assert_eq!(c.boundary, Some(BoundaryData::Scaled { rate: -2.0 }));
        assert_eq!(c.chart().0, Spacing::Uniform);
    }

    #[test]
    fn contract_violations_name_the_key() {
        let e = parse_config_str(r#"{"geometry": {"kind": "flat_plane"}, "step": {"cfl_fraction": 1.5}}"#).unwrap_err();
        assert!(e.to_string().contains("must be in (0,1]"), "{e}");
        assert_eq!(
            key_of(r#"{"geometry": {"kind": "flat_plane"}, "step": {"cfl_fraction": 1.5}}"#),
            "step.cfl_fraction"
        );

        let w = r#"{"geometry": {"kind": "flat_cone", "beta": 0.5},
                    "exhaustion": {"rho0": 0.2, "q": 0.5, "k_max": 3, "r_max": 1.6, "window": [0.5, 0.4]}}"#;
        let e = parse_config_str(w).unwrap_err();
        assert!(e.to_string().contains("window must be increasing"), "{e}");

        let out = r#"{"geometry": {"kind": "flat_cone", "beta": 0.5},
                      "exhaustion": {"rho0": 0.2, "q": 0.5, "k_max": 3, "r_max": 1.6, "window": [0.1, 0.8]}}"#;
        assert_eq!(key_of(out), "exhaustion.window");
    }

    #[test]
    fn schema_violations_name_the_key() {
        assert_eq!(key_of(r#"{"geometry": {"kind": "flat_plane"}, "bogus": 1}"#), "bogus");
        assert_eq!(key_of(r#"{"geometry": {"kind": "flat_plane"}, "grid": {"points": "many"}}"#), "grid.points");
        assert_eq!(key_of(r#"{"geometry": {"kind": "flat_plane"}, "step": {"cfl": 0.5}}"#), "step.cfl");
        let e = parse_config_str(r#"{"geometry": {"kind": "flat_plane"}, "grid": {"points": "many"}}"#).unwrap_err();
        assert!(e.to_string().contains("expected usize"), "{e}");
        assert!(parse_config_str(r#"{"geometry": {"kind": "klein_bottle"}}"#).is_err());
        assert!(parse_config_str(r#"{"grid": {}}"#).is_err());
    }

    #[test]
    fn chart_is_checked() {
        assert_eq!(key_of(r#"{"geometry": {"kind": "sphere"}, "grid": {"r_max": 4.0}}"#), "grid.r_max");
        assert_eq!(
            key_of(r#"{"geometry": {"kind": "flat_cone", "beta": 0.5}, "grid": {"rho_min": 0.0}}"#),
            "grid.rho_min"
        );
        assert_eq!(key_of(r#"{"geometry": {"kind": "flat_cone", "beta": 1.5}}"#), "geometry");
    }

    #[test]
    fn missing_file() {
        assert!(matches!(parse_config(Path::new("/nonexistent/rdt.json")), Err(Error::Io(_))));
    }
}
