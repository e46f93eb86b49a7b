//! On-disk artifacts: snapshot and profile CSVs, the estimate report, the manifest and
//! the structured error document. Floats in CSV use `{:.16e}` (17 significant digits);
//! JSON uses shortest round-trip formatting. Nothing time- or host-dependent is written.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{EigenSample, FitRecord, ShellProfile, WindowEntry};
use crate::barriers::ProofDeviceReport;
use crate::error::{Error, Result};
use crate::exhaustion::ConvergenceReport;
use crate::flow::FlowState;
use crate::geometry::relative_eigenvalues_between;
use crate::linalg::Sym2;
use crate::tensor::MetricField;

pub const SNAPSHOT_COLUMNS: [&str; 7] = ["t", "r", "g_rr", "g_rtheta", "g_thetatheta", "lambda_min", "lambda_max"];
pub const PROFILE_COLUMNS: [&str; 4] = ["t", "rho", "order", "norm"];
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceSection {
    /// Extreme relative eigenvalues of every snapshot.
    pub samples: Vec<EigenSample>,
    pub entries: Vec<WindowEntry>,
    /// `T_emp` nondecreasing in `δ`.
    pub monotone: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub file: String,
    #[serde(flatten)]
    pub profile: ShellProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilesSection {
    pub entries: Vec<ProfileEntry>,
    /// Every norm finite and nonnegative.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitsSection {
    pub exponent_slack: f64,
    pub entries: Vec<FitRecord>,
    /// No applicable fit failed.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub geometry: String,
    pub t_final: f64,
    pub equivalence_window: EquivalenceSection,
    pub profiles: ProfilesSection,
    pub fits: FitsSection,
    /// `null` when disabled in the config.
    pub proof_device_audits: Option<ProofDeviceReport>,
    /// `null` without an exhaustion block in the config.
    pub convergence_report: Option<ConvergenceReport>,
    /// Conjunction of every section flag that is present.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub points: usize,
    pub spacing: crate::grid::Spacing,
    pub inner: f64,
    pub outer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub name: String,
    pub package: String,
    pub version: String,
    pub config_sha256: String,
    pub grid: GridInfo,
    /// `completed` or `aborted`.
    pub status: String,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDocument {
    pub status: String,
    pub kind: String,
    pub message: String,
    pub t: Option<f64>,
    pub index: Option<usize>,
    pub eigenvalue: Option<f64>,
    /// Time of the last snapshot written before the abort.
    pub last_snapshot_t: Option<f64>,
}

impl ErrorDocument {
    pub fn new(e: &Error, last_snapshot_t: Option<f64>) -> Self {
        let inner = match e {
            Error::Member { source, .. } => source.as_ref(),
            other => other,
        };
        let (t, index, eigenvalue) = match *inner {
            Error::SpdViolation { t, index, eigenvalue } => (Some(t), Some(index), Some(eigenvalue)),
            Error::NonFinite { t, index } => (Some(t), Some(index), None),
            Error::NotPositiveDefinite { index, eigenvalue } => (None, Some(index), Some(eigenvalue)),
            _ => (None, None, None),
        };
        ErrorDocument {
            status: "aborted".into(),
            kind: e.kind().into(),
            message: e.to_string(),
            t,
            index,
            eigenvalue,
            last_snapshot_t,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// One row per snapshot and grid point; eigenvalues are relative to `g̃`.
pub fn snapshots_csv(snapshots: &[FlowState], background: &MetricField) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SNAPSHOT_COLUMNS).map_err(io)?;
    let r = background.grid().radii();
    for s in snapshots {
        let lam = relative_eigenvalues_between(&s.g, background)?;
        for (i, g) in s.g.comps().iter().enumerate() {
            w.write_record([fmt(s.t), fmt(r[i]), fmt(g.xx), fmt(g.xy), fmt(g.yy), fmt(lam[i][0]), fmt(lam[i][1])])
                .map_err(io)?;
        }
    }
    w.into_inner().map_err(io)
}

/// Parse a snapshot CSV back into `(t, r, g)` per snapshot, in file order.
pub fn read_snapshots_csv(path: &Path) -> Result<Vec<(f64, Vec<f64>, Vec<Sym2>)>> {
    let mut rd = csv::Reader::from_path(path).map_err(io)?;
    let header: Vec<String> = rd.headers().map_err(io)?.iter().map(str::to_string).collect();
    if header != SNAPSHOT_COLUMNS {
        return Err(Error::Shape(format!("unexpected snapshot columns {header:?}")));
    }
    let mut out: Vec<(f64, Vec<f64>, Vec<Sym2>)> = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(io)?;
        let v = rec
            .iter()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Io(format!("row {}: {e}", line + 2)))?;
        let (t, r, g) = (v[0], v[1], Sym2 { xx: v[2], xy: v[3], yy: v[4] });
        match out.last_mut() {
            Some(last) if last.0 == t => {
                last.1.push(r);
                last.2.push(g);
            }
            _ => out.push((t, vec![r], vec![g])),
        }
    }
    Ok(out)
}

/// All profiles of one quantity, long format.
pub fn profile_csv(profiles: &[&ShellProfile]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PROFILE_COLUMNS).map_err(io)?;
    for p in profiles {
        for (rho, norm) in p.rho.iter().zip(&p.norm) {
            w.write_record([fmt(p.t), fmt(*rho), p.order.to_string(), fmt(*norm)]).map_err(io)?;
        }
    }
    w.into_inner().map_err(io)
}

pub fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(io)?;
    s.push(b'\n');
    Ok(s)
}

/// Collects written files so the manifest can list them with their digests.
#[derive(Debug)]
pub struct ArtifactWriter<'a> {
    dir: &'a Path,
    pub files: Vec<FileEntry>,
}

impl<'a> ArtifactWriter<'a> {
    pub fn new(dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(ArtifactWriter { dir, files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(FileEntry { name: name.into(), sha256: sha256_hex(bytes) });
        Ok(())
    }
}
