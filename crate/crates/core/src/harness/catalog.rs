//! Built-in geometries and the audits that apply to each.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, Spacing};
use crate::models::{instantiate, GeometrySpec, PerturbationProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    /// Representative parameters used by `describe` and by `rdt run --geometry`.
    pub spec: GeometrySpec,
    pub audits: &'static [&'static str],
}

const COMMON: &[&str] = &["equivalence_window", "proof_device_audits"];
const SINGULAR: &[&str] = &["equivalence_window", "profiles", "fits", "proof_device_audits", "convergence_report"];

/// Stable ordering: complete models first, then the singular ones.
pub fn list_experiments() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "flat_plane",
            summary: "dr² + r²dθ² on an annulus; stationary",
            spec: GeometrySpec::FlatPlane,
            audits: COMMON,
        },
        CatalogEntry {
            name: "sphere",
            summary: "round sphere of radius R; homothety (1 − 2t/R²)g̃",
            spec: GeometrySpec::RoundSphere { radius: 1.0 },
            audits: COMMON,
        },
        CatalogEntry {
            name: "hyperbolic_plane",
            summary: "dr² + sinh²r dθ²; homothety (1 + 2t)g̃",
            spec: GeometrySpec::HyperbolicPlane,
            audits: COMMON,
        },
        CatalogEntry {
            name: "hyperbolic_cusp",
            summary: "dr² + e^{−2r}dθ²; homothety (1 + 2t)g̃",
            spec: GeometrySpec::HyperbolicCusp,
            audits: COMMON,
        },
        CatalogEntry {
            name: "flat_cone",
            summary: "dr² + β²r²dθ², singular tip at r = 0; stationary",
            spec: GeometrySpec::FlatCone { beta: 0.5 },
            audits: SINGULAR,
        },
        CatalogEntry {
            name: "perturbed_cone",
            summary: "e^{2u}(dr² + β²r²dθ²), u = A r² sin(log r); curvature bounded near the tip",
            spec: GeometrySpec::PerturbedCone {
                beta: 0.5,
                amplitude: 0.05,
                profile: PerturbationProfile::BoundedCurvature,
            },
            audits: SINGULAR,
        },
    ]
}

pub fn lookup(name: &str) -> Result<CatalogEntry> {
    let all = list_experiments();
    all.iter().find(|e| e.name == name).cloned().ok_or_else(|| Error::UnknownGeometry {
        name: name.into(),
        valid: all.iter().map(|e| e.name).collect::<Vec<_>>().join(", "),
    })
}

/// Parameters, default chart and the curvature hypothesis constants realized on it.
pub fn describe(name: &str) -> Result<String> {
    let e = lookup(name)?;
    let (lo, hi) = e.spec.default_chart();
    let spacing = if e.spec.is_incomplete() { Spacing::LogUniform } else { Spacing::Uniform };
    let grid = Arc::new(RadialGrid::new(spacing, lo, hi, 256)?);
    let bg = instantiate(&e.spec, grid)?;
    let b = bg.bounds();

    let mut out = String::new();
    let spec = serde_json::to_string(&e.spec).map_err(|err| Error::Io(err.to_string()))?;
    let _ = writeln!(out, "{}: {}", e.name, e.summary);
    let _ = writeln!(out, "  spec:      {spec}");
    let _ = writeln!(out, "  chart:     [{lo}, {hi}] ({spacing:?}, 256 points)");
    let _ = writeln!(out, "  complete:  {}", bg.is_complete());
    let _ = writeln!(out, "  k0 = sup |R̃m|²      = {:.6e}", b.k0);
    let _ = writeln!(out, "  c_1 = sup |∇̃R̃m|     = {:.6e}", b.c[1]);
    let _ = writeln!(out, "  c_2 = sup |∇̃²R̃m|    = {:.6e}", b.c[2]);
    if let Some(w) = b.weighted {
        let _ = writeln!(out, "  sup ρ^s|∇̃^s R̃m|     = {:.6e}, {:.6e}, {:.6e}", w[0], w[1], w[2]);
    }
    let _ = writeln!(out, "  audits:    {}", e.audits.join(", "));
    Ok(out)
}
