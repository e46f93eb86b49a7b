//! Analytic background geometries with closed-form jets, curvature and distance data.
//!
//! Every model is a warped product `e^{2a(r)} dr² + e^{2b(r)} dθ²`; the model supplies
//! `a`, `b` and their first two derivatives, from which the background jets (and hence
//! `Γ̃`, `R̃m`) follow exactly.

mod oracle;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BackgroundGeometry, MetricJet};
use crate::grid::RadialGrid;
use crate::linalg::Sym2;
use crate::tensor::MetricField;

pub use oracle::{conformal_scalar_oracle, OracleControl};

/// Radial profile `u(r)` of the conformal perturbation of a cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationProfile {
    /// `u = A r² sin(log r)`: bounded curvature with `|∇̃^s R̃m| = O(ρ^{-s})`.
    #[default]
    BoundedCurvature,
    /// `u = A sin(log r)`: `|u′| = O(1/ρ)`, `|u″| = O(1/ρ²)`, curvature `O(ρ^{-2})`.
    LogSine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    FlatPlane,
    FlatCone {
        beta: f64,
    },
    #[serde(rename = "sphere")]
    RoundSphere {
        #[serde(default = "one")]
        radius: f64,
    },
    HyperbolicPlane,
    HyperbolicCusp,
    PerturbedCone {
        beta: f64,
        amplitude: f64,
        #[serde(default)]
        profile: PerturbationProfile,
    },
}

fn one() -> f64 {
    1.0
}

/// Warp functions `(a, a′, a″, b, b′, b″)` at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Warp {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl Warp {
    pub fn jet(&self) -> MetricJet {
        let comp = |f: &[f64; 3]| {
            let e = (2.0 * f[0]).exp();
            (e, 2.0 * f[1] * e, (2.0 * f[2] + 4.0 * f[1] * f[1]) * e)
        };
        let (grr, grr1, grr2) = comp(&self.a);
        let (gtt, gtt1, gtt2) = comp(&self.b);
        MetricJet { g: Sym2::diag(grr, gtt), d1: Sym2::diag(grr1, gtt1), d2: Sym2::diag(grr2, gtt2) }
    }

    /// Gaussian curvature `K = −e^{−2a}(b″ + b′² − a′b′)`.
    pub fn gaussian_curvature(&self) -> f64 {
        let [a, a1, _] = self.a;
        let [_, b1, b2] = self.b;
        -(-2.0 * a).exp() * (b2 + b1 * b1 - a1 * b1)
    }
}

impl GeometrySpec {
    /// Stable catalogue name.
    pub fn name(&self) -> &'static str {
        match self {
            GeometrySpec::FlatPlane => "flat_plane",
            GeometrySpec::FlatCone { .. } => "flat_cone",
            GeometrySpec::RoundSphere { .. } => "sphere",
            GeometrySpec::HyperbolicPlane => "hyperbolic_plane",
            GeometrySpec::HyperbolicCusp => "hyperbolic_cusp",
            GeometrySpec::PerturbedCone { .. } => "perturbed_cone",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match *self {
            GeometrySpec::FlatCone { beta } | GeometrySpec::PerturbedCone { beta, .. }
                if !(beta > 0.0 && beta <= 1.0) =>
            {
                bad(format!("cone angle beta must be in (0,1], got {beta}"))
            }
            GeometrySpec::PerturbedCone { amplitude, .. } if !amplitude.is_finite() => {
                bad("amplitude must be finite".into())
            }
            GeometrySpec::RoundSphere { radius } if !(radius > 0.0 && radius.is_finite()) => {
                bad(format!("sphere radius must be positive, got {radius}"))
            }
            _ => Ok(()),
        }
    }

    /// Whether the model has a singular point at `r = 0` at finite distance.
    pub fn is_incomplete(&self) -> bool {
        matches!(self, GeometrySpec::FlatCone { .. } | GeometrySpec::PerturbedCone { .. })
    }

    /// Open interval of admissible radial coordinates.
    pub fn chart_limits(&self) -> (f64, f64) {
        match *self {
            GeometrySpec::RoundSphere { radius } => (0.0, PI * radius),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Suggested working chart `[ρ_min, R_max]`.
    pub fn default_chart(&self) -> (f64, f64) {
        match *self {
            GeometrySpec::FlatPlane => (0.5, 2.0),
            GeometrySpec::FlatCone { .. } | GeometrySpec::PerturbedCone { .. } => (0.05, 1.6),
            GeometrySpec::RoundSphere { radius } => (0.25 * PI * radius, 0.75 * PI * radius),
            GeometrySpec::HyperbolicPlane => (0.5, 2.5),
            GeometrySpec::HyperbolicCusp => (0.5, 3.0),
        }
    }

    pub fn warp(&self, r: f64) -> Warp {
        let zero = [0.0; 3];
        match *self {
            GeometrySpec::FlatPlane => Warp { a: zero, b: [r.ln(), 1.0 / r, -1.0 / (r * r)] },
            GeometrySpec::FlatCone { beta } => Warp { a: zero, b: [(beta * r).ln(), 1.0 / r, -1.0 / (r * r)] },
            GeometrySpec::RoundSphere { radius } => {
                let x = r / radius;
                let s = x.sin();
                Warp { a: zero, b: [(radius * s).ln(), x.cos() / (s * radius), -1.0 / (radius * radius * s * s)] }
            }
            GeometrySpec::HyperbolicPlane => {
                let s = r.sinh();
                Warp { a: zero, b: [s.ln(), r.cosh() / s, -1.0 / (s * s)] }
            }
            GeometrySpec::HyperbolicCusp => Warp { a: zero, b: [-r, -1.0, 0.0] },
            GeometrySpec::PerturbedCone { beta, amplitude, profile } => {
                let u = profile_jet(profile, amplitude, r);
                Warp { a: u, b: [u[0] + (beta * r).ln(), u[1] + 1.0 / r, u[2] - 1.0 / (r * r)] }
            }
        }
    }

    /// Closed-form Gaussian curvature at radius `r`.
    pub fn gaussian_curvature(&self, r: f64) -> f64 {
        match *self {
            GeometrySpec::FlatPlane | GeometrySpec::FlatCone { .. } => 0.0,
            GeometrySpec::RoundSphere { radius } => 1.0 / (radius * radius),
            GeometrySpec::HyperbolicPlane | GeometrySpec::HyperbolicCusp => -1.0,
            GeometrySpec::PerturbedCone { .. } => self.warp(r).gaussian_curvature(),
        }
    }

    /// Constant curvature of the homothetic models, if any.
    pub fn constant_curvature(&self) -> Option<f64> {
        match *self {
            GeometrySpec::RoundSphere { radius } => Some(1.0 / (radius * radius)),
            GeometrySpec::HyperbolicPlane | GeometrySpec::HyperbolicCusp => Some(-1.0),
            _ => None,
        }
    }
}

/// `(u, u′, u″)` of the perturbation profile.
pub fn profile_jet(profile: PerturbationProfile, amp: f64, r: f64) -> [f64; 3] {
    let l = r.ln();
    let (s, c) = l.sin_cos();
    match profile {
        PerturbationProfile::BoundedCurvature => [amp * r * r * s, amp * r * (2.0 * s + c), amp * (s + 3.0 * c)],
        PerturbationProfile::LogSine => [amp * s, amp * c / r, -amp * (s + c) / (r * r)],
    }
}

fn check_chart(spec: &GeometrySpec, grid: &RadialGrid) -> Result<()> {
    let (lo, hi) = spec.chart_limits();
    if !(grid.inner_radius() > lo && grid.outer_radius() < hi) {
        return Err(Error::Domain(format!(
            "grid [{}, {}] leaves the {} chart ({lo}, {hi})",
            grid.inner_radius(),
            grid.outer_radius(),
            spec.name()
        )));
    }
    Ok(())
}

/// Analytic background on `grid`.
pub fn instantiate(spec: &GeometrySpec, grid: Arc<RadialGrid>) -> Result<BackgroundGeometry> {
    spec.validate()?;
    check_chart(spec, &grid)?;
    let jets = grid.radii().iter().map(|&r| spec.warp(r).jet()).collect();
    let rho = distance_to_singularity(spec, &grid)?;
    BackgroundGeometry::from_jets(grid, jets, rho)
}

/// Radial distance to the singular point; `+∞` on complete models.
pub fn distance_to_singularity(spec: &GeometrySpec, grid: &RadialGrid) -> Result<Vec<f64>> {
    spec.validate()?;
    let r = grid.radii();
    Ok(match *spec {
        GeometrySpec::FlatCone { .. } => r.to_vec(),
        GeometrySpec::PerturbedCone { amplitude, profile, .. } => {
            let f = |s: f64| profile_jet(profile, amplitude, s)[0].exp();
            let mut out = Vec::with_capacity(r.len());
            let mut acc = integrate_from_zero(&f, r[0]);
            out.push(acc);
            for w in r.windows(2) {
                acc += gauss_legendre(&f, w[0], w[1], 4);
                out.push(acc);
            }
            out
        }
        _ => vec![f64::INFINITY; r.len()],
    })
}

const GL_NODES: [f64; 5] =
    [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// `∫_0^r f` over dyadic shells, which resolves oscillation in `log r` near the tip.
fn integrate_from_zero(f: &impl Fn(f64) -> f64, r: f64) -> f64 {
    let mut total = 0.0;
    let mut hi = r;
    for _ in 0..60 {
        let lo = 0.5 * hi;
        total += gauss_legendre(f, lo, hi, 2);
        hi = lo;
    }
    total + hi * f(0.5 * hi)
}

/// Exact flow `c(t) g̃` with `c(t) = 1 − 2Kt` on constant-curvature models.
pub fn exact_homothety_solution(spec: &GeometrySpec, grid: Arc<RadialGrid>, t: f64) -> Result<MetricField> {
    let factor = homothety_factor(spec, t)?;
    check_chart(spec, &grid)?;
    MetricField::from_fn(grid, |r| spec.warp(r).jet().g.scale(factor))
}

pub fn homothety_factor(spec: &GeometrySpec, t: f64) -> Result<f64> {
    let k =
        spec.constant_curvature().ok_or_else(|| Error::Domain(format!("{} has no homothety solution", spec.name())))?;
    let c = 1.0 - 2.0 * k * t;
    if !(c > 0.0) {
        return Err(Error::Domain(format!("homothety solution of {} degenerates at t = {}", spec.name(), 0.5 / k)));
    }
    Ok(c)
}
