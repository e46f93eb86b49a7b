//! Cutoffs, bump functions, barrier functionals and the scalar inequalities used by the
//! interior estimates, each with a numeric audit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{covariant_derivative, BackgroundGeometry};
use crate::tensor::TensorField;

/// Budgets the cutoff must respect.
pub const ETA_SECOND_BOUND: f64 = 8.0;
pub const ETA_GRADIENT_RATIO: f64 = 16.0;

/// Nonincreasing cutoff `η = 1 − (6x⁵ − 15x⁴ + 10x³)` on `[0, 1]`, `1` before and `0` after.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CutoffProfile;

impl CutoffProfile {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else if x >= 1.0 {
            0.0
        } else {
            1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
        }
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            let y = x * (1.0 - x);
            -30.0 * y * y
        }
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            -60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
        }
    }
}

/// Sampled maxima of the cutoff budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffAudit {
    pub samples: usize,
    pub max_abs_d2: f64,
    /// `max η′²/η` over `{η > 1e−12}`.
    pub max_gradient_ratio: f64,
    /// `min (η′ + 4√η)`; nonnegative when `η′ ≥ −4√η`.
    pub min_sqrt_margin: f64,
    pub max_d1: f64,
    pub pass: bool,
}

/// The concrete cutoff, verified on a dense grid before it is handed out.
pub fn make_eta() -> Result<CutoffProfile> {
    let eta = CutoffProfile;
    let audit = audit_cutoff(&eta, 100_001);
    if !audit.pass {
        return Err(Error::InvalidArgument(format!("cutoff budgets violated: {audit:?}")));
    }
    Ok(eta)
}

/// Check `|η″| ≤ 8`, `η′² ≤ 16η`, `0 ≥ η′ ≥ −4√η` on `samples` points of `[−0.5, 1.5]`,
/// requiring a 5% margin on the first two.
pub fn audit_cutoff(eta: &CutoffProfile, samples: usize) -> CutoffAudit {
    let mut a = CutoffAudit {
        samples,
        max_abs_d2: 0.0,
        max_gradient_ratio: 0.0,
        min_sqrt_margin: f64::INFINITY,
        max_d1: f64::NEG_INFINITY,
        pass: false,
    };
    for i in 0..samples {
        let x = -0.5 + 2.0 * i as f64 / (samples - 1) as f64;
        let (v, d1, d2) = (eta.value(x), eta.d1(x), eta.d2(x));
        a.max_abs_d2 = a.max_abs_d2.max(d2.abs());
        if v > 1e-12 {
            a.max_gradient_ratio = a.max_gradient_ratio.max(d1 * d1 / v);
        }
        a.min_sqrt_margin = a.min_sqrt_margin.min(d1 + 4.0 * v.sqrt());
        a.max_d1 = a.max_d1.max(d1);
    }
    a.pass = a.max_abs_d2 <= 0.95 * ETA_SECOND_BOUND
        && a.max_gradient_ratio <= 0.95 * ETA_GRADIENT_RATIO
        && a.min_sqrt_margin >= 0.0
        && a.max_d1 <= 0.0;
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpVariant {
    /// Plateau `B(x_0, γ + δ/2)`, support `B(x_0, γ + 3δ/4)`.
    Ball,
    /// Distance to a base set: plateau `δ/2`, support `3δ/4`.
    Neighborhood,
    /// Plateau `γ + δ/(m+1)`, width `δ(½(1/(m+1) + 1/m) − 1/(m+1))`.
    Order { m: usize },
}

/// `ξ = η((d − offset)/width)` for a distance `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpFunction {
    #[serde(skip)]
    pub profile: CutoffProfile,
    pub variant: BumpVariant,
    pub gamma: f64,
    pub delta: f64,
    pub offset: f64,
    pub width: f64,
}

impl BumpFunction {
    pub fn value(&self, d: f64) -> f64 {
        self.profile.value((d - self.offset) / self.width)
    }

    /// `dξ/dd`.
    pub fn d1(&self, d: f64) -> f64 {
        self.profile.d1((d - self.offset) / self.width) / self.width
    }

    pub fn d2(&self, d: f64) -> f64 {
        self.profile.d2((d - self.offset) / self.width) / (self.width * self.width)
    }

    pub fn plateau_radius(&self) -> f64 {
        self.offset
    }

    pub fn support_radius(&self) -> f64 {
        self.offset + self.width
    }
}

pub fn make_xi(profile: CutoffProfile, gamma: f64, delta: f64, variant: BumpVariant) -> Result<BumpFunction> {
    if !(delta > 0.0 && delta.is_finite()) || !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid radii gamma = {gamma}, delta = {delta}")));
    }
    let (offset, width) = match variant {
        BumpVariant::Ball => {
            if delta > 1.0 {
                return Err(Error::InvalidArgument(format!("ball variant needs delta <= 1, got {delta}")));
            }
            (gamma + delta / 2.0, delta / 4.0)
        }
        BumpVariant::Neighborhood => (delta / 2.0, delta / 4.0),
        BumpVariant::Order { m } => {
            if m == 0 {
                return Err(Error::InvalidArgument("order variant needs m >= 1".into()));
            }
            let (a, b) = (1.0 / (m + 1) as f64, 1.0 / m as f64);
            (gamma + delta * a, delta * (0.5 * (a + b) - a))
        }
    };
    Ok(BumpFunction { profile, variant, gamma, delta, offset, width })
}

/// `k0^{1/4} coth(k0^{1/4} d)`, with the limit `1/d` at `k0 = 0`.
pub fn hessian_comparison_bound(d: f64, k0: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {d}")));
    }
    if !(k0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("k0 must be nonnegative, got {k0}")));
    }
    let s = k0.sqrt().sqrt();
    if s * d < 1e-8 {
        // coth z = 1/z + z/3 + O(z³)
        return Ok(1.0 / d + s * s * d / 3.0);
    }
    Ok(s / (s * d).tanh())
}

/// `z coth z ≤ 1 + z` on every sample.
pub fn coth_linear_check(samples: &[f64]) -> bool {
    samples.iter().all(|&z| {
        if !(z > 0.0) {
            return false;
        }
        let lhs = if z < 1e-4 { 1.0 + z * z / 3.0 } else { z / z.tanh() };
        lhs <= 1.0 + z
    })
}

/// Smallest `g̃`-eigenvalue of `∇̃∇̃ξ + (128/δ² + (16/δ) k0^{1/4} coth(k0^{1/4} d)) g̃` over
/// interior points, for the ball bump centred at the pole of a geodesic polar background
/// (`g̃_rr ≡ 1`, so `d = r`).
pub fn xi_hessian_margin(bump: &BumpFunction, bg: &BackgroundGeometry) -> Result<f64> {
    if bg.metric().comps().iter().any(|g| g.xx != 1.0 || g.xy != 0.0) {
        return Err(Error::NotApplicable("needs geodesic polar coordinates".into()));
    }
    let r = bg.grid().radii();
    let xi = TensorField::scalar(bg.grid().clone(), r.iter().map(|&d| bump.value(d)).collect())?;
    let hess = covariant_derivative(&xi, bg, 2)?;
    let k0 = bg.k0();
    let mut worst = f64::INFINITY;
    for p in hess.interior() {
        let f = &bg.frames()[p];
        let h = hess.at(p);
        let m = crate::linalg::Sym2::new(h[0], 0.5 * (h[1] + h[2]), h[3]).congruence(&f.e);
        let bound = 128.0 / (bump.delta * bump.delta) + 16.0 / bump.delta * hessian_comparison_bound(r[p], k0)?;
        worst = worst.min(m.eigenvalues()[0] + bound);
    }
    Ok(worst)
}

/// `max |∇̃ξ|²/ξ` over `{ξ > 1e−12}`, compared against `256/δ²` by the caller.
pub fn xi_gradient_ratio(bump: &BumpFunction, bg: &BackgroundGeometry) -> Result<f64> {
    let r = bg.grid().radii();
    let vals: Vec<f64> = r.iter().map(|&d| bump.value(d)).collect();
    // exact radial derivative: |∇̃ξ| = |ξ′| |∇̃r| = |ξ′| / √g̃_rr
    let grad: Vec<f64> = r.iter().zip(bg.metric().comps()).map(|(&d, g)| bump.d1(d).abs() / g.xx.sqrt()).collect();
    Ok(vals.iter().zip(&grad).filter(|(v, _)| **v > 1e-12).map(|(v, g)| g * g / v).fold(0.0, f64::max))
}

/// Largest `x ≥ 0` with `x² ≤ a x^{3/2} + b x + c x^{1/2}`, by bisection on `y = √x`.
pub fn max_feasible_x(a: f64, b: f64, c: f64) -> f64 {
    // y³ − a y² − b y − c has a single positive root
    if a == 0.0 && b == 0.0 && c == 0.0 {
        return 0.0;
    }
    let f = |y: f64| y * y * y - a * y * y - b * y - c;
    let mut hi = 1.0 + a + b.sqrt() + c.cbrt();
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi * hi
}

/// Upper bound on `x` from `x² ≤ a x^{3/2} + b x + c x^{1/2}`: one of the `K` terms must
/// carry at least `x²/K`, giving `max{(Ka)², Kb, (Kc)^{2/3}}`. With a single nonzero term
/// the sharp `max{a², b, c^{2/3}}` is returned.
pub fn elementary_estimate_bound(a: f64, b: f64, c: f64, k: usize) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0 && c >= 0.0) {
        return Err(Error::InvalidArgument(format!("coefficients must be nonnegative: {a}, {b}, {c}")));
    }
    if k < 3 {
        return Err(Error::InvalidArgument(format!("term count must be at least 3, got {k}")));
    }
    let nonzero = [a, b, c].iter().filter(|v| **v > 0.0).count();
    let kf = if nonzero <= 1 { 1.0 } else { k as f64 };
    Ok(((kf * a).powi(2)).max(kf * b).max((kf * c).powf(2.0 / 3.0)))
}

/// Barrier constants for dimension `n`, with exact integer forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierParams {
    pub n: u32,
    pub m: u128,
    pub a: u128,
    /// `1/ε`.
    pub eps_denominator: u128,
    pub eps: f64,
}

impl BarrierParams {
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {n}")));
        }
        let n10 = (n as u128).checked_pow(10).ok_or_else(|| Error::InvalidArgument("n too large".into()))?;
        let m = 25_600 * n10;
        let eps_denominator = 256_000 * n10;
        Ok(BarrierParams { n, m, a: 6_400 * n10, eps_denominator, eps: 1.0 / eps_denominator as f64 })
    }

    /// `m·ε = 1/10` as an exact rational identity.
    pub fn m_eps_is_tenth(&self) -> bool {
        10 * self.m == self.eps_denominator
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogInequality {
    pub log_lhs: f64,
    pub log_rhs: f64,
    /// `log(rhs/lhs)` oriented so that a positive margin means the inequality holds.
    pub log_margin: f64,
    pub pass: bool,
}

impl LogInequality {
    fn le(log_lhs: f64, log_rhs: f64) -> Self {
        let log_margin = log_rhs - log_lhs;
        LogInequality { log_lhs, log_rhs, log_margin, pass: log_margin >= 0.0 }
    }

    fn ge(log_lhs: f64, log_rhs: f64) -> Self {
        let log_margin = log_lhs - log_rhs;
        LogInequality { log_lhs, log_rhs, log_margin, pass: log_margin >= 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiAudit {
    pub params: BarrierParams,
    pub m_eps_exact: bool,
    /// `10 n³ m (1+ε)^{m−1} ≤ m²/16`.
    pub growth: LogInequality,
    /// `m(m−1)/2 · (1−ε)^{m−2} ≥ (3/16) m²`.
    pub decay: LogInequality,
    pub pass: bool,
}

pub fn shi_constant_audit(n: u32) -> Result<ShiAudit> {
    let params = BarrierParams::new(n)?;
    let m = params.m as f64;
    let eps = params.eps;
    let lm = m.ln();
    let growth =
        LogInequality::le(10f64.ln() + 3.0 * (n as f64).ln() + lm + (m - 1.0) * eps.ln_1p(), 2.0 * lm - 16f64.ln());
    let decay = LogInequality::ge(
        lm + (m - 1.0).ln() - 2f64.ln() + (m - 2.0) * (-eps).ln_1p(),
        3f64.ln() - 16f64.ln() + 2.0 * lm,
    );
    let m_eps_exact = params.m_eps_is_tenth();
    Ok(ShiAudit { params, m_eps_exact, growth, decay, pass: m_eps_exact && growth.pass && decay.pass })
}

/// `φ = a + Σ_k λ_k^m` and `ψ = φ |∇̃g|²` per point, with powers taken as `exp(m log λ)`.
pub fn barrier_values(lambdas: &[[f64; 2]], grad_norm: &[f64], params: &BarrierParams) -> Result<Vec<(f64, f64)>> {
    if lambdas.len() != grad_norm.len() {
        return Err(Error::Shape("eigenvalue and gradient samples differ in length".into()));
    }
    let (lo, hi) = (1.0 - 2.0 * params.eps, 1.0 + 2.0 * params.eps);
    let m = params.m as f64;
    let a = params.a as f64;
    lambdas
        .iter()
        .zip(grad_norm)
        .enumerate()
        .map(|(i, (ls, &gn))| {
            let mut phi = a;
            for &l in ls {
                if !(l >= lo && l <= hi) {
                    return Err(Error::Domain(format!(
                        "eigenvalue {l} at index {i} outside barrier regime [{lo}, {hi}]"
                    )));
                }
                phi += (m * (l - 1.0).ln_1p()).exp();
            }
            Ok((phi, phi * gn * gn))
        })
        .collect()
}

/// Higher-order barrier `(a_0 + |∇̃^{m−1} g|²) |∇̃^m g|²`.
pub fn higher_order_barrier(a0: f64, lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    if lower.len() != upper.len() {
        return Err(Error::Shape("derivative samples differ in length".into()));
    }
    Ok(lower.iter().zip(upper).map(|(l, u)| (a0 + l * l) * u * u).collect())
}

fn for_each_tuple(len: usize, max: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, len: usize, max: usize, f: &mut impl FnMut(&[usize])) {
        if buf.len() == len {
            f(buf);
            return;
        }
        for v in 0..=max {
            buf.push(v);
            rec(buf, len, max, f);
            buf.pop();
        }
    }
    rec(&mut Vec::with_capacity(len), len, max, f);
}

/// `𝒦_p = Σ C_{k_1}⋯C_{k_{p+2}}` over `0 ≤ k_i ≤ p−1` with `Σ k_i ≤ p+2`.
pub fn k_constant(p: usize, big_c: &[f64]) -> Result<f64> {
    if p == 0 || big_c.len() < p {
        return Err(Error::InvalidArgument(format!("need p >= 1 and {p} bounds C_0..C_(p-1)")));
    }
    let mut total = 0.0;
    for_each_tuple(p + 2, p - 1, &mut |k| {
        if k.iter().sum::<usize>() <= p + 2 {
            total += k.iter().map(|&i| big_c[i]).product::<f64>();
        }
    });
    Ok(total)
}

/// `ℒ_p = Σ c_s C_{l_1}⋯C_{l_p}` over `0 ≤ l_i, s ≤ p−1` with `Σ l_i + s = p`.
pub fn l_constant(p: usize, big_c: &[f64], small_c: &[f64]) -> Result<f64> {
    if p == 0 || big_c.len() < p || small_c.len() < p {
        return Err(Error::InvalidArgument(format!("need p >= 1 and {p} bounds of each kind")));
    }
    let mut total = 0.0;
    for_each_tuple(p + 1, p - 1, &mut |t| {
        let (l, s) = (&t[..p], t[p]);
        if l.iter().sum::<usize>() + s == p {
            total += small_c[s] * l.iter().map(|&i| big_c[i]).product::<f64>();
        }
    });
    Ok(total)
}

/// Quasi-random points in `[0, 1)` (additive recurrence on an irrational), used so that
/// sampled audits are reproducible without a random number generator.
pub fn weyl_sequence(count: usize, alpha: f64) -> impl Iterator<Item = f64> {
    (1..=count).map(move |i| (i as f64 * alpha).fract())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledCheck {
    pub samples: usize,
    /// Worst value of the audited quantity.
    pub worst: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofDeviceReport {
    pub cutoff: CutoffAudit,
    /// `max |∇̃ξ|²/ξ · δ²`, limit 256.
    pub xi_gradient: SampledCheck,
    /// Smallest eigenvalue of `Hess ξ + bound·g̃` on the flat plane and the unit sphere.
    pub xi_hessian_flat: SampledCheck,
    pub xi_hessian_sphere: SampledCheck,
    /// `max (z coth z − 1 − z)` over `z ∈ (0, 100)`.
    pub coth_linear: SampledCheck,
    /// `max (x_max − bound)` over random triples, with `x_max` from bisection.
    pub elementary_estimate: SampledCheck,
    pub shi: Vec<ShiAudit>,
    pub pass: bool,
}

/// Every proof-device audit with fixed sample sizes.
pub fn proof_device_suite() -> Result<ProofDeviceReport> {
    use crate::grid::RadialGrid;
    use crate::models::{instantiate, GeometrySpec};
    use std::sync::Arc;

    let eta = CutoffProfile;
    let cutoff = audit_cutoff(&eta, 100_001);

    let (gamma, delta) = (0.4, 0.8);
    let bump = make_xi(eta, gamma, delta, BumpVariant::Ball)?;
    let samples = 100_000;
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let d = 2.0 * i as f64 / (samples - 1) as f64;
        let v = bump.value(d);
        if v > 1e-12 {
            worst = worst.max(bump.d1(d).powi(2) / v * delta * delta);
        }
    }
    let xi_gradient = SampledCheck { samples, worst, limit: 256.0, pass: worst <= 256.0 };

    let hess = |spec: GeometrySpec, hi: f64| -> Result<SampledCheck> {
        let grid = Arc::new(RadialGrid::uniform(0.05, hi, 400)?);
        let bg = instantiate(&spec, grid)?;
        let w = xi_hessian_margin(&bump, &bg)?;
        Ok(SampledCheck { samples: 398, worst: w, limit: -1e-8, pass: w >= -1e-8 })
    };
    let xi_hessian_flat = hess(GeometrySpec::FlatPlane, 2.0)?;
    let xi_hessian_sphere = hess(GeometrySpec::RoundSphere { radius: 1.0 }, 3.0)?;

    let zs: Vec<f64> = weyl_sequence(100_000, 0.618_033_988_749_894_9).map(|u| 100.0 * u).collect();
    let worst = zs
        .iter()
        .map(|&z| if z < 1e-4 { z * z / 3.0 - z } else { z / z.tanh() - 1.0 - z })
        .fold(f64::NEG_INFINITY, f64::max);
    let coth_linear = SampledCheck { samples: zs.len(), worst, limit: 0.0, pass: coth_linear_check(&zs) };

    let n = 10_000;
    let ua = weyl_sequence(n, 0.754_877_666_246_692_7);
    let ub = weyl_sequence(n, 0.569_840_290_998_053_3);
    let uc = weyl_sequence(n, 0.414_213_562_373_095_1);
    let mut worst = f64::NEG_INFINITY;
    for ((a, b), c) in ua.zip(ub).zip(uc) {
        let (a, b, c) = (10.0 * a, 10.0 * b, 10.0 * c);
        let x = max_feasible_x(a, b, c);
        let bound = elementary_estimate_bound(a, b, c, 3)?;
        worst = worst.max(x - bound);
    }
    let elementary_estimate = SampledCheck { samples: n, worst, limit: 0.0, pass: worst <= 0.0 };

    let shi = (2..=8).map(shi_constant_audit).collect::<Result<Vec<_>>>()?;
    let pass = cutoff.pass
        && xi_gradient.pass
        && xi_hessian_flat.pass
        && xi_hessian_sphere.pass
        && coth_linear.pass
        && elementary_estimate.pass
        && shi.iter().all(|a| a.pass);
    Ok(ProofDeviceReport {
        cutoff,
        xi_gradient,
        xi_hessian_flat,
        xi_hessian_sphere,
        coth_linear,
        elementary_estimate,
        shi,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_plateaus_and_budgets() {
        let eta = make_eta().unwrap();
        assert_eq!(eta.value(-1.0), 1.0);
        assert_eq!(eta.value(2.0), 0.0);
        let a = audit_cutoff(&eta, 100_001);
        assert!(a.max_abs_d2 <= 8.0 && a.max_gradient_ratio <= 16.0 && a.pass);
        // closed-form extremes: |η″| peaks at 10/√3, |η′| at 15/8
        assert!((a.max_abs_d2 - 10.0 / 3f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn eta_derivatives_consistent() {
        let eta = CutoffProfile;
        let h = 1e-6;
        for x in [0.1, 0.33, 0.5, 0.77, 0.95] {
            let fd1 = (eta.value(x + h) - eta.value(x - h)) / (2.0 * h);
            let fd2 = (eta.d1(x + h) - eta.d1(x - h)) / (2.0 * h);
            assert!((fd1 - eta.d1(x)).abs() < 1e-7);
            assert!((fd2 - eta.d2(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn ball_radii() {
        let xi = make_xi(CutoffProfile, 0.5, 0.5, BumpVariant::Ball).unwrap();
        assert_eq!(xi.support_radius(), 0.875);
        assert_eq!(xi.value(0.75), 1.0);
        assert_eq!(xi.value(0.875), 0.0);
        assert!(make_xi(CutoffProfile, 0.5, 1.5, BumpVariant::Ball).is_err());
        assert!(make_xi(CutoffProfile, 0.5, -0.1, BumpVariant::Neighborhood).is_err());
        assert!(make_xi(CutoffProfile, 0.5, 0.5, BumpVariant::Order { m: 0 }).is_err());
    }

    #[test]
    fn variant_offsets() {
        let n = make_xi(CutoffProfile, 0.3, 0.4, BumpVariant::Neighborhood).unwrap();
        assert!((n.plateau_radius() - 0.2).abs() < 1e-15 && (n.support_radius() - 0.3).abs() < 1e-15);
        let o = make_xi(CutoffProfile, 0.3, 0.4, BumpVariant::Order { m: 2 }).unwrap();
        // plateau at γ + δ/3, support at γ + δ(1/3 + 1/2)/2
        assert!((o.plateau_radius() - (0.3 + 0.4 / 3.0)).abs() < 1e-15);
        assert!((o.support_radius() - (0.3 + 0.4 * (1.0 / 3.0 + 0.5) / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn ball_gradient_bound_sampled() {
        let delta = 0.3;
        let xi = make_xi(CutoffProfile, 0.2, delta, BumpVariant::Ball).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..100_000 {
            let d = 1.0 * i as f64 / 99_999.0;
            let v = xi.value(d);
            if v > 1e-12 {
                worst = worst.max(xi.d1(d).powi(2) / v);
            }
        }
        assert!(worst <= 256.0 / (delta * delta));
    }

    #[test]
    fn hessian_bound_examples() {
        assert_eq!(hessian_comparison_bound(2.0, 0.0).unwrap(), 0.5);
        assert!((hessian_comparison_bound(50.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(hessian_comparison_bound(0.0, 1.0).is_err());
        assert!(hessian_comparison_bound(1.0, 0.5).unwrap() >= 1.0);
        // continuity across the small-argument branch
        let a = hessian_comparison_bound(1.0, 1e-33).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coth_examples() {
        assert!(coth_linear_check(&[1e-6, 50.0, 1.0]));
        assert!(!coth_linear_check(&[0.0]));
        let z = 1e-6f64;
        assert!((z / z.tanh() - 1.0 - z * z / 3.0).abs() < 1e-15);
    }

    #[test]
    fn elementary_examples() {
        assert_eq!(elementary_estimate_bound(1.0, 0.0, 0.0, 3).unwrap(), 1.0);
        assert_eq!(elementary_estimate_bound(1.0, 1.0, 1.0, 3).unwrap(), 9.0);
        assert_eq!(elementary_estimate_bound(0.0, 0.0, 0.0, 3).unwrap(), 0.0);
        assert!(elementary_estimate_bound(-1.0, 0.0, 0.0, 3).is_err());
        // x = 2 is feasible for a = b = c = 1 and exceeds the uncorrected bound 1
        let x: f64 = 2.0;
        assert!(x * x <= x.powf(1.5) + x + x.sqrt());
        assert!(max_feasible_x(1.0, 1.0, 1.0) > 1.0);
        assert!((max_feasible_x(1.0, 0.0, 0.0) - 1.0).abs() < 1e-12);
        assert_eq!(max_feasible_x(0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn shi_constants() {
        let p = BarrierParams::new(2).unwrap();
        assert_eq!(p.m, 26_214_400);
        assert_eq!(p.a, 6_553_600);
        assert!(p.m_eps_is_tenth());
        let a = shi_constant_audit(2).unwrap();
        assert!(a.pass);
        assert!(a.growth.log_margin > 1e3f64.ln());
        // (1−ε)^{m−2} ≥ e^{−0.12}
        assert!(((p.m - 2) as f64 * (-p.eps).ln_1p()) > -0.12);
        for n in 2..=8 {
            assert!(shi_constant_audit(n).unwrap().pass, "n = {n}");
        }
        assert!(BarrierParams::new(1).is_err());
    }

    #[test]
    fn barrier_examples() {
        let p = BarrierParams::new(2).unwrap();
        let a = p.a as f64;
        let v = barrier_values(&[[1.0, 1.0]], &[0.5], &p).unwrap();
        assert_eq!(v[0].0, a + 2.0);
        assert_eq!(v[0].1, (a + 2.0) * 0.25);
        let l = 1.0 + p.eps;
        let v = barrier_values(&[[l, l]], &[0.0], &p).unwrap();
        assert!((v[0].0 - a - 2.0 * 0.1f64.exp()).abs() < 1e-6);
        assert_eq!(v[0].1, 0.0);
        assert!(matches!(barrier_values(&[[1.1, 1.0]], &[0.0], &p), Err(Error::Domain(_))));
    }

    #[test]
    fn suite_passes() {
        let r = proof_device_suite().unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.shi.len(), 7);
    }

    #[test]
    fn combinatorial_constants() {
        let big = [1.3, 0.7, 2.1];
        let small = [0.4, 1.7, 0.9];
        assert!((k_constant(1, &big).unwrap() - 1.3f64.powi(3)).abs() < 1e-12);
        assert_eq!(l_constant(1, &big, &small).unwrap(), 0.0);
        assert!((k_constant(2, &big).unwrap() - (1.3f64 + 0.7).powi(4)).abs() < 1e-12);
        let l2 = 0.4 * 0.7 * 0.7 + 2.0 * 1.7 * 1.3 * 0.7;
        assert!((l_constant(2, &big, &small).unwrap() - l2).abs() < 1e-12);
        assert!(k_constant(0, &big).is_err());
    }
}
