//! Effective potentials, their landmarks and the regime classifier.
//!
//! All quantities are per unit mass: `𝓔 = E/m`, `ℓ = L/m`, and
//! `V_eff = ℓ²/2r² + V(r)`. The harmonic family is `V = k r²` (no factor ½).
//! The relativistic families carry their own constants: the GR massive
//! particle reduces to the oblate family, the special-relativistic Coulomb
//! problem reduces to a Kepler problem with shifted constants.

use crate::poly_roots::{self, RootSet};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("effective potential has no extremum ({reason})")]
    NoExtremum { reason: String },
    #[error("no bounded motion: {failed}")]
    Unbounded { failed: String },
    #[error("series does not converge: r = {r} is within 1% of a source radius {a}")]
    NonConvergent { r: f64, a: f64 },
}

/// Potential family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    /// `V = -k/r`.
    Kepler { k: f64 },
    /// `V = k r²`.
    Harmonic { k: f64 },
    /// `V = -k/r - B/r³`.
    Oblate { k: f64, b: f64 },
    /// `V = -k/r - λ r²`; `λ > 0` de Sitter, `λ < 0` anti-de Sitter.
    Cosmological { k: f64, lambda: f64 },
    /// `V = -a/r + b r`.
    Cornell { a: f64, b: f64 },
    /// Massive test particle in Schwarzschild, in proper time.
    GrMassive { gm: f64, c: f64 },
    /// Special-relativistic Coulomb problem, in proper time.
    StrCoulomb { k: f64, m0: f64, e_rel: f64, l: f64 },
}

/// Specific angular momentum and specific energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialContext {
    pub ell: f64,
    pub energy: f64,
}

impl PotentialSpec {
    pub fn family(&self) -> &'static str {
        match self {
            PotentialSpec::Kepler { .. } => "kepler",
            PotentialSpec::Harmonic { .. } => "harmonic",
            PotentialSpec::Oblate { .. } => "oblate",
            PotentialSpec::Cosmological { .. } => "cosmological",
            PotentialSpec::Cornell { .. } => "cornell",
            PotentialSpec::GrMassive { .. } => "gr",
            PotentialSpec::StrCoulomb { .. } => "str",
        }
    }

    /// Check the positivity constraints of each family.
    pub fn validate(&self) -> Result<(), PotentialError> {
        let pos = |name: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(PotentialError::InvalidParameter { name, value })
            }
        };
        let fin = |name: &'static str, value: f64| {
            if value.is_finite() {
                Ok(())
            } else {
                Err(PotentialError::InvalidParameter { name, value })
            }
        };
        match *self {
            PotentialSpec::Kepler { k } | PotentialSpec::Harmonic { k } => pos("k", k),
            PotentialSpec::Oblate { k, b } => pos("k", k).and(pos("B", b)),
            PotentialSpec::Cosmological { k, lambda } => pos("k", k).and(fin("lambda", lambda)),
            PotentialSpec::Cornell { a, b } => pos("a", a).and(pos("b", b)),
            PotentialSpec::GrMassive { gm, c } => pos("GM", gm).and(if c > 0.0 {
                Ok(())
            } else {
                Err(PotentialError::InvalidParameter { name: "c", value: c })
            }),
            PotentialSpec::StrCoulomb { k, m0, e_rel, l } => {
                pos("m0", m0).and(fin("k", k)).and(fin("E_rel", e_rel)).and(fin("L", l))
            }
        }
    }
}

/// `(V_eff, V_eff', V_eff'')` at `r`.
pub fn v_eff_derivs(spec: &PotentialSpec, ctx: &RadialContext, r: f64) -> (f64, f64, f64) {
    let l2 = ctx.ell * ctx.ell;
    let r2 = r * r;
    let r3 = r2 * r;
    let r4 = r2 * r2;
    let cent = (0.5 * l2 / r2, -l2 / r3, 3.0 * l2 / r4);
    let (v, d1, d2) = match *spec {
        PotentialSpec::Kepler { k } => (-k / r, k / r2, -2.0 * k / r3),
        PotentialSpec::Harmonic { k } => (k * r2, 2.0 * k * r, 2.0 * k),
        PotentialSpec::Oblate { k, b } => (-k / r - b / r3, k / r2 + 3.0 * b / r4, -2.0 * k / r3 - 12.0 * b / (r4 * r)),
        PotentialSpec::Cosmological { k, lambda } => {
            (-k / r - lambda * r2, k / r2 - 2.0 * lambda * r, -2.0 * k / r3 - 2.0 * lambda)
        }
        PotentialSpec::Cornell { a, b } => (-a / r + b * r, a / r2 + b, -2.0 * a / r3),
        PotentialSpec::GrMassive { gm, c } => {
            let bb = gm * l2 / (c * c);
            (-gm / r - bb / r3, gm / r2 + 3.0 * bb / r4, -2.0 * gm / r3 - 12.0 * bb / (r4 * r))
        }
        PotentialSpec::StrCoulomb { .. } => {
            let (a, b, _) = str_reduction(spec);
            let m0 = str_m0(spec);
            let c = a / (m0 * m0);
            return (0.5 * c / r2 + b / r, -c / r3 - b / r2, 3.0 * c / r4 + 2.0 * b / r3);
        }
    };
    (cent.0 + v, cent.1 + d1, cent.2 + d2)
}

fn str_m0(spec: &PotentialSpec) -> f64 {
    match *spec {
        PotentialSpec::StrCoulomb { m0, .. } => m0,
        _ => 1.0,
    }
}

/// Effective potential `ℓ²/2r² + V(r)`; the reduced form for the
/// special-relativistic Coulomb family.
pub fn v_eff(spec: &PotentialSpec, ctx: &RadialContext, r: f64) -> f64 {
    v_eff_derivs(spec, ctx, r).0
}

pub fn v_eff_d1(spec: &PotentialSpec, ctx: &RadialContext, r: f64) -> f64 {
    v_eff_derivs(spec, ctx, r).1
}

/// Checked effective potential.
pub fn v_eff_checked(spec: &PotentialSpec, ctx: &RadialContext, r: f64) -> Result<f64, PotentialError> {
    if !(r > 0.0) {
        return Err(PotentialError::NonPositiveRadius(r));
    }
    Ok(v_eff(spec, ctx, r))
}

/// Radial Laplacian `V_eff'' + 2 V_eff'/r`.
pub fn laplacian_v_eff(spec: &PotentialSpec, ctx: &RadialContext, r: f64) -> f64 {
    let (_, d1, d2) = v_eff_derivs(spec, ctx, r);
    d2 + 2.0 * d1 / r
}

/// `φ̇` at radius `r`.
pub fn angular_rate(spec: &PotentialSpec, ctx: &RadialContext, r: f64) -> f64 {
    conserved_ell(spec, ctx) / (r * r)
}

/// The conserved `r² φ̇`; `L/m₀` for the special-relativistic family.
pub fn conserved_ell(spec: &PotentialSpec, ctx: &RadialContext) -> f64 {
    match *spec {
        PotentialSpec::StrCoulomb { m0, l, .. } => l / m0,
        _ => ctx.ell,
    }
}

/// Energy-like constant of the radial motion: `𝓔`, or `ε` for the
/// special-relativistic family.
pub fn radial_energy(spec: &PotentialSpec, ctx: &RadialContext) -> f64 {
    match spec {
        PotentialSpec::StrCoulomb { .. } => str_reduction(spec).2,
        _ => ctx.energy,
    }
}

/// Rewrite a family as an equivalent one with the closed forms implemented:
/// GR maps to oblate, the special-relativistic problem to Kepler, `λ = 0` to Kepler.
pub fn canonical(spec: &PotentialSpec, ctx: &RadialContext) -> (PotentialSpec, RadialContext) {
    match *spec {
        PotentialSpec::GrMassive { gm, c } => (gr_mapping(gm, c, ctx.ell), *ctx),
        PotentialSpec::StrCoulomb { m0, .. } => {
            let (a, b, eps) = str_reduction(spec);
            (PotentialSpec::Kepler { k: -b }, RadialContext { ell: a.max(0.0).sqrt() / m0, energy: eps })
        }
        PotentialSpec::Cosmological { k, lambda: 0.0 } => (PotentialSpec::Kepler { k }, *ctx),
        _ => (*spec, *ctx),
    }
}

/// Kepler-form constants `(a, b, ε)` of the special-relativistic Coulomb
/// problem: `ṙ²/2 + a/(2m₀²r²) + b/r = ε`.
pub fn str_reduction(spec: &PotentialSpec) -> (f64, f64, f64) {
    match *spec {
        PotentialSpec::StrCoulomb { k, m0, e_rel, l } => {
            let a = l * l - k * k;
            let b = e_rel * k / (m0 * m0);
            let eps = 0.5 * (e_rel * e_rel / (m0 * m0) - 1.0);
            (a, b, eps)
        }
        _ => panic!("str_reduction requires a StrCoulomb spec"),
    }
}

/// Oblate family equivalent to the GR massive-particle potential.
pub fn gr_mapping(gm: f64, c: f64, ell: f64) -> PotentialSpec {
    PotentialSpec::Oblate { k: gm, b: gm * ell * ell / (c * c) }
}

// ---------------------------------------------------------------------------
// Landmarks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub r: f64,
    pub kind: ExtremumKind,
    pub value: f64,
}

/// Extrema of `V_eff` with the polynomial they were extracted from.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub points: Vec<Extremum>,
    pub roots: RootSet,
}

impl Stationary {
    pub fn min(&self) -> Option<Extremum> {
        self.points.iter().copied().find(|e| e.kind == ExtremumKind::Min)
    }

    pub fn max(&self) -> Option<Extremum> {
        self.points.iter().copied().find(|e| e.kind == ExtremumKind::Max)
    }
}

fn label(spec: &PotentialSpec, ctx: &RadialContext, rs: &[f64]) -> Vec<Extremum> {
    rs.iter()
        .map(|&r| {
            let (v, _, d2) = v_eff_derivs(spec, ctx, r);
            let kind = if d2 > 0.0 { ExtremumKind::Min } else { ExtremumKind::Max };
            Extremum { r, kind, value: v }
        })
        .collect()
}

/// Stationary points of `V_eff` for the given context.
pub fn stationary_points(spec: &PotentialSpec, ctx: &RadialContext) -> Result<Stationary, PotentialError> {
    spec.validate()?;
    let (spec, ctx) = canonical(spec, ctx);
    let l2 = ctx.ell * ctx.ell;
    let none = |reason: String| Err(PotentialError::NoExtremum { reason });
    let roots = match spec {
        PotentialSpec::Kepler { k } => {
            if !(k > 0.0 && l2 > 0.0) {
                return none("Kepler needs k > 0 and ℓ > 0".into());
            }
            // k r - ℓ² = 0, kept in quadratic form r² - (ℓ²/k) r = 0
            let mut rs = poly_roots::quadratic_roots(-l2 / k, 0.0);
            rs.real_roots.retain(|&r| r > 0.0);
            rs
        }
        PotentialSpec::Harmonic { k } => {
            if l2 == 0.0 {
                return none("ℓ = 0".into());
            }
            // 2k r⁴ = ℓ² as a biquadratic
            poly_roots::quartic_roots_resolvent(0.0, 0.0, 0.0, -l2 / (2.0 * k))
        }
        PotentialSpec::Oblate { k, b } => {
            // k r² - ℓ² r + 3B = 0
            if l2 * l2 <= 12.0 * k * b {
                return none(format!("ℓ⁴ = {} ≤ 12kB = {}", l2 * l2, 12.0 * k * b));
            }
            poly_roots::quadratic_roots(-l2 / k, 3.0 * b / k)
        }
        PotentialSpec::Cosmological { k, lambda } => {
            // -2λ r⁴ + k r - ℓ² = 0  ⇔  r⁴ - (k/2λ) r + ℓ²/2λ = 0
            if lambda > 0.0 {
                let bound = 27.0 * k.powi(4) / (512.0 * l2 * l2 * l2);
                if lambda >= bound {
                    return none(format!("λ = {lambda} ≥ 27k⁴/(512ℓ⁶) = {bound}"));
                }
            }
            poly_roots::quartic_roots_resolvent(0.0, 0.0, -k / (2.0 * lambda), l2 / (2.0 * lambda))
        }
        PotentialSpec::Cornell { a, b } => {
            // b r³ + a r - ℓ² = 0
            if l2 == 0.0 {
                return none("ℓ = 0".into());
            }
            poly_roots::cubic_roots(0.0, a / b, -l2 / b)
        }
        PotentialSpec::GrMassive { .. } | PotentialSpec::StrCoulomb { .. } => unreachable!("canonicalised"),
    };
    let positive = roots.positive();
    if positive.is_empty() {
        return none("no positive stationary radius".into());
    }
    Ok(Stationary { points: label(&spec, &ctx, &positive), roots })
}

/// Real roots of the reality polynomial and the designated bounded pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TurningPoints {
    pub all: RootSet,
    pub r1: f64,
    pub r2: f64,
}

/// Monic reality polynomial `2 r^n (𝓔 - V_eff) / lead` and its roots.
pub fn reality_roots(spec: &PotentialSpec, ctx: &RadialContext) -> RootSet {
    let (spec, ctx) = canonical(spec, ctx);
    let l2 = ctx.ell * ctx.ell;
    let e = ctx.energy;
    match spec {
        // 2E r² + 2k r - ℓ²
        PotentialSpec::Kepler { k } => poly_roots::quadratic_roots(k / e, -0.5 * l2 / e),
        // -2k r⁴ + 2E r² - ℓ²
        PotentialSpec::Harmonic { k } => poly_roots::quartic_roots_resolvent(0.0, -e / k, 0.0, 0.5 * l2 / k),
        // 2E r³ + 2k r² - ℓ² r + 2B
        PotentialSpec::Oblate { k, b } => poly_roots::cubic_roots(k / e, -0.5 * l2 / e, b / e),
        // 2λ r⁴ + 2E r² + 2k r - ℓ²
        PotentialSpec::Cosmological { k, lambda } => {
            poly_roots::quartic_roots_resolvent(0.0, e / lambda, k / lambda, -0.5 * l2 / lambda)
        }
        // -2b r³ + 2E r² + 2a r - ℓ²
        PotentialSpec::Cornell { a, b } => poly_roots::cubic_roots(-e / b, -a / b, 0.5 * l2 / b),
        PotentialSpec::GrMassive { .. } | PotentialSpec::StrCoulomb { .. } => unreachable!("canonicalised"),
    }
}

/// Turning points `r₁ < r₂` of the bounded orbit.
pub fn turning_points(spec: &PotentialSpec, ctx: &RadialContext) -> Result<TurningPoints, PotentialError> {
    let report = classify_regime(spec, ctx, &RegimeOptions::default())?;
    turning_points_for(spec, ctx, &report)
}

/// Turning points for an already classified context (lets callers opt into
/// `CriticalMax`).
pub fn turning_points_for(
    spec: &PotentialSpec,
    ctx: &RadialContext,
    report: &RegimeReport,
) -> Result<TurningPoints, PotentialError> {
    match report.regime {
        Regime::Bounded | Regime::CriticalMax => {}
        _ => {
            return Err(PotentialError::Unbounded { failed: report.failed.clone().unwrap_or_default() });
        }
    }
    let well = report.well.expect("bounded regimes carry a well");
    let all = reality_roots(spec, ctx);
    let inside: Vec<f64> = all.real_roots.iter().copied().filter(|&r| r > 0.0).collect();
    // Keep roots on either side of the well minimum closest to it.
    let r1 = inside.iter().copied().filter(|&r| r < well).fold(f64::NAN, f64::max);
    let mut r2 = inside.iter().copied().filter(|&r| r > well).fold(f64::NAN, f64::min);
    if report.regime == Regime::CriticalMax {
        r2 = report.barrier_r.unwrap_or(r2);
    }
    if !(r1 > 0.0 && r2 > r1) {
        return Err(PotentialError::Unbounded { failed: "reality polynomial has no root pair around the well".into() });
    }
    Ok(TurningPoints { all, r1, r2 })
}

// ---------------------------------------------------------------------------
// Regimes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Bounded,
    Circular,
    Unbounded,
    /// Energy below the bottom of the well: no real motion near it.
    Forbidden,
    Monotone,
    /// Energy equal to a potential maximum (unstable circular orbit at the barrier).
    CriticalMax,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Bounded => "Bounded",
            Regime::Circular => "Circular",
            Regime::Unbounded => "Unbounded",
            Regime::Forbidden => "Forbidden",
            Regime::Monotone => "Monotone",
            Regime::CriticalMax => "CriticalMax",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeOptions {
    /// Relative tolerance for energy equalities at extrema.
    pub rel_tol: f64,
    /// Report `CriticalMax` instead of `Unbounded`/`Bounded` at a barrier top.
    pub allow_critical: bool,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, allow_critical: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Governing inequalities, each as a signed margin (positive = satisfied).
    pub margins: BTreeMap<String, f64>,
    /// Bottom of the potential well, when there is one.
    pub well: Option<f64>,
    /// Location of the confining barrier maximum, when finite.
    pub barrier_r: Option<f64>,
    pub failed: Option<String>,
}

/// Classify the radial motion for `ctx`.
pub fn classify_regime(
    spec: &PotentialSpec,
    ctx: &RadialContext,
    opts: &RegimeOptions,
) -> Result<RegimeReport, PotentialError> {
    spec.validate()?;
    let (cspec, cctx) = canonical(spec, ctx);
    let e = cctx.energy;
    let mut margins = BTreeMap::new();
    let l2 = cctx.ell * cctx.ell;

    if let PotentialSpec::Oblate { k, b } = cspec {
        margins.insert("alpha = l^4/(12kB) - 1".into(), l2 * l2 / (12.0 * k * b) - 1.0);
    }
    if let PotentialSpec::Cosmological { k, lambda } = cspec {
        if lambda > 0.0 {
            margins.insert("27k^4/(512l^6) - lambda".into(), 27.0 * k.powi(4) / (512.0 * l2.powi(3)) - lambda);
        }
    }
    if let PotentialSpec::Kepler { k } = cspec {
        if k <= 0.0 {
            margins.insert("k".into(), k);
            return Ok(RegimeReport {
                regime: Regime::Unbounded,
                margins,
                well: None,
                barrier_r: None,
                failed: Some("repulsive or free Kepler constant".into()),
            });
        }
    }

    let stationary = match stationary_points(&cspec, &cctx) {
        Ok(s) => s,
        Err(PotentialError::NoExtremum { reason }) => {
            return Ok(RegimeReport {
                regime: Regime::Monotone,
                margins,
                well: None,
                barrier_r: None,
                failed: Some(reason),
            });
        }
        Err(err) => return Err(err),
    };
    let Some(min) = stationary.min() else {
        return Ok(RegimeReport {
            regime: Regime::Monotone,
            margins,
            well: None,
            barrier_r: None,
            failed: Some("no minimum".into()),
        });
    };
    // Confining barrier: the maximum beyond the minimum, or the asymptotic value.
    let outer_max = stationary.points.iter().copied().find(|p| p.kind == ExtremumKind::Max && p.r > min.r);
    let inner_max = stationary.points.iter().copied().find(|p| p.kind == ExtremumKind::Max && p.r < min.r);
    let asymptote = match cspec {
        PotentialSpec::Kepler { .. } | PotentialSpec::Oblate { .. } => Some(0.0),
        PotentialSpec::Cosmological { lambda, .. } if lambda > 0.0 => None,
        _ => None,
    };
    let mut barrier = f64::INFINITY;
    let mut barrier_r = None;
    if let Some(m) = outer_max {
        barrier = m.value;
        barrier_r = Some(m.r);
    }
    if let Some(a) = asymptote {
        barrier = barrier.min(a);
    }
    if let Some(m) = inner_max {
        if m.value < barrier {
            barrier = m.value;
            barrier_r = Some(m.r);
        }
    }
    margins.insert("E - Veff(r_min)".into(), e - min.value);
    if barrier.is_finite() {
        margins.insert("barrier - E".into(), barrier - e);
    }
    let close = |a: f64, b: f64| (a - b).abs() <= opts.rel_tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    let report = |regime, failed: Option<String>| RegimeReport {
        regime,
        margins: margins.clone(),
        well: Some(min.r),
        barrier_r,
        failed,
    };
    if close(e, min.value) {
        return Ok(report(Regime::Circular, None));
    }
    if e < min.value {
        return Ok(report(Regime::Forbidden, Some(format!("E = {e} < Veff(r_min) = {}", min.value))));
    }
    if barrier.is_finite() && barrier_r.is_some() && opts.allow_critical {
        let top = barrier;
        if close(e, top) {
            return Ok(report(Regime::CriticalMax, None));
        }
    }
    if e < barrier {
        Ok(report(Regime::Bounded, None))
    } else {
        Ok(report(Regime::Unbounded, Some(format!("E = {e} ≥ barrier {barrier}"))))
    }
}

// ---------------------------------------------------------------------------
// Gravitational scenarios
// ---------------------------------------------------------------------------

/// Newtonian limit of the Kottler potential, `-r_s/r - r²/(6 r_Λ²)`.
pub fn kottler_potential(r_s: f64, r_lambda: f64, r: f64) -> f64 {
    -r_s / r - r * r / (6.0 * r_lambda * r_lambda)
}

/// Location of the `ℓ = 0` maximum, `(3 r_s r_Λ²)^{1/3}`.
pub fn kottler_r_max(r_s: f64, r_lambda: f64) -> f64 {
    (3.0 * r_s * r_lambda * r_lambda).cbrt()
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return p0;
    }
    for m in 1..n {
        let m = m as f64;
        let p2 = ((2.0 * m + 1.0) * x * p1 - m * p0) / (m + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Weakly deformed sphere: `-GM/r + J₂ GM R² P₂(cos θ)/r³`.
pub fn spheroid_potential(gm: f64, radius: f64, j2: f64, r: f64, theta: f64) -> f64 {
    -gm / r + j2 * gm * radius * radius * legendre(2, theta.cos()) / (r * r * r)
}

/// Oblate family reproducing the equatorial spheroid potential (`ℓ` enters
/// only through `V_eff`): `B = -J₂ GM R² P₂(0)`.
pub fn spheroid_equatorial_oblate(gm: f64, radius: f64, j2: f64) -> PotentialSpec {
    PotentialSpec::Oblate { k: gm, b: -j2 * gm * radius * radius * legendre(2, 0.0) }
}

/// Coefficients `P_n(0)²` of the even powers `(a/r)^n`, `n = 0, 2, 4, …`.
pub fn ring_coefficients(n_terms: usize) -> Vec<f64> {
    (0..n_terms).map(|i| legendre(2 * i, 0.0).powi(2)).collect()
}

fn near_source(r: f64, a: f64) -> Result<(), PotentialError> {
    if (r - a).abs() < 0.01 * a {
        Err(PotentialError::NonConvergent { r, a })
    } else {
        Ok(())
    }
}

/// Equatorial potential of a ring of radius `a`, truncated Legendre series.
pub fn ring_potential(gm: f64, a_ring: f64, r: f64, n_terms: usize) -> Result<f64, PotentialError> {
    near_source(r, a_ring)?;
    let c = ring_coefficients(n_terms);
    let s: f64 = if r > a_ring {
        c.iter().enumerate().map(|(i, ci)| ci * (a_ring / r).powi(2 * i as i32)).sum::<f64>() / r
    } else {
        c.iter().enumerate().map(|(i, ci)| ci * (r / a_ring).powi(2 * i as i32)).sum::<f64>() / a_ring
    };
    Ok(-gm * s)
}

/// A perturbing body on a circular orbit of radius `a` with `G m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub gm: f64,
    pub a: f64,
}

/// Potential felt at radius `r` in the plane: the central mass plus each
/// other body smeared into a ring, inner rings expanded in `a/r` and outer
/// rings in `r/a`. `n_terms` counts the retained even orders (default use 3,
/// i.e. through `k = 2`).
pub fn planetary_sum(gm: f64, bodies: &[Body], r: f64, n_terms: usize) -> Result<f64, PotentialError> {
    let mut phi = -gm / r;
    for body in bodies {
        phi += ring_potential(body.gm, body.a, r, n_terms)?;
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{finite_diff, StepPolicy};

    fn ctx(ell: f64, energy: f64) -> RadialContext {
        RadialContext { ell, energy }
    }

    #[test]
    fn kepler_minimum_value() {
        let ell = (3.0f64 / 8.0).sqrt();
        let v = v_eff(&PotentialSpec::Kepler { k: 1.0 }, &ctx(ell, -1.0), ell * ell);
        assert!((v + 4.0 / 3.0).abs() < 1e-14);
        let s = stationary_points(&PotentialSpec::Kepler { k: 1.0 }, &ctx(ell, -1.0)).unwrap();
        assert!((s.min().unwrap().r - 0.375).abs() < 1e-15);
    }

    #[test]
    fn desitter_barrier_value() {
        let spec = PotentialSpec::Cosmological { k: 1.0, lambda: 1e-3 };
        assert!((v_eff(&spec, &ctx(1.0, -0.182), 7.571) + 0.181).abs() < 5e-4);
        let s = stationary_points(&spec, &ctx(1.0, -0.182)).unwrap();
        assert!((s.min().unwrap().r - 1.002).abs() < 1e-3);
        assert!((s.max().unwrap().r - 7.571).abs() < 1e-3);
    }

    #[test]
    fn oblate_direct_arithmetic() {
        let v = v_eff(&PotentialSpec::Oblate { k: 0.1, b: 1.0 }, &ctx(2.0, 0.0), 1.0);
        assert!((v - 0.9).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_radius_is_rejected() {
        let e = v_eff_checked(&PotentialSpec::Kepler { k: 1.0 }, &ctx(1.0, -0.1), 0.0);
        assert_eq!(e, Err(PotentialError::NonPositiveRadius(0.0)));
    }

    #[test]
    fn cornell_minimum_by_golden_section() {
        let spec = PotentialSpec::Cornell { a: 1.0, b: 1.0 };
        let c = ctx(1.0, 1.0);
        let r_min = stationary_points(&spec, &c).unwrap().min().unwrap().r;
        let f = |r: f64| v_eff(&spec, &c, r);
        let (mut a, mut b) = (0.1, 5.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if f(x1) < f(x2) {
                b = x2
            } else {
                a = x1
            }
        }
        assert!((r_min - 0.5 * (a + b)).abs() < 1e-7);
        // Closed form in sinh.
        let psi = (0.5f64 * 3f64.powf(1.5)).asinh();
        let closed = 2.0 * (1.0f64 / 3.0).sqrt() * (psi / 3.0).sinh();
        assert!((r_min - closed).abs() < 1e-12);
    }

    #[test]
    fn harmonic_turning_points() {
        let tp = turning_points(&PotentialSpec::Harmonic { k: 1.0 }, &ctx(1.0, 2.0)).unwrap();
        assert!((tp.r1 - 0.5412).abs() < 5e-5);
        assert!((tp.r2 - 1.3066).abs() < 5e-5);
    }

    #[test]
    fn kepler_turning_points_fig5() {
        let tp = turning_points(&PotentialSpec::Kepler { k: 1.0 }, &ctx(1.0, -0.182)).unwrap();
        assert!((tp.r1 - 0.556).abs() < 1e-3);
        assert!((tp.r2 - 4.938).abs() < 1e-3);
    }

    #[test]
    fn cornell_turning_points() {
        let tp = turning_points(&PotentialSpec::Cornell { a: 1.0, b: 1.0 }, &ctx(1.0, 1.0)).unwrap();
        assert!((tp.r1 - 0.40303).abs() < 1e-5);
        assert!((tp.r2 - 1.45161).abs() < 1e-5);
        assert!((tp.all.real_roots[0] + 0.85464).abs() < 1e-5);
    }

    #[test]
    fn oblate_monotone_regime() {
        // α = ℓ⁴/(12kB) = 0.5
        let ell = 6f64.powf(0.25);
        let r = classify_regime(&PotentialSpec::Oblate { k: 1.0, b: 1.0 }, &ctx(ell, -0.1), &RegimeOptions::default())
            .unwrap();
        assert_eq!(r.regime, Regime::Monotone);
    }

    #[test]
    fn kepler_circular_regime() {
        let r = classify_regime(&PotentialSpec::Kepler { k: 1.0 }, &ctx(1.0, -0.5), &RegimeOptions::default()).unwrap();
        assert_eq!(r.regime, Regime::Circular);
    }

    #[test]
    fn desitter_critical_max_regime() {
        let spec = PotentialSpec::Cosmological { k: 1.0, lambda: 1e-52 };
        let opts = RegimeOptions { rel_tol: 5e-3, allow_critical: true };
        let r = classify_regime(&spec, &ctx(1.0, -8.77e-18), &opts).unwrap();
        assert_eq!(r.regime, Regime::CriticalMax);
    }

    #[test]
    fn forbidden_and_unbounded() {
        let spec = PotentialSpec::Kepler { k: 1.0 };
        let o = RegimeOptions::default();
        assert_eq!(classify_regime(&spec, &ctx(1.0, -0.6), &o).unwrap().regime, Regime::Forbidden);
        assert_eq!(classify_regime(&spec, &ctx(1.0, 0.1), &o).unwrap().regime, Regime::Unbounded);
        assert!(matches!(turning_points(&spec, &ctx(1.0, 0.1)), Err(PotentialError::Unbounded { .. })));
    }

    #[test]
    fn str_reduction_examples() {
        let (a, b, _) = str_reduction(&PotentialSpec::StrCoulomb { k: 0.0, m0: 1.0, e_rel: 1.3, l: 2.0 });
        assert_eq!((a, b), (4.0, 0.0));
        let (a, _, _) = str_reduction(&PotentialSpec::StrCoulomb { k: 0.7, m0: 2.0, e_rel: 1.0, l: 0.7 });
        assert_eq!(a, 0.0);
    }

    #[test]
    fn gr_mapping_examples() {
        assert_eq!(gr_mapping(1.0, 1.0, 2.0), PotentialSpec::Oblate { k: 1.0, b: 4.0 });
        assert_eq!(gr_mapping(1.0, f64::INFINITY, 2.0), PotentialSpec::Oblate { k: 1.0, b: 0.0 });
        let (gm, c, ell) = (1.3, 4.0, 2.5);
        let gr = PotentialSpec::GrMassive { gm, c };
        let ob = gr_mapping(gm, c, ell);
        for i in 1..50 {
            let r = 0.3 * i as f64;
            let direct = -gm / r + ell * ell / (2.0 * r * r) - gm * ell * ell / (c * c * r * r * r);
            let a = v_eff(&gr, &ctx(ell, 0.0), r);
            let b = v_eff(&ob, &ctx(ell, 0.0), r);
            assert!((a - direct).abs() <= 1e-15 * direct.abs().max(1.0));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn kottler_maximum() {
        assert!((kottler_r_max(1.0, 1.0) - 3f64.cbrt()).abs() < 1e-15);
        let (rs, rl) = (2.0, 50.0);
        let rm = kottler_r_max(rs, rl);
        let f = |r: f64| kottler_potential(rs, rl, r);
        let d = finite_diff(&f, rm, 1, StepPolicy::Relative(1e-3), (0.0, f64::INFINITY)).unwrap();
        assert!(d.value.abs() < 1e-10, "{d:?}");
    }

    #[test]
    fn kottler_solar_scale() {
        // r_s = 2GM/c² for the Sun; r_Λ = 1/sqrt(Λ) with Λ ≈ 1.1e-52 m⁻².
        let r_s = 2953.0;
        let r_lambda = 1.0 / 1.1e-52f64.sqrt();
        let pc = 3.0857e16;
        let r = kottler_r_max(r_s, r_lambda) / pc;
        assert!(r > 30.0 && r < 200.0, "{r} pc");
    }

    #[test]
    fn ring_series() {
        let c = ring_coefficients(3);
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] - 0.25).abs() < 1e-12 && (c[2] - 9.0 / 64.0).abs() < 1e-12);
        let far = ring_potential(1.0, 1.0, 1e6, 3).unwrap();
        assert!((far + 1e-6).abs() < 1e-15);
        assert!(matches!(ring_potential(1.0, 1.0, 1.005, 3), Err(PotentialError::NonConvergent { .. })));
    }

    #[test]
    fn spheroid_matches_oblate_on_equator() {
        let (gm, radius, eps) = (1.0, 1.0, 0.1);
        let j2 = 2.0 * eps / 5.0;
        let ob = spheroid_equatorial_oblate(gm, radius, j2);
        for i in 1..=40 {
            let r = 1.0 + 0.25 * i as f64;
            let a = spheroid_potential(gm, radius, j2, r, std::f64::consts::FRAC_PI_2);
            let b = v_eff(&ob, &ctx(0.0, 0.0), r);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn planetary_sum_reduces_to_central_mass() {
        let phi = planetary_sum(1.0, &[], 2.0, 3).unwrap();
        assert_eq!(phi, -0.5);
        let bodies = [Body { gm: 1e-3, a: 1.0 }, Body { gm: 2e-3, a: 5.0 }];
        let phi = planetary_sum(1.0, &bodies, 2.0, 3).unwrap();
        assert!(phi < -0.5);
    }

    #[test]
    fn stationary_points_vanish_by_finite_differences() {
        let cases = [
            (PotentialSpec::Kepler { k: 1.0 }, ctx(1.0, -0.2)),
            (PotentialSpec::Harmonic { k: 1.0 }, ctx(1.0, 2.0)),
            (PotentialSpec::Oblate { k: 0.1, b: 1.0 }, ctx(2.0, -1e-3)),
            (PotentialSpec::Cosmological { k: 1.0, lambda: 1e-3 }, ctx(1.0, -0.182)),
            (PotentialSpec::Cosmological { k: 1.0, lambda: -0.1 }, ctx(1.0, 0.0)),
            (PotentialSpec::Cornell { a: 1.0, b: 1.0 }, ctx(1.0, 1.0)),
        ];
        for (spec, c) in cases {
            for p in stationary_points(&spec, &c).unwrap().points {
                let f = |r: f64| v_eff(&spec, &c, r);
                let d = finite_diff(&f, p.r, 1, StepPolicy::Absolute(1e-6 * p.r), (0.0, f64::INFINITY)).unwrap();
                assert!(d.value.abs() < 1e-9 * (1.0 + p.value.abs()), "{spec:?} at {}: {}", p.r, d.value);
            }
        }
    }

    #[test]
    fn turning_points_satisfy_energy_and_sign_alternation() {
        let cases = [
            (PotentialSpec::Kepler { k: 1.0 }, ctx((3.0f64 / 8.0).sqrt(), -1.0)),
            (PotentialSpec::Harmonic { k: 1.0 }, ctx(1.0, 2.0)),
            (PotentialSpec::Oblate { k: 0.1, b: 1.0 }, ctx(2.0, -1e-3)),
            (PotentialSpec::Cosmological { k: 1.0, lambda: 1e-3 }, ctx(1.0, -0.182)),
            (PotentialSpec::Cosmological { k: 1.0, lambda: -0.1 }, ctx(1.0, 0.0)),
            (PotentialSpec::Cornell { a: 1.0, b: 1.0 }, ctx(1.0, 1.0)),
            (PotentialSpec::GrMassive { gm: 0.1, c: 1.0 }, ctx(2.0, -1e-3)),
        ];
        for (spec, c) in cases {
            let tp = turning_points(&spec, &c).unwrap();
            for r in [tp.r1, tp.r2] {
                assert!((v_eff(&spec, &c, r) - c.energy).abs() < 1e-9, "{spec:?}");
            }
            let w = tp.r2 - tp.r1;
            assert!(c.energy - v_eff(&spec, &c, tp.r1 + 1e-3 * w) > 0.0);
            assert!(c.energy - v_eff(&spec, &c, tp.r1 - 1e-3 * w) < 0.0);
            assert!(c.energy - v_eff(&spec, &c, tp.r2 + 1e-3 * w) < 0.0);
            let report = classify_regime(&spec, &c, &RegimeOptions::default()).unwrap();
            assert_eq!(report.regime, Regime::Bounded);
            assert!(tp.all.vieta_residual() < 1e-10);
        }
    }
}
