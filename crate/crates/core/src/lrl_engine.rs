//! Conserved-vector construction.
//!
//! The vector is `𝒜 = S r̂ + P φ̂` with `S = r g(r)` and `P = ℓ ṙ h(r)`, where
//! `h` solves `h'' + P₁ h' + P₂ h = 0` and `g = r h V_eff' - 2 r h' (𝓔 - V_eff)`.
//!
//! Families other than Kepler and harmonic share one template built on the
//! phase `Θ(r) = ∫ ℓ dτ / (τ² √w)`, `w = 2(𝓔 - V_eff)`, measured from one
//! turning point:
//!
//! ```text
//! h = (c₁ cos Θ + c₂ sin Θ) / √w,    g = ∓ (ℓ/r) (c₁ sin Θ - c₂ cos Θ),
//! ```
//!
//! with the upper sign when `Θ` starts at the outer turning point. The
//! modulus is `ℓ √(c₁² + c₂²)`.
//!
//! A closed form depends on `r` only, so it describes one radial leg. Along an
//! orbit the phase is unwrapped: legs are numbered by turning-point passages,
//! even legs moving inward, leg 0 ending at the inner turning point.

use crate::oracle::{self, Drift, Integrand, OdeOptions, OracleError, OrbitSample, Quantity};
use crate::poly_roots::RootSet;
use crate::potentials::{
    self, canonical, classify_regime, turning_points_for, PotentialError, PotentialSpec, RadialContext, Regime,
    RegimeOptions,
};
use crate::specfun::{self, EllipticArgs, SpecFunError};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("turning point at r = {r}: E - V_eff = {margin}")]
    TurningPointSingularity { r: f64, margin: f64 },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("closed form needs a bounded orbit, regime is {0}")]
    Regime(&'static str),
    #[error("root ordering violated: {0}")]
    RootOrdering(String),
    #[error("E < V_eff at r = {r} (margin {margin})")]
    RealityViolation { r: f64, margin: f64 },
    #[error("trajectory branch undefined at phi = {phi}")]
    BranchDomain { phi: f64 },
    #[error("{what} did not converge")]
    NonConvergence { what: &'static str },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

// ---------------------------------------------------------------------------
// Generic ansatz
// ---------------------------------------------------------------------------

/// Coefficients `(P₁, P₂)` of the `h` equation at `r`.
pub fn ansatz_coefficients(spec: &PotentialSpec, ctx: &RadialContext, r: f64) -> Result<(f64, f64), EngineError> {
    let (spec, ctx) = canonical(spec, ctx);
    let (v, d1, _) = potentials::v_eff_derivs(&spec, &ctx, r);
    let w = ctx.energy - v;
    let scale = ctx.energy.abs().max(v.abs()).max(f64::MIN_POSITIVE);
    if w.abs() <= 1e-12 * scale {
        return Err(EngineError::TurningPointSingularity { r, margin: w });
    }
    let lap = potentials::laplacian_v_eff(&spec, &ctx, r);
    let l2 = ctx.ell * ctx.ell;
    let r4 = r.powi(4);
    let p1 = (4.0 * w - 3.0 * r * d1) / (2.0 * r * w);
    let p2 = -(r4 * lap - l2) / (2.0 * r4 * w);
    Ok((p1, p2))
}

/// The `g` that makes `𝒜` conserved for a given `h`.
pub fn g_from_h(spec: &PotentialSpec, ctx: &RadialContext, h: f64, dh_dr: f64, r: f64) -> f64 {
    let (spec, ctx) = canonical(spec, ctx);
    let (v, d1, _) = potentials::v_eff_derivs(&spec, &ctx, r);
    r * h * d1 - 2.0 * r * dh_dr * (ctx.energy - v)
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rule for smooth phase integrals
// ---------------------------------------------------------------------------

const GL_ORDER: usize = 20;

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

fn gl_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre();
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            sum += wi * f(mid + 0.5 * h * xi);
        }
    }
    0.5 * h * sum
}

/// Phase from the outer turning point by the substitution
/// `τ = c + h cos θ`, which removes both inverse-square-root endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadPhase {
    ell: f64,
    r1: f64,
    r2: f64,
    /// Leading coefficient and power in `w = lead · Π(τ - ρᵢ) / τ^power`.
    lead: f64,
    power: i32,
    others: Vec<f64>,
    pairs: Vec<(f64, f64)>,
}

impl QuadPhase {
    fn reduced(&self, tau: f64) -> f64 {
        let mut p = -self.lead;
        for &x in &self.others {
            p *= tau - x;
        }
        for &(re, im) in &self.pairs {
            p *= (tau - re) * (tau - re) + im * im;
        }
        p / tau.powi(self.power)
    }

    pub fn eval(&self, r: f64) -> f64 {
        let c = 0.5 * (self.r1 + self.r2);
        let hw = 0.5 * (self.r2 - self.r1);
        let top = ((r - c) / hw).clamp(-1.0, 1.0).acos();
        if top == 0.0 {
            return 0.0;
        }
        let panels = ((top / PI * 12.0).ceil() as usize).max(1);
        gl_integrate(
            |th| {
                let tau = c + hw * th.cos();
                self.ell / (tau * tau * self.reduced(tau).sqrt())
            },
            0.0,
            top,
            panels,
        )
    }
}

// ---------------------------------------------------------------------------
// Closed-form pairs
// ---------------------------------------------------------------------------

/// Turning point at which a family's phase vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseOrigin {
    Outer,
    Inner,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Form {
    Kepler,
    Harmonic,
    /// `Θ = scale · F(s, κ)`.
    Oblate {
        r0: f64,
        kappa: f64,
        scale: f64,
    },
    AntiDeSitter {
        phase: QuadPhase,
    },
    /// `Θ = scale · [r₁ F(s, κ) - (r₁ - r₀) Π(s, ξ, κ)]`.
    DeSitter {
        r0: f64,
        r3: f64,
        xi: f64,
        kappa: f64,
        scale: f64,
    },
    /// `Θ = scale · Π(s, ξ, κ)`.
    Cornell {
        r0: f64,
        xi: f64,
        kappa: f64,
        scale: f64,
    },
}

/// Closed-form `(h, g)` with its landmarks. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedFieldPair {
    /// Canonical family (GR and STR are rewritten).
    pub spec: PotentialSpec,
    pub ctx: RadialContext,
    pub c1: f64,
    pub c2: f64,
    pub form: Form,
    pub r1: f64,
    pub r2: f64,
    pub landmarks: RootSet,
    /// Phase swept between the turning points (`∞` when `r₂` is a double root).
    pub half_sweep: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LRLVector {
    pub x: f64,
    pub y: f64,
    pub modulus: f64,
    /// Evaluated within `1e-9 (r₂ - r₁)` of a turning point.
    pub at_turning_point: bool,
}

impl LRLVector {
    pub fn from_components(s: f64, p: f64, phi: f64) -> Self {
        let (sn, cs) = phi.sin_cos();
        let x = s * cs - p * sn;
        let y = s * sn + p * cs;
        Self { x, y, modulus: x.hypot(y), at_turning_point: false }
    }
}

/// `w = lead · Π(r - ρ) / r^power` for the canonical families.
fn reality_lead(spec: &PotentialSpec, ctx: &RadialContext) -> (f64, i32) {
    match *spec {
        PotentialSpec::Kepler { .. } => (2.0 * ctx.energy, 2),
        PotentialSpec::Harmonic { k } => (-2.0 * k, 2),
        PotentialSpec::Oblate { .. } => (2.0 * ctx.energy, 3),
        PotentialSpec::Cosmological { lambda, .. } => (2.0 * lambda, 2),
        PotentialSpec::Cornell { b, .. } => (-2.0 * b, 2),
        _ => unreachable!("canonical families only"),
    }
}

fn root_below(roots: &[f64], x: f64) -> Option<f64> {
    let gap = 1e-9 * x.abs().max(1.0);
    roots.iter().copied().filter(|&r| r < x - gap).fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
}

fn root_above(roots: &[f64], x: f64) -> Option<f64> {
    let gap = 1e-9 * x.abs().max(1.0);
    roots.iter().copied().filter(|&r| r > x + gap).fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.min(r))))
}

/// Build the closed-form pair for a bounded orbit. Defaults elsewhere use
/// `(c₁, c₂) = (1, 0)`.
pub fn closed_form_pair(
    spec: &PotentialSpec,
    ctx: &RadialContext,
    c1: f64,
    c2: f64,
) -> Result<ConservedFieldPair, EngineError> {
    let (cspec, cctx) = canonical(spec, ctx);
    let desitter = matches!(cspec, PotentialSpec::Cosmological { lambda, .. } if lambda > 0.0);
    let opts = RegimeOptions { allow_critical: desitter, ..RegimeOptions::default() };
    let report = classify_regime(&cspec, &cctx, &opts)?;
    if !matches!(report.regime, Regime::Bounded | Regime::CriticalMax) {
        return Err(EngineError::Regime(report.regime.name()));
    }
    let tp = turning_points_for(&cspec, &cctx, &report)?;
    let (r1, r2) = (tp.r1, tp.r2);
    let roots = tp.all.real_roots.clone();
    let ell = cctx.ell;
    let e = cctx.energy;
    let mut pair = ConservedFieldPair {
        spec: cspec,
        ctx: cctx,
        c1,
        c2,
        form: Form::Kepler,
        r1,
        r2,
        landmarks: tp.all.clone(),
        half_sweep: PI,
    };
    match cspec {
        PotentialSpec::Kepler { .. } => {}
        PotentialSpec::Harmonic { .. } => {
            pair.form = Form::Harmonic;
            pair.half_sweep = FRAC_PI_2;
        }
        PotentialSpec::Oblate { .. } => {
            let r0 = root_below(&roots, r1)
                .filter(|&r0| r0 > 0.0)
                .ok_or_else(|| EngineError::RootOrdering("oblate form needs 0 < r0 < r1 < r2".into()))?;
            let kappa = (r0 * (r2 - r1) / (r1 * (r2 - r0))).sqrt();
            let scale = SQRT_2 * ell / (e.abs() * r1 * (r2 - r0)).sqrt();
            pair.form = Form::Oblate { r0, kappa, scale };
            pair.half_sweep = scale * specfun::ellip_k(kappa)?;
        }
        PotentialSpec::Cosmological { lambda, .. } if lambda < 0.0 => {
            let (lead, power) = reality_lead(&cspec, &cctx);
            let mut others = roots.clone();
            for target in [r1, r2] {
                if let Some(i) =
                    (0..others.len()).min_by(|&a, &b| (others[a] - target).abs().total_cmp(&(others[b] - target).abs()))
                {
                    others.remove(i);
                }
            }
            let phase = QuadPhase { ell, r1, r2, lead, power, others, pairs: tp.all.complex_pairs.clone() };
            pair.half_sweep = phase.eval(r1);
            pair.form = Form::AntiDeSitter { phase };
        }
        PotentialSpec::Cosmological { lambda, .. } => {
            let r0 = root_below(&roots, r1)
                .filter(|&r0| r0 != 0.0)
                .ok_or_else(|| EngineError::RootOrdering("de Sitter form needs a root r0 < r1".into()))?;
            // At the barrier top the double root may come out split by
            // rounding; it is collapsed onto the barrier.
            let r3 = match root_above(&roots, r2) {
                _ if report.regime == Regime::CriticalMax => r2,
                Some(r3) => r3,
                None => return Err(EngineError::RootOrdering("de Sitter form needs a root r3 > r2".into())),
            };
            let xi = r0 * (r2 - r1) / (r1 * (r2 - r0));
            let kappa = ((r2 - r1) * (r3 - r0) / ((r3 - r1) * (r2 - r0))).sqrt().min(1.0);
            let scale = SQRT_2 * ell / (r0 * r1 * (lambda * (r3 - r1) * (r2 - r0)).sqrt());
            pair.form = Form::DeSitter { r0, r3, xi, kappa, scale };
            pair.half_sweep = if r3 == r2 { f64::INFINITY } else { pair.phase(r2)? };
        }
        PotentialSpec::Cornell { b, .. } => {
            let r0 = root_below(&roots, r1)
                .ok_or_else(|| EngineError::RootOrdering("Cornell form needs a root r0 < r1".into()))?;
            let xi = 1.0 - r1 / r2;
            let kappa = ((r2 - r1) / (r2 - r0)).sqrt();
            let scale = SQRT_2 * ell / (r2 * (b * (r2 - r0)).sqrt());
            pair.form = Form::Cornell { r0, xi, kappa, scale };
            pair.half_sweep = pair.phase(r1)?;
        }
        _ => unreachable!("canonical families only"),
    }
    Ok(pair)
}

fn leg_sign(leg: i64) -> f64 {
    if leg.rem_euclid(2) == 0 {
        -1.0
    } else {
        1.0
    }
}

fn parity(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

impl ConservedFieldPair {
    pub fn origin(&self) -> Option<PhaseOrigin> {
        match self.form {
            Form::Kepler | Form::Harmonic => None,
            Form::DeSitter { .. } => Some(PhaseOrigin::Inner),
            _ => Some(PhaseOrigin::Outer),
        }
    }

    fn w(&self, r: f64) -> f64 {
        2.0 * (self.ctx.energy - potentials::v_eff(&self.spec, &self.ctx, r))
    }

    fn l2(&self) -> f64 {
        self.ctx.ell * self.ctx.ell
    }

    /// Phase on the reference leg; `r` is clamped into `[r₁, r₂]`.
    pub fn phase(&self, r: f64) -> Result<f64, EngineError> {
        let (r1, r2) = (self.r1, self.r2);
        let r = r.clamp(r1, r2);
        let clamp01 = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        match &self.form {
            Form::Kepler | Form::Harmonic => Ok(f64::NAN),
            Form::Oblate { kappa, scale, .. } => {
                let s = clamp01((r1 * (r2 - r) / ((r2 - r1) * r)).sqrt());
                Ok(scale * specfun::ellip_f(EllipticArgs::new(s, *kappa, 0.0))?)
            }
            Form::AntiDeSitter { phase } => Ok(phase.eval(r)),
            Form::DeSitter { r0, xi, kappa, scale, .. } => {
                let s = clamp01(((r2 - r0) * (r - r1) / ((r2 - r1) * (r - r0))).sqrt());
                let f = specfun::ellip_f(EllipticArgs::new(s, *kappa, 0.0))?;
                let p = specfun::ellip_pi(EllipticArgs::new(s, *kappa, *xi))?;
                Ok(scale * (r1 * f - (r1 - r0) * p))
            }
            Form::Cornell { xi, kappa, scale, .. } => {
                let s = clamp01(((r2 - r) / (r2 - r1)).sqrt());
                Ok(scale * specfun::ellip_pi(EllipticArgs::new(s, *kappa, *xi))?)
            }
        }
    }

    /// `dΘ/dr = ∓ ℓ / (r² √w)`.
    fn phase_slope(&self, r: f64, sqrt_w: f64) -> f64 {
        let dir = if self.origin() == Some(PhaseOrigin::Inner) { 1.0 } else { -1.0 };
        dir * self.ctx.ell / (r * r * sqrt_w)
    }

    fn singular(&self, r: f64) -> Result<f64, EngineError> {
        let w = self.w(r);
        if w <= 0.0 {
            return Err(EngineError::TurningPointSingularity { r, margin: 0.5 * w });
        }
        Ok(w)
    }

    pub fn h(&self, r: f64) -> Result<f64, EngineError> {
        let (c1, c2) = (self.c1, self.c2);
        match self.form {
            Form::Kepler => {
                let PotentialSpec::Kepler { k } = self.spec else { unreachable!() };
                if c2 == 0.0 {
                    return Ok(c1);
                }
                let q = self.singular(r)? * r * r;
                Ok(c1 + c2 * (k * r - self.l2()) / q.sqrt())
            }
            Form::Harmonic => {
                let x1 = (r * r - self.r1 * self.r1).sqrt();
                let x2 = (self.r2 * self.r2 - r * r).sqrt();
                if (c1 != 0.0 && !(x1 > 0.0)) || (c2 != 0.0 && !(x2 > 0.0)) {
                    return Err(EngineError::TurningPointSingularity { r, margin: 0.0 });
                }
                Ok(c1 / x1 + c2 / x2)
            }
            _ => {
                let w = self.singular(r)?;
                let t = self.phase(r)?;
                Ok((c1 * t.cos() + c2 * t.sin()) / w.sqrt())
            }
        }
    }

    pub fn dh_dr(&self, r: f64) -> Result<f64, EngineError> {
        let (c1, c2) = (self.c1, self.c2);
        match self.form {
            Form::Kepler => {
                let PotentialSpec::Kepler { k } = self.spec else { unreachable!() };
                if c2 == 0.0 {
                    return Ok(0.0);
                }
                let q = self.singular(r)? * r * r;
                let e = self.ctx.energy;
                Ok(c2 * (k / q.sqrt() - (k * r - self.l2()) * (2.0 * e * r + k) / (q * q.sqrt())))
            }
            Form::Harmonic => {
                let x1 = r * r - self.r1 * self.r1;
                let x2 = self.r2 * self.r2 - r * r;
                if (c1 != 0.0 && !(x1 > 0.0)) || (c2 != 0.0 && !(x2 > 0.0)) {
                    return Err(EngineError::TurningPointSingularity { r, margin: 0.0 });
                }
                Ok(-c1 * r / (x1 * x1.sqrt()) + c2 * r / (x2 * x2.sqrt()))
            }
            _ => {
                let w = self.singular(r)?;
                let sw = w.sqrt();
                let t = self.phase(r)?;
                let (sn, cs) = t.sin_cos();
                let big_c = c1 * cs + c2 * sn;
                let big_d = -c1 * sn + c2 * cs;
                let vp = potentials::v_eff_d1(&self.spec, &self.ctx, r);
                Ok(big_d * self.phase_slope(r, sw) / sw + big_c * vp / (w * sw))
            }
        }
    }

    pub fn g(&self, r: f64) -> Result<f64, EngineError> {
        let (c1, c2) = (self.c1, self.c2);
        let l2 = self.l2();
        match self.form {
            Form::Kepler => {
                let PotentialSpec::Kepler { k } = self.spec else { unreachable!() };
                let q = (self.w(r) * r * r).max(0.0);
                Ok(c1 * (k / r - l2 / (r * r)) - c2 * l2 * q.sqrt() / (r * r))
            }
            Form::Harmonic => {
                let PotentialSpec::Harmonic { k } = self.spec else { unreachable!() };
                let x1 = (r * r - self.r1 * self.r1).max(0.0).sqrt();
                let x2 = (self.r2 * self.r2 - r * r).max(0.0).sqrt();
                let a1 = 2.0 * k * self.r2 * self.r2;
                let a2 = 2.0 * k * self.r1 * self.r1;
                Ok((c1 * a1 * x1 - c2 * a2 * x2) / (r * r))
            }
            _ => {
                let t = self.phase(r)?;
                let (sn, cs) = t.sin_cos();
                let eta = if self.origin() == Some(PhaseOrigin::Inner) { 1.0 } else { -1.0 };
                Ok(eta * self.ctx.ell / r * (c1 * sn - c2 * cs))
            }
        }
    }

    /// `ℓ √w h`, finite at the turning points.
    fn momentum_factor(&self, r: f64) -> Result<f64, EngineError> {
        let ell = self.ctx.ell;
        let (c1, c2) = (self.c1, self.c2);
        match self.form {
            Form::Kepler => {
                let PotentialSpec::Kepler { k } = self.spec else { unreachable!() };
                let sw = self.w(r).max(0.0).sqrt();
                Ok(ell * (c1 * sw + c2 * (k * r - self.l2()) / r))
            }
            Form::Harmonic => {
                let PotentialSpec::Harmonic { k } = self.spec else { unreachable!() };
                let x1 = (r * r - self.r1 * self.r1).max(0.0).sqrt();
                let x2 = (self.r2 * self.r2 - r * r).max(0.0).sqrt();
                Ok(ell * (2.0 * k).sqrt() * (c1 * x2 + c2 * x1) / r)
            }
            _ => {
                let t = self.phase(r)?;
                Ok(ell * (c1 * t.cos() + c2 * t.sin()))
            }
        }
    }

    fn reality_check(&self, r: f64) -> Result<(), EngineError> {
        let v = potentials::v_eff(&self.spec, &self.ctx, r);
        let margin = self.ctx.energy - v;
        let centrifugal = 0.5 * self.l2() / (r * r);
        let tol = 1e-10 * (self.ctx.energy.abs() + v.abs() + centrifugal).max(f64::MIN_POSITIVE);
        if margin < -tol {
            return Err(EngineError::RealityViolation { r, margin });
        }
        Ok(())
    }

    /// Unwrapped phase on `leg`.
    pub fn unwrap_phase(&self, theta: f64, leg: i64) -> f64 {
        // Zero multiples are skipped so that a critical orbit (`half = ∞`)
        // keeps a finite phase on its first legs.
        let turns = |m: f64| if m == 0.0 { 0.0 } else { m * self.half_sweep };
        let j = leg as f64;
        let even = leg.rem_euclid(2) == 0;
        match (self.origin(), even) {
            (Some(PhaseOrigin::Inner), true) => turns(j) - theta,
            (Some(PhaseOrigin::Inner), false) => turns(j - 1.0) + theta,
            (_, true) => turns(j) + theta,
            (_, false) => turns(j + 1.0) - theta,
        }
    }

    /// Reference-leg phase from the state `(r, ṙ)`. Near a simple turning
    /// point `Θ` is taken from `|ṙ|`, where it is well conditioned.
    fn phase_from_state(&self, r: f64, rdot: f64) -> Result<f64, EngineError> {
        let span = self.r2 - self.r1;
        // The window is also capped relative to the turning radius, which
        // matters when r₂/r₁ spans many decades.
        let near_inner = r - self.r1 < 0.02 * span.min(10.0 * self.r1);
        let near_outer = self.r2 - r < 0.02 * span.min(10.0 * self.r2) && self.half_sweep.is_finite();
        if !(near_inner || near_outer) {
            return self.phase(r);
        }
        let rt = if near_inner { self.r1 } else { self.r2 };
        let offset = self.turning_offset(rt, rdot.abs())?;
        let from_origin = match self.origin() {
            Some(PhaseOrigin::Inner) => near_inner,
            _ => near_outer,
        };
        Ok(if from_origin { offset } else { self.half_sweep - offset })
    }

    /// `∫₀^u 2ℓ dv / (τ² |w'(τ)|)` with `w(τ) = v²` on the allowed side of `rt`.
    fn turning_offset(&self, rt: f64, u: f64) -> Result<f64, EngineError> {
        if u == 0.0 {
            return Ok(0.0);
        }
        let wp = |tau: f64| -2.0 * potentials::v_eff_d1(&self.spec, &self.ctx, tau);
        let w0 = wp(rt);
        let value = gl_integrate(
            |v| {
                let target = v * v;
                let mut tau = rt + target / w0;
                for _ in 0..50 {
                    let d = (self.w(tau) - target) / wp(tau);
                    tau -= d;
                    if d.abs() <= 1e-15 * rt {
                        break;
                    }
                }
                2.0 * self.ctx.ell / (tau * tau * wp(tau).abs())
            },
            0.0,
            u,
            4,
        );
        if !value.is_finite() {
            return Err(EngineError::NonConvergence { what: "turning-point phase" });
        }
        Ok(value)
    }

    /// Vector continued onto `leg` from the state `(r, ṙ, φ)`.
    pub fn lrl_on_leg(&self, r: f64, rdot: f64, phi: f64, leg: i64) -> Result<LRLVector, EngineError> {
        let (c1, c2) = (self.c1, self.c2);
        let ell = self.ctx.ell;
        let (s, p) = match self.form {
            Form::Kepler => {
                let PotentialSpec::Kepler { k } = self.spec else { unreachable!() };
                let l2 = self.l2();
                (c1 * (k - l2 / r) + c2 * l2 * rdot, c1 * ell * rdot - c2 * ell * (k * r - l2) / r)
            }
            Form::Harmonic => {
                let PotentialSpec::Harmonic { k } = self.spec else { unreachable!() };
                let sk = (2.0 * k).sqrt();
                let prod = r * rdot.abs() / sk;
                let (x1, x2) = if r < 0.5 * (self.r1 + self.r2) {
                    let x2 = (self.r2 * self.r2 - r * r).max(0.0).sqrt();
                    (prod / x2, x2)
                } else {
                    let x1 = (r * r - self.r1 * self.r1).max(0.0).sqrt();
                    (x1, prod / x1)
                };
                let sigma1 = parity((leg + 1).div_euclid(2));
                let sigma2 = parity(leg.div_euclid(2));
                let sg = leg_sign(leg);
                let a1 = 2.0 * k * self.r2 * self.r2;
                let a2 = 2.0 * k * self.r1 * self.r1;
                (
                    (c1 * sigma1 * a1 * x1 - c2 * sigma2 * a2 * x2) / r,
                    sg * ell * sk * (c1 * sigma1 * x2 + c2 * sigma2 * x1) / r,
                )
            }
            _ => {
                let theta = self.phase_from_state(r, rdot)?;
                let t = self.unwrap_phase(theta, leg);
                let (sn, cs) = t.sin_cos();
                let eta = if self.origin() == Some(PhaseOrigin::Inner) { 1.0 } else { -1.0 };
                (eta * ell * (c1 * sn - c2 * cs), eta * ell * (c1 * cs + c2 * sn))
            }
        };
        Ok(LRLVector::from_components(s, p, phi))
    }
}

/// The closed-form vector at `(r, φ)` with the branch `ṙ = sign_rdot · √w`.
pub fn lrl_evaluate(pair: &ConservedFieldPair, r: f64, phi: f64, sign_rdot: f64) -> Result<LRLVector, EngineError> {
    pair.reality_check(r)?;
    let s = r * pair.g(r)?;
    let p = sign_rdot.signum() * pair.momentum_factor(r)?;
    let mut v = LRLVector::from_components(s, p, phi);
    let gap = (r - pair.r1).abs().min((pair.r2 - r).abs());
    v.at_turning_point = gap <= 1e-9 * (pair.r2 - pair.r1);
    Ok(v)
}

/// `r² g² + 2ℓ² h² (𝓔 - V_eff)`.
pub fn modulus_squared(pair: &ConservedFieldPair, r: f64) -> f64 {
    let s = r * pair.g(r).unwrap_or(f64::NAN);
    let p = pair.momentum_factor(r).unwrap_or(f64::NAN);
    s * s + p * p
}

/// Fill `lrl_x`, `lrl_y` along an integrated orbit, counting turning-point
/// passages from sign changes of `ṙ`.
pub fn attach_lrl(samples: &mut [OrbitSample], pair: &ConservedFieldPair) -> Result<(), EngineError> {
    let Some(first) = samples.first().copied() else { return Ok(()) };
    let mid = 0.5 * (pair.r1 + pair.r2);
    let mut leg: i64 = if first.rdot < 0.0 || (first.rdot == 0.0 && first.r > mid) { 0 } else { 1 };
    let mut last = leg_sign(leg);
    let forward = samples.len() < 2 || samples[1].t >= samples[0].t;
    for s in samples.iter_mut() {
        if s.rdot != 0.0 && s.rdot.signum() != last {
            leg += if forward { 1 } else { -1 };
            last = s.rdot.signum();
        }
        let v = pair.lrl_on_leg(s.r, s.rdot, s.phi, leg)?;
        s.lrl_x = v.x;
        s.lrl_y = v.y;
    }
    Ok(())
}

/// Drift of the closed-form vector along an integrated orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftReport {
    pub drift: Drift,
    pub radial_period: f64,
    pub radial_periods: f64,
    pub samples: usize,
    pub modulus: f64,
}

/// Integrate from the outer turning point for `periods` radial periods and
/// measure how far the attached vector wanders.
pub fn conservation_drift(
    spec: &PotentialSpec,
    ctx: &RadialContext,
    c1: f64,
    c2: f64,
    periods: f64,
    opts: &OdeOptions,
) -> Result<DriftReport, EngineError> {
    let pair = closed_form_pair(spec, ctx, c1, c2)?;
    if !pair.half_sweep.is_finite() {
        return Err(EngineError::Regime(Regime::CriticalMax.name()));
    }
    let energy = potentials::radial_energy(spec, ctx);
    let inv = |r: f64| 1.0 / (2.0 * (energy - potentials::v_eff(spec, ctx, r))).max(1e-300).sqrt();
    let half = oracle::quadrature(&Integrand::new(&inv).singular_left().singular_right(), pair.r1, pair.r2, 1e-9)?;
    let period = 2.0 * half.value;
    let start = OrbitSample::start(pair.r2, 0.0, FRAC_PI_2);
    let mut samples = oracle::integrate_orbit(spec, ctx, &start, periods * period, opts)?;
    attach_lrl(&mut samples, &pair)?;
    let drift = oracle::drift(&samples, Quantity::Lrl)?;
    let modulus = samples[0].lrl_x.hypot(samples[0].lrl_y);
    Ok(DriftReport { drift, radial_period: period, radial_periods: periods, samples: samples.len(), modulus })
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

/// `Minus` puts `𝒜` on the positive axis, `Plus` on the negative one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Minus,
    Plus,
}

impl ConservedFieldPair {
    fn invert_phase(&self, target: f64) -> Result<f64, EngineError> {
        let critical = !self.half_sweep.is_finite();
        let f = |r: f64| match self.phase(r) {
            Ok(t) => Ok(t - target),
            // The phase diverges at the barrier of a critical orbit.
            Err(EngineError::SpecFun(_)) if critical => Ok(f64::INFINITY),
            Err(e) => Err(e),
        };
        let (mut lo, mut hi) = (self.r1, self.r2);
        let (mut flo, mut fhi) = (f(lo)?, if self.half_sweep.is_finite() { f(hi)? } else { f64::INFINITY });
        if self.origin() == Some(PhaseOrigin::Outer) {
            // Decreasing in r.
            if !(flo >= 0.0 && fhi <= 0.0) {
                return Err(EngineError::NonConvergence { what: "phase inversion bracket" });
            }
        } else if !(flo <= 0.0 && fhi >= 0.0) {
            return Err(EngineError::NonConvergence { what: "phase inversion bracket" });
        }
        if flo == 0.0 {
            return Ok(lo);
        }
        if fhi == 0.0 {
            return Ok(hi);
        }
        // Geometric steps while the bracket spans decades (critical orbits
        // reach r₂/r₁ ~ 1e17), relative tolerance throughout.
        let mid = |lo: f64, hi: f64| if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let tol = |hi: f64| 1e-12 * hi;
        for it in 0..300 {
            let bisect = it < 40 || !fhi.is_finite() || hi > 4.0 * lo;
            let mut x = if bisect { mid(lo, hi) } else { hi - fhi * (hi - lo) / (fhi - flo) };
            if !(x > lo && x < hi) {
                x = mid(lo, hi);
            }
            let fx = f(x)?;
            if fx == 0.0 || (hi - lo) < tol(hi) {
                return Ok(x);
            }
            if fx.signum() == flo.signum() {
                lo = x;
                flo = fx;
            } else {
                hi = x;
                fhi = fx;
            }
            if (hi - lo) < tol(hi) {
                return Ok(0.5 * (lo + hi));
            }
        }
        Err(EngineError::NonConvergence { what: "phase inversion" })
    }
}

/// Orbit radius at polar angle `phi`.
pub fn trajectory_r_of_phi(pair: &ConservedFieldPair, phi: f64, branch: Branch) -> Result<f64, EngineError> {
    let sign = match branch {
        Branch::Minus => -1.0,
        Branch::Plus => 1.0,
    };
    let sine_branch = pair.c1 == 0.0 && pair.c2 != 0.0;
    match &pair.form {
        Form::Kepler => {
            let PotentialSpec::Kepler { k } = pair.spec else { unreachable!() };
            let l2 = pair.l2();
            let e = (1.0 + 2.0 * pair.ctx.energy * l2 / (k * k)).max(0.0).sqrt();
            let trig = if sine_branch { phi.sin() } else { phi.cos() };
            let denom = 1.0 + sign * e * trig;
            if denom <= 0.0 {
                return Err(EngineError::BranchDomain { phi });
            }
            Ok(l2 / k / denom)
        }
        Form::Harmonic => {
            let (r1, r2) = (pair.r1, pair.r2);
            let c2 = phi.cos().powi(2);
            if sine_branch {
                let b2 = r2 * r2 / (r1 * r1) - 1.0;
                Ok(r2 / (1.0 + b2 * c2).sqrt())
            } else {
                let b1 = 1.0 - r1 * r1 / (r2 * r2);
                Ok(r1 / (1.0 - b1 * c2).sqrt())
            }
        }
        form => {
            let delta = pair.c2.atan2(pair.c1);
            let shift = match pair.origin() {
                Some(PhaseOrigin::Inner) => -sign * FRAC_PI_2,
                _ => sign * FRAC_PI_2,
            };
            let vartheta = phi + delta + shift;
            if let Form::Oblate { kappa, scale, .. } = form {
                let sn = specfun::jacobi_sn(vartheta / scale, *kappa);
                let (r1, r2) = (pair.r1, pair.r2);
                return Ok(r1 * r2 / (r1 + (r2 - r1) * sn * sn));
            }
            let half = pair.half_sweep;
            let target = if half.is_finite() {
                let m = vartheta.rem_euclid(2.0 * half);
                if m <= half {
                    m
                } else {
                    2.0 * half - m
                }
            } else {
                vartheta.abs()
            };
            pair.invert_phase(target)
        }
    }
}

/// Radius and vector at polar angle `phi` on the `branch` trajectory. The
/// sign of `ṙ` and the leg come from the phase accumulated since the outer
/// turning point. On a critical orbit `r` tends to the barrier as `|φ|` grows
/// and the vector loses accuracy once `r` is within rounding of it.
pub fn trajectory_point(pair: &ConservedFieldPair, phi: f64, branch: Branch) -> Result<(f64, LRLVector), EngineError> {
    let r = trajectory_r_of_phi(pair, phi, branch)?;
    let half = pair.half_sweep;
    let (leg, rdot) = match pair.form {
        Form::Kepler | Form::Harmonic => {
            let sine_branch = pair.c1 == 0.0 && pair.c2 != 0.0;
            let kepler = matches!(pair.form, Form::Kepler);
            let apo = match (kepler, sine_branch, branch) {
                (true, false, Branch::Minus) => 0.0,
                (true, false, Branch::Plus) => PI,
                (true, true, Branch::Minus) => FRAC_PI_2,
                (true, true, Branch::Plus) => -FRAC_PI_2,
                (false, false, _) => 0.0,
                (false, true, _) => FRAC_PI_2,
            };
            let leg = ((phi - apo) / half).floor() as i64;
            if kepler {
                // ṙ = (dr/dφ) ℓ / r² on the conic.
                let PotentialSpec::Kepler { k } = pair.spec else { unreachable!() };
                let l2 = pair.l2();
                let e = (1.0 + 2.0 * pair.ctx.energy * l2 / (k * k)).max(0.0).sqrt();
                let rdot = -e * k / pair.ctx.ell * (phi - apo).sin();
                (leg, rdot)
            } else {
                (leg, leg_sign(leg) * pair.w(r).max(0.0).sqrt())
            }
        }
        _ => {
            let delta = pair.c2.atan2(pair.c1);
            let sign = if branch == Branch::Minus { -1.0 } else { 1.0 };
            let vartheta = match pair.origin() {
                Some(PhaseOrigin::Inner) => phi + delta - sign * FRAC_PI_2,
                _ => phi + delta + sign * FRAC_PI_2,
            };
            // A critical orbit has one leg on each side of the start.
            let mut leg = if half.is_finite() {
                (vartheta / half).floor() as i64
            } else if vartheta >= 0.0 {
                0
            } else {
                -1
            };
            if pair.origin() == Some(PhaseOrigin::Inner) {
                leg += 1;
            }
            if !half.is_finite() && pair.phase(r).map_or(true, |t| (t - vartheta.abs()).abs() > 1e-6) {
                // r sits on the barrier to working precision; only φ still
                // carries the phase.
                let t = pair.unwrap_phase(vartheta.abs(), leg);
                let (sn, cs) = t.sin_cos();
                let ell = pair.ctx.ell;
                let (s, p) = (ell * (pair.c1 * sn - pair.c2 * cs), ell * (pair.c1 * cs + pair.c2 * sn));
                return Ok((r, LRLVector::from_components(s, p, phi)));
            }
            (leg, leg_sign(leg) * pair.w(r).max(0.0).sqrt())
        }
    };
    Ok((r, pair.lrl_on_leg(r, rdot, phi, leg)?))
}

// ---------------------------------------------------------------------------
// Table 1
// ---------------------------------------------------------------------------

/// Rows of the `h = a rⁿ` table. Row 4 comes in two forms: the printed `g`
/// and the `g = c₁/r - 2aℓ²/r^{3/2}` that `d(rg)/dr = ℓ²h/r²` forces. `mass`
/// is the stray symbol in its potential (`1` absorbs it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Table1Row {
    Linear,
    Quadratic,
    Cubic,
    SqrtPrinted { mass: f64 },
    SqrtAmended { mass: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Residuals {
    /// Max relative residual of `d(rg)/dr = ℓ²h/r²`.
    pub e5: f64,
    /// Max relative residual of the potential equation (additive constant
    /// of `V_eff` fixed so that `𝓔` drops out).
    pub e6: f64,
}

struct RowEval {
    h: f64,
    dh: f64,
    g: f64,
    dg: f64,
    v: f64,
    dv: f64,
}

fn table1_eval(row: Table1Row, a: f64, c1: f64, c2: f64, ell: f64, r: f64) -> RowEval {
    let l = ell * ell;
    let ln = r.ln();
    let (r2, r3) = (r * r, r * r * r);
    match row {
        Table1Row::Linear => RowEval {
            h: a * r,
            dh: a,
            g: c1 / r + a * l * ln / r,
            dg: -c1 / r2 + a * l * (1.0 - ln) / r2,
            v: l / (2.0 * r2) + l * ln * ln / (2.0 * r2) + c1 / a * ln / r2 + c2 / r2,
            dv: -l / r3 + l * (ln - ln * ln) / r3 + c1 / a * (1.0 - 2.0 * ln) / r3 - 2.0 * c2 / r3,
        },
        Table1Row::Quadratic => RowEval {
            h: a * r2,
            dh: 2.0 * a * r,
            g: a * l + c1 / r,
            dg: -c1 / r2,
            v: l / (2.0 * r2) + c1 / (a * r3) + c2 / r.powi(4),
            dv: -l / r3 - 3.0 * c1 / (a * r.powi(4)) - 4.0 * c2 / r.powi(5),
        },
        Table1Row::Cubic => RowEval {
            h: a * r3,
            dh: 3.0 * a * r2,
            g: 0.5 * a * l * r + c1 / r,
            dg: 0.5 * a * l - c1 / r2,
            v: l / (2.0 * r2) - 3.0 * l / (8.0 * r2) + c1 / (2.0 * a * r.powi(4)) + c2 / r.powi(6),
            dv: -l / r3 + 3.0 * l / (4.0 * r3) - 2.0 * c1 / (a * r.powi(5)) - 6.0 * c2 / r.powi(7),
        },
        Table1Row::SqrtPrinted { mass } | Table1Row::SqrtAmended { mass } => {
            let sr = r.sqrt();
            let (g, dg) = if matches!(row, Table1Row::SqrtPrinted { .. }) {
                (c1 / r - 2.0 * a * l / sr, -c1 / r2 + a * l / (r * sr))
            } else {
                (c1 / r - 2.0 * a * l / (r * sr), -c1 / r2 + 3.0 * a * l / (r2 * sr))
            };
            RowEval {
                h: a * sr,
                dh: 0.5 * a / sr,
                g,
                dg,
                v: l / (2.0 * r2) + 3.0 * l / (2.0 * mass * r2) - 2.0 * c1 / (a * r * sr) + c2 / r,
                dv: -l / r3 - 3.0 * l / (mass * r3) + 3.0 * c1 / (a * r2 * sr) - c2 / r2,
            }
        }
    }
}

/// Residuals of the underdetermined `(h, g, V_eff)` system for one row.
pub fn verify_table1_row(row: Table1Row, a: f64, c1: f64, c2: f64, ell: f64, r_grid: &[f64]) -> Table1Residuals {
    let l = ell * ell;
    let mut out = Table1Residuals { e5: 0.0, e6: 0.0 };
    for &r in r_grid {
        let t = table1_eval(row, a, c1, c2, ell, r);
        let lhs5 = t.g + r * t.dg;
        let rhs5 = l * t.h / (r * r);
        let scale5 = t.g.abs() + (r * t.dg).abs() + rhs5.abs();
        out.e5 = out.e5.max((lhs5 - rhs5).abs() / scale5.max(f64::MIN_POSITIVE));
        // V' + (h²)'/h² V = (r²g²)'/(2ℓ²h²)
        let q = 2.0 * t.dh / t.h;
        let drg2 = 2.0 * r * t.g * t.g + 2.0 * r * r * t.g * t.dg;
        let rhs6 = drg2 / (2.0 * l * t.h * t.h);
        let scale6 = t.dv.abs() + (q * t.v).abs() + rhs6.abs();
        out.e6 = out.e6.max((t.dv + q * t.v - rhs6).abs() / scale6.max(f64::MIN_POSITIVE));
    }
    out
}

// ---------------------------------------------------------------------------
// de Sitter landmarks as λ → 0
// ---------------------------------------------------------------------------

/// Landmarks at the critical energy `𝓔_M = V_eff(r_M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeSitterLandmarks {
    pub r_m: f64,
    pub r_big_m: f64,
    pub r1: f64,
    pub r0: f64,
    pub veff_r_big_m: f64,
    /// `r_M / r₀`.
    pub ratio: f64,
}

/// Small-`λ` series through the printed orders.
pub fn desitter_perturbative_landmarks(k: f64, ell: f64, lambda: f64) -> DeSitterLandmarks {
    desitter_series(k, ell, lambda, [-1.0 / 216.0, -5.0 / 3888.0], 53.0 / 432.0)
}

/// Same series with the `r₀` and `r_M/r₀` coefficients re-derived from the
/// quartic; every truncation error is then `O(λ)`.
pub fn desitter_rederived_landmarks(k: f64, ell: f64, lambda: f64) -> DeSitterLandmarks {
    desitter_series(k, ell, lambda, [5.0 / 72.0, 73.0 / 1296.0], 5.0 / 48.0)
}

fn desitter_series(k: f64, ell: f64, lambda: f64, r0c: [f64; 2], ratio2: f64) -> DeSitterLandmarks {
    let c1 = lambda.cbrt();
    let c2 = c1 * c1;
    let t1 = 2f64.cbrt();
    let t2 = t1 * t1;
    let (l2, l4, l6) = (ell * ell, ell.powi(4), ell.powi(6));
    let k73 = k.powf(7.0 / 3.0);
    let k113 = k.powf(11.0 / 3.0);
    DeSitterLandmarks {
        r_m: l2 / k,
        r_big_m: (k / (2.0 * lambda)).cbrt()
            - l2 / (3.0 * k)
            - 2.0 * t1 * l4 / (9.0 * k73) * c1
            - 20.0 / 81.0 * t2 * l6 / k113 * c2,
        r1: l2 / (2.0 * k) + 3.0 / 8.0 * t1 * l4 / k73 * c1 + 7.0 / 16.0 * t2 * l6 / k113 * c2,
        r0: -t2 * (k / lambda).cbrt() + l2 / (6.0 * k) + r0c[0] * t1 * l4 / k73 * c1 + r0c[1] * t2 * l6 / k113 * c2,
        veff_r_big_m: -3.0 * (0.5 * k).powf(2.0 / 3.0) * c1 + 0.5 * l2 * (2.0 / k).powf(2.0 / 3.0) * c2,
        ratio: -0.5 + t1 * l2 / (8.0 * k.powf(4.0 / 3.0)) * c1 + ratio2 * t2 * l4 / k.powf(8.0 / 3.0) * c2,
    }
}

/// Exact landmarks from the stationary quartic and the reality quartic at
/// `𝓔_M`.
pub fn desitter_exact_landmarks(k: f64, ell: f64, lambda: f64) -> Result<DeSitterLandmarks, EngineError> {
    let spec = PotentialSpec::Cosmological { k, lambda };
    let ctx = RadialContext { ell, energy: 0.0 };
    let st = potentials::stationary_points(&spec, &ctx)?;
    let (Some(min), Some(max)) = (st.min(), st.max()) else {
        return Err(EngineError::Potential(PotentialError::NoExtremum { reason: "no well and barrier".into() }));
    };
    let e_m = max.value;
    let ctx_m = RadialContext { ell, energy: e_m };
    let roots: RootSet = potentials::reality_roots(&spec, &ctx_m);
    let r0 = roots.real_roots.iter().copied().fold(f64::INFINITY, f64::min);
    let r1 = roots.real_roots.iter().copied().filter(|&r| r > 0.0 && r < min.r).fold(f64::NAN, f64::max);
    if !(r0 < 0.0) || !r1.is_finite() {
        return Err(EngineError::RootOrdering("critical de Sitter quartic lacks r0 < 0 < r1".into()));
    }
    Ok(DeSitterLandmarks { r_m: min.r, r_big_m: max.r, r1, r0, veff_r_big_m: e_m, ratio: max.r / r0 })
}
