//! Special functions used by the closed-form orbits.
//!
//! Incomplete elliptic integrals go through Carlson's symmetric forms
//! `R_F`, `R_J`, `R_C`; the Jacobi sine uses the descending AGM; the sine
//! and cosine integrals switch between a power series, a continued fraction
//! for `E₁(ix)` and the large-argument asymptotic expansion.

use nalgebra::Complex;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },
    #[error("{function} diverges at this argument")]
    Divergent { function: &'static str },
    #[error("characteristic {xi} puts a pole at sin φ = {sin_phi}")]
    Pole { xi: f64, sin_phi: f64 },
}

/// Amplitude sine, modulus and characteristic for `F` and `Π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticArgs {
    pub sin_phi: f64,
    pub kappa: f64,
    pub xi: f64,
}

impl EllipticArgs {
    pub fn new(sin_phi: f64, kappa: f64, xi: f64) -> Self {
        Self { sin_phi, kappa, xi }
    }

    fn check(&self, function: &'static str) -> Result<(), SpecFunError> {
        if !(self.sin_phi.abs() <= 1.0) {
            return Err(SpecFunError::Domain { function, value: self.sin_phi });
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(SpecFunError::Domain { function, value: self.kappa });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Carlson symmetric integrals
// ---------------------------------------------------------------------------

/// `R_F(x, y, z)` for non-negative arguments, at most one of them zero.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    let a0 = (x + y + z) / 3.0;
    let q = (3.0 * f64::EPSILON).powf(-1.0 / 6.0) * (a0 - x).abs().max((a0 - y).abs()).max((a0 - z).abs());
    let mut a = a0;
    let mut pow4 = 1.0;
    let (x0, y0) = (x, y);
    while pow4 * q >= a.abs() {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sy * sz + sz * sx;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        a = 0.25 * (a + lam);
        pow4 *= 0.25;
    }
    let xx = (a0 - x0) * pow4 / a;
    let yy = (a0 - y0) * pow4 / a;
    let zz = -xx - yy;
    let e2 = xx * yy - zz * zz;
    let e3 = xx * yy * zz;
    (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / a.sqrt()
}

/// `R_C(x, y)` for `x ≥ 0`, `y > 0`.
pub fn carlson_rc(x: f64, y: f64) -> f64 {
    let (mut x, mut y) = (x, y);
    let a0 = (x + 2.0 * y) / 3.0;
    let q = (3.0 * f64::EPSILON).powf(-1.0 / 8.0) * (a0 - x).abs();
    let mut a = a0;
    let mut pow4 = 1.0;
    let y0 = y;
    while pow4 * q >= a.abs() {
        let lam = 2.0 * x.sqrt() * y.sqrt() + y;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        a = 0.25 * (a + lam);
        pow4 *= 0.25;
    }
    let s = (y0 - a0) * pow4 / a;
    let poly = 1.0
        + s * s
            * (3.0 / 10.0 + s * (1.0 / 7.0 + s * (3.0 / 8.0 + s * (9.0 / 22.0 + s * (159.0 / 208.0 + s * 9.0 / 8.0)))));
    poly / a.sqrt()
}

/// `R_J(x, y, z, p)` for non-negative `x, y, z` (at most one zero) and `p > 0`.
pub fn carlson_rj(x: f64, y: f64, z: f64, p: f64) -> f64 {
    let (mut x, mut y, mut z, mut p) = (x, y, z, p);
    let a0 = (x + y + z + 2.0 * p) / 5.0;
    let delta = (p - x) * (p - y) * (p - z);
    let q = (0.25 * f64::EPSILON).powf(-1.0 / 6.0)
        * (a0 - x).abs().max((a0 - y).abs()).max((a0 - z).abs()).max((a0 - p).abs());
    let (x0, y0, z0) = (x, y, z);
    let mut a = a0;
    let mut pow4 = 1.0;
    let mut sum = 0.0;
    while pow4 * q >= a.abs() {
        let (sx, sy, sz, sp) = (x.sqrt(), y.sqrt(), z.sqrt(), p.sqrt());
        let lam = sx * sy + sy * sz + sz * sx;
        let d = (sp + sx) * (sp + sy) * (sp + sz);
        let e = delta * pow4 * pow4 * pow4 / (d * d);
        sum += pow4 * carlson_rc(1.0, 1.0 + e) / d;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        p = 0.25 * (p + lam);
        a = 0.25 * (a + lam);
        pow4 *= 0.25;
    }
    let xx = (a0 - x0) * pow4 / a;
    let yy = (a0 - y0) * pow4 / a;
    let zz = (a0 - z0) * pow4 / a;
    let pp = -0.5 * (xx + yy + zz);
    let e2 = xx * yy + xx * zz + yy * zz - 3.0 * pp * pp;
    let e3 = xx * yy * zz + 2.0 * e2 * pp + 4.0 * pp * pp * pp;
    let e4 = (2.0 * xx * yy * zz + e2 * pp + 3.0 * pp * pp * pp) * pp;
    let e5 = xx * yy * zz * pp * pp;
    let series = 1.0 - 3.0 * e2 / 14.0 + e3 / 6.0 + 9.0 * e2 * e2 / 88.0 - 3.0 * e4 / 22.0 - 9.0 * e2 * e3 / 52.0
        + 3.0 * e5 / 26.0;
    pow4 * series / (a * a.sqrt()) + 6.0 * sum
}

// ---------------------------------------------------------------------------
// Elliptic integrals
// ---------------------------------------------------------------------------

/// Incomplete elliptic integral of the first kind, `∫₀^s dt / √((1-t²)(1-κ²t²))`.
pub fn ellip_f(args: EllipticArgs) -> Result<f64, SpecFunError> {
    args.check("ellip_f")?;
    let s = args.sin_phi;
    let k = args.kappa;
    if k == 1.0 {
        if s.abs() == 1.0 {
            return Err(SpecFunError::Divergent { function: "ellip_f" });
        }
        return Ok(s.atanh());
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let c2 = (1.0 - s) * (1.0 + s);
    Ok(s * carlson_rf(c2, 1.0 - k * k * s * s, 1.0))
}

/// Complete integral `K(κ) = F(1, κ)`.
pub fn ellip_k(kappa: f64) -> Result<f64, SpecFunError> {
    ellip_f(EllipticArgs::new(1.0, kappa, 0.0))
}

/// Incomplete elliptic integral of the third kind,
/// `∫₀^s dt / ((1-ξt²) √((1-t²)(1-κ²t²)))`.
pub fn ellip_pi(args: EllipticArgs) -> Result<f64, SpecFunError> {
    args.check("ellip_pi")?;
    let EllipticArgs { sin_phi: s, kappa: k, xi } = args;
    let p = 1.0 - xi * s * s;
    if p == 0.0 {
        return Err(SpecFunError::Pole { xi, sin_phi: s });
    }
    if p < 0.0 {
        return Err(SpecFunError::Domain { function: "ellip_pi", value: xi });
    }
    if xi == 0.0 {
        return ellip_f(args);
    }
    if k == 1.0 {
        return pi_kappa_one(s, xi);
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let c2 = (1.0 - s) * (1.0 + s);
    let d2 = 1.0 - k * k * s * s;
    Ok(s * carlson_rf(c2, d2, 1.0) + xi / 3.0 * s * s * s * carlson_rj(c2, d2, 1.0, p))
}

/// `Π(s, ξ, 1)` by partial fractions of `1/((1-ξt²)(1-t²))`.
fn pi_kappa_one(s: f64, xi: f64) -> Result<f64, SpecFunError> {
    if s.abs() == 1.0 {
        return Err(SpecFunError::Divergent { function: "ellip_pi" });
    }
    let at = s.atanh();
    if xi < 0.0 {
        let q = (-xi).sqrt();
        Ok((at + q * (q * s).atan()) / (1.0 - xi))
    } else if xi == 1.0 {
        Ok(0.5 * (s / ((1.0 - s) * (1.0 + s)) + at))
    } else {
        let q = xi.sqrt();
        Ok((at - q * (q * s).atanh()) / (1.0 - xi))
    }
}

// ---------------------------------------------------------------------------
// Jacobi functions
// ---------------------------------------------------------------------------

/// Jacobi amplitude `am(u, κ)` by the descending AGM.
pub fn jacobi_am(u: f64, kappa: f64) -> f64 {
    assert!((0.0..=1.0).contains(&kappa), "modulus must lie in [0, 1]");
    if kappa == 0.0 {
        return u;
    }
    if kappa == 1.0 {
        return 2.0 * u.exp().atan() - FRAC_PI_2;
    }
    let mut a = vec![1.0];
    let mut c = vec![kappa];
    let mut b = (1.0 - kappa * kappa).sqrt();
    while c.last().unwrap().abs() > f64::EPSILON * a.last().unwrap() && a.len() < 40 {
        let an = *a.last().unwrap();
        a.push(0.5 * (an + b));
        c.push(0.5 * (an - b));
        b = (an * b).sqrt();
    }
    let n = a.len() - 1;
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    phi
}

/// Jacobi elliptic sine `sn(u, κ) = sin am(u, κ)`; `tanh u` at `κ = 1`.
pub fn jacobi_sn(u: f64, kappa: f64) -> f64 {
    if kappa == 1.0 {
        return u.tanh();
    }
    jacobi_am(u, kappa).sin()
}

// ---------------------------------------------------------------------------
// Sine and cosine integrals
// ---------------------------------------------------------------------------

const SERIES_MAX: f64 = 4.0;
/// Beyond this the asymptotic expansion reaches double precision.
pub const ASYMPTOTIC_MIN: f64 = 32.0;

fn si_ci_series(x: f64) -> (f64, f64) {
    // term = x^m / m!, sign (-1)^{floor(m/2)}; odd m feed Si, even m feed Ci.
    let mut term = x;
    let mut si = x;
    let mut ci = 0.0;
    let mut m = 1u32;
    loop {
        m += 1;
        term *= x / m as f64;
        let add = term / m as f64;
        let signed = if (m / 2) % 2 == 1 { -add } else { add };
        if m.is_multiple_of(2) {
            ci += signed;
        } else {
            si += signed;
        }
        if m > 3 && add < 1e-17 * si.abs().max(ci.abs()).max(1.0) {
            break;
        }
    }
    (si, EULER_GAMMA + x.ln() + ci)
}

fn si_ci_continued_fraction(x: f64) -> (f64, f64) {
    // Modified Lentz for E₁(ix) e^{ix}.
    let tiny = 1e-300;
    let mut b = Complex::new(1.0, x);
    let mut c = Complex::new(1.0 / tiny, 0.0);
    let mut d = Complex::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 2..10_000 {
        let a = -((i - 1) as f64).powi(2);
        b += Complex::new(2.0, 0.0);
        d = Complex::new(1.0, 0.0) / (d * a + b);
        c = b + Complex::new(a, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
            break;
        }
    }
    let h = Complex::new(x.cos(), -x.sin()) * h;
    (FRAC_PI_2 + h.im, -h.re)
}

/// Auxiliary functions `f(x)`, `g(x)` with `Si = π/2 - f cos x - g sin x` and
/// `Ci = f sin x - g cos x`, summed until the terms stop decreasing.
fn aux_fg_asymptotic(x: f64) -> (f64, f64) {
    let inv2 = 1.0 / (x * x);
    let mut f = 0.0;
    let mut g = 0.0;
    let mut tf = 1.0 / x;
    let mut tg = inv2;
    let mut prev = f64::INFINITY;
    for n in 0..200 {
        if tf.abs() > prev {
            break;
        }
        f += tf;
        g += tg;
        prev = tf.abs();
        if tf.abs() < 1e-18 * f.abs() {
            break;
        }
        let m = 2.0 * n as f64;
        tf *= -(m + 1.0) * (m + 2.0) * inv2;
        tg *= -(m + 2.0) * (m + 3.0) * inv2;
    }
    (f, g)
}

fn si_ci_asymptotic(x: f64) -> (f64, f64) {
    let (f, g) = aux_fg_asymptotic(x);
    let (s, c) = x.sin_cos();
    (FRAC_PI_2 - f * c - g * s, f * s - g * c)
}

/// Which evaluation branch of `Si`/`Ci` covers `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiCiBranch {
    Series,
    ContinuedFraction,
    Asymptotic,
}

/// `(Si(x), Ci(x))` for `x > 0` using a chosen branch, exposed for seam tests.
pub fn si_ci_with(x: f64, branch: SiCiBranch) -> (f64, f64) {
    match branch {
        SiCiBranch::Series => si_ci_series(x),
        SiCiBranch::ContinuedFraction => si_ci_continued_fraction(x),
        SiCiBranch::Asymptotic => si_ci_asymptotic(x),
    }
}

fn branch_for(x: f64) -> SiCiBranch {
    if x <= SERIES_MAX {
        SiCiBranch::Series
    } else if x < ASYMPTOTIC_MIN {
        SiCiBranch::ContinuedFraction
    } else {
        SiCiBranch::Asymptotic
    }
}

/// Sine integral `Si(x) = ∫₀ˣ sin t / t dt`.
pub fn sine_integral(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    let si = si_ci_with(ax, branch_for(ax)).0;
    si.copysign(x)
}

/// Cosine integral `Ci(x) = γ + ln x + ∫₀ˣ (cos t - 1)/t dt`, `x > 0`.
pub fn cosine_integral(x: f64) -> Result<f64, SpecFunError> {
    if !(x > 0.0) {
        return Err(SpecFunError::Domain { function: "cosine_integral", value: x });
    }
    Ok(si_ci_with(x, branch_for(x)).1)
}
