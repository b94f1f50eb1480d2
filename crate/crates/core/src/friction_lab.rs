//! Newtonian attraction `μ/r²` with a friction force `-(α/r²) ṙ`.
//!
//! The friction law makes `ℓ` fall linearly in the polar angle,
//! `ℓ = β - αφ`, which turns the orbit equation into a quadrature that closes
//! with the sine and cosine integrals. `ξ = β/α - φ` is the angle left before
//! the angular momentum is used up.

use crate::oracle::{self, Drift, Integrand, OracleError};
use crate::specfun::{self, SpecFunError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrictionError {
    #[error("invalid friction parameters: {0}")]
    InvalidSpec(&'static str),
    #[error("angular momentum is exhausted at φ = {phi} (ℓ = {ell})")]
    AngularMomentumExhausted { phi: f64, ell: f64 },
    #[error("ξ = {xi} ≤ 0 at φ = {phi}; Ci diverges logarithmically there")]
    Domain { phi: f64, xi: f64 },
    #[error("denominator vanishes at φ = {phi}: the orbit escapes")]
    Escape { phi: f64 },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Parameters of the friction orbit. `a_mag` is the magnitude of the
/// conserved vector and `phi0` both the starting angle and its direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionSpec {
    pub alpha: f64,
    pub mu: f64,
    pub beta: f64,
    pub a_mag: f64,
    pub phi0: f64,
}

impl FrictionSpec {
    /// Parametrize by `ξ₀ = β/α - φ₀` instead of `β`.
    pub fn from_xi0(alpha: f64, mu: f64, a_mag: f64, xi0: f64, phi0: f64) -> Self {
        Self { alpha, mu, beta: alpha * (xi0 + phi0), a_mag, phi0 }
    }

    /// Left panel of the friction figure: the particle falls into the centre.
    pub fn crash_preset() -> Self {
        Self::from_xi0(1.0, 1.0, 1.0, 1e-2, 0.0)
    }

    /// Right panel: strong friction, weak attraction.
    pub fn spiral_preset() -> Self {
        Self::from_xi0(10.0, 1e-2, 1.0, 1e-2, 0.0)
    }

    pub fn validate(&self) -> Result<(), FrictionError> {
        let finite = [self.alpha, self.mu, self.beta, self.a_mag, self.phi0].iter().all(|x| x.is_finite());
        if !finite {
            return Err(FrictionError::InvalidSpec("parameters must be finite"));
        }
        if self.alpha < 0.0 {
            return Err(FrictionError::InvalidSpec("alpha must be non-negative"));
        }
        if !(self.a_mag > 0.0) {
            return Err(FrictionError::InvalidSpec("a_mag must be positive"));
        }
        if self.beta - self.alpha * self.phi0 <= 0.0 {
            return Err(FrictionError::InvalidSpec("ℓ must be positive at φ₀"));
        }
        Ok(())
    }

    pub fn xi(&self, phi: f64) -> f64 {
        self.beta / self.alpha - phi
    }

    pub fn xi0(&self) -> f64 {
        self.xi(self.phi0)
    }

    /// Angle at which `ℓ` reaches zero; `∞` without friction.
    pub fn crash_angle(&self) -> f64 {
        if self.alpha == 0.0 {
            f64::INFINITY
        } else {
            self.beta / self.alpha
        }
    }

    /// `(r, ṙ, φ, ℓ)` at `φ₀`: `r = 1/𝒜` with `ṙ = 0`, so that the vector
    /// points along `φ₀`.
    pub fn initial_state(&self) -> [f64; 4] {
        [1.0 / self.a_mag, 0.0, self.phi0, self.beta - self.alpha * self.phi0]
    }
}

/// `ℓ(φ) = β - αφ`.
pub fn ell_of_phi(spec: &FrictionSpec, phi: f64) -> Result<f64, FrictionError> {
    let ell = spec.beta - spec.alpha * phi;
    if ell <= 0.0 {
        return Err(FrictionError::AngularMomentumExhausted { phi, ell });
    }
    Ok(ell)
}

/// `z(φ) = μ ∫_{φ₀}^{φ} sin(φ - η) / (β - αη)² dη` in closed form.
pub fn z_of_phi(spec: &FrictionSpec, phi: f64) -> Result<f64, FrictionError> {
    let FrictionSpec { alpha, mu, beta, phi0, .. } = *spec;
    if mu == 0.0 || phi == phi0 {
        return Ok(0.0);
    }
    if alpha == 0.0 {
        return Ok(mu / (beta * beta) * (1.0 - (phi - phi0).cos()));
    }
    let (xi, xi0) = (spec.xi(phi), spec.xi0());
    if !(xi > 0.0) {
        return Err(FrictionError::Domain { phi, xi });
    }
    if !(xi0 > 0.0) {
        return Err(FrictionError::Domain { phi: phi0, xi: xi0 });
    }
    let d_si = specfun::sine_integral(xi) - specfun::sine_integral(xi0);
    // Kept as a difference so the logarithmic parts cancel before scaling.
    let d_ci = specfun::cosine_integral(xi)? - specfun::cosine_integral(xi0)?;
    let (s, c) = xi.sin_cos();
    Ok(mu / (alpha * alpha) * ((xi - xi0).sin() / xi0 - d_si * s - d_ci * c))
}

/// `r(φ) = 1 / (z(φ) + 𝒜 cos(φ - φ₀))`.
pub fn friction_trajectory(spec: &FrictionSpec, phi: f64) -> Result<f64, FrictionError> {
    ell_of_phi(spec, phi)?;
    let denom = z_of_phi(spec, phi)? + spec.a_mag * (phi - spec.phi0).cos();
    if !(denom > 0.0) {
        return Err(FrictionError::Escape { phi });
    }
    Ok(1.0 / denom)
}

/// How a sampled path ended before the requested angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// `ℓ → 0` at `phi`; the remaining motion is a radial fall into the centre.
    Crash { phi: f64, r_last: f64 },
    /// `r → ∞` at `phi`.
    Escape { phi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrictionPath {
    pub phi: Vec<f64>,
    pub r: Vec<f64>,
    pub termination: Option<Termination>,
}

/// Sample `r(φ)` on `n` points from `φ₀` towards `phi_end`, stopping at a
/// crash or an escape.
///
/// Near the crash angle the closed form only approaches zero like `1/|ln ξ|`,
/// so the last sample sits at `ξ = 10⁻¹² ξ₀` and is reported with the crash.
pub fn friction_path(spec: &FrictionSpec, phi_end: f64, n: usize) -> Result<FrictionPath, FrictionError> {
    spec.validate()?;
    let n = n.max(2);
    let crash = spec.crash_angle();
    let crashes = phi_end >= crash;
    let last = if crashes { crash - 1e-12 * spec.xi0() } else { phi_end };
    let mut out = FrictionPath { phi: Vec::with_capacity(n), r: Vec::with_capacity(n), termination: None };
    let step = (last - spec.phi0) / (n - 1) as f64;
    for i in 0..n {
        let phi = if i == n - 1 { last } else { spec.phi0 + step * i as f64 };
        match friction_trajectory(spec, phi) {
            Ok(r) => {
                out.phi.push(phi);
                out.r.push(r);
            }
            Err(FrictionError::Escape { .. }) => {
                let prev = *out.phi.last().unwrap_or(&spec.phi0);
                out.termination = Some(Termination::Escape { phi: escape_angle(spec, prev, phi)? });
                return Ok(out);
            }
            Err(e) => return Err(e),
        }
    }
    if crashes {
        out.termination = Some(Termination::Crash { phi: crash, r_last: *out.r.last().unwrap_or(&f64::NAN) });
    }
    Ok(out)
}

/// Bisect the denominator root between an admissible `lo` and `hi`.
fn escape_angle(spec: &FrictionSpec, mut lo: f64, mut hi: f64) -> Result<f64, FrictionError> {
    let denom =
        |phi: f64| -> Result<f64, FrictionError> { Ok(z_of_phi(spec, phi)? + spec.a_mag * (phi - spec.phi0).cos()) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if denom(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Conserved vectors along an integrated friction orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSeries {
    /// `K = ṙ/ℓ + u`.
    pub k: Vec<[f64; 2]>,
    /// `𝒜 = K × ℓ̂`.
    pub lrl: Vec<[f64; 2]>,
    pub k_drift: Drift,
    pub lrl_drift: Drift,
}

/// Build `K` and `𝒜` from samples `[t, r, ṙ, φ, ℓ]` produced by
/// [`oracle::integrate_friction`]. The integral `u` is accumulated over `φ`
/// with `v(φ) = μ/ℓ(φ)²`, starting at the first sample.
pub fn hamiltonian_vector(spec: &FrictionSpec, samples: &[[f64; 5]]) -> Result<HamiltonianSeries, FrictionError> {
    let v = |eta: f64| spec.mu / (spec.beta - spec.alpha * eta).powi(2);
    let mut u = [0.0f64; 2];
    let mut prev_phi = samples.first().map_or(spec.phi0, |s| s[3]);
    let mut k = Vec::with_capacity(samples.len());
    let mut lrl = Vec::with_capacity(samples.len());
    for s in samples {
        let [_, r, rdot, phi, ell] = *s;
        if phi != prev_phi && spec.mu != 0.0 {
            let fx = |eta: f64| v(eta) * eta.cos();
            let fy = |eta: f64| v(eta) * eta.sin();
            let tol = 1e-15 * v(phi).max(v(prev_phi)) * (phi - prev_phi).abs();
            u[0] += oracle::quadrature(&Integrand::new(&fx), prev_phi, phi, tol)?.value;
            u[1] += oracle::quadrature(&Integrand::new(&fy), prev_phi, phi, tol)?.value;
            prev_phi = phi;
        }
        let (sn, cs) = phi.sin_cos();
        let vt = ell / r;
        let kv = [(rdot * cs - vt * sn) / ell + u[0], (rdot * sn + vt * cs) / ell + u[1]];
        k.push(kv);
        lrl.push([kv[1], -kv[0]]);
    }
    let as_rows = |xs: &[[f64; 2]]| xs.iter().map(|x| x.to_vec()).collect::<Vec<_>>();
    let k_drift = oracle::drift_series(&as_rows(&k))?;
    let lrl_drift = oracle::drift_series(&as_rows(&lrl))?;
    Ok(HamiltonianSeries { k, lrl, k_drift, lrl_drift })
}
