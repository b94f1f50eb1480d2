//! Closed-form real roots of the low-degree polynomials behind turning points
//! and stationary points.
//!
//! Cubics are handled in the depressed normalization `y³ + 3py + 2q = 0`
//! (trigonometric form for three real roots, hyperbolic forms otherwise).
//! Quartics are shifted to kill the cubic term and split into two quadratics
//! through a real root of the resolvent cubic. Every root is polished by a few
//! Newton steps on the original polynomial.

use nalgebra::{Complex, DMatrix};
use std::f64::consts::PI;

/// Polynomial a [`RootSet`] was extracted from, in the normalization used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolySource {
    /// `x² + b x + c`.
    Quadratic { b: f64, c: f64 },
    /// `y³ + 3p y + 2q`, roots reported in `x = y + shift`.
    DepressedCubic { p: f64, q: f64, shift: f64 },
    /// `x⁴ + c3 x³ + c2 x² + c1 x + c0`; `shift = -c3/4` is the Ferrari shift.
    Quartic { c3: f64, c2: f64, c1: f64, c0: f64, shift: f64 },
}

impl PolySource {
    /// Monic coefficients in `x`, highest degree first (leading 1 omitted).
    pub fn monic(&self) -> Vec<f64> {
        match *self {
            PolySource::Quadratic { b, c } => vec![b, c],
            PolySource::DepressedCubic { p, q, shift: s } => {
                // (x - s)³ + 3p (x - s) + 2q
                vec![-3.0 * s, 3.0 * s * s + 3.0 * p, -s * s * s - 3.0 * p * s + 2.0 * q]
            }
            PolySource::Quartic { c3, c2, c1, c0, .. } => vec![c3, c2, c1, c0],
        }
    }

    /// Value and derivative of the monic polynomial at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let mut v = 1.0;
        let mut d = 0.0;
        for c in self.monic() {
            d = d * x + v;
            v = v * x + c;
        }
        (v, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootMethod {
    ClosedForm,
    /// Near-coalescent roots; eigenvalues of the companion matrix were used.
    EigenFallback,
}

/// Ordered real roots plus complex-conjugate pairs `(re, im)` with `im > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub real_roots: Vec<f64>,
    pub complex_pairs: Vec<(f64, f64)>,
    pub source: PolySource,
    pub method: RootMethod,
    /// Set when a discriminant was within tolerance of zero.
    pub degenerate: bool,
}

impl RootSet {
    fn new(mut real: Vec<f64>, mut pairs: Vec<(f64, f64)>, source: PolySource) -> Self {
        real.sort_by(f64::total_cmp);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Self { real_roots: real, complex_pairs: pairs, source, method: RootMethod::ClosedForm, degenerate: false }
    }

    fn all_complex(&self) -> Vec<Complex<f64>> {
        let mut v: Vec<Complex<f64>> = self.real_roots.iter().map(|&r| Complex::new(r, 0.0)).collect();
        for &(re, im) in &self.complex_pairs {
            v.push(Complex::new(re, im));
            v.push(Complex::new(re, -im));
        }
        v
    }

    /// Largest relative mismatch between the elementary symmetric functions of
    /// the roots and the source coefficients. Each mismatch is scaled by the
    /// same symmetric function evaluated on root magnitudes.
    pub fn vieta_residual(&self) -> f64 {
        let roots = self.all_complex();
        let coeffs = self.source.monic();
        let n = roots.len();
        // e[k] = k-th elementary symmetric polynomial.
        let mut e = vec![Complex::new(0.0, 0.0); n + 1];
        let mut ea = vec![0.0; n + 1];
        e[0] = Complex::new(1.0, 0.0);
        ea[0] = 1.0;
        for r in &roots {
            for k in (1..=n).rev() {
                e[k] = e[k] + e[k - 1] * r;
                ea[k] += ea[k - 1] * r.norm();
            }
        }
        let mut worst: f64 = 0.0;
        for k in 1..=n.min(coeffs.len()) {
            let expected = if k % 2 == 1 { -coeffs[k - 1] } else { coeffs[k - 1] };
            let scale = ea[k].max(expected.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max((e[k] - Complex::new(expected, 0.0)).norm() / scale);
        }
        worst
    }

    /// Largest `|P(x)| / Σ|c_i x^i|` over the real roots.
    pub fn max_residual(&self) -> f64 {
        let coeffs = self.source.monic();
        self.real_roots
            .iter()
            .map(|&x| {
                let (v, _) = self.source.eval(x);
                let n = coeffs.len();
                let mut scale = x.abs().powi(n as i32);
                for (i, c) in coeffs.iter().enumerate() {
                    scale += c.abs() * x.abs().powi((n - 1 - i) as i32);
                }
                v.abs() / scale.max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    /// Positive real roots in ascending order.
    pub fn positive(&self) -> Vec<f64> {
        self.real_roots.iter().copied().filter(|&r| r > 0.0).collect()
    }
}

fn polish(source: &PolySource, x: f64) -> f64 {
    let mut x = x;
    for _ in 0..8 {
        let (v, d) = source.eval(x);
        if d == 0.0 || !v.is_finite() {
            break;
        }
        let step = v / d;
        let nx = x - step;
        // Accept only steps that reduce the residual.
        if source.eval(nx).0.abs() >= v.abs() {
            break;
        }
        x = nx;
        if step.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    x
}

/// Roots of a monic polynomial (coefficients highest degree first, leading
/// one omitted) as eigenvalues of its companion matrix.
pub fn companion_roots(monic: &[f64]) -> Vec<Complex<f64>> {
    let n = monic.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for (j, c) in monic.iter().enumerate() {
        m[(0, j)] = -c;
    }
    m.complex_eigenvalues().iter().copied().collect()
}

fn from_eigen(source: PolySource, imag_tol: f64) -> RootSet {
    let roots = companion_roots(&source.monic());
    let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut real = Vec::new();
    let mut pairs = Vec::new();
    for z in roots {
        if z.im.abs() <= imag_tol * scale {
            real.push(polish(&source, z.re));
        } else if z.im > 0.0 {
            pairs.push((z.re, z.im));
        }
    }
    let mut rs = RootSet::new(real, pairs, source);
    rs.method = RootMethod::EigenFallback;
    rs.degenerate = true;
    rs
}

/// Stable roots of `x² + b x + c`.
pub fn quadratic_roots(b: f64, c: f64) -> RootSet {
    let source = PolySource::Quadratic { b, c };
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let (x1, x2) = if q == 0.0 { (0.0, 0.0) } else { (q, c / q) };
        let mut rs = RootSet::new(vec![x1, x2], vec![], source);
        rs.degenerate = disc <= 1e-14 * b * b;
        rs
    } else {
        RootSet::new(vec![], vec![(-0.5 * b, 0.5 * (-disc).sqrt())], source)
    }
}

/// Roots of `y³ + 3p y + 2q = 0`.
pub fn depressed_cubic_roots(p: f64, q: f64) -> RootSet {
    shifted_cubic_roots(p, q, 0.0)
}

/// Roots `x = y + shift` of `y³ + 3p y + 2q = 0`.
pub fn shifted_cubic_roots(p: f64, q: f64, shift: f64) -> RootSet {
    let source = PolySource::DepressedCubic { p, q, shift };
    if p == 0.0 && q == 0.0 {
        let mut rs = RootSet::new(vec![shift; 3], vec![], source);
        rs.degenerate = true;
        return rs;
    }
    let d = q * q + p * p * p;
    let scale = (q * q).max((p * p * p).abs());
    if d.abs() < 1e-12 * scale {
        return from_eigen(source, 1e-6);
    }
    let polish_y = |y: f64| {
        // Newton in y on the depressed cubic, where the coefficients are exact.
        let mut y = y;
        for _ in 0..4 {
            let v = y * y * y + 3.0 * p * y + 2.0 * q;
            let dv = 3.0 * y * y + 3.0 * p;
            if dv == 0.0 {
                break;
            }
            let ny = y - v / dv;
            if (ny * ny * ny + 3.0 * p * ny + 2.0 * q).abs() >= v.abs() {
                break;
            }
            y = ny;
        }
        y
    };
    if d < 0.0 {
        // Three real roots: y = 2ρ cos((θ + 2πj)/3), cos θ = -q/ρ³.
        let rho = (-p).sqrt();
        let theta = (-q / (rho * rho * rho)).clamp(-1.0, 1.0).acos();
        let ys: Vec<f64> =
            (0..3).map(|j| polish_y(2.0 * rho * ((theta + 2.0 * PI * j as f64) / 3.0).cos()) + shift).collect();
        RootSet::new(ys, vec![], source)
    } else {
        // One real root via the hyperbolic forms.
        let y0 = if p > 0.0 {
            let s = p.sqrt();
            -2.0 * s * ((q / (s * s * s)).asinh() / 3.0).sinh()
        } else if p < 0.0 {
            let s = (-p).sqrt();
            -2.0 * q.signum() * s * ((q.abs() / (s * s * s)).acosh() / 3.0).cosh()
        } else {
            -(2.0 * q).cbrt()
        };
        let y0 = polish_y(y0);
        let re = -0.5 * y0;
        let im = 0.5 * (3.0 * y0 * y0 + 12.0 * p).max(0.0).sqrt();
        RootSet::new(vec![y0 + shift], vec![(re + shift, im)], source)
    }
}

/// Roots of the monic cubic `x³ + c2 x² + c1 x + c0` via the depressed form.
pub fn cubic_roots(c2: f64, c1: f64, c0: f64) -> RootSet {
    let shift = -c2 / 3.0;
    // x = y + shift: y³ + (c1 - c2²/3) y + (2c2³/27 - c2 c1/3 + c0)
    let pp = (c1 - c2 * c2 / 3.0) / 3.0;
    let qq = (2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0) / 2.0;
    shifted_cubic_roots(pp, qq, shift)
}

/// Result of the two-real-root test for `x⁴ + p x² + q x + R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoRealTest {
    pub two_real: bool,
    pub delta: f64,
    pub degenerate: bool,
}

/// Discriminant of the depressed quartic `x⁴ + p x² + q x + R`.
pub fn quartic_discriminant(p: f64, q: f64, r: f64) -> f64 {
    256.0 * r * r * r - 128.0 * p * p * r * r + 144.0 * p * q * q * r + 16.0 * p.powi(4) * r
        - 27.0 * q.powi(4)
        - 4.0 * p * p * p * q * q
}

/// `true` iff `x⁴ + p x² + q x + R` has exactly two distinct real roots.
pub fn quartic_two_real_test(p: f64, q: f64, r: f64) -> TwoRealTest {
    let delta = quartic_discriminant(p, q, r);
    TwoRealTest { two_real: delta < 0.0, delta, degenerate: delta == 0.0 }
}

/// All four roots of `x⁴ + c3 x³ + c2 x² + c1 x + c0` by Ferrari's resolvent.
pub fn quartic_roots_resolvent(c3: f64, c2: f64, c1: f64, c0: f64) -> RootSet {
    let shift = -c3 / 4.0;
    let source = PolySource::Quartic { c3, c2, c1, c0, shift };
    // x = y + shift: y⁴ + p y² + q y + r
    let p = c2 - 3.0 * c3 * c3 / 8.0;
    let q = c1 - c3 * c2 / 2.0 + c3 * c3 * c3 / 8.0;
    let r = c0 - c3 * c1 / 4.0 + c3 * c3 * c2 / 16.0 - 3.0 * c3.powi(4) / 256.0;

    let mut quads: Vec<(f64, f64)> = Vec::new(); // y² + b y + c factors
    let mut degenerate = false;
    let qscale = q.abs() / (p.abs().powf(1.5) + r.abs().powf(0.75) + f64::MIN_POSITIVE);
    if qscale < 1e-14 {
        // Biquadratic: z² + p z + r with z = y².
        let z = quadratic_roots(p, r);
        let zs: Vec<Complex<f64>> = if z.real_roots.is_empty() {
            let (re, im) = z.complex_pairs[0];
            vec![Complex::new(re, im), Complex::new(re, -im)]
        } else {
            z.real_roots.iter().map(|&v| Complex::new(v, 0.0)).collect()
        };
        let mut real = Vec::new();
        let mut pairs = Vec::new();
        for (i, zi) in zs.iter().enumerate() {
            let s = zi.sqrt();
            if zi.im == 0.0 && zi.re >= 0.0 {
                real.push(s.re + shift);
                real.push(-s.re + shift);
            } else if zi.im == 0.0 {
                pairs.push((shift, s.im.abs()));
            } else if i == 0 {
                // ±s for z and ±conj(s) for conj(z) form two conjugate pairs.
                pairs.push((s.re + shift, s.im.abs()));
                pairs.push((-s.re + shift, s.im.abs()));
            }
        }
        let real = real.into_iter().map(|x| polish(&source, x)).collect();
        let mut rs = RootSet::new(real, pairs, source);
        rs.degenerate = z.degenerate;
        return rs;
    }
    // Resolvent: m³ + p m² + (p²/4 - r) m - q²/8 = 0, take its largest root (> 0).
    let res = cubic_roots(p, p * p / 4.0 - r, -q * q / 8.0);
    degenerate |= res.degenerate;
    let m = res.real_roots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(m > 0.0) {
        return from_eigen(source, 1e-7);
    }
    let s = (2.0 * m).sqrt();
    let t = q / (2.0 * s);
    quads.push((-s, 0.5 * p + m + t));
    quads.push((s, 0.5 * p + m - t));

    let mut real = Vec::new();
    let mut pairs = Vec::new();
    for (b, c) in quads {
        let qr = quadratic_roots(b, c);
        degenerate |= qr.degenerate;
        for y in qr.real_roots {
            real.push(polish(&source, y + shift));
        }
        for (re, im) in qr.complex_pairs {
            pairs.push((re + shift, im));
        }
    }
    let mut rs = RootSet::new(real, pairs, source);
    rs.degenerate = degenerate;
    if rs.vieta_residual() > 1e-10 {
        let fallback = from_eigen(source, 1e-7);
        if fallback.vieta_residual() < rs.vieta_residual() {
            return fallback;
        }
    }
    rs
}
