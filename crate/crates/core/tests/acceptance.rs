//! Acceptance criteria 1-12. Prints one PASS/FAIL line per criterion.
//!
//! A criterion listed in `DOCUMENTED_FAILURES` is expected to fail against
//! the published numbers. The run fails if any other criterion fails, or if
//! a documented one starts passing.

use lrl_core::friction_lab::{self, FrictionSpec, Termination};
use lrl_core::lrl_engine::{self, Table1Row};
use lrl_core::oracle::{self, Integrand, OdeOptions};
use lrl_core::potentials::{self, PotentialSpec, RadialContext};
use lrl_core::specfun::{self, EllipticArgs};
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

/// Row 4 of the `h = a rⁿ` table, as printed, fails the first residual.
const DOCUMENTED_FAILURES: &[u32] = &[9];

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, notes: Vec::new() }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn three_sig(x: f64) -> f64 {
    let p = 10f64.powi(x.abs().log10().floor() as i32 - 2);
    (x / p).round() * p
}

fn ctx(ell: f64, energy: f64) -> RadialContext {
    RadialContext { ell, energy }
}

fn c1_kepler_eccentricity() -> Outcome {
    let (k, ell, e) = (1.0, (3.0f64 / 8.0).sqrt(), -1.0);
    let ecc = (1.0 + 2.0 * e * ell * ell / (k * k)).sqrt();
    // Independent route: e = (r₂ - r₁)/(r₂ + r₁) from the turning points.
    let tp = potentials::turning_points(&PotentialSpec::Kepler { k }, &ctx(ell, e)).unwrap();
    let from_roots = (tp.r2 - tp.r1) / (tp.r2 + tp.r1);
    let err = (ecc - 0.5).abs().max((from_roots - 0.5).abs());
    Outcome::new(err < 1e-12, format!("e = {ecc:.15}, from turning points {from_roots:.15}, |err| = {err:.1e}"))
}

fn c2_harmonic() -> Outcome {
    let tp = potentials::turning_points(&PotentialSpec::Harmonic { k: 1.0 }, &ctx(1.0, 2.0)).unwrap();
    let b1 = 1.0 - (tp.r1 / tp.r2).powi(2);
    let b2 = (tp.r2 / tp.r1).powi(2) - 1.0;
    let got = [tp.r1, tp.r2, b1, b2];
    let want = [0.5412, 1.3066, 0.8284, 4.8284];
    let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // Closed form: r² = (𝓔 ∓ √(𝓔² - 2kℓ²))/(2k).
    let exact = ((2.0 - 2f64.sqrt()) / 2.0).sqrt();
    let mut o = Outcome::new(
        err < 5e-5 && rel(tp.r1, exact) < 1e-12,
        format!("r1 = {:.5}, r2 = {:.5}, B1 = {b1:.5}, B2 = {b2:.5}, max dev {err:.1e}", tp.r1, tp.r2),
    );
    o.notes.push(format!("r1 vs closed form: rel {:.1e}", rel(tp.r1, exact)));
    o
}

fn c3_desitter() -> Outcome {
    let spec = PotentialSpec::Cosmological { k: 1.0, lambda: 1e-3 };
    let c = ctx(1.0, -0.182);
    let roots = potentials::reality_roots(&spec, &c).real_roots;
    let st = potentials::stationary_points(&spec, &c).unwrap();
    let (rm, rbig) = (st.min().unwrap(), st.max().unwrap());
    let kep = potentials::turning_points(&PotentialSpec::Kepler { k: 1.0 }, &c).unwrap();
    let pairs = [
        ("r0", roots[0], -15.734),
        ("r1", roots[1], 0.556),
        ("r2", roots[2], 6.909),
        ("r3", roots[3], 8.270),
        ("r_m", rm.r, 1.002),
        ("r_M", rbig.r, 7.571),
        ("V(r_M)", rbig.value, -0.181),
        ("kepler r1", kep.r1, 0.556),
        ("kepler r2", kep.r2, 4.938),
    ];
    let worst = pairs.iter().map(|(n, a, b)| (n, (a - b).abs())).fold(
        ("", 0.0),
        |acc, (n, d)| {
            if d > acc.1 {
                (n, d)
            } else {
                acc
            }
        },
    );
    // Each root must make the quartic vanish.
    let resid = roots
        .iter()
        .map(|&r| (2e-3 * r.powi(4) - 0.364 * r * r + 2.0 * r - 1.0).abs() / (1.0 + r.powi(4) * 2e-3))
        .fold(0.0, f64::max);
    let mut o = Outcome::new(worst.1 < 1e-3 && resid < 1e-12, format!("worst {} off by {:.1e}", worst.0, worst.1));
    o.notes.push(format!("quartic residual at roots {resid:.1e}"));
    o
}

fn c4_extreme_desitter() -> Outcome {
    let p = lrl_engine::desitter_perturbative_landmarks(1.0, 1.0, 1e-52);
    let x = lrl_engine::desitter_exact_landmarks(1.0, 1.0, 1e-52).unwrap();
    let caption = three_sig(p.r_big_m) == three_sig(1.71e17) && three_sig(p.veff_r_big_m) == three_sig(-8.77e-18);
    let exact_caption = three_sig(x.r_big_m) == three_sig(1.71e17) && three_sig(x.veff_r_big_m) == three_sig(-8.77e-18);
    let r1_ok = (p.r1 - 0.5).abs() < 1e-6 && (x.r1 - 0.5).abs() < 1e-6;
    let agree = [(p.r_big_m, x.r_big_m), (p.veff_r_big_m, x.veff_r_big_m), (p.r1, x.r1), (p.r0, x.r0)]
        .iter()
        .map(|&(a, b)| rel(a, b))
        .fold(0.0, f64::max);
    Outcome::new(
        caption && exact_caption && r1_ok && agree < 1e-10,
        format!(
            "r_M = {:.3e}, E_M = {:.3e}, r1 = {:.9}, series vs exact rel {agree:.1e}",
            x.r_big_m, x.veff_r_big_m, x.r1
        ),
    )
}

fn c5_cornell() -> Outcome {
    let roots = potentials::reality_roots(&PotentialSpec::Cornell { a: 1.0, b: 1.0 }, &ctx(1.0, 1.0)).real_roots;
    let want = [-0.85464, 0.40303, 1.45161];
    let err = roots.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Outcome::new(
        roots.len() == 3 && err < 1e-5,
        format!("roots {:.5} {:.5} {:.5}, max dev {err:.1e}", roots[0], roots[1], roots[2]),
    )
}

fn six_families() -> Vec<(&'static str, PotentialSpec, RadialContext)> {
    vec![
        ("kepler", PotentialSpec::Kepler { k: 1.0 }, ctx((3.0f64 / 8.0).sqrt(), -1.0)),
        ("harmonic", PotentialSpec::Harmonic { k: 1.0 }, ctx(1.0, 2.0)),
        ("oblate", PotentialSpec::Oblate { k: 0.1, b: 1.0 }, ctx(2.0, -1e-3)),
        ("anti-de Sitter", PotentialSpec::Cosmological { k: 1.0, lambda: -0.01 }, ctx(1.0, 0.0)),
        ("de Sitter", PotentialSpec::Cosmological { k: 1.0, lambda: 1e-3 }, ctx(1.0, -0.182)),
        ("cornell", PotentialSpec::Cornell { a: 1.0, b: 1.0 }, ctx(1.0, 1.0)),
    ]
}

fn c6_conservation() -> Outcome {
    let opts = OdeOptions { rel_tol: 1e-12, abs_tol: 1e-14, ..OdeOptions::default() };
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (name, spec, c) in six_families() {
        match lrl_engine::conservation_drift(&spec, &c, 1.0, 0.0, 10.0, &opts) {
            Ok(rep) => {
                worst = worst.max(rep.drift.max_rel);
                notes.push(format!("{name}: drift {:.1e} over {} periods", rep.drift.max_rel, rep.radial_periods));
            }
            Err(e) => {
                worst = f64::INFINITY;
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome { pass: worst < 1e-8, detail: format!("max relative drift {worst:.1e}"), notes }
}

fn c7_modulus() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (name, spec, c) in six_families() {
        let pair = lrl_engine::closed_form_pair(&spec, &c, 1.0, 0.0).unwrap();
        let expect = match spec {
            PotentialSpec::Kepler { k } => k * k + 2.0 * c.energy * c.ell * c.ell,
            PotentialSpec::Harmonic { k } => {
                4.0 * k * pair.r2 * pair.r2 * (c.energy * c.energy - 2.0 * k * c.ell * c.ell).sqrt()
            }
            _ => c.ell * c.ell,
        };
        let dev = (0..200)
            .map(|i| pair.r1 + (pair.r2 - pair.r1) * i as f64 / 199.0)
            .map(|r| rel(lrl_engine::modulus_squared(&pair, r), expect))
            .fold(0.0, f64::max);
        notes.push(format!("{name}: {dev:.1e}"));
        worst = worst.max(dev);
    }
    Outcome { pass: worst < 1e-10, detail: format!("max relative deviation of 𝒜² {worst:.1e}"), notes }
}

fn c8_special_functions() -> Outcome {
    let quad =
        |f: &dyn Fn(f64) -> f64, a: f64, b: f64| oracle::quadrature(&Integrand::new(f), a, b, 1e-13).unwrap().value;
    let mut f_err: f64 = 0.0;
    let mut pi_err: f64 = 0.0;
    let mut sn_err: f64 = 0.0;
    let mut pi0_err: f64 = 0.0;
    for i in 0..=12 {
        // Angle form avoids the endpoint singularity of the algebraic form.
        let phi = 1.5 * i as f64 / 12.0;
        let s = phi.sin();
        for j in 0..=12 {
            let k = 0.98 * j as f64 / 12.0;
            let w = |t: f64| (1.0 - (k * t.sin()).powi(2)).sqrt();
            let f = specfun::ellip_f(EllipticArgs::new(s, k, 0.0)).unwrap();
            let fq = quad(&|t| 1.0 / w(t), 0.0, phi);
            f_err = f_err.max((f - fq).abs() / fq.max(1e-300).max(1.0));
            for xi in [-50.0, -2.0, 0.5, 0.9] {
                let p = specfun::ellip_pi(EllipticArgs::new(s, k, xi)).unwrap();
                let pq = quad(&|t| 1.0 / ((1.0 - xi * t.sin().powi(2)) * w(t)), 0.0, phi);
                pi_err = pi_err.max((p - pq).abs() / pq.abs().max(1.0));
            }
            pi0_err = pi0_err.max((specfun::ellip_pi(EllipticArgs::new(s, k, 0.0)).unwrap() - f).abs());
            sn_err = sn_err.max((specfun::jacobi_sn(f, k) - s).abs());
        }
    }
    let mut si_err: f64 = 0.0;
    let mut ci_err: f64 = 0.0;
    let gamma = 0.577_215_664_901_532_9;
    for x in [0.05, 0.5, 1.0, 2.5, 4.0, 6.0, 9.0, 15.0, 25.0, 40.0] {
        let si = quad(&|t: f64| if t == 0.0 { 1.0 } else { t.sin() / t }, 0.0, x);
        si_err = si_err.max((specfun::sine_integral(x) - si).abs());
        let cin = quad(&|t: f64| if t == 0.0 { 0.0 } else { (1.0 - t.cos()) / t }, 0.0, x);
        ci_err = ci_err.max((specfun::cosine_integral(x).unwrap() - (gamma + x.ln() - cin)).abs());
    }
    let worst = f_err.max(pi_err).max(sn_err).max(si_err).max(ci_err);
    let mut o =
        Outcome::new(worst < 1e-10 && pi0_err <= 1e-14, format!("max err {worst:.1e}; Π(·,0,κ) - F = {pi0_err:.1e}"));
    o.notes.push(format!("F {f_err:.1e}, Π {pi_err:.1e}, sn {sn_err:.1e}, Si {si_err:.1e}, Ci {ci_err:.1e}"));
    o
}

fn c9_table1() -> Outcome {
    let r_grid: Vec<f64> = (1..=50).map(|i| 0.2 * i as f64).collect();
    let (a, c1, c2, ell) = (0.8, 0.3, -0.7, 1.2);
    let mut notes = Vec::new();
    let mut rows_ok = true;
    for (name, row) in [
        ("row 1 (h = ar)", Table1Row::Linear),
        ("row 2 (h = ar²)", Table1Row::Quadratic),
        ("row 3 (h = ar³)", Table1Row::Cubic),
        ("row 4 printed g, m = 1", Table1Row::SqrtPrinted { mass: 1.0 }),
        ("row 4 printed g, m = 2", Table1Row::SqrtPrinted { mass: 2.0 }),
        ("row 4 amended g, m = 1", Table1Row::SqrtAmended { mass: 1.0 }),
        ("row 4 amended g, m = 2", Table1Row::SqrtAmended { mass: 2.0 }),
    ] {
        let res = lrl_engine::verify_table1_row(row, a, c1, c2, ell, &r_grid);
        let ok = res.e5 < 1e-9 && res.e6 < 1e-9;
        if matches!(row, Table1Row::Linear | Table1Row::Quadratic | Table1Row::Cubic | Table1Row::SqrtPrinted { .. }) {
            rows_ok &= ok;
        }
        notes.push(format!("{name}: e5 {:.1e}, e6 {:.1e} {}", res.e5, res.e6, if ok { "ok" } else { "fails" }));
    }
    Outcome { pass: rows_ok, detail: "rows 1-3 hold; printed row 4 fails e5 under both readings".into(), notes }
}

fn c10_friction() -> Outcome {
    let mut z_err: f64 = 0.0;
    for spec in
        [FrictionSpec::crash_preset(), FrictionSpec::spiral_preset(), FrictionSpec::from_xi0(1.0, 1.0, 1.0, 1.0, 0.0)]
    {
        for i in 1..=30 {
            let phi = spec.phi0 + 0.95 * spec.xi0() * i as f64 / 30.0;
            let z = friction_lab::z_of_phi(&spec, phi).unwrap();
            let f = |eta: f64| spec.mu * (phi - eta).sin() / (spec.beta - spec.alpha * eta).powi(2);
            let q = oracle::quadrature(&Integrand::new(&f), spec.phi0, phi, 1e-14 * z.abs().max(1e-300).max(1e-3));
            let q = q.map(|q| q.value).unwrap_or(f64::NAN);
            z_err = z_err.max((z - q).abs() / q.abs().max(1e-300));
        }
    }
    let left = friction_lab::friction_path(&FrictionSpec::crash_preset(), 2.0 * PI, 1001).unwrap();
    let crashed = matches!(left.termination, Some(Termination::Crash { .. }));
    let right_spec = FrictionSpec::spiral_preset();
    let right = friction_lab::friction_path(&right_spec, 2.0 * PI, 1001).unwrap();
    let decreasing = |p: &friction_lab::FrictionPath| p.r.windows(2).all(|w| w[1] < w[0]);
    // Independent check of the left crash: the integrated orbit reaches the centre.
    let opts = OdeOptions { rel_tol: 1e-10, abs_tol: 1e-12, ..OdeOptions::default() };
    let left_spec = FrictionSpec::crash_preset();
    let ode = oracle::integrate_friction(left_spec.alpha, left_spec.mu, left_spec.initial_state(), 10.0, 1e-3, &opts)
        .unwrap();
    let last = ode.last().unwrap();
    let ode_crash = last[1] < 2e-3;
    let mut o = Outcome::new(
        z_err < 1e-9 && crashed && ode_crash && decreasing(&left) && decreasing(&right),
        format!(
            "z vs quadrature rel {z_err:.1e}; left crash at φ = {:.4} (ODE r = {:.1e} at t = {:.3}); right r decreasing",
            left_spec.crash_angle(),
            last[1],
            last[0]
        ),
    );
    o.notes.push(format!(
        "right preset sweeps ξ₀ = {} rad before ℓ = 0 (r = {:.4} there), so it falls inwards without completing a revolution",
        right_spec.xi0(),
        right.r.last().unwrap()
    ));
    o
}

fn c11_scaling() -> Outcome {
    let errs = |lambda: f64| {
        let p = lrl_engine::desitter_perturbative_landmarks(1.0, 1.0, lambda);
        let x = lrl_engine::desitter_exact_landmarks(1.0, 1.0, lambda).unwrap();
        (rel(p.r0, x.r0), (p.ratio - x.ratio).abs(), x.ratio + 0.5, p, x)
    };
    let (r0a, ra, da, pa, xa) = errs(1e-9);
    let (r0b, rb, db, pb, xb) = errs(1e-12);
    let slope = |a: f64, b: f64| (a / b).log10() / 3.0;
    let (s_r0, s_ratio, s_limit) = (slope(r0a, r0b), slope(ra, rb), slope(da.abs(), db.abs()));
    let within = |s: f64, t: f64| (s - t).abs() <= 0.05;
    let mut o = Outcome::new(
        within(s_r0, 2.0 / 3.0) && within(s_ratio, 2.0 / 3.0) && within(s_limit, 1.0 / 3.0),
        format!(
            "exponents: r0 rel err {s_r0:.3}, r_M/r0 err {s_ratio:.3}; r_M/r0 + 1/2 ~ λ^{s_limit:.3} (ratio {:.6} at 1e-12)",
            xb.ratio
        ),
    );
    for (name, a, b) in [
        ("r_M", rel(pa.r_big_m, xa.r_big_m), rel(pb.r_big_m, xb.r_big_m)),
        ("r1", rel(pa.r1, xa.r1), rel(pb.r1, xb.r1)),
        ("V(r_M)", rel(pa.veff_r_big_m, xa.veff_r_big_m), rel(pb.veff_r_big_m, xb.veff_r_big_m)),
    ] {
        o.notes.push(format!("{name}: rel err {a:.1e} -> {b:.1e}"));
    }
    let q = |lambda: f64| {
        let r = lrl_engine::desitter_rederived_landmarks(1.0, 1.0, lambda);
        let x = lrl_engine::desitter_exact_landmarks(1.0, 1.0, lambda).unwrap();
        rel(r.r0, x.r0)
    };
    o.notes.push(format!("re-derived r0 coefficients: rel err {:.1e} -> {:.1e}", q(1e-9), q(1e-12)));
    o
}

fn c12_appendix() -> Outcome {
    let c = potentials::ring_coefficients(3);
    // P_{2n}(0) = (-1)ⁿ (2n)! / (4ⁿ (n!)²).
    let closed = |n: i32| {
        let mut v = 1.0;
        for j in 1..=n {
            v *= (2 * j - 1) as f64 / (2 * j) as f64;
        }
        v * v
    };
    let coef_err = [1.0, 0.25, 9.0 / 64.0]
        .iter()
        .enumerate()
        .map(|(i, &w)| (c[i] - w).abs().max((closed(i as i32) - w).abs()))
        .fold(0.0, f64::max);
    let (gm, radius, j2) = (1.0, 0.3, 1.1e-3);
    let spec = potentials::spheroid_equatorial_oblate(gm, radius, j2);
    let mut sph_err: f64 = 0.0;
    for i in 0..40 {
        let r = 0.5 + 0.25 * i as f64;
        let direct = potentials::spheroid_potential(gm, radius, j2, r, FRAC_PI_2);
        let mapped = potentials::v_eff(&spec, &ctx(0.0, 0.0), r);
        sph_err = sph_err.max((direct - mapped).abs() / direct.abs());
    }
    // The truncated series against a direct average over the ring.
    let (a_ring, r) = (1.0, 3.0);
    let ring = |psi: f64| -1.0 / (2.0 * PI * (r * r + a_ring * a_ring - 2.0 * a_ring * r * psi.cos()).sqrt());
    let exact = oracle::quadrature(&Integrand::new(&ring), 0.0, 2.0 * PI, 1e-14).unwrap().value;
    let series = potentials::ring_potential(1.0, a_ring, r, 3).unwrap();
    let mut o = Outcome::new(
        coef_err < 1e-12 && sph_err < 1e-12,
        format!("ring coefficients err {coef_err:.1e}; spheroid vs oblate mapping rel {sph_err:.1e}"),
    );
    o.notes.push(format!(
        "ring at r = 3a: 3-term series rel err {:.1e} (next term ~ (25/256)(a/r)^6 = {:.1e})",
        rel(series, exact),
        25.0 / 256.0 / 729.0
    ));
    o
}

fn main() {
    type Check = (u32, &'static str, Duration, fn() -> Outcome);
    let ms = Duration::from_millis;
    let checks: [Check; 12] = [
        (1, "Kepler eccentricity", ms(1), c1_kepler_eccentricity),
        (2, "harmonic landmarks", ms(1), c2_harmonic),
        (3, "de Sitter landmark set", ms(10), c3_desitter),
        (4, "extreme-λ de Sitter", ms(10), c4_extreme_desitter),
        (5, "Cornell roots", ms(1), c5_cornell),
        (6, "conservation along oracle orbits", ms(10_000), c6_conservation),
        (7, "modulus identities", Duration::MAX, c7_modulus),
        (8, "special functions", Duration::MAX, c8_special_functions),
        (9, "table of h = a rⁿ rows", Duration::MAX, c9_table1),
        (10, "friction", Duration::MAX, c10_friction),
        (11, "perturbative scaling", Duration::MAX, c11_scaling),
        (12, "ring series and spheroid", Duration::MAX, c12_appendix),
    ];
    let mut unexpected = Vec::new();
    for (id, name, budget, run) in checks {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        let budget_note = if budget == Duration::MAX { String::new() } else { format!(" / budget {budget:?}") };
        println!("{} {id:>2} {name}: {} [{elapsed:.2?}{budget_note}]", if pass { "PASS" } else { "FAIL" }, out.detail);
        if !in_time {
            println!("        over the runtime budget");
        }
        for n in &out.notes {
            println!("        {n}");
        }
        let documented = DOCUMENTED_FAILURES.contains(&id);
        if pass == documented {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
