//! One PASS/FAIL line per acceptance criterion. Tolerances are pinned below.
//!
//! Criteria listed in `EXPECTED_FAILURES` are reported as FAIL like any other
//! but do not turn the run red; everything else must pass.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nevlab::dynamics::{
    check_pole_neighborhood_expansion, check_tract_expansion, classify_singular_orbit, find_mixed_instance, iterate,
    ClassifyOptions, MixedInstance, MixedSearch, OrbitClass, PoleCheck, SigmaMap, TractCheck,
};
use nevlab::nevanlinna::{
    fit_power_law, poles_in_region, preimage_residue_contour, preimages_in_region, records_to_csv, AnnularSector,
    FitWindow, FunctionDescriptor, PoleRecord, PreimageRecord,
};
use nevlab::ode::{
    integrate_pair, liouville_f, liouville_z, path_length, FundamentalPairState, IntegratorOptions, LiouvilleFrame,
};
use nevlab::probe::{accumulation_probe, birkhoff_probe, escaping_probe, run_probe, ProbeConfig, TestFunction};
use nevlab::render::{render_rgb, RenderWindow};
use nevlab::schwarzian::{angle_gap, default_step, schwarzian_numeric, SchwarzPolynomial};
use nevlab::sphere::{stream_rng, SpherePoint};
use num_complex::Complex64;
use rand::Rng;

const EXPECTED_FAILURES: &[usize] = &[9];

// 1
const SCHWARZ_TOL: f64 = 1e-5;
const SCHWARZ_POINTS: usize = 200;
const SCHWARZ_BUDGET_S: f64 = 60.0;
// 2
const TOY_POLE_TOL: f64 = 1e-9;
const TOY_J_MAX: i64 = 20;
const POLE_EXP_TOL: f64 = 0.05;
const POLE_ANGLE_TOL: f64 = 0.1;
const TAIL_J: i64 = 10;
const POLES_BUDGET_S: f64 = 300.0;
// 3
const TOY_RESIDUE_TOL: f64 = 1e-8;
const RESIDUE_EXP_TOL: f64 = 0.1;
const RESIDUE_CONST_TOL: f64 = 0.03;
// 4
const DERIV_EXP_TOL_N2: f64 = 0.05;
const DERIV_EXP_TOL_N3: f64 = 0.1;
const IDENTITY_TOL: f64 = 1e-8;
// 5
const WRONSKIAN_TOL: f64 = 1e-8;
const PATH_LENGTH: f64 = 50.0;
// 6
const LIOUVILLE_RADIUS: f64 = 100.0;
const LIOUVILLE_Z_TOL: f64 = 0.02;
const AIRY_FZ2: f64 = 5.0 / 36.0;
const AIRY_FZ2_TOL: f64 = 0.02;
// 7
const EXPANSION_SAMPLES: usize = 10_000;
const EXPANSION_BUDGET_S: f64 = 300.0;
// 8
const CERT_RESIDUAL: f64 = 1e-10;
const CERT_MULTIPLIER: f64 = 1.05;
const FINDER_SEED: u64 = 1;
// 9
const ERGODIC_STARTS: usize = 200;
const ERGODIC_STEPS: usize = 10_000;
const DISPERSION_FACTOR: f64 = 5.0;
const MEAN_SIGMAS: f64 = 3.0;
const ERGODIC_BUDGET_S: f64 = 600.0;
// 10
const TREND_STARTS: usize = 10_000;
const TREND_SEED: u64 = 2024;
const OMEGA_EPSILON: f64 = 0.05;
// 11
const RENDER_SIDE: usize = 1024;
const RENDER_BUDGET_S: f64 = 60.0;

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: String) -> Line {
    Line { pass, detail }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn poly(coeffs: &[f64]) -> SchwarzPolynomial {
    SchwarzPolynomial::from_real(coeffs).unwrap()
}

fn toy() -> FunctionDescriptor {
    FunctionDescriptor::two_av(c(2.0, 0.0), c(1.0, 0.0)).unwrap()
}

fn airy() -> FunctionDescriptor {
    FunctionDescriptor::ode_principal(&poly(&[0.0, 1.0]), [c(2.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]).unwrap()
}

fn whole_annulus(r_min: f64, r_max: f64) -> AnnularSector {
    AnnularSector { r_min, r_max, theta_center: 0.3, half_width: PI }
}

fn airy_region() -> AnnularSector {
    AnnularSector { r_min: 0.0, r_max: 33.0, theta_center: 0.0, half_width: 0.9 }
}

fn airy_window() -> FitWindow {
    FitWindow { j_min: 5, j_max: Some(40) }
}

fn mixed() -> MixedInstance {
    find_mixed_instance(&MixedSearch::default(), &mut stream_rng(FINDER_SEED, 0)).unwrap()
}

fn k2() -> FunctionDescriptor {
    FunctionDescriptor::two_av(c(0.0, PI), c(0.0, -PI)).unwrap()
}

/// `|S(f) − 2P|/(1 + |2P|)` at sampled regular points of ODE-built quotients.
fn criterion_1() -> Line {
    let t = Instant::now();
    let coeffs = [c(2.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)];
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for (k, cs) in [vec![1.0], vec![0.0, 1.0], vec![1.0, 0.0, 1.0]].iter().enumerate() {
        let p = poly(cs);
        let f = FunctionDescriptor::ode_principal(&p, coeffs).unwrap();
        let mut rng = stream_rng(101, k as u64);
        let mut used = 0;
        while used < SCHWARZ_POINTS {
            let z = Complex64::from_polar(rng.random_range(0.0..3.0), rng.random_range(0.0..2.0 * PI));
            let q = f.parts(z).unwrap();
            // S is Möbius invariant, so near a pole use 1/f.
            let flip = q.num.norm() > q.den.norm();
            let quotient = |x: Complex64| {
                let q = f.parts(x).unwrap();
                if flip {
                    q.den / q.num
                } else {
                    q.num / q.den
                }
            };
            let Ok(s) = schwarzian_numeric(&quotient, z, default_step(0.25)) else {
                skipped += 1;
                continue;
            };
            let two_p = 2.0 * p.eval(z);
            worst = worst.max((s - two_p).norm() / (1.0 + two_p.norm()));
            used += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    line(
        worst <= SCHWARZ_TOL && secs <= SCHWARZ_BUDGET_S,
        format!(
            "Schwarzian identity: max rel err {worst:.2e} (tol {SCHWARZ_TOL:e}) over 3x{SCHWARZ_POINTS} points, \
             {skipped} near-critical skipped, {secs:.1} s (budget {SCHWARZ_BUDGET_S} s)"
        ),
    )
}

struct PoleData {
    toy: Vec<PoleRecord>,
    airy: Vec<PoleRecord>,
    secs: f64,
}

fn pole_data() -> PoleData {
    let t = Instant::now();
    let toy = poles_in_region(&toy(), &whole_annulus(1.0, 65.0)).unwrap();
    let airy = poles_in_region(&airy(), &airy_region()).unwrap();
    PoleData { toy, airy, secs: t.elapsed().as_secs_f64() }
}

fn criterion_2(d: &PoleData) -> Line {
    let lattice: Vec<_> = d.toy.iter().filter(|r| r.j.abs() <= TOY_J_MAX).collect();
    let toy_err = lattice.iter().map(|r| (r.s - c(0.0, PI * r.j as f64)).norm()).fold(0.0, f64::max);
    let toy_ok = lattice.len() == 2 * TOY_J_MAX as usize && toy_err <= TOY_POLE_TOL;
    let pts: Vec<(f64, f64)> = d.airy.iter().map(|r| (r.j as f64, r.s.norm())).collect();
    let fit = fit_power_law(&pts, airy_window()).unwrap();
    let frame = airy().frame().clone();
    let angle = d
        .airy
        .iter()
        .filter(|r| r.j >= TAIL_J)
        .map(|r| angle_gap(r.s.arg(), frame.angles[frame.nearest(r.s)]))
        .fold(0.0, f64::max);
    let exp_ok = (fit.exponent - 2.0 / 3.0).abs() <= POLE_EXP_TOL;
    let pass = toy_ok && exp_ok && angle <= POLE_ANGLE_TOL && d.secs <= POLES_BUDGET_S;
    line(
        pass,
        format!(
            "pole asymptotics: toy |s_j - j*pi*i| max {toy_err:.1e} over {} poles (tol {TOY_POLE_TOL:e}); \
             P=z exponent {:.4} (2/3 +- {POLE_EXP_TOL}, {} poles); max angle gap j>={TAIL_J} {angle:.2e} \
             (tol {POLE_ANGLE_TOL}); {:.1} s (budget {POLES_BUDGET_S} s)",
            lattice.len(),
            fit.exponent,
            fit.points,
            d.secs
        ),
    )
}

fn criterion_3(d: &PoleData) -> Line {
    let expect = c(0.5, 0.0);
    let toy_err = d.toy.iter().map(|r| (r.r - expect).norm()).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = d.airy.iter().map(|r| (r.j as f64, r.r.norm())).collect();
    let fit = fit_power_law(&pts, airy_window()).unwrap();
    let p = poly(&[0.0, 1.0]);
    let products: Vec<Complex64> = d
        .airy
        .iter()
        .filter(|r| r.j >= TAIL_J)
        .map(|r| {
            let mut root = p.eval(r.s).sqrt();
            if (r.s * root).re < 0.0 {
                root = -root;
            }
            r.r * root
        })
        .collect();
    let mean = products.iter().sum::<Complex64>() / products.len() as f64;
    let spread = products.iter().map(|v| (v - mean).norm() / mean.norm()).fold(0.0, f64::max);
    let exp_ok = (fit.exponent + 1.0 / 3.0).abs() <= RESIDUE_EXP_TOL;
    let pass = toy_err <= TOY_RESIDUE_TOL && exp_ok && spread <= RESIDUE_CONST_TOL;
    line(
        pass,
        format!(
            "residue asymptotics: toy |r - (lambda-mu)/2| max {toy_err:.1e} (tol {TOY_RESIDUE_TOL:e}); \
             P=z exponent {:.4} (-1/3 +- {RESIDUE_EXP_TOL}); r*P^(1/2) spread {spread:.2e} over {} tail poles \
             (tol {RESIDUE_CONST_TOL})",
            fit.exponent,
            products.len()
        ),
    )
}

fn identity_error(f: &FunctionDescriptor, target: Complex64, pre: &[PreimageRecord]) -> f64 {
    pre.iter()
        .map(|r| {
            let d = r.derivative.finite().unwrap().norm();
            let res = preimage_residue_contour(f, target, r.p).unwrap().norm();
            (d * res - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn derivative_fit(pre: &[PreimageRecord], window: FitWindow) -> f64 {
    let pts: Vec<(f64, f64)> = pre.iter().map(|r| (r.j as f64, r.derivative.finite().unwrap().norm())).collect();
    fit_power_law(&pts, window).unwrap().exponent
}

fn criterion_4() -> Line {
    let zero = c(0.0, 0.0);
    let toy = toy();
    let toy_pre = preimages_in_region(&toy, SpherePoint::Finite(zero), &whole_annulus(1.0, 130.0)).unwrap();
    let e2 = derivative_fit(&toy_pre, FitWindow { j_min: 3, j_max: Some(40) });
    let airy = airy();
    let airy_pre = preimages_in_region(&airy, SpherePoint::Finite(zero), &airy_region()).unwrap();
    let e3 = derivative_fit(&airy_pre, airy_window());
    let ident = identity_error(&toy, zero, &toy_pre).max(identity_error(&airy, zero, &airy_pre));
    let pass = e2.abs() <= DERIV_EXP_TOL_N2 && (e3 - 1.0 / 3.0).abs() <= DERIV_EXP_TOL_N3 && ident <= IDENTITY_TOL;
    line(
        pass,
        format!(
            "derivative at preimages: N=2 exponent {e2:.2e} (0 +- {DERIV_EXP_TOL_N2}); N=3 exponent {e3:.4} \
             (1/3 +- {DERIV_EXP_TOL_N3}); max ||f'(p)|*|res| - 1| {ident:.1e} over {} preimages (tol {IDENTITY_TOL:e})",
            toy_pre.len() + airy_pre.len()
        ),
    )
}

fn criterion_5() -> Line {
    let opts = IntegratorOptions::default();
    let unit = FundamentalPairState::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
    let mut worst = 0.0f64;
    let mut runs = 0;
    for cs in [vec![1.0], vec![0.0, 1.0], vec![1.0, 0.0, 1.0]] {
        let p = poly(&cs);
        let theta = nevlab::schwarzian::critical_directions(&p).angles[0];
        let ray = [c(0.0, 0.0), Complex64::from_polar(PATH_LENGTH, theta)];
        let mut paths = vec![ray.to_vec()];
        if cs.len() == 1 {
            paths.push(vec![c(0.0, 0.0), c(10.0, 0.0), c(10.0, 10.0), c(-5.0, 10.0), c(-5.0, -5.0)]);
        }
        for path in paths {
            assert!((path_length(&path) - PATH_LENGTH).abs() < 1e-9);
            // For P=1 use (e^{iz}, e^{-iz}): off the real axis cos and sin
            // cancel in the Wronskian and the drift measures rounding.
            let init = if cs.len() == 1 { FundamentalPairState::exp_iz(c(0.0, 0.0)) } else { unit };
            let out = integrate_pair(&p, &path, &init, &opts).unwrap();
            worst = worst.max((out.wronskian() - init.wronskian()).norm() / init.wronskian().norm());
            runs += 1;
        }
    }
    line(
        worst <= WRONSKIAN_TOL,
        format!("Wronskian conservation: max relative drift {worst:.2e} over {runs} paths of length {PATH_LENGTH} (tol {WRONSKIAN_TOL:e})"),
    )
}

fn criterion_6() -> Line {
    let mut worst_z = 0.0f64;
    let mut rays = 0;
    let mut bound = 0.0f64;
    for cs in [vec![1.0], vec![0.0, 1.0], vec![1.0, 0.0, 1.0]] {
        let p = poly(&cs);
        let n = p.n_asymptotic() as f64;
        for k in 0..p.n_asymptotic() {
            let frame = LiouvilleFrame::new(&p, k).unwrap();
            let z = Complex64::from_polar(LIOUVILLE_RADIUS, frame.theta());
            let big_z = liouville_z(&frame, z).unwrap();
            // a z^N is real and positive on a critical ray.
            let lead = 2.0 / n * (p.leading() * z.powf(n)).norm().sqrt();
            worst_z = worst_z.max((big_z / lead - 1.0).norm());
            for r in [LIOUVILLE_RADIUS, 4.0 * LIOUVILLE_RADIUS, 10.0 * LIOUVILLE_RADIUS] {
                let w = Complex64::from_polar(r, frame.theta());
                let zz = liouville_z(&frame, w).unwrap();
                bound = bound.max((liouville_f(&p, w).unwrap() * zz * zz).norm());
            }
            rays += 1;
        }
    }
    let p = poly(&[0.0, 1.0]);
    let frame = LiouvilleFrame::new(&p, 0).unwrap();
    let z = c(LIOUVILLE_RADIUS, 0.0);
    let big_z = liouville_z(&frame, z).unwrap();
    let fz2 = (liouville_f(&p, z).unwrap() * big_z * big_z).norm();
    let pass = worst_z <= LIOUVILLE_Z_TOL && (fz2 / AIRY_FZ2 - 1.0).abs() <= AIRY_FZ2_TOL && bound.is_finite();
    line(
        pass,
        format!(
            "Liouville checks: max |Z N/(2 a^(1/2) z^(N/2)) - 1| {worst_z:.2e} at |z|={LIOUVILLE_RADIUS} over {rays} \
             critical rays (tol {LIOUVILLE_Z_TOL}); P=z |F Z^2| {fz2:.5} vs 5/36 = {AIRY_FZ2:.5} (+- {:.0}%); \
             max |F Z^2| {bound:.3}",
            AIRY_FZ2_TOL * 100.0
        ),
    )
}

fn criterion_7(mixed: &MixedInstance) -> Line {
    let t = Instant::now();
    let opts = ClassifyOptions::default();
    let k2 = k2();
    let cases: [(&str, &FunctionDescriptor, Vec<usize>); 2] =
        [("K=1", &mixed.descriptor, vec![1]), ("K=2", &k2, vec![0, 1])];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, f, tracts) in cases {
        let sigma = SigmaMap::new(f, &tracts, &opts).unwrap();
        let tract = check_tract_expansion(&sigma, &TractCheck { samples: EXPANSION_SAMPLES, ..TractCheck::default() })
            .unwrap();
        let pole = check_pole_neighborhood_expansion(&sigma, &PoleCheck { samples: EXPANSION_SAMPLES, ..PoleCheck::default() })
            .unwrap();
        pass &= tract.violations == 0 && pole.violations == 0 && pole.inner_disk_ok;
        parts.push(format!(
            "{name}: tract {} violations / {} samples (min ratio {:.3}), pole disks {} violations / {} samples{}",
            tract.violations,
            tract.samples,
            tract.min_ratio,
            pole.violations,
            pole.disk_samples,
            if pole.vacuous { ", preimage lemma vacuous" } else { "" }
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    line(
        pass && secs <= EXPANSION_BUDGET_S,
        format!("expansion inequalities: {}; {secs:.1} s (budget {EXPANSION_BUDGET_S} s)", parts.join("; ")),
    )
}

fn criterion_8(m: &MixedInstance) -> Line {
    let (p, pole_res) = match m.lambda_class {
        OrbitClass::Prepole { p, residual, .. } => (p, residual),
        _ => (0, f64::INFINITY),
    };
    let multiplier = match m.mu_class {
        OrbitClass::RepellingLanding { multiplier, .. } => multiplier,
        _ => 0.0,
    };
    let pass = m.k == 1
        && m.n == 2
        && p >= 1
        && pole_res <= CERT_RESIDUAL
        && m.residual <= CERT_RESIDUAL
        && multiplier > CERT_MULTIPLIER;
    line(
        pass,
        format!(
            "hypothesis certificates: K={} N={} mu={:.6}; lambda prepole of order {p} (residual {pole_res:.1e}); \
             landing residual {:.1e} (tol {CERT_RESIDUAL:e}); multiplier {multiplier:.4} (> {CERT_MULTIPLIER})",
            m.k, m.n, m.mu, m.residual
        ),
    )
}

fn criterion_9(m: &MixedInstance) -> Line {
    let t = Instant::now();
    let cfg = ProbeConfig {
        starts: ERGODIC_STARTS,
        n_max: ERGODIC_STEPS,
        dispersion_factor: DISPERSION_FACTOR,
        mean_sigmas: MEAN_SIGMAS,
        test_functions: TestFunction::library(),
        ..ProbeConfig::default()
    };
    let rows = birkhoff_probe(&m.descriptor, &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = rows.iter().all(|r| r.dispersion_ok && r.mean_ok) && secs <= ERGODIC_BUDGET_S;
    let detail: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{} mean {:.4} vs {:.4} (se {:.2e}) sd {:.2e} [{}{}]",
                r.function.label(),
                r.grand_mean,
                r.spatial.mean,
                r.standard_error,
                r.across_sd,
                if r.dispersion_ok { "d" } else { "D!" },
                if r.mean_ok { "m" } else { "M!" }
            )
        })
        .collect();
    let truncated = rows.first().map_or(0, |r| r.truncated_starts);
    line(
        pass,
        format!(
            "ergodicity diagnostic: {}; {truncated}/{ERGODIC_STARTS} orbits truncated at a pole; {secs:.1} s",
            detail.join("; ")
        ),
    )
}

fn omega(f: &FunctionDescriptor) -> Vec<SpherePoint> {
    let mut out = Vec::new();
    for a in f.asymptotic_values().unwrap() {
        let z0 = a.value.as_finite().unwrap();
        match classify_singular_orbit(f, a.value, &ClassifyOptions::default()).unwrap() {
            OrbitClass::Prepole { p, .. } => out.extend(iterate(f, z0, p, f64::INFINITY).unwrap().points),
            OrbitClass::RepellingLanding { preperiod, cycle, .. } => {
                out.extend(iterate(f, z0, preperiod, f64::INFINITY).unwrap().points);
                out.extend(cycle.into_iter().map(SpherePoint::Finite));
            }
            other => panic!("no Ω certificate: {other:?}"),
        }
    }
    out
}

fn criterion_10(m: &MixedInstance) -> Line {
    let f = &m.descriptor;
    let base = ProbeConfig { starts: TREND_STARTS, seed: TREND_SEED, epsilon: OMEGA_EPSILON, ..ProbeConfig::default() };
    let curve = escaping_probe(f, &ProbeConfig { n_max: 1000, ..base.clone() }).unwrap();
    let (e10, e1000) = (curve.curve[9], curve.curve[999]);
    let om = omega(f);
    let a100 = accumulation_probe(f, &om, &ProbeConfig { n_max: 100, ..base.clone() }).unwrap();
    let a1000 = accumulation_probe(f, &om, &ProbeConfig { n_max: 1000, ..base }).unwrap();
    let pass = e1000 <= e10 && a1000.fraction <= a100.fraction;
    line(
        pass,
        format!(
            "measure-zero trends: escape fraction n=10 {e10:.4}, n=1000 {e1000:.4} ({} of {TREND_STARTS} orbits still \
             defined at n=1000); Omega-accumulation (eps {OMEGA_EPSILON}) n_max=100 {:.4} ({} defined), \
             n_max=1000 {:.4} ({} defined)",
            curve.defined_at_end, a100.fraction, a100.defined, a1000.fraction, a1000.defined
        ),
    )
}

fn criterion_11(m: &MixedInstance) -> Line {
    let win = RenderWindow {
        center: c(0.0, 0.0),
        width: 8.0,
        pixels_x: RENDER_SIDE,
        pixels_y: RENDER_SIDE,
        n_max: 256,
        escape_radius: 1e8,
    };
    let t = Instant::now();
    let first = render_rgb(&m.descriptor, &win).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let second = render_rgb(&m.descriptor, &win).unwrap();
    let image_ok = first == second;

    let cfg = ProbeConfig { starts: 100, n_max: 1000, ..ProbeConfig::default() };
    let om = omega(&m.descriptor);
    let probe = || serde_json::to_string(&run_probe(&m.descriptor, &cfg, Some(&om)).unwrap()).unwrap();
    let probe_ok = probe() == probe();
    let finder = || serde_json::to_string(&mixed()).unwrap();
    let finder_ok = finder() == finder();
    let table = || {
        let f = toy();
        let region = whole_annulus(1.0, 30.0);
        let poles = poles_in_region(&f, &region).unwrap();
        let mut buf = Vec::new();
        records_to_csv(&mut buf, &poles, &[]).unwrap();
        buf
    };
    let table_ok = table() == table();
    let pass = image_ok && probe_ok && finder_ok && table_ok && secs <= RENDER_BUDGET_S;
    line(
        pass,
        format!(
            "reproducibility: render {image_ok}, probe report {probe_ok}, certificates {finder_ok}, pole table \
             {table_ok}; {RENDER_SIDE}^2 render {secs:.1} s on {} thread(s) (budget {RENDER_BUDGET_S} s)",
            rayon::current_num_threads()
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, Line)> = Vec::new();
    let mut report = |k: usize, l: Line| {
        let tag = match (l.pass, EXPECTED_FAILURES.contains(&k)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("criterion {k:>2}: {tag}  {}", l.detail);
        results.push((k, l));
    };
    report(1, criterion_1());
    let poles = pole_data();
    report(2, criterion_2(&poles));
    report(3, criterion_3(&poles));
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6());
    let m = mixed();
    report(7, criterion_7(&m));
    report(8, criterion_8(&m));
    report(9, criterion_9(&m));
    report(10, criterion_10(&m));
    report(11, criterion_11(&m));
    let unexpected: Vec<usize> =
        results.iter().filter(|(k, l)| !l.pass && !EXPECTED_FAILURES.contains(k)).map(|(k, _)| *k).collect();
    let passed = results.iter().filter(|(_, l)| l.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
