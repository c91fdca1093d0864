use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nevlab::dynamics::{
    classify_singular_orbit, find_mixed_instance, iterate, ClassifyOptions, MixedInstance, OrbitClass,
};
use nevlab::nevanlinna::{
    fit_power_law, poles_in_region, preimage_residue_contour, preimages_in_region, records_to_csv, AsymptoticFit,
    FitWindow, FunctionDescriptor,
};
use nevlab::probe::{run_probe, write_escape_csv, ProbeReport, TestFunction};
use nevlab::render::render_ppm;
use nevlab::schwarzian::angle_gap;
use nevlab::sphere::{stream_rng, SpherePoint};
use nevlab::NevlabError;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Failure, Status};

fn numerical(e: NevlabError) -> Failure {
    Failure::Numerical(e.to_string())
}

/// Output directory; files are written one at a time.
pub struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        File::create(&path).map(BufWriter::new).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Io(e.to_string()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| Failure::Io(e.to_string()))
    }

    fn with<F>(&self, name: &str, body: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> nevlab::Result<()>,
    {
        let mut w = self.create(name)?;
        body(&mut w).map_err(|e| Failure::Io(e.to_string()))
    }
}

#[derive(Serialize)]
struct Report<'a, T> {
    config: &'a RunConfig,
    result: T,
}

fn build_instance(cfg: &RunConfig) -> Result<(FunctionDescriptor, Option<MixedInstance>), Failure> {
    if let Some(spec) = &cfg.instance {
        let f = FunctionDescriptor::from_spec(spec.clone()).map_err(|e| match e {
            NevlabError::InvalidArgument(m) => Failure::Config(m),
            other => numerical(other),
        })?;
        return Ok((f, None));
    }
    let search = cfg.mixed_search.as_ref().expect("validated config has an instance");
    let found = find_mixed_instance(search, &mut stream_rng(cfg.seed, 0)).map_err(numerical)?;
    Ok((found.descriptor.clone(), Some(found)))
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self { name, value, expected, tolerance, pass: (value - expected).abs() <= tolerance }
    }
}

#[derive(Serialize)]
struct VerifySummary {
    n: usize,
    poles: usize,
    preimages: usize,
    pole_fit: AsymptoticFit,
    residue_fit: AsymptoticFit,
    derivative_fit: AsymptoticFit,
    checks: Vec<Check>,
    all_pass: bool,
}

fn fit(points: Vec<(f64, f64)>, window: FitWindow) -> Result<AsymptoticFit, Failure> {
    fit_power_law(&points, window).map_err(numerical)
}

pub fn verify_asymptotics(cfg: &RunConfig, out: &Outputs) -> Result<Status, Failure> {
    let (f, _) = build_instance(cfg)?;
    let v = cfg.verify.as_ref().expect("validated config has a verify section");
    let tol = v.tolerances;
    let n = f.n_asymptotic();
    let nf = n as f64;

    let poles = poles_in_region(&f, &v.region).map_err(numerical)?;
    let target = SpherePoint::Finite(v.preimage_target);
    let pre = preimages_in_region(&f, target, &v.region).map_err(numerical)?;
    out.with("poles.csv", |w| records_to_csv(w, &poles, &[]))?;
    out.with("preimages.csv", |w| records_to_csv(w, &[], &pre))?;

    let pole_fit = fit(poles.iter().map(|r| (r.j as f64, r.s.norm())).collect(), v.fit_window)?;
    let residue_fit = fit(poles.iter().map(|r| (r.j as f64, r.r.norm())).collect(), v.fit_window)?;
    let derivative_fit = fit(
        pre.iter().map(|r| (r.j as f64, r.derivative.finite().map_or(f64::INFINITY, |d| d.norm()))).collect(),
        v.fit_window,
    )?;

    let mut checks = vec![
        Check::new("pole_exponent", pole_fit.exponent, 2.0 / nf, tol.pole_exponent),
        Check::new("residue_exponent", residue_fit.exponent, -(nf - 2.0) / nf, tol.residue_exponent),
        Check::new("derivative_exponent", derivative_fit.exponent, (nf - 2.0) / nf, tol.derivative_exponent),
    ];

    let mut worst_identity: f64 = 1.0;
    for rec in &pre {
        let d = rec.derivative.finite().map_or(f64::INFINITY, |d| d.norm());
        let res = preimage_residue_contour(&f, v.preimage_target, rec.p).map_err(numerical)?;
        let product = d * res.norm();
        if (product - 1.0).abs() > (worst_identity - 1.0).abs() || !product.is_finite() {
            worst_identity = product;
        }
    }
    checks.push(Check::new("preimage_identity", worst_identity, 1.0, tol.preimage_identity));

    let frame = f.frame();
    let tail: Vec<_> = poles.iter().filter(|r| r.j.unsigned_abs() as usize >= v.tail_from).collect();
    let worst_angle = tail
        .iter()
        .map(|r| angle_gap(r.s.arg(), frame.angles[frame.nearest(r.s)]))
        .fold(0.0, f64::max);
    checks.push(Check::new("pole_angle", worst_angle, 0.0, tol.pole_angle));

    let p = f.polynomial();
    let products: Vec<_> = tail
        .iter()
        .filter(|r| r.j > 0)
        .map(|r| {
            let mut root = p.eval(r.s).sqrt();
            if (r.s * root).re < 0.0 {
                root = -root;
            }
            r.r * root
        })
        .collect();
    if !products.is_empty() {
        let mean = products.iter().sum::<num_complex::Complex64>() / products.len() as f64;
        let spread = products.iter().map(|v| (v - mean).norm() / mean.norm()).fold(0.0, f64::max);
        checks.push(Check::new("residue_constant", spread, 0.0, tol.residue_constant));
    }

    if n == 2 {
        let spacing = PI / p.leading().norm().sqrt();
        let mut side: Vec<_> = poles.iter().filter(|r| r.j > 0).collect();
        side.sort_by_key(|r| r.j);
        let worst = side
            .windows(2)
            .map(|w| (w[1].s - w[0].s).norm())
            .max_by(|a, b| (a - spacing).abs().total_cmp(&(b - spacing).abs()));
        if let Some(worst) = worst {
            checks.push(Check::new("pole_spacing", worst, spacing, tol.pole_spacing));
        }
    }

    let all_pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!(
            "{:<20} {} value {:.6e} expected {:.6e} ± {:.1e}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.value,
            c.expected,
            c.tolerance
        );
    }
    let summary = VerifySummary {
        n,
        poles: poles.len(),
        preimages: pre.len(),
        pole_fit,
        residue_fit,
        derivative_fit,
        checks,
        all_pass,
    };
    out.json("summary.json", &Report { config: cfg, result: summary })?;
    Ok(if all_pass { Status::Success } else { Status::VerificationFailed })
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueClass {
    pub tract: usize,
    pub value: SpherePoint,
    pub class: OrbitClass,
}

#[derive(Serialize)]
struct ClassifySummary {
    n: usize,
    k: usize,
    values: Vec<ValueClass>,
    /// `0 < K < N` and every other value lands on a repelling cycle.
    hypotheses_satisfied: bool,
    /// All asymptotic values are prepoles.
    conjecture_regime: bool,
    finder: Option<MixedInstance>,
}

fn classify_values(f: &FunctionDescriptor, opts: &ClassifyOptions) -> Result<Vec<ValueClass>, Failure> {
    let values = f.asymptotic_values().map_err(numerical)?;
    values
        .iter()
        .map(|a| {
            let class = classify_singular_orbit(f, a.value, opts).map_err(numerical)?;
            Ok(ValueClass { tract: a.tract, value: a.value, class })
        })
        .collect()
}

fn unresolved(values: &[ValueClass]) -> bool {
    values.iter().any(|v| matches!(v.class, OrbitClass::Unresolved { .. }))
}

pub fn classify(cfg: &RunConfig, out: &Outputs) -> Result<Status, Failure> {
    let (f, finder) = build_instance(cfg)?;
    let values = classify_values(&f, &cfg.classify.unwrap_or_default())?;
    let n = values.len();
    let k = values.iter().filter(|v| v.class.is_prepole()).count();
    let others_repel = values
        .iter()
        .all(|v| v.class.is_prepole() || matches!(v.class, OrbitClass::RepellingLanding { .. }));
    let summary = ClassifySummary {
        n,
        k,
        hypotheses_satisfied: k > 0 && k < n && others_repel,
        conjecture_regime: k == n,
        values,
        finder,
    };
    println!("K = {k}, N = {n}");
    if summary.conjecture_regime {
        println!("every asymptotic value is a prepole (K = N)");
    }
    println!("hypotheses satisfied: {}", summary.hypotheses_satisfied);
    let status = if unresolved(&summary.values) { Status::Unresolved } else { Status::Success };
    let report = Report { config: cfg, result: summary };
    println!("{}", serde_json::to_string(&report.result).map_err(|e| Failure::Io(e.to_string()))?);
    out.json("certificates.json", &report)?;
    Ok(status)
}

pub fn render(cfg: &RunConfig, out: &Outputs) -> Result<Status, Failure> {
    let (f, _) = build_instance(cfg)?;
    let win = cfg.render.as_ref().expect("validated config has a render section");
    let mut image = Vec::new();
    render_ppm(&f, win, &mut image).map_err(numerical)?;
    let mut w = out.create("render.ppm")?;
    w.write_all(&image).and_then(|_| w.flush()).map_err(|e| Failure::Io(e.to_string()))?;
    out.json("render.json", &Report { config: cfg, result: serde_json::json!({ "bytes": image.len() }) })?;
    Ok(Status::Success)
}

/// Ω from the classified orbits: prepole orbits up to ∞, and landing orbits
/// with their cycles.
fn omega_points(f: &FunctionDescriptor, values: &[ValueClass]) -> Result<Vec<SpherePoint>, Failure> {
    let mut omega = Vec::new();
    for v in values {
        let Some(z0) = v.value.as_finite() else {
            omega.push(SpherePoint::Infinity);
            continue;
        };
        match &v.class {
            OrbitClass::Prepole { p, .. } => {
                let orbit = iterate(f, z0, *p, f64::INFINITY).map_err(numerical)?;
                omega.extend(orbit.points);
            }
            OrbitClass::RepellingLanding { preperiod, cycle, .. } => {
                let orbit = iterate(f, z0, *preperiod, f64::INFINITY).map_err(numerical)?;
                omega.extend(orbit.points);
                omega.extend(cycle.iter().map(|&c| SpherePoint::Finite(c)));
            }
            other => {
                return Err(Failure::Numerical(format!(
                    "no Ω certificate for the value {:?}: {other:?}",
                    v.value
                )))
            }
        }
    }
    Ok(omega)
}

#[derive(Serialize)]
struct ProbeOutput {
    omega_classes: Option<Vec<ValueClass>>,
    report: ProbeReport,
}

pub fn probe(cfg: &RunConfig, out: &Outputs) -> Result<Status, Failure> {
    let mut cfg = cfg.clone();
    let pcfg = cfg.probe.as_mut().expect("validated config has a probe section");
    let one = TestFunction::Constant { value: 1.0 };
    if !pcfg.test_functions.contains(&one) {
        pcfg.test_functions.insert(0, one);
    }
    let pcfg = pcfg.clone();
    let (f, _) = build_instance(&cfg)?;
    let (classes, omega) = if cfg.accumulation {
        let classes = classify_values(&f, &cfg.classify.unwrap_or_default())?;
        let omega = omega_points(&f, &classes)?;
        (Some(classes), Some(omega))
    } else {
        (None, None)
    };
    let report = run_probe(&f, &pcfg, omega.as_deref()).map_err(numerical)?;
    for row in &report.birkhoff {
        println!(
            "{:<28} spatial {:.6} grand mean {:.6} across sd {:.3e} se {:.3e} truncated {}",
            row.function.label(),
            row.spatial.mean,
            row.grand_mean,
            row.across_sd,
            row.standard_error,
            row.truncated_starts
        );
    }
    out.with("escape_curve.csv", |w| write_escape_csv(w, &report.escape))?;
    out.json("probe_report.json", &Report { config: &cfg, result: ProbeOutput { omega_classes: classes, report } })?;
    Ok(Status::Success)
}
