//! Statistical diagnostics for orbits: Birkhoff averages against the
//! spherical average, escape fractions and accumulation near a repeller.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step, IterateOptions, MeromorphicMap};
use crate::error::{NevlabError, Result};
use crate::ode::gl_rule;
use crate::sphere::{chordal_distance, sample_sphere_point, spherical_measure_outside, stream_rng, SpherePoint};

/// Bounded test functions on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// `d(·, 0)²` in the chordal metric.
    ChordalSqZero,
    /// `d(·, 1)²`.
    ChordalSqOne,
    /// `exp(−d(·, center)²/width²)`.
    Bump { center: Complex64, width: f64 },
}

impl TestFunction {
    pub fn eval(&self, p: SpherePoint) -> f64 {
        match *self {
            TestFunction::Constant { value } => value,
            TestFunction::ChordalSqZero => chordal_distance(p, SpherePoint::finite(0.0, 0.0)).powi(2),
            TestFunction::ChordalSqOne => chordal_distance(p, SpherePoint::finite(1.0, 0.0)).powi(2),
            TestFunction::Bump { center, width } => {
                let d = chordal_distance(p, SpherePoint::Finite(center));
                (-(d * d) / (width * width)).exp()
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::Constant { value } => format!("constant({value})"),
            TestFunction::ChordalSqZero => "chordal_sq(0)".into(),
            TestFunction::ChordalSqOne => "chordal_sq(1)".into(),
            TestFunction::Bump { center, width } => format!("bump({center}, {width})"),
        }
    }

    /// The shipped set.
    pub fn library() -> Vec<TestFunction> {
        vec![
            TestFunction::Constant { value: 1.0 },
            TestFunction::ChordalSqZero,
            TestFunction::ChordalSqOne,
            TestFunction::Bump { center: Complex64::new(0.5, 0.5), width: 0.5 },
        ]
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            TestFunction::Constant { value } => value.is_finite(),
            TestFunction::Bump { center, width } => width > 0.0 && center.re.is_finite() && center.im.is_finite(),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(NevlabError::InvalidArgument(format!("bad test function {self:?}")))
        }
    }
}

/// Running mean that returns `c` exactly for a constant sequence.
#[derive(Debug, Clone, Copy, Default)]
struct ExactMean {
    first: Option<f64>,
    diff: f64,
    count: usize,
}

impl ExactMean {
    fn push(&mut self, v: f64) {
        let first = *self.first.get_or_insert(v);
        self.diff += v - first;
        self.count += 1;
    }

    fn value(&self) -> f64 {
        match self.first {
            Some(first) => first + self.diff / self.count as f64,
            None => f64::NAN,
        }
    }
}

/// Visits `z_0 … z_{n−1}`. Returns the step at which ∞ was reached, if any.
fn walk<F, V>(f: &F, z0: Complex64, n: usize, opts: &IterateOptions, mut visit: V) -> Result<Option<usize>>
where
    F: MeromorphicMap + ?Sized,
    V: FnMut(usize, Complex64),
{
    let mut z = z0;
    for k in 0..n {
        visit(k, z);
        if k + 1 == n {
            break;
        }
        match step(f, z, opts)? {
            SpherePoint::Infinity => return Ok(Some(k + 1)),
            SpherePoint::Finite(w) => z = w,
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffAverage {
    pub average: f64,
    pub valid_steps: usize,
    /// Step at which the orbit hit a pole.
    pub truncated_at: Option<usize>,
}

/// `(1/n) Σ_{k<n} φ(f^k(z₀))` over the iterates that exist.
pub fn birkhoff_average<F, P>(f: &F, z0: Complex64, phi: P, n: usize) -> Result<BirkhoffAverage>
where
    F: MeromorphicMap + ?Sized,
    P: Fn(SpherePoint) -> f64,
{
    Ok(birkhoff_averages(f, z0, &[&phi], n)?.remove(0))
}

fn birkhoff_averages<F>(f: &F, z0: Complex64, phis: &[&dyn Fn(SpherePoint) -> f64], n: usize) -> Result<Vec<BirkhoffAverage>>
where
    F: MeromorphicMap + ?Sized,
{
    if n == 0 || !(z0.re.is_finite() && z0.im.is_finite()) {
        return Err(NevlabError::InvalidArgument("need a finite start and n ≥ 1".into()));
    }
    let mut means = vec![ExactMean::default(); phis.len()];
    let truncated_at = walk(f, z0, n, &IterateOptions::default(), |_, z| {
        for (m, phi) in means.iter_mut().zip(phis) {
            m.push(phi(SpherePoint::Finite(z)));
        }
    })?;
    Ok(means
        .iter()
        .map(|m| BirkhoffAverage { average: m.value(), valid_steps: m.count, truncated_at })
        .collect())
}

/// Mean and standard deviation of `φ` under the normalized spherical measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialAverage {
    pub mean: f64,
    pub sd: f64,
    /// Difference between two quadrature resolutions.
    pub error: f64,
}

/// `(E φ, E φ²)` with `u = r²/(1+r²)`, in which the measure is `du dθ/2π`.
fn sphere_quadrature<P: Fn(SpherePoint) -> f64 + Sync>(phi: &P, panels: usize, angles: usize) -> (f64, f64) {
    let rule = gl_rule();
    let h = 1.0 / panels as f64;
    let sums: Vec<(f64, f64)> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for &(x, w) in rule {
                let u = h * (p as f64 + 0.5 * (x + 1.0));
                let r = (u / (1.0 - u)).sqrt();
                let mut ring1 = 0.0;
                let mut ring2 = 0.0;
                for j in 0..angles {
                    let theta = 2.0 * PI * (j as f64 + 0.5) / angles as f64;
                    let v = phi(SpherePoint::Finite(Complex64::from_polar(r, theta)));
                    ring1 += v;
                    ring2 += v * v;
                }
                s1 += 0.5 * h * w * ring1 / angles as f64;
                s2 += 0.5 * h * w * ring2 / angles as f64;
            }
            (s1, s2)
        })
        .collect();
    sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Spherical average by tensor quadrature in stereographic coordinates.
pub fn spatial_average<P: Fn(SpherePoint) -> f64 + Sync>(phi: &P) -> SpatialAverage {
    let (m1, m2) = sphere_quadrature(phi, 64, 512);
    let (c1, _) = sphere_quadrature(phi, 32, 256);
    SpatialAverage { mean: m1, sd: (m2 - m1 * m1).max(0.0).sqrt(), error: (m1 - c1).abs() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub starts: usize,
    pub n_max: usize,
    pub escape_radius: f64,
    /// Chordal radius of the neighbourhood of Ω.
    pub epsilon: f64,
    pub test_functions: Vec<TestFunction>,
    pub seed: u64,
    /// Across-start deviation allowed, in Monte-Carlo standard errors.
    pub dispersion_factor: f64,
    /// Grand-mean offset allowed, in Monte-Carlo standard errors.
    pub mean_sigmas: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            starts: 200,
            n_max: 10_000,
            escape_radius: 10.0,
            epsilon: 0.05,
            test_functions: TestFunction::library(),
            seed: 2024,
            dispersion_factor: 5.0,
            mean_sigmas: 3.0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.starts > 0
            && self.n_max > 0
            && self.escape_radius > 0.0
            && self.epsilon > 0.0
            && self.epsilon < 1.0
            && self.dispersion_factor > 0.0
            && self.mean_sigmas > 0.0;
        if !ok {
            return Err(NevlabError::InvalidArgument(format!("bad probe config {self:?}")));
        }
        self.test_functions.iter().try_for_each(TestFunction::validate)
    }

    /// Start `i`, drawn from the spherical measure on its own substream.
    pub fn start(&self, i: usize) -> SpherePoint {
        sample_sphere_point(&mut stream_rng(self.seed, i as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffRow {
    pub function: TestFunction,
    pub spatial: SpatialAverage,
    /// `sd(φ)/√starts`.
    pub standard_error: f64,
    pub grand_mean: f64,
    pub across_sd: f64,
    pub truncated_starts: usize,
    pub dispersion_ok: bool,
    pub mean_ok: bool,
}

/// Birkhoff averages from spherically sampled starts, one row per test function.
pub fn birkhoff_probe<F: MeromorphicMap + ?Sized>(f: &F, cfg: &ProbeConfig) -> Result<Vec<BirkhoffRow>> {
    cfg.validate()?;
    let phis: Vec<Box<dyn Fn(SpherePoint) -> f64 + Sync>> =
        cfg.test_functions.iter().map(|t| Box::new(move |p| t.eval(p)) as Box<_>).collect();
    let runs: Vec<Option<Vec<BirkhoffAverage>>> = (0..cfg.starts)
        .into_par_iter()
        .map(|i| {
            let Some(z0) = cfg.start(i).as_finite() else { return Ok(None) };
            let refs: Vec<&dyn Fn(SpherePoint) -> f64> = phis.iter().map(|p| p.as_ref() as _).collect();
            birkhoff_averages(f, z0, &refs, cfg.n_max).map(Some)
        })
        .collect::<Result<_>>()?;
    let runs: Vec<Vec<BirkhoffAverage>> = runs.into_iter().flatten().collect();
    let count = runs.len() as f64;
    let mut rows = Vec::new();
    for (k, t) in cfg.test_functions.iter().enumerate() {
        let spatial = spatial_average(&|p| t.eval(p));
        let mut grand = ExactMean::default();
        runs.iter().for_each(|r| grand.push(r[k].average));
        let grand_mean = grand.value();
        let ss: f64 = runs.iter().map(|r| (r[k].average - grand_mean).powi(2)).sum();
        let across_sd = if runs.len() > 1 { (ss / (count - 1.0)).sqrt() } else { 0.0 };
        let standard_error = spatial.sd / count.sqrt();
        rows.push(BirkhoffRow {
            function: *t,
            spatial,
            standard_error,
            grand_mean,
            across_sd,
            truncated_starts: runs.iter().filter(|r| r[k].truncated_at.is_some()).count(),
            dispersion_ok: across_sd <= cfg.dispersion_factor * standard_error,
            // Rounding of the quadrature sum is allowed on top of its error.
            mean_ok: (grand_mean - spatial.mean).abs()
                <= cfg.mean_sigmas * standard_error + spatial.error + 1e-12 * spatial.mean.abs().max(1.0),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeCurve {
    /// Fraction of starts with `|z₀| > R`.
    pub initial: f64,
    /// Spherical measure of `{|z| > R}`.
    pub initial_expected: f64,
    /// `curve[n−1]`: fraction of starts with `|z_n| > R`, `n = 1..n_max`.
    pub curve: Vec<f64>,
    /// Orbits that reached ∞ within `n_max` steps.
    pub truncated_starts: usize,
    /// Orbits still defined at step `n_max`.
    pub defined_at_end: usize,
}

const INSIDE: u8 = 0;
const OUTSIDE: u8 = 1;
const UNDEFINED: u8 = 2;

/// Fraction of starts beyond the escape radius at each step. An orbit that
/// reaches ∞ counts as outside at that step and has no later points.
pub fn escaping_probe<F: MeromorphicMap + ?Sized>(f: &F, cfg: &ProbeConfig) -> Result<EscapeCurve> {
    cfg.validate()?;
    let n = cfg.n_max;
    let r = cfg.escape_radius;
    let rows: Vec<Vec<u8>> = (0..cfg.starts)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![UNDEFINED; n + 1];
            let Some(z0) = cfg.start(i).as_finite() else {
                out[0] = OUTSIDE;
                return Ok(out);
            };
            let hit = walk(f, z0, n + 1, &IterateOptions::default(), |k, z| {
                out[k] = if z.norm() > r { OUTSIDE } else { INSIDE }
            })?;
            if let Some(k) = hit {
                out[k] = OUTSIDE;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut outside = vec![0usize; n + 1];
    let mut defined = vec![0usize; n + 1];
    for row in &rows {
        for (k, &v) in row.iter().enumerate() {
            outside[k] += (v == OUTSIDE) as usize;
            defined[k] += (v != UNDEFINED) as usize;
        }
    }
    let frac = |k: usize| outside[k] as f64 / cfg.starts as f64;
    Ok(EscapeCurve {
        initial: frac(0),
        initial_expected: spherical_measure_outside(r),
        curve: (1..=n).map(frac).collect(),
        truncated_starts: cfg.starts - defined[n],
        defined_at_end: defined[n],
    })
}

/// `n,fraction` rows starting at `n = 0`.
pub fn write_escape_csv<W: Write>(out: W, curve: &EscapeCurve) -> Result<()> {
    let io = |e: csv::Error| NevlabError::InvalidArgument(format!("csv output: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "fraction"]).map_err(io)?;
    w.serialize((0, curve.initial)).map_err(io)?;
    for (k, v) in curve.curve.iter().enumerate() {
        w.serialize((k + 1, v)).map_err(io)?;
    }
    w.flush().map_err(|e| NevlabError::InvalidArgument(format!("csv output: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulationResult {
    pub epsilon: f64,
    pub n_max: usize,
    /// First step of the tested tail.
    pub tail_from: usize,
    pub fraction: f64,
    /// Orbits defined through step `n_max`.
    pub defined: usize,
    pub omega: Vec<SpherePoint>,
}

/// Fraction of `starts` whose orbit stays within `ε` of Ω over the last
/// fifth of `n_max` steps, and the number of orbits defined that long. An
/// orbit ending at ∞ before the tail has no tail and does not count.
pub fn accumulation_fraction<F: MeromorphicMap + ?Sized>(
    f: &F,
    omega: &[SpherePoint],
    epsilon: f64,
    n_max: usize,
    starts: &[Complex64],
) -> Result<(f64, usize)> {
    if omega.is_empty() {
        return Err(NevlabError::InvalidArgument("empty Ω".into()));
    }
    if !(epsilon > 0.0) || n_max == 0 || starts.is_empty() {
        return Err(NevlabError::InvalidArgument("need ε > 0, n_max ≥ 1 and starts".into()));
    }
    let tail_from = tail_start(n_max);
    let near = |p: SpherePoint| omega.iter().any(|&w| chordal_distance(p, w) < epsilon);
    let outcome: Vec<(bool, bool)> = starts
        .par_iter()
        .map(|&z0| {
            let mut ok = true;
            let mut seen = false;
            let hit = walk(f, z0, n_max + 1, &IterateOptions::default(), |k, z| {
                if k >= tail_from {
                    seen = true;
                    ok &= near(SpherePoint::Finite(z));
                }
            })?;
            if let Some(k) = hit {
                if k >= tail_from {
                    seen = true;
                    ok &= near(SpherePoint::Infinity);
                }
            }
            Ok((seen && ok, hit.is_none()))
        })
        .collect::<Result<_>>()?;
    let inside = outcome.iter().filter(|o| o.0).count();
    let defined = outcome.iter().filter(|o| o.1).count();
    Ok((inside as f64 / starts.len() as f64, defined))
}

fn tail_start(n_max: usize) -> usize {
    n_max - n_max / 5
}

/// [`accumulation_fraction`] over spherically sampled starts.
pub fn accumulation_probe<F: MeromorphicMap + ?Sized>(
    f: &F,
    omega: &[SpherePoint],
    cfg: &ProbeConfig,
) -> Result<AccumulationResult> {
    cfg.validate()?;
    let starts: Vec<Complex64> = (0..cfg.starts).filter_map(|i| cfg.start(i).as_finite()).collect();
    let (fraction, defined) = accumulation_fraction(f, omega, cfg.epsilon, cfg.n_max, &starts)?;
    Ok(AccumulationResult {
        epsilon: cfg.epsilon,
        n_max: cfg.n_max,
        tail_from: tail_start(cfg.n_max),
        fraction,
        defined,
        omega: omega.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub birkhoff: Vec<BirkhoffRow>,
    pub escape: EscapeCurve,
    pub accumulation: Option<AccumulationResult>,
    pub config: ProbeConfig,
}

/// All probes; the accumulation probe runs when Ω is given.
pub fn run_probe<F: MeromorphicMap + ?Sized>(f: &F, cfg: &ProbeConfig, omega: Option<&[SpherePoint]>) -> Result<ProbeReport> {
    let birkhoff = birkhoff_probe(f, cfg)?;
    let escape = escaping_probe(f, cfg)?;
    let accumulation = omega.map(|o| accumulation_probe(f, o, cfg)).transpose()?;
    Ok(ProbeReport { seed: cfg.seed, birkhoff, escape, accumulation, config: cfg.clone() })
}
