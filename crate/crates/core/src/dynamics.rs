//! Forward iteration on the sphere, classification of singular orbits and
//! numerical sweeps of the expansion inequalities for the return map `σ`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NevlabError, Result};
use crate::nevanlinna::{expm1_complex, FunctionDescriptor, QuotientParts};
use crate::sphere::{chordal_distance, stream_rng, SpherePoint};

/// Anything iterated by the orbit machinery.
pub trait MeromorphicMap: Sync {
    /// Numerator, denominator and their derivatives at `z`.
    fn parts(&self, z: Complex64) -> Result<QuotientParts>;
}

impl MeromorphicMap for FunctionDescriptor {
    fn parts(&self, z: Complex64) -> Result<QuotientParts> {
        FunctionDescriptor::parts(self, z)
    }
}

/// `f(z) = z`, for harnesses.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl MeromorphicMap for IdentityMap {
    fn parts(&self, z: Complex64) -> Result<QuotientParts> {
        let one = Complex64::new(1.0, 0.0);
        Ok(QuotientParts { num: z, den: one, dnum: one, dden: Complex64::new(0.0, 0.0) })
    }
}

fn newton<G>(g: &G, start: Complex64, tol: f64, max_iter: usize) -> Result<Option<Complex64>>
where
    G: Fn(Complex64) -> Result<(Complex64, Complex64)>,
{
    crate::nevanlinna::newton(g, start, tol, max_iter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    ReachedInfinity,
    MaxIterations,
    EscapedRadius,
}

/// `points[0]` is the start; `points[n+1] = f(points[n])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub start: SpherePoint,
    pub points: Vec<SpherePoint>,
    pub terminal: Terminal,
}

impl Orbit {
    /// Number of applications of `f`.
    pub fn length(&self) -> usize {
        self.points.len() - 1
    }

    pub fn last(&self) -> SpherePoint {
        *self.points.last().unwrap()
    }

    /// Rows `n,re,im`; ∞ is written as `inf,inf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| NevlabError::InvalidArgument(format!("csv output: {e}"));
        w.write_record(["n", "re", "im"]).map_err(io)?;
        for (n, p) in self.points.iter().enumerate() {
            let (re, im) = match p {
                SpherePoint::Finite(z) => (z.re, z.im),
                SpherePoint::Infinity => (f64::INFINITY, f64::INFINITY),
            };
            w.serialize((n, re, im)).map_err(io)?;
        }
        w.flush().map_err(|e| NevlabError::InvalidArgument(format!("csv output: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateOptions {
    pub n_max: usize,
    pub escape_radius: f64,
    /// Consecutive steps beyond `escape_radius` that end the orbit.
    pub persistence: usize,
    /// Values above this size trigger a Newton search for a nearby pole.
    pub pole_trigger: f64,
    /// A pole closer than this (relative) to the preimage counts as hit.
    pub pole_tol: f64,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self { n_max: 1000, escape_radius: 1e8, persistence: 5, pole_trigger: 1e12, pole_tol: 1e-9 }
    }
}

/// Pole of `f` next to `z`, by Newton on the denominator.
pub fn refine_pole<F: MeromorphicMap + ?Sized>(f: &F, z: Complex64) -> Result<Option<Complex64>> {
    let g = |w: Complex64| f.parts(w).map(|q| (q.den, q.dden));
    newton(&g, z, 1e-15, 50)
}

/// One step of `f` with the pole-hit test.
pub fn step<F: MeromorphicMap + ?Sized>(f: &F, z: Complex64, opts: &IterateOptions) -> Result<SpherePoint> {
    let q = f.parts(z)?;
    if q.den == Complex64::new(0.0, 0.0) {
        return Ok(SpherePoint::Infinity);
    }
    let v = q.num / q.den;
    let finite = v.re.is_finite() && v.im.is_finite();
    if finite && v.norm() <= opts.pole_trigger {
        return Ok(SpherePoint::Finite(v));
    }
    if let Some(s) = refine_pole(f, z)? {
        if (s - z).norm() <= opts.pole_tol * z.norm().max(1.0) {
            return Ok(SpherePoint::Infinity);
        }
    }
    Ok(if finite { SpherePoint::Finite(v) } else { SpherePoint::Infinity })
}

/// Forward orbit of `z₀` with default options apart from `n_max` and the radius.
pub fn iterate<F: MeromorphicMap + ?Sized>(f: &F, z0: Complex64, n_max: usize, escape_r: f64) -> Result<Orbit> {
    iterate_with(f, z0, &IterateOptions { n_max, escape_radius: escape_r, ..IterateOptions::default() })
}

pub fn iterate_with<F: MeromorphicMap + ?Sized>(f: &F, z0: Complex64, opts: &IterateOptions) -> Result<Orbit> {
    if !(z0.re.is_finite() && z0.im.is_finite()) {
        return Err(NevlabError::InvalidArgument(format!("start {z0} is not finite")));
    }
    let start = SpherePoint::Finite(z0);
    let mut points = Vec::with_capacity(opts.n_max.min(1 << 16) + 1);
    points.push(start);
    let mut z = z0;
    let mut outside = 0;
    for _ in 0..opts.n_max {
        match step(f, z, opts)? {
            SpherePoint::Infinity => {
                points.push(SpherePoint::Infinity);
                return Ok(Orbit { start, points, terminal: Terminal::ReachedInfinity });
            }
            SpherePoint::Finite(w) => {
                points.push(SpherePoint::Finite(w));
                z = w;
                if w.norm() > opts.escape_radius {
                    outside += 1;
                    if outside >= opts.persistence {
                        return Ok(Orbit { start, points, terminal: Terminal::EscapedRadius });
                    }
                } else {
                    outside = 0;
                }
            }
        }
    }
    Ok(Orbit { start, points, terminal: Terminal::MaxIterations })
}

/// `f^q(z)` and `(f^q)'(z)` by the chain rule.
pub fn iterate_derivative<F: MeromorphicMap + ?Sized>(f: &F, z: Complex64, q: usize) -> Result<(Complex64, Complex64)> {
    let mut w = z;
    let mut d = Complex64::new(1.0, 0.0);
    for _ in 0..q {
        let parts = f.parts(w)?;
        let fd = parts
            .derivative()
            .ok_or_else(|| NevlabError::InvalidArgument(format!("{w} is a pole")))?;
        d *= fd;
        w = parts.num / parts.den;
        if !(w.re.is_finite() && w.im.is_finite()) {
            return Err(NevlabError::InvalidArgument(format!("iterate of {z} overflowed")));
        }
    }
    Ok((w, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    pub n_max: usize,
    /// Repelling margin: `|(f^q)'| > 1 + δ`.
    pub delta: f64,
    pub max_period: usize,
    /// Chordal gap that counts as a return.
    pub cycle_tol: f64,
    pub pole_tol: f64,
    pub escape_radius: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { n_max: 200, delta: 0.05, max_period: 64, cycle_tol: 1e-9, pole_tol: 1e-9, escape_radius: 1e8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum OrbitClass {
    /// `f^p(λ) = ∞`. `pole` is the refined pole near `f^{p−1}(λ)` and
    /// `residual` the Newton correction from that iterate.
    Prepole { p: usize, pole: Option<Complex64>, residual: f64 },
    /// `f^n(λ)` lies on a repelling cycle of period `q`.
    RepellingLanding {
        preperiod: usize,
        cycle: Vec<Complex64>,
        period: usize,
        multiplier: f64,
        /// Same multiplier by central differences of `f^q`.
        multiplier_fd: f64,
        /// `|f^{n+q}(λ) − f^n(λ)|`.
        landing_residual: f64,
    },
    Escaping { steps: usize, last_modulus: f64 },
    Unresolved { diagnostic: String, omega_sample: Vec<SpherePoint> },
}

impl OrbitClass {
    pub fn is_prepole(&self) -> bool {
        matches!(self, OrbitClass::Prepole { .. })
    }
}

fn multiplier_fd<F: MeromorphicMap + ?Sized>(f: &F, w: Complex64, q: usize) -> Result<Complex64> {
    let h = 1e-5 * w.norm().max(1.0);
    let (a, _) = iterate_derivative(f, w + h, q)?;
    let (b, _) = iterate_derivative(f, w - h, q)?;
    Ok((a - b) / (2.0 * h))
}

fn cycle_class<F: MeromorphicMap + ?Sized>(
    f: &F,
    points: &[Complex64],
    n: usize,
    q: usize,
    opts: &ClassifyOptions,
) -> Result<OrbitClass> {
    let start = points[n];
    let g = |w: Complex64| iterate_derivative(f, w, q).map(|(v, d)| (v - w, d - 1.0));
    let w = newton(&g, start, 1e-15, 60)?.unwrap_or(start);
    let (_, d) = iterate_derivative(f, w, q)?;
    let fd = multiplier_fd(f, w, q)?;
    let mut cycle = vec![w];
    for _ in 1..q {
        let (v, _) = iterate_derivative(f, *cycle.last().unwrap(), 1)?;
        cycle.push(v);
    }
    let multiplier = d.norm();
    let landing_residual = (points[n + q] - points[n]).norm();
    if multiplier > 1.0 + opts.delta {
        Ok(OrbitClass::RepellingLanding {
            preperiod: n,
            cycle,
            period: q,
            multiplier,
            multiplier_fd: fd.norm(),
            landing_residual,
        })
    } else {
        Ok(OrbitClass::Unresolved {
            diagnostic: format!("cycle of period {q} after {n} steps with multiplier {multiplier:.6}"),
            omega_sample: cycle.into_iter().map(SpherePoint::Finite).collect(),
        })
    }
}

/// Classifies the forward orbit of an asymptotic value.
pub fn classify_singular_orbit<F: MeromorphicMap + ?Sized>(
    f: &F,
    lambda: SpherePoint,
    opts: &ClassifyOptions,
) -> Result<OrbitClass> {
    let Some(z0) = lambda.as_finite() else {
        return Ok(OrbitClass::Prepole { p: 0, pole: None, residual: 0.0 });
    };
    let it = IterateOptions {
        n_max: opts.n_max,
        escape_radius: opts.escape_radius,
        pole_tol: opts.pole_tol,
        ..IterateOptions::default()
    };
    let orbit = iterate_with(f, z0, &it)?;
    let finite: Vec<Complex64> = orbit.points.iter().filter_map(|p| p.as_finite()).collect();
    // Earliest return first, so a late chance return to an early point
    // does not mask the cycle actually reached. A return also wins over a
    // later pole hit: rounding pushes orbits off repelling cycles.
    for m in 1..finite.len() {
        for q in 1..=opts.max_period.min(m) {
            let n = m - q;
            let gap = chordal_distance(SpherePoint::Finite(finite[n]), SpherePoint::Finite(finite[n + q]));
            if gap < opts.cycle_tol {
                return cycle_class(f, &finite, n, q, opts);
            }
        }
    }
    if orbit.terminal == Terminal::ReachedInfinity {
        let p = orbit.length();
        let last = finite[p - 1];
        let pole = refine_pole(f, last)?;
        let residual = pole.map_or(0.0, |s| (s - last).norm());
        return Ok(OrbitClass::Prepole { p, pole, residual });
    }
    if orbit.terminal == Terminal::EscapedRadius {
        let last_modulus = finite.last().map_or(f64::INFINITY, |z| z.norm());
        return Ok(OrbitClass::Escaping { steps: orbit.length(), last_modulus });
    }
    let tail = orbit.points.len().saturating_sub(16);
    Ok(OrbitClass::Unresolved {
        diagnostic: format!("no return within {} steps", orbit.length()),
        omega_sample: orbit.points[tail..].to_vec(),
    })
}

/// Grid for [`find_mixed_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixedSearch {
    /// Must be a pole `kπi` of the family.
    pub lambda: Complex64,
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub steps: (usize, usize),
    /// Period of the cycle `f(μ)` should land on.
    pub period: usize,
    pub delta: f64,
    pub classify: ClassifyOptions,
}

impl Default for MixedSearch {
    fn default() -> Self {
        Self {
            lambda: Complex64::new(0.0, PI),
            re_range: (-2.0, 2.0),
            im_range: (-3.0, 3.0),
            steps: (8, 12),
            period: 1,
            delta: 0.05,
            classify: ClassifyOptions::default(),
        }
    }
}

/// A closed-form instance with one prepole value and one value landing on a
/// repelling cycle, plus the data that certifies it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixedInstance {
    pub descriptor: FunctionDescriptor,
    pub lambda: Complex64,
    pub mu: Complex64,
    /// `|f^{q+1}(μ) − f(μ)|`.
    pub residual: f64,
    pub lambda_class: OrbitClass,
    pub mu_class: OrbitClass,
    /// Prepole count `K` and number of asymptotic values `N`.
    pub k: usize,
    pub n: usize,
}

impl MixedInstance {
    /// Re-checks the certificates against the given thresholds.
    pub fn certified(&self, residual_tol: f64, delta: f64) -> bool {
        let prepole = matches!(self.lambda_class, OrbitClass::Prepole { p, residual, .. } if p >= 1 && residual <= residual_tol);
        let landing = matches!(self.mu_class, OrbitClass::RepellingLanding { multiplier, .. } if multiplier > 1.0 + delta);
        prepole && landing && self.residual <= residual_tol && self.k == 1 && self.n == 2
    }
}

/// `f_μ(z) = λ + (λ−μ)/(e^{2z}−1)`, its `z`-derivative and its `μ`-derivative.
fn family_step(lambda: Complex64, mu: Complex64, z: Complex64) -> Option<(Complex64, Complex64, Complex64)> {
    let m = expm1_complex(2.0 * z);
    let v = lambda + (lambda - mu) / m;
    let dz = -2.0 * (lambda - mu) * (m + 1.0) / (m * m);
    let dmu = -1.0 / m;
    let ok = [v, dz, dmu].iter().all(|c| c.re.is_finite() && c.im.is_finite());
    ok.then_some((v, dz, dmu))
}

/// `G(μ) = f_μ^{q+1}(μ) − f_μ(μ)` and `dG/dμ`.
fn landing_equation(lambda: Complex64, mu: Complex64, q: usize) -> Option<(Complex64, Complex64)> {
    let mut z = mu;
    let mut dz = Complex64::new(1.0, 0.0);
    let mut first = None;
    for _ in 0..=q {
        let (v, fz, fmu) = family_step(lambda, mu, z)?;
        dz = fmu + fz * dz;
        z = v;
        first.get_or_insert((z, dz));
    }
    let (z1, dz1) = first?;
    Some((z - z1, dz - dz1))
}

/// Newton search in `μ` for a closed-form instance whose value `μ` lands on
/// a repelling `q`-cycle while `λ` is a pole.
pub fn find_mixed_instance<R: Rng + ?Sized>(search: &MixedSearch, rng: &mut R) -> Result<MixedInstance> {
    let lambda = search.lambda;
    if expm1_complex(2.0 * lambda).norm() > 1e-12 {
        return Err(NevlabError::InvalidArgument(format!("λ = {lambda} is not a pole of the family")));
    }
    let (nx, ny) = search.steps;
    if nx == 0 || ny == 0 || search.period == 0 {
        return Err(NevlabError::InvalidArgument("empty search grid".into()));
    }
    let hx = (search.re_range.1 - search.re_range.0) / nx as f64;
    let hy = (search.im_range.1 - search.im_range.0) / ny as f64;
    let mut tried = 0;
    for iy in 0..ny {
        for ix in 0..nx {
            let start = Complex64::new(
                search.re_range.0 + hx * (ix as f64 + rng.random::<f64>()),
                search.im_range.0 + hy * (iy as f64 + rng.random::<f64>()),
            );
            tried += 1;
            let g = |mu: Complex64| {
                landing_equation(lambda, mu, search.period)
                    .ok_or_else(|| NevlabError::InvalidArgument("orbit hit a pole".into()))
            };
            let Ok(Some(mu)) = newton(&g, start, 1e-15, 60) else { continue };
            let Some((res, _)) = landing_equation(lambda, mu, search.period) else { continue };
            if (mu - lambda).norm() < 1e-6 || res.norm() > 1e-10 {
                continue;
            }
            let Ok(descriptor) = FunctionDescriptor::two_av(lambda, mu) else { continue };
            let lambda_class = classify_singular_orbit(&descriptor, SpherePoint::Finite(lambda), &search.classify)?;
            let mu_class = classify_singular_orbit(&descriptor, SpherePoint::Finite(mu), &search.classify)?;
            let found = MixedInstance {
                descriptor,
                lambda,
                mu,
                residual: res.norm(),
                lambda_class,
                mu_class,
                k: 1,
                n: 2,
            };
            if found.certified(1e-10, search.delta) {
                return Ok(found);
            }
        }
    }
    Err(NevlabError::NoInstance(format!("{tried} starts, none certified")))
}

/// One prepole asymptotic value used by `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaMember {
    pub tract: usize,
    pub value: Complex64,
    pub prepole_order: usize,
    /// The lattice pole `f^{p−1}(λ_i)`.
    pub pole: Complex64,
    /// `(f^{p−1})'(λ_i)`.
    pub lead: Complex64,
}

/// `σ(z) = f^{p_i+1}(z)` on the tracts of a set of prepole values of a
/// closed-form instance.
///
/// The last step is evaluated in the pole's own coordinate `d = w − s`, so
/// `σ` keeps its size deep in a tract where `f(z) − λ_i` is far below the
/// spacing of doubles near `λ_i`.
#[derive(Debug, Clone)]
pub struct SigmaMap<'a> {
    f: &'a FunctionDescriptor,
    lambda: Complex64,
    mu: Complex64,
    members: Vec<SigmaMember>,
    /// Tract test `|Re z| > abscissa`.
    pub tract_abscissa: f64,
}

/// Result of one `σ` evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaValue {
    pub value: Complex64,
    pub derivative: Complex64,
    pub tract: usize,
}

impl<'a> SigmaMap<'a> {
    /// `tracts` selects the subset `S_l`; each value there must be a prepole.
    pub fn new(f: &'a FunctionDescriptor, tracts: &[usize], opts: &ClassifyOptions) -> Result<Self> {
        let (lambda, mu) = f
            .two_av_values()
            .ok_or_else(|| NevlabError::InvalidArgument("σ is implemented for the closed-form family".into()))?;
        if tracts.is_empty() {
            return Err(NevlabError::InvalidArgument("empty subset".into()));
        }
        let mut members = Vec::new();
        for &t in tracts {
            let value = match t {
                1 => lambda,
                0 => mu,
                _ => return Err(NevlabError::InvalidArgument(format!("no tract {t}"))),
            };
            let class = classify_singular_orbit(f, SpherePoint::Finite(value), opts)?;
            let OrbitClass::Prepole { p, pole: Some(s), .. } = class else {
                return Err(NevlabError::InvalidArgument(format!("value {value} of tract {t} is not a prepole")));
            };
            let pole = Complex64::new(0.0, (s.im / PI).round() * PI);
            let lead = if p > 1 { iterate_derivative(f, value, p - 1)?.1 } else { Complex64::new(1.0, 0.0) };
            members.push(SigmaMember { tract: t, value, prepole_order: p, pole, lead });
        }
        members.sort_by_key(|m| m.tract);
        members.dedup_by_key(|m| m.tract);
        Ok(Self { f, lambda, mu, members, tract_abscissa: 1.0 })
    }

    pub fn members(&self) -> &[SigmaMember] {
        &self.members
    }

    pub fn descriptor(&self) -> &FunctionDescriptor {
        self.f
    }

    fn member(&self, tract: usize) -> Option<&SigmaMember> {
        self.members.iter().find(|m| m.tract == tract)
    }

    /// `f(s + d)` and its derivative for a lattice pole `s`.
    pub fn pole_step(&self, d: Complex64) -> (Complex64, Complex64) {
        let m = expm1_complex(2.0 * d);
        let k = self.lambda - self.mu;
        (self.lambda + k / m, -2.0 * k * (m + 1.0) / (m * m))
    }

    /// `(f(z) − v, f'(z))` with `v` the value of the tract holding `z`.
    fn tract_step(&self, z: Complex64) -> Option<(usize, Complex64, Complex64)> {
        let k = self.lambda - self.mu;
        if z.re > self.tract_abscissa {
            let e = (-2.0 * z).exp();
            let one_minus = -expm1_complex(-2.0 * z);
            Some((1, k * e / one_minus, -2.0 * k * e / (one_minus * one_minus)))
        } else if z.re < -self.tract_abscissa {
            let e = (2.0 * z).exp();
            let m = expm1_complex(2.0 * z);
            Some((0, k * e / m, -2.0 * k * e / (m * m)))
        } else {
            None
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<SigmaValue> {
        let (tract, delta, d0) = self.tract_step(z).ok_or(NevlabError::OutsideTract(z))?;
        let m = self.member(tract).ok_or(NevlabError::OutsideTract(z))?;
        let (offset, chain) = if m.prepole_order == 1 {
            (delta, Complex64::new(1.0, 0.0))
        } else if delta.norm() <= 1e-7 * m.value.norm().max(1.0) {
            (m.lead * delta, m.lead)
        } else {
            let (w, d) = iterate_derivative(self.f, m.value + delta, m.prepole_order - 1)?;
            (w - m.pole, d)
        };
        let (value, dlast) = self.pole_step(offset);
        Ok(SigmaValue { value, derivative: dlast * chain * d0, tract })
    }
}

/// Sampling setup for [`check_tract_expansion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractCheck {
    pub samples: usize,
    /// `|Re z|` range of the samples.
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub radius: f64,
    pub seed: u64,
}

impl Default for TractCheck {
    fn default() -> Self {
        Self { samples: 10_000, re_range: (5.0, 50.0), im_range: (-PI, PI), radius: 10.0, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMean {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractExpansionReport {
    pub samples: usize,
    pub rejected: usize,
    pub violations: usize,
    /// Smallest `|σ'| / (|log|σ| − log R| / 4π · |σ|/|z|)`.
    pub min_ratio: f64,
    pub bands: Vec<BandMean>,
    pub config: TractCheck,
}

/// Two-sided evaluation of the tract expansion bound on random tract points.
pub fn check_tract_expansion(sigma: &SigmaMap, cfg: &TractCheck) -> Result<TractExpansionReport> {
    if cfg.samples == 0 || !(cfg.radius > 0.0) || !(cfg.re_range.0 > sigma.tract_abscissa) {
        return Err(NevlabError::InvalidArgument(format!("bad tract sampling {cfg:?}")));
    }
    let members: Vec<usize> = sigma.members().iter().map(|m| m.tract).collect();
    let ln_r = cfg.radius.ln();
    let rows: Vec<Option<(f64, f64)>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            let x = rng.random_range(cfg.re_range.0..cfg.re_range.1);
            let y = rng.random_range(cfg.im_range.0..cfg.im_range.1);
            let sign = if members[i % members.len()] == 1 { 1.0 } else { -1.0 };
            let z = Complex64::new(sign * x, y);
            let s = sigma.eval(z)?;
            let modulus = s.value.norm();
            if !(modulus > cfg.radius) {
                return Ok(None);
            }
            let rhs = (modulus.ln() - ln_r).abs() / (4.0 * PI) * modulus / z.norm();
            Ok(Some((z.norm(), s.derivative.norm() / rhs)))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<(f64, f64)> = rows.iter().flatten().copied().collect();
    let violations = kept.iter().filter(|(_, r)| !(*r > 1.0)).count();
    let min_ratio = kept.iter().map(|(_, r)| *r).fold(f64::INFINITY, f64::min);
    let mut bands = Vec::new();
    let mut lo = cfg.re_range.0;
    let top = kept.iter().map(|(m, _)| *m).fold(0.0, f64::max);
    while lo <= top {
        let hi = 2.0 * lo;
        let inside: Vec<f64> = kept.iter().filter(|(m, _)| *m >= lo && *m < hi).map(|(_, r)| *r).collect();
        if !inside.is_empty() {
            let mean_ratio = inside.iter().sum::<f64>() / inside.len() as f64;
            bands.push(BandMean { lo, hi, count: inside.len(), mean_ratio });
        }
        lo = hi;
    }
    Ok(TractExpansionReport {
        samples: cfg.samples,
        rejected: cfg.samples - kept.len(),
        violations,
        min_ratio,
        bands,
        config: *cfg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleCheck {
    pub samples: usize,
    pub radius: f64,
    /// Index window for the neighbourhoods `V'_j`.
    pub j_range: (usize, usize),
    pub seed: u64,
}

impl Default for PoleCheck {
    fn default() -> Self {
        Self { samples: 10_000, radius: 10.0, j_range: (5, 40), seed: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleNeighborhoodReport {
    /// No `b_j` exists, so there are no neighbourhoods `V'_j` to test.
    pub vacuous: bool,
    pub preimages: usize,
    /// Samples in the pole disks `U = g(A_{2R})`.
    pub disk_samples: usize,
    /// Samples with `|f'| < R/2`, or outside `D(s, 2|r|/R)`.
    pub violations: usize,
    /// Smallest `|f'| / (R/2)` over the disk samples.
    pub min_ratio: f64,
    /// `D(s, |r|/8R)` maps into `A_{2R}` on its boundary.
    pub inner_disk_ok: bool,
    pub fitted_b: Option<f64>,
    pub diam_exponent: Option<f64>,
    pub config: PoleCheck,
}

/// Pole-neighbourhood bound. The neighbourhoods `V'_j` surround preimages
/// `b_j` of `λ_i`, which the closed-form family omits, so only the terminal
/// pole disk is sampled, through the inverse branch at the pole. The family
/// is `πi`-periodic and one disk stands for every lattice pole.
pub fn check_pole_neighborhood_expansion(sigma: &SigmaMap, cfg: &PoleCheck) -> Result<PoleNeighborhoodReport> {
    if cfg.samples == 0 || !(cfg.radius > 0.0) || cfg.j_range.0 > cfg.j_range.1 {
        return Err(NevlabError::InvalidArgument(format!("bad pole sampling {cfg:?}")));
    }
    // f − λ = (λ−μ)/(e^{2z}−1) and f − μ = (λ−μ)e^{2z}/(e^{2z}−1) never vanish.
    let preimages = 0;
    let (lambda, mu) = sigma.descriptor().two_av_values().unwrap();
    let k = lambda - mu;
    let residue = 0.5 * k.norm();
    let r = cfg.radius;
    let rows: Vec<(f64, bool)> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            // 1/w uniform in the punctured disk of radius 1/2R.
            let t = Complex64::from_polar(
                rng.random::<f64>().sqrt() / (2.0 * r),
                2.0 * PI * rng.random::<f64>(),
            );
            let w = 1.0 / t;
            let d = 0.5 * (1.0 + k / (w - lambda)).ln();
            let (_, fd) = sigma.pole_step(d);
            (fd.norm() / (0.5 * r), d.norm() <= 2.0 * residue / r)
        })
        .collect();
    let violations = rows.iter().filter(|(ratio, inside)| !(*ratio >= 1.0) || !inside).count();
    let min_ratio = rows.iter().map(|(ratio, _)| *ratio).fold(f64::INFINITY, f64::min);
    let inner_disk_ok = (0..64).all(|n| {
        let d = Complex64::from_polar(residue / (8.0 * r), 2.0 * PI * n as f64 / 64.0);
        sigma.pole_step(d).0.norm() > 2.0 * r
    });
    Ok(PoleNeighborhoodReport {
        vacuous: true,
        preimages,
        disk_samples: cfg.samples,
        violations,
        min_ratio,
        inner_disk_ok,
        fitted_b: None,
        diam_exponent: None,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn toy(l: Complex64, m: Complex64) -> FunctionDescriptor {
        FunctionDescriptor::two_av(l, m).unwrap()
    }

    fn pi_i() -> Complex64 {
        c(0.0, PI)
    }

    #[test]
    fn pole_start_reaches_infinity() {
        let f = toy(c(2.0, 0.0), c(1.0, 0.0));
        let o = iterate(&f, c(0.0, 0.0), 100, 1e8).unwrap();
        assert_eq!(o.length(), 1);
        assert_eq!(o.terminal, Terminal::ReachedInfinity);
        assert!(o.last().is_infinite());
    }

    #[test]
    fn coth_prepole() {
        let f = toy(pi_i(), -pi_i());
        let o = iterate(&f, pi_i(), 100, 1e8).unwrap();
        assert_eq!((o.length(), o.terminal), (1, Terminal::ReachedInfinity));
        let class = classify_singular_orbit(&f, SpherePoint::Finite(pi_i()), &ClassifyOptions::default()).unwrap();
        let OrbitClass::Prepole { p, pole, residual } = class else { panic!("{class:?}") };
        assert_eq!(p, 1);
        assert!((pole.unwrap() - pi_i()).norm() < 1e-9 && residual <= 1e-9);
    }

    #[test]
    fn infinity_is_prepole_of_order_zero() {
        let f = toy(c(2.0, 0.0), c(1.0, 0.0));
        let class = classify_singular_orbit(&f, SpherePoint::Infinity, &ClassifyOptions::default()).unwrap();
        assert_eq!(class, OrbitClass::Prepole { p: 0, pole: None, residual: 0.0 });
    }

    #[test]
    fn fixed_point_orbit_is_constant() {
        let f = toy(c(2.0, 0.0), c(1.0, 0.0));
        // λ = 2 is attracted to a fixed point near 2.02.
        let g = |z: Complex64| iterate_derivative(&f, z, 1).map(|(v, d)| (v - z, d - 1.0));
        let z = newton(&g, c(2.0, 0.0), 1e-15, 60).unwrap().unwrap();
        let o = iterate(&f, z, 100, 1e8).unwrap();
        assert_eq!(o.terminal, Terminal::MaxIterations);
        for p in &o.points {
            assert!((p.as_finite().unwrap() - z).norm() < 1e-9);
        }
    }

    #[test]
    fn iteration_is_deterministic() {
        let f = toy(c(0.5, 1.0), c(-1.0, 0.2));
        let a = iterate(&f, c(0.3, 0.7), 500, 1e6).unwrap();
        let b = iterate(&f, c(0.3, 0.7), 500, 1e6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn escaping_needs_persistence() {
        struct Doubling;
        impl MeromorphicMap for Doubling {
            fn parts(&self, z: Complex64) -> Result<QuotientParts> {
                let one = Complex64::new(1.0, 0.0);
                Ok(QuotientParts { num: 2.0 * z, den: one, dnum: 2.0 * one, dden: Complex64::new(0.0, 0.0) })
            }
        }
        let o = iterate(&Doubling, c(1.0, 0.0), 100, 10.0).unwrap();
        assert_eq!(o.terminal, Terminal::EscapedRadius);
        // 2, 4, 8 stay inside; 16..256 are the five outside steps.
        assert_eq!(o.length(), 8);
        let class = classify_singular_orbit(
            &Doubling,
            SpherePoint::finite(1.0, 0.0),
            &ClassifyOptions { escape_radius: 10.0, ..ClassifyOptions::default() },
        )
        .unwrap();
        assert!(matches!(class, OrbitClass::Escaping { steps: 8, .. }));
    }

    #[test]
    fn identity_orbit_is_constant() {
        let o = iterate(&IdentityMap, c(0.1, 0.2), 10, 1e8).unwrap();
        assert!(o.points.iter().all(|p| *p == SpherePoint::finite(0.1, 0.2)));
    }

    #[test]
    fn csv_rows() {
        let f = toy(c(2.0, 0.0), c(1.0, 0.0));
        let o = iterate(&f, c(0.0, 0.0), 10, 1e8).unwrap();
        let mut buf = Vec::new();
        o.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,re,im\n0,0.0,0.0\n1,inf,inf\n");
    }

    #[test]
    fn landing_equation_derivative() {
        let (l, mu, q) = (pi_i(), c(0.4, -1.5), 2);
        let (_, d) = landing_equation(l, mu, q).unwrap();
        let h = 1e-6;
        let fd = (landing_equation(l, mu + h, q).unwrap().0 - landing_equation(l, mu - h, q).unwrap().0) / (2.0 * h);
        assert!((d - fd).norm() < 1e-6 * d.norm());
    }

    #[test]
    fn mixed_instance_is_certified() {
        let mut rng = stream_rng(1, 0);
        let m = find_mixed_instance(&MixedSearch::default(), &mut rng).unwrap();
        assert!(m.certified(1e-10, 0.05));
        assert!(matches!(m.lambda_class, OrbitClass::Prepole { p: 1, .. }));
        let OrbitClass::RepellingLanding { cycle, multiplier, multiplier_fd, preperiod, .. } = &m.mu_class else {
            panic!("{:?}", m.mu_class)
        };
        assert_eq!(*preperiod, 1, "{m:?}");
        assert!(*multiplier > 1.05);
        assert!((multiplier - multiplier_fd).abs() <= 1e-5 * multiplier);
        let f = &m.descriptor;
        let w = f.eval(m.mu).unwrap().as_finite().unwrap();
        assert!((w - cycle[0]).norm() < 1e-9);
        let json = serde_json::to_string(&m).unwrap();
        let back: MixedInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(back.mu, m.mu);
    }

    #[test]
    fn sigma_matches_direct_iteration_near_the_boundary() {
        let f = toy(pi_i(), -pi_i());
        let sigma = SigmaMap::new(&f, &[0, 1], &ClassifyOptions::default()).unwrap();
        for z in [c(2.0, 0.3), c(-2.5, 1.1), c(3.0, -2.0)] {
            let s = sigma.eval(z).unwrap();
            let (v, d) = iterate_derivative(&f, z, 2).unwrap();
            assert!((s.value - v).norm() < 1e-6 * v.norm(), "{z}: {} vs {v}", s.value);
            assert!((s.derivative - d).norm() < 1e-6 * d.norm());
        }
        // Deep in the tract σ ≈ e^{2z}/2 with no saturation at 1e16.
        let s = sigma.eval(c(40.0, 0.5)).unwrap();
        let expect = (c(80.0, 1.0)).exp() / 2.0;
        assert!((s.value - expect).norm() < 1e-9 * expect.norm());
        assert!(matches!(sigma.eval(c(0.5, 0.0)), Err(NevlabError::OutsideTract(_))));
    }

    #[test]
    fn sigma_rejects_non_prepole_values() {
        let f = toy(c(2.0, 0.0), c(1.0, 0.0));
        assert!(SigmaMap::new(&f, &[1], &ClassifyOptions::default()).is_err());
    }

    #[test]
    fn tract_expansion_holds_for_coth() {
        let f = toy(pi_i(), -pi_i());
        let sigma = SigmaMap::new(&f, &[1], &ClassifyOptions::default()).unwrap();
        let cfg = TractCheck { samples: 2000, ..TractCheck::default() };
        let rep = check_tract_expansion(&sigma, &cfg).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.rejected, 0);
        assert!(rep.min_ratio > 1.0);
        // The ratio tends to 4π/cos(arg z) rather than growing.
        let last = rep.bands.last().unwrap();
        assert!(last.mean_ratio > 4.0 * PI && last.mean_ratio < 4.0 * PI * 1.3, "{rep:?}");
    }

    #[test]
    fn pole_disks_for_coth() {
        let f = toy(pi_i(), -pi_i());
        let sigma = SigmaMap::new(&f, &[0, 1], &ClassifyOptions::default()).unwrap();
        let rep = check_pole_neighborhood_expansion(&sigma, &PoleCheck { samples: 1000, ..PoleCheck::default() }).unwrap();
        assert!(rep.vacuous);
        assert_eq!(rep.preimages, 0);
        assert_eq!(rep.violations, 0);
        assert!(rep.min_ratio >= 1.0 && rep.inner_disk_ok);
    }
}
