use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NevlabError, Result};

/// `{r_min ≤ |z| ≤ r_max, |arg z − θ_center| ≤ half_width}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnularSector {
    pub r_min: f64,
    pub r_max: f64,
    pub theta_center: f64,
    pub half_width: f64,
}

impl AnnularSector {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r_min >= 0.0
            && self.r_max > self.r_min
            && self.r_max.is_finite()
            && self.half_width > 0.0
            && self.half_width <= PI
            && self.theta_center.is_finite();
        if ok {
            Ok(())
        } else {
            Err(NevlabError::InvalidArgument(format!("bad region {self:?}")))
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        let d = (z.arg() - self.theta_center + PI).rem_euclid(TAU) - PI;
        r >= self.r_min && r <= self.r_max && d.abs() <= self.half_width
    }
}

/// Root-search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootOptions {
    /// Initial samples per box side.
    pub nodes_per_side: usize,
    pub max_depth: usize,
    /// Newton stops once the step is below this relative size.
    pub newton_tol: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self { nodes_per_side: 128, max_depth: 40, newton_tol: 1e-15 }
    }
}

#[derive(Debug, Clone, Copy)]
struct PolarBox {
    r0: f64,
    r1: f64,
    a0: f64,
    a1: f64,
}

impl PolarBox {
    fn point(&self, r: f64, a: f64) -> Complex64 {
        Complex64::from_polar(r, a)
    }

    fn center(&self) -> Complex64 {
        self.point(0.5 * (self.r0 + self.r1), 0.5 * (self.a0 + self.a1))
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        let r = z.norm();
        let mid = 0.5 * (self.a0 + self.a1);
        let a = mid + (z.arg() - mid + PI).rem_euclid(TAU) - PI;
        let span = self.r1.max(1.0);
        r >= self.r0 - slack * span
            && r <= self.r1 + slack * span
            && (r == 0.0 || (a >= self.a0 - slack && a <= self.a1 + slack))
    }

    /// Splits the longer side at an off-centre ratio.
    fn split(&self, ratio: f64) -> (PolarBox, PolarBox) {
        let radial = self.r1 - self.r0;
        let arc = 0.5 * (self.r0 + self.r1) * (self.a1 - self.a0);
        if radial >= arc {
            let m = self.r0 + ratio * radial;
            (PolarBox { r1: m, ..*self }, PolarBox { r0: m, ..*self })
        } else {
            let m = self.a0 + ratio * (self.a1 - self.a0);
            (PolarBox { a1: m, ..*self }, PolarBox { a0: m, ..*self })
        }
    }

    /// Counterclockwise boundary edges as maps from `[0, 1]`.
    fn edges(&self) -> [Box<dyn Fn(f64) -> Complex64 + '_>; 4] {
        [
            Box::new(move |t| self.point(self.r0 + t * (self.r1 - self.r0), self.a0)),
            Box::new(move |t| self.point(self.r1, self.a0 + t * (self.a1 - self.a0))),
            Box::new(move |t| self.point(self.r1 - t * (self.r1 - self.r0), self.a1)),
            Box::new(move |t| self.point(self.r0, self.a1 - t * (self.a1 - self.a0))),
        ]
    }
}

fn phase_step(a: Complex64, b: Complex64) -> f64 {
    (b / a).arg()
}

/// Total change of `arg g` along one edge, bisecting where the phase jumps.
fn edge_phase<G>(g: &G, edge: &dyn Fn(f64) -> Complex64, nodes: usize) -> Result<f64>
where
    G: Fn(Complex64) -> Result<(Complex64, Complex64)>,
{
    let value = |t: f64| -> Result<Complex64> {
        let z = edge(t);
        let v = g(z)?.0;
        if v.norm() == 0.0 || !v.re.is_finite() || !v.im.is_finite() {
            return Err(NevlabError::RootSearch(format!("zero or non-finite value on a box edge at {z}")));
        }
        Ok(v)
    };
    fn refine<V: Fn(f64) -> Result<Complex64>>(
        value: &V,
        t0: f64,
        v0: Complex64,
        t1: f64,
        v1: Complex64,
        depth: usize,
    ) -> Result<f64> {
        let d = phase_step(v0, v1);
        if d.abs() <= PI / 4.0 {
            return Ok(d);
        }
        if depth == 0 {
            return Err(NevlabError::RootSearch(format!("phase unresolved near parameter {t0}")));
        }
        let tm = 0.5 * (t0 + t1);
        let vm = value(tm)?;
        Ok(refine(value, t0, v0, tm, vm, depth - 1)? + refine(value, tm, vm, t1, v1, depth - 1)?)
    }
    let mut total = 0.0;
    let mut t_prev = 0.0;
    let mut v_prev = value(0.0)?;
    for i in 1..=nodes {
        let t = i as f64 / nodes as f64;
        let v = value(t)?;
        total += refine(&value, t_prev, v_prev, t, v, 30)?;
        t_prev = t;
        v_prev = v;
    }
    Ok(total)
}

fn winding<G>(g: &G, b: &PolarBox, nodes: usize) -> Result<i64>
where
    G: Fn(Complex64) -> Result<(Complex64, Complex64)>,
{
    let mut total = 0.0;
    for edge in b.edges().iter() {
        total += edge_phase(g, edge.as_ref(), nodes)?;
    }
    let w = total / TAU;
    let n = w.round();
    if (w - n).abs() > 0.05 {
        return Err(NevlabError::RootSearch(format!("non-integral winding {w:.4} on {b:?}")));
    }
    Ok(n as i64)
}

/// Newton iteration from `start`; `None` if it diverges or stalls.
pub(crate) fn newton<G>(g: &G, start: Complex64, tol: f64, max_iter: usize) -> Result<Option<Complex64>>
where
    G: Fn(Complex64) -> Result<(Complex64, Complex64)>,
{
    let mut z = start;
    let mut small_steps = 0;
    for _ in 0..max_iter {
        let (v, d) = g(z)?;
        if v.norm() == 0.0 {
            return Ok(Some(z));
        }
        if d.norm() == 0.0 || !d.re.is_finite() {
            return Ok(None);
        }
        let step = v / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            return Ok(None);
        }
        z -= step;
        if step.norm() <= tol * z.norm().max(1.0) {
            small_steps += 1;
            if small_steps >= 2 {
                return Ok(Some(z));
            }
        }
    }
    let (v, d) = g(z)?;
    if d.norm() > 0.0 && (v / d).norm() <= 1e-12 * z.norm().max(1.0) {
        Ok(Some(z))
    } else {
        Ok(None)
    }
}

const SPLIT_RATIOS: [f64; 4] = [0.5137, 0.4781, 0.5429, 0.4562];

fn search<G>(g: &G, b: PolarBox, count: i64, depth: usize, opts: &RootOptions) -> Result<Vec<Complex64>>
where
    G: Fn(Complex64) -> Result<(Complex64, Complex64)> + Sync,
{
    if count == 0 {
        return Ok(Vec::new());
    }
    if count < 0 {
        return Err(NevlabError::RootSearch(format!("negative winding {count}: function has poles in {b:?}")));
    }
    if count == 1 {
        if let Some(z) = newton(g, b.center(), opts.newton_tol, 80)? {
            if b.contains(z, 1e-9) {
                return Ok(vec![z]);
            }
        }
    }
    if depth >= opts.max_depth {
        return Err(NevlabError::RootSearch(format!(
            "subdivision depth {depth} reached with {count} zeros left in {b:?}"
        )));
    }
    let mut last_err = None;
    for ratio in SPLIT_RATIOS {
        let (lo, hi) = b.split(ratio);
        let counts = winding(g, &lo, opts.nodes_per_side).and_then(|a| Ok((a, winding(g, &hi, opts.nodes_per_side)?)));
        match counts {
            Ok((ca, cb)) if ca + cb == count => {
                let (ra, rb) = rayon::join(
                    || search(g, lo, ca, depth + 1, opts),
                    || search(g, hi, cb, depth + 1, opts),
                );
                let mut out = ra?;
                out.extend(rb?);
                return Ok(out);
            }
            Ok((ca, cb)) => {
                last_err = Some(NevlabError::RootSearch(format!("child windings {ca}+{cb} ≠ {count}")));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

/// All zeros of an entire `g` inside `region`, by argument-principle
/// subdivision and Newton polish. `g` returns `(g(z), g'(z))` up to a
/// positive real factor that may vary with `z`.
pub fn zeros_in_region<G>(g: &G, region: &AnnularSector, opts: &RootOptions) -> Result<Vec<Complex64>>
where
    G: Fn(Complex64) -> Result<(Complex64, Complex64)> + Sync,
{
    region.validate()?;
    let b = PolarBox {
        r0: region.r_min,
        r1: region.r_max,
        a0: region.theta_center - region.half_width,
        a1: region.theta_center + region.half_width,
    };
    let total = winding(g, &b, 4 * opts.nodes_per_side)?;
    let mut zeros = search(g, b, total, 0, opts)?;
    zeros.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap().then(a.arg().partial_cmp(&b.arg()).unwrap()));
    let before = zeros.len();
    zeros.dedup_by(|a, b| (*a - *b).norm() <= 1e-9 * a.norm().max(1.0));
    if zeros.len() != before || zeros.len() as i64 != total {
        return Err(NevlabError::RootSearch(format!(
            "found {} distinct zeros, argument principle counts {total}",
            zeros.len()
        )));
    }
    Ok(zeros)
}
