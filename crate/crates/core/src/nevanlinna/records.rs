use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::roots::{zeros_in_region, AnnularSector, RootOptions};
use super::{DerivativeValue, FunctionDescriptor, LocalView};
use crate::error::{NevlabError, Result};
use crate::schwarzian::angle_gap;
use crate::sphere::SpherePoint;

/// A pole `s` with residue `r` near critical ray `sector`.
///
/// `j` ranks poles by modulus within the searched region, counting from 1;
/// poles on the far side of the origin from `θ_k` get negative indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleRecord {
    pub j: i64,
    pub s: Complex64,
    pub r: Complex64,
    pub sector: usize,
    /// `|den/den'|` at `s` after refinement.
    pub residual: f64,
}

/// A solution `p` of `f(p) = target` with `f'(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreimageRecord {
    pub j: i64,
    pub p: Complex64,
    pub derivative: DerivativeValue,
    pub target: SpherePoint,
    pub sector: usize,
}

fn sector_of(f: &FunctionDescriptor, region: &AnnularSector) -> usize {
    f.frame().nearest(Complex64::from_polar(1.0, region.theta_center))
}

/// Signed ranks: `+` on the `θ_k` side of the origin, `−` opposite.
fn signed_ranks(points: &[Complex64], theta: f64) -> Vec<i64> {
    let mut pos = 0;
    let mut neg = 0;
    points
        .iter()
        .map(|z| {
            if angle_gap(z.arg(), theta) <= PI / 2.0 {
                pos += 1;
                pos
            } else {
                neg += 1;
                -neg
            }
        })
        .collect()
}

/// Zeros of `Num − z₀·Den` (or of `Den` for `z₀ = ∞`) in the region.
fn target_zeros(f: &FunctionDescriptor, target: SpherePoint, region: &AnnularSector) -> Result<Vec<Complex64>> {
    let g = |z: Complex64| -> Result<(Complex64, Complex64)> {
        let q = f.parts(z)?;
        Ok(match target {
            SpherePoint::Infinity => (q.den, q.dden),
            SpherePoint::Finite(w) => (q.num - w * q.den, q.dnum - w * q.dden),
        })
    };
    zeros_in_region(&g, region, &RootOptions::default())
}

/// Poles of `f` in an annular sector, sorted by modulus.
pub fn poles_in_region(f: &FunctionDescriptor, region: &AnnularSector) -> Result<Vec<PoleRecord>> {
    let zeros = target_zeros(f, SpherePoint::Infinity, region)?;
    let sector = sector_of(f, region);
    let theta = f.frame().angles[sector];
    let ranks = signed_ranks(&zeros, theta);
    zeros
        .iter()
        .zip(ranks)
        .map(|(&s, j)| {
            let q = f.parts(s)?;
            let residual = (q.den / q.dden).norm();
            if !(residual <= 1e-10 * s.norm().max(1.0)) {
                return Err(NevlabError::RootSearch(format!("pole at {s} refined only to {residual:e}")));
            }
            Ok(PoleRecord { j, s, r: q.num / q.dden, sector, residual })
        })
        .collect()
}

/// Residue at a simple pole by `Num(s)/Den'(s)`.
pub fn residue_at(f: &FunctionDescriptor, s: Complex64) -> Result<Complex64> {
    let q = f.parts(s)?;
    let step = (q.den / q.dden).norm();
    if !(step <= 1e-8 * s.norm().max(1.0)) {
        return Err(NevlabError::InvalidArgument(format!("{s} is not a refined pole (|den/den'| = {step:e})")));
    }
    Ok(q.num / q.dden)
}

/// Circle radius: a quarter of the local zero spacing `π/|P|^{1/2}`, capped at 0.1.
fn contour_radius(f: &FunctionDescriptor, s: Complex64) -> f64 {
    let k = f.polynomial().eval(s).norm().sqrt().max(1e-3);
    (0.25 * PI / k).min(0.1)
}

const CONTOUR_NODES: usize = 64;

/// Winding of `den` and the trapezoid sum of `h` on the circle `|z − s| = ρ`.
fn circle_integral<H, D>(s: Complex64, rho: f64, h: H, den: D) -> Result<Complex64>
where
    H: Fn(Complex64) -> Complex64,
    D: Fn(Complex64) -> Complex64,
{
    let mut sum = Complex64::new(0.0, 0.0);
    let mut phase = 0.0;
    let mut prev = den(s + rho);
    for k in 0..CONTOUR_NODES {
        let e = Complex64::from_polar(1.0, TAU * k as f64 / CONTOUR_NODES as f64);
        let z = s + rho * e;
        sum += h(z) * e;
        let next_e = Complex64::from_polar(1.0, TAU * (k + 1) as f64 / CONTOUR_NODES as f64);
        let next = den(s + rho * next_e);
        phase += (next / prev).arg();
        prev = next;
    }
    let count = (phase / TAU).round() as i64;
    if count != 1 {
        return Err(NevlabError::ContourNotSimple { center: s, count });
    }
    Ok(sum * (rho / CONTOUR_NODES as f64))
}

/// Residue at `s` by a 64-node trapezoid rule on a small circle. The circle
/// must enclose exactly one zero of the denominator.
pub fn residue_contour(f: &FunctionDescriptor, s: Complex64) -> Result<Complex64> {
    let view: LocalView = f.local(s)?;
    let rho = contour_radius(f, s);
    circle_integral(
        s,
        rho,
        |z| {
            let q = view.parts(z);
            q.num / q.den
        },
        |z| view.parts(z).den,
    )
}

/// Residue of `1/(f − z₀)` at a preimage `p`, by the same contour rule.
pub fn preimage_residue_contour(f: &FunctionDescriptor, target: Complex64, p: Complex64) -> Result<Complex64> {
    let view = f.local(p)?;
    let rho = contour_radius(f, p);
    circle_integral(
        p,
        rho,
        |z| {
            let q = view.parts(z);
            q.den / (q.num - target * q.den)
        },
        |z| {
            let q = view.parts(z);
            q.num - target * q.den
        },
    )
}

/// Solutions of `f(z) = z₀` in the region with `f'` at each.
pub fn preimages_in_region(
    f: &FunctionDescriptor,
    target: SpherePoint,
    region: &AnnularSector,
) -> Result<Vec<PreimageRecord>> {
    let zeros = target_zeros(f, target, region)?;
    let sector = sector_of(f, region);
    let ranks = signed_ranks(&zeros, f.frame().angles[sector]);
    zeros
        .iter()
        .zip(ranks)
        .map(|(&p, j)| {
            let q = f.parts(p)?;
            let derivative = match target {
                SpherePoint::Infinity => DerivativeValue::Infinite,
                SpherePoint::Finite(w) => {
                    let value = q.num / q.den;
                    if (value - w).norm() > 1e-9 * (1.0 + w.norm()) {
                        return Err(NevlabError::RootSearch(format!("preimage {p} gives f = {value}")));
                    }
                    q.derivative().map(DerivativeValue::Finite).unwrap_or(DerivativeValue::Infinite)
                }
            };
            Ok(PreimageRecord { j, p, derivative, target, sector })
        })
        .collect()
}

fn write_rows<W: Write>(out: W, rows: impl Iterator<Item = (i64, Complex64, Complex64)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| NevlabError::InvalidArgument(format!("csv: {e}"));
    w.write_record(["j", "re_s", "im_s", "re_r", "im_r", "abs_s", "abs_r"]).map_err(io)?;
    for (j, s, r) in rows {
        w.write_record([
            j.to_string(),
            s.re.to_string(),
            s.im.to_string(),
            r.re.to_string(),
            r.im.to_string(),
            s.norm().to_string(),
            r.norm().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| NevlabError::InvalidArgument(format!("csv: {e}")))
}

/// CSV table of poles (`s`, `r`) or preimages (`p`, `f'(p)`; zero when infinite).
pub fn records_to_csv<W: Write>(out: W, poles: &[PoleRecord], preimages: &[PreimageRecord]) -> Result<()> {
    let zero = Complex64::new(0.0, 0.0);
    let rows = poles.iter().map(|p| (p.j, p.s, p.r)).chain(
        preimages.iter().map(|p| (p.j, p.p, p.derivative.finite().unwrap_or(zero))),
    );
    write_rows(out, rows)
}
