//! Schwarzian polynomials, the numerical Schwarzian derivative and critical
//! directions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{NevlabError, Result};

const TAU: f64 = 2.0 * PI;

/// A polynomial `P` with `S(f) = 2P`; coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct SchwarzPolynomial {
    coeffs: Vec<Complex64>,
}

impl TryFrom<Vec<Complex64>> for SchwarzPolynomial {
    type Error = NevlabError;
    fn try_from(v: Vec<Complex64>) -> Result<Self> {
        SchwarzPolynomial::new(v)
    }
}

impl From<SchwarzPolynomial> for Vec<Complex64> {
    fn from(p: SchwarzPolynomial) -> Self {
        p.coeffs
    }
}

impl SchwarzPolynomial {
    /// Trailing zero coefficients are trimmed; the zero polynomial is rejected.
    pub fn new(mut coeffs: Vec<Complex64>) -> Result<Self> {
        while coeffs.last().is_some_and(|c| c.norm() == 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(NevlabError::InvalidArgument(
                "Schwarz polynomial must have a nonzero leading coefficient".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(NevlabError::InvalidArgument("non-finite polynomial coefficient".into()));
        }
        Ok(SchwarzPolynomial { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    /// Number of asymptotic values, `m + 2`.
    pub fn n_asymptotic(&self) -> usize {
        self.degree() + 2
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `(P, P', P'')` at `z`.
    pub fn eval_with_derivatives(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (mut p, mut dp, mut ddp) = (zero, zero, zero);
        for &c in self.coeffs.iter().rev() {
            ddp = ddp * z + 2.0 * dp;
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp, ddp)
    }

    /// Coefficients of `t ↦ P(center + t)`, ascending.
    pub fn shifted(&self, center: Complex64) -> Vec<Complex64> {
        // repeated synthetic division
        let mut work = self.coeffs.clone();
        let n = work.len();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            for i in (k + 1..n).rev() {
                let hi = work[i];
                work[i - 1] += hi * center;
            }
            out.push(work[k]);
            // after one pass work[k] holds the k-th Taylor coefficient; the
            // remaining entries are the quotient for the next pass
        }
        out
    }

    /// Cauchy bound: every zero of `P` lies in `|z| < 1 + max |c_i / a|`.
    /// A constant has no zeros and gets 0.
    pub fn root_bound(&self) -> f64 {
        if self.degree() == 0 {
            return 0.0;
        }
        let a = self.leading();
        1.0 + self.coeffs[..self.degree()]
            .iter()
            .map(|c| (c / a).norm())
            .fold(0.0, f64::max)
    }
}

/// The `N` critical directions of a Nevanlinna function with Schwarzian `2P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalFrame {
    pub angles: Vec<f64>,
    pub ray_base_radius: f64,
}

impl CriticalFrame {
    pub fn n(&self) -> usize {
        self.angles.len()
    }

    /// Index of the critical direction closest to `arg z`.
    pub fn nearest(&self, z: Complex64) -> usize {
        let arg = canonical_angle(z.arg());
        (0..self.n())
            .min_by(|&i, &j| {
                angle_gap(arg, self.angles[i])
                    .partial_cmp(&angle_gap(arg, self.angles[j]))
                    .unwrap()
            })
            .unwrap()
    }

    /// Centre angle of the tract between directions `t` and `t+1`.
    pub fn tract_center(&self, t: usize) -> f64 {
        canonical_angle(self.angles[t % self.n()] + PI / self.n() as f64)
    }
}

/// Angle reduced to `[0, 2π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Unsigned angular distance on the circle.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Solves `arg a + Nθ ≡ 0 (mod 2π)`; angles ascending in `[0, 2π)`.
pub fn critical_directions(p: &SchwarzPolynomial) -> CriticalFrame {
    let n = p.n_asymptotic();
    let arg_a = p.leading().arg();
    let mut angles: Vec<f64> = (0..n)
        .map(|k| canonical_angle((-arg_a + TAU * k as f64) / n as f64))
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    CriticalFrame { angles, ray_base_radius: p.root_bound() + 1.0 }
}

/// Base finite-difference step for a function varying on length `scale`.
///
/// Fourth-order stencils followed by one Richardson step behave like a
/// sixth-order rule for the third derivative; balancing `h⁶` against
/// `ε/h³` puts the optimum near `ε^{1/9}`.
pub fn default_step(scale: f64) -> f64 {
    f64::EPSILON.powf(1.0 / 9.0) * scale
}

/// First three derivatives by fourth-order central stencils along the real
/// direction, refined by one Richardson step (`h`, `h/2`).
pub fn derivatives3<F>(f: &F, z: Complex64, h: f64) -> [Complex64; 4]
where
    F: Fn(Complex64) -> Complex64 + ?Sized,
{
    let stencil = |h: f64| {
        let at = |k: f64| f(z + Complex64::new(k * h, 0.0));
        let (m3, m2, m1, f0, p1, p2, p3) = (at(-3.0), at(-2.0), at(-1.0), f(z), at(1.0), at(2.0), at(3.0));
        let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        let d2 = (-m2 + 16.0 * m1 - 30.0 * f0 + 16.0 * p1 - p2) / (12.0 * h * h);
        let d3 = (-p3 + 8.0 * p2 - 13.0 * p1 + 13.0 * m1 - 8.0 * m2 + m3) / (8.0 * h * h * h);
        (f0, d1, d2, d3)
    };
    let (f0, a1, a2, a3) = stencil(h);
    let (_, b1, b2, b3) = stencil(h / 2.0);
    let rich = |coarse: Complex64, fine: Complex64| fine + (fine - coarse) / 15.0;
    [f0, rich(a1, b1), rich(a2, b2), rich(a3, b3)]
}

fn schwarzian_from(d: &[Complex64; 4], z: Complex64, h: f64) -> Result<Complex64> {
    let scale = d[0].norm().max(d[1].norm() * h).max(f64::MIN_POSITIVE);
    if d[1].norm() * h <= 1e-12 * scale || !d[1].norm().is_finite() {
        return Err(NevlabError::NearCritical { z, derivative: d[1].norm() });
    }
    let q = d[2] / d[1];
    Ok(d[3] / d[1] - 1.5 * q * q)
}

/// `S(f) = (f''/f')' − ½(f''/f')² = f'''/f' − (3/2)(f''/f')²`, numerically.
pub fn schwarzian_numeric<F>(f: &F, z: Complex64, h: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64 + ?Sized,
{
    if !(h > 0.0) {
        return Err(NevlabError::InvalidArgument(format!("step must be positive, got {h}")));
    }
    schwarzian_from(&derivatives3(f, z, h), z, h)
}

/// `|S(f∘g)(z) − S(f)(g(z))·g'(z)² − S(g)(z)|`.
pub fn chain_rule_residual<F, G>(f: &F, g: &G, z: Complex64, h: f64) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64 + ?Sized,
    G: Fn(Complex64) -> Complex64 + ?Sized,
{
    let fg = |w: Complex64| f(g(w));
    let s_fg = schwarzian_numeric(&fg, z, h)?;
    let dg = derivatives3(g, z, h);
    let s_g = schwarzian_from(&dg, z, h)?;
    let s_f = schwarzian_numeric(f, dg[0], h)?;
    Ok((s_fg - s_f * dg[1] * dg[1] - s_g).norm())
}
