//! Riemann-sphere primitives: points with an explicit ∞, the chordal metric,
//! Möbius maps, area-uniform sampling and the Koebe distortion constant.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{NevlabError, Result};

/// A point of the extended complex plane.
///
/// ∞ is a single variant, never an IEEE infinity, so code that meets a pole
/// has to branch on it explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    /// Builds a point from a complex value; non-finite magnitudes collapse to ∞.
    ///
    /// NaN components are rejected with `None`.
    pub fn from_complex(z: Complex64) -> Option<Self> {
        if z.re.is_nan() || z.im.is_nan() {
            None
        } else if z.re.is_infinite() || z.im.is_infinite() {
            Some(SpherePoint::Infinity)
        } else {
            Some(SpherePoint::Finite(z))
        }
    }

    pub fn finite(re: f64, im: f64) -> Self {
        SpherePoint::Finite(Complex64::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn as_finite(&self) -> Option<Complex64> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::from_complex(z).expect("NaN component in sphere point")
    }
}

/// Chordal distance on the unit sphere, `2|p−q| / (√(1+|p|²)√(1+|q|²))`.
pub fn chordal_distance(p: SpherePoint, q: SpherePoint) -> f64 {
    match (p, q) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        (SpherePoint::Finite(z), SpherePoint::Infinity)
        | (SpherePoint::Infinity, SpherePoint::Finite(z)) => 2.0 / (1.0 + z.norm_sqr()).sqrt(),
        (SpherePoint::Finite(a), SpherePoint::Finite(b)) => {
            let d = 2.0 * (a - b).norm()
                / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt());
            d.min(2.0)
        }
    }
}

/// `z ↦ (az+b)/(cz+d)` with nonzero determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl MobiusMap {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        let scale = (a.norm() * d.norm()).max(b.norm() * c.norm());
        if !(det.norm() > 1e-14 * scale) || scale == 0.0 {
            return Err(NevlabError::DegenerateMobius { det: det.norm() });
        }
        Ok(MobiusMap { a, b, c, d })
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        MobiusMap { a: one, b: zero, c: zero, d: one }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn apply(&self, z: SpherePoint) -> SpherePoint {
        mobius_apply(self, z)
    }

    /// Applies the map to a finite complex number, for use inside evaluable closures.
    pub fn apply_complex(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }
}

pub fn mobius_apply(m: &MobiusMap, z: SpherePoint) -> SpherePoint {
    match z {
        SpherePoint::Infinity => {
            if m.c == Complex64::new(0.0, 0.0) {
                SpherePoint::Infinity
            } else {
                SpherePoint::Finite(m.a / m.c)
            }
        }
        SpherePoint::Finite(w) => {
            let den = m.c * w + m.d;
            if den == Complex64::new(0.0, 0.0) {
                SpherePoint::Infinity
            } else {
                SpherePoint::from_complex((m.a * w + m.b) / den).unwrap_or(SpherePoint::Infinity)
            }
        }
    }
}

/// Koebe distortion constant `T(η) = (1+η)⁴/(1−η)⁴`.
pub fn koebe_bound(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(NevlabError::InvalidArgument(format!(
            "koebe_bound needs 0 ≤ η < 1, got {eta}"
        )));
    }
    Ok(((1.0 + eta) / (1.0 - eta)).powi(4))
}

/// Deterministic generator for substream `stream` of `seed`.
///
/// Workers index their streams by worker or sample number, so results do not
/// depend on how work is scheduled.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one point from the normalized spherical area measure.
///
/// The measure of `{|z| ≤ r}` is `r²/(1+r²)`, so inverting it gives the radius.
pub fn sample_sphere_point<R: Rng + ?Sized>(rng: &mut R) -> SpherePoint {
    let u: f64 = rng.random();
    let angle = 2.0 * PI * rng.random::<f64>();
    if u >= 1.0 {
        return SpherePoint::Infinity;
    }
    let r = (u / (1.0 - u)).sqrt();
    SpherePoint::Finite(Complex64::from_polar(r, angle))
}

pub fn sample_sphere_uniform<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Result<Vec<SpherePoint>> {
    if count == 0 {
        return Err(NevlabError::InvalidArgument("sample count must be ≥ 1".into()));
    }
    Ok((0..count).map(|_| sample_sphere_point(rng)).collect())
}

/// Spherical measure of `{|z| > r}`.
pub fn spherical_measure_outside(r: f64) -> f64 {
    1.0 / (1.0 + r * r)
}
