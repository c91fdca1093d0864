//! Concrete Nevanlinna functions and their pole, residue and preimage data.

mod fit;
mod records;
mod roots;

pub use fit::{fit_power_law, AsymptoticFit, FitWindow};
pub use records::{
    poles_in_region, preimage_residue_contour, preimages_in_region, records_to_csv, residue_at,
    residue_contour, PoleRecord, PreimageRecord,
};
pub use roots::{zeros_in_region, AnnularSector, RootOptions};
pub(crate) use roots::newton;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NevlabError, Result};
use crate::ode::{
    subdominant_solution, FieldConfig, FundamentalPairState, IntegratorOptions, LiouvilleFrame, LocalGerm, Principal,
    ScaledSolution, SolutionField,
};
use crate::schwarzian::{critical_directions, CriticalFrame, SchwarzPolynomial};
use crate::sphere::{chordal_distance, SpherePoint};

/// Which pair of solutions an instance is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisConvention {
    /// `(e^z, e^{-z})`, solutions of `w'' − w = 0`.
    RealExponential,
    /// Principal solutions of sector 0, Wronskian `−2i`; reduces to
    /// `(e^{iz}, e^{-iz})` up to constant phases when `P = 1`.
    PrincipalSectorZero,
    /// Caller-supplied data at a base point.
    Explicit,
}

/// Serializable description of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DescriptorSpec {
    ClosedFormTwoAv {
        lambda: Complex64,
        mu: Complex64,
    },
    OdeBacked {
        polynomial: SchwarzPolynomial,
        /// `[A, B, C, D]` in `f = (A w1 + B w2)/(C w1 + D w2)`.
        coefficients: [Complex64; 4],
        /// Base data; `None` selects the principal pair of sector 0.
        #[serde(default)]
        base: Option<FundamentalPairState>,
    },
}

#[derive(Debug, Clone)]
enum Family {
    TwoAv { lambda: Complex64, mu: Complex64 },
    Ode { coeffs: [Complex64; 4], field: Arc<SolutionField> },
}

/// A Nevanlinna function ready for evaluation.
#[derive(Debug, Clone)]
pub struct FunctionDescriptor {
    spec: DescriptorSpec,
    family: Family,
    polynomial: SchwarzPolynomial,
    frame: CriticalFrame,
    convention: BasisConvention,
}

/// Numerator, denominator and their derivatives, all multiplied by one
/// common nonzero factor. The factor is a positive real number wherever
/// winding numbers are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientParts {
    pub num: Complex64,
    pub den: Complex64,
    pub dnum: Complex64,
    pub dden: Complex64,
}

impl QuotientParts {
    pub fn value(&self) -> SpherePoint {
        if self.den == Complex64::new(0.0, 0.0) {
            SpherePoint::Infinity
        } else {
            SpherePoint::from_complex(self.num / self.den).unwrap_or(SpherePoint::Infinity)
        }
    }

    /// `f'`, or `None` at a pole.
    pub fn derivative(&self) -> Option<Complex64> {
        if self.den == Complex64::new(0.0, 0.0) {
            return None;
        }
        let d = (self.dnum * self.den - self.num * self.dden) / (self.den * self.den);
        if d.re.is_finite() && d.im.is_finite() {
            Some(d)
        } else {
            None
        }
    }
}

/// `f'` at a point, with an explicit marker at poles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DerivativeValue {
    Finite(Complex64),
    Infinite,
}

impl DerivativeValue {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            DerivativeValue::Finite(d) => Some(d),
            DerivativeValue::Infinite => None,
        }
    }
}

/// An asymptotic value and the tract where it is attained. Tract `t` lies
/// between critical directions `θ_t` and `θ_{t+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticValue {
    pub value: SpherePoint,
    pub tract: usize,
    /// Chordal gap between the coefficient ratio and the last ray sample.
    pub ray_check: f64,
}

/// Complex `expm1` without cancellation near 0.
pub fn expm1_complex(z: Complex64) -> Complex64 {
    let s = (0.5 * z.im).sin();
    let em = z.re.exp_m1();
    Complex64::new(em * z.im.cos() - 2.0 * s * s, (em + 1.0) * z.im.sin())
}

fn two_av_parts(lambda: Complex64, mu: Complex64, z: Complex64) -> QuotientParts {
    // Everything is divided by e^{|Re z|}; near the poles e^{2z} = 1 the
    // differences go through expm1.
    let phase = Complex64::from_polar(1.0, if z.re >= 0.0 { z.im } else { -z.im });
    if z.re >= 0.0 {
        let m = expm1_complex(-2.0 * z);
        let e = m + 1.0;
        QuotientParts {
            num: phase * ((lambda - mu) - mu * m),
            den: -phase * m,
            dnum: phase * (lambda + mu * e),
            dden: phase * (1.0 + e),
        }
    } else {
        let m = expm1_complex(2.0 * z);
        let e = m + 1.0;
        QuotientParts {
            num: phase * ((lambda - mu) + lambda * m),
            den: phase * m,
            dnum: phase * (lambda * e + mu),
            dden: phase * (e + 1.0),
        }
    }
}

fn ode_parts(coeffs: &[Complex64; 4], s: &FundamentalPairState) -> QuotientParts {
    let [a, b, c, d] = *coeffs;
    QuotientParts {
        num: a * s.w1 + b * s.w2,
        den: c * s.w1 + d * s.w2,
        dnum: a * s.dw1 + b * s.dw2,
        dden: c * s.dw1 + d * s.dw2,
    }
}

/// Local representation around a point: closed forms are global, ODE
/// instances use one Taylor germ so that nearby values are mutually smooth.
#[derive(Debug, Clone)]
pub enum LocalView {
    TwoAv { lambda: Complex64, mu: Complex64 },
    Germ { coeffs: [Complex64; 4], germ: LocalGerm },
}

impl LocalView {
    pub fn parts(&self, z: Complex64) -> QuotientParts {
        match self {
            LocalView::TwoAv { lambda, mu } => two_av_parts(*lambda, *mu, z),
            LocalView::Germ { coeffs, germ } => ode_parts(coeffs, &germ.state(z)),
        }
    }

    pub fn value(&self, z: Complex64) -> SpherePoint {
        self.parts(z).value()
    }
}

fn origin_of(s: &ScaledSolution) -> (Complex64, Complex64) {
    let k = s.log_scale.exp();
    (s.w * k, s.dw * k)
}

/// Subdominant solution of tract `t` at the origin (scale arbitrary).
fn tract_solution(p: &SchwarzPolynomial, tract: usize, opts: &IntegratorOptions) -> Result<ScaledSolution> {
    let frame = LiouvilleFrame::new(p, tract)?;
    subdominant_solution(&frame, Principal::First, Complex64::new(0.0, 0.0), 40.0, opts)
}

impl FunctionDescriptor {
    /// `f = (λe^z − μe^{−z})/(e^z − e^{−z})`.
    pub fn two_av(lambda: Complex64, mu: Complex64) -> Result<Self> {
        Self::from_spec(DescriptorSpec::ClosedFormTwoAv { lambda, mu })
    }

    /// `f = (A w1 + B w2)/(C w1 + D w2)` in the principal basis of sector 0.
    pub fn ode_principal(p: &SchwarzPolynomial, coefficients: [Complex64; 4]) -> Result<Self> {
        Self::from_spec(DescriptorSpec::OdeBacked { polynomial: p.clone(), coefficients, base: None })
    }

    /// `f = (A w1 + B w2)/(C w1 + D w2)` with explicit base data.
    pub fn ode_backed(p: &SchwarzPolynomial, coefficients: [Complex64; 4], base: FundamentalPairState) -> Result<Self> {
        Self::from_spec(DescriptorSpec::OdeBacked { polynomial: p.clone(), coefficients, base: Some(base) })
    }

    pub fn from_spec(spec: DescriptorSpec) -> Result<Self> {
        Self::from_spec_with(spec, FieldConfig::default())
    }

    pub fn from_spec_with(spec: DescriptorSpec, config: FieldConfig) -> Result<Self> {
        match &spec {
            DescriptorSpec::ClosedFormTwoAv { lambda, mu } => {
                if !(lambda.re.is_finite() && lambda.im.is_finite() && mu.re.is_finite() && mu.im.is_finite()) {
                    return Err(NevlabError::InvalidArgument("asymptotic values must be finite".into()));
                }
                if lambda == mu {
                    return Err(NevlabError::InvalidArgument("λ = μ gives a constant function".into()));
                }
                let polynomial = SchwarzPolynomial::from_real(&[-1.0])?;
                let frame = critical_directions(&polynomial);
                Ok(Self {
                    family: Family::TwoAv { lambda: *lambda, mu: *mu },
                    spec,
                    polynomial,
                    frame,
                    convention: BasisConvention::RealExponential,
                })
            }
            DescriptorSpec::OdeBacked { polynomial, coefficients, base } => {
                let [a, b, c, d] = *coefficients;
                let det = a * d - b * c;
                let scale = coefficients.iter().map(|v| v.norm()).fold(0.0, f64::max);
                if !(det.norm() > 1e-14 * scale * scale) {
                    return Err(NevlabError::DegenerateMobius { det: det.norm() });
                }
                let (origin, convention) = match base {
                    Some(b) => (*b, BasisConvention::Explicit),
                    None => (principal_origin(polynomial, &config.integrator)?, BasisConvention::PrincipalSectorZero),
                };
                let field = SolutionField::new(polynomial, &origin, config)?;
                Ok(Self {
                    family: Family::Ode { coeffs: *coefficients, field: Arc::new(field) },
                    frame: critical_directions(polynomial),
                    polynomial: polynomial.clone(),
                    convention,
                    spec,
                })
            }
        }
    }

    pub fn spec(&self) -> &DescriptorSpec {
        &self.spec
    }

    pub fn convention(&self) -> BasisConvention {
        self.convention
    }

    /// `P` with `S(f) = 2P`.
    pub fn polynomial(&self) -> &SchwarzPolynomial {
        &self.polynomial
    }

    pub fn frame(&self) -> &CriticalFrame {
        &self.frame
    }

    pub fn n_asymptotic(&self) -> usize {
        self.frame.n()
    }

    /// `(λ, μ)` of the closed-form family.
    pub fn two_av_values(&self) -> Option<(Complex64, Complex64)> {
        match self.family {
            Family::TwoAv { lambda, mu } => Some((lambda, mu)),
            Family::Ode { .. } => None,
        }
    }

    pub fn field(&self) -> Option<&SolutionField> {
        match &self.family {
            Family::Ode { field, .. } => Some(field),
            Family::TwoAv { .. } => None,
        }
    }

    pub fn parts(&self, z: Complex64) -> Result<QuotientParts> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(NevlabError::EssentialSingularity);
        }
        match &self.family {
            Family::TwoAv { lambda, mu } => Ok(two_av_parts(*lambda, *mu, z)),
            Family::Ode { coeffs, field } => Ok(ode_parts(coeffs, &field.state_at(z)?)),
        }
    }

    pub fn local(&self, z: Complex64) -> Result<LocalView> {
        match &self.family {
            Family::TwoAv { lambda, mu } => Ok(LocalView::TwoAv { lambda: *lambda, mu: *mu }),
            Family::Ode { coeffs, field } => Ok(LocalView::Germ { coeffs: *coeffs, germ: field.germ(z)? }),
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<SpherePoint> {
        Ok(self.parts(z)?.value())
    }

    /// Independent route: the unscaled display for the closed form, direct
    /// integration from the origin for ODE instances.
    pub fn evaluate_direct(&self, z: Complex64) -> Result<SpherePoint> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(NevlabError::EssentialSingularity);
        }
        match &self.family {
            Family::TwoAv { lambda, mu } => {
                let (ep, em) = (z.exp(), (-z).exp());
                let den = ep - em;
                if den == Complex64::new(0.0, 0.0) {
                    return Ok(SpherePoint::Infinity);
                }
                SpherePoint::from_complex((lambda * ep - mu * em) / den)
                    .ok_or_else(|| NevlabError::InvalidArgument(format!("overflow evaluating at {z}")))
            }
            Family::Ode { coeffs, field } => Ok(ode_parts(coeffs, &field.state_direct(z)?).value()),
        }
    }

    /// Asymptotic value of each tract.
    ///
    /// For ODE instances the value is `W(s_t, Num)/W(s_t, Den)` with `s_t`
    /// the solution decaying in tract `t`; it is then confirmed along the
    /// mid-tract ray.
    pub fn asymptotic_values(&self) -> Result<Vec<AsymptoticValue>> {
        match &self.family {
            Family::TwoAv { lambda, mu } => {
                // Tract 0 lies between π/2 and 3π/2.
                let far = 1e4;
                let right = self.eval(Complex64::new(far, 0.3))?;
                let left = self.eval(Complex64::new(-far, 0.3))?;
                Ok(vec![
                    AsymptoticValue {
                        value: SpherePoint::Finite(*lambda),
                        tract: 1,
                        ray_check: chordal_distance(right, SpherePoint::Finite(*lambda)),
                    },
                    AsymptoticValue {
                        value: SpherePoint::Finite(*mu),
                        tract: 0,
                        ray_check: chordal_distance(left, SpherePoint::Finite(*mu)),
                    },
                ])
            }
            Family::Ode { field, .. } => {
                let n = self.frame.n();
                let mut out = Vec::with_capacity(n);
                for t in 0..n {
                    let s = tract_solution(&self.polynomial, t, &field.config().integrator)?;
                    let value = self.tract_limit(&s)?;
                    let angle = self.frame.tract_center(t);
                    let sampled = self.ray_limit(angle)?;
                    out.push(AsymptoticValue { value, tract: t, ray_check: chordal_distance(value, sampled) });
                }
                Ok(out)
            }
        }
    }

    fn origin_parts(&self) -> Option<QuotientParts> {
        match &self.family {
            Family::Ode { coeffs, field } => Some(ode_parts(coeffs, field.origin())),
            Family::TwoAv { .. } => None,
        }
    }

    /// `W(s, Num)/W(s, Den)` at the origin.
    fn tract_limit(&self, s: &ScaledSolution) -> Result<SpherePoint> {
        let parts = self.origin_parts().ok_or_else(|| NevlabError::InvalidArgument("closed-form instance".into()))?;
        let (w, dw) = (s.w, s.dw);
        let wn = w * parts.dnum - parts.num * dw;
        let wd = w * parts.dden - parts.den * dw;
        if wd.norm() <= 1e-10 * (wn.norm() + wd.norm()) {
            return Ok(SpherePoint::Infinity);
        }
        Ok(SpherePoint::Finite(wn / wd))
    }

    /// Follows the ray at `angle` until successive values agree to 1e−8.
    fn ray_limit(&self, angle: f64) -> Result<SpherePoint> {
        let mut r = 1.0;
        let mut prev = self.eval(Complex64::from_polar(r, angle))?;
        while r < 1e3 {
            r *= 2.0_f64.sqrt();
            let next = self.eval(Complex64::from_polar(r, angle))?;
            if chordal_distance(prev, next) < 1e-8 {
                return Ok(next);
            }
            prev = next;
        }
        Err(NevlabError::AsymptoticValueNotConverged { angle, radius: r })
    }

    /// `(a/c, b/d)` of the pole formula at critical ray `k`: the asymptotic
    /// values of the tracts clockwise and counterclockwise of `θ_k`.
    pub fn pole_coefficient_ratios(&self, k: usize) -> Result<(SpherePoint, SpherePoint)> {
        let n = self.frame.n();
        let values = self.asymptotic_values()?;
        let find = |t: usize| values.iter().find(|v| v.tract == t).map(|v| v.value).unwrap();
        Ok((find((k + n - 1) % n), find(k % n)))
    }
}

/// Principal pair of sector 0 at the origin, scaled to Wronskian `−2i`.
fn principal_origin(p: &SchwarzPolynomial, opts: &IntegratorOptions) -> Result<FundamentalPairState> {
    let frame = LiouvilleFrame::new(p, 0)?;
    let zero = Complex64::new(0.0, 0.0);
    let s1 = subdominant_solution(&frame, Principal::First, zero, 40.0, opts)?;
    let s2 = subdominant_solution(&frame, Principal::Second, zero, 40.0, opts)?;
    let (w1, dw1) = origin_of(&s1);
    let (w2, dw2) = origin_of(&s2);
    let w = w1 * dw2 - w2 * dw1;
    if !(w.norm() > 0.0 && w.re.is_finite() && w.im.is_finite()) {
        return Err(NevlabError::InvalidArgument("principal pair is degenerate at the origin".into()));
    }
    let k = (Complex64::new(0.0, -2.0) / w).sqrt();
    Ok(FundamentalPairState::new(zero, w1 * k, dw1 * k, w2 * k, dw2 * k))
}

impl Serialize for FunctionDescriptor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FunctionDescriptor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = DescriptorSpec::deserialize(d)?;
        FunctionDescriptor::from_spec(spec).map_err(serde::de::Error::custom)
    }
}

/// `f(z)`; ∞ is rejected as the essential singularity.
pub fn evaluate(f: &FunctionDescriptor, z: SpherePoint) -> Result<SpherePoint> {
    match z {
        SpherePoint::Infinity => Err(NevlabError::EssentialSingularity),
        SpherePoint::Finite(z) => f.eval(z),
    }
}

/// `f'(z)`, or the infinite marker at a pole.
pub fn derivative(f: &FunctionDescriptor, z: Complex64) -> Result<DerivativeValue> {
    Ok(match f.parts(z)?.derivative() {
        Some(d) => DerivativeValue::Finite(d),
        None => DerivativeValue::Infinite,
    })
}

/// Asymptotic values with their tracts.
pub fn asymptotic_values(f: &FunctionDescriptor) -> Result<Vec<AsymptoticValue>> {
    f.asymptotic_values()
}

/// Half-width of the default search sector around a critical ray.
pub fn default_half_width(n: usize) -> f64 {
    (PI / n as f64).min(1.0) * 0.9
}
