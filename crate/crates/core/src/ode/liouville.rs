use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{integrate_pair, FundamentalPairState, IntegratorOptions};
use crate::error::{NevlabError, Result};
use crate::schwarzian::{angle_gap, critical_directions, SchwarzPolynomial};

/// Default lower bound on `|Z|` for the principal asymptotics.
pub const DEFAULT_R_PRIME: f64 = 20.0;

const GL_ORDER: usize = 16;

pub(crate) fn gl_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let rule = GaussLegendre::new(GL_ORDER.try_into().unwrap());
        let mut pairs = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs
    })
}

/// Sector frame for the Liouville coordinate `Z = ∫ P^{1/2}` based at
/// `R₀ e^{iθ_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleFrame {
    p: SchwarzPolynomial,
    sector: usize,
    theta: f64,
    n: usize,
    base_radius: f64,
    margin: f64,
    root4_base: Complex64,
}

/// Value of the frame at a point: `Z`, the tracked `P^{1/2}` and `P^{1/4}`,
/// and the sign of the tracked square root against the principal one at
/// each path vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleValue {
    pub z_coord: Complex64,
    pub sqrt_p: Complex64,
    pub root4: Complex64,
    pub certificate: Vec<(Complex64, i8)>,
}

fn nearest_root4(prev: Complex64, candidate: Complex64) -> Complex64 {
    let mut best = candidate;
    let mut rot = candidate;
    for _ in 0..3 {
        rot *= Complex64::i();
        if (rot - prev).norm() < (best - prev).norm() {
            best = rot;
        }
    }
    best
}

fn branch_sign(sqrt_p: Complex64, p_val: Complex64) -> i8 {
    if (sqrt_p - p_val.sqrt()).norm() <= (sqrt_p + p_val.sqrt()).norm() {
        1
    } else {
        -1
    }
}

impl LiouvilleFrame {
    /// Frame for sector `k` with base radius one past the root bound.
    pub fn new(p: &SchwarzPolynomial, sector: usize) -> Result<Self> {
        let r0 = critical_directions(p).ray_base_radius;
        Self::with_base_radius(p, sector, r0, 1e-2)
    }

    pub fn with_base_radius(p: &SchwarzPolynomial, sector: usize, base_radius: f64, margin: f64) -> Result<Self> {
        let frame = critical_directions(p);
        let n = frame.n();
        if sector >= n {
            return Err(NevlabError::InvalidArgument(format!("sector {sector} out of range 0..{n}")));
        }
        if p.degree() > 0 && !(base_radius > p.root_bound()) {
            return Err(NevlabError::InvalidArgument(format!(
                "base radius {base_radius} must exceed the root bound {}",
                p.root_bound()
            )));
        }
        if !(base_radius > 0.0) {
            return Err(NevlabError::InvalidArgument(format!("base radius {base_radius}")));
        }
        if !(margin > 0.0 && margin < TAU / n as f64) {
            return Err(NevlabError::InvalidArgument(format!("sector margin {margin}")));
        }
        let theta = frame.angles[sector];
        let base = Complex64::from_polar(base_radius, theta);
        let pb = p.eval(base);
        let mut s = pb.sqrt();
        if (base * s).re < 0.0 {
            s = -s;
        }
        let root4_base = s.sqrt();
        Ok(Self { p: p.clone(), sector, theta, n, base_radius, margin, root4_base })
    }

    pub fn sector(&self) -> usize {
        self.sector
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> Complex64 {
        Complex64::from_polar(self.base_radius, self.theta)
    }

    pub fn base_radius(&self) -> f64 {
        self.base_radius
    }

    pub fn polynomial(&self) -> &SchwarzPolynomial {
        &self.p
    }

    /// `|arg z − θ_k| < 2π/N − margin` and `|z| > R₀`.
    pub fn contains(&self, z: Complex64) -> bool {
        z.norm() > self.base_radius && angle_gap(z.arg(), self.theta) < TAU / self.n as f64 - self.margin
    }

    /// Checks that `(a z^N)^{1/2}` and the tracked `z P^{1/2}` are real
    /// and positive at the given radii on the ray.
    pub fn ray_branch_positive(&self, radii: &[f64]) -> Result<bool> {
        let a = self.p.leading();
        for &r in radii {
            let z = Complex64::from_polar(r, self.theta);
            let azn = a * z.powu(self.n as u32);
            if azn.re <= 0.0 || azn.im.abs() > 1e-9 * azn.norm() {
                return Ok(false);
            }
            if r > self.base_radius {
                let v = self.evaluate(z)?;
                let t = z * v.sqrt_p;
                if t.re <= 0.0 || t.im.abs() > 0.05 * t.norm() + 1e-12 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Signed angular offset of `arg z` from `θ_k`, in `(−π, π]`.
    fn offset(&self, z: Complex64) -> f64 {
        let d = (z.arg() - self.theta).rem_euclid(TAU);
        if d > PI {
            d - TAU
        } else {
            d
        }
    }

    /// Integrates the tracked root along the ray to `|z|` and then along
    /// the arc to `arg z`.
    pub fn evaluate(&self, z: Complex64) -> Result<LiouvilleValue> {
        if !self.contains(z) {
            return Err(NevlabError::OutsideSector { z, sector: self.sector });
        }
        let rule = gl_rule();
        let mut q = self.root4_base;
        let mut acc = Complex64::new(0.0, 0.0);
        let base = self.base();
        let mut certificate = vec![(base, branch_sign(q * q, self.p.eval(base)))];
        let dir = Complex64::from_polar(1.0, self.theta);
        let r = z.norm();
        let mut s = self.base_radius;
        while s < r {
            let e = (s + (0.1 * s).max(0.5)).min(r);
            let half = 0.5 * (e - s);
            let mid = 0.5 * (e + s);
            for &(x, w) in rule {
                let pt = dir * (mid + half * x);
                q = nearest_root4(q, self.p.eval(pt).sqrt().sqrt());
                acc += q * q * dir * (w * half);
            }
            s = e;
        }
        let corner = dir * r;
        let pc = self.p.eval(corner);
        q = nearest_root4(q, pc.sqrt().sqrt());
        certificate.push((corner, branch_sign(q * q, pc)));
        let delta = self.offset(z);
        if delta != 0.0 {
            let dphi_max = (0.5 / r).min(0.1);
            let panels = (delta.abs() / dphi_max).ceil().max(1.0) as usize;
            let h = delta / panels as f64;
            for k in 0..panels {
                let a = self.theta + h * k as f64;
                for &(x, w) in rule {
                    let phi = a + 0.5 * h * (x + 1.0);
                    let pt = Complex64::from_polar(r, phi);
                    q = nearest_root4(q, self.p.eval(pt).sqrt().sqrt());
                    acc += q * q * Complex64::i() * pt * (w * 0.5 * h);
                }
            }
        }
        let pz = self.p.eval(z);
        q = nearest_root4(q, pz.sqrt().sqrt());
        certificate.push((z, branch_sign(q * q, pz)));
        Ok(LiouvilleValue { z_coord: acc, sqrt_p: q * q, root4: q, certificate })
    }

    /// Rough radius at which `|Z|` reaches `target`, from the leading term.
    pub fn radius_for_z(&self, target: f64) -> f64 {
        let a = self.p.leading().norm();
        let n = self.n as f64;
        let r = (target * n / (2.0 * a.sqrt())).powf(2.0 / n);
        r.max(2.0 * self.base_radius)
    }
}

/// Liouville coordinate of `z` in the frame.
pub fn liouville_z(frame: &LiouvilleFrame, z: Complex64) -> Result<Complex64> {
    Ok(frame.evaluate(z)?.z_coord)
}

/// `F = P''/(4P²) − 5P'²/(16P³)`.
pub fn liouville_f(p: &SchwarzPolynomial, z: Complex64) -> Result<Complex64> {
    let (v, d1, d2) = p.eval_with_derivatives(z);
    if v.norm() == 0.0 {
        return Err(NevlabError::TurningPoint { z });
    }
    Ok(d2 / (4.0 * v * v) - 5.0 * d1 * d1 / (16.0 * v * v * v))
}

/// `P^{-1/4} e^{±iZ}` at `z`, relative error `O(1/|Z|)`.
pub fn principal_solutions(frame: &LiouvilleFrame, z: Complex64, r_prime: f64) -> Result<(Complex64, Complex64)> {
    let v = frame.evaluate(z)?;
    if v.z_coord.norm() <= r_prime {
        return Err(NevlabError::ZTooSmall { modulus: v.z_coord.norm(), threshold: r_prime });
    }
    let iz = Complex64::i() * v.z_coord;
    Ok((iz.exp() / v.root4, (-iz).exp() / v.root4))
}

/// One solution with a complex log-scale: true value `w·e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledSolution {
    pub z: Complex64,
    pub w: Complex64,
    pub dw: Complex64,
    pub log_scale: Complex64,
}

impl ScaledSolution {
    /// `W(self, (v, dv))` up to the factor `e^{log_scale}`.
    pub fn scaled_wronskian_with(&self, v: Complex64, dv: Complex64) -> Complex64 {
        self.w * dv - v * self.dw
    }
}

/// Which principal solution of the frame to continue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Principal {
    /// `P^{-1/4} e^{iZ}`, decaying in the sector counterclockwise of `θ_k`.
    First,
    /// `P^{-1/4} e^{-iZ}`, decaying in the sector clockwise of `θ_k`.
    Second,
}

/// Exact solution asymptotic to the chosen principal solution deep in the
/// tract where it decays, continued to `to`.
///
/// Starts from WKB data on the mid-tract ray at `|Z| ≈ z_far`, integrates
/// inward along the ray to radius `|to|` and then along the arc to `arg to`.
/// Both legs run against the decay, so dominant contamination shrinks.
pub fn subdominant_solution(
    frame: &LiouvilleFrame,
    which: Principal,
    to: Complex64,
    z_far: f64,
    opts: &IntegratorOptions,
) -> Result<ScaledSolution> {
    let n = frame.n() as f64;
    let sign = match which {
        Principal::First => 1.0,
        Principal::Second => -1.0,
    };
    let mid = frame.theta() + sign * PI / n;
    let r_far = frame.radius_for_z(z_far).max(2.0 * to.norm());
    let start = Complex64::from_polar(r_far, mid);
    let v = frame.evaluate(start)?;
    let p = frame.polynomial();
    let (pv, dp, _) = p.eval_with_derivatives(start);
    let i = Complex64::i();
    let log_scale = sign * i * v.z_coord - v.root4.ln();
    let dw = sign * i * v.sqrt_p - dp / (4.0 * pv);

    let r_to = to.norm();
    let mut path = vec![start, Complex64::from_polar(r_to, mid)];
    if r_to > 0.0 {
        let d = (to.arg() - mid).rem_euclid(TAU);
        let d = if d > PI { d - TAU } else { d };
        let pieces = (d.abs() / 0.02).ceil() as usize;
        for k in 1..=pieces {
            path.push(Complex64::from_polar(r_to, mid + d * k as f64 / pieces as f64));
        }
        *path.last_mut().unwrap() = to;
    }
    let mut init = FundamentalPairState::new(start, Complex64::new(1.0, 0.0), dw, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    init.log_scale = log_scale;
    let out = integrate_pair(p, &path, &init, opts)?;
    Ok(ScaledSolution { z: out.z, w: out.w1, dw: out.dw1, log_scale: out.log_scale })
}
