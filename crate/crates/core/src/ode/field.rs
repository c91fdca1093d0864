use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{integrate_pair, integrate_segment, FundamentalPairState, IntegratorOptions};
use crate::error::{NevlabError, Result};
use crate::schwarzian::{critical_directions, SchwarzPolynomial};

/// Layout of the anchor lattice used by [`SolutionField`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Lower bound on the number of rays; the actual count is `N·2^k`.
    pub min_rays: usize,
    pub radial_step: f64,
    /// Farthest distance from an anchor served by its Taylor germ.
    pub germ_radius: f64,
    pub cache: bool,
    pub integrator: IntegratorOptions,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            min_rays: 2048,
            radial_step: 0.125,
            germ_radius: 0.3,
            cache: true,
            integrator: IntegratorOptions::default(),
        }
    }
}

/// Taylor expansion of a fundamental pair about `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGerm {
    pub center: Complex64,
    pub log_scale: Complex64,
    c1: Vec<Complex64>,
    c2: Vec<Complex64>,
}

fn horner(c: &[Complex64], t: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        d = d * t + v;
        v = v * t + a;
    }
    (v, d)
}

impl LocalGerm {
    /// Expansion of `state` for `w'' = −P w`, accurate on `|t| ≤ radius`.
    pub fn new(p: &SchwarzPolynomial, state: &FundamentalPairState, radius: f64) -> Self {
        let q = p.shifted(state.z);
        let mut c1 = vec![state.w1, state.dw1];
        let mut c2 = vec![state.w2, state.dw2];
        let size = |c: &[Complex64]| c[0].norm() + c[1].norm() * radius;
        let (s1, s2) = (size(&c1), size(&c2));
        let mut quiet = 0;
        let mut n = 0usize;
        while n < 400 {
            let mut a1 = Complex64::new(0.0, 0.0);
            let mut a2 = Complex64::new(0.0, 0.0);
            for (k, qk) in q.iter().enumerate().take(n + 1) {
                a1 += qk * c1[n - k];
                a2 += qk * c2[n - k];
            }
            let denom = ((n + 2) * (n + 1)) as f64;
            c1.push(-a1 / denom);
            c2.push(-a2 / denom);
            let rn = radius.powi(n as i32 + 2);
            let t1 = c1[n + 2].norm() * rn;
            let t2 = c2[n + 2].norm() * rn;
            if t1 <= 1e-18 * s1.max(f64::MIN_POSITIVE) && t2 <= 1e-18 * s2.max(f64::MIN_POSITIVE) {
                quiet += 1;
                if quiet >= 4 {
                    break;
                }
            } else {
                quiet = 0;
            }
            n += 1;
        }
        Self { center: state.z, log_scale: state.log_scale, c1, c2 }
    }

    /// Scaled `(w1, w1', w2, w2')` at `z`.
    pub fn eval(&self, z: Complex64) -> [Complex64; 4] {
        let t = z - self.center;
        let (w1, d1) = horner(&self.c1, t);
        let (w2, d2) = horner(&self.c2, t);
        [w1, d1, w2, d2]
    }

    pub fn state(&self, z: Complex64) -> FundamentalPairState {
        let v = self.eval(z);
        FundamentalPairState { z, w1: v[0], dw1: v[1], w2: v[2], dw2: v[3], log_scale: self.log_scale }
    }
}

/// Fundamental pair over the plane, computed on a polar anchor lattice
/// centred at the origin and evaluated locally by Taylor germs.
///
/// Each ray is integrated outward from the origin one anchor at a time,
/// so an anchor depends only on its predecessor and results do not depend
/// on cache state or evaluation order.
#[derive(Debug)]
pub struct SolutionField {
    p: SchwarzPolynomial,
    origin: FundamentalPairState,
    theta0: f64,
    rays: usize,
    config: FieldConfig,
    cache: Mutex<HashMap<usize, Arc<Vec<FundamentalPairState>>>>,
}

impl Clone for SolutionField {
    fn clone(&self) -> Self {
        Self {
            p: self.p.clone(),
            origin: self.origin,
            theta0: self.theta0,
            rays: self.rays,
            config: self.config,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl SolutionField {
    /// `base` may sit anywhere; it is carried to the origin first.
    pub fn new(p: &SchwarzPolynomial, base: &FundamentalPairState, config: FieldConfig) -> Result<Self> {
        if !(config.radial_step > 0.0 && config.germ_radius > 0.0 && config.min_rays > 0) {
            return Err(NevlabError::InvalidArgument("field layout must be positive".into()));
        }
        let zero = Complex64::new(0.0, 0.0);
        let origin = if base.z == zero {
            *base
        } else {
            integrate_pair(p, &[base.z, zero], base, &config.integrator)?
        };
        let frame = critical_directions(p);
        let mut rays = frame.n();
        while rays < config.min_rays {
            rays *= 2;
        }
        Ok(Self {
            p: p.clone(),
            origin,
            theta0: frame.angles[0],
            rays,
            config,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn polynomial(&self) -> &SchwarzPolynomial {
        &self.p
    }

    /// Pair data at the origin.
    pub fn origin(&self) -> &FundamentalPairState {
        &self.origin
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn ray_count(&self) -> usize {
        self.rays
    }

    pub fn cached_rays(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    fn ray_angle(&self, j: usize) -> f64 {
        self.theta0 + TAU * j as f64 / self.rays as f64
    }

    fn anchor_point(&self, j: usize, i: usize) -> Complex64 {
        if i == 0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.config.radial_step * i as f64, self.ray_angle(j))
    }

    fn nearest_anchor(&self, z: Complex64) -> (usize, usize) {
        let i = (z.norm() / self.config.radial_step).round() as usize;
        let step = TAU / self.rays as f64;
        let j = ((z.arg() - self.theta0) / step).round().rem_euclid(self.rays as f64) as usize % self.rays;
        (j, i)
    }

    fn extend(&self, j: usize, have: &[FundamentalPairState], upto: usize) -> Result<Vec<FundamentalPairState>> {
        let mut out = have.to_vec();
        if out.is_empty() {
            out.push(self.origin);
        }
        while out.len() <= upto {
            let mut s = *out.last().unwrap();
            let to = self.anchor_point(j, out.len());
            integrate_segment(&self.p, &mut s, to, &self.config.integrator)?;
            out.push(s);
        }
        Ok(out)
    }

    fn anchor(&self, j: usize, i: usize) -> Result<FundamentalPairState> {
        if !self.config.cache {
            return Ok(self.extend(j, &[], i)?[i]);
        }
        let existing = {
            let cache = self.cache.lock().expect("field cache poisoned");
            cache.get(&j).cloned()
        };
        if let Some(v) = &existing {
            if v.len() > i {
                return Ok(v[i]);
            }
        }
        let have: &[FundamentalPairState] = existing.as_deref().map(|v| v.as_slice()).unwrap_or(&[]);
        let grown = Arc::new(self.extend(j, have, i)?);
        let state = grown[i];
        let mut cache = self.cache.lock().expect("field cache poisoned");
        let keep = cache.get(&j).map(|v| v.len() >= grown.len()).unwrap_or(false);
        if !keep {
            cache.insert(j, grown);
        }
        Ok(state)
    }

    /// Germ valid around `z`: the nearest anchor's, or a fresh one at `z`
    /// when no anchor is within the germ radius.
    pub fn germ(&self, z: Complex64) -> Result<LocalGerm> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(NevlabError::InvalidArgument(format!("non-finite point {z}")));
        }
        let (j, i) = self.nearest_anchor(z);
        let mut state = self.anchor(j, i)?;
        if (z - state.z).norm() > self.config.germ_radius {
            integrate_segment(&self.p, &mut state, z, &self.config.integrator)?;
        }
        Ok(LocalGerm::new(&self.p, &state, self.config.germ_radius))
    }

    /// Scaled pair at `z` from the local germ.
    pub fn state_at(&self, z: Complex64) -> Result<FundamentalPairState> {
        Ok(self.germ(z)?.state(z))
    }

    /// Pair at `z` by direct integration along the segment from the origin.
    pub fn state_direct(&self, z: Complex64) -> Result<FundamentalPairState> {
        integrate_pair(&self.p, &[Complex64::new(0.0, 0.0), z], &self.origin, &self.config.integrator)
    }
}
