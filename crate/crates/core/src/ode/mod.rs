//! Integration of `w'' + P(z) w = 0` along complex paths.

mod field;
mod liouville;

pub use field::{FieldConfig, LocalGerm, SolutionField};
pub use liouville::{
    liouville_f, liouville_z, principal_solutions, subdominant_solution, LiouvilleFrame,
    LiouvilleValue, Principal, ScaledSolution, DEFAULT_R_PRIME,
};
pub(crate) use liouville::gl_rule;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NevlabError, Result};
use crate::schwarzian::SchwarzPolynomial;

/// Two solutions of `w'' + P w = 0` and their first derivatives at `z`.
///
/// Stored values are the true ones multiplied by `exp(-log_scale)`; the
/// common factor is shifted into `log_scale` whenever the pair grows past
/// `RENORM_HIGH` or shrinks below `RENORM_LOW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalPairState {
    pub z: Complex64,
    pub w1: Complex64,
    pub dw1: Complex64,
    pub w2: Complex64,
    pub dw2: Complex64,
    pub log_scale: Complex64,
}

const RENORM_HIGH: f64 = 1e150;
const RENORM_LOW: f64 = 1e-150;

impl FundamentalPairState {
    pub fn new(z: Complex64, w1: Complex64, dw1: Complex64, w2: Complex64, dw2: Complex64) -> Self {
        Self { z, w1, dw1, w2, dw2, log_scale: Complex64::new(0.0, 0.0) }
    }

    /// Data of `(e^{iz}, e^{-iz})` at `z`, Wronskian `-2i`.
    pub fn exp_iz(z: Complex64) -> Self {
        let i = Complex64::i();
        let e = (i * z).exp();
        let f = (-i * z).exp();
        Self::new(z, e, i * e, f, -i * f)
    }

    /// Wronskian of the stored (scaled) values.
    pub fn scaled_wronskian(&self) -> Complex64 {
        self.w1 * self.dw2 - self.w2 * self.dw1
    }

    /// True Wronskian `w1 w2' - w2 w1'`.
    pub fn wronskian(&self) -> Complex64 {
        self.scaled_wronskian() * (2.0 * self.log_scale).exp()
    }

    /// True values `(w1, w1', w2, w2')`; may overflow for heavily rescaled states.
    pub fn values(&self) -> [Complex64; 4] {
        let s = self.log_scale.exp();
        [self.w1 * s, self.dw1 * s, self.w2 * s, self.dw2 * s]
    }

    fn as_array(&self) -> [Complex64; 4] {
        [self.w1, self.dw1, self.w2, self.dw2]
    }

    fn set_array(&mut self, y: [Complex64; 4]) {
        self.w1 = y[0];
        self.dw1 = y[1];
        self.w2 = y[2];
        self.dw2 = y[3];
    }

    /// Moves a power-of-two factor into `log_scale` if the pair left the safe range.
    pub fn renormalize(&mut self) {
        let m = self.as_array().iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
        if m > RENORM_HIGH || (m > 0.0 && m < RENORM_LOW) {
            let e = m.log2().floor() as i32;
            let factor = 2f64.powi(-e);
            let y = self.as_array().map(|v| v * factor);
            self.set_array(y);
            self.log_scale += Complex64::new(e as f64 * std::f64::consts::LN_2, 0.0);
        }
    }
}

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Local relative tolerance per accepted step.
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, max_steps: 5_000_000 }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn rhs(p: &SchwarzPolynomial, z: Complex64, u: Complex64, y: &[Complex64; 4]) -> [Complex64; 4] {
    let pu = p.eval(z) * u;
    [u * y[1], -pu * y[0], u * y[3], -pu * y[2]]
}

fn solution_error(y: &[Complex64; 4], err: &[Complex64; 4], idx: usize, kappa: f64) -> Option<f64> {
    let size = y[idx].norm() + y[idx + 1].norm() / kappa;
    if size == 0.0 {
        return None;
    }
    Some((err[idx].norm() + err[idx + 1].norm() / kappa) / size)
}

fn error_norm(y: &[Complex64; 4], err: &[Complex64; 4], kappa: f64) -> f64 {
    let s1 = y[0].norm() + y[1].norm() / kappa;
    let s2 = y[2].norm() + y[3].norm() / kappa;
    // A solution negligible next to its partner cannot affect any quotient.
    let mut e = 0.0f64;
    if s1 >= 1e-200 * s2 {
        if let Some(v) = solution_error(y, err, 0, kappa) {
            e = e.max(v);
        }
    }
    if s2 >= 1e-200 * s1 {
        if let Some(v) = solution_error(y, err, 2, kappa) {
            e = e.max(v);
        }
    }
    e
}

/// Integrates the state along the straight segment to `to`; returns the
/// number of accepted steps.
pub fn integrate_segment(
    p: &SchwarzPolynomial,
    state: &mut FundamentalPairState,
    to: Complex64,
    opts: &IntegratorOptions,
) -> Result<usize> {
    let start = state.z;
    let delta = to - start;
    let len = delta.norm();
    if !len.is_finite() {
        return Err(NevlabError::InvalidArgument(format!("segment to {to} is not finite")));
    }
    if len == 0.0 {
        return Ok(0);
    }
    let u = delta / len;
    let kappa_at = |z: Complex64| p.eval(z).norm().sqrt().max(1.0);
    let mut t = 0.0;
    let mut h = len.min(0.25 / kappa_at(start));
    let mut accepted = 0usize;
    let mut y = state.as_array();
    let mut tries = 0usize;
    while t < len {
        tries += 1;
        if tries > opts.max_steps {
            return Err(NevlabError::StepUnderflow { z: start + u * t, step: h });
        }
        let last = t + h >= len;
        let h_eff = if last { len - t } else { h };
        let z = start + u * t;
        let mut k = [[Complex64::new(0.0, 0.0); 4]; 7];
        for s in 0..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j] * h_eff;
                if a != 0.0 {
                    for c in 0..4 {
                        ys[c] += kj[c] * a;
                    }
                }
            }
            k[s] = rhs(p, z + u * (C[s] * h_eff), u, &ys);
        }
        let mut y_new = y;
        let mut err = [Complex64::new(0.0, 0.0); 4];
        for s in 0..7 {
            let b = if s < 6 { A[6][s] * h_eff } else { 0.0 };
            let e = E[s] * h_eff;
            for c in 0..4 {
                y_new[c] += k[s][c] * b;
                err[c] += k[s][c] * e;
            }
        }
        let kappa = kappa_at(z).max(kappa_at(z + u * h_eff));
        let e = error_norm(&y_new, &err, kappa) / opts.rtol;
        let accepted_step = e <= 1.0 && e.is_finite();
        if accepted_step {
            t = if last { len } else { t + h_eff };
            y = y_new;
            accepted += 1;
            let mut tmp = *state;
            tmp.set_array(y);
            tmp.renormalize();
            state.log_scale = tmp.log_scale;
            y = tmp.as_array();
        }
        let factor = if e == 0.0 {
            5.0
        } else if e.is_finite() {
            (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            0.1
        };
        h = if accepted_step { h_eff * factor } else { h_eff * factor.min(0.9) };
        let floor = 1e-13 * z.norm().max(1.0);
        if t < len && h < floor {
            return Err(NevlabError::StepUnderflow { z, step: h });
        }
    }
    state.set_array(y);
    state.z = to;
    Ok(accepted)
}

/// Integrates the pair along a polyline whose first vertex is `init.z`.
pub fn integrate_pair(
    p: &SchwarzPolynomial,
    path: &[Complex64],
    init: &FundamentalPairState,
    opts: &IntegratorOptions,
) -> Result<FundamentalPairState> {
    let first = path
        .first()
        .ok_or_else(|| NevlabError::InvalidArgument("empty path".into()))?;
    if (first - init.z).norm() > 1e-14 * init.z.norm().max(1.0) {
        return Err(NevlabError::InvalidArgument(format!(
            "path starts at {first}, state is at {}",
            init.z
        )));
    }
    let mut state = *init;
    state.z = *first;
    for &v in &path[1..] {
        integrate_segment(p, &mut state, v, opts)?;
    }
    Ok(state)
}

/// Polyline length.
pub fn path_length(path: &[Complex64]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}
