use serde::{Deserialize, Serialize};

use crate::error::{NevlabError, Result};

/// Index window `j_min ≤ |j| ≤ j_max` used for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitWindow {
    pub j_min: usize,
    pub j_max: Option<usize>,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { j_min: 3, j_max: Some(40) }
    }
}

/// `magnitude ≈ constant · |j|^exponent` on the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub exponent: f64,
    pub constant: f64,
    /// Largest relative deviation of a fitted point from the power law.
    pub residual: f64,
    pub window: FitWindow,
    pub points: usize,
}

/// Least squares on `(ln|j|, ln magnitude)`.
pub fn fit_power_law(values: &[(f64, f64)], window: FitWindow) -> Result<AsymptoticFit> {
    let inside = |j: f64| {
        let a = j.abs();
        a >= window.j_min.max(1) as f64 && window.j_max.is_none_or(|m| a <= m as f64)
    };
    let pts: Vec<(f64, f64)> = values.iter().copied().filter(|&(j, _)| inside(j)).collect();
    if let Some(&(j, v)) = pts.iter().find(|&&(_, v)| !(v > 0.0 && v.is_finite())) {
        return Err(NevlabError::Fit(format!("magnitude {v} at j = {j} is not positive")));
    }
    if pts.len() < 6 {
        return Err(NevlabError::Fit(format!("{} points in the window, need at least 6", pts.len())));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|(j, _)| j.abs().ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(NevlabError::Fit("all indices coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| ((y - intercept - exponent * x).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(AsymptoticFit { exponent, constant: intercept.exp(), residual, window, points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_square_law() {
        let pts: Vec<(f64, f64)> = (1..=30).map(|j| (j as f64, (j * j) as f64)).collect();
        let fit = fit_power_law(&pts, FitWindow::default()).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.constant - 1.0).abs() < 1e-11);
        assert!(fit.residual <= 1e-12);
        assert_eq!(fit.points, 28);
    }

    #[test]
    fn constant_sequence_has_zero_exponent() {
        let pts: Vec<(f64, f64)> = (-20..=20).filter(|&j| j != 0).map(|j| (j as f64, 0.5)).collect();
        let fit = fit_power_law(&pts, FitWindow::default()).unwrap();
        assert!(fit.exponent.abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let mut pts: Vec<(f64, f64)> = (1..=10).map(|j| (j as f64, j as f64)).collect();
        pts[5].1 = 0.0;
        assert!(matches!(fit_power_law(&pts, FitWindow::default()), Err(NevlabError::Fit(_))));
        let few: Vec<(f64, f64)> = (3..=7).map(|j| (j as f64, 1.0)).collect();
        assert!(fit_power_law(&few, FitWindow::default()).is_err());
    }

    proptest! {
        #[test]
        fn recovers_any_power_law(e in -3.0f64..3.0, c in 0.01f64..100.0) {
            let pts: Vec<(f64, f64)> = (1..=40).map(|j| (j as f64, c * (j as f64).powf(e))).collect();
            let fit = fit_power_law(&pts, FitWindow::default()).unwrap();
            prop_assert!((fit.exponent - e).abs() < 1e-10);
            prop_assert!(fit.residual >= 0.0 && fit.residual < 1e-9);
        }
    }
}
