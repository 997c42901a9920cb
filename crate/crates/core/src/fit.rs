//! Small least-squares helpers for the slope checks on asymptotic estimates.

use crate::error::{Result, TodaError};

/// Ordinary least-squares line `y ~ slope * x + intercept`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(TodaError::Validation(format!(
            "line fit needs matching samples (>= 2), got {} x {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(TodaError::Validation(
            "line fit is degenerate: all abscissae coincide".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let pred = slope * x + intercept;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - my) * (y - my);
    }
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Two-regressor least squares `y ~ c1 * x1 + c2 * x2 + intercept`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct PlaneFit {
    pub coef_x1: f64,
    pub coef_x2: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_plane(x1s: &[f64], x2s: &[f64], ys: &[f64]) -> Result<PlaneFit> {
    let m = ys.len();
    if x1s.len() != m || x2s.len() != m || m < 3 {
        return Err(TodaError::Validation(format!(
            "plane fit needs matching samples (>= 3), got {} / {} / {}",
            x1s.len(),
            x2s.len(),
            m
        )));
    }
    // normal equations on centered data
    let n = m as f64;
    let m1 = x1s.iter().sum::<f64>() / n;
    let m2 = x2s.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..m {
        let a = x1s[i] - m1;
        let b = x2s[i] - m2;
        let y = ys[i] - my;
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        s1y += a * y;
        s2y += b * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-12 * (s11 * s22).max(1e-300) {
        return Err(TodaError::Validation(
            "plane fit is degenerate: regressors are collinear".into(),
        ));
    }
    let c1 = (s22 * s1y - s12 * s2y) / det;
    let c2 = (s11 * s2y - s12 * s1y) / det;
    let intercept = my - c1 * m1 - c2 * m2;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..m {
        let pred = c1 * x1s[i] + c2 * x2s[i] + intercept;
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - my) * (ys[i] - my);
    }
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(PlaneFit {
        coef_x1: c1,
        coef_x2: c2,
        intercept,
        r_squared,
    })
}
