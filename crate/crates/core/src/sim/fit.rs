use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::SurvivalEstimate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub c_hat: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Weighted least squares of `−log p̂` on `n^{1/3}` with a free intercept.
///
/// Weights are `(p̂/stderr)²`, the inverse delta-method variance of
/// `log p̂`; if any stderr is zero all points weigh the same.
pub fn extinction_slope_fit(estimates: &[SurvivalEstimate]) -> Result<SlopeFit> {
    let pts: Vec<&SurvivalEstimate> = estimates.iter().filter(|e| e.p_hat > 0.0).collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} estimates with p̂ > 0, need 3", pts.len())));
    }
    let xs: Vec<f64> = pts.iter().map(|e| (e.n as f64).cbrt()).collect();
    let ys: Vec<f64> = pts.iter().map(|e| -e.p_hat.ln()).collect();
    let inverse_variance = pts.iter().all(|e| e.stderr > 0.0 && e.stderr.is_finite());
    let ws: Vec<f64> = if inverse_variance {
        pts.iter().map(|e| (e.p_hat / e.stderr).powi(2)).collect()
    } else {
        vec![1.0; pts.len()]
    };
    let sw: f64 = ws.iter().sum();
    let xm = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all horizons n are equal".into()));
    }
    let sxy: f64 = ws.iter().zip(xs.iter().zip(&ys)).map(|(w, (x, y))| w * (x - xm) * (y - ym)).sum();
    let syy: f64 = ws.iter().zip(&ys).map(|(w, y)| w * (y - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = ws.iter().zip(xs.iter().zip(&ys)).map(|(w, (x, y))| w * (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let stderr = if inverse_variance { (1.0 / sxx).sqrt() } else { (rss / (pts.len() as f64 - 2.0) / sxx).sqrt() };
    Ok(SlopeFit { c_hat: slope, stderr, intercept, r_squared })
}
