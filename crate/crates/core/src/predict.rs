//! Prediction with Student-t confidence and prediction bands.
//!
//! The fit variance `σ̂² = |r|² / (n - l)` stands in for the noise level. For
//! a query row `b*` of the basis, `q = b*ᵀ (BᵀB)⁻¹ b*` is evaluated as
//! `|R⁻ᵀ b*|²` from the thin QR of `B`.

use std::io::Write;
use std::path::Path;

use faer::MatRef;
use statrs::function::beta::{beta_reg, inv_beta_reg};
use statrs::function::gamma::ln_gamma;

use crate::data::{axis_names, check_dim, fmt_real, NormalizationInfo};
use crate::error::{Error, Result};
use crate::hierfit::{matvec, ScaleFit};

/// `sqrt(residual² / (n - l))`.
pub fn sigma_hat(residual_2norm: f64, n: usize, rank: usize) -> Result<f64> {
    if n <= rank {
        return Err(Error::DegenerateDof { n, rank });
    }
    Ok((residual_2norm * residual_2norm / (n - rank) as f64).sqrt())
}

fn t_density(t: f64, nu: f64) -> f64 {
    let ln = ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - (nu + 1.0) / 2.0 * (t * t / nu).ln_1p();
    ln.exp()
}

/// Upper tail `P(T > t)` for `t >= 0`.
fn t_upper_tail(t: f64, nu: f64) -> f64 {
    0.5 * beta_reg(nu / 2.0, 0.5, nu / (nu + t * t))
}

/// Inverse CDF of Student's t with `dof` degrees of freedom.
pub fn t_quantile(p: f64, dof: usize) -> Result<f64> {
    if dof < 1 {
        return Err(Error::InvalidParameter("t quantile needs dof >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("probability must lie in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let nu = dof as f64;
    let tail = p.min(1.0 - p);
    // P(|T| > t) = I_{ν/(ν+t²)}(ν/2, 1/2)
    let x = inv_beta_reg(nu / 2.0, 0.5, 2.0 * tail);
    let mut t = (nu * (1.0 - x) / x).sqrt();
    if !t.is_finite() {
        t = 0.0;
    }
    for _ in 0..50 {
        let step = (t_upper_tail(t, nu) - tail) / t_density(t, nu);
        if !step.is_finite() {
            break;
        }
        t = (t + step).max(0.0);
        if step.abs() <= 1e-15 * t.max(1.0) {
            break;
        }
    }
    Ok(if p > 0.5 { t } else { -t })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBand {
    pub mean: Vec<f64>,
    pub conf_half_width: Vec<f64>,
    pub pred_half_width: Vec<f64>,
    pub dof: usize,
    pub sigma_hat: f64,
    pub alpha: f64,
}

impl IntervalBand {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean_pred_half_width(&self) -> f64 {
        self.pred_half_width.iter().sum::<f64>() / self.len().max(1) as f64
    }

    /// Whether `value` lies in the prediction band at point `i`.
    pub fn pred_contains(&self, i: usize, value: f64) -> bool {
        (value - self.mean[i]).abs() <= self.pred_half_width[i]
    }

    /// The same band in raw response units.
    pub fn denormalize(&self, norm: &NormalizationInfo) -> IntervalBand {
        let s = norm.value_scale;
        let scale = |v: &[f64]| v.iter().map(|x| x * s).collect();
        IntervalBand {
            mean: scale(&self.mean),
            conf_half_width: scale(&self.conf_half_width),
            pred_half_width: scale(&self.pred_half_width),
            dof: self.dof,
            sigma_hat: self.sigma_hat * s,
            alpha: self.alpha,
        }
    }

    /// Writes `coords..., mean, conf_lo, conf_hi, pred_lo, pred_hi`.
    pub fn write_csv<W: Write>(&self, writer: W, sites: MatRef<'_, f64>) -> Result<()> {
        check_dim(self.len(), sites.nrows())?;
        let mut w = csv::Writer::from_writer(writer);
        let mut header = axis_names(sites.ncols());
        header.extend(["mean", "conf_lo", "conf_hi", "pred_lo", "pred_hi"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = (0..sites.ncols()).map(|k| fmt_real(sites[(i, k)])).collect();
            let (m, c, p) = (self.mean[i], self.conf_half_width[i], self.pred_half_width[i]);
            row.extend([m, m - c, m + c, m - p, m + p].map(fmt_real));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, sites: MatRef<'_, f64>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, sites)
    }
}

/// Mean and t-bands at normalized sites `at` from the fit at one scale.
///
/// `σ̂` comes from that scale's own residual.
pub fn intervals(fit: &ScaleFit<'_>, at: MatRef<'_, f64>, alpha: f64) -> Result<IntervalBand> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (n, l) = (fit.n(), fit.rank());
    let sigma = sigma_hat(fit.residual_2norm(), n, l)?;
    let dof = n - l;
    let tq = t_quantile(1.0 - alpha / 2.0, dof)?;
    let bstar = fit.eval_basis(at)?;
    let mean = matvec(bstar.as_ref(), &fit.coeffs);
    let mut conf = Vec::with_capacity(at.nrows());
    let mut pred = Vec::with_capacity(at.nrows());
    for i in 0..at.nrows() {
        let row: Vec<f64> = (0..l).map(|j| bstar[(i, j)]).collect();
        let q = fit.ls.quad_form(&row);
        conf.push(sigma * q.sqrt() * tq);
        pred.push(sigma * (1.0 + q).sqrt() * tq);
    }
    Ok(IntervalBand {
        mean,
        conf_half_width: conf,
        pred_half_width: pred,
        dof,
        sigma_hat: sigma,
        alpha,
    })
}
