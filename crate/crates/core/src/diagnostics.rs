//! Computable checks on a fit: the RKHS inner-product bound, the per-scale
//! update factor, error-functional weights and the power function, the
//! stability diagonal, the rank bound, and importance ranking by pivot order.
//!
//! Every routine works in normalized units.

use std::io::Write;
use std::path::Path;

use faer::{Mat, MatRef};

use crate::basis;
use crate::data::{fmt_real, Dataset};
use crate::error::{Error, Result};
use crate::hierfit::{norm2, norm_inf, FitSettings, FitTrace, ScaleFit, ScaleRecord};
use crate::kernel;
use crate::linalg::{self, LeastSquares};

/// Per-scale bound quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub s: usize,
    /// `|Σ_j c_j E(x_j)|` over the selected sites.
    pub rkhs_inner_abs: f64,
    /// `|C|_∞ |E|_1`.
    pub rkhs_bound: f64,
    /// `|C|_∞ sqrt(n) TOL`, meaningful at the converged scale.
    pub tol_bound: f64,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub rank: usize,
    pub rank_upper_bound: f64,
}

/// `(|Σ_j c_j E(x_j)|, |C|_∞ |E|_1)` for one scale record.
pub fn rkhs_bound_check(rec: &ScaleRecord) -> (f64, f64) {
    let inner: f64 = rec
        .selected()
        .iter()
        .zip(&rec.coeffs)
        .map(|(&i, c)| c * rec.residual[i])
        .sum();
    let l1: f64 = rec.residual.iter().map(|e| e.abs()).sum();
    (inner.abs(), norm_inf(&rec.coeffs) * l1)
}

/// Update factor between consecutive fitted vectors.
///
/// `α = <F₁ - F₀, E₀> / |E₀|²` and `ρ = |E₁| / |E₀|` with `E = f - F`.
/// Returns `None` when `E₀ = 0`.
pub fn alpha_rho(f: &[f64], fitted: &[f64], next_fitted: &[f64]) -> Option<(f64, f64)> {
    let e0: Vec<f64> = f.iter().zip(fitted).map(|(a, b)| a - b).collect();
    let n0 = norm2(&e0);
    if n0 == 0.0 {
        return None;
    }
    let e1: Vec<f64> = f.iter().zip(next_fitted).map(|(a, b)| a - b).collect();
    let num: f64 = next_fitted
        .iter()
        .zip(fitted)
        .zip(&e0)
        .map(|((a, b), e)| (a - b) * e)
        .sum();
    Some((num / (n0 * n0), norm2(&e1) / n0))
}

/// Bound table over a whole trace. `lengths` are the bounding-box edges of
/// the training sites.
pub fn bound_report(
    trace: &FitTrace,
    f: &[f64],
    lengths: &[f64],
    settings: &FitSettings,
) -> Vec<BoundRow> {
    let n = f.len() as f64;
    let recs = &trace.records;
    recs.iter()
        .enumerate()
        .map(|(k, rec)| {
            let (inner, bound) = rkhs_bound_check(rec);
            let ar = recs.get(k + 1).and_then(|next| alpha_rho(f, &rec.fitted, &next.fitted));
            BoundRow {
                s: rec.s,
                rkhs_inner_abs: inner,
                rkhs_bound: bound,
                tol_bound: norm_inf(&rec.coeffs) * n.sqrt() * settings.tol,
                alpha: ar.map(|v| v.0),
                rho: ar.map(|v| v.1),
                rank: rec.rank,
                rank_upper_bound: rank_upper_bound(lengths, rec.epsilon, settings.delta),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

pub fn write_bound_csv<W: Write>(rows: &[BoundRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "s",
        "rkhs_inner_abs",
        "rkhs_bound",
        "tol_bound",
        "alpha",
        "rho",
        "rank",
        "rank_upper_bound",
    ])?;
    for r in rows {
        w.write_record([
            r.s.to_string(),
            fmt_real(r.rkhs_inner_abs),
            fmt_real(r.rkhs_bound),
            fmt_real(r.tol_bound),
            opt(r.alpha),
            opt(r.rho),
            r.rank.to_string(),
            fmt_real(r.rank_upper_bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `M̂(x) = B (BᵀB)⁻¹ R(x)|_sel` and `ψ = <f, M̂(x)>` at one normalized site.
pub fn error_functional_weights(fit: &ScaleFit<'_>, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let at = Mat::from_fn(1, x.len(), |_, k| x[k]);
    let r_sel = fit.eval_basis(at.as_ref())?;
    let r_sel: Vec<f64> = (0..fit.rank()).map(|j| r_sel[(0, j)]).collect();
    let m_hat = fit.ls.pinv_t_apply(&r_sel);
    let psi = linalg::dot2(m_hat.iter().copied().zip(fit.data.values.iter().copied()));
    Ok((m_hat, psi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerDiag {
    pub m_dot_r: Vec<f64>,
    /// `1 - M̂(x)ᵀ R(x)`, the squared power function.
    pub power_sq: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Power-function diagnostics at normalized sites `xs`, with `R(x)` taken
/// over all training sites.
pub fn power_bound(fit: &ScaleFit<'_>, xs: MatRef<'_, f64>) -> Result<PowerDiag> {
    let r_full = kernel::gram(xs, fit.data.sites.as_ref(), fit.epsilon)?;
    let mut out = PowerDiag {
        m_dot_r: Vec::with_capacity(xs.nrows()),
        power_sq: Vec::with_capacity(xs.nrows()),
        psi: Vec::with_capacity(xs.nrows()),
    };
    for i in 0..xs.nrows() {
        let x: Vec<f64> = (0..xs.ncols()).map(|k| xs[(i, k)]).collect();
        let (m_hat, psi) = error_functional_weights(fit, &x)?;
        let mr: f64 = m_hat.iter().enumerate().map(|(j, m)| m * r_full[(i, j)]).sum();
        out.m_dot_r.push(mr);
        out.power_sq.push(1.0 - mr);
        out.psi.push(psi);
    }
    Ok(out)
}

pub fn write_power_csv<W: Write>(diag: &PowerDiag, xs: MatRef<'_, f64>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = crate::data::axis_names(xs.ncols());
    header.extend(["m_dot_r", "power_sq", "psi"].map(String::from));
    w.write_record(&header)?;
    for i in 0..xs.nrows() {
        let mut row: Vec<String> = (0..xs.ncols()).map(|k| fmt_real(xs[(i, k)])).collect();
        row.extend([diag.m_dot_r[i], diag.power_sq[i], diag.psi[i]].map(fmt_real));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityDiag {
    /// `D(j, j)` for every training site.
    pub diag: Vec<f64>,
    /// `1 / σ_max(B)`.
    pub lower: f64,
    /// `Σ_j sqrt(D(j, j))`.
    pub upper: f64,
    /// Diagonal of the inverse Gram matrix, present only at full rank.
    pub gram_inv_diag: Option<Vec<f64>>,
}

/// Diagonal of `D = B†ᵀ G_sel B†` and the two bound values, with `G_sel` the
/// Gram matrix among the selected sites.
pub fn stability_diag(fit: &ScaleFit<'_>) -> Result<StabilityDiag> {
    let g_sel = Mat::from_fn(fit.rank(), fit.rank(), |i, j| fit.basis[(fit.selected[i], j)]);
    let mut out = stability_parts(&fit.ls, fit.basis.as_ref(), g_sel.as_ref())?;
    if fit.rank() == fit.n() {
        let y = fit.ls.pinv();
        let mut gi = vec![0.0; fit.n()];
        for (j, &site) in fit.selected.iter().enumerate() {
            gi[site] = y[(j, site)];
        }
        out.gram_inv_diag = Some(gi);
    }
    Ok(out)
}

/// [`stability_diag`] for an explicit basis and inner Gram matrix.
pub fn stability_parts(
    ls: &LeastSquares,
    b: MatRef<'_, f64>,
    g_sel: MatRef<'_, f64>,
) -> Result<StabilityDiag> {
    let l = b.ncols();
    if g_sel.nrows() != l || g_sel.ncols() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            found: g_sel.nrows(),
        });
    }
    let y = ls.pinv();
    let z = g_sel * &y;
    let n = b.nrows();
    let diag: Vec<f64> = (0..n)
        .map(|j| (0..l).map(|i| y[(i, j)] * z[(i, j)]).sum())
        .collect();
    let upper = diag.iter().map(|v| v.max(0.0).sqrt()).sum();
    let btb = b.transpose() * b;
    let smax = linalg::singular_values(btb.as_ref())?[0].sqrt();
    Ok(StabilityDiag {
        diag,
        lower: 1.0 / smax,
        upper,
        gram_inv_diag: None,
    })
}

pub fn write_stability_csv<W: Write>(diag: &StabilityDiag, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["site", "d_jj", "gram_inv_jj"])?;
    for (j, v) in diag.diag.iter().enumerate() {
        let gi = diag.gram_inv_diag.as_ref().map(|g| g[j]);
        w.write_record([j.to_string(), fmt_real(*v), opt(gi)])?;
    }
    w.flush()?;
    Ok(())
}

/// `Π_i (2|I_i|/π · sqrt(ln(1/δ)/ε) + 1)` over the bounding-box edge
/// lengths `|I_i|`.
pub fn rank_upper_bound(lengths: &[f64], eps: f64, delta: f64) -> f64 {
    let root = ((1.0 / delta).ln() / eps).sqrt();
    lengths
        .iter()
        .map(|len| 2.0 * len / std::f64::consts::PI * root + 1.0)
        .product()
}

/// Bounding-box edge lengths of a dataset.
pub fn box_lengths(ds: &Dataset) -> Vec<f64> {
    ds.bounding_box().iter().map(|(lo, hi)| hi - lo).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub scale: usize,
    pub rank: usize,
    /// Pivot order of the first run, most important site first.
    pub ranking: Vec<usize>,
    /// `histogram[i][k]` counts runs in which site `i` held rank `k + 1`.
    pub histogram: Vec<[u32; 3]>,
    pub n_runs: usize,
}

impl ImportanceReport {
    /// Fraction of runs in which `site` held rank 1.
    pub fn top_share(&self, site: usize) -> f64 {
        self.histogram[site][0] as f64 / self.n_runs as f64
    }

    pub fn max_top_share(&self) -> f64 {
        (0..self.histogram.len()).map(|i| self.top_share(i)).fold(0.0, f64::max)
    }

    pub fn write_ranking_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rank", "site"])?;
        for (k, site) in self.ranking.iter().enumerate() {
            w.write_record([(k + 1).to_string(), site.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, writer: W, sites: MatRef<'_, f64>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["site".to_string()];
        header.extend(crate::data::axis_names(sites.ncols()));
        header.extend(["rank1", "rank2", "rank3"].map(String::from));
        w.write_record(&header)?;
        for (i, h) in self.histogram.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend((0..sites.ncols()).map(|k| fmt_real(sites[(i, k)])));
            row.extend(h.iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pivot-order ranking at one scale over `n_runs` sketches.
///
/// Run `r` uses the sketch a fit with seed `seed + r` would draw at this
/// scale, so run 0 reproduces the fit's own ordering.
pub fn importance(
    ds: &Dataset,
    scale: usize,
    n_runs: usize,
    settings: &FitSettings,
) -> Result<ImportanceReport> {
    if n_runs == 0 {
        return Err(Error::InvalidParameter("importance needs at least one run".into()));
    }
    settings.validate()?;
    let t = settings.resolve_t(ds)?;
    let eps = kernel::KernelParams::new(t, settings.p, scale)?.epsilon();
    let g = kernel::gram_sym(ds.sites.as_ref(), eps)?;
    let l = basis::numerical_rank(g.as_ref(), settings.delta)?;
    let mut histogram = vec![[0u32; 3]; ds.n()];
    let mut ranking = Vec::new();
    for run in 0..n_runs {
        let run_settings = FitSettings {
            seed: settings.seed.wrapping_add(run as u64),
            ..settings.clone()
        };
        let sel = basis::select_basis(g.as_ref(), l, settings.k_oversample, run_settings.scale_seed(scale))?;
        for (k, &site) in sel.selected().iter().take(3).enumerate() {
            histogram[site][k] += 1;
        }
        if run == 0 {
            ranking = sel.selected().to_vec();
        }
    }
    Ok(ImportanceReport {
        scale,
        rank: l,
        ranking,
        histogram,
        n_runs,
    })
}

/// Saves a bound table to a file.
pub fn save_bound_csv(rows: &[BoundRow], path: impl AsRef<Path>) -> Result<()> {
    write_bound_csv(rows, std::fs::File::create(path)?)
}
