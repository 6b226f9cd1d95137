//! The hierarchical fitting loop.
//!
//! Scales are visited coarse to fine. At each scale the Gram matrix is built,
//! its numerical rank fixes the basis size, a sketch plus pivoted QR picks the
//! basis columns, and the data are projected onto them. The first scale whose
//! residual 2-norm meets the tolerance is the convergence scale.
//!
//! All quantities are in normalized units; pass a dataset produced by
//! [`Dataset::normalize`] (or one that is already scaled as desired).

use std::fmt;
use std::io::Write;
use std::path::Path;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::basis::{self, DEFAULT_DELTA, DEFAULT_OVERSAMPLE};
use crate::data::{check_dim, fmt_real, select_rows, Dataset, NormalizationInfo};
use crate::error::{Error, Result};
use crate::kernel::{self, EvalCounter, KernelParams};
use crate::linalg::{dot2, LeastSquares};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Stopping tolerance on the residual 2-norm; `f64::INFINITY` stops at
    /// scale 0.
    #[serde(with = "crate::real::opt_finite")]
    pub tol: f64,
    pub p: f64,
    /// Base length scale; `None` uses [`kernel::default_t`].
    pub t: Option<f64>,
    pub delta: f64,
    pub k_oversample: usize,
    pub seed: u64,
    pub max_scale: usize,
    pub stop_patience: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            tol: 1e-2,
            p: 2.0,
            t: None,
            delta: DEFAULT_DELTA,
            k_oversample: DEFAULT_OVERSAMPLE,
            seed: 7,
            max_scale: 25,
            stop_patience: 2,
        }
    }
}

impl FitSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "TOL must be non-negative, got {}",
                self.tol
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.stop_patience == 0 {
            return Err(Error::InvalidParameter("stop_patience must be at least 1".into()));
        }
        KernelParams::new(self.t.unwrap_or(1.0), self.p, 0)?;
        Ok(())
    }

    /// Sketch seed used at scale `s`.
    pub fn scale_seed(&self, s: usize) -> u64 {
        self.seed.wrapping_add(s as u64)
    }

    /// Resolved base length scale for a dataset.
    pub fn resolve_t(&self, ds: &Dataset) -> Result<f64> {
        match self.t {
            Some(t) => Ok(t),
            None => kernel::default_t(ds),
        }
    }
}

/// Least-squares coefficients and fitted values for one basis.
#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: Vec<f64>,
    pub fitted: Vec<f64>,
}

/// `C = B† f` through a thin QR of `B`, with `fitted = B C`.
pub fn project(b: MatRef<'_, f64>, f: &[f64]) -> Result<Projection> {
    check_dim(b.nrows(), f.len())?;
    let ls = LeastSquares::new(b)?;
    Ok(project_with(&ls, b, f))
}

pub(crate) fn project_with(ls: &LeastSquares, b: MatRef<'_, f64>, f: &[f64]) -> Projection {
    let coeffs = ls.solve(f);
    let fitted = matvec(b, &coeffs);
    Projection { coeffs, fitted }
}

pub(crate) fn matvec(m: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| dot2((0..m.ncols()).map(|j| (m[(i, j)], v[j]))))
        .collect()
}

pub(crate) fn residual(f: &[f64], fitted: &[f64]) -> Vec<f64> {
    f.iter().zip(fitted).map(|(a, b)| a - b).collect()
}

pub fn norm2(v: &[f64]) -> f64 {
    crate::linalg::norm2(v)
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone)]
pub struct ScaleRecord {
    pub s: usize,
    pub epsilon: f64,
    pub rank: usize,
    pub pivot_order: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_2norm: f64,
    pub residual_inf_norm: f64,
    pub sampled_fraction: f64,
}

impl ScaleRecord {
    pub fn selected(&self) -> &[usize] {
        &self.pivot_order[..self.rank]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalStatus {
    Converged,
    CriticalScaleExhausted,
    MaxScaleCap,
}

impl fmt::Display for TerminalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerminalStatus::Converged => "converged",
            TerminalStatus::CriticalScaleExhausted => "critical-scale-exhausted",
            TerminalStatus::MaxScaleCap => "max-scale-cap",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct FitTrace {
    pub records: Vec<ScaleRecord>,
    pub critical_scale_reached: bool,
    pub terminal_status: TerminalStatus,
    pub t: f64,
    pub p: f64,
}

impl FitTrace {
    pub fn last(&self) -> &ScaleRecord {
        self.records.last().expect("trace has at least one scale")
    }

    /// First scale whose Gram matrix was numerically full rank.
    pub fn critical_scale(&self) -> Option<usize> {
        let n = self.last().residual.len();
        self.records.iter().find(|r| r.rank == n).map(|r| r.s)
    }

    pub fn record(&self, s: usize) -> Option<&ScaleRecord> {
        self.records.iter().find(|r| r.s == s)
    }

    /// One row per scale: `s, epsilon, rank, sampled_fraction,
    /// residual_2norm, residual_inf_norm, selected`, the last column listing
    /// selected site indices in pivot order separated by spaces.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "s",
            "epsilon",
            "rank",
            "sampled_fraction",
            "residual_2norm",
            "residual_inf_norm",
            "selected",
        ])?;
        for r in &self.records {
            let sel: Vec<String> = r.selected().iter().map(|i| i.to_string()).collect();
            w.write_record([
                r.s.to_string(),
                fmt_real(r.epsilon),
                r.rank.to_string(),
                fmt_real(r.sampled_fraction),
                fmt_real(r.residual_2norm),
                fmt_real(r.residual_inf_norm),
                sel.join(" "),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Runs the hierarchical loop and returns the model at the terminal scale.
pub fn fit(ds: &Dataset, settings: &FitSettings) -> Result<(HierModel, FitTrace)> {
    let trace = fit_trace(ds, settings)?;
    let model = HierModel::from_record(ds, settings, &trace, trace.last())?;
    Ok((model, trace))
}

/// The scale loop without building a model.
pub fn fit_trace(ds: &Dataset, settings: &FitSettings) -> Result<FitTrace> {
    settings.validate()?;
    let t = settings.resolve_t(ds)?;
    let params = KernelParams::new(t, settings.p, 0)?;
    let n = ds.n();
    let mut records = Vec::new();
    let mut full_rank_run = 0;
    let mut status = TerminalStatus::MaxScaleCap;
    for s in 0..=settings.max_scale {
        let eps = params.at_scale(s).epsilon();
        let rec = fit_scale(ds, s, eps, settings)?;
        let (r2, l) = (rec.residual_2norm, rec.rank);
        records.push(rec);
        if r2 <= settings.tol {
            status = TerminalStatus::Converged;
            break;
        }
        if l == n {
            full_rank_run += 1;
            if full_rank_run >= settings.stop_patience {
                status = TerminalStatus::CriticalScaleExhausted;
                break;
            }
        } else {
            full_rank_run = 0;
        }
    }
    let critical_scale_reached = records.iter().any(|r| r.rank == n);
    Ok(FitTrace {
        records,
        critical_scale_reached,
        terminal_status: status,
        t,
        p: settings.p,
    })
}

/// Basis selection and projection at a single scale.
pub fn fit_scale(ds: &Dataset, s: usize, eps: f64, settings: &FitSettings) -> Result<ScaleRecord> {
    let n = ds.n();
    let g = kernel::gram_sym(ds.sites.as_ref(), eps)?;
    let l = basis::numerical_rank(g.as_ref(), settings.delta)?;
    let sel = basis::select_basis(g.as_ref(), l, settings.k_oversample, settings.scale_seed(s))?;
    drop(g);
    let proj = project(sel.basis.as_ref(), &ds.values)?;
    let res = residual(&ds.values, &proj.fitted);
    Ok(ScaleRecord {
        s,
        epsilon: eps,
        rank: l,
        pivot_order: sel.pivot_order,
        coeffs: proj.coeffs,
        fitted: proj.fitted,
        residual_2norm: norm2(&res),
        residual_inf_norm: norm_inf(&res),
        residual: res,
        sampled_fraction: l as f64 / n as f64,
    })
}

/// The sparse representation: selected sites and coefficients at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct HierModel {
    pub scale: usize,
    pub epsilon: f64,
    pub t: f64,
    pub p: f64,
    /// Selected sites in normalized coordinates, `l × d`.
    pub sites: Mat<f64>,
    /// Row indices of `sites` in the training data.
    pub indices: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub normalization: NormalizationInfo,
    pub n_train: usize,
    pub residual_2norm: f64,
    pub sampled_fraction: f64,
    pub settings: FitSettings,
}

impl HierModel {
    pub fn from_record(
        ds: &Dataset,
        settings: &FitSettings,
        trace: &FitTrace,
        rec: &ScaleRecord,
    ) -> Result<Self> {
        let indices = rec.selected().to_vec();
        Ok(Self {
            scale: rec.s,
            epsilon: rec.epsilon,
            t: trace.t,
            p: trace.p,
            sites: select_rows(ds.sites.as_ref(), &indices),
            indices,
            coeffs: rec.coeffs.clone(),
            normalization: ds.normalization.clone(),
            n_train: ds.n(),
            residual_2norm: rec.residual_2norm,
            sampled_fraction: rec.sampled_fraction,
            settings: settings.clone(),
        })
    }

    pub fn d(&self) -> usize {
        self.sites.ncols()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `G*(at, X_sparse) C` for sites already in normalized units.
    pub fn reconstruct_normalized(&self, at: MatRef<'_, f64>) -> Result<Vec<f64>> {
        self.reconstruct_normalized_counted(at, &mut EvalCounter::default())
    }

    pub fn reconstruct_normalized_counted(
        &self,
        at: MatRef<'_, f64>,
        counter: &mut EvalCounter,
    ) -> Result<Vec<f64>> {
        check_dim(self.d(), at.ncols())?;
        let g = kernel::gram_counted(at, self.sites.as_ref(), self.epsilon, counter)?;
        Ok(matvec(g.as_ref(), &self.coeffs))
    }

    /// Reconstruction at raw sites, returned in raw units.
    pub fn reconstruct(&self, at: MatRef<'_, f64>) -> Result<Vec<f64>> {
        let z = self.normalization.normalize_sites(at)?;
        let v = self.reconstruct_normalized(z.as_ref())?;
        Ok(v
            .into_iter()
            .map(|x| self.normalization.denormalize_value(x))
            .collect())
    }

    /// Selected sites in raw units.
    pub fn raw_sites(&self) -> Mat<f64> {
        self.normalization
            .denormalize_sites(self.sites.as_ref())
            .expect("model sites match normalization")
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION,
            d: self.d(),
            t: self.t,
            p: self.p,
            s_a: self.scale,
            epsilon: self.epsilon,
            delta: self.settings.delta,
            seed: self.settings.seed,
            sites: (0..self.sites.nrows())
                .map(|i| (0..self.d()).map(|k| self.sites[(i, k)]).collect())
                .collect(),
            coeffs: self.coeffs.clone(),
            normalization: self.normalization.clone(),
            indices: self.indices.clone(),
            n_train: self.n_train,
            residual_2norm: self.residual_2norm,
            sampled_fraction: self.sampled_fraction,
            k_oversample: self.settings.k_oversample,
            config: self.settings.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.version != MODEL_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model version {}",
                f.version
            )));
        }
        let l = f.coeffs.len();
        check_dim(l, f.sites.len())?;
        check_dim(l, f.indices.len())?;
        check_dim(f.d, f.normalization.axis_scales.len())?;
        for row in &f.sites {
            check_dim(f.d, row.len())?;
        }
        let finite = f.sites.iter().flatten().chain(&f.coeffs).all(|v| v.is_finite());
        if !finite || !(f.epsilon > 0.0) {
            return Err(Error::NonFinite("model"));
        }
        let mut config = f.config;
        config.delta = f.delta;
        config.seed = f.seed;
        config.k_oversample = f.k_oversample;
        Ok(Self {
            scale: f.s_a,
            epsilon: f.epsilon,
            t: f.t,
            p: f.p,
            sites: Mat::from_fn(l, f.d, |i, k| f.sites[i][k]),
            indices: f.indices,
            coeffs: f.coeffs,
            normalization: f.normalization,
            n_train: f.n_train,
            residual_2norm: f.residual_2norm,
            sampled_fraction: f.sampled_fraction,
            settings: config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    d: usize,
    #[serde(rename = "T", serialize_with = "crate::real::ser")]
    t: f64,
    #[serde(rename = "P", serialize_with = "crate::real::ser")]
    p: f64,
    #[serde(rename = "S_a")]
    s_a: usize,
    #[serde(serialize_with = "crate::real::ser")]
    epsilon: f64,
    #[serde(serialize_with = "crate::real::ser")]
    delta: f64,
    seed: u64,
    #[serde(serialize_with = "crate::real::ser_rows")]
    sites: Vec<Vec<f64>>,
    #[serde(serialize_with = "crate::real::ser_vec")]
    coeffs: Vec<f64>,
    #[serde(serialize_with = "crate::real::ser_norm")]
    normalization: NormalizationInfo,
    indices: Vec<usize>,
    n_train: usize,
    #[serde(serialize_with = "crate::real::ser")]
    residual_2norm: f64,
    #[serde(serialize_with = "crate::real::ser")]
    sampled_fraction: f64,
    k_oversample: usize,
    config: FitSettings,
}

/// The basis, factorization and projection of the training data at one
/// scale, rebuilt from the selected indices.
///
/// Rebuilding follows the same arithmetic as the fit, so coefficients and
/// fitted values agree bit for bit with the trace.
#[derive(Debug, Clone)]
pub struct ScaleFit<'a> {
    pub data: &'a Dataset,
    pub scale: usize,
    pub epsilon: f64,
    pub selected: Vec<usize>,
    pub basis: Mat<f64>,
    pub ls: LeastSquares,
    pub coeffs: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residual: Vec<f64>,
}

impl<'a> ScaleFit<'a> {
    pub fn new(data: &'a Dataset, scale: usize, epsilon: f64, selected: Vec<usize>) -> Result<Self> {
        if selected.iter().any(|&i| i >= data.n()) {
            return Err(Error::InvalidParameter("selected index out of range".into()));
        }
        let sparse = select_rows(data.sites.as_ref(), &selected);
        let basis = kernel::gram(data.sites.as_ref(), sparse.as_ref(), epsilon)?;
        let ls = LeastSquares::new(basis.as_ref())?;
        let proj = project_with(&ls, basis.as_ref(), &data.values);
        let residual = residual(&data.values, &proj.fitted);
        Ok(Self {
            data,
            scale,
            epsilon,
            selected,
            basis,
            ls,
            coeffs: proj.coeffs,
            fitted: proj.fitted,
            residual,
        })
    }

    pub fn from_record(data: &'a Dataset, rec: &ScaleRecord) -> Result<Self> {
        Self::new(data, rec.s, rec.epsilon, rec.selected().to_vec())
    }

    /// `data` must be the normalized training set the model was fit on.
    pub fn from_model(data: &'a Dataset, model: &HierModel) -> Result<Self> {
        check_dim(model.n_train, data.n())?;
        check_dim(model.d(), data.d())?;
        Self::new(data, model.scale, model.epsilon, model.indices.clone())
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn rank(&self) -> usize {
        self.selected.len()
    }

    pub fn residual_2norm(&self) -> f64 {
        norm2(&self.residual)
    }

    pub fn sparse_sites(&self) -> Mat<f64> {
        select_rows(self.data.sites.as_ref(), &self.selected)
    }

    /// Rows `b*` of the basis evaluated at normalized sites, `m × l`.
    pub fn eval_basis(&self, at: MatRef<'_, f64>) -> Result<Mat<f64>> {
        kernel::gram(at, self.sparse_sites().as_ref(), self.epsilon)
    }

    pub fn reconstruct(&self, at: MatRef<'_, f64>) -> Result<Vec<f64>> {
        check_dim(self.data.d(), at.ncols())?;
        Ok(matvec(self.eval_basis(at)?.as_ref(), &self.coeffs))
    }
}
