//! Residual cascade: each scale fits what the previous scales left over and
//! prediction sums every stage.
//!
//! Basis selection is the same as in [`crate::hierfit`] (same rank rule,
//! sketch seeds and pivoting), so comparisons isolate the scheme itself.

use std::io::Write;
use std::time::Instant;

use faer::{Mat, MatRef};

use crate::basis;
use crate::data::{check_dim, fmt_real, select_rows, Dataset, NormalizationInfo};
use crate::error::Result;
use crate::hierfit::{self, matvec, norm2, norm_inf, project, FitSettings, HierModel, TerminalStatus};
use crate::kernel::{self, EvalCounter, KernelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub s: usize,
    pub epsilon: f64,
    pub indices: Vec<usize>,
    pub sites: Mat<f64>,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub stages: Vec<Stage>,
    pub normalization: NormalizationInfo,
}

#[derive(Debug, Clone)]
pub struct CascadeRecord {
    pub s: usize,
    pub rank: usize,
    pub residual_2norm: f64,
    pub residual_inf_norm: f64,
    pub cumulative_sites: usize,
}

#[derive(Debug, Clone)]
pub struct CascadeTrace {
    pub records: Vec<CascadeRecord>,
    pub terminal_status: TerminalStatus,
    /// Sum of all stage fits at the training sites.
    pub fitted: Vec<f64>,
}

impl CascadeModel {
    pub fn terminal_scale(&self) -> usize {
        self.stages.last().map_or(0, |s| s.s)
    }

    pub fn total_sites(&self) -> usize {
        self.stages.iter().map(|s| s.indices.len()).sum()
    }

    pub fn predict_normalized(&self, at: MatRef<'_, f64>) -> Result<Vec<f64>> {
        self.predict_normalized_counted(at, &mut EvalCounter::default())
    }

    /// `Σ_s G(at, X_s) C_s`, counting kernel evaluations.
    pub fn predict_normalized_counted(
        &self,
        at: MatRef<'_, f64>,
        counter: &mut EvalCounter,
    ) -> Result<Vec<f64>> {
        check_dim(self.normalization.axis_scales.len(), at.ncols())?;
        let mut out = vec![0.0; at.nrows()];
        for st in &self.stages {
            let g = kernel::gram_counted(at, st.sites.as_ref(), st.epsilon, counter)?;
            for (o, v) in out.iter_mut().zip(matvec(g.as_ref(), &st.coeffs)) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// Prediction at raw sites in raw units.
    pub fn predict(&self, at: MatRef<'_, f64>) -> Result<Vec<f64>> {
        let z = self.normalization.normalize_sites(at)?;
        Ok(self
            .predict_normalized(z.as_ref())?
            .into_iter()
            .map(|v| self.normalization.denormalize_value(v))
            .collect())
    }
}

/// Fits the cascade until the cumulative residual 2-norm is at most
/// `settings.tol`, using the same caps as the hierarchical fit.
pub fn fit_cascade(ds: &Dataset, settings: &FitSettings) -> Result<(CascadeModel, CascadeTrace)> {
    settings.validate()?;
    let t = settings.resolve_t(ds)?;
    let params = KernelParams::new(t, settings.p, 0)?;
    let n = ds.n();
    let mut target = ds.values.clone();
    let mut total = vec![0.0; n];
    let mut stages = Vec::new();
    let mut records = Vec::new();
    let mut cumulative = 0;
    let mut full_rank_run = 0;
    let mut status = TerminalStatus::MaxScaleCap;
    for s in 0..=settings.max_scale {
        let eps = params.at_scale(s).epsilon();
        let g = kernel::gram_sym(ds.sites.as_ref(), eps)?;
        let l = basis::numerical_rank(g.as_ref(), settings.delta)?;
        let sel = basis::select_basis(g.as_ref(), l, settings.k_oversample, settings.scale_seed(s))?;
        drop(g);
        let proj = project(sel.basis.as_ref(), &target)?;
        for i in 0..n {
            target[i] -= proj.fitted[i];
            total[i] += proj.fitted[i];
        }
        let indices = sel.selected().to_vec();
        cumulative += l;
        let r2 = norm2(&target);
        records.push(CascadeRecord {
            s,
            rank: l,
            residual_2norm: r2,
            residual_inf_norm: norm_inf(&target),
            cumulative_sites: cumulative,
        });
        stages.push(Stage {
            s,
            epsilon: eps,
            sites: select_rows(ds.sites.as_ref(), &indices),
            indices,
            coeffs: proj.coeffs,
        });
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
    let model = CascadeModel {
        stages,
        normalization: ds.normalization.clone(),
    };
    let trace = CascadeTrace {
        records,
        terminal_status: status,
        fitted: total,
    };
    Ok((model, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub s: usize,
    pub err_hier: Option<f64>,
    pub err_cascade: Option<f64>,
    pub sites_hier: Option<usize>,
    pub sites_cascade_cumulative: Option<usize>,
    /// Evaluations to predict the query batch with a model stopped here.
    pub kevals_hier: Option<u64>,
    pub kevals_cascade: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub hier_status: TerminalStatus,
    pub cascade_status: TerminalStatus,
    pub hier_scale: usize,
    pub cascade_scale: usize,
    /// Counted evaluations of the terminal models on the query batch.
    pub kevals_hier: u64,
    pub kevals_cascade: u64,
    pub seconds_hier: f64,
    pub seconds_cascade: f64,
    pub hier_model: HierModel,
    pub cascade_model: CascadeModel,
}

impl ComparisonReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "scale",
            "err_hier",
            "err_cascade",
            "sites_hier",
            "sites_cascade_cumulative",
            "kevals_hier",
            "kevals_cascade",
        ])?;
        fn cell<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        for r in &self.rows {
            w.write_record([
                r.s.to_string(),
                r.err_hier.map(fmt_real).unwrap_or_default(),
                r.err_cascade.map(fmt_real).unwrap_or_default(),
                cell(r.sites_hier),
                cell(r.sites_cascade_cumulative),
                cell(r.kevals_hier),
                cell(r.kevals_cascade),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits both schemes with the same settings and times prediction on `query`
/// (normalized sites).
pub fn compare(ds: &Dataset, settings: &FitSettings, query: MatRef<'_, f64>) -> Result<ComparisonReport> {
    let (hier_model, hier_trace) = hierfit::fit(ds, settings)?;
    let (cascade_model, cascade_trace) = fit_cascade(ds, settings)?;
    let m = query.nrows() as u64;
    let scales = hier_trace.records.len().max(cascade_trace.records.len());
    let rows = (0..scales)
        .map(|s| {
            let h = hier_trace.records.get(s);
            let c = cascade_trace.records.get(s);
            ComparisonRow {
                s,
                err_hier: h.map(|r| r.residual_2norm),
                err_cascade: c.map(|r| r.residual_2norm),
                sites_hier: h.map(|r| r.rank),
                sites_cascade_cumulative: c.map(|r| r.cumulative_sites),
                kevals_hier: h.map(|r| m * r.rank as u64),
                kevals_cascade: c.map(|r| m * r.cumulative_sites as u64),
            }
        })
        .collect();

    let mut kh = EvalCounter::default();
    let start = Instant::now();
    hier_model.reconstruct_normalized_counted(query, &mut kh)?;
    let seconds_hier = start.elapsed().as_secs_f64();
    let mut kc = EvalCounter::default();
    let start = Instant::now();
    cascade_model.predict_normalized_counted(query, &mut kc)?;
    let seconds_cascade = start.elapsed().as_secs_f64();

    Ok(ComparisonReport {
        rows,
        hier_status: hier_trace.terminal_status,
        cascade_status: cascade_trace.terminal_status,
        hier_scale: hier_model.scale,
        cascade_scale: cascade_model.terminal_scale(),
        kevals_hier: kh.0,
        kevals_cascade: kc.0,
        seconds_hier,
        seconds_cascade,
        hier_model,
        cascade_model,
    })
}
