//! Per-scale basis selection.
//!
//! The numerical rank `l` of the Gram matrix fixes how many columns to keep.
//! A Gaussian sketch `W = A G` (with `k = l + oversample` rows) is factored by
//! column-pivoted QR; the first `l` pivots name both the kept Gram columns and
//! the sparse sites, since column `i` of a symmetric Gram matrix belongs to
//! site `i`.

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::all_finite;
use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg;

/// Default relative singular-value threshold for the numerical rank.
pub const DEFAULT_DELTA: f64 = 1e-10;
/// Default number of extra sketch rows.
pub const DEFAULT_OVERSAMPLE: usize = 8;

#[derive(Debug, Clone)]
pub struct BasisSelection {
    pub rank: usize,
    /// Full column permutation from the pivoted QR; the first `rank` entries
    /// are the selected columns in selection order.
    pub pivot_order: Vec<usize>,
    /// `n × rank` matrix whose column `j` is Gram column `pivot_order[j]`.
    pub basis: Mat<f64>,
}

impl BasisSelection {
    pub fn selected(&self) -> &[usize] {
        &self.pivot_order[..self.rank]
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Number of singular values with `σ_j / σ_max >= delta`.
pub fn numerical_rank(g: MatRef<'_, f64>, delta: f64) -> Result<usize> {
    check_delta(delta)?;
    let s = linalg::singular_values(g)?;
    Ok(count_above(&s, delta))
}

fn count_above(sorted_desc: &[f64], delta: f64) -> usize {
    match sorted_desc.first() {
        Some(&top) if top > 0.0 => sorted_desc.iter().filter(|&&v| v / top >= delta).count(),
        _ => 0,
    }
}

/// Standard-normal `k × n` test matrix drawn row by row from a seeded
/// ChaCha8 stream.
pub fn gaussian_matrix(k: usize, n: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..k * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Mat::from_fn(k, n, |i, j| vals[i * n + j])
}

/// `W = A G` with `A` the seeded Gaussian test matrix.
pub fn sketch(g: MatRef<'_, f64>, k: usize, seed: u64) -> Result<Mat<f64>> {
    let n = g.nrows();
    if k > n {
        return Err(Error::SketchTooLarge { k, n });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("sketch needs at least one row".into()));
    }
    if !all_finite(g) {
        return Err(Error::NonFinite("gram"));
    }
    let a = gaussian_matrix(k, n, seed);
    Ok(a * g)
}

/// Picks `l` Gram columns through the sketch and pivoted QR.
pub fn select_basis(
    g: MatRef<'_, f64>,
    l: usize,
    k_oversample: usize,
    seed: u64,
) -> Result<BasisSelection> {
    let n = g.ncols();
    if l == 0 || l > n {
        return Err(Error::InvalidParameter(format!("rank {l} outside 1..={n}")));
    }
    let k = n.min(l + k_oversample);
    let w = sketch(g, k, seed)?;
    let pivot_order = linalg::pivoted_qr_order(w.as_ref())?;
    let basis = Mat::from_fn(g.nrows(), l, |i, j| g[(i, pivot_order[j])]);
    Ok(BasisSelection {
        rank: l,
        pivot_order,
        basis,
    })
}

/// Numerical ranks of the Gram matrices at scales `0..=max_scale`, stopping
/// early once full rank is reached.
pub fn rank_profile(
    sites: MatRef<'_, f64>,
    t: f64,
    p: f64,
    delta: f64,
    max_scale: usize,
) -> Result<Vec<usize>> {
    let n = sites.nrows();
    let mut ranks = Vec::new();
    for s in 0..=max_scale {
        let g = kernel::gram_sym(sites, kernel::epsilon(t, p, s))?;
        let r = numerical_rank(g.as_ref(), delta)?;
        ranks.push(r);
        if r == n {
            break;
        }
    }
    Ok(ranks)
}

/// First scale at which the Gram matrix is numerically full rank.
pub fn critical_scale(
    sites: MatRef<'_, f64>,
    t: f64,
    p: f64,
    delta: f64,
    max_scale: usize,
) -> Result<Option<usize>> {
    let ranks = rank_profile(sites, t, p, delta, max_scale)?;
    Ok(ranks.iter().position(|&r| r == sites.nrows()))
}
