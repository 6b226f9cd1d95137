//! Scale-indexed squared-exponential kernel.
//!
//! At scale `s` the kernel is `exp(-|x - y|² / ε_s)` with `ε_s = T / P^s`, so
//! each scale step narrows the basis support by a factor `P`.

use faer::{Mat, MatRef};

use crate::data::{check_dim, Dataset};
use crate::error::{Error, Result};

/// Length-scale schedule `ε_s = T / P^s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub t: f64,
    pub p: f64,
    pub scale: usize,
}

impl KernelParams {
    pub fn new(t: f64, p: f64, scale: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {t}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("P must exceed 1, got {p}")));
        }
        Ok(Self { t, p, scale })
    }

    pub fn epsilon(&self) -> f64 {
        epsilon(self.t, self.p, self.scale)
    }

    pub fn at_scale(&self, scale: usize) -> Self {
        Self { scale, ..*self }
    }
}

pub fn epsilon(t: f64, p: f64, scale: usize) -> f64 {
    t / p.powi(scale as i32)
}

/// `T = 2 (diameter / 2)²`.
pub fn default_t(ds: &Dataset) -> Result<f64> {
    let diam = ds.diameter()?;
    Ok(2.0 * (diam / 2.0).powi(2))
}

#[inline]
pub fn eval(a: &[f64], b: &[f64], eps: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / eps).exp()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("length scale must be positive and finite, got {eps}")))
    }
}

/// Cross-Gram matrix with entry `(i, j) = K(xa_i, xb_j)`.
pub fn gram(xa: MatRef<'_, f64>, xb: MatRef<'_, f64>, eps: f64) -> Result<Mat<f64>> {
    check_dim(xa.ncols(), xb.ncols())?;
    check_eps(eps)?;
    let ra = crate::data::row_vectors(xa);
    let rb = crate::data::row_vectors(xb);
    Ok(Mat::from_fn(xa.nrows(), xb.nrows(), |i, j| eval(&ra[i], &rb[j], eps)))
}

/// Gram matrix of a site set with itself; exactly symmetric.
pub fn gram_sym(x: MatRef<'_, f64>, eps: f64) -> Result<Mat<f64>> {
    check_eps(eps)?;
    let n = x.nrows();
    let rows = crate::data::row_vectors(x);
    let mut g = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        g[(j, j)] = 1.0;
        for i in (j + 1)..n {
            let v = eval(&rows[i], &rows[j], eps);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Running count of kernel evaluations, used to compare prediction cost.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct EvalCounter(pub u64);

impl EvalCounter {
    pub fn add(&mut self, count: usize) {
        self.0 += count as u64;
    }
}

/// [`gram`] that also records `rows × cols` evaluations.
pub fn gram_counted(
    xa: MatRef<'_, f64>,
    xb: MatRef<'_, f64>,
    eps: f64,
    counter: &mut EvalCounter,
) -> Result<Mat<f64>> {
    let g = gram(xa, xb, eps)?;
    counter.add(g.nrows() * g.ncols());
    Ok(g)
}
