//! Dense factorization helpers: singular spectra, column-pivoted Householder
//! QR, and a thin-QR least-squares solver.

use faer::linalg::triangular_solve::solve_upper_triangular_in_place;
use faer::{Mat, MatRef, Par, Side};

use crate::data::all_finite;
use crate::error::{Error, Result};

/// Singular values in non-increasing order.
///
/// For an exactly symmetric matrix the singular values are the absolute
/// eigenvalues, which a symmetric eigensolver produces several times faster
/// than a general SVD.
pub fn singular_values(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if !all_finite(m) {
        return Err(Error::NonFinite("matrix"));
    }
    let mut s = if is_symmetric(m) {
        m.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Decomposition(format!("{e:?}")))?
            .into_iter()
            .map(f64::abs)
            .collect::<Vec<_>>()
    } else {
        general_singular_values(m)?
    };
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Singular values through a general SVD, never the symmetric shortcut.
pub fn general_singular_values(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if !all_finite(m) {
        return Err(Error::NonFinite("matrix"));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = m
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn is_symmetric(m: MatRef<'_, f64>) -> bool {
    let n = m.nrows();
    n == m.ncols() && (0..n).all(|j| ((j + 1)..n).all(|i| m[(i, j)] == m[(j, i)]))
}

/// Column order produced by Householder QR with column pivoting.
///
/// At each step the remaining column with the largest residual norm is moved
/// forward (ties go to the leftmost current position). Residual norms are
/// downdated and recomputed when cancellation makes the downdate unreliable.
/// Returns a full permutation of `0..ncols`; only the first `min(m, n)`
/// entries are pivot decisions.
pub fn pivoted_qr_order(w: MatRef<'_, f64>) -> Result<Vec<usize>> {
    if !all_finite(w) {
        return Err(Error::NonFinite("sketch"));
    }
    let (m, n) = (w.nrows(), w.ncols());
    let mut a = vec![0.0f64; m * n];
    for j in 0..n {
        for i in 0..m {
            a[j * m + i] = w[(i, j)];
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| norm2(&a[j * m..(j + 1) * m])).collect();
    let mut ref_norms = norms.clone();
    let tol = f64::EPSILON.sqrt();

    for j in 0..m.min(n) {
        let mut p = j;
        for c in (j + 1)..n {
            if norms[c] > norms[p] {
                p = c;
            }
        }
        if p != j {
            for i in 0..m {
                a.swap(j * m + i, p * m + i);
            }
            perm.swap(j, p);
            norms.swap(j, p);
            ref_norms.swap(j, p);
        }

        let (head, tail) = a.split_at_mut((j + 1) * m);
        let v = &mut head[j * m + j..(j + 1) * m];
        let tau = householder(v);
        if tau != 0.0 {
            for c in 0..(n - j - 1) {
                let col = &mut tail[c * m + j..(c + 1) * m];
                let mut dot = col[0];
                for i in 1..v.len() {
                    dot += v[i] * col[i];
                }
                dot *= tau;
                col[0] -= dot;
                for i in 1..v.len() {
                    col[i] -= dot * v[i];
                }
            }
        }
        for c in (j + 1)..n {
            if norms[c] == 0.0 {
                continue;
            }
            let col = &tail[(c - j - 1) * m..(c - j) * m];
            let ratio = col[j].abs() / norms[c];
            let shrink = (1.0 - ratio * ratio).max(0.0);
            let drift = shrink * (norms[c] / ref_norms[c]).powi(2);
            if drift <= tol {
                norms[c] = norm2(&col[j + 1..]);
                ref_norms[c] = norms[c];
            } else {
                norms[c] *= shrink.sqrt();
            }
        }
    }
    Ok(perm)
}

/// Overwrites `x` with the Householder vector (implicit leading 1 stored as
/// beta) and returns tau, so that `(I - tau v vᵀ) x = beta e1`.
fn householder(x: &mut [f64]) -> f64 {
    let alpha = x[0];
    let xnorm = norm2(&x[1..]);
    if xnorm == 0.0 {
        return 0.0;
    }
    let beta = -alpha.signum() * alpha.hypot(xnorm);
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for xi in &mut x[1..] {
        *xi *= scale;
    }
    x[0] = beta;
    tau
}

/// Dot product accumulated in twice the working precision.
///
/// Products are split exactly with a fused multiply-add and the running sum
/// carries its rounding error, so the result is as accurate as if computed
/// in quadruple precision and then rounded.
pub fn dot2(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (a, b) in pairs {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let t = s + p;
        let z = t - s;
        let se = (s - (t - z)) + (p - z);
        s = t;
        c += se + pe;
    }
    s + c
}

/// Overflow-safe Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

/// Thin QR factorization `B = Q R` of a tall full-column-rank matrix, used
/// for every least-squares solve and every `(BᵀB)⁻¹` quadratic form.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: Mat<f64>,
    r: Mat<f64>,
}

impl LeastSquares {
    pub fn new(b: MatRef<'_, f64>) -> Result<Self> {
        let (n, l) = (b.nrows(), b.ncols());
        if l == 0 || l > n {
            return Err(Error::InvalidParameter(format!(
                "least squares needs 1 <= columns <= rows, got {n} x {l}"
            )));
        }
        if !all_finite(b) {
            return Err(Error::NonFinite("basis"));
        }
        let qr = b.qr();
        let q = qr.compute_thin_Q();
        let r = qr.thin_R().to_owned();
        let dmax = (0..l).fold(0.0f64, |m, j| m.max(r[(j, j)].abs()));
        let floor = f64::EPSILON * n as f64 * dmax;
        if let Some(column) = (0..l).find(|&j| r[(j, j)].abs() <= floor) {
            return Err(Error::RankDeficient { column });
        }
        Ok(Self { q, r })
    }

    pub fn rows(&self) -> usize {
        self.q.nrows()
    }

    pub fn cols(&self) -> usize {
        self.r.ncols()
    }

    /// Least-squares coefficients `argmin |f - B c|`.
    pub fn solve(&self, f: &[f64]) -> Vec<f64> {
        let qtf = self.qt_apply(f);
        self.r_solve(qtf)
    }

    /// `Qᵀ v`.
    pub fn qt_apply(&self, v: &[f64]) -> Vec<f64> {
        let (n, l) = (self.rows(), self.cols());
        (0..l)
            .map(|j| dot2((0..n).map(|i| (self.q[(i, j)], v[i]))))
            .collect()
    }

    /// `Q v` for `v` of length `l`.
    pub fn q_apply(&self, v: &[f64]) -> Vec<f64> {
        let (n, l) = (self.rows(), self.cols());
        (0..n)
            .map(|i| dot2((0..l).map(|j| (self.q[(i, j)], v[j]))))
            .collect()
    }

    /// Back substitution `R x = y`.
    pub fn r_solve(&self, mut y: Vec<f64>) -> Vec<f64> {
        let l = self.cols();
        for j in (0..l).rev() {
            let acc = dot2(std::iter::once((y[j], 1.0)).chain(((j + 1)..l).map(|k| (-self.r[(j, k)], y[k]))));
            y[j] = acc / self.r[(j, j)];
        }
        y
    }

    /// Forward substitution `Rᵀ z = v`.
    pub fn rt_solve(&self, mut v: Vec<f64>) -> Vec<f64> {
        let l = self.cols();
        for j in 0..l {
            let acc = dot2(std::iter::once((v[j], 1.0)).chain((0..j).map(|i| (-self.r[(i, j)], v[i]))));
            v[j] = acc / self.r[(j, j)];
        }
        v
    }

    /// `bᵀ (BᵀB)⁻¹ b = |R⁻ᵀ b|²`.
    pub fn quad_form(&self, b: &[f64]) -> f64 {
        self.rt_solve(b.to_vec()).iter().map(|z| z * z).sum()
    }

    /// `B (BᵀB)⁻¹ r = Q R⁻ᵀ r`, i.e. `(B†)ᵀ r`.
    pub fn pinv_t_apply(&self, r: &[f64]) -> Vec<f64> {
        self.q_apply(&self.rt_solve(r.to_vec()))
    }

    /// The pseudo-inverse `B† = R⁻¹ Qᵀ` as an `l × n` matrix.
    pub fn pinv(&self) -> Mat<f64> {
        let mut out = self.q.transpose().to_owned();
        solve_upper_triangular_in_place(self.r.as_ref(), out.as_mut(), Par::Seq);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(m: usize, n: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        Mat::from_fn(m, n, |i, j| vals[i * n + j])
    }

    #[test]
    fn symmetric_shortcut_matches_svd() {
        let a = random(12, 12, 3);
        let s = &a * a.transpose();
        let fast = singular_values(s.as_ref()).unwrap();
        let slow = general_singular_values(s.as_ref()).unwrap();
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() <= 1e-12 * slow[0]);
        }
    }

    #[test]
    fn pivot_order_is_permutation_and_greedy() {
        let w = random(5, 9, 1);
        let order = pivoted_qr_order(w.as_ref()).unwrap();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..9).collect::<Vec<_>>());
        // first pivot is the column of largest norm
        let norms: Vec<f64> = (0..9)
            .map(|j| (0..5).map(|i| w[(i, j)].powi(2)).sum::<f64>())
            .collect();
        let best = (0..9).max_by(|&a, &b| norms[a].total_cmp(&norms[b])).unwrap();
        assert_eq!(order[0], best);
    }

    /// Brute-force greedy selection: at every step pick the column with the
    /// largest residual after projecting out the already chosen columns.
    fn greedy_oracle(w: &Mat<f64>, steps: usize) -> Vec<usize> {
        let (m, n) = (w.nrows(), w.ncols());
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut chosen = Vec::new();
        for _ in 0..steps {
            let mut best = (0usize, -1.0f64);
            for c in 0..n {
                if chosen.contains(&c) {
                    continue;
                }
                let mut v: Vec<f64> = (0..m).map(|i| w[(i, c)]).collect();
                for q in &basis {
                    let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                    for i in 0..m {
                        v[i] -= d * q[i];
                    }
                }
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if nv > best.1 {
                    best = (c, nv);
                }
            }
            let c = best.0;
            let mut v: Vec<f64> = (0..m).map(|i| w[(i, c)]).collect();
            for q in &basis {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for i in 0..m {
                    v[i] -= d * q[i];
                }
            }
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            basis.push(v.into_iter().map(|x| x / nv).collect());
            chosen.push(c);
        }
        chosen
    }

    #[test]
    fn pivot_order_matches_greedy_gram_schmidt() {
        for seed in 0..5 {
            let w = random(6, 15, 100 + seed);
            let order = pivoted_qr_order(w.as_ref()).unwrap();
            assert_eq!(&order[..6], &greedy_oracle(&w, 6)[..], "seed {seed}");
        }
    }

    #[test]
    fn least_squares_identity() {
        let b = Mat::<f64>::identity(4, 4);
        let ls = LeastSquares::new(b.as_ref()).unwrap();
        let f = [1.0, -2.0, 3.5, 0.25];
        let c = ls.solve(&f);
        for (x, y) in c.iter().zip(&f) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn least_squares_rejects_duplicate_columns() {
        let b = Mat::from_fn(5, 2, |i, _| i as f64 + 1.0);
        assert!(matches!(LeastSquares::new(b.as_ref()), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn quad_form_matches_normal_equations() {
        let b = random(20, 4, 9);
        let ls = LeastSquares::new(b.as_ref()).unwrap();
        let x = [0.3, -1.0, 2.0, 0.5];
        // (BᵀB)⁻¹ x via the explicit 4x4 inverse (Gauss-Jordan)
        let btb = b.transpose() * &b;
        let mut aug: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..8).map(|j| if j < 4 { btb[(i, j)] } else if j - 4 == i { 1.0 } else { 0.0 }).collect())
            .collect();
        for c in 0..4 {
            let piv = (c..4).max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs())).unwrap();
            aug.swap(c, piv);
            let d = aug[c][c];
            for v in aug[c].iter_mut() {
                *v /= d;
            }
            for r in 0..4 {
                if r != c {
                    let f = aug[r][c];
                    for k in 0..8 {
                        aug[r][k] -= f * aug[c][k];
                    }
                }
            }
        }
        let mut q = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                q += x[i] * aug[i][j + 4] * x[j];
            }
        }
        assert!((ls.quad_form(&x) - q).abs() <= 1e-12 * q.abs());
    }

    #[test]
    fn pinv_times_basis_is_identity() {
        let b = random(10, 3, 4);
        let ls = LeastSquares::new(b.as_ref()).unwrap();
        let p = ls.pinv();
        let id = &p * &b;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}
