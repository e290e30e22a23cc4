//! Dense linear-algebra kernels: LU with partial pivoting, Householder QR,
//! finite-difference Jacobians, and the sum-constrained least-squares
//! subproblem used by the Anderson window.

use crate::error::{Error, Result};
use crate::matrix::{sub_vec, DenseMatrix};

/// Relative pivot threshold below which a factorization is declared singular.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Relative diagonal threshold for dropping stale difference columns in the
/// constrained least-squares solve.
pub const DROP_RTOL: f64 = 1e-10;

/// LU factorization with partial pivoting, packed in a single matrix.
#[derive(Debug, Clone)]
pub struct LUFactors {
    factors: DenseMatrix,
    pivots: Vec<usize>,
}

impl LUFactors {
    pub fn dim(&self) -> usize {
        self.factors.rows()
    }
}

/// Factor a square matrix as P·A = L·U. Fails with `SingularMatrix` when a
/// pivot magnitude falls below `PIVOT_RTOL * max|A|`.
pub fn lu_factor(m: &DenseMatrix) -> Result<LUFactors> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFiniteEvaluation);
    }
    let threshold = PIVOT_RTOL * m.max_abs();
    let mut a = m.clone();
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let mut p = k;
        let mut best = a.get(k, k).abs();
        for i in k + 1..n {
            let v = a.get(i, k).abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= threshold {
            return Err(Error::SingularMatrix);
        }
        if p != k {
            for j in 0..n {
                let tmp = a.get(k, j);
                a.set(k, j, a.get(p, j));
                a.set(p, j, tmp);
            }
        }
        pivots.push(p);
        let pivot = a.get(k, k);
        for i in k + 1..n {
            let l = a.get(i, k) / pivot;
            a.set(i, k, l);
            for j in k + 1..n {
                a.set(i, j, a.get(i, j) - l * a.get(k, j));
            }
        }
    }
    Ok(LUFactors { factors: a, pivots })
}

/// Solve A x = b from a prior factorization.
pub fn lu_solve(f: &LUFactors, b: &[f64]) -> Result<Vec<f64>> {
    let n = f.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut x = b.to_vec();
    for k in 0..n {
        x.swap(k, f.pivots[k]);
    }
    // forward substitution (unit lower-triangular)
    for i in 1..n {
        let mut s = x[i];
        for j in 0..i {
            s -= f.factors.get(i, j) * x[j];
        }
        x[i] = s;
    }
    // back substitution
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= f.factors.get(i, j) * x[j];
        }
        x[i] = s / f.factors.get(i, i);
    }
    Ok(x)
}

/// Householder QR of an n x p matrix, n >= p. Reflectors packed below the
/// diagonal, R on and above it.
#[derive(Debug, Clone)]
pub struct QRFactors {
    packed: DenseMatrix,
    betas: Vec<f64>,
}

impl QRFactors {
    pub fn r_diag(&self) -> Vec<f64> {
        (0..self.betas.len())
            .map(|j| self.packed.get(j, j))
            .collect()
    }

    /// Apply Q^T to a vector in place.
    fn q_transpose_apply(&self, v: &mut [f64]) {
        let n = self.packed.rows();
        for j in 0..self.betas.len() {
            if self.betas[j] == 0.0 {
                continue;
            }
            // reflector v_j = [1, packed[j+1..,j]]
            let mut s = v[j];
            for i in j + 1..n {
                s += self.packed.get(i, j) * v[i];
            }
            s *= self.betas[j];
            v[j] -= s;
            for i in j + 1..n {
                v[i] -= s * self.packed.get(i, j);
            }
        }
    }

    /// Least-squares solution of min ||A x - b||.
    pub fn solve_ls(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.packed.rows();
        let p = self.betas.len();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut v = b.to_vec();
        self.q_transpose_apply(&mut v);
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = v[i];
            for j in i + 1..p {
                s -= self.packed.get(i, j) * x[j];
            }
            let d = self.packed.get(i, i);
            if d == 0.0 {
                return Err(Error::RankDeficient);
            }
            x[i] = s / d;
        }
        Ok(x)
    }

    /// Explicit Q with orthonormal columns (n x n), used by tests.
    pub fn q_explicit(&self) -> DenseMatrix {
        let n = self.packed.rows();
        let mut q = DenseMatrix::identity(n);
        for j in 0..n {
            // Q^T e_j is row j of Q
            let mut col = vec![0.0; n];
            col[j] = 1.0;
            self.q_transpose_apply(&mut col);
            for i in 0..n {
                q.set(j, i, col[i]);
            }
        }
        q
    }
}

/// Householder QR factorization. Requires rows >= cols.
pub fn qr_factor(m: &DenseMatrix) -> Result<QRFactors> {
    let n = m.rows();
    let p = m.cols();
    if n < p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: n,
        });
    }
    let mut a = m.clone();
    let mut betas = vec![0.0; p];
    for j in 0..p {
        let mut norm_sq = 0.0;
        for i in j..n {
            let v = a.get(i, j);
            norm_sq += v * v;
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            betas[j] = 0.0;
            continue;
        }
        let a0 = a.get(j, j);
        let alpha = if a0 >= 0.0 { -norm } else { norm };
        let v0 = a0 - alpha;
        // normalized reflector: first component 1, rest stored below diagonal
        for i in j + 1..n {
            a.set(i, j, a.get(i, j) / v0);
        }
        betas[j] = -v0 / alpha;
        a.set(j, j, alpha);
        // apply reflector to remaining columns
        for c in j + 1..p {
            let mut s = a.get(j, c);
            for i in j + 1..n {
                s += a.get(i, j) * a.get(i, c);
            }
            s *= betas[j];
            a.set(j, c, a.get(j, c) - s);
            for i in j + 1..n {
                a.set(i, c, a.get(i, c) - s * a.get(i, j));
            }
        }
    }
    Ok(QRFactors { packed: a, betas })
}

/// Solve the sum-constrained least-squares problem over a window of
/// preconditioned residual columns: minimize ||sum_i alpha_i F_i|| subject to
/// sum alpha_i = 1, via the unconstrained difference reformulation.
///
/// Rank-deficient windows are handled by dropping the oldest difference
/// column and re-solving; the corresponding alpha entries are zero.
pub fn constrained_ls_alpha(fcols: &[Vec<f64>]) -> Result<Vec<f64>> {
    assert!(!fcols.is_empty(), "window must contain at least one column");
    let m = fcols.len() - 1;
    if m == 0 {
        return Ok(vec![1.0]);
    }
    let target = fcols[m].clone();
    let diffs: Vec<Vec<f64>> = (0..m).map(|i| sub_vec(&fcols[i + 1], &fcols[i])).collect();

    // drop oldest difference columns until the QR diagonal is full rank
    let mut drop = 0;
    let gamma = loop {
        if drop == m {
            break Vec::new();
        }
        let w = DenseMatrix::from_columns(&diffs[drop..]);
        let qr = qr_factor(&w)?;
        let rd = qr.r_diag();
        let r11 = rd[0].abs();
        if rd.iter().any(|r| r.abs() <= DROP_RTOL * r11) || r11 == 0.0 {
            drop += 1;
            continue;
        }
        break qr.solve_ls(&target)?;
    };

    // map gamma over the retained window back to barycentric alpha
    let mut alpha = vec![0.0; m + 1];
    if gamma.is_empty() {
        alpha[m] = 1.0;
        return Ok(alpha);
    }
    let q = gamma.len();
    alpha[drop] = gamma[0];
    for j in 1..q {
        alpha[drop + j] = gamma[j] - gamma[j - 1];
    }
    alpha[m] = 1.0 - gamma[q - 1];
    Ok(alpha)
}

/// Forward-difference Jacobian with step h_j = sqrt(eps_mach) * max(|x_j|, 1).
pub fn fd_jacobian<F>(f: F, x: &[f64]) -> Result<DenseMatrix>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let f0 = f(x);
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEvaluation);
    }
    let rows = f0.len();
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut jac = DenseMatrix::zeros(rows, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = sqrt_eps * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fj = f(&xp);
        xp[j] = x[j];
        if fj.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation);
        }
        for i in 0..rows {
            jac.set(i, j, (fj[i] - f0[i]) / h);
        }
    }
    Ok(jac)
}

/// Combined window residual sum_i alpha_i F_i.
pub fn combine(fcols: &[Vec<f64>], alpha: &[f64]) -> Vec<f64> {
    assert_eq!(fcols.len(), alpha.len());
    let n = fcols[0].len();
    let mut out = vec![0.0; n];
    for (col, &a) in fcols.iter().zip(alpha.iter()) {
        for i in 0..n {
            out[i] += a * col[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{dot, norm2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn lu_identity() {
        let f = lu_factor(&DenseMatrix::identity(2)).unwrap();
        assert_eq!(lu_solve(&f, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn lu_diagonal() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let f = lu_factor(&m).unwrap();
        assert_eq!(lu_solve(&f, &[4.0, -2.0]).unwrap(), vec![2.0, -0.5]);
    }

    #[test]
    fn lu_zero_matrix_singular() {
        let m = DenseMatrix::zeros(2, 2);
        assert!(matches!(lu_factor(&m), Err(Error::SingularMatrix)));
    }

    #[test]
    fn lu_hand_solved_2x2() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let f = lu_factor(&m).unwrap();
        let x = lu_solve(&f, &[3.0, 4.0]).unwrap();
        assert_close(x[0], 1.0, 1e-14);
        assert_close(x[1], 1.0, 1e-14);
    }

    #[test]
    fn lu_rank_deficient_fails_at_factor_time() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(lu_factor(&m), Err(Error::SingularMatrix)));
    }

    #[test]
    fn lu_well_scaled_tiny_matrix_is_fine() {
        let m = DenseMatrix::from_rows(&[vec![1e-16, 0.0], vec![0.0, 1e-16]]);
        let f = lu_factor(&m).unwrap();
        let x = lu_solve(&f, &[1e-16, 2e-16]).unwrap();
        assert_close(x[0], 1.0, 1e-12);
        assert_close(x[1], 2.0, 1e-12);
    }

    #[test]
    fn lu_dimension_mismatch() {
        let f = lu_factor(&DenseMatrix::identity(3)).unwrap();
        assert!(matches!(
            lu_solve(&f, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lu_residual_bound_random_200() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [20, 80, 200] {
            // diagonally dominant so conditioning stays mild
            let mut m = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            for i in 0..n {
                m.set(i, i, m.get(i, i) + n as f64);
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = lu_factor(&m).unwrap();
            let x = lu_solve(&f, &b).unwrap();
            let r = sub_vec(&m.matvec(&x), &b);
            let bound = 1e-10 * (m.frob_norm() * norm2(&x) + norm2(&b));
            assert!(norm2(&r) <= bound, "n={n}: {} > {}", norm2(&r), bound);
        }
    }

    #[test]
    fn qr_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DenseMatrix::from_fn(8, 4, |_, _| rng.gen_range(-1.0..1.0));
        let qr = qr_factor(&m).unwrap();
        let q = qr.q_explicit();
        let qtq = q.transpose().matmul(&q);
        let err = qtq.sub(&DenseMatrix::identity(8)).frob_norm();
        assert!(err <= 1e-10, "QtQ deviation {err}");
    }

    #[test]
    fn alpha_single_column() {
        assert_eq!(constrained_ls_alpha(&[vec![5.0, -2.0]]).unwrap(), vec![1.0]);
    }

    #[test]
    fn alpha_symmetric_columns() {
        let a = constrained_ls_alpha(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_close(a[0], 0.5, 1e-12);
        assert_close(a[1], 0.5, 1e-12);
        let c = combine(&[vec![1.0, 0.0], vec![0.0, 1.0]], &a);
        assert_close(dot(&c, &c), 0.5, 1e-12);
    }

    #[test]
    fn alpha_hand_minimized() {
        // minimize 4 a0^2 + (1-a0)^2 -> a0 = 0.2
        let cols = vec![vec![2.0, 0.0], vec![0.0, 1.0]];
        let a = constrained_ls_alpha(&cols).unwrap();
        assert_close(a[0], 0.2, 1e-12);
        assert_close(a[1], 0.8, 1e-12);
        let c = combine(&cols, &a);
        assert_close(c[0], 0.4, 1e-12);
        assert_close(c[1], 0.8, 1e-12);
    }

    #[test]
    fn alpha_duplicate_columns_drop() {
        // first two columns identical: oldest difference column is zero
        let cols = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let a = constrained_ls_alpha(&cols).unwrap();
        assert_eq!(a[0], 0.0);
        assert_close(a.iter().sum::<f64>(), 1.0, 1e-12);
    }

    #[test]
    fn alpha_all_identical_columns() {
        let cols = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        let a = constrained_ls_alpha(&cols).unwrap();
        assert_eq!(a, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn alpha_invariants_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..=12);
            let m = rng.gen_range(1..=4.min(n - 1));
            let cols: Vec<Vec<f64>> = (0..=m)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let alpha = constrained_ls_alpha(&cols).unwrap();
            // sum to one
            assert_close(alpha.iter().sum::<f64>(), 1.0, 1e-12);
            let r = combine(&cols, &alpha);
            // minimizer dominance: last column is feasible
            assert!(norm2(&r) <= norm2(&cols[m]) * (1.0 + 1e-12));
            // orthogonality to retained difference columns
            for i in 0..m {
                if alpha[..=i].iter().all(|&a| a == 0.0) && alpha[i] == 0.0 {
                    continue; // dropped
                }
                let d = sub_vec(&cols[i + 1], &cols[i]);
                let ip = dot(&r, &d).abs();
                assert!(ip <= 1e-8 * (norm2(&r) * norm2(&d)).max(1e-300) + 1e-12);
            }
        }
    }

    #[test]
    fn gamma_alpha_bijection() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let m = rng.gen_range(1..=5);
            let gamma: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            // forward map gamma -> alpha
            let mut alpha = vec![0.0; m + 1];
            alpha[0] = gamma[0];
            for j in 1..m {
                alpha[j] = gamma[j] - gamma[j - 1];
            }
            alpha[m] = 1.0 - gamma[m - 1];
            // inverse: gamma_j = sum_{i<=j-1} alpha_i
            let mut back = vec![0.0; m];
            let mut acc = 0.0;
            for j in 0..m {
                acc += alpha[j];
                back[j] = acc;
            }
            // re-forward
            let mut alpha2 = vec![0.0; m + 1];
            alpha2[0] = back[0];
            for j in 1..m {
                alpha2[j] = back[j] - back[j - 1];
            }
            alpha2[m] = 1.0 - back[m - 1];
            for (a, b) in alpha.iter().zip(alpha2.iter()) {
                assert_close(*a, *b, 0.0);
            }
        }
    }

    #[test]
    fn fd_identity_map() {
        let j = fd_jacobian(|x| x.to_vec(), &[0.3, -2.0, 5.0]).unwrap();
        let err = j.sub(&DenseMatrix::identity(3)).frob_norm();
        assert!(err <= 1e-12);
    }

    #[test]
    fn fd_scalar_square() {
        let j = fd_jacobian(|x| vec![x[0] * x[0]], &[2.0]).unwrap();
        assert_close(j.get(0, 0), 4.0, 1e-6);
    }

    #[test]
    fn fd_affine_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DenseMatrix::from_fn(4, 4, |_, _| rng.gen_range(-2.0..2.0));
        let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a2 = a.clone();
        let j = fd_jacobian(move |x| sub_vec(&a2.matvec(x), &b), &x).unwrap();
        let rel = j.sub(&a).frob_norm() / a.frob_norm();
        assert!(rel <= 1e-7, "rel error {rel}");
    }

    #[test]
    fn fd_non_finite_probe() {
        let r = fd_jacobian(|x| vec![(x[0] - 1.0).ln()], &[1.0 - 1e-9]);
        assert!(matches!(r, Err(Error::NonFiniteEvaluation)));
    }
}
