//! Nonlinear problem abstraction: residual map, optional analytic Jacobian
//! information, and seeded initial-guess generation.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::fd_jacobian;
use crate::matrix::DenseMatrix;

type ResidualFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacobianFn = Box<dyn Fn(&[f64]) -> DenseMatrix + Send + Sync>;
type JacDiagFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A system f(x) = 0 with optional analytic derivative information.
pub struct NonlinearProblem {
    pub name: String,
    pub dim: usize,
    residual: ResidualFn,
    jacobian: Option<JacobianFn>,
    jacobian_diag: Option<JacDiagFn>,
    /// Constant linear-part operator (discrete Laplace-type matrix), when the
    /// problem has one.
    pub linear_part: Option<DenseMatrix>,
    pub known_solution: Option<Vec<f64>>,
}

impl NonlinearProblem {
    pub fn new(name: impl Into<String>, dim: usize, residual: ResidualFn) -> Self {
        Self {
            name: name.into(),
            dim,
            residual,
            jacobian: None,
            jacobian_diag: None,
            linear_part: None,
            known_solution: None,
        }
    }

    pub fn with_jacobian(mut self, j: JacobianFn) -> Self {
        self.jacobian = Some(j);
        self
    }

    pub fn with_jacobian_diag(mut self, d: JacDiagFn) -> Self {
        self.jacobian_diag = Some(d);
        self
    }

    pub fn with_linear_part(mut self, a: DenseMatrix) -> Self {
        self.linear_part = Some(a);
        self
    }

    pub fn with_known_solution(mut self, x: Vec<f64>) -> Self {
        self.known_solution = Some(x);
        self
    }

    /// Linear system A x = b posed as a root-finding problem.
    pub fn from_linear(a: DenseMatrix, b: Vec<f64>) -> Self {
        let n = a.rows();
        assert_eq!(a.cols(), n);
        assert_eq!(b.len(), n);
        let a_res = a.clone();
        let b_res = b.clone();
        let a_jac = a.clone();
        let a_diag = a.diagonal();
        Self::new(
            "linear",
            n,
            Box::new(move |x| {
                let mut r = a_res.matvec(x);
                for i in 0..n {
                    r[i] -= b_res[i];
                }
                r
            }),
        )
        .with_jacobian(Box::new(move |_| a_jac.clone()))
        .with_jacobian_diag(Box::new(move |_| a_diag.clone()))
        .with_linear_part(a)
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (self.residual)(x)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Analytic Jacobian when available, finite-difference fallback otherwise.
    pub fn jacobian(&self, x: &[f64]) -> Result<DenseMatrix> {
        match &self.jacobian {
            Some(j) => Ok(j(x)),
            None => fd_jacobian(|y| (self.residual)(y), x),
        }
    }

    /// Jacobian diagonal; prefers the cheap analytic diagonal when present.
    pub fn jacobian_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.jacobian_diag {
            Some(d) => Ok(d(x)),
            None => Ok(self.jacobian(x)?.diagonal()),
        }
    }
}

/// Per-coordinate uniform sampling box with a fixed seed.
#[derive(Debug, Clone)]
pub struct InitialGuessBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub seed: u64,
}

impl InitialGuessBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, seed: u64) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(
            lower.iter().zip(upper.iter()).all(|(l, u)| l <= u),
            "box bounds must satisfy lower <= upper"
        );
        Self { lower, upper, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            seed,
        }
    }
}

/// Deterministic componentwise-uniform sample from the box.
pub fn random_guess(boxspec: &InitialGuessBox) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(boxspec.seed);
    boxspec
        .lower
        .iter()
        .zip(boxspec.upper.iter())
        .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..u) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_box_returns_constant() {
        let b = InitialGuessBox::new(vec![2.5, -1.0], vec![2.5, -1.0], 42);
        assert_eq!(random_guess(&b), vec![2.5, -1.0]);
    }

    #[test]
    fn same_seed_same_guess() {
        let b = InitialGuessBox::new(vec![0.0; 8], vec![1.0; 8], 7);
        assert_eq!(random_guess(&b), random_guess(&b));
        let b2 = b.with_seed(8);
        assert_ne!(random_guess(&b), random_guess(&b2));
    }

    #[test]
    fn guess_stays_inside_box() {
        let n = 10;
        let lo = std::f64::consts::FRAC_PI_4 - 0.05;
        let hi = std::f64::consts::FRAC_PI_4 + 0.05;
        for seed in 0..5 {
            let b = InitialGuessBox::new(vec![lo; n], vec![hi; n], seed);
            for v in random_guess(&b) {
                assert!(v >= lo && v < hi);
            }
        }
    }
}
