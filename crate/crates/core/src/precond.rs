//! Preconditioners M_k for the accelerated iteration, exposing the solve
//! M F = -f. Choices range from a scaled identity to the full Jacobian, plus
//! the constant linear-part operators of the PDE problems.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{lu_factor, lu_solve, LUFactors};
use crate::matrix::DenseMatrix;
use crate::problem::NonlinearProblem;

/// Floor applied to near-zero diagonal entries when `diag_floor` is enabled.
pub const DIAG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreconditionerKind {
    /// M = alpha I; alpha = 1 recovers the unpreconditioned iteration.
    ConstantScalar(f64),
    /// M = diag(J(x)).
    DiagJacobian,
    /// M = contiguous diagonal blocks of J(x) of the given size.
    BlockDiagJacobian(usize),
    /// M = J(x).
    FullJacobian,
    /// M = A, the problem's constant linear-part operator.
    LinearPartFull,
    /// M = diag(A).
    LinearPartDiag,
}

impl PreconditionerKind {
    /// Kinds whose operator does not depend on the iterate; built once per
    /// solve.
    pub fn is_constant(&self) -> bool {
        matches!(
            self,
            PreconditionerKind::ConstantScalar(_)
                | PreconditionerKind::LinearPartFull
                | PreconditionerKind::LinearPartDiag
        )
    }

    /// Kinds whose build assembles Jacobian information, counted in the
    /// build metric.
    pub fn is_jacobian_based(&self) -> bool {
        matches!(
            self,
            PreconditionerKind::DiagJacobian
                | PreconditionerKind::BlockDiagJacobian(_)
                | PreconditionerKind::FullJacobian
        )
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreconditionerKind::ConstantScalar(a) => write!(f, "const:{a}"),
            PreconditionerKind::DiagJacobian => write!(f, "diag"),
            PreconditionerKind::BlockDiagJacobian(b) => write!(f, "block:{b}"),
            PreconditionerKind::FullJacobian => write!(f, "full"),
            PreconditionerKind::LinearPartFull => write!(f, "linfull"),
            PreconditionerKind::LinearPartDiag => write!(f, "lindiag"),
        }
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidSpec(msg);
        if let Some(rest) = s.strip_prefix("const:") {
            let a: f64 = rest
                .parse()
                .map_err(|_| bad(format!("bad scalar in '{s}'")))?;
            if a == 0.0 || !a.is_finite() {
                return Err(bad("constant preconditioner scale must be nonzero".into()));
            }
            return Ok(PreconditionerKind::ConstantScalar(a));
        }
        if let Some(rest) = s.strip_prefix("block:") {
            let b: usize = rest
                .parse()
                .map_err(|_| bad(format!("bad block size in '{s}'")))?;
            if b == 0 {
                return Err(bad("block size must be >= 1".into()));
            }
            return Ok(PreconditionerKind::BlockDiagJacobian(b));
        }
        match s {
            "diag" => Ok(PreconditionerKind::DiagJacobian),
            "full" => Ok(PreconditionerKind::FullJacobian),
            "linfull" => Ok(PreconditionerKind::LinearPartFull),
            "lindiag" => Ok(PreconditionerKind::LinearPartDiag),
            other => Err(bad(format!(
                "unknown preconditioner '{other}' (expected const:A, diag, block:B, full, linfull, lindiag)"
            ))),
        }
    }
}

enum Factors {
    Scalar(f64),
    Diagonal(Vec<f64>),
    /// (start offset, LU of the block)
    Blocks(Vec<(usize, LUFactors)>),
    Full(LUFactors),
}

/// A factored M ready to apply as the solve M F = -f.
pub struct FactoredPreconditioner {
    pub kind: PreconditionerKind,
    pub build_iteration: usize,
    dim: usize,
    factors: Factors,
}

fn factor_diagonal(mut d: Vec<f64>, diag_floor: bool, what: &str) -> Result<Vec<f64>> {
    for v in d.iter_mut() {
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        if diag_floor && v.abs() < DIAG_FLOOR {
            *v = if *v < 0.0 { -DIAG_FLOOR } else { DIAG_FLOOR };
        }
        if *v == 0.0 {
            return Err(Error::SingularPreconditioner(format!(
                "zero diagonal entry in {what}"
            )));
        }
    }
    Ok(d)
}

/// Build the preconditioner of the given kind at the iterate x.
pub fn build(
    kind: PreconditionerKind,
    problem: &NonlinearProblem,
    x: &[f64],
    iteration: usize,
    diag_floor: bool,
) -> Result<FactoredPreconditioner> {
    let n = problem.dim;
    let factors = match kind {
        PreconditionerKind::ConstantScalar(a) => {
            if a == 0.0 {
                return Err(Error::SingularPreconditioner("zero scalar".into()));
            }
            Factors::Scalar(a)
        }
        PreconditionerKind::DiagJacobian => {
            let d = problem.jacobian_diag(x)?;
            Factors::Diagonal(factor_diagonal(d, diag_floor, "Jacobian diagonal")?)
        }
        PreconditionerKind::BlockDiagJacobian(block) => {
            if block > n {
                return Err(Error::InvalidSpec(format!(
                    "block size {block} exceeds dimension {n}"
                )));
            }
            let j = problem.jacobian(x)?;
            let mut blocks = Vec::new();
            let mut start = 0;
            while start < n {
                let len = block.min(n - start);
                let sub = DenseMatrix::from_fn(len, len, |i, jj| j.get(start + i, start + jj));
                let lu = lu_factor(&sub).map_err(|e| match e {
                    Error::SingularMatrix => Error::SingularPreconditioner(format!(
                        "singular Jacobian block at offset {start}"
                    )),
                    other => other,
                })?;
                blocks.push((start, lu));
                start += len;
            }
            Factors::Blocks(blocks)
        }
        PreconditionerKind::FullJacobian => {
            let j = problem.jacobian(x)?;
            let lu = lu_factor(&j).map_err(|e| match e {
                Error::SingularMatrix => Error::SingularPreconditioner("singular Jacobian".into()),
                other => other,
            })?;
            Factors::Full(lu)
        }
        PreconditionerKind::LinearPartFull => {
            let a = problem
                .linear_part
                .as_ref()
                .ok_or(Error::MissingLinearPart)?;
            let lu = lu_factor(a).map_err(|e| match e {
                Error::SingularMatrix => {
                    Error::SingularPreconditioner("singular linear part".into())
                }
                other => other,
            })?;
            Factors::Full(lu)
        }
        PreconditionerKind::LinearPartDiag => {
            let a = problem
                .linear_part
                .as_ref()
                .ok_or(Error::MissingLinearPart)?;
            Factors::Diagonal(factor_diagonal(
                a.diagonal(),
                diag_floor,
                "linear-part diagonal",
            )?)
        }
    };
    Ok(FactoredPreconditioner {
        kind,
        build_iteration: iteration,
        dim: n,
        factors,
    })
}

impl FactoredPreconditioner {
    /// Preconditioned residual: solve M F = -f.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.len(),
            });
        }
        match &self.factors {
            Factors::Scalar(a) => Ok(f.iter().map(|v| -v / a).collect()),
            Factors::Diagonal(d) => Ok(f.iter().zip(d.iter()).map(|(v, di)| -v / di).collect()),
            Factors::Blocks(blocks) => {
                let mut out = vec![0.0; self.dim];
                for (start, lu) in blocks {
                    let len = lu.dim();
                    let rhs: Vec<f64> = f[*start..start + len].iter().map(|v| -v).collect();
                    let sol = lu_solve(lu, &rhs)?;
                    out[*start..start + len].copy_from_slice(&sol);
                }
                Ok(out)
            }
            Factors::Full(lu) => {
                let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
                lu_solve(lu, &rhs)
            }
        }
    }
}

/// True when the preconditioner should be (re)built at iteration k.
pub fn due_for_update(k: usize, n_update: usize) -> bool {
    assert!(n_update >= 1);
    k.is_multiple_of(n_update)
}

/// Dense assembly of the operator the given kind represents, used by tests
/// and the contraction probe to check the apply residual.
pub fn assemble_dense(
    kind: PreconditionerKind,
    problem: &NonlinearProblem,
    x: &[f64],
) -> Result<DenseMatrix> {
    let n = problem.dim;
    match kind {
        PreconditionerKind::ConstantScalar(a) => Ok(DenseMatrix::identity(n).scale(a)),
        PreconditionerKind::DiagJacobian => {
            let d = problem.jacobian_diag(x)?;
            Ok(DenseMatrix::from_fn(
                n,
                n,
                |i, j| if i == j { d[i] } else { 0.0 },
            ))
        }
        PreconditionerKind::BlockDiagJacobian(block) => {
            let j = problem.jacobian(x)?;
            Ok(DenseMatrix::from_fn(n, n, |r, c| {
                if r / block == c / block {
                    j.get(r, c)
                } else {
                    0.0
                }
            }))
        }
        PreconditionerKind::FullJacobian => problem.jacobian(x),
        PreconditionerKind::LinearPartFull => {
            problem.linear_part.clone().ok_or(Error::MissingLinearPart)
        }
        PreconditionerKind::LinearPartDiag => {
            let a = problem
                .linear_part
                .as_ref()
                .ok_or(Error::MissingLinearPart)?;
            let d = a.diagonal();
            Ok(DenseMatrix::from_fn(
                n,
                n,
                |i, j| if i == j { d[i] } else { 0.0 },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{norm2, sub_vec};
    use crate::suite::{make_bratu, make_kelley, make_trig};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn constant_scalar_recovers_picard_direction() {
        let p = make_trig(3);
        let x = vec![0.2, 0.3, 0.4];
        let f = p.residual(&x);
        let m = build(PreconditionerKind::ConstantScalar(1.0), &p, &x, 0, false).unwrap();
        let cal_f = m.apply(&f).unwrap();
        for (a, b) in cal_f.iter().zip(f.iter()) {
            assert_eq!(*a, -b);
        }
    }

    #[test]
    fn scalar_two_apply() {
        let p = make_trig(2);
        let m = build(
            PreconditionerKind::ConstantScalar(2.0),
            &p,
            &[0.0, 0.0],
            0,
            false,
        )
        .unwrap();
        assert_eq!(m.apply(&[4.0, -2.0]).unwrap(), vec![-2.0, 1.0]);
    }

    #[test]
    fn diag_on_trig_at_solution() {
        let p = make_trig(5);
        let x = vec![FRAC_PI_4; 5];
        let m = build(PreconditionerKind::DiagJacobian, &p, &x, 0, false).unwrap();
        let s = 2.0_f64.sqrt() / 2.0;
        // applying to -d_i should give back ones
        let f: Vec<f64> = (0..5).map(|i| -((i + 1) as f64) * s).collect();
        let out = m.apply(&f).unwrap();
        for v in out {
            assert!((v - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn full_jacobian_singular_at_kelley_root() {
        let p = make_kelley(0.0);
        let r = build(PreconditionerKind::FullJacobian, &p, &[1.0, 3.0], 0, false);
        assert!(matches!(r, Err(Error::SingularPreconditioner(_))));
    }

    #[test]
    fn full_apply_hand_example() {
        // M = [[2,1],[1,3]], f = (-3,-4) -> F = (1,1)
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let p = NonlinearProblem::from_linear(a, vec![0.0, 0.0]);
        let m = build(PreconditionerKind::FullJacobian, &p, &[0.0, 0.0], 0, false).unwrap();
        let out = m.apply(&[-3.0, -4.0]).unwrap();
        assert!((out[0] - 1.0).abs() <= 1e-14);
        assert!((out[1] - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn missing_linear_part() {
        let p = make_trig(3);
        let r = build(PreconditionerKind::LinearPartFull, &p, &[0.0; 3], 0, false);
        assert!(matches!(r, Err(Error::MissingLinearPart)));
    }

    #[test]
    fn dimension_mismatch_on_apply() {
        let p = make_trig(3);
        let m = build(
            PreconditionerKind::ConstantScalar(1.0),
            &p,
            &[0.0; 3],
            0,
            false,
        )
        .unwrap();
        assert!(matches!(
            m.apply(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diag_floor_clamps() {
        let d = factor_diagonal(vec![1.0, 1e-15], true, "test").unwrap();
        assert_eq!(d[1], DIAG_FLOOR);
        assert!(factor_diagonal(vec![1.0, 0.0], false, "test").is_err());
    }

    #[test]
    fn due_for_update_policy() {
        assert!(due_for_update(0, 1));
        assert!(due_for_update(0, 7));
        for k in 0..6 {
            assert!(due_for_update(k, 1));
        }
        assert!(due_for_update(2, 2));
        assert!(due_for_update(4, 2));
        assert!(!due_for_update(1, 2));
        assert!(!due_for_update(3, 2));
    }

    #[test]
    fn apply_residual_bound_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = make_bratu(4, 6.0);
        let n = p.dim;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let kinds = [
            PreconditionerKind::ConstantScalar(0.5),
            PreconditionerKind::DiagJacobian,
            PreconditionerKind::BlockDiagJacobian(4),
            PreconditionerKind::FullJacobian,
            PreconditionerKind::LinearPartFull,
            PreconditionerKind::LinearPartDiag,
        ];
        for kind in kinds {
            let m = build(kind, &p, &x, 0, false).unwrap();
            let dense = assemble_dense(kind, &p, &x).unwrap();
            for _ in 0..5 {
                let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let cal_f = m.apply(&f).unwrap();
                // || M F + f ||
                let mut r = dense.matvec(&cal_f);
                for i in 0..n {
                    r[i] += f[i];
                }
                let bound = 1e-10 * (dense.frob_norm() * norm2(&cal_f) + norm2(&f));
                assert!(norm2(&r) <= bound, "{kind}: {} > {bound}", norm2(&r));
            }
        }
    }

    #[test]
    fn block_one_equals_diag_block_n_equals_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = make_bratu(3, 6.0);
        let n = p.dim;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag = build(PreconditionerKind::DiagJacobian, &p, &x, 0, false).unwrap();
        let b1 = build(PreconditionerKind::BlockDiagJacobian(1), &p, &x, 0, false).unwrap();
        assert_eq!(diag.apply(&f).unwrap(), b1.apply(&f).unwrap());
        let full = build(PreconditionerKind::FullJacobian, &p, &x, 0, false).unwrap();
        let bn = build(PreconditionerKind::BlockDiagJacobian(n), &p, &x, 0, false).unwrap();
        let a = full.apply(&f).unwrap();
        let b = bn.apply(&f).unwrap();
        let rel = norm2(&sub_vec(&a, &b)) / norm2(&a);
        assert!(rel <= 1e-12);
    }

    #[test]
    fn kind_string_roundtrip() {
        for s in ["const:0.1", "diag", "block:8", "full", "linfull", "lindiag"] {
            let k: PreconditionerKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("const:0".parse::<PreconditionerKind>().is_err());
        assert!("block:0".parse::<PreconditionerKind>().is_err());
        assert!("nope".parse::<PreconditionerKind>().is_err());
    }
}
