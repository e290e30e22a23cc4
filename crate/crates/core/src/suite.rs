//! The four benchmark nonlinear systems: a 2D polynomial system with nearly
//! coincident roots, a trigonometric system with a manufactured solution, the
//! Bratu problem, and a nonlinear convection-diffusion problem.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::problem::NonlinearProblem;

/// 2D polynomial system with roots (1,3) and (1-eta^2, 3+eta),
/// eta = 1 - sqrt(1 + 2 eps). The roots coalesce at eps = 0.
pub fn make_kelley(eps: f64) -> NonlinearProblem {
    assert!(eps.is_finite() && eps >= 0.0);
    let residual = move |x: &[f64]| {
        let (u, v) = (x[0] - 1.0, x[1] - 3.0);
        vec![u + v * v, eps * v + 1.5 * u * v + v * v + v * v * v]
    };
    let jac = move |x: &[f64]| {
        let (u, v) = (x[0] - 1.0, x[1] - 3.0);
        DenseMatrix::from_rows(&[
            vec![1.0, 2.0 * v],
            vec![1.5 * v, eps + 1.5 * u + 2.0 * v + 3.0 * v * v],
        ])
    };
    let jac_diag = move |x: &[f64]| {
        let (u, v) = (x[0] - 1.0, x[1] - 3.0);
        vec![1.0, eps + 1.5 * u + 2.0 * v + 3.0 * v * v]
    };
    NonlinearProblem::new("kelley", 2, Box::new(residual))
        .with_jacobian(Box::new(jac))
        .with_jacobian_diag(Box::new(jac_diag))
        .with_known_solution(vec![1.0, 3.0])
}

/// Secondary root of the polynomial system for eps > 0.
pub fn kelley_second_root(eps: f64) -> Vec<f64> {
    let eta = 1.0 - (1.0 + 2.0 * eps).sqrt();
    vec![1.0 - eta * eta, 3.0 + eta]
}

/// Trigonometric system of dimension n with manufactured solution
/// x* = (pi/4, ..., pi/4).
pub fn make_trig(n: usize) -> NonlinearProblem {
    assert!(n >= 1);
    let c = std::f64::consts::FRAC_PI_4;
    // h_i at the manufactured solution, i is 1-based
    let h_star: Vec<f64> = (1..=n)
        .map(|i| n as f64 - n as f64 * c.cos() + i as f64 * (1.0 - c.cos()) - c.sin())
        .collect();
    let hs = h_star.clone();
    let residual = move |x: &[f64]| {
        let cos_sum: f64 = x.iter().map(|v| v.cos()).sum();
        (0..n)
            .map(|i| {
                let idx = (i + 1) as f64;
                let h = n as f64 - cos_sum + idx * (1.0 - x[i].cos()) - x[i].sin();
                h - hs[i]
            })
            .collect()
    };
    let jac = move |x: &[f64]| {
        DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                (1.0 + (i + 1) as f64) * x[i].sin() - x[i].cos()
            } else {
                x[j].sin()
            }
        })
    };
    let jac_diag = move |x: &[f64]| {
        (0..n)
            .map(|i| (1.0 + (i + 1) as f64) * x[i].sin() - x[i].cos())
            .collect()
    };
    NonlinearProblem::new("trig", n, Box::new(residual))
        .with_jacobian(Box::new(jac))
        .with_jacobian_diag(Box::new(jac_diag))
        .with_known_solution(vec![c; n])
}

/// Five-point stencil matrix for -h^2 * Laplacian on grid_n x grid_n interior
/// unknowns of the unit square, lexicographic ordering.
pub fn laplace_stencil(grid_n: usize) -> DenseMatrix {
    let n = grid_n * grid_n;
    let mut a = DenseMatrix::zeros(n, n);
    for iy in 0..grid_n {
        for ix in 0..grid_n {
            let idx = iy * grid_n + ix;
            a.set(idx, idx, 4.0);
            if ix > 0 {
                a.set(idx, idx - 1, -1.0);
            }
            if ix + 1 < grid_n {
                a.set(idx, idx + 1, -1.0);
            }
            if iy > 0 {
                a.set(idx, idx - grid_n, -1.0);
            }
            if iy + 1 < grid_n {
                a.set(idx, idx + grid_n, -1.0);
            }
        }
    }
    a
}

/// Centered first-difference operator (u_E - u_W) + (u_N - u_S); neighbors
/// outside the domain contribute zero.
fn convection_stencil(grid_n: usize) -> DenseMatrix {
    let n = grid_n * grid_n;
    let mut d = DenseMatrix::zeros(n, n);
    for iy in 0..grid_n {
        for ix in 0..grid_n {
            let idx = iy * grid_n + ix;
            if ix + 1 < grid_n {
                d.set(idx, idx + 1, 1.0);
            }
            if ix > 0 {
                d.set(idx, idx - 1, -1.0);
            }
            if iy + 1 < grid_n {
                d.set(idx, idx + grid_n, 1.0);
            }
            if iy > 0 {
                d.set(idx, idx - grid_n, -1.0);
            }
        }
    }
    d
}

/// Bratu problem -Delta u = lambda e^u with zero Dirichlet boundary,
/// discretized with the 5-point stencil on grid_n x grid_n interior unknowns
/// and multiplied through by h^2: F(u) = A u - h^2 lambda exp(u).
pub fn make_bratu(grid_n: usize, lambda: f64) -> NonlinearProblem {
    assert!(grid_n >= 2);
    let n = grid_n * grid_n;
    let h = 1.0 / (grid_n as f64 + 1.0);
    let scale = h * h * lambda;
    let a = laplace_stencil(grid_n);
    let a_res = a.clone();
    let a_jac = a.clone();
    let residual = move |u: &[f64]| {
        let mut r = a_res.matvec(u);
        for i in 0..n {
            r[i] -= scale * u[i].exp();
        }
        r
    };
    let jac = move |u: &[f64]| {
        let mut j = a_jac.clone();
        for i in 0..n {
            j.set(i, i, j.get(i, i) - scale * u[i].exp());
        }
        j
    };
    let jac_diag = move |u: &[f64]| (0..n).map(|i| 4.0 - scale * u[i].exp()).collect();
    NonlinearProblem::new("bratu", n, Box::new(residual))
        .with_jacobian(Box::new(jac))
        .with_jacobian_diag(Box::new(jac_diag))
        .with_linear_part(a)
}

/// Nonlinear convection-diffusion problem
/// eps (-u_xx - u_yy) + (u_x + u_y) + k u^2 = 2 pi^2 sin(pi x) sin(pi y)
/// with zero Dirichlet boundary, centered differences, multiplied through by
/// h^2: F(u) = eps A u + (h/2) D u + h^2 k u^2 - h^2 f.
pub fn make_convdiff(grid_n: usize, eps: f64, k: f64) -> NonlinearProblem {
    assert!(grid_n >= 2);
    assert!(eps > 0.0);
    let n = grid_n * grid_n;
    let h = 1.0 / (grid_n as f64 + 1.0);
    let pi = std::f64::consts::PI;
    let source: Vec<f64> = (0..n)
        .map(|idx| {
            let ix = idx % grid_n;
            let iy = idx / grid_n;
            let x = (ix as f64 + 1.0) * h;
            let y = (iy as f64 + 1.0) * h;
            h * h * 2.0 * pi * pi * (pi * x).sin() * (pi * y).sin()
        })
        .collect();
    let linear = laplace_stencil(grid_n)
        .scale(eps)
        .add(&convection_stencil(grid_n).scale(h / 2.0));
    let lin_res = linear.clone();
    let lin_jac = linear.clone();
    let lin_diag = linear.diagonal();
    let h2k = h * h * k;
    let residual = move |u: &[f64]| {
        let mut r = lin_res.matvec(u);
        for i in 0..n {
            r[i] += h2k * u[i] * u[i] - source[i];
        }
        r
    };
    let jac = move |u: &[f64]| {
        let mut j = lin_jac.clone();
        for i in 0..n {
            j.set(i, i, j.get(i, i) + 2.0 * h2k * u[i]);
        }
        j
    };
    let jac_diag = move |u: &[f64]| (0..n).map(|i| lin_diag[i] + 2.0 * h2k * u[i]).collect();
    NonlinearProblem::new("convdiff", n, Box::new(residual))
        .with_jacobian(Box::new(jac))
        .with_jacobian_diag(Box::new(jac_diag))
        .with_linear_part(linear)
}

fn param_f64(params: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("parameter {key}={v} is not a number"))),
    }
}

fn param_usize(params: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("parameter {key}={v} is not a count"))),
    }
}

/// Construct a benchmark problem by name with key-value parameters.
pub fn make_problem(name: &str, params: &BTreeMap<String, String>) -> Result<NonlinearProblem> {
    match name {
        "kelley" => Ok(make_kelley(param_f64(params, "eps", 0.0)?)),
        "trig" => Ok(make_trig(param_usize(params, "n", 50)?)),
        "bratu" => Ok(make_bratu(
            param_usize(params, "grid", 32)?,
            param_f64(params, "lambda", 6.0)?,
        )),
        "convdiff" => Ok(make_convdiff(
            param_usize(params, "grid", 32)?,
            param_f64(params, "eps", 0.1)?,
            param_f64(params, "k", 3.0)?,
        )),
        other => Err(Error::InvalidSpec(format!("unknown problem '{other}'"))),
    }
}

/// Names and parameter summaries for the CLI.
pub fn list_problems() -> Vec<(&'static str, &'static str)> {
    vec![
        ("kelley", "2D polynomial system [params: eps=0]"),
        ("trig", "trigonometric system [params: n=50]"),
        (
            "bratu",
            "Bratu problem on interior grid [params: grid=32, lambda=6]",
        ),
        (
            "convdiff",
            "nonlinear convection-diffusion [params: grid=32, eps=0.1, k=3]",
        ),
    ]
}
