//! Analytic constrained problems with known solutions, used as convergence
//! oracles for the optimizers, plus the KKT residual they are judged by.
//!
//! Stochasticity is modeled as additive i.i.d. Gaussian noise on gradient and
//! constraint samples; the noiseless oracles stay available for evaluation.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum ProblemKind {
    /// Objective `0.5 ||x - x0||^2`, constraint `a.x - b <= 0`, with `x0`
    /// chosen infeasible so the constraint is active at the solution.
    QpLinear { x0: Vec<f64>, a: Vec<f64>, b: f64 },
    /// Objective `||x||_1`, constraint `1 - sum(x) <= 0`. Minimum value 1,
    /// attained on the simplex face; `(1/n, ..., 1/n)` is one minimizer.
    NonsmoothL1,
}

#[derive(Clone, Debug)]
pub struct AnalyticProblem {
    pub dim: usize,
    pub constraint_count: usize,
    pub known_solution: Option<Vec<f64>>,
    /// Exact multiplier at the known solution, when available in closed form.
    pub known_multiplier: Option<Vec<f64>>,
    pub noise_std: f64,
    kind: ProblemKind,
}

impl AnalyticProblem {
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ProblemKind::QpLinear { x0, .. } => {
                0.5 * x.iter().zip(x0).map(|(xi, x0i)| (xi - x0i).powi(2)).sum::<f64>()
            }
            ProblemKind::NonsmoothL1 => x.iter().map(|v| v.abs()).sum(),
        }
    }

    /// Noiseless gradient; for the l1 objective this is the subgradient with
    /// sign(0) = 0.
    pub fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            ProblemKind::QpLinear { x0, .. } => {
                x.iter().zip(x0).map(|(xi, x0i)| xi - x0i).collect()
            }
            ProblemKind::NonsmoothL1 => x
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        }
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            ProblemKind::QpLinear { a, b, .. } => {
                vec![a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() - b]
            }
            ProblemKind::NonsmoothL1 => vec![1.0 - x.iter().sum::<f64>()],
        }
    }

    pub fn constraint_jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let _ = x;
        match &self.kind {
            ProblemKind::QpLinear { a, .. } => vec![a.clone()],
            ProblemKind::NonsmoothL1 => vec![vec![-1.0; self.dim]],
        }
    }

    fn add_noise(&self, values: &mut [f64], rng: &mut impl Rng) {
        if self.noise_std == 0.0 {
            return;
        }
        let normal = Normal::new(0.0, self.noise_std).expect("valid noise std");
        for v in values.iter_mut() {
            *v += normal.sample(rng);
        }
    }

    pub fn sampled_objective_gradient(&self, x: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        let mut g = self.objective_gradient(x);
        self.add_noise(&mut g, rng);
        g
    }

    pub fn sampled_constraint_values(&self, x: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        let mut c = self.constraint_values(x);
        self.add_noise(&mut c, rng);
        c
    }

    pub fn sampled_constraint_jacobian(&self, x: &[f64], rng: &mut impl Rng) -> Vec<Vec<f64>> {
        let mut jac = self.constraint_jacobian(x);
        for row in jac.iter_mut() {
            self.add_noise(row, rng);
        }
        jac
    }
}

/// Euclidean projection of `x0` onto the halfspace `a.x <= b` (closed form).
pub fn halfspace_projection(x0: &[f64], a: &[f64], b: f64) -> Vec<f64> {
    let dot: f64 = a.iter().zip(x0).map(|(ai, xi)| ai * xi).sum();
    let norm_sq: f64 = a.iter().map(|ai| ai * ai).sum();
    let violation = dot - b;
    if violation <= 0.0 {
        return x0.to_vec();
    }
    x0.iter()
        .zip(a)
        .map(|(xi, ai)| xi - violation / norm_sq * ai)
        .collect()
}

/// Quadratic objective with one linear inequality constraint; `x0` is placed
/// at `a (b + 1) / ||a||^2`, one unit of violation beyond the boundary, so the
/// constraint is active at the known solution.
pub fn make_qp_linear(n: usize, a: &[f64], b: f64, noise_std: f64) -> Result<AnalyticProblem> {
    if a.len() != n {
        return Err(Error::dim("constraint normal", n, a.len()));
    }
    let norm_sq: f64 = a.iter().map(|ai| ai * ai).sum();
    if norm_sq == 0.0 {
        return Err(Error::Config("constraint normal a must be nonzero".into()));
    }
    let x0: Vec<f64> = a.iter().map(|ai| ai * (b + 1.0) / norm_sq).collect();
    let solution = halfspace_projection(&x0, a, b);
    // Stationarity (x* - x0) + y* a = 0 gives y* = (a.x0 - b) / ||a||^2.
    let multiplier = vec![1.0 / norm_sq];
    Ok(AnalyticProblem {
        dim: n,
        constraint_count: 1,
        known_solution: Some(solution),
        known_multiplier: Some(multiplier),
        noise_std,
        kind: ProblemKind::QpLinear {
            x0,
            a: a.to_vec(),
            b,
        },
    })
}

/// Nonsmooth problem `min ||x||_1 s.t. 1 - sum(x) <= 0` with optimal value 1.
pub fn make_nonsmooth(n: usize, noise_std: f64) -> AnalyticProblem {
    AnalyticProblem {
        dim: n,
        constraint_count: 1,
        known_solution: Some(vec![1.0 / n as f64; n]),
        known_multiplier: Some(vec![1.0]),
        noise_std,
        kind: ProblemKind::NonsmoothL1,
    }
}

/// Stationarity, primal feasibility, and complementarity at `(x, y)`,
/// evaluated with the noiseless oracles. Zero in all components (with
/// `y >= 0`) is exactly a first-order KKT point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktResidual {
    /// `|| grad f(x) + Jac c(x)^T y ||`
    pub stationarity: f64,
    /// `|| max(c(x), 0) ||`
    pub infeasibility: f64,
    /// `sum_j | y_j c_j(x) |`
    pub complementarity: f64,
}

impl KktResidual {
    pub fn max_component(&self) -> f64 {
        self.stationarity.max(self.infeasibility).max(self.complementarity)
    }
}

pub fn kkt_residual(problem: &AnalyticProblem, x: &[f64], y: &[f64]) -> Result<KktResidual> {
    if x.len() != problem.dim {
        return Err(Error::dim("kkt point", problem.dim, x.len()));
    }
    if y.len() != problem.constraint_count {
        return Err(Error::dim("kkt multiplier", problem.constraint_count, y.len()));
    }
    if y.iter().any(|&v| v < 0.0) {
        return Err(Error::Config(
            "inequality multipliers must be nonnegative".into(),
        ));
    }
    let grad = problem.objective_gradient(x);
    let jac = problem.constraint_jacobian(x);
    let c = problem.constraint_values(x);

    let mut stationarity = 0.0;
    for i in 0..problem.dim {
        let mut g = grad[i];
        for (row, &yj) in jac.iter().zip(y) {
            g += yj * row[i];
        }
        stationarity += g * g;
    }
    let infeasibility: f64 = c.iter().map(|&v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
    let complementarity: f64 = c.iter().zip(y).map(|(&ci, &yi)| (yi * ci).abs()).sum();

    Ok(KktResidual {
        stationarity: stationarity.sqrt(),
        infeasibility,
        complementarity,
    })
}
