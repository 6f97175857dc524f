//! Stochastic smoothed and linearized augmented Lagrangian method.
//!
//! Inequality constraints `c(x) <= 0` are handled with slack variables:
//! minimize over `(x, s)` in `R^n x R^m_{>=0}` subject to the equality
//! residual `c(x) + s = 0`. One iteration performs, in order:
//!
//! 1. dual ascent on the sampled residual, with the dual clamped to
//!    `[-dual_bound, +dual_bound]` componentwise,
//! 2. the smoothing-anchor update `z <- z + beta ((x,s) - z)` using the
//!    pre-update `(x, s)`,
//! 3. a projected primal step along the stochastic gradient estimate of the
//!    proximal augmented Lagrangian.
//!
//! Three independent samples feed one iteration: one for the objective
//! gradient, one for the constraint value and Jacobian used in the dual and
//! linearization terms, and one for the constraint value in the penalty term.

use crate::error::{Error, Result};
use crate::net::{GradientVector, ParameterVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SslAlmConfig {
    /// Augmented Lagrangian penalty.
    pub rho: f64,
    /// Proximal smoothing weight.
    pub mu: f64,
    /// Primal stepsize.
    pub tau: f64,
    /// Dual stepsize.
    pub eta: f64,
    /// Smoothing-anchor stepsize.
    pub beta: f64,
    /// Componentwise clamp bound on the dual iterate.
    pub dual_bound: f64,
}

impl Default for SslAlmConfig {
    fn default() -> Self {
        SslAlmConfig {
            rho: 1.0,
            mu: 2.0,
            tau: 0.05,
            eta: 0.1,
            beta: 0.5,
            dual_bound: 100.0,
        }
    }
}

impl SslAlmConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rho", self.rho),
            ("mu", self.mu),
            ("tau", self.tau),
            ("eta", self.eta),
            ("beta", self.beta),
            ("dual_bound", self.dual_bound),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "ssl-alm parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Primal, slack, dual, and smoothing-anchor iterates.
#[derive(Clone, Debug, PartialEq)]
pub struct SslAlmState {
    pub x: ParameterVector,
    /// Slack variables, kept >= 0 by projection.
    pub s: Vec<f64>,
    /// Dual estimate, kept within the clamp bound.
    pub y: Vec<f64>,
    /// Smoothing anchor over the joint variable `(x, s)`.
    pub z: Vec<f64>,
    pub k: usize,
}

impl SslAlmState {
    pub fn new(x0: ParameterVector, constraint_count: usize) -> Self {
        let mut z = Vec::with_capacity(x0.len() + constraint_count);
        z.extend_from_slice(&x0);
        z.extend(std::iter::repeat(0.0).take(constraint_count));
        SslAlmState {
            x: x0,
            s: vec![0.0; constraint_count],
            y: vec![0.0; constraint_count],
            z,
            k: 0,
        }
    }

    pub fn dual_inf_norm(&self) -> f64 {
        self.y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_slack(&self) -> f64 {
        self.s.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub struct SslAlm {
    pub config: SslAlmConfig,
    pub state: SslAlmState,
}

impl SslAlm {
    pub fn new(x0: ParameterVector, constraint_count: usize, config: SslAlmConfig) -> Result<Self> {
        config.validate()?;
        Ok(SslAlm {
            config,
            state: SslAlmState::new(x0, constraint_count),
        })
    }

    fn check_constraint_dim(&self, actual: usize, context: &'static str) -> Result<()> {
        if actual != self.state.s.len() {
            return Err(Error::dim(context, self.state.s.len(), actual));
        }
        Ok(())
    }

    /// Slack-augmented equality residual `c(x) + s` at the current slack.
    pub fn slack_residual(&self, c_val: &[f64]) -> Result<Vec<f64>> {
        self.check_constraint_dim(c_val.len(), "constraint value")?;
        Ok(c_val.iter().zip(&self.state.s).map(|(c, s)| c + s).collect())
    }

    /// Dual ascent `y <- clamp(y + eta * residual)`. Leaves x, s, z unchanged.
    pub fn dual_step(&mut self, slack_residual: &[f64]) -> Result<()> {
        self.check_constraint_dim(slack_residual.len(), "slack residual")?;
        let bound = self.config.dual_bound;
        for (y, r) in self.state.y.iter_mut().zip(slack_residual) {
            *y = (*y + self.config.eta * r).clamp(-bound, bound);
        }
        Ok(())
    }

    /// Smoothing-anchor update from the pre-update `(x, s)`; call before the
    /// primal step of the same iteration.
    pub fn z_step(&mut self) {
        let n = self.state.x.len();
        let beta = self.config.beta;
        for (z, x) in self.state.z[..n].iter_mut().zip(self.state.x.iter()) {
            *z += beta * (x - *z);
        }
        for (z, s) in self.state.z[n..].iter_mut().zip(&self.state.s) {
            *z += beta * (s - *z);
        }
    }

    /// Primal update over the joint variable `(x, s)`:
    /// `G = grad f + Jac^T (y + rho (c + s)) + mu ((x,s) - z)` on the x block,
    /// with the Jacobian's slack block equal to the identity; then a step of
    /// length tau projected onto `s >= 0`. Increments the iteration counter.
    ///
    /// Call after [`Self::dual_step`], so `G` sees the updated dual.
    pub fn step(
        &mut self,
        obj_grad: &[f64],
        c_val: &[f64],
        c_jac: &[GradientVector],
    ) -> Result<()> {
        let n = self.state.x.len();
        if obj_grad.len() != n {
            return Err(Error::dim("objective gradient", n, obj_grad.len()));
        }
        self.check_constraint_dim(c_val.len(), "constraint value")?;
        self.check_constraint_dim(c_jac.len(), "constraint jacobian rows")?;
        for row in c_jac {
            if row.len() != n {
                return Err(Error::dim("constraint jacobian columns", n, row.len()));
            }
        }

        let cfg = &self.config;
        // y + rho (c + s), shared by the linearization and penalty terms.
        let coeff: Vec<f64> = self
            .state
            .y
            .iter()
            .zip(c_val.iter().zip(&self.state.s))
            .map(|(y, (c, s))| y + cfg.rho * (c + s))
            .collect();

        let mut g_x = vec![0.0; n];
        for (i, g) in g_x.iter_mut().enumerate() {
            let mut acc = obj_grad[i] + cfg.mu * (self.state.x[i] - self.state.z[i]);
            for (row, &w) in c_jac.iter().zip(&coeff) {
                acc += w * row[i];
            }
            *g = acc;
        }
        let g_s: Vec<f64> = coeff
            .iter()
            .zip(self.state.s.iter().zip(&self.state.z[n..]))
            .map(|(w, (s, z))| w + cfg.mu * (s - z))
            .collect();

        if g_x.iter().chain(&g_s).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "ssl-alm gradient estimate at iteration {}",
                self.state.k
            )));
        }

        for (x, g) in self.state.x.iter_mut().zip(&g_x) {
            *x -= cfg.tau * g;
        }
        for (s, g) in self.state.s.iter_mut().zip(&g_s) {
            *s = (*s - cfg.tau * g).max(0.0);
        }
        self.state.k += 1;
        Ok(())
    }

    /// One full iteration in the documented order: dual step on the residual
    /// from `c_val_dual`, smoothing-anchor update, then the primal step using
    /// `c_val_penalty` and `c_jac`.
    pub fn iteration(
        &mut self,
        obj_grad: &[f64],
        c_val_dual: &[f64],
        c_jac: &[GradientVector],
        c_val_penalty: &[f64],
    ) -> Result<()> {
        let residual = self.slack_residual(c_val_dual)?;
        self.dual_step(&residual)?;
        self.z_step();
        self.step(obj_grad, c_val_penalty, c_jac)
    }
}
