//! Stochastic switching subgradient method.
//!
//! Each iteration compares a sampled infeasibility estimate against the
//! current tolerance `eps_k`. If the estimate is within tolerance (boundary
//! inclusive) the iterate moves along a stochastic objective subgradient with
//! stepsize `eta_f`; otherwise along a subgradient of the most-violated
//! constraint component with stepsize `eta_c`. The tolerance then advances by
//! `eps_k = eps_{k-1} / sqrt(k)`.
//!
//! The feasible set here is all of R^n, so the projection is the identity.

use crate::error::{Error, Result};
use crate::fairness::ConstraintVector;
use crate::net::{GradientVector, ParameterVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SswConfig {
    /// Objective-branch stepsize.
    pub eta_f: f64,
    /// Constraint-branch stepsize.
    pub eta_c: f64,
    /// Initial infeasibility tolerance (the k = 1 value).
    pub eps0: f64,
    /// Number of constraint samples averaged into the infeasibility estimate.
    pub constraint_samples: usize,
}

impl Default for SswConfig {
    fn default() -> Self {
        SswConfig {
            eta_f: 0.01,
            eta_c: 0.01,
            eps0: 0.1,
            constraint_samples: 1,
        }
    }
}

impl SswConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_f > 0.0) || !(self.eta_c > 0.0) {
            return Err(Error::Config(format!(
                "ssw stepsizes must be positive, got eta_f {}, eta_c {}",
                self.eta_f, self.eta_c
            )));
        }
        if !(self.eps0 > 0.0) {
            return Err(Error::Config(format!(
                "ssw initial tolerance must be positive, got {}",
                self.eps0
            )));
        }
        if self.constraint_samples == 0 {
            return Err(Error::Config("ssw needs >= 1 constraint sample".into()));
        }
        Ok(())
    }
}

/// Which update an iteration performed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Objective,
    Constraint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SswState {
    pub x: ParameterVector,
    /// 1-based iteration counter.
    pub k: usize,
    /// Current infeasibility tolerance.
    pub eps: f64,
    pub last_branch: Option<Branch>,
}

/// Tolerance recurrence `eps_k = eps_{k-1} / sqrt(k)`, applied from k = 2.
///
/// The sequence decays superexponentially and underflows to 0 after a few
/// hundred iterations; from then on the switch degenerates to the sign of the
/// estimate.
pub fn epsilon_schedule(eps_prev: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Config(format!(
            "tolerance recurrence applies from k = 2, got k = {k}"
        )));
    }
    Ok(eps_prev / (k as f64).sqrt())
}

/// Scalar infeasibility estimate: max component of the mean constraint vector
/// over `sample_count` draws.
pub fn constraint_estimate<F>(
    x: &ParameterVector,
    sample_count: usize,
    mut constraint_fn: F,
) -> Result<f64>
where
    F: FnMut(&ParameterVector) -> Result<ConstraintVector>,
{
    if sample_count == 0 {
        return Err(Error::Config("constraint estimate needs >= 1 sample".into()));
    }
    let mut mean: Option<Vec<f64>> = None;
    for _ in 0..sample_count {
        let sample = constraint_fn(x)?;
        match &mut mean {
            None => mean = Some(sample.to_vec()),
            Some(acc) => {
                if acc.len() != sample.len() {
                    return Err(Error::dim("constraint sample", acc.len(), sample.len()));
                }
                for (a, v) in acc.iter_mut().zip(sample.iter()) {
                    *a += v;
                }
            }
        }
    }
    let mut mean = mean.expect("sample_count >= 1");
    for v in mean.iter_mut() {
        *v /= sample_count as f64;
    }
    Ok(mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

pub struct Ssw {
    pub config: SswConfig,
    pub state: SswState,
}

impl Ssw {
    pub fn new(x0: ParameterVector, config: SswConfig) -> Result<Self> {
        config.validate()?;
        Ok(Ssw {
            state: SswState {
                x: x0,
                k: 1,
                eps: config.eps0,
                last_branch: None,
            },
            config,
        })
    }

    /// Infeasibility estimate at the current iterate, averaging the configured
    /// number of samples.
    pub fn estimate<F>(&self, constraint_fn: F) -> Result<f64>
    where
        F: FnMut(&ParameterVector) -> Result<ConstraintVector>,
    {
        constraint_estimate(&self.state.x, self.config.constraint_samples, constraint_fn)
    }

    /// One primal update. `estimate <= eps_k` (boundary inclusive) takes the
    /// objective branch; otherwise the constraint branch moves along the
    /// subgradient of the most-violated component, ties broken by lowest
    /// index. Advances the tolerance afterwards.
    pub fn step<FObj, FCon>(
        &mut self,
        estimate: f64,
        mut obj_subgrad: FObj,
        mut constraint_subgrad: FCon,
    ) -> Result<Branch>
    where
        FObj: FnMut(&ParameterVector) -> Result<GradientVector>,
        FCon: FnMut(&ParameterVector) -> Result<(ConstraintVector, Vec<GradientVector>)>,
    {
        let branch;
        let (stepsize, grad) = if estimate <= self.state.eps {
            branch = Branch::Objective;
            (self.config.eta_f, obj_subgrad(&self.state.x)?)
        } else {
            branch = Branch::Constraint;
            let (values, rows) = constraint_subgrad(&self.state.x)?;
            if rows.len() != values.len() {
                return Err(Error::dim("constraint subgradient rows", values.len(), rows.len()));
            }
            let mut worst = 0;
            for (i, &v) in values.iter().enumerate() {
                if v > values[worst] {
                    worst = i;
                }
            }
            (self.config.eta_c, rows.into_iter().nth(worst).expect("worst row"))
        };

        if grad.len() != self.state.x.len() {
            return Err(Error::dim("subgradient", self.state.x.len(), grad.len()));
        }
        if !grad.all_finite() {
            return Err(Error::NonFinite(format!(
                "ssw subgradient at iteration {}",
                self.state.k
            )));
        }
        for (x, g) in self.state.x.iter_mut().zip(grad.iter()) {
            *x -= stepsize * g;
        }
        self.state.last_branch = Some(branch);
        self.state.k += 1;
        self.state.eps = epsilon_schedule(self.state.eps, self.state.k)?;
        Ok(branch)
    }
}
