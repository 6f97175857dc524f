//! Positive-rate fairness constraints.
//!
//! For each protected group the absolute difference between the group's
//! positive rate and the overall positive rate is bounded by `c`. Training
//! uses a smooth surrogate (the mean sigmoid score, "soft" positive rate);
//! the hard thresholded rate is reported separately and never differentiated.
//! Each absolute-value bound is split into two one-sided constraints, so a
//! problem with `|G|` groups has `m = 2|G|` constraint components with the
//! convention feasible <=> every component <= 0.

use std::ops::Deref;

use crate::data::GroupedBatch;
use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::net::{backward, forward, GradientVector, NetworkSpec, ParameterVector};

/// Smooth surrogate used for the constraint values and gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surrogate {
    /// Mean sigmoid score per group.
    SoftRate,
}

#[derive(Clone, Debug)]
pub struct FairnessSpec {
    pub group_count: usize,
    /// Per-group positive-rate gap bound `c`.
    pub bound: f64,
    pub surrogate: Surrogate,
}

impl FairnessSpec {
    pub fn new(group_count: usize, bound: f64) -> Result<Self> {
        if group_count < 2 {
            return Err(Error::Config(format!(
                "fairness needs at least 2 groups, got {group_count}"
            )));
        }
        if !(bound > 0.0) {
            return Err(Error::Config(format!(
                "fairness bound must be positive, got {bound}"
            )));
        }
        Ok(FairnessSpec {
            group_count,
            bound,
            surrogate: Surrogate::SoftRate,
        })
    }

    /// Two one-sided components per group.
    pub fn constraint_count(&self) -> usize {
        2 * self.group_count
    }
}

/// Sampled constraint values; feasible <=> every entry <= 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintVector(Vec<f64>);

impl ConstraintVector {
    pub fn from_vec(values: Vec<f64>) -> Self {
        ConstraintVector(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max_component(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_feasible(&self) -> bool {
        self.0.iter().all(|&v| v <= 0.0)
    }
}

impl Deref for ConstraintVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ConstraintVector {
    fn from(values: Vec<f64>) -> Self {
        ConstraintVector(values)
    }
}

fn group_counts(groups: &[usize], group_count: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; group_count];
    for &g in groups {
        if g >= group_count {
            return Err(Error::GroupOutOfRange { group: g, group_count });
        }
        counts[g] += 1;
    }
    for (g, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(Error::EmptyGroup { group: g });
        }
    }
    Ok(counts)
}

/// Soft positive rates: mean sigmoid score overall and per group.
pub fn soft_positive_rates(
    logits: &[f64],
    groups: &[usize],
    group_count: usize,
) -> Result<(f64, Vec<f64>)> {
    if logits.len() != groups.len() {
        return Err(Error::dim("logits vs groups", groups.len(), logits.len()));
    }
    let counts = group_counts(groups, group_count)?;
    let mut per_group = vec![0.0; group_count];
    let mut overall = 0.0;
    for (&z, &g) in logits.iter().zip(groups) {
        let s = sigmoid(z);
        per_group[g] += s;
        overall += s;
    }
    for (r, &n) in per_group.iter_mut().zip(&counts) {
        *r /= n as f64;
    }
    overall /= logits.len() as f64;
    Ok((overall, per_group))
}

/// Constraint vector in the split one-sided form: entries `2g` and `2g+1` are
/// `rate_g - rate_all - c` and `rate_all - rate_g - c`.
pub fn fairness_constraints(
    logits: &[f64],
    groups: &[usize],
    spec: &FairnessSpec,
) -> Result<ConstraintVector> {
    let (overall, per_group) = soft_positive_rates(logits, groups, spec.group_count)?;
    let mut values = Vec::with_capacity(spec.constraint_count());
    for rate in per_group {
        let gap = rate - overall;
        values.push(gap - spec.bound);
        values.push(-gap - spec.bound);
    }
    Ok(ConstraintVector(values))
}

/// Exact gradient of each constraint component with respect to the network
/// parameters (one Jacobian row per component). Row `2g+1` is the negation of
/// row `2g`.
pub fn fairness_constraint_gradients(
    spec: &FairnessSpec,
    net: &NetworkSpec,
    params: &ParameterVector,
    batch: &GroupedBatch,
) -> Result<Vec<GradientVector>> {
    let logits = forward(net, params, &batch.features)?;
    let counts = group_counts(&batch.groups, spec.group_count)?;
    let b = logits.len() as f64;
    // d sigma / d z per row.
    let sig_deriv: Vec<f64> = logits
        .iter()
        .map(|&z| {
            let s = sigmoid(z);
            s * (1.0 - s)
        })
        .collect();

    let mut rows = Vec::with_capacity(spec.constraint_count());
    for g in 0..spec.group_count {
        let n_g = counts[g] as f64;
        let upstream: Vec<f64> = batch
            .groups
            .iter()
            .zip(&sig_deriv)
            .map(|(&gi, &d)| {
                let in_group = if gi == g { 1.0 / n_g } else { 0.0 };
                d * (in_group - 1.0 / b)
            })
            .collect();
        let row = backward(net, params, &batch.features, &upstream)?;
        let negated = row.negated();
        rows.push(row);
        rows.push(negated);
    }
    Ok(rows)
}

/// Positive rates under the hard decision rule `logit > 0`, plus per-group
/// absolute gaps. Reporting only; not differentiable.
#[derive(Clone, Debug, PartialEq)]
pub struct HardRateReport {
    pub overall: f64,
    pub per_group: Vec<f64>,
    pub gaps: Vec<f64>,
}

pub fn hard_positive_rate_report(
    logits: &[f64],
    groups: &[usize],
    group_count: usize,
) -> Result<HardRateReport> {
    if logits.len() != groups.len() {
        return Err(Error::dim("logits vs groups", groups.len(), logits.len()));
    }
    let counts = group_counts(groups, group_count)?;
    let mut per_group = vec![0.0; group_count];
    let mut overall = 0.0;
    for (&z, &g) in logits.iter().zip(groups) {
        if z > 0.0 {
            per_group[g] += 1.0;
            overall += 1.0;
        }
    }
    for (r, &n) in per_group.iter_mut().zip(&counts) {
        *r /= n as f64;
    }
    overall /= logits.len() as f64;
    let gaps = per_group.iter().map(|&r| (r - overall).abs()).collect();
    Ok(HardRateReport {
        overall,
        per_group,
        gaps,
    })
}
