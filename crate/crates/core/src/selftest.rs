//! Numeric self-tests: backprop vs central finite differences, and the
//! nonnegative projection vs a brute-force grid search. Shared by the CLI
//! `check` subcommand and the acceptance suite.

use rand::Rng;

use crate::data::GroupedBatch;
use crate::error::Result;
use crate::fairness::{fairness_constraint_gradients, fairness_constraints, FairnessSpec};
use crate::loss::{bce_gradient, bce_with_logits};
use crate::matrix::Matrix;
use crate::net::{
    backward, finite_difference_gradient, forward, init_network, min_relu_input_magnitude,
    NetworkSpec,
};
use crate::optim::project_nonneg;
use crate::rng::rng_from_seed;

/// `||a - b||_inf / max(||a||_inf, ||b||_inf, 1)`.
pub fn max_norm_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    let scale = a
        .iter()
        .chain(b)
        .map(|v| v.abs())
        .fold(1.0f64, f64::max);
    diff / scale
}

#[derive(Clone, Debug)]
pub struct GradientCheckSummary {
    /// Configurations actually checked (kink-free ones).
    pub configs: usize,
    /// Worst relative error over the objective gradient checks.
    pub max_loss_error: f64,
    /// Worst relative error over all constraint Jacobian rows.
    pub max_constraint_error: f64,
}

impl GradientCheckSummary {
    pub fn max_error(&self) -> f64 {
        self.max_loss_error.max(self.max_constraint_error)
    }
}

/// Checks backprop gradients of BCE-of-forward and of every fairness
/// constraint component against central finite differences (h = 1e-6) on
/// `count` random (network, batch) configurations. Configurations with a ReLU
/// input within 1e-4 of zero are redrawn, so the comparison stays away from
/// the subgradient kink.
pub fn gradient_check_random_configs(count: usize, seed: u64) -> Result<GradientCheckSummary> {
    const KINK_MARGIN: f64 = 1e-4;
    const FD_STEP: f64 = 1e-6;

    let mut rng = rng_from_seed(seed);
    let mut summary = GradientCheckSummary {
        configs: 0,
        max_loss_error: 0.0,
        max_constraint_error: 0.0,
    };

    let mut attempts = 0;
    while summary.configs < count {
        attempts += 1;
        assert!(attempts < count * 20, "could not sample kink-free configs");

        let input_dim = rng.random_range(2..6);
        let depth = rng.random_range(0..3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..6)).collect();
        let net = NetworkSpec::new(input_dim, hidden);
        let params = init_network(&net, rng.random());

        let group_count = rng.random_range(2..4usize);
        let per_group = rng.random_range(2..5usize);
        let batch_rows = group_count * per_group;
        let mut rows = Vec::with_capacity(batch_rows);
        let mut labels = Vec::with_capacity(batch_rows);
        let mut groups = Vec::with_capacity(batch_rows);
        for r in 0..batch_rows {
            rows.push((0..input_dim).map(|_| rng.random_range(-1.5..1.5)).collect());
            labels.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
            groups.push(r % group_count);
        }
        let batch = GroupedBatch {
            features: Matrix::from_rows(&rows)?,
            labels,
            groups,
        };

        if min_relu_input_magnitude(&net, &params, &batch.features)? < KINK_MARGIN {
            continue;
        }

        // Objective: BCE composed with the forward pass.
        let logits = forward(&net, &params, &batch.features)?;
        let upstream = bce_gradient(&logits, &batch.labels)?;
        let analytic = backward(&net, &params, &batch.features, &upstream)?;
        let numeric = finite_difference_gradient(
            |p| {
                let z = forward(&net, p, &batch.features).expect("forward in oracle");
                bce_with_logits(&z, &batch.labels).expect("loss in oracle")
            },
            &params,
            FD_STEP,
        );
        let err = max_norm_relative_error(&analytic, &numeric);
        summary.max_loss_error = summary.max_loss_error.max(err);

        // Every fairness constraint component.
        let fairness = FairnessSpec::new(group_count, 0.05)?;
        let jac = fairness_constraint_gradients(&fairness, &net, &params, &batch)?;
        for (i, row) in jac.iter().enumerate() {
            let numeric = finite_difference_gradient(
                |p| {
                    let z = forward(&net, p, &batch.features).expect("forward in oracle");
                    fairness_constraints(&z, &batch.groups, &fairness).expect("constraints")[i]
                },
                &params,
                FD_STEP,
            );
            let err = max_norm_relative_error(row, &numeric);
            summary.max_constraint_error = summary.max_constraint_error.max(err);
        }

        summary.configs += 1;
    }
    Ok(summary)
}

/// Verifies on a 2-D grid that [`project_nonneg`] returns the closest
/// nonnegative point.
pub fn projection_grid_check() -> bool {
    for &v in &[[-1.3, 0.4], [0.2, -2.0], [-0.5, -0.5], [1.0, 2.0]] {
        let p = project_nonneg(&v);
        if p.iter().any(|&x| x < 0.0) {
            return false;
        }
        let dist = |w: &[f64]| -> f64 {
            w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let best = dist(&p);
        for i in 0..=50 {
            for j in 0..=50 {
                let w = [i as f64 * 0.1, j as f64 * 0.1];
                if dist(&w) < best - 1e-12 {
                    return false;
                }
            }
        }
    }
    true
}
