//! Wall-clock-budgeted, multi-seed experiment runner.
//!
//! A run executes the full pipeline: load or synthesize the dataset, split,
//! standardize (scaler fitted on the training split only), initialize the
//! network, then iterate the configured optimizer until the budget expires,
//! recording full-split statistics every `eval_interval` iterations plus an
//! initial and a final record. Repeats execute concurrently (one seed per
//! worker, capped by the `HCT_THREADS` environment variable) and aggregate
//! onto a 0.1 s time grid afterwards.

pub mod config;
pub mod trace;

use std::cell::Cell;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub use config::{AdamParams, Algorithm, DataSource, ExperimentConfig};
pub use trace::{
    aggregate, read_aggregate_csv, read_trace_csv, statistic_names, time_bin_index,
    write_aggregate_csv, write_plot_data, write_trace_csv, AggregateSeries, StatSummary,
    TraceRecord,
};

use crate::data::{
    apply_scaler, fit_scaler, generate_synthetic, load_csv, split_train_test, BalancedSampler,
    Dataset, GroupedBatch,
};
use crate::error::{Error, Result};
use crate::fairness::{
    fairness_constraint_gradients, fairness_constraints, hard_positive_rate_report, FairnessSpec,
};
use crate::loss::{bce_gradient, bce_with_logits};
use crate::net::{backward, forward, init_network, NetworkSpec, ParameterVector};
use crate::optim::{AdamState, Branch, Ssw, SslAlm};
use crate::rng::{derive_seed, tags};

/// Caps the number of concurrently executing repeats; defaults to the number
/// of repeats.
pub const THREADS_ENV: &str = "HCT_THREADS";

/// Per-iteration log of the switching decision, for the audit that every
/// over-tolerance estimate took the constraint branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SswAuditRecord {
    pub iteration: usize,
    pub estimate: f64,
    /// Tolerance the estimate was compared against.
    pub eps: f64,
    pub branch: Branch,
}

/// Extremes of the structural SSL-ALM invariants observed over a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SslAlmInvariantTrack {
    pub steps: usize,
    pub max_dual_inf_norm: f64,
    pub min_slack: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    /// Empty unless the run used the switching subgradient method.
    pub ssw_audit: Vec<SswAuditRecord>,
    /// Present only for SSL-ALM runs.
    pub ssl_alm_track: Option<SslAlmInvariantTrack>,
    /// Minibatches drawn, each verified exactly balanced.
    pub balanced_batches: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub runs: Vec<RunResult>,
    pub stat_names: Vec<String>,
    pub aggregates: Vec<AggregateSeries>,
}

pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.data {
        DataSource::Csv {
            path,
            label_column,
            group_column,
        } => load_csv(path, label_column, group_column),
        DataSource::Synthetic { spec, seed } => generate_synthetic(spec, *seed),
    }
}

fn checked_sample(
    sampler: &BalancedSampler<'_>,
    step: usize,
    per_group: usize,
    group_count: usize,
    counter: &Cell<usize>,
) -> Result<GroupedBatch> {
    let batch = sampler.sample(step)?;
    let mut counts = vec![0usize; group_count];
    for &g in &batch.groups {
        counts[g] += 1;
    }
    assert!(
        counts.iter().all(|&c| c == per_group),
        "balanced sampler violated the equal-count contract"
    );
    counter.set(counter.get() + 1);
    Ok(batch)
}

/// Executes one seeded run and returns its trace plus audit data. A
/// non-finite loss or constraint statistic aborts the run with an error
/// naming the iteration and wall time.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    config.validate()?;
    let ds = load_dataset(config)?;
    let (train, test) = split_train_test(&ds, config.test_fraction, derive_seed(seed, tags::SPLIT))?;
    let scaler = fit_scaler(&train);
    let train = apply_scaler(&scaler, &train)?;
    let test = apply_scaler(&scaler, &test)?;

    let net = NetworkSpec::new(train.features.cols(), config.hidden_dims.clone());
    net.validate()?;
    let params0 = init_network(&net, derive_seed(seed, tags::INIT));
    let fairness = FairnessSpec::new(ds.group_count, config.fairness_bound)?;
    let group_count = fairness.group_count;
    let per_group = config.per_group;

    let obj_sampler =
        BalancedSampler::new(&train, per_group, derive_seed(seed, tags::OBJECTIVE_BATCH))?;
    let jac_sampler = BalancedSampler::new(
        &train,
        per_group,
        derive_seed(seed, tags::CONSTRAINT_JACOBIAN_BATCH),
    )?;
    let val_sampler = BalancedSampler::new(
        &train,
        per_group,
        derive_seed(seed, tags::CONSTRAINT_VALUE_BATCH),
    )?;
    let est_sampler = BalancedSampler::new(
        &train,
        per_group,
        derive_seed(seed, tags::CONSTRAINT_ESTIMATE_BATCH),
    )?;
    let batches = Cell::new(0usize);

    let evaluate = |iteration: usize,
                    wall_time: f64,
                    x: &ParameterVector,
                    branch: Option<Branch>|
     -> Result<TraceRecord> {
        let logits_train = forward(&net, x, &train.features)?;
        let logits_test = forward(&net, x, &test.features)?;
        let record = TraceRecord {
            wall_time,
            iteration,
            train_loss: bce_with_logits(&logits_train, &train.labels)?,
            test_loss: bce_with_logits(&logits_test, &test.labels)?,
            train_constraints: fairness_constraints(&logits_train, &train.groups, &fairness)?
                .into_vec(),
            test_constraints: fairness_constraints(&logits_test, &test.groups, &fairness)?
                .into_vec(),
            hard_gaps_train: hard_positive_rate_report(&logits_train, &train.groups, group_count)?
                .gaps,
            hard_gaps_test: hard_positive_rate_report(&logits_test, &test.groups, group_count)?
                .gaps,
            branch,
        };
        if !record.all_finite() {
            return Err(Error::NonFinite(format!(
                "trace statistics at iteration {iteration} (t = {wall_time:.3} s)"
            )));
        }
        Ok(record)
    };

    enum Driver {
        Adam(AdamState),
        SslAlm(SslAlm),
        Ssw(Ssw),
    }

    let mut driver = match config.algorithm {
        Algorithm::Adam => {
            let mut adam = AdamState::new(params0);
            adam.lr = config.adam.lr;
            adam.beta1 = config.adam.beta1;
            adam.beta2 = config.adam.beta2;
            adam.eps_hat = config.adam.eps_hat;
            Driver::Adam(adam)
        }
        Algorithm::SslAlm => Driver::SslAlm(SslAlm::new(
            params0,
            fairness.constraint_count(),
            config.ssl_alm,
        )?),
        Algorithm::Ssw => Driver::Ssw(Ssw::new(params0, config.ssw)?),
    };

    let params_of = |driver: &Driver| -> ParameterVector {
        match driver {
            Driver::Adam(a) => a.x.clone(),
            Driver::SslAlm(o) => o.state.x.clone(),
            Driver::Ssw(o) => o.state.x.clone(),
        }
    };
    let branch_of = |driver: &Driver| -> Option<Branch> {
        match driver {
            Driver::Ssw(o) => o.state.last_branch,
            _ => None,
        }
    };

    let mut records = Vec::new();
    let mut ssw_audit = Vec::new();
    let mut ssl_alm_track = matches!(driver, Driver::SslAlm(_)).then_some(SslAlmInvariantTrack {
        steps: 0,
        max_dual_inf_norm: 0.0,
        min_slack: f64::INFINITY,
    });

    let budget = Duration::from_secs_f64(config.budget_secs);
    let max_iterations = config.max_iterations.unwrap_or(usize::MAX);
    let mut iteration = 0usize;
    let start = Instant::now();

    records.push(evaluate(
        0,
        start.elapsed().as_secs_f64(),
        &params_of(&driver),
        None,
    )?);

    while start.elapsed() < budget && iteration < max_iterations {
        match &mut driver {
            Driver::Adam(adam) => {
                let batch =
                    checked_sample(&obj_sampler, iteration, per_group, group_count, &batches)?;
                let logits = forward(&net, &adam.x, &batch.features)?;
                let upstream = bce_gradient(&logits, &batch.labels)?;
                let grad = backward(&net, &adam.x, &batch.features, &upstream)?;
                adam.step(&grad)?;
            }
            Driver::SslAlm(opt) => {
                let b_obj =
                    checked_sample(&obj_sampler, iteration, per_group, group_count, &batches)?;
                let b_jac =
                    checked_sample(&jac_sampler, iteration, per_group, group_count, &batches)?;
                let b_val =
                    checked_sample(&val_sampler, iteration, per_group, group_count, &batches)?;

                let logits_obj = forward(&net, &opt.state.x, &b_obj.features)?;
                let upstream = bce_gradient(&logits_obj, &b_obj.labels)?;
                let obj_grad = backward(&net, &opt.state.x, &b_obj.features, &upstream)?;

                let logits_jac = forward(&net, &opt.state.x, &b_jac.features)?;
                let c_dual = fairness_constraints(&logits_jac, &b_jac.groups, &fairness)?;
                let jac = fairness_constraint_gradients(&fairness, &net, &opt.state.x, &b_jac)?;

                let logits_val = forward(&net, &opt.state.x, &b_val.features)?;
                let c_penalty = fairness_constraints(&logits_val, &b_val.groups, &fairness)?;

                opt.iteration(&obj_grad, &c_dual, &jac, &c_penalty)?;
                if let Some(track) = ssl_alm_track.as_mut() {
                    track.steps += 1;
                    track.max_dual_inf_norm =
                        track.max_dual_inf_norm.max(opt.state.dual_inf_norm());
                    track.min_slack = track.min_slack.min(opt.state.min_slack());
                }
            }
            Driver::Ssw(opt) => {
                let samples = opt.config.constraint_samples;
                let mut sample_idx = 0usize;
                let estimate = opt.estimate(|x| {
                    let batch = checked_sample(
                        &est_sampler,
                        iteration * samples + sample_idx,
                        per_group,
                        group_count,
                        &batches,
                    )?;
                    sample_idx += 1;
                    let logits = forward(&net, x, &batch.features)?;
                    fairness_constraints(&logits, &batch.groups, &fairness)
                })?;
                let eps_at_decision = opt.state.eps;
                let branch = opt.step(
                    estimate,
                    |x| {
                        let batch = checked_sample(
                            &obj_sampler,
                            iteration,
                            per_group,
                            group_count,
                            &batches,
                        )?;
                        let logits = forward(&net, x, &batch.features)?;
                        let upstream = bce_gradient(&logits, &batch.labels)?;
                        backward(&net, x, &batch.features, &upstream)
                    },
                    |x| {
                        let batch = checked_sample(
                            &jac_sampler,
                            iteration,
                            per_group,
                            group_count,
                            &batches,
                        )?;
                        let logits = forward(&net, x, &batch.features)?;
                        let values = fairness_constraints(&logits, &batch.groups, &fairness)?;
                        let rows = fairness_constraint_gradients(&fairness, &net, x, &batch)?;
                        Ok((values, rows))
                    },
                )?;
                ssw_audit.push(SswAuditRecord {
                    iteration,
                    estimate,
                    eps: eps_at_decision,
                    branch,
                });
            }
        }
        iteration += 1;
        if iteration % config.eval_interval == 0 {
            records.push(evaluate(
                iteration,
                start.elapsed().as_secs_f64(),
                &params_of(&driver),
                branch_of(&driver),
            )?);
        }
    }

    records.push(evaluate(
        iteration,
        start.elapsed().as_secs_f64(),
        &params_of(&driver),
        branch_of(&driver),
    )?);

    Ok(RunResult {
        seed,
        records,
        ssw_audit,
        ssl_alm_track,
        balanced_batches: batches.get(),
    })
}

fn worker_count(repeats: usize) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(repeats)
        .clamp(1, repeats)
}

/// Runs all repeats (seeds `base_seed .. base_seed + repeats`), concurrently
/// up to the `HCT_THREADS` cap, then aggregates the traces.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let seeds: Vec<u64> = (0..config.repeats as u64)
        .map(|i| config.base_seed.wrapping_add(i))
        .collect();
    let threads = worker_count(config.repeats);

    let results: Mutex<Vec<Option<Result<RunResult>>>> =
        Mutex::new(seeds.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let outcome = run_single(config, seeds[i]);
                results.lock().expect("results lock")[i] = Some(outcome);
            });
        }
    });

    let mut runs = Vec::with_capacity(seeds.len());
    for slot in results.into_inner().expect("results lock") {
        runs.push(slot.expect("every repeat scheduled")?);
    }

    let first = &runs[0].records[0];
    let stat_names = statistic_names(
        first.train_constraints.len(),
        first.hard_gaps_train.len(),
    );
    let traces: Vec<Vec<TraceRecord>> = runs.iter().map(|r| r.records.clone()).collect();
    let aggregates = aggregate(&traces)?;
    Ok(ExperimentOutput {
        runs,
        stat_names,
        aggregates,
    })
}

/// Writes per-run traces, the aggregate CSV, and per-panel plot data.
pub fn write_experiment_outputs(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for run in &output.runs {
        write_trace_csv(&run.records, &dir.join(format!("trace_seed{}.csv", run.seed)))?;
    }
    write_aggregate_csv(
        &output.aggregates,
        &output.stat_names,
        &dir.join("aggregate.csv"),
    )?;
    write_plot_data(&output.aggregates, &output.stat_names, dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticSpec;

    fn quick_config(algorithm: Algorithm) -> ExperimentConfig {
        ExperimentConfig {
            algorithm,
            data: DataSource::Synthetic {
                spec: SyntheticSpec {
                    rows: 240,
                    feature_dim: 4,
                    group_count: 2,
                    group_positive_rate: vec![0.8, 0.2],
                    margin: 2.0,
                    noise_std: 0.8,
                },
                seed: 0,
            },
            hidden_dims: vec![8],
            budget_secs: 0.3,
            repeats: 1,
            per_group: 8,
            eval_interval: 10,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn run_respects_budget_and_emits_finite_trace() {
        let cfg = quick_config(Algorithm::Adam);
        let result = run_single(&cfg, 0).unwrap();
        assert!(result.records.len() >= 2);
        assert_eq!(result.records[0].iteration, 0);
        let last = result.records.last().unwrap();
        assert!(last.wall_time >= 0.3);
        for pair in result.records.windows(2) {
            assert!(pair[0].wall_time <= pair[1].wall_time);
            assert!(pair[0].iteration <= pair[1].iteration);
        }
        for r in &result.records {
            assert!(r.all_finite());
        }
        assert!(result.balanced_batches > 0);
    }

    #[test]
    fn same_seed_reproduces_iteration_indexed_statistics() {
        let mut cfg = quick_config(Algorithm::SslAlm);
        cfg.budget_secs = 30.0;
        cfg.max_iterations = Some(60);
        let a = run_single(&cfg, 7).unwrap();
        let b = run_single(&cfg, 7).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.iteration, rb.iteration);
            assert_eq!(ra.stat_values(), rb.stat_values());
        }
        // A different seed must not reproduce them.
        let c = run_single(&cfg, 8).unwrap();
        assert_ne!(
            a.records.last().unwrap().stat_values(),
            c.records.last().unwrap().stat_values()
        );
    }

    #[test]
    fn adam_reduces_train_loss_on_separable_data() {
        let mut cfg = quick_config(Algorithm::Adam);
        if let DataSource::Synthetic { spec, .. } = &mut cfg.data {
            spec.margin = 3.0;
            spec.noise_std = 0.3;
        }
        let result = run_single(&cfg, 1).unwrap();
        let first = result.records.first().unwrap().train_loss;
        let last = result.records.last().unwrap().train_loss;
        assert!(last < first, "train loss {first} -> {last}");
    }

    #[test]
    fn ssl_alm_run_tracks_structural_invariants() {
        let cfg = quick_config(Algorithm::SslAlm);
        let result = run_single(&cfg, 3).unwrap();
        let track = result.ssl_alm_track.unwrap();
        assert!(track.steps > 0);
        assert!(track.max_dual_inf_norm <= cfg.ssl_alm.dual_bound);
        assert!(track.min_slack >= 0.0);
    }

    #[test]
    fn ssw_audit_is_consistent_with_the_switch_rule() {
        let cfg = quick_config(Algorithm::Ssw);
        let result = run_single(&cfg, 5).unwrap();
        assert!(!result.ssw_audit.is_empty());
        for a in &result.ssw_audit {
            if a.estimate > a.eps {
                assert_eq!(a.branch, Branch::Constraint);
            } else {
                assert_eq!(a.branch, Branch::Objective);
            }
        }
        let last = result.records.last().unwrap();
        assert!(last.branch.is_some());
    }

    #[test]
    fn experiment_aggregates_across_repeats_and_writes_outputs() {
        let mut cfg = quick_config(Algorithm::Adam);
        cfg.repeats = 2;
        cfg.budget_secs = 0.2;
        let output = run_experiment(&cfg).unwrap();
        assert_eq!(output.runs.len(), 2);
        assert_eq!(output.runs[0].seed, 0);
        assert_eq!(output.runs[1].seed, 1);
        assert!(!output.aggregates.is_empty());
        for row in &output.aggregates {
            for s in &row.stats {
                assert!(s.min <= s.mean && s.mean <= s.max);
            }
        }

        let dir = std::env::temp_dir().join(format!("hct-exp-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        write_experiment_outputs(&output, &dir).unwrap();
        assert!(dir.join("trace_seed0.csv").exists());
        assert!(dir.join("trace_seed1.csv").exists());
        assert!(dir.join("aggregate.csv").exists());
        assert!(dir.join("plot_loss.csv").exists());
        assert!(dir.join("plot_c0.csv").exists());

        let back = read_trace_csv(&dir.join("trace_seed0.csv")).unwrap();
        let mut original = output.runs[0].records.clone();
        for r in original.iter_mut() {
            r.branch = None;
        }
        assert_eq!(back, original);
    }
}
