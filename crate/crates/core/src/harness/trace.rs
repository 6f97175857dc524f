//! Trace records, 0.1 s time-bin aggregation, and the CSV formats.
//!
//! Trace CSV schema (per run):
//! `wall_time,iteration,train_loss,test_loss,train_c0..,test_c0..,train_gap0..,test_gap0..`
//!
//! Aggregate CSV schema: `time_bin,` then `{stat}_mean,{stat}_min,{stat}_max`
//! per statistic. Values are written with 17 significant digits so the files
//! parse back to bit-identical doubles.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::optim::Branch;

/// Timestamped loss/constraint measurements emitted during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Seconds since the start of the optimization loop; nondecreasing.
    pub wall_time: f64,
    pub iteration: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    /// Soft constraint values on the full train split (split one-sided form).
    pub train_constraints: Vec<f64>,
    pub test_constraints: Vec<f64>,
    /// Hard positive-rate gaps per group.
    pub hard_gaps_train: Vec<f64>,
    pub hard_gaps_test: Vec<f64>,
    /// Branch taken by the most recent switching-subgradient step, when the
    /// run uses that optimizer. Not serialized to CSV.
    pub branch: Option<Branch>,
}

impl TraceRecord {
    pub fn all_finite(&self) -> bool {
        self.wall_time.is_finite() && self.stat_values().iter().all(|v| v.is_finite())
    }

    /// Statistics in trace-schema order.
    pub fn stat_values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(
            2 + self.train_constraints.len() * 2 + self.hard_gaps_train.len() * 2,
        );
        v.push(self.train_loss);
        v.push(self.test_loss);
        v.extend_from_slice(&self.train_constraints);
        v.extend_from_slice(&self.test_constraints);
        v.extend_from_slice(&self.hard_gaps_train);
        v.extend_from_slice(&self.hard_gaps_test);
        v
    }
}

/// Statistic names in trace-schema order for a problem with `m` constraint
/// components and `group_count` groups.
pub fn statistic_names(m: usize, group_count: usize) -> Vec<String> {
    let mut names = vec!["train_loss".to_string(), "test_loss".to_string()];
    names.extend((0..m).map(|i| format!("train_c{i}")));
    names.extend((0..m).map(|i| format!("test_c{i}")));
    names.extend((0..group_count).map(|g| format!("train_gap{g}")));
    names.extend((0..group_count).map(|g| format!("test_gap{g}")));
    names
}

fn fmt_f64(v: f64) -> String {
    // 17 significant digits: exact f64 round trip.
    format!("{v:.16e}")
}

fn parse_f64(field: &str, path: &Path) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::CsvFormat {
        path: path.display().to_string(),
        message: format!("expected a number, got '{field}'"),
    })
}

/// Writes one run's trace. The schema is inferred from the records, so the
/// list must be nonempty.
pub fn write_trace_csv(records: &[TraceRecord], path: &Path) -> Result<()> {
    let first = records
        .first()
        .ok_or_else(|| Error::Config("cannot write an empty trace".into()))?;
    let m = first.train_constraints.len();
    let g = first.hard_gaps_train.len();
    let mut out = String::from("wall_time,iteration,");
    out.push_str(&statistic_names(m, g).join(","));
    out.push('\n');
    for r in records {
        write!(out, "{},{}", fmt_f64(r.wall_time), r.iteration).expect("string write");
        for v in r.stat_values() {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::CsvFormat {
        path: path.display().to_string(),
        message: "empty trace file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').collect();
    let m = columns.iter().filter(|c| c.starts_with("train_c")).count();
    let g = columns
        .iter()
        .filter(|c| c.starts_with("train_gap"))
        .count();
    let expected = 2 + 2 + 2 * m + 2 * g;
    if columns.len() != expected {
        return Err(Error::CsvFormat {
            path: path.display().to_string(),
            message: format!("expected {expected} columns, got {}", columns.len()),
        });
    }

    let mut records = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(Error::CsvFormat {
                path: path.display().to_string(),
                message: format!("expected {expected} fields, got {}", fields.len()),
            });
        }
        let wall_time = parse_f64(fields[0], path)?;
        let iteration = fields[1].trim().parse().map_err(|_| Error::CsvFormat {
            path: path.display().to_string(),
            message: format!("bad iteration '{}'", fields[1]),
        })?;
        let nums: Vec<f64> = fields[2..]
            .iter()
            .map(|f| parse_f64(f, path))
            .collect::<Result<_>>()?;
        records.push(TraceRecord {
            wall_time,
            iteration,
            train_loss: nums[0],
            test_loss: nums[1],
            train_constraints: nums[2..2 + m].to_vec(),
            test_constraints: nums[2 + m..2 + 2 * m].to_vec(),
            hard_gaps_train: nums[2 + 2 * m..2 + 2 * m + g].to_vec(),
            hard_gaps_test: nums[2 + 2 * m + g..].to_vec(),
            branch: None,
        });
    }
    Ok(records)
}

/// Mean/min/max of one statistic across repeats, in one time bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Aggregated statistics at one 0.1 s time bin.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateSeries {
    /// Multiple of 0.1 s.
    pub time_bin: f64,
    /// One summary per statistic, in trace-schema order.
    pub stats: Vec<StatSummary>,
}

/// Nearest 0.1 s bin, half up: 0.24 s -> bin 2, 0.25 s -> bin 3.
pub fn time_bin_index(wall_time: f64) -> usize {
    (wall_time * 10.0 + 0.5).floor() as usize
}

/// Aggregates repeats onto the dense 0.1 s bin grid. Within a run, the last
/// record in a bin wins; bins a run never visited are filled by carrying the
/// nearest earlier observation forward (the first observation backward, for
/// leading bins) before taking mean/min/max across runs.
pub fn aggregate(runs: &[Vec<TraceRecord>]) -> Result<Vec<AggregateSeries>> {
    if runs.is_empty() || runs.iter().any(Vec::is_empty) {
        return Err(Error::Config("aggregation needs at least one nonempty run".into()));
    }
    let stat_count = runs[0][0].stat_values().len();
    let mut max_bin = 0;
    let mut per_run: Vec<std::collections::BTreeMap<usize, Vec<f64>>> = Vec::new();
    for run in runs {
        let mut bins = std::collections::BTreeMap::new();
        for record in run {
            let values = record.stat_values();
            if values.len() != stat_count {
                return Err(Error::dim("trace statistics", stat_count, values.len()));
            }
            let bin = time_bin_index(record.wall_time);
            max_bin = max_bin.max(bin);
            bins.insert(bin, values);
        }
        per_run.push(bins);
    }

    // Dense fill per run.
    let filled: Vec<Vec<Vec<f64>>> = per_run
        .iter()
        .map(|bins| {
            let first = bins.values().next().expect("nonempty run").clone();
            let mut current = first;
            (0..=max_bin)
                .map(|bin| {
                    if let Some(v) = bins.get(&bin) {
                        current = v.clone();
                    }
                    current.clone()
                })
                .collect()
        })
        .collect();

    let mut series = Vec::with_capacity(max_bin + 1);
    for bin in 0..=max_bin {
        let mut stats = Vec::with_capacity(stat_count);
        for s in 0..stat_count {
            let mut mean = 0.0;
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for run in &filled {
                let v = run[bin][s];
                mean += v;
                min = min.min(v);
                max = max.max(v);
            }
            mean /= filled.len() as f64;
            stats.push(StatSummary { mean, min, max });
        }
        series.push(AggregateSeries {
            time_bin: bin as f64 / 10.0,
            stats,
        });
    }
    Ok(series)
}

/// Writes the aggregate CSV; an empty series produces a header-only file.
pub fn write_aggregate_csv(
    series: &[AggregateSeries],
    names: &[String],
    path: &Path,
) -> Result<()> {
    let mut out = String::from("time_bin");
    for name in names {
        write!(out, ",{name}_mean,{name}_min,{name}_max").expect("string write");
    }
    out.push('\n');
    for row in series {
        if row.stats.len() != names.len() {
            return Err(Error::dim("aggregate statistics", names.len(), row.stats.len()));
        }
        out.push_str(&row.time_bin.to_string());
        for s in &row.stats {
            write!(
                out,
                ",{},{},{}",
                fmt_f64(s.mean),
                fmt_f64(s.min),
                fmt_f64(s.max)
            )
            .expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_aggregate_csv(path: &Path) -> Result<(Vec<String>, Vec<AggregateSeries>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::CsvFormat {
        path: path.display().to_string(),
        message: "empty aggregate file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.first() != Some(&"time_bin") || (columns.len() - 1) % 3 != 0 {
        return Err(Error::CsvFormat {
            path: path.display().to_string(),
            message: "malformed aggregate header".into(),
        });
    }
    let names: Vec<String> = columns[1..]
        .chunks(3)
        .map(|chunk| {
            chunk[0]
                .strip_suffix("_mean")
                .map(str::to_string)
                .ok_or_else(|| Error::CsvFormat {
                    path: path.display().to_string(),
                    message: format!("expected a *_mean column, got '{}'", chunk[0]),
                })
        })
        .collect::<Result<_>>()?;

    let mut series = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::CsvFormat {
                path: path.display().to_string(),
                message: format!("expected {} fields, got {}", columns.len(), fields.len()),
            });
        }
        let time_bin = parse_f64(fields[0], path)?;
        let stats = fields[1..]
            .chunks(3)
            .map(|chunk| {
                Ok(StatSummary {
                    mean: parse_f64(chunk[0], path)?,
                    min: parse_f64(chunk[1], path)?,
                    max: parse_f64(chunk[2], path)?,
                })
            })
            .collect::<Result<_>>()?;
        series.push(AggregateSeries { time_bin, stats });
    }
    Ok((names, series))
}

/// One file per figure panel (the loss and each constraint component), with
/// columns `time_bin,train_mean,train_min,train_max,test_mean,test_min,test_max`.
pub fn write_plot_data(
    series: &[AggregateSeries],
    names: &[String],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let index_of = |name: &str| names.iter().position(|n| n == name);
    let m = names.iter().filter(|n| n.starts_with("train_c")).count();

    let mut panels: Vec<(String, usize, usize)> = Vec::new();
    if let (Some(a), Some(b)) = (index_of("train_loss"), index_of("test_loss")) {
        panels.push(("loss".to_string(), a, b));
    }
    for i in 0..m {
        if let (Some(a), Some(b)) = (index_of(&format!("train_c{i}")), index_of(&format!("test_c{i}"))) {
            panels.push((format!("c{i}"), a, b));
        }
    }

    let mut written = Vec::with_capacity(panels.len());
    for (panel, train_idx, test_idx) in panels {
        let mut out = String::from(
            "time_bin,train_mean,train_min,train_max,test_mean,test_min,test_max\n",
        );
        for row in series {
            let tr = &row.stats[train_idx];
            let te = &row.stats[test_idx];
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.time_bin,
                fmt_f64(tr.mean),
                fmt_f64(tr.min),
                fmt_f64(tr.max),
                fmt_f64(te.mean),
                fmt_f64(te.min),
                fmt_f64(te.max)
            )
            .expect("string write");
        }
        let path = dir.join(format!("plot_{panel}.csv"));
        fs::write(&path, out)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(wall_time: f64, iteration: usize, value: f64) -> TraceRecord {
        TraceRecord {
            wall_time,
            iteration,
            train_loss: value,
            test_loss: value + 0.5,
            train_constraints: vec![value * 0.1, -value * 0.1],
            test_constraints: vec![value * 0.2, -value * 0.2],
            hard_gaps_train: vec![value.abs() * 0.01],
            hard_gaps_test: vec![value.abs() * 0.02],
            branch: None,
        }
    }

    #[test]
    fn binning_rounds_half_up() {
        assert_eq!(time_bin_index(0.24), 2);
        assert_eq!(time_bin_index(0.25), 3);
        assert_eq!(time_bin_index(0.0), 0);
        assert_eq!(time_bin_index(0.04999), 0);
        assert_eq!(time_bin_index(59.96), 600);
    }

    #[test]
    fn single_run_collapses_to_its_own_values() {
        let runs = vec![vec![record(0.01, 0, 1.0), record(0.21, 20, 2.0)]];
        let series = aggregate(&runs).unwrap();
        assert_eq!(series.len(), 3); // bins 0.0, 0.1, 0.2
        for row in &series {
            for s in &row.stats {
                assert_eq!(s.mean, s.min);
                assert_eq!(s.mean, s.max);
            }
        }
        // Bin 0.1 is filled by carrying bin 0 forward.
        assert_eq!(series[1].stats[0].mean, 1.0);
        assert_eq!(series[2].stats[0].mean, 2.0);
    }

    #[test]
    fn two_runs_mean_min_max() {
        let runs = vec![vec![record(0.0, 0, 1.0)], vec![record(0.0, 0, 3.0)]];
        let series = aggregate(&runs).unwrap();
        assert_eq!(series.len(), 1);
        let s = &series[0].stats[0];
        assert_eq!((s.mean, s.min, s.max), (2.0, 1.0, 3.0));
    }

    #[test]
    fn missing_bins_are_carried_forward_per_run() {
        let runs = vec![
            vec![record(0.0, 0, 1.0), record(0.4, 40, 5.0)],
            vec![record(0.0, 0, 3.0), record(0.2, 20, 7.0), record(0.4, 40, 9.0)],
        ];
        let series = aggregate(&runs).unwrap();
        assert_eq!(series.len(), 5);
        // Bin 0.2: run 0 carries 1.0 forward, run 1 observed 7.0.
        assert_eq!(series[2].stats[0].mean, 4.0);
        assert_eq!(series[2].stats[0].min, 1.0);
        assert_eq!(series[2].stats[0].max, 7.0);
        // Every bin satisfies min <= mean <= max.
        for row in &series {
            for s in &row.stats {
                assert!(s.min <= s.mean && s.mean <= s.max);
            }
        }
    }

    #[test]
    fn later_record_wins_within_a_bin() {
        let runs = vec![vec![record(0.20, 20, 1.0), record(0.24, 24, 2.0)]];
        let series = aggregate(&runs).unwrap();
        assert_eq!(series[2].stats[0].mean, 2.0);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[vec![]]).is_err());
    }

    #[test]
    fn trace_csv_round_trips_bit_exactly() {
        let dir = std::env::temp_dir().join(format!("hct-trace-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trace.csv");
        let records = vec![
            record(0.0123456789012345, 0, 0.6931471805599453),
            record(1.0 / 3.0, 20, -1.234567890123456e-7),
            record(59.999999, 4021, 2.1269280110429727),
        ];
        write_trace_csv(&records, &path).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(records, back);
        // Column count: wall_time, iteration, plus train/test of
        // (loss, m constraints, group_count gaps).
        let header = std::fs::read_to_string(&path).unwrap();
        let cols = header.lines().next().unwrap().split(',').count();
        assert_eq!(cols, 2 + 2 * (1 + 2 + 1));
    }

    #[test]
    fn aggregate_csv_round_trips_and_supports_empty_series() {
        let dir = std::env::temp_dir().join(format!("hct-agg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("aggregate.csv");
        let names = statistic_names(2, 1);
        let runs = vec![vec![record(0.0, 0, 1.0), record(0.17, 20, 0.5)]];
        let series = aggregate(&runs).unwrap();
        write_aggregate_csv(&series, &names, &path).unwrap();
        let (names_back, series_back) = read_aggregate_csv(&path).unwrap();
        assert_eq!(names, names_back);
        assert_eq!(series, series_back);

        let empty_path = dir.join("empty.csv");
        write_aggregate_csv(&[], &names, &empty_path).unwrap();
        let text = std::fs::read_to_string(&empty_path).unwrap();
        assert_eq!(text.lines().count(), 1);
        let (names_back, series_back) = read_aggregate_csv(&empty_path).unwrap();
        assert_eq!(names, names_back);
        assert!(series_back.is_empty());
    }

    #[test]
    fn plot_data_emits_one_file_per_panel() {
        let dir = std::env::temp_dir().join(format!("hct-plot-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let names = statistic_names(2, 1);
        let runs = vec![vec![record(0.0, 0, 1.0)]];
        let series = aggregate(&runs).unwrap();
        let files = write_plot_data(&series, &names, &dir).unwrap();
        assert_eq!(files.len(), 3); // loss, c0, c1
        for f in &files {
            let text = std::fs::read_to_string(f).unwrap();
            let header = text.lines().next().unwrap();
            assert_eq!(header.split(',').count(), 7);
        }
    }
}
