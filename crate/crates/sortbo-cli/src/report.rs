//! Ledger analyses: variance re-bucketing, posterior surface grids and flat
//! CSV export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sortbo::gpr::{fit, GprModel, KernelParams, TrainingSet};
use sortbo::ledger::read_ledger;
use sortbo::metrics::{variance_scaling_fit, ExperimentRecord};
use sortbo::point::ParameterPoint;

use crate::config::RunManifest;
use crate::{CliError, ReportMode};

const BUCKET_SECONDS: [f64; 4] = [5.0, 10.0, 20.0, 40.0];
const LAMBDA_GRID: [f64; 4] = [0.0, 0.01, 0.1, 1.0];
const SURFACE_POINTS_PER_DIM: usize = 20;

/// Starting kernel for the surface fits, matching the optimization loop.
const SURFACE_KERNEL: KernelParams =
    KernelParams { signal_variance: 1.0, length_scales: [1.0, 1.0, 1.0], nugget: 1e-8 };

pub fn run(manifest: &RunManifest, mode: ReportMode) -> Result<(), CliError> {
    let path = manifest.ledger_path();
    let file = read_ledger(&path)
        .map_err(|e| CliError::Runtime(format!("ledger {}: {e}", path.display())))?;
    match mode {
        ReportMode::VarianceStudy => variance_study(manifest, &file.records),
        ReportMode::Surface => surface(manifest, &file.records),
        ReportMode::LedgerCsv => ledger_csv(manifest, &file.records),
    }
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    let file =
        File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn write_failure(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Accept-stream rates of every full `merge`-interval bucket in the record.
/// Partial trailing buckets and undefined rates are dropped.
fn bucket_rates(record: &ExperimentRecord, merge: usize) -> Vec<f64> {
    record
        .intervals
        .chunks(merge)
        .filter(|chunk| chunk.len() == merge)
        .filter_map(|chunk| {
            let merged = chunk
                .iter()
                .skip(1)
                .fold(chunk[0].confusion, |acc, interval| acc.merged(&interval.confusion));
            merged.normalized_rates().0
        })
        .collect()
}

fn variance_study(manifest: &RunManifest, records: &[ExperimentRecord]) -> Result<(), CliError> {
    let mut series = Vec::with_capacity(BUCKET_SECONDS.len());
    for &t in &BUCKET_SECONDS {
        let mut rates = Vec::new();
        for record in records {
            let Some(first) = record.intervals.first() else { continue };
            let merge = t / first.duration_s;
            let rounded = merge.round();
            if rounded < 1.0 || (merge - rounded).abs() > 1e-9 {
                continue;
            }
            rates.extend(bucket_rates(record, rounded as usize));
        }
        if rates.len() < 2 {
            return Err(CliError::Runtime(format!(
                "cannot form at least two {t} s buckets from the ledger intervals"
            )));
        }
        let n = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        series.push((t, var));
    }

    let path = manifest.out_dir.join("variance_study.csv");
    let mut csv = csv_writer(&path)?;
    writeln!(csv, "t_s,tp_n_var").map_err(|e| write_failure(&path, e))?;
    for (t, var) in &series {
        writeln!(csv, "{t},{var}").map_err(|e| write_failure(&path, e))?;
    }
    csv.flush().map_err(|e| write_failure(&path, e))?;

    let slope = variance_scaling_fit(&series)?;
    println!("slope {slope}");
    Ok(())
}

fn fit_stream(
    records: &[ExperimentRecord],
    target: impl Fn(&ExperimentRecord) -> f64,
    noise: impl Fn(&ExperimentRecord) -> f64,
    noise_weight: f64,
    kernel: KernelParams,
    optimize: bool,
) -> Result<GprModel, CliError> {
    let training = TrainingSet::new(
        records.iter().map(|r| r.params).collect(),
        records.iter().map(&target).collect(),
        records.iter().map(&noise).collect(),
        noise_weight,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    fit(training, kernel, optimize).map_err(|e| CliError::Runtime(e.to_string()))
}

fn axis_values(min: f64, max: f64) -> Vec<f64> {
    if max <= min {
        return vec![min];
    }
    let last = (SURFACE_POINTS_PER_DIM - 1) as f64;
    (0..SURFACE_POINTS_PER_DIM).map(|i| min + (max - min) * i as f64 / last).collect()
}

/// Posterior grids for both streams. Hyperparameters come from one fit at the
/// configured noise weight; every grid then reuses them with the weight of
/// its row so the sweep varies only the noise handling.
fn surface(manifest: &RunManifest, records: &[ExperimentRecord]) -> Result<(), CliError> {
    if records.is_empty() {
        return Err(CliError::Runtime("ledger holds no experiment records".into()));
    }
    let base_weight = manifest.config.optimizer.noise_weight;
    let accept_kernel = *fit_stream(
        records,
        |r| r.tp_n_mean,
        |r| r.tp_n_var,
        base_weight,
        SURFACE_KERNEL,
        true,
    )?
    .kernel();
    let reject_kernel = *fit_stream(
        records,
        |r| r.tn_n_mean,
        |r| r.tn_n_var,
        base_weight,
        SURFACE_KERNEL,
        true,
    )?
    .kernel();

    let mut lo = records[0].params.as_array();
    let mut hi = lo;
    for record in records {
        let p = record.params.as_array();
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let axes = [
        axis_values(lo[0], hi[0]),
        axis_values(lo[1], hi[1]),
        axis_values(lo[2], hi[2]),
    ];

    let path = manifest.out_dir.join("surface.csv");
    let mut csv = csv_writer(&path)?;
    writeln!(csv, "lambda,t_r,e_t,s_e,tp_n_mean,tp_n_var,tn_n_mean,tn_n_var")
        .map_err(|e| write_failure(&path, e))?;
    for &lambda in &LAMBDA_GRID {
        let accept =
            fit_stream(records, |r| r.tp_n_mean, |r| r.tp_n_var, lambda, accept_kernel, false)?;
        let reject =
            fit_stream(records, |r| r.tn_n_mean, |r| r.tn_n_var, lambda, reject_kernel, false)?;
        for &t_r in &axes[0] {
            for &e_t in &axes[1] {
                for &s_e in &axes[2] {
                    let query = ParameterPoint::new(t_r, e_t, s_e);
                    let a = accept.predict(&query);
                    let r = reject.predict(&query);
                    writeln!(
                        csv,
                        "{lambda},{t_r},{e_t},{s_e},{},{},{},{}",
                        a.mean, a.variance, r.mean, r.variance
                    )
                    .map_err(|e| write_failure(&path, e))?;
                }
            }
        }
    }
    csv.flush().map_err(|e| write_failure(&path, e))?;
    println!("surface written to {}", path.display());
    Ok(())
}

fn ledger_csv(manifest: &RunManifest, records: &[ExperimentRecord]) -> Result<(), CliError> {
    let path = manifest.out_dir.join("ledger.csv");
    let mut csv = csv_writer(&path)?;
    writeln!(csv, "t_r,e_t,s_e,tp_n_mean,tn_n_mean,tp_n_var,tn_n_var,timestamp")
        .map_err(|e| write_failure(&path, e))?;
    for record in records {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            record.params.reaction_lines,
            record.params.extended_time,
            record.params.extended_space,
            record.tp_n_mean,
            record.tn_n_mean,
            record.tp_n_var,
            record.tn_n_var,
            record.timestamp
        )
        .map_err(|e| write_failure(&path, e))?;
    }
    csv.flush().map_err(|e| write_failure(&path, e))?;
    println!("{} records written to {}", records.len(), path.display());
    Ok(())
}
