//! Grid sweep: measure every grid point, append the records in grid order
//! and export the response-surface table.

use std::fs::File;
use std::io::{BufWriter, Write};

use rayon::prelude::*;
use sortbo::acquisition::CombinedWeights;
use sortbo::ledger::LedgerWriter;
use sortbo::metrics::{aggregate_experiment, ExperimentRecord};
use sortbo::optimizer::{build_initial_design, reference_best};
use sortbo::simulator::{mix_seed, run_experiment};

use crate::config::RunManifest;
use crate::CliError;

pub fn run(
    manifest: &RunManifest,
    grid: &[Vec<f64>; 3],
    weights: &CombinedWeights,
) -> Result<(), CliError> {
    let points = build_initial_design(&grid[0], &grid[1], &grid[2]);
    let simulator = &manifest.config.simulator;
    let settings = &manifest.config.optimizer;

    // Points are measured in parallel; the per-point seed depends only on the
    // grid index, so the records are identical for any worker count.
    let results: Vec<Result<ExperimentRecord, String>> = points
        .par_iter()
        .enumerate()
        .map(|(index, point)| {
            let mut config = simulator.clone();
            config.seed = mix_seed(simulator.seed, index as u64);
            run_experiment(&config, point, settings.duration_s, settings.interval_s)
                .map_err(|e| e.to_string())
                .and_then(|intervals| {
                    aggregate_experiment(*point, &intervals).map_err(|e| e.to_string())
                })
                .map(|mut record| {
                    record.timestamp = index as f64 * f64::from(settings.duration_s);
                    record
                })
        })
        .collect();

    let mut writer = LedgerWriter::create(&manifest.ledger_path(), manifest.force)?;
    let csv_path = manifest.out_dir.join("sweep.csv");
    let file = File::create(&csv_path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", csv_path.display())))?;
    let mut csv = BufWriter::new(file);
    let io_err = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", csv_path.display()));
    writeln!(csv, "t_r,e_t,s_e,tp_n_mean,tn_n_mean,tp_n_var,tn_n_var").map_err(io_err)?;

    let mut records = Vec::new();
    let mut failures = 0usize;
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(record) => {
                writer.append_record(&record)?;
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    record.params.reaction_lines,
                    record.params.extended_time,
                    record.params.extended_space,
                    record.tp_n_mean,
                    record.tn_n_mean,
                    record.tp_n_var,
                    record.tn_n_var
                )
                .map_err(io_err)?;
                records.push(record);
            }
            Err(message) => {
                eprintln!("grid point {} failed: {message}", points[index]);
                failures += 1;
            }
        }
    }
    writer.flush()?;
    csv.flush().map_err(io_err)?;

    if !records.is_empty() {
        let best = reference_best(&records, weights)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("reference optimum: {best}");
    }
    println!("{} of {} grid points measured", records.len(), points.len());
    if failures > 0 {
        return Err(CliError::Runtime(format!("{failures} grid points failed")));
    }
    Ok(())
}
