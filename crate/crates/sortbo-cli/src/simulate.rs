//! Single-experiment command: run the plant once, record the result and
//! print the aggregate rates.

use sortbo::ledger::LedgerWriter;
use sortbo::metrics::aggregate_experiment;
use sortbo::point::ParameterPoint;
use sortbo::simulator::run_experiment;

use crate::config::RunManifest;
use crate::CliError;

pub fn run(manifest: &RunManifest, params: ParameterPoint) -> Result<(), CliError> {
    let settings = &manifest.config.optimizer;
    let intervals = run_experiment(
        &manifest.config.simulator,
        &params,
        settings.duration_s,
        settings.interval_s,
    )?;
    let record = aggregate_experiment(params, &intervals)?;

    let mut writer = LedgerWriter::create(&manifest.ledger_path(), manifest.force)?;
    writer.append_record(&record)?;
    writer.flush()?;

    let total = intervals
        .iter()
        .skip(1)
        .fold(intervals[0].confusion, |acc, interval| acc.merged(&interval.confusion));
    println!("tp_n {}", record.tp_n_mean);
    println!("tn_n {}", record.tn_n_mean);
    println!("accuracy {}", total.accuracy()?);
    Ok(())
}
