//! Closed-loop command: drive the optimizer against the simulator, stream
//! every event into the ledger file and print the proposal table.

use sortbo::acquisition::CombinedWeights;
use sortbo::ledger::{LedgerError, LedgerWriter};
use sortbo::optimizer::{run_with_observer, LedgerEvent, RunStatus, SimulatorPlant};

use crate::config::RunManifest;
use crate::CliError;

pub fn run(manifest: &RunManifest, weights: CombinedWeights) -> Result<(), CliError> {
    let cfg = manifest.config.optimizer.to_optimization_config(weights);
    let mut plant = SimulatorPlant::new(
        manifest.config.simulator.clone(),
        cfg.duration_s,
        cfg.interval_s,
    );
    let mut writer = LedgerWriter::create(&manifest.ledger_path(), manifest.force)?;

    println!("step   T_R    E_T    S_E");
    let mut write_err: Option<LedgerError> = None;
    let outcome = run_with_observer(&cfg, &mut plant, |event| {
        if write_err.is_none() {
            if let Err(e) = writer.append(&event) {
                write_err = Some(e);
            }
        }
        if let LedgerEvent::Proposal(proposal) = event {
            println!(
                "{:>4}  {:>5.2}  {:>5.2}  {:>5.2}",
                proposal.step,
                proposal.raw.reaction_lines,
                proposal.raw.extended_time,
                proposal.raw.extended_space
            );
        }
    })
    .map_err(|e| match e {
        sortbo::optimizer::OptimizerError::Config(msg) => CliError::Config(msg.to_string()),
        other => CliError::Runtime(other.to_string()),
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    writer.flush()?;

    println!("best: {}", outcome.best);
    match outcome.status {
        RunStatus::ConvergedStable => println!("status: converged (stable proposals)"),
        RunStatus::ConvergedEiFloor => println!("status: converged (acquisition floor)"),
        RunStatus::BudgetExhausted => {
            println!("status: budget exhausted after {} steps", outcome.steps_executed);
        }
    }
    Ok(())
}
