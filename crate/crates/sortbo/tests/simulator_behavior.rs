//! Statistical behavior of the virtual plant: where the reject recall peaks,
//! which way the spatial extension trades the two recalls, and how interval
//! variance scales with acquisition time.

use sortbo::metrics::{aggregate_experiment, variance_scaling_fit};
use sortbo::point::ParameterPoint;
use sortbo::simulator::{run_experiment, SimulatorConfig};

/// Mean normalized rates at one parameter point, averaged over independent
/// plant seeds.
fn mean_rates_over_seeds(point: ParameterPoint, seeds: std::ops::Range<u64>) -> (f64, f64) {
    let mut tp_sum = 0.0;
    let mut tn_sum = 0.0;
    let n = (seeds.end - seeds.start) as f64;
    for seed in seeds {
        let config = SimulatorConfig { seed, ..SimulatorConfig::default() };
        let intervals = run_experiment(&config, &point, 300, 10).unwrap();
        let record = aggregate_experiment(point, &intervals).unwrap();
        tp_sum += record.tp_n_mean;
        tn_sum += record.tn_n_mean;
    }
    (tp_sum / n, tn_sum / n)
}

#[test]
fn reject_recall_peaks_at_the_true_transit_plus_nozzle_delay() {
    // Default geometry puts the physical optimum at 13.5 + 1.5 = 15 lines.
    let mut best_tr = 0;
    let mut best_tn = f64::NEG_INFINITY;
    for tr in 10..=20 {
        let (_, tn) = mean_rates_over_seeds(ParameterPoint::new(tr as f64, 0.0, 0.0), 0..20);
        if tn > best_tn {
            best_tn = tn;
            best_tr = tr;
        }
    }
    assert!(
        (14..=16).contains(&best_tr),
        "mean TN_n peaked at T_R {best_tr}, expected within one line of 15"
    );
}

#[test]
fn widening_the_spatial_extension_trades_accept_recall_for_reject_recall() {
    let (tp_narrow, tn_narrow) = mean_rates_over_seeds(ParameterPoint::new(15.0, 0.0, 0.0), 0..20);
    let (tp_wide, tn_wide) = mean_rates_over_seeds(ParameterPoint::new(15.0, 0.0, 8.0), 0..20);
    assert!(
        tn_wide >= tn_narrow,
        "widening S_E should not lower mean TN_n: {tn_narrow} -> {tn_wide}"
    );
    assert!(
        tp_wide <= tp_narrow,
        "widening S_E should not raise mean TP_n: {tp_narrow} -> {tp_wide}"
    );
    // The trade is real, not a tie.
    assert!(tn_wide - tn_narrow > 0.01);
    assert!(tp_narrow - tp_wide > 0.001);
}

#[test]
fn interval_variance_scales_inversely_with_acquisition_time() {
    let config = SimulatorConfig::default();
    let point = ParameterPoint::new(15.0, 2.0, 2.0);
    let fine = run_experiment(&config, &point, 2400, 5).unwrap();

    let mut series = Vec::new();
    for merge in [1usize, 2, 4, 8] {
        let rates: Vec<f64> = fine
            .chunks(merge)
            .filter(|chunk| chunk.len() == merge)
            .filter_map(|chunk| {
                let total = chunk[1..]
                    .iter()
                    .fold(chunk[0].confusion, |acc, iv| acc.merged(&iv.confusion));
                total.normalized_rates().0
            })
            .collect();
        let n = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        series.push((5.0 * merge as f64, var));
    }

    let slope = variance_scaling_fit(&series).unwrap();
    assert!(
        (-1.15..=-0.85).contains(&slope),
        "log-log variance slope {slope} outside -1 +/- 0.15"
    );
}
