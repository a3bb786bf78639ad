//! End-to-end runs of the experiment harness against closed forms.

use ristrainlab::experiments::preset::siso_channel_powers;
use ristrainlab::experiments::{
    preset, run_experiment, write_csv, ConfigFile, Metric, Protocol, Sweep, SweepVar,
};
use ristrainlab::theory::{power_optimal, ClosedFormInputs};

fn mean(x: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = x.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn optimal_siso_matches_the_closed_form() {
    let mut spec = preset("fig9").unwrap();
    spec.protocol = Protocol::Optimal;
    spec.trials = 20_000;
    spec.sweep.values = vec![1.0];
    let (r2, d2) = siso_channel_powers(&spec.scenario).unwrap();
    let want = power_optimal(&ClosedFormInputs::new(5, r2, d2, 1)).unwrap() * spec.tx_power_mw;
    let (m, se) = mean(
        run_experiment(&spec, 2)
            .unwrap()
            .iter()
            .map(|r| r.power_mw()),
    );
    assert!((m - want).abs() < 4.0 * se, "{m} vs {want} +- {se}");
}

#[test]
fn single_random_equals_one_period() {
    let mut spec = preset("fig10").unwrap();
    spec.trials = 300;
    spec.sweep.values = vec![1.0];
    let q1 = run_experiment(&spec, 1).unwrap();
    spec.protocol = Protocol::SingleRandom;
    spec.sweep.values = vec![6.0];
    let single = run_experiment(&spec, 1).unwrap();
    for (a, b) in q1.iter().zip(&single) {
        assert_eq!(a.power_mw(), b.power_mw());
        assert_eq!(a.pilot_slots, b.pilot_slots);
    }
}

#[test]
fn received_power_scales_with_transmit_power() {
    let mut spec = preset("fig6").unwrap();
    spec.trials = 5;
    spec.sweep = Sweep {
        var: SweepVar::P,
        values: vec![0.0, 10.0],
    };
    let recs = run_experiment(&spec, 1).unwrap();
    for t in 0..5 {
        let ratio = recs[5 + t].power_mw() / recs[t].power_mw();
        assert!((ratio - 10.0).abs() < 1e-9);
        assert_eq!(recs[t].pilot_slots, 501);
    }
}

#[test]
fn distance_sweep_moves_the_user() {
    let mut spec = preset("fig14").unwrap();
    spec.protocol = Protocol::Optimal;
    spec.trials = 100;
    spec.sweep.values = vec![30.0, 48.0];
    assert_eq!(spec.metric, Metric::TransmitPower);
    let recs = run_experiment(&spec, 1).unwrap();
    let (far, _) = mean(recs[..100].iter().map(|r| r.power_mw()));
    let (near, _) = mean(recs[100..].iter().map(|r| r.power_mw()));
    // the user is 2 m from the RIS at d = 48
    assert!(near < far, "{near} vs {far}");
    assert!(recs.iter().all(|r| r.feasible && r.pilot_slots == 0));
}

#[test]
fn config_file_drives_a_run() {
    let cfg = ConfigFile::parse(
        r#"
        trials = 3
        seed = 5
        protocol = "three-phase"
        [sweep]
        var = "N"
        values = [4, 8]
        [scenario]
        layout = "siso"
        bs_antennas = 2
        pilot_power = "10dBm"
        noise_bs = "-70dBm"
        "#,
    )
    .unwrap();
    let spec = cfg.to_spec().unwrap();
    assert_eq!(spec.metric, Metric::TransmitPower);
    let recs = run_experiment(&spec, 2).unwrap();
    let mut out = Vec::new();
    write_csv(&recs, "N", &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 7);
    let slots: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(slots, ["5", "5", "5", "9", "9", "9"]);
}
