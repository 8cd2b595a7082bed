//! Measurement analyses driven through their file formats.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shuttle_core::constants::angular;
use shuttle_core::cooling::{add_shot_noise, estimate_energy, simulate_recovery, FluorescenceTrace, LaserParams};
use shuttle_core::micromotion::{find_optimum, fit_sine, flatness_test, simulate_histogram, CompensationScan, Fold, PhaseHistogram, ScanDesign};
use shuttle_core::trap_model::IonSpecies;

#[test]
fn recovery_trace_survives_the_table_format() {
    let laser = LaserParams::default();
    let ca = IonSpecies::calcium40();
    let omega = angular(200e3);
    let trace = simulate_recovery(1e-3, &laser, omega, &ca, 20e-3, 10e-6).unwrap();
    let back = FluorescenceTrace::from_table(&trace.to_table()).unwrap();
    let a = estimate_energy(&trace, &laser, omega, &ca).unwrap();
    let b = estimate_energy(&back, &laser, omega, &ca).unwrap();
    assert!((a.e0 / b.e0 - 1.0).abs() < 1e-3);
    assert!((a.e0 / 1e-3 - 1.0).abs() < 0.05);
}

#[test]
fn noisy_recovery_still_orders_energies() {
    let laser = LaserParams::default();
    let ca = IonSpecies::calcium40();
    let omega = angular(200e3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let est: Vec<f64> = [0.3e-3, 3e-3]
        .iter()
        .map(|&e| {
            let t = simulate_recovery(e, &laser, omega, &ca, 0.5, 1e-3).unwrap();
            estimate_energy(&add_shot_noise(&t, &mut rng).unwrap(), &laser, omega, &ca).unwrap().e0
        })
        .collect();
    assert!(est[1] > 3.0 * est[0], "{est:?}");
}

#[test]
fn compensation_scan_from_histogram_files() {
    let dir = tempfile::tempdir().unwrap();
    let design = ScanDesign::reference_scan();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut scan = CompensationScan::default();
    for &v in &design.voltages {
        let depth = design.depth_per_volt * (v - design.v_opt);
        let h = simulate_histogram(depth, 0.0, design.mean_rate, design.duration, 32, Fold::OnePeriod, &mut rng).unwrap();
        let path = dir.path().join(format!("h{v}.csv"));
        h.write_file(&path).unwrap();
        let back = PhaseHistogram::read_file(&path).unwrap();
        scan.push_fit(v, &fit_sine(&back, 0.0).unwrap());
    }
    let path = dir.path().join("scan.csv");
    scan.write_file(&path).unwrap();
    let opt = find_optimum(&CompensationScan::read_file(&path).unwrap()).unwrap();
    assert!((opt.v_opt - 101.6).abs() < 3.0 * opt.v_sigma.max(0.05));

    let flat = simulate_histogram(0.0, 0.0, 2e4, 30.0, 32, Fold::TwoPeriods, &mut rng).unwrap();
    assert!(flatness_test(&flat).unwrap().is_flat(0.95));
}
