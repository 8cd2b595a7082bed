//! Basis, synthesis and integration chained together.

use shuttle_core::constants::angular;
use shuttle_core::dynamics::{held_ramp_energy, integrate_full, integrate_harmonic, IonState, Schedule};
use shuttle_core::trap_model::{analytic_basis, default_grid, superpose, well_analysis, AxialBasis, IonSpecies, TrapGeometry, WellOptions};
use shuttle_core::waveform::{generate_waveform, RampSpec, SolverConfig, VoltageWaveform};

fn basis() -> AxialBasis {
    let g = TrapGeometry::standard();
    analytic_basis(&g, 1e-3, &default_grid(&g)).unwrap()
}

fn full_run(b: &AxialBasis, wf: &VoltageWaveform, z0: f64) -> f64 {
    let ca = IonSpecies::calcium40();
    integrate_full(b, wf, &ca, IonState::at_rest(z0), 10e-9, 10e-6).unwrap().summary().e_final
}

#[test]
fn synthesized_wells_follow_the_ramp() {
    let b = basis();
    let ca = IonSpecies::calcium40();
    let spec = RampSpec::from_tau(4.0, 2.0).unwrap();
    let wf = generate_waveform(&b, &spec, &SolverConfig::default(), &ca, None, 0.0).unwrap();
    for k in [0, 5, 10, 15, 20] {
        let p = superpose(&b, wf.row(k)).unwrap();
        let z = spec.held_position(k);
        let w = well_analysis(&p, &ca, (z - 0.5e-3, z + 0.5e-3), WellOptions::default()).unwrap();
        assert!((w.z_min - z).abs() < 1e-6, "row {k}: {} vs {z}", w.z_min);
        assert!((w.omega_z / angular(200e3) - 1.0).abs() < 0.02);
    }
}

#[test]
fn full_model_tracks_the_held_harmonic_model() {
    let b = basis();
    let ca = IonSpecies::calcium40();
    for tau in [3.2, 5.0] {
        let spec = RampSpec::from_tau(tau, 2.0).unwrap();
        let wf = generate_waveform(&b, &spec, &SolverConfig::default(), &ca, None, 0.0).unwrap();
        let start = superpose(&b, wf.row(0)).unwrap();
        let z0 = well_analysis(&start, &ca, (-0.5e-3, 0.5e-3), WellOptions::default()).unwrap().z_min;
        let full = full_run(&b, &wf, z0);
        let ideal = held_ramp_energy(&spec, &ca);
        let harmonic = integrate_harmonic(&spec, &ca, IonState::at_rest(0.0), 10e-9, Schedule::ZeroOrderHold)
            .unwrap()
            .summary()
            .e_final;
        assert!((harmonic / ideal - 1.0).abs() < 1e-3);
        // anharmonicity of the real wells is a few percent at these excursions
        assert!((full / ideal - 1.0).abs() < 0.3, "tau {tau}: {full} vs {ideal}");
    }
}

#[test]
fn waveform_file_replays_the_same_motion() {
    let b = basis();
    let ca = IonSpecies::calcium40();
    let spec = RampSpec::from_tau(3.2, 2.0).unwrap();
    let wf = generate_waveform(&b, &spec, &SolverConfig::default(), &ca, None, 0.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wf.csv");
    wf.write_file(&path).unwrap();
    let back = VoltageWaveform::read_file(&path).unwrap();
    assert_eq!(back.len(), wf.len());
    let (a, c) = (full_run(&b, &wf, 0.0), full_run(&b, &back, 0.0));
    assert!((a / c - 1.0).abs() < 1e-9);
}

#[test]
fn halving_the_step_leaves_the_energy_unchanged() {
    let b = basis();
    let ca = IonSpecies::calcium40();
    for tau in [3.2, 4.0, 6.0, 20.0] {
        let spec = RampSpec::from_tau(tau, 2.0).unwrap();
        let wf = generate_waveform(&b, &spec, &SolverConfig::default(), &ca, None, 0.0).unwrap();
        let start = superpose(&b, wf.row(0)).unwrap();
        let z0 = well_analysis(&start, &ca, (-0.5e-3, 0.5e-3), WellOptions::default()).unwrap().z_min;
        let run = |dt| {
            integrate_full(&b, &wf, &ca, IonState::at_rest(z0), dt, 10e-6)
                .unwrap()
                .summary()
                .e_final
        };
        let (coarse, fine) = (run(10e-9), run(5e-9));
        assert!((coarse / fine - 1.0).abs() <= 1e-3, "tau {tau}: {coarse} vs {fine}");
    }
}
