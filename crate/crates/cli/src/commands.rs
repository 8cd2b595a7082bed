use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use shuttle_core::constants::angular;
use shuttle_core::cooling::{add_shot_noise, estimate_energy_with, simulate_recovery, FluorescenceTrace};
use shuttle_core::dynamics::{held_ramp_energy, integrate_full, integrate_harmonic, IonState, Schedule};
use shuttle_core::experiment::{argmin_sigma, sweep_sigma, sweep_tau, trial_rng, PreparedSequence};
use shuttle_core::micromotion::{find_optimum, fit_sine, flatness_test, simulate_scan, CompensationScan, PhaseHistogram, ScanDesign};
use shuttle_core::trap_model::{ion_crystal_positions, mathieu_q, superpose, well_analysis, AxialBasis, IonSpecies, WellCharacterization};
use shuttle_core::waveform::{generate_waveform, VoltageWaveform};
use shuttle_core::Error as CoreError;

use crate::config::Config;
use crate::output::{csv, Outputs};
use crate::{Cli, Command, InputError};

#[derive(Debug, Args)]
pub struct TransportArgs {
    /// Waveform table to replay instead of synthesising one.
    #[arg(long)]
    pub waveform: Option<PathBuf>,
    /// Keep every n-th integrator sample in the trajectory table.
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
}

#[derive(Debug, Args)]
pub struct SweepTauArgs {
    /// Transport times: `a..b` (step 1), `a..b:step` or a comma list.
    #[arg(long)]
    pub tau: String,
    /// Trials per point; defaults to `run.trials`.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Per-attempt loss without transport; overrides `sequence.background_loss`.
    #[arg(long)]
    pub background_loss: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepSigmaArgs {
    /// Slope parameters: `a..b:step` or a comma list.
    #[arg(long)]
    pub sigma: String,
    /// Transport time; defaults to `ramp.tau`.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Trials per point; defaults to `run.trials`.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MicromotionArgs {
    /// Histogram files as `VOLTAGE=PATH`.
    pub inputs: Vec<String>,
    /// Generate a synthetic ten-point scan (null at 101.6 V) into the
    /// output directory and fit it.
    #[arg(long, conflicts_with = "inputs")]
    pub simulate: bool,
    /// Reference phase for the amplitude sign in rad; defaults to the phase
    /// of the most strongly modulated histogram.
    #[arg(long, allow_negative_numbers = true)]
    pub reference_phase: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Trace table with `t_ms, detected_counts_per_s` rows.
    #[arg(long, required_unless_present = "simulate_mev")]
    pub trace: Option<PathBuf>,
    /// Simulate a shot-noise trace for this initial energy in meV instead.
    #[arg(long, conflicts_with = "trace")]
    pub simulate_mev: Option<f64>,
    /// Axial frequency of the cooling well in kHz; defaults to the loading well.
    #[arg(long)]
    pub omega_khz: Option<f64>,
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.common.jobs == 0 {
        return dispatch(cli);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.jobs)
        .build()
        .context("configuring the worker pool")?
        .install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    let mut cfg = Config::load(c.config.as_deref())?;
    if let Some(seed) = c.seed {
        cfg.run.seed = seed;
    }
    let name = match &cli.command {
        Command::Characterize => "characterize",
        Command::Waveform => "waveform",
        Command::Transport(_) => "transport",
        Command::SweepTau(_) => "sweep-tau",
        Command::SweepSigma(_) => "sweep-sigma",
        Command::FitMicromotion(_) => "fit-micromotion",
        Command::RecoverEnergy(_) => "recover-energy",
    };
    let mut out = Outputs::new(&c.out, name, &cfg.hash(), cfg.run.seed)?;
    match &cli.command {
        Command::Characterize => characterize(&cfg, &mut out)?,
        Command::Waveform => waveform(&cfg, &mut out)?,
        Command::Transport(a) => transport(&cfg, a, &mut out)?,
        Command::SweepTau(a) => sweep_tau_cmd(&cfg, a, &mut out)?,
        Command::SweepSigma(a) => sweep_sigma_cmd(&cfg, a, &mut out)?,
        Command::FitMicromotion(a) => fit_micromotion(&cfg, a, &mut out)?,
        Command::RecoverEnergy(a) => recover_energy(&cfg, a, &mut out)?,
    }
    out.finish()
}

fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// Parses `a..b`, `a..b:step` or `x,y,z`.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| input(format!("`{s}` is not a number")))?;
        if !v.is_finite() {
            return Err(input(format!("`{s}` is not finite")));
        }
        Ok(v)
    };
    let values = if let Some((a, rest)) = spec.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (num(b)?, num(s)?),
            None => (num(rest)?, 1.0),
        };
        let a = num(a)?;
        if !(step > 0.0 && b >= a) {
            return Err(input(format!("range `{spec}` needs a <= b and a positive step")));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| a + k as f64 * step).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    if values.is_empty() {
        return Err(input("empty value list"));
    }
    Ok(values)
}

fn loading_well(cfg: &Config, basis: &AxialBasis, species: &IonSpecies) -> Result<WellCharacterization> {
    let load = superpose(basis, &cfg.sequence.load_voltages_v)?;
    let w = cfg.sequence.well_window_mm * 1e-3;
    let grid = basis.grid();
    let window = ((-w).max(grid[0]), w.min(grid[grid.len() - 1]));
    Ok(well_analysis(&load, species, window, cfg.well_options())?)
}

fn origin(cfg: &Config, basis: &AxialBasis, species: &IonSpecies) -> Result<f64> {
    match cfg.ramp.origin_mm {
        Some(z) => Ok(z * 1e-3),
        None => Ok(loading_well(cfg, basis, species)?.z_min + cfg.sequence.morph_offset_um * 1e-6),
    }
}

fn characterize(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let species = cfg.species()?;
    let basis = cfg.basis()?;
    let radial = mathieu_q(cfg.radial(), &species)?;
    let mut rows: Vec<(&str, String, &str)> = vec![
        ("mathieu_q", format!("{:.6}", radial.mathieu_q), ""),
        ("omega_rad", format!("{:.3}", radial.omega_rad / angular(1e3)), "kHz"),
        ("radial_depth", format!("{:.6}", radial.ideal_depth), "eV"),
    ];
    match loading_well(cfg, &basis, &species) {
        Ok(w) => {
            rows.push(("axial_well", "found".into(), ""));
            rows.push(("z_min", format!("{:.4}", w.z_min * 1e6), "um"));
            rows.push(("omega_z", format!("{:.3}", w.omega_z / angular(1e3)), "kHz"));
            rows.push(("axial_depth", format!("{:.6}", w.axial_depth), "eV"));
            for n in [2, 3] {
                let pos = ion_crystal_positions(w.omega_z, &species, n)?;
                rows.push((
                    if n == 2 { "spacing_2_ions" } else { "spacing_3_ions" },
                    format!("{:.4}", (pos[1] - pos[0]) * 1e6),
                    "um",
                ));
            }
        }
        Err(e) if matches!(e.downcast_ref::<CoreError>(), Some(CoreError::NoWell { .. })) => {
            rows.push(("axial_well", "none".into(), ""));
        }
        Err(e) => return Err(e),
    }
    let mut body = String::from("# columns: quantity, value, unit\n");
    for (q, v, u) in &rows {
        println!("{q:16} {v} {u}");
        body.push_str(&format!("{q}, {v}, {u}\n"));
    }
    out.write("characterize.csv", &body)?;
    Ok(())
}

fn synthesize(cfg: &Config, basis: &AxialBasis, species: &IonSpecies) -> Result<(VoltageWaveform, f64)> {
    let z0 = origin(cfg, basis, species)?;
    let wf = generate_waveform(basis, &cfg.ramp()?, &cfg.solver(), species, cfg.dac().as_ref(), z0)
        .context("synthesising the transport waveform")?;
    Ok((wf, z0))
}

fn waveform(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let species = cfg.species()?;
    let basis = cfg.basis()?;
    let (wf, z0) = synthesize(cfg, &basis, &species)?;
    let vmax = wf.steps().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("rows {}  origin {:.4} um  max |U| {:.4} V", wf.len(), z0 * 1e6, vmax);
    out.param("tau", cfg.ramp.tau);
    out.param("sigma", cfg.ramp.sigma);
    out.write_after_header("waveform.csv", &wf.to_table())?;
    Ok(())
}

fn transport(cfg: &Config, args: &TransportArgs, out: &mut Outputs) -> Result<()> {
    if args.stride == 0 {
        bail!(input("--stride must be >= 1"));
    }
    let species = cfg.species()?;
    let basis = cfg.basis()?;
    let z0 = origin(cfg, &basis, &species)?;
    let wf = match &args.waveform {
        Some(p) => {
            out.param("waveform", p.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()));
            VoltageWaveform::read_file(p).with_context(|| format!("reading waveform {}", p.display()))?
        }
        None => synthesize(cfg, &basis, &species)?.0,
    };
    let first = superpose(&basis, wf.row(0))?;
    let w = cfg.sequence.well_window_mm * 1e-3;
    let start = well_analysis(&first, &species, (z0 - w, z0 + w), cfg.well_options())?;
    let dt = cfg.sequence.dt_int_ns * 1e-9;
    let traj = integrate_full(&basis, &wf, &species, IonState::at_rest(start.z_min), dt, cfg.sequence.settle_us * 1e-6)?;
    let res = traj.summary();

    let ramp = cfg.ramp()?;
    let held = held_ramp_energy(&ramp, &species);
    let dt_h = dt.min(ramp.dt_update / 20.0).min(2.0 * std::f64::consts::PI / ramp.omega_target / 100.0);
    let harmonic = integrate_harmonic(&ramp, &species, IonState::at_rest(0.0), dt_h, Schedule::ZeroOrderHold)?.summary();
    println!(
        "e_final {:.6} meV  e_max {:.6} meV  excursion {:.3} um  lost {}  (harmonic {:.6} meV)",
        res.e_final * 1e3,
        res.e_max * 1e3,
        res.max_excursion * 1e6,
        res.lost,
        harmonic.e_final * 1e3
    );
    let summary = csv(
        &[format!("tau={} sigma={}", cfg.ramp.tau, cfg.ramp.sigma)],
        &["e_final_meV", "e_max_meV", "excursion_um", "lost", "harmonic_e_final_meV", "held_oracle_meV"],
        &[vec![
            res.e_final * 1e3,
            res.e_max * 1e3,
            res.max_excursion * 1e6,
            if res.lost { 1.0 } else { 0.0 },
            harmonic.e_final * 1e3,
            held * 1e3,
        ]],
    );
    out.write("transport_summary.csv", &summary)?;
    let table = traj.to_table();
    let mut lines = table.lines();
    let mut thinned = format!("{}\n", lines.next().unwrap_or_default());
    let data: Vec<&str> = lines.collect();
    for (k, l) in data.iter().enumerate() {
        if k % args.stride == 0 || k + 1 == data.len() {
            thinned.push_str(l);
            thinned.push('\n');
        }
    }
    out.write("trajectory.csv", &thinned)?;
    Ok(())
}

fn trials(cfg: &Config, arg: Option<usize>) -> Result<usize> {
    let n = arg.unwrap_or(cfg.run.trials);
    if n == 0 {
        bail!(input("trials must be >= 1"));
    }
    Ok(n)
}

fn sweep_tau_cmd(cfg: &Config, args: &SweepTauArgs, out: &mut Outputs) -> Result<()> {
    let taus = parse_values(&args.tau)?;
    let n = trials(cfg, args.trials)?;
    let b = args
        .background_loss
        .or(cfg.sequence.background_loss)
        .ok_or_else(|| input("sweep-tau needs the background loss: --background-loss or sequence.background_loss"))?;
    if !(0.0..1.0).contains(&b) {
        bail!(input(format!("background loss must be in [0, 1), got {b}")));
    }
    let basis = cfg.basis()?;
    let mut spec = cfg.sequence()?;
    spec.background_loss = b;
    let depth = PreparedSequence::new(&basis, &spec)?.transport_depth;
    let rows = sweep_tau(&basis, &spec, &taus, n)?;
    out.param("tau", &args.tau);
    out.param("trials", n);
    out.param("background_loss", b);
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.tau, r.p_net, r.p_lo, r.p_hi, r.e_final_mev, r.e_max_mev, r.excursion_um])
        .collect();
    for r in &rows {
        println!("tau {:6.2}  p_net {:.4} [{:.4}, {:.4}]  e_final {:.6} meV", r.tau, r.p_net, r.p_lo, r.p_hi, r.e_final_mev);
    }
    let body = csv(
        &[format!(
            "sigma={} trials={n} background_loss={b} loss_threshold={} transport_depth_eV={depth:.6}",
            cfg.ramp.sigma, spec.loss_threshold
        )],
        &["tau", "p_net", "p_lo", "p_hi", "e_final_meV", "e_max_meV", "excursion_um"],
        &table,
    );
    out.write("sweep_tau.csv", &body)?;
    Ok(())
}

fn sweep_sigma_cmd(cfg: &Config, args: &SweepSigmaArgs, out: &mut Outputs) -> Result<()> {
    let sigmas = parse_values(&args.sigma)?;
    let n = trials(cfg, args.trials)?;
    let basis = cfg.basis()?;
    let mut spec = cfg.sequence()?;
    let tau = args.tau.unwrap_or(cfg.ramp.tau);
    spec.ramp = spec.ramp.with_tau(tau)?;
    let rows = sweep_sigma(&basis, &spec, &sigmas, n)?;
    let best = argmin_sigma(&rows);
    out.param("sigma", &args.sigma);
    out.param("tau", tau);
    out.param("trials", n);
    for r in &rows {
        println!("sigma {:6.3}  e_final {:.6} meV  e_max {:.6} meV", r.sigma, r.e_final_mev, r.e_max_mev);
    }
    let best_text = best.map_or_else(|| "none".to_string(), |s| s.to_string());
    println!("argmin sigma {best_text}");
    let table: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.sigma, r.e_final_mev, r.e_max_mev]).collect();
    let body = csv(
        &[format!("tau={tau} trials={n} argmin_sigma={best_text}")],
        &["sigma", "e_final_meV", "e_max_meV"],
        &table,
    );
    out.write("sweep_sigma.csv", &body)?;
    Ok(())
}

fn fit_micromotion(cfg: &Config, args: &MicromotionArgs, out: &mut Outputs) -> Result<()> {
    let mut hists: Vec<(f64, PhaseHistogram)> = Vec::new();
    if args.simulate {
        let design = ScanDesign { bins: cfg.micromotion.bins, fold: cfg.fold(), ..ScanDesign::reference_scan() };
        let mut rng = trial_rng(cfg.run.seed, 0);
        let (hs, _) = simulate_scan(&design, &mut rng)?;
        for (v, h) in design.voltages.iter().zip(hs) {
            out.write_after_header(&format!("histogram_{v}V.csv"), &h.to_table())?;
            hists.push((*v, h));
        }
        out.param("simulate", true);
    } else {
        if args.inputs.is_empty() {
            bail!(input("give histogram files as VOLTAGE=PATH or use --simulate"));
        }
        for item in &args.inputs {
            let (v, p) = item
                .split_once('=')
                .ok_or_else(|| input(format!("`{item}` is not of the form VOLTAGE=PATH")))?;
            let v: f64 = v.trim().parse().map_err(|_| input(format!("`{v}` is not a voltage")))?;
            let h = PhaseHistogram::read_file(p).with_context(|| format!("reading histogram {p}"))?;
            out.param("input", item);
            hists.push((v, h));
        }
    }
    let reference = match args.reference_phase {
        Some(r) => r,
        None => {
            // phase of the strongest modulation, with the free fit at zero reference
            let fits = hists.iter().map(|(_, h)| fit_sine(h, 0.0)).collect::<shuttle_core::Result<Vec<_>>>()?;
            fits.iter()
                .max_by(|a, b| a.magnitude(0.0).total_cmp(&b.magnitude(0.0)))
                .map_or(0.0, |f| f.phase)
        }
    };
    let mut scan = CompensationScan::default();
    let mut rows = Vec::new();
    for (v, h) in &hists {
        let fit = fit_sine(h, reference)?;
        let flat = flatness_test(h)?;
        scan.push_fit(*v, &fit);
        rows.push(vec![*v, fit.amplitude, fit.amplitude_sigma, fit.phase, fit.offset, flat.p_value]);
        println!("U {v:8.3} V  amplitude {:10.3} +- {:.3}  flatness p {:.4}", fit.amplitude, fit.amplitude_sigma, flat.p_value);
    }
    out.write(
        "micromotion_fits.csv",
        &csv(
            &[format!("reference_phase_rad={reference}")],
            &["voltage_V", "amplitude", "amplitude_sigma", "phase_rad", "offset", "flatness_p"],
            &rows,
        ),
    )?;
    out.write_after_header("compensation_scan.csv", &scan.to_table())?;
    let distinct = hists.iter().any(|(v, _)| *v != hists[0].0);
    if distinct {
        let opt = find_optimum(&scan)?;
        println!("optimum {:.4} +- {:.4} V{}", opt.v_opt, opt.v_sigma, if opt.extrapolated { " (extrapolated)" } else { "" });
        out.write(
            "micromotion_optimum.csv",
            &csv(
                &[],
                &["v_opt_V", "v_sigma_V", "slope", "chi2_reduced", "extrapolated"],
                &[vec![opt.v_opt, opt.v_sigma, opt.slope, opt.chi2_reduced, if opt.extrapolated { 1.0 } else { 0.0 }]],
            ),
        )?;
    }
    Ok(())
}

fn recover_energy(cfg: &Config, args: &RecoverArgs, out: &mut Outputs) -> Result<()> {
    let species = cfg.species()?;
    let laser = cfg.laser()?;
    let omega = match args.omega_khz {
        Some(f) if f > 0.0 => angular(f * 1e3),
        Some(f) => bail!(input(format!("--omega-khz must be > 0, got {f}"))),
        None => loading_well(cfg, &cfg.basis()?, &species)?.omega_z,
    };
    let trace = match (&args.trace, args.simulate_mev) {
        (Some(p), _) => {
            out.param("trace", p.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()));
            let text = std::fs::read_to_string(p).with_context(|| format!("reading trace {}", p.display()))?;
            FluorescenceTrace::from_table(&text).with_context(|| format!("in trace {}", p.display()))?
        }
        (None, Some(e)) => {
            let s = &cfg.sequence;
            let clean = simulate_recovery(e * 1e-3, &laser, omega, &species, s.recovery_duration_ms * 1e-3, s.recovery_bin_us * 1e-6)?;
            let noisy = add_shot_noise(&clean, &mut trial_rng(cfg.run.seed, 0))?;
            out.write("trace.csv", &noisy.to_table())?;
            out.param("simulate_mev", e);
            noisy
        }
        (None, None) => bail!(input("give --trace or --simulate-mev")),
    };
    let est = estimate_energy_with(&trace, &laser, omega, &species, &cfg.uncertainty())?;
    let t_rec = trace.t_recover.unwrap_or(f64::NAN);
    println!(
        "t_recover {:.4} ms  e0 {:.6} meV +- {:.6} meV ({:.1} %)",
        t_rec * 1e3,
        est.e0 * 1e3,
        est.uncertainty * 1e3,
        100.0 * est.relative_uncertainty()
    );
    let [cw, cs, cd] = est.contributions;
    out.write(
        "energy_estimate.csv",
        &csv(
            &[format!("omega_khz={:.6}", omega / angular(1e3))],
            &["t_recover_ms", "e0_meV", "sigma_meV", "waist_meV", "s0_meV", "detuning_meV"],
            &[vec![t_rec * 1e3, est.e0 * 1e3, est.uncertainty * 1e3, cw * 1e3, cs * 1e3, cd * 1e3]],
        ),
    )?;
    Ok(())
}
