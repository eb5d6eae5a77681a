//! Subcommand implementations. Each command that writes files claims an
//! output directory, runs, and writes a manifest recording the outcome
//! whether or not the run succeeded.

use std::fmt::Write as _;
use std::path::Path;

use dch_core::diagnostics;
use dch_core::dynamics::{self, SimState};
use dch_core::interface;
use dch_core::model::Potential;
use dch_core::profile;
use dch_core::spectral::Spectral;
use dch_core::sweep;

use crate::config::{self, InitialCondition, RunConfig};
use crate::error::{runtime, validation, CliError, CliResult};
use crate::outdir::{DiagnosticsCsv, OutputDir};
use crate::snapshot;

/// Emission thresholds for cadence-based output. The next due time is
/// always `k * stride` for an integer k, never an accumulated sum, so a
/// resumed run computes the same emission times as the original run.
struct Cadence {
    stride: f64,
    k: u64,
}

impl Cadence {
    fn starting_at(t0: f64, stride: f64) -> Self {
        Cadence {
            stride,
            k: (t0 / stride).floor() as u64 + 1,
        }
    }

    /// True when `t` has reached the next emission time (with a small
    /// tolerance so rounding in the time accumulator cannot skip a sample).
    fn due(&mut self, t: f64) -> bool {
        let tol = 1e-12 * self.stride.max(1.0);
        if t + tol < self.k as f64 * self.stride {
            return false;
        }
        while self.k as f64 * self.stride <= t + tol {
            self.k += 1;
        }
        true
    }
}

fn snapshot_name(index: usize) -> String {
    format!("snap_{index:06}.bin")
}

/// Run a configured simulation, streaming diagnostics rows and snapshots at
/// their configured cadences. Always writes `final.bin` on success.
pub fn simulate(config_path: &Path) -> CliResult<()> {
    let cfg = config::parse_config(config_path)?;
    let out = OutputDir::claim(&cfg.output.directory)?;
    let result = simulate_into(&cfg, &out, None);
    let outcome = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    out.write_manifest("simulate", Some(config_path), Some(&cfg.raw_text), Some(cfg.seed), &outcome)?;
    result
}

/// Continue a run from a snapshot. The config must describe the same grid
/// and model as the run that wrote the snapshot; the parameter digest makes
/// that check exact.
pub fn resume(config_path: &Path, from: &Path) -> CliResult<()> {
    let cfg = config::parse_config(config_path)?;
    let snap = snapshot::read_snapshot(from)?;
    let expect = snapshot::params_digest(cfg.grid, &cfg.model);
    if snap.params_digest != expect {
        return Err(CliError::Validation(format!(
            "snapshot {} was written with different grid or model parameters \
             than {}; refusing to resume",
            from.display(),
            config_path.display()
        )));
    }
    if snap.u.grid() != cfg.grid {
        return Err(CliError::Validation(format!(
            "snapshot grid {}^{} does not match config grid {}^{}",
            snap.u.grid().n(),
            snap.u.grid().dim(),
            cfg.grid.n(),
            cfg.grid.dim()
        )));
    }
    let out = OutputDir::claim(&cfg.output.directory)?;
    let result = simulate_into(&cfg, &out, Some(snap));
    let outcome = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    out.write_manifest("resume", Some(config_path), Some(&cfg.raw_text), Some(cfg.seed), &outcome)?;
    result
}

fn simulate_into(
    cfg: &RunConfig,
    out: &OutputDir,
    resume_from: Option<snapshot::SnapshotData>,
) -> CliResult<()> {
    let digest = snapshot::params_digest(cfg.grid, &cfg.model);
    let mut sp = Spectral::new(cfg.grid);
    // a second transform workspace: the run hook computes diagnostics while
    // the stepper's own workspace is borrowed
    let mut diag_sp = Spectral::new(cfg.grid);

    let diag_path = out.file("diagnostics.csv");
    let resuming = resume_from.is_some();
    let (start, mut csv) = match resume_from {
        None => {
            let u0 = config::build_initial_field(cfg)?;
            (
                SimState::new(u0, &cfg.stepper),
                DiagnosticsCsv::create(&diag_path)?,
            )
        }
        Some(snap) => {
            let csv = if diag_path.is_file() {
                DiagnosticsCsv::append(&diag_path)?
            } else {
                DiagnosticsCsv::create(&diag_path)?
            };
            (
                SimState::resumed(snap.t, snap.u, snap.step_count, snap.dt_next),
                csv,
            )
        }
    };
    if cfg.t_end < start.t {
        return Err(CliError::Validation(format!(
            "t_end = {} is before the snapshot time {}",
            cfg.t_end, start.t
        )));
    }

    let mut diag_due = Cadence::starting_at(start.t, cfg.output.diagnostics_cadence);
    let mut snap_due = Cadence::starting_at(start.t, cfg.output.snapshot_cadence);
    let mut snap_index = (start.t / cfg.output.snapshot_cadence).floor() as usize;
    let mut first = true;
    let mut last_row_t: Option<f64> = None;
    let mut hook_err: Option<CliError> = None;

    let traj = dynamics::run_from(
        &mut sp,
        start,
        &cfg.model,
        &cfg.stepper,
        cfg.t_end,
        |state: &SimState| {
            let mut emit = || -> CliResult<()> {
                let fresh_start = first && !resuming;
                first = false;
                if fresh_start || diag_due.due(state.t) {
                    let rec = diagnostics::record(&mut diag_sp, &state.u, &cfg.model, state.t)
                        .map_err(runtime)?;
                    csv.write_record(&rec)?;
                    last_row_t = Some(state.t);
                }
                if snap_due.due(state.t) {
                    snap_index += 1;
                    snapshot::write_snapshot(
                        &out.file(&snapshot_name(snap_index)),
                        &state.u,
                        state.t,
                        state.step_count,
                        state.dt_next,
                        &digest,
                    )?;
                }
                Ok(())
            };
            emit().map_err(|e| {
                hook_err = Some(e);
                dch_core::error::Error::InvalidParameter("output aborted".into())
            })
        },
    );
    match traj {
        Err(core_err) => Err(hook_err.unwrap_or_else(|| runtime(core_err))),
        Ok(traj) => {
            let fin = &traj.final_state;
            let rec = diagnostics::record(&mut diag_sp, &fin.u, &cfg.model, fin.t).map_err(runtime)?;
            // a cadence crossing may already have written the final time
            if last_row_t != Some(fin.t) {
                csv.write_record(&rec)?;
            }
            csv.flush()?;
            snapshot::write_snapshot(
                &out.file("final.bin"),
                &fin.u,
                fin.t,
                fin.step_count,
                fin.dt_next,
                &digest,
            )?;
            println!(
                "simulate: t = {:.6}, {} steps, E = {:.6e}, G = {:.6e} -> {}",
                fin.t,
                fin.step_count,
                rec.energy_e,
                rec.conserved_g,
                out.path().display()
            );
            Ok(())
        }
    }
}

/// Solve the planar transition profile and print the constants that set the
/// sharp-interface law. No output directory: this is a calculator.
pub fn profile_constants(potential: &str, m: f64, m0: f64) -> CliResult<()> {
    let pot = match potential {
        "quartic" => Potential::QUARTIC,
        "scaled_quartic" => Potential::SCALED_QUARTIC,
        other => {
            return Err(CliError::Validation(format!(
                "--potential must be quartic or scaled_quartic, got {other}"
            )));
        }
    };
    if !(m >= 2.0) {
        return Err(CliError::Validation(format!("--m must be >= 2, got {m}")));
    }
    if !(m0 > 0.0) {
        return Err(CliError::Validation(format!("--m0 must be > 0, got {m0}")));
    }
    let sol = profile::solve_with_constants(pot, m, m0, 12.0, 4097).map_err(runtime)?;
    let b = sol.alpha * sol.lambda;
    println!("potential: {potential}  m = {m}  m0 = {m0}");
    println!("alpha  = {:+.9}", sol.alpha);
    println!("lambda = {:+.9}", sol.lambda);
    println!("B = lambda * alpha = {:+.9}", b);
    println!(
        "quadrature error estimate: {:.2e}",
        sol.quadrature_error_estimate
    );
    Ok(())
}

/// Decay-rate measurement for a mode-k perturbed circle, compared with the
/// sharp-interface prediction sigma = -B k^2 (k^2 - 1) / R^4.
pub fn verify_interface(config_path: &Path, with_oracle: bool) -> CliResult<()> {
    let cfg = config::parse_config(config_path)?;
    let InitialCondition::ModePerturbedCircle {
        radius,
        mode,
        delta,
    } = cfg.initial
    else {
        return Err(CliError::Validation(
            "verify-interface needs initial_condition.kind = \"mode_perturbed_circle\"".into(),
        ));
    };
    if cfg.grid.dim() != 2 {
        return Err(CliError::Validation(
            "verify-interface needs a 2D grid".into(),
        ));
    }
    let out = OutputDir::claim(&cfg.output.directory)?;
    let result = verify_interface_into(&cfg, &out, radius, mode, delta, with_oracle);
    let outcome = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    out.write_manifest(
        "verify-interface",
        Some(config_path),
        Some(&cfg.raw_text),
        Some(cfg.seed),
        &outcome,
    )?;
    result
}

fn verify_interface_into(
    cfg: &RunConfig,
    out: &OutputDir,
    radius: f64,
    mode: u32,
    delta: f64,
    with_oracle: bool,
) -> CliResult<()> {
    let n_samples = (cfg.t_end / cfg.output.diagnostics_cadence).round().max(2.0) as usize;
    let decay = interface::mode_decay_experiment(
        cfg.grid.n(),
        radius,
        mode,
        delta,
        &cfg.model,
        &cfg.stepper,
        cfg.t_end,
        n_samples,
    )
    .map_err(runtime)?;

    let mut csv = String::from("t,amplitude,mean_radius\n");
    for i in 0..decay.times.len() {
        let _ = writeln!(
            csv,
            "{},{},{}",
            decay.times[i], decay.amplitudes[i], decay.mean_radius[i]
        );
    }
    std::fs::write(out.file("modes.csv"), csv)
        .map_err(|e| runtime(format!("cannot write modes.csv: {e}")))?;

    let sol = profile::solve_with_constants(
        cfg.model.potential,
        cfg.model.m,
        cfg.model.m0,
        12.0,
        4097,
    )
    .map_err(runtime)?;
    let b = sol.alpha * sol.lambda;
    let r_mean = decay.mean_radius.iter().sum::<f64>() / decay.mean_radius.len() as f64;
    let k = mode as f64;
    let sigma_predicted = -b * k * k * (k * k - 1.0) / r_mean.powi(4);
    let rel_err = (decay.sigma - sigma_predicted).abs() / sigma_predicted.abs();

    let mut summary = String::from("{\n");
    let _ = writeln!(summary, "  \"mode\": {mode},");
    let _ = writeln!(summary, "  \"mean_radius\": {r_mean},");
    let _ = writeln!(summary, "  \"sigma_measured\": {},", decay.sigma);
    let _ = writeln!(summary, "  \"sigma_predicted\": {sigma_predicted},");
    let _ = writeln!(summary, "  \"relative_error\": {rel_err}{}", if with_oracle { "," } else { "" });
    if with_oracle {
        let oracle =
            interface::front_tracking_mode_rate(r_mean, mode, delta, b).map_err(runtime)?;
        let _ = writeln!(summary, "  \"sigma_front_tracking\": {oracle}");
    }
    summary.push_str("}\n");
    std::fs::write(out.file("summary.json"), &summary)
        .map_err(|e| runtime(format!("cannot write summary.json: {e}")))?;

    println!(
        "verify-interface: sigma measured {:+.4e}, predicted {:+.4e}, relative error {:.3}",
        decay.sigma, sigma_predicted, rel_err
    );
    println!("  -> {}", out.path().display());
    Ok(())
}

/// Run the configured problem across a decreasing list of stabilizer widths
/// and report how the final states converge as the width shrinks.
pub fn sweep_theta(config_path: &Path, thetas: Option<Vec<f64>>) -> CliResult<()> {
    let cfg = config::parse_config(config_path)?;
    let thetas = thetas.unwrap_or_else(|| sweep::default_thetas(4));
    let out = OutputDir::claim(&cfg.output.directory)?;
    let result = sweep_theta_into(&cfg, &out, &thetas);
    let outcome = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    out.write_manifest(
        "sweep-theta",
        Some(config_path),
        Some(&cfg.raw_text),
        Some(cfg.seed),
        &outcome,
    )?;
    result
}

fn sweep_theta_into(cfg: &RunConfig, out: &OutputDir, thetas: &[f64]) -> CliResult<()> {
    let u0 = config::build_initial_field(cfg)?;
    let mut sp = Spectral::new(cfg.grid);
    let report = sweep::theta_sweep(&mut sp, &u0, &cfg.model, &cfg.stepper, thetas, cfg.t_end)
        .map_err(runtime)?;

    let mut csv = String::from(
        "theta,final_energy,conservation_drift,final_limit_g,runtime_seconds,distance_to_next\n",
    );
    for i in 0..report.thetas.len() {
        let dist = report
            .pairwise_distances
            .get(i)
            .map(|d| d.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            report.thetas[i],
            report.energies[i],
            report.conservation_drifts[i],
            report.final_limit_g[i],
            report.runtimes[i],
            dist
        );
    }
    std::fs::write(out.file("sweep.csv"), csv)
        .map_err(|e| runtime(format!("cannot write sweep.csv: {e}")))?;

    println!("sweep-theta: {} runs, initial E = {:.6e}", report.thetas.len(), report.initial_energy);
    for i in 0..report.thetas.len() {
        let dist = report
            .pairwise_distances
            .get(i)
            .map(|d| format!("  |u - u_next| = {d:.4e}"))
            .unwrap_or_default();
        println!(
            "  theta = {:<8} E = {:+.6e}  drift = {:.3e}{}",
            report.thetas[i], report.energies[i], report.conservation_drifts[i], dist
        );
    }
    println!(
        "  max energy rise: {:+.3e}; distances non-increasing over last {} pairs: {}",
        report.max_energy_rise(),
        report.monotonicity_flags.len(),
        report.tail_non_increasing(report.monotonicity_flags.len())
    );
    println!("  -> {}", out.path().display());
    Ok(())
}

/// Rerun the configured problem on a nested hierarchy of grids and report
/// distances to the finest run.
pub fn refine_grid(config_path: &Path, sizes: &[usize]) -> CliResult<()> {
    let cfg = config::parse_config(config_path)?;
    let finest = *sizes.last().ok_or_else(|| {
        CliError::Validation("--sizes needs at least two comma-separated grid sizes".into())
    })?;
    if cfg.grid.n() != finest {
        return Err(CliError::Validation(format!(
            "config grid n = {} must equal the finest size {finest} so the \
             initial condition is defined on the finest grid",
            cfg.grid.n()
        )));
    }
    let out = OutputDir::claim(&cfg.output.directory)?;
    let result = refine_grid_into(&cfg, &out, sizes);
    let outcome = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    out.write_manifest(
        "refine-grid",
        Some(config_path),
        Some(&cfg.raw_text),
        Some(cfg.seed),
        &outcome,
    )?;
    result
}

fn refine_grid_into(cfg: &RunConfig, out: &OutputDir, sizes: &[usize]) -> CliResult<()> {
    let u0 = config::build_initial_field(cfg)?;
    let report = sweep::galerkin_refinement(&u0, &cfg.model, &cfg.stepper, sizes, cfg.t_end)
        .map_err(runtime)?;

    let mut csv = String::from("n,error_vs_finest,final_energy,runtime_seconds\n");
    for i in 0..report.grid_sizes.len() {
        let err = report
            .errors_vs_finest
            .get(i)
            .map(|e| e.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            report.grid_sizes[i], err, report.energies[i], report.runtimes[i]
        );
    }
    std::fs::write(out.file("refine.csv"), csv)
        .map_err(|e| runtime(format!("cannot write refine.csv: {e}")))?;

    println!("refine-grid: {} sizes", report.grid_sizes.len());
    for i in 0..report.grid_sizes.len() {
        match report.errors_vs_finest.get(i) {
            Some(err) => println!(
                "  n = {:<5} |u_n - u_finest| = {:.6e}",
                report.grid_sizes[i], err
            ),
            None => println!("  n = {:<5} (reference)", report.grid_sizes[i]),
        }
    }
    println!("  -> {}", out.path().display());
    Ok(())
}

/// Evolve prismatic loops under the nonlocal coupling, tracking per-loop
/// geometry over time.
pub fn climb(config_path: &Path) -> CliResult<()> {
    let cfg = config::parse_config(config_path)?;
    match &cfg.model.climb {
        Some(c) if c.enabled => {}
        _ => {
            return Err(CliError::Validation(
                "climb needs [model.climb] with enabled = true".into(),
            ));
        }
    }
    let InitialCondition::TanhLoops {
        ref centers,
        ref radii,
    } = cfg.initial
    else {
        return Err(CliError::Validation(
            "climb needs initial_condition.kind = \"tanh_loops\"".into(),
        ));
    };
    let centers = centers.clone();
    let radii = radii.clone();
    let out = OutputDir::claim(&cfg.output.directory)?;
    let result = climb_into(&cfg, &out, &centers, &radii);
    let outcome = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    out.write_manifest("climb", Some(config_path), Some(&cfg.raw_text), Some(cfg.seed), &outcome)?;
    result
}

fn climb_into(
    cfg: &RunConfig,
    out: &OutputDir,
    centers: &[(f64, f64)],
    radii: &[f64],
) -> CliResult<()> {
    let n_samples = (cfg.t_end / cfg.output.diagnostics_cadence).round().max(1.0) as usize;
    let mut sp = Spectral::new(cfg.grid);
    let scenario = dch_core::climb::loop_scenario(
        &mut sp,
        centers,
        radii,
        &cfg.model,
        &cfg.stepper,
        cfg.t_end,
        n_samples,
    )
    .map_err(runtime)?;

    let mut diag = DiagnosticsCsv::create(&out.file("diagnostics.csv"))?;
    let mut loops_csv = String::from("t,loop_id,mean_radius,center_x,center_y\n");
    for sample in &scenario.samples {
        diag.write_record(&sample.diagnostics)?;
        for lp in &sample.loops {
            let _ = writeln!(
                loops_csv,
                "{},{},{},{},{}",
                sample.t, lp.loop_id, lp.mean_radius, lp.center[0], lp.center[1]
            );
        }
    }
    diag.flush()?;
    std::fs::write(out.file("loops.csv"), loops_csv)
        .map_err(|e| runtime(format!("cannot write loops.csv: {e}")))?;

    let fin = &scenario.trajectory.final_state;
    let digest = snapshot::params_digest(cfg.grid, &cfg.model);
    snapshot::write_snapshot(
        &out.file("final.bin"),
        &fin.u,
        fin.t,
        fin.step_count,
        fin.dt_next,
        &digest,
    )?;

    let last = scenario.samples.last().expect("n_samples >= 1");
    println!(
        "climb: t = {:.6}, {} loops tracked at final sample",
        fin.t,
        last.loops.len()
    );
    for lp in &last.loops {
        println!(
            "  loop {}: mean radius {:.4} at ({:.4}, {:.4})",
            lp.loop_id, lp.mean_radius, lp.center[0], lp.center[1]
        );
    }
    println!("  -> {}", out.path().display());
    Ok(())
}

/// Parse "32,64,128" into sizes for refine-grid.
pub fn parse_sizes(text: &str) -> CliResult<Vec<usize>> {
    let sizes: Result<Vec<usize>, _> = text.split(',').map(|s| s.trim().parse()).collect();
    let sizes = sizes.map_err(|e| validation(format!("bad --sizes \"{text}\": {e}")))?;
    if sizes.len() < 2 {
        return Err(validation("--sizes needs at least two grid sizes"));
    }
    Ok(sizes)
}

/// Parse "0.2,0.1,0.05" into widths for sweep-theta.
pub fn parse_thetas(text: &str) -> CliResult<Vec<f64>> {
    let t: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse()).collect();
    t.map_err(|e| validation(format!("bad --thetas \"{text}\": {e}")))
}
