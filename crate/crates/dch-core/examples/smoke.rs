//! End-to-end smoke drive of the public API: relax a circular interface,
//! watch the diagnostics, then extract and measure the interface.

use dch_core::dynamics::{self, Scheme, StabilizationMode, StepperConfig};
use dch_core::interface;
use dch_core::model::ModelParams;
use dch_core::spectral::{PeriodicField, PeriodicGrid, Spectral};
use dch_core::{diagnostics, profile};
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = PeriodicGrid::new(2, 64)?;
    let mut sp = Spectral::new(grid);
    let p = ModelParams::standard(0.35, 0.5);

    let r0 = PI / 2.0;
    let width = 2.0_f64.sqrt() * p.epsilon;
    let u0 = PeriodicField::from_fn(grid, |x, y| {
        let r = ((x - PI).powi(2) + (y - PI).powi(2)).sqrt();
        (-(r - r0) / width).tanh()
    });

    let cfg = StepperConfig {
        scheme: Scheme::ImexStabilized,
        dt_init: 1e-4,
        dt_min: 1e-4,
        dt_max: 1e-4,
        rel_tol: 1e-6,
        stabilization: StabilizationMode::Auto,
        stab_kappa: 0.0,
    };

    let rec0 = diagnostics::record(&mut sp, &u0, &p, 0.0)?;
    println!(
        "t={:.3}  E={:.6}  G={:.6}  min_g={:.3}  |u|max={:.3}",
        rec0.t, rec0.energy_e, rec0.conserved_g, rec0.min_g, rec0.max_abs_u
    );

    let traj = dynamics::run(&mut sp, &u0, &p, &cfg, 0.05, |_| Ok(()))?;
    let s = &traj.final_state;
    let rec1 = diagnostics::record(&mut sp, &s.u, &p, s.t)?;
    println!(
        "t={:.3}  E={:.6}  G={:.6}  min_g={:.3}  |u|max={:.3}  ({} steps)",
        rec1.t, rec1.energy_e, rec1.conserved_g, rec1.min_g, rec1.max_abs_u, s.step_count
    );
    println!(
        "dE={:+.3e}  dG={:+.3e}",
        rec1.energy_e - rec0.energy_e,
        rec1.conserved_g - rec0.conserved_g
    );

    let curves = interface::extract_interface(&s.u)?;
    println!("extracted {} closed curve(s)", curves.len());
    let c = interface::curvature(&curves[0])?;
    let kap = c.kappa.as_ref().unwrap();
    let kbar = kap.iter().sum::<f64>() / kap.len() as f64;
    println!(
        "mean radius {:.4} (started {:.4}), mean curvature {:.4} (1/r = {:.4})",
        c.mean_radius(),
        r0,
        kbar,
        1.0 / c.mean_radius()
    );

    let sol = profile::solve_with_constants(p.potential, p.m, p.m0, 12.0, 4097)?;
    println!(
        "profile constants: alpha={:.6} lambda={:.6} B={:.6}",
        sol.alpha, sol.lambda, sol.alpha * sol.lambda
    );
    Ok(())
}
