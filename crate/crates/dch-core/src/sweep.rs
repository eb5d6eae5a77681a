//! Parameter-sweep studies: the regularization limit theta -> 0 and grid
//! refinement.
//!
//! Both drivers rerun the same initial condition under identical stepper
//! settings while varying exactly one knob, then compare final states. The
//! theta sweep measures Cauchy behavior of the regularized solutions (no
//! rate is asserted, only shrinking consecutive distances on the tail); the
//! grid study measures spectral self-convergence against the finest grid.

use std::time::Instant;

use crate::diagnostics;
use crate::dynamics::{self, StepperConfig};
use crate::error::{Error, Result};
use crate::model::{g_antiderivative, ModelParams};
use crate::spectral::{PeriodicField, PeriodicGrid, Spectral};

/// Outcome of a theta sweep.
///
/// `pairwise_distances[i]` is the L2 distance between the final states of
/// the runs at `thetas[i]` and `thetas[i+1]`; `monotonicity_flags[i]` says
/// whether `pairwise_distances[i+1] <= pairwise_distances[i]`. Energies are
/// at final time. `final_limit_g` evaluates the theta = 0 antiderivative on
/// every final state so runs remain comparable across theta (each run's own
/// conserved integral uses its own theta; see `conservation_drifts`).
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub thetas: Vec<f64>,
    pub pairwise_distances: Vec<f64>,
    pub monotonicity_flags: Vec<bool>,
    pub initial_energy: f64,
    pub energies: Vec<f64>,
    /// |G(T) - G(0)| / max(|G(0)|, 1) per run, each with its own theta.
    pub conservation_drifts: Vec<f64>,
    pub final_limit_g: Vec<f64>,
    pub runtimes: Vec<f64>,
}

impl SweepReport {
    /// True when the last `pairs` consecutive-distance comparisons are all
    /// non-increasing. `pairs = 0` is vacuously true.
    pub fn tail_non_increasing(&self, pairs: usize) -> bool {
        let flags = &self.monotonicity_flags;
        if pairs > flags.len() {
            return false;
        }
        flags[flags.len() - pairs..].iter().all(|&f| f)
    }

    /// Largest final-energy rise above the initial energy over all runs
    /// (negative when every run dissipated).
    pub fn max_energy_rise(&self) -> f64 {
        self.energies
            .iter()
            .map(|e| e - self.initial_energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Run the same problem at each theta in `thetas` (strictly decreasing,
/// all positive) and compare the final states pairwise.
///
/// Errors from an individual run are tagged with the theta that failed.
pub fn theta_sweep(
    sp: &mut Spectral,
    u0: &PeriodicField,
    p: &ModelParams,
    cfg: &StepperConfig,
    thetas: &[f64],
    t_end: f64,
) -> Result<SweepReport> {
    if thetas.is_empty() {
        return Err(Error::InvalidParameter("empty theta list".into()));
    }
    for w in thetas.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidParameter(format!(
                "thetas must be strictly decreasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if !(*thetas.last().unwrap() > 0.0) {
        return Err(Error::InvalidParameter("thetas must be positive".into()));
    }
    if u0.grid() != sp.grid() {
        return Err(Error::GridMismatch("u0 grid differs from plan".into()));
    }

    let initial_energy = diagnostics::energy_e(sp, u0, p)?;
    let mut finals: Vec<PeriodicField> = Vec::with_capacity(thetas.len());
    let mut energies = Vec::with_capacity(thetas.len());
    let mut conservation_drifts = Vec::with_capacity(thetas.len());
    let mut final_limit_g = Vec::with_capacity(thetas.len());
    let mut runtimes = Vec::with_capacity(thetas.len());

    for &theta in thetas {
        let mut pt = p.clone();
        pt.theta = theta;
        let start = Instant::now();
        let traj = dynamics::run(sp, u0, &pt, cfg, t_end, |_| Ok(())).map_err(|e| {
            Error::SweepMemberFailed {
                theta,
                source: Box::new(e),
            }
        })?;
        runtimes.push(start.elapsed().as_secs_f64());
        let uf = traj.final_state.u;
        energies.push(diagnostics::energy_e(sp, &uf, &pt)?);
        let g0 = diagnostics::conserved_g(u0, &pt);
        let gf = diagnostics::conserved_g(&uf, &pt);
        conservation_drifts.push((gf - g0).abs() / g0.abs().max(1.0));
        final_limit_g.push(
            uf.data()
                .iter()
                .map(|&v| g_antiderivative(v, p.m, 0.0))
                .sum::<f64>()
                * uf.grid().cell_volume(),
        );
        finals.push(uf);
    }

    let pairwise_distances: Vec<f64> = finals
        .windows(2)
        .map(|w| w[0].dist_l2(&w[1]))
        .collect::<Result<_>>()?;
    let monotonicity_flags = pairwise_distances
        .windows(2)
        .map(|w| w[1] <= w[0])
        .collect();

    Ok(SweepReport {
        thetas: thetas.to_vec(),
        pairwise_distances,
        monotonicity_flags,
        initial_energy,
        energies,
        conservation_drifts,
        final_limit_g,
        runtimes,
    })
}

/// Default theta sequence: geometric, ratio 1/2, starting at 0.2.
pub fn default_thetas(count: usize) -> Vec<f64> {
    (0..count).map(|i| 0.2 * 0.5f64.powi(i as i32)).collect()
}

/// Outcome of a grid-refinement study. `errors_vs_finest[i]` is the L2
/// distance, on grid `grid_sizes[i]`, between that run's final state and
/// the finest run's final state restricted to it.
#[derive(Clone, Debug)]
pub struct RefinementReport {
    pub grid_sizes: Vec<usize>,
    pub errors_vs_finest: Vec<f64>,
    pub energies: Vec<f64>,
    pub runtimes: Vec<f64>,
}

/// Restrict a field to a coarser nested grid by subsampling (every grid
/// point of the coarse grid is a grid point of the fine one).
pub fn restrict_to(f: &PeriodicField, n_coarse: usize) -> Result<PeriodicField> {
    let fine = f.grid();
    let nf = fine.n();
    if nf == n_coarse {
        return Ok(f.clone());
    }
    check_nested(n_coarse, nf)?;
    let stride = nf / n_coarse;
    let coarse = PeriodicGrid::new(fine.dim(), n_coarse)?;
    let mut data = Vec::with_capacity(coarse.len());
    match fine.dim() {
        1 => {
            for i in 0..n_coarse {
                data.push(f.data()[i * stride]);
            }
        }
        _ => {
            for i in 0..n_coarse {
                for j in 0..n_coarse {
                    data.push(f.data()[(i * stride) * nf + j * stride]);
                }
            }
        }
    }
    PeriodicField::from_data(coarse, data)
}

fn check_nested(coarse: usize, fine: usize) -> Result<()> {
    if coarse == 0 || fine % coarse != 0 || !(fine / coarse).is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "grids {coarse} and {fine} are not dyadically nested"
        )));
    }
    Ok(())
}

/// Rerun the same problem at every size in `grid_sizes` (strictly
/// increasing, dyadically nested) and measure each run's final state
/// against the finest run's.
///
/// `u0` lives on the finest grid; coarser runs start from its restriction,
/// so it must be resolved on the coarsest grid for the study to mean
/// anything (restriction is plain subsampling).
pub fn galerkin_refinement(
    u0: &PeriodicField,
    p: &ModelParams,
    cfg: &StepperConfig,
    grid_sizes: &[usize],
    t_end: f64,
) -> Result<RefinementReport> {
    if grid_sizes.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two grid sizes".into(),
        ));
    }
    for w in grid_sizes.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidParameter(format!(
                "grid sizes must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        check_nested(w[0], w[1])?;
    }
    let n_finest = *grid_sizes.last().unwrap();
    if u0.grid().n() != n_finest {
        return Err(Error::GridMismatch(format!(
            "u0 is on n={}, expected the finest size n={}",
            u0.grid().n(),
            n_finest
        )));
    }

    let mut finals = Vec::with_capacity(grid_sizes.len());
    let mut energies = Vec::with_capacity(grid_sizes.len());
    let mut runtimes = Vec::with_capacity(grid_sizes.len());
    for &n in grid_sizes {
        let u0n = restrict_to(u0, n)?;
        let mut sp = Spectral::new(u0n.grid());
        let start = Instant::now();
        let traj = dynamics::run(&mut sp, &u0n, p, cfg, t_end, |_| Ok(()))?;
        runtimes.push(start.elapsed().as_secs_f64());
        energies.push(diagnostics::energy_e(&mut sp, &traj.final_state.u, p)?);
        finals.push(traj.final_state.u);
    }

    let finest = finals.last().unwrap();
    let errors_vs_finest: Vec<f64> = finals[..finals.len() - 1]
        .iter()
        .map(|uf| Ok(uf.dist_l2(&restrict_to(finest, uf.grid().n())?)?))
        .collect::<Result<_>>()?;

    Ok(RefinementReport {
        grid_sizes: grid_sizes.to_vec(),
        errors_vs_finest,
        energies,
        runtimes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Scheme, StabilizationMode};
    use std::f64::consts::PI;

    fn tanh_circle(grid: PeriodicGrid, r0: f64, eps: f64) -> PeriodicField {
        let width = 2.0f64.sqrt() * eps;
        PeriodicField::from_fn(grid, |x, y| {
            let r = ((x - PI).powi(2) + (y - PI).powi(2)).sqrt();
            (-(r - r0) / width).tanh()
        })
    }

    fn imex_fixed_dt(dt: f64, kappa: f64) -> StepperConfig {
        StepperConfig {
            scheme: Scheme::ImexStabilized,
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            rel_tol: 1e-6,
            stabilization: StabilizationMode::ScaledFloor(4096.0),
            stab_kappa: kappa,
        }
    }

    #[test]
    fn rejects_bad_theta_lists() {
        let grid = PeriodicGrid::new(2, 16).unwrap();
        let mut sp = Spectral::new(grid);
        let u0 = PeriodicField::constant(grid, 0.0);
        let p = ModelParams::standard(0.5, 0.1);
        let cfg = imex_fixed_dt(1e-3, 0.0);
        for bad in [
            vec![],
            vec![0.1, 0.1],
            vec![0.1, 0.2],
            vec![0.1, 0.05, 0.0],
        ] {
            assert!(
                theta_sweep(&mut sp, &u0, &p, &cfg, &bad, 1e-3).is_err(),
                "accepted {bad:?}"
            );
        }
    }

    #[test]
    fn single_theta_gives_empty_distances() {
        let grid = PeriodicGrid::new(2, 16).unwrap();
        let mut sp = Spectral::new(grid);
        let u0 = tanh_circle(grid, PI / 2.0, 0.6);
        let p = ModelParams::standard(0.6, 0.3);
        let cfg = imex_fixed_dt(1e-3, 0.0);
        let rep = theta_sweep(&mut sp, &u0, &p, &cfg, &[0.3], 1e-2).unwrap();
        assert!(rep.pairwise_distances.is_empty());
        assert!(rep.monotonicity_flags.is_empty());
        assert_eq!(rep.energies.len(), 1);
        assert!(rep.tail_non_increasing(0));
        assert!(!rep.tail_non_increasing(1));
    }

    #[test]
    fn sweep_runs_conserve_their_own_integral() {
        let grid = PeriodicGrid::new(2, 32).unwrap();
        let mut sp = Spectral::new(grid);
        let u0 = tanh_circle(grid, PI / 2.0, 0.4);
        let p = ModelParams::standard(0.4, 0.2);
        let cfg = imex_fixed_dt(1e-3, 2.0 * p.c_q());
        let rep = theta_sweep(&mut sp, &u0, &p, &cfg, &[0.2, 0.1], 0.05).unwrap();
        for (th, drift) in rep.thetas.iter().zip(&rep.conservation_drifts) {
            assert!(*drift <= 1e-9, "theta={th}: conservation drift {drift:.3e}");
        }
        assert_eq!(rep.pairwise_distances.len(), 1);
        assert!(rep.pairwise_distances[0] > 0.0, "runs at different theta should differ");
        assert_eq!(rep.runtimes.len(), 2);
    }

    #[test]
    fn default_sequence_is_geometric() {
        let t = default_thetas(4);
        assert_eq!(t, vec![0.2, 0.1, 0.05, 0.025]);
    }

    #[test]
    fn tagged_error_carries_theta() {
        let grid = PeriodicGrid::new(2, 16).unwrap();
        let mut sp = Spectral::new(grid);
        let u0 = PeriodicField::constant(grid, 0.0);
        let mut p = ModelParams::standard(0.5, 0.1);
        p.m0 = -1.0; // invalid, forces a per-run validation failure
        let cfg = imex_fixed_dt(1e-3, 0.0);
        match theta_sweep(&mut sp, &u0, &p, &cfg, &[0.1], 1e-3) {
            Err(Error::SweepMemberFailed { theta, .. }) => assert_eq!(theta, 0.1),
            other => panic!("expected tagged failure, got {other:?}"),
        }
    }

    #[test]
    fn restriction_subsamples_nested_grids() {
        let fine = PeriodicGrid::new(2, 64).unwrap();
        let f = PeriodicField::from_fn(fine, |x, y| (2.0 * x).cos() + y.sin());
        let r = restrict_to(&f, 16).unwrap();
        let direct = PeriodicField::from_fn(
            PeriodicGrid::new(2, 16).unwrap(),
            |x, y| (2.0 * x).cos() + y.sin(),
        );
        assert_eq!(r.data(), direct.data());
        assert!(restrict_to(&f, 24).is_err());
        assert!(restrict_to(&f, 0).is_err());
    }

    #[test]
    fn refinement_rejects_bad_size_lists() {
        let grid = PeriodicGrid::new(2, 64).unwrap();
        let u0 = PeriodicField::constant(grid, 0.0);
        let p = ModelParams::standard(0.5, 0.2);
        let cfg = imex_fixed_dt(1e-3, 0.0);
        for bad in [vec![64], vec![32, 32], vec![32, 48], vec![64, 32]] {
            assert!(
                galerkin_refinement(&u0, &p, &cfg, &bad, 1e-3).is_err(),
                "accepted {bad:?}"
            );
        }
        // u0 must live on the finest listed grid
        assert!(galerkin_refinement(&u0, &p, &cfg, &[64, 128], 1e-3).is_err());
    }

    #[test]
    fn constant_state_has_zero_refinement_error() {
        let grid = PeriodicGrid::new(2, 64).unwrap();
        let u0 = PeriodicField::constant(grid, 0.3);
        let p = ModelParams::standard(0.5, 0.2);
        let cfg = imex_fixed_dt(1e-3, 0.0);
        let rep = galerkin_refinement(&u0, &p, &cfg, &[16, 32, 64], 1e-2).unwrap();
        assert_eq!(rep.errors_vs_finest, vec![0.0, 0.0]);
    }

    #[test]
    fn smooth_problem_self_converges_spectrally() {
        // single-mode start well inside |u| < 1: the state never meets the
        // stabilizer clamp band, the right-hand side stays analytic, and the
        // truncation error collapses faster than any fixed rate. dt is held
        // small so the shared time-integration error stays below the spatial
        // consistency error being measured
        let fine = PeriodicGrid::new(2, 128).unwrap();
        let u0 = PeriodicField::from_fn(fine, |x, y| 0.5 * x.cos() * y.cos());
        let p = ModelParams::standard(0.5, 0.4);
        let cfg = imex_fixed_dt(1e-5, 2.0 * p.c_q());
        let rep = galerkin_refinement(&u0, &p, &cfg, &[32, 64, 128], 2e-3).unwrap();
        let ratio = rep.errors_vs_finest[1] / rep.errors_vs_finest[0];
        assert!(
            ratio <= 0.1,
            "error(64)/error(32) = {ratio:.3e} ({:?})",
            rep.errors_vs_finest
        );
    }
}
