//! Nonlocal self-climb coupling: the climb force is the half-Laplacian of
//! the phase field (plus any applied force), entering the chemical potential
//! with weight c_f. The conservative structure of the dynamics is unchanged.
//!
//! Two force evaluations are provided: the spectral symbol (normative for
//! dynamics under periodic boundary conditions) and a brute-force real-space
//! quadrature of the free-space kernel, kept as an independent oracle.

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::dynamics::{self, StepperConfig, Trajectory};
use crate::error::{Error, Result};
use crate::interface;
use crate::model::{self, ModelParams};
use crate::spectral::{PeriodicField, Spectral};

/// Applied climb force: uniform or a full field.
#[derive(Clone, Debug)]
pub enum AppliedForce {
    Constant(f64),
    Field(PeriodicField),
}

impl AppliedForce {
    fn add_to(&self, out: &mut PeriodicField) -> Result<()> {
        match self {
            AppliedForce::Constant(c) => {
                for v in out.data_mut() {
                    *v += c;
                }
            }
            AppliedForce::Field(f) => {
                if f.grid() != out.grid() {
                    return Err(Error::GridMismatch(
                        "applied force on a different grid".into(),
                    ));
                }
                for (v, &a) in out.data_mut().iter_mut().zip(f.data()) {
                    *v += a;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ClimbParams {
    /// Lumped elastic prefactor of the nonlocal term, > 0 (default 1).
    pub coefficient: f64,
    pub f_app: AppliedForce,
    pub enabled: bool,
}

impl Default for ClimbParams {
    fn default() -> Self {
        Self {
            coefficient: 1.0,
            f_app: AppliedForce::Constant(0.0),
            enabled: true,
        }
    }
}

impl ClimbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.coefficient > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "climb coefficient must be > 0, got {}",
                self.coefficient
            )));
        }
        Ok(())
    }
}

/// Climb force via the periodic spectral symbol:
/// coefficient * (-lap)^(1/2) u + f_app.
pub fn climb_force_spectral(
    sp: &mut Spectral,
    u: &PeriodicField,
    cp: &ClimbParams,
) -> Result<PeriodicField> {
    let mut out = sp.fractional_laplacian(u, 0.5)?;
    for v in out.data_mut() {
        *v *= cp.coefficient;
    }
    cp.f_app.add_to(&mut out)?;
    Ok(out)
}

/// Hard cap for the O(N^4) direct quadrature unless explicitly overridden.
pub const DIRECT_FORCE_MAX_N: usize = 96;

/// Climb force by direct quadrature of the free-space kernel
///
///   coefficient/(2 pi) * PV int [ (x-xb)/R^3 du/dxb + (y-yb)/R^3 du/dyb ]
///
/// with the self-cell dropped (the kernel is odd about the singularity).
/// Agrees with [`climb_force_spectral`] up to the periodic-image error of
/// replacing the free-space kernel by its periodization.
pub fn climb_force_direct(
    sp: &mut Spectral,
    u: &PeriodicField,
    cp: &ClimbParams,
    allow_large: bool,
) -> Result<PeriodicField> {
    let grid = u.grid();
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDim(grid.dim()));
    }
    if grid.n() > DIRECT_FORCE_MAX_N && !allow_large {
        return Err(Error::GridTooLarge {
            n: grid.n(),
            max: DIRECT_FORCE_MAX_N,
        });
    }
    let grad = sp.gradient(u)?;
    let (ux, uy) = (&grad[0], &grad[1]);
    let n = grid.n();
    let h = grid.spacing();
    let w = cp.coefficient / (2.0 * std::f64::consts::PI) * grid.cell_volume();
    let mut out = PeriodicField::zeros(grid);
    for ti in 0..n {
        for tj in 0..n {
            let (x, y) = (ti as f64 * h, tj as f64 * h);
            let mut acc = 0.0;
            for si in 0..n {
                let dx = x - si as f64 * h;
                for sj in 0..n {
                    if si == ti && sj == tj {
                        continue;
                    }
                    let dy = y - sj as f64 * h;
                    let r2 = dx * dx + dy * dy;
                    let inv_r3 = 1.0 / (r2 * r2.sqrt());
                    let idx = si * n + sj;
                    acc += (dx * ux.data()[idx] + dy * uy.data()[idx]) * inv_r3;
                }
            }
            out.data_mut()[ti * n + tj] = w * acc;
        }
    }
    cp.f_app.add_to(&mut out)?;
    Ok(out)
}

/// Chemical potential with the climb term required on: errors if the model
/// has no enabled climb coupling, otherwise identical to the plain
/// chemical potential (which already includes the term when enabled).
pub fn chemical_potential_climb(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
) -> Result<PeriodicField> {
    match &p.climb {
        Some(cp) if cp.enabled => model::chemical_potential(sp, u, p),
        _ => Err(Error::ClimbDisabled),
    }
}

/// Superposed radial tanh loop profiles about the given centers and radii,
/// clipped to [-1, 1]; +1 inside each loop, -1 far field. Initial loops must
/// be pairwise disjoint (separated by at least 4 eps of clearance).
pub fn loop_superposition(
    grid: crate::spectral::PeriodicGrid,
    centers: &[(f64, f64)],
    radii: &[f64],
    epsilon: f64,
) -> Result<PeriodicField> {
    if centers.len() != radii.len() {
        return Err(Error::InvalidParameter(format!(
            "{} centers but {} radii",
            centers.len(),
            radii.len()
        )));
    }
    if centers.is_empty() {
        return Err(Error::InvalidParameter("no loops given".into()));
    }
    for r in radii {
        if !(*r > 0.0) {
            return Err(Error::InvalidParameter(format!("loop radius {r} <= 0")));
        }
    }
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let d = periodic_distance(centers[i], centers[j]);
            if d < radii[i] + radii[j] + 4.0 * epsilon {
                return Err(Error::InvalidParameter(format!(
                    "loops {i} and {j} overlap: centers {d:.4} apart, radii {} and {}",
                    radii[i], radii[j]
                )));
            }
        }
    }
    let width = std::f64::consts::SQRT_2 * epsilon;
    Ok(PeriodicField::from_fn(grid, |x, y| {
        let mut v = -1.0f64;
        for (c, r) in centers.iter().zip(radii) {
            let d = periodic_distance((x, y), *c);
            // each loop contributes (tanh + 1), riding on the -1 far field
            v += (-(d - r) / width).tanh() + 1.0;
        }
        v.clamp(-1.0, 1.0)
    }))
}

/// Geometry of one extracted loop at one sample time. `loop_id` is the
/// index of the nearest initial center; ids can repeat in a sample if a
/// loop has split.
#[derive(Clone, Copy, Debug)]
pub struct LoopGeometry {
    pub loop_id: usize,
    pub mean_radius: f64,
    pub center: [f64; 2],
}

/// One scenario sample: extracted loop geometries plus the standard
/// diagnostics at the same instant. `loops` is empty if the field has
/// stopped changing sign (all loops gone).
#[derive(Clone, Debug)]
pub struct LoopSample {
    pub t: f64,
    pub loops: Vec<LoopGeometry>,
    pub diagnostics: DiagnosticsRecord,
}

/// Completed loop scenario.
#[derive(Debug)]
pub struct LoopScenario {
    pub samples: Vec<LoopSample>,
    pub trajectory: Trajectory,
}

/// Initialize superposed loops and run the climb dynamics to `t_end`,
/// recording per-loop geometry and diagnostics at `n_samples` evenly spaced
/// times (plus the initial state).
///
/// The model must have the climb coupling enabled; initial loops must be
/// pairwise disjoint.
pub fn loop_scenario(
    sp: &mut Spectral,
    centers: &[(f64, f64)],
    radii: &[f64],
    p: &ModelParams,
    cfg: &StepperConfig,
    t_end: f64,
    n_samples: usize,
) -> Result<LoopScenario> {
    match &p.climb {
        Some(cp) if cp.enabled => cp.validate()?,
        _ => return Err(Error::ClimbDisabled),
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    let grid = sp.grid();
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDim(grid.dim()));
    }
    let u0 = loop_superposition(grid, centers, radii, p.epsilon)?;

    // diagnostics need transforms while the run owns `sp`, so they get
    // their own plan set
    let mut diag_sp = Spectral::new(grid);
    let mut samples: Vec<LoopSample> = Vec::with_capacity(n_samples + 1);
    let mut next_sample = 0.0;
    let stride = t_end / n_samples as f64;
    let mut sample_err: Option<Error> = None;
    let trajectory = dynamics::run(sp, &u0, p, cfg, t_end, |state| {
        if state.t + 1e-12 * t_end.max(1.0) < next_sample {
            return Ok(());
        }
        next_sample += stride;
        let loops = match extract_loops(&state.u, centers, state.t) {
            Ok(l) => l,
            Err(Error::NoInterface) => Vec::new(),
            Err(e) => {
                sample_err = Some(e);
                return Err(Error::InvalidParameter("sampling aborted".into()));
            }
        };
        match diagnostics::record(&mut diag_sp, &state.u, p, state.t) {
            Ok(diagnostics) => {
                samples.push(LoopSample {
                    t: state.t,
                    loops,
                    diagnostics,
                });
                Ok(())
            }
            Err(e) => {
                sample_err = Some(e);
                Err(Error::InvalidParameter("sampling aborted".into()))
            }
        }
    });
    if let Some(e) = sample_err {
        return Err(e);
    }
    Ok(LoopScenario {
        samples,
        trajectory: trajectory?,
    })
}

fn extract_loops(
    u: &PeriodicField,
    centers: &[(f64, f64)],
    t: f64,
) -> Result<Vec<LoopGeometry>> {
    let curves = interface::extract_interface_at(u, t)?;
    let l = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(curves.len());
    for c in &curves {
        // traced curves use unwrapped coordinates; report in-domain
        let cen = c.centroid();
        let cen = [cen[0].rem_euclid(l), cen[1].rem_euclid(l)];
        let loop_id = centers
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                periodic_distance((cen[0], cen[1]), **a)
                    .total_cmp(&periodic_distance((cen[0], cen[1]), **b))
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        out.push(LoopGeometry {
            loop_id,
            mean_radius: c.mean_radius(),
            center: cen,
        });
    }
    Ok(out)
}

/// Shortest distance between two points on the periodic square of side 2 pi.
pub fn periodic_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let l = 2.0 * std::f64::consts::PI;
    let wrap = |d: f64| {
        let d = (d % l + l) % l;
        d.min(l - d)
    };
    let dx = wrap(a.0 - b.0);
    let dy = wrap(a.1 - b.1);
    (dx * dx + dy * dy).sqrt()
}
