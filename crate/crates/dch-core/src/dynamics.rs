//! Time integration for the degenerate model.
//!
//! Two schemes are provided. `ExplicitRk4Adaptive` is an embedded
//! Cash-Karp 4(5) pair with PI step-size control, stepping `u` directly;
//! it is the accuracy workhorse for mild stabilizer floors, where the
//! `1/g` contrast keeps the fourth-order stability limit affordable.
//! `ImexStabilized` treats a constant-coefficient stabilizer implicitly
//! (diagonal in spectral space) and steps the conserved density
//! `w = G_theta(u)`: every increment of `w` is a damped spectral
//! divergence, hence exactly mean-free, so the conservation law holds to
//! round-off at any step size. The stabilizer symbol is
//! `A (|k|^4 + kappa |k|^2)`; `kappa = 0` is the plain biharmonic split.

use crate::error::{Error, Result};
use crate::model::{self, g_antiderivative, g_antiderivative_inverse, ModelParams};
use crate::spectral::{PeriodicField, Spectral};

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Embedded Cash-Karp 4(5) pair on `u` with adaptive steps.
    ExplicitRk4Adaptive,
    /// Stabilized first-order IMEX on the conserved density `w = G_theta(u)`.
    ImexStabilized,
}

/// How the stabilization constant `A` of the IMEX scheme is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilizationMode {
    /// `A = M0 / min_x g_theta(u)`, recomputed each step and capped at
    /// `M0 theta^{-m}` (the exact lower bound of the stabilizer).
    Auto,
    /// Fixed user-supplied value.
    Fixed(f64),
    /// `A = mult * M0 * theta^{-m}`, a fixed multiple of the stabilizer
    /// floor. Unlike [`StabilizationMode::Fixed`] this keeps its meaning
    /// across theta sweeps, where the floor itself moves.
    ScaledFloor(f64),
}

/// Stepper configuration shared by both schemes.
#[derive(Debug, Clone)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Relative local error tolerance for step acceptance.
    pub rel_tol: f64,
    pub stabilization: StabilizationMode,
    /// Second-order weight in the implicit symbol `A(|k|^4 + kappa |k|^2)`.
    /// Zero is the plain biharmonic split. Positive values (2 c_q matches
    /// the linearized interface operator) also damp the second-order part
    /// of the explicit remainder, which otherwise destabilizes the split
    /// at strong `1/g` contrast no matter how large `A` is taken.
    pub stab_kappa: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            scheme: Scheme::ExplicitRk4Adaptive,
            dt_init: 1e-6,
            dt_min: 1e-14,
            dt_max: 1e-2,
            rel_tol: 1e-6,
            stabilization: StabilizationMode::Auto,
            stab_kappa: 0.0,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::InvalidParameter(
                "need 0 < dt_min <= dt_init <= dt_max".into(),
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidParameter("rel_tol must be positive".into()));
        }
        match self.stabilization {
            StabilizationMode::Fixed(a) => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "fixed stabilization constant must be positive".into(),
                    ));
                }
            }
            StabilizationMode::ScaledFloor(mult) => {
                if !(mult > 0.0 && mult.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "stabilization floor multiple must be positive".into(),
                    ));
                }
            }
            StabilizationMode::Auto => {}
        }
        if !(self.stab_kappa >= 0.0 && self.stab_kappa.is_finite()) {
            return Err(Error::InvalidParameter(
                "stab_kappa must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Fixed-step mode: the controller is bypassed when the bounds pin dt.
    /// Used by convergence studies that need an exact step sequence.
    fn fixed_dt(&self) -> Option<f64> {
        if self.dt_min == self.dt_max {
            Some(self.dt_min)
        } else {
            None
        }
    }

    fn error_order(&self) -> f64 {
        match self.scheme {
            Scheme::ExplicitRk4Adaptive => 5.0,
            Scheme::ImexStabilized => 2.0,
        }
    }
}

/// Evolving state owned by one integration run at a time.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub u: PeriodicField,
    pub step_count: u64,
    /// Step size proposal carried between steps by the controller.
    pub dt_next: f64,
    err_prev: f64,
}

impl SimState {
    pub fn new(u0: PeriodicField, cfg: &StepperConfig) -> Self {
        SimState {
            t: 0.0,
            u: u0,
            step_count: 0,
            dt_next: cfg.dt_init,
            err_prev: 1.0,
        }
    }

    /// State restored from persisted fields. The step controller's error
    /// history restarts, so an adaptive run split here may pick slightly
    /// different steps than an unsplit one; fixed-step runs are unaffected.
    pub fn resumed(t: f64, u: PeriodicField, step_count: u64, dt_next: f64) -> Self {
        SimState {
            t,
            u,
            step_count,
            dt_next,
            err_prev: 1.0,
        }
    }
}

/// Completed run: accepted step times and the final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub final_state: SimState,
}

const MAX_RETRIES: usize = 50;
const SAFETY: f64 = 0.9;
const GROW_LIMIT: f64 = 5.0;
const SHRINK_LIMIT: f64 = 0.2;
const ERR_FLOOR: f64 = 1e-10;

// Cash-Karp tableau
const CK_A: [[f64; 5]; 5] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ],
];
const CK_B5: [f64; 6] = [
    37.0 / 378.0,
    0.0,
    250.0 / 621.0,
    125.0 / 594.0,
    0.0,
    512.0 / 1771.0,
];
const CK_B4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    1.0 / 4.0,
];

enum Attempt {
    Accept { u_new: PeriodicField, err: f64 },
    Reject { err: f64 },
}

/// Advance the state by one accepted step (internal rejection loop).
pub fn step(
    sp: &mut Spectral,
    state: &mut SimState,
    p: &ModelParams,
    cfg: &StepperConfig,
) -> Result<()> {
    step_bounded(sp, state, p, cfg, f64::INFINITY)
}

/// One accepted step with dt additionally clipped so t never passes `t_stop`.
fn step_bounded(
    sp: &mut Spectral,
    state: &mut SimState,
    p: &ModelParams,
    cfg: &StepperConfig,
    t_stop: f64,
) -> Result<()> {
    let fixed = cfg.fixed_dt();
    let mut dt = state.dt_next.clamp(cfg.dt_min, cfg.dt_max);
    for _ in 0..MAX_RETRIES {
        let landing = dt >= t_stop - state.t;
        let dt_try = if landing { t_stop - state.t } else { dt };
        let outcome = match cfg.scheme {
            Scheme::ExplicitRk4Adaptive => attempt_rk45(sp, &state.u, p, cfg, dt_try)?,
            Scheme::ImexStabilized => {
                attempt_imex(sp, &state.u, p, cfg, dt_try, fixed.is_none())?
            }
        };
        match outcome {
            Attempt::Accept { u_new, err } => {
                state.t = if landing { t_stop } else { state.t + dt_try };
                state.u = u_new;
                state.step_count += 1;
                state.dt_next = match fixed {
                    Some(d) => d,
                    None => next_dt(dt_try, err, state.err_prev, cfg),
                };
                state.err_prev = err.max(ERR_FLOOR);
                return Ok(());
            }
            Attempt::Reject { err } => {
                if fixed.is_some() {
                    // nothing to adapt: a pinned-step scheme that rejects is stuck
                    return Err(Error::StepSizeUnderflow {
                        t: state.t,
                        dt: dt_try,
                        dt_min: cfg.dt_min,
                    });
                }
                dt = shrink_dt(dt_try, err, cfg.error_order());
                if dt < cfg.dt_min {
                    return Err(Error::StepSizeUnderflow {
                        t: state.t,
                        dt,
                        dt_min: cfg.dt_min,
                    });
                }
            }
        }
    }
    Err(Error::StepSizeUnderflow {
        t: state.t,
        dt,
        dt_min: cfg.dt_min,
    })
}

/// Weighted RMS of the error estimate against `rel_tol (1 + |u|)`;
/// a step is accepted when the norm is <= 1.
fn error_norm(err: &[f64], u: &[f64], u_new: &[f64], rel_tol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..err.len() {
        let scale = rel_tol * (1.0 + u[i].abs().max(u_new[i].abs()));
        let r = err[i] / scale;
        acc += r * r;
    }
    (acc / err.len() as f64).sqrt()
}

fn next_dt(dt: f64, err: f64, err_prev: f64, cfg: &StepperConfig) -> f64 {
    // PI controller on the scheme's estimator order
    let q = cfg.error_order();
    let e = err.max(ERR_FLOOR);
    let factor = SAFETY * e.powf(-0.7 / q) * err_prev.powf(0.4 / q);
    (dt * factor.clamp(SHRINK_LIMIT, GROW_LIMIT)).clamp(cfg.dt_min, cfg.dt_max)
}

fn shrink_dt(dt: f64, err: f64, q: f64) -> f64 {
    if err.is_finite() {
        dt * (SAFETY * err.powf(-1.0 / q)).clamp(SHRINK_LIMIT, 0.9)
    } else {
        dt * SHRINK_LIMIT
    }
}

fn attempt_rk45(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
    cfg: &StepperConfig,
    dt: f64,
) -> Result<Attempt> {
    let n = u.data().len();
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(6);
    stages.push(model::evolution_rhs(sp, u, p)?.into_data());
    let mut scratch = u.clone();
    for s in 0..5 {
        {
            let dst = scratch.data_mut();
            for i in 0..n {
                let mut acc = 0.0;
                for (j, st) in stages.iter().enumerate().take(s + 1) {
                    let a = CK_A[s][j];
                    if a != 0.0 {
                        acc += a * st[i];
                    }
                }
                dst[i] = u.data()[i] + dt * acc;
            }
        }
        match model::evolution_rhs(sp, &scratch, p) {
            Ok(r) => stages.push(r.into_data()),
            Err(Error::NonFiniteField) => return Ok(Attempt::Reject { err: f64::INFINITY }),
            Err(e) => return Err(e),
        }
    }
    let mut u_new = u.clone();
    let mut err = vec![0.0; n];
    {
        let dst = u_new.data_mut();
        for i in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for (j, st) in stages.iter().enumerate() {
                hi += CK_B5[j] * st[i];
                lo += CK_B4[j] * st[i];
            }
            dst[i] = u.data()[i] + dt * hi;
            err[i] = dt * (hi - lo);
        }
    }
    if !u_new.is_finite() {
        return Ok(Attempt::Reject { err: f64::INFINITY });
    }
    let e = error_norm(&err, u.data(), u_new.data(), cfg.rel_tol);
    if e <= 1.0 {
        Ok(Attempt::Accept { u_new, err: e })
    } else {
        Ok(Attempt::Reject { err: e })
    }
}

fn attempt_imex(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
    cfg: &StepperConfig,
    dt: f64,
    adaptive: bool,
) -> Result<Attempt> {
    if !(p.theta > 0.0) {
        return Err(Error::InvalidParameter(
            "imex_stabilized steps the conserved density and needs theta > 0".into(),
        ));
    }
    let a = stabilization_constant(u, p, cfg);
    let damp: Vec<f64> = sp
        .ksq()
        .iter()
        .map(|&k2| {
            if k2 == 0.0 {
                // increments of the conserved density are mean-free in exact
                // arithmetic; pin the mean mode to drop the round-off dust
                0.0
            } else {
                dt / (1.0 + dt * a * (k2 * k2 + cfg.stab_kappa * k2))
            }
        })
        .collect();

    let inc = match damped_increment(sp, u, p, &damp) {
        Ok(v) => v,
        Err(Error::NonFiniteField) => return Ok(Attempt::Reject { err: f64::INFINITY }),
        Err(e) => return Err(e),
    };
    let mut u_new = u.clone();
    {
        let dst = u_new.data_mut();
        for i in 0..dst.len() {
            let w_new = g_antiderivative(u.data()[i], p.m, p.theta) + inc.data()[i];
            match g_antiderivative_inverse(w_new, p.m, p.theta, u.data()[i]) {
                Ok(v) => dst[i] = v,
                Err(Error::NonFiniteField) => {
                    return Ok(Attempt::Reject { err: f64::INFINITY })
                }
                Err(e) => return Err(e),
            }
        }
    }
    if !u_new.is_finite() {
        return Ok(Attempt::Reject { err: f64::INFINITY });
    }
    if !adaptive {
        return Ok(Attempt::Accept {
            u_new,
            err: ERR_FLOOR,
        });
    }
    // first-order error proxy: half the change of the damped increment when
    // re-evaluated at the new state (leading local truncation term)
    let inc_new = match damped_increment(sp, &u_new, p, &damp) {
        Ok(v) => v,
        Err(Error::NonFiniteField) => return Ok(Attempt::Reject { err: f64::INFINITY }),
        Err(e) => return Err(e),
    };
    let mut err = vec![0.0; inc.data().len()];
    for i in 0..err.len() {
        err[i] = 0.5 * (inc_new.data()[i] - inc.data()[i]);
    }
    let e = error_norm(&err, u.data(), u_new.data(), cfg.rel_tol);
    if !e.is_finite() {
        return Ok(Attempt::Reject { err: f64::INFINITY });
    }
    if e <= 1.0 {
        Ok(Attempt::Accept { u_new, err: e })
    } else {
        Ok(Attempt::Reject { err: e })
    }
}

/// `(I - dt L)^{-1} dt X(u)` for `L = -A(|k|^4 + kappa |k|^2)` applied to
/// the conserved-density flux `X`, as a spectral multiplier table.
fn damped_increment(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
    damp: &[f64],
) -> Result<PeriodicField> {
    let x = model::flux_divergence(sp, u, p)?;
    let mut spec = sp.forward(&x);
    for (c, &d) in spec.data_mut().iter_mut().zip(damp.iter()) {
        *c *= d;
    }
    Ok(sp.inverse(&spec))
}

fn stabilization_constant(u: &PeriodicField, p: &ModelParams, cfg: &StepperConfig) -> f64 {
    match cfg.stabilization {
        StabilizationMode::Fixed(a) => a,
        StabilizationMode::ScaledFloor(mult) => mult * p.m0 * p.theta.powf(-p.m),
        StabilizationMode::Auto => {
            let mut gmin = f64::INFINITY;
            for &v in u.data() {
                gmin = gmin.min(p.g(v));
            }
            let cap = p.m0 * p.theta.powf(-p.m);
            if gmin > 0.0 {
                (p.m0 / gmin).min(cap)
            } else {
                cap
            }
        }
    }
}

/// Integrate to `t_end`, invoking the hook on the initial state and after
/// every accepted step. Hooks receive read-only snapshots; a hook error
/// aborts the run. `t_end = 0` returns the initial state with zero steps.
pub fn run<H>(
    sp: &mut Spectral,
    u0: &PeriodicField,
    p: &ModelParams,
    cfg: &StepperConfig,
    t_end: f64,
    hook: H,
) -> Result<Trajectory>
where
    H: FnMut(&SimState) -> Result<()>,
{
    cfg.validate()?;
    run_from(sp, SimState::new(u0.clone(), cfg), p, cfg, t_end, hook)
}

/// [`run`] continued from an existing state (resume support). The hook sees
/// the given state first; `t_end` is absolute, so a state already past it
/// takes no steps.
pub fn run_from<H>(
    sp: &mut Spectral,
    state: SimState,
    p: &ModelParams,
    cfg: &StepperConfig,
    t_end: f64,
    mut hook: H,
) -> Result<Trajectory>
where
    H: FnMut(&SimState) -> Result<()>,
{
    cfg.validate()?;
    p.validate()?;
    if !(t_end >= 0.0) {
        return Err(Error::InvalidParameter("t_end must be nonnegative".into()));
    }
    let mut state = state;
    hook(&state)?;
    let mut samples = vec![state.t];
    while state.t < t_end {
        step_bounded(sp, &mut state, p, cfg, t_end).map_err(|e| match e {
            Error::RunFailed { .. } => e,
            other => Error::RunFailed {
                t: state.t,
                source: Box::new(other),
            },
        })?;
        hook(&state)?;
        samples.push(state.t);
    }
    Ok(Trajectory {
        sample_times: samples,
        final_state: state,
    })
}
