//! Model ingredients for the degenerate conserved dynamics
//!
//!   g_theta(u) du/dt = div( M_theta(u) grad( mu / g_theta(u) ) ),
//!   mu = -lap(u) + c_q q'(u) [+ c_f f_cl with the nonlocal climb force],
//!
//! with double-well potential q, stabilizer g_theta(u) = max(|1-u^2|, theta)^m,
//! and mobility M_theta = M0 g_theta. The scaled form uses
//! (c_q, c_f) = (1/eps^2, 1/eps); the unscaled form uses (1, 1).

use crate::climb::{climb_force_spectral, ClimbParams};
use crate::error::{Error, Result};
use crate::spectral::{PeriodicField, Spectral};

/// Double-well potential selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    /// q(u) = (1 - u^2)^2
    Quartic,
    /// q(u) = (1 - u^2)^2 / 4
    ScaledQuartic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Potential {
    pub kind: PotentialKind,
}

impl Potential {
    pub const QUARTIC: Self = Self {
        kind: PotentialKind::Quartic,
    };
    pub const SCALED_QUARTIC: Self = Self {
        kind: PotentialKind::ScaledQuartic,
    };

    pub fn q(&self, u: f64) -> f64 {
        let d = 1.0 - u * u;
        match self.kind {
            PotentialKind::Quartic => d * d,
            PotentialKind::ScaledQuartic => 0.25 * d * d,
        }
    }

    pub fn q_prime(&self, u: f64) -> f64 {
        let d = 1.0 - u * u;
        match self.kind {
            PotentialKind::Quartic => -4.0 * u * d,
            PotentialKind::ScaledQuartic => -u * d,
        }
    }

    pub fn q_second(&self, u: f64) -> f64 {
        match self.kind {
            PotentialKind::Quartic => 12.0 * u * u - 4.0,
            PotentialKind::ScaledQuartic => 3.0 * u * u - 1.0,
        }
    }

    /// Polynomial growth exponent of q' (informational only).
    pub fn growth_exponent(&self) -> f64 {
        3.0
    }
}

/// Stabilizer g_theta(u) = max(|1 - u^2|, theta)^m.
pub fn g_value(u: f64, m: f64, theta: f64) -> f64 {
    let dev = (1.0 - u * u).abs();
    let base = if dev <= theta { theta } else { dev };
    pow_m(base, m)
}

/// Derivative of g_theta in u. Zero on the clamp region |1-u^2| <= theta
/// (the clamp boundary belongs to the clamp); elsewhere the classical
/// -2 m u sign(1-u^2) |1-u^2|^(m-1).
pub fn g_prime(u: f64, m: f64, theta: f64) -> f64 {
    let d = 1.0 - u * u;
    if d.abs() <= theta {
        0.0
    } else {
        -2.0 * m * u * d.signum() * pow_m(d.abs(), m - 1.0)
    }
}

#[inline]
fn pow_m(x: f64, m: f64) -> f64 {
    // the default exponent is hit constantly in the stepping hot path
    if m == 2.0 {
        x * x
    } else if m == 1.0 {
        x
    } else {
        x.powf(m)
    }
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    /// Interface-width parameter, > 0.
    pub epsilon: f64,
    /// Stabilizer exponent, >= 2.
    pub m: f64,
    /// Mobility scale, > 0.
    pub m0: f64,
    /// Stabilizer floor parameter, >= 0; 0 selects the degenerate model.
    pub theta: f64,
    pub potential: Potential,
    /// true: mu = -lap(u) + q'(u)/eps^2 (+ f_cl/eps); false: coefficients 1.
    pub scaled_form: bool,
    pub climb: Option<ClimbParams>,
    /// With theta = 0, reject fields whose min |1-u^2| falls below this.
    pub separation_floor: f64,
}

impl ModelParams {
    /// Quartic potential in scaled form, m = 2, M0 = 1, no climb coupling.
    pub fn standard(epsilon: f64, theta: f64) -> Self {
        Self {
            epsilon,
            m: 2.0,
            m0: 1.0,
            theta,
            potential: Potential::QUARTIC,
            scaled_form: true,
            climb: None,
            separation_floor: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.m >= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "m must be >= 2, got {}",
                self.m
            )));
        }
        if !(self.m0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "M0 must be > 0, got {}",
                self.m0
            )));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must be >= 0, got {}",
                self.theta
            )));
        }
        if let Some(cp) = &self.climb {
            cp.validate()?;
        }
        Ok(())
    }

    /// Coefficient of q'(u) in mu.
    pub fn c_q(&self) -> f64 {
        if self.scaled_form {
            1.0 / (self.epsilon * self.epsilon)
        } else {
            1.0
        }
    }

    /// Coefficient of the climb force in mu.
    pub fn c_f(&self) -> f64 {
        if self.scaled_form {
            1.0 / self.epsilon
        } else {
            1.0
        }
    }

    pub fn g(&self, u: f64) -> f64 {
        g_value(u, self.m, self.theta)
    }

    pub fn g_prime(&self, u: f64) -> f64 {
        g_prime(u, self.m, self.theta)
    }

    /// Mobility M_theta(u) = M0 g_theta(u); M_theta / g_theta is M0 identically.
    pub fn mobility(&self, u: f64) -> f64 {
        self.m0 * self.g(u)
    }

    fn climb_enabled(&self) -> bool {
        self.climb.as_ref().map_or(false, |cp| cp.enabled)
    }

    /// With theta = 0 the quotient mu/g is only defined away from u = +-1;
    /// reject fields that touch the singular set.
    pub fn check_separation(&self, u: &PeriodicField) -> Result<()> {
        if self.theta > 0.0 {
            return Ok(());
        }
        let min_dev = u
            .data()
            .iter()
            .map(|&v| (1.0 - v * v).abs())
            .fold(f64::INFINITY, f64::min);
        if min_dev < self.separation_floor {
            return Err(Error::DegenerateStabilizer {
                min_dev,
                floor: self.separation_floor,
            });
        }
        Ok(())
    }
}

/// mu = -lap(u) + c_q q'(u), plus c_f times the climb force when enabled.
pub fn chemical_potential(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
) -> Result<PeriodicField> {
    if !u.is_finite() {
        return Err(Error::NonFiniteField);
    }
    let mut mu = sp.laplacian(u)?;
    let cq = p.c_q();
    for (m, &v) in mu.data_mut().iter_mut().zip(u.data()) {
        *m = -*m + cq * p.potential.q_prime(v);
    }
    if p.climb_enabled() {
        let f = climb_force_spectral(sp, u, p.climb.as_ref().unwrap())?;
        let cf = p.c_f();
        for (m, &fv) in mu.data_mut().iter_mut().zip(f.data()) {
            *m += cf * fv;
        }
    }
    Ok(mu)
}

/// Conservative numerator div( M_theta(u) grad( mu / g_theta(u) ) ),
/// evaluated in the expanded form M0 [ lap(mu) - div( mu (g'/g) grad u ) ].
/// Exactly mean-free on the discrete grid (it is a spectral divergence).
pub fn flux_divergence(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
) -> Result<PeriodicField> {
    p.check_separation(u)?;
    let mu = chemical_potential(sp, u, p)?;
    let lap_mu = sp.laplacian(&mu)?;
    let grad_u = sp.gradient(u)?;

    // mu g'/g, then one dealiased product with each gradient component
    let mut ratio = mu.clone();
    for (r, &v) in ratio.data_mut().iter_mut().zip(u.data()) {
        *r *= p.g_prime(v) / p.g(v);
    }
    let flux: Vec<PeriodicField> = grad_u
        .iter()
        .map(|gi| sp.dealiased_product(&ratio, gi))
        .collect();
    let div_flux = sp.divergence(&flux)?;

    let mut out = lap_mu;
    for (o, &d) in out.data_mut().iter_mut().zip(div_flux.data()) {
        *o = p.m0 * (*o - d);
    }
    Ok(out)
}

/// Same quantity in quotient form: div( M_theta(u) grad( mu / g_theta(u) ) )
/// with the quotient formed pointwise. Agrees with [`flux_divergence`] to
/// truncation error on resolved fields.
pub fn flux_divergence_quotient(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
) -> Result<PeriodicField> {
    p.check_separation(u)?;
    let mut w = chemical_potential(sp, u, p)?;
    for (wv, &v) in w.data_mut().iter_mut().zip(u.data()) {
        *wv /= p.g(v);
    }
    let grad_w = sp.gradient(&w)?;
    let mut mob = u.clone();
    for mv in mob.data_mut() {
        *mv = p.mobility(*mv);
    }
    let flux: Vec<PeriodicField> = grad_w
        .iter()
        .map(|gi| sp.dealiased_product(&mob, gi))
        .collect();
    sp.divergence(&flux)
}

/// du/dt in expanded form: flux_divergence / g_theta(u), pointwise.
pub fn evolution_rhs(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
) -> Result<PeriodicField> {
    let mut out = flux_divergence(sp, u, p)?;
    for (o, &v) in out.data_mut().iter_mut().zip(u.data()) {
        *o /= p.g(v);
    }
    Ok(out)
}

/// du/dt in quotient form: flux_divergence_quotient / g_theta(u).
pub fn evolution_rhs_quotient(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
) -> Result<PeriodicField> {
    let mut out = flux_divergence_quotient(sp, u, p)?;
    for (o, &v) in out.data_mut().iter_mut().zip(u.data()) {
        *o /= p.g(v);
    }
    Ok(out)
}

/// Validation variant with the stabilizer forced to 1: reduces the dynamics
/// to the classical conserved flow du/dt = div( M0 grad mu ). Used to
/// cross-check the full right-hand side against an independent composition.
pub fn evolution_rhs_unit_stabilizer(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
) -> Result<PeriodicField> {
    let mu = chemical_potential(sp, u, p)?;
    let mut out = sp.laplacian(&mu)?;
    for o in out.data_mut() {
        *o *= p.m0;
    }
    Ok(out)
}

/// Antiderivative G_theta(v) = int_0^v g_theta(s) ds. Odd and strictly
/// increasing; the spatial integral of G_theta(u) is the conserved quantity
/// of the dynamics. Closed form for m = 2; Gauss-Legendre segment quadrature
/// otherwise (the integrand is smooth between the clamp boundaries).
pub fn g_antiderivative(v: f64, m: f64, theta: f64) -> f64 {
    let x = v.abs();
    let s = if v < 0.0 { -1.0 } else { 1.0 };
    // clamp band in |s|: [a, b], where |1 - s^2| <= theta
    let a = (1.0 - theta).max(0.0).sqrt();
    let b = (1.0 + theta).sqrt();
    if m == 2.0 {
        // int (1-s^2)^2 ds, valid on both sides of the wells for even power
        let p = |s: f64| s - 2.0 * s.powi(3) / 3.0 + s.powi(5) / 5.0;
        let g = if x <= a {
            p(x)
        } else if x <= b {
            p(a) + theta * theta * (x - a)
        } else {
            p(a) + theta * theta * (b - a) + p(x) - p(b)
        };
        return s * g;
    }
    let seg = |lo: f64, hi: f64| gauss_legendre_64(lo, hi, |t| (1.0 - t * t).abs().powf(m));
    let g = if x <= a {
        seg(0.0, x)
    } else if x <= b {
        seg(0.0, a) + theta.powf(m) * (x - a)
    } else {
        seg(0.0, a) + theta.powf(m) * (b - a) + seg(b, x)
    };
    s * g
}

/// Invert w = G_theta(u) pointwise by safeguarded Newton. Requires
/// theta > 0 (G' = g >= theta^m keeps the problem well conditioned).
/// `guess` seeds the iteration; pass the previous value in time loops.
pub fn g_antiderivative_inverse(w: f64, m: f64, theta: f64, guess: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(
            "stabilizer antiderivative inversion requires theta > 0".into(),
        ));
    }
    if !w.is_finite() {
        return Err(Error::NonFiniteField);
    }
    let gmin = pow_m(theta, m);
    // bracket: |u| <= |w|/theta^m always since G is steeper than gmin * u
    let half = (w.abs() / gmin).max(1.0) + 1.0;
    let (mut lo, mut hi) = (-half, half);
    let mut u = if guess.is_finite() && guess.abs() < half {
        guess
    } else {
        w / gmin.max(1.0)
    };
    for _ in 0..200 {
        let f = g_antiderivative(u, m, theta) - w;
        if f == 0.0 {
            // exact root; in particular a warm start at the solution
            // (zero increment) must be returned unchanged
            return Ok(u);
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let df = g_value(u, m, theta);
        let mut next = u - f / df;
        if next == u {
            return Ok(u);
        }
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - u).abs();
        u = next;
        if step <= 1e-15 * u.abs().max(1.0) {
            return Ok(u);
        }
    }
    Ok(u)
}

/// 64-node Gauss-Legendre quadrature on [lo, hi]; nodes generated by the
/// standard Newton iteration on the Legendre recurrence.
fn gauss_legendre_64(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const N: usize = 64;
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(N);
        for i in 0..N {
            // Chebyshev-like initial guess for the i-th root of P_N
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            for _ in 0..100 {
                // evaluate P_N and P_N' by upward recurrence
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=N {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=N {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
            t.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        t
    });
    let c = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = 0.0;
    for &(x, w) in table {
        acc += w * f(mid + c * x);
    }
    acc * c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PeriodicGrid;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn potential_values() {
        let q = Potential::QUARTIC;
        assert_eq!(q.q(1.0), 0.0);
        assert_eq!(q.q_prime(1.0), 0.0);
        assert_eq!(q.q(0.0), 1.0);
        assert_eq!(q.q_prime(0.0), 0.0);
        assert_eq!(q.q_second(0.0), -4.0);
        let s = Potential::SCALED_QUARTIC;
        assert_eq!(s.q(0.0), 0.25);
    }

    #[test]
    fn q_prime_matches_difference_quotient() {
        // centered differences converge at second order in h
        for pot in [Potential::QUARTIC, Potential::SCALED_QUARTIC] {
            for u in [-1.4, -0.7, 0.0, 0.3, 0.9, 1.2] {
                let mut errs = Vec::new();
                for &h in &[1e-3, 5e-4, 2.5e-4] {
                    let fd = (pot.q(u + h) - pot.q(u - h)) / (2.0 * h);
                    errs.push((fd - pot.q_prime(u)).abs());
                }
                let slope = (errs[0] / errs[2]).log2() / 2.0;
                if errs[2] > 1e-12 {
                    assert!(slope > 1.8, "slope {slope} at u={u}");
                }
            }
        }
    }

    #[test]
    fn stabilizer_values() {
        assert_eq!(g_value(0.0, 2.0, 0.5), 1.0);
        assert_eq!(g_value(0.0, 7.0, 0.5), 1.0);
        assert_abs_diff_eq!(g_value(1.0, 2.0, 0.01), 1e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(g_value(0.5, 2.0, 0.0), 0.5625, epsilon = 1e-15);
        // clamp boundary belongs to the clamp: derivative zero there
        // (u = 0.5 makes 1 - u^2 = 0.75 exact in binary)
        assert_eq!(g_prime(0.5, 2.0, 0.75), 0.0);
        assert_eq!(g_prime(1.0, 2.0, 0.1), 0.0);
        // outside the clamp, m=2: g' = -4u(1-u^2)
        assert_abs_diff_eq!(g_prime(0.5, 2.0, 0.1), -4.0 * 0.5 * 0.75, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn stabilizer_even_and_floored(u in -3.0f64..3.0, m in 2.0f64..5.0, theta in 0.0f64..0.5) {
            let g = g_value(u, m, theta);
            prop_assert!(g >= theta.powf(m) - 1e-15);
            prop_assert!((g - g_value(-u, m, theta)).abs() <= 1e-12 * g.max(1.0));
        }

        #[test]
        fn stabilizer_continuous_at_clamp(m in 2.0f64..4.0, theta in 0.01f64..0.5) {
            // approach the clamp boundary from outside
            let u_star = (1.0f64 - theta).sqrt();
            let eps = 1e-9;
            let outside = g_value(u_star - eps, m, theta);
            let clamp = theta.powf(m);
            prop_assert!((outside - clamp).abs() < 1e-6 * clamp.max(1e-12));
        }
    }

    #[test]
    fn mobility_examples() {
        let mut p = ModelParams::standard(1.0, 0.0);
        assert_eq!(p.mobility(0.0), 1.0);
        p.m0 = 2.0;
        p.theta = 0.1;
        assert_abs_diff_eq!(p.mobility(1.0), 0.02, epsilon = 1e-15);
        p.m0 = 1.0;
        p.theta = 0.0;
        assert_abs_diff_eq!(p.mobility(3.0), 64.0, epsilon = 1e-12);
    }

    #[test]
    fn chemical_potential_zero_cases() {
        let grid = PeriodicGrid::new(2, 16).unwrap();
        let mut sp = Spectral::new(grid);
        let p = ModelParams::standard(1.0, 0.1);
        for c in [0.0, 1.0] {
            let u = PeriodicField::constant(grid, c);
            let mu = chemical_potential(&mut sp, &u, &p).unwrap();
            assert!(mu.max_abs() < 1e-12, "mu not ~0 at u={c}");
        }
    }

    #[test]
    fn chemical_potential_pointwise_composition() {
        let grid = PeriodicGrid::new(1, 128).unwrap();
        let mut sp = Spectral::new(grid);
        let p = ModelParams::standard(0.7, 0.1);
        let u = PeriodicField::from_fn(grid, |x, _| 0.1 * x.cos());
        let mu = chemical_potential(&mut sp, &u, &p).unwrap();
        let cq = p.c_q();
        let expect = PeriodicField::from_fn(grid, |x, _| {
            let v = 0.1 * x.cos();
            0.1 * x.cos() + cq * p.potential.q_prime(v)
        });
        assert!(mu.dist_l2(&expect).unwrap() < 1e-10);
    }

    fn random_smooth(grid: PeriodicGrid, seed: u64, amp: f64) -> PeriodicField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64, f64, f64)> = (0..6)
            .map(|_| {
                (
                    rng.gen_range(-4..=4i32) as f64,
                    rng.gen_range(-4..=4i32) as f64,
                    rng.gen_range(0.0..std::f64::consts::TAU),
                    rng.gen_range(0.2..1.0),
                )
            })
            .collect();
        PeriodicField::from_fn(grid, |x, y| {
            amp * modes
                .iter()
                .map(|(kx, ky, ph, a)| a * (kx * x + ky * y + ph).cos())
                .sum::<f64>()
        })
    }

    #[test]
    fn rhs_zero_for_constants() {
        let grid = PeriodicGrid::new(2, 32).unwrap();
        let mut sp = Spectral::new(grid);
        let p = ModelParams::standard(0.5, 0.1);
        for c in [0.0, 0.3] {
            let u = PeriodicField::constant(grid, c);
            let r = evolution_rhs(&mut sp, &u, &p).unwrap();
            assert!(r.max_abs() < 1e-10, "rhs not ~0 at u={c}");
            let rq = evolution_rhs_quotient(&mut sp, &u, &p).unwrap();
            assert!(rq.max_abs() < 1e-10);
        }
    }

    #[test]
    fn rhs_forms_agree() {
        let grid = PeriodicGrid::new(2, 128).unwrap();
        let mut sp = Spectral::new(grid);
        let p = ModelParams::standard(0.8, 0.1);
        let u = random_smooth(grid, 7, 0.12);
        let a = evolution_rhs(&mut sp, &u, &p).unwrap();
        let b = evolution_rhs_quotient(&mut sp, &u, &p).unwrap();
        let rel = a.dist_l2(&b).unwrap() / b.norm_l2().max(1e-300);
        assert!(rel <= 1e-6, "form mismatch rel={rel:.3e}");
    }

    #[test]
    fn weighted_rhs_mean_free() {
        // sum of g(u) * rhs is the generator of the conservation law
        let grid = PeriodicGrid::new(2, 64).unwrap();
        let mut sp = Spectral::new(grid);
        let p = ModelParams::standard(0.6, 0.2);
        let u = random_smooth(grid, 11, 0.3);
        for rhs in [
            evolution_rhs(&mut sp, &u, &p).unwrap(),
            evolution_rhs_quotient(&mut sp, &u, &p).unwrap(),
        ] {
            let mut weighted = rhs.clone();
            for (w, &v) in weighted.data_mut().iter_mut().zip(u.data()) {
                *w *= p.g(v);
            }
            let scale: f64 = weighted.data().iter().map(|v| v.abs()).sum::<f64>()
                * grid.cell_volume()
                + 1e-300;
            assert!(
                (weighted.integrate() / scale).abs() <= 1e-10,
                "weighted mean {:.3e}",
                weighted.integrate() / scale
            );
        }
    }

    #[test]
    fn unit_stabilizer_matches_independent_composition() {
        let grid = PeriodicGrid::new(2, 64).unwrap();
        let mut sp = Spectral::new(grid);
        let mut p = ModelParams::standard(0.9, 0.1);
        p.m0 = 1.7;
        let u = random_smooth(grid, 3, 0.2);
        let fast = evolution_rhs_unit_stabilizer(&mut sp, &u, &p).unwrap();
        // independent path: div(M0 grad mu) assembled from first-order ops
        let mu = chemical_potential(&mut sp, &u, &p).unwrap();
        let mut grad = sp.gradient(&mu).unwrap();
        for gi in &mut grad {
            for v in gi.data_mut() {
                *v *= p.m0;
            }
        }
        let direct = sp.divergence(&grad).unwrap();
        let rel = fast.dist_l2(&direct).unwrap() / direct.norm_l2().max(1e-300);
        assert!(rel < 1e-11, "rel={rel:.3e}");
    }

    #[test]
    fn degenerate_floor_enforced() {
        let grid = PeriodicGrid::new(2, 16).unwrap();
        let mut sp = Spectral::new(grid);
        let p = ModelParams::standard(0.5, 0.0);
        let u = PeriodicField::constant(grid, 1.0);
        match evolution_rhs(&mut sp, &u, &p) {
            Err(Error::DegenerateStabilizer { .. }) => {}
            other => panic!("expected DegenerateStabilizer, got {other:?}"),
        }
        // separated field passes
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let u2 = PeriodicField::from_fn(grid, |_, _| rng.gen_range(-0.5..0.5));
        let _ = u2;
        let u3 = PeriodicField::from_fn(grid, |x, y| 0.4 * x.sin() * y.sin());
        assert!(evolution_rhs(&mut sp, &u3, &p).is_ok());
    }

    #[test]
    fn antiderivative_closed_form() {
        // theta = 0, m = 2: G(0.5) = 0.5 - 2/3*0.125 + 0.03125/5
        assert_abs_diff_eq!(
            g_antiderivative(0.5, 2.0, 0.0),
            0.5 - 2.0 * 0.125 / 3.0 + 0.03125 / 5.0,
            epsilon = 1e-15
        );
        // m = 3 through the quadrature path: int (1-s^2)^3 on [0, 0.5]
        let exact = 0.5 - 0.125 + 3.0 * 0.5f64.powi(5) / 5.0 - 0.5f64.powi(7) / 7.0;
        assert_abs_diff_eq!(g_antiderivative(0.5, 3.0, 0.0), exact, epsilon = 1e-13);
        // odd in u
        assert_eq!(
            g_antiderivative(0.7, 2.0, 0.1),
            -g_antiderivative(-0.7, 2.0, 0.1)
        );
    }

    proptest! {
        #[test]
        fn antiderivative_slope_is_stabilizer(
            u in -2.0f64..2.0, m in prop::sample::select(vec![2.0, 2.5, 3.0]), theta in 0.01f64..0.6
        ) {
            let h = 1e-5;
            let fd = (g_antiderivative(u + h, m, theta) - g_antiderivative(u - h, m, theta)) / (2.0 * h);
            let g = g_value(u, m, theta);
            prop_assert!((fd - g).abs() < 1e-7 * g.max(1.0), "fd={fd} g={g}");
        }

        #[test]
        fn antiderivative_inverse_roundtrip(
            u in -1.8f64..1.8, m in prop::sample::select(vec![2.0, 3.0]), theta in 0.02f64..0.5
        ) {
            let w = g_antiderivative(u, m, theta);
            let back = g_antiderivative_inverse(w, m, theta, 0.0).unwrap();
            prop_assert!((back - u).abs() <= 1e-10 * u.abs().max(1.0), "u={u} back={back}");
        }
    }

    #[test]
    fn params_validation() {
        let mut p = ModelParams::standard(0.1, 0.05);
        assert!(p.validate().is_ok());
        p.m = 1.5;
        assert!(p.validate().is_err());
        p.m = 2.0;
        p.epsilon = 0.0;
        assert!(p.validate().is_err());
    }
}
