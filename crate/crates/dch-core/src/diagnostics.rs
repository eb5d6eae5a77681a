//! Energies, dissipation rate, and the conserved quantity.
//!
//! The bookkeeping rule: every energy here is the one whose variational
//! derivative is the chemical potential used by the dynamics, so the pairing
//! dE/dt = -D (or dF/dt = -D with climb coupling) holds without stray
//! constant factors.

use crate::climb::AppliedForce;
use crate::error::{Error, Result};
use crate::model::{self, ModelParams};
use crate::spectral::{PeriodicField, Spectral};

/// One diagnostics sample. `energy_f` equals `energy_e` when the climb
/// coupling is absent (the extra terms vanish identically).
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy_e: f64,
    pub energy_f: f64,
    pub dissipation_d: f64,
    pub conserved_g: f64,
    pub min_g: f64,
    pub max_abs_u: f64,
}

/// E(u) = int ( |grad u|^2 / 2 + c_q q(u) ) dx.
pub fn energy_e(sp: &mut Spectral, u: &PeriodicField, p: &ModelParams) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::NonFiniteField);
    }
    let grad = sp.gradient(u)?;
    let cq = p.c_q();
    let mut acc = 0.0;
    for (i, &v) in u.data().iter().enumerate() {
        let mut gsq = 0.0;
        for gi in &grad {
            gsq += gi.data()[i] * gi.data()[i];
        }
        acc += 0.5 * gsq + cq * p.potential.q(v);
    }
    Ok(acc * u.grid().cell_volume())
}

/// Squared half-order seminorm int |(-lap)^(1/4) u|^2 dx, evaluated as the
/// Parseval sum |Omega| * sum_k |k| |u_hat_k|^2.
pub fn fractional_seminorm_sq(sp: &mut Spectral, u: &PeriodicField) -> f64 {
    let s = sp.forward(u);
    let ksq = sp.ksq();
    let w = sp.parseval_weights();
    let mut acc = 0.0;
    for ((v, k2), wt) in s.data().iter().zip(&ksq).zip(&w) {
        acc += wt * k2.sqrt() * v.norm_sqr();
    }
    acc * u.grid().volume()
}

/// F(u) = E(u) + c_f [ (coefficient/2) int |(-lap)^(1/4) u|^2 + int u f_app ].
///
/// The variational derivative of the bracket is exactly the climb force, so
/// dF/dt = -D along climb trajectories. Errors when no climb coupling is
/// configured; without coupling the energy is just E.
pub fn energy_f(sp: &mut Spectral, u: &PeriodicField, p: &ModelParams) -> Result<f64> {
    let cp = match &p.climb {
        Some(cp) if cp.enabled => cp,
        _ => return Err(Error::ClimbDisabled),
    };
    let e = energy_e(sp, u, p)?;
    let frac = 0.5 * cp.coefficient * fractional_seminorm_sq(sp, u);
    let applied = match &cp.f_app {
        AppliedForce::Constant(c) => c * u.integrate(),
        AppliedForce::Field(f) => {
            if f.grid() != u.grid() {
                return Err(Error::GridMismatch(
                    "applied force on a different grid".into(),
                ));
            }
            u.data()
                .iter()
                .zip(f.data())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * u.grid().cell_volume()
        }
    };
    Ok(e + p.c_f() * (frac + applied))
}

/// D = int M_theta(u) |grad(mu / g_theta(u))|^2 dx >= 0, with mu including
/// the climb force whenever the coupling is enabled.
pub fn dissipation(sp: &mut Spectral, u: &PeriodicField, p: &ModelParams) -> Result<f64> {
    p.check_separation(u)?;
    let mut w = model::chemical_potential(sp, u, p)?;
    for (wv, &v) in w.data_mut().iter_mut().zip(u.data()) {
        *wv /= p.g(v);
    }
    let grad = sp.gradient(&w)?;
    let mut acc = 0.0;
    for (i, &v) in u.data().iter().enumerate() {
        let mut gsq = 0.0;
        for gi in &grad {
            gsq += gi.data()[i] * gi.data()[i];
        }
        acc += p.mobility(v) * gsq;
    }
    Ok(acc * u.grid().cell_volume())
}

/// Same quantity through the expanded gradient
/// grad(mu/g) = (grad mu - mu (g'/g) grad u) / g, so the weight becomes
/// (M0/g) |grad mu - mu (g'/g) grad u|^2. Agrees with [`dissipation`] to
/// truncation error; kept as an algebraic cross-check.
pub fn dissipation_expanded(sp: &mut Spectral, u: &PeriodicField, p: &ModelParams) -> Result<f64> {
    p.check_separation(u)?;
    let mu = model::chemical_potential(sp, u, p)?;
    let grad_mu = sp.gradient(&mu)?;
    let grad_u = sp.gradient(u)?;
    let mut acc = 0.0;
    for (i, &v) in u.data().iter().enumerate() {
        let ratio = mu.data()[i] * p.g_prime(v) / p.g(v);
        let mut gsq = 0.0;
        for (gm, gu) in grad_mu.iter().zip(&grad_u) {
            let c = gm.data()[i] - ratio * gu.data()[i];
            gsq += c * c;
        }
        acc += p.m0 / p.g(v) * gsq;
    }
    Ok(acc * u.grid().cell_volume())
}

/// Conserved quantity int G_theta(u) dx with G_theta the odd antiderivative
/// of the stabilizer.
pub fn conserved_g(u: &PeriodicField, p: &ModelParams) -> f64 {
    u.data()
        .iter()
        .map(|&v| model::g_antiderivative(v, p.m, p.theta))
        .sum::<f64>()
        * u.grid().cell_volume()
}

/// Assemble a full record at time `t`; `energy_f` falls back to `energy_e`
/// when the climb coupling is off.
pub fn record(
    sp: &mut Spectral,
    u: &PeriodicField,
    p: &ModelParams,
    t: f64,
) -> Result<DiagnosticsRecord> {
    let e = energy_e(sp, u, p)?;
    let f = match energy_f(sp, u, p) {
        Ok(f) => f,
        Err(Error::ClimbDisabled) => e,
        Err(other) => return Err(other),
    };
    let d = dissipation(sp, u, p)?;
    let min_g = u
        .data()
        .iter()
        .map(|&v| p.g(v))
        .fold(f64::INFINITY, f64::min);
    Ok(DiagnosticsRecord {
        t,
        energy_e: e,
        energy_f: f,
        dissipation_d: d,
        conserved_g: conserved_g(u, p),
        min_g,
        max_abs_u: u.max_abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::climb::ClimbParams;
    use crate::spectral::PeriodicGrid;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unscaled(theta: f64) -> ModelParams {
        let mut p = ModelParams::standard(1.0, theta);
        p.scaled_form = false;
        p
    }

    #[test]
    fn energy_e_examples() {
        let g2 = PeriodicGrid::new(2, 32).unwrap();
        let mut sp2 = Spectral::new(g2);
        let p = unscaled(0.1);

        let ones = PeriodicField::constant(g2, 1.0);
        assert_abs_diff_eq!(energy_e(&mut sp2, &ones, &p).unwrap(), 0.0, epsilon = 1e-13);

        let zeros = PeriodicField::constant(g2, 0.0);
        assert_abs_diff_eq!(
            energy_e(&mut sp2, &zeros, &p).unwrap(),
            4.0 * PI * PI,
            epsilon = 1e-10
        );

        let g1 = PeriodicGrid::new(1, 64).unwrap();
        let mut sp1 = Spectral::new(g1);
        let u = PeriodicField::from_fn(g1, |x, _| x.sin());
        assert_abs_diff_eq!(
            energy_e(&mut sp1, &u, &p).unwrap(),
            PI / 2.0 + 3.0 * PI / 4.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn scaled_form_weights_q() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        let mut sp = Spectral::new(g);
        let p = ModelParams::standard(0.5, 0.1);
        let zeros = PeriodicField::constant(g, 0.0);
        // q(0) = 1 weighted by 1/eps^2 = 4 over |Omega| = 2 pi
        assert_abs_diff_eq!(
            energy_e(&mut sp, &zeros, &p).unwrap(),
            4.0 * 2.0 * PI,
            epsilon = 1e-10
        );
    }

    #[test]
    fn fractional_seminorm_single_mode() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let mut sp = Spectral::new(g);
        let u = PeriodicField::from_fn(g, |x, _| x.cos());
        assert_abs_diff_eq!(fractional_seminorm_sq(&mut sp, &u), PI, epsilon = 1e-12);
        // constants carry no seminorm
        let c = PeriodicField::constant(g, 3.0);
        assert_abs_diff_eq!(fractional_seminorm_sq(&mut sp, &c), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn energy_f_reduces_and_bounds() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let mut sp = Spectral::new(g);
        let mut p = unscaled(0.1);
        let u = PeriodicField::from_fn(g, |x, y| 0.4 * x.sin() + 0.2 * (y * 2.0).cos());

        assert!(matches!(
            energy_f(&mut sp, &u, &p),
            Err(Error::ClimbDisabled)
        ));

        p.climb = Some(ClimbParams::default());
        let e = energy_e(&mut sp, &u, &p).unwrap();
        let f = energy_f(&mut sp, &u, &p).unwrap();
        assert!(f >= e, "fractional part must be nonnegative");

        // u = 1 has zero seminorm and zero q
        let ones = PeriodicField::constant(g, 1.0);
        assert_abs_diff_eq!(energy_f(&mut sp, &ones, &p).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_f_variational_pairing() {
        // directional derivative of F matches <mu, v> for mean-free v
        let g = PeriodicGrid::new(2, 48).unwrap();
        let mut sp = Spectral::new(g);
        let mut p = ModelParams::standard(0.7, 0.1);
        p.climb = Some(ClimbParams::default());
        let u = PeriodicField::from_fn(g, |x, y| 0.3 * x.sin() * y.cos());
        let v = PeriodicField::from_fn(g, |x, y| (2.0 * x).cos() * y.sin());
        let mu = model::chemical_potential(&mut sp, &u, &p).unwrap();
        let pairing: f64 = mu
            .data()
            .iter()
            .zip(v.data())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * g.cell_volume();
        let h = 1e-6;
        let mut up = u.clone();
        let mut um = u.clone();
        for ((pv, mv), &vv) in up
            .data_mut()
            .iter_mut()
            .zip(um.data_mut())
            .zip(v.data())
        {
            *pv += h * vv;
            *mv -= h * vv;
        }
        let fd = (energy_f(&mut sp, &up, &p).unwrap() - energy_f(&mut sp, &um, &p).unwrap())
            / (2.0 * h);
        assert_abs_diff_eq!(fd, pairing, epsilon = 1e-5 * pairing.abs().max(1.0));
    }

    #[test]
    fn dissipation_zero_for_constant_and_nonnegative() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let mut sp = Spectral::new(g);
        let p = ModelParams::standard(0.6, 0.2);
        let c = PeriodicField::constant(g, 0.4);
        assert_abs_diff_eq!(dissipation(&mut sp, &c, &p).unwrap(), 0.0, epsilon = 1e-12);
        let u = PeriodicField::from_fn(g, |x, y| 0.5 * x.sin() + 0.3 * (x + y).cos());
        assert!(dissipation(&mut sp, &u, &p).unwrap() >= 0.0);
    }

    #[test]
    fn dissipation_forms_agree() {
        let g = PeriodicGrid::new(2, 128).unwrap();
        let mut sp = Spectral::new(g);
        let p = ModelParams::standard(0.8, 0.15);
        let u = PeriodicField::from_fn(g, |x, y| {
            0.2 * x.sin() + 0.15 * (x + 2.0 * y).cos() + 0.1 * (3.0 * y).sin()
        });
        let a = dissipation(&mut sp, &u, &p).unwrap();
        let b = dissipation_expanded(&mut sp, &u, &p).unwrap();
        let rel = (a - b).abs() / b.abs().max(1e-300);
        assert!(rel <= 1e-6, "dissipation forms rel={rel:.3e}");
    }

    #[test]
    fn conserved_g_examples() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let mut p = ModelParams::standard(1.0, 0.0);
        p.scaled_form = false;
        let zero = PeriodicField::constant(g, 0.0);
        assert_eq!(conserved_g(&zero, &p), 0.0);

        let half = PeriodicField::constant(g, 0.5);
        let gv = 0.5 - 2.0 * 0.125 / 3.0 + 0.03125 / 5.0;
        assert_abs_diff_eq!(
            conserved_g(&half, &p),
            4.0 * PI * PI * gv,
            epsilon = 1e-10
        );

        // odd under u -> -u
        let u = PeriodicField::from_fn(g, |x, y| 0.3 * x.sin() + 0.1 * y.cos());
        let mut nu = u.clone();
        for v in nu.data_mut() {
            *v = -*v;
        }
        assert_abs_diff_eq!(conserved_g(&u, &p), -conserved_g(&nu, &p), epsilon = 1e-12);
    }

    #[test]
    fn record_fields_consistent() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let mut sp = Spectral::new(g);
        let p = ModelParams::standard(0.5, 0.2);
        let u = PeriodicField::from_fn(g, |x, y| 0.2 * x.sin() * y.sin());
        let r = record(&mut sp, &u, &p, 1.5).unwrap();
        assert_eq!(r.t, 1.5);
        assert_eq!(r.energy_f, r.energy_e); // no climb coupling
        assert!(r.dissipation_d >= 0.0);
        assert!(r.min_g >= 0.2f64.powi(2) - 1e-15);
        assert!(r.max_abs_u <= 0.21);
    }
}
