//! Fourier backend on the periodic box `[0, 2pi]^d`, d = 1 or 2.
//!
//! Wavenumbers per axis are the integers `-N/2 .. N/2-1`. Transforms use
//! real-to-complex symmetry: the stored spectrum keeps the non-negative
//! half of the innermost axis (`N/2 + 1` coefficients). Forward transforms
//! are normalized by `1/N^d`, so the zero mode equals the field mean.
//!
//! Conventions:
//! - first derivatives zero the Nyquist coefficient (its sign is not
//!   representable); the Laplacian and the fractional Laplacian keep it,
//! - `fractional_laplacian(f, s)` multiplies mode `xi` by `(|xi|^2)^s`,
//!   so `s = 1` reproduces `-laplacian` exactly,
//! - products of fields are formed pointwise in physical space; the 2/3
//!   truncation used during time stepping lives in [`Spectral::dealias`].

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, 2pi]^dim`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeriodicGrid({}d, {} per axis)", self.dim, self.n)
    }
}

impl PeriodicGrid {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDim(dim));
        }
        if points_per_axis < 4 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "points_per_axis must be even and >= 4, got {points_per_axis}"
            )));
        }
        Ok(Self {
            dim,
            n: points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `2pi/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n as f64
    }

    /// Quadrature weight of one grid cell, `spacing^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Domain volume `(2pi)^dim`.
    pub fn volume(&self) -> f64 {
        (2.0 * std::f64::consts::PI).powi(self.dim as i32)
    }

    /// Coordinates of the grid point with row-major index `idx`.
    /// In 2D the layout is `data[i*n + j]` for the point `(i*h, j*h)`.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            1 => [idx as f64 * h, 0.0],
            _ => [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h],
        }
    }
}

/// Real scalar field sampled on a [`PeriodicGrid`].
#[derive(Clone, PartialEq)]
pub struct PeriodicField {
    grid: PeriodicGrid,
    data: Vec<f64>,
}

impl fmt::Debug for PeriodicField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeriodicField({:?})", self.grid)
    }
}

impl PeriodicField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self {
            grid,
            data: vec![c; grid.len()],
        }
    }

    /// Sample `f(x, y)` at grid points (`y = 0` in 1D).
    pub fn from_fn(grid: PeriodicGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let [x, y] = grid.coords(idx);
            data.push(f(x, y));
        }
        Self { grid, data }
    }

    pub fn from_data(grid: PeriodicGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "data length {} does not match grid size {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Grid-sum quadrature of the field over the box.
    pub fn integrate(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// L2 norm over the box (quadrature-weighted).
    pub fn norm_l2(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// L2 distance to another field on the same grid.
    pub fn dist_l2(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("dist_l2 on different grids".into()));
        }
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }
}

/// Half-complex spectrum of a real field.
///
/// 2D layout: `n` rows (full axis 0) by `n/2 + 1` columns (non-negative
/// half of axis 1), row-major. 1D: `n/2 + 1` entries.
#[derive(Clone)]
pub struct Spectrum {
    grid: PeriodicGrid,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        let nc = grid.n() / 2 + 1;
        let len = match grid.dim() {
            1 => nc,
            _ => grid.n() * nc,
        };
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Zero mode (the field mean).
    pub fn mean_mode(&self) -> Complex64 {
        self.data[0]
    }
}

/// FFT plans, wavenumber tables, and scratch space for one grid.
///
/// Methods take `&mut self` only to reuse internal scratch; results never
/// depend on prior calls.
pub struct Spectral {
    grid: PeriodicGrid,
    nc: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    // signed integer wavenumber along axis 0 (full), axis 1 (half)
    k0: Vec<f64>,
    k1: Vec<f64>,
    // derivative multipliers: Nyquist zeroed
    k0d: Vec<f64>,
    k1d: Vec<f64>,
    scratch_real: Vec<f64>,
    scratch_col: Vec<Complex64>,
    scratch_fft: Vec<Complex64>,
    scratch_half: Vec<Complex64>,
}

impl Spectral {
    pub fn new(grid: PeriodicGrid) -> Self {
        let n = grid.n();
        let nc = n / 2 + 1;
        let mut rp = RealFftPlanner::<f64>::new();
        let r2c = rp.plan_fft_forward(n);
        let c2r = rp.plan_fft_inverse(n);
        let mut cp = FftPlanner::<f64>::new();
        let col_fwd = cp.plan_fft_forward(n);
        let col_inv = cp.plan_fft_inverse(n);

        let k0: Vec<f64> = (0..n)
            .map(|i| {
                if i <= n / 2 - 1 {
                    i as f64
                } else {
                    i as f64 - n as f64
                }
            })
            .collect();
        let k1: Vec<f64> = (0..nc).map(|j| j as f64).collect();
        let mut k0d = k0.clone();
        k0d[n / 2] = 0.0; // Nyquist of the full axis
        let mut k1d = k1.clone();
        k1d[nc - 1] = 0.0; // Nyquist of the half axis

        let fft_scratch = col_fwd
            .get_inplace_scratch_len()
            .max(col_inv.get_inplace_scratch_len());
        Self {
            grid,
            nc,
            r2c,
            c2r,
            col_fwd,
            col_inv,
            k0,
            k1,
            k0d,
            k1d,
            scratch_real: vec![0.0; n],
            scratch_col: vec![Complex64::new(0.0, 0.0); n],
            scratch_fft: vec![Complex64::new(0.0, 0.0); fft_scratch.max(1)],
            scratch_half: vec![Complex64::new(0.0, 0.0); nc],
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Forward transform, normalized so the zero mode is the mean.
    pub fn forward(&mut self, f: &PeriodicField) -> Spectrum {
        let mut out = Spectrum::zeros(self.grid);
        self.forward_into(f, &mut out);
        out
    }

    pub fn forward_into(&mut self, f: &PeriodicField, out: &mut Spectrum) {
        debug_assert_eq!(f.grid(), self.grid);
        let n = self.grid.n();
        let nc = self.nc;
        let norm = 1.0 / self.grid.len() as f64;
        match self.grid.dim() {
            1 => {
                self.scratch_real.copy_from_slice(f.data());
                self.r2c
                    .process(&mut self.scratch_real, out.data_mut())
                    .expect("r2c length mismatch");
            }
            _ => {
                // rows: r2c along contiguous axis 1
                for i in 0..n {
                    self.scratch_real
                        .copy_from_slice(&f.data()[i * n..(i + 1) * n]);
                    self.r2c
                        .process(
                            &mut self.scratch_real,
                            &mut out.data_mut()[i * nc..(i + 1) * nc],
                        )
                        .expect("r2c length mismatch");
                }
                // columns: c2c along axis 0
                for j in 0..nc {
                    for i in 0..n {
                        self.scratch_col[i] = out.data()[i * nc + j];
                    }
                    self.col_fwd
                        .process_with_scratch(&mut self.scratch_col, &mut self.scratch_fft);
                    for i in 0..n {
                        out.data_mut()[i * nc + j] = self.scratch_col[i];
                    }
                }
            }
        }
        for v in out.data_mut() {
            *v *= norm;
        }
    }

    /// Inverse transform. The input spectrum is left untouched.
    pub fn inverse(&mut self, s: &Spectrum) -> PeriodicField {
        let mut out = PeriodicField::zeros(self.grid);
        self.inverse_into(s, &mut out);
        out
    }

    pub fn inverse_into(&mut self, s: &Spectrum, out: &mut PeriodicField) {
        debug_assert_eq!(s.grid(), self.grid);
        let n = self.grid.n();
        let nc = self.nc;
        match self.grid.dim() {
            1 => {
                self.scratch_half.copy_from_slice(s.data());
                // c2r ignores the imaginary parts of the DC and Nyquist bins
                self.scratch_half[0].im = 0.0;
                self.scratch_half[nc - 1].im = 0.0;
                self.c2r
                    .process(&mut self.scratch_half, out.data_mut())
                    .expect("c2r length mismatch");
            }
            _ => {
                let mut tmp = std::mem::take(&mut self.scratch_col);
                let mut work: Vec<Complex64> = s.data().to_vec();
                // columns: inverse c2c along axis 0 (unnormalized)
                for j in 0..nc {
                    for i in 0..n {
                        tmp[i] = work[i * nc + j];
                    }
                    self.col_inv
                        .process_with_scratch(&mut tmp, &mut self.scratch_fft);
                    for i in 0..n {
                        work[i * nc + j] = tmp[i];
                    }
                }
                self.scratch_col = tmp;
                // rows: c2r along axis 1 (unnormalized)
                for i in 0..n {
                    self.scratch_half.copy_from_slice(&work[i * nc..(i + 1) * nc]);
                    self.scratch_half[0].im = 0.0;
                    self.scratch_half[nc - 1].im = 0.0;
                    self.c2r
                        .process(
                            &mut self.scratch_half,
                            &mut out.data_mut()[i * n..(i + 1) * n],
                        )
                        .expect("c2r length mismatch");
                }
            }
        }
    }

    /// Apply a real multiplier `m(k0, k1)` in place; `deriv` selects the
    /// Nyquist-zeroed tables used for odd (first-derivative) symbols.
    fn apply_multiplier(&self, s: &mut Spectrum, deriv: bool, m: impl Fn(f64, f64) -> f64) {
        let (ka, kb) = if deriv {
            (&self.k0d, &self.k1d)
        } else {
            (&self.k0, &self.k1)
        };
        match self.grid.dim() {
            1 => {
                for (j, v) in s.data_mut().iter_mut().enumerate() {
                    *v *= m(0.0, kb[j]);
                }
            }
            _ => {
                let nc = self.nc;
                for i in 0..self.grid.n() {
                    let k0 = ka[i];
                    for j in 0..nc {
                        s.data_mut()[i * nc + j] *= m(k0, kb[j]);
                    }
                }
            }
        }
    }

    /// Multiply by `i * k_axis` (first derivative along one axis).
    fn apply_ik(&self, s: &mut Spectrum, axis: usize) {
        let nc = self.nc;
        match (self.grid.dim(), axis) {
            (1, _) => {
                for (j, v) in s.data_mut().iter_mut().enumerate() {
                    let k = self.k1d[j];
                    *v = Complex64::new(-v.im * k, v.re * k);
                }
            }
            (_, 0) => {
                for i in 0..self.grid.n() {
                    let k = self.k0d[i];
                    for v in &mut s.data_mut()[i * nc..(i + 1) * nc] {
                        *v = Complex64::new(-v.im * k, v.re * k);
                    }
                }
            }
            _ => {
                for i in 0..self.grid.n() {
                    for j in 0..nc {
                        let k = self.k1d[j];
                        let v = &mut s.data_mut()[i * nc + j];
                        *v = Complex64::new(-v.im * k, v.re * k);
                    }
                }
            }
        }
    }

    /// Spectral gradient; one component per dimension.
    pub fn gradient(&mut self, f: &PeriodicField) -> Result<Vec<PeriodicField>> {
        if !f.is_finite() {
            return Err(Error::NonFiniteField);
        }
        let base = self.forward(f);
        let mut out = Vec::with_capacity(self.grid.dim());
        for axis in 0..self.grid.dim() {
            let mut s = base.clone();
            // in 1D the single axis is the half axis
            let ax = if self.grid.dim() == 1 { 1 } else { axis };
            self.apply_ik(&mut s, ax);
            out.push(self.inverse(&s));
        }
        Ok(out)
    }

    /// Spectral divergence of a `dim`-component vector field.
    pub fn divergence(&mut self, v: &[PeriodicField]) -> Result<PeriodicField> {
        if v.len() != self.grid.dim() {
            return Err(Error::GridMismatch(format!(
                "divergence expects {} components, got {}",
                self.grid.dim(),
                v.len()
            )));
        }
        let mut acc = Spectrum::zeros(self.grid);
        for (axis, comp) in v.iter().enumerate() {
            if !comp.is_finite() {
                return Err(Error::NonFiniteField);
            }
            let mut s = self.forward(comp);
            let ax = if self.grid.dim() == 1 { 1 } else { axis };
            self.apply_ik(&mut s, ax);
            for (a, b) in acc.data_mut().iter_mut().zip(s.data()) {
                *a += b;
            }
        }
        Ok(self.inverse(&acc))
    }

    /// Spectral Laplacian, symbol `-|k|^2`.
    pub fn laplacian(&mut self, f: &PeriodicField) -> Result<PeriodicField> {
        if !f.is_finite() {
            return Err(Error::NonFiniteField);
        }
        let mut s = self.forward(f);
        self.apply_multiplier(&mut s, false, |a, b| -(a * a + b * b));
        Ok(self.inverse(&s))
    }

    /// Fractional Laplacian `(-Delta)^s`, symbol `(|k|^2)^s`, `s` in `(0, 1]`.
    /// The zero mode maps to zero. `s = 1` equals `-laplacian` to round-off.
    pub fn fractional_laplacian(&mut self, f: &PeriodicField, s: f64) -> Result<PeriodicField> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::FractionalExponent(s));
        }
        if !f.is_finite() {
            return Err(Error::NonFiniteField);
        }
        let mut sp = self.forward(f);
        self.apply_multiplier(&mut sp, false, |a, b| {
            let k2 = a * a + b * b;
            if k2 == 0.0 {
                0.0
            } else {
                k2.powf(s)
            }
        });
        Ok(self.inverse(&sp))
    }

    /// Zero all modes with any `|k_axis| > N/3` (2/3-rule truncation).
    pub fn dealias(&self, s: &mut Spectrum) {
        let cut = (self.grid.n() / 3) as f64;
        self.apply_multiplier(s, false, |a, b| {
            if a.abs() > cut || b.abs() > cut {
                0.0
            } else {
                1.0
            }
        });
    }

    /// Pointwise product with 2/3 dealiasing of the result.
    pub fn dealiased_product(&mut self, a: &PeriodicField, b: &PeriodicField) -> PeriodicField {
        let mut p = a.clone();
        for (x, y) in p.data_mut().iter_mut().zip(b.data()) {
            *x *= y;
        }
        let mut s = self.forward(&p);
        self.dealias(&mut s);
        self.inverse(&s)
    }

    /// Squared wavenumber `|k|^2` table matching the spectrum layout.
    pub fn ksq(&self) -> Vec<f64> {
        match self.grid.dim() {
            1 => self.k1.iter().map(|k| k * k).collect(),
            _ => {
                let mut t = Vec::with_capacity(self.grid.n() * self.nc);
                for i in 0..self.grid.n() {
                    for j in 0..self.nc {
                        t.push(self.k0[i] * self.k0[i] + self.k1[j] * self.k1[j]);
                    }
                }
                t
            }
        }
    }

    /// Dealias mask (1.0 keep / 0.0 drop) matching the spectrum layout.
    pub fn dealias_mask(&self) -> Vec<f64> {
        let cut = (self.grid.n() / 3) as f64;
        let keep = |a: f64, b: f64| -> f64 {
            if a.abs() > cut || b.abs() > cut {
                0.0
            } else {
                1.0
            }
        };
        match self.grid.dim() {
            1 => self.k1.iter().map(|&k| keep(0.0, k)).collect(),
            _ => {
                let mut t = Vec::with_capacity(self.grid.n() * self.nc);
                for i in 0..self.grid.n() {
                    for j in 0..self.nc {
                        t.push(keep(self.k0[i], self.k1[j]));
                    }
                }
                t
            }
        }
    }

    /// First-derivative multiplier along `axis` (Nyquist zeroed), matching
    /// the spectrum layout; the derivative symbol is `i * k_axis`.
    pub fn kderiv(&self, axis: usize) -> Vec<f64> {
        match (self.grid.dim(), axis) {
            (1, _) => self.k1d.clone(),
            (_, 0) => {
                let mut t = Vec::with_capacity(self.grid.n() * self.nc);
                for i in 0..self.grid.n() {
                    for _ in 0..self.nc {
                        t.push(self.k0d[i]);
                    }
                }
                t
            }
            _ => {
                let mut t = Vec::with_capacity(self.grid.n() * self.nc);
                for _ in 0..self.grid.n() {
                    for j in 0..self.nc {
                        t.push(self.k1d[j]);
                    }
                }
                t
            }
        }
    }

    /// Weight of each stored half-spectrum bin in a Parseval sum: 1 for
    /// self-conjugate columns (k1 = 0 and k1 = N/2), 2 otherwise.
    pub fn parseval_weights(&self) -> Vec<f64> {
        let w = |j: usize| -> f64 {
            if j == 0 || j == self.nc - 1 {
                1.0
            } else {
                2.0
            }
        };
        match self.grid.dim() {
            1 => (0..self.nc).map(w).collect(),
            _ => {
                let mut t = Vec::with_capacity(self.grid.n() * self.nc);
                for _ in 0..self.grid.n() {
                    for j in 0..self.nc {
                        t.push(w(j));
                    }
                }
                t
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn roundtrip_2d() {
        let grid = PeriodicGrid::new(2, 32).unwrap();
        let mut sp = Spectral::new(grid);
        let f = PeriodicField::from_fn(grid, |x, y| (x.sin() + 0.3 * (2.0 * y).cos()).exp());
        let s = sp.forward(&f);
        let g = sp.inverse(&s);
        for (a, b) in f.data().iter().zip(g.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn mean_mode_is_mean() {
        let grid = PeriodicGrid::new(2, 16).unwrap();
        let mut sp = Spectral::new(grid);
        let f = PeriodicField::from_fn(grid, |x, y| 2.5 + x.sin() * y.cos());
        let s = sp.forward(&f);
        assert_abs_diff_eq!(s.mean_mode().re, 2.5, epsilon = 1e-13);
        assert_abs_diff_eq!(s.mean_mode().im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_single_mode() {
        let grid = PeriodicGrid::new(2, 64).unwrap();
        let mut sp = Spectral::new(grid);
        let f = PeriodicField::from_fn(grid, |x, y| (2.0 * x + 3.0 * y).cos());
        let g = sp.gradient(&f).unwrap();
        let gx = PeriodicField::from_fn(grid, |x, y| -2.0 * (2.0 * x + 3.0 * y).sin());
        let gy = PeriodicField::from_fn(grid, |x, y| -3.0 * (2.0 * x + 3.0 * y).sin());
        assert!(g[0].dist_l2(&gx).unwrap() < 1e-12);
        assert!(g[1].dist_l2(&gy).unwrap() < 1e-12);
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let grid = PeriodicGrid::new(2, 32).unwrap();
        let mut sp = Spectral::new(grid);
        let f = PeriodicField::from_fn(grid, |x, y| x.sin() * y.sin() + (2.0 * x).cos());
        let g = sp.gradient(&f).unwrap();
        let div = sp.divergence(&g).unwrap();
        let lap = sp.laplacian(&f).unwrap();
        assert!(div.dist_l2(&lap).unwrap() < 1e-12);
    }

    #[test]
    fn fractional_symbol() {
        let grid = PeriodicGrid::new(2, 64).unwrap();
        let mut sp = Spectral::new(grid);
        let f = PeriodicField::from_fn(grid, |x, y| (2.0 * x + 3.0 * y).cos());
        let half = sp.fractional_laplacian(&f, 0.5).unwrap();
        let expect = PeriodicField::from_fn(grid, |x, y| 13.0f64.sqrt() * (2.0 * x + 3.0 * y).cos());
        assert!(half.dist_l2(&expect).unwrap() < 1e-12);
        // s = 1 equals -laplacian
        let one = sp.fractional_laplacian(&f, 1.0).unwrap();
        let mut lap = sp.laplacian(&f).unwrap();
        for v in lap.data_mut() {
            *v = -*v;
        }
        assert!(one.dist_l2(&lap).unwrap() < 1e-12);
    }

    #[test]
    fn fractional_rejects_bad_exponent() {
        let grid = PeriodicGrid::new(1, 16).unwrap();
        let mut sp = Spectral::new(grid);
        let f = PeriodicField::constant(grid, 1.0);
        assert!(sp.fractional_laplacian(&f, 0.0).is_err());
        assert!(sp.fractional_laplacian(&f, 1.5).is_err());
    }

    #[test]
    fn one_dimensional_ops() {
        let grid = PeriodicGrid::new(1, 64).unwrap();
        let mut sp = Spectral::new(grid);
        let f = PeriodicField::from_fn(grid, |x, _| x.sin());
        let g = sp.gradient(&f).unwrap();
        let expect = PeriodicField::from_fn(grid, |x, _| x.cos());
        assert!(g[0].dist_l2(&expect).unwrap() < 1e-12);
        let lap = sp.laplacian(&f).unwrap();
        let expect2 = PeriodicField::from_fn(grid, |x, _| -x.sin());
        assert!(lap.dist_l2(&expect2).unwrap() < 1e-12);
    }

    #[test]
    fn dealias_drops_high_modes() {
        let grid = PeriodicGrid::new(1, 32).unwrap();
        let mut sp = Spectral::new(grid);
        // k = 12 > 32/3 = 10.67 is dropped; k = 9 survives
        let f = PeriodicField::from_fn(grid, |x, _| (12.0 * x).cos() + (9.0 * x).cos());
        let mut s = sp.forward(&f);
        sp.dealias(&mut s);
        let g = sp.inverse(&s);
        let expect = PeriodicField::from_fn(grid, |x, _| (9.0 * x).cos());
        assert!(g.dist_l2(&expect).unwrap() < 1e-12);
    }
}
