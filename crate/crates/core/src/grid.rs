//! Uniform periodic grids on `[-L, L)^N` and their FFTs.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Sampled real function on the periodic box `[-L, L)^N`, `N` in {1, 2},
/// stored row-major with `n` points per axis.
#[derive(Clone, PartialEq)]
pub struct GridFunction {
    pub n_dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub values: Vec<f64>,
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "GridFunction(N={}, n={}, L={}, max|u|={:e})",
            self.n_dim,
            self.n,
            self.half_width,
            self.max_abs()
        )
    }
}

fn check_shape(n_dim: usize, n: usize, half_width: f64) -> Result<()> {
    if !(n_dim == 1 || n_dim == 2) {
        return Err(Error::InvalidInput(format!("N = {n_dim}, only 1 or 2 supported")));
    }
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!("n = {n} must be a power of two >= 8")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidInput(format!("L = {half_width} must be positive")));
    }
    Ok(())
}

impl GridFunction {
    pub fn new(n_dim: usize, n: usize, half_width: f64, values: Vec<f64>) -> Result<Self> {
        check_shape(n_dim, n, half_width)?;
        if values.len() != n.pow(n_dim as u32) {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                n.pow(n_dim as u32),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite grid values".into()));
        }
        Ok(Self {
            n_dim,
            n,
            half_width,
            values,
        })
    }

    pub fn zeros(n_dim: usize, n: usize, half_width: f64) -> Result<Self> {
        Self::new(n_dim, n, half_width, vec![0.0; n.pow(n_dim as u32)])
    }

    /// Samples `f` at every grid point; `f` receives the point coordinates.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(n_dim: usize, n: usize, half_width: f64, f: F) -> Result<Self> {
        check_shape(n_dim, n, half_width)?;
        let h = 2.0 * half_width / n as f64;
        let mut values = Vec::with_capacity(n.pow(n_dim as u32));
        if n_dim == 1 {
            for i in 0..n {
                values.push(f(&[-half_width + i as f64 * h]));
            }
        } else {
            for i in 0..n {
                let x = -half_width + i as f64 * h;
                for j in 0..n {
                    values.push(f(&[x, -half_width + j as f64 * h]));
                }
            }
        }
        Self::new(n_dim, n, half_width, values)
    }

    /// Grid with the same shape and new values (not re-validated).
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            n_dim: self.n_dim,
            n: self.n,
            half_width: self.half_width,
            values,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Volume element `h^N`.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.n_dim as i32)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinate of index `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Index of the grid point at the origin along one axis.
    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    /// Flat index of the origin.
    pub fn origin_flat(&self) -> usize {
        let o = self.origin_index();
        if self.n_dim == 1 {
            o
        } else {
            o * self.n + o
        }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.n_dim == other.n_dim && self.n == other.n && self.half_width == other.half_width
    }

    pub fn require_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(N={}, n={}, L={}) vs (N={}, n={}, L={})",
                self.n_dim, self.n, self.half_width, other.n_dim, other.n, other.half_width
            )))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Riemann sum of `|u|^p h^N`, raised to `1/p`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.cell()).powf(1.0 / p)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.require_same_grid(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.require_same_grid(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        self.require_same_grid(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }

    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.require_same_grid(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        ))
    }

    /// Periodic shift by whole grid cells: `result(x) = self(x - shift h)`.
    pub fn shifted(&self, shift: &[i64]) -> Result<Self> {
        if shift.len() != self.n_dim {
            return Err(Error::InvalidInput("shift length must equal N".into()));
        }
        let n = self.n as i64;
        let wrap = |i: i64| (((i % n) + n) % n) as usize;
        let mut out = vec![0.0; self.values.len()];
        if self.n_dim == 1 {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.values[wrap(i as i64 - shift[0])];
            }
        } else {
            for i in 0..self.n {
                let si = wrap(i as i64 - shift[0]);
                for j in 0..self.n {
                    out[i * self.n + j] = self.values[si * self.n + wrap(j as i64 - shift[1])];
                }
            }
        }
        Ok(self.with_values(out))
    }
}

/// Complex field on the same kind of grid, used for Laplace-domain outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub n_dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn from_real(u: &GridFunction) -> Self {
        Self {
            n_dim: u.n_dim,
            n: u.n,
            half_width: u.half_width,
            values: u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn re(&self) -> GridFunction {
        GridFunction {
            n_dim: self.n_dim,
            n: self.n,
            half_width: self.half_width,
            values: self.values.iter().map(|z| z.re).collect(),
        }
    }

    pub fn im(&self) -> GridFunction {
        GridFunction {
            n_dim: self.n_dim,
            n: self.n,
            half_width: self.half_width,
            values: self.values.iter().map(|z| z.im).collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let h = (2.0 * self.half_width / self.n as f64).powi(self.n_dim as i32);
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * h).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn sub(&self, other: &ComplexField) -> ComplexField {
        ComplexField {
            n_dim: self.n_dim,
            n: self.n,
            half_width: self.half_width,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Wavenumbers `pi k / L` in FFT order for `n` points on `[-L, L)`.
pub fn wavenumbers(n: usize, half_width: f64) -> Vec<f64> {
    let base = std::f64::consts::PI / half_width;
    (0..n)
        .map(|k| {
            let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            base * kk
        })
        .collect()
}

/// Forward/inverse FFT plans for one grid shape (1-D or 2-D).
#[derive(Clone)]
pub struct Spectral {
    pub n_dim: usize,
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Spectral(N={}, n={})", self.n_dim, self.n)
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

impl Spectral {
    pub fn new(n_dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_dim,
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.n_dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        plan.process(buf);
        if self.n_dim == 2 {
            transpose(buf, self.n);
            plan.process(buf);
            transpose(buf, self.n);
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(&self.fwd, buf);
    }

    /// Normalized inverse transform in place.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(&self.inv, buf);
        let s = 1.0 / self.len() as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }

    pub fn forward_real(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `|xi|` and the per-axis wavenumbers of every mode, in buffer order.
    pub fn mode_wavenumbers(&self, half_width: f64) -> Vec<[f64; 2]> {
        let k = wavenumbers(self.n, half_width);
        if self.n_dim == 1 {
            k.iter().map(|&a| [a, 0.0]).collect()
        } else {
            let mut out = Vec::with_capacity(self.len());
            for &a in &k {
                for &b in &k {
                    out.push([a, b]);
                }
            }
            out
        }
    }
}
