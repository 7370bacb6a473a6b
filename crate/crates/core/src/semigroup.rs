//! Fourier-multiplier realization of `S_mu(t) = exp(-t A0^mu)` on the torus
//! `[-L, L)^N`, kernels, self-similar profiles, subordination at `mu = 1/2`
//! and the Laplace-transform pseudoresolvent.

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::fixtures::dirac;
use crate::grid::{ComplexField, GridFunction, Spectral};
use crate::scale_index::ProblemDims;

/// Constant-coefficient operator `A0 = sum_{|zeta| = 2m} a_zeta D^zeta`, `D = -i d`.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolSpec {
    /// `(-Laplacian)^m`, symbol `|xi|^{2m}`.
    LaplacianPower { m: u32 },
    /// Real coefficients keyed by multi-index (second entry ignored in 1D).
    Coefficients { m: u32, table: Vec<([u32; 2], f64)> },
}

impl SymbolSpec {
    pub fn order(&self) -> u32 {
        match self {
            Self::LaplacianPower { m } | Self::Coefficients { m, .. } => *m,
        }
    }

    fn eval(&self, xi: [f64; 2]) -> f64 {
        match self {
            Self::LaplacianPower { m } => (xi[0] * xi[0] + xi[1] * xi[1]).powi(*m as i32),
            // (-i d)^zeta e^{i x xi} = xi^zeta e^{i x xi}
            Self::Coefficients { table, .. } => table
                .iter()
                .map(|(z, a)| a * xi[0].powi(z[0] as i32) * xi[1].powi(z[1] as i32))
                .sum(),
        }
    }
}

/// `S_mu(t)` on one grid: FFT plans plus the tabulated `a(xi)^mu`.
#[derive(Debug, Clone)]
pub struct Semigroup {
    pub dims: ProblemDims,
    pub n: usize,
    pub half_width: f64,
    pub spec: SymbolSpec,
    pub c_ell: f64,
    spectral: Spectral,
    symbol: Vec<f64>,
    power: Vec<f64>,
}

impl Semigroup {
    pub fn new(dims: ProblemDims, n: usize, half_width: f64, spec: SymbolSpec) -> Result<Self> {
        // validates the grid shape
        GridFunction::zeros(dims.n_dim, n, half_width)?;
        if spec.order() != dims.m {
            return Err(Error::InvalidInput(format!(
                "symbol order {} differs from m = {}",
                spec.order(),
                dims.m
            )));
        }
        if let SymbolSpec::Coefficients { m, table } = &spec {
            for (z, a) in table {
                let deg = if dims.n_dim == 1 { z[0] } else { z[0] + z[1] };
                if deg != 2 * m || (dims.n_dim == 1 && z[1] != 0) || !a.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "coefficient {z:?} is not of order 2m = {} in N = {}",
                        2 * m,
                        dims.n_dim
                    )));
                }
            }
        }
        let spectral = Spectral::new(dims.n_dim, n);
        let modes = spectral.mode_wavenumbers(half_width);
        let symbol: Vec<f64> = modes.iter().map(|&xi| spec.eval(xi)).collect();
        let mut c_ell = f64::INFINITY;
        for (xi, a) in modes.iter().zip(&symbol) {
            let r2 = xi[0] * xi[0] + xi[1] * xi[1];
            if r2 > 0.0 {
                c_ell = c_ell.min(a / r2.powi(dims.m as i32));
            }
        }
        if !(c_ell > 0.0) {
            return Err(Error::InvalidInput(format!(
                "symbol not uniformly elliptic on the grid (c_ell = {c_ell})"
            )));
        }
        let power = symbol.iter().map(|a| a.max(0.0).powf(dims.mu)).collect();
        Ok(Self {
            dims,
            n,
            half_width,
            spec,
            c_ell,
            spectral,
            symbol,
            power,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// `a(xi)^mu` in buffer order.
    pub fn multiplier_exponent(&self) -> &[f64] {
        &self.power
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if u.n_dim != self.dims.n_dim || u.n != self.n || u.half_width != self.half_width {
            return Err(Error::GridMismatch(format!(
                "field {:?} vs semigroup grid (N={}, n={}, L={})",
                u, self.dims.n_dim, self.n, self.half_width
            )));
        }
        Ok(())
    }

    fn check_t(t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidInput(format!("time {t} must be finite and >= 0")));
        }
        Ok(())
    }

    /// Multiply Fourier coefficients by `exp(-t a^mu)` in place.
    pub fn apply_hat(&self, buf: &mut [Complex64], t: f64) {
        for (z, w) in buf.iter_mut().zip(&self.power) {
            *z *= (-t * w).exp();
        }
    }

    pub fn forward(&self, u: &GridFunction) -> Result<Vec<Complex64>> {
        self.check(u)?;
        Ok(self.spectral.forward_real(&u.values))
    }

    pub fn inverse(&self, buf: Vec<Complex64>) -> GridFunction {
        let v = self.spectral.inverse_real(buf);
        GridFunction {
            n_dim: self.dims.n_dim,
            n: self.n,
            half_width: self.half_width,
            values: v,
        }
    }

    pub fn apply(&self, u0: &GridFunction, t: f64) -> Result<GridFunction> {
        Self::check_t(t)?;
        self.check(u0)?;
        if t == 0.0 {
            return Ok(u0.clone());
        }
        let mut buf = self.forward(u0)?;
        self.apply_hat(&mut buf, t);
        let out = self.inverse(buf);
        if out.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp(t));
        }
        Ok(out)
    }

    /// `S(t) u0` for every `t`, in parallel.
    pub fn apply_many(&self, u0: &GridFunction, ts: &[f64]) -> Result<Vec<GridFunction>> {
        self.check(u0)?;
        let hat = self.forward(u0)?;
        ts.par_iter()
            .map(|&t| {
                Self::check_t(t)?;
                if t == 0.0 {
                    return Ok(u0.clone());
                }
                let mut b = hat.clone();
                self.apply_hat(&mut b, t);
                Ok(self.inverse(b))
            })
            .collect()
    }

    /// Smallest `t` with `t^{1/(2 m mu)} >= 4h`; `scale()` is `2 m mu`.
    pub fn min_resolved_time(&self) -> f64 {
        (4.0 * self.spacing()).powf(self.dims.scale())
    }

    pub fn kernel(&self, t: f64) -> Result<KernelTable> {
        if !(t > 0.0) || t < self.min_resolved_time() * (1.0 - 1e-12) {
            return Err(Error::UnderResolved(format!(
                "t = {t}: t^(1/(2m mu)) below 4h (need t >= {})",
                self.min_resolved_time()
            )));
        }
        let d = dirac(self.dims.n_dim, self.n, self.half_width)?;
        Ok(KernelTable {
            t,
            dims: self.dims,
            values: self.apply(&d, t)?,
        })
    }

    /// `int f(s) S_1(s t^2) u0 ds` with the one-sided 1/2-stable density,
    /// evaluated mode by mode.
    pub fn subordination_apply(&self, u0: &GridFunction, t: f64) -> Result<GridFunction> {
        if (self.dims.mu - 0.5).abs() > 1e-15 {
            return Err(Error::InvalidInput("subordination is implemented for mu = 1/2 only".into()));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("time {t} must be positive")));
        }
        let f = SubordinatorDensity::standard();
        let mut buf = self.forward(u0)?;
        let mult: Vec<f64> = self
            .symbol
            .par_iter()
            .map(|&a| f.laplace(t * t * a))
            .collect();
        for (z, m) in buf.iter_mut().zip(&mult) {
            *z *= m;
        }
        Ok(self.inverse(buf))
    }

    /// `u0_hat / (a^mu - lambda)`.
    pub fn resolvent_exact(&self, u0: &ComplexField, lambda: Complex64) -> Result<ComplexField> {
        let mut buf = self.forward_complex(u0)?;
        for (z, w) in buf.iter_mut().zip(&self.power) {
            *z /= Complex64::new(*w, 0.0) - lambda;
        }
        self.spectral.inverse(&mut buf);
        Ok(ComplexField {
            values: buf,
            ..u0.clone()
        })
    }

    fn forward_complex(&self, u: &ComplexField) -> Result<Vec<Complex64>> {
        if u.n_dim != self.dims.n_dim || u.n != self.n || u.half_width != self.half_width {
            return Err(Error::GridMismatch("complex field on another grid".into()));
        }
        let mut buf = u.values.clone();
        self.spectral.forward(&mut buf);
        Ok(buf)
    }

    /// `int_0^inf e^{lambda t} S(t) u0 dt` by trapezoid in `log t`.
    pub fn pseudoresolvent(
        &self,
        u0: &ComplexField,
        lambda: Complex64,
        margin: f64,
    ) -> Result<PseudoResolvent> {
        if !(lambda.re < 0.0) || lambda.re.abs() < margin {
            return Err(Error::InvalidInput(format!(
                "Re lambda = {} must be below -{margin}",
                lambda.re
            )));
        }
        let hat = self.forward_complex(u0)?;
        let fine = LogTimeRule::new(self, lambda, 1);
        let coarse = LogTimeRule::new(self, lambda, 2);
        let (a, b): (Vec<Complex64>, Vec<Complex64>) = hat
            .par_iter()
            .zip(&self.power)
            .map(|(u, &w)| {
                let z = Complex64::new(w, 0.0) - lambda;
                (u * fine.transform(z), u * coarse.transform(z))
            })
            .unzip();
        let mut diff: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mut val = a;
        self.spectral.inverse(&mut val);
        self.spectral.inverse(&mut diff);
        let field = ComplexField {
            values: val,
            ..u0.clone()
        };
        let est = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok(PseudoResolvent {
            lambda,
            tolerance: est / field.max_abs().max(f64::MIN_POSITIVE),
            field,
            nodes: fine.nodes.len(),
        })
    }
}

/// Trapezoid rule in `v = ln t` for `int_0^inf e^{-z t} dt`, `Re z > 0`.
struct LogTimeRule {
    t_min: f64,
    nodes: Vec<(f64, f64)>,
}

impl LogTimeRule {
    fn new(sg: &Semigroup, lambda: Complex64, thin: usize) -> Self {
        let a_max = sg.power.iter().cloned().fold(0.0, f64::max);
        let z_max = (Complex64::new(a_max, 0.0) - lambda).norm();
        let t_min = 1e-4 / z_max;
        let t_max = (1e12f64).ln() / lambda.re.abs() * 1.5;
        // analyticity strip of e^{-z e^v} e^v is |Im v| < pi/2 - |arg z|
        let strip = (std::f64::consts::FRAC_PI_2 - (-lambda).arg().abs()).max(0.05);
        let per_decade = (40.0f64).max(12.0 / strip).ceil();
        let dv = std::f64::consts::LN_10 / per_decade * thin as f64;
        let (v0, v1) = (t_min.ln(), t_max.ln());
        let k = ((v1 - v0) / dv).ceil() as usize;
        let nodes = (0..=k)
            .map(|i| {
                let t = (v0 + i as f64 * dv).exp();
                let w = if i == 0 || i == k { 0.5 * dv } else { dv };
                (t, w * t)
            })
            .collect();
        Self { t_min, nodes }
    }

    fn transform(&self, z: Complex64) -> Complex64 {
        // int_0^{t_min} e^{-zt} dt ~ t_min for |z| t_min << 1
        let mut acc = Complex64::new(self.t_min, 0.0);
        for &(t, w) in &self.nodes {
            acc += (-z * t).exp() * w;
        }
        acc
    }
}

/// Pseudoresolvent value with a half-density rerun error estimate.
#[derive(Debug, Clone)]
pub struct PseudoResolvent {
    pub lambda: Complex64,
    pub field: ComplexField,
    pub tolerance: f64,
    pub nodes: usize,
}

/// `k_mu(t, ., 0)` on the grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub t: f64,
    pub dims: ProblemDims,
    pub values: GridFunction,
}

impl KernelTable {
    /// `t^{1/(2 m mu)}`.
    pub fn length_scale(&self) -> f64 {
        self.t.powf(1.0 / self.dims.scale())
    }

    /// Profile `K(y) = s^N k(t, s y)`, `s = t^{1/(2m mu)}`, at `y` given in
    /// profile coordinates; bilinear interpolation, `None` outside the grid.
    pub fn profile_at(&self, y: &[f64]) -> Option<f64> {
        let s = self.length_scale();
        let g = &self.values;
        let h = g.spacing();
        let mut idx = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for k in 0..g.n_dim {
            let pos = (s * y[k] + g.half_width) / h;
            if pos < 0.0 || pos > (g.n - 1) as f64 {
                return None;
            }
            let i = (pos.floor() as usize).min(g.n - 2);
            idx[k] = i;
            frac[k] = pos - i as f64;
        }
        let amp = s.powi(g.n_dim as i32);
        let v = if g.n_dim == 1 {
            let (a, b) = (g.values[idx[0]], g.values[idx[0] + 1]);
            a + frac[0] * (b - a)
        } else {
            let n = g.n;
            let at = |i: usize, j: usize| g.values[i * n + j];
            let (i, j, fx, fy) = (idx[0], idx[1], frac[0], frac[1]);
            (1.0 - fx) * ((1.0 - fy) * at(i, j) + fy * at(i, j + 1))
                + fx * ((1.0 - fy) * at(i + 1, j) + fy * at(i + 1, j + 1))
        };
        Some(amp * v)
    }

    /// Grid points as profile coordinates with profile values.
    pub fn profile_nodes(&self) -> Vec<([f64; 2], f64)> {
        let s = self.length_scale();
        let g = &self.values;
        let amp = s.powi(g.n_dim as i32);
        (0..g.len())
            .map(|f| {
                let y = if g.n_dim == 1 {
                    [g.coord(f) / s, 0.0]
                } else {
                    [g.coord(f / g.n) / s, g.coord(f % g.n) / s]
                };
                (y, amp * g.values[f])
            })
            .collect()
    }
}

/// `sum u h^N`.
pub fn mass(u: &GridFunction) -> f64 {
    u.values.iter().sum::<f64>() * u.cell()
}

/// `min(0, min u)`.
pub fn positivity_defect(u: &GridFunction) -> f64 {
    u.values.iter().cloned().fold(0.0, f64::min)
}

/// Largest pairwise relative L1 discrepancy of rescaled profiles. Each pair
/// is compared on the nodes of the kernel with the smaller `t` (coarser in
/// profile coordinates), restricted to the half-box of the other.
pub fn selfsimilar_collapse(kernels: &[KernelTable]) -> Result<f64> {
    if kernels.is_empty() {
        return Err(Error::InvalidInput("no kernels".into()));
    }
    let mut worst = 0.0f64;
    for i in 0..kernels.len() {
        for j in (i + 1)..kernels.len() {
            let (a, b) = if kernels[i].t <= kernels[j].t {
                (&kernels[i], &kernels[j])
            } else {
                (&kernels[j], &kernels[i])
            };
            let reach = 0.5 * b.values.half_width / b.length_scale();
            let (mut num, mut den) = (0.0, 0.0);
            for (y, ka) in a.profile_nodes() {
                if y[..a.dims.n_dim].iter().any(|c| c.abs() > reach) {
                    continue;
                }
                let kb = b.profile_at(&y[..a.dims.n_dim]).ok_or_else(|| {
                    Error::InvalidInput("resampling outside the resolved range".into())
                })?;
                num += (ka - kb).abs();
                den += ka.abs();
            }
            if den == 0.0 {
                return Err(Error::InvalidInput("empty comparison window".into()));
            }
            worst = worst.max(num / den);
        }
    }
    Ok(worst)
}

/// Result of fitting `|K(y)| <= exp(-c |y|^q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub q: f64,
    pub points: usize,
}

/// Largest `c` with `|K(y)| <= exp(-c |y|^{2m/(2m-1)})` over profile nodes
/// where `|K|` exceeds `floor * max|K|` and `|y| >= y_min`.
pub fn gaussian_decay_fit(kernel: &KernelTable, y_min: f64, floor: f64) -> Result<DecayFit> {
    let m = kernel.dims.m as f64;
    let q = 2.0 * m / (2.0 * m - 1.0);
    let nodes = kernel.profile_nodes();
    let kmax = nodes.iter().map(|(_, k)| k.abs()).fold(0.0, f64::max);
    let reach = 0.5 * kernel.values.half_width / kernel.length_scale();
    let mut c = f64::INFINITY;
    let mut points = 0;
    for (y, k) in nodes {
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        if r < y_min || r > reach || k.abs() <= floor * kmax {
            continue;
        }
        c = c.min(-k.abs().ln() / r.powf(q));
        points += 1;
    }
    if points == 0 {
        return Err(Error::InvalidInput("no profile nodes in the fit window".into()));
    }
    Ok(DecayFit { c, q, points })
}

/// One-sided 1/2-stable density `f(s) = s^{-3/2} e^{-1/(4s)} / (2 sqrt(pi))`
/// with trapezoid nodes in `log s` on `[s_min, s_max]`.
#[derive(Debug, Clone)]
pub struct SubordinatorDensity {
    pub s_min: f64,
    pub s_max: f64,
    nodes: Vec<(f64, f64)>,
    tail: f64,
}

impl SubordinatorDensity {
    pub fn density(s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        s.powf(-1.5) * (-0.25 / s).exp() / (2.0 * std::f64::consts::PI.sqrt())
    }

    pub fn new(s_min: f64, s_max: f64, step: f64) -> Self {
        let (v0, v1) = (s_min.ln(), s_max.ln());
        let k = ((v1 - v0) / step).ceil() as usize;
        let dv = (v1 - v0) / k as f64;
        let nodes = (0..=k)
            .map(|i| {
                let s = (v0 + i as f64 * dv).exp();
                let w = if i == 0 || i == k { 0.5 * dv } else { dv };
                (s, w * s * Self::density(s))
            })
            .collect();
        Self {
            s_min,
            s_max,
            nodes,
            // int_{s_max}^inf f = erf(1 / (2 sqrt(s_max)))
            tail: erf(0.5 / s_max.sqrt()),
        }
    }

    pub fn standard() -> Self {
        Self::new(1e-3, 1e12, 0.02)
    }

    /// Quadrature mass on `[s_min, s_max]`.
    pub fn mass(&self) -> f64 {
        self.nodes.iter().map(|(_, w)| w).sum()
    }

    /// `int f(s) e^{-s x} ds`; the truncated tail is credited only at `x = 0`.
    pub fn laplace(&self, x: f64) -> f64 {
        let body: f64 = self.nodes.iter().map(|&(s, w)| w * (-s * x).exp()).sum();
        if x == 0.0 {
            body + self.tail
        } else {
            body
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heat(n: usize, l: f64, mu: f64) -> Semigroup {
        let d = ProblemDims::new(1, 1, mu).unwrap();
        Semigroup::new(d, n, l, SymbolSpec::LaplacianPower { m: 1 }).unwrap()
    }

    #[test]
    fn t_zero_is_identity() {
        let sg = heat(64, 4.0, 1.0);
        let u = GridFunction::from_fn(1, 64, 4.0, |x| x[0].sin() + 0.3).unwrap();
        assert_eq!(sg.apply(&u, 0.0).unwrap(), u);
        assert!(sg.apply(&u, -1.0).is_err());
    }

    #[test]
    fn rejects_non_elliptic_table() {
        let d = ProblemDims::new(2, 1, 1.0).unwrap();
        let spec = SymbolSpec::Coefficients {
            m: 1,
            table: vec![([2, 0], 1.0)],
        };
        assert!(Semigroup::new(d, 16, 1.0, spec).is_err());
        let ok = SymbolSpec::Coefficients {
            m: 1,
            table: vec![([2, 0], 1.0), ([0, 2], 2.0)],
        };
        let sg = Semigroup::new(d, 16, 1.0, ok).unwrap();
        assert!((sg.c_ell - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_resolution_and_mass() {
        let sg = heat(1024, 8.0, 1.0);
        assert!(sg.kernel(1e-5).is_err());
        let k = sg.kernel(0.01).unwrap();
        assert!((mass(&k.values) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn subordinator_mass() {
        let f = SubordinatorDensity::standard();
        assert!((f.mass() - 1.0).abs() < 1e-6);
        assert!((f.laplace(0.0) - 1.0).abs() < 1e-10);
        // e^{-sqrt x}
        assert!((f.laplace(4.0) - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn pseudoresolvent_matches_exact() {
        let sg = heat(256, 4.0, 1.0);
        let u = GridFunction::from_fn(1, 256, 4.0, |x| (-x[0] * x[0]).exp()).unwrap();
        let cu = ComplexField::from_real(&u);
        for lam in [Complex64::new(-0.5, 0.0), Complex64::new(-1.0, 2.0)] {
            let pr = sg.pseudoresolvent(&cu, lam, 0.1).unwrap();
            let ex = sg.resolvent_exact(&cu, lam).unwrap();
            let rel = pr.field.sub(&ex).max_abs() / ex.max_abs();
            assert!(rel < 1e-6, "{lam}: {rel}");
            assert!(pr.tolerance < 1e-3);
        }
        assert!(sg.pseudoresolvent(&cu, Complex64::new(-0.05, 0.0), 0.1).is_err());
    }
}
