//! Perturbed semigroup `S_P(t)` from the variation-of-constants formula
//! `u(t) = S(t)u0 + sum_i int_0^t S(t-s) V_i u(s) ds`, solved by Picard
//! sweeps in the weighted norm `sup_k e^{-theta t_k} t_k^b ||u(t_k)||_alpha`.
//!
//! Time integrals are product-integrated in Fourier space: the forcing is
//! piecewise linear between nodes and the factor `exp(-a^mu (t - s))` is
//! integrated exactly, mode by mode. When `b = d(alpha, gamma) > 0` the first
//! interval uses the model `g(s) = g(t_1) (s/t_1)^{-b}` instead.

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::fixtures::{power_law, PowerLawRealization};
use crate::grid::GridFunction;
use crate::morrey_norm::{morrey_norm, RadiusLadder};
use crate::quad::composite;
use crate::scale_index::{
    choose_alpha, from_index, sigma_contains, smoothing_distance, MorreyParams, PotentialClass,
    ProblemDims, ScaleIndex,
};
use crate::semigroup::Semigroup;

/// How a potential is put on the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Realization {
    PowerLaw {
        amplitude: f64,
        beta: f64,
        how: PowerLawRealization,
    },
    Constant(f64),
    Tabulated(GridFunction),
}

/// Potential `V` with its declared Morrey class.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub realization: Realization,
    pub class: PotentialClass,
}

impl PotentialSpec {
    /// `A |x|^{-beta}` declared in `M^{p0, beta p0}`.
    pub fn power_law(
        amplitude: f64,
        beta: f64,
        p0: f64,
        how: PowerLawRealization,
        dims: &ProblemDims,
    ) -> Result<Self> {
        let ell0 = beta * p0;
        if !(ell0 < dims.n_dim as f64) {
            return Err(Error::InvalidInput(format!(
                "beta p0 = {ell0} must be below N = {}",
                dims.n_dim
            )));
        }
        Self::declared(
            Realization::PowerLaw {
                amplitude,
                beta,
                how,
            },
            MorreyParams::finite(p0, ell0, dims)?,
            dims,
        )
    }

    pub fn constant(c: f64, dims: &ProblemDims) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidInput("non-finite constant potential".into()));
        }
        Ok(Self {
            realization: Realization::Constant(c),
            class: PotentialClass::bounded(dims),
        })
    }

    /// Arbitrary declaration; power laws must satisfy `l0 = beta p0`.
    pub fn declared(realization: Realization, params: MorreyParams, dims: &ProblemDims) -> Result<Self> {
        if let Realization::PowerLaw { beta, .. } = realization {
            let p0 = params.p.as_f64();
            if (params.ell - beta * p0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "declared l0 = {} inconsistent with beta p0 = {}",
                    params.ell,
                    beta * p0
                )));
            }
        }
        let class = PotentialClass::new(params, dims);
        if !class.admissible {
            return Err(Error::Inadmissible(class.kappa));
        }
        Ok(Self { realization, class })
    }

    pub fn label(&self) -> String {
        match &self.realization {
            Realization::PowerLaw {
                amplitude,
                beta,
                how,
            } => format!("power_law(A={amplitude}, beta={beta}, {})", how.label()),
            Realization::Constant(c) => format!("constant({c})"),
            Realization::Tabulated(_) => "tabulated".into(),
        }
    }

    /// Grid values plus the measured norm in the declared class.
    pub fn realize(&self, grid: &GridFunction) -> Result<RealizedPotential> {
        let values = match &self.realization {
            Realization::PowerLaw {
                amplitude,
                beta,
                how,
            } => power_law(grid.n_dim, grid.n, grid.half_width, *beta, *amplitude, *how)?,
            Realization::Constant(c) => grid.with_values(vec![*c; grid.len()]),
            Realization::Tabulated(g) => {
                grid.require_same_grid(g)?;
                g.clone()
            }
        };
        let norm = morrey_norm(&values, &self.class.params, &RadiusLadder::standard(&values));
        Ok(RealizedPotential {
            spec: self.clone(),
            values,
            norm,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizedPotential {
    pub spec: PotentialSpec,
    pub values: GridFunction,
    pub norm: f64,
}

/// `P_V phi = V phi`.
pub fn multiply(v: &RealizedPotential, phi: &GridFunction) -> Result<GridFunction> {
    v.values.mul(phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaMode {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub horizon: f64,
    pub nodes: usize,
    pub grading: f64,
    pub theta: ThetaMode,
    pub picard_tol: f64,
    pub max_iters: usize,
    /// Constant `C` of the base smoothing estimate.
    pub calibration: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            horizon: 0.25,
            nodes: 256,
            grading: 2.0,
            theta: ThetaMode::Auto,
            picard_tol: 1e-8,
            max_iters: 50,
            calibration: 1.0,
            theta_min: 1.0,
            theta_max: 1e8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 16 {
            return Err(Error::InvalidInput(format!("K = {} < 16", self.nodes)));
        }
        if !(self.picard_tol > 0.0) || !(self.grading >= 1.0) || !(self.horizon > 0.0) {
            return Err(Error::InvalidInput(
                "need picard_tol > 0, grading >= 1 and horizon > 0".into(),
            ));
        }
        if self.max_iters == 0 || !(self.calibration > 0.0) || !(self.theta_min > 0.0) {
            return Err(Error::InvalidInput("max_iters, C and theta_min must be positive".into()));
        }
        if let ThetaMode::Fixed(t) = self.theta {
            if !(t > 0.0) {
                return Err(Error::InvalidInput("fixed theta must be positive".into()));
            }
        }
        Ok(())
    }

    /// `t_k = T (k/K)^g`, `k = 0..=K`.
    pub fn times(&self) -> Vec<f64> {
        let k = self.nodes as f64;
        (0..=self.nodes)
            .map(|i| self.horizon * (i as f64 / k).powf(self.grading))
            .collect()
    }
}

/// Upper bounds `c_i(theta)` from the Holder/Beta estimate
/// `theta^{-1/q'} T^{1/q - d_i} q'^{-1/q'} B(1 - q d_i, 1 - q d_gamma)^{1/q}`,
/// minimized over `q`.
pub fn contraction_bound(theta: f64, horizon: f64, d_list: &[f64], d_gamma: f64) -> Result<Vec<f64>> {
    if !(theta > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidInput("theta and T must be positive".into()));
    }
    if !(0.0..1.0).contains(&d_gamma) {
        return Err(Error::InvalidInput(format!("d_gamma = {d_gamma} outside [0,1)")));
    }
    d_list
        .iter()
        .map(|&d| {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::InvalidInput(format!("d = {d} outside [0,1)")));
            }
            let dm = d.max(d_gamma);
            let q_max = if dm > 0.0 { 1.0 / dm } else { 1e4 };
            // geometric grid in q - 1 on (0, q_max - 1)
            let span = q_max - 1.0;
            let mut best = f64::INFINITY;
            for j in 1..400 {
                let q = 1.0 + span * (1e-4f64).powf(1.0 - j as f64 / 400.0) * (1.0 - 1e-9);
                let qp = q / (q - 1.0);
                let b = beta(1.0 - q * d, 1.0 - q * d_gamma);
                let v = theta.powf(-1.0 / qp)
                    * horizon.powf(1.0 / q - d)
                    * qp.powf(-1.0 / qp)
                    * b.powf(1.0 / q);
                if v.is_finite() {
                    best = best.min(v);
                }
            }
            Ok(best)
        })
        .collect()
}

/// Chosen weight parameter with the predicted contraction factor `C sum R_i c_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaChoice {
    pub theta: f64,
    pub factor: f64,
}

/// Smallest `theta` on the doubling ladder from `theta_min` with
/// `C sum_i R_i c_i(theta) <= 1/2`; `entries` are `(R_i, d_i)`.
pub fn choose_theta(
    entries: &[(f64, f64)],
    d_gamma: f64,
    horizon: f64,
    calibration: f64,
    theta_min: f64,
    theta_max: f64,
) -> Result<ThetaChoice> {
    let ds: Vec<f64> = entries.iter().map(|e| e.1).collect();
    let mut theta = theta_min;
    loop {
        let cs = contraction_bound(theta, horizon, &ds, d_gamma)?;
        let factor = calibration * entries.iter().zip(&cs).map(|((r, _), c)| r * c).sum::<f64>();
        if factor <= 0.5 {
            return Ok(ThetaChoice { theta, factor });
        }
        theta *= 2.0;
        if theta > theta_max {
            return Err(Error::NonContraction(format!(
                "C R sum c_i = {factor} > 1/2 at theta_max = {theta_max}"
            )));
        }
    }
}

/// Product-integration weights `int_{s0}^{s1} (t-s)^{-a} s^{-b} l(s) ds` for
/// the two hat functions of the interval (left, right).
fn singular_moments(s0: f64, s1: f64, t: f64, a: f64, b: f64) -> (f64, f64) {
    let dlt = s1 - s0;
    let w = |s: f64| ((s1 - s) / dlt, (s - s0) / dlt);
    let panels = 16;
    if s0 == 0.0 && b > 0.0 && s1 == t && a > 0.0 {
        let m = 0.5 * (s0 + s1);
        let (l0, r0) = singular_moments(s0, m, t, a, b);
        let (l1, r1) = singular_moments(m, s1, t, a, b);
        // re-express hats of the halves on the whole interval
        return (l0 + 0.5 * r0 + 0.5 * l1, 0.5 * r0 + 0.5 * l1 + r1);
    }
    if s0 == 0.0 && b > 0.0 {
        // s = s1 u^{1/(1-b)}: s^{-b} ds = s1^{1-b}/(1-b) du
        let e = 1.0 / (1.0 - b);
        let c = s1.powf(1.0 - b) * e;
        let f = |u: f64, pick: bool| {
            let s = s1 * u.powf(e);
            let (l, r) = w(s);
            c * (t - s).powf(-a) * if pick { r } else { l }
        };
        return (
            composite(0.0, 1.0, panels, |u| f(u, false)),
            composite(0.0, 1.0, panels, |u| f(u, true)),
        );
    }
    if s1 == t && a > 0.0 {
        // t - s = D v^{1/(1-a)}
        let big = t - s0;
        let e = 1.0 / (1.0 - a);
        let c = big.powf(1.0 - a) * e;
        let f = |v: f64, pick: bool| {
            let s = t - big * v.powf(e);
            let (l, r) = w(s);
            c * s.powf(-b) * if pick { r } else { l }
        };
        return (
            composite(0.0, 1.0, panels, |v| f(v, false)),
            composite(0.0, 1.0, panels, |v| f(v, true)),
        );
    }
    let f = |s: f64, pick: bool| {
        let (l, r) = w(s);
        (t - s).powf(-a) * s.powf(-b) * if pick { r } else { l }
    };
    (
        composite(s0, s1, panels, |s| f(s, false)),
        composite(s0, s1, panels, |s| f(s, true)),
    )
}

/// `int_0^{t_j} A(t_j - s) g(s) ds` by product integration on `times[..=j]`.
///
/// `g_reg[k]` holds `s_k^b g(s_k)` and `applier(tau, phi)` returns
/// `tau^a A(tau) phi`, so both are bounded; the weights integrate
/// `(t-s)^{-a} s^{-b}` exactly against piecewise-linear interpolation.
pub fn singular_convolve<A>(
    times: &[f64],
    g_reg: &[GridFunction],
    j: usize,
    a: f64,
    b: f64,
    applier: A,
) -> Result<GridFunction>
where
    A: Fn(f64, &GridFunction) -> Result<GridFunction>,
{
    if !(0.0..1.0).contains(&a) || !(0.0..1.0).contains(&b) {
        return Err(Error::InvalidInput(format!("exponents a = {a}, b = {b} must lie in [0,1)")));
    }
    if times.len() != g_reg.len() || j == 0 || j >= times.len() || times[0] != 0.0 {
        return Err(Error::InvalidInput("times must start at 0 and match the samples".into()));
    }
    let t = times[j];
    let mut out = GridFunction::zeros(g_reg[0].n_dim, g_reg[0].n, g_reg[0].half_width)?;
    let mut wts = vec![0.0; j + 1];
    for k in 1..=j {
        let (l, r) = singular_moments(times[k - 1], times[k], t, a, b);
        wts[k - 1] += l;
        wts[k] += r;
    }
    for (k, wk) in wts.iter().enumerate() {
        let v = applier(t - times[k], &g_reg[k])?;
        out = out.axpby(1.0, &v, *wk)?;
    }
    Ok(out)
}

/// `(1 - e^{-z}(1+z)) / z^2` and `(z - 1 + e^{-z}) / z^2`.
fn etd_weights(z: f64) -> (f64, f64) {
    if z < 0.1 {
        let (mut w0, mut w1) = (0.0, 0.0);
        let mut pow = 1.0;
        let mut fact = 2.0;
        for j in 0..10 {
            let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
            w0 += sgn * (j as f64 + 1.0) * pow / fact;
            w1 += sgn * pow / fact;
            pow *= z;
            fact *= j as f64 + 3.0;
        }
        (w0, w1)
    } else {
        let e = (-z).exp();
        ((1.0 - e * (1.0 + z)) / (z * z), (z - 1.0 + e) / (z * z))
    }
}

/// `int_0^1 e^{-z(1-x)} x^{-b} dx`.
fn singular_first(z: f64, b: f64) -> f64 {
    if z >= 40.0 {
        // sum_k (b)_k / z^{k+1}
        let mut term = 1.0 / z;
        let mut acc = term;
        for k in 0..30 {
            term *= (b + k as f64) / z;
            acc += term;
            if term.abs() < 1e-17 * acc {
                break;
            }
        }
        acc
    } else {
        let e = 1.0 / (1.0 - b);
        e * composite(0.0, 1.0, 32, |w| (-z * (1.0 - w.powf(e))).exp())
    }
}

/// Per-node spectral weights of the product-integration recursion.
struct StepTable {
    decay: Vec<Vec<f64>>,
    w0: Vec<Vec<f64>>,
    w1: Vec<Vec<f64>>,
    first: Option<Vec<f64>>,
}

impl StepTable {
    fn new(power: &[f64], times: &[f64], b: f64) -> Self {
        let kk = times.len() - 1;
        let mut decay = Vec::with_capacity(kk + 1);
        let mut w0 = Vec::with_capacity(kk + 1);
        let mut w1 = Vec::with_capacity(kk + 1);
        decay.push(Vec::new());
        w0.push(Vec::new());
        w1.push(Vec::new());
        for k in 1..=kk {
            let dlt = times[k] - times[k - 1];
            let rows: Vec<(f64, f64, f64)> = power
                .par_iter()
                .map(|&lam| {
                    let z = lam * dlt;
                    let (a0, a1) = etd_weights(z);
                    ((-z).exp(), a0 * dlt, a1 * dlt)
                })
                .collect();
            decay.push(rows.iter().map(|r| r.0).collect());
            w0.push(rows.iter().map(|r| r.1).collect());
            w1.push(rows.iter().map(|r| r.2).collect());
        }
        let first = (b > 0.0).then(|| {
            power
                .par_iter()
                .map(|&lam| times[1] * singular_first(lam * times[1], b))
                .collect()
        });
        Self {
            decay,
            w0,
            w1,
            first,
        }
    }

    /// `I_k` for forcing coefficients `g[k]`.
    fn accumulate(&self, g: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let kk = g.len() - 1;
        let m = g[1].len();
        let mut out = Vec::with_capacity(kk + 1);
        out.push(vec![Complex64::new(0.0, 0.0); m]);
        let first: Vec<Complex64> = match &self.first {
            Some(f) => g[1].iter().zip(f).map(|(x, w)| x * w).collect(),
            None => (0..m)
                .map(|i| g[0][i] * self.w0[1][i] + g[1][i] * self.w1[1][i])
                .collect(),
        };
        out.push(first);
        for k in 2..=kk {
            let prev = &out[k - 1];
            let (d, a0, a1) = (&self.decay[k], &self.w0[k], &self.w1[k]);
            let next: Vec<Complex64> = (0..m)
                .into_par_iter()
                .with_min_len(512)
                .map(|i| prev[i] * d[i] + g[k - 1][i] * a0[i] + g[k][i] * a1[i])
                .collect();
            out.push(next);
        }
        out
    }
}

/// Residuals below this carry no contraction information.
pub const RATIO_FLOOR: f64 = 1e-12;

fn weighted_sup(node_norms: &[f64], times: &[f64], theta: f64) -> f64 {
    node_norms
        .iter()
        .enumerate()
        .map(|(i, n)| (-theta * times[i + 1]).exp() * n)
        .fold(0.0, f64::max)
}

/// Residual histories; stagnation is three sweeps in a row in which neither
/// residual still above tolerance decreased.
#[derive(Debug, Clone, Default)]
struct Tracker {
    residuals: Vec<f64>,
    plain: Vec<f64>,
    rising: usize,
    stagnated: bool,
}

impl Tracker {
    /// `Some(converged)` once the loop should stop.
    fn push(&mut self, r: f64, plain: f64, tol: f64) -> Option<bool> {
        if let (Some(&prev), Some(&prev_plain)) = (self.residuals.last(), self.plain.last()) {
            let progress = (r < prev && r > tol) || (plain < prev_plain && plain > tol);
            self.rising = if progress { 0 } else { self.rising + 1 };
        }
        self.residuals.push(r);
        self.plain.push(plain);
        if r <= tol && plain <= tol {
            return Some(true);
        }
        if self.rising >= 3 {
            self.stagnated = true;
            return Some(false);
        }
        None
    }
}

/// Solution at the nodes plus the sweep diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    /// Relative `theta`-weighted residual after each sweep.
    pub residuals: Vec<f64>,
    /// Same with `theta = 0`; convergence needs both below tolerance.
    pub plain_residuals: Vec<f64>,
    pub theta: f64,
    pub predicted_factor: f64,
    pub alpha: ScaleIndex,
    pub gamma: ScaleIndex,
    /// `d(alpha, gamma)`, the weight exponent.
    pub b: f64,
    pub converged: bool,
    pub stagnated: bool,
    pub weighted_norm: f64,
}

impl Trajectory {
    pub fn sweeps(&self) -> usize {
        self.residuals.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Successive residual ratios, skipping pairs whose first residual is
    /// already at the roundoff floor.
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals
            .windows(2)
            .filter(|w| w[0] > RATIO_FLOOR)
            .map(|w| w[1] / w[0])
            .collect()
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// Solver for one semigroup, potential set and configuration.
pub struct DuhamelSolver<'a> {
    pub semigroup: &'a Semigroup,
    pub potentials: Vec<RealizedPotential>,
    pub cfg: SolverConfig,
    ladder: RadiusLadder,
}

struct Setup {
    alpha: ScaleIndex,
    alpha_params: MorreyParams,
    b: f64,
    theta: ThetaChoice,
}

impl<'a> DuhamelSolver<'a> {
    pub fn new(semigroup: &'a Semigroup, potentials: &[PotentialSpec], cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = GridFunction::zeros(semigroup.dims.n_dim, semigroup.n, semigroup.half_width)?;
        let potentials = potentials
            .iter()
            .map(|p| p.realize(&grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            semigroup,
            potentials,
            cfg,
            ladder: RadiusLadder::standard(&grid),
        })
    }

    fn dims(&self) -> ProblemDims {
        self.semigroup.dims
    }

    fn classes(&self) -> Vec<PotentialClass> {
        self.potentials.iter().map(|p| p.spec.class).collect()
    }

    fn setup(&self, gamma: &ScaleIndex, cfg: &SolverConfig) -> Result<Setup> {
        let dims = self.dims();
        if !gamma.in_triangle(&dims) {
            return Err(Error::OutsideTriangle(gamma.g1, gamma.g2));
        }
        let classes = self.classes();
        let alpha = choose_alpha(gamma, &classes)?;
        for c in &classes {
            if !sigma_contains(gamma, &alpha, c)? {
                return Err(Error::Hypothesis(format!("{gamma} not in Sigma for {alpha}")));
            }
        }
        let b = smoothing_distance(&alpha, gamma).max(0.0);
        if b >= 1.0 {
            return Err(Error::Hypothesis(format!("d(alpha, gamma) = {b} >= 1")));
        }
        let entries: Vec<(f64, f64)> = self
            .potentials
            .iter()
            .map(|p| (p.norm, p.spec.class.kappa))
            .collect();
        let theta = match cfg.theta {
            ThetaMode::Fixed(t) => {
                let ds: Vec<f64> = entries.iter().map(|e| e.1).collect();
                let cs = contraction_bound(t, cfg.horizon, &ds, b)?;
                let factor =
                    cfg.calibration * entries.iter().zip(&cs).map(|((r, _), c)| r * c).sum::<f64>();
                ThetaChoice { theta: t, factor }
            }
            ThetaMode::Auto => choose_theta(
                &entries,
                b,
                cfg.horizon,
                cfg.calibration,
                cfg.theta_min,
                cfg.theta_max,
            )?,
        };
        Ok(Setup {
            alpha,
            alpha_params: from_index(&alpha, &dims)?,
            b,
            theta,
        })
    }

    fn alpha_norm(&self, u: &GridFunction, mp: &MorreyParams) -> f64 {
        morrey_norm(u, mp, &self.ladder)
    }

    /// `t_k^b ||x_k||_alpha` for `k >= 1`.
    fn node_norms(&self, x: &[GridFunction], times: &[f64], b: f64, mp: &MorreyParams) -> Vec<f64> {
        (1..x.len())
            .into_par_iter()
            .map(|k| times[k].powf(b) * self.alpha_norm(&x[k], mp))
            .collect()
    }

    fn weighted(&self, states: &[GridFunction], times: &[f64], s: &Setup) -> f64 {
        let n = self.node_norms(states, times, s.b, &s.alpha_params);
        weighted_sup(&n, times, s.theta.theta)
    }

    /// Relative residuals of `next` against `prev` in the `theta`-weighted
    /// norm and in the unweighted (`theta = 0`) norm.
    fn residual(&self, next: &[GridFunction], prev: &[GridFunction], times: &[f64], s: &Setup) -> (f64, f64) {
        let diff: Vec<GridFunction> = next
            .par_iter()
            .zip(prev)
            .map(|(a, b)| a.sub(b).expect("same grid"))
            .collect();
        let dn = self.node_norms(&diff, times, s.b, &s.alpha_params);
        let un = self.node_norms(next, times, s.b, &s.alpha_params);
        let rel = |th: f64| {
            let d = weighted_sup(&dn, times, th);
            if d == 0.0 {
                0.0
            } else {
                d / weighted_sup(&un, times, th).max(f64::MIN_POSITIVE)
            }
        };
        (rel(s.theta.theta), rel(0.0))
    }

    /// `sup_k t_k^b ||a_k - b_k||_alpha / sup_k t_k^b ||a_k||_alpha`, the
    /// unweighted trajectory distance used by the consistency checks.
    pub fn trajectory_distance(&self, a: &Trajectory, b: &Trajectory) -> Result<f64> {
        if a.times.len() != b.times.len() {
            return Err(Error::GridMismatch("trajectories on different time grids".into()));
        }
        let mp = from_index(&a.alpha, &self.dims())?;
        let diff: Vec<GridFunction> = a
            .states
            .iter()
            .zip(&b.states)
            .map(|(x, y)| x.sub(y))
            .collect::<Result<_>>()?;
        let d = weighted_sup(&self.node_norms(&diff, &a.times, a.b, &mp), &a.times, 0.0);
        let n = weighted_sup(&self.node_norms(&a.states, &a.times, a.b, &mp), &a.times, 0.0);
        Ok(if d == 0.0 { 0.0 } else { d / n.max(f64::MIN_POSITIVE) })
    }

    fn base_states(&self, u0: &GridFunction, times: &[f64]) -> Result<Vec<GridFunction>> {
        self.semigroup.apply_many(u0, times)
    }

    /// `sum_{i in set} V_i x_k + extra_k` transformed, for every node.
    fn forcing(
        &self,
        x: &[GridFunction],
        set: &[usize],
        extra: Option<&[GridFunction]>,
        skip_origin: bool,
    ) -> Result<Vec<Vec<Complex64>>> {
        let sp = self.semigroup.spectral();
        let m = sp.len();
        (0..x.len())
            .into_par_iter()
            .map(|k| {
                if k == 0 && skip_origin {
                    return Ok(vec![Complex64::new(0.0, 0.0); m]);
                }
                let mut acc = vec![0.0; m];
                for &i in set {
                    for (a, (v, u)) in acc
                        .iter_mut()
                        .zip(self.potentials[i].values.values.iter().zip(&x[k].values))
                    {
                        *a += v * u;
                    }
                }
                if let Some(e) = extra {
                    for (a, v) in acc.iter_mut().zip(&e[k].values) {
                        *a += v;
                    }
                }
                if acc.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp(k as f64));
                }
                Ok(sp.forward_real(&acc))
            })
            .collect()
    }

    /// Fixed point of `x = base + I[sum_{set} V_i x + extra]` by Picard sweeps.
    #[allow(clippy::too_many_arguments)]
    fn iterate(
        &self,
        base: &[GridFunction],
        set: &[usize],
        extra: Option<&[GridFunction]>,
        times: &[f64],
        table: &StepTable,
        s: &Setup,
        tol: f64,
        max_iters: usize,
    ) -> Result<(Vec<GridFunction>, Tracker, bool)> {
        let mut x = base.to_vec();
        let mut track = Tracker::default();
        let skip_origin = s.b > 0.0;
        for _ in 0..max_iters {
            let g = self.forcing(&x, set, extra, skip_origin)?;
            let acc = table.accumulate(&g);
            let next: Vec<GridFunction> = acc
                .into_par_iter()
                .enumerate()
                .map(|(k, buf)| {
                    if k == 0 {
                        return Ok(base[0].clone());
                    }
                    let v = self.semigroup.inverse(buf);
                    let out = base[k].add(&v)?;
                    if out.values.iter().any(|z| !z.is_finite()) {
                        return Err(Error::BlowUp(times[k]));
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            let (r, rp) = self.residual(&next, &x, times, s);
            x = next;
            if let Some(done) = track.push(r, rp, tol) {
                return Ok((x, track, done));
            }
        }
        Ok((x, track, false))
    }

    fn trajectory(
        &self,
        gamma: &ScaleIndex,
        s: &Setup,
        times: Vec<f64>,
        states: Vec<GridFunction>,
        track: Tracker,
        converged: bool,
    ) -> Trajectory {
        let weighted_norm = self.weighted(&states, &times, s);
        Trajectory {
            times,
            states,
            residuals: track.residuals,
            plain_residuals: track.plain,
            theta: s.theta.theta,
            predicted_factor: s.theta.factor,
            alpha: s.alpha,
            gamma: *gamma,
            b: s.b,
            converged,
            stagnated: track.stagnated,
            weighted_norm,
        }
    }

    /// Joint solve with every potential.
    pub fn picard_solve(&self, u0: &GridFunction, gamma: &ScaleIndex) -> Result<Trajectory> {
        self.solve_with(u0, gamma, &self.cfg)
    }

    fn solve_with(&self, u0: &GridFunction, gamma: &ScaleIndex, cfg: &SolverConfig) -> Result<Trajectory> {
        let s = self.setup(gamma, cfg)?;
        let times = cfg.times();
        let base = self.base_states(u0, &times)?;
        if self.potentials.is_empty() {
            let track = Tracker {
                residuals: vec![0.0],
                plain: vec![0.0],
                ..Tracker::default()
            };
            return Ok(self.trajectory(gamma, &s, times, base, track, true));
        }
        let table = StepTable::new(self.semigroup.multiplier_exponent(), &times, s.b);
        let set: Vec<usize> = (0..self.potentials.len()).collect();
        let (x, track, conv) =
            self.iterate(&base, &set, None, &times, &table, &s, cfg.picard_tol, cfg.max_iters)?;
        Ok(self.trajectory(gamma, &s, times, x, track, conv))
    }

    /// Time-discretization estimate for `tr`: relative gap to a solve on
    /// `2K` nodes, compared at the shared nodes (every other fine node).
    pub fn refinement_gap(&self, u0: &GridFunction, tr: &Trajectory) -> Result<f64> {
        let cfg = SolverConfig {
            nodes: 2 * self.cfg.nodes,
            ..self.cfg.clone()
        };
        let fine = self.solve_with(u0, &tr.gamma, &cfg)?;
        let coarse_nodes: Vec<usize> = (0..tr.times.len()).map(|k| 2 * k).collect();
        let sub = Trajectory {
            times: coarse_nodes.iter().map(|&k| fine.times[k]).collect(),
            states: coarse_nodes.iter().map(|&k| fine.states[k].clone()).collect(),
            ..fine
        };
        self.trajectory_distance(tr, &sub)
    }

    /// Two-stage solve: first with `order[0]` alone, then `order[1]` on top
    /// of that perturbed evolution. The second stage iterates
    /// `u = v + w(u)`, where `v` is the first-stage trajectory and `w` solves
    /// `w = I[V_first w + V_second u]`, i.e. `w(t) = int S_first(t-s) V_second u(s) ds`.
    pub fn sequential_solve(&self, u0: &GridFunction, order: &[usize], gamma: &ScaleIndex) -> Result<Trajectory> {
        let n = self.potentials.len();
        let mut seen = order.to_vec();
        seen.sort_unstable();
        if seen != (0..n).collect::<Vec<_>>() {
            return Err(Error::InvalidInput("order must be a permutation of the potentials".into()));
        }
        if n > 2 {
            return Err(Error::InvalidInput("sequential solve supports at most two potentials".into()));
        }
        if n < 2 {
            return self.picard_solve(u0, gamma);
        }
        let cfg = &self.cfg;
        let s = self.setup(gamma, cfg)?;
        let times = cfg.times();
        let base = self.base_states(u0, &times)?;
        let table = StepTable::new(self.semigroup.multiplier_exponent(), &times, s.b);
        let inner_tol = 0.1 * cfg.picard_tol;
        let (v, _, ok) =
            self.iterate(&base, &[order[0]], None, &times, &table, &s, inner_tol, cfg.max_iters)?;
        if !ok {
            return Err(Error::NonContraction("first stage did not converge".into()));
        }
        let zero: Vec<GridFunction> = base.iter().map(|b| b.scale(0.0)).collect();
        let mut u = v.clone();
        let mut track = Tracker::default();
        let mut conv = false;
        for _ in 0..cfg.max_iters {
            let extra: Vec<GridFunction> = u
                .par_iter()
                .map(|x| multiply(&self.potentials[order[1]], x))
                .collect::<Result<_>>()?;
            let (w, _, ok) = self.iterate(
                &zero,
                &[order[0]],
                Some(&extra),
                &times,
                &table,
                &s,
                inner_tol,
                cfg.max_iters,
            )?;
            if !ok {
                return Err(Error::NonContraction("inner stage did not converge".into()));
            }
            let next: Vec<GridFunction> = v.iter().zip(&w).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
            let (r, rp) = self.residual(&next, &u, &times, &s);
            u = next;
            if let Some(done) = track.push(r, rp, cfg.picard_tol) {
                conv = done;
                break;
            }
        }
        Ok(self.trajectory(gamma, &s, times, u, track, conv))
    }

    /// Short uniform solve restarted from `u` (a regular datum) over `[0, dt]`.
    fn restart(&self, u: &GridFunction, dt: f64, gamma: &ScaleIndex) -> Result<GridFunction> {
        let cfg = SolverConfig {
            horizon: dt,
            nodes: 16,
            grading: 1.0,
            picard_tol: 0.1 * self.cfg.picard_tol,
            ..self.cfg.clone()
        };
        let tr = self.solve_with(u, gamma, &cfg)?;
        Ok(tr.states.last().unwrap().clone())
    }

    /// `S_P(t) u0` off the nodes: a short re-solve from the preceding node,
    /// and composition by restarts past the horizon.
    pub fn evaluate(&self, traj: &Trajectory, t: f64) -> Result<GridFunction> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("t = {t} must be positive")));
        }
        let horizon = traj.horizon();
        if let Some(k) = traj.times.iter().position(|&x| (x - t).abs() <= 1e-14 * horizon) {
            return Ok(traj.states[k].clone());
        }
        // later segments start from regular data in the alpha space
        let regular = traj.alpha;
        if t < horizon {
            let k = traj.times.partition_point(|&x| x < t) - 1;
            if k == 0 {
                return Err(Error::InvalidInput(format!(
                    "t = {t} precedes the first node t_1 = {}",
                    traj.times[1]
                )));
            }
            return self.restart(&traj.states[k], t - traj.times[k], &regular);
        }
        let mut u = traj.states.last().unwrap().clone();
        let mut left = t - horizon;
        while left > 1e-14 * horizon {
            let dt = left.min(horizon);
            let cfg = SolverConfig {
                horizon: dt,
                grading: 1.0,
                ..self.cfg.clone()
            };
            let tr = self.solve_with(&u, &regular, &cfg)?;
            u = tr.states.last().unwrap().clone();
            left -= dt;
        }
        Ok(u)
    }

    /// Solve on `[0, total]` as consecutive segments of length `horizon`,
    /// each restarted from the previous end state; `visit(t, u)` sees every
    /// node once, in increasing `t`.
    pub fn long_visit<F>(&self, u0: &GridFunction, gamma: &ScaleIndex, total: f64, mut visit: F) -> Result<()>
    where
        F: FnMut(f64, &GridFunction),
    {
        let first = self.picard_solve(u0, gamma)?;
        if !first.converged {
            return Err(Error::NonContraction("first segment did not converge".into()));
        }
        let seg = first.horizon();
        let regular = first.alpha;
        for (t, u) in first.times.iter().zip(&first.states) {
            visit(*t, u);
        }
        let mut last = first.states.last().unwrap().clone();
        let mut t0 = seg;
        let cfg = SolverConfig {
            grading: 1.0,
            ..self.cfg.clone()
        };
        while t0 < total - 1e-12 * total {
            let tr = self.solve_with(&last, &regular, &cfg)?;
            if !tr.converged {
                return Err(Error::NonContraction(format!("segment at t = {t0} did not converge")));
            }
            for (t, u) in tr.times.iter().zip(&tr.states).skip(1) {
                visit(t0 + t, u);
            }
            last = tr.states.last().unwrap().clone();
            t0 += seg;
        }
        Ok(())
    }

    /// `(t, u(t))` at the segment ends of [`Self::long_visit`].
    pub fn long_solve(
        &self,
        u0: &GridFunction,
        gamma: &ScaleIndex,
        total: f64,
    ) -> Result<Vec<(f64, GridFunction)>> {
        let seg = self.cfg.horizon;
        let mut out = Vec::new();
        let mut next = seg;
        self.long_visit(u0, gamma, total, |t, u| {
            if (t - next).abs() <= 1e-9 * seg {
                out.push((t, u.clone()));
                next += seg;
            }
        })?;
        Ok(out)
    }

    /// Every node of [`Self::long_visit`].
    pub fn long_trajectory(
        &self,
        u0: &GridFunction,
        gamma: &ScaleIndex,
        total: f64,
    ) -> Result<(Vec<f64>, Vec<GridFunction>)> {
        let (mut times, mut states) = (Vec::new(), Vec::new());
        self.long_visit(u0, gamma, total, |t, u| {
            times.push(t);
            states.push(u.clone());
        })?;
        Ok((times, states))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn etd_series_matches_closed_form() {
        // the closed form loses ~eps/z^2, so compare where that is small
        for z in [0.01, 0.05, 0.0999] {
            let (a, b) = etd_weights(z);
            let e = (-z).exp();
            let (ea, eb) = ((1.0 - e * (1.0 + z)) / (z * z), (z - 1.0 + e) / (z * z));
            assert!((a - ea).abs() < 1e-10, "{z}");
            assert!((b - eb).abs() < 1e-10, "{z}");
        }
        let (a, b) = etd_weights(1e-12);
        assert!((a - 0.5).abs() < 1e-11 && (b - 0.5).abs() < 1e-11);
    }

    #[test]
    fn singular_first_branches_agree() {
        for b in [0.25, 0.5, 0.75] {
            let lo = singular_first(39.999, b);
            let e = 1.0 / (1.0 - b);
            let quad = e * composite(0.0, 1.0, 400, |w| (-40.0 * (1.0 - w.powf(e))).exp());
            let hi = singular_first(40.0, b);
            assert!((hi - quad).abs() < 1e-10, "{b}: {hi} {quad}");
            assert!((lo - hi).abs() < 1e-4);
        }
        // z = 0: int x^{-b} = 1/(1-b)
        assert!((singular_first(0.0, 0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn theta_monotone_in_norm() {
        let mut last = 0.0;
        for r in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let c = choose_theta(&[(r, 0.25)], 0.0, 0.25, 1.0, 1.0, 1e8).unwrap();
            assert!(c.theta >= last && c.factor <= 0.5);
            last = c.theta;
        }
        assert_eq!(choose_theta(&[(0.0, 0.25)], 0.0, 0.25, 1.0, 1.0, 1e8).unwrap().theta, 1.0);
    }

    #[test]
    fn bound_properties() {
        let c: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&t| contraction_bound(t, 1.0, &[0.3], 0.2).unwrap()[0])
            .collect();
        assert!(c[0] > c[1] && c[1] > c[2]);
        let small = contraction_bound(10.0, 1e-6, &[0.3], 0.2).unwrap()[0];
        assert!(small < 1e-2);
        assert!(contraction_bound(10.0, 1.0, &[1.0], 0.0).is_err());
    }
}
