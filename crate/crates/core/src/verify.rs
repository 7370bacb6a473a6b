//! Quantitative checks: decay-rate fits, smoothing certificates, growth-rate
//! scaling, continuous dependence, brute-force region oracles, the initial
//! trace and the pseudoresolvent identity.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::duhamel::{DuhamelSolver, Realization};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridFunction};
use crate::morrey_norm::{lp_ball_norm, morrey_norm, translation_modulus, RadiusLadder};
use crate::scale_index::{
    cd2_region_contains, choose_alpha, existence_set_contains, from_index,
    regularity_set_contains, sigma_contains, smooths_to, star_region_contains,
    sub_triangle_contains, to_index, Exponent, MorreyParams, PotentialClass, ProblemDims,
    ScaleIndex, REGION_TOL,
};
use crate::semigroup::Semigroup;

/// Least-squares line `y = intercept + slope x` with the slope's standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_err: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::InvalidInput("need at least two (x, y) pairs".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let std_err = if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        std_err,
    })
}

/// A fitted exponent compared with its predicted value.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub std_err: f64,
    pub intercept: f64,
    /// Range of the abscissa before taking logs (`t`, or a norm).
    pub range: (f64, f64),
    pub predicted: f64,
    /// `|slope - predicted| / |predicted|`, absolute when `predicted = 0`.
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl FitResult {
    fn new(fit: LineFit, range: (f64, f64), predicted: f64, tolerance: f64) -> Self {
        let err = (fit.slope - predicted).abs();
        let deviation = if predicted == 0.0 { err } else { err / predicted.abs() };
        Self {
            slope: fit.slope,
            std_err: fit.std_err,
            intercept: fit.intercept,
            range,
            predicted,
            deviation,
            tolerance,
            pass: deviation <= tolerance,
        }
    }
}

fn log_pairs(xs: &[f64], ys: &[f64], what: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!("{what}: length mismatch")));
    }
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0 && x.is_finite() && y > 0.0 && y.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{what}: non-positive or non-finite sample ({x}, {y})"
            )));
        }
    }
    Ok((xs.iter().map(|x| x.ln()).collect(), ys.iter().map(|y| y.ln()).collect()))
}

fn range_of(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// `-(1/(2 m mu)) (l/p - s/q)`.
pub fn predicted_rate(dims: &ProblemDims, from: &MorreyParams, to: &MorreyParams) -> f64 {
    -(from.ell_over_p() - to.ell_over_p()) / dims.scale()
}

/// Slope of `log norm` against `log t`, compared with `predicted` at the
/// relative tolerance `tol`.
pub fn fit_decay(times: &[f64], norms: &[f64], predicted: f64, tol: f64) -> Result<FitResult> {
    if times.len() < 8 {
        return Err(Error::InvalidInput(format!("{} samples, need at least 8", times.len())));
    }
    let (xs, ys) = log_pairs(times, norms, "fit_decay")?;
    let range = range_of(times);
    let decades = (range.1 / range.0).log10();
    if decades < 1.5 - 1e-12 {
        return Err(Error::InvalidInput(format!(
            "t-grid spans {decades:.3} decades, need 1.5"
        )));
    }
    Ok(FitResult::new(least_squares(&xs, &ys)?, range, predicted, tol))
}

/// `n` points geometrically spaced on `[a, b]`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Linear evolution `t -> S(t) u0` used by the certificate.
pub enum Propagator<'a> {
    Free(&'a Semigroup),
    Perturbed(&'a DuhamelSolver<'a>),
}

impl Propagator<'_> {
    /// States at the requested times.
    pub fn states(&self, u0: &GridFunction, times: &[f64], gamma: &ScaleIndex) -> Result<Vec<GridFunction>> {
        match self {
            Self::Free(sg) => sg.apply_many(u0, times),
            Self::Perturbed(solver) => {
                let tr = solver.picard_solve(u0, gamma)?;
                if !tr.converged {
                    return Err(Error::NonContraction("perturbed solve did not converge".into()));
                }
                times.iter().map(|&t| solver.evaluate(&tr, t)).collect()
            }
        }
    }
}

/// Rejects `(p, l) -> (q, s)` unless `s/q <= l/p` and `s <= l`; an `L^inf`
/// target carries no `s` constraint.
pub fn smoothing_hypotheses(from: &MorreyParams, to: &MorreyParams) -> Result<()> {
    if to.ell_over_p() > from.ell_over_p() + REGION_TOL {
        return Err(Error::Hypothesis(format!(
            "s/q = {} > l/p = {}",
            to.ell_over_p(),
            from.ell_over_p()
        )));
    }
    if !to.p.is_infinite() && to.ell > from.ell + REGION_TOL {
        return Err(Error::Hypothesis(format!("s = {} > l = {}", to.ell, from.ell)));
    }
    Ok(())
}

/// Result of a smoothing certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub fit: FitResult,
    /// `d = (1/(2 m mu)) (l/p - s/q)`.
    pub d: f64,
    pub growth: f64,
    /// `sup_t t^d e^{-a t} ||S(t) u0||_{q,s} / ||u0||_{p,l}`.
    pub constant: f64,
    pub initial_norm: f64,
    /// `(t, ||S(t) u0||_{q,s})`.
    pub samples: Vec<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
pub fn smoothing_certificate(
    prop: &Propagator<'_>,
    u0: &GridFunction,
    from: &MorreyParams,
    to: &MorreyParams,
    dims: &ProblemDims,
    times: &[f64],
    growth: f64,
    tol: f64,
) -> Result<Certificate> {
    smoothing_hypotheses(from, to)?;
    let ladder = RadiusLadder::standard(u0);
    let initial_norm = morrey_norm(u0, from, &ladder);
    if !(initial_norm > 0.0) {
        return Err(Error::InvalidInput("initial datum has zero norm".into()));
    }
    let gamma = to_index(from, dims);
    let states = prop.states(u0, times, &gamma)?;
    let norms: Vec<f64> = states.par_iter().map(|u| morrey_norm(u, to, &ladder)).collect();
    let predicted = predicted_rate(dims, from, to);
    let d = -predicted;
    let constant = times
        .iter()
        .zip(&norms)
        .map(|(t, n)| t.powf(d) * (-growth * t).exp() * n / initial_norm)
        .fold(0.0, f64::max);
    let fit = fit_decay(times, &norms, predicted, tol)?;
    Ok(Certificate {
        fit,
        d,
        growth,
        constant,
        initial_norm,
        samples: times.iter().cloned().zip(norms).collect(),
    })
}

/// Norm used to measure a trajectory.
#[derive(Debug, Clone)]
pub enum NormKind {
    Lp(Exponent),
    Morrey(MorreyParams, RadiusLadder),
}

impl NormKind {
    pub fn eval(&self, u: &GridFunction) -> f64 {
        match self {
            Self::Lp(Exponent::Infinite) => u.max_abs(),
            Self::Lp(Exponent::Finite(p)) => u.lp_norm(*p),
            Self::Morrey(mp, ladder) => morrey_norm(u, mp, ladder),
        }
    }
}

/// Exponential growth rate fitted on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub omega: f64,
    pub std_err: f64,
    pub window: (f64, f64),
    /// Rates fitted separately on the two halves of the window.
    pub halves: (f64, f64),
    /// Whether the two halves agree to 5% of `max(|omega|, 1)`.
    pub exponential: bool,
}

/// Slope of `ln ||u(t)||` over `t` in `window`.
pub fn growth_rate(samples: &[(f64, f64)], window: (f64, f64)) -> Result<GrowthFit> {
    let inside: Vec<(f64, f64)> = samples
        .iter()
        .cloned()
        .filter(|(t, _)| *t >= window.0 - 1e-12 && *t <= window.1 + 1e-12)
        .collect();
    if inside.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "{} samples in the growth window, need 4",
            inside.len()
        )));
    }
    let fit_on = |pts: &[(f64, f64)]| -> Result<LineFit> {
        let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let mut ys = Vec::with_capacity(pts.len());
        for p in pts {
            if !(p.1 > 0.0 && p.1.is_finite()) {
                return Err(Error::InvalidInput(format!("norm {} at t = {}", p.1, p.0)));
            }
            ys.push(p.1.ln());
        }
        least_squares(&ts, &ys)
    };
    let all = fit_on(&inside)?;
    let mid = inside.len() / 2;
    let a = fit_on(&inside[..=mid])?.slope;
    let b = fit_on(&inside[mid..])?.slope;
    Ok(GrowthFit {
        omega: all.slope,
        std_err: all.std_err,
        window,
        halves: (a, b),
        exponential: (a - b).abs() <= 0.05 * all.slope.abs().max(1.0),
    })
}

/// `(t, ||u(t)||)` at segment ends on `[0, total]`.
pub fn growth_samples(
    solver: &DuhamelSolver<'_>,
    u0: &GridFunction,
    gamma: &ScaleIndex,
    total: f64,
    norm: &NormKind,
) -> Result<Vec<(f64, f64)>> {
    Ok(solver
        .long_solve(u0, gamma, total)?
        .iter()
        .map(|(t, u)| (*t, norm.eval(u)))
        .collect())
}

/// Power-law fit of growth rates against potential norms.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaScaling {
    pub fit: FitResult,
    /// `omega / norm^{1/(1 - kappa0)}` averaged in logs: an empirical value
    /// of the constant in the growth bound.
    pub constant: f64,
}

/// Fits `ln omega` against `ln ||V||`; predicted exponent `1/(1 - kappa0)`.
pub fn omega_scaling(norms: &[f64], omegas: &[f64], kappa0: f64, tol: f64) -> Result<OmegaScaling> {
    if !(kappa0 < 1.0) {
        return Err(Error::Inadmissible(kappa0));
    }
    if norms.len() < 3 {
        return Err(Error::InvalidInput("need at least three amplitudes".into()));
    }
    let (xs, ys) = log_pairs(norms, omegas, "omega_scaling")?;
    let predicted = 1.0 / (1.0 - kappa0);
    let fit = FitResult::new(least_squares(&xs, &ys)?, range_of(norms), predicted, tol);
    let constant = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - predicted * x)
        .sum::<f64>()
        / xs.len() as f64)
        .exp();
    Ok(OmegaScaling { fit, constant })
}

/// `sup_k t_k^d ||a_k - b_k||`.
pub fn weighted_distance(times: &[f64], a: &[GridFunction], b: &[GridFunction], d: f64, norm: &NormKind) -> Result<f64> {
    if a.len() != times.len() || b.len() != times.len() {
        return Err(Error::InvalidInput("trajectory lengths differ".into()));
    }
    let vals: Vec<f64> = (0..times.len())
        .into_par_iter()
        .filter(|&k| times[k] > 0.0)
        .map(|k| Ok(times[k].powf(d) * norm.eval(&a[k].sub(&b[k])?)))
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Hypotheses of the one-potential continuous dependence estimate:
/// `(p, l)` in `J_{gamma0}` and `(p, l) -> (q, s)` a smoothing pair.
pub fn cd_hypotheses(
    from: &MorreyParams,
    to: &MorreyParams,
    class: &PotentialClass,
    dims: &ProblemDims,
) -> Result<()> {
    smoothing_hypotheses(from, to)?;
    if !class.admissible {
        return Err(Error::Inadmissible(class.kappa));
    }
    let g = to_index(from, dims);
    if !sub_triangle_contains(&g, class) {
        return Err(Error::Hypothesis(format!(
            "l = {} > l0 = {}: datum space outside the admissible sub-triangle",
            from.ell, class.params.ell
        )));
    }
    Ok(())
}

/// Linear scaling of trajectory differences in the potential difference.
#[derive(Debug, Clone, PartialEq)]
pub struct CdResult {
    pub fit: FitResult,
    /// `D / ||V - V~||` per family member.
    pub constants: Vec<f64>,
    /// `max / min` of the constants.
    pub spread: f64,
    /// Constants finite with spread at most 2.
    pub bounded: bool,
}

/// `distances[j] = ||V - V~_j||`, `diffs[j] = sup_t t^d ||S_V u0 - S_V~ u0||`.
pub fn continuous_dependence_check(distances: &[f64], diffs: &[f64], tol: f64) -> Result<CdResult> {
    if distances.len() < 3 {
        return Err(Error::InvalidInput("need at least three family members".into()));
    }
    let (xs, ys) = log_pairs(distances, diffs, "continuous dependence")?;
    let fit = FitResult::new(least_squares(&xs, &ys)?, range_of(distances), 1.0, tol);
    let constants: Vec<f64> = diffs.iter().zip(distances).map(|(d, n)| d / n).collect();
    let (lo, hi) = range_of(&constants);
    let spread = hi / lo;
    Ok(CdResult {
        fit,
        bounded: spread.is_finite() && spread <= 2.0,
        constants,
        spread,
    })
}

// ---------------------------------------------------------------------------
// Region oracle

/// A space `M^{p,l}` as `(1/p, l/p)`, with `l` undefined for `L^inf`.
#[derive(Debug, Clone, Copy)]
struct Raw {
    inv_p: f64,
    ell_p: f64,
}

impl Raw {
    fn of(g: &ScaleIndex, dims: &ProblemDims) -> Self {
        Self {
            inv_p: g.g1,
            ell_p: dims.scale() * g.g2,
        }
    }

    fn of_class(c: &PotentialClass) -> Self {
        Self {
            inv_p: c.params.p.recip(),
            ell_p: c.params.ell_over_p(),
        }
    }

    fn is_bounded(&self) -> bool {
        self.inv_p <= REGION_TOL
    }

    fn ell(&self) -> f64 {
        self.ell_p / self.inv_p
    }
}

/// Allowed violation of the raw inequalities in `l/p` and in `l`. Zero (up to roundoff) for direct evaluation; one oracle cell
/// for witness searches.
#[derive(Debug, Clone, Copy)]
struct Slack {
    ell_p: f64,
    ell: f64,
}

impl Slack {
    const EXACT: Slack = Slack {
        ell_p: REGION_TOL,
        ell: REGION_TOL,
    };

    /// `cell` in the normalized coordinates `(gamma1, gamma2 / gamma2_max)`:
    /// `l/p = N gamma2 / gamma2_max` and `l = N slope / gamma2_max`.
    fn cells(cell: f64, dims: &ProblemDims) -> Self {
        let n = dims.n_dim as f64;
        Slack {
            ell_p: n * cell + REGION_TOL,
            ell: n * cell + REGION_TOL,
        }
    }
}

/// `M^{p,l} -> M^{q,s}` under the free semigroup: `s <= l`, `s/q <= l/p`.
fn raw_smooths(src: Raw, dst: Raw, e: &Slack) -> bool {
    if dst.is_bounded() {
        return true;
    }
    if src.is_bounded() {
        return false;
    }
    dst.ell() <= src.ell() + e.ell && dst.ell_p <= src.ell_p + e.ell_p
}

/// `(p, l)` with `1 <= p`, `0 < l <= N` (or `L^inf`).
fn raw_valid(x: Raw, dims: &ProblemDims) -> bool {
    if x.is_bounded() {
        return x.ell_p.abs() <= REGION_TOL;
    }
    x.inv_p <= 1.0 + REGION_TOL && x.ell_p > 0.0 && x.ell() <= dims.n_dim as f64 + REGION_TOL
}

/// Space of `V u` for `u` in `alpha` and `V` in the class.
fn raw_product(alpha: Raw, class: &PotentialClass) -> Raw {
    let c = Raw::of_class(class);
    Raw {
        inv_p: alpha.inv_p + c.inv_p,
        ell_p: alpha.ell_p + c.ell_p,
    }
}

/// Admissible source space: the product stays in the scale, the class is
/// subcritical, and `alpha` lies in the class's sub-triangle.
fn raw_step1(alpha: Raw, class: &PotentialClass, dims: &ProblemDims) -> bool {
    let c = Raw::of_class(class);
    if !(c.ell_p / dims.scale() < 1.0) {
        return false;
    }
    if alpha.inv_p + c.inv_p > 1.0 + REGION_TOL {
        return false;
    }
    alpha.is_bounded() || c.is_bounded() || alpha.ell() <= c.ell() + REGION_TOL
}

/// Existence set: data space smooths into `alpha` losing less than one
/// power of `t`.
fn raw_existence(g: Raw, alpha: Raw, dims: &ProblemDims, e: &Slack) -> bool {
    raw_smooths(g, alpha, e) && g.ell_p < alpha.ell_p + dims.scale() + e.ell_p - 2.0 * REGION_TOL
}

/// Regularity set of the product space.
fn raw_regularity(gp: Raw, alpha: Raw, class: &PotentialClass, dims: &ProblemDims, e: &Slack) -> bool {
    let beta = raw_product(alpha, class);
    if beta.inv_p > 1.0 + REGION_TOL {
        return false;
    }
    raw_valid(gp, dims)
        && raw_smooths(beta, gp, e)
        && gp.ell_p > beta.ell_p - dims.scale() - e.ell_p + 2.0 * REGION_TOL
}

/// One predicate query against the region calculus.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionQuery {
    SubTriangle { gamma: ScaleIndex, class: PotentialClass },
    Existence { gamma: ScaleIndex, alpha: ScaleIndex },
    Regularity { gamma: ScaleIndex, alpha: ScaleIndex, class: PotentialClass },
    Sigma { gamma: ScaleIndex, alpha: ScaleIndex, class: PotentialClass },
    /// `choose_alpha` succeeds for all classes at once.
    Admissible { gamma: ScaleIndex, classes: Vec<PotentialClass> },
    Star { gamma: ScaleIndex, classes: [PotentialClass; 2] },
    /// Two-potential continuous dependence region, queried at the space of `gamma`.
    Cd2 { gamma: ScaleIndex, classes: [PotentialClass; 2] },
}

impl RegionQuery {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SubTriangle { .. } => "sub_triangle",
            Self::Existence { .. } => "existence",
            Self::Regularity { .. } => "regularity",
            Self::Sigma { .. } => "sigma",
            Self::Admissible { .. } => "admissible",
            Self::Star { .. } => "star",
            Self::Cd2 { .. } => "cd2",
        }
    }

    fn points(&self) -> Vec<ScaleIndex> {
        match self {
            Self::Existence { gamma, alpha }
            | Self::Regularity { gamma, alpha, .. }
            | Self::Sigma { gamma, alpha, .. } => vec![*gamma, *alpha],
            Self::SubTriangle { gamma, .. }
            | Self::Admissible { gamma, .. }
            | Self::Star { gamma, .. }
            | Self::Cd2 { gamma, .. } => vec![*gamma],
        }
    }

    fn with_points(&self, pts: &[ScaleIndex]) -> Self {
        let mut q = self.clone();
        match &mut q {
            Self::Existence { gamma, alpha }
            | Self::Regularity { gamma, alpha, .. }
            | Self::Sigma { gamma, alpha, .. } => {
                *gamma = pts[0];
                *alpha = pts[1];
            }
            Self::SubTriangle { gamma, .. }
            | Self::Admissible { gamma, .. }
            | Self::Star { gamma, .. }
            | Self::Cd2 { gamma, .. } => *gamma = pts[0],
        }
        q
    }

    pub fn describe(&self) -> String {
        let pts: Vec<String> = self.points().iter().map(|p| p.to_string()).collect();
        format!("{} {}", self.kind(), pts.join(" "))
    }
}

/// A query where the closed form and the oracle disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDisagreement {
    pub query: String,
    pub closed_form: bool,
    pub oracle: bool,
    /// Smallest probed perturbation flipping the closed-form verdict, in
    /// units of normalized coordinates; infinite if none up to two cells.
    pub boundary_distance: f64,
    pub boundary_cell: bool,
}

/// Oracle answer: a witness satisfying the raw inequalities exactly, one
/// needing the one-cell relaxation, or none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Exact,
    WithinCell,
    None,
}

/// Brute-force witness search on a rational `alpha` grid.
#[derive(Debug, Clone)]
pub struct RegionOracle {
    pub dims: ProblemDims,
    pub density: usize,
}

impl RegionOracle {
    pub fn new(dims: ProblemDims, density: usize) -> Result<Self> {
        if density < 50 {
            return Err(Error::InvalidInput(format!("oracle density {density} < 50")));
        }
        Ok(Self { dims, density })
    }

    /// Cell width in the normalized coordinates `(gamma1, gamma2 / gamma2_max)`.
    pub fn cell(&self) -> f64 {
        1.0 / self.density as f64
    }

    fn in_triangle(&self, g: &ScaleIndex) -> bool {
        g.in_triangle(&self.dims)
    }

    pub fn closed_form(&self, q: &RegionQuery) -> bool {
        let d = &self.dims;
        match q {
            RegionQuery::SubTriangle { gamma, class } => {
                class.admissible && sub_triangle_contains(gamma, class)
            }
            RegionQuery::Existence { gamma, alpha } => existence_set_contains(gamma, alpha),
            RegionQuery::Regularity { gamma, alpha, class } => {
                regularity_set_contains(gamma, alpha, class).unwrap_or(false)
            }
            RegionQuery::Sigma { gamma, alpha, class } => {
                sigma_contains(gamma, alpha, class).unwrap_or(false)
            }
            RegionQuery::Admissible { gamma, classes } => choose_alpha(gamma, classes).is_ok(),
            RegionQuery::Star { gamma, classes } => {
                classes.iter().all(|c| c.admissible) && star_region_contains(gamma, classes, d)
            }
            RegionQuery::Cd2 { gamma, classes } => match from_index(gamma, d) {
                Ok(mp) => classes.iter().all(|c| c.admissible) && cd2_region_contains(&mp, classes, d),
                Err(_) => false,
            },
        }
    }

    pub fn oracle(&self, q: &RegionQuery) -> bool {
        self.verdict(q) != Verdict::None
    }

    /// Oracle verdict with its resolution class.
    pub fn verdict(&self, q: &RegionQuery) -> Verdict {
        let d = &self.dims;
        let direct = |b: bool| if b { Verdict::Exact } else { Verdict::None };
        let e = Slack::EXACT;
        match q {
            RegionQuery::SubTriangle { gamma, class } => self.search(gamma, std::slice::from_ref(class)).0,
            RegionQuery::Existence { gamma, alpha } => {
                direct(raw_existence(Raw::of(gamma, d), Raw::of(alpha, d), d, &e))
            }
            RegionQuery::Regularity { gamma, alpha, class } => {
                direct(raw_regularity(Raw::of(gamma, d), Raw::of(alpha, d), class, d, &e))
            }
            RegionQuery::Sigma { gamma, alpha, class } => {
                let (g, a) = (Raw::of(gamma, d), Raw::of(alpha, d));
                direct(raw_existence(g, a, d, &e) && raw_regularity(g, a, class, d, &e))
            }
            RegionQuery::Admissible { gamma, classes } => self.search(gamma, classes).0,
            RegionQuery::Star { gamma, classes } | RegionQuery::Cd2 { gamma, classes } => {
                self.search(gamma, classes).0
            }
        }
    }

    fn scan(&self, g: Raw, classes: &[PotentialClass], slack: &Slack) -> Option<ScaleIndex> {
        let d = &self.dims;
        let theta = classes
            .iter()
            .map(|c| 1.0 - c.params.p.recip())
            .fold(1.0_f64, f64::min)
            .max(0.0);
        let smax = d.gamma2_max();
        let n = self.density;
        for i in 0..=n {
            // exact endpoints: i = n gives theta itself
            let a1 = if i == n { theta } else { theta * i as f64 / n as f64 };
            let rows = if a1 == 0.0 { 0 } else { n };
            for j in 0..=rows {
                let a2 = if a1 == 0.0 { 0.0 } else { a1 * smax * j as f64 / n as f64 };
                if a1 > 0.0 && a2 == 0.0 {
                    continue;
                }
                let alpha = ScaleIndex::raw(a1, a2);
                let a = Raw::of(&alpha, d);
                if !raw_existence(g, a, d, slack) {
                    continue;
                }
                if classes
                    .iter()
                    .all(|c| raw_step1(a, c, d) && raw_regularity(g, a, c, d, slack))
                {
                    return Some(alpha);
                }
            }
        }
        None
    }

    /// Grid `alpha` admitting every class and putting `gamma` in the
    /// existence set and in each class's regularity set. Tried first with
    /// the exact inequalities, then with the inequalities on `gamma`
    /// relaxed by one cell: a witness set can be a single point (`alpha =
    /// gamma` for bounded potentials) that no grid hits.
    pub fn search(&self, gamma: &ScaleIndex, classes: &[PotentialClass]) -> (Verdict, Option<ScaleIndex>) {
        let d = &self.dims;
        if !self.in_triangle(gamma) {
            return (Verdict::None, None);
        }
        let g = Raw::of(gamma, d);
        if let Some(a) = self.scan(g, classes, &Slack::EXACT) {
            return (Verdict::Exact, Some(a));
        }
        match self.scan(g, classes, &Slack::cells(self.cell(), d)) {
            Some(a) => (Verdict::WithinCell, Some(a)),
            None => (Verdict::None, None),
        }
    }

    pub fn find_witness(&self, gamma: &ScaleIndex, classes: &[PotentialClass]) -> Option<ScaleIndex> {
        self.search(gamma, classes).1
    }

    /// Smallest probed perturbation of the query points that flips the
    /// closed-form verdict (or leaves the triangle).
    pub fn boundary_distance(&self, q: &RegionQuery) -> f64 {
        let base = self.closed_form(q);
        let pts = q.points();
        let smax = self.dims.gamma2_max();
        let cell = self.cell();
        let dirs: [(f64, f64); 8] = [
            (1.0, 0.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (1.0, 1.0),
            (1.0, -1.0),
            (-1.0, 1.0),
            (-1.0, -1.0),
        ];
        for step in 1..=8 {
            let r = cell * step as f64 / 4.0;
            for which in 0..pts.len() {
                for (dx, dy) in dirs {
                    let mut moved = pts.clone();
                    let p = pts[which];
                    let cand = ScaleIndex::raw(p.g1 + r * dx, p.g2 + r * dy * smax);
                    if !(cand.is_zero() || self.in_triangle(&cand)) {
                        return r;
                    }
                    moved[which] = cand;
                    if self.closed_form(&q.with_points(&moved)) != base {
                        return r;
                    }
                }
            }
        }
        f64::INFINITY
    }

    /// `None` when the verdicts agree. A disagreement is a boundary-cell
    /// case when the closed form flips within one cell of the query, or
    /// when the only witness needs the one-cell relaxation.
    pub fn compare(&self, q: &RegionQuery) -> Option<OracleDisagreement> {
        let c = self.closed_form(q);
        let v = self.verdict(q);
        let o = v != Verdict::None;
        if c == o {
            return None;
        }
        let dist = self.boundary_distance(q);
        Some(OracleDisagreement {
            query: q.describe(),
            closed_form: c,
            oracle: o,
            boundary_distance: dist,
            boundary_cell: dist <= self.cell() * (1.0 + 1e-9) || v == Verdict::WithinCell,
        })
    }
}

/// Summary of an oracle sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub queries: usize,
    pub disagreements: Vec<OracleDisagreement>,
}

impl OracleSummary {
    /// Disagreements farther than one cell from every probed boundary.
    pub fn interior_failures(&self) -> usize {
        self.disagreements.iter().filter(|d| !d.boundary_cell).count()
    }
}

pub fn run_oracle(oracle: &RegionOracle, queries: &[RegionQuery]) -> OracleSummary {
    let disagreements = queries.par_iter().filter_map(|q| oracle.compare(q)).collect();
    OracleSummary {
        queries: queries.len(),
        disagreements,
    }
}

// ---------------------------------------------------------------------------
// Initial trace

/// `||S(t) u0 - u0||` on shrinking `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceCheck {
    /// `(t, ||S(t) u0 - u0||_{L^p(B(0, R))})` for `t = 2^{-k}`, `k = 4..=12`.
    pub samples: Vec<(f64, f64)>,
    pub reference: f64,
    pub monotone: bool,
    /// Last error over the reference norm.
    pub final_ratio: f64,
    /// Fitted power of `t` in the error decay; `None` for zero data.
    pub rate: Option<f64>,
    pub pass: bool,
    pub morrey: MorreyTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MorreyTrace {
    /// Not requested.
    Skipped,
    /// One-cell translation modulus too large relative to the norm: the
    /// datum is not resolved as an element of the dotted space.
    NotApplicable { modulus: f64 },
    Checked { samples: Vec<(f64, f64)>, final_ratio: f64, pass: bool },
}

pub const TRACE_THRESHOLD: f64 = 1e-3;
/// Largest relative one-cell translation modulus for the Morrey trace.
pub const DOTTED_MODULUS: f64 = 0.05;

pub fn trace_check(
    sg: &Semigroup,
    u0: &GridFunction,
    p: Exponent,
    window: f64,
    morrey: Option<&MorreyParams>,
) -> Result<TraceCheck> {
    let times: Vec<f64> = (4..=12).map(|k| 0.5f64.powi(k)).collect();
    let states = sg.apply_many(u0, &times)?;
    let origin = vec![0.0; u0.n_dim];
    let reference = lp_ball_norm(u0, &origin, window, p)?;
    let errs: Vec<f64> = states
        .iter()
        .map(|u| lp_ball_norm(&u.sub(u0)?, &origin, window, p))
        .collect::<Result<_>>()?;
    let monotone = errs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let last = *errs.last().unwrap();
    let final_ratio = if reference > 0.0 { last / reference } else { 0.0 };
    let rate = if errs.iter().all(|&e| e > 0.0) {
        let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        Some(least_squares(&xs, &ys)?.slope)
    } else {
        None
    };
    let morrey = match morrey {
        None => MorreyTrace::Skipped,
        Some(mp) => {
            let ladder = RadiusLadder::standard(u0);
            let norm = morrey_norm(u0, mp, &ladder);
            let shift = vec![1i64; u0.n_dim];
            let modulus = if norm > 0.0 {
                translation_modulus(u0, mp, &shift, &ladder)? / norm
            } else {
                0.0
            };
            if modulus > DOTTED_MODULUS {
                MorreyTrace::NotApplicable { modulus }
            } else {
                let me: Vec<f64> = states
                    .iter()
                    .map(|u| Ok(morrey_norm(&u.sub(u0)?, mp, &ladder)))
                    .collect::<Result<_>>()?;
                let fr = if norm > 0.0 { me.last().unwrap() / norm } else { 0.0 };
                MorreyTrace::Checked {
                    samples: times.iter().cloned().zip(me).collect(),
                    final_ratio: fr,
                    pass: fr < TRACE_THRESHOLD,
                }
            }
        }
    };
    Ok(TraceCheck {
        samples: times.into_iter().zip(errs).collect(),
        reference,
        monotone,
        final_ratio,
        rate,
        pass: final_ratio < TRACE_THRESHOLD,
        morrey,
    })
}

// ---------------------------------------------------------------------------
// Pseudoresolvent identity

/// `(int_0^1 e^{z s}(1 - s) ds, int_0^1 e^{z s} s ds)`.
fn linear_laplace_weights(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.1 {
        // sum z^k / (k+2)! and sum (k+1) z^k / (k+2)!
        let (mut a, mut b) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut zk = Complex64::new(1.0, 0.0);
        let mut fact = 2.0;
        for k in 0..12 {
            a += zk / fact;
            b += zk * (k as f64 + 1.0) / fact;
            zk *= z;
            fact *= k as f64 + 3.0;
        }
        return (a, b);
    }
    let e = z.exp();
    let z2 = z * z;
    ((e - 1.0 - z) / z2, (e * (z - 1.0) + 1.0) / z2)
}

/// Streaming `int_0^T e^{lambda t} u(t) dt` for `u` piecewise linear between
/// the visited nodes.
pub struct LaplaceAccumulator {
    lambda: Complex64,
    acc: Vec<Complex64>,
    prev: Option<(f64, GridFunction)>,
    template: Option<GridFunction>,
}

impl LaplaceAccumulator {
    pub fn new(lambda: Complex64) -> Self {
        Self {
            lambda,
            acc: Vec::new(),
            prev: None,
            template: None,
        }
    }

    pub fn push(&mut self, t: f64, u: &GridFunction) {
        if let Some((t0, u0)) = &self.prev {
            let dt = t - t0;
            let (wa, wb) = linear_laplace_weights(self.lambda * dt);
            let scale = (self.lambda * t0).exp() * dt;
            let (ca, cb) = (scale * wa, scale * wb);
            for (a, (x, y)) in self.acc.iter_mut().zip(u0.values.iter().zip(&u.values)) {
                *a += ca * x + cb * y;
            }
        } else {
            self.acc = vec![Complex64::new(0.0, 0.0); u.len()];
            self.template = Some(u.clone());
        }
        self.prev = Some((t, u.clone()));
    }

    /// Last visited time.
    pub fn horizon(&self) -> f64 {
        self.prev.as_ref().map(|p| p.0).unwrap_or(0.0)
    }

    pub fn finish(self) -> Result<ComplexField> {
        let t = self
            .template
            .ok_or_else(|| Error::InvalidInput("no samples pushed".into()))?;
        let mut f = ComplexField::from_real(&t);
        f.values = self.acc;
        Ok(f)
    }
}

fn complex_mul(v: &GridFunction, f: &ComplexField) -> ComplexField {
    let mut out = f.clone();
    for (z, w) in out.values.iter_mut().zip(&v.values) {
        *z *= *w;
    }
    out
}

fn complex_add(a: &ComplexField, b: &ComplexField) -> ComplexField {
    let mut out = a.clone();
    for (z, w) in out.values.iter_mut().zip(&b.values) {
        *z += *w;
    }
    out
}

/// Both sides of `F(lambda) u0 = G(lambda) u0 + sum_i G(lambda) P_i F(lambda) u0`.
#[derive(Debug, Clone)]
pub struct ResolventCheck {
    pub lambda: Complex64,
    /// `||F - G u0 - sum G P_i F||_inf / ||F||_inf`.
    pub residual: f64,
    /// For a single constant potential `c`: `||F(lambda) - G(lambda + c) u0|| / ||F||`.
    pub shift_residual: Option<f64>,
    /// Largest half-density error estimate among the `G` evaluations.
    pub quadrature_tolerance: f64,
    /// Truncation horizon of the Laplace integral of the trajectory.
    pub horizon: f64,
    /// `e^{(Re lambda + omega) T}`: relative size of the dropped tail.
    pub tail: f64,
}

/// Laplace transforms use `e^{lambda t}` with `Re lambda < -(omega + margin)`.
pub fn pseudoresolvent_identity(
    solver: &DuhamelSolver<'_>,
    u0: &GridFunction,
    gamma: &ScaleIndex,
    lambda: Complex64,
    omega: f64,
    margin: f64,
    tail: f64,
) -> Result<ResolventCheck> {
    if !(lambda.re < -(omega + margin)) {
        return Err(Error::Hypothesis(format!(
            "Re lambda = {} is not below -(omega + margin) = {}",
            lambda.re,
            -(omega + margin)
        )));
    }
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::InvalidInput("tail must lie in (0, 1)".into()));
    }
    let decay = -(lambda.re + omega);
    let total = tail.ln().abs() / decay;
    let mut lap = LaplaceAccumulator::new(lambda);
    solver.long_visit(u0, gamma, total, |t, u| lap.push(t, u))?;
    let horizon = lap.horizon();
    let f = lap.finish()?;
    let sg = solver.semigroup;
    let gu = sg.pseudoresolvent(&ComplexField::from_real(u0), lambda, margin)?;
    let mut rhs = gu.field.clone();
    let mut qtol = gu.tolerance;
    for v in &solver.potentials {
        let pf = complex_mul(&v.values, &f);
        let g = sg.pseudoresolvent(&pf, lambda, margin)?;
        qtol = qtol.max(g.tolerance);
        rhs = complex_add(&rhs, &g.field);
    }
    let scale = f.max_abs();
    let residual = f.sub(&rhs).max_abs() / scale;
    let shift_residual = match solver.potentials.as_slice() {
        [v] => match v.spec.realization {
            Realization::Constant(c) => {
                let g = sg.pseudoresolvent(&ComplexField::from_real(u0), lambda + c, margin)?;
                Some(f.sub(&g.field).max_abs() / scale)
            }
            _ => None,
        },
        _ => None,
    };
    Ok(ResolventCheck {
        lambda,
        residual,
        shift_residual,
        quadrature_tolerance: qtol,
        horizon,
        tail: (-decay * horizon).exp(),
    })
}

/// Whether `smooths_to` agrees with the raw `(p, l)` smoothing inequalities;
/// exposed for property tests.
pub fn smoothing_agrees(g: &ScaleIndex, gp: &ScaleIndex, dims: &ProblemDims) -> bool {
    smooths_to(g, gp) == raw_smooths(Raw::of(g, dims), Raw::of(gp, dims), &Slack::EXACT)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d111() -> ProblemDims {
        ProblemDims::new(1, 1, 1.0).unwrap()
    }

    #[test]
    fn fitter_recovers_exact_power() {
        let ts = log_grid(1e-3, 1e-1, 9);
        let ns: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-0.5)).collect();
        let f = fit_decay(&ts, &ns, -0.5, 0.03).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-10);
        assert!(f.pass && f.std_err < 1e-10);
    }

    #[test]
    fn fitter_preconditions() {
        let ts = log_grid(1e-2, 1e-1, 9);
        assert!(fit_decay(&ts, &[1.0; 9], 0.0, 0.1).is_err());
        let ts = log_grid(1e-3, 1e-1, 7);
        assert!(fit_decay(&ts, &[1.0; 7], 0.0, 0.1).is_err());
        let ts = log_grid(1e-3, 1e-1, 8);
        let mut ns = vec![1.0; 8];
        ns[3] = 0.0;
        assert!(fit_decay(&ts, &ns, 0.0, 0.1).is_err());
    }

    #[test]
    fn hypotheses_name_the_inequality() {
        let d = d111();
        let from = MorreyParams::finite(1.0, 0.5, &d).unwrap();
        let bad = MorreyParams::finite(1.0, 1.0, &d).unwrap();
        let e = smoothing_hypotheses(&from, &bad).unwrap_err().to_string();
        assert!(e.contains("s/q"), "{e}");
        let bad = MorreyParams::finite(4.0, 1.0, &d).unwrap();
        let e = smoothing_hypotheses(&from, &bad).unwrap_err().to_string();
        assert!(e.contains("s = 1 > l"), "{e}");
        assert!(smoothing_hypotheses(&from, &MorreyParams::infinity(&d)).is_ok());
    }

    #[test]
    fn laplace_weights_series_and_closed_form_meet() {
        for z in [Complex64::new(0.0999, 0.0), Complex64::new(0.0, 0.0999), Complex64::new(-0.07, 0.07)] {
            let (a, b) = linear_laplace_weights(z);
            let (e, z2) = (z.exp(), z * z);
            let (ca, cb) = ((e - 1.0 - z) / z2, (e * (z - 1.0) + 1.0) / z2);
            assert!((a - ca).norm() < 1e-12 && (b - cb).norm() < 1e-12, "{z}");
        }
    }

    #[test]
    fn laplace_of_exponential() {
        // u(t) = e^{-t}: int_0^inf e^{lambda t} e^{-t} dt = 1 / (1 - lambda)
        let lambda = Complex64::new(-2.0, 1.0);
        let g = GridFunction::zeros(1, 8, 1.0).unwrap();
        let mut acc = LaplaceAccumulator::new(lambda);
        for k in 0..=20000 {
            let t = k as f64 * 1e-3;
            acc.push(t, &g.with_values(vec![(-t).exp(); 8]));
        }
        let f = acc.finish().unwrap();
        let want = 1.0 / (1.0 - lambda);
        assert!((f.values[0] - want).norm() < 1e-6, "{}", f.values[0]);
    }

    #[test]
    fn growth_rate_of_pure_exponential() {
        let s: Vec<(f64, f64)> = (0..=24).map(|k| (0.25 * k as f64, (1.7 * 0.25 * k as f64).exp())).collect();
        let g = growth_rate(&s, (3.0, 6.0)).unwrap();
        assert!((g.omega - 1.7).abs() < 1e-10 && g.exponential);
        let s: Vec<(f64, f64)> = (1..=24).map(|k| (0.25 * k as f64, (0.25 * k as f64).powf(-0.5))).collect();
        let g = growth_rate(&s, (3.0, 6.0)).unwrap();
        assert!(g.omega.abs() < 0.2);
    }

    #[test]
    fn oracle_examples() {
        let d = d111();
        let o = RegionOracle::new(d, 200).unwrap();
        assert!(RegionOracle::new(d, 49).is_err());
        let class = PotentialClass::new(MorreyParams::finite(2.0, 0.5, &d).unwrap(), &d);
        let inside = ScaleIndex::new(0.3, 0.03, &d).unwrap();
        assert!(o.find_witness(&inside, &[class]).is_some());
        // slope 0.4 > slope(gamma0) = 0.25
        let outside = ScaleIndex::new(0.5, 0.2, &d).unwrap();
        assert!(o.find_witness(&outside, &[class]).is_none());
        assert_eq!(o.find_witness(&ScaleIndex::ZERO, &[class]), Some(ScaleIndex::ZERO));
    }

    #[test]
    fn cd_linear_family() {
        let dist = [0.1, 0.05, 0.025];
        let diffs: Vec<f64> = dist.iter().map(|x| 2.0 * x + x * x).collect();
        let r = continuous_dependence_check(&dist, &diffs, 0.1).unwrap();
        assert!(r.fit.pass && r.bounded);
    }
}
