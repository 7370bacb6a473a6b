//! Index calculus for the Morrey scale.
//!
//! A Morrey space `M^{p,l}` is encoded by the point `(1/p, l/(2 m mu p))`
//! of the triangle `J`. Smoothing relations, admissibility sets and the
//! two-potential regions are all decided in these coordinates.

use std::fmt;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Absolute band applied to every inequality in the region predicates.
pub const REGION_TOL: f64 = 1e-12;

fn le(a: f64, b: f64) -> bool {
    a <= b + REGION_TOL
}

fn lt(a: f64, b: f64) -> bool {
    a < b - REGION_TOL
}

/// Spatial dimension `N`, order parameter `m` (operator order `2m`) and
/// fractional power `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemDims {
    pub n_dim: usize,
    pub m: u32,
    pub mu: f64,
}

impl ProblemDims {
    pub fn new(n_dim: usize, m: u32, mu: f64) -> Result<Self> {
        if n_dim == 0 {
            return Err(Error::InvalidInput("N must be >= 1".into()));
        }
        if m == 0 {
            return Err(Error::InvalidInput("m must be >= 1".into()));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::InvalidInput(format!("mu = {mu} outside (0, 1]")));
        }
        Ok(Self { n_dim, m, mu })
    }

    /// `2 m mu`.
    pub fn scale(&self) -> f64 {
        2.0 * self.m as f64 * self.mu
    }

    /// Upper edge `N / (2 m mu)` of the triangle in the second coordinate.
    pub fn gamma2_max(&self) -> f64 {
        self.n_dim as f64 / self.scale()
    }
}

/// Integrability exponent in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    /// `1/p`, zero for `p = inf`.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinite => 0.0,
        }
    }

    /// Holder conjugate `p'`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinite => Exponent::Finite(1.0),
            Exponent::Finite(1.0) => Exponent::Infinite,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    pub fn from_recip(r: f64) -> Exponent {
        if r <= 0.0 {
            Exponent::Infinite
        } else {
            Exponent::Finite(1.0 / r)
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Exponent::Infinite);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::InvalidInput(format!("cannot parse exponent '{t}'")))?;
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinite)
        } else {
            Ok(Exponent::Finite(p))
        }
    }
}

/// Morrey parameters `(p, l)` with `1 <= p <= inf`, `0 < l <= N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorreyParams {
    pub p: Exponent,
    pub ell: f64,
}

impl MorreyParams {
    pub fn new(p: Exponent, ell: f64, dims: &ProblemDims) -> Result<Self> {
        if let Exponent::Finite(v) = p {
            if !(v >= 1.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("p = {v} outside [1, inf]")));
            }
        }
        if !(ell > 0.0) || ell > dims.n_dim as f64 + REGION_TOL {
            return Err(Error::InvalidInput(format!(
                "ell = {ell} outside (0, {}]",
                dims.n_dim
            )));
        }
        Ok(Self { p, ell })
    }

    pub fn finite(p: f64, ell: f64, dims: &ProblemDims) -> Result<Self> {
        Self::new(Exponent::Finite(p), ell, dims)
    }

    /// `L^inf`, carried with the sentinel `l = N`.
    pub fn infinity(dims: &ProblemDims) -> Self {
        Self {
            p: Exponent::Infinite,
            ell: dims.n_dim as f64,
        }
    }

    /// `l / p`, zero for `p = inf`.
    pub fn ell_over_p(&self) -> f64 {
        self.ell * self.p.recip()
    }
}

impl fmt::Display for MorreyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M^{{{},{}}}", self.p, self.ell)
    }
}

/// A point `(gamma1, gamma2)` of the triangle `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleIndex {
    pub g1: f64,
    pub g2: f64,
}

impl ScaleIndex {
    pub const ZERO: ScaleIndex = ScaleIndex { g1: 0.0, g2: 0.0 };

    /// Checked constructor; rejects points outside `J`.
    pub fn new(g1: f64, g2: f64, dims: &ProblemDims) -> Result<Self> {
        let s = Self { g1, g2 };
        if s.in_triangle(dims) {
            Ok(s)
        } else {
            Err(Error::OutsideTriangle(g1, g2))
        }
    }

    /// Unchecked constructor for intermediate points such as `alpha + gamma0`.
    pub const fn raw(g1: f64, g2: f64) -> Self {
        Self { g1, g2 }
    }

    pub fn is_zero(&self) -> bool {
        self.g1.abs() <= REGION_TOL && self.g2.abs() <= REGION_TOL
    }

    /// `gamma2 / gamma1`, with the slope of `(0,0)` fixed to zero.
    pub fn slope(&self) -> f64 {
        if self.is_zero() || self.g1 <= 0.0 {
            0.0
        } else {
            self.g2 / self.g1
        }
    }

    pub fn in_triangle(&self, dims: &ProblemDims) -> bool {
        if !(self.g1.is_finite() && self.g2.is_finite()) {
            return false;
        }
        if self.g1 == 0.0 && self.g2 == 0.0 {
            return true;
        }
        let gmax = dims.gamma2_max();
        self.g1 > 0.0
            && le(self.g1, 1.0)
            && self.g2 > 0.0
            && le(self.g2, gmax)
            && le(self.g2 / self.g1, gmax)
    }

    pub fn add(&self, other: &ScaleIndex) -> ScaleIndex {
        ScaleIndex::raw(self.g1 + other.g1, self.g2 + other.g2)
    }

    /// Point `(1 - s) self + s other`.
    pub fn lerp(&self, other: &ScaleIndex, s: f64) -> ScaleIndex {
        ScaleIndex::raw(
            self.g1 + s * (other.g1 - self.g1),
            self.g2 + s * (other.g2 - self.g2),
        )
    }
}

impl fmt::Display for ScaleIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.g1, self.g2)
    }
}

/// Morrey class of a potential and its derived index `gamma0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialClass {
    pub params: MorreyParams,
    pub gamma0: ScaleIndex,
    /// `kappa0 = l0 / (2 m mu p0)`.
    pub kappa: f64,
    pub admissible: bool,
}

impl PotentialClass {
    pub fn new(params: MorreyParams, dims: &ProblemDims) -> Self {
        let gamma0 = to_index(&params, dims);
        let kappa = gamma0.g2;
        Self {
            params,
            gamma0,
            kappa,
            admissible: kappa < 1.0,
        }
    }

    /// Class of a bounded potential, `gamma0 = (0,0)`.
    pub fn bounded(dims: &ProblemDims) -> Self {
        Self::new(MorreyParams::infinity(dims), dims)
    }

    fn require_admissible(&self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::Inadmissible(self.kappa))
        }
    }
}

pub fn to_index(mp: &MorreyParams, dims: &ProblemDims) -> ScaleIndex {
    match mp.p {
        Exponent::Infinite => ScaleIndex::ZERO,
        Exponent::Finite(p) => ScaleIndex::raw(1.0 / p, mp.ell / (dims.scale() * p)),
    }
}

/// Inverse of [`to_index`]; `(0,0)` returns `p = inf` with the sentinel `l = N`.
pub fn from_index(gamma: &ScaleIndex, dims: &ProblemDims) -> Result<MorreyParams> {
    if !gamma.in_triangle(dims) {
        return Err(Error::OutsideTriangle(gamma.g1, gamma.g2));
    }
    if gamma.is_zero() {
        return Ok(MorreyParams::infinity(dims));
    }
    let p = 1.0 / gamma.g1;
    let ell = (dims.scale() * gamma.g2 / gamma.g1).min(dims.n_dim as f64);
    Ok(MorreyParams {
        p: Exponent::Finite(p),
        ell,
    })
}

/// `r(gamma) = -gamma2`.
pub fn regularity(gamma: &ScaleIndex) -> f64 {
    -gamma.g2
}

/// `d(target, source) = r(target) - r(source)`: the power of `t` lost going
/// from `source` to `target`.
pub fn smoothing_distance(target: &ScaleIndex, source: &ScaleIndex) -> f64 {
    regularity(target) - regularity(source)
}

/// Whether the unperturbed semigroup maps `X^gamma` into `X^gamma'`.
pub fn smooths_to(gamma: &ScaleIndex, gamma_p: &ScaleIndex) -> bool {
    if gamma.is_zero() {
        return gamma_p.is_zero();
    }
    le(gamma_p.g2, gamma.g2) && le(gamma_p.slope(), gamma.slope())
}

/// Membership in `J_{gamma0}`.
pub fn sub_triangle_contains(gamma: &ScaleIndex, class: &PotentialClass) -> bool {
    if class.gamma0.is_zero() {
        return true;
    }
    le(gamma.slope(), class.gamma0.slope())
}

/// Membership of `gamma` in the existence set `E_alpha`.
pub fn existence_set_contains(gamma: &ScaleIndex, alpha: &ScaleIndex) -> bool {
    le(alpha.g2, gamma.g2) && lt(gamma.g2, alpha.g2 + 1.0) && le(alpha.slope(), gamma.slope())
}

fn check_target(alpha: &ScaleIndex, class: &PotentialClass) -> Result<ScaleIndex> {
    let s = alpha.g1 + class.gamma0.g1;
    if s > 1.0 + REGION_TOL {
        return Err(Error::InvalidTarget(s));
    }
    Ok(alpha.add(&class.gamma0))
}

/// Membership of `gamma'` in the regularity set `R_beta`, `beta = alpha + gamma0`.
pub fn regularity_set_contains(
    gamma_p: &ScaleIndex,
    alpha: &ScaleIndex,
    class: &PotentialClass,
) -> Result<bool> {
    let beta = check_target(alpha, class)?;
    let j0 = 1.0 - class.gamma0.g2;
    Ok(le(gamma_p.g2, beta.g2)
        && le(gamma_p.slope(), beta.slope())
        && lt(alpha.g2 - j0, gamma_p.g2))
}

/// Membership in `Sigma_{alpha,beta} = E_alpha ∩ R_beta`.
pub fn sigma_contains(gamma: &ScaleIndex, alpha: &ScaleIndex, class: &PotentialClass) -> Result<bool> {
    let r = regularity_set_contains(gamma, alpha, class)?;
    Ok(existence_set_contains(gamma, alpha) && r)
}

/// Choice of `alpha` placing `gamma` in `Sigma` for every class at once.
pub fn choose_alpha(gamma: &ScaleIndex, classes: &[PotentialClass]) -> Result<ScaleIndex> {
    if gamma.is_zero() {
        return Ok(ScaleIndex::ZERO);
    }
    let theta = classes
        .iter()
        .map(|c| 1.0 - c.gamma0.g1)
        .fold(1.0_f64, f64::min);
    let alpha = if le(gamma.g1, theta) {
        *gamma
    } else if theta <= REGION_TOL {
        ScaleIndex::ZERO
    } else {
        ScaleIndex::raw(theta, gamma.slope() * theta)
    };
    for c in classes {
        c.require_admissible()?;
        if !sigma_contains(gamma, &alpha, c)? {
            return Err(Error::NoAdmissibleAlpha(gamma.g1, gamma.g2));
        }
    }
    Ok(alpha)
}

/// Nodes on the segment from `gamma` to `gamma'` with `gamma2` dropping by at
/// most `step` per hop; the last hop takes the remainder.
pub fn bootstrap_chain(gamma: &ScaleIndex, gamma_p: &ScaleIndex, step: f64) -> Result<Vec<ScaleIndex>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::InvalidInput(format!("step {step} outside (0,1)")));
    }
    if !smooths_to(gamma, gamma_p) {
        return Err(Error::InvalidInput(format!(
            "{gamma} does not smooth to {gamma_p}"
        )));
    }
    if gamma == gamma_p {
        return Ok(vec![*gamma]);
    }
    let drop = gamma.g2 - gamma_p.g2;
    if drop <= REGION_TOL {
        return Ok(vec![*gamma, *gamma_p]);
    }
    let hops = ((drop / step) - 1e-12).ceil().max(1.0) as usize;
    let mut chain = Vec::with_capacity(hops + 1);
    chain.push(*gamma);
    for j in 1..hops {
        let target2 = gamma.g2 - step * j as f64;
        let s = (gamma.g2 - target2) / drop;
        chain.push(gamma.lerp(gamma_p, s));
    }
    chain.push(*gamma_p);
    Ok(chain)
}

/// `sum_i (c_i Gamma(1 - d_i) norm_i)^{1/(1 - d_i)}`.
pub fn theta_p(entries: &[(f64, f64, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for &(d, norm, c) in entries {
        if !(0.0..1.0).contains(&d) {
            return Err(Error::InvalidInput(format!("d = {d} outside [0,1)")));
        }
        if norm < 0.0 || c <= 0.0 {
            return Err(Error::InvalidInput("norm must be >= 0 and c > 0".into()));
        }
        total += (c * gamma(1.0 - d) * norm).powf(1.0 / (1.0 - d));
    }
    Ok(total)
}

/// `c * norm^{1/(1 - kappa0)}`.
pub fn omega_bound(class: &PotentialClass, norm: f64, c: f64) -> Result<f64> {
    class.require_admissible()?;
    if norm < 0.0 {
        return Err(Error::InvalidInput("norm must be >= 0".into()));
    }
    Ok(c * norm.powf(1.0 / (1.0 - class.kappa)))
}

/// Sum of [`omega_bound`] over several `(class, norm, c)` entries.
pub fn omega_bound_sum(entries: &[(PotentialClass, f64, f64)]) -> Result<f64> {
    entries
        .iter()
        .map(|(cl, n, c)| omega_bound(cl, *n, *c))
        .sum()
}

fn ordered_pair(classes: &[PotentialClass; 2]) -> (PotentialClass, PotentialClass) {
    if classes[0].params.ell <= classes[1].params.ell {
        (classes[0], classes[1])
    } else {
        (classes[1], classes[0])
    }
}

/// Parameter region on which continuous dependence with respect to two
/// potentials holds.
pub fn cd2_region_contains(mp: &MorreyParams, classes: &[PotentialClass; 2], _dims: &ProblemDims) -> bool {
    let (c0, c1) = ordered_pair(classes);
    if !le(mp.ell, c0.params.ell) {
        return false;
    }
    // 1 / (p0' v p1') = 1 - (1/p0 v 1/p1)
    let inv_conj = 1.0 - c0.params.p.recip().max(c1.params.p.recip());
    let lhs = mp.ell * (mp.p.recip() - inv_conj);
    let rhs = c0.params.ell_over_p().min(c1.params.ell_over_p());
    le(lhs, rhs)
}

fn star_constants(classes: &[PotentialClass]) -> (f64, f64) {
    let theta = 1.0 - classes.iter().map(|c| c.gamma0.g1).fold(0.0, f64::max);
    let g = classes
        .iter()
        .map(|c| c.gamma0.g2)
        .fold(f64::INFINITY, f64::min);
    (theta, g)
}

/// Upper boundary `h(gamma1)` of `J*`; infinite for `gamma1 <= theta`.
pub fn boundary_h(g1: f64, classes: &[PotentialClass]) -> f64 {
    let (theta, g) = star_constants(classes);
    if g1 <= theta {
        f64::INFINITY
    } else {
        g + g * theta / (g1 - theta)
    }
}

/// Membership in `J*`: inside every `J_{gamma^i}`, and below `h` once
/// `gamma1` exceeds `theta = 1 - max_i gamma^i_1`.
pub fn star_region_contains(gamma: &ScaleIndex, classes: &[PotentialClass], _dims: &ProblemDims) -> bool {
    if !classes.iter().all(|c| sub_triangle_contains(gamma, c)) {
        return false;
    }
    let (theta, _) = star_constants(classes);
    if le(gamma.g1, theta) {
        return true;
    }
    le(gamma.g2, boundary_h(gamma.g1, classes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Point `x*` on the requested side of `c` whose tangent to the convex `f`
/// passes through `(c, d)`.
#[allow(clippy::too_many_arguments)]
pub fn exterior_tangent<F, Fp, Fpp>(
    f: F,
    fp: Fp,
    fpp: Fpp,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    side: Side,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    Fp: Fn(f64) -> f64,
    Fpp: Fn(f64) -> f64,
{
    if !(a < c && c < b) {
        return Err(Error::InvalidInput(format!("need a < c < b, got {a}, {c}, {b}")));
    }
    let t = |x: f64| f(x) + fp(x) * (c - x);
    let fc = f(c);
    let tol = 1e-12 * (1.0 + d.abs());
    if d >= fc {
        return Err(Error::NoTangent(format!("d = {d} >= f(c) = {fc}")));
    }
    // t is increasing on [a, c) and decreasing on (c, b].
    let (mut lo, mut hi) = match side {
        Side::Left => (a, c),
        Side::Right => (c, b),
    };
    let far = if side == Side::Left { a } else { b };
    let t_far = t(far);
    if t_far > d + tol {
        return Err(Error::NoTangent(format!("t({far}) = {t_far} > d = {d}")));
    }
    if (t_far - d).abs() <= tol {
        return Ok(far);
    }
    // g(x) = t(x) - d changes sign across [lo, hi]; g < 0 at `far`.
    let g = |x: f64| t(x) - d;
    let neg_at_lo = side == Side::Left;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gx = g(x);
        if gx.abs() <= tol {
            return Ok(x);
        }
        if (gx < 0.0) == neg_at_lo {
            lo = x;
        } else {
            hi = x;
        }
        let slope = fpp(x) * (c - x);
        let newton = if slope != 0.0 { x - gx / slope } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * (1.0 + x.abs()) {
            break;
        }
    }
    if g(x).abs() <= tol {
        Ok(x)
    } else {
        Err(Error::NoTangent(format!(
            "root solve stalled at x = {x}, residual {}",
            g(x)
        )))
    }
}

/// Flags, chosen `alpha` and reasons for one query against a set of classes.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub gamma: ScaleIndex,
    pub in_sub_triangle: bool,
    pub in_existence: bool,
    pub in_regularity: bool,
    pub in_sigma: bool,
    pub in_star: Option<bool>,
    pub alpha: Option<ScaleIndex>,
    pub chain: Vec<ScaleIndex>,
    pub reasons: Vec<String>,
}

/// Evaluates every predicate for `gamma` with `alpha` from [`choose_alpha`].
/// `target` optionally requests a bootstrap chain to a smoother index.
pub fn region_report(
    gamma: &ScaleIndex,
    classes: &[PotentialClass],
    dims: &ProblemDims,
    target: Option<&ScaleIndex>,
) -> RegionReport {
    let mut reasons = Vec::new();
    let in_sub = classes.iter().all(|c| sub_triangle_contains(gamma, c));
    if !in_sub {
        let worst = classes
            .iter()
            .map(|c| c.gamma0.slope())
            .fold(f64::INFINITY, f64::min);
        reasons.push(format!("slope {:.6} > {:.6}", gamma.slope(), worst));
    }
    for c in classes {
        if !c.admissible {
            reasons.push(format!("kappa0 {:.6} >= 1", c.kappa));
        }
    }
    let alpha = if in_sub { choose_alpha(gamma, classes).ok() } else { None };
    let (mut e, mut r) = (false, false);
    if let Some(a) = alpha {
        e = existence_set_contains(gamma, &a);
        r = classes
            .iter()
            .all(|c| regularity_set_contains(gamma, &a, c).unwrap_or(false));
        reasons.push(format!("alpha={a}"));
    } else if in_sub {
        reasons.push("no admissible alpha".into());
    }
    let in_star = if classes.len() == 2 {
        let s = star_region_contains(gamma, classes, dims);
        if !s && in_sub {
            reasons.push(format!(
                "gamma2 {:.6} > h = {:.6}",
                gamma.g2,
                boundary_h(gamma.g1, classes)
            ));
        }
        Some(s)
    } else {
        None
    };
    let chain = match target {
        Some(t) => bootstrap_chain(gamma, t, 0.5).unwrap_or_default(),
        None => Vec::new(),
    };
    RegionReport {
        gamma: *gamma,
        in_sub_triangle: in_sub,
        in_existence: e,
        in_regularity: r,
        in_sigma: e && r,
        in_star,
        alpha,
        chain,
        reasons,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d111() -> ProblemDims {
        ProblemDims::new(1, 1, 1.0).unwrap()
    }

    fn class_from_gamma0(g1: f64, g2: f64, dims: &ProblemDims) -> PotentialClass {
        let p = MorreyParams::finite(1.0 / g1, dims.scale() * g2 / g1, dims).unwrap();
        PotentialClass::new(p, dims)
    }

    #[test]
    fn index_examples() {
        let d = d111();
        let g = to_index(&MorreyParams::finite(1.0, 1.0, &d).unwrap(), &d);
        assert_eq!(g, ScaleIndex::raw(1.0, 0.5));
        assert!(to_index(&MorreyParams::infinity(&d), &d).is_zero());
        let d2 = ProblemDims::new(2, 1, 1.0).unwrap();
        let g = to_index(&MorreyParams::finite(2.0, 2.0, &d2).unwrap(), &d2);
        assert_eq!(g, ScaleIndex::raw(0.5, 0.5));
        let mp = from_index(&ScaleIndex::raw(0.5, 0.25), &d).unwrap();
        assert_eq!(mp.p, Exponent::Finite(2.0));
        assert!((mp.ell - 1.0).abs() < 1e-15);
        assert!(from_index(&ScaleIndex::ZERO, &d).unwrap().p.is_infinite());
        assert!(from_index(&ScaleIndex::raw(0.5, 0.9), &d).is_err());
    }

    #[test]
    fn distance_examples() {
        let d = d111();
        let src = to_index(&MorreyParams::finite(1.0, 1.0, &d).unwrap(), &d);
        assert_eq!(smoothing_distance(&ScaleIndex::ZERO, &src), 0.5);
        assert_eq!(regularity(&ScaleIndex::ZERO), 0.0);
        assert_eq!(smoothing_distance(&src, &src), 0.0);
    }

    #[test]
    fn smoothing_examples() {
        let g = ScaleIndex::raw(1.0, 0.5);
        assert!(smooths_to(&g, &ScaleIndex::raw(0.5, 0.25)));
        assert!(!smooths_to(&g, &ScaleIndex::raw(0.5, 0.4)));
        assert!(smooths_to(&g, &g));
        assert!(smooths_to(&ScaleIndex::ZERO, &ScaleIndex::ZERO));
        assert!(!smooths_to(&ScaleIndex::ZERO, &g));
    }

    #[test]
    fn alpha_examples() {
        let d = ProblemDims::new(2, 1, 1.0).unwrap();
        let c = class_from_gamma0(0.5, 0.3, &d);
        let a = choose_alpha(&ScaleIndex::raw(0.2, 0.1), &[c]).unwrap();
        assert_eq!(a, ScaleIndex::raw(0.2, 0.1));
        let a = choose_alpha(&ScaleIndex::raw(0.8, 0.4), &[c]).unwrap();
        assert!((a.g1 - 0.5).abs() < 1e-15 && (a.g2 - 0.25).abs() < 1e-15);
        assert_eq!(choose_alpha(&ScaleIndex::ZERO, &[c]).unwrap(), ScaleIndex::ZERO);
    }

    #[test]
    fn sigma_examples() {
        let d = ProblemDims::new(2, 1, 1.0).unwrap();
        let c = class_from_gamma0(0.5, 0.3, &d);
        let g = ScaleIndex::raw(0.3, 0.15);
        assert!(sigma_contains(&g, &g, &c).unwrap());
        let alpha = ScaleIndex::raw(0.3, 0.15);
        let above = ScaleIndex::raw(0.3, 0.15 + 0.3 + 1e-6);
        assert!(!regularity_set_contains(&above, &alpha, &c).unwrap());
        assert!(sigma_contains(&ScaleIndex::ZERO, &ScaleIndex::ZERO, &c).unwrap());
        assert!(regularity_set_contains(&g, &ScaleIndex::raw(0.6, 0.1), &c).is_err());
    }

    #[test]
    fn chain_examples() {
        let d = ProblemDims::new(2, 1, 0.5).unwrap();
        let g = ScaleIndex::new(1.0, 2.0, &d).unwrap();
        let gp = ScaleIndex::new(0.15, 0.3, &d).unwrap();
        let ch = bootstrap_chain(&g, &gp, 0.5).unwrap();
        let g2: Vec<f64> = ch.iter().map(|x| x.g2).collect();
        let want = [2.0, 1.5, 1.0, 0.5, 0.3];
        assert_eq!(g2.len(), want.len());
        for (a, b) in g2.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(bootstrap_chain(&g, &g, 0.5).unwrap(), vec![g]);
        let close = ScaleIndex::raw(0.9, 1.8);
        assert_eq!(bootstrap_chain(&g, &close, 0.5).unwrap().len(), 2);
    }

    #[test]
    fn exponential_type_examples() {
        assert!((theta_p(&[(0.0, 3.0, 1.0)]).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(theta_p(&[(0.3, 0.0, 1.0), (0.0, 0.0, 2.0)]).unwrap(), 0.0);
        let norm = 2.0 / gamma(0.5);
        assert!((theta_p(&[(0.5, norm, 1.0)]).unwrap() - 4.0).abs() < 1e-12);
        assert!(theta_p(&[(1.0, 1.0, 1.0)]).is_err());

        let d = d111();
        let half = PotentialClass::new(MorreyParams::finite(1.0, 1.0, &d).unwrap(), &d);
        assert_eq!(half.kappa, 0.5);
        assert!((omega_bound(&half, 2.0, 1.0).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(omega_bound(&half, 0.0, 1.0).unwrap(), 0.0);
        let bounded = PotentialClass::bounded(&d);
        assert_eq!(omega_bound(&bounded, 5.0, 1.0).unwrap(), 5.0);
        let d2 = ProblemDims::new(2, 1, 0.5).unwrap();
        let critical = PotentialClass::new(MorreyParams::finite(1.0, 1.0, &d2).unwrap(), &d2);
        assert!(!critical.admissible);
        assert!(omega_bound(&critical, 1.0, 1.0).is_err());
    }

    #[test]
    fn cd2_examples() {
        let d = ProblemDims::new(2, 1, 1.0).unwrap();
        let c = PotentialClass::new(MorreyParams::finite(2.0, 1.0, &d).unwrap(), &d);
        let q = MorreyParams::finite(2.0, 1.0, &d).unwrap();
        assert!(cd2_region_contains(&q, &[c, c], &d));
        let q1 = MorreyParams::finite(1.0, 1.0, &d).unwrap();
        assert!(cd2_region_contains(&q1, &[c, c], &d));
        // second class lowers l/p to 0.4 while p0' v p1' stays 2
        let c4 = PotentialClass::new(MorreyParams::finite(2.5, 1.0, &d).unwrap(), &d);
        assert!(!cd2_region_contains(&q1, &[c, c4], &d));
        assert!(!cd2_region_contains(&q1, &[c4, c], &d));
    }

    #[test]
    fn star_examples() {
        let d = ProblemDims::new(2, 1, 1.0).unwrap();
        let c0 = class_from_gamma0(0.5, 0.1, &d);
        let c1 = class_from_gamma0(0.8, 0.6, &d);
        let cls = [c0, c1];
        // theta = 0.2, g = 0.1
        assert!(star_region_contains(&ScaleIndex::raw(0.2, 0.04), &cls, &d));
        assert!((boundary_h(1.0, &cls) - 0.1 / 0.8).abs() < 1e-15);
        assert!(boundary_h(0.19, &cls).is_infinite());
        assert!(!star_region_contains(&ScaleIndex::raw(1.0, 0.15), &cls, &d));
        assert!(star_region_contains(&ScaleIndex::raw(1.0, 0.12), &cls, &d));
    }

    #[test]
    fn tangent_examples() {
        let f = |x: f64| x * x;
        let fp = |x: f64| 2.0 * x;
        let fpp = |_: f64| 2.0;
        let r = exterior_tangent(f, fp, fpp, -2.0, 2.0, 0.0, -1.0, Side::Right).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let l = exterior_tangent(f, fp, fpp, -2.0, 2.0, 0.0, -1.0, Side::Left).unwrap();
        assert!((l + 1.0).abs() < 1e-12);
        assert!(exterior_tangent(f, fp, fpp, -2.0, 2.0, 0.0, 0.0, Side::Left).is_err());
        assert!(exterior_tangent(f, fp, fpp, -0.5, 0.5, 0.0, -1.0, Side::Right).is_err());
    }
}
