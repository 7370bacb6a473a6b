//! Discrete Morrey, uniform-Lebesgue and Morrey-measure norms.
//!
//! The supremum over balls is taken over a geometric radius ladder and a
//! strided set of centers, with periodic distance on the box. The result is a
//! lower bound for the continuous supremum.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::scale_index::{Exponent, MorreyParams, ProblemDims};

/// Radii and center stride used to discretize the supremum over balls.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusLadder {
    pub radii: Vec<f64>,
    pub stride: usize,
}

impl RadiusLadder {
    /// `2h, 2h*ratio, ...` up to `L`, every `stride`-th grid point as center.
    pub fn geometric(grid: &GridFunction, ratio: f64, stride: usize) -> Result<Self> {
        if !(ratio > 1.0) || stride == 0 {
            return Err(Error::InvalidInput("ladder ratio must exceed 1, stride >= 1".into()));
        }
        let (rmin, rmax) = (2.0 * grid.spacing(), grid.half_width);
        let mut radii = Vec::new();
        let mut r = rmin;
        while r <= rmax * (1.0 + 1e-12) {
            radii.push(r.min(rmax));
            r *= ratio;
        }
        Ok(Self { radii, stride })
    }

    /// Ratio `sqrt 2`, stride 4.
    pub fn standard(grid: &GridFunction) -> Self {
        Self::geometric(grid, std::f64::consts::SQRT_2, 4).expect("standard ladder")
    }

    pub fn custom(grid: &GridFunction, radii: Vec<f64>, stride: usize) -> Result<Self> {
        let h = grid.spacing();
        if stride == 0 || radii.is_empty() {
            return Err(Error::InvalidInput("empty ladder".into()));
        }
        for &r in &radii {
            if r < 2.0 * h * (1.0 - 1e-12) || r > grid.half_width * (1.0 + 1e-12) {
                return Err(Error::UnderResolved(format!(
                    "radius {r} outside [2h, L] = [{}, {}]",
                    2.0 * h,
                    grid.half_width
                )));
            }
        }
        Ok(Self { radii, stride })
    }

    /// Ladder with twice as many radii (ratio square-rooted) and half the stride.
    pub fn refined(&self, grid: &GridFunction) -> Self {
        let ratio = if self.radii.len() > 1 {
            (self.radii[1] / self.radii[0]).sqrt()
        } else {
            std::f64::consts::SQRT_2.sqrt()
        };
        Self::geometric(grid, ratio, (self.stride / 2).max(1)).expect("refined ladder")
    }
}

/// Row prefix sums of `|phi|^p` over a doubled period, for O(1) segment sums.
struct BallSums<'a> {
    grid: &'a GridFunction,
    prefix: Vec<f64>,
}

impl<'a> BallSums<'a> {
    fn new(grid: &'a GridFunction, p: f64) -> Self {
        let n = grid.n;
        let rows = if grid.n_dim == 1 { 1 } else { n };
        let w = 2 * n + 1;
        let mut prefix = vec![0.0; rows * w];
        for r in 0..rows {
            let row = &grid.values[r * n..(r + 1) * n];
            let pr = &mut prefix[r * w..(r + 1) * w];
            let mut acc = 0.0;
            for j in 0..2 * n {
                acc += row[j % n].abs().powf(p);
                pr[j + 1] = acc;
            }
        }
        Self { grid, prefix }
    }

    fn segment(&self, row: usize, center: usize, half: usize) -> f64 {
        let n = self.grid.n;
        let w = 2 * n + 1;
        let pr = &self.prefix[row * w..(row + 1) * w];
        if 2 * half + 1 >= n {
            return pr[n];
        }
        let start = (center + n - half) % n;
        pr[start + 2 * half + 1] - pr[start]
    }

    /// Radius of the continuous ball with the same volume as the discrete one.
    fn effective_radius(&self, r: f64) -> f64 {
        let g = self.grid;
        let h = g.spacing();
        let n = g.n;
        let k = ((r / h) * (1.0 + 1e-12)).floor() as i64;
        if g.n_dim == 1 {
            return (2 * k + 1).min(n as i64) as f64 * h / 2.0;
        }
        let half_n = (n / 2) as i64;
        let mut count = 0usize;
        for di in (-k).max(-half_n)..=k.min(half_n - 1) {
            let rem = r * r - (di as f64 * h).powi(2);
            if rem >= 0.0 {
                let kj = ((rem.sqrt() / h) * (1.0 + 1e-12)).floor() as usize;
                count += (2 * kj + 1).min(n);
            }
        }
        (count as f64 * h * h / std::f64::consts::PI).sqrt()
    }

    /// `sum |phi|^p h^N` over the periodic ball of radius `r` at grid center.
    fn ball(&self, ci: usize, cj: usize, r: f64) -> f64 {
        let g = self.grid;
        let h = g.spacing();
        let n = g.n;
        let k = ((r / h) * (1.0 + 1e-12)).floor() as i64;
        let s = if g.n_dim == 1 {
            self.segment(0, ci, k as usize)
        } else {
            let half_n = (n / 2) as i64;
            let mut acc = 0.0;
            for di in (-k).max(-half_n)..=k.min(half_n - 1) {
                let rem = r * r - (di as f64 * h).powi(2);
                if rem < 0.0 {
                    continue;
                }
                let kj = ((rem.sqrt() / h) * (1.0 + 1e-12)).floor() as usize;
                let row = ((ci as i64 + di).rem_euclid(n as i64)) as usize;
                acc += self.segment(row, cj, kj);
            }
            acc
        };
        s.max(0.0) * g.cell()
    }
}

fn centers(grid: &GridFunction, stride: usize) -> Vec<(usize, usize)> {
    let idx: Vec<usize> = (0..grid.n).step_by(stride).collect();
    if grid.n_dim == 1 {
        idx.iter().map(|&i| (i, 0)).collect()
    } else {
        let mut out = Vec::with_capacity(idx.len() * idx.len());
        for &i in &idx {
            for &j in &idx {
                out.push((i, j));
            }
        }
        out
    }
}

fn periodic_dist2(grid: &GridFunction, a: &[f64], b: &[f64]) -> f64 {
    let period = 2.0 * grid.half_width;
    let mut s = 0.0;
    for k in 0..grid.n_dim {
        let mut d = (a[k] - b[k]).rem_euclid(period);
        if d > 0.5 * period {
            d = period - d;
        }
        s += d * d;
    }
    s
}

fn point(grid: &GridFunction, flat: usize) -> [f64; 2] {
    if grid.n_dim == 1 {
        [grid.coord(flat), 0.0]
    } else {
        [grid.coord(flat / grid.n), grid.coord(flat % grid.n)]
    }
}

/// `||phi||_{L^p(B(x0, R))}` by Riemann sum over grid points in the periodic ball.
pub fn lp_ball_norm(phi: &GridFunction, x0: &[f64], r: f64, p: Exponent) -> Result<f64> {
    if x0.len() != phi.n_dim {
        return Err(Error::InvalidInput("center dimension mismatch".into()));
    }
    let h = phi.spacing();
    if r < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::UnderResolved(format!("R = {r} < 2h = {}", 2.0 * h)));
    }
    if r > phi.half_width * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("R = {r} exceeds L = {}", phi.half_width)));
    }
    let r2 = r * r * (1.0 + 1e-12);
    let inside = (0..phi.len()).filter(|&i| periodic_dist2(phi, &point(phi, i), x0) <= r2);
    Ok(match p {
        Exponent::Infinite => inside.map(|i| phi.values[i].abs()).fold(0.0, f64::max),
        Exponent::Finite(p) => {
            let s: f64 = inside.map(|i| phi.values[i].abs().powf(p)).sum();
            (s * phi.cell()).powf(1.0 / p)
        }
    })
}

/// Ball integral `sum |phi|^p h^N` maximized per radius; returns
/// `(R_eff, best)` with `R_eff` the volume-matched radius of the point set.
fn ladder_scan(phi: &GridFunction, p: f64, ladder: &RadiusLadder) -> Vec<(f64, f64)> {
    let sums = BallSums::new(phi, p);
    let cs = centers(phi, ladder.stride);
    ladder
        .radii
        .par_iter()
        .map(|&r| {
            let best = cs
                .iter()
                .map(|&(i, j)| sums.ball(i, j, r))
                .fold(0.0_f64, f64::max);
            (sums.effective_radius(r), best)
        })
        .collect()
}

/// `max_{x0, R} R^{(l - N)/p} ||phi||_{L^p(B(x0, R))}` over the ladder;
/// `p = inf` returns the sup norm.
pub fn morrey_norm(phi: &GridFunction, mp: &MorreyParams, ladder: &RadiusLadder) -> f64 {
    let p = match mp.p {
        Exponent::Infinite => return phi.max_abs(),
        Exponent::Finite(p) => p,
    };
    let nd = phi.n_dim as f64;
    ladder_scan(phi, p, ladder)
        .into_iter()
        .map(|(r, s)| r.powf((mp.ell - nd) / p) * s.powf(1.0 / p))
        .fold(0.0, f64::max)
}

/// `sup_{x0} ||phi||_{L^p(B(x0, 1))}` over every grid center.
pub fn uniform_norm(phi: &GridFunction, p: Exponent) -> Result<f64> {
    if phi.half_width < 1.0 {
        return Err(Error::InvalidInput(format!("L = {} < 1", phi.half_width)));
    }
    let p = match p {
        Exponent::Infinite => return Ok(phi.max_abs()),
        Exponent::Finite(p) => p,
    };
    let sums = BallSums::new(phi, p);
    let best = centers(phi, 1)
        .par_iter()
        .map(|&(i, j)| sums.ball(i, j, 1.0))
        .reduce(|| 0.0, f64::max);
    Ok(best.powf(1.0 / p))
}

/// Finite signed atomic measure on the box.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    pub n_dim: usize,
    pub half_width: f64,
    pub atoms: Vec<([f64; 2], f64)>,
}

impl AtomicMeasure {
    pub fn new(n_dim: usize, half_width: f64, atoms: Vec<([f64; 2], f64)>) -> Result<Self> {
        for (x, w) in &atoms {
            if !w.is_finite() || x[..n_dim].iter().any(|c| *c < -half_width || *c >= half_width) {
                return Err(Error::InvalidInput("atom outside box or non-finite weight".into()));
            }
        }
        Ok(Self {
            n_dim,
            half_width,
            atoms,
        })
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w.abs()).sum()
    }
}

/// Value of the measure norm on the ladder, with a flag set when the true
/// supremum is infinite (atoms with `l < N`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureNorm {
    pub value: f64,
    pub divergent: bool,
    pub radius_at_max: f64,
}

/// `max_{x0, R} R^{l - N} |mu|(B(x0, R))`; centers are the atoms plus the
/// strided grid of `shape`.
pub fn measure_morrey_norm(
    mu: &AtomicMeasure,
    ell: f64,
    ladder: &RadiusLadder,
    shape: &GridFunction,
) -> MeasureNorm {
    let nd = mu.n_dim as f64;
    let mut cands: Vec<[f64; 2]> = mu.atoms.iter().map(|(x, _)| *x).collect();
    for (i, j) in centers(shape, ladder.stride) {
        cands.push(if mu.n_dim == 1 {
            [shape.coord(i), 0.0]
        } else {
            [shape.coord(i), shape.coord(j)]
        });
    }
    let mut best = (0.0, ladder.radii[0]);
    for &r in &ladder.radii {
        let r2 = r * r * (1.0 + 1e-12);
        for c in &cands {
            let mass: f64 = mu
                .atoms
                .iter()
                .filter(|(x, _)| periodic_dist2(shape, x, c) <= r2)
                .map(|(_, w)| w.abs())
                .sum();
            let v = r.powf(ell - nd) * mass;
            if v > best.0 {
                best = (v, r);
            }
        }
    }
    MeasureNorm {
        value: best.0,
        divergent: ell < nd && mu.atoms.iter().any(|(_, w)| *w != 0.0),
        radius_at_max: best.1,
    }
}

/// `||tau_y phi - phi||` in `M^{p,l}` for a shift by whole cells.
pub fn translation_modulus(
    phi: &GridFunction,
    mp: &MorreyParams,
    shift: &[i64],
    ladder: &RadiusLadder,
) -> Result<f64> {
    let diff = phi.shifted(shift)?.sub(phi)?;
    Ok(morrey_norm(&diff, mp, ladder))
}

/// Both sides of the Holder inequality for products of Morrey functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderCheck {
    pub z: Exponent,
    pub nu: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Exponents `(z, nu)` with `1/z = 1/w + 1/p0`, `nu/z = kappa/w + l0/p0`.
pub fn holder_exponents(w: &MorreyParams, g_class: &MorreyParams) -> Result<(Exponent, f64)> {
    let inv_z = w.p.recip() + g_class.p.recip();
    if inv_z > 1.0 + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "w = {} below the conjugate of p0 = {}",
            w.p, g_class.p
        )));
    }
    let z = Exponent::from_recip(inv_z.min(1.0));
    let nu_over_z = w.ell_over_p() + g_class.ell_over_p();
    let nu = match z {
        Exponent::Infinite => w.ell.min(g_class.ell),
        Exponent::Finite(zv) => nu_over_z * zv,
    };
    Ok((z, nu))
}

/// `||fg||_{M^{z,nu}} <= ||f||_{M^{w,kappa}} ||g||_{M^{p0,l0}}` within `tol`.
pub fn holder_product_check(
    f: &GridFunction,
    g: &GridFunction,
    f_class: &MorreyParams,
    g_class: &MorreyParams,
    dims: &ProblemDims,
    ladder: &RadiusLadder,
    tol: f64,
) -> Result<HolderCheck> {
    let (z, nu) = holder_exponents(f_class, g_class)?;
    let target = MorreyParams::new(z, nu.min(dims.n_dim as f64), dims)?;
    let lhs = morrey_norm(&f.mul(g)?, &target, ladder);
    let rhs = morrey_norm(f, f_class, ladder) * morrey_norm(g, g_class, ladder);
    Ok(HolderCheck {
        z,
        nu,
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::power_law_cell_average;

    #[test]
    fn ball_norm_examples() {
        let z = GridFunction::zeros(1, 256, 1.0).unwrap();
        assert_eq!(lp_ball_norm(&z, &[0.0], 0.5, Exponent::Finite(1.0)).unwrap(), 0.0);
        let one = GridFunction::from_fn(1, 256, 1.0, |_| 1.0).unwrap();
        let v = lp_ball_norm(&one, &[0.0], 0.5, Exponent::Finite(1.0)).unwrap();
        assert!((v - 1.0).abs() <= one.spacing());
        let pl = power_law_cell_average(1, 1024, 1.0, 0.5, 1.0).unwrap();
        let v = lp_ball_norm(&pl, &[0.0], 0.25, Exponent::Finite(1.0)).unwrap();
        assert!((v - 2.0).abs() <= 0.05 * 2.0, "{v}");
        assert!(lp_ball_norm(&pl, &[0.0], pl.spacing(), Exponent::Finite(1.0)).is_err());
    }

    #[test]
    fn morrey_examples() {
        let d = ProblemDims::new(1, 1, 1.0).unwrap();
        let pl = power_law_cell_average(1, 1024, 1.0, 0.5, 1.0).unwrap();
        let lad = RadiusLadder::standard(&pl);
        let v = morrey_norm(&pl, &MorreyParams::finite(1.0, 0.5, &d).unwrap(), &lad);
        assert!((v - 4.0).abs() <= 0.4, "{v}");
        let z = GridFunction::zeros(1, 64, 1.0).unwrap();
        assert_eq!(morrey_norm(&z, &MorreyParams::finite(1.0, 0.5, &d).unwrap(), &RadiusLadder::standard(&z)), 0.0);
    }

    #[test]
    fn full_ell_matches_lp_at_largest_ball() {
        let d = ProblemDims::new(1, 1, 1.0).unwrap();
        let u = GridFunction::from_fn(1, 512, 4.0, |x| (-x[0] * x[0]).exp()).unwrap();
        let lad = RadiusLadder::standard(&u);
        let v = morrey_norm(&u, &MorreyParams::finite(2.0, 1.0, &d).unwrap(), &lad);
        assert!((v - u.lp_norm(2.0)).abs() < 1e-12 * v.max(1.0));
    }

    #[test]
    fn uniform_examples() {
        let one = GridFunction::from_fn(1, 256, 2.0, |_| 1.0).unwrap();
        let v = uniform_norm(&one, Exponent::Finite(1.0)).unwrap();
        assert!((v - 2.0).abs() <= one.spacing());
        let small = GridFunction::zeros(1, 64, 0.5).unwrap();
        assert!(uniform_norm(&small, Exponent::Finite(1.0)).is_err());
    }

    #[test]
    fn measure_examples() {
        let shape = GridFunction::zeros(1, 256, 1.0).unwrap();
        let lad = RadiusLadder::standard(&shape);
        let mu = AtomicMeasure::new(1, 1.0, vec![([0.1, 0.0], 1.0)]).unwrap();
        let full = measure_morrey_norm(&mu, 1.0, &lad, &shape);
        assert!((full.value - 1.0).abs() < 1e-14 && !full.divergent);
        let sub = measure_morrey_norm(&mu, 0.5, &lad, &shape);
        assert!(sub.divergent);
        assert_eq!(sub.radius_at_max, lad.radii[0]);
        let empty = AtomicMeasure::new(1, 1.0, vec![]).unwrap();
        assert_eq!(measure_morrey_norm(&empty, 0.5, &lad, &shape).value, 0.0);
    }

    #[test]
    fn holder_examples() {
        let d = ProblemDims::new(1, 1, 1.0).unwrap();
        let f = power_law_cell_average(1, 1024, 2.0, 0.25, 1.0).unwrap();
        let lad = RadiusLadder::standard(&f);
        let c = MorreyParams::finite(2.0, 0.5, &d).unwrap();
        let chk = holder_product_check(&f, &f, &c, &c, &d, &lad, 0.05).unwrap();
        assert_eq!(chk.z, Exponent::Finite(1.0));
        assert!((chk.nu - 0.5).abs() < 1e-14);
        assert!(chk.pass, "{chk:?}");
        let zero = GridFunction::zeros(1, 1024, 2.0).unwrap();
        let chk = holder_product_check(&f, &zero, &c, &c, &d, &lad, 0.05).unwrap();
        assert_eq!(chk.lhs, 0.0);
        let low = MorreyParams::finite(1.5, 0.5, &d).unwrap();
        assert!(holder_product_check(&f, &f, &low, &c, &d, &lad, 0.05).is_err());
    }
}
