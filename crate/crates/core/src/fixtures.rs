//! Code-generated fixtures: Dirac, Gaussian bump, half-box indicator and
//! truncated power laws `A |x|^{-beta}`.

use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::quad::composite;

/// Discrete Dirac: value `h^{-N}` at the origin node, unit mass.
pub fn dirac(n_dim: usize, n: usize, half_width: f64) -> Result<GridFunction> {
    let mut g = GridFunction::zeros(n_dim, n, half_width)?;
    let o = g.origin_flat();
    g.values[o] = 1.0 / g.cell();
    Ok(g)
}

/// `exp(-|x|^2 / (2 sigma^2))`.
pub fn gaussian_bump(n_dim: usize, n: usize, half_width: f64, sigma: f64) -> Result<GridFunction> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput("sigma must be positive".into()));
    }
    GridFunction::from_fn(n_dim, n, half_width, |x| {
        (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * sigma * sigma)).exp()
    })
}

/// Indicator of `x_1 >= 0`.
pub fn half_box(n_dim: usize, n: usize, half_width: f64) -> Result<GridFunction> {
    GridFunction::from_fn(n_dim, n, half_width, |x| if x[0] >= 0.0 { 1.0 } else { 0.0 })
}

/// How the singularity of `|x|^{-beta}` is put on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerLawRealization {
    /// Exact average over each grid cell.
    CellAverage,
    /// Point samples, with `r < radius` replaced by the value at `radius`.
    Capped { radius: f64 },
}

impl PowerLawRealization {
    pub fn label(&self) -> String {
        match self {
            Self::CellAverage => "cell-average".into(),
            Self::Capped { radius } => format!("capped(r<{radius})"),
        }
    }
}

fn check_beta(n_dim: usize, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < n_dim as f64) {
        return Err(Error::InvalidInput(format!(
            "power-law exponent {beta} must lie in (0, N) for local integrability"
        )));
    }
    Ok(())
}

/// `amplitude |x|^{-beta}` realized per `how`.
pub fn power_law(
    n_dim: usize,
    n: usize,
    half_width: f64,
    beta: f64,
    amplitude: f64,
    how: PowerLawRealization,
) -> Result<GridFunction> {
    match how {
        PowerLawRealization::CellAverage => {
            power_law_cell_average(n_dim, n, half_width, beta, amplitude)
        }
        PowerLawRealization::Capped { radius } => {
            power_law_capped(n_dim, n, half_width, beta, amplitude, radius)
        }
    }
}

pub fn power_law_capped(
    n_dim: usize,
    n: usize,
    half_width: f64,
    beta: f64,
    amplitude: f64,
    radius: f64,
) -> Result<GridFunction> {
    check_beta(n_dim, beta)?;
    if !(radius > 0.0) {
        return Err(Error::InvalidInput("cap radius must be positive".into()));
    }
    GridFunction::from_fn(n_dim, n, half_width, |x| {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt().max(radius);
        amplitude * r.powf(-beta)
    })
}

/// Average of `|x|^{-beta}` over the square `[x0, x0 + a] x [y0, y0 + a]`
/// (not containing the origin), with `sub x sub` Gauss panels.
fn square_average(x0: f64, y0: f64, a: f64, beta: f64, sub: usize) -> f64 {
    let inner = |x: f64| composite(y0, y0 + a, sub, |y| (x * x + y * y).powf(-0.5 * beta));
    composite(x0, x0 + a, sub, inner) / (a * a)
}

/// `int_0^{pi/4} cos^{beta-2}(phi) dphi`, smooth integrand.
fn polar_factor(beta: f64) -> f64 {
    composite(0.0, FRAC_PI_4, 4, |p| p.cos().powf(beta - 2.0))
}

/// Cell averages of `amplitude |x|^{-beta}`; exact antiderivative in 1D,
/// Gauss panels plus a polar formula for the origin cell in 2D.
pub fn power_law_cell_average(
    n_dim: usize,
    n: usize,
    half_width: f64,
    beta: f64,
    amplitude: f64,
) -> Result<GridFunction> {
    check_beta(n_dim, beta)?;
    let mut g = GridFunction::zeros(n_dim, n, half_width)?;
    let h = g.spacing();
    if n_dim == 1 {
        let anti = |s: f64| s.signum() * s.abs().powf(1.0 - beta) / (1.0 - beta);
        for i in 0..n {
            let x = g.coord(i);
            g.values[i] = amplitude * (anti(x + 0.5 * h) - anti(x - 0.5 * h)) / h;
        }
        return Ok(g);
    }
    let origin = 8.0 / (2.0 - beta) * (0.5 * h).powf(2.0 - beta) * polar_factor(beta) / (h * h);
    let o = g.origin_index() as i64;
    for i in 0..n {
        for j in 0..n {
            let (di, dj) = (i as i64 - o, j as i64 - o);
            let v = if di == 0 && dj == 0 {
                origin
            } else {
                let near = di.abs().max(dj.abs()) <= 2;
                let (x, y) = (g.coord(i), g.coord(j));
                square_average(x - 0.5 * h, y - 0.5 * h, h, beta, if near { 4 } else { 1 })
            };
            g.values[i * n + j] = amplitude * v;
        }
    }
    Ok(g)
}

/// Named fixture ids accepted by configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum Fixture {
    Dirac,
    Gaussian { sigma: f64 },
    HalfBox,
    PowerLaw { beta: f64, amplitude: f64, realization: PowerLawRealization },
}

impl Fixture {
    pub fn build(&self, n_dim: usize, n: usize, half_width: f64) -> Result<GridFunction> {
        match *self {
            Self::Dirac => dirac(n_dim, n, half_width),
            Self::Gaussian { sigma } => gaussian_bump(n_dim, n, half_width, sigma),
            Self::HalfBox => half_box(n_dim, n, half_width),
            Self::PowerLaw {
                beta,
                amplitude,
                realization,
            } => power_law(n_dim, n, half_width, beta, amplitude, realization),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_has_unit_mass() {
        for nd in [1, 2] {
            let d = dirac(nd, 64, 2.0).unwrap();
            assert!((d.values.iter().sum::<f64>() * d.cell() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cell_average_preserves_mass_1d() {
        let g = power_law_cell_average(1, 256, 1.0, 0.5, 1.0).unwrap();
        let mass: f64 = g.values.iter().sum::<f64>() * g.spacing();
        // int_{-1}^{1-h/2}... telescoping: F(1 - h/2) - F(-1 - h/2)
        let f = |s: f64| 2.0 * s.signum() * s.abs().sqrt();
        let h = g.spacing();
        assert!((mass - (f(1.0 - 0.5 * h) - f(-1.0 - 0.5 * h))).abs() < 1e-12);
    }

    #[test]
    fn cell_average_origin_cell_2d() {
        // mass of |x|^{-1} over [-a, a]^2 is 8 a asinh(1)
        let g = power_law_cell_average(2, 64, 1.0, 1.0, 1.0).unwrap();
        let h = g.spacing();
        let want = 8.0 * 0.5 * h * 1f64.asinh() / (h * h);
        assert!((g.values[g.origin_flat()] - want).abs() < 1e-10 * want);
    }

    #[test]
    fn rejects_non_integrable_exponent() {
        assert!(power_law_cell_average(1, 64, 1.0, 1.0, 1.0).is_err());
        assert!(power_law_capped(2, 64, 1.0, 2.5, 1.0, 0.1).is_err());
    }
}
