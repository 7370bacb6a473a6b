//! Shared setup for the engine benchmarks.

use morrey_lab::duhamel::{PotentialSpec, SolverConfig};
use morrey_lab::fixtures::{gaussian_bump, power_law_cell_average, PowerLawRealization};
use morrey_lab::semigroup::{Semigroup, SymbolSpec};
use morrey_lab::{GridFunction, ProblemDims};

pub const HALF_WIDTH: f64 = 8.0;

pub fn heat_dims() -> ProblemDims {
    ProblemDims::new(1, 1, 1.0).expect("valid dims")
}

pub fn heat(n: usize) -> Semigroup {
    Semigroup::new(heat_dims(), n, HALF_WIDTH, SymbolSpec::LaplacianPower { m: 1 }).expect("valid grid")
}

pub fn bump(n: usize) -> GridFunction {
    gaussian_bump(1, n, HALF_WIDTH, 0.5).expect("valid grid")
}

pub fn singular(n: usize) -> GridFunction {
    power_law_cell_average(1, n, HALF_WIDTH, 0.5, 1.0).expect("valid grid")
}

/// Power law `|x|^{-1/2}` declared in `M^{1,1/2}`.
pub fn potential() -> PotentialSpec {
    PotentialSpec::power_law(1.0, 0.5, 1.0, PowerLawRealization::CellAverage, &heat_dims()).expect("valid potential")
}

pub fn solver_config(nodes: usize) -> SolverConfig {
    SolverConfig { nodes, ..SolverConfig::default() }
}
