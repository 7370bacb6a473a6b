//! Experiment configuration (TOML, `schema_version = 1`). Every table denies
//! unknown keys.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use morrey_lab::duhamel::{PotentialSpec, SolverConfig, ThetaMode};
use morrey_lab::fixtures::{Fixture, PowerLawRealization};
use morrey_lab::semigroup::SymbolSpec;
use morrey_lab::{Exponent, MorreyParams, ProblemDims};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Worker threads; `--jobs` and `MORREY_LAB_JOBS` override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub dims: DimsConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub symbol: SymbolConfig,
    #[serde(default)]
    pub solver: SolverOverride,
    #[serde(default, rename = "check")]
    pub checks: Vec<CheckConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsConfig {
    pub n_dim: usize,
    pub m: u32,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub half_width: f64,
}

/// `(-Laplacian)^m` unless coefficients `[[i, j, a], ...]` are given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<(u32, u32, f64)>>,
}

/// Partial [`SolverConfig`]; unset fields keep the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<f64>,
    /// Fixed weight parameter; automatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<f64>,
}

impl SolverOverride {
    pub fn apply(&self, base: &SolverConfig) -> SolverConfig {
        let mut c = base.clone();
        if let Some(v) = self.horizon {
            c.horizon = v;
        }
        if let Some(v) = self.nodes {
            c.nodes = v;
        }
        if let Some(v) = self.grading {
            c.grading = v;
        }
        if let Some(v) = self.theta {
            c.theta = ThetaMode::Fixed(v);
        }
        if let Some(v) = self.picard_tol {
            c.picard_tol = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.calibration {
            c.calibration = v;
        }
        c
    }
}

/// Morrey pair; `p = inf` (TOML float) for `L^inf`, where `ell` may be omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorreyConfig {
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
}

impl MorreyConfig {
    pub fn params(&self, dims: &ProblemDims) -> morrey_lab::Result<MorreyParams> {
        if self.p.is_infinite() {
            return Ok(MorreyParams::infinity(dims));
        }
        let ell = self.ell.unwrap_or(dims.n_dim as f64);
        MorreyParams::new(Exponent::Finite(self.p), ell, dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizationKind {
    CellAverage,
    Capped,
}

fn realization(kind: RealizationKind, cap_radius: Option<f64>, h: f64) -> PowerLawRealization {
    match kind {
        RealizationKind::CellAverage => PowerLawRealization::CellAverage,
        RealizationKind::Capped => PowerLawRealization::Capped {
            radius: cap_radius.unwrap_or(2.0 * h),
        },
    }
}

fn default_realization() -> RealizationKind {
    RealizationKind::CellAverage
}

fn one() -> f64 {
    1.0
}

/// Initial datum by fixture id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumConfig {
    Dirac {},
    Gaussian {
        sigma: f64,
    },
    HalfBox {},
    PowerLaw {
        beta: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_realization")]
        realization: RealizationKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap_radius: Option<f64>,
    },
}

impl DatumConfig {
    pub fn fixture(&self, h: f64) -> Fixture {
        match *self {
            Self::Dirac {} => Fixture::Dirac,
            Self::Gaussian { sigma } => Fixture::Gaussian { sigma },
            Self::HalfBox {} => Fixture::HalfBox,
            Self::PowerLaw {
                beta,
                amplitude,
                realization: r,
                cap_radius,
            } => Fixture::PowerLaw {
                beta,
                amplitude,
                realization: realization(r, cap_radius, h),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Dirac {} => "dirac".into(),
            Self::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            Self::HalfBox {} => "half_box".into(),
            Self::PowerLaw { beta, amplitude, .. } => format!("power_law(A={amplitude}, beta={beta})"),
        }
    }
}

/// Potential by kind; power laws are declared in `M^{p0, beta p0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Constant {
        c: f64,
    },
    PowerLaw {
        amplitude: f64,
        beta: f64,
        p0: f64,
        #[serde(default = "default_realization")]
        realization: RealizationKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap_radius: Option<f64>,
    },
}

impl PotentialConfig {
    pub fn spec(&self, dims: &ProblemDims, h: f64) -> morrey_lab::Result<PotentialSpec> {
        match *self {
            Self::Constant { c } => PotentialSpec::constant(c, dims),
            Self::PowerLaw {
                amplitude,
                beta,
                p0,
                realization: r,
                cap_radius,
            } => PotentialSpec::power_law(amplitude, beta, p0, realization(r, cap_radius, h), dims),
        }
    }

    /// Same potential with its strength (`c` or `A`) replaced.
    pub fn with_strength(&self, s: f64) -> Self {
        match *self {
            Self::Constant { .. } => Self::Constant { c: s },
            Self::PowerLaw {
                beta,
                p0,
                realization,
                cap_radius,
                ..
            } => Self::PowerLaw {
                amplitude: s,
                beta,
                p0,
                realization,
                cap_radius,
            },
        }
    }

    pub fn strength(&self) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::PowerLaw { amplitude, .. } => amplitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelOracle {
    Gaussian,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseConfig {
    pub m: u32,
    pub tolerance: f64,
}

/// Norm used for growth measurements: `L^p` (`p = inf` allowed) or Morrey.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormConfig {
    Lp { p: f64 },
    Morrey { p: f64, ell: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub potential: PotentialConfig,
    pub datum: DatumConfig,
    /// Declared space of the datum; `L^inf` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<MorreyConfig>,
}

/// Class of a region query: Morrey pair or `"bounded"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassConfig {
    Morrey(MorreyConfig),
    Named(BoundedTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundedTag {
    Bounded,
}

/// One configured check. Every variant carries `name` and `hard`
/// (informational checks never fail the run); grid and solver overrides
/// apply to that check only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckConfig {
    /// Kernel of `S(t)` against a closed form on `|x| <= L/2`.
    KernelOracle {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        m: u32,
        mu: f64,
        oracle: KernelOracle,
        times: Vec<f64>,
        tolerance: f64,
    },
    /// Mass, positivity and self-similar collapse.
    KernelStructure {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        mus: Vec<f64>,
        t: f64,
        mass_tolerance: f64,
        positivity_floor: f64,
        collapse_times: Vec<f64>,
        collapse: Vec<CollapseConfig>,
    },
    /// Multiplier path vs subordination quadrature at `mu = 1/2`.
    Subordination {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        datum: DatumConfig,
        t: f64,
        tolerance: f64,
    },
    /// `t -> 0` trace on a window around the origin.
    Trace {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        datum: DatumConfig,
        p: f64,
        window: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        morrey: Option<MorreyConfig>,
    },
    /// Morrey norms of a fixture, with ladder-refinement stability.
    Norms {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        datum: DatumConfig,
        params: Vec<MorreyConfig>,
        refinement_tolerance: f64,
    },
    /// Smoothing certificate `(p, l) -> (q, s)`, free or perturbed.
    Smoothing {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        datum: DatumConfig,
        from: MorreyConfig,
        to: MorreyConfig,
        t_min: f64,
        t_max: f64,
        #[serde(default = "nine")]
        samples: usize,
        tolerance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        potential: Option<PotentialConfig>,
        #[serde(default)]
        growth: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
    /// `S_{mu,c}(t) u0 = e^{ct} S_mu(t) u0` at every node.
    ConstantPotential {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        datum: DatumConfig,
        c: f64,
        /// Bound in units of `picard_tol`.
        factor: f64,
        #[serde(default)]
        solver: SolverOverride,
    },
    /// Per-sweep contraction ratios and sweep counts.
    Contraction {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        cases: Vec<CaseConfig>,
        max_sweeps: usize,
        slack: f64,
        #[serde(default)]
        solver: SolverOverride,
    },
    /// Semigroup property and joint vs sequential two-potential solves.
    Identities {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        datum: DatumConfig,
        potentials: Vec<PotentialConfig>,
        /// `evaluate(t1 + t2)` vs `evaluate(t1)` re-propagated by `t2`.
        t1: f64,
        t2: f64,
        /// Bound in units of the combined tolerance.
        factor: f64,
        #[serde(default)]
        solver: SolverOverride,
    },
    /// Linear dependence of the weighted difference on `||V - V~||`.
    ContinuousDependence {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        datum: DatumConfig,
        potential: PotentialConfig,
        /// Relative strength perturbations `V~ = (1 + eps) V`.
        epsilons: Vec<f64>,
        from: MorreyConfig,
        to: MorreyConfig,
        tolerance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default)]
        solver: SolverOverride,
    },
    /// Growth rate against potential norm.
    OmegaScaling {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        datum: DatumConfig,
        potential: PotentialConfig,
        strengths: Vec<f64>,
        norm: NormConfig,
        total: f64,
        window: [f64; 2],
        tolerance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default)]
        solver: SolverOverride,
    },
    /// Closed-form region predicates vs the brute-force witness search.
    Regions {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        density: usize,
        queries_per_kind: usize,
        classes: Vec<ClassConfig>,
        pairs: Vec<[usize; 2]>,
        tangent_tolerance: f64,
    },
    /// Laplace-transform identity for the perturbed semigroup.
    Pseudoresolvent {
        name: String,
        #[serde(default = "yes")]
        hard: bool,
        datum: DatumConfig,
        potential: PotentialConfig,
        lambdas: Vec<[f64; 2]>,
        margin: f64,
        tail: f64,
        tolerance: f64,
        /// Bound for the closed-form shift (constant potentials).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift_tolerance: Option<f64>,
        /// Window end for the growth fit that sets the admissible `Re lambda`.
        omega_total: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default)]
        solver: SolverOverride,
    },
}

fn nine() -> usize {
    9
}

impl CheckConfig {
    pub fn name(&self) -> &str {
        match self {
            Self::KernelOracle { name, .. }
            | Self::KernelStructure { name, .. }
            | Self::Subordination { name, .. }
            | Self::Trace { name, .. }
            | Self::Norms { name, .. }
            | Self::Smoothing { name, .. }
            | Self::ConstantPotential { name, .. }
            | Self::Contraction { name, .. }
            | Self::Identities { name, .. }
            | Self::ContinuousDependence { name, .. }
            | Self::OmegaScaling { name, .. }
            | Self::Regions { name, .. }
            | Self::Pseudoresolvent { name, .. } => name,
        }
    }

    pub fn hard(&self) -> bool {
        match self {
            Self::KernelOracle { hard, .. }
            | Self::KernelStructure { hard, .. }
            | Self::Subordination { hard, .. }
            | Self::Trace { hard, .. }
            | Self::Norms { hard, .. }
            | Self::Smoothing { hard, .. }
            | Self::ConstantPotential { hard, .. }
            | Self::Contraction { hard, .. }
            | Self::Identities { hard, .. }
            | Self::ContinuousDependence { hard, .. }
            | Self::OmegaScaling { hard, .. }
            | Self::Regions { hard, .. }
            | Self::Pseudoresolvent { hard, .. } => *hard,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::KernelOracle { .. } => "kernel_oracle",
            Self::KernelStructure { .. } => "kernel_structure",
            Self::Subordination { .. } => "subordination",
            Self::Trace { .. } => "trace",
            Self::Norms { .. } => "norms",
            Self::Smoothing { .. } => "smoothing",
            Self::ConstantPotential { .. } => "constant_potential",
            Self::Contraction { .. } => "contraction",
            Self::Identities { .. } => "identities",
            Self::ContinuousDependence { .. } => "continuous_dependence",
            Self::OmegaScaling { .. } => "omega_scaling",
            Self::Regions { .. } => "regions",
            Self::Pseudoresolvent { .. } => "pseudoresolvent",
        }
    }

    /// Subcommand that runs this check.
    pub fn pipeline(&self) -> Pipeline {
        match self {
            Self::KernelOracle { .. }
            | Self::KernelStructure { .. }
            | Self::Subordination { .. }
            | Self::Trace { .. } => Pipeline::Kernel,
            Self::Norms { .. } => Pipeline::Norms,
            Self::Smoothing { .. } => Pipeline::Smoothing,
            Self::ConstantPotential { .. }
            | Self::Contraction { .. }
            | Self::Identities { .. }
            | Self::ContinuousDependence { .. }
            | Self::OmegaScaling { .. }
            | Self::Pseudoresolvent { .. } => Pipeline::Perturb,
            Self::Regions { .. } => Pipeline::Regions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Kernel,
    Norms,
    Smoothing,
    Perturb,
    Regions,
    All,
}

impl Pipeline {
    pub fn includes(self, check: &CheckConfig) -> bool {
        self == Pipeline::All || check.pipeline() == self
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn problem_dims(&self) -> Result<ProblemDims, CliError> {
        ProblemDims::new(self.dims.n_dim, self.dims.m, self.dims.mu).map_err(|e| CliError::Config(format!("dims: {e}")))
    }

    pub fn symbol(&self) -> SymbolSpec {
        match &self.symbol.coefficients {
            None => SymbolSpec::LaplacianPower { m: self.dims.m },
            Some(t) => SymbolSpec::Coefficients {
                m: self.dims.m,
                table: t.iter().map(|&(i, j, a)| ([i, j], a)).collect(),
            },
        }
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.apply(&SolverConfig::default())
    }

    /// Semantic checks beyond the schema: versions, unique names, and every
    /// parameter set constructible.
    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return err(format!(
                "schema_version = {} (supported: {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let dims = self.problem_dims()?;
        if let Err(e) = morrey_lab::GridFunction::zeros(dims.n_dim, self.grid.n, self.grid.half_width) {
            return err(format!("grid: {e}"));
        }
        if let Err(e) = self.solver().validate() {
            return err(format!("solver: {e}"));
        }
        if self.jobs == Some(0) {
            return err("jobs must be positive".into());
        }
        let h = 2.0 * self.grid.half_width / self.grid.n as f64;
        let mut names = HashSet::new();
        for c in &self.checks {
            let name = c.name();
            if name.is_empty() || !name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '-' || ch == '_') {
                return err(format!("check name {name:?}: use [A-Za-z0-9_-]"));
            }
            if !names.insert(name.to_string()) {
                return err(format!("duplicate check name {name:?}"));
            }
            let at = |m: String| CliError::Config(format!("check {name:?}: {m}"));
            self.validate_check(c, &dims, h).map_err(at)?;
        }
        Ok(())
    }

    fn validate_check(&self, c: &CheckConfig, dims: &ProblemDims, h: f64) -> Result<(), String> {
        let morrey = |m: &MorreyConfig| m.params(dims).map(|_| ()).map_err(|e| e.to_string());
        let pot = |p: &PotentialConfig| p.spec(dims, h).map(|_| ()).map_err(|e| e.to_string());
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{what} must be positive, got {v}"))
            }
        };
        let solver = |o: &SolverOverride| o.apply(&self.solver()).validate().map_err(|e| e.to_string());
        match c {
            CheckConfig::KernelOracle { times, tolerance, m, mu, .. } => {
                ProblemDims::new(dims.n_dim, *m, *mu).map_err(|e| e.to_string())?;
                if times.is_empty() {
                    return Err("times is empty".into());
                }
                times.iter().try_for_each(|&t| positive("t", t))?;
                positive("tolerance", *tolerance)
            }
            CheckConfig::KernelStructure { mus, t, collapse_times, collapse, .. } => {
                for &mu in mus {
                    ProblemDims::new(dims.n_dim, 1, mu).map_err(|e| e.to_string())?;
                }
                positive("t", *t)?;
                if collapse_times.len() < 2 && !collapse.is_empty() {
                    return Err("collapse needs at least two times".into());
                }
                collapse_times.iter().try_for_each(|&t| positive("collapse time", t))
            }
            CheckConfig::Subordination { t, tolerance, .. } => {
                positive("t", *t)?;
                positive("tolerance", *tolerance)
            }
            CheckConfig::Trace { p, window, morrey: m, .. } => {
                if !(*p >= 1.0) {
                    return Err(format!("p = {p} < 1"));
                }
                positive("window", *window)?;
                m.as_ref().map_or(Ok(()), morrey)
            }
            CheckConfig::Norms { params, refinement_tolerance, .. } => {
                params.iter().try_for_each(morrey)?;
                positive("refinement_tolerance", *refinement_tolerance)
            }
            CheckConfig::Smoothing { from, to, t_min, t_max, samples, tolerance, potential, n, .. } => {
                morrey(from)?;
                morrey(to)?;
                positive("t_min", *t_min)?;
                if !(t_max > t_min) {
                    return Err("t_max must exceed t_min".into());
                }
                if *samples < 8 {
                    return Err(format!("samples = {samples} < 8"));
                }
                check_n(*n, dims, self.grid.half_width)?;
                potential.as_ref().map_or(Ok(()), pot)?;
                positive("tolerance", *tolerance)
            }
            CheckConfig::ConstantPotential { c, factor, solver: s, .. } => {
                pot(&PotentialConfig::Constant { c: *c })?;
                solver(s)?;
                positive("factor", *factor)
            }
            CheckConfig::Contraction { cases, solver: s, .. } => {
                if cases.is_empty() {
                    return Err("cases is empty".into());
                }
                for case in cases {
                    pot(&case.potential)?;
                    case.space.as_ref().map_or(Ok(()), morrey)?;
                }
                solver(s)
            }
            CheckConfig::Identities { potentials, t1, t2, factor, solver: s, .. } => {
                if potentials.len() != 2 {
                    return Err("identities needs exactly two potentials".into());
                }
                potentials.iter().try_for_each(pot)?;
                positive("t1", *t1)?;
                positive("t2", *t2)?;
                solver(s)?;
                positive("factor", *factor)
            }
            CheckConfig::ContinuousDependence { potential, epsilons, from, to, tolerance, n, solver: s, .. } => {
                pot(potential)?;
                morrey(from)?;
                morrey(to)?;
                if epsilons.len() < 3 || epsilons.iter().any(|e| !(*e > 0.0)) {
                    return Err("need at least three positive epsilons".into());
                }
                check_n(*n, dims, self.grid.half_width)?;
                solver(s)?;
                positive("tolerance", *tolerance)
            }
            CheckConfig::OmegaScaling { potential, strengths, total, window, tolerance, n, solver: s, .. } => {
                for &a in strengths {
                    pot(&potential.with_strength(a))?;
                }
                if strengths.len() < 3 {
                    return Err("need at least three strengths".into());
                }
                positive("total", *total)?;
                if !(window[0] >= 0.0 && window[0] < window[1] && window[1] <= *total) {
                    return Err(format!("window {window:?} must lie in [0, total]"));
                }
                check_n(*n, dims, self.grid.half_width)?;
                solver(s)?;
                positive("tolerance", *tolerance)
            }
            CheckConfig::Regions { density, classes, pairs, queries_per_kind, tangent_tolerance, .. } => {
                if *density < 50 {
                    return Err(format!("density = {density} < 50"));
                }
                if classes.is_empty() || *queries_per_kind == 0 {
                    return Err("need classes and queries".into());
                }
                for cl in classes {
                    if let ClassConfig::Morrey(m) = cl {
                        morrey(m)?;
                    }
                }
                if pairs.iter().flatten().any(|&i| i >= classes.len()) {
                    return Err("pair index out of range".into());
                }
                positive("tangent_tolerance", *tangent_tolerance)
            }
            CheckConfig::Pseudoresolvent { potential, lambdas, margin, tail, tolerance, omega_total, n, solver: s, .. } => {
                pot(potential)?;
                if lambdas.is_empty() {
                    return Err("lambdas is empty".into());
                }
                positive("margin", *margin)?;
                if !(*tail > 0.0 && *tail < 1.0) {
                    return Err("tail must lie in (0, 1)".into());
                }
                positive("omega_total", *omega_total)?;
                check_n(*n, dims, self.grid.half_width)?;
                solver(s)?;
                positive("tolerance", *tolerance)
            }
        }
    }
}

fn check_n(n: Option<usize>, dims: &ProblemDims, half_width: f64) -> Result<(), String> {
    match n {
        None => Ok(()),
        Some(n) => morrey_lab::GridFunction::zeros(dims.n_dim, n, half_width)
            .map(|_| ())
            .map_err(|e| e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "schema_version = 1\n[dims]\nn_dim = 1\nm = 1\nmu = 1.0\n[grid]\nn = 256\nhalf_width = 8.0\n";

    fn with(check: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::parse(&format!("{BASE}[[check]]\n{check}"))
    }

    fn err(r: Result<ExperimentConfig, CliError>) -> String {
        match r {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_has_defaults() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(c.seed, 0);
        assert!(c.checks.is_empty());
        assert_eq!(c.solver(), SolverConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        assert!(err(ExperimentConfig::parse(&format!("{BASE}extra = 1\n"))).contains("extra"));
        assert!(err(ExperimentConfig::parse(&BASE.replace("mu = 1.0", "mu = 1.0\nnu = 2"))).contains("nu"));
        let e = err(with("kind = \"subordination\"\nname = \"s\"\ndatum = { id = \"dirac\" }\nt = 0.1\ntolerance = 1e-3\nbogus = 1\n"));
        assert!(e.contains("bogus"), "{e}");
        let e = err(with("kind = \"subordination\"\nname = \"s\"\ndatum = { id = \"dirac\", sigma = 1.0 }\nt = 0.1\ntolerance = 1e-3\n"));
        assert!(e.contains("sigma"), "{e}");
    }

    #[test]
    fn check_defaults_and_overrides() {
        let c = with(
            "kind = \"constant_potential\"\nname = \"c\"\ndatum = { id = \"half_box\" }\nc = 1.0\nfactor = 10.0\nsolver = { nodes = 64, theta = 3.0 }\n",
        )
        .unwrap();
        let CheckConfig::ConstantPotential { hard, solver, .. } = &c.checks[0] else { panic!() };
        assert!(*hard);
        let s = solver.apply(&c.solver());
        assert_eq!(s.nodes, 64);
        assert_eq!(s.theta, ThetaMode::Fixed(3.0));
        assert_eq!(s.horizon, SolverConfig::default().horizon);
        assert_eq!(c.checks[0].pipeline(), Pipeline::Perturb);
    }

    #[test]
    fn bad_names_are_rejected() {
        let e = err(with("kind = \"subordination\"\nname = \"a b\"\ndatum = { id = \"dirac\" }\nt = 0.1\ntolerance = 1e-3\n"));
        assert!(e.contains("a b"), "{e}");
    }

    #[test]
    fn classes_parse_as_pairs_or_bounded() {
        let c = with(
            "kind = \"regions\"\nname = \"r\"\ndensity = 50\nqueries_per_kind = 1\nclasses = [{ p = 2.0, ell = 0.5 }, \"bounded\"]\npairs = [[0, 1]]\ntangent_tolerance = 1e-12\n",
        )
        .unwrap();
        let CheckConfig::Regions { classes, .. } = &c.checks[0] else { panic!() };
        assert_eq!(classes[1], ClassConfig::Named(BoundedTag::Bounded));
        let e = err(with(
            "kind = \"regions\"\nname = \"r\"\ndensity = 50\nqueries_per_kind = 1\nclasses = [\"bounded\"]\npairs = [[0, 3]]\ntangent_tolerance = 1e-12\n",
        ));
        assert!(e.contains("r"), "{e}");
    }

    #[test]
    fn effective_config_round_trips() {
        let c = with(
            "kind = \"norms\"\nname = \"n\"\ndatum = { id = \"power_law\", beta = 0.5 }\nparams = [{ p = inf }, { p = 1.0, ell = 0.5 }]\nrefinement_tolerance = 0.05\n",
        )
        .unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
    }
}
