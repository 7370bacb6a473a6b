//! One runner per check kind. Runners return a [`CheckRecord`]; library
//! errors become failed records carrying the message.

use std::f64::consts::PI;

use num_complex::Complex64;

use morrey_lab::duhamel::{DuhamelSolver, PotentialSpec, Realization, SolverConfig};
use morrey_lab::morrey_norm::{morrey_norm, RadiusLadder};
use morrey_lab::scale_index::{exterior_tangent, to_index, Side};
use morrey_lab::semigroup::{mass, positivity_defect, selfsimilar_collapse, Semigroup, SymbolSpec};
use morrey_lab::verify::{
    cd_hypotheses, continuous_dependence_check, growth_rate, growth_samples, log_grid, omega_scaling,
    predicted_rate, pseudoresolvent_identity, run_oracle, smoothing_certificate, trace_check,
    MorreyTrace, NormKind, Propagator, RegionOracle, TRACE_THRESHOLD,
};
use morrey_lab::{Error, Exponent, GridFunction, MorreyParams, PotentialClass, ProblemDims, Result, ScaleIndex};

use crate::config::{
    CaseConfig, CheckConfig, ClassConfig, DatumConfig, ExperimentConfig, KernelOracle, MorreyConfig, NormConfig,
    PotentialConfig, SolverOverride,
};
use crate::regions::random_queries;
use crate::report::{CheckRecord, Relation, Table};

/// Shared inputs of every check in one run.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub dims: ProblemDims,
    pub seed: u64,
}

impl Context<'_> {
    fn n(&self, n: Option<usize>) -> usize {
        n.unwrap_or(self.cfg.grid.n)
    }

    fn half_width(&self) -> f64 {
        self.cfg.grid.half_width
    }

    fn spacing(&self, n: usize) -> f64 {
        2.0 * self.half_width() / n as f64
    }

    fn semigroup(&self, dims: ProblemDims, n: usize) -> Result<Semigroup> {
        let spec = if dims.m == self.dims.m {
            self.cfg.symbol()
        } else {
            SymbolSpec::LaplacianPower { m: dims.m }
        };
        Semigroup::new(dims, n, self.half_width(), spec)
    }

    fn datum(&self, d: &DatumConfig, n: usize) -> Result<GridFunction> {
        d.fixture(self.spacing(n)).build(self.dims.n_dim, n, self.half_width())
    }

    fn potential(&self, p: &PotentialConfig, n: usize) -> Result<PotentialSpec> {
        p.spec(&self.dims, self.spacing(n))
    }

    fn solver_cfg(&self, o: &SolverOverride) -> SolverConfig {
        o.apply(&self.cfg.solver())
    }

    fn params(&self, m: &MorreyConfig) -> Result<MorreyParams> {
        m.params(&self.dims)
    }
}

pub fn run_check(ctx: &Context<'_>, check: &CheckConfig) -> CheckRecord {
    let mut rec = CheckRecord::new(check.name(), check.kind(), check.hard());
    let outcome = match check {
        CheckConfig::KernelOracle { m, mu, oracle, times, tolerance, .. } => {
            kernel_oracle(ctx, &mut rec, *m, *mu, *oracle, times, *tolerance)
        }
        CheckConfig::KernelStructure { mus, t, mass_tolerance, positivity_floor, collapse_times, collapse, .. } => {
            kernel_structure(ctx, &mut rec, mus, *t, *mass_tolerance, *positivity_floor, collapse_times, collapse)
        }
        CheckConfig::Subordination { datum, t, tolerance, .. } => subordination(ctx, &mut rec, datum, *t, *tolerance),
        CheckConfig::Trace { datum, p, window, morrey, .. } => trace(ctx, &mut rec, datum, *p, *window, morrey.as_ref()),
        CheckConfig::Norms { datum, params, refinement_tolerance, .. } => {
            norms(ctx, &mut rec, datum, params, *refinement_tolerance)
        }
        CheckConfig::Smoothing { datum, from, to, t_min, t_max, samples, tolerance, potential, growth, n, .. } => {
            let ts = log_grid(*t_min, *t_max, *samples);
            smoothing(ctx, &mut rec, datum, from, to, &ts, *tolerance, potential.as_ref(), *growth, ctx.n(*n))
        }
        CheckConfig::ConstantPotential { datum, c, factor, solver, .. } => {
            constant_potential(ctx, &mut rec, datum, *c, *factor, solver)
        }
        CheckConfig::Contraction { cases, max_sweeps, slack, solver, .. } => {
            contraction(ctx, &mut rec, cases, *max_sweeps, *slack, solver)
        }
        CheckConfig::Identities { datum, potentials, t1, t2, factor, solver, .. } => {
            identities(ctx, &mut rec, datum, potentials, *t1, *t2, *factor, solver)
        }
        CheckConfig::ContinuousDependence { datum, potential, epsilons, from, to, tolerance, n, solver, .. } => {
            continuous_dependence(ctx, &mut rec, datum, potential, epsilons, from, to, *tolerance, ctx.n(*n), solver)
        }
        CheckConfig::OmegaScaling { datum, potential, strengths, norm, total, window, tolerance, n, solver, .. } => {
            omega(ctx, &mut rec, datum, potential, strengths, norm, *total, *window, *tolerance, ctx.n(*n), solver)
        }
        CheckConfig::Regions { density, queries_per_kind, classes, pairs, tangent_tolerance, .. } => {
            regions(ctx, &mut rec, *density, *queries_per_kind, classes, pairs, *tangent_tolerance)
        }
        CheckConfig::Pseudoresolvent {
            datum, potential, lambdas, margin, tail, tolerance, shift_tolerance, omega_total, n, solver, ..
        } => pseudoresolvent(
            ctx,
            &mut rec,
            datum,
            potential,
            lambdas,
            *margin,
            *tail,
            *tolerance,
            *shift_tolerance,
            *omega_total,
            ctx.n(*n),
            solver,
        ),
    };
    match outcome {
        Ok(()) => rec,
        Err(e) => {
            rec.pass = false;
            rec.error = Some(e.to_string());
            rec
        }
    }
}

/// Short id of a Morrey pair for metric names, e.g. `p1_l0.5`, `pinf`.
fn pl(mp: &MorreyParams) -> String {
    match mp.p {
        Exponent::Infinite => "pinf".into(),
        Exponent::Finite(p) => format!("p{p}_l{}", mp.ell),
    }
}

/// Closed form summed over the periodic images within `reach` periods.
fn periodized(f: &dyn Fn(f64) -> f64, x: &[f64], period: f64, reach: i64) -> f64 {
    let mut s = 0.0;
    match x {
        [a] => {
            for k in -reach..=reach {
                s += f((a + k as f64 * period).abs());
            }
        }
        [a, b] => {
            for i in -reach..=reach {
                for j in -reach..=reach {
                    s += f((a + i as f64 * period).hypot(b + j as f64 * period));
                }
            }
        }
        _ => unreachable!("grids are one- or two-dimensional"),
    }
    s
}

fn kernel_oracle(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    m: u32,
    mu: f64,
    oracle: KernelOracle,
    times: &[f64],
    tol: f64,
) -> Result<()> {
    let dims = ProblemDims::new(ctx.dims.n_dim, m, mu)?;
    let nd = dims.n_dim as f64;
    // the Poisson tail decays algebraically, so more images are summed
    let (f, reach): (Box<dyn Fn(f64, f64) -> f64>, i64) = match oracle {
        KernelOracle::Gaussian if m == 1 && mu == 1.0 => {
            (Box::new(move |t, r| (-r * r / (4.0 * t)).exp() / (4.0 * PI * t).powf(nd / 2.0)), 1)
        }
        // c_N t / (t^2 + r^2)^{(N+1)/2}
        KernelOracle::Poisson if m == 1 && mu == 0.5 => {
            let c = if dims.n_dim == 1 { 1.0 / PI } else { 1.0 / (2.0 * PI) };
            let reach = if dims.n_dim == 1 { 256 } else { 16 };
            (Box::new(move |t, r| c * t / (t * t + r * r).powf((nd + 1.0) / 2.0)), reach)
        }
        _ => {
            return Err(Error::InvalidInput(format!("no {oracle:?} closed form for m = {m}, mu = {mu}")));
        }
    };
    let sg = ctx.semigroup(dims, ctx.cfg.grid.n)?;
    let window = ctx.half_width() / 2.0;
    let period = 2.0 * ctx.half_width();
    for &t in times {
        let k = sg.kernel(t)?;
        let g = &k.values;
        let (mut err, mut top) = (0.0f64, 0.0f64);
        for (i, v) in g.values.iter().enumerate() {
            let x: Vec<f64> = if g.n_dim == 1 { vec![g.coord(i)] } else { vec![g.coord(i / g.n), g.coord(i % g.n)] };
            if x.iter().map(|c| c * c).sum::<f64>().sqrt() <= window {
                let o = periodized(&|r| f(t, r), &x, period, reach);
                err = err.max((v - o).abs());
                top = top.max(o.abs());
            }
        }
        rec.metric(format!("rel_sup_err_t{t}"), err / top, tol, Relation::AtMost);
    }
    rec.note(format!("{oracle:?} closed form summed over {reach} periods each side"));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn kernel_structure(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    mus: &[f64],
    t: f64,
    mass_tol: f64,
    floor: f64,
    collapse_times: &[f64],
    collapse: &[crate::config::CollapseConfig],
) -> Result<()> {
    let nd = ctx.dims.n_dim;
    for &mu in mus {
        let sg = ctx.semigroup(ProblemDims::new(nd, 1, mu)?, ctx.cfg.grid.n)?;
        let k = sg.kernel(t)?;
        rec.metric(format!("mass_err_mu{mu}"), (mass(&k.values) - 1.0).abs(), mass_tol, Relation::AtMost);
        rec.metric(format!("positivity_mu{mu}"), positivity_defect(&k.values), floor, Relation::AtLeast);
    }
    for c in collapse {
        let sg = ctx.semigroup(ProblemDims::new(nd, c.m, 1.0)?, ctx.cfg.grid.n)?;
        let ks = collapse_times.iter().map(|&t| sg.kernel(t)).collect::<Result<Vec<_>>>()?;
        rec.metric(format!("collapse_m{}", c.m), selfsimilar_collapse(&ks)?, c.tolerance, Relation::AtMost);
    }
    Ok(())
}

fn subordination(ctx: &Context<'_>, rec: &mut CheckRecord, datum: &DatumConfig, t: f64, tol: f64) -> Result<()> {
    let n = ctx.cfg.grid.n;
    let sg = ctx.semigroup(ProblemDims::new(ctx.dims.n_dim, 1, 0.5)?, n)?;
    let u0 = ctx.datum(datum, n)?;
    let a = sg.apply(&u0, t)?;
    let b = sg.subordination_apply(&u0, t)?;
    let rel = a.sub(&b)?.lp_norm(1.0) / a.lp_norm(1.0);
    rec.metric("rel_l1_gap", rel, tol, Relation::AtMost);
    rec.note(format!("datum {}", datum.label()));
    Ok(())
}

fn trace(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    datum: &DatumConfig,
    p: f64,
    window: f64,
    morrey: Option<&MorreyConfig>,
) -> Result<()> {
    let n = ctx.cfg.grid.n;
    let sg = ctx.semigroup(ctx.dims, n)?;
    let u0 = ctx.datum(datum, n)?;
    let mp = morrey.map(|m| ctx.params(m)).transpose()?;
    let exp = if p.is_infinite() { Exponent::Infinite } else { Exponent::Finite(p) };
    let tc = trace_check(&sg, &u0, exp, window, mp.as_ref())?;
    rec.metric("final_ratio", tc.final_ratio, TRACE_THRESHOLD, Relation::Below);
    rec.flag("monotone", tc.monotone);
    if let Some(r) = tc.rate {
        rec.note(format!("error ~ t^{r:.4}"));
    }
    let mut tab = Table::new("trace", &["t", "error"]);
    tc.samples.iter().for_each(|(t, e)| tab.push(vec![*t, *e]));
    match tc.morrey {
        MorreyTrace::Skipped => {}
        MorreyTrace::NotApplicable { modulus } => {
            rec.note(format!("Morrey trace not applicable: one-cell translation modulus {modulus:.4}"));
        }
        MorreyTrace::Checked { final_ratio, .. } => {
            rec.metric("morrey_final_ratio", final_ratio, TRACE_THRESHOLD, Relation::Below);
        }
    }
    rec.table(tab);
    Ok(())
}

fn norms(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    datum: &DatumConfig,
    params: &[MorreyConfig],
    tol: f64,
) -> Result<()> {
    let u0 = ctx.datum(datum, ctx.cfg.grid.n)?;
    let ladder = RadiusLadder::standard(&u0);
    let fine = ladder.refined(&u0);
    let mut tab = Table::new("norms", &["p", "ell", "norm", "refined", "change"]);
    for m in params {
        let mp = ctx.params(m)?;
        let a = morrey_norm(&u0, &mp, &ladder);
        let b = morrey_norm(&u0, &mp, &fine);
        let change = if a > 0.0 { (b - a).abs() / a } else { 0.0 };
        rec.metric(format!("refinement_change_{}", pl(&mp)), change, tol, Relation::AtMost);
        tab.push(vec![mp.p.as_f64(), mp.ell, a, b, change]);
    }
    rec.note(format!("datum {}", datum.label()));
    rec.table(tab);
    Ok(())
}

/// `(t, norm, predicted)` with the predicted power anchored at the data's
/// log-mean.
fn decay_table(file: &str, samples: &[(f64, f64)], predicted: f64) -> Table {
    let k = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0.ln()).sum::<f64>() / k;
    let my = samples.iter().map(|s| s.1.ln()).sum::<f64>() / k;
    let mut t = Table::new(file, &["t", "norm", "predicted"]);
    for &(x, y) in samples {
        t.push(vec![x, y, (my + predicted * (x.ln() - mx)).exp()]);
    }
    t
}

#[allow(clippy::too_many_arguments)]
fn smoothing(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    datum: &DatumConfig,
    from: &MorreyConfig,
    to: &MorreyConfig,
    ts: &[f64],
    tol: f64,
    potential: Option<&PotentialConfig>,
    growth: f64,
    n: usize,
) -> Result<()> {
    let sg = ctx.semigroup(ctx.dims, n)?;
    let u0 = ctx.datum(datum, n)?;
    let (from, to) = (ctx.params(from)?, ctx.params(to)?);
    let solver;
    let prop = match potential {
        None => Propagator::Free(&sg),
        Some(p) => {
            let spec = ctx.potential(p, n)?;
            solver = DuhamelSolver::new(&sg, &[spec], ctx.cfg.solver())?;
            Propagator::Perturbed(&solver)
        }
    };
    let c = smoothing_certificate(&prop, &u0, &from, &to, &ctx.dims, ts, growth, tol)?;
    rec.fit(format!("{} -> {}", from, to), &c.fit);
    rec.metric("constant", c.constant, f64::INFINITY, Relation::Below);
    rec.note(format!("datum {}; d = {}; a = {growth}", datum.label(), c.d));
    rec.table(decay_table("decay", &c.samples, c.fit.predicted));
    Ok(())
}

fn constant_potential(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    datum: &DatumConfig,
    c: f64,
    factor: f64,
    over: &SolverOverride,
) -> Result<()> {
    let n = ctx.cfg.grid.n;
    let sg = ctx.semigroup(ctx.dims, n)?;
    let u0 = ctx.datum(datum, n)?;
    let cfg = ctx.solver_cfg(over);
    let solver = DuhamelSolver::new(&sg, &[PotentialSpec::constant(c, &ctx.dims)?], cfg.clone())?;
    let tr = solver.picard_solve(&u0, &ScaleIndex::ZERO)?;
    let free = sg.apply_many(&u0, &tr.times)?;
    let mut worst = 0.0f64;
    let mut tab = Table::new("exponential", &["t", "error"]);
    for ((t, u), f) in tr.times.iter().zip(&tr.states).zip(&free) {
        let e = u.sub(&f.scale((c * t).exp()))?.max_abs();
        worst = worst.max(e);
        tab.push(vec![*t, e]);
    }
    rec.metric("max_node_error", worst, factor * cfg.picard_tol, Relation::AtMost);
    rec.flag("converged", tr.converged);
    rec.note(format!("K = {}, sweeps = {}", cfg.nodes, tr.sweeps()));
    rec.table(tab);
    Ok(())
}

fn contraction(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    cases: &[CaseConfig],
    max_sweeps: usize,
    slack: f64,
    over: &SolverOverride,
) -> Result<()> {
    let n = ctx.cfg.grid.n;
    let sg = ctx.semigroup(ctx.dims, n)?;
    let cfg = ctx.solver_cfg(over);
    let mut tab = Table::new("ratios", &["case", "sweep", "ratio", "bound"]);
    for (k, case) in cases.iter().enumerate() {
        let spec = ctx.potential(&case.potential, n)?;
        let label = spec.label();
        let solver = DuhamelSolver::new(&sg, &[spec], cfg.clone())?;
        let u0 = ctx.datum(&case.datum, n)?;
        let gamma = match &case.space {
            Some(m) => to_index(&ctx.params(m)?, &ctx.dims),
            None => ScaleIndex::ZERO,
        };
        let tr = solver.picard_solve(&u0, &gamma)?;
        let bound = tr.predicted_factor + slack;
        let ratios = tr.ratios();
        let worst = ratios.iter().cloned().fold(0.0, f64::max);
        rec.metric(format!("case{k}_max_ratio"), worst, bound, Relation::AtMost);
        rec.metric(format!("case{k}_sweeps"), tr.sweeps() as f64, max_sweeps as f64, Relation::AtMost);
        rec.flag(format!("case{k}_converged"), tr.converged);
        for (j, r) in ratios.iter().enumerate() {
            tab.push(vec![k as f64, (j + 1) as f64, *r, bound]);
        }
        rec.note(format!(
            "case{k}: {label}, datum {}, gamma {gamma}, theta {}, predicted factor {:.4}",
            case.datum.label(),
            tr.theta,
            tr.predicted_factor
        ));
    }
    rec.table(tab);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn identities(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    datum: &DatumConfig,
    potentials: &[PotentialConfig],
    t1: f64,
    t2: f64,
    factor: f64,
    over: &SolverOverride,
) -> Result<()> {
    let n = ctx.cfg.grid.n;
    let sg = ctx.semigroup(ctx.dims, n)?;
    let u0 = ctx.datum(datum, n)?;
    let cfg = ctx.solver_cfg(over);
    let specs = potentials.iter().map(|p| ctx.potential(p, n)).collect::<Result<Vec<_>>>()?;
    let solver = DuhamelSolver::new(&sg, &specs, cfg.clone())?;
    let z = ScaleIndex::ZERO;
    let joint = solver.picard_solve(&u0, &z)?;
    let gap = solver.refinement_gap(&u0, &joint)?;
    let combined = cfg.picard_tol + gap;
    let bound = factor * combined;
    rec.note(format!("combined tolerance = picard_tol {} + refinement gap {gap:.3e}", cfg.picard_tol));
    // semigroup property, with the single-potential evolution of the first potential
    let one = DuhamelSolver::new(&sg, &specs[..1], cfg.clone())?;
    let tr = one.picard_solve(&u0, &z)?;
    let a = one.evaluate(&tr, t1 + t2)?;
    let mid = one.evaluate(&tr, t1)?;
    let b = one.evaluate(&one.picard_solve(&mid, &z)?, t2)?;
    let sg_gap = one.refinement_gap(&u0, &tr)?;
    let sg_bound = factor * (cfg.picard_tol + sg_gap);
    rec.metric("semigroup_property", a.sub(&b)?.max_abs() / a.max_abs(), sg_bound, Relation::AtMost);
    let s01 = solver.sequential_solve(&u0, &[0, 1], &z)?;
    let s10 = solver.sequential_solve(&u0, &[1, 0], &z)?;
    rec.metric("joint_vs_seq01", solver.trajectory_distance(&joint, &s01)?, bound, Relation::AtMost);
    rec.metric("joint_vs_seq10", solver.trajectory_distance(&joint, &s10)?, bound, Relation::AtMost);
    rec.metric("seq01_vs_seq10", solver.trajectory_distance(&s01, &s10)?, bound, Relation::AtMost);
    rec.note(format!(
        "potentials {}; semigroup split {t1} + {t2}",
        specs.iter().map(|s| s.label()).collect::<Vec<_>>().join(" + ")
    ));
    Ok(())
}

fn target_norm(to: &MorreyParams, grid: &GridFunction) -> NormKind {
    match to.p {
        Exponent::Infinite => NormKind::Lp(Exponent::Infinite),
        _ => NormKind::Morrey(*to, RadiusLadder::standard(grid)),
    }
}

#[allow(clippy::too_many_arguments)]
fn continuous_dependence(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    datum: &DatumConfig,
    potential: &PotentialConfig,
    epsilons: &[f64],
    from: &MorreyConfig,
    to: &MorreyConfig,
    tol: f64,
    n: usize,
    over: &SolverOverride,
) -> Result<()> {
    let sg = ctx.semigroup(ctx.dims, n)?;
    let u0 = ctx.datum(datum, n)?;
    let cfg = ctx.solver_cfg(over);
    let (from, to) = (ctx.params(from)?, ctx.params(to)?);
    let spec = ctx.potential(potential, n)?;
    cd_hypotheses(&from, &to, &spec.class, &ctx.dims)?;
    let gamma = to_index(&from, &ctx.dims);
    let d = -predicted_rate(&ctx.dims, &from, &to);
    let base = DuhamelSolver::new(&sg, std::slice::from_ref(&spec), cfg.clone())?;
    let tr = base.picard_solve(&u0, &gamma)?;
    let norm = target_norm(&to, &u0);
    let s0 = potential.strength();
    let (mut dist, mut diffs) = (vec![], vec![]);
    let mut tab = Table::new("dependence", &["eps", "potential_distance", "weighted_difference", "constant"]);
    for &eps in epsilons {
        let other = ctx.potential(&potential.with_strength(s0 * (1.0 + eps)), n)?;
        let s = DuhamelSolver::new(&sg, &[other], cfg.clone())?;
        let t2 = s.picard_solve(&u0, &gamma)?;
        let dv = s.potentials[0].values.sub(&base.potentials[0].values)?;
        let nv = morrey_norm(&dv, &spec.class.params, &RadiusLadder::standard(&dv));
        let w = morrey_lab::verify::weighted_distance(&tr.times, &tr.states, &t2.states, d, &norm)?;
        tab.push(vec![eps, nv, w, w / nv]);
        dist.push(nv);
        diffs.push(w);
    }
    let r = continuous_dependence_check(&dist, &diffs, tol)?;
    rec.fit("log difference vs log distance", &r.fit);
    rec.metric("constant_spread", r.spread, 2.0, Relation::AtMost);
    rec.note(format!("{} -> {}, d = {d}, potential {}", from, to, spec.label()));
    rec.table(tab);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn omega(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    datum: &DatumConfig,
    potential: &PotentialConfig,
    strengths: &[f64],
    norm: &NormConfig,
    total: f64,
    window: [f64; 2],
    tol: f64,
    n: usize,
    over: &SolverOverride,
) -> Result<()> {
    let sg = ctx.semigroup(ctx.dims, n)?;
    let u0 = ctx.datum(datum, n)?;
    let cfg = ctx.solver_cfg(over);
    let nk = match *norm {
        NormConfig::Lp { p } if p.is_infinite() => NormKind::Lp(Exponent::Infinite),
        NormConfig::Lp { p } => NormKind::Lp(Exponent::Finite(p)),
        NormConfig::Morrey { p, ell } => {
            NormKind::Morrey(MorreyParams::finite(p, ell, &ctx.dims)?, RadiusLadder::standard(&u0))
        }
    };
    let (mut norms, mut omegas) = (vec![], vec![]);
    let mut kappa0 = 0.0;
    let mut flags = vec![];
    let mut tab = Table::new("growth", &["strength", "potential_norm", "omega", "omega_first_half", "omega_second_half"]);
    for &s in strengths {
        let spec = ctx.potential(&potential.with_strength(s), n)?;
        kappa0 = spec.class.kappa;
        let solver = DuhamelSolver::new(&sg, &[spec], cfg.clone())?;
        let samples = growth_samples(&solver, &u0, &ScaleIndex::ZERO, total, &nk)?;
        let g = growth_rate(&samples, (window[0], window[1]))?;
        flags.push((format!("exponential_s{s}"), g.exponential));
        tab.push(vec![s, solver.potentials[0].norm, g.omega, g.halves.0, g.halves.1]);
        norms.push(solver.potentials[0].norm);
        omegas.push(g.omega);
    }
    let r = omega_scaling(&norms, &omegas, kappa0, tol)?;
    rec.fit("log omega vs log norm", &r.fit);
    for (name, ok) in flags {
        rec.flag(name, ok);
    }
    rec.note(format!("kappa0 = {kappa0}; fitted constant C = {:.6}", r.constant));
    rec.table(tab);
    Ok(())
}

fn class_of(c: &ClassConfig, dims: &ProblemDims) -> Result<PotentialClass> {
    match c {
        ClassConfig::Named(_) => Ok(PotentialClass::bounded(dims)),
        ClassConfig::Morrey(m) => Ok(PotentialClass::new(m.params(dims)?, dims)),
    }
}

fn regions(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    density: usize,
    per_kind: usize,
    classes: &[ClassConfig],
    pairs: &[[usize; 2]],
    tangent_tol: f64,
) -> Result<()> {
    let classes = classes.iter().map(|c| class_of(c, &ctx.dims)).collect::<Result<Vec<_>>>()?;
    let pairs: Vec<[PotentialClass; 2]> = pairs.iter().map(|p| [classes[p[0]], classes[p[1]]]).collect();
    let qs = random_queries(&ctx.dims, &classes, &pairs, per_kind, ctx.seed);
    let oracle = RegionOracle::new(ctx.dims, density)?;
    let s = run_oracle(&oracle, &qs);
    rec.metric("interior_disagreements", s.interior_failures() as f64, 0.0, Relation::AtMost);
    rec.metric("queries", s.queries as f64, 1000.0, Relation::AtLeast);
    rec.note(format!("{} disagreements, all listed below", s.disagreements.len()));
    for d in &s.disagreements {
        rec.note(format!(
            "{}: closed form {}, oracle {}, boundary distance {:.3e}, boundary cell {}",
            d.query,
            d.closed_form,
            d.oracle,
            d.boundary_distance,
            d.boundary_cell
        ));
    }
    // f = x^2: tangents from (c, d) touch at c -+ sqrt(c^2 - d)
    let mut worst = 0.0f64;
    for (c, d) in [(0.0, -1.0), (0.5, -0.75), (-1.0, 0.0), (1.5, -4.0)] {
        for side in [Side::Left, Side::Right] {
            let x = exterior_tangent(|x| x * x, |x| 2.0 * x, |_| 2.0, -10.0, 10.0, c, d, side)?;
            let root = (c * c - d).sqrt();
            let want = if side == Side::Left { c - root } else { c + root };
            worst = worst.max((x - want).abs() / (1.0 + want.abs()));
            let miss = (x * x + 2.0 * x * (c - x) - d).abs() / (1.0 + d.abs());
            worst = worst.max(miss);
        }
    }
    rec.metric("tangent_parabola_error", worst, tangent_tol, Relation::AtMost);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn pseudoresolvent(
    ctx: &Context<'_>,
    rec: &mut CheckRecord,
    datum: &DatumConfig,
    potential: &PotentialConfig,
    lambdas: &[[f64; 2]],
    margin: f64,
    tail: f64,
    tol: f64,
    shift_tol: Option<f64>,
    omega_total: f64,
    n: usize,
    over: &SolverOverride,
) -> Result<()> {
    let sg = ctx.semigroup(ctx.dims, n)?;
    let u0 = ctx.datum(datum, n)?;
    let cfg = ctx.solver_cfg(over);
    let spec = ctx.potential(potential, n)?;
    let constant = matches!(spec.realization, Realization::Constant(_));
    let solver = DuhamelSolver::new(&sg, &[spec], cfg)?;
    let z = ScaleIndex::ZERO;
    let samples = growth_samples(&solver, &u0, &z, omega_total, &NormKind::Lp(Exponent::Infinite))?;
    let g = growth_rate(&samples, (omega_total / 2.0, omega_total))?;
    let omega = g.omega.max(0.0);
    rec.note(format!("fitted omega = {:.6} on [{}, {omega_total}]", g.omega, omega_total / 2.0));
    for l in lambdas {
        let lam = Complex64::new(l[0], l[1]);
        let r = pseudoresolvent_identity(&solver, &u0, &z, lam, omega, margin, tail)?;
        rec.metric(format!("residual_{}{:+}i", l[0], l[1]), r.residual, tol, Relation::AtMost);
        if let (Some(s), Some(bound), true) = (r.shift_residual, shift_tol, constant) {
            rec.metric(format!("shift_residual_{}{:+}i", l[0], l[1]), s, bound, Relation::AtMost);
        }
        rec.note(format!(
            "lambda {lam}: horizon {:.3}, dropped tail {:.1e}, quadrature tolerance {:.1e}",
            r.horizon, r.tail, r.quadrature_tolerance
        ));
    }
    Ok(())
}
