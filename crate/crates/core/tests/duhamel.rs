use morrey_lab::duhamel::{
    contraction_bound, singular_convolve, DuhamelSolver, PotentialSpec, SolverConfig, ThetaMode,
};
use morrey_lab::fixtures::{gaussian_bump, PowerLawRealization};
use morrey_lab::semigroup::{Semigroup, SymbolSpec};
use morrey_lab::{GridFunction, ProblemDims, ScaleIndex};

const N: usize = 4096;
const L: f64 = 8.0;

fn heat() -> Semigroup {
    let d = ProblemDims::new(1, 1, 1.0).unwrap();
    Semigroup::new(d, N, L, SymbolSpec::LaplacianPower { m: 1 }).unwrap()
}

fn dims() -> ProblemDims {
    ProblemDims::new(1, 1, 1.0).unwrap()
}

fn u0() -> GridFunction {
    gaussian_bump(1, N, L, 0.5).unwrap()
}

fn power(a: f64) -> PotentialSpec {
    PotentialSpec::power_law(a, 0.5, 1.0, PowerLawRealization::CellAverage, &dims()).unwrap()
}

#[test]
fn constant_potential_is_exponential_factor() {
    let sg = heat();
    let c = 1.0;
    // first-interval quadrature error scales like K^-2
    let cfg = SolverConfig {
        nodes: 512,
        ..SolverConfig::default()
    };
    let pot = PotentialSpec::constant(c, &dims()).unwrap();
    let solver = DuhamelSolver::new(&sg, &[pot], cfg.clone()).unwrap();
    let tr = solver.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
    assert!(tr.converged);
    let mut worst = 0.0f64;
    for (t, u) in tr.times.iter().zip(&tr.states) {
        let want = sg.apply(&u0(), *t).unwrap().scale((c * t).exp());
        worst = worst.max(u.sub(&want).unwrap().max_abs());
    }
    assert!(worst <= 10.0 * cfg.picard_tol, "{worst}");
}

#[test]
fn no_potential_is_free_evolution() {
    let sg = heat();
    let solver = DuhamelSolver::new(&sg, &[], SolverConfig::default()).unwrap();
    let tr = solver.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
    assert_eq!(tr.sweeps(), 1);
    let last = sg.apply(&u0(), 0.25).unwrap();
    assert!(tr.states.last().unwrap().sub(&last).unwrap().max_abs() < 1e-15);
}

#[test]
fn power_law_contracts() {
    let sg = heat();
    for a in [0.5, 1.0, 2.0] {
        let solver = DuhamelSolver::new(&sg, &[power(a)], SolverConfig::default()).unwrap();
        let tr = solver.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
        assert!(tr.converged && tr.sweeps() <= 25);
        for r in tr.ratios() {
            assert!(r <= tr.predicted_factor + 0.1);
        }
    }
}

#[test]
fn power_law_self_convergence() {
    let sg = heat();
    let cfg = SolverConfig::default();
    let coarse = DuhamelSolver::new(&sg, &[power(1.0)], cfg.clone()).unwrap();
    let fine_cfg = SolverConfig {
        nodes: 2 * cfg.nodes,
        ..cfg.clone()
    };
    let fine = DuhamelSolver::new(&sg, &[power(1.0)], fine_cfg).unwrap();
    let a = coarse.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
    let b = fine.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
    let mut worst = 0.0f64;
    for k in 0..a.times.len() {
        worst = worst.max(a.states[k].sub(&b.states[2 * k]).unwrap().max_abs());
    }
    assert!(worst <= 1e-5, "{worst}");
    let gap = coarse.refinement_gap(&u0(), &a).unwrap();
    let top = a.states.iter().map(|u| u.max_abs()).fold(0.0, f64::max);
    assert!((gap - worst / top).abs() <= 1e-3 * gap, "{gap} {}", worst / top);
}

#[test]
fn joint_and_sequential_agree() {
    let sg = heat();
    let pots = [power(1.0), PotentialSpec::constant(0.5, &dims()).unwrap()];
    let solver = DuhamelSolver::new(&sg, &pots, SolverConfig::default()).unwrap();
    let joint = solver.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
    let s01 = solver.sequential_solve(&u0(), &[0, 1], &ScaleIndex::ZERO).unwrap();
    let s10 = solver.sequential_solve(&u0(), &[1, 0], &ScaleIndex::ZERO).unwrap();
    let diff = |a, b| solver.trajectory_distance(a, b).unwrap();
    let (d1, d2, d3) = (diff(&joint, &s01), diff(&joint, &s10), diff(&s01, &s10));
    assert!(d1.max(d2).max(d3) <= 1e-6, "{d1:e} {d2:e} {d3:e}");
}

#[test]
fn semigroup_property_and_extension() {
    let sg = heat();
    let solver = DuhamelSolver::new(&sg, &[power(1.0)], SolverConfig::default()).unwrap();
    let tr = solver.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
    let a = solver.evaluate(&tr, 0.17).unwrap();
    let mid = solver.evaluate(&tr, 0.07).unwrap();
    let tr2 = solver.picard_solve(&mid, &ScaleIndex::ZERO).unwrap();
    let b = solver.evaluate(&tr2, 0.1).unwrap();
    let d = a.sub(&b).unwrap().max_abs();
    let far = solver.evaluate(&tr, 0.5).unwrap();
    let long_cfg = SolverConfig {
        horizon: 0.5,
        nodes: 256,
        ..SolverConfig::default()
    };
    let direct = DuhamelSolver::new(&sg, &[power(1.0)], long_cfg).unwrap();
    let dtr = direct.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
    let e = far.sub(dtr.states.last().unwrap()).unwrap().max_abs();
    assert!(d <= 1e-5, "restart at 0.07: {d:e}");
    assert!(e <= 1e-4, "extension to 0.5: {e:e}");
}

#[test]
fn linearity() {
    let sg = heat();
    let solver = DuhamelSolver::new(&sg, &[power(1.0)], SolverConfig::default()).unwrap();
    let v0 = GridFunction::from_fn(1, N, L, |x| (-(x[0] - 1.0).powi(2)).exp() * 0.3).unwrap();
    let a = solver.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
    let b = solver.picard_solve(&v0, &ScaleIndex::ZERO).unwrap();
    let c = solver
        .picard_solve(&u0().axpby(2.0, &v0, -3.0).unwrap(), &ScaleIndex::ZERO)
        .unwrap();
    let mut worst = 0.0f64;
    for k in 0..a.times.len() {
        let want = a.states[k].axpby(2.0, &b.states[k], -3.0).unwrap();
        worst = worst.max(c.states[k].sub(&want).unwrap().max_abs());
    }
    assert!(worst <= 5e-7, "{worst:e}");
}

#[test]
fn convolve_examples() {
    let times: Vec<f64> = (0..=64).map(|k| (k as f64 / 64.0).powi(2)).collect();
    let one = GridFunction::from_fn(1, 8, 1.0, |_| 1.0).unwrap();
    let g = vec![one.clone(); times.len()];
    let id = |_: f64, p: &GridFunction| Ok(p.clone());
    let v = singular_convolve(&times, &g, 64, 0.0, 0.0, id).unwrap();
    assert!((v.values[0] - 1.0).abs() < 1e-13);
    let v = singular_convolve(&times, &g, 64, 0.5, 0.5, id).unwrap();
    assert!((v.values[0] - std::f64::consts::PI).abs() < 1e-3, "{}", v.values[0]);
    let v = singular_convolve(&times, &g, 64, 0.5, 0.0, id).unwrap();
    assert!((v.values[0] - 2.0).abs() < 1e-6);
    assert!(singular_convolve(&times, &g, 64, 1.0, 0.0, id).is_err());
}

#[test]
fn bound_dominates_direct_sup() {
    // d_i = d_gamma = 0: c(theta) = (1 - e^{-theta T}) / theta
    for theta in [1.0, 10.0, 100.0] {
        let b = contraction_bound(theta, 1.0, &[0.0], 0.0).unwrap()[0];
        let direct = (1.0 - (-theta).exp()) / theta;
        assert!(b >= direct * (1.0 - 1e-9), "{theta}: {b} {direct}");
        assert!(b <= 1.1 / theta, "{theta}: {b}");
    }
    assert_eq!(SolverConfig::default().theta, ThetaMode::Auto);
}

#[test]
fn consistent_across_declared_spaces() {
    let sg = heat();
    let solver = DuhamelSolver::new(&sg, &[power(1.0)], SolverConfig::default()).unwrap();
    let a = solver.picard_solve(&u0(), &ScaleIndex::ZERO).unwrap();
    // the same datum viewed in M^{2, 1/2}
    let gamma = ScaleIndex::new(0.5, 0.125, &dims()).unwrap();
    let b = solver.picard_solve(&u0(), &gamma).unwrap();
    assert!(b.b > 0.0 && b.converged, "{} {}", b.b, b.converged);
    let worst = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.sub(y).unwrap().max_abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn rough_datum_converges() {
    let sg = heat();
    let solver = DuhamelSolver::new(&sg, &[power(1.0)], SolverConfig::default()).unwrap();
    let rough = morrey_lab::fixtures::power_law_cell_average(1, N, L, 0.25, 1.0).unwrap();
    let gamma = ScaleIndex::new(0.5, 0.125, &dims()).unwrap();
    let tr = solver.picard_solve(&rough, &gamma).unwrap();
    assert!(tr.converged && tr.sweeps() <= 25);
    for r in tr.ratios() {
        assert!(r <= tr.predicted_factor + 0.1);
    }
}

#[test]
fn trajectory_export_round_trip() {
    let d = dims();
    let sg = Semigroup::new(d, 256, L, SymbolSpec::LaplacianPower { m: 1 }).unwrap();
    let cfg = SolverConfig {
        nodes: 16,
        ..SolverConfig::default()
    };
    let solver = DuhamelSolver::new(&sg, &[power(1.0)], cfg).unwrap();
    let u = gaussian_bump(1, 256, L, 0.5).unwrap();
    let tr = solver.picard_solve(&u, &ScaleIndex::ZERO).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = morrey_lab::io::export_trajectory(&tr, dir.path()).unwrap();
    let (back, states) = morrey_lab::io::import_trajectory(dir.path()).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.times, tr.times);
    assert_eq!(back.residuals, tr.residuals);
    assert_eq!(states.len(), tr.states.len());
    for (a, b) in states.iter().zip(&tr.states) {
        assert_eq!(a.values, b.values);
    }
    let text = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(text.contains("schema_version = 1"));
    let bad = text.replace("schema_version = 1", "schema_version = 1\nextra = 2");
    std::fs::write(dir.path().join("manifest.toml"), bad).unwrap();
    assert!(morrey_lab::io::import_trajectory(dir.path()).is_err());
}
