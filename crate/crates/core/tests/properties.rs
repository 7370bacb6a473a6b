use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use morrey_lab::duhamel::{DuhamelSolver, PotentialSpec, SolverConfig};
use morrey_lab::fixtures::{gaussian_bump, PowerLawRealization};
use morrey_lab::morrey_norm::morrey_norm;
use morrey_lab::scale_index::{
    bootstrap_chain, choose_alpha, existence_set_contains, exterior_tangent, from_index,
    regularity_set_contains, sigma_contains, smooths_to, star_region_contains, to_index, Side,
};
use morrey_lab::semigroup::{Semigroup, SymbolSpec};
use morrey_lab::verify::{fit_decay, log_grid, smoothing_agrees, smoothing_certificate, Propagator};
use morrey_lab::{GridFunction, MorreyParams, PotentialClass, ProblemDims, RadiusLadder, ScaleIndex};

fn dims_strategy() -> impl Strategy<Value = ProblemDims> {
    (1usize..=2, 1u32..=2, 0.25f64..=1.0).prop_map(|(n, m, mu)| ProblemDims::new(n, m, mu).unwrap())
}

/// Point of `J` with `gamma1 = g1`, slope `frac * gamma2_max`.
fn point(g1: f64, frac: f64, d: &ProblemDims) -> ScaleIndex {
    ScaleIndex::raw(g1, g1 * frac * d.gamma2_max())
}

fn random_point(rng: &mut ChaCha8Rng, d: &ProblemDims) -> ScaleIndex {
    if rng.gen_bool(0.05) {
        return ScaleIndex::ZERO;
    }
    point(rng.gen_range(1e-3..=1.0), rng.gen_range(1e-3..=1.0), d)
}

fn random_grid(seed: u64, n: usize, half_width: f64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridFunction::new(1, n, half_width, v).unwrap()
}

proptest! {
    #[test]
    fn index_round_trip(d in dims_strategy(), g1 in 1e-3f64..=1.0, frac in 1e-3f64..=1.0) {
        let g = point(g1, frac, &d);
        prop_assert!(g.in_triangle(&d));
        let mp = from_index(&g, &d).unwrap();
        let back = to_index(&mp, &d);
        prop_assert!((back.g1 - g.g1).abs() <= 1e-15 && (back.g2 - g.g2).abs() <= 1e-15 * (1.0 + g.g2));
        let again = from_index(&back, &d).unwrap();
        prop_assert!((again.p.as_f64() - mp.p.as_f64()).abs() <= 1e-12 * mp.p.as_f64());
        prop_assert!((again.ell - mp.ell).abs() <= 1e-12);
    }

    #[test]
    fn smoothing_matches_raw_inequalities(d in dims_strategy(), a in 1e-3f64..=1.0, fa in 1e-3f64..=1.0,
                                          b in 1e-3f64..=1.0, fb in 1e-3f64..=1.0) {
        let (g, gp) = (point(a, fa, &d), point(b, fb, &d));
        prop_assert!(smoothing_agrees(&g, &gp, &d));
        prop_assert!(smoothing_agrees(&g, &ScaleIndex::ZERO, &d));
    }

    #[test]
    fn sigma_is_conjunction(d in dims_strategy(), a in 1e-3f64..=1.0, fa in 1e-3f64..=1.0,
                            b in 1e-3f64..=0.5, fb in 1e-3f64..=1.0, p0 in 2.0f64..8.0, k in 0.05f64..0.95) {
        let g = point(a, fa, &d);
        let alpha = point(b, fb, &d);
        // class with kappa0 = k and 1/p0 <= 1/2
        let ell0 = (k * d.scale() * p0).min(d.n_dim as f64);
        let class = PotentialClass::new(MorreyParams::finite(p0, ell0, &d).unwrap(), &d);
        let s = sigma_contains(&g, &alpha, &class).unwrap();
        let want = existence_set_contains(&g, &alpha) && regularity_set_contains(&g, &alpha, &class).unwrap();
        prop_assert_eq!(s, want);
    }

    #[test]
    fn chain_hops_are_short(d in dims_strategy(), a in 1e-3f64..=1.0, fa in 1e-3f64..=1.0,
                            s in 0.0f64..=1.0, t in 0.0f64..=1.0, step in 0.05f64..0.95) {
        let g = point(a, fa, &d);
        // target below g in both gamma2 and slope
        let gp = ScaleIndex::raw(g.g1 * (1.0 - 0.999 * s), g.g2 * (1.0 - 0.999 * s) * (1.0 - 0.999 * t));
        prop_assume!(smooths_to(&g, &gp));
        let chain = bootstrap_chain(&g, &gp, step).unwrap();
        prop_assert_eq!(chain[0], g);
        prop_assert_eq!(*chain.last().unwrap(), gp);
        for w in chain.windows(2) {
            prop_assert!(w[0].g2 - w[1].g2 <= step + 1e-12);
            prop_assert!(smooths_to(&w[0], &w[1]));
        }
    }

    #[test]
    fn tangent_to_parabola(c in -2.0f64..2.0, depth in 0.01f64..4.0, left in any::<bool>()) {
        let d = c * c - depth;
        let side = if left { Side::Left } else { Side::Right };
        let x = exterior_tangent(|x| x * x, |x| 2.0 * x, |_| 2.0, -10.0, 10.0, c, d, side).unwrap();
        let want = if left { c - depth.sqrt() } else { c + depth.sqrt() };
        prop_assert!((x - want).abs() <= 1e-9 * (1.0 + want.abs()), "{} vs {}", x, want);
        prop_assert!((x * x + 2.0 * x * (c - x) - d).abs() <= 1e-12 * (1.0 + d.abs()));
        prop_assert_eq!(x < c, left);
    }

    #[test]
    fn morrey_norm_is_homogeneous(seed in any::<u64>(), c in -50.0f64..50.0, p in 1.0f64..4.0, ell in 0.05f64..=1.0) {
        let d = ProblemDims::new(1, 1, 1.0).unwrap();
        let mp = MorreyParams::finite(p, ell, &d).unwrap();
        let u = random_grid(seed, 128, 4.0);
        let ladder = RadiusLadder::standard(&u);
        let a = morrey_norm(&u.scale(c), &mp, &ladder);
        let b = c.abs() * morrey_norm(&u, &mp, &ladder);
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "{} {}", a, b);
    }

    #[test]
    fn morrey_norm_triangle(s1 in any::<u64>(), s2 in any::<u64>(), p in 1.0f64..4.0, ell in 0.05f64..=1.0) {
        let d = ProblemDims::new(1, 1, 1.0).unwrap();
        let mp = MorreyParams::finite(p, ell, &d).unwrap();
        let (u, v) = (random_grid(s1, 128, 4.0), random_grid(s2, 128, 4.0));
        let ladder = RadiusLadder::standard(&u);
        let lhs = morrey_norm(&u.add(&v).unwrap(), &mp, &ladder);
        let rhs = morrey_norm(&u, &mp, &ladder) + morrey_norm(&v, &mp, &ladder);
        prop_assert!(lhs <= rhs + 1e-12, "{} > {}", lhs, rhs);
    }

    #[test]
    fn semigroup_law(seed in any::<u64>(), t1 in 1e-3f64..0.5, t2 in 1e-3f64..0.5, mu in 0.3f64..=1.0, shift in -40i64..40) {
        let d = ProblemDims::new(1, 1, mu).unwrap();
        let sg = Semigroup::new(d, 256, 8.0, SymbolSpec::LaplacianPower { m: 1 }).unwrap();
        let u = random_grid(seed, 256, 8.0);
        let a = sg.apply(&u, t1 + t2).unwrap();
        let b = sg.apply(&sg.apply(&u, t2).unwrap(), t1).unwrap();
        prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-10 * u.max_abs());
        let x = sg.apply(&u.shifted(&[shift]).unwrap(), t1).unwrap();
        let y = sg.apply(&u, t1).unwrap().shifted(&[shift]).unwrap();
        prop_assert!(x.sub(&y).unwrap().max_abs() <= 1e-13 * u.max_abs().max(1.0));
    }

    #[test]
    fn fitter_recovers_power(k in -2.0f64..2.0, c in 0.01f64..100.0) {
        let ts = log_grid(1e-3, 1e-1, 9);
        let ns: Vec<f64> = ts.iter().map(|t| c * t.powf(k)).collect();
        let f = fit_decay(&ts, &ns, k, 1e-6).unwrap();
        prop_assert!((f.slope - k).abs() <= 1e-10);
        prop_assert!(f.pass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn perturbed_solve_is_linear(s1 in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let d = ProblemDims::new(1, 1, 1.0).unwrap();
        let n = 256;
        let sg = Semigroup::new(d, n, 8.0, SymbolSpec::LaplacianPower { m: 1 }).unwrap();
        let pot = PotentialSpec::power_law(1.0, 0.5, 1.0, PowerLawRealization::CellAverage, &d).unwrap();
        let cfg = SolverConfig { nodes: 32, ..SolverConfig::default() };
        let solver = DuhamelSolver::new(&sg, &[pot], cfg.clone()).unwrap();
        let u = gaussian_bump(1, n, 8.0, 0.5).unwrap();
        let v = random_grid(s1, n, 8.0);
        let x = solver.picard_solve(&u, &ScaleIndex::ZERO).unwrap();
        let y = solver.picard_solve(&v, &ScaleIndex::ZERO).unwrap();
        let z = solver.picard_solve(&u.axpby(a, &v, b).unwrap(), &ScaleIndex::ZERO).unwrap();
        let scale = 1.0 + a.abs() + b.abs();
        for k in 0..x.times.len() {
            let want = x.states[k].axpby(a, &y.states[k], b).unwrap();
            let err = z.states[k].sub(&want).unwrap().max_abs();
            prop_assert!(err <= 10.0 * cfg.picard_tol * scale, "node {}: {:e}", k, err);
        }
    }
}

#[test]
fn smoothing_relation_is_a_preorder() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut chained = 0;
    for _ in 0..10_000 {
        let d = ProblemDims::new(rng.gen_range(1..=2), rng.gen_range(1..=2), rng.gen_range(0.25..=1.0)).unwrap();
        let (a, b, c) = (random_point(&mut rng, &d), random_point(&mut rng, &d), random_point(&mut rng, &d));
        assert!(smooths_to(&a, &a));
        if smooths_to(&a, &b) && smooths_to(&b, &c) {
            chained += 1;
            assert!(smooths_to(&a, &c), "{a} {b} {c}");
        }
    }
    assert!(chained > 100, "{chained}");
}

#[test]
fn chosen_alpha_lies_in_every_sigma() {
    let d = ProblemDims::new(1, 1, 1.0).unwrap();
    let cl = |p: f64, l: f64| PotentialClass::new(MorreyParams::finite(p, l, &d).unwrap(), &d);
    let sets: Vec<Vec<PotentialClass>> = vec![
        vec![cl(1.0, 0.5)],
        vec![cl(2.0, 0.5)],
        vec![PotentialClass::bounded(&d)],
        vec![cl(1.5, 0.75), cl(2.0, 0.5)],
        vec![cl(2.0, 0.5), cl(4.0, 1.0)],
    ];
    for classes in &sets {
        // J_{gamma0} is bounded by the smallest class slope
        let smax = classes
            .iter()
            .filter(|c| !c.gamma0.is_zero())
            .map(|c| c.gamma0.slope())
            .fold(d.gamma2_max(), f64::min);
        for i in 1..=100 {
            for j in 1..=100 {
                let g1 = i as f64 / 100.0;
                let g = ScaleIndex::raw(g1, g1 * smax * j as f64 / 100.0);
                // several classes only share an alpha inside the common region
                let star = star_region_contains(&g, classes, &d);
                match choose_alpha(&g, classes) {
                    Ok(alpha) => {
                        assert!(star, "{g}");
                        for c in classes {
                            assert!(sigma_contains(&g, &alpha, c).unwrap(), "{g} {alpha}");
                        }
                    }
                    Err(e) => assert!(classes.len() > 1 && !star, "{g}: {e}"),
                }
            }
        }
    }
}

#[test]
fn identity_pair_has_zero_loss() {
    let d = ProblemDims::new(1, 1, 1.0).unwrap();
    let n = 2048;
    let sg = Semigroup::new(d, n, 8.0, SymbolSpec::LaplacianPower { m: 1 }).unwrap();
    let u0 = gaussian_bump(1, n, 8.0, 0.5).unwrap();
    let mp = MorreyParams::finite(2.0, 0.5, &d).unwrap();
    let ts = log_grid(1e-3, 1e-1, 9);
    let c = smoothing_certificate(&Propagator::Free(&sg), &u0, &mp, &mp, &d, &ts, 0.0, 0.1).unwrap();
    assert_eq!(c.d, 0.0);
    assert!(c.constant.is_finite() && c.constant <= 1.0 + 1e-9, "{}", c.constant);
}
