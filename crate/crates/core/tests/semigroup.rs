use morrey_lab::fixtures::dirac;
use morrey_lab::semigroup::{
    gaussian_decay_fit, mass, positivity_defect, selfsimilar_collapse, Semigroup, SymbolSpec,
};
use morrey_lab::{GridFunction, ProblemDims};

const N: usize = 4096;
const L: f64 = 8.0;

fn sg(m: u32, mu: f64) -> Semigroup {
    let d = ProblemDims::new(1, m, mu).unwrap();
    Semigroup::new(d, N, L, SymbolSpec::LaplacianPower { m }).unwrap()
}

fn window_rel_err(k: &GridFunction, oracle: impl Fn(f64) -> f64) -> f64 {
    let (mut err, mut top) = (0.0f64, 0.0f64);
    for i in 0..k.n {
        let x = k.coord(i);
        if x.abs() <= L / 2.0 {
            let o = oracle(x);
            err = err.max((k.values[i] - o).abs());
            top = top.max(o.abs());
        }
    }
    err / top
}

#[test]
fn heat_kernel_matches_gaussian() {
    let s = sg(1, 1.0);
    for t in [0.01, 0.1] {
        let k = s.kernel(t).unwrap();
        let e = window_rel_err(&k.values, |x| {
            (-x * x / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
        });
        assert!(e <= 1e-6, "t={t}: {e}");
    }
}

#[test]
fn half_power_matches_poisson() {
    let s = sg(1, 0.5);
    let t = 0.05;
    let k = s.kernel(t).unwrap();
    let e = window_rel_err(&k.values, |x| t / (std::f64::consts::PI * (t * t + x * x)));
    assert!(e <= 1e-4, "{e}");
}

#[test]
fn mass_and_positivity() {
    for mu in [0.5, 0.75, 1.0] {
        let k = sg(1, mu).kernel(0.05).unwrap();
        assert!((mass(&k.values) - 1.0).abs() <= 1e-8);
        assert!(positivity_defect(&k.values) >= -1e-9, "mu={mu}");
    }
}

#[test]
fn profiles_collapse() {
    for (m, tol) in [(1, 1e-3), (2, 1e-2)] {
        let s = sg(m, 1.0);
        let ks: Vec<_> = [0.01, 0.04].iter().map(|&t| s.kernel(t).unwrap()).collect();
        let r = selfsimilar_collapse(&ks).unwrap();
        assert!(r <= tol, "m={m}: {r}");
        assert_eq!(selfsimilar_collapse(&ks[..1]).unwrap(), 0.0);
    }
}

#[test]
fn biharmonic_profile_decays() {
    let k = sg(2, 1.0).kernel(0.01).unwrap();
    let fit = gaussian_decay_fit(&k, 0.0, 1e-10).unwrap();
    assert!(fit.c > 0.0, "{fit:?}");
}

#[test]
fn subordination_agrees_with_multiplier() {
    let s = sg(1, 0.5);
    let d = dirac(1, N, L).unwrap();
    let t = 0.5;
    let a = s.apply(&d, t).unwrap();
    let b = s.subordination_apply(&d, t).unwrap();
    let rel = a.sub(&b).unwrap().lp_norm(1.0) / a.lp_norm(1.0);
    assert!(rel <= 1e-4, "{rel}");
    // Poisson kernel summed over the periods 2L of the torus
    let per = 2.0 * L;
    let w = 2.0 * std::f64::consts::PI / per;
    let poisson = GridFunction::from_fn(1, N, L, |x| {
        (w * t).sinh() / (per * ((w * t).cosh() - (w * x[0]).cos()))
    })
    .unwrap();
    let rel = b.sub(&poisson).unwrap().lp_norm(1.0) / poisson.lp_norm(1.0);
    assert!(rel <= 1e-3, "{rel}");
    let zero = GridFunction::zeros(1, N, L).unwrap();
    assert_eq!(s.subordination_apply(&zero, t).unwrap().max_abs(), 0.0);
}

#[test]
fn semigroup_law_and_translation() {
    let s = sg(1, 0.75);
    let u = GridFunction::from_fn(1, N, L, |x| (-(x[0] - 1.0).powi(2)).exp()).unwrap();
    let a = s.apply(&u, 0.3).unwrap();
    let b = s.apply(&s.apply(&u, 0.1).unwrap(), 0.2).unwrap();
    assert!(a.sub(&b).unwrap().max_abs() <= 1e-10 * u.max_abs());
    let shifted = s.apply(&u.shifted(&[37]).unwrap(), 0.2).unwrap();
    let after = s.apply(&u, 0.2).unwrap().shifted(&[37]).unwrap();
    assert!(shifted.sub(&after).unwrap().max_abs() <= 1e-13);
}

#[test]
fn dirac_sup_scales() {
    let s = sg(1, 1.0);
    let d = dirac(1, N, L).unwrap();
    let ts: Vec<f64> = (0..9).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect();
    let us = s.apply_many(&d, &ts).unwrap();
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = us.iter().map(|u| u.max_abs().ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 9.0, ys.iter().sum::<f64>() / 9.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() <= 0.03 * 0.5, "{slope}");
}
