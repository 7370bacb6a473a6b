//! Golden-file comparison of the 2-D spot-check suite. The golden report is
//! the first blessed run; set `MORREY_LAB_BLESS=1` to rewrite it. Values are
//! compared to 1e-9 relative (plus 1e-12 absolute) because FFT code paths may
//! differ between CPUs; everything else must match exactly.

use std::path::Path;

use morrey_lab_cli::report::Metric;
use morrey_lab_cli::{run, ExperimentConfig, ExperimentReport, RunOptions};

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-12
}

fn same_metric(a: &Metric, b: &Metric) -> bool {
    a.name == b.name && a.relation == b.relation && a.pass == b.pass && close(a.value, b.value) && close(a.bound, b.bound)
}

#[test]
fn spot_suite_matches_golden_report() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let cfg = ExperimentConfig::load(&root.join("../../configs/spot2d.toml")).unwrap();
    let got = run(&cfg, &RunOptions { jobs: Some(2), ..RunOptions::default() }).unwrap();
    let golden = root.join("tests/golden/spot2d.toml");
    if std::env::var_os("MORREY_LAB_BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, got.to_toml()).unwrap();
    }
    let want = ExperimentReport::parse(&std::fs::read_to_string(&golden).unwrap()).unwrap();
    assert_eq!(got.config, want.config);
    assert_eq!((got.pass, got.hard_failures, got.soft_failures), (want.pass, want.hard_failures, want.soft_failures));
    assert_eq!(got.checks.len(), want.checks.len());
    for (g, w) in got.checks.iter().zip(&want.checks) {
        assert_eq!((&g.name, &g.kind, g.hard, g.pass, &g.error), (&w.name, &w.kind, w.hard, w.pass, &w.error));
        assert_eq!(g.metrics.len(), w.metrics.len(), "{}", g.name);
        for (a, b) in g.metrics.iter().zip(&w.metrics) {
            assert!(same_metric(a, b), "{}: {a:?} vs {b:?}", g.name);
        }
        assert_eq!(g.fits.len(), w.fits.len(), "{}", g.name);
        for (a, b) in g.fits.iter().zip(&w.fits) {
            assert_eq!((&a.label, a.pass), (&b.label, b.pass));
            assert!(close(a.slope, b.slope) && close(a.predicted, b.predicted), "{}: {a:?} vs {b:?}", g.name);
        }
        assert_eq!(g.tables, w.tables);
    }
}
