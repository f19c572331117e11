use confmetric::analysis::*;
use confmetric::point_metrics::{delta_metric, hyperbolic_punctured_disk};
use confmetric::{DomainSpec, ExtendedPoint};

#[test]
fn sweep_on_the_disk_is_clean() {
    let config = SweepConfig { pairs_per_domain: 100, ..SweepConfig::default() };
    let report = inequality_sweep(&[DomainSpec::unit_disk()], &config).unwrap();
    assert_eq!(report.rows.len(), 100);
    assert_eq!(report.violations, 0, "{:?}", report.rows.iter().find(|r| !r.violations.is_empty()));
    assert!(report.rows.iter().all(|r| r.errors.is_empty() && r.k.is_some() && r.mu.is_some()));
    let summary = &report.domains[0];
    let b = summary.empirical_b.unwrap();
    assert!(b > 0.0);
    let c0 = summary.c0_from_b.unwrap();
    assert!(c0 > 0.0 && c0 < 1.0);
}

#[test]
fn sweep_is_deterministic() {
    let config = SweepConfig { pairs_per_domain: 8, ..SweepConfig::default() };
    let corpus = builtin_corpus();
    let a = inequality_sweep(&corpus, &config).unwrap().to_csv();
    let b = inequality_sweep(&corpus, &config).unwrap().to_csv();
    assert_eq!(a, b);
    let other = inequality_sweep(&corpus, &SweepConfig { seed: 8, ..config }).unwrap().to_csv();
    assert_ne!(a, other);
    assert!(a.lines().last().unwrap().starts_with("# {"));
}

#[test]
fn builtin_corpus_has_no_violations() {
    let config = SweepConfig { pairs_per_domain: 12, ..SweepConfig::default() };
    let report = inequality_sweep(&builtin_corpus(), &config).unwrap();
    let bad: Vec<_> = report.rows.iter().filter(|r| !r.violations.is_empty() || !r.errors.is_empty()).collect();
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn injected_metric_is_detected() {
    let config = SweepConfig { pairs_per_domain: 5, inject_fake_metric: true, ..SweepConfig::default() };
    let report = inequality_sweep(&[DomainSpec::unit_disk()], &config).unwrap();
    assert_eq!(report.violations, 5);
    assert!(report.rows.iter().all(|r| r.violations.iter().any(|v| v == "delta<=sigma")));
}

#[test]
fn antipodal_pairs_escape_every_minorant() {
    let pd = DomainSpec::punctured_disk();
    for m in 2..=20 {
        let x = 0.5f64.powi(m);
        let (a, b) = (ExtendedPoint::xy(x, 0.0), ExtendedPoint::xy(-x, 0.0));
        assert!(delta_metric(&pd, a, b).unwrap().value >= 3f64.ln() - 1e-12);
        assert!(hyperbolic_punctured_disk(a, b).unwrap().value <= std::f64::consts::PI / x.recip().ln());
    }
}

#[test]
fn worked_example_rows() {
    let rows = worked_examples(0.02).unwrap();
    let failing: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    // the real antipodal pair sees the puncture at 1 and stays below the constant
    assert_eq!(failing, vec!["d-over-log-mobius-real-pair"]);
    assert!(rows.iter().all(|r| r.error_bound >= 0.0));
}
