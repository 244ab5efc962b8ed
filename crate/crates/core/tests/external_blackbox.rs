//! The subprocess protocol, exercised with small shell scripts as test doubles.

use std::time::{Duration, Instant};

use rducb::benchmarks::{external_blackbox, ExternalBlackBox};
use rducb::{Error, ExternalObjective, RunConfig, Sense};

fn sh(script: &str) -> Vec<String> {
    vec!["sh".into(), "-c".into(), script.into()]
}

const SUM: &str = r#"while read line; do echo "$line" | awk '{s=0; for(i=1;i<=NF;i++) s+=$i; printf "%.17g\n", s}'; done"#;

#[test]
fn sum_double_returns_the_sum() {
    let y = external_blackbox(&sh(SUM), &[0.25, 1.5, -3.0], Duration::from_secs(10)).unwrap();
    assert_eq!(y, -1.25);
}

#[test]
fn one_process_serves_many_requests() {
    let mut bb = ExternalBlackBox::spawn(&sh(r#"n=0; while read line; do n=$((n+1)); echo $n; done"#), Duration::from_secs(10)).unwrap();
    for i in 1..=5 {
        assert_eq!(bb.query(&[0.0]).unwrap(), i as f64);
    }
}

#[test]
fn nan_reply_is_an_error() {
    let err = external_blackbox(&sh("read line; echo nan"), &[1.0], Duration::from_secs(10)).unwrap_err();
    assert!(matches!(err, Error::BlackBox { .. }), "{err}");
}

#[test]
fn garbage_reply_and_exit_are_errors_with_output() {
    let err = external_blackbox(&sh("read line; echo hello"), &[1.0], Duration::from_secs(10)).unwrap_err();
    assert!(err.to_string().contains("hello"));
    let err = external_blackbox(&sh("read line; echo oops >&2; exit 3"), &[1.0], Duration::from_secs(10)).unwrap_err();
    match err {
        Error::BlackBox { output, .. } => assert!(output.contains("oops")),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn slow_process_times_out() {
    let start = Instant::now();
    let err = external_blackbox(&sh("read line; sleep 5; echo 1"), &[1.0], Duration::from_millis(300)).unwrap_err();
    assert!(matches!(err, Error::Timeout(_)), "{err}");
    assert!(start.elapsed() < Duration::from_secs(3));
}

#[test]
fn optimisation_over_an_external_process() {
    let mut obj = ExternalObjective::new("sum", &sh(SUM), vec![(-1.0, 1.0); 3], Sense::Minimize, Some(-3.0), Duration::from_secs(10)).unwrap();
    let c = RunConfig { budget: 12, n_init: 4, grid_size: 11, seed: 5, ..RunConfig::default() };
    let trace = rducb::engine::run(&c, &mut obj).unwrap();
    assert_eq!(trace.len(), 12);
    for r in &trace.records {
        assert!((r.y - r.x.iter().sum::<f64>()).abs() < 1e-12);
        assert!(r.best_regret.unwrap() >= 0.0);
    }
}

#[test]
fn failing_process_reports_the_round() {
    let script = r#"n=0; while read line; do n=$((n+1)); if [ $n -gt 6 ]; then echo bad; else echo $n; fi; done"#;
    let mut obj = ExternalObjective::new("f", &sh(script), vec![(0.0, 1.0); 2], Sense::Maximize, None, Duration::from_secs(10)).unwrap();
    let c = RunConfig { budget: 10, n_init: 3, grid_size: 9, ..RunConfig::default() };
    let failure = rducb::engine::run(&c, &mut obj).unwrap_err();
    assert_eq!(failure.round, 7);
    assert_eq!(failure.partial.len(), 6);
}
