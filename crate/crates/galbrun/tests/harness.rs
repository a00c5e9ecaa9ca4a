use galbrun::error::Error;
use galbrun::harness::{
    emit_report, estimate_rate, render_report, run_convergence, run_infsup, run_single,
    ConvergenceTable, ReportFormat, StudyConfig,
};
use galbrun::linalg::SplitMix64;

#[test]
fn rate_estimation_exact_and_noisy() {
    let r = estimate_rate(&[0.1, 0.05], &[0.2, 0.1]).unwrap();
    assert!((r - 1.0).abs() < 1e-13);
    let r = estimate_rate(&[0.04, 0.01], &[0.2, 0.1]).unwrap();
    assert!((r - 2.0).abs() < 1e-13);

    // synthetic data: C h^1.7 with 1% multiplicative noise over 4 levels
    let mut rng = SplitMix64::new(7);
    let hs: Vec<f64> = vec![0.4, 0.2, 0.1, 0.05];
    let errs: Vec<f64> = hs
        .iter()
        .map(|h| 2.3 * h.powf(1.7) * (1.0 + 0.01 * rng.next_symmetric::<f64>()))
        .collect();
    let r = estimate_rate(&errs, &hs).unwrap();
    assert!((r - 1.7).abs() < 0.1, "noisy rate {r}");
}

#[test]
fn rate_estimation_rejects_bad_input() {
    assert!(estimate_rate(&[0.1], &[0.2]).is_err());
    assert!(estimate_rate(&[0.1, 0.2], &[0.2]).is_err());
    assert!(estimate_rate(&[0.1, -0.2], &[0.2, 0.1]).is_err());
    assert!(estimate_rate(&[0.1, 0.05], &[0.1, 0.2]).is_err()); // hs increasing
    assert!(estimate_rate(&[0.1, 0.05], &[0.2, 0.2]).is_err()); // not strict
}

#[test]
fn config_parsing_round_trip() {
    let text = r#"
# study configuration
preset = stellar-toy
mms = sine
k = 2
l = 1            # lifting degree
levels = 2, 4, 8
quad_assembly = 8
strict_mach = true
solver_tol = 1e-9
cpi_sharp = 2.5
format = json
out = /tmp/report.json
"#;
    let cfg = StudyConfig::parse(text).unwrap();
    assert_eq!(cfg.preset, "stellar-toy");
    assert_eq!(cfg.k, 2);
    assert_eq!(cfg.l, 1);
    assert_eq!(cfg.levels, vec![2, 4, 8]);
    assert_eq!(cfg.quad_assembly, Some(8));
    assert!(cfg.strict_mach);
    assert_eq!(cfg.solver_tol, 1e-9);
    assert_eq!(cfg.format, ReportFormat::Json);
    assert_eq!(cfg.out.as_deref(), Some("/tmp/report.json"));
    cfg.validate().unwrap();

    // refinements key expands to doubling levels
    let cfg = StudyConfig::parse("refinements = 3").unwrap();
    assert_eq!(cfg.levels, vec![1, 2, 4, 8]);

    // l defaults to k when not given explicitly
    let cfg = StudyConfig::parse("k = 2").unwrap();
    assert_eq!(cfg.l, 2);
    let cfg = StudyConfig::parse("k = 2
l = 1").unwrap();
    assert_eq!(cfg.l, 1);

    assert!(matches!(StudyConfig::parse("bogus = 1"), Err(Error::Config(_))));
    assert!(matches!(StudyConfig::parse("k" ), Err(Error::Config(_))));
    assert!(matches!(StudyConfig::parse("format = yaml"), Err(Error::Config(_))));
}

#[test]
fn config_validation() {
    let mut cfg = StudyConfig::default();
    cfg.k = 4;
    assert!(cfg.validate().is_err());
    let mut cfg = StudyConfig::default();
    cfg.l = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = StudyConfig::default();
    cfg.levels = vec![2];
    assert!(cfg.validate().is_ok());
    assert!(cfg.validate_for_rates().is_err());
}

#[test]
fn small_study_runs_and_is_deterministic() {
    let mut cfg = StudyConfig::default();
    cfg.levels = vec![1, 2];
    let t1 = run_convergence(&cfg).unwrap();
    let t2 = run_convergence(&cfg).unwrap();
    assert_eq!(t1.rows.len(), 2);
    assert!(t1.rows[1].h_max < t1.rows[0].h_max);
    assert!(t1.fitted_rate.is_some());
    assert!(t1.mach.as_ref().unwrap().satisfied);
    // bit-identical errors across runs
    for (a, b) in t1.rows.iter().zip(t2.rows.iter()) {
        assert_eq!(a.dn_error.to_bits(), b.dn_error.to_bits());
        assert_eq!(a.h_max.to_bits(), b.h_max.to_bits());
        assert_eq!(a.ndof, b.ndof);
    }
    assert_eq!(
        t1.fitted_rate.unwrap().to_bits(),
        t2.fitted_rate.unwrap().to_bits()
    );
}

#[test]
fn failure_produces_partial_table_with_marker() {
    // strict Mach on a violating preset fails at the first level
    let mut cfg = StudyConfig::default();
    cfg.preset = "convective-fast".into();
    cfg.strict_mach = true;
    cfg.levels = vec![1, 2];
    match run_convergence(&cfg) {
        Err(failure) => {
            assert_eq!(failure.level, Some(1));
            assert!(matches!(failure.error, Error::MachRefusal(_)));
            assert!(failure.partial.failure.is_some());
            assert!(failure.partial.rows.is_empty());
            assert!(!failure.partial.mach.as_ref().unwrap().satisfied);
        }
        Ok(_) => panic!("expected strict-mach failure"),
    }

    // unknown preset fails during setup, still with a marked partial table
    let mut cfg = StudyConfig::default();
    cfg.preset = "no-such".into();
    match run_convergence(&cfg) {
        Err(failure) => {
            assert!(failure.level.is_none());
            assert!(failure.partial.failure.is_some());
        }
        Ok(_) => panic!("expected preset failure"),
    }
}

#[test]
fn csv_report_shape() {
    let mut cfg = StudyConfig::default();
    cfg.levels = vec![1, 2];
    let mut table = run_convergence(&cfg).unwrap();
    let csv = render_report(&table, ReportFormat::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,h_max,ndof,dn_error,seconds");
    assert_eq!(lines.len(), 3);

    table.rows.clear();
    let csv = render_report(&table, ReportFormat::Csv).unwrap();
    assert_eq!(csv.lines().count(), 1, "header-only for empty tables");
}

#[test]
fn json_report_round_trips() {
    let mut cfg = StudyConfig::default();
    cfg.levels = vec![1, 2];
    let table = run_convergence(&cfg).unwrap();
    let json = render_report(&table, ReportFormat::Json).unwrap();
    let parsed: ConvergenceTable = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed, table);

    let path = std::env::temp_dir().join("galbrun_harness_report.json");
    emit_report(&table, ReportFormat::Json, path.to_str().unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let parsed: ConvergenceTable = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, table);
    std::fs::remove_file(path).ok();

    assert!(matches!(
        emit_report(&table, ReportFormat::Csv, "/nonexistent-dir/x.csv"),
        Err(Error::Io { .. })
    ));
}

#[test]
fn single_solve_and_infsup_diagnostics() {
    let cfg = StudyConfig::default();
    let (row, mach) = run_single(&cfg, 2).unwrap();
    assert_eq!(row.level, 2);
    assert!(row.dn_error.is_finite() && row.dn_error > 0.0);
    assert!(mach.satisfied);

    let (lo, hi, nfree) = run_infsup(&cfg, 1, 4000).unwrap();
    assert!(lo > 1e-8 && hi >= lo);
    assert_eq!(nfree, 18);
}
