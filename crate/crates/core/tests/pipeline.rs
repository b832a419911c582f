use msgfem::pipeline::{run, sweep, ablate, CoefficientSpec, LocalCount, SweepAxis, TIMING_COLUMNS};
use msgfem::coefficient::Pattern;
use msgfem::{ResultRow, RunConfig};

fn small() -> RunConfig {
    RunConfig { n: 16, m: 2, ell: 2, n_loc: LocalCount::Fixed(4), ..RunConfig::default() }
}

/// The CSV line with clock columns blanked.
fn without_timing(row: &ResultRow) -> Vec<String> {
    let header = ResultRow::csv_header();
    header
        .split(',')
        .zip(row.to_csv().split(','))
        .map(|(h, v)| if TIMING_COLUMNS.contains(&h) { String::new() } else { v.to_string() })
        .collect()
}

#[test]
fn runs_are_deterministic() {
    let mut c = small();
    c.coefficient = CoefficientSpec::Generated { pattern: Pattern::Channels, contrast: 1e3 };
    c.seed = 11;
    let a = run(&c).unwrap().row;
    let b = run(&c).unwrap().row;
    assert_eq!(without_timing(&a), without_timing(&b));
}

#[test]
fn sweep_matches_individual_runs() {
    let c = small();
    let rows = sweep(&c, SweepAxis::NLoc, &[1.0, 3.0]).unwrap();
    for r in &rows {
        let single = run(&r.row.config).unwrap().row;
        assert!((single.error_v - r.row.error_v).abs() <= 1e-10 * single.error_v.max(1e-300));
        assert_eq!(single.dofs_coarse, r.row.dofs_coarse);
    }
    assert!(rows[1].row.error_v < rows[0].row.error_v);
}

#[test]
fn gamma_sweep_recomputes_reference() {
    let rows = sweep(&small(), SweepAxis::Gamma, &[0.0, 1.0]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].row.config.gamma, 0.0);
    assert!(rows.iter().all(|r| r.row.status == "ok"));
}

#[test]
fn dof_bookkeeping() {
    let row = run(&small()).unwrap().row;
    assert_eq!(row.dofs_fine, 2 * 16 * 17 + 256);
    // 4 subdomains x (4 modes + 4 enrichments + 4 pressures) + 4 coarse RT edges + 4 coarse cells
    assert_eq!(row.dofs_coarse, 4 * 12 + 4 + 4);
}

#[test]
fn errors_are_nonnegative_and_more_modes_help() {
    let rows = sweep(&small(), SweepAxis::NLoc, &[0.0, 2.0, 6.0]).unwrap();
    for r in &rows {
        assert!(r.row.error_v >= 0.0 && r.row.error_p >= 0.0 && r.row.error_div >= 0.0);
    }
    assert!(rows[2].row.error_v < rows[0].row.error_v);
}

#[test]
fn ablation_reports_both_rows() {
    let mut c = small();
    c.coefficient = CoefficientSpec::Generated { pattern: Pattern::Inclusions, contrast: 1e3 };
    let [with, without] = ablate(&c).unwrap();
    assert!(with.row.config.with_enrichment && !without.row.config.with_enrichment);
    assert!(with.row.beta.unwrap() > without.row.beta.unwrap());
}

#[test]
fn invalid_configs_are_input_errors() {
    for bad in [RunConfig { m: 3, ..small() }, RunConfig { gamma: -1.0, ..small() }, RunConfig { ell: 0, ..small() }] {
        let e = run(&bad).expect_err("rejected");
        assert!(e.is_input_error());
    }
    let e = sweep(&small(), SweepAxis::NLoc, &[]).err().unwrap();
    assert!(e.is_input_error());
    let e = sweep(&small(), SweepAxis::Ell, &[1.5]).err().unwrap();
    assert!(e.is_input_error());
}
