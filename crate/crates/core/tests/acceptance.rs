//! Acceptance criteria 1-10, each at its stated tolerance. Prints one
//! PASS/FAIL line per criterion and fails if any criterion fails.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use worklab::thermo::thermal_weights;
use worklab::verify::{
    closed_vs_quadrature, end_to_end, fluctuation_relations, frft_checks,
    normalization_and_duality, open_checks, run_suite, split_step_checks, unitarity, Check, Suite,
    FIGURE_PARAMS, SUITE_TAIL_TOL,
};

fn timed(criterion: u8, name: &str, limit_s: f64, f: impl FnOnce() -> Vec<Check>) -> Vec<Check> {
    let start = Instant::now();
    let mut checks = f();
    let elapsed = start.elapsed().as_secs_f64();
    checks.push(Check::new(criterion, format!("{name} runtime (s)"), elapsed, limit_s));
    checks
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn criterion_10() -> Vec<Check> {
    let mut checks = Vec::new();
    for suite in [Suite::Fast, Suite::Stress] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_suite(suite, Some(a.path())).unwrap();
        run_suite(suite, Some(b.path())).unwrap();
        let fa = files_in(a.path());
        let fb = files_in(b.path());
        checks.push(Check::flag(10, format!("{} suite writes artifacts", suite.name()), fa.len() > 1));
        checks.push(Check::flag(10, format!("{} suite artifacts byte-identical", suite.name()), fa == fb));
    }
    checks
}

#[test]
fn acceptance() {
    let mut all: Vec<Check> = Vec::new();

    all.extend(timed(1, "closed vs quadrature", 10.0, || {
        closed_vs_quadrature(20, &[0.5, 1.0, 3.0]).unwrap()
    }));

    for (q, b) in FIGURE_PARAMS {
        let n_cut = thermal_weights(b, SUITE_TAIL_TOL).unwrap().n_cut();
        all.extend(unitarity(q, b, n_cut, "").unwrap());
    }
    let stress_cut = thermal_weights(0.1, 1e-6).unwrap().n_cut();
    all.extend(unitarity(1.0, 0.1, stress_cut, " (stress)").unwrap());

    for (q, b) in FIGURE_PARAMS {
        let n_cut = thermal_weights(b, SUITE_TAIL_TOL).unwrap().n_cut();
        all.extend(normalization_and_duality(q, b, n_cut, None).unwrap());
    }
    for (q, b) in FIGURE_PARAMS {
        all.extend(fluctuation_relations(q, b).unwrap());
    }
    all.extend(frft_checks(10, &[PI / 6.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0]).unwrap());
    all.extend(split_step_checks().unwrap());
    for (q, b) in FIGURE_PARAMS {
        let limit = if b == 0.1 { 300.0 } else { f64::INFINITY };
        all.extend(timed(8, &format!("end-to-end q0={q} beta={b}"), limit, || {
            end_to_end(q, b, None).unwrap()
        }));
    }
    all.extend(open_checks(1.0, 1.0, 64).unwrap());
    all.extend(criterion_10());

    // Written to the raw handle so the report survives output capture.
    let mut err = std::io::stderr().lock();
    for c in &all {
        writeln!(
            err,
            "  [{}] {} {} = {:.3e} (limit {:.1e})",
            c.criterion,
            if c.passed() { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        )
        .unwrap();
    }
    let mut failed = Vec::new();
    for k in 1..=10u8 {
        let mine: Vec<&Check> = all.iter().filter(|c| c.criterion == k).collect();
        assert!(!mine.is_empty(), "criterion {k} has no checks");
        let ok = mine.iter().all(|c| c.passed());
        writeln!(err, "criterion {k}: {}", if ok { "PASS" } else { "FAIL" }).unwrap();
        if !ok {
            failed.push(k);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
