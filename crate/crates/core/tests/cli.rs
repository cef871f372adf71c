use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn worklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_worklab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn by_zeta(path: &Path) -> BTreeMap<i64, f64> {
    rows(path).into_iter().map(|r| (r[0] as i64, r[1])).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_kick_gives_trivial_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = worklab(&["charfn", "--q0", "0", "--beta-hw", "1", "--out-dir", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    for r in rows(&dir.path().join("charfn.csv")) {
        assert!((r[1] - 1.0).abs() < 1e-12 && r[2].abs() < 1e-12);
    }
    let w = rows(&dir.path().join("workdist.csv"));
    assert_eq!(w.len(), 1);
    assert_eq!(w[0][0], 0.0);
    assert!((w[0][1] - 1.0).abs() < 1e-12);
}

#[test]
fn interferometric_matches_analytic() {
    let a = tempfile::tempdir().unwrap();
    let i = tempfile::tempdir().unwrap();
    for (dir, mode) in [(&a, "analytic"), (&i, "interferometric")] {
        let o = worklab(&[
            "charfn", "--q0", "1", "--beta-hw", "1", "--mode", mode,
            "--out-dir", dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert!(i.path().join("intensity_theta0.csv").exists());
    assert!(i.path().join("intensity_theta90.csv").exists());

    let ga = rows(&a.path().join("charfn.csv"));
    let gi = rows(&i.path().join("charfn.csv"));
    assert_eq!(ga.len(), gi.len());
    for (x, y) in ga.iter().zip(&gi) {
        for (u, v) in x.iter().zip(y) {
            assert!((u - v).abs() < 1e-6);
        }
    }
    let pa = by_zeta(&a.path().join("workdist.csv"));
    let pi = by_zeta(&i.path().join("workdist.csv"));
    for z in pa.keys().chain(pi.keys()) {
        let u = pa.get(z).copied().unwrap_or(0.0);
        let v = pi.get(z).copied().unwrap_or(0.0);
        assert!((u - v).abs() < 1e-6, "zeta {z}: {u} vs {v}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# scenario\nq0 = 3\nbeta_hw = 1.0\nout_dir = results\n").unwrap();
    let o = worklab(&["jarzynski", "--config", cfg.to_str().unwrap(), "--q0", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&dir.path().join("results/jarzynski.csv"));
    assert_eq!(r[0][0], 2.0);
    assert!((r[0][3] - 2.0).abs() < 1e-6);
    assert!((r[0][4] - 1.0).abs() < 2e-6);
}

#[test]
fn config_errors_exit_2() {
    let o = worklab(&["charfn", "--q0", "11"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error kind=config message="));

    let o = worklab(&["workdist", "--s-samples", "2"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "colour = red\n").unwrap();
    let o = worklab(&["charfn", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = Command::new(env!("CARGO_BIN_EXE_worklab"))
        .args(["units", "--lambda-nm", "633", "--f-mm", "100", "--alpha", "1"])
        .env("WORKLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_gate_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let ch = dir.path().join("leaky.channel");
    fs::write(&ch, "dim = 16\nkraus displacement(1.0) weight = 0.5\nkraus identity weight = 0.3\n").unwrap();
    let o = worklab(&[
        "open-charfn", "--channel", ch.to_str().unwrap(), "--beta-hw", "1",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("kind=completeness_violation"));
}

#[test]
fn open_charfn_with_dephasing_channel() {
    let dir = tempfile::tempdir().unwrap();
    let ch = dir.path().join("dephase.channel");
    fs::write(
        &ch,
        "dim = 64\nkraus displacement(1.0) weight = 0.5\nkraus identity weight = 0.5\nfinal_hamiltonian = initial\n",
    )
    .unwrap();
    let o = worklab(&[
        "open-charfn", "--channel", ch.to_str().unwrap(), "--beta-hw", "1",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let g = rows(&dir.path().join("open_charfn.csv"));
    assert!((g[0][1] - 1.0).abs() < 1e-12);
    let gamma = rows(&dir.path().join("gamma.csv"))[0][0];
    let p = by_zeta(&dir.path().join("workdist.csv"));
    let avg: f64 = p.iter().map(|(z, p)| p * (-(*z as f64)).exp()).sum();
    assert!((avg - gamma).abs() < 1e-9);
}

#[test]
fn units_report() {
    let o = worklab(&["units", "--lambda-nm", "633", "--f-mm", "100", "--alpha", "3.141592653589793"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("z_alpha = 200.000000000 mm"));
    let o = worklab(&["units", "--lambda-nm", "633", "--f-mm", "100", "--alpha", "1.5707963267948966"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("z_alpha = 100.000000000 mm"));
}

#[test]
fn verify_and_frft_verify() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = worklab(&["verify", "--suite", "fast", "--out-dir", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let name = "verify_fast.csv";
    assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());

    let o = worklab(&["frft-verify", "--n-max", "4", "--out-dir", a.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&a.path().join("frft_verify.csv")).len(), 4 * 5);

    let o = worklab(&["verify", "--suite", "medium"]);
    assert_eq!(o.status.code(), Some(2));
}
