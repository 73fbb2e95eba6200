use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stickysim_cli::Summary;

fn stickysim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stickysim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small(out: &Path) -> Vec<String> {
    [
        "--out",
        out.to_str().unwrap(),
        "--param",
        "n=40",
        "--param",
        "rho=20",
        "--param",
        "horizon=20",
        "--param",
        "warmup=5",
        "--param",
        "h=24",
    ]
    .map(String::from)
    .to_vec()
}

fn run_small(experiment: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run".to_string(), experiment.to_string()];
    args.extend(small(out));
    args.extend(extra.iter().map(|s| s.to_string()));
    stickysim(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn list_includes_every_figure() {
    let o = stickysim(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in [
        "fig-perfect-jsq",
        "fig-power-of-two",
        "fig-shedding",
        "tradeoff-shedding",
        "bin-tradeoff",
    ] {
        assert!(text.contains(name), "{name}");
    }
    let filtered = stdout(&stickysim(&["list", "--scheme", "shedding"]));
    assert!(filtered.lines().count() >= 3);
    assert!(filtered.lines().all(|l| !l.starts_with("bin-")));
    let o = stickysim(&["list", "--scheme", "no-such"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_small("fig-shedding", &a, &["--seed", "9"])
        .status
        .success());
    assert!(run_small("fig-shedding", &b, &["--seed", "9"])
        .status
        .success());
    for f in ["histogram.csv", "series.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let c = dir.path().join("c");
    assert!(run_small("fig-shedding", &c, &["--seed", "10"])
        .status
        .success());
    assert_ne!(
        fs::read(a.join("series.csv")).unwrap(),
        fs::read(c.join("series.csv")).unwrap()
    );
}

#[test]
fn summary_records_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(
        "fig-transfer-invite",
        dir.path(),
        &["--seed", "3", "--param", "l=17"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Summary =
        serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.seed, 3);
    assert!(s.version.starts_with(env!("CARGO_PKG_VERSION")));
    assert!(s.wall_clock_seconds > 0.0);
    assert_eq!(s.params["l"], "17");
    assert_eq!(s.params["transfer"], "arriving");
    assert!(s.residuals["fixed_point"] < 1e-8);
    assert!(s.tv_distances["histogram"] < 0.2);
}

#[test]
fn compare_reports_and_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let fp = |rho: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = stickysim(&[
            "run",
            "fixed-points",
            "--out",
            out.to_str().unwrap(),
            "--param",
            &format!("rho={rho}"),
        ]);
        assert!(o.status.success());
        out.join("fixed_point_pull.csv")
    };
    let a = fp("150", "a");
    let b = fp("145", "b");
    let same = stickysim(&[
        "compare",
        a.to_str().unwrap(),
        a.to_str().unwrap(),
        "--tol",
        "0",
    ]);
    assert_eq!(same.status.code(), Some(0));
    assert!(stdout(&same).contains("tv 0"));
    let diff = stickysim(&[
        "compare",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--tol",
        "0.05",
    ]);
    assert_eq!(diff.status.code(), Some(3));
    assert!(stdout(&diff).contains("mean gap -5.0"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "i,p\n0,0.5\n2,0.5\n").unwrap();
    let o = stickysim(&[
        "compare",
        a.to_str().unwrap(),
        bad.to_str().unwrap(),
        "--tol",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_small("fig-shedding", dir.path(), &["--param", "bogus=1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        stickysim(&["run", "no-such-experiment"]).status.code(),
        Some(1)
    );
    assert_eq!(
        stickysim(&["run", "fixed-points", "--param", "nu=0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(stickysim(&["compare", "x.csv"]).status.code(), Some(1));
    assert_eq!(stickysim(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            "seed = 5\nrho = 148\n\n[fixed-points]\nl = 130\nh = 170\nout = \"{}\"\n",
            out.display()
        ),
    )
    .unwrap();
    let o = stickysim(&[
        "run",
        "fixed-points",
        "--config",
        cfg.to_str().unwrap(),
        "--param",
        "h=165",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Summary = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.seed, 5);
    assert_eq!(s.params["rho"], "148");
    assert_eq!(s.params["l"], "130");
    assert_eq!(s.params["h"], "165");
}

#[test]
fn bin_sweep_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = stickysim(&[
        "run",
        "bin-tradeoff",
        "--out",
        dir.path().to_str().unwrap(),
        "--param",
        "n=40",
        "--param",
        "rho=20",
        "--param",
        "l=17",
        "--param",
        "hs=22,26",
        "--param",
        "bins=5n,400",
        "--param",
        "horizon=10",
        "--param",
        "warmup=5",
        "--param",
        "chi=10",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("bin_tradeoff.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("m,h,epsilon,moves_per_flow,g_chi,improvement")
    );
    assert_eq!(lines.count(), 4);
}
