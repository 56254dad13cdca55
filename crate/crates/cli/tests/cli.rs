use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 8] = [
    "--set",
    "problem.grid=31",
    "--set",
    "train.n=21",
    "--set",
    "greedy.n=6",
    "--set",
    "greedy.tol=1e-2",
];

fn anisorb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anisorb")).args(args).output().expect("binary runs")
}

fn offline(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["offline", "--config", "test1", "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    args.extend(extra);
    anisorb(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn offline_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&offline(&a, &["--seed", "3"])), 0);
    assert_eq!(code(&offline(&b, &["--seed", "3"])), 0);
    for f in ["convergence.csv", "samples.csv", "radii.csv", "metric.csv", "bundle.anisorb"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty(), "{f} is empty");
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs between reruns");
    }
    // config.txt records the output directory, which differs by design
    let settings = |d: &Path| -> Vec<String> {
        fs::read_to_string(d.join("config.txt")).unwrap().lines().filter(|l| !l.starts_with("out.dir")).map(String::from).collect()
    };
    assert_eq!(settings(&a), settings(&b));
    let conv = fs::read_to_string(a.join("convergence.csv")).unwrap();
    assert!(conv.starts_with("# seed = 3\n"));
}

#[test]
fn existing_outputs_need_force() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&offline(dir.path(), &[])), 0);
    assert_eq!(code(&offline(dir.path(), &[])), 4);
    assert_eq!(code(&offline(dir.path(), &["--force"])), 0);
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&offline(dir.path(), &["--set", "greedy.bogus=1"])), 2);
    assert_eq!(code(&offline(dir.path(), &["--set", "greedy.tol=-1"])), 2);
    assert_eq!(code(&anisorb(&["offline", "--config", "no-such-preset"])), 2);
}

#[test]
fn sample_cap_is_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = offline(dir.path(), &["--set", "greedy.max_samples=8", "--set", "greedy.tol=1e-6"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_files_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nproblem.family = f2\nproblem.grid = 31\ntrain.n = 21\ngreedy.n = 5\ngreedy.tol = 1e-2\n").unwrap();
    let out = dir.path().join("out");
    let o = anisorb(&["offline", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--set", "metric.mode=isotropic"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(text.contains("problem.family = f2"));
    assert!(text.contains("metric.mode = isotropic"));
}

#[test]
fn online_inspect_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&offline(&run, &[])), 0);
    let bundle = run.join("bundle.anisorb");

    let info = anisorb(&["inspect", bundle.to_str().unwrap()]);
    assert_eq!(code(&info), 0);
    let v: serde_json::Value = serde_json::from_slice(&info.stdout).unwrap();
    assert_eq!(v["dim"], 2);
    assert_eq!(v["n_local"], 6);
    assert!(v["samples"].as_u64().unwrap() >= 7);

    let on = |out: &Path| {
        anisorb(&[
            "online",
            bundle.to_str().unwrap(),
            "--lattice",
            "6",
            "--point",
            "0.1,0.2",
            "--validate",
            "--no-timings",
            "--out",
            out.to_str().unwrap(),
        ])
    };
    let (o1, o2) = (dir.path().join("o1"), dir.path().join("o2"));
    assert_eq!(code(&on(&o1)), 0);
    assert_eq!(code(&on(&o2)), 0);
    let q = fs::read_to_string(o1.join("queries.csv")).unwrap();
    assert_eq!(q, fs::read_to_string(o2.join("queries.csv")).unwrap());
    assert_eq!(q.lines().filter(|l| !l.starts_with('#')).count(), 1 + 37);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(o1.join("online_summary.json")).unwrap()).unwrap();
    assert_eq!(s["validated"], 37);
    assert_eq!(s["failed"], 0);

    let outside = anisorb(&["online", bundle.to_str().unwrap(), "--point", "3,3", "--out", dir.path().join("o3").to_str().unwrap()]);
    assert_eq!(code(&outside), 2);

    let cmp = dir.path().join("cmp");
    let c = anisorb(&["compare", run.to_str().unwrap(), run.to_str().unwrap(), "--out", cmp.to_str().unwrap()]);
    assert_eq!(code(&c), 0, "{}", String::from_utf8_lossy(&c.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(cmp.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["snapshot_ratio"], 1.0);
    assert_eq!(v["eval_ratio"], 1.0);
}
