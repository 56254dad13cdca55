use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anisorb::config::RunConfig;
use anisorb::greedy::{offline_drive_observed, OfflineOutcome};
use anisorb::report::{convergence_csv, metric_csv, radii_csv, samples_csv};
use anisorb::store::save_bundle;
use serde_json::json;

use crate::{io_err, CliResult, RunArgs};

pub const BUNDLE_FILE: &str = "bundle.anisorb";
pub const SUMMARY_FILE: &str = "summary.json";
const OUTPUTS: [&str; 7] = [BUNDLE_FILE, SUMMARY_FILE, "convergence.csv", "samples.csv", "radii.csv", "metric.csv", "config.txt"];

pub fn run(args: &RunArgs) -> CliResult<()> {
    let cfg = args.resolve()?;
    let summary = execute(&cfg, args.force)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

/// `#` header lines written on every CSV of a run.
pub fn provenance(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    let g = |k: &str| cfg.get(k).unwrap_or("").to_string();
    vec![
        ("seed", g("greedy.seed")),
        ("family", g("problem.family")),
        ("metric", g("metric.mode")),
        ("train", g("train.mode")),
    ]
}

/// Runs the offline stage of `cfg` and writes all outputs into its
/// `out.dir`. Returns the run summary.
pub fn execute(cfg: &RunConfig, force: bool) -> CliResult<serde_json::Value> {
    let dir = cfg.out_dir()?;
    if !force {
        for f in OUTPUTS {
            if dir.join(f).exists() {
                return Err(anisorb::Error::WouldOverwrite(dir.join(f)).into());
            }
        }
    }
    let backend = cfg.build_backend()?;
    let oc = cfg.offline_config()?;
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let t0 = Instant::now();
    let outcome = offline_drive_observed(&backend, &oc, |r| {
        eprintln!(
            "iteration {:4}  K {:6}  max_err {:.4e}  eta_evals {:8}  train {:6}  {:.1}s",
            r.iteration,
            r.samples,
            r.max_err,
            r.eta_evals,
            r.train_size,
            t0.elapsed().as_secs_f64()
        );
    })?;
    let prov = provenance(cfg);
    write_outputs(&dir, cfg, &prov, &outcome)?;
    let summary = summary_json(cfg, &outcome, t0.elapsed().as_secs_f64());
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(io_err(&path))?;
    Ok(summary)
}

fn write_outputs(dir: &Path, cfg: &RunConfig, prov: &[(&str, String)], out: &OfflineOutcome) -> CliResult<()> {
    save_bundle(&out.bundle, &dir.join(BUNDLE_FILE), true)?;
    let files: [(&str, String); 5] = [
        ("convergence.csv", convergence_csv(prov, &out.report.history).as_str().to_string()),
        ("samples.csv", samples_csv(prov, &out.bundle.points).as_str().to_string()),
        ("radii.csv", radii_csv(prov, &out.report).as_str().to_string()),
        ("metric.csv", metric_csv(prov, &out.report).as_str().to_string()),
        ("config.txt", cfg.to_text()),
    ];
    for (name, text) in files {
        let path: PathBuf = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(())
}

fn summary_json(cfg: &RunConfig, out: &OfflineOutcome, seconds: f64) -> serde_json::Value {
    let r = &out.report;
    let problem: serde_json::Map<String, serde_json::Value> = cfg
        .pairs()
        .filter_map(|(k, v)| k.strip_prefix("problem.").map(|k| (k.to_string(), v.into())))
        .collect();
    json!({
        "seed": cfg.seed().unwrap_or(0),
        "problem": problem,
        "metric_mode": cfg.get("metric.mode"),
        "train_mode": cfg.get("train.mode"),
        "n_local": out.bundle.n_local,
        "tol": out.bundle.tol,
        "samples": out.bundle.len(),
        "outer_iterations": r.outer_iterations,
        "bootstrap_evals": r.bootstrap_evals,
        "stage2_evals": r.stage2_evals,
        "total_evals": r.total_evals(),
        "final_train_size": r.train.len(),
        "final_max_err": r.final_max_error(),
        "seconds": seconds,
    })
}
