use std::fs;
use std::path::{Path, PathBuf};

use anisorb::report::{self, Csv};
use clap::Args;
use serde_json::{json, Value};

use crate::offline::{execute, SUMMARY_FILE};
use crate::{io_err, load_config, CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// First run: a finished run directory, a config file or a preset.
    pub a: String,
    /// Second run, same forms.
    pub b: String,
    /// Override for run A when it still has to be run. Repeatable.
    #[arg(long = "set-a", value_name = "KEY=VALUE")]
    pub set_a: Vec<String>,
    /// Override for run B when it still has to be run. Repeatable.
    #[arg(long = "set-b", value_name = "KEY=VALUE")]
    pub set_b: Vec<String>,
    #[arg(long, default_value = "compare")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub force: bool,
}

struct Run {
    summary: Value,
    // (iteration, K, max_err, eta_evals)
    history: Vec<(u64, u64, f64, u64)>,
}

fn read_run(dir: &Path) -> CliResult<Run> {
    let sp = dir.join(SUMMARY_FILE);
    let summary: Value = serde_json::from_str(&fs::read_to_string(&sp).map_err(io_err(&sp))?)?;
    let cp = dir.join("convergence.csv");
    let text = fs::read_to_string(&cp).map_err(io_err(&cp))?;
    let bad = || CliError::Usage(format!("{}: malformed convergence table", cp.display()));
    let mut history = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        history.push((
            f[0].parse().map_err(|_| bad())?,
            f[1].parse().map_err(|_| bad())?,
            f[2].parse().map_err(|_| bad())?,
            f[3].parse().map_err(|_| bad())?,
        ));
    }
    Ok(Run { summary, history })
}

fn obtain(spec: &str, sets: &[String], dir: PathBuf, args: &CompareArgs) -> CliResult<Run> {
    let as_dir = Path::new(spec);
    if as_dir.join(SUMMARY_FILE).is_file() {
        return read_run(as_dir);
    }
    let mut cfg = load_config(spec)?;
    for kv in sets {
        cfg.set_pair(kv)?;
    }
    if let Some(s) = args.seed {
        cfg.set("greedy.seed", &s.to_string())?;
    }
    cfg.set("out.dir", &dir.to_string_lossy())?;
    cfg.validate()?;
    execute(&cfg, args.force)?;
    read_run(&dir)
}

fn num(v: &Value, key: &str) -> CliResult<f64> {
    v[key].as_f64().ok_or_else(|| CliError::Usage(format!("run summary lacks `{key}`")))
}

pub fn run(args: &CompareArgs) -> CliResult<()> {
    let a = obtain(&args.a, &args.set_a, args.out.join("a"), args)?;
    let b = obtain(&args.b, &args.set_b, args.out.join("b"), args)?;
    if a.summary["problem"] != b.summary["problem"] {
        return Err(CliError::Usage("runs approximate different problems".into()));
    }

    let mut csv = Csv::new(&[("seed_a", a.summary["seed"].to_string()), ("seed_b", b.summary["seed"].to_string())], &[
        "run",
        "iteration",
        "K",
        "max_err",
        "cumulative_evals",
    ]);
    for (name, run) in [("a", &a), ("b", &b)] {
        let mut total = 0u64;
        for &(it, k, e, ev) in &run.history {
            total += ev;
            csv.row([name.to_string(), it.to_string(), k.to_string(), report::num(e), total.to_string()]);
        }
    }
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let cp = args.out.join("comparison.csv");
    fs::write(&cp, csv.as_str()).map_err(io_err(&cp))?;

    let side = |r: &Run| -> CliResult<Value> {
        Ok(json!({
            "samples": num(&r.summary, "samples")?,
            "total_evals": num(&r.summary, "total_evals")?,
            "final_max_err": num(&r.summary, "final_max_err")?,
            "metric_mode": r.summary["metric_mode"],
            "train_mode": r.summary["train_mode"],
        }))
    };
    let verdict = json!({
        "a": side(&a)?,
        "b": side(&b)?,
        "snapshot_ratio": num(&a.summary, "samples")? / num(&b.summary, "samples")?,
        "eval_ratio": num(&a.summary, "total_evals")? / num(&b.summary, "total_evals")?,
    });
    let vp = args.out.join("verdict.json");
    fs::write(&vp, serde_json::to_string_pretty(&verdict)? + "\n").map_err(io_err(&vp))?;
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    Ok(())
}
