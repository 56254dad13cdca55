use std::fs;
use std::path::PathBuf;

use anisorb::config::backend_from_problem;
use anisorb::online::{online_solve, validation_error};
use anisorb::report::{num, Csv};
use anisorb::store::load_bundle;
use anisorb::{ParameterDomain, ParameterPoint};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::{io_err, CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct OnlineArgs {
    /// Bundle written by `anisorb offline`.
    pub bundle: PathBuf,
    /// Explicit query `mu1,mu2,...`. Repeatable.
    #[arg(long = "point", value_name = "MU")]
    pub points: Vec<String>,
    /// Tensor lattice with this many nodes per direction.
    #[arg(long)]
    pub lattice: Option<usize>,
    /// This many uniformly random queries.
    #[arg(long)]
    pub random: Option<usize>,
    /// Box `lo1,lo2:hi1,hi2` for lattice and random queries (default: the
    /// bundle's parameter domain).
    #[arg(long, value_name = "LO:HI")]
    pub region: Option<String>,
    /// Seed for random queries.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Local space size (default: the bundle's).
    #[arg(long)]
    pub n: Option<usize>,
    /// Compare every query against a truth solve.
    #[arg(long)]
    pub validate: bool,
    /// Leave the timing columns at zero so reruns give identical files.
    #[arg(long)]
    pub no_timings: bool,
    #[arg(long, default_value = "online")]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

fn parse_coords(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("cannot parse `{x}` in `{s}`"))))
        .collect()
}

fn queries(args: &OnlineArgs, domain: &ParameterDomain) -> CliResult<Vec<Vec<f64>>> {
    let region = match &args.region {
        None => domain.clone(),
        Some(r) => {
            let (lo, hi) = r.split_once(':').ok_or_else(|| CliError::Usage(format!("region `{r}` is not LO:HI")))?;
            ParameterDomain::new(parse_coords(lo)?, parse_coords(hi)?)?
        }
    };
    let mut out: Vec<Vec<f64>> = args.points.iter().map(|s| parse_coords(s)).collect::<CliResult<_>>()?;
    if let Some(n) = args.lattice {
        if n < 2 {
            return Err(CliError::Usage("lattice needs at least 2 nodes per direction".into()));
        }
        out.extend(region.lattice(n).into_iter().map(|p| p.0));
    }
    if let Some(count) = args.random {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        for _ in 0..count {
            out.push(
                region
                    .lower()
                    .iter()
                    .zip(region.upper())
                    .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                    .collect(),
            );
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no queries given (use --point, --lattice or --random)".into()));
    }
    Ok(out)
}

pub fn run(args: &OnlineArgs) -> CliResult<()> {
    let bundle = load_bundle(&args.bundle)?;
    let qs = queries(args, &bundle.domain)?;
    let n = args.n.unwrap_or(bundle.n_local);
    // projection bundles need the truth model for every query
    let backend = if bundle.affine.is_none() || args.validate {
        Some(backend_from_problem(&bundle.problem)?)
    } else {
        None
    };
    let queries_path = args.out.join("queries.csv");
    let summary_path = args.out.join("online_summary.json");
    if !args.force && (queries_path.exists() || summary_path.exists()) {
        return Err(anisorb::Error::WouldOverwrite(queries_path).into());
    }

    let p = bundle.domain.dim();
    let mut cols: Vec<String> = (1..=p).map(|i| format!("mu{i}")).collect();
    cols.extend(["status", "radius", "local", "error", "t_search_ms", "t_ortho_ms", "t_solve_ms"].map(String::from));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let seed = bundle.meta.get("seed").cloned().unwrap_or_default();
    let mut csv = Csv::new(&[("seed", seed), ("query_seed", args.seed.to_string())], &cols);

    let (mut failed, mut errors) = (0usize, Vec::new());
    for q in &qs {
        let mut row: Vec<String> = q.iter().copied().map(num).collect();
        let mu = ParameterPoint::new(q.clone());
        let result = online_solve(&bundle, &mu, n, backend.as_ref()).and_then(|sol| {
            let err = match (&backend, args.validate) {
                (Some(b), true) => Some(validation_error(&bundle, b, &sol)?),
                _ => None,
            };
            Ok((sol, err))
        });
        match result {
            Ok((sol, err)) => {
                let local: Vec<String> = sol.local.iter().map(usize::to_string).collect();
                let t = if args.no_timings { Default::default() } else { sol.timings };
                row.extend([
                    "ok".to_string(),
                    num(sol.radius),
                    local.join(" "),
                    err.map_or(String::new(), num),
                    num(1e3 * t.search),
                    num(1e3 * t.orthonormalize),
                    num(1e3 * t.solve),
                ]);
                if let Some(e) = err {
                    errors.push(e);
                }
            }
            Err(e) => {
                failed += 1;
                let msg = e.to_string().replace(',', ";");
                row.extend([msg, String::new(), String::new(), String::new(), "0".into(), "0".into(), "0".into()]);
            }
        }
        csv.row(row);
    }

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    fs::write(&queries_path, csv.as_str()).map_err(io_err(&queries_path))?;
    let max = errors.iter().copied().fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))));
    let mean = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
    let above = errors.iter().filter(|&&e| e > bundle.tol).count();
    let summary = json!({
        "queries": qs.len(),
        "failed": failed,
        "validated": errors.len(),
        "tol": bundle.tol,
        "max_error": max,
        "mean_error": mean,
        "fraction_above_tol": (!errors.is_empty()).then(|| above as f64 / errors.len() as f64),
    });
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n").map_err(io_err(&summary_path))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if failed == qs.len() {
        return Err(CliError::Usage(format!("all {failed} queries failed")));
    }
    Ok(())
}
