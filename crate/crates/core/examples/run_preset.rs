//! Runs one preset offline and prints the convergence history.
//!
//! `cargo run --example run_preset -- test1 metric.mode=isotropic`

use std::time::Instant;

use anisorb::config::RunConfig;
use anisorb::greedy::offline_drive_observed;
use anisorb::online::{online_solve, validation_error};
use anisorb::ParameterDomain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "test1".into());
    let mut cfg = RunConfig::preset(&preset)?;
    for kv in args {
        cfg.set_pair(&kv)?;
    }
    let backend = cfg.build_backend()?;
    let oc = cfg.offline_config()?;
    let t0 = Instant::now();
    let out = offline_drive_observed(&backend, &oc, |r| {
        println!(
            "it {:3} K {:5} max_err {:.3e} evals {:7} train {:5} t {:.1}s",
            r.iteration,
            r.samples,
            r.max_err,
            r.eta_evals,
            r.train_size,
            t0.elapsed().as_secs_f64()
        );
    })?;
    let r = &out.report;
    println!(
        "done K {} iterations {} bootstrap {} stage2 {} total {} final {:.3e}",
        out.bundle.len(),
        r.outer_iterations,
        r.bootstrap_evals,
        r.stage2_evals,
        r.total_evals(),
        r.final_max_error()
    );
    // SWEEP=n validates on an n x n lattice, PATCH=h restricts it to [-h, h]^p
    if let Ok(n) = std::env::var("SWEEP") {
        let n: usize = n.parse()?;
        let dom = match std::env::var("PATCH") {
            Ok(h) => {
                let h: f64 = h.parse()?;
                ParameterDomain::cube(oc.domain.dim(), -h, h)?
            }
            Err(_) => oc.domain.clone(),
        };
        let t1 = Instant::now();
        let (mut max, mut above) = (0.0f64, 0usize);
        let pts = dom.lattice(n);
        for mu in &pts {
            let sol = online_solve(&out.bundle, mu, oc.n_local, Some(&backend))?;
            let e = validation_error(&out.bundle, &backend, &sol)?;
            max = max.max(e);
            above += usize::from(e > oc.tol);
        }
        println!(
            "sweep {n}x{n}: max {:.3e} above tol {:.4}% ({:.1}s)",
            max,
            100.0 * above as f64 / pts.len() as f64,
            t1.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
