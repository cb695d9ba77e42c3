use std::fs;
use std::path::PathBuf;

use movm::hopf::{normal_form, TaylorConvention};
use movm::model::PlatoonFile;
use movm::simulator::{self, BifurcationOptions, SimOptions};
use movm::stability::{self, GridFailure};
use movm::PlatoonConfig;
use serde_json::{json, Value};

use crate::output::{num, opt, with_suffix, write_json, Csv, Run};
use crate::{Common, Convention, Failure};

type Outcome = Result<Vec<PathBuf>, Failure>;

pub fn load_config(path: &std::path::Path) -> Result<PlatoonConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let file: PlatoonFile = serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    file.resolve()
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn grid_failure(f: GridFailure) -> Failure {
    let code = Failure::from(f.error);
    Failure::numeric(
        code.message,
        json!({ "grid_index": f.index, "a": f.a, "tau": f.tau }),
    )
}

fn check_grid(grid: usize) -> Result<(), Failure> {
    if grid == 0 {
        return Err(Failure::config("--grid must be at least 1"));
    }
    Ok(())
}

pub fn stability_chart(c: &Common, a_range: (f64, f64), grid: usize) -> Outcome {
    let cfg = load_config(&c.config)?;
    check_grid(grid)?;
    let run = Run::start(
        "stability-chart",
        &c.config,
        &cfg,
        json!({ "a_range": a_range, "grid": grid }),
    );
    let eq = cfg.equilibrium()?;
    let probe = cfg.kappa * cfg.max_delay();
    let a = linspace(a_range.0, a_range.1, grid);
    let rows = stability::stability_chart(eq.d_tilde, &a, probe).map_err(grid_failure)?;

    let header = ["a", "d_tilde", "tau_cr", "tau_noc", "sigma", "sc_bound"].map(String::from);
    let mut csv = Csv::new(&header);
    for r in &rows {
        csv.row(&[
            num(r.a),
            num(r.d_tilde),
            num(r.tau_cr),
            opt(r.tau_noc),
            num(r.sigma),
            num(r.sc_bound),
        ]);
    }
    let path = with_suffix(&c.out, ".csv");
    csv.write(&path)?;
    let manifest = run.finish(
        &c.out,
        vec![path.clone()],
        json!({ "sigma_probe_tau": probe }),
    )?;
    Ok(vec![path, manifest])
}

pub fn simulate(c: &Common, horizon: f64, ts: f64, stride: usize) -> Outcome {
    let cfg = load_config(&c.config)?;
    if stride == 0 {
        return Err(Failure::config("--stride must be at least 1"));
    }
    let flags = json!({ "horizon": horizon, "ts": ts, "stride": stride });
    let run = Run::start("simulate", &c.config, &cfg, flags);
    let traj = simulator::simulate_with(&cfg, &SimOptions::new(horizon, ts).stride(stride))?;

    let n = traj.n();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("v_{i}")))
        .chain((1..=n).map(|i| format!("y_{i}")))
        .chain(std::iter::once("leader_v".to_string()))
        .collect();
    let mut csv = Csv::new(&header);
    for k in 0..traj.len() {
        let mut row = Vec::with_capacity(2 * n + 2);
        row.push(num(traj.time(k)));
        row.extend(traj.v.iter().map(|v| num(v[k])));
        row.extend(traj.y.iter().map(|y| num(y[k])));
        row.push(num(traj.leader_v[k]));
        csv.row(&row);
    }
    let path = with_suffix(&c.out, ".csv");
    csv.write(&path)?;
    let details = json!({
        "integrator": "explicit Euler",
        "ts": traj.ts,
        "sample_spacing": traj.dt,
        "horizon": horizon,
        "delay_steps": traj.delay_steps,
        "quantised_delays": traj.delay_steps.iter().map(|&k| k as f64 * ts).collect::<Vec<_>>(),
        "history": "constant pre-history equal to the equilibrium; leader held at its t = 0 value for t < 0",
        "collision": traj.collision,
    });
    let manifest = run.finish(&c.out, vec![path.clone()], details)?;
    Ok(vec![path, manifest])
}

pub fn hopf(
    c: &Common,
    vehicle: Option<usize>,
    at_boundary: bool,
    convention: Convention,
) -> Outcome {
    let mut cfg = load_config(&c.config)?;
    let designated = vehicle.unwrap_or_else(|| simulator::designated_pair(&cfg));
    if designated == 0 || designated > cfg.n {
        return Err(Failure::config(format!(
            "--vehicle {designated} is outside 1..={}",
            cfg.n
        )));
    }
    if at_boundary {
        let eq = cfg.equilibrium()?;
        cfg.tau[designated - 1] = stability::critical_delay(cfg.a, eq.d_tilde)?;
    }
    let flags = json!({ "vehicle": vehicle, "at_boundary": at_boundary, "convention": format!("{convention:?}") });
    let run = Run::start("hopf", &c.config, &cfg, flags);
    let conv = match convention {
        Convention::Factorial => TaylorConvention::Factorial,
        Convention::AsPrinted => TaylorConvention::AsPrinted,
    };
    let nf = normal_form(&cfg, Some(designated), conv)?;
    let path = with_suffix(&c.out, ".json");
    write_json(&path, &nf)?;
    let manifest = run.finish(&c.out, vec![path.clone()], Value::Null)?;
    Ok(vec![path, manifest])
}

pub fn bifurcation(c: &Common, kappas: &[f64], opts: BifurcationOptions) -> Outcome {
    let cfg = load_config(&c.config)?;
    if opts.stride == 0 {
        return Err(Failure::config("--stride must be at least 1"));
    }
    let flags = serde_json::to_value(&opts).expect("serialisable");
    let run = Run::start(
        "bifurcation",
        &c.config,
        &cfg,
        json!({ "kappa_list": kappas, "options": flags }),
    );
    let points = simulator::bifurcation_diagram(&cfg, kappas, &opts)?;

    let header = ["kappa", "amplitude", "frequency", "horizon", "status"].map(String::from);
    let mut csv = Csv::new(&header);
    for p in &points {
        csv.row(&[
            num(p.kappa),
            opt(p.amplitude),
            opt(p.frequency),
            num(p.horizon),
            p.status.clone(),
        ]);
    }
    let path = with_suffix(&c.out, ".csv");
    csv.write(&path)?;
    let vehicle = opts
        .vehicle
        .unwrap_or_else(|| simulator::designated_pair(&cfg));
    let messages: Vec<Value> = points
        .iter()
        .filter_map(|p| {
            p.message
                .as_ref()
                .map(|m| json!({ "kappa": p.kappa, "message": m }))
        })
        .collect();
    let manifest = run.finish(
        &c.out,
        vec![path.clone()],
        json!({ "vehicle": vehicle, "messages": messages }),
    )?;
    if !points.iter().any(|p| p.is_ok()) {
        return Err(Failure::numeric(
            "no kappa value produced an amplitude",
            json!({ "points": messages }),
        ));
    }
    Ok(vec![path, manifest])
}

pub fn roc_contour(c: &Common, a_range: (f64, f64), grid: usize) -> Outcome {
    let cfg = load_config(&c.config)?;
    check_grid(grid)?;
    let run = Run::start(
        "roc-contour",
        &c.config,
        &cfg,
        json!({ "a_range": a_range, "grid": grid }),
    );
    let eq = cfg.equilibrium()?;
    let a = linspace(a_range.0, a_range.1, grid);
    let samples = stability::roc_grid(eq.d_tilde, &a, grid).map_err(grid_failure)?;

    let header = ["a", "tau", "tau_cr", "sigma"].map(String::from);
    let mut csv = Csv::new(&header);
    for s in &samples {
        csv.row(&[num(s.a), num(s.tau), num(s.tau_cr), num(s.sigma)]);
    }
    let path = with_suffix(&c.out, ".csv");
    csv.write(&path)?;
    let manifest = run.finish(
        &c.out,
        vec![path.clone()],
        json!({ "d_tilde": eq.d_tilde, "sigma_units": "1/s" }),
    )?;
    Ok(vec![path, manifest])
}
