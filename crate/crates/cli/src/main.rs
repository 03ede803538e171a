//! `mflab`: configuration ingestion, experiment dispatch, and artifact
//! emission for the mean-field interaction laboratory.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure (with the
//! diagnostic serialized into the report), 4 acceptance-gate failure under
//! `--assert`.

mod config;
mod svg;

use clap::{Parser, Subcommand, ValueEnum};
use config::*;
use mflab_core::error::Error;
use mflab_core::experiments::{
    chaos_gap, decoupling_check, run_first_order, run_flow, run_kinetic,
    run_uniformity_sweep, FirstOrderConfig, KineticConfig, SweepConfig,
};
use mflab_core::grid::PhaseGridMeasure;
use mflab_core::meanfield::{
    alpha_measure, cesaro_entropy, fokker_planck_admissible_dt, fokker_planck_step,
    log_partition_mc, mean_field_entropy, solve_fixed_point,
};
use mflab_core::particles::{simulate, SimConfig, SimInitial};
use mflab_core::potentials::verify_assumptions;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "mflab", version, about = "mean-field many-body interaction laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// path to the JSON run configuration
    #[arg(long, global = true, default_value = "config.json")]
    config: String,
    /// output directory (created if absent)
    #[arg(long, global = true, default_value = "out")]
    out: String,
    /// overrides every seed in the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker-pool size (default: logical cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// artifact format for series data
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// also emit self-contained SVG line charts
    #[arg(long, global = true)]
    plot: bool,
    /// enforce the acceptance thresholds (exit 4 on failure)
    #[arg(long = "assert", global = true)]
    assert_gates: bool,
    /// overwrite an existing report.json
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// audit the standing assumptions on a probe box
    Check,
    /// integrate the particle system and record scalar series
    Simulate,
    /// evolve the nonlinear Fokker-Planck flow on a grid
    Pde,
    /// evolve the kinetic Vlasov-Fokker-Planck flow and fit its decay
    Kinetic,
    /// solve the Gibbs fixed point by Picard iteration
    FixedPoint,
    /// first-order decay experiment (entropy and Wasserstein fits)
    FirstOrder,
    /// uniform-in-n kinetic moment-decay sweep
    Uniformity,
    /// propagation-of-chaos gap against the PDE flow
    ChaosGap,
    /// Cesaro entropy estimates over doubling n
    Cesaro,
    /// decoupling-inequality Monte Carlo checks
    Decoupling,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Simulate => "simulate",
            Command::Pde => "pde",
            Command::Kinetic => "kinetic",
            Command::FixedPoint => "fixed-point",
            Command::FirstOrder => "first-order",
            Command::Uniformity => "uniformity",
            Command::ChaosGap => "chaos-gap",
            Command::Cesaro => "cesaro",
            Command::Decoupling => "decoupling",
        }
    }
}

struct Outcome {
    results: Value,
    artifacts: Vec<String>,
    gate_failures: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_err()
        {
            eprintln!("warning: worker pool already initialized");
        }
    }

    let out_dir = PathBuf::from(&cli.out);
    let report_path = out_dir.join("report.json");
    if report_path.exists() && !cli.force {
        eprintln!(
            "error: {} already exists; pass --force to overwrite",
            report_path.display()
        );
        return ExitCode::from(2);
    }

    let run_config = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return ExitCode::from(2);
    }

    match dispatch(&cli, &run_config, &out_dir) {
        Ok(outcome) => {
            let gates_passed = outcome.gate_failures.is_empty();
            let report = compose_report(&cli, &run_config, Some(&outcome), None);
            if let Err(e) = write_report(&report_path, &report) {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
            println!("report: {}", report_path.display());
            if cli.assert_gates && !gates_passed {
                for f in &outcome.gate_failures {
                    eprintln!("gate failure: {f}");
                }
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = match e {
                Error::Config(_) => 2,
                _ => 3,
            };
            let report = compose_report(&cli, &run_config, None, Some(&e));
            let _ = write_report(&report_path, &report);
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}

fn compose_report(
    cli: &Cli,
    run_config: &RunConfig,
    outcome: Option<&Outcome>,
    error: Option<&Error>,
) -> Value {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut report = json!({
        "meta": {
            "timestamp_unix": timestamp,
        },
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "seed_override": cli.seed,
        "config": run_config,
        "artifacts": outcome.map(|o| o.artifacts.clone()).unwrap_or_default(),
    });
    if let Some(o) = outcome {
        report["results"] = o.results.clone();
        report["gates"] = json!({
            "checked": cli.assert_gates,
            "failures": o.gate_failures,
        });
    }
    if let Some(e) = error {
        report["error"] = json!({
            "kind": error_kind(e),
            "message": e.to_string(),
        });
    }
    report
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Arity(_) => "arity",
        Error::Grid(_) => "grid",
        Error::Numerical(_) => "numerical",
        Error::InvalidDomain(_) => "invalid_domain",
        Error::ComplexityRefusal(_) => "complexity_refusal",
        Error::Coverage { .. } => "coverage",
        Error::BlowUp { .. } => "blow_up",
        Error::Stability { .. } => "stability",
        Error::NoContraction { .. } => "no_contraction",
        Error::Domain(_) => "domain",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    }
}

fn write_report(path: &Path, report: &Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn write_artifact(
    out_dir: &Path,
    name: &str,
    content: &str,
    artifacts: &mut Vec<String>,
) -> Result<(), Error> {
    std::fs::write(out_dir.join(name), content)?;
    artifacts.push(name.to_string());
    Ok(())
}

/// Emits a series artifact in the requested format: CSV (authoritative
/// numbers) or a JSON dump of the full series structure.
fn write_series<T: serde::Serialize>(
    cli: &Cli,
    out_dir: &Path,
    stem: &str,
    csv: &str,
    value: &T,
    artifacts: &mut Vec<String>,
) -> Result<(), Error> {
    match cli.format {
        Format::Csv => write_artifact(out_dir, &format!("{stem}.csv"), csv, artifacts),
        Format::Json => {
            let text =
                serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
            write_artifact(out_dir, &format!("{stem}.json"), &(text + "\n"), artifacts)
        }
    }
}

fn dispatch(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    match cli.command {
        Command::Check => cmd_check(cli, cfg),
        Command::Simulate => cmd_simulate(cli, cfg, out_dir),
        Command::Pde => cmd_pde(cli, cfg, out_dir),
        Command::Kinetic => cmd_kinetic(cli, cfg, out_dir),
        Command::FixedPoint => cmd_fixed_point(cli, cfg, out_dir),
        Command::FirstOrder => cmd_first_order(cli, cfg, out_dir),
        Command::Uniformity => cmd_uniformity(cli, cfg, out_dir),
        Command::ChaosGap => cmd_chaos_gap(cli, cfg, out_dir),
        Command::Cesaro => cmd_cesaro(cli, cfg, out_dir),
        Command::Decoupling => cmd_decoupling(cli, cfg, out_dir),
    }
}

fn cmd_check(cli: &Cli, cfg: &RunConfig) -> Result<Outcome, Error> {
    let exp: CheckExperiment = cfg.experiment()?;
    let seed = cli.seed.unwrap_or(exp.seed);
    let report = verify_assumptions(&cfg.model, &exp.probe_box, exp.n_probes, seed)?;
    Ok(Outcome {
        results: serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?,
        artifacts: vec![],
        gate_failures: vec![],
    })
}

fn cmd_simulate(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    let sim = cfg.sim()?;
    let exp: SimulateExperiment = cfg.experiment()?;
    let sim_config = SimConfig {
        dt: sim.dt,
        horizon: sim.horizon,
        record_every: sim.record_every,
        n: sim.n,
        replicas: sim.replicas,
        master_seed: cli.seed.unwrap_or(sim.master_seed),
        scheme: sim.scheme,
        snapshot_every: sim.snapshot_every,
    };
    let initial = match sim.scheme {
        mflab_core::particles::Scheme::EulerMaruyama => SimInitial::FirstOrder(exp.initial.clone()),
        mflab_core::particles::Scheme::KineticSplitting => SimInitial::Kinetic {
            position: exp.initial.clone(),
            velocity: exp.initial_velocity.clone().ok_or_else(|| {
                Error::Config("kinetic scheme needs experiment.initial_velocity".into())
            })?,
        },
    };
    let record = simulate(&cfg.model, &sim_config, &initial)?;
    let mut artifacts = Vec::new();
    write_series(cli, out_dir, "series", &record.scalar_csv(), &record.scalar_series, &mut artifacts)?;
    if !record.snapshots.is_empty() {
        let last = record.snapshots.len() - 1;
        write_artifact(
            out_dir,
            "snapshot_final.csv",
            &record.snapshot_csv(last, 0),
            &mut artifacts,
        )?;
    }
    let results = json!({
        "n": record.n,
        "d": record.d,
        "kinetic": record.kinetic,
        "records": record.scalar_series.len(),
        "terminal": record.scalar_series.last(),
    });
    Ok(Outcome {
        results,
        artifacts,
        gate_failures: vec![],
    })
}

fn cmd_pde(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    let sim = cfg.sim()?;
    let grid = cfg.grid()?;
    let exp: PdeExperiment = cfg.experiment()?;
    let mu0 = exp.initial.build(grid)?;
    let (series, fp) = run_flow(
        &cfg.model,
        grid,
        &mu0,
        sim.horizon,
        sim.dt,
        exp.record_every,
        exp.fp_tol,
        exp.fp_max_iter,
    )?;
    let mut artifacts = Vec::new();
    write_series(cli, out_dir, "flow", &series.to_csv(), &series, &mut artifacts)?;
    if cli.plot {
        let chart = svg::line_chart(
            "first-order flow (log scale)",
            &[
                svg::Series {
                    label: "H_W",
                    points: series.times.iter().cloned().zip(series.h_w.clone()).collect(),
                },
                svg::Series {
                    label: "W2",
                    points: series.times.iter().cloned().zip(series.w2.clone()).collect(),
                },
            ],
            true,
        );
        write_artifact(out_dir, "flow.svg", &chart, &mut artifacts)?;
    }
    let admissible = fokker_planck_admissible_dt(&mu0, &cfg.model);
    let results = json!({
        "fixed_point": {
            "iterations": fp.iterations,
            "final_residual": fp.final_residual,
            "contraction_estimate": fp.contraction_estimate,
        },
        "admissible_dt_at_start": admissible,
        "terminal": {
            "t": series.times.last(),
            "h_w": series.h_w.last(),
            "w2": series.w2.last(),
            "mean": series.mean.last(),
            "var": series.var.last(),
        },
    });
    Ok(Outcome {
        results,
        artifacts,
        gate_failures: vec![],
    })
}

fn cmd_kinetic(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    let sim = cfg.sim()?;
    let grid = cfg.grid()?;
    let exp: KineticExperiment = cfg.experiment()?;
    let v_grid = exp.v_grid.build()?;
    let mux = exp.initial_position.build(grid)?;
    let muv = exp.initial_velocity.build(v_grid)?;
    let mu0 = PhaseGridMeasure::product(&mux, &muv);
    let config = KineticConfig {
        horizon: sim.horizon,
        dt: sim.dt,
        record_every: exp.record_every,
        fit_window: exp.fit_window,
        ..Default::default()
    };
    let report = run_kinetic(&cfg.model, &mu0, &config)?;
    let mut artifacts = Vec::new();
    write_series(cli, out_dir, "kinetic", &report.to_csv(), &report, &mut artifacts)?;
    if cli.plot {
        let chart = svg::line_chart(
            "kinetic entropy (log scale)",
            &[svg::Series {
                label: "S",
                points: report.times.iter().cloned().zip(report.entropy.clone()).collect(),
            }],
            true,
        );
        write_artifact(out_dir, "kinetic.svg", &chart, &mut artifacts)?;
    }
    let mut failures = Vec::new();
    if report.max_entropy_uptick > 1e-8 {
        failures.push(format!(
            "kinetic entropy rose by {:.3e} (> 1e-8) within a record interval",
            report.max_entropy_uptick
        ));
    }
    if report.entropy_fit.r_squared < 0.97 {
        failures.push(format!(
            "entropy fit r^2 = {:.4} < 0.97",
            report.entropy_fit.r_squared
        ));
    }
    if report.terminal_w2_velocity > 0.02 {
        failures.push(format!(
            "terminal velocity-marginal W2 = {:.4} > 0.02",
            report.terminal_w2_velocity
        ));
    }
    let results = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
    Ok(Outcome {
        results,
        artifacts,
        gate_failures: failures,
    })
}

fn cmd_fixed_point(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    let grid = cfg.grid()?;
    let exp: FixedPointExperiment = cfg.experiment()?;
    let init = match &exp.init {
        Some(spec) => spec.build(grid)?,
        None => alpha_measure(&cfg.model, grid)?,
    };
    let fp = solve_fixed_point(&cfg.model, grid, exp.tol, exp.max_iter, &init)?;
    let mut artifacts = Vec::new();
    write_series(cli, out_dir, "fixed_point", &fp.measure.to_csv(), &fp.measure, &mut artifacts)?;
    let mut failures = Vec::new();
    if fp.contraction_estimate >= 0.9 {
        failures.push(format!(
            "contraction estimate {:.3} >= 0.9",
            fp.contraction_estimate
        ));
    }
    let results = json!({
        "iterations": fp.iterations,
        "final_residual": fp.final_residual,
        "contraction_estimate": fp.contraction_estimate,
        "mean": fp.measure.mean(),
        "variance": fp.measure.variance(),
    });
    Ok(Outcome {
        results,
        artifacts,
        gate_failures: failures,
    })
}

fn cmd_first_order(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    let sim = cfg.sim()?;
    let grid = cfg.grid()?;
    let exp: PdeExperiment = cfg.experiment()?;
    let mu0 = exp.initial.build(grid)?;
    let config = FirstOrderConfig {
        horizon: sim.horizon,
        dt: sim.dt,
        record_every: exp.record_every,
        fit_window: exp.fit_window,
        fp_tol: exp.fp_tol,
        fp_max_iter: exp.fp_max_iter,
    };
    let report = run_first_order(&cfg.model, grid, &mu0, &config)?;
    let mut artifacts = Vec::new();
    write_series(cli, out_dir, "flow", &report.to_csv(), &report, &mut artifacts)?;
    if cli.plot {
        let chart = svg::line_chart(
            "entropy and Wasserstein decay (log scale)",
            &[
                svg::Series {
                    label: "H_W",
                    points: report.times.iter().cloned().zip(report.h_w.clone()).collect(),
                },
                svg::Series {
                    label: "W2",
                    points: report.times.iter().cloned().zip(report.w2.clone()).collect(),
                },
            ],
            true,
        );
        write_artifact(out_dir, "decay.svg", &chart, &mut artifacts)?;
    }
    let mut failures = Vec::new();
    if report.entropy_fit.r_squared < 0.99 {
        failures.push(format!(
            "entropy fit r^2 = {:.4} < 0.99",
            report.entropy_fit.r_squared
        ));
    }
    if report.w2_fit.rate < 0.45 * report.entropy_fit.rate {
        failures.push(format!(
            "W2 rate {:.3} below 0.45 x entropy rate {:.3}",
            report.w2_fit.rate, report.entropy_fit.rate
        ));
    }
    if report.talagrand_margin < -0.1 * report.w2sq_scale {
        failures.push(format!(
            "talagrand margin {:.3e} below -10% of W2^2 scale {:.3e}",
            report.talagrand_margin, report.w2sq_scale
        ));
    }
    if report.max_energy_uptick > 1e-8 {
        failures.push(format!(
            "free energy rose by {:.3e} (> 1e-8) within a record interval",
            report.max_energy_uptick
        ));
    }
    let results = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
    Ok(Outcome {
        results,
        artifacts,
        gate_failures: failures,
    })
}

fn cmd_uniformity(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    let sim = cfg.sim()?;
    let grid = cfg.grid()?;
    let exp: UniformityExperiment = cfg.experiment()?;
    let config = SweepConfig {
        ns: exp.ns.clone(),
        particle_budget: exp.particle_budget,
        horizon: sim.horizon,
        dt: sim.dt,
        record_every: sim.record_every,
        fit_window: exp.fit_window,
        smooth_window: exp.smooth_window,
        master_seed: cli.seed.unwrap_or(sim.master_seed),
        mean_shift: exp.mean_shift,
        pos_sd: None,
        vel_sd: 1.0,
        grid,
    };
    let table = run_uniformity_sweep(&cfg.model, &config)?;
    let mut artifacts = Vec::new();
    write_series(cli, out_dir, "sweep", &table.to_csv(), &table, &mut artifacts)?;
    let mut failures = Vec::new();
    for row in &table.rows {
        if row.r_squared < 0.95 {
            failures.push(format!("n = {}: fit r^2 = {:.4} < 0.95", row.n, row.r_squared));
        }
    }
    match table.rate_ratio() {
        Some(ratio) if ratio <= 1.25 => {}
        Some(ratio) => failures.push(format!("max/min rate ratio {ratio:.3} > 1.25")),
        None => failures.push("no successful sweep rows".into()),
    }
    for (n, why) in &table.skipped {
        failures.push(format!("row n = {n} skipped: {why}"));
    }
    let results = serde_json::to_value(&table).map_err(|e| Error::Io(e.to_string()))?;
    Ok(Outcome {
        results,
        artifacts,
        gate_failures: failures,
    })
}

fn cmd_chaos_gap(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    let grid = cfg.grid()?;
    let exp: ChaosGapExperiment = cfg.experiment()?;
    let seed = cli.seed.unwrap_or(0);
    let mu0 = exp.initial.build(grid)?;

    // PDE reference flow at its stability-bounded step
    let mut pde = mu0.clone();
    let pde_dt = {
        let adm = fokker_planck_admissible_dt(&pde, &cfg.model);
        0.9 * adm
    };
    let pde_steps = (exp.t_check / pde_dt).ceil() as usize;
    let pde_dt = if pde_steps > 0 { exp.t_check / pde_steps as f64 } else { pde_dt };
    for _ in 0..pde_steps {
        pde = fokker_planck_step(&pde, &cfg.model, pde_dt)?;
    }

    let mut rows = Vec::new();
    for &n in &exp.ns {
        let gap = chaos_gap(
            &cfg.model,
            &mu0,
            &pde,
            n,
            exp.replicas,
            exp.t_check,
            exp.particle_dt,
            seed,
        )?;
        rows.push((n, gap));
    }
    let mut csv = String::from("n,gap\n");
    for (n, gap) in &rows {
        csv.push_str(&format!("{n},{gap:.16e}\n"));
    }
    let mut artifacts = Vec::new();
    write_series(cli, out_dir, "gaps", &csv, &rows, &mut artifacts)?;

    let mut failures = Vec::new();
    if let Some((n, gap)) = rows.last() {
        if *gap > exp.threshold {
            failures.push(format!(
                "gap at n = {n} is {gap:.4} > threshold {:.4}",
                exp.threshold
            ));
        }
    }
    for pair in rows.windows(2) {
        if pair[1].1 >= pair[0].1 {
            failures.push(format!(
                "gap did not decrease from n = {} ({:.4}) to n = {} ({:.4})",
                pair[0].0, pair[0].1, pair[1].0, pair[1].1
            ));
        }
    }
    let results = json!({
        "t_check": exp.t_check,
        "replicas": exp.replicas,
        "pde_dt": pde_dt,
        "rows": rows.iter().map(|(n, g)| json!({"n": n, "gap": g})).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        results,
        artifacts,
        gate_failures: failures,
    })
}

fn cmd_cesaro(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    let grid = cfg.grid()?;
    let exp: CesaroExperiment = cfg.experiment()?;
    let seed = cli.seed.unwrap_or(exp.seed);
    let nu = exp.nu.build(grid)?;
    let alpha = alpha_measure(&cfg.model, grid)?;
    let fp = solve_fixed_point(&cfg.model, grid, 1e-10, 500, &alpha)?;
    let target = mean_field_entropy(&nu, &cfg.model, &fp.measure)?;

    let mut rows = Vec::new();
    for &n in &exp.ns {
        let est = cesaro_entropy(&nu, &cfg.model, n, exp.n_samples, seed)?;
        let (logz, logz_se) = log_partition_mc(&cfg.model, grid, n, exp.n_samples, seed)?;
        rows.push(json!({
            "n": n,
            "value": est.value,
            "stderr": est.stderr,
            "abs_error": (est.value - target).abs(),
            "log_partition": logz,
            "log_partition_stderr": logz_se,
        }));
    }
    let mut csv = String::from("n,value,stderr,abs_error\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            r["n"], r["value"].as_f64().unwrap(), r["stderr"].as_f64().unwrap(),
            r["abs_error"].as_f64().unwrap()
        ));
    }
    let mut artifacts = Vec::new();
    write_series(cli, out_dir, "cesaro", &csv, &rows, &mut artifacts)?;

    let mut failures = Vec::new();
    let errs: Vec<f64> = rows.iter().map(|r| r["abs_error"].as_f64().unwrap()).collect();
    for w in errs.windows(2) {
        if w[1] >= w[0] {
            failures.push(format!(
                "Cesaro error did not decrease: {:.4e} -> {:.4e}",
                w[0], w[1]
            ));
        }
    }
    if let Some(last) = rows.last() {
        let err = last["abs_error"].as_f64().unwrap();
        let se = last["stderr"].as_f64().unwrap();
        let allowed = exp.tolerance * target.abs() + 3.0 * se;
        if err > allowed {
            failures.push(format!(
                "largest-n error {err:.4e} exceeds {:.1}% + 3 stderr = {allowed:.4e}",
                100.0 * exp.tolerance
            ));
        }
    }
    let results = json!({
        "target_mean_field_entropy": target,
        "rows": rows,
    });
    Ok(Outcome {
        results,
        artifacts,
        gate_failures: failures,
    })
}

fn cmd_decoupling(cli: &Cli, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, Error> {
    let exp: DecouplingExperiment = cfg.experiment()?;
    let base_seed = cli.seed.unwrap_or(exp.seed);
    if cfg.model.kernels.is_empty() {
        return Err(Error::Config(
            "decoupling needs at least one interaction kernel in the model".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut pass_count = 0usize;
    let mut lambda_pass_count = 0usize;
    let mut csv = String::from("kernel,repeat,lhs,rhs,pass,lambda_lhs,lambda_rhs,lambda_pass\n");
    for kernel in &cfg.model.kernels {
        for r in 0..exp.repeats {
            let rep = decoupling_check(
                kernel,
                exp.law,
                exp.psi,
                exp.n,
                exp.trials,
                exp.lambda,
                base_seed + r as u64,
            )?;
            pass_count += rep.pass as usize;
            lambda_pass_count += rep.lambda_pass as usize;
            csv.push_str(&format!(
                "{},{},{:.16e},{:.16e},{},{:.16e},{:.16e},{}\n",
                kernel.tag(),
                r,
                rep.lhs,
                rep.rhs,
                rep.pass,
                rep.lambda_lhs,
                rep.lambda_rhs,
                rep.lambda_pass
            ));
            rows.push(rep);
        }
    }
    let total = cfg.model.kernels.len() * exp.repeats;
    let mut artifacts = Vec::new();
    write_series(cli, out_dir, "decoupling", &csv, &rows, &mut artifacts)?;
    let mut failures = Vec::new();
    if pass_count != total {
        failures.push(format!("decoupling passed {pass_count}/{total} repeats"));
    }
    if lambda_pass_count != total {
        failures.push(format!(
            "log-Laplace bound passed {lambda_pass_count}/{total} repeats"
        ));
    }
    let results = json!({
        "repeats": exp.repeats,
        "kernels": cfg.model.kernels.iter().map(|k| k.tag()).collect::<Vec<_>>(),
        "pass_count": pass_count,
        "lambda_pass_count": lambda_pass_count,
        "total": total,
        "first_row": rows.first(),
    });
    Ok(Outcome {
        results,
        artifacts,
        gate_failures: failures,
    })
}
