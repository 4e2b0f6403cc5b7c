//! Configuration-driven entry point binding the library modules into
//! reproducible experiments.
//!
//! Exit codes: 0 success, 1 required invariant violated, 2 usage error
//! (from argument parsing), 3 unreadable or invalid config, 4 runtime
//! failure. Thread count follows `RAYON_NUM_THREADS`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use delay_morse::config::ExperimentConfig;
use delay_morse::integrator::integrate;
use delay_morse::kernel::solve_threshold_delay;
use delay_morse::lyapunov::{lyapunov_value, regularity_at_own_delay};
use delay_morse::morse::{check_nstar_consistency, generate_fourier_seeds, run_ensemble};
use delay_morse::spectrum::spectrum_report;
use delay_morse::verify;

#[derive(Parser)]
#[command(
    name = "delay-morse",
    version,
    about = "Numerical laboratory for delay systems with threshold state-dependent delay: \
             simulate the semiflow, evaluate the sign-change Lyapunov level, count unstable \
             characteristic roots, and scan ensembles for the gradient-like level structure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and export it as CSV with a JSON sidecar.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured horizon.
        #[arg(long)]
        horizon: Option<f64>,
        /// Override the configured step size.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Solve the threshold delay for the configured initial segment.
    Tau {
        #[arg(long)]
        config: PathBuf,
    },
    /// Lyapunov value and regularity verdict for the initial segment.
    Lyapunov {
        #[arg(long)]
        config: PathBuf,
    },
    /// Spectral report: unstable root count, hyperbolicity, N*.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Ensemble scan of the continuous system.
    MorseScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Ensemble scan of the delay difference equation.
    DifferenceScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run the full acceptance suite.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config_path = match &cli.command {
        Command::Simulate { config, .. }
        | Command::Tau { config }
        | Command::Lyapunov { config }
        | Command::Spectrum { config }
        | Command::MorseScan { config, .. }
        | Command::DifferenceScan { config, .. } => Some(config.clone()),
        Command::Verify => None,
    };
    let config = match config_path {
        Some(path) => match ExperimentConfig::from_path(&path) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("error: cannot load config {}: {e}", path.display());
                return ExitCode::from(3);
            }
        },
        None => None,
    };
    let outcome = match cli.command {
        Command::Simulate { horizon, dt, .. } => {
            simulate(config.as_ref().expect("config loaded"), horizon, dt)
        }
        Command::Tau { .. } => tau(config.as_ref().expect("config loaded")),
        Command::Lyapunov { .. } => lyapunov(config.as_ref().expect("config loaded")),
        Command::Spectrum { .. } => spectrum(config.as_ref().expect("config loaded")),
        Command::MorseScan { seeds, horizon, .. } => {
            morse_scan(config.as_ref().expect("config loaded"), seeds, horizon)
        }
        Command::DifferenceScan { steps, .. } => {
            difference_scan(config.as_ref().expect("config loaded"), steps)
        }
        Command::Verify => run_verify(),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(4)
        }
    }
}

fn write_output(dir: &str, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {dir}"))?;
    let path = Path::new(dir).join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn tau(config: &ExperimentConfig) -> Result<u8> {
    let kernel = config.kernel()?;
    let segment = config.initial_segment()?;
    let tau = solve_threshold_delay(&segment, kernel)?;
    let lower = 1.0 / kernel.alpha2();
    let upper = kernel.r;
    let within = tau >= lower - 1e-10 && tau <= upper + 1e-10;
    let record = serde_json::json!({
        "tau": tau,
        "bounds": { "lower": lower, "upper": upper },
        "within_bounds": within,
        "segment_sup_norm": segment.sup_norm(),
    });
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(if within { 0 } else { 1 })
}

fn lyapunov(config: &ExperimentConfig) -> Result<u8> {
    let spec = config.continuous_spec()?;
    let kernel = config.kernel()?;
    let segment = config.initial_segment()?;
    let value = lyapunov_value(&segment, kernel, spec.delta)?;
    let (verdict, a) = regularity_at_own_delay(&segment, kernel, spec.delta)?;
    let record = serde_json::json!({
        "sc": value.sc,
        "v": value.value,
        "parity_branch": value.parity_branch,
        "a": a,
        "regularity": verdict,
    });
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(0)
}

fn spectrum(config: &ExperimentConfig) -> Result<u8> {
    let spec = config.continuous_spec()?;
    let kernel = config.kernel()?;
    let report = spectrum_report(spec, kernel)?;
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    write_output(&config.outputs.directory, "spectrum_report.json", &text)?;
    Ok(0)
}

fn simulate(config: &ExperimentConfig, horizon: Option<f64>, dt: Option<f64>) -> Result<u8> {
    let spec = config.continuous_spec()?;
    let kernel = config.kernel()?;
    let segment = config.initial_segment()?;
    let horizon = horizon.unwrap_or(config.integrator.horizon);
    let dt = dt.unwrap_or(config.integrator.dt);
    let traj = integrate(spec, kernel, &segment, horizon, dt)?;
    let checks = traj.trajectory_checks();
    let csv = traj.export_csv(config.integrator.sample_dt, spec.delta)?;
    let dir = &config.outputs.directory;
    let csv_path = write_output(dir, "trajectory.csv", &csv)?;
    let sidecar = serde_json::json!({
        "system": spec,
        "kernel": kernel,
        "integrator": { "dt": dt, "horizon": horizon, "sample_dt": config.integrator.sample_dt },
        "initial": config.initial,
        "checks": checks,
    });
    write_output(dir, "trajectory.json", &serde_json::to_string_pretty(&sidecar)?)?;
    println!("{}", serde_json::to_string_pretty(&checks)?);
    eprintln!("trajectory written to {}", csv_path.display());
    let clean = checks.eta_violations == 0 && checks.m_exit_violations == 0;
    Ok(if clean { 0 } else { 1 })
}

fn morse_scan(
    config: &ExperimentConfig,
    seeds_override: Option<usize>,
    horizon_override: Option<f64>,
) -> Result<u8> {
    let spec = config.continuous_spec()?;
    let kernel = config.kernel()?;
    let spectrum = spectrum_report(spec, kernel)?;
    let params = config.scan_params(spectrum.n_star)?;
    let seed_count = seeds_override.unwrap_or(config.scan.seeds);
    let horizon = horizon_override.unwrap_or(config.integrator.horizon);
    let seeds = generate_fourier_seeds(
        spec,
        kernel.r,
        config.integrator.grid_nodes,
        seed_count,
        config.scan.rng_seed,
        config.scan.modes,
    );
    let mut report = run_ensemble(spec, kernel, &seeds, horizon, config.integrator.dt, &params);
    report.violations.nstar =
        check_nstar_consistency(&report, &spectrum, params.origin_radius);
    let dir = &config.outputs.directory;
    write_output(dir, "spectrum_report.json", &serde_json::to_string_pretty(&spectrum)?)?;
    let text = serde_json::to_string_pretty(&report)?;
    write_output(dir, "morse_report.json", &text)?;
    if config.outputs.per_trajectory_csv {
        for (i, seed) in seeds.iter().enumerate() {
            if let Ok(traj) = integrate(spec, kernel, seed, horizon, config.integrator.dt) {
                let csv = traj.export_csv(params.sample_dt, spec.delta)?;
                write_output(dir, &format!("trajectory_{i:04}.csv"), &csv)?;
            }
        }
    }
    let ok = report.violations.required_ok();
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "seed_count": report.seed_count,
            "n_star": report.n_star,
            "levels_observed": report.levels_observed,
            "level_graph": report.level_graph,
            "violations_ok": ok,
            "v_increase_events": report.violations.v_increase.len(),
            "upward_edges": report.violations.upward_edges.len(),
            "nstar_violations": report.violations.nstar.len(),
        }))?
    );
    eprintln!("full report written to {dir}/morse_report.json");
    Ok(if ok { 0 } else { 1 })
}

fn difference_scan(config: &ExperimentConfig, steps_override: Option<usize>) -> Result<u8> {
    let spec = config.discrete_spec()?;
    let steps = steps_override.unwrap_or(config.scan.steps);
    let seeds = config.discrete_seeds()?;
    let m_star = config
        .scan
        .m_star
        .unwrap_or_else(|| spec.unstable_multipliers() as u32);
    let n_star = delay_morse::spectrum::compute_nstar(m_star, false, spec.delta);
    let (report, stats) = delay_morse::difference::discrete_scan(
        spec,
        &seeds,
        steps,
        config.scan.window,
        n_star,
        config.scan.n0,
    )?;
    let dir = &config.outputs.directory;
    let text = serde_json::to_string_pretty(&report)?;
    write_output(dir, "morse_report.json", &text)?;
    write_output(dir, "scan_stats.json", &serde_json::to_string_pretty(&stats)?)?;
    if config.outputs.per_trajectory_csv {
        for (i, seed) in seeds.iter().enumerate() {
            if let Ok(orb) = delay_morse::difference::orbit(spec, seed, steps) {
                let mut csv = String::from("k,");
                for j in 0..=spec.n {
                    csv.push_str(&format!("x{j},"));
                }
                csv.push_str("v\n");
                for (k, state) in orb.iter().enumerate() {
                    csv.push_str(&format!("{k},"));
                    for v in state {
                        csv.push_str(&format!("{v},"));
                    }
                    match delay_morse::difference::v_vector(state, spec.delta, 0.0) {
                        Ok(lv) => csv.push_str(&format!("{}\n", lv.value)),
                        Err(_) => csv.push('\n'),
                    }
                }
                write_output(dir, &format!("orbit_{i:05}.csv"), &csv)?;
            }
        }
    }
    let ok = report.violations.required_ok();
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "seed_count": report.seed_count,
            "steps": steps,
            "m_star": m_star,
            "n_star": n_star,
            "levels_observed": report.levels_observed,
            "level_graph": report.level_graph,
            "violations_ok": ok,
            "perturbed_seeds": stats.perturbed_seeds.len(),
            "excluded_seeds": stats.excluded_seeds.len(),
        }))?
    );
    eprintln!("full report written to {dir}/morse_report.json");
    Ok(if ok { 0 } else { 1 })
}

fn run_verify() -> Result<u8> {
    let results = verify::run_all();
    let mut all_ok = true;
    for r in &results {
        println!("{}", r.line());
        all_ok &= r.passed;
    }
    println!(
        "{}: {} of {} criteria passed",
        if all_ok { "OK" } else { "FAILED" },
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    Ok(if all_ok { 0 } else { 1 })
}
