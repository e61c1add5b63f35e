//! `vmlimit`: validate configurations, run simulations and c-sweeps, and
//! post-process stored histories.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use vmlimit_core::diagnostics::{
    charge_residual, energy_drift, history_ampere_residual_scaled, lambda_sup, mass_drift, triangle_residual,
    LambdaRegion,
};
use vmlimit_core::harness::{read_history, run_sweep, Run, RunConfig, RunPlan};
use vmlimit_core::{validate_assumptions, LightSpeed};

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "vmlimit", version, about = "Relativistic Vlasov-Maxwell runs and their Vlasov-Poisson limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and its initial data without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one simulation to its final time.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out_dir` in the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the limit and every listed speed of light on one grid and fit the gap rate.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        c_list: Vec<f64>,
        /// Number of finite-c runs executed concurrently.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cone-energy identity, far-field sup and conservation checks on a stored run.
    Diagnose {
        /// Run directory holding `history.json` and `config.toml`.
        #[arg(long)]
        history: PathBuf,
        /// Apex `t,x` of a backward light cone; may be repeated.
        #[arg(long, value_parser = parse_apex)]
        apex: Vec<(f64, f64)>,
        /// Directory of the matching limit run, for the far-field region.
        #[arg(long)]
        limit_history: Option<PathBuf>,
    },
}

/// Failure tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn validation(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_VALIDATION, error: error.into() }
}

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_RUNTIME, error: error.into() }
}

fn parse_apex(s: &str) -> Result<(f64, f64), String> {
    let (t, x) = s.split_once(',').ok_or_else(|| format!("expected t,x, got {s:?}"))?;
    let t: f64 = t.trim().parse().map_err(|e| format!("bad apex time {t:?}: {e}"))?;
    let x: f64 = x.trim().parse().map_err(|e| format!("bad apex position {x:?}: {e}"))?;
    if !(t.is_finite() && x.is_finite() && t >= 0.0) {
        return Err(format!("apex ({t}, {x}) must be finite with t >= 0"));
    }
    Ok((t, x))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let outcome = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run { config, out } => run(&config, out),
        Command::Sweep { config, c_list, jobs, out } => sweep(&config, &c_list, jobs, out),
        Command::Diagnose { history, apex, limit_history } => diagnose(&history, &apex, limit_history.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("VMLIMIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().with_context(|| format!("VMLIMIT_THREADS={raw:?} is not a thread count"))?;
    if n == 0 {
        bail!("VMLIMIT_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(validation)
}

fn validate(path: &Path) -> Result<(), Failure> {
    let config = load(path)?;
    let plan = RunPlan::new(&config).map_err(validation)?;
    let report = validate_assumptions(&plan.data);
    for check in &report.checks {
        println!(
            "{:<6} {} ({}): residual {:.3e}, tolerance {:.3e}",
            if check.passed { "ok" } else { "FAILED" },
            check.condition,
            check.description,
            check.residual + 0.0,
            check.tolerance
        );
    }
    let g = plan.grid;
    println!(
        "grid {}x{}x{} cells, X = {}, P = ({:.4}, {:.4}), dt = {:.6e} over {} steps, force estimate {:.4e}",
        g.x.n - 1,
        g.p1.n - 1,
        g.p2.n - 1, g.x.half_width, g.p1.half_width, g.p2.half_width, plan.dt, plan.steps, plan.force_estimate
    );
    let failed = report.failed();
    if !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|c| c.condition).collect();
        return Err(validation(anyhow!("initial data violates {}", names.join(", "))));
    }
    Ok(())
}

fn run(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut config = load(path)?;
    if out.is_some() {
        config.out_dir = out;
    }
    let plan = RunPlan::new(&config).map_err(validation)?;
    let output = Run::new(&config, &plan).and_then(|r| r.run_to_end(|_| Ok(()))).map_err(runtime)?;
    let last = output.series.last().expect("a run records its initial frame");
    println!("reached t = {} after {} steps (dt = {:.6e})", output.state.t, plan.steps, plan.dt);
    println!(
        "sup|E1| = {:.4e}, runmax|E2| = {:.4e}, runmax|B| = {:.4e}, max Q = {:.4}",
        last.e1_sup, last.e2_runmax, last.b_runmax, output.q_max
    );
    println!(
        "mass drift {:?}, charge residual {:.3e}, energy drift {:.3e}",
        mass_drift(&output.history),
        charge_residual(&output.history),
        energy_drift(&output.history)
    );
    if let Some(dir) = &output.out_dir {
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn sweep(path: &Path, c_list: &[f64], jobs: Option<usize>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut config = load(path)?;
    if out.is_some() {
        config.out_dir = out;
    }
    RunPlan::new(&config).map_err(validation)?;
    if c_list.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(validation(anyhow!("every entry of --c-list must be a positive finite number")));
    }
    if config.e2_init_amp != 0.0 || config.b_init_amp != 0.0 {
        return Err(validation(anyhow!("the sweep requires zero initial E2 and B")));
    }
    let result = run_sweep(&config, c_list, jobs).map_err(runtime)?;
    println!("{:>8} {:>12} {:>12} {:>12} {:>12} {:>12}", "c", "h_sup", "e1_gap", "e2_sup", "b_sup", "total_gap");
    for row in &result.rows {
        let h = row.norms.h_sup.iter().copied().fold(0.0, f64::max);
        println!(
            "{:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            row.c, h, row.norms.e1_gap, row.norms.e2_sup, row.norms.b_sup, row.total_gap
        );
    }
    match &result.fit {
        Some(fit) => println!("gap ~ c^{:.4} (intercept {:.4}, residual {:.3e})", fit.slope, fit.intercept, fit.residual),
        None => println!("slope undefined: fewer than two speeds of light"),
    }
    match &result.lambda_fit {
        Some(fit) => println!("far-field sup ~ c^{:.4}", fit.slope),
        None => println!("far field unobserved: region |x| >= {:.4} lies outside the domain", result.region.d0),
    }
    Ok(())
}

fn diagnose(dir: &Path, apexes: &[(f64, f64)], limit_dir: Option<&Path>) -> Result<(), Failure> {
    let history = read_history(&dir.join("history.json")).map_err(validation)?;
    let config = load(&dir.join("config.toml"))?;
    println!("{} frames from t = {} to t = {}", history.len(), history.times()[0], history.times()[history.len() - 1]);
    println!("mass drift {:?}", mass_drift(&history));
    println!("charge residual {:.3e}", charge_residual(&history));
    println!("energy drift {:.3e}", energy_drift(&history));
    match history_ampere_residual_scaled(&history) {
        Ok(r) => println!("ampere residual {r:.3e}"),
        Err(e) => println!("ampere residual unavailable: {e}"),
    }

    if !apexes.is_empty() {
        let LightSpeed::Finite(c) = history.c else {
            return Err(validation(anyhow!("the cone identity needs a finite speed of light")));
        };
        for &apex in apexes {
            let tri = triangle_residual(&history, apex, c).map_err(runtime)?;
            println!(
                "apex ({:.4}, {}): I = {:.6e}, II = {:.6e}, III = {:.6e}, relative residual {:.3e}{}",
                tri.apex.0,
                tri.apex.1,
                tri.base,
                tri.right_edge,
                tri.left_edge,
                tri.relative_residual(),
                if tri.clipped { " (cone leaves the stored domain)" } else { "" }
            );
        }
    }

    let q_run = history.frames.iter().map(|f| f.q).fold(0.0, f64::max);
    let q_limit = match limit_dir {
        Some(d) => read_history(&d.join("history.json")).map_err(validation)?.frames.iter().map(|f| f.q).fold(0.0, f64::max),
        None => q_run,
    };
    let spec = config.profile_spec().map_err(validation)?;
    let region = LambdaRegion::from_supports(spec.r0, config.t_final, q_run + q_limit, &spec.species_params());
    let far = lambda_sup(&history, &region, config.t_final);
    if far.empty {
        println!("far field: region |x| >= {:.4} holds no stored node", region.d0);
    } else {
        println!("far field: sup {:.4e} over {} nodes beyond |x| >= {:.4}", far.value, far.nodes, region.d0);
    }
    Ok(())
}
