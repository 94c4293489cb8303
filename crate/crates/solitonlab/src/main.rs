use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use solitonlab::config::load_config;
use solitonlab::error::Error;
use solitonlab::experiment::{run_experiment, sweep_orders};
use solitonlab::linops::spectral_report;
use solitonlab::profile::{solve_profile, ProfileCache};

/// Spectral laboratory for solitary-wave dynamics of generalized nonlinear
/// Schrödinger equations in slowly varying external potentials.
#[derive(Parser)]
#[command(name = "solitonlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (sectioned key/value text)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker pool size for sweeps (default: logical cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Treat unknown configuration keys as errors
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the solitary-wave profile at μ₀ and export the table
    Profile(Common),
    /// Run the certification stage only (conditions, spectrum, Ω, ρ)
    Spectrum(Common),
    /// Run a single experiment end to end
    Run(Common),
    /// Run an order-of-convergence sweep over the [sweep] section
    Sweep(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, action): (&Common, fn(&Common) -> Result<(), Error>) = match &cli.command {
        Command::Profile(c) => (c, do_profile),
        Command::Spectrum(c) => (c, do_spectrum),
        Command::Run(c) => (c, do_run),
        Command::Sweep(c) => (c, do_sweep),
    };
    match action(common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(common: &Common) -> Result<solitonlab::config::ExperimentConfig, Error> {
    let (config, warnings) = load_config(&common.config, common.strict)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(config)
}

fn do_profile(common: &Common) -> Result<(), Error> {
    let config = load(common)?;
    std::fs::create_dir_all(&common.out)?;
    let n = solitonlab::profile::default_radial_n(&config.spec);
    let profile = solve_profile(&config.spec, config.sigma0.mu, config.dim, n)?;
    let path = common.out.join("profile.txt");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    profile.export_table(&mut out)?;
    use std::io::Write;
    out.flush()?;
    println!(
        "profile: μ = {}, η(0) = {:.12}, m = {:.12}, m' = {:.12}, residual = {:.3e}",
        profile.mu,
        profile.eta0,
        profile.mass(),
        profile.mass_slope(),
        profile.residual_sup
    );
    println!("table written to {}", path.display());
    Ok(())
}

fn do_spectrum(common: &Common) -> Result<(), Error> {
    let config = load(common)?;
    std::fs::create_dir_all(&common.out)?;
    let grid = config.grid()?;
    let cache = ProfileCache::new(config.spec.clone(), config.dim);
    let n = cache.radial_n;
    let profile = solve_profile(&config.spec, config.sigma0.mu, config.dim, n)?;
    let view = cache.at(config.sigma0.mu)?;
    let report = spectral_report(
        &config.spec,
        &profile,
        &view,
        config.k_max,
        &grid,
        config.coercivity,
    )?;
    let text = report.render();
    std::fs::write(common.out.join("spectral_report.txt"), &text)?;
    print!("{text}");
    if report.condition_f != solitonlab::model::Verdict::Pass {
        return Err(Error::certification(
            "null space",
            "spectral certification failed; see spectral_report.txt",
        ));
    }
    Ok(())
}

fn do_run(common: &Common) -> Result<(), Error> {
    let config = load(common)?;
    let summary = run_experiment(&config, &common.out)?;
    println!("run complete in {:.2} s", summary.wall_seconds);
    println!(
        "  sup|a - a_N| = {:.4e}   sup||w||_H1 = {:.4e}   sup|α| = {:.4e}",
        summary.sup_a_dev, summary.sup_w_h1, summary.sup_alpha
    );
    println!(
        "  N drift = {:.3e}   H_V drift = {:.3e}   Ehrenfest (rel, integrated) = {:.3e}",
        summary.n_drift_rel, summary.hv_drift_rel, summary.ehrenfest_int_rel
    );
    println!("outputs in {}", common.out.display());
    Ok(())
}

fn do_sweep(common: &Common) -> Result<(), Error> {
    let config = load(common)?;
    let workers = common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = sweep_orders(&config, &common.out, workers)?;
    print!("{}", report.render());
    Ok(())
}
