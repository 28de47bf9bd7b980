//! Command-line experiment driver.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pi_esn::config::{apply_file, apply_overrides};
use pi_esn::data::{add_noise, load_dataset, save_dataset};
use pi_esn::harness::{
    aggregate_table, evaluate_trained, load_aggregate_csv, model_by_name, render_aggregate_svg,
    run_experiment, snr_label, train_single, write_run_artifacts, EvalReport, ExperimentSpec,
};
use pi_esn::model_io::load_model;
use pi_esn::seeds::{cell_seed, noise_seed};

const OUT_DIR_ENV: &str = "PI_ESN_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "pi-esn",
    version,
    about = "PI-ESN hidden-state reconstruction experiments"
)]
struct Cli {
    /// Configuration file (key = value lines under [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration value, e.g. --set train.max_steps=5000.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,

    /// Master seed; every derived seed is a pure function of it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: $PI_ESN_OUT_DIR or ./runs).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for sweep cells (0 = automatic).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset CSV from the configured physics model.
    Generate {
        /// Output file (default: <out_dir>/dataset.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add measurement noise at this SNR in dB.
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Train one readout on a saved dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Reservoir size (default: first entry of reservoir.sizes).
        #[arg(long)]
        size: Option<usize>,
    },
    /// Re-evaluate a saved model against a saved dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the full (size × noise) sweep grid.
    Sweep,
    /// Summarize a sweep: table to stdout, SVG plot next to the CSV.
    Report,
}

/// Error paired with the exit code it should produce.
struct CliError {
    code: u8,
    message: String,
}

fn usage_err(e: impl std::fmt::Display) -> CliError {
    CliError {
        code: 2,
        message: e.to_string(),
    }
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError {
        code: 1,
        message: e.to_string(),
    }
}

fn build_spec(cli: &Cli) -> Result<ExperimentSpec, CliError> {
    let mut spec = ExperimentSpec::default();
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        spec.out_dir = PathBuf::from(dir);
    }
    if let Some(path) = &cli.config {
        apply_file(&mut spec, path).map_err(usage_err)?;
    }
    apply_overrides(&mut spec, &cli.set).map_err(usage_err)?;
    if let Some(seed) = cli.seed {
        spec.master_seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        spec.out_dir = dir.clone();
    }
    if let Some(threads) = cli.threads {
        spec.threads = threads;
    }
    Ok(spec)
}

fn persist_config(spec: &ExperimentSpec) -> Result<(), CliError> {
    std::fs::create_dir_all(&spec.out_dir).map_err(runtime_err)?;
    let text = spec.effective_config_text();
    print!("{text}");
    std::fs::write(spec.out_dir.join("effective_config.txt"), text).map_err(runtime_err)?;
    Ok(())
}

fn print_report(r: &EvalReport) {
    println!(
        "n_units={} snr_db={} seed={} rmse_hidden={:.6} rmse_denoised=[{}] e_d={:.6e} e_p={:.6e} steps={} wall={:.1}s",
        r.n_units,
        snr_label(r.snr_db),
        r.cell_seed,
        r.rmse_hidden,
        r.rmse_observed_denoised
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(", "),
        r.e_d,
        r.e_p,
        r.steps_run,
        r.wall_seconds
    );
}

fn write_single_report(path: &PathBuf, r: &EvalReport) -> Result<(), CliError> {
    let mut out = String::from("n_units,snr_db,cell_seed,rmse_hidden");
    for j in 0..r.rmse_observed_denoised.len() {
        out.push_str(&format!(",rmse_z{}_denoised", j + 1));
    }
    out.push_str(",e_d,e_p,steps_run,wall_seconds\n");
    out.push_str(&format!(
        "{},{},{},{}",
        r.n_units,
        snr_label(r.snr_db),
        r.cell_seed,
        r.rmse_hidden
    ));
    for v in &r.rmse_observed_denoised {
        out.push_str(&format!(",{v}"));
    }
    out.push_str(&format!(
        ",{},{},{},{:.3}\n",
        r.e_d, r.e_p, r.steps_run, r.wall_seconds
    ));
    std::fs::write(path, out).map_err(runtime_err)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let spec = build_spec(cli)?;
    match &cli.command {
        Command::Generate { out, snr_db } => {
            persist_config(&spec)?;
            let phys = model_by_name(&spec.model_name).map_err(usage_err)?;
            let mut dataset = pi_esn::generate_dataset(
                phys.as_ref(),
                &spec.y0,
                spec.dt,
                spec.n_samples,
                spec.spinup_steps,
            )
            .map_err(runtime_err)?;
            if let Some(db) = snr_db {
                dataset = add_noise(&dataset, *db, noise_seed(spec.master_seed, 0))
                    .map_err(runtime_err)?;
            }
            let path = out
                .clone()
                .unwrap_or_else(|| spec.out_dir.join("dataset.csv"));
            save_dataset(&dataset, &path).map_err(runtime_err)?;
            println!(
                "wrote {} rows ({} observed columns) to {}",
                dataset.n_samples(),
                dataset.n_z(),
                path.display()
            );
            Ok(())
        }
        Command::Train { dataset, size } => {
            persist_config(&spec)?;
            let phys = model_by_name(&spec.model_name).map_err(usage_err)?;
            let data = load_dataset(dataset).map_err(runtime_err)?;
            let n_units = size.unwrap_or(spec.sizes[0]);
            let seed = cell_seed(spec.master_seed, 0, 0);
            let run = train_single(
                phys.as_ref(),
                &data,
                n_units,
                spec.sigma_in,
                spec.spectral_radius,
                spec.avg_degree,
                &spec.train,
                seed,
            )
            .map_err(runtime_err)?;
            write_run_artifacts(&spec.out_dir, phys.as_ref(), &data, &run).map_err(runtime_err)?;
            write_single_report(&spec.out_dir.join("report.csv"), &run.report)?;
            print_report(&run.report);
            Ok(())
        }
        Command::Evaluate { dataset, model } => {
            persist_config(&spec)?;
            let phys = model_by_name(&spec.model_name).map_err(usage_err)?;
            let data = load_dataset(dataset).map_err(runtime_err)?;
            let trained = load_model(model).map_err(runtime_err)?;
            let eval = evaluate_trained(
                phys.as_ref(),
                &data,
                &trained.reservoir,
                &trained.readout,
                trained.train_config.washout,
            )
            .map_err(runtime_err)?;
            let report = EvalReport {
                n_units: trained.reservoir.config.n_units,
                snr_db: data.snr_db,
                cell_seed: trained.reservoir.config.seed,
                rmse_hidden: eval.rmse_hidden,
                rmse_observed_denoised: eval.rmse_observed_denoised,
                e_d: eval.e_d,
                e_p: eval.e_p,
                wall_seconds: 0.0,
                steps_run: 0,
            };
            write_single_report(&spec.out_dir.join("report.csv"), &report)?;
            print_report(&report);
            Ok(())
        }
        Command::Sweep => {
            let results = run_experiment(&spec).map_err(runtime_err)?;
            print!("{}", spec.effective_config_text());
            let mut failed = 0;
            for cell in &results {
                match &cell.report {
                    Ok(r) => print_report(r),
                    Err(msg) => {
                        failed += 1;
                        println!(
                            "n_units={} snr_db={} seed={} FAILED: {msg}",
                            cell.n_units,
                            snr_label(cell.snr_db),
                            cell.cell_seed
                        );
                    }
                }
            }
            println!(
                "sweep complete: {}/{} cells ok, aggregates in {}",
                results.len() - failed,
                results.len(),
                spec.out_dir.display()
            );
            Ok(())
        }
        Command::Report => {
            let csv = spec.out_dir.join("rmse_vs_size.csv");
            let rows = load_aggregate_csv(&csv).map_err(runtime_err)?;
            print!("{}", aggregate_table(&rows));
            let svg_path = spec.out_dir.join("rmse_vs_size.svg");
            std::fs::write(&svg_path, render_aggregate_svg(&rows)).map_err(runtime_err)?;
            println!("plot written to {}", svg_path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
