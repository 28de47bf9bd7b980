//! Experiment driver: seeded sweeps over reservoir size and noise level,
//! RMSE evaluation, and plot-ready CSV emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{add_noise, generate_dataset, Dataset};
use crate::dynamics::{Lorenz, PhysicsModel};
use crate::error::{Error, Result};
use crate::model_io::{save_model, save_trace, TrainedModel};
use crate::reservoir::{Reservoir, ReservoirConfig};
use crate::seeds::{cell_seed, mix, noise_seed};
use crate::training::{evaluate_loss, prepare_training_arrays, train, Readout, TrainConfig};

/// Looks up a registered physics model by name. Only `lorenz` ships built in.
pub fn model_by_name(name: &str) -> Result<Box<dyn PhysicsModel>> {
    match name {
        "lorenz" => Ok(Box::new(Lorenz::default())),
        other => Err(Error::InvalidArgument(format!(
            "unknown physics model '{other}'"
        ))),
    }
}

/// Root mean squared error between two equal-length series.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument(
            "rmse needs at least one sample".into(),
        ));
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Full sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model_name: String,
    pub dt: f64,
    pub n_samples: usize,
    pub y0: Vec<f64>,
    pub spinup_steps: usize,
    /// Noise levels; `None` is the clean column.
    pub snr_db_list: Vec<Option<f64>>,
    pub sizes: Vec<usize>,
    pub sigma_in: f64,
    pub spectral_radius: f64,
    pub avg_degree: usize,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    /// Worker threads for sweep cells; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            model_name: "lorenz".into(),
            dt: 0.01,
            n_samples: 20_000,
            y0: vec![-10.0, -4.45, 35.1],
            spinup_steps: 1000,
            snr_db_list: vec![None, Some(40.0), Some(20.0)],
            sizes: vec![50, 100, 200, 300, 600],
            sigma_in: 1.0,
            spectral_radius: 1.0,
            avg_degree: 20,
            train: TrainConfig::default(),
            out_dir: PathBuf::from("runs"),
            master_seed: 0,
            threads: 0,
        }
    }
}

impl ExperimentSpec {
    /// Human- and machine-readable echo of the full effective configuration,
    /// including every derived seed.
    pub fn effective_config_text(&self) -> String {
        let mut s = String::new();
        let t = &self.train;
        writeln!(s, "[experiment]").unwrap();
        writeln!(s, "model = {}", self.model_name).unwrap();
        writeln!(s, "master_seed = {}", self.master_seed).unwrap();
        writeln!(s, "out_dir = {}", self.out_dir.display()).unwrap();
        writeln!(s, "threads = {}", self.threads).unwrap();
        writeln!(s, "\n[dataset]").unwrap();
        writeln!(s, "dt = {}", self.dt).unwrap();
        writeln!(s, "n_samples = {}", self.n_samples).unwrap();
        let y0: Vec<String> = self.y0.iter().map(|v| v.to_string()).collect();
        writeln!(s, "y0 = {}", y0.join(",")).unwrap();
        writeln!(s, "spinup_steps = {}", self.spinup_steps).unwrap();
        let snr: Vec<String> = self
            .snr_db_list
            .iter()
            .map(|v| v.map_or("none".into(), |x| x.to_string()))
            .collect();
        writeln!(s, "snr_db = {}", snr.join(",")).unwrap();
        writeln!(s, "\n[reservoir]").unwrap();
        let sizes: Vec<String> = self.sizes.iter().map(|v| v.to_string()).collect();
        writeln!(s, "sizes = {}", sizes.join(",")).unwrap();
        writeln!(s, "sigma_in = {}", self.sigma_in).unwrap();
        writeln!(s, "spectral_radius = {}", self.spectral_radius).unwrap();
        writeln!(s, "avg_degree = {}", self.avg_degree).unwrap();
        writeln!(s, "\n[train]").unwrap();
        writeln!(s, "gamma = {}", t.gamma).unwrap();
        writeln!(s, "learning_rate = {}", t.learning_rate).unwrap();
        writeln!(s, "adam_beta1 = {}", t.adam_beta1).unwrap();
        writeln!(s, "adam_beta2 = {}", t.adam_beta2).unwrap();
        writeln!(s, "adam_epsilon = {}", t.adam_epsilon).unwrap();
        writeln!(s, "max_steps = {}", t.max_steps).unwrap();
        writeln!(s, "plateau_window = {}", t.plateau_window).unwrap();
        writeln!(s, "plateau_rel_tol = {}", t.plateau_rel_tol).unwrap();
        writeln!(s, "washout = {}", t.washout).unwrap();
        writeln!(s, "hidden_init_scale = {}", t.hidden_init_scale).unwrap();
        writeln!(s, "\n[seeds]").unwrap();
        for (si, size) in self.sizes.iter().enumerate() {
            for (ni, snr) in self.snr_db_list.iter().enumerate() {
                writeln!(
                    s,
                    "cell_n{}_snr{} = {}",
                    size,
                    snr_label(*snr),
                    cell_seed(self.master_seed, si, ni)
                )
                .unwrap();
            }
        }
        for (ni, snr) in self.snr_db_list.iter().enumerate() {
            if snr.is_some() {
                writeln!(
                    s,
                    "noise_snr{} = {}",
                    snr_label(*snr),
                    noise_seed(self.master_seed, ni)
                )
                .unwrap();
            }
        }
        s
    }
}

pub fn snr_label(snr: Option<f64>) -> String {
    snr.map_or("none".into(), |v| v.to_string())
}

/// Evaluation of one trained readout against the clean reference.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub n_units: usize,
    pub snr_db: Option<f64>,
    pub cell_seed: u64,
    /// RMSE of the reconstructed hidden series against the clean reference,
    /// over the post-washout window.
    pub rmse_hidden: f64,
    /// Per observed channel: RMSE of the prediction against the clean signal.
    pub rmse_observed_denoised: Vec<f64>,
    pub e_d: f64,
    pub e_p: f64,
    pub wall_seconds: f64,
    pub steps_run: usize,
}

/// Evaluated series over the post-washout window, kept for trajectory CSVs.
pub struct Evaluation {
    pub rmse_hidden: f64,
    pub rmse_observed_denoised: Vec<f64>,
    pub e_d: f64,
    pub e_p: f64,
    /// Dataset sample index of the first evaluated row.
    pub first_sample: usize,
    pub z_hat: DMatrix<f64>,
    pub h_hat: DMatrix<f64>,
}

/// Runs the deterministic evaluation pipeline: teacher-forced states from
/// the measured series, readout outputs, post-washout metrics against the
/// clean reference (which is never seen by training).
pub fn evaluate_trained(
    phys: &dyn PhysicsModel,
    dataset: &Dataset,
    reservoir: &Reservoir,
    readout: &Readout,
    washout: usize,
) -> Result<Evaluation> {
    let (features, targets) = prepare_training_arrays(reservoir, dataset, washout)?;
    let report = evaluate_loss(readout, &features, &targets, dataset.dt, phys)?;
    let yhat = readout.outputs(&features)?;
    let n_z = readout.n_z;
    let n_h = readout.n_h();
    let m = features.nrows();
    let first_sample = washout + 1; // feature row k predicts sample washout+1+k
    let z_hat = yhat.columns(0, n_z).into_owned();
    let h_hat = yhat.columns(n_z, n_h).into_owned();

    let clean = dataset.clean_full.rows(first_sample, m);
    let mut hidden_pred = Vec::with_capacity(m * n_h);
    let mut hidden_ref = Vec::with_capacity(m * n_h);
    for n in 0..m {
        for j in 0..n_h {
            hidden_pred.push(h_hat[(n, j)]);
            hidden_ref.push(clean[(n, n_z + j)]);
        }
    }
    let rmse_hidden = rmse(&hidden_pred, &hidden_ref)?;

    let mut rmse_observed_denoised = Vec::with_capacity(n_z);
    for j in 0..n_z {
        let pred: Vec<f64> = z_hat.column(j).iter().copied().collect();
        let refc: Vec<f64> = clean.column(j).iter().copied().collect();
        rmse_observed_denoised.push(rmse(&pred, &refc)?);
    }

    Ok(Evaluation {
        rmse_hidden,
        rmse_observed_denoised,
        e_d: report.e_d,
        e_p: report.e_p,
        first_sample,
        z_hat,
        h_hat,
    })
}

/// One sweep cell outcome; failures carry the error text so the remaining
/// cells still complete.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub n_units: usize,
    pub snr_db: Option<f64>,
    pub cell_seed: u64,
    pub report: std::result::Result<EvalReport, String>,
}

/// Writes the last 10% of the evaluated window, time axis both raw and
/// normalized by the model's report time scale.
fn write_trajectory_csv(
    path: &Path,
    phys: &dyn PhysicsModel,
    dataset: &Dataset,
    eval: &Evaluation,
) -> Result<()> {
    let m = eval.h_hat.nrows();
    let tail = (m / 10).max(1);
    let start = m - tail;
    let scale = phys.report_time_scale();
    let n_z = eval.z_hat.ncols();
    let hidden_name = format!("phi{}", n_z + 1);
    let noisy = dataset.observed_noisy.as_ref();
    let mut out = String::new();
    write!(
        out,
        "lambda_t,t,{hidden_name}_clean,{hidden_name}_hat,phi1_clean"
    )
    .unwrap();
    if noisy.is_some() {
        out.push_str(",phi1_noisy");
    }
    out.push_str(",phi1_hat\n");
    for k in start..m {
        let sample = eval.first_sample + k;
        let t = sample as f64 * dataset.dt;
        write!(
            out,
            "{},{},{},{},{}",
            scale * t,
            t,
            dataset.clean_full[(sample, n_z)],
            eval.h_hat[(k, 0)],
            dataset.clean_full[(sample, 0)]
        )
        .unwrap();
        if let Some(nm) = noisy {
            write!(out, ",{}", nm[(sample, 0)]).unwrap();
        }
        writeln!(out, ",{}", eval.z_hat[(k, 0)]).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// A trained model, its trace, and the evaluation against the clean
/// reference. Produced by [`train_single`].
pub struct SingleRun {
    pub model: TrainedModel,
    pub trace: Vec<crate::training::TraceRow>,
    pub evaluation: Evaluation,
    pub report: EvalReport,
}

/// Builds one reservoir, trains it on the dataset, and evaluates it. The
/// given seed derives the reservoir and hidden-init seeds.
pub fn train_single(
    phys: &dyn PhysicsModel,
    dataset: &Dataset,
    n_units: usize,
    sigma_in: f64,
    spectral_radius: f64,
    avg_degree: usize,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<SingleRun> {
    let started = Instant::now();
    let reservoir_config = ReservoirConfig {
        n_units,
        input_dim: phys.observed_dim(),
        sigma_in,
        spectral_radius,
        avg_degree: avg_degree.min(n_units),
        seed: mix(seed, 1),
    };
    let train_config = TrainConfig {
        seed: mix(seed, 2),
        ..*train_config
    };
    let reservoir = Reservoir::build(reservoir_config)?;
    let outcome = train(&reservoir, dataset, phys, &train_config)?;
    let evaluation = evaluate_trained(
        phys,
        dataset,
        &reservoir,
        &outcome.readout,
        train_config.washout,
    )?;
    let report = EvalReport {
        n_units,
        snr_db: dataset.snr_db,
        cell_seed: seed,
        rmse_hidden: evaluation.rmse_hidden,
        rmse_observed_denoised: evaluation.rmse_observed_denoised.clone(),
        e_d: evaluation.e_d,
        e_p: evaluation.e_p,
        wall_seconds: started.elapsed().as_secs_f64(),
        steps_run: outcome.steps_run,
    };
    Ok(SingleRun {
        model: TrainedModel {
            reservoir,
            readout: outcome.readout,
            train_config,
        },
        trace: outcome.trace,
        evaluation,
        report,
    })
}

/// Writes the standard per-run artifacts (model, trace, trajectory).
pub fn write_run_artifacts(
    dir: &Path,
    phys: &dyn PhysicsModel,
    dataset: &Dataset,
    run: &SingleRun,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_model(&run.model, &dir.join("model.txt"))?;
    save_trace(&run.trace, &dir.join("trace.csv"))?;
    write_trajectory_csv(&dir.join("trajectory.csv"), phys, dataset, &run.evaluation)
}

fn run_cell(
    spec: &ExperimentSpec,
    phys: &dyn PhysicsModel,
    dataset: &Dataset,
    size_idx: usize,
    noise_idx: usize,
) -> Result<EvalReport> {
    let n_units = spec.sizes[size_idx];
    let snr_db = spec.snr_db_list[noise_idx];
    let seed = cell_seed(spec.master_seed, size_idx, noise_idx);
    let run = train_single(
        phys,
        dataset,
        n_units,
        spec.sigma_in,
        spec.spectral_radius,
        spec.avg_degree,
        &spec.train,
        seed,
    )?;
    let cell_dir = spec
        .out_dir
        .join(format!("cell_n{}_snr{}", n_units, snr_label(snr_db)));
    write_run_artifacts(&cell_dir, phys, dataset, &run)?;
    Ok(run.report)
}

/// Runs the full (size × noise) grid. Per-cell failures are recorded and do
/// not stop the sweep; the aggregate CSVs are written once at the end in a
/// deterministic order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<CellResult>> {
    if spec.sizes.is_empty() || spec.snr_db_list.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    std::fs::create_dir_all(&spec.out_dir)?;
    std::fs::write(
        spec.out_dir.join("effective_config.txt"),
        spec.effective_config_text(),
    )?;
    let phys = model_by_name(&spec.model_name)?;
    let base = generate_dataset(
        phys.as_ref(),
        &spec.y0,
        spec.dt,
        spec.n_samples,
        spec.spinup_steps,
    )?;
    let mut datasets = Vec::with_capacity(spec.snr_db_list.len());
    for (ni, snr) in spec.snr_db_list.iter().enumerate() {
        datasets.push(match snr {
            None => base.clone(),
            Some(db) => add_noise(&base, *db, noise_seed(spec.master_seed, ni))?,
        });
    }

    let cells: Vec<(usize, usize)> = (0..spec.sizes.len())
        .flat_map(|si| (0..spec.snr_db_list.len()).map(move |ni| (si, ni)))
        .collect();

    let run_all = || -> Vec<CellResult> {
        cells
            .par_iter()
            .map(|&(si, ni)| {
                let report =
                    run_cell(spec, phys.as_ref(), &datasets[ni], si, ni).map_err(|e| e.to_string());
                CellResult {
                    n_units: spec.sizes[si],
                    snr_db: spec.snr_db_list[ni],
                    cell_seed: cell_seed(spec.master_seed, si, ni),
                    report,
                }
            })
            .collect()
    };
    let results = if spec.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.threads)
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
        pool.install(run_all)
    } else {
        run_all()
    };

    write_reports_csv(
        &spec.out_dir.join("reports.csv"),
        phys.observed_dim(),
        &results,
    )?;
    write_aggregate_csv(&spec.out_dir.join("rmse_vs_size.csv"), &results)?;
    Ok(results)
}

fn write_reports_csv(path: &Path, n_z: usize, results: &[CellResult]) -> Result<()> {
    let mut out = String::from("n_units,snr_db,cell_seed,status,rmse_hidden");
    for j in 0..n_z {
        write!(out, ",rmse_z{}_denoised", j + 1).unwrap();
    }
    out.push_str(",e_d,e_p,steps_run,wall_seconds\n");
    for cell in results {
        write!(
            out,
            "{},{},{}",
            cell.n_units,
            snr_label(cell.snr_db),
            cell.cell_seed
        )
        .unwrap();
        match &cell.report {
            Ok(r) => {
                write!(out, ",ok,{}", r.rmse_hidden).unwrap();
                for v in &r.rmse_observed_denoised {
                    write!(out, ",{v}").unwrap();
                }
                writeln!(
                    out,
                    ",{},{},{},{:.3}",
                    r.e_d, r.e_p, r.steps_run, r.wall_seconds
                )
                .unwrap();
            }
            Err(msg) => {
                write!(out, ",failed: {},nan", msg.replace(',', ";")).unwrap();
                for _ in 0..n_z {
                    out.push_str(",nan");
                }
                out.push_str(",nan,nan,0,0\n");
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_aggregate_csv(path: &Path, results: &[CellResult]) -> Result<()> {
    let mut out = String::from("n_units,snr_db,rmse_hidden\n");
    for cell in results {
        let rmse = match &cell.report {
            Ok(r) => r.rmse_hidden.to_string(),
            Err(_) => "nan".into(),
        };
        writeln!(out, "{},{},{}", cell.n_units, snr_label(cell.snr_db), rmse).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parsed row of `rmse_vs_size.csv`.
pub struct AggregateRow {
    pub n_units: usize,
    pub snr_db: Option<f64>,
    pub rmse_hidden: f64,
}

pub fn load_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let bad = |msg: String| Error::Format {
            path: path.display().to_string(),
            line: idx + 1,
            msg,
        };
        if parts.len() != 3 {
            return Err(bad(format!("expected 3 columns, found {}", parts.len())));
        }
        rows.push(AggregateRow {
            n_units: parts[0]
                .parse()
                .map_err(|_| bad(format!("bad n_units '{}'", parts[0])))?,
            snr_db: if parts[1] == "none" {
                None
            } else {
                Some(
                    parts[1]
                        .parse()
                        .map_err(|_| bad(format!("bad snr_db '{}'", parts[1])))?,
                )
            },
            rmse_hidden: parts[2]
                .parse()
                .map_err(|_| bad(format!("bad rmse '{}'", parts[2])))?,
        });
    }
    Ok(rows)
}

/// Aligned text table of an aggregate CSV, one column per noise level.
pub fn aggregate_table(rows: &[AggregateRow]) -> String {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n_units).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut levels: Vec<String> = rows.iter().map(|r| snr_label(r.snr_db)).collect();
    levels.dedup();
    let mut out = format!("{:>8}", "n_units");
    for level in &levels {
        out.push_str(&format!("{:>14}", format!("snr={level}")));
    }
    out.push('\n');
    for size in &sizes {
        out.push_str(&format!("{size:>8}"));
        for level in &levels {
            let v = rows
                .iter()
                .find(|r| r.n_units == *size && snr_label(r.snr_db) == *level)
                .map(|r| r.rmse_hidden);
            match v {
                Some(v) => out.push_str(&format!("{v:>14.6}")),
                None => out.push_str(&format!("{:>14}", "-")),
            }
        }
        out.push('\n');
    }
    out
}

/// Minimal SVG line plot of RMSE against reservoir size, one polyline per
/// noise level, log-scaled y axis. No plotting dependency needed.
pub fn render_aggregate_svg(rows: &[AggregateRow]) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 20.0, 50.0);
    let finite: Vec<&AggregateRow> = rows.iter().filter(|r| r.rmse_hidden.is_finite()).collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    if finite.is_empty() {
        svg.push_str("<text x=\"20\" y=\"40\">no finite data</text>\n</svg>\n");
        return svg;
    }
    let x_min = finite.iter().map(|r| r.n_units).min().unwrap() as f64;
    let x_max = finite.iter().map(|r| r.n_units).max().unwrap() as f64;
    let y_min = finite
        .iter()
        .map(|r| r.rmse_hidden)
        .fold(f64::INFINITY, f64::min);
    let y_max = finite.iter().map(|r| r.rmse_hidden).fold(0.0_f64, f64::max);
    let (ly_min, ly_max) = (y_min.log10().floor(), y_max.log10().ceil());
    let sx = |x: f64| ml + (x - x_min) / (x_max - x_min).max(1.0) * (w - ml - mr);
    let sy = |y: f64| {
        let ly = y.log10();
        h - mb - (ly - ly_min) / (ly_max - ly_min).max(1e-12) * (h - mt - mb)
    };
    // Axes and gridlines at decades.
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - ml - mr,
        h - mt - mb
    ));
    let mut d = ly_min;
    while d <= ly_max + 1e-9 {
        let y = sy(10f64.powf(d));
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ccc\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{d}</text>\n",
            w - mr,
            ml - 6.0,
            y + 4.0
        ));
        d += 1.0;
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">reservoir units</text>\n\
         <text x=\"16\" y=\"{:.1}\" transform=\"rotate(-90 16 {:.1})\" text-anchor=\"middle\">RMSE</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0,
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    ));
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let mut levels: Vec<String> = rows.iter().map(|r| snr_label(r.snr_db)).collect();
    levels.dedup();
    for (k, level) in levels.iter().enumerate() {
        let color = colors[k % colors.len()];
        let mut pts: Vec<(f64, f64)> = finite
            .iter()
            .filter(|r| snr_label(r.snr_db) == *level)
            .map(|r| (r.n_units as f64, r.rmse_hidden))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.1},{:.1}", sx(*x), sy(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            path.join(" ")
        ));
        for (x, y) in &pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(*x),
                sy(*y)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">snr={level}</text>\n",
            w - mr - 90.0,
            mt + 18.0 * (k as f64 + 1.0)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_identical_series_is_zero() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn rmse_constant_offset() {
        let a = [1.0, 2.0, 3.0];
        let b = [1.5, 2.5, 3.5];
        approx::assert_abs_diff_eq!(rmse(&a, &b).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rmse_hand_computed() {
        approx::assert_abs_diff_eq!(
            rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            (25.0_f64 / 2.0).sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rmse_rejects_length_mismatch() {
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn unknown_model_is_an_error() {
        assert!(model_by_name("roessler").is_err());
        assert!(model_by_name("lorenz").is_ok());
    }

    fn tiny_spec(out_dir: std::path::PathBuf) -> ExperimentSpec {
        ExperimentSpec {
            n_samples: 260,
            sizes: vec![10, 20],
            snr_db_list: vec![None, Some(20.0)],
            train: TrainConfig {
                washout: 10,
                max_steps: 40,
                ..TrainConfig::default()
            },
            out_dir,
            master_seed: 5,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn sweep_writes_expected_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let spec = tiny_spec(dir.path().join("out"));
        let results = run_experiment(&spec).unwrap();
        assert_eq!(results.len(), 4);
        assert!(results.iter().all(|c| c.report.is_ok()));
        for name in ["effective_config.txt", "reports.csv", "rmse_vs_size.csv"] {
            assert!(spec.out_dir.join(name).exists(), "{name}");
        }
        for cell in ["cell_n10_snrnone", "cell_n20_snr20"] {
            for file in ["model.txt", "trace.csv", "trajectory.csv"] {
                assert!(spec.out_dir.join(cell).join(file).exists(), "{cell}/{file}");
            }
        }
        let rows = load_aggregate_csv(&spec.out_dir.join("rmse_vs_size.csv")).unwrap();
        assert_eq!(rows.len(), 4);
    }

    #[test]
    fn sweep_is_bit_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let spec_a = tiny_spec(dir.path().join("a"));
        let spec_b = tiny_spec(dir.path().join("b"));
        run_experiment(&spec_a).unwrap();
        run_experiment(&spec_b).unwrap();
        let a = std::fs::read(spec_a.out_dir.join("rmse_vs_size.csv")).unwrap();
        let b = std::fs::read(spec_b.out_dir.join("rmse_vs_size.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failed_cell_does_not_stop_the_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = tiny_spec(dir.path().join("out"));
        // Diverging learning rate fails every cell's training but the sweep
        // itself must still write its aggregates.
        spec.train.learning_rate = 1e160;
        spec.sizes = vec![10];
        let results = run_experiment(&spec).unwrap();
        assert_eq!(results.len(), 2);
        assert!(results.iter().all(|c| c.report.is_err()));
        let text = std::fs::read_to_string(spec.out_dir.join("reports.csv")).unwrap();
        assert!(text.contains("failed"));
        let rows = load_aggregate_csv(&spec.out_dir.join("rmse_vs_size.csv")).unwrap();
        assert!(rows.iter().all(|r| r.rmse_hidden.is_nan()));
    }

    #[test]
    fn aggregate_table_and_svg_render() {
        let rows = vec![
            AggregateRow {
                n_units: 50,
                snr_db: None,
                rmse_hidden: 2.0,
            },
            AggregateRow {
                n_units: 600,
                snr_db: None,
                rmse_hidden: 0.2,
            },
            AggregateRow {
                n_units: 50,
                snr_db: Some(20.0),
                rmse_hidden: 3.0,
            },
            AggregateRow {
                n_units: 600,
                snr_db: Some(20.0),
                rmse_hidden: 0.5,
            },
        ];
        let table = aggregate_table(&rows);
        assert!(table.contains("snr=none"));
        assert!(table.contains("600"));
        let svg = render_aggregate_svg(&rows);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
    }
}
