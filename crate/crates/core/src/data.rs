//! Dataset generation, measurement-noise injection, and CSV persistence.
//!
//! A [`Dataset`] holds the clean reference trajectory (kept for evaluation
//! only), the observed subset of columns, and optionally a noisy copy of the
//! observed columns. The training pipeline consumes [`Dataset::measured`],
//! never the hidden columns.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::{euler_integrate, PhysicsModel};
use crate::error::{Error, Result};

/// A time-sampled trajectory with an observed/hidden split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Sampling time Δt.
    pub dt: f64,
    /// Reference trajectory, `n_samples × n_y`. Evaluation only.
    pub clean_full: DMatrix<f64>,
    /// Observed columns of `clean_full`, `n_samples × n_z`.
    pub observed: DMatrix<f64>,
    /// Noisy copy of `observed`, present after [`add_noise`].
    pub observed_noisy: Option<DMatrix<f64>>,
    /// Requested SNR in dB when noise is present.
    pub snr_db: Option<f64>,
    /// Noise seed (0 when no noise has been injected).
    pub seed: u64,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.clean_full.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.clean_full.ncols()
    }

    pub fn n_z(&self) -> usize {
        self.observed.ncols()
    }

    /// The measurement series the training pipeline consumes: noisy when
    /// present, clean otherwise.
    pub fn measured(&self) -> &DMatrix<f64> {
        self.observed_noisy.as_ref().unwrap_or(&self.observed)
    }

    /// Clean hidden columns, `n_samples × n_h`.
    pub fn clean_hidden(&self) -> DMatrix<f64> {
        let n_z = self.n_z();
        self.clean_full.columns(n_z, self.n_y() - n_z).into_owned()
    }
}

/// Integrates the model from `y0`, discards `spinup_steps` transient samples,
/// and keeps the next `n_samples` rows.
pub fn generate_dataset(
    model: &dyn PhysicsModel,
    y0: &[f64],
    dt: f64,
    n_samples: usize,
    spinup_steps: usize,
) -> Result<Dataset> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_samples must be at least 2, got {n_samples}"
        )));
    }
    let traj = euler_integrate(model, y0, dt, spinup_steps + n_samples - 1)?;
    let clean_full = traj.rows(spinup_steps, n_samples).into_owned();
    let observed = clean_full.columns(0, model.observed_dim()).into_owned();
    Ok(Dataset {
        dt,
        clean_full,
        observed,
        observed_noisy: None,
        snr_db: None,
        seed: 0,
    })
}

/// Adds i.i.d. zero-mean Gaussian noise to each observed channel at the
/// requested per-channel SNR.
///
/// Channel signal power is the mean square of the raw (not mean-subtracted)
/// samples; the noise variance is `P_i / 10^(snr_db/10)`. Deterministic in
/// `seed`; clean fields are untouched.
pub fn add_noise(dataset: &Dataset, snr_db: f64, seed: u64) -> Result<Dataset> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "snr_db must be finite, got {snr_db}"
        )));
    }
    let n_t = dataset.n_samples();
    let n_z = dataset.n_z();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = dataset.observed.clone();
    let power_ratio = 10f64.powf(snr_db / 10.0);
    for ch in 0..n_z {
        let power: f64 = dataset
            .observed
            .column(ch)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            / n_t as f64;
        let std = (power / power_ratio).sqrt();
        let normal = Normal::new(0.0, std)
            .map_err(|e| Error::Numeric(format!("noise distribution: {e}")))?;
        for n in 0..n_t {
            noisy[(n, ch)] += normal.sample(&mut rng);
        }
    }
    Ok(Dataset {
        dt: dataset.dt,
        clean_full: dataset.clean_full.clone(),
        observed: dataset.observed.clone(),
        observed_noisy: Some(noisy),
        snr_db: Some(snr_db),
        seed,
    })
}

/// Writes the dataset CSV.
///
/// Line 1 is a `#`-prefixed header recording dt, sample count, dimensions,
/// SNR, and seed; line 2 holds column names; then one row per sample with
/// time, clean full state, and the measured observed columns. Floats are
/// serialized with Rust's shortest round-trip formatting, so a load
/// reconstructs the exact binary values.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let n_t = dataset.n_samples();
    let n_y = dataset.n_y();
    let n_z = dataset.n_z();
    let snr = match dataset.snr_db {
        Some(v) => v.to_string(),
        None => "none".to_string(),
    };
    let mut out = String::new();
    writeln!(
        out,
        "# dt={} n={} ny={} nz={} snr_db={} seed={}",
        dataset.dt, n_t, n_y, n_z, snr, dataset.seed
    )
    .unwrap();
    out.push('t');
    for j in 0..n_y {
        write!(out, ",phi{}", j + 1).unwrap();
    }
    for j in 0..n_z {
        write!(out, ",phi{}_meas", j + 1).unwrap();
    }
    out.push('\n');
    let measured = dataset.measured();
    for n in 0..n_t {
        write!(out, "{}", n as f64 * dataset.dt).unwrap();
        for j in 0..n_y {
            write!(out, ",{}", dataset.clean_full[(n, j)]).unwrap();
        }
        for j in 0..n_z {
            write!(out, ",{}", measured[(n, j)]).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a dataset CSV written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(path, 1, "empty file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| format_err(path, 1, "header line must start with '#'"))?;
    let mut dt = None;
    let mut n = None;
    let mut ny = None;
    let mut nz = None;
    let mut snr_db = None;
    let mut seed = None;
    for field in header.split_whitespace() {
        let (key, val) = field
            .split_once('=')
            .ok_or_else(|| format_err(path, 1, format!("malformed header field '{field}'")))?;
        let bad = |k: &str| format_err(path, 1, format!("invalid value for '{k}': '{val}'"));
        match key {
            "dt" => dt = Some(val.parse::<f64>().map_err(|_| bad(key))?),
            "n" => n = Some(val.parse::<usize>().map_err(|_| bad(key))?),
            "ny" => ny = Some(val.parse::<usize>().map_err(|_| bad(key))?),
            "nz" => nz = Some(val.parse::<usize>().map_err(|_| bad(key))?),
            "snr_db" => {
                snr_db = if val == "none" {
                    Some(None)
                } else {
                    Some(Some(val.parse::<f64>().map_err(|_| bad(key))?))
                }
            }
            "seed" => seed = Some(val.parse::<u64>().map_err(|_| bad(key))?),
            other => return Err(format_err(path, 1, format!("unknown header key '{other}'"))),
        }
    }
    let dt = dt.ok_or_else(|| format_err(path, 1, "header missing 'dt'"))?;
    let n_t = n.ok_or_else(|| format_err(path, 1, "header missing 'n'"))?;
    let n_y = ny.ok_or_else(|| format_err(path, 1, "header missing 'ny'"))?;
    let n_z = nz.ok_or_else(|| format_err(path, 1, "header missing 'nz'"))?;
    let snr_db = snr_db.ok_or_else(|| format_err(path, 1, "header missing 'snr_db'"))?;
    let seed = seed.ok_or_else(|| format_err(path, 1, "header missing 'seed'"))?;
    if n_z > n_y {
        return Err(format_err(path, 1, format!("nz={n_z} exceeds ny={n_y}")));
    }

    let expect_cols = 1 + n_y + n_z;
    let (_, names) = lines
        .next()
        .ok_or_else(|| format_err(path, 2, "missing column-name line"))?;
    let name_count = names.split(',').count();
    if name_count != expect_cols {
        return Err(format_err(
            path,
            2,
            format!("expected {expect_cols} column names, found {name_count}"),
        ));
    }

    let mut clean_full = DMatrix::zeros(n_t, n_y);
    let mut measured = DMatrix::zeros(n_t, n_z);
    let mut row = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if row >= n_t {
            return Err(format_err(
                path,
                line_no,
                format!("more than the {n_t} data rows declared in the header"),
            ));
        }
        let mut cells = 0usize;
        for (c, cell) in line.split(',').enumerate() {
            cells += 1;
            if c == 0 {
                continue; // time column is redundant with row index × dt
            }
            if c >= expect_cols {
                continue; // counted, reported below
            }
            let v: f64 = cell.parse().map_err(|_| {
                format_err(
                    path,
                    line_no,
                    format!("non-numeric cell '{cell}' in column {}", c + 1),
                )
            })?;
            if c <= n_y {
                clean_full[(row, c - 1)] = v;
            } else {
                measured[(row, c - 1 - n_y)] = v;
            }
        }
        if cells != expect_cols {
            return Err(format_err(
                path,
                line_no,
                format!("expected {expect_cols} columns, found {cells}"),
            ));
        }
        row += 1;
    }
    if row != n_t {
        return Err(format_err(
            path,
            row + 2,
            format!("header declares {n_t} rows, file has {row}"),
        ));
    }

    let observed = clean_full.columns(0, n_z).into_owned();
    let observed_noisy = if snr_db.is_some() {
        Some(measured)
    } else {
        None
    };
    Ok(Dataset {
        dt,
        clean_full,
        observed,
        observed_noisy,
        snr_db,
        seed,
    })
}
