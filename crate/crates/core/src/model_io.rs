//! Text persistence for trained models and training traces.
//!
//! The model file starts with `key=value` header lines covering the
//! reservoir and training configuration plus dimensions, followed by the
//! sections `W_IN` and `W` (sparse `row,col,value` triplets) and `W_OUT`
//! (dense comma-separated rows). Each section ends with a blank line.
//! Floats use shortest round-trip formatting, so loading is lossless.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::reservoir::{Reservoir, ReservoirConfig};
use crate::training::{Readout, TraceRow, TrainConfig};

/// A reservoir plus its trained readout and the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub reservoir: Reservoir,
    pub readout: Readout,
    pub train_config: TrainConfig,
}

fn triplet_section(out: &mut String, label: &str, m: &DMatrix<f64>) {
    out.push_str(label);
    out.push('\n');
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(out, "{i},{j},{v}").unwrap();
            }
        }
    }
    out.push('\n');
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let rc = &model.reservoir.config;
    let tc = &model.train_config;
    let mut out = String::new();
    writeln!(out, "n_units={}", rc.n_units).unwrap();
    writeln!(out, "input_dim={}", rc.input_dim).unwrap();
    writeln!(out, "sigma_in={}", rc.sigma_in).unwrap();
    writeln!(out, "spectral_radius={}", rc.spectral_radius).unwrap();
    writeln!(out, "avg_degree={}", rc.avg_degree).unwrap();
    writeln!(out, "reservoir_seed={}", rc.seed).unwrap();
    writeln!(out, "gamma={}", tc.gamma).unwrap();
    writeln!(out, "learning_rate={}", tc.learning_rate).unwrap();
    writeln!(out, "adam_beta1={}", tc.adam_beta1).unwrap();
    writeln!(out, "adam_beta2={}", tc.adam_beta2).unwrap();
    writeln!(out, "adam_epsilon={}", tc.adam_epsilon).unwrap();
    writeln!(out, "max_steps={}", tc.max_steps).unwrap();
    writeln!(out, "plateau_window={}", tc.plateau_window).unwrap();
    writeln!(out, "plateau_rel_tol={}", tc.plateau_rel_tol).unwrap();
    writeln!(out, "washout={}", tc.washout).unwrap();
    writeln!(out, "hidden_init_scale={}", tc.hidden_init_scale).unwrap();
    writeln!(out, "train_seed={}", tc.seed).unwrap();
    writeln!(out, "n_y={}", model.readout.n_y()).unwrap();
    writeln!(out, "n_z={}", model.readout.n_z).unwrap();
    out.push('\n');

    triplet_section(&mut out, "W_IN", &model.reservoir.w_in);
    triplet_section(&mut out, "W", &model.reservoir.w);

    out.push_str("W_OUT\n");
    let w = &model.readout.w_out;
    for i in 0..w.nrows() {
        let row: Vec<String> = (0..w.ncols()).map(|j| w[(i, j)].to_string()).collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out.push('\n');

    std::fs::write(path, out)?;
    Ok(())
}

fn ferr(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_header<'a>(
    path: &Path,
    lines: &mut std::iter::Peekable<impl Iterator<Item = (usize, &'a str)>>,
) -> Result<HashMap<String, String>> {
    let mut header = HashMap::new();
    while let Some((idx, line)) = lines.peek().copied() {
        if line.trim().is_empty() {
            lines.next();
            break;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| ferr(path, idx + 1, format!("expected key=value, got '{line}'")))?;
        header.insert(key.trim().to_string(), val.trim().to_string());
        lines.next();
    }
    Ok(header)
}

fn get<T: std::str::FromStr>(
    path: &Path,
    header: &HashMap<String, String>,
    key: &str,
) -> Result<T> {
    let raw = header
        .get(key)
        .ok_or_else(|| ferr(path, 1, format!("header missing '{key}'")))?;
    raw.parse()
        .map_err(|_| ferr(path, 1, format!("invalid value for '{key}': '{raw}'")))
}

fn read_triplets<'a>(
    path: &Path,
    lines: &mut std::iter::Peekable<impl Iterator<Item = (usize, &'a str)>>,
    label: &str,
    rows: usize,
    cols: usize,
) -> Result<DMatrix<f64>> {
    let (idx, line) = lines
        .next()
        .ok_or_else(|| ferr(path, 0, format!("missing section '{label}'")))?;
    if line.trim() != label {
        return Err(ferr(
            path,
            idx + 1,
            format!("expected section '{label}', got '{line}'"),
        ));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (idx, line) in lines.by_ref() {
        if line.trim().is_empty() {
            return Ok(m);
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(ferr(path, idx + 1, "triplet rows need exactly 3 fields"));
        }
        let i: usize = parts[0]
            .parse()
            .map_err(|_| ferr(path, idx + 1, format!("bad row index '{}'", parts[0])))?;
        let j: usize = parts[1]
            .parse()
            .map_err(|_| ferr(path, idx + 1, format!("bad column index '{}'", parts[1])))?;
        let v: f64 = parts[2]
            .parse()
            .map_err(|_| ferr(path, idx + 1, format!("bad value '{}'", parts[2])))?;
        if i >= rows || j >= cols {
            return Err(ferr(
                path,
                idx + 1,
                format!("index ({i},{j}) outside {rows}×{cols} section '{label}'"),
            ));
        }
        m[(i, j)] = v;
    }
    Err(ferr(
        path,
        0,
        format!("section '{label}' not terminated by a blank line"),
    ))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().peekable();
    let header = parse_header(path, &mut lines)?;

    let config = ReservoirConfig {
        n_units: get(path, &header, "n_units")?,
        input_dim: get(path, &header, "input_dim")?,
        sigma_in: get(path, &header, "sigma_in")?,
        spectral_radius: get(path, &header, "spectral_radius")?,
        avg_degree: get(path, &header, "avg_degree")?,
        seed: get(path, &header, "reservoir_seed")?,
    };
    let train_config = TrainConfig {
        gamma: get(path, &header, "gamma")?,
        learning_rate: get(path, &header, "learning_rate")?,
        adam_beta1: get(path, &header, "adam_beta1")?,
        adam_beta2: get(path, &header, "adam_beta2")?,
        adam_epsilon: get(path, &header, "adam_epsilon")?,
        max_steps: get(path, &header, "max_steps")?,
        plateau_window: get(path, &header, "plateau_window")?,
        plateau_rel_tol: get(path, &header, "plateau_rel_tol")?,
        washout: get(path, &header, "washout")?,
        hidden_init_scale: get(path, &header, "hidden_init_scale")?,
        seed: get(path, &header, "train_seed")?,
    };
    let n_y: usize = get(path, &header, "n_y")?;
    let n_z: usize = get(path, &header, "n_z")?;

    let w_in = read_triplets(
        path,
        &mut lines,
        "W_IN",
        config.n_units,
        config.input_dim + 1,
    )?;
    let w = read_triplets(path, &mut lines, "W", config.n_units, config.n_units)?;

    let (idx, line) = lines
        .next()
        .ok_or_else(|| ferr(path, 0, "missing section 'W_OUT'"))?;
    if line.trim() != "W_OUT" {
        return Err(ferr(
            path,
            idx + 1,
            format!("expected section 'W_OUT', got '{line}'"),
        ));
    }
    let f = config.n_units + config.input_dim + 1;
    let mut w_out = DMatrix::zeros(n_y, f);
    let mut row = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            break;
        }
        if row >= n_y {
            return Err(ferr(
                path,
                idx + 1,
                format!("W_OUT has more than {n_y} rows"),
            ));
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != f {
            return Err(ferr(
                path,
                idx + 1,
                format!("W_OUT row has {} values, expected {f}", cells.len()),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            w_out[(row, j)] = cell
                .parse()
                .map_err(|_| ferr(path, idx + 1, format!("bad value '{cell}'")))?;
        }
        row += 1;
    }
    if row != n_y {
        return Err(ferr(
            path,
            0,
            format!("W_OUT has {row} rows, expected {n_y}"),
        ));
    }

    Ok(TrainedModel {
        reservoir: Reservoir { w_in, w, config },
        readout: Readout { w_out, n_z },
        train_config,
    })
}

/// Trace CSV: `step,e_d,e_p,e_tot`, one row per sampled step.
pub fn save_trace(trace: &[TraceRow], path: &Path) -> Result<()> {
    let mut out = String::from("step,e_d,e_p,e_tot\n");
    for row in trace {
        writeln!(out, "{},{},{},{}", row.step, row.e_d, row.e_p, row.e_tot).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn model_roundtrip_is_lossless() {
        let reservoir = Reservoir::build(ReservoirConfig::new(12, 2, 77)).unwrap();
        let mut w_out = DMatrix::zeros(3, 15);
        for (k, v) in w_out.iter_mut().enumerate() {
            *v = (k as f64 * 0.7182818).sin() / 3.0;
        }
        let model = TrainedModel {
            reservoir,
            readout: Readout { w_out, n_z: 2 },
            train_config: TrainConfig::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn truncated_model_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        std::fs::write(&path, "n_units=4\n").unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn trace_file_layout() {
        let rows = vec![
            TraceRow {
                step: 0,
                e_d: 1.5,
                e_p: 2.5,
                e_tot: 4.0,
            },
            TraceRow {
                step: 100,
                e_d: 0.5,
                e_p: 0.25,
                e_tot: 0.75,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        save_trace(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "step,e_d,e_p,e_tot\n0,1.5,2.5,4\n100,0.5,0.25,0.75\n");
    }
}
