//! Experiment configuration files: `key = value` lines grouped under
//! bracketed section headers, with `--set section.key=value` overrides.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::ExperimentSpec;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| bad(format!("invalid element '{}' in '{key}'", v.trim())))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| bad(format!("invalid value '{value}' for '{key}'")))
}

/// Applies a single `section.key = value` assignment to the spec.
pub fn apply_kv(spec: &mut ExperimentSpec, section: &str, key: &str, value: &str) -> Result<()> {
    let full = format!("{section}.{key}");
    match (section, key) {
        ("experiment", "model") => spec.model_name = value.trim().to_string(),
        ("experiment", "master_seed") => spec.master_seed = parse_scalar(&full, value)?,
        ("experiment", "out_dir") => spec.out_dir = PathBuf::from(value.trim()),
        ("experiment", "threads") => spec.threads = parse_scalar(&full, value)?,
        ("dataset", "dt") => spec.dt = parse_scalar(&full, value)?,
        ("dataset", "n_samples") => spec.n_samples = parse_scalar(&full, value)?,
        ("dataset", "y0") => spec.y0 = parse_list(&full, value)?,
        ("dataset", "spinup_steps") => spec.spinup_steps = parse_scalar(&full, value)?,
        ("dataset", "snr_db") => {
            spec.snr_db_list = value
                .split(',')
                .map(|v| {
                    let v = v.trim();
                    if v == "none" {
                        Ok(None)
                    } else {
                        v.parse::<f64>()
                            .map(Some)
                            .map_err(|_| bad(format!("invalid SNR '{v}' in '{full}'")))
                    }
                })
                .collect::<Result<_>>()?
        }
        ("reservoir", "sizes") => spec.sizes = parse_list(&full, value)?,
        ("reservoir", "sigma_in") => spec.sigma_in = parse_scalar(&full, value)?,
        ("reservoir", "spectral_radius") => spec.spectral_radius = parse_scalar(&full, value)?,
        ("reservoir", "avg_degree") => spec.avg_degree = parse_scalar(&full, value)?,
        ("train", "gamma") => spec.train.gamma = parse_scalar(&full, value)?,
        ("train", "learning_rate") => spec.train.learning_rate = parse_scalar(&full, value)?,
        ("train", "adam_beta1") => spec.train.adam_beta1 = parse_scalar(&full, value)?,
        ("train", "adam_beta2") => spec.train.adam_beta2 = parse_scalar(&full, value)?,
        ("train", "adam_epsilon") => spec.train.adam_epsilon = parse_scalar(&full, value)?,
        ("train", "max_steps") => spec.train.max_steps = parse_scalar(&full, value)?,
        ("train", "plateau_window") => spec.train.plateau_window = parse_scalar(&full, value)?,
        ("train", "plateau_rel_tol") => spec.train.plateau_rel_tol = parse_scalar(&full, value)?,
        ("train", "washout") => spec.train.washout = parse_scalar(&full, value)?,
        ("train", "hidden_init_scale") => {
            spec.train.hidden_init_scale = parse_scalar(&full, value)?
        }
        _ => return Err(bad(format!("unknown configuration key '{full}'"))),
    }
    Ok(())
}

/// Parses a configuration file into an existing spec (usually the default).
pub fn apply_file(spec: &mut ExperimentSpec, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            if name == "seeds" {
                section = name.to_string(); // echo section, ignored on input
                continue;
            }
            section = name.trim().to_string();
            continue;
        }
        if section == "seeds" {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            line: idx + 1,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        apply_kv(spec, &section, key.trim(), value.trim()).map_err(|e| Error::Format {
            path: path.display().to_string(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

/// Applies `--set section.key=value` overrides.
pub fn apply_overrides(spec: &mut ExperimentSpec, sets: &[String]) -> Result<()> {
    for set in sets {
        let (path, value) = set
            .split_once('=')
            .ok_or_else(|| bad(format!("--set expects section.key=value, got '{set}'")))?;
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| bad(format!("--set key must be section.key, got '{path}'")))?;
        apply_kv(spec, section.trim(), key.trim(), value.trim())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_config_roundtrips_through_the_parser() {
        let mut spec = ExperimentSpec {
            master_seed: 42,
            sizes: vec![11, 22],
            snr_db_list: vec![None, Some(33.0)],
            ..ExperimentSpec::default()
        };
        spec.train.max_steps = 123;
        let text = spec.effective_config_text();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, text).unwrap();
        let mut back = ExperimentSpec::default();
        apply_file(&mut back, &path).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn overrides_take_effect() {
        let mut spec = ExperimentSpec::default();
        apply_overrides(
            &mut spec,
            &[
                "train.max_steps=7".into(),
                "dataset.snr_db=none,20".into(),
                "reservoir.sizes=30".into(),
            ],
        )
        .unwrap();
        assert_eq!(spec.train.max_steps, 7);
        assert_eq!(spec.snr_db_list, vec![None, Some(20.0)]);
        assert_eq!(spec.sizes, vec![30]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut spec = ExperimentSpec::default();
        assert!(apply_overrides(&mut spec, &["train.turbo=1".into()]).is_err());
        assert!(apply_overrides(&mut spec, &["no-dot".into()]).is_err());
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, "[train]\ngamma 0.1\n").unwrap();
        let mut spec = ExperimentSpec::default();
        match apply_file(&mut spec, &path) {
            Err(Error::Format { line: 2, .. }) => {}
            other => panic!("expected Format error on line 2, got {other:?}"),
        }
    }
}
