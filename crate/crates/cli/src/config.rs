//! Experiment configuration: a TOML file with one section per concern,
//! layered over a named preset.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use homodyne_core::CatState;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// n = 5·10⁵, 5 replicates, 101² grid.
    Desk,
    /// n = 16·10⁶, 10 replicates, 201² grid, β ∈ {0.05, 0.1}.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PathChoice {
    Fast,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub alpha1: f64,
    pub alpha2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub eta: f64,
    pub betas: Vec<f64>,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Nodes per axis, odd.
    pub size: usize,
    /// Half-width of the grid; defaults to the truncation radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub output: PathBuf,
    pub method: PathChoice,
    /// 0 uses every available core.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
    /// Second efficiency swept for comparison.
    pub compare_eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub state: StateSection,
    pub experiment: ExperimentSection,
    pub grid: GridSection,
    pub run: RunSection,
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        let paper = Self {
            state: StateSection {
                alpha1: 3.0 / 2f64.sqrt(),
                alpha2: 0.0,
            },
            experiment: ExperimentSection {
                eta: 0.45,
                betas: vec![0.05, 0.1],
                n: 16_000_000,
                replicates: 10,
                seed: 2016,
            },
            grid: GridSection {
                size: 201,
                extent: None,
            },
            run: RunSection {
                output: PathBuf::from("homodyne-out"),
                method: PathChoice::Fast,
                workers: 0,
            },
            sweep: SweepSection {
                beta_min: 0.02,
                beta_max: 0.24,
                points: 20,
                compare_eta: 0.95,
            },
        };
        match p {
            Preset::Paper => paper,
            Preset::Desk => Self {
                experiment: ExperimentSection {
                    betas: vec![0.1],
                    n: 500_000,
                    replicates: 5,
                    ..paper.experiment.clone()
                },
                grid: GridSection {
                    size: 101,
                    extent: None,
                },
                ..paper
            },
        }
    }

    /// Preset, overlaid with the file at `path` if given.
    pub fn load(preset: Preset, path: Option<&Path>) -> CliResult<Self> {
        let base = Self::preset(preset);
        let Some(path) = path else {
            return Ok(base);
        };
        let source = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_str_over(base, &source, &path.display().to_string())
    }

    pub fn from_str_over(base: Self, source: &str, name: &str) -> CliResult<Self> {
        let overlay: toml::Table = source
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{name}: {e}")))?;
        let mut merged = toml::Table::try_from(&base)
            .map_err(|e| CliError::Config(format!("preset does not serialize: {e}")))?;
        merge(&mut merged, overlay);
        let cfg: Self = serde_path_to_error::deserialize(toml::Value::Table(merged)).map_err(|e| {
            let key = e.path().to_string();
            let msg = e.inner().message().trim().to_string();
            match locate(source, &key) {
                Some(line) => CliError::Config(format!("{name}:{line}: {key}: {msg}")),
                None => CliError::Config(format!("{name}: {key}: {msg}")),
            }
        })?;
        cfg.validate().map_err(|(key, msg)| match locate(source, key) {
            Some(line) => CliError::Config(format!("{name}:{line}: {key}: {msg}")),
            None => CliError::Config(format!("{key}: {msg}")),
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Range checks; on failure returns the offending key and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let s = &self.state;
        if !s.alpha1.is_finite() {
            return Err(("state.alpha1", "must be finite".into()));
        }
        if !s.alpha2.is_finite() {
            return Err(("state.alpha2", "must be finite".into()));
        }
        let e = &self.experiment;
        if !(e.eta > 0.0 && e.eta <= 1.0) {
            return Err(("experiment.eta", format!("{} outside (0, 1]", e.eta)));
        }
        if e.betas.is_empty() {
            return Err(("experiment.betas", "needs at least one value".into()));
        }
        if let Some(b) = e.betas.iter().find(|b| !(**b > 0.0 && **b < 0.25)) {
            return Err(("experiment.betas", format!("{b} outside (0, 1/4)")));
        }
        if e.n < 2 {
            return Err(("experiment.n", format!("{} is below 2", e.n)));
        }
        if e.replicates == 0 {
            return Err(("experiment.replicates", "must be at least 1".into()));
        }
        let g = &self.grid;
        if g.size < 3 || g.size % 2 == 0 {
            return Err(("grid.size", format!("{} must be odd and at least 3", g.size)));
        }
        if let Some(x) = g.extent {
            if !(x > 0.0 && x.is_finite()) {
                return Err(("grid.extent", format!("{x} must be positive")));
            }
        }
        let w = &self.sweep;
        if !(w.beta_min > 0.0 && w.beta_min <= w.beta_max && w.beta_max < 0.25) {
            return Err((
                "sweep.beta_min",
                format!("range [{}, {}] must lie inside (0, 1/4)", w.beta_min, w.beta_max),
            ));
        }
        if w.points == 0 {
            return Err(("sweep.points", "must be at least 1".into()));
        }
        if !(w.compare_eta > 0.0 && w.compare_eta < 1.0) {
            return Err(("sweep.compare_eta", format!("{} outside (0, 1)", w.compare_eta)));
        }
        Ok(())
    }

    pub fn state(&self) -> CatState {
        CatState::new(self.state.alpha1, self.state.alpha2)
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// 1-based line of `section.key` in a TOML source.
pub fn locate(source: &str, path: &str) -> Option<usize> {
    let (section, key) = path.split_once('.')?;
    let key = key.split('.').next()?;
    let mut current = String::new();
    for (k, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((lhs, _)) = t.split_once('=') {
                if lhs.trim() == key {
                    return Some(k + 1);
                }
            }
        }
    }
    None
}
