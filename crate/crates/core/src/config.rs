//! Run configuration: a TOML document resolved into a validated [`RunConfig`].
//!
//! A document either names a preset (and may override its seed, groups,
//! phase randomization and grid) or lists its groups inline. Unknown keys
//! are rejected.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{DEFAULT_EPSILON, DEFAULT_PEAK_FLOOR, DEFAULT_SUSTAIN, DEFAULT_TAIL_START};
use crate::model::{ObservableSpec, SystemCoefficients, TimeGrid};
use crate::recurrence::DEFAULT_MAX_DENOMINATOR;
use crate::sampling::{self, AlphaMode, CouplingDistribution, CouplingKind, EnvironmentSpec, GroupSpec};

pub const DEFAULT_T_END: f64 = 100.0;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("unknown configuration key: {0}")]
    UnknownKey(String),

    #[error("invalid configuration: {0}")]
    Validation(String),
}

impl From<crate::Error> for ConfigError {
    fn from(e: crate::Error) -> Self {
        ConfigError::Validation(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub epsilon: f64,
    pub sustain: f64,
    pub peak_floor: f64,
    pub tail_start: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            sustain: DEFAULT_SUSTAIN,
            peak_floor: DEFAULT_PEAK_FLOOR,
            tail_start: DEFAULT_TAIL_START,
        }
    }
}

/// Fully resolved, validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub spec: EnvironmentSpec,
    pub system: SystemCoefficients,
    pub observable: Option<ObservableSpec>,
    pub grid: TimeGrid,
    pub metrics: MetricsConfig,
    pub max_denominator: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Configuration for a preset with every other field at its default.
    pub fn from_preset(name: &str) -> Result<Self, ConfigError> {
        parse_config(&format!("preset = \"{name}\"\n"))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.spec.validate()?;
        let m = &self.metrics;
        if !(m.epsilon > 0.0 && m.epsilon < 1.0) {
            return Err(ConfigError::Validation(format!("metrics.epsilon = {} must lie in (0, 1)", m.epsilon)));
        }
        if !(m.peak_floor > 0.0 && m.peak_floor < 1.0) {
            return Err(ConfigError::Validation(format!(
                "metrics.peak_floor = {} must lie in (0, 1)",
                m.peak_floor
            )));
        }
        if !(m.sustain.is_finite() && m.sustain >= self.grid.spacing() * (1.0 - 1e-9)) {
            return Err(ConfigError::Validation(format!(
                "metrics.sustain = {} must be at least the grid spacing {}",
                m.sustain,
                self.grid.spacing()
            )));
        }
        if !(m.tail_start >= self.grid.t_start() && m.tail_start <= self.grid.t_end()) {
            return Err(ConfigError::Validation(format!(
                "metrics.tail_start = {} lies outside the grid [{}, {}]",
                m.tail_start,
                self.grid.t_start(),
                self.grid.t_end()
            )));
        }
        if self.max_denominator == 0 {
            return Err(ConfigError::Validation("max_denominator must be >= 1".into()));
        }
        Ok(())
    }
}

// ---- document schema ------------------------------------------------------

/// Seeds above `i64::MAX` do not fit a TOML integer and are written as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedValue {
    Int(i64),
    Text(String),
}

impl SeedValue {
    fn from_u64(seed: u64) -> Self {
        i64::try_from(seed).map_or_else(|_| SeedValue::Text(seed.to_string()), SeedValue::Int)
    }

    fn resolve(&self) -> Result<u64, ConfigError> {
        match self {
            SeedValue::Int(v) => u64::try_from(*v).map_err(|_| ConfigError::Validation(format!("seed {v} must be >= 0"))),
            SeedValue::Text(s) => s
                .parse()
                .map_err(|_| ConfigError::Validation(format!("seed `{s}` is not an unsigned 64-bit integer"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<SeedValue>,
    /// Declared particle count, checked against the group sum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub randomize_phases: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_denominator: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<GroupDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub count: usize,
    pub coupling: CouplingDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingDoc {
    pub kind: CouplingKind,
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaModeDoc {
    RandomUniform,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaDoc {
    pub mode: AlphaModeDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// Complex numbers are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableDoc {
    pub s_uu: [f64; 2],
    pub s_ud: [f64; 2],
    pub s_du: [f64; 2],
    pub s_dd: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sustain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_start: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

fn complex(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

pub fn parse_document(text: &str) -> Result<ConfigDocument, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        if message.contains("unknown field") {
            return ConfigError::UnknownKey(message);
        }
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Syntax { line, column, message }
    })
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    resolve(&parse_document(text)?).map(|(c, _)| c)
}

/// Like [`parse_config`], also returning the preset fields the document overrode.
pub fn parse_config_with_overrides(text: &str) -> Result<(RunConfig, Vec<String>), ConfigError> {
    resolve(&parse_document(text)?)
}

fn group_from_doc(j: usize, g: &GroupDoc) -> Result<GroupSpec, ConfigError> {
    let half_width = g.coupling.half_width.unwrap_or(0.0);
    let coupling = CouplingDistribution {
        kind: g.coupling.kind,
        mean: g.coupling.mean,
        half_width,
    };
    let alpha = match &g.alpha {
        None => AlphaMode::RandomUniform,
        Some(AlphaDoc { mode: AlphaModeDoc::RandomUniform, value: None }) => AlphaMode::RandomUniform,
        Some(AlphaDoc { mode: AlphaModeDoc::RandomUniform, value: Some(_) }) => {
            return Err(ConfigError::Validation(format!("group {}: random-uniform alpha takes no value", j + 1)))
        }
        Some(AlphaDoc { mode: AlphaModeDoc::Fixed, value: Some(v) }) => AlphaMode::Fixed(*v),
        Some(AlphaDoc { mode: AlphaModeDoc::Fixed, value: None }) => {
            return Err(ConfigError::Validation(format!("group {}: fixed alpha needs a value", j + 1)))
        }
    };
    Ok(GroupSpec {
        label: g.label.clone().unwrap_or_else(|| format!("kind-{}", j + 1)),
        count: g.count,
        coupling,
        alpha,
    })
}

/// Resolve a document into a config and the list of overridden preset fields.
pub fn resolve(doc: &ConfigDocument) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let mut overrides = Vec::new();
    let preset = doc.preset.as_deref().map(sampling::preset).transpose()?;

    let groups = match (&doc.groups, &preset) {
        (Some(gs), p) => {
            if p.is_some() {
                overrides.push("groups".to_string());
            }
            gs.iter().enumerate().map(|(j, g)| group_from_doc(j, g)).collect::<Result<Vec<_>, _>>()?
        }
        (None, Some(p)) => p.spec.groups.clone(),
        (None, None) => {
            return Err(ConfigError::Validation(
                "configuration needs either `preset` or a `groups` list".into(),
            ))
        }
    };
    let seed = match (&doc.seed, &preset) {
        (Some(s), p) => {
            if p.is_some() {
                overrides.push("seed".to_string());
            }
            s.resolve()?
        }
        (None, Some(p)) => p.spec.seed,
        (None, None) => 0,
    };
    let randomize_phases = match doc.randomize_phases {
        Some(v) => {
            if preset.is_some() {
                overrides.push("randomize_phases".to_string());
            }
            v
        }
        None => false,
    };
    let spec = EnvironmentSpec {
        groups,
        seed,
        randomize_phases,
    };
    if let Some(n) = doc.n {
        if n != spec.total_particles() {
            return Err(ConfigError::Validation(format!(
                "group counts sum to {} but n = {n}",
                spec.total_particles()
            )));
        }
    }

    let system = match &doc.system {
        Some(s) => SystemCoefficients::new(complex(s.a), complex(s.b))?,
        None => SystemCoefficients::default(),
    };
    let observable = doc
        .observable
        .as_ref()
        .map(|o| ObservableSpec::new(complex(o.s_uu), complex(o.s_ud), complex(o.s_du), complex(o.s_dd)));

    let base_grid = preset.as_ref().map(|p| p.grid);
    let gd = doc.grid.clone().unwrap_or_default();
    if preset.is_some() {
        for (key, set) in [("grid.t_start", gd.t_start.is_some()), ("grid.t_end", gd.t_end.is_some()), ("grid.samples", gd.samples.is_some())] {
            if set {
                overrides.push(key.to_string());
            }
        }
    }
    let grid = TimeGrid::new(
        gd.t_start.or(base_grid.map(|g| g.t_start())).unwrap_or(0.0),
        gd.t_end.or(base_grid.map(|g| g.t_end())).unwrap_or(DEFAULT_T_END),
        gd.samples.or(base_grid.map(|g| g.samples())).unwrap_or(DEFAULT_SAMPLES),
    )?;

    let md = doc.metrics.clone().unwrap_or_default();
    let defaults = MetricsConfig::default();
    let default_tail = if grid.t_start() <= defaults.tail_start && defaults.tail_start <= grid.t_end() {
        defaults.tail_start
    } else {
        grid.t_start()
    };
    let metrics = MetricsConfig {
        epsilon: md.epsilon.unwrap_or(defaults.epsilon),
        sustain: md.sustain.unwrap_or(defaults.sustain),
        peak_floor: md.peak_floor.unwrap_or(defaults.peak_floor),
        tail_start: md.tail_start.unwrap_or(default_tail),
    };

    let config = RunConfig {
        preset: preset.map(|p| p.name.to_string()),
        spec,
        system,
        observable,
        grid,
        metrics,
        max_denominator: doc.max_denominator.unwrap_or(DEFAULT_MAX_DENOMINATOR),
        output_dir: PathBuf::from(
            doc.output
                .as_ref()
                .and_then(|o| o.dir.clone())
                .unwrap_or_else(|| DEFAULT_OUTPUT_DIR.to_string()),
        ),
    };
    config.validate()?;
    Ok((config, overrides))
}

/// A fully explicit document describing `config`.
pub fn to_document(config: &RunConfig) -> ConfigDocument {
    let groups = config
        .spec
        .groups
        .iter()
        .map(|g| GroupDoc {
            label: Some(g.label.clone()),
            count: g.count,
            coupling: CouplingDoc {
                kind: g.coupling.kind,
                mean: g.coupling.mean,
                half_width: Some(g.coupling.half_width),
            },
            alpha: Some(match g.alpha {
                AlphaMode::RandomUniform => AlphaDoc {
                    mode: AlphaModeDoc::RandomUniform,
                    value: None,
                },
                AlphaMode::Fixed(v) => AlphaDoc {
                    mode: AlphaModeDoc::Fixed,
                    value: Some(v),
                },
            }),
        })
        .collect();
    ConfigDocument {
        preset: config.preset.clone(),
        seed: Some(SeedValue::from_u64(config.spec.seed)),
        n: Some(config.spec.total_particles()),
        randomize_phases: Some(config.spec.randomize_phases),
        max_denominator: Some(config.max_denominator),
        system: Some(SystemDoc {
            a: pair(config.system.a()),
            b: pair(config.system.b()),
        }),
        observable: config.observable.map(|o| ObservableDoc {
            s_uu: pair(o.s_uu),
            s_ud: pair(o.s_ud),
            s_du: pair(o.s_du),
            s_dd: pair(o.s_dd),
        }),
        grid: Some(GridDoc {
            t_start: Some(config.grid.t_start()),
            t_end: Some(config.grid.t_end()),
            samples: Some(config.grid.samples()),
        }),
        metrics: Some(MetricsDoc {
            epsilon: Some(config.metrics.epsilon),
            sustain: Some(config.metrics.sustain),
            peak_floor: Some(config.metrics.peak_floor),
            tail_start: Some(config.metrics.tail_start),
        }),
        output: Some(OutputDoc {
            dir: Some(config.output_dir.to_string_lossy().into_owned()),
        }),
        groups: Some(groups),
    }
}

/// Serialize `config` as a TOML document that parses back to the same config.
pub fn emit_config(config: &RunConfig) -> String {
    toml::to_string(&to_document(config)).expect("config documents always serialize")
}
