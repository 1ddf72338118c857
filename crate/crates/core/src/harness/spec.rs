use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::mackey_glass::{IntegratorConfig, MackeyGlassParams};
use crate::runner::ModelKind;
use crate::series::SplitSpec;

pub const DEFAULT_SEED_COUNT: u64 = 15;
pub const DEFAULT_SWEEP_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub tau: f64,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
}

impl DatasetSpec {
    pub fn params(&self) -> MackeyGlassParams {
        MackeyGlassParams::standard(self.tau)
    }

    /// Series tag, also the dataset column of every result row.
    pub fn tag(&self) -> String {
        format!("mg_tau{}", self.tau)
    }
}

/// An experiment file. Every field of a model entry may be a list, which
/// makes it a sweep axis; the entry expands to the cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub models: Vec<Value>,
    /// Shorthand for a single-entry `models`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_baseline")]
    pub baseline: String,
    #[serde(default = "default_cap")]
    pub sweep_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_baseline() -> String {
    "esn".into()
}

fn default_cap() -> usize {
    DEFAULT_SWEEP_CAP
}

impl ExperimentSpec {
    pub fn new(dataset: DatasetSpec, models: Vec<Value>) -> Self {
        Self {
            name: String::new(),
            dataset,
            models,
            model: None,
            seeds: None,
            seed_base: 0,
            baseline: default_baseline(),
            sweep_cap: DEFAULT_SWEEP_CAP,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::SpecInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::SpecInvalid(format!("cannot read spec {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::SpecInvalid(format!("{}: {e}", path.display())))
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..DEFAULT_SEED_COUNT)
                .map(|i| self.seed_base.wrapping_add(i))
                .collect(),
        }
    }

    fn entries(&self) -> impl Iterator<Item = &Value> {
        self.model.iter().chain(&self.models)
    }

    /// True when some model entry has a list-valued field.
    pub fn has_axes(&self) -> bool {
        self.entries().any(|e| !axes(e, "").is_empty())
    }

    /// Every config point in expansion order, validated.
    pub fn expand(&self) -> Result<Vec<ModelKind>> {
        if self.seeds().is_empty() {
            return Err(Error::SpecInvalid("at least one seed is required".into()));
        }
        if !(self.dataset.tau > 0.0 && self.dataset.tau.is_finite()) {
            return Err(Error::SpecInvalid("dataset.tau must be positive".into()));
        }
        let mut count: usize = 0;
        for entry in self.entries() {
            let n = axes(entry, "")
                .iter()
                .try_fold(1usize, |acc, (_, vals)| acc.checked_mul(vals.len()))
                .unwrap_or(usize::MAX);
            count = count.saturating_add(n);
        }
        if count > self.sweep_cap {
            return Err(Error::SpecInvalid(format!(
                "sweep has {count} config points, over the cap of {}",
                self.sweep_cap
            )));
        }
        let mut out = Vec::with_capacity(count);
        for entry in self.entries() {
            for v in expand_value(entry)? {
                let kind: ModelKind = serde_json::from_value(v.clone())
                    .map_err(|e| Error::SpecInvalid(format!("model {v}: {e}")))?;
                kind.validate()
                    .map_err(|e| Error::SpecInvalid(format!("model {v}: {e}")))?;
                out.push(kind);
            }
        }
        Ok(out)
    }
}

/// `(path, values)` of every list-valued field, depth first in key order.
fn axes(v: &Value, prefix: &str) -> Vec<(String, Vec<Value>)> {
    let mut out = Vec::new();
    if let Value::Object(map) = v {
        for (k, child) in map {
            let path = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            match child {
                Value::Array(items) => out.push((path, items.clone())),
                Value::Object(_) => out.extend(axes(child, &path)),
                _ => {}
            }
        }
    }
    out
}

fn set_path(v: &mut Value, path: &str, x: Value) {
    let mut cur = v;
    for key in path.split('.') {
        cur = cur
            .as_object_mut()
            .and_then(|m: &mut Map<String, Value>| m.get_mut(key))
            .expect("axis path exists");
    }
    *cur = x;
}

/// Cartesian product over the axes; the last axis varies fastest.
fn expand_value(entry: &Value) -> Result<Vec<Value>> {
    if !entry.is_object() {
        return Err(Error::SpecInvalid(format!(
            "model entry must be an object: {entry}"
        )));
    }
    let axes = axes(entry, "");
    if let Some((path, _)) = axes.iter().find(|(_, vals)| vals.is_empty()) {
        return Err(Error::SpecInvalid(format!("sweep axis {path} is empty")));
    }
    let mut points = vec![entry.clone()];
    for (path, vals) in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |x| {
                    let mut q = p.clone();
                    set_path(&mut q, path, x.clone());
                    q
                })
            })
            .collect();
    }
    Ok(points)
}
