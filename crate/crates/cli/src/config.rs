//! Layered configuration: built-in defaults, then a JSON file, then flags.
//! Every leaf key of the result records which layer set it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use mfmgcn::data::SplitScheme;
use mfmgcn::eval::MetricSpace;
use mfmgcn::graphs::{DynamicGraphConfig, GraphSlot, LearnableGraphConfig};
use mfmgcn::model::{default_blocks, ModelConfig, StBlockConfig, TrainConfig};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Default,
    File,
    Flag,
}

pub struct Resolved<T> {
    pub value: T,
    pub json: Value,
    pub sources: BTreeMap<String, Source>,
}

pub fn read_config_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {} is not valid JSON: {e}", path.display())))?;
    if !v.is_object() {
        return Err(CliError::Validation(format!("config {} must be a JSON object", path.display())));
    }
    Ok(v)
}

fn mark(v: &Value, prefix: &str, src: Source, out: &mut BTreeMap<String, Source>) {
    match v {
        Value::Object(m) if !m.is_empty() => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                mark(x, &key, src, out);
            }
        }
        _ => {
            out.retain(|k, _| k != prefix && !k.starts_with(&format!("{prefix}.")));
            out.insert(prefix.to_string(), src);
        }
    }
}

/// Overlays `top` onto `base`. Objects merge key by key; anything else
/// replaces. Keys absent from `base` are rejected.
fn overlay(base: &mut Value, top: &Value, prefix: &str, src: Source, sources: &mut BTreeMap<String, Source>) -> Result<(), CliError> {
    match (base, top) {
        // A one-key object is an enum variant; a different variant replaces it.
        (Value::Object(b), Value::Object(t)) if b.len() == 1 && t.len() == 1 && b.keys().ne(t.keys()) => {
            *b = t.clone();
            sources.retain(|k, _| !k.starts_with(&format!("{prefix}.")));
            mark(top, prefix, src, sources);
        }
        (Value::Object(b), Value::Object(t)) => {
            for (k, tv) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                let Some(bv) = b.get_mut(k) else {
                    return Err(CliError::Validation(format!("unknown config key {key:?}")));
                };
                overlay(bv, tv, &key, src, sources)?;
            }
        }
        (b, t) => {
            *b = t.clone();
            mark(t, prefix, src, sources);
        }
    }
    Ok(())
}

/// Merges a dotted-key flag map into a nested object.
pub fn flags_to_value(flags: &[(&str, Value)]) -> Value {
    let mut root = Map::new();
    for (path, v) in flags {
        let mut cur = &mut root;
        let parts: Vec<&str> = path.split('.').collect();
        for p in &parts[..parts.len() - 1] {
            cur = cur
                .entry(p.to_string())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("flag paths do not collide");
        }
        cur.insert(parts[parts.len() - 1].to_string(), v.clone());
    }
    Value::Object(root)
}

pub fn resolve<T: Serialize + DeserializeOwned>(
    default: &T,
    file: Option<&Value>,
    flags: &[(&str, Value)],
) -> Result<Resolved<T>, CliError> {
    let mut json = serde_json::to_value(default).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut sources = BTreeMap::new();
    mark(&json, "", Source::Default, &mut sources);
    if let Some(f) = file {
        overlay(&mut json, f, "", Source::File, &mut sources)?;
    }
    overlay(&mut json, &flags_to_value(flags), "", Source::Flag, &mut sources)?;
    let value = serde_json::from_value(json.clone())
        .map_err(|e| CliError::Validation(format!("invalid configuration: {e}")))?;
    Ok(Resolved { value, json, sources })
}

/// Everything `train`, `eval` and `ablate` need beyond the input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Forecast target; always input channel 0.
    pub factor: String,
    /// Extra input factors after the target.
    pub inputs: Vec<String>,
    pub w_in: usize,
    pub w_out: usize,
    pub split: SplitScheme,
    /// Empty means the default stack sized for the input channels.
    pub blocks: Vec<StBlockConfig>,
    pub graphs: Vec<GraphSlot>,
    pub learnable: LearnableGraphConfig,
    pub dynamic: DynamicGraphConfig,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub space: MetricSpace,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            factor: "t".into(),
            inputs: Vec::new(),
            w_in: 12,
            w_out: 12,
            split: SplitScheme::default(),
            blocks: Vec::new(),
            graphs: GraphSlot::ALL.to_vec(),
            learnable: LearnableGraphConfig::default(),
            dynamic: DynamicGraphConfig::default(),
            seed: 0,
            seeds: vec![1, 2, 3],
            space: MetricSpace::Normalized,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn factor_list(&self) -> Vec<&str> {
        std::iter::once(self.factor.as_str())
            .chain(self.inputs.iter().map(String::as_str))
            .collect()
    }

    pub fn model_config(&self, n_nodes: usize) -> ModelConfig {
        let d = 1 + self.inputs.len();
        ModelConfig {
            n_nodes,
            w_in: self.w_in,
            w_out: self.w_out,
            n_features: d,
            blocks: if self.blocks.is_empty() { default_blocks(d) } else { self.blocks.clone() },
            graphs: self.graphs.clone(),
            learnable: self.learnable,
            dynamic: self.dynamic,
            seed: self.seed,
        }
    }
}

pub fn parse_list<T, E: std::fmt::Display>(s: &str, f: impl Fn(&str) -> Result<T, E>) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| f(x).map_err(|e| CliError::Validation(format!("bad list item {x:?}: {e}"))))
        .collect()
}

pub fn parse_ratio(s: &str) -> Result<SplitScheme, CliError> {
    let parts = parse_list(s.replace(':', ",").as_str(), str::parse::<u32>)?;
    let arr: [u32; 3] = parts
        .try_into()
        .map_err(|_| CliError::Validation(format!("split ratio {s:?} needs three parts like 3:1:2")))?;
    Ok(SplitScheme::Ratio(arr))
}
