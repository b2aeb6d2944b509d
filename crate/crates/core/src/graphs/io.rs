//! The static graph bundle and its on-disk forms.
//!
//! JSON (`.json`) stores each matrix as nested row arrays. The binary form
//! (`W2KG`, little-endian) is: magic, version `u32`, `N` as `u32`, the JSON
//! metadata block as a length-prefixed string, then per graph a slot name and
//! `N*N` `f64` values row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::adjacency::{Adjacency, GraphKind, GraphSlot};
use super::static_graphs::{
    build_distance_graph, build_neighbor_graph, build_pattern_graph, resolve_sigma,
    DistanceGraphConfig, NeighborGraphConfig, DEFAULT_PATTERN_FACTORS,
};
use crate::binfmt::{self, ReadLe, WriteLe, LE};
use crate::data::WeatherSeriesDataset;
use crate::error::{Error, Result};

pub const GRAPHS_MAGIC: &[u8; 4] = b"W2KG";
pub const GRAPHS_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphBuildConfig {
    pub distance: DistanceGraphConfig,
    pub neighbor: NeighborGraphConfig,
    pub pattern_factors: Vec<String>,
}

impl Default for GraphBuildConfig {
    fn default() -> Self {
        Self {
            distance: DistanceGraphConfig::default(),
            neighbor: NeighborGraphConfig::default(),
            pattern_factors: DEFAULT_PATTERN_FACTORS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub station_ids: Vec<String>,
    pub config: GraphBuildConfig,
    pub sigma_km: f64,
    /// Pattern factors actually present in the data.
    pub pattern_factors_used: Vec<String>,
}

/// Distance, neighbour and pattern graphs of one station set.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticGraphSet {
    pub meta: GraphMeta,
    pub distance: Adjacency,
    pub neighbor: Adjacency,
    pub pattern: Adjacency,
    pub pattern_per_factor: Vec<(String, Adjacency)>,
}

/// Builds all static graphs. Station coordinates come from `train`, whose
/// series feed the pattern graph. Requested pattern factors missing from the
/// data are skipped with a warning.
pub fn build_static_graphs(train: &WeatherSeriesDataset, cfg: &GraphBuildConfig) -> Result<StaticGraphSet> {
    let used: Vec<&str> = cfg
        .pattern_factors
        .iter()
        .map(String::as_str)
        .filter(|f| {
            let ok = train.factors.iter().any(|x| x == f);
            if !ok {
                log::warn!("pattern factor {f} not in dataset; skipped");
            }
            ok
        })
        .collect();
    if used.is_empty() {
        return Err(Error::Config(format!(
            "none of the pattern factors {:?} are in the dataset {:?}",
            cfg.pattern_factors, train.factors
        )));
    }
    let pattern = build_pattern_graph(train, &used)?;
    for (f, a) in &pattern.per_factor {
        log::info!("pattern[{f}] mean weight {:.4}", a.weights.mean().unwrap_or(0.0));
    }
    Ok(StaticGraphSet {
        meta: GraphMeta {
            station_ids: train.stations.iter().map(|s| s.station_id.clone()).collect(),
            config: cfg.clone(),
            sigma_km: resolve_sigma(&train.stations, &cfg.distance)?,
            pattern_factors_used: used.iter().map(|s| s.to_string()).collect(),
        },
        distance: build_distance_graph(&train.stations, &cfg.distance)?,
        neighbor: build_neighbor_graph(&train.stations, &cfg.neighbor)?,
        pattern: pattern.mean,
        pattern_per_factor: pattern.per_factor,
    })
}

impl StaticGraphSet {
    pub fn n(&self) -> usize {
        self.distance.n()
    }

    pub fn get(&self, slot: &GraphSlot) -> Option<&Adjacency> {
        match slot {
            GraphSlot::Distance => Some(&self.distance),
            GraphSlot::Neighbor => Some(&self.neighbor),
            GraphSlot::Pattern => Some(&self.pattern),
            GraphSlot::PatternFactor(f) => self.pattern_per_factor.iter().find(|(n, _)| n == f).map(|(_, a)| a),
            GraphSlot::Learnable | GraphSlot::Dynamic => None,
        }
    }

    /// Node relabelling consistent with [`Adjacency::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut meta = self.meta.clone();
        meta.station_ids = perm.iter().map(|&p| self.meta.station_ids[p].clone()).collect();
        Self {
            meta,
            distance: self.distance.permuted(perm),
            neighbor: self.neighbor.permuted(perm),
            pattern: self.pattern.permuted(perm),
            pattern_per_factor: self
                .pattern_per_factor
                .iter()
                .map(|(f, a)| (f.clone(), a.permuted(perm)))
                .collect(),
        }
    }

    fn named(&self) -> Vec<(String, &Adjacency)> {
        let mut v = vec![
            ("D".to_string(), &self.distance),
            ("N".to_string(), &self.neighbor),
            ("P".to_string(), &self.pattern),
        ];
        for (f, a) in &self.pattern_per_factor {
            v.push((GraphSlot::PatternFactor(f.clone()).short(), a));
        }
        v
    }

    fn from_named(meta: GraphMeta, mut mats: Vec<(String, Array2<f64>)>) -> Result<Self> {
        let mut take = |key: &str, kind| -> Result<Adjacency> {
            let i = mats
                .iter()
                .position(|(k, _)| k == key)
                .ok_or_else(|| Error::Format(format!("graph file lacks matrix {key}")))?;
            Adjacency::new(kind, mats.remove(i).1)
        };
        let distance = take("D", GraphKind::Distance)?;
        let neighbor = take("N", GraphKind::Neighbor)?;
        let pattern = take("P", GraphKind::Pattern)?;
        let mut pattern_per_factor = Vec::new();
        for (k, m) in mats {
            match GraphSlot::parse(&k)? {
                GraphSlot::PatternFactor(f) => pattern_per_factor.push((f, Adjacency::new(GraphKind::Pattern, m)?)),
                _ => return Err(Error::Format(format!("unexpected matrix {k} in graph file"))),
            }
        }
        let set = Self {
            meta,
            distance,
            neighbor,
            pattern,
            pattern_per_factor,
        };
        let n = set.meta.station_ids.len();
        if set.named().iter().any(|(_, a)| a.n() != n) {
            return Err(Error::Format(format!("graph matrices do not match {n} stations")));
        }
        Ok(set)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    meta: GraphMeta,
    matrices: Vec<NamedMatrix>,
}

#[derive(Serialize, Deserialize)]
struct NamedMatrix {
    slot: String,
    weights: Vec<Vec<f64>>,
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn save_graphs(set: &StaticGraphSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if is_json(path) {
        let doc = GraphJson {
            meta: set.meta.clone(),
            matrices: set
                .named()
                .into_iter()
                .map(|(slot, a)| NamedMatrix {
                    slot,
                    weights: a.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut w, &doc)?;
        w.write_all(b"\n")?;
    } else {
        binfmt::write_magic(&mut w, GRAPHS_MAGIC, GRAPHS_VERSION)?;
        let named = set.named();
        w.write_u32::<LE>(set.n() as u32)?;
        w.write_u32::<LE>(named.len() as u32)?;
        binfmt::write_str(&mut w, &serde_json::to_string(&set.meta)?)?;
        for (slot, a) in named {
            binfmt::write_str(&mut w, &slot)?;
            binfmt::write_f64s(&mut w, a.weights.iter().copied())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_graphs(path: &Path) -> Result<StaticGraphSet> {
    let mut r = BufReader::new(File::open(path)?);
    if is_json(path) {
        let doc: GraphJson = serde_json::from_reader(r)?;
        let n = doc.meta.station_ids.len();
        let mats = doc
            .matrices
            .into_iter()
            .map(|m| {
                if m.weights.len() != n || m.weights.iter().any(|r| r.len() != n) {
                    return Err(Error::Format(format!("matrix {} is not {n}x{n}", m.slot)));
                }
                let flat: Vec<f64> = m.weights.into_iter().flatten().collect();
                Ok((m.slot, Array2::from_shape_vec((n, n), flat).expect("checked")))
            })
            .collect::<Result<Vec<_>>>()?;
        StaticGraphSet::from_named(doc.meta, mats)
    } else {
        let version = binfmt::read_magic(&mut r, GRAPHS_MAGIC)?;
        if version != GRAPHS_VERSION {
            return Err(Error::Version(format!("graph file version {version}, expected {GRAPHS_VERSION}")));
        }
        let n = r.read_u32::<LE>()? as usize;
        let count = r.read_u32::<LE>()? as usize;
        let meta: GraphMeta = serde_json::from_str(&binfmt::read_str(&mut r)?)?;
        let mut mats = Vec::with_capacity(count);
        for _ in 0..count {
            let slot = binfmt::read_str(&mut r)?;
            let vals = binfmt::read_f64s(&mut r, n * n)?;
            mats.push((slot, Array2::from_shape_vec((n, n), vals).expect("length read")));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes in graph file", rest.len())));
        }
        StaticGraphSet::from_named(meta, mats)
    }
}
