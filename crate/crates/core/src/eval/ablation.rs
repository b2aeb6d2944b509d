use serde::{Deserialize, Serialize};

use super::forecast::{evaluate, Forecaster, SplitPart};
use super::metrics::{MetricSpace, MetricsReport};
use crate::error::{Error, Result};
use crate::graphs::{build_neighbor_graph, GraphSlot, NeighborGraphConfig, StaticGraphSet};
use crate::model::{build_model, train, ForecastData, MfmgcnModel, ModelConfig, TrainConfig, TrainHistory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub name: String,
    pub graphs: Vec<GraphSlot>,
}

impl AblationSpec {
    pub fn new(graphs: &[GraphSlot]) -> Self {
        Self {
            name: graphs.iter().map(GraphSlot::short).collect::<Vec<_>>().join("+"),
            graphs: graphs.to_vec(),
        }
    }
}

/// The thirteen fusion selections: each graph alone, the distance-based
/// stack, every leave-one-out set, and all five.
pub fn fusion_grid_specs() -> Vec<AblationSpec> {
    use GraphSlot::*;
    let rows: [&[GraphSlot]; 13] = [
        &[Distance],
        &[Neighbor],
        &[Pattern],
        &[Learnable],
        &[Dynamic],
        &[Distance, Neighbor],
        &[Distance, Neighbor, Pattern],
        &[Neighbor, Pattern, Learnable, Dynamic],
        &[Distance, Pattern, Learnable, Dynamic],
        &[Distance, Neighbor, Learnable, Dynamic],
        &[Distance, Neighbor, Pattern, Dynamic],
        &[Distance, Neighbor, Pattern, Learnable],
        &[Distance, Neighbor, Pattern, Learnable, Dynamic],
    ];
    rows.iter().map(|g| AblationSpec::new(g)).collect()
}

/// The five single-graph rows plus the full fusion.
pub fn singles_and_full() -> Vec<AblationSpec> {
    let mut v: Vec<AblationSpec> = GraphSlot::ALL.iter().map(|g| AblationSpec::new(std::slice::from_ref(g))).collect();
    v.push(AblationSpec::new(&GraphSlot::ALL));
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    /// Template; `graphs` and `seed` are set per run.
    pub model: ModelConfig,
    /// Template; `seed` is set per run.
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub space: MetricSpace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub test: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub spec: AblationSpec,
    pub mean_mae: f64,
    pub mean_rmse: f64,
    pub runs: Vec<SeedRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub space: MetricSpace,
    pub target: String,
    pub rows: Vec<AblationRow>,
}

/// Builds, trains and scores one model on the test split.
pub fn train_and_evaluate(
    data: &ForecastData,
    graphs: &StaticGraphSet,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    space: MetricSpace,
) -> Result<(MfmgcnModel, TrainHistory, MetricsReport)> {
    let model = build_model(model_cfg)?;
    let (best, history) = train(&model, data, graphs, train_cfg)?;
    let report = evaluate(
        &Forecaster::Model {
            model: &best,
            graphs,
        },
        data,
        SplitPart::Test,
        space,
    )?;
    Ok((best, history, report))
}

fn run_seeds(
    data: &ForecastData,
    graphs: &StaticGraphSet,
    slots: &[GraphSlot],
    setup: &ExperimentSetup,
) -> Result<(Vec<SeedRun>, f64, f64)> {
    if setup.seeds.is_empty() {
        return Err(Error::Config("experiment needs at least one seed".into()));
    }
    let mut runs = Vec::with_capacity(setup.seeds.len());
    for &seed in &setup.seeds {
        let mut mc = setup.model.clone();
        mc.graphs = slots.to_vec();
        mc.seed = seed;
        let mut tc = setup.train.clone();
        tc.seed = seed;
        let (_, history, test) = train_and_evaluate(data, graphs, &mc, &tc, setup.space)?;
        runs.push(SeedRun {
            seed,
            best_epoch: history.best_epoch,
            epochs_run: history.epochs.len(),
            test,
        });
    }
    let k = runs.len() as f64;
    let mae = runs.iter().map(|r| r.test.mae).sum::<f64>() / k;
    let rmse = runs.iter().map(|r| r.test.rmse).sum::<f64>() / k;
    Ok((runs, mae, rmse))
}

/// One training run per spec and seed with otherwise identical settings;
/// graphs outside a spec are removed from the fusion sum.
pub fn run_ablation(
    specs: &[AblationSpec],
    data: &ForecastData,
    graphs: &StaticGraphSet,
    setup: &ExperimentSetup,
) -> Result<AblationTable> {
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        log::info!("ablation row {}", spec.name);
        let (runs, mean_mae, mean_rmse) = run_seeds(data, graphs, &spec.graphs, setup)?;
        rows.push(AblationRow {
            spec: spec.clone(),
            mean_mae,
            mean_rmse,
            runs,
        });
    }
    Ok(AblationTable {
        space: setup.space,
        target: data.norm.factors[0].clone(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaPoint {
    pub n_adjacent: usize,
    pub mean_mae: f64,
    pub mean_rmse: f64,
    pub runs: Vec<SeedRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaSweep {
    pub space: MetricSpace,
    pub target: String,
    pub points: Vec<NaPoint>,
}

/// Retrains the model for each neighbour count, rebuilding only the
/// neighbour graph.
pub fn run_na_sweep(
    values: &[usize],
    data: &ForecastData,
    graphs: &StaticGraphSet,
    setup: &ExperimentSetup,
) -> Result<NaSweep> {
    let mode = graphs.meta.config.neighbor.mode;
    let stations = &data.train.stations;
    let mut points = Vec::with_capacity(values.len());
    for &na in values {
        log::info!("neighbour sweep N_A = {na}");
        let cfg = NeighborGraphConfig { n_adjacent: na, mode };
        let mut g = graphs.clone();
        g.neighbor = build_neighbor_graph(stations, &cfg)?;
        g.meta.config.neighbor = cfg;
        let (runs, mean_mae, mean_rmse) = run_seeds(data, &g, &setup.model.graphs, setup)?;
        points.push(NaPoint {
            n_adjacent: na,
            mean_mae,
            mean_rmse,
            runs,
        });
    }
    Ok(NaSweep {
        space: setup.space,
        target: data.norm.factors[0].clone(),
        points,
    })
}
