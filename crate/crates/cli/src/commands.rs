use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mfmgcn::baselines::{fit_regression, Kernel, RegressionConfig, RegressionModel};
use mfmgcn::data::{
    generate_synthetic, load_dataset, preprocess, split_temporal, write_csv_dir, write_packed, DataFormat,
    DefaultCodes, SplitScheme, SynthConfig, WeatherSeriesDataset,
};
use mfmgcn::eval::{
    curves_to_csv, predict_split, run_ablation, run_na_sweep, score_external, score_predictions, singles_and_full,
    fusion_grid_specs, to_physical, to_stable_json, ExperimentSetup, Forecaster, HorizonCurve, MetricSpace, MetricsReport,
    PredictionFile, SplitPart,
};
use mfmgcn::geo::DistanceMode;
use mfmgcn::graphs::{
    build_static_graphs, load_graphs, save_graphs, DistanceGraphConfig, GraphBuildConfig, GraphSlot,
    NeighborGraphConfig, StaticGraphSet,
};
use mfmgcn::model::{build_model, load_checkpoint, save_checkpoint, train, CheckpointHeader, ForecastData};

use crate::cli::*;
use crate::config::{parse_list, parse_ratio, read_config_file, resolve, ExperimentConfig, Resolved};
use crate::error::CliError;
use crate::manifest::RunManifest;

pub struct Ctx {
    pub data_dir: Option<PathBuf>,
}

impl Ctx {
    /// Finds an input as given, else under the data directory.
    fn input(&self, path: &Path) -> Result<PathBuf, CliError> {
        if path.exists() {
            return Ok(path.to_path_buf());
        }
        if let Some(dir) = self.data_dir.as_ref().filter(|_| path.is_relative()) {
            let p = dir.join(path);
            if p.exists() {
                return Ok(p);
            }
        }
        Err(CliError::Validation(format!("input {} does not exist", path.display())))
    }
}

fn guard_outputs(inputs: &[&Path], outputs: &[&Path]) -> Result<(), CliError> {
    for o in outputs {
        let oc = fs::canonicalize(o).ok();
        for i in inputs {
            if oc.is_some() && oc == fs::canonicalize(i).ok() {
                return Err(CliError::Validation(format!(
                    "output {} would overwrite an input",
                    o.display()
                )));
            }
        }
    }
    Ok(())
}

fn load_data(path: &Path) -> Result<WeatherSeriesDataset, CliError> {
    let format = if path.is_dir() {
        DataFormat::CsvPerStation
    } else {
        DataFormat::PackedBinary
    };
    Ok(load_dataset(path, format, &DefaultCodes::weather2k())?)
}

fn write_text(path: &Path, s: &str) -> Result<(), CliError> {
    fs::write(path, s).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn finish(mut m: RunManifest, primary: &Path, start: Instant) -> Result<(), CliError> {
    m.wall_secs = start.elapsed().as_secs_f64();
    let p = m.write_next_to(primary)?;
    log::info!("manifest written to {}", p.display());
    Ok(())
}

fn record<T>(m: &mut RunManifest, r: &Resolved<T>) {
    m.config = r.json.clone();
    m.config_sources = r.sources.clone();
}

pub fn preprocess_cmd(ctx: &Ctx, a: &PreprocessArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let input = ctx.input(&a.input)?;
    guard_outputs(&[&input], &[&a.out])?;
    let codes = match a.default_codes {
        CodeSet::Weather2k => DefaultCodes::weather2k(),
        CodeSet::None => DefaultCodes::empty(),
    };
    let format = match a.format {
        InputFormat::Csv => DataFormat::CsvPerStation,
        InputFormat::Packed => DataFormat::PackedBinary,
    };
    let raw = load_dataset(&input, format, &codes)?;
    let (clean, report) = preprocess(&raw, &codes, a.max_missing, a.max_default)?;
    write_packed(&clean, &a.out)?;
    eprintln!(
        "kept {} of {} stations, interpolated {} cells",
        report.stations_out, report.stations_in, report.cells_interpolated
    );

    let mut m = RunManifest::new("preprocess");
    m.config = json!({
        "format": format,
        "max_missing": a.max_missing,
        "max_default": a.max_default,
        "default_codes": codes.codes,
    });
    m.input(&input)?;
    m.output(&a.out);
    if let Some(r) = &a.report {
        write_text(r, &to_stable_json(&report)?)?;
        m.output(r);
    }
    finish(m, &a.out, start)
}

pub fn synth_cmd(ctx: &Ctx, a: &SynthArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let file = a.config.as_ref().map(|p| ctx.input(p)).transpose()?;
    let file_json = file.as_deref().map(read_config_file).transpose()?;
    let mut flags = Vec::new();
    if let Some(n) = a.n {
        flags.push(("n_stations", json!(n)));
    }
    if let Some(t) = a.t {
        flags.push(("n_steps", json!(t)));
    }
    if let Some(d) = a.d {
        flags.push(("n_factors", json!(d)));
    }
    if let Some(s) = a.seed {
        flags.push(("seed", json!(s)));
    }
    let cfg = resolve(&SynthConfig::default(), file_json.as_ref(), &flags)?;
    let ds = generate_synthetic(&cfg.value)?;
    write_packed(&ds, &a.out)?;

    let mut m = RunManifest::new("synth");
    record(&mut m, &cfg);
    m.seed = Some(cfg.value.seed);
    if let Some(f) = &file {
        m.input(f)?;
    }
    m.output(&a.out);
    if let Some(dir) = &a.csv_dir {
        fs::create_dir_all(dir)?;
        write_csv_dir(&ds, dir)?;
        m.output(dir);
    }
    finish(m, &a.out, start)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct GraphsConfig {
    distance: DistanceGraphConfig,
    neighbor: NeighborGraphConfig,
    pattern_factors: Vec<String>,
    split: SplitScheme,
}

fn sigma_value(s: &str) -> Result<Value, CliError> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(json!("auto"));
    }
    let km: f64 = s
        .parse()
        .map_err(|_| CliError::Validation(format!("--sigma must be `auto` or a number of km, got {s:?}")))?;
    Ok(json!({ "km": km }))
}

pub fn graphs_cmd(ctx: &Ctx, a: &GraphsArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let data_path = ctx.input(&a.data)?;
    guard_outputs(&[&data_path], &[&a.out])?;
    let file = a.config.as_ref().map(|p| ctx.input(p)).transpose()?;
    let file_json = file.as_deref().map(read_config_file).transpose()?;

    let mut flags = Vec::new();
    if let Some(s) = &a.sigma {
        flags.push(("distance.sigma", sigma_value(s)?));
    }
    if let Some(e) = a.epsilon {
        flags.push(("distance.epsilon", json!(e)));
    }
    if let Some(na) = a.na {
        flags.push(("neighbor.n_adjacent", json!(na)));
    }
    if let Some(dm) = a.distance_mode {
        let mode = match dm {
            DistanceModeArg::GreatCircle => DistanceMode::GreatCircle,
            DistanceModeArg::Euclidean3d => DistanceMode::Euclidean3d,
        };
        flags.push(("distance.mode", json!(mode)));
        flags.push(("neighbor.mode", json!(mode)));
    }
    if let Some(p) = &a.pattern_factors {
        flags.push(("pattern_factors", json!(parse_list(p, |s| Ok::<_, String>(s.to_string()))?)));
    }
    if let Some(r) = &a.split_ratio {
        flags.push(("split", serde_json::to_value(parse_ratio(r)?)?));
    }
    let default = GraphsConfig {
        split: SplitScheme::default(),
        pattern_factors: GraphBuildConfig::default().pattern_factors,
        ..Default::default()
    };
    let cfg = resolve(&default, file_json.as_ref(), &flags)?;

    let ds = load_data(&data_path)?;
    let (train_part, _, _) = split_temporal(&ds, &cfg.value.split)?;
    let build = GraphBuildConfig {
        distance: cfg.value.distance,
        neighbor: cfg.value.neighbor,
        pattern_factors: cfg.value.pattern_factors.clone(),
    };
    let set = build_static_graphs(&train_part, &build)?;
    save_graphs(&set, &a.out)?;
    eprintln!(
        "built graphs for {} stations, sigma {:.3} km, pattern factors {:?}",
        set.n(),
        set.meta.sigma_km,
        set.meta.pattern_factors_used
    );

    let mut m = RunManifest::new("graphs");
    record(&mut m, &cfg);
    m.input(&data_path)?;
    if let Some(f) = &file {
        m.input(f)?;
    }
    m.output(&a.out);
    finish(m, &a.out, start)
}

fn resolve_experiment(
    ctx: &Ctx,
    a: &ExperimentArgs,
    m: &mut RunManifest,
    extra: &[(&'static str, Value)],
) -> Result<Resolved<ExperimentConfig>, CliError> {
    let file = a.config.as_ref().map(|p| ctx.input(p)).transpose()?;
    let file_json = file.as_deref().map(read_config_file).transpose()?;
    if let Some(f) = &file {
        m.input(f)?;
    }
    let mut flags: Vec<(&str, Value)> = Vec::new();
    if let Some(f) = &a.factor {
        flags.push(("factor", json!(f)));
    }
    if let Some(i) = &a.inputs {
        flags.push(("inputs", json!(parse_list(i, |s| Ok::<_, String>(s.to_string()))?)));
    }
    if let Some(w) = a.wprime {
        flags.push(("w_in", json!(w)));
    }
    if let Some(w) = a.w {
        flags.push(("w_out", json!(w)));
    }
    if let Some(r) = &a.split_ratio {
        flags.push(("split", serde_json::to_value(parse_ratio(r)?)?));
    }
    if let Some(g) = &a.graph_set {
        flags.push(("graphs", serde_json::to_value(parse_list(g, GraphSlot::parse)?)?));
    }
    if let Some(e) = a.epochs {
        flags.push(("train.epochs", json!(e)));
    }
    if let Some(b) = a.batch_size {
        flags.push(("train.batch_size", json!(b)));
    }
    if let Some(lr) = a.lr {
        flags.push(("train.lr0", json!(lr)));
    }
    if let Some(p) = a.patience {
        flags.push(("train.early_stop_patience", json!(p)));
    }
    if let Some(s) = a.seed {
        flags.push(("seed", json!(s)));
        flags.push(("train.seed", json!(s)));
    }
    if let Some(s) = a.space {
        let space = match s {
            SpaceArg::Normalized => MetricSpace::Normalized,
            SpaceArg::Physical => MetricSpace::Physical,
        };
        flags.push(("space", json!(space)));
    }
    flags.extend(extra.iter().cloned());
    let r = resolve(&ExperimentConfig::default(), file_json.as_ref(), &flags)?;
    r.value.train.validate()?;
    record(m, &r);
    Ok(r)
}

fn prepare(ds: &WeatherSeriesDataset, cfg: &ExperimentConfig) -> Result<ForecastData, CliError> {
    Ok(ForecastData::prepare(ds, &cfg.factor_list(), &cfg.split, cfg.w_in, cfg.w_out)?)
}

fn check_graphs(graphs: &StaticGraphSet, ds: &WeatherSeriesDataset) -> Result<(), CliError> {
    let ids: Vec<&str> = ds.stations.iter().map(|s| s.station_id.as_str()).collect();
    if graphs.meta.station_ids.iter().map(String::as_str).ne(ids.iter().copied()) {
        return Err(CliError::Validation(
            "graph file was built for a different station list".into(),
        ));
    }
    Ok(())
}

pub fn train_cmd(ctx: &Ctx, a: &TrainArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut m = RunManifest::new("train");
    let data_path = ctx.input(&a.exp.data)?;
    let graphs_path = ctx.input(&a.graphs)?;
    let mut outs = vec![a.out.as_path()];
    outs.extend(a.history.as_deref());
    guard_outputs(&[&data_path, &graphs_path], &outs)?;
    let cfg = resolve_experiment(ctx, &a.exp, &mut m, &[])?.value;

    let ds = load_data(&data_path)?;
    let graphs = load_graphs(&graphs_path)?;
    check_graphs(&graphs, &ds)?;
    let data = prepare(&ds, &cfg)?;
    let model_cfg = cfg.model_config(ds.n_stations());
    let model = build_model(&model_cfg)?;
    let (best, history) = train(&model, &data, &graphs, &cfg.train)?;
    eprintln!(
        "trained {} epochs, best epoch {} with validation MAE {:.6}",
        history.epochs.len(),
        history.best_epoch,
        history.best_val_mae
    );
    let header = CheckpointHeader {
        model: model_cfg,
        train: Some(cfg.train.clone()),
        factors: data.norm.factors.clone(),
        norm: Some(data.norm.clone()),
        producer_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    save_checkpoint(&best, &header, &a.out)?;

    m.seed = Some(cfg.seed);
    m.input(&data_path)?;
    m.input(&graphs_path)?;
    m.output(&a.out);
    if let Some(h) = &a.history {
        write_text(h, &history.to_json_lines()?)?;
        m.output(h);
    }
    finish(m, &a.out, start)
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    forecaster: &'a str,
    split: SplitPart,
    metrics: &'a MetricsReport,
}

fn split_part(s: SplitArg) -> SplitPart {
    match s {
        SplitArg::Train => SplitPart::Train,
        SplitArg::Val => SplitPart::Val,
        SplitArg::Test => SplitPart::Test,
    }
}

pub fn eval_cmd(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut m = RunManifest::new("eval");
    let part = split_part(a.split);
    let data_path = ctx.input(&a.exp.data)?;
    let mut ins = vec![data_path.clone()];
    for p in [&a.checkpoint, &a.graphs, &a.pred].into_iter().flatten() {
        ins.push(ctx.input(p)?);
    }
    let in_refs: Vec<&Path> = ins.iter().map(PathBuf::as_path).collect();
    let mut outs = vec![a.out.as_path()];
    outs.extend(a.curve.as_deref());
    outs.extend(a.save_pred.as_deref());
    guard_outputs(&in_refs, &outs)?;
    for p in &ins {
        m.input(p)?;
    }

    // A checkpoint fixes factors and window lengths; flags may only agree.
    let ckpt = match &a.checkpoint {
        Some(p) => Some(load_checkpoint(&ctx.input(p)?)?),
        None => None,
    };
    let extra: Vec<(&'static str, Value)> = match &ckpt {
        Some((model, header)) => vec![
            ("factor", json!(header.factors[0])),
            ("inputs", json!(header.factors[1..])),
            ("w_in", json!(model.config.w_in)),
            ("w_out", json!(model.config.w_out)),
        ],
        None => Vec::new(),
    };
    if let Some((model, header)) = &ckpt {
        let clash = a.exp.factor.as_ref().is_some_and(|f| *f != header.factors[0])
            || a.exp.wprime.is_some_and(|w| w != model.config.w_in)
            || a.exp.w.is_some_and(|w| w != model.config.w_out);
        if clash {
            return Err(CliError::Validation(
                "--factor/--wprime/--w disagree with the checkpoint".into(),
            ));
        }
    }
    let cfg = resolve_experiment(ctx, &a.exp, &mut m, &extra)?.value;
    let ds = load_data(&data_path)?;
    let data = prepare(&ds, &cfg)?;

    let (label, report, preds) = if let Some(p) = &a.pred {
        let file = PredictionFile::load(&ctx.input(p)?)?;
        if file.split != part {
            return Err(CliError::Validation(format!(
                "forecast file covers the {:?} split, --split asks for {part:?}",
                file.split
            )));
        }
        ("file".to_string(), score_external(&file, &data)?, None)
    } else {
        let graphs = match &a.graphs {
            Some(p) => {
                let g = load_graphs(&ctx.input(p)?)?;
                check_graphs(&g, &ds)?;
                Some(g)
            }
            None => None,
        };
        let regression: Option<RegressionModel> = match a.baseline {
            Some(BaselineArg::Linear) => Some(fit_regression(&data.train, cfg.w_in, cfg.w_out, &RegressionConfig::linear())?),
            Some(BaselineArg::Ridge) => Some(fit_regression(&data.train, cfg.w_in, cfg.w_out, &RegressionConfig::ridge(a.lambda))?),
            Some(BaselineArg::Krr) => Some(fit_regression(
                &data.train,
                cfg.w_in,
                cfg.w_out,
                &RegressionConfig::kernel_ridge(a.lambda, Kernel::Rbf { gamma: a.gamma }),
            )?),
            _ => None,
        };
        let (label, f) = match (&a.baseline, &ckpt, &regression) {
            (Some(BaselineArg::Persistence), _, _) => ("persistence".to_string(), Forecaster::Persistence),
            (Some(b), _, Some(r)) => (format!("{b:?}").to_lowercase(), Forecaster::Regression(r)),
            (None, Some((model, header)), _) => {
                if header.norm.as_ref() != Some(&data.norm) {
                    return Err(CliError::Validation(
                        "checkpoint normalization differs from this data and split".into(),
                    ));
                }
                (
                    "mfmgcn".to_string(),
                    Forecaster::Model {
                        model,
                        graphs: graphs.as_ref().expect("clap requires --graphs with --checkpoint"),
                    },
                )
            }
            _ => {
                return Err(CliError::Validation(
                    "choose one of --baseline, --checkpoint or --pred".into(),
                ))
            }
        };
        let p = predict_split(&f, &data, part)?;
        let report = score_predictions(&p, &data, cfg.space)?;
        (label, report, Some(p))
    };

    write_text(
        &a.out,
        &to_stable_json(&EvalOutput {
            forecaster: &label,
            split: part,
            metrics: &report,
        })?,
    )?;
    eprintln!("{label} on {part:?}: MAE {:.6} RMSE {:.6}", report.mae, report.rmse);
    m.output(&a.out);
    if let Some(c) = &a.curve {
        write_text(c, &curves_to_csv(&[HorizonCurve::from_report(&label, &report, 0)?])?)?;
        m.output(c);
    }
    if let Some(sp) = &a.save_pred {
        let p = preds.ok_or_else(|| CliError::Validation("--save-pred needs a forecaster, not --pred".into()))?;
        let values = match cfg.space {
            MetricSpace::Normalized => p.pred,
            MetricSpace::Physical => to_physical(&p.pred, data.target_mean(), data.target_std()),
        };
        let ds_part = data.part(part);
        PredictionFile {
            factors: vec![data.norm.factors[0].clone()],
            station_ids: ds_part.stations.iter().map(|s| s.station_id.clone()).collect(),
            split: part,
            origins: p.origins,
            space: cfg.space,
            values,
        }
        .save(sp)?;
        m.output(sp);
    }
    finish(m, &a.out, start)
}

pub fn ablate_cmd(ctx: &Ctx, a: &AblateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut m = RunManifest::new("ablate");
    let data_path = ctx.input(&a.exp.data)?;
    let graphs_path = a.graphs.as_ref().map(|p| ctx.input(p)).transpose()?;
    let mut ins = vec![data_path.as_path()];
    ins.extend(graphs_path.as_deref());
    guard_outputs(&ins, &[&a.out])?;
    let mut extra: Vec<(&'static str, Value)> = Vec::new();
    if let Some(s) = &a.seeds {
        extra.push(("seeds", json!(parse_list(s, str::parse::<u64>)?)));
    }
    let cfg = resolve_experiment(ctx, &a.exp, &mut m, &extra)?.value;
    let ds = load_data(&data_path)?;
    let data = prepare(&ds, &cfg)?;
    let graphs = match &graphs_path {
        Some(p) => {
            m.input(p)?;
            let g = load_graphs(p)?;
            check_graphs(&g, &ds)?;
            g
        }
        None => {
            let (train_part, _, _) = split_temporal(&ds, &cfg.split)?;
            build_static_graphs(&train_part, &GraphBuildConfig::default())?
        }
    };
    let setup = ExperimentSetup {
        model: cfg.model_config(ds.n_stations()),
        train: cfg.train.clone(),
        seeds: cfg.seeds.clone(),
        space: cfg.space,
    };
    m.input(&data_path)?;
    let text = match a.grid {
        GridArg::Fusion | GridArg::Singles => {
            let specs = if a.grid == GridArg::Fusion {
                fusion_grid_specs()
            } else {
                singles_and_full()
            };
            let table = run_ablation(&specs, &data, &graphs, &setup)?;
            for r in &table.rows {
                eprintln!("{:<12} MAE {:.6} RMSE {:.6}", r.spec.name, r.mean_mae, r.mean_rmse);
            }
            to_stable_json(&table)?
        }
        GridArg::NaSweep => {
            let values = parse_list(&a.na_values, str::parse::<usize>)?;
            let sweep = run_na_sweep(&values, &data, &graphs, &setup)?;
            for p in &sweep.points {
                eprintln!("N_A {:<4} MAE {:.6} RMSE {:.6}", p.n_adjacent, p.mean_mae, p.mean_rmse);
            }
            to_stable_json(&sweep)?
        }
    };
    write_text(&a.out, &text)?;
    m.seed = cfg.seeds.first().copied();
    m.output(&a.out);
    finish(m, &a.out, start)
}
