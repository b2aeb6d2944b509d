use ndarray::Array4;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfmgcn::data::{generate_synthetic, SplitScheme, SynthConfig};
use mfmgcn::eval::*;
use mfmgcn::geo::DistanceMode;
use mfmgcn::graphs::{build_static_graphs, GraphBuildConfig, GraphSlot, NeighborGraphConfig, StaticGraphSet};
use mfmgcn::model::{ForecastData, ModelConfig, StBlockConfig, TrainConfig};

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("f{i}")).collect()
}

struct Oracle {
    mae: f64,
    mse: f64,
    horizon_mae: Vec<f64>,
}

fn loop_oracle(p: &Array4<f64>, t: &Array4<f64>, f: usize) -> Oracle {
    let (b, n, w, _) = p.dim();
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut hm = vec![0.0; w];
    for i in 0..b {
        for j in 0..n {
            for h in 0..w {
                let e = p[[i, j, h, f]] - t[[i, j, h, f]];
                abs += e.abs();
                sq += e * e;
                hm[h] += e.abs();
            }
        }
    }
    let c = (b * n * w) as f64;
    Oracle {
        mae: abs / c,
        mse: sq / c,
        horizon_mae: hm.iter().map(|v| v / (b * n) as f64).collect(),
    }
}

fn tensors() -> impl Strategy<Value = (Array4<f64>, Array4<f64>)> {
    (1usize..5, 1usize..6, 1usize..8, 1usize..3, any::<u64>()).prop_map(|(b, n, w, d, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Array4::from_shape_fn((b, n, w, d), |_| rng.random_range(-10.0..10.0));
        let t = Array4::from_shape_fn((b, n, w, d), |_| rng.random_range(-10.0..10.0));
        (p, t)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metric_identities_and_loop_oracle((p, t) in tensors()) {
        let d = p.dim().3;
        let r = compute_metrics(&p, &t, &names(d), MetricSpace::Normalized).unwrap();
        prop_assert!((r.rmse * r.rmse - r.mse).abs() <= 1e-12 * r.mse.max(1.0));
        prop_assert!(r.mae <= r.rmse + 1e-12);
        for (f, fm) in r.per_factor.iter().enumerate() {
            let o = loop_oracle(&p, &t, f);
            prop_assert!((fm.mae - o.mae).abs() <= 1e-12);
            prop_assert!((fm.mse - o.mse).abs() <= 1e-12);
            prop_assert!(fm.mae <= fm.rmse + 1e-12);
            for (a, b) in fm.horizon_mae.iter().zip(&o.horizon_mae) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            for (m, s) in fm.horizon_mse.iter().zip(&fm.horizon_rmse) {
                prop_assert!((s * s - m).abs() <= 1e-12 * m.max(1.0));
            }
        }
    }
}

#[test]
fn zero_error_and_horizon_ramp() {
    let t = Array4::from_shape_fn((3, 4, 5, 1), |(a, b, c, _)| (a + b * c) as f64);
    let r = compute_metrics(&t, &t, &names(1), MetricSpace::Normalized).unwrap();
    assert_eq!((r.mae, r.mse, r.rmse), (0.0, 0.0, 0.0));

    let ramp = Array4::from_shape_fn((3, 4, 5, 1), |(a, b, c, _)| t[[a, b, c, 0]] + (c + 1) as f64);
    let r = compute_metrics(&ramp, &t, &names(1), MetricSpace::Normalized).unwrap();
    assert_eq!(r.per_factor[0].horizon_mae, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(r.counts, MetricCounts { windows: 3, nodes: 4, horizon: 5, factors: 1 });

    assert!(compute_metrics(&t, &Array4::zeros((3, 4, 4, 1)), &names(1), MetricSpace::Normalized).is_err());

    let curve = HorizonCurve::from_report("ramp", &r, 0).unwrap();
    let csv = curves_to_csv(&[curve]).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().nth(1).unwrap().starts_with("ramp,f0,1,1"));
}

fn setup() -> (ForecastData, StaticGraphSet) {
    let ds = generate_synthetic(&SynthConfig {
        n_stations: 6,
        n_steps: 360,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let data = ForecastData::prepare(&ds, &["t"], &SplitScheme::Ratio([3, 1, 2]), 6, 3).unwrap();
    let cfg = GraphBuildConfig {
        neighbor: NeighborGraphConfig {
            n_adjacent: 2,
            mode: DistanceMode::GreatCircle,
        },
        ..Default::default()
    };
    let graphs = build_static_graphs(&data.train, &cfg).unwrap();
    (data, graphs)
}

fn prediction_file(data: &ForecastData, part: SplitPart, shift: f64) -> PredictionFile {
    let p = predict_split(&Forecaster::Persistence, data, part).unwrap();
    PredictionFile {
        factors: vec!["t".into()],
        station_ids: data.part(part).stations.iter().map(|s| s.station_id.clone()).collect(),
        split: part,
        origins: p.origins,
        space: MetricSpace::Normalized,
        values: p.truth.mapv(|v| v + shift),
    }
}

#[test]
fn external_forecasts_are_scored_against_the_split() {
    let (data, _) = setup();
    let exact = prediction_file(&data, SplitPart::Test, 0.0);
    let r = score_external(&exact, &data).unwrap();
    assert_eq!((r.mae, r.rmse), (0.0, 0.0));

    let plus = prediction_file(&data, SplitPart::Test, 1.0);
    let r = score_external(&plus, &data).unwrap();
    assert!((r.mae - 1.0).abs() < 1e-12 && (r.rmse - 1.0).abs() < 1e-12);

    // The same values checked against the wrong split no longer match.
    let mut wrong = exact.clone();
    wrong.split = SplitPart::Val;
    wrong.origins.truncate(data.windows(&data.val).unwrap().len());
    wrong.values = wrong.values.slice(ndarray::s![..wrong.origins.len(), .., .., ..]).to_owned();
    assert!(score_external(&wrong, &data).unwrap().mae > 0.0);

    let mut renamed = exact.clone();
    renamed.station_ids[0] = "elsewhere".into();
    assert!(score_external(&renamed, &data).unwrap_err().is_validation());
    let mut other = exact.clone();
    other.factors = vec!["rh".into()];
    assert!(score_external(&other, &data).unwrap_err().is_validation());

    let mut phys = exact.clone();
    phys.space = MetricSpace::Physical;
    phys.values = to_physical(&exact.values, data.target_mean(), data.target_std());
    assert!(score_external(&phys, &data).unwrap().mae < 1e-9);
}

#[test]
fn prediction_file_round_trip() {
    let (data, _) = setup();
    let f = prediction_file(&data, SplitPart::Val, 0.25);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pred.bin");
    f.save(&p).unwrap();
    assert_eq!(PredictionFile::load(&p).unwrap(), f);
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[3] = b'!';
    assert!(PredictionFile::read_from(&mut bytes.as_slice()).unwrap_err().is_validation());
}

#[test]
fn physical_space_rescales_errors_by_the_target_scale() {
    let (data, _) = setup();
    let n = evaluate(&Forecaster::Persistence, &data, SplitPart::Test, MetricSpace::Normalized).unwrap();
    let p = evaluate(&Forecaster::Persistence, &data, SplitPart::Test, MetricSpace::Physical).unwrap();
    assert!((p.mae - n.mae * data.target_std()).abs() < 1e-9);
    assert_eq!(p.space, MetricSpace::Physical);
}

fn tiny_setup(graphs: Vec<GraphSlot>) -> ExperimentSetup {
    let mut model = ModelConfig::new(6, 6, 3, 1, 0);
    model.blocks = vec![StBlockConfig {
        cheb_order: 2,
        temporal_kernels: vec![3],
        channels_in: 1,
        channels_out: 4,
    }];
    model.graphs = graphs;
    model.learnable.d_emb = 4;
    model.dynamic.d_emb = 4;
    ExperimentSetup {
        model,
        train: TrainConfig {
            epochs: 3,
            ..Default::default()
        },
        seeds: vec![4],
        space: MetricSpace::Normalized,
    }
}

#[test]
fn single_row_ablation_equals_a_plain_run() {
    let (data, graphs) = setup();
    let spec = AblationSpec::new(&[GraphSlot::Neighbor, GraphSlot::Learnable]);
    let setup = tiny_setup(GraphSlot::ALL.to_vec());
    let table = run_ablation(std::slice::from_ref(&spec), &data, &graphs, &setup).unwrap();
    assert_eq!(table.rows.len(), 1);

    let mut mc = setup.model.clone();
    mc.graphs = spec.graphs.clone();
    mc.seed = 4;
    let tc = TrainConfig { seed: 4, ..setup.train.clone() };
    let (_, hist, report) = train_and_evaluate(&data, &graphs, &mc, &tc, MetricSpace::Normalized).unwrap();
    let row = &table.rows[0];
    assert_eq!(row.runs[0].test, report);
    assert_eq!(row.runs[0].best_epoch, hist.best_epoch);
    assert_eq!(row.mean_mae, report.mae);
    assert_eq!(row.spec.name, "N+L");
}

#[test]
fn neighbour_sweep_is_deterministic() {
    let (data, graphs) = setup();
    let setup = tiny_setup(vec![GraphSlot::Distance, GraphSlot::Neighbor]);
    let a = run_na_sweep(&[1, 3, 5], &data, &graphs, &setup).unwrap();
    let b = run_na_sweep(&[1, 3, 5], &data, &graphs, &setup).unwrap();
    assert_eq!(to_stable_json(&a).unwrap(), to_stable_json(&b).unwrap());
    assert_eq!(a.points.iter().map(|p| p.n_adjacent).collect::<Vec<_>>(), vec![1, 3, 5]);
    assert!(a.points.iter().all(|p| p.mean_mae.is_finite()));
    assert!(run_na_sweep(&[6], &data, &graphs, &setup).is_err());
}

#[test]
fn grid_definitions() {
    let t = fusion_grid_specs();
    assert_eq!(t.len(), 13);
    assert_eq!(t.last().unwrap().graphs, GraphSlot::ALL.to_vec());
    assert_eq!(t.iter().filter(|s| s.graphs.len() == 1).count(), 5);
    assert_eq!(t.iter().filter(|s| s.graphs.len() == 4).count(), 5);
    let s = singles_and_full();
    assert_eq!(s.len(), 6);
}
