use chrono::NaiveDate;
use nalgebra::DMatrix;
use ndarray::{Array2, Array3, ArrayD, IxDyn};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfmgcn::data::{StationMeta, WeatherSeriesDataset};
use mfmgcn::geo::{haversine_km, DistanceMode, EARTH_RADIUS_KM};
use mfmgcn::graphs::*;
use mfmgcn::tape::{ParamStore, Tape};

fn st(id: impl Into<String>, lat: f64, lon: f64) -> StationMeta {
    StationMeta::new(id, lat, lon, 0.0).unwrap()
}

fn random_stations(rng: &mut ChaCha8Rng, n: usize) -> Vec<StationMeta> {
    (0..n)
        .map(|i| st(format!("s{i}"), rng.random_range(20.0..50.0), rng.random_range(95.0..130.0)))
        .collect()
}

fn random_dataset(rng: &mut ChaCha8Rng, stations: Vec<StationMeta>, t: usize) -> WeatherSeriesDataset {
    let n = stations.len();
    let values = Array3::from_shape_fn((n, t, 3), |_| rng.random_range(-5.0..5.0));
    WeatherSeriesDataset::new(
        stations,
        vec!["t".into(), "rh".into(), "hv2".into()],
        values,
        Array3::from_elem((n, t, 3), true),
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
    )
    .unwrap()
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Adjacency {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.7) {
                let v = rng.random_range(0.05..1.0);
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
    }
    Adjacency::new(GraphKind::Distance, w).unwrap()
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Spherical law of cosines, a second route to the great-circle distance.
fn cosine_law_km(a: &StationMeta, b: &StationMeta) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let c = (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0);
    EARTH_RADIUS_KM * c.acos()
}

#[test]
fn great_circle_distances() {
    let a = st("a", 39.9, 116.4);
    assert_eq!(haversine_km(&a, &a), 0.0);
    let d = haversine_km(&st("p", 0.0, 0.0), &st("q", 0.0, 180.0));
    assert!((d - std::f64::consts::PI * 6371.0).abs() < 1e-6);
    assert!((d - 20015.1).abs() < 0.1);
    let b = st("b", 31.2, 121.5);
    assert!((haversine_km(&a, &b) - cosine_law_km(&a, &b)).abs() < 0.1);
    assert_eq!(haversine_km(&a, &b), haversine_km(&b, &a));
}

#[test]
fn distance_kernel_threshold_edge() {
    let sigma = 100.0;
    let eps = 0.3;
    // On the equator, great-circle distance is R times the longitude gap.
    let d_below = sigma * (-(eps - 1e-6f64).ln()).sqrt();
    let d_above = sigma * (-(eps + 1e-6f64).ln()).sqrt();
    let deg = |d: f64| (d / EARTH_RADIUS_KM).to_degrees();
    let s = vec![st("a", 0.0, 0.0), st("b", 0.0, deg(d_below)), st("c", 0.0, -deg(d_above))];
    let cfg = DistanceGraphConfig {
        sigma: Sigma::Km(sigma),
        epsilon: eps,
        mode: DistanceMode::GreatCircle,
    };
    let a = build_distance_graph(&s, &cfg).unwrap();
    assert_eq!(a.weights[[0, 1]], 0.0);
    assert!(a.weights[[0, 2]] >= eps);

    let same = build_distance_graph(&[st("x", 10.0, 10.0), st("y", 10.0, 10.0)], &cfg).unwrap();
    assert_eq!(same.weights[[0, 1]], 1.0);
}

#[test]
fn neighbour_graph_cases() {
    let line = vec![st("w", 30.0, 100.0), st("m", 30.0, 100.5), st("e", 30.0, 101.2)];
    let a = build_neighbor_graph(&line, &NeighborGraphConfig { n_adjacent: 1, mode: DistanceMode::GreatCircle }).unwrap();
    assert_eq!(a.weights[[0, 1]], 1.0);
    assert_eq!(a.weights[[2, 1]], 1.0);
    assert_eq!(a.weights[[1, 0]], 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = random_stations(&mut rng, 7);
    let full = build_neighbor_graph(&s, &NeighborGraphConfig { n_adjacent: 6, mode: DistanceMode::GreatCircle }).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            assert_eq!(full.weights[[i, j]], if i == j { 0.0 } else { 1.0 });
        }
    }
    let bad = build_neighbor_graph(&s, &NeighborGraphConfig { n_adjacent: 7, mode: DistanceMode::GreatCircle });
    assert!(bad.unwrap_err().is_validation());
}

#[test]
fn equidistant_neighbours_resolve_to_lower_index() {
    let s = vec![st("c", 0.0, 0.0), st("n", 1.0, 0.0), st("s", -1.0, 0.0)];
    let a = build_neighbor_graph(&s, &NeighborGraphConfig { n_adjacent: 1, mode: DistanceMode::GreatCircle }).unwrap();
    assert_eq!(a.weights.row(0).to_vec(), vec![0.0, 1.0, 0.0]);
}

fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    cov / (sx * sy)
}

#[test]
fn pattern_graph_matches_pearson_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ds = { let s = random_stations(&mut rng, 4); random_dataset(&mut rng, s, 50) };
    // Station 1 copies station 0 and station 2 negates it, in factor t.
    for k in 0..50 {
        ds.values[[1, k, 0]] = ds.values[[0, k, 0]];
        ds.values[[2, k, 0]] = -ds.values[[0, k, 0]];
    }
    let g = build_pattern_graph(&ds, &["t"]).unwrap().mean;
    assert!((g.weights[[0, 1]] - 1.0).abs() < 1e-12);
    assert!((g.weights[[0, 2]] + 1.0).abs() < 1e-12);
    assert!(g.is_symmetric(0.0));

    let all = build_pattern_graph(&ds, &["t", "rh", "hv2"]).unwrap();
    for (f, (name, a)) in all.per_factor.iter().enumerate() {
        assert_eq!(name, ["t", "rh", "hv2"][f]);
        for i in 0..4 {
            assert_eq!(a.weights[[i, i]], 0.0);
            for j in 0..4 {
                if i != j {
                    let x: Vec<f64> = ds.values.slice(ndarray::s![i, .., f]).to_vec();
                    let y: Vec<f64> = ds.values.slice(ndarray::s![j, .., f]).to_vec();
                    assert!((a.weights[[i, j]] - pearson_oracle(&x, &y)).abs() < 1e-10);
                }
            }
        }
    }
    let mean = (&all.per_factor[0].1.weights + &all.per_factor[1].1.weights + &all.per_factor[2].1.weights) / 3.0;
    assert!(max_abs_diff(&mean, &all.mean.weights) < 1e-15);
}

#[test]
fn constant_series_in_pattern_graph_names_the_station() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ds = { let s = random_stations(&mut rng, 3); random_dataset(&mut rng, s, 20) };
    for k in 0..20 {
        ds.values[[2, k, 1]] = 1.5;
    }
    match build_pattern_graph(&ds, &["rh"]).unwrap_err() {
        mfmgcn::Error::ZeroVariance { factor, station } => {
            assert_eq!(factor, "rh");
            assert_eq!(station.as_deref(), Some("s2"));
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn learnable_graph_vanishes_for_equal_embeddings() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = LearnableGraphParams::init(&mut store, 6, &LearnableGraphConfig::default(), &mut rng).unwrap();
    let e = store.get(p.e1).clone();
    let th = store.get(p.theta1).clone();
    *store.get_mut(p.e2) = e;
    *store.get_mut(p.theta2) = th;
    assert!(p.eval(&store).unwrap().weights.iter().all(|&v| v == 0.0));
}

#[test]
fn dynamic_graph_identical_windows_and_batch_order() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, w) = (5, 6);
    let p = DynamicGraphParams::init(&mut store, w, &DynamicGraphConfig::default(), &mut rng).unwrap();
    let mut window = Array3::from_shape_fn((n, w, 1), |_| rng.random_range(-1.0..1.0));
    for k in 0..w {
        window[[3, k, 0]] = window[[1, k, 0]];
    }
    let a = p.eval(&store, &window).unwrap();
    assert_eq!(a.weights[[1, 3]], 0.0);
    assert_eq!(a.weights[[3, 1]], 0.0);
    assert!(a.is_one_sided());

    let b = 4;
    let z = ArrayD::from_shape_fn(IxDyn(&[b, n, w]), |_| rng.random_range(-1.0..1.0));
    let perm = [2usize, 0, 3, 1];
    let zp = ArrayD::from_shape_fn(IxDyn(&[b, n, w]), |ix| z[[perm[ix[0]], ix[1], ix[2]]]);
    let tape = Tape::new();
    let out = p.eval_tape(&tape, &store, &tape.constant(z)).unwrap().value();
    let outp = p.eval_tape(&tape, &store, &tape.constant(zp)).unwrap().value();
    for k in 0..b {
        for i in 0..n {
            for j in 0..n {
                assert_eq!(outp[[k, i, j]], out[[perm[k], i, j]]);
            }
        }
    }
}

fn triple_loop_fusion(parts: &[(Array2<f64>, Array2<f64>)]) -> Array2<f64> {
    let n = parts[0].0.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            for (w, a) in parts {
                out[[i, j]] += w[[i, j]] * a[[i, j]];
            }
        }
    }
    out
}

#[test]
fn fusion_identity_zero_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 6;
    let graphs: Vec<Adjacency> = (0..5).map(|_| random_symmetric(&mut rng, n)).collect();
    let ones = Array2::ones((n, n));
    let zeros = Array2::zeros((n, n));
    let mut pairs: Vec<(&Array2<f64>, &Adjacency)> = vec![(&ones, &graphs[0])];
    pairs.extend(graphs[1..].iter().map(|g| (&zeros, g)));
    assert_eq!(fuse_graphs(&pairs).unwrap().weights, graphs[0].weights);

    let all_zero: Vec<_> = graphs.iter().map(|g| (&zeros, g)).collect();
    assert!(fuse_graphs(&all_zero).unwrap().weights.iter().all(|&v| v == 0.0));

    let ws: Vec<Array2<f64>> = (0..5).map(|_| Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0))).collect();
    let fused = fuse_graphs(&ws.iter().zip(&graphs).collect::<Vec<_>>()).unwrap();
    let oracle = triple_loop_fusion(&ws.iter().cloned().zip(graphs.iter().map(|g| g.weights.clone())).collect::<Vec<_>>());
    assert!(max_abs_diff(&fused.weights, &oracle) <= 1e-12);

    // Recorded fusion agrees with the plain one.
    let tape = Tape::new();
    let parts: Vec<_> = ws
        .iter()
        .zip(&graphs)
        .map(|(w, g)| (tape.constant(w.clone().into_dyn()), tape.constant(g.weights.clone().into_dyn())))
        .collect();
    let rec = fuse_tape(&parts, 1).unwrap().value();
    let rec = rec.into_shape_with_order((n, n)).unwrap();
    assert!(max_abs_diff(&rec, &fused.weights) <= 1e-12);
}

#[test]
fn fusion_params_start_at_the_mean_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 4;
    let mut store = ParamStore::new();
    let slots = [GraphSlot::Distance, GraphSlot::Neighbor, GraphSlot::Pattern];
    let fp = FusionParams::init(&mut store, &slots, n).unwrap();
    let gs: Vec<Adjacency> = (0..3).map(|_| random_symmetric(&mut rng, n)).collect();
    let keyed: Vec<(GraphSlot, &Adjacency)> = slots.iter().cloned().zip(&gs).collect();
    let fused = fuse_with_params(&store, &fp, &keyed).unwrap();
    let mean = (&gs[0].weights + &gs[1].weights + &gs[2].weights) / 3.0;
    assert!(max_abs_diff(&fused.weights, &mean) < 1e-15);
    assert!(FusionParams::init(&mut store, &[GraphSlot::Distance, GraphSlot::Distance], n).is_err());
}

/// `U (sum_k T_k(Lambda) theta_k) U^T x` via a dense eigendecomposition.
fn spectral_oracle(l_tilde: &Array2<f64>, theta: &Array3<f64>, x: &Array2<f64>) -> Array2<f64> {
    let eig = to_na(l_tilde).symmetric_eigen();
    let u = &eig.eigenvectors;
    let (k, cin, cout) = theta.dim();
    let n = x.nrows();
    let xh = u.transpose() * to_na(x);
    let mut yh = DMatrix::<f64>::zeros(n, cout);
    for (r, &lam) in eig.eigenvalues.iter().enumerate() {
        let mut t = vec![1.0, lam];
        for kk in 2..k {
            t.push(2.0 * lam * t[kk - 1] - t[kk - 2]);
        }
        for c in 0..cout {
            let mut acc = 0.0;
            for (kk, tk) in t.iter().enumerate().take(k) {
                for ci in 0..cin {
                    acc += tk * xh[(r, ci)] * theta[[kk, ci, c]];
                }
            }
            yh[(r, c)] = acc;
        }
    }
    let y = u * yh;
    Array2::from_shape_fn((n, cout), |(i, c)| y[(i, c)])
}

#[test]
fn chebyshev_small_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_symmetric(&mut rng, 5);
    let lap = scaled_laplacian(&g).unwrap();
    let x = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0));
    let theta = Array3::from_shape_fn((1, 2, 3), |_| rng.random_range(-1.0..1.0));
    let y = cheb_filter(&lap, &theta, &x).unwrap();
    assert!(max_abs_diff(&y, &x.dot(&theta.index_axis(ndarray::Axis(0), 0))) < 1e-15);

    // Path graph on two nodes: L = [[1, -1], [-1, 1]], lambda_max = 2, L~ = [[0, -1], [-1, 0]].
    let p2 = Adjacency::new(GraphKind::Distance, Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
    let lap = scaled_laplacian(&p2).unwrap();
    assert!((lap.lambda_max - 2.0).abs() < 1e-9);
    let x = Array2::from_shape_vec((2, 1), vec![3.0, 5.0]).unwrap();
    let theta = Array3::from_shape_vec((2, 1, 1), vec![0.5, 2.0]).unwrap();
    let y = cheb_filter(&lap, &theta, &x).unwrap();
    // 0.5 x + 2 L~ x = [1.5 - 10, 2.5 - 6]
    assert!((y[[0, 0]] + 8.5).abs() < 1e-8);
    assert!((y[[1, 0]] + 3.5).abs() < 1e-8);
}

#[test]
fn complete_graph_eigenvalues() {
    let k3 = Adjacency::new(GraphKind::Distance, Array2::from_shape_fn((3, 3), |(i, j)| if i == j { 0.0 } else { 1.0 })).unwrap();
    let lap = scaled_laplacian(&k3).unwrap();
    let l = (&lap.l_tilde + &Array2::<f64>::eye(3)) * (lap.lambda_max / 2.0);
    let mut ev: Vec<f64> = to_na(&l).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    for (a, b) in ev.iter().zip([0.0, 1.5, 1.5]) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn directed_graphs_are_symmetrized_before_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let w = Array2::from_shape_fn((5, 5), |(i, j)| if i < j { rng.random_range(0.1..1.0) } else { 0.0 });
    let a = Adjacency::new(GraphKind::Learnable, w.clone()).unwrap();
    let sym = Adjacency::new(GraphKind::Distance, (&w + &w.t()) / 2.0).unwrap();
    let (la, ls) = (scaled_laplacian(&a).unwrap(), scaled_laplacian(&sym).unwrap());
    assert!(max_abs_diff(&la.l_tilde, &ls.l_tilde) < 1e-12);
}

#[test]
fn static_graph_files_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let ds = { let s = random_stations(&mut rng, 12); random_dataset(&mut rng, s, 40) };
    let cfg = GraphBuildConfig {
        neighbor: NeighborGraphConfig { n_adjacent: 4, mode: DistanceMode::GreatCircle },
        ..Default::default()
    };
    let set = build_static_graphs(&ds, &cfg).unwrap();
    assert_eq!(set.meta.pattern_factors_used, vec!["t", "hv2", "rh"]);
    let dir = tempfile::tempdir().unwrap();
    for name in ["g.json", "g.bin"] {
        let p = dir.path().join(name);
        save_graphs(&set, &p).unwrap();
        assert_eq!(load_graphs(&p).unwrap(), set);
    }
    let p = dir.path().join("g.bin");
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[1] ^= 0xff;
    std::fs::write(&p, &bytes).unwrap();
    assert!(load_graphs(&p).unwrap_err().is_validation());
}

#[test]
fn unavailable_pattern_factors_are_skipped() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let ds = { let s = random_stations(&mut rng, 5); random_dataset(&mut rng, s, 30) };
    let only_t = ds.select_factors(&["t"]).unwrap();
    let cfg = GraphBuildConfig {
        neighbor: NeighborGraphConfig { n_adjacent: 2, mode: DistanceMode::GreatCircle },
        ..Default::default()
    };
    let set = build_static_graphs(&only_t, &cfg).unwrap();
    assert_eq!(set.meta.pattern_factors_used, vec!["t"]);
    let rh = ds.select_factors(&["rh"]).unwrap();
    let none = GraphBuildConfig {
        pattern_factors: vec!["vv".into()],
        ..cfg
    };
    assert!(build_static_graphs(&rh, &none).is_err());
}

fn station_set() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 3usize..=50)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn static_graph_invariants((seed, n) in station_set()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stations = random_stations(&mut rng, n);
        let eps = 0.1;
        let ad = build_distance_graph(&stations, &DistanceGraphConfig::default()).unwrap();
        for i in 0..n {
            prop_assert_eq!(ad.weights[[i, i]], 0.0);
            for j in 0..n {
                let v = ad.weights[[i, j]];
                prop_assert_eq!(v, ad.weights[[j, i]]);
                prop_assert!(v == 0.0 || (eps..=1.0).contains(&v));
            }
        }
        let na = rng.random_range(1..n);
        let an = build_neighbor_graph(&stations, &NeighborGraphConfig { n_adjacent: na, mode: DistanceMode::GreatCircle }).unwrap();
        for (i, s) in an.row_sums().iter().enumerate() {
            prop_assert_eq!(*s, na as f64);
            prop_assert_eq!(an.weights[[i, i]], 0.0);
        }
        let ds = random_dataset(&mut rng, stations, 30);
        let ap = build_pattern_graph(&ds, &DEFAULT_PATTERN_FACTORS).unwrap().mean;
        prop_assert!(ap.is_symmetric(0.0));
        prop_assert!(ap.weights.iter().all(|v| (-1.0..=1.0).contains(v)));
        for i in 0..n {
            prop_assert_eq!(ap.weights[[i, i]], 0.0);
        }
    }

    #[test]
    fn learned_graphs_are_one_sided(seed in any::<u64>(), n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let l = LearnableGraphParams::init(&mut store, n, &LearnableGraphConfig::default(), &mut rng).unwrap();
        prop_assert!(l.eval(&store).unwrap().is_one_sided());
        let d = DynamicGraphParams::init(&mut store, 12, &DynamicGraphConfig::default(), &mut rng).unwrap();
        let window = Array3::from_shape_fn((n, 12, 1), |_| rng.random_range(-2.0..2.0));
        prop_assert!(d.eval(&store, &window).unwrap().is_one_sided());
    }

    #[test]
    fn fusion_is_linear(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 5;
        let graphs: Vec<Adjacency> = (0..3).map(|_| random_symmetric(&mut rng, n)).collect();
        let mut draw = || (0..3).map(|_| Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0))).collect::<Vec<_>>();
        let (w1, w2) = (draw(), draw());
        let sum: Vec<Array2<f64>> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let f = |w: &[Array2<f64>]| fuse_graphs(&w.iter().zip(&graphs).collect::<Vec<_>>()).unwrap().weights;
        let lhs = f(&sum);
        let rhs = f(&w1) + f(&w2);
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn chebyshev_matches_spectral_filtering(seed in any::<u64>(), n in 1usize..=8, k in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lap = scaled_laplacian(&random_symmetric(&mut rng, n)).unwrap();
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let theta = Array3::from_shape_fn((k, 3, 2), |_| rng.random_range(-1.0..1.0));
        let y = cheb_filter(&lap, &theta, &x).unwrap();
        prop_assert!(max_abs_diff(&y, &spectral_oracle(&lap.l_tilde, &theta, &x)) <= 1e-8);

        let tape = Tape::new();
        let lt = tape.constant(lap.l_tilde.clone().into_shape_with_order(IxDyn(&[1, n, n])).unwrap());
        let xt = tape.constant(x.clone().into_shape_with_order(IxDyn(&[1, n, 1, 3])).unwrap());
        let yt = cheb_filter_tape(&lt, &tape.constant(theta.clone().into_dyn()), &xt).unwrap().value();
        let yt = yt.into_shape_with_order((n, 2)).unwrap();
        prop_assert!(max_abs_diff(&yt, &y) <= 1e-12);
    }

    #[test]
    fn scaled_laplacian_spectrum_in_unit_interval(seed in any::<u64>(), n in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lap = scaled_laplacian(&random_symmetric(&mut rng, n)).unwrap();
        for ev in to_na(&lap.l_tilde).symmetric_eigen().eigenvalues.iter() {
            prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(ev), "eigenvalue {}", ev);
        }
    }
}
