use chrono::NaiveDate;
use ndarray::{s, Array3};
use proptest::prelude::*;

use mfmgcn::data::*;
use mfmgcn::Error;

const CODE: f64 = 999_999.0;

fn t0() -> chrono::NaiveDateTime {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

fn stations(n: usize) -> Vec<StationMeta> {
    (0..n)
        .map(|i| StationMeta::new(format!("S{i:02}"), 30.0 + i as f64 * 0.3, 110.0 + (i % 3) as f64 * 0.4, 100.0).unwrap())
        .collect()
}

fn smooth(n: usize, t: usize, d: usize) -> Array3<f64> {
    Array3::from_shape_fn((n, t, d), |(i, k, f)| {
        10.0 * f as f64 + i as f64 + (k as f64 * 0.26).sin() * (1.0 + 0.1 * i as f64)
    })
}

fn dataset(values: Array3<f64>, mask: Array3<bool>, factors: &[&str]) -> WeatherSeriesDataset {
    let n = values.dim().0;
    WeatherSeriesDataset::new(
        stations(n),
        factors.iter().map(|f| f.to_string()).collect(),
        values,
        mask,
        t0(),
    )
    .unwrap()
}

fn set_missing(v: &mut Array3<f64>, m: &mut Array3<bool>, i: usize, k: usize, f: usize) {
    v[[i, k, f]] = f64::NAN;
    m[[i, k, f]] = false;
}

/// Ten stations over 100 steps with three factors; each station exercises one
/// rule of the screening at the 1% limit.
fn screening_fixture() -> WeatherSeriesDataset {
    let (n, t, d) = (10, 100, 3);
    let mut v = smooth(n, t, d);
    let mut m = Array3::from_elem((n, t, d), true);
    // S01: one missing step, exactly at the limit.
    set_missing(&mut v, &mut m, 1, 40, 0);
    // S02: two missing steps.
    set_missing(&mut v, &mut m, 2, 10, 0);
    set_missing(&mut v, &mut m, 2, 11, 0);
    // S03: two missing cells sharing one step count once.
    set_missing(&mut v, &mut m, 3, 50, 0);
    set_missing(&mut v, &mut m, 3, 50, 2);
    // S04: two missing cells on different steps and factors.
    set_missing(&mut v, &mut m, 4, 20, 1);
    set_missing(&mut v, &mut m, 4, 70, 2);
    // S05: 3% defaults in the third factor.
    for k in [5, 6, 7] {
        v[[5, k, 2]] = CODE;
    }
    // S06: one default, kept and masked.
    v[[6, 33, 1]] = CODE;
    // S07: only the second factor breaches.
    v[[7, 60, 1]] = CODE;
    v[[7, 61, 1]] = CODE;
    v[[7, 62, 0]] = CODE;
    // S08: one missing and one default on different steps.
    set_missing(&mut v, &mut m, 8, 30, 0);
    v[[8, 80, 2]] = CODE;
    // S09: leading gap.
    set_missing(&mut v, &mut m, 9, 0, 1);
    dataset(v, m, &["t", "rh", "vv"])
}

/// Interpolates each gap by scanning outward for the nearest observed cells.
fn interpolation_oracle(ds: &WeatherSeriesDataset) -> Array3<f64> {
    let (n, t, d) = ds.values.dim();
    let mut out = ds.values.clone();
    for i in 0..n {
        for f in 0..d {
            for k in 0..t {
                if ds.mask[[i, k, f]] {
                    continue;
                }
                let left = (0..k).rev().find(|&j| ds.mask[[i, j, f]]);
                let right = (k + 1..t).find(|&j| ds.mask[[i, j, f]]);
                out[[i, k, f]] = match (left, right) {
                    (Some(a), Some(b)) => {
                        let (va, vb) = (ds.values[[i, a, f]], ds.values[[i, b, f]]);
                        va * (b - k) as f64 / (b - a) as f64 + vb * (k - a) as f64 / (b - a) as f64
                    }
                    (Some(a), None) => ds.values[[i, a, f]],
                    (None, Some(b)) => ds.values[[i, b, f]],
                    (None, None) => panic!("fixture has an empty series"),
                };
            }
        }
    }
    out
}

fn ids(ds: &WeatherSeriesDataset) -> Vec<String> {
    ds.stations.iter().map(|s| s.station_id.clone()).collect()
}

#[test]
fn screening_fixture_drops_exactly_the_expected_stations() {
    let ds = screening_fixture();
    let (after_missing, rep) = screen_missing(&ds, 0.01).unwrap();
    assert_eq!(rep.dropped, vec!["S02", "S04"]);
    let (after_defaults, rep) = screen_defaults(&after_missing, &DefaultCodes::weather2k(), 0.01).unwrap();
    assert_eq!(rep.dropped, vec!["S05", "S07"]);
    let s07 = rep.stations.iter().find(|s| s.station_id == "S07").unwrap();
    assert_eq!(s07.factor.as_deref(), Some("rh"));
    assert_eq!(ids(&after_defaults), ["S00", "S01", "S03", "S06", "S08", "S09"]);

    let filled = interpolate_linear(&after_defaults).unwrap();
    assert!(filled.is_complete());
    let oracle = interpolation_oracle(&after_defaults);
    let worst = filled
        .values
        .iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-12, "max deviation {worst}");

    let (again, report) = preprocess(&ds, &DefaultCodes::weather2k(), 0.01, 0.01).unwrap();
    assert_eq!(again, filled);
    assert_eq!(report.stations_in, 10);
    assert_eq!(report.stations_out, 6);
    // S01, S03 (two cells), S06, S08 (two cells), S09.
    assert_eq!(report.cells_interpolated, 7);
}

#[test]
fn one_default_in_two_hundred_is_masked_not_dropped() {
    let mut v = smooth(2, 200, 1);
    v[[0, 17, 0]] = CODE;
    let ds = dataset(v, Array3::from_elem((2, 200, 1), true), &["vv"]);
    let (out, rep) = screen_defaults(&ds, &DefaultCodes::weather2k(), 0.01).unwrap();
    assert!(rep.dropped.is_empty());
    assert!(!out.mask[[0, 17, 0]]);
    assert!(out.values[[0, 17, 0]].is_nan());
}

#[test]
fn missing_default_code_is_a_config_error() {
    let ds = dataset(smooth(1, 10, 1), Array3::from_elem((1, 10, 1), true), &["t"]);
    let err = screen_defaults(&ds, &DefaultCodes::empty(), 0.01).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

fn series(vals: &[Option<f64>]) -> WeatherSeriesDataset {
    let t = vals.len();
    let v = Array3::from_shape_fn((1, t, 1), |(_, k, _)| vals[k].unwrap_or(f64::NAN));
    let m = Array3::from_shape_fn((1, t, 1), |(_, k, _)| vals[k].is_some());
    dataset(v, m, &["t"])
}

#[test]
fn midpoint_and_edge_fill() {
    let out = interpolate_linear(&series(&[Some(1.0), None, Some(3.0)])).unwrap();
    assert_eq!(out.values.as_slice().unwrap(), &[1.0, 2.0, 3.0]);
    let out = interpolate_linear(&series(&[None, Some(5.0), Some(7.0)])).unwrap();
    assert_eq!(out.values.as_slice().unwrap(), &[5.0, 5.0, 7.0]);
    let out = interpolate_linear(&series(&[Some(4.0), None, None])).unwrap();
    assert_eq!(out.values.as_slice().unwrap(), &[4.0, 4.0, 4.0]);
}

#[test]
fn series_with_no_observation_is_unfillable() {
    let err = interpolate_linear(&series(&[None, None])).unwrap_err();
    assert!(matches!(err, Error::Unfillable { .. }));
}

#[test]
fn boxplot_quantiles_and_outliers() {
    let v: Vec<f64> = (1..=100).map(f64::from).collect();
    let b = boxplot_stats(&v).unwrap();
    assert_eq!(b.q1, 25.75);
    assert_eq!(b.q3, 75.25);
    assert!(b.outlier_indices.is_empty());

    let b = boxplot_stats(&[3.0; 9]).unwrap();
    assert_eq!(b.q3 - b.q1, 0.0);
    assert_eq!((b.lower_whisker, b.upper_whisker), (3.0, 3.0));
    assert!(b.outlier_indices.is_empty());

    let mut v: Vec<f64> = (1..=20).map(f64::from).collect();
    v.push(1000.0);
    assert_eq!(boxplot_stats(&v).unwrap().outlier_indices, vec![20]);
}

#[test]
fn normalization_round_trip_and_train_only_stats() {
    // Linear drift: statistics fitted on the early part leave later parts off-centre.
    let v = Array3::from_shape_fn((3, 120, 2), |(i, k, f)| k as f64 * 0.5 + i as f64 + f as f64 * 7.0 + (k as f64).sin());
    let ds = dataset(v, Array3::from_elem((3, 120, 2), true), &["t", "rh"]);
    let (train, val, _) = split_temporal(&ds, &SplitScheme::default()).unwrap();
    let stats = fit_norm_stats(&train).unwrap();
    let nt = normalize(&train, &stats).unwrap();
    let nv = normalize(&val, &stats).unwrap();
    assert!(nt.values.slice(s![.., .., 0]).mean().unwrap().abs() < 1e-12);
    assert!(nv.values.slice(s![.., .., 0]).mean().unwrap() > 1.0);
    let back = denormalize(&nv, &stats).unwrap();
    let worst = back.values.iter().zip(val.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-12);
}

#[test]
fn zero_variance_names_the_factor() {
    let mut v = smooth(2, 30, 2);
    v.slice_mut(s![.., .., 1]).fill(4.0);
    let ds = dataset(v, Array3::from_elem((2, 30, 2), true), &["t", "rh"]);
    match fit_norm_stats(&ds).unwrap_err() {
        Error::ZeroVariance { factor, .. } => assert_eq!(factor, "rh"),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn window_counts() {
    assert_eq!(make_windows(30, 12, 12, 1).unwrap().len(), 7);
    assert!(make_windows(20, 12, 12, 1).unwrap().is_empty());
    let w = make_windows(72, 12, 12, 24).unwrap();
    assert!(w.origins.windows(2).all(|p| p[1] - p[0] == 24));
}

#[test]
fn windows_never_straddle_split_boundaries() {
    let v = Array3::from_shape_fn((1, 60, 1), |(_, k, _)| k as f64);
    let ds = dataset(v, Array3::from_elem((1, 60, 1), true), &["t"]);
    let ranges = SplitScheme::default().ranges(60).unwrap();
    let parts = split_temporal(&ds, &SplitScheme::default()).unwrap();
    for (part, range) in [(&parts.0, &ranges.train), (&parts.1, &ranges.val), (&parts.2, &ranges.test)] {
        for (w_in, w_out) in [(1, 1), (3, 2), (6, 6)] {
            let w = make_windows(part.n_steps(), w_in, w_out, 1).unwrap();
            let b = WindowBatch::gather(part, &w.origins, w_in, w_out).unwrap();
            // Values are global step indices, so every cell must lie in the range.
            for x in b.inputs.iter().chain(b.targets.iter()) {
                assert!(range.contains(&(*x as usize)));
            }
            let expected = (part.n_steps() + 1).saturating_sub(w_in + w_out);
            assert_eq!(w.len(), expected);
        }
    }
}

#[test]
fn splits_partition_the_timeline() {
    for t in [6, 17, 600, 1001] {
        let r = SplitScheme::Ratio([3, 1, 2]).ranges(t).unwrap();
        assert_eq!(r.train.start, 0);
        assert_eq!(r.train.end, r.val.start);
        assert_eq!(r.val.end, r.test.start);
        assert_eq!(r.test.end, t);
    }
}

#[test]
fn synthetic_is_deterministic_and_spatially_correlated() {
    let cfg = SynthConfig {
        n_stations: 12,
        n_steps: 800,
        n_factors: 2,
        seed: 3,
        ..Default::default()
    };
    let a = generate_synthetic(&cfg).unwrap();
    let b = generate_synthetic(&cfg).unwrap();
    assert_eq!(a, b);

    let dm = mfmgcn::geo::distance_matrix(&a.stations, mfmgcn::geo::DistanceMode::GreatCircle);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..12 {
        for j in i + 1..12 {
            pairs.push((dm[[i, j]], i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let pearson = |i: usize, j: usize| {
        let x = a.values.slice(s![i, .., 0]);
        let y = a.values.slice(s![j, .., 0]);
        let (mx, my) = (x.mean().unwrap(), y.mean().unwrap());
        let cov: f64 = x.iter().zip(y.iter()).map(|(p, q)| (p - mx) * (q - my)).sum();
        let vx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    };
    let (_, ni, nj) = pairs[0];
    let (_, fi, fj) = pairs[pairs.len() - 1];
    assert!(pearson(ni, nj) > pearson(fi, fj));
}

#[test]
fn noiseless_synthetic_is_daily_periodic() {
    let cfg = SynthConfig {
        n_stations: 3,
        n_steps: 240,
        n_factors: 1,
        noise_amplitude: 0.0,
        white_noise: 0.0,
        seasonal_amplitude: 0.0,
        ..Default::default()
    };
    let ds = generate_synthetic(&cfg).unwrap();
    for i in 0..3 {
        for k in 24..240 {
            assert!((ds.values[[i, k, 0]] - ds.values[[i, k - 24, 0]]).abs() < 1e-9);
        }
    }
}

#[test]
fn packed_and_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let ds = screening_fixture();
    let p = dir.path().join("d.w2kt");
    write_packed(&ds, &p).unwrap();
    let back = read_packed(&p).unwrap();
    assert_eq!(ids(&back), ids(&ds));
    assert_eq!(back.mask, ds.mask);
    for (a, b) in back.values.iter().zip(ds.values.iter()) {
        assert!(a == b || (a.is_nan() && b.is_nan()));
    }

    let clean = preprocess(&ds, &DefaultCodes::weather2k(), 0.01, 0.01).unwrap().0;
    let csv_dir = dir.path().join("csv");
    std::fs::create_dir_all(&csv_dir).unwrap();
    write_csv_dir(&clean, &csv_dir).unwrap();
    let back = read_csv_dir(&csv_dir, &DefaultCodes::weather2k()).unwrap();
    assert_eq!(back.values, clean.values);
    assert_eq!(back.stations, clean.stations);
}

#[test]
fn corrupted_packed_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.w2kt");
    write_packed(&screening_fixture(), &p).unwrap();
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[0] = b'X';
    std::fs::write(&p, bytes).unwrap();
    assert!(read_packed(&p).unwrap_err().is_validation());
}

fn gappy() -> impl Strategy<Value = WeatherSeriesDataset> {
    (2usize..5, 8usize..40, 1usize..3).prop_flat_map(|(n, t, d)| {
        (
            proptest::collection::vec(-50.0f64..50.0, n * t * d),
            proptest::collection::vec(proptest::bool::weighted(0.85), n * t * d),
        )
            .prop_map(move |(vals, obs)| {
                let mut m = Array3::from_shape_vec((n, t, d), obs).unwrap();
                // Keep one observation per series so every gap is fillable.
                for i in 0..n {
                    for f in 0..d {
                        m[[i, 0, f]] = true;
                    }
                }
                let v = Array3::from_shape_fn((n, t, d), |ix| if m[ix] { vals[ix.0 * t * d + ix.1 * d + ix.2] } else { f64::NAN });
                let factors: Vec<&str> = ["t", "rh"][..d].to_vec();
                dataset(v, m, &factors)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolation_keeps_observed_cells(ds in gappy()) {
        let out = interpolate_linear(&ds).unwrap();
        for ((v, m), o) in ds.values.iter().zip(ds.mask.iter()).zip(out.values.iter()) {
            if *m {
                prop_assert_eq!(v, o);
            }
        }
        let oracle = interpolation_oracle(&ds);
        for (a, b) in out.values.iter().zip(oracle.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn pipeline_is_idempotent(ds in gappy()) {
        let codes = DefaultCodes::weather2k();
        if let Ok((once, _)) = preprocess(&ds, &codes, 0.2, 0.01) {
            let (twice, _) = preprocess(&once, &codes, 0.2, 0.01).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
