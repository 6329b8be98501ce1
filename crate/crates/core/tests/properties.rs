use proptest::prelude::*;

use pmfuse_core::align::{aggregate, Aggregator, Cells, Observation};
use pmfuse_core::ingest::{read_mobile, ParseMode};
use pmfuse_core::learn::{fit_forest, fit_gbt, fit_tree, read_regressor, write_regressor, ForestParams, GbtParams, TreeParams};
use pmfuse_core::metrics::{self, PairedSeries};
use pmfuse_core::timefmt::format_utc;
use pmfuse_core::{Dataset, GeoPoint, GridSpec, LocalProjection, ProjectedPoint, Regressor};

fn grid() -> GridSpec {
    GridSpec::new(ProjectedPoint::new(-1000.0, -1000.0), 250.0, 8, 8).unwrap()
}

fn observations() -> impl Strategy<Value = Vec<Observation>> {
    proptest::collection::vec(
        (0i64..7200, -1200.0f64..1200.0, -1200.0f64..1200.0, 0.0f64..300.0),
        0..300,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(t, x, y, value)| Observation {
                t,
                pos: ProjectedPoint::new(x, y),
                value,
            })
            .collect()
    })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -20.0f64..20.0), 4..60).prop_map(|v| {
        let rows = v.iter().map(|r| vec![r.0, r.1]).collect();
        let y = v.iter().map(|r| r.0 * 3.0 - r.1 * r.1 + r.2).collect();
        Dataset::new(rows, y, vec!["a".into(), "b".into()]).unwrap()
    })
}

fn assert_same_samples(a: &[pmfuse_core::CellSample], b: &[pmfuse_core::CellSample]) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        prop_assert_eq!(&x.cell, &y.cell);
        prop_assert_eq!(x.time, y.time);
        prop_assert_eq!(x.n_mobile, y.n_mobile);
        prop_assert!((x.mean - y.mean).abs() <= 1e-9 * x.mean.abs().max(1.0));
        prop_assert_eq!((x.min, x.max), (y.min, y.max));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn split_streams_merge_to_the_single_pass(obs in observations(), cut in 0usize..300) {
        let cut = cut.min(obs.len());
        let mut a = Aggregator::new(Cells::Grid(grid()), 300).unwrap();
        let mut b = Aggregator::new(Cells::Grid(grid()), 300).unwrap();
        obs[..cut].iter().for_each(|o| a.push(*o));
        obs[cut..].iter().for_each(|o| b.push(*o));
        a.merge(b).unwrap();
        assert_same_samples(&a.finish(), &aggregate(&obs, &Cells::Grid(grid()), 300).unwrap())?;
    }

    #[test]
    fn coarsening_equals_direct_aggregation(obs in observations(), k in 1i64..12) {
        let mut fine = Aggregator::new(Cells::Grid(grid()), 300).unwrap();
        obs.iter().for_each(|o| fine.push(*o));
        let coarse = fine.coarsen(300 * k).unwrap().finish();
        assert_same_samples(&coarse, &aggregate(&obs, &Cells::Grid(grid()), 300 * k).unwrap())?;
    }

    #[test]
    fn buckets_account_for_every_in_grid_reading(obs in observations()) {
        let g = grid();
        let samples = aggregate(&obs, &Cells::Grid(g), 600).unwrap();
        let inside = obs.iter().filter(|o| g.cell_of(o.pos).is_some()).count() as u64;
        prop_assert_eq!(samples.iter().map(|s| s.n_mobile).sum::<u64>(), inside);
        for s in &samples {
            prop_assert!(s.min <= s.mean + 1e-9 && s.mean <= s.max + 1e-9);
            prop_assert_eq!(s.time.start % 600, 0);
        }
    }

    #[test]
    fn projection_round_trips(dlat in -0.2f64..0.2, dlon in -0.2f64..0.2) {
        let proj = LocalProjection::new(GeoPoint::new(23.1, 113.3).unwrap()).unwrap();
        let p = GeoPoint::new(23.1 + dlat, 113.3 + dlon).unwrap();
        let back = proj.unproject(proj.project(p).unwrap());
        prop_assert!((back.lat - p.lat).abs() < 1e-9 && (back.lon - p.lon).abs() < 1e-9);
    }

    #[test]
    fn pearson_ignores_positive_affine_maps(
        pairs in proptest::collection::vec((1.0f64..200.0, 1.0f64..200.0), 3..80),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let (y, h): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let s = PairedSeries::new(y.clone(), h.clone()).unwrap();
        let t = PairedSeries::new(y.iter().map(|v| a * v + b).collect(), h).unwrap();
        if let (Ok(r1), Ok(r2)) = (metrics::pearson_r(&s), metrics::pearson_r(&t)) {
            prop_assert!((r1 - r2).abs() < 1e-9);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r1));
        }
        prop_assert!(metrics::mae(&s) <= metrics::rmse(&s) + 1e-12);
    }

    #[test]
    fn tree_predictions_stay_within_the_target_range(d in dataset()) {
        let t = fit_tree(&d, &TreeParams::default());
        let lo = d.targets().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d.targets().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for x in [-10.0, -1.0, 0.0, 2.5, 10.0] {
            let p = t.predict_row(&[x, -x]);
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
        }
    }

    #[test]
    fn ensembles_survive_a_dump_round_trip(d in dataset(), seed in 0u64..1000) {
        let names = vec!["a".to_string(), "b".to_string()];
        let forest = Regressor::Forest(fit_forest(&d, &ForestParams { n_trees: 8, seed, ..Default::default() }));
        let gbt = Regressor::Gbt(fit_gbt(&d, &GbtParams { n_trees: 10, seed, ..Default::default() }));
        for r in [forest, gbt] {
            let mut buf = Vec::new();
            write_regressor(&mut buf, &r, &names).unwrap();
            let (back, back_names) = read_regressor(buf.as_slice(), "dump").unwrap();
            prop_assert_eq!(&back_names, &names);
            prop_assert_eq!(back.predict(&d), r.predict(&d));
            prop_assert_eq!(back.gain_table().unwrap(), r.gain_table().unwrap());
        }
    }

    #[test]
    fn mobile_csv_round_trips(rows in proptest::collection::vec(
        (0i64..86_400 * 30, -0.3f64..0.3, -0.3f64..0.3, 0.0f64..500.0, 0.0f64..100.0, -10.0f64..60.0), 0..40)
    ) {
        let t0 = 1_677_628_800;
        let mut text = String::from("device_id,timestamp,lat,lon,pm25,rh,temp\n");
        for (i, r) in rows.iter().enumerate() {
            text.push_str(&format!(
                "T{},{},{},{},{},{},{}\n",
                i % 3,
                format_utc(t0 + r.0),
                23.1 + r.1,
                113.3 + r.2,
                r.3,
                r.4,
                r.5
            ));
        }
        let mut got = Vec::new();
        let report = read_mobile(text.as_bytes(), "m.csv", ParseMode::Strict, |r| got.push(r)).unwrap();
        prop_assert_eq!(report.rows_kept as usize, rows.len());
        for (g, r) in got.iter().zip(&rows) {
            prop_assert_eq!(g.t, t0 + r.0);
            prop_assert_eq!((g.pos.lat, g.pos.lon, g.pm25_raw), (23.1 + r.1, 113.3 + r.2, r.3));
        }
    }
}
