//! Randomized property checks over the public API: feasibility of the
//! trained multipliers, bounds on the projection quality, scoring
//! consistency, text round-trips, and generator invariants.

use proptest::prelude::*;

use svdd_core::datagen::{random_polygon, sample_polygon_interior, PolygonSpec};
use svdd_core::eval::summary_stats;
use svdd_core::io::{read_table, write_matrix_csv};
use svdd_core::landmarks::select_landmarks;
use svdd_core::spd::DEFAULT_RIDGE;
use svdd_core::svdd::{train_svdd, TrainConfig};
use svdd_core::trace::{psi_values, TraceContext};
use svdd_core::{Bandwidth, DataMatrix};

/// Random rows with a shared dimension; coordinates stay in a finite box.
fn rows(dim: std::ops::Range<usize>, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    dim.prop_flat_map(move |d| {
        proptest::collection::vec(proptest::collection::vec(-8.0..8.0f64, d), n.clone())
    })
}

proptest! {
    #[test]
    fn multipliers_form_a_boxed_simplex(
        data in rows(1..4, 4..16),
        f in 0.05..1.0f64,
        s in 0.3..3.0f64,
        seed in any::<u64>(),
    ) {
        let data = DataMatrix::from_rows(&data).unwrap();
        let n = data.n_rows();
        let model = train_svdd(
            &data,
            Bandwidth::new(s).unwrap(),
            &TrainConfig { f, seed, ..Default::default() },
        ).unwrap();
        let alpha = model.alpha().expect("fresh model keeps multipliers");
        let cap = model.cap();
        let sum: f64 = alpha.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9, "sum {sum}");
        for &a in alpha {
            prop_assert!(a >= 0.0 && a <= cap + 1e-12, "alpha {a} outside [0, {cap}]");
        }
        prop_assert!(model.support_count() >= 1);
        prop_assert!(model.support_count() <= n);
        prop_assert!(model.r_squared() >= 0.0);
    }

    #[test]
    fn projection_quality_stays_in_the_unit_interval(
        data in rows(1..3, 8..30),
        r in 1..4usize,
        s in 0.2..5.0f64,
        seed in any::<u64>(),
    ) {
        let data = DataMatrix::from_rows(&data).unwrap();
        let landmarks = select_landmarks(&data, r, seed).unwrap();
        let ctx = TraceContext::new(&data, &landmarks).unwrap();
        let values = psi_values(&ctx, Bandwidth::new(s).unwrap(), DEFAULT_RIDGE).unwrap();
        for v in values {
            prop_assert!((0.0..=1.0 + 1e-8).contains(&v), "psi {v}");
        }
    }

    #[test]
    fn batch_scoring_matches_single_scoring(
        train in rows(2..3, 5..12),
        probes in rows(2..3, 1..8),
        s in 0.4..2.5f64,
    ) {
        let train = DataMatrix::from_rows(&train).unwrap();
        let probes = DataMatrix::from_rows(&probes).unwrap();
        let model = train_svdd(
            &train,
            Bandwidth::new(s).unwrap(),
            &TrainConfig { f: 0.2, ..Default::default() },
        ).unwrap();
        let batch = model.score_batch(&probes).unwrap();
        for (i, row) in probes.rows().enumerate() {
            let single = model.score(row).unwrap();
            prop_assert_eq!(single.dist2.to_bits(), batch[i].dist2.to_bits());
            prop_assert_eq!(single.is_outlier, batch[i].is_outlier);
        }
    }

    #[test]
    fn matrix_csv_round_trips_exactly(data in rows(1..5, 1..20)) {
        let data = DataMatrix::from_rows(&data).unwrap();
        let text = write_matrix_csv(&data);
        let table = read_table(&text).unwrap();
        prop_assert_eq!(table.data.n_rows(), data.n_rows());
        prop_assert_eq!(table.data.dim(), data.dim());
        for (a, b) in data.as_slice().iter().zip(table.data.as_slice()) {
            // The writer prints shortest round-trip decimals, so parsing
            // recovers the exact bits.
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn five_number_summaries_are_ordered(
        values in proptest::collection::vec(-1e6..1e6f64, 1..50),
    ) {
        let s = summary_stats(&values).unwrap();
        prop_assert!(s.min <= s.q1);
        prop_assert!(s.q1 <= s.median);
        prop_assert!(s.median <= s.q3);
        prop_assert!(s.q3 <= s.max);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(s.min, lo);
        prop_assert_eq!(s.max, hi);
    }

    #[test]
    fn random_polygons_are_simple_and_contain_their_samples(
        vertices in 3..12usize,
        seed in any::<u64>(),
    ) {
        let poly = random_polygon(&PolygonSpec::new(vertices, seed)).unwrap();
        prop_assert_eq!(poly.vertices().len(), vertices);
        prop_assert!(poly.signed_area() > 0.0, "area {}", poly.signed_area());
        // Radial construction: every vertex radius lies in the configured
        // band and the first vertex sits on the positive x-axis.
        for v in poly.vertices() {
            let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
            prop_assert!((3.0 - 1e-9..=5.0 + 1e-9).contains(&r), "radius {r}");
        }
        let first = poly.vertices()[0];
        prop_assert!(first[1].abs() <= 1e-12 && first[0] >= 3.0 - 1e-9);
        let pts = sample_polygon_interior(&poly, 50, seed ^ 0x5bd1).unwrap();
        for row in pts.rows() {
            prop_assert!(poly.contains([row[0], row[1]]));
        }
    }
}
