use celm::hidden::{gen_cdelm, gen_cmelm, gen_cselm, gen_orthogonal_elm, gen_rselm, gen_selm};
use celm::{feature_map, generate, Dataset, Matrix, NodeSource, StrategyKind, StrategySpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dataset(rows: usize, cols: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..rows * cols)
        .map(|_| rng.random_range(-3.0..3.0))
        .collect();
    // Every class gets at least one row.
    let labels = (0..rows)
        .map(|i| {
            let c = if i < classes {
                i
            } else {
                rng.random_range(0..classes)
            };
            format!("c{c}")
        })
        .collect();
    Dataset::new(Matrix::from_vec(rows, cols, x).unwrap(), labels).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (5usize..60, 1usize..8, 2usize..6, any::<u64>())
        .prop_map(|(rows, cols, classes, seed)| random_dataset(rows, cols, classes, seed))
}

#[test]
fn orthogonal_blocks_are_orthonormal() {
    let (layer, prov) = gen_orthogonal_elm(4, 10, 3).unwrap();
    assert!(prov.iter().all(|s| *s == NodeSource::Orthogonal));
    let w = layer.weights();
    for block in (0..10).collect::<Vec<_>>().chunks(4) {
        for &i in block {
            for &j in block {
                let dot: f64 = (0..4).map(|r| w.get(r, i) * w.get(r, j)).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12, "columns {i},{j}: {dot}");
            }
        }
    }
    assert!((norm(layer.biases()) - 1.0).abs() < 1e-12);
}

#[test]
fn cmelm_splits_sum_and_difference_nodes() {
    let data = random_dataset(30, 3, 3, 9);
    let (_, prov) = gen_cmelm(&data, 7, 1, 1000).unwrap();
    assert!(prov[..4]
        .iter()
        .all(|s| matches!(s, NodeSource::ConstrainedSum(..))));
    assert!(prov[4..]
        .iter()
        .all(|s| matches!(s, NodeSource::Difference { .. })));
}

#[test]
fn identical_rows_exhaust_the_redraw_budget() {
    let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
    let data = Dataset::new(x, vec!["a".into(), "b".into()]).unwrap();
    assert!(gen_cdelm(&data, 3, 0, 10).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn difference_nodes_map_pairs_to_minus_one_and_one(data in dataset(), seed in any::<u64>()) {
        for gen in [gen_cdelm, gen_cmelm] {
            let (layer, prov) = gen(&data, 20, seed, 1000).unwrap();
            for (j, src) in prov.iter().enumerate() {
                if let NodeSource::Difference { from, to } = *src {
                    prop_assert_ne!(&data.labels()[from], &data.labels()[to]);
                    prop_assert!((layer.pre_activation(j, data.sample(from)) + 1.0).abs() <= 1e-9);
                    prop_assert!((layer.pre_activation(j, data.sample(to)) - 1.0).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn sample_based_weights_have_unit_norm(data in dataset(), seed in any::<u64>()) {
        for gen in [gen_selm, gen_cselm, gen_rselm, gen_cmelm] {
            let (layer, prov) = gen(&data, 15, seed, 1000).unwrap();
            for (j, src) in prov.iter().enumerate() {
                if !matches!(src, NodeSource::Difference { .. }) {
                    let n = norm(&layer.weight_column(j));
                    prop_assert!((n - 1.0).abs() <= 1e-9, "node {} norm {}", j, n);
                }
            }
        }
    }

    #[test]
    fn constrained_sums_stay_within_one_class(data in dataset(), seed in any::<u64>()) {
        let (_, prov) = gen_cselm(&data, 25, seed, 1000).unwrap();
        for src in prov {
            match src {
                NodeSource::ConstrainedSum(a, b) => {
                    prop_assert_eq!(&data.labels()[a], &data.labels()[b]);
                }
                other => prop_assert!(false, "unexpected source {:?}", other),
            }
        }
    }

    #[test]
    fn generation_is_deterministic(data in dataset(), seed in any::<u64>(), k in 0usize..7) {
        let spec = StrategySpec::new(StrategyKind::ALL[k], seed);
        let (a, pa) = generate(&spec, &data, 12).unwrap();
        let (b, pb) = generate(&spec, &data, 12).unwrap();
        prop_assert_eq!(a.weights().as_slice(), b.weights().as_slice());
        prop_assert_eq!(a.biases(), b.biases());
        prop_assert_eq!(pa, pb);
    }

    #[test]
    fn feature_map_stays_inside_open_interval(seed in any::<u64>(), k in 0usize..7) {
        // Unit-scale inputs keep every pre-activation well inside the range where
        // the sigmoid is not rounded to 0 or 1.
        let data = random_dataset(40, 3, 3, seed);
        let scaled = data.features().as_slice().iter().map(|v| v / 3.0).collect();
        let data = data.with_features(Matrix::from_vec(40, 3, scaled).unwrap()).unwrap();
        let kind = StrategyKind::ALL[k];
        let (layer, _) = generate(&StrategySpec::new(kind, seed), &data, 10).unwrap();
        let h = feature_map(&layer, data.features()).unwrap();
        for v in h.as_slice() {
            prop_assert!(*v > 0.0 && *v < 1.0);
        }
    }
}
