mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use tensorda::eval::{
    a_distance, accuracy, class_divergence, train_classifier, ADistanceOptions, DiscrepancyReport, BETWEEN_CLASS_FLOOR,
};
use tensorda::Matrix;

fn cluster(r: &mut rand_chacha::ChaCha8Rng, n: usize, dim: usize, centre: f64) -> Matrix {
    let mut m = gaussian_matrix(r, n, dim);
    m.add_scalar_mut(centre);
    m
}

fn stack(a: &Matrix, b: &Matrix) -> Matrix {
    let mut m = Matrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.rows_mut(0, a.nrows()).copy_from(a);
    m.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    m
}

#[test]
fn identical_sets_are_indistinguishable() {
    let x = gaussian_matrix(&mut rng(1), 100, 5);
    let d = a_distance(&x, &x, &ADistanceOptions::default()).unwrap();
    assert!(d <= 0.2, "d_A = {d}");
}

#[test]
fn same_distribution_is_close_to_zero() {
    let mut r = rng(2);
    let a = gaussian_matrix(&mut r, 100, 5);
    let b = gaussian_matrix(&mut r, 100, 5);
    let d = a_distance(&a, &b, &ADistanceOptions::default()).unwrap();
    assert!(d <= 0.5, "d_A = {d}");
}

#[test]
fn separated_clusters_are_far_apart() {
    let mut r = rng(3);
    let a = cluster(&mut r, 100, 5, 0.0);
    let b = cluster(&mut r, 100, 5, 10.0 / 5f64.sqrt());
    let d = a_distance(&a, &b, &ADistanceOptions::default()).unwrap();
    assert!(d >= 1.9, "d_A = {d}");
}

#[test]
fn swapping_domains_gives_the_same_value() {
    let mut r = rng(4);
    for _ in 0..20 {
        let na = r.random_range(5..40);
        let nb = r.random_range(5..40);
        let dim = r.random_range(1..8);
        let shift = r.random_range(0.0..2.0);
        let a = gaussian_matrix(&mut r, na, dim);
        let b = cluster(&mut r, nb, dim, shift);
        let opts = ADistanceOptions {
            seed: r.random(),
            ..Default::default()
        };
        assert_eq!(a_distance(&a, &b, &opts).unwrap(), a_distance(&b, &a, &opts).unwrap());
    }
}

#[test]
fn a_distance_is_deterministic() {
    let mut r = rng(5);
    let a = gaussian_matrix(&mut r, 30, 4);
    let b = cluster(&mut r, 30, 4, 0.5);
    let opts = ADistanceOptions::default();
    assert_eq!(a_distance(&a, &b, &opts).unwrap(), a_distance(&a, &b, &opts).unwrap());
}

#[test]
fn discrepancies_stay_in_range_on_random_inputs() {
    let mut r = rng(6);
    for _ in 0..50 {
        let classes = r.random_range(2..5);
        let per = r.random_range(2..8);
        let dim = r.random_range(1..6);
        let n = classes * per;
        let scale = r.random_range(0.0..5.0);
        let mut feats = gaussian_matrix(&mut r, n, dim);
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        for (i, &l) in labels.iter().enumerate() {
            feats[(i, 0)] += scale * l as f64;
        }
        let other = &feats + gaussian_matrix(&mut r, n, dim).scale(r.random_range(0.0..1.0));
        let opts = ADistanceOptions {
            seed: r.random(),
            ..Default::default()
        };
        let d = a_distance(&feats, &other, &opts).unwrap();
        assert!((0.0..=2.0).contains(&d));
        let c = class_divergence(&feats, &labels, &other, &labels, &opts).unwrap();
        let report = DiscrepancyReport::new(d, c);
        for v in [report.d_a, report.d_a_w, report.d_a_b] {
            assert!((0.0..=2.0).contains(&v), "{report:?}");
        }
        assert!(report.j_s >= 0.0 && report.j_s.is_finite());
        assert_eq!(report.j_s, report.d_a_w / report.d_a_b.max(BETWEEN_CLASS_FLOOR));
    }
}

#[test]
fn unchanged_features_have_no_within_class_divergence() {
    let mut r = rng(7);
    let mut feats = gaussian_matrix(&mut r, 40, 3);
    let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
    for (i, &l) in labels.iter().enumerate() {
        feats[(i, 1)] += 6.0 * l as f64;
    }
    let c = class_divergence(&feats, &labels, &feats, &labels, &ADistanceOptions::default()).unwrap();
    assert!(c.d_a_w <= 0.2, "{c:?}");
    assert!(c.j_s <= 0.2, "{c:?}");
}

#[test]
fn collapsed_separated_classes_are_maximally_divergent() {
    let labels: Vec<usize> = (0..12).map(|i| i / 4).collect();
    let feats = Matrix::from_fn(12, 2, |i, j| {
        if j == 0 {
            10.0 * (i / 4) as f64
        } else {
            -3.0 * (i / 4) as f64
        }
    });
    let c = class_divergence(&feats, &labels, &feats, &labels, &ADistanceOptions::default()).unwrap();
    assert!(c.d_a_b >= 1.9, "{c:?}");
}

#[test]
fn zero_between_class_divergence_is_floored() {
    let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let same = Matrix::from_element(12, 2, 1.5);
    let other = Matrix::from_element(12, 2, -4.0);
    let c = class_divergence(&other, &labels, &same, &labels, &ADistanceOptions::default()).unwrap();
    assert_eq!(c.d_a_b, 0.0);
    assert!(c.j_s.is_finite());
    assert_eq!(c.j_s, c.d_a_w / BETWEEN_CLASS_FLOOR);
}

#[test]
fn classifier_ignores_duplication() {
    let mut r = rng(8);
    for (n, dim) in [(30, 4), (10, 25)] {
        let x = gaussian_matrix(&mut r, n, dim);
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let clf = train_classifier(&x, &labels, 1.0).unwrap();
        let doubled = stack(&x, &x);
        let doubled_labels: Vec<usize> = labels.iter().chain(&labels).copied().collect();
        let clf2 = train_classifier(&doubled, &doubled_labels, 1.0).unwrap();
        let probe = gaussian_matrix(&mut r, 20, dim);
        let diff = (clf.scores(&probe).unwrap() - clf2.scores(&probe).unwrap()).abs().max();
        assert!(diff <= 1e-10, "score drift {diff:e}");
    }
}

#[test]
fn relabelling_permutes_predictions() {
    let mut r = rng(9);
    let x = gaussian_matrix(&mut r, 40, 5);
    let labels: Vec<usize> = (0..40).map(|i| (i * 7) % 4).collect();
    let perm = [2, 0, 3, 1];
    let relabelled: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
    let probe = gaussian_matrix(&mut r, 25, 5);
    let p = train_classifier(&x, &labels, 1.0).unwrap().predict(&probe).unwrap();
    let q = train_classifier(&x, &relabelled, 1.0).unwrap().predict(&probe).unwrap();
    let mapped: Vec<usize> = p.iter().map(|&l| perm[l]).collect();
    assert_eq!(mapped, q);
}

#[test]
fn accuracy_examples() {
    let x = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 1.1, 0.1, -1.0, 0.0, -0.9, -0.1]);
    let labels = [0, 0, 1, 1];
    let clf = train_classifier(&x, &labels, 1e-3).unwrap();
    assert_eq!(accuracy(&clf, &x, &labels).unwrap(), 1.0);
    assert_eq!(accuracy(&clf, &x, &[1, 1, 0, 0]).unwrap(), 0.0);
    assert_eq!(accuracy(&clf, &x, &[0, 1, 0, 1]).unwrap(), 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn classifier_training_is_bitwise_deterministic(seed in any::<u64>(), n in 4usize..30, dim in 1usize..12) {
        let mut r = rng(seed);
        let x = gaussian_matrix(&mut r, n, dim);
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let a = train_classifier(&x, &labels, 1.0).unwrap();
        let b = train_classifier(&x, &labels, 1.0).unwrap();
        prop_assert_eq!(a.weights.as_slice(), b.weights.as_slice());
        prop_assert!(a.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn a_distance_is_clamped(seed in any::<u64>(), shift in -20.0f64..20.0) {
        let mut r = rng(seed);
        let a = gaussian_matrix(&mut r, 12, 3);
        let b = cluster(&mut r, 9, 3, shift);
        let d = a_distance(&a, &b, &ADistanceOptions::default()).unwrap();
        prop_assert!((0.0..=2.0).contains(&d));
    }
}
