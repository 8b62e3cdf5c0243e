use gamc::gbt::{self, log_loss, SplitMode, TrainParams};
use gamc::lnt::{fit_ovr, select_subspaces, LntBlock, LntConfig, Standardizer};
use gamc::router::renormalize_without;
use gamc::scalar::softmax;
use gamc::{read_dataset, write_dataset, Dataset, IqFrame};
use ndarray::Array2;
use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize, d: usize, c: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<usize> = (0..n).map(|i| i % c).collect();
    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        let shift = if j % c == y[i] { 1.5 } else { 0.0 };
        shift + rng.random_range(-1.0..1.0)
    });
    (x, y)
}

fn small_params(seed: u64) -> TrainParams {
    TrainParams { n_estimators: 8, max_depth: 3, rng_seed: seed, ..TrainParams::expert_table() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn softmax_is_a_distribution(v in prop::collection::vec(-700.0f64..700.0, 1..20)) {
        let p = softmax(&v);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subspaces_are_nested_and_sized(imp in prop::collection::vec(0.0f64..10.0, 1..80)) {
        let sizes = [4, 8, 16, 32, 64];
        let spec = select_subspaces(&imp, &sizes).unwrap();
        for (k, idx) in spec.indices.iter().enumerate() {
            prop_assert_eq!(idx.len(), sizes[k].min(imp.len()));
            if k > 0 {
                prop_assert_eq!(&spec.indices[k - 1][..], &idx[..spec.indices[k - 1].len()]);
            }
            for w in idx.windows(2) {
                prop_assert!(imp[w[0]] >= imp[w[1]]);
            }
        }
    }

    #[test]
    fn standardizer_round_trips(rows in 2usize..20, cols in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::<f64>::from_shape_fn((rows, cols), |(_, j)| if j == 0 { 3.0 } else { rng.random_range(-50.0..50.0) });
        let s = Standardizer::fit(x.view()).unwrap();
        prop_assert_eq!(s.sigma[0], 1.0);
        for row in x.rows() {
            let r = row.to_vec();
            let back = s.invert(&s.apply(&r).unwrap());
            for (a, b) in r.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn renormalized_weights_sum_to_one(w in prop::collection::vec(0.0f64..1.0, 2..8), pick in any::<prop::sample::Index>()) {
        let i = pick.index(w.len());
        let r = renormalize_without(&w, i);
        prop_assert_eq!(r.len(), w.len() - 1);
        prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_format_round_trips(
        frames in prop::collection::vec((prop::collection::vec((-5.0f32..5.0, -5.0f32..5.0), 16), 0usize..11, -20i32..=18), 1..12)
    ) {
        let frames: Vec<IqFrame<f64>> = frames
            .into_iter()
            .map(|(s, l, snr)| IqFrame::new(s.into_iter().map(|(a, b)| Complex::new(f64::from(a), f64::from(b))).collect(), l, snr).unwrap())
            .collect();
        let ds = Dataset::new(frames, gamc::ModulationScheme::label_table(), "mem").unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back: Dataset<f64> = read_dataset(&buf[..], "mem").unwrap();
        prop_assert_eq!(back.frames, ds.frames);
        prop_assert_eq!(back.label_table, ds.label_table);
        for cut in [0, 3, buf.len() / 2, buf.len() - 1] {
            prop_assert!(read_dataset::<f64, _>(&buf[..cut], "mem").is_err());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn trees_respect_depth_and_child_weight(seed in any::<u64>(), depth in 1usize..5, mcw in 0.0f64..4.0) {
        let (x, y) = blobs(90, 4, 3, seed);
        let p = TrainParams { max_depth: depth, min_child_weight: mcw, ..small_params(seed) };
        let m = gbt::fit(x.view(), &y, 3, &p).unwrap();
        for t in m.trees() {
            prop_assert!(t.depth() <= depth);
            for node in &t.nodes {
                if let gbt::TreeNode::Leaf { cover, .. } = node {
                    if t.nodes.len() > 1 {
                        prop_assert!(*cover >= mcw);
                    }
                }
            }
        }
    }

    #[test]
    fn training_loss_does_not_increase_with_rounds(seed in any::<u64>()) {
        let (x, y) = blobs(80, 3, 3, seed);
        let base = TrainParams { subsample: 1.0, colsample_bytree: 1.0, gamma: 0.0, ..small_params(seed) };
        let mut last = f64::INFINITY;
        for rounds in [0, 2, 4, 8] {
            let m = gbt::fit(x.view(), &y, 3, &TrainParams { n_estimators: rounds, ..base.clone() }).unwrap();
            let l = log_loss(&m, x.view(), &y).unwrap();
            prop_assert!(l <= last + 1e-12);
            last = l;
        }
    }

    #[test]
    fn ovr_loss_does_not_increase(seed in any::<u64>()) {
        let (x, y) = blobs(60, 5, 3, seed);
        let s = Standardizer::fit(x.view()).unwrap();
        let z = s.apply_matrix(x.view());
        let fit = fit_ovr(z.view(), &y, 3, 1e-2, 60, 0.0, true);
        for w in fit.loss_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn lnt_ignores_row_order(seed in any::<u64>()) {
        let (x, y) = blobs(48, 6, 3, seed);
        let imp: Vec<f64> = (0..6).map(|j| (6 - j) as f64).collect();
        let cfg = LntConfig { sizes: vec![2, 4], folds: 3, max_iter: 50, ..LntConfig::default() };
        let a = LntBlock::fit(x.view(), &y, 3, &imp, &cfg).unwrap();
        let mut order: Vec<usize> = (0..48).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        let xs = x.select(ndarray::Axis(0), &order);
        let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
        let b = LntBlock::fit(xs.view(), &ys, 3, &imp, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn training_is_deterministic() {
    let (x, y) = blobs(120, 5, 4, 7);
    let p = TrainParams { subsample: 0.7, colsample_bytree: 0.6, ..small_params(3) };
    let a = gbt::fit(x.view(), &y, 4, &p).unwrap();
    let b = gbt::fit(x.view(), &y, 4, &p).unwrap();
    assert_eq!(a, b);
    for mode in [SplitMode::Histogram, SplitMode::Exact] {
        let q = TrainParams { split_mode: mode, ..p.clone() };
        assert_eq!(gbt::fit(x.view(), &y, 4, &q).unwrap(), gbt::fit(x.view(), &y, 4, &q).unwrap());
    }
}

#[test]
fn duplicated_feature_gets_importance_on_one_copy() {
    let (x0, y) = blobs(100, 2, 2, 11);
    let x = Array2::from_shape_fn((100, 3), |(i, j)| x0[[i, if j == 2 { 0 } else { j }]]);
    let p = TrainParams { subsample: 1.0, colsample_bytree: 1.0, ..small_params(0) };
    let m = gbt::fit(x.view(), &y, 2, &p).unwrap();
    let imp = m.importance_vector();
    assert!(imp[0] > 0.0);
    assert_eq!(imp[2], 0.0, "ties go to the lower index, so the copy never splits");
}

#[test]
fn zero_rounds_give_the_prior() {
    let y = vec![0, 0, 0, 1];
    let x = Array2::<f64>::zeros((4, 1));
    let m = gbt::fit(x.view(), &y, 2, &TrainParams { n_estimators: 0, ..TrainParams::default() }).unwrap();
    let p = m.predict_proba(&[0.0]).unwrap();
    assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
}
