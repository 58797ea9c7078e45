use proptest::prelude::*;
use r2unet::data::Sample;
use r2unet::metrics::{
    binarize, confusion, dice, dice_counts, evaluate_predictions, jaccard, jaccard_counts, roc_auc, scores, Averaging,
    EvalOptions,
};
use r2unet::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Hand {
    tp: u64,
    tn: u64,
    fp: u64,
    fn_: u64,
}

fn hand(pred: &[bool], gt: &[bool]) -> Hand {
    let mut h = Hand { tp: 0, tn: 0, fp: 0, fn_: 0 };
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (true, true) => h.tp += 1,
            (false, false) => h.tn += 1,
            (true, false) => h.fp += 1,
            (false, true) => h.fn_ += 1,
        }
    }
    h
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn as_f32(mask: &[bool]) -> Vec<f32> {
    mask.iter().map(|&b| b as u8 as f32).collect()
}

/// Tie-corrected pairwise statistic.
fn mann_whitney(scores: &[f32], gt: &[bool]) -> f64 {
    let pos: Vec<f32> = scores.iter().zip(gt).filter(|p| *p.1).map(|p| *p.0).collect();
    let neg: Vec<f32> = scores.iter().zip(gt).filter(|p| !*p.1).map(|p| *p.0).collect();
    let mut wins2: u64 = 0;
    for &p in &pos {
        for &n in &neg {
            wins2 += if p > n {
                2
            } else if p == n {
                1
            } else {
                0
            };
        }
    }
    wins2 as f64 / (2.0 * pos.len() as f64 * neg.len() as f64)
}

fn masks() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
    (1usize..64).prop_flat_map(|n| (prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n)))
}

fn scored() -> impl Strategy<Value = (Vec<f32>, Vec<bool>)> {
    (2usize..400).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..=16).prop_map(|q| q as f32 / 16.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1200))]

    #[test]
    fn counts_and_scores_match_hand_enumeration((pred, gt) in masks()) {
        let h = hand(&pred, &gt);
        let c = confusion(&as_f32(&pred), &as_f32(&gt), None).unwrap();
        prop_assert_eq!((c.tp, c.tn, c.fp, c.fn_), (h.tp, h.tn, h.fp, h.fn_));
        let s = scores(&c).unwrap();
        let n = pred.len() as f64;
        prop_assert_eq!(s.accuracy, (h.tp + h.tn) as f64 / n);
        prop_assert_eq!(s.sensitivity.value, ratio(h.tp, h.tp + h.fn_));
        prop_assert_eq!(s.specificity.value, ratio(h.tn, h.tn + h.fp));
        prop_assert_eq!(s.sensitivity.vacuous, h.tp + h.fn_ == 0);
        let inter = pred.iter().zip(&gt).filter(|(p, g)| **p && **g).count() as u64;
        let union = pred.iter().zip(&gt).filter(|(p, g)| **p || **g).count() as u64;
        let size = pred.iter().filter(|b| **b).count() as u64 + gt.iter().filter(|b| **b).count() as u64;
        let dc = dice(&as_f32(&gt), &as_f32(&pred)).unwrap();
        let js = jaccard(&as_f32(&gt), &as_f32(&pred)).unwrap();
        prop_assert_eq!(dc.value, ratio(2 * inter, size));
        prop_assert_eq!(js.value, ratio(inter, union));
        prop_assert_eq!(dc, dice_counts(&c));
        prop_assert_eq!(js, jaccard_counts(&c));
        prop_assert!((dc.value - 2.0 * js.value / (1.0 + js.value)).abs() <= 1e-12);
        prop_assert!((s.f1.value - dc.value).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn auc_matches_pairwise_oracle((s, g) in scored()) {
        let both = g.iter().any(|b| *b) && g.iter().any(|b| !*b);
        let got = roc_auc(&s, &as_f32(&g), None);
        if !both {
            prop_assert!(got.is_err());
            return Ok(());
        }
        let roc = got.unwrap();
        prop_assert!((roc.auc - mann_whitney(&s, &g)).abs() <= 1e-12);
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            prop_assert!(w[1].threshold < w[0].threshold);
        }
    }

    #[test]
    fn auc_invariant_under_increasing_transform((s, g) in scored()) {
        prop_assume!(g.iter().any(|b| *b) && g.iter().any(|b| !*b));
        let base = roc_auc(&s, &as_f32(&g), None).unwrap().auc;
        let warped: Vec<f32> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(roc_auc(&warped, &as_f32(&g), None).unwrap().auc, base);
    }

    #[test]
    fn all_metrics_invariant_under_pixel_permutation((s, g) in scored(), seed in any::<u64>()) {
        prop_assume!(g.iter().any(|b| *b) && g.iter().any(|b| !*b));
        let mut order: Vec<usize> = (0..s.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let ps: Vec<f32> = order.iter().map(|&i| s[i]).collect();
        let pg: Vec<bool> = order.iter().map(|&i| g[i]).collect();
        let b0 = binarize(&s, 0.5).unwrap();
        let b1 = binarize(&ps, 0.5).unwrap();
        prop_assert_eq!(confusion(&b0, &as_f32(&g), None).unwrap(), confusion(&b1, &as_f32(&pg), None).unwrap());
        prop_assert_eq!(roc_auc(&s, &as_f32(&g), None).unwrap().auc, roc_auc(&ps, &as_f32(&pg), None).unwrap().auc);
    }
}

#[test]
fn auc_matches_oracle_at_ten_thousand_pixels() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.3)).collect();
    let s: Vec<f32> = g
        .iter()
        .map(|&b| ((rng.random::<f32>() + if b { 0.4 } else { 0.0 }) * 64.0).round() / 64.0)
        .collect();
    let roc = roc_auc(&s, &as_f32(&g), None).unwrap();
    assert!((roc.auc - mann_whitney(&s, &g)).abs() <= 1e-12);
}

#[test]
fn pinned_examples() {
    // 4-pixel enumeration: pred 1100, gt 1010
    let c = confusion(&[1., 1., 0., 0.], &[1., 0., 1., 0.], None).unwrap();
    assert_eq!((c.tp, c.tn, c.fp, c.fn_), (1, 1, 1, 1));
    let s = scores(&c).unwrap();
    assert_eq!((s.accuracy, s.sensitivity.value, s.specificity.value, s.f1.value), (0.5, 0.5, 0.5, 0.5));

    // Two empty masks: vacuous overlap.
    let d = dice(&[0.; 9], &[0.; 9]).unwrap();
    assert!(d.vacuous && d.value == 1.0);
    let j = jaccard(&[0.; 9], &[0.; 9]).unwrap();
    assert!(j.vacuous && j.value == 1.0);

    assert_eq!(binarize(&[0.5, 0.4999, 1.0, 0.0], 0.5).unwrap(), vec![1., 0., 1., 0.]);
    assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1., 1., 0., 0.], None).unwrap().auc, 1.0);
    assert_eq!(roc_auc(&[0.5; 4], &[1., 0., 1., 0.], None).unwrap().auc, 0.5);
    let e = roc_auc(&[0.1, 0.2], &[1., 1.], None).unwrap_err();
    assert!(e.to_string().contains("AUC undefined"), "{e}");
    assert!(confusion(&[0.5], &[1.0], None).is_err());
    assert!(binarize(&[0.2], 1.5).is_err());
}

#[test]
fn fov_restricts_scoring() {
    let pred = [1., 1., 0., 0.];
    let gt = [1., 0., 0., 1.];
    let fov = [1., 1., 1., 0.];
    let c = confusion(&pred, &gt, Some(&fov)).unwrap();
    assert_eq!((c.tp, c.tn, c.fp, c.fn_), (1, 1, 1, 0));
}

fn sample(id: &str, mask: Vec<f32>, side: usize, fov: Option<Vec<f32>>) -> Sample {
    let shape = vec![1, 1, side, side];
    Sample::new(
        id,
        Tensor::zeros(shape.clone()),
        Tensor::new(shape.clone(), mask).unwrap(),
        fov.map(|f| Tensor::new(shape, f).unwrap()),
    )
    .unwrap()
}

#[test]
fn oracle_and_constant_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let masks: Vec<Vec<f32>> = (0..3).map(|_| (0..64).map(|_| rng.random_bool(0.3) as u8 as f32).collect()).collect();
    let samples: Vec<Sample> = masks.iter().enumerate().map(|(i, m)| sample(&format!("s{i}"), m.clone(), 8, None)).collect();

    let perfect: Vec<Tensor<f32>> = samples.iter().map(|s| s.mask.clone()).collect();
    let r = evaluate_predictions(&samples, &perfect, &EvalOptions::default()).unwrap();
    for v in [r.accuracy, r.sensitivity.value, r.specificity.value, r.f1.value, r.dice.value, r.jaccard.value] {
        assert_eq!(v, 1.0);
    }
    assert_eq!(r.auc, Some(1.0));

    // Constant 0.5 predicts all ones under the >= rule.
    let half: Vec<Tensor<f32>> = samples.iter().map(|s| Tensor::full(s.mask.shape().to_vec(), 0.5)).collect();
    let r = evaluate_predictions(&samples, &half, &EvalOptions::default()).unwrap();
    let fg: f64 = masks.iter().flatten().map(|&v| v as f64).sum::<f64>() / (3.0 * 64.0);
    assert!((r.accuracy - fg).abs() < 1e-12);
    assert_eq!(r.counts.tn, 0);
    assert_eq!(r.auc, Some(0.5));
}

#[test]
fn fov_reports_are_labelled() {
    let mut fov = vec![1.0; 16];
    fov[0] = 0.0;
    let mut mask = vec![0.0; 16];
    mask[5] = 1.0;
    let s = vec![sample("a", mask.clone(), 4, Some(fov))];
    let probs = vec![Tensor::new(vec![1, 1, 4, 4], mask).unwrap()];
    let on = evaluate_predictions(&s, &probs, &EvalOptions::default()).unwrap();
    let off_opts = EvalOptions {
        use_fov: false,
        ..Default::default()
    };
    let off = evaluate_predictions(&s, &probs, &off_opts).unwrap();
    assert!(on.fov_applied && !off.fov_applied);
    assert_eq!(on.counts.total(), 15);
    assert_eq!(off.counts.total(), 16);
    assert!(on.summary().starts_with("fov = on"));
    assert!(off.summary().starts_with("fov = off"));
}

#[test]
fn macro_averaging_and_csv() {
    let a = sample("a", vec![1., 0., 0., 0.], 2, None);
    let b = sample("b", vec![1., 1., 0., 0.], 2, None);
    let probs = vec![
        Tensor::new(vec![1, 1, 2, 2], vec![0.9, 0.9, 0.1, 0.1]).unwrap(),
        Tensor::new(vec![1, 1, 2, 2], vec![0.9, 0.9, 0.1, 0.1]).unwrap(),
    ];
    let opts = EvalOptions {
        averaging: Averaging::Macro,
        ..Default::default()
    };
    let r = evaluate_predictions(&[a, b], &probs, &opts).unwrap();
    // per-sample dice 2/3 and 1
    assert!((r.dice.value - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-12);
    let csv = r.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "id,tp,tn,fp,fn,ac,se,sp,f1,dc,js,auc");
    assert!(csv.lines().any(|l| l.starts_with("AGGREGATE")));
    assert_eq!(csv.lines().count(), 4);
}
