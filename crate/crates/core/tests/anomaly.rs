mod common;

use common::Linear;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfanogan::anomaly::{
    anogan_score, detect, fanogan_score, fanogan_score_parts, fanogan_scores, ganomaly_losses, ganomaly_score,
    ganomaly_score_from_latents, normalize_scores, AnoganParams, AnomalyError, AnomalyScore, GanomalyWeights, Verdict,
};
use rfanogan::metrics::auroc;
use rfanogan::rfdata::IqFrame;
use rfanogan_autograd::Tensor;

fn t(shape: &[usize], v: &[f32]) -> Tensor {
    Tensor::new(shape, v.to_vec()).unwrap()
}

#[test]
fn fanogan_is_zero_under_perfect_reconstruction() {
    let shape = [1, 2, 8];
    let (g, e, d) = (Linear::identity(&shape), Linear::identity(&shape), Linear::identity(&shape));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::uniform(&[5, 1, 2, 8], -1.0, 1.0, &mut rng);
    for s in fanogan_scores(&x, &g, &e, &d, 1.0).unwrap() {
        assert!(s.abs() <= 1e-9);
    }
    let frame = IqFrame::new(8, x.data()[..16].to_vec()).unwrap();
    assert!(fanogan_score(&frame, &g, &e, &d, 1.0).unwrap().raw.abs() <= 1e-9);
}

#[test]
fn fanogan_is_positive_when_reconstruction_is_off() {
    let shape = [1, 2, 8];
    let (g, e, d) = (Linear::scaled(&shape, 0.5), Linear::identity(&shape), Linear::identity(&shape));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Tensor::uniform(&[4, 1, 2, 8], 0.5, 1.0, &mut rng);
    let s = fanogan_scores(&x, &g, &e, &d, 1.0).unwrap();
    // recon = x / 2 and features are the frames: mean (x/2)^2 twice
    for (i, si) in s.iter().enumerate() {
        let ms: f64 = x.data()[i * 16..(i + 1) * 16].iter().map(|&v| (v as f64 / 2.0).powi(2)).sum::<f64>() / 16.0;
        assert!((si - 2.0 * ms).abs() < 1e-6, "{si} vs {}", 2.0 * ms);
    }
}

#[test]
fn fanogan_hand_value() {
    let s = fanogan_score_parts(
        &t(&[1, 2], &[1.0, 0.0]),
        &t(&[1, 2], &[0.0, 0.0]),
        &t(&[1, 1], &[1.0]),
        &t(&[1, 1], &[0.0]),
        1.0,
    )
    .unwrap();
    assert!((s[0] - 1.5).abs() < 1e-12);
}

fn one_d() -> (Linear, Linear) {
    (Linear::identity(&[1]), Linear::identity(&[1]))
}

#[test]
fn anogan_without_feature_term_is_the_l1_residual() {
    let (g, d) = one_d();
    let p = AnoganParams { lambda: 1e-9, steps: 20, step_size: 0.01, seed: 4, backtracking: false };
    let r = anogan_score(&t(&[1, 1], &[0.3]), &g, &d, &p).unwrap();
    let residual = (0.3 - r.z_final.data()[0] as f64).abs();
    assert!((r.score.raw - residual).abs() <= 1e-6, "{} vs {residual}", r.score.raw);
}

#[test]
fn anogan_stops_at_an_exact_fit() {
    let (g, d) = one_d();
    let p = AnoganParams { seed: 9, ..AnoganParams::default() };
    let z1 = anogan_score(&t(&[1, 1], &[0.0]), &g, &d, &p).unwrap().z_init;
    let r = anogan_score(&z1, &g, &d, &p).unwrap();
    assert_eq!(r.score.raw, 0.0);
    assert_eq!(r.trace, vec![0.0]);
    assert_eq!(r.z_final, z1);
}

#[test]
fn anogan_converges_on_a_one_dimensional_generator() {
    let (g, d) = one_d();
    for seed in 0..5 {
        let p = AnoganParams { lambda: 0.1, steps: 200, step_size: 0.01, seed, backtracking: true };
        let r = anogan_score(&t(&[1, 1], &[0.3]), &g, &d, &p).unwrap();
        assert!(r.score.raw <= 1e-3, "seed {seed}: {}", r.score.raw);
    }
}

#[test]
fn anogan_trace_never_rises_with_backtracking() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Linear::new(&[3], &[6], Tensor::uniform(&[6, 3], -1.0, 1.0, &mut rng));
    let d = Linear::new(&[6], &[2], Tensor::uniform(&[2, 6], -1.0, 1.0, &mut rng));
    let x = Tensor::uniform(&[1, 6], -1.0, 1.0, &mut rng);
    let p = AnoganParams { lambda: 0.3, steps: 60, step_size: 0.2, seed: 1, backtracking: true };
    let a = anogan_score(&x, &g, &d, &p).unwrap();
    assert!(a.trace.windows(2).all(|w| w[1] <= w[0]), "{:?}", a.trace);
    assert!(*a.trace.last().unwrap() < a.trace[0]);
    assert_eq!(a, anogan_score(&x, &g, &d, &p).unwrap());
}

#[test]
fn anogan_rejects_bad_parameters() {
    let (g, d) = one_d();
    let x = t(&[1, 1], &[0.3]);
    let zero_steps = AnoganParams { steps: 0, ..AnoganParams::default() };
    assert!(matches!(anogan_score(&x, &g, &d, &zero_steps), Err(AnomalyError::Steps(0))));
    for lambda in [0.0, 1.0, -0.5] {
        let p = AnoganParams { lambda, ..AnoganParams::default() };
        assert!(matches!(anogan_score(&x, &g, &d, &p), Err(AnomalyError::Lambda(_))));
    }
}

#[test]
fn ganomaly_examples() {
    let w = GanomalyWeights::default();
    let l = ganomaly_losses(&[1.0, 0.0], &[0.0, 0.0], &[1.0], &[0.0], &[0.2], &[0.2], &w).unwrap();
    assert_eq!((l.adv, l.con, l.enc), (0.0, 1.0, 1.0));
    assert!((l.total - 0.95).abs() < 1e-12);
    let perfect = ganomaly_losses(&[1.0, 2.0], &[1.0, 2.0], &[3.0], &[3.0], &[4.0], &[4.0], &w).unwrap();
    assert_eq!((perfect.adv, perfect.con, perfect.enc, perfect.total), (0.0, 0.0, 0.0, 0.0));
    assert!(matches!(GanomalyWeights::new(0.5, 0.5, 0.5), Err(AnomalyError::Weights(..))));
    assert_eq!(ganomaly_score_from_latents(&[1.0, 1.0], &[0.0, 0.0]).unwrap().raw, 2.0);
}

#[test]
fn ganomaly_score_through_models() {
    let g_e = Linear::new(&[1, 2, 8], &[2], Tensor::ones(&[2, 16]));
    let g_d = Linear::new(&[2], &[1, 2, 8], Tensor::full(&[16, 2], 1.0 / 32.0));
    // e = g_e makes the two codes agree whenever g_d(g_e(x)) keeps the row sums
    let x = Tensor::ones(&[3, 1, 2, 8]);
    let s = ganomaly_score(&x, &g_e, &g_d, &g_e.clone()).unwrap();
    assert!(s.iter().all(|v| v.abs() < 1e-5), "{s:?}");
    let e = Linear::new(&[1, 2, 8], &[2], Tensor::zeros(&[2, 16]));
    let s = ganomaly_score(&x, &g_e, &g_d, &e).unwrap();
    // codes are 16 each, the zero encoder gives 0
    assert!(s.iter().all(|v| (v - 32.0).abs() < 1e-4));
}

#[test]
fn detection_sweep_traces_the_roc_curve() {
    let scores = [0.1, 0.4, 0.4, 0.35, 0.8, 0.05, 0.8, 0.6];
    let labels = [0, 0, 1, 1, 1, 0, 0, 1];
    let roc = auroc(&scores, &labels).unwrap();
    let lowest = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let (p, n) = (labels.iter().filter(|&&l| l == 1).count() as f64, labels.iter().filter(|&&l| l == 0).count() as f64);
    for i in 0..roc.thresholds.len() {
        // "at least thresholds[i]" equals "strictly above the next lower score"
        let tau = roc.thresholds.get(i + 1).copied().unwrap_or(lowest - 1.0);
        let mut tp = 0.0;
        let mut fp = 0.0;
        for (&s, &l) in scores.iter().zip(&labels) {
            if detect(AnomalyScore::new(s), tau).unwrap().verdict == Verdict::Outlier {
                if l == 1 {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        assert_eq!((tp / p, fp / n), (roc.tpr[i], roc.fpr[i]), "point {i}");
    }
}

#[test]
fn threshold_edges() {
    assert_eq!(detect(AnomalyScore::new(2.0), 2.0).unwrap().verdict, Verdict::Inlier);
    assert_eq!(detect(AnomalyScore::new(2.1), 2.0).unwrap().verdict, Verdict::Outlier);
    assert_eq!(detect(AnomalyScore::new(0.0), 0.5).unwrap().verdict, Verdict::Inlier);
    assert!(detect(AnomalyScore::new(1.0), f64::NAN).is_err());
}

#[test]
fn normalisation_examples() {
    let n = normalize_scores(&[1.0, 3.0, 5.0]).unwrap();
    let v: Vec<f64> = n.scores.iter().map(|s| s.normalized.unwrap()).collect();
    assert_eq!(v, vec![0.0, 0.5, 1.0]);
    assert!(!n.degenerate);
    let flat = normalize_scores(&[4.0; 3]).unwrap();
    assert!(flat.degenerate && flat.scores.iter().all(|s| s.normalized == Some(0.0)));
    assert!(matches!(normalize_scores(&[]), Err(AnomalyError::Empty)));
}

proptest! {
    #[test]
    fn normalisation_keeps_order_and_auroc(
        raw in prop::collection::vec(0.0f64..100.0, 2..60),
        labels in prop::collection::vec(0u8..2, 60),
    ) {
        let labels = &labels[..raw.len()];
        let n = normalize_scores(&raw).unwrap();
        let v: Vec<f64> = n.scores.iter().map(|s| s.normalized.unwrap()).collect();
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (i, &r) in raw.iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&v[i]));
            if r == lo { prop_assert_eq!(v[i], 0.0); }
            if r == hi && hi > lo { prop_assert_eq!(v[i], 1.0); }
            for (j, &q) in raw.iter().enumerate() {
                prop_assert_eq!(r.partial_cmp(&q), v[i].partial_cmp(&v[j]));
            }
        }
        if labels.contains(&0) && labels.contains(&1) {
            prop_assert_eq!(auroc(&raw, labels).unwrap().auroc, auroc(&v, labels).unwrap().auroc);
        }
    }

    #[test]
    fn ganomaly_total_is_linear_in_each_loss(
        x in prop::collection::vec(-5.0f64..5.0, 4),
        xh in prop::collection::vec(-5.0f64..5.0, 4),
        z in prop::collection::vec(-1.0f64..1.0, 2),
        zh in prop::collection::vec(-1.0f64..1.0, 2),
        wa in 0.0f64..0.5,
        we in 0.0f64..0.5,
    ) {
        let w = GanomalyWeights::new(wa, 1.0 - wa - we, we).unwrap();
        let f = [0.0, 1.0];
        let fh = [0.5, -1.0];
        let base = ganomaly_losses(&x, &xh, &z, &zh, &f, &fh, &w).unwrap();
        // Moving one input so exactly one loss changes gives a slope equal to its weight.
        let mut x2 = x.clone();
        x2[0] += if x[0] >= xh[0] { 1.0 } else { -1.0 };
        let con = ganomaly_losses(&x2, &xh, &z, &zh, &f, &fh, &w).unwrap();
        prop_assert!(((con.total - base.total) / (con.con - base.con) - w.w_con).abs() < 1e-9);
        let zh2: Vec<f64> = zh.iter().zip(&z).map(|(h, zi)| zi + 2.0 * (h - zi)).collect();
        let enc = ganomaly_losses(&x, &xh, &z, &zh2, &f, &fh, &w).unwrap();
        if (enc.enc - base.enc).abs() > 1e-6 {
            prop_assert!(((enc.total - base.total) / (enc.enc - base.enc) - w.w_enc).abs() < 1e-6);
        }
        let fh2 = [0.5 * 3.0, -3.0];
        let adv = ganomaly_losses(&x, &xh, &z, &zh, &f, &fh2, &w).unwrap();
        prop_assert!(((adv.total - base.total) / (adv.adv - base.adv) - w.w_adv).abs() < 1e-6);
        for l in [base.adv, base.con, base.enc, base.total] {
            prop_assert!(l >= 0.0);
        }
    }
}
