mod common;

use ocon_core::metrics::{confusion, det_curve, det_err_rates, prf1, roc_auc};

#[test]
fn counts_and_rates_match_brute_force() {
    for trial in 0..300 {
        let (p, y) = common::fuzz_scores(trial, 2 + (trial as usize % 60));
        for threshold in [0.0, 0.25, 0.5, 0.95, 1.0 + 1e-9] {
            let c = confusion(&p, &y, threshold).unwrap();
            assert_eq!(c, common::brute_confusion(&p, &y, threshold));
            assert_eq!(c.total(), p.len());
            let m = prf1(&c);
            let correct = p.iter().zip(&y).filter(|(&pi, &yi)| (pi >= threshold) == yi).count();
            assert_eq!(m.accuracy.value, correct as f64 / p.len() as f64);
            let r = det_err_rates(&c);
            assert!((r.er.value + m.accuracy.value - 1.0).abs() < 1e-12);
            if c.tn + c.fn_ > 0 {
                assert!((r.npv.value + r.for_.value - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn auc_equals_pair_statistic() {
    for trial in 0..300 {
        let (p, y) = common::fuzz_scores(10_000 + trial, 200);
        let (curve, auc) = roc_auc(&p, &y).unwrap();
        assert!((auc - common::pair_auc(&p, &y)).abs() <= 1e-9, "trial {trial}");
        for w in curve.points.windows(2) {
            assert!(w[1].tpr >= w[0].tpr && w[1].fpr >= w[0].fpr);
            assert!(w[1].threshold < w[0].threshold);
        }
        let det = det_curve(&p, &y).unwrap();
        assert_eq!(det.len(), curve.points.len());
        assert_eq!((det[0].fpr, det[0].fnr), (0.0, 1.0));
        let last = det.last().unwrap();
        assert_eq!((last.fpr, last.fnr), (1.0, 0.0));
    }
}
