mod common;

#[test]
fn analytic_matches_finite_differences_3_inputs() {
    for trial in 0..10 {
        let (err, checked, skipped) = common::gradient_check(3, trial);
        assert!(err < 1e-4, "trial {trial}: rel err {err}");
        assert!(checked > 10 * skipped, "trial {trial}: {checked} checked, {skipped} skipped");
    }
}

#[test]
fn analytic_matches_finite_differences_13_inputs() {
    for trial in 10..20 {
        let (err, checked, _) = common::gradient_check(13, trial);
        assert!(err < 1e-4, "trial {trial}: rel err {err}");
        assert!(checked > 1500);
    }
}
