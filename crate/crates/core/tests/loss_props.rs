use proptest::prelude::*;

use gazekit_core::geometry::SphericalGaze;
use gazekit_core::regressor::{mse_loss, mse_loss_grad, pinball_loss, pinball_loss_grad, pinball_term, TAU_HIGH, TAU_LOW};

fn pred() -> impl Strategy<Value = SphericalGaze> {
    (-3.0f64..3.0, -1.4f64..1.4, 0.0f64..1.0).prop_map(|(y, p, s)| SphericalGaze::with_sigma(y, p, s))
}

fn target() -> impl Strategy<Value = SphericalGaze> {
    (-3.0f64..3.0, -1.4f64..1.4).prop_map(|(y, p)| SphericalGaze::new(y, p))
}

/// Order-statistic τ-quantile: the smallest sample whose empirical CDF reaches τ.
fn empirical_quantile(sorted: &[f64], tau: f64) -> f64 {
    let k = ((tau * sorted.len() as f64).ceil() as usize).max(1);
    sorted[k - 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pinball_minimizer_is_the_empirical_quantile(
        mut ys in prop::collection::vec(-10.0f64..10.0, 5..60),
        tau in prop::sample::select(vec![TAU_LOW, 0.5, TAU_HIGH]),
    ) {
        ys.sort_by(f64::total_cmp);
        let risk = |c: f64| ys.iter().map(|y| pinball_term(y - c, tau)).sum::<f64>();
        let q = empirical_quantile(&ys, tau);
        // The risk is piecewise linear with breakpoints at the samples.
        for &c in &ys {
            prop_assert!(risk(q) <= risk(c) + 1e-9);
        }
    }

    #[test]
    fn losses_are_non_negative(p in pred(), g in target()) {
        prop_assert!(pinball_loss(&p, &g) >= 0.0);
        prop_assert!(mse_loss(&p, &g) >= 0.0);
    }

    #[test]
    fn pinball_gradient_matches_finite_differences(p in pred(), g in target()) {
        let h = 1e-6;
        let (l, d) = pinball_loss_grad(&p, &g);
        prop_assert!((l - pinball_loss(&p, &g)).abs() < 1e-15);
        let bump = |i: usize, s: f64| {
            let mut q = p;
            match i {
                0 => q.yaw += s,
                1 => q.pitch += s,
                _ => q.sigma = Some(q.sigma.unwrap() + s),
            }
            q
        };
        for (i, &di) in d.iter().enumerate() {
            let (lp, lm) = (pinball_loss(&bump(i, h), &g), pinball_loss(&bump(i, -h), &g));
            // Piecewise linear: a clean central difference means no kink in between.
            let one_sided = (lp - l) / h;
            if ((l - lm) / h - one_sided).abs() < 1e-6 {
                prop_assert!((di - one_sided).abs() < 1e-6, "component {i}: {di} vs {one_sided}");
            }
        }
    }

    #[test]
    fn mse_gradient_matches_finite_differences(p in pred(), g in target()) {
        let h = 1e-6;
        let (_, d) = mse_loss_grad(&p, &g);
        let mut yp = p;
        yp.yaw += h;
        let mut ym = p;
        ym.yaw -= h;
        let fd = (mse_loss(&yp, &g) - mse_loss(&ym, &g)) / (2.0 * h);
        // Skip the wrap seam where the residual jumps.
        if (fd - d[0]).abs() < 1.0 {
            prop_assert!((fd - d[0]).abs() < 1e-5);
        }
        prop_assert_eq!(d[2], 0.0);
    }
}
