use pe3d_core::estimates::{
    check_growth_inequality, eta_partition, fit_growth_constant, gamma, DiagSample, GrowthParams,
    TrajectoryDiagnostics,
};
use pe3d_core::norms::NormReport;
use proptest::collection::vec;
use proptest::prelude::*;

fn trajectory() -> impl Strategy<Value = TrajectoryDiagnostics> {
    (vec((1e-3f64..0.3, 0.0f64..2.0), 2..80), 0.0f64..1.0).prop_map(|(rows, f)| {
        let mut t = 0.0;
        let samples = rows
            .into_iter()
            .map(|(dt, e2)| {
                t += dt;
                DiagSample {
                    t,
                    norms: NormReport { h2: e2 / 10.0, e2, j: 0.0, k: 0.0, kbar: 0.0 },
                    budget_slack: 0.0,
                }
            })
            .collect();
        TrajectoryDiagnostics::from_samples(samples, f).unwrap()
    })
}

proptest! {
    #[test]
    fn partition_covers_span_and_meets_its_conditions(d in trajectory(), eta in 1e-3f64..1.0) {
        let parts = eta_partition(&d, eta).unwrap();
        prop_assert_eq!(parts[0].start, 0);
        prop_assert_eq!(parts.last().unwrap().end, d.len() - 1);
        for w in parts.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }
        for p in &parts {
            let exact = d.integral_e2(p.start, p.end);
            prop_assert!((p.integral_e2 - exact).abs() <= 1e-12 * (1.0 + exact));
            if !p.degenerate {
                prop_assert!(p.t1 - p.t0 <= 1.0 + 1e-9);
                prop_assert!(p.integral_e2 <= eta * (1.0 + 1e-9));
            } else {
                prop_assert_eq!(p.end, p.start + 1);
            }
        }
    }

    #[test]
    fn fitted_constant_makes_the_inequality_hold(d in trajectory(), eta in 1e-3f64..1.0) {
        if let Ok(fit) = fit_growth_constant(&d, eta) {
            prop_assert!(fit.params.c.is_finite() && fit.params.c >= 0.0);
            if fit.violations == 0 {
                let (ok, total) = check_growth_inequality(&d, &fit.params).unwrap();
                prop_assert_eq!(ok, total);
            }
        }
    }

    #[test]
    fn gamma_is_monotone(y in 0.0f64..10.0, dy in 0.0f64..10.0, c in 0.0f64..1.0, f in 0.0f64..1.0) {
        let gp = GrowthParams { c, eta: 0.05, f_h2: f };
        let a = gamma(y, &gp).unwrap();
        let b = gamma(y + dy, &gp).unwrap();
        prop_assert!(a.value <= b.value);
        prop_assert!(a.value >= y + f);
    }
}
