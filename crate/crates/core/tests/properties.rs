//! Property-based invariants over randomized inputs.

use proptest::prelude::*;
use pspower::design::{power_at, sample_size, DesignInputs, Sidedness};
use pspower::propensity::{
    law_from_spec, overlap_from_beta, solve_beta, BetaPropensity, OverlapSpec, PropensitySolve,
};
use pspower::quadrature::QuadratureSettings;
use pspower::variance::{ate_variance_std, TiltingFunction};

fn design(r: f64, phi: f64, rho2: f64, tau_std: f64) -> DesignInputs {
    DesignInputs {
        alpha: 0.05,
        beta: 0.8,
        tau_std,
        sidedness: Sidedness::Two,
        estimand: TiltingFunction::Ate,
        overlap: OverlapSpec::new(r, phi).unwrap(),
        rho2,
        r2_bound: None,
        v0_override: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Any Beta score law maps to an overlap value the solver can invert
    /// back to the same overlap (the solver picks the high-concentration
    /// branch, so only phi itself round-trips, not (a, b)).
    #[test]
    fn overlap_round_trip(a in 0.3f64..40.0, b in 0.3f64..40.0) {
        let p = BetaPropensity::new(a, b).unwrap();
        let phi = overlap_from_beta(&p).unwrap();
        prop_assume!(phi < 1.0 - 1e-6);
        let spec = OverlapSpec::new(p.r(), phi).unwrap();
        match solve_beta(&spec, 1e-12) {
            Ok(PropensitySolve::Beta(q)) => {
                let back = overlap_from_beta(&q).unwrap();
                prop_assert!((back - phi).abs() < 1e-9, "phi {phi} came back as {back}");
                prop_assert!((q.r() - p.r()).abs() < 1e-12);
            }
            Ok(PropensitySolve::Degenerate) => prop_assert!(phi > 0.999),
            // Low-concentration laws can sit below the attainable minimum
            // of the solver's branch.
            Err(pspower::Error::InfeasibleOverlap { minimum, .. }) => {
                prop_assert!(phi < minimum + 1e-9)
            }
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error: {e}"))),
        }
    }

    /// The standardized variance decomposes exactly, the adjustment is
    /// non-negative, and the randomized-trial floor 1/(r(1-r)) holds.
    #[test]
    fn variance_decomposition(
        r in 0.25f64..0.75,
        phi in 0.78f64..0.999,
        rho2 in 0.0f64..0.5,
    ) {
        let ps = law_from_spec(
            &OverlapSpec::new(r, phi).unwrap(),
            1e-10,
            &QuadratureSettings::default(),
        ).unwrap();
        let v = ate_variance_std(&ps, rho2).unwrap();
        prop_assert!(v.v_adj >= -1e-12);
        prop_assert!((v.v_total - (v.v_sh + rho2 * v.v_adj)).abs() < 1e-9);
        prop_assert!(v.v_total >= 1.0 / (r * (1.0 - r)) - 1e-9);
    }

    /// sample_size is the smallest n meeting the power target, and power
    /// is monotone in n.
    #[test]
    fn size_inverts_power(
        r in 0.3f64..0.7,
        phi in 0.8f64..0.999,
        rho2 in 0.0f64..0.4,
        tau in 0.08f64..0.4,
    ) {
        let d = design(r, phi, rho2, tau);
        let res = sample_size(&d).unwrap();
        prop_assert!(power_at(&d, res.n).unwrap() >= 0.8 - 1e-12);
        prop_assert!(power_at(&d, res.n - 1).unwrap() < 0.8 + 1e-12);
        prop_assert!(power_at(&d, res.n + 50).unwrap() >= power_at(&d, res.n).unwrap());
    }

    /// Worse overlap never shrinks the required sample size.
    #[test]
    fn size_monotone_in_overlap(
        r in 0.3f64..0.7,
        lo in 0.8f64..0.9,
        bump in 0.01f64..0.09,
        rho2 in 0.0f64..0.3,
    ) {
        let n_lo = sample_size(&design(r, lo, rho2, 0.2)).unwrap().n;
        let n_hi = sample_size(&design(r, lo + bump, rho2, 0.2)).unwrap().n;
        prop_assert!(n_lo >= n_hi, "phi {lo} -> {n_lo}, phi {} -> {n_hi}", lo + bump);
    }

    /// Grid parser round-trips arbitrary comma lists.
    #[test]
    fn grid_parser_round_trip(vals in prop::collection::vec(-10.0f64..10.0, 1..8)) {
        let s = vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        let parsed = pspower::cli::parse_grid(&s).unwrap();
        prop_assert_eq!(parsed, vals);
    }
}
