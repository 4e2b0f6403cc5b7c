//! Property tests for the structural invariants: norm ordering, metric
//! domination, parity of the two branches, window monotonicity of the
//! count, and config round-trips.

use proptest::prelude::*;

use delay_morse::config::{
    ExperimentConfig, InitialProfile, IntegratorConfig, OutputConfig, ScanConfig, SystemConfig,
};
use delay_morse::kernel::KernelProfile;
use delay_morse::lyapunov::{count_sign_changes, v_signed};
use delay_morse::segment::Segment;
use delay_morse::system::Nonlinearity;
use delay_morse::{CyclicSystemSpec, DelayKernel, Delta};

fn segment_strategy() -> impl Strategy<Value = Segment> {
    (
        prop::collection::vec(-2.0f64..2.0, 8..40),
        prop::collection::vec(-3.0f64..3.0, 0..3),
        0.5f64..2.0,
    )
        .prop_map(|(values, discrete, r)| {
            let n = values.len();
            let slopes: Vec<f64> = values
                .windows(2)
                .map(|w| (w[1] - w[0]) / (r / (n as f64 - 1.0)))
                .chain(std::iter::once(0.0))
                .collect();
            let nd = discrete.len();
            Segment::new(values, slopes, discrete, r, nd).expect("finite inputs")
        })
}

proptest! {
    #[test]
    fn sup_norm_never_exceeds_c1_norm(seg in segment_strategy()) {
        let (sup, c1) = seg.norms();
        prop_assert!(sup <= c1);
    }

    /// C¹ convergence dominates sup convergence at the representation
    /// level: the C¹ distance bounds the sup distance for every pair.
    fn c1_distance_dominates_sup_distance(
        a in segment_strategy(),
        b in segment_strategy(),
    ) {
        prop_assume!(a.n_nodes() == b.n_nodes());
        prop_assume!(a.n_components() == b.n_components());
        prop_assume!((a.r() - b.r()).abs() < 1e-12);
        let sup = a.sup_distance(&b).unwrap();
        let c1 = a.c1_distance(&b).unwrap();
        prop_assert!(sup <= c1 + 1e-15);
    }

    #[test]
    fn parity_branches_differ_by_one(seg in segment_strategy(), a_frac in 0.01f64..0.99) {
        let a = -seg.r() * a_frac;
        if let Ok((vp, vm)) = v_signed(&seg, a) {
            prop_assert_eq!(vp % 2, 0);
            prop_assert_eq!(vm % 2, 1);
            prop_assert_eq!(vp.abs_diff(vm), 1);
            let sc = count_sign_changes(&seg, a).unwrap();
            prop_assert!(vp == sc || vp == sc + 1);
            prop_assert!(vm == sc || vm == sc + 1);
        }
    }

    /// Shrinking the window over nested node-aligned starts can only
    /// remove alternations. (Starts between nodes add one interpolated
    /// endpoint sample, whose overshoot can locally exceed the grid's
    /// resolution; the invariant is exact on node-aligned windows.)
    #[test]
    fn count_monotone_in_window(seg in segment_strategy()) {
        let mut prev = u32::MAX;
        let times: Vec<f64> = seg.times().to_vec();
        for &a in times.iter().take(times.len() - 1) {
            let c = count_sign_changes(&seg, a).unwrap();
            prop_assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn config_round_trips(
        gain in -4.0f64..-0.5,
        slope in 0.5f64..3.0,
        alpha0 in 1.0f64..1.5,
        seeds in 1usize..200,
        horizon in 10.0f64..600.0,
    ) {
        let config = ExperimentConfig {
            system: SystemConfig::Continuous {
                spec: CyclicSystemSpec::scalar(
                    Nonlinearity::TanhFeedback { decay: 1.0, gain, slope },
                    Delta::Negative,
                    gain.abs() + 1.0,
                ),
            },
            kernel: Some(
                DelayKernel::new(
                    KernelProfile::PlateauTanh {
                        alpha0,
                        eps: 0.05,
                        alpha2: alpha0 + 0.2,
                        rate: 1.0,
                    },
                    1.0,
                )
                .unwrap(),
            ),
            integrator: IntegratorConfig { horizon, ..Default::default() },
            scan: ScanConfig { seeds, ..Default::default() },
            initial: InitialProfile::default(),
            outputs: OutputConfig::default(),
        };
        let text = config.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        prop_assert_eq!(&config, &back);
        prop_assert_eq!(text, back.to_json());
    }
}
