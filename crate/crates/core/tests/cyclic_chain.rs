//! End-to-end checks of the cyclic case (N ≥ 1): the chain feeds each
//! component from the next, closing through the delayed x⁰ term, and the
//! level machinery counts the discrete coordinates after the window.

use delay_morse::kernel::KernelProfile;
use delay_morse::morse::{generate_fourier_seeds, run_ensemble, ScanParams};
use delay_morse::spectrum::{count_from_roots, seeded_root_scan, spectrum_report, TOL_HYP};
use delay_morse::{
    integrate, lyapunov_value, CyclicSystemSpec, DelayKernel, Delta, Nonlinearity, Segment,
};

fn chain(n: usize) -> CyclicSystemSpec {
    let mut nonlinearities = vec![Nonlinearity::Linear { decay: 1.0, gain: 0.5 }; n];
    nonlinearities.push(Nonlinearity::TanhFeedback { decay: 1.0, gain: -2.0, slope: 2.0 });
    CyclicSystemSpec {
        n_components: n,
        nonlinearities,
        delta: Delta::Negative,
        dissipativity_bound: 2.0,
        numeric_derivatives: false,
    }
}

fn plateau_kernel() -> DelayKernel {
    DelayKernel::new(
        KernelProfile::PlateauTanh { alpha0: 1.0, eps: 0.05, alpha2: 1.2, rate: 1.0 },
        1.0,
    )
    .unwrap()
}

#[test]
fn chain_specs_validate_and_linearize() {
    for n in 1..=2 {
        let spec = chain(n);
        spec.validate().unwrap();
        let report = spectrum_report(&spec, &plateau_kernel()).unwrap();
        assert_eq!(report.mu, vec![-1.0; n + 1]);
        let mut gamma = vec![0.5; n];
        gamma.push(-4.0);
        assert_eq!(report.gamma, gamma);
        // Winding count agrees with the audit scan.
        assert_eq!(report.m_star, report.oracle_count, "N = {n}");
        let roots = seeded_root_scan(&report.mu, &report.gamma, report.tau0, -0.5);
        assert_eq!(count_from_roots(&roots, TOL_HYP), report.m_star);
    }
}

#[test]
fn chain_equilibrium_is_preserved() {
    let spec = chain(1);
    let kernel = plateau_kernel();
    let initial = Segment::from_fn(|_| 0.0, |_| 0.0, vec![0.0], 1.0, 201).unwrap();
    let traj = integrate(&spec, &kernel, &initial, 10.0, 0.0025).unwrap();
    for k in 0..traj.times().len() {
        let state = traj.state_at_node(k);
        assert_eq!(state[0], 0.0);
        assert_eq!(state[1], 0.0);
    }
}

#[test]
fn chain_segments_carry_discrete_coordinates() {
    let spec = chain(2);
    let kernel = plateau_kernel();
    let initial = Segment::from_fn(
        |s| 0.4 * (2.0 * s).cos(),
        |s| -0.8 * (2.0 * s).sin(),
        vec![0.3, -0.2],
        1.0,
        201,
    )
    .unwrap();
    let traj = integrate(&spec, &kernel, &initial, 8.0, 0.0025).unwrap();
    let seg0 = traj.segment_at(0.0).unwrap();
    assert_eq!(seg0.n_components(), 2);
    assert!((seg0.discrete_values()[0] - 0.3).abs() < 1e-12);
    assert!((seg0.discrete_values()[1] + 0.2).abs() < 1e-12);
    // Later segments track the evolving chain state.
    let seg = traj.segment_at(5.0).unwrap();
    let k = traj
        .times()
        .iter()
        .position(|&t| (t - 5.0).abs() < 1e-9)
        .unwrap();
    let state = traj.state_at_node(k);
    assert!((seg.discrete_values()[0] - state[1]).abs() < 1e-9);
    assert!((seg.discrete_values()[1] - state[2]).abs() < 1e-9);
    // V is defined and parity-consistent on the chain.
    let v = lyapunov_value(&seg, &kernel, spec.delta).unwrap();
    assert_eq!(v.value % 2, 1);
}

#[test]
fn chain_ensemble_is_gradient_like() {
    let spec = chain(1);
    let kernel = plateau_kernel();
    let spectrum = spectrum_report(&spec, &kernel).unwrap();
    let seeds = generate_fourier_seeds(&spec, 1.0, 201, 8, 99, 3);
    let params = ScanParams::for_system(&spec, 1.0, spectrum.n_star);
    let report = run_ensemble(&spec, &kernel, &seeds, 80.0, 0.0025, &params);
    assert!(
        report.violations.v_increase.is_empty(),
        "{:?}",
        report.violations.v_increase
    );
    assert!(report.violations.upward_edges.is_empty());
    assert!(report.violations.omega_above_first.is_empty());
    for t in &report.trajectories {
        assert!(t.error.is_none(), "seed {}: {:?}", t.seed_index, t.error);
        let checks = t.checks.as_ref().unwrap();
        assert_eq!(checks.eta_violations, 0);
        assert_eq!(checks.m_exit_violations, 0);
    }
}
