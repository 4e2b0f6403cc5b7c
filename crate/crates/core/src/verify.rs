//! Acceptance suite: every release-gating property as a named, timed
//! check. The CLI `verify` subcommand and the acceptance test target both
//! run these and print one pass/fail line per criterion.

use rayon::prelude::*;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::difference::{discrete_scan, grid_seeds, orbit, v_vector, DiscreteMap, DiscreteSystemSpec};
use crate::integrator::integrate;
use crate::kernel::{solve_threshold_delay, DelayKernel, KernelProfile};
use crate::lyapunov::{
    count_sign_changes, lyapunov_value, regularity_at_own_delay, v_signed, Delta,
};
use crate::morse::{check_nstar_consistency, generate_fourier_seeds, run_ensemble, MorseReport, ScanParams};
use crate::segment::Segment;
use crate::spectrum::{
    count_from_roots, count_unstable_roots, compute_nstar, seeded_root_scan, spectrum_report,
    SpectrumReport, TOL_HYP,
};
use crate::system::{CyclicSystemSpec, Nonlinearity};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:2}: {:<24} ({:6.1} s)  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.details
        )
    }
}

fn finish(
    id: u32,
    name: &'static str,
    start: Instant,
    budget_s: f64,
    ok: bool,
    details: String,
) -> CriterionResult {
    let seconds = start.elapsed().as_secs_f64();
    let within = seconds < budget_s;
    CriterionResult {
        id,
        name,
        passed: ok && within,
        details: if within {
            details
        } else {
            format!("{details}; exceeded {budget_s} s budget")
        },
        seconds,
    }
}

/// The flow system the monotonicity criteria run on: scalar negative
/// feedback `f(u, v) = -u - 2·tanh(2v)`.
pub fn acceptance_system() -> CyclicSystemSpec {
    CyclicSystemSpec::scalar(
        Nonlinearity::TanhFeedback { decay: 1.0, gain: -2.0, slope: 2.0 },
        Delta::Negative,
        2.0,
    )
}

/// Plateau kernel α₀ = 1, ε = 0.05, α₂ = 1.2, r = 1.
pub fn acceptance_kernel() -> DelayKernel {
    DelayKernel::new(
        KernelProfile::PlateauTanh { alpha0: 1.0, eps: 0.05, alpha2: 1.2, rate: 1.0 },
        1.0,
    )
    .expect("acceptance kernel is valid")
}

/// Stable-origin variant: gain scaled down so the origin attracts.
pub fn stable_system() -> CyclicSystemSpec {
    CyclicSystemSpec::scalar(
        Nonlinearity::TanhFeedback { decay: 1.0, gain: -0.5, slope: 1.0 },
        Delta::Negative,
        2.0,
    )
}

/// Shared artifacts for the flow criteria: the main 100-seed ensemble, its
/// spectrum, and the stable-origin ensemble.
pub struct FlowArtifacts {
    pub ensemble: MorseReport,
    pub spectrum: SpectrumReport,
    pub stable_ensemble: MorseReport,
    pub stable_spectrum: SpectrumReport,
    pub ensemble_seconds: f64,
}

pub fn flow_artifacts() -> FlowArtifacts {
    let spec = acceptance_system();
    let kernel = acceptance_kernel();
    let spectrum = spectrum_report(&spec, &kernel).expect("spectrum computes");
    let seeds = generate_fourier_seeds(&spec, 1.0, 201, 100, 20_240_801, 4);
    let params = ScanParams::for_system(&spec, 1.0, spectrum.n_star);
    let start = Instant::now();
    let ensemble = run_ensemble(&spec, &kernel, &seeds, 500.0, 1.0 / 400.0, &params);
    let ensemble_seconds = start.elapsed().as_secs_f64();

    let stable = stable_system();
    let stable_spectrum = spectrum_report(&stable, &kernel).expect("spectrum computes");
    let stable_seeds = generate_fourier_seeds(&stable, 1.0, 201, 24, 77, 4);
    let stable_params = ScanParams::for_system(&stable, 1.0, stable_spectrum.n_star);
    let stable_ensemble =
        run_ensemble(&stable, &kernel, &stable_seeds, 120.0, 1.0 / 400.0, &stable_params);

    FlowArtifacts {
        ensemble,
        spectrum,
        stable_ensemble,
        stable_spectrum,
        ensemble_seconds,
    }
}

/// 1. Parity: V⁺ even and V⁻ odd on 10⁵ random non-origin segments.
pub fn criterion_1_parity() -> CriterionResult {
    let start = Instant::now();
    let failures: usize = (0..100_000usize)
        .into_par_iter()
        .map(|i| {
            let mut rng = StdRng::seed_from_u64(1_000 + i as u64);
            let amp: f64 = rng.gen_range(0.1..2.0);
            let w: f64 = rng.gen_range(0.3..30.0);
            let ph: f64 = rng.gen_range(0.0..6.28);
            let off: f64 = rng.gen_range(-0.5..0.5);
            let n_disc = rng.gen_range(0..3usize);
            let disc: Vec<f64> = (0..n_disc).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
            let seg = Segment::from_fn(
                |s| amp * (w * s + ph).sin() + off,
                |s| amp * w * (w * s + ph).cos(),
                disc,
                1.0,
                41,
            )
            .expect("finite");
            if seg.near_origin() {
                return 0;
            }
            let a = rng.gen_range(-1.0..-1e-6);
            match v_signed(&seg, a) {
                Ok((vp, vm)) => usize::from(vp % 2 != 0 || vm % 2 != 1),
                Err(_) => 0,
            }
        })
        .sum();
    finish(
        1,
        "parity suite",
        start,
        30.0,
        failures == 0,
        format!("{failures} parity failures over 100000 segments"),
    )
}

/// 2. Sign-change count equals the exhaustive subsequence supremum.
pub fn criterion_2_signchange_oracle() -> CriterionResult {
    let start = Instant::now();
    fn brute(vals: &[f64], zeta: f64) -> u32 {
        let n = vals.len();
        let quant: Vec<f64> = vals
            .iter()
            .map(|&v| if v.abs() <= zeta { 0.0 } else { v })
            .collect();
        let mut best = 0usize;
        for mask in 1u32..(1u32 << n) {
            let picked: Vec<f64> = (0..n)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| quant[i])
                .collect();
            if picked.len() >= 2 && picked.windows(2).all(|w| w[0] * w[1] < 0.0) {
                best = best.max(picked.len() - 1);
            }
        }
        best as u32
    }
    let mismatches: usize = (0..10_000usize)
        .into_par_iter()
        .map(|i| {
            let mut rng = StdRng::seed_from_u64(2_000 + i as u64);
            let len = rng.gen_range(2..=12);
            let vals: Vec<f64> = (0..len)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        [-1.0, 0.0, 1.0][rng.gen_range(0..3)]
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect();
            let seg = Segment::new(vals.clone(), vec![0.0; len], vec![], 1.0, 0)
                .expect("finite samples");
            let got = count_sign_changes(&seg, -1.0).expect("window valid");
            usize::from(got != brute(&vals, seg.zeta()))
        })
        .sum();
    finish(
        2,
        "sign-change oracle",
        start,
        60.0,
        mismatches == 0,
        format!("{mismatches} mismatches over 10000 sequences"),
    )
}

/// 3. Threshold delay: constant kernel, cubic oracle, and bounds.
pub fn criterion_3_threshold_delay() -> CriterionResult {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();

    let constant = DelayKernel::constant(2.0, 1.0).expect("valid kernel");
    let seg = Segment::constant(0.4, 1.0, 0).expect("constant segment");
    let tau = solve_threshold_delay(&seg, &constant).expect("solves");
    if (tau - 0.5).abs() > 1e-10 {
        ok = false;
        details.push(format!("constant kernel tau = {tau}, want 0.5"));
    }

    // Independent bisection oracle on t + t³/3 = 1.
    let f = |t: f64| t + t * t * t / 3.0 - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let cubic = DelayKernel::new(
        KernelProfile::PlateauQuadratic { alpha0: 1.0, eps: 1e-12, alpha2: 3.0 },
        1.0,
    )
    .expect("valid kernel");
    let ramp = Segment::from_fn(|s| s, |_| 1.0, vec![], 1.0, 201).expect("ramp");
    let tau = solve_threshold_delay(&ramp, &cubic).expect("solves");
    if (tau - oracle).abs() > 1e-8 {
        ok = false;
        details.push(format!("cubic tau = {tau}, oracle {oracle}"));
    }
    if (oracle - 0.81770).abs() > 1e-4 {
        ok = false;
        details.push(format!("oracle {oracle} far from 0.81770"));
    }

    let violations: usize = (0..10_000usize)
        .into_par_iter()
        .map(|i| {
            let mut rng = StdRng::seed_from_u64(3_000 + i as u64);
            let r = rng.gen_range(0.5..2.0);
            let a1 = 1.0 / r;
            let alpha0 = rng.gen_range(a1..a1 + 1.0);
            let alpha2 = alpha0 + rng.gen_range(0.0..1.0);
            let kernel = DelayKernel::new(
                KernelProfile::PlateauTanh {
                    alpha0,
                    eps: rng.gen_range(0.01..0.2),
                    alpha2,
                    rate: rng.gen_range(0.1..4.0),
                },
                r,
            )
            .expect("valid kernel");
            let amp: f64 = rng.gen_range(0.1..1.5);
            let w: f64 = rng.gen_range(0.5..8.0);
            let seg = Segment::from_fn(
                |s| amp * (w * s).sin(),
                |s| amp * w * (w * s).cos(),
                vec![],
                r,
                201,
            )
            .expect("finite");
            let tau = solve_threshold_delay(&seg, &kernel).expect("solves");
            usize::from(!(tau >= 1.0 / kernel.alpha2() - 1e-10 && tau <= r + 1e-10))
        })
        .sum();
    if violations > 0 {
        ok = false;
        details.push(format!("{violations} bound violations"));
    }
    if details.is_empty() {
        details.push(format!(
            "constant exact, cubic matches oracle ({oracle:.6}), bounds clean on 10000 draws"
        ));
    }
    finish(3, "threshold delay", start, 120.0, ok, details.join("; "))
}

/// 4. Spectrum golden values, winding vs seeded-scan agreement.
pub fn criterion_4_spectrum_goldens() -> CriterionResult {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for (gamma, want) in [(-1.0, 0u32), (-2.0, 2), (-8.0, 4)] {
        let case_start = Instant::now();
        match count_unstable_roots(&[0.0], &[gamma], 1.0) {
            Ok((m, nonhyp, _)) => {
                let roots = seeded_root_scan(&[0.0], &[gamma], 1.0, -1.0);
                let oracle = count_from_roots(&roots, TOL_HYP);
                if m != want || oracle != want || nonhyp {
                    ok = false;
                    details.push(format!(
                        "gamma={gamma}: winding {m}, oracle {oracle}, want {want}, nonhyp {nonhyp}"
                    ));
                }
            }
            Err(e) => {
                ok = false;
                details.push(format!("gamma={gamma}: {e}"));
            }
        }
        let case_s = case_start.elapsed().as_secs_f64();
        if case_s >= 10.0 {
            ok = false;
            details.push(format!("gamma={gamma} took {case_s:.1} s (budget 10 s)"));
        }
    }
    if details.is_empty() {
        details.push("m* = 0/2/4 for gamma = -1/-2/-8; winding equals oracle".to_string());
    }
    finish(4, "spectrum goldens", start, 60.0, ok, details.join("; "))
}

/// 5. The N* case table, all six (δ, parity, hyperbolicity) combinations.
pub fn criterion_5_nstar_table() -> CriterionResult {
    let start = Instant::now();
    let cases = [
        (3u32, false, Delta::Positive, 3u32),
        (4, false, Delta::Negative, 4),
        (1, true, Delta::Positive, 2),
        (2, true, Delta::Positive, 2),
        (2, true, Delta::Negative, 3),
        (1, true, Delta::Negative, 1),
    ];
    let mut failures = Vec::new();
    for (m, nonhyp, delta, want) in cases {
        let got = compute_nstar(m, nonhyp, delta);
        if got != want {
            failures.push(format!("({m}, {nonhyp}, {delta:?}) -> {got}, want {want}"));
        }
    }
    let ok = failures.is_empty();
    finish(
        5,
        "N* case table",
        start,
        10.0,
        ok,
        if ok { "all six combinations exact".into() } else { failures.join("; ") },
    )
}

/// 6. Zero V-increase events across the 100-seed ensemble.
pub fn criterion_6_v_monotonicity(artifacts: &FlowArtifacts) -> CriterionResult {
    let start = Instant::now();
    let report = &artifacts.ensemble;
    let errors: usize = report.trajectories.iter().filter(|t| t.error.is_some()).count();
    let ok = report.violations.v_increase.is_empty() && errors == 0;
    let within_budget = artifacts.ensemble_seconds < 300.0;
    CriterionResult {
        id: 6,
        name: "V-monotonicity on flows",
        passed: ok && within_budget,
        details: format!(
            "{} V-increase events, {} integrator failures over {} seeds ({:.1} s ensemble)",
            report.violations.v_increase.len(),
            errors,
            report.seed_count,
            artifacts.ensemble_seconds
        ),
        seconds: start.elapsed().as_secs_f64() + artifacts.ensemble_seconds,
    }
}

/// 7. Level graph is a DAG with no upward edges; ω-level ≤ earliest level.
pub fn criterion_7_gradient_structure(artifacts: &FlowArtifacts) -> CriterionResult {
    let start = Instant::now();
    let report = &artifacts.ensemble;
    let dag_ok = report.level_graph.iter().all(|e| e.to < e.from);
    let ok = dag_ok
        && report.violations.upward_edges.is_empty()
        && report.violations.omega_above_first.is_empty();
    let resolved = report
        .trajectories
        .iter()
        .filter(|t| t.omega_level.is_some())
        .count();
    finish(
        7,
        "gradient structure",
        start,
        60.0,
        ok,
        format!(
            "{} edges all downward, {} upward violations, {} resolved limits of {} seeds",
            report.level_graph.len(),
            report.violations.upward_edges.len(),
            resolved,
            report.seed_count
        ),
    )
}

/// 8. η strictly increasing and no exit from the M-ball after entry.
pub fn criterion_8_eta_invariance(artifacts: &FlowArtifacts) -> CriterionResult {
    let start = Instant::now();
    let mut eta_bad = 0usize;
    let mut exit_bad = 0usize;
    for t in &artifacts.ensemble.trajectories {
        if let Some(checks) = &t.checks {
            eta_bad += checks.eta_violations;
            exit_bad += checks.m_exit_violations;
        }
    }
    finish(
        8,
        "eta monotonicity + invariance",
        start,
        60.0,
        eta_bad == 0 && exit_bad == 0,
        format!("{eta_bad} eta violations, {exit_bad} M-ball exits across the ensemble"),
    )
}

/// 9. N* threshold consistency in the stable and unstable regimes.
pub fn criterion_9_nstar_consistency(artifacts: &FlowArtifacts) -> CriterionResult {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    if artifacts.stable_spectrum.m_star != 0 {
        ok = false;
        details.push(format!(
            "stable regime has m* = {}",
            artifacts.stable_spectrum.m_star
        ));
    }
    let stable_violations = check_nstar_consistency(
        &artifacts.stable_ensemble,
        &artifacts.stable_spectrum,
        0.01,
    );
    if !stable_violations.is_empty() {
        ok = false;
        details.push(format!("{} stable-regime violations", stable_violations.len()));
    }
    if artifacts.spectrum.m_star != 2 || artifacts.spectrum.n_star != 2 {
        ok = false;
        details.push(format!(
            "unstable regime has (m*, N*) = ({}, {})",
            artifacts.spectrum.m_star, artifacts.spectrum.n_star
        ));
    }
    let unstable_violations =
        check_nstar_consistency(&artifacts.ensemble, &artifacts.spectrum, 0.01);
    if !unstable_violations.is_empty() {
        ok = false;
        details.push(format!(
            "{} unstable-regime violations",
            unstable_violations.len()
        ));
    }
    if details.is_empty() {
        let tails = artifacts
            .stable_ensemble
            .trajectories
            .iter()
            .filter(|t| t.near_origin_tail)
            .count();
        details.push(format!(
            "stable regime m* = 0 with {tails} origin-bound tails, unstable (m*, N*) = (2, 2), 0 violations"
        ));
    }
    finish(9, "N* threshold consistency", start, 120.0, ok, details.join("; "))
}

/// 10. Discrete exactness: integer V nonincreasing, DAG graph, shift-map
/// level constancy.
pub fn criterion_10_discrete_exactness() -> CriterionResult {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    let spec = DiscreteSystemSpec {
        n: 2,
        map: DiscreteMap::TanhFeedback { a: 0.5, gain: -1.0, slope: 1.0 },
        delta: Delta::Negative,
    };
    let seeds = grid_seeds(2, 22, 1.5);
    match discrete_scan(&spec, &seeds, 1000, 8, 0, None) {
        Ok((report, stats)) => {
            if !report.violations.v_increase.is_empty() {
                ok = false;
                details.push(format!(
                    "{} V-increase events",
                    report.violations.v_increase.len()
                ));
            }
            if !report.violations.upward_edges.is_empty() {
                ok = false;
                details.push(format!(
                    "{} upward edges",
                    report.violations.upward_edges.len()
                ));
            }
            if !report.level_graph.iter().all(|e| e.to < e.from) {
                ok = false;
                details.push("level graph not downward".into());
            }
            if !stats.excluded_seeds.is_empty() {
                details.push(format!(
                    "{} seeds excluded after perturbation",
                    stats.excluded_seeds.len()
                ));
            }
            if details.is_empty() {
                details.push(format!(
                    "{} seeds, 1000 steps, 0 violations, {} perturbed",
                    seeds.len(),
                    stats.perturbed_seeds.len()
                ));
            }
        }
        Err(e) => {
            ok = false;
            details.push(e.to_string());
        }
    }

    // Shift map: V constant along each periodic orbit.
    let shift = DiscreteSystemSpec { n: 2, map: DiscreteMap::Shift, delta: Delta::Positive };
    let mut rng = StdRng::seed_from_u64(10_000);
    let mut shift_bad = 0usize;
    for _ in 0..1000 {
        let initial: Vec<f64> = (0..3)
            .map(|_| {
                let v: f64 = rng.gen_range(0.1..1.0);
                if rng.gen_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let orb = orbit(&shift, &initial, 9).expect("shift orbit");
        let v0 = v_vector(&orb[0], shift.delta, 0.0).expect("nonzero").value;
        if orb
            .iter()
            .any(|s| v_vector(s, shift.delta, 0.0).expect("nonzero").value != v0)
        {
            shift_bad += 1;
        }
    }
    if shift_bad > 0 {
        ok = false;
        details.push(format!("{shift_bad} shift orbits with nonconstant V"));
    }
    finish(10, "discrete exactness", start, 120.0, ok, details.join("; "))
}

/// 11. V unchanged under C¹ perturbations below half the regularity margin.
pub fn criterion_11_regularity_stability() -> CriterionResult {
    let start = Instant::now();
    let kernel = acceptance_kernel();
    let results: Vec<(usize, usize)> = (0..2_000usize)
        .into_par_iter()
        .map(|i| {
            let mut rng = StdRng::seed_from_u64(11_000 + i as u64);
            // Segments inside the plateau so the window stays put.
            let modes: Vec<(f64, f64, f64)> = (1..=3)
                .map(|k| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        k as f64 * std::f64::consts::PI,
                    )
                })
                .collect();
            let f = |s: f64| -> f64 {
                modes
                    .iter()
                    .map(|(a, b, w)| a * (w * s).cos() + b * (w * s).sin())
                    .sum()
            };
            let df = |s: f64| -> f64 {
                modes
                    .iter()
                    .map(|(a, b, w)| -a * w * (w * s).sin() + b * w * (w * s).cos())
                    .sum()
            };
            let raw = Segment::from_fn(f, df, vec![], 1.0, 201).expect("finite");
            let scale = 0.04 / raw.sup_norm().max(1e-12);
            let seg = Segment::new(
                raw.values().iter().map(|v| v * scale).collect(),
                raw.slopes().iter().map(|v| v * scale).collect(),
                vec![],
                1.0,
                0,
            )
            .expect("finite");
            if seg.near_origin() {
                return (0, 0);
            }
            let Ok((verdict, _)) = regularity_at_own_delay(&seg, &kernel, Delta::Negative)
            else {
                return (0, 0);
            };
            if !verdict.in_r || verdict.margin <= 0.0 {
                return (0, 0);
            }
            let Ok(v0) = lyapunov_value(&seg, &kernel, Delta::Negative) else {
                return (0, 0);
            };
            let mut failures = 0usize;
            for _ in 0..10 {
                let pw: f64 = rng.gen_range(3.0..25.0);
                let pp: f64 = rng.gen_range(0.0..6.28);
                let praw = Segment::from_fn(
                    |s| (pw * s + pp).sin(),
                    |s| pw * (pw * s + pp).cos(),
                    vec![],
                    1.0,
                    201,
                )
                .expect("finite");
                let c1 = praw.c1_norm();
                let target = 0.5 * verdict.margin * rng.gen_range(0.05..0.95);
                let ps = target / c1;
                let perturbed = Segment::new(
                    seg.values()
                        .iter()
                        .zip(praw.values())
                        .map(|(a, b)| a + b * ps)
                        .collect(),
                    seg.slopes()
                        .iter()
                        .zip(praw.slopes())
                        .map(|(a, b)| a + b * ps)
                        .collect(),
                    vec![],
                    1.0,
                    0,
                )
                .expect("finite");
                match lyapunov_value(&perturbed, &kernel, Delta::Negative) {
                    Ok(v1) if v1.value == v0.value => {}
                    _ => failures += 1,
                }
            }
            (1, failures)
        })
        .collect();
    let tested: usize = results.iter().map(|(t, _)| t).sum();
    let failures: usize = results.iter().map(|(_, f)| f).sum();
    let ok = failures == 0 && tested >= 1000;
    finish(
        11,
        "regularity stability",
        start,
        120.0,
        ok,
        format!("{failures} V changes over {tested} regular segments x 10 perturbations"),
    )
}

/// 12. Integrator sanity: the linear test solution and fourth-order
/// self-convergence on a smooth window.
pub fn criterion_12_integrator_sanity() -> CriterionResult {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();

    let spec = CyclicSystemSpec::scalar(
        Nonlinearity::Linear { decay: 0.0, gain: -1.0 },
        Delta::Negative,
        2.0,
    );
    let kernel = DelayKernel::constant(1.0, 1.0).expect("valid kernel");
    let initial = Segment::from_fn(|_| 1.0, |_| 0.0, vec![], 1.0, 201).expect("constant");
    match integrate(&spec, &kernel, &initial, 1.5, 1.0 / 400.0) {
        Ok(traj) => {
            let mut worst = 0.0f64;
            for (k, &t) in traj.times().iter().enumerate() {
                if (0.0..=1.0).contains(&t) {
                    worst = worst.max((traj.state_at_node(k)[0] - (1.0 - t)).abs());
                }
            }
            if worst > 1e-8 {
                ok = false;
                details.push(format!("linear test error {worst:.2e} above 1e-8"));
            } else {
                details.push(format!("linear test max error {worst:.2e}"));
            }
        }
        Err(e) => {
            ok = false;
            details.push(e.to_string());
        }
    }

    let lambda = -0.3574029561813888;
    let smooth = CyclicSystemSpec::scalar(
        Nonlinearity::Linear { decay: 0.0, gain: -0.25 },
        Delta::Negative,
        2.0,
    );
    let history = Segment::from_fn(
        |s| (lambda * s).exp(),
        |s| lambda * (lambda * s).exp(),
        vec![],
        1.0,
        65,
    )
    .expect("finite");
    let terminal = |dt: f64| {
        let traj = integrate(&smooth, &kernel, &history, 4.0, dt).expect("integrates");
        traj.state_at_node(traj.times().len() - 1)[0]
    };
    let reference = terminal(1.0 / 2048.0);
    let errs: Vec<f64> = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]
        .iter()
        .map(|&dt| (terminal(dt) - reference).abs())
        .collect();
    let f1 = errs[0] / errs[1];
    let f2 = errs[1] / errs[2];
    if f1 < 8.0 || f2 < 8.0 {
        ok = false;
        details.push(format!("convergence factors {f1:.1}, {f2:.1} below 8"));
    } else {
        details.push(format!("self-convergence factors {f1:.1}, {f2:.1}"));
    }
    finish(12, "integrator sanity", start, 120.0, ok, details.join("; "))
}

/// Runs the full suite in order. The flow ensemble is computed once and
/// shared by criteria 6 through 9.
pub fn run_all() -> Vec<CriterionResult> {
    let mut results = vec![
        criterion_1_parity(),
        criterion_2_signchange_oracle(),
        criterion_3_threshold_delay(),
        criterion_4_spectrum_goldens(),
        criterion_5_nstar_table(),
    ];
    let artifacts = flow_artifacts();
    results.push(criterion_6_v_monotonicity(&artifacts));
    results.push(criterion_7_gradient_structure(&artifacts));
    results.push(criterion_8_eta_invariance(&artifacts));
    results.push(criterion_9_nstar_consistency(&artifacts));
    results.push(criterion_10_discrete_exactness());
    results.push(criterion_11_regularity_stability());
    results.push(criterion_12_integrator_sanity());
    results
}
