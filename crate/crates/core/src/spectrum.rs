//! Linear stability at the origin: the characteristic quasi-polynomial
//! `∏(λ - μⁱ) - e^{-λτ₀}·∏γⁱ`, an argument-principle count of its roots
//! with positive real part, and the threshold level N* derived from that
//! count.
//!
//! Two independent routes produce the unstable-root count: a winding-number
//! computation along a rectangle enclosing all unstable roots, and a seeded
//! Newton scan kept for audit. They are cross-checked in the tests and both
//! reported.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::DelayKernel;
use crate::lyapunov::Delta;
use crate::system::CyclicSystemSpec;

/// Width of the strip around the imaginary axis inside which roots are
/// reported as nonhyperbolic rather than counted.
pub const TOL_HYP: f64 = 1e-6;

/// Contour parameters used by the winding count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourInfo {
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub omega: f64,
    /// Contour evaluations spent by the adaptive phase continuation.
    pub evaluations: usize,
}

/// Full spectral report for one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub tau0: f64,
    pub m_star: u32,
    pub nonhyperbolic: bool,
    pub n_star: u32,
    pub contour: ContourInfo,
    /// Roots located by the seeded Newton scan (audit data; real parts above
    /// `-1`), canonicalized to nonnegative imaginary part.
    pub oracle_roots: Vec<(f64, f64)>,
    /// Unstable count derived from the oracle roots, for cross-checking.
    pub oracle_count: u32,
}

/// Derivatives of the nonlinearities at the origin and the delay there:
/// `μⁱ = D₁fⁱ(0,0)`, `γⁱ = D₂fⁱ(0,0)`, `τ₀ = 1/α₀`.
pub fn linearize(
    spec: &CyclicSystemSpec,
    kernel: &DelayKernel,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let mut mu = Vec::with_capacity(spec.dim());
    let mut gamma = Vec::with_capacity(spec.dim());
    for (i, f) in spec.nonlinearities.iter().enumerate() {
        let (d1, d2) = match (spec.numeric_derivatives, f.derivatives_at_origin()) {
            (false, Some(d)) => d,
            _ => central_differences(f, i)?,
        };
        mu.push(d1);
        gamma.push(d2);
    }
    Ok((mu, gamma, 1.0 / kernel.alpha0()))
}

fn central_differences(f: &crate::system::Nonlinearity, index: usize) -> Result<(f64, f64)> {
    let h = 1e-6;
    let d1 = (f.eval(h, 0.0) - f.eval(-h, 0.0)) / (2.0 * h);
    let d2 = (f.eval(0.0, h) - f.eval(0.0, -h)) / (2.0 * h);
    if !d1.is_finite() || !d2.is_finite() {
        return Err(Error::BadDerivative { index });
    }
    Ok((d1, d2))
}

/// The characteristic function `∏(λ - μⁱ) - e^{-λτ₀}·∏γⁱ`.
pub fn char_fn(lambda: Complex64, mu: &[f64], gamma: &[f64], tau0: f64) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    for &m in mu {
        prod *= lambda - m;
    }
    let gprod: f64 = gamma.iter().product();
    prod - (-lambda * tau0).exp() * gprod
}

/// Derivative of [`char_fn`] in λ.
fn char_fn_deriv(lambda: Complex64, mu: &[f64], gamma: &[f64], tau0: f64) -> Complex64 {
    // d/dλ ∏(λ-μⁱ) = Σ_j ∏_{i≠j}(λ-μⁱ)
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..mu.len() {
        let mut p = Complex64::new(1.0, 0.0);
        for (i, &m) in mu.iter().enumerate() {
            if i != j {
                p *= lambda - m;
            }
        }
        sum += p;
    }
    let gprod: f64 = gamma.iter().product();
    sum + tau0 * (-lambda * tau0).exp() * gprod
}

/// A priori bound: every root with `Re λ ≥ 0` satisfies
/// `min_i |λ - μⁱ| ≤ (∏|γⁱ|)^{1/(N+1)}`, since `|e^{-λτ₀}| ≤ 1` there.
fn modulus_bound(mu: &[f64], gamma: &[f64]) -> f64 {
    let max_mu = mu.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let gmean = gamma
        .iter()
        .fold(1.0_f64, |p, v| p * v.abs())
        .powf(1.0 / gamma.len() as f64);
    max_mu + gmean + 1.0
}

/// Winding number of the characteristic function along the positively
/// oriented rectangle `[re_min, re_max] × [-om, om]`, by adaptive phase
/// continuation: any segment with phase jump above π/2 is split.
fn winding_number(
    mu: &[f64],
    gamma: &[f64],
    tau0: f64,
    re_min: f64,
    re_max: f64,
    om: f64,
) -> Result<(i64, usize)> {
    let f = |z: Complex64| char_fn(z, mu, gamma, tau0);
    let corners = [
        Complex64::new(re_min, -om),
        Complex64::new(re_max, -om),
        Complex64::new(re_max, om),
        Complex64::new(re_min, om),
        Complex64::new(re_min, -om),
    ];
    let mut evals = 0usize;
    let mut total = 0.0f64;
    for w in corners.windows(2) {
        let (z0, z1) = (w[0], w[1]);
        // Initial sampling proportional to the side length and delay scale,
        // so the exponential's own phase rotation is resolved.
        let len = (z1 - z0).norm();
        let n0 = (8.0 + len * (1.0 + tau0) * 4.0).ceil() as usize;
        let mut prev_z = z0;
        let mut prev_f = f(prev_z);
        evals += 1;
        for k in 1..=n0 {
            let z = z0 + (z1 - z0) * (k as f64 / n0 as f64);
            let fz = f(z);
            evals += 1;
            total += phase_change(&f, prev_z, prev_f, z, fz, 0, &mut evals)?;
            prev_z = z;
            prev_f = fz;
        }
    }
    let turns = total / std::f64::consts::TAU;
    let rounded = turns.round();
    if (turns - rounded).abs() > 1e-6 {
        return Err(Error::BracketFailure(format!(
            "winding number did not close up: {turns}"
        )));
    }
    Ok((rounded as i64, evals))
}

fn phase_change(
    f: &dyn Fn(Complex64) -> Complex64,
    z0: Complex64,
    f0: Complex64,
    z1: Complex64,
    f1: Complex64,
    depth: usize,
    evals: &mut usize,
) -> Result<f64> {
    if f0.norm() < 1e-300 || f1.norm() < 1e-300 {
        return Err(Error::ContourNearRoot { attempts: 0 });
    }
    let d = (f1 / f0).arg();
    if d.abs() <= std::f64::consts::FRAC_PI_2 {
        return Ok(d);
    }
    if depth >= 48 {
        // Cannot resolve the phase: a root sits essentially on the contour.
        return Err(Error::ContourNearRoot { attempts: 0 });
    }
    let zm = 0.5 * (z0 + z1);
    let fm = f(zm);
    *evals += 1;
    Ok(phase_change(f, z0, f0, zm, fm, depth + 1, evals)?
        + phase_change(f, zm, fm, z1, f1, depth + 1, evals)?)
}

/// Counts characteristic roots with strictly positive real part by the
/// argument principle, and reports nonhyperbolicity when a thin strip
/// around the imaginary axis contains roots.
///
/// The contour is auto-perturbed outward up to five times if it passes too
/// close to a root.
pub fn count_unstable_roots(
    mu: &[f64],
    gamma: &[f64],
    tau0: f64,
) -> Result<(u32, bool, ContourInfo)> {
    let bound = modulus_bound(mu, gamma);
    let mut last_err = None;
    for attempt in 0..5 {
        let scale = 1.0 + 0.0137 * attempt as f64;
        let sigma_plus = bound * scale;
        let om = bound * scale;
        let main = winding_number(mu, gamma, tau0, TOL_HYP, sigma_plus, om);
        let strip = winding_number(
            mu,
            gamma,
            tau0,
            -TOL_HYP * (1.0 + 0.1 * attempt as f64),
            TOL_HYP * (1.0 + 0.1 * attempt as f64),
            om,
        );
        match (main, strip) {
            (Ok((m, e1)), Ok((s, e2))) => {
                if m < 0 || s < 0 {
                    return Err(Error::BracketFailure(format!(
                        "negative winding number: main {m}, strip {s}"
                    )));
                }
                return Ok((
                    m as u32,
                    s > 0,
                    ContourInfo {
                        sigma_minus: TOL_HYP,
                        sigma_plus,
                        omega: om,
                        evaluations: e1 + e2,
                    },
                ));
            }
            (a, b) => {
                last_err = a.err().or(b.err());
            }
        }
    }
    match last_err {
        Some(Error::ContourNearRoot { .. }) | None => Err(Error::ContourNearRoot { attempts: 5 }),
        Some(e) => Err(e),
    }
}

/// Seeded Newton scan over the counting rectangle (audit route).
///
/// Returns located roots with `Re λ > re_floor`, canonicalized to
/// nonnegative imaginary part and deduplicated at distance `1e-6`.
pub fn seeded_root_scan(
    mu: &[f64],
    gamma: &[f64],
    tau0: f64,
    re_floor: f64,
) -> Vec<Complex64> {
    let bound = modulus_bound(mu, gamma);
    let mut roots: Vec<Complex64> = Vec::new();
    let n_re = 30;
    let n_im = 60;
    for i in 0..=n_re {
        for j in 0..=n_im {
            let seed = Complex64::new(
                -bound + 2.0 * bound * i as f64 / n_re as f64,
                2.0 * bound * j as f64 / n_im as f64,
            );
            let mut z = seed;
            let mut converged = false;
            for _ in 0..80 {
                let fz = char_fn(z, mu, gamma, tau0);
                let dz = char_fn_deriv(z, mu, gamma, tau0);
                if dz.norm() == 0.0 {
                    break;
                }
                let step = fz / dz;
                z -= step;
                if step.norm() < 1e-13 * (1.0 + z.norm()) {
                    converged = true;
                    break;
                }
                if z.norm() > 50.0 * bound {
                    break;
                }
            }
            if !converged {
                continue;
            }
            let residual_scale = (1.0 + z.norm()).powi(mu.len() as i32)
                + gamma.iter().fold(1.0_f64, |p, v| p * v.abs());
            if char_fn(z, mu, gamma, tau0).norm() > 1e-8 * residual_scale {
                continue;
            }
            if z.re <= re_floor {
                continue;
            }
            let mut canon = z;
            if canon.im.abs() < 1e-9 {
                canon = Complex64::new(canon.re, 0.0);
            }
            if canon.im < 0.0 {
                canon = canon.conj();
            }
            if !roots.iter().any(|r| (r - canon).norm() < 1e-6) {
                roots.push(canon);
            }
        }
    }
    roots.sort_by(|a, b| {
        (b.re, a.im)
            .partial_cmp(&(a.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    roots
}

/// Unstable count implied by scanned roots: conjugate pairs count twice.
pub fn count_from_roots(roots: &[Complex64], tol: f64) -> u32 {
    roots
        .iter()
        .filter(|r| r.re > tol)
        .map(|r| if r.im > 1e-9 { 2 } else { 1 })
        .sum()
}

/// The threshold level from the unstable-root count.
///
/// Positive feedback: `N* = M* + 1` when the origin is nonhyperbolic and
/// `M*` is odd, else `M*`. Negative feedback: `N* = M* + 1` when the origin
/// is nonhyperbolic and `M*` is even, else `M*`.
pub fn compute_nstar(m_star: u32, nonhyperbolic: bool, delta: Delta) -> u32 {
    match delta {
        Delta::Positive => {
            if nonhyperbolic && m_star % 2 == 1 {
                m_star + 1
            } else {
                m_star
            }
        }
        Delta::Negative => {
            if nonhyperbolic && m_star % 2 == 0 {
                m_star + 1
            } else {
                m_star
            }
        }
    }
}

/// Full pipeline: linearize, count, derive N*, and attach the audit scan.
pub fn spectrum_report(spec: &CyclicSystemSpec, kernel: &DelayKernel) -> Result<SpectrumReport> {
    let (mu, gamma, tau0) = linearize(spec, kernel)?;
    let d = spec.delta.sign();
    if !(d * gamma[spec.n_components] > 0.0) {
        return Err(Error::SystemSpec(format!(
            "feedback inconsistency: delta·gamma^N = {}",
            d * gamma[spec.n_components]
        )));
    }
    for (i, &g) in gamma.iter().enumerate().take(spec.n_components) {
        if !(g > 0.0) {
            return Err(Error::SystemSpec(format!(
                "feedback inconsistency: gamma^{i} = {g} must be positive"
            )));
        }
    }
    let (m_star, nonhyperbolic, contour) = count_unstable_roots(&mu, &gamma, tau0)?;
    let n_star = compute_nstar(m_star, nonhyperbolic, spec.delta);
    let oracle_roots = seeded_root_scan(&mu, &gamma, tau0, -1.0);
    let oracle_count = count_from_roots(&oracle_roots, TOL_HYP);
    Ok(SpectrumReport {
        mu,
        gamma,
        tau0,
        m_star,
        nonhyperbolic,
        n_star,
        contour,
        oracle_roots: oracle_roots.iter().map(|r| (r.re, r.im)).collect(),
        oracle_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Nonlinearity;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn char_fn_identities() {
        // λ = 0 is a root when ∏(-μ) = ∏γ.
        let v = char_fn(Complex64::new(0.0, 0.0), &[-1.0], &[1.0], 1.0);
        assert!(v.norm() < 1e-15);
        // λ = μ⁰ kills the polynomial product.
        let mu0 = 0.37;
        let v = char_fn(Complex64::new(mu0, 0.0), &[mu0], &[2.0], 1.5);
        let want = -(-mu0 * 1.5f64).exp() * 2.0;
        assert!((v.re - want).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn hopf_point_is_a_root() {
        // ẋ = -(π/2)·x(t-1) has a root at iπ/2.
        use std::f64::consts::FRAC_PI_2;
        let v = char_fn(
            Complex64::new(0.0, FRAC_PI_2),
            &[0.0],
            &[-FRAC_PI_2],
            1.0,
        );
        assert!(v.norm() < 1e-14, "|F(iπ/2)| = {}", v.norm());
    }

    #[test]
    fn linearize_presets() {
        let kernel = DelayKernel::constant(2.0, 1.0).unwrap();
        let spec = CyclicSystemSpec::scalar(
            Nonlinearity::Linear { decay: 1.0, gain: 1.0 },
            Delta::Positive,
            2.0,
        );
        let (mu, gamma, tau0) = linearize(&spec, &kernel).unwrap();
        assert_eq!(mu, vec![-1.0]);
        assert_eq!(gamma, vec![1.0]);
        assert_eq!(tau0, 0.5);
    }

    #[test]
    fn linearize_tanh_analytic_and_numeric_agree() {
        let kernel = DelayKernel::constant(1.0, 1.0).unwrap();
        let mut spec = CyclicSystemSpec::scalar(
            Nonlinearity::TanhFeedback {
                decay: 1.0,
                gain: -2.0,
                slope: 2.0,
            },
            Delta::Negative,
            2.0,
        );
        let (mu, gamma, _) = linearize(&spec, &kernel).unwrap();
        assert_eq!(mu, vec![-1.0]);
        assert_eq!(gamma, vec![-4.0]);
        spec.numeric_derivatives = true;
        let (mu_n, gamma_n, _) = linearize(&spec, &kernel).unwrap();
        assert!((mu_n[0] - mu[0]).abs() < 1e-7);
        assert!((gamma_n[0] - gamma[0]).abs() < 1e-7);
    }

    /// Golden scalar cases (μ = 0, τ₀ = 1, δ = -1): crossings of
    /// `λ = γ·e^{-λ}` sit at |γ| = π/2 and 5π/2, so γ = -1, -2, -8 give
    /// 0, 2, 4 unstable roots. Verified against the seeded scan.
    #[test]
    fn golden_unstable_counts() {
        for (gamma, want) in [(-1.0, 0u32), (-2.0, 2), (-8.0, 4)] {
            let (m, nonhyp, _) = count_unstable_roots(&[0.0], &[gamma], 1.0).unwrap();
            assert_eq!(m, want, "gamma = {gamma}");
            assert!(!nonhyp, "gamma = {gamma} flagged nonhyperbolic");
            let roots = seeded_root_scan(&[0.0], &[gamma], 1.0, -1.0);
            assert_eq!(count_from_roots(&roots, TOL_HYP), want);
        }
    }

    #[test]
    fn golden_counts_criterion_nine_systems() {
        // μ = -1: γ = -4 has one unstable pair, γ = -0.5 none.
        let (m, nonhyp, _) = count_unstable_roots(&[-1.0], &[-4.0], 1.0).unwrap();
        assert_eq!((m, nonhyp), (2, false));
        let (m, nonhyp, _) = count_unstable_roots(&[-1.0], &[-0.5], 1.0).unwrap();
        assert_eq!((m, nonhyp), (0, false));
    }

    #[test]
    fn stable_positive_feedback_leading_root() {
        // μ = -1, γ = 0.1, δ = +1: stable; the leading root is real.
        let (m, nonhyp, _) = count_unstable_roots(&[-1.0], &[0.1], 1.0).unwrap();
        assert_eq!((m, nonhyp), (0, false));
        let roots = seeded_root_scan(&[-1.0], &[0.1], 1.0, -1.0);
        let lead = roots
            .iter()
            .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap())
            .unwrap();
        assert!(lead.im.abs() < 1e-9);
        assert!((lead.re - -0.7815207694300065).abs() < 1e-9, "lead = {lead}");
    }

    #[test]
    fn nonhyperbolic_at_first_crossing() {
        use std::f64::consts::FRAC_PI_2;
        let (m, nonhyp, _) = count_unstable_roots(&[0.0], &[-FRAC_PI_2], 1.0).unwrap();
        assert!(nonhyp, "crossing not detected");
        assert_eq!(m, 0);
        assert_eq!(compute_nstar(m, nonhyp, Delta::Negative), 1);
    }

    #[test]
    fn nstar_case_table() {
        // Hyperbolic: N* = M* for both signs and parities.
        assert_eq!(compute_nstar(2, false, Delta::Negative), 2);
        assert_eq!(compute_nstar(3, false, Delta::Negative), 3);
        assert_eq!(compute_nstar(2, false, Delta::Positive), 2);
        assert_eq!(compute_nstar(3, false, Delta::Positive), 3);
        // Nonhyperbolic, positive feedback: bump odd counts.
        assert_eq!(compute_nstar(1, true, Delta::Positive), 2);
        assert_eq!(compute_nstar(2, true, Delta::Positive), 2);
        // Nonhyperbolic, negative feedback: bump even counts.
        assert_eq!(compute_nstar(0, true, Delta::Negative), 1);
        assert_eq!(compute_nstar(2, true, Delta::Negative), 3);
        assert_eq!(compute_nstar(1, true, Delta::Negative), 1);
    }

    #[test]
    fn oracle_roots_conjugate_symmetric_and_bounded() {
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..50 {
            let mu = [rng.gen_range(-2.0..1.0)];
            let gamma = [rng.gen_range(-3.0..-0.2)];
            let tau0 = rng.gen_range(0.5..2.0);
            let bound = modulus_bound(&mu, &gamma);
            let roots = seeded_root_scan(&mu, &gamma, tau0, -0.5);
            for r in &roots {
                assert!(r.im >= 0.0);
                if r.re > TOL_HYP {
                    assert!(
                        r.re <= bound && r.im <= bound,
                        "unstable root {r} escapes the rectangle bound {bound}"
                    );
                }
                // Canonical representative must really be a root; the
                // conjugate is a root automatically for real coefficients.
                assert!(char_fn(*r, &mu, &gamma, tau0).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn winding_agrees_with_oracle_on_random_draws() {
        let mut rng = StdRng::seed_from_u64(101);
        let mut checked = 0;
        while checked < 1000 {
            let n: usize = rng.gen_range(0..=3);
            let delta = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let mu: Vec<f64> = (0..=n).map(|_| rng.gen_range(-2.0..1.0)).collect();
            let mut gamma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            gamma.push(delta * rng.gen_range(0.1..2.5));
            let tau0 = rng.gen_range(0.5..1.5);
            let Ok((m, nonhyp, _)) = count_unstable_roots(&mu, &gamma, tau0) else {
                continue;
            };
            if nonhyp {
                continue;
            }
            let roots = seeded_root_scan(&mu, &gamma, tau0, -0.5);
            // Stay away from crossing curves.
            if roots.iter().any(|r| r.re.abs() < 1e-3) {
                continue;
            }
            let oracle = count_from_roots(&roots, TOL_HYP);
            assert_eq!(m, oracle, "mu={mu:?} gamma={gamma:?} tau0={tau0}");
            checked += 1;
        }
    }

    #[test]
    fn nstar_minus_mstar_in_unit_range() {
        for m in 0..6u32 {
            for nonhyp in [false, true] {
                for d in [Delta::Positive, Delta::Negative] {
                    let n = compute_nstar(m, nonhyp, d);
                    assert!(n == m || n == m + 1);
                }
            }
        }
    }

    #[test]
    fn report_pipeline() {
        let kernel = DelayKernel::constant(1.0, 1.0).unwrap();
        let spec = CyclicSystemSpec::scalar(
            Nonlinearity::TanhFeedback {
                decay: 1.0,
                gain: -2.0,
                slope: 2.0,
            },
            Delta::Negative,
            2.0,
        );
        let report = spectrum_report(&spec, &kernel).unwrap();
        assert_eq!(report.m_star, 2);
        assert_eq!(report.n_star, 2);
        assert_eq!(report.oracle_count, 2);
        assert!(!report.nonhyperbolic);
        assert_eq!(report.mu, vec![-1.0]);
        assert_eq!(report.gamma, vec![-4.0]);
    }
}
