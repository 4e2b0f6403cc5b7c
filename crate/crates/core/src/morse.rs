//! Ensemble evidence for the gradient-like level structure: integrate many
//! seeds, sample the Lyapunov level along each trajectory, estimate the
//! limit level, and assemble a level graph whose edges must never point
//! upward.
//!
//! Backward (entire) solutions are not numerically accessible, so the level
//! held over an early window after the regularization time serves as the
//! surrogate for the backward-limit level; the ordering check
//! `late ≤ early` is the forward-verifiable half of the decomposition
//! ordering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integrator::{integrate, Trajectory, TrajectoryChecks};
use crate::kernel::DelayKernel;
use crate::lyapunov::lyapunov_value;
use crate::segment::Segment;
use crate::spectrum::SpectrumReport;
use crate::system::CyclicSystemSpec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Scan parameters for [`run_ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    /// Sampling interval for the V series (first sample at t = r).
    pub sample_dt: f64,
    /// Number of trailing samples that must agree for a resolved limit
    /// level; also the early-window width.
    pub window: usize,
    /// Spectral threshold level for the consistency check.
    pub n_star: u32,
    /// Cap level for the top bucket; `None` defaults to `n_star + 2`.
    pub n0: Option<u32>,
    /// Radius of the near-origin ball for tail classification.
    pub origin_radius: f64,
    /// Early-window start; the count is expected to have regularized by
    /// here. Exposed as a scan parameter, not validated against theory.
    pub regularization_time: f64,
    /// Period search lower bound.
    pub min_period: f64,
    /// Period search upper bound.
    pub max_period: f64,
    /// Sup-distance threshold for accepting a nearest return as periodic.
    pub period_tol: f64,
}

impl ScanParams {
    pub fn for_system(spec: &CyclicSystemSpec, r: f64, n_star: u32) -> Self {
        Self {
            sample_dt: 0.5,
            window: 8,
            n_star,
            n0: None,
            origin_radius: 0.01,
            regularization_time: 2.0 * r * (spec.n_components as f64 + 2.0),
            min_period: 0.5,
            max_period: 12.0,
            period_tol: 0.01,
        }
    }

    pub fn n0_effective(&self) -> u32 {
        self.n0.unwrap_or(self.n_star + 2)
    }
}

/// One V observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VSample {
    pub t: f64,
    /// `None` when V is undefined (near origin) or indeterminate.
    pub v: Option<u32>,
}

/// Per-seed scan record. The V series is stored by its change points: the
/// level at time `t` is the value of the latest change point with time
/// `≤ t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed_index: usize,
    /// V at the first sample (t = r), when defined.
    pub initial_v: Option<u32>,
    /// Change points of the sampled V series.
    pub v_changes: Vec<VSample>,
    pub sample_count: usize,
    /// Level held over the early window after the regularization time.
    pub early_level: Option<u32>,
    /// Level shared by the last `window` samples, if constant.
    pub omega_level: Option<u32>,
    pub period: Option<f64>,
    /// V constant around one full detected period.
    pub period_level_constant: Option<bool>,
    /// Final-quarter samples all within `origin_radius` of the origin.
    pub near_origin_tail: bool,
    /// Largest segment norm over the final quarter of the samples.
    pub tail_max_norm: Option<f64>,
    /// All resolved post-transient levels at or above the bucket cap N₀.
    pub in_splus_bucket: bool,
    pub checks: Option<TrajectoryChecks>,
    /// Integration failure, recorded rather than fatal.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VIncreaseEvent {
    pub seed: usize,
    pub t_prev: f64,
    pub v_prev: u32,
    pub t_next: f64,
    pub v_next: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpwardEdge {
    pub seed: usize,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NstarViolation {
    pub seed: usize,
    pub t: f64,
    pub v: u32,
    pub n_star: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaAboveFirst {
    pub seed: usize,
    pub first: u32,
    pub omega: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicLevelViolation {
    pub seed: usize,
    pub period: f64,
}

/// All violation lists; every one must stay empty on a compliant system.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub v_increase: Vec<VIncreaseEvent>,
    pub upward_edges: Vec<UpwardEdge>,
    pub nstar: Vec<NstarViolation>,
    pub omega_above_first: Vec<OmegaAboveFirst>,
    pub periodic_level: Vec<PeriodicLevelViolation>,
}

impl Violations {
    pub fn required_ok(&self) -> bool {
        self.v_increase.is_empty()
            && self.upward_edges.is_empty()
            && self.nstar.is_empty()
            && self.omega_above_first.is_empty()
            && self.periodic_level.is_empty()
    }
}

/// An observed transition between held levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelEdge {
    pub from: u32,
    pub to: u32,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeDomain {
    Continuous,
    Discrete,
}

/// Ensemble-level report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseReport {
    pub time_domain: TimeDomain,
    pub n_star: u32,
    pub n0: u32,
    pub horizon: f64,
    pub sample_dt: f64,
    pub seed_count: usize,
    pub levels_observed: Vec<u32>,
    pub level_graph: Vec<LevelEdge>,
    /// Seeds holding each level both early and late (stationary evidence).
    pub stationary_levels: Vec<(u32, usize)>,
    pub trajectories: Vec<TrajectoryRecord>,
    pub violations: Violations,
}

/// Limit-level estimate: the value shared by the last `window` samples, or
/// `None` when they disagree or are undefined.
pub fn estimate_omega_level(series: &[Option<u32>], window: usize) -> Option<u32> {
    if series.len() < window || window == 0 {
        return None;
    }
    let tail = &series[series.len() - window..];
    let first = tail[0]?;
    for v in tail.iter() {
        if *v != Some(first) {
            return None;
        }
    }
    Some(first)
}

/// Level held over the first `window` samples at or after `t_from`.
fn early_window_level(samples: &[VSample], t_from: f64, window: usize) -> Option<u32> {
    let eligible: Vec<Option<u32>> = samples
        .iter()
        .filter(|s| s.t >= t_from)
        .map(|s| s.v)
        .collect();
    if eligible.len() < window || window == 0 {
        return None;
    }
    let first = eligible[0]?;
    for v in eligible.iter().take(window) {
        if *v != Some(first) {
            return None;
        }
    }
    Some(first)
}

/// Nearest-return period search on segment sup-distance.
///
/// `seg_at` provides the phase point at a time; `end` is the last covered
/// time. Tails with no oscillation (all returns below `tol` regardless of
/// shift) report `None`.
pub fn detect_periodic_with(
    seg_at: &dyn Fn(f64) -> Result<Segment>,
    end: f64,
    earliest: f64,
    tol: f64,
    min_period: f64,
    max_period: f64,
    scan_dt: f64,
) -> Option<f64> {
    let delta = 0.5 * min_period;
    let p_max = max_period.min(end - earliest - 2.0 * delta);
    if p_max <= min_period {
        return None;
    }
    let seg_end = seg_at(end).ok()?;
    // Equilibrium-like tails have nothing to detect.
    let mut osc = 0.0_f64;
    let mut probe = end - delta;
    while probe > end - p_max {
        if let Ok(seg) = seg_at(probe) {
            osc = osc.max(seg.sup_distance(&seg_end).ok()?);
        }
        probe -= delta;
    }
    if osc < tol {
        return None;
    }
    let dist = |p: f64| -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..3 {
            let t_late = end - j as f64 * delta;
            let t_early = t_late - p;
            match (seg_at(t_early), seg_at(t_late)) {
                (Ok(a), Ok(b)) => match a.sup_distance(&b) {
                    Ok(d) => worst = worst.max(d),
                    Err(_) => return f64::INFINITY,
                },
                _ => return f64::INFINITY,
            }
        }
        worst
    };
    let mut best_p = min_period;
    let mut best_d = f64::INFINITY;
    let mut p = min_period;
    while p <= p_max {
        let d = dist(p);
        if d < best_d {
            best_d = d;
            best_p = p;
        }
        p += scan_dt;
    }
    // Golden-section refinement around the grid minimum.
    let mut lo = (best_p - scan_dt).max(min_period);
    let mut hi = (best_p + scan_dt).min(p_max);
    let phi = 0.5 * (3.0 - 5.0_f64.sqrt());
    for _ in 0..40 {
        let a = lo + phi * (hi - lo);
        let b = hi - phi * (hi - lo);
        if dist(a) < dist(b) {
            hi = b;
        } else {
            lo = a;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    let p_star = 0.5 * (lo + hi);
    let d_star = dist(p_star);
    (d_star < tol).then_some(p_star)
}

/// Period search on a trajectory tail.
pub fn detect_periodic(
    traj: &Trajectory,
    tol: f64,
    min_period: f64,
    max_period: f64,
    scan_dt: f64,
) -> Option<f64> {
    let end = traj.end_time();
    let seg_at = |t: f64| traj.segment_at(t);
    detect_periodic_with(&seg_at, end, traj.r, tol, min_period, max_period, scan_dt)
}

/// Random truncated Fourier seeds inside the phase space: amplitude capped
/// at `0.8·M` and slope samples within the Lipschitz bound.
pub fn generate_fourier_seeds(
    spec: &CyclicSystemSpec,
    r: f64,
    grid_nodes: usize,
    count: usize,
    rng_seed: u64,
    modes: usize,
) -> Vec<Segment> {
    let m = spec.dissipativity_bound;
    let l0 = spec.lipschitz_bound();
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed.wrapping_add(i as u64));
            let mut coeffs = Vec::with_capacity(modes);
            for k in 1..=modes {
                let w = k as f64 * std::f64::consts::PI / r;
                coeffs.push((rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), w));
            }
            let offset: f64 = rng.gen_range(-0.5..0.5);
            let f = |s: f64| -> f64 {
                offset
                    + coeffs
                        .iter()
                        .map(|(a, b, w)| a * (w * s).cos() + b * (w * s).sin())
                        .sum::<f64>()
            };
            let df = |s: f64| -> f64 {
                coeffs
                    .iter()
                    .map(|(a, b, w)| -a * w * (w * s).sin() + b * w * (w * s).cos())
                    .sum::<f64>()
            };
            let raw = Segment::from_fn(f, df, vec![], r, grid_nodes).expect("finite coefficients");
            let (sup, c1) = raw.norms();
            let slope_sup = c1 - sup;
            let cap = (0.8 * m / sup.max(1e-12)).min(l0 / slope_sup.max(1e-12));
            let scale = cap * rng.gen_range(0.25..1.0);
            let values: Vec<f64> = raw.values().iter().map(|v| v * scale).collect();
            let slopes: Vec<f64> = raw.slopes().iter().map(|v| v * scale).collect();
            let discrete: Vec<f64> = (0..spec.n_components)
                .map(|_| rng.gen_range(-0.8 * m..0.8 * m))
                .collect();
            Segment::new(values, slopes, discrete, r, spec.n_components)
                .expect("scaled seed is finite")
        })
        .collect()
}

/// Increases between consecutive resolved samples; each one is a
/// violation of the level monotonicity.
pub fn v_increase_events(seed: usize, samples: &[VSample]) -> Vec<VIncreaseEvent> {
    let mut events = Vec::new();
    let mut last_resolved: Option<(f64, u32)> = None;
    for s in samples {
        if let Some(v) = s.v {
            if let Some((tp, vp)) = last_resolved {
                if v > vp {
                    events.push(VIncreaseEvent {
                        seed,
                        t_prev: tp,
                        v_prev: vp,
                        t_next: s.t,
                        v_next: v,
                    });
                }
            }
            last_resolved = Some((s.t, v));
        }
    }
    events
}

/// Accumulator folding per-seed records into the level graph, the
/// stationary occupancy, and the ordering violations.
#[derive(Default)]
pub(crate) struct LevelFold {
    pub edge_counts: std::collections::BTreeMap<(u32, u32), usize>,
    pub stationary: std::collections::BTreeMap<u32, usize>,
    pub levels: std::collections::BTreeSet<u32>,
}

impl LevelFold {
    pub fn note(&mut self, record: &TrajectoryRecord, violations: &mut Violations) {
        for s in &record.v_changes {
            if let Some(v) = s.v {
                self.levels.insert(v);
            }
        }
        if let (Some(k), Some(n)) = (record.early_level, record.omega_level) {
            if k == n {
                *self.stationary.entry(k).or_insert(0) += 1;
            } else {
                *self.edge_counts.entry((k, n)).or_insert(0) += 1;
                if n > k {
                    violations.upward_edges.push(UpwardEdge {
                        seed: record.seed_index,
                        from: k,
                        to: n,
                    });
                }
            }
        }
        if let (Some(first), Some(omega)) = (record.initial_v, record.omega_level) {
            if omega > first {
                violations.omega_above_first.push(OmegaAboveFirst {
                    seed: record.seed_index,
                    first,
                    omega,
                });
            }
        }
    }

    pub fn edges(self) -> (Vec<LevelEdge>, Vec<(u32, usize)>, Vec<u32>) {
        (
            self.edge_counts
                .into_iter()
                .map(|((from, to), count)| LevelEdge { from, to, count })
                .collect(),
            self.stationary.into_iter().collect(),
            self.levels.into_iter().collect(),
        )
    }
}

fn compress_series(samples: &[VSample]) -> Vec<VSample> {
    let mut changes = Vec::new();
    let mut last: Option<Option<u32>> = None;
    for s in samples {
        if last != Some(s.v) {
            changes.push(*s);
            last = Some(s.v);
        }
    }
    changes
}

fn scan_one(
    seed_index: usize,
    spec: &CyclicSystemSpec,
    kernel: &DelayKernel,
    seed: &Segment,
    horizon: f64,
    dt: f64,
    params: &ScanParams,
) -> (TrajectoryRecord, Vec<VIncreaseEvent>) {
    let delta = spec.delta;
    let traj = match integrate(spec, kernel, seed, horizon, dt) {
        Ok(t) => t,
        Err(e) => {
            return (
                TrajectoryRecord {
                    seed_index,
                    initial_v: None,
                    v_changes: Vec::new(),
                    sample_count: 0,
                    early_level: None,
                    omega_level: None,
                    period: None,
                    period_level_constant: None,
                    near_origin_tail: false,
                    tail_max_norm: None,
                    in_splus_bucket: false,
                    checks: None,
                    error: Some(e.to_string()),
                },
                Vec::new(),
            )
        }
    };
    let end = traj.end_time();
    let mut samples: Vec<VSample> = Vec::new();
    let mut norms: Vec<f64> = Vec::new();
    let mut t = traj.r;
    while t <= end + 1e-9 {
        let (v, norm) = match traj.segment_at(t) {
            Ok(seg) => {
                let norm = seg.sup_norm();
                let v = if seg.near_origin() {
                    None
                } else {
                    lyapunov_value(&seg, kernel, delta).ok().map(|lv| lv.value)
                };
                (v, norm)
            }
            Err(_) => (None, f64::NAN),
        };
        samples.push(VSample { t: (t * 1e12).round() / 1e12, v });
        norms.push(norm);
        t += params.sample_dt;
    }

    let v_increase = v_increase_events(seed_index, &samples);
    let series: Vec<Option<u32>> = samples.iter().map(|s| s.v).collect();
    let omega_level = estimate_omega_level(&series, params.window);
    let early_level = early_window_level(&samples, params.regularization_time, params.window);
    let quarter = samples.len().div_ceil(4);
    let tail_max_norm = (!samples.is_empty()
        && norms[norms.len() - quarter..].iter().all(|n| n.is_finite()))
    .then(|| {
        norms[norms.len() - quarter..]
            .iter()
            .fold(0.0_f64, |a, &b| a.max(b))
    });
    let near_origin_tail = tail_max_norm.is_some_and(|m| m < params.origin_radius);
    let resolved: Vec<u32> = series.iter().flatten().copied().collect();
    let in_splus_bucket =
        !resolved.is_empty() && resolved.iter().all(|&v| v >= params.n0_effective());

    let period = detect_periodic(
        &traj,
        params.period_tol,
        params.min_period,
        params.max_period,
        params.sample_dt,
    );
    let period_level_constant = period.map(|p| {
        let mut levels = Vec::new();
        let steps = 16;
        for k in 0..=steps {
            let t = end - p * k as f64 / steps as f64;
            if t < traj.r {
                break;
            }
            if let Ok(seg) = traj.segment_at(t) {
                if !seg.near_origin() {
                    if let Ok(lv) = lyapunov_value(&seg, kernel, delta) {
                        levels.push(lv.value);
                    }
                }
            }
        }
        !levels.is_empty() && levels.iter().all(|&v| v == levels[0])
    });

    (
        TrajectoryRecord {
            seed_index,
            initial_v: series.first().copied().flatten(),
            v_changes: compress_series(&samples),
            sample_count: samples.len(),
            early_level,
            omega_level,
            period,
            period_level_constant,
            near_origin_tail,
            tail_max_norm,
            in_splus_bucket,
            checks: Some(traj.trajectory_checks()),
            error: None,
        },
        v_increase,
    )
}

/// Integrates every seed, samples V after the transient `r`, and folds the
/// per-seed records into a level graph and violation lists. Deterministic
/// for a fixed seed list; workers run in parallel and the fold follows seed
/// order.
pub fn run_ensemble(
    spec: &CyclicSystemSpec,
    kernel: &DelayKernel,
    seeds: &[Segment],
    horizon: f64,
    dt: f64,
    params: &ScanParams,
) -> MorseReport {
    let results: Vec<(TrajectoryRecord, Vec<VIncreaseEvent>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| scan_one(i, spec, kernel, seed, horizon, dt, params))
        .collect();

    let mut violations = Violations::default();
    let mut trajectories = Vec::with_capacity(results.len());
    let mut fold = LevelFold::default();

    for (record, v_inc) in results {
        violations.v_increase.extend(v_inc);
        fold.note(&record, &mut violations);
        if record.period_level_constant == Some(false) {
            violations.periodic_level.push(PeriodicLevelViolation {
                seed: record.seed_index,
                period: record.period.unwrap_or(f64::NAN),
            });
        }
        trajectories.push(record);
    }
    let (level_graph, stationary_levels, levels_observed) = fold.edges();

    MorseReport {
        time_domain: TimeDomain::Continuous,
        n_star: params.n_star,
        n0: params.n0_effective(),
        horizon,
        sample_dt: params.sample_dt,
        seed_count: seeds.len(),
        levels_observed,
        level_graph,
        stationary_levels,
        trajectories,
        violations,
    }
}

/// Threshold consistency: every trajectory whose tail stays within
/// `origin_radius` of the origin must hold `V ≥ N*` at all resolved
/// post-transient samples.
pub fn check_nstar_consistency(
    report: &MorseReport,
    spectrum: &SpectrumReport,
    origin_radius: f64,
) -> Vec<NstarViolation> {
    let mut out = Vec::new();
    for record in &report.trajectories {
        if !record.tail_max_norm.is_some_and(|m| m < origin_radius) {
            continue;
        }
        for s in &record.v_changes {
            if let Some(v) = s.v {
                if v < spectrum.n_star {
                    out.push(NstarViolation {
                        seed: record.seed_index,
                        t: s.t,
                        v,
                        n_star: spectrum.n_star,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelProfile;
    use crate::lyapunov::Delta;
    use crate::spectrum::ContourInfo;
    use crate::system::Nonlinearity;

    #[test]
    fn omega_level_examples() {
        let series: Vec<Option<u32>> =
            [5, 3, 3, 1, 1, 1, 1].iter().map(|&v| Some(v)).collect();
        assert_eq!(estimate_omega_level(&series, 4), Some(1));
        let series: Vec<Option<u32>> =
            [5, 3, 3, 1, 1, 2, 1].iter().map(|&v| Some(v)).collect();
        assert_eq!(estimate_omega_level(&series, 4), None);
        let series = vec![Some(2), Some(1), None, Some(1)];
        assert_eq!(estimate_omega_level(&series, 2), None);
        assert_eq!(estimate_omega_level(&[], 4), None);
    }

    #[test]
    fn synthetic_period_detected() {
        // A synthetic phase point sliding along sin(2πt/3): period 3.
        let seg_at = |t: f64| {
            Segment::from_fn(
                move |s| (std::f64::consts::TAU * (t + s) / 3.0).sin(),
                move |s| {
                    std::f64::consts::TAU / 3.0
                        * (std::f64::consts::TAU * (t + s) / 3.0).cos()
                },
                vec![],
                1.0,
                101,
            )
        };
        let p = detect_periodic_with(&seg_at, 40.0, 1.0, 0.01, 0.5, 12.0, 0.5)
            .expect("period should be found");
        assert!((p - 3.0).abs() < 0.5, "p = {p}");
    }

    #[test]
    fn equilibrium_tail_has_no_period() {
        let seg_at = |_t: f64| Segment::constant(0.7, 1.0, 0);
        assert_eq!(
            detect_periodic_with(&seg_at, 40.0, 1.0, 0.01, 0.5, 12.0, 0.5),
            None
        );
    }

    fn wright_like() -> CyclicSystemSpec {
        CyclicSystemSpec::scalar(
            Nonlinearity::TanhFeedback { decay: 1.0, gain: -2.0, slope: 2.0 },
            Delta::Negative,
            2.0,
        )
    }

    fn plateau_kernel() -> DelayKernel {
        DelayKernel::new(
            KernelProfile::PlateauTanh { alpha0: 1.0, eps: 0.05, alpha2: 1.2, rate: 1.0 },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn fourier_seeds_stay_in_phase_space() {
        let spec = wright_like();
        let seeds = generate_fourier_seeds(&spec, 1.0, 201, 32, 7, 4);
        let l0 = spec.lipschitz_bound();
        for seed in &seeds {
            assert!(seed.sup_norm() <= 0.8 * spec.dissipativity_bound + 1e-12);
            let (sup, c1) = seed.norms();
            assert!(c1 - sup <= l0 + 1e-9);
        }
        // Deterministic.
        let again = generate_fourier_seeds(&spec, 1.0, 201, 32, 7, 4);
        assert_eq!(seeds, again);
    }

    #[test]
    fn small_ensemble_is_clean_and_deterministic() {
        let spec = wright_like();
        let kernel = plateau_kernel();
        let seeds = generate_fourier_seeds(&spec, 1.0, 201, 6, 42, 4);
        let mut params = ScanParams::for_system(&spec, 1.0, 2);
        params.sample_dt = 0.5;
        let report = run_ensemble(&spec, &kernel, &seeds, 60.0, 1.0 / 400.0, &params);
        assert_eq!(report.seed_count, 6);
        assert!(report.violations.v_increase.is_empty(), "{:?}", report.violations);
        assert!(report.violations.upward_edges.is_empty());
        assert!(report.violations.omega_above_first.is_empty());
        for t in &report.trajectories {
            assert!(t.error.is_none());
            let checks = t.checks.as_ref().unwrap();
            assert_eq!(checks.eta_violations, 0);
            assert_eq!(checks.m_exit_violations, 0);
        }
        for e in &report.level_graph {
            assert!(e.to < e.from);
        }
        // No resolved level can exceed the grid-representable alternation
        // count (samples minus one, plus the parity bump).
        let max_level = 201 + spec.n_components as u32 + 1;
        assert!(report.levels_observed.iter().all(|&v| v <= max_level));
        let again = run_ensemble(&spec, &kernel, &seeds, 60.0, 1.0 / 400.0, &params);
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn origin_seed_flagged_near_origin() {
        let spec = wright_like();
        let kernel = plateau_kernel();
        let seeds = vec![Segment::from_fn(|_| 0.0, |_| 0.0, vec![], 1.0, 201).unwrap()];
        let params = ScanParams::for_system(&spec, 1.0, 2);
        let report = run_ensemble(&spec, &kernel, &seeds, 20.0, 1.0 / 400.0, &params);
        let rec = &report.trajectories[0];
        assert!(rec.near_origin_tail);
        assert_eq!(rec.initial_v, None);
        assert_eq!(rec.omega_level, None);
        assert!(report.violations.required_ok());
    }

    fn record_with_levels(
        seed: usize,
        initial: Option<u32>,
        early: Option<u32>,
        omega: Option<u32>,
    ) -> TrajectoryRecord {
        TrajectoryRecord {
            seed_index: seed,
            initial_v: initial,
            v_changes: initial
                .map(|v| vec![VSample { t: 1.0, v: Some(v) }])
                .unwrap_or_default(),
            sample_count: 10,
            early_level: early,
            omega_level: omega,
            period: None,
            period_level_constant: None,
            near_origin_tail: false,
            tail_max_norm: None,
            in_splus_bucket: false,
            checks: None,
            error: None,
        }
    }

    #[test]
    fn v_increase_detection() {
        let samples: Vec<VSample> = [Some(3), Some(1), None, Some(2), Some(2)]
            .iter()
            .enumerate()
            .map(|(k, v)| VSample { t: k as f64, v: *v })
            .collect();
        let events = v_increase_events(7, &samples);
        assert_eq!(events.len(), 1);
        assert_eq!((events[0].v_prev, events[0].v_next), (1, 2));
        assert_eq!(events[0].seed, 7);
        // Monotone series produce none.
        let clean: Vec<VSample> = [Some(3), Some(3), Some(1)]
            .iter()
            .enumerate()
            .map(|(k, v)| VSample { t: k as f64, v: *v })
            .collect();
        assert!(v_increase_events(0, &clean).is_empty());
    }

    #[test]
    fn level_fold_classifies_transitions() {
        let mut fold = LevelFold::default();
        let mut violations = Violations::default();
        // Downward edge 3 -> 1.
        fold.note(&record_with_levels(0, Some(3), Some(3), Some(1)), &mut violations);
        // Stationary at 1.
        fold.note(&record_with_levels(1, Some(1), Some(1), Some(1)), &mut violations);
        // Upward edge 1 -> 3 must be flagged, as must omega above first.
        fold.note(&record_with_levels(2, Some(1), Some(1), Some(3)), &mut violations);
        // Unresolved limit contributes nothing.
        fold.note(&record_with_levels(3, Some(2), Some(2), None), &mut violations);
        let (edges, stationary, levels) = fold.edges();
        assert_eq!(edges.len(), 2);
        assert!(edges.contains(&LevelEdge { from: 3, to: 1, count: 1 }));
        assert!(edges.contains(&LevelEdge { from: 1, to: 3, count: 1 }));
        assert_eq!(stationary, vec![(1, 1)]);
        assert_eq!(levels, vec![1, 2, 3]);
        assert_eq!(violations.upward_edges.len(), 1);
        assert_eq!(violations.upward_edges[0].seed, 2);
        assert_eq!(violations.omega_above_first.len(), 1);
        assert!(!violations.required_ok());
    }

    #[test]
    fn corrupted_report_yields_nstar_violation() {
        let record = TrajectoryRecord {
            seed_index: 0,
            initial_v: Some(0),
            v_changes: vec![VSample { t: 1.0, v: Some(0) }],
            sample_count: 10,
            early_level: Some(0),
            omega_level: Some(0),
            period: None,
            period_level_constant: None,
            near_origin_tail: true,
            tail_max_norm: Some(0.001),
            in_splus_bucket: false,
            checks: None,
            error: None,
        };
        let report = MorseReport {
            time_domain: TimeDomain::Continuous,
            n_star: 2,
            n0: 4,
            horizon: 10.0,
            sample_dt: 0.5,
            seed_count: 1,
            levels_observed: vec![0],
            level_graph: vec![],
            stationary_levels: vec![(0, 1)],
            trajectories: vec![record],
            violations: Violations::default(),
        };
        let spectrum = SpectrumReport {
            mu: vec![-1.0],
            gamma: vec![-4.0],
            tau0: 1.0,
            m_star: 2,
            nonhyperbolic: false,
            n_star: 2,
            contour: ContourInfo {
                sigma_minus: 1e-6,
                sigma_plus: 6.0,
                omega: 6.0,
                evaluations: 0,
            },
            oracle_roots: vec![],
            oracle_count: 2,
        };
        let violations = check_nstar_consistency(&report, &spectrum, 0.01);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].v, 0);
        assert_eq!(violations[0].n_star, 2);
    }

    #[test]
    fn wright_tail_is_periodic_with_constant_level() {
        let spec = wright_like();
        let kernel = plateau_kernel();
        let seeds = generate_fourier_seeds(&spec, 1.0, 201, 2, 5, 3);
        let params = ScanParams::for_system(&spec, 1.0, 2);
        let report = run_ensemble(&spec, &kernel, &seeds, 120.0, 1.0 / 400.0, &params);
        // The attractor at these parameters carries a periodic regime; at
        // least one seed should land on it and hold a constant level there.
        let periodic: Vec<_> = report
            .trajectories
            .iter()
            .filter(|t| t.period.is_some())
            .collect();
        assert!(
            !periodic.is_empty(),
            "no periodic tail detected: {:?}",
            report
                .trajectories
                .iter()
                .map(|t| (t.seed_index, t.omega_level, t.period))
                .collect::<Vec<_>>()
        );
        for t in periodic {
            assert_eq!(t.period_level_constant, Some(true), "seed {}", t.seed_index);
        }
        assert!(report.violations.required_ok());
    }
}
