//! Exact discrete-time analogue: iterate `x_{k+1} = f(x_k, x_{k-n})` on
//! state vectors `(x_k, ..., x_{k-n})`, count sign changes with integer
//! arithmetic, and run the same level-structure checks as the continuous
//! scan with zero tolerance noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{sign_alternations, Delta, LyapunovValue, ParityBranch};
use crate::morse::{
    estimate_omega_level, v_increase_events, MorseReport, TimeDomain, TrajectoryRecord,
    VIncreaseEvent, VSample, Violations,
};

/// Named map families for the difference equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DiscreteMap {
    /// `f(u, v) = a·u + b·v`.
    Linear { a: f64, b: f64 },
    /// `f(u, v) = a·u + gain·tanh(slope·v)`.
    TanhFeedback { a: f64, gain: f64, slope: f64 },
    /// `f(u, v) = v` (pure shift; orbits are (n+1)-periodic).
    Shift,
    /// `f(u, v) = 0`.
    Zero,
}

impl DiscreteMap {
    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match *self {
            DiscreteMap::Linear { a, b } => a * u + b * v,
            DiscreteMap::TanhFeedback { a, gain, slope } => a * u + gain * (slope * v).tanh(),
            DiscreteMap::Shift => v,
            DiscreteMap::Zero => 0.0,
        }
    }

    /// `(D₁f, D₂f)` at the origin, for the linearized multiplier count.
    pub fn derivatives_at_origin(&self) -> (f64, f64) {
        match *self {
            DiscreteMap::Linear { a, b } => (a, b),
            DiscreteMap::TanhFeedback { a, gain, slope } => (a, gain * slope),
            DiscreteMap::Shift => (0.0, 1.0),
            DiscreteMap::Zero => (0.0, 0.0),
        }
    }
}

/// A scalar delay difference equation with feedback sign δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSystemSpec {
    /// Delay n ≥ 1; the state vector has n+1 entries.
    pub n: usize,
    pub map: DiscreteMap,
    pub delta: Delta,
}

impl DiscreteSystemSpec {
    /// Sampled feedback check: `δ·v·f(0, v) > 0` on a sign-symmetric grid.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::SystemSpec("delay n must be at least 1".into()));
        }
        let d = self.delta.sign();
        for k in 1..=20 {
            let v = k as f64 / 10.0;
            for v in [v, -v] {
                if !(d * v * self.map.eval(0.0, v) > 0.0) {
                    return Err(Error::SystemSpec(format!(
                        "feedback check failed at v = {v}: δ·v·f(0,v) = {}",
                        d * v * self.map.eval(0.0, v)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Regularization horizon for the discrete scan.
    pub fn regularization_steps(&self) -> usize {
        4 * self.n + 2
    }

    /// Unstable multipliers of the linearization `x_{k+1} = a·x_k + b·x_{k-n}`,
    /// counted outside the unit circle.
    pub fn unstable_multipliers(&self) -> usize {
        let (a, b) = self.map.derivatives_at_origin();
        count_unstable_multipliers(self.n, a, b)
    }
}

/// Iterates the map; state at step k is `(x_k, x_{k-1}, ..., x_{k-n})`.
pub fn orbit(
    spec: &DiscreteSystemSpec,
    initial: &[f64],
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    if initial.len() != spec.n + 1 {
        return Err(Error::LengthMismatch {
            context: "initial vector vs n+1",
            expected: spec.n + 1,
            got: initial.len(),
        });
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "initial vector" });
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut state = initial.to_vec();
    out.push(state.clone());
    for k in 0..steps {
        let next = spec.map.eval(state[0], state[spec.n]);
        if !next.is_finite() {
            return Err(Error::NonFiniteState { t: (k + 1) as f64 });
        }
        state.rotate_right(1);
        state[0] = next;
        out.push(state.clone());
    }
    Ok(out)
}

/// Vector sign-change count with parity adjustment, mirroring the
/// continuous definition. `zeta` defaults to exact zero in the discrete
/// module since no quadrature noise exists.
pub fn v_vector(vector: &[f64], delta: Delta, zeta: f64) -> Result<LyapunovValue> {
    if vector.iter().all(|v| v.abs() <= zeta) {
        return Err(Error::NearOrigin);
    }
    let sc = sign_alternations(vector.iter().copied(), zeta);
    let (value, parity_branch) = match delta {
        Delta::Positive => (if sc % 2 == 0 { sc } else { sc + 1 }, ParityBranch::VPlus),
        Delta::Negative => (if sc % 2 == 1 { sc } else { sc + 1 }, ParityBranch::VMinus),
    };
    Ok(LyapunovValue {
        sc,
        value,
        parity_branch,
        a: -(vector.len() as f64 - 1.0),
    })
}

/// Grid of seed vectors: `per_axis` points per coordinate on
/// `[-amplitude, amplitude]`. An even `per_axis` avoids exact zeros.
pub fn grid_seeds(n: usize, per_axis: usize, amplitude: f64) -> Vec<Vec<f64>> {
    let dim = n + 1;
    let count = per_axis.pow(dim as u32);
    (0..count)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    -amplitude + 2.0 * amplitude * k as f64 / (per_axis - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// Per-seed scan outcome for the exactness accounting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteScanStats {
    /// Seeds whose orbit hit an exact zero entry and were perturbed by
    /// 1e-12 and rerun.
    pub perturbed_seeds: Vec<usize>,
    /// Seeds still hitting exact zeros after perturbation (excluded from
    /// the exactness assertion, flagged here).
    pub excluded_seeds: Vec<usize>,
}

fn scan_orbit(
    spec: &DiscreteSystemSpec,
    seed: &[f64],
    steps: usize,
) -> (Vec<Option<u32>>, Vec<f64>, bool, bool) {
    // Returns (V series, per-step max-norms, hit_exact_zero, blew_up).
    let mut state = seed.to_vec();
    let mut series = Vec::with_capacity(steps + 1);
    let mut norms = Vec::with_capacity(steps + 1);
    let mut hit_zero = state.iter().any(|&v| v == 0.0);
    for _ in 0..=steps {
        series.push(v_vector(&state, spec.delta, 0.0).ok().map(|lv| lv.value));
        norms.push(state.iter().fold(0.0_f64, |a, &b| a.max(b.abs())));
        let next = spec.map.eval(state[0], state[spec.n]);
        if !next.is_finite() {
            return (series, norms, hit_zero, true);
        }
        if next == 0.0 {
            hit_zero = true;
        }
        state.rotate_right(1);
        state[0] = next;
    }
    (series, norms, hit_zero, false)
}

/// Runs the discrete ensemble: exact integer V per step, regularization
/// horizon `T = 4n + 2` as the early-window start, and the same level-graph
/// and violation accounting as the continuous scan.
pub fn discrete_scan(
    spec: &DiscreteSystemSpec,
    seeds: &[Vec<f64>],
    steps: usize,
    window: usize,
    n_star: u32,
    n0: Option<u32>,
) -> Result<(MorseReport, DiscreteScanStats)> {
    spec.validate()?;
    let t_reg = spec.regularization_steps();
    let results: Vec<(TrajectoryRecord, Vec<VIncreaseEvent>, bool, bool)> = seeds
        .par_iter()
        .enumerate()
        .map(|(seed_index, seed)| {
            let (series, norms, hit_zero, blew_up) = scan_orbit(spec, seed, steps);
            let (series, norms, perturbed, still_zero) = if hit_zero {
                let nudged: Vec<f64> = seed
                    .iter()
                    .map(|&v| if v == 0.0 { 1e-12 } else { v + 1e-12 })
                    .collect();
                let (series2, norms2, hit2, _) = scan_orbit(spec, &nudged, steps);
                (series2, norms2, true, hit2)
            } else {
                (series, norms, false, false)
            };
            let quarter = norms.len().div_ceil(4);
            let tail_max_norm = (!norms.is_empty()).then(|| {
                norms[norms.len() - quarter..]
                    .iter()
                    .fold(0.0_f64, |a, &b| a.max(b))
            });

            let samples: Vec<VSample> = series
                .iter()
                .enumerate()
                .map(|(k, v)| VSample { t: k as f64, v: *v })
                .collect();
            let v_increase = v_increase_events(seed_index, &samples);
            let omega_level = estimate_omega_level(&series, window);
            let early: Vec<Option<u32>> = series.iter().skip(t_reg).copied().collect();
            let early_level = if early.len() >= window && window > 0 {
                match early[0] {
                    Some(first) if early.iter().take(window).all(|v| *v == Some(first)) => {
                        Some(first)
                    }
                    _ => None,
                }
            } else {
                None
            };
            let n0_eff = n0.unwrap_or(n_star + 2);
            let resolved: Vec<u32> = series.iter().flatten().copied().collect();
            let record = TrajectoryRecord {
                seed_index,
                initial_v: series.first().copied().flatten(),
                v_changes: {
                    let mut changes = Vec::new();
                    let mut prev: Option<Option<u32>> = None;
                    for s in &samples {
                        if prev != Some(s.v) {
                            changes.push(*s);
                            prev = Some(s.v);
                        }
                    }
                    changes
                },
                sample_count: samples.len(),
                early_level,
                omega_level,
                period: None,
                period_level_constant: None,
                near_origin_tail: tail_max_norm.is_some_and(|m| m == 0.0),
                tail_max_norm,
                in_splus_bucket: !resolved.is_empty()
                    && resolved.iter().all(|&v| v >= n0_eff),
                checks: None,
                error: blew_up.then(|| "non-finite iterate".to_string()),
            };
            (record, v_increase, perturbed, still_zero)
        })
        .collect();

    let mut violations = Violations::default();
    let mut stats = DiscreteScanStats::default();
    let mut trajectories = Vec::with_capacity(results.len());
    let mut fold = crate::morse::LevelFold::default();

    for (record, v_inc, perturbed, excluded) in results {
        if perturbed {
            stats.perturbed_seeds.push(record.seed_index);
        }
        if excluded {
            stats.excluded_seeds.push(record.seed_index);
        } else {
            violations.v_increase.extend(v_inc);
        }
        fold.note(&record, &mut violations);
        trajectories.push(record);
    }
    let (level_graph, stationary_levels, levels_observed) = fold.edges();

    Ok((
        MorseReport {
            time_domain: TimeDomain::Discrete,
            n_star,
            n0: n0.unwrap_or(n_star + 2),
            horizon: steps as f64,
            sample_dt: 1.0,
            seed_count: seeds.len(),
            levels_observed,
            level_graph,
            stationary_levels,
            trajectories,
            violations,
        },
        stats,
    ))
}

/// Roots of `z^{n+1} - a·z^n - b` counted outside the unit circle, by
/// Durand-Kerner iteration on the trinomial. Supports the linearized
/// difference equation when an unstable-multiplier count is wanted without
/// external input.
pub fn count_unstable_multipliers(n: usize, a: f64, b: f64) -> usize {
    use num_complex::Complex64;
    let deg = n + 1;
    let p = |z: Complex64| z.powu(deg as u32) - a * z.powu(n as u32) - b;
    // Durand-Kerner from a scaled wheel of initial guesses.
    let radius = (1.0 + a.abs() + b.abs()).powf(1.0 / deg as f64);
    let mut roots: Vec<Complex64> = (0..deg)
        .map(|k| {
            Complex64::from_polar(radius, 0.4 + std::f64::consts::TAU * k as f64 / deg as f64)
        })
        .collect();
    for _ in 0..200 {
        let mut moved = 0.0_f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                continue;
            }
            let step = p(roots[i]) / denom;
            roots[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-14 {
            break;
        }
    }
    roots.iter().filter(|z| z.norm() > 1.0).count()
}
