//! Semiflow integration for the cyclic system with threshold delay:
//! a classical 4-stage explicit step with cubic Hermite dense output.
//!
//! The delayed argument `η(t) = t - τ(x_t)` is re-solved at every stage.
//! Because the rate is bounded (`α ≤ α₂`), the delay never drops below
//! `1/α₂`, so with `dt ≤ 1/(2α₂)` every delayed lookup lands in committed
//! history. The threshold equation is advanced incrementally: with
//! `∫_{η}^{t} α(x⁰) = 1` holding at the previous step, the increment
//! `∫_{t_n}^{t_s} α` over the developing step (evaluated on a provisional
//! Hermite extension) equals `∫_{η_n}^{η_s} α` over history, and the latter
//! is solved for `η_s` by safeguarded Newton. This keeps `η` strictly
//! increasing by construction and costs O(1) per stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{solve_threshold_delay, DelayKernel};
use crate::segment::{hermite_slope, hermite_value, Segment};
use crate::system::CyclicSystemSpec;

/// A completed trajectory: dense per-step states and slopes (including the
/// seeded history), the delayed-argument series, and per-step segment norms.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub spec: CyclicSystemSpec,
    pub kernel: DelayKernel,
    pub dt: f64,
    pub r: f64,
    dim: usize,
    /// Number of dense nodes before t = 0.
    n_hist: usize,
    /// Dense node times from `-n_hist·dt` through the horizon.
    times: Vec<f64>,
    /// Full state at each dense node, stride `dim`.
    states: Vec<f64>,
    /// State derivative at each dense node, stride `dim`.
    slopes: Vec<f64>,
    /// `η(t_k) = t_k - τ(x_{t_k})` for `t_k ≥ 0`.
    eta: Vec<f64>,
    /// `‖x_{t_k}‖` (window sup of |x⁰| plus discrete coordinates) for
    /// `t_k ≥ 0`.
    seg_norms: Vec<f64>,
    /// Node count used when resampling segments.
    grid_nodes: usize,
    /// Left-sided derivative of each component at the t = 0 corner.
    corner_left: Vec<f64>,
}

/// Violation counters for the structural trajectory invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryChecks {
    /// Steps where `η` failed to increase strictly.
    pub eta_violations: usize,
    /// First time with `‖x_t‖ < M`, if any.
    pub entry_time: Option<f64>,
    /// Times after entry where the state left `{‖x_t‖ < M}`.
    pub m_exit_violations: usize,
    /// Post-transient times (`t ≥ r`) where `|ẋ⁰|` exceeded the Lipschitz
    /// bound.
    pub slope_violations: usize,
    pub max_seg_norm: f64,
    pub min_eta_increment: f64,
}

/// Counts non-increasing steps in a delayed-argument series.
pub fn eta_monotonicity_violations(eta: &[f64]) -> (usize, f64) {
    let mut violations = 0;
    let mut min_inc = f64::INFINITY;
    for w in eta.windows(2) {
        let inc = w[1] - w[0];
        min_inc = min_inc.min(inc);
        if inc <= 0.0 {
            violations += 1;
        }
    }
    (violations, min_inc)
}

/// Committed dense history of `x⁰`, uniform spacing `dt`.
///
/// The node at t = 0 is a corner: the history slope `φ̇(0⁻)` and the forward
/// slope `ẋ⁰(0⁺)` differ (the primary discontinuity). `dx0` stores the
/// right-sided slope there; `corner_left` supplies the left-sided one for
/// the cell ending at the corner.
struct HistoryView<'a> {
    times: &'a [f64],
    x0: &'a [f64],
    dx0: &'a [f64],
    dt: f64,
    t_start: f64,
    corner_idx: usize,
    corner_left: f64,
}

impl<'a> HistoryView<'a> {
    #[inline]
    fn cell_of(&self, u: f64) -> usize {
        (((u - self.t_start) / self.dt).floor() as isize)
            .clamp(0, self.x0.len() as isize - 2) as usize
    }

    #[inline]
    fn value(&self, u: f64) -> f64 {
        let i = self.cell_of(u);
        let t0 = self.times[i];
        let h = self.times[i + 1] - t0;
        let v = ((u - t0) / h).clamp(0.0, 1.0);
        let d1 = if i + 1 == self.corner_idx {
            self.corner_left
        } else {
            self.dx0[i + 1]
        };
        hermite_value(v, h, self.x0[i], self.dx0[i], self.x0[i + 1], d1)
    }

    /// `∫_from^to α(x⁰(u)) du`, Simpson per overlapped dense cell.
    fn alpha_integral(&self, kernel: &DelayKernel, from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let mut total = 0.0;
        let mut a = from;
        loop {
            let i = self.cell_of(a);
            let cell_end = self.times[i + 1];
            let b = if cell_end > a + 1e-15 { cell_end.min(to) } else { to };
            let mid = 0.5 * (a + b);
            total += (b - a) / 6.0
                * (kernel.alpha(self.value(a))
                    + 4.0 * kernel.alpha(self.value(mid))
                    + kernel.alpha(self.value(b)));
            if b >= to {
                break;
            }
            a = b;
        }
        total
    }

    /// Solves `∫_{eta_base}^{η} α(x⁰(u)) du = target` for `η` by safeguarded
    /// Newton. The integrand lies in `[α₁, α₂]`, bracketing the root in
    /// `[eta_base + target/α₂, eta_base + target/α₁]`; `target > 0` makes the
    /// result strictly larger than `eta_base`.
    fn advance_eta(&self, kernel: &DelayKernel, eta_base: f64, target: f64) -> f64 {
        let mut lo = eta_base + target / kernel.alpha2();
        let mut hi = eta_base + target / kernel.alpha1();
        let mut eta =
            eta_base + target / kernel.alpha(self.value(eta_base)).max(kernel.alpha1());
        for _ in 0..8 {
            eta = eta.clamp(lo, hi);
            let g = self.alpha_integral(kernel, eta_base, eta) - target;
            if g > 0.0 {
                hi = eta;
            } else {
                lo = eta;
            }
            let d = kernel.alpha(self.value(eta));
            let step = g / d;
            if step.abs() < 1e-15 * (1.0 + eta.abs()) {
                break;
            }
            eta -= step;
        }
        eta.clamp(lo, hi)
    }
}

/// Hermite extension of `x⁰` over the developing step `[t0, t1]`.
struct Sliver {
    t0: f64,
    t1: f64,
    y0: f64,
    d0: f64,
    y1: f64,
    d1: f64,
}

impl Sliver {
    fn value(&self, u: f64) -> f64 {
        let h = self.t1 - self.t0;
        let v = ((u - self.t0) / h).clamp(0.0, 1.0);
        hermite_value(v, h, self.y0, self.d0, self.y1, self.d1)
    }

    /// `∫_{t0}^{to} α(x⁰)` over the extension, two Simpson panels.
    fn alpha_integral(&self, kernel: &DelayKernel, to: f64) -> f64 {
        let len = to - self.t0;
        if len <= 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for p in 0..2 {
            let a = self.t0 + len * p as f64 / 2.0;
            let b = self.t0 + len * (p + 1) as f64 / 2.0;
            let mid = 0.5 * (a + b);
            total += (b - a) / 6.0
                * (kernel.alpha(self.value(a))
                    + 4.0 * kernel.alpha(self.value(mid))
                    + kernel.alpha(self.value(b)));
        }
        total
    }
}

/// Sliding-window maximum of `|x⁰|` over the trailing `window + 1` nodes.
struct SlidingMax {
    deque: std::collections::VecDeque<(usize, f64)>,
    window: usize,
}

impl SlidingMax {
    fn new(window: usize) -> Self {
        Self {
            deque: std::collections::VecDeque::new(),
            window,
        }
    }

    fn push(&mut self, idx: usize, value: f64) -> f64 {
        while self.deque.back().is_some_and(|&(_, v)| v <= value) {
            self.deque.pop_back();
        }
        self.deque.push_back((idx, value));
        while self.deque.front().is_some_and(|&(i, _)| i + self.window < idx) {
            self.deque.pop_front();
        }
        self.deque.front().map(|&(_, v)| v).unwrap_or(value)
    }
}

/// Advances the semiflow from `initial` over `[0, horizon]`.
///
/// Requires `dt ≤ min(h, 1/(2α₂))` with `h` the initial segment's grid step,
/// so delayed lookups stay inside committed history.
pub fn integrate(
    spec: &CyclicSystemSpec,
    kernel: &DelayKernel,
    initial: &Segment,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let limit = initial.h().min(1.0 / (2.0 * kernel.alpha2()));
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepSizeViolation { dt, limit });
    }
    if !(horizon > 0.0) {
        return Err(Error::Config(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if initial.n_components() != spec.n_components {
        return Err(Error::LengthMismatch {
            context: "initial segment discrete coordinates vs system N",
            expected: spec.n_components,
            got: initial.n_components(),
        });
    }
    let r = initial.r();
    if (kernel.r - r).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::Config(format!(
            "kernel r = {} does not match segment r = {r}",
            kernel.r
        )));
    }

    let dim = spec.dim();
    let n_hist = (r / dt - 1e-9).ceil() as usize;
    let n_steps = (horizon / dt - 1e-9).ceil() as usize;
    let total = n_hist + n_steps + 1;

    let mut times = Vec::with_capacity(total);
    let mut states = vec![0.0; total * dim];
    let mut slopes = vec![0.0; total * dim];
    let mut eta = Vec::with_capacity(n_steps + 1);
    let mut seg_norms = Vec::with_capacity(n_steps + 1);

    // Seed the dense history from the initial segment at dt spacing. Nodes
    // (if any) below -r take the clamped boundary value; delayed lookups
    // never reach them.
    for k in 0..total {
        times.push((k as f64 - n_hist as f64) * dt);
    }
    for k in 0..=n_hist {
        let t = times[k];
        states[k * dim] = initial.eval_hermite(t);
        slopes[k * dim] = initial.eval_slope(t);
        for i in 1..dim {
            states[k * dim + i] = initial.discrete_values()[i - 1];
        }
    }

    // Dense x⁰ channel for delayed lookups; grows by one node per step.
    let mut x0: Vec<f64> = (0..=n_hist).map(|k| states[k * dim]).collect();
    let mut dx0: Vec<f64> = (0..=n_hist).map(|k| slopes[k * dim]).collect();
    x0.reserve(n_steps);
    dx0.reserve(n_steps);

    let mut win = SlidingMax::new(n_hist);
    for (k, v) in x0.iter().enumerate().take(n_hist) {
        win.push(k, v.abs());
    }

    let rhs = |x: &[f64], delayed: f64, out: &mut [f64]| {
        let n = dim - 1;
        for i in 0..n {
            out[i] = spec.f(i, x[i], x[i + 1]);
        }
        out[n] = spec.f(n, x[n], delayed);
    };

    // Left-sided derivative at the corner t = 0, per component: the history
    // slope for x⁰, zero for the constant discrete channels.
    let mut corner_left = vec![0.0; dim];
    corner_left[0] = initial.eval_slope(0.0);

    // Initial delayed argument from the segment-level solve.
    let tau_initial = solve_threshold_delay(initial, kernel)?;
    let mut eta_n = -tau_initial;
    eta.push(eta_n);

    let mut x_n: Vec<f64> = states[n_hist * dim..(n_hist + 1) * dim].to_vec();
    let disc_norm = x_n[1..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    seg_norms.push(win.push(n_hist, x_n[0].abs()).max(disc_norm));

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut y = vec![0.0; dim];

    {
        let hist = HistoryView {
            times: &times,
            x0: &x0,
            dx0: &dx0,
            dt,
            t_start: times[0],
            corner_idx: n_hist,
            corner_left: corner_left[0],
        };
        if eta_n < hist.t_start {
            return Err(Error::HistoryUnderrun {
                eta: eta_n,
                start: hist.t_start,
            });
        }
        let delayed = hist.value(eta_n);
        rhs(&x_n, delayed, &mut k1);
    }
    slopes[n_hist * dim..(n_hist + 1) * dim].copy_from_slice(&k1);
    dx0[n_hist] = k1[0];

    for step in 0..n_steps {
        let t_n = times[n_hist + step];
        let t_half = t_n + 0.5 * dt;
        let t_next = times[n_hist + step + 1];
        let x0_old = x_n[0];

        let (eta_next, delayed_next) = {
            let hist = HistoryView {
                times: &times,
                x0: &x0,
                dx0: &dx0,
                dt,
                t_start: times[0],
                corner_idx: n_hist,
                corner_left: corner_left[0],
            }
            .narrow();

            // Stage 2.
            for i in 0..dim {
                y[i] = x_n[i] + 0.5 * dt * k1[i];
            }
            let sliver = Sliver {
                t0: t_n,
                t1: t_half,
                y0: x0_old,
                d0: k1[0],
                y1: y[0],
                d1: k1[0],
            };
            let a2 = sliver.alpha_integral(kernel, t_half);
            let eta2 = hist.advance_eta(kernel, eta_n, a2);
            rhs(&y, hist.value(eta2), &mut k2);

            // Stage 3.
            for i in 0..dim {
                y[i] = x_n[i] + 0.5 * dt * k2[i];
            }
            let sliver = Sliver {
                t0: t_n,
                t1: t_half,
                y0: x0_old,
                d0: k1[0],
                y1: y[0],
                d1: k2[0],
            };
            let a3 = sliver.alpha_integral(kernel, t_half);
            let eta3 = hist.advance_eta(kernel, eta_n, a3);
            rhs(&y, hist.value(eta3), &mut k3);

            // Stage 4.
            for i in 0..dim {
                y[i] = x_n[i] + dt * k3[i];
            }
            let sliver = Sliver {
                t0: t_n,
                t1: t_next,
                y0: x0_old,
                d0: k1[0],
                y1: y[0],
                d1: k3[0],
            };
            let a4 = sliver.alpha_integral(kernel, t_next);
            let eta4 = hist.advance_eta(kernel, eta_n, a4);
            rhs(&y, hist.value(eta4), &mut k4);

            // Combine.
            for i in 0..dim {
                x_n[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if x_n.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t: t_next });
            }

            // Commit η over the finished step; k4 approximates the slope at
            // the new node to the order the step itself carries.
            let sliver = Sliver {
                t0: t_n,
                t1: t_next,
                y0: x0_old,
                d0: k1[0],
                y1: x_n[0],
                d1: k4[0],
            };
            let a_step = sliver.alpha_integral(kernel, t_next);
            let eta_next = hist.advance_eta(kernel, eta_n, a_step);
            if eta_next < hist.t_start {
                return Err(Error::HistoryUnderrun {
                    eta: eta_next,
                    start: hist.t_start,
                });
            }
            (eta_next, hist.value(eta_next))
        };
        eta_n = eta_next;

        rhs(&x_n, delayed_next, &mut k1);
        let idx = n_hist + step + 1;
        states[idx * dim..(idx + 1) * dim].copy_from_slice(&x_n);
        slopes[idx * dim..(idx + 1) * dim].copy_from_slice(&k1);
        x0.push(x_n[0]);
        dx0.push(k1[0]);
        eta.push(eta_n);
        let disc_norm = x_n[1..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        seg_norms.push(win.push(idx, x_n[0].abs()).max(disc_norm));
    }

    Ok(Trajectory {
        spec: spec.clone(),
        kernel: kernel.clone(),
        dt,
        r,
        dim,
        n_hist,
        times,
        states,
        slopes,
        eta,
        seg_norms,
        grid_nodes: initial.n_nodes(),
        corner_left,
    })
}

impl<'a> HistoryView<'a> {
    /// Restricts the view to the committed nodes (x0's length).
    fn narrow(self) -> Self {
        let n = self.x0.len();
        Self {
            times: &self.times[..n],
            ..self
        }
    }
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory has nodes")
    }

    /// Dense node times, including the seeded history.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `η(t_k)` at step times `t_k ≥ 0`.
    pub fn eta_series(&self) -> &[f64] {
        &self.eta
    }

    /// `‖x_{t_k}‖` at step times `t_k ≥ 0`.
    pub fn seg_norms(&self) -> &[f64] {
        &self.seg_norms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_hist(&self) -> usize {
        self.n_hist
    }

    /// Full state at dense node `k` (index into [`Trajectory::times`]).
    pub fn state_at_node(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// Hermite value and slope of component `i` at time `t`.
    pub fn component(&self, i: usize, t: f64) -> (f64, f64) {
        let k = (((t - self.times[0]) / self.dt).floor() as isize)
            .clamp(0, self.times.len() as isize - 2) as usize;
        let t0 = self.times[k];
        let h = self.times[k + 1] - t0;
        let u = ((t - t0) / h).clamp(0.0, 1.0);
        let y0 = self.states[k * self.dim + i];
        let y1 = self.states[(k + 1) * self.dim + i];
        let d0 = self.slopes[k * self.dim + i];
        let d1 = if k + 1 == self.n_hist {
            self.corner_left[i]
        } else {
            self.slopes[(k + 1) * self.dim + i]
        };
        (
            hermite_value(u, h, y0, d0, y1, d1),
            hermite_slope(u, h, y0, d0, y1, d1),
        )
    }

    /// Resamples the segment `x_t` on the standard grid: `x⁰` history over
    /// `[t - r, t]` with slopes, discrete coordinates from the state at `t`.
    pub fn segment_at(&self, t: f64) -> Result<Segment> {
        if t < 0.0 || t > self.end_time() + 1e-9 {
            return Err(Error::BeforeCoverage { t, first: 0.0 });
        }
        let nodes = self.grid_nodes;
        let mut values = Vec::with_capacity(nodes);
        let mut slopes = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let s = -self.r * (1.0 - j as f64 / (nodes - 1) as f64);
            let (v, d) = self.component(0, t + s);
            values.push(v);
            slopes.push(d);
        }
        let discrete: Vec<f64> = (1..self.dim).map(|i| self.component(i, t).0).collect();
        Segment::new(values, slopes, discrete, self.r, self.dim - 1)
    }

    /// Structural invariant scan: η-monotonicity, invariance of the
    /// `‖x_t‖ < M` ball after first entry, and the post-transient slope
    /// bound.
    pub fn trajectory_checks(&self) -> TrajectoryChecks {
        let (eta_violations, min_eta_increment) = eta_monotonicity_violations(&self.eta);
        let m = self.spec.dissipativity_bound;
        let mut entry_time = None;
        let mut m_exit_violations = 0;
        for (j, &norm) in self.seg_norms.iter().enumerate() {
            if entry_time.is_none() {
                if norm < m {
                    entry_time = Some(j as f64 * self.dt);
                }
            } else if norm >= m {
                m_exit_violations += 1;
            }
        }
        let l0 = self.spec.lipschitz_bound();
        let mut slope_violations = 0;
        for k in 0..self.times.len() {
            if self.times[k] >= self.r && self.slopes[k * self.dim].abs() > l0 * (1.0 + 1e-9) {
                slope_violations += 1;
            }
        }
        let max_seg_norm = self.seg_norms.iter().fold(0.0_f64, |a, &b| a.max(b));
        TrajectoryChecks {
            eta_violations,
            entry_time,
            m_exit_violations,
            slope_violations,
            max_seg_norm,
            min_eta_increment,
        }
    }

    /// CSV rows `t, x⁰..x^N, eta, V` at multiples of `sample_dt`; the V
    /// column is empty at near-origin or indeterminate samples.
    pub fn export_csv(&self, sample_dt: f64, delta: crate::lyapunov::Delta) -> Result<String> {
        let mut out = String::from("t,");
        for i in 0..self.dim {
            out.push_str(&format!("x{i},"));
        }
        out.push_str("eta,v\n");
        let stride = (sample_dt / self.dt).round().max(1.0) as usize;
        for (j, &e) in self.eta.iter().enumerate().step_by(stride) {
            let k = self.n_hist + j;
            let t = self.times[k];
            out.push_str(&format!("{t},"));
            for i in 0..self.dim {
                out.push_str(&format!("{},", self.states[k * self.dim + i]));
            }
            let v = self
                .segment_at(t)
                .ok()
                .and_then(|seg| crate::lyapunov::lyapunov_value(&seg, &self.kernel, delta).ok());
            match v {
                Some(lv) => out.push_str(&format!("{e},{}\n", lv.value)),
                None => out.push_str(&format!("{e},\n")),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::Delta;
    use crate::system::Nonlinearity;

    fn pure_delay_system(gain: f64) -> CyclicSystemSpec {
        CyclicSystemSpec::scalar(
            Nonlinearity::Linear { decay: 0.0, gain },
            if gain < 0.0 { Delta::Negative } else { Delta::Positive },
            2.0,
        )
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
            crate::kernel::KernelProfile::PlateauTanh {
                alpha0: 1.0,
                eps: 0.05,
                alpha2: 1.2,
                rate: 1.0,
            },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn origin_is_preserved_exactly() {
        let spec = wright_like();
        let kernel = DelayKernel::constant(1.0, 1.0).unwrap();
        let initial = Segment::from_fn(|_| 0.0, |_| 0.0, vec![], 1.0, 101).unwrap();
        let traj = integrate(&spec, &kernel, &initial, 5.0, 0.01).unwrap();
        for k in 0..traj.times().len() {
            assert_eq!(traj.state_at_node(k)[0], 0.0);
        }
    }

    #[test]
    fn linear_test_first_interval() {
        // ẋ = -x(t-1) with unit history: x(t) = 1 - t on [0, 1].
        let spec = pure_delay_system(-1.0);
        let kernel = DelayKernel::constant(1.0, 1.0).unwrap();
        let initial = Segment::from_fn(|_| 1.0, |_| 0.0, vec![], 1.0, 129).unwrap();
        let traj = integrate(&spec, &kernel, &initial, 2.0, 1.0 / 128.0).unwrap();
        for (k, &t) in traj.times().iter().enumerate() {
            if (0.0..=1.0).contains(&t) {
                let want = 1.0 - t;
                let got = traj.state_at_node(k)[0];
                assert!((got - want).abs() < 1e-8, "x({t}) = {got}, want {want}");
            }
        }
        // Second interval via method of steps: x(1+s) = -s + s²/2.
        let t = 1.5;
        let got = traj.component(0, t).0;
        let s = t - 1.0;
        let want = -s + s * s / 2.0;
        assert!((got - want).abs() < 1e-6, "x({t}) = {got}, want {want}");
    }

    #[test]
    fn segment_at_start_returns_initial() {
        let spec = pure_delay_system(-1.0);
        let kernel = DelayKernel::constant(1.0, 1.0).unwrap();
        let initial =
            Segment::from_fn(|s| (2.0 * s).cos(), |s| -2.0 * (2.0 * s).sin(), vec![], 1.0, 201)
                .unwrap();
        let traj = integrate(&spec, &kernel, &initial, 1.0, 1.0 / 256.0).unwrap();
        let back = traj.segment_at(0.0).unwrap();
        let dist = back.sup_distance(&initial).unwrap();
        assert!(dist < 1e-10, "resampling error {dist}");
    }

    #[test]
    fn segment_at_one_matches_method_of_steps() {
        let spec = pure_delay_system(-1.0);
        let kernel = DelayKernel::constant(1.0, 1.0).unwrap();
        let initial = Segment::constant(1.0, 1.0, 0).unwrap();
        let traj = integrate(&spec, &kernel, &initial, 1.5, 1.0 / 256.0).unwrap();
        let seg = traj.segment_at(1.0).unwrap();
        for (j, &s) in seg.times().iter().enumerate() {
            let want = -s;
            assert!(
                (seg.values()[j] - want).abs() < 1e-8,
                "segment_at(1)({s}) = {}, want {want}",
                seg.values()[j]
            );
        }
    }

    #[test]
    fn constant_solution_segments_are_constant() {
        // f(u, v) = -u + v holds any constant state fixed.
        let spec = CyclicSystemSpec::scalar(
            Nonlinearity::Linear { decay: 1.0, gain: 1.0 },
            Delta::Positive,
            2.0,
        );
        let kernel = DelayKernel::constant(1.25, 1.0).unwrap();
        let initial = Segment::constant(0.5, 1.0, 0).unwrap();
        let traj = integrate(&spec, &kernel, &initial, 3.0, 0.005).unwrap();
        let seg = traj.segment_at(2.5).unwrap();
        for &v in seg.values() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    /// Self-convergence on a smooth compatible problem: ẋ = γ·x(t-1) with
    /// exponential history e^{λs}, λ the real dominant root for γ = -1/4.
    /// The solution continues as e^{λt}, smooth at t = 0, so the step order
    /// is undiluted by propagated discontinuities.
    #[test]
    fn self_convergence_order() {
        let lambda = -0.3574029561813888;
        let spec = pure_delay_system(-0.25);
        let kernel = DelayKernel::constant(1.0, 1.0).unwrap();
        let initial = Segment::from_fn(
            |s| (lambda * s).exp(),
            |s| lambda * (lambda * s).exp(),
            vec![],
            1.0,
            65,
        )
        .unwrap();
        let horizon = 4.0;
        let terminal = |dt: f64| {
            let traj = integrate(&spec, &kernel, &initial, horizon, dt).unwrap();
            let k = traj.times().len() - 1;
            traj.state_at_node(k)[0]
        };
        let reference = terminal(1.0 / 2048.0);
        let errs: Vec<f64> = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]
            .iter()
            .map(|&dt| (terminal(dt) - reference).abs())
            .collect();
        assert!(
            errs[0] / errs[1] >= 8.0,
            "convergence factor {} below 8 (errors {errs:?})",
            errs[0] / errs[1]
        );
        assert!(
            errs[1] / errs[2] >= 8.0,
            "convergence factor {} below 8 (errors {errs:?})",
            errs[1] / errs[2]
        );
        let want = (lambda * horizon).exp();
        assert!((reference - want).abs() < 1e-9, "ref {reference}, want {want}");
    }

    #[test]
    fn eta_strictly_increasing_with_state_dependent_kernel() {
        let spec = wright_like();
        let kernel = plateau_kernel();
        let initial = Segment::from_fn(
            |s| 0.8 * (3.0 * s).sin() + 0.3,
            |s| 2.4 * (3.0 * s).cos(),
            vec![],
            1.0,
            201,
        )
        .unwrap();
        let traj = integrate(&spec, &kernel, &initial, 30.0, 1.0 / 400.0).unwrap();
        let checks = traj.trajectory_checks();
        assert_eq!(checks.eta_violations, 0);
        assert!(checks.min_eta_increment > 0.0);
        assert_eq!(checks.m_exit_violations, 0);
        assert!(checks.entry_time.is_some());
        assert_eq!(checks.slope_violations, 0);
        for (j, &e) in traj.eta_series().iter().enumerate() {
            let t = j as f64 * traj.dt;
            let tau = t - e;
            assert!(
                tau >= 1.0 / kernel.alpha2() - 1e-9 && tau <= kernel.r + 1e-9,
                "tau({t}) = {tau} out of bounds"
            );
        }
    }

    /// The tracked η agrees with an independent segment-level re-solve of
    /// the threshold equation at sample times.
    #[test]
    fn tracked_eta_matches_segment_resolve() {
        let spec = wright_like();
        let kernel = plateau_kernel();
        let initial = Segment::from_fn(
            |s| 0.6 * (4.0 * s).cos(),
            |s| -2.4 * (4.0 * s).sin(),
            vec![],
            1.0,
            201,
        )
        .unwrap();
        let traj = integrate(&spec, &kernel, &initial, 20.0, 1.0 / 400.0).unwrap();
        let steps_per_unit = (1.0 / traj.dt).round() as usize;
        for m in 1..=20usize {
            let t = m as f64;
            let seg = traj.segment_at(t).unwrap();
            let tau_seg = solve_threshold_delay(&seg, &kernel).unwrap();
            let eta_tracked = traj.eta_series()[m * steps_per_unit];
            assert!(
                (t - tau_seg - eta_tracked).abs() < 1e-6,
                "t = {t}: tracked η = {eta_tracked}, segment re-solve gives {}",
                t - tau_seg
            );
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let spec = wright_like();
        let kernel = DelayKernel::constant(1.0, 1.0).unwrap();
        let initial =
            Segment::from_fn(|s| 0.5 * s.cos(), |s| -0.5 * s.sin(), vec![], 1.0, 201).unwrap();
        let a = integrate(&spec, &kernel, &initial, 10.0, 0.0025).unwrap();
        let b = integrate(&spec, &kernel, &initial, 10.0, 0.0025).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.eta, b.eta);
    }

    #[test]
    fn step_size_violation_rejected() {
        let spec = pure_delay_system(-1.0);
        let kernel = DelayKernel::new(
            crate::kernel::KernelProfile::PlateauTanh {
                alpha0: 1.1,
                eps: 0.1,
                alpha2: 2.0,
                rate: 1.0,
            },
            1.0,
        )
        .unwrap();
        let initial = Segment::constant(1.0, 1.0, 0).unwrap();
        // 1/(2·α₂) = 0.25; dt = 0.3 must be rejected.
        match integrate(&spec, &kernel, &initial, 1.0, 0.3) {
            Err(Error::StepSizeViolation { .. }) => {}
            other => panic!("expected step-size violation, got {other:?}"),
        }
    }

    #[test]
    fn blow_up_detected() {
        // Anti-decay forces overflow quickly.
        let spec = CyclicSystemSpec::scalar(
            Nonlinearity::Linear { decay: -1e3, gain: 0.0 },
            Delta::Positive,
            2.0,
        );
        let kernel = DelayKernel::constant(1.0, 1.0).unwrap();
        let initial = Segment::constant(1.0, 1.0, 0).unwrap();
        match integrate(&spec, &kernel, &initial, 5.0, 0.002) {
            Err(Error::NonFiniteState { .. }) => {}
            other => panic!("expected blow-up error, got {other:?}"),
        }
    }

    #[test]
    fn corrupted_eta_detected() {
        let eta = vec![0.0, 0.1, 0.05, 0.2];
        let (violations, _) = eta_monotonicity_violations(&eta);
        assert_eq!(violations, 1);
    }

    #[test]
    fn v_monotone_along_flow_smoke() {
        let spec = wright_like();
        let kernel = plateau_kernel();
        let initial = Segment::from_fn(
            |s| 0.7 * (9.0 * s).sin() - 0.2,
            |s| 6.3 * (9.0 * s).cos(),
            vec![],
            1.0,
            201,
        )
        .unwrap();
        let traj = integrate(&spec, &kernel, &initial, 60.0, 1.0 / 400.0).unwrap();
        let mut last: Option<u32> = None;
        let mut t = 1.0;
        while t <= 60.0 {
            let seg = traj.segment_at(t).unwrap();
            if !seg.near_origin() {
                if let Ok(v) = crate::lyapunov::lyapunov_value(&seg, &kernel, Delta::Negative) {
                    if let Some(prev) = last {
                        assert!(
                            v.value <= prev,
                            "V increased from {prev} to {} at t = {t}",
                            v.value
                        );
                    }
                    last = Some(v.value);
                }
            }
            t += 0.5;
        }
        assert!(last.is_some());
    }
}
