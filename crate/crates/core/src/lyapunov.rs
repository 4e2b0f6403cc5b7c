//! The discrete Lyapunov function: a parity-adjusted count of sign changes
//! over the window `[a, 0]` followed by the discrete coordinates, with
//! `a = -τ(φ)`, plus membership tests for the regularity sets on which the
//! count is stable.
//!
//! Counting is performed on grid samples only. Samples with magnitude below
//! the relative tolerance `ζ` carry no sign. A finite grid cannot produce an
//! infinite count, so the infinite branch of the parity tables is
//! unreachable in this representation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{solve_threshold_delay, DelayKernel};
use crate::segment::Segment;

/// Feedback sign δ ∈ {+1, -1}; serialized as the integer itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Delta {
    Positive,
    Negative,
}

impl Delta {
    pub fn sign(self) -> f64 {
        match self {
            Delta::Positive => 1.0,
            Delta::Negative => -1.0,
        }
    }
}

impl TryFrom<i8> for Delta {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Delta::Positive),
            -1 => Ok(Delta::Negative),
            other => Err(format!("delta must be +1 or -1, got {other}")),
        }
    }
}

impl From<Delta> for i8 {
    fn from(d: Delta) -> i8 {
        match d {
            Delta::Positive => 1,
            Delta::Negative => -1,
        }
    }
}

/// Which parity branch produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParityBranch {
    VPlus,
    VMinus,
}

/// A computed Lyapunov value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovValue {
    /// Raw sign-change count over the window and discrete coordinates.
    pub sc: u32,
    /// Parity-adjusted value: even on the plus branch, odd on the minus.
    pub value: u32,
    pub parity_branch: ParityBranch,
    /// Left endpoint of the window, `a = -τ(φ)`.
    pub a: f64,
}

/// Number of sign alternations in a sample sequence, skipping entries with
/// `|v| <= zeta`. Equals the supremum of alternating-subsequence lengths.
pub fn sign_alternations<I: IntoIterator<Item = f64>>(values: I, zeta: f64) -> u32 {
    let mut count = 0u32;
    let mut last = 0.0f64;
    for v in values {
        if v.abs() <= zeta {
            continue;
        }
        if last != 0.0 && v * last < 0.0 {
            count += 1;
        }
        last = v;
    }
    count
}

/// Sample sequence over `[a, 0] ∪ {1..N}`: the Hermite value at `a`, the
/// grid samples strictly right of `a`, then the discrete coordinates.
fn window_samples(segment: &Segment, a: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(segment.n_nodes() + segment.n_components() + 1);
    out.push(segment.eval_hermite(a));
    for (i, &t) in segment.times().iter().enumerate() {
        if t > a {
            out.push(segment.values()[i]);
        }
    }
    out.extend_from_slice(segment.discrete_values());
    out
}

fn check_window(segment: &Segment, a: f64) -> Result<()> {
    let r = segment.r();
    if !(-r..0.0).contains(&a) {
        return Err(Error::WindowOutOfRange { a, r });
    }
    Ok(())
}

/// Sign-change count of the segment over `[a, 0]` and the discrete
/// coordinates, restricted to grid samples.
pub fn count_sign_changes(segment: &Segment, a: f64) -> Result<u32> {
    check_window(segment, a)?;
    Ok(sign_alternations(
        window_samples(segment, a),
        segment.zeta(),
    ))
}

fn v_plus_of(sc: u32) -> u32 {
    if sc % 2 == 0 {
        sc
    } else {
        sc + 1
    }
}

fn v_minus_of(sc: u32) -> u32 {
    if sc % 2 == 1 {
        sc
    } else {
        sc + 1
    }
}

/// Both parity branches `(V⁺, V⁻)` of the count on `[a, 0] ∪ {1..N}`.
///
/// Errors with [`Error::IndeterminateWindow`] when every sample in the
/// window is a tolerance zero while the segment itself is not the origin:
/// reporting 0 there would misclassify transients through the origin's
/// neighborhood.
pub fn v_signed(segment: &Segment, a: f64) -> Result<(u32, u32)> {
    check_window(segment, a)?;
    let zeta = segment.zeta();
    let samples = window_samples(segment, a);
    if samples.iter().all(|v| v.abs() <= zeta) {
        return Err(Error::IndeterminateWindow);
    }
    let sc = sign_alternations(samples, zeta);
    Ok((v_plus_of(sc), v_minus_of(sc)))
}

/// The Lyapunov value `V(φ)`: solves the threshold delay for the window
/// start and applies the δ-appropriate parity branch.
pub fn lyapunov_value(
    segment: &Segment,
    kernel: &DelayKernel,
    delta: Delta,
) -> Result<LyapunovValue> {
    if segment.near_origin() {
        return Err(Error::NearOrigin);
    }
    let tau = solve_threshold_delay(segment, kernel)?;
    let a = (-tau).clamp(-segment.r(), -f64::MIN_POSITIVE);
    let (v_plus, v_minus) = v_signed(segment, a)?;
    let sc = count_sign_changes(segment, a)?;
    let (value, parity_branch) = match delta {
        Delta::Positive => (v_plus, ParityBranch::VPlus),
        Delta::Negative => (v_minus, ParityBranch::VMinus),
    };
    Ok(LyapunovValue {
        sc,
        value,
        parity_branch,
        a,
    })
}

/// The regularity sets whose conditions can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularitySet {
    /// `φ(0) = 0 ⇒ φ̇(0)·φ(1) > 0` (scalar case: `φ(a)` in place of `φ(1)`).
    S0,
    /// `φ(a) = 0 ⇒ δ·φ(N)·φ̇(a) < 0`.
    SA,
    /// Zeros of `φ` on `[a, 0]` are transversal.
    SStarA,
    /// `φ(N) = 0 ⇒ δ·φ(N-1)·φ(a) < 0`.
    SNA,
    /// `φ(i) = 0 ⇒ φ(i-1)·φ(i+1) < 0` for `1 ≤ i ≤ N-1`.
    SI(usize),
}

impl std::fmt::Display for RegularitySet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegularitySet::S0 => write!(f, "S0"),
            RegularitySet::SA => write!(f, "S_a"),
            RegularitySet::SStarA => write!(f, "S*_a"),
            RegularitySet::SNA => write!(f, "S^N_a"),
            RegularitySet::SI(i) => write!(f, "S{i}"),
        }
    }
}

/// Outcome of the regularity-membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub in_r: bool,
    pub failed_sets: Vec<RegularitySet>,
    /// Smallest absolute quantity whose sign (or zero status) decided any
    /// membership; how far the verdict is from flipping.
    pub margin: f64,
}

/// Evaluates membership of `φ` in the regularity intersection at window
/// start `a`, with ζ-tolerant zero tests.
///
/// A hypothesis `φ(x) = 0` is triggered when `|φ(x)| ≤ ζ`, and the
/// corresponding conclusion must then hold with margin `> ζ`. Two sampled
/// refinements keep the grid count stable on the reported set: a tolerance
/// zero at an interior node must be flanked by opposite-sign samples, and
/// consecutive tolerance zeros fail the transversality test outright.
pub fn regularity_membership(
    segment: &Segment,
    a: f64,
    delta: Delta,
) -> Result<RegularityVerdict> {
    check_window(segment, a)?;
    let zeta = segment.zeta();
    let n = segment.n_components();
    let d = delta.sign();
    let mut failed: Vec<RegularitySet> = Vec::new();
    let mut margin = f64::INFINITY;
    let mut note = |q: f64, fail: Option<RegularitySet>, failed: &mut Vec<RegularitySet>| {
        margin = margin.min(q.max(0.0));
        if let Some(set) = fail {
            if !failed.contains(&set) {
                failed.push(set);
            }
        }
    };

    let phi_a = segment.eval_hermite(a);
    let dphi_a = segment.eval_slope(a);
    let phi_0 = *segment.values().last().expect("segment has nodes");
    let dphi_0 = *segment.slopes().last().expect("segment has nodes");
    let disc = segment.discrete_values();
    // φ(N) and φ(N-1) with the convention φ(0) = continuous endpoint.
    let phi_n = if n >= 1 { disc[n - 1] } else { phi_0 };

    // S0: zero at the right endpoint.
    if phi_0.abs() <= zeta {
        let partner = if n >= 1 { disc[0] } else { phi_a };
        let q = dphi_0 * partner;
        note(q.abs() - zeta, (q <= zeta).then_some(RegularitySet::S0), &mut failed);
    } else {
        note(phi_0.abs() - zeta, None, &mut failed);
    }

    // S_a: zero at the left endpoint.
    if phi_a.abs() <= zeta {
        let q = d * phi_n * dphi_a;
        note(q.abs() - zeta, (q >= -zeta).then_some(RegularitySet::SA), &mut failed);
    } else {
        note(phi_a.abs() - zeta, None, &mut failed);
    }

    // S*_a: transversality of zeros on the interior of [a, 0].
    let times = segment.times();
    let values = segment.values();
    let slopes = segment.slopes();
    let interior: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] > a && times[i] < 0.0)
        .collect();
    let mut prev_was_zero = false;
    for (k, &i) in interior.iter().enumerate() {
        if values[i].abs() <= zeta {
            let q = slopes[i].abs();
            note(
                q - zeta,
                (q <= zeta).then_some(RegularitySet::SStarA),
                &mut failed,
            );
            if prev_was_zero {
                note(0.0, Some(RegularitySet::SStarA), &mut failed);
            }
            // Grid transversality: the nearest non-zero samples on each side
            // must have opposite signs, otherwise the count is unstable.
            let left = interior[..k]
                .iter()
                .rev()
                .map(|&j| values[j])
                .find(|v| v.abs() > zeta)
                .unwrap_or(phi_a);
            let right = interior[k + 1..]
                .iter()
                .map(|&j| values[j])
                .find(|v| v.abs() > zeta)
                .unwrap_or(phi_0);
            if left.abs() > zeta && right.abs() > zeta {
                note(
                    -left * right - zeta,
                    (left * right >= 0.0).then_some(RegularitySet::SStarA),
                    &mut failed,
                );
            }
            prev_was_zero = true;
        } else {
            note(values[i].abs() - zeta, None, &mut failed);
            prev_was_zero = false;
        }
    }

    if n >= 1 {
        // S^N_a: zero at the last discrete coordinate.
        if phi_n.abs() <= zeta {
            let phi_nm1 = if n >= 2 { disc[n - 2] } else { phi_0 };
            let q = d * phi_nm1 * phi_a;
            note(q.abs() - zeta, (q >= -zeta).then_some(RegularitySet::SNA), &mut failed);
        } else {
            note(phi_n.abs() - zeta, None, &mut failed);
        }
        // S^i for interior discrete coordinates.
        for i in 1..n {
            let phi_i = disc[i - 1];
            if phi_i.abs() <= zeta {
                let before = if i == 1 { phi_0 } else { disc[i - 2] };
                let after = disc[i];
                let q = before * after;
                note(
                    q.abs() - zeta,
                    (q >= -zeta).then_some(RegularitySet::SI(i)),
                    &mut failed,
                );
            } else {
                note(phi_i.abs() - zeta, None, &mut failed);
            }
        }
    }

    if !margin.is_finite() {
        margin = 0.0;
    }
    Ok(RegularityVerdict {
        in_r: failed.is_empty(),
        failed_sets: failed,
        margin,
    })
}

/// Membership in `ℛ`: regularity at the segment's own window start
/// `a = -τ(φ)`.
pub fn regularity_at_own_delay(
    segment: &Segment,
    kernel: &DelayKernel,
    delta: Delta,
) -> Result<(RegularityVerdict, f64)> {
    let tau = solve_threshold_delay(segment, kernel)?;
    let a = (-tau).clamp(-segment.r(), -f64::MIN_POSITIVE);
    let verdict = regularity_membership(segment, a, delta)?;
    Ok((verdict, a))
}
