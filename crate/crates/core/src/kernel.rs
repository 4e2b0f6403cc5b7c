//! Threshold-type state-dependent delay: `τ(φ)` is the unique root of
//! `∫_{-τ}^0 α(φ(s)) ds = 1`, where the rate `α` maps into `[α₁, α₂]`
//! with `α₁ = 1/r` and is constant on a plateau around zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::Segment;

/// Named rate profiles. All are constant (`alpha0`) on `(-eps, eps)` and
/// clamped into `[1/r, alpha2]` outside, so the plateau hypothesis holds by
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum KernelProfile {
    /// `α ≡ alpha0`.
    Constant { alpha0: f64 },
    /// `α(x) = alpha0 + (alpha2 - alpha0) · tanh(rate · (|x| - eps))` outside
    /// the plateau.
    PlateauTanh {
        alpha0: f64,
        eps: f64,
        alpha2: f64,
        rate: f64,
    },
    /// `α(x) = min(alpha0 + (|x| - eps)², alpha2)` outside the plateau.
    PlateauQuadratic {
        alpha0: f64,
        eps: f64,
        alpha2: f64,
    },
}

/// The delay kernel: a rate profile together with its declared bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayKernel {
    #[serde(flatten)]
    pub profile: KernelProfile,
    /// History length; `alpha1 = 1/r`.
    pub r: f64,
}

impl DelayKernel {
    pub fn new(profile: KernelProfile, r: f64) -> Result<Self> {
        let kernel = Self { profile, r };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Constant-rate kernel, `τ ≡ 1/alpha0`.
    pub fn constant(alpha0: f64, r: f64) -> Result<Self> {
        Self::new(KernelProfile::Constant { alpha0 }, r)
    }

    pub fn alpha1(&self) -> f64 {
        1.0 / self.r
    }

    pub fn alpha2(&self) -> f64 {
        match self.profile {
            KernelProfile::Constant { alpha0 } => alpha0.max(self.alpha1()),
            KernelProfile::PlateauTanh { alpha2, .. }
            | KernelProfile::PlateauQuadratic { alpha2, .. } => alpha2,
        }
    }

    pub fn alpha0(&self) -> f64 {
        match self.profile {
            KernelProfile::Constant { alpha0 } => alpha0,
            KernelProfile::PlateauTanh { alpha0, .. }
            | KernelProfile::PlateauQuadratic { alpha0, .. } => alpha0,
        }
    }

    /// Plateau half-width; the profile is exactly `alpha0` on `(-eps, eps)`.
    pub fn eps_plateau(&self) -> f64 {
        match self.profile {
            KernelProfile::Constant { .. } => f64::INFINITY,
            KernelProfile::PlateauTanh { eps, .. }
            | KernelProfile::PlateauQuadratic { eps, .. } => eps,
        }
    }

    /// Rate evaluation, clamped into the declared bounds.
    #[inline]
    pub fn alpha(&self, x: f64) -> f64 {
        let a1 = self.alpha1();
        match self.profile {
            KernelProfile::Constant { alpha0 } => alpha0.max(a1),
            KernelProfile::PlateauTanh {
                alpha0,
                eps,
                alpha2,
                rate,
            } => {
                let ax = x.abs();
                if ax < eps {
                    alpha0
                } else {
                    (alpha0 + (alpha2 - alpha0) * (rate * (ax - eps)).tanh())
                        .clamp(a1, alpha2)
                }
            }
            KernelProfile::PlateauQuadratic { alpha0, eps, alpha2 } => {
                let ax = x.abs();
                if ax < eps {
                    alpha0
                } else {
                    let d = ax - eps;
                    (alpha0 + d * d).clamp(a1, alpha2)
                }
            }
        }
    }

    /// Structural checks: positive plateau width, declared bounds consistent,
    /// and a grid spot-check that the profile stays within `[α₁, α₂]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(Error::Config(format!("kernel r must be positive, got {}", self.r)));
        }
        let a0 = self.alpha0();
        let a1 = self.alpha1();
        let a2 = self.alpha2();
        if !(a0 >= a1 - 1e-12) {
            return Err(Error::Config(format!(
                "plateau value alpha0 = {a0} below alpha1 = 1/r = {a1}"
            )));
        }
        if !(a2 >= a1) {
            return Err(Error::Config(format!("alpha2 = {a2} below alpha1 = {a1}")));
        }
        if !(a0 <= a2 + 1e-12) {
            return Err(Error::Config(format!("alpha0 = {a0} above alpha2 = {a2}")));
        }
        match self.profile {
            KernelProfile::Constant { .. } => {}
            KernelProfile::PlateauTanh { eps, rate, .. } => {
                if !(eps > 0.0) {
                    return Err(Error::Config("plateau width eps must be positive".into()));
                }
                if !(rate >= 0.0) {
                    return Err(Error::Config("tanh rate must be nonnegative".into()));
                }
            }
            KernelProfile::PlateauQuadratic { eps, .. } => {
                if !(eps > 0.0) {
                    return Err(Error::Config("plateau width eps must be positive".into()));
                }
            }
        }
        // Spot-check bounds on a grid.
        for k in -100..=100 {
            let x = k as f64 * 0.05;
            let a = self.alpha(x);
            if !(a >= a1 - 1e-12 && a <= a2 + 1e-12) {
                return Err(Error::Config(format!(
                    "alpha({x}) = {a} escapes [{a1}, {a2}]"
                )));
            }
        }
        Ok(())
    }
}

/// `∫_{-tau}^0 α(φ(s)) ds` by composite Simpson quadrature on the segment
/// grid, with an exact partial cell at `-tau` evaluated through the Hermite
/// interpolant. Strictly increasing in `tau` since `α ≥ α₁ > 0`.
pub fn kernel_integral(segment: &Segment, kernel: &DelayKernel, tau: f64) -> Result<f64> {
    if !(0.0..=segment.r() + 1e-12).contains(&tau) {
        return Err(Error::TauOutOfRange { tau, r: segment.r() });
    }
    let prefix = CellPrefix::new(segment, kernel);
    Ok(prefix.integral(tau))
}

/// Per-cell Simpson integrals of `s ↦ α(φ(s))`, accumulated right-to-left so
/// repeated integral evaluations during root refinement cost O(1).
struct CellPrefix<'a> {
    segment: &'a Segment,
    kernel: &'a DelayKernel,
    /// `cum[j]` = integral of α(φ) over `[times[j], 0]`.
    cum: Vec<f64>,
}

impl<'a> CellPrefix<'a> {
    fn new(segment: &'a Segment, kernel: &'a DelayKernel) -> Self {
        let times = segment.times();
        let values = segment.values();
        let n = times.len();
        let mut cum = vec![0.0; n];
        for j in (0..n - 1).rev() {
            let h = times[j + 1] - times[j];
            let mid = segment.eval_hermite(times[j] + 0.5 * h);
            let cell = h / 6.0
                * (kernel.alpha(values[j])
                    + 4.0 * kernel.alpha(mid)
                    + kernel.alpha(values[j + 1]));
            cum[j] = cum[j + 1] + cell;
        }
        Self { segment, kernel, cum }
    }

    /// Integral over `[-tau, 0]`.
    fn integral(&self, tau: f64) -> f64 {
        let times = self.segment.times();
        let n = times.len();
        let s = -tau;
        if s <= times[0] {
            return self.cum[0];
        }
        let h = self.segment.h();
        let j = (((s - times[0]) / h).ceil() as usize).min(n - 1);
        // Partial cell [s, times[j]] by Simpson through the interpolant.
        let len = times[j] - s;
        if len <= 0.0 {
            return self.cum[j];
        }
        let a = self.kernel.alpha(self.segment.eval_hermite(s));
        let m = self
            .kernel
            .alpha(self.segment.eval_hermite(s + 0.5 * len));
        let b = self.kernel.alpha(self.segment.values()[j]);
        self.cum[j] + len / 6.0 * (a + 4.0 * m + b)
    }
}

/// Absolute tolerance for the threshold-delay root.
pub const TAU_TOL: f64 = 1e-12;

/// Solves `∫_{-τ}^0 α(φ(s)) ds = 1` for the unique `τ ∈ [1/α₂, r]`.
///
/// Bisection brackets the root, then secant steps polish it to [`TAU_TOL`].
pub fn solve_threshold_delay(segment: &Segment, kernel: &DelayKernel) -> Result<f64> {
    let prefix = CellPrefix::new(segment, kernel);
    let r = segment.r();
    let mut lo = (1.0 / kernel.alpha2()).min(r);
    let mut hi = r;
    let g = |t: f64| prefix.integral(t) - 1.0;
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    if g_lo > 1e-9 || g_hi < -1e-9 {
        return Err(Error::BracketFailure(format!(
            "integral({lo}) - 1 = {g_lo}, integral({hi}) - 1 = {g_hi}; \
             kernel bounds are inconsistent with the declared [alpha1, alpha2]"
        )));
    }
    if g_lo >= 0.0 {
        return Ok(lo);
    }
    if g_hi <= 0.0 {
        return Ok(hi);
    }
    // Bisect to a narrow bracket.
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm >= 0.0 {
            hi = mid;
            g_hi = gm;
        } else {
            lo = mid;
            g_lo = gm;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    // Secant polish inside the bracket.
    let mut a = lo;
    let mut b = hi;
    let mut ga = g_lo;
    let mut gb = g_hi;
    for _ in 0..60 {
        if (b - a).abs() <= TAU_TOL {
            break;
        }
        let denom = gb - ga;
        let mut x = if denom.abs() > 0.0 {
            b - gb * (b - a) / denom
        } else {
            0.5 * (a + b)
        };
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let gx = g(x);
        if gx >= 0.0 {
            b = x;
            gb = gx;
        } else {
            a = x;
            ga = gx;
        }
    }
    Ok(0.5 * (a + b))
}
