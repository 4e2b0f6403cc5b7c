//! Cyclic feedback systems: `ẋⁱ = fⁱ(xⁱ, xⁱ⁺¹)` for `i < N`, closed by
//! `ẋᴺ = fᴺ(xᴺ, x⁰(t - τ(x_t)))` with feedback sign δ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::Delta;

/// Named nonlinearity presets. Configs pick a family and parameters instead
/// of embedding arbitrary expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// `f(u, v) = -decay·u + gain·v`.
    Linear { decay: f64, gain: f64 },
    /// `f(u, v) = -decay·u + gain·tanh(slope·v)`.
    TanhFeedback { decay: f64, gain: f64, slope: f64 },
}

impl Nonlinearity {
    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match *self {
            Nonlinearity::Linear { decay, gain } => -decay * u + gain * v,
            Nonlinearity::TanhFeedback { decay, gain, slope } => {
                -decay * u + gain * (slope * v).tanh()
            }
        }
    }

    /// Analytic partial derivatives at the origin, when the family supplies
    /// them.
    pub fn derivatives_at_origin(&self) -> Option<(f64, f64)> {
        match *self {
            Nonlinearity::Linear { decay, gain } => Some((-decay, gain)),
            Nonlinearity::TanhFeedback { decay, gain, slope } => Some((-decay, gain * slope)),
        }
    }
}

/// A cyclic system: N+1 nonlinearities, the feedback sign, and the
/// dissipativity bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicSystemSpec {
    /// N ≥ 0; the state is (x⁰, ..., xᴺ).
    pub n_components: usize,
    /// One entry per component; `nonlinearities[i]` is fⁱ.
    pub nonlinearities: Vec<Nonlinearity>,
    pub delta: Delta,
    /// Dissipativity bound M > 0.
    pub dissipativity_bound: f64,
    /// Use central differences at the origin even when analytic derivatives
    /// exist.
    #[serde(default)]
    pub numeric_derivatives: bool,
}

impl CyclicSystemSpec {
    /// Scalar system (N = 0) shorthand.
    pub fn scalar(f: Nonlinearity, delta: Delta, bound_m: f64) -> Self {
        Self {
            n_components: 0,
            nonlinearities: vec![f],
            delta,
            dissipativity_bound: bound_m,
            numeric_derivatives: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_components + 1
    }

    #[inline]
    pub fn f(&self, i: usize, u: f64, v: f64) -> f64 {
        self.nonlinearities[i].eval(u, v)
    }

    /// `L₀ = max |fⁱ(u, v)|` over `[-M, M]²`, scanned on a grid.
    pub fn lipschitz_bound(&self) -> f64 {
        let m = self.dissipativity_bound;
        let steps = 200;
        let mut l0 = 0.0_f64;
        for f in &self.nonlinearities {
            for iu in 0..=steps {
                let u = -m + 2.0 * m * iu as f64 / steps as f64;
                for iv in 0..=steps {
                    let v = -m + 2.0 * m * iv as f64 / steps as f64;
                    l0 = l0.max(f.eval(u, v).abs());
                }
            }
        }
        l0
    }

    /// Sampled checks of the feedback and dissipativity hypotheses.
    pub fn validate(&self) -> Result<()> {
        if self.nonlinearities.len() != self.dim() {
            return Err(Error::LengthMismatch {
                context: "nonlinearities vs N+1",
                expected: self.dim(),
                got: self.nonlinearities.len(),
            });
        }
        let m = self.dissipativity_bound;
        if !(m > 0.0) {
            return Err(Error::SystemSpec(format!(
                "dissipativity bound must be positive, got {m}"
            )));
        }
        let d = self.delta.sign();
        let test_vs: Vec<f64> = (1..=20)
            .flat_map(|k| {
                let v = m * k as f64 / 20.0;
                [v, -v]
            })
            .collect();
        for (i, f) in self.nonlinearities.iter().enumerate() {
            let sign = if i == self.n_components { d } else { 1.0 };
            for &v in &test_vs {
                if !(sign * v * f.eval(0.0, v) > 0.0) {
                    return Err(Error::SystemSpec(format!(
                        "feedback check failed for f{i} at v = {v}: \
                         sign·v·f(0, v) = {}",
                        sign * v * f.eval(0.0, v)
                    )));
                }
            }
            for k in 0..=10 {
                let u = m * (1.0 + k as f64 / 10.0);
                for j in 0..=10 {
                    let v = u * (2.0 * j as f64 / 10.0 - 1.0);
                    if !(f.eval(u, v) < 0.0) {
                        return Err(Error::SystemSpec(format!(
                            "dissipativity failed for f{i} at (u, v) = ({u}, {v})"
                        )));
                    }
                    if !(f.eval(-u, v) > 0.0) {
                        return Err(Error::SystemSpec(format!(
                            "dissipativity failed for f{i} at (u, v) = ({}, {v})",
                            -u
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wright_like() -> CyclicSystemSpec {
        CyclicSystemSpec::scalar(
            Nonlinearity::TanhFeedback {
                decay: 1.0,
                gain: -2.0,
                slope: 2.0,
            },
            Delta::Negative,
            4.0,
        )
    }

    #[test]
    fn wright_like_passes_validation() {
        wright_like().validate().unwrap();
    }

    #[test]
    fn delta_mismatch_fails_feedback_check() {
        let mut spec = wright_like();
        spec.delta = Delta::Positive;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn lipschitz_bound_matches_analytic_maximum() {
        // |f| = |-u - 2tanh(2v)| maximized at u = -M, v = -M:
        // M + 2 tanh(2M).
        let spec = wright_like();
        let m = spec.dissipativity_bound;
        let want = m + 2.0 * (2.0 * m).tanh();
        let got = spec.lipschitz_bound();
        assert!((got - want).abs() < 1e-6, "got {got}, want {want}");
    }

    #[test]
    fn linear_chain_validates() {
        let spec = CyclicSystemSpec {
            n_components: 2,
            nonlinearities: vec![
                Nonlinearity::Linear { decay: 1.0, gain: 0.5 },
                Nonlinearity::Linear { decay: 1.0, gain: 0.5 },
                Nonlinearity::Linear { decay: 1.0, gain: -0.5 },
            ],
            delta: Delta::Negative,
            dissipativity_bound: 1.0,
            numeric_derivatives: false,
        };
        spec.validate().unwrap();
    }

    #[test]
    fn pure_delay_linear_fails_dissipativity() {
        // f(u, v) = -v has no self-decay; it is a sanity-test system, not a
        // spec-compliant one.
        let spec = CyclicSystemSpec::scalar(
            Nonlinearity::Linear { decay: 0.0, gain: -1.0 },
            Delta::Negative,
            2.0,
        );
        assert!(spec.validate().is_err());
    }
}
