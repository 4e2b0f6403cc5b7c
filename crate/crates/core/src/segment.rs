//! Phase-space points: sampled history on `[-r, 0]` with slopes, plus
//! discrete coordinates `(x^1, ..., x^N)`.
//!
//! A [`Segment`] carries enough smoothness data to evaluate both the sup
//! metric and the C¹ metric: values and derivatives on a uniform grid,
//! interpolated with cubic Hermite polynomials between nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid nodes on `[-r, 0]`.
pub const DEFAULT_GRID_NODES: usize = 201;

/// Absolute threshold below which a segment counts as the origin.
pub const ZETA_ABS: f64 = 1e-9;

/// A phase-space point: continuous history on `[-r, 0]` plus discrete
/// coordinates. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    history_times: Vec<f64>,
    history_values: Vec<f64>,
    history_slopes: Vec<f64>,
    discrete_values: Vec<f64>,
    r: f64,
}

impl Segment {
    /// Builds a segment from samples of the history and its derivative.
    ///
    /// `values[i]` and `slopes[i]` sample `x^0` and `ẋ^0` on the uniform
    /// grid spanning `[-r, 0]`; `discrete` holds `(x^1, ..., x^N)`.
    pub fn new(
        values: Vec<f64>,
        slopes: Vec<f64>,
        discrete: Vec<f64>,
        r: f64,
        n_components: usize,
    ) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::NonPositiveHistory { r });
        }
        if values.len() < 2 {
            return Err(Error::LengthMismatch {
                context: "history needs at least two nodes",
                expected: 2,
                got: values.len(),
            });
        }
        if slopes.len() != values.len() {
            return Err(Error::LengthMismatch {
                context: "slopes vs values",
                expected: values.len(),
                got: slopes.len(),
            });
        }
        if discrete.len() != n_components {
            return Err(Error::LengthMismatch {
                context: "discrete coordinates vs N",
                expected: n_components,
                got: discrete.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "history values" });
        }
        if slopes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "history slopes" });
        }
        if discrete.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "discrete coordinates" });
        }
        let times = uniform_grid(r, values.len());
        Ok(Self {
            history_times: times,
            history_values: values,
            history_slopes: slopes,
            discrete_values: discrete,
            r,
        })
    }

    /// Samples an analytic function and its derivative on `n_nodes` nodes.
    pub fn from_fn(
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
        discrete: Vec<f64>,
        r: f64,
        n_nodes: usize,
    ) -> Result<Self> {
        let times = uniform_grid(r, n_nodes);
        let values: Vec<f64> = times.iter().map(|&t| f(t)).collect();
        let slopes: Vec<f64> = times.iter().map(|&t| df(t)).collect();
        let n = discrete.len();
        Self::new(values, slopes, discrete, r, n)
    }

    /// Constant segment `φ ≡ c` on the default grid.
    pub fn constant(c: f64, r: f64, n_components: usize) -> Result<Self> {
        Self::from_fn(|_| c, |_| 0.0, vec![c; n_components], r, DEFAULT_GRID_NODES)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n_components(&self) -> usize {
        self.discrete_values.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.history_times.len()
    }

    /// Uniform grid spacing.
    pub fn h(&self) -> f64 {
        self.r / (self.history_times.len() - 1) as f64
    }

    pub fn times(&self) -> &[f64] {
        &self.history_times
    }

    pub fn values(&self) -> &[f64] {
        &self.history_values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.history_slopes
    }

    pub fn discrete_values(&self) -> &[f64] {
        &self.discrete_values
    }

    /// Evaluates the segment at `s ∈ [-r, 0] ∪ {1, ..., N}`.
    ///
    /// On the continuous part this is a cubic Hermite interpolant through
    /// the node values and slopes; node arguments reproduce the stored
    /// samples exactly. Positive integer arguments look up the discrete
    /// coordinates.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if s > 0.0 {
            let k = s.round();
            if (s - k).abs() < 1e-9 && k >= 1.0 && (k as usize) <= self.n_components() {
                return Ok(self.discrete_values[k as usize - 1]);
            }
            return Err(self.domain_error(s));
        }
        if s < -self.r - 1e-12 * self.r.max(1.0) {
            return Err(self.domain_error(s));
        }
        Ok(self.eval_hermite(s))
    }

    fn domain_error(&self, s: f64) -> Error {
        Error::OutsideDomain {
            s,
            r: self.r,
            n: self.n_components(),
        }
    }

    /// Hermite value on the continuous part; clamps `s` into `[-r, 0]`.
    pub fn eval_hermite(&self, s: f64) -> f64 {
        let (i, u, h) = self.locate(s);
        if u == 0.0 {
            return self.history_values[i];
        }
        hermite_value(
            u,
            h,
            self.history_values[i],
            self.history_slopes[i],
            self.history_values[i + 1],
            self.history_slopes[i + 1],
        )
    }

    /// Derivative of the Hermite interpolant on the continuous part.
    pub fn eval_slope(&self, s: f64) -> f64 {
        let (i, u, h) = self.locate(s);
        if u == 0.0 {
            return self.history_slopes[i];
        }
        hermite_slope(
            u,
            h,
            self.history_values[i],
            self.history_slopes[i],
            self.history_values[i + 1],
            self.history_slopes[i + 1],
        )
    }

    /// Locates the grid cell containing `s`, returning `(index, u, h)` with
    /// `u ∈ [0, 1)` the normalized offset, or `u == 0` exactly at a node.
    fn locate(&self, s: f64) -> (usize, f64, f64) {
        let n = self.history_times.len();
        let s = s.clamp(-self.r, 0.0);
        let h = self.h();
        let mut i = (((s + self.r) / h).floor() as isize).clamp(0, n as isize - 2) as usize;
        // Exact node hits must reproduce stored samples bit-exactly.
        if s == self.history_times[i] {
            return (i, 0.0, h);
        }
        if s == self.history_times[i + 1] {
            return (i + 1, 0.0, h);
        }
        if s < self.history_times[i] && i > 0 {
            i -= 1;
        } else if s > self.history_times[i + 1] && i + 2 < n {
            i += 1;
        }
        let cell_h = self.history_times[i + 1] - self.history_times[i];
        let u = ((s - self.history_times[i]) / cell_h).clamp(0.0, 1.0);
        (i, u, cell_h)
    }

    /// `(sup_norm, c1_norm)`: the maximum norm over all samples and discrete
    /// coordinates, and that plus the largest slope magnitude.
    pub fn norms(&self) -> (f64, f64) {
        let sup = self.sup_norm();
        let slope_sup = self
            .history_slopes
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        (sup, sup + slope_sup)
    }

    pub fn sup_norm(&self) -> f64 {
        self.history_values
            .iter()
            .chain(self.discrete_values.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn c1_norm(&self) -> f64 {
        self.norms().1
    }

    /// Sup distance to another segment on the same grid and shape.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let d = self
            .history_values
            .iter()
            .zip(&other.history_values)
            .chain(self.discrete_values.iter().zip(&other.discrete_values))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(d)
    }

    /// C¹ distance: sup distance plus slope sup distance.
    pub fn c1_distance(&self, other: &Self) -> Result<f64> {
        let d = self.sup_distance(other)?;
        let ds = self
            .history_slopes
            .iter()
            .zip(&other.history_slopes)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(d + ds)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.history_values.len() != other.history_values.len()
            || self.discrete_values.len() != other.discrete_values.len()
        {
            return Err(Error::LengthMismatch {
                context: "segment shapes differ",
                expected: self.history_values.len(),
                got: other.history_values.len(),
            });
        }
        if (self.r - other.r).abs() > 1e-12 * self.r.max(1.0) {
            return Err(Error::Config(format!(
                "segments have different history lengths: {} vs {}",
                self.r, other.r
            )));
        }
        Ok(())
    }

    /// Membership in the near-origin ball where V is undefined.
    pub fn near_origin(&self) -> bool {
        self.sup_norm() <= ZETA_ABS
    }

    /// Relative zero tolerance: samples below this carry no sign.
    pub fn zeta(&self) -> f64 {
        1e-9 * self.sup_norm().max(1.0)
    }

    /// Checks membership in the phase space: `‖φ‖ < bound_m` and slope
    /// samples within the Lipschitz bound (up to `tol`).
    pub fn in_phase_space(&self, bound_m: f64, lipschitz: f64, tol: f64) -> bool {
        let (sup, c1) = self.norms();
        sup < bound_m && (c1 - sup) <= lipschitz + tol
    }

    /// Columnar CSV of the continuous part: `time,value,slope` per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,value,slope\n");
        for i in 0..self.history_times.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.history_times[i], self.history_values[i], self.history_slopes[i]
            ));
        }
        out
    }

    /// JSON header carrying `r`, `N` and the discrete coordinates.
    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({
            "r": self.r,
            "n_components": self.n_components(),
            "discrete_values": self.discrete_values,
            "grid_nodes": self.n_nodes(),
        })
    }

    /// Rebuilds a segment from the CSV body and JSON header.
    pub fn from_csv(csv: &str, header: &serde_json::Value) -> Result<Self> {
        let r = header["r"]
            .as_f64()
            .ok_or_else(|| Error::Config("segment header missing r".into()))?;
        let n = header["n_components"]
            .as_u64()
            .ok_or_else(|| Error::Config("segment header missing n_components".into()))?
            as usize;
        let discrete: Vec<f64> = header["discrete_values"]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
            .unwrap_or_default();
        let mut values = Vec::new();
        let mut slopes = Vec::new();
        for line in csv.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Config(format!("bad CSV row: {line}")));
            }
            values.push(
                cols[1]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad value: {e}")))?,
            );
            slopes.push(
                cols[2]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad slope: {e}")))?,
            );
        }
        Self::new(values, slopes, discrete, r, n)
    }
}

/// Uniform grid on `[-r, 0]` with exact endpoints.
pub fn uniform_grid(r: f64, n_nodes: usize) -> Vec<f64> {
    let m = (n_nodes - 1) as f64;
    (0..n_nodes)
        .map(|i| -r * (1.0 - i as f64 / m))
        .collect()
}

/// Cubic Hermite value on a cell of width `h` at normalized offset `u`.
#[inline]
pub fn hermite_value(u: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative (w.r.t. time, not `u`) of the Hermite cell polynomial.
#[inline]
pub fn hermite_slope(u: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let u2 = u * u;
    let dh00 = 6.0 * u2 - 6.0 * u;
    let dh10 = 3.0 * u2 - 4.0 * u + 1.0;
    let dh01 = -6.0 * u2 + 6.0 * u;
    let dh11 = 3.0 * u2 - 2.0 * u;
    (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_segment_is_valid() {
        let seg = Segment::new(vec![1.0; 11], vec![0.0; 11], vec![1.0, 1.0], 1.0, 2).unwrap();
        assert_eq!(seg.sup_norm(), 1.0);
        assert_eq!(seg.n_components(), 2);
        assert_eq!(seg.eval(-0.37).unwrap(), 1.0);
        assert_eq!(seg.eval(2.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_nan_and_bad_lengths() {
        let mut vals = vec![1.0; 11];
        vals[4] = f64::NAN;
        assert!(Segment::new(vals, vec![0.0; 11], vec![], 1.0, 0).is_err());
        assert!(Segment::new(vec![1.0; 11], vec![0.0; 10], vec![], 1.0, 0).is_err());
        assert!(Segment::new(vec![1.0; 11], vec![0.0; 11], vec![1.0], 1.0, 0).is_err());
        assert!(Segment::new(vec![1.0; 11], vec![0.0; 11], vec![], 0.0, 0).is_err());
        assert!(Segment::new(vec![1.0; 11], vec![0.0; 11], vec![], -1.0, 0).is_err());
    }

    #[test]
    fn sine_segment_sup_norm() {
        use std::f64::consts::PI;
        let seg = Segment::from_fn(
            |s| (2.0 * PI * s).sin(),
            |s| 2.0 * PI * (2.0 * PI * s).cos(),
            vec![],
            1.0,
            101,
        )
        .unwrap();
        // Grid hits the extrema of sin(2πs) at s = -3/4 and -1/4.
        assert!((seg.sup_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nodes_reproduce_bit_exactly() {
        let seg = Segment::from_fn(|s| (3.1 * s).sin(), |s| 3.1 * (3.1 * s).cos(), vec![], 1.3, 57)
            .unwrap();
        for (i, &t) in seg.times().iter().enumerate() {
            assert_eq!(seg.eval(t).unwrap(), seg.values()[i]);
        }
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let seg =
            Segment::from_fn(|s| s * s * s, |s| 3.0 * s * s, vec![], 1.0, 11).unwrap();
        // Midpoint of an interior cell.
        let t = seg.times()[4] + 0.5 * seg.h();
        let got = seg.eval(t).unwrap();
        assert!((got - t * t * t).abs() < 1e-15, "got {got}, want {}", t * t * t);
        // Slopes too.
        assert!((seg.eval_slope(t) - 3.0 * t * t).abs() < 1e-13);
    }

    #[test]
    fn norms_with_discrete() {
        let seg = Segment::new(vec![2.0; 11], vec![0.0; 11], vec![-3.0], 1.0, 1).unwrap();
        let (sup, c1) = seg.norms();
        assert_eq!(sup, 3.0);
        assert_eq!(c1, 3.0);
    }

    #[test]
    fn sine_norms_fine_grid() {
        let seg = Segment::from_fn(
            |s| (10.0 * s).sin(),
            |s| 10.0 * (10.0 * s).cos(),
            vec![],
            1.0,
            5001,
        )
        .unwrap();
        let (sup, c1) = seg.norms();
        assert!((sup - 1.0).abs() < 1e-6);
        assert!((c1 - 11.0).abs() < 1e-4);
    }

    #[test]
    fn interpolation_order_at_least_three_and_a_half() {
        // Cubic plus a smooth perturbation; bounded fourth derivative.
        let f = |s: f64| s * s * s + 0.1 * (5.0 * s).sin();
        let df = |s: f64| 3.0 * s * s + 0.5 * (5.0 * s).cos();
        let err = |nodes: usize| {
            let seg = Segment::from_fn(f, df, vec![], 1.0, nodes).unwrap();
            let mut e = 0.0_f64;
            for k in 0..1000 {
                let s = -1.0 + (k as f64 + 0.5) / 1000.0;
                e = e.max((seg.eval_hermite(s) - f(s)).abs());
            }
            e
        };
        let e1 = err(26);
        let e2 = err(51);
        let e3 = err(101);
        assert!(e2 <= e1, "halving h increased the error: {e1} -> {e2}");
        assert!(e3 <= e2);
        let order12 = (e1 / e2).log2();
        let order23 = (e2 / e3).log2();
        assert!(order12 >= 3.5, "observed order {order12}");
        assert!(order23 >= 3.5, "observed order {order23}");
    }

    #[test]
    fn csv_round_trip() {
        let seg = Segment::from_fn(|s| s, |_| 1.0, vec![0.5, -0.25], 2.0, 21).unwrap();
        let csv = seg.to_csv();
        let header = seg.header_json();
        let back = Segment::from_csv(&csv, &header).unwrap();
        assert_eq!(seg, back);
    }

    #[test]
    fn domain_errors() {
        let seg = Segment::constant(1.0, 1.0, 2).unwrap();
        assert!(seg.eval(-1.5).is_err());
        assert!(seg.eval(3.0).is_err());
        assert!(seg.eval(0.5).is_err());
    }
}
