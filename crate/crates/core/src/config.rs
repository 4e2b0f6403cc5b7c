//! Experiment configuration: JSON descriptions of the system, kernel,
//! integrator, and scan, round-trippable byte-for-byte so reports stay
//! reproducible.

use serde::{Deserialize, Serialize};

use crate::difference::DiscreteSystemSpec;
use crate::error::{Error, Result};
use crate::kernel::DelayKernel;
use crate::morse::ScanParams;
use crate::segment::Segment;
use crate::system::CyclicSystemSpec;

/// Which application the experiment drives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemConfig {
    Continuous { spec: CyclicSystemSpec },
    Discrete { spec: DiscreteSystemSpec },
}

/// Step and sampling choices for the continuous integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    pub sample_dt: f64,
    pub grid_nodes: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.0025,
            horizon: 500.0,
            sample_dt: 0.5,
            grid_nodes: 201,
        }
    }
}

/// Ensemble scan configuration (both time domains).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    /// Continuous: number of random Fourier seeds.
    pub seeds: usize,
    pub rng_seed: u64,
    /// Fourier modes per seed.
    pub modes: usize,
    /// Trailing/early window width in samples.
    pub window: usize,
    /// Top bucket cap; defaults to N* + 2.
    pub n0: Option<u32>,
    pub origin_radius: f64,
    /// Early-window start; defaults to 2r(N+2).
    pub regularization_time: Option<f64>,
    pub min_period: f64,
    pub max_period: f64,
    pub period_tol: f64,
    /// Discrete: iteration count.
    pub steps: usize,
    /// Discrete: user-supplied unstable multiplier count; when absent the
    /// linearized trinomial's roots outside the unit circle are counted.
    pub m_star: Option<u32>,
    /// Discrete: grid points per axis (defaults to ~10⁴ seeds total).
    pub per_axis: Option<usize>,
    /// Discrete: seed grid amplitude.
    pub amplitude: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            seeds: 100,
            rng_seed: 24_601,
            modes: 4,
            window: 8,
            n0: None,
            origin_radius: 0.01,
            regularization_time: None,
            min_period: 0.5,
            max_period: 12.0,
            period_tol: 0.01,
            steps: 1000,
            m_star: None,
            per_axis: None,
            amplitude: 1.5,
        }
    }
}

/// Named initial-history profiles for single-trajectory commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum InitialProfile {
    Constant { value: f64 },
    /// `amplitude·sin(2π·cycles·s/r) + offset`.
    Sine { amplitude: f64, cycles: f64, offset: f64 },
    /// One draw from the Fourier seed family.
    Fourier { seed: u64, modes: usize },
}

impl Default for InitialProfile {
    fn default() -> Self {
        InitialProfile::Fourier { seed: 0, modes: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub directory: String,
    pub per_trajectory_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".to_string(),
            per_trajectory_csv: false,
        }
    }
}

/// Top-level experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    /// Required for continuous systems.
    #[serde(default)]
    pub kernel: Option<DelayKernel>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub initial: InitialProfile,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(s)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match &self.system {
            SystemConfig::Continuous { spec } => {
                spec.validate()?;
                let kernel = self.kernel.as_ref().ok_or_else(|| {
                    Error::Config("continuous systems need a kernel".into())
                })?;
                kernel.validate()?;
                if self.integrator.grid_nodes < 2 {
                    return Err(Error::Config("grid_nodes must be at least 2".into()));
                }
            }
            SystemConfig::Discrete { spec } => {
                spec.validate()?;
            }
        }
        Ok(())
    }

    pub fn continuous_spec(&self) -> Result<&CyclicSystemSpec> {
        match &self.system {
            SystemConfig::Continuous { spec } => Ok(spec),
            SystemConfig::Discrete { .. } => {
                Err(Error::Config("expected a continuous system".into()))
            }
        }
    }

    pub fn discrete_spec(&self) -> Result<&DiscreteSystemSpec> {
        match &self.system {
            SystemConfig::Discrete { spec } => Ok(spec),
            SystemConfig::Continuous { .. } => {
                Err(Error::Config("expected a discrete system".into()))
            }
        }
    }

    pub fn kernel(&self) -> Result<&DelayKernel> {
        self.kernel
            .as_ref()
            .ok_or_else(|| Error::Config("missing kernel".into()))
    }

    /// Builds the single-trajectory initial segment from the named profile.
    pub fn initial_segment(&self) -> Result<Segment> {
        let spec = self.continuous_spec()?;
        let r = self.kernel()?.r;
        let nodes = self.integrator.grid_nodes;
        match &self.initial {
            InitialProfile::Constant { value } => Segment::from_fn(
                |_| *value,
                |_| 0.0,
                vec![*value; spec.n_components],
                r,
                nodes,
            ),
            InitialProfile::Sine { amplitude, cycles, offset } => {
                let w = std::f64::consts::TAU * cycles / r;
                let (a, o) = (*amplitude, *offset);
                Segment::from_fn(
                    |s| a * (w * s).sin() + o,
                    |s| a * w * (w * s).cos(),
                    vec![o; spec.n_components],
                    r,
                    nodes,
                )
            }
            InitialProfile::Fourier { seed, modes } => {
                let seeds =
                    crate::morse::generate_fourier_seeds(spec, r, nodes, 1, *seed, *modes);
                Ok(seeds.into_iter().next().expect("one seed requested"))
            }
        }
    }

    /// Scan parameters resolved against the system and spectrum.
    pub fn scan_params(&self, n_star: u32) -> Result<ScanParams> {
        let spec = self.continuous_spec()?;
        let r = self.kernel()?.r;
        Ok(ScanParams {
            sample_dt: self.integrator.sample_dt,
            window: self.scan.window,
            n_star,
            n0: self.scan.n0,
            origin_radius: self.scan.origin_radius,
            regularization_time: self
                .scan
                .regularization_time
                .unwrap_or(2.0 * r * (spec.n_components as f64 + 2.0)),
            min_period: self.scan.min_period,
            max_period: self.scan.max_period,
            period_tol: self.scan.period_tol,
        })
    }

    /// Discrete seed grid, sized near 10⁴ seeds by default.
    pub fn discrete_seeds(&self) -> Result<Vec<Vec<f64>>> {
        let spec = self.discrete_spec()?;
        let dim = spec.n + 1;
        let per_axis = self.scan.per_axis.unwrap_or_else(|| {
            // Smallest even count with per_axis^dim >= 10^4.
            let mut k = (10_000f64.powf(1.0 / dim as f64)).ceil() as usize;
            if k % 2 == 1 {
                k += 1;
            }
            k.max(2)
        });
        Ok(crate::difference::grid_seeds(spec.n, per_axis, self.scan.amplitude))
    }
}
