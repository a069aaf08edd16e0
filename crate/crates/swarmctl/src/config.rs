//! JSON scenario configuration and its translation into library specs.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use swarm_lab::control::{ControlLaw, ControlSpec, EtaMode};
use swarm_lab::dynamics::ModelSpec;
use swarm_lab::integrator::SimConfig;
use swarm_lab::{AgentState, ArgConvention, Error, FrictionSpec, KernelSpec, RepulsionSpec, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub control: ControlConfig,
    pub init: InitConfig,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    HegselmannKrause {
        n: usize,
        #[serde(default = "one")]
        d: usize,
        radius: f64,
    },
    Vicsek {
        n: usize,
        radius: f64,
        speed: f64,
    },
    CuckerSmale {
        n: usize,
        d: usize,
        kernel: KernelConfig,
    },
    CuckerDong {
        n: usize,
        d: usize,
        kernel: KernelConfig,
        repulsion: RepulsionConfig,
        #[serde(default)]
        lambda: f64,
        /// Constant per-agent friction coefficients; omitted = frictionless.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        friction: Option<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    /// `h / (sigma^2 + r^2)^beta` at distances, `h / (1 + r)^beta` at
    /// squared distances.
    Rational {
        h: f64,
        #[serde(default = "one_f")]
        sigma: f64,
        beta: f64,
    },
    Indicator { radius: f64 },
    Plateau {
        height: f64,
        radius: f64,
        tail_mass: f64,
    },
}

fn one_f() -> f64 {
    1.0
}

impl KernelConfig {
    pub fn build(&self, convention: ArgConvention) -> Result<KernelSpec> {
        match self {
            KernelConfig::Rational { h, sigma, beta } => {
                KernelSpec::rational(*h, *sigma, *beta, convention)
            }
            KernelConfig::Indicator { radius } => KernelSpec::indicator(*radius, convention),
            KernelConfig::Plateau {
                height,
                radius,
                tail_mass,
            } => {
                if convention != ArgConvention::Distance {
                    return Err(Error::config(
                        "plateau kernels are defined at distances (alignment models)",
                    ));
                }
                KernelSpec::plateau(*height, *radius, *tail_mass)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RepulsionConfig {
    PowerLaw { p: f64 },
    Zero,
}

impl RepulsionConfig {
    pub fn build(&self) -> Result<RepulsionSpec> {
        match self {
            RepulsionConfig::PowerLaw { p } => RepulsionSpec::power_law(*p),
            RepulsionConfig::Zero => Ok(RepulsionSpec::Zero),
        }
    }
}

// flatten buffers the tag fields, so unknown-field denial cannot apply here
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlConfig {
    #[serde(flatten)]
    pub law: LawConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_hold_dt: Option<f64>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            law: LawConfig::None,
            sample_hold_dt: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LawConfig {
    None,
    Total { alpha: f64, m: f64 },
    SparseCs { m: f64 },
    SparseCd {
        m: f64,
        /// Defaults to `m / E(0)` at run start.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
    },
    Leader { gamma: f64, q: f64 },
    Structured {
        gamma: f64,
        phi: KernelConfig,
        #[serde(default)]
        eta_mode: EtaModeConfig,
    },
    LocalAverage {
        gamma: f64,
        /// Omitted = unbounded (total information).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EtaModeConfig {
    #[default]
    PerAgent,
    MaxNormalized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Explicit { x: Vec<f64>, v: Vec<f64> },
    Random {
        seed: u64,
        #[serde(default = "unit_range")]
        x_range: (f64, f64),
        #[serde(default = "unit_range")]
        v_range: (f64, f64),
    },
    Rescaled { seed: u64, x0: f64, v0: f64 },
}

fn unit_range() -> (f64, f64) {
    (-1.0, 1.0)
}

impl InitConfig {
    pub fn seed(&self) -> Option<u64> {
        match self {
            InitConfig::Explicit { .. } => None,
            InitConfig::Random { seed, .. } | InitConfig::Rescaled { seed, .. } => Some(*seed),
        }
    }

    pub fn with_seed(&mut self, new_seed: u64) {
        match self {
            InitConfig::Explicit { .. } => {}
            InitConfig::Random { seed, .. } | InitConfig::Rescaled { seed, .. } => {
                *seed = new_seed
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimBlock {
    pub h: f64,
    pub t_end: f64,
    pub record_stride: usize,
    pub stop_on_region_entry: bool,
    pub divergence_radius: f64,
    pub collision_floor: f64,
}

impl Default for SimBlock {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            h: d.h,
            t_end: d.t_end,
            record_stride: d.record_stride,
            stop_on_region_entry: d.stop_on_region_entry,
            divergence_radius: d.divergence_radius,
            collision_floor: d.collision_floor,
        }
    }
}

impl SimBlock {
    pub fn build(&self) -> SimConfig {
        SimConfig {
            h: self.h,
            t_end: self.t_end,
            record_stride: self.record_stride,
            stop_on_region_entry: self.stop_on_region_entry,
            divergence_radius: self.divergence_radius,
            collision_floor: self.collision_floor,
            early_exit_v: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBlock {
    pub x0: AxisBlock,
    pub v0: AxisBlock,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default = "default_success_v")]
    pub success_v: f64,
    #[serde(default)]
    pub boundaries: Vec<BoundaryConfig>,
    #[serde(default = "default_levels")]
    pub contour_levels: Vec<f64>,
}

fn default_trials() -> u32 {
    20
}

fn default_success_v() -> f64 {
    1e-5
}

fn default_levels() -> Vec<f64> {
    vec![0.8]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisBlock {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisBlock {
    pub fn build(&self) -> Result<Vec<f64>> {
        if self.count == 0 || self.max < self.min {
            return Err(Error::config("axis needs count >= 1 and max >= min"));
        }
        Ok(swarm_lab::region::linspace(self.min, self.max, self.count))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// Certified region of the uncontrolled alignment dynamics.
    Autonomous,
    /// Region enlarged by local-average feedback.
    Enlarged { gamma: f64, radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Everything a run needs, built and validated from a config.
pub struct BuiltScenario {
    pub model: ModelSpec,
    pub control: ControlSpec,
    pub state0: AgentState,
    pub sim: SimConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config parse: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn shape(&self) -> (usize, usize) {
        match &self.model {
            ModelConfig::HegselmannKrause { n, d, .. } => (*n, *d),
            ModelConfig::Vicsek { n, .. } => (*n, 2),
            ModelConfig::CuckerSmale { n, d, .. } => (*n, *d),
            ModelConfig::CuckerDong { n, d, .. } => (*n, *d),
        }
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        Ok(match &self.model {
            ModelConfig::HegselmannKrause { n, d, radius } => ModelSpec::HegselmannKrause {
                n: *n,
                d: *d,
                radius: *radius,
            },
            ModelConfig::Vicsek { n, radius, speed } => ModelSpec::Vicsek {
                n: *n,
                radius: *radius,
                speed: *speed,
            },
            ModelConfig::CuckerSmale { n, d, kernel } => ModelSpec::CuckerSmale {
                n: *n,
                d: *d,
                kernel: kernel.build(ArgConvention::Distance)?,
            },
            ModelConfig::CuckerDong {
                n,
                d,
                kernel,
                repulsion,
                lambda,
                friction,
            } => {
                let friction = match friction {
                    None => FrictionSpec::none(),
                    Some(b) => FrictionSpec::constant(b.clone(), *lambda)?,
                };
                ModelSpec::CuckerDong {
                    n: *n,
                    d: *d,
                    kernel: kernel.build(ArgConvention::SquaredDistance)?,
                    repulsion: repulsion.build()?,
                    friction,
                }
            }
        })
    }

    pub fn build_control(&self) -> Result<ControlSpec> {
        let law = match &self.control.law {
            LawConfig::None => ControlLaw::None,
            LawConfig::Total { alpha, m } => ControlLaw::Total {
                alpha: *alpha,
                m_budget: *m,
            },
            LawConfig::SparseCs { m } => ControlLaw::SparseCs { m_budget: *m },
            LawConfig::SparseCd { m, eps } => ControlLaw::SparseCd {
                m_budget: *m,
                eps: *eps,
            },
            LawConfig::Leader { gamma, q } => {
                if *q <= 0.0 {
                    return Err(Error::config("leader law needs q > 0"));
                }
                ControlLaw::Leader {
                    gamma: *gamma,
                    q: *q,
                }
            }
            LawConfig::Structured {
                gamma,
                phi,
                eta_mode,
            } => ControlLaw::Structured {
                gamma: *gamma,
                phi: phi.build(ArgConvention::Distance)?,
                mode: match eta_mode {
                    EtaModeConfig::PerAgent => EtaMode::PerAgent,
                    EtaModeConfig::MaxNormalized => EtaMode::MaxNormalized,
                },
            },
            LawConfig::LocalAverage { gamma, radius } => ControlLaw::LocalAverage {
                gamma: *gamma,
                radius: radius.unwrap_or(f64::INFINITY),
            },
        };
        Ok(ControlSpec {
            law,
            sample_hold_dt: self.control.sample_hold_dt,
        })
    }

    pub fn build_state(&self) -> Result<AgentState> {
        let (n, d) = self.shape();
        match &self.init {
            InitConfig::Explicit { x, v } => AgentState::new(d, n, x.clone(), v.clone()),
            InitConfig::Random {
                seed,
                x_range,
                v_range,
            } => {
                if x_range.1 <= x_range.0 || v_range.1 <= v_range.0 {
                    return Err(Error::config("random init ranges must be nonempty"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let x = (0..n * d)
                    .map(|_| rng.random_range(x_range.0..x_range.1))
                    .collect();
                let v = (0..n * d)
                    .map(|_| rng.random_range(v_range.0..v_range.1))
                    .collect();
                AgentState::new(d, n, x, v)
            }
            InitConfig::Rescaled { seed, x0, v0 } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let raw = swarm_lab::region::uniform_draw(n, d, &mut rng);
                swarm_lab::region::rescale_to_spreads(&raw, *x0, *v0)
            }
        }
    }

    /// Build and cross-validate every block.
    pub fn build(&self) -> Result<BuiltScenario> {
        let model = self.build_model()?;
        let control = self.build_control()?;
        let state0 = self.build_state()?;
        let sim = self.sim.build();
        sim.validate()?;
        model.validate_state(&state0)?;
        Ok(BuiltScenario {
            model,
            control,
            state0,
            sim,
        })
    }
}

/// Set a numeric field addressed by a dotted path inside a JSON config.
pub fn set_numeric_field(
    config: &serde_json::Value,
    path: &str,
    value: f64,
) -> Result<serde_json::Value> {
    if path.is_empty() || path.split('.').any(|s| s.is_empty()) {
        return Err(Error::config(format!("malformed parameter path '{path}'")));
    }
    let pointer: String = path.split('.').map(|seg| format!("/{seg}")).collect();
    let mut root = config.clone();
    let slot = root
        .pointer_mut(&pointer)
        .ok_or_else(|| Error::config(format!("parameter path '{path}' not found in config")))?;
    if !slot.is_number() {
        return Err(Error::config(format!(
            "parameter path '{path}' does not address a numeric field"
        )));
    }
    *slot = serde_json::Value::from(value);
    Ok(root)
}
