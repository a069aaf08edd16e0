//! The three demo computations: a controlled flocking run, a Monte-Carlo
//! consensus-region map, and an attraction-repulsion energy profile.

use serde::{Deserialize, Serialize};

use swarm_lab::control::{ControlLaw, ControlSpec};
use swarm_lab::dynamics::ModelSpec;
use swarm_lab::integrator::{simulate, SimConfig};
use swarm_lab::region::{
    extract_contours, probability_grid, rescale_to_spreads, theoretical_boundary, uniform_draw,
    BoundaryVariant, TrialProtocol,
};
use swarm_lab::threshold::Threshold;
use swarm_lab::{FrictionSpec, KernelSpec, RepulsionSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Deserialize)]
#[serde(default)]
struct FlockParams {
    n: usize,
    seed: u64,
    x0: f64,
    v0: f64,
    kernel_h: f64,
    kernel_beta: f64,
    law: String,
    strength: f64,
    radius: f64,
    t_end: f64,
}

impl Default for FlockParams {
    fn default() -> Self {
        Self {
            n: 20,
            seed: 7,
            x0: 2.0,
            v0: 4.0,
            kernel_h: 1.0,
            kernel_beta: 1.0,
            law: "sparse".into(),
            strength: 1.0,
            radius: 2.0,
            t_end: 25.0,
        }
    }
}

#[derive(Serialize)]
struct FlockView {
    times: Vec<f64>,
    /// Per record: flattened agent positions (x0 y0 x1 y1 ...).
    positions: Vec<Vec<f64>>,
    x_spread: Vec<f64>,
    v_spread: Vec<f64>,
    control_norms: Vec<f64>,
    active_agent: Vec<i64>,
    region_entry_time: Option<f64>,
}

/// Simulate a planar alignment flock under the selected law.
pub fn flock_simulation(params: &str) -> Result<String, String> {
    let p: FlockParams = serde_json::from_str(params).map_err(err)?;
    let kernel = KernelSpec::cucker_smale(p.kernel_h, 1.0, p.kernel_beta).map_err(err)?;
    let model = ModelSpec::CuckerSmale {
        n: p.n,
        d: 2,
        kernel,
    };
    let law = match p.law.as_str() {
        "none" => ControlLaw::None,
        "sparse" => ControlLaw::SparseCs {
            m_budget: p.strength,
        },
        "total" => {
            let alpha = p.strength / (p.n as f64 * p.v0.sqrt().max(1e-9));
            ControlLaw::Total {
                alpha,
                m_budget: p.strength,
            }
        }
        "local_average" => ControlLaw::LocalAverage {
            gamma: p.strength,
            radius: p.radius,
        },
        other => return Err(format!("unknown law '{other}'")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let raw = uniform_draw(p.n, 2, &mut rng);
    let state0 = rescale_to_spreads(&raw, p.x0, p.v0).map_err(err)?;
    let cfg = SimConfig {
        h: 2e-3,
        t_end: p.t_end.clamp(1.0, 120.0),
        record_stride: ((p.t_end / 2e-3 / 400.0).ceil() as usize).max(1),
        ..Default::default()
    };
    let rec = simulate(&model, &ControlSpec::new(law), &state0, &cfg).map_err(err)?;
    let view = FlockView {
        times: rec.times.clone(),
        positions: rec.states.iter().map(|s| s.x().to_vec()).collect(),
        x_spread: rec.x_spread.clone(),
        v_spread: rec.v_spread.clone(),
        control_norms: rec.control_norms.clone(),
        active_agent: rec
            .active_agent
            .iter()
            .map(|a| a.map(|i| i as i64).unwrap_or(-1))
            .collect(),
        region_entry_time: rec.region_entry_time,
    };
    serde_json::to_string(&view).map_err(err)
}

#[derive(Deserialize)]
#[serde(default)]
struct RegionParams {
    n: usize,
    seed: u64,
    kernel_h: f64,
    kernel_beta: f64,
    law: String,
    gamma: f64,
    radius: f64,
    x_max: f64,
    v_max: f64,
    cells: usize,
    trials: u32,
    t_end: f64,
    contour_level: f64,
}

impl Default for RegionParams {
    fn default() -> Self {
        Self {
            n: 2,
            seed: 1,
            kernel_h: 1.0,
            kernel_beta: 1.0,
            law: "none".into(),
            gamma: 1.0,
            radius: 2.0,
            x_max: 4.0,
            v_max: 2.0,
            cells: 9,
            trials: 8,
            t_end: 60.0,
            contour_level: 0.8,
        }
    }
}

#[derive(Serialize)]
struct RegionView {
    x0_axis: Vec<f64>,
    v0_axis: Vec<f64>,
    probability: Vec<f64>,
    boundary: Vec<Option<f64>>,
    contours: Vec<Vec<(f64, f64)>>,
}

/// Empirical consensus probabilities over an (X0, V0) lattice with the
/// certified boundary overlaid.
pub fn region_map(params: &str) -> Result<String, String> {
    let p: RegionParams = serde_json::from_str(params).map_err(err)?;
    let cells = p.cells.clamp(2, 25);
    let kernel = KernelSpec::cucker_smale(p.kernel_h, 1.0, p.kernel_beta).map_err(err)?;
    let model = ModelSpec::CuckerSmale {
        n: p.n.clamp(2, 40),
        d: 2,
        kernel: kernel.clone(),
    };
    let control = match p.law.as_str() {
        "none" => ControlSpec::none(),
        "local_average" => ControlSpec::new(ControlLaw::LocalAverage {
            gamma: p.gamma,
            radius: p.radius,
        }),
        other => return Err(format!("unknown law '{other}'")),
    };
    let x0_axis = swarm_lab::region::linspace(0.0, p.x_max.max(0.1), cells);
    let v0_axis = swarm_lab::region::linspace(0.0, p.v_max.max(0.1), cells);
    let protocol = TrialProtocol {
        trials: p.trials.clamp(1, 40),
        ..Default::default()
    };
    let cfg = SimConfig {
        h: 5e-3,
        t_end: p.t_end.clamp(5.0, 200.0),
        record_stride: 10_000,
        ..Default::default()
    };
    let grid = probability_grid(
        &x0_axis,
        &v0_axis,
        &model,
        &control,
        &protocol,
        &cfg,
        p.seed,
    )
    .map_err(err)?;
    let variant = match p.law.as_str() {
        "local_average" => BoundaryVariant::Enlarged {
            gamma: p.gamma,
            radius: p.radius,
        },
        _ => BoundaryVariant::Autonomous,
    };
    let boundary =
        theoretical_boundary(&x0_axis, &kernel, model.agent_count(), &variant).map_err(err)?;
    let contours = extract_contours(&grid, p.contour_level.clamp(0.05, 0.95));
    let view = RegionView {
        x0_axis,
        v0_axis,
        probability: grid.cells.iter().map(|c| c.probability).collect(),
        boundary,
        contours,
    };
    serde_json::to_string(&view).map_err(err)
}

#[derive(Deserialize)]
#[serde(default)]
struct EnergyParams {
    n: usize,
    seed: u64,
    kernel_h: f64,
    kernel_beta: f64,
    repulsion_p: f64,
    m: f64,
    controlled: bool,
    t_end: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            n: 8,
            seed: 12,
            kernel_h: 1.0,
            kernel_beta: 1.1,
            repulsion_p: 2.0,
            m: 35.0,
            controlled: true,
            t_end: 20.0,
        }
    }
}

#[derive(Serialize)]
struct EnergyView {
    times: Vec<f64>,
    positions: Vec<Vec<f64>>,
    energy: Vec<f64>,
    kinetic: Vec<f64>,
    attraction: Vec<f64>,
    repulsion: Vec<f64>,
    threshold: Option<f64>,
    region_entry_time: Option<f64>,
}

/// Attraction-repulsion run with the sparse braking law, reporting the
/// energy ledger against the critical threshold.
pub fn energy_rundown(params: &str) -> Result<String, String> {
    let p: EnergyParams = serde_json::from_str(params).map_err(err)?;
    let n = p.n.clamp(2, 16);
    let kernel = KernelSpec::cucker_dong(p.kernel_h, p.kernel_beta).map_err(err)?;
    let repulsion = RepulsionSpec::power_law(p.repulsion_p).map_err(err)?;
    let model = ModelSpec::CuckerDong {
        n,
        d: 2,
        kernel,
        repulsion,
        friction: FrictionSpec::none(),
    };
    // spread the agents out with unit-scale speeds; keep pairs separated
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let raw = uniform_draw(n, 2, &mut rng);
    let state0 = rescale_to_spreads(&raw, 2.0, 4.0).map_err(err)?;
    let control = if p.controlled {
        ControlSpec::new(ControlLaw::SparseCd {
            m_budget: p.m,
            eps: None,
        })
    } else {
        ControlSpec::none()
    };
    let cfg = SimConfig {
        h: 1e-3,
        t_end: p.t_end.clamp(1.0, 120.0),
        record_stride: ((p.t_end / 1e-3 / 400.0).ceil() as usize).max(1),
        ..Default::default()
    };
    let rec = simulate(&model, &control, &state0, &cfg).map_err(err)?;
    let parts = rec.energy_parts.as_ref().expect("attraction-repulsion run");
    let view = EnergyView {
        times: rec.times.clone(),
        positions: rec.states.iter().map(|s| s.x().to_vec()).collect(),
        energy: rec.energy.clone().unwrap_or_default(),
        kinetic: parts.iter().map(|p| p.kinetic).collect(),
        attraction: parts.iter().map(|p| p.attraction).collect(),
        repulsion: parts.iter().map(|p| p.repulsion).collect(),
        threshold: rec.vartheta.and_then(|t| match t {
            Threshold::Finite(v) => Some(v),
            Threshold::Infinite => None,
        }),
        region_entry_time: rec.region_entry_time,
    };
    serde_json::to_string(&view).map_err(err)
}
