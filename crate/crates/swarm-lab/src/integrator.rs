//! Fixed-step RK4 integration with sample-and-hold control, functional
//! recording, event detection and admissibility monitoring.

use crate::control::{
    decentralized_feedback, sparse_control_cd, sparse_control_cs, total_control, ControlLaw,
    ControlSpec,
};
use crate::dynamics::ModelSpec;
use crate::energy::{energy_breakdown_flat, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::state::{perp_part, spread_bilinear, velocity_spread, AgentState};
use crate::threshold::{cd_energy_threshold, Threshold};
use crate::vecn;

/// Relative margin keeping the energy-entry test off the threshold boundary.
const ENTRY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Fixed step size.
    pub h: f64,
    pub t_end: f64,
    /// Record every this many steps (the initial and final states are always
    /// recorded).
    pub record_stride: usize,
    pub stop_on_region_entry: bool,
    /// Any position norm beyond this truncates the run with a divergence
    /// event.
    pub divergence_radius: f64,
    /// Any pairwise distance below this truncates an attraction-repulsion
    /// run with a collision event.
    pub collision_floor: f64,
    /// Truncate once the velocity spread falls this low (used by the
    /// Monte-Carlo driver to cut short already-decided trials).
    pub early_exit_v: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            t_end: 50.0,
            record_stride: 10,
            stop_on_region_entry: false,
            divergence_radius: 1e6,
            collision_floor: 1e-6,
            early_exit_v: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::config("step size must be positive and finite"));
        }
        if self.t_end < self.h {
            return Err(Error::config("t_end must be at least one step"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record stride must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    RegionEntry,
    Divergence,
    Collision,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

/// Downsampled history of one run plus its events and admissibility verdict.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub n: usize,
    pub d: usize,
    pub times: Vec<f64>,
    pub states: Vec<AgentState>,
    pub x_spread: Vec<f64>,
    pub v_spread: Vec<f64>,
    /// Total energy series; attraction-repulsion runs only.
    pub energy: Option<Vec<f64>>,
    pub energy_parts: Option<Vec<EnergyBreakdown>>,
    pub controls: Vec<Vec<f64>>,
    pub control_norms: Vec<f64>,
    /// Agent carrying the control at each record; `None` when the control
    /// vanishes or acts on all agents.
    pub active_agent: Vec<Option<usize>>,
    pub events: Vec<Event>,
    pub region_entry_time: Option<f64>,
    /// Budget of the law, when it has one.
    pub budget: Option<f64>,
    /// False iff the mixed-norm budget was ever exceeded beyond 1e-9.
    pub admissible: bool,
    /// Critical energy level; attraction-repulsion runs only.
    pub vartheta: Option<Threshold>,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &AgentState {
        self.states.last().expect("records are never empty")
    }

    pub fn final_v_spread(&self) -> f64 {
        *self.v_spread.last().expect("records are never empty")
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.energy.as_ref().and_then(|e| e.last().copied())
    }

    pub fn has_event(&self, kind: EventKind) -> bool {
        self.events.iter().any(|e| e.kind == kind)
    }
}

/// One classical RK4 update of `y` by `h`; any control must already be
/// captured inside `rhs` so all four stages see the same held value.
pub fn rk4_step<F>(rhs: &F, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut ws = Rk4Workspace::new(y.len());
    let mut out = y.to_vec();
    ws.step(rhs, t, h, &mut out)?;
    Ok(out)
}

struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    /// Advance `y` in place by one step.
    fn step<F>(&mut self, rhs: &F, t: f64, h: f64, y: &mut [f64]) -> Result<()>
    where
        F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        rhs(t, y, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        rhs(t + h, &self.tmp, &mut self.k4)?;
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
            if !y[i].is_finite() {
                return Err(Error::NumericalBlowup {
                    t: t + h,
                    detail: format!("non-finite component {i} after step"),
                });
            }
        }
        Ok(())
    }
}

/// Constants resolved once per run from the law, model and initial state.
struct RunLaw {
    law: ControlLaw,
    hold_steps: usize,
    budget: Option<f64>,
    /// `eps` for the sparse attraction-repulsion law.
    cd_eps: f64,
    cd_energy0: f64,
}

fn resolve_law(
    control: &ControlSpec,
    model: &ModelSpec,
    state0: &AgentState,
    cfg: &SimConfig,
) -> Result<RunLaw> {
    let law = control.law.clone();
    let hold_steps = match control.sample_hold_dt {
        None => 1,
        Some(dt) => {
            if dt <= 0.0 {
                return Err(Error::config("sample-hold period must be positive"));
            }
            ((dt / cfg.h).round() as usize).max(1)
        }
    };
    let mut cd_eps = 0.0;
    let mut cd_energy0 = 0.0;
    match (&law, model) {
        (ControlLaw::None, _) => {}
        (ControlLaw::Total { alpha, m_budget }, ModelSpec::CuckerSmale { .. }) => {
            let v0 = velocity_spread(state0);
            if v0 > 0.0 && *alpha > m_budget / (state0.count() as f64 * v0.sqrt()) {
                return Err(Error::config(format!(
                    "total control alpha = {alpha} exceeds M/(N sqrt(V0)) = {}",
                    m_budget / (state0.count() as f64 * v0.sqrt())
                )));
            }
        }
        (ControlLaw::SparseCs { .. }, ModelSpec::CuckerSmale { .. }) => {}
        (
            ControlLaw::SparseCd { m_budget, eps },
            ModelSpec::CuckerDong {
                kernel, repulsion, ..
            },
        ) => {
            cd_energy0 = crate::energy::total_energy(state0, kernel, repulsion)?;
            if cd_energy0 <= 0.0 {
                return Err(Error::config(
                    "sparse attraction-repulsion control needs positive initial energy",
                ));
            }
            cd_eps = eps.unwrap_or(m_budget / cd_energy0);
            if !(0.0..=m_budget / cd_energy0 + 1e-15).contains(&cd_eps) {
                return Err(Error::config(format!(
                    "eps = {cd_eps} outside [0, M/E(0)] = [0, {}]",
                    m_budget / cd_energy0
                )));
            }
        }
        (
            ControlLaw::Leader { .. } | ControlLaw::Structured { .. }
            | ControlLaw::LocalAverage { .. },
            ModelSpec::CuckerSmale { .. },
        ) => {}
        (law, model) => {
            return Err(Error::config(format!(
                "control law {law:?} does not apply to model {model:?}"
            )))
        }
    }
    Ok(RunLaw {
        law,
        hold_steps,
        budget: control.law.budget(),
        cd_eps,
        cd_energy0,
    })
}

impl RunLaw {
    /// Recompute the held control from the current state.
    fn held_control(&self, model: &ModelSpec, state: &AgentState, v0: f64) -> Result<Vec<f64>> {
        match (&self.law, model) {
            (ControlLaw::Total { alpha, m_budget }, _) => {
                total_control(state, *alpha, *m_budget, v0)
            }
            (ControlLaw::SparseCs { m_budget }, ModelSpec::CuckerSmale { kernel, .. }) => {
                sparse_control_cs(state, *m_budget, kernel)
            }
            (
                ControlLaw::SparseCd { m_budget, .. },
                ModelSpec::CuckerDong {
                    kernel, repulsion, ..
                },
            ) => sparse_control_cd(
                state,
                *m_budget,
                self.cd_energy0,
                self.cd_eps,
                kernel,
                repulsion,
            ),
            _ => Ok(vec![0.0; state.count() * state.dim()]),
        }
    }
}

/// Integrate `model` under `control` from `state0`.
///
/// Centralized controls are recomputed every `sample_hold_dt` and held
/// constant across all four stages of each step; decentralized laws are part
/// of the closed-loop dynamics and are evaluated at every stage. Collisions
/// and numerical blowups truncate the run with an event instead of failing.
pub fn simulate(
    model: &ModelSpec,
    control: &ControlSpec,
    state0: &AgentState,
    cfg: &SimConfig,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    model.validate_state(state0)?;
    let run_law = resolve_law(control, model, state0, cfg)?;
    let (n, d) = (model.agent_count(), model.dim());
    let v0_spread = velocity_spread(state0);

    let (cs_kernel, cd_specs) = match model {
        ModelSpec::CuckerSmale { kernel, .. }
        | ModelSpec::PerturbedCuckerSmale { kernel, .. } => (Some(kernel.clone()), None),
        ModelSpec::CuckerDong {
            kernel, repulsion, ..
        } => (None, Some((kernel.clone(), repulsion.clone()))),
        _ => (None, None),
    };
    let vartheta = match &cd_specs {
        Some((kernel, _)) => Some(cd_energy_threshold(kernel, n)?),
        None => None,
    };

    let mut y = model.state_to_ode(state0)?;
    let mut ws = Rk4Workspace::new(y.len());
    let steps = (cfg.t_end / cfg.h).round().max(1.0) as usize;

    let mut rec = TrajectoryRecord {
        n,
        d,
        times: Vec::new(),
        states: Vec::new(),
        x_spread: Vec::new(),
        v_spread: Vec::new(),
        energy: cd_specs.as_ref().map(|_| Vec::new()),
        energy_parts: cd_specs.as_ref().map(|_| Vec::new()),
        controls: Vec::new(),
        control_norms: Vec::new(),
        active_agent: Vec::new(),
        events: Vec::new(),
        region_entry_time: None,
        budget: run_law.budget,
        admissible: true,
        vartheta,
    };

    let mut held = vec![0.0; n * d];
    let mut held_sum = 0.0;
    let needs_hold =
        !run_law.law.is_decentralized() && !matches!(run_law.law, ControlLaw::None);
    let mut entered = false;

    for step in 0..=steps {
        let t = step as f64 * cfg.h;
        let (xs, vs) = model.spread_pair_from_ode(&y, state0);

        // sample-and-hold boundary
        if needs_hold && step % run_law.hold_steps == 0 {
            let state = model.ode_to_state(&y, state0)?;
            held = run_law.held_control(model, &state, v0_spread)?;
            held_sum = vecn::block_norm_sum(&held, d, n);
            if let Some(m) = run_law.budget {
                if held_sum > m + 1e-9 {
                    rec.admissible = false;
                }
            }
        }

        // energy bookkeeping; a singular configuration is a collision
        let energy_now = match &cd_specs {
            Some((kernel, repulsion)) => {
                let parts = match model.position_view(&y) {
                    Some(x) => energy_breakdown_flat(x, &y[n * d..], n, d, kernel, repulsion),
                    None => unreachable!("attraction-repulsion states carry positions"),
                };
                match parts {
                    Ok(p) => Some(p),
                    Err(Error::SingularConfiguration { .. }) => {
                        rec.events.push(Event {
                            t,
                            kind: EventKind::Collision,
                        });
                        rec.events.push(Event {
                            t,
                            kind: EventKind::End,
                        });
                        return Ok(rec);
                    }
                    Err(other) => return Err(other),
                }
            }
            None => None,
        };

        // events, at step granularity
        let mut truncate = false;
        if !entered {
            let inside = match (&cs_kernel, &energy_now) {
                (Some(kernel), None) => {
                    crate::threshold::cs_region_check(xs, vs, kernel, n)?.inside
                }
                (None, Some(parts)) => match vartheta {
                    Some(Threshold::Finite(th)) => parts.total() <= th * (1.0 - ENTRY_MARGIN),
                    Some(Threshold::Infinite) => true,
                    None => false,
                },
                _ => false,
            };
            if inside {
                entered = true;
                rec.region_entry_time = Some(t);
                rec.events.push(Event {
                    t,
                    kind: EventKind::RegionEntry,
                });
                if cfg.stop_on_region_entry {
                    truncate = true;
                }
            }
        }
        if let Some(positions) = model.position_view(&y) {
            if vecn::max_block_norm(positions, d, n) > cfg.divergence_radius {
                rec.events.push(Event {
                    t,
                    kind: EventKind::Divergence,
                });
                truncate = true;
            }
            if cd_specs.is_some()
                && cfg.collision_floor > 0.0
                && vecn::min_block_distance(positions, d, n) < cfg.collision_floor
            {
                rec.events.push(Event {
                    t,
                    kind: EventKind::Collision,
                });
                truncate = true;
            }
        }
        if let Some(exit_v) = cfg.early_exit_v {
            if vs <= exit_v {
                truncate = true;
            }
        }

        let last = truncate || step == steps;
        if step % cfg.record_stride == 0 || last {
            let state = model.ode_to_state(&y, state0)?;
            let monitored: Vec<f64> = if run_law.law.is_decentralized() {
                decentralized_feedback(&run_law.law, &state)?
            } else {
                held.clone()
            };
            rec.times.push(t);
            rec.x_spread.push(xs);
            rec.v_spread.push(vs);
            if let (Some(series), Some(parts_series), Some(parts)) =
                (&mut rec.energy, &mut rec.energy_parts, energy_now.as_ref())
            {
                series.push(parts.total());
                parts_series.push(*parts);
            }
            rec.control_norms.push(if run_law.law.is_decentralized() {
                vecn::block_norm_sum(&monitored, d, n)
            } else {
                held_sum
            });
            rec.active_agent.push(active_block(&monitored, n, d));
            rec.controls.push(monitored);
            rec.states.push(state);
        }
        if last {
            rec.events.push(Event {
                t,
                kind: EventKind::End,
            });
            return Ok(rec);
        }

        // advance one step; map singular/blowup failures to events
        let step_result = if run_law.law.is_decentralized() {
            let law = &run_law.law;
            let base = model.clone();
            ws.step(
                &|tt: f64, yy: &[f64], out: &mut [f64]| {
                    let stage_state = base.ode_to_state(yy, state0)?;
                    let fb = decentralized_feedback(law, &stage_state)?;
                    base.rhs(tt, yy, Some(&fb), out)
                },
                t,
                cfg.h,
                &mut y,
            )
        } else {
            let u = if needs_hold {
                Some(held.as_slice())
            } else {
                None
            };
            ws.step(
                &|tt: f64, yy: &[f64], out: &mut [f64]| model.rhs(tt, yy, u, out),
                t,
                cfg.h,
                &mut y,
            )
        };
        if let Err(err) = step_result {
            let kind = match err {
                Error::SingularConfiguration { .. } => EventKind::Collision,
                Error::NumericalBlowup { .. } => EventKind::Divergence,
                other => return Err(other),
            };
            rec.events.push(Event { t, kind });
            rec.events.push(Event {
                t,
                kind: EventKind::End,
            });
            return Ok(rec);
        }
    }
    unreachable!("loop returns at the final step")
}

/// Index of the dominant control block, when a single agent carries
/// essentially all of it.
fn active_block(u: &[f64], n: usize, d: usize) -> Option<usize> {
    let mut best = 0.0;
    let mut best_i = None;
    let mut total = 0.0;
    for i in 0..n {
        let mag = vecn::norm(&u[i * d..(i + 1) * d]);
        total += mag;
        if mag > best {
            best = mag;
            best_i = Some(i);
        }
    }
    if total < 1e-12 {
        None
    } else if best >= total * (1.0 - 1e-9) {
        best_i
    } else {
        None
    }
}

/// Conserved quantities checkable against a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConservedQuantity {
    /// Mean velocity of symmetric alignment dynamics.
    MeanVelocity,
    /// Total energy of frictionless uncontrolled attraction-repulsion runs.
    TotalEnergy,
    /// The two-agent alignment invariant `(v1 - v2) + arctan(x1 - x2)`.
    ArctanPair,
}

/// Maximal drift of the requested invariant over the record. Energy drift is
/// relative; the others are absolute.
pub fn conserved_drift(record: &TrajectoryRecord, kind: ConservedQuantity) -> Result<f64> {
    match kind {
        ConservedQuantity::MeanVelocity => {
            let first = record
                .states
                .first()
                .ok_or_else(|| Error::config("empty record"))?
                .mean_velocity();
            let mut worst = 0.0_f64;
            for s in &record.states {
                let m = s.mean_velocity();
                let dev: f64 = m
                    .iter()
                    .zip(&first)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(dev);
            }
            Ok(worst)
        }
        ConservedQuantity::TotalEnergy => {
            let series = record
                .energy
                .as_ref()
                .ok_or_else(|| Error::config("record carries no energy series"))?;
            let e0 = *series
                .first()
                .ok_or_else(|| Error::config("empty record"))?;
            if e0 == 0.0 {
                return Err(Error::config("zero initial energy"));
            }
            Ok(series
                .iter()
                .map(|e| (e - e0).abs() / e0.abs())
                .fold(0.0, f64::max))
        }
        ConservedQuantity::ArctanPair => {
            if record.n != 2 || record.d != 1 {
                return Err(Error::config(
                    "the arctan invariant is defined for two agents on a line",
                ));
            }
            let q = |s: &AgentState| {
                (s.v()[0] - s.v()[1]) + (s.x()[0] - s.x()[1]).atan()
            };
            let q0 = q(record
                .states
                .first()
                .ok_or_else(|| Error::config("empty record"))?);
            Ok(record
                .states
                .iter()
                .map(|s| (q(s) - q0).abs())
                .fold(0.0, f64::max))
        }
    }
}

/// Finite-difference check of the spread-decay inequality along a record:
/// returns the worst signed slack of
/// `-2 a(sqrt(2 N X)) V - dV/dt` (nonnegative means the bound holds).
pub fn decay_bound_slack(record: &TrajectoryRecord, kernel: &crate::kernel::KernelSpec) -> f64 {
    let mut worst = f64::INFINITY;
    for w in 1..record.times.len().saturating_sub(1) {
        let dt = record.times[w + 1] - record.times[w - 1];
        if dt <= 0.0 {
            continue;
        }
        let dv_dt = (record.v_spread[w + 1] - record.v_spread[w - 1]) / dt;
        let bound =
            -2.0 * kernel.eval_at_distance((2.0 * record.n as f64 * record.x_spread[w]).sqrt())
                * record.v_spread[w];
        worst = worst.min(bound - dv_dt);
    }
    worst
}

/// `B(u, v)` for a recorded control/state pair; the decay driver of the
/// controlled spread.
pub fn control_decay_driver(record: &TrajectoryRecord, idx: usize) -> Result<f64> {
    let s = &record.states[idx];
    spread_bilinear(&record.controls[idx], s.v(), record.n, record.d)
}

/// Fluctuation magnitudes of the final recorded state.
pub fn final_fluctuations(record: &TrajectoryRecord) -> Result<Vec<f64>> {
    let s = record.final_state();
    let vp = perp_part(s.v(), record.n, record.d)?;
    Ok((0..record.n)
        .map(|i| vecn::norm(&vp[i * record.d..(i + 1) * record.d]))
        .collect())
}
