//! Right-hand sides for every model family: generic weighted graphs,
//! bounded-confidence opinions, planar Vicsek, Cucker-Smale alignment (plain
//! and perturbed), and Cucker-Dong attraction-repulsion.
//!
//! Each evaluator is a pure map from (time, flat state, held control) to a
//! state derivative written into a caller-provided buffer. Self-interaction
//! terms contribute zero and are summed unconditionally; pairwise loops are
//! direct O(N^2) with a fixed summation order.

use std::fmt;
use std::sync::Arc;

use crate::control::{PerturbationSpec, TimeFn};
use crate::error::{Error, Result};
use crate::kernel::{FrictionSpec, KernelSpec, RepulsionSpec};
use crate::state::AgentState;
use crate::vecn;

pub type WeightFn = Arc<dyn Fn(f64, usize, usize) -> f64 + Send + Sync>;

/// Generic weighted-graph alignment: `dv_i = sum_j g_ij(t) (v_j - v_i)`.
pub fn graph_rhs(
    t: f64,
    v: &[f64],
    n: usize,
    d: usize,
    weights: &dyn Fn(f64, usize, usize) -> f64,
    out: &mut [f64],
) -> Result<()> {
    check_len(v, n * d)?;
    check_len(out, n * d)?;
    out.fill(0.0);
    for i in 0..n {
        for j in 0..n {
            let g = weights(t, i, j);
            for k in 0..d {
                out[i * d + k] += g * (v[j * d + k] - v[i * d + k]);
            }
        }
    }
    Ok(())
}

/// Bounded-confidence opinion dynamics: each agent averages the opinions
/// within radius `r` of its own (itself always included, so the neighbor
/// count is at least one).
pub fn hk_rhs(v: &[f64], n: usize, d: usize, r: f64, out: &mut [f64]) -> Result<()> {
    check_len(v, n * d)?;
    check_len(out, n * d)?;
    if r <= 0.0 {
        return Err(Error::config("confidence radius must be positive"));
    }
    out.fill(0.0);
    for i in 0..n {
        let mut neighbors = 0usize;
        for j in 0..n {
            if vecn::dist(v, d, i, j) <= r {
                neighbors += 1;
                for k in 0..d {
                    out[i * d + k] += v[j * d + k] - v[i * d + k];
                }
            }
        }
        for k in 0..d {
            out[i * d + k] /= neighbors as f64;
        }
    }
    Ok(())
}

/// Planar constant-speed alignment: positions advance with heading
/// `theta_i`, headings average over agents within radius `r` of the
/// *position*.
pub fn vicsek_rhs(
    x: &[f64],
    theta: &[f64],
    n: usize,
    r: f64,
    speed: f64,
    dx: &mut [f64],
    dtheta: &mut [f64],
) -> Result<()> {
    check_len(x, 2 * n)?;
    check_len(theta, n)?;
    check_len(dx, 2 * n)?;
    check_len(dtheta, n)?;
    if r <= 0.0 || speed <= 0.0 {
        return Err(Error::config("vicsek needs radius > 0 and speed > 0"));
    }
    for i in 0..n {
        dx[2 * i] = speed * theta[i].cos();
        dx[2 * i + 1] = speed * theta[i].sin();
        let mut acc = 0.0;
        let mut neighbors = 0usize;
        for j in 0..n {
            if vecn::dist(x, 2, i, j) <= r {
                neighbors += 1;
                acc += theta[j] - theta[i];
            }
        }
        dtheta[i] = acc / neighbors as f64;
    }
    Ok(())
}

/// Cucker-Smale alignment with an optional additive control:
/// `dx_i = v_i`, `dv_i = (1/N) sum_j a(||x_i - x_j||)(v_j - v_i) + u_i`.
pub fn cs_rhs(
    x: &[f64],
    v: &[f64],
    n: usize,
    d: usize,
    a: &KernelSpec,
    u: Option<&[f64]>,
    dx: &mut [f64],
    dv: &mut [f64],
) -> Result<()> {
    check_len(x, n * d)?;
    check_len(v, n * d)?;
    check_len(dx, n * d)?;
    check_len(dv, n * d)?;
    if let Some(u) = u {
        check_len(u, n * d)?;
    }
    dx.copy_from_slice(v);
    dv.fill(0.0);
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        for j in 0..n {
            let w = a.eval_at_distance(vecn::dist(x, d, i, j)) * inv_n;
            for k in 0..d {
                dv[i * d + k] += w * (v[j * d + k] - v[i * d + k]);
            }
        }
    }
    if let Some(u) = u {
        for (dvk, uk) in dv.iter_mut().zip(u) {
            *dvk += uk;
        }
    }
    Ok(())
}

/// Cucker-Smale alignment under a perturbed information feedback:
/// `dv_i = CS term + alpha(t)(vbar - v_i) + beta(t) Delta_i(t, state)`.
pub fn perturbed_cs_rhs(
    t: f64,
    x: &[f64],
    v: &[f64],
    n: usize,
    d: usize,
    a: &KernelSpec,
    alpha: &dyn Fn(f64) -> f64,
    beta: &dyn Fn(f64) -> f64,
    delta: &PerturbationSpec,
    dx: &mut [f64],
    dv: &mut [f64],
) -> Result<()> {
    cs_rhs(x, v, n, d, a, None, dx, dv)?;
    let (al, be) = (alpha(t), beta(t));
    if al < 0.0 || be < 0.0 {
        return Err(Error::config(format!(
            "feedback coefficients must be nonnegative at t = {t} (alpha = {al}, beta = {be})"
        )));
    }
    let state = AgentState::new(d, n, x.to_vec(), v.to_vec())?;
    let dev = delta.eval(t, &state)?;
    let mean = state.mean_velocity();
    for i in 0..n {
        for k in 0..d {
            dv[i * d + k] += al * (mean[k] - v[i * d + k]) + be * dev[i * d + k];
        }
    }
    Ok(())
}

/// Cucker-Dong attraction-repulsion with friction and an optional additive
/// control:
/// `dv_i = -b_i(t) v_i + sum_j a(||x_i-x_j||^2)(x_j-x_i)
///  + sum_{j != i} f(||x_i-x_j||^2)(x_i-x_j) + u_i`.
pub fn cd_rhs(
    t: f64,
    x: &[f64],
    v: &[f64],
    n: usize,
    d: usize,
    a: &KernelSpec,
    f: &RepulsionSpec,
    friction: &FrictionSpec,
    u: Option<&[f64]>,
    dx: &mut [f64],
    dv: &mut [f64],
) -> Result<()> {
    check_len(x, n * d)?;
    check_len(v, n * d)?;
    check_len(dx, n * d)?;
    check_len(dv, n * d)?;
    if let Some(u) = u {
        check_len(u, n * d)?;
    }
    dx.copy_from_slice(v);
    let singular = f.singular_at_zero();
    for i in 0..n {
        let b = friction.eval(t, i);
        for k in 0..d {
            dv[i * d + k] = -b * v[i * d + k];
        }
        for j in 0..n {
            if j == i {
                continue;
            }
            let r2 = vecn::dist2(x, d, i, j);
            if singular && r2 < crate::energy::SEPARATION_FLOOR * crate::energy::SEPARATION_FLOOR {
                return Err(Error::SingularConfiguration {
                    i: i.min(j),
                    j: i.max(j),
                    floor: crate::energy::SEPARATION_FLOOR,
                });
            }
            let attract = a.eval(r2);
            let repel = f.eval(r2);
            for k in 0..d {
                let diff = x[j * d + k] - x[i * d + k];
                dv[i * d + k] += attract * diff - repel * diff;
            }
        }
        if let Some(u) = u {
            for k in 0..d {
                dv[i * d + k] += u[i * d + k];
            }
        }
    }
    Ok(())
}

fn check_len(s: &[f64], expected: usize) -> Result<()> {
    if s.len() != expected {
        Err(Error::DimensionMismatch {
            expected,
            got: s.len(),
        })
    } else {
        Ok(())
    }
}

/// A complete model: family, population shape, and parameters. Provides the
/// flat ODE layout consumed by the integrator.
#[derive(Clone)]
pub enum ModelSpec {
    Graph {
        n: usize,
        d: usize,
        weights: WeightFn,
    },
    HegselmannKrause {
        n: usize,
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
        kernel: KernelSpec,
    },
    PerturbedCuckerSmale {
        n: usize,
        d: usize,
        kernel: KernelSpec,
        alpha: TimeFn,
        beta: TimeFn,
        delta: PerturbationSpec,
    },
    CuckerDong {
        n: usize,
        d: usize,
        kernel: KernelSpec,
        repulsion: RepulsionSpec,
        friction: FrictionSpec,
    },
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Graph { n, d, .. } => write!(f, "Graph(n={n}, d={d})"),
            ModelSpec::HegselmannKrause { n, d, radius } => {
                write!(f, "HegselmannKrause(n={n}, d={d}, radius={radius})")
            }
            ModelSpec::Vicsek { n, radius, speed } => {
                write!(f, "Vicsek(n={n}, radius={radius}, speed={speed})")
            }
            ModelSpec::CuckerSmale { n, d, kernel } => {
                write!(f, "CuckerSmale(n={n}, d={d}, kernel={kernel:?})")
            }
            ModelSpec::PerturbedCuckerSmale {
                n, d, kernel, delta, ..
            } => write!(
                f,
                "PerturbedCuckerSmale(n={n}, d={d}, kernel={kernel:?}, delta={delta:?})"
            ),
            ModelSpec::CuckerDong {
                n,
                d,
                kernel,
                repulsion,
                ..
            } => write!(
                f,
                "CuckerDong(n={n}, d={d}, kernel={kernel:?}, repulsion={repulsion:?})"
            ),
        }
    }
}

impl ModelSpec {
    pub fn agent_count(&self) -> usize {
        match self {
            ModelSpec::Graph { n, .. }
            | ModelSpec::HegselmannKrause { n, .. }
            | ModelSpec::Vicsek { n, .. }
            | ModelSpec::CuckerSmale { n, .. }
            | ModelSpec::PerturbedCuckerSmale { n, .. }
            | ModelSpec::CuckerDong { n, .. } => *n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Graph { d, .. }
            | ModelSpec::HegselmannKrause { d, .. }
            | ModelSpec::CuckerSmale { d, .. }
            | ModelSpec::PerturbedCuckerSmale { d, .. }
            | ModelSpec::CuckerDong { d, .. } => *d,
            ModelSpec::Vicsek { .. } => 2,
        }
    }

    /// Whether the state carries positions evolved by velocities.
    pub fn is_second_order(&self) -> bool {
        matches!(
            self,
            ModelSpec::Vicsek { .. }
                | ModelSpec::CuckerSmale { .. }
                | ModelSpec::PerturbedCuckerSmale { .. }
                | ModelSpec::CuckerDong { .. }
        )
    }

    /// Length of the flat ODE vector.
    pub fn ode_len(&self) -> usize {
        let (n, d) = (self.agent_count(), self.dim());
        match self {
            ModelSpec::Graph { .. } | ModelSpec::HegselmannKrause { .. } => n * d,
            ModelSpec::Vicsek { .. } => 3 * n, // positions + headings
            _ => 2 * n * d,
        }
    }

    pub fn validate_state(&self, state: &AgentState) -> Result<()> {
        let (n, d) = (self.agent_count(), self.dim());
        if state.count() != n || state.dim() != d {
            return Err(Error::config(format!(
                "state shape ({}, {}) does not match model shape ({n}, {d})",
                state.count(),
                state.dim()
            )));
        }
        if let ModelSpec::CuckerDong { repulsion, .. } = self {
            if repulsion.singular_at_zero() {
                state.check_separation(crate::energy::SEPARATION_FLOOR)?;
            }
        }
        Ok(())
    }

    /// Pack an agent state into the flat ODE vector. Vicsek headings are
    /// recovered from the velocity directions.
    pub fn state_to_ode(&self, state: &AgentState) -> Result<Vec<f64>> {
        self.validate_state(state)?;
        let (n, d) = (self.agent_count(), self.dim());
        Ok(match self {
            ModelSpec::Graph { .. } | ModelSpec::HegselmannKrause { .. } => state.v().to_vec(),
            ModelSpec::Vicsek { .. } => {
                let mut y = Vec::with_capacity(3 * n);
                y.extend_from_slice(state.x());
                for i in 0..n {
                    let vi = state.vel(i);
                    y.push(vi[1].atan2(vi[0]));
                }
                y
            }
            _ => {
                let mut y = Vec::with_capacity(2 * n * d);
                y.extend_from_slice(state.x());
                y.extend_from_slice(state.v());
                y
            }
        })
    }

    /// Unpack a flat ODE vector into an agent state. First-order models keep
    /// the template's positions; Vicsek reconstructs velocities from
    /// headings.
    pub fn ode_to_state(&self, y: &[f64], template: &AgentState) -> Result<AgentState> {
        let (n, d) = (self.agent_count(), self.dim());
        check_len(y, self.ode_len())?;
        match self {
            ModelSpec::Graph { .. } | ModelSpec::HegselmannKrause { .. } => {
                AgentState::new(d, n, template.x().to_vec(), y.to_vec())
            }
            ModelSpec::Vicsek { speed, .. } => {
                let x = y[..2 * n].to_vec();
                let mut v = Vec::with_capacity(2 * n);
                for i in 0..n {
                    let th = y[2 * n + i];
                    v.push(speed * th.cos());
                    v.push(speed * th.sin());
                }
                AgentState::new(2, n, x, v)
            }
            _ => AgentState::new(d, n, y[..n * d].to_vec(), y[n * d..].to_vec()),
        }
    }

    /// The spread pair `(X, V)` straight from a flat ODE vector, without
    /// allocating. First-order models report the template's constant
    /// position spread.
    pub fn spread_pair_from_ode(&self, y: &[f64], template: &AgentState) -> (f64, f64) {
        let (n, d) = (self.agent_count(), self.dim());
        match self {
            ModelSpec::Graph { .. } | ModelSpec::HegselmannKrause { .. } => (
                vecn::block_spread(template.x(), d, n),
                vecn::block_spread(y, d, n),
            ),
            ModelSpec::Vicsek { speed, .. } => {
                let x = vecn::block_spread(&y[..2 * n], 2, n);
                let (mut cbar, mut sbar) = (0.0, 0.0);
                for th in &y[2 * n..] {
                    cbar += th.cos();
                    sbar += th.sin();
                }
                cbar /= n as f64;
                sbar /= n as f64;
                let v = speed * speed * (1.0 - (cbar * cbar + sbar * sbar)).max(0.0);
                (x, v)
            }
            _ => (
                vecn::block_spread(&y[..n * d], d, n),
                vecn::block_spread(&y[n * d..], d, n),
            ),
        }
    }

    /// Positions inside a flat ODE vector, when the model moves them.
    pub fn position_view<'a>(&self, y: &'a [f64]) -> Option<&'a [f64]> {
        let (n, d) = (self.agent_count(), self.dim());
        match self {
            ModelSpec::Graph { .. } | ModelSpec::HegselmannKrause { .. } => None,
            ModelSpec::Vicsek { .. } => Some(&y[..2 * n]),
            _ => Some(&y[..n * d]),
        }
    }

    /// Evaluate the derivative of the flat ODE vector, with an optional held
    /// additive control acting on the velocity block.
    pub fn rhs(&self, t: f64, y: &[f64], u: Option<&[f64]>, out: &mut [f64]) -> Result<()> {
        let (n, d) = (self.agent_count(), self.dim());
        check_len(y, self.ode_len())?;
        check_len(out, self.ode_len())?;
        match self {
            ModelSpec::Graph { weights, .. } => {
                if u.is_some() {
                    return Err(Error::config("graph dynamics take no control"));
                }
                graph_rhs(t, y, n, d, weights.as_ref(), out)
            }
            ModelSpec::HegselmannKrause { radius, .. } => {
                if u.is_some() {
                    return Err(Error::config("bounded-confidence dynamics take no control"));
                }
                hk_rhs(y, n, d, *radius, out)
            }
            ModelSpec::Vicsek { radius, speed, .. } => {
                if u.is_some() {
                    return Err(Error::config("vicsek dynamics take no control"));
                }
                let (x, theta) = y.split_at(2 * n);
                let (dx, dtheta) = out.split_at_mut(2 * n);
                vicsek_rhs(x, theta, n, *radius, *speed, dx, dtheta)
            }
            ModelSpec::CuckerSmale { kernel, .. } => {
                let (x, v) = y.split_at(n * d);
                let (dx, dv) = out.split_at_mut(n * d);
                cs_rhs(x, v, n, d, kernel, u, dx, dv)
            }
            ModelSpec::PerturbedCuckerSmale {
                kernel,
                alpha,
                beta,
                delta,
                ..
            } => {
                let (x, v) = y.split_at(n * d);
                let (dx, dv) = out.split_at_mut(n * d);
                // an extra additive control is still allowed on top of the
                // perturbation feedback
                perturbed_cs_rhs(
                    t,
                    x,
                    v,
                    n,
                    d,
                    kernel,
                    alpha.as_ref(),
                    beta.as_ref(),
                    delta,
                    dx,
                    dv,
                )?;
                if let Some(u) = u {
                    for (dvk, uk) in dv.iter_mut().zip(u) {
                        *dvk += uk;
                    }
                }
                Ok(())
            }
            ModelSpec::CuckerDong {
                kernel,
                repulsion,
                friction,
                ..
            } => {
                let (x, v) = y.split_at(n * d);
                let (dx, dv) = out.split_at_mut(n * d);
                cd_rhs(t, x, v, n, d, kernel, repulsion, friction, u, dx, dv)
            }
        }
    }
}
