//! Feedback laws: total control, decentralized perturbations (leader,
//! structured, local-average), and the sparse single-agent laws with their
//! variational characterizations.

use std::fmt;
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::energy::total_energy;
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, RepulsionSpec};
use crate::state::{perp_part, spread_bilinear, AgentState};
use crate::threshold::{consensus_threshold, Threshold};
use crate::vecn;

/// Below this norm a feedback direction is treated as zero instead of being
/// normalized.
pub const DIRECTION_FLOOR: f64 = 1e-14;

/// Relative tolerance for detecting exact ties between feedback magnitudes.
pub const TIE_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TIE_TOL * a.abs().max(b.abs())
}

/// Which of the four variational cells a state occupies, together with the
/// maximizing indices (ascending) for the non-interior cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionLabel {
    /// Strictly below threshold: only the zero control is admissible.
    P1,
    /// Exactly at threshold; support restricted to the maximizers.
    P2 { argmax: Vec<usize> },
    /// Above threshold with a unique maximizer: full budget on that agent.
    P3 { argmax: usize },
    /// Above threshold with tied maximizers sharing the budget.
    P4 { argmax: Vec<usize> },
}

/// Indices attaining the maximum of `values` up to the tie tolerance,
/// ascending.
fn argmax_set(values: &[f64]) -> (f64, Vec<usize>) {
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if v > max {
            max = v;
        }
    }
    let set = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| close(v, max))
        .map(|(i, _)| i)
        .collect();
    (max, set)
}

fn classify(values: &[f64], threshold: Threshold) -> PartitionLabel {
    let (max, argmax) = argmax_set(values);
    let at_threshold = match threshold {
        Threshold::Finite(th) => close(max, th),
        Threshold::Infinite => false,
    };
    if at_threshold {
        return PartitionLabel::P2 { argmax };
    }
    if threshold.at_least(max) {
        return PartitionLabel::P1;
    }
    if argmax.len() == 1 {
        PartitionLabel::P3 { argmax: argmax[0] }
    } else {
        PartitionLabel::P4 { argmax }
    }
}

/// Partition of alignment states by the fluctuation magnitudes against the
/// *squared* consensus threshold.
pub fn classify_partition_cs(state: &AgentState, a: &KernelSpec) -> Result<PartitionLabel> {
    let (n, d) = (state.count(), state.dim());
    let x_spread = crate::state::position_spread(state);
    let threshold = consensus_threshold(x_spread, a, n)?.squared();
    let vp = perp_part(state.v(), n, d)?;
    let mags: Vec<f64> = (0..n).map(|i| vecn::norm(&vp[i * d..(i + 1) * d])).collect();
    Ok(classify(&mags, threshold))
}

/// Partition of attraction-repulsion states by raw speeds against the level
/// `eta`.
pub fn classify_partition_cd(state: &AgentState, eta: f64) -> Result<PartitionLabel> {
    if eta < 0.0 {
        return Err(Error::domain("speed level must be nonnegative"));
    }
    let speeds: Vec<f64> = (0..state.count()).map(|i| state.speed(i)).collect();
    Ok(classify(&speeds, Threshold::Finite(eta)))
}

/// The all-agents feedback `u = -alpha v_perp`, admissible for
/// `alpha <= M / (N sqrt(V0))`.
pub fn total_control(state: &AgentState, alpha: f64, m_budget: f64, v0: f64) -> Result<Vec<f64>> {
    if alpha <= 0.0 {
        return Err(Error::config("total control needs alpha > 0"));
    }
    if v0 > 0.0 && alpha > m_budget / (state.count() as f64 * v0.sqrt()) {
        return Err(Error::config(format!(
            "alpha = {alpha} exceeds the admissibility bound M/(N sqrt(V0)) = {}",
            m_budget / (state.count() as f64 * v0.sqrt())
        )));
    }
    let vp = perp_part(state.v(), state.count(), state.dim())?;
    Ok(vp.iter().map(|&c| -alpha * c).collect())
}

/// The sparse alignment law: zero below the squared threshold, otherwise the
/// whole budget braking the fluctuation of the smallest-index maximizer.
pub fn sparse_control_cs(state: &AgentState, m_budget: f64, a: &KernelSpec) -> Result<Vec<f64>> {
    let (n, d) = (state.count(), state.dim());
    let x_spread = crate::state::position_spread(state);
    let threshold = consensus_threshold(x_spread, a, n)?.squared();
    let vp = perp_part(state.v(), n, d)?;
    let mags: Vec<f64> = (0..n).map(|i| vecn::norm(&vp[i * d..(i + 1) * d])).collect();
    let (max, argmax) = argmax_set(&mags);

    let mut u = vec![0.0; n * d];
    if threshold.at_least(max) {
        return Ok(u); // inside: the dynamics self-organizes, switch off
    }
    let j = argmax[0];
    let mag = mags[j];
    if mag < DIRECTION_FLOOR {
        return Ok(u);
    }
    for k in 0..d {
        u[j * d + k] = -m_budget * vp[j * d + k] / mag;
    }
    Ok(u)
}

/// Membership oracle for the variational solution set of the sparse
/// alignment problem: `u` must brake fluctuation directions with a
/// coefficient pattern matching the state's partition cell.
pub fn in_variational_set_cs(
    u: &[f64],
    state: &AgentState,
    m_budget: f64,
    a: &KernelSpec,
) -> Result<bool> {
    let (n, d) = (state.count(), state.dim());
    if u.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: u.len(),
        });
    }
    let vp = perp_part(state.v(), n, d)?;
    // extract coefficients: u_i = -eps_i * vp_i / ||vp_i||
    let mut eps = vec![0.0; n];
    let tol = TIE_TOL * (1.0 + m_budget);
    for i in 0..n {
        let ui = &u[i * d..(i + 1) * d];
        let mag_u = vecn::norm(ui);
        let vpi = &vp[i * d..(i + 1) * d];
        let mag_vp = vecn::norm(vpi);
        if mag_u <= tol {
            continue;
        }
        if mag_vp < DIRECTION_FLOOR {
            return Ok(false); // force on an agent with no fluctuation
        }
        // direction must be exactly opposite to vp_i
        let cos = vecn::dot(ui, vpi) / (mag_u * mag_vp);
        if (cos + 1.0).abs() > 1e-9 {
            return Ok(false);
        }
        eps[i] = mag_u;
    }
    let total: f64 = eps.iter().sum();
    if total > m_budget * (1.0 + TIE_TOL) {
        return Ok(false);
    }
    let support: Vec<usize> = (0..n).filter(|&i| eps[i] > tol).collect();
    Ok(match classify_partition_cs(state, a)? {
        PartitionLabel::P1 => support.is_empty(),
        PartitionLabel::P2 { argmax } => support.iter().all(|i| argmax.contains(i)),
        PartitionLabel::P3 { argmax } => {
            support == vec![argmax] && close(eps[argmax], m_budget)
        }
        PartitionLabel::P4 { argmax } => {
            support.iter().all(|i| argmax.contains(i)) && close(total, m_budget)
        }
    })
}

/// Draw a random admissible braking pattern `u_i = -eps_i vp_i/||vp_i||`
/// with total coefficient mass `m_budget` spread over a random subset of the
/// agents with nonzero fluctuation.
fn random_braking_pattern(
    vp: &[f64],
    n: usize,
    d: usize,
    m_budget: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let eligible: Vec<usize> = (0..n)
        .filter(|&i| vecn::norm(&vp[i * d..(i + 1) * d]) >= DIRECTION_FLOOR)
        .collect();
    let mut u = vec![0.0; n * d];
    if eligible.is_empty() {
        return u;
    }
    let k = rng.random_range(1..=eligible.len());
    let mut chosen = eligible.clone();
    // partial Fisher-Yates for a k-subset
    for i in 0..k {
        let j = rng.random_range(i..chosen.len());
        chosen.swap(i, j);
    }
    chosen.truncate(k);
    // exponential spacings normalize to a uniform simplex point
    let mut weights: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= m_budget / sum;
    }
    for (slot, &i) in chosen.iter().enumerate() {
        let vpi = &vp[i * d..(i + 1) * d];
        let mag = vecn::norm(vpi);
        for kk in 0..d {
            u[i * d + kk] = -weights[slot] * vpi[kk] / mag;
        }
    }
    u
}

/// Optimality check for the sparse alignment law: against `samples` random
/// admissible braking patterns, the sparse selection must achieve the
/// smallest spread derivative `B(u, v)` up to 1e-12.
pub fn check_sparse_optimality_cs(
    state: &AgentState,
    m_budget: f64,
    a: &KernelSpec,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    let (n, d) = (state.count(), state.dim());
    match classify_partition_cs(state, a)? {
        PartitionLabel::P1 => return Ok(true), // only u = 0 is admissible
        PartitionLabel::P3 { .. } => {}
        other => {
            return Err(Error::config(format!(
                "optimality check expects an interior or unique-maximizer state, got {other:?}"
            )))
        }
    }
    let u_sparse = sparse_control_cs(state, m_budget, a)?;
    let b_sparse = spread_bilinear(&u_sparse, state.v(), n, d)?;
    let vp = perp_part(state.v(), n, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let u = random_braking_pattern(&vp, n, d, m_budget, &mut rng);
        let b = spread_bilinear(&u, state.v(), n, d)?;
        if b_sparse > b + 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Deviation from a leader-following estimate: every agent mixes its own
/// fluctuation with the first agent's, with conjugate weights 1/p + 1/q = 1.
///
/// `q` is the inverse leader strength and may lie anywhere in (0, inf); for
/// q < 1 the self-weight 1/p = 1 - 1/q is negative, which only accelerates
/// the closed-loop decay rate 2 gamma / q.
pub fn leader_deviation(state: &AgentState, p: f64, q: f64) -> Result<Vec<f64>> {
    if q <= 0.0 || (1.0 / p + 1.0 / q - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "leader deviation needs conjugate weights 1/p + 1/q = 1 with q > 0 (got p={p}, q={q})"
        )));
    }
    let (n, d) = (state.count(), state.dim());
    let vp = perp_part(state.v(), n, d)?;
    let mut delta = vec![0.0; n * d];
    let self_weight = if p.is_infinite() { 0.0 } else { 1.0 / p };
    for i in 0..n {
        for k in 0..d {
            delta[i * d + k] = self_weight * vp[i * d + k] + vp[k] / q;
        }
    }
    Ok(delta)
}

/// Conjugate exponent of `q`: the `p` with 1/p + 1/q = 1.
pub fn conjugate_exponent(q: f64) -> f64 {
    if (q - 1.0).abs() < 1e-15 {
        f64::INFINITY
    } else {
        q / (q - 1.0)
    }
}

/// Normalization mode for structured deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaMode {
    /// Per-agent row sums (each agent normalizes by its own weights).
    PerAgent,
    /// A single shared bound, the maximal row sum.
    MaxNormalized,
}

/// Deviation built from a positive weighting of the other agents'
/// fluctuations, `Delta_i = sum_j phi(||x_i - x_j||)/eta * vp_j`.
pub fn structured_deviation(
    state: &AgentState,
    phi: &KernelSpec,
    mode: EtaMode,
) -> Result<Vec<f64>> {
    let (n, d) = (state.count(), state.dim());
    let vp = perp_part(state.v(), n, d)?;
    let mut row_sums = vec![0.0; n];
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let w = phi.eval_at_distance(state.distance(i, j));
            if w <= 0.0 {
                return Err(Error::config(format!(
                    "structured deviation needs phi > 0 (phi = {w} at pair ({i}, {j}))"
                )));
            }
            weights[i * n + j] = w;
            row_sums[i] += w;
        }
    }
    let shared = row_sums.iter().cloned().fold(0.0_f64, f64::max);
    let mut delta = vec![0.0; n * d];
    for i in 0..n {
        let eta = match mode {
            EtaMode::PerAgent => row_sums[i],
            EtaMode::MaxNormalized => shared,
        };
        for j in 0..n {
            let w = weights[i * n + j] / eta;
            for k in 0..d {
                delta[i * d + k] += w * vp[j * d + k];
            }
        }
    }
    Ok(delta)
}

/// Deviation of a radius-limited local mean from the true mean:
/// `Delta_i = (1/eta_R) sum_j (1 - chi_[0,R](||x_i - x_j||)) (v_i - v_j)`
/// with `eta_R` the maximal in-ball count. Radius 0 reproduces the
/// uncontrolled alignment cancellation; infinite radius gives zero
/// deviation.
pub fn local_average_deviation(state: &AgentState, radius: f64) -> Result<(Vec<f64>, f64)> {
    if radius < 0.0 {
        return Err(Error::config("local-average radius must be nonnegative"));
    }
    let (n, d) = (state.count(), state.dim());
    let mut delta = vec![0.0; n * d];
    if radius.is_infinite() {
        return Ok((delta, n as f64));
    }
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if state.distance(i, j) <= radius {
                counts[i] += 1;
            }
        }
    }
    let eta = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    for i in 0..n {
        for j in 0..n {
            if state.distance(i, j) > radius {
                for k in 0..d {
                    delta[i * d + k] += (state.v()[i * d + k] - state.v()[j * d + k]) / eta;
                }
            }
        }
    }
    Ok((delta, eta))
}

/// Combined additive feedback of the local-average closed loop:
/// `gamma N/eta_R (vbar - v_i) + gamma Delta_i`.
pub fn local_average_feedback(state: &AgentState, gamma: f64, radius: f64) -> Result<Vec<f64>> {
    let (n, d) = (state.count(), state.dim());
    let (delta, eta) = local_average_deviation(state, radius)?;
    let mean = state.mean_velocity();
    let mut fb = vec![0.0; n * d];
    for i in 0..n {
        for k in 0..d {
            fb[i * d + k] = gamma * (n as f64 / eta) * (mean[k] - state.v()[i * d + k])
                + gamma * delta[i * d + k];
        }
    }
    Ok(fb)
}

/// The sparse attraction-repulsion law: brake the fastest agent (smallest
/// index on ties) with magnitude `eps * E(state)`.
pub fn sparse_control_cd(
    state: &AgentState,
    m_budget: f64,
    energy0: f64,
    eps: f64,
    a: &KernelSpec,
    f: &RepulsionSpec,
) -> Result<Vec<f64>> {
    if !(0.0..=m_budget / energy0).contains(&eps) {
        return Err(Error::config(format!(
            "eps = {eps} outside the admissible range [0, M/E(0)] = [0, {}]",
            m_budget / energy0
        )));
    }
    let (n, d) = (state.count(), state.dim());
    let speeds: Vec<f64> = (0..n).map(|i| state.speed(i)).collect();
    let (max, argmax) = argmax_set(&speeds);
    let mut u = vec![0.0; n * d];
    if max < DIRECTION_FLOOR {
        return Ok(u); // steady state: no control needed
    }
    let energy = total_energy(state, a, f)?;
    let j = argmax[0];
    let vj = state.vel(j);
    for k in 0..d {
        u[j * d + k] = -eps * energy * vj[k] / speeds[j];
    }
    Ok(u)
}

/// Result of minimizing the instantaneous energy-decay functional
/// `J(u) = v.u + eta sum_i ||u_i||` over the scaled admissible set.
#[derive(Debug, Clone)]
pub struct DecayMinimizer {
    pub u: Vec<f64>,
    pub j_value: f64,
    /// Best value found by random search inside the constraint set.
    pub sampled_min: f64,
    /// Whether no sample beat the analytic minimizer by more than 1e-9.
    pub verified: bool,
}

/// Analytic minimizer of `J(u, v) = v.u + eta sum ||u_i||` over
/// `sum ||u_i|| <= M E(state)/E0`, cross-checked by seeded random search.
pub fn minimize_decay_functional_cd(
    state: &AgentState,
    a: &KernelSpec,
    f: &RepulsionSpec,
    m_budget: f64,
    energy0: f64,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<DecayMinimizer> {
    let (n, d) = (state.count(), state.dim());
    let energy = total_energy(state, a, f)?;
    let mass = m_budget * energy / energy0;
    let speeds: Vec<f64> = (0..n).map(|i| state.speed(i)).collect();
    let (max, argmax) = argmax_set(&speeds);

    // J(u) >= sum_i ||u_i|| (eta - max_speed); positive part forces u = 0,
    // negative part is minimized by full mass on the fastest agent.
    let mut u = vec![0.0; n * d];
    if max > eta && max >= DIRECTION_FLOOR {
        let j = argmax[0];
        let vj = state.vel(j);
        for k in 0..d {
            u[j * d + k] = -mass * vj[k] / speeds[j];
        }
    }
    let j_value = decay_functional(&u, state.v(), eta, n, d);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled_min = f64::INFINITY;
    for _ in 0..samples {
        let cand = random_ball_point(n, d, mass, &mut rng);
        sampled_min = sampled_min.min(decay_functional(&cand, state.v(), eta, n, d));
    }
    let verified = j_value <= sampled_min + 1e-9;
    Ok(DecayMinimizer {
        u,
        j_value,
        sampled_min,
        verified,
    })
}

/// `J(u, v) = v.u + eta sum_i ||u_i||`.
pub fn decay_functional(u: &[f64], v: &[f64], eta: f64, n: usize, d: usize) -> f64 {
    vecn::dot(u, v) + eta * vecn::block_norm_sum(u, d, n)
}

/// Uniform-ish point of the mixed-norm ball `sum ||u_i|| <= mass`: random
/// directions, simplex-distributed magnitudes, random radial shrink.
fn random_ball_point(n: usize, d: usize, mass: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let weights: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let sum: f64 = weights.iter().sum();
    let shrink: f64 = rng.random::<f64>();
    let mut u = vec![0.0; n * d];
    for i in 0..n {
        let mut dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = vecn::norm(&dir);
        if norm < 1e-12 {
            dir = vec![1.0; d];
        }
        let norm = vecn::norm(&dir);
        let mag = mass * shrink * weights[i] / sum;
        for k in 0..d {
            u[i * d + k] = mag * dir[k] / norm;
        }
    }
    u
}

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which feedback law a simulation runs, with its parameters.
///
/// The first four are centralized laws recomputed on the sample-and-hold
/// grid; the last three are decentralized perturbation loops evaluated at
/// every integrator stage.
#[derive(Debug, Clone)]
pub enum ControlLaw {
    None,
    /// `u = -alpha v_perp`, admissible for `alpha <= M/(N sqrt(V0))`.
    Total { alpha: f64, m_budget: f64 },
    /// Full budget braking the farthest-from-mean agent.
    SparseCs { m_budget: f64 },
    /// Budget-scaled braking of the fastest agent. `eps` defaults to
    /// `M / E(0)` at run start.
    SparseCd { m_budget: f64, eps: Option<f64> },
    /// Each agent follows a mix of itself and a common leader.
    Leader { gamma: f64, q: f64 },
    /// Positive pairwise reweighting of the mean estimate.
    Structured {
        gamma: f64,
        phi: KernelSpec,
        mode: EtaMode,
    },
    /// Radius-limited local mean feedback.
    LocalAverage { gamma: f64, radius: f64 },
}

impl ControlLaw {
    /// The admissibility budget, where the law has one.
    pub fn budget(&self) -> Option<f64> {
        match self {
            ControlLaw::Total { m_budget, .. }
            | ControlLaw::SparseCs { m_budget }
            | ControlLaw::SparseCd { m_budget, .. } => Some(*m_budget),
            _ => None,
        }
    }

    /// Whether the law is a decentralized perturbation evaluated inside the
    /// dynamics rather than a held external control.
    pub fn is_decentralized(&self) -> bool {
        matches!(
            self,
            ControlLaw::Leader { .. }
                | ControlLaw::Structured { .. }
                | ControlLaw::LocalAverage { .. }
        )
    }
}

/// A law plus its recomputation period (`None`: every step).
#[derive(Debug, Clone)]
pub struct ControlSpec {
    pub law: ControlLaw,
    pub sample_hold_dt: Option<f64>,
}

impl ControlSpec {
    pub fn none() -> Self {
        Self {
            law: ControlLaw::None,
            sample_hold_dt: None,
        }
    }

    pub fn new(law: ControlLaw) -> Self {
        Self {
            law,
            sample_hold_dt: None,
        }
    }
}

/// Additive velocity feedback of the decentralized laws, evaluated at a
/// stage state.
pub fn decentralized_feedback(law: &ControlLaw, state: &AgentState) -> Result<Vec<f64>> {
    let (n, d) = (state.count(), state.dim());
    match law {
        ControlLaw::Leader { gamma, q } => {
            let delta = leader_deviation(state, conjugate_exponent(*q), *q)?;
            let mean = state.mean_velocity();
            let mut fb = vec![0.0; n * d];
            for i in 0..n {
                for k in 0..d {
                    fb[i * d + k] =
                        gamma * (mean[k] - state.v()[i * d + k]) + gamma * delta[i * d + k];
                }
            }
            Ok(fb)
        }
        ControlLaw::Structured { gamma, phi, mode } => {
            let delta = structured_deviation(state, phi, *mode)?;
            let mean = state.mean_velocity();
            let mut fb = vec![0.0; n * d];
            for i in 0..n {
                for k in 0..d {
                    fb[i * d + k] =
                        gamma * (mean[k] - state.v()[i * d + k]) + gamma * delta[i * d + k];
                }
            }
            Ok(fb)
        }
        ControlLaw::LocalAverage { gamma, radius } => {
            local_average_feedback(state, *gamma, *radius)
        }
        _ => Err(Error::config("not a decentralized law")),
    }
}

/// Deviation models pluggable into the perturbed alignment dynamics.
#[derive(Clone)]
pub enum PerturbationSpec {
    /// No deviation at all.
    None,
    /// Every agent mixes its own fluctuation with a common leader's.
    Leader { p: f64, q: f64 },
    /// Positive pairwise weighting of all fluctuations.
    Structured { phi: KernelSpec, mode: EtaMode },
    /// Deviation of a radius-limited local mean from the true mean.
    LocalAverage { radius: f64 },
    /// The exact fluctuation (recovers uncontrolled alignment when
    /// alpha = beta).
    OwnFluctuation,
    /// A common time-dependent offset shared by every agent.
    Common(TimeFn),
}

impl fmt::Debug for PerturbationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbationSpec::None => write!(f, "None"),
            PerturbationSpec::Leader { p, q } => write!(f, "Leader(p={p}, q={q})"),
            PerturbationSpec::Structured { phi, mode } => {
                write!(f, "Structured({phi:?}, {mode:?})")
            }
            PerturbationSpec::LocalAverage { radius } => write!(f, "LocalAverage(R={radius})"),
            PerturbationSpec::OwnFluctuation => write!(f, "OwnFluctuation"),
            PerturbationSpec::Common(_) => write!(f, "Common(fn)"),
        }
    }
}

impl PerturbationSpec {
    /// Evaluate the deviation vector for the given state.
    pub fn eval(&self, t: f64, state: &AgentState) -> Result<Vec<f64>> {
        let (n, d) = (state.count(), state.dim());
        match self {
            PerturbationSpec::None => Ok(vec![0.0; n * d]),
            PerturbationSpec::Leader { p, q } => leader_deviation(state, *p, *q),
            PerturbationSpec::Structured { phi, mode } => structured_deviation(state, phi, *mode),
            PerturbationSpec::LocalAverage { radius } => {
                local_average_deviation(state, *radius).map(|(delta, _)| delta)
            }
            PerturbationSpec::OwnFluctuation => perp_part(state.v(), n, d),
            PerturbationSpec::Common(f) => {
                let c = f(t);
                Ok(vec![c; n * d])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::velocity_spread;

    fn tiny_kernel() -> KernelSpec {
        // integrable with a minuscule tail: thresholds are effectively zero
        KernelSpec::cucker_smale(1e-8, 1.0, 2.0).unwrap()
    }

    #[test]
    fn total_control_examples() {
        let s = AgentState::new(1, 2, vec![0.0, 1.0], vec![1.0, -1.0]).unwrap();
        let v0 = velocity_spread(&s);
        let u = total_control(&s, 1.0, 10.0, v0).unwrap();
        assert_eq!(u, vec![-1.0, 1.0]);

        // consensus state: zero fluctuation, zero control
        let c = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![2.0; 3]).unwrap();
        let u = total_control(&c, 0.5, 10.0, velocity_spread(&c)).unwrap();
        assert!(u.iter().all(|&c| c == 0.0));

        // admissibility bound enforced at configuration time
        assert!(total_control(&s, 10.0, 1.0, v0).is_err());

        // equality case of the norm chain for sign-uniform 1-d fluctuations
        let alpha = 1.0;
        let m = alpha * 2.0 * v0.sqrt();
        let u = total_control(&s, alpha, m + 1e-12, v0).unwrap();
        let total: f64 = u.iter().map(|c| c.abs()).sum();
        assert!((total - m).abs() < 1e-12);
    }

    #[test]
    fn partition_classification_cs() {
        let a = tiny_kernel();
        // zero fluctuation, positive threshold: interior cell
        let s = AgentState::new(1, 2, vec![0.0, 1.0], vec![3.0, 3.0]).unwrap();
        assert_eq!(classify_partition_cs(&s, &a).unwrap(), PartitionLabel::P1);

        // unique strict maximizer above threshold
        let s = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![3.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            classify_partition_cs(&s, &a).unwrap(),
            PartitionLabel::P3 { argmax: 0 }
        );

        // constructed exact tie above threshold
        let s = AgentState::new(1, 4, vec![0.0, 1.0, 2.0, 3.0], vec![2.0, -2.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            classify_partition_cs(&s, &a).unwrap(),
            PartitionLabel::P4 {
                argmax: vec![0, 1]
            }
        );

        // non-integrable kernel: infinite threshold, always interior
        let heavy = KernelSpec::cucker_smale(1.0, 1.0, 0.3).unwrap();
        assert_eq!(
            classify_partition_cs(&s, &heavy).unwrap(),
            PartitionLabel::P1
        );
    }

    #[test]
    fn partition_boundary_cell() {
        // indicator kernel with radius R: threshold = max(0, R/sqrt(2N) - sqrt(X))
        // pick a state with X = 0 and tune fluctuation to hit gamma^2 exactly
        let n = 2;
        let r = 4.0;
        let a = KernelSpec::indicator(r, crate::kernel::ArgConvention::Distance).unwrap();
        let gamma = r / (2.0 * n as f64).sqrt(); // = 2
        let g2 = gamma * gamma; // = 4
        let s = AgentState::new(1, 2, vec![0.0, 0.0], vec![g2, -g2]).unwrap();
        match classify_partition_cs(&s, &a).unwrap() {
            PartitionLabel::P2 { argmax } => assert_eq!(argmax, vec![0, 1]),
            other => panic!("expected boundary cell, got {other:?}"),
        }
    }

    #[test]
    fn sparse_control_cs_examples() {
        let a = tiny_kernel();
        // v = (3, 0, 0): fluctuation (2, -1, -1), argmax 0
        let s = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![3.0, 0.0, 0.0]).unwrap();
        let u = sparse_control_cs(&s, 1.0, &a).unwrap();
        assert_eq!(u, vec![-1.0, 0.0, 0.0]);

        // below threshold: off
        let heavy = KernelSpec::cucker_smale(1.0, 1.0, 0.3).unwrap();
        let u = sparse_control_cs(&s, 1.0, &heavy).unwrap();
        assert!(u.iter().all(|&c| c == 0.0));

        // tie: budget on the smaller index only
        let s = AgentState::new(1, 4, vec![0.0, 1.0, 2.0, 3.0], vec![2.0, -2.0, 0.0, 0.0]).unwrap();
        let u = sparse_control_cs(&s, 5.0, &a).unwrap();
        assert_eq!(u, vec![-5.0, 0.0, 0.0, 0.0]);
        let nonzero = u.iter().filter(|&&c| c != 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn variational_membership() {
        let a = tiny_kernel();
        let s = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![3.0, 0.0, 0.0]).unwrap();
        let m = 1.0;

        let u_sparse = sparse_control_cs(&s, m, &a).unwrap();
        assert!(in_variational_set_cs(&u_sparse, &s, m, &a).unwrap());

        // spreading half the budget on a non-maximizer violates the pattern
        let bad = vec![-0.5, 0.0, 0.5];
        assert!(!in_variational_set_cs(&bad, &s, m, &a).unwrap());

        // zero control at an interior state is the only member
        let heavy = KernelSpec::cucker_smale(1.0, 1.0, 0.3).unwrap();
        assert!(in_variational_set_cs(&[0.0, 0.0, 0.0], &s, m, &heavy).unwrap());
        assert!(!in_variational_set_cs(&u_sparse, &s, m, &heavy).unwrap());
    }

    #[test]
    fn sparse_optimality_random_states() {
        let a = tiny_kernel();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 10 {
            let n = rng.random_range(3..6);
            let d = 2;
            let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = AgentState::new(d, n, x, v).unwrap();
            if !matches!(
                classify_partition_cs(&s, &a).unwrap(),
                PartitionLabel::P3 { .. }
            ) {
                continue;
            }
            checked += 1;
            assert!(check_sparse_optimality_cs(&s, 1.5, &a, 200, 1000 + checked).unwrap());
        }
    }

    #[test]
    fn sparse_beats_clipped_total_control() {
        let a = tiny_kernel();
        let s = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![3.0, 0.0, 0.0]).unwrap();
        let m = 1.0;
        let u_sparse = sparse_control_cs(&s, m, &a).unwrap();
        // scale the total control onto the budget sphere
        let vp = perp_part(s.v(), 3, 1).unwrap();
        let total_mass: f64 = vp.iter().map(|c| c.abs()).sum();
        let u_total: Vec<f64> = vp.iter().map(|&c| -m * c / total_mass).collect();
        let b_sparse = spread_bilinear(&u_sparse, s.v(), 3, 1).unwrap();
        let b_total = spread_bilinear(&u_total, s.v(), 3, 1).unwrap();
        assert!(b_sparse <= b_total + 1e-12);
    }

    #[test]
    fn leader_deviation_examples() {
        let s = AgentState::new(1, 2, vec![0.0, 1.0], vec![1.0, -1.0]).unwrap();
        let delta = leader_deviation(&s, 2.0, 2.0).unwrap();
        assert_eq!(delta, vec![1.0, 0.0]);

        // consensus: zero deviation
        let c = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![4.0; 3]).unwrap();
        let delta = leader_deviation(&c, 2.0, 2.0).unwrap();
        assert!(delta.iter().all(|&x| x == 0.0));

        assert!(leader_deviation(&s, 1.0, 5.0).is_err());
    }

    #[test]
    fn leader_inner_product_identity() {
        // (2 gamma / N) sum Delta_i . vp_i = (2 gamma / p) V
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (n, d) = (6, 2);
            let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = AgentState::new(d, n, x, v).unwrap();
            let (p, q) = (3.0, 1.5);
            let delta = leader_deviation(&s, p, q).unwrap();
            let vp = perp_part(s.v(), n, d).unwrap();
            let gamma = 0.7;
            let lhs = 2.0 * gamma / n as f64 * vecn::dot(&delta, &vp);
            let rhs = 2.0 * gamma / p * velocity_spread(&s);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn structured_deviation_examples() {
        // phi = 1 with per-agent normalization averages fluctuations to zero
        let flat = KernelSpec::custom(|_| 1.0, crate::kernel::ArgConvention::Distance);
        let s = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 6.0]).unwrap();
        let delta = structured_deviation(&s, &flat, EtaMode::PerAgent).unwrap();
        assert!(delta.iter().all(|&c| c.abs() < 1e-12));

        // nonpositive phi rejected
        let ind = KernelSpec::indicator(0.5, crate::kernel::ArgConvention::Distance).unwrap();
        assert!(structured_deviation(&s, &ind, EtaMode::PerAgent).is_err());
    }

    #[test]
    fn structured_max_mode_contracts() {
        // with a rank-1 fluctuation pattern the shared bound can only shrink
        // each deviation component
        let phi = KernelSpec::cucker_smale(1.0, 1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let (n, d) = (5, 1);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = AgentState::new(d, n, x, v).unwrap();
            let per = structured_deviation(&s, &phi, EtaMode::PerAgent).unwrap();
            let max = structured_deviation(&s, &phi, EtaMode::MaxNormalized).unwrap();
            for i in 0..n {
                assert!(max[i].abs() <= per[i].abs() + 1e-12);
            }
        }
    }

    #[test]
    fn local_average_examples() {
        let s = AgentState::new(1, 2, vec![0.0, 5.0], vec![1.0, -1.0]).unwrap();

        // agents farther apart than the radius: deviation is the full
        // velocity difference, eta = 1
        let (delta, eta) = local_average_deviation(&s, 2.0).unwrap();
        assert_eq!(eta, 1.0);
        assert_eq!(delta, vec![2.0, -2.0]);

        // infinite radius: no deviation
        let (delta, _) = local_average_deviation(&s, f64::INFINITY).unwrap();
        assert!(delta.iter().all(|&c| c == 0.0));

        // radius 0 cancels the feedback entirely
        let fb = local_average_feedback(&s, 0.9, 0.0).unwrap();
        assert!(fb.iter().all(|&c| c.abs() < 1e-12));
    }

    #[test]
    fn sparse_control_cd_examples() {
        let a = KernelSpec::cucker_dong(1.0, 2.0).unwrap();
        let f = RepulsionSpec::Zero;

        // steady state: no control needed
        let s0 = AgentState::new(1, 2, vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let u = sparse_control_cd(&s0, 1.0, 10.0, 0.05, &a, &f).unwrap();
        assert!(u.iter().all(|&c| c == 0.0));

        // fastest agent braked with magnitude eps * E(state)
        let s = AgentState::new(1, 2, vec![0.0, 1.0], vec![2.0, -1.0]).unwrap();
        let e = total_energy(&s, &a, &f).unwrap();
        let u = sparse_control_cd(&s, 2.0, 10.0, 0.1, &a, &f).unwrap();
        assert!((u[0] + 0.1 * e).abs() < 1e-12);
        assert_eq!(u[1], 0.0);

        // eps outside the admissible range
        assert!(sparse_control_cd(&s, 1.0, 10.0, 0.2, &a, &f).is_err());
    }

    #[test]
    fn cd_partition_and_scaling() {
        let s = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![0.1, 0.2, 0.05]).unwrap();
        assert_eq!(classify_partition_cd(&s, 1.0).unwrap(), PartitionLabel::P1);
        assert_eq!(
            classify_partition_cd(&s, 0.15).unwrap(),
            PartitionLabel::P3 { argmax: 1 }
        );
        let tie = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![0.2, -0.2, 0.05]).unwrap();
        assert_eq!(
            classify_partition_cd(&tie, 0.1).unwrap(),
            PartitionLabel::P4 {
                argmax: vec![0, 1]
            }
        );

        // argmax selection invariant under uniform velocity scaling
        let scaled = AgentState::new(1, 3, vec![0.0, 1.0, 2.0], vec![0.4, -0.4, 0.1]).unwrap();
        assert_eq!(
            classify_partition_cd(&scaled, 0.2).unwrap(),
            PartitionLabel::P4 {
                argmax: vec![0, 1]
            }
        );
    }

    #[test]
    fn decay_minimizer_cases() {
        let a = KernelSpec::cucker_dong(1.0, 2.0).unwrap();
        let f = RepulsionSpec::Zero;

        // all speeds below eta: zero minimizer, J* = 0
        let slow = AgentState::new(1, 2, vec![0.0, 1.0], vec![0.1, -0.1]).unwrap();
        let out = minimize_decay_functional_cd(&slow, &a, &f, 1.0, 5.0, 1.0, 500, 8).unwrap();
        assert!(out.u.iter().all(|&c| c == 0.0));
        assert_eq!(out.j_value, 0.0);
        assert!(out.verified, "sampled {} below 0", out.sampled_min);

        // unique fastest above eta: sparse pattern, J* = m (eta - max speed)
        let s = AgentState::new(1, 2, vec![0.0, 1.0], vec![2.0, -1.0]).unwrap();
        let energy = total_energy(&s, &a, &f).unwrap();
        let (m_budget, e0, eta) = (2.0, 10.0, 0.5);
        let out =
            minimize_decay_functional_cd(&s, &a, &f, m_budget, e0, eta, 2000, 9).unwrap();
        let mass = m_budget * energy / e0;
        assert!((out.j_value - mass * (eta - 2.0)).abs() < 1e-12);
        assert!(out.verified);

        // matches the sparse law at eps = M/E0
        let u_sparse = sparse_control_cd(&s, m_budget, e0, m_budget / e0, &a, &f).unwrap();
        for (a_c, b_c) in out.u.iter().zip(&u_sparse) {
            assert!((a_c - b_c).abs() < 1e-12);
        }
    }
}
