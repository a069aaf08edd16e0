//! Agent states and the pairwise-spread bilinear form with its Lyapunov
//! functionals.

use crate::error::{Error, Result};
use crate::vecn;

/// Positions and velocities of `n` agents in `R^d`, stored as flat
/// agent-major buffers. First-order models keep their single state variable
/// (the opinion / consensus parameter) in the velocity slot.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    d: usize,
    n: usize,
    x: Vec<f64>,
    v: Vec<f64>,
}

impl AgentState {
    pub fn new(d: usize, n: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::config("agent state needs d >= 1 and n >= 1"));
        }
        if x.len() != d * n {
            return Err(Error::DimensionMismatch {
                expected: d * n,
                got: x.len(),
            });
        }
        if v.len() != d * n {
            return Err(Error::DimensionMismatch {
                expected: d * n,
                got: v.len(),
            });
        }
        Ok(Self { d, n, x, v })
    }

    /// State for first-order dynamics: the opinions live in the velocity
    /// slot, positions are zero.
    pub fn first_order(d: usize, opinions: Vec<f64>) -> Result<Self> {
        let n = opinions.len() / d;
        AgentState::new(d, n, vec![0.0; opinions.len()], opinions)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn pos(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn vel(&self, i: usize) -> &[f64] {
        &self.v[i * self.d..(i + 1) * self.d]
    }

    pub fn mean_velocity(&self) -> Vec<f64> {
        vecn::block_mean(&self.v, self.d, self.n)
    }

    pub fn mean_position(&self) -> Vec<f64> {
        vecn::block_mean(&self.x, self.d, self.n)
    }

    /// Speed of the i-th agent.
    pub fn speed(&self, i: usize) -> f64 {
        vecn::norm(self.vel(i))
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        vecn::dist(&self.x, self.d, i, j)
    }

    pub fn min_pair_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                best = best.min(self.distance(i, j));
            }
        }
        best
    }

    /// All pairwise distances strictly above `floor`; required before
    /// evaluating singular repulsion forces.
    pub fn check_separation(&self, floor: f64) -> Result<()> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.distance(i, j) < floor {
                    return Err(Error::SingularConfiguration { i, j, floor });
                }
            }
        }
        Ok(())
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.v)
    }
}

/// The symmetric bilinear form `(1/2N^2) sum_{i,j} (v_i - v_j).(w_i - w_j)`
/// measuring pairwise spread.
///
/// Computed through the equivalent representation
/// `(1/N) sum_i v_i.w_i - vbar.wbar`, which is O(Nd); the defining double
/// sum is kept as an independent oracle in the tests.
pub fn spread_bilinear(v: &[f64], w: &[f64], n: usize, d: usize) -> Result<f64> {
    if v.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: v.len(),
        });
    }
    if w.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: w.len(),
        });
    }
    let mut per_agent = 0.0;
    for i in 0..n {
        per_agent += vecn::dot(&v[i * d..(i + 1) * d], &w[i * d..(i + 1) * d]);
    }
    let vbar = vecn::block_mean(v, d, n);
    let wbar = vecn::block_mean(w, d, n);
    Ok(per_agent / n as f64 - vecn::dot(&vbar, &wbar))
}

/// Split `v` into its consensus part (every block equal to the mean) and the
/// zero-mean fluctuation part.
pub fn perp_decompose(v: &[f64], n: usize, d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: v.len(),
        });
    }
    let mean = vecn::block_mean(v, d, n);
    let mut vf = vec![0.0; v.len()];
    let mut vp = vec![0.0; v.len()];
    for i in 0..n {
        for k in 0..d {
            vf[i * d + k] = mean[k];
            vp[i * d + k] = v[i * d + k] - mean[k];
        }
    }
    Ok((vf, vp))
}

/// Only the fluctuation part of `v`.
pub fn perp_part(v: &[f64], n: usize, d: usize) -> Result<Vec<f64>> {
    perp_decompose(v, n, d).map(|(_, vp)| vp)
}

/// Position spread `X = B(x, x)`.
pub fn position_spread(state: &AgentState) -> f64 {
    spread_bilinear(&state.x, &state.x, state.n, state.d)
        .expect("state invariant guarantees matching lengths")
        .max(0.0)
}

/// Velocity spread `V = B(v, v)`; zero exactly on the consensus manifold.
pub fn velocity_spread(state: &AgentState) -> f64 {
    spread_bilinear(&state.v, &state.v, state.n, state.d)
        .expect("state invariant guarantees matching lengths")
        .max(0.0)
}

/// The pair `(X, V)` monitored along every trajectory.
pub fn spread_pair(state: &AgentState) -> (f64, f64) {
    (position_spread(state), velocity_spread(state))
}
