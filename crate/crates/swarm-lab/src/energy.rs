//! Total energy of attraction-repulsion dynamics: kinetic part plus
//! attraction and repulsion potentials.

use crate::error::{Error, Result};
use crate::kernel::{ArgConvention, KernelFamily, KernelSpec, RepulsionSpec};
use crate::state::AgentState;
use crate::vecn;

/// Pairwise separations below this are treated as collisions when the
/// repulsion is singular.
pub const SEPARATION_FLOOR: f64 = 1e-12;

/// Kinetic, attraction and repulsion contributions to the total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub attraction: f64,
    pub repulsion: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.kinetic + self.attraction + self.repulsion
    }

    pub fn potential(&self) -> f64 {
        self.attraction + self.repulsion
    }
}

/// Total energy
/// `sum_i ||v_i||^2
///  + 1/2 sum_{i != j} int_0^{||x_i-x_j||^2} a(r) dr
///  + 1/2 sum_{i != j} int_{||x_i-x_j||^2}^inf f(r) dr`,
/// i.e. each unordered pair contributes its potentials once with coefficient
/// one — the unique normalization conserved by the frictionless,
/// uncontrolled flow.
///
/// Potential integrals use closed forms for the rational kernel and
/// power-law repulsion, adaptive quadrature otherwise.
pub fn total_energy(state: &AgentState, a: &KernelSpec, f: &RepulsionSpec) -> Result<f64> {
    energy_breakdown(state, a, f).map(|e| e.total())
}

pub fn energy_breakdown(
    state: &AgentState,
    a: &KernelSpec,
    f: &RepulsionSpec,
) -> Result<EnergyBreakdown> {
    energy_breakdown_flat(state.x(), state.v(), state.count(), state.dim(), a, f)
}

/// Allocation-free energy evaluation on flat position/velocity buffers.
pub fn energy_breakdown_flat(
    x: &[f64],
    v: &[f64],
    n: usize,
    d: usize,
    a: &KernelSpec,
    f: &RepulsionSpec,
) -> Result<EnergyBreakdown> {
    if a.convention != ArgConvention::SquaredDistance && !matches!(a.family, KernelFamily::Custom(_))
    {
        return Err(Error::config(
            "the total energy integrates a squared-distance kernel",
        ));
    }
    let mut kinetic = 0.0;
    for i in 0..n {
        let vi = &v[i * d..(i + 1) * d];
        kinetic += vecn::dot(vi, vi);
    }
    let singular = f.singular_at_zero();
    let mut attraction = 0.0;
    let mut repulsion = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r2 = vecn::dist2(x, d, i, j);
            if singular && r2 < SEPARATION_FLOOR * SEPARATION_FLOOR {
                return Err(Error::SingularConfiguration {
                    i,
                    j,
                    floor: SEPARATION_FLOOR,
                });
            }
            attraction += a.scalar_head_integral(r2);
            match f.tail_integral(r2) {
                Some(tail) => repulsion += tail,
                None => {
                    return Err(Error::SingularConfiguration {
                        i,
                        j,
                        floor: SEPARATION_FLOOR,
                    })
                }
            }
        }
    }
    Ok(EnergyBreakdown {
        kinetic,
        attraction,
        repulsion,
    })
}
