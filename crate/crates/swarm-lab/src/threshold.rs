//! Consensus-region certificates for alignment and attraction-repulsion
//! dynamics.
//!
//! For alignment models the certificate compares the velocity spread against
//! the tail integral of the kernel; a divergent tail means the region is the
//! whole space. For attraction-repulsion models the certificate compares the
//! total energy against a critical level proportional to the full kernel
//! integral.

use crate::energy::total_energy;
use crate::error::{Error, Result};
use crate::kernel::{ArgConvention, KernelFamily, KernelSpec, PsiSpec, RepulsionSpec};
use crate::quadrature;
use crate::state::AgentState;
use crate::vecn;

/// A tail-integral value that may be infinite. Infinite thresholds certify
/// the entire space; comparisons are total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    Infinite,
}

impl Threshold {
    pub fn from_option(v: Option<f64>) -> Self {
        match v {
            Some(x) => Threshold::Finite(x),
            None => Threshold::Infinite,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Threshold::Infinite)
    }

    /// Finite value, or `None` for an infinite threshold.
    pub fn finite(&self) -> Option<f64> {
        match self {
            Threshold::Finite(v) => Some(*v),
            Threshold::Infinite => None,
        }
    }

    /// `self >= x` with the infinite value dominating every float.
    pub fn at_least(&self, x: f64) -> bool {
        match self {
            Threshold::Finite(v) => *v >= x,
            Threshold::Infinite => true,
        }
    }

    pub fn squared(&self) -> Threshold {
        match self {
            Threshold::Finite(v) => Threshold::Finite(v * v),
            Threshold::Infinite => Threshold::Infinite,
        }
    }

    pub fn add(self, other: Threshold) -> Threshold {
        match (self, other) {
            (Threshold::Finite(a), Threshold::Finite(b)) => Threshold::Finite(a + b),
            _ => Threshold::Infinite,
        }
    }
}

/// Outcome of a consensus-region membership test at a spread pair
/// `(X0, V0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCertificate {
    pub x0: f64,
    pub v0: f64,
    pub threshold: Threshold,
    pub inside: bool,
}

/// Tail integral `int_{sqrt(X)}^inf a(sqrt(2N) r) dr` gating consensus
/// emergence for alignment dynamics. Closed forms where the kernel family
/// admits them, adaptive quadrature otherwise.
pub fn consensus_threshold(x_spread: f64, a: &KernelSpec, n: usize) -> Result<Threshold> {
    if x_spread < 0.0 || !x_spread.is_finite() {
        return Err(Error::domain(format!(
            "position spread must be finite and nonnegative (got {x_spread})"
        )));
    }
    if n == 0 {
        return Err(Error::domain("agent count must be positive"));
    }
    let root_x = x_spread.sqrt();
    let s2n = (2.0 * n as f64).sqrt();
    let two_n = 2.0 * n as f64;

    match (&a.family, a.convention) {
        // Both rational conventions reduce to H/(s^2 + 2N r^2)^beta, a
        // rational-distance kernel with rescaled constants.
        (KernelFamily::Rational { h, sigma, beta }, conv) => {
            let s = match conv {
                ArgConvention::Distance => *sigma,
                ArgConvention::SquaredDistance => 1.0,
            };
            let scaled_h = h / two_n.powf(*beta);
            let scaled_sigma = s / s2n;
            Ok(Threshold::from_option(crate::kernel::rational_distance_tail(
                scaled_h,
                scaled_sigma,
                *beta,
                root_x,
            )))
        }
        (KernelFamily::Indicator { radius }, ArgConvention::Distance) => {
            Ok(Threshold::Finite((radius / s2n - root_x).max(0.0)))
        }
        (KernelFamily::Indicator { radius }, ArgConvention::SquaredDistance) => {
            Ok(Threshold::Finite(((radius / two_n).sqrt() - root_x).max(0.0)))
        }
        // Any other distance-convention kernel: substitute s = sqrt(2N) r.
        (_, ArgConvention::Distance) => {
            let tail = a.scalar_tail_integral(s2n * root_x).map(|v| v / s2n);
            Ok(Threshold::from_option(tail))
        }
        // Squared-convention kernels: integrate r -> a(2N r^2) directly.
        (_, ArgConvention::SquaredDistance) => {
            let a = a.clone();
            let tail = quadrature::integrate_tail(
                move |r| a.eval(two_n * r * r),
                root_x,
                quadrature::DEFAULT_TOL,
            );
            Ok(Threshold::from_option(tail))
        }
    }
}

/// Membership test for the autonomous consensus region: inside iff the
/// kernel tail from `X0` dominates `sqrt(V0)`.
pub fn cs_region_check(x0: f64, v0: f64, a: &KernelSpec, n: usize) -> Result<RegionCertificate> {
    if v0 < 0.0 {
        return Err(Error::domain(format!(
            "velocity spread must be nonnegative (got {v0})"
        )));
    }
    let threshold = consensus_threshold(x0, a, n)?;
    Ok(RegionCertificate {
        x0,
        v0,
        threshold,
        inside: threshold.at_least(v0.sqrt()),
    })
}

/// Membership test for the region enlarged by a decentralized feedback of
/// strength `gamma_strength`, mollified by `psi` with normalization bound
/// `eta_sup`.
pub fn cs_region_check_extended(
    x0: f64,
    v0: f64,
    a: &KernelSpec,
    n: usize,
    gamma_strength: f64,
    psi: &PsiSpec,
    eta_sup: f64,
) -> Result<RegionCertificate> {
    if gamma_strength < 0.0 {
        return Err(Error::domain("feedback strength must be nonnegative"));
    }
    if !(eta_sup > 0.0 && eta_sup <= n as f64) {
        return Err(Error::domain(format!(
            "normalization bound must lie in (0, N] (got {eta_sup})"
        )));
    }
    if v0 < 0.0 {
        return Err(Error::domain("velocity spread must be nonnegative"));
    }
    let base = consensus_threshold(x0, a, n)?;
    let threshold = if gamma_strength == 0.0 {
        base
    } else {
        let s2n = (2.0 * n as f64).sqrt();
        let root_x = x0.sqrt();
        let psi_tail = match psi {
            PsiSpec::Indicator { radius } if radius.is_infinite() => Threshold::Infinite,
            PsiSpec::Indicator { radius } => {
                Threshold::Finite((radius / s2n - root_x).max(0.0))
            }
            PsiSpec::Custom(_) => {
                Threshold::from_option(psi.scalar_tail_integral(s2n * root_x).map(|v| v / s2n))
            }
        };
        let gain = gamma_strength * n as f64 / eta_sup;
        base.add(match psi_tail {
            Threshold::Finite(v) => Threshold::Finite(gain * v),
            Threshold::Infinite => Threshold::Infinite,
        })
    };
    Ok(RegionCertificate {
        x0,
        v0,
        threshold,
        inside: threshold.at_least(v0.sqrt()),
    })
}

/// Critical total-energy level `(N-1)/2 int_0^inf a(r) dr` below which
/// attraction-repulsion dynamics stay cohesive and collision-avoiding.
pub fn cd_energy_threshold(a: &KernelSpec, n: usize) -> Result<Threshold> {
    if a.convention != ArgConvention::SquaredDistance {
        return Err(Error::config(
            "the energy threshold is defined for squared-distance kernels",
        ));
    }
    if n == 0 {
        return Err(Error::domain("agent count must be positive"));
    }
    let factor = (n as f64 - 1.0) / 2.0;
    Ok(match a.scalar_tail_integral(0.0) {
        Some(total) => Threshold::Finite(factor * total),
        None => Threshold::Infinite,
    })
}

/// The feasibility constant of the conditional stabilization result for
/// attraction-repulsion dynamics, from raw scalars. `None` when the mean
/// velocity or energy degenerates.
pub fn cd_feasibility_constant_raw(
    m_budget: f64,
    mean_speed0: f64,
    energy0: f64,
    lambda: f64,
    n: usize,
) -> Option<f64> {
    if mean_speed0 <= 0.0 || energy0 <= 0.0 {
        return None;
    }
    if m_budget == 0.0 {
        return Some(1.0); // zero budget, zero exponent
    }
    let coeff = 2.0 * 3.0_f64.sqrt() / 9.0;
    let denom = energy0 * energy0.sqrt() * (lambda * energy0.sqrt() + m_budget / n as f64);
    if denom <= 0.0 {
        return None;
    }
    Some((-coeff * m_budget * mean_speed0.powi(3) / denom).exp())
}

/// Feasibility certificate for sparse stabilization of attraction-repulsion
/// dynamics: evaluates the constant `c` and whether the initial energy falls
/// in the window `(vartheta, c vartheta)`. Diagnostic only.
#[derive(Debug, Clone, Copy)]
pub struct CdFeasibility {
    /// `None` when the mean velocity vanishes (certificate inapplicable).
    pub c: Option<f64>,
    pub energy0: f64,
    pub vartheta: Threshold,
    pub satisfied: bool,
}

pub fn cd_feasibility_certificate(
    state0: &AgentState,
    m_budget: f64,
    lambda: f64,
    a: &KernelSpec,
    f: &RepulsionSpec,
) -> Result<CdFeasibility> {
    let energy0 = total_energy(state0, a, f)?;
    let vartheta = cd_energy_threshold(a, state0.count())?;
    let mean_speed0 = vecn::norm(&state0.mean_velocity());
    let c = cd_feasibility_constant_raw(m_budget, mean_speed0, energy0, lambda, state0.count());
    let satisfied = match (c, vartheta) {
        (Some(c), Threshold::Finite(th)) => c * th > energy0 && energy0 > th,
        _ => false,
    };
    Ok(CdFeasibility {
        c,
        energy0,
        vartheta,
        satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ArgConvention;

    #[test]
    fn threshold_comparisons_are_total() {
        assert!(Threshold::Infinite.at_least(f64::MAX));
        assert!(Threshold::Finite(2.0).at_least(2.0));
        assert!(!Threshold::Finite(2.0).at_least(2.0 + 1e-12));
        assert_eq!(
            Threshold::Finite(1.5).add(Threshold::Infinite),
            Threshold::Infinite
        );
        assert_eq!(Threshold::Finite(3.0).squared(), Threshold::Finite(9.0));
    }

    #[test]
    fn closed_form_matches_quadrature_at_zero_spread() {
        // H=1/2, sigma=1, beta=1, N=2: int_0^inf (1/2)/(1+4r^2) dr = pi/8
        let a = KernelSpec::cucker_smale(0.5, 1.0, 1.0).unwrap();
        let got = consensus_threshold(0.0, &a, 2).unwrap().finite().unwrap();
        let expected = std::f64::consts::PI / 8.0;
        assert!((got - expected).abs() < 1e-12, "got {got}");

        // same kernel through the custom (pure quadrature) path
        let custom = KernelSpec::custom(|r| 0.5 / (1.0 + r * r), ArgConvention::Distance);
        let quad = consensus_threshold(0.0, &custom, 2)
            .unwrap()
            .finite()
            .unwrap();
        assert!((quad - expected).abs() < 1e-9, "quadrature path {quad}");
    }

    #[test]
    fn closed_form_matches_quadrature_on_grid() {
        for beta in [0.8, 1.0, 1.5, 2.0, 2.7] {
            let a = KernelSpec::cucker_smale(1.3, 0.9, beta).unwrap();
            let custom = {
                let a = a.clone();
                KernelSpec::custom(move |r| a.eval(r), ArgConvention::Distance)
            };
            for x in [0.0, 0.3, 1.0, 4.0] {
                let fast = consensus_threshold(x, &a, 5).unwrap().finite().unwrap();
                let slow = consensus_threshold(x, &custom, 5).unwrap().finite().unwrap();
                assert!(
                    (fast - slow).abs() <= 1e-9 * fast.max(1.0),
                    "beta={beta} x={x}: {fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn vanishing_tail_and_divergence() {
        let a = KernelSpec::cucker_smale(1.0, 1.0, 1.0).unwrap();
        let far = consensus_threshold(1e8, &a, 4).unwrap().finite().unwrap();
        assert!(far < 1e-3);

        // beta = 1/2 under the distance convention has a non-integrable tail
        let slow = KernelSpec::cucker_smale(1.0, 1.0, 0.5).unwrap();
        assert!(consensus_threshold(0.0, &slow, 4).unwrap().is_infinite());

        assert!(consensus_threshold(-1.0, &a, 4).is_err());
    }

    #[test]
    fn threshold_nonincreasing_in_spread() {
        let a = KernelSpec::cucker_smale(1.0, 1.0, 1.2).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let x = k as f64 * 0.5;
            let v = consensus_threshold(x, &a, 10).unwrap().finite().unwrap();
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn region_check_examples() {
        let a = KernelSpec::cucker_smale(0.5, 1.0, 1.0).unwrap();
        assert!(cs_region_check(3.0, 0.0, &a, 2).unwrap().inside);

        let heavy = KernelSpec::cucker_smale(1.0, 1.0, 0.4).unwrap();
        assert!(cs_region_check(1e6, 1e6, &heavy, 2).unwrap().inside);

        let gamma0 = std::f64::consts::PI / 8.0;
        let just_outside = gamma0 * gamma0 * (1.0 + 1e-3);
        assert!(!cs_region_check(0.0, just_outside, &a, 2).unwrap().inside);
        let just_inside = gamma0 * gamma0 * (1.0 - 1e-3);
        assert!(cs_region_check(0.0, just_inside, &a, 2).unwrap().inside);
    }

    #[test]
    fn region_monotone_in_both_spreads() {
        let a = KernelSpec::cucker_smale(1.0, 1.0, 1.0).unwrap();
        // shrinking X0 or V0 never exits the region
        for &(x0, v0) in &[(1.0, 0.01), (4.0, 0.001), (0.25, 0.02)] {
            let base = cs_region_check(x0, v0, &a, 6).unwrap();
            if base.inside {
                assert!(cs_region_check(x0 * 0.5, v0, &a, 6).unwrap().inside);
                assert!(cs_region_check(x0, v0 * 0.5, &a, 6).unwrap().inside);
            }
        }
    }

    #[test]
    fn extended_region_reductions() {
        let a = KernelSpec::cucker_smale(0.5, 1.0, 1.0).unwrap();
        let psi = PsiSpec::Indicator { radius: 3.0 };

        // zero strength reduces exactly to the base certificate
        let base = cs_region_check(1.0, 0.2, &a, 2).unwrap();
        let ext = cs_region_check_extended(1.0, 0.2, &a, 2, 0.0, &psi, 2.0).unwrap();
        assert_eq!(base.threshold, ext.threshold);
        assert_eq!(base.inside, ext.inside);

        // total information: infinite radius covers every finite pair
        let all = PsiSpec::Indicator {
            radius: f64::INFINITY,
        };
        let cert = cs_region_check_extended(1e9, 1e9, &a, 2, 0.1, &all, 2.0).unwrap();
        assert!(cert.inside && cert.threshold.is_infinite());

        // radius too small to reach sqrt(2N X0): verdict identical to base
        let x0 = 4.0;
        let small = PsiSpec::Indicator { radius: 1.0 }; // sqrt(2*2*4) = 4 > 1
        let cert = cs_region_check_extended(x0, 0.2, &a, 2, 5.0, &small, 2.0).unwrap();
        let base = cs_region_check(x0, 0.2, &a, 2).unwrap();
        assert_eq!(cert.threshold, base.threshold);
        assert_eq!(cert.inside, base.inside);
    }

    #[test]
    fn extended_indicator_closed_form() {
        // with eta_sup = N the enlargement is gamma * max(0, R/sqrt(2N) - sqrt(X0))
        let a = KernelSpec::cucker_smale(0.5, 1.0, 1.0).unwrap();
        let (n, x0, gamma, r) = (2usize, 0.25, 0.7, 4.0);
        let psi = PsiSpec::Indicator { radius: r };
        let cert = cs_region_check_extended(x0, 0.0, &a, n, gamma, &psi, n as f64).unwrap();
        let base = consensus_threshold(x0, &a, n).unwrap().finite().unwrap();
        let expected = base + gamma * (r / (2.0 * n as f64).sqrt() - x0.sqrt()).max(0.0);
        let got = cert.threshold.finite().unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn energy_threshold_closed_form_and_quadrature() {
        let a = KernelSpec::cucker_dong(1.0, 2.0).unwrap();
        let th = cd_energy_threshold(&a, 8).unwrap().finite().unwrap();
        assert!((th - 3.5).abs() < 1e-14);

        for beta in [1.1, 1.5, 2.0, 3.0] {
            let a = KernelSpec::cucker_dong(1.0, beta).unwrap();
            let closed = cd_energy_threshold(&a, 8).unwrap().finite().unwrap();
            let custom = {
                let a = a.clone();
                KernelSpec::custom(move |r| a.eval(r), ArgConvention::SquaredDistance)
            };
            let quad = cd_energy_threshold(&custom, 8).unwrap().finite().unwrap();
            assert!(
                (closed - quad).abs() <= 1e-9 * closed.max(1.0),
                "beta={beta}: {closed} vs {quad}"
            );
        }

        // beta <= 1: unconditional cohesion, infinite threshold
        let b1 = KernelSpec::cucker_dong(1.0, 1.0).unwrap();
        assert!(cd_energy_threshold(&b1, 8).unwrap().is_infinite());
        let b07 = KernelSpec::cucker_dong(50.0, 0.7).unwrap();
        assert!(cd_energy_threshold(&b07, 2).unwrap().is_infinite());

        // distance-convention kernels are rejected
        let cs = KernelSpec::cucker_smale(1.0, 1.0, 2.0).unwrap();
        assert!(cd_energy_threshold(&cs, 8).is_err());
    }

    #[test]
    fn feasibility_constant_formula() {
        // M = 0 collapses the exponent: c = 1, window empty
        let c = cd_feasibility_constant_raw(0.0, 1.0, 4.0, 0.0, 8);
        assert_eq!(c, Some(1.0));

        // synthetic values chosen so the exponent is exactly -2 sqrt(3)/9
        let c = cd_feasibility_constant_raw(35.0, 1.0, 4.0, 0.0, 8).unwrap();
        let expected = (-2.0 * 3.0_f64.sqrt() / 9.0).exp();
        assert!((c - expected).abs() < 1e-14, "{c} vs {expected}");

        assert_eq!(cd_feasibility_constant_raw(1.0, 0.0, 4.0, 0.0, 8), None);
    }

    #[test]
    fn feasibility_certificate_from_state() {
        let a = KernelSpec::cucker_dong(1.0, 2.0).unwrap();
        let f = RepulsionSpec::power_law(2.0).unwrap();
        // two agents heading the same way: nonzero mean velocity
        let s = AgentState::new(1, 2, vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        let cert = cd_feasibility_certificate(&s, 10.0, 0.0, &a, &f).unwrap();
        let e0 = total_energy(&s, &a, &f).unwrap();
        let mean_speed = 0.75;
        let expected = cd_feasibility_constant_raw(10.0, mean_speed, e0, 0.0, 2).unwrap();
        assert!((cert.c.unwrap() - expected).abs() < 1e-14);
        assert_eq!(cert.energy0, e0);

        // zero mean velocity: certificate inapplicable
        let s0 = AgentState::new(1, 2, vec![0.0, 1.0], vec![1.0, -1.0]).unwrap();
        let cert = cd_feasibility_certificate(&s0, 10.0, 0.0, &a, &f).unwrap();
        assert!(cert.c.is_none() && !cert.satisfied);
    }
}
