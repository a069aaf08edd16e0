//! Interaction kernels, repulsion and friction profiles.
//!
//! Alignment models evaluate the kernel at the pairwise *distance*
//! `a(||x_i - x_j||)`; the attraction-repulsion (Cucker-Dong) family
//! evaluates it at the *squared* distance `a(||x_i - x_j||^2)`. The
//! convention is an explicit field so a kernel can never be silently fed
//! the wrong argument.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How the dynamics map a pairwise distance to the kernel argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgConvention {
    /// `a(||x_i - x_j||)` — alignment (Cucker-Smale) models.
    Distance,
    /// `a(||x_i - x_j||^2)` — attraction-repulsion (Cucker-Dong) models.
    SquaredDistance,
}

#[derive(Clone)]
pub enum KernelFamily {
    /// `H / (sigma^2 + r^2)^beta` under the distance convention,
    /// `H / (1 + r)^beta` under the squared-distance convention.
    Rational { h: f64, sigma: f64, beta: f64 },
    /// 1 on `[0, radius]`, 0 beyond (bounded-confidence interactions).
    Indicator { radius: f64 },
    /// `height` on `[0, radius]`, then an exponential tail
    /// `height * exp(-(height/tail_mass)(r - radius))` carrying total tail
    /// integral `tail_mass`. Continuous at `radius` and nonincreasing.
    Plateau {
        height: f64,
        radius: f64,
        tail_mass: f64,
    },
    /// Arbitrary nonincreasing nonnegative function of the kernel argument.
    Custom(ScalarFn),
}

#[derive(Clone)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub convention: ArgConvention,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            KernelFamily::Rational { h, sigma, beta } => write!(
                f,
                "Rational(h={h}, sigma={sigma}, beta={beta}, {:?})",
                self.convention
            ),
            KernelFamily::Indicator { radius } => {
                write!(f, "Indicator(radius={radius}, {:?})", self.convention)
            }
            KernelFamily::Plateau {
                height,
                radius,
                tail_mass,
            } => write!(
                f,
                "Plateau(height={height}, radius={radius}, tail_mass={tail_mass}, {:?})",
                self.convention
            ),
            KernelFamily::Custom(_) => write!(f, "Custom({:?})", self.convention),
        }
    }
}

impl KernelSpec {
    pub fn rational(h: f64, sigma: f64, beta: f64, convention: ArgConvention) -> Result<Self> {
        if h <= 0.0 || sigma <= 0.0 || beta < 0.0 {
            return Err(Error::config(format!(
                "rational kernel needs H > 0, sigma > 0, beta >= 0 (got H={h}, sigma={sigma}, beta={beta})"
            )));
        }
        Ok(Self {
            family: KernelFamily::Rational { h, sigma, beta },
            convention,
        })
    }

    /// The standard Cucker-Smale kernel `H / (sigma^2 + r^2)^beta`.
    pub fn cucker_smale(h: f64, sigma: f64, beta: f64) -> Result<Self> {
        Self::rational(h, sigma, beta, ArgConvention::Distance)
    }

    /// The Cucker-Dong attraction kernel `H / (1 + r)^beta`, evaluated at
    /// squared distances.
    pub fn cucker_dong(h: f64, beta: f64) -> Result<Self> {
        Self::rational(h, 1.0, beta, ArgConvention::SquaredDistance)
    }

    pub fn indicator(radius: f64, convention: ArgConvention) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::config(format!(
                "indicator kernel needs radius > 0 (got {radius})"
            )));
        }
        Ok(Self {
            family: KernelFamily::Indicator { radius },
            convention,
        })
    }

    pub fn plateau(height: f64, radius: f64, tail_mass: f64) -> Result<Self> {
        if height <= 0.0 || radius <= 0.0 || tail_mass <= 0.0 {
            return Err(Error::config(format!(
                "plateau kernel needs height, radius, tail_mass > 0 (got {height}, {radius}, {tail_mass})"
            )));
        }
        Ok(Self {
            family: KernelFamily::Plateau {
                height,
                radius,
                tail_mass,
            },
            convention: ArgConvention::Distance,
        })
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(
        f: F,
        convention: ArgConvention,
    ) -> Self {
        Self {
            family: KernelFamily::Custom(Arc::new(f)),
            convention,
        }
    }

    /// Evaluate the kernel as a scalar function of its own argument.
    pub fn eval(&self, arg: f64) -> f64 {
        match &self.family {
            KernelFamily::Rational { h, sigma, beta } => {
                let base = match self.convention {
                    ArgConvention::Distance => sigma * sigma + arg * arg,
                    ArgConvention::SquaredDistance => 1.0 + arg,
                };
                // integer exponents dominate the pairwise loops; skip powf
                if *beta == 1.0 {
                    h / base
                } else if *beta == 2.0 {
                    h / (base * base)
                } else if *beta == 0.5 {
                    h / base.sqrt()
                } else {
                    h / base.powf(*beta)
                }
            }
            KernelFamily::Indicator { radius } => {
                if arg <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Plateau {
                height,
                radius,
                tail_mass,
            } => {
                if arg <= *radius {
                    *height
                } else {
                    height * (-(height / tail_mass) * (arg - radius)).exp()
                }
            }
            KernelFamily::Custom(f) => f(arg),
        }
    }

    /// Evaluate at a pairwise distance, applying the argument convention.
    pub fn eval_at_distance(&self, dist: f64) -> f64 {
        match self.convention {
            ArgConvention::Distance => self.eval(dist),
            ArgConvention::SquaredDistance => self.eval(dist * dist),
        }
    }

    /// `int_c^inf a(r) dr` of the scalar kernel; `None` when divergent.
    pub fn scalar_tail_integral(&self, c: f64) -> Option<f64> {
        debug_assert!(c >= 0.0);
        match &self.family {
            KernelFamily::Rational { h, sigma, beta } => match self.convention {
                ArgConvention::Distance => rational_distance_tail(*h, *sigma, *beta, c),
                ArgConvention::SquaredDistance => {
                    if *beta > 1.0 {
                        Some(h * (1.0 + c).powf(1.0 - beta) / (beta - 1.0))
                    } else {
                        None
                    }
                }
            },
            KernelFamily::Indicator { radius } => Some((radius - c).max(0.0)),
            KernelFamily::Plateau {
                height,
                radius,
                tail_mass,
            } => {
                if c <= *radius {
                    Some(height * (radius - c) + tail_mass)
                } else {
                    Some(tail_mass * (-(height / tail_mass) * (c - radius)).exp())
                }
            }
            KernelFamily::Custom(f) => {
                let f = f.clone();
                quadrature::integrate_tail(move |r| f(r), c, quadrature::DEFAULT_TOL)
            }
        }
    }

    /// `int_0^s a(r) dr` of the scalar kernel (potential-energy primitive).
    pub fn scalar_head_integral(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match &self.family {
            KernelFamily::Rational { h, sigma, beta } => match self.convention {
                ArgConvention::SquaredDistance => {
                    if (*beta - 1.0).abs() < 1e-14 {
                        h * (1.0 + s).ln()
                    } else {
                        h * ((1.0 + s).powf(1.0 - beta) - 1.0) / (1.0 - beta)
                    }
                }
                ArgConvention::Distance => {
                    if (*beta - 1.0).abs() < 1e-14 {
                        h / sigma * (s / sigma).atan()
                    } else {
                        let (h, sigma, beta) = (*h, *sigma, *beta);
                        quadrature::integrate(
                            move |r| h / (sigma * sigma + r * r).powf(beta),
                            0.0,
                            s,
                            quadrature::DEFAULT_TOL,
                        )
                    }
                }
            },
            KernelFamily::Indicator { radius } => s.min(*radius),
            KernelFamily::Plateau {
                height,
                radius,
                tail_mass,
            } => {
                if s <= *radius {
                    height * s
                } else {
                    height * radius
                        + tail_mass * (1.0 - (-(height / tail_mass) * (s - radius)).exp())
                }
            }
            KernelFamily::Custom(f) => {
                let f = f.clone();
                quadrature::integrate(move |r| f(r), 0.0, s, quadrature::DEFAULT_TOL)
            }
        }
    }
}

/// Closed forms for `H int_c^inf (sigma^2 + r^2)^{-beta} dr` where known.
pub(crate) fn rational_distance_tail(h: f64, sigma: f64, beta: f64, c: f64) -> Option<f64> {
    if beta <= 0.5 {
        return None; // tail ~ r^{-2 beta} is not integrable
    }
    let u = c / sigma;
    let scale = h * sigma.powf(1.0 - 2.0 * beta);
    let closed = if (beta - 1.0).abs() < 1e-14 {
        Some(std::f64::consts::FRAC_PI_2 - u.atan())
    } else if (beta - 1.5).abs() < 1e-14 {
        Some(1.0 - u / (1.0 + u * u).sqrt())
    } else if (beta - 2.0).abs() < 1e-14 {
        Some(0.5 * (std::f64::consts::FRAC_PI_2 - u.atan() - u / (1.0 + u * u)))
    } else {
        None
    };
    match closed {
        Some(i) => Some(scale * i),
        None => quadrature::integrate_tail(
            move |r| h / (sigma * sigma + r * r).powf(beta),
            c,
            quadrature::DEFAULT_TOL,
        ),
    }
}

/// Repulsive force profile for attraction-repulsion dynamics, singular at
/// zero except for the explicit `Zero` variant.
#[derive(Clone)]
pub enum RepulsionSpec {
    /// `f(r) = r^{-p}`, `p > 1`.
    PowerLaw { p: f64 },
    /// No repulsion at all (regular at coincident positions).
    Zero,
    /// Custom nonincreasing profile; treated as singular at zero.
    Custom(ScalarFn),
}

impl fmt::Debug for RepulsionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepulsionSpec::PowerLaw { p } => write!(f, "PowerLaw(p={p})"),
            RepulsionSpec::Zero => write!(f, "Zero"),
            RepulsionSpec::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl RepulsionSpec {
    pub fn power_law(p: f64) -> Result<Self> {
        if p <= 1.0 {
            return Err(Error::config(format!(
                "power-law repulsion needs p > 1 (got {p}); the tail integral diverges otherwise"
            )));
        }
        Ok(RepulsionSpec::PowerLaw { p })
    }

    /// Custom profile; the finite-tail requirement is probed numerically at
    /// several cut points before acceptance.
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Result<Self> {
        let f: ScalarFn = Arc::new(f);
        for delta in [0.1, 1.0, 10.0] {
            let g = f.clone();
            if quadrature::integrate_tail(move |r| g(r), delta, 1e-8).is_none() {
                return Err(Error::config(format!(
                    "custom repulsion has a divergent tail integral from {delta}"
                )));
            }
        }
        Ok(RepulsionSpec::Custom(f))
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RepulsionSpec::PowerLaw { p } => r.powf(-p),
            RepulsionSpec::Zero => 0.0,
            RepulsionSpec::Custom(f) => f(r),
        }
    }

    /// `int_s^inf f(r) dr`; `None` when divergent (e.g. power law from 0).
    pub fn tail_integral(&self, s: f64) -> Option<f64> {
        match self {
            RepulsionSpec::PowerLaw { p } => {
                if s <= 0.0 {
                    None
                } else {
                    Some(s.powf(1.0 - p) / (p - 1.0))
                }
            }
            RepulsionSpec::Zero => Some(0.0),
            RepulsionSpec::Custom(f) => {
                let f = f.clone();
                quadrature::integrate_tail(move |r| f(r), s, quadrature::DEFAULT_TOL)
            }
        }
    }

    /// Whether coincident positions are a model-violating state.
    pub fn singular_at_zero(&self) -> bool {
        !matches!(self, RepulsionSpec::Zero)
    }
}

/// Per-agent friction coefficients `b_i(t)` bounded by a common `lambda`.
#[derive(Clone)]
pub struct FrictionSpec {
    pub lambda: f64,
    profile: FrictionProfile,
}

#[derive(Clone)]
enum FrictionProfile {
    Zero,
    Constant(Vec<f64>),
    Custom(Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for FrictionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.profile {
            FrictionProfile::Zero => write!(f, "Friction(none)"),
            FrictionProfile::Constant(b) => write!(f, "Friction(constant {b:?})"),
            FrictionProfile::Custom(_) => write!(f, "Friction(custom, lambda={})", self.lambda),
        }
    }
}

impl FrictionSpec {
    pub fn none() -> Self {
        Self {
            lambda: 0.0,
            profile: FrictionProfile::Zero,
        }
    }

    pub fn constant(b: Vec<f64>, lambda: f64) -> Result<Self> {
        if b.iter().any(|&bi| bi < 0.0 || bi > lambda) {
            return Err(Error::config(format!(
                "friction coefficients must lie in [0, {lambda}]"
            )));
        }
        Ok(Self {
            lambda,
            profile: FrictionProfile::Constant(b),
        })
    }

    pub fn custom<F: Fn(f64, usize) -> f64 + Send + Sync + 'static>(f: F, lambda: f64) -> Self {
        Self {
            lambda,
            profile: FrictionProfile::Custom(Arc::new(f)),
        }
    }

    /// `b_i(t)`, clamped into `[0, lambda]`.
    pub fn eval(&self, t: f64, i: usize) -> f64 {
        match &self.profile {
            FrictionProfile::Zero => 0.0,
            FrictionProfile::Constant(b) => b.get(i).copied().unwrap_or(0.0),
            FrictionProfile::Custom(f) => f(t, i).clamp(0.0, self.lambda),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.profile {
            FrictionProfile::Zero => true,
            FrictionProfile::Constant(b) => b.iter().all(|&bi| bi == 0.0),
            FrictionProfile::Custom(_) => false,
        }
    }
}

/// Mollifier for the local-average feedback analysis: nonincreasing,
/// `[0, 1]`-valued.
#[derive(Clone)]
pub enum PsiSpec {
    /// 1 on `[0, radius]`, 0 beyond. `radius = inf` is the total-information
    /// limit.
    Indicator { radius: f64 },
    Custom(ScalarFn),
}

impl fmt::Debug for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Indicator { radius } => write!(f, "PsiIndicator(radius={radius})"),
            PsiSpec::Custom(_) => write!(f, "PsiCustom"),
        }
    }
}

impl PsiSpec {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            PsiSpec::Indicator { radius } => {
                if r <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            PsiSpec::Custom(f) => f(r).clamp(0.0, 1.0),
        }
    }

    /// `int_c^inf psi(r) dr`; `None` means an infinite (divergent) value.
    pub fn scalar_tail_integral(&self, c: f64) -> Option<f64> {
        match self {
            PsiSpec::Indicator { radius } => {
                if radius.is_infinite() {
                    None
                } else {
                    Some((radius - c).max(0.0))
                }
            }
            PsiSpec::Custom(f) => {
                let f = f.clone();
                quadrature::integrate_tail(move |r| f(r).clamp(0.0, 1.0), c, quadrature::DEFAULT_TOL)
            }
        }
    }
}
