//! Adaptive quadrature for the improper integrals behind the consensus
//! thresholds and potential energies.
//!
//! Finite panels use adaptive Simpson refinement. Tails `[a, inf)` are summed
//! over geometrically widening panels with a geometric-remainder
//! extrapolation, which stays accurate even for slowly decaying integrable
//! tails (exponents barely above 1). Non-integrable tails are rejected by a
//! decay probe on `r * f(r)`.

const MAX_DEPTH: u32 = 40;
const MAX_PANELS: usize = 20_000;

/// Absolute tolerance used by callers that gate pass/fail decisions.
pub const DEFAULT_TOL: f64 = 1e-10;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Integrate `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    adaptive(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

/// Integrate a nonnegative, eventually-decreasing `f` over `[a, inf)`.
///
/// Returns `None` when the tail is judged non-integrable (decay no faster
/// than 1/r), or when the panel sum fails to settle within the panel budget.
pub fn integrate_tail<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Option<f64> {
    debug_assert!(a >= 0.0);
    if !tail_converges(&f, a) {
        return None;
    }
    let mut total = 0.0;
    let mut lo = a;
    let mut width = a.abs().max(1.0);
    let mut prev_panel: Option<f64> = None;
    let mut prev_extrapolated: Option<f64> = None;
    for _ in 0..MAX_PANELS {
        let hi = lo + width;
        if !hi.is_finite() {
            return None;
        }
        let panel = integrate(&f, lo, hi, tol * 0.01);
        total += panel;
        if panel.abs() <= f64::EPSILON * total.abs() || panel == 0.0 {
            return Some(total);
        }
        // Doubling panels of a power-law tail shrink geometrically, so the
        // geometric remainder extrapolation is exact for pure power decay
        // and converges as the integrand approaches one. Accept either a
        // negligible remainder or a stabilized extrapolated total.
        if let Some(prev) = prev_panel {
            let ratio = panel / prev;
            if ratio > 0.0 && ratio < 1.0 {
                let remainder = panel * ratio / (1.0 - ratio);
                let extrapolated = total + remainder;
                if remainder.abs() <= tol.max(1e-14 * total.abs()) {
                    return Some(extrapolated);
                }
                if let Some(prev_ex) = prev_extrapolated {
                    if (extrapolated - prev_ex).abs() <= tol.max(1e-14 * extrapolated.abs()) {
                        return Some(extrapolated);
                    }
                }
                prev_extrapolated = Some(extrapolated);
            } else {
                prev_extrapolated = None;
            }
        }
        prev_panel = Some(panel);
        lo = hi;
        width *= 2.0;
    }
    None
}

/// Integrability probe: requires `r * f(r)` to keep decaying across several
/// decades. A constant or growing product means a tail at least as heavy as
/// 1/r.
fn tail_converges<F: Fn(f64) -> f64>(f: &F, a: f64) -> bool {
    let r0 = a.max(1.0);
    let mut prev = f64::INFINITY;
    for decades in [2.0, 4.0, 6.0, 8.0] {
        let r = r0 * 10f64.powf(decades);
        let v = r * f(r);
        if !v.is_finite() {
            return false;
        }
        // 1% slack per two decades tolerates only genuinely decaying tails
        if v > prev * 0.99 && v > 0.0 {
            return false;
        }
        prev = v;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_panel() {
        let v = integrate(|x| x * x, 0.0, 1.0, 1e-12);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_tail() {
        let v = integrate_tail(|r| (-r).exp(), 0.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_square_tail() {
        let v = integrate_tail(|r| r.powi(-2), 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn harmonic_tail_diverges() {
        assert!(integrate_tail(|r| 1.0 / (1.0 + r), 0.0, 1e-10).is_none());
    }

    #[test]
    fn slow_but_integrable_tails() {
        // r^-1.5 integrates to 2/sqrt(a)
        let v = integrate_tail(|r| r.powf(-1.5), 4.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "got {v}");

        // (1+r)^-1.1 from 0 integrates to 10
        let v = integrate_tail(|r| (1.0 + r).powf(-1.1), 0.0, 1e-10).unwrap();
        assert!((v - 10.0).abs() < 1e-7, "got {v}");

        // (1+r)^-1.02 from 0 integrates to 50
        let v = integrate_tail(|r| (1.0 + r).powf(-1.02), 0.0, 1e-9).unwrap();
        assert!((v - 50.0).abs() < 1e-5, "got {v}");
    }
}
