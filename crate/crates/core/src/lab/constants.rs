//! Constants of the functional inequalities.

use crate::error::{LabError, Result};

const SCAN_POINTS: usize = 4000;
const GOLDEN_ITERATIONS: usize = 200;

/// Minimum of `g` on `[lo, hi]`: a uniform scan followed by golden-section
/// refinement around the best scan point.
fn minimize(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let h = (hi - lo) / SCAN_POINTS as f64;
    let mut best = (lo, g(lo));
    for i in 1..=SCAN_POINTS {
        let s = lo + i as f64 * h;
        let v = g(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..GOLDEN_ITERATIONS {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if g(c) < g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    let v = g(s);
    if v < best.1 {
        (s, v)
    } else {
        best
    }
}

/// `c_p = min_η η^{2/p}/(2(p−1)) + (1 − p/2) η^{2/(p−2)}` for `p ∈ (1, 2)`,
/// minimised in `log η`; `c₂ = 1/2` is the limit at `p = 2`.
pub fn young_constant(p: f64) -> Result<f64> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(LabError::invalid("p", "the Young constant needs p in (1, 2]"));
    }
    if p == 2.0 {
        return Ok(0.5);
    }
    let g = |s: f64| (2.0 * s / p).exp() / (2.0 * (p - 1.0)) + (1.0 - p / 2.0) * (2.0 * s / (p - 2.0)).exp();
    let (_, v) = minimize(g, -60.0, 60.0);
    Ok(v)
}

/// `K_p` of the integrated smoothing bound `|∇T(t)f|^p ≤ K_p t^{−p/2} T(t)|f|^p`.
pub fn smoothing_constant(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(LabError::invalid("p", "must lie in (1, ∞)"));
    }
    if p <= 2.0 {
        young_constant(p)
    } else {
        Ok(young_constant(2.0)?.powf(p / 2.0))
    }
}

/// `C_p = K_p^{1/p} e^{1/λ₁}` of the gradient decay bound for `t ≥ 1`.
pub fn gradient_decay_constant(p: f64, lambda1: f64) -> Result<f64> {
    Ok(smoothing_constant(p)?.powf(1.0 / p) * (1.0 / lambda1).exp())
}

/// Largest exponent reachable from `L^q` at time `t`: `(q − 1)e^{2t/λ₁} + 1`.
pub fn hyper_exponent(q: f64, t: f64, lambda1: f64) -> f64 {
    (q - 1.0) * (2.0 * t / lambda1).exp() + 1.0
}

/// Coefficient `p²λ₁/2` of the energy term in the log-Sobolev inequality.
pub fn logsob_coefficient(p: f64, lambda1: f64) -> f64 {
    p * p * lambda1 / 2.0
}

/// `p`-th power of the Poincaré constant for `p > 2` by the doubling
/// recursion: minimise `[λ₁p/(2η^{p/2}) + B] / (1 − λ₁p(p−2)η^{p/(p−2)}/4)`
/// over the `η` keeping the denominator positive, with `B = λ₁^{p/2}` for
/// `p ≤ 4` and `B` the square of the value at `p/2` beyond.
fn poincare_power(p: f64, lambda1: f64) -> f64 {
    let base = if p <= 4.0 {
        lambda1.powf(p / 2.0)
    } else {
        poincare_power(p / 2.0, lambda1).powi(2)
    };
    // Denominator vanishes at log η = ((p−2)/p)·log(4/(λ₁p(p−2))).
    let s_max = (p - 2.0) / p * (4.0 / (lambda1 * p * (p - 2.0))).ln();
    let g = |s: f64| {
        let den = 1.0 - lambda1 * p * (p - 2.0) * (p * s / (p - 2.0)).exp() / 4.0;
        if den <= 0.0 {
            f64::INFINITY
        } else {
            (lambda1 * p / (2.0 * (p * s / 2.0).exp()) + base) / den
        }
    };
    minimize(g, s_max - 60.0, s_max).1
}

/// Constant `K` of `‖f − m(f)‖_p ≤ K‖∇f‖_p`: `√λ₁` at `p = 2`, the
/// `p`-th root of the recursion value for `p > 2`.
pub fn poincare_constant(p: f64, lambda1: f64) -> Result<f64> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(LabError::invalid("p", "the Poincaré check needs p in [2, ∞)"));
    }
    if !(lambda1 > 0.0) {
        return Err(LabError::invalid("lambda1", "must be positive"));
    }
    if p == 2.0 {
        return Ok(lambda1.sqrt());
    }
    Ok(poincare_power(p, lambda1).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn young_constant_against_dense_scan() {
        for &p in &[1.2, 1.5, 1.8, 1.95] {
            let c = young_constant(p).unwrap();
            let mut best = f64::INFINITY;
            for i in 1..200_000 {
                let eta = i as f64 * 1e-4;
                let v = eta.powf(2.0 / p) / (2.0 * (p - 1.0)) + (1.0 - p / 2.0) * eta.powf(2.0 / (p - 2.0));
                best = best.min(v);
            }
            assert!(c <= best + 1e-9 && c > best - 1e-6, "{p} {c} {best}");
        }
        let near = young_constant(1.999).unwrap();
        assert!((near - 0.5).abs() < 5e-3, "{near}");
        assert_eq!(smoothing_constant(4.0).unwrap(), 0.25);
    }

    #[test]
    fn exponent_and_coefficients() {
        assert!((hyper_exponent(2.0, 3f64.ln() / 2.0, 1.0) - 4.0).abs() < 1e-12);
        assert_eq!(logsob_coefficient(2.0, 1.0), 2.0);
        assert_eq!(poincare_constant(2.0, 4.0).unwrap(), 2.0);
        let k3 = poincare_constant(3.0, 1.0).unwrap();
        let k6 = poincare_constant(6.0, 1.0).unwrap();
        assert!(k3.is_finite() && k3 > 1.0 && k6.is_finite(), "{k3} {k6}");
        assert!(poincare_constant(1.5, 1.0).is_err());
    }
}
