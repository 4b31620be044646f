use crate::error::{LabError, Result};
use crate::quadrature::gauss_legendre;

/// Largest tensor rule (total node count) a mollification may use.
pub const MAX_NODES: usize = 1 << 20;

/// Value and gradient of a mollified function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollified {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// `|value(order) − value(order/2)|`, an a-posteriori quadrature error.
    pub error_bound: f64,
}

/// The unnormalized bump `exp(−1/(1 − |u|²))` on the unit ball.
pub fn bump(u: &[f64]) -> f64 {
    let r2: f64 = u.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Tensor Gauss-Legendre rule on `[-1, 1]ⁿ` weighted by the bump and
/// normalized to unit mass. Nodes with zero weight are dropped.
#[derive(Debug, Clone)]
pub struct MollifierRule {
    pub dim: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MollifierRule {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(LabError::QuadratureOrderTooLow { order });
        }
        let total = (order as f64).powi(dim as i32);
        if total > MAX_NODES as f64 {
            return Err(LabError::QuadratureBudgetExceeded(format!(
                "{order}^{dim} nodes exceed the budget of {MAX_NODES}"
            )));
        }
        let (x, w) = gauss_legendre(order)?;
        let total = total as usize;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut u = vec![0.0; dim];
        for k in 0..total {
            let mut idx = k;
            let mut wt = 1.0;
            for ui in u.iter_mut() {
                let j = idx % order;
                idx /= order;
                *ui = x[j];
                wt *= w[j];
            }
            let b = bump(&u);
            if b > 0.0 {
                nodes.extend_from_slice(&u);
                weights.push(wt * b);
            }
        }
        let mass: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= mass;
        }
        Ok(MollifierRule {
            dim,
            nodes,
            weights,
        })
    }

    /// `(φ * ρ_η)(x)` and its gradient, where `phi` returns value and gradient.
    pub fn apply<F>(&self, phi: &F, eta: f64, x: &[f64]) -> Result<(f64, Vec<f64>)>
    where
        F: Fn(&[f64]) -> Result<(f64, Vec<f64>)> + ?Sized,
    {
        let n = self.dim;
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        let mut y = vec![0.0; n];
        for (u, w) in self.nodes.chunks(n).zip(&self.weights) {
            for i in 0..n {
                y[i] = x[i] + eta * u[i];
            }
            let (v, g) = phi(&y)?;
            value += w * v;
            for i in 0..n {
                grad[i] += w * g[i];
            }
        }
        Ok((value, grad))
    }
}

/// Convolution of `phi` with the bump mollifier of radius `eta`, computed by
/// a tensor Gauss-Legendre rule of `quad_order` points per axis.
pub fn mollify_potential<F>(phi: &F, eta: f64, x: &[f64], quad_order: usize) -> Result<Mollified>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)> + ?Sized,
{
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(LabError::invalid("eta", "must be positive"));
    }
    let rule = MollifierRule::new(x.len(), quad_order)?;
    let (value, gradient) = rule.apply(phi, eta, x)?;
    let coarse = MollifierRule::new(x.len(), (quad_order / 2).max(2))?;
    let (coarse_value, _) = coarse.apply(phi, eta, x)?;
    Ok(Mollified {
        value,
        gradient,
        error_bound: (value - coarse_value).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn abs1(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((x[0].abs(), vec![x[0].signum()]))
    }

    #[test]
    fn affine_functions_are_fixed() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((2.0 * x[0] - x[1] + 0.5, vec![2.0, -1.0])) };
        let m = mollify_potential(&f, 0.3, &[0.2, -1.1], 8).unwrap();
        assert!((m.value - (0.4 + 1.1 + 0.5)).abs() < 1e-12);
        assert!((m.gradient[0] - 2.0).abs() < 1e-12 && (m.gradient[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn absolute_value_at_the_kink() {
        let m = mollify_potential(&abs1, 0.1, &[0.0], 64).unwrap();
        assert!(m.value > 0.0 && m.value <= 0.1);
        // Independent adaptive integration of the same convolution.
        let mass = integrate(|u| bump(&[u]), -1.0, 1.0, 1e-14, 1e-14, 500).unwrap().value;
        let num = integrate(|u| 0.1 * u.abs() * bump(&[u]), -1.0, 1.0, 1e-14, 1e-14, 500).unwrap().value;
        assert!((m.value - num / mass).abs() < 1e-3 * num / mass, "{} vs {}", m.value, num / mass);
    }

    #[test]
    fn approximate_identity() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> { Ok(((3.0 * x[0]).sin(), vec![3.0 * (3.0 * x[0]).cos()])) };
        let target = 0.6f64.sin();
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let eta = 0.5f64.powi(k);
            let gap = (mollify_potential(&f, eta, &[0.2], 16).unwrap().value - target).abs();
            assert!(gap <= prev);
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn order_and_budget_limits() {
        assert!(matches!(mollify_potential(&abs1, 0.1, &[0.0], 1), Err(LabError::QuadratureOrderTooLow { .. })));
        assert!(matches!(MollifierRule::new(6, 11), Err(LabError::QuadratureBudgetExceeded(_))));
    }
}
