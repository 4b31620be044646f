use super::mollify::MollifierRule;
use super::penalized::PenalizedScene;
use crate::error::{LabError, Result};
use crate::rng::derive_seed;
use crate::spectral::{sample_gaussian, TailModel};

/// Step of the finite-difference Hessians.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Largest mollification width tried.
pub const ETA_START: f64 = 1.0;
/// Smallest mollification width tried before giving up.
pub const ETA_FLOOR: f64 = 1e-8;
const QUAD_ORDER: usize = 8;
const BISECTIONS: usize = 24;

/// The conditional expectation `φ_{ε,n}` of the penalized potential over the
/// coordinates beyond `n`, approximated with a fixed set of tail draws.
struct Averaged<'a> {
    scene: &'a PenalizedScene,
    kept: usize,
    tails: Vec<f64>,
}

impl Averaged<'_> {
    fn eval(&self, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let full = self.scene.model.dim();
        let tail_dim = full - self.kept;
        let mut x = vec![0.0; full];
        x[..self.kept].copy_from_slice(y);
        if tail_dim == 0 {
            let (v, g) = self.scene.evaluate(&x)?;
            return Ok((v, g));
        }
        let mut value = 0.0;
        let mut grad = vec![0.0; self.kept];
        let draws = self.tails.len() / tail_dim;
        for tail in self.tails.chunks(tail_dim) {
            x[self.kept..].copy_from_slice(tail);
            let (v, g) = self.scene.evaluate(&x)?;
            value += v;
            for i in 0..self.kept {
                grad[i] += g[i];
            }
        }
        let m = draws as f64;
        Ok((value / m, grad.into_iter().map(|g| g / m).collect()))
    }
}

fn fd_hessian<F>(grad: F, y: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = y.len();
    let mut h = vec![0.0; n * n];
    let mut yp = y.to_vec();
    let mut ym = y.to_vec();
    for j in 0..n {
        yp[j] = y[j] + HESSIAN_STEP;
        ym[j] = y[j] - HESSIAN_STEP;
        let gp = grad(&yp)?;
        let gm = grad(&ym)?;
        for i in 0..n {
            h[i * n + j] = (gp[i] - gm[i]) / (2.0 * HESSIAN_STEP);
        }
        yp[j] = y[j];
        ym[j] = y[j];
    }
    Ok(h)
}

/// Chooses a strictly decreasing sequence of mollification widths `η_n`.
///
/// For each `n`, the weighted mean (weights `e^{−φ_{ε,n}}` on Gaussian draws)
/// of the Frobenius distance between the finite-difference Hessians of
/// `φ_{ε,n}` and of its mollification must fall below `2^{−n}`. The largest
/// admissible width is located by a logarithmic bisection starting from
/// [`ETA_START`] (or half the previous width).
pub fn eta_schedule(
    scene: &PenalizedScene,
    n_list: &[usize],
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_list.is_empty() {
        return Err(LabError::invalid("n_list", "must not be empty"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::invalid("n_list", "must be strictly increasing"));
    }
    let full = scene.model.dim();
    if n_list[0] == 0 || *n_list.last().unwrap() > full {
        return Err(LabError::invalid(
            "n_list",
            format!("entries must lie in 1..={full}"),
        ));
    }
    if mc_samples == 0 {
        return Err(LabError::invalid("mc_samples", "must be positive"));
    }
    let mut schedule: Vec<f64> = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let tail = TailModel {
            variances: scene.model.variances()[n..].to_vec(),
        };
        let tails = if n < full {
            tail.sample(mc_samples, derive_seed(seed, 2 * n as u64))
        } else {
            Vec::new()
        };
        let averaged = Averaged {
            scene,
            kept: n,
            tails,
        };
        let reduced = scene.model.truncate(n)?;
        let points = sample_gaussian(&reduced, mc_samples, derive_seed(seed, 2 * n as u64 + 1))?;
        let rule = MollifierRule::new(n, QUAD_ORDER)?;
        let phi = |y: &[f64]| averaged.eval(y);

        let mut weights = Vec::with_capacity(points.len());
        let mut exact_hessians = Vec::with_capacity(points.len());
        for y in points.iter() {
            weights.push((-phi(y)?.0).exp());
            exact_hessians.push(fd_hessian(|z| Ok(phi(z)?.1), y)?);
        }
        let total: f64 = weights.iter().sum();
        let error_at = |eta: f64| -> Result<f64> {
            let mut acc = 0.0;
            for ((y, w), exact) in points.iter().zip(&weights).zip(&exact_hessians) {
                let smooth = fd_hessian(|z| Ok(rule.apply(&phi, eta, z)?.1), y)?;
                let frob: f64 = smooth
                    .iter()
                    .zip(exact)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                acc += w * frob;
            }
            Ok(acc / total)
        };

        let tol = 0.5f64.powi(n as i32);
        let start = schedule.last().map_or(ETA_START, |p| 0.5 * p);
        let mut best_error = error_at(start)?;
        if best_error < tol {
            schedule.push(start);
            continue;
        }
        let mut rejected = start;
        let mut accepted = None;
        let mut eta = start;
        while eta > ETA_FLOOR {
            eta *= 0.1;
            let e = error_at(eta)?;
            best_error = best_error.min(e);
            if e < tol {
                accepted = Some(eta);
                break;
            }
            rejected = eta;
        }
        let Some(mut good) = accepted else {
            return Err(LabError::ScheduleInfeasible {
                n,
                best_error,
                tolerance: tol,
            });
        };
        for _ in 0..BISECTIONS {
            let mid = (good * rejected).sqrt();
            if error_at(mid)? < tol {
                good = mid;
            } else {
                rejected = mid;
            }
        }
        schedule.push(good);
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{ConvexDomain, ConvexPotential};
    use crate::spectral::GaussianModel;

    #[test]
    fn smooth_full_dimension_accepts_first_width() {
        let model = GaussianModel::from_eigenvalues(&[1.0]).unwrap();
        let scene = PenalizedScene::new(model, ConvexPotential::quadratic(1.0), ConvexDomain::FullSpace, 0.1).unwrap();
        assert_eq!(eta_schedule(&scene, &[1], 16, 3).unwrap(), vec![ETA_START]);
    }

    #[test]
    fn half_space_schedule_decreases_and_is_reproducible() {
        let model = GaussianModel::from_eigenvalues(&[1.0, 0.5]).unwrap();
        let dom = ConvexDomain::axis_half_space(2, 0, 0.0, true);
        let scene = PenalizedScene::new(model, ConvexPotential::quadratic(1.0), dom, 0.1).unwrap();
        let a = eta_schedule(&scene, &[1, 2], 12, 5).unwrap();
        assert_eq!(a.len(), 2);
        assert!(a[0] > a[1] && a[1] > 0.0, "{a:?}");
        assert_eq!(a, eta_schedule(&scene, &[1, 2], 12, 5).unwrap());
    }
}
