//! Cylindrical test functions with analytic gradients.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LabError, Result};

/// Steepness beyond which a `tanh` is tagged as approximating a jump.
const JUMP_STEEPNESS: f64 = 20.0;

/// A test function of the model coordinates. Coefficient vectors shorter
/// than the dimension are padded with zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// `⟨a, ξ⟩ + offset`.
    Affine {
        coefficients: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `Σ cᵢ ξᵢ² + offset`.
    Quadratic {
        coefficients: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `Σ c_k ξ_axis^k`.
    Polynomial {
        #[serde(default)]
        axis: usize,
        coefficients: Vec<f64>,
    },
    /// `scale · e^{⟨a, ξ⟩}`.
    Exponential {
        coefficients: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `tanh(⟨a, ξ⟩ − shift)`.
    Tanh {
        coefficients: Vec<f64>,
        #[serde(default)]
        shift: f64,
    },
    /// `sin(⟨a, ξ⟩ + phase)`.
    Sine {
        coefficients: Vec<f64>,
        #[serde(default)]
        phase: f64,
    },
    /// `atan(⟨a, ξ⟩ − shift)`.
    Arctan {
        coefficients: Vec<f64>,
        #[serde(default)]
        shift: f64,
    },
    /// `1 / (1 + ⟨a, ξ⟩²)`.
    Rational {
        coefficients: Vec<f64>,
    },
    /// `exp(−|ξ − c|² / (2w²))`.
    Bump {
        center: Vec<f64>,
        width: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(a, x)| a * x).sum()
}

fn scaled(a: &[f64], s: f64, out: &mut [f64]) {
    out.fill(0.0);
    for (o, a) in out.iter_mut().zip(a) {
        *o = s * a;
    }
}

impl TestFunction {
    pub fn constant(value: f64) -> Self {
        TestFunction::Constant { value }
    }

    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut coefficients = vec![0.0; dim];
        coefficients[axis] = 1.0;
        TestFunction::Affine {
            coefficients,
            offset: 0.0,
        }
    }

    pub fn tanh(steepness: f64) -> Self {
        TestFunction::Tanh {
            coefficients: vec![steepness],
            shift: 0.0,
        }
    }

    pub fn exponential(a: f64) -> Self {
        TestFunction::Exponential {
            coefficients: vec![a],
            scale: 1.0,
        }
    }

    fn coefficients(&self) -> Option<&[f64]> {
        match self {
            TestFunction::Affine { coefficients, .. }
            | TestFunction::Quadratic { coefficients, .. }
            | TestFunction::Exponential { coefficients, .. }
            | TestFunction::Tanh { coefficients, .. }
            | TestFunction::Sine { coefficients, .. }
            | TestFunction::Arctan { coefficients, .. }
            | TestFunction::Rational { coefficients } => Some(coefficients),
            _ => None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(c) = self.coefficients() {
            if c.len() > dim {
                return Err(LabError::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(LabError::invalid("coefficients", "must be finite"));
            }
        }
        match self {
            TestFunction::Polynomial { axis, .. } if *axis >= dim => {
                Err(LabError::invalid("axis", format!("axis {axis} out of range for dimension {dim}")))
            }
            TestFunction::Bump { center, width } => {
                check_dim(dim, center.len())?;
                if !(*width > 0.0) {
                    return Err(LabError::invalid("width", "must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Affine { coefficients, offset } => dot(coefficients, x) + offset,
            TestFunction::Quadratic { coefficients, offset } => {
                coefficients.iter().zip(x).map(|(c, x)| c * x * x).sum::<f64>() + offset
            }
            TestFunction::Polynomial { axis, coefficients } => crate::oracle::horner(coefficients, x[*axis]),
            TestFunction::Exponential { coefficients, scale } => scale * dot(coefficients, x).exp(),
            TestFunction::Tanh { coefficients, shift } => (dot(coefficients, x) - shift).tanh(),
            TestFunction::Sine { coefficients, phase } => (dot(coefficients, x) + phase).sin(),
            TestFunction::Arctan { coefficients, shift } => (dot(coefficients, x) - shift).atan(),
            TestFunction::Rational { coefficients } => 1.0 / (1.0 + dot(coefficients, x).powi(2)),
            TestFunction::Bump { center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            TestFunction::Constant { .. } => out.fill(0.0),
            TestFunction::Affine { coefficients, .. } => scaled(coefficients, 1.0, out),
            TestFunction::Quadratic { coefficients, .. } => {
                out.fill(0.0);
                for ((o, c), x) in out.iter_mut().zip(coefficients).zip(x) {
                    *o = 2.0 * c * x;
                }
            }
            TestFunction::Polynomial { axis, coefficients } => {
                out.fill(0.0);
                let derivative: Vec<f64> = coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| k as f64 * c)
                    .collect();
                out[*axis] = crate::oracle::horner(&derivative, x[*axis]);
            }
            TestFunction::Exponential { coefficients, scale } => {
                scaled(coefficients, scale * dot(coefficients, x).exp(), out)
            }
            TestFunction::Tanh { coefficients, shift } => {
                let t = (dot(coefficients, x) - shift).tanh();
                scaled(coefficients, 1.0 - t * t, out)
            }
            TestFunction::Sine { coefficients, phase } => {
                scaled(coefficients, (dot(coefficients, x) + phase).cos(), out)
            }
            TestFunction::Arctan { coefficients, shift } => {
                let u = dot(coefficients, x) - shift;
                scaled(coefficients, 1.0 / (1.0 + u * u), out)
            }
            TestFunction::Rational { coefficients } => {
                let u = dot(coefficients, x);
                scaled(coefficients, -2.0 * u / (1.0 + u * u).powi(2), out)
            }
            TestFunction::Bump { center, width } => {
                let v = self.value(x);
                let w2 = width * width;
                for i in 0..out.len() {
                    out[i] = -v * (x[i] - center[i]) / w2;
                }
            }
        }
    }

    pub fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient(x, &mut g);
        g
    }

    pub fn gradient_norm(&self, x: &[f64]) -> f64 {
        self.gradient_vec(x).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn is_flat(&self) -> bool {
        self.coefficients().is_some_and(|c| c.iter().all(|v| *v == 0.0))
    }

    /// Analytic sup norm over the whole space, `None` when unbounded.
    pub fn sup_norm(&self) -> Option<f64> {
        if self.is_flat() {
            return Some(self.value(&[]).abs());
        }
        match self {
            TestFunction::Constant { value } => Some(value.abs()),
            TestFunction::Polynomial { coefficients, .. } if coefficients.len() <= 1 => {
                Some(coefficients.first().map_or(0.0, |c| c.abs()))
            }
            TestFunction::Tanh { .. } | TestFunction::Sine { .. } => Some(1.0),
            TestFunction::Rational { .. } | TestFunction::Bump { .. } => Some(1.0),
            TestFunction::Arctan { .. } => Some(FRAC_PI_2),
            _ => None,
        }
    }

    pub fn tags(&self) -> Vec<&'static str> {
        let mut tags = vec!["smooth"];
        if self.sup_norm().is_some() {
            tags.push("bounded");
        }
        if matches!(
            self,
            TestFunction::Constant { .. }
                | TestFunction::Affine { .. }
                | TestFunction::Tanh { .. }
                | TestFunction::Sine { .. }
                | TestFunction::Arctan { .. }
                | TestFunction::Rational { .. }
                | TestFunction::Bump { .. }
        ) {
            tags.push("lipschitz");
        }
        if let TestFunction::Tanh { coefficients, .. } = self {
            if coefficients.iter().map(|c| c * c).sum::<f64>().sqrt() >= JUMP_STEEPNESS {
                tags.push("jump_approximation");
            }
        }
        tags
    }
}

/// The standard battery of twenty test functions in dimension `dim`.
pub fn standard_battery(dim: usize) -> Vec<(String, TestFunction)> {
    let e = |i: usize, s: f64| {
        let mut c = vec![0.0; dim];
        c[i.min(dim - 1)] = s;
        c
    };
    let mixed = |a: f64, b: f64| if dim > 1 { vec![a, b] } else { vec![a + b] };
    let items = vec![
        ("coordinate", TestFunction::Affine { coefficients: e(0, 1.0), offset: 0.0 }),
        ("affine_mixed", TestFunction::Affine { coefficients: mixed(1.0, -0.5), offset: 0.7 }),
        ("square", TestFunction::Quadratic { coefficients: e(0, 1.0), offset: 0.0 }),
        ("square_last", TestFunction::Quadratic { coefficients: e(dim - 1, 0.5), offset: 1.0 }),
        ("cubic", TestFunction::Polynomial { axis: 0, coefficients: vec![0.0, -1.0, 0.0, 1.0] }),
        ("tanh", TestFunction::Tanh { coefficients: e(0, 1.0), shift: 0.0 }),
        ("tanh_steep_shifted", TestFunction::Tanh { coefficients: e(0, 3.0), shift: 0.5 }),
        ("tanh_mixed", TestFunction::Tanh { coefficients: mixed(1.0, 1.0), shift: 0.0 }),
        ("tanh_jump", TestFunction::Tanh { coefficients: e(0, 5.0), shift: 0.0 }),
        ("sine", TestFunction::Sine { coefficients: e(0, 1.0), phase: 0.0 }),
        ("sine_fast", TestFunction::Sine { coefficients: mixed(2.0, 0.5), phase: 0.3 }),
        ("cosine", TestFunction::Sine { coefficients: e(0, 1.0), phase: PI / 2.0 }),
        ("bump", TestFunction::Bump { center: vec![0.0; dim], width: 1.0 }),
        ("bump_offset", TestFunction::Bump { center: vec![0.5; dim], width: 0.7 }),
        ("arctan", TestFunction::Arctan { coefficients: e(0, 1.0), shift: 0.0 }),
        ("arctan_shifted", TestFunction::Arctan { coefficients: mixed(2.0, -1.0), shift: 1.0 }),
        ("rational", TestFunction::Rational { coefficients: e(0, 1.0) }),
        ("exp_up", TestFunction::Exponential { coefficients: e(0, 0.5), scale: 1.0 }),
        ("exp_down", TestFunction::Exponential { coefficients: mixed(-0.3, 0.2), scale: 2.0 }),
        ("constant", TestFunction::Constant { value: 2.0 }),
    ];
    items.into_iter().map(|(n, f)| (n.to_string(), f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn gradients_match_finite_differences(k in 0usize..20, x in proptest::array::uniform2(-2f64..2.0)) {
            let (_, f) = &standard_battery(2)[k];
            let h = 1e-5;
            let g = f.gradient_vec(&x);
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "{k} {i} {fd} {}", g[i]);
            }
            if let Some(s) = f.sup_norm() {
                prop_assert!(f.value(&x).abs() <= s + 1e-12);
            }
        }
    }

    #[test]
    fn battery_is_valid_and_toml_round_trips() {
        for dim in [1, 2] {
            let battery = standard_battery(dim);
            assert_eq!(battery.len(), 20);
            for (_, f) in &battery {
                f.validate(dim).unwrap();
                let text = toml::to_string(f).unwrap();
                let back: TestFunction = toml::from_str(&text).unwrap();
                assert_eq!(&back, f);
            }
        }
        assert!(TestFunction::tanh(50.0).tags().contains(&"jump_approximation"));
        assert!(TestFunction::coordinate(1, 0).validate(2).is_ok());
        assert!(TestFunction::Affine { coefficients: vec![1.0, 2.0], offset: 0.0 }.validate(1).is_err());
    }
}
