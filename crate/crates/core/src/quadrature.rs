//! Double-exponential (tanh-sinh) quadrature.
//!
//! Integrands receive the abscissa together with its distances to both
//! endpoints, computed without cancellation, so algebraic endpoint
//! singularities such as |x − a|^{θ−1} with θ < 1 are evaluated accurately.

use crate::error::{Error, Result};

/// Abscissa and its complements, `x - a` and `b - x`.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub x: f64,
    pub from_left: f64,
    pub from_right: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Change between the last two levels.
    pub last_change: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct TanhSinh {
    pub rel_tol: f64,
    /// Estimates closer than this are accepted regardless of their magnitude.
    pub abs_tol: f64,
    pub max_level: u32,
    /// Truncation of the transformed axis.
    pub t_max: f64,
}

impl Default for TanhSinh {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-250,
            max_level: 10,
            t_max: 4.5,
        }
    }
}

impl TanhSinh {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    /// ∫_a^b f. Levels halve the step until two successive estimates agree.
    pub fn integrate<F: FnMut(Node) -> f64>(&self, a: f64, b: f64, f: F) -> Result<f64> {
        let est = self.estimate(a, b, f)?;
        if est.converged {
            Ok(est.value)
        } else {
            Err(Error::Quadrature(format!(
                "no convergence to {:.1e} on [{a}, {b}] after {} levels (last change {:.1e})",
                self.rel_tol, self.max_level, est.last_change
            )))
        }
    }

    /// Like [`integrate`](Self::integrate) but returns the final estimate even
    /// when the tolerance was not met.
    pub fn estimate<F: FnMut(Node) -> f64>(&self, a: f64, b: f64, mut f: F) -> Result<Estimate> {
        if !(b > a) {
            return if a == b {
                Ok(Estimate {
                    value: 0.0,
                    last_change: 0.0,
                    converged: true,
                })
            } else {
                Err(Error::Quadrature(format!("empty interval [{a}, {b}]")))
            };
        }
        let half = 0.5 * (b - a);
        let half_pi = std::f64::consts::FRAC_PI_2;

        let mut eval = |t: f64| -> f64 {
            let u = half_pi * t.sinh();
            let e2 = (-2.0 * u.abs()).exp();
            // 1 ∓ tanh(u) written without cancellation
            let (left, right) = if u >= 0.0 {
                (2.0 * half / (1.0 + e2), 2.0 * half * e2 / (1.0 + e2))
            } else {
                (2.0 * half * e2 / (1.0 + e2), 2.0 * half / (1.0 + e2))
            };
            if left <= 0.0 || right <= 0.0 {
                return 0.0;
            }
            let cosh_u = u.cosh();
            let w = half * half_pi * t.cosh() / (cosh_u * cosh_u);
            if w == 0.0 || !w.is_finite() {
                return 0.0;
            }
            let x = if u >= 0.0 { b - right } else { a + left };
            let v = f(Node {
                x,
                from_left: left,
                from_right: right,
            });
            if v == 0.0 {
                0.0
            } else {
                w * v
            }
        };

        let mut h = 1.0;
        let mut sum = eval(0.0);
        let mut k = 1.0;
        while k * h <= self.t_max {
            sum += eval(k * h) + eval(-k * h);
            k += 1.0;
        }
        let mut estimate = h * sum;
        let mut diff = f64::INFINITY;
        for _level in 1..=self.max_level {
            h *= 0.5;
            let mut j = 1.0;
            while j * h <= self.t_max {
                sum += eval(j * h) + eval(-j * h);
                j += 2.0;
            }
            let next = h * sum;
            if !next.is_finite() {
                return Err(Error::Quadrature(format!(
                    "non-finite estimate on [{a}, {b}]"
                )));
            }
            diff = (next - estimate).abs();
            estimate = next;
            if diff <= self.rel_tol * next.abs() || diff <= self.abs_tol {
                return Ok(Estimate {
                    value: estimate,
                    last_change: diff,
                    converged: true,
                });
            }
        }
        Ok(Estimate {
            value: estimate,
            last_change: diff,
            converged: false,
        })
    }
}

/// ∫_a^b f with the default rule.
pub fn integrate<F: FnMut(Node) -> f64>(a: f64, b: f64, f: F) -> Result<f64> {
    TanhSinh::default().integrate(a, b, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_and_singular_integrands() {
        let v = integrate(0.0, 1.0, |n| n.x * n.x).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        // ∫_0^1 x^{-1/2} (1-x)^{-1/2} dx = π
        let v = integrate(0.0, 1.0, |n| (n.from_left * n.from_right).powf(-0.5)).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-9, "{v}");
        // Beta(2,2) = 1/6
        let v = integrate(0.0, 1.0, |n| n.from_left * n.from_right).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-12);
        let v = integrate(-3.0, 2.0, |n| (-n.x * n.x / 2.0).exp()).unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt()
            * (statrs::function::erf::erf(2.0 / 2f64.sqrt())
                + statrs::function::erf::erf(3.0 / 2f64.sqrt()))
            / 2.0;
        assert!((v - exact).abs() < 1e-11);
    }
}
