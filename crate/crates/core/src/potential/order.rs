use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{PotentialError, PotentialSpec, Result};
use crate::rng;

/// `m(x, ξ) = 1 + (ξ - A(x))² + V₁(x) + |V₂'(x)|²`
pub fn order_function(spec: &PotentialSpec, x: &[f64], xi: &[f64]) -> f64 {
    let e = spec.evaluate(x);
    let kin: f64 = xi.iter().zip(&e.a).map(|(p, a)| (p - a) * (p - a)).sum();
    1.0 + kin + e.v1() + e.grad_v2_sq()
}

/// `|∇m| / m^{1/2}` at a phase-space point.
fn gradient_ratio(spec: &PotentialSpec, x: &[f64], xi: &[f64]) -> f64 {
    let n = spec.dim();
    let e = spec.evaluate(x);
    let d: Vec<f64> = xi.iter().zip(&e.a).map(|(p, a)| p - a).collect();
    let b = spec.a_jacobian();
    let grad_v2: Vec<f64> = e.grad_v.iter().map(|g| g.im).collect();
    let mut grad_sq = 0.0;
    for k in 0..n {
        // ∂_{x_k}: -2 Σ_j B_jk d_j + ∂_k V₁ + 2 Σ_j ∂_jk V₂ ∂_j V₂
        let mut gk = e.grad_v[k].re;
        for j in 0..n {
            gk += -2.0 * b[(j, k)] * d[j] + 2.0 * e.hess_v[(j, k)].im * grad_v2[j];
        }
        grad_sq += gk * gk;
        grad_sq += 4.0 * d[k] * d[k];
    }
    let m = 1.0 + d.iter().map(|v| v * v).sum::<f64>() + e.v1() + e.grad_v2_sq();
    grad_sq.sqrt() / m.sqrt()
}

fn ball_point(dim: usize, radius: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    for v in d.iter_mut() {
        *v *= r / nrm;
    }
    d
}

/// Radius of the phase-space ball sampled by the order-function checks.
pub const ORDER_BALL_RADIUS: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderCheck {
    /// `max m(X) / (⟨X - Y⟩^{1/(1-γ)} m(Y))` over the sampled pairs.
    pub constant: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Samples the temperance inequality `m(X) <= C ⟨X - Y⟩^{1/(1-γ)} m(Y)`.
///
/// Only `γ = 1/2` is supported, the exponent for which `∇m = O(m^γ)` holds
/// for every catalog potential.
pub fn check_order_property(
    spec: &PotentialSpec,
    gamma: f64,
    trials: usize,
    seed: u64,
) -> Result<OrderCheck> {
    if gamma != 0.5 {
        return Err(PotentialError::InvalidArgument(format!(
            "gamma = {gamma}; only 1/2 is supported"
        )));
    }
    let n = spec.dim();
    let exponent = 1.0 / (1.0 - gamma);
    let mut g = rng::stream(seed, "order/pairs");
    let mut best = OrderCheck {
        constant: 0.0,
        x: vec![],
        y: vec![],
    };
    for _ in 0..trials {
        let x = ball_point(2 * n, ORDER_BALL_RADIUS, &mut g);
        let y = ball_point(2 * n, ORDER_BALL_RADIUS, &mut g);
        let dist_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let bracket = (1.0 + dist_sq).powf(exponent / 2.0);
        let mx = order_function(spec, &x[..n], &x[n..]);
        let my = order_function(spec, &y[..n], &y[n..]);
        let c = mx / (bracket * my);
        if c > best.constant {
            best = OrderCheck { constant: c, x, y };
        }
    }
    Ok(best)
}

/// Sampled `sup |∇m| / m^{1/2}` over the phase-space ball.
pub fn order_gradient_ratio(spec: &PotentialSpec, samples: usize, seed: u64) -> f64 {
    let n = spec.dim();
    let mut g = rng::stream(seed, "order/gradient");
    (0..samples)
        .map(|_| {
            let p = ball_point(2 * n, ORDER_BALL_RADIUS, &mut g);
            gradient_ratio(spec, &p[..n], &p[n..])
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::potential::PotentialTerm;

    fn rotated() -> PotentialSpec {
        PotentialSpec::electric(
            1,
            vec![PotentialTerm::Monomial {
                coeff: C64::new(1.0, 1.0),
                powers: vec![2],
            }],
        )
        .unwrap()
    }

    #[test]
    fn order_function_values() {
        let zero = PotentialSpec::electric(1, vec![]).unwrap();
        assert_eq!(order_function(&zero, &[0.0], &[0.0]), 1.0);
        assert_eq!(order_function(&rotated(), &[1.0], &[1.0]), 7.0);
    }

    #[test]
    fn order_constant_is_finite_and_stable() {
        let s = rotated();
        let c1 = check_order_property(&s, 0.5, 10_000, 3).unwrap().constant;
        let c2 = check_order_property(&s, 0.5, 20_000, 3).unwrap().constant;
        assert!(c1.is_finite() && c1 >= 1.0 / 4.0);
        assert!(c2 / c1 < 2.0);
        assert!(check_order_property(&s, 0.3, 10, 3).is_err());
    }

    #[test]
    fn gradient_ratio_is_bounded() {
        let r = order_gradient_ratio(&rotated(), 10_000, 1);
        assert!(r.is_finite() && r < 10.0, "{r}");
    }
}
