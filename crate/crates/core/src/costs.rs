//! Cost functions C(x, p) acting on a point and a distribution.
//!
//! The built-in family is barycentric: C(x, p) = theta(x - mean(p)),
//! so the cost sees p only through its barycenter. theta is one of
//! |z|^2, |z|, or |z|^t with t >= 1; all three are convex, lower
//! semicontinuous, and nonnegative. User-supplied costs plug in
//! through a callback trait.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float;
use crate::measures::dist;

/// Convex radial profiles for barycentric costs.
///
/// `Power(t)` requires t >= 1 (convexity). The constructor used by
/// [`CostFunction::barycentric_power`] folds t = 1 into `Euclidean`
/// and t = 2 into `Quadratic` so downstream closed forms apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta {
    /// theta(z) = |z|^2.
    Quadratic,
    /// theta(z) = |z|.
    Euclidean,
    /// theta(z) = |z|^t, t >= 1.
    Power(f64),
}

impl Theta {
    fn value(&self, residual: &[f64]) -> f64 {
        let ss: f64 = residual.iter().map(|r| r * r).sum();
        match *self {
            Theta::Quadratic => ss,
            Theta::Euclidean => float::sqrt(ss),
            Theta::Power(t) => float::powf(ss, t / 2.0),
        }
    }

    /// Gradient of theta at the residual; at kinks (the origin for
    /// t < 2) the zero subgradient is chosen.
    fn gradient(&self, residual: &[f64]) -> Vec<f64> {
        let ss: f64 = residual.iter().map(|r| r * r).sum();
        match *self {
            Theta::Quadratic => residual.iter().map(|r| 2.0 * r).collect(),
            Theta::Euclidean => {
                if ss == 0.0 {
                    residual.iter().map(|_| 0.0).collect()
                } else {
                    let n = float::sqrt(ss);
                    residual.iter().map(|r| r / n).collect()
                }
            }
            Theta::Power(t) => {
                if ss == 0.0 {
                    residual.iter().map(|_| 0.0).collect()
                } else {
                    // t |z|^(t-2) z, written through |z|^2 to avoid a root.
                    let scale = t * float::powf(ss, t / 2.0 - 1.0);
                    residual.iter().map(|r| scale * r).collect()
                }
            }
        }
    }

    /// theta'(s) for scalar s >= 0, the slope used in Lipschitz bounds.
    fn slope(&self, s: f64) -> f64 {
        match *self {
            Theta::Quadratic => 2.0 * s,
            Theta::Euclidean => 1.0,
            Theta::Power(t) => t * float::powf(s, t - 1.0),
        }
    }
}

/// User-supplied cost C(x, p) on distributions over a finite support.
///
/// `value` receives the evaluation point x, the support points of p,
/// and the weights of p (same length as the support). `grad_weights`
/// may return the gradient of C(x, .) in the weights; costs without
/// one cannot drive gradient-based solvers.
pub trait CustomCost: Send + Sync {
    /// C(x, p).
    fn value(&self, x: &[f64], support: &[Vec<f64>], weights: &[f64]) -> f64;

    /// dC/dp_j at (x, p), if an analytic form is available.
    fn grad_weights(&self, x: &[f64], support: &[Vec<f64>], weights: &[f64]) -> Option<Vec<f64>> {
        let _ = (x, support, weights);
        None
    }
}

enum Kind {
    Barycentric(Theta),
    Custom(Arc<dyn CustomCost>),
}

impl Clone for Kind {
    fn clone(&self) -> Self {
        match self {
            Kind::Barycentric(t) => Kind::Barycentric(*t),
            Kind::Custom(c) => Kind::Custom(Arc::clone(c)),
        }
    }
}

impl core::fmt::Debug for Kind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Kind::Barycentric(t) => write!(f, "Barycentric({t:?})"),
            Kind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A Lipschitz constant for p -> C(x, p) in the 1-Wasserstein metric,
/// together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBound {
    /// The constant L with |C(x,p) - C(x,q)| <= L W1(p, q).
    pub value: f64,
    /// True when the constant is the coarse finite-support fallback
    /// (a maximum of gradient norms over the polytope) rather than a
    /// bound supplied with the cost.
    pub coarse: bool,
}

/// A cost function with optional Lipschitz metadata.
#[derive(Debug, Clone)]
pub struct CostFunction {
    kind: Kind,
    lipschitz: Option<f64>,
}

impl CostFunction {
    /// Barycentric cost with theta(z) = |z|^2. Moves by W1 distance w
    /// shift the barycenter by at most w, so no global Lipschitz bound
    /// exists; the finite-support fallback supplies one when needed.
    pub fn barycentric_quadratic() -> Self {
        Self {
            kind: Kind::Barycentric(Theta::Quadratic),
            lipschitz: None,
        }
    }

    /// Barycentric cost with theta(z) = |z|, globally 1-Lipschitz in
    /// the 1-Wasserstein metric.
    pub fn barycentric_euclidean() -> Self {
        Self {
            kind: Kind::Barycentric(Theta::Euclidean),
            lipschitz: Some(1.0),
        }
    }

    /// Barycentric cost with theta(z) = |z|^t, t >= 1. t = 1 and t = 2
    /// collapse to the euclidean and quadratic kinds.
    pub fn barycentric_power(t: f64) -> Result<Self> {
        if !t.is_finite() || t < 1.0 {
            return Err(Error::InvalidInput(format!(
                "power exponent must be finite and >= 1, got {t}"
            )));
        }
        if t == 1.0 {
            return Ok(Self::barycentric_euclidean());
        }
        if t == 2.0 {
            return Ok(Self::barycentric_quadratic());
        }
        Ok(Self {
            kind: Kind::Barycentric(Theta::Power(t)),
            lipschitz: None,
        })
    }

    /// Wraps a user-supplied cost.
    pub fn custom(cost: Arc<dyn CustomCost>) -> Self {
        Self {
            kind: Kind::Custom(cost),
            lipschitz: None,
        }
    }

    /// Attaches a Lipschitz constant supplied by the caller.
    pub fn with_lipschitz_bound(mut self, l: f64) -> Result<Self> {
        if !l.is_finite() || l < 0.0 {
            return Err(Error::InvalidInput(format!(
                "Lipschitz bound must be finite and nonnegative, got {l}"
            )));
        }
        self.lipschitz = Some(l);
        Ok(self)
    }

    /// The stored Lipschitz constant, if any.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz
    }

    /// The theta profile when this is a barycentric cost.
    pub fn theta(&self) -> Option<Theta> {
        match &self.kind {
            Kind::Barycentric(t) => Some(*t),
            Kind::Custom(_) => None,
        }
    }

    /// True for the barycentric quadratic cost, which admits closed-form
    /// line searches and stationarity systems.
    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, Kind::Barycentric(Theta::Quadratic))
    }

    /// C(x, p) for p given by `weights` on `support`.
    pub fn eval(&self, x: &[f64], support: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
        self.check_shapes(x, support, weights)?;
        match &self.kind {
            Kind::Barycentric(theta) => Ok(theta.value(&residual(x, support, weights))),
            Kind::Custom(c) => Ok(c.value(x, support, weights)),
        }
    }

    /// Gradient of C(x, .) in the weights: for barycentric costs,
    /// g_j = <grad theta(x - mean p), -y_j>. Errors when a custom cost
    /// provides no gradient.
    pub fn grad_weights(&self, x: &[f64], support: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
        self.check_shapes(x, support, weights)?;
        match &self.kind {
            Kind::Barycentric(theta) => {
                let g = theta.gradient(&residual(x, support, weights));
                Ok(support
                    .iter()
                    .map(|y| -g.iter().zip(y).map(|(gk, yk)| gk * yk).sum::<f64>())
                    .collect())
            }
            Kind::Custom(c) => c.grad_weights(x, support, weights).ok_or_else(|| {
                Error::InvalidInput(String::from(
                    "custom cost provides no gradient in the weights",
                ))
            }),
        }
    }

    /// A Lipschitz constant usable on the given finite instance: the
    /// stored bound when present, otherwise the coarse finite-support
    /// fallback sup theta'(|x - y|) over evaluation points and support
    /// vertices. `None` for custom costs without a stored bound.
    pub fn lipschitz_for(&self, xs: &[Vec<f64>], support: &[Vec<f64>]) -> Option<LipschitzBound> {
        if let Some(l) = self.lipschitz {
            return Some(LipschitzBound {
                value: l,
                coarse: false,
            });
        }
        match &self.kind {
            Kind::Barycentric(theta) => {
                // mean(p) ranges over the convex hull of the support, so
                // |x - mean(p)| is maximized at a vertex; theta' is
                // nondecreasing for all three profiles.
                let mut r_max: f64 = 0.0;
                for x in xs {
                    for y in support {
                        r_max = r_max.max(dist(x, y));
                    }
                }
                Some(LipschitzBound {
                    value: theta.slope(r_max),
                    coarse: true,
                })
            }
            Kind::Custom(_) => None,
        }
    }

    fn check_shapes(&self, x: &[f64], support: &[Vec<f64>], weights: &[f64]) -> Result<()> {
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "cost support vs weights",
                expected: support.len(),
                found: weights.len(),
            });
        }
        for y in support {
            if y.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    what: "cost point dimension",
                    expected: x.len(),
                    found: y.len(),
                });
            }
        }
        Ok(())
    }
}

/// x - sum_j w_j y_j.
fn residual(x: &[f64], support: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut r = x.to_vec();
    for (y, &w) in support.iter().zip(weights) {
        for (rk, &yk) in r.iter_mut().zip(y) {
            *rk -= w * yk;
        }
    }
    r
}

impl core::str::FromStr for CostFunction {
    type Err = Error;

    /// Parses the command-line cost grammar: `barycentric:quadratic`,
    /// `barycentric:euclidean`, or `barycentric:power:<t>`.
    fn from_str(spec: &str) -> Result<Self> {
        match spec {
            "barycentric:quadratic" => Ok(Self::barycentric_quadratic()),
            "barycentric:euclidean" => Ok(Self::barycentric_euclidean()),
            _ => {
                if let Some(t_str) = spec.strip_prefix("barycentric:power:") {
                    let t: f64 = t_str.parse().map_err(|_| {
                        Error::InvalidInput(format!("cannot parse power exponent {t_str:?}"))
                    })?;
                    Self::barycentric_power(t)
                } else {
                    Err(Error::InvalidInput(format!("unknown cost spec {spec:?}")))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn support(ys: &[f64]) -> Vec<Vec<f64>> {
        ys.iter().map(|&y| vec![y]).collect()
    }

    #[test]
    fn quadratic_value_and_gradient() {
        let c = CostFunction::barycentric_quadratic();
        // x = 2, support {0, 1}, all mass on 0: residual 2.
        let v = c.eval(&[2.0], &support(&[0.0, 1.0]), &[1.0, 0.0]).unwrap();
        assert_eq!(v, 4.0);
        let g = c
            .grad_weights(&[2.0], &support(&[0.0, 1.0]), &[1.0, 0.0])
            .unwrap();
        assert_eq!(g, vec![0.0, -4.0]);
    }

    #[test]
    fn euclidean_value_uses_mean_only() {
        let c = CostFunction::barycentric_euclidean();
        let v = c.eval(&[0.0], &support(&[-2.0, 2.0]), &[0.25, 0.75]).unwrap();
        assert!((v - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn euclidean_gradient_is_zero_at_kink() {
        let c = CostFunction::barycentric_euclidean();
        let g = c
            .grad_weights(&[0.0], &support(&[-1.0, 1.0]), &[0.5, 0.5])
            .unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn power_folds_known_exponents() {
        assert!(CostFunction::barycentric_power(2.0).unwrap().is_quadratic());
        assert_eq!(
            CostFunction::barycentric_power(1.0).unwrap().lipschitz_bound(),
            Some(1.0)
        );
        assert!(CostFunction::barycentric_power(0.5).is_err());
    }

    #[test]
    fn power_three_matches_closed_form() {
        let c = CostFunction::barycentric_power(3.0).unwrap();
        let v = c.eval(&[2.0], &support(&[0.0]), &[1.0]).unwrap();
        assert!((v - 8.0).abs() <= 1e-12);
        // d/dw of |2 - 0w|^3 in the single weight: grad theta = 3|r|r = 12,
        // g_0 = <12, -0> = 0.
        let g = c.grad_weights(&[2.0], &support(&[0.0]), &[1.0]).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn parses_cli_grammar() {
        assert!("barycentric:quadratic".parse::<CostFunction>().unwrap().is_quadratic());
        assert!("barycentric:power:1.5".parse::<CostFunction>().is_ok());
        assert!("barycentric:power:0.2".parse::<CostFunction>().is_err());
        assert!("transportish".parse::<CostFunction>().is_err());
    }

    #[test]
    fn coarse_lipschitz_fallback_is_flagged() {
        let c = CostFunction::barycentric_quadratic();
        let xs = support(&[3.0]);
        let ys = support(&[-1.0, 1.0]);
        let l = c.lipschitz_for(&xs, &ys).unwrap();
        // max |x - y| = 4, slope 2 * 4 = 8.
        assert_eq!(l.value, 8.0);
        assert!(l.coarse);

        let e = CostFunction::barycentric_euclidean();
        let l = e.lipschitz_for(&xs, &ys).unwrap();
        assert_eq!(l.value, 1.0);
        assert!(!l.coarse);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let c = CostFunction::barycentric_quadratic();
        assert!(c.eval(&[0.0], &support(&[1.0, 2.0]), &[1.0]).is_err());
        assert!(c.eval(&[0.0, 0.0], &support(&[1.0]), &[1.0]).is_err());
    }
}
