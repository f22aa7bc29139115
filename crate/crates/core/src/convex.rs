//! Convex integrands `ψ`, their Legendre–Fenchel conjugates, subdifferential
//! selections and recession slopes.
//!
//! `ψ` is a closed family rather than an arbitrary callable: every solver in
//! the crate needs exact conjugates, derivatives of the conjugate and the
//! `h` functions, and each variant supplies them in closed form. Values are
//! extended reals encoded as `f64`, with `+∞` for points outside `dom ψ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INF: f64 = f64::INFINITY;

/// A convex, lower semicontinuous integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexFunctionSpec {
    /// `s^p / p` on `s ≥ 0`, `p > 1`.
    PowerOverP { p: f64 },
    /// `s² / 2` on `s ≥ 0`.
    Quadratic,
    /// `k s` on `[alpha, beta]`.
    LinearOnInterval { alpha: f64, beta: f64, k: f64 },
    /// `0` on `[alpha, beta]`.
    IndicatorInterval { alpha: f64, beta: f64 },
    /// `|s|` on the whole line. Linear growth; only meaningful for the
    /// recession and Fenchel utilities.
    AbsoluteValue,
}

/// Asymptotic slopes `c⁻ = lim_{s→−∞} ψ(s)/s`, `c⁺ = lim_{s→+∞} ψ(s)/s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecessionPair {
    pub c_minus: f64,
    pub c_plus: f64,
}

impl ConvexFunctionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConvexFunctionSpec::PowerOverP { p } if !(p > 1.0 && p.is_finite()) => {
                Err(Error::param("p", format!("must satisfy p > 1, got {p}")))
            }
            ConvexFunctionSpec::LinearOnInterval { alpha, beta, k } => {
                check_interval(alpha, beta)?;
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(Error::param("k", format!("must be nonnegative, got {k}")));
                }
                Ok(())
            }
            ConvexFunctionSpec::IndicatorInterval { alpha, beta } => check_interval(alpha, beta),
            _ => Ok(()),
        }
    }

    /// `(inf dom ψ, sup dom ψ)`.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            ConvexFunctionSpec::PowerOverP { .. } | ConvexFunctionSpec::Quadratic => (0.0, INF),
            ConvexFunctionSpec::LinearOnInterval { alpha, beta, .. }
            | ConvexFunctionSpec::IndicatorInterval { alpha, beta } => (alpha, beta),
            ConvexFunctionSpec::AbsoluteValue => (-INF, INF),
        }
    }

    /// Whether `ψ(s)/s → +∞` as `s → +∞` with unbounded domain.
    pub fn is_superlinear(&self) -> bool {
        matches!(
            self,
            ConvexFunctionSpec::PowerOverP { .. } | ConvexFunctionSpec::Quadratic
        )
    }

    pub fn value(&self, s: f64) -> f64 {
        let (lo, hi) = self.domain();
        if !(s >= lo && s <= hi) {
            return INF;
        }
        match *self {
            ConvexFunctionSpec::PowerOverP { p } => s.powf(p) / p,
            ConvexFunctionSpec::Quadratic => 0.5 * s * s,
            ConvexFunctionSpec::LinearOnInterval { k, .. } => k * s,
            ConvexFunctionSpec::IndicatorInterval { .. } => 0.0,
            ConvexFunctionSpec::AbsoluteValue => s.abs(),
        }
    }

    /// `ψ*(t) = sup_s { s t − ψ(s) }`.
    pub fn conjugate(&self, t: f64) -> f64 {
        match *self {
            ConvexFunctionSpec::PowerOverP { p } => {
                let q = p / (p - 1.0);
                t.max(0.0).powf(q) / q
            }
            ConvexFunctionSpec::Quadratic => 0.5 * t.max(0.0).powi(2),
            ConvexFunctionSpec::LinearOnInterval { alpha, beta, k } => {
                if t >= k {
                    beta * (t - k)
                } else {
                    alpha * (t - k)
                }
            }
            ConvexFunctionSpec::IndicatorInterval { alpha, beta } => {
                if t >= 0.0 {
                    beta * t
                } else {
                    alpha * t
                }
            }
            ConvexFunctionSpec::AbsoluteValue => {
                if t.abs() <= 1.0 {
                    0.0
                } else {
                    INF
                }
            }
        }
    }

    /// `(ψ*)'(t)`, taking the smallest element of `∂ψ*(t)` at kinks.
    pub fn conjugate_derivative(&self, t: f64) -> f64 {
        match *self {
            ConvexFunctionSpec::PowerOverP { p } => t.max(0.0).powf(1.0 / (p - 1.0)),
            ConvexFunctionSpec::Quadratic => t.max(0.0),
            ConvexFunctionSpec::LinearOnInterval { alpha, beta, k } => {
                if t > k {
                    beta
                } else {
                    alpha
                }
            }
            ConvexFunctionSpec::IndicatorInterval { alpha, beta } => {
                if t > 0.0 {
                    beta
                } else {
                    alpha
                }
            }
            ConvexFunctionSpec::AbsoluteValue => {
                if !(-1.0..=1.0).contains(&t) {
                    f64::NAN
                } else if t == 1.0 {
                    0.0
                } else if t == -1.0 {
                    -INF
                } else {
                    0.0
                }
            }
        }
    }

    /// `(ψ*)''(t)` where `ψ*` is twice differentiable; zero on the flat and
    /// linear pieces of the piecewise-linear variants.
    pub fn conjugate_second_derivative(&self, t: f64) -> f64 {
        match *self {
            ConvexFunctionSpec::PowerOverP { p } => {
                if t <= 0.0 {
                    0.0
                } else {
                    let e = 1.0 / (p - 1.0);
                    e * t.powf(e - 1.0)
                }
            }
            ConvexFunctionSpec::Quadratic => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }

    /// `h(t) = max { s ∈ dom ψ : t ∈ ∂ψ(s) }`; NaN where no such `s` exists.
    pub fn h(&self, t: f64) -> f64 {
        self.h_pair(t).1
    }

    /// `h₋(t) = min { s ∈ dom ψ : t ∈ ∂ψ(s) }`; NaN where no such `s` exists.
    pub fn h_minus(&self, t: f64) -> f64 {
        self.h_pair(t).0
    }

    fn h_pair(&self, t: f64) -> (f64, f64) {
        match *self {
            ConvexFunctionSpec::PowerOverP { .. } | ConvexFunctionSpec::Quadratic => {
                let s = self.conjugate_derivative(t);
                (s, s)
            }
            ConvexFunctionSpec::LinearOnInterval { alpha, beta, k } => {
                if t < k {
                    (alpha, alpha)
                } else if t > k {
                    (beta, beta)
                } else {
                    (alpha, beta)
                }
            }
            ConvexFunctionSpec::IndicatorInterval { alpha, beta } => {
                if t < 0.0 {
                    (alpha, alpha)
                } else if t > 0.0 {
                    (beta, beta)
                } else {
                    (alpha, beta)
                }
            }
            ConvexFunctionSpec::AbsoluteValue => {
                if t.abs() < 1.0 {
                    (0.0, 0.0)
                } else if t == 1.0 {
                    (0.0, INF)
                } else if t == -1.0 {
                    (-INF, 0.0)
                } else {
                    (f64::NAN, f64::NAN)
                }
            }
        }
    }

    pub fn recession(&self) -> RecessionPair {
        match *self {
            ConvexFunctionSpec::AbsoluteValue => RecessionPair {
                c_minus: -1.0,
                c_plus: 1.0,
            },
            // ψ = +∞ on the negative half-line, so ψ(s)/s → −∞ there; on
            // the right it is superlinear or +∞ past a bounded domain.
            _ => RecessionPair {
                c_minus: -INF,
                c_plus: INF,
            },
        }
    }

    /// Fenchel–Young gap `ψ(s) + ψ*(t) − s t ≥ 0`, zero iff `t ∈ ∂ψ(s)`.
    pub fn fenchel_residual(&self, s: f64, t: f64) -> f64 {
        let (a, b) = (self.value(s), self.conjugate(t));
        if a == INF || b == INF {
            return INF;
        }
        a + b - s * t
    }
}

fn check_interval(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
        return Err(Error::param(
            "alpha/beta",
            format!("need finite alpha < beta, got [{alpha}, {beta}]"),
        ));
    }
    Ok(())
}

/// `ψ*` with its kink at the conjugate of [`ConvexFunctionSpec::LinearOnInterval`]
/// replaced by a quadratic of half-width `eps`. Convex, `C¹`, nondecreasing,
/// and equal to `ψ*` outside `[k − eps, k + eps]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SmoothedKink {
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub eps: f64,
}

impl SmoothedKink {
    /// `(value, first, second)` derivatives at `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let x = t - self.k;
        let jump = self.beta - self.alpha;
        let (m, dm, ddm) = if x <= -self.eps {
            (0.0, 0.0, 0.0)
        } else if x >= self.eps {
            (x, 1.0, 0.0)
        } else {
            let y = x + self.eps;
            (y * y / (4.0 * self.eps), y / (2.0 * self.eps), 1.0 / (2.0 * self.eps))
        };
        [self.alpha * x + jump * m, self.alpha + jump * dm, jump * ddm]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_on_interval_conjugate_is_the_two_phase_integrand() {
        let (a, b) = (0.5, 2.0);
        let psi = ConvexFunctionSpec::LinearOnInterval { alpha: a, beta: b, k: 1.0 };
        for &g in &[0.0, 0.3, 0.99, 1.0, 1.5, 4.0] {
            let expected = (g - 1.0) * if g > 1.0 { b } else { a };
            assert!((psi.conjugate(g) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn conjugate_derivative_tables() {
        let q = ConvexFunctionSpec::Quadratic;
        assert_eq!(q.conjugate_derivative(3.0), 3.0);
        assert_eq!(q.conjugate_derivative(-1.0), 0.0);
        let p2 = ConvexFunctionSpec::PowerOverP { p: 2.0 };
        assert_eq!(p2.conjugate_derivative(2.5), 2.5);
        let lin = ConvexFunctionSpec::LinearOnInterval { alpha: 1.0, beta: 3.0, k: 2.0 };
        assert_eq!(lin.conjugate_derivative(1.0), 1.0);
        assert_eq!(lin.conjugate_derivative(2.0), 1.0);
        assert_eq!(lin.conjugate_derivative(2.5), 3.0);
    }

    #[test]
    fn h_tables() {
        let q = ConvexFunctionSpec::Quadratic;
        assert_eq!(q.h(2.0), 2.0);
        assert_eq!(q.h(0.0), 0.0);
        assert_eq!(q.h(-3.0), 0.0);

        let ind = ConvexFunctionSpec::IndicatorInterval { alpha: 1.0, beta: 2.0 };
        assert_eq!((ind.h(0.0), ind.h(1.0), ind.h(-1.0)), (2.0, 2.0, 1.0));
        assert_eq!((ind.h_minus(0.0), ind.h_minus(1.0), ind.h_minus(-1.0)), (1.0, 2.0, 1.0));

        let lin = ConvexFunctionSpec::LinearOnInterval { alpha: 0.0, beta: 1.0, k: 0.5 };
        assert_eq!((lin.h(0.4), lin.h(0.5), lin.h(0.6)), (0.0, 1.0, 1.0));
        assert_eq!(lin.h_minus(0.5), 0.0);
    }

    #[test]
    fn recession_slopes() {
        let r = ConvexFunctionSpec::PowerOverP { p: 3.0 }.recession();
        assert_eq!(r.c_plus, INF);
        let r = ConvexFunctionSpec::AbsoluteValue.recession();
        assert_eq!((r.c_minus, r.c_plus), (-1.0, 1.0));
        let r = ConvexFunctionSpec::LinearOnInterval { alpha: 0.0, beta: 1.0, k: 1.0 }.recession();
        assert_eq!(r.c_plus, INF);
        assert!(r.c_minus <= r.c_plus);
    }

    #[test]
    fn fenchel_residual_examples() {
        let q = ConvexFunctionSpec::Quadratic;
        assert_eq!(q.fenchel_residual(1.0, 1.0), 0.0);
        assert_eq!(q.fenchel_residual(1.0, 0.0), 0.5);
        assert_eq!(q.fenchel_residual(-1.0, 0.0), INF);
    }

    #[test]
    fn validation() {
        assert!(ConvexFunctionSpec::PowerOverP { p: 1.0 }.validate().is_err());
        assert!(ConvexFunctionSpec::IndicatorInterval { alpha: 2.0, beta: 1.0 }.validate().is_err());
        assert!(ConvexFunctionSpec::LinearOnInterval { alpha: 0.0, beta: 1.0, k: -1.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn smoothed_kink_matches_outside_band() {
        let s = SmoothedKink { alpha: 1.0, beta: 3.0, k: 1.0, eps: 0.1 };
        let psi = ConvexFunctionSpec::LinearOnInterval { alpha: 1.0, beta: 3.0, k: 1.0 };
        for &t in &[0.0, 0.5, 0.89, 1.11, 2.0] {
            assert!((s.eval(t)[0] - psi.conjugate(t)).abs() < 1e-14);
        }
        // C¹ at the band edges
        for &t in &[0.9, 1.1] {
            let l = s.eval(t - 1e-9)[1];
            let r = s.eval(t + 1e-9)[1];
            assert!((l - r).abs() < 1e-7);
        }
    }
}
