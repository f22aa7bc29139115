//! Membership in the G-closure of two isotropic phases `α < β`.

use serde::{Deserialize, Serialize};

const TOL: f64 = 1e-12;
const SAMPLES: usize = 1025;

/// Eigenvalues of a candidate effective tensor with the two phase values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPairCandidate {
    eigenvalues: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl EigenPairCandidate {
    /// Sorts the eigenvalues ascending.
    pub fn new(mut eigenvalues: Vec<f64>, alpha: f64, beta: f64) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        EigenPairCandidate { eigenvalues, alpha, beta }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn in_box(&self) -> bool {
        let scale = TOL * self.beta.abs().max(1.0);
        self.alpha < self.beta
            && !self.eigenvalues.is_empty()
            && self
                .eigenvalues
                .iter()
                .all(|&l| l >= self.alpha - scale && l <= self.beta + scale)
    }
}

/// Closed-form two-dimensional test
/// `αβ/(α+β−λ₁) ≤ λ₂ ≤ α+β−αβ/λ₁`.
pub fn lens_contains(cand: &EigenPairCandidate) -> bool {
    if cand.dim() != 2 || !cand.in_box() {
        return false;
    }
    let (a, b) = (cand.alpha, cand.beta);
    let [l1, l2] = [cand.eigenvalues[0], cand.eigenvalues[1]];
    let scale = TOL * b.max(1.0);
    let lower = a * b / (a + b - l1);
    let upper = a + b - a * b / l1;
    lower <= l2 + scale && l2 <= upper + scale
}

/// Membership test; exact closed form in two dimensions, t-search otherwise.
pub fn gclosure_contains(cand: &EigenPairCandidate) -> bool {
    if cand.dim() == 2 {
        lens_contains(cand)
    } else {
        gclosure_contains_tsearch(cand)
    }
}

/// Searches `t ∈ [0, 1]` for a point satisfying the `d + 2` bounds with
/// `μ_t = tα + (1−t)β` and `ν_t = (t/α + (1−t)/β)⁻¹`.
///
/// The slacks split into two groups: the harmonic-sum bound and
/// `λ₁ ≥ ν_t` grow with `t`, the `β`-sum bound and `λ_d ≤ μ_t` shrink.
/// The best `t` is where the two group minima cross, located by sampling
/// and then bisection.
pub fn gclosure_contains_tsearch(cand: &EigenPairCandidate) -> bool {
    if !cand.in_box() {
        return false;
    }
    let (a, b) = (cand.alpha, cand.beta);
    let lam = cand.eigenvalues();
    let d = lam.len() as f64;
    let scale = TOL * b.max(1.0);
    let (l1, ld) = (lam[0], lam[lam.len() - 1]);
    // Touching a phase value forces t to an endpoint where μ_t = ν_t.
    if l1 <= a + scale {
        return lam.iter().all(|&l| l <= a + scale);
    }
    if ld >= b - scale {
        return lam.iter().all(|&l| l >= b - scale);
    }
    let sum_a: f64 = lam.iter().map(|&l| 1.0 / (l - a)).sum();
    let sum_b: f64 = lam.iter().map(|&l| 1.0 / (b - l)).sum();
    let means = |t: f64| (t * a + (1.0 - t) * b, 1.0 / (t / a + (1.0 - t) / b));
    let rising = |t: f64| {
        let (mu, nu) = means(t);
        let g1 = (1.0 / (nu - a) + (d - 1.0) / (mu - a) - sum_a) / sum_a;
        g1.min(l1 - nu)
    };
    let falling = |t: f64| {
        let (mu, nu) = means(t);
        let g2 = (1.0 / (b - nu) + (d - 1.0) / (b - mu) - sum_b) / sum_b;
        g2.min(mu - ld)
    };
    let slack = |t: f64| rising(t).min(falling(t));
    let gap = |t: f64| rising(t) - falling(t);

    let mut best = f64::NEG_INFINITY;
    let mut bracket = None;
    let mut prev = 0.0;
    for k in 0..SAMPLES {
        let t = k as f64 / (SAMPLES - 1) as f64;
        best = best.max(slack(t));
        if k > 0 && bracket.is_none() && gap(prev) < 0.0 && gap(t) >= 0.0 {
            bracket = Some((prev, t));
        }
        prev = t;
    }
    if let Some((mut lo, mut hi)) = bracket {
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.max(slack(lo)).max(slack(hi));
    }
    best >= -scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both(l1: f64, l2: f64) -> (bool, bool) {
        let c = EigenPairCandidate::new(vec![l1, l2], 1.0, 2.0);
        (lens_contains(&c), gclosure_contains_tsearch(&c))
    }

    #[test]
    fn worked_cases() {
        assert_eq!(both(1.5, 1.5), (true, true));
        assert_eq!(both(1.0, 2.0), (false, false));
        assert_eq!(both(1.5, 4.0 / 3.0), (true, true));
        assert_eq!(both(1.5, 5.0 / 3.0), (true, true));
        assert_eq!(both(1.0, 1.0), (true, true));
        assert_eq!(both(2.0, 2.0), (true, true));
        assert_eq!(both(0.5, 1.5), (false, false));
        assert_eq!(both(1.1, 1.9), (false, false));
    }

    #[test]
    fn isotropic_tensors_are_inside() {
        for k in 0..=20 {
            let a = 1.0 + k as f64 / 20.0;
            assert_eq!(both(a, a), (true, true), "a = {a}");
        }
    }

    #[test]
    fn higher_dimensions() {
        let inside = EigenPairCandidate::new(vec![1.5; 3], 1.0, 2.0);
        assert!(gclosure_contains(&inside));
        let outside = EigenPairCandidate::new(vec![1.01, 1.99, 1.99], 1.0, 2.0);
        assert!(!gclosure_contains(&outside));
        let bad = EigenPairCandidate::new(vec![1.5, 1.5, 2.5], 1.0, 2.0);
        assert!(!gclosure_contains(&bad));
    }
}
