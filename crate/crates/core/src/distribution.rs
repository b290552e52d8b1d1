//! Term distributions and the divergences computed over them.

use std::collections::{BTreeMap, BTreeSet};

/// Add-epsilon mass used wherever a logarithm would otherwise see a zero.
pub const SMOOTHING_EPSILON: f64 = 1e-6;

/// Probability mass over vocabulary terms.
///
/// Backed by a `BTreeMap` so iteration (and therefore every floating-point
/// sum over it) happens in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermDistribution {
    mass: BTreeMap<String, f64>,
}

impl TermDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a distribution from raw non-negative weights, dividing by their
    /// total. Zero weights are dropped. Returns an empty distribution if the
    /// total is zero.
    pub fn from_weights<I, S>(weights: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut mass = BTreeMap::new();
        for (t, w) in weights {
            debug_assert!(w >= 0.0, "negative weight");
            if w > 0.0 {
                *mass.entry(t.into()).or_insert(0.0) += w;
            }
        }
        let mut d = TermDistribution { mass };
        d.normalize();
        d
    }

    /// Wraps already normalized mass without rescaling it.
    pub fn from_normalized(mass: BTreeMap<String, f64>) -> Self {
        TermDistribution { mass }
    }

    /// Maximum-likelihood model of a token sequence.
    pub fn mle<S: AsRef<str>>(tokens: &[S]) -> Self {
        Self::from_weights(tokens.iter().map(|t| (t.as_ref(), 1.0)))
    }

    pub fn normalize(&mut self) {
        let total: f64 = self.mass.values().sum();
        if total > 0.0 {
            for v in self.mass.values_mut() {
                *v /= total;
            }
        }
    }

    pub fn prob(&self, term: &str) -> f64 {
        self.mass.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.mass.iter().map(|(t, &p)| (t.as_str(), p))
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> + '_ {
        self.mass.keys().map(String::as_str)
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.mass
    }

    /// Keeps the `n` highest-mass terms (ties broken by term order) and
    /// renormalizes.
    pub fn truncate_top(&self, n: usize) -> Self {
        let mut entries: Vec<(&String, f64)> = self.mass.iter().map(|(t, &p)| (t, p)).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries.truncate(n);
        Self::from_weights(entries.into_iter().map(|(t, p)| (t.clone(), p)))
    }

    /// Uniform mixture of the given distributions.
    pub fn mixture(parts: &[TermDistribution]) -> Self {
        let mut mass: BTreeMap<String, f64> = BTreeMap::new();
        if parts.is_empty() {
            return TermDistribution { mass };
        }
        let w = 1.0 / parts.len() as f64;
        for part in parts {
            for (t, p) in part.iter() {
                *mass.entry(t.to_owned()).or_insert(0.0) += w * p;
            }
        }
        TermDistribution { mass }
    }

    /// Adds `epsilon` to every term of `vocabulary` (and every term already
    /// present) and renormalizes.
    pub fn smoothed_over<'a, I>(&self, vocabulary: I, epsilon: f64) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut mass = self.mass.clone();
        for t in vocabulary {
            mass.entry(t.to_owned()).or_insert(0.0);
        }
        for v in mass.values_mut() {
            *v += epsilon;
        }
        let mut d = TermDistribution { mass };
        d.normalize();
        d
    }

    /// Returns `self` unchanged when it already covers every term of `support`
    /// with positive mass, and an add-epsilon smoothed copy otherwise.
    pub fn covering<'a, I>(&self, support: I) -> Self
    where
        I: IntoIterator<Item = &'a str> + Clone,
    {
        if support.clone().into_iter().all(|t| self.prob(t) > 0.0) {
            self.clone()
        } else {
            self.smoothed_over(support, SMOOTHING_EPSILON)
        }
    }
}

/// Union of the supports of two distributions, in term order.
pub fn union_vocabulary<'a>(a: &'a TermDistribution, b: &'a TermDistribution) -> BTreeSet<&'a str> {
    a.terms().chain(b.terms()).collect()
}

/// KL(p ‖ q) in nats, summed over the support of `p`.
///
/// Terms of `p` with zero mass in `q` contribute `+inf`; callers smooth `q`
/// first when that can happen.
pub fn kl_divergence(p: &TermDistribution, q: &TermDistribution) -> f64 {
    p.iter()
        .filter(|&(_, pt)| pt > 0.0)
        .map(|(t, pt)| pt * (pt / q.prob(t)).ln())
        .sum()
}

/// Jensen-Shannon divergence in nats; lies in `[0, ln 2]`.
pub fn js_divergence(p: &TermDistribution, q: &TermDistribution) -> f64 {
    let m = TermDistribution::mixture(&[p.clone(), q.clone()]);
    let js = 0.5 * kl_divergence(p, &m) + 0.5 * kl_divergence(q, &m);
    js.clamp(0.0, std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, f64)]) -> TermDistribution {
        TermDistribution::from_weights(pairs.iter().map(|&(t, w)| (t, w)))
    }

    #[test]
    fn mle_of_tokens() {
        let d = TermDistribution::mle(&["a", "b", "a"]);
        assert!((d.prob("a") - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.prob("b") - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_renormalizes() {
        let d = dist(&[("a", 2.0), ("b", 1.0)]).truncate_top(1);
        assert_eq!(d.len(), 1);
        assert_eq!(d.prob("a"), 1.0);
    }

    #[test]
    fn kl_of_identical_is_zero() {
        let p = dist(&[("a", 0.3), ("b", 0.7)]);
        assert_eq!(kl_divergence(&p, &p), 0.0);
    }

    #[test]
    fn js_bounds() {
        let p = dist(&[("a", 1.0)]);
        let q = dist(&[("b", 1.0)]);
        assert!((js_divergence(&p, &q) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(js_divergence(&p, &p), 0.0);
    }

    #[test]
    fn covering_leaves_full_support_alone() {
        let p = dist(&[("a", 0.5), ("b", 0.5)]);
        assert_eq!(p.covering(["a", "b"]), p);
        let smoothed = p.covering(["a", "c"]);
        assert!(smoothed.prob("c") > 0.0);
        assert!((smoothed.total() - 1.0).abs() < 1e-12);
    }
}
