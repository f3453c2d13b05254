//! Truncated distributions on the non-negative integers.
//!
//! A [`Pmf`] stores probabilities for `k = 0..=n_max` together with the tail
//! mass lost to truncation (the *deficit*). All downstream exactness claims
//! carry tolerances derived from this deficit, so truncation error is tracked
//! rather than silently dropped. Sampling renormalizes over the stored
//! support, i.e. it draws from the law conditioned on `k <= n_max`.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tolerance for the `sum(probs) + deficit = 1` construction invariant.
pub const MASS_BALANCE_TOL: f64 = 1e-12;

/// Probability mass function truncated to `0..=n_max`, with explicit deficit.
#[derive(Debug, Clone)]
pub struct Pmf {
    probs: Vec<f64>,
    deficit: f64,
    label: String,
    /// Renormalized cdf for inversion sampling; empty when there is no mass.
    cum: Vec<f64>,
    total: f64,
}

impl Pmf {
    /// Geometric law with ratio `1/a`: `P(k) = ((a-1)/a) a^{-k}`, `a > 1`.
    ///
    /// The generating function of the untruncated law is `(a-1)/(a-z)`.
    /// Truncating at `n_max` leaves a deficit of exactly `a^{-(n_max+1)}`.
    pub fn geometric(a: f64, n_max: usize) -> Result<Self> {
        if !(a > 1.0) {
            return Err(Error::ParamDomain {
                name: "a",
                value: a,
                constraint: "a > 1",
            });
        }
        let inv_a = 1.0 / a;
        let mut probs = Vec::with_capacity(n_max + 1);
        let mut mass = (a - 1.0) / a;
        for _ in 0..=n_max {
            probs.push(mass);
            mass *= inv_a;
        }
        let deficit = inv_a.powi(n_max as i32 + 1);
        Ok(Self::finish(probs, deficit, format!("geometric(a={a})")))
    }

    /// Poisson law `P(k) = e^{-lambda} lambda^k / k!`, `lambda > 0`.
    pub fn poisson(lambda: f64, n_max: usize) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::ParamDomain {
                name: "lambda",
                value: lambda,
                constraint: "lambda > 0",
            });
        }
        let mut probs = Vec::with_capacity(n_max + 1);
        let mut mass = (-lambda).exp();
        for k in 0..=n_max {
            probs.push(mass);
            mass *= lambda / (k + 1) as f64;
        }
        let deficit = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        Ok(Self::finish(
            probs,
            deficit,
            format!("poisson(lambda={lambda})"),
        ))
    }

    /// Uniform law on `{0, ..., m}`; `m = 0` is the point mass at zero.
    pub fn uniform(m: usize) -> Self {
        let probs = vec![1.0 / (m + 1) as f64; m + 1];
        Self::finish(probs, 0.0, format!("uniform(0..={m})"))
    }

    /// Arbitrary sub-probability vector; the missing mass becomes the deficit.
    pub fn from_probs(probs: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if probs.is_empty() {
            return Err(Error::Config(format!("pmf `{label}` has no entries")));
        }
        for (k, &p) in probs.iter().enumerate() {
            if !(p >= 0.0) {
                return Err(Error::Config(format!(
                    "pmf `{label}` entry {k} is {p}, must be non-negative"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if sum > 1.0 + MASS_BALANCE_TOL {
            return Err(Error::Config(format!(
                "pmf `{label}` has total mass {sum} > 1"
            )));
        }
        Ok(Self::finish(probs, (1.0 - sum).max(0.0), label))
    }

    /// Internal constructor for laws whose deficit is already known (e.g.
    /// marginals of a joint law).
    pub(crate) fn from_parts(probs: Vec<f64>, deficit: f64, label: String) -> Self {
        debug_assert!(probs.iter().all(|&p| p >= 0.0));
        debug_assert!(deficit >= 0.0);
        debug_assert!(
            (probs.iter().sum::<f64>() + deficit - 1.0).abs()
                <= MASS_BALANCE_TOL * probs.len().max(1) as f64
        );
        Self::finish(probs, deficit, label)
    }

    fn finish(probs: Vec<f64>, deficit: f64, label: String) -> Self {
        let total: f64 = probs.iter().sum();
        let mut cum = Vec::new();
        if total > 0.0 {
            cum.reserve(probs.len());
            let mut acc = 0.0;
            for &p in &probs {
                acc += p;
                cum.push(acc / total);
            }
            // guard against rounding at the top end
            *cum.last_mut().expect("probs is non-empty") = 1.0;
        }
        Self {
            probs,
            deficit,
            label,
            cum,
            total,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(k)` on the truncated support, zero beyond it.
    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Stored mass, `1 - deficit` up to summation rounding.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Evaluates the generating function `sum_k P(k) z^k` for `|z| <= 1`.
    ///
    /// The result underestimates the untruncated generating function by at
    /// most `deficit * |z|^(n_max+1)`.
    pub fn pgf_eval(&self, z: f64) -> Result<f64> {
        if !(z.abs() <= 1.0 + 1e-9) {
            return Err(Error::OutsideUnitDisc { value: z });
        }
        let mut acc = 0.0;
        for &p in self.probs.iter().rev() {
            acc = acc * z + p;
        }
        Ok(acc)
    }

    /// Mean of the renormalized (conditioned on the support) law.
    pub fn mean(&self) -> f64 {
        if self.total <= 0.0 {
            return 0.0;
        }
        let weighted: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum();
        weighted / self.total
    }

    /// Draws one value, renormalizing the truncated mass by `1/(1-deficit)`.
    pub fn sample(&self, rng: &mut RngStream) -> Result<u64> {
        if self.cum.is_empty() {
            return Err(Error::NoMass {
                label: self.label.clone(),
            });
        }
        let u = rng.next_f64();
        let k = self.cum.partition_point(|&c| c <= u);
        Ok(k.min(self.cum.len() - 1) as u64)
    }

    pub fn sample_many(&self, n: usize, rng: &mut RngStream) -> Result<Vec<u64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// Total variation distance, treating each law as a sub-probability
    /// measure on `{0, 1, ...}` plus a tail atom holding its deficit.
    pub fn tv_distance(&self, other: &Pmf) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        let mut acc = 0.0;
        for k in 0..len {
            acc += (self.prob(k) - other.prob(k)).abs();
        }
        0.5 * (acc + (self.deficit - other.deficit).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E_INV: f64 = 0.367_879_441_171_442_33; // exp(-1)

    #[test]
    fn geometric_small_truncation() {
        let pmf = Pmf::geometric(2.0, 3).unwrap();
        assert_eq!(pmf.probs(), &[0.5, 0.25, 0.125, 0.0625]);
        assert_eq!(pmf.deficit(), 0.0625);
    }

    #[test]
    fn geometric_single_term() {
        let pmf = Pmf::geometric(2.0, 0).unwrap();
        assert_eq!(pmf.probs(), &[0.5]);
        assert_eq!(pmf.deficit(), 0.5);
    }

    #[test]
    fn geometric_requires_a_above_one() {
        assert!(matches!(
            Pmf::geometric(1.0, 5),
            Err(Error::ParamDomain { name: "a", .. })
        ));
        assert!(Pmf::geometric(f64::NAN, 5).is_err());
    }

    #[test]
    fn geometric_ratio_is_inverse_a() {
        for &a in &[1.5, 2.0, 4.0, 10.0] {
            let pmf = Pmf::geometric(a, 30).unwrap();
            for k in 0..30 {
                let ratio = pmf.prob(k + 1) / pmf.prob(k);
                assert!((ratio - 1.0 / a).abs() < 1e-12, "a={a} k={k}");
            }
        }
    }

    #[test]
    fn poisson_values() {
        let pmf = Pmf::poisson(1.0, 2).unwrap();
        assert!((pmf.prob(0) - E_INV).abs() < 1e-12);
        assert!((pmf.prob(1) - E_INV).abs() < 1e-12);
        assert!((pmf.prob(2) - E_INV / 2.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_single_term_deficit() {
        let pmf = Pmf::poisson(1.0, 0).unwrap();
        assert!((pmf.prob(0) - E_INV).abs() < 1e-12);
        assert!((pmf.deficit() - (1.0 - E_INV)).abs() < 1e-12);
    }

    #[test]
    fn poisson_requires_positive_lambda() {
        assert!(Pmf::poisson(0.0, 3).is_err());
        assert!(Pmf::poisson(-1.0, 3).is_err());
    }

    #[test]
    fn poisson_recurrence_identity() {
        let lambda = 2.5;
        let pmf = Pmf::poisson(lambda, 25).unwrap();
        for k in 0..25 {
            let lhs = pmf.prob(k + 1) * (k + 1) as f64;
            let rhs = lambda * pmf.prob(k);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300), "k={k}");
        }
    }

    #[test]
    fn uniform_cases() {
        assert_eq!(Pmf::uniform(0).probs(), &[1.0]);
        assert_eq!(Pmf::uniform(1).probs(), &[0.5, 0.5]);
        let third = 1.0 / 3.0;
        assert_eq!(Pmf::uniform(2).probs(), &[third, third, third]);
    }

    #[test]
    fn mass_balance_invariant() {
        let laws = [
            Pmf::geometric(1.5, 40).unwrap(),
            Pmf::geometric(10.0, 7).unwrap(),
            Pmf::poisson(0.5, 12).unwrap(),
            Pmf::poisson(4.0, 3).unwrap(),
            Pmf::uniform(9),
            Pmf::from_probs(vec![0.3, 0.0, 0.7], "two-point").unwrap(),
        ];
        for pmf in &laws {
            let sum: f64 = pmf.probs().iter().sum();
            assert!(
                (sum + pmf.deficit() - 1.0).abs() <= MASS_BALANCE_TOL,
                "{}",
                pmf.label()
            );
            assert!(pmf.probs().iter().all(|&p| p >= 0.0));
            assert!(pmf.deficit() >= 0.0);
        }
    }

    #[test]
    fn pgf_at_one_equals_stored_mass() {
        let pmf = Pmf::poisson(1.0, 8).unwrap();
        let at_one = pmf.pgf_eval(1.0).unwrap();
        assert!((at_one - (1.0 - pmf.deficit())).abs() <= 1e-12 * 9.0);
        assert!((Pmf::uniform(4).pgf_eval(1.0).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pgf_matches_geometric_closed_form() {
        let pmf = Pmf::geometric(2.0, 30).unwrap();
        assert!((pmf.pgf_eval(0.0).unwrap() - 0.5).abs() < 1e-12);
        let closed = (2.0 - 1.0) / (2.0 - 0.5);
        assert!((pmf.pgf_eval(0.5).unwrap() - closed).abs() < 1e-8);
    }

    #[test]
    fn pgf_rejects_outside_disc() {
        let pmf = Pmf::uniform(2);
        assert!(matches!(
            pmf.pgf_eval(1.5),
            Err(Error::OutsideUnitDisc { .. })
        ));
        assert!(pmf.pgf_eval(-1.0).is_ok());
    }

    #[test]
    fn sampling_degenerate_law_yields_zero() {
        let pmf = Pmf::uniform(0);
        let mut rng = RngStream::new(123, 0);
        for _ in 0..50 {
            assert_eq!(pmf.sample(&mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let pmf = Pmf::geometric(2.0, 60).unwrap();
        let mut a = RngStream::new(9, 4);
        let mut b = RngStream::new(9, 4);
        let xs = pmf.sample_many(200, &mut a).unwrap();
        let ys = pmf.sample_many(200, &mut b).unwrap();
        assert_eq!(xs, ys);
    }

    #[test]
    fn sampling_all_zero_mass_errors() {
        let pmf = Pmf::from_probs(vec![0.0, 0.0], "empty").unwrap();
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(pmf.sample(&mut rng), Err(Error::NoMass { .. })));
    }

    #[test]
    fn sample_mean_matches_geometric_mean() {
        // true mean 1/(a-1) = 1, sd = sqrt(2); 3 standard errors at n=1e5
        let pmf = Pmf::geometric(2.0, 60).unwrap();
        let mut rng = RngStream::new(2024, 0);
        let n = 100_000;
        let sum: u64 = pmf.sample_many(n, &mut rng).unwrap().iter().sum();
        let mean = sum as f64 / n as f64;
        let three_se = 3.0 * (2.0f64 / n as f64).sqrt();
        assert!((mean - 1.0).abs() < three_se, "mean={mean}");
    }

    #[test]
    fn renormalized_mean() {
        let pmf = Pmf::geometric(2.0, 60).unwrap();
        assert!((pmf.mean() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tv_distance_basics() {
        let a = Pmf::uniform(1);
        let b = Pmf::uniform(3);
        // |1/2-1/4|*2 + |0-1/4|*2 = 1/2+1/2 -> tv = 1/2... halved: 0.5
        assert!((a.tv_distance(&b) - 0.5).abs() < 1e-12);
        assert_eq!(a.tv_distance(&a), 0.0);
    }
}
