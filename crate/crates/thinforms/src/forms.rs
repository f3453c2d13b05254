//! Thinned linear forms and their joint generating functions.
//!
//! Complementary binomial thinning splits a count `X` into `(kept, X - kept)`
//! using one shared Bernoulli sequence, so the parts always add back to `X`.
//! Two pairs of forms are built on top of it:
//!
//! * `L1 = kept(X; 1-p) + eps * Y`, `L2 = (X - kept) + (1 - eps) * Y` with a
//!   single Bernoulli switch `eps ~ Bernoulli(p)`. Their joint generating
//!   function is `P((1-p)u + pv) * (p P(u) + (1-p) P(v))`, and `L1, L2` are
//!   independent exactly when the base law is geometric.
//! * `K1 = kept(X; 1-p) + kept(Y; 1-q)`, `K2` the two complements. Their
//!   joint generating function is `P((1-p)u + pv) * P((1-q)u + qv)`, and
//!   independence characterizes the Poisson law.
//!
//! Both samplers conserve `l1 + l2 = x + y` pathwise with zero tolerance.

use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pmf::Pmf;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    T1,
    T2,
}

/// Thinning probabilities; `q` only matters for the two-sided (`T2`) forms.
#[derive(Debug, Clone, Copy)]
pub struct ThinningParams {
    p: f64,
    q: f64,
}

impl ThinningParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        check_open_unit("p", p)?;
        check_open_unit("q", q)?;
        Ok(Self { p, q })
    }

    /// One-parameter constructor for the `T1` forms (`q` defaults to `p`).
    pub fn symmetric(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::ParamDomain {
            name,
            value,
            constraint: "0 < value < 1",
        });
    }
    Ok(())
}

/// One draw of a form pair together with the base variables it came from.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FormSample {
    pub l1: u64,
    pub l2: u64,
    pub x: u64,
    pub y: u64,
    pub theorem: Theorem,
}

/// How a complementary thinning is drawn.
///
/// The binomial draw is the default; the explicit Bernoulli loop is the
/// literal sum-of-indicators construction, kept for cross-checking. Both
/// produce `kept ~ Binomial(x, keep_prob)` and conserve the total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThinMethod {
    Binomial,
    BernoulliLoop,
}

/// Splits `x` into `(kept, x - kept)` with `kept ~ Binomial(x, keep_prob)`.
pub fn complementary_thin(x: u64, keep_prob: f64, rng: &mut RngStream) -> Result<(u64, u64)> {
    complementary_thin_with(x, keep_prob, ThinMethod::Binomial, rng)
}

pub fn complementary_thin_with(
    x: u64,
    keep_prob: f64,
    method: ThinMethod,
    rng: &mut RngStream,
) -> Result<(u64, u64)> {
    check_open_unit("keep_prob", keep_prob)?;
    if x == 0 {
        // empty sum; consumes no randomness
        return Ok((0, 0));
    }
    let kept = match method {
        ThinMethod::Binomial => {
            let dist = Binomial::new(x, keep_prob).expect("keep_prob checked above");
            dist.sample(rng)
        }
        ThinMethod::BernoulliLoop => (0..x).filter(|_| rng.bernoulli(keep_prob)).count() as u64,
    };
    Ok((kept, x - kept))
}

/// The `(L1, L2)` pair for a given `(x, y)`.
///
/// Draw order is fixed: the thinning of `x` with keep probability `1 - p`,
/// then the Bernoulli switch `eps` (`eps = 1` with probability `p`, in which
/// case `y` joins `L1`).
pub fn thin_t1_pair(
    x: u64,
    y: u64,
    params: &ThinningParams,
    rng: &mut RngStream,
) -> Result<(u64, u64)> {
    let p = params.p();
    let (kept, complement) = complementary_thin(x, 1.0 - p, rng)?;
    let eps = rng.bernoulli(p);
    Ok(if eps {
        (kept + y, complement)
    } else {
        (kept, complement + y)
    })
}

/// The `(K1, K2)` pair for a given `(x, y)`: `x` split with keep probability
/// `1 - p`, `y` with `1 - q`; `K1` collects the kept parts, `K2` the
/// complements.
pub fn thin_t2_pair(
    x: u64,
    y: u64,
    params: &ThinningParams,
    rng: &mut RngStream,
) -> Result<(u64, u64)> {
    let (x_kept, x_comp) = complementary_thin(x, 1.0 - params.p(), rng)?;
    let (y_kept, y_comp) = complementary_thin(y, 1.0 - params.q(), rng)?;
    Ok((x_kept + y_kept, x_comp + y_comp))
}

/// Draws `X`, `Y` from `pmf` and returns `(L1, L2, X, Y)`.
pub fn sample_t1_forms(
    pmf: &Pmf,
    params: &ThinningParams,
    rng: &mut RngStream,
) -> Result<FormSample> {
    let x = pmf.sample(rng)?;
    let y = pmf.sample(rng)?;
    let (l1, l2) = thin_t1_pair(x, y, params, rng)?;
    debug_assert_eq!(l1 + l2, x + y);
    Ok(FormSample {
        l1,
        l2,
        x,
        y,
        theorem: Theorem::T1,
    })
}

/// Draws `X`, `Y` from `pmf` and returns `(K1, K2, X, Y)`.
pub fn sample_t2_forms(
    pmf: &Pmf,
    params: &ThinningParams,
    rng: &mut RngStream,
) -> Result<FormSample> {
    let x = pmf.sample(rng)?;
    let y = pmf.sample(rng)?;
    let (l1, l2) = thin_t2_pair(x, y, params, rng)?;
    debug_assert_eq!(l1 + l2, x + y);
    Ok(FormSample {
        l1,
        l2,
        x,
        y,
        theorem: Theorem::T2,
    })
}

/// Closed-form joint generating function of the `T1` pair:
/// `P((1-p)u + pv) * (p P(u) + (1-p) P(v))`.
pub fn joint_pgf_t1(pmf: &Pmf, params: &ThinningParams, u: f64, v: f64) -> Result<f64> {
    let p = params.p();
    let mix = pmf.pgf_eval((1.0 - p) * u + p * v)?;
    let switch = p * pmf.pgf_eval(u)? + (1.0 - p) * pmf.pgf_eval(v)?;
    Ok(mix * switch)
}

/// Closed-form joint generating function of the `T2` pair:
/// `P((1-p)u + pv) * P((1-q)u + qv)`.
pub fn joint_pgf_t2(pmf: &Pmf, params: &ThinningParams, u: f64, v: f64) -> Result<f64> {
    let p = params.p();
    let q = params.q();
    let first = pmf.pgf_eval((1.0 - p) * u + p * v)?;
    let second = pmf.pgf_eval((1.0 - q) * u + q * v)?;
    Ok(first * second)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_empty_sum() {
        let mut rng = RngStream::new(1, 0);
        assert_eq!(complementary_thin(0, 0.3, &mut rng).unwrap(), (0, 0));
    }

    #[test]
    fn thinning_rejects_closed_probabilities() {
        let mut rng = RngStream::new(1, 0);
        for bad in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
            assert!(complementary_thin(5, bad, &mut rng).is_err());
        }
    }

    #[test]
    fn thinning_conserves_total() {
        let mut rng = RngStream::new(7, 0);
        for x in 0..200u64 {
            for method in [ThinMethod::Binomial, ThinMethod::BernoulliLoop] {
                let (kept, comp) = complementary_thin_with(x, 0.37, method, &mut rng).unwrap();
                assert_eq!(kept + comp, x);
            }
        }
    }

    #[test]
    fn thinning_mean_matches_binomial() {
        // mean 7.0, var 2.1; 3 standard errors at n=1e5
        let mut rng = RngStream::new(11, 0);
        let n = 100_000;
        let mut sum = 0u64;
        for _ in 0..n {
            sum += complementary_thin(10, 0.7, &mut rng).unwrap().0;
        }
        let mean = sum as f64 / n as f64;
        let three_se = 3.0 * (2.1f64 / n as f64).sqrt();
        assert!((mean - 7.0).abs() < three_se, "mean={mean}");
    }

    #[test]
    fn thinning_methods_agree_in_distribution() {
        let mut rng = RngStream::new(13, 0);
        let n = 20_000;
        let mut fast = 0u64;
        let mut slow = 0u64;
        for _ in 0..n {
            fast += complementary_thin_with(12, 0.4, ThinMethod::Binomial, &mut rng)
                .unwrap()
                .0;
            slow += complementary_thin_with(12, 0.4, ThinMethod::BernoulliLoop, &mut rng)
                .unwrap()
                .0;
        }
        // two-sample comparison of means; var = 12*0.4*0.6 = 2.88 per draw
        let diff = (fast as f64 - slow as f64) / n as f64;
        let three_se = 3.0 * (2.0 * 2.88f64 / n as f64).sqrt();
        assert!(diff.abs() < three_se, "diff={diff}");
    }

    #[test]
    fn t1_degenerate_base_law() {
        let pmf = Pmf::uniform(0);
        let params = ThinningParams::symmetric(0.5).unwrap();
        let mut rng = RngStream::new(0, 0);
        for _ in 0..20 {
            let s = sample_t1_forms(&pmf, &params, &mut rng).unwrap();
            assert_eq!((s.l1, s.l2), (0, 0));
        }
    }

    #[test]
    fn t1_conservation() {
        let pmf = Pmf::geometric(2.0, 60).unwrap();
        let params = ThinningParams::symmetric(0.3).unwrap();
        let mut rng = RngStream::new(5, 1);
        for _ in 0..10_000 {
            let s = sample_t1_forms(&pmf, &params, &mut rng).unwrap();
            assert_eq!(s.l1 + s.l2, s.x + s.y);
        }
    }

    #[test]
    fn t1_mean_identity() {
        // E L1 = (1-p) E X + p E Y = E X = 1 for geometric a=2
        let pmf = Pmf::geometric(2.0, 60).unwrap();
        let params = ThinningParams::symmetric(0.5).unwrap();
        let mut rng = RngStream::new(21, 0);
        let n = 100_000;
        let mut sum = 0u64;
        for _ in 0..n {
            sum += sample_t1_forms(&pmf, &params, &mut rng).unwrap().l1;
        }
        let mean = sum as f64 / n as f64;
        // L1 is itself geometric(2): var = 2
        let three_se = 3.0 * (2.0f64 / n as f64).sqrt();
        assert!((mean - 1.0).abs() < three_se, "mean={mean}");
    }

    #[test]
    fn t2_degenerate_and_conserved() {
        let params = ThinningParams::new(0.3, 0.6).unwrap();
        let mut rng = RngStream::new(2, 0);
        let point = Pmf::uniform(0);
        let s = sample_t2_forms(&point, &params, &mut rng).unwrap();
        assert_eq!((s.l1, s.l2), (0, 0));

        let pmf = Pmf::poisson(1.0, 30).unwrap();
        for _ in 0..10_000 {
            let s = sample_t2_forms(&pmf, &params, &mut rng).unwrap();
            assert_eq!(s.l1 + s.l2, s.x + s.y);
        }
    }

    #[test]
    fn t2_mean_is_lambda_times_kept_fraction() {
        // K1 ~ Poisson(lambda (2 - p - q)) = Poisson(1.1)
        let pmf = Pmf::poisson(1.0, 40).unwrap();
        let params = ThinningParams::new(0.3, 0.6).unwrap();
        let mut rng = RngStream::new(31, 0);
        let n = 100_000;
        let mut sum = 0u64;
        for _ in 0..n {
            sum += sample_t2_forms(&pmf, &params, &mut rng).unwrap().l1;
        }
        let mean = sum as f64 / n as f64;
        let three_se = 3.0 * (1.1f64 / n as f64).sqrt();
        assert!((mean - 1.1).abs() < three_se, "mean={mean}");
    }

    #[test]
    fn t1_pgf_matches_geometric_product() {
        let pmf = Pmf::geometric(2.0, 60).unwrap();
        let params = ThinningParams::symmetric(0.4).unwrap();
        let got = joint_pgf_t1(&pmf, &params, 0.3, 0.7).unwrap();
        let closed = 1.0 / ((2.0 - 0.3) * (2.0 - 0.7));
        assert!((got - closed).abs() < 1e-8, "got={got} want={closed}");
    }

    #[test]
    fn t1_pgf_corner_values() {
        let uniform = Pmf::uniform(3);
        let params = ThinningParams::symmetric(0.25).unwrap();
        assert!((joint_pgf_t1(&uniform, &params, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);

        let geom = Pmf::geometric(2.0, 60).unwrap();
        let half = ThinningParams::symmetric(0.5).unwrap();
        let at_origin = joint_pgf_t1(&geom, &half, 0.0, 0.0).unwrap();
        assert!((at_origin - 0.25).abs() < 1e-12);
    }

    #[test]
    fn t2_pgf_poisson_values() {
        let pmf = Pmf::poisson(1.0, 60).unwrap();
        let e_inv = (-1.0f64).exp();

        let params = ThinningParams::new(0.3, 0.6).unwrap();
        let got = joint_pgf_t2(&pmf, &params, 0.5, 0.5).unwrap();
        assert!((got - e_inv).abs() < 1e-12);

        let half = ThinningParams::new(0.5, 0.5).unwrap();
        let got = joint_pgf_t2(&pmf, &half, 1.0, 0.0).unwrap();
        assert!((got - e_inv).abs() < 1e-12);

        let uniform = Pmf::uniform(3);
        assert!((joint_pgf_t2(&uniform, &params, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t2_pgf_symmetric_thinning_is_argument_symmetric() {
        // with p = q = 1/2 both affine arguments equal (u+v)/2
        let pmf = Pmf::poisson(2.0, 40).unwrap();
        let params = ThinningParams::new(0.5, 0.5).unwrap();
        for (u, v) in [(0.0, 1.0), (0.2, 0.9), (0.65, 0.1)] {
            let a = joint_pgf_t2(&pmf, &params, u, v).unwrap();
            let b = joint_pgf_t2(&pmf, &params, v, u).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empirical_joint_pgf_matches_closed_form() {
        let pmf = Pmf::geometric(2.0, 60).unwrap();
        let params = ThinningParams::symmetric(0.5).unwrap();
        let mut rng = RngStream::new(99, 0);
        let n = 100_000usize;
        let samples: Vec<FormSample> = (0..n)
            .map(|_| sample_t1_forms(&pmf, &params, &mut rng).unwrap())
            .collect();
        let grid = [0.0f64, 0.25, 0.5, 0.75, 1.0];
        let tol = 4.0 / (n as f64).sqrt();
        for &u in &grid {
            for &v in &grid {
                let empirical: f64 = samples
                    .iter()
                    .map(|s| u.powi(s.l1 as i32) * v.powi(s.l2 as i32))
                    .sum::<f64>()
                    / n as f64;
                let closed = joint_pgf_t1(&pmf, &params, u, v).unwrap();
                assert!(
                    (empirical - closed).abs() < tol,
                    "u={u} v={v} emp={empirical} closed={closed}"
                );
            }
        }
    }
}
