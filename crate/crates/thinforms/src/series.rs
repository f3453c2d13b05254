//! Formal power-series engine for the uniqueness recursions.
//!
//! A candidate generating function `P(z) = sum c_k z^k` is represented by its
//! truncated coefficient vector. Requiring the joint law of a form pair to
//! factorize forces, after taking the logarithmic derivative in the second
//! argument at zero and clearing denominators, a polynomial identity whose
//! order-k coefficient equation is linear in `c_{k+1}`:
//!
//! * one-sided (`t1`): `p P'((1-p)u) D(u) + (1-p) c_1 G(u) = C G(u) D(u)`
//!   with `G(u) = P((1-p)u)`, `D(u) = p P(u) + (1-p) c_0` and `C = c_1/c_0`;
//!   the unknown's multiplier is `(k+1) p (1-p)^k c_0`.
//! * two-sided (`t2`): `p P'((1-p)u) P((1-q)u) + q P'((1-q)u) P((1-p)u)
//!   = C2 P((1-p)u) P((1-q)u)` with `C2 = (p+q) c_1/c_0`; multiplier
//!   `(k+1) c_0 [p (1-p)^k + q (1-q)^k]`.
//!
//! Starting from `(c_0, c_1)` each recursion therefore has exactly one
//! solution; the normalization `sum c_k = 1` then pins `c_1`, leaving the
//! one-parameter geometric family `c_k = c_0 r^k` (with `r = 1 - c_0`) for
//! `t1` and the Poisson family `c_k = c_0 mu^k / k!` (with `c_0 = e^{-mu}`)
//! for `t2`.
//!
//! The order-k equation is violently ill-conditioned: the unknown enters at
//! relative scale `(1-p)^k` inside sums of O(1)-scaled terms, and the step
//! map amplifies any perturbation of the stored coefficients by a factor
//! growing like `(1-p)^{-k}` (measured: ~6e17 for one step at `p = 0.8`,
//! `k = 29`; the compounded amplification over a K-order solve grows like
//! `(1-p)^{-K^2/2}`). No fixed-precision state survives that, so the
//! recursion is run in exact rational arithmetic — every f64 input is an
//! exact dyadic rational — and rounded to f64 only in the returned report.

use num::bigint::Sign;
use num::{BigRational, Integer, One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Coefficients are flagged non-distributional below this value.
pub const NEGATIVE_COEFF_TOL: f64 = -1e-9;
/// Partial sums above `1 + MASS_EXCESS_TOL` flag the series as non-distributional.
pub const MASS_EXCESS_TOL: f64 = 1e-9;

/// Truncated Taylor coefficients `c_0..c_K` of a candidate generating function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSeries {
    coeffs: Vec<f64>,
}

impl PowerSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a power series needs at least c_0");
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Term-by-term derivative; order drops by one.
    pub fn derivative(&self) -> PowerSeries {
        if self.coeffs.len() == 1 {
            return PowerSeries::new(vec![0.0]);
        }
        PowerSeries::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| (i + 1) as f64 * c)
                .collect(),
        )
    }

    fn scale(&self, factor: f64) -> PowerSeries {
        PowerSeries::new(self.coeffs.iter().map(|&c| c * factor).collect())
    }
}

/// Cauchy product truncated at the smaller of the two orders.
pub fn series_mul(a: &PowerSeries, b: &PowerSeries) -> PowerSeries {
    let order = a.order().min(b.order());
    let mut out = vec![0.0; order + 1];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..=k {
            acc += a.coeffs[i] * b.coeffs[k - i];
        }
        *slot = acc;
    }
    PowerSeries::new(out)
}

/// Composition with `z -> s z` for `|s| <= 1`: `c_k -> c_k s^k`.
pub fn series_affine_compose(a: &PowerSeries, s: f64) -> Result<PowerSeries> {
    if !(s.abs() <= 1.0) {
        return Err(Error::OutsideUnitDisc { value: s });
    }
    let mut power = 1.0;
    let mut out = Vec::with_capacity(a.coeffs.len());
    for &c in &a.coeffs {
        out.push(c * power);
        power *= s;
    }
    Ok(PowerSeries::new(out))
}

fn series_sub(a: &PowerSeries, b: &PowerSeries) -> PowerSeries {
    let order = a.order().min(b.order());
    PowerSeries::new(
        (0..=order)
            .map(|k| a.coeffs[k] - b.coeffs[k])
            .collect(),
    )
}

fn series_add(a: &PowerSeries, b: &PowerSeries) -> PowerSeries {
    let order = a.order().min(b.order());
    PowerSeries::new(
        (0..=order)
            .map(|k| a.coeffs[k] + b.coeffs[k])
            .collect(),
    )
}

/// Outcome of running a coefficient recursion to order `K`.
#[derive(Debug, Clone, Serialize)]
pub struct RecursionReport {
    pub series: PowerSeries,
    /// Per-order residual of the cleared identity, evaluated independently
    /// of the recursion through full series arithmetic.
    pub residuals: Vec<f64>,
    /// Logarithmic-derivative constant: `c_1/c_0` for `t1`,
    /// `(p+q) c_1/c_0` for `t2`.
    pub c_constant: f64,
    /// Whether the truncated series is consistent with a probability law.
    pub is_pgf: bool,
    pub violation: Option<String>,
    pub partial_sum: f64,
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

fn check_c0_positive(c0: f64) -> Result<()> {
    if !(c0 > 0.0) {
        return Err(Error::ParamDomain {
            name: "c0",
            value: c0,
            constraint: "c0 > 0",
        });
    }
    Ok(())
}

fn check_solver_inputs(c0: f64, c1: f64, order: usize) -> Result<()> {
    check_c0_positive(c0)?;
    if !(c0 <= 1.0) {
        return Err(Error::ParamDomain {
            name: "c0",
            value: c0,
            constraint: "c0 <= 1",
        });
    }
    if !c1.is_finite() {
        return Err(Error::ParamDomain {
            name: "c1",
            value: c1,
            constraint: "finite",
        });
    }
    if order < 2 {
        return Err(Error::Config(format!(
            "recursion order K = {order} must be at least 2"
        )));
    }
    Ok(())
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite f64 is an exact dyadic rational")
}

/// Correctly scaled rational-to-f64 conversion; the naive numerator/denominator
/// route overflows to NaN once the big integers exceed f64 range.
fn rat_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let negative = r.numer().sign() == Sign::Minus;
    let numer = r.numer().abs();
    let denom = r.denom().clone();
    // scale the quotient to ~63 significant bits, divide once, round half-up
    let shift = 63i64 + denom.bits() as i64 - numer.bits() as i64;
    let (n, d) = if shift >= 0 {
        (numer << shift as u64, denom)
    } else {
        (numer, denom << (-shift) as u64)
    };
    let (q, rem) = n.div_rem(&d);
    let q = if rem * 2u32 >= d { q + 1u32 } else { q };
    let magnitude = q.to_f64().expect("quotient fits in 64 bits") * 2f64.powi(-shift as i32);
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

fn rational_powers(base: &BigRational, max: usize) -> Vec<BigRational> {
    let mut powers = Vec::with_capacity(max + 1);
    let mut acc = BigRational::one();
    for _ in 0..=max {
        powers.push(acc.clone());
        acc *= base;
    }
    powers
}

fn int(n: usize) -> BigRational {
    BigRational::from_integer(n.into())
}

/// One step of the `t1` recursion: given `c_0..c_k` (k >= 1) returns the
/// unique `c_{k+1}` solving the order-k equation of the cleared identity.
fn t1_step(coeffs: &[BigRational], p: &BigRational, qpow: &[BigRational]) -> BigRational {
    let k = coeffs.len() - 1;
    let c0 = &coeffs[0];
    let c1 = &coeffs[1];
    let big_c = c1 / c0;
    let q = BigRational::one() - p;

    // C * sum_i g_i d_{k-i}  with g_i = c_i (1-p)^i, d_0 = c_0, d_j = p c_j
    let mut rhs = BigRational::zero();
    for i in 0..=k {
        let g = &coeffs[i] * &qpow[i];
        let d = if i == k {
            c0.clone()
        } else {
            p * &coeffs[k - i]
        };
        rhs += g * d;
    }
    rhs *= big_c;

    // known part of the left side: a_i = p (i+1) c_{i+1} (1-p)^i for i < k,
    // plus (1-p) c_1 g_k
    let mut lhs = BigRational::zero();
    for i in 0..k {
        let a = p * &int(i + 1) * &coeffs[i + 1] * &qpow[i];
        let d = p * &coeffs[k - i];
        lhs += a * d;
    }
    lhs += &q * c1 * &coeffs[k] * &qpow[k];

    let denominator = &int(k + 1) * p * &qpow[k] * c0;
    (rhs - lhs) / denominator
}

/// One step of the `t2` recursion with thinning scales `1-p` and `1-q`.
fn t2_step(
    coeffs: &[BigRational],
    p: &BigRational,
    q: &BigRational,
    sp_pow: &[BigRational],
    sq_pow: &[BigRational],
) -> BigRational {
    let k = coeffs.len() - 1;
    let c0 = &coeffs[0];
    let c1 = &coeffs[1];
    let c2_const = (p + q) * c1 / c0;

    // C2 * sum_i Gp_i Gq_{k-i}
    let mut rhs = BigRational::zero();
    for i in 0..=k {
        rhs += &coeffs[i] * &sp_pow[i] * &coeffs[k - i] * &sq_pow[k - i];
    }
    rhs *= c2_const;

    // known left-side terms: Ap_i Gq_{k-i} + Aq_i Gp_{k-i} for i < k
    let mut lhs = BigRational::zero();
    for i in 0..k {
        let deriv = &int(i + 1) * &coeffs[i + 1];
        let ap = p * &deriv * &sp_pow[i];
        let aq = q * &deriv * &sq_pow[i];
        lhs += ap * &coeffs[k - i] * &sq_pow[k - i] + aq * &coeffs[k - i] * &sp_pow[k - i];
    }

    let denominator = &int(k + 1) * c0 * &(p * &sp_pow[k] + q * &sq_pow[k]);
    (rhs - lhs) / denominator
}

/// Unique `c_{k+1}` extending `c_0..c_k` (`k >= 1`) under the `t1` identity.
pub fn t1_next_coeff(coeffs: &[f64], p: f64) -> Result<f64> {
    if coeffs.len() < 2 {
        return Err(Error::Config(
            "t1_next_coeff needs at least c_0 and c_1".into(),
        ));
    }
    check_c0_positive(coeffs[0])?;
    check_open_unit("p", p)?;
    let state: Vec<BigRational> = coeffs.iter().map(|&c| rat(c)).collect();
    let p = rat(p);
    let qpow = rational_powers(&(BigRational::one() - &p), coeffs.len() - 1);
    Ok(rat_to_f64(&t1_step(&state, &p, &qpow)))
}

/// Unique `c_{k+1}` extending `c_0..c_k` under the `t2` identity.
pub fn t2_next_coeff(coeffs: &[f64], p: f64, q: f64) -> Result<f64> {
    if coeffs.len() < 2 {
        return Err(Error::Config(
            "t2_next_coeff needs at least c_0 and c_1".into(),
        ));
    }
    check_c0_positive(coeffs[0])?;
    check_open_unit("p", p)?;
    check_open_unit("q", q)?;
    let state: Vec<BigRational> = coeffs.iter().map(|&c| rat(c)).collect();
    let (p, q) = (rat(p), rat(q));
    let sp_pow = rational_powers(&(BigRational::one() - &p), coeffs.len() - 1);
    let sq_pow = rational_powers(&(BigRational::one() - &q), coeffs.len() - 1);
    Ok(rat_to_f64(&t2_step(&state, &p, &q, &sp_pow, &sq_pow)))
}

fn run_recursion(
    c0: f64,
    c1: f64,
    order: usize,
    mut step: impl FnMut(&[BigRational]) -> BigRational,
) -> Vec<f64> {
    let mut state = Vec::with_capacity(order + 1);
    state.push(rat(c0));
    state.push(rat(c1));
    while state.len() <= order {
        let next = step(&state);
        state.push(next);
    }
    state.iter().map(rat_to_f64).collect()
}

fn distribution_flags(coeffs: &[f64]) -> (bool, Option<String>, f64) {
    let mut partial = 0.0;
    let mut violation = None;
    for (k, &c) in coeffs.iter().enumerate() {
        partial += c;
        if violation.is_none() {
            if c < NEGATIVE_COEFF_TOL {
                violation = Some(format!("coefficient c_{k} = {c} is negative"));
            } else if partial > 1.0 + MASS_EXCESS_TOL {
                violation = Some(format!("partial sum through c_{k} is {partial} > 1"));
            }
        }
    }
    (violation.is_none(), violation, partial)
}

/// Residuals of the cleared `t1` identity for an assembled series, computed
/// through plain series arithmetic (an independent route from the recursion).
fn residuals_t1(series: &PowerSeries, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    let c0 = series.coeffs()[0];
    let c1 = series.coeffs()[1];
    let big_c = c1 / c0;

    let thinned = series_affine_compose(series, q).expect("0 < 1-p < 1");
    let thinned_deriv = series_affine_compose(&series.derivative(), q)
        .expect("0 < 1-p < 1")
        .scale(p);
    let mut denom = series.scale(p);
    denom.coeffs[0] = c0;

    let lhs = series_add(
        &series_mul(&thinned_deriv, &denom),
        &thinned.scale(q * c1),
    );
    let rhs = series_mul(&thinned, &denom).scale(big_c);
    series_sub(&lhs, &rhs).coeffs
}

fn residuals_t2(series: &PowerSeries, p: f64, q: f64) -> Vec<f64> {
    let c0 = series.coeffs()[0];
    let c1 = series.coeffs()[1];
    let c2_const = (p + q) * c1 / c0;

    let deriv = series.derivative();
    let gp = series_affine_compose(series, 1.0 - p).expect("scale in unit disc");
    let gq = series_affine_compose(series, 1.0 - q).expect("scale in unit disc");
    let ap = series_affine_compose(&deriv, 1.0 - p)
        .expect("scale in unit disc")
        .scale(p);
    let aq = series_affine_compose(&deriv, 1.0 - q)
        .expect("scale in unit disc")
        .scale(q);

    let lhs = series_add(&series_mul(&ap, &gq), &series_mul(&aq, &gp));
    let rhs = series_mul(&gp, &gq).scale(c2_const);
    series_sub(&lhs, &rhs).coeffs
}

/// Runs the `t1` recursion from `(c0, c1)` to order `K`.
pub fn t1_solve(c0: f64, c1: f64, p: f64, order: usize) -> Result<RecursionReport> {
    check_solver_inputs(c0, c1, order)?;
    check_open_unit("p", p)?;
    let p_rat = rat(p);
    let qpow = rational_powers(&(BigRational::one() - &p_rat), order);
    let coeffs = run_recursion(c0, c1, order, |state| t1_step(state, &p_rat, &qpow));
    let series = PowerSeries::new(coeffs);
    let residuals = residuals_t1(&series, p);
    let (is_pgf, violation, partial_sum) = distribution_flags(series.coeffs());
    Ok(RecursionReport {
        c_constant: c1 / c0,
        series,
        residuals,
        is_pgf,
        violation,
        partial_sum,
    })
}

/// Runs the `t2` recursion from `(c0, c1)` to order `K`.
pub fn t2_solve(c0: f64, c1: f64, p: f64, q: f64, order: usize) -> Result<RecursionReport> {
    check_solver_inputs(c0, c1, order)?;
    check_open_unit("p", p)?;
    check_open_unit("q", q)?;
    let (p_rat, q_rat) = (rat(p), rat(q));
    let sp_pow = rational_powers(&(BigRational::one() - &p_rat), order);
    let sq_pow = rational_powers(&(BigRational::one() - &q_rat), order);
    let coeffs = run_recursion(c0, c1, order, |state| {
        t2_step(state, &p_rat, &q_rat, &sp_pow, &sq_pow)
    });
    let series = PowerSeries::new(coeffs);
    let residuals = residuals_t2(&series, p, q);
    let (is_pgf, violation, partial_sum) = distribution_flags(series.coeffs());
    Ok(RecursionReport {
        c_constant: (p + q) * c1 / c0,
        series,
        residuals,
        is_pgf,
        violation,
        partial_sum,
    })
}

/// Geometric-ratio estimate of the mass beyond the truncation order.
fn tail_estimate(coeffs: &[f64]) -> f64 {
    let k = coeffs.len() - 1;
    let last = coeffs[k];
    let prev = coeffs[k - 1];
    if last <= 0.0 {
        return 0.0;
    }
    if prev <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = last / prev;
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    last * ratio / (1.0 - ratio)
}

/// Rounds to the nearest float with `bits` significant bits.
///
/// Probe values with short mantissas keep the exact-rational recursion
/// state small: a probe with `b`-bit mantissa gives order-k numerators of
/// roughly `b k` bits.
fn round_sig_bits(x: f64, bits: u32) -> f64 {
    if bits >= 53 || x == 0.0 || !x.is_finite() {
        return x;
    }
    let drop = 52 - bits;
    let half = 1u64 << (drop - 1);
    // adding the half-ulp may carry into the exponent; that is the correct
    // round-up to the next binade
    f64::from_bits((x.to_bits() + half) >> drop << drop)
}

/// Bracketing root search for the normalization constraint: safeguarded
/// regula falsi (Illinois) on `[0, hi]`, accepting `c1` once
/// `|mass(c1) - 1| <= tol`.
///
/// `transform` maps the total mass to the coordinate used for the secant
/// geometry. A transform that straightens the mass as a function of `c1`
/// (`1 - c0/m` for the geometric-sum shape, `ln m` for the exponential one)
/// turns the search into a couple of evaluations; correctness only needs it
/// monotone, since bracketing and acceptance are decided on the raw mass.
fn bracket_normalization(
    c0: f64,
    tol: f64,
    mut total_mass: impl FnMut(f64) -> Result<f64>,
    transform: impl Fn(f64) -> f64,
    mut hi: f64,
    grow_bracket: bool,
) -> Result<f64> {
    // probes only need enough mantissa to pin the root to ~tol; short
    // probes keep the exact-rational solves behind `total_mass` cheap
    let probe_bits = ((1.0 / tol).log2().ceil() as u32 + 8).min(53);
    let anchor = transform(1.0);
    let mut eval = |c1: f64| -> Result<(f64, f64)> {
        let mass = total_mass(c1)?;
        Ok((mass - 1.0, transform(mass) - anchor))
    };
    let (mut s_lo, mut y_lo) = eval(0.0)?;
    if s_lo.abs() <= tol {
        return Ok(0.0);
    }
    if s_lo > 0.0 {
        return Err(Error::SolverFailure {
            reason: format!("mass at c1 = 0 already exceeds one (c0 = {c0})"),
        });
    }
    let (mut s_hi, mut y_hi) = eval(hi)?;
    if grow_bracket {
        let mut grown = 0;
        while s_hi <= 0.0 {
            hi *= 2.0;
            (s_hi, y_hi) = eval(hi)?;
            grown += 1;
            if grown > 200 {
                return Err(Error::SolverFailure {
                    reason: format!("no sign change while growing bracket (c0 = {c0})"),
                });
            }
        }
    } else if s_hi <= 0.0 {
        return Err(Error::SolverFailure {
            reason: format!("no sign change on [0, {hi}] (c0 = {c0})"),
        });
    }
    let mut lo = 0.0;
    let mut last_side = 0i8;
    for _ in 0..200 {
        if hi - lo <= 1e-13 {
            break;
        }
        let secant = if y_lo.is_finite() && y_hi.is_finite() && y_lo != y_hi {
            (lo * y_hi - hi * y_lo) / (y_hi - y_lo)
        } else {
            f64::NAN
        };
        let mut mid = if secant > lo && secant < hi {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let rounded = round_sig_bits(mid, probe_bits);
        if rounded > lo && rounded < hi {
            mid = rounded;
        }
        let (s_mid, y_mid) = eval(mid)?;
        if s_mid.abs() <= tol {
            return Ok(mid);
        }
        if s_mid <= 0.0 {
            lo = mid;
            s_lo = s_mid;
            y_lo = y_mid;
            if last_side == -1 {
                y_hi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = mid;
            s_hi = s_mid;
            y_hi = y_mid;
            if last_side == 1 {
                y_lo *= 0.5;
            }
            last_side = 1;
        }
    }
    let root = round_sig_bits(0.5 * (lo + hi), probe_bits);
    let (residual, _) = eval(root)?;
    if residual.abs() > tol {
        return Err(Error::SolverFailure {
            reason: format!(
                "normalization residual {residual} exceeds tol {tol} at c1 = {root}; \
                 increase the truncation order"
            ),
        });
    }
    Ok(root)
}

/// Solves `sum_k c_k(c0, c1) = 1` for `c1` on the `t1` family.
///
/// The truncation order must be large enough that the geometric tail at the
/// bracket endpoints is below `tol`. The solved value is `c0 (1 - c0)`.
pub fn t1_normalize(c0: f64, p: f64, order: usize, tol: f64) -> Result<f64> {
    check_solver_inputs(c0, 0.0, order)?;
    check_open_unit("p", p)?;
    if !(tol > 0.0) {
        return Err(Error::ParamDomain {
            name: "tol",
            value: tol,
            constraint: "tol > 0",
        });
    }
    let mass = |c1: f64| -> Result<f64> {
        let report = t1_solve(c0, c1, p, order)?;
        Ok(report.partial_sum + tail_estimate(report.series.coeffs()))
    };
    // the mass of the solution family is c0/(1 - c1/c0), so 1 - c0/mass is
    // linear in c1 and the secant search converges in a few evaluations
    bracket_normalization(c0, tol, mass, |m| 1.0 - c0 / m, c0, false)
}

/// Solves the normalization on the `t2` family; the solved value satisfies
/// `c1 = -c0 ln(c0)` (equivalently `c0 = e^{-mu}` with `mu = c1/c0`).
pub fn t2_normalize(c0: f64, p: f64, q: f64, order: usize, tol: f64) -> Result<f64> {
    check_solver_inputs(c0, 0.0, order)?;
    check_open_unit("p", p)?;
    check_open_unit("q", q)?;
    if !(tol > 0.0) {
        return Err(Error::ParamDomain {
            name: "tol",
            value: tol,
            constraint: "tol > 0",
        });
    }
    let mass = |c1: f64| -> Result<f64> {
        let report = t2_solve(c0, c1, p, q, order)?;
        Ok(report.partial_sum + tail_estimate(report.series.coeffs()))
    };
    // the family mass is c0 exp(c1/c0); ln(mass) is linear in c1
    bracket_normalization(c0, tol, mass, f64::ln, c0, true)
}
