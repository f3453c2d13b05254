//! Randomized goodness-of-fit tests built on the independence
//! characterizations, plus the Monte Carlo power-study harness.
//!
//! The tests turn a sample `x_1, ..., x_n` into consecutive disjoint pairs
//! `(x_1, x_2), (x_3, x_4), ...`, draw the thinned forms for each pair once,
//! and test the resulting `(form1, form2)` pairs for independence. Under the
//! geometric null the `T1` forms are independent, so any dependence test
//! applies; the thinning makes the procedure randomized, and the stream
//! identifiers that drove it are recorded in the report.
//!
//! Two independence tests are provided: the Pearson chi-square test on a
//! pooled contingency table, and an exact-level permutation test that
//! shuffles the second form coordinate.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{thin_t1_pair, thin_t2_pair, Theorem, ThinningParams};
use crate::pmf::Pmf;
use crate::rng::RngStream;
use crate::special::chi2_sf;

/// How raw integer values are pooled into contingency-table bins.
#[derive(Debug, Clone, Copy)]
pub enum PoolingRule {
    /// One bin per observed value; no expected-count guarantee.
    None,
    /// Adjacent values merged into equal-count bins sized so that every
    /// expected cell under independence is at least this large.
    MinExpected(f64),
}

impl Default for PoolingRule {
    fn default() -> Self {
        PoolingRule::MinExpected(5.0)
    }
}

/// Half-open integer bin; `hi = None` means unbounded above.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BinRange {
    pub lo: u64,
    pub hi: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_bins: Vec<BinRange>,
    col_bins: Vec<BinRange>,
    total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    Chi2,
    Permutation,
}

/// How the thinning randomization entered the reported statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplicatePolicy {
    /// One thinning draw (the default).
    Single,
    /// Statistic averaged over independent thinning draws; the chi-square
    /// reference distribution is then only approximate.
    Averaged { replicates: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub method: TestMethod,
    /// Number of permutation rounds, for the permutation method.
    pub rounds: Option<usize>,
    pub n_pairs: usize,
    pub seed: Option<u64>,
    pub stream_id: Option<u64>,
    pub replicate_policy: ReplicatePolicy,
}

/// Test configuration shared by the goodness-of-fit entry points.
#[derive(Debug, Clone, Copy)]
pub struct GofOptions {
    pub method: TestMethod,
    pub permutation_rounds: usize,
    pub replicates: usize,
    pub pooling: PoolingRule,
}

impl Default for GofOptions {
    fn default() -> Self {
        Self {
            method: TestMethod::Chi2,
            permutation_rounds: 999,
            replicates: 1,
            pooling: PoolingRule::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// binning

/// Greedy equal-count bins over `0..counts.len()`: accumulate at least
/// `target` observations per bin, the last bin absorbing any remainder.
/// Values never observed fall inside whichever bin spans them, so every bin
/// carries positive mass.
fn greedy_bins(counts: &[u64], target: u64) -> Vec<(usize, usize)> {
    let mut bins = Vec::new();
    let mut lo = 0usize;
    let mut acc = 0u64;
    for (v, &c) in counts.iter().enumerate() {
        acc += c;
        if acc >= target {
            bins.push((lo, v));
            lo = v + 1;
            acc = 0;
        }
    }
    if lo < counts.len() {
        // leftover short of the target: merge it into the previous bin
        if let Some(last) = bins.last_mut() {
            last.1 = counts.len() - 1;
        } else {
            bins.push((lo, counts.len() - 1));
        }
    }
    bins
}

fn unit_bins(counts: &[u64]) -> Vec<(usize, usize)> {
    let observed: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(v, _)| v)
        .collect();
    observed
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let hi = if i + 1 < observed.len() {
                observed[i + 1] - 1
            } else {
                counts.len() - 1
            };
            (v, hi)
        })
        .collect()
}

/// Most balanced split of a margin into two bins; single bin when only one
/// value carries mass.
fn best_two_bins(counts: &[u64]) -> Vec<(usize, usize)> {
    let total: u64 = counts.iter().sum();
    let mut best: Option<(u64, usize)> = None;
    let mut acc = 0u64;
    for split in 0..counts.len().saturating_sub(1) {
        acc += counts[split];
        let balance = acc.min(total - acc);
        if best.map_or(true, |(b, _)| balance > b) {
            best = Some((balance, split));
        }
    }
    match best {
        Some((balance, split)) if balance > 0 => {
            vec![(0, split), (split + 1, counts.len() - 1)]
        }
        _ => vec![(0, counts.len() - 1)],
    }
}

/// Bins for one margin. For [`PoolingRule::MinExpected`] the per-bin count
/// target is `ceil(sqrt(threshold * n))`, which makes every expected cell
/// `R_i C_j / n >= threshold` when both margins meet the target; if that
/// leaves fewer than two bins (mass concentrated on few values), fall back
/// to the most balanced two-bin split.
fn margin_bins(counts: &[u64], n: u64, rule: &PoolingRule) -> Vec<(usize, usize)> {
    match rule {
        PoolingRule::None => unit_bins(counts),
        PoolingRule::MinExpected(threshold) => {
            let target = (threshold * n as f64).sqrt().ceil().max(1.0) as u64;
            let bins = greedy_bins(counts, target);
            if bins.len() >= 2 {
                bins
            } else {
                best_two_bins(counts)
            }
        }
    }
}

struct BinnedPairs {
    rows_idx: Vec<usize>,
    cols_idx: Vec<usize>,
    row_bins: Vec<BinRange>,
    col_bins: Vec<BinRange>,
}

fn margin_counts(values: impl Iterator<Item = u64>, vmax: u64) -> Vec<u64> {
    let mut counts = vec![0u64; vmax as usize + 1];
    for v in values {
        counts[v as usize] += 1;
    }
    counts
}

fn to_ranges(bins: &[(usize, usize)], len: usize) -> (Vec<BinRange>, Vec<usize>) {
    let ranges: Vec<BinRange> = bins
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| BinRange {
            lo: lo as u64,
            hi: if i + 1 == bins.len() {
                None
            } else {
                Some(hi as u64)
            },
        })
        .collect();
    let mut lookup = vec![0usize; len];
    for (i, &(lo, hi)) in bins.iter().enumerate() {
        for slot in lookup.iter_mut().take(hi + 1).skip(lo) {
            *slot = i;
        }
    }
    (ranges, lookup)
}

fn bin_pairs(pairs: &[(u64, u64)], rule: &PoolingRule) -> Result<BinnedPairs> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: pairs.len(),
        });
    }
    let vmax1 = pairs.iter().map(|p| p.0).max().expect("non-empty");
    let vmax2 = pairs.iter().map(|p| p.1).max().expect("non-empty");
    for vmax in [vmax1, vmax2] {
        if vmax as usize >= 1 << 22 {
            return Err(Error::Capacity {
                cells: vmax as usize + 1,
                cap: 1 << 22,
            });
        }
    }
    let n = pairs.len() as u64;
    let row_counts = margin_counts(pairs.iter().map(|p| p.0), vmax1);
    let col_counts = margin_counts(pairs.iter().map(|p| p.1), vmax2);
    let (row_bins, row_lookup) = to_ranges(&margin_bins(&row_counts, n, rule), row_counts.len());
    let (col_bins, col_lookup) = to_ranges(&margin_bins(&col_counts, n, rule), col_counts.len());
    Ok(BinnedPairs {
        rows_idx: pairs.iter().map(|p| row_lookup[p.0 as usize]).collect(),
        cols_idx: pairs.iter().map(|p| col_lookup[p.1 as usize]).collect(),
        row_bins,
        col_bins,
    })
}

/// Builds a pooled contingency table from `(form1, form2)` pairs.
pub fn build_table(pairs: &[(u64, u64)], rule: &PoolingRule) -> Result<ContingencyTable> {
    let binned = bin_pairs(pairs, rule)?;
    let (r, c) = (binned.row_bins.len(), binned.col_bins.len());
    if r < 2 || c < 2 {
        return Err(Error::DegenerateTable {
            reason: format!(
                "need at least two distinct values per coordinate, got {r} row bin(s) \
                 and {c} column bin(s)"
            ),
        });
    }
    let mut counts = vec![vec![0u64; c]; r];
    for (&i, &j) in binned.rows_idx.iter().zip(&binned.cols_idx) {
        counts[i][j] += 1;
    }
    Ok(ContingencyTable {
        counts,
        row_bins: binned.row_bins,
        col_bins: binned.col_bins,
        total: pairs.len() as u64,
    })
}

impl ContingencyTable {
    /// Wraps raw counts with unit bins (mostly useful for direct testing).
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.is_empty() || counts[0].is_empty() {
            return Err(Error::Config("empty contingency table".into()));
        }
        let cols = counts[0].len();
        if counts.iter().any(|row| row.len() != cols) {
            return Err(Error::Config("ragged contingency table".into()));
        }
        let total = counts.iter().flatten().sum();
        let unit = |len: usize| -> Vec<BinRange> {
            (0..len)
                .map(|i| BinRange {
                    lo: i as u64,
                    hi: if i + 1 == len { None } else { Some(i as u64) },
                })
                .collect()
        };
        Ok(Self {
            row_bins: unit(counts.len()),
            col_bins: unit(cols),
            counts,
            total,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_bins(&self) -> &[BinRange] {
        &self.row_bins
    }

    pub fn col_bins(&self) -> &[BinRange] {
        &self.col_bins
    }

    pub fn n_rows(&self) -> usize {
        self.counts.len()
    }

    pub fn n_cols(&self) -> usize {
        self.counts[0].len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.n_cols())
            .map(|j| self.counts.iter().map(|row| row[j]).sum())
            .collect()
    }

    /// Smallest expected cell count under independence.
    pub fn min_expected(&self) -> f64 {
        let rmin = self.row_totals().into_iter().min().unwrap_or(0);
        let cmin = self.col_totals().into_iter().min().unwrap_or(0);
        rmin as f64 * cmin as f64 / self.total as f64
    }
}

// ---------------------------------------------------------------------------
// independence tests

/// Pearson statistic `sum (O - E)^2 / E`; the terms are summed in sorted
/// order so the value is exactly invariant under row/column permutations.
fn pearson_statistic(counts: &[u64], expected: &[f64]) -> f64 {
    let mut terms: Vec<f64> = counts
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn expected_from_marginals(rows: &[u64], cols: &[u64], n: u64) -> Vec<f64> {
    let mut expected = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        for &c in cols {
            expected.push(r as f64 * c as f64 / n as f64);
        }
    }
    expected
}

/// Pearson chi-square test of independence on a contingency table.
pub fn chi2_independence(table: &ContingencyTable) -> Result<TestReport> {
    let (r, c) = (table.n_rows(), table.n_cols());
    if r < 2 || c < 2 {
        return Err(Error::DegenerateTable {
            reason: format!("{r}x{c} table has no independence structure to test"),
        });
    }
    let rows = table.row_totals();
    let cols = table.col_totals();
    if rows.iter().chain(&cols).any(|&t| t == 0) {
        return Err(Error::DegenerateTable {
            reason: "a marginal total is zero, so an expected cell is zero".into(),
        });
    }
    let expected = expected_from_marginals(&rows, &cols, table.total);
    let flat: Vec<u64> = table.counts.iter().flatten().copied().collect();
    let statistic = pearson_statistic(&flat, &expected);
    let dof = (r - 1) * (c - 1);
    Ok(TestReport {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof),
        method: TestMethod::Chi2,
        rounds: None,
        n_pairs: table.total as usize,
        seed: None,
        stream_id: None,
        replicate_policy: ReplicatePolicy::Single,
    })
}

struct PermutationSetup {
    rows_idx: Vec<usize>,
    cols_idx: Vec<usize>,
    n_rows: usize,
    n_cols: usize,
    expected: Vec<f64>,
}

impl PermutationSetup {
    /// Degenerate margins (a constant coordinate) leave nothing to permute;
    /// the statistic is identically zero in that case.
    fn from_pairs(pairs: &[(u64, u64)], rule: &PoolingRule) -> Result<Option<Self>> {
        let binned = bin_pairs(pairs, rule)?;
        let (r, c) = (binned.row_bins.len(), binned.col_bins.len());
        if r < 2 || c < 2 {
            return Ok(None);
        }
        let n = pairs.len() as u64;
        let mut rows = vec![0u64; r];
        let mut cols = vec![0u64; c];
        for &i in &binned.rows_idx {
            rows[i] += 1;
        }
        for &j in &binned.cols_idx {
            cols[j] += 1;
        }
        Ok(Some(Self {
            rows_idx: binned.rows_idx,
            cols_idx: binned.cols_idx,
            n_rows: r,
            n_cols: c,
            expected: expected_from_marginals(&rows, &cols, n),
        }))
    }

    fn statistic(&self, perm: &[usize]) -> f64 {
        let mut counts = vec![0u64; self.n_rows * self.n_cols];
        for (&i, &slot) in self.rows_idx.iter().zip(perm) {
            counts[i * self.n_cols + self.cols_idx[slot]] += 1;
        }
        pearson_statistic(&counts, &self.expected)
    }
}

fn shuffle(perm: &mut [usize], rng: &mut RngStream) {
    for i in (1..perm.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
}

/// Permutation test of independence: the second coordinate is shuffled
/// `rounds` times and the Pearson statistic on fixed bins is compared with
/// the observed one; `p = (1 + #{permuted >= observed}) / (rounds + 1)`.
pub fn permutation_independence(
    pairs: &[(u64, u64)],
    rounds: usize,
    rng: &mut RngStream,
) -> Result<TestReport> {
    permutation_with_rule(pairs, rounds, &PoolingRule::default(), rng)
}

pub fn permutation_with_rule(
    pairs: &[(u64, u64)],
    rounds: usize,
    rule: &PoolingRule,
    rng: &mut RngStream,
) -> Result<TestReport> {
    if rounds < 99 {
        return Err(Error::Config(format!(
            "permutation test needs at least 99 rounds, got {rounds}"
        )));
    }
    let seed = Some(rng.seed());
    let stream_id = Some(rng.stream_id());
    let base = TestReport {
        statistic: 0.0,
        dof: 0,
        p_value: 1.0,
        method: TestMethod::Permutation,
        rounds: Some(rounds),
        n_pairs: pairs.len(),
        seed,
        stream_id,
        replicate_policy: ReplicatePolicy::Single,
    };
    let Some(setup) = PermutationSetup::from_pairs(pairs, rule)? else {
        return Ok(base);
    };
    let identity: Vec<usize> = (0..pairs.len()).collect();
    let observed = setup.statistic(&identity);
    let mut perm = identity;
    let mut at_least = 0usize;
    for _ in 0..rounds {
        shuffle(&mut perm, rng);
        if setup.statistic(&perm) >= observed {
            at_least += 1;
        }
    }
    Ok(TestReport {
        statistic: observed,
        dof: (setup.n_rows - 1) * (setup.n_cols - 1),
        p_value: (1 + at_least) as f64 / (rounds + 1) as f64,
        ..base
    })
}

// ---------------------------------------------------------------------------
// goodness-of-fit entry points

/// Goodness-of-fit test for the law characterized by `theorem` (geometric
/// for `T1`, Poisson for `T2`).
///
/// Consecutive disjoint pairs of `xs` are thinned into form pairs once per
/// replicate, then tested for independence with the configured method. The
/// test is randomized; the stream identifiers of `rng` are echoed in the
/// report so a run can be reproduced exactly.
pub fn gof_test(
    theorem: Theorem,
    xs: &[u64],
    params: &ThinningParams,
    rng: &mut RngStream,
    opts: &GofOptions,
) -> Result<TestReport> {
    if xs.len() < 40 {
        return Err(Error::InsufficientData {
            needed: 40,
            got: xs.len(),
        });
    }
    let seed = rng.seed();
    let stream_id = rng.stream_id();
    let replicates = opts.replicates.max(1);
    let mut reps: Vec<Vec<(u64, u64)>> = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let forms: Result<Vec<(u64, u64)>> = xs
            .chunks_exact(2)
            .map(|pair| match theorem {
                Theorem::T1 => thin_t1_pair(pair[0], pair[1], params, rng),
                Theorem::T2 => thin_t2_pair(pair[0], pair[1], params, rng),
            })
            .collect();
        reps.push(forms?);
    }
    let all_forms = reps.iter().flatten();
    let first = reps[0][0];
    if all_forms.clone().all(|&(a, _)| a == first.0) && all_forms.clone().all(|&(_, b)| b == first.1)
    {
        return Err(Error::DegenerateTable {
            reason: "every thinned form pair is identical; the sample carries no \
                     independence information"
                .into(),
        });
    }
    let n_pairs = reps[0].len();
    let policy = if replicates == 1 {
        ReplicatePolicy::Single
    } else {
        ReplicatePolicy::Averaged { replicates }
    };
    match opts.method {
        TestMethod::Chi2 => {
            let mut stats = Vec::with_capacity(replicates);
            let mut dofs = Vec::with_capacity(replicates);
            for forms in &reps {
                let table = build_table(forms, &opts.pooling)?;
                let report = chi2_independence(&table)?;
                stats.push(report.statistic);
                dofs.push(report.dof);
            }
            let statistic = stats.iter().sum::<f64>() / replicates as f64;
            let dof = (dofs.iter().sum::<usize>() as f64 / replicates as f64).round() as usize;
            Ok(TestReport {
                statistic,
                dof,
                p_value: chi2_sf(statistic, dof.max(1)),
                method: TestMethod::Chi2,
                rounds: None,
                n_pairs,
                seed: Some(seed),
                stream_id: Some(stream_id),
                replicate_policy: policy,
            })
        }
        TestMethod::Permutation => {
            let setups: Vec<Option<PermutationSetup>> = reps
                .iter()
                .map(|forms| PermutationSetup::from_pairs(forms, &opts.pooling))
                .collect::<Result<_>>()?;
            let identity: Vec<usize> = (0..n_pairs).collect();
            let mean_stat = |perm: &[usize]| -> f64 {
                setups
                    .iter()
                    .map(|s| s.as_ref().map_or(0.0, |s| s.statistic(perm)))
                    .sum::<f64>()
                    / replicates as f64
            };
            let observed = mean_stat(&identity);
            let rounds = opts.permutation_rounds;
            if rounds < 99 {
                return Err(Error::Config(format!(
                    "permutation test needs at least 99 rounds, got {rounds}"
                )));
            }
            let mut perm = identity;
            let mut at_least = 0usize;
            for _ in 0..rounds {
                shuffle(&mut perm, rng);
                if mean_stat(&perm) >= observed {
                    at_least += 1;
                }
            }
            let dof = setups[0]
                .as_ref()
                .map_or(0, |s| (s.n_rows - 1) * (s.n_cols - 1));
            Ok(TestReport {
                statistic: observed,
                dof,
                p_value: (1 + at_least) as f64 / (rounds + 1) as f64,
                method: TestMethod::Permutation,
                rounds: Some(rounds),
                n_pairs,
                seed: Some(seed),
                stream_id: Some(stream_id),
                replicate_policy: policy,
            })
        }
    }
}

/// Tests whether `xs` is geometric via independence of the `T1` forms.
pub fn gof_test_t1(
    xs: &[u64],
    p: f64,
    rng: &mut RngStream,
    opts: &GofOptions,
) -> Result<TestReport> {
    let params = ThinningParams::symmetric(p)?;
    gof_test(Theorem::T1, xs, &params, rng, opts)
}

/// Tests whether `xs` is Poisson via independence of the `T2` forms.
pub fn gof_test_t2(
    xs: &[u64],
    p: f64,
    q: f64,
    rng: &mut RngStream,
    opts: &GofOptions,
) -> Result<TestReport> {
    let params = ThinningParams::new(p, q)?;
    gof_test(Theorem::T2, xs, &params, rng, opts)
}

// ---------------------------------------------------------------------------
// power study

/// One row of a power curve: rejection rates under the null and the
/// alternative at a fixed sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerPoint {
    pub theorem: Theorem,
    pub method: TestMethod,
    pub n: usize,
    pub alpha: f64,
    pub trials: usize,
    /// Rejection rate under the null law (the measured size).
    pub size: f64,
    /// Rejection rate under the alternative law.
    pub power: f64,
    pub se_size: f64,
    pub se_power: f64,
    pub seed: u64,
    pub stream_id: u64,
}

/// Monte Carlo size and power of the goodness-of-fit test.
///
/// Trial `t` uses the child streams `master.substream(4t .. 4t+3)` for null
/// data, null test, alternative data and alternative test, and results are
/// reduced in trial order, so the outcome is identical whatever the degree
/// of parallelism.
pub fn power_study(
    null_law: &Pmf,
    alt_law: &Pmf,
    n: usize,
    trials: usize,
    alpha: f64,
    theorem: Theorem,
    params: &ThinningParams,
    opts: &GofOptions,
    master: &RngStream,
) -> Result<PowerPoint> {
    if trials < 100 {
        return Err(Error::Config(format!(
            "power study needs at least 100 trials, got {trials}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ParamDomain {
            name: "alpha",
            value: alpha,
            constraint: "0 < alpha < 1",
        });
    }
    if n < 40 {
        return Err(Error::InsufficientData { needed: 40, got: n });
    }
    let outcomes: Vec<(bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool)> {
            let mut rejected = [false; 2];
            for (slot, law) in [null_law, alt_law].into_iter().enumerate() {
                let mut data_rng = master.substream(4 * t + 2 * slot as u64);
                let mut test_rng = master.substream(4 * t + 2 * slot as u64 + 1);
                let xs = law.sample_many(n, &mut data_rng)?;
                let report = gof_test(theorem, &xs, params, &mut test_rng, opts)?;
                rejected[slot] = report.p_value <= alpha;
            }
            Ok((rejected[0], rejected[1]))
        })
        .collect::<Result<Vec<_>>>()?;
    let rate = |pick: fn(&(bool, bool)) -> bool| {
        outcomes.iter().filter(|o| pick(o)).count() as f64 / trials as f64
    };
    let size = rate(|o| o.0);
    let power = rate(|o| o.1);
    let se = |r: f64| (r * (1.0 - r) / trials as f64).sqrt();
    Ok(PowerPoint {
        theorem,
        method: opts.method,
        n,
        alpha,
        trials,
        size,
        power,
        se_size: se(size),
        se_power: se(power),
        seed: master.seed(),
        stream_id: master.stream_id(),
    })
}
