//! Exact joint laws of the thinned form pairs by direct enumeration.
//!
//! For a base law truncated at `n_max` the joint law of either form pair is
//! computed cell by cell: every `(x, y)` outcome is split over the possible
//! thinning counts with binomial weights and accumulated into a dense matrix
//! over `[0, 2 n_max]^2`. This is the brute-force oracle behind every
//! distributional claim in the crate — by construction its generating
//! function equals the closed-form products in [`crate::forms`] up to
//! floating-point rounding, and that equality is what the tests check.
//!
//! Dependence is quantified as the total variation distance between the
//! (renormalized) joint law and the product of its marginals; it is zero
//! exactly when the truncated law factorizes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{Theorem, ThinningParams};
use crate::pmf::Pmf;

/// Hard cap on joint-law allocations, in matrix cells.
pub const MAX_JOINT_CELLS: usize = 1 << 24;

/// Binomial rows switch to log-space evaluation above this `n`.
const LOG_SPACE_THRESHOLD: usize = 500;

#[derive(Debug, Clone, Serialize)]
pub struct JointMeta {
    pub base: String,
    pub theorem: Theorem,
    pub p: f64,
    pub q: Option<f64>,
    pub n_max: usize,
}

/// Dense joint law of a form pair on `[0, 2 n_max]^2` with tracked deficit.
#[derive(Debug, Clone, Serialize)]
pub struct JointPmf {
    probs: Vec<Vec<f64>>,
    deficit: f64,
    meta: JointMeta,
}

impl JointPmf {
    /// Wraps an explicit matrix; entries must be non-negative with total
    /// mass at most one.
    pub fn from_matrix(probs: Vec<Vec<f64>>, meta: JointMeta) -> Result<Self> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(Error::Config("joint law matrix is empty".into()));
        }
        let cols = probs[0].len();
        let mut total = 0.0;
        for row in &probs {
            if row.len() != cols {
                return Err(Error::Config("joint law matrix is ragged".into()));
            }
            for &cell in row {
                if !(cell >= 0.0) {
                    return Err(Error::Config(format!("negative joint mass {cell}")));
                }
                total += cell;
            }
        }
        if total > 1.0 + 1e-10 {
            return Err(Error::Config(format!("joint mass {total} exceeds one")));
        }
        Ok(Self {
            probs,
            deficit: (1.0 - total).max(0.0),
            meta,
        })
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs
            .get(i)
            .and_then(|row| row.get(j))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn meta(&self) -> &JointMeta {
        &self.meta
    }

    /// Side length of the square support `[0, 2 n_max]`.
    pub fn side(&self) -> usize {
        self.probs.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().flatten().sum()
    }

    /// Row and column sums as truncated laws; each inherits the joint deficit.
    pub fn marginals(&self) -> (Pmf, Pmf) {
        let side = self.side();
        let mut first = vec![0.0; side];
        let mut second = vec![0.0; side];
        for (i, row) in self.probs.iter().enumerate() {
            for (j, &cell) in row.iter().enumerate() {
                first[i] += cell;
                second[j] += cell;
            }
        }
        let tag = match self.meta.theorem {
            Theorem::T1 => ("L1", "L2"),
            Theorem::T2 => ("K1", "K2"),
        };
        (
            Pmf::from_parts(first, self.deficit, format!("{} of {}", tag.0, self.meta.base)),
            Pmf::from_parts(second, self.deficit, format!("{} of {}", tag.1, self.meta.base)),
        )
    }

    /// Total variation distance to the product of the marginals after
    /// renormalizing the stored mass to one. Zero iff the truncated joint
    /// law factorizes.
    pub fn tv_independence_gap(&self) -> f64 {
        let total = self.total_mass();
        if total <= 0.0 {
            return 0.0;
        }
        let side = self.side();
        let mut first = vec![0.0; side];
        let mut second = vec![0.0; side];
        for (i, row) in self.probs.iter().enumerate() {
            for (j, &cell) in row.iter().enumerate() {
                first[i] += cell;
                second[j] += cell;
            }
        }
        let mut gap = 0.0;
        for (i, row) in self.probs.iter().enumerate() {
            for (j, &cell) in row.iter().enumerate() {
                gap += (cell / total - first[i] * second[j] / (total * total)).abs();
            }
        }
        0.5 * gap
    }

    /// Evaluates `sum_{i,j} P(i,j) u^i v^j` for `|u|, |v| <= 1`.
    pub fn pgf(&self, u: f64, v: f64) -> Result<f64> {
        for z in [u, v] {
            if !(z.abs() <= 1.0 + 1e-9) {
                return Err(Error::OutsideUnitDisc { value: z });
            }
        }
        let mut acc = 0.0;
        for row in self.probs.iter().rev() {
            let mut inner = 0.0;
            for &cell in row.iter().rev() {
                inner = inner * v + cell;
            }
            acc = acc * u + inner;
        }
        Ok(acc)
    }
}

/// Row `i -> C(n, i) keep^i (1-keep)^(n-i)` of binomial weights.
///
/// Uses the multiplicative recurrence for small `n` and log-space evaluation
/// above [`LOG_SPACE_THRESHOLD`], where the recurrence could underflow at the
/// ends of the row.
pub(crate) fn binomial_row(n: usize, keep: f64) -> Vec<f64> {
    debug_assert!(keep > 0.0 && keep < 1.0);
    let mut row = Vec::with_capacity(n + 1);
    if n <= LOG_SPACE_THRESHOLD {
        let ratio = keep / (1.0 - keep);
        let mut w = (1.0 - keep).powi(n as i32);
        for i in 0..=n {
            row.push(w);
            w *= ratio * (n - i) as f64 / (i + 1) as f64;
        }
    } else {
        let ln_keep = keep.ln();
        let ln_comp = (1.0 - keep).ln();
        let mut ln_choose = 0.0;
        for i in 0..=n {
            row.push((ln_choose + i as f64 * ln_keep + (n - i) as f64 * ln_comp).exp());
            ln_choose += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
    }
    row
}

fn check_capacity(n_max: usize) -> Result<usize> {
    let side = 2 * n_max + 1;
    let cells = side * side;
    if cells > MAX_JOINT_CELLS {
        return Err(Error::Capacity {
            cells,
            cap: MAX_JOINT_CELLS,
        });
    }
    Ok(side)
}

/// Joint law of `(L1, L2)` by enumeration over `(x, thinning count, y, eps)`.
pub fn exact_joint_t1(pmf: &Pmf, params: &ThinningParams) -> Result<JointPmf> {
    let n_max = pmf.n_max();
    let side = check_capacity(n_max)?;
    let p = params.p();
    let mut probs = vec![vec![0.0; side]; side];
    for x in 0..=n_max {
        let wx = pmf.prob(x);
        if wx == 0.0 {
            continue;
        }
        let row = binomial_row(x, 1.0 - p);
        for (kept, &b) in row.iter().enumerate() {
            let w = wx * b;
            if w == 0.0 {
                continue;
            }
            let comp = x - kept;
            for y in 0..=n_max {
                let wy = pmf.prob(y);
                if wy == 0.0 {
                    continue;
                }
                // eps = 1: Y joins L1; eps = 0: Y joins L2
                probs[kept + y][comp] += w * p * wy;
                probs[kept][comp + y] += w * (1.0 - p) * wy;
            }
        }
    }
    finish_joint(probs, pmf, Theorem::T1, params.p(), None, n_max)
}

/// Joint law of `(K1, K2)` by enumeration over both thinning counts.
pub fn exact_joint_t2(pmf: &Pmf, params: &ThinningParams) -> Result<JointPmf> {
    let n_max = pmf.n_max();
    let side = check_capacity(n_max)?;
    let rows_y: Vec<Vec<f64>> = (0..=n_max)
        .map(|y| binomial_row(y, 1.0 - params.q()))
        .collect();
    let mut probs = vec![vec![0.0; side]; side];
    for x in 0..=n_max {
        let wx = pmf.prob(x);
        if wx == 0.0 {
            continue;
        }
        let row_x = binomial_row(x, 1.0 - params.p());
        for y in 0..=n_max {
            let wy = pmf.prob(y);
            if wy == 0.0 {
                continue;
            }
            let row_y = &rows_y[y];
            for (i, &bx) in row_x.iter().enumerate() {
                let w = wx * bx * wy;
                if w == 0.0 {
                    continue;
                }
                for (j, &by) in row_y.iter().enumerate() {
                    probs[i + j][(x - i) + (y - j)] += w * by;
                }
            }
        }
    }
    finish_joint(probs, pmf, Theorem::T2, params.p(), Some(params.q()), n_max)
}

fn finish_joint(
    probs: Vec<Vec<f64>>,
    pmf: &Pmf,
    theorem: Theorem,
    p: f64,
    q: Option<f64>,
    n_max: usize,
) -> Result<JointPmf> {
    let total: f64 = probs.iter().flatten().sum();
    Ok(JointPmf {
        probs,
        deficit: (1.0 - total).max(0.0),
        meta: JointMeta {
            base: pmf.label().to_string(),
            theorem,
            p,
            q,
            n_max,
        },
    })
}
