//! Brute-force enumeration oracle for the joint form laws.
//!
//! Deliberately independent of the library's dense-matrix implementation:
//! binomial weights come from an exact Pascal triangle, the law is
//! accumulated in a hash map, and the dependence gap is computed from the
//! map in sorted-key order.

use std::collections::HashMap;

pub type Law = HashMap<(u64, u64), f64>;

/// Exact binomial coefficients up to row `n` (row sizes stay far below
/// u128 range for the supports used in tests).
pub fn pascal_row(n: usize) -> Vec<u128> {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128];
        for w in row.windows(2) {
            next.push(w[0] + w[1]);
        }
        next.push(1);
        row = next;
    }
    row
}

fn binom_weight(n: usize, k: usize, keep: f64) -> f64 {
    let row = pascal_row(n);
    row[k] as f64 * keep.powi(k as i32) * (1.0 - keep).powi((n - k) as i32)
}

/// Joint law of the one-sided forms by full enumeration over
/// `(x, kept, y, switch)`.
pub fn enum_joint_t1(probs: &[f64], p: f64) -> Law {
    let mut law = Law::new();
    for (x, &wx) in probs.iter().enumerate() {
        if wx == 0.0 {
            continue;
        }
        for kept in 0..=x {
            let w = wx * binom_weight(x, kept, 1.0 - p);
            for (y, &wy) in probs.iter().enumerate() {
                if wy == 0.0 {
                    continue;
                }
                let (kept, comp, x, y) = (kept as u64, (x - kept) as u64, x as u64, y as u64);
                let _ = x;
                *law.entry((kept + y, comp)).or_insert(0.0) += w * p * wy;
                *law.entry((kept, comp + y)).or_insert(0.0) += w * (1.0 - p) * wy;
            }
        }
    }
    law
}

/// Joint law of the two-sided forms by full enumeration over both splits.
pub fn enum_joint_t2(probs: &[f64], p: f64, q: f64) -> Law {
    let mut law = Law::new();
    for (x, &wx) in probs.iter().enumerate() {
        if wx == 0.0 {
            continue;
        }
        for i in 0..=x {
            let wxi = wx * binom_weight(x, i, 1.0 - p);
            for (y, &wy) in probs.iter().enumerate() {
                if wy == 0.0 {
                    continue;
                }
                for j in 0..=y {
                    let w = wxi * wy * binom_weight(y, j, 1.0 - q);
                    let cell = ((i + j) as u64, ((x - i) + (y - j)) as u64);
                    *law.entry(cell).or_insert(0.0) += w;
                }
            }
        }
    }
    law
}

/// Total variation distance between the renormalized law and the product of
/// its marginals.
pub fn gap_from_law(law: &Law) -> f64 {
    let total: f64 = {
        let mut keys: Vec<_> = law.keys().copied().collect();
        keys.sort_unstable();
        keys.iter().map(|k| law[k]).sum()
    };
    if total <= 0.0 {
        return 0.0;
    }
    let mut first: HashMap<u64, f64> = HashMap::new();
    let mut second: HashMap<u64, f64> = HashMap::new();
    let mut keys: Vec<_> = law.keys().copied().collect();
    keys.sort_unstable();
    for &(i, j) in &keys {
        *first.entry(i).or_insert(0.0) += law[&(i, j)];
        *second.entry(j).or_insert(0.0) += law[&(i, j)];
    }
    let mut rows: Vec<_> = first.keys().copied().collect();
    rows.sort_unstable();
    let mut cols: Vec<_> = second.keys().copied().collect();
    cols.sort_unstable();
    let mut gap = 0.0;
    for &i in &rows {
        for &j in &cols {
            let joint = law.get(&(i, j)).copied().unwrap_or(0.0) / total;
            let product = first[&i] * second[&j] / (total * total);
            gap += (joint - product).abs();
        }
    }
    0.5 * gap
}

/// `sum law[(i, j)] u^i v^j` straight off the map, in sorted-key order.
pub fn pgf_from_law(law: &Law, u: f64, v: f64) -> f64 {
    let mut keys: Vec<_> = law.keys().copied().collect();
    keys.sort_unstable();
    keys.iter()
        .map(|&(i, j)| law[&(i, j)] * u.powi(i as i32) * v.powi(j as i32))
        .sum()
}
