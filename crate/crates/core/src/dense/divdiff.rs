//! Scalar divided differences, including confluent nodes through the
//! derivative rule.

use num_complex::Complex64;

use crate::error::Result;
use crate::func::{derivative, AnalyticFn};

/// Relative threshold below which two nodes are treated as confluent. Chosen
/// to balance cancellation in the difference quotient against the accuracy of
/// the derivative rule.
pub const CONFLUENCE_RTOL: f64 = 1e-8;

fn confluent(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= CONFLUENCE_RTOL * 1.0f64.max(a.norm()).max(b.norm())
}

/// First-order divided difference `f[t, lambda]`, with `f'(t)` on the
/// confluent diagonal.
pub fn divided_difference(f: &dyn AnalyticFn, t: Complex64, lambda: Complex64) -> Result<Complex64> {
    if confluent(t, lambda) {
        derivative(f, t, 1)
    } else {
        Ok((f.eval(t) - f.eval(lambda)) / (t - lambda))
    }
}

/// Divided difference `f[nodes[0], ..., nodes[m-1]]` of arbitrary order via
/// the recursive table. Nodes are sorted into a canonical order first, which
/// groups (nearly) equal nodes together for the confluent derivative rule and
/// makes the value independent of the input permutation by construction.
pub fn divided_difference_table(f: &dyn AnalyticFn, nodes: &[Complex64]) -> Result<Complex64> {
    assert!(!nodes.is_empty(), "divided difference needs at least one node");
    let mut sorted = nodes.to_vec();
    sorted.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let m = sorted.len();
    // table[i] holds f[x_i, ..., x_{i+k}] at sweep k.
    let mut table: Vec<Complex64> = sorted.iter().map(|&z| f.eval(z)).collect();
    for k in 1..m {
        for i in 0..m - k {
            let lo = sorted[i];
            let hi = sorted[i + k];
            table[i] = if confluent(lo, hi) {
                // All nodes in between are confluent too (sorted order).
                let mut fact = 1.0;
                for j in 1..=k {
                    fact *= j as f64;
                }
                derivative(f, lo, k)? / fact
            } else {
                (table[i + 1] - table[i]) / (hi - lo)
            };
        }
        table.truncate(m - k);
    }
    Ok(table[0])
}
