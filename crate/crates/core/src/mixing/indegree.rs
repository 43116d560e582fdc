//! Load on receivers under push sampling: a node's indegree is
//! Binomial(n - 1, s / (n - 1)).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::topology_rng;
use crate::topology::sample_s_out;

/// Log-pmf of Binomial(m, p) for k = 0..=m, by the ratio recursion
/// `pmf(k+1) / pmf(k) = (m - k) / (k + 1) * p / (1 - p)`.
fn binomial_log_pmf(m: usize, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m + 1);
    let log_q = (-p).ln_1p();
    let log_odds = p.ln() - log_q;
    let mut cur = m as f64 * log_q;
    out.push(cur);
    for k in 0..m {
        cur += ((m - k) as f64).ln() - ((k + 1) as f64).ln() + log_odds;
        out.push(cur);
    }
    out
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `P(X >= k)` for `X ~ Binomial(n - 1, s / (n - 1))`, summed in log space.
pub fn indegree_tail(n: usize, s: usize, k: usize) -> Result<f64> {
    if n < 2 || s == 0 || s > n - 1 {
        return Err(Error::InvalidDegree { n, s, reason: "need n >= 2 and 1 <= s <= n-1" });
    }
    let m = n - 1;
    if k == 0 {
        return Ok(1.0);
    }
    if k > m {
        return Ok(0.0);
    }
    if s == m {
        return Ok(1.0);
    }
    let log_pmf = binomial_log_pmf(m, s as f64 / m as f64);
    Ok(log_sum_exp(&log_pmf[k..]).exp().min(1.0))
}

/// `P(X <= k)` for k = 0..n-1.
pub fn binomial_cdf(n: usize, s: usize) -> Result<Vec<f64>> {
    (0..n).map(|k| indegree_tail(n, s, k + 1).map(|t| 1.0 - t)).collect()
}

/// Counts of observed indegrees over (node, round) pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndegreeHistogram {
    pub n: usize,
    pub s: usize,
    pub rounds: u64,
    /// `counts[k]` = number of (node, round) pairs with indegree k.
    pub counts: Vec<u64>,
}

impl IndegreeHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Empirical `P(indegree <= k)` for k = 0..n-1.
    pub fn cdf(&self) -> Vec<f64> {
        let total = self.total() as f64;
        let mut acc = 0u64;
        self.counts
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 / total
            })
            .collect()
    }

    /// Smallest k with empirical `P(indegree <= k) >= q`.
    pub fn quantile(&self, q: f64) -> usize {
        let total = self.total();
        let need = (q * total as f64).ceil() as u64;
        let mut acc = 0u64;
        for (k, &c) in self.counts.iter().enumerate() {
            acc += c;
            if acc >= need {
                return k;
            }
        }
        self.counts.len() - 1
    }

    pub fn mean(&self) -> f64 {
        let sum: f64 = self.counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum();
        sum / self.total() as f64
    }

    /// Kolmogorov–Smirnov distance between the empirical and a reference CDF.
    pub fn ks_distance(&self, reference_cdf: &[f64]) -> f64 {
        self.cdf().iter().zip(reference_cdf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Simulates `rounds` push-sampling rounds (round r uses the topology
/// stream of `seed` for round r) and tallies every node's indegree.
pub fn indegree_histogram(n: usize, s: usize, rounds: u64, seed: u64) -> Result<IndegreeHistogram> {
    sample_s_out(n, s, &mut topology_rng(seed, 0))?;
    let counts = (0..rounds)
        .into_par_iter()
        .map(|r| -> Result<Vec<u64>> {
            let g = sample_s_out(n, s, &mut topology_rng(seed, r))?;
            let mut counts = vec![0u64; n];
            for deg in g.indegrees() {
                counts[deg] += 1;
            }
            Ok(counts)
        })
        .try_reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(IndegreeHistogram { n, s, rounds, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Binomial, DiscreteCDF};

    #[test]
    fn tail_edges() {
        assert_eq!(indegree_tail(10, 3, 0).unwrap(), 1.0);
        assert_eq!(indegree_tail(10, 3, 10).unwrap(), 0.0);
        assert_eq!(indegree_tail(10, 9, 9).unwrap(), 1.0);
        assert!(indegree_tail(10, 0, 1).is_err());
    }

    #[test]
    fn tail_matches_reference_binomial() {
        for &(n, s) in &[(10usize, 3usize), (100, 7), (1000, 10), (10_000, 13)] {
            let reference = Binomial::new(s as f64 / (n - 1) as f64, (n - 1) as u64).unwrap();
            for k in [1usize, 2, s, s + 3, 2 * s, 3 * s] {
                if k > n - 1 {
                    continue;
                }
                let expected = reference.sf(k as u64 - 1);
                let got = indegree_tail(n, s, k).unwrap();
                assert!(
                    (got - expected).abs() <= 1e-10 * expected.max(1e-300) + 1e-15,
                    "n={n} s={s} k={k}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn all_to_all_is_degenerate() {
        let h = indegree_histogram(6, 5, 20, 1).unwrap();
        assert_eq!(h.counts[5], 120);
        assert_eq!(h.quantile(0.99), 5);
        let cdf = binomial_cdf(6, 5).unwrap();
        assert_eq!(cdf[4], 0.0);
        assert_eq!(cdf[5], 1.0);
        assert_eq!(h.ks_distance(&cdf), 0.0);
    }

    #[test]
    fn quantile_definition() {
        let h = IndegreeHistogram { n: 4, s: 1, rounds: 1, counts: vec![1, 98, 1, 0] };
        assert_eq!(h.quantile(0.99), 1);
        assert_eq!(h.quantile(0.995), 2);
        assert_eq!(h.quantile(0.01), 0);
    }

    #[test]
    fn ks_shrinks_with_rounds() {
        let exact = binomial_cdf(100, 7).unwrap();
        let small = indegree_histogram(100, 7, 20, 3).unwrap().ks_distance(&exact);
        let large = indegree_histogram(100, 7, 5000, 3).unwrap().ks_distance(&exact);
        assert!(large < small, "{large} !< {small}");
        assert!(large < 0.01);
    }
}
