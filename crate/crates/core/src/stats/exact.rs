use serde::{Deserialize, Serialize};

use super::rational::Rational;
use super::{Alternative, StatsError};

/// Default largest group size for which exact p-values are used.
pub const DEFAULT_EXACT_CAP: usize = 25;

/// Hard ceiling on the exact cap; counts for larger groups overflow `u128`.
pub const MAX_EXACT_CAP: usize = 60;

/// Null distribution of the Mann-Whitney statistic for group sizes
/// `(n_a, n_b)` with no ties: `counts[u]` is the number of ways to choose
/// which `n_a` of the ranks `1..=n_a+n_b` belong to group A such that
/// A's U statistic equals `u`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactNullDistribution {
    pub n_a: usize,
    pub n_b: usize,
    pub counts: Vec<u128>,
    pub total: u128,
}

/// Tabulate the exact null distribution by dynamic programming.
///
/// Let `f(a, b, u)` count arrangements of `a` A-items and `b` B-items with
/// A's statistic equal to `u`. Conditioning on the highest rank:
/// `f(a, b, u) = f(a-1, b, u-b) + f(a, b-1, u)`.
pub fn exact_null_distribution(
    n_a: usize,
    n_b: usize,
    cap: usize,
) -> Result<ExactNullDistribution, StatsError> {
    if n_a == 0 || n_b == 0 {
        return Err(StatsError::InvalidSize { n_a, n_b });
    }
    let cap = cap.min(MAX_EXACT_CAP);
    if n_a > cap || n_b > cap {
        return Err(StatsError::SizeAboveCap { n_a, n_b, cap });
    }

    let max_u = n_a * n_b;
    // prev[b] holds f(a-1, b, ·); cur[b] holds f(a, b, ·).
    let mut prev: Vec<Vec<u128>> = (0..=n_b).map(|_| vec![1]).collect();
    for a in 1..=n_a {
        let mut cur: Vec<Vec<u128>> = Vec::with_capacity(n_b + 1);
        cur.push(vec![1]);
        for b in 1..=n_b {
            let mut row = vec![0u128; a * b + 1];
            for (u, &c) in prev[b].iter().enumerate() {
                row[u + b] += c;
            }
            for (u, &c) in cur[b - 1].iter().enumerate() {
                row[u] += c;
            }
            cur.push(row);
        }
        prev = cur;
    }
    let counts = std::mem::take(&mut prev[n_b]);
    debug_assert_eq!(counts.len(), max_u + 1);
    let total = counts.iter().sum();
    Ok(ExactNullDistribution {
        n_a,
        n_b,
        counts,
        total,
    })
}

impl ExactNullDistribution {
    pub fn max_u(&self) -> usize {
        self.n_a * self.n_b
    }

    pub fn count(&self, u: usize) -> u128 {
        self.counts.get(u).copied().unwrap_or(0)
    }

    /// Number of arrangements with statistic `<= u`.
    pub fn lower_tail_count(&self, u: usize) -> u128 {
        self.counts.iter().take(u + 1).sum()
    }

    /// `P(U <= u)` under the null.
    pub fn cdf(&self, u: usize) -> f64 {
        self.lower_tail_count(u) as f64 / self.total as f64
    }

    /// Exact p-value for A's observed statistic `u_a`.
    ///
    /// One-sided alternatives use the lower tail of the statistic for the
    /// group expected to lose: `AGreater` uses `U_B = n_a·n_b − u_a`,
    /// `BGreater` uses `u_a`. Two-sided doubles the lower tail of
    /// `min(U_A, U_B)`, capped at 1.
    pub fn p_value(&self, u_a: Rational, alternative: Alternative) -> Result<f64, StatsError> {
        if !u_a.is_integer() {
            return Err(StatsError::TiesPresent);
        }
        let u_a = *u_a.numer();
        let max_u = self.max_u() as i64;
        if u_a < 0 || u_a > max_u {
            return Err(StatsError::StatisticOutOfRange {
                u: u_a,
                max: max_u,
            });
        }
        let u_b = max_u - u_a;
        let p = match alternative {
            Alternative::TwoSided => (2.0 * self.cdf(u_a.min(u_b) as usize)).min(1.0),
            Alternative::AGreater => self.cdf(u_b as usize),
            Alternative::BGreater => self.cdf(u_a as usize),
        };
        Ok(p)
    }
}

/// Exact p-value straight from sizes; tabulates the distribution each call.
pub fn exact_p(
    u_a: Rational,
    n_a: usize,
    n_b: usize,
    alternative: Alternative,
    cap: usize,
) -> Result<f64, StatsError> {
    if !u_a.is_integer() {
        return Err(StatsError::TiesPresent);
    }
    exact_null_distribution(n_a, n_b, cap)?.p_value(u_a, alternative)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(u: i64) -> Rational {
        Rational::from_integer(u)
    }

    #[test]
    fn one_by_one() {
        let d = exact_null_distribution(1, 1, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(d.counts, vec![1, 1]);
        assert_eq!(d.total, 2);
    }

    #[test]
    fn two_by_two_matches_hand_enumeration() {
        // Subsets of {1,2,3,4} of size 2 and U_A = sum - 3:
        // {1,2}:0 {1,3}:1 {1,4}:2 {2,3}:2 {2,4}:3 {3,4}:4
        let d = exact_null_distribution(2, 2, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(d.counts, vec![1, 1, 2, 1, 1]);
        assert_eq!(d.total, 6);
    }

    #[test]
    fn five_by_six_low_tail() {
        let d = exact_null_distribution(5, 6, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(d.total, 462);
        assert_eq!(&d.counts[..3], &[1, 1, 2]);
    }

    #[test]
    fn largest_default_cap_total() {
        // C(50, 25)
        let d = exact_null_distribution(25, 25, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(d.total, 126_410_606_437_752);
    }

    #[test]
    fn cap_and_size_errors() {
        assert!(matches!(
            exact_null_distribution(26, 3, DEFAULT_EXACT_CAP),
            Err(StatsError::SizeAboveCap { .. })
        ));
        assert!(matches!(
            exact_null_distribution(0, 3, DEFAULT_EXACT_CAP),
            Err(StatsError::InvalidSize { .. })
        ));
        assert!(exact_null_distribution(30, 3, 30).is_ok());
    }

    #[test]
    fn exact_p_examples() {
        let cap = DEFAULT_EXACT_CAP;
        assert_eq!(exact_p(int(0), 1, 1, Alternative::TwoSided, cap).unwrap(), 1.0);
        let p = exact_p(int(0), 2, 2, Alternative::TwoSided, cap).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        let p = exact_p(int(2), 5, 6, Alternative::TwoSided, cap).unwrap();
        assert!((p - 8.0 / 462.0).abs() < 1e-15);
        // Passing the larger statistic gives the same two-sided answer.
        let p2 = exact_p(int(28), 5, 6, Alternative::TwoSided, cap).unwrap();
        assert_eq!(p, p2);
    }

    #[test]
    fn one_sided_directions() {
        let d = exact_null_distribution(6, 5, DEFAULT_EXACT_CAP).unwrap();
        let greater = d.p_value(int(28), Alternative::AGreater).unwrap();
        let less = d.p_value(int(28), Alternative::BGreater).unwrap();
        assert!((greater - 4.0 / 462.0).abs() < 1e-15);
        assert!((less - (1.0 - 2.0 / 462.0)).abs() < 1e-12);
    }

    #[test]
    fn exact_p_rejects_midrank_statistic() {
        assert!(matches!(
            exact_p(Rational::new(5, 2), 2, 2, Alternative::TwoSided, 25),
            Err(StatsError::TiesPresent)
        ));
        assert!(matches!(
            exact_p(int(5), 2, 2, Alternative::TwoSided, 25),
            Err(StatsError::StatisticOutOfRange { .. })
        ));
    }
}
