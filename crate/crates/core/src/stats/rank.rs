use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::rational::{self, Rational};
use super::StatsError;

/// Treatment arm. The labels are symmetric; neither is privileged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupLabel {
    A,
    B,
}

impl GroupLabel {
    pub fn other(self) -> Self {
        match self {
            GroupLabel::A => GroupLabel::B,
            GroupLabel::B => GroupLabel::A,
        }
    }
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupLabel::A => f.write_str("A"),
            GroupLabel::B => f.write_str("B"),
        }
    }
}

impl std::str::FromStr for GroupLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(GroupLabel::A),
            "B" | "b" => Ok(GroupLabel::B),
            other => Err(format!("unknown group label {other:?} (expected A or B)")),
        }
    }
}

/// A panel-assigned rank. Higher is more meaningful; tied items share the
/// average of the positions they span, so values are integers or
/// half-integers in practice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rank(#[serde(with = "rational")] Rational);

impl Rank {
    pub fn new(value: Rational) -> Self {
        Rank(value)
    }

    pub fn integer(value: i64) -> Self {
        Rank(Rational::from_integer(value))
    }

    pub fn value(&self) -> Rational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        rational::to_f64(&self.0)
    }
}

impl From<i64> for Rank {
    fn from(v: i64) -> Self {
        Rank::integer(v)
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rational::display(&self.0))
    }
}

/// Convert a best-first (or worst-first) list of tie groups into midranks.
///
/// With `most_meaningful_first`, the first tier receives the highest rank
/// values. A tier of size `t` occupying positions `p+1..=p+t` (counted from
/// the least meaningful end) receives `p + (t+1)/2`. The output preserves
/// the input order of items.
pub fn midranks_from_ordering<T>(
    ordered_tiers: &[Vec<T>],
    most_meaningful_first: bool,
) -> Result<Vec<(T, Rank)>, StatsError>
where
    T: Clone + Eq + Hash + fmt::Display,
{
    if ordered_tiers.is_empty() {
        return Err(StatsError::EmptyOrdering);
    }
    let mut seen = HashSet::new();
    for (index, tier) in ordered_tiers.iter().enumerate() {
        if tier.is_empty() {
            return Err(StatsError::EmptyTier { index });
        }
        for item in tier {
            if !seen.insert(item.clone()) {
                return Err(StatsError::DuplicateItem(item.to_string()));
            }
        }
    }

    let n = seen.len() as i64;
    let mut out = Vec::with_capacity(seen.len());
    // `start` is the 1-based position of the tier's first item counted from
    // the most meaningful end.
    let mut start: i64 = 1;
    for tier in ordered_tiers {
        let t = tier.len() as i64;
        // Positions from the top: start..start+t-1. Average position from top:
        // start + (t-1)/2. Convert to a bottom-up rank where needed.
        let avg_from_top = Rational::from_integer(start) + Rational::new(t - 1, 2);
        let rank = if most_meaningful_first {
            Rational::from_integer(n + 1) - avg_from_top
        } else {
            avg_from_top
        };
        for item in tier {
            out.push((item.clone(), Rank(rank)));
        }
        start += t;
    }
    Ok(out)
}

/// Why a rank list fails the midrank-sequence invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidrankViolation(pub String);

impl fmt::Display for MidrankViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Check that `ranks` is a valid midrank sequence over `1..=n`: after
/// sorting, each run of equal values spanning positions `p+1..=p+t` must
/// carry exactly `p + (t+1)/2`.
pub fn validate_midranks(ranks: &[Rank]) -> Result<(), MidrankViolation> {
    if ranks.is_empty() {
        return Err(MidrankViolation("rank list is empty".into()));
    }
    let mut sorted: Vec<Rational> = ranks.iter().map(Rank::value).collect();
    sorted.sort();

    let mut p = 0usize;
    while p < sorted.len() {
        let value = sorted[p];
        let t = sorted[p..].iter().take_while(|&&v| v == value).count();
        let expected = Rational::from_integer(p as i64) + Rational::new(t as i64 + 1, 2);
        if value != expected {
            let span = if t == 1 {
                format!("position {}", p + 1)
            } else {
                format!("positions {}-{}", p + 1, p + t)
            };
            return Err(MidrankViolation(format!(
                "value {} at {span} should be {}",
                rational::display(&value),
                rational::display(&expected)
            )));
        }
        p += t;
    }
    Ok(())
}

/// One ranked participant after unblinding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankEntry {
    pub participant_ref: String,
    pub group: GroupLabel,
    pub rank: Rank,
}

/// Panel ranks joined to treatment groups. Construction validates that both
/// groups are nonempty and the ranks form a midrank sequence over `1..=N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankVector {
    entries: Vec<RankEntry>,
    n_a: usize,
    n_b: usize,
}

impl RankVector {
    pub fn new(entries: Vec<RankEntry>) -> Result<Self, StatsError> {
        let n_a = entries.iter().filter(|e| e.group == GroupLabel::A).count();
        let n_b = entries.len() - n_a;
        if n_a == 0 || n_b == 0 {
            return Err(StatsError::InvalidRankVector(format!(
                "both groups need at least one participant (n_A = {n_a}, n_B = {n_b})"
            )));
        }
        let ranks: Vec<Rank> = entries.iter().map(|e| e.rank).collect();
        validate_midranks(&ranks).map_err(|v| StatsError::InvalidRankVector(v.0))?;

        let n = entries.len() as i64;
        let total: Rational = ranks.iter().map(Rank::value).sum();
        if total != Rational::new(n * (n + 1), 2) {
            return Err(StatsError::InvalidRankVector(format!(
                "rank sum {} differs from N(N+1)/2 = {}",
                rational::display(&total),
                n * (n + 1) / 2
            )));
        }
        Ok(RankVector { entries, n_a, n_b })
    }

    /// Build from two plain rank lists, naming participants `A1.., B1..`.
    pub fn from_groups<R: Into<Rank> + Copy>(a: &[R], b: &[R]) -> Result<Self, StatsError> {
        let entries = a
            .iter()
            .enumerate()
            .map(|(i, &r)| RankEntry {
                participant_ref: format!("A{}", i + 1),
                group: GroupLabel::A,
                rank: r.into(),
            })
            .chain(b.iter().enumerate().map(|(i, &r)| RankEntry {
                participant_ref: format!("B{}", i + 1),
                group: GroupLabel::B,
                rank: r.into(),
            }))
            .collect();
        RankVector::new(entries)
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn group_size(&self, group: GroupLabel) -> usize {
        match group {
            GroupLabel::A => self.n_a,
            GroupLabel::B => self.n_b,
        }
    }

    pub fn ranks_of(&self, group: GroupLabel) -> impl Iterator<Item = Rank> + '_ {
        self.entries
            .iter()
            .filter(move |e| e.group == group)
            .map(|e| e.rank)
    }

    pub fn rank_sum(&self, group: GroupLabel) -> Rational {
        self.ranks_of(group).map(|r| r.value()).sum()
    }

    /// Sizes of every tie group (runs of equal rank), including singletons.
    pub fn tie_sizes(&self) -> Vec<usize> {
        let mut sorted: Vec<Rational> = self.entries.iter().map(|e| e.rank.value()).collect();
        sorted.sort();
        let mut sizes = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let t = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
            sizes.push(t);
            i += t;
        }
        sizes
    }

    pub fn has_ties(&self) -> bool {
        self.tie_sizes().iter().any(|&t| t > 1)
    }

    /// The same data with group labels exchanged.
    pub fn swapped(&self) -> RankVector {
        RankVector {
            entries: self
                .entries
                .iter()
                .map(|e| RankEntry {
                    group: e.group.other(),
                    ..e.clone()
                })
                .collect(),
            n_a: self.n_b,
            n_b: self.n_a,
        }
    }
}

impl<'de> Deserialize<'de> for RankVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            entries: Vec<RankEntry>,
        }
        let raw = Raw::deserialize(d)?;
        RankVector::new(raw.entries).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rank {
        Rank::new(Rational::new(n, d))
    }

    #[test]
    fn singleton_tiers_best_first() {
        let tiers = vec![vec!["x"], vec!["y"], vec!["z"]];
        let ranks = midranks_from_ordering(&tiers, true).unwrap();
        assert_eq!(
            ranks,
            vec![("x", Rank::from(3)), ("y", Rank::from(2)), ("z", Rank::from(1))]
        );
    }

    #[test]
    fn tied_top_pair_gets_average() {
        let tiers = vec![vec!["a", "b"], vec!["c"]];
        let ranks = midranks_from_ordering(&tiers, true).unwrap();
        assert_eq!(ranks, vec![("a", r(5, 2)), ("b", r(5, 2)), ("c", Rank::from(1))]);
    }

    #[test]
    fn single_tier_of_four() {
        let tiers = vec![vec![1, 2, 3, 4]];
        let ranks = midranks_from_ordering(&tiers, true).unwrap();
        assert!(ranks.iter().all(|(_, rank)| *rank == r(5, 2)));
    }

    #[test]
    fn worst_first_reverses() {
        let tiers = vec![vec!["z"], vec!["y", "w"], vec!["x"]];
        let ranks = midranks_from_ordering(&tiers, false).unwrap();
        assert_eq!(
            ranks,
            vec![("z", Rank::from(1)), ("y", r(5, 2)), ("w", r(5, 2)), ("x", Rank::from(4))]
        );
    }

    #[test]
    fn ordering_errors() {
        let empty: Vec<Vec<&str>> = vec![];
        assert!(matches!(
            midranks_from_ordering(&empty, true),
            Err(StatsError::EmptyOrdering)
        ));
        assert!(matches!(
            midranks_from_ordering(&[vec!["a"], vec![]], true),
            Err(StatsError::EmptyTier { index: 1 })
        ));
        assert!(matches!(
            midranks_from_ordering(&[vec!["a"], vec!["b", "a"]], true),
            Err(StatsError::DuplicateItem(ref s)) if s == "a"
        ));
    }

    #[test]
    fn validate_examples() {
        assert!(validate_midranks(&[1.into(), 2.into(), 3.into()]).is_ok());
        let err = validate_midranks(&[1.into(), 2.into(), 2.into()]).unwrap_err();
        assert!(err.0.contains("positions 2-3"), "{err}");
        assert!(err.0.contains("2.5"), "{err}");
        assert!(validate_midranks(&[r(5, 2), r(5, 2), 1.into()]).is_ok());
        assert!(validate_midranks(&[]).is_err());
        assert!(validate_midranks(&[0.into()]).is_err());
        assert!(validate_midranks(&[1.into(), 3.into()]).is_err());
    }

    #[test]
    fn rank_vector_rejects_bad_input() {
        assert!(RankVector::from_groups::<i64>(&[1, 2], &[]).is_err());
        assert!(RankVector::from_groups::<i64>(&[1, 2], &[2]).is_err());
        assert!(RankVector::from_groups::<i64>(&[1, 3], &[2]).is_ok());
    }

    #[test]
    fn tie_sizes_and_swap() {
        let rv = RankVector::from_groups(&[r(3, 2), 4.into()], &[r(3, 2), 3.into()]).unwrap();
        assert_eq!(rv.tie_sizes(), vec![2, 1, 1]);
        assert!(rv.has_ties());
        let sw = rv.swapped();
        assert_eq!(sw.rank_sum(GroupLabel::A), rv.rank_sum(GroupLabel::B));
        assert_eq!(sw.n_a(), rv.n_b());
    }

    #[test]
    fn rank_serde_round_trip() {
        let json = serde_json::to_string(&vec![r(5, 2), Rank::from(3)]).unwrap();
        assert_eq!(json, "[2.5,3]");
        let back: Vec<Rank> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![r(5, 2), Rank::from(3)]);
    }

    #[test]
    fn rank_vector_deserialize_validates() {
        let bad = r#"{"entries":[{"participant_ref":"p","group":"A","rank":2},
                                 {"participant_ref":"q","group":"B","rank":2}]}"#;
        assert!(serde_json::from_str::<RankVector>(bad).is_err());
    }
}
