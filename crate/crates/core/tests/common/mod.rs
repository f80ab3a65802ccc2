//! Independent oracles and shared fixtures for the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use impact_core::anecdote::{ingest_str, Lexicon, RecordFormat};
use impact_core::session::{open_session, ArmMap, CardId, OpenedSession, SessionOptions};
use impact_core::stats::{midranks_from_ordering, GroupLabel, RankEntry, RankVector};
use proptest::prelude::*;

pub const COHORT: &str = include_str!("../fixtures/golden_cohort.jsonl");
pub const ARM_MAP: &str = include_str!("../fixtures/golden_arm_map.json");
pub const ORDERING: &str = include_str!("../fixtures/golden_ordering.txt");

pub fn golden_arm_map() -> ArmMap {
    serde_json::from_str(ARM_MAP).unwrap()
}

pub fn golden_participant_order() -> Vec<String> {
    ORDERING
        .lines()
        .map(str::trim)
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn open_golden(seed: u64) -> OpenedSession {
    let anecdotes = ingest_str(COHORT, RecordFormat::Jsonl).unwrap().anecdotes;
    let options = SessionOptions {
        seed,
        ..Default::default()
    };
    open_session(&anecdotes, &options, &Lexicon::shipped()).unwrap()
}

/// The golden ordering in this session's card ids.
pub fn golden_tiers(opened: &OpenedSession) -> Vec<Vec<CardId>> {
    let by_participant: BTreeMap<&str, &CardId> = opened
        .sealed
        .entries
        .iter()
        .map(|(c, p)| (p.as_str(), c))
        .collect();
    golden_participant_order()
        .iter()
        .map(|p| vec![by_participant[p.as_str()].clone()])
        .collect()
}

pub fn finalized_golden(seed: u64) -> OpenedSession {
    let mut opened = open_golden(seed);
    let tiers = golden_tiers(&opened);
    opened.session.submit_ordering(tiers, "panel-chair", None).unwrap();
    opened.session.finalize("panel-chair", None).unwrap();
    opened
}

/// Null counts of U_A by enumerating every n_a-subset of positions 1..=N
/// as the A ranks.
pub fn brute_force_null(n_a: usize, n_b: usize) -> Vec<u128> {
    let n = n_a + n_b;
    let mut counts = vec![0u128; n_a * n_b + 1];
    let offset = n_a * (n_a + 1) / 2;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n_a {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
        counts[rank_sum - offset] += 1;
    }
    counts
}

/// Two-sided p by summing brute-force counts: twice the smaller tail,
/// capped at one.
pub fn brute_force_two_sided(counts: &[u128], u_a: usize) -> f64 {
    let max = counts.len() - 1;
    let u = u_a.min(max - u_a);
    let tail: u128 = counts[..=u].iter().sum();
    let total: u128 = counts.iter().sum();
    (2.0 * tail as f64 / total as f64).min(1.0)
}

/// Standard normal upper tail by composite Simpson integration of the
/// density from 0 to |z|.
pub fn normal_upper_tail(z: f64) -> f64 {
    let z = z.abs();
    let steps = 20_000;
    let h = z / steps as f64;
    let phi = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = phi(0.0) + phi(z);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * phi(i as f64 * h);
    }
    0.5 - acc * h / 3.0
}

/// Tie-corrected normal approximation from raw rank lists.
pub fn oracle_normal_two_sided(ranks_a: &[f64], ranks_b: &[f64]) -> f64 {
    let (na, nb) = (ranks_a.len() as f64, ranks_b.len() as f64);
    let n = na + nb;
    let r_a: f64 = ranks_a.iter().sum();
    let u_a = r_a - na * (na + 1.0) / 2.0;
    let mut all: Vec<f64> = ranks_a.iter().chain(ranks_b).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < all.len() {
        let j = all[i..].iter().take_while(|&&r| r == all[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let z = (u_a - na * nb / 2.0) / var.sqrt();
    2.0 * normal_upper_tail(z)
}

/// Random valid rank vectors: a random arm layout over N positions and a
/// random set of tie breaks, turned into midranks. About half are tie-free.
pub fn rank_vectors() -> impl Strategy<Value = RankVector> {
    (1usize..=12, 1usize..=12)
        .prop_flat_map(|(n_a, n_b)| {
            let mut groups = vec![GroupLabel::A; n_a];
            groups.extend(vec![GroupLabel::B; n_b]);
            let n = n_a + n_b;
            (
                Just(groups).prop_shuffle(),
                prop::bool::ANY,
                prop::collection::vec(prop::bool::weighted(0.7), n - 1),
            )
        })
        .prop_map(|(groups, tie_free, breaks)| {
            let mut tiers = vec![vec![0usize]];
            for (i, brk) in breaks.into_iter().enumerate() {
                if tie_free || brk {
                    tiers.push(vec![i + 1]);
                } else {
                    tiers.last_mut().unwrap().push(i + 1);
                }
            }
            let entries = midranks_from_ordering(&tiers, true)
                .unwrap()
                .into_iter()
                .map(|(i, rank)| RankEntry {
                    participant_ref: format!("p{i}"),
                    group: groups[i],
                    rank,
                })
                .collect();
            RankVector::new(entries).unwrap()
        })
}
