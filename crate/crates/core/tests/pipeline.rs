mod common;

use std::collections::BTreeSet;

use impact_core::analysis::{
    analyze, what_if, AnalysisConfig, SensitivityStrategy, EXPLORATORY_LABEL,
};
use impact_core::anecdote::{
    export_csv, export_jsonl, ingest, ingest_str, quality_report, Lexicon, RecordFormat,
};
use impact_core::session::{
    open_session, parse_rank_csv, tiers_to_rank_csv, ArmMap, RankingSession, SessionOptions,
    SessionStatus,
};
use impact_core::stats::{GroupLabel, Rank};
use proptest::prelude::*;

#[test]
fn golden_cohort_ingests() {
    let ds = ingest_str(common::COHORT, RecordFormat::Jsonl).unwrap();
    assert_eq!(ds.anecdotes.len(), 11);
    assert_eq!(ds.participants.len(), 11);
    let lexicon = Lexicon::shipped();
    for a in &ds.anecdotes {
        assert!(quality_report(a, &lexicon).unwrap().overall_pass, "{}", a.text);
    }
}

#[test]
fn ingest_export_round_trip() {
    let ds = ingest_str(common::COHORT, RecordFormat::Jsonl).unwrap();
    let via_jsonl = ingest_str(&export_jsonl(&ds), RecordFormat::Jsonl).unwrap();
    assert_eq!(via_jsonl, ds);
    let via_csv = ingest_str(&export_csv(&ds), RecordFormat::Csv).unwrap();
    assert_eq!(via_csv, ds);
    assert_eq!(export_jsonl(&via_csv), export_jsonl(&ds));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cohort.csv");
    std::fs::write(&path, export_csv(&ds)).unwrap();
    assert_eq!(ingest(&path).unwrap(), ds);
}

#[test]
fn quality_is_deterministic_and_read_only() {
    let ds = ingest_str(common::COHORT, RecordFormat::Jsonl).unwrap();
    let lexicon = Lexicon::shipped();
    for a in &ds.anecdotes {
        let before = a.clone();
        let r1 = quality_report(a, &lexicon).unwrap();
        let r2 = quality_report(a, &lexicon).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.lexicon_version, lexicon.version());
        assert_eq!(*a, before);
    }
}

fn assert_blind(json: &str, arm_map: &ArmMap) {
    let ds = ingest_str(common::COHORT, RecordFormat::Jsonl).unwrap();
    for p in &ds.participants {
        assert!(!json.contains(&p.participant_id), "participant id {} leaked", p.participant_id);
        assert!(!json.contains(&p.arm_code), "arm code {} leaked", p.arm_code);
    }
    for a in &ds.anecdotes {
        assert!(!json.contains(&a.anecdote_id));
    }
    let value: serde_json::Value = serde_json::from_str(json).unwrap();
    let mut keys = BTreeSet::new();
    collect_keys(&value, &mut keys);
    for forbidden in ["participant_id", "arm_code", "site_id", "group", "anecdote_id"] {
        assert!(!keys.contains(forbidden), "field {forbidden} present");
    }
    assert!(!arm_map.is_empty());
}

fn collect_keys(v: &serde_json::Value, out: &mut BTreeSet<String>) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, v) in m {
                out.insert(k.clone());
                collect_keys(v, out);
            }
        }
        serde_json::Value::Array(items) => items.iter().for_each(|v| collect_keys(v, out)),
        _ => {}
    }
}

#[test]
fn session_documents_stay_blind_until_unblinding() {
    let arm_map = common::golden_arm_map();
    let mut opened = common::open_golden(5);
    assert_blind(&opened.session.to_json(), &arm_map);
    assert_blind(&serde_json::to_string(&opened.session.cards_payload()).unwrap(), &arm_map);

    let tiers = common::golden_tiers(&opened);
    opened.session.submit_ordering(tiers, "chair", Some(1)).unwrap();
    assert_blind(&opened.session.to_json(), &arm_map);
    opened.session.finalize("chair", None).unwrap();
    assert_eq!(opened.session.status(), SessionStatus::Finalized);
    assert_blind(&opened.session.to_json(), &arm_map);

    let reloaded = RankingSession::from_json(&opened.session.to_json()).unwrap();
    assert_eq!(reloaded.to_json(), opened.session.to_json());
}

#[test]
fn rank_csv_import_matches_direct_submission() {
    let direct = common::finalized_golden(2);
    let mut imported = common::open_golden(2);
    let csv = tiers_to_rank_csv(&common::golden_tiers(&imported));
    let tiers = parse_rank_csv(&csv).unwrap();
    imported.session.submit_ordering(tiers, "chair", None).unwrap();
    imported.session.finalize("chair", None).unwrap();

    let config = AnalysisConfig::default();
    let mut a = direct;
    let mut b = imported;
    let ra = analyze(&mut a.session, &a.sealed, &common::golden_arm_map(), &config, "x", "s").unwrap();
    let rb = analyze(&mut b.session, &b.sealed, &common::golden_arm_map(), &config, "x", "s").unwrap();
    assert_eq!(ra.result, rb.result);
}

#[test]
fn analysis_is_deterministic() {
    let config = AnalysisConfig::default();
    let mut a = common::finalized_golden(1);
    let mut b = a.clone();
    let ra = analyze(&mut a.session, &a.sealed, &common::golden_arm_map(), &config, "id", "s").unwrap();
    let rb = analyze(&mut b.session, &b.sealed, &common::golden_arm_map(), &config, "id", "s").unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn two_participants_are_never_significant() {
    let ds = ingest_str(common::COHORT, RecordFormat::Jsonl).unwrap();
    let two: Vec<_> = ds
        .anecdotes
        .into_iter()
        .filter(|a| a.participant_id == "P01" || a.participant_id == "P07")
        .collect();
    let mut opened = open_session(&two, &SessionOptions::default(), &Lexicon::shipped()).unwrap();
    let tiers: Vec<_> = opened.session.cards().iter().map(|c| vec![c.card_id.clone()]).collect();
    opened.session.submit_ordering(tiers, "chair", None).unwrap();
    opened.session.finalize("chair", None).unwrap();
    let report = analyze(
        &mut opened.session,
        &opened.sealed,
        &common::golden_arm_map(),
        &AnalysisConfig::default(),
        "pair",
        "s",
    )
    .unwrap();
    assert_eq!(report.result.p_value, 1.0);
    assert!(report.significance.note.contains("not significant at any conventional"));
}

#[test]
fn full_reshuffle_tracks_null_rejection_rate() {
    let opened = common::finalized_golden(4);
    let config = AnalysisConfig::default();
    let result = impact_core::analysis::sensitivity(
        &opened.session,
        &opened.sealed,
        &common::golden_arm_map(),
        SensitivityStrategy::FullReshuffle,
        10_000,
        17,
        &config,
    )
    .unwrap();
    assert_eq!(result.label, EXPLORATORY_LABEL);
    // Null rejection rate of the exact two-sided 6/5 test at 0.05, from
    // brute-force counts.
    let counts = common::brute_force_null(6, 5);
    let total: u128 = counts.iter().sum();
    let null_rate: f64 = (0..counts.len())
        .filter(|&u| common::brute_force_two_sided(&counts, u) <= 0.05)
        .map(|u| counts[u] as f64 / total as f64)
        .sum();
    let se = (null_rate * (1.0 - null_rate) / 10_000.0).sqrt();
    let observed = result.summary.fraction_at_or_below_alpha;
    assert!((observed - null_rate).abs() <= 4.0 * se, "{observed} vs {null_rate}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Any tie-free ordering of n cards receives the ranks 1..=n, and the
    /// per-arm rank multisets do not depend on the presentation shuffle.
    #[test]
    fn ranks_are_a_permutation_and_seed_free(seed_a in any::<u64>(), seed_b in any::<u64>(), rot in 0usize..11) {
        let arm_map = common::golden_arm_map();
        let per_seed = |seed: u64| {
            let mut opened = common::open_golden(seed);
            let mut order: Vec<String> = common::golden_participant_order();
            order.rotate_left(rot);
            let by_participant: std::collections::BTreeMap<_, _> =
                opened.sealed.entries.iter().map(|(c, p)| (p.clone(), c.clone())).collect();
            let tiers: Vec<_> = order.iter().map(|p| vec![by_participant[p].clone()]).collect();
            let mut audit_len = opened.session.audit().len();
            opened.session.submit_ordering(tiers, "chair", None).unwrap();
            assert!(opened.session.audit().len() > audit_len);
            audit_len = opened.session.audit().len();
            opened.session.finalize("chair", None).unwrap();
            assert!(opened.session.audit().len() > audit_len);
            audit_len = opened.session.audit().len();
            let rv = opened.session.unblind(&opened.sealed, &arm_map, "a", "s").unwrap();
            assert!(opened.session.audit().len() > audit_len);
            let mut all: Vec<Rank> = rv.entries().iter().map(|e| e.rank).collect();
            all.sort();
            assert_eq!(all, (1..=11).map(Rank::integer).collect::<Vec<_>>());
            let mut a: Vec<Rank> = rv.ranks_of(GroupLabel::A).collect();
            let mut b: Vec<Rank> = rv.ranks_of(GroupLabel::B).collect();
            a.sort();
            b.sort();
            (a, b)
        };
        prop_assert_eq!(per_seed(seed_a), per_seed(seed_b));
    }
}

#[test]
fn what_if_leaves_session_untouched() {
    let opened = common::finalized_golden(8);
    let before = opened.session.to_json();
    let mut tiers = opened.session.ordering().unwrap().to_vec();
    tiers.reverse();
    let r = what_if(&opened.session, &opened.sealed, &common::golden_arm_map(), &tiers, &Default::default())
        .unwrap();
    assert_eq!(r.result.favored_group, Some(GroupLabel::B));
    assert_eq!(opened.session.to_json(), before);
    assert!(serde_json::to_string(&r).unwrap().contains(EXPLORATORY_LABEL));
}
