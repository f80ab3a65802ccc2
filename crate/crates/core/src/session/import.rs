//! Rank exchange for air-gapped panels: a CSV of `card_id,tier_index`,
//! where tier 1 is the most meaningful and cards sharing an index are tied.
//! Indices need not be contiguous.

use std::collections::BTreeMap;

use super::{CardId, SessionError};

pub fn parse_rank_csv(text: &str) -> Result<Vec<Vec<CardId>>, SessionError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| SessionError::RankImport {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().ne(["card_id", "tier_index"]) {
        return Err(SessionError::RankImport {
            line: 1,
            message: "header must be card_id,tier_index".into(),
        });
    }

    let mut tiers: BTreeMap<u64, Vec<CardId>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| SessionError::RankImport {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let card = record.get(0).unwrap_or_default();
        let tier = record.get(1).unwrap_or_default();
        if card.is_empty() {
            return Err(SessionError::RankImport {
                line,
                message: "empty card_id".into(),
            });
        }
        let tier: u64 = tier.parse().map_err(|_| SessionError::RankImport {
            line,
            message: format!("tier_index {tier:?} is not a positive integer"),
        })?;
        if tier == 0 {
            return Err(SessionError::RankImport {
                line,
                message: "tier_index starts at 1".into(),
            });
        }
        tiers.entry(tier).or_default().push(CardId(card.to_string()));
    }
    Ok(tiers.into_values().collect())
}

pub fn tiers_to_rank_csv(tiers: &[Vec<CardId>]) -> String {
    let mut out = String::from("card_id,tier_index\n");
    for (i, tier) in tiers.iter().enumerate() {
        for card in tier {
            out.push_str(&format!("{},{}\n", card, i + 1));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_and_orders_tiers() {
        let tiers = parse_rank_csv("card_id,tier_index\nc,5\na,1\nb,1\n").unwrap();
        assert_eq!(
            tiers,
            vec![vec![CardId::from("a"), CardId::from("b")], vec![CardId::from("c")]]
        );
        assert_eq!(parse_rank_csv(&tiers_to_rank_csv(&tiers)).unwrap(), tiers);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            parse_rank_csv("card,tier\n"),
            Err(SessionError::RankImport { line: 1, .. })
        ));
        assert!(matches!(
            parse_rank_csv("card_id,tier_index\na,1\nb,x\n"),
            Err(SessionError::RankImport { line: 3, .. })
        ));
        assert!(matches!(
            parse_rank_csv("card_id,tier_index\na,0\n"),
            Err(SessionError::RankImport { line: 2, .. })
        ));
    }
}
