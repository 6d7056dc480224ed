//! Score-to-rank conversion and year-over-year rank movement.
//!
//! Deltas follow the convention `previous rank - current rank`, so a country
//! climbing from 40th to 31st reports `+9` and a fall reports a negative number.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{RankTable, ScoreTable, TiePolicy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankError {
    #[error("no scores for node {node} ({} countries lack it)", .missing.len())]
    MissingNode { node: String, missing: Vec<String> },
    #[error("the two rank tables share no countries")]
    EmptyIntersection,
}

/// Competition ranks for (country, score) pairs, ordered by rank and then
/// country code.
pub fn competition_ranks<'a>(
    scores: impl IntoIterator<Item = (&'a str, f64)>,
) -> Vec<(String, u32)> {
    let mut sorted: Vec<(&str, f64)> = scores.into_iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut out = Vec::with_capacity(sorted.len());
    let mut rank = 0u32;
    let mut prev: Option<f64> = None;
    for (i, (country, score)) in sorted.into_iter().enumerate() {
        if prev != Some(score) {
            rank = i as u32 + 1;
            prev = Some(score);
        }
        out.push((country.to_string(), rank));
    }
    out
}

pub fn rank_scores(scores: &ScoreTable, node: &str) -> Result<RankTable, RankError> {
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for country in scores.countries() {
        match scores.get(country, node) {
            Some(s) => pairs.push((country, s)),
            None => missing.push(country.to_string()),
        }
    }
    if !missing.is_empty() || pairs.is_empty() {
        return Err(RankError::MissingNode {
            node: node.to_string(),
            missing,
        });
    }
    Ok(RankTable {
        year: scores.year(),
        node: node.to_string(),
        policy: TiePolicy::Competition,
        entries: competition_ranks(pairs),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankDelta {
    pub prev_year: i32,
    pub cur_year: i32,
    pub node: String,
    /// country -> (previous rank, current rank, delta)
    pub moves: BTreeMap<String, (u32, u32, i64)>,
    /// Ranked only in the current table.
    pub entrants: Vec<String>,
    /// Ranked only in the previous table.
    pub leavers: Vec<String>,
}

impl RankDelta {
    pub fn delta(&self, country: &str) -> Option<i64> {
        self.moves.get(country).map(|m| m.2)
    }

    pub fn deltas(&self) -> BTreeMap<&str, i64> {
        self.moves.iter().map(|(c, m)| (c.as_str(), m.2)).collect()
    }
}

pub fn rank_delta(prev: &RankTable, cur: &RankTable) -> Result<RankDelta, RankError> {
    let before = prev.as_map();
    let after = cur.as_map();
    let mut moves = BTreeMap::new();
    let mut entrants = Vec::new();
    for (&country, &now) in &after {
        match before.get(country) {
            Some(&then) => {
                moves.insert(country.to_string(), (then, now, then as i64 - now as i64));
            }
            None => entrants.push(country.to_string()),
        }
    }
    if moves.is_empty() {
        return Err(RankError::EmptyIntersection);
    }
    let leavers = before
        .keys()
        .filter(|c| !after.contains_key(*c))
        .map(|c| c.to_string())
        .collect();
    Ok(RankDelta {
        prev_year: prev.year,
        cur_year: cur.year,
        node: cur.node.clone(),
        moves,
        entrants,
        leavers,
    })
}
