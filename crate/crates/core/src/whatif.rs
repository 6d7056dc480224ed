//! Partial-equilibrium what-if analysis: override one node score for one
//! country, re-derive only that country's ancestors, and rerank everybody on
//! the root index with all other countries held fixed.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::aggregation::weighted_sum;
use crate::model::{
    in_scale, weight_to_f64, ClassMap, IndexTree, InnovatorClass, ScoreTable, Weight, SCALE_MAX,
};
use crate::ranking::competition_ranks;

/// Strict-exceedance margin, in node-score units.
pub const MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WhatIfError {
    #[error("unknown country {0}")]
    UnknownCountry(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("override {0} lies outside the 1-7 scale")]
    OverrideOutOfScale(f64),
    #[error("node {node} is not on a weighted path to the root for {class} innovators")]
    NotAnAncestorPath { node: String, class: InnovatorClass },
    #[error("no score for {country}/{node}; cannot re-derive the root index")]
    IncompleteScores { country: String, node: String },
    #[error("rank gain must be at least 1")]
    ZeroGain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub country: String,
    pub node: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhatIfOutcome {
    pub country: String,
    pub node: String,
    pub baseline_score: f64,
    pub new_score: f64,
    pub baseline_rank: u32,
    pub new_rank: u32,
    pub baseline_gci: f64,
    pub new_gci: f64,
    /// baseline rank - new rank; positive is a rise.
    pub delta_rank: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RankGain {
    Feasible {
        /// Increase of the node score.
        delta: f64,
        /// Node score after the increase.
        new_score: f64,
        /// The country to overtake and its root score.
        target: String,
        target_gci: f64,
        /// Exact sensitivity of the root score to the node score.
        weight: Weight,
    },
    /// Even a node score of 7 does not deliver the gain. `required_score` is
    /// absent when there are not enough countries above to overtake.
    Infeasible { required_score: Option<f64> },
}

struct Context<'a> {
    tree: &'a IndexTree,
    scores: &'a ScoreTable,
    class: InnovatorClass,
    country: &'a str,
}

impl<'a> Context<'a> {
    fn new(
        tree: &'a IndexTree,
        scores: &'a ScoreTable,
        classes: &ClassMap,
        country: &'a str,
        node: &str,
    ) -> Result<Self, WhatIfError> {
        if !scores.contains_country(country) {
            return Err(WhatIfError::UnknownCountry(country.to_string()));
        }
        let class = *classes
            .get(country)
            .ok_or_else(|| WhatIfError::UnknownCountry(country.to_string()))?;
        if tree.node(node).is_none() {
            return Err(WhatIfError::UnknownNode(node.to_string()));
        }
        if !tree.reaches(node, class) {
            return Err(WhatIfError::NotAnAncestorPath {
                node: node.to_string(),
                class,
            });
        }
        Ok(Context {
            tree,
            scores,
            class,
            country,
        })
    }

    fn score(&self, country: &str, node: &str) -> Result<f64, WhatIfError> {
        self.scores
            .get(country, node)
            .ok_or_else(|| WhatIfError::IncompleteScores {
                country: country.to_string(),
                node: node.to_string(),
            })
    }

    /// Root score of the country with `node` set to `value`.
    fn rescored_root(&self, node: &str, value: f64) -> Result<f64, WhatIfError> {
        let mut local: BTreeMap<&str, f64> = BTreeMap::new();
        local.insert(node, value);
        let ancestors = self.tree.ancestors(node, self.class);
        for anc in &ancestors {
            let mut terms = Vec::new();
            for edge in self.tree.children(anc, self.class) {
                let s = match local.get(edge.child.as_str()) {
                    Some(s) => *s,
                    None => self.score(self.country, &edge.child)?,
                };
                terms.push((edge.weight, s));
            }
            local.insert(anc.as_str(), weighted_sum(&terms));
        }
        Ok(local[self.tree.root()])
    }

    fn root_scores(&self) -> Result<Vec<(&'a str, f64)>, WhatIfError> {
        self.scores
            .countries()
            .into_iter()
            .map(|c| Ok((c, self.score(c, self.tree.root())?)))
            .collect()
    }
}

fn rank_of(ranked: &[(String, u32)], country: &str) -> u32 {
    ranked
        .iter()
        .find(|(c, _)| c == country)
        .map(|(_, r)| *r)
        .expect("country is ranked")
}

pub fn apply_scenario(
    tree: &IndexTree,
    scores: &ScoreTable,
    classes: &ClassMap,
    scenario: &Scenario,
) -> Result<WhatIfOutcome, WhatIfError> {
    if !in_scale(scenario.value) {
        return Err(WhatIfError::OverrideOutOfScale(scenario.value));
    }
    let ctx = Context::new(tree, scores, classes, &scenario.country, &scenario.node)?;
    let baseline_score = ctx.score(ctx.country, &scenario.node)?;
    let baseline_gci = ctx.score(ctx.country, tree.root())?;
    let new_gci = ctx.rescored_root(&scenario.node, scenario.value)?;

    let before = ctx.root_scores()?;
    let after: Vec<(&str, f64)> = before
        .iter()
        .map(|&(c, s)| (c, if c == ctx.country { new_gci } else { s }))
        .collect();
    let baseline_rank = rank_of(&competition_ranks(before), ctx.country);
    let new_rank = rank_of(&competition_ranks(after), ctx.country);
    Ok(WhatIfOutcome {
        country: scenario.country.clone(),
        node: scenario.node.clone(),
        baseline_score,
        new_score: scenario.value,
        baseline_rank,
        new_rank,
        baseline_gci,
        new_gci,
        delta_rank: baseline_rank as i64 - new_rank as i64,
    })
}

/// Smallest increase of `node` that lifts `country` by `k` places on the
/// root index.
///
/// The root score is affine in the node score with slope equal to the exact
/// path weight `w`, so overtaking a country whose root score is `t` needs
/// `(t - root) / w` plus the strict-exceedance margin.
pub fn min_delta_for_rank_gain(
    tree: &IndexTree,
    scores: &ScoreTable,
    classes: &ClassMap,
    country: &str,
    k: u32,
    node: &str,
) -> Result<RankGain, WhatIfError> {
    if k == 0 {
        return Err(WhatIfError::ZeroGain);
    }
    let ctx = Context::new(tree, scores, classes, country, node)?;
    let weight = tree.path_weight(node, ctx.class);
    let current = ctx.score(country, node)?;
    let gci = ctx.score(country, tree.root())?;

    // countries strictly ahead, nearest first
    let mut ahead: Vec<(&str, f64)> = ctx
        .root_scores()?
        .into_iter()
        .filter(|&(c, s)| c != country && s > gci)
        .collect();
    ahead.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(a.0)));
    let Some(&(target, target_gci)) = ahead.get(k as usize - 1) else {
        return Ok(RankGain::Infeasible {
            required_score: None,
        });
    };

    let delta = if gci > target_gci {
        0.0
    } else {
        (target_gci - gci) / weight_to_f64(weight) + MARGIN
    };
    let required = current + delta;
    if required <= SCALE_MAX {
        return Ok(RankGain::Feasible {
            delta,
            new_score: required,
            target: target.to_string(),
            target_gci,
            weight,
        });
    }
    // within the margin of the ceiling a tie at 7 can still carry the gain
    let at_ceiling = apply_scenario(
        tree,
        scores,
        classes,
        &Scenario {
            country: country.to_string(),
            node: node.to_string(),
            value: SCALE_MAX,
        },
    )?;
    if at_ceiling.delta_rank >= k as i64 {
        return Ok(RankGain::Feasible {
            delta: SCALE_MAX - current,
            new_score: SCALE_MAX,
            target: target.to_string(),
            target_gci,
            weight,
        });
    }
    Ok(RankGain::Infeasible {
        required_score: Some(required),
    })
}
