//! Bottom-up evaluation of an [`IndexTree`] over one year of panel data.
//!
//! Leaves take raw values from a [`LeafAssignment`]; hard-data leaves carry a
//! [`Normalization`] and are mapped onto the 1-7 scale, survey leaves must
//! already lie on it. An assignment may also hold a value for an aggregate
//! node (a published sub-index score, say), in which case that value is used
//! as-is and the subtree below it is not consulted.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::model::{
    in_scale, Bounds, IndexTree, InnovatorClass, ModelError, NodeKind, Normalization, Panel,
    ScoreTable, Weight, SCALE_MAX, SCALE_MIN,
};

/// What to do when a leaf value is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Fail, listing every absent (country, leaf) pair.
    #[default]
    Strict,
    /// Drop absent children and rescale the remaining weights to sum to 1.
    Renormalize,
}

impl fmt::Display for MissingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissingPolicy::Strict => "strict",
            MissingPolicy::Renormalize => "renormalize",
        })
    }
}

impl std::str::FromStr for MissingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(MissingPolicy::Strict),
            "renormalize" => Ok(MissingPolicy::Renormalize),
            other => Err(format!("unknown missing-data policy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("missing leaf data: {}", format_missing(.0))]
    MissingLeaves(Vec<(String, String)>),
    #[error("value {value} for {country}/{node} lies outside the 1-7 scale")]
    OutOfScale {
        country: String,
        node: String,
        value: f64,
    },
    #[error("cannot normalize {node}: {source}")]
    Normalization { node: String, source: ModelError },
    #[error("year {0} not found in data")]
    YearNotFound(i32),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {node} is not reachable from the root for {class} innovators")]
    Unreachable { node: String, class: InnovatorClass },
    #[error("country {country} has no data in {year}")]
    UnknownCountry { country: String, year: i32 },
}

fn format_missing(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(c, l)| format!("{c}/{l}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Maps `x` onto [1, 7] linearly, clamping outside `bounds`.
pub fn normalize(x: f64, bounds: &Bounds) -> f64 {
    let clamped = x.clamp(bounds.min(), bounds.max());
    let scaled = SCALE_MIN
        + (SCALE_MAX - SCALE_MIN) * (clamped - bounds.min()) / (bounds.max() - bounds.min());
    // rounding can overshoot the top of the scale by an ulp
    scaled.clamp(SCALE_MIN, SCALE_MAX)
}

pub fn normalize_minmax(x: f64, min: f64, max: f64) -> Result<f64, ModelError> {
    Ok(normalize(x, &Bounds::new(min, max)?))
}

/// Raw leaf (or pre-computed node) values for every country in one year.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeafAssignment {
    year: i32,
    values: BTreeMap<(String, String), f64>,
}

impl LeafAssignment {
    pub fn new(year: i32) -> Self {
        LeafAssignment {
            year,
            values: BTreeMap::new(),
        }
    }

    pub fn from_panel(panel: &Panel, year: i32) -> Self {
        let mut out = LeafAssignment::new(year);
        for (country, indicator, value) in panel.year_entries(year) {
            out.insert(country, indicator, value);
        }
        out
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn insert(&mut self, country: impl Into<String>, id: impl Into<String>, value: f64) {
        self.values.insert((country.into(), id.into()), value);
    }

    pub fn get(&self, country: &str, id: &str) -> Option<f64> {
        self.values
            .get(&(country.to_string(), id.to_string()))
            .copied()
    }

    /// Observed cross-country range of one leaf.
    fn observed_bounds(&self, id: &str) -> Result<Bounds, ModelError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for ((_, leaf), v) in &self.values {
            if leaf == id {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        Bounds::new(lo, hi)
    }
}

/// Weighted mean over a common denominator, so equal inputs with weights
/// such as (1/3, 1/3, 1/3) come back unchanged.
pub(crate) fn weighted_sum(terms: &[(Weight, f64)]) -> f64 {
    let denom = terms.iter().fold(1i64, |acc, (w, _)| acc.lcm(w.denom()));
    let total: f64 = terms
        .iter()
        .map(|(w, s)| (*w.numer() * (denom / *w.denom())) as f64 * *s)
        .sum();
    (total / denom as f64).clamp(SCALE_MIN, SCALE_MAX)
}

/// Score of the evaluated node (absent when leaves are missing), every node
/// score computed on the way, and the missing leaves.
type CountryScores = (Option<f64>, BTreeMap<String, f64>, Vec<String>);

/// Shared per-year evaluation state: resolved normalization bounds.
struct YearEvaluator<'a> {
    tree: &'a IndexTree,
    leaves: &'a LeafAssignment,
    policy: MissingPolicy,
    bounds: BTreeMap<String, Bounds>,
}

struct CountryRun<'a> {
    country: &'a str,
    class: InnovatorClass,
    memo: BTreeMap<String, Option<f64>>,
    missing: Vec<String>,
}

impl<'a> YearEvaluator<'a> {
    fn new(tree: &'a IndexTree, leaves: &'a LeafAssignment, policy: MissingPolicy) -> Self {
        YearEvaluator {
            tree,
            leaves,
            policy,
            bounds: BTreeMap::new(),
        }
    }

    fn bounds_for(&mut self, id: &str, norm: &Normalization) -> Result<Bounds, EvalError> {
        if let Some(b) = self.bounds.get(id) {
            return Ok(*b);
        }
        let resolved = match norm {
            Normalization::Fixed(b) => Ok(*b),
            Normalization::PerYear(map) => match map.get(&self.leaves.year()) {
                Some(b) => Ok(*b),
                None => self.leaves.observed_bounds(id),
            },
            Normalization::Observed => self.leaves.observed_bounds(id),
        }
        .map_err(|source| EvalError::Normalization {
            node: id.to_string(),
            source,
        })?;
        self.bounds.insert(id.to_string(), resolved);
        Ok(resolved)
    }

    fn eval(&mut self, run: &mut CountryRun<'_>, id: &str) -> Result<Option<f64>, EvalError> {
        if let Some(v) = run.memo.get(id) {
            return Ok(*v);
        }
        let tree = self.tree;
        let node = tree
            .node(id)
            .ok_or_else(|| EvalError::UnknownNode(id.to_string()))?;
        let provided = self.leaves.get(run.country, id);
        let score = match (&node.kind, provided) {
            (
                NodeKind::Leaf {
                    normalization: Some(norm),
                },
                Some(raw),
            ) => {
                let b = self.bounds_for(id, norm)?;
                Some(normalize(raw, &b))
            }
            (_, Some(v)) => {
                if !in_scale(v) {
                    return Err(EvalError::OutOfScale {
                        country: run.country.to_string(),
                        node: id.to_string(),
                        value: v,
                    });
                }
                Some(v)
            }
            (NodeKind::Leaf { .. }, None) => {
                run.missing.push(id.to_string());
                None
            }
            (NodeKind::Aggregate(_), None) => {
                let mut terms = Vec::new();
                let mut complete = true;
                for edge in tree.children(id, run.class) {
                    match self.eval(run, &edge.child)? {
                        Some(s) => terms.push((edge.weight, s)),
                        None => complete = false,
                    }
                }
                match self.policy {
                    MissingPolicy::Strict if !complete => None,
                    _ if terms.is_empty() => None,
                    _ => {
                        let present: Weight = terms.iter().map(|(w, _)| *w).sum();
                        if present != Weight::one() && !present.is_zero() {
                            for (w, _) in terms.iter_mut() {
                                *w /= present;
                            }
                        }
                        Some(weighted_sum(&terms))
                    }
                }
            }
        };
        run.memo.insert(id.to_string(), score);
        Ok(score)
    }

    /// Evaluates `node` for one country, returning every node score computed
    /// along the way.
    fn country(
        &mut self,
        country: &str,
        class: InnovatorClass,
        node: &str,
    ) -> Result<CountryScores, EvalError> {
        let mut run = CountryRun {
            country,
            class,
            memo: BTreeMap::new(),
            missing: Vec::new(),
        };
        let score = self.eval(&mut run, node)?;
        let scores = run
            .memo
            .into_iter()
            .filter_map(|(id, s)| s.map(|s| (id, s)))
            .collect();
        let mut missing = run.missing;
        if score.is_none() && missing.is_empty() {
            // renormalize found nothing at all below the node
            missing.push(node.to_string());
        }
        missing.sort();
        missing.dedup();
        Ok((score, scores, missing))
    }
}

fn check_reachable(tree: &IndexTree, node: &str, class: InnovatorClass) -> Result<(), EvalError> {
    if tree.node(node).is_none() {
        return Err(EvalError::UnknownNode(node.to_string()));
    }
    if !tree.reaches(node, class) {
        return Err(EvalError::Unreachable {
            node: node.to_string(),
            class,
        });
    }
    Ok(())
}

/// Score of `node` for one country.
pub fn evaluate_node(
    tree: &IndexTree,
    node: &str,
    class: InnovatorClass,
    leaves: &LeafAssignment,
    country: &str,
    policy: MissingPolicy,
) -> Result<f64, EvalError> {
    check_reachable(tree, node, class)?;
    let mut eval = YearEvaluator::new(tree, leaves, policy);
    let (score, _, missing) = eval.country(country, class, node)?;
    score.ok_or_else(|| {
        EvalError::MissingLeaves(
            missing
                .into_iter()
                .map(|leaf| (country.to_string(), leaf))
                .collect(),
        )
    })
}

/// Scores of every evaluated node for one country in `year`.
pub fn compute_country(
    tree: &IndexTree,
    panel: &Panel,
    year: i32,
    country: &str,
    policy: MissingPolicy,
) -> Result<BTreeMap<String, f64>, EvalError> {
    if !panel.has_year(year) {
        return Err(EvalError::YearNotFound(year));
    }
    let class = panel
        .class_of(country)
        .filter(|_| panel.countries(year).contains(country))
        .ok_or_else(|| EvalError::UnknownCountry {
            country: country.to_string(),
            year,
        })?;
    let leaves = LeafAssignment::from_panel(panel, year);
    let mut eval = YearEvaluator::new(tree, &leaves, policy);
    let (score, scores, missing) = eval.country(country, class, tree.root())?;
    match score {
        Some(_) => Ok(scores),
        None => Err(EvalError::MissingLeaves(
            missing
                .into_iter()
                .map(|leaf| (country.to_string(), leaf))
                .collect(),
        )),
    }
}

/// Evaluates the tree for every country with data in `year`.
pub fn compute_all(
    tree: &IndexTree,
    panel: &Panel,
    year: i32,
    policy: MissingPolicy,
) -> Result<ScoreTable, EvalError> {
    if !panel.has_year(year) {
        return Err(EvalError::YearNotFound(year));
    }
    let leaves = LeafAssignment::from_panel(panel, year);
    let mut eval = YearEvaluator::new(tree, &leaves, policy);
    let mut table = ScoreTable::new(year);
    let mut all_missing = Vec::new();
    for country in panel.countries(year) {
        let class = panel
            .class_of(&country)
            .expect("panel guarantees a class per country");
        let (score, scores, missing) = eval.country(&country, class, tree.root())?;
        if score.is_none() {
            all_missing.extend(missing.into_iter().map(|leaf| (country.clone(), leaf)));
            continue;
        }
        for (node, s) in scores {
            table
                .insert(country.as_str(), node.as_str(), s)
                .expect("evaluated scores lie on the 1-7 scale");
        }
    }
    if !all_missing.is_empty() {
        return Err(EvalError::MissingLeaves(all_missing));
    }
    Ok(table)
}
