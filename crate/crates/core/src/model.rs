//! Domain types shared by every stage of the pipeline: observation panels,
//! innovator classes, weighted index trees, score tables and rank tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Zero};
use thiserror::Error;

/// Exact aggregation weight.
pub type Weight = Ratio<i64>;

/// Country code → innovator class.
pub type ClassMap = BTreeMap<String, InnovatorClass>;

pub const MIN_YEAR: i32 = 1990;
pub const MAX_YEAR: i32 = 2100;
pub const SCALE_MIN: f64 = 1.0;
pub const SCALE_MAX: f64 = 7.0;

pub fn in_scale(score: f64) -> bool {
    (SCALE_MIN..=SCALE_MAX).contains(&score)
}

pub(crate) fn weight_to_f64(w: Weight) -> f64 {
    *w.numer() as f64 / *w.denom() as f64
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("year {0} outside [{MIN_YEAR}, {MAX_YEAR}]")]
    YearOutOfRange(i32),
    #[error("invalid {field} {value:?}: must be non-empty and contain no whitespace")]
    InvalidIdentifier { field: &'static str, value: String },
    #[error("value for {country}/{indicator} in {year} is not finite")]
    NonFiniteValue {
        year: i32,
        country: String,
        indicator: String,
    },
    #[error("duplicate observation ({year}, {country}, {indicator})")]
    DuplicateKey {
        year: i32,
        country: String,
        indicator: String,
    },
    #[error("country {0} has no innovator class")]
    MissingClass(String),
    #[error("unknown innovator class {0:?} (expected core or noncore)")]
    UnknownClass(String),
    #[error("degenerate normalization range: max {max} must exceed min {min}")]
    DegenerateRange { min: f64, max: f64 },
    #[error("score {score} for {country}/{node} outside the 1-7 scale")]
    ScoreOutOfScale {
        country: String,
        node: String,
        score: f64,
    },
}

fn check_identifier(field: &'static str, value: &str) -> Result<(), ModelError> {
    if value.is_empty() || value.chars().any(char::is_whitespace) {
        return Err(ModelError::InvalidIdentifier {
            field,
            value: value.to_string(),
        });
    }
    Ok(())
}

/// WEF country class; selects between the core and non-core weighting schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InnovatorClass {
    Core,
    NonCore,
}

impl InnovatorClass {
    pub const ALL: [InnovatorClass; 2] = [InnovatorClass::Core, InnovatorClass::NonCore];

    pub fn as_str(self) -> &'static str {
        match self {
            InnovatorClass::Core => "core",
            InnovatorClass::NonCore => "noncore",
        }
    }
}

impl fmt::Display for InnovatorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InnovatorClass {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "core" => Ok(InnovatorClass::Core),
            "noncore" => Ok(InnovatorClass::NonCore),
            _ => Err(ModelError::UnknownClass(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub year: i32,
    pub country: String,
    pub indicator: String,
    pub value: f64,
}

impl Observation {
    pub fn new(
        year: i32,
        country: impl Into<String>,
        indicator: impl Into<String>,
        value: f64,
    ) -> Result<Self, ModelError> {
        let country = country.into();
        let indicator = indicator.into();
        if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
            return Err(ModelError::YearOutOfRange(year));
        }
        check_identifier("country", &country)?;
        check_identifier("indicator", &indicator)?;
        if !value.is_finite() {
            return Err(ModelError::NonFiniteValue {
                year,
                country,
                indicator,
            });
        }
        Ok(Observation {
            year,
            country,
            indicator,
            value,
        })
    }
}

type ObsKey = (i32, String, String);

/// Immutable set of observations keyed by (year, country, indicator), plus
/// the class of every country that appears in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    values: BTreeMap<ObsKey, f64>,
    classes: ClassMap,
}

impl Panel {
    pub fn new(
        observations: impl IntoIterator<Item = Observation>,
        classes: ClassMap,
    ) -> Result<Self, ModelError> {
        let mut values = BTreeMap::new();
        for obs in observations {
            let key = (obs.year, obs.country, obs.indicator);
            if values.contains_key(&key) {
                let (year, country, indicator) = key;
                return Err(ModelError::DuplicateKey {
                    year,
                    country,
                    indicator,
                });
            }
            values.insert(key, obs.value);
        }
        for (_, country, _) in values.keys() {
            if !classes.contains_key(country) {
                return Err(ModelError::MissingClass(country.clone()));
            }
        }
        Ok(Panel { values, classes })
    }

    pub fn classes(&self) -> &ClassMap {
        &self.classes
    }

    pub fn class_of(&self, country: &str) -> Option<InnovatorClass> {
        self.classes.get(country).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.values.keys().map(|(y, _, _)| *y).collect()
    }

    pub fn has_year(&self, year: i32) -> bool {
        self.values
            .range((year, String::new(), String::new())..)
            .next()
            .is_some_and(|((y, _, _), _)| *y == year)
    }

    /// Countries with at least one observation in `year`.
    pub fn countries(&self, year: i32) -> BTreeSet<String> {
        self.year_entries(year)
            .map(|(c, _, _)| c.to_string())
            .collect()
    }

    pub fn value(&self, year: i32, country: &str, indicator: &str) -> Option<f64> {
        self.values
            .get(&(year, country.to_string(), indicator.to_string()))
            .copied()
    }

    /// (country, indicator, value) for one year, in key order.
    pub fn year_entries(&self, year: i32) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.values
            .range((year, String::new(), String::new())..)
            .take_while(move |((y, _, _), _)| *y == year)
            .map(|((_, c, i), v)| (c.as_str(), i.as_str(), *v))
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.values.iter().map(|((y, c, i), v)| Observation {
            year: *y,
            country: c.clone(),
            indicator: i.clone(),
            value: *v,
        })
    }

    /// Copy of the panel with one observation inserted or replaced.
    pub fn with_observation(&self, obs: Observation) -> Result<Panel, ModelError> {
        if !self.classes.contains_key(&obs.country) {
            return Err(ModelError::MissingClass(obs.country));
        }
        let mut next = self.clone();
        next.values
            .insert((obs.year, obs.country, obs.indicator), obs.value);
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    min: f64,
    max: f64,
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Result<Self, ModelError> {
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(ModelError::DegenerateRange { min, max });
        }
        Ok(Bounds { min, max })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

/// How a raw leaf value is mapped onto the 1-7 scale.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// Same bounds for every year.
    Fixed(Bounds),
    /// Bounds per year; years without an entry fall back to `Observed`.
    PerYear(BTreeMap<i32, Bounds>),
    /// Cross-country min and max of the leaf in the evaluated year.
    Observed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub child: String,
    pub weight: Weight,
}

impl Edge {
    pub fn new(child: impl Into<String>, weight: Weight) -> Self {
        Edge {
            child: child.into(),
            weight,
        }
    }
}

pub(crate) fn edges(items: &[(&str, i64, i64)]) -> Vec<Edge> {
    items
        .iter()
        .map(|&(id, n, d)| Edge::new(id, Ratio::new(n, d)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Shared(Vec<Edge>),
    ByClass { core: Vec<Edge>, noncore: Vec<Edge> },
}

impl Weights {
    pub fn for_class(&self, class: InnovatorClass) -> &[Edge] {
        match (self, class) {
            (Weights::Shared(e), _) => e,
            (Weights::ByClass { core, .. }, InnovatorClass::Core) => core,
            (Weights::ByClass { noncore, .. }, InnovatorClass::NonCore) => noncore,
        }
    }

    fn all_edges(&self) -> impl Iterator<Item = &Edge> {
        let (a, b): (&[Edge], &[Edge]) = match self {
            Weights::Shared(e) => (e, &[]),
            Weights::ByClass { core, noncore } => (core, noncore),
        };
        a.iter().chain(b.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf {
        normalization: Option<Normalization>,
    },
    Aggregate(Weights),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn leaf(id: impl Into<String>, normalization: Option<Normalization>) -> Self {
        Node {
            id: id.into(),
            kind: NodeKind::Leaf { normalization },
        }
    }

    pub fn aggregate(id: impl Into<String>, weights: Weights) -> Self {
        Node {
            id: id.into(),
            kind: NodeKind::Aggregate(weights),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("cycle through node {0}")]
    Cycle(String),
    #[error("weights of {node} ({class}) sum to {sum}, not 1")]
    WeightSum {
        node: String,
        class: InnovatorClass,
        sum: Weight,
    },
    #[error("weight {weight} on {node} -> {child} is outside (0, 1]")]
    InvalidWeight {
        node: String,
        child: String,
        weight: Weight,
    },
    #[error("node {parent} references unknown child {child}")]
    DanglingChild { parent: String, child: String },
    #[error("root {0} is not a node of the tree")]
    UnknownRoot(String),
    #[error("node {0} is defined more than once")]
    DuplicateNode(String),
    #[error("node {node} lists child {child} more than once")]
    DuplicateChild { node: String, child: String },
    #[error("aggregate node {0} has no children")]
    EmptyAggregate(String),
    #[error("invalid node id {0:?}")]
    InvalidId(String),
}

/// Unvalidated tree description; turn it into an [`IndexTree`] with
/// [`validate_tree`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec {
    pub root: String,
    pub nodes: Vec<Node>,
}

/// A validated weighted aggregation DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTree {
    root: String,
    nodes: BTreeMap<String, Node>,
    // root-reachable ids, children before parents, per class
    order_core: Vec<String>,
    order_noncore: Vec<String>,
}

pub fn validate_tree(spec: TreeSpec) -> Result<IndexTree, TreeError> {
    let mut nodes = BTreeMap::new();
    for node in spec.nodes {
        if check_identifier("node", &node.id).is_err() {
            return Err(TreeError::InvalidId(node.id));
        }
        if nodes.contains_key(&node.id) {
            return Err(TreeError::DuplicateNode(node.id));
        }
        nodes.insert(node.id.clone(), node);
    }
    if !nodes.contains_key(&spec.root) {
        return Err(TreeError::UnknownRoot(spec.root));
    }

    for node in nodes.values() {
        let NodeKind::Aggregate(weights) = &node.kind else {
            continue;
        };
        for edge in weights.all_edges() {
            if !nodes.contains_key(&edge.child) {
                return Err(TreeError::DanglingChild {
                    parent: node.id.clone(),
                    child: edge.child.clone(),
                });
            }
        }
        for class in InnovatorClass::ALL {
            let list = weights.for_class(class);
            if list.is_empty() {
                return Err(TreeError::EmptyAggregate(node.id.clone()));
            }
            let mut seen = BTreeSet::new();
            let mut sum = Weight::zero();
            for edge in list {
                if !seen.insert(edge.child.as_str()) {
                    return Err(TreeError::DuplicateChild {
                        node: node.id.clone(),
                        child: edge.child.clone(),
                    });
                }
                if edge.weight <= Weight::zero() || edge.weight > Weight::one() {
                    return Err(TreeError::InvalidWeight {
                        node: node.id.clone(),
                        child: edge.child.clone(),
                        weight: edge.weight,
                    });
                }
                sum += edge.weight;
            }
            if sum != Weight::one() {
                return Err(TreeError::WeightSum {
                    node: node.id.clone(),
                    class,
                    sum,
                });
            }
        }
    }

    check_acyclic(&nodes, &spec.root)?;

    let order_core = post_order(&nodes, &spec.root, InnovatorClass::Core);
    let order_noncore = post_order(&nodes, &spec.root, InnovatorClass::NonCore);
    Ok(IndexTree {
        root: spec.root,
        nodes,
        order_core,
        order_noncore,
    })
}

fn check_acyclic(nodes: &BTreeMap<String, Node>, root: &str) -> Result<(), TreeError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
    // iterative DFS over the union of all class edges
    let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
    marks.insert(root, Mark::Open);
    while let Some((id, next)) = stack.pop() {
        let children: Vec<&str> = match &nodes[id].kind {
            NodeKind::Aggregate(w) => w.all_edges().map(|e| e.child.as_str()).collect(),
            NodeKind::Leaf { .. } => Vec::new(),
        };
        if next < children.len() {
            stack.push((id, next + 1));
            let child = children[next];
            match marks.get(child) {
                Some(Mark::Open) => return Err(TreeError::Cycle(child.to_string())),
                Some(Mark::Done) => {}
                None => {
                    marks.insert(child, Mark::Open);
                    stack.push((child, 0));
                }
            }
        } else {
            marks.insert(id, Mark::Done);
        }
    }
    Ok(())
}

fn post_order(nodes: &BTreeMap<String, Node>, root: &str, class: InnovatorClass) -> Vec<String> {
    fn visit(
        nodes: &BTreeMap<String, Node>,
        id: &str,
        class: InnovatorClass,
        seen: &mut BTreeSet<String>,
        out: &mut Vec<String>,
    ) {
        if !seen.insert(id.to_string()) {
            return;
        }
        if let NodeKind::Aggregate(w) = &nodes[id].kind {
            for edge in w.for_class(class) {
                visit(nodes, &edge.child, class, seen, out);
            }
        }
        out.push(id.to_string());
    }
    let mut out = Vec::new();
    visit(nodes, root, class, &mut BTreeSet::new(), &mut out);
    out
}

impl IndexTree {
    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted children of `id` under `class`; empty for leaves.
    pub fn children(&self, id: &str, class: InnovatorClass) -> &[Edge] {
        match self.nodes.get(id).map(|n| &n.kind) {
            Some(NodeKind::Aggregate(w)) => w.for_class(class),
            _ => &[],
        }
    }

    /// Root-reachable node ids for `class`, every child listed before its parents.
    pub fn evaluation_order(&self, class: InnovatorClass) -> &[String] {
        match class {
            InnovatorClass::Core => &self.order_core,
            InnovatorClass::NonCore => &self.order_noncore,
        }
    }

    pub fn reaches(&self, id: &str, class: InnovatorClass) -> bool {
        self.evaluation_order(class).iter().any(|n| n == id)
    }

    /// Root-reachable leaves for `class`, in evaluation order.
    pub fn leaves(&self, class: InnovatorClass) -> impl Iterator<Item = &str> {
        self.evaluation_order(class)
            .iter()
            .filter(|id| self.nodes[id.as_str()].is_leaf())
            .map(String::as_str)
    }

    /// Sum over all root paths of the product of edge weights from `id` up to
    /// the root: the exact sensitivity of the root score to the node score.
    /// Zero when the node is not reachable under `class`.
    pub fn path_weight(&self, id: &str, class: InnovatorClass) -> Weight {
        let order = self.evaluation_order(class);
        let mut from_root: BTreeMap<&str, Weight> = BTreeMap::new();
        from_root.insert(self.root.as_str(), Weight::one());
        // reverse post-order visits parents before children
        for parent in order.iter().rev() {
            let Some(&pw) = from_root.get(parent.as_str()) else {
                continue;
            };
            for edge in self.children(parent, class) {
                *from_root
                    .entry(edge.child.as_str())
                    .or_insert_with(Weight::zero) += pw * edge.weight;
            }
        }
        from_root.get(id).copied().unwrap_or_else(Weight::zero)
    }

    /// Nodes from which `id` is reachable under `class` (excluding `id`),
    /// children before parents.
    pub fn ancestors(&self, id: &str, class: InnovatorClass) -> Vec<String> {
        let mut affected: BTreeSet<&str> = BTreeSet::new();
        affected.insert(id);
        let mut out = Vec::new();
        for node in self.evaluation_order(class) {
            if node == id {
                continue;
            }
            if self
                .children(node, class)
                .iter()
                .any(|e| affected.contains(e.child.as_str()))
            {
                affected.insert(node);
                out.push(node.clone());
            }
        }
        out
    }

    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec {
            root: self.root.clone(),
            nodes: self.nodes.values().cloned().collect(),
        }
    }
}

pub const SURVEY_LEAVES: [&str; 5] = [
    "internet_access_in_schools",
    "isp_competition_quality",
    "government_ict_prioritization",
    "government_ict_promotion_success",
    "ict_laws",
];

pub const HARD_LEAVES: [&str; 5] = [
    "cellular_telephones",
    "internet_users",
    "internet_hosts",
    "telephone_lines",
    "personal_computers",
];

/// The Growth Competitiveness Index tree.
///
/// Core innovators weight GCI as TI 1/2, PII 1/4, MEI 1/4 and TI as IS 1/2,
/// ICTS 1/2; non-core innovators average GCI's components and weight TI as
/// IS 1/8, TTS 3/8, ICTS 1/2. ICT survey questions and hard indicators are
/// equally weighted inside their groups; hard indicators are normalized
/// against the observed cross-country range.
pub fn default_wef_tree() -> IndexTree {
    let equal = |ids: &[&str]| -> Vec<Edge> {
        let n = ids.len() as i64;
        ids.iter()
            .map(|id| Edge::new(*id, Ratio::new(1, n)))
            .collect()
    };
    let mut nodes = vec![
        Node::aggregate(
            "GCI",
            Weights::ByClass {
                core: edges(&[("TI", 1, 2), ("PII", 1, 4), ("MEI", 1, 4)]),
                noncore: edges(&[("TI", 1, 3), ("PII", 1, 3), ("MEI", 1, 3)]),
            },
        ),
        Node::aggregate(
            "TI",
            Weights::ByClass {
                core: edges(&[("IS", 1, 2), ("ICTS", 1, 2)]),
                noncore: edges(&[("IS", 1, 8), ("TTS", 3, 8), ("ICTS", 1, 2)]),
            },
        ),
        Node::aggregate(
            "PII",
            Weights::Shared(edges(&[("CLS", 1, 2), ("CS", 1, 2)])),
        ),
        Node::aggregate(
            "MEI",
            Weights::Shared(edges(&[("MSS", 1, 2), ("CCR", 1, 4), ("GW", 1, 4)])),
        ),
        Node::aggregate(
            "ICTS",
            Weights::Shared(edges(&[("ICTsd", 1, 3), ("ICThd", 2, 3)])),
        ),
        Node::aggregate("ICTsd", Weights::Shared(equal(&SURVEY_LEAVES))),
        Node::aggregate("ICThd", Weights::Shared(equal(&HARD_LEAVES))),
    ];
    for id in ["IS", "TTS", "CLS", "CS", "MSS", "CCR", "GW"] {
        nodes.push(Node::leaf(id, None));
    }
    for id in SURVEY_LEAVES {
        nodes.push(Node::leaf(id, None));
    }
    for id in HARD_LEAVES {
        nodes.push(Node::leaf(id, Some(Normalization::Observed)));
    }
    validate_tree(TreeSpec {
        root: "GCI".into(),
        nodes,
    })
    .expect("default tree is valid")
}

/// Per-country, per-node scores on the 1-7 scale for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    year: i32,
    entries: BTreeMap<(String, String), f64>,
}

impl ScoreTable {
    pub fn new(year: i32) -> Self {
        ScoreTable {
            year,
            entries: BTreeMap::new(),
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn insert(
        &mut self,
        country: impl Into<String>,
        node: impl Into<String>,
        score: f64,
    ) -> Result<(), ModelError> {
        let country = country.into();
        let node = node.into();
        if !in_scale(score) {
            return Err(ModelError::ScoreOutOfScale {
                country,
                node,
                score,
            });
        }
        self.entries.insert((country, node), score);
        Ok(())
    }

    pub fn get(&self, country: &str, node: &str) -> Option<f64> {
        self.entries
            .get(&(country.to_string(), node.to_string()))
            .copied()
    }

    pub fn countries(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|(c, _)| c.as_str()).collect()
    }

    pub fn contains_country(&self, country: &str) -> bool {
        self.entries
            .range((country.to_string(), String::new())..)
            .next()
            .is_some_and(|((c, _), _)| c == country)
    }

    /// (country, node, score) in (country, node) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.entries
            .iter()
            .map(|((c, n), s)| (c.as_str(), n.as_str(), *s))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    /// Tied countries share the best rank; the next rank skips (1, 2, 2, 4).
    Competition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub year: i32,
    pub node: String,
    pub policy: TiePolicy,
    /// (country, rank), ordered by rank then country code.
    pub entries: Vec<(String, u32)>,
}

impl RankTable {
    pub fn rank(&self, country: &str) -> Option<u32> {
        self.entries
            .iter()
            .find(|(c, _)| c == country)
            .map(|(_, r)| *r)
    }

    pub fn as_map(&self) -> BTreeMap<&str, u32> {
        self.entries.iter().map(|(c, r)| (c.as_str(), *r)).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
