//! Reading panels, class maps and index-tree configs from disk.
//!
//! Panel files are UTF-8 CSV with the header `year,country,indicator,value`,
//! `.` as decimal separator and `#` comment lines. Class maps use the header
//! `country,class` with `core` / `noncore` (any case). Tree configs are JSON
//! with weights written as exact rational strings such as `"3/8"`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    default_wef_tree, validate_tree, Bounds, ClassMap, Edge, IndexTree, InnovatorClass, ModelError,
    Node, NodeKind, Normalization, Observation, Panel, TreeError, TreeSpec, Weight, Weights,
};

pub const DEFAULT_TREE: &str = "wef-default";

const PANEL_HEADER: [&str; 4] = ["year", "country", "indicator", "value"];
const CLASS_HEADER: [&str; 2] = ["country", "class"];
const BUNDLED_CLASSES: &str = include_str!("../data/balkans-classes.csv");

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}", location(*.line, *.column, .message))]
    Parse {
        line: u64,
        column: Option<usize>,
        message: String,
    },
    #[error("line {line}: duplicate observation ({year}, {country}, {indicator}), first seen on line {first_line}")]
    DuplicateKey {
        line: u64,
        first_line: u64,
        year: i32,
        country: String,
        indicator: String,
    },
    #[error("line {line}: country {country} has no innovator class")]
    MissingClass { line: u64, country: String },
    #[error("tree config: {0}")]
    Schema(String),
    #[error("tree config: {0}")]
    Tree(#[from] TreeError),
}

fn location(line: u64, column: Option<usize>, message: &str) -> String {
    match column {
        Some(c) => format!("line {line}, column {c}: {message}"),
        None => format!("line {line}: {message}"),
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(line: u64, column: Option<usize>, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_error(err: csv::Error) -> IngestError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        _ => err.to_string(),
    };
    parse_error(line, None, message)
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), IngestError> {
    let header = reader.headers().map_err(csv_error)?;
    let line = header.position().map(|p| p.line()).unwrap_or(1);
    if header.iter().ne(expected.iter().copied()) {
        return Err(parse_error(
            line,
            None,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(())
}

pub fn parse_classes(text: &str) -> Result<ClassMap, IngestError> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, &CLASS_HEADER)?;
    let mut classes = ClassMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let country = &record[0];
        if country.is_empty() || country.chars().any(char::is_whitespace) {
            return Err(parse_error(
                line,
                Some(1),
                format!("invalid country code {country:?}"),
            ));
        }
        let class = InnovatorClass::from_str(&record[1])
            .map_err(|e| parse_error(line, Some(2), e.to_string()))?;
        if classes.insert(country.to_string(), class).is_some() {
            return Err(parse_error(
                line,
                Some(1),
                format!("country {country} listed twice"),
            ));
        }
    }
    Ok(classes)
}

pub fn load_classes(path: &Path) -> Result<ClassMap, IngestError> {
    parse_classes(&read(path)?)
}

/// The bundled class map: the ten Balkan entities, all non-core innovators.
pub fn default_classes() -> ClassMap {
    parse_classes(BUNDLED_CLASSES).expect("bundled class map parses")
}

pub fn parse_panel(text: &str, classes: &ClassMap) -> Result<Panel, IngestError> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, &PANEL_HEADER)?;
    let mut observations = Vec::new();
    let mut first_seen: BTreeMap<(i32, String, String), u64> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let year: i32 = record[0]
            .parse()
            .map_err(|_| parse_error(line, Some(1), format!("invalid year {:?}", &record[0])))?;
        let value: f64 = record[3]
            .parse()
            .map_err(|_| parse_error(line, Some(4), format!("invalid value {:?}", &record[3])))?;
        let obs = Observation::new(year, &record[1], &record[2], value).map_err(|e| {
            let column = match e {
                ModelError::YearOutOfRange(_) => Some(1),
                ModelError::InvalidIdentifier {
                    field: "country", ..
                } => Some(2),
                ModelError::InvalidIdentifier { .. } => Some(3),
                _ => Some(4),
            };
            parse_error(line, column, e.to_string())
        })?;
        let key = (obs.year, obs.country.clone(), obs.indicator.clone());
        if let Some(&first_line) = first_seen.get(&key) {
            return Err(IngestError::DuplicateKey {
                line,
                first_line,
                year: obs.year,
                country: obs.country,
                indicator: obs.indicator,
            });
        }
        if !classes.contains_key(&obs.country) {
            return Err(IngestError::MissingClass {
                line,
                country: obs.country,
            });
        }
        first_seen.insert(key, line);
        observations.push(obs);
    }
    let used: ClassMap = classes
        .iter()
        .filter(|(c, _)| observations.iter().any(|o| &o.country == *c))
        .map(|(c, k)| (c.clone(), *k))
        .collect();
    Panel::new(observations, used).map_err(|e| parse_error(0, None, e.to_string()))
}

/// Loads a panel, classifying countries with `classes` or, when absent, the
/// bundled class map.
pub fn load_panel(path: &Path, classes: Option<&Path>) -> Result<Panel, IngestError> {
    let classes = match classes {
        Some(p) => load_classes(p)?,
        None => default_classes(),
    };
    parse_panel(&read(path)?, &classes)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    root: String,
    nodes: Vec<NodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights_by_class: Option<ClassWeightsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<NormDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassWeightsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    core: Option<Vec<EdgeDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noncore: Option<Vec<EdgeDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    id: String,
    weight: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeDoc {
    min: f64,
    max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum NormDoc {
    Range(RangeDoc),
    ByYear { by_year: BTreeMap<String, RangeDoc> },
    Keyword(String),
}

/// Parses `"p/q"`, an integer, or a plain decimal such as `"0.45"` into an
/// exact rational.
pub fn parse_weight(text: &str) -> Result<Weight, String> {
    let s = text.trim();
    let bad = || format!("invalid weight {text:?}");
    if s.contains('/') {
        let (n, d) = s.split_once('/').ok_or_else(bad)?;
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Weight::new(n, d));
    }
    match s.split_once('.') {
        None => s
            .parse::<i64>()
            .map(Weight::from_integer)
            .map_err(|_| bad()),
        Some((int, frac)) => {
            if frac.is_empty()
                || frac.len() > 15
                || !frac.bytes().all(|b| b.is_ascii_digit())
                || int.starts_with('-')
            {
                return Err(bad());
            }
            let int: i64 = if int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let denom = 10i64.pow(frac.len() as u32);
            let frac: i64 = frac.parse().map_err(|_| bad())?;
            Ok(Weight::new(int * denom + frac, denom))
        }
    }
}

fn edges_from(node: &str, docs: &[EdgeDoc]) -> Result<Vec<Edge>, IngestError> {
    docs.iter()
        .map(|e| {
            parse_weight(&e.weight)
                .map(|w| Edge::new(e.id.clone(), w))
                .map_err(|m| IngestError::Schema(format!("node {node}: {m}")))
        })
        .collect()
}

fn bounds_from(node: &str, r: &RangeDoc) -> Result<Bounds, IngestError> {
    Bounds::new(r.min, r.max).map_err(|e| IngestError::Schema(format!("node {node}: {e}")))
}

fn node_from(doc: NodeDoc) -> Result<Node, IngestError> {
    let id = doc.id;
    if doc.children.is_empty() && doc.weights_by_class.is_none() {
        let normalization = match doc.normalization {
            None => None,
            Some(NormDoc::Range(r)) => Some(Normalization::Fixed(bounds_from(&id, &r)?)),
            Some(NormDoc::ByYear { by_year }) => {
                let mut map = BTreeMap::new();
                for (year, r) in &by_year {
                    let y: i32 = year.parse().map_err(|_| {
                        IngestError::Schema(format!("node {id}: invalid year {year:?}"))
                    })?;
                    map.insert(y, bounds_from(&id, r)?);
                }
                Some(Normalization::PerYear(map))
            }
            Some(NormDoc::Keyword(k)) if k == "observed" => Some(Normalization::Observed),
            Some(NormDoc::Keyword(k)) => {
                return Err(IngestError::Schema(format!(
                    "node {id}: unknown normalization {k:?}"
                )))
            }
        };
        return Ok(Node::leaf(id, normalization));
    }
    if doc.normalization.is_some() {
        return Err(IngestError::Schema(format!(
            "node {id}: only leaves can carry a normalization"
        )));
    }
    let shared = edges_from(&id, &doc.children)?;
    let weights = match doc.weights_by_class {
        None => Weights::Shared(shared),
        Some(by_class) => {
            let pick =
                |list: Option<Vec<EdgeDoc>>, class: &str| -> Result<Vec<Edge>, IngestError> {
                    match list {
                        Some(l) => edges_from(&id, &l),
                        None if !shared.is_empty() => Ok(shared.clone()),
                        None => Err(IngestError::Schema(format!(
                            "node {id}: no weights for {class} innovators"
                        ))),
                    }
                };
            Weights::ByClass {
                core: pick(by_class.core, "core")?,
                noncore: pick(by_class.noncore, "noncore")?,
            }
        }
    };
    Ok(Node::aggregate(id, weights))
}

pub fn parse_tree(json: &str) -> Result<IndexTree, IngestError> {
    let doc: TreeDoc =
        serde_json::from_str(json).map_err(|e| IngestError::Schema(e.to_string()))?;
    let nodes = doc
        .nodes
        .into_iter()
        .map(node_from)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(validate_tree(TreeSpec {
        root: doc.root,
        nodes,
    })?)
}

/// Loads a tree config, or the built-in tree for the literal `wef-default`.
pub fn load_tree(source: &str) -> Result<IndexTree, IngestError> {
    if source == DEFAULT_TREE {
        return Ok(default_wef_tree());
    }
    parse_tree(&read(Path::new(source))?)
}

fn edge_docs(edges: &[Edge]) -> Vec<EdgeDoc> {
    edges
        .iter()
        .map(|e| EdgeDoc {
            id: e.child.clone(),
            weight: e.weight.to_string(),
        })
        .collect()
}

fn range_doc(b: &Bounds) -> RangeDoc {
    RangeDoc {
        min: b.min(),
        max: b.max(),
    }
}

/// Serializes a tree to the config format read by [`parse_tree`].
pub fn tree_to_json(tree: &IndexTree) -> String {
    let nodes = tree
        .nodes()
        .map(|node| {
            let mut doc = NodeDoc {
                id: node.id.clone(),
                children: Vec::new(),
                weights_by_class: None,
                normalization: None,
            };
            match &node.kind {
                NodeKind::Leaf { normalization } => {
                    doc.normalization = normalization.as_ref().map(|n| match n {
                        Normalization::Fixed(b) => NormDoc::Range(range_doc(b)),
                        Normalization::PerYear(m) => NormDoc::ByYear {
                            by_year: m
                                .iter()
                                .map(|(y, b)| (y.to_string(), range_doc(b)))
                                .collect(),
                        },
                        Normalization::Observed => NormDoc::Keyword("observed".into()),
                    });
                }
                NodeKind::Aggregate(Weights::Shared(e)) => doc.children = edge_docs(e),
                NodeKind::Aggregate(Weights::ByClass { core, noncore }) => {
                    doc.weights_by_class = Some(ClassWeightsDoc {
                        core: Some(edge_docs(core)),
                        noncore: Some(edge_docs(noncore)),
                    });
                }
            }
            doc
        })
        .collect();
    let doc = TreeDoc {
        root: tree.root().to_string(),
        nodes,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("tree serializes");
    out.push('\n');
    out
}
