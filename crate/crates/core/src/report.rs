//! Tabular results and their serialized forms.
//!
//! Every result type converts into a [`Table`], which renders to CSV, JSON,
//! aligned text or a small SVG chart. Numbers always print with six decimals
//! and a `.` separator, and rows keep a fixed order, so identical inputs give
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::value::RawValue;
use thiserror::Error;

use crate::model::{RankTable, ScoreTable};
use crate::ranking::RankDelta;
use crate::stats::{ChiSquareResult, CorrelationResult, TrendResult};
use crate::svg;
use crate::whatif::{RankGain, WhatIfOutcome};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0} output is not supported for this report")]
    UnsupportedFormat(String),
    #[error("nothing to report")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
    Text,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
            Format::Text => "text",
        }
    }

    pub fn from_extension(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "svg" => Some(Format::Svg),
            "txt" => Some(Format::Text),
            _ => None,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            "text" | "txt" => Ok(Format::Text),
            other => Err(format!("unsupported format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    /// Integer printed with an explicit sign (rank deltas).
    Signed(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) | Cell::Signed(v) => Some(*v as f64),
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    /// CSV and text form of the cell.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Signed(0) => "0".to_string(),
            Cell::Signed(v) => format!("{v:+}"),
            Cell::Num(v) => format_number(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Box<RawValue> {
        let raw = match self {
            Cell::Text(s) => serde_json::to_string(s).expect("string serializes"),
            Cell::Signed(v) => v.to_string(),
            other => other.render(),
        };
        RawValue::from_string(raw).expect("valid JSON literal")
    }

    /// Inverse of the CSV rendering.
    fn parse(s: &str) -> Cell {
        let body = s.strip_prefix('+');
        if let Some(v) = body.and_then(|b| b.parse::<i64>().ok()) {
            return Cell::Signed(v);
        }
        if !s.contains(['.', 'e', 'E']) {
            if let Ok(v) = s.parse::<i64>() {
                return Cell::Int(v);
            }
        }
        if s.contains('.') {
            if let Ok(v) = s.parse::<f64>() {
                return Cell::Num(v);
            }
        }
        Cell::Text(s.to_string())
    }
}

/// Six decimals, `.` separator, no negative zero.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Chart {
    Bars {
        label: usize,
        value: usize,
    },
    /// One line per y column, split further by the series column if given.
    Lines {
        x: usize,
        y: Vec<usize>,
        series: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub chart: Option<Chart>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            chart: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, column: &str) -> Option<&Cell> {
        self.rows.get(row)?.get(self.column(column)?)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn render(table: &Table, format: Format) -> Result<String, ReportError> {
    if table.is_empty() {
        return Err(ReportError::Empty);
    }
    match format {
        Format::Csv => Ok(render_csv(table)),
        Format::Json => Ok(render_json(table)),
        Format::Text => Ok(render_text(table)),
        Format::Svg => render_svg(table),
    }
}

pub fn emit_report(table: &Table, format: Format, path: &Path) -> Result<(), ReportError> {
    let body = render(table, format)?;
    fs::write(path, body).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn render_csv(table: &Table) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output")
}

fn render_json(table: &Table) -> String {
    #[derive(Serialize)]
    struct Doc<'a> {
        title: &'a str,
        columns: &'a [String],
        rows: Vec<BTreeMap<&'a str, Box<RawValue>>>,
    }
    let rows = table
        .rows
        .iter()
        .map(|row| {
            table
                .columns
                .iter()
                .map(String::as_str)
                .zip(row.iter().map(Cell::json))
                .collect()
        })
        .collect();
    let doc = Doc {
        title: &table.title,
        columns: &table.columns,
        rows,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
    out.push('\n');
    out
}

fn render_text(table: &Table) -> String {
    let cells: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| r.iter().map(Cell::render).collect())
        .collect();
    let mut out = String::new();
    if cells.len() == 1 {
        let width = table.columns.iter().map(|c| c.len()).max().unwrap_or(0);
        for (name, value) in table.columns.iter().zip(&cells[0]) {
            out.push_str(&format!("{name:<width$}  {value}\n"));
        }
        return out;
    }
    let widths: Vec<usize> = (0..table.columns.len())
        .map(|i| {
            cells
                .iter()
                .map(|r| r[i].len())
                .chain([table.columns[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |values: &mut dyn Iterator<Item = &str>| -> String {
        let padded: Vec<String> = values
            .zip(&widths)
            .map(|(v, w)| format!("{v:<w$}"))
            .collect();
        let mut s = padded.join("  ").trim_end().to_string();
        s.push('\n');
        s
    };
    out.push_str(&line(&mut table.columns.iter().map(String::as_str)));
    for row in &cells {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

fn render_svg(table: &Table) -> Result<String, ReportError> {
    let Some(chart) = &table.chart else {
        return Err(ReportError::UnsupportedFormat("svg".into()));
    };
    match chart {
        Chart::Bars { label, value } => {
            let bars: Vec<(String, f64)> = table
                .rows
                .iter()
                .filter_map(|r| Some((r[*label].render(), r[*value].as_f64()?)))
                .collect();
            Ok(svg::bar_chart(&table.title, &table.columns[*value], &bars))
        }
        Chart::Lines { x, y, series } => {
            let mut lines: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
            for &col in y {
                for row in &table.rows {
                    let (Some(px), Some(py)) = (row[*x].as_f64(), row[col].as_f64()) else {
                        continue;
                    };
                    let name = match series {
                        Some(s) if y.len() > 1 => {
                            format!("{} {}", row[*s].render(), table.columns[col])
                        }
                        Some(s) => row[*s].render(),
                        None => table.columns[col].clone(),
                    };
                    match lines.iter_mut().find(|(n, _)| *n == name) {
                        Some((_, pts)) => pts.push((px, py)),
                        None => lines.push((name, vec![(px, py)])),
                    }
                }
            }
            let y_label = y
                .iter()
                .map(|c| table.columns[*c].as_str())
                .collect::<Vec<_>>()
                .join(" / ");
            Ok(svg::line_chart(
                &table.title,
                &table.columns[*x],
                &y_label,
                &lines,
            ))
        }
    }
}

/// Reads a CSV report back into a table. Numeric cells recover their kind
/// from the text, so re-rendering gives the same bytes.
pub fn parse_table_csv(text: &str) -> Result<Table, ReportError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| ReportError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ReportError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        rows.push(record.iter().map(Cell::parse).collect());
    }
    Ok(Table {
        title: String::new(),
        columns,
        rows,
        chart: None,
    })
}

pub fn load_table_csv(path: &Path) -> Result<Table, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_table_csv(&text)
}

/// Scores in the panel layout, so the file can be read back as data. With a
/// node filter the table charts as bars.
pub fn scores_table(scores: &ScoreTable, node: Option<&str>) -> Table {
    let title = match node {
        Some(n) => format!("{n} scores {}", scores.year()),
        None => format!("Scores {}", scores.year()),
    };
    let mut t = Table::new(title, &["year", "country", "indicator", "value"]);
    for (country, id, score) in scores.iter() {
        if node.is_some_and(|n| n != id) {
            continue;
        }
        t.push(vec![
            Cell::Int(scores.year() as i64),
            Cell::text(country),
            Cell::text(id),
            Cell::Num(score),
        ]);
    }
    if node.is_some() {
        t.chart = Some(Chart::Bars { label: 1, value: 3 });
    }
    t
}

pub fn ranks_table(ranks: &RankTable, scores: Option<&ScoreTable>) -> Table {
    let mut t = Table::new(
        format!("{} ranking {}", ranks.node, ranks.year),
        &["year", "node", "rank", "country", "score"],
    );
    for (country, rank) in &ranks.entries {
        let score = scores
            .and_then(|s| s.get(country, &ranks.node))
            .map(Cell::Num)
            .unwrap_or_else(|| Cell::text(""));
        t.push(vec![
            Cell::Int(ranks.year as i64),
            Cell::text(&ranks.node),
            Cell::Int(*rank as i64),
            Cell::text(country),
            score,
        ]);
    }
    t.chart = Some(Chart::Bars { label: 3, value: 4 });
    t
}

pub fn delta_table(delta: &RankDelta) -> Table {
    let mut t = Table::new(
        format!(
            "{} rank change {}-{}",
            delta.node, delta.prev_year, delta.cur_year
        ),
        &["country", "prev_rank", "cur_rank", "delta", "status"],
    );
    for (country, (prev, cur, d)) in &delta.moves {
        t.push(vec![
            Cell::text(country),
            Cell::Int(*prev as i64),
            Cell::Int(*cur as i64),
            Cell::Signed(*d),
            Cell::text("ranked"),
        ]);
    }
    for country in &delta.entrants {
        t.push(vec![
            Cell::text(country),
            Cell::text(""),
            Cell::text(""),
            Cell::text(""),
            Cell::text("entrant"),
        ]);
    }
    for country in &delta.leavers {
        t.push(vec![
            Cell::text(country),
            Cell::text(""),
            Cell::text(""),
            Cell::text(""),
            Cell::text("leaver"),
        ]);
    }
    t.chart = Some(Chart::Bars { label: 0, value: 3 });
    t
}

pub fn chi_square_table(r: &ChiSquareResult) -> Table {
    let mut t = Table::new(
        "Chi-square test",
        &[
            "statistic",
            "df",
            "p_value",
            "critical_value",
            "alpha",
            "decision",
        ],
    );
    t.push(vec![
        Cell::Num(r.statistic),
        Cell::Int(r.df as i64),
        Cell::Num(r.p_value),
        Cell::Num(r.critical_value),
        Cell::Num(r.alpha),
        Cell::text(r.decision.as_str()),
    ]);
    t
}

pub fn trend_table(country: &str, node: &str, from: i32, to: i32, r: &TrendResult) -> Table {
    let mut t = Table::new(
        format!("{node} trend for {country}"),
        &["country", "node", "from", "to", "n", "slope", "intercept"],
    );
    t.push(vec![
        Cell::text(country),
        Cell::text(node),
        Cell::Int(from as i64),
        Cell::Int(to as i64),
        Cell::Int(r.n as i64),
        Cell::Num(r.slope),
        Cell::Num(r.intercept),
    ]);
    t
}

/// A node id, its (year, value) points and the line fitted to them.
pub type TrendSeries<'a> = (&'a str, Vec<(i32, f64)>, TrendResult);

/// Yearly values with their fitted trend line, for charting.
pub fn trend_series_table(country: &str, series: &[TrendSeries]) -> Table {
    let mut t = Table::new(
        format!("Trends for {country}"),
        &["node", "year", "value", "fitted"],
    );
    for (node, points, fit) in series {
        for &(year, value) in points {
            t.push(vec![
                Cell::text(*node),
                Cell::Int(year as i64),
                Cell::Num(value),
                Cell::Num(fit.predict(year as f64)),
            ]);
        }
    }
    t.chart = Some(Chart::Lines {
        x: 1,
        y: vec![2, 3],
        series: Some(0),
    });
    t
}

pub fn correlation_table(
    country: &str,
    x_node: &str,
    y_node: &str,
    from: i32,
    to: i32,
    r: &CorrelationResult,
) -> Table {
    let mut t = Table::new(
        format!("Correlation of {x_node} and {y_node} for {country}"),
        &["country", "x", "y", "from", "to", "n", "r"],
    );
    t.push(vec![
        Cell::text(country),
        Cell::text(x_node),
        Cell::text(y_node),
        Cell::Int(from as i64),
        Cell::Int(to as i64),
        Cell::Int(r.n as i64),
        Cell::Num(r.r),
    ]);
    t
}

/// Scores of one node over several years, one line per country.
pub fn score_series_table(node: &str, points: &[(i32, String, f64)]) -> Table {
    let mut t = Table::new(
        format!("{node} scores"),
        &["year", "country", "indicator", "value"],
    );
    for (year, country, value) in points {
        t.push(vec![
            Cell::Int(*year as i64),
            Cell::text(country),
            Cell::text(node),
            Cell::Num(*value),
        ]);
    }
    t.chart = Some(Chart::Lines {
        x: 0,
        y: vec![3],
        series: Some(1),
    });
    t
}

pub fn whatif_table(o: &WhatIfOutcome) -> Table {
    let mut t = Table::new(
        format!(
            "What-if: {} {} = {}",
            o.country,
            o.node,
            format_number(o.new_score)
        ),
        &[
            "country",
            "node",
            "baseline_score",
            "new_score",
            "baseline_gci",
            "new_gci",
            "baseline_rank",
            "new_rank",
            "delta_rank",
        ],
    );
    t.push(vec![
        Cell::text(&o.country),
        Cell::text(&o.node),
        Cell::Num(o.baseline_score),
        Cell::Num(o.new_score),
        Cell::Num(o.baseline_gci),
        Cell::Num(o.new_gci),
        Cell::Int(o.baseline_rank as i64),
        Cell::Int(o.new_rank as i64),
        Cell::Signed(o.delta_rank),
    ]);
    t
}

pub fn gain_table(country: &str, node: &str, k: u32, gain: &RankGain) -> Table {
    let mut t = Table::new(
        format!("Rank gain of {k} for {country} via {node}"),
        &[
            "country",
            "node",
            "gain",
            "status",
            "delta",
            "new_score",
            "target",
            "target_gci",
        ],
    );
    let row = match gain {
        RankGain::Feasible {
            delta,
            new_score,
            target,
            target_gci,
            ..
        } => vec![
            Cell::text("feasible"),
            Cell::Num(*delta),
            Cell::Num(*new_score),
            Cell::text(target),
            Cell::Num(*target_gci),
        ],
        RankGain::Infeasible { required_score } => vec![
            Cell::text("infeasible"),
            Cell::text(""),
            required_score
                .map(Cell::Num)
                .unwrap_or_else(|| Cell::text("")),
            Cell::text(""),
            Cell::text(""),
        ],
    };
    let mut full = vec![Cell::text(country), Cell::text(node), Cell::Int(k as i64)];
    full.extend(row);
    t.push(full);
    t
}
