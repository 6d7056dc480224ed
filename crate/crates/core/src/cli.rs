//! Command-line interface. Every command is a thin composition of library
//! calls; no arithmetic happens here.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::aggregation::{compute_all, evaluate_node, EvalError, LeafAssignment, MissingPolicy};
use crate::ingest::{load_panel, load_tree, IngestError, DEFAULT_TREE};
use crate::model::{IndexTree, Panel, ScoreTable};
use crate::ranking::{rank_delta, rank_scores, RankError};
use crate::report::{self, render, Format, ReportError, Table};
use crate::stats::{ols_fit, pearson, rank_homogeneity_test, StatsError};
use crate::whatif::{apply_scenario, min_delta_for_rank_gain, Scenario, WhatIfError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    WhatIf(#[from] WhatIfError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Usage(String),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "gcindex",
    version,
    about = "Growth Competitiveness Index scores, rankings, statistics and what-if analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Panel CSV with header year,country,indicator,value
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Class map CSV with header country,class [default: bundled Balkan map, all noncore]
    #[arg(long, value_name = "PATH")]
    pub classes: Option<PathBuf>,
    /// Index tree JSON config, or wef-default for the built-in tree
    #[arg(long, value_name = "PATH", default_value = DEFAULT_TREE)]
    pub tree: String,
    /// Missing-data policy: strict fails, renormalize rescales the remaining weights
    #[arg(long, value_enum, default_value_t = PolicyArg::Strict)]
    pub policy: PolicyArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Strict,
    Renormalize,
}

impl From<PolicyArg> for MissingPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Strict => MissingPolicy::Strict,
            PolicyArg::Renormalize => MissingPolicy::Renormalize,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Svg,
    Text,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Svg => Format::Svg,
            FormatArg::Text => Format::Text,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Write the result to this file instead of printing it
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format [default: from the --out extension, else csv for files and text for stdout]
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Figure {
    /// One node's scores per country across years (use --node ICTS for the ICT sub-index)
    Scores,
    /// Rank changes between two years
    Deltas,
    /// A country's node scores with fitted trend lines
    Trend,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every country on every tree node for one year
    Compute {
        #[command(flatten)]
        data: DataArgs,
        /// Year to evaluate
        #[arg(long)]
        year: i32,
        /// Only report this node
        #[arg(long)]
        node: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Rank countries on a node for one year
    Rank {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        year: i32,
        /// Node to rank on
        #[arg(long, default_value = "GCI")]
        node: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Rank changes between two years (previous rank minus current rank; positive is a rise)
    Delta {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        prev_year: i32,
        #[arg(long)]
        cur_year: i32,
        #[arg(long, default_value = "GCI")]
        node: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Chi-square test of current-year ranks against previous-year ranks
    Chisq {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        prev_year: i32,
        #[arg(long)]
        cur_year: i32,
        /// Significance level
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "GCI")]
        node: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Least-squares trend of a country's node score over years
    Trend {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        country: String,
        #[arg(long, default_value = "GCI")]
        node: String,
        /// First year (inclusive) [default: first year in the data]
        #[arg(long)]
        from: Option<i32>,
        /// Last year (inclusive) [default: last year in the data]
        #[arg(long)]
        to: Option<i32>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Pearson correlation between two node score series of one country
    Correlate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        country: String,
        /// The two nodes to correlate, comma separated
        #[arg(long, value_delimiter = ',', default_value = "TI,GCI")]
        nodes: Vec<String>,
        #[arg(long)]
        from: Option<i32>,
        #[arg(long)]
        to: Option<i32>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Override one node score for one country and rerank, or find the
    /// smallest increase that gains a number of places
    #[command(group(clap::ArgGroup::new("scenario").required(true).args(["set", "gain"])))]
    Whatif {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        year: i32,
        #[arg(long)]
        country: String,
        /// Node whose score is varied
        #[arg(long, default_value = "GCI")]
        node: String,
        /// New score for the node, on the 1-7 scale
        #[arg(long)]
        set: Option<f64>,
        /// Number of rank places to gain
        #[arg(long)]
        gain: Option<u32>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Chart-ready series: scores over time, rank changes, or trend lines
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        figure: Figure,
        #[arg(long, default_value = "GCI")]
        node: String,
        /// Extra node for --figure trend
        #[arg(long)]
        with_node: Option<String>,
        /// Country for --figure trend
        #[arg(long)]
        country: Option<String>,
        #[arg(long)]
        from: Option<i32>,
        #[arg(long)]
        to: Option<i32>,
        /// Previous year for --figure deltas
        #[arg(long)]
        prev_year: Option<i32>,
        /// Current year for --figure deltas
        #[arg(long)]
        cur_year: Option<i32>,
        #[command(flatten)]
        out: OutArgs,
    },
}

struct Loaded {
    panel: Panel,
    tree: IndexTree,
    policy: MissingPolicy,
}

fn load(args: &DataArgs) -> Result<Loaded, CliError> {
    Ok(Loaded {
        panel: load_panel(&args.data, args.classes.as_deref())?,
        tree: load_tree(&args.tree)?,
        policy: args.policy.into(),
    })
}

impl Loaded {
    fn scores(&self, year: i32) -> Result<ScoreTable, CliError> {
        Ok(compute_all(&self.tree, &self.panel, year, self.policy)?)
    }

    /// (year, score) of one country's node across the panel years in range.
    fn series(
        &self,
        country: &str,
        node: &str,
        from: Option<i32>,
        to: Option<i32>,
    ) -> Result<Vec<(i32, f64)>, CliError> {
        if self.tree.node(node).is_none() {
            return Err(EvalError::UnknownNode(node.to_string()).into());
        }
        let mut out = Vec::new();
        for year in self.panel.years() {
            if from.is_some_and(|f| year < f) || to.is_some_and(|t| year > t) {
                continue;
            }
            if !self.panel.countries(year).contains(country) {
                continue;
            }
            let class = self
                .panel
                .class_of(country)
                .expect("panel guarantees a class per country");
            if !self.tree.reaches(node, class) {
                continue;
            }
            let leaves = LeafAssignment::from_panel(&self.panel, year);
            out.push((
                year,
                evaluate_node(&self.tree, node, class, &leaves, country, self.policy)?,
            ));
        }
        Ok(out)
    }
}

fn year_span(series: &[(i32, f64)]) -> (i32, i32) {
    let first = series.first().map(|p| p.0).unwrap_or(0);
    let last = series.last().map(|p| p.0).unwrap_or(0);
    (first, last)
}

fn emit(table: &Table, out: &OutArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &out.out {
        Some(path) => {
            let format = out
                .format
                .map(Format::from)
                .or_else(|| Format::from_extension(path))
                .unwrap_or(Format::Csv);
            report::emit_report(table, format, path)?;
        }
        None => {
            let format = out.format.map(Format::from).unwrap_or(Format::Text);
            stdout.write_all(render(table, format)?.as_bytes())?;
        }
    }
    Ok(())
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Compute {
            data,
            year,
            node,
            out,
        } => {
            let ctx = load(&data)?;
            let scores = ctx.scores(year)?;
            if let Some(n) = &node {
                if ctx.tree.node(n).is_none() {
                    return Err(EvalError::UnknownNode(n.clone()).into());
                }
            }
            emit(
                &report::scores_table(&scores, node.as_deref()),
                &out,
                stdout,
            )
        }
        Command::Rank {
            data,
            year,
            node,
            out,
        } => {
            let ctx = load(&data)?;
            let scores = ctx.scores(year)?;
            let ranks = rank_scores(&scores, &node)?;
            emit(&report::ranks_table(&ranks, Some(&scores)), &out, stdout)
        }
        Command::Delta {
            data,
            prev_year,
            cur_year,
            node,
            out,
        } => {
            let ctx = load(&data)?;
            let prev = rank_scores(&ctx.scores(prev_year)?, &node)?;
            let cur = rank_scores(&ctx.scores(cur_year)?, &node)?;
            emit(
                &report::delta_table(&rank_delta(&prev, &cur)?),
                &out,
                stdout,
            )
        }
        Command::Chisq {
            data,
            prev_year,
            cur_year,
            alpha,
            node,
            out,
        } => {
            let ctx = load(&data)?;
            let prev = rank_scores(&ctx.scores(prev_year)?, &node)?;
            let cur = rank_scores(&ctx.scores(cur_year)?, &node)?;
            let result = rank_homogeneity_test(&prev, &cur, alpha)?;
            emit(&report::chi_square_table(&result), &out, stdout)
        }
        Command::Trend {
            data,
            country,
            node,
            from,
            to,
            out,
        } => {
            let ctx = load(&data)?;
            let series = ctx.series(&country, &node, from, to)?;
            let fit = ols_fit(&series)?;
            let (first, last) = year_span(&series);
            emit(
                &report::trend_table(&country, &node, first, last, &fit),
                &out,
                stdout,
            )
        }
        Command::Correlate {
            data,
            country,
            nodes,
            from,
            to,
            out,
        } => {
            let ctx = load(&data)?;
            let [x_node, y_node] = <[String; 2]>::try_from(nodes)
                .map_err(|_| CliError::Usage("--nodes takes exactly two node ids".into()))?;
            let xs = ctx.series(&country, &x_node, from, to)?;
            let ys = ctx.series(&country, &y_node, from, to)?;
            let pairs: Vec<(i32, f64, f64)> = xs
                .iter()
                .filter_map(|&(yr, x)| ys.iter().find(|p| p.0 == yr).map(|p| (yr, x, p.1)))
                .collect();
            let x: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            let r = pearson(&x, &y)?;
            let first = pairs.first().map(|p| p.0).unwrap_or(0);
            let last = pairs.last().map(|p| p.0).unwrap_or(0);
            emit(
                &report::correlation_table(&country, &x_node, &y_node, first, last, &r),
                &out,
                stdout,
            )
        }
        Command::Whatif {
            data,
            year,
            country,
            node,
            set,
            gain,
            out,
        } => {
            let ctx = load(&data)?;
            let scores = ctx.scores(year)?;
            let classes = ctx.panel.classes();
            let table = match (set, gain) {
                (Some(value), None) => {
                    let scenario = Scenario {
                        country,
                        node,
                        value,
                    };
                    report::whatif_table(&apply_scenario(&ctx.tree, &scores, classes, &scenario)?)
                }
                (None, Some(k)) => {
                    let result =
                        min_delta_for_rank_gain(&ctx.tree, &scores, classes, &country, k, &node)?;
                    report::gain_table(&country, &node, k, &result)
                }
                _ => {
                    return Err(CliError::Usage(
                        "give exactly one of --set and --gain".into(),
                    ))
                }
            };
            emit(&table, &out, stdout)
        }
        Command::Report {
            data,
            figure,
            node,
            with_node,
            country,
            from,
            to,
            prev_year,
            cur_year,
            out,
        } => {
            let ctx = load(&data)?;
            let table = match figure {
                Figure::Scores => {
                    let mut points = Vec::new();
                    for year in ctx.panel.years() {
                        if from.is_some_and(|f| year < f) || to.is_some_and(|t| year > t) {
                            continue;
                        }
                        let scores = ctx.scores(year)?;
                        for c in scores.countries() {
                            if let Some(s) = scores.get(c, &node) {
                                points.push((year, c.to_string(), s));
                            }
                        }
                    }
                    report::score_series_table(&node, &points)
                }
                Figure::Deltas => {
                    let (Some(p), Some(c)) = (prev_year, cur_year) else {
                        return Err(CliError::Usage(
                            "--figure deltas needs --prev-year and --cur-year".into(),
                        ));
                    };
                    let prev = rank_scores(&ctx.scores(p)?, &node)?;
                    let cur = rank_scores(&ctx.scores(c)?, &node)?;
                    report::delta_table(&rank_delta(&prev, &cur)?)
                }
                Figure::Trend => {
                    let Some(country) = country else {
                        return Err(CliError::Usage("--figure trend needs --country".into()));
                    };
                    let mut nodes = vec![node];
                    nodes.extend(with_node);
                    let mut series = Vec::new();
                    for n in &nodes {
                        let points = ctx.series(&country, n, from, to)?;
                        let fit = ols_fit(&points)?;
                        series.push((n.as_str(), points, fit));
                    }
                    report::trend_series_table(&country, &series)
                }
            };
            emit(&table, &out, stdout)
        }
    }
}

/// Exit code for an error: 2 for usage mistakes, 1 for everything else.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Usage(_) => 2,
        _ => 1,
    }
}
