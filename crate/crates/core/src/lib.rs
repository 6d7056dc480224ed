//! Growth Competitiveness Index engine.
//!
//! Builds composite competitiveness scores from a weighted index tree
//! ([`model`], [`aggregation`]), ranks countries and tracks rank movement
//! ([`ranking`]), runs the chi-square, trend and correlation statistics used
//! to compare rankings over time ([`stats`]), and answers what-if questions
//! about how far one component must move to change a country's rank
//! ([`whatif`]). [`ingest`] and [`report`] handle the file formats; [`cli`]
//! wires everything into the `gcindex` binary.

pub mod aggregation;
pub mod cli;
pub mod ingest;
pub mod model;
pub mod ranking;
pub mod report;
pub mod stats;
pub mod svg;
pub mod whatif;

pub use aggregation::{
    compute_all, evaluate_node, normalize_minmax, LeafAssignment, MissingPolicy,
};
pub use model::{
    default_wef_tree, validate_tree, ClassMap, IndexTree, InnovatorClass, Observation, Panel,
    RankTable, ScoreTable,
};
pub use ranking::{rank_delta, rank_scores};
pub use stats::{
    chi_square_isf, chi_square_sf, chi_square_statistic, ols_fit, pearson, rank_homogeneity_test,
};
pub use whatif::{apply_scenario, min_delta_for_rank_gain, Scenario};
