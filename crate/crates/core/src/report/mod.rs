//! Campaigns of independent configurator runs, validation tables, rankings
//! and plot data.

mod campaign;
mod plot;
mod validation;

use std::io;

use thiserror::Error;

use crate::objective::ObjectiveError;
use crate::runner::LogError;

pub use campaign::{derive_seed, run_campaign, run_label, write_campaign, Campaign, CampaignRun, CampaignSpec, Strategy};
pub use plot::{emit_plot_data, plot_data, PlotSource};
pub use validation::{
    rank_by_validation, ranking_csv, render_table, table_csv, table_from_runs, validate_configurations, validate_with,
    validation_keys, RankedRow, Ranking, ValidationRow, ValidationTable, DEFAULT_LABEL,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid campaign: {0}")]
    InvalidCampaign(String),
    #[error("run with load tag {found} in a table for load {expected}")]
    MixedLoad { expected: usize, found: usize },
    #[error("no matching run for instance `{instance}` seed {seed}")]
    Unmatched { instance: String, seed: u64 },
    #[error("nothing to report")]
    EmptyTable,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] io::Error),
}
