//! CSV ingestion and report emission.

mod csv;
mod emit;

pub use self::csv::{
    ingest_csv, ingest_forcing_csv, read_forcing, read_observations, write_csv, write_observations,
};
pub use emit::{mc_table_tsv, plot_tsv, sig6, test_reports_tsv, to_json, trajectory_plot_data, write_output, Format};
