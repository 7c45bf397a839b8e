//! Series ingestion, scenario configuration, case lists and output files.

mod cases;
mod config;
mod output;
mod run;
mod series;

pub use cases::parse_cases;
pub use config::{
    parse_config, parse_config_str, BessSection, ControllerSection, DataSection, LoweringName, OutputSection,
    RunConfig, SimSection,
};
pub use output::{
    comparison_table, emit_outputs, read_report, read_trace, report_json, report_table, write_comparison_csv,
    write_trace, ComparisonEntry, ReportDoc, RunManifest, Runtimes, MANIFEST_FILE, REPORT_JSON, REPORT_TXT, TRACE_FILE,
};
pub use run::{comparison_entry, execute, execute_all, load_series, write_run, ScenarioRun};
pub use series::{
    load_timeseries, read_timeseries, write_timeseries, write_timeseries_to, Series, SeriesError, SERIES_HEADER,
};
