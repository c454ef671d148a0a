//! Triangle/TetGen style input, mesh and report output.

mod cli;
mod parse;
mod write;

pub use parse::{parse_input, parse_node, parse_poly, parse_smesh, read_node, Input, PLANARITY_TOL};
pub use write::{
    ele_text, events_text, fmt_f64, node_text, numbering, parse_events, plc_text, report_text, svg_text, vtk_text, write_atomic,
    write_output, OutputPaths, RunManifest, EVENTS_FORMAT, NODE_FORMAT, REPORT_FORMAT,
};
pub use cli::{cli_main, cli_main_with, EXIT_AUDIT, EXIT_CAP, EXIT_OK, EXIT_OTHER, EXIT_USAGE, EXIT_VALIDATION};
