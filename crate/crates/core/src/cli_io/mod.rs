//! Configuration, orchestration and artifact files for the command-line tool.

mod artifacts;
mod commands;
mod config;

pub use artifacts::{
    build_manifest, descriptor_path, parse_series, partial_path, read_series, read_snapshot,
    series_to_string, sha256_hex, snapshot_bytes, verify_manifest, ArtifactSet, SnapshotDesc,
    MANIFEST, PARTIAL,
};
pub use commands::{
    chi_table, cmd_chi_table, cmd_diagnose, cmd_elliptic, cmd_ladder, cmd_run, effective_config,
    exit_code, load_phi_series, member_dir, Outcome, Overrides, EXIT_INCOMPLETE,
};
pub use config::{parse_config, KChoice, KWord, RunConfig, TwistMode};
