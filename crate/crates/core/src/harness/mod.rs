//! Scenario configuration, the end-to-end CE run and the command layer
//! behind the `cesig` binary.

mod ce;
mod commands;
mod config;

pub use ce::{
    ce_run, crypto_timings, CeReport, CryptoTimings, FrameLog, Outcome, RejectReason, SliceStatus,
};
pub use commands::{
    ber_sweep, detect, fsm_check, pca, relay_sim, resolve_out, run_command, sr_sweep, write_output,
    CheckRow, Command, CommandError, CommandOutput, DetectReport, DetectRow, Format, FsmReport,
    LocationSummary, PcaOutput, RelaySimReport, OUT_DIR_ENV,
};
pub use config::{
    AdversaryConfig, ChannelConfig, ConfigError, CostConstants, DetectorConfig, FsmConfig,
    PcaConfig, ScenarioConfig, SweepConfig,
};
