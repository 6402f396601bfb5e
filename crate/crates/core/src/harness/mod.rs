//! Transmission accounting, timing, and the size and scaling reports.

mod ledger;
mod report;
mod timing;

pub use ledger::{LedgerEntry, TransmissionLedger, SHARED};
pub use report::{
    format_bytes, report_scaling, report_setup, report_template_expansion, ModelScaling, ScalingReport, SetupReport,
    SetupRow, TemplateExpansion, UnitSizes, KIB, MIB,
};
pub use timing::{TimingEntry, Timings};
