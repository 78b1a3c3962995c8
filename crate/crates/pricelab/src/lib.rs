//! Price index computation from scanner transaction data.
//!
//! The pipeline runs in stages: raw transaction rows are parsed and
//! aggregated into a monthly product panel ([`ingest`]), product codes that
//! denote the same item are consolidated by identifier and description
//! matching ([`matching`]), unreliable observations are screened out
//! ([`filtering`]), and price indices are computed with bilateral
//! ([`bilateral`]) or multilateral ([`multilateral`]) formulas. Multilateral
//! windows are extended into long series by splicing ([`extension`]) and
//! cell-level indices are combined into higher aggregates ([`aggregation`]).
//!
//! [`synth`] generates panels with known behaviour for testing and
//! benchmarking, and [`pipeline`] wires the stages together for the CLI.

pub mod aggregation;
pub mod bilateral;
pub mod error;
pub mod extension;
pub mod filtering;
pub mod ingest;
pub mod matching;
pub mod month;
pub mod multilateral;
mod num;
pub mod pipeline;
pub mod series;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use month::Month;
pub use series::{IndexSeries, SeriesMeta};
