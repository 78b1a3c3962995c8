//! Transaction file parsing and monthly panel construction.

pub mod normalize;
pub mod panel;

use std::io::Read;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::Month;
pub use normalize::{normalize_description, Measure, NormalizedDescription, Unit, UnitKind};
pub use panel::{build_panel, PanelBuild, ProductPanel, ScopeCell, ScopePanel};

/// One raw aggregated sale line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub outlet_id: String,
    pub month: Month,
    /// Barcode, when the provider supplied one.
    pub ean: Option<String>,
    /// Retailer-internal product code.
    pub provider_id: Option<String>,
    pub description: String,
    /// Count or measure sold; negative for returns.
    pub quantity: Decimal,
    /// Currency amount; negative for returns.
    pub turnover: Decimal,
    pub subgroup: Option<String>,
}

/// A rejected input row: its 1-based line number and the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

/// CSV dialect for the transaction format. The decimal mark is always ".".
#[derive(Debug, Clone, Copy)]
pub struct CsvDialect {
    pub delimiter: u8,
}

impl Default for CsvDialect {
    fn default() -> Self {
        CsvDialect { delimiter: b',' }
    }
}

/// Result of parsing an input stream: accepted records (with their source
/// line numbers) and per-row rejects.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<TransactionRecord>,
    /// Source line of each accepted record, parallel to `records`.
    pub lines: Vec<u64>,
    pub rejects: Vec<Reject>,
}

const REQUIRED_COLUMNS: [&str; 7] =
    ["outlet_id", "month", "ean", "provider_id", "description", "quantity", "turnover"];

fn optional(field: &str) -> Option<String> {
    let trimmed = field.trim();
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_string())
    }
}

/// Parse a UTF-8 transaction CSV with a header row. Malformed rows are
/// collected into [`ParseOutcome::rejects`], never silently dropped; a
/// missing mandatory column fails the whole parse.
pub fn parse_transactions<R: Read>(source: R, dialect: CsvDialect) -> Result<ParseOutcome> {
    let mut reader =
        csv::ReaderBuilder::new().delimiter(dialect.delimiter).flexible(true).from_reader(source);

    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Option<usize> {
        headers.iter().position(|h| h.trim_start_matches('\u{feff}').trim() == name)
    };
    let mut index = [0usize; 7];
    for (slot, name) in index.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = column(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let [outlet_col, month_col, ean_col, provider_col, desc_col, qty_col, turnover_col] = index;
    let subgroup_col = column("subgroup");

    let mut out = ParseOutcome::default();
    for entry in reader.records() {
        let record = match entry {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.rejects.push(Reject { line, reason: format!("unreadable row: {e}") });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let reject = |reason: String, out: &mut ParseOutcome| {
            out.rejects.push(Reject { line, reason });
        };

        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let outlet_id = field(outlet_col).to_string();
        if outlet_id.is_empty() {
            reject("empty outlet_id".into(), &mut out);
            continue;
        }
        let month = match field(month_col).parse::<Month>() {
            Ok(m) => m,
            Err(e) => {
                reject(format!("month: {e}"), &mut out);
                continue;
            }
        };
        let ean = optional(field(ean_col));
        let provider_id = optional(field(provider_col));
        if ean.is_none() && provider_id.is_none() {
            reject("neither ean nor provider_id present".into(), &mut out);
            continue;
        }
        let quantity = match field(qty_col).parse::<Decimal>() {
            Ok(q) => q,
            Err(_) => {
                reject(format!("quantity not a number: {:?}", field(qty_col)), &mut out);
                continue;
            }
        };
        let turnover = match field(turnover_col).parse::<Decimal>() {
            Ok(t) => t,
            Err(_) => {
                reject(format!("turnover not a number: {:?}", field(turnover_col)), &mut out);
                continue;
            }
        };

        out.records.push(TransactionRecord {
            outlet_id,
            month,
            ean,
            provider_id,
            description: field(desc_col).to_string(),
            quantity,
            turnover,
            subgroup: subgroup_col.and_then(|i| optional(field(i))),
        });
        out.lines.push(line);
    }
    Ok(out)
}
