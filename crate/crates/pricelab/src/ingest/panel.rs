//! Monthly unit-value panel.
//!
//! Transactions are netted per (canonical product, outlet, month) with exact
//! decimal arithmetic, so construction is permutation-invariant down to the
//! bit. Index computation consumes [`ScopePanel`] views, which pool a cell
//! selection (one outlet or all, one subgroup or all) into per-(product,
//! month) unit values and convert to binary floating point once.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::error::{Error, Result};
use crate::ingest::{normalize_description, NormalizedDescription, TransactionRecord};
use crate::matching::{MatchTable, ObsKey, ProductId};
use crate::month::Month;

/// Netted cell: summed quantity and turnover for one (product, outlet, month).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub quantity: Decimal,
    pub expenditure: Decimal,
}

impl Cell {
    /// Unit value: turnover divided by quantity.
    pub fn price(&self) -> Decimal {
        self.expenditure / self.quantity
    }
}

/// The full monthly panel over canonical products, outlets and months.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProductPanel {
    pub products: BTreeSet<ProductId>,
    pub outlets: BTreeSet<String>,
    /// Ordered months with at least one cell.
    pub months: Vec<Month>,
    pub cells: BTreeMap<(ProductId, String, Month), Cell>,
    /// Representative normalized description per product (from its
    /// lexicographically smallest observation key).
    pub attributes: BTreeMap<ProductId, NormalizedDescription>,
    /// Subgroup label per product, where any record carried one.
    pub subgroups: BTreeMap<ProductId, String>,
}

impl ProductPanel {
    pub fn first_month(&self) -> Option<Month> {
        self.months.first().copied()
    }

    pub fn last_month(&self) -> Option<Month> {
        self.months.last().copied()
    }

    /// Subgroup labels present in the panel, sorted.
    pub fn subgroup_labels(&self) -> Vec<String> {
        self.subgroups.values().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Pool cells into a per-(product, month) view. `outlet` and `subgroup`
    /// restrict the selection; `None` pools everything.
    pub fn scope(&self, outlet: Option<&str>, subgroup: Option<&str>) -> ScopePanel {
        let mut sums: BTreeMap<(ProductId, Month), (Decimal, Decimal)> = BTreeMap::new();
        for ((product, cell_outlet, month), cell) in &self.cells {
            if let Some(o) = outlet {
                if cell_outlet != o {
                    continue;
                }
            }
            if let Some(s) = subgroup {
                if self.subgroups.get(product).map(String::as_str) != Some(s) {
                    continue;
                }
            }
            let entry =
                sums.entry((product.clone(), *month)).or_insert((Decimal::ZERO, Decimal::ZERO));
            entry.0 += cell.quantity;
            entry.1 += cell.expenditure;
        }

        let mut months = BTreeSet::new();
        let mut products = BTreeSet::new();
        let mut cells = BTreeMap::new();
        for ((product, month), (quantity, expenditure)) in sums {
            months.insert(month);
            products.insert(product.clone());
            let price = (expenditure / quantity).to_f64().unwrap_or(f64::NAN);
            cells.insert(
                (product, month),
                ScopeCell {
                    price,
                    quantity: quantity.to_f64().unwrap_or(f64::NAN),
                    expenditure: expenditure.to_f64().unwrap_or(f64::NAN),
                },
            );
        }
        ScopePanel {
            outlet: outlet.map(str::to_string),
            subgroup: subgroup.map(str::to_string),
            months: months.into_iter().collect(),
            products: products.into_iter().collect(),
            cells,
        }
    }
}

/// One pooled observation inside a [`ScopePanel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScopeCell {
    pub price: f64,
    pub quantity: f64,
    pub expenditure: f64,
}

/// Per-(product, month) view of a panel selection; the input to every index
/// formula. Products iterate in ascending canonical id order, which fixes
/// the accumulation order of all sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopePanel {
    pub outlet: Option<String>,
    pub subgroup: Option<String>,
    pub months: Vec<Month>,
    pub products: Vec<ProductId>,
    pub cells: BTreeMap<(ProductId, Month), ScopeCell>,
}

impl ScopePanel {
    pub fn cell(&self, product: &ProductId, month: Month) -> Option<&ScopeCell> {
        self.cells.get(&(product.clone(), month))
    }

    pub fn has_month(&self, month: Month) -> bool {
        self.months.binary_search(&month).is_ok()
    }

    /// Products observed in the given month, ascending.
    pub fn present(&self, month: Month) -> Vec<ProductId> {
        self.products
            .iter()
            .filter(|p| self.cells.contains_key(&((*p).clone(), month)))
            .cloned()
            .collect()
    }

    /// Products observed in both months, ascending.
    pub fn matched_set(&self, a: Month, b: Month) -> Vec<ProductId> {
        self.products
            .iter()
            .filter(|p| {
                self.cells.contains_key(&((*p).clone(), a))
                    && self.cells.contains_key(&((*p).clone(), b))
            })
            .cloned()
            .collect()
    }
}

/// Outcome of panel construction.
#[derive(Debug)]
pub struct PanelBuild {
    pub panel: ProductPanel,
    /// Indices (into the input record slice) of records that did not resolve
    /// through the match table, with their observation keys.
    pub unmatched: Vec<(usize, ObsKey)>,
    /// Cells dropped because net quantity or net turnover was non-positive.
    pub excluded_cells: u64,
}

/// Aggregate records into the monthly panel, resolving each one to its
/// canonical product through `table`. Cells whose netted quantity or
/// turnover is non-positive (returns cancelling sales) are excluded and
/// counted.
pub fn build_panel(records: &[TransactionRecord], table: &MatchTable) -> Result<PanelBuild> {
    let mut sums: BTreeMap<(ProductId, String, Month), Cell> = BTreeMap::new();
    let mut smallest_key: BTreeMap<ProductId, ObsKey> = BTreeMap::new();
    let mut subgroups: BTreeMap<ProductId, String> = BTreeMap::new();
    let mut unmatched = Vec::new();

    for (idx, record) in records.iter().enumerate() {
        let key = ObsKey::of(record);
        let Some(product) = table.lookup(&key) else {
            unmatched.push((idx, key));
            continue;
        };
        let cell = sums
            .entry((product.clone(), record.outlet_id.clone(), record.month))
            .or_insert(Cell { quantity: Decimal::ZERO, expenditure: Decimal::ZERO });
        cell.quantity += record.quantity;
        cell.expenditure += record.turnover;

        smallest_key
            .entry(product.clone())
            .and_modify(|k| {
                if key < *k {
                    *k = key.clone();
                }
            })
            .or_insert_with(|| key.clone());
        if let Some(label) = &record.subgroup {
            subgroups
                .entry(product.clone())
                .and_modify(|s| {
                    if label < s {
                        *s = label.clone();
                    }
                })
                .or_insert_with(|| label.clone());
        }
    }

    let mut panel = ProductPanel::default();
    let mut excluded_cells = 0u64;
    let mut months = BTreeSet::new();
    for ((product, outlet, month), cell) in sums {
        if cell.quantity <= Decimal::ZERO || cell.expenditure <= Decimal::ZERO {
            excluded_cells += 1;
            continue;
        }
        months.insert(month);
        panel.products.insert(product.clone());
        panel.outlets.insert(outlet.clone());
        panel.cells.insert((product, outlet, month), cell);
    }
    panel.months = months.into_iter().collect();
    for (product, key) in smallest_key {
        if panel.products.contains(&product) {
            panel.attributes.insert(product.clone(), normalize_description(&key.description));
            if let Some(label) = subgroups.get(&product) {
                panel.subgroups.insert(product, label.clone());
            }
        }
    }

    if panel.cells.is_empty() {
        return Err(Error::EmptyPanel { rejected: unmatched.len() });
    }
    Ok(PanelBuild { panel, unmatched, excluded_cells })
}
