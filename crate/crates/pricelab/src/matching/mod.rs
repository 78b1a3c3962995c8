//! Canonical product resolution over time.
//!
//! Raw observations are deduplicated into observation keys (barcode,
//! provider code, normalized description text) and consolidated in two
//! steps:
//!
//! 1. identifier matching — keys sharing a barcode are one product, as are
//!    keys sharing a provider code whose barcodes are both present but
//!    differ (the relaunch signature);
//! 2. name matching with blocking — keys still unmatched are compared, per
//!    block, against every key agreeing on provider, outlet, percent, UHT
//!    flag and canonicalized weight/volume; the best Jaro-Winkler score at
//!    or above the acceptance threshold links the key into the candidate's
//!    group.
//!
//! Step 2 links are decided independently per key (best candidate by score,
//! ties broken by smallest candidate key) and then merged, so the final
//! grouping does not depend on input order. Canonical product ids are
//! content hashes of each group's smallest member key, which keeps them
//! stable under permutation and across runs.
//!
//! Provenance records how a key entered its group: `identifier` for step-1
//! links, `blocked-name` (with the accepted score) for keys that linked
//! themselves in step 2, and `fresh` for keys that founded a new product —
//! including keys that were only joined *by* others.

pub mod similarity;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{normalize_description, NormalizedDescription, TransactionRecord};
pub use similarity::{jaro_similarity, winkler_score};

/// Canonical product identifier ("C" + 16 hex digits).
pub type ProductId = String;

/// Identity of one raw observation as the match table sees it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObsKey {
    pub ean: Option<String>,
    pub provider_id: Option<String>,
    /// Normalized token text of the description.
    pub description: String,
}

impl ObsKey {
    pub fn of(record: &TransactionRecord) -> ObsKey {
        ObsKey {
            ean: record.ean.clone(),
            provider_id: record.provider_id.clone(),
            description: normalize_description(&record.description).token_text(),
        }
    }
}

/// One observation entering the matcher.
#[derive(Debug, Clone)]
pub struct Observation {
    pub ean: Option<String>,
    pub provider_id: Option<String>,
    pub description: NormalizedDescription,
    pub outlet_id: String,
}

impl Observation {
    pub fn of(record: &TransactionRecord) -> Observation {
        Observation {
            ean: record.ean.clone(),
            provider_id: record.provider_id.clone(),
            description: normalize_description(&record.description),
            outlet_id: record.outlet_id.clone(),
        }
    }

    fn key(&self) -> ObsKey {
        ObsKey {
            ean: self.ean.clone(),
            provider_id: self.provider_id.clone(),
            description: self.description.token_text(),
        }
    }
}

/// Attributes that must agree exactly before two names are compared.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockKey {
    pub provider_id: Option<String>,
    pub outlet_id: String,
    pub percent: Option<Decimal>,
    pub uht: bool,
    /// Weight in milligrams, canonicalized across unit notations.
    pub weight_mg: Option<Decimal>,
    /// Volume in millilitres, canonicalized across unit notations.
    pub volume_ml: Option<Decimal>,
}

impl BlockKey {
    fn of(
        provider_id: &Option<String>,
        outlet_id: &str,
        d: &NormalizedDescription,
        limited: bool,
    ) -> BlockKey {
        BlockKey {
            provider_id: provider_id.clone(),
            outlet_id: outlet_id.to_string(),
            percent: d.percent.map(|p| p.normalize()),
            uht: d.uht,
            weight_mg: if limited { None } else { d.weight.as_ref().map(|m| m.canonical_milli()) },
            volume_ml: if limited { None } else { d.volume.as_ref().map(|m| m.canonical_milli()) },
        }
    }
}

/// How an observation key received its canonical id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Linked by barcode or provider code in step 1.
    Identifier,
    /// Linked by name similarity inside a block in step 2.
    BlockedName,
    /// Founded its own canonical product.
    Fresh,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Identifier => "identifier",
            Provenance::BlockedName => "blocked-name",
            Provenance::Fresh => "fresh",
        })
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identifier" => Ok(Provenance::Identifier),
            "blocked-name" => Ok(Provenance::BlockedName),
            "fresh" => Ok(Provenance::Fresh),
            other => Err(Error::MatchTableImport(format!("unknown provenance {other:?}"))),
        }
    }
}

/// One accepted assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub canonical_id: ProductId,
    pub provenance: Provenance,
    /// Winkler score of the accepted link, for blocked-name assignments.
    pub score: Option<f64>,
}

/// The observation-key → canonical-product mapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchTable {
    assignments: BTreeMap<ObsKey, Assignment>,
}

impl MatchTable {
    pub fn lookup(&self, key: &ObsKey) -> Option<&ProductId> {
        self.assignments.get(key).map(|a| &a.canonical_id)
    }

    pub fn assignment(&self, key: &ObsKey) -> Option<&Assignment> {
        self.assignments.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObsKey, &Assignment)> {
        self.assignments.iter()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Number of distinct canonical products.
    pub fn product_count(&self) -> usize {
        self.assignments
            .values()
            .map(|a| a.canonical_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    }

    /// Write the table as CSV (ean, provider_id, description, canonical_id,
    /// provenance, score) so corrections can be round-tripped.
    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "ean",
            "provider_id",
            "description",
            "canonical_id",
            "provenance",
            "score",
        ])?;
        for (key, a) in &self.assignments {
            w.write_record([
                key.ean.as_deref().unwrap_or(""),
                key.provider_id.as_deref().unwrap_or(""),
                &key.description,
                &a.canonical_id,
                &a.provenance.to_string(),
                &a.score.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Read a table previously written by [`MatchTable::to_csv`] (possibly
    /// hand-corrected).
    pub fn from_csv<R: Read>(input: R) -> Result<MatchTable> {
        let mut reader = csv::Reader::from_reader(input);
        let mut assignments = BTreeMap::new();
        for entry in reader.records() {
            let row = entry?;
            if row.len() < 5 {
                return Err(Error::MatchTableImport(format!(
                    "row has {} fields, need 6",
                    row.len()
                )));
            }
            let get = |i: usize| row.get(i).unwrap_or("").trim().to_string();
            let key = ObsKey {
                ean: Some(get(0)).filter(|s| !s.is_empty()),
                provider_id: Some(get(1)).filter(|s| !s.is_empty()),
                description: get(2),
            };
            let canonical_id = get(3);
            if canonical_id.is_empty() {
                return Err(Error::MatchTableImport("empty canonical_id".to_string()));
            }
            let provenance: Provenance = get(4).parse()?;
            let score_text = get(5);
            let score =
                if score_text.is_empty() {
                    None
                } else {
                    Some(score_text.parse::<f64>().map_err(|_| {
                        Error::MatchTableImport(format!("bad score {score_text:?}"))
                    })?)
                };
            if assignments
                .insert(key.clone(), Assignment { canonical_id, provenance, score })
                .is_some()
            {
                return Err(Error::MatchTableImport(format!("duplicate key {key:?}")));
            }
        }
        Ok(MatchTable { assignments })
    }
}

/// Matching options beyond the acceptance threshold.
#[derive(Debug, Clone, Copy)]
pub struct MatchOptions {
    /// Minimum Winkler score accepted in step 2.
    pub threshold: f64,
    /// Drop weight/volume from the block key, letting relaunches with
    /// changed packaging sizes compare. Off by default.
    pub limited_blocking: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { threshold: 0.90, limited_blocking: false }
    }
}

/// Winkler parameters used for name comparison.
const PREFIX_SCALE: f64 = 0.1;
const MAX_PREFIX: usize = 4;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Union keeping the smaller index as root, so representatives are
    /// deterministic.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (keep, absorb) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[absorb] = keep;
    }
}

fn canonical_id(key: &ObsKey) -> ProductId {
    let mut hasher = Sha256::new();
    hasher.update(key.ean.as_deref().unwrap_or(""));
    hasher.update([0x1f]);
    hasher.update(key.provider_id.as_deref().unwrap_or(""));
    hasher.update([0x1f]);
    hasher.update(&key.description);
    let digest = hasher.finalize();
    let mut id = String::with_capacity(17);
    id.push('C');
    for byte in &digest[..8] {
        id.push_str(&format!("{byte:02x}"));
    }
    id
}

pub fn match_products<I>(observations: I, threshold: f64) -> MatchTable
where
    I: IntoIterator<Item = Observation>,
{
    match_products_with(observations, MatchOptions { threshold, ..MatchOptions::default() })
}

pub fn match_products_with<I>(observations: I, options: MatchOptions) -> MatchTable
where
    I: IntoIterator<Item = Observation>,
{
    // Deduplicate into units; a unit may appear at several outlets. The
    // representative description is the smallest observed, making the unit
    // list independent of input order.
    struct Unit {
        key: ObsKey,
        desc: NormalizedDescription,
        outlets: Vec<String>,
    }
    let mut by_key: BTreeMap<ObsKey, (NormalizedDescription, std::collections::BTreeSet<String>)> =
        BTreeMap::new();
    for obs in observations {
        let key = obs.key();
        let entry = by_key
            .entry(key)
            .or_insert_with(|| (obs.description.clone(), std::collections::BTreeSet::new()));
        if obs.description < entry.0 {
            entry.0 = obs.description.clone();
        }
        entry.1.insert(obs.outlet_id);
    }
    let units: Vec<Unit> = by_key
        .into_iter()
        .map(|(key, (desc, outlets))| Unit { key, desc, outlets: outlets.into_iter().collect() })
        .collect();
    let n = units.len();
    let mut groups = UnionFind::new(n);

    // Step 1: link on identifiers. Same barcode is one product. Within a
    // provider code, every barcode-bearing unit links: equal barcodes link
    // anyway, and differing ones are the relaunch case.
    let mut by_ean: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_provider: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, unit) in units.iter().enumerate() {
        if let Some(ean) = unit.key.ean.as_deref() {
            if let Some(&first) = by_ean.get(ean) {
                groups.union(first, i);
            } else {
                by_ean.insert(ean, i);
            }
            if let Some(provider) = unit.key.provider_id.as_deref() {
                if let Some(&first) = by_provider.get(provider) {
                    groups.union(first, i);
                } else {
                    by_provider.insert(provider, i);
                }
            }
        }
    }

    let mut linked_step1 = vec![false; n];
    {
        let mut size: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..n {
            *size.entry(groups.find(i)).or_insert(0) += 1;
        }
        for i in 0..n {
            linked_step1[i] = size[&groups.find(i)] > 1;
        }
    }

    // Step 2: for each still-unmatched unit, score every unit sharing one of
    // its blocks and keep the best accepted candidate. Decisions depend only
    // on the immutable unit list, so they are computed in parallel and the
    // resulting links merged afterwards.
    let mut blocks: BTreeMap<BlockKey, Vec<usize>> = BTreeMap::new();
    for (i, unit) in units.iter().enumerate() {
        for outlet in &unit.outlets {
            blocks
                .entry(BlockKey::of(
                    &unit.key.provider_id,
                    outlet,
                    &unit.desc,
                    options.limited_blocking,
                ))
                .or_default()
                .push(i);
        }
    }

    let singletons: Vec<usize> = (0..n).filter(|&i| !linked_step1[i]).collect();
    let links: Vec<(usize, usize, f64)> = singletons
        .par_iter()
        .filter_map(|&i| {
            let unit = &units[i];
            let mut candidates: Vec<usize> = unit
                .outlets
                .iter()
                .flat_map(|outlet| {
                    blocks[&BlockKey::of(
                        &unit.key.provider_id,
                        outlet,
                        &unit.desc,
                        options.limited_blocking,
                    )]
                        .iter()
                        .copied()
                })
                .filter(|&c| c != i)
                .collect();
            candidates.sort_unstable();
            candidates.dedup();

            let text = unit.desc.token_text();
            let mut best: Option<(f64, usize)> = None;
            for c in candidates {
                let score =
                    winkler_score(&text, &units[c].desc.token_text(), PREFIX_SCALE, MAX_PREFIX)
                        .expect("fixed scaling factor is in range");
                let better = match best {
                    None => true,
                    Some((s, b)) => score > s || (score == s && units[c].key < units[b].key),
                };
                if better {
                    best = Some((score, c));
                }
            }
            match best {
                Some((score, c)) if score >= options.threshold => Some((i, c, score)),
                _ => None,
            }
        })
        .collect();

    let mut step2_score: BTreeMap<usize, f64> = BTreeMap::new();
    for &(i, c, score) in &links {
        groups.union(i, c);
        step2_score.insert(i, score);
    }

    // Canonical ids from each group's smallest member key.
    let mut group_min: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        let root = groups.find(i);
        let entry = group_min.entry(root).or_insert(i);
        if units[i].key < units[*entry].key {
            *entry = i;
        }
    }

    let mut assignments = BTreeMap::new();
    for (i, unit) in units.iter().enumerate() {
        let root = groups.find(i);
        let id = canonical_id(&units[group_min[&root]].key);
        let (provenance, score) = if linked_step1[i] {
            (Provenance::Identifier, None)
        } else if let Some(&score) = step2_score.get(&i) {
            (Provenance::BlockedName, Some(score))
        } else {
            (Provenance::Fresh, None)
        };
        assignments.insert(unit.key.clone(), Assignment { canonical_id: id, provenance, score });
    }
    MatchTable { assignments }
}
