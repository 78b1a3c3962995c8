//! Synthetic transaction panels with known index behaviour.
//!
//! [`generate`] produces transaction records from a [`PanelRecipe`]: prices
//! follow a geometric random walk per product, quantities respond to price
//! through a configurable elasticity, and products leave the assortment
//! (churn) and may return under a fresh code (relaunch). Everything is driven
//! by one seeded stream, so a recipe always generates byte-identical output.
//!
//! Prices are exact two-decimal amounts and quantities integers, so turnover
//! equals price times quantity without rounding error; a recipe with zero
//! churn and zero volatility therefore yields a panel on which every index
//! is exactly 1.

pub mod oracle;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TransactionRecord;
use crate::month::Month;

fn default_start() -> Month {
    Month::new(2020, 1).expect("valid month")
}

fn default_subgroups() -> usize {
    3
}

/// Parameters of a synthetic panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecipe {
    pub n_products: usize,
    pub n_outlets: usize,
    pub n_months: usize,
    /// Subgroup labels are assigned round-robin over this many groups.
    #[serde(default = "default_subgroups")]
    pub n_subgroups: usize,
    /// First month of the panel.
    #[serde(default = "default_start")]
    pub start_month: Month,
    /// Monthly probability that a product leaves the assortment.
    pub churn: f64,
    /// Monthly probability that a departed product returns under a new code.
    pub relaunch: f64,
    /// Standard deviation of the monthly log-price step.
    pub volatility: f64,
    /// Exponent linking quantity to the price level: quantity scales with
    /// (price / launch price)^elasticity, so a negative value makes price
    /// and quantity move in opposite directions.
    pub elasticity: f64,
    pub seed: u64,
}

impl PanelRecipe {
    /// Recipe with no churn and no price movement: every month repeats the
    /// first one exactly.
    pub fn constant(n_products: usize, n_outlets: usize, n_months: usize, seed: u64) -> Self {
        PanelRecipe {
            n_products,
            n_outlets,
            n_months,
            n_subgroups: default_subgroups(),
            start_month: default_start(),
            churn: 0.0,
            relaunch: 0.0,
            volatility: 0.0,
            elasticity: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_products == 0 || self.n_outlets == 0 || self.n_months == 0 {
            return Err(Error::Parameter("panel dimensions must be positive".into()));
        }
        if self.n_subgroups == 0 {
            return Err(Error::Parameter("n_subgroups must be positive".into()));
        }
        for (name, p) in [("churn", self.churn), ("relaunch", self.relaunch)] {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("{name} must be a probability, got {p}")));
            }
        }
        if !self.volatility.is_finite() || self.volatility < 0.0 {
            return Err(Error::Parameter(format!(
                "volatility must be non-negative, got {}",
                self.volatility
            )));
        }
        if !self.elasticity.is_finite() {
            return Err(Error::Parameter("elasticity must be finite".into()));
        }
        Ok(())
    }
}

/// One product generation currently on sale.
struct Instance {
    generation: u32,
    ean: String,
    provider_id: String,
    description: String,
    subgroup: String,
    /// Launch price in cents; the walk multiplies it.
    base_cents: i64,
    /// Cumulative log-price step since launch.
    log_mult: f64,
    /// Month index at which this generation appeared.
    launched_at: usize,
    /// Base demand per outlet.
    demands: Vec<u32>,
}

impl Instance {
    fn launch(
        family: u32,
        generation: u32,
        launched_at: usize,
        next_code: &mut u32,
        recipe: &PanelRecipe,
        rng: &mut ChaCha8Rng,
    ) -> Instance {
        let code = *next_code;
        *next_code += 1;
        let mut description = format!("Item {family:05}");
        let mut provider_id = format!("P{family:05}");
        if generation > 1 {
            description.push_str(&format!(" MK{generation}"));
            provider_id.push_str(&format!("R{generation}"));
        }
        let base_cents = rng.random_range(100..=2000);
        let demands = (0..recipe.n_outlets).map(|_| rng.random_range(20..=200)).collect();
        Instance {
            generation,
            ean: format!("{:08}", 20_000_000 + code),
            provider_id,
            description,
            subgroup: format!("g{}", family as usize % recipe.n_subgroups + 1),
            base_cents,
            log_mult: 0.0,
            launched_at,
            demands,
        }
    }

    fn cents(&self) -> i64 {
        ((self.base_cents as f64) * self.log_mult.exp()).round().max(1.0) as i64
    }
}

/// Generate the transaction records of a synthetic panel, ordered by month,
/// then product, then outlet. Output is a pure function of the recipe.
pub fn generate(recipe: &PanelRecipe) -> Result<Vec<TransactionRecord>> {
    recipe.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let step = if recipe.volatility > 0.0 {
        Some(Normal::new(0.0, recipe.volatility).expect("validated"))
    } else {
        None
    };

    let mut next_code = 0u32;
    let mut alive: BTreeMap<u32, Instance> = (0..recipe.n_products as u32)
        .map(|family| (family, Instance::launch(family, 1, 0, &mut next_code, recipe, &mut rng)))
        .collect();
    // Families currently off sale, with the generation that last died.
    let mut off_sale: BTreeMap<u32, u32> = BTreeMap::new();

    let mut records = Vec::new();
    let mut month = recipe.start_month;
    for t in 0..recipe.n_months {
        if t > 0 {
            let died: Vec<u32> =
                alive.keys().copied().filter(|_| rng.random::<f64>() < recipe.churn).collect();
            // Products already off sale may relaunch; this month's deaths
            // become eligible next month.
            let eligible: Vec<(u32, u32)> = off_sale.iter().map(|(f, g)| (*f, *g)).collect();
            for (family, generation) in eligible {
                if rng.random::<f64>() < recipe.relaunch {
                    off_sale.remove(&family);
                    let inst = Instance::launch(
                        family,
                        generation + 1,
                        t,
                        &mut next_code,
                        recipe,
                        &mut rng,
                    );
                    alive.insert(family, inst);
                }
            }
            for family in died {
                let inst = alive.remove(&family).expect("died while alive");
                off_sale.insert(family, inst.generation);
            }
            if let Some(step) = step {
                for inst in alive.values_mut() {
                    // Relaunches of this month stay at their launch price.
                    if inst.launched_at < t {
                        inst.log_mult += step.sample(&mut rng);
                    }
                }
            }
        }

        for inst in alive.values() {
            let cents = inst.cents();
            let price = Decimal::new(cents, 2);
            let ratio = cents as f64 / inst.base_cents as f64;
            let demand_scale = ratio.powf(recipe.elasticity);
            for (o, base_q) in inst.demands.iter().enumerate() {
                let qty = ((*base_q as f64) * demand_scale).round().max(1.0) as i64;
                let quantity = Decimal::from(qty);
                records.push(TransactionRecord {
                    outlet_id: format!("o{:02}", o + 1),
                    month,
                    ean: Some(inst.ean.clone()),
                    provider_id: Some(inst.provider_id.clone()),
                    description: inst.description.clone(),
                    quantity,
                    turnover: price * quantity,
                    subgroup: Some(inst.subgroup.clone()),
                });
            }
        }
        month = month.next();
    }
    Ok(records)
}

/// Write records as a transaction CSV (with header) that [`crate::ingest`]
/// parses back unchanged.
pub fn write_transactions<W: std::io::Write>(records: &[TransactionRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}
