use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid_prior::{GridSpec, PriorSpec, TruePrior};
use crate::scalar::ExactNumber;
use crate::valuation_outcome::{ModelSpec, OutcomeSpace, ValuationModel};

/// Outcome space of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    /// Every assignment of items to bidders or to nobody.
    MultiItem,
    /// At most one bidder receives the single item.
    SingleItem,
    /// Explicit allocation vectors `x in [0,1]^n`.
    SingleParameter { outcomes: Vec<Vec<ExactNumber>> },
}

fn default_model() -> ModelSpec {
    ModelSpec::Additive
}

/// One auction instance: grid, ground-truth prior, outcomes and valuations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub h: f64,
    pub prior: PriorSpec,
    pub space: SpaceSpec,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
}

/// A fully built instance.
#[derive(Clone, Debug)]
pub struct Instance {
    pub grid: GridSpec,
    pub truth: TruePrior,
    pub space: OutcomeSpace,
    pub model: ValuationModel,
}

impl InstanceConfig {
    pub fn build(&self) -> Result<Instance> {
        let grid = GridSpec::new(self.epsilon, self.h).map_err(|e| Error::config(e.to_string()))?;
        let truth = TruePrior::new(self.n, self.m, self.h, &self.prior)?;
        let items = match &self.model {
            ModelSpec::PairedComplements => 2 * self.m,
            _ => self.m,
        };
        let space = match &self.space {
            SpaceSpec::MultiItem => OutcomeSpace::multi_item(self.n, items)?,
            SpaceSpec::SingleItem => {
                if self.m != 1 {
                    return Err(Error::config("single_item spaces need m = 1"));
                }
                OutcomeSpace::single_item(self.n)?
            }
            SpaceSpec::SingleParameter { outcomes } => {
                if self.m != 1 {
                    return Err(Error::config("single_parameter spaces need m = 1"));
                }
                let rows = outcomes
                    .iter()
                    .map(|x| x.iter().map(ExactNumber::to_rational).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                OutcomeSpace::single_parameter(self.n, &rows)?
            }
        };
        let model = ValuationModel::from_spec(&self.model, &space, self.m)?;
        model.check_compatible(&space, self.m)?;
        Ok(Instance { grid, truth, space, model })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Bic,
    Dsic,
    SingleParameter,
}

impl SweepMode {
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Bic => "bic",
            SweepMode::Dsic => "dsic",
            SweepMode::SingleParameter => "single_parameter",
        }
    }
}

/// How learned mechanisms are scored on the true prior.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Evaluation {
    /// Exact expectation over a grid-supported true prior against the exact optimum.
    #[default]
    Exact,
    /// Seeded Monte-Carlo estimate; the benchmark is the optimum for the rounded prior.
    MonteCarlo { samples: usize },
}

/// Explicit seeds, or `count` consecutive seeds from `start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedList {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedList {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedList::List(v) => v.clone(),
            SeedList::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

/// A sample-complexity sweep over sample sizes and seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    pub mode: SweepMode,
    pub sample_sizes: Vec<usize>,
    pub seeds: SeedList,
    #[serde(default)]
    pub evaluation: Evaluation,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let instance = self.instance.build()?;
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::config("sample_sizes must be a nonempty list of positive counts"));
        }
        if self.seeds.seeds().is_empty() {
            return Err(Error::config("the seed list is empty"));
        }
        if self.mode == SweepMode::SingleParameter && self.instance.m != 1 {
            return Err(Error::config("single_parameter sweeps need m = 1"));
        }
        match self.evaluation {
            Evaluation::Exact if !instance.truth.is_grid_supported(&instance.grid) => Err(Error::config(
                "exact evaluation needs a true prior supported on the grid; use {\"method\": \"monte_carlo\", \"samples\": N}",
            )),
            Evaluation::MonteCarlo { samples: 0 } => Err(Error::config("monte_carlo evaluation needs samples >= 1")),
            _ => Ok(()),
        }
    }
}

/// Parses a JSON config file, mapping schema violations to config errors.
pub fn read_json_config<C: for<'de> Deserialize<'de>>(path: &Path) -> Result<C> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

/// Short stable digest of a serializable config.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

pub fn tool_version() -> String {
    format!("mechlearn {}", env!("CARGO_PKG_VERSION"))
}
