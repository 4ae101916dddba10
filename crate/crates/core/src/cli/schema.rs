//! On-disk scenario format. Powers are MW, reactances per-unit.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_base")]
    pub base_mva: f64,
    pub buses: Vec<BusEntry>,
    pub branches: Vec<BranchEntry>,
    pub slack: u32,
    pub market: MarketEntry,
    pub players: Vec<PlayerEntry>,
    pub algorithm: AlgorithmEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub team_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub faults: Vec<FaultEntry>,
}

fn default_base() -> f64 {
    100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKindEntry {
    Slack,
    Generator,
    Load,
    Microgrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusEntry {
    pub id: u32,
    pub kind: BusKindEntry,
    #[serde(default)]
    pub p_load_mw: f64,
    #[serde(default)]
    pub p_gen_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchEntry {
    pub from: u32,
    pub to: u32,
    pub x_pu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostUnitsEntry {
    #[default]
    PerUnit,
    Mw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketEntry {
    pub zeta: f64,
    #[serde(default)]
    pub cost_units: CostUnitsEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerEntry {
    pub bus: u32,
    pub psi: f64,
    pub eta: f64,
    pub p_gen_max_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeEntry {
    Iua,
    Rua,
    Pda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    pub scheme: SchemeEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    pub delta_mw: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKindEntry {
    GeneratorOutage,
    MicrogridShutdown,
    LineTrip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    pub at_step: usize,
    pub kind: FaultKindEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bus: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<u32>,
}
