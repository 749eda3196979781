//! The analyses the `run` subcommand can execute, one per tradeoff object.

mod cd_boundary;
mod crb_rate;
mod elmmse;
mod re_region;
mod zzb;

use isac_core::SeededRng;

use crate::config::Config;
use crate::output::Table;

pub use cd_boundary::CdBoundaryAnalysis;
pub use crb_rate::CrbRateAnalysis;
pub use elmmse::ElmmseAnalysis;
pub use re_region::ReRegionAnalysis;
pub use zzb::ZzbAnalysis;

#[derive(Debug, Default)]
pub struct StageOutput {
    pub tables: Vec<Table>,
    /// Human-readable notes on solves that hit their iteration caps.
    pub flagged: Vec<String>,
}

pub trait Analysis: Sync {
    /// Subcommand name.
    fn name(&self) -> &'static str;

    fn run(&self, cfg: &Config, rng: SeededRng) -> isac_core::Result<StageOutput>;
}

/// Every analysis in `run all` order.
pub fn registry() -> Vec<Box<dyn Analysis>> {
    vec![
        Box::new(ReRegionAnalysis),
        Box::new(CdBoundaryAnalysis),
        Box::new(CrbRateAnalysis),
        Box::new(ElmmseAnalysis),
        Box::new(ZzbAnalysis),
    ]
}

pub fn find(name: &str) -> Option<Box<dyn Analysis>> {
    registry().into_iter().find(|a| a.name() == name)
}

pub fn names() -> Vec<&'static str> {
    registry().iter().map(|a| a.name()).collect()
}
