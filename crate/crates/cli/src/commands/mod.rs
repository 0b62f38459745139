pub mod analyze;
pub mod bench;
pub mod gen;
pub mod select;
pub mod sim;
pub mod sweep;

use std::path::Path;

use anyhow::{Context, Result};

use lmpc_core::model::{build_sparsity_pattern, LtiNetworkSystem, SparsityPattern};

use crate::args::Locality;

pub fn load_system(path: &Path) -> Result<LtiNetworkSystem> {
    let (sys, _) = lmpc_core::io::read_system(path).with_context(|| format!("reading system {}", path.display()))?;
    Ok(sys)
}

pub fn pattern_for(sys: &LtiNetworkSystem, locality: Locality, horizon: usize) -> Result<SparsityPattern> {
    Ok(match locality {
        Locality::Full => SparsityPattern::full(sys.n_x(), sys.n_u(), horizon),
        Locality::Hops(d) => build_sparsity_pattern(sys, d, horizon)?,
    })
}
