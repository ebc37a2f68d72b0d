//! Simulation-based training of neural decision rules for traffic signal
//! green-time control.
//!
//! A decision rule maps recent loop-detector flows to per-phase green times:
//! a feedforward or recurrent network proposes raw splits, which are then
//! projected onto the feasible set of each junction's cycle. The network
//! weights are trained off-line by particle swarm optimization against
//! Monte-Carlo averages of a microscopic traffic and emission simulation.

pub mod decision_rule;
pub mod emissions;
mod error;
pub mod exec;
pub mod feasibility;
pub mod harness;
pub mod microsim;
pub mod network;
pub mod pso;

use std::io::Write;
use std::path::Path;

pub use error::{Error, Result};

/// Write `bytes` to a sibling temp file and rename it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
