//! One module per experiment; each returns a bundle that the caller writes.

mod g2;
mod propagator_scan;
mod robustness;
mod trajectory;
mod wavefunction;

use crate::config::{Experiment, Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{Provenance, ResultBundle};

/// A finished run. `partial` is set when the bundle is valid but too many
/// sub-results failed.
#[derive(Debug)]
pub struct RunOutput {
    pub bundle: ResultBundle,
    pub partial: Option<String>,
}

impl From<ResultBundle> for RunOutput {
    fn from(bundle: ResultBundle) -> Self {
        Self {
            bundle,
            partial: None,
        }
    }
}

pub fn run(
    cfg: &RunConfig,
    resolved: &Resolved,
    provenance: Provenance,
) -> Result<RunOutput, CliError> {
    let bundle = ResultBundle::new(provenance);
    match cfg.experiment {
        Experiment::PropagatorScan => propagator_scan::run(cfg, resolved, bundle).map(Into::into),
        Experiment::Trajectory => trajectory::run(cfg, resolved, bundle),
        Experiment::Robustness => robustness::run(cfg, resolved, bundle).map(Into::into),
        Experiment::G2 => g2::run(cfg, bundle).map(Into::into),
        Experiment::Wavefunction => wavefunction::run(cfg, resolved, bundle).map(Into::into),
    }
}
