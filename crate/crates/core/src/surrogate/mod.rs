//! Committees of small feed-forward networks trained by query-by-committee.
//!
//! One committee is trained per quantity of interest ([`Qoi`]): four
//! isolated-body outputs on inputs `[R, R/D]` and six two-body interaction
//! terms on `[R, R/D, l, θ]`. Each output vector has one entry per grid
//! frequency. A [`SurrogateBundle`] holds all ten and implements
//! [`crate::mbe::HydroSource`], so it can stand in for the oracle when
//! composing farms.

pub mod bundle;
pub mod committee;
pub mod kmeans;
pub mod net;
pub mod qbc;

pub use bundle::{SurrogateBundle, BUNDLE_VERSION};
pub use committee::{init_committee, Committee, CommitteeTrainOptions, Dataset, NetSpec, Prediction, Split};
pub use kmeans::kmeans;
pub use net::{Mlp, TrainOptions};
pub use qbc::{holdout_error, holdout_set, qbc_run, random_run, DesignSpace, HoldoutError, QbcConfig, QbcOutcome, Qoi};

use crate::error::Result;
use crate::mbe::HydroSource;

/// Runs QBC for every quantity of interest and collects the bundle.
/// `config` maps each quantity to its settings.
pub fn train_bundle(source: &dyn HydroSource, config: impl Fn(Qoi) -> QbcConfig) -> Result<(SurrogateBundle, Vec<QbcOutcome>)> {
    let mut outcomes = Vec::new();
    for q in Qoi::ONE_BODY.iter().chain(&Qoi::TWO_BODY) {
        outcomes.push(qbc_run(*q, source, &config(*q))?);
    }
    let committees = outcomes.iter().map(|o| o.committee.clone()).collect();
    let bundle = SurrogateBundle::new(source.grid().clone(), source.id(), committees)?;
    Ok((bundle, outcomes))
}
