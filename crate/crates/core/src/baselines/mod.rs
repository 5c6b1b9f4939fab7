//! Classical comparators over the same encoded rows as the main model:
//! logistic regression and Gaussian naive Bayes.

mod lr;
mod nb;

pub use lr::{lr_predict, lr_train, LrConfig, LrModel, LR_KIND};
pub use nb::{nb_posterior, nb_predict, nb_train, NbModel, NB_KIND, VARIANCE_FLOOR};

use thiserror::Error;

use crate::container::ContainerError;
use crate::ffm::FfmRow;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training labels are all {0}; both classes are required")]
    SingleClass(u8),
    #[error("feature id {feature} out of range (max {n_features})")]
    IdOutOfRange { feature: u32, n_features: usize },
    #[error("row {index}: {error}")]
    Row {
        index: usize,
        error: Box<BaselineError>,
    },
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
}

fn check_ids(row: &FfmRow, n_features: usize) -> Result<(), BaselineError> {
    match row.entries.iter().find(|e| e.feature as usize > n_features) {
        Some(e) => Err(BaselineError::IdOutOfRange { feature: e.feature, n_features }),
        None => Ok(()),
    }
}

fn check_all(rows: &[FfmRow], n_features: usize) -> Result<(), BaselineError> {
    for (index, r) in rows.iter().enumerate() {
        check_ids(r, n_features).map_err(|e| BaselineError::Row { index, error: Box::new(e) })?;
    }
    Ok(())
}
