use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Grouping, IngestError, InteractionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<(), IngestError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(IngestError::Split(format!("negative or non-finite fraction in {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(IngestError::Split(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub train: Vec<InteractionRecord>,
    pub validation: Vec<InteractionRecord>,
    pub test: Vec<InteractionRecord>,
    pub grouping: Grouping,
}

/// Floor of `n * f`, tolerant to representation error (0.29 * 100 is 28.999...).
fn floor_share(n: usize, f: f64) -> usize {
    ((n as f64) * f + 1e-9).floor() as usize
}

/// Seeded shuffle, then contiguous train / validation / test slices.
/// Validation and test get `floor(n * f)`; train takes the rest.
pub fn split_dataset(
    records: Vec<InteractionRecord>,
    fractions: SplitFractions,
    seed: u64,
    grouping: Grouping,
) -> Result<DatasetBundle, IngestError> {
    fractions.validate()?;
    let mut records = records;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);
    let n = records.len();
    let n_val = floor_share(n, fractions.validation);
    let n_test = floor_share(n, fractions.test);
    let n_train = n - n_val - n_test;
    let test = records.split_off(n_train + n_val);
    let validation = records.split_off(n_train);
    Ok(DatasetBundle {
        train: records,
        validation,
        test,
        grouping,
    })
}
