use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_budget, Objective, OptimError, RunRecord};
use crate::latent::LatentSpec;

/// Independent uniform draws on `[0,1]^dim`.
pub fn random_search_u<O: Objective + ?Sized>(
    objective: &mut O,
    dim: usize,
    budget: usize,
    rng_seed: u64,
) -> Result<RunRecord, OptimError> {
    check_budget(budget)?;
    if dim == 0 {
        return Err(OptimError::InvalidConfig("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut record = RunRecord::new(rng_seed);
    for _ in 0..budget {
        let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        record.evaluate(objective, u);
    }
    Ok(record)
}

/// Independent draws from the latent distribution itself.
pub fn random_search_z<O: Objective + ?Sized>(
    objective: &mut O,
    spec: &LatentSpec,
    budget: usize,
    rng_seed: u64,
) -> Result<RunRecord, OptimError> {
    check_budget(budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut record = RunRecord::new(rng_seed);
    for _ in 0..budget {
        let z = spec.sample(&mut rng);
        record.evaluate(objective, z);
    }
    Ok(record)
}
