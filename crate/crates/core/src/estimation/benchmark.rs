//! Cycle-benchmarking style total error from a random sample of eigenvalues.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimation::reconstruct::EigenvalueTable;
use crate::seed::derive_seed;

/// Total error `1 - F` with `F = (1 + (4^n - 1)·λ̄) / 4^n`.
pub fn total_error(n: usize, mean_lambda: f64) -> f64 {
    let d2 = 4f64.powi(n as i32);
    1.0 - (1.0 + (d2 - 1.0) * mean_lambda) / d2
}

/// Average of every non-identity table entry, as a total error.
pub fn table_total_error(table: &EigenvalueTable) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::InsufficientData("empty eigenvalue table".into()));
    }
    let mean = table.entries().values().sum::<f64>() / table.len() as f64;
    Ok(total_error(table.num_qubits(), mean))
}

/// Draw `draws` non-identity eigenvalues uniformly (with replacement), convert
/// their mean to a total error, repeat `resamples` times; returns the mean and
/// standard deviation over repetitions.
pub fn cycle_benchmark_fidelity(table: &EigenvalueTable, draws: usize, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if table.is_empty() || draws == 0 || resamples < 2 {
        return Err(Error::InsufficientData(
            "need a non-empty table, at least one draw and two resamples".into(),
        ));
    }
    let values: Vec<f64> = table.entries().values().copied().collect();
    let n = table.num_qubits();
    let errors: Vec<f64> = (0..resamples)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
            let mean = (0..draws).map(|_| values[rng.gen_range(0..values.len())]).sum::<f64>() / draws as f64;
            total_error(n, mean)
        })
        .collect();
    let est = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok((est, crate::design::std_dev(&errors)))
}
