//! Nonparametric bootstrap over randomizations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cycle::HardCycle;
use crate::error::{Error, Result};
use crate::estimation::reconstruct::{fit_dataset, reconstruct_with_map, MarginalEstimate, ReconstructionMap};
use crate::pauli::QubitSubset;
use crate::seed::derive_seed;
use crate::sim::DecayDataset;

pub const MIN_RESAMPLES: usize = 100;

/// Standard errors of the quantities returned by `pipeline`, from `resamples`
/// datasets that redraw randomizations with replacement inside every
/// `(orbit, m)` series.
pub fn bootstrap<F>(data: &DecayDataset, resamples: usize, seed: u64, pipeline: F) -> Result<Vec<f64>>
where
    F: Fn(&DecayDataset) -> Result<Vec<f64>> + Sync,
{
    if resamples < MIN_RESAMPLES {
        return Err(Error::InsufficientData(format!(
            "{resamples} resamples requested, at least {MIN_RESAMPLES} required"
        )));
    }
    if data.min_series_len() < 2 {
        return Err(Error::InsufficientData(
            "every series needs at least two randomizations".into(),
        ));
    }
    let draws = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b as u64]));
            pipeline(&data.resample(&mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = draws[0].len();
    if draws.iter().any(|d| d.len() != k) {
        return Err(Error::InsufficientData("pipeline output length varies between resamples".into()));
    }
    Ok((0..k)
        .map(|i| {
            let v: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            crate::design::std_dev(&v)
        })
        .collect())
}

/// Fit, reconstruct and project every subset, then attach bootstrap standard errors.
pub fn reconstruct_with_errors(
    data: &DecayDataset,
    h: &HardCycle,
    subsets: &[QubitSubset],
    resamples: usize,
    seed: u64,
) -> Result<Vec<MarginalEstimate>> {
    let maps = subsets
        .iter()
        .map(|s| ReconstructionMap::new(h, s))
        .collect::<Result<Vec<_>>>()?;
    let run = |d: &DecayDataset| -> Result<Vec<MarginalEstimate>> {
        let (table, _) = fit_dataset(d)?;
        maps.iter().map(|m| reconstruct_with_map(m, &table)).collect()
    };
    let mut estimates = run(data)?;
    if resamples == 0 {
        return Ok(estimates);
    }
    let se = bootstrap(data, resamples, seed, |d| {
        Ok(run(d)?
            .iter()
            .flat_map(|e| e.orbits.iter().map(|o| o.probability))
            .collect())
    })?;
    let mut it = se.into_iter();
    for e in &mut estimates {
        for o in &mut e.orbits {
            o.std_error = it.next();
        }
    }
    Ok(estimates)
}
