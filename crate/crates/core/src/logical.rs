//! Logical error rates of the Steane pair from a chain model of the cycle noise.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::cycle::{HardCycle, Orbit};
use crate::error::{Error, Result};
use crate::estimation::projection::project_simplex;
use crate::estimation::reconstruct::MarginalSet;
use crate::grf::{FactorGraph, JointErrorModel};
use crate::pauli::PauliOperator;
use crate::seed::derive_seed;
use crate::steane::{ErrorClass, SteaneCodePair};

pub const ENUMERATION_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitClass {
    pub orbit: Orbit,
    pub class: ErrorClass,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalRates {
    /// `1 - p(I)`.
    pub total_error: f64,
    pub correctable_rate: f64,
    pub uncorrectable_rate: f64,
    /// Probability not reached by the enumeration (threshold pruning).
    pub residual_mass: f64,
    pub configurations: usize,
    pub total_error_std: Option<f64>,
    pub uncorrectable_std: Option<f64>,
    /// Non-identity orbits in representative order.
    pub orbits: Vec<OrbitClass>,
    pub metadata: BTreeMap<String, String>,
}

/// Enumerate the model's support, group configurations by orbit and sum mass per class.
pub fn logical_rates(model: &JointErrorModel, code: &SteaneCodePair, h: &HardCycle, cap: usize) -> Result<LogicalRates> {
    let n = model.graph().num_qubits();
    if n != code.num_qubits() || h.num_qubits() != n {
        return Err(Error::Dimension {
            expected: code.num_qubits(),
            found: n,
        });
    }
    let mut mass: BTreeMap<PauliOperator, (Orbit, f64)> = BTreeMap::new();
    let mut failure = None;
    let configurations = model.enumerate(cap, |p, w| {
        if failure.is_some() {
            return;
        }
        match h.orbit(&p) {
            Ok(o) => mass.entry(*o.representative()).or_insert((o, 0.0)).1 += w,
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let enumerated: f64 = mass.values().map(|(_, w)| w).sum();
    let classes = mass
        .par_iter()
        .map(|(_, (o, _))| code.classify_orbit(h, o))
        .collect::<Result<Vec<_>>>()?;
    let (mut correctable, mut uncorrectable) = (0.0, 0.0);
    let mut orbits = Vec::new();
    for ((_, (orbit, w)), class) in mass.into_iter().zip(classes) {
        if orbit.is_identity() {
            continue;
        }
        match class {
            ErrorClass::Correctable => correctable += w,
            ErrorClass::Uncorrectable => uncorrectable += w,
        }
        orbits.push(OrbitClass {
            orbit,
            class,
            probability: w,
        });
    }
    let (p_identity, _) = model.joint_probability(&PauliOperator::identity(n))?;
    Ok(LogicalRates {
        total_error: 1.0 - p_identity,
        correctable_rate: correctable,
        uncorrectable_rate: uncorrectable,
        residual_mass: (1.0 - enumerated).max(0.0),
        configurations,
        total_error_std: None,
        uncorrectable_std: None,
        orbits,
        metadata: BTreeMap::new(),
    })
}

/// Point estimate from `set` plus a parametric bootstrap: each resample perturbs
/// every orbit probability by its standard error and projects the marginal back
/// onto the simplex.
#[allow(clippy::too_many_arguments)]
pub fn logical_rates_with_errors(
    graph: &FactorGraph,
    set: &MarginalSet,
    code: &SteaneCodePair,
    threshold: f64,
    cap: usize,
    resamples: usize,
    seed: u64,
) -> Result<LogicalRates> {
    let h = &set.cycle;
    let model = JointErrorModel::from_estimates(graph.clone(), set)?.with_threshold(threshold);
    let mut rates = logical_rates(&model, code, h, cap)?;
    if resamples == 0 {
        return Ok(rates);
    }
    if resamples < 2 {
        return Err(Error::InsufficientData("need at least two resamples".into()));
    }
    let draws = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
            let mut perturbed = set.clone();
            for est in &mut perturbed.estimates {
                let noisy: Vec<f64> = est
                    .orbits
                    .iter()
                    .map(|o| {
                        let se = o.std_error.unwrap_or(0.0);
                        let shift = if se > 0.0 {
                            Normal::new(0.0, se).expect("positive sd").sample(&mut rng)
                        } else {
                            0.0
                        };
                        o.probability + shift
                    })
                    .collect();
                for (o, p) in est.orbits.iter_mut().zip(project_simplex(&noisy)) {
                    o.probability = p;
                }
            }
            let model = JointErrorModel::from_estimates(graph.clone(), &perturbed)?.with_threshold(threshold);
            let r = logical_rates(&model, code, h, cap)?;
            Ok((r.total_error, r.uncorrectable_rate))
        })
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let uncorrectable: Vec<f64> = draws.iter().map(|d| d.1).collect();
    rates.total_error_std = Some(crate::design::std_dev(&totals));
    rates.uncorrectable_std = Some(crate::design::std_dev(&uncorrectable));
    Ok(rates)
}

impl fmt::Display for LogicalRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.metadata {
            writeln!(f, "# {k}: {v}")?;
        }
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |s| s.to_string());
        writeln!(f, "total_error {}", self.total_error)?;
        writeln!(f, "total_error_std {}", opt(self.total_error_std))?;
        writeln!(f, "correctable_rate {}", self.correctable_rate)?;
        writeln!(f, "uncorrectable_rate {}", self.uncorrectable_rate)?;
        writeln!(f, "uncorrectable_std {}", opt(self.uncorrectable_std))?;
        writeln!(f, "residual_mass {}", self.residual_mass)?;
        writeln!(f, "configurations {}", self.configurations)?;
        for o in &self.orbits {
            writeln!(f, "orbit {} {} {}", o.orbit.representative(), o.class, o.probability)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PauliChannel;
    use crate::grf::build_transversal_graph;
    use crate::noise::{NoiseModel, ProductChannel};
    use crate::pauli::{Letter, QubitSubset};

    fn rates(noise: NoiseModel) -> LogicalRates {
        let g = build_transversal_graph(7).unwrap();
        let model = JointErrorModel::from_noise(g, &noise).unwrap();
        logical_rates(&model, &SteaneCodePair::new(), &HardCycle::transversal7(), ENUMERATION_CAP).unwrap()
    }

    #[test]
    fn identity_model() {
        let r = rates(PauliChannel::identity(16).into());
        assert_eq!(r.total_error, 0.0);
        assert_eq!(r.uncorrectable_rate, 0.0);
        assert!(r.orbits.is_empty());
    }

    #[test]
    fn cross_block_pairs_are_correctable() {
        let e = PauliOperator::from_sparse(16, &[(0, Letter::X), (10, Letter::Z)]).unwrap();
        let c = PauliChannel::new(16, [(PauliOperator::identity(16), 0.9), (e, 0.1)]).unwrap();
        let r = rates(c.into());
        assert!((r.total_error - 0.1).abs() < 1e-15);
        assert_eq!(r.uncorrectable_rate, 0.0);
        assert!((r.correctable_rate - 0.1).abs() < 1e-15);
    }

    #[test]
    fn same_block_pair_is_uncorrectable() {
        let e = PauliOperator::from_sparse(16, &[(0, Letter::X), (1, Letter::X)]).unwrap();
        let c = PauliChannel::new(16, [(PauliOperator::identity(16), 0.95), (e, 0.05)]).unwrap();
        let r = rates(c.into());
        assert!((r.uncorrectable_rate - 0.05).abs() < 1e-15);
    }

    #[test]
    fn independent_pairs_match_decoder_enumeration() {
        // X on each control, orbit {X_i, X_i X_{i+9}}
        let q = 0.02;
        let g = build_transversal_graph(7).unwrap();
        let factors = g
            .pairs()
            .into_iter()
            .map(|p| {
                let c = PauliChannel::new(2, [("II".parse().unwrap(), 1.0 - q), ("XI".parse().unwrap(), q)]).unwrap();
                (p.clone(), c)
            })
            .collect::<Vec<(QubitSubset, PauliChannel)>>();
        let r = rates(ProductChannel::new(16, factors).unwrap().into());
        let code = SteaneCodePair::new();
        let h = HardCycle::transversal7();
        let (mut good, mut bad) = (0.0, 0.0);
        for bits in 1u64..128 {
            let w = q.powi(bits.count_ones() as i32) * (1.0 - q).powi(7 - bits.count_ones() as i32);
            let e = PauliOperator::from_masks(16, bits, 0).unwrap();
            let worst = [e, h.conjugate(&e).unwrap()]
                .iter()
                .map(|m| code.decoder_oracle(m).unwrap())
                .max()
                .unwrap();
            match worst {
                ErrorClass::Correctable => good += w,
                ErrorClass::Uncorrectable => bad += w,
            }
        }
        assert!((r.total_error - (1.0 - (1.0 - q).powi(7))).abs() < 1e-12);
        assert!((r.correctable_rate - good).abs() < 1e-12);
        assert!((r.uncorrectable_rate - bad).abs() < 1e-12);
        assert!(good > 7.0 * q * (1.0 - q).powi(6));
        assert_eq!(r.configurations, 128);
    }
}
