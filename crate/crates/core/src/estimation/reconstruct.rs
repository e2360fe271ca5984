//! Orbit marginals from orbital eigenvalues.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::channel::PauliChannel;
use crate::cycle::{HardCycle, Orbit};
use crate::error::{Error, Result};
use crate::estimation::fit::{fit_decay, DecayFit};
use crate::estimation::projection::project_physical;
use crate::noise::NoiseModel;
use crate::pauli::{PauliOperator, QubitSubset};
use crate::sim::DecayDataset;

/// Orbital eigenvalues keyed by the full-register orbit representative.
/// The identity orbit is implicit and always equals one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EigenvalueTable {
    n: usize,
    entries: BTreeMap<PauliOperator, f64>,
}

impl EigenvalueTable {
    pub fn new(n: usize) -> Self {
        EigenvalueTable {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, representative: PauliOperator, lambda: f64) -> Result<()> {
        if representative.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: representative.num_qubits(),
            });
        }
        if !representative.is_identity() {
            self.entries.insert(representative, lambda);
        }
        Ok(())
    }

    pub fn get(&self, representative: &PauliOperator) -> Option<f64> {
        if representative.is_identity() {
            return Some(1.0);
        }
        self.entries.get(representative).copied()
    }

    /// Non-identity entries.
    pub fn entries(&self) -> &BTreeMap<PauliOperator, f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact orbital eigenvalues of every orbit of the given subsets.
    pub fn from_noise(noise: &NoiseModel, h: &HardCycle, subsets: &[QubitSubset]) -> Result<Self> {
        let mut t = EigenvalueTable::new(h.num_qubits());
        for s in subsets {
            for o in h.enumerate_orbits(s)? {
                let full = o.embed(h, s)?;
                if !full.is_identity() && t.get(full.representative()).is_none() {
                    t.insert(*full.representative(), noise.orbital_eigenvalue(&full)?)?;
                }
            }
        }
        Ok(t)
    }
}

/// Fit every orbit of a dataset.
pub fn fit_dataset(data: &DecayDataset) -> Result<(EigenvalueTable, BTreeMap<PauliOperator, DecayFit>)> {
    let mut table = EigenvalueTable::new(data.num_qubits());
    let mut fits = BTreeMap::new();
    for (o, points) in data.all_fit_points() {
        let fit = fit_decay(&points).map_err(|e| match e {
            Error::Unfittable(m) => Error::Unfittable(format!("orbit {o}: {m}")),
            Error::InsufficientData(m) => Error::InsufficientData(format!("orbit {o}: {m}")),
            other => other,
        })?;
        table.insert(o, fit.lambda)?;
        fits.insert(o, fit);
    }
    Ok((table, fits))
}

/// Linear map from orbital eigenvalues to orbit marginals of one subset:
/// `μ(O_a) = |O_a|/4^k · Σ_{P∈ℙ_S} (-1)^{ω(rep_a, P)} λ_{orbit(P)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionMap {
    subset: QubitSubset,
    /// Orbits of the induced action, identity first.
    orbits: Vec<Orbit>,
    /// Full-register representatives in the same order.
    keys: Vec<PauliOperator>,
    w: DMatrix<f64>,
}

impl ReconstructionMap {
    pub fn new(h: &HardCycle, subset: &QubitSubset) -> Result<Self> {
        let orbits = h.enumerate_orbits(subset)?;
        let keys = orbits
            .iter()
            .map(|o| Ok(*o.embed(h, subset)?.representative()))
            .collect::<Result<Vec<_>>>()?;
        let k = subset.len();
        let scale = 1.0 / (1u64 << (2 * k)) as f64;
        let w = DMatrix::from_fn(orbits.len(), orbits.len(), |a, b| {
            let rep = orbits[a].representative();
            let s: f64 = orbits[b]
                .members()
                .iter()
                .map(|p| if rep.omega_unchecked(p) == 1 { -1.0 } else { 1.0 })
                .sum();
            orbits[a].len() as f64 * scale * s
        });
        Ok(ReconstructionMap {
            subset: subset.clone(),
            orbits,
            keys,
            w,
        })
    }

    pub fn subset(&self) -> &QubitSubset {
        &self.subset
    }

    pub fn orbits(&self) -> &[Orbit] {
        &self.orbits
    }

    pub fn keys(&self) -> &[PauliOperator] {
        &self.keys
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Eigenvalues in orbit order, looked up in `table`.
    pub fn lambdas(&self, table: &EigenvalueTable) -> Result<Vec<f64>> {
        self.keys
            .iter()
            .zip(&self.orbits)
            .map(|(k, o)| table.get(k).ok_or_else(|| Error::MissingOrbit(format!("{o} of subset {}", self.subset))))
            .collect()
    }

    pub fn apply(&self, lambdas: &[f64]) -> Vec<f64> {
        (&self.w * DVector::from_column_slice(lambdas)).iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitEstimate {
    /// Orbit of the action induced on the subset.
    pub orbit: Orbit,
    pub probability: f64,
    pub std_error: Option<f64>,
    /// Projection moved this marginal.
    pub projected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    pub subset: QubitSubset,
    pub orbits: Vec<OrbitEstimate>,
    /// Marginals before projection, in orbit order.
    pub raw: Vec<f64>,
    /// Projection changed the eigenvalues.
    pub projected: bool,
    /// Some input eigenvalue was negative.
    pub negative_input: bool,
}

impl MarginalEstimate {
    pub fn probability(&self, representative: &PauliOperator) -> Option<f64> {
        self.orbits
            .iter()
            .find(|o| o.orbit.representative() == representative)
            .map(|o| o.probability)
    }

    /// Pauli-level marginal with each orbit's mass split equally over its members.
    pub fn to_channel(&self) -> Result<PauliChannel> {
        let mut terms = Vec::new();
        for o in &self.orbits {
            let share = o.probability / o.orbit.len() as f64;
            for p in o.orbit.members() {
                terms.push((*p, share));
            }
        }
        PauliChannel::from_estimate(self.subset.len(), terms)
    }
}

/// Orbit marginals of `subset` from orbital eigenvalues, followed by physical projection.
pub fn reconstruct_marginal(subset: &QubitSubset, h: &HardCycle, fits: &EigenvalueTable) -> Result<MarginalEstimate> {
    let map = ReconstructionMap::new(h, subset)?;
    reconstruct_with_map(&map, fits)
}

pub fn reconstruct_with_map(map: &ReconstructionMap, fits: &EigenvalueTable) -> Result<MarginalEstimate> {
    let lambdas = map.lambdas(fits)?;
    let raw = map.apply(&lambdas);
    let proj = project_physical(&lambdas, map.matrix())?;
    let total: f64 = proj.mu.iter().map(|m| m.max(0.0)).sum();
    let orbits = map
        .orbits()
        .iter()
        .zip(&proj.mu)
        .zip(&raw)
        .map(|((o, &mu), &r)| OrbitEstimate {
            orbit: o.clone(),
            probability: mu.max(0.0) / total,
            std_error: None,
            projected: (mu - r).abs() > 1e-12,
        })
        .collect();
    Ok(MarginalEstimate {
        subset: map.subset().clone(),
        orbits,
        raw,
        projected: proj.changed,
        negative_input: lambdas.iter().any(|&l| l < 0.0),
    })
}

/// Marginal estimates of several subsets of one cycle, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    pub cycle: HardCycle,
    pub seed: Option<u64>,
    pub metadata: BTreeMap<String, String>,
    pub estimates: Vec<MarginalEstimate>,
}

impl MarginalSet {
    pub fn get(&self, subset: &QubitSubset) -> Option<&MarginalEstimate> {
        self.estimates.iter().find(|e| e.subset == *subset)
    }
}

impl fmt::Display for MarginalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = self.seed {
            writeln!(f, "# seed: {s}")?;
        }
        for (k, v) in &self.metadata {
            writeln!(f, "# {k}: {v}")?;
        }
        writeln!(f, "cycle {}", self.cycle)?;
        for e in &self.estimates {
            writeln!(f, "subset {}", e.subset)?;
            for o in &e.orbits {
                let se = o.std_error.map_or("-".to_string(), |s| s.to_string());
                writeln!(
                    f,
                    "orbit {} {} {} {}",
                    o.orbit.representative(),
                    o.probability,
                    se,
                    u8::from(o.projected)
                )?;
            }
        }
        Ok(())
    }
}

impl FromStr for MarginalSet {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cycle: Option<HardCycle> = None;
        let mut seed = None;
        let mut metadata = BTreeMap::new();
        let mut estimates: Vec<MarginalEstimate> = Vec::new();
        let mut local: Option<HardCycle> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |m: String| Error::parse(i + 1, m);
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once(':') {
                    let (k, v) = (k.trim(), v.trim());
                    if k == "seed" {
                        seed = Some(v.parse::<u64>().map_err(|_| err(format!("bad seed {v:?}")))?);
                    } else {
                        metadata.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match key {
                "cycle" => cycle = Some(rest.parse().map_err(|e: Error| err(e.to_string()))?),
                "subset" => {
                    let h = cycle.as_ref().ok_or_else(|| err("subset before cycle".into()))?;
                    let s: QubitSubset = rest.parse().map_err(|e: Error| err(e.to_string()))?;
                    local = Some(h.induced(&s).map_err(|e| err(e.to_string()))?);
                    estimates.push(MarginalEstimate {
                        subset: s,
                        orbits: Vec::new(),
                        raw: Vec::new(),
                        projected: false,
                        negative_input: false,
                    });
                }
                "orbit" => {
                    let (Some(h), Some(est)) = (local.as_ref(), estimates.last_mut()) else {
                        return Err(err("orbit before subset".into()));
                    };
                    let cols: Vec<&str> = rest.split_whitespace().collect();
                    let [rep, prob, se, flag] = cols.as_slice() else {
                        return Err(err("expected `orbit <rep> <prob> <se|-> <0|1>`".into()));
                    };
                    let rep: PauliOperator = rep.parse().map_err(|e: Error| err(e.to_string()))?;
                    let orbit = h.orbit(&rep).map_err(|e| err(e.to_string()))?;
                    if orbit.representative() != &rep {
                        return Err(err(format!("{rep} is not an orbit representative")));
                    }
                    let probability: f64 = prob.parse().map_err(|_| err(format!("bad probability {prob:?}")))?;
                    if !(0.0..=1.0 + 1e-9).contains(&probability) {
                        return Err(err(format!("probability {probability} outside [0, 1]")));
                    }
                    let std_error = match *se {
                        "-" => None,
                        s => Some(s.parse::<f64>().map_err(|_| err(format!("bad standard error {s:?}")))?),
                    };
                    let projected = match *flag {
                        "0" => false,
                        "1" => true,
                        other => return Err(err(format!("bad projection flag {other:?}"))),
                    };
                    est.projected |= projected;
                    est.raw.push(probability);
                    est.orbits.push(OrbitEstimate {
                        orbit,
                        probability,
                        std_error,
                        projected,
                    });
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let cycle = cycle.ok_or_else(|| Error::parse(0, "missing cycle"))?;
        for e in &estimates {
            let total: f64 = e.orbits.iter().map(|o| o.probability).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InconsistentMarginals(format!(
                    "marginal of subset {} sums to {total}",
                    e.subset
                )));
            }
        }
        Ok(MarginalSet {
            cycle,
            seed,
            metadata,
            estimates,
        })
    }
}
