//! Noise models usable as ground truth: a single sparse channel or independent
//! channels on disjoint qubit groups, which never expands the product.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use std::fmt;
use std::str::FromStr;

use crate::channel::PauliChannel;
use crate::cycle::{HardCycle, Orbit};
use crate::error::{Error, Result};
use crate::pauli::{PauliOperator, QubitSubset};

/// Independent Pauli channels on disjoint subsets of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductChannel {
    n: usize,
    factors: Vec<(QubitSubset, PauliChannel)>,
}

impl ProductChannel {
    pub fn new(n: usize, factors: Vec<(QubitSubset, PauliChannel)>) -> Result<Self> {
        let mut used = 0u64;
        for (s, c) in &factors {
            s.validate(n)?;
            if c.num_qubits() != s.len() {
                return Err(Error::Dimension {
                    expected: s.len(),
                    found: c.num_qubits(),
                });
            }
            if used & s.mask() != 0 {
                return Err(Error::InvalidSubset(format!("factor subsets overlap at {s}")));
            }
            used |= s.mask();
        }
        Ok(ProductChannel { n, factors })
    }

    pub fn factors(&self) -> &[(QubitSubset, PauliChannel)] {
        &self.factors
    }

    /// Expand into one sparse channel; the term count is the product of factor supports.
    pub fn to_channel(&self) -> Result<PauliChannel> {
        PauliChannel::product(self.n, &self.factors)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Channel(PauliChannel),
    Product(ProductChannel),
}

impl From<PauliChannel> for NoiseModel {
    fn from(c: PauliChannel) -> Self {
        NoiseModel::Channel(c)
    }
}

impl From<ProductChannel> for NoiseModel {
    fn from(c: ProductChannel) -> Self {
        NoiseModel::Product(c)
    }
}

impl NoiseModel {
    pub fn identity(n: usize) -> Self {
        NoiseModel::Channel(PauliChannel::identity(n))
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            NoiseModel::Channel(c) => c.num_qubits(),
            NoiseModel::Product(p) => p.n,
        }
    }

    pub fn eigenvalue(&self, p: &PauliOperator) -> Result<f64> {
        if p.num_qubits() != self.num_qubits() {
            return Err(Error::Dimension {
                expected: self.num_qubits(),
                found: p.num_qubits(),
            });
        }
        match self {
            NoiseModel::Channel(c) => c.eigenvalue(p),
            NoiseModel::Product(prod) => Ok(prod
                .factors
                .iter()
                .filter(|(s, _)| p.support_mask() & s.mask() != 0)
                .map(|(s, c)| c.eigenvalue_unchecked(&p.restrict_unchecked(s)))
                .product()),
        }
    }

    pub fn orbital_eigenvalue(&self, orbit: &Orbit) -> Result<f64> {
        let lambdas = orbit
            .members()
            .iter()
            .map(|p| self.eigenvalue(p))
            .collect::<Result<Vec<_>>>()?;
        crate::channel::orbital_mean(&lambdas)
    }

    pub fn marginalize(&self, subset: &QubitSubset) -> Result<PauliChannel> {
        subset.validate(self.num_qubits())?;
        match self {
            NoiseModel::Channel(c) => c.marginalize(subset),
            NoiseModel::Product(prod) => {
                let k = subset.len();
                let mut out = PauliChannel::identity(k);
                for (f, c) in &prod.factors {
                    let mut in_factor = Vec::new();
                    let mut in_subset = Vec::new();
                    for (pos, &q) in subset.indices().iter().enumerate() {
                        if let Some(fp) = f.indices().iter().position(|&x| x == q) {
                            in_factor.push(fp);
                            in_subset.push(pos);
                        }
                    }
                    if in_factor.is_empty() {
                        continue;
                    }
                    let local = c.marginalize(&QubitSubset::new(in_factor)?)?;
                    out = out.compose(&local.embed(&QubitSubset::new(in_subset)?, k)?)?;
                }
                Ok(out)
            }
        }
    }

    /// Orbit marginals of `subset` in [`HardCycle::enumerate_orbits`] order.
    pub fn orbit_marginals(&self, cycle: &HardCycle, subset: &QubitSubset) -> Result<Vec<(Orbit, f64)>> {
        let marginal = self.marginalize(subset)?;
        Ok(cycle
            .enumerate_orbits(subset)?
            .into_iter()
            .map(|o| {
                let mass = o.members().iter().map(|q| marginal.probability(q)).sum();
                (o, mass)
            })
            .collect())
    }

    pub fn sampler(&self) -> Result<ErrorSampler> {
        let n = self.num_qubits();
        let part = |c: &PauliChannel, s: Option<&QubitSubset>| -> Result<Part> {
            let mut terms = Vec::with_capacity(c.support_size());
            let mut weights = Vec::with_capacity(c.support_size());
            for (p, &w) in c.terms() {
                terms.push(match s {
                    Some(s) => p.embed(s, n)?,
                    None => *p,
                });
                weights.push(w);
            }
            let dist = WeightedIndex::new(&weights)
                .map_err(|e| Error::InvalidChannel(format!("cannot sample: {e}")))?;
            Ok(Part { terms, dist })
        };
        let parts = match self {
            NoiseModel::Channel(c) => vec![part(c, None)?],
            NoiseModel::Product(prod) => prod
                .factors
                .iter()
                .map(|(s, c)| part(c, Some(s)))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(ErrorSampler { n, parts })
    }
}

/// Anything with Pauli eigenvalues: sparse channels, product channels and the
/// twirled part of a dense process.
pub trait PauliEigenvalues {
    fn num_qubits(&self) -> usize;
    fn eigenvalue(&self, p: &PauliOperator) -> Result<f64>;
}

impl PauliEigenvalues for PauliChannel {
    fn num_qubits(&self) -> usize {
        PauliChannel::num_qubits(self)
    }

    fn eigenvalue(&self, p: &PauliOperator) -> Result<f64> {
        PauliChannel::eigenvalue(self, p)
    }
}

impl PauliEigenvalues for NoiseModel {
    fn num_qubits(&self) -> usize {
        NoiseModel::num_qubits(self)
    }

    fn eigenvalue(&self, p: &PauliOperator) -> Result<f64> {
        NoiseModel::eigenvalue(self, p)
    }
}

impl PauliEigenvalues for crate::dense::DenseProcess {
    fn num_qubits(&self) -> usize {
        crate::dense::DenseProcess::num_qubits(self)
    }

    fn eigenvalue(&self, p: &PauliOperator) -> Result<f64> {
        crate::dense::DenseProcess::eigenvalue(self, p)
    }
}

#[derive(Debug, Clone)]
struct Part {
    terms: Vec<PauliOperator>,
    dist: WeightedIndex<f64>,
}

/// Draws one Pauli error per call from a [`NoiseModel`].
#[derive(Debug, Clone)]
pub struct ErrorSampler {
    n: usize,
    parts: Vec<Part>,
}

impl ErrorSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PauliOperator {
        let mut e = PauliOperator::identity(self.n);
        for part in &self.parts {
            e = e.mul_unchecked(&part.terms[part.dist.sample(rng)]);
        }
        e
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Channel(c) => write!(f, "{c}"),
            NoiseModel::Product(p) => {
                writeln!(f, "qubits {}", p.n)?;
                for (s, c) in &p.factors {
                    writeln!(f, "factor {s}")?;
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// Either a plain channel file, or `qubits <n>` followed by `factor <subset>`
    /// sections, each holding a channel on that subset.
    fn from_str(s: &str) -> Result<Self> {
        let content = |l: &&str| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        };
        let Some(first) = s.lines().find(content) else {
            return Err(Error::parse(0, "empty noise file"));
        };
        let Some(n) = first.trim().strip_prefix("qubits") else {
            return Ok(NoiseModel::Channel(s.parse()?));
        };
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::parse(1, format!("bad qubit count {:?}", n.trim())))?;
        let mut sections: Vec<(usize, QubitSubset, String)> = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if !content(&line) || line.starts_with("qubits") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("factor") {
                let subset = rest.trim().parse().map_err(|e: Error| Error::parse(i + 1, e.to_string()))?;
                sections.push((i + 1, subset, String::new()));
            } else {
                let Some(last) = sections.last_mut() else {
                    return Err(Error::parse(i + 1, "term before the first factor"));
                };
                last.2.push_str(line);
                last.2.push('\n');
            }
        }
        let factors = sections
            .into_iter()
            .map(|(line, subset, body)| {
                let c: PauliChannel = body.parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
                Ok((subset, c))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NoiseModel::Product(ProductChannel::new(n, factors)?))
    }
}
