//! Chain-structured Gibbs random field over CNOT pairs.
//!
//! With pairs `x_0, …, x_{k-1}` and the separating set of pair `i` taken as
//! pair `i+1`, the joint distribution is
//! `p(x) = Π_{i<k-1} μ(x_i, x_{i+1}) / μ(x_{i+1}) · μ(x_{k-1})`.

use std::collections::BTreeMap;

use crate::channel::PauliChannel;
use crate::cycle::HardCycle;
use crate::error::{Error, Result};
use crate::estimation::reconstruct::MarginalSet;
use crate::noise::NoiseModel;
use crate::pauli::{PauliOperator, QubitSubset};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub pair: QubitSubset,
    /// Empty for the terminal factor.
    pub separating: Option<QubitSubset>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    n: usize,
    factors: Vec<Factor>,
}

impl FactorGraph {
    /// Chain over disjoint pairs of an `n`-qubit register, in the given order.
    pub fn chain(n: usize, pairs: Vec<QubitSubset>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidSubset("factor graph needs at least one pair".into()));
        }
        let mut used = 0u64;
        for p in &pairs {
            p.validate(n)?;
            if used & p.mask() != 0 {
                return Err(Error::InvalidSubset(format!("pair {p} overlaps another")));
            }
            used |= p.mask();
        }
        let factors = (0..pairs.len())
            .map(|i| Factor {
                pair: pairs[i].clone(),
                separating: pairs.get(i + 1).cloned(),
            })
            .collect();
        Ok(FactorGraph { n, factors })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn pairs(&self) -> Vec<&QubitSubset> {
        self.factors.iter().map(|f| &f.pair).collect()
    }

    /// Qubits covered by some pair.
    pub fn support_mask(&self) -> u64 {
        self.factors.iter().fold(0, |m, f| m | f.pair.mask())
    }

    /// `pair_i ∪ pair_{i+1}` with pair `i` first.
    pub fn joint_subset(&self, i: usize) -> Option<QubitSubset> {
        let f = self.factors.get(i)?;
        f.separating.as_ref().map(|s| f.pair.union(s))
    }
}

/// Chain over the CNOT supports of [`HardCycle::transversal`]`(n_pairs)`.
pub fn build_transversal_graph(n_pairs: usize) -> Result<FactorGraph> {
    let h = HardCycle::transversal(n_pairs)?;
    let pairs = h.blocks().into_iter().filter(|b| b.len() == 2).collect();
    FactorGraph::chain(h.num_qubits(), pairs)
}

/// Conditional tables of the chain, stored as pair marginals and adjacent
/// joint marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct JointErrorModel {
    graph: FactorGraph,
    pair_marginals: Vec<PauliChannel>,
    /// `μ(x_i, x_{i+1})` on `pair_i` then `pair_{i+1}` qubits.
    joint_marginals: Vec<PauliChannel>,
    /// For each `i`, `x_{i+1}` → list of `(x_i, μ(x_i, x_{i+1}))`.
    index: Vec<BTreeMap<PauliOperator, Vec<(PauliOperator, f64)>>>,
    threshold: f64,
}

impl JointErrorModel {
    pub fn new(graph: FactorGraph, pair_marginals: Vec<PauliChannel>, joint_marginals: Vec<PauliChannel>) -> Result<Self> {
        let k = graph.factors().len();
        if pair_marginals.len() != k || joint_marginals.len() + 1 != k {
            return Err(Error::InconsistentMarginals(format!(
                "{k} pairs need {k} pair marginals and {} joint marginals",
                k - 1
            )));
        }
        for (i, f) in graph.factors().iter().enumerate() {
            if pair_marginals[i].num_qubits() != f.pair.len() {
                return Err(Error::Dimension {
                    expected: f.pair.len(),
                    found: pair_marginals[i].num_qubits(),
                });
            }
        }
        let mut index = Vec::with_capacity(k.saturating_sub(1));
        for (i, j) in joint_marginals.iter().enumerate() {
            let a = graph.factors()[i].pair.len();
            let b = graph.factors()[i + 1].pair.len();
            if j.num_qubits() != a + b {
                return Err(Error::Dimension {
                    expected: a + b,
                    found: j.num_qubits(),
                });
            }
            let first = QubitSubset::new((0..a).collect())?;
            let second = QubitSubset::new((a..a + b).collect())?;
            let mut map: BTreeMap<PauliOperator, Vec<(PauliOperator, f64)>> = BTreeMap::new();
            for (p, &v) in j.terms() {
                if v > 0.0 {
                    map.entry(p.restrict_unchecked(&second))
                        .or_default()
                        .push((p.restrict_unchecked(&first), v));
                }
            }
            index.push(map);
        }
        Ok(JointErrorModel {
            graph,
            pair_marginals,
            joint_marginals,
            index,
            threshold: 0.0,
        })
    }

    /// Exact Pauli-level marginals of a ground-truth noise model.
    pub fn from_noise(graph: FactorGraph, noise: &NoiseModel) -> Result<Self> {
        let pairs = graph
            .factors()
            .iter()
            .map(|f| noise.marginalize(&f.pair))
            .collect::<Result<Vec<_>>>()?;
        let joints = (0..graph.factors().len().saturating_sub(1))
            .map(|i| noise.marginalize(&graph.joint_subset(i).expect("inner factor")))
            .collect::<Result<Vec<_>>>()?;
        JointErrorModel::new(graph, pairs, joints)
    }

    /// Estimated orbit marginals, with each orbit's mass split equally over its members.
    ///
    /// Separately projected estimates need not agree on shared pairs, so the
    /// marginal of pair `i+1` is taken from the joint estimate it conditions;
    /// every conditional table then sums to one.
    pub fn from_estimates(graph: FactorGraph, set: &MarginalSet) -> Result<Self> {
        let find = |want: &QubitSubset| -> Result<PauliChannel> {
            // the exact subset if present, else the smallest estimated superset
            let est = set
                .estimates
                .iter()
                .filter(|e| e.subset.mask() & want.mask() == want.mask())
                .min_by_key(|e| e.subset.len())
                .ok_or_else(|| Error::InsufficientData(format!("no marginal covers subset {want}")))?;
            let positions = want
                .indices()
                .iter()
                .map(|q| est.subset.indices().iter().position(|s| s == q).expect("same mask"))
                .collect();
            est.to_channel()?.marginalize(&QubitSubset::new(positions)?)
        };
        let joints = (0..graph.factors().len().saturating_sub(1))
            .map(|i| find(&graph.joint_subset(i).expect("inner factor")))
            .collect::<Result<Vec<_>>>()?;
        let mut pairs = vec![find(&graph.factors()[0].pair)?];
        for (i, j) in joints.iter().enumerate() {
            let a = graph.factors()[i].pair.len();
            let b = graph.factors()[i + 1].pair.len();
            pairs.push(j.marginalize(&QubitSubset::new((a..a + b).collect())?)?);
        }
        JointErrorModel::new(graph, pairs, joints)
    }

    /// Partial products at or below `threshold` are pruned during enumeration.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold.max(0.0);
        self
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `p(x)`; the flag reports a `0/0` conditional that was taken as zero.
    pub fn joint_probability(&self, x: &PauliOperator) -> Result<(f64, bool)> {
        if x.num_qubits() != self.graph.n {
            return Err(Error::Dimension {
                expected: self.graph.n,
                found: x.num_qubits(),
            });
        }
        if x.support_mask() & !self.graph.support_mask() != 0 {
            return Ok((0.0, false));
        }
        let k = self.graph.factors().len();
        let locals: Vec<PauliOperator> = self
            .graph
            .factors()
            .iter()
            .map(|f| x.restrict_unchecked(&f.pair))
            .collect();
        let mut p = self.pair_marginals[k - 1].probability(&locals[k - 1]);
        let mut flagged = false;
        for i in 0..k - 1 {
            let joint = self.graph.joint_subset(i).expect("inner factor");
            let num = self.joint_marginals[i].probability(&x.restrict_unchecked(&joint));
            let den = self.pair_marginals[i + 1].probability(&locals[i + 1]);
            if den == 0.0 {
                if num > 0.0 {
                    return Err(Error::InconsistentMarginals(format!(
                        "μ({}) = 0 but the joint marginal with pair {i} is {num}",
                        locals[i + 1]
                    )));
                }
                flagged = true;
                p = 0.0;
                continue;
            }
            p *= num / den;
        }
        Ok((p, flagged))
    }

    /// Visit every configuration with non-zero probability (above the threshold)
    /// in a deterministic order. Returns the number visited.
    pub fn enumerate<F: FnMut(PauliOperator, f64)>(&self, cap: usize, mut visit: F) -> Result<usize> {
        let k = self.graph.factors().len();
        let n = self.graph.n;
        let embed = |i: usize, p: &PauliOperator| p.embed(&self.graph.factors()[i].pair, n);
        let mut count = 0usize;
        let mut mass = 0.0;
        let mut stack: Vec<(usize, PauliOperator, PauliOperator, f64)> = Vec::new();
        // (next pair to fill, local value of the pair above it, accumulated config, weight)
        let last: Vec<(&PauliOperator, &f64)> = self.pair_marginals[k - 1].terms().iter().rev().collect();
        for (x, &w) in last {
            if w > self.threshold {
                stack.push((k - 1, *x, embed(k - 1, x)?, w));
            }
        }
        while let Some((i, local, acc, w)) = stack.pop() {
            if i == 0 {
                count += 1;
                mass += w;
                if count > cap {
                    return Err(Error::EnumerationCap { cap, mass });
                }
                visit(acc, w);
                continue;
            }
            let den = self.pair_marginals[i].probability(&local);
            let Some(children) = self.index[i - 1].get(&local) else {
                continue;
            };
            if den == 0.0 {
                return Err(Error::InconsistentMarginals(format!(
                    "μ({local}) = 0 on pair {i} but joint marginal with pair {} is positive",
                    i - 1
                )));
            }
            for (x, num) in children.iter().rev() {
                let wn = w * num / den;
                if wn > self.threshold {
                    stack.push((i - 1, *x, acc.mul_unchecked(&embed(i - 1, x)?), wn));
                }
            }
        }
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::ProductChannel;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    #[test]
    fn transversal_graph_shape() {
        let g = build_transversal_graph(7).unwrap();
        assert_eq!(g.num_qubits(), 16);
        assert_eq!(g.factors().len(), 7);
        assert_eq!(g.factors()[0].pair.to_string(), "0,9");
        assert_eq!(g.factors()[0].separating.as_ref().unwrap().to_string(), "1,10");
        assert!(g.factors()[6].separating.is_none());
        let g1 = build_transversal_graph(1).unwrap();
        assert_eq!(g1.factors().len(), 1);
        assert!(g1.factors()[0].separating.is_none());
    }

    #[test]
    fn single_pair_joint_is_marginal() {
        let g = build_transversal_graph(1).unwrap();
        let c = PauliChannel::new(4, [(p("IIII"), 0.9), (p("XIIX"), 0.1)]).unwrap();
        let m = JointErrorModel::from_noise(g, &c.into()).unwrap();
        assert!((m.joint_probability(&p("XIIX")).unwrap().0 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn independent_pairs_factor() {
        let g = build_transversal_graph(2).unwrap();
        let a = PauliChannel::new(2, [(p("II"), 0.95), (p("XZ"), 0.05)]).unwrap();
        let b = PauliChannel::new(2, [(p("II"), 0.9), (p("YY"), 0.1)]).unwrap();
        let prod = ProductChannel::new(6, vec![(g.pairs()[0].clone(), a), (g.pairs()[1].clone(), b)]).unwrap();
        let m = JointErrorModel::from_noise(g, &prod.into()).unwrap();
        // pairs {0,4} and {1,5}
        let x = PauliOperator::from_sparse(6, &[(0, crate::Letter::X), (4, crate::Letter::Z), (1, crate::Letter::Y), (5, crate::Letter::Y)]).unwrap();
        assert!((m.joint_probability(&x).unwrap().0 - 0.005).abs() < 1e-15);
        let mut total = 0.0;
        let count = m.enumerate(100, |_, w| total += w).unwrap();
        assert_eq!(count, 4);
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_over_zero_is_flagged() {
        let g = build_transversal_graph(2).unwrap();
        let pair = PauliChannel::new(2, [(p("II"), 1.0)]).unwrap();
        let joint = PauliChannel::identity(4);
        let m = JointErrorModel::new(g, vec![pair.clone(), pair], vec![joint]).unwrap();
        let x = PauliOperator::from_sparse(6, &[(1, crate::Letter::X)]).unwrap();
        assert_eq!(m.joint_probability(&x).unwrap(), (0.0, true));
    }

    #[test]
    fn positive_over_zero_is_an_error() {
        let g = build_transversal_graph(2).unwrap();
        let pair = PauliChannel::identity(2);
        let joint = PauliChannel::new(4, [(p("IIII"), 0.9), (p("IIXI"), 0.1)]).unwrap();
        let m = JointErrorModel::new(g, vec![pair.clone(), pair], vec![joint]).unwrap();
        let x = PauliOperator::from_sparse(6, &[(1, crate::Letter::X)]).unwrap();
        assert!(matches!(m.joint_probability(&x), Err(Error::InconsistentMarginals(_))));
    }

    #[test]
    fn enumeration_cap() {
        let g = build_transversal_graph(2).unwrap();
        let a = PauliChannel::new(2, [(p("II"), 0.5), (p("XZ"), 0.5)]).unwrap();
        let prod = ProductChannel::new(6, vec![(g.pairs()[0].clone(), a.clone()), (g.pairs()[1].clone(), a)]).unwrap();
        let m = JointErrorModel::from_noise(g, &prod.into()).unwrap();
        assert!(matches!(m.enumerate(3, |_, _| {}), Err(Error::EnumerationCap { cap: 3, .. })));
    }
}
