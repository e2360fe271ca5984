//! Sparse stochastic Pauli channels: eigenvalues, orbital eigenvalues and marginals.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::cycle::{HardCycle, Orbit};
use crate::error::{Error, Result};
use crate::pauli::{PauliOperator, QubitSubset};
use crate::wht;

/// Allowed deviation of the total probability from one.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Negative probabilities above this are treated as round-off in derived channels.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Largest register for which dense `4^n` vectors are built.
pub const DENSE_LIMIT: usize = 10;

/// `ρ ↦ Σ_i p_i P_i ρ P_i`, stored sparsely. The identity term is always present.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannel {
    n: usize,
    terms: BTreeMap<PauliOperator, f64>,
}

impl PauliChannel {
    /// Validating constructor for injected ground truth: rejects duplicate keys,
    /// negative entries and totals off by more than [`SUM_TOLERANCE`].
    pub fn new(n: usize, terms: impl IntoIterator<Item = (PauliOperator, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (p, prob) in terms {
            if p.num_qubits() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: p.num_qubits(),
                });
            }
            if !prob.is_finite() || prob < 0.0 {
                return Err(Error::InvalidChannel(format!("probability {prob} for {p}")));
            }
            match map.entry(p) {
                Entry::Occupied(_) => {
                    return Err(Error::InvalidChannel(format!("duplicate term {p}")));
                }
                Entry::Vacant(v) => {
                    v.insert(prob);
                }
            }
        }
        PauliChannel::finish(n, map)
    }

    fn finish(n: usize, mut map: BTreeMap<PauliOperator, f64>) -> Result<Self> {
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidChannel(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let id = PauliOperator::identity(n);
        map.retain(|p, v| *v > 0.0 || *p == id);
        map.entry(id).or_insert(0.0);
        Ok(PauliChannel { n, terms: map })
    }

    /// Constructor for derived estimates: clamps negatives down to
    /// `-NEGATIVE_TOLERANCE` to zero and renormalises.
    pub fn from_estimate(n: usize, terms: impl IntoIterator<Item = (PauliOperator, f64)>) -> Result<Self> {
        let mut map: BTreeMap<PauliOperator, f64> = BTreeMap::new();
        for (p, prob) in terms {
            if p.num_qubits() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: p.num_qubits(),
                });
            }
            if !prob.is_finite() || prob < -NEGATIVE_TOLERANCE {
                return Err(Error::InvalidChannel(format!("probability {prob} for {p}")));
            }
            *map.entry(p).or_insert(0.0) += prob.max(0.0);
        }
        let total: f64 = map.values().sum();
        if total <= 0.0 || (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidChannel(format!("estimate sums to {total}")));
        }
        for v in map.values_mut() {
            *v /= total;
        }
        let total: f64 = map.values().sum();
        let id = PauliOperator::identity(n);
        *map.entry(id).or_insert(0.0) += 1.0 - total;
        let pid = map[&id];
        if pid < 0.0 {
            // identity absorbed the rounding but was tiny; push it to the largest term
            map.insert(id, 0.0);
            if let Some((_, v)) = map.iter_mut().max_by(|a, b| a.1.total_cmp(b.1)) {
                *v += pid;
            }
        }
        PauliChannel::finish(n, map)
    }

    pub fn identity(n: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(PauliOperator::identity(n), 1.0);
        PauliChannel { n, terms }
    }

    /// Channel from a dense probability vector in [`PauliOperator::index`] order.
    pub fn from_dense(n: usize, probs: &[f64]) -> Result<Self> {
        if probs.len() != 1 << (2 * n) {
            return Err(Error::InvalidChannel(format!(
                "dense vector of length {} for {n} qubits",
                probs.len()
            )));
        }
        PauliChannel::from_estimate(
            n,
            probs
                .iter()
                .enumerate()
                .map(|(i, &p)| (PauliOperator::from_index(n, i), p)),
        )
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<PauliOperator, f64> {
        &self.terms
    }

    pub fn probability(&self, p: &PauliOperator) -> f64 {
        self.terms.get(p).copied().unwrap_or(0.0)
    }

    pub fn identity_probability(&self) -> f64 {
        self.probability(&PauliOperator::identity(self.n))
    }

    /// Number of stored terms (including the identity).
    pub fn support_size(&self) -> usize {
        self.terms.len()
    }

    pub fn to_dense(&self) -> Result<Vec<f64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::DimensionTooLarge {
                n: self.n,
                limit: DENSE_LIMIT,
            });
        }
        let mut v = vec![0.0; 1 << (2 * self.n)];
        for (p, &prob) in &self.terms {
            v[p.index()] = prob;
        }
        Ok(v)
    }

    /// `λ_P = Σ_j (-1)^{ω(P,P_j)} p_j`.
    pub fn eigenvalue(&self, p: &PauliOperator) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        Ok(self.eigenvalue_unchecked(p))
    }

    pub(crate) fn eigenvalue_unchecked(&self, p: &PauliOperator) -> f64 {
        self.terms
            .iter()
            .map(|(q, &prob)| if p.omega_unchecked(q) == 1 { -prob } else { prob })
            .sum()
    }

    /// All `4^n` eigenvalues by fast transform.
    pub fn eigenvalues_dense(&self) -> Result<Vec<f64>> {
        Ok(wht::eigenvalues_from_probabilities(self.n, &self.to_dense()?))
    }

    /// Geometric mean of the member eigenvalues.
    pub fn orbital_eigenvalue(&self, orbit: &Orbit) -> Result<f64> {
        let lambdas = orbit
            .members()
            .iter()
            .map(|p| self.eigenvalue(p))
            .collect::<Result<Vec<_>>>()?;
        orbital_mean(&lambdas)
    }

    /// `μ_S(P) = Σ_{[P_i]_S = P} p(P_i)`.
    pub fn marginalize(&self, subset: &QubitSubset) -> Result<PauliChannel> {
        subset.validate(self.n)?;
        let mut map: BTreeMap<PauliOperator, f64> = BTreeMap::new();
        for (p, &prob) in &self.terms {
            *map.entry(p.restrict_unchecked(subset)).or_insert(0.0) += prob;
        }
        PauliChannel::finish_lenient(subset.len(), map)
    }

    fn finish_lenient(n: usize, map: BTreeMap<PauliOperator, f64>) -> Result<Self> {
        // sums of valid probabilities stay within round-off of one
        PauliChannel::finish(n, map).or_else(|_| PauliChannel::from_estimate(n, Vec::new()))
    }

    /// `μ_S(O) = Σ_{Q∈O} μ_S(Q)` for an orbit of the action induced on `ℙ_S`.
    pub fn orbit_marginal(&self, cycle: &HardCycle, subset: &QubitSubset, orbit: &Orbit) -> Result<f64> {
        if cycle.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: cycle.num_qubits(),
            });
        }
        let local = cycle.induced(subset)?;
        if orbit.num_qubits() != subset.len() || local.orbit(orbit.representative())? != *orbit {
            return Err(Error::InvalidSubset(format!(
                "{orbit} is not an orbit of the action on subset {subset}"
            )));
        }
        Ok(self
            .terms
            .iter()
            .filter(|(p, _)| orbit.contains(&p.restrict_unchecked(subset)))
            .map(|(_, &prob)| prob)
            .sum())
    }

    /// All orbit marginals of `subset`, in [`HardCycle::enumerate_orbits`] order.
    pub fn orbit_marginals(&self, cycle: &HardCycle, subset: &QubitSubset) -> Result<Vec<(Orbit, f64)>> {
        let marginal = self.marginalize(subset)?;
        let orbits = cycle.enumerate_orbits(subset)?;
        Ok(orbits
            .into_iter()
            .map(|o| {
                let mass = o.members().iter().map(|q| marginal.probability(q)).sum();
                (o, mass)
            })
            .collect())
    }

    /// Sequential composition (apply `self`, then `other`): error probabilities convolve.
    pub fn compose(&self, other: &PauliChannel) -> Result<PauliChannel> {
        if other.n != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: other.n,
            });
        }
        let mut map: BTreeMap<PauliOperator, f64> = BTreeMap::new();
        for (a, &pa) in &self.terms {
            for (b, &pb) in &other.terms {
                let w = pa * pb;
                if w > 0.0 {
                    *map.entry(a.mul_unchecked(b)).or_insert(0.0) += w;
                }
            }
        }
        PauliChannel::from_estimate(self.n, map)
    }

    /// `k`-fold composition; `power(0)` is the identity channel.
    pub fn power(&self, k: usize) -> Result<PauliChannel> {
        let mut out = PauliChannel::identity(self.n);
        for _ in 0..k {
            out = out.compose(self)?;
        }
        Ok(out)
    }

    /// Place this `|subset|`-qubit channel on `subset` of an `n`-qubit register.
    pub fn embed(&self, subset: &QubitSubset, n: usize) -> Result<PauliChannel> {
        let terms = self
            .terms
            .iter()
            .map(|(p, &prob)| Ok((p.embed(subset, n)?, prob)))
            .collect::<Result<Vec<_>>>()?;
        PauliChannel::new(n, terms)
    }

    /// Independent channels on disjoint subsets of an `n`-qubit register.
    pub fn product(n: usize, factors: &[(QubitSubset, PauliChannel)]) -> Result<PauliChannel> {
        let mut used = 0u64;
        let mut out = PauliChannel::identity(n);
        for (s, c) in factors {
            if used & s.mask() != 0 {
                return Err(Error::InvalidSubset(format!("factor subsets overlap at {s}")));
            }
            used |= s.mask();
            out = out.compose(&c.embed(s, n)?)?;
        }
        Ok(out)
    }
}

/// Geometric mean `(Π λ)^{1/k}`; negative products of odd length keep their sign,
/// non-positive products of even length are rejected.
pub fn orbital_mean(lambdas: &[f64]) -> Result<f64> {
    match lambdas {
        [] => Err(Error::UnreliableEstimate("empty orbit".into())),
        [single] => Ok(*single),
        _ => {
            let k = lambdas.len();
            let prod: f64 = lambdas.iter().product();
            if prod > 0.0 {
                Ok(prod.powf(1.0 / k as f64))
            } else if k % 2 == 1 {
                Ok(-(-prod).powf(1.0 / k as f64))
            } else {
                Err(Error::UnreliableEstimate(format!(
                    "eigenvalue product {prod} over an even-length orbit"
                )))
            }
        }
    }
}

impl fmt::Display for PauliChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, prob) in &self.terms {
            writeln!(f, "{p} {prob}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliChannel {
    type Err = Error;

    /// One `<Pauli> <probability>` per line; `#` lines and blank lines ignored.
    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut n = None;
        for (i, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(ps), Some(vs), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(i + 1, "expected `<Pauli> <probability>`"));
            };
            let p: PauliOperator = ps.parse().map_err(|e| Error::parse(i + 1, format!("{e}")))?;
            let v: f64 = vs
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad probability {vs:?}")))?;
            match n {
                None => n = Some(p.num_qubits()),
                Some(k) if k != p.num_qubits() => {
                    return Err(Error::parse(i + 1, "inconsistent Pauli lengths"));
                }
                _ => {}
            }
            terms.push((p, v));
        }
        let n = n.ok_or_else(|| Error::parse(0, "channel file has no terms"))?;
        if !terms.iter().any(|(p, _)| p.is_identity()) {
            return Err(Error::InvalidChannel("identity term is mandatory".into()));
        }
        PauliChannel::new(n, terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    fn ch(terms: &[(&str, f64)]) -> PauliChannel {
        let n = terms[0].0.len();
        PauliChannel::new(n, terms.iter().map(|(s, v)| (p(s), *v))).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        let id = PauliChannel::identity(2);
        for q in PauliOperator::all(2) {
            assert_eq!(id.eigenvalue(&q).unwrap(), 1.0);
        }
        let c = ch(&[("I", 0.9), ("Z", 0.1)]);
        assert!((c.eigenvalue(&p("X")).unwrap() - 0.8).abs() < 1e-15);
        assert!((c.eigenvalue(&p("Z")).unwrap() - 1.0).abs() < 1e-15);
        let dep = ch(&[("I", 0.25), ("X", 0.25), ("Y", 0.25), ("Z", 0.25)]);
        for s in ["X", "Y", "Z"] {
            assert!(dep.eigenvalue(&p(s)).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn orbital_mean_examples() {
        assert!((orbital_mean(&[0.9, 0.8]).unwrap() - 0.848528137423857).abs() < 1e-12);
        assert_eq!(orbital_mean(&[0.7]).unwrap(), 0.7);
        assert_eq!(orbital_mean(&[-0.5]).unwrap(), -0.5);
        assert!((orbital_mean(&[-0.5, 0.5, 0.5]).unwrap() + 0.5).abs() < 1e-12);
        assert!(matches!(orbital_mean(&[-0.5, 0.5]), Err(Error::UnreliableEstimate(_))));
        let h = HardCycle::single_cnot();
        let c = ch(&[("II", 0.97), ("XI", 0.02), ("ZZ", 0.01)]);
        let o = h.orbit(&p("II")).unwrap();
        assert_eq!(c.orbital_eigenvalue(&o).unwrap(), 1.0);
    }

    #[test]
    fn marginal_examples() {
        let c = ch(&[("II", 0.9), ("XI", 0.06), ("XX", 0.04)]);
        let m = c.marginalize(&"0".parse().unwrap()).unwrap();
        assert!((m.probability(&p("I")) - 0.9).abs() < 1e-15);
        assert!((m.probability(&p("X")) - 0.1).abs() < 1e-15);
        let id = PauliChannel::identity(3).marginalize(&"2,0".parse().unwrap()).unwrap();
        assert_eq!(id, PauliChannel::identity(2));
    }

    #[test]
    fn orbit_marginal_examples() {
        let h = HardCycle::single_cnot();
        let s = QubitSubset::full(2);
        let c = ch(&[("II", 0.9), ("XI", 0.06), ("XX", 0.03), ("ZX", 0.01)]);
        let all = c.orbit_marginals(&h, &s).unwrap();
        let total: f64 = all.iter().map(|(_, m)| m).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let xi = h.orbit(&p("XI")).unwrap();
        assert!((c.orbit_marginal(&h, &s, &xi).unwrap() - 0.09).abs() < 1e-15);
        let id = PauliChannel::identity(2);
        assert_eq!(id.orbit_marginal(&h, &s, &xi).unwrap(), 0.0);
        let bogus = Orbit::from_members(&HardCycle::identity(2).unwrap(), &[p("XI")]).unwrap();
        assert!(c.orbit_marginal(&h, &s, &bogus).is_err());
    }

    #[test]
    fn constructor_rejects_invalid() {
        assert!(PauliChannel::new(1, [(p("I"), 0.5), (p("X"), 0.4)]).is_err());
        assert!(PauliChannel::new(1, [(p("I"), 1.1), (p("X"), -0.1)]).is_err());
        assert!(PauliChannel::new(1, [(p("I"), 0.5), (p("I"), 0.5)]).is_err());
        assert!(PauliChannel::new(1, [(p("II"), 1.0)]).is_err());
    }

    #[test]
    fn file_format() {
        let text = "# injected\nII 0.95\nXI 0.03\n\nZX 0.02\n";
        let c: PauliChannel = text.parse().unwrap();
        assert_eq!(c.support_size(), 3);
        let again: PauliChannel = c.to_string().parse().unwrap();
        assert_eq!(again, c);
        assert!("XI 1.0\n".parse::<PauliChannel>().is_err());
        assert!("II 0.5 extra\n".parse::<PauliChannel>().is_err());
        assert!("II 0.5\nX 0.5\n".parse::<PauliChannel>().is_err());
    }

    #[test]
    fn compose_and_power() {
        let c = ch(&[("I", 0.9), ("X", 0.1)]);
        let c2 = c.power(2).unwrap();
        assert!((c2.probability(&p("X")) - 0.18).abs() < 1e-15);
        for q in PauliOperator::all(1) {
            let l = c.eigenvalue(&q).unwrap();
            assert!((c2.eigenvalue(&q).unwrap() - l * l).abs() < 1e-15);
        }
        assert_eq!(c.power(0).unwrap(), PauliChannel::identity(1));
    }

    #[test]
    fn product_of_local_channels() {
        let a = ch(&[("I", 0.9), ("Z", 0.1)]);
        let b = ch(&[("I", 0.8), ("X", 0.2)]);
        let prod = PauliChannel::product(
            3,
            &[("0".parse().unwrap(), a.clone()), ("2".parse().unwrap(), b.clone())],
        )
        .unwrap();
        assert!((prod.probability(&p("ZIX")) - 0.02).abs() < 1e-15);
        assert!(PauliChannel::product(2, &[("0".parse().unwrap(), a.clone()), ("0".parse().unwrap(), a)]).is_err());
    }

    #[test]
    fn estimate_constructor_clamps_round_off() {
        let c = PauliChannel::from_estimate(1, [(p("I"), 0.9 + 1e-11), (p("X"), 0.1), (p("Z"), -1e-11)]).unwrap();
        assert_eq!(c.probability(&p("Z")), 0.0);
        let total: f64 = c.terms().values().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(PauliChannel::from_estimate(1, [(p("I"), 1.1), (p("X"), -0.1)]).is_err());
    }
}
