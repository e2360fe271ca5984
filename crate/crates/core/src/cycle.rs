//! Clifford hard cycles acting on Paulis by conjugation, and their orbits.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pauli::{PauliOperator, QubitSubset, MAX_QUBITS};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Action {
    /// Disjoint CNOTs as `(control, target)`.
    Cnots(Vec<(usize, usize)>),
    /// Unsigned images of `X_q` and `Z_q`.
    Tableau {
        x_images: Vec<PauliOperator>,
        z_images: Vec<PauliOperator>,
    },
}

/// A Clifford layer whose conjugation action permutes the Paulis (signs discarded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardCycle {
    n: usize,
    action: Action,
}

impl HardCycle {
    pub fn identity(n: usize) -> Result<Self> {
        HardCycle::cnots(n, Vec::new())
    }

    pub fn cnots(n: usize, gates: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::DimensionTooLarge {
                n,
                limit: MAX_QUBITS,
            });
        }
        let mut used = 0u64;
        for &(c, t) in &gates {
            for q in [c, t] {
                if q >= n {
                    return Err(Error::IndexOutOfRange { index: q, n });
                }
            }
            if c == t {
                return Err(Error::InvalidCycle(format!("CNOT with control = target = {c}")));
            }
            let bits = 1u64 << c | 1u64 << t;
            if used & bits != 0 {
                return Err(Error::InvalidCycle(format!(
                    "gate ({c},{t}) overlaps another gate in the cycle"
                )));
            }
            used |= bits;
        }
        Ok(HardCycle {
            n,
            action: Action::Cnots(gates),
        })
    }

    /// A single CNOT with control 0 and target 1.
    pub fn single_cnot() -> Self {
        HardCycle::cnots(2, vec![(0, 1)]).expect("valid")
    }

    /// `n_pairs` CNOTs `(i, i + n_pairs + 2)` in a register of `2 * n_pairs + 2` qubits,
    /// with the two middle qubits idle.
    pub fn transversal(n_pairs: usize) -> Result<Self> {
        let offset = n_pairs + 2;
        HardCycle::cnots(
            2 * n_pairs + 2,
            (0..n_pairs).map(|i| (i, i + offset)).collect(),
        )
    }

    /// Seven CNOTs `(i, i + 9)` on a 16-qubit register; qubits 7 and 8 idle.
    pub fn transversal7() -> Self {
        HardCycle::transversal(7).expect("valid")
    }

    /// General Clifford given by the unsigned images of `X_q` and `Z_q`.
    pub fn from_tableau(x_images: Vec<PauliOperator>, z_images: Vec<PauliOperator>) -> Result<Self> {
        let n = x_images.len();
        if n == 0 || z_images.len() != n {
            return Err(Error::InvalidCycle("tableau needs n X images and n Z images".into()));
        }
        for img in x_images.iter().chain(&z_images) {
            if img.num_qubits() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: img.num_qubits(),
                });
            }
        }
        for i in 0..n {
            for j in 0..n {
                let xx = x_images[i].omega_unchecked(&x_images[j]);
                let zz = z_images[i].omega_unchecked(&z_images[j]);
                let xz = x_images[i].omega_unchecked(&z_images[j]);
                if xx != 0 || zz != 0 || xz != u8::from(i == j) {
                    return Err(Error::InvalidCycle(
                        "tableau images do not preserve commutation".into(),
                    ));
                }
            }
        }
        Ok(HardCycle {
            n,
            action: Action::Tableau { x_images, z_images },
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// CNOT gates, or `None` for a general tableau cycle.
    pub fn gates(&self) -> Option<&[(usize, usize)]> {
        match &self.action {
            Action::Cnots(g) => Some(g),
            Action::Tableau { .. } => None,
        }
    }

    /// Heisenberg image of `p` under the cycle, sign discarded.
    pub fn conjugate(&self, p: &PauliOperator) -> Result<PauliOperator> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        Ok(self.conjugate_unchecked(p))
    }

    #[inline]
    pub(crate) fn conjugate_unchecked(&self, p: &PauliOperator) -> PauliOperator {
        match &self.action {
            Action::Cnots(gates) => {
                let mut x = p.x_mask();
                let mut z = p.z_mask();
                for &(c, t) in gates {
                    x ^= (x >> c & 1) << t;
                    z ^= (z >> t & 1) << c;
                }
                PauliOperator::from_masks_unchecked(self.n, x, z)
            }
            Action::Tableau { x_images, z_images } => {
                let mut out = PauliOperator::identity(self.n);
                for q in 0..self.n {
                    if p.x_mask() >> q & 1 == 1 {
                        out = out.mul_unchecked(&x_images[q]);
                    }
                    if p.z_mask() >> q & 1 == 1 {
                        out = out.mul_unchecked(&z_images[q]);
                    }
                }
                out
            }
        }
    }

    /// `H^k(p)`.
    pub fn conjugate_pow(&self, p: &PauliOperator, k: usize) -> Result<PauliOperator> {
        let mut q = *p;
        for _ in 0..k {
            q = self.conjugate(&q)?;
        }
        Ok(q)
    }

    fn generator_images(&self, q: usize) -> (PauliOperator, PauliOperator) {
        let x = PauliOperator::from_masks_unchecked(self.n, 1 << q, 0);
        let z = PauliOperator::from_masks_unchecked(self.n, 0, 1 << q);
        (self.conjugate_unchecked(&x), self.conjugate_unchecked(&z))
    }

    /// Least `r >= 1` with `H^r` the identity channel.
    pub fn order(&self) -> usize {
        let mut r = 1usize;
        for q in 0..self.n {
            let (xi, zi) = (
                PauliOperator::from_masks_unchecked(self.n, 1 << q, 0),
                PauliOperator::from_masks_unchecked(self.n, 0, 1 << q),
            );
            for g in [xi, zi] {
                r = lcm(r, orbit_len(self, &g));
            }
        }
        r
    }

    /// Partition of the qubits into minimal sets closed under the cycle's action
    /// (gate supports and idle singletons), sorted by smallest qubit.
    pub fn blocks(&self) -> Vec<QubitSubset> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for q in 0..self.n {
            let (xi, zi) = self.generator_images(q);
            for r in xi.support().into_iter().chain(zi.support()) {
                let (a, b) = (find(&mut parent, q), find(&mut parent, r));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_of = vec![usize::MAX; self.n];
        for q in 0..self.n {
            let r = find(&mut parent, q);
            if root_of[r] == usize::MAX {
                root_of[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[root_of[r]].push(q);
        }
        // keep CNOT orientation (control first) where available
        groups
            .into_iter()
            .map(|g| {
                let gate = self
                    .gates()
                    .and_then(|gs| gs.iter().find(|(c, t)| g.len() == 2 && g.contains(c) && g.contains(t)));
                let ordered = match gate {
                    Some(&(c, t)) => vec![c, t],
                    None => g,
                };
                QubitSubset::new(ordered).expect("distinct")
            })
            .collect()
    }

    /// Check that `subset` does not split the support of any gate.
    pub fn check_closed(&self, subset: &QubitSubset) -> Result<()> {
        subset.validate(self.n)?;
        let mask = subset.mask();
        for &q in subset.indices() {
            let (xi, zi) = self.generator_images(q);
            if (xi.support_mask() | zi.support_mask()) & !mask != 0 {
                return Err(Error::UnsupportedSubset(format!(
                    "subset {subset} is not closed under the cycle (qubit {q})"
                )));
            }
        }
        Ok(())
    }

    /// The action induced on `ℙ_S` for a closed subset `S`.
    pub fn induced(&self, subset: &QubitSubset) -> Result<HardCycle> {
        self.check_closed(subset)?;
        if let Action::Cnots(gates) = &self.action {
            let pos = |q: usize| subset.indices().iter().position(|&s| s == q);
            let local = gates
                .iter()
                .filter_map(|&(c, t)| Some((pos(c)?, pos(t)?)))
                .collect();
            return HardCycle::cnots(subset.len(), local);
        }
        let mut x_images = Vec::with_capacity(subset.len());
        let mut z_images = Vec::with_capacity(subset.len());
        for &q in subset.indices() {
            let (xi, zi) = self.generator_images(q);
            x_images.push(xi.restrict_unchecked(subset));
            z_images.push(zi.restrict_unchecked(subset));
        }
        HardCycle::from_tableau(x_images, z_images)
    }

    /// Orbit of `p`: `{H^k(p)}` ordered from its lexicographically least member.
    pub fn orbit(&self, p: &PauliOperator) -> Result<Orbit> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        Ok(Orbit::generate(self, p))
    }

    /// Partition of `ℙ_S` into orbits of the induced action, sorted by representative
    /// (the identity orbit comes first).
    pub fn enumerate_orbits(&self, subset: &QubitSubset) -> Result<Vec<Orbit>> {
        let local = self.induced(subset)?;
        let k = subset.len();
        if 2 * k > 24 {
            return Err(Error::DimensionTooLarge { n: k, limit: 12 });
        }
        let mut seen = vec![false; 1 << (2 * k)];
        let mut orbits = Vec::new();
        for p in PauliOperator::all(k) {
            if seen[p.index()] {
                continue;
            }
            let o = Orbit::generate(&local, &p);
            for m in o.members() {
                seen[m.index()] = true;
            }
            orbits.push(o);
        }
        orbits.sort_by(|a, b| a.representative().cmp(b.representative()));
        Ok(orbits)
    }
}

fn orbit_len(h: &HardCycle, p: &PauliOperator) -> usize {
    let mut q = h.conjugate_unchecked(p);
    let mut len = 1;
    while q != *p {
        q = h.conjugate_unchecked(&q);
        len += 1;
    }
    len
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl fmt::Display for HardCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.action {
            Action::Cnots(gates) => {
                let g: Vec<String> = gates.iter().map(|(c, t)| format!("{c}-{t}")).collect();
                write!(f, "cnot:{}:{}", self.n, g.join(","))
            }
            Action::Tableau { x_images, z_images } => {
                let x: Vec<String> = x_images.iter().map(|p| p.to_string()).collect();
                let z: Vec<String> = z_images.iter().map(|p| p.to_string()).collect();
                write!(f, "tableau:{}:{}", x.join(","), z.join(","))
            }
        }
    }
}

impl FromStr for HardCycle {
    type Err = Error;

    /// Accepts `transversal7`, `single`, `transversal:<pairs>`, `identity:<n>`,
    /// `cnot:<n>:<c>-<t>,...` and `tableau:<X images>:<Z images>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |m: &str| Error::parse(0, format!("bad cycle {s:?}: {m}"));
        match s {
            "transversal7" => return Ok(HardCycle::transversal7()),
            "single" => return Ok(HardCycle::single_cnot()),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["transversal", k] => HardCycle::transversal(k.parse().map_err(|_| bad("pair count"))?),
            ["identity", n] => HardCycle::identity(n.parse().map_err(|_| bad("qubit count"))?),
            ["cnot", n, gates] => {
                let n = n.parse().map_err(|_| bad("qubit count"))?;
                let mut g = Vec::new();
                for tok in gates.split(',').filter(|t| !t.trim().is_empty()) {
                    let (c, t) = tok.split_once('-').ok_or_else(|| bad("gate must be c-t"))?;
                    g.push((
                        c.trim().parse().map_err(|_| bad("control"))?,
                        t.trim().parse().map_err(|_| bad("target"))?,
                    ));
                }
                HardCycle::cnots(n, g)
            }
            ["tableau", xs, zs] => {
                let parse = |l: &str| -> Result<Vec<PauliOperator>> {
                    l.split(',').map(|t| t.parse()).collect()
                };
                HardCycle::from_tableau(parse(xs)?, parse(zs)?)
            }
            _ => Err(bad("unknown form")),
        }
    }
}

/// The orbit `{H^k(P)}` of a Pauli; `members[k] = H^k(members[0])`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Orbit {
    members: Vec<PauliOperator>,
}

impl Orbit {
    fn generate(h: &HardCycle, p: &PauliOperator) -> Orbit {
        let mut members = vec![*p];
        let mut q = h.conjugate_unchecked(p);
        while q != *p {
            members.push(q);
            q = h.conjugate_unchecked(&q);
        }
        let start = members
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        members.rotate_left(start);
        Orbit { members }
    }

    /// Build an orbit from explicit members, verifying closure under `h`.
    pub fn from_members(h: &HardCycle, members: &[PauliOperator]) -> Result<Orbit> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidSubset("empty orbit".into()))?;
        let o = h.orbit(first)?;
        let set: BTreeSet<_> = members.iter().collect();
        let expect: BTreeSet<_> = o.members.iter().collect();
        if set != expect || set.len() != members.len() {
            return Err(Error::InvalidSubset(format!(
                "members do not form an orbit of {first}"
            )));
        }
        Ok(o)
    }

    pub fn members(&self) -> &[PauliOperator] {
        &self.members
    }

    pub fn representative(&self) -> &PauliOperator {
        &self.members[0]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.members[0].is_identity()
    }

    pub fn num_qubits(&self) -> usize {
        self.members[0].num_qubits()
    }

    pub fn contains(&self, p: &PauliOperator) -> bool {
        self.members.contains(p)
    }

    /// Orbit of the embedding of this (subset-local) orbit into an `n`-qubit register.
    pub fn embed(&self, h: &HardCycle, subset: &QubitSubset) -> Result<Orbit> {
        h.orbit(&self.members[0].embed(subset, h.num_qubits())?)
    }
}

impl fmt::Display for Orbit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m: Vec<String> = self.members.iter().map(|p| p.to_string()).collect();
        write!(f, "{{{}}}", m.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    fn labels(o: &Orbit) -> Vec<String> {
        o.members().iter().map(|m| m.to_string()).collect()
    }

    #[test]
    fn cnot_conjugation() {
        let h = HardCycle::single_cnot();
        assert_eq!(h.conjugate(&p("XI")).unwrap(), p("XX"));
        assert_eq!(h.conjugate(&p("IX")).unwrap(), p("IX"));
        assert_eq!(h.conjugate(&p("IZ")).unwrap(), p("ZZ"));
        assert_eq!(h.conjugate(&p("ZI")).unwrap(), p("ZI"));
        for q in PauliOperator::all(2) {
            assert_eq!(h.conjugate_pow(&q, 2).unwrap(), q);
        }
        assert!(h.conjugate(&p("XII")).is_err());
    }

    #[test]
    fn orbit_examples() {
        let h = HardCycle::single_cnot();
        assert_eq!(labels(&h.orbit(&p("XI")).unwrap()), ["XI", "XX"]);
        assert_eq!(labels(&h.orbit(&p("XX")).unwrap()), ["XI", "XX"]);
        assert_eq!(labels(&h.orbit(&p("YZ")).unwrap()), ["XY", "YZ"]);
        assert_eq!(labels(&h.orbit(&p("IX")).unwrap()), ["IX"]);
    }

    #[test]
    fn orders() {
        assert_eq!(HardCycle::transversal7().order(), 2);
        assert_eq!(HardCycle::identity(3).unwrap().order(), 1);
        assert_eq!(HardCycle::single_cnot().order(), 2);
        // X0 -> X1 -> X2 -> X0 cyclic shift
        let shift = HardCycle::from_tableau(
            vec![p("IXI"), p("IIX"), p("XII")],
            vec![p("IZI"), p("IIZ"), p("ZII")],
        )
        .unwrap();
        assert_eq!(shift.order(), 3);
    }

    #[test]
    fn enumerate_orbit_counts() {
        let h = HardCycle::single_cnot();
        let orbits = h.enumerate_orbits(&QubitSubset::full(2)).unwrap();
        assert_eq!(orbits.len(), 10);
        assert!(orbits[0].is_identity());

        let t = HardCycle::transversal7();
        let s: QubitSubset = "0,9,1,10".parse().unwrap();
        let orbits = t.enumerate_orbits(&s).unwrap();
        assert_eq!(orbits.iter().map(Orbit::len).sum::<usize>(), 256);
        assert_eq!(orbits.len(), 136);

        let id = HardCycle::identity(1).unwrap();
        assert_eq!(id.enumerate_orbits(&QubitSubset::full(1)).unwrap().len(), 4);
    }

    #[test]
    fn split_gate_rejected() {
        let t = HardCycle::transversal7();
        let s: QubitSubset = "0,1".parse().unwrap();
        assert!(matches!(t.enumerate_orbits(&s), Err(Error::UnsupportedSubset(_))));
        assert!(t.enumerate_orbits(&"7".parse().unwrap()).is_ok());
    }

    #[test]
    fn blocks_of_transversal() {
        let b = HardCycle::transversal7().blocks();
        assert_eq!(b.len(), 9);
        assert_eq!(b[0].indices(), &[0, 9]);
        assert_eq!(b[6].indices(), &[6, 15]);
        assert_eq!(b[7].indices(), &[7]);
        assert_eq!(b[8].indices(), &[8]);
    }

    #[test]
    fn reversed_gate_keeps_control_first() {
        let h = HardCycle::cnots(2, vec![(1, 0)]).unwrap();
        assert_eq!(h.blocks()[0].indices(), &[1, 0]);
    }

    #[test]
    fn overlapping_gates_rejected() {
        assert!(HardCycle::cnots(3, vec![(0, 1), (1, 2)]).is_err());
        assert!(HardCycle::cnots(2, vec![(0, 0)]).is_err());
        assert!(HardCycle::from_tableau(vec![p("X")], vec![p("X")]).is_err());
    }

    #[test]
    fn parse_forms() {
        let h: HardCycle = "cnot:4:0-2,1-3".parse().unwrap();
        assert_eq!(h.to_string(), "cnot:4:0-2,1-3");
        let again: HardCycle = h.to_string().parse().unwrap();
        assert_eq!(again, h);
        assert_eq!("transversal7".parse::<HardCycle>().unwrap(), HardCycle::transversal7());
        assert_eq!("identity:2".parse::<HardCycle>().unwrap().order(), 1);
        assert!("bogus".parse::<HardCycle>().is_err());
    }

    #[test]
    fn induced_tableau_matches_cnot_path() {
        let t = HardCycle::transversal7();
        let s: QubitSubset = "1,10".parse().unwrap();
        let local = t.induced(&s).unwrap();
        for q in PauliOperator::all(2) {
            let full = q.embed(&s, 16).unwrap();
            assert_eq!(
                t.conjugate(&full).unwrap().restrict(&s).unwrap(),
                local.conjugate(&q).unwrap()
            );
        }
    }
}
