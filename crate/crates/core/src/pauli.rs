//! n-qubit Pauli operators modulo phase in the symplectic bit representation.
//!
//! Qubit `q` is stored in bit `q` of the `x` and `z` masks. The text form
//! writes qubit 0 first, so `"ZXIY"` is `Z` on qubit 0 and `Y` on qubit 3.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest register supported by the bitmask representation.
pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const NON_IDENTITY: [Letter; 3] = [Letter::X, Letter::Y, Letter::Z];

    pub fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (false, true) => Letter::Z,
            (true, true) => Letter::Y,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Z => (false, true),
            Letter::Y => (true, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'I' | 'i' | '_' => Some(Letter::I),
            'X' | 'x' => Some(Letter::X),
            'Y' | 'y' => Some(Letter::Y),
            'Z' | 'z' => Some(Letter::Z),
            _ => None,
        }
    }
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// An element of the n-qubit Pauli group with the phase discarded.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        assert!((1..=MAX_QUBITS).contains(&n), "qubit count {n} outside 1..=64");
        PauliOperator { n, x: 0, z: 0 }
    }

    pub fn from_masks(n: usize, x: u64, z: u64) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::DimensionTooLarge {
                n,
                limit: MAX_QUBITS,
            });
        }
        let m = low_mask(n);
        if x & !m != 0 || z & !m != 0 {
            return Err(Error::IndexOutOfRange {
                index: 63 - (x | z).leading_zeros() as usize,
                n,
            });
        }
        Ok(PauliOperator { n, x, z })
    }

    pub(crate) fn from_masks_unchecked(n: usize, x: u64, z: u64) -> Self {
        debug_assert!(x & !low_mask(n) == 0 && z & !low_mask(n) == 0);
        PauliOperator { n, x, z }
    }

    /// Single-letter Pauli on qubit `q` of an `n`-qubit register.
    pub fn single(n: usize, q: usize, letter: Letter) -> Result<Self> {
        let mut p = PauliOperator::identity(n);
        p.set(q, letter)?;
        Ok(p)
    }

    /// Build from `(qubit, letter)` pairs; later entries overwrite earlier ones.
    pub fn from_sparse(n: usize, terms: &[(usize, Letter)]) -> Result<Self> {
        let mut p = PauliOperator::identity(n);
        for &(q, l) in terms {
            p.set(q, l)?;
        }
        Ok(p)
    }

    pub fn from_letters(letters: &[Letter]) -> Result<Self> {
        let mut p = PauliOperator::identity(letters.len().max(1));
        if letters.len() > MAX_QUBITS {
            return Err(Error::DimensionTooLarge {
                n: letters.len(),
                limit: MAX_QUBITS,
            });
        }
        for (q, &l) in letters.iter().enumerate() {
            p.set(q, l)?;
        }
        Ok(p)
    }

    /// Dense index in `0..4^n`: the low `n` bits hold `x`, the next `n` bits hold `z`.
    pub fn from_index(n: usize, index: usize) -> Self {
        debug_assert!(2 * n < usize::BITS as usize);
        let m = low_mask(n) as usize;
        PauliOperator {
            n,
            x: (index & m) as u64,
            z: ((index >> n) & m) as u64,
        }
    }

    pub fn index(&self) -> usize {
        (self.x as usize) | ((self.z as usize) << self.n)
    }

    /// All `4^n` Paulis on `n` qubits in dense-index order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliOperator> {
        (0..1usize << (2 * n)).map(move |i| PauliOperator::from_index(n, i))
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn support_mask(&self) -> u64 {
        self.x | self.z
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.support_mask() >> q & 1 == 1).collect()
    }

    pub fn weight(&self) -> usize {
        self.support_mask().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn letter(&self, q: usize) -> Letter {
        Letter::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n).map(|q| self.letter(q)).collect()
    }

    pub fn set(&mut self, q: usize, letter: Letter) -> Result<()> {
        if q >= self.n {
            return Err(Error::IndexOutOfRange { index: q, n: self.n });
        }
        let (x, z) = letter.bits();
        let bit = 1u64 << q;
        self.x = if x { self.x | bit } else { self.x & !bit };
        self.z = if z { self.z | bit } else { self.z & !bit };
        Ok(())
    }

    fn check_same(&self, other: &PauliOperator) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    /// Symplectic form: 1 when the operators anticommute, 0 when they commute.
    pub fn omega(&self, other: &PauliOperator) -> Result<u8> {
        self.check_same(other)?;
        Ok(self.omega_unchecked(other))
    }

    #[inline]
    pub(crate) fn omega_unchecked(&self, other: &PauliOperator) -> u8 {
        (((self.x & other.z) ^ (self.z & other.x)).count_ones() & 1) as u8
    }

    pub fn commutes_with(&self, other: &PauliOperator) -> Result<bool> {
        Ok(self.omega(other)? == 0)
    }

    /// Group product modulo phase.
    pub fn multiply(&self, other: &PauliOperator) -> Result<PauliOperator> {
        self.check_same(other)?;
        Ok(self.mul_unchecked(other))
    }

    #[inline]
    pub(crate) fn mul_unchecked(&self, other: &PauliOperator) -> PauliOperator {
        PauliOperator {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        }
    }

    /// Restriction to `subset`; position `k` of the result is qubit `subset[k]`.
    pub fn restrict(&self, subset: &QubitSubset) -> Result<PauliOperator> {
        if let Some(&q) = subset.indices().iter().find(|&&q| q >= self.n) {
            return Err(Error::IndexOutOfRange { index: q, n: self.n });
        }
        Ok(self.restrict_unchecked(subset))
    }

    pub(crate) fn restrict_unchecked(&self, subset: &QubitSubset) -> PauliOperator {
        let mut x = 0u64;
        let mut z = 0u64;
        for (k, &q) in subset.indices().iter().enumerate() {
            x |= (self.x >> q & 1) << k;
            z |= (self.z >> q & 1) << k;
        }
        PauliOperator::from_masks_unchecked(subset.len(), x, z)
    }

    /// Inverse of [`restrict`](Self::restrict): place a `|subset|`-qubit Pauli into an `n`-qubit register.
    pub fn embed(&self, subset: &QubitSubset, n: usize) -> Result<PauliOperator> {
        if subset.len() != self.n {
            return Err(Error::Dimension {
                expected: subset.len(),
                found: self.n,
            });
        }
        if let Some(&q) = subset.indices().iter().find(|&&q| q >= n) {
            return Err(Error::IndexOutOfRange { index: q, n });
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (k, &q) in subset.indices().iter().enumerate() {
            x |= (self.x >> k & 1) << q;
            z |= (self.z >> k & 1) << q;
        }
        Ok(PauliOperator::from_masks_unchecked(n, x, z))
    }
}

impl Ord for PauliOperator {
    /// Lexicographic on the text form (`I < X < Y < Z`, qubit 0 most significant).
    fn cmp(&self, other: &Self) -> Ordering {
        self.n.cmp(&other.n).then_with(|| {
            let diff = (self.x ^ other.x) | (self.z ^ other.z);
            if diff == 0 {
                return Ordering::Equal;
            }
            let q = diff.trailing_zeros() as usize;
            self.letter(q).cmp(&other.letter(q))
        })
    }
}

impl PartialOrd for PauliOperator {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pauli({self})")
    }
}

impl FromStr for PauliOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::parse(0, "empty Pauli string"));
        }
        let letters = s
            .chars()
            .map(|c| Letter::from_char(c).ok_or_else(|| Error::parse(0, format!("bad Pauli letter {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        PauliOperator::from_letters(&letters)
    }
}

/// Ordered list of distinct qubit indices; the order fixes the layout of restricted Paulis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitSubset {
    indices: Vec<usize>,
}

impl QubitSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSubset("empty subset".into()));
        }
        if indices.len() > MAX_QUBITS {
            return Err(Error::DimensionTooLarge {
                n: indices.len(),
                limit: MAX_QUBITS,
            });
        }
        let mut seen = 0u128;
        for &q in &indices {
            if q >= 128 || seen >> q & 1 == 1 {
                return Err(Error::InvalidSubset(format!("duplicate or invalid index {q}")));
            }
            seen |= 1 << q;
        }
        Ok(QubitSubset { indices })
    }

    /// `0..n` in natural order.
    pub fn full(n: usize) -> Self {
        QubitSubset {
            indices: (0..n).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn mask(&self) -> u64 {
        self.indices.iter().fold(0, |m, &q| m | 1u64 << q)
    }

    pub fn contains(&self, q: usize) -> bool {
        self.indices.contains(&q)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.indices.iter().find(|&&q| q >= n) {
            Some(&q) => Err(Error::IndexOutOfRange { index: q, n }),
            None => Ok(()),
        }
    }

    /// Composition of subsets: `inner` indexes positions of `self`.
    pub fn compose(&self, inner: &QubitSubset) -> Result<QubitSubset> {
        inner.validate(self.len())?;
        QubitSubset::new(inner.indices.iter().map(|&k| self.indices[k]).collect())
    }

    /// Union preserving the order of `self` followed by new indices of `other`.
    pub fn union(&self, other: &QubitSubset) -> QubitSubset {
        let mut indices = self.indices.clone();
        indices.extend(other.indices.iter().filter(|q| !self.contains(**q)));
        QubitSubset { indices }
    }
}

impl fmt::Display for QubitSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|q| q.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for QubitSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let indices = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::parse(0, format!("bad qubit index {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        QubitSubset::new(indices)
    }
}
