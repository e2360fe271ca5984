//! Two [[7,1,3]] Steane blocks joined by a transversal CNOT.
//!
//! Block A sits on qubits 0..7 (controls), block B on 9..16 (targets);
//! qubits 7 and 8 are idle and carry no code.

use std::fmt;

use crate::cycle::{HardCycle, Orbit};
use crate::error::{Error, Result};
use crate::pauli::PauliOperator;

/// Parity checks of the [7,4] Hamming code; qubit `j` of a block is bit `j`.
pub const HAMMING_ROWS: [u8; 3] = [0x78, 0x66, 0x55];
/// Logical representative `111_0000` (all-ones reduced by the first row).
pub const LOGICAL_SUPPORT: u8 = 0x07;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorClass {
    Correctable,
    Uncorrectable,
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorClass::Correctable => "correctable",
            ErrorClass::Uncorrectable => "uncorrectable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteaneCodePair {
    n: usize,
    blocks: [[usize; 7]; 2],
    stabilizers: Vec<PauliOperator>,
    logical_x: [PauliOperator; 2],
    logical_z: [PauliOperator; 2],
}

impl Default for SteaneCodePair {
    fn default() -> Self {
        Self::new()
    }
}

impl SteaneCodePair {
    pub fn new() -> Self {
        let n = 16;
        let blocks = [[0, 1, 2, 3, 4, 5, 6], [9, 10, 11, 12, 13, 14, 15]];
        let spread = |block: &[usize; 7], bits: u8| -> u64 {
            (0..7).filter(|j| bits >> j & 1 == 1).fold(0, |m, j| m | 1 << block[j])
        };
        let mut stabilizers = Vec::with_capacity(12);
        for b in &blocks {
            for &row in &HAMMING_ROWS {
                stabilizers.push(PauliOperator::from_masks_unchecked(n, spread(b, row), 0));
            }
            for &row in &HAMMING_ROWS {
                stabilizers.push(PauliOperator::from_masks_unchecked(n, 0, spread(b, row)));
            }
        }
        let lx = blocks.map(|b| PauliOperator::from_masks_unchecked(n, spread(&b, LOGICAL_SUPPORT), 0));
        let lz = blocks.map(|b| PauliOperator::from_masks_unchecked(n, 0, spread(&b, LOGICAL_SUPPORT)));
        SteaneCodePair {
            n,
            blocks,
            stabilizers,
            logical_x: lx,
            logical_z: lz,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[[usize; 7]; 2] {
        &self.blocks
    }

    /// Six generators per block: three X-type, then three Z-type.
    pub fn stabilizers(&self) -> &[PauliOperator] {
        &self.stabilizers
    }

    pub fn logical_x(&self, block: usize) -> &PauliOperator {
        &self.logical_x[block]
    }

    pub fn logical_z(&self, block: usize) -> &PauliOperator {
        &self.logical_z[block]
    }

    pub fn code_mask(&self) -> u64 {
        self.blocks.iter().flatten().fold(0, |m, &q| m | 1 << q)
    }

    fn check(&self, e: &PauliOperator) -> Result<()> {
        if e.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: e.num_qubits(),
            });
        }
        let outside = e.support_mask() & !self.code_mask();
        if outside != 0 {
            return Err(Error::OutsideCode(outside.trailing_zeros() as usize));
        }
        Ok(())
    }

    /// X and Z bits of `e` on one block, as 7-bit words.
    fn local(&self, e: &PauliOperator, block: usize) -> (u8, u8) {
        let gather = |mask: u64| {
            self.blocks[block]
                .iter()
                .enumerate()
                .fold(0u8, |w, (j, &q)| w | (((mask >> q) & 1) as u8) << j)
        };
        (gather(e.x_mask()), gather(e.z_mask()))
    }

    /// Anticommutation with each stabilizer generator, bit `i` for generator `i`.
    pub fn syndrome(&self, e: &PauliOperator) -> Result<u16> {
        self.check(e)?;
        Ok(self
            .stabilizers
            .iter()
            .enumerate()
            .fold(0u16, |s, (i, g)| s | (e.omega_unchecked(g) as u16) << i))
    }

    /// Correctable iff, on each block, both the X part and the Z part lie within
    /// Hamming distance one of the stabilizer span.
    pub fn classify_error(&self, e: &PauliOperator) -> Result<ErrorClass> {
        self.check(e)?;
        let span = stabilizer_span();
        let near = |w: u8| span.iter().any(|s| (w ^ s).count_ones() <= 1);
        for b in 0..2 {
            let (x, z) = self.local(e, b);
            if !near(x) || !near(z) {
                return Ok(ErrorClass::Uncorrectable);
            }
        }
        Ok(ErrorClass::Correctable)
    }

    /// Syndrome lookup decoding with single-qubit corrections, followed by a
    /// check of the residual against the logical operators.
    pub fn decoder_oracle(&self, e: &PauliOperator) -> Result<ErrorClass> {
        let s = self.syndrome(e)?;
        let table = self.lookup();
        let mut correction = PauliOperator::identity(self.n);
        for (b, fixes) in table.iter().enumerate() {
            for (kind, shift) in [(0usize, 6 * b + 3), (1, 6 * b)] {
                // Z-type checks (bits 3..6 of the block) see X errors, and vice versa.
                let key = ((s >> shift) & 0b111) as usize;
                if key != 0 {
                    let fix = fixes[kind][key].ok_or(Error::Unsatisfiable(format!("syndrome {key} has no single-qubit correction")))?;
                    correction = correction.mul_unchecked(&fix);
                }
            }
        }
        let residual = e.mul_unchecked(&correction);
        debug_assert_eq!(self.syndrome(&residual).ok(), Some(0));
        for b in 0..2 {
            if residual.omega_unchecked(&self.logical_x[b]) == 1 || residual.omega_unchecked(&self.logical_z[b]) == 1 {
                return Ok(ErrorClass::Uncorrectable);
            }
        }
        Ok(ErrorClass::Correctable)
    }

    /// `table[block][kind][syndrome]`, with kind 0 for X errors and 1 for Z errors,
    /// built by computing the syndrome of every single-qubit error.
    fn lookup(&self) -> [[[Option<PauliOperator>; 8]; 2]; 2] {
        let mut table = [[[None; 8]; 2]; 2];
        for (b, block) in self.blocks.iter().enumerate() {
            for &q in block {
                let x = PauliOperator::from_masks_unchecked(self.n, 1 << q, 0);
                let z = PauliOperator::from_masks_unchecked(self.n, 0, 1 << q);
                let sx = (self.syndrome(&x).expect("code qubit") >> (6 * b + 3)) & 0b111;
                let sz = (self.syndrome(&z).expect("code qubit") >> (6 * b)) & 0b111;
                table[b][0][sx as usize].get_or_insert(x);
                table[b][1][sz as usize].get_or_insert(z);
            }
        }
        table
    }

    /// Worst case over the orbit's members.
    pub fn classify_orbit(&self, h: &HardCycle, orbit: &Orbit) -> Result<ErrorClass> {
        if h.num_qubits() != self.n || orbit.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: orbit.num_qubits(),
            });
        }
        for p in orbit.members() {
            if self.classify_error(p)? == ErrorClass::Uncorrectable {
                return Ok(ErrorClass::Uncorrectable);
            }
        }
        Ok(ErrorClass::Correctable)
    }
}

/// The 8 words spanned by the Hamming parity checks.
fn stabilizer_span() -> [u8; 8] {
    let mut span = [0u8; 8];
    for (k, s) in span.iter_mut().enumerate() {
        *s = (0..3).filter(|i| k >> i & 1 == 1).fold(0, |w, i| w ^ HAMMING_ROWS[i]);
    }
    span
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Letter;

    fn op(terms: &[(usize, Letter)]) -> PauliOperator {
        PauliOperator::from_sparse(16, terms).unwrap()
    }

    #[test]
    fn code_structure() {
        let c = SteaneCodePair::new();
        assert_eq!(c.stabilizers().len(), 12);
        for a in c.stabilizers() {
            for b in c.stabilizers() {
                assert!(a.commutes_with(b).unwrap());
            }
            for k in 0..2 {
                assert!(a.commutes_with(c.logical_x(k)).unwrap());
                assert!(a.commutes_with(c.logical_z(k)).unwrap());
            }
        }
        assert!(!c.logical_x(0).commutes_with(c.logical_z(0)).unwrap());
        assert!(c.logical_x(0).commutes_with(c.logical_z(1)).unwrap());
    }

    #[test]
    fn single_qubit_syndromes_are_distinct() {
        let c = SteaneCodePair::new();
        let mut seen = std::collections::BTreeSet::new();
        for q in c.blocks()[0] {
            for l in [Letter::X, Letter::Y, Letter::Z] {
                let e = op(&[(q, l)]);
                let s = c.syndrome(&e).unwrap();
                assert_ne!(s, 0);
                assert!(seen.insert(s));
                assert_eq!(c.decoder_oracle(&e).unwrap(), ErrorClass::Correctable);
            }
        }
        assert_eq!(seen.len(), 21);
    }

    #[test]
    fn cited_verdicts() {
        let c = SteaneCodePair::new();
        let x0x1 = op(&[(0, Letter::X), (1, Letter::X)]);
        let x0x9 = op(&[(0, Letter::X), (9, Letter::X)]);
        let x0z10 = op(&[(0, Letter::X), (10, Letter::Z)]);
        for f in [SteaneCodePair::classify_error, SteaneCodePair::decoder_oracle] {
            assert_eq!(f(&c, &op(&[(0, Letter::X)])).unwrap(), ErrorClass::Correctable);
            assert_eq!(f(&c, &x0x1).unwrap(), ErrorClass::Uncorrectable);
            assert_eq!(f(&c, &x0x9).unwrap(), ErrorClass::Correctable);
            assert_eq!(f(&c, &x0z10).unwrap(), ErrorClass::Correctable);
            assert_eq!(f(&c, c.logical_x(0)).unwrap(), ErrorClass::Uncorrectable);
        }
        for s in c.stabilizers() {
            assert_eq!(c.syndrome(s).unwrap(), 0);
            assert_eq!(c.decoder_oracle(s).unwrap(), ErrorClass::Correctable);
        }
    }

    #[test]
    fn idle_qubits_rejected() {
        let c = SteaneCodePair::new();
        assert!(matches!(c.classify_error(&op(&[(8, Letter::Z)])), Err(Error::OutsideCode(8))));
    }

    #[test]
    fn orbit_worst_case() {
        let c = SteaneCodePair::new();
        let h = HardCycle::transversal7();
        let o = h.orbit(&op(&[(0, Letter::X)])).unwrap();
        assert_eq!(o.len(), 2);
        assert_eq!(c.classify_orbit(&h, &o).unwrap(), ErrorClass::Correctable);
        let o = h.orbit(&op(&[(0, Letter::X), (1, Letter::X)])).unwrap();
        assert_eq!(c.classify_orbit(&h, &o).unwrap(), ErrorClass::Uncorrectable);
        let id = h.orbit(&PauliOperator::identity(16)).unwrap();
        assert_eq!(c.classify_orbit(&h, &id).unwrap(), ErrorClass::Correctable);
    }
}
