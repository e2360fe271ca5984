//! Small-register processes as Pauli-transfer matrices.
//!
//! Rows and columns are indexed by [`PauliOperator::index`] over the Hermitian
//! Pauli basis, `R_ij = Tr(σ_i Φ(σ_j)) / 2^n`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::PauliChannel;
use crate::cycle::HardCycle;
use crate::error::{Error, Result};
use crate::pauli::PauliOperator;
use crate::wht;

pub const DENSE_PROCESS_LIMIT: usize = 4;

fn check_size(n: usize) -> Result<()> {
    if n > DENSE_PROCESS_LIMIT {
        return Err(Error::DimensionTooLarge {
            n,
            limit: DENSE_PROCESS_LIMIT,
        });
    }
    Ok(())
}

/// `σ|c⟩ = phase(σ, c) |c ⊕ x⟩`, qubit `q` on bit `q` of the basis index.
fn phase(p: &PauliOperator, c: usize) -> Complex64 {
    let ys = (p.x_mask() & p.z_mask()).count_ones() % 4;
    let base = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ][ys as usize];
    if (c as u64 & p.z_mask()).count_ones() % 2 == 1 {
        -base
    } else {
        base
    }
}

/// Matrix of a Hermitian Pauli operator on `2^n` amplitudes.
pub fn pauli_matrix(p: &PauliOperator) -> DMatrix<Complex64> {
    let d = 1usize << p.num_qubits();
    let x = p.x_mask() as usize;
    let mut m = DMatrix::zeros(d, d);
    for c in 0..d {
        m[(c ^ x, c)] = phase(p, c);
    }
    m
}

/// Unitary of a gate-level cycle.
pub fn cycle_unitary(h: &HardCycle) -> Result<DMatrix<Complex64>> {
    let n = h.num_qubits();
    check_size(n)?;
    let gates = h
        .gates()
        .ok_or_else(|| Error::InvalidCycle("dense simulation needs a gate-level cycle".into()))?;
    let d = 1usize << n;
    let mut u = DMatrix::zeros(d, d);
    for b in 0..d {
        let mut out = b;
        for &(c, t) in gates {
            out ^= ((out >> c) & 1) << t;
        }
        u[(out, b)] = Complex64::new(1.0, 0.0);
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseProcess {
    n: usize,
    matrix: DMatrix<f64>,
}

impl DenseProcess {
    pub fn identity(n: usize) -> Result<Self> {
        check_size(n)?;
        let dim = 1 << (2 * n);
        Ok(DenseProcess {
            n,
            matrix: DMatrix::identity(dim, dim),
        })
    }

    /// Wrap a transfer matrix; only the trace-preserving identity row is checked.
    pub fn from_matrix(n: usize, matrix: DMatrix<f64>) -> Result<Self> {
        check_size(n)?;
        let dim = 1 << (2 * n);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::InvalidChannel(format!(
                "transfer matrix is {}x{}, expected {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for j in 0..dim {
            let expect = if j == 0 { 1.0 } else { 0.0 };
            if (matrix[(0, j)] - expect).abs() > 1e-9 {
                return Err(Error::InvalidChannel("process is not trace preserving".into()));
            }
        }
        Ok(DenseProcess { n, matrix })
    }

    /// `ρ ↦ U ρ U†`.
    pub fn from_unitary(n: usize, u: &DMatrix<Complex64>) -> Result<Self> {
        check_size(n)?;
        let d = 1usize << n;
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: u.nrows(),
            });
        }
        let dim = d * d;
        let udag = u.adjoint();
        let paulis: Vec<PauliOperator> = PauliOperator::all(n).collect();
        let mut r = DMatrix::zeros(dim, dim);
        for (j, pj) in paulis.iter().enumerate() {
            let m = u * pauli_matrix(pj) * &udag;
            for (i, pi) in paulis.iter().enumerate() {
                let x = pi.x_mask() as usize;
                let mut t = Complex64::new(0.0, 0.0);
                for b in 0..d {
                    let c = b ^ x;
                    t += phase(pi, c) * m[(c, b)];
                }
                r[(i, j)] = t.re / d as f64;
            }
        }
        Ok(DenseProcess { n, matrix: r })
    }

    /// `exp(-i·angle·P/2)` as a process.
    pub fn unitary_process(generator: &PauliOperator, angle: f64) -> Result<Self> {
        let n = generator.num_qubits();
        check_size(n)?;
        let d = 1usize << n;
        let id = DMatrix::<Complex64>::identity(d, d);
        let u = id * Complex64::new((angle / 2.0).cos(), 0.0)
            - pauli_matrix(generator) * Complex64::new(0.0, (angle / 2.0).sin());
        DenseProcess::from_unitary(n, &u)
    }

    pub fn from_cycle(h: &HardCycle) -> Result<Self> {
        DenseProcess::from_unitary(h.num_qubits(), &cycle_unitary(h)?)
    }

    /// Diagonal transfer matrix of a Pauli channel.
    pub fn from_pauli_channel(c: &PauliChannel) -> Result<Self> {
        check_size(c.num_qubits())?;
        let lambdas = c.eigenvalues_dense()?;
        Ok(DenseProcess {
            n: c.num_qubits(),
            matrix: DMatrix::from_diagonal(&DVector::from_vec(lambdas)),
        })
    }

    /// Conjugation by a single Pauli operator.
    pub fn pauli_gate(p: &PauliOperator) -> Result<Self> {
        let n = p.num_qubits();
        check_size(n)?;
        let diag: Vec<f64> = PauliOperator::all(n)
            .map(|q| if p.omega_unchecked(&q) == 1 { -1.0 } else { 1.0 })
            .collect();
        Ok(DenseProcess {
            n,
            matrix: DMatrix::from_diagonal(&DVector::from_vec(diag)),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Apply `self` then `next`.
    pub fn then(&self, next: &DenseProcess) -> Result<DenseProcess> {
        if next.n != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: next.n,
            });
        }
        Ok(DenseProcess {
            n: self.n,
            matrix: &next.matrix * &self.matrix,
        })
    }

    /// Diagonal entry `R_PP`, the Pauli eigenvalue of the twirled process.
    pub fn eigenvalue(&self, p: &PauliOperator) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        Ok(self.matrix[(p.index(), p.index())])
    }

    /// Propagate a Pauli-vector state `r_i = Tr(σ_i ρ)`.
    pub fn apply(&self, state: &DVector<f64>) -> DVector<f64> {
        &self.matrix * state
    }

    /// Pauli twirl: transfer-matrix diagonal mapped back to error probabilities.
    pub fn twirl(&self) -> Result<PauliChannel> {
        let diag: Vec<f64> = self.matrix.diagonal().iter().copied().collect();
        let probs = wht::probabilities_from_eigenvalues(self.n, &diag);
        if let Some(&worst) = probs.iter().min_by(|a, b| a.total_cmp(b)) {
            if worst < -crate::channel::NEGATIVE_TOLERANCE {
                return Err(Error::NonPhysicalProcess(worst));
            }
        }
        PauliChannel::from_dense(self.n, &probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    #[test]
    fn zero_angle_is_identity() {
        let d = DenseProcess::unitary_process(&p("ZX"), 0.0).unwrap();
        let id = DenseProcess::identity(2).unwrap();
        assert!((d.matrix() - id.matrix()).abs().max() < 1e-14);
        assert_eq!(d.twirl().unwrap(), PauliChannel::identity(2));
    }

    #[test]
    fn full_rotation_is_pauli_gate() {
        let d = DenseProcess::unitary_process(&p("ZX"), std::f64::consts::PI).unwrap();
        let g = DenseProcess::pauli_gate(&p("ZX")).unwrap();
        assert!((d.matrix() - g.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn rotation_eigenvalues_and_twirl() {
        let theta = 0.3;
        let zx = p("ZX");
        let d = DenseProcess::unitary_process(&zx, theta).unwrap();
        for q in PauliOperator::all(2) {
            let want = if zx.commutes_with(&q).unwrap() { 1.0 } else { theta.cos() };
            assert!((d.eigenvalue(&q).unwrap() - want).abs() < 1e-12, "{q}");
        }
        let t = d.twirl().unwrap();
        assert!((t.probability(&p("II")) - (theta / 2.0).cos().powi(2)).abs() < 1e-12);
        assert!((t.probability(&zx) - (theta / 2.0).sin().powi(2)).abs() < 1e-12);
        assert_eq!(t.support_size(), 2);
    }

    #[test]
    fn pauli_channel_round_trip() {
        let c = PauliChannel::new(2, [(p("II"), 0.9), (p("XY"), 0.07), (p("ZI"), 0.03)]).unwrap();
        let d = DenseProcess::from_pauli_channel(&c).unwrap();
        let back = d.twirl().unwrap();
        for (q, v) in c.terms() {
            assert!((back.probability(q) - v).abs() < 1e-14);
        }
    }

    #[test]
    fn cnot_transfer_matrix_permutes_paulis() {
        let h = HardCycle::single_cnot();
        let d = DenseProcess::from_cycle(&h).unwrap();
        for q in PauliOperator::all(2) {
            let image = h.conjugate(&q).unwrap();
            let col = d.matrix().column(q.index());
            assert!((col[image.index()].abs() - 1.0).abs() < 1e-12);
            assert!((col.abs().sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_large_rejected() {
        assert!(matches!(
            DenseProcess::identity(5),
            Err(Error::DimensionTooLarge { .. })
        ));
    }
}
