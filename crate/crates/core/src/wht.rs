//! Fast Walsh–Hadamard transform specialised to the Pauli symplectic form.
//!
//! Dense vectors are indexed by [`PauliOperator::index`](crate::pauli::PauliOperator::index).
//! With `F[a] = Σ_b (-1)^{a·b} f[b]` the plain transform over `2n` bits, the Pauli
//! transform `λ_P = Σ_Q (-1)^{ω(P,Q)} p_Q` is `F` read at the x/z-swapped index of `P`.

/// In-place unnormalised Walsh–Hadamard transform. `data.len()` must be a power of two.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

#[inline]
fn swap_xz(n: usize, i: usize) -> usize {
    let m = (1usize << n) - 1;
    (i >> n) | ((i & m) << n)
}

fn pauli_transform(n: usize, input: &[f64]) -> Vec<f64> {
    assert_eq!(input.len(), 1 << (2 * n));
    let mut f = input.to_vec();
    fwht(&mut f);
    (0..f.len()).map(|i| f[swap_xz(n, i)]).collect()
}

/// Eigenvalues `λ_P` of the Pauli channel with dense probabilities `probs`.
pub fn eigenvalues_from_probabilities(n: usize, probs: &[f64]) -> Vec<f64> {
    pauli_transform(n, probs)
}

/// Probabilities `p_Q = 4^{-n} Σ_P (-1)^{ω(P,Q)} λ_P`.
pub fn probabilities_from_eigenvalues(n: usize, lambdas: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (1usize << (2 * n)) as f64;
    pauli_transform(n, lambdas)
        .into_iter()
        .map(|v| v * scale)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliOperator;

    #[test]
    fn matches_direct_sum() {
        let n = 2;
        let probs: Vec<f64> = (0..16).map(|i| (i as f64 + 1.0) / 136.0).collect();
        let fast = eigenvalues_from_probabilities(n, &probs);
        for p in PauliOperator::all(n) {
            let direct: f64 = PauliOperator::all(n)
                .map(|q| if p.omega(&q).unwrap() == 1 { -probs[q.index()] } else { probs[q.index()] })
                .sum();
            assert!((fast[p.index()] - direct).abs() < 1e-14);
        }
        let back = probabilities_from_eigenvalues(n, &fast);
        for (a, b) in back.iter().zip(&probs) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn plain_transform_is_involutive_up_to_scale() {
        let mut v = vec![1.0, -2.0, 0.5, 4.0, 0.0, 0.0, 3.0, 1.0];
        let orig = v.clone();
        fwht(&mut v);
        fwht(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a / 8.0 - b).abs() < 1e-15);
        }
    }
}
