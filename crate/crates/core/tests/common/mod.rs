#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use steersim::linalg::kron_all;
use steersim::state::DensityMatrix;
use steersim::steering::{SettingStrength, StrengthHistory};
use steersim::{ComplexMatrix, Pauli};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G G† / Tr` for a matrix `G` with uniform entries; full rank almost surely.
pub fn random_density<R: Rng>(rng: &mut R, qubits: usize) -> DensityMatrix {
    let dim = 1 << qubits;
    let rows: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
        .collect();
    let g = ComplexMatrix::from_rows(&rows).unwrap();
    let p = g.matmul(&g.adjoint());
    let t = p.trace().re;
    DensityMatrix::new(p.scale_real(1.0 / t)).unwrap()
}

pub fn random_pauli<R: Rng>(rng: &mut R) -> Pauli {
    Pauli::AXES[rng.gen_range(0..3)]
}

/// Signed Pauli string on `n` qubits with at least one non-identity factor.
pub fn random_pauli_string<R: Rng>(rng: &mut R, n: usize) -> (Vec<Pauli>, ComplexMatrix) {
    loop {
        let factors: Vec<Pauli> = (0..n)
            .map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..4)])
            .collect();
        if factors.iter().all(|p| *p == Pauli::I) {
            continue;
        }
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let m = kron_all(&factors.iter().map(|p| p.matrix()).collect::<Vec<_>>()).unwrap();
        return (factors, m.scale_real(sign));
    }
}

/// Two-setting history of `pairs` pairs. With `general_gamma` the local
/// strengths use `γ ∈ [λ, 1]` instead of `γ = √λ`.
pub fn random_history<R: Rng>(rng: &mut R, pairs: usize, general_gamma: bool) -> StrengthHistory {
    let rows = (0..pairs)
        .map(|_| {
            (0..2)
                .map(|_| {
                    let l: f64 = rng.gen_range(0.0..=1.0);
                    if general_gamma {
                        let g = rng.gen_range(l.max(1e-3)..=1.0);
                        SettingStrength::with_gamma(l, g).unwrap()
                    } else {
                        SettingStrength::symmetric(l).unwrap()
                    }
                })
                .collect()
        })
        .collect();
    StrengthHistory::new(rows).unwrap()
}

/// Whether two Pauli strings commute (even number of anticommuting sites).
pub fn pauli_strings_commute(a: &[Pauli], b: &[Pauli]) -> bool {
    a.iter()
        .zip(b)
        .filter(|(x, y)| **x != Pauli::I && **y != Pauli::I && x != y)
        .count()
        % 2
        == 0
}
