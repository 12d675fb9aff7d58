//! Qubit-register density matrices, the GHZ state, and the two-qubit Bloch
//! decomposition used for steering ellipsoids.
//!
//! Qubits are ordered `A ⊗ B ⊗ C` with `A` leftmost, so the basis label
//! `"abc"` maps to index `4a + 2b + c`. A three-qubit state whose `AB`
//! marginal lives on two computational labels can be compressed to an
//! effective two-qubit state `AB̃ ⊗ C`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, kron, partial_trace, ComplexMatrix, Pauli, ONE, ZERO};

/// Hermiticity and unit-trace tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-10;
/// Smallest eigenvalue a density matrix may have.
pub const MIN_EIGENVALUE: f64 = -1e-9;
/// Weight a state may leak outside the compression subspace.
pub const COMPRESSION_TOL: f64 = 1e-9;

/// Density matrix on one to three qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixJson", into = "DensityMatrixJson")]
pub struct DensityMatrix {
    qubits: usize,
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let state = Self::from_trusted(mat)?;
        state.validate()?;
        Ok(state)
    }

    /// Wraps a matrix produced by a trace-preserving pipeline stage; only the
    /// shape is checked and the Hermitian part is kept.
    pub(crate) fn from_trusted(mat: ComplexMatrix) -> Result<Self> {
        let qubits = match mat.dim() {
            2 => 1,
            4 => 2,
            8 => 3,
            d => {
                return Err(Error::Shape(format!(
                    "density matrix dimension {d} is not 2, 4 or 8"
                )))
            }
        };
        Ok(Self {
            qubits,
            mat: mat.hermitian_part(),
        })
    }

    pub fn from_ket(ket: &[Complex64]) -> Result<Self> {
        Self::new(ComplexMatrix::projector(ket))
    }

    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        let dim = 1usize << qubits;
        Self::new(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    /// Checks the density-matrix invariants.
    pub fn validate(&self) -> Result<()> {
        let dev = self.mat.hermitian_deviation();
        if dev > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:.3e})")));
        }
        let tr = self.mat.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = self.min_eigenvalue()?;
        if min < MIN_EIGENVALUE {
            return Err(Error::InvalidState(format!("eigenvalue {min:.3e} is negative")));
        }
        Ok(())
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.mat.trace_product(&self.mat).re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = hermitian_eig(&self.mat)?;
        Ok(*eig.values.last().expect("nonempty spectrum"))
    }

    /// `Tr[ρ O]`, real part.
    pub fn expectation(&self, observable: &ComplexMatrix) -> Result<f64> {
        if observable.dim() != self.mat.dim() {
            return Err(Error::Shape(format!(
                "observable of dimension {} on a state of dimension {}",
                observable.dim(),
                self.mat.dim()
            )));
        }
        Ok(self.mat.trace_product(observable).re)
    }

    /// Reduced state on the listed qubits.
    pub fn reduce(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let dims = vec![2; self.qubits];
        DensityMatrix::from_trusted(partial_trace(&self.mat, keep, &dims)?)
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    qubits: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<DensityMatrix> for DensityMatrixJson {
    fn from(s: DensityMatrix) -> Self {
        Self {
            qubits: s.qubits,
            re: s.mat.re_rows(),
            im: s.mat.im_rows(),
        }
    }
}

impl TryFrom<DensityMatrixJson> for DensityMatrix {
    type Error = Error;

    fn try_from(j: DensityMatrixJson) -> Result<Self> {
        if j.re.len() != j.im.len() {
            return Err(Error::Shape("re and im have different row counts".into()));
        }
        let rows: Vec<Vec<Complex64>> = j
            .re
            .iter()
            .zip(&j.im)
            .map(|(r, i)| {
                if r.len() != i.len() {
                    return Err(Error::Shape("re and im rows differ in length".into()));
                }
                Ok(r.iter().zip(i).map(|(&a, &b)| Complex64::new(a, b)).collect())
            })
            .collect::<Result<_>>()?;
        let state = DensityMatrix::new(ComplexMatrix::from_rows(&rows)?)?;
        if state.qubits != j.qubits {
            return Err(Error::Shape(format!(
                "declared {} qubits but matrix has {}",
                j.qubits, state.qubits
            )));
        }
        Ok(state)
    }
}

fn basis_ket(qubits: usize, label: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; 1 << qubits];
    v[label] = ONE;
    v
}

/// `(|000⟩ + |111⟩)/√2`.
pub fn ghz() -> DensityMatrix {
    let mut ket = basis_ket(3, 0b000);
    ket[0b111] = ONE;
    DensityMatrix::from_ket(&ket).expect("GHZ is a valid state")
}

/// `(|001⟩ + |010⟩ + |100⟩)/√3`.
pub fn w_state() -> DensityMatrix {
    let mut ket = vec![ZERO; 8];
    for label in [0b001, 0b010, 0b100] {
        ket[label] = ONE;
    }
    DensityMatrix::from_ket(&ket).expect("W is a valid state")
}

/// Pair of `AB` computational labels spanning the compressed qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompressionBasis {
    zero: u8,
    one: u8,
}

impl CompressionBasis {
    /// Labels are two-bit `AB` indices (`0b10` is `|10⟩`).
    pub fn new(zero: u8, one: u8) -> Result<Self> {
        if zero > 3 || one > 3 {
            return Err(Error::Config(format!("AB labels must be below 4, got {zero} and {one}")));
        }
        if zero == one {
            return Err(Error::Config("compression labels must differ".into()));
        }
        Ok(Self { zero, one })
    }

    pub fn zero_ket(&self) -> u8 {
        self.zero
    }

    pub fn one_ket(&self) -> u8 {
        self.one
    }

    fn labels(&self) -> [usize; 2] {
        [self.zero as usize, self.one as usize]
    }

    /// Restricts a two-qubit `AB` operator to the compressed subspace.
    ///
    /// Returns the 2×2 block and the largest amplitude the operator sends
    /// out of the subspace.
    pub fn restrict(&self, op: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
        if op.dim() != 4 {
            return Err(Error::Shape("AB operator must be 4x4".into()));
        }
        let labels = self.labels();
        let mut block = ComplexMatrix::zeros(2);
        let mut leak: f64 = 0.0;
        for (c, &col) in labels.iter().enumerate() {
            for row in 0..4 {
                match labels.iter().position(|&l| l == row) {
                    Some(r) => block[(r, c)] = op[(row, col)],
                    None => leak = leak.max(op[(row, col)].norm()),
                }
            }
        }
        Ok((block, leak))
    }

    /// Finds the signed Pauli product on `AB` whose action on the compressed
    /// subspace equals `direction`.
    ///
    /// Candidates are searched with `A` and `B` each in the order
    /// `y, x, z, I`; for `{|00⟩, |11⟩}` this maps `σ̃_x` to `−σ_y⊗σ_y` and
    /// `σ̃_y` to `σ_y⊗σ_x`.
    pub fn lift(&self, direction: &ComplexMatrix) -> Result<PauliProduct> {
        if direction.dim() != 2 {
            return Err(Error::Shape("compressed direction must be 2x2".into()));
        }
        const ORDER: [Pauli; 4] = [Pauli::Y, Pauli::X, Pauli::Z, Pauli::I];
        for a in ORDER {
            for b in ORDER {
                for sign in [1.0, -1.0] {
                    let candidate = PauliProduct { sign, a, b };
                    let (block, leak) = self.restrict(&candidate.matrix())?;
                    if leak < 1e-12 && block.max_abs_diff(direction) < 1e-10 {
                        return Ok(candidate);
                    }
                }
            }
        }
        Err(Error::AmbiguousSetting(
            "direction is not the restriction of a signed Pauli product".into(),
        ))
    }
}

impl Default for CompressionBasis {
    fn default() -> Self {
        Self { zero: 0b00, one: 0b11 }
    }
}

impl FromStr for CompressionBasis {
    type Err = Error;

    /// Parses `"00,11"`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_label = |t: &str| -> Result<u8> {
            let t = t.trim();
            if t.len() != 2 || !t.chars().all(|ch| ch == '0' || ch == '1') {
                return Err(Error::Config(format!("bad AB basis label {t:?}")));
            }
            u8::from_str_radix(t, 2).map_err(|e| Error::Config(e.to_string()))
        };
        let (z, o) = s
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("compression basis {s:?} must look like \"00,11\"")))?;
        Self::new(parse_label(z)?, parse_label(o)?)
    }
}

impl fmt::Display for CompressionBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02b},{:02b}", self.zero, self.one)
    }
}

impl Serialize for CompressionBasis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CompressionBasis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `sign · P_A ⊗ P_B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliProduct {
    pub sign: f64,
    pub a: Pauli,
    pub b: Pauli,
}

impl PauliProduct {
    pub fn matrix(&self) -> ComplexMatrix {
        kron(&self.a.matrix(), &self.b.matrix())
            .expect("4x4")
            .scale_real(self.sign)
    }
}

impl fmt::Display for PauliProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign < 0.0 { "-" } else { "" };
        write!(f, "{s}{}{}", self.a.label(), self.b.label())
    }
}

/// Result of [`compress`].
#[derive(Debug, Clone)]
pub struct Compressed {
    /// State on `AB̃ ⊗ C`.
    pub state: DensityMatrix,
    /// Trace of the projected state before renormalization.
    pub retained_weight: f64,
}

/// Projects a three-qubit state onto `span{zero, one} ⊗ ℂ²` and relabels it
/// as a two-qubit state.
pub fn compress(rho: &DensityMatrix, basis: CompressionBasis) -> Result<Compressed> {
    if rho.qubits != 3 {
        return Err(Error::Shape(format!(
            "compression needs a three-qubit state, got {} qubits",
            rho.qubits
        )));
    }
    let labels = basis.labels();
    let full_index = |i: usize| labels[i / 2] * 2 + i % 2;
    let mut projected = ComplexMatrix::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            projected[(i, j)] = rho.mat[(full_index(i), full_index(j))];
        }
    }
    let weight = projected.trace().re;
    let leaked = 1.0 - weight;
    if leaked > COMPRESSION_TOL {
        return Err(Error::NotCompressible { leaked });
    }
    Ok(Compressed {
        state: DensityMatrix::from_trusted(projected.scale_real(1.0 / weight))?,
        retained_weight: weight,
    })
}

/// `(m̃, n, T)` of a two-qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochForm {
    /// Bloch vector of the first (compressed `AB`) qubit.
    pub m_tilde: [f64; 3],
    /// Bloch vector of the second qubit (Charlie).
    pub n_vec: [f64; 3],
    /// `T[μ][ν] = Tr[ρ σ̃_μ ⊗ σ_ν]`.
    pub t: [[f64; 3]; 3],
}

/// Pauli-basis coordinates of a two-qubit state.
pub fn bloch_form(rho4: &DensityMatrix) -> Result<BlochForm> {
    if rho4.qubits != 2 {
        return Err(Error::Shape(format!(
            "Bloch decomposition needs a two-qubit state, got {} qubits",
            rho4.qubits
        )));
    }
    let id = Pauli::I.matrix();
    let mut b = BlochForm {
        m_tilde: [0.0; 3],
        n_vec: [0.0; 3],
        t: [[0.0; 3]; 3],
    };
    for (mu, p) in Pauli::AXES.iter().enumerate() {
        b.m_tilde[mu] = rho4.expectation(&kron(&p.matrix(), &id)?)?;
        b.n_vec[mu] = rho4.expectation(&kron(&id, &p.matrix())?)?;
        for (nu, q) in Pauli::AXES.iter().enumerate() {
            b.t[mu][nu] = rho4.expectation(&kron(&p.matrix(), &q.matrix())?)?;
        }
    }
    Ok(b)
}

impl BlochForm {
    /// `¼(Ĩ⊗I + m̃·σ̃⊗I + Ĩ⊗n·σ + Σ T_{μν} σ̃_μ⊗σ_ν)` as a matrix. The
    /// result is Hermitian with unit trace but need not be positive.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let id = Pauli::I.matrix();
        let mut acc = ComplexMatrix::identity(4);
        for (mu, p) in Pauli::AXES.iter().enumerate() {
            let pm = p.matrix();
            acc = &acc + &kron(&pm, &id).expect("4x4").scale_real(self.m_tilde[mu]);
            acc = &acc + &kron(&id, &pm).expect("4x4").scale_real(self.n_vec[mu]);
            for (nu, q) in Pauli::AXES.iter().enumerate() {
                acc = &acc + &kron(&pm, &q.matrix()).expect("4x4").scale_real(self.t[mu][nu]);
            }
        }
        acc.scale_real(0.25)
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.reconstruct())
    }

    /// Bloch form with the two qubits exchanged (`m̃ ↔ n`, `T ↔ Tᵀ`).
    pub fn swapped(&self) -> BlochForm {
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.t[j][i];
            }
        }
        BlochForm {
            m_tilde: self.n_vec,
            n_vec: self.m_tilde,
            t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli3(a: Pauli, b: Pauli, c: Pauli) -> ComplexMatrix {
        crate::linalg::kron_all(&[a.matrix(), b.matrix(), c.matrix()]).unwrap()
    }

    #[test]
    fn ghz_stabilizer_signs() {
        let g = ghz();
        assert!((g.expectation(&pauli3(Pauli::X, Pauli::X, Pauli::X)).unwrap() - 1.0).abs() < 1e-15);
        assert!((g.expectation(&pauli3(Pauli::Y, Pauli::Y, Pauli::X)).unwrap() + 1.0).abs() < 1e-15);
        assert!((g.expectation(&pauli3(Pauli::Y, Pauli::X, Pauli::Y)).unwrap() + 1.0).abs() < 1e-15);
        assert!((g.purity() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ghz_marginals() {
        let g = ghz();
        let half_id = ComplexMatrix::identity(2).scale_real(0.5);
        for q in 0..3 {
            assert!(g.reduce(&[q]).unwrap().matrix().max_abs_diff(&half_id) < 1e-15);
        }
        let ab = g.reduce(&[0, 1]).unwrap();
        assert!(ab.matrix().max_abs_diff(&ComplexMatrix::diag(&[0.5, 0.0, 0.0, 0.5])) < 1e-15);
    }

    #[test]
    fn compressed_ghz_is_a_pure_bell_state() {
        let c = compress(&ghz(), CompressionBasis::default()).unwrap();
        assert!((c.retained_weight - 1.0).abs() < 1e-15);
        let mut bell = vec![ZERO; 4];
        bell[0] = ONE;
        bell[3] = ONE;
        let expected = ComplexMatrix::projector(&bell);
        assert!(c.state.matrix().max_abs_diff(&expected) < 1e-15);
        assert!((c.state.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn w_state_is_not_compressible() {
        let err = compress(&w_state(), CompressionBasis::default()).unwrap_err();
        assert!(matches!(err, Error::NotCompressible { .. }));
    }

    #[test]
    fn bloch_form_examples() {
        let c = compress(&ghz(), CompressionBasis::default()).unwrap();
        let b = bloch_form(&c.state).unwrap();
        assert_eq!(b.m_tilde, [0.0; 3]);
        assert_eq!(b.n_vec, [0.0; 3]);
        let expected = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((b.t[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }

        let mixed = bloch_form(&DensityMatrix::maximally_mixed(2).unwrap()).unwrap();
        assert_eq!(mixed.t, [[0.0; 3]; 3]);

        let prod = DensityMatrix::new(ComplexMatrix::diag(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let b = bloch_form(&prod).unwrap();
        assert_eq!(b.m_tilde, [0.0, 0.0, 1.0]);
        assert_eq!(b.n_vec, [0.0, 0.0, 1.0]);
        assert_eq!(b.t, [[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn reconstruct_inverts_bloch_form() {
        let c = compress(&ghz(), CompressionBasis::default()).unwrap();
        let b = bloch_form(&c.state).unwrap();
        assert!(b.reconstruct().max_abs_diff(c.state.matrix()) < 1e-14);
    }

    #[test]
    fn compression_basis_parsing() {
        assert_eq!("00,11".parse::<CompressionBasis>().unwrap(), CompressionBasis::default());
        let b: CompressionBasis = "01,10".parse().unwrap();
        assert_eq!((b.zero_ket(), b.one_ket()), (0b01, 0b10));
        assert!("00,00".parse::<CompressionBasis>().is_err());
        assert!("00;11".parse::<CompressionBasis>().is_err());
        assert!("0,11".parse::<CompressionBasis>().is_err());
        assert_eq!(b.to_string(), "01,10");
    }

    #[test]
    fn lift_matches_ghz_settings() {
        let basis = CompressionBasis::default();
        let x = basis.lift(&Pauli::X.matrix()).unwrap();
        assert_eq!(x.to_string(), "-yy");
        let minus_y = basis.lift(&Pauli::Y.matrix().scale_real(-1.0)).unwrap();
        assert_eq!(minus_y.to_string(), "-yx");
        let z = basis.lift(&Pauli::Z.matrix()).unwrap();
        let (block, leak) = basis.restrict(&z.matrix()).unwrap();
        assert!(block.max_abs_diff(&Pauli::Z.matrix()) < 1e-15 && leak == 0.0);
    }

    #[test]
    fn density_matrix_json_shape() {
        let g = ghz();
        let json = serde_json::to_value(&g).unwrap();
        assert_eq!(json["qubits"], 3);
        assert_eq!(json["re"].as_array().unwrap().len(), 8);
        assert_eq!(json["im"][0].as_array().unwrap().len(), 8);
        let back: DensityMatrix = serde_json::from_value(json).unwrap();
        assert!(back.matrix().max_abs_diff(g.matrix()) < 1e-15);
    }

    #[test]
    fn json_rejects_invalid_states() {
        let bad = r#"{"qubits":1,"re":[[1.0,0.0],[0.0,1.0]],"im":[[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(bad).is_err());
        let wrong_count = r#"{"qubits":2,"re":[[1.0,0.0],[0.0,0.0]],"im":[[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(wrong_count).is_err());
    }

    #[test]
    fn new_rejects_non_states() {
        assert!(DensityMatrix::new(ComplexMatrix::diag(&[1.5, -0.5])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::diag(&[0.5, 0.4])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::identity(3).scale_real(1.0 / 3.0)).is_err());
    }
}
