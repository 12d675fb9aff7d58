//! Unsharp dichotomic measurements and the averaged Lüders update.
//!
//! A setting is an involution `D` (a signed Pauli product, `D² = I`) with a
//! strength `λ ∈ [0, 1]`. Its effects are `E± = (I ± λD)/2` and its Kraus
//! operators are the PSD square roots `K± = √E±`.

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, ComplexMatrix};
use crate::state::DensityMatrix;

const INVOLUTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct UnsharpSetting {
    direction: ComplexMatrix,
    strength: f64,
    acts_on: Vec<usize>,
}

impl UnsharpSetting {
    /// `acts_on` lists the qubits the direction acts on, in tensor order.
    pub fn new(direction: ComplexMatrix, strength: f64, acts_on: Vec<usize>) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::Config(format!("strength {strength} outside [0, 1]")));
        }
        if !direction.is_hermitian(INVOLUTION_TOL) {
            return Err(Error::Config("direction must be Hermitian".into()));
        }
        let sq = direction.matmul(&direction);
        let dev = sq.max_abs_diff(&ComplexMatrix::identity(direction.dim()));
        if dev > INVOLUTION_TOL {
            return Err(Error::Config(format!(
                "direction does not square to the identity (deviation {dev:.3e})"
            )));
        }
        if acts_on.is_empty() || direction.dim() != 1 << acts_on.len() {
            return Err(Error::Shape(format!(
                "direction of dimension {} cannot act on qubits {acts_on:?}",
                direction.dim()
            )));
        }
        let mut sorted = acts_on.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != acts_on.len() {
            return Err(Error::Shape(format!("repeated qubit in {acts_on:?}")));
        }
        Ok(Self {
            direction,
            strength,
            acts_on,
        })
    }

    pub fn direction(&self) -> &ComplexMatrix {
        &self.direction
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn acts_on(&self) -> &[usize] {
        &self.acts_on
    }
}

/// Effects and Kraus operators of one setting, embedded in the full register.
#[derive(Debug, Clone)]
pub struct Instrument {
    /// `(E₊, E₋)`
    pub effects: [ComplexMatrix; 2],
    /// `(K₊, K₋)`
    pub kraus: [ComplexMatrix; 2],
}

/// Pads `op` with identities so it acts on `acts_on` within a register of `qubits`.
pub fn embed(op: &ComplexMatrix, acts_on: &[usize], qubits: usize) -> Result<ComplexMatrix> {
    if acts_on.iter().any(|&q| q >= qubits) {
        return Err(Error::Shape(format!(
            "qubits {acts_on:?} outside a {qubits}-qubit register"
        )));
    }
    if op.dim() != 1 << acts_on.len() {
        return Err(Error::Shape("operator size does not match its support".into()));
    }
    let dim = 1usize << qubits;
    let support_mask: usize = acts_on.iter().map(|&q| 1 << (qubits - 1 - q)).sum();
    let sub_index = |i: usize| {
        acts_on
            .iter()
            .fold(0usize, |acc, &q| (acc << 1) | ((i >> (qubits - 1 - q)) & 1))
    };
    let mut out = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            if i & !support_mask == j & !support_mask {
                out[(i, j)] = op[(sub_index(i), sub_index(j))];
            }
        }
    }
    Ok(out)
}

pub fn make_instrument(s: &UnsharpSetting, register_qubits: usize) -> Result<Instrument> {
    let id = ComplexMatrix::identity(s.direction.dim());
    let tilt = s.direction.scale_real(s.strength);
    let plus = (&id + &tilt).scale_real(0.5);
    let minus = (&id - &tilt).scale_real(0.5);
    let k_plus = psd_sqrt(&plus)?;
    let k_minus = psd_sqrt(&minus)?;
    let e = |m: &ComplexMatrix| embed(m, &s.acts_on, register_qubits);
    Ok(Instrument {
        effects: [e(&plus)?, e(&minus)?],
        kraus: [e(&k_plus)?, e(&k_minus)?],
    })
}

/// Non-selective update averaged uniformly over settings:
/// `ρ ↦ (1/n) Σ_k Σ_± K±⁽ᵏ⁾ ρ K±⁽ᵏ⁾†`.
pub fn luders_update(rho: &DensityMatrix, settings: &[UnsharpSetting]) -> Result<DensityMatrix> {
    if settings.is_empty() {
        return Err(Error::Config("at least one setting is required".into()));
    }
    let mut acc = ComplexMatrix::zeros(rho.matrix().dim());
    for s in settings {
        let inst = make_instrument(s, rho.qubits())?;
        for k in &inst.kraus {
            acc = &acc + &rho.matrix().conjugate_by(k);
        }
    }
    DensityMatrix::from_trusted(acc.scale_real(1.0 / settings.len() as f64))
}

/// Local version of the update: setting `k` of `A` and setting `k` of `B`
/// are applied jointly, `(1/n) Σ_k Σ_{±,±} (K_A K_B) ρ (K_A K_B)†`.
pub fn local_pair_update(
    rho: &DensityMatrix,
    a_settings: &[UnsharpSetting],
    b_settings: &[UnsharpSetting],
) -> Result<DensityMatrix> {
    if a_settings.len() != b_settings.len() {
        return Err(Error::Config(format!(
            "{} settings for A but {} for B",
            a_settings.len(),
            b_settings.len()
        )));
    }
    if a_settings.is_empty() {
        return Err(Error::Config("at least one setting is required".into()));
    }
    let q = rho.qubits();
    let mut acc = ComplexMatrix::zeros(rho.matrix().dim());
    for (sa, sb) in a_settings.iter().zip(b_settings) {
        let ia = make_instrument(sa, q)?;
        let ib = make_instrument(sb, q)?;
        for ka in &ia.kraus {
            for kb in &ib.kraus {
                acc = &acc + &rho.matrix().conjugate_by(&ka.matmul(kb));
            }
        }
    }
    DensityMatrix::from_trusted(acc.scale_real(1.0 / a_settings.len() as f64))
}
