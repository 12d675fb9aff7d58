//! Linear steering functionals, their classical bounds, closed-form values
//! for the GHZ protocol, and steering ellipsoids.
//!
//! For a two-qubit state written as `(m̃, n, T)` the first qubit is the
//! compressed `AB` pair and the second is Charlie. Charlie's ellipsoid (the
//! set of Bloch vectors `AB` can steer Charlie to) has
//!
//! ```text
//! center = (n − Tᵀ m̃) / (1 − |m̃|²)
//! O      = (Tᵀ − n m̃ᵀ) (I + m̃ m̃ᵀ / (1 − |m̃|²)) (T − m̃ nᵀ) / (1 − |m̃|²)
//! ```
//!
//! and the `AB` ellipsoid follows by exchanging the two qubits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{bloch_operator, hermitian_eig, kron, partial_trace, ComplexMatrix, Pauli};
use crate::state::{BlochForm, DensityMatrix};

/// Largest number of settings the classical bound enumerates (2ⁿ sign vectors).
pub const MAX_BOUND_SETTINGS: usize = 6;
/// A steering party whose Bloch vector is this close to the sphere is pure.
pub const PURE_STEERER_TOL: f64 = 1e-9;
/// Eigenvalue gap (or semiaxis length) below which directions are ambiguous.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// `F_λ = √(1 − λ²)`, the coherence left by an unsharp measurement.
pub fn coherence_factor(strength: f64) -> f64 {
    (1.0 - strength * strength).max(0.0).sqrt()
}

/// `S_n = (1/n) Σ_k λ_k Tr[ρ (D_k ⊗ Λ_k)]`.
///
/// `rho` is the state the pair receives; the strength enters once, as the
/// expectation of `E₊ − E₋ = λ D`.
pub fn steering_parameter(
    rho: &DensityMatrix,
    pair_directions: &[ComplexMatrix],
    pair_strengths: &[f64],
    charlie_directions: &[ComplexMatrix],
) -> Result<f64> {
    let n = pair_directions.len();
    if n == 0 || pair_strengths.len() != n || charlie_directions.len() != n {
        return Err(Error::Config(format!(
            "need equal nonempty lists, got {} pair directions, {} strengths, {} Charlie directions",
            n,
            pair_strengths.len(),
            charlie_directions.len()
        )));
    }
    let mut total = 0.0;
    for ((d, &lam), c) in pair_directions.iter().zip(pair_strengths).zip(charlie_directions) {
        total += lam * rho.expectation(&kron(d, c)?)?;
    }
    Ok(total / n as f64)
}

/// `C_n = max_s λ_max((1/n) Σ_k s_k Λ_k)` over all sign vectors `s ∈ {±1}ⁿ`.
pub fn classical_bound(charlie_directions: &[ComplexMatrix]) -> Result<f64> {
    let n = charlie_directions.len();
    if n == 0 || n > MAX_BOUND_SETTINGS {
        return Err(Error::UnsupportedSize { n });
    }
    let dim = charlie_directions[0].dim();
    if charlie_directions.iter().any(|d| d.dim() != dim) {
        return Err(Error::Shape("Charlie directions have different sizes".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for signs in 0u32..(1 << n) {
        let mut sum = ComplexMatrix::zeros(dim);
        for (k, d) in charlie_directions.iter().enumerate() {
            let s = if signs >> k & 1 == 1 { -1.0 } else { 1.0 };
            sum = &sum + &d.scale_real(s / n as f64);
        }
        best = best.max(hermitian_eig(&sum)?.values[0]);
    }
    Ok(best)
}

/// Strength of one setting. `lambda` is the strength of the nonlocal
/// measurement; the local split satisfies `lambda = eta · gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingStrength {
    pub lambda: f64,
    pub eta: f64,
    pub gamma: f64,
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {x} outside [0, 1]")))
    }
}

impl SettingStrength {
    /// Nonlocal strength with the symmetric local split `η = γ = √λ`.
    pub fn symmetric(lambda: f64) -> Result<Self> {
        check_unit("lambda", lambda)?;
        Ok(Self {
            lambda,
            eta: lambda.sqrt(),
            gamma: lambda.sqrt(),
        })
    }

    pub fn local(eta: f64, gamma: f64) -> Result<Self> {
        check_unit("eta", eta)?;
        check_unit("gamma", gamma)?;
        Ok(Self {
            lambda: eta * gamma,
            eta,
            gamma,
        })
    }

    /// Local split with a chosen `γ`; `η = λ/γ` must stay in `[0, 1]`.
    pub fn with_gamma(lambda: f64, gamma: f64) -> Result<Self> {
        check_unit("lambda", lambda)?;
        check_unit("gamma", gamma)?;
        if lambda == 0.0 {
            return Self::local(0.0, gamma);
        }
        if gamma < lambda {
            return Err(Error::Config(format!(
                "gamma = {gamma} is below lambda = {lambda}, eta would exceed 1"
            )));
        }
        Self::local((lambda / gamma).min(1.0), gamma).map(|s| Self { lambda, ..s })
    }
}

/// Per-pair, per-setting strengths `λ_k⁽ʲ⁾` (and their local splits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthHistory {
    pairs: Vec<Vec<SettingStrength>>,
}

impl StrengthHistory {
    pub fn new(pairs: Vec<Vec<SettingStrength>>) -> Result<Self> {
        let n = pairs.first().map(Vec::len).unwrap_or(0);
        if n == 0 || pairs.iter().any(|p| p.len() != n) {
            return Err(Error::Config(
                "every pair needs the same nonzero number of settings".into(),
            ));
        }
        Ok(Self { pairs })
    }

    /// Nonlocal strengths with symmetric local splits.
    pub fn from_lambdas(lambdas: &[Vec<f64>]) -> Result<Self> {
        let pairs = lambdas
            .iter()
            .map(|p| p.iter().map(|&l| SettingStrength::symmetric(l)).collect())
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    /// One strength per pair, shared by both settings.
    pub fn equal(per_pair: &[f64]) -> Result<Self> {
        let lambdas: Vec<Vec<f64>> = per_pair.iter().map(|&l| vec![l, l]).collect();
        Self::from_lambdas(&lambdas)
    }

    pub fn pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn settings(&self) -> usize {
        self.pairs[0].len()
    }

    /// Strengths of pair `i` (1-based).
    pub fn pair(&self, i: usize) -> &[SettingStrength] {
        &self.pairs[i - 1]
    }
}

fn closed_form(h: &StrengthHistory, i: usize, damping: impl Fn(&SettingStrength) -> f64) -> Result<f64> {
    if h.settings() != 2 {
        return Err(Error::Config(format!(
            "closed form covers two settings, history has {}",
            h.settings()
        )));
    }
    if i == 0 || i > h.pairs() {
        return Err(Error::Config(format!(
            "pair {i} outside 1..={}",
            h.pairs()
        )));
    }
    let mut prod1 = 1.0;
    let mut prod2 = 1.0;
    for j in 1..i {
        let p = h.pair(j);
        prod1 *= 1.0 + coherence_factor(damping(&p[0]));
        prod2 *= 1.0 + coherence_factor(damping(&p[1]));
    }
    let current = h.pair(i);
    Ok((current[1].lambda * prod1 + current[0].lambda * prod2) / 2f64.powi(i as i32))
}

/// Closed-form `S₂⁽ⁱ⁾` of the GHZ protocol with nonlocal product measurements.
pub fn closed_form_nonlocal(h: &StrengthHistory, i: usize) -> Result<f64> {
    closed_form(h, i, |s| s.lambda)
}

/// Closed-form `S̃₂⁽ⁱ⁾` with local measurements; earlier pairs damp through `γ` only.
pub fn closed_form_local(h: &StrengthHistory, i: usize) -> Result<f64> {
    closed_form(h, i, |s| s.gamma)
}

/// Which qubit of the two-qubit form is being steered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SteeredParty {
    /// Charlie, steered by the `AB` pair.
    Charlie,
    /// The compressed `AB` qubit, steered by Charlie.
    Ab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringEllipsoid {
    pub center: [f64; 3],
    pub matrix: [[f64; 3]; 3],
    /// Descending.
    pub semiaxes: [f64; 3],
    /// Row `k` is the unit axis of `semiaxes[k]`.
    pub orientation: [[f64; 3]; 3],
    /// Volume relative to the Bloch ball.
    pub volume: f64,
}

type Mat3 = [[f64; 3]; 3];

fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

fn outer3(u: [f64; 3], v: [f64; 3]) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = u[i] * v[j];
        }
    }
    m
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn dot3(u: [f64; 3], v: [f64; 3]) -> f64 {
    u.iter().zip(&v).map(|(a, b)| a * b).sum()
}

fn norm3(u: [f64; 3]) -> f64 {
    dot3(u, u).sqrt()
}

/// Eigen-decomposition of a real symmetric 3×3 matrix, with axes inside a
/// degenerate eigenspace chosen by projecting x, y, z in that order.
fn symmetric_axes(m: &Mat3) -> Result<([f64; 3], [[f64; 3]; 3])> {
    let rows: Vec<Vec<f64>> = m.iter().map(|r| r.to_vec()).collect();
    let eig = hermitian_eig(&ComplexMatrix::from_real_rows(&rows)?)?;

    let real_vector = |k: usize| -> [f64; 3] {
        let v = eig.vector(k);
        let pivot = v
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("3 entries");
        let phase = pivot.conj() / pivot.norm();
        let r = [(v[0] * phase).re, (v[1] * phase).re, (v[2] * phase).re];
        let n = norm3(r);
        [r[0] / n, r[1] / n, r[2] / n]
    };

    let mut values = [0.0; 3];
    values.copy_from_slice(&eig.values);
    let mut axes = [[0.0; 3]; 3];
    let mut k = 0;
    while k < 3 {
        let mut end = k + 1;
        while end < 3 && (values[k] - values[end]).abs() <= DEGENERACY_TOL {
            end += 1;
        }
        let group: Vec<[f64; 3]> = (k..end).map(real_vector).collect();
        if group.len() == 1 {
            axes[k] = group[0];
        } else {
            // Gram-Schmidt on the projections of the coordinate axes.
            let mut chosen: Vec<[f64; 3]> = Vec::new();
            for e in 0..3 {
                if chosen.len() == group.len() {
                    break;
                }
                let mut unit = [0.0; 3];
                unit[e] = 1.0;
                let mut p = [0.0; 3];
                for g in &group {
                    let c = dot3(*g, unit);
                    for t in 0..3 {
                        p[t] += c * g[t];
                    }
                }
                for c in &chosen {
                    let d = dot3(*c, p);
                    for t in 0..3 {
                        p[t] -= d * c[t];
                    }
                }
                let n = norm3(p);
                if n > 1e-6 {
                    chosen.push([p[0] / n, p[1] / n, p[2] / n]);
                }
            }
            for (off, c) in chosen.into_iter().enumerate() {
                axes[k + off] = c;
            }
        }
        k = end;
    }
    for axis in axes.iter_mut() {
        let pivot = axis
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() + 1e-12 { x } else { acc });
        if pivot < 0.0 {
            for x in axis.iter_mut() {
                *x = -*x;
            }
        }
    }
    Ok((values, axes))
}

impl SteeringEllipsoid {
    /// `(d·O⁺·d, |residual|)` for `d = point − center`: the squared
    /// normalized radius on non-degenerate axes and the length of the
    /// component along axes with zero semiaxis.
    pub fn normalized_radius(&self, point: [f64; 3]) -> (f64, f64) {
        let d = [
            point[0] - self.center[0],
            point[1] - self.center[1],
            point[2] - self.center[2],
        ];
        let mut quad = 0.0;
        let mut residual = 0.0;
        for (axis, &len) in self.orientation.iter().zip(&self.semiaxes) {
            let c = dot3(*axis, d);
            if len > DEGENERACY_TOL {
                quad += c * c / (len * len);
            } else {
                residual += c * c;
            }
        }
        (quad, residual.sqrt())
    }

    pub fn contains(&self, point: [f64; 3], tol: f64) -> bool {
        let (quad, residual) = self.normalized_radius(point);
        quad <= 1.0 + tol && residual <= 1e-8
    }

    /// Axis of the semiaxis most closely aligned with `direction`.
    pub fn semiaxis_along(&self, direction: [f64; 3]) -> f64 {
        let k = (0..3)
            .max_by(|&a, &b| {
                dot3(self.orientation[a], direction)
                    .abs()
                    .total_cmp(&dot3(self.orientation[b], direction).abs())
            })
            .expect("three axes");
        self.semiaxes[k]
    }
}

/// Steering ellipsoid of `steered_party`.
pub fn ellipsoid(b: &BlochForm, steered_party: SteeredParty) -> Result<SteeringEllipsoid> {
    let b = match steered_party {
        SteeredParty::Charlie => *b,
        SteeredParty::Ab => b.swapped(),
    };
    let a = b.m_tilde;
    let n = b.n_vec;
    let a_norm = norm3(a);
    if a_norm >= 1.0 - PURE_STEERER_TOL {
        return Err(Error::DegenerateSteerer { norm: a_norm });
    }
    let g = 1.0 - a_norm * a_norm;
    let tt = transpose(&b.t);

    let mut center = [0.0; 3];
    for (i, c) in center.iter_mut().enumerate() {
        *c = (n[i] - (0..3).map(|k| tt[i][k] * a[k]).sum::<f64>()) / g;
    }

    let left = {
        let na = outer3(n, a);
        let mut m = tt;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] -= na[i][j];
            }
        }
        m
    };
    let mut middle = outer3(a, a);
    for (i, row) in middle.iter_mut().enumerate() {
        for x in row.iter_mut() {
            *x /= g;
        }
        row[i] += 1.0;
    }
    let right = transpose(&left);
    let mut o = mat3_mul(&mat3_mul(&left, &middle), &right);
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] /= g;
        }
    }
    let sym = {
        let mut s = o;
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = 0.5 * (o[i][j] + o[j][i]);
            }
        }
        s
    };

    let (values, orientation) = symmetric_axes(&sym)?;
    let semiaxes = values.map(|v| v.max(0.0).sqrt());
    Ok(SteeringEllipsoid {
        center,
        matrix: sym,
        semiaxes,
        orientation,
        volume: det3(&sym).max(0.0).sqrt(),
    })
}

/// `|det(T − m̃ nᵀ)| / (1 − |m̃|²)²`, checked against `√det O` of Charlie's ellipsoid.
pub fn ellipsoid_volume_check(b: &BlochForm) -> Result<f64> {
    let e = ellipsoid(b, SteeredParty::Charlie)?;
    let a = b.m_tilde;
    let g = 1.0 - dot3(a, a);
    let mut shifted = b.t;
    let an = outer3(a, b.n_vec);
    for i in 0..3 {
        for j in 0..3 {
            shifted[i][j] -= an[i][j];
        }
    }
    let v = det3(&shifted).abs() / (g * g);
    if (v - e.volume).abs() > 1e-10 * v.max(1.0) {
        return Err(Error::Consistency(format!(
            "determinant volume {v} disagrees with sqrt(det O) = {}",
            e.volume
        )));
    }
    Ok(v)
}

/// Bloch vector of the second qubit after the effect `effect` (on the
/// first qubit) clicks, together with the click probability.
pub fn steered_bloch_vector(rho4: &DensityMatrix, effect: &ComplexMatrix) -> Result<([f64; 3], f64)> {
    if rho4.qubits() != 2 || effect.dim() != 2 {
        return Err(Error::Shape("expected a two-qubit state and a qubit effect".into()));
    }
    let op = kron(effect, &Pauli::I.matrix())?;
    let post = op.matmul(rho4.matrix());
    let reduced = partial_trace(&post, &[1], &[2, 2])?;
    let p = reduced.trace().re;
    let mut r = [0.0; 3];
    for (k, axis) in Pauli::AXES.iter().enumerate() {
        r[k] = reduced.trace_product(&axis.matrix()).re / p;
    }
    Ok((r, p))
}

/// Partner setting on the compressed `AB` qubit for a fixed Charlie direction.
///
/// The returned involution has the eigenvectors of `AB`'s conditional state
/// after Charlie's `+1` outcome, with `+1` on the larger eigenvalue.
pub fn optimal_partner_setting(rho4: &DensityMatrix, charlie_direction: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho4.qubits() != 2 || charlie_direction.dim() != 2 {
        return Err(Error::Shape("expected a two-qubit state and a qubit direction".into()));
    }
    let sq = charlie_direction.matmul(charlie_direction);
    if !charlie_direction.is_hermitian(1e-10) || sq.max_abs_diff(&ComplexMatrix::identity(2)) > 1e-10 {
        return Err(Error::Config("Charlie direction must be a Hermitian involution".into()));
    }
    let effect = (&ComplexMatrix::identity(2) + charlie_direction).scale_real(0.5);
    let op = kron(&Pauli::I.matrix(), &effect)?;
    let conditional = partial_trace(&op.matmul(rho4.matrix()).matmul(&op), &[0], &[2, 2])?;
    let p = conditional.trace().re;
    if p <= DEGENERACY_TOL {
        return Err(Error::AmbiguousSetting("Charlie's +1 outcome never occurs".into()));
    }
    let eig = hermitian_eig(&conditional.scale_real(1.0 / p).hermitian_part())?;
    if eig.values[0] - eig.values[1] <= DEGENERACY_TOL {
        return Err(Error::AmbiguousSetting(
            "conditional state is degenerate, every direction is optimal".into(),
        ));
    }
    let plus = ComplexMatrix::projector(&eig.vector(0));
    let minus = ComplexMatrix::projector(&eig.vector(1));
    Ok(&plus - &minus)
}

/// Unit Bloch direction `u`, standing for the involution `u·σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAxis(pub [f64; 3]);

impl BlochAxis {
    pub fn operator(&self) -> ComplexMatrix {
        bloch_operator(self.0)
    }
}

/// The `n` longest principal axes of an ellipsoid as measurement directions.
pub fn optimal_settings_from_ellipsoid(e: &SteeringEllipsoid, n: usize) -> Result<Vec<BlochAxis>> {
    let usable = e.semiaxes.iter().filter(|&&s| s > DEGENERACY_TOL).count();
    if n == 0 || n > usable {
        return Err(Error::AmbiguousSetting(format!(
            "asked for {n} directions but only {usable} semiaxes are nonzero"
        )));
    }
    Ok(e.orientation[..n].iter().map(|&u| BlochAxis(u)).collect())
}

/// Complex helper for tests and callers building effects.
pub fn effect_from_bloch(weight: f64, u: [f64; 3]) -> ComplexMatrix {
    &ComplexMatrix::identity(2).scale(Complex64::new(weight, 0.0)) + &bloch_operator(u)
}
