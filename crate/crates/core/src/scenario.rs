//! Sequential-pair scenarios: configuration, simulation, grid scans,
//! one-parameter sweeps and ellipsoid series.
//!
//! A scenario starts from the GHZ state. Each pair `A_i B_i` measures every
//! setting with its own strength, passes the averaged post-measurement state
//! on, and is scored with the linear steering functional on the state it
//! received. Pair directions are not configured directly: for each Charlie
//! direction the partner setting is derived from the compressed initial
//! state and lifted back to a signed Pauli product on `AB`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, Pauli};
use crate::measurement::{local_pair_update, luders_update, UnsharpSetting};
use crate::state::{bloch_form, compress, ghz, CompressionBasis, DensityMatrix, PauliProduct};
use crate::steering::{
    classical_bound, closed_form_local, closed_form_nonlocal, ellipsoid, optimal_partner_setting,
    steering_parameter, SettingStrength, SteeredParty, SteeringEllipsoid, StrengthHistory,
};

pub const MAX_PAIRS: usize = 4;
/// Region scans and sweeps emit at most this many pairs.
pub const MAX_TABULATED_PAIRS: usize = 3;
pub const DEFAULT_GRID: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Nonlocal,
    Local,
    Compare,
}

impl Mode {
    fn nonlocal(self) -> bool {
        matches!(self, Mode::Nonlocal | Mode::Compare)
    }

    fn local(self) -> bool {
        matches!(self, Mode::Local | Mode::Compare)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonlocal" => Ok(Mode::Nonlocal),
            "local" => Ok(Mode::Local),
            "compare" => Ok(Mode::Compare),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Signed Pauli axis label such as `x` or `-y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisLabel {
    pub sign: f64,
    pub pauli: Pauli,
}

impl AxisLabel {
    pub fn matrix(&self) -> ComplexMatrix {
        self.pauli.matrix().scale_real(self.sign)
    }
}

impl FromStr for AxisLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (sign, rest) = match t.strip_prefix('-') {
            Some(r) => (-1.0, r),
            None => (1.0, t.strip_prefix('+').unwrap_or(t)),
        };
        let pauli = match rest {
            "x" | "X" => Pauli::X,
            "y" | "Y" => Pauli::Y,
            "z" | "Z" => Pauli::Z,
            _ => return Err(Error::Config(format!("unknown axis label {s:?}"))),
        };
        Ok(Self { sign, pauli })
    }
}

impl fmt::Display for AxisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign < 0.0 { "-" } else { "" };
        write!(f, "{s}{}", self.pauli.label())
    }
}

impl Serialize for AxisLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AxisLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated axis list such as `x,y,z`.
pub fn parse_axes(s: &str) -> Result<Vec<AxisLabel>> {
    s.split(',').map(str::parse).collect()
}

fn default_charlie() -> Vec<AxisLabel> {
    vec![
        AxisLabel { sign: 1.0, pauli: Pauli::X },
        AxisLabel { sign: 1.0, pauli: Pauli::Y },
    ]
}

/// Declarative scenario, as read from JSON.
///
/// `strengths[i]` lists the per-setting strengths of pair `i + 1`; a single
/// entry (or an `equal_strength` flag) shares one strength across settings.
/// A missing final pair measures sharply. In local mode `η = γ = √λ` unless
/// `gammas` gives `γ` explicitly (then `η = λ/γ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub pairs: usize,
    #[serde(default)]
    pub strengths: Vec<Vec<f64>>,
    #[serde(default)]
    pub equal_strength: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_charlie")]
    pub charlie_directions: Vec<AxisLabel>,
    #[serde(default)]
    pub compression: CompressionBasis,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Nonlocal,
            pairs: 2,
            strengths: Vec::new(),
            equal_strength: Vec::new(),
            gammas: None,
            charlie_directions: default_charlie(),
            compression: CompressionBasis::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Equal-strength config with one strength per pair.
    pub fn equal(mode: Mode, per_pair: &[f64]) -> Self {
        Self {
            mode,
            pairs: per_pair.len(),
            strengths: per_pair.iter().map(|&l| vec![l]).collect(),
            equal_strength: vec![true; per_pair.len()],
            ..Self::default()
        }
    }

    pub fn settings(&self) -> usize {
        self.charlie_directions.len()
    }

    /// Per-pair, per-setting `λ` after defaults.
    pub fn lambdas(&self) -> Result<Vec<Vec<f64>>> {
        if self.pairs == 0 || self.pairs > MAX_PAIRS {
            return Err(Error::Config(format!("pairs must be in 1..={MAX_PAIRS}, got {}", self.pairs)));
        }
        let n = self.settings();
        if n == 0 {
            return Err(Error::Config("at least one Charlie direction is required".into()));
        }
        if self.strengths.len() > self.pairs {
            return Err(Error::Config(format!(
                "{} strength rows for {} pairs",
                self.strengths.len(),
                self.pairs
            )));
        }
        if self.strengths.len() + 1 < self.pairs {
            return Err(Error::Config(format!(
                "pairs 1..{} need explicit strengths; only the final pair defaults to sharp",
                self.pairs
            )));
        }
        let mut out = Vec::with_capacity(self.pairs);
        for (i, row) in self.strengths.iter().enumerate() {
            let equal = self.equal_strength.get(i).copied().unwrap_or(row.len() == 1);
            let resolved = match (equal, row.len()) {
                (_, 1) => vec![row[0]; n],
                (true, len) if len == n => {
                    if row.iter().any(|&x| x != row[0]) {
                        return Err(Error::Config(format!("pair {} is marked equal but has {row:?}", i + 1)));
                    }
                    row.clone()
                }
                (false, len) if len == n => row.clone(),
                (_, len) => {
                    return Err(Error::Config(format!(
                        "pair {} lists {len} strengths for {n} settings",
                        i + 1
                    )))
                }
            };
            if let Some(bad) = resolved.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::Config(format!("strength {bad} outside [0, 1]")));
            }
            out.push(resolved);
        }
        if out.len() < self.pairs {
            out.push(vec![1.0; n]);
        }
        Ok(out)
    }

    pub fn history(&self) -> Result<StrengthHistory> {
        self.history_from(&self.lambdas()?)
    }

    fn history_from(&self, lambdas: &[Vec<f64>]) -> Result<StrengthHistory> {
        let pairs = lambdas
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(k, &l)| {
                        match self.gammas.as_ref().and_then(|g| g.get(i)).and_then(|r| r.get(k)) {
                            Some(&gamma) => SettingStrength::with_gamma(l, gamma),
                            None => SettingStrength::symmetric(l),
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        StrengthHistory::new(pairs)
    }

    pub fn charlie_matrices(&self) -> Vec<ComplexMatrix> {
        self.charlie_directions.iter().map(AxisLabel::matrix).collect()
    }

    pub fn bound(&self) -> Result<f64> {
        classical_bound(&self.charlie_matrices())
    }
}

/// Measurement directions of a scenario.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub pair_directions: Vec<PauliProduct>,
    pub charlie: Vec<ComplexMatrix>,
}

impl Protocol {
    /// Derives each pair direction as the optimal partner of the matching
    /// Charlie direction on the compressed `initial` state.
    pub fn derive(initial: &DensityMatrix, cfg: &ScenarioConfig) -> Result<Self> {
        let compressed = compress(initial, cfg.compression)?;
        let charlie = cfg.charlie_matrices();
        let pair_directions = charlie
            .iter()
            .map(|c| {
                let partner = optimal_partner_setting(&compressed.state, c)?;
                cfg.compression.lift(&partner)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pair_directions,
            charlie,
        })
    }

    pub fn nonlocal_settings(&self, strengths: &[SettingStrength]) -> Result<Vec<UnsharpSetting>> {
        self.pair_directions
            .iter()
            .zip(strengths)
            .map(|(d, s)| UnsharpSetting::new(d.matrix(), s.lambda, vec![0, 1]))
            .collect()
    }

    pub fn local_settings(&self, strengths: &[SettingStrength]) -> Result<(Vec<UnsharpSetting>, Vec<UnsharpSetting>)> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (d, s) in self.pair_directions.iter().zip(strengths) {
            a.push(UnsharpSetting::new(d.a.matrix().scale_real(d.sign), s.eta, vec![0])?);
            b.push(UnsharpSetting::new(d.b.matrix(), s.gamma, vec![1])?);
        }
        Ok((a, b))
    }
}

/// Steering value of one pair and the state it received.
#[derive(Debug, Clone)]
pub struct PairStep {
    pub pair: usize,
    pub steering: f64,
    pub state: DensityMatrix,
}

/// Runs the sequential protocol in nonlocal (`local = false`) or local mode.
pub fn simulate(
    initial: &DensityMatrix,
    protocol: &Protocol,
    history: &StrengthHistory,
    local: bool,
) -> Result<Vec<PairStep>> {
    let dirs: Vec<ComplexMatrix> = protocol.pair_directions.iter().map(PauliProduct::matrix).collect();
    let mut rho = initial.clone();
    let mut steps = Vec::with_capacity(history.pairs());
    for i in 1..=history.pairs() {
        let strengths = history.pair(i);
        let lambdas: Vec<f64> = strengths.iter().map(|s| s.lambda).collect();
        let steering = steering_parameter(&rho, &dirs, &lambdas, &protocol.charlie)?;
        let next = if i < history.pairs() {
            Some(if local {
                let (a, b) = protocol.local_settings(strengths)?;
                local_pair_update(&rho, &a, &b)?
            } else {
                luders_update(&rho, &protocol.nonlocal_settings(strengths)?)?
            })
        } else {
            None
        };
        steps.push(PairStep {
            pair: i,
            steering,
            state: rho,
        });
        match next {
            Some(n) => rho = n,
            None => break,
        }
    }
    Ok(steps)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub pair: usize,
    pub steering: f64,
    pub steers: bool,
    /// State shared with this pair before it measures.
    pub state: DensityMatrix,
    /// `None` when the state is not compressible or the steerer is pure.
    pub charlie_ellipsoid: Option<SteeringEllipsoid>,
    pub ab_ellipsoid: Option<SteeringEllipsoid>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioRun {
    pub mode: Mode,
    pub bound: f64,
    pub pair_directions: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlocal: Option<Vec<PairReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local: Option<Vec<PairReport>>,
}

fn ellipsoids_of(state: &DensityMatrix, basis: CompressionBasis) -> (Option<SteeringEllipsoid>, Option<SteeringEllipsoid>) {
    let Ok(c) = compress(state, basis) else {
        return (None, None);
    };
    let Ok(b) = bloch_form(&c.state) else {
        return (None, None);
    };
    (
        ellipsoid(&b, SteeredParty::Charlie).ok(),
        ellipsoid(&b, SteeredParty::Ab).ok(),
    )
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let initial = ghz();
    let protocol = Protocol::derive(&initial, cfg)?;
    let history = cfg.history()?;
    let bound = cfg.bound()?;
    let report = |local: bool| -> Result<Vec<PairReport>> {
        Ok(simulate(&initial, &protocol, &history, local)?
            .into_iter()
            .map(|step| {
                let (charlie_ellipsoid, ab_ellipsoid) = ellipsoids_of(&step.state, cfg.compression);
                PairReport {
                    pair: step.pair,
                    steering: step.steering,
                    steers: step.steering > bound,
                    state: step.state,
                    charlie_ellipsoid,
                    ab_ellipsoid,
                }
            })
            .collect())
    };
    Ok(ScenarioRun {
        mode: cfg.mode,
        bound,
        pair_directions: protocol.pair_directions.iter().map(|d| d.to_string()).collect(),
        nonlocal: if cfg.mode.nonlocal() { Some(report(false)?) } else { None },
        local: if cfg.mode.local() { Some(report(true)?) } else { None },
    })
}

/// One row of a region scan or sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub params: Vec<f64>,
    /// `S_i` per pair (nonlocal), `None` when not computed.
    pub s: Vec<Option<f64>>,
    /// `S̃_i` per pair (local).
    pub st: Vec<Option<f64>>,
    pub region: String,
    pub bound: f64,
}

const ROMAN: [&str; 3] = ["I", "II", "III"];

/// Region label of a row; success is strict (`S > C`).
///
/// Compare mode: pairs `i ≥ 2` steering nonlocally but not locally are
/// "activated" and labelled `I` (pair 2), `II` (pair 3), joined with `+`;
/// without activation the label is `shared` if some pair steers in both
/// modes and `none` otherwise. Single-mode rows list the steering pairs
/// (`1+2`) or `none`.
pub fn region_label(s: &[Option<f64>], st: &[Option<f64>], bound: f64) -> String {
    let ok = |v: Option<f64>| v.is_some_and(|x| x > bound);
    let compare = s.iter().any(Option::is_some) && st.iter().any(Option::is_some);
    if compare {
        let activated: Vec<&str> = (1..s.len())
            .filter(|&i| ok(s[i]) && !ok(st[i]))
            .map(|i| ROMAN[i - 1])
            .collect();
        if !activated.is_empty() {
            return activated.join("+");
        }
        if (0..s.len()).any(|i| ok(s[i]) && ok(st[i])) {
            return "shared".into();
        }
        return "none".into();
    }
    let values = if s.iter().any(Option::is_some) { s } else { st };
    let steering: Vec<String> = (0..values.len())
        .filter(|&i| ok(values[i]))
        .map(|i| (i + 1).to_string())
        .collect();
    if steering.is_empty() {
        "none".into()
    } else {
        steering.join("+")
    }
}

/// Evaluates every pair of one configuration in the requested mode(s).
struct Evaluator {
    initial: DensityMatrix,
    protocol: Protocol,
    bound: f64,
    mode: Mode,
}

impl Evaluator {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let initial = ghz();
        Ok(Self {
            protocol: Protocol::derive(&initial, cfg)?,
            initial,
            bound: cfg.bound()?,
            mode: cfg.mode,
        })
    }

    fn record(&self, params: Vec<f64>, history: &StrengthHistory, width: usize) -> Result<ScanRecord> {
        let run = |local: bool| -> Result<Vec<Option<f64>>> {
            let steps = simulate(&self.initial, &self.protocol, history, local)?;
            let mut v: Vec<Option<f64>> = steps.iter().map(|s| Some(s.steering)).collect();
            v.resize(width, None);
            Ok(v)
        };
        let s = if self.mode.nonlocal() { run(false)? } else { vec![None; width] };
        let st = if self.mode.local() { run(true)? } else { vec![None; width] };
        Ok(ScanRecord {
            region: region_label(&s, &st, self.bound),
            params,
            s,
            st,
            bound: self.bound,
        })
    }
}

/// `samples` evenly spaced points on `[from, to]`, endpoints included.
pub fn linspace(from: f64, to: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n)
            .map(|k| if k == n - 1 { to } else { from + (to - from) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Equal-strength scan over `(λ⁽¹⁾, λ⁽²⁾) ∈ [0, 1]²`; later pairs keep the
/// template strengths. Rows are ordered with `λ⁽¹⁾` outermost.
pub fn scan_region(template: &ScenarioConfig, resolution: usize) -> Result<Vec<ScanRecord>> {
    if resolution < 2 {
        return Err(Error::Config("grid resolution must be at least 2".into()));
    }
    if template.pairs > MAX_TABULATED_PAIRS {
        return Err(Error::Config(format!("region scans cover at most {MAX_TABULATED_PAIRS} pairs")));
    }
    let base = template.lambdas()?;
    let eval = Evaluator::new(template)?;
    let n = template.settings();
    let grid = linspace(0.0, 1.0, resolution);
    let cells: Vec<(f64, f64)> = grid
        .iter()
        .flat_map(|&a| grid.iter().map(move |&b| (a, b)))
        .collect();
    cells
        .par_iter()
        .map(|&(l1, l2)| {
            let mut lambdas = base.clone();
            lambdas[0] = vec![l1; n];
            if lambdas.len() > 1 {
                lambdas[1] = vec![l2; n];
            }
            let history = template.history_from(&lambdas)?;
            eval.record(vec![l1, l2], &history, MAX_TABULATED_PAIRS)
        })
        .collect()
}

/// Sweep parameter: `lambda<pair>` sets every setting of a pair,
/// `lambda<pair>.<setting>` a single one (both 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId {
    pub pair: usize,
    pub setting: Option<usize>,
}

impl ParamId {
    pub fn apply(&self, lambdas: &mut [Vec<f64>], value: f64) -> Result<()> {
        let row = lambdas
            .get_mut(self.pair.wrapping_sub(1))
            .ok_or_else(|| Error::Config(format!("no pair {} in this scenario", self.pair)))?;
        match self.setting {
            None => row.iter_mut().for_each(|x| *x = value),
            Some(k) => {
                *row
                    .get_mut(k.wrapping_sub(1))
                    .ok_or_else(|| Error::Config(format!("pair {} has no setting {k}", self.pair)))? = value
            }
        }
        Ok(())
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("parameter {s:?} should look like lambda2 or lambda1.2"));
        let rest = s.trim().strip_prefix("lambda").ok_or_else(bad)?;
        let (pair, setting) = match rest.split_once('.') {
            Some((p, k)) => (p, Some(k.parse::<usize>().map_err(|_| bad())?)),
            None => (rest, None),
        };
        let pair = pair.parse::<usize>().map_err(|_| bad())?;
        if pair == 0 || setting == Some(0) {
            return Err(bad());
        }
        Ok(Self { pair, setting })
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.setting {
            Some(k) => write!(f, "lambda{}.{k}", self.pair),
            None => write!(f, "lambda{}", self.pair),
        }
    }
}

/// Applies `NAME=VALUE` overrides to a template's strengths, making every
/// touched pair explicit.
pub fn apply_fixes(template: &ScenarioConfig, fixes: &[(ParamId, f64)]) -> Result<ScenarioConfig> {
    let mut lambdas = template.lambdas()?;
    for (p, v) in fixes {
        p.apply(&mut lambdas, *v)?;
    }
    let mut cfg = template.clone();
    cfg.equal_strength = lambdas.iter().map(|r| r.iter().all(|&x| x == r[0])).collect();
    cfg.strengths = lambdas;
    Ok(cfg)
}

pub fn sweep_curve(template: &ScenarioConfig, vary: ParamId, from: f64, to: f64, samples: usize) -> Result<Vec<ScanRecord>> {
    if template.pairs > MAX_TABULATED_PAIRS {
        return Err(Error::Config(format!("sweeps cover at most {MAX_TABULATED_PAIRS} pairs")));
    }
    let base = template.lambdas()?;
    {
        let mut probe = base.clone();
        vary.apply(&mut probe, from)?;
    }
    let eval = Evaluator::new(template)?;
    linspace(from, to, samples)
        .par_iter()
        .map(|&x| {
            let mut lambdas = base.clone();
            vary.apply(&mut lambdas, x)?;
            let history = template.history_from(&lambdas)?;
            eval.record(vec![x], &history, template.pairs)
        })
        .collect()
}

/// The open interval of `vary` on which every pair steers, located on the
/// closed forms by a coarse scan of `[0, 1]` and bisection of both edges.
/// Returns the first such interval, or `None` if there is none.
pub fn sharing_window(template: &ScenarioConfig, vary: ParamId, local: bool, samples: usize) -> Result<Option<(f64, f64)>> {
    let base = template.lambdas()?;
    let bound = template.bound()?;
    let margin = |x: f64| -> Result<f64> {
        let mut lambdas = base.clone();
        vary.apply(&mut lambdas, x)?;
        let h = template.history_from(&lambdas)?;
        let mut worst = f64::INFINITY;
        for i in 1..=h.pairs() {
            let s = if local { closed_form_local(&h, i)? } else { closed_form_nonlocal(&h, i)? };
            worst = worst.min(s - bound);
        }
        Ok(worst)
    };
    let grid = linspace(0.0, 1.0, samples.max(3));
    let values = grid.iter().map(|&x| margin(x)).collect::<Result<Vec<_>>>()?;
    let Some(first) = values.iter().position(|&v| v > 0.0) else {
        return Ok(None);
    };
    let last = first + values[first..].iter().take_while(|&&v| v > 0.0).count() - 1;

    let bisect = |mut outside: f64, mut inside: f64| -> Result<f64> {
        for _ in 0..200 {
            let mid = 0.5 * (outside + inside);
            if mid == outside || mid == inside {
                break;
            }
            if margin(mid)? > 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (outside + inside))
    };
    let lo = if first == 0 { grid[0] } else { bisect(grid[first - 1], grid[first])? };
    let hi = if last + 1 == grid.len() { grid[last] } else { bisect(grid[last + 1], grid[last])? };
    Ok(Some((lo, hi)))
}

/// How pair-1 strengths are varied in an ellipsoid series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesKind {
    /// `λ₁⁽¹⁾ = λ₂⁽¹⁾ = λ`.
    Equal,
    /// `λ₁⁽¹⁾` fixed, `λ₂⁽¹⁾ = λ`.
    FixedFirst(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipsoidSample {
    /// Pair-1 strengths `(λ₁⁽¹⁾, λ₂⁽¹⁾)`.
    pub lambda: [f64; 2],
    pub charlie: SteeringEllipsoid,
    pub ab: SteeringEllipsoid,
}

/// Ellipsoids of the state handed to pair 2 after pair 1 measured with the
/// given strengths (nonlocal settings).
pub fn post_pair1_ellipsoids(template: &ScenarioConfig, lambda: [f64; 2]) -> Result<EllipsoidSample> {
    if template.settings() != 2 {
        return Err(Error::Config("ellipsoid series use two settings".into()));
    }
    let initial = ghz();
    let protocol = Protocol::derive(&initial, template)?;
    let strengths = [SettingStrength::symmetric(lambda[0])?, SettingStrength::symmetric(lambda[1])?];
    let rho = luders_update(&initial, &protocol.nonlocal_settings(&strengths)?)?;
    let b = bloch_form(&compress(&rho, template.compression)?.state)?;
    Ok(EllipsoidSample {
        lambda,
        charlie: ellipsoid(&b, SteeredParty::Charlie)?,
        ab: ellipsoid(&b, SteeredParty::Ab)?,
    })
}

pub fn ellipsoid_series(template: &ScenarioConfig, kind: SeriesKind, samples: usize) -> Result<Vec<EllipsoidSample>> {
    linspace(0.0, 1.0, samples)
        .into_iter()
        .map(|x| {
            let lambda = match kind {
                SeriesKind::Equal => [x, x],
                SeriesKind::FixedFirst(first) => [first, x],
            };
            post_pair1_ellipsoids(template, lambda)
        })
        .collect()
}

/// Largest number of pairs steering at once over an equal-strength grid on
/// `(λ⁽¹⁾, λ⁽²⁾)` with a sharp third pair. Compare-mode templates are
/// searched in nonlocal mode.
pub fn max_simultaneous_pairs(template: &ScenarioConfig, resolution: usize) -> Result<usize> {
    let mut cfg = template.clone();
    cfg.pairs = 3;
    cfg.strengths.truncate(2);
    if cfg.strengths.len() < 2 {
        cfg.strengths = vec![vec![0.0], vec![0.0]];
        cfg.equal_strength = vec![true, true];
    }
    if cfg.mode == Mode::Compare {
        cfg.mode = Mode::Nonlocal;
    }
    let records = scan_region(&cfg, resolution)?;
    Ok(records
        .iter()
        .map(|r| {
            let values = if cfg.mode == Mode::Local { &r.st } else { &r.s };
            values.iter().filter(|v| v.is_some_and(|x| x > r.bound)).count()
        })
        .max()
        .unwrap_or(0))
}

/// Formats with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

/// `lambda1,lambda2,S1,S2,S3,St1,St2,St3,region`
pub fn write_scan_csv<W: Write>(records: &[ScanRecord], out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda1", "lambda2", "S1", "S2", "S3", "St1", "St2", "St3", "region"])?;
    for r in records {
        let mut row = vec![fmt_sig(r.params[0]), fmt_sig(r.params[1])];
        row.extend((0..3).map(|i| opt(r.s.get(i).copied().flatten())));
        row.extend((0..3).map(|i| opt(r.st.get(i).copied().flatten())));
        row.push(r.region.clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `param,S1,S2,St1,St2`, with `S3,St3` appended when three pairs are swept.
pub fn write_sweep_csv<W: Write>(records: &[ScanRecord], out: W) -> anyhow::Result<()> {
    let three = records.iter().any(|r| r.s.len() > 2 || r.st.len() > 2);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["param", "S1", "S2", "St1", "St2"];
    if three {
        header.extend(["S3", "St3"]);
    }
    w.write_record(&header)?;
    for r in records {
        let get = |v: &[Option<f64>], i: usize| opt(v.get(i).copied().flatten());
        let mut row = vec![fmt_sig(r.params[0]), get(&r.s, 0), get(&r.s, 1), get(&r.st, 0), get(&r.st, 1)];
        if three {
            row.extend([get(&r.s, 2), get(&r.st, 2)]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn config_json_round_trip_and_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"mode":"compare","pairs":3,"strengths":[[0.4],[0.8,0.8]],
                "equal_strength":[true,true],"charlie_directions":["x","y"],"compression":"00,11"}"#,
        )
        .unwrap();
        assert_eq!(cfg.lambdas().unwrap(), vec![vec![0.4, 0.4], vec![0.8, 0.8], vec![1.0, 1.0]]);
        let back = ScenarioConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let minimal = ScenarioConfig::from_json(r#"{"mode":"nonlocal","pairs":1}"#).unwrap();
        assert_eq!(minimal.lambdas().unwrap(), vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn config_errors() {
        let missing = ScenarioConfig { pairs: 3, strengths: vec![vec![0.5]], ..Default::default() };
        assert!(missing.lambdas().is_err());
        let unequal = ScenarioConfig {
            strengths: vec![vec![0.5, 0.6]],
            equal_strength: vec![true],
            ..Default::default()
        };
        assert!(unequal.lambdas().is_err());
        let too_many = ScenarioConfig { pairs: 5, ..Default::default() };
        assert!(too_many.lambdas().is_err());
        let out_of_range = ScenarioConfig { strengths: vec![vec![1.5]], ..Default::default() };
        assert!(out_of_range.lambdas().is_err());
        assert!(ScenarioConfig::from_json(r#"{"mode":"sideways","pairs":1}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"mode":"local","pairs":1,"extra":1}"#).is_err());
    }

    #[test]
    fn derived_protocol_for_ghz() {
        let p = Protocol::derive(&ghz(), &ScenarioConfig::default()).unwrap();
        let labels: Vec<String> = p.pair_directions.iter().map(|d| d.to_string()).collect();
        assert_eq!(labels, vec!["-yy", "-yx"]);
    }

    #[test]
    fn headline_scenario() {
        let run = run_scenario(&ScenarioConfig::equal(Mode::Compare, &[0.5, 0.8])).unwrap();
        let nl = run.nonlocal.unwrap();
        let lo = run.local.unwrap();
        assert!((nl[0].steering - 0.5).abs() < 1e-12);
        assert!((nl[1].steering - 0.7464).abs() < 1e-4);
        assert!((lo[1].steering - 0.6828).abs() < 1e-4);
        assert!(nl[1].steers && !lo[1].steers);
        // Local updates leave the compressible subspace.
        assert!(nl[1].charlie_ellipsoid.is_some());
        assert!(lo[1].charlie_ellipsoid.is_none());
    }

    #[test]
    fn single_sharp_pair_sees_the_bloch_ball() {
        let run = run_scenario(&ScenarioConfig { pairs: 1, ..Default::default() }).unwrap();
        let p = &run.nonlocal.unwrap()[0];
        assert!((p.steering - 1.0).abs() < 1e-12);
        let e = p.charlie_ellipsoid.as_ref().unwrap();
        assert!(e.semiaxes.iter().all(|s| (s - 1.0).abs() < 1e-10));
    }

    #[test]
    fn region_labels() {
        let c = FRAC_1_SQRT_2;
        assert_eq!(region_label(&[Some(0.5), Some(0.75), None], &[Some(0.5), Some(0.68), None], c), "I");
        assert_eq!(region_label(&[Some(0.8), Some(0.72), Some(0.72)], &[Some(0.8), Some(0.6), Some(0.6)], c), "I+II");
        assert_eq!(region_label(&[Some(0.8), Some(0.5), None], &[Some(0.8), Some(0.5), None], c), "shared");
        assert_eq!(region_label(&[Some(0.1), Some(0.5), None], &[Some(0.1), Some(0.5), None], c), "none");
        assert_eq!(region_label(&[Some(0.8), Some(0.75), None], &[None, None, None], c), "1+2");
        assert_eq!(region_label(&[None, None], &[Some(c), Some(0.1)], c), "none");
    }

    #[test]
    fn scan_labels_and_pair1_boundary() {
        let cfg = ScenarioConfig::equal(Mode::Compare, &[0.0, 0.0]);
        let records = scan_region(&cfg, 11).unwrap();
        assert_eq!(records.len(), 121);
        assert_eq!(records[1].params, vec![0.0, 0.1]);
        for r in &records {
            let steers = r.s[0].unwrap() > r.bound;
            assert_eq!(steers, r.params[0] > FRAC_1_SQRT_2);
            assert_eq!(r.s[0], r.st[0]);
            assert!(r.s[2].is_none());
        }
    }

    #[test]
    fn param_ids() {
        assert_eq!("lambda2".parse::<ParamId>().unwrap(), ParamId { pair: 2, setting: None });
        assert_eq!("lambda1.2".parse::<ParamId>().unwrap(), ParamId { pair: 1, setting: Some(2) });
        assert!("lambda0".parse::<ParamId>().is_err());
        assert!("gamma1".parse::<ParamId>().is_err());
        assert!("lambda1.x".parse::<ParamId>().is_err());
        let mut l = vec![vec![0.0, 0.0]];
        assert!("lambda2".parse::<ParamId>().unwrap().apply(&mut l, 0.3).is_err());
        assert!("lambda1.3".parse::<ParamId>().unwrap().apply(&mut l, 0.3).is_err());
    }

    #[test]
    fn sweep_rejects_unknown_parameter() {
        let cfg = ScenarioConfig::default();
        let err = sweep_curve(&cfg, "lambda3".parse().unwrap(), 0.0, 1.0, 5);
        assert!(err.is_err());
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.7464101615137754), "0.746410161514");
        assert_eq!(fmt_sig(1.0), "1.00000000000");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.001234567890123), "0.00123456789012");
    }

    #[test]
    fn linspace_includes_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace(0.2, 0.2, 1), vec![0.2]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn coarse_grid_finds_at_least_one_pair() {
        let cfg = ScenarioConfig::equal(Mode::Nonlocal, &[0.0, 0.0, 1.0]);
        assert!(max_simultaneous_pairs(&cfg, 2).unwrap() >= 1);
    }
}
