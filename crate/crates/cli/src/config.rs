//! JSON run configuration. Every section is optional; unknown keys are errors.

use std::borrow::Cow;

use gaborheat::battery::{hermite_function, random_bandlimited, wave_packet, DEFAULT_SEED};
use gaborheat::propagator::{EvolutionProblem, DEFAULT_DT, DEFAULT_GUARD_MARGIN};
use gaborheat::semilinear::{Factor, InitialGuess, Monomial, Nonlinearity, PicardOptions};
use gaborheat::weyl::Quantization;
use gaborheat::{Complex64, Grid, GridFunction, ModulationNormSpec, PhaseLattice, PhasePoint, Symbol};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use schemars::{json_schema, JsonSchema, Schema, SchemaGenerator};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub symbols: SymbolsConfig,
    pub time: TimeConfig,
    pub norm: NormConfig,
    pub nonlinearity: NonlinearityConfig,
    pub tolerances: TolerancesConfig,
    /// Initial datum, or the analysed function for `stft`, `modnorm`, `wavefront`.
    pub initial: Datum,
    pub seed: Option<u64>,
    /// `enforce` turns failed hypothesis checks into exit code 4.
    pub hypotheses: HypothesisPolicy,
    pub output: OutputConfig,
    pub lattice: Option<LatticeConfig>,
    pub quantize: QuantizeConfig,
    pub garding: GardingConfig,
    pub propagate: PropagateConfig,
    pub gabor: GaborConfig,
    pub energy: EnergyConfig,
    pub extract: ExtractConfig,
    pub analytic: AnalyticConfig,
    pub lipschitz: LipschitzConfig,
    pub contro1: Contro1Config,
    pub contro2: Contro2Config,
    pub wavefront: WavefrontConfig,
    pub pseudolocality: PseudolocalityConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { d: 1, length: 40.0, n: 512 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolsConfig {
    /// Builtin name or expression in `t`, `x`, `xi`.
    pub a: String,
    pub b: String,
}

impl Default for SymbolsConfig {
    fn default() -> Self {
        Self { a: "heat".into(), b: "zero".into() }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub final_time: f64,
    pub dt: f64,
    pub rule: RuleConfig,
    pub guard_margin: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { final_time: 0.5, dt: DEFAULT_DT, rule: RuleConfig::Torus, guard_margin: DEFAULT_GUARD_MARGIN }
    }
}

/// Weyl quantization rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum RuleConfig {
    Midpoint,
    Torus,
    Geodesic,
}

impl From<RuleConfig> for Quantization {
    fn from(r: RuleConfig) -> Self {
        match r {
            RuleConfig::Midpoint => Quantization::Midpoint,
            RuleConfig::Torus => Quantization::Torus,
            RuleConfig::Geodesic => Quantization::Geodesic,
        }
    }
}

/// An `L^p` exponent: a number ≥ 1 or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Self(v)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity") => Ok(Self(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("exponent must be a number or \"inf\", got {t:?}"))),
        }
    }
}

impl JsonSchema for Exponent {
    fn schema_name() -> Cow<'static, str> {
        "Exponent".into()
    }

    fn json_schema(_: &mut SchemaGenerator) -> Schema {
        json_schema!({
            "oneOf": [
                { "type": "number", "minimum": 1 },
                { "type": "string", "enum": ["inf", "infinity"] }
            ]
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct NormConfig {
    pub p: Exponent,
    pub q: Exponent,
    pub s: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self { p: Exponent(2.0), q: Exponent(1.0), s: 0.0 }
    }
}

impl NormConfig {
    pub fn spec(&self) -> Result<ModulationNormSpec, CliError> {
        Ok(ModulationNormSpec::new(self.p.0, self.q.0, self.s)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearityConfig {
    /// Factor `g(t, x)` as an expression.
    pub g: String,
    /// Rows `[j, k, re, im]` for the term `(re + i im) u^j ū^k`.
    pub coeffs: Vec<[f64; 4]>,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self { g: "1".into(), coeffs: vec![[2.0, 0.0, 1.0, 0.0]] }
    }
}

impl NonlinearityConfig {
    pub fn build(&self) -> Result<Nonlinearity, CliError> {
        let factor = if self.g.trim() == "1" { Factor::one() } else { Factor::parse(&self.g)? };
        let terms = self
            .coeffs
            .iter()
            .map(|&[j, k, re, im]| {
                let index = |v: f64| {
                    (v >= 0.0 && v.fract() == 0.0)
                        .then_some(v as u32)
                        .ok_or_else(|| CliError::Config(format!("monomial exponent {v} is not a nonnegative integer")))
                };
                Ok(Monomial { j: index(j)?, k: index(k)?, coeff: Complex64::new(re, im) })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Nonlinearity::new(factor, terms)?)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct TolerancesConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub initial_guess: InitialGuessConfig,
}

impl Default for TolerancesConfig {
    fn default() -> Self {
        let d = PicardOptions::default();
        Self { tol: d.tol, max_iter: d.max_iter, initial_guess: InitialGuessConfig::Linear }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuessConfig {
    Linear,
    Zero,
}

impl TolerancesConfig {
    pub fn options(&self) -> PicardOptions {
        let initial = match self.initial_guess {
            InitialGuessConfig::Linear => InitialGuess::Linear,
            InitialGuessConfig::Zero => InitialGuess::Zero,
        };
        PicardOptions { tol: self.tol, max_iter: self.max_iter, initial }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Datum {
    /// `amplitude · exp(−(x − center)²/(2 width²))`.
    Gaussian {
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
    /// Discrete delta at the origin, unit mass.
    Delta,
    WavePacket {
        center: f64,
        width: f64,
        freq: f64,
    },
    Hermite {
        k: usize,
    },
    /// Random band-limited function drawn from the run seed.
    Random {
        max_freq: f64,
    },
    /// Real expression in `x`.
    Expression {
        source: String,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for Datum {
    fn default() -> Self {
        Datum::Gaussian { center: 0.0, width: 1.0, amplitude: 1.0 }
    }
}

impl Datum {
    pub fn build(&self, grid: Grid, seed: u64) -> Result<GridFunction, CliError> {
        Ok(match self {
            Datum::Gaussian { center, width, amplitude } => {
                if !(*width > 0.0) {
                    return Err(CliError::Config(format!("Gaussian width {width} must be positive")));
                }
                GridFunction::from_real_fn(grid, |p| amplitude * (-0.5 * ((p[0] - center) / width).powi(2)).exp())
            }
            Datum::Constant { value } => GridFunction::from_real_fn(grid, |_| *value),
            Datum::Delta => GridFunction::delta(grid),
            Datum::WavePacket { center, width, freq } => wave_packet(grid, *center, *width, *freq),
            Datum::Hermite { k } => hermite_function(grid, *k),
            Datum::Random { max_freq } => random_bandlimited(grid, &mut ChaCha8Rng::seed_from_u64(seed), *max_freq),
            Datum::Expression { source } => {
                let e = gaborheat::symbols::Expression::parse(source)?;
                let f = GridFunction::from_real_fn(grid, |p| e.eval(0.0, p[0], 0.0));
                if f.values().iter().any(|v| !v.re.is_finite()) {
                    return Err(CliError::Config(format!("datum {source:?} is not finite on the grid")));
                }
                f
            }
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisPolicy {
    #[default]
    Enforce,
    Warn,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryLayout {
    /// One file, columns `t,index,x,re,im`.
    #[default]
    Long,
    /// One file per step time.
    Slices,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub trajectory: TrajectoryLayout,
}

/// Rectangular phase-space lattice `|x|, |ξ| ≤ half_width` with steps `alpha`, `beta`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub alpha: f64,
    pub beta: f64,
    pub half_width: f64,
}

impl LatticeConfig {
    pub fn build(&self, grid: Grid) -> Result<PhaseLattice, CliError> {
        Ok(PhaseLattice::square(grid, self.alpha, self.beta, self.half_width)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizeConfig {
    /// Symbol to quantize; defaults to `symbols.a`.
    pub symbol: Option<String>,
    pub t: f64,
    pub rule: RuleConfig,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        Self { symbol: None, t: 0.0, rule: RuleConfig::Midpoint }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct GardingConfig {
    pub k: Vec<i32>,
    pub t: f64,
}

impl Default for GardingConfig {
    fn default() -> Self {
        Self { k: vec![0, 1], t: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct PropagateConfig {
    /// Halve `dt` until successive final states agree to this L² distance
    /// (time-dependent problems only).
    pub converge_tol: Option<f64>,
    /// Also write `S(T, 0)` as a WOPM file.
    pub write_matrix: bool,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        Self { converge_tol: Some(1e-6), write_matrix: false }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct GaborConfig {
    pub t: f64,
    pub sectors: usize,
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self { t: 0.1, sectors: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub k: u32,
    /// Shifts `[x, xi]`; defaults to the 13 points of `{−8, −4, 0, 4, 8}²`
    /// with `|z| ≤ 8`.
    pub z: Option<Vec<[f64; 2]>>,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { k: 1, z: None }
    }
}

impl EnergyConfig {
    pub fn shifts(&self) -> Vec<PhasePoint> {
        match &self.z {
            Some(z) => z.iter().map(|&[x, xi]| PhasePoint::new(x, xi)).collect(),
            None => {
                let axis = [-8.0, -4.0, 0.0, 4.0, 8.0];
                axis.iter()
                    .flat_map(|&x| axis.iter().map(move |&xi| PhasePoint::new(x, xi)))
                    .filter(|z| z.norm() <= 8.0 + 1e-12)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    pub t: f64,
    /// Write every `stride`-th midpoint and frequency.
    pub stride: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { t: 0.1, stride: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticConfig {
    pub eps: f64,
    pub orders: Vec<u32>,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self { eps: 0.25, orders: (1..=8).collect() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct LipschitzConfig {
    /// Second datum; when absent it is `scale` times the first.
    pub v0: Option<Datum>,
    pub scale: f64,
    pub radius: f64,
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        Self { v0: None, scale: 1.001, radius: 10.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Contro1Config {
    pub t_list: Vec<f64>,
}

impl Default for Contro1Config {
    fn default() -> Self {
        Self { t_list: vec![0.1, 0.5, 1.0, 2.0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Contro2Config {
    pub p: Exponent,
    pub q: Exponent,
    pub box_sizes: Vec<f64>,
}

impl Default for Contro2Config {
    fn default() -> Self {
        Self { p: Exponent(f64::INFINITY), q: Exponent(1.0), box_sizes: vec![20.0, 40.0, 80.0] }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct WavefrontConfig {
    pub angular_n: usize,
    pub threshold: f64,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
}

impl Default for WavefrontConfig {
    fn default() -> Self {
        let d = gaborheat::wavefront::WavefrontParams::default();
        Self { angular_n: d.angular_n, threshold: d.threshold, r_min: d.r_min, r_max: d.r_max }
    }
}

impl WavefrontConfig {
    pub fn params(&self) -> gaborheat::wavefront::WavefrontParams {
        gaborheat::wavefront::WavefrontParams {
            angular_n: self.angular_n,
            threshold: self.threshold,
            r_min: self.r_min,
            r_max: self.r_max,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct PseudolocalityConfig {
    /// Evolution time; defaults to `time.T`.
    pub t: Option<f64>,
}

impl Default for PseudolocalityConfig {
    fn default() -> Self {
        Self { t: None }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(self.grid.d, self.grid.length, self.grid.n)?)
    }

    pub fn datum(&self) -> Result<GridFunction, CliError> {
        self.initial.build(self.grid()?, self.seed())
    }

    pub fn problem(&self) -> Result<EvolutionProblem, CliError> {
        let a = Symbol::named_or_parse(&self.symbols.a)?;
        let b = Symbol::named_or_parse(&self.symbols.b)?;
        Ok(EvolutionProblem::new(a, b, self.time.final_time, self.time.dt, self.grid()?)?
            .with_rule(self.time.rule.into())
            .with_guard_margin(self.time.guard_margin))
    }
}

pub fn schema() -> Schema {
    schemars::schema_for!(RunConfig)
}
