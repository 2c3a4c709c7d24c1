//! The experiment configuration and the compact string specs it contains.
//!
//! Every section is optional and every field has a default; the resolved
//! value of each field is echoed in the run manifest. Unknown keys are
//! rejected at every level.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use brw_core::laws::{ClosedFormTransform, ExpTail, HarmonicTail, OffspringLaw, Outcome};
use brw_core::sim::{Barrier, DEFAULT_N_MIN, DEFAULT_SURVIVAL_CAP};
use brw_core::tube::{Functional, Profile};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::expr::{de_num, de_nums, de_opt_num, eval};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Filled from `BRW_SEED` (or 0) when absent.
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// `0` uses every core, `1` runs sequentially.
    pub workers: usize,
    pub allow_noncritical: bool,
    pub law: LawSpec,
    pub barrier: String,
    pub constants: ConstantsParams,
    pub ode: OdeParams,
    pub rate: RateParams,
    pub tube: TubeParams,
    pub sim: SimParams,
    pub census: CensusParams,
    pub classify: ClassifyParams,
    pub reduce: ReduceParams,
    pub m2o: M2oParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: None,
            output_dir: PathBuf::from("brw-out"),
            workers: 0,
            allow_noncritical: false,
            law: LawSpec::default(),
            barrier: "pow:6".into(),
            constants: ConstantsParams::default(),
            ode: OdeParams::default(),
            rate: RateParams::default(),
            tube: TubeParams::default(),
            sim: SimParams::default(),
            census: CensusParams::default(),
            classify: ClassifyParams::default(),
            reduce: ReduceParams::default(),
            m2o: M2oParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    /// Poisson(e^{σ²/2}) children at N(σ², σ²) displacements.
    CriticalGaussian {
        #[serde(deserialize_with = "de_num")]
        sigma_sq: f64,
    },
    PoissonGaussian {
        #[serde(deserialize_with = "de_num")]
        m: f64,
        #[serde(deserialize_with = "de_num")]
        mu: f64,
        #[serde(deserialize_with = "de_num")]
        s0sq: f64,
    },
    Finite {
        outcomes: Vec<OutcomeSpec>,
    },
}

impl Default for LawSpec {
    fn default() -> Self {
        LawSpec::CriticalGaussian { sigma_sq: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    #[serde(deserialize_with = "de_num")]
    pub prob: f64,
    #[serde(deserialize_with = "de_nums")]
    pub displacements: Vec<f64>,
}

impl LawSpec {
    pub fn build(&self) -> CliResult<OffspringLaw> {
        Ok(match self {
            LawSpec::CriticalGaussian { sigma_sq } => OffspringLaw::critical_gaussian(*sigma_sq)?,
            LawSpec::PoissonGaussian { m, mu, s0sq } => OffspringLaw::poisson_gaussian(*m, *mu, *s0sq)?,
            LawSpec::Finite { outcomes } => {
                OffspringLaw::finite(outcomes.iter().map(|o| Outcome::new(o.prob, o.displacements.clone())).collect())?
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsParams {
    #[serde(deserialize_with = "de_nums")]
    pub sigma_sq: Vec<f64>,
    /// Empty means `a = a_c` for each `σ²`.
    #[serde(deserialize_with = "de_nums")]
    pub a: Vec<f64>,
    /// Largest growth factor scanned for a negative certificate.
    pub e_max: u64,
}

impl Default for ConstantsParams {
    fn default() -> Self {
        ConstantsParams { sigma_sq: vec![1.0], a: Vec::new(), e_max: 64 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeParams {
    #[serde(deserialize_with = "de_num")]
    pub sigma_sq: f64,
    #[serde(deserialize_with = "de_num")]
    pub a: f64,
    #[serde(deserialize_with = "de_num")]
    pub s: f64,
    #[serde(deserialize_with = "de_num")]
    pub horizon: f64,
    #[serde(deserialize_with = "de_num")]
    pub tol: f64,
}

impl Default for OdeParams {
    fn default() -> Self {
        OdeParams { sigma_sq: 1.0, a: 0.0, s: 1.0, horizon: 1000.0, tol: 1e-10 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateParams {
    #[serde(deserialize_with = "de_num")]
    pub sigma_sq: f64,
    #[serde(deserialize_with = "de_nums")]
    pub a: Vec<f64>,
    #[serde(deserialize_with = "de_num")]
    pub tol: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        RateParams { sigma_sq: 1.0, a: (0..10).map(|i| 0.5 * i as f64).collect(), tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleSpec {
    #[default]
    CubeRoot,
    Absolute,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TubeParams {
    pub j: Vec<u64>,
    /// Profile spec: `const:<v>` or `cbrt:<coeff>:<offset>`.
    pub lower: String,
    pub upper: String,
    pub scale: ScaleSpec,
    /// `<lo>:<hi>` window on `S_j / j^{1/3}`.
    pub endpoint: Option<String>,
    pub runs: u64,
    /// Also evaluate the lattice oracle (integer atoms, absolute constant band).
    pub exact: bool,
}

impl Default for TubeParams {
    fn default() -> Self {
        TubeParams {
            j: vec![64, 216, 512],
            lower: "const:-1".into(),
            upper: "const:1".into(),
            scale: ScaleSpec::CubeRoot,
            endpoint: None,
            runs: 100_000,
            exact: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodSpec {
    #[default]
    Naive,
    Split,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub n: Vec<u64>,
    pub runs: u64,
    pub cap: usize,
    pub method: MethodSpec,
    /// Independent groups of the splitting estimator.
    pub groups: u64,
    /// Non-empty: sweep `pow:<a>` barriers over this grid from shared runs.
    #[serde(deserialize_with = "de_nums")]
    pub a_grid: Vec<f64>,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            n: vec![64],
            runs: 10_000,
            cap: DEFAULT_SURVIVAL_CAP,
            method: MethodSpec::Naive,
            groups: 20,
            a_grid: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CensusParams {
    #[serde(deserialize_with = "de_num")]
    pub a: f64,
    /// Corridor width; absent means `b_a`.
    #[serde(deserialize_with = "de_opt_num")]
    pub b: Option<f64>,
    pub growth: u64,
    pub k_max: u32,
    pub runs: u64,
    #[serde(deserialize_with = "de_num")]
    pub eps: f64,
    pub cap: Option<usize>,
}

impl Default for CensusParams {
    fn default() -> Self {
        CensusParams { a: 6.0, b: None, growth: 4, k_max: 4, runs: 1000, eps: 1.0, cap: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyParams {
    /// Absent means the law's `σ²`.
    #[serde(deserialize_with = "de_opt_num")]
    pub sigma_sq: Option<f64>,
    pub n_min: u64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams { sigma_sq: None, n_min: DEFAULT_N_MIN }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReduceParams {
    /// A closed-form transform analysed instead of `law`.
    pub family: Option<FamilySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    ExpTail {
        #[serde(deserialize_with = "de_num")]
        m: f64,
        #[serde(deserialize_with = "de_num")]
        x0: f64,
        #[serde(deserialize_with = "de_num")]
        rate: f64,
    },
    HarmonicTail {
        #[serde(deserialize_with = "de_num")]
        m: f64,
        #[serde(deserialize_with = "de_num")]
        x0: f64,
        #[serde(deserialize_with = "de_num")]
        zeta: f64,
        order: u8,
    },
}

impl FamilySpec {
    pub fn build(&self) -> CliResult<Arc<dyn ClosedFormTransform>> {
        Ok(match *self {
            FamilySpec::ExpTail { m, x0, rate } => {
                if !(m > 0.0 && rate > 0.0) {
                    return Err(CliError::config("reduce.family: exp-tail needs m > 0 and rate > 0"));
                }
                Arc::new(ExpTail { m, x0, rate })
            }
            FamilySpec::HarmonicTail { m, x0, zeta, order } => {
                if order != 2 && order != 3 {
                    return Err(CliError::config("reduce.family.order must be 2 or 3"));
                }
                if !(m > 0.0 && zeta > 0.0) {
                    return Err(CliError::config("reduce.family: harmonic-tail needs m > 0 and zeta > 0"));
                }
                Arc::new(HarmonicTail::new(m, x0, zeta, order))
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct M2oParams {
    pub n: Vec<usize>,
    /// `one`, `below-zero` or `tube:<w>`.
    pub functionals: Vec<String>,
}

impl Default for M2oParams {
    fn default() -> Self {
        M2oParams { n: vec![1, 2, 3, 4], functionals: vec!["one".into(), "below-zero".into(), "tube:1".into()] }
    }
}

/// Reads a TOML config, or the `config` object of a JSON run manifest.
pub fn load(path: &Path) -> CliResult<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let diag = |e: &dyn std::fmt::Display| CliError::config(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let mut json: serde_json::Value = serde_json::from_str(&text).map_err(|e| diag(&e))?;
        if let Some(inner) = json.get_mut("config") {
            json = inner.take();
        }
        let table = json_to_toml(json).ok_or_else(|| diag(&"not a JSON object"))?;
        ExperimentConfig::deserialize(table).map_err(|e| diag(&e))
    } else {
        toml::from_str(&text).map_err(|e| diag(&e))
    }
}

/// Reads a law table (`kind = ...` at top level).
pub fn load_law(path: &Path) -> CliResult<LawSpec> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// `null` entries are dropped, which restores the field's default.
fn json_to_toml(v: serde_json::Value) -> Option<toml::Value> {
    use serde_json::Value as J;
    Some(match v {
        J::Null => return None,
        J::Bool(b) => toml::Value::Boolean(b),
        J::Number(n) => match n.as_i64() {
            Some(i) => toml::Value::Integer(i),
            None => toml::Value::Float(n.as_f64()?),
        },
        J::String(s) => toml::Value::String(s),
        J::Array(a) => toml::Value::Array(a.into_iter().filter_map(json_to_toml).collect()),
        J::Object(o) => toml::Value::Table(o.into_iter().filter_map(|(k, v)| Some((k, json_to_toml(v)?))).collect()),
    })
}

fn fields<'a>(spec: &'a str, field: &str, tag: &str, names: &[&str]) -> CliResult<Vec<f64>> {
    let parts: Vec<&'a str> = spec.split(':').collect();
    let usage = format!("{tag}:{}", names.iter().map(|n| format!("<{n}>")).collect::<Vec<_>>().join(":"));
    if parts.len() != names.len() + 1 || parts[1..].iter().any(|p| p.trim().is_empty()) {
        return Err(CliError::config(format!("{field}: malformed spec `{spec}`, expected `{usage}`")));
    }
    parts[1..]
        .iter()
        .zip(names)
        .map(|(p, n)| eval(p).map_err(|e| CliError::config(format!("{field}: {n} in `{spec}`: {e}"))))
        .collect()
}

fn whole(x: f64, field: &str, name: &str) -> CliResult<u64> {
    if x >= 2.0 && x.fract() == 0.0 && x < 2f64.powi(63) {
        Ok(x as u64)
    } else {
        Err(CliError::config(format!("{field}: {name} must be an integer ≥ 2, got {x}")))
    }
}

/// `pow:<a>`, `osc:<a_plus>:<a_minus>`, `dip:<a_plus>:<a_minus>:<base>` or `lin:<eps>`.
pub fn parse_barrier(spec: &str, field: &str) -> CliResult<Barrier> {
    let tag = spec.split(':').next().unwrap_or_default();
    let barrier = match tag {
        "pow" => Barrier::PowerLaw { a: fields(spec, field, tag, &["a"])?[0] },
        "lin" => Barrier::Linear { eps: fields(spec, field, tag, &["eps"])?[0] },
        "osc" => {
            let v = fields(spec, field, tag, &["a_plus", "a_minus"])?;
            Barrier::OscillatingParity { a_plus: v[0], a_minus: v[1] }
        }
        "dip" => {
            let v = fields(spec, field, tag, &["a_plus", "a_minus", "base"])?;
            Barrier::SparseDip { a_plus: v[0], a_minus: v[1], base: whole(v[2], field, "base")? }
        }
        _ => {
            return Err(CliError::config(format!(
                "{field}: unknown barrier `{spec}`, expected one of pow:, osc:, dip:, lin:"
            )))
        }
    };
    barrier.validate().map_err(|e| CliError::config(format!("{field}: {e}")))?;
    Ok(barrier)
}

/// `const:<v>` or `cbrt:<coeff>:<offset>`.
pub fn parse_profile(spec: &str, field: &str) -> CliResult<Profile> {
    let tag = spec.split(':').next().unwrap_or_default();
    match tag {
        "const" => Ok(Profile::Constant { value: fields(spec, field, tag, &["value"])?[0] }),
        "cbrt" => {
            let v = fields(spec, field, tag, &["coeff", "offset"])?;
            Ok(Profile::CubeRootOffset { coeff: v[0], offset: v[1] })
        }
        _ => Err(CliError::config(format!("{field}: unknown profile `{spec}`, expected const: or cbrt:"))),
    }
}

/// `<lo>:<hi>`.
pub fn parse_window(spec: &str, field: &str) -> CliResult<(f64, f64)> {
    let v = fields(&format!("window:{spec}"), field, "window", &["lo", "hi"])
        .map_err(|_| CliError::config(format!("{field}: malformed window `{spec}`, expected `<lo>:<hi>`")))?;
    Ok((v[0], v[1]))
}

/// `one`, `below-zero` or `tube:<w>`.
pub fn parse_functional(spec: &str, field: &str) -> CliResult<Functional> {
    match spec {
        "one" => Ok(Functional::One),
        "below-zero" => Ok(Functional::IndicatorBelowZeroAtN),
        _ if spec.starts_with("tube:") => {
            Ok(Functional::IndicatorTubeConstant { w: fields(spec, field, "tube", &["w"])?[0] })
        }
        _ => {
            Err(CliError::config(format!("{field}: unknown functional `{spec}`, expected one, below-zero or tube:<w>")))
        }
    }
}
