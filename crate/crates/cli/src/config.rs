//! Flat key-value experiment configuration: `section.key = value` lines,
//! `#` comments, all errors collected with line numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use smc_core::filter::{FilterConfig, ResampleScheme, SamplerKind};
use smc_core::models::AuxCenter;

use crate::psi::Psi;

/// What the runner executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Filter,
    Smooth,
    Likelihood,
    CltCheck,
    ResampleCheck,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "filter" => Ok(Mode::Filter),
            "smooth" => Ok(Mode::Smooth),
            "likelihood" => Ok(Mode::Likelihood),
            "clt-check" => Ok(Mode::CltCheck),
            "resample-check" => Ok(Mode::ResampleCheck),
            _ => Err(format!(
                "unknown mode `{s}` (expected filter, smooth, likelihood, clt-check, or resample-check)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Filter => "filter",
            Mode::Smooth => "smooth",
            Mode::Likelihood => "likelihood",
            Mode::CltCheck => "clt-check",
            Mode::ResampleCheck => "resample-check",
        };
        f.write_str(s)
    }
}

/// Model selection plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    /// Bundled 2-state chain with a binary observation alphabet.
    Hmm2,
    /// Bundled 3-state chain with a 4-symbol observation alphabet.
    Hmm3,
    LinearGaussian {
        phi: f64,
        q: f64,
        c: f64,
        r: f64,
        m0: f64,
        p0: f64,
    },
    StochasticVolatility {
        phi: f64,
        sigma2: f64,
    },
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    pub n: usize,
    pub r: usize,
    pub scheme: ResampleScheme,
    pub sampler: SamplerKind,
    pub resample_interval: usize,
    pub ess_threshold: Option<f64>,
    pub two_stage: bool,
    pub aux_center: AuxCenter,
    pub t: usize,
    pub replicates: usize,
    pub seed: u64,
    pub psi: Psi,
    pub out: String,
    pub mode: Mode,
}

impl ExperimentConfig {
    /// The per-replicate filter settings; `stream` distinguishes replicates.
    pub fn filter_config(&self, stream: u64) -> FilterConfig {
        let mut cfg = FilterConfig::new(self.n, self.sampler, self.seed);
        cfg.r = self.r;
        cfg.scheme = self.scheme;
        cfg.resample_interval = self.resample_interval;
        cfg.ess_threshold = self.ess_threshold;
        cfg.two_stage_sir = self.two_stage;
        cfg.aux_center = self.aux_center;
        cfg.stream = stream;
        cfg
    }

    /// Canonical `key = value` echo of every effective setting, for the
    /// run manifest.
    pub fn echo(&self) -> String {
        let mut lines = Vec::new();
        match &self.model {
            ModelChoice::Hmm2 => lines.push("model.name = hmm2".to_string()),
            ModelChoice::Hmm3 => lines.push("model.name = hmm3".to_string()),
            ModelChoice::LinearGaussian {
                phi,
                q,
                c,
                r,
                m0,
                p0,
            } => {
                lines.push("model.name = linear-gaussian".to_string());
                lines.push(format!("model.phi = {phi}"));
                lines.push(format!("model.q = {q}"));
                lines.push(format!("model.c = {c}"));
                lines.push(format!("model.r = {r}"));
                lines.push(format!("model.m0 = {m0}"));
                lines.push(format!("model.p0 = {p0}"));
            }
            ModelChoice::StochasticVolatility { phi, sigma2 } => {
                lines.push("model.name = stochastic-volatility".to_string());
                lines.push(format!("model.phi = {phi}"));
                lines.push(format!("model.sigma2 = {sigma2}"));
            }
        }
        lines.push(format!("filter.n = {}", self.n));
        lines.push(format!("filter.r = {}", self.r));
        lines.push(format!("filter.scheme = {:?}", self.scheme).to_lowercase());
        lines.push(format!("filter.sampler = {}", sampler_name(self.sampler)));
        lines.push(format!("filter.resample_interval = {}", self.resample_interval));
        if let Some(th) = self.ess_threshold {
            lines.push(format!("filter.ess_threshold = {th}"));
        }
        lines.push(format!("filter.two_stage = {}", self.two_stage));
        lines.push(format!("filter.aux_center = {}", aux_center_name(self.aux_center)));
        lines.push(format!("experiment.t = {}", self.t));
        lines.push(format!("experiment.replicates = {}", self.replicates));
        lines.push(format!("experiment.seed = {}", self.seed));
        lines.push(format!("experiment.psi = {}", psi_name(self.psi)));
        lines.push(format!("experiment.out = {}", self.out));
        lines.push(format!("experiment.mode = {}", self.mode));
        lines.join("\n")
    }
}

fn sampler_name(s: SamplerKind) -> &'static str {
    match s {
        SamplerKind::Sir => "sir",
        SamplerKind::AcceptReject => "accept-reject",
        SamplerKind::AuxAcceptReject => "aux-accept-reject",
        SamplerKind::Sis => "sis",
    }
}

fn aux_center_name(c: AuxCenter) -> &'static str {
    match c {
        AuxCenter::Optimized => "optimized",
        AuxCenter::PriorMean => "prior-mean",
        AuxCenter::Shephard => "shephard",
    }
}

fn psi_name(p: Psi) -> String {
    match p {
        Psi::Identity => "identity".to_string(),
        Psi::Square => "square".to_string(),
        Psi::Indicator(k) => format!("indicator:{k}"),
    }
}

/// One configuration problem, located by line when possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

struct RawEntry {
    line: usize,
    value: String,
}

struct Parser {
    entries: BTreeMap<String, RawEntry>,
    errors: Vec<ConfigError>,
}

impl Parser {
    fn err(&mut self, line: Option<usize>, message: String) {
        self.errors.push(ConfigError { line, message });
    }

    fn take(&mut self, key: &str) -> Option<RawEntry> {
        self.entries.remove(key)
    }

    fn parse_as<T: FromStr>(&mut self, key: &str, type_name: &str) -> Option<T> {
        let entry = self.take(key)?;
        match entry.value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(
                    Some(entry.line),
                    format!("{key}: expected {type_name}, got `{}`", entry.value),
                );
                None
            }
        }
    }

    fn required<T: FromStr>(&mut self, key: &str, type_name: &str) -> Option<T> {
        if !self.entries.contains_key(key) {
            self.err(None, format!("missing required key `{key}`"));
            return None;
        }
        self.parse_as(key, type_name)
    }

    /// Parse with a domain-specific `FromStr` whose error message we keep.
    fn parse_named<T: FromStr<Err = String>>(&mut self, key: &str) -> Option<T> {
        let entry = self.take(key)?;
        match entry.value.parse::<T>() {
            Ok(v) => Some(v),
            Err(msg) => {
                self.err(Some(entry.line), format!("{key}: {msg}"));
                None
            }
        }
    }
}

/// Parses and validates a config, collecting every error instead of
/// stopping at the first one.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut p = Parser {
        entries: BTreeMap::new(),
        errors: Vec::new(),
    };

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            p.err(Some(lineno), format!("expected `key = value`, got `{line}`"));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !key.contains('.') {
            p.err(Some(lineno), format!("key `{key}` has no section prefix"));
            continue;
        }
        if let Some(prev) = p.entries.get(&key) {
            let msg = format!(
                "duplicate key `{key}` (already set on line {})",
                prev.line
            );
            p.err(Some(lineno), msg);
            continue;
        }
        p.entries.insert(key, RawEntry { line: lineno, value });
    }

    let model_name: Option<String> = p.required("model.name", "a model name");
    let model = match model_name.as_deref() {
        Some("hmm2") => Some(ModelChoice::Hmm2),
        Some("hmm3") => Some(ModelChoice::Hmm3),
        Some("linear-gaussian") => {
            let phi = p.parse_as::<f64>("model.phi", "a number").unwrap_or(0.9);
            let q = p.parse_as::<f64>("model.q", "a number").unwrap_or(1.0);
            let c = p.parse_as::<f64>("model.c", "a number").unwrap_or(1.0);
            let r = p.parse_as::<f64>("model.r", "a number").unwrap_or(1.0);
            let m0 = p.parse_as::<f64>("model.m0", "a number").unwrap_or(0.0);
            let p0 = p.parse_as::<f64>("model.p0", "a number").unwrap_or(1.0);
            Some(ModelChoice::LinearGaussian {
                phi,
                q,
                c,
                r,
                m0,
                p0,
            })
        }
        Some("stochastic-volatility") => {
            let phi = p.parse_as::<f64>("model.phi", "a number").unwrap_or(0.9);
            let sigma2 = p.parse_as::<f64>("model.sigma2", "a number").unwrap_or(1.0);
            Some(ModelChoice::StochasticVolatility { phi, sigma2 })
        }
        Some(other) => {
            p.err(
                None,
                format!(
                    "model.name: unknown model `{other}` (expected hmm2, hmm3, linear-gaussian, or stochastic-volatility)"
                ),
            );
            None
        }
        None => None,
    };

    let n: Option<usize> = p.required("filter.n", "a positive integer");
    let r: Option<usize> = p.parse_as("filter.r", "a positive integer");
    let scheme = p
        .parse_named::<SchemeArg>("filter.scheme")
        .map(|s| s.0)
        .unwrap_or(ResampleScheme::Systematic);
    let sampler = p
        .parse_named::<SamplerArg>("filter.sampler")
        .map(|s| s.0)
        .unwrap_or(SamplerKind::Sir);
    let resample_interval: usize = p
        .parse_as("filter.resample_interval", "a positive integer")
        .unwrap_or(1);
    let ess_threshold: Option<f64> = p.parse_as("filter.ess_threshold", "a number");
    let two_stage: bool = p
        .parse_as("filter.two_stage", "true or false")
        .unwrap_or(false);
    let aux_center = p
        .parse_named::<AuxCenterArg>("filter.aux_center")
        .map(|s| s.0)
        .unwrap_or(AuxCenter::Optimized);

    let t: Option<usize> = p.required("experiment.t", "a positive integer");
    let replicates: usize = p
        .parse_as("experiment.replicates", "a positive integer")
        .unwrap_or(1);
    let seed: Option<u64> = p.required("experiment.seed", "a non-negative integer");
    let psi = p.parse_named::<Psi>("experiment.psi").unwrap_or(Psi::Identity);
    let out: String = p
        .take("experiment.out")
        .map(|e| e.value)
        .unwrap_or_else(|| "out".to_string());
    let mode = p
        .parse_named::<Mode>("experiment.mode")
        .unwrap_or(Mode::Filter);

    let leftovers: Vec<(String, usize)> = p
        .entries
        .iter()
        .map(|(k, e)| (k.clone(), e.line))
        .collect();
    for (key, line) in leftovers {
        p.err(Some(line), format!("unknown or unused key `{key}`"));
    }

    if let Some(n) = n {
        if n == 0 {
            p.err(None, "filter.n must be >= 1".to_string());
        }
    }
    if let Some(t) = t {
        if t == 0 {
            p.err(None, "experiment.t must be >= 1".to_string());
        }
    }
    if replicates == 0 {
        p.err(None, "experiment.replicates must be >= 1".to_string());
    }

    if !p.errors.is_empty() {
        return Err(p.errors);
    }
    let (model, n, t, seed) = (model.unwrap(), n.unwrap(), t.unwrap(), seed.unwrap());
    Ok(ExperimentConfig {
        r: r.unwrap_or(n),
        model,
        n,
        scheme,
        sampler,
        resample_interval,
        ess_threshold,
        two_stage,
        aux_center,
        t,
        replicates,
        seed,
        psi,
        out,
        mode,
    })
}

struct SchemeArg(ResampleScheme);
struct SamplerArg(SamplerKind);
struct AuxCenterArg(AuxCenter);

impl FromStr for SchemeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<ResampleScheme>()
            .map(SchemeArg)
            .map_err(|e| e.to_string())
    }
}

impl FromStr for SamplerArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<SamplerKind>()
            .map(SamplerArg)
            .map_err(|e| e.to_string())
    }
}

impl FromStr for AuxCenterArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "optimized" => Ok(AuxCenterArg(AuxCenter::Optimized)),
            "prior-mean" => Ok(AuxCenterArg(AuxCenter::PriorMean)),
            "shephard" => Ok(AuxCenterArg(AuxCenter::Shephard)),
            _ => Err(format!(
                "unknown center `{s}` (expected optimized, prior-mean, or shephard)"
            )),
        }
    }
}
