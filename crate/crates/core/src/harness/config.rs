//! Flat `key = value` experiment configuration.
//!
//! One pair per line, `#` starts a comment, list values are comma-separated.
//! Unknown keys and repeated keys are rejected.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `n` | 256 | signal length N |
//! | `k` | 10 | sparsity |
//! | `l` | 10 | node count(s) L, list |
//! | `m` | 15,20,25,30,40,60 | measurements per node, list |
//! | `sigma2` | 0.01 | noise variance |
//! | `amp_low`, `amp_high` | 10, 15 | nonzero amplitude range |
//! | `topology` | complete | `complete`, `ring` or `random` |
//! | `n0` | half | ring neighborhood size(s), list of integers or `half` (L/2) |
//! | `edge_p` | 0.5 | edge probability for `random` |
//! | `algorithms` | somp,domp,dcomp1,dcomp2 | tags, optionally `tag@n0` to run on a ring |
//! | `trials` | 500 | Monte Carlo trials per sweep point |
//! | `seed` | 0 | master seed |
//! | `out` | stdout | output path |
//! | `format` | csv | `csv` or `json` |
//! | `mac_mode` | false | one matrix shared by all nodes |
//! | `identical_signals` | false | every node carries the same amplitudes |
//! | `delta0`, `slack_t` | 0.5, 1 | block-RIP bound parameters |
//! | `gamma_c_min` | from ensemble | minimum component SNR override |
//! | `enumeration_cap` | 1000000 | ordered support pairs averaged exactly |
//! | `xi_pairs` | none | sampled pairs beyond the cap |

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mac::DEFAULT_ENUMERATION_CAP;
use crate::metrics::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologySpec {
    Complete,
    Ring,
    Random,
}

/// A ring neighborhood size, either fixed or half the node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodSize {
    Fixed(usize),
    Half,
}

impl NeighborhoodSize {
    pub fn resolve(self, l_count: usize) -> usize {
        match self {
            NeighborhoodSize::Fixed(n0) => n0,
            NeighborhoodSize::Half => l_count / 2,
        }
    }
}

impl fmt::Display for NeighborhoodSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeighborhoodSize::Fixed(n0) => write!(f, "{n0}"),
            NeighborhoodSize::Half => f.write_str("half"),
        }
    }
}

impl FromStr for NeighborhoodSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "half" {
            return Ok(NeighborhoodSize::Half);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("'{s}' is not a positive integer or 'half'")),
            Ok(v) => Ok(NeighborhoodSize::Fixed(v)),
        }
    }
}

/// An algorithm tag with an optional ring neighborhood it runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    pub n0: Option<NeighborhoodSize>,
}

impl AlgorithmSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self { algorithm, n0: None }
    }

    /// Row label, e.g. `dcomp2@7`.
    pub fn label(&self) -> String {
        match self.n0 {
            Some(n0) => format!("{}@{n0}", self.algorithm),
            None => self.algorithm.to_string(),
        }
    }

    /// Whether recovery depends on the neighborhood structure.
    pub fn uses_neighborhoods(&self) -> bool {
        matches!(self.algorithm, Algorithm::Dcomp1Nbhd | Algorithm::Dcomp2)
    }
}

impl FromStr for AlgorithmSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (tag, n0) = match s.split_once('@') {
            Some((tag, n0)) => (tag, Some(n0.parse::<NeighborhoodSize>()?)),
            None => (s, None),
        };
        let algorithm = tag.parse::<Algorithm>().map_err(|e| e.to_string())?;
        let spec = AlgorithmSpec { algorithm, n0 };
        if n0.is_some() && !spec.uses_neighborhoods() {
            return Err(format!("'{tag}' does not take a neighborhood size"));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub l: Vec<usize>,
    pub m: Vec<usize>,
    pub sigma2: f64,
    pub amp_low: f64,
    pub amp_high: f64,
    pub topology: TopologySpec,
    pub n0: Vec<NeighborhoodSize>,
    pub edge_p: f64,
    pub algorithms: Vec<AlgorithmSpec>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub mac_mode: bool,
    pub identical_signals: bool,
    pub delta0: f64,
    pub slack_t: f64,
    pub gamma_c_min: Option<f64>,
    pub enumeration_cap: u128,
    pub xi_pairs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 256,
            k: 10,
            l: vec![10],
            m: vec![15, 20, 25, 30, 40, 60],
            sigma2: 0.01,
            amp_low: 10.0,
            amp_high: 15.0,
            topology: TopologySpec::Complete,
            n0: vec![NeighborhoodSize::Half],
            edge_p: 0.5,
            algorithms: [Algorithm::Somp, Algorithm::Domp, Algorithm::Dcomp1, Algorithm::Dcomp2]
                .into_iter()
                .map(AlgorithmSpec::new)
                .collect(),
            trials: 500,
            seed: 0,
            out: None,
            format: OutputFormat::Csv,
            mac_mode: false,
            identical_signals: false,
            delta0: 0.5,
            slack_t: 1.0,
            gamma_c_min: None,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            xi_pairs: None,
        }
    }
}

fn config_error(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn scalar<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse '{value}': {e}"))
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(scalar)
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err("list is empty".into());
    }
    Ok(items)
}

fn flag(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("'{value}' is not a boolean")),
    }
}

fn positive(v: f64) -> std::result::Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

impl ExperimentConfig {
    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "n" => self.n = scalar(value)?,
            "k" => self.k = scalar(value)?,
            "l" => self.l = list(value)?,
            "m" => self.m = list(value)?,
            "sigma2" => self.sigma2 = scalar(value)?,
            "amp_low" => self.amp_low = scalar(value)?,
            "amp_high" => self.amp_high = scalar(value)?,
            "topology" => {
                self.topology = match value {
                    "complete" => TopologySpec::Complete,
                    "ring" => TopologySpec::Ring,
                    "random" => TopologySpec::Random,
                    _ => return Err(format!("unknown topology '{value}'")),
                }
            }
            "n0" => self.n0 = list(value)?,
            "edge_p" => self.edge_p = scalar(value)?,
            "algorithms" => self.algorithms = list(value)?,
            "trials" => self.trials = scalar(value)?,
            "seed" => self.seed = scalar(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => {
                self.format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => return Err(format!("unknown format '{value}'")),
                }
            }
            "mac_mode" => self.mac_mode = flag(value)?,
            "identical_signals" => self.identical_signals = flag(value)?,
            "delta0" => self.delta0 = scalar(value)?,
            "slack_t" => self.slack_t = scalar(value)?,
            "gamma_c_min" => self.gamma_c_min = Some(positive(scalar(value)?)?),
            "enumeration_cap" => self.enumeration_cap = scalar(value)?,
            "xi_pairs" => self.xi_pairs = Some(scalar(value)?),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Checks cross-field invariants; returns the offending key and message.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.n < 2 {
            return Err(("n", format!("n must be at least 2, got {}", self.n)));
        }
        if self.k == 0 || self.k >= self.n {
            return Err(("k", format!("k must satisfy 1 <= k < n, got k={}", self.k)));
        }
        if let Some(&l) = self.l.iter().find(|&&l| l == 0) {
            return Err(("l", format!("node count must be positive, got {l}")));
        }
        if let Some(&m) = self.m.iter().find(|&&m| m == 0 || m > self.n) {
            return Err(("m", format!("measurement count must lie in [1, n], got {m}")));
        }
        if let Some(&m) = self.m.iter().find(|&&m| m < self.k) {
            return Err(("m", format!("greedy recovery needs k <= M, got M={m} < k={}", self.k)));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(("sigma2", format!("noise variance must be nonnegative, got {}", self.sigma2)));
        }
        if !(self.amp_low <= self.amp_high) || !self.amp_low.is_finite() || !self.amp_high.is_finite() {
            return Err(("amp_low", format!("need amp_low <= amp_high, got [{}, {}]", self.amp_low, self.amp_high)));
        }
        if self.amp_low == 0.0 && self.amp_high == 0.0 {
            return Err(("amp_high", "amplitude range must contain nonzero values".into()));
        }
        if !(self.edge_p > 0.0 && self.edge_p <= 1.0) {
            return Err(("edge_p", format!("edge probability must lie in (0, 1], got {}", self.edge_p)));
        }
        if self.trials == 0 {
            return Err(("trials", "trials must be positive".into()));
        }
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return Err(("delta0", format!("delta0 must lie in (0, 1), got {}", self.delta0)));
        }
        if !(self.slack_t > 0.0) || !self.slack_t.is_finite() {
            return Err(("slack_t", format!("slack_t must be positive, got {}", self.slack_t)));
        }
        if self.algorithms.is_empty() {
            return Err(("algorithms", "at least one algorithm is required".into()));
        }
        let mut seen = HashSet::new();
        for spec in &self.algorithms {
            if !seen.insert(spec.label()) {
                return Err(("algorithms", format!("'{}' is listed twice", spec.label())));
            }
            if spec.algorithm == Algorithm::MacOmp && !self.mac_mode {
                return Err(("algorithms", "mac-omp requires mac_mode = true".into()));
            }
            if spec.algorithm == Algorithm::Dcomp1 && self.topology != TopologySpec::Complete {
                return Err(("algorithms", "dcomp1 fuses network-wide and needs topology = complete".into()));
            }
        }
        if self.xi_pairs == Some(0) || self.xi_pairs == Some(1) {
            return Err(("xi_pairs", "sampled estimation needs at least two pairs".into()));
        }
        Ok(())
    }
}

/// Parses and validates the flat configuration format.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut last_line: std::collections::HashMap<&'static str, usize> = Default::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_error(line_no, content, "expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(config_error(line_no, key, "key given more than once"));
        }
        config.set(key, value).map_err(|m| config_error(line_no, key, m))?;
        if let Some(k) = KEYS.iter().find(|&&k| k == key) {
            last_line.insert(k, line_no);
        }
    }
    config.validate().map_err(|(key, message)| {
        config_error(last_line.get(key).copied().unwrap_or(0), key, message)
    })?;
    Ok(config)
}

const KEYS: [&str; 22] = [
    "n",
    "k",
    "l",
    "m",
    "sigma2",
    "amp_low",
    "amp_high",
    "topology",
    "n0",
    "edge_p",
    "algorithms",
    "trials",
    "seed",
    "out",
    "format",
    "mac_mode",
    "identical_signals",
    "delta0",
    "slack_t",
    "gamma_c_min",
    "enumeration_cap",
    "xi_pairs",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), ExperimentConfig::default());
        assert_eq!(parse_config("# nothing\n\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn sweep_config() {
        let c = parse_config("n=256\nk=10\nl=10\nm=15,20,25,30\n").unwrap();
        assert_eq!(c.m, vec![15, 20, 25, 30]);
        assert_eq!(c.l, vec![10]);
    }

    #[test]
    fn full_key_set() {
        let text = "\
n = 64  # length
k = 3
l = 4, 6
m = 10
sigma2 = 0
amp_low = -25
amp_high = 25
topology = ring
n0 = 2, half
edge_p = 0.3
algorithms = somp, dcomp2@3, dcomp1-nbhd, domp
trials = 7
seed = 99
out = /tmp/x.csv
format = json
mac_mode = true
identical_signals = yes
delta0 = 0.25
slack_t = 2
gamma_c_min = 100
enumeration_cap = 50
xi_pairs = 10
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.n0, vec![NeighborhoodSize::Fixed(2), NeighborhoodSize::Half]);
        assert_eq!(c.algorithms[1].label(), "dcomp2@3");
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.gamma_c_min, Some(100.0));
        assert!(c.identical_signals && c.mac_mode);
        assert_eq!(NeighborhoodSize::Half.resolve(10), 5);
    }

    fn error_at(text: &str) -> (usize, String) {
        match parse_config(text) {
            Err(Error::Config { line, key, .. }) => (line, key),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_line_and_key() {
        assert_eq!(error_at("k=0"), (1, "k".into()));
        assert_eq!(error_at("n=10\nbogus=1"), (2, "bogus".into()));
        assert_eq!(error_at("n=10\nm=abc"), (2, "m".into()));
        assert_eq!(error_at("n=10\nn=12"), (2, "n".into()));
        assert_eq!(error_at("\nalgorithms=somp@3"), (2, "algorithms".into()));
        assert_eq!(error_at("amp_low=20"), (1, "amp_low".into()));
        assert_eq!(error_at("algorithms=mac-omp"), (1, "algorithms".into()));
        assert_eq!(error_at("m=5"), (1, "m".into()));
        assert_eq!(error_at("novalue"), (1, "novalue".into()));
    }
}
