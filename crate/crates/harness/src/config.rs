//! Experiment configuration: a flat `key = value` file, overridden by flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(HarnessError::Config(format!("unknown format {s:?} (expected csv or jsonl)"))),
        }
    }
}

/// Which random path carries the environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Srw,
    Lerw,
}

impl std::str::FromStr for Model {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "srw" => Ok(Model::Srw),
            "lerw" => Ok(Model::Lerw),
            _ => Err(HarnessError::Config(format!("unknown model {s:?} (expected srw or lerw)"))),
        }
    }
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Srw => "srw",
            Model::Lerw => "lerw",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub betas: Vec<f64>,
    /// Horizons `n`; each must be an integer `>= 2`.
    pub horizons: Vec<u64>,
    pub trials: usize,
    /// Walks per environment in the lemma checks.
    pub walks: usize,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub k: f64,
    pub seed: u64,
    /// Initial core half-width (SRW) or half window (LERW), in steps.
    pub window: u64,
    /// Growth cap for `window`; `None` picks the model default.
    pub max_window: Option<u64>,
    /// Guard as a multiple of the core.
    pub guard: u64,
    pub horizon_factor: usize,
    pub max_attempts: u64,
    pub permutations: usize,
    pub cut_steps: u64,
    pub model: Model,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub threads: usize,
}

pub const SRW_MAX_WINDOW: u64 = 1 << 20;
pub const LERW_MAX_WINDOW: u64 = 1 << 17;

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dimension: 5,
            betas: vec![2.0],
            horizons: vec![10_000, 100_000, 1_000_000],
            trials: 300,
            walks: 10,
            epsilons: vec![0.5, 1.0, 2.0],
            delta: 0.2,
            k: 20.0,
            seed: 1,
            window: 4_096,
            max_window: None,
            guard: 5,
            horizon_factor: 20,
            max_attempts: 10_000,
            permutations: 1_000,
            cut_steps: 1_000,
            model: Model::Srw,
            output: None,
            format: Format::Csv,
            threads: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| HarnessError::Config(format!("{key}: cannot parse {value:?}")))
}

/// Integers may be written as `1e6`.
fn parse_count(key: &str, value: &str) -> Result<u64> {
    let v = value.trim();
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = parse_num(key, v)?;
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(63) {
        Ok(x as u64)
    } else {
        Err(HarnessError::Config(format!("{key}: {value:?} is not a non-negative integer")))
    }
}

fn parse_list<T>(key: &str, value: &str, item: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| item(key, s)).collect()
}

impl ExperimentConfig {
    /// Apply one `key = value` setting. List keys replace the whole list.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let v = value.trim();
        match key.as_str() {
            "dimension" | "d" => self.dimension = parse_count(&key, v)? as usize,
            "beta" => self.betas = parse_list(&key, v, parse_num)?,
            "n" | "steps" => self.horizons = parse_list(&key, v, parse_count)?,
            "trials" => self.trials = parse_count(&key, v)? as usize,
            "walks" => self.walks = parse_count(&key, v)? as usize,
            "epsilon" => self.epsilons = parse_list(&key, v, parse_num)?,
            "delta" => self.delta = parse_num(&key, v)?,
            "K" | "k" => self.k = parse_num(&key, v)?,
            "seed" => self.seed = parse_count(&key, v)?,
            "window" => self.window = parse_count(&key, v)?,
            "max-window" => self.max_window = Some(parse_count(&key, v)?),
            "guard" => self.guard = parse_count(&key, v)?,
            "horizon-factor" => self.horizon_factor = parse_count(&key, v)? as usize,
            "max-attempts" => self.max_attempts = parse_count(&key, v)?,
            "permutations" => self.permutations = parse_count(&key, v)? as usize,
            "cut-steps" => self.cut_steps = parse_count(&key, v)?,
            "model" => self.model = v.parse()?,
            "output" => self.output = Some(PathBuf::from(v)),
            "format" => self.format = v.parse()?,
            "threads" => self.threads = parse_count(&key, v)? as usize,
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply every setting of a config file: one `key = value` per line,
    /// `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn max_window_for(&self, model: Model) -> u64 {
        self.max_window.unwrap_or(match model {
            Model::Srw => SRW_MAX_WINDOW,
            Model::Lerw => LERW_MAX_WINDOW,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.dimension < 5 || self.dimension > rangewalk::lattice::MAX_DIM {
            return bad(format!("dimension must be in 5..={}, got {}", rangewalk::lattice::MAX_DIM, self.dimension));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(b.is_finite() && *b >= 1.0)) {
            return bad("every beta must be finite and >= 1".into());
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|&n| n < 2) {
            return bad("every horizon n must be >= 2".into());
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("every epsilon must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must be in (0, 1), got {}", self.delta));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad(format!("K must be positive, got {}", self.k));
        }
        if self.trials == 0 || self.walks == 0 {
            return bad("trials and walks must be positive".into());
        }
        if self.window < 16 {
            return bad(format!("window must be at least 16, got {}", self.window));
        }
        if let Some(m) = self.max_window {
            if m < self.window {
                return bad(format!("max-window {m} is below window {}", self.window));
            }
        }
        if self.guard == 0 || self.horizon_factor < 2 || self.max_attempts == 0 {
            return bad("guard, horizon-factor (>= 2) and max-attempts must be positive".into());
        }
        if self.permutations == 0 || self.cut_steps == 0 || self.threads == 0 {
            return bad("permutations, cut-steps and threads must be positive".into());
        }
        Ok(())
    }

    /// Canonical text of every setting that influences results. Output
    /// location, format and thread count are excluded: they never change the
    /// numbers.
    pub fn canonical(&self) -> String {
        let list_f = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let list_u = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "dimension={}", self.dimension);
        let _ = writeln!(s, "beta={}", list_f(&self.betas));
        let _ = writeln!(s, "n={}", list_u(&self.horizons));
        let _ = writeln!(s, "trials={}", self.trials);
        let _ = writeln!(s, "walks={}", self.walks);
        let _ = writeln!(s, "epsilon={}", list_f(&self.epsilons));
        let _ = writeln!(s, "delta={:?}", self.delta);
        let _ = writeln!(s, "K={:?}", self.k);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "window={}", self.window);
        let _ = writeln!(s, "max-window={}", self.max_window.map_or("default".to_string(), |m| m.to_string()));
        let _ = writeln!(s, "guard={}", self.guard);
        let _ = writeln!(s, "horizon-factor={}", self.horizon_factor);
        let _ = writeln!(s, "max-attempts={}", self.max_attempts);
        let _ = writeln!(s, "permutations={}", self.permutations);
        let _ = writeln!(s, "cut-steps={}", self.cut_steps);
        let _ = writeln!(s, "model={}", self.model.as_str());
        s
    }

    /// SHA-256 of [`canonical`](Self::canonical), lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut out, b| {
            let _ = write!(out, "{b:02x}");
            out
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# comment\nbeta = 2, 4\nn = 1e4,1e5\ntrials=10 # inline\nmax_window = 65536\n").unwrap();
        assert_eq!(c.betas, vec![2.0, 4.0]);
        assert_eq!(c.horizons, vec![10_000, 100_000]);
        assert_eq!(c.trials, 10);
        assert_eq!(c.max_window, Some(65_536));
        c.set("trials", "20").unwrap();
        assert_eq!(c.trials, 20);
        assert!(c.apply_text("bogus = 1").is_err());
        assert!(c.apply_text("n = 1.5").is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        c.dimension = 4;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.betas = vec![0.5];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.horizons = vec![1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_results_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.threads = 8;
        b.output = Some("x.csv".into());
        b.format = Format::Jsonl;
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.epsilons = vec![0.5, 1.0];
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
