use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// A scalar or a list in config files; flags use comma lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cptp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hvm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_norm: Option<f64>,
}

/// Every knob a subcommand may read. Flags override the file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<OneOrMany<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<OneOrMany<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<OneOrMany<PathBuf>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub tol: Tolerances,
}

fn is_default(t: &Tolerances) -> bool {
    *t == Tolerances::default()
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("parsing {}: {e}", path.display())))
    }

    pub fn overlay(&mut self, flags: &ExperimentConfig) {
        overlay!(self, flags, subcommand, family, tensor, n, d, r, p, k, eps, seed, starts, iters, root, force, params, input, out);
        overlay!(self.tol, flags.tol, povm, cptp, hvm, state_norm);
    }

    /// SHA-256 of the canonical JSON of everything except the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn require_n(&self) -> Result<usize, CliError> {
        match self.n.as_ref().map(|n| n.to_vec()) {
            Some(v) if v.len() == 1 => Ok(v[0]),
            Some(_) => Err(CliError::config("--n takes a single value here")),
            None => Err(CliError::config("--n is required")),
        }
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::config("--seed is required for stochastic subcommands"))
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        self.input.as_ref().map(|i| i.to_vec()).unwrap_or_default()
    }

    pub fn require_input(&self) -> Result<PathBuf, CliError> {
        match self.inputs().as_slice() {
            [one] => Ok(one.clone()),
            [] => Err(CliError::config("--input is required")),
            _ => Err(CliError::config("--input takes a single file here")),
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        match &self.eps {
            None => Ok(brlab_core::families::default_grid()),
            Some(s) => parse_grid(s),
        }
    }
}

pub const DEFAULT_GRID_POINTS: usize = 13;

/// `a..b[:points]`, log-spaced from the larger to the smaller endpoint.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::config(format!("--eps expects <a>..<b>[:points], got '{text}'"));
    let (range, points) = match text.split_once(':') {
        Some((r, p)) => (r, p.trim().parse::<usize>().map_err(|_| bad())?),
        None => (text, DEFAULT_GRID_POINTS),
    };
    let (a, b) = range.split_once("..").ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a > 0.0 && b > 0.0 && a != b) || points < 4 {
        return Err(CliError::config(format!("--eps needs distinct positive endpoints and at least 4 points, got '{text}'")));
    }
    brlab_core::families::log_grid(a.max(b), a.min(b), points).map_err(|e| CliError::config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("1e-1..1e-4").unwrap();
        assert_eq!(g.len(), 13);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[12] - 1e-4).abs() < 1e-18);
        assert_eq!(parse_grid("1e-4..1e-1:5").unwrap().len(), 5);
        assert!(parse_grid("0..1").is_err());
        assert!(parse_grid("1e-1..1e-2:3").is_err());
        assert!(parse_grid("abc").is_err());
    }

    #[test]
    fn overlay_and_hash() {
        let mut file: ExperimentConfig = serde_json::from_str(r#"{"family":"w-psd","n":5,"out":"a"}"#).unwrap();
        let flags = ExperimentConfig { n: Some(OneOrMany::One(6)), out: Some("b".into()), ..Default::default() };
        let before = file.hash();
        file.overlay(&flags);
        assert_eq!(file.require_n().unwrap(), 6);
        assert_eq!(file.family.as_deref(), Some("w-psd"));
        assert_ne!(file.hash(), before);
        let mut moved = file.clone();
        moved.out = Some("elsewhere".into());
        assert_eq!(moved.hash(), file.hash());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus":1}"#).is_err());
    }
}
