//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::presets::{find_preset, Preset};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Coeffs,
    RankStudy,
    Solve1d,
    Solve2d,
    Bench,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Coeffs => "coeffs",
            Experiment::RankStudy => "rank-study",
            Experiment::Solve1d => "solve1d",
            Experiment::Solve2d => "solve2d",
            Experiment::Bench => "bench",
        }
    }

    /// Whether `n` may be a sweep list.
    fn sweeps(self) -> bool {
        matches!(self, Experiment::RankStudy | Experiment::Bench)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            Experiment::Coeffs,
            Experiment::RankStudy,
            Experiment::Solve1d,
            Experiment::Solve2d,
            Experiment::Bench,
        ]
        .into_iter()
        .find(|e| e.name() == s)
        .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },
    #[error("preset `{preset}` is for `{kind}`, not `{requested}`")]
    PresetMismatch {
        preset: String,
        kind: Experiment,
        requested: Experiment,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Experiment,
    /// One order, or `(alpha1, alpha2)` for `solve2d`.
    pub alpha: Vec<f64>,
    /// Problem size, or a strictly increasing sweep.
    pub n: Vec<usize>,
    pub dt: Option<f64>,
    pub steps: usize,
    pub trunc_tol: f64,
    pub solve_tol: f64,
    pub leaf_size: usize,
    pub preset: Option<String>,
    /// Variable diffusion coefficients (2D), set by presets.
    pub variable: bool,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn defaults(kind: Experiment) -> Self {
        let (alpha, n) = match kind {
            Experiment::Coeffs => (vec![1.5], vec![10]),
            Experiment::RankStudy => (vec![1.5], vec![512, 1024, 2048, 4096]),
            Experiment::Solve1d => (vec![1.5], vec![1024]),
            Experiment::Solve2d => (vec![1.3, 1.7], vec![256]),
            Experiment::Bench => (vec![1.5], vec![1024, 2048, 4096]),
        };
        Self {
            kind,
            alpha,
            n,
            dt: None,
            steps: 8,
            trunc_tol: 1e-8,
            solve_tol: 1e-6,
            leaf_size: 256,
            preset: None,
            variable: false,
            out: None,
            seed: 0,
        }
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha[0]
    }

    pub fn alpha2(&self) -> f64 {
        *self.alpha.last().expect("alpha is validated non-empty")
    }

    pub fn size(&self) -> usize {
        self.n[0]
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        for (name, v) in [("trunc_tol", self.trunc_tol), ("solve_tol", self.solve_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        let max_alpha = if self.kind == Experiment::Solve2d { 2 } else { 1 };
        if self.alpha.is_empty() || self.alpha.len() > max_alpha {
            return bad(format!("{} takes {max_alpha} value(s) for alpha, got {}", self.kind, self.alpha.len()));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("n must be positive".into());
        }
        if !self.kind.sweeps() && self.n.len() > 1 {
            return bad(format!("{} takes a single n", self.kind));
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n sweep must be strictly increasing".into());
        }
        if self.leaf_size == 0 {
            return bad("leaf_size must be positive".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        Ok(())
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub n: Option<String>,
    pub alpha: Option<String>,
    pub out: Option<PathBuf>,
}

/// One `key = value` entry with its 1-based line number.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

const KEYS: &[&str] = &[
    "experiment",
    "alpha",
    "n",
    "dt",
    "steps",
    "trunc_tol",
    "solve_tol",
    "leaf_size",
    "preset",
    "out",
    "seed",
];

/// Splits the file into entries. Blank lines and `#` comments (whole-line
/// or trailing) are ignored; keys must be known and appear once.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| ConfigError::Parse { line, msg };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(err(format!("missing value for `{key}`")));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(err(format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        out.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| format!("cannot parse `{}`", p.trim())))
        .collect()
}

fn parse_one<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse `{s}`"))
}

fn apply(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "experiment" => {
            let kind: Experiment = value.parse()?;
            if kind != cfg.kind {
                return Err(format!("file is for `{kind}`, running `{}`", cfg.kind));
            }
        }
        "alpha" => cfg.alpha = parse_list(value)?,
        "n" => cfg.n = parse_list(value)?,
        "dt" => cfg.dt = Some(parse_one(value)?),
        "steps" => cfg.steps = parse_one(value)?,
        "trunc_tol" => cfg.trunc_tol = parse_one(value)?,
        "solve_tol" => cfg.solve_tol = parse_one(value)?,
        "leaf_size" => cfg.leaf_size = parse_one(value)?,
        "out" => cfg.out = Some(PathBuf::from(value)),
        "seed" => cfg.seed = parse_one(value)?,
        // resolved before the other keys
        "preset" => {}
        _ => unreachable!("keys are checked by parse_entries"),
    }
    Ok(())
}

/// Builds the configuration for `kind`: preset defaults, then the file, then
/// the command-line overrides.
pub fn resolve(kind: Experiment, text: Option<&str>, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let entries = match text {
        Some(t) => parse_entries(t)?,
        None => Vec::new(),
    };
    let preset_name = overrides
        .preset
        .clone()
        .or_else(|| entries.iter().find(|e| e.key == "preset").map(|e| e.value.clone()));

    let mut cfg = ExperimentConfig::defaults(kind);
    if let Some(name) = preset_name {
        let preset: &Preset = find_preset(&name)?;
        if preset.kind != kind {
            return Err(ConfigError::PresetMismatch {
                preset: name,
                kind: preset.kind,
                requested: kind,
            });
        }
        (preset.apply)(&mut cfg);
        cfg.preset = Some(name);
    }
    for e in &entries {
        apply(&mut cfg, &e.key, &e.value).map_err(|msg| ConfigError::Parse { line: e.line, msg })?;
    }
    let flag = |key: &str, v: &Option<String>, cfg: &mut ExperimentConfig| -> Result<(), ConfigError> {
        match v {
            Some(v) => apply(cfg, key, v).map_err(|m| ConfigError::Invalid(format!("--{key}: {m}"))),
            None => Ok(()),
        }
    };
    flag("n", &overrides.n, &mut cfg)?;
    flag("alpha", &overrides.alpha, &mut cfg)?;
    if let Some(out) = &overrides.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let e = parse_entries("# header\n\nalpha = 1.7  # order\n n=64\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].line, e[0].key.as_str(), e[0].value.as_str()), (3, "alpha", "1.7"));
        assert_eq!((e[1].line, e[1].key.as_str(), e[1].value.as_str()), (4, "n", "64"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("alpha = 1.5\nbogus = 1\n", 2),
            ("\n\njust text\n", 3),
            ("n = 4\nn = 8\n", 2),
            ("alpha =\n", 1),
        ];
        for (text, line) in cases {
            match parse_entries(text) {
                Err(ConfigError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        let err = resolve(Experiment::Coeffs, Some("alpha = 1.5\nsteps = many\n"), &Overrides::default()).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn precedence_preset_file_flags() {
        let ov = Overrides {
            preset: Some("dms-1d-a18".into()),
            n: Some("128".into()),
            ..Default::default()
        };
        let cfg = resolve(Experiment::Solve1d, Some("n = 64\nsteps = 3\n"), &ov).unwrap();
        assert_eq!(cfg.alpha, vec![1.8]);
        assert_eq!(cfg.n, vec![128]);
        assert_eq!(cfg.steps, 3);
    }

    #[test]
    fn preset_from_file() {
        let cfg = resolve(Experiment::Solve2d, Some("preset = bss-2d-var\n"), &Overrides::default()).unwrap();
        assert!(cfg.variable);
        assert_eq!(cfg.alpha, vec![1.3, 1.7]);
    }

    #[test]
    fn unknown_preset_lists_alternatives() {
        let ov = Overrides {
            preset: Some("nope".into()),
            ..Default::default()
        };
        let msg = resolve(Experiment::Solve2d, None, &ov).unwrap_err().to_string();
        for name in ["dms-1d-a12", "dms-1d-a18", "bss-2d-const", "bss-2d-var"] {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn preset_for_other_experiment_is_rejected() {
        let ov = Overrides {
            preset: Some("bss-2d-const".into()),
            ..Default::default()
        };
        let err = resolve(Experiment::Solve1d, None, &ov).unwrap_err();
        assert!(matches!(err, ConfigError::PresetMismatch { .. }));
    }

    #[test]
    fn validation() {
        let bad = [
            "trunc_tol = 0",
            "solve_tol = 1",
            "n = 1024, 512",
            "n = 512, 512",
            "alpha = 1.2, 1.4",
            "leaf_size = 0",
            "experiment = solve2d",
        ];
        for text in bad {
            assert!(resolve(Experiment::RankStudy, Some(text), &Overrides::default()).is_err(), "{text}");
        }
        let ok = resolve(Experiment::RankStudy, Some("n = 256, 512\nexperiment = rank-study"), &Overrides::default());
        assert_eq!(ok.unwrap().n, vec![256, 512]);
        assert!(resolve(Experiment::Solve1d, Some("n = 64, 128"), &Overrides::default()).is_err());
    }
}
