use std::collections::BTreeMap;
use std::path::Path;

use cgm_core::experiments::ExperimentConfig;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("{key}: cannot parse {value:?}")]
    Value { key: String, value: String },
    #[error("{0}")]
    Range(String),
}

pub const KEYS: [&str; 7] = ["alpha", "n", "replicas", "seed", "block_side", "sigmas", "threads"];

/// Where a setting came from, lowest precedence first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    Env,
    File,
    Flag,
}

/// Raw `key = value` pairs from one layer.
pub type Layer = BTreeMap<String, String>;

/// Parses a flat `key = value` document. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Layer, ConfigError> {
    let mut out = Layer::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey { line: i + 1, key: k.to_string() });
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Duplicate { line: i + 1, key: k.to_string() });
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Layer, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

/// `CGM_SEED` and `CGM_THREADS`.
pub fn env_layer(get: impl Fn(&str) -> Option<String>) -> Layer {
    let mut out = Layer::new();
    for (var, key) in [("CGM_SEED", "seed"), ("CGM_THREADS", "threads")] {
        if let Some(v) = get(var) {
            out.insert(key.to_string(), v);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub experiment: ExperimentConfig,
    /// Zero means one thread per core.
    pub threads: usize,
    pub sources: BTreeMap<String, Source>,
}

impl Resolved {
    pub fn explicit(&self, key: &str) -> bool {
        self.sources.get(key).is_some_and(|s| *s != Source::Default)
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value { key: key.to_string(), value: value.to_string() })
}

/// Merges layers with `flags > file > env > defaults` and validates ranges.
pub fn resolve(env: &Layer, file: &Layer, flags: &Layer) -> Result<Resolved, ConfigError> {
    let mut merged: BTreeMap<String, (String, Source)> = BTreeMap::new();
    for (layer, src) in [(env, Source::Env), (file, Source::File), (flags, Source::Flag)] {
        for (k, v) in layer {
            merged.insert(k.clone(), (v.clone(), src));
        }
    }
    let mut cfg = ExperimentConfig::default();
    let mut threads = 0;
    let mut sources: BTreeMap<String, Source> = KEYS.iter().map(|k| (k.to_string(), Source::Default)).collect();
    for (k, (v, src)) in &merged {
        match k.as_str() {
            "alpha" => cfg.alpha = parse(k, v)?,
            "n" => cfg.n = parse(k, v)?,
            "replicas" => cfg.replicas = parse(k, v)?,
            "seed" => cfg.seed = parse(k, v)?,
            "block_side" => cfg.block_side = parse(k, v)?,
            "sigmas" => cfg.sigmas = parse(k, v)?,
            "threads" => threads = parse(k, v)?,
            _ => return Err(ConfigError::UnknownKey { line: 0, key: k.clone() }),
        }
        sources.insert(k.clone(), *src);
    }
    cfg.validate().map_err(|e| ConfigError::Range(e.to_string()))?;
    Ok(Resolved { experiment: cfg, threads, sources })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(pairs: &[(&str, &str)]) -> Layer {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn empty_file_gives_defaults() {
        let r = resolve(&Layer::new(), &parse_config("").unwrap(), &Layer::new()).unwrap();
        assert_eq!(r.experiment, ExperimentConfig::default());
        assert_eq!((r.experiment.alpha, r.experiment.n, r.experiment.replicas, r.experiment.seed), (0.5, 400, 200, 1));
        assert!(!r.explicit("n"));
    }

    #[test]
    fn comments_and_whitespace() {
        let l = parse_config("# lab\n  alpha = 0.3  # inline\n\nn=800\n").unwrap();
        assert_eq!(l, layer(&[("alpha", "0.3"), ("n", "800")]));
    }

    #[test]
    fn bad_documents() {
        assert!(matches!(parse_config("alpha 0.3"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("beta = 1"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(parse_config("n = 1\nn = 2"), Err(ConfigError::Duplicate { line: 2, .. })));
        let e = resolve(&Layer::new(), &layer(&[("alpha", "1.2")]), &Layer::new()).unwrap_err();
        assert!(e.to_string().contains("alpha"), "{e}");
        let e = resolve(&Layer::new(), &layer(&[("n", "lots")]), &Layer::new()).unwrap_err();
        assert!(matches!(e, ConfigError::Value { .. }));
    }

    #[test]
    fn precedence() {
        let env = env_layer(|v| (v == "CGM_SEED").then(|| "11".to_string()));
        let file = layer(&[("seed", "12"), ("alpha", "0.4")]);
        let flags = layer(&[("alpha", "0.6")]);
        let r = resolve(&env, &file, &flags).unwrap();
        assert_eq!(r.experiment.seed, 12);
        assert_eq!(r.experiment.alpha, 0.6);
        assert_eq!(r.sources["seed"], Source::File);
        assert_eq!(r.sources["alpha"], Source::Flag);
        let r = resolve(&env, &Layer::new(), &Layer::new()).unwrap();
        assert_eq!((r.experiment.seed, r.sources["seed"]), (11, Source::Env));
    }
}
