//! Run configuration: flat `key = value` text with `[section]` headers.
//!
//! ```text
//! seed = 7
//! [model]
//! lambda0 = 1
//! lambda1 = 1
//! ```
//!
//! Keys are addressed as `section.key`; keys before the first header live at
//! the top level. `#` starts a comment. Lists are comma separated.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{KacError, Result};
use crate::model::{KacOuModel, State};
use crate::scaling::{ScalingKind, ScalingSpec};

fn cfg_err(key: impl Into<String>, reason: impl Into<String>) -> KacError {
    KacError::Config { key: key.into(), reason: reason.into() }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parsed key/value pairs, keyed by `section.key`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigDoc {
    entries: BTreeMap<String, String>,
}

impl ConfigDoc {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: String, value: String) {
        self.entries.insert(key, value);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Sorted document text: top-level keys, then one `[section]` block per
    /// section. Parses back to the same document; the manifest hash input.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries.iter().filter(|(k, _)| !k.contains('.')) {
            out.push_str(&format!("{k} = {v}\n"));
        }
        let mut section = "";
        for (k, v) in &self.entries {
            let Some((s, key)) = k.split_once('.') else { continue };
            if s != section {
                out.push_str(&format!("[{s}]\n"));
                section = s;
            }
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }
}

/// Parses configuration text. Duplicate keys, malformed lines and bad
/// section headers are errors naming the line.
pub fn parse_document(text: &str) -> Result<ConfigDoc> {
    let mut doc = ConfigDoc::default();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| valid_name(n))
                .ok_or_else(|| cfg_err(format!("line {line_no}"), format!("bad section header `{line}`")))?;
            section = name.to_string();
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| cfg_err(format!("line {line_no}"), "expected `key = value`"))?;
        let k = k.trim();
        if !valid_name(k) {
            return Err(cfg_err(format!("line {line_no}"), format!("bad key `{k}`")));
        }
        let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        if doc.entries.contains_key(&key) {
            return Err(cfg_err(key, format!("duplicate key on line {line_no}")));
        }
        doc.entries.insert(key, v.trim().to_string());
    }
    Ok(doc)
}

/// Parses a `--set section.key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| cfg_err(s, "override must look like section.key=value"))?;
    let k = k.trim();
    let parts: Vec<&str> = k.split('.').collect();
    if parts.len() > 2 || !parts.iter().all(|p| valid_name(p)) {
        return Err(cfg_err(k, "bad override key"));
    }
    if v.contains(['#', '\n', '\r']) {
        return Err(cfg_err(k, "override values cannot contain `#` or line breaks"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SimMode {
    Path,
    Fpt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FptBlock {
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub states: Vec<State>,
    /// Monte Carlo sample size per row.
    pub mc_samples: u64,
    pub oracle_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantBlock {
    /// Number of evaluation points for the density table.
    pub grid: usize,
    pub bins: usize,
    /// Histogram paths; 0 skips the simulation check.
    pub n_paths: u64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateBlock {
    pub mode: SimMode,
    pub n_paths: u64,
    pub horizon: f64,
    pub dt: f64,
    pub x0: f64,
    /// None draws ε(0) from the stationary law.
    pub state: Option<State>,
    /// Target level for `mode = fpt`.
    pub y: f64,
    pub with_m: bool,
    pub max_switches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingBlock {
    pub spec: ScalingSpec,
    pub t: f64,
    pub n_list: Vec<f64>,
    pub n_paths: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub model: KacOuModel,
    pub fpt: FptBlock,
    pub invariant: InvariantBlock,
    pub simulate: SimulateBlock,
    pub scaling: ScalingBlock,
    pub out_dir: PathBuf,
    /// Canonical text after overrides; hashed into the manifest.
    pub canonical: String,
}

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "model.lambda0",
    "model.lambda1",
    "model.a0",
    "model.a1",
    "model.b0",
    "model.b1",
    "model.gamma0",
    "model.gamma1",
    "fpt.q",
    "fpt.x",
    "fpt.y",
    "fpt.state",
    "fpt.mc_samples",
    "fpt.oracle_tol",
    "invariant.grid",
    "invariant.bins",
    "invariant.n_paths",
    "invariant.horizon",
    "simulate.mode",
    "simulate.n_paths",
    "simulate.horizon",
    "simulate.dt",
    "simulate.x0",
    "simulate.state",
    "simulate.y",
    "simulate.with_m",
    "simulate.max_switches",
    "scaling.kind",
    "scaling.nu",
    "scaling.sigma0",
    "scaling.delta",
    "scaling.sigma0_gamma",
    "scaling.delta_gamma",
    "scaling.x0",
    "scaling.t",
    "scaling.n_list",
    "scaling.n_paths",
    "output.dir",
];

struct Reader<'a>(&'a ConfigDoc);

impl Reader<'_> {
    fn parse<T: FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.0.get(key) {
            Some(v) => v.parse().map_err(|_| cfg_err(key, format!("cannot parse `{v}`"))),
            None => default.ok_or_else(|| cfg_err(key, "missing required key")),
        }
    }

    fn real(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v: f64 = self.parse(key, default)?;
        if !v.is_finite() {
            return Err(cfg_err(key, "must be finite"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = self.real(key, default)?;
        if !(v > 0.0) {
            return Err(cfg_err(key, "must be > 0"));
        }
        Ok(v)
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let Some(v) = self.0.get(key) else {
            return Ok(default.to_vec());
        };
        let out: Vec<f64> = v
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| cfg_err(key, format!("cannot parse list `{v}`")))?;
        if out.is_empty() || out.len() > 100_000 {
            return Err(cfg_err(key, "list must have 1..=100000 entries"));
        }
        Ok(out)
    }

    fn state(s: &str) -> Option<State> {
        match s.trim() {
            "0" => Some(State::Zero),
            "1" => Some(State::One),
            _ => None,
        }
    }
}

fn parse_kind(s: &str) -> Option<ScalingKind> {
    Some(match s {
        "fast_switching" | "FastSwitching" => ScalingKind::FastSwitching,
        "kac_classic" | "KacClassic" => ScalingKind::KacClassic,
        "kac_asymmetric" | "KacAsymmetric" => ScalingKind::KacAsymmetric,
        "case_a" | "CaseA" => ScalingKind::CaseA,
        "case_b" | "CaseB" => ScalingKind::CaseB,
        "case_c" | "CaseC" => ScalingKind::CaseC,
        _ => return None,
    })
}

impl RunConfig {
    /// Parses text, applies `overrides` (`section.key=value`) and validates.
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc = parse_document(text)?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            doc.set(k, v);
        }
        Self::from_doc(&doc)
    }

    pub fn from_doc(doc: &ConfigDoc) -> Result<Self> {
        if let Some(k) = doc.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(cfg_err(k, "unknown key"));
        }
        let r = Reader(doc);
        let seed: u64 = r.parse("seed", Some(0))?;

        let p = |name: &str, d: Option<f64>| r.real(&format!("model.{name}"), d);
        let model = KacOuModel::from_params(
            p("lambda0", None)?,
            p("lambda1", None)?,
            p("a0", None)?,
            p("a1", None)?,
            p("b0", Some(0.0))?,
            p("b1", Some(0.0))?,
            p("gamma0", None)?,
            p("gamma1", None)?,
        )
        .map_err(|e| match e {
            KacError::InvalidParameter { name, reason } => cfg_err(format!("model.{name}"), reason),
            other => other,
        })?;

        let states = match doc.get("fpt.state").unwrap_or("both") {
            "both" => State::BOTH.to_vec(),
            s => vec![Reader::state(s).ok_or_else(|| cfg_err("fpt.state", "expected 0, 1 or both"))?],
        };
        let mc_samples: u64 = r.parse("fpt.mc_samples", Some(20_000))?;
        if mc_samples < 1000 {
            return Err(cfg_err("fpt.mc_samples", "must be ≥ 1000"));
        }
        let fpt = FptBlock {
            q: r.list("fpt.q", &[1.0])?,
            x: r.list("fpt.x", &[0.0])?,
            y: r.list("fpt.y", &[0.5])?,
            states,
            mc_samples,
            oracle_tol: r.positive("fpt.oracle_tol", Some(1e-10))?,
        };
        if fpt.q.iter().any(|&q| q < 0.0) {
            return Err(cfg_err("fpt.q", "rates must be ≥ 0"));
        }
        if fpt.q.len() * fpt.x.len() * fpt.y.len() > 10_000 {
            return Err(cfg_err("fpt.q", "grid has more than 10000 rows"));
        }

        let invariant = InvariantBlock {
            grid: r.parse("invariant.grid", Some(201))?,
            bins: r.parse("invariant.bins", Some(50))?,
            n_paths: r.parse("invariant.n_paths", Some(0))?,
            horizon: r.positive("invariant.horizon", Some(20.0))?,
        };
        if !(2..=1_000_000).contains(&invariant.grid) {
            return Err(cfg_err("invariant.grid", "must be in 2..=1000000"));
        }
        if !(1..=100_000).contains(&invariant.bins) {
            return Err(cfg_err("invariant.bins", "must be in 1..=100000"));
        }

        let mode = match doc.get("simulate.mode").unwrap_or("path") {
            "path" => SimMode::Path,
            "fpt" => SimMode::Fpt,
            _ => return Err(cfg_err("simulate.mode", "expected path or fpt")),
        };
        let state = match doc.get("simulate.state").unwrap_or("stationary") {
            "stationary" => None,
            s => Some(Reader::state(s).ok_or_else(|| cfg_err("simulate.state", "expected 0, 1 or stationary"))?),
        };
        let simulate = SimulateBlock {
            mode,
            n_paths: r.parse("simulate.n_paths", Some(10))?,
            horizon: r.positive("simulate.horizon", Some(10.0))?,
            dt: r.positive("simulate.dt", Some(0.1))?,
            x0: r.real("simulate.x0", Some(0.0))?,
            state,
            y: r.real("simulate.y", Some(0.5))?,
            with_m: r.parse("simulate.with_m", Some(false))?,
            max_switches: r.parse("simulate.max_switches", Some(10_000_000))?,
        };
        if simulate.mode == SimMode::Path && simulate.horizon / simulate.dt > 1e7 {
            return Err(cfg_err("simulate.dt", "more than 10^7 evaluation times per path"));
        }
        if simulate.mode == SimMode::Fpt && simulate.y == simulate.x0 {
            return Err(cfg_err("simulate.y", "must differ from simulate.x0"));
        }

        let kind_s = doc.get("scaling.kind").unwrap_or("kac_asymmetric");
        let kind = parse_kind(kind_s).ok_or_else(|| cfg_err("scaling.kind", format!("unknown kind `{kind_s}`")))?;
        let spec = ScalingSpec {
            kind,
            nu: r.real("scaling.nu", Some(1.0))?,
            sigma0: r.real("scaling.sigma0", Some(1.0))?,
            delta: r.real("scaling.delta", Some(0.0))?,
            sigma0_gamma: r.real("scaling.sigma0_gamma", Some(1.0))?,
            delta_gamma: r.real("scaling.delta_gamma", Some(0.0))?,
            base: model.coeffs,
            x0: r.real("scaling.x0", Some(0.0))?,
        };
        spec.validate().map_err(|e| match e {
            KacError::InvalidParameter { name, reason } => cfg_err(format!("scaling.{name}"), reason),
            other => other,
        })?;
        let scaling = ScalingBlock {
            spec,
            t: r.positive("scaling.t", Some(1.0))?,
            n_list: r.list("scaling.n_list", &[10.0, 100.0, 1000.0])?,
            n_paths: r.parse("scaling.n_paths", Some(10_000))?,
        };
        if scaling.n_list.windows(2).any(|w| !(w[0] < w[1])) || scaling.n_list[0] < 1.0 {
            return Err(cfg_err("scaling.n_list", "must be strictly increasing and ≥ 1"));
        }
        if scaling.n_paths < 2 {
            return Err(cfg_err("scaling.n_paths", "must be ≥ 2"));
        }

        let out_dir = PathBuf::from(doc.get("output.dir").unwrap_or("out"));
        Ok(Self { seed, model, fpt, invariant, simulate, scaling, out_dir, canonical: doc.canonical() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "seed = 3\n[model]\nlambda0 = 1\nlambda1 = 1\na0 = 0\na1 = 1\ngamma0 = 1\ngamma1 = 1\n";

    #[test]
    fn parses_sections_comments_and_lists() {
        let doc = parse_document("# top\nseed=1\n[fpt]\nq = 0.5, 1 ,2 # trailing\n\n").unwrap();
        assert_eq!(doc.get("seed"), Some("1"));
        assert_eq!(doc.get("fpt.q"), Some("0.5, 1 ,2"));
        assert_eq!(doc.canonical(), "seed = 1\n[fpt]\nq = 0.5, 1 ,2\n");
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(parse_document("[model\n").is_err());
        assert!(parse_document("novalue\n").is_err());
        assert!(parse_document("a b = 1\n").is_err());
        let e = parse_document("[m]\nx=1\nx=2\n").unwrap_err();
        assert!(e.to_string().contains("m.x"));
    }

    #[test]
    fn run_config_from_text() {
        let cfg = RunConfig::from_text(BASIC, &["fpt.q=0,1".into()]).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.fpt.q, vec![0.0, 1.0]);
        assert_eq!(cfg.model.rates.lambda0, 1.0);
        assert!(cfg.canonical.contains("[fpt]\nq = 0,1"));
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::from_text(BASIC, &["model.lambda0=-1".into()]).unwrap_err();
        assert!(e.to_string().contains("lambda0"), "{e}");
        let e = RunConfig::from_text(BASIC, &["model.gamma1=abc".into()]).unwrap_err();
        assert!(e.to_string().contains("model.gamma1"));
        let e = RunConfig::from_text(BASIC, &["model.bogus=1".into()]).unwrap_err();
        assert!(e.to_string().contains("model.bogus"));
        let e = RunConfig::from_text("seed = 1\n", &[]).unwrap_err();
        assert!(e.to_string().contains("model.lambda0"));
        assert!(parse_override("no_equals").is_err());
        assert!(parse_override("a.b.c=1").is_err());
    }
}
