//! Flat INI-style configuration: `[section]` headers, `key = value` lines,
//! `#` or `;` comments. Strict: unknown sections or keys, duplicates and
//! malformed values are errors that cite the file, line and key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sasaki::flow::{Backend, FlowConfig, PiTerm};
use sasaki::verify::{Selection, SuiteConfig};
use sasaki::{build_model, Model, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub key: Option<String>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
        }
        if let Some(k) = &self.key {
            write!(f, ": key `{k}`")?;
        }
        write!(f, ": {}", self.msg)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    entries: Vec<Entry>,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("run", &["seed", "threads", "out_dir"]),
    (
        "flow",
        &[
            "source", "source_scale", "target", "target_scale", "backend", "initial", "n", "dt", "dt_h2", "steps", "every",
            "tau_tol", "mono_slack", "allow_unstable", "reproject", "pi_term",
        ],
    ),
    (
        "verify",
        &[
            "checks", "tw_samples", "tw_h", "curvature_points", "order2_trials", "grid_coarse", "grid_fine", "map_points",
            "minimality_seeds", "minimality_n", "flow_n", "flow_steps", "flow_eps", "sphere_n", "sphere_steps", "sphere_eps",
        ],
    ),
    ("curvature", &["model", "lambda", "scale", "points"]),
    ("energy", &["map", "n", "jets"]),
];

/// A parsed and schema-checked file.
#[derive(Debug, Clone)]
pub struct Ini {
    path: PathBuf,
    sections: Vec<Section>,
}

impl Ini {
    pub fn load(path: &Path) -> Result<Ini, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            key: None,
            msg: format!("cannot read config file: {e}"),
        })?;
        Ini::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Ini, ConfigError> {
        let err = |line: usize, key: Option<&str>, msg: String| ConfigError {
            path: path.to_path_buf(),
            line: Some(line),
            key: key.map(str::to_string),
            msg,
        };
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, None, format!("malformed section header `{s}`")))?
                    .trim()
                    .to_string();
                if !SCHEMA.iter().any(|(n, _)| *n == name) {
                    return Err(err(line, None, format!("unknown section [{name}]")));
                }
                if sections.iter().any(|x| x.name == name) {
                    return Err(err(line, None, format!("section [{name}] appears twice")));
                }
                sections.push(Section { name, entries: Vec::new() });
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| err(line, None, format!("expected `key = value`, got `{s}`")))?;
            let (k, v) = (k.trim(), strip_comment(v).trim());
            let sec = sections.last_mut().ok_or_else(|| err(line, Some(k), "key outside any [section]".into()))?;
            let allowed = SCHEMA.iter().find(|(n, _)| *n == sec.name).map(|x| x.1).unwrap_or(&[]);
            if !allowed.contains(&k) {
                return Err(err(line, Some(k), format!("unknown key in [{}] (allowed: {})", sec.name, allowed.join(", "))));
            }
            if sec.entries.iter().any(|e| e.key == k) {
                return Err(err(line, Some(k), format!("duplicate key in [{}]", sec.name)));
            }
            sec.entries.push(Entry { key: k.to_string(), value: v.to_string(), line });
        }
        Ok(Ini { path: path.to_path_buf(), sections })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.iter().any(|s| s.name == name)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.iter().find(|s| s.name == section)?.entries.iter().find(|e| e.key == key)
    }

    fn bad(&self, e: &Entry, msg: String) -> ConfigError {
        ConfigError { path: self.path.clone(), line: Some(e.line), key: Some(e.key.clone()), msg }
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|x| self.bad(e, format!("cannot parse `{}` as {}: {x}", e.value, short_type::<T>()))),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn get_str(&self, section: &str, key: &str) -> Option<String> {
        self.entry(section, key).map(|e| e.value.clone())
    }

    /// Error at the entry for `key`, or at the section when the key is absent.
    pub fn error_at(&self, section: &str, key: &str, msg: impl Into<String>) -> ConfigError {
        let line = self.sections.iter().find(|s| s.name == section).and_then(|s| s.entries.iter().find(|e| e.key == key)).map(|e| e.line);
        ConfigError { path: self.path.clone(), line, key: Some(key.to_string()), msg: msg.into() }
    }

    pub fn require_section(&self, section: &str) -> Result<(), ConfigError> {
        if self.has_section(section) {
            Ok(())
        } else {
            Err(ConfigError { path: self.path.clone(), line: None, key: None, msg: format!("missing [{section}] section") })
        }
    }
}

fn short_type<T>() -> &'static str {
    let full = std::any::type_name::<T>();
    full.rsplit("::").next().unwrap_or(full)
}

fn strip_comment(v: &str) -> &str {
    // inline comments need whitespace before the marker so map specs stay intact
    let b = v.as_bytes();
    for i in 1..b.len() {
        if (b[i] == b'#' || b[i] == b';') && b[i - 1].is_ascii_whitespace() {
            return &v[..i];
        }
    }
    v
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

pub fn run_section(ini: &Ini) -> Result<RunSection, ConfigError> {
    Ok(RunSection {
        seed: ini.get("run", "seed")?,
        threads: ini.get("run", "threads")?,
        out_dir: ini.get_str("run", "out_dir").map(PathBuf::from),
    })
}

fn model_from(ini: &Ini, section: &str, kind_key: &str, scale_key: &str, default: &str) -> Result<Model, ConfigError> {
    let kind = ini.get_str(section, kind_key).unwrap_or_else(|| default.to_string());
    let scale: Option<f64> = ini.get(section, scale_key)?;
    build_model(&kind, &ModelParams { lambda: None, scale }).map_err(|e| ini.error_at(section, kind_key, e.to_string()))
}

pub fn flow_config(ini: &Ini, seed: u64) -> Result<FlowConfig, ConfigError> {
    ini.require_section("flow")?;
    let backend: Backend = ini.get_or("flow", "backend", Backend::Intrinsic)?;
    let default_model = match backend {
        Backend::Intrinsic => "heisenberg-nilmanifold",
        Backend::Extrinsic => "round-sphere-3",
    };
    let source = model_from(ini, "flow", "source", "source_scale", default_model)?;
    let target = model_from(ini, "flow", "target", "target_scale", default_model)?;
    let initial = ini.get_str("flow", "initial").ok_or_else(|| ini.error_at("flow", "initial", "required"))?;
    let n: usize = ini.get("flow", "n")?.ok_or_else(|| ini.error_at("flow", "n", "required"))?;
    let steps: usize = ini.get("flow", "steps")?.ok_or_else(|| ini.error_at("flow", "steps", "required"))?;
    let pi_term = match ini.get_str("flow", "pi_term").as_deref() {
        None | Some("composition") => PiTerm::Composition,
        Some("pointwise") => PiTerm::Pointwise,
        Some(other) => return Err(ini.error_at("flow", "pi_term", format!("expected composition | pointwise, got `{other}`"))),
    };
    let mut cfg = FlowConfig {
        source,
        target,
        backend,
        initial,
        n,
        dt: ini.get("flow", "dt")?,
        steps,
        every: ini.get_or("flow", "every", 1)?,
        tau_tol: ini.get_or("flow", "tau_tol", 1e-4)?,
        mono_slack: ini.get_or("flow", "mono_slack", 1e-9)?,
        seed,
        allow_unstable: ini.get_or("flow", "allow_unstable", false)?,
        reproject: ini.get_or("flow", "reproject", false)?,
        pi_term,
    };
    if let Some(k) = ini.get::<f64>("flow", "dt_h2")? {
        if cfg.dt.is_some() {
            return Err(ini.error_at("flow", "dt_h2", "give either dt or dt_h2, not both"));
        }
        let h = cfg.grid().map_err(|e| ini.error_at("flow", "n", e.to_string()))?.spacing();
        cfg.dt = Some(k * h * h);
    }
    if let Some(dt) = cfg.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ini.error_at("flow", if ini.get_str("flow", "dt").is_some() { "dt" } else { "dt_h2" }, "time step must be positive"));
        }
    }
    if cfg.every == 0 {
        return Err(ini.error_at("flow", "every", "must be at least 1"));
    }
    Ok(cfg)
}

pub fn suite_config(ini: &Ini, seed: u64) -> Result<(Selection, SuiteConfig), ConfigError> {
    let d = SuiteConfig::default();
    let s = "verify";
    let cfg = SuiteConfig {
        seed,
        tw_samples: ini.get_or(s, "tw_samples", d.tw_samples)?,
        tw_h: ini.get_or(s, "tw_h", d.tw_h)?,
        curvature_points: ini.get_or(s, "curvature_points", d.curvature_points)?,
        order2_trials: ini.get_or(s, "order2_trials", d.order2_trials)?,
        grid_coarse: ini.get_or(s, "grid_coarse", d.grid_coarse)?,
        grid_fine: ini.get_or(s, "grid_fine", d.grid_fine)?,
        map_points: ini.get_or(s, "map_points", d.map_points)?,
        minimality_seeds: ini.get_or(s, "minimality_seeds", d.minimality_seeds)?,
        minimality_n: ini.get_or(s, "minimality_n", d.minimality_n)?,
        flow_n: ini.get_or(s, "flow_n", d.flow_n)?,
        flow_steps: ini.get_or(s, "flow_steps", d.flow_steps)?,
        flow_eps: ini.get_or(s, "flow_eps", d.flow_eps)?,
        sphere_n: ini.get_or(s, "sphere_n", d.sphere_n)?,
        sphere_steps: ini.get_or(s, "sphere_steps", d.sphere_steps)?,
        sphere_eps: ini.get_or(s, "sphere_eps", d.sphere_eps)?,
    };
    let sel = match ini.get_str(s, "checks") {
        None => Selection::All,
        Some(v) if v == "all" => Selection::All,
        Some(v) => Selection::Ids(v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()),
    };
    Ok((sel, cfg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureConfig {
    pub model: Model,
    pub points: usize,
}

pub fn curvature_config(ini: &Ini) -> Result<CurvatureConfig, ConfigError> {
    let kind = ini.get_str("curvature", "model").unwrap_or_else(|| "space-form-chart".into());
    let params = ModelParams { lambda: ini.get("curvature", "lambda")?, scale: ini.get("curvature", "scale")? };
    let model = build_model(&kind, &params).map_err(|e| ini.error_at("curvature", "model", e.to_string()))?;
    Ok(CurvatureConfig { model, points: ini.get_or("curvature", "points", 50)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Jets {
    Exact,
    Discrete,
}

impl FromStr for Jets {
    type Err = String;
    fn from_str(s: &str) -> Result<Jets, String> {
        match s {
            "exact" => Ok(Jets::Exact),
            "discrete" => Ok(Jets::Discrete),
            _ => Err("expected exact | discrete".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyConfig {
    pub map: String,
    pub n: usize,
    pub jets: Jets,
}

pub fn energy_config(ini: &Ini) -> Result<EnergyConfig, ConfigError> {
    Ok(EnergyConfig {
        map: ini.get_str("energy", "map").unwrap_or_else(|| "identity".into()),
        n: ini.get_or("energy", "n", 32)?,
        jets: ini.get_or("energy", "jets", Jets::Exact)?,
    })
}
