//! Run configuration files.
//!
//! Plain UTF-8 `key = value` lines with `#` comments. Keys may sit under the
//! section headers `[env]`, `[agent]` and `[sweep]`; sections only group keys,
//! so each key may appear once per file.
//!
//! ```text
//! [env]
//! env = dst-concave
//! [agent]
//! algo = moq
//! scalariser = chebyshev
//! tau = 4
//! [sweep]
//! seeds = 42..51
//! ```

use std::path::{Path, PathBuf};

use crate::env::EnvId;
use crate::error::{MorlError, Result};
use crate::pareto::ObjectiveVector;
use crate::pql::SetEvalMode;
use crate::scalarise::{ScalariserKind, WeightVector};
use crate::sweep::{Algorithm, SweepConfig, WeightSelection};

const SECTIONS: [&str; 3] = ["env", "agent", "sweep"];

const KEYS: &[&str] = &[
    "name",
    "env",
    "map",
    "algo",
    "scalariser",
    "set_eval",
    "weights",
    "weight_step",
    "max_configs",
    "alpha",
    "gamma",
    "tau",
    "total_timesteps",
    "eps_initial",
    "eps_final",
    "eps_decay_fraction",
    "eval_interval",
    "seed",
    "seeds",
    "ref_point",
    "true_front",
    "archive",
    "state_cap",
    "workers",
];

#[derive(Clone, Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

/// Parsed but not yet interpreted configuration.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    origin: PathBuf,
    entries: Vec<Entry>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| MorlError::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut entries: Vec<Entry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, format!("malformed section header `{content}`")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(line, format!("unknown section `[{name}]`")));
                }
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(err(line, format!("unknown key `{key}`")));
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(err(line, format!("`{key}` already set on line {}", prev.line)));
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Self {
            origin: origin.to_path_buf(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MorlError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn value<T>(&self, key: &str, parse: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|message| MorlError::Parse {
                path: self.origin.clone(),
                line: e.line,
                message: format!("`{key}`: {message}"),
            }),
        }
    }

    /// Overlays the file onto `base`, or onto the defaults of the file's
    /// environment and algorithm when there is no base.
    pub fn to_sweep_config(&self, base: Option<SweepConfig>) -> Result<SweepConfig> {
        let env = self.value("env", |s| s.parse::<EnvId>().map_err(|e| e.to_string()))?;
        let algorithm = self.algorithm(base.as_ref().map(|b| b.algorithm))?;
        let mut cfg = match base {
            Some(mut b) => {
                if let Some(env) = env {
                    if env != b.env {
                        let keep = b.clone();
                        b = SweepConfig::defaults(env, keep.algorithm);
                        b.seeds = keep.seeds;
                        b.workers = keep.workers;
                    }
                }
                if let Some(a) = algorithm {
                    b.algorithm = a;
                }
                b
            }
            None => {
                let env = env.ok_or_else(|| self.missing("env"))?;
                let algorithm = algorithm.ok_or_else(|| self.missing("algo"))?;
                SweepConfig::defaults(env, algorithm)
            }
        };
        if env.is_some() || algorithm.is_some() {
            if self.get("name").is_none() {
                cfg.name = format!("{}-{}", cfg.env, cfg.algorithm);
            }
        }
        self.overlay(&mut cfg)?;
        Ok(cfg)
    }

    fn missing(&self, key: &str) -> MorlError {
        MorlError::Config(format!("{}: required key `{key}` is missing", self.origin.display()))
    }

    fn algorithm(&self, base: Option<Algorithm>) -> Result<Option<Algorithm>> {
        let algo = self.get("algo");
        let scalariser = self.value("scalariser", |s| s.parse::<ScalariserKind>().map_err(|e| e.to_string()))?;
        let set_eval = self.value("set_eval", |s| s.parse::<SetEvalMode>().map_err(|e| e.to_string()))?;
        let base_kind = match base {
            Some(Algorithm::Moq(k)) => Some(k),
            _ => None,
        };
        let base_mode = match base {
            Some(Algorithm::Pql(m)) => Some(m),
            _ => None,
        };
        let algorithm = match algo {
            Some("moq") => Some(Algorithm::Moq(scalariser.or(base_kind).unwrap_or(ScalariserKind::Linear))),
            Some("pql") => Some(Algorithm::Pql(set_eval.or(base_mode).unwrap_or(SetEvalMode::Hypervolume))),
            Some(other) => {
                let a = self.value("algo", |_| other.parse::<Algorithm>().map_err(|e| e.to_string()))?;
                a.map(|a| match (a, set_eval) {
                    (Algorithm::Pql(_), Some(m)) => Algorithm::Pql(m),
                    (a, _) => a,
                })
            }
            None => match (base, scalariser, set_eval) {
                (Some(Algorithm::Moq(_)), Some(k), _) => Some(Algorithm::Moq(k)),
                (Some(Algorithm::Pql(_)), _, Some(m)) => Some(Algorithm::Pql(m)),
                _ => None,
            },
        };
        Ok(algorithm)
    }

    fn overlay(&self, cfg: &mut SweepConfig) -> Result<()> {
        let real = |s: &str| s.parse::<f64>().map_err(|e| format!("{e}"));
        let count = |s: &str| s.parse::<usize>().map_err(|e| format!("{e}"));
        if let Some(v) = self.get("name") {
            cfg.name = v.to_string();
        }
        if let Some(v) = self.get("map") {
            cfg.map = Some(self.origin.parent().unwrap_or(Path::new("")).join(v));
        }
        if let Some(ws) = self.value("weights", parse_weight_list)? {
            cfg.weights = WeightSelection::Explicit(ws);
        }
        let step = self.value("weight_step", real)?;
        let max_configs = self.value("max_configs", count)?;
        if step.is_some() || max_configs.is_some() {
            if matches!(cfg.weights, WeightSelection::Explicit(_)) && self.get("weights").is_some() {
                return Err(MorlError::Config(
                    "`weights` cannot be combined with `weight_step` or `max_configs`".into(),
                ));
            }
            let (old_step, old_max) = match cfg.weights {
                WeightSelection::Grid { step, max_configs } => (step, max_configs),
                WeightSelection::Explicit(_) => (crate::sweep::DEFAULT_WEIGHT_STEP, None),
            };
            cfg.weights = WeightSelection::Grid {
                step: step.unwrap_or(old_step),
                max_configs: max_configs.or(old_max),
            };
        }
        if let Some(v) = self.value("alpha", real)? {
            cfg.alpha = v;
        }
        if let Some(v) = self.value("gamma", real)? {
            cfg.gamma = v;
        }
        if let Some(v) = self.value("tau", real)? {
            cfg.tau = v;
        }
        if let Some(v) = self.value("total_timesteps", count)? {
            cfg.total_timesteps = v;
        }
        if let Some(v) = self.value("eps_initial", real)? {
            cfg.schedule.initial = v;
        }
        if let Some(v) = self.value("eps_final", real)? {
            cfg.schedule.final_value = v;
        }
        if let Some(v) = self.value("eps_decay_fraction", real)? {
            cfg.schedule.decay_fraction = v;
        }
        if let Some(v) = self.value("eval_interval", count)? {
            cfg.eval_interval = v;
        }
        match (self.get("seed"), self.get("seeds")) {
            (Some(_), Some(_)) => {
                return Err(MorlError::Config("set either `seed` or `seeds`, not both".into()));
            }
            (Some(_), None) => {
                cfg.seeds = vec![self.value("seed", |s| s.parse::<u64>().map_err(|e| e.to_string()))?.unwrap()];
            }
            (None, Some(_)) => cfg.seeds = self.value("seeds", parse_seeds)?.unwrap(),
            (None, None) => {}
        }
        if let Some(v) = self.value("ref_point", |s| parse_vector(s).map_err(|e| e.to_string()))? {
            cfg.reference = v;
        }
        if let Some(v) = self.value("true_front", parse_bool)? {
            cfg.use_true_front = v;
        }
        if let Some(v) = self.value("archive", parse_archive)? {
            cfg.cumulative_archive = v;
        }
        if let Some(v) = self.value("state_cap", count)? {
            cfg.state_cap = v;
        }
        if let Some(v) = self.value("workers", count)? {
            cfg.workers = Some(v);
        }
        Ok(())
    }
}

/// Seeds as an inclusive range `a..b` or a comma-separated list.
pub fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed `{}`: {e}", t.trim()));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if b < a {
            return Err(format!("empty seed range {a}..{b}"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(num).collect::<std::result::Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}

/// Comma-separated reals.
pub fn parse_vector(s: &str) -> Result<ObjectiveVector> {
    let values = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| MorlError::Config(format!("bad number `{}`: {e}", t.trim())))
        })
        .collect::<Result<Vec<f64>>>()?;
    ObjectiveVector::new(values)
}

/// Weight vectors separated by `;`, components by `,`.
pub fn parse_weight_list(s: &str) -> std::result::Result<Vec<WeightVector>, String> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<WeightVector>().map_err(|e| e.to_string()))
        .collect()
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn parse_archive(s: &str) -> std::result::Result<bool, String> {
    match s {
        "snapshot" => Ok(false),
        "cumulative" => Ok(true),
        _ => Err(format!("expected snapshot or cumulative, got `{s}`")),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Fully resolved configuration as config-file text. Parsing it back yields
/// the same [`SweepConfig`].
pub fn to_config_text(cfg: &SweepConfig) -> String {
    let mut env = vec![("env", cfg.env.to_string())];
    if let Some(map) = &cfg.map {
        let map = std::fs::canonicalize(map).unwrap_or_else(|_| map.clone());
        env.push(("map", map.display().to_string()));
    }
    let mut agent = match cfg.algorithm {
        Algorithm::Moq(kind) => vec![
            ("algo", "moq".to_string()),
            ("scalariser", kind.to_string()),
            ("alpha", cfg.alpha.to_string()),
            ("tau", cfg.tau.to_string()),
        ],
        Algorithm::Pql(mode) => vec![
            ("algo", "pql".to_string()),
            ("set_eval", mode.to_string()),
            ("state_cap", cfg.state_cap.to_string()),
        ],
    };
    agent.extend([
        ("gamma", cfg.gamma.to_string()),
        ("total_timesteps", cfg.total_timesteps.to_string()),
        ("eps_initial", cfg.schedule.initial.to_string()),
        ("eps_final", cfg.schedule.final_value.to_string()),
        ("eps_decay_fraction", cfg.schedule.decay_fraction.to_string()),
    ]);
    let mut sweep = vec![("name", cfg.name.clone())];
    if let Algorithm::Moq(_) = cfg.algorithm {
        match &cfg.weights {
            WeightSelection::Grid { step, max_configs } => {
                sweep.push(("weight_step", step.to_string()));
                if let Some(n) = max_configs {
                    sweep.push(("max_configs", n.to_string()));
                }
            }
            WeightSelection::Explicit(ws) => {
                let list = ws.iter().map(|w| join(w.values())).collect::<Vec<_>>().join("; ");
                sweep.push(("weights", list));
            }
        }
    }
    sweep.extend([
        ("eval_interval", cfg.eval_interval.to_string()),
        ("seeds", cfg.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
        ("ref_point", join(cfg.reference.values())),
        ("true_front", cfg.use_true_front.to_string()),
        (
            "archive",
            if cfg.cumulative_archive { "cumulative" } else { "snapshot" }.to_string(),
        ),
    ]);
    if let Some(n) = cfg.workers {
        sweep.push(("workers", n.to_string()));
    }
    let mut out = String::new();
    for (section, pairs) in [("env", env), ("agent", agent), ("sweep", sweep)] {
        out.push_str(&format!("[{section}]\n"));
        for (k, v) in pairs {
            out.push_str(&format!("{k} = {v}\n"));
        }
    }
    out
}
