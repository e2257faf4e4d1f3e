use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::baselines::{Constant, ConstantAndCut, SlopeOnly};
use crate::error::{Error, Result};
use crate::optim::DirectionRule;
use crate::problems::{load_dataset, LogisticRegression, NoisyQuadratic, StochasticProblem};
use crate::run::{ReplayRules, Schedule};
use crate::salsa::{Salsa, SalsaConfig};
use crate::sasa_plus::{SasaPlus, SasaPlusConfig};
use crate::ssls::{Ssls, SslsConfig};

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn thousand() -> usize {
    1000
}

fn ten() -> u64 {
    10
}

fn tenth() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Evenly spaced spectrum on `[lambda_min, lambda_max]`, optimum at the
    /// origin, start at `x0` in every coordinate.
    NoisyQuadratic {
        dim: usize,
        lambda_min: f64,
        lambda_max: f64,
        sigma: f64,
        #[serde(default = "thousand")]
        steps_per_epoch: usize,
        #[serde(default = "one")]
        x0: f64,
    },
    LogisticSynthetic {
        n: usize,
        p: usize,
        batch_size: usize,
        #[serde(default)]
        l2: f64,
        #[serde(default)]
        data_seed: u64,
    },
    LogisticFile {
        path: PathBuf,
        batch_size: usize,
        #[serde(default)]
        l2: f64,
        #[serde(default = "yes")]
        standardize: bool,
    },
}

impl ProblemSpec {
    /// The oracle and its starting point.
    pub fn build(&self) -> Result<(Box<dyn StochasticProblem>, Vec<f64>)> {
        Ok(match self {
            ProblemSpec::NoisyQuadratic {
                dim,
                lambda_min,
                lambda_max,
                sigma,
                steps_per_epoch,
                x0,
            } => {
                let q = NoisyQuadratic::evenly_spaced(*dim, *lambda_min, *lambda_max, *sigma)?
                    .with_steps_per_epoch(*steps_per_epoch);
                (Box::new(q), vec![*x0; *dim])
            }
            ProblemSpec::LogisticSynthetic {
                n,
                p,
                batch_size,
                l2,
                data_seed,
            } => {
                let lr = LogisticRegression::synthetic(*n, *p, *batch_size, *data_seed)?.with_l2(*l2)?;
                (Box::new(lr), vec![0.0; *p])
            }
            ProblemSpec::LogisticFile {
                path,
                batch_size,
                l2,
                standardize,
            } => {
                let lr = load_dataset(path, *standardize, *batch_size)?.with_l2(*l2)?;
                let p = lr.n_features();
                (Box::new(lr), vec![0.0; p])
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerSpec {
    Constant,
    ConstantAndCut(CutSpec),
    SasaPlus(SasaPlusConfig),
    Ssls(SslsConfig),
    Salsa(SalsaConfig),
    SlopeOnly(SasaPlusConfig),
}

/// Multiply by `factor` at the start of each listed epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutSpec {
    #[serde(default = "tenth")]
    pub factor: f64,
    pub drop_epochs: Vec<u64>,
}

impl SchedulerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerSpec::Constant => "constant",
            SchedulerSpec::ConstantAndCut(_) => "constant_and_cut",
            SchedulerSpec::SasaPlus(_) => "sasa_plus",
            SchedulerSpec::Ssls(_) => "ssls",
            SchedulerSpec::Salsa(_) => "salsa",
            SchedulerSpec::SlopeOnly(_) => "slope_only",
        }
    }

    pub fn build(&self, alpha0: f64, steps_per_epoch: usize) -> Result<Box<dyn Schedule>> {
        Ok(match self {
            SchedulerSpec::Constant => Box::new(Constant::new(alpha0)?),
            SchedulerSpec::ConstantAndCut(c) => Box::new(ConstantAndCut::at_epochs(
                alpha0,
                c.factor,
                &c.drop_epochs,
                steps_per_epoch,
            )?),
            SchedulerSpec::SasaPlus(c) => Box::new(SasaPlus::new(*c, alpha0)?),
            SchedulerSpec::Ssls(c) => Box::new(Ssls::new(*c, alpha0)?),
            SchedulerSpec::Salsa(c) => Box::new(Salsa::new(*c, alpha0)?),
            SchedulerSpec::SlopeOnly(c) => Box::new(SlopeOnly::new(*c, alpha0)?),
        })
    }

    /// What the step-size trace of this scheduler must satisfy.
    pub fn replay_rules(&self, alpha0: f64) -> ReplayRules {
        let mut rules = ReplayRules {
            alpha0,
            tau: 1.0,
            warmup_ratio: None,
            max_probes: None,
        };
        match self {
            SchedulerSpec::Constant => {}
            SchedulerSpec::ConstantAndCut(c) => rules.tau = c.factor,
            SchedulerSpec::SasaPlus(c) | SchedulerSpec::SlopeOnly(c) => rules.tau = c.tau,
            SchedulerSpec::Ssls(c) => {
                rules.warmup_ratio = Some(c.step_ratio_bounds());
                rules.max_probes = Some(c.m);
            }
            SchedulerSpec::Salsa(c) => {
                rules.tau = c.sasa_plus.tau;
                rules.warmup_ratio = Some(c.ssls.step_ratio_bounds());
                rules.max_probes = Some(c.ssls.m);
            }
        }
        rules
    }

    fn validate(&self) -> Result<()> {
        match self {
            SchedulerSpec::Constant => Ok(()),
            SchedulerSpec::ConstantAndCut(c) if !(c.factor > 0.0 && c.factor < 1.0) => Err(config_err(
                "scheduler.constant_and_cut.factor",
                "must lie in (0, 1)",
            )),
            SchedulerSpec::ConstantAndCut(_) => Ok(()),
            SchedulerSpec::SasaPlus(c) | SchedulerSpec::SlopeOnly(c) => c.validate(),
            SchedulerSpec::Ssls(c) => c.validate(),
            SchedulerSpec::Salsa(c) => c.validate(),
        }
    }
}

/// A fully resolved experiment. A run is a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub rule: DirectionRule,
    pub scheduler: SchedulerSpec,
    pub alpha0: f64,
    /// Total iterations; resolved from `epochs` when only that is given.
    #[serde(default)]
    pub iterations: Option<u64>,
    #[serde(default)]
    pub epochs: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// Metrics row period; test iterations and the last iteration are always logged.
    #[serde(default = "ten")]
    pub log_every: u64,
    /// Output location; not part of the experiment identity.
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a JSON config, applies `key=value` overrides and fills defaults.
    /// Relative dataset paths are taken relative to the config file.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        Self::resolve(Self::load_value(path, overrides)?)
    }

    /// The raw config after overrides and path rebasing, before defaults.
    pub fn load_value(path: &Path, overrides: &[String]) -> Result<Value> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut value: Value = serde_json::from_str(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        apply_overrides(&mut value, overrides)?;
        if let Some(base) = path.parent() {
            rebase_dataset_path(&mut value, base);
        }
        Ok(value)
    }

    /// Fills scheduler defaults that depend on the problem and checks every field.
    pub fn resolve(mut value: Value) -> Result<Self> {
        let problem_value = value
            .get("problem")
            .cloned()
            .ok_or_else(|| config_err("problem", "missing field"))?;
        let problem: ProblemSpec = strict(problem_value, "problem.")?;
        let (oracle, _) = problem.build()?;
        fill_scheduler_defaults(&mut value, oracle.as_ref())?;
        let mut cfg: RunConfig = strict(value, "")?;
        let spe = oracle.steps_per_epoch() as u64;
        cfg.iterations = match (cfg.iterations, cfg.epochs) {
            (Some(i), Some(e)) if i != e * spe => {
                return Err(config_err("iterations", "disagrees with epochs"))
            }
            (Some(i), _) => Some(i),
            (None, Some(e)) => Some(e * spe),
            (None, None) => return Err(config_err("iterations", "missing iterations or epochs")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn total_iterations(&self) -> u64 {
        self.iterations.unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(config_err("alpha0", "must be positive and finite"));
        }
        if self.log_every == 0 {
            return Err(config_err("log_every", "must be positive"));
        }
        self.scheduler.validate()
    }

    /// The resolved config as a JSON value (without `out_dir`).
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn config_err(path: &str, message: &str) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Deserializes with unknown-field rejection, reporting the failing field path.
fn strict<T: serde::de::DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.trim_end_matches('.'), inner.as_str()) {
            (p, ".") => p.to_string(),
            ("", i) => i.to_string(),
            (p, i) => format!("{p}.{i}"),
        };
        Error::Config {
            path: if path.is_empty() { ".".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

/// Adds keys from `defaults` that `target` lacks; replaces a non-object target.
fn merge_missing(target: &mut Value, defaults: Value) {
    match (target, defaults) {
        (Value::Object(t), Value::Object(d)) => {
            for (k, v) in d {
                t.entry(k).or_insert(v);
            }
        }
        (t @ Value::Null, d) => *t = d,
        _ => {}
    }
}

fn fill_scheduler_defaults(value: &mut Value, problem: &dyn StochasticProblem) -> Result<()> {
    let Some(sched) = value.get_mut("scheduler").and_then(Value::as_object_mut) else {
        return Ok(());
    };
    let sasa = serde_json::to_value(SasaPlusConfig::defaults_for(problem))?;
    let ssls = serde_json::to_value(SslsConfig::defaults_for(problem))?;
    for (kind, body) in sched.iter_mut() {
        match kind.as_str() {
            "sasa_plus" | "slope_only" => merge_missing(body, sasa.clone()),
            "ssls" => merge_missing(body, ssls.clone()),
            "salsa" => {
                if body.is_null() {
                    *body = Value::Object(Map::new());
                }
                if let Some(obj) = body.as_object_mut() {
                    merge_missing(obj.entry("sasa_plus").or_insert(Value::Null), sasa.clone());
                    merge_missing(obj.entry("ssls").or_insert(Value::Null), ssls.clone());
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn rebase_dataset_path(value: &mut Value, base: &Path) {
    let Some(Value::String(p)) = value.pointer_mut("/problem/logistic_file/path") else {
        return;
    };
    let path = Path::new(p.as_str());
    if path.is_relative() && !base.as_os_str().is_empty() {
        *p = base.join(path).display().to_string();
    }
}

/// Parses an override value as JSON, falling back to a plain string.
pub fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Sets `a.b.c = value`, creating intermediate objects.
pub fn set_path(root: &mut Value, dotted: &str, value: Value) -> Result<()> {
    let keys: Vec<&str> = dotted.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(dotted, "malformed override key"));
    }
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        let Some(obj) = node.as_object_mut() else {
            return Err(config_err(&keys[..i].join("."), "cannot override inside a non-object value"));
        };
        if i + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        node = obj.entry((*key).to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Applies `key=value` strings in order.
pub fn apply_overrides(root: &mut Value, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let Some((key, raw)) = o.split_once('=') else {
            return Err(config_err(o, "override must look like key=value"));
        };
        set_path(root, key.trim(), parse_value(raw.trim()))?;
    }
    Ok(())
}
