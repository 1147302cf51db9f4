//! Flat `key = value` scenario files.
//!
//! A scenario bundles one parameter set with run controls:
//!
//! ```text
//! # comments run to end of line; blank lines are ignored
//! initial_shares   = 1e6
//! horizon          = 1.0
//! ...
//! p0               = 0.10    # or exec_risk_strategy = 100 directly
//! policies         = penalized_optimal, adaptive_vwap
//! n_paths          = 1000
//! n_steps          = 1000
//! seed             = 1
//! out_dir          = runs/easy
//! ```
//!
//! `p0` is a convenience: the strategy execution-risk scale as a fraction of
//! the characteristic rate scale, `exec_risk_strategy = p0 sqrt(Y / T)`.
//! Exactly one of `p0` / `exec_risk_strategy` must be given.  Keys may not
//! repeat, unknown keys are rejected, and every policy listed must be
//! compatible with the terminal penalty.

use crate::numeric::fmt_full;
use crate::params::{build_params, ModelParams, ParamError, PARAM_FIELDS};
use crate::policy::{Policy, PolicyError, PolicyKind};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Run controls recognized alongside the model parameters.
const CONTROL_FIELDS: [&str; 6] = ["p0", "policies", "n_paths", "n_steps", "seed", "out_dir"];

/// Errors from scenario parsing.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("could not read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// A parsed scenario: validated parameters plus run controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    pub policies: Vec<PolicyKind>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

/// Read and parse a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

/// Parse scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    // key -> (line number, value)
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ScenarioError::Syntax {
            line: line_no,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ScenarioError::Syntax {
                line: line_no,
                msg: "empty key or value".into(),
            });
        }
        if entries.contains_key(key) {
            return Err(ScenarioError::DuplicateKey {
                line: line_no,
                key: key.into(),
            });
        }
        entries.insert(key.into(), (line_no, value.into()));
    }

    for (key, (line, _)) in &entries {
        if !PARAM_FIELDS.contains(&key.as_str()) && !CONTROL_FIELDS.contains(&key.as_str()) {
            return Err(ScenarioError::UnknownKey {
                line: *line,
                key: key.clone(),
            });
        }
    }

    let get_f64 = |entries: &BTreeMap<String, (usize, String)>, key: &str| -> Result<f64, ScenarioError> {
        let (_, v) = entries.get(key).ok_or_else(|| ScenarioError::BadValue {
            key: key.into(),
            msg: "required to resolve p0".into(),
        })?;
        v.parse::<f64>().map_err(|e| ScenarioError::BadValue {
            key: key.into(),
            msg: e.to_string(),
        })
    };

    // Resolve p0 into exec_risk_strategy before building parameters.
    let has_p0 = entries.contains_key("p0");
    let has_phi = entries.contains_key("exec_risk_strategy");
    let mut param_map: BTreeMap<String, String> = entries
        .iter()
        .filter(|(k, _)| PARAM_FIELDS.contains(&k.as_str()))
        .map(|(k, (_, v))| (k.clone(), v.clone()))
        .collect();
    match (has_p0, has_phi) {
        (true, true) => {
            return Err(ScenarioError::BadValue {
                key: "p0".into(),
                msg: "give either p0 or exec_risk_strategy, not both".into(),
            })
        }
        (false, false) => {
            return Err(ScenarioError::BadValue {
                key: "exec_risk_strategy".into(),
                msg: "missing; give exec_risk_strategy directly or p0 as a fraction of sqrt(Y/T)"
                    .into(),
            })
        }
        (true, false) => {
            let p0 = get_f64(&entries, "p0")?;
            if !(p0.is_finite() && p0 >= 0.0) {
                return Err(ScenarioError::BadValue {
                    key: "p0".into(),
                    msg: format!("must be finite and >= 0, got {p0}"),
                });
            }
            let shares = get_f64(&entries, "initial_shares")?;
            let horizon = get_f64(&entries, "horizon")?;
            let phi0 = p0 * (shares / horizon).sqrt();
            param_map.insert("exec_risk_strategy".into(), fmt_full(phi0));
        }
        (false, true) => {}
    }
    let params = build_params(&param_map)?;

    // Policies: required, comma-separated, no repeats, penalty-compatible.
    let (_, policy_text) = entries
        .get("policies")
        .ok_or(ScenarioError::MissingKey("policies"))?;
    let mut policies = Vec::new();
    for token in policy_text.split(',') {
        let token = token.trim();
        let kind = PolicyKind::parse(token).ok_or_else(|| ScenarioError::BadValue {
            key: "policies".into(),
            msg: format!(
                "unknown policy `{token}`; expected one of {}",
                PolicyKind::ALL.map(|k| k.as_str()).join(", ")
            ),
        })?;
        if policies.contains(&kind) {
            return Err(ScenarioError::BadValue {
                key: "policies".into(),
                msg: format!("policy `{kind}` listed twice"),
            });
        }
        Policy::new(kind, &params)?;
        policies.push(kind);
    }
    if policies.is_empty() {
        return Err(ScenarioError::BadValue {
            key: "policies".into(),
            msg: "at least one policy required".into(),
        });
    }

    let parse_count = |key: &'static str, default: usize| -> Result<usize, ScenarioError> {
        match entries.get(key) {
            None => Ok(default),
            Some((_, v)) => {
                let n = v.parse::<usize>().map_err(|e| ScenarioError::BadValue {
                    key: key.into(),
                    msg: e.to_string(),
                })?;
                if n == 0 {
                    return Err(ScenarioError::BadValue {
                        key: key.into(),
                        msg: "must be at least 1".into(),
                    });
                }
                Ok(n)
            }
        }
    };
    let n_paths = parse_count("n_paths", 1000)?;
    let n_steps = parse_count("n_steps", 1000)?;
    let seed = match entries.get("seed") {
        None => 1,
        Some((_, v)) => v.parse::<u64>().map_err(|e| ScenarioError::BadValue {
            key: "seed".into(),
            msg: e.to_string(),
        })?,
    };
    let out_dir = entries.get("out_dir").map(|(_, v)| PathBuf::from(v));

    Ok(Scenario {
        params,
        policies,
        n_paths,
        n_steps,
        seed,
        out_dir,
    })
}
