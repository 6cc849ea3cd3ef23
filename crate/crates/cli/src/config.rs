//! JSON run configuration with defaults and key-naming validation.

use std::path::{Path, PathBuf};

use mshe_core::{DomainSpec, FlowParams, RhsForm, Scheme, SchemeConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    /// The sine mode `e_k`, one-based.
    Mode { k: usize },
    /// Random unit field from the generator seeded with `seed`.
    Random { seed: u64 },
    /// Mode coefficients from a JSON document; checkpoints resume their run.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub trajectory_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub params: FlowParams,
    pub init: InitSpec,
    pub scheme: SchemeConfig,
    pub outputs: Outputs,
    pub rng_seed: u64,
    pub seeds: usize,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    length: Option<f64>,
    n_modes: Option<i64>,
    dealias: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    n: Option<i64>,
    a: Option<f64>,
    dealias: Option<bool>,
    rhs_form: Option<RhsForm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInit {
    kind: Option<String>,
    k: Option<i64>,
    seed: Option<u64>,
    path: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    kind: Option<Scheme>,
    dt: Option<f64>,
    t_end: Option<f64>,
    record_every: Option<i64>,
    energy_guard: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: Option<RawDomain>,
    params: Option<RawParams>,
    init: Option<RawInit>,
    scheme: Option<RawScheme>,
    outputs: Option<Outputs>,
    rng_seed: Option<u64>,
    seeds: Option<i64>,
}

fn invalid(key: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn positive_int(key: &str, v: i64) -> Result<usize, CliError> {
    if v < 1 {
        return Err(invalid(key, format!("must be a positive integer, got {v}")));
    }
    Ok(v as usize)
}

/// Parses and validates a configuration document.
///
/// Defaults: 64 modes on `(0, 1)`, IMEX Euler with `dt = 1e−5` up to
/// `t = 0.02`, `a = 0`, dealiasing for `n ≥ 2`, random initial data with
/// seed 0.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;

    let rd = raw.domain.unwrap_or_default();
    let n_modes = match rd.n_modes {
        Some(v) => positive_int("domain.n_modes", v)?,
        None => 64,
    };
    let domain = DomainSpec::new(rd.length.unwrap_or(1.0), n_modes);
    domain
        .validate()
        .map_err(|e| invalid(&format!("domain.{}", field_key(&e)), e.to_string()))?;

    let rp = raw
        .params
        .ok_or_else(|| invalid("params", "missing required section"))?;
    let n =
        rp.n.ok_or_else(|| invalid("params.n", "missing required key"))?;
    if n < 1 || n > u32::MAX as i64 {
        return Err(invalid(
            "params.n",
            format!("must be an integer >= 1, got {n}"),
        ));
    }
    let a = rp.a.unwrap_or(0.0);
    if !a.is_finite() {
        return Err(invalid("params.a", "must be finite"));
    }
    let mut params = FlowParams::new(n as u32, a).map_err(|e| invalid("params", e.to_string()))?;
    if let (Some(x), Some(y)) = (rd.dealias, rp.dealias) {
        if x != y {
            return Err(invalid("params.dealias", "conflicts with domain.dealias"));
        }
    }
    if let Some(d) = rp.dealias.or(rd.dealias) {
        params = params.with_dealias(d);
    }
    if let Some(f) = rp.rhs_form {
        params = params.with_rhs_form(f);
    }

    let init = match raw.init {
        None => InitSpec::Random { seed: 0 },
        Some(ri) => match ri.kind.as_deref() {
            Some("mode") => {
                let k = ri
                    .k
                    .ok_or_else(|| invalid("init.k", "missing required key for kind \"mode\""))?;
                let k = positive_int("init.k", k)?;
                if k > n_modes {
                    return Err(invalid(
                        "init.k",
                        format!("mode {k} exceeds n_modes = {n_modes}"),
                    ));
                }
                InitSpec::Mode { k }
            }
            Some("random") => InitSpec::Random {
                seed: ri.seed.unwrap_or(0),
            },
            Some("file") => InitSpec::File {
                path: ri.path.ok_or_else(|| {
                    invalid("init.path", "missing required key for kind \"file\"")
                })?,
            },
            Some(other) => {
                return Err(invalid(
                    "init.kind",
                    format!("expected \"mode\", \"random\" or \"file\", got {other:?}"),
                ))
            }
            None => return Err(invalid("init.kind", "missing required key")),
        },
    };

    let rs = raw.scheme.unwrap_or_default();
    let record_every = match rs.record_every {
        Some(v) => positive_int("scheme.record_every", v)?,
        None => 1,
    };
    let scheme = SchemeConfig {
        scheme: rs.kind.unwrap_or_default(),
        dt: rs.dt.unwrap_or(1e-5),
        t_end: rs.t_end.unwrap_or(0.02),
        record_every,
        energy_guard: rs.energy_guard.unwrap_or(false),
    };
    scheme.validate().map_err(|e| match e {
        mshe_core::DynamicsError::Invalid { key, msg } => invalid(&format!("scheme.{key}"), msg),
        other => invalid("scheme", other.to_string()),
    })?;

    let seeds = match raw.seeds {
        Some(v) => positive_int("seeds", v)?,
        None => 32,
    };

    Ok(RunConfig {
        domain,
        params,
        init,
        scheme,
        outputs: raw.outputs.unwrap_or_default(),
        rng_seed: raw.rng_seed.unwrap_or(0),
        seeds,
    })
}

fn field_key(e: &mshe_core::FieldError) -> &'static str {
    match e {
        mshe_core::FieldError::Config { key, .. } => key,
        _ => "",
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}
