//! Parsing of model specifications, tail-probability requests, and
//! scenario references shared by the subcommands.

use rmst_core::sampler::{Direction, TailRequest};
use rmst_core::sim::ScenarioSpec;
use rmst_core::{Dataset, Error, InteractionEncoding, RegressionSpec, Result};

/// Parse a `--model` string against a list of covariate names. Tokens are
/// comma-separated covariate names; `A*NAME` requests a treatment
/// interaction with `NAME` (the main effect is added automatically). The
/// empty string is the unadjusted treatment-only model.
pub fn parse_model_names(
    model: &str,
    covariate_names: &[String],
    encoding: InteractionEncoding,
) -> Result<RegressionSpec> {
    let mut covariate_indices = Vec::new();
    let mut interactions = Vec::new();
    let index_of = |name: &str| -> Result<usize> {
        covariate_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown covariate '{name}' in --model")))
    };
    for token in model.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some(name) = token.strip_prefix("A*") {
            let idx = index_of(name)?;
            if !interactions.contains(&idx) {
                interactions.push(idx);
            }
            if !covariate_indices.contains(&idx) {
                covariate_indices.push(idx);
            }
        } else {
            let idx = index_of(token)?;
            if covariate_indices.contains(&idx) {
                return Err(Error::InvalidSpec(format!("covariate '{token}' listed twice")));
            }
            covariate_indices.push(idx);
        }
    }
    Ok(RegressionSpec { include_treatment: true, covariate_indices, interactions, encoding })
}

pub fn parse_model(
    model: &str,
    data: &Dataset,
    encoding: InteractionEncoding,
) -> Result<RegressionSpec> {
    parse_model_names(model, data.covariate_names(), encoding)
}

/// Parse repeatable `--tail-prob PARAM,OP,VALUE` requests. `OP` is `ge` or
/// `le` (aliases `>=`, `<=`). `delta` is accepted as an alias for the
/// treatment coefficient.
pub fn parse_tail_requests(
    requests: &[String],
    parameter_names: &[String],
) -> Result<Vec<TailRequest>> {
    let mut out = Vec::with_capacity(requests.len());
    for raw in requests {
        let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidSpec(format!(
                "--tail-prob expects PARAM,OP,VALUE, got '{raw}'"
            )));
        }
        let parameter = if parts[0] == "delta" { "treatment" } else { parts[0] }.to_string();
        if !parameter_names.contains(&parameter) {
            return Err(Error::UnknownParameter(parameter));
        }
        let direction = match parts[1] {
            "ge" | ">=" | "geq" => Direction::Geq,
            "le" | "<=" | "leq" => Direction::Leq,
            other => {
                return Err(Error::InvalidSpec(format!(
                    "--tail-prob direction must be ge or le, got '{other}'"
                )))
            }
        };
        let threshold: f64 = parts[2]
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("bad --tail-prob threshold '{}'", parts[2])))?;
        out.push(TailRequest { parameter, direction, threshold });
    }
    Ok(out)
}

/// Resolve a `--scenario` argument: a builtin id (`1`, `1alt`, `2`..`6`)
/// or a path to a scenario JSON file.
pub fn load_scenario(arg: &str) -> Result<ScenarioSpec> {
    let path = std::path::Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        let spec: ScenarioSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        return Ok(spec);
    }
    ScenarioSpec::builtin(arg)
}
