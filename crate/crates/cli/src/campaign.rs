//! `simulate` and `campaign` subcommands.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use rmst_core::gmm::InteractionEncoding;
use rmst_core::metrics::{aggregate, ReplicationReport, ReplicationResult};
use rmst_core::sampler::{sample, summarize};
use rmst_core::sim::{calibrate_censoring, generate, true_values, ScenarioSpec};
use rmst_core::survival::{pseudo_obs, resolve_tau, Algorithm};
use rmst_core::{build_design, gee_fit, km_diff_rmst, derive_seed, Dataset, Error, GmmState, RegressionSpec, Result};

use crate::fit::{EncodeArg, SamplerArgs};
use crate::model;
use crate::write_output;

/// Pilot size for the one-off censoring calibration.
const CALIBRATION_PILOT: usize = 100_000;
/// Seed index reserved for calibration, far from replication indices.
const CALIBRATION_INDEX: u64 = u64::MAX - 1;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Builtin scenario id (1, 1alt, 2..6) or a scenario JSON path
    #[arg(long)]
    pub scenario: String,
    /// Sample size
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output dataset CSV (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let spec = model::load_scenario(&args.scenario)?;
    let data = generate(&spec, args.n, args.seed)?;
    eprintln!(
        "rmst simulate: scenario {} n={} events={} censor_rate={:.3}",
        spec.id,
        data.len(),
        data.n_events(),
        data.censor_rate()
    );
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    write_output(args.output.as_deref(), &buf)
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// Builtin scenario id (1, 1alt, 2..6) or a scenario JSON path
    #[arg(long)]
    pub scenario: String,
    /// Sample size per replication
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub replications: usize,
    /// Comma-separated covariate names; `A*NAME` adds a treatment interaction
    #[arg(long, default_value = "")]
    pub model: String,
    #[arg(long, value_enum, default_value_t = EncodeArg::Product)]
    pub encode: EncodeArg,
    /// Methods to run (comma-separated subset of km,gee,gmm)
    #[arg(long, default_value = "km,gee,gmm")]
    pub methods: String,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Monte Carlo draws for covariate-integrated true values
    #[arg(long = "mc-truth", default_value_t = 1_000_000)]
    pub mc_truth: usize,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads (fallback: RMST_BGMM_WORKERS, then all cores)
    #[arg(long)]
    pub workers: Option<usize>,
}

struct RepOutcome {
    km: ReplicationResult,
    gee: Vec<ReplicationResult>,
    gmm: Vec<ReplicationResult>,
    tau_truncated: bool,
}

fn failed_result() -> ReplicationResult {
    ReplicationResult {
        estimate: f64::NAN,
        se: f64::NAN,
        ci_lower: f64::NAN,
        ci_upper: f64::NAN,
        converged: false,
    }
}

fn run_replication(
    spec: &ScenarioSpec,
    model_spec: &RegressionSpec,
    tracked: &[String],
    sampler: &SamplerArgs,
    n: usize,
    rep_seed: u64,
    want_gmm: bool,
) -> Result<RepOutcome> {
    let data: Dataset = generate(spec, n, rep_seed)?;
    let tau = resolve_tau(&data, spec.tau)?;
    let pseudo = pseudo_obs(&data, tau, Algorithm::Fast)?;

    let km = match km_diff_rmst(&data, tau) {
        Ok(fit) => ReplicationResult {
            estimate: fit.estimate,
            se: fit.se,
            ci_lower: fit.ci_lower,
            ci_upper: fit.ci_upper,
            converged: true,
        },
        Err(_) => failed_result(),
    };

    let design = build_design(&data, model_spec);
    let (gee, gmm) = match design {
        Ok(design) => {
            let gee = match gee_fit(&design, &pseudo, 0.95) {
                Ok(fit) => tracked
                    .iter()
                    .map(|name| match design.column_index(name) {
                        Some(j) => ReplicationResult {
                            estimate: fit.beta_hat[j],
                            se: fit.se[j],
                            ci_lower: fit.ci_lower[j],
                            ci_upper: fit.ci_upper[j],
                            converged: true,
                        },
                        None => failed_result(),
                    })
                    .collect(),
                Err(_) => vec![failed_result(); tracked.len()],
            };
            let gmm = if want_gmm {
                run_gmm_replication(&design, &pseudo, tracked, sampler, rep_seed)
                    .unwrap_or_else(|_| vec![failed_result(); tracked.len()])
            } else {
                vec![failed_result(); tracked.len()]
            };
            (gee, gmm)
        }
        Err(_) => (
            vec![failed_result(); tracked.len()],
            vec![failed_result(); tracked.len()],
        ),
    };

    Ok(RepOutcome { km, gee, gmm, tau_truncated: tau < spec.tau })
}

fn run_gmm_replication(
    design: &rmst_core::DesignMatrix,
    pseudo: &rmst_core::PseudoObsVector,
    tracked: &[String],
    sampler: &SamplerArgs,
    rep_seed: u64,
) -> Result<Vec<ReplicationResult>> {
    let state = GmmState::with_prior_sd(design.ncols(), sampler.prior_sd)?;
    let mut config = sampler.config();
    config.seed = rep_seed;
    let draws = sample(&state, design, pseudo, &config)?;
    let converged = !draws.divergent;
    let summary = summarize(&draws, &[])?;
    Ok(tracked
        .iter()
        .map(|name| match design.column_index(name) {
            Some(j) => {
                let p = &summary.params[j];
                ReplicationResult {
                    estimate: p.mean,
                    se: p.sd,
                    ci_lower: p.q2_5,
                    ci_upper: p.q97_5,
                    converged,
                }
            }
            None => failed_result(),
        })
        .collect())
}

/// One row per (method, tracked coefficient), with non-converged
/// replications excluded and counted. A single-replication campaign
/// degrades to a row with ESE/RMSE left empty.
fn report_or_degenerate(
    method: &str,
    scenario: &str,
    n: usize,
    parameter: &str,
    results: &[ReplicationResult],
    truth: f64,
) -> Result<ReplicationReport> {
    match aggregate(method, scenario, n, parameter, results, truth) {
        Ok(report) => Ok(report),
        Err(Error::TooFewConverged { found: 1, .. }) => {
            let r = results.iter().find(|r| r.converged).expect("one converged result");
            eprintln!(
                "rmst campaign: single replication for {method}/{parameter}; ESE undefined"
            );
            Ok(ReplicationReport {
                method: method.into(),
                scenario: scenario.into(),
                n,
                parameter: parameter.into(),
                replications_used: 1,
                excluded: results.len() - 1,
                bias: r.estimate - truth,
                ase: r.se,
                ese: f64::NAN,
                rmse: f64::NAN,
                coverage: if r.ci_lower <= truth && truth <= r.ci_upper { 100.0 } else { 0.0 },
            })
        }
        Err(e) => Err(e),
    }
}

pub fn run_campaign(args: &CampaignArgs) -> Result<()> {
    if args.replications < 1 {
        return Err(Error::InvalidSpec("--replications must be at least 1".into()));
    }
    let mut spec = model::load_scenario(&args.scenario)?;
    if spec.censor_upper.is_none() {
        let c = calibrate_censoring(
            &spec,
            CALIBRATION_PILOT,
            derive_seed(args.sampler.seed, CALIBRATION_INDEX),
        )?;
        eprintln!("rmst campaign: calibrated censoring bound c* = {c}");
        spec.censor_upper = Some(c);
    }

    let covariate_names: Vec<String> = spec.covariates.iter().map(|c| c.name.clone()).collect();
    let model_spec = model::parse_model_names(&args.model, &covariate_names, args.encode.into())?;

    let truth = true_values(&spec, spec.tau, args.mc_truth)?;
    if let Some(se) = truth.mc_se {
        eprintln!(
            "rmst campaign: true delta = {:.6} (MC-SE {:.2e}, {} draws)",
            truth.delta, se, args.mc_truth
        );
    }

    // tracked coefficients and their true values
    let tracked: Vec<(String, f64)> = match model_spec.encoding {
        InteractionEncoding::Product => vec![("treatment".to_string(), truth.delta)],
        InteractionEncoding::Stratified => {
            let strata = truth.strata.ok_or_else(|| {
                Error::InvalidSpec(
                    "stratified campaign needs per-stratum truth (one Bernoulli effect modifier)"
                        .into(),
                )
            })?;
            let e_name = covariate_names
                .get(model_spec.interactions[0])
                .cloned()
                .unwrap_or_else(|| "E".into());
            vec![
                (e_name.clone(), strata.beta1),
                (format!("treatment:{e_name}=0"), strata.delta_minus),
                (format!("treatment:{e_name}=1"), strata.delta_plus),
            ]
        }
    };
    let tracked_names: Vec<String> = tracked.iter().map(|(n, _)| n.clone()).collect();

    let methods: Vec<&str> = args.methods.split(',').map(str::trim).filter(|m| !m.is_empty()).collect();
    for m in &methods {
        if !matches!(*m, "km" | "gee" | "gmm") {
            return Err(Error::InvalidSpec(format!("unknown method '{m}' (expected km,gee,gmm)")));
        }
    }
    let want_gmm = methods.contains(&"gmm");

    let outcomes: Vec<Result<RepOutcome>> = (0..args.replications)
        .into_par_iter()
        .map(|i| {
            run_replication(
                &spec,
                &model_spec,
                &tracked_names,
                &args.sampler,
                args.n,
                derive_seed(args.sampler.seed, i as u64),
                want_gmm,
            )
        })
        .collect();
    let outcomes: Vec<RepOutcome> = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let truncated = outcomes.iter().filter(|o| o.tau_truncated).count();
    if truncated > 0 {
        eprintln!(
            "rmst campaign: tau fallback engaged in {truncated}/{} replication(s)",
            args.replications
        );
    }

    let mut rows: Vec<ReplicationReport> = Vec::new();
    for method in &methods {
        match *method {
            "km" => {
                let results: Vec<ReplicationResult> = outcomes.iter().map(|o| o.km).collect();
                rows.push(report_or_degenerate(
                    "km_diff", &spec.id, args.n, "treatment", &results, truth.delta,
                )?);
            }
            "gee" | "gmm" => {
                for (t_idx, (name, value)) in tracked.iter().enumerate() {
                    let results: Vec<ReplicationResult> = outcomes
                        .iter()
                        .map(|o| if *method == "gee" { o.gee[t_idx] } else { o.gmm[t_idx] })
                        .collect();
                    rows.push(report_or_degenerate(
                        method, &spec.id, args.n, name, &results, *value,
                    )?);
                }
            }
            _ => unreachable!(),
        }
    }

    for row in &rows {
        if row.excluded > 0 {
            eprintln!(
                "rmst campaign: {}/{} excluded {} non-converged replication(s)",
                row.method, row.parameter, row.excluded
            );
        }
    }

    let mut buf = Vec::new();
    writeln!(buf, "{}", ReplicationReport::csv_header())?;
    for row in &rows {
        writeln!(buf, "{}", row.csv_row())?;
    }
    write_output(args.output.as_deref(), &buf)
}
