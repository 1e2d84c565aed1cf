//! `fit`, `pseudo`, and `tau-scan` subcommands.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use rmst_core::gmm::InteractionEncoding;
use rmst_core::sampler::{sample, summarize, SamplerConfig, RHAT_FLAG};
use rmst_core::survival::{pseudo_obs, resolve_tau, tau_candidates, Algorithm};
use rmst_core::{build_design, gee_fit, Dataset, Error, GmmState, Result};

use crate::model;
use crate::write_output;

/// JSON schema marker for single-fit reports.
pub const JSON_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EncodeArg {
    Product,
    Stratified,
}

impl From<EncodeArg> for InteractionEncoding {
    fn from(value: EncodeArg) -> Self {
        match value {
            EncodeArg::Product => InteractionEncoding::Product,
            EncodeArg::Stratified => InteractionEncoding::Stratified,
        }
    }
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    /// Number of MCMC chains
    #[arg(long, default_value_t = 3)]
    pub chains: usize,
    /// Warmup iterations per chain (adaptation window)
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    /// Retained iterations per chain
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Master seed
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Prior standard deviation for every coefficient
    #[arg(long = "prior-sd", default_value_t = 3.1622776601683795)]
    pub prior_sd: f64,
    /// Target acceptance rate of the random-walk kernel
    #[arg(long = "target-accept", default_value_t = 0.30)]
    pub target_accept: f64,
}

impl SamplerArgs {
    pub fn config(&self) -> SamplerConfig {
        SamplerConfig {
            chains: self.chains,
            warmup: self.warmup,
            samples: self.samples,
            seed: self.seed,
            target_accept: self.target_accept,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input dataset CSV (`time,event,arm,<covariate names...>`)
    #[arg(long)]
    pub input: PathBuf,
    /// Output JSON report (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Requested restriction time in years, subject to the fallback rule
    #[arg(long, default_value_t = 5.0)]
    pub tau: f64,
    /// Comma-separated covariate names; `A*NAME` adds a treatment interaction
    #[arg(long, default_value = "")]
    pub model: String,
    /// Interaction encoding
    #[arg(long, value_enum, default_value_t = EncodeArg::Product)]
    pub encode: EncodeArg,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Tail probability request `PARAM,OP,VALUE` with OP in {ge, le}; repeatable
    #[arg(long = "tail-prob", action = clap::ArgAction::Append)]
    pub tail_prob: Vec<String>,
    /// Also export posterior draws as CSV (`chain,iter,<parameters>`)
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// Worker threads (fallback: RMST_BGMM_WORKERS, then all cores)
    #[arg(long)]
    pub workers: Option<usize>,
}

pub fn run_fit(args: &FitArgs) -> Result<()> {
    let (data, rejected) = Dataset::read_csv_path(&args.input)?;
    if rejected > 0 {
        eprintln!("rmst fit: rejected {rejected} incomplete row(s)");
    }
    data.check_events_for_inference()?;
    let tau_used = resolve_tau(&data, args.tau)?;
    let pseudo = pseudo_obs(&data, tau_used, Algorithm::Fast)?;

    let spec = model::parse_model(&args.model, &data, args.encode.into())?;
    let design = build_design(&data, &spec)?;
    let gee = gee_fit(&design, &pseudo, 0.95)?;

    let state = GmmState::with_prior_sd(design.ncols(), args.sampler.prior_sd)?;
    let config = args.sampler.config();
    let draws = sample(&state, &design, &pseudo, &config)?;
    let tails = model::parse_tail_requests(&args.tail_prob, &design.column_names)?;
    let summary = summarize(&draws, &tails)?;

    let mut warnings: Vec<String> = Vec::new();
    if args.tau > tau_used {
        warnings.push(format!(
            "tau truncated from {} to {tau_used} (shortest arm follow-up)",
            args.tau
        ));
    }
    if draws.divergent {
        let max_rhat = draws.rhat.iter().cloned().fold(f64::NAN, f64::max);
        warnings.push(format!(
            "divergent_chains: max R-hat {max_rhat:.4} exceeds {RHAT_FLAG}"
        ));
    }

    let report = serde_json::json!({
        "schema_version": JSON_SCHEMA_VERSION,
        "command": "fit",
        "input": {
            "path": args.input.display().to_string(),
            "n": data.len(),
            "n_events": data.n_events(),
            "censor_rate": data.censor_rate(),
            "rejected_rows": rejected,
        },
        "tau": { "requested": args.tau, "used": tau_used, "truncated": args.tau > tau_used },
        "model": {
            "parameters": design.column_names,
            "encoding": match args.encode { EncodeArg::Product => "product", EncodeArg::Stratified => "stratified" },
            "intercept_meaning": "baseline RMST, all covariates at reference",
            "prior": { "mean": 0.0, "sd": args.sampler.prior_sd },
        },
        "gee": gee.to_json(),
        "gmm": {
            "posterior_mean": summary.params.iter().map(|p| p.mean).collect::<Vec<_>>(),
            "posterior_sd": summary.params.iter().map(|p| p.sd).collect::<Vec<_>>(),
            "q2_5": summary.params.iter().map(|p| p.q2_5).collect::<Vec<_>>(),
            "median": summary.params.iter().map(|p| p.median).collect::<Vec<_>>(),
            "q97_5": summary.params.iter().map(|p| p.q97_5).collect::<Vec<_>>(),
            "rhat": draws.rhat,
            "ess": draws.ess,
            "acceptance_rate": draws.acceptance_rate,
            "sampler": config,
            "tail_probabilities": summary.tail_probabilities,
        },
        "warnings": warnings,
    });

    if let Some(path) = &args.draws {
        let file = std::fs::File::create(path)?;
        draws.export_csv(file)?;
    }
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_output(args.output.as_deref(), text.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AlgorithmArg {
    Fast,
    Naive,
}

#[derive(Debug, Args)]
pub struct PseudoArgs {
    /// Input dataset CSV
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV with an extra `pseudo` column (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Requested restriction time (fallback rule applied when both arms present)
    #[arg(long, default_value_t = 5.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Fast)]
    pub algorithm: AlgorithmArg,
}

pub fn run_pseudo(args: &PseudoArgs) -> Result<()> {
    let (data, rejected) = Dataset::read_csv_path(&args.input)?;
    if rejected > 0 {
        eprintln!("rmst pseudo: rejected {rejected} incomplete row(s)");
    }
    let tau_used = if data.has_both_arms() { resolve_tau(&data, args.tau)? } else { args.tau };
    let algorithm = match args.algorithm {
        AlgorithmArg::Fast => Algorithm::Fast,
        AlgorithmArg::Naive => Algorithm::Naive,
    };
    let pseudo = pseudo_obs(&data, tau_used, algorithm)?;

    let mut buf = Vec::new();
    {
        let mut header = vec!["time".to_string(), "event".into(), "arm".into()];
        header.extend(data.covariate_names().iter().cloned());
        header.push("pseudo".into());
        writeln!(buf, "{}", header.join(","))?;
        for (rec, value) in data.records().iter().zip(&pseudo.values) {
            let mut row = vec![
                format!("{}", rec.time),
                if rec.event { "1".into() } else { "0".into() },
                format!("{}", rec.arm),
            ];
            row.extend(rec.covariates.iter().map(|z| format!("{z}")));
            row.push(format!("{value}"));
            writeln!(buf, "{}", row.join(","))?;
        }
    }
    eprintln!("rmst pseudo: tau = {tau_used}");
    write_output(args.output.as_deref(), &buf)
}

#[derive(Debug, Args)]
pub struct TauScanArgs {
    /// Input dataset CSV
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Greenwood SE limit for the se-based rule; repeatable
    #[arg(long = "se-limit", action = clap::ArgAction::Append)]
    pub se_limit: Vec<f64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Worker threads (fallback: RMST_BGMM_WORKERS, then all cores)
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Unadjusted estimation at each restriction-time candidate; one GEE row
/// and one pseudo-posterior row per rule.
pub fn run_tau_scan(args: &TauScanArgs) -> Result<()> {
    let (data, rejected) = Dataset::read_csv_path(&args.input)?;
    if rejected > 0 {
        eprintln!("rmst tau-scan: rejected {rejected} incomplete row(s)");
    }
    data.check_events_for_inference()?;
    let limits = if args.se_limit.is_empty() { vec![0.05, 0.075] } else { args.se_limit.clone() };
    let scan = tau_candidates(&data, &limits)?;
    for note in &scan.notes {
        eprintln!("rmst tau-scan: {note}");
    }

    let spec = model::parse_model("", &data, InteractionEncoding::Product)?;
    let design = build_design(&data, &spec)?;
    let treatment = design
        .column_index("treatment")
        .ok_or_else(|| Error::UnknownParameter("treatment".into()))?;

    let mut buf = Vec::new();
    writeln!(buf, "rule,tau,method,estimate,ci_lower,ci_upper,schema_version")?;
    for candidate in &scan.candidates {
        let pseudo = pseudo_obs(&data, candidate.tau, Algorithm::Fast)?;
        let gee = gee_fit(&design, &pseudo, 0.95)?;
        writeln!(
            buf,
            "{},{},gee,{},{},{},{JSON_SCHEMA_VERSION}",
            candidate.rule,
            candidate.tau,
            gee.beta_hat[treatment],
            gee.ci_lower[treatment],
            gee.ci_upper[treatment]
        )?;
        let state = GmmState::with_prior_sd(design.ncols(), args.sampler.prior_sd)?;
        let draws = sample(&state, &design, &pseudo, &args.sampler.config())?;
        if draws.divergent {
            eprintln!("rmst tau-scan: divergent chains at rule {}", candidate.rule);
        }
        let summary = summarize(&draws, &[])?;
        let p = &summary.params[treatment];
        writeln!(
            buf,
            "{},{},gmm,{},{},{},{JSON_SCHEMA_VERSION}",
            candidate.rule, candidate.tau, p.mean, p.q2_5, p.q97_5
        )?;
    }
    write_output(args.output.as_deref(), &buf)
}
