//! MCMC sampling of the pseudo-posterior, convergence diagnostics, and
//! posterior summaries including tail probabilities with Monte Carlo
//! standard errors.
//!
//! The kernel is an adaptive random-walk Metropolis: during warmup the
//! proposal covariance is the running empirical covariance of the chain,
//! globally rescaled toward the target acceptance rate; the kernel is
//! frozen when sampling starts. Chains own independent RNG substreams
//! derived from the seed, so runs are reproducible and worker-count
//! invariant.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::{least_squares_fit, DesignMatrix, GmmState, GmmTarget};
use crate::seed::derive_seed;
use crate::stats::{mean, quantile_sorted, sample_sd};
use crate::survival::PseudoObsVector;

/// R-hat level above which a run is flagged as non-converged.
pub const RHAT_FLAG: f64 = 1.01;

/// A log-density evaluator for the sampler. Implementations may return
/// `-inf` for points outside the support; such proposals are rejected.
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, point: &[f64]) -> f64;
}

/// Chain layout and tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub samples: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub init_scale: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { chains: 3, warmup: 1000, samples: 1000, seed: 0, target_accept: 0.30, init_scale: 0.1 }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::TooFewChains(self.chains));
        }
        if self.samples < 4 {
            return Err(Error::TooFewDraws { needed: 4, found: self.samples });
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "target_accept must be in (0,1), got {}",
                self.target_accept
            )));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "init_scale must be positive, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// Posterior draws with per-chain acceptance rates and per-parameter
/// convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    /// `draws[chain][iteration][parameter]`, post-warmup only.
    pub draws: Vec<Vec<Vec<f64>>>,
    pub parameter_names: Vec<String>,
    pub acceptance_rate: Vec<f64>,
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
    /// Any parameter with R-hat above [`RHAT_FLAG`].
    pub divergent: bool,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_samples(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    fn param_index(&self, name: &str) -> Result<usize> {
        self.parameter_names
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// Per-chain traces of one parameter.
    fn chains_for(&self, param: usize) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|chain| chain.iter().map(|draw| draw[param]).collect())
            .collect()
    }

    /// Pooled draws of one parameter across chains.
    pub fn pooled(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.param_index(name)?;
        Ok(self.draws.iter().flatten().map(|draw| draw[idx]).collect())
    }

    /// Export as CSV with columns `chain,iter,<parameter names>`.
    pub fn export_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend(self.parameter_names.iter().cloned());
        wtr.write_record(&header)?;
        for (c, chain) in self.draws.iter().enumerate() {
            for (i, draw) in chain.iter().enumerate() {
                let mut row = vec![format!("{c}"), format!("{i}")];
                row.extend(draw.iter().map(|v| format!("{v}")));
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Tail direction for posterior threshold probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Geq,
    Leq,
}

/// A requested tail probability: P(parameter ≥ threshold) or ≤.
#[derive(Debug, Clone, PartialEq)]
pub struct TailRequest {
    pub parameter: String,
    pub direction: Direction,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TailProbability {
    pub parameter: String,
    pub direction: Direction,
    pub threshold: f64,
    pub probability: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q2_5: f64,
    pub median: f64,
    pub q97_5: f64,
}

/// Pooled-chain posterior summary plus any requested tail probabilities.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PosteriorSummary {
    pub params: Vec<ParamSummary>,
    pub tail_probabilities: Vec<TailProbability>,
}

/// Monte Carlo standard error of a tail probability estimate given the
/// indicator sequence's effective sample size.
pub fn tail_mc_se(probability: f64, ess: f64) -> f64 {
    if probability <= 0.0 || probability >= 1.0 || ess.is_nan() || ess <= 0.0 {
        return 0.0;
    }
    (probability * (1.0 - probability) / ess).sqrt()
}

/// Sample the GMM pseudo-posterior. Chains start at the least-squares
/// (GEE) estimate jittered by `init_scale·N(0, I)`.
pub fn sample(
    state: &GmmState,
    x: &DesignMatrix,
    y: &PseudoObsVector,
    config: &SamplerConfig,
) -> Result<PosteriorDraws> {
    let init = least_squares_fit(x, y)?;
    let target = GmmTarget::new(state, x, y)?;
    sample_target(&target, init.as_slice(), x.column_names.clone(), config)
}

/// Run the adaptive random-walk Metropolis on an arbitrary target.
pub fn sample_target<T: LogTarget>(
    target: &T,
    init_center: &[f64],
    parameter_names: Vec<String>,
    config: &SamplerConfig,
) -> Result<PosteriorDraws> {
    config.validate()?;
    let q = target.dim();
    if init_center.len() != q {
        return Err(Error::DimensionMismatch { expected: q, found: init_center.len() });
    }
    if parameter_names.len() != q {
        return Err(Error::DimensionMismatch { expected: q, found: parameter_names.len() });
    }

    let chain_results: Vec<Result<(Vec<Vec<f64>>, f64)>> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(target, init_center, config, c as u64))
        .collect();

    let mut draws = Vec::with_capacity(config.chains);
    let mut acceptance_rate = Vec::with_capacity(config.chains);
    for res in chain_results {
        let (chain_draws, accept) = res?;
        draws.push(chain_draws);
        acceptance_rate.push(accept);
    }

    let mut out = PosteriorDraws {
        draws,
        parameter_names,
        acceptance_rate,
        rhat: Vec::new(),
        ess: Vec::new(),
        divergent: false,
    };
    let (rhat, ess) = diagnose(&out)?;
    out.divergent = rhat.iter().any(|&r| r > RHAT_FLAG);
    out.rhat = rhat;
    out.ess = ess;
    Ok(out)
}

const INIT_ATTEMPTS: usize = 100;
/// Warmup iteration after which the empirical covariance drives proposals.
const COV_ADAPT_START: usize = 20;

fn run_chain<T: LogTarget>(
    target: &T,
    center: &[f64],
    config: &SamplerConfig,
    chain_index: u64,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let q = target.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(config.seed, chain_index));

    // jittered initialization
    let mut theta = DVector::zeros(q);
    let mut lp = f64::NEG_INFINITY;
    for _ in 0..INIT_ATTEMPTS {
        for j in 0..q {
            let z: f64 = rng.sample(StandardNormal);
            theta[j] = center[j] + config.init_scale * z;
        }
        lp = target.log_density(theta.as_slice());
        if lp.is_finite() {
            break;
        }
    }
    if !lp.is_finite() {
        return Err(Error::NonFiniteTarget(INIT_ATTEMPTS));
    }

    // running moments of the warmup draws (Welford)
    let mut count = 1.0;
    let mut run_mean = theta.clone();
    let mut run_m2 = DMatrix::<f64>::zeros(q, q);
    // global log step size, adapted toward the target acceptance rate
    let mut log_step = (2.38 / (q as f64).sqrt()).ln();

    let identity = DMatrix::<f64>::identity(q, q);
    let mut chol = identity.clone();

    let propose = |theta: &DVector<f64>,
                       chol: &DMatrix<f64>,
                       step: f64,
                       rng: &mut ChaCha12Rng| {
        let z = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
        theta + chol * z * step
    };

    for t in 0..config.warmup {
        if t >= COV_ADAPT_START {
            let cov = &run_m2 / (count - 1.0);
            let jitter = 1e-10 * cov.trace().max(1e-12) / q as f64;
            let mut m = cov;
            for i in 0..q {
                m[(i, i)] += jitter;
            }
            if let Some(c) = Cholesky::new(m) {
                chol = c.unpack();
            }
        }
        let step = log_step.exp();
        let proposal = propose(&theta, &chol, step, &mut rng);
        let lp_prop = target.log_density(proposal.as_slice());
        let alpha = if lp_prop.is_finite() { (lp_prop - lp).exp().min(1.0) } else { 0.0 };
        if rng.random::<f64>() < alpha {
            theta = proposal;
            lp = lp_prop;
        }
        log_step += (alpha - config.target_accept) / (t as f64 + 1.0).powf(0.7);

        count += 1.0;
        let delta = &theta - &run_mean;
        run_mean += &delta / count;
        let delta2 = &theta - &run_mean;
        run_m2 += delta * delta2.transpose();
    }

    // freeze the kernel for the sampling phase
    let step = log_step.exp();
    let mut draws = Vec::with_capacity(config.samples);
    let mut accepted = 0usize;
    for _ in 0..config.samples {
        let proposal = propose(&theta, &chol, step, &mut rng);
        let lp_prop = target.log_density(proposal.as_slice());
        let accept = lp_prop.is_finite()
            && (lp_prop >= lp || rng.random::<f64>() < (lp_prop - lp).exp());
        if accept {
            theta = proposal;
            lp = lp_prop;
            accepted += 1;
        }
        draws.push(theta.as_slice().to_vec());
    }
    Ok((draws, accepted as f64 / config.samples as f64))
}

/// Split-chain rank-normalized R-hat and bulk effective sample size per
/// parameter.
pub fn diagnose(draws: &PosteriorDraws) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = draws.n_chains();
    if m < 2 {
        return Err(Error::TooFewChains(m));
    }
    let n = draws.n_samples();
    if n < 4 {
        return Err(Error::TooFewDraws { needed: 4, found: n });
    }
    let cap = (m * n) as f64;
    let q = draws.parameter_names.len();
    let mut rhats = Vec::with_capacity(q);
    let mut esss = Vec::with_capacity(q);
    for p in 0..q {
        let chains = draws.chains_for(p);
        let ranked = rank_normalize(&split_chains(&chains));
        rhats.push(potential_scale_reduction(&ranked));
        esss.push(combined_ess(&ranked).min(cap));
    }
    Ok((rhats, esss))
}

/// Split each chain into halves (middle element dropped when odd).
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let half = chains[0].len() / 2;
    let mut out = Vec::with_capacity(chains.len() * 2);
    for chain in chains {
        out.push(chain[..half].to_vec());
        out.push(chain[chain.len() - half..].to_vec());
    }
    out
}

/// Replace values by normal scores of their pooled average ranks,
/// `Φ⁻¹((r − 3/8)/(N + 1/4))`.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = chains.len();
    let n = chains[0].len();
    let total = m * n;
    let mut indexed: Vec<(f64, usize)> = Vec::with_capacity(total);
    for (c, chain) in chains.iter().enumerate() {
        for (i, &v) in chain.iter().enumerate() {
            indexed.push((v, c * n + i));
        }
    }
    indexed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut ranks = vec![0.0; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j < total && indexed[j].0 == indexed[i].0 {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for k in i..j {
            ranks[indexed[k].1] = avg;
        }
        i = j;
    }
    let nf = total as f64;
    (0..m)
        .map(|c| {
            (0..n)
                .map(|i| crate::stats::normal_quantile((ranks[c * n + i] - 0.375) / (nf + 0.25)))
                .collect()
        })
        .collect()
}

fn chain_variances(chains: &[Vec<f64>]) -> (Vec<f64>, f64, f64) {
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let n = chains[0].len() as f64;
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, &m)| c.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / chains.len() as f64;
    let grand = mean(&means);
    let b = n / (chains.len() as f64 - 1.0)
        * means.iter().map(|&m| (m - grand) * (m - grand)).sum::<f64>();
    (means, w, b)
}

/// `sqrt(((n-1)/n·W + B/n) / W)` over already-split chains.
fn potential_scale_reduction(split: &[Vec<f64>]) -> f64 {
    let n = split[0].len() as f64;
    let (_, w, b) = chain_variances(split);
    if w <= 0.0 {
        return f64::NAN;
    }
    let var_hat = (n - 1.0) / n * w + b / n;
    (var_hat / w).sqrt()
}

/// Bulk ESS over already-split (and rank-normalized) chains: combined
/// autocorrelations truncated by Geyer's initial monotone sequence.
fn combined_ess(split: &[Vec<f64>]) -> f64 {
    let m = split.len();
    let n = split[0].len();
    let (means, w, b) = chain_variances(split);
    if w <= 0.0 {
        return f64::NAN;
    }
    let nf = n as f64;
    let var_hat = (nf - 1.0) / nf * w + b / nf;

    // mean over chains of biased (1/n) autocovariances per lag
    let acov = |lag: usize| -> f64 {
        split
            .iter()
            .zip(&means)
            .map(|(c, &cm)| {
                (0..n - lag).map(|i| (c[i] - cm) * (c[i + lag] - cm)).sum::<f64>() / nf
            })
            .sum::<f64>()
            / m as f64
    };

    let mut tau = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let rho0 = 1.0 - (w - acov(lag)) / var_hat;
        let rho1 = 1.0 - (w - acov(lag + 1)) / var_hat;
        let mut pair = rho0 + rho1;
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau_hat = (2.0 * tau - 1.0).max(1e-12);
    (m * n) as f64 / tau_hat
}

/// Pooled-chain summary (mean, sd, equal-tailed quantiles) and tail
/// probabilities with Monte Carlo standard errors.
pub fn summarize(draws: &PosteriorDraws, thresholds: &[TailRequest]) -> Result<PosteriorSummary> {
    if draws.n_samples() == 0 || draws.n_chains() == 0 {
        return Err(Error::TooFewDraws { needed: 1, found: 0 });
    }
    let mut params = Vec::with_capacity(draws.parameter_names.len());
    for (idx, name) in draws.parameter_names.iter().enumerate() {
        let pooled: Vec<f64> = draws.draws.iter().flatten().map(|d| d[idx]).collect();
        let mut sorted = pooled.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        params.push(ParamSummary {
            name: name.clone(),
            mean: mean(&pooled),
            sd: sample_sd(&pooled),
            q2_5: quantile_sorted(&sorted, 0.025),
            median: quantile_sorted(&sorted, 0.5),
            q97_5: quantile_sorted(&sorted, 0.975),
        });
    }

    let mut tails = Vec::with_capacity(thresholds.len());
    for req in thresholds {
        let idx = draws.param_index(&req.parameter)?;
        let indicator: Vec<Vec<f64>> = draws
            .draws
            .iter()
            .map(|chain| {
                chain
                    .iter()
                    .map(|d| {
                        let hit = match req.direction {
                            Direction::Geq => d[idx] >= req.threshold,
                            Direction::Leq => d[idx] <= req.threshold,
                        };
                        if hit {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let total: f64 = indicator.iter().flatten().sum();
        let probability = total / (draws.n_chains() * draws.n_samples()) as f64;
        let mc_se = if probability <= 0.0 || probability >= 1.0 {
            0.0
        } else {
            let ess = combined_ess(&rank_normalize(&split_chains(&indicator)))
                .min((draws.n_chains() * draws.n_samples()) as f64);
            tail_mc_se(probability, ess)
        };
        tails.push(TailProbability {
            parameter: req.parameter.clone(),
            direction: req.direction,
            threshold: req.threshold,
            probability,
            mc_se,
        });
    }
    Ok(PosteriorSummary { params, tail_probabilities: tails })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Standard multivariate normal with diagonal covariance.
    pub(crate) struct DiagGaussian {
        pub sd: Vec<f64>,
    }

    impl LogTarget for DiagGaussian {
        fn dim(&self) -> usize {
            self.sd.len()
        }

        fn log_density(&self, point: &[f64]) -> f64 {
            point
                .iter()
                .zip(&self.sd)
                .map(|(&x, &s)| -0.5 * (x / s) * (x / s))
                .sum()
        }
    }

    fn gaussian_chains(rhat_shift: f64) -> PosteriorDraws {
        // deterministic pseudo-gaussian chains via a fixed generator
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let chains: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|c| {
                (0..500)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        vec![z + if c == 0 { rhat_shift } else { 0.0 }]
                    })
                    .collect()
            })
            .collect();
        PosteriorDraws {
            draws: chains,
            parameter_names: vec!["x".into()],
            acceptance_rate: vec![1.0; 4],
            rhat: vec![],
            ess: vec![],
            divergent: false,
        }
    }

    #[test]
    fn rhat_near_one_for_iid_chains() {
        let draws = gaussian_chains(0.0);
        let (rhat, ess) = diagnose(&draws).unwrap();
        assert!(rhat[0] > 0.99 && rhat[0] < 1.01, "rhat = {}", rhat[0]);
        // independent draws: ESS close to the draw count
        assert!(ess[0] > 1000.0, "ess = {}", ess[0]);
        assert!(ess[0] <= 2000.0);
    }

    #[test]
    fn rhat_detects_shifted_chain() {
        let draws = gaussian_chains(10.0);
        let (rhat, _) = diagnose(&draws).unwrap();
        assert!(rhat[0] > 1.2, "rhat = {}", rhat[0]);
    }

    #[test]
    fn diagnose_requires_two_chains_and_four_draws() {
        let mut draws = gaussian_chains(0.0);
        draws.draws.truncate(1);
        assert!(matches!(diagnose(&draws), Err(Error::TooFewChains(1))));
        let mut draws = gaussian_chains(0.0);
        for c in &mut draws.draws {
            c.truncate(3);
        }
        assert!(matches!(diagnose(&draws), Err(Error::TooFewDraws { .. })));
    }

    #[test]
    fn summarize_counts_tail_probabilities() {
        let draws = PosteriorDraws {
            draws: vec![vec![vec![0.1], vec![0.2]], vec![vec![0.3], vec![0.4]]],
            parameter_names: vec!["delta".into()],
            acceptance_rate: vec![1.0, 1.0],
            rhat: vec![1.0],
            ess: vec![4.0],
            divergent: false,
        };
        let req = TailRequest { parameter: "delta".into(), direction: Direction::Geq, threshold: 0.25 };
        let summary = summarize(&draws, &[req]).unwrap();
        assert_eq!(summary.tail_probabilities[0].probability, 0.5);
        // all draws above → degenerate indicator
        let req = TailRequest { parameter: "delta".into(), direction: Direction::Geq, threshold: 0.0 };
        let summary = summarize(&draws, &[req]).unwrap();
        assert_eq!(summary.tail_probabilities[0].probability, 1.0);
        assert_eq!(summary.tail_probabilities[0].mc_se, 0.0);
    }

    #[test]
    fn summarize_unknown_parameter_errors() {
        let draws = gaussian_chains(0.0);
        let req = TailRequest { parameter: "nope".into(), direction: Direction::Geq, threshold: 0.0 };
        assert!(matches!(summarize(&draws, &[req]), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn mc_se_formula_reproduces_reported_scale() {
        // p = 0.973 with indicator ESS 2918 gives MC-SE 0.003
        let se = tail_mc_se(0.973, 2918.0);
        assert!((se - 0.003).abs() < 2e-4, "se = {se}");
    }

    #[test]
    fn sampler_is_deterministic() {
        let target = DiagGaussian { sd: vec![1.0, 2.0] };
        let config = SamplerConfig { warmup: 200, samples: 100, seed: 7, ..Default::default() };
        let a = sample_target(&target, &[0.0, 0.0], vec!["a".into(), "b".into()], &config).unwrap();
        let b = sample_target(&target, &[0.0, 0.0], vec!["a".into(), "b".into()], &config).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.acceptance_rate, b.acceptance_rate);
        assert_eq!(a.rhat, b.rhat);
    }

    #[test]
    fn standard_gaussian_calibration_at_defaults() {
        let target = DiagGaussian { sd: vec![1.0] };
        let config = SamplerConfig { seed: 11, ..Default::default() };
        let out = sample_target(&target, &[0.0], vec!["x".into()], &config).unwrap();
        let summary = summarize(&out, &[]).unwrap();
        let p = &summary.params[0];
        let mc_se = p.sd / out.ess[0].sqrt();
        assert!(p.mean.abs() < 3.0 * mc_se, "mean = {}, mc-se = {mc_se}", p.mean);
        assert!((p.sd - 1.0).abs() < 0.05, "sd = {}", p.sd);
        assert!(out.rhat[0] < 1.01, "rhat = {}", out.rhat[0]);
        for rate in &out.acceptance_rate {
            assert!(*rate > 0.15 && *rate < 0.50, "acceptance = {rate}");
        }
    }

    #[test]
    fn nonfinite_target_reported() {
        struct Hole;
        impl LogTarget for Hole {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, _: &[f64]) -> f64 {
                f64::NEG_INFINITY
            }
        }
        let config = SamplerConfig { warmup: 10, samples: 10, ..Default::default() };
        let err = sample_target(&Hole, &[0.0], vec!["x".into()], &config).unwrap_err();
        assert!(matches!(err, Error::NonFiniteTarget(_)));
    }

    #[test]
    fn ess_capped_by_draw_count() {
        let draws = gaussian_chains(0.0);
        let (_, ess) = diagnose(&draws).unwrap();
        assert!(ess[0] <= (draws.n_chains() * draws.n_samples()) as f64);
    }

    #[test]
    fn export_csv_layout() {
        let draws = PosteriorDraws {
            draws: vec![vec![vec![0.5, 1.5]], vec![vec![-0.5, 2.5]]],
            parameter_names: vec!["intercept".into(), "treatment".into()],
            acceptance_rate: vec![1.0, 1.0],
            rhat: vec![1.0, 1.0],
            ess: vec![2.0, 2.0],
            divergent: false,
        };
        let mut buf = Vec::new();
        draws.export_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "chain,iter,intercept,treatment\n0,0,0.5,1.5\n1,0,-0.5,2.5\n");
    }
}
