//! Scenario-driven survival data generation, censoring calibration, and
//! true-parameter computation.
//!
//! Event times follow `S(t) = exp(-(λt)^{1/σ})` with arm-specific shape and
//! a log-linear rate, `λ_i = exp(base_log_rate[arm] + Σ coef·Z + coef·A·E)`.
//! Censoring is uniform on `(0, c*)` capped at an administrative horizon,
//! with `c*` calibrated by bisection against a target censoring rate.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::specfun::{weibull_rmst, WeibullParams};

/// Pilot size used when a spec's censoring bound is calibrated implicitly.
const IMPLICIT_PILOT: usize = 100_000;
/// Fixed seed for implicit calibration and true-value Monte Carlo.
const INTERNAL_SEED: u64 = 0x5eed_cafe;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum CovariateDist {
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
    Uniform { low: f64, high: f64 },
}

impl CovariateDist {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CovariateDist::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            CovariateDist::Bernoulli { p } => (0.0..=1.0).contains(&p),
            CovariateDist::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid covariate distribution {self:?}")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            CovariateDist::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            CovariateDist::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            CovariateDist::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateRole {
    Prognostic,
    Nuisance,
    EffectModifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub dist: CovariateDist,
    pub role: CovariateRole,
    /// Additive term on log λ per unit of the covariate (0 for nuisance).
    #[serde(default)]
    pub log_hr: f64,
}

/// Treatment-by-covariate effect modification: an extra `log_hr·A·Z` term
/// on log λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub covariate: String,
    pub log_hr: f64,
}

fn default_admin_censor() -> f64 {
    8.0
}

fn default_target_censor() -> f64 {
    0.30
}

fn default_tau() -> f64 {
    5.0
}

fn default_id() -> String {
    "custom".into()
}

/// Full description of one simulation scenario; serializable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default = "default_id")]
    pub id: String,
    /// Weibull shape σ per arm (control, experimental).
    pub shape_by_arm: (f64, f64),
    /// Intercept of log λ per arm; treatment main effects fold in here.
    pub base_log_rate_by_arm: (f64, f64),
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub interaction: Option<InteractionSpec>,
    #[serde(default = "default_admin_censor")]
    pub admin_censor_time: f64,
    #[serde(default = "default_target_censor")]
    pub target_censor_rate: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Resolved uniform censoring bound; when absent it is calibrated (and
    /// cached) on first use. `f64::INFINITY` means administrative
    /// censoring only.
    #[serde(default)]
    pub censor_upper: Option<f64>,
}

impl ScenarioSpec {
    /// Built-in scenarios. `"1"` is the proportional-hazards null; `"1alt"`
    /// its alternative with rate ratio 0.6; `"2"`/`"3"` early and delayed
    /// effects via arm-specific shapes; `"4"`/`"5"` add prognostic and
    /// nuisance covariates (coefficients are this harness's defaults, and
    /// the reported truth is computed, not assumed); `"6"` crosses the
    /// curves through a biomarker-by-treatment interaction.
    pub fn builtin(id: &str) -> Result<ScenarioSpec> {
        let base = ScenarioSpec {
            id: id.to_string(),
            shape_by_arm: (0.8, 0.8),
            base_log_rate_by_arm: (-1.2, -1.2),
            covariates: Vec::new(),
            interaction: None,
            admin_censor_time: default_admin_censor(),
            target_censor_rate: default_target_censor(),
            tau: default_tau(),
            censor_upper: None,
        };
        let nuisance = |name: &str, dist: CovariateDist| CovariateSpec {
            name: name.into(),
            dist,
            role: CovariateRole::Nuisance,
            log_hr: 0.0,
        };
        let spec = match id {
            "1" => base,
            "1alt" => ScenarioSpec {
                base_log_rate_by_arm: (-1.2, -1.2 + 0.6f64.ln()),
                ..base
            },
            "2" => ScenarioSpec {
                shape_by_arm: (1.33, 0.67),
                base_log_rate_by_arm: (0.20f64.ln(), 0.18f64.ln()),
                ..base
            },
            "3" => ScenarioSpec {
                shape_by_arm: (0.60, 0.80),
                base_log_rate_by_arm: (0.28f64.ln(), 0.18f64.ln()),
                ..base
            },
            "4" => ScenarioSpec {
                shape_by_arm: (1.33, 0.67),
                base_log_rate_by_arm: (0.20f64.ln(), 0.18f64.ln()),
                covariates: vec![
                    CovariateSpec {
                        name: "Z1".into(),
                        dist: CovariateDist::Uniform { low: 0.0, high: 2.0 },
                        role: CovariateRole::Prognostic,
                        log_hr: 0.5,
                    },
                    nuisance("X1", CovariateDist::Normal { mean: 0.0, sd: 1.0 }),
                    nuisance("X2", CovariateDist::Bernoulli { p: 0.5 }),
                    nuisance("X3", CovariateDist::Uniform { low: 0.0, high: 2.0 }),
                ],
                ..base
            },
            "5" => ScenarioSpec {
                shape_by_arm: (0.60, 0.80),
                base_log_rate_by_arm: (0.28f64.ln(), 0.18f64.ln()),
                covariates: vec![
                    CovariateSpec {
                        name: "Z1".into(),
                        dist: CovariateDist::Normal { mean: 0.0, sd: 1.0 },
                        role: CovariateRole::Prognostic,
                        log_hr: 0.3,
                    },
                    CovariateSpec {
                        name: "Z2".into(),
                        dist: CovariateDist::Bernoulli { p: 0.5 },
                        role: CovariateRole::Prognostic,
                        log_hr: -0.4,
                    },
                    nuisance("X1", CovariateDist::Normal { mean: 0.0, sd: 1.0 }),
                    nuisance("X2", CovariateDist::Bernoulli { p: 0.5 }),
                    nuisance("X3", CovariateDist::Uniform { low: 0.0, high: 2.0 }),
                ],
                ..base
            },
            "6" => ScenarioSpec {
                base_log_rate_by_arm: (-1.2, -1.2 + 1.7f64.ln()),
                covariates: vec![CovariateSpec {
                    name: "E".into(),
                    dist: CovariateDist::Bernoulli { p: 0.5 },
                    role: CovariateRole::EffectModifier,
                    log_hr: 0.5f64.ln(),
                }],
                interaction: Some(InteractionSpec { covariate: "E".into(), log_hr: 0.3f64.ln() }),
                ..base
            },
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown builtin scenario '{other}' (expected 1, 1alt, 2..6)"
                )))
            }
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (s0, s1) = self.shape_by_arm;
        if !(s0 > 0.0 && s0.is_finite() && s1 > 0.0 && s1.is_finite()) {
            return Err(Error::InvalidSpec(format!("shapes must be positive, got {s0}, {s1}")));
        }
        let (b0, b1) = self.base_log_rate_by_arm;
        if !(b0.is_finite() && b1.is_finite()) {
            return Err(Error::InvalidSpec("base log rates must be finite".into()));
        }
        if !(self.admin_censor_time > 0.0 && self.admin_censor_time.is_finite()) {
            return Err(Error::InvalidSpec("admin_censor_time must be positive".into()));
        }
        if !(self.target_censor_rate >= 0.0 && self.target_censor_rate < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "target_censor_rate must be in [0,1), got {}",
                self.target_censor_rate
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidSpec("tau must be positive".into()));
        }
        let mut names = std::collections::HashSet::new();
        for cov in &self.covariates {
            cov.dist.validate()?;
            if !cov.log_hr.is_finite() {
                return Err(Error::InvalidSpec(format!("non-finite log_hr for {}", cov.name)));
            }
            if cov.name.is_empty() || !names.insert(cov.name.clone()) {
                return Err(Error::InvalidSpec(format!("covariate name '{}' duplicated or empty", cov.name)));
            }
        }
        if let Some(inter) = &self.interaction {
            if !inter.log_hr.is_finite() {
                return Err(Error::InvalidSpec("non-finite interaction log_hr".into()));
            }
            match self.covariates.iter().find(|c| c.name == inter.covariate) {
                Some(c) => {
                    if !matches!(c.dist, CovariateDist::Bernoulli { .. }) {
                        return Err(Error::InvalidSpec(
                            "interaction covariate must be Bernoulli".into(),
                        ));
                    }
                }
                None => {
                    return Err(Error::InvalidSpec(format!(
                        "interaction covariate '{}' not in covariates",
                        inter.covariate
                    )))
                }
            }
        }
        if let Some(c) = self.censor_upper {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::InvalidSpec(format!("censor_upper must be positive, got {c}")));
            }
        }
        Ok(())
    }

    fn interaction_index(&self) -> Option<usize> {
        self.interaction
            .as_ref()
            .and_then(|i| self.covariates.iter().position(|c| c.name == i.covariate))
    }

    /// log λ for one subject.
    fn log_rate(&self, arm: u8, covariates: &[f64]) -> f64 {
        let mut lr = if arm == 0 { self.base_log_rate_by_arm.0 } else { self.base_log_rate_by_arm.1 };
        for (cov, &z) in self.covariates.iter().zip(covariates) {
            lr += cov.log_hr * z;
        }
        if arm == 1 {
            if let (Some(inter), Some(idx)) = (&self.interaction, self.interaction_index()) {
                lr += inter.log_hr * covariates[idx];
            }
        }
        lr
    }

    fn shape(&self, arm: u8) -> f64 {
        if arm == 0 {
            self.shape_by_arm.0
        } else {
            self.shape_by_arm.1
        }
    }
}

/// True restricted-mean contrasts implied by a scenario at `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StratumTruth {
    /// dRMST for the `E = 0` stratum.
    pub delta_minus: f64,
    /// dRMST for the `E = 1` stratum.
    pub delta_plus: f64,
    /// Control-arm RMST difference between the strata.
    pub beta1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrueValues {
    /// Marginal dRMST (experimental minus control).
    pub delta: f64,
    /// Monte Carlo standard error when the value is integrated over
    /// covariates; `None` when exact.
    pub mc_se: Option<f64>,
    pub strata: Option<StratumTruth>,
}

/// Draw one event time `T = E^σ / λ` with `E ~ Exp(1)` (inverse transform
/// of the Weibull survival function).
fn draw_event_time<R: Rng>(rng: &mut R, sigma: f64, lambda: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e.powf(sigma) / lambda
}

/// Arm labels under 1:1 block randomization, shuffled.
fn randomized_arms<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    let mut arms: Vec<u8> = (0..n).map(|i| (i % 2 == 1) as u8).collect();
    arms.shuffle(rng);
    arms
}

/// Generate one scenario dataset. Deterministic given `(spec, n, seed)`.
pub fn generate(spec: &ScenarioSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::TooFewRecords { needed: 2, found: n });
    }
    let c_star = match spec.censor_upper {
        Some(c) => c,
        None => cached_censor_upper(spec)?,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let arms = randomized_arms(&mut rng, n);
    let mut records = Vec::with_capacity(n);
    for &arm in &arms {
        let covariates: Vec<f64> =
            spec.covariates.iter().map(|c| c.dist.sample(&mut rng)).collect();
        let lambda = spec.log_rate(arm, &covariates).exp();
        let event_time = draw_event_time(&mut rng, spec.shape(arm), lambda);
        let censor_time = if c_star.is_finite() {
            (rng.random::<f64>() * c_star).min(spec.admin_censor_time)
        } else {
            spec.admin_censor_time
        };
        let event = event_time <= censor_time;
        let time = if event { event_time } else { censor_time };
        records.push(SurvivalRecord::new(time, event, arm, covariates)?);
    }
    Dataset::new(records, spec.covariates.iter().map(|c| c.name.clone()).collect())
}

/// Overall censoring probability at uniform bound `c`, given pilot event
/// times: an event time beyond the administrative horizon is always
/// censored, otherwise censored with probability `min(T/c, 1)`.
fn censor_rate_at(c: f64, pilot: &[f64], admin: f64) -> f64 {
    let total: f64 = pilot
        .iter()
        .map(|&t| if t > admin { 1.0 } else { (t / c).min(1.0) })
        .sum();
    total / pilot.len() as f64
}

/// Calibrate the uniform censoring bound `c*` so that the overall censoring
/// rate (uniform capped at the administrative horizon) meets
/// `spec.target_censor_rate` within ±1% on a pilot sample. Returns
/// `f64::INFINITY` when administrative censoring alone already reaches the
/// target.
pub fn calibrate_censoring(spec: &ScenarioSpec, n_pilot: usize, seed: u64) -> Result<f64> {
    spec.validate()?;
    if n_pilot < 1000 {
        return Err(Error::InvalidSpec(format!("pilot size too small: {n_pilot}")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let arms = randomized_arms(&mut rng, n_pilot);
    let pilot: Vec<f64> = arms
        .iter()
        .map(|&arm| {
            let covariates: Vec<f64> =
                spec.covariates.iter().map(|c| c.dist.sample(&mut rng)).collect();
            let lambda = spec.log_rate(arm, &covariates).exp();
            draw_event_time(&mut rng, spec.shape(arm), lambda)
        })
        .collect();

    let admin = spec.admin_censor_time;
    let target = spec.target_censor_rate;
    let floor = pilot.iter().filter(|&&t| t > admin).count() as f64 / n_pilot as f64;
    if target <= floor {
        if floor - target <= 0.01 {
            return Ok(f64::INFINITY);
        }
        return Err(Error::Unachievable(format!(
            "administrative censoring alone yields rate {floor:.4} > target {target:.4}"
        )));
    }

    let mut lo = 1e-9;
    let mut hi = admin;
    while censor_rate_at(hi, &pilot, admin) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(f64::INFINITY);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let rate = censor_rate_at(mid, &pilot, admin);
        // larger bound, lower rate
        debug_assert!(censor_rate_at(lo, &pilot, admin) >= rate);
        if rate > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-12 * hi {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let achieved = censor_rate_at(c, &pilot, admin);
    if (achieved - target).abs() > 0.01 {
        return Err(Error::Numerical(format!(
            "censoring calibration landed at {achieved:.4} for target {target:.4}"
        )));
    }
    Ok(c)
}

/// Per-process cache of calibrated bounds keyed by the spec JSON.
fn cached_censor_upper(spec: &ScenarioSpec) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<String, f64>>> = OnceLock::new();
    let key = serde_json::to_string(spec)?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().unwrap().get(&key) {
        return Ok(c);
    }
    let c = calibrate_censoring(spec, IMPLICIT_PILOT, derive_seed(INTERNAL_SEED, 0))?;
    cache.lock().unwrap().insert(key, c);
    Ok(c)
}

fn rmst_at(sigma: f64, log_rate: f64, tau: f64) -> Result<f64> {
    weibull_rmst(WeibullParams::new(sigma, log_rate.exp())?, tau)
}

/// True restricted-mean contrasts at `tau`.
///
/// Covariate-free arms are exact. With an effect modifier as the only
/// survival-related covariate, the per-stratum values and the marginal
/// difference (a mixture across strata) are exact as well. Any other
/// prognostic structure is integrated over the covariate distributions by
/// Monte Carlo with `mc_size` draws and a reported standard error.
pub fn true_values(spec: &ScenarioSpec, tau: f64, mc_size: usize) -> Result<TrueValues> {
    true_values_seeded(spec, tau, mc_size, INTERNAL_SEED)
}

/// [`true_values`] with an explicit Monte Carlo seed.
pub fn true_values_seeded(
    spec: &ScenarioSpec,
    tau: f64,
    mc_size: usize,
    seed: u64,
) -> Result<TrueValues> {
    spec.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::DomainError(format!("true_values: tau must be > 0, got {tau}")));
    }
    let survival_related: Vec<usize> = spec
        .covariates
        .iter()
        .enumerate()
        .filter(|(i, c)| c.log_hr != 0.0 || spec.interaction_index() == Some(*i))
        .map(|(i, _)| i)
        .collect();

    let (s0, s1) = spec.shape_by_arm;
    let (b0, b1) = spec.base_log_rate_by_arm;

    if survival_related.is_empty() {
        let delta = rmst_at(s1, b1, tau)? - rmst_at(s0, b0, tau)?;
        return Ok(TrueValues { delta, mc_se: None, strata: None });
    }

    // exact stratified case: one Bernoulli effect modifier drives everything
    if let (Some(inter), Some(e_idx)) = (&spec.interaction, spec.interaction_index()) {
        if survival_related == vec![e_idx] {
            let e_cov = &spec.covariates[e_idx];
            let p = match e_cov.dist {
                CovariateDist::Bernoulli { p } => p,
                _ => unreachable!("validated as Bernoulli"),
            };
            let r00 = rmst_at(s0, b0, tau)?; // control, E=0
            let r01 = rmst_at(s0, b0 + e_cov.log_hr, tau)?; // control, E=1
            let r10 = rmst_at(s1, b1, tau)?; // treated, E=0
            let r11 = rmst_at(s1, b1 + e_cov.log_hr + inter.log_hr, tau)?; // treated, E=1
            let strata = StratumTruth {
                delta_minus: r10 - r00,
                delta_plus: r11 - r01,
                beta1: r01 - r00,
            };
            let delta = (1.0 - p) * strata.delta_minus + p * strata.delta_plus;
            return Ok(TrueValues { delta, mc_se: None, strata: Some(strata) });
        }
    }

    if mc_size < 1000 {
        return Err(Error::InvalidSpec(format!("mc_size too small: {mc_size}")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..mc_size {
        let covariates: Vec<f64> =
            spec.covariates.iter().map(|c| c.dist.sample(&mut rng)).collect();
        let d = rmst_at(s1, spec.log_rate(1, &covariates), tau)?
            - rmst_at(s0, spec.log_rate(0, &covariates), tau)?;
        sum += d;
        sum_sq += d * d;
    }
    let m = mc_size as f64;
    let delta = sum / m;
    let var = (sum_sq - m * delta * delta) / (m - 1.0);
    Ok(TrueValues { delta, mc_se: Some((var / m).sqrt()), strata: None })
}
