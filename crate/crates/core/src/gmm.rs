//! Design-matrix construction, generalized-method-of-moments machinery
//! (score, moment covariance, objective), and the pseudo-log-likelihood
//! targeted by the sampler.
//!
//! The mean model is linear with identity link,
//! `μ_i = β₀ + δA_i + β₁Z_{i1} + …`, so the per-subject moment is
//! `u_i(β) = x_i(y_i − x_iᵀβ)` and the system is exactly identified: the
//! objective `Q_n = U_nᵀ Σ_n⁻¹ U_n` is zero at the least-squares solution.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::survival::PseudoObsVector;

/// How treatment-by-covariate interactions are encoded.
///
/// `Product` uses the usual `(1, A, E, A·E)` columns. `Stratified`
/// re-expresses the same span as `(1, E, A·1_{E=0}, A·1_{E=1})`, so the two
/// treatment columns estimate the within-stratum treatment effects
/// directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionEncoding {
    Product,
    Stratified,
}

/// Model specification: which dataset covariates enter the linear predictor
/// and how interactions are encoded. Only the identity link is supported;
/// the treatment coefficient is then the adjusted restricted-mean
/// difference.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub include_treatment: bool,
    pub covariate_indices: Vec<usize>,
    /// Covariate indices interacted with treatment; each must also appear
    /// in `covariate_indices`.
    pub interactions: Vec<usize>,
    pub encoding: InteractionEncoding,
}

impl RegressionSpec {
    pub fn treatment_only() -> Self {
        Self {
            include_treatment: true,
            covariate_indices: Vec::new(),
            interactions: Vec::new(),
            encoding: InteractionEncoding::Product,
        }
    }

    pub fn with_covariates(indices: &[usize]) -> Self {
        Self { covariate_indices: indices.to_vec(), ..Self::treatment_only() }
    }

    /// Number of design columns this specification produces.
    pub fn num_columns(&self) -> usize {
        match self.encoding {
            InteractionEncoding::Product => {
                1 + usize::from(self.include_treatment)
                    + self.covariate_indices.len()
                    + self.interactions.len()
            }
            // treatment column replaced by the two stratum columns
            InteractionEncoding::Stratified => 1 + self.covariate_indices.len() + 2,
        }
    }
}

/// Design matrix with an all-ones intercept first, full column rank
/// guaranteed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub column_names: Vec<String>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// Parameter state for the pseudo-posterior: current coefficients plus the
/// independent normal prior on each.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub beta: DVector<f64>,
    pub prior_mean: DVector<f64>,
    pub prior_var: DVector<f64>,
}

impl GmmState {
    pub fn new(beta: DVector<f64>, prior_mean: DVector<f64>, prior_var: DVector<f64>) -> Result<Self> {
        if beta.len() != prior_mean.len() || beta.len() != prior_var.len() {
            return Err(Error::DimensionMismatch { expected: beta.len(), found: prior_mean.len() });
        }
        if prior_var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidSpec("prior variances must be positive".into()));
        }
        Ok(Self { beta, prior_mean, prior_var })
    }

    /// Weakly informative default: N(0, σ² = 10) on every coefficient.
    pub fn with_default_prior(q: usize) -> Self {
        Self::with_prior_sd(q, 10.0f64.sqrt()).unwrap()
    }

    pub fn with_prior_sd(q: usize, prior_sd: f64) -> Result<Self> {
        if !(prior_sd > 0.0 && prior_sd.is_finite()) {
            return Err(Error::InvalidSpec(format!("prior sd must be positive, got {prior_sd}")));
        }
        Ok(Self {
            beta: DVector::zeros(q),
            prior_mean: DVector::zeros(q),
            prior_var: DVector::from_element(q, prior_sd * prior_sd),
        })
    }
}

fn covariate_name(data: &Dataset, idx: usize) -> String {
    data.covariate_names().get(idx).cloned().unwrap_or_else(|| format!("z{idx}"))
}

/// Assemble the design matrix for `spec`: intercept first, then treatment
/// (if included), covariates, interaction columns. Under the stratified
/// encoding an interaction on a binary covariate `E` yields the columns
/// `(1, E, A·1_{E=0}, A·1_{E=1})` in place of `(1, A, E, A·E)`.
pub fn build_design(data: &Dataset, spec: &RegressionSpec) -> Result<DesignMatrix> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = data.covariate_names().len().max(
        data.records().first().map_or(0, |r| r.covariates.len()),
    );
    let mut seen = std::collections::HashSet::new();
    for &idx in &spec.covariate_indices {
        if idx >= p {
            return Err(Error::InvalidSpec(format!("covariate index {idx} out of range (p = {p})")));
        }
        if !seen.insert(idx) {
            return Err(Error::InvalidSpec(format!("duplicate covariate index {idx}")));
        }
    }
    for &idx in &spec.interactions {
        if !spec.covariate_indices.contains(&idx) {
            return Err(Error::InvalidSpec(format!(
                "interaction covariate {idx} must also enter as a main effect"
            )));
        }
    }

    let n = data.len();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::with_capacity(spec.num_columns());
    columns.push(("intercept".into(), vec![1.0; n]));

    let arm: Vec<f64> = data.records().iter().map(|r| f64::from(r.arm)).collect();
    let cov = |idx: usize| -> Vec<f64> {
        data.records().iter().map(|r| r.covariates[idx]).collect()
    };

    match spec.encoding {
        InteractionEncoding::Product => {
            if spec.include_treatment {
                columns.push(("treatment".into(), arm.clone()));
            }
            for &idx in &spec.covariate_indices {
                columns.push((covariate_name(data, idx), cov(idx)));
            }
            for &idx in &spec.interactions {
                let z = cov(idx);
                let col = arm.iter().zip(&z).map(|(a, z)| a * z).collect();
                columns.push((format!("treatment:{}", covariate_name(data, idx)), col));
            }
        }
        InteractionEncoding::Stratified => {
            if spec.interactions.len() != 1 {
                return Err(Error::InvalidSpec(
                    "stratified encoding requires exactly one treatment interaction".into(),
                ));
            }
            if !spec.include_treatment {
                return Err(Error::InvalidSpec(
                    "stratified encoding requires the treatment term".into(),
                ));
            }
            let e_idx = spec.interactions[0];
            let e = cov(e_idx);
            if e.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidSpec(
                    "stratified encoding requires a binary (0/1) interaction covariate".into(),
                ));
            }
            for &idx in &spec.covariate_indices {
                columns.push((covariate_name(data, idx), cov(idx)));
            }
            let name = covariate_name(data, e_idx);
            let low: Vec<f64> = arm.iter().zip(&e).map(|(a, e)| a * (1.0 - e)).collect();
            let high: Vec<f64> = arm.iter().zip(&e).map(|(a, e)| a * e).collect();
            columns.push((format!("treatment:{name}=0"), low));
            columns.push((format!("treatment:{name}=1"), high));
        }
    }

    let q = columns.len();
    let mut matrix = DMatrix::zeros(n, q);
    let mut column_names = Vec::with_capacity(q);
    for (j, (name, col)) in columns.into_iter().enumerate() {
        matrix.set_column(j, &DVector::from_vec(col));
        column_names.push(name);
    }
    linalg::check_full_rank(&matrix)?;
    Ok(DesignMatrix { matrix, column_names })
}

fn check_dims(beta: &DVector<f64>, x: &DesignMatrix, y: &PseudoObsVector) -> Result<()> {
    if beta.len() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), found: beta.len() });
    }
    if y.values.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.values.len() });
    }
    Ok(())
}

/// Averaged score and moment covariance in one pass:
/// `U_n = (1/n) Σ x_i(y_i − x_iᵀβ)` and
/// `Σ_n = (1/n²) Σ u_i u_iᵀ − (1/n) U_n U_nᵀ`.
fn moment_stats(x: &DMatrix<f64>, y: &[f64], beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let (n, q) = x.shape();
    let nf = n as f64;
    let mut resid = y.to_vec();
    for j in 0..q {
        let col = x.column(j);
        let bj = beta[j];
        for i in 0..n {
            resid[i] -= col[i] * bj;
        }
    }
    let mut u = DVector::zeros(q);
    for j in 0..q {
        let col = x.column(j);
        let mut acc = 0.0;
        for i in 0..n {
            acc += col[i] * resid[i];
        }
        u[j] = acc / nf;
    }
    let mut sigma = DMatrix::zeros(q, q);
    for a in 0..q {
        let ca = x.column(a);
        for b in a..q {
            let cb = x.column(b);
            let mut acc = 0.0;
            for i in 0..n {
                acc += ca[i] * cb[i] * resid[i] * resid[i];
            }
            let v = acc / (nf * nf) - u[a] * u[b] / nf;
            sigma[(a, b)] = v;
            sigma[(b, a)] = v;
        }
    }
    (u, sigma)
}

/// Averaged score `U_n(β)` of the identity-link moment conditions.
pub fn score(beta: &DVector<f64>, x: &DesignMatrix, y: &PseudoObsVector) -> Result<DVector<f64>> {
    check_dims(beta, x, y)?;
    let (u, _) = moment_stats(&x.matrix, &y.values, beta.as_slice());
    Ok(u)
}

/// Moment covariance `Σ_n(β)`, symmetric by construction.
pub fn moment_covariance(
    beta: &DVector<f64>,
    x: &DesignMatrix,
    y: &PseudoObsVector,
) -> Result<DMatrix<f64>> {
    check_dims(beta, x, y)?;
    let (_, sigma) = moment_stats(&x.matrix, &y.values, beta.as_slice());
    Ok(sigma)
}

/// GMM objective `Q_n(β) = U_nᵀ Σ_n⁻¹ U_n`, solved by positive-definite
/// factorization with ridge escalation; never an explicit inverse. Returns
/// the objective and the ridge level that was needed (zero on
/// well-conditioned data).
pub fn objective_with_ridge(
    beta: &DVector<f64>,
    x: &DesignMatrix,
    y: &PseudoObsVector,
    ridge: f64,
) -> Result<(f64, f64)> {
    check_dims(beta, x, y)?;
    if ridge.is_nan() || ridge < 0.0 {
        return Err(Error::DomainError(format!("ridge must be non-negative, got {ridge}")));
    }
    let (u, sigma) = moment_stats(&x.matrix, &y.values, beta.as_slice());
    if u.amax() == 0.0 {
        return Ok((0.0, ridge));
    }
    let (z, used) = linalg::solve_spd_escalating(&sigma, &u, ridge)?;
    Ok((u.dot(&z).max(0.0), used))
}

/// GMM objective `Q_n(β)`; see [`objective_with_ridge`].
pub fn objective(beta: &DVector<f64>, x: &DesignMatrix, y: &PseudoObsVector, ridge: f64) -> Result<f64> {
    objective_with_ridge(beta, x, y, ridge).map(|(q, _)| q)
}

/// Log pseudo-likelihood `−Q_n(β)/2` (proportionality constant dropped).
pub fn pseudo_log_likelihood(
    beta: &DVector<f64>,
    x: &DesignMatrix,
    y: &PseudoObsVector,
) -> Result<f64> {
    Ok(-objective(beta, x, y, 0.0)? / 2.0)
}

fn log_normal_density(value: f64, mean: f64, var: f64) -> f64 {
    let d = value - mean;
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var)
}

/// Log pseudo-posterior: pseudo-log-likelihood plus independent normal
/// log prior densities.
pub fn log_posterior(
    beta: &DVector<f64>,
    state: &GmmState,
    x: &DesignMatrix,
    y: &PseudoObsVector,
) -> Result<f64> {
    if beta.len() != state.prior_mean.len() {
        return Err(Error::DimensionMismatch { expected: state.prior_mean.len(), found: beta.len() });
    }
    let mut lp = pseudo_log_likelihood(beta, x, y)?;
    for ((&b, &m), &v) in beta.iter().zip(state.prior_mean.iter()).zip(state.prior_var.iter()) {
        lp += log_normal_density(b, m, v);
    }
    Ok(lp)
}

/// Least-squares fit of the design, shared initialization point of the GEE
/// benchmark and the sampler.
pub fn least_squares_fit(x: &DesignMatrix, y: &PseudoObsVector) -> Result<DVector<f64>> {
    if y.values.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.values.len() });
    }
    linalg::least_squares(&x.matrix, &DVector::from_column_slice(&y.values))
}

/// Pre-assembled evaluation target for the sampler: the pseudo-posterior
/// of (`x`, `y`) under the prior in `state`. Points where the moment
/// covariance cannot be factorized evaluate to `-inf` and are rejected by
/// the chain.
pub struct GmmTarget {
    x: DMatrix<f64>,
    y: Vec<f64>,
    prior_mean: Vec<f64>,
    prior_var: Vec<f64>,
}

impl GmmTarget {
    pub fn new(state: &GmmState, x: &DesignMatrix, y: &PseudoObsVector) -> Result<Self> {
        if state.prior_mean.len() != x.ncols() {
            return Err(Error::DimensionMismatch { expected: x.ncols(), found: state.prior_mean.len() });
        }
        if y.values.len() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.values.len() });
        }
        Ok(Self {
            x: x.matrix.clone(),
            y: y.values.clone(),
            prior_mean: state.prior_mean.as_slice().to_vec(),
            prior_var: state.prior_var.as_slice().to_vec(),
        })
    }
}

impl crate::sampler::LogTarget for GmmTarget {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn log_density(&self, point: &[f64]) -> f64 {
        let (u, sigma) = moment_stats(&self.x, &self.y, point);
        let q_n = if u.amax() == 0.0 {
            0.0
        } else {
            match linalg::solve_spd_escalating(&sigma, &u, 0.0) {
                Ok((z, _)) => u.dot(&z).max(0.0),
                Err(_) => return f64::NEG_INFINITY,
            }
        };
        let mut lp = -q_n / 2.0;
        for ((&b, &m), &v) in point.iter().zip(&self.prior_mean).zip(&self.prior_var) {
            lp += log_normal_density(b, m, v);
        }
        lp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, SurvivalRecord};

    fn toy_data(arms: &[u8], covs: &[Vec<f64>]) -> Dataset {
        let names: Vec<String> = (0..covs.first().map_or(0, Vec::len))
            .map(|i| format!("z{i}"))
            .collect();
        let records = arms
            .iter()
            .zip(covs)
            .enumerate()
            .map(|(i, (&a, c))| SurvivalRecord::new(1.0 + i as f64, true, a, c.clone()).unwrap())
            .collect();
        Dataset::new(records, names).unwrap()
    }

    fn pseudo(values: &[f64]) -> PseudoObsVector {
        PseudoObsVector { tau: 5.0, values: values.to_vec() }
    }

    #[test]
    fn treatment_only_design() {
        let data = toy_data(&[0, 1, 1], &[vec![], vec![], vec![]]);
        let x = build_design(&data, &RegressionSpec::treatment_only()).unwrap();
        assert_eq!(x.column_names, vec!["intercept", "treatment"]);
        assert_eq!(x.matrix, DMatrix::from_row_slice(3, 2, &[1., 0., 1., 1., 1., 1.]));
    }

    #[test]
    fn constant_covariate_is_rank_deficient() {
        let data = toy_data(&[0, 1, 0, 1], &[vec![2.0], vec![2.0], vec![2.0], vec![2.0]]);
        let err = build_design(&data, &RegressionSpec::with_covariates(&[0])).unwrap_err();
        assert!(matches!(err, Error::RankDeficient));
    }

    #[test]
    fn duplicate_and_out_of_range_indices_rejected() {
        let data = toy_data(&[0, 1, 0, 1], &[vec![1.0], vec![0.0], vec![0.5], vec![0.2]]);
        assert!(build_design(&data, &RegressionSpec::with_covariates(&[0, 0])).is_err());
        assert!(build_design(&data, &RegressionSpec::with_covariates(&[3])).is_err());
    }

    fn interaction_data() -> Dataset {
        // binary covariate, both strata in both arms
        let e = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let arms = [0u8, 0, 1, 1, 0, 1, 0, 1];
        let covs: Vec<Vec<f64>> = e.iter().map(|&v| vec![v]).collect();
        toy_data(&arms, &covs)
    }

    fn interaction_spec(encoding: InteractionEncoding) -> RegressionSpec {
        RegressionSpec {
            include_treatment: true,
            covariate_indices: vec![0],
            interactions: vec![0],
            encoding,
        }
    }

    #[test]
    fn stratified_encoding_columns() {
        let data = interaction_data();
        let x = build_design(&data, &interaction_spec(InteractionEncoding::Stratified)).unwrap();
        assert_eq!(
            x.column_names,
            vec!["intercept", "z0", "treatment:z0=0", "treatment:z0=1"]
        );
        for (i, rec) in data.records().iter().enumerate() {
            let a = f64::from(rec.arm);
            let e = rec.covariates[0];
            assert_eq!(x.matrix[(i, 2)], a * (1.0 - e));
            assert_eq!(x.matrix[(i, 3)], a * e);
        }
    }

    #[test]
    fn encodings_span_same_space() {
        // mapping (β₀, δ, β₁, β₂) ↦ (β₀, β₁, δ, δ+β₂) reproduces the fitted
        // means exactly at any β
        let data = interaction_data();
        let xp = build_design(&data, &interaction_spec(InteractionEncoding::Product)).unwrap();
        let xs = build_design(&data, &interaction_spec(InteractionEncoding::Stratified)).unwrap();
        let beta = DVector::from_vec(vec![0.7, -0.3, 1.1, 0.9]);
        let mapped = DVector::from_vec(vec![0.7, 1.1, -0.3, -0.3 + 0.9]);
        let mu_p = &xp.matrix * &beta;
        let mu_s = &xs.matrix * &mapped;
        assert!((mu_p - mu_s).amax() < 1e-12);
    }

    #[test]
    fn fitted_means_agree_across_encodings() {
        let data = interaction_data();
        let y = pseudo(&[1.0, 2.5, 0.5, 3.0, 1.5, 2.8, 2.2, 0.8]);
        let xp = build_design(&data, &interaction_spec(InteractionEncoding::Product)).unwrap();
        let xs = build_design(&data, &interaction_spec(InteractionEncoding::Stratified)).unwrap();
        let bp = least_squares_fit(&xp, &y).unwrap();
        let bs = least_squares_fit(&xs, &y).unwrap();
        let mu_p = &xp.matrix * &bp;
        let mu_s = &xs.matrix * &bs;
        assert!((mu_p - mu_s).amax() < 1e-10);
        // δ⁻ = δ and δ⁺ = δ + β₂
        let delta = bp[xp.column_index("treatment").unwrap()];
        let inter = bp[xp.column_index("treatment:z0").unwrap()];
        let d_minus = bs[xs.column_index("treatment:z0=0").unwrap()];
        let d_plus = bs[xs.column_index("treatment:z0=1").unwrap()];
        assert!((d_minus - delta).abs() < 1e-10);
        assert!((d_plus - (delta + inter)).abs() < 1e-10);
    }

    #[test]
    fn score_hand_values() {
        // intercept-only, y = (1,2,3), β₀ = 0 → U = (2)
        let data = toy_data(&[0, 1, 0], &[vec![], vec![], vec![]]);
        let spec = RegressionSpec {
            include_treatment: false,
            covariate_indices: vec![],
            interactions: vec![],
            encoding: InteractionEncoding::Product,
        };
        let x = build_design(&data, &spec).unwrap();
        let y = pseudo(&[1.0, 2.0, 3.0]);
        let u = score(&DVector::zeros(1), &x, &y).unwrap();
        assert!((u[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn score_zero_at_least_squares() {
        let data = toy_data(&[0, 1, 0, 1], &[vec![0.3], vec![1.2], vec![-0.5], vec![0.7]]);
        let x = build_design(&data, &RegressionSpec::with_covariates(&[0])).unwrap();
        let y = pseudo(&[1.0, 2.0, 0.5, 2.5]);
        let beta = least_squares_fit(&x, &y).unwrap();
        let u = score(&beta, &x, &y).unwrap();
        assert!(u.amax() < 1e-10);
        // exact residuals → exact zero score
        let mu = &x.matrix * &beta;
        let y_exact = PseudoObsVector { tau: 5.0, values: mu.as_slice().to_vec() };
        let u = score(&beta, &x, &y_exact).unwrap();
        assert!(u.amax() < 1e-14);
    }

    #[test]
    fn moment_covariance_hand_value() {
        // intercept-only, y = (0,2), β₀ = 1 → Σ = (1/4)(1+1) − 0 = 0.5
        let data = toy_data(&[0, 1], &[vec![], vec![]]);
        let spec = RegressionSpec {
            include_treatment: false,
            covariate_indices: vec![],
            interactions: vec![],
            encoding: InteractionEncoding::Product,
        };
        let x = build_design(&data, &spec).unwrap();
        let y = pseudo(&[0.0, 2.0]);
        let sigma = moment_covariance(&DVector::from_element(1, 1.0), &x, &y).unwrap();
        assert!((sigma[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn moment_covariance_zero_residuals() {
        let data = toy_data(&[0, 1, 0, 1], &[vec![], vec![], vec![], vec![]]);
        let x = build_design(&data, &RegressionSpec::treatment_only()).unwrap();
        let beta = DVector::from_vec(vec![1.0, 0.5]);
        let mu = &x.matrix * &beta;
        let y = PseudoObsVector { tau: 5.0, values: mu.as_slice().to_vec() };
        let sigma = moment_covariance(&beta, &x, &y).unwrap();
        assert!(sigma.amax() < 1e-14);
    }

    #[test]
    fn moment_covariance_at_root_drops_outer_term() {
        let data = toy_data(&[0, 1, 0, 1], &[vec![0.3], vec![1.2], vec![-0.5], vec![0.7]]);
        let x = build_design(&data, &RegressionSpec::with_covariates(&[0])).unwrap();
        let y = pseudo(&[1.0, 2.0, 0.5, 2.5]);
        let beta = least_squares_fit(&x, &y).unwrap();
        let sigma = moment_covariance(&beta, &x, &y).unwrap();
        // recompute (1/n²)Σ u_i u_iᵀ directly
        let n = 4.0;
        let mut direct = DMatrix::zeros(3, 3);
        for i in 0..4 {
            let xi = x.matrix.row(i).transpose();
            let r = y.values[i] - x.matrix.row(i).transpose().dot(&beta);
            direct += &xi * xi.transpose() * (r * r) / (n * n);
        }
        assert!((sigma - direct).amax() < 1e-12);
    }

    #[test]
    fn objective_zero_at_least_squares_and_nonnegative() {
        let data = toy_data(&[0, 1, 0, 1, 0, 1], &(0..6).map(|i| vec![(i as f64) * 0.3 - 1.0]).collect::<Vec<_>>());
        let x = build_design(&data, &RegressionSpec::with_covariates(&[0])).unwrap();
        let y = pseudo(&[1.0, 2.0, 0.5, 2.5, 1.2, 1.8]);
        let beta = least_squares_fit(&x, &y).unwrap();
        assert!(objective(&beta, &x, &y, 0.0).unwrap() < 1e-9);
        for shift in [0.1, -0.2, 0.5] {
            let mut b = beta.clone();
            b[0] += shift;
            assert!(objective(&b, &x, &y, 0.0).unwrap() >= 0.0);
        }
    }

    #[test]
    fn pseudo_log_likelihood_is_minus_half_objective() {
        let data = toy_data(&[0, 1, 0, 1], &[vec![0.3], vec![1.2], vec![-0.5], vec![0.7]]);
        let x = build_design(&data, &RegressionSpec::with_covariates(&[0])).unwrap();
        let y = pseudo(&[1.0, 2.0, 0.5, 2.5]);
        let beta = DVector::from_vec(vec![0.4, 0.6, -0.1]);
        let q = objective(&beta, &x, &y, 0.0).unwrap();
        let ll = pseudo_log_likelihood(&beta, &x, &y).unwrap();
        assert!((ll + q / 2.0).abs() < 1e-14);
    }

    #[test]
    fn log_posterior_adds_prior_density() {
        let data = toy_data(&[0, 1, 0, 1], &[vec![0.3], vec![1.2], vec![-0.5], vec![0.7]]);
        let x = build_design(&data, &RegressionSpec::with_covariates(&[0])).unwrap();
        let y = pseudo(&[1.0, 2.0, 0.5, 2.5]);
        let state = GmmState::with_default_prior(3);
        let beta = DVector::from_vec(vec![0.4, 0.6, -0.1]);
        let lp = log_posterior(&beta, &state, &x, &y).unwrap();
        // independent evaluation of the same decomposition
        use statrs::distribution::{Continuous, Normal};
        let prior = Normal::new(0.0, 10.0f64.sqrt()).unwrap();
        let expected = pseudo_log_likelihood(&beta, &x, &y).unwrap()
            + beta.iter().map(|&b| prior.ln_pdf(b)).sum::<f64>();
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn flat_prior_mode_is_least_squares() {
        let data = toy_data(&[0, 1, 0, 1, 0, 1], &(0..6).map(|i| vec![(i as f64) * 0.4 - 1.0]).collect::<Vec<_>>());
        let x = build_design(&data, &RegressionSpec::with_covariates(&[0])).unwrap();
        let y = pseudo(&[1.0, 2.0, 0.5, 2.5, 1.2, 1.8]);
        let state = GmmState::with_prior_sd(3, 1000.0).unwrap();
        let beta = least_squares_fit(&x, &y).unwrap();
        let lp_mode = log_posterior(&beta, &state, &x, &y).unwrap();
        for j in 0..3 {
            for shift in [-1e-3, 1e-3] {
                let mut b = beta.clone();
                b[j] += shift;
                assert!(log_posterior(&b, &state, &x, &y).unwrap() <= lp_mode + 1e-12);
            }
        }
    }

    #[test]
    fn tight_prior_pulls_mode_to_prior_mean() {
        let data = toy_data(&[0, 1, 0, 1], &[vec![], vec![], vec![], vec![]]);
        let x = build_design(&data, &RegressionSpec::treatment_only()).unwrap();
        let y = pseudo(&[1.0, 2.0, 1.5, 2.5]);
        let mean = DVector::from_vec(vec![0.3, -0.2]);
        let state =
            GmmState::new(DVector::zeros(2), mean.clone(), DVector::from_element(2, 1e-10)).unwrap();
        let lp_mean = log_posterior(&mean, &state, &x, &y).unwrap();
        let other = DVector::from_vec(vec![0.3001, -0.2]);
        assert!(log_posterior(&other, &state, &x, &y).unwrap() < lp_mean);
    }

    #[test]
    fn score_linearity_in_beta() {
        let data = toy_data(&[0, 1, 0, 1, 1], &(0..5).map(|i| vec![0.5 * i as f64]).collect::<Vec<_>>());
        let x = build_design(&data, &RegressionSpec::with_covariates(&[0])).unwrap();
        let y = pseudo(&[1.0, 2.0, 0.5, 2.5, 3.0]);
        let beta = DVector::from_vec(vec![0.2, -0.4, 0.9]);
        let u0 = score(&DVector::zeros(3), &x, &y).unwrap();
        let u = score(&beta, &x, &y).unwrap();
        let xtx_n = x.matrix.transpose() * &x.matrix / 5.0;
        let expected = u0 - xtx_n * beta;
        assert!((u - expected).amax() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let data = toy_data(&[0, 1, 0], &[vec![], vec![], vec![]]);
        let x = build_design(&data, &RegressionSpec::treatment_only()).unwrap();
        let y = pseudo(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            score(&DVector::zeros(3), &x, &y),
            Err(Error::DimensionMismatch { .. })
        ));
        let y_short = pseudo(&[1.0, 2.0]);
        assert!(matches!(
            score(&DVector::zeros(2), &x, &y_short),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
