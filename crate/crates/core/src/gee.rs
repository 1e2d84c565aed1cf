//! Frequentist benchmarks: the score equations solved directly on
//! pseudo-observations with a sandwich variance (identity link,
//! independence working correlation), and the unadjusted per-arm
//! Kaplan-Meier restricted-mean difference.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gmm::DesignMatrix;
use crate::linalg;
use crate::stats::normal_quantile;
use crate::survival::{km_fit, rmst_from_curve, PseudoObsVector};

/// GEE fit: point estimates with robust (sandwich) covariance and Wald
/// intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct GeeFit {
    pub parameter_names: Vec<String>,
    pub beta_hat: DVector<f64>,
    pub sandwich_cov: DMatrix<f64>,
    pub se: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub confidence: f64,
}

impl GeeFit {
    pub fn estimate(&self, name: &str) -> Option<f64> {
        let idx = self.parameter_names.iter().position(|p| p == name)?;
        Some(self.beta_hat[idx])
    }

    /// Estimates, standard errors, and intervals as a JSON value.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "parameters": self.parameter_names,
            "estimates": self.beta_hat.as_slice(),
            "se": self.se,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "confidence": self.confidence,
        })
    }
}

/// Solve the identity-link score equations on pseudo-observations
/// (ordinary least squares under the independence working correlation) and
/// attach the sandwich covariance
/// `(XᵀX)⁻¹ (Σ x_i x_iᵀ r̂_i²) (XᵀX)⁻¹`.
pub fn gee_fit(x: &DesignMatrix, y: &PseudoObsVector, confidence: f64) -> Result<GeeFit> {
    let (n, q) = (x.nrows(), x.ncols());
    if y.values.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.values.len() });
    }
    if n <= q {
        return Err(Error::TooFewRecords { needed: q + 1, found: n });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::DomainError(format!("confidence must be in (0,1), got {confidence}")));
    }
    linalg::check_full_rank(&x.matrix)?;

    let yv = DVector::from_column_slice(&y.values);
    let xtx = x.matrix.transpose() * &x.matrix;
    let bread = linalg::spd_inverse(&xtx)?;
    let beta_hat = &bread * (x.matrix.transpose() * &yv);

    let resid = &yv - &x.matrix * &beta_hat;
    let mut meat = DMatrix::zeros(q, q);
    for a in 0..q {
        let ca = x.matrix.column(a);
        for b in a..q {
            let cb = x.matrix.column(b);
            let mut acc = 0.0;
            for i in 0..n {
                acc += ca[i] * cb[i] * resid[i] * resid[i];
            }
            meat[(a, b)] = acc;
            meat[(b, a)] = acc;
        }
    }
    let sandwich_cov = &bread * meat * &bread;

    let z = normal_quantile(0.5 + confidence / 2.0);
    let se: Vec<f64> = (0..q).map(|j| sandwich_cov[(j, j)].max(0.0).sqrt()).collect();
    let ci_lower: Vec<f64> = (0..q).map(|j| beta_hat[j] - z * se[j]).collect();
    let ci_upper: Vec<f64> = (0..q).map(|j| beta_hat[j] + z * se[j]).collect();

    Ok(GeeFit {
        parameter_names: x.column_names.clone(),
        beta_hat,
        sandwich_cov,
        se,
        ci_lower,
        ci_upper,
        confidence,
    })
}

/// Unadjusted restricted-mean difference from per-arm Kaplan-Meier
/// integration (arm 1 minus arm 0) with a plug-in variance and 95% Wald
/// interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmDiff {
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub rmst_arm0: f64,
    pub rmst_arm1: f64,
}

/// Variance of one arm's restricted mean:
/// `Σ_j (∫_{t_j}^τ Ŝ)² · d_j / (n_j (n_j − d_j))` over event times below τ.
fn arm_rmst_variance(curve: &crate::survival::KmCurve, tau: f64) -> f64 {
    let k = curve.jump_times.len();
    // tail areas of the step function from each jump time to tau
    let mut tail = vec![0.0; k + 1];
    for j in (0..k).rev() {
        let t = curve.jump_times[j].min(tau);
        let next = if j + 1 < k { curve.jump_times[j + 1].min(tau) } else { tau };
        tail[j] = (next - t).max(0.0) * curve.survival[j] + tail[j + 1];
    }
    let mut var = 0.0;
    for j in 0..k {
        if curve.jump_times[j] >= tau {
            break;
        }
        let d = curve.events[j] as f64;
        let n = curve.at_risk[j] as f64;
        if curve.at_risk[j] > curve.events[j] {
            var += tail[j] * tail[j] * d / (n * (n - d));
        }
    }
    var
}

pub fn km_diff_rmst(data: &Dataset, tau: f64) -> Result<KmDiff> {
    if !data.has_both_arms() {
        return Err(Error::SingleArm);
    }
    let mut rmst = [0.0; 2];
    let mut var = [0.0; 2];
    for arm in 0..2u8 {
        let subset = data.arm_subset(arm)?;
        if subset.n_events() < 1 {
            return Err(Error::InsufficientEvents { needed: 1, found: 0 });
        }
        let curve = km_fit(&subset)?;
        rmst[arm as usize] = rmst_from_curve(&curve, tau)?.value;
        var[arm as usize] = arm_rmst_variance(&curve, tau);
    }
    let estimate = rmst[1] - rmst[0];
    let se = (var[0] + var[1]).sqrt();
    let z = normal_quantile(0.975);
    Ok(KmDiff {
        estimate,
        se,
        ci_lower: estimate - z * se,
        ci_upper: estimate + z * se,
        rmst_arm0: rmst[0],
        rmst_arm1: rmst[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, SurvivalRecord};
    use crate::gmm::{build_design, RegressionSpec};

    fn pseudo(values: &[f64]) -> PseudoObsVector {
        PseudoObsVector { tau: 5.0, values: values.to_vec() }
    }

    fn intercept_only(n: usize) -> DesignMatrix {
        DesignMatrix {
            matrix: DMatrix::from_element(n, 1, 1.0),
            column_names: vec!["intercept".into()],
        }
    }

    #[test]
    fn intercept_only_is_sample_mean() {
        let fit = gee_fit(&intercept_only(3), &pseudo(&[1.0, 2.0, 3.0]), 0.95).unwrap();
        assert!((fit.beta_hat[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_gives_zero_sandwich() {
        let x = DesignMatrix {
            matrix: DMatrix::from_row_slice(4, 2, &[1., 0., 1., 1., 1., 2., 1., 3.]),
            column_names: vec!["intercept".into(), "slope".into()],
        };
        let beta = DVector::from_vec(vec![0.5, 2.0]);
        let yv = &x.matrix * &beta;
        let fit = gee_fit(&x, &pseudo(yv.as_slice()), 0.95).unwrap();
        assert!((fit.beta_hat - beta).amax() < 1e-12);
        assert!(fit.sandwich_cov.amax() < 1e-20);
    }

    /// Independent matrix-arithmetic oracle: explicit Gauss-Jordan inverse
    /// of XᵀX and direct triple-product summation for the sandwich.
    fn brute_force_fit(x: &DMatrix<f64>, y: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let (n, q) = x.shape();
        // invert XᵀX by Gauss-Jordan with partial pivoting
        let xtx = x.transpose() * x;
        let mut aug = DMatrix::<f64>::zeros(q, 2 * q);
        for i in 0..q {
            for j in 0..q {
                aug[(i, j)] = xtx[(i, j)];
            }
            aug[(i, q + i)] = 1.0;
        }
        for col in 0..q {
            let mut piv = col;
            for r in col + 1..q {
                if aug[(r, col)].abs() > aug[(piv, col)].abs() {
                    piv = r;
                }
            }
            aug.swap_rows(col, piv);
            let d = aug[(col, col)];
            for j in 0..2 * q {
                aug[(col, j)] /= d;
            }
            for r in 0..q {
                if r != col {
                    let f = aug[(r, col)];
                    for j in 0..2 * q {
                        let v = aug[(col, j)];
                        aug[(r, j)] -= f * v;
                    }
                }
            }
        }
        let mut inv = DMatrix::<f64>::zeros(q, q);
        for i in 0..q {
            for j in 0..q {
                inv[(i, j)] = aug[(i, q + j)];
            }
        }
        let yv = DVector::from_column_slice(y);
        let beta = &inv * (x.transpose() * &yv);
        let mut meat = DMatrix::<f64>::zeros(q, q);
        for i in 0..n {
            let xi = x.row(i).transpose();
            let r = y[i] - x.row(i).transpose().dot(&beta);
            meat += &xi * xi.transpose() * (r * r);
        }
        (beta.as_slice().to_vec(), &inv * meat * &inv)
    }

    #[test]
    fn randomized_fit_matches_brute_force_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for _ in 0..20 {
            let n = 30 + (rng.random::<u64>() % 40) as usize;
            let mut m = DMatrix::<f64>::zeros(n, 3);
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                m[(i, 0)] = 1.0;
                m[(i, 1)] = f64::from(i as u32 % 2);
                m[(i, 2)] = rng.random::<f64>() * 4.0 - 2.0;
                y.push(rng.random::<f64>() * 3.0 + m[(i, 2)]);
            }
            let x = DesignMatrix {
                matrix: m.clone(),
                column_names: vec!["intercept".into(), "treatment".into(), "z".into()],
            };
            let fit = gee_fit(&x, &pseudo(&y), 0.95).unwrap();
            let (beta_oracle, cov_oracle) = brute_force_fit(&m, &y);
            for j in 0..3 {
                assert!((fit.beta_hat[j] - beta_oracle[j]).abs() < 1e-9);
            }
            assert!((fit.sandwich_cov.clone() - cov_oracle).amax() < 1e-9);
        }
    }

    #[test]
    fn sandwich_invariant_under_record_reordering() {
        let m = DMatrix::from_row_slice(5, 2, &[1., 0., 1., 1., 1., 0., 1., 1., 1., 0.]);
        let y = [1.0, 2.0, 1.5, 2.5, 0.5];
        let x = DesignMatrix { matrix: m.clone(), column_names: vec!["i".into(), "t".into()] };
        let fit = gee_fit(&x, &pseudo(&y), 0.95).unwrap();
        let perm = [4usize, 2, 0, 3, 1];
        let mut m2 = DMatrix::zeros(5, 2);
        let mut y2 = [0.0; 5];
        for (new, &old) in perm.iter().enumerate() {
            m2.set_row(new, &m.row(old));
            y2[new] = y[old];
        }
        let x2 = DesignMatrix { matrix: m2, column_names: vec!["i".into(), "t".into()] };
        let fit2 = gee_fit(&x2, &pseudo(&y2), 0.95).unwrap();
        assert!((fit.sandwich_cov - fit2.sandwich_cov).amax() < 1e-12);
    }

    #[test]
    fn wald_interval_wraps_estimate() {
        let fit = gee_fit(&intercept_only(5), &pseudo(&[1.0, 2.0, 3.0, 2.0, 1.0]), 0.95).unwrap();
        assert!(fit.ci_lower[0] < fit.beta_hat[0] && fit.beta_hat[0] < fit.ci_upper[0]);
    }

    fn two_arm_data(t0: &[(f64, bool)], t1: &[(f64, bool)]) -> Dataset {
        let records = t0
            .iter()
            .map(|&(t, e)| SurvivalRecord::new(t, e, 0, vec![]).unwrap())
            .chain(t1.iter().map(|&(t, e)| SurvivalRecord::new(t, e, 1, vec![]).unwrap()))
            .collect();
        Dataset::new(records, vec![]).unwrap()
    }

    #[test]
    fn identical_arms_give_zero_difference() {
        let arm: Vec<(f64, bool)> =
            vec![(1.0, true), (2.0, false), (3.0, true), (4.5, true)];
        let data = two_arm_data(&arm, &arm);
        let diff = km_diff_rmst(&data, 4.0).unwrap();
        assert_eq!(diff.estimate, 0.0);
    }

    #[test]
    fn uncensored_difference_is_mean_difference() {
        let t0: Vec<(f64, bool)> = [1.0, 2.0, 6.0].iter().map(|&t| (t, true)).collect();
        let t1: Vec<(f64, bool)> = [2.5, 3.5, 7.0].iter().map(|&t| (t, true)).collect();
        let data = two_arm_data(&t0, &t1);
        let tau = 5.0;
        let m0 = (1.0 + 2.0 + 5.0) / 3.0;
        let m1 = (2.5 + 3.5 + 5.0) / 3.0;
        let diff = km_diff_rmst(&data, tau).unwrap();
        assert!((diff.estimate - (m1 - m0)).abs() < 1e-12);
    }

    #[test]
    fn single_arm_and_no_event_errors() {
        let t0: Vec<(f64, bool)> = vec![(1.0, true), (2.0, true)];
        let data = two_arm_data(&t0, &[]);
        assert!(matches!(km_diff_rmst(&data, 2.0), Err(Error::SingleArm)));
        let data = two_arm_data(&t0, &[(3.0, false)]);
        assert!(matches!(km_diff_rmst(&data, 2.0), Err(Error::InsufficientEvents { .. })));
    }
}
