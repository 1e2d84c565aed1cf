//! Replication-study performance metrics: bias, average and empirical
//! standard errors, RMSE, and interval coverage.

use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

/// Schema marker written into campaign CSV rows.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// One replication's estimate of a tracked parameter, with its standard
/// error (frequentist SE or posterior sd) and 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationResult {
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub converged: bool,
}

/// Aggregated performance of one method on one tracked coefficient of one
/// scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub method: String,
    pub scenario: String,
    pub n: usize,
    /// Which coefficient the row tracks (e.g. `treatment`).
    pub parameter: String,
    pub replications_used: usize,
    pub excluded: usize,
    pub bias: f64,
    pub ase: f64,
    /// Sample standard deviation (n−1) of the estimates; NaN when fewer
    /// than two replications are available.
    pub ese: f64,
    pub rmse: f64,
    /// Percentage of intervals containing the truth (closed containment).
    pub coverage: f64,
}

impl ReplicationReport {
    pub fn csv_header() -> &'static str {
        "scenario,n,method,parameter,bias,ase,ese,rmse,coverage,replications_used,excluded,schema_version"
    }

    pub fn csv_row(&self) -> String {
        let num = |x: f64| if x.is_nan() { String::new() } else { format!("{x}") };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.n,
            self.method,
            self.parameter,
            num(self.bias),
            num(self.ase),
            num(self.ese),
            num(self.rmse),
            num(self.coverage),
            self.replications_used,
            self.excluded,
            CSV_SCHEMA_VERSION
        )
    }
}

/// Aggregate replication results against the truth. Non-converged results
/// are excluded and counted; at least two converged replications are
/// required.
pub fn aggregate(
    method: &str,
    scenario: &str,
    n: usize,
    parameter: &str,
    results: &[ReplicationResult],
    truth: f64,
) -> Result<ReplicationReport> {
    let converged: Vec<&ReplicationResult> = results.iter().filter(|r| r.converged).collect();
    let used = converged.len();
    if used < 2 {
        return Err(Error::TooFewConverged { needed: 2, found: used });
    }
    let estimates: Vec<f64> = converged.iter().map(|r| r.estimate).collect();
    let ses: Vec<f64> = converged.iter().map(|r| r.se).collect();
    let bias = mean(&estimates) - truth;
    let ase = mean(&ses);
    let ese = sample_sd(&estimates);
    let rmse = (ese * ese + bias * bias).sqrt();
    let covered = converged
        .iter()
        .filter(|r| r.ci_lower <= truth && truth <= r.ci_upper)
        .count();
    Ok(ReplicationReport {
        method: method.to_string(),
        scenario: scenario.to_string(),
        n,
        parameter: parameter.to_string(),
        replications_used: used,
        excluded: results.len() - used,
        bias,
        ase,
        ese,
        rmse,
        coverage: 100.0 * covered as f64 / used as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(estimate: f64, se: f64, lo: f64, hi: f64) -> ReplicationResult {
        ReplicationResult { estimate, se, ci_lower: lo, ci_upper: hi, converged: true }
    }

    #[test]
    fn two_point_aggregate() {
        let results = [result(0.9, 0.2, 0.5, 1.3), result(1.1, 0.3, 0.7, 1.5)];
        let report = aggregate("gee", "2", 200, "treatment", &results, 1.0).unwrap();
        assert!(report.bias.abs() < 1e-12);
        assert!((report.ese - 0.1414213562373095).abs() < 1e-12);
        assert!((report.rmse - report.ese).abs() < 1e-12);
        assert!((report.ase - 0.25).abs() < 1e-12);
        assert_eq!(report.coverage, 100.0);
    }

    #[test]
    fn degenerate_spread() {
        let results = [result(1.0, 0.2, 0.8, 1.2), result(1.0, 0.2, 0.8, 1.2)];
        let report = aggregate("km_diff", "1", 50, "treatment", &results, 1.0).unwrap();
        assert_eq!(report.bias, 0.0);
        assert_eq!(report.ese, 0.0);
        assert_eq!(report.rmse, 0.0);
        assert!((report.ase - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rmse_is_recomputed_from_parts() {
        let results = [result(0.8, 0.2, 0.5, 1.1), result(1.4, 0.2, 1.1, 1.7), result(1.1, 0.2, 0.8, 1.4)];
        let report = aggregate("gmm", "3", 100, "treatment", &results, 1.0).unwrap();
        assert!((report.rmse * report.rmse - (report.ese * report.ese + report.bias * report.bias)).abs() < 1e-10);
    }

    #[test]
    fn non_converged_excluded_and_counted() {
        let mut results = vec![result(0.9, 0.2, 0.5, 1.3), result(1.1, 0.3, 0.7, 1.5)];
        results.push(ReplicationResult {
            estimate: 99.0,
            se: 1.0,
            ci_lower: 90.0,
            ci_upper: 110.0,
            converged: false,
        });
        let report = aggregate("gmm", "2", 200, "treatment", &results, 1.0).unwrap();
        assert_eq!(report.replications_used, 2);
        assert_eq!(report.excluded, 1);
        assert!(report.bias.abs() < 1e-12);
    }

    #[test]
    fn too_few_converged_errors() {
        let results = [result(1.0, 0.1, 0.8, 1.2)];
        assert!(matches!(
            aggregate("gee", "1", 50, "treatment", &results, 1.0),
            Err(Error::TooFewConverged { .. })
        ));
    }

    #[test]
    fn permutation_invariant() {
        let a = [result(0.9, 0.2, 0.5, 1.3), result(1.1, 0.3, 0.7, 1.5), result(1.3, 0.1, 1.2, 1.4)];
        let b = [a[2], a[0], a[1]];
        let ra = aggregate("gee", "2", 100, "treatment", &a, 1.0).unwrap();
        let rb = aggregate("gee", "2", 100, "treatment", &b, 1.0).unwrap();
        assert!((ra.bias - rb.bias).abs() < 1e-12);
        assert!((ra.ase - rb.ase).abs() < 1e-12);
        assert!((ra.ese - rb.ese).abs() < 1e-12);
        assert!((ra.rmse - rb.rmse).abs() < 1e-12);
        assert_eq!(ra.coverage, rb.coverage);
        assert_eq!(ra.replications_used, rb.replications_used);
    }

    #[test]
    fn closed_interval_containment() {
        // truth exactly on a bound counts as covered
        let results = [result(1.0, 0.1, 1.0, 1.2), result(1.0, 0.1, 0.8, 1.0)];
        let report = aggregate("gee", "1", 10, "treatment", &results, 1.0).unwrap();
        assert_eq!(report.coverage, 100.0);
    }

    #[test]
    fn csv_row_layout() {
        let report = ReplicationReport {
            method: "gmm".into(),
            scenario: "2".into(),
            n: 200,
            parameter: "treatment".into(),
            replications_used: 200,
            excluded: 0,
            bias: -0.002,
            ase: 0.252,
            ese: 0.252,
            rmse: 0.252,
            coverage: 95.4,
            };
        assert_eq!(
            report.csv_row(),
            "2,200,gmm,treatment,-0.002,0.252,0.252,0.252,95.4,200,0,1"
        );
        assert!(ReplicationReport::csv_header().starts_with("scenario,n,method,"));
    }
}
