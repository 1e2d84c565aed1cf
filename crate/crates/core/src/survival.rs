//! Kaplan-Meier estimation, restricted-mean integration, jackknife
//! pseudo-observations, and restriction-time rules.
//!
//! Conventions: at tied times events are processed before censorings, and
//! the survival estimate is carried flat beyond the last observed time
//! regardless of its event status. [`resolve_tau`] exists precisely to keep
//! the restriction time inside the observed support.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Kaplan-Meier step function with risk-set bookkeeping and Greenwood
/// standard errors per jump (event) time.
#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    /// Distinct event times, strictly increasing.
    pub jump_times: Vec<f64>,
    /// Product-limit estimate immediately after each jump.
    pub survival: Vec<f64>,
    /// Subjects at risk just before each jump.
    pub at_risk: Vec<usize>,
    /// Events at each jump time.
    pub events: Vec<usize>,
    /// Greenwood standard error of the survival estimate at each jump.
    pub se: Vec<f64>,
    /// Sample size the curve was fitted on.
    pub n: usize,
    /// Largest observed time (event or censoring) in the source data.
    pub max_observed_time: f64,
}

impl KmCurve {
    /// Survival probability at `t` (right-continuous step function).
    pub fn survival_at(&self, t: f64) -> f64 {
        match self.jump_times.partition_point(|&jt| jt <= t) {
            0 => 1.0,
            k => self.survival[k - 1],
        }
    }
}

/// Area under a step curve restricted to `[0, tau]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmstValue {
    pub value: f64,
    /// Set when `tau` exceeds the last observed time of the source data;
    /// the integration still proceeds with the carried-flat tail.
    pub tau_beyond_support: bool,
}

/// Per-subject jackknife pseudo-values of the restricted mean at `tau`,
/// in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObsVector {
    pub tau: f64,
    pub values: Vec<f64>,
}

/// Which leave-one-out evaluation strategy to use. Both return the same
/// values to 1e-10; `Naive` recomputes each leave-one-out curve from
/// scratch and serves as the reference for `Fast`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Naive,
    Fast,
}

/// A restriction-time candidate produced by one of the data-driven rules.
#[derive(Debug, Clone, PartialEq)]
pub struct TauCandidate {
    pub rule: String,
    pub tau: f64,
}

/// Output of [`tau_candidates`]: the satisfiable rules plus notes for the
/// omitted ones.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TauCandidates {
    pub candidates: Vec<TauCandidate>,
    pub notes: Vec<String>,
}

/// Per-distinct-event-time risk-set summary: (time, events, at risk).
struct RiskRow {
    time: f64,
    d: usize,
    n: usize,
}

/// Sort indices by time ascending, events before censorings at ties.
fn sorted_order(times: &[f64], events: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| {
        times[a]
            .partial_cmp(&times[b])
            .unwrap()
            .then_with(|| events[b].cmp(&events[a]))
    });
    order
}

/// Walk the sorted sample and collect the distinct event times with their
/// event counts and risk sets.
fn risk_rows(times: &[f64], events: &[bool], order: &[usize]) -> Vec<RiskRow> {
    let n = order.len();
    let mut rows = Vec::new();
    let mut at_risk = n;
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let mut d = 0;
        let mut c = 0;
        while i < n && times[order[i]] == t {
            if events[order[i]] {
                d += 1;
            } else {
                c += 1;
            }
            i += 1;
        }
        if d > 0 {
            rows.push(RiskRow { time: t, d, n: at_risk });
        }
        at_risk -= d + c;
    }
    rows
}

/// Fit the Kaplan-Meier product-limit estimator.
pub fn km_fit(data: &Dataset) -> Result<KmCurve> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let times: Vec<f64> = data.records().iter().map(|r| r.time).collect();
    let events: Vec<bool> = data.records().iter().map(|r| r.event).collect();
    km_fit_arrays(&times, &events)
}

fn km_fit_arrays(times: &[f64], events: &[bool]) -> Result<KmCurve> {
    if times.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let order = sorted_order(times, events);
    let rows = risk_rows(times, events, &order);

    let mut jump_times = Vec::with_capacity(rows.len());
    let mut survival = Vec::with_capacity(rows.len());
    let mut at_risk = Vec::with_capacity(rows.len());
    let mut d_counts = Vec::with_capacity(rows.len());
    let mut se = Vec::with_capacity(rows.len());

    let mut s = 1.0;
    let mut greenwood = 0.0;
    for row in &rows {
        s *= 1.0 - row.d as f64 / row.n as f64;
        if row.n > row.d {
            greenwood += row.d as f64 / (row.n as f64 * (row.n - row.d) as f64);
        }
        jump_times.push(row.time);
        survival.push(s);
        at_risk.push(row.n);
        d_counts.push(row.d);
        se.push(s * greenwood.sqrt());
    }

    let max_observed_time = times[order[times.len() - 1]];
    Ok(KmCurve {
        jump_times,
        survival,
        at_risk,
        events: d_counts,
        se,
        n: times.len(),
        max_observed_time,
    })
}

/// Exact area under the Kaplan-Meier step function on `[0, tau]`.
pub fn rmst_from_curve(curve: &KmCurve, tau: f64) -> Result<RmstValue> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::DomainError(format!("rmst_from_curve: tau must be > 0, got {tau}")));
    }
    let mut acc = 0.0;
    let mut prev = 0.0f64;
    let mut s = 1.0;
    for (&t, &surv) in curve.jump_times.iter().zip(&curve.survival) {
        acc += (t.min(tau) - prev.min(tau)).max(0.0) * s;
        prev = t;
        s = surv;
    }
    acc += (tau - prev.min(tau)).max(0.0) * s;
    Ok(RmstValue { value: acc, tau_beyond_support: tau > curve.max_observed_time })
}

/// Step integral of the product-limit estimate over `[0, tau]` computed
/// directly from a (time, event) sample. Used by the naive leave-one-out
/// path.
fn step_integral(times: &[f64], events: &[bool], tau: f64) -> f64 {
    let order = sorted_order(times, events);
    let rows = risk_rows(times, events, &order);
    let mut acc = 0.0;
    let mut prev = 0.0f64;
    let mut s = 1.0;
    for row in &rows {
        acc += (row.time.min(tau) - prev.min(tau)).max(0.0) * s;
        s *= 1.0 - row.d as f64 / row.n as f64;
        prev = row.time;
    }
    acc + (tau - prev.min(tau)).max(0.0) * s
}

/// Jackknife pseudo-observations of the restricted mean at `tau`:
/// `y_i = n·∫₀^τ Ŝ − (n−1)·∫₀^τ Ŝ^{−i}`.
///
/// The mean of the pseudo-values reproduces the full-sample integral
/// exactly whenever `tau` does not exceed the last observed time; beyond
/// the support the leave-one-out tails extrapolate differently and the
/// identity degrades.
pub fn pseudo_obs(data: &Dataset, tau: f64, algorithm: Algorithm) -> Result<PseudoObsVector> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, found: data.len() });
    }
    let n_events = data.n_events();
    if n_events < 1 {
        return Err(Error::InsufficientEvents { needed: 1, found: n_events });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::DomainError(format!("pseudo_obs: tau must be > 0, got {tau}")));
    }
    let times: Vec<f64> = data.records().iter().map(|r| r.time).collect();
    let events: Vec<bool> = data.records().iter().map(|r| r.event).collect();
    let values = match algorithm {
        Algorithm::Naive => pseudo_naive(&times, &events, tau),
        Algorithm::Fast => pseudo_fast(&times, &events, tau),
    };
    Ok(PseudoObsVector { tau, values })
}

/// O(n²) reference: rebuild the leave-one-out Kaplan-Meier integral per
/// subject.
fn pseudo_naive(times: &[f64], events: &[bool], tau: f64) -> Vec<f64> {
    let n = times.len();
    let nf = n as f64;
    let full = step_integral(times, events, tau);
    let mut loo_times = Vec::with_capacity(n - 1);
    let mut loo_events = Vec::with_capacity(n - 1);
    (0..n)
        .map(|i| {
            loo_times.clear();
            loo_events.clear();
            for j in 0..n {
                if j != i {
                    loo_times.push(times[j]);
                    loo_events.push(events[j]);
                }
            }
            nf * full - (nf - 1.0) * step_integral(&loo_times, &loo_events, tau)
        })
        .collect()
}

/// One-sweep leave-one-out evaluation.
///
/// Removing subject `i` shrinks the risk set by one at every event time
/// `t_j ≤ T_i` and, when `i` is an event, removes one event at its own
/// time. All leave-one-out integrals therefore share three families of
/// partial products over the full-sample risk rows:
///
/// - `f_j = 1 − d_j/n_j` (unchanged factors),
/// - `h_j = 1 − d_j/(n_j−1)` (subject at risk, not the event),
/// - `g_j = 1 − (d_j−1)/(n_j−1)` (the subject's own event time),
///
/// combined through prefix products/sums of `h` and suffix sums of
/// `f`-weighted areas, giving O(1) work per subject after the sort.
fn pseudo_fast(times: &[f64], events: &[bool], tau: f64) -> Vec<f64> {
    let n = times.len();
    let nf = n as f64;
    let order = sorted_order(times, events);
    let rows = risk_rows(times, events, &order);
    let k = rows.len();

    // Segment areas clipped to [0, tau]: a[0] is [0, t_1), a[j] starts at t_j.
    let mut a = vec![0.0; k + 1];
    for j in 0..=k {
        let lo = if j == 0 { 0.0 } else { rows[j - 1].time };
        let hi = if j == k { f64::INFINITY } else { rows[j].time };
        a[j] = (hi.min(tau) - lo.min(tau)).max(0.0);
    }

    let mut f = vec![0.0; k + 1]; // 1-indexed
    let mut h = vec![1.0; k + 1];
    let mut g = vec![1.0; k + 1];
    for (j, row) in rows.iter().enumerate() {
        let (d, n_j) = (row.d as f64, row.n as f64);
        f[j + 1] = 1.0 - d / n_j;
        if row.n >= 2 {
            h[j + 1] = 1.0 - d / (n_j - 1.0);
            g[j + 1] = 1.0 - (d - 1.0) / (n_j - 1.0);
        }
    }

    // Q[j] = Π_{l≤j} h_l, U[j] = Σ_{l≤j} a_l·Q_l.
    let mut prefix_q = vec![1.0; k + 1];
    let mut prefix_u = vec![0.0; k + 1];
    for j in 1..=k {
        prefix_q[j] = prefix_q[j - 1] * h[j];
        prefix_u[j] = prefix_u[j - 1] + a[j] * prefix_q[j];
    }
    // R[m] = a_m + f_{m+1}·R[m+1]: tail area from t_m under unchanged factors.
    let mut suffix_r = vec![0.0; k + 2];
    for m in (1..=k).rev() {
        let fnext = if m < k { f[m + 1] } else { 0.0 };
        suffix_r[m] = a[m] + fnext * suffix_r[m + 1];
    }
    let full = a[0] + f[1] * suffix_r[1];

    let jump_times: Vec<f64> = rows.iter().map(|r| r.time).collect();
    times
        .iter()
        .zip(events)
        .map(|(&t_i, &e_i)| {
            // number of event times with t_j ≤ T_i (the subject is at risk
            // at all of them under the events-first tie convention)
            let r = jump_times.partition_point(|&jt| jt <= t_i);
            let loo = if e_i {
                // the subject's own event time is the r-th event time
                prefix_u[r - 1] + prefix_q[r - 1] * g[r] * suffix_r[r]
            } else if r < k {
                prefix_u[r] + prefix_q[r] * f[r + 1] * suffix_r[r + 1]
            } else {
                prefix_u[k]
            };
            nf * full - (nf - 1.0) * (a[0] + loo)
        })
        .collect()
}

/// Restriction-time fallback: the requested `tau` unless the last observed
/// time in either arm is smaller, in which case the minimum over arms of
/// the maximum observed time.
pub fn resolve_tau(data: &Dataset, requested_tau: f64) -> Result<f64> {
    if requested_tau.is_nan() || requested_tau <= 0.0 {
        return Err(Error::DomainError(format!(
            "resolve_tau: requested tau must be > 0, got {requested_tau}"
        )));
    }
    let (max0, max1) = match (data.max_time_in_arm(0), data.max_time_in_arm(1)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::SingleArm),
    };
    Ok(requested_tau.min(max0.min(max1)))
}

/// Data-driven restriction-time candidates:
/// (a) the 90th percentile of the observed times,
/// (b) per `se_limit`, the largest event time whose Greenwood standard
///     error stays at or below the limit,
/// (c) the minimum over arms of the maximum observed time.
///
/// Rules that cannot be satisfied are omitted with a note.
pub fn tau_candidates(data: &Dataset, se_limits: &[f64]) -> Result<TauCandidates> {
    let curve = km_fit(data)?;
    let mut out = TauCandidates::default();

    let mut observed: Vec<f64> = data.records().iter().map(|r| r.time).collect();
    observed.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.candidates.push(TauCandidate { rule: "p90".into(), tau: quantile_sorted(&observed, 0.9) });

    for &limit in se_limits {
        let rule = format!("se_{limit}");
        let candidate = curve
            .jump_times
            .iter()
            .zip(&curve.se)
            .filter(|&(_, &se)| se <= limit)
            .map(|(&t, _)| t)
            .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |m| m.max(t))));
        match candidate {
            Some(tau) => out.candidates.push(TauCandidate { rule, tau }),
            None => out.notes.push(format!(
                "rule {rule} omitted: no event time has Greenwood SE <= {limit}"
            )),
        }
    }

    match resolve_tau(data, f64::MAX) {
        Ok(tau) => out.candidates.push(TauCandidate { rule: "min_max_arm".into(), tau }),
        Err(Error::SingleArm) => out
            .notes
            .push("rule min_max_arm omitted: only one treatment arm present".into()),
        Err(e) => return Err(e),
    }
    Ok(out)
}
