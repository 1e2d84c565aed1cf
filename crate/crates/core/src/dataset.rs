//! Survival dataset container and CSV ingestion.
//!
//! The on-disk format is a UTF-8 CSV with header `time,event,arm,<covariate
//! names...>`, `event` and `arm` in {0,1}, decimal point `.`. Rows with
//! missing or unparseable cells are rejected (complete-case analysis) and
//! counted, not silently dropped.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// One subject: observed time (years), event indicator (`true` = event
/// observed, `false` = right-censored), treatment arm, and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub time: f64,
    pub event: bool,
    pub arm: u8,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, arm: u8, covariates: Vec<f64>) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidRecord(format!(
                "time must be finite and non-negative, got {time}"
            )));
        }
        if arm > 1 {
            return Err(Error::InvalidRecord(format!("arm must be 0 or 1, got {arm}")));
        }
        if covariates.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidRecord("non-finite covariate".into()));
        }
        Ok(Self { time, event, arm, covariates })
    }
}

/// An in-memory trial dataset. Construction validates that every record has
/// one value per covariate name.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<SurvivalRecord>,
    covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(records: Vec<SurvivalRecord>, covariate_names: Vec<String>) -> Result<Self> {
        let p = covariate_names.len();
        for (i, rec) in records.iter().enumerate() {
            if rec.covariates.len() != p {
                return Err(Error::InvalidRecord(format!(
                    "record {i} has {} covariate(s); expected {p}",
                    rec.covariates.len()
                )));
            }
        }
        Ok(Self { records, covariate_names })
    }

    /// Dataset without covariates, from parallel time/event/arm slices.
    pub fn from_arrays(times: &[f64], events: &[bool], arms: &[u8]) -> Result<Self> {
        if times.len() != events.len() || times.len() != arms.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: events.len().min(arms.len()) });
        }
        let records = times
            .iter()
            .zip(events)
            .zip(arms)
            .map(|((&t, &e), &a)| SurvivalRecord::new(t, e, a, Vec::new()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(records, Vec::new())
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn censor_rate(&self) -> f64 {
        1.0 - self.n_events() as f64 / self.len() as f64
    }

    pub fn has_both_arms(&self) -> bool {
        let mut seen = [false, false];
        for r in &self.records {
            seen[r.arm as usize] = true;
        }
        seen[0] && seen[1]
    }

    /// Largest observed time (event or censoring) in an arm, if present.
    pub fn max_time_in_arm(&self, arm: u8) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.arm == arm)
            .map(|r| r.time)
            .fold(None, |acc, t| Some(acc.map_or(t, |m: f64| m.max(t))))
    }

    /// Subset of records in one arm, covariates carried along.
    pub fn arm_subset(&self, arm: u8) -> Result<Dataset> {
        let records: Vec<SurvivalRecord> =
            self.records.iter().filter(|r| r.arm == arm).cloned().collect();
        Dataset::new(records, self.covariate_names.clone())
    }

    /// Index of a named covariate.
    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    /// The complete-case check used by the inference entry points: at least
    /// two observed events, so that the Kaplan-Meier integral is not
    /// degenerate.
    pub fn check_events_for_inference(&self) -> Result<()> {
        let found = self.n_events();
        if found < 2 {
            return Err(Error::InsufficientEvents { needed: 2, found });
        }
        Ok(())
    }

    /// Read the CSV dataset format. Returns the dataset and the number of
    /// rejected (incomplete or unparseable) rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Dataset, usize)> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "time" || cols[1] != "event" || cols[2] != "arm" {
            return Err(Error::InvalidRecord(format!(
                "header must start with 'time,event,arm', got '{}'",
                cols.join(",")
            )));
        }
        let covariate_names: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
        let p = covariate_names.len();

        let mut records = Vec::new();
        let mut rejected = 0usize;
        for row in rdr.records() {
            let row = row?;
            match parse_row(&row, p) {
                Some(rec) => records.push(rec),
                None => rejected += 1,
            }
        }
        Ok((Dataset::new(records, covariate_names)?, rejected))
    }

    pub fn read_csv_path(path: &std::path::Path) -> Result<(Dataset, usize)> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }

    /// Write the CSV dataset format.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "event".to_string(), "arm".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        wtr.write_record(&header)?;
        for rec in &self.records {
            let mut row = vec![
                format!("{}", rec.time),
                if rec.event { "1".into() } else { "0".into() },
                format!("{}", rec.arm),
            ];
            row.extend(rec.covariates.iter().map(|z| format!("{z}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn parse_row(row: &csv::StringRecord, p: usize) -> Option<SurvivalRecord> {
    if row.len() != p + 3 {
        return None;
    }
    let time: f64 = row.get(0)?.trim().parse().ok()?;
    let event = match row.get(1)?.trim() {
        "0" => false,
        "1" => true,
        _ => return None,
    };
    let arm: u8 = match row.get(2)?.trim() {
        "0" => 0,
        "1" => 1,
        _ => return None,
    };
    let mut covariates = Vec::with_capacity(p);
    for cell in row.iter().skip(3) {
        covariates.push(cell.trim().parse().ok()?);
    }
    SurvivalRecord::new(time, event, arm, covariates).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_csv() {
        let data = Dataset::new(
            vec![
                SurvivalRecord::new(1.5, true, 0, vec![0.2, 1.0]).unwrap(),
                SurvivalRecord::new(2.0, false, 1, vec![-0.4, 0.0]).unwrap(),
            ],
            vec!["z1".into(), "z2".into()],
        )
        .unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let (back, rejected) = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(rejected, 0);
        assert_eq!(back, data);
    }

    #[test]
    fn rejects_incomplete_rows() {
        let csv = "time,event,arm,z1\n1.0,1,0,0.5\n2.0,1,1,\n3.0,2,0,0.1\nx,1,0,0.2\n4.0,0,1,0.3\n";
        let (data, rejected) = Dataset::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(rejected, 3);
    }

    #[test]
    fn header_must_match() {
        let csv = "t,event,arm\n1.0,1,0\n";
        assert!(Dataset::read_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn record_validation() {
        assert!(SurvivalRecord::new(-1.0, true, 0, vec![]).is_err());
        assert!(SurvivalRecord::new(f64::NAN, true, 0, vec![]).is_err());
        assert!(SurvivalRecord::new(1.0, true, 2, vec![]).is_err());
        assert!(SurvivalRecord::new(1.0, true, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn covariate_length_checked() {
        let recs = vec![
            SurvivalRecord::new(1.0, true, 0, vec![1.0]).unwrap(),
            SurvivalRecord::new(2.0, true, 1, vec![]).unwrap(),
        ];
        assert!(Dataset::new(recs, vec!["z".into()]).is_err());
    }
}
