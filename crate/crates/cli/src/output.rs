//! CSV and JSONL emission. Floats carry 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use circleflow::verify::VerificationReport;
use serde::Serialize;
use serde_json::value::RawValue;

pub const SCHEMA_LINE: &str = "# circleflow-schema v1";

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV file opened with the schema comment line and a header row.
pub struct Table {
    inner: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        writeln!(file, "{SCHEMA_LINE}")?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct ReportLine<'a> {
    check: &'a str,
    replicates: usize,
    passed: bool,
    statistics: Vec<(&'a str, Box<RawValue>)>,
    failing_seeds: &'a [u64],
}

/// One report as a JSON object on a single line. Statistics keep their
/// order and are written as `[name, value]` pairs; non-finite values become null.
pub fn report_json(report: &VerificationReport) -> Result<String> {
    let statistics = report
        .statistics
        .iter()
        .map(|(k, v)| {
            let text = if v.is_finite() { float(*v) } else { "null".to_string() };
            Ok((k.as_str(), RawValue::from_string(text)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let line = ReportLine {
        check: &report.check,
        replicates: report.replicates,
        passed: report.passed,
        statistics,
        failing_seeds: &report.failing_seeds,
    };
    Ok(serde_json::to_string(&line)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(-2.0), "-2.0000000000000000e0");
        assert_eq!(float(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn report_lines_are_valid_json() {
        let mut r = VerificationReport::new("mass", 3);
        r.stat("max_mass_error", 2.5e-16).stat("ratio", f64::NAN);
        let line = report_json(&r).unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["check"], "mass");
        assert_eq!(v["statistics"][0][0], "max_mass_error");
        assert_eq!(v["statistics"][0][1].as_f64(), Some(2.5e-16));
        assert!(v["statistics"][1][1].is_null());
    }
}
