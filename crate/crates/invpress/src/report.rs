//! JSON envelope and CSV formats.

use std::io::Write;
use std::path::Path;

use invpress_core::geometry::ConvexHull;
use invpress_core::model::QuantizedControl;
use invpress_core::pressure::PressureReport;
use invpress_core::simulate::ExponentSpectrum;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Common wrapper of every JSON report. `timestamp` is the only field that
/// changes between runs of the same configuration and seed.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub timestamp: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<&'a RunConfig>,
    pub result: T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'a str, config: Option<&'a RunConfig>, result: T) -> Self {
        let timestamp = time::OffsetDateTime::now_utc()
            .format(&time::format_description::well_known::Rfc3339)
            .unwrap_or_default();
        Envelope {
            schema_version: SCHEMA_VERSION,
            tool: "invpress",
            version: env!("CARGO_PKG_VERSION"),
            command,
            timestamp,
            config,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn csv_string(
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `n,tau,cover_size,a_tau,log_a_over_tau,slope_so_far`
pub fn series_csv(report: &PressureReport) -> Result<String, CliError> {
    csv_string(
        &header(&[
            "n",
            "tau",
            "cover_size",
            "a_tau",
            "log_a_over_tau",
            "slope_so_far",
        ]),
        report.series.iter().map(|p| {
            vec![
                p.n.to_string(),
                p.tau.to_string(),
                p.cover_size.to_string(),
                p.a_tau.to_string(),
                p.log_a_over_tau.to_string(),
                p.slope_so_far.to_string(),
            ]
        }),
    )
}

/// One row `x1,…,xd` per hull vertex.
pub fn hull_csv(hull: &ConvexHull) -> Result<String, CliError> {
    let names: Vec<String> = (1..=hull.dim()).map(|i| format!("x{i}")).collect();
    csv_string(
        &names,
        hull.vertices()
            .map(|v| v.iter().map(|x| x.to_string()).collect()),
    )
}

/// `rho,multiplicity`
pub fn spectrum_csv(spec: &ExponentSpectrum) -> Result<String, CliError> {
    csv_string(
        &header(&["rho", "multiplicity"]),
        spec.exponents
            .iter()
            .map(|e| vec![e.rho.to_string(), e.multiplicity.to_string()]),
    )
}

/// Reads a control file: a first row `delta,<step>`, then one row of
/// `input_dim` values per interval. Lines starting with `#` are skipped.
pub fn read_control(text: &str, input_dim: usize) -> Result<QuantizedControl, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = r.records();
    let bad =
        |line: usize, msg: String| CliError::Usage(format!("control file, record {line}: {msg}"));
    let first = records
        .next()
        .ok_or_else(|| bad(1, "empty file".into()))??;
    if first.len() != 2 || &first[0] != "delta" {
        return Err(bad(1, "expected `delta,<step>`".into()));
    }
    let step: f64 = first[1]
        .parse()
        .map_err(|_| bad(1, format!("invalid step `{}`", &first[1])))?;
    let mut values = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != input_dim {
            return Err(bad(
                i + 2,
                format!("expected {input_dim} value(s), found {}", rec.len()),
            ));
        }
        for field in rec.iter() {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| bad(i + 2, format!("invalid number `{field}`")))?,
            );
        }
    }
    if values.is_empty() {
        return Err(bad(2, "no control values".into()));
    }
    QuantizedControl::unchecked(step, input_dim, values)
        .map_err(|e| CliError::Usage(format!("control file: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_file_round_trip() {
        let w = read_control("delta,0.5\n# comment\n1\n-1\n0.25\n", 1).unwrap();
        assert_eq!(w.step(), 0.5);
        assert_eq!(w.values(), &[1.0, -1.0, 0.25]);
        assert!(read_control("step,0.5\n1\n", 1).is_err());
        assert!(read_control("delta,0.5\n1,2\n", 1).is_err());
    }

    #[test]
    fn hull_rows() {
        let h = ConvexHull::interval(-1.0, 1.0);
        assert_eq!(hull_csv(&h).unwrap(), "x1\n-1\n1\n");
    }
}
