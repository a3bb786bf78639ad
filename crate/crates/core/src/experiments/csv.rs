//! CSV emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::runner::TrialRecord;
use crate::error::{Error, Result};

pub const HEADER: &str =
    "sweep_name,sweep_value,trial,power_mw,power_dbm,mean_sinr_db,feasible,pilot_slots";

/// Nine significant digits.
fn num(x: f64) -> String {
    format!("{x:.8e}")
}

/// Writes the header and one row per record to `out`.
pub fn write_csv<W: Write>(records: &[TrialRecord], sweep_name: &str, mut out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to write".into()));
    }
    writeln!(out, "{HEADER}")?;
    for r in records {
        let p = r.power_mw();
        writeln!(
            out,
            "{sweep_name},{},{},{},{},{},{},{}",
            num(r.sweep_value),
            r.trial,
            num(p),
            num(10.0 * p.log10()),
            num(r.mean_sinr_db()),
            r.feasible,
            r.pilot_slots
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[TrialRecord], sweep_name: &str, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    write_csv(records, sweep_name, BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(power: f64) -> TrialRecord {
        TrialRecord {
            sweep_value: 30.0,
            trial: 7,
            transmit_power_mw: Some(power),
            received_power_mw: None,
            sinrs: vec![10.0, 10.0],
            feasible: power.is_finite(),
            pilot_slots: 62,
        }
    }

    fn render(records: &[TrialRecord]) -> String {
        let mut buf = Vec::new();
        write_csv(records, "N", &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn one_record_two_lines() {
        let text = render(&[record(1.0)]);
        assert!(text.ends_with('\n'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], HEADER);
        let cols: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cols[0], "N");
        assert_eq!(cols[4].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[5].parse::<f64>().unwrap(), 10.0);
        assert_eq!(cols[6], "true");
        assert_eq!(cols[7], "62");
    }

    #[test]
    fn values_round_trip_to_nine_digits() {
        let values = [
            1.0 / 3.0,
            2.718281828459045e-7,
            123456.789012,
            9.99999999949e-3,
        ];
        for v in values {
            let text = render(&[record(v)]);
            let field = text.lines().nth(1).unwrap().split(',').nth(3).unwrap();
            let back: f64 = field.parse().unwrap();
            // half a unit in the ninth significant digit
            assert!((back - v).abs() <= 5e-9 * v.abs(), "{v} -> {back}");
        }
    }

    #[test]
    fn infeasible_rows_and_empty_input() {
        let text = render(&[record(f64::INFINITY)]);
        let row = text.lines().nth(1).unwrap();
        assert!(row.contains(",inf,inf,") && row.contains(",false,"));
        assert!(write_csv(&[], "N", Vec::new()).is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&[record(1.0)], "N", &dir.path().join("missing/x.csv")).is_err());
        let ok = dir.path().join("x.csv");
        emit_csv(&[record(1.0)], "N", &ok).unwrap();
        assert_eq!(std::fs::read_to_string(ok).unwrap(), render(&[record(1.0)]));
    }
}
