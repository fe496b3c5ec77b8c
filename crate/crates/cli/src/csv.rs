//! The optimum CSV schema, written and read back.

use csv::{ReaderBuilder, StringRecord, Writer};
use teleprobe::{Constraint, SweepRow};

use crate::CliError;

pub const HEADER: &str =
    "r,n_total,eta1,eta2,n_th,unit_gains,m_opt,alpha,g_x,g_p,sigma,sigma_coh,enhancement,enhancement_db,feasible";

const SIGNIFICANT: usize = 12;

/// `%.12g`-style formatting: fixed notation for moderate exponents, otherwise
/// scientific, trailing zeros dropped either way.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT as i32).contains(&exp) {
        let decimals = (SIGNIFICANT as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub r: f64,
    pub n_total: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub n_th: f64,
    pub unit_gains: bool,
    /// Absent for rows without a feasible optimum.
    pub m_opt: Option<usize>,
    pub alpha: f64,
    pub g_x: f64,
    pub g_p: f64,
    pub sigma: f64,
    pub sigma_coh: f64,
    pub enhancement: f64,
    pub enhancement_db: f64,
    pub feasible: bool,
}

impl CsvRow {
    pub fn from_sweep(row: &SweepRow) -> Self {
        let (c, o) = (&row.constraint, &row.optimum);
        let feasible = row.error.is_none() && o.feasible;
        Self {
            r: c.r,
            n_total: c.n_total_budget,
            eta1: c.eta1,
            eta2: c.eta2,
            n_th: c.n_th,
            unit_gains: c.unit_gains,
            m_opt: feasible.then_some(o.m),
            alpha: o.alpha,
            g_x: o.g_x,
            g_p: o.g_p,
            sigma: o.sigma,
            sigma_coh: o.sigma_coh,
            enhancement: o.enhancement,
            enhancement_db: o.enhancement_db,
            feasible,
        }
    }

    /// The constraint this row was optimized under (`m_max` is not recorded).
    pub fn constraint(&self) -> Constraint {
        Constraint::new(self.r, self.n_total)
            .with_losses(self.eta1, self.eta2)
            .with_thermal(self.n_th)
            .with_unit_gains(self.unit_gains)
    }

    /// The record's fields in header order.
    pub fn fields(&self) -> Vec<String> {
        let mut fields: Vec<String> = [self.r, self.n_total, self.eta1, self.eta2, self.n_th]
            .into_iter()
            .map(format_number)
            .collect();
        fields.push(self.unit_gains.to_string());
        fields.push(self.m_opt.map_or_else(|| "NaN".to_string(), |m| m.to_string()));
        fields.extend(
            [
                self.alpha,
                self.g_x,
                self.g_p,
                self.sigma,
                self.sigma_coh,
                self.enhancement,
                self.enhancement_db,
            ]
            .into_iter()
            .map(format_number),
        );
        fields.push(self.feasible.to_string());
        fields
    }

    pub fn from_record(record: &StringRecord) -> Result<Self, CliError> {
        let names: Vec<&str> = HEADER.split(',').collect();
        if record.len() != names.len() {
            return Err(CliError::Invalid(format!(
                "csv row has {} fields, expected {}",
                record.len(),
                names.len()
            )));
        }
        fn field<T: std::str::FromStr>(record: &StringRecord, names: &[&str], i: usize) -> Result<T, CliError> {
            record[i]
                .parse()
                .map_err(|_| CliError::Invalid(format!("csv {}: cannot parse '{}'", names[i], &record[i])))
        }
        let m_opt = match &record[6] {
            "NaN" => None,
            _ => Some(field(record, &names, 6)?),
        };
        Ok(Self {
            r: field(record, &names, 0)?,
            n_total: field(record, &names, 1)?,
            eta1: field(record, &names, 2)?,
            eta2: field(record, &names, 3)?,
            n_th: field(record, &names, 4)?,
            unit_gains: field(record, &names, 5)?,
            m_opt,
            alpha: field(record, &names, 7)?,
            g_x: field(record, &names, 8)?,
            g_p: field(record, &names, 9)?,
            sigma: field(record, &names, 10)?,
            sigma_coh: field(record, &names, 11)?,
            enhancement: field(record, &names, 12)?,
            enhancement_db: field(record, &names, 13)?,
            feasible: field(record, &names, 14)?,
        })
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Invalid(format!("csv: {e}"))
}

pub fn write_csv(rows: &[SweepRow]) -> Result<String, CliError> {
    let mut writer = Writer::from_writer(Vec::new());
    writer.write_record(HEADER.split(',')).map_err(csv_error)?;
    for row in rows {
        writer
            .write_record(CsvRow::from_sweep(row).fields())
            .map_err(csv_error)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Invalid(format!("csv: {}", e.error())))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, CliError> {
    let mut reader = ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?;
    if header.iter().ne(HEADER.split(',')) {
        return Err(CliError::Invalid("csv header does not match the optimum schema".into()));
    }
    reader
        .records()
        .map(|record| CsvRow::from_record(&record.map_err(csv_error)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use teleprobe::Optimum;

    #[test]
    fn numbers_use_twelve_significant_digits() {
        assert_eq!(format_number(1.5), "1.5");
        assert_eq!(format_number(100.0), "100");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(std::f64::consts::PI), "3.14159265359");
        assert_eq!(format_number(-std::f64::consts::E * 1e-3), "-0.00271828182846");
        assert_eq!(format_number(1.0 / 3.0 * 1e-7), "3.33333333333e-8");
        assert_eq!(format_number(123456789012345.0), "1.23456789012e14");
        assert_eq!(format_number(999999999999.9), "1e12");
        assert_eq!(format_number(99999.99999999999), "100000");
        assert_eq!(format_number(f64::NAN), "NaN");
        assert_eq!(format_number(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn formatted_numbers_round_trip_to_twelve_digits() {
        for x in [1.0 / 7.0, 6.02214076e23, -1.602e-19, 0.1 + 0.2, 12345.678901234] {
            let back: f64 = format_number(x).parse().unwrap();
            assert!((back - x).abs() <= 5e-12 * x.abs(), "{x} -> {back}");
        }
    }

    #[test]
    fn row_round_trip() {
        let row = SweepRow {
            constraint: Constraint::new(1.5, 100.0).with_losses(0.9, 1.0),
            optimum: Optimum {
                m: 7,
                alpha: 2.5,
                g_x: 1.0,
                g_p: 1.0,
                sigma: 0.01,
                sigma_coh: 0.0527,
                enhancement: 5.27,
                enhancement_db: 14.4,
                feasible: true,
                gain_at_boundary: false,
            },
            error: None,
        };
        let text = write_csv(std::slice::from_ref(&row)).unwrap();
        assert!(text.starts_with(HEADER));
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed, vec![CsvRow::from_sweep(&row)]);
        assert_eq!(parsed[0].m_opt, Some(7));
    }

    #[test]
    fn failed_rows_are_marked() {
        let row = SweepRow {
            constraint: Constraint::new(1.0, 10.0),
            optimum: Optimum::infeasible(),
            error: Some("boom".into()),
        };
        let text = write_csv(&[row]).unwrap();
        assert!(text.ends_with(",false\n"), "{text}");
        let back = parse_csv(&text).unwrap().remove(0);
        assert_eq!(back.m_opt, None);
        assert!(!back.feasible && back.sigma.is_nan());
    }

    #[test]
    fn header_is_checked() {
        assert!(parse_csv("r,n_total\n1,2\n").is_err());
        assert!(parse_csv(&format!("{HEADER}\n1,2,3\n")).is_err());
    }
}
