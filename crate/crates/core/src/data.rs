//! Daily return panels: French data-library text files, generic CSV, and
//! synthetic panels simulated from the model.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate, Weekday};

use crate::error::{Error, Result};
use crate::matrix_csv::format_number;
use crate::model::{ModelParams, TRADING_DAYS_PER_YEAR};
use crate::simulate::simulate_paths;

/// Calendar date stored as the integer `YYYYMMDD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TradingDate(u32);

impl TradingDate {
    pub fn from_ymd(y: i32, m: u32, d: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(y, m, d).map(Self::from)
    }

    pub fn from_yyyymmdd(v: u32) -> Option<Self> {
        Self::from_ymd((v / 10_000) as i32, (v / 100) % 100, v % 100)
    }

    pub fn as_u32(self) -> u32 {
        self.0
    }

    pub fn naive(self) -> NaiveDate {
        NaiveDate::from_ymd_opt((self.0 / 10_000) as i32, (self.0 / 100) % 100, self.0 % 100)
            .expect("validated at construction")
    }
}

impl From<NaiveDate> for TradingDate {
    fn from(d: NaiveDate) -> Self {
        Self(d.year() as u32 * 10_000 + d.month() * 100 + d.day())
    }
}

impl fmt::Display for TradingDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08}", self.0)
    }
}

impl FromStr for TradingDate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("expected YYYYMMDD, got {s:?}"));
        }
        let v: u32 = s.parse().map_err(|_| format!("bad date {s:?}"))?;
        Self::from_yyyymmdd(v).ok_or_else(|| format!("invalid calendar date {s:?}"))
    }
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    start: TradingDate,
    end: TradingDate,
}

impl DateRange {
    pub fn new(start: TradingDate, end: TradingDate) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidParameter(format!(
                "date range {start}..{end} is reversed"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> TradingDate {
        self.start
    }

    pub fn end(&self) -> TradingDate {
        self.end
    }

    pub fn contains(&self, d: TradingDate) -> bool {
        self.start <= d && d <= self.end
    }
}

impl FromStr for DateRange {
    type Err = String;

    /// `YYYYMMDD-YYYYMMDD` or `YYYYMMDD:YYYYMMDD`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once(['-', ':'])
            .ok_or_else(|| format!("expected START-END, got {s:?}"))?;
        let range = DateRange::new(a.parse()?, b.parse()?).map_err(|e| e.to_string())?;
        Ok(range)
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Week of 1987-10-19.
pub fn black_monday_week() -> DateRange {
    DateRange {
        start: TradingDate(19871019),
        end: TradingDate(19871023),
    }
}

/// Dated matrix of daily simple returns (decimal) with a missing-value mask.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    dates: Vec<TradingDate>,
    assets: Vec<String>,
    /// row-major, `dates.len() x assets.len()`
    returns: Vec<f64>,
    missing: Vec<bool>,
}

impl ReturnPanel {
    /// Missing cells may hold any value; they are stored as NaN.
    pub fn new(
        dates: Vec<TradingDate>,
        assets: Vec<String>,
        mut returns: Vec<f64>,
        missing: Vec<bool>,
    ) -> Result<Self> {
        if dates.is_empty() || assets.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let cells = dates.len() * assets.len();
        if returns.len() != cells || missing.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                found: returns.len().min(missing.len()),
            });
        }
        for (k, w) in dates.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::NonMonotonicDates {
                    line: k + 2,
                    date: w[1],
                });
            }
        }
        for (v, &m) in returns.iter_mut().zip(&missing) {
            if m {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self {
            dates,
            assets,
            returns,
            missing,
        })
    }

    /// Panel without missing values, from per-date rows.
    pub fn from_rows(
        dates: Vec<TradingDate>,
        assets: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let n = assets.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let returns: Vec<f64> = rows.iter().flatten().copied().collect();
        let missing = vec![false; returns.len()];
        Self::new(dates, assets, returns, missing)
    }

    pub fn dates(&self) -> &[TradingDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Returns on date index `t`; masked cells are NaN.
    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.n_assets();
        &self.returns[t * n..(t + 1) * n]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.n_assets();
        &mut self.returns[t * n..(t + 1) * n]
    }

    pub fn missing_row(&self, t: usize) -> &[bool] {
        let n = self.n_assets();
        &self.missing[t * n..(t + 1) * n]
    }

    pub fn is_missing(&self, t: usize, asset: usize) -> bool {
        self.missing[t * self.n_assets() + asset]
    }

    /// The first masked cell in row `t`, as a [`Error::MissingData`].
    pub fn check_row_complete(&self, t: usize) -> Result<()> {
        match self.missing_row(t).iter().position(|&m| m) {
            Some(a) => Err(Error::MissingData {
                date: self.dates[t],
                asset: self.assets[a].clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn drop_assets(&self, names: &[String]) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n_assets())
            .filter(|&a| !names.iter().any(|n| n == &self.assets[a]))
            .collect();
        let mut returns = Vec::with_capacity(keep.len() * self.n_dates());
        let mut missing = Vec::with_capacity(keep.len() * self.n_dates());
        for t in 0..self.n_dates() {
            for &a in &keep {
                returns.push(self.row(t)[a]);
                missing.push(self.is_missing(t, a));
            }
        }
        Self::new(
            self.dates.clone(),
            keep.iter().map(|&a| self.assets[a].clone()).collect(),
            returns,
            missing,
        )
    }

    /// Rows with `start <= date <= end`.
    pub fn slice(&self, range: &DateRange) -> Result<Self> {
        let rows: Vec<usize> = (0..self.n_dates())
            .filter(|&t| range.contains(self.dates[t]))
            .collect();
        if rows.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let n = self.n_assets();
        let (first, last) = (rows[0], rows[rows.len() - 1] + 1);
        Self::new(
            self.dates[first..last].to_vec(),
            self.assets.clone(),
            self.returns[first * n..last * n].to_vec(),
            self.missing[first * n..last * n].to_vec(),
        )
    }

    /// Canonical CSV: header `date,<assets>`, decimal returns, empty cells for missing.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for a in &self.assets {
            out.push(',');
            out.push_str(a);
        }
        out.push('\n');
        for t in 0..self.n_dates() {
            out.push_str(&self.dates[t].to_string());
            for (a, v) in self.row(t).iter().enumerate() {
                out.push(',');
                if !self.is_missing(t, a) {
                    out.push_str(&format_number(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

impl PartialEq for ReturnPanel {
    /// Masked cells compare equal regardless of their stored value.
    fn eq(&self, other: &Self) -> bool {
        self.dates == other.dates
            && self.assets == other.assets
            && self.missing == other.missing
            && self
                .returns
                .iter()
                .zip(&other.returns)
                .zip(&self.missing)
                .all(|((a, b), &m)| m || a == b)
    }
}

pub fn slice(panel: &ReturnPanel, range: &DateRange) -> Result<ReturnPanel> {
    panel.slice(range)
}

#[derive(Debug, Clone, Default)]
pub struct FrenchOptions {
    pub drop_assets: Vec<String>,
    pub date_range: Option<DateRange>,
}

fn is_missing_code(v: f64) -> bool {
    v == -99.99 || v == -999.0
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn looks_like_data_row(fields: &[&str]) -> bool {
    fields
        .first()
        .is_some_and(|f| f.len() == 8 && f.bytes().all(|b| b.is_ascii_digit()))
}

/// Parses the French data-library daily layout.
///
/// Free-text preamble lines are skipped. The header is the last non-blank line
/// before the first data row; a leading blank header cell (CSV variant) is
/// ignored. Parsing stops at the first blank or non-data line after the data
/// starts, so only the first table (value-weighted returns) is read. Values are
/// percents; `-99.99` and `-999` mark missing data.
pub fn parse_french(text: &str, options: &FrenchOptions) -> Result<ReturnPanel> {
    let mut header: Option<(usize, Vec<String>)> = None;
    let mut dates = Vec::new();
    let mut returns = Vec::new();
    let mut missing = Vec::new();
    let mut in_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        let fields = split_fields(line);
        if !looks_like_data_row(&fields) {
            if in_data {
                break;
            }
            if !line.is_empty() {
                let names: Vec<String> = fields
                    .iter()
                    .filter(|f| !f.is_empty())
                    .map(|f| f.to_string())
                    .collect();
                header = Some((line_no, names));
            }
            continue;
        }
        in_data = true;
        let (header_line, names) = header.as_ref().ok_or(Error::Parse {
            line: line_no,
            message: "data row before any header row".into(),
        })?;
        let values = &fields[1..];
        if values.len() != names.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "{} values but header on line {header_line} names {} assets",
                    values.len(),
                    names.len()
                ),
            });
        }
        let date: TradingDate = fields[0].parse().map_err(|m| Error::Parse {
            line: line_no,
            message: m,
        })?;
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::NonMonotonicDates {
                    line: line_no,
                    date,
                });
            }
        }
        dates.push(date);
        for v in values {
            let x: f64 = v.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not a number: {v:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value {v:?}"),
                });
            }
            if is_missing_code(x) {
                returns.push(f64::NAN);
                missing.push(true);
            } else {
                returns.push(x / 100.0);
                missing.push(false);
            }
        }
    }
    let assets = match header {
        Some((_, names)) if !dates.is_empty() => names,
        _ => return Err(Error::EmptyPanel),
    };
    let mut panel = ReturnPanel::new(dates, assets, returns, missing)?;
    if !options.drop_assets.is_empty() {
        panel = panel.drop_assets(&options.drop_assets)?;
    }
    if let Some(range) = &options.date_range {
        panel = panel.slice(range)?;
    }
    Ok(panel)
}

pub fn load_french(path: impl AsRef<Path>, options: &FrenchOptions) -> Result<ReturnPanel> {
    let text = std::fs::read_to_string(path)?;
    parse_french(&text, options)
}

/// Generic CSV: header `date,<assets>`, decimal returns. Empty, `NA` and `NaN`
/// cells are missing.
pub fn parse_csv(text: &str) -> Result<ReturnPanel> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyPanel)?;
    let assets: Vec<String> = header
        .split(',')
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    let mut dates = Vec::new();
    let mut returns = Vec::new();
    let mut missing = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != assets.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected {} fields, found {}",
                    assets.len() + 1,
                    fields.len()
                ),
            });
        }
        let date: TradingDate = fields[0].parse().map_err(|m| Error::Parse {
            line: line_no,
            message: m,
        })?;
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::NonMonotonicDates {
                    line: line_no,
                    date,
                });
            }
        }
        dates.push(date);
        for v in &fields[1..] {
            if v.is_empty() || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan") {
                returns.push(f64::NAN);
                missing.push(true);
                continue;
            }
            let x: f64 = v.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not a number: {v:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value {v:?}"),
                });
            }
            returns.push(x);
            missing.push(false);
        }
    }
    ReturnPanel::new(dates, assets, returns, missing)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<ReturnPanel> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// `count` consecutive weekdays starting at `start` (or the next weekday).
pub fn weekday_calendar(start: TradingDate, count: usize) -> Vec<TradingDate> {
    let mut d = start.naive();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(TradingDate::from(d));
        }
        d = d + Days::new(1);
    }
    out
}

/// Daily simple returns from an exact simulation of the model at
/// `dt = 1 / 252`, dated on consecutive weekdays from 2000-01-03.
pub fn synthetic_panel(params: &ModelParams, days: usize, seed: u64) -> Result<ReturnPanel> {
    if days < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 days, got {days}"
        )));
    }
    let paths = simulate_paths(params, days as f64 / TRADING_DAYS_PER_YEAR, days, 1, seed)?;
    let n = params.n_assets();
    let mut returns = Vec::with_capacity(days * n);
    for step in 0..days {
        let prev = paths.prices(0, step);
        let next = paths.prices(0, step + 1);
        returns.extend(prev.iter().zip(next).map(|(a, b)| b / a - 1.0));
    }
    let dates = weekday_calendar(TradingDate(20000103), days);
    let assets = (1..=n).map(|i| format!("A{i}")).collect();
    ReturnPanel::new(dates, assets, returns, vec![false; days * n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::VolMatrix;
    use nalgebra::DMatrix;

    const FIXTURE: &str = "\
  This file was created using the 202401 CRSP database.
  Missing data are indicated by -99.99 or -999.

Average Value Weighted Returns -- Daily
        Agric   Food   Hlth
19870101   1.00  -2.50   0.10
19870102  -99.99   0.25  -999
19870105   0.00   1.00   2.00

Average Equal Weighted Returns -- Daily
        Agric   Food   Hlth
19870101   9.00   9.00   9.00
";

    #[test]
    fn parses_first_table_with_missing_codes() {
        let p = parse_french(FIXTURE, &FrenchOptions::default()).unwrap();
        assert_eq!(p.assets(), &["Agric", "Food", "Hlth"]);
        assert_eq!(p.n_dates(), 3);
        assert_eq!(p.row(0), &[0.01, -0.025, 0.001]);
        assert!(p.is_missing(1, 0) && p.is_missing(1, 2) && !p.is_missing(1, 1));
        assert!(p.check_row_complete(1).is_err());
        assert_eq!(p.row(1)[1], 0.0025);
    }

    #[test]
    fn drops_assets_and_slices() {
        let opts = FrenchOptions {
            drop_assets: vec!["Hlth".into()],
            date_range: Some("19870102-19870105".parse().unwrap()),
        };
        let p = parse_french(FIXTURE, &opts).unwrap();
        assert_eq!(p.assets(), &["Agric", "Food"]);
        assert_eq!(p.dates()[0].as_u32(), 19870102);
        assert_eq!(p.n_dates(), 2);
    }

    #[test]
    fn csv_variant_with_blank_header_cell() {
        let text = ",Agric,Food\n19870101,1.00,-2.50\n19870102,0.5,0.5\n";
        let p = parse_french(text, &FrenchOptions::default()).unwrap();
        assert_eq!(p.assets(), &["Agric", "Food"]);
        assert_eq!(p.row(0), &[0.01, -0.025]);
    }

    #[test]
    fn rejects_out_of_order_dates() {
        let text = "  A  B\n19870102 1 2\n19870101 1 2\n19870105 1 2\n";
        assert!(matches!(
            parse_french(text, &FrenchOptions::default()),
            Err(Error::NonMonotonicDates { line: 3, .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "  A  B\n19870102 1 x\n";
        assert!(matches!(
            parse_french(text, &FrenchOptions::default()),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = "  A  B\n19870102 1\n";
        assert!(matches!(
            parse_french(text, &FrenchOptions::default()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert_eq!(
            parse_french("just text\n", &FrenchOptions::default()),
            Err(Error::EmptyPanel)
        );
    }

    #[test]
    fn slice_cases() {
        let p = parse_french(FIXTURE, &FrenchOptions::default()).unwrap();
        let full = DateRange::new(p.dates()[0], p.dates()[2]).unwrap();
        assert_eq!(p.slice(&full).unwrap(), p);
        let one = DateRange::new(p.dates()[1], p.dates()[1]).unwrap();
        assert_eq!(slice(&p, &one).unwrap().n_dates(), 1);
        let disjoint: DateRange = "19900101-19900201".parse().unwrap();
        assert_eq!(p.slice(&disjoint), Err(Error::EmptyPanel));
    }

    #[test]
    fn csv_roundtrip_with_missing() {
        let p = parse_french(FIXTURE, &FrenchOptions::default()).unwrap();
        let back = parse_csv(&p.to_csv_string()).unwrap();
        assert_eq!(back.dates(), p.dates());
        assert_eq!(back.assets(), p.assets());
        for t in 0..p.n_dates() {
            for a in 0..p.n_assets() {
                assert_eq!(back.is_missing(t, a), p.is_missing(t, a));
                if !p.is_missing(t, a) {
                    assert_eq!(back.row(t)[a].to_bits(), p.row(t)[a].to_bits());
                }
            }
        }
    }

    #[test]
    fn date_parsing() {
        assert!("19870229".parse::<TradingDate>().is_err());
        assert!("19880229".parse::<TradingDate>().is_ok());
        assert!("1987011".parse::<TradingDate>().is_err());
        assert!("19871020-19871019".parse::<DateRange>().is_err());
        assert!(black_monday_week().contains(TradingDate::from_yyyymmdd(19871019).unwrap()));
    }

    #[test]
    fn weekday_calendar_skips_weekends() {
        let cal = weekday_calendar(TradingDate::from_yyyymmdd(20240105).unwrap(), 3);
        let got: Vec<u32> = cal.iter().map(|d| d.as_u32()).collect();
        assert_eq!(got, vec![20240105, 20240108, 20240109]);
    }

    #[test]
    fn synthetic_deterministic_limit() {
        let sigma = VolMatrix::user(DMatrix::identity(2, 2) * 1e-12).unwrap();
        let params = ModelParams::with_unit_prices(sigma, 0.2, 0.03).unwrap();
        let p = synthetic_panel(&params, 30, 4).unwrap();
        let want = (0.03f64 / 252.0).exp() - 1.0;
        for t in 0..30 {
            for &r in p.row(t) {
                assert!((r - want).abs() < 1e-9);
            }
        }
        assert_eq!(p, synthetic_panel(&params, 30, 4).unwrap());
    }

    #[test]
    fn synthetic_daily_volatility() {
        let sigma = VolMatrix::user(DMatrix::from_element(1, 1, 0.2)).unwrap();
        let params = ModelParams::with_unit_prices(sigma, 0.1, 0.03).unwrap();
        let p = synthetic_panel(&params, 100_000, 17).unwrap();
        let xs: Vec<f64> = (0..p.n_dates()).map(|t| p.row(t)[0]).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
        let want = 0.2 / 252f64.sqrt();
        assert!((var.sqrt() / want - 1.0).abs() < 0.03);
    }
}
