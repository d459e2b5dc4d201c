//! File-based ingestion of daily rate series (FRED-style two-column CSV)
//! and option-chain snapshots.
//!
//! # Rate series
//!
//! ```text
//! DATE,VALUE          <- optional header on the first line
//! 2021-05-25,0.0524   <- decimal rate
//! 2021-05-26,5.24%    <- percent suffix, divided by 100
//! 2021-05-27,.        <- missing value, dropped and counted
//! ```
//!
//! # Option chains
//!
//! ```text
//! # as_of: 2021-06-02
//! # underlying: E6Z21
//! expiry,strike,right,price
//! 2021-12-03,1.32,put,0.0947
//! ```
//!
//! Lines starting with `#` are comments, except the two metadata keys above.
//! `right` accepts `put`/`p`/`call`/`c` in any case. Fields are separated by
//! commas and surrounding whitespace is ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{AnalyticsError, QuoteComparison};
use crate::pricing::{OptionRight, PriceResult};

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no observations in input")]
    EmptySeries,
    #[error("line {line}: duplicate quote for ({expiry}, {strike}, {right:?})")]
    DuplicateQuote {
        line: usize,
        expiry: NaiveDate,
        strike: f64,
        right: OptionRight,
    },
    #[error("no price result for strike {0}")]
    MissingStrike(f64),
    #[error("strike {0} is quoted for more than one expiry")]
    AmbiguousStrike(f64),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

fn parse_err(line: usize, message: impl Into<String>) -> MarketDataError {
    MarketDataError::Parse {
        line,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, MarketDataError> {
    fs::read_to_string(path).map_err(|source| MarketDataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Units of unsuffixed values in a rate file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateUnits {
    /// `0.0524` means 5.24%.
    #[default]
    Decimal,
    /// `5.24` means 5.24%, as in FRED exports.
    Percent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RateLoadOptions {
    pub units: RateUnits,
    /// Also accept `MM/DD/YYYY` and `YYYY/MM/DD` dates.
    pub lenient_dates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub series_id: String,
    /// Strictly increasing dates with annualized decimal rates.
    pub observations: Vec<(NaiveDate, f64)>,
    /// Rows dropped for carrying the missing-value marker `.`.
    pub dropped: usize,
    /// Whether any value carried a `%` suffix.
    pub percent_parsed: bool,
}

impl RateSeries {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn last(&self) -> Option<(NaiveDate, f64)> {
        self.observations.last().copied()
    }

    /// Last observation on or before `date`.
    pub fn rate_as_of(&self, date: NaiveDate) -> Option<f64> {
        let idx = self.observations.partition_point(|(d, _)| *d <= date);
        idx.checked_sub(1).map(|i| self.observations[i].1)
    }

    /// Serializes as decimal rates under a `DATE,VALUE` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("DATE,VALUE\n");
        for (d, r) in &self.observations {
            let _ = writeln!(out, "{},{}", d.format("%Y-%m-%d"), r);
        }
        out
    }
}

fn parse_date(s: &str, lenient: bool) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().or_else(|| {
        lenient
            .then(|| {
                NaiveDate::parse_from_str(s, "%m/%d/%Y")
                    .or_else(|_| NaiveDate::parse_from_str(s, "%Y/%m/%d"))
                    .ok()
            })
            .flatten()
    })
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

pub fn parse_rate_csv(text: &str, series_id: &str, options: RateLoadOptions) -> Result<RateSeries, MarketDataError> {
    let mut observations: Vec<(NaiveDate, f64)> = Vec::new();
    let mut dropped = 0;
    let mut percent_parsed = false;
    let mut first_content = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let is_first = std::mem::replace(&mut first_content, false);
        if fields.len() != 2 {
            return Err(parse_err(line_no, format!("expected 2 fields, found {}", fields.len())));
        }
        let Some(date) = parse_date(fields[0], options.lenient_dates) else {
            if is_first && fields[0].chars().any(|c| c.is_ascii_alphabetic()) {
                continue; // header
            }
            return Err(parse_err(line_no, format!("invalid date {:?}", fields[0])));
        };
        let value = fields[1];
        if value == "." {
            dropped += 1;
            continue;
        }
        let rate = if let Some(pct) = value.strip_suffix('%') {
            percent_parsed = true;
            parse_percent(pct.trim(), line_no)?
        } else {
            let x = parse_number(value, line_no)?;
            match options.units {
                RateUnits::Decimal => x,
                RateUnits::Percent => parse_percent(value, line_no)?,
            }
        };
        if let Some((prev, _)) = observations.last() {
            if date <= *prev {
                return Err(parse_err(line_no, format!("date {date} does not follow {prev}")));
            }
        }
        observations.push((date, rate));
    }
    if observations.is_empty() {
        return Err(MarketDataError::EmptySeries);
    }
    Ok(RateSeries {
        series_id: series_id.to_string(),
        observations,
        dropped,
        percent_parsed,
    })
}

fn parse_number(s: &str, line: usize) -> Result<f64, MarketDataError> {
    let x: f64 = s
        .parse()
        .map_err(|_| parse_err(line, format!("invalid number {s:?}")))?;
    if !x.is_finite() {
        return Err(parse_err(line, format!("non-finite number {s:?}")));
    }
    Ok(x)
}

/// Percent to decimal by shifting the decimal exponent, so `-0.55` becomes
/// exactly the double nearest to `-0.0055`.
fn parse_percent(s: &str, line: usize) -> Result<f64, MarketDataError> {
    if s.contains(['e', 'E']) {
        return Ok(parse_number(s, line)? / 100.0);
    }
    parse_number(s, line)?;
    parse_number(&format!("{s}e-2"), line)
}

pub fn load_rate_csv(path: &Path, series_id: &str, options: RateLoadOptions) -> Result<RateSeries, MarketDataError> {
    parse_rate_csv(&read(path)?, series_id, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainQuote {
    pub expiry: NaiveDate,
    pub strike: f64,
    pub right: OptionRight,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    pub as_of: Option<NaiveDate>,
    pub underlying: Option<String>,
    /// Quotes in file order.
    pub quotes: Vec<ChainQuote>,
}

impl OptionChain {
    /// Quotes of one right, in file order.
    pub fn of_right(&self, right: OptionRight) -> impl Iterator<Item = &ChainQuote> {
        self.quotes.iter().filter(move |q| q.right == right)
    }

    /// Years from `as_of` to `expiry` on an actual/365 basis.
    pub fn year_fraction(&self, expiry: NaiveDate) -> Option<f64> {
        self.as_of.map(|a| (expiry - a).num_days() as f64 / 365.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(d) = self.as_of {
            let _ = writeln!(out, "# as_of: {}", d.format("%Y-%m-%d"));
        }
        if let Some(u) = &self.underlying {
            let _ = writeln!(out, "# underlying: {u}");
        }
        out.push_str("expiry,strike,right,price\n");
        for q in &self.quotes {
            let right = match q.right {
                OptionRight::Put => "put",
                OptionRight::Call => "call",
            };
            let _ = writeln!(out, "{},{},{},{}", q.expiry.format("%Y-%m-%d"), q.strike, right, q.price);
        }
        out
    }
}

fn parse_right(s: &str) -> Option<OptionRight> {
    match s.to_ascii_lowercase().as_str() {
        "put" | "p" => Some(OptionRight::Put),
        "call" | "c" => Some(OptionRight::Call),
        _ => None,
    }
}

pub fn parse_chain_csv(text: &str) -> Result<OptionChain, MarketDataError> {
    let mut chain = OptionChain {
        as_of: None,
        underlying: None,
        quotes: Vec::new(),
    };
    let mut first_content = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "as_of" => {
                        chain.as_of = Some(
                            parse_date(value, false)
                                .ok_or_else(|| parse_err(line_no, format!("invalid as_of date {value:?}")))?,
                        )
                    }
                    "underlying" => chain.underlying = Some(value.to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let fields = split_fields(line);
        let is_first = std::mem::replace(&mut first_content, false);
        if is_first && fields.first().is_some_and(|f| f.eq_ignore_ascii_case("expiry")) {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_err(line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let expiry =
            parse_date(fields[0], false).ok_or_else(|| parse_err(line_no, format!("invalid expiry {:?}", fields[0])))?;
        let strike = parse_number(fields[1], line_no)?;
        if !(strike > 0.0) {
            return Err(parse_err(line_no, format!("strike {strike} must be positive")));
        }
        let right =
            parse_right(fields[2]).ok_or_else(|| parse_err(line_no, format!("invalid right {:?}", fields[2])))?;
        let price = parse_number(fields[3], line_no)?;
        if price < 0.0 {
            return Err(parse_err(line_no, format!("price {price} must be non-negative")));
        }
        if chain
            .quotes
            .iter()
            .any(|q| q.expiry == expiry && q.strike == strike && q.right == right)
        {
            return Err(MarketDataError::DuplicateQuote {
                line: line_no,
                expiry,
                strike,
                right,
            });
        }
        chain.quotes.push(ChainQuote {
            expiry,
            strike,
            right,
            price,
        });
    }
    if chain.quotes.is_empty() {
        return Err(MarketDataError::EmptySeries);
    }
    if let Some(as_of) = chain.as_of {
        if let Some(q) = chain.quotes.iter().find(|q| q.expiry <= as_of) {
            return Err(parse_err(0, format!("expiry {} is not after as_of {as_of}", q.expiry)));
        }
    }
    Ok(chain)
}

pub fn load_chain_csv(path: &Path) -> Result<OptionChain, MarketDataError> {
    parse_chain_csv(&read(path)?)
}

fn same_strike(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Aligns the chain's quotes of `right` with model prices keyed by strike,
/// keeping the chain's order.
pub fn build_comparison(
    chain: &OptionChain,
    right: OptionRight,
    results: &[(f64, PriceResult)],
) -> Result<QuoteComparison<f64>, MarketDataError> {
    let quotes: Vec<&ChainQuote> = chain.of_right(right).collect();
    if quotes.is_empty() {
        return Err(MarketDataError::EmptySeries);
    }
    let (mut strikes, mut simulated, mut market) = (Vec::new(), Vec::new(), Vec::new());
    for (i, q) in quotes.iter().enumerate() {
        if quotes[..i].iter().any(|p| same_strike(p.strike, q.strike)) {
            return Err(MarketDataError::AmbiguousStrike(q.strike));
        }
        let (_, r) = results
            .iter()
            .find(|(k, _)| same_strike(*k, q.strike))
            .ok_or(MarketDataError::MissingStrike(q.strike))?;
        strikes.push(q.strike);
        simulated.push(r.price);
        market.push(q.price);
    }
    Ok(QuoteComparison::new(strikes, simulated, market)?)
}

/// Reads a two-column `strike,price` ladder (header optional), as written by
/// the pricing front-end.
pub fn parse_price_ladder(text: &str) -> Result<Vec<(f64, f64)>, MarketDataError> {
    let mut out = Vec::new();
    let mut first_content = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let is_first = std::mem::replace(&mut first_content, false);
        if is_first && fields.first().is_some_and(|f| f.eq_ignore_ascii_case("strike")) {
            continue;
        }
        if fields.len() < 2 {
            return Err(parse_err(line_no, "expected strike,price"));
        }
        out.push((parse_number(fields[0], line_no)?, parse_number(fields[1], line_no)?));
    }
    if out.is_empty() {
        return Err(MarketDataError::EmptySeries);
    }
    Ok(out)
}

pub fn load_price_ladder(path: &Path) -> Result<Vec<(f64, f64)>, MarketDataError> {
    parse_price_ladder(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn two_rows() {
        let s = parse_rate_csv("2021-05-25,0.05\n2021-05-26,0.06\n", "rd", RateLoadOptions::default()).unwrap();
        assert_eq!(s.observations, vec![(d(2021, 5, 25), 0.05), (d(2021, 5, 26), 0.06)]);
        assert_eq!(s.dropped, 0);
        assert!(!s.percent_parsed);
    }

    #[test]
    fn missing_values_and_percent() {
        let text = "DATE,VALUE\n2021-05-24,5.24%\n2021-05-25,.\n2021-05-26,0.0524\n";
        let s = parse_rate_csv(text, "rd", RateLoadOptions::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dropped, 1);
        assert!(s.percent_parsed);
        assert!((s.observations[0].1 - 0.0524).abs() < 1e-17);
        let pct = parse_rate_csv("2021-05-26,-0.55", "rd", RateLoadOptions {
            units: RateUnits::Percent,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(pct.observations[0].1, -0.0055);
    }

    #[test]
    fn rate_errors_carry_line_numbers() {
        let opts = RateLoadOptions::default();
        assert!(matches!(parse_rate_csv("", "x", opts), Err(MarketDataError::EmptySeries)));
        assert!(matches!(parse_rate_csv("DATE,VALUE\n2021-01-01,.\n", "x", opts), Err(MarketDataError::EmptySeries)));
        assert!(matches!(
            parse_rate_csv("2021-01-01,0.1\n2021-01-02,abc\n", "x", opts),
            Err(MarketDataError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_rate_csv("2021-01-02,0.1\n2021-01-01,0.1\n", "x", opts),
            Err(MarketDataError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_rate_csv("05/26/2021,0.1\n", "x", opts),
            Err(MarketDataError::Parse { line: 1, .. })
        ));
        let lenient = RateLoadOptions {
            lenient_dates: true,
            ..opts
        };
        assert_eq!(parse_rate_csv("05/26/2021,0.1\n", "x", lenient).unwrap().observations[0].0, d(2021, 5, 26));
    }

    #[test]
    fn as_of_lookup() {
        let s = parse_rate_csv("2021-05-24,0.01\n2021-05-26,0.02\n", "x", RateLoadOptions::default()).unwrap();
        assert_eq!(s.rate_as_of(d(2021, 5, 23)), None);
        assert_eq!(s.rate_as_of(d(2021, 5, 24)), Some(0.01));
        assert_eq!(s.rate_as_of(d(2021, 5, 25)), Some(0.01));
        assert_eq!(s.rate_as_of(d(2021, 6, 1)), Some(0.02));
    }

    #[test]
    fn chain_parsing() {
        let c = parse_chain_csv("# as_of: 2021-06-02\n# underlying: E6Z21\nexpiry,strike,right,price\n2021-12-03,1.32,put,0.0947\n")
            .unwrap();
        assert_eq!(c.as_of, Some(d(2021, 6, 2)));
        assert_eq!(c.underlying.as_deref(), Some("E6Z21"));
        assert_eq!(c.quotes[0].strike, 1.32);
        assert_eq!(c.quotes[0].right, OptionRight::Put);
        assert_eq!(c.quotes[0].price, 0.0947);
        assert_eq!(c.year_fraction(d(2021, 12, 3)), Some(184.0 / 365.0));

        let both = parse_chain_csv("2021-12-03,1.32,P,0.09\n2021-12-03,1.32,C,0.01\n").unwrap();
        assert_eq!(both.quotes.len(), 2);
        assert!(matches!(
            parse_chain_csv("2021-12-03,1.32,put,0.09\n2021-12-03,1.32,put,0.08\n"),
            Err(MarketDataError::DuplicateQuote { line: 2, .. })
        ));
        assert!(matches!(parse_chain_csv(""), Err(MarketDataError::EmptySeries)));
        assert!(parse_chain_csv("2021-12-03,-1,put,0.09\n").is_err());
        assert!(parse_chain_csv("2021-12-03,1.3,straddle,0.09\n").is_err());
        assert!(parse_chain_csv("# as_of: 2022-01-01\n2021-12-03,1.3,put,0.09\n").is_err());
    }

    #[test]
    fn round_trips() {
        let s = parse_rate_csv("2021-05-24,-0.0055\n2021-05-25,0.1234567890123\n", "x", RateLoadOptions::default())
            .unwrap();
        let again = parse_rate_csv(&s.to_csv(), "x", RateLoadOptions::default()).unwrap();
        assert_eq!(s, again);
        let c = parse_chain_csv("# as_of: 2021-06-02\n2021-12-03,1.32,put,0.0947\n2021-09-03,1.2,call,0.1\n").unwrap();
        assert_eq!(parse_chain_csv(&c.to_csv()).unwrap(), c);
    }

    fn result(price: f64) -> PriceResult {
        PriceResult {
            price,
            std_error: 0.0,
            n_paths: 1,
            exercise_fraction_per_step: vec![],
            degenerate_steps: vec![],
        }
    }

    #[test]
    fn comparison_alignment() {
        let c = parse_chain_csv("2021-12-03,1.32,put,0.0947\n2021-12-03,1.33,call,0.01\n").unwrap();
        let q = build_comparison(&c, OptionRight::Put, &[(1.32, result(0.0937))]).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.simulated, vec![0.0937]);
        assert!(matches!(
            build_comparison(&c, OptionRight::Call, &[(1.32, result(0.0937))]),
            Err(MarketDataError::MissingStrike(_))
        ));
        let two = parse_chain_csv("2021-12-03,1.32,put,0.09\n2022-03-03,1.32,put,0.1\n").unwrap();
        assert!(matches!(
            build_comparison(&two, OptionRight::Put, &[(1.32, result(0.1))]),
            Err(MarketDataError::AmbiguousStrike(_))
        ));
    }

    #[test]
    fn ladders() {
        assert_eq!(parse_price_ladder("strike,price\n1.32,0.0937\n").unwrap(), vec![(1.32, 0.0937)]);
        assert!(parse_price_ladder("strike,price\n").is_err());
    }
}
