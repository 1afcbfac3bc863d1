//! Per-option daily quote histories: CSV ingest, validation and windowing.
//!
//! Time is counted in trading days. Consecutive records are one time unit
//! apart whatever the calendar gap between them.

use std::io::{Read, Write};

use chrono::NaiveDate;

use crate::error::DataError;

/// Column layout of the history CSV, in order.
pub const CSV_HEADER: [&str; 8] = [
    "date",
    "opt_bid",
    "opt_ask",
    "opt_last",
    "impl_vol",
    "stock_bid",
    "stock_ask",
    "stock_last",
];

/// Minimum number of records a history must hold to produce one forecast.
pub const MIN_HISTORY: usize = 3;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// One trading day of option and underlying quotes, taken just before the close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub opt_bid: f64,
    pub opt_ask: f64,
    pub opt_last: f64,
    /// Annualized implied volatility.
    pub impl_vol: f64,
    pub stock_bid: f64,
    pub stock_ask: f64,
    pub stock_last: f64,
}

impl DailyRecord {
    /// Checks positivity and uncrossed quotes.
    pub fn validate(&self) -> Result<(), DataError> {
        let fields = [
            ("opt_bid", self.opt_bid),
            ("opt_ask", self.opt_ask),
            ("opt_last", self.opt_last),
            ("impl_vol", self.impl_vol),
            ("stock_bid", self.stock_bid),
            ("stock_ask", self.stock_ask),
            ("stock_last", self.stock_last),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(self.invalid(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if self.opt_bid >= self.opt_ask {
            return Err(self.invalid(format!(
                "crossed option market: opt_bid {} >= opt_ask {}",
                self.opt_bid, self.opt_ask
            )));
        }
        if self.stock_bid >= self.stock_ask {
            return Err(self.invalid(format!(
                "crossed stock market: stock_bid {} >= stock_ask {}",
                self.stock_bid, self.stock_ask
            )));
        }
        Ok(())
    }

    fn invalid(&self, message: String) -> DataError {
        DataError::Invalid {
            date: self.date,
            message,
        }
    }
}

/// Validated, date-ordered quote history of a single option.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionHistory {
    option_id: String,
    records: Vec<DailyRecord>,
}

impl OptionHistory {
    pub fn new(option_id: impl Into<String>, records: Vec<DailyRecord>) -> Result<Self, DataError> {
        if records.len() < MIN_HISTORY {
            return Err(DataError::TooShort {
                found: records.len(),
                required: MIN_HISTORY,
            });
        }
        for (k, rec) in records.iter().enumerate() {
            rec.validate()?;
            if k > 0 && records[k - 1].date >= rec.date {
                return Err(DataError::Unordered {
                    // header occupies line 1
                    line: k as u64 + 2,
                    date: rec.date,
                    previous: records[k - 1].date,
                });
            }
        }
        Ok(Self {
            option_id: option_id.into(),
            records,
        })
    }

    pub fn option_id(&self) -> &str {
        &self.option_id
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.records.binary_search_by_key(&date, |r| r.date).ok()
    }

    /// Window whose "today" is record `index`.
    pub fn window_at(&self, index: usize) -> Result<Window, DataError> {
        window_at(self, index)
    }
}

/// Three consecutive trading days mapped to t = -2τ, -τ, 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub day_minus2: DailyRecord,
    pub day_minus1: DailyRecord,
    pub day_0: DailyRecord,
}

impl Window {
    pub fn today(&self) -> NaiveDate {
        self.day_0.date
    }

    pub fn days(&self) -> [&DailyRecord; 3] {
        [&self.day_minus2, &self.day_minus1, &self.day_0]
    }
}

/// Returns the records at `index - 2`, `index - 1`, `index`.
pub fn window_at(history: &OptionHistory, index: usize) -> Result<Window, DataError> {
    if index < 2 || index >= history.len() {
        return Err(DataError::WindowOutOfRange {
            index,
            len: history.len(),
        });
    }
    let r = &history.records;
    Ok(Window {
        day_minus2: r[index - 2],
        day_minus1: r[index - 1],
        day_0: r[index],
    })
}

/// Parses and validates a history from CSV.
pub fn parse_history<R: Read>(option_id: impl Into<String>, source: R) -> Result<OptionHistory, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != CSV_HEADER {
        return Err(DataError::Malformed {
            line: 1,
            message: format!("expected header `{}`, found `{}`", CSV_HEADER.join(","), found.join(",")),
        });
    }

    let mut records = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let fallback_line = k as u64 + 2;
        let row = row.map_err(|e| csv_error(e, fallback_line))?;
        let line = row.position().map_or(fallback_line, |p| p.line());
        if row.len() != CSV_HEADER.len() {
            return Err(DataError::Malformed {
                line,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&row[0], DATE_FORMAT).map_err(|e| DataError::Malformed {
            line,
            message: format!("bad date `{}`: {e}", &row[0]),
        })?;
        let mut num = [0.0; 7];
        for (slot, (name, text)) in num.iter_mut().zip(CSV_HEADER[1..].iter().zip(row.iter().skip(1))) {
            *slot = text.parse::<f64>().map_err(|_| DataError::Malformed {
                line,
                message: format!("bad number `{text}` in column {name}"),
            })?;
        }
        let rec = DailyRecord {
            date,
            opt_bid: num[0],
            opt_ask: num[1],
            opt_last: num[2],
            impl_vol: num[3],
            stock_bid: num[4],
            stock_ask: num[5],
            stock_last: num[6],
        };
        rec.validate()?;
        if let Some(prev) = records.last().map(|r: &DailyRecord| r.date) {
            if prev >= date {
                return Err(DataError::Unordered {
                    line,
                    date,
                    previous: prev,
                });
            }
        }
        records.push(rec);
    }
    OptionHistory::new(option_id, records)
}

/// Writes a history in the same CSV layout `parse_history` reads.
pub fn write_history<W: Write>(history: &OptionHistory, sink: W) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(CSV_HEADER).map_err(|e| csv_error(e, 0))?;
    for r in &history.records {
        writer
            .write_record([
                r.date.format(DATE_FORMAT).to_string(),
                r.opt_bid.to_string(),
                r.opt_ask.to_string(),
                r.opt_last.to_string(),
                r.impl_vol.to_string(),
                r.stock_bid.to_string(),
                r.stock_ask.to_string(),
                r.stock_last.to_string(),
            ])
            .map_err(|e| csv_error(e, 0))?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(err: csv::Error, fallback_line: u64) -> DataError {
    let line = err.position().map_or(fallback_line, |p| p.line());
    if let csv::ErrorKind::Io(_) = err.kind() {
        match err.into_kind() {
            csv::ErrorKind::Io(io) => return DataError::Io(io),
            _ => unreachable!(),
        }
    }
    DataError::Malformed {
        line,
        message: err.to_string(),
    }
}
