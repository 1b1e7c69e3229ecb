//! Channel parsing and merging.
//!
//! Two source layouts are supported: newline-delimited JSON with
//! Coinbase-style field names, and a normalized CSV interchange format so
//! that data from any venue can enter the pipeline. Decimal prices and
//! sizes are converted to integer ticks/lots through the dataset manifest;
//! a value that is not an exact multiple of its increment is malformed.
//!
//! JSON match records carry the taker side in `side` and the resting maker
//! in `maker_order_id`. `received` messages and `done`/`filled` (already
//! consumed by their match records) do not mutate the book and are ignored
//! with a count.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::types::{DatasetManifest, EventKind, OrderEvent, Price, Side, Size, Timestamp};

pub const FULL_CSV_HEADER: &str = "ts_micros,kind,side,price_ticks,size_units,order_id";
pub const TICKER_CSV_HEADER: &str =
    "ts_micros,best_bid_ticks,best_ask_ticks,last_price_ticks,bid_size_units,ask_size_units";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Report malformed lines and continue.
    #[default]
    Lenient,
    /// Abort on the first malformed line.
    Strict,
}

/// Per-match snapshot of the best quotes. Sizes are optional because some
/// feeds (the LUNA capture) do not publish them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickerRecord {
    pub ts: Timestamp,
    pub best_bid: Price,
    pub best_ask: Price,
    pub last_price: Price,
    pub bid_size: Option<Size>,
    pub ask_size: Option<Size>,
}

impl TickerRecord {
    pub fn has_sizes(&self) -> bool {
        self.bid_size.is_some() && self.ask_size.is_some()
    }
}

/// An order event with the latest ticker snapshot at or before it.
#[derive(Debug, Clone)]
pub struct EnrichedEvent {
    pub event: OrderEvent,
    /// None for events preceding the first ticker record.
    pub ticker: Option<TickerRecord>,
}

/// What lenient parsing tolerated.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub lines_read: usize,
    pub records_emitted: usize,
    pub malformed: u64,
    /// First few malformed lines for diagnostics.
    pub malformed_samples: Vec<(usize, String)>,
    pub ignored_types: BTreeMap<String, u64>,
    pub clock_skew: u64,
}

impl ParseReport {
    fn note_malformed(&mut self, line: usize, reason: String) {
        self.malformed += 1;
        if self.malformed_samples.len() < 32 {
            self.malformed_samples.push((line, reason));
        }
    }

    fn note_ignored(&mut self, kind: &str) {
        *self.ignored_types.entry(kind.to_string()).or_insert(0) += 1;
    }
}

#[derive(Debug, Deserialize)]
struct RawMessage {
    #[serde(rename = "type")]
    kind: String,
    time: Option<String>,
    side: Option<String>,
    price: Option<String>,
    size: Option<String>,
    remaining_size: Option<String>,
    new_size: Option<String>,
    order_id: Option<String>,
    maker_order_id: Option<String>,
    reason: Option<String>,
    best_bid: Option<String>,
    best_ask: Option<String>,
    best_bid_size: Option<String>,
    best_ask_size: Option<String>,
}

fn parse_rfc3339_micros(s: &str) -> Result<Timestamp> {
    let dt = chrono::DateTime::parse_from_rfc3339(s)
        .map_err(|e| Error::InvalidValue(format!("bad timestamp {s:?}: {e}")))?;
    Ok(Timestamp::from_micros(dt.timestamp_micros()))
}

fn get<'a>(field: &'a Option<String>, name: &str) -> Result<&'a str> {
    field
        .as_deref()
        .ok_or_else(|| Error::InvalidValue(format!("missing field {name:?}")))
}

/// Streaming reader over full-channel records; yields normalized events in
/// file order.
pub struct FullChannelReader<R: BufRead> {
    lines: std::io::Lines<R>,
    format: SourceFormat,
    manifest: DatasetManifest,
    mode: ParseMode,
    line_no: usize,
    saw_header: bool,
    last_ts: Option<i64>,
    report: ParseReport,
    failed: bool,
}

impl<R: BufRead> FullChannelReader<R> {
    pub fn new(reader: R, format: SourceFormat, manifest: DatasetManifest, mode: ParseMode) -> Self {
        FullChannelReader {
            lines: reader.lines(),
            format,
            manifest,
            mode,
            line_no: 0,
            saw_header: false,
            last_ts: None,
            report: ParseReport::default(),
            failed: false,
        }
    }

    pub fn report(&self) -> &ParseReport {
        &self.report
    }

    fn parse_jsonl(&mut self, line: &str) -> Result<Option<OrderEvent>> {
        let raw: RawMessage =
            serde_json::from_str(line).map_err(|e| Error::InvalidValue(format!("bad JSON: {e}")))?;
        let make = |kind: EventKind, price: &str, size: &str, order_id: &str| -> Result<OrderEvent> {
            Ok(OrderEvent {
                ts: parse_rfc3339_micros(get(&raw.time, "time")?)?,
                kind,
                side: Side::parse(get(&raw.side, "side")?)?,
                price: self.manifest.price_to_ticks(price)?,
                size: self.manifest.size_to_units(size)?,
                order_id: order_id.to_string(),
            })
        };
        match raw.kind.as_str() {
            "open" => Ok(Some(make(
                EventKind::Open,
                get(&raw.price, "price")?,
                get(&raw.remaining_size, "remaining_size")?,
                get(&raw.order_id, "order_id")?,
            )?)),
            "done" => match raw.reason.as_deref() {
                Some("canceled") | Some("cancelled") => Ok(Some(make(
                    EventKind::Cancel,
                    get(&raw.price, "price")?,
                    get(&raw.remaining_size, "remaining_size")?,
                    get(&raw.order_id, "order_id")?,
                )?)),
                // Filled orders were already drained by their matches.
                Some("filled") => {
                    self.report.note_ignored("done/filled");
                    Ok(None)
                }
                other => Err(Error::InvalidValue(format!("unknown done reason {other:?}"))),
            },
            "match" => Ok(Some(make(
                EventKind::Match,
                get(&raw.price, "price")?,
                get(&raw.size, "size")?,
                get(&raw.maker_order_id, "maker_order_id")?,
            )?)),
            "change" => Ok(Some(make(
                EventKind::ChangeSize,
                get(&raw.price, "price")?,
                get(&raw.new_size, "new_size")?,
                get(&raw.order_id, "order_id")?,
            )?)),
            "received" => {
                self.report.note_ignored("received");
                Ok(None)
            }
            other => {
                self.report.note_ignored(other);
                Ok(None)
            }
        }
    }

    fn parse_csv(&mut self, line: &str) -> Result<Option<OrderEvent>> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::InvalidValue(format!("expected 6 fields, got {}", fields.len())));
        }
        let ts = fields[0]
            .parse::<i64>()
            .map_err(|e| Error::InvalidValue(format!("bad ts_micros {:?}: {e}", fields[0])))?;
        let kind = EventKind::parse(fields[1])?;
        let side = Side::parse(fields[2])?;
        let price = fields[3]
            .parse::<i64>()
            .map_err(|e| Error::InvalidValue(format!("bad price_ticks {:?}: {e}", fields[3])))?;
        let size = fields[4]
            .parse::<u64>()
            .map_err(|e| Error::InvalidValue(format!("bad size_units {:?}: {e}", fields[4])))?;
        if price < 0 {
            return Err(Error::InvalidValue(format!("negative price_ticks {price}")));
        }
        if fields[5].is_empty() {
            return Err(Error::InvalidValue("empty order_id".into()));
        }
        Ok(Some(OrderEvent {
            ts: Timestamp::from_micros(ts),
            kind,
            side,
            price: Price::from_ticks(price),
            size: Size::from_units(size),
            order_id: fields[5].to_string(),
        }))
    }
}

impl<R: BufRead> Iterator for FullChannelReader<R> {
    type Item = Result<OrderEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            self.line_no += 1;
            self.report.lines_read += 1;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            if self.format == SourceFormat::Csv && !self.saw_header {
                self.saw_header = true;
                if line == FULL_CSV_HEADER {
                    continue;
                }
                self.failed = true;
                return Some(Err(Error::MalformedRecord {
                    line: self.line_no,
                    reason: format!("expected header {FULL_CSV_HEADER:?}"),
                }));
            }
            let parsed = match self.format {
                SourceFormat::Jsonl => self.parse_jsonl(line),
                SourceFormat::Csv => self.parse_csv(line),
            };
            match parsed {
                Ok(Some(ev)) => {
                    if let Some(prev) = self.last_ts {
                        if ev.ts.micros() < prev {
                            let err = Error::ClockSkew {
                                line: self.line_no,
                                prev_micros: prev,
                                ts_micros: ev.ts.micros(),
                            };
                            if self.mode == ParseMode::Strict {
                                self.failed = true;
                                return Some(Err(err));
                            }
                            self.report.clock_skew += 1;
                            continue;
                        }
                    }
                    self.last_ts = Some(ev.ts.micros());
                    self.report.records_emitted += 1;
                    return Some(Ok(ev));
                }
                Ok(None) => continue,
                Err(e) => {
                    let err = Error::MalformedRecord {
                        line: self.line_no,
                        reason: e.to_string(),
                    };
                    if self.mode == ParseMode::Strict {
                        self.failed = true;
                        return Some(Err(err));
                    }
                    self.report.note_malformed(self.line_no, e.to_string());
                    continue;
                }
            }
        }
    }
}

/// Streaming reader over ticker-channel records.
pub struct TickerChannelReader<R: BufRead> {
    lines: std::io::Lines<R>,
    format: SourceFormat,
    manifest: DatasetManifest,
    mode: ParseMode,
    line_no: usize,
    saw_header: bool,
    last_ts: Option<i64>,
    report: ParseReport,
    failed: bool,
}

impl<R: BufRead> TickerChannelReader<R> {
    pub fn new(reader: R, format: SourceFormat, manifest: DatasetManifest, mode: ParseMode) -> Self {
        TickerChannelReader {
            lines: reader.lines(),
            format,
            manifest,
            mode,
            line_no: 0,
            saw_header: false,
            last_ts: None,
            report: ParseReport::default(),
            failed: false,
        }
    }

    pub fn report(&self) -> &ParseReport {
        &self.report
    }

    fn parse_jsonl(&mut self, line: &str) -> Result<Option<TickerRecord>> {
        let raw: RawMessage =
            serde_json::from_str(line).map_err(|e| Error::InvalidValue(format!("bad JSON: {e}")))?;
        if raw.kind != "ticker" {
            self.report.note_ignored(&raw.kind);
            return Ok(None);
        }
        let ts = parse_rfc3339_micros(get(&raw.time, "time")?)?;
        let bid_size = match &raw.best_bid_size {
            Some(s) => Some(self.manifest.size_to_units(s)?),
            None => None,
        };
        let ask_size = match &raw.best_ask_size {
            Some(s) => Some(self.manifest.size_to_units(s)?),
            None => None,
        };
        Ok(Some(TickerRecord {
            ts,
            best_bid: self.manifest.price_to_ticks(get(&raw.best_bid, "best_bid")?)?,
            best_ask: self.manifest.price_to_ticks(get(&raw.best_ask, "best_ask")?)?,
            last_price: self.manifest.price_to_ticks(get(&raw.price, "price")?)?,
            bid_size,
            ask_size,
        }))
    }

    fn parse_csv(&mut self, line: &str) -> Result<Option<TickerRecord>> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::InvalidValue(format!("expected 6 fields, got {}", fields.len())));
        }
        let int = |s: &str, name: &str| -> Result<i64> {
            s.parse::<i64>()
                .map_err(|e| Error::InvalidValue(format!("bad {name} {s:?}: {e}")))
        };
        let opt_size = |s: &str, name: &str| -> Result<Option<Size>> {
            if s.is_empty() {
                return Ok(None);
            }
            let units = s
                .parse::<u64>()
                .map_err(|e| Error::InvalidValue(format!("bad {name} {s:?}: {e}")))?;
            Ok(Some(Size::from_units(units)))
        };
        Ok(Some(TickerRecord {
            ts: Timestamp::from_micros(int(fields[0], "ts_micros")?),
            best_bid: Price::from_ticks(int(fields[1], "best_bid_ticks")?),
            best_ask: Price::from_ticks(int(fields[2], "best_ask_ticks")?),
            last_price: Price::from_ticks(int(fields[3], "last_price_ticks")?),
            bid_size: opt_size(fields[4], "bid_size_units")?,
            ask_size: opt_size(fields[5], "ask_size_units")?,
        }))
    }
}

impl<R: BufRead> Iterator for TickerChannelReader<R> {
    type Item = Result<TickerRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            self.line_no += 1;
            self.report.lines_read += 1;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            if self.format == SourceFormat::Csv && !self.saw_header {
                self.saw_header = true;
                if line == TICKER_CSV_HEADER {
                    continue;
                }
                self.failed = true;
                return Some(Err(Error::MalformedRecord {
                    line: self.line_no,
                    reason: format!("expected header {TICKER_CSV_HEADER:?}"),
                }));
            }
            let parsed = match self.format {
                SourceFormat::Jsonl => self.parse_jsonl(line),
                SourceFormat::Csv => self.parse_csv(line),
            };
            let checked = parsed.and_then(|rec| match rec {
                Some(rec) if rec.best_bid >= rec.best_ask => Err(Error::InvalidValue(format!(
                    "crossed quote: bid {} >= ask {}",
                    rec.best_bid.ticks(),
                    rec.best_ask.ticks()
                ))),
                other => Ok(other),
            });
            match checked {
                Ok(Some(rec)) => {
                    if let Some(prev) = self.last_ts {
                        if rec.ts.micros() < prev {
                            let err = Error::ClockSkew {
                                line: self.line_no,
                                prev_micros: prev,
                                ts_micros: rec.ts.micros(),
                            };
                            if self.mode == ParseMode::Strict {
                                self.failed = true;
                                return Some(Err(err));
                            }
                            self.report.clock_skew += 1;
                            continue;
                        }
                    }
                    self.last_ts = Some(rec.ts.micros());
                    self.report.records_emitted += 1;
                    return Some(Ok(rec));
                }
                Ok(None) => continue,
                Err(e) => {
                    let err = Error::MalformedRecord {
                        line: self.line_no,
                        reason: e.to_string(),
                    };
                    if self.mode == ParseMode::Strict {
                        self.failed = true;
                        return Some(Err(err));
                    }
                    self.report.note_malformed(self.line_no, e.to_string());
                    continue;
                }
            }
        }
    }
}

/// Two-pointer merge: each event carries the latest ticker at or before its
/// timestamp. Events before the first ticker carry None.
pub struct MergedStream<F, T>
where
    F: Iterator<Item = Result<OrderEvent>>,
    T: Iterator<Item = Result<TickerRecord>>,
{
    full: F,
    ticker: std::iter::Peekable<T>,
    current: Option<TickerRecord>,
    failed: bool,
}

pub fn merge_channels<F, T>(full: F, ticker: T) -> MergedStream<F, T>
where
    F: Iterator<Item = Result<OrderEvent>>,
    T: Iterator<Item = Result<TickerRecord>>,
{
    MergedStream {
        full,
        ticker: ticker.peekable(),
        current: None,
        failed: false,
    }
}

impl<F, T> Iterator for MergedStream<F, T>
where
    F: Iterator<Item = Result<OrderEvent>>,
    T: Iterator<Item = Result<TickerRecord>>,
{
    type Item = Result<EnrichedEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let event = match self.full.next()? {
            Ok(ev) => ev,
            Err(e) => {
                self.failed = true;
                return Some(Err(e));
            }
        };
        loop {
            match self.ticker.peek() {
                Some(Ok(rec)) if rec.ts <= event.ts => {
                    self.current = match self.ticker.next() {
                        Some(Ok(rec)) => Some(rec),
                        _ => unreachable!("peeked Ok"),
                    };
                }
                Some(Err(_)) => {
                    self.failed = true;
                    let err = self.ticker.next().expect("peeked Err");
                    return Some(Err(err.expect_err("peeked Err")));
                }
                _ => break,
            }
        }
        Some(Ok(EnrichedEvent {
            event,
            ticker: self.current.clone(),
        }))
    }
}

/// Serialize events in the normalized CSV interchange format.
pub fn write_normalized_full<W: std::io::Write>(events: &[OrderEvent], out: &mut W) -> Result<()> {
    out.write_all(FULL_CSV_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for ev in events {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            ev.ts.micros(),
            ev.kind.as_str(),
            ev.side.as_str(),
            ev.price.ticks(),
            ev.size.units(),
            ev.order_id
        )?;
    }
    Ok(())
}

/// Serialize ticker records in the normalized CSV interchange format.
pub fn write_normalized_ticker<W: std::io::Write>(records: &[TickerRecord], out: &mut W) -> Result<()> {
    out.write_all(TICKER_CSV_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for rec in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            rec.ts.micros(),
            rec.best_bid.ticks(),
            rec.best_ask.ticks(),
            rec.last_price.ticks(),
            rec.bid_size.map(|s| s.units().to_string()).unwrap_or_default(),
            rec.ask_size.map(|s| s.units().to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> DatasetManifest {
        DatasetManifest::new("0.01", "0.00001", "BTC-USD")
    }

    fn read_full(input: &str, format: SourceFormat, mode: ParseMode) -> (Vec<OrderEvent>, ParseReport) {
        let mut reader = FullChannelReader::new(input.as_bytes(), format, manifest(), mode);
        let mut events = Vec::new();
        for ev in &mut reader {
            events.push(ev.unwrap());
        }
        let report = reader.report().clone();
        (events, report)
    }

    #[test]
    fn parses_open_message() {
        let line = r#"{"type":"open","side":"buy","price":"100.00","remaining_size":"5.00000","order_id":"a1","time":"2022-11-28T14:00:00.000001Z"}"#;
        let (events, _) = read_full(line, SourceFormat::Jsonl, ParseMode::Strict);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::Open);
        assert_eq!(events[0].side, Side::Buy);
        assert_eq!(events[0].price.ticks(), 10_000);
        assert_eq!(events[0].size.units(), 500_000);
    }

    #[test]
    fn parses_done_canceled_as_cancel() {
        let line = r#"{"type":"done","reason":"canceled","side":"sell","price":"101.50","remaining_size":"0.50000","order_id":"z9","time":"2022-11-28T14:00:01Z"}"#;
        let (events, _) = read_full(line, SourceFormat::Jsonl, ParseMode::Strict);
        assert_eq!(events[0].kind, EventKind::Cancel);
        assert_eq!(events[0].price.ticks(), 10_150);
    }

    #[test]
    fn match_takes_taker_side_and_maker_id() {
        let line = r#"{"type":"match","side":"buy","price":"100.02","size":"0.00003","maker_order_id":"mk","taker_order_id":"tk","time":"2022-11-28T14:00:02Z"}"#;
        let (events, _) = read_full(line, SourceFormat::Jsonl, ParseMode::Strict);
        assert_eq!(events[0].kind, EventKind::Match);
        assert_eq!(events[0].side, Side::Buy);
        assert_eq!(events[0].order_id, "mk");
        assert_eq!(events[0].size.units(), 3);
    }

    #[test]
    fn truncated_line_is_reported_and_skipped_in_lenient_mode() {
        let input = concat!(
            r#"{"type":"open","side":"buy","price":"100.00","remaining_size":"1.00000","order_id":"a","time":"2022-11-28T14:00:00Z"}"#,
            "\n",
            r#"{"type":"open","side":"buy","pri"#,
            "\n",
            r#"{"type":"open","side":"sell","price":"100.10","remaining_size":"1.00000","order_id":"b","time":"2022-11-28T14:00:01Z"}"#,
        );
        let (events, report) = read_full(input, SourceFormat::Jsonl, ParseMode::Lenient);
        assert_eq!(events.len(), 2);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.malformed_samples[0].0, 2);
        // Strict mode aborts at that line instead.
        let mut reader = FullChannelReader::new(input.as_bytes(), SourceFormat::Jsonl, manifest(), ParseMode::Strict);
        assert!(reader.next().unwrap().is_ok());
        let err = reader.next().unwrap().unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 2, .. }));
        assert!(reader.next().is_none());
    }

    #[test]
    fn received_messages_are_ignored_with_count() {
        let input = concat!(
            r#"{"type":"received","side":"buy","order_id":"a","time":"2022-11-28T14:00:00Z"}"#,
            "\n",
            r#"{"type":"open","side":"buy","price":"100.00","remaining_size":"1.00000","order_id":"a","time":"2022-11-28T14:00:00Z"}"#,
        );
        let (events, report) = read_full(input, SourceFormat::Jsonl, ParseMode::Lenient);
        assert_eq!(events.len(), 1);
        assert_eq!(report.ignored_types.get("received"), Some(&1));
    }

    #[test]
    fn ticker_sizes_are_optional() {
        // LUNA-style record without best bid/ask sizes.
        let line = r#"{"type":"ticker","price":"2.00","best_bid":"1.99","best_ask":"2.01","time":"2022-05-12T02:00:00Z"}"#;
        let mut reader =
            TickerChannelReader::new(line.as_bytes(), SourceFormat::Jsonl, DatasetManifest::new("0.01", "0.001", "LUNA-USD"), ParseMode::Strict);
        let rec = reader.next().unwrap().unwrap();
        assert!(!rec.has_sizes());
        assert_eq!(rec.best_bid.ticks(), 199);
        // BTC-style record with sizes.
        let line = r#"{"type":"ticker","price":"100.02","best_bid":"100.00","best_ask":"100.02","best_bid_size":"1.00000","best_ask_size":"2.00000","time":"2022-11-28T14:00:00Z"}"#;
        let mut reader = TickerChannelReader::new(line.as_bytes(), SourceFormat::Jsonl, manifest(), ParseMode::Strict);
        let rec = reader.next().unwrap().unwrap();
        assert!(rec.has_sizes());
        assert_eq!(rec.bid_size.unwrap().units(), 100_000);
    }

    #[test]
    fn crossed_quote_is_malformed() {
        let line = "ts_micros,best_bid_ticks,best_ask_ticks,last_price_ticks,bid_size_units,ask_size_units\n5,101,100,100,,";
        let mut reader = TickerChannelReader::new(line.as_bytes(), SourceFormat::Csv, manifest(), ParseMode::Strict);
        let err = reader.next().unwrap().unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { .. }));
    }

    #[test]
    fn merge_attaches_latest_ticker_at_or_before() {
        // events at t=1,3,5; tickers at t=2,4.
        let mk_ev = |t: i64| OrderEvent {
            ts: Timestamp::from_micros(t),
            kind: EventKind::Open,
            side: Side::Buy,
            price: Price::from_ticks(100),
            size: Size::from_units(1),
            order_id: format!("o{t}"),
        };
        let mk_tk = |t: i64| TickerRecord {
            ts: Timestamp::from_micros(t),
            best_bid: Price::from_ticks(100),
            best_ask: Price::from_ticks(102),
            last_price: Price::from_ticks(101),
            bid_size: None,
            ask_size: None,
        };
        let events = vec![mk_ev(1), mk_ev(3), mk_ev(5)];
        let tickers = vec![mk_tk(2), mk_tk(4)];
        let merged: Vec<EnrichedEvent> = merge_channels(events.into_iter().map(Ok), tickers.into_iter().map(Ok))
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(merged.len(), 3);
        assert!(merged[0].ticker.is_none());
        assert_eq!(merged[1].ticker.as_ref().unwrap().ts.micros(), 2);
        assert_eq!(merged[2].ticker.as_ref().unwrap().ts.micros(), 4);
        // Attached ticker never postdates its event.
        for e in &merged {
            if let Some(t) = &e.ticker {
                assert!(t.ts <= e.event.ts);
            }
        }
    }

    #[test]
    fn normalized_csv_round_trips_byte_identically() {
        let input = "ts_micros,kind,side,price_ticks,size_units,order_id\n\
                     1,open,buy,10000,5,a\n\
                     2,open,sell,10002,7,b\n\
                     3,match,buy,10002,3,b\n\
                     4,change,sell,10002,2,b\n\
                     5,cancel,buy,10000,5,a\n";
        let (events, report) = read_full(input, SourceFormat::Csv, ParseMode::Strict);
        assert_eq!(events.len(), 5);
        assert_eq!(report.malformed, 0);
        let mut out = Vec::new();
        write_normalized_full(&events, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), input);

        let ticker_input = "ts_micros,best_bid_ticks,best_ask_ticks,last_price_ticks,bid_size_units,ask_size_units\n\
                            3,10000,10002,10002,5,7\n\
                            9,10000,10002,10002,,\n";
        let mut reader =
            TickerChannelReader::new(ticker_input.as_bytes(), SourceFormat::Csv, manifest(), ParseMode::Strict);
        let records: Vec<TickerRecord> = (&mut reader).collect::<Result<_>>().unwrap();
        let mut out = Vec::new();
        write_normalized_ticker(&records, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), ticker_input);
    }

    #[test]
    fn clock_skew_is_skipped_lenient_fatal_strict() {
        let input = "ts_micros,kind,side,price_ticks,size_units,order_id\n\
                     5,open,buy,10000,5,a\n\
                     3,open,buy,9999,5,b\n\
                     7,open,buy,9998,5,c\n";
        let (events, report) = read_full(input, SourceFormat::Csv, ParseMode::Lenient);
        assert_eq!(events.len(), 2);
        assert_eq!(report.clock_skew, 1);
        let mut reader = FullChannelReader::new(input.as_bytes(), SourceFormat::Csv, manifest(), ParseMode::Strict);
        assert!(reader.next().unwrap().is_ok());
        assert!(matches!(reader.next().unwrap().unwrap_err(), Error::ClockSkew { .. }));
    }
}
