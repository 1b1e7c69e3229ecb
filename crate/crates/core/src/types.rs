//! Domain types shared across the pipeline.
//!
//! Prices and sizes are integer counts of the dataset's minimum increments
//! (tick and lot), so all book arithmetic is exact. Conversion to quote or
//! base currency happens only at output boundaries, through the dataset
//! manifest.

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational used wherever tick arithmetic meets real-valued measures.
pub type Rat = Ratio<i128>;

/// Parse a plain decimal string (`"0.01"`, `"-3"`, `"100.25"`) into an exact rational.
pub fn parse_decimal(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1i128, rest),
        None => (1i128, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::InvalidValue(format!("not a decimal: {s:?}")));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::InvalidValue(format!("not a decimal: {s:?}")));
    }
    let mut mantissa: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        mantissa = mantissa
            .checked_mul(10)
            .and_then(|m| m.checked_add((c as u8 - b'0') as i128))
            .ok_or_else(|| Error::InvalidValue(format!("decimal overflow: {s:?}")))?;
    }
    let mut den: i128 = 1;
    for _ in 0..frac_part.len() {
        den = den
            .checked_mul(10)
            .ok_or_else(|| Error::InvalidValue(format!("decimal overflow: {s:?}")))?;
    }
    Ok(Rat::new(sign * mantissa, den))
}

/// Format a rational as a plain decimal string. Exact whenever the reduced
/// denominator is of the form 2^a * 5^b; falls back to f64 otherwise.
pub fn format_rat(r: Rat) -> String {
    let den = *r.denom();
    let mut rest = den;
    let mut twos = 0u32;
    while rest % 2 == 0 {
        rest /= 2;
        twos += 1;
    }
    let mut fives = 0u32;
    while rest % 5 == 0 {
        rest /= 5;
        fives += 1;
    }
    if rest != 1 {
        return r.to_f64().map(|v| v.to_string()).unwrap_or_else(|| r.to_string());
    }
    let digits = twos.max(fives);
    let scaled = r.numer().abs() * 10i128.pow(digits) / den;
    let sign = if r.is_negative() { "-" } else { "" };
    if digits == 0 {
        return format!("{sign}{scaled}");
    }
    let pow = 10i128.pow(digits);
    format!("{sign}{}.{:0width$}", scaled / pow, scaled % pow, width = digits as usize)
}

/// Minimum price and volume increments for one dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Quote-currency value of one tick, e.g. "0.01".
    pub tick_size: String,
    /// Base-currency value of one lot, e.g. "0.00001".
    pub lot_size: String,
    pub pair: String,
}

impl DatasetManifest {
    pub fn new(tick_size: &str, lot_size: &str, pair: &str) -> Self {
        Self {
            tick_size: tick_size.to_string(),
            lot_size: lot_size.to_string(),
            pair: pair.to_string(),
        }
    }

    pub fn tick(&self) -> Result<Rat> {
        let t = parse_decimal(&self.tick_size)?;
        if t <= Rat::zero() {
            return Err(Error::InvalidValue(format!("tick_size must be positive: {}", self.tick_size)));
        }
        Ok(t)
    }

    pub fn lot(&self) -> Result<Rat> {
        let l = parse_decimal(&self.lot_size)?;
        if l <= Rat::zero() {
            return Err(Error::InvalidValue(format!("lot_size must be positive: {}", self.lot_size)));
        }
        Ok(l)
    }

    /// Convert a quoted decimal price into ticks; the price must be an exact
    /// multiple of the tick size.
    pub fn price_to_ticks(&self, price: &str) -> Result<Price> {
        let p = parse_decimal(price)?;
        let ratio = p / self.tick()?;
        if !ratio.is_integer() || ratio.is_negative() {
            return Err(Error::InvalidValue(format!(
                "price {price:?} is not a non-negative multiple of tick {}",
                self.tick_size
            )));
        }
        let ticks = ratio.to_integer();
        Ok(Price::from_ticks(i64::try_from(ticks).map_err(|_| {
            Error::InvalidValue(format!("price {price:?} out of range"))
        })?))
    }

    /// Convert a decimal size into lot units; must be an exact multiple.
    pub fn size_to_units(&self, size: &str) -> Result<Size> {
        let s = parse_decimal(size)?;
        let ratio = s / self.lot()?;
        if !ratio.is_integer() || ratio.is_negative() {
            return Err(Error::InvalidValue(format!(
                "size {size:?} is not a non-negative multiple of lot {}",
                self.lot_size
            )));
        }
        let units = ratio.to_integer();
        Ok(Size::from_units(u64::try_from(units).map_err(|_| {
            Error::InvalidValue(format!("size {size:?} out of range"))
        })?))
    }
}

/// Price as an integer count of ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Price(i64);

impl Price {
    pub fn from_ticks(ticks: i64) -> Self {
        Price(ticks)
    }

    pub fn ticks(self) -> i64 {
        self.0
    }

    pub fn to_quote(self, tick: Rat) -> Rat {
        Rat::from_integer(self.0 as i128) * tick
    }
}

/// Size as an integer count of lots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Size(u64);

impl Size {
    pub fn from_units(units: u64) -> Self {
        Size(units)
    }

    pub fn units(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// Microseconds since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_micros(micros: i64) -> Self {
        Timestamp(micros)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }

    pub fn parse(s: &str) -> Result<Side> {
        match s {
            "buy" => Ok(Side::Buy),
            "sell" => Ok(Side::Sell),
            other => Err(Error::InvalidValue(format!("unknown side {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// A limit order resting in the book.
    Open,
    /// An execution; `side` is the taker side, `order_id` the resting maker.
    Match,
    /// Removal of an order's remaining size.
    Cancel,
    /// In-place change of an order's remaining size.
    ChangeSize,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Open => "open",
            EventKind::Match => "match",
            EventKind::Cancel => "cancel",
            EventKind::ChangeSize => "change",
        }
    }

    pub fn parse(s: &str) -> Result<EventKind> {
        match s {
            "open" => Ok(EventKind::Open),
            "match" => Ok(EventKind::Match),
            "cancel" => Ok(EventKind::Cancel),
            "change" => Ok(EventKind::ChangeSize),
            other => Err(Error::InvalidValue(format!("unknown event kind {other:?}"))),
        }
    }
}

/// Whether an order took liquidity (crossed the spread) or posted it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggressiveness {
    Limit,
    Market,
}

/// One full-channel record, normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderEvent {
    pub ts: Timestamp,
    pub kind: EventKind,
    /// Order side; for `Match` this is the taker side.
    pub side: Side,
    pub price: Price,
    /// `Open`: resting size. `Match`: executed size. `Cancel`: remaining size
    /// if known (the book's own tracking takes precedence). `ChangeSize`: the
    /// new remaining size.
    pub size: Size,
    pub order_id: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_decimal("0.01").unwrap(), Rat::new(1, 100));
        assert_eq!(parse_decimal("100.25").unwrap(), Rat::new(401, 4));
        assert_eq!(parse_decimal("-3").unwrap(), Rat::from_integer(-3));
        assert_eq!(parse_decimal("0.00001").unwrap(), Rat::new(1, 100_000));
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("1.2.3").is_err());
        assert!(parse_decimal("").is_err());
    }

    #[test]
    fn formats_rationals_as_decimals() {
        assert_eq!(format_rat(Rat::new(1, 100)), "0.01");
        assert_eq!(format_rat(Rat::new(401, 4)), "100.25");
        assert_eq!(format_rat(Rat::from_integer(16000)), "16000");
        assert_eq!(format_rat(Rat::new(-1, 2)), "-0.5");
    }

    #[test]
    fn manifest_converts_prices_and_sizes() {
        let m = DatasetManifest::new("0.01", "0.00001", "BTC-USD");
        assert_eq!(m.price_to_ticks("100.00").unwrap().ticks(), 10_000);
        assert_eq!(m.price_to_ticks("0.01").unwrap().ticks(), 1);
        assert_eq!(m.size_to_units("5.00000").unwrap().units(), 500_000);
        // Not a tick multiple.
        assert!(m.price_to_ticks("100.005").is_err());
        assert!(m.price_to_ticks("-1.00").is_err());
    }
}
