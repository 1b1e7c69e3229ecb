//! Event-sourced limit-order-book state machine.
//!
//! The book is rebuilt by replaying full-channel events in order. Every
//! downstream measure reads book state through this module, never through
//! the raw records. Lenient replay counts and skips events that reference
//! orders never seen (captures start mid-session); strict replay aborts.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::types::{Aggressiveness, EventKind, OrderEvent, Price, Rat, Side, Size, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReplayMode {
    /// Count and skip orphan events.
    #[default]
    Lenient,
    /// Abort on the first orphan event.
    Strict,
}

#[derive(Debug, Clone)]
struct RestingOrder {
    side: Side,
    price: Price,
    remaining: u64,
}

/// Counters for anomalies tolerated in lenient replay.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayStats {
    pub applied_events: u64,
    /// Cancel/ChangeSize/Match referencing an order never seen or already gone.
    pub orphan_events: u64,
    /// Open with an order id that is already live.
    pub duplicate_opens: u64,
    /// Match size exceeding the maker's tracked remaining (clamped).
    pub oversized_matches: u64,
}

/// What an applied event actually did; sizes are resolved against the book's
/// own tracking (a cancel removes the remaining size, not the quoted one).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    Opened,
    /// Removed `remaining` units that were resting at cancellation.
    Cancelled { remaining: Size },
    /// Maker-side level decremented by the executed size.
    Matched,
    /// Remaining size changed by `delta` units (negative shrinks).
    Resized { delta: i64 },
    /// Orphan or duplicate skipped in lenient mode.
    Skipped,
}

#[derive(Debug, Clone, Default)]
pub struct Book {
    bids: BTreeMap<i64, u64>,
    asks: BTreeMap<i64, u64>,
    orders: HashMap<String, RestingOrder>,
    p_star: Option<Price>,
    last_match_ts: Option<Timestamp>,
    mode: ReplayMode,
    stats: ReplayStats,
}

impl Book {
    pub fn new(mode: ReplayMode) -> Self {
        Book {
            mode,
            ..Default::default()
        }
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.last_key_value().map(|(&p, _)| Price::from_ticks(p))
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.first_key_value().map(|(&p, _)| Price::from_ticks(p))
    }

    /// Midprice (b_M + a_M) / 2 when both sides are quoted.
    pub fn midprice(&self) -> Option<Rat> {
        match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => Some(Rat::new(b.ticks() as i128 + a.ticks() as i128, 2)),
            _ => None,
        }
    }

    pub fn last_match_price(&self) -> Option<Price> {
        self.p_star
    }

    pub fn last_match_ts(&self) -> Option<Timestamp> {
        self.last_match_ts
    }

    pub fn live_orders(&self) -> usize {
        self.orders.len()
    }

    pub fn stats(&self) -> ReplayStats {
        self.stats
    }

    pub fn level_size(&self, side: Side, price: Price) -> u64 {
        let ladder = match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        };
        ladder.get(&price.ticks()).copied().unwrap_or(0)
    }

    pub fn bid_levels(&self) -> impl Iterator<Item = (Price, Size)> + '_ {
        self.bids
            .iter()
            .rev()
            .map(|(&p, &s)| (Price::from_ticks(p), Size::from_units(s)))
    }

    pub fn ask_levels(&self) -> impl Iterator<Item = (Price, Size)> + '_ {
        self.asks
            .iter()
            .map(|(&p, &s)| (Price::from_ticks(p), Size::from_units(s)))
    }

    pub fn remaining_of(&self, order_id: &str) -> Option<Size> {
        self.orders.get(order_id).map(|o| Size::from_units(o.remaining))
    }

    fn ladder_mut(&mut self, side: Side) -> &mut BTreeMap<i64, u64> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn ladder_add(&mut self, side: Side, price: Price, units: u64) {
        *self.ladder_mut(side).entry(price.ticks()).or_insert(0) += units;
    }

    fn ladder_sub(&mut self, side: Side, price: Price, units: u64) {
        let ladder = self.ladder_mut(side);
        if let Some(level) = ladder.get_mut(&price.ticks()) {
            *level = level.saturating_sub(units);
            if *level == 0 {
                ladder.remove(&price.ticks());
            }
        }
    }

    fn orphan(&mut self, ev: &OrderEvent) -> Result<Applied> {
        match self.mode {
            ReplayMode::Lenient => {
                self.stats.orphan_events += 1;
                Ok(Applied::Skipped)
            }
            ReplayMode::Strict => Err(Error::UnknownOrderId {
                ts_micros: ev.ts.micros(),
                order_id: ev.order_id.clone(),
            }),
        }
    }

    /// Apply one event. The book must reflect the state immediately before it.
    pub fn apply_event(&mut self, ev: &OrderEvent) -> Result<Applied> {
        let applied = match ev.kind {
            EventKind::Open => {
                if self.orders.contains_key(&ev.order_id) {
                    match self.mode {
                        ReplayMode::Lenient => {
                            self.stats.duplicate_opens += 1;
                            return Ok(Applied::Skipped);
                        }
                        ReplayMode::Strict => {
                            return Err(Error::InvalidValue(format!(
                                "duplicate open for order id {:?} at {}us",
                                ev.order_id,
                                ev.ts.micros()
                            )))
                        }
                    }
                }
                if !ev.size.is_zero() {
                    self.orders.insert(
                        ev.order_id.clone(),
                        RestingOrder {
                            side: ev.side,
                            price: ev.price,
                            remaining: ev.size.units(),
                        },
                    );
                    self.ladder_add(ev.side, ev.price, ev.size.units());
                }
                Applied::Opened
            }
            EventKind::Cancel => match self.orders.remove(&ev.order_id) {
                Some(order) => {
                    self.ladder_sub(order.side, order.price, order.remaining);
                    Applied::Cancelled {
                        remaining: Size::from_units(order.remaining),
                    }
                }
                None => return self.orphan(ev),
            },
            EventKind::Match => {
                let maker_side = ev.side.opposite();
                match self.orders.get_mut(&ev.order_id) {
                    Some(order) => {
                        let mut take = ev.size.units();
                        if take > order.remaining {
                            self.stats.oversized_matches += 1;
                            take = order.remaining;
                        }
                        order.remaining -= take;
                        let drained = order.remaining == 0;
                        let price = order.price;
                        // Ladder math trusts the resting order's recorded side,
                        // which for consistent data equals the maker side.
                        let side = order.side;
                        debug_assert_eq!(side, maker_side);
                        self.ladder_sub(side, price, take);
                        if drained {
                            self.orders.remove(&ev.order_id);
                        }
                        self.p_star = Some(ev.price);
                        self.last_match_ts = Some(ev.ts);
                        Applied::Matched
                    }
                    None => return self.orphan(ev),
                }
            }
            EventKind::ChangeSize => match self.orders.get_mut(&ev.order_id) {
                Some(order) => {
                    let old = order.remaining;
                    let new = ev.size.units();
                    order.remaining = new;
                    let price = order.price;
                    let side = order.side;
                    let gone = new == 0;
                    if gone {
                        self.orders.remove(&ev.order_id);
                    }
                    if new >= old {
                        self.ladder_add(side, price, new - old);
                    } else {
                        self.ladder_sub(side, price, old - new);
                    }
                    Applied::Resized {
                        delta: new as i64 - old as i64,
                    }
                }
                None => return self.orphan(ev),
            },
        };
        self.stats.applied_events += 1;
        if let (Some(b), Some(a)) = (self.best_bid(), self.best_ask()) {
            if b >= a {
                return Err(Error::CrossedBook {
                    ts_micros: ev.ts.micros(),
                    bid_ticks: b.ticks(),
                    ask_ticks: a.ticks(),
                });
            }
        }
        Ok(applied)
    }
}

/// Marketable-or-not classification against the book state immediately
/// before the event. Takers of a match are market by definition; an order
/// priced to cross the opposite best is marketable; everything else, and
/// anything facing an empty opposite ladder, is a limit order.
pub fn classify_aggressiveness(ev: &OrderEvent, book: &Book) -> Aggressiveness {
    if ev.kind == EventKind::Match {
        return Aggressiveness::Market;
    }
    match ev.side {
        Side::Buy => match book.best_ask() {
            Some(a) if ev.price >= a => Aggressiveness::Market,
            _ => Aggressiveness::Limit,
        },
        Side::Sell => match book.best_bid() {
            Some(b) if ev.price <= b => Aggressiveness::Market,
            _ => Aggressiveness::Limit,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(ts: i64, kind: EventKind, side: Side, price: i64, size: u64, id: &str) -> OrderEvent {
        OrderEvent {
            ts: Timestamp::from_micros(ts),
            kind,
            side,
            price: Price::from_ticks(price),
            size: Size::from_units(size),
            order_id: id.to_string(),
        }
    }

    #[test]
    fn open_inserts_at_price() {
        let mut book = Book::new(ReplayMode::Strict);
        book.apply_event(&ev(1, EventKind::Open, Side::Buy, 10_000, 5, "a"))
            .unwrap();
        assert_eq!(book.best_bid(), Some(Price::from_ticks(10_000)));
        assert_eq!(book.level_size(Side::Buy, Price::from_ticks(10_000)), 5);
    }

    #[test]
    fn cancel_is_inverse_of_open() {
        let mut book = Book::new(ReplayMode::Strict);
        book.apply_event(&ev(1, EventKind::Open, Side::Buy, 10_000, 5, "a"))
            .unwrap();
        let applied = book
            .apply_event(&ev(2, EventKind::Cancel, Side::Buy, 10_000, 5, "a"))
            .unwrap();
        assert_eq!(
            applied,
            Applied::Cancelled {
                remaining: Size::from_units(5)
            }
        );
        assert_eq!(book.best_bid(), None);
        assert_eq!(book.live_orders(), 0);
    }

    #[test]
    fn match_decrements_maker_and_updates_p_star() {
        // book {bid 100.00x5, ask 100.02x7} + Match(taker Buy, 100.02, 3)
        let mut book = Book::new(ReplayMode::Strict);
        book.apply_event(&ev(1, EventKind::Open, Side::Buy, 10_000, 5, "b"))
            .unwrap();
        book.apply_event(&ev(2, EventKind::Open, Side::Sell, 10_002, 7, "s"))
            .unwrap();
        book.apply_event(&ev(3, EventKind::Match, Side::Buy, 10_002, 3, "s"))
            .unwrap();
        assert_eq!(book.level_size(Side::Sell, Price::from_ticks(10_002)), 4);
        assert_eq!(book.last_match_price(), Some(Price::from_ticks(10_002)));
        assert_eq!(book.last_match_ts(), Some(Timestamp::from_micros(3)));
        assert_eq!(book.midprice(), Some(Rat::from_integer(10_001)));
    }

    #[test]
    fn match_drains_maker_completely() {
        let mut book = Book::new(ReplayMode::Strict);
        book.apply_event(&ev(1, EventKind::Open, Side::Sell, 10_002, 3, "s"))
            .unwrap();
        book.apply_event(&ev(2, EventKind::Match, Side::Buy, 10_002, 3, "s"))
            .unwrap();
        assert_eq!(book.best_ask(), None);
        assert_eq!(book.live_orders(), 0);
    }

    #[test]
    fn change_size_adjusts_level_in_place() {
        let mut book = Book::new(ReplayMode::Strict);
        book.apply_event(&ev(1, EventKind::Open, Side::Sell, 10_002, 7, "s"))
            .unwrap();
        let applied = book
            .apply_event(&ev(2, EventKind::ChangeSize, Side::Sell, 10_002, 2, "s"))
            .unwrap();
        assert_eq!(applied, Applied::Resized { delta: -5 });
        assert_eq!(book.level_size(Side::Sell, Price::from_ticks(10_002)), 2);
    }

    #[test]
    fn orphan_cancel_lenient_skips_and_counts() {
        let mut book = Book::new(ReplayMode::Lenient);
        let applied = book
            .apply_event(&ev(1, EventKind::Cancel, Side::Buy, 10_000, 5, "ghost"))
            .unwrap();
        assert_eq!(applied, Applied::Skipped);
        assert_eq!(book.stats().orphan_events, 1);
    }

    #[test]
    fn orphan_cancel_strict_errors() {
        let mut book = Book::new(ReplayMode::Strict);
        let err = book
            .apply_event(&ev(1, EventKind::Cancel, Side::Buy, 10_000, 5, "ghost"))
            .unwrap_err();
        assert!(matches!(err, Error::UnknownOrderId { .. }));
    }

    #[test]
    fn crossed_book_is_always_an_error() {
        let mut book = Book::new(ReplayMode::Lenient);
        book.apply_event(&ev(1, EventKind::Open, Side::Sell, 10_002, 7, "s"))
            .unwrap();
        let err = book
            .apply_event(&ev(2, EventKind::Open, Side::Buy, 10_002, 5, "b"))
            .unwrap_err();
        assert!(matches!(err, Error::CrossedBook { .. }));
    }

    #[test]
    fn classification_follows_marketability() {
        let mut book = Book::new(ReplayMode::Strict);
        book.apply_event(&ev(1, EventKind::Open, Side::Buy, 9_990, 5, "b"))
            .unwrap();
        book.apply_event(&ev(2, EventKind::Open, Side::Sell, 10_002, 7, "s"))
            .unwrap();
        // Inside the spread, non-marketable.
        let limit_buy = ev(3, EventKind::Open, Side::Buy, 9_999, 1, "x");
        assert_eq!(classify_aggressiveness(&limit_buy, &book), Aggressiveness::Limit);
        // At the best ask: crosses.
        let market_buy = ev(3, EventKind::Open, Side::Buy, 10_002, 1, "y");
        assert_eq!(classify_aggressiveness(&market_buy, &book), Aggressiveness::Market);
        // Takers are market by definition.
        let taker = ev(3, EventKind::Match, Side::Sell, 9_990, 1, "b");
        assert_eq!(classify_aggressiveness(&taker, &book), Aggressiveness::Market);
        // Empty opposite ladder: limit.
        let empty = Book::new(ReplayMode::Strict);
        assert_eq!(classify_aggressiveness(&market_buy, &empty), Aggressiveness::Limit);
    }
}
