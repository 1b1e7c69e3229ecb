//! Time sampling of the replayed event stream.
//!
//! Time is partitioned into half-open intervals (T - dt, T] on a grid
//! aligned to whole multiples of dt since the epoch. Each frame carries the
//! best bid/ask and last match price as of its start (the book state at the
//! last update at or before T - dt) plus the events that occurred inside it.
//! Frames with no events are still emitted so that downstream series sit on
//! a regular grid.

use crate::book::{Applied, Book, ReplayMode, ReplayStats, classify_aggressiveness};
use crate::error::{Error, Result};
use crate::types::{Aggressiveness, OrderEvent, Price, Side, Size, Timestamp};

/// Signed tick distance of a quoted price from the same-side best quote.
/// Negative when the order sits inside the spread.
pub fn depth_of(ref_best_bid: Price, ref_best_ask: Price, side: Side, price: Price) -> i64 {
    match side {
        Side::Buy => ref_best_bid.ticks() - price.ticks(),
        Side::Sell => price.ticks() - ref_best_ask.ticks(),
    }
}

/// One event inside a frame, with sizes resolved against the book.
#[derive(Debug, Clone)]
pub struct FrameEvent {
    pub event: OrderEvent,
    /// False when the replay skipped the event (orphan in lenient mode).
    pub applied: bool,
    /// Cancel: remaining size at cancellation. ChangeSize: |delta|.
    /// Otherwise the event's own size.
    pub resolved_size: Size,
    /// ChangeSize only: true when the remaining size grew.
    pub change_grew: bool,
    pub aggressiveness: Aggressiveness,
}

/// One sampling interval (t_end - dt, t_end].
#[derive(Debug, Clone)]
pub struct Frame {
    pub t_end: Timestamp,
    pub dt_micros: i64,
    /// Book state at the frame start; None until the book has both sides.
    pub ref_best_bid: Option<Price>,
    pub ref_best_ask: Option<Price>,
    pub ref_p_star: Option<Price>,
    pub events: Vec<FrameEvent>,
}

impl Frame {
    pub fn refs(&self) -> Option<(Price, Price)> {
        match (self.ref_best_bid, self.ref_best_ask) {
            (Some(b), Some(a)) => Some((b, a)),
            _ => None,
        }
    }
}

/// Streaming frame sampler: owns the replay book, yields one `Frame` per
/// grid interval from the first event to the last. Memory is bounded by the
/// live-order count plus one frame's events.
pub struct FrameSampler<I>
where
    I: Iterator<Item = Result<OrderEvent>>,
{
    inner: I,
    book: Book,
    dt: i64,
    cur_end: Option<i64>,
    cur_events: Vec<FrameEvent>,
    cur_refs: (Option<Price>, Option<Price>, Option<Price>),
    pending: Option<OrderEvent>,
    finished: bool,
    failed: bool,
}

impl<I> FrameSampler<I>
where
    I: Iterator<Item = Result<OrderEvent>>,
{
    pub fn new(events: I, dt_micros: i64, mode: ReplayMode) -> Result<Self> {
        if dt_micros <= 0 {
            return Err(Error::InvalidValue(format!("dt must be positive, got {dt_micros}us")));
        }
        Ok(FrameSampler {
            inner: events,
            book: Book::new(mode),
            dt: dt_micros,
            cur_end: None,
            cur_events: Vec::new(),
            cur_refs: (None, None, None),
            pending: None,
            finished: false,
            failed: false,
        })
    }

    pub fn book(&self) -> &Book {
        &self.book
    }

    pub fn replay_stats(&self) -> ReplayStats {
        self.book.stats()
    }

    /// Grid end for the interval containing `ts`: the smallest multiple of
    /// dt that is >= ts (intervals are half-open on the left).
    fn grid_end(&self, ts: i64) -> i64 {
        ts.div_euclid(self.dt) * self.dt + if ts.rem_euclid(self.dt) == 0 { 0 } else { self.dt }
    }

    fn snapshot_refs(&self) -> (Option<Price>, Option<Price>, Option<Price>) {
        (self.book.best_bid(), self.book.best_ask(), self.book.last_match_price())
    }

    fn apply(&mut self, ev: OrderEvent) -> Result<()> {
        let aggressiveness = classify_aggressiveness(&ev, &self.book);
        let applied = self.book.apply_event(&ev)?;
        let (applied_flag, resolved_size, change_grew) = match applied {
            Applied::Skipped => (false, ev.size, false),
            Applied::Cancelled { remaining } => (true, remaining, false),
            Applied::Resized { delta } => (true, Size::from_units(delta.unsigned_abs()), delta > 0),
            Applied::Opened | Applied::Matched => (true, ev.size, false),
        };
        self.cur_events.push(FrameEvent {
            event: ev,
            applied: applied_flag,
            resolved_size,
            change_grew,
            aggressiveness,
        });
        Ok(())
    }

    fn take_frame(&mut self) -> Frame {
        let t_end = self.cur_end.expect("frame end set");
        let (b, a, p) = self.cur_refs;
        let frame = Frame {
            t_end: Timestamp::from_micros(t_end),
            dt_micros: self.dt,
            ref_best_bid: b,
            ref_best_ask: a,
            ref_p_star: p,
            events: std::mem::take(&mut self.cur_events),
        };
        // The next frame starts where this one ended; its refs are the book
        // state now, i.e. after every event at or before t_end.
        self.cur_refs = self.snapshot_refs();
        self.cur_end = Some(t_end + self.dt);
        frame
    }
}

impl<I> Iterator for FrameSampler<I>
where
    I: Iterator<Item = Result<OrderEvent>>,
{
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished || self.failed {
            return None;
        }
        loop {
            let ev = match self.pending.take() {
                Some(ev) => Some(ev),
                None => match self.inner.next() {
                    Some(Ok(ev)) => Some(ev),
                    Some(Err(e)) => {
                        self.failed = true;
                        return Some(Err(e));
                    }
                    None => None,
                },
            };
            match ev {
                Some(ev) => {
                    let end = match self.cur_end {
                        Some(end) => end,
                        None => {
                            // First event anchors the grid.
                            let end = self.grid_end(ev.ts.micros());
                            self.cur_end = Some(end);
                            end
                        }
                    };
                    if ev.ts.micros() <= end {
                        if let Err(e) = self.apply(ev) {
                            self.failed = true;
                            return Some(Err(e));
                        }
                    } else {
                        self.pending = Some(ev);
                        return Some(Ok(self.take_frame()));
                    }
                }
                None => {
                    if self.cur_end.is_none() {
                        self.finished = true;
                        return Some(Err(Error::EmptyStream));
                    }
                    self.finished = true;
                    return Some(Ok(self.take_frame()));
                }
            }
        }
    }
}

/// Partition a time-ordered event stream into frames of width `dt_micros`.
pub fn sample_frames<I>(events: I, dt_micros: i64, mode: ReplayMode) -> Result<FrameSampler<I>>
where
    I: Iterator<Item = Result<OrderEvent>>,
{
    FrameSampler::new(events, dt_micros, mode)
}
