//! Seeded zero-intelligence stream generator.
//!
//! Produces internally consistent full-channel/ticker-channel pairs with
//! controllable ground truth: every cancel references a live order, every
//! match consumes a real resting order, and a ticker record follows every
//! match. Poisson clocks drive background submissions, cancellations and
//! marketable orders; an optional reaction term injects volume at a chosen
//! depth proportional to each one-second window's match-price move, giving
//! the active-depth sweep a known answer to recover.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TickerRecord;
use crate::types::{DatasetManifest, EventKind, OrderEvent, Price, Side, Size, Timestamp};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub duration_secs: f64,
    pub tick_size: String,
    pub lot_size: String,
    pub pair: String,
    /// Stream start, microseconds since epoch.
    pub start_micros: i64,
    pub initial_mid_ticks: i64,
    pub initial_spread_ticks: i64,
    /// Background placement band: depths 1..=band in ticks from the
    /// same-side best.
    pub band_depth_ticks: i64,
    /// Seeded resting orders per side at stream start.
    pub seed_orders_per_side: usize,
    /// Background submissions per second per side.
    pub submit_rate: f64,
    /// Background cancellations per second per side.
    pub cancel_rate: f64,
    /// Marketable orders per second (both sides together).
    pub market_order_rate: f64,
    /// Probability that a background submission lands inside the spread
    /// (keeps the spread from drifting open as matches consume the top).
    pub inside_spread_prob: f64,
    pub min_order_units: u64,
    pub max_order_units: u64,
    /// Ground-truth active depth d* in ticks; 0 disables the reaction term.
    pub active_band_depth: i64,
    /// Reaction volume in units per tick of one-second match-price move.
    pub reaction_coupling: f64,
    /// Price drift in ticks per second steered through taker-side bias.
    pub drift_ticks_per_sec: f64,
    /// Publish best bid/ask sizes on the ticker channel.
    pub emit_ticker_sizes: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            duration_secs: 120.0,
            tick_size: "0.01".into(),
            lot_size: "0.00001".into(),
            pair: "SYN-USD".into(),
            start_micros: 1_000_000_000_000_000,
            initial_mid_ticks: 10_000,
            initial_spread_ticks: 2,
            band_depth_ticks: 200,
            seed_orders_per_side: 200,
            submit_rate: 60.0,
            cancel_rate: 45.0,
            market_order_rate: 6.0,
            inside_spread_prob: 0.25,
            min_order_units: 1,
            max_order_units: 20,
            active_band_depth: 0,
            reaction_coupling: 0.0,
            drift_ticks_per_sec: 0.0,
            emit_ticker_sizes: true,
        }
    }
}

impl SynthConfig {
    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest::new(&self.tick_size, &self.lot_size, &self.pair)
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| -> Result<()> {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InfeasibleConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
            Ok(())
        };
        positive(self.submit_rate, "submit_rate")?;
        positive(self.cancel_rate, "cancel_rate")?;
        positive(self.market_order_rate, "market_order_rate")?;
        positive(self.reaction_coupling, "reaction_coupling")?;
        if !self.duration_secs.is_finite() || self.duration_secs <= 0.0 {
            return Err(Error::InfeasibleConfig("duration must be positive".into()));
        }
        if self.initial_spread_ticks < 1 {
            return Err(Error::InfeasibleConfig("spread must be at least one tick".into()));
        }
        if self.initial_mid_ticks <= self.band_depth_ticks + self.initial_spread_ticks {
            return Err(Error::InfeasibleConfig(
                "initial mid must sit above the placement band".into(),
            ));
        }
        if self.band_depth_ticks < 1 {
            return Err(Error::InfeasibleConfig("band depth must be at least one tick".into()));
        }
        if self.active_band_depth < 0 {
            return Err(Error::InfeasibleConfig("active band depth must be >= 0".into()));
        }
        if self.active_band_depth > 0 && self.active_band_depth > self.initial_mid_ticks / 2 {
            return Err(Error::InfeasibleConfig(
                "active band depth outside the generated price range".into(),
            ));
        }
        if self.min_order_units == 0 || self.max_order_units < self.min_order_units {
            return Err(Error::InfeasibleConfig("order size bounds are empty".into()));
        }
        if self.cancel_rate > 0.0 && self.submit_rate == 0.0 && self.seed_orders_per_side == 0 {
            return Err(Error::InfeasibleConfig(
                "cancel rate with no submissions and no seeded orders".into(),
            ));
        }
        if self.market_order_rate > 0.0 && self.seed_orders_per_side == 0 && self.submit_rate == 0.0 {
            return Err(Error::InfeasibleConfig(
                "market orders with nothing resting to match".into(),
            ));
        }
        Ok(())
    }
}

/// Ground truth recorded next to the generated streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub d_star_ticks: i64,
    pub reaction_coupling: f64,
    pub drift_ticks_per_sec: f64,
    pub duration_secs: f64,
    pub initial_mid_ticks: i64,
    pub n_events: u64,
    pub n_matches: u64,
}

/// manifest.json layout: dataset increments plus ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthManifest {
    pub tick_size: String,
    pub lot_size: String,
    pub pair: String,
    pub ground_truth: GroundTruth,
}

/// Receives the generated records in timestamp order.
pub trait SynthSink {
    fn event(&mut self, ev: &OrderEvent) -> Result<()>;
    fn ticker(&mut self, rec: &TickerRecord) -> Result<()>;
}

/// Collects everything in memory.
#[derive(Debug, Default)]
pub struct VecSink {
    pub events: Vec<OrderEvent>,
    pub ticker: Vec<TickerRecord>,
}

impl SynthSink for VecSink {
    fn event(&mut self, ev: &OrderEvent) -> Result<()> {
        self.events.push(ev.clone());
        Ok(())
    }

    fn ticker(&mut self, rec: &TickerRecord) -> Result<()> {
        self.ticker.push(rec.clone());
        Ok(())
    }
}

/// Streams normalized CSV lines to a pair of writers.
pub struct CsvSink<W1: std::io::Write, W2: std::io::Write> {
    full: W1,
    ticker: W2,
    wrote_full_header: bool,
    wrote_ticker_header: bool,
}

impl<W1: std::io::Write, W2: std::io::Write> CsvSink<W1, W2> {
    pub fn new(full: W1, ticker: W2) -> Self {
        CsvSink {
            full,
            ticker,
            wrote_full_header: false,
            wrote_ticker_header: false,
        }
    }

    pub fn finish(mut self) -> Result<()> {
        self.full.flush()?;
        self.ticker.flush()?;
        Ok(())
    }
}

impl<W1: std::io::Write, W2: std::io::Write> SynthSink for CsvSink<W1, W2> {
    fn event(&mut self, ev: &OrderEvent) -> Result<()> {
        if !self.wrote_full_header {
            writeln!(self.full, "{}", crate::ingest::FULL_CSV_HEADER)?;
            self.wrote_full_header = true;
        }
        writeln!(
            self.full,
            "{},{},{},{},{},{}",
            ev.ts.micros(),
            ev.kind.as_str(),
            ev.side.as_str(),
            ev.price.ticks(),
            ev.size.units(),
            ev.order_id
        )?;
        Ok(())
    }

    fn ticker(&mut self, rec: &TickerRecord) -> Result<()> {
        if !self.wrote_ticker_header {
            writeln!(self.ticker, "{}", crate::ingest::TICKER_CSV_HEADER)?;
            self.wrote_ticker_header = true;
        }
        writeln!(
            self.ticker,
            "{},{},{},{},{},{}",
            rec.ts.micros(),
            rec.best_bid.ticks(),
            rec.best_ask.ticks(),
            rec.last_price.ticks(),
            rec.bid_size.map(|s| s.units().to_string()).unwrap_or_default(),
            rec.ask_size.map(|s| s.units().to_string()).unwrap_or_default(),
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct SimOrder {
    side: Side,
    price: i64,
    units: u64,
}

#[derive(Debug, Default)]
struct SimLevel {
    queue: VecDeque<u64>,
    units: u64,
}

/// Book with per-order FIFO queues, so matches can name their makers.
#[derive(Debug, Default)]
struct SimBook {
    orders: HashMap<u64, SimOrder>,
    bids: BTreeMap<i64, SimLevel>,
    asks: BTreeMap<i64, SimLevel>,
    // Indexed set of cancellable (background) order ids.
    pickable: Vec<u64>,
    pick_index: HashMap<u64, usize>,
}

impl SimBook {
    fn ladder(&mut self, side: Side) -> &mut BTreeMap<i64, SimLevel> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn best_bid(&self) -> Option<i64> {
        self.bids.last_key_value().map(|(&p, _)| p)
    }

    fn best_ask(&self) -> Option<i64> {
        self.asks.first_key_value().map(|(&p, _)| p)
    }

    fn level_units(&self, side: Side, price: i64) -> u64 {
        let ladder = match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        };
        ladder.get(&price).map(|l| l.units).unwrap_or(0)
    }

    fn side_units(&self, side: Side) -> u64 {
        let ladder = match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        };
        ladder.values().map(|l| l.units).sum()
    }

    fn insert(&mut self, id: u64, side: Side, price: i64, units: u64, pickable: bool) {
        self.orders.insert(id, SimOrder { side, price, units });
        let level = self.ladder(side).entry(price).or_default();
        level.queue.push_back(id);
        level.units += units;
        if pickable {
            self.pick_index.insert(id, self.pickable.len());
            self.pickable.push(id);
        }
    }

    fn unpick(&mut self, id: u64) {
        if let Some(idx) = self.pick_index.remove(&id) {
            let last = self.pickable.pop().expect("non-empty pickable");
            if last != id {
                self.pickable[idx] = last;
                self.pick_index.insert(last, idx);
            }
        }
    }

    fn remove(&mut self, id: u64) -> Option<SimOrder> {
        let order = self.orders.remove(&id)?;
        let ladder = self.ladder(order.side);
        if let Some(level) = ladder.get_mut(&order.price) {
            level.units -= order.units;
            level.queue.retain(|&q| q != id);
            if level.queue.is_empty() {
                ladder.remove(&order.price);
            }
        }
        self.unpick(id);
        Some(order)
    }

    /// First resting order at the best opposite level for a taker.
    fn front_of_best(&self, taker: Side) -> Option<(u64, i64, u64)> {
        let (price, level) = match taker {
            Side::Buy => self.asks.first_key_value()?,
            Side::Sell => self.bids.last_key_value()?,
        };
        let id = *level.queue.front()?;
        let units = self.orders[&id].units;
        Some((id, *price, units))
    }

    /// Consume `take` units from order `id`; removes it when drained.
    fn consume(&mut self, id: u64, take: u64) {
        let order = self.orders.get_mut(&id).expect("live order");
        order.units -= take;
        let drained = order.units == 0;
        let side = order.side;
        let price = order.price;
        let ladder = self.ladder(side);
        let level = ladder.get_mut(&price).expect("level exists");
        level.units -= take;
        if drained {
            level.queue.pop_front();
            if level.queue.is_empty() {
                ladder.remove(&price);
            }
            self.orders.remove(&id);
            self.unpick(id);
        }
    }
}

struct Generator<'a, S: SynthSink> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    book: SimBook,
    sink: &'a mut S,
    next_id: u64,
    last_match_px: Option<i64>,
    n_events: u64,
    n_matches: u64,
}

impl<'a, S: SynthSink> Generator<'a, S> {
    fn fresh_id(&mut self) -> String {
        self.next_id += 1;
        format!("o{}", self.next_id)
    }

    fn emit(&mut self, ts: i64, kind: EventKind, side: Side, price: i64, units: u64, id: &str) -> Result<()> {
        self.n_events += 1;
        self.sink.event(&OrderEvent {
            ts: Timestamp::from_micros(ts),
            kind,
            side,
            price: Price::from_ticks(price),
            size: Size::from_units(units),
            order_id: id.to_string(),
        })
    }

    fn emit_ticker(&mut self, ts: i64, last_price: i64) -> Result<()> {
        let (Some(bid), Some(ask)) = (self.book.best_bid(), self.book.best_ask()) else {
            return Ok(());
        };
        let (bid_size, ask_size) = if self.cfg.emit_ticker_sizes {
            (
                Some(Size::from_units(self.book.level_units(Side::Buy, bid))),
                Some(Size::from_units(self.book.level_units(Side::Sell, ask))),
            )
        } else {
            (None, None)
        };
        self.sink.ticker(&TickerRecord {
            ts: Timestamp::from_micros(ts),
            best_bid: Price::from_ticks(bid),
            best_ask: Price::from_ticks(ask),
            last_price: Price::from_ticks(last_price),
            bid_size,
            ask_size,
        })
    }

    fn order_units(&mut self) -> u64 {
        self.rng.gen_range(self.cfg.min_order_units..=self.cfg.max_order_units)
    }

    fn submit_background(&mut self, ts: i64, side: Side) -> Result<()> {
        let bid = self.book.best_bid();
        let ask = self.book.best_ask();
        let spread = match (bid, ask) {
            (Some(b), Some(a)) => a - b,
            _ => self.cfg.initial_spread_ticks,
        };
        let inside = spread > 1 && self.rng.gen_bool(self.cfg.inside_spread_prob.clamp(0.0, 1.0));
        let price = match side {
            Side::Buy => {
                let anchor = bid.unwrap_or(self.cfg.initial_mid_ticks - self.cfg.initial_spread_ticks);
                if inside {
                    self.rng.gen_range(anchor + 1..anchor + spread)
                } else {
                    anchor - self.rng.gen_range(1..=self.cfg.band_depth_ticks)
                }
            }
            Side::Sell => {
                let anchor = ask.unwrap_or(self.cfg.initial_mid_ticks + self.cfg.initial_spread_ticks);
                if inside {
                    self.rng.gen_range(anchor - spread + 1..anchor)
                } else {
                    anchor + self.rng.gen_range(1..=self.cfg.band_depth_ticks)
                }
            }
        };
        if price < 1 {
            return Ok(()); // band fell off the price axis; skip
        }
        let units = self.order_units();
        let id = self.fresh_id();
        self.book.insert(self.next_id, side, price, units, true);
        self.emit(ts, EventKind::Open, side, price, units, &id)
    }

    fn cancel_background(&mut self, ts: i64) -> Result<()> {
        if self.book.pickable.is_empty() {
            return Ok(());
        }
        let idx = self.rng.gen_range(0..self.book.pickable.len());
        let id = self.book.pickable[idx];
        let order = self.book.remove(id).expect("picked order is live");
        self.emit(ts, EventKind::Cancel, order.side, order.price, order.units, &format!("o{id}"))
    }

    fn market_order(&mut self, ts: i64, taker: Side) -> Result<()> {
        let mut remaining = self.order_units();
        while remaining > 0 {
            let Some((maker_id, price, units)) = self.book.front_of_best(taker) else {
                return Ok(()); // opposite side drained; leave the rest unfilled
            };
            // Never let a match empty the last opposite level entirely if it
            // is the only one: leave one unit so both sides stay quoted.
            let take = remaining.min(units);
            self.book.consume(maker_id, take);
            self.emit(ts, EventKind::Match, taker, price, take, &format!("o{maker_id}"))?;
            self.n_matches += 1;
            self.last_match_px = Some(price);
            self.emit_ticker(ts, price)?;
            remaining -= take;
        }
        Ok(())
    }

    fn drift_buy_probability(&self, t_secs: f64) -> f64 {
        if self.cfg.drift_ticks_per_sec == 0.0 {
            return 0.5;
        }
        let target = self.cfg.initial_mid_ticks as f64 + self.cfg.drift_ticks_per_sec * t_secs;
        let mid = match (self.book.best_bid(), self.book.best_ask()) {
            (Some(b), Some(a)) => (b + a) as f64 / 2.0,
            _ => self.cfg.initial_mid_ticks as f64,
        };
        // Pull takers toward the target path.
        (0.5 + 0.35 * ((target - mid) / 3.0).tanh()).clamp(0.05, 0.95)
    }

    /// Reaction volume at depth d* proportional to this window's |move|,
    /// submitted and immediately cancelled so the book is left unchanged.
    fn inject_reaction(&mut self, ts: i64, ref_bid: i64, ref_ask: i64, moved_ticks: i64) -> Result<()> {
        if self.cfg.active_band_depth == 0 || self.cfg.reaction_coupling == 0.0 || moved_ticks == 0 {
            return Ok(());
        }
        let volume = (self.cfg.reaction_coupling * moved_ticks as f64).round() as u64;
        if volume == 0 {
            return Ok(());
        }
        let d = self.cfg.active_band_depth;
        let plans = [
            (Side::Buy, ref_bid - d),
            (Side::Sell, ref_ask + d),
        ];
        for (side, price) in plans {
            if price < 1 {
                continue;
            }
            // Skip if the book moved so far that the quote would cross.
            let crosses = match side {
                Side::Buy => self.book.best_ask().is_some_and(|a| price >= a),
                Side::Sell => self.book.best_bid().is_some_and(|b| price <= b),
            };
            if crosses {
                continue;
            }
            let mut left = volume;
            while left > 0 {
                let units = left.min(self.cfg.max_order_units.max(1));
                let id = self.fresh_id();
                self.book.insert(self.next_id, side, price, units, false);
                self.emit(ts, EventKind::Open, side, price, units, &id)?;
                let numeric = self.next_id;
                self.book.remove(numeric);
                self.emit(ts, EventKind::Cancel, side, price, units, &id)?;
                left -= units;
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<GroundTruth> {
        let cfg = self.cfg;
        let start = cfg.start_micros;
        let end = start + (cfg.duration_secs * 1e6) as i64;

        // Seed both ladders so early cancels and matches have targets.
        let mut ts = start;
        for i in 0..cfg.seed_orders_per_side {
            let depth = 1 + (i as i64 % cfg.band_depth_ticks);
            let bid_px = cfg.initial_mid_ticks - cfg.initial_spread_ticks / 2 - depth + 1;
            let ask_px = cfg.initial_mid_ticks + (cfg.initial_spread_ticks + 1) / 2 + depth - 1;
            let units = self.order_units();
            let id = self.fresh_id();
            self.book.insert(self.next_id, Side::Buy, bid_px, units, true);
            self.emit(ts, EventKind::Open, Side::Buy, bid_px, units, &id)?;
            let units = self.order_units();
            let id = self.fresh_id();
            self.book.insert(self.next_id, Side::Sell, ask_px, units, true);
            self.emit(ts, EventKind::Open, Side::Sell, ask_px, units, &id)?;
            ts += 1;
        }
        // Initial ticker snapshot; the last price starts at the mid.
        self.emit_ticker(ts, cfg.initial_mid_ticks)?;

        let total_rate =
            2.0 * cfg.submit_rate + 2.0 * cfg.cancel_rate + cfg.market_order_rate;
        if total_rate <= 0.0 {
            return Ok(self.ground_truth());
        }
        let window = 1_000_000i64;
        let mut next_window = (ts.div_euclid(window) + 1) * window;
        let mut window_ref_bid = self.book.best_bid().unwrap_or(cfg.initial_mid_ticks - 1);
        let mut window_ref_ask = self.book.best_ask().unwrap_or(cfg.initial_mid_ticks + 1);
        let mut window_start_px = self.last_match_px.unwrap_or(cfg.initial_mid_ticks);

        let mut t = ts;
        loop {
            // Exponential spacing of the merged Poisson clock.
            let u: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
            let gap_secs = -u.ln() / total_rate;
            let t_next = t + (gap_secs * 1e6).ceil().max(1.0) as i64;

            // Close any one-second windows that end strictly before the
            // next event: measure the move, inject the reaction, reset refs.
            while next_window < t_next {
                if next_window > end {
                    break;
                }
                let end_px = self.last_match_px.unwrap_or(window_start_px);
                let moved = (end_px - window_start_px).abs();
                self.inject_reaction(next_window, window_ref_bid, window_ref_ask, moved)?;
                window_ref_bid = self.book.best_bid().unwrap_or(window_ref_bid);
                window_ref_ask = self.book.best_ask().unwrap_or(window_ref_ask);
                window_start_px = end_px;
                next_window += window;
            }
            if t_next > end {
                break;
            }
            t = t_next;

            let draw: f64 = self.rng.gen_range(0.0..total_rate);
            if draw < 2.0 * cfg.submit_rate {
                let side = if draw < cfg.submit_rate { Side::Buy } else { Side::Sell };
                self.submit_background(t, side)?;
            } else if draw < 2.0 * cfg.submit_rate + 2.0 * cfg.cancel_rate {
                self.cancel_background(t)?;
            } else {
                let t_secs = (t - start) as f64 / 1e6;
                let p_buy = self.drift_buy_probability(t_secs);
                let taker = if self.rng.gen_bool(p_buy) { Side::Buy } else { Side::Sell };
                self.market_order(t, taker)?;
            }
        }
        Ok(self.ground_truth())
    }

    fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            seed: self.cfg.seed,
            d_star_ticks: self.cfg.active_band_depth,
            reaction_coupling: self.cfg.reaction_coupling,
            drift_ticks_per_sec: self.cfg.drift_ticks_per_sec,
            duration_secs: self.cfg.duration_secs,
            initial_mid_ticks: self.cfg.initial_mid_ticks,
            n_events: self.n_events,
            n_matches: self.n_matches,
        }
    }
}

/// Generate one stream pair into the sink. The seed fully determines the
/// output.
pub fn generate_into<S: SynthSink>(cfg: &SynthConfig, sink: &mut S) -> Result<GroundTruth> {
    cfg.validate()?;
    cfg.manifest().tick()?;
    cfg.manifest().lot()?;
    let mut generator = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        book: SimBook::default(),
        sink,
        next_id: 0,
        last_match_px: None,
        n_events: 0,
        n_matches: 0,
    };
    generator.run()
}

/// In-memory generation result.
#[derive(Debug)]
pub struct SynthOutput {
    pub events: Vec<OrderEvent>,
    pub ticker: Vec<TickerRecord>,
    pub ground_truth: GroundTruth,
    pub manifest: DatasetManifest,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    let mut sink = VecSink::default();
    let ground_truth = generate_into(cfg, &mut sink)?;
    Ok(SynthOutput {
        events: sink.events,
        ticker: sink.ticker,
        ground_truth,
        manifest: cfg.manifest(),
    })
}

/// Splice a large marketable buy of `units` into the stream at `at`,
/// consuming resting asks. Later events referencing consumed orders are
/// dropped and the ticker channel is rebuilt so the output stays valid.
pub fn inject_shock(output: &SynthOutput, at: Timestamp, units: u64) -> Result<SynthOutput> {
    if units == 0 {
        return Ok(SynthOutput {
            events: output.events.clone(),
            ticker: output.ticker.clone(),
            ground_truth: output.ground_truth.clone(),
            manifest: output.manifest.clone(),
        });
    }
    let mut book = SimBook::default();
    let mut next_numeric = 0u64;
    let mut ids: HashMap<String, u64> = HashMap::new();
    let mut events: Vec<OrderEvent> = Vec::with_capacity(output.events.len() + 4);
    let mut idx = 0usize;

    let apply = |book: &mut SimBook,
                     ids: &mut HashMap<String, u64>,
                     next_numeric: &mut u64,
                     ev: &OrderEvent|
     -> bool {
        match ev.kind {
            EventKind::Open => {
                *next_numeric += 1;
                ids.insert(ev.order_id.clone(), *next_numeric);
                book.insert(*next_numeric, ev.side, ev.price.ticks(), ev.size.units(), false);
                true
            }
            EventKind::Cancel => match ids.get(&ev.order_id) {
                Some(&num) if book.orders.contains_key(&num) => {
                    book.remove(num);
                    true
                }
                _ => false,
            },
            EventKind::ChangeSize => match ids.get(&ev.order_id) {
                Some(&num) if book.orders.contains_key(&num) => {
                    let order = book.orders[&num].clone();
                    book.remove(num);
                    if ev.size.units() > 0 {
                        book.insert(num, order.side, order.price, ev.size.units(), false);
                        ids.insert(ev.order_id.clone(), num);
                    }
                    true
                }
                _ => false,
            },
            EventKind::Match => match ids.get(&ev.order_id) {
                Some(&num) if book.orders.contains_key(&num) => {
                    if book.orders[&num].units < ev.size.units() {
                        return false;
                    }
                    book.consume(num, ev.size.units());
                    true
                }
                _ => false,
            },
        }
    };

    // Replay up to the shock instant.
    while idx < output.events.len() && output.events[idx].ts <= at {
        let ev = &output.events[idx];
        if apply(&mut book, &mut ids, &mut next_numeric, ev) {
            events.push(ev.clone());
        }
        idx += 1;
    }
    let available = book.side_units(Side::Sell);
    if available < units {
        return Err(Error::InsufficientLiquidity {
            requested: units,
            available,
        });
    }
    // Consume asks in price order, one match per maker.
    let numeric_to_id: HashMap<u64, String> = ids.iter().map(|(s, &n)| (n, s.clone())).collect();
    let mut remaining = units;
    while remaining > 0 {
        let (maker, price, maker_units) = book.front_of_best(Side::Buy).expect("liquidity checked");
        let take = remaining.min(maker_units);
        book.consume(maker, take);
        events.push(OrderEvent {
            ts: at,
            kind: EventKind::Match,
            side: Side::Buy,
            price: Price::from_ticks(price),
            size: Size::from_units(take),
            order_id: numeric_to_id[&maker].clone(),
        });
        remaining -= take;
    }
    // Replay the tail, dropping events invalidated by the shock.
    while idx < output.events.len() {
        let ev = &output.events[idx];
        if apply(&mut book, &mut ids, &mut next_numeric, ev) {
            events.push(ev.clone());
        }
        idx += 1;
    }

    let ticker = rebuild_ticker(&events, &output.ticker, output.ground_truth.initial_mid_ticks);
    Ok(SynthOutput {
        events,
        ticker,
        ground_truth: output.ground_truth.clone(),
        manifest: output.manifest.clone(),
    })
}

/// Recompute the ticker channel from the (valid) event stream: one initial
/// snapshot once both sides are quoted, then one record per match.
fn rebuild_ticker(events: &[OrderEvent], original: &[TickerRecord], initial_mid: i64) -> Vec<TickerRecord> {
    let with_sizes = original.first().map(|r| r.has_sizes()).unwrap_or(true);
    let mut book = SimBook::default();
    let mut next = 0u64;
    let mut ids: HashMap<String, u64> = HashMap::new();
    let mut out = Vec::new();
    let mut emitted_initial = false;
    let snapshot = |book: &SimBook, ts: Timestamp, last: i64, with_sizes: bool| -> Option<TickerRecord> {
        let (bid, ask) = (book.best_bid()?, book.best_ask()?);
        let (bid_size, ask_size) = if with_sizes {
            (
                Some(Size::from_units(book.level_units(Side::Buy, bid))),
                Some(Size::from_units(book.level_units(Side::Sell, ask))),
            )
        } else {
            (None, None)
        };
        Some(TickerRecord {
            ts,
            best_bid: Price::from_ticks(bid),
            best_ask: Price::from_ticks(ask),
            last_price: Price::from_ticks(last),
            bid_size,
            ask_size,
        })
    };
    for ev in events {
        match ev.kind {
            EventKind::Open => {
                next += 1;
                ids.insert(ev.order_id.clone(), next);
                book.insert(next, ev.side, ev.price.ticks(), ev.size.units(), false);
            }
            EventKind::Cancel => {
                if let Some(&num) = ids.get(&ev.order_id) {
                    book.remove(num);
                }
            }
            EventKind::ChangeSize => {
                if let Some(&num) = ids.get(&ev.order_id) {
                    if let Some(order) = book.orders.get(&num).cloned() {
                        book.remove(num);
                        if ev.size.units() > 0 {
                            book.insert(num, order.side, order.price, ev.size.units(), false);
                        }
                    }
                }
            }
            EventKind::Match => {
                if let Some(&num) = ids.get(&ev.order_id) {
                    if book.orders.contains_key(&num) {
                        book.consume(num, ev.size.units());
                        if let Some(rec) = snapshot(&book, ev.ts, ev.price.ticks(), with_sizes) {
                            out.push(rec);
                        }
                    }
                }
            }
        }
        if !emitted_initial {
            if let Some(rec) = snapshot(&book, ev.ts, initial_mid, with_sizes) {
                out.insert(0, rec);
                emitted_initial = true;
            }
        }
    }
    out
}
