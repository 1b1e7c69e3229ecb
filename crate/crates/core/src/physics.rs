//! Kinetic measures over the active area of the book.
//!
//! Orders are treated as particles on the price axis. A submission moves
//! from the active bid (or ask) to its quoted price within one sampling
//! interval; a cancellation moves back. Velocity is displacement over dt,
//! mass is the order size, and the book's kinetic energy and momentum are
//! the usual sums of s*v^2/2 and s*v over all activity inside the active
//! area [b_M - alpha, a_M + alpha].
//!
//! All displacement arithmetic happens in integer ticks; the conversion to
//! quote units per second is a single exact rational factor, so velocities
//! and per-frame increments are exact wherever the inputs are.

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frames::{Frame, FrameEvent};
use crate::stats::pearson;
use crate::types::{Aggressiveness, EventKind, Price, Rat, Side, Size, Timestamp};

/// quote-units-per-second per tick-per-frame: tick_size / dt.
pub fn velocity_scale(tick: Rat, dt_micros: i64) -> Rat {
    tick / Rat::new(dt_micros as i128, 1_000_000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityRole {
    SubmitBuy,
    CancelBuy,
    SubmitSell,
    CancelSell,
}

/// Velocity of one order activity against the frame-start references.
#[derive(Debug, Clone)]
pub struct VelocityRecord {
    pub ts: Timestamp,
    pub role: VelocityRole,
    /// Exact velocity in quote units per second.
    pub velocity: Rat,
    /// Displacement in ticks per frame (velocity / scale).
    pub displacement_ticks: i64,
    /// Quoted price after the marketable cap.
    pub effective_price: Price,
    pub in_active_area: bool,
    pub size: Size,
    pub aggressiveness: Aggressiveness,
}

fn role_of(fe: &FrameEvent) -> Option<VelocityRole> {
    let submit = |side: Side| match side {
        Side::Buy => VelocityRole::SubmitBuy,
        Side::Sell => VelocityRole::SubmitSell,
    };
    let cancel = |side: Side| match side {
        Side::Buy => VelocityRole::CancelBuy,
        Side::Sell => VelocityRole::CancelSell,
    };
    match fe.event.kind {
        EventKind::Open => Some(submit(fe.event.side)),
        EventKind::Cancel => Some(cancel(fe.event.side)),
        // A size change is a partial cancel (or a top-up) at the same depth.
        EventKind::ChangeSize => {
            if fe.resolved_size.is_zero() {
                None
            } else if fe.change_grew {
                Some(submit(fe.event.side))
            } else {
                Some(cancel(fe.event.side))
            }
        }
        // The taker side of a match is a marketable submission.
        EventKind::Match => Some(submit(fe.event.side)),
    }
}

/// Displacement in ticks and effective price for one role.
///
/// Submissions move from the active quote to the (capped) quoted price;
/// cancellations move the other way. Buys that cross the best ask are
/// capped there, sells that cross the best bid likewise.
pub fn displacement_ticks(
    role: VelocityRole,
    price: Price,
    ref_best_bid: Price,
    ref_best_ask: Price,
    alpha_ticks: i64,
) -> (i64, Price) {
    let b = ref_best_bid.ticks();
    let a = ref_best_ask.ticks();
    let p = price.ticks();
    match role {
        VelocityRole::SubmitBuy => {
            let p_eff = p.min(a);
            (p_eff - (b - alpha_ticks), Price::from_ticks(p_eff))
        }
        VelocityRole::CancelBuy => ((b - alpha_ticks) - p, price),
        VelocityRole::SubmitSell => {
            let p_eff = p.max(b);
            (p_eff - (a + alpha_ticks), Price::from_ticks(p_eff))
        }
        VelocityRole::CancelSell => ((a + alpha_ticks) - p, price),
    }
}

/// Velocity record for one frame event, or None when the event carries no
/// order activity (skipped orphans, zero-delta changes) or the frame has no
/// reference quotes yet.
pub fn order_velocity(fe: &FrameEvent, frame: &Frame, alpha_ticks: i64, scale: Rat) -> Option<VelocityRecord> {
    if !fe.applied {
        return None;
    }
    let (ref_b, ref_a) = frame.refs()?;
    let role = role_of(fe)?;
    let (delta, effective_price) = displacement_ticks(role, fe.event.price, ref_b, ref_a, alpha_ticks);
    let in_active_area = effective_price.ticks() >= ref_b.ticks() - alpha_ticks
        && effective_price.ticks() <= ref_a.ticks() + alpha_ticks;
    Some(VelocityRecord {
        ts: fe.event.ts,
        role,
        velocity: Rat::from_integer(delta as i128) * scale,
        displacement_ticks: delta,
        effective_price,
        in_active_area,
        size: fe.resolved_size,
        aggressiveness: fe.aggressiveness,
    })
}

/// Total size submitted or cancelled within depth gamma of the frame's
/// reference quotes. Matches are executions, not reactions, and are
/// excluded. A frame without reference quotes has no measurable band.
pub fn reacted_volume(frame: &Frame, gamma_ticks: i64) -> u64 {
    debug_assert!(gamma_ticks >= 0);
    let Some((ref_b, ref_a)) = frame.refs() else {
        return 0;
    };
    frame
        .events
        .iter()
        .filter(|fe| fe.applied && fe.event.kind != EventKind::Match)
        .filter(|fe| {
            let p = fe.event.price.ticks();
            p >= ref_b.ticks() - gamma_ticks && p <= ref_a.ticks() + gamma_ticks
        })
        .map(|fe| fe.resolved_size.units())
        .sum()
}

/// Smallest gamma at which a reacted event's price falls inside the band
/// [b - gamma, a + gamma]; negative for prices inside the spread.
fn gamma_threshold(price: Price, ref_b: Price, ref_a: Price) -> i64 {
    (ref_b.ticks() - price.ticks()).max(price.ticks() - ref_a.ticks())
}

/// Match-price velocity v*(T) = (p*(T) - p*(T - w)) / w on the window grid,
/// with p* carried forward across silent windows. Values are exact
/// rationals in quote units per second.
pub fn match_price_velocity(
    matches: &[(Timestamp, Price)],
    window_micros: i64,
    tick: Rat,
) -> Result<Vec<(Timestamp, Rat)>> {
    if window_micros <= 0 {
        return Err(Error::InvalidValue(format!("window must be positive, got {window_micros}us")));
    }
    if matches.is_empty() {
        return Err(Error::NoMatches);
    }
    let scale = velocity_scale(tick, window_micros);
    let first = matches[0].0.micros();
    let last = matches[matches.len() - 1].0.micros();
    let grid_end = |ts: i64| -> i64 {
        ts.div_euclid(window_micros) * window_micros
            + if ts.rem_euclid(window_micros) == 0 { 0 } else { window_micros }
    };
    let t0 = grid_end(first);
    let t_last = grid_end(last);
    let mut out = Vec::new();
    let mut idx = 0usize;
    let mut prev_px: Option<i64> = None;
    let mut t = t0;
    while t <= t_last {
        while idx < matches.len() && matches[idx].0.micros() <= t {
            idx += 1;
        }
        // Last match at or before t; idx > 0 is guaranteed from t0 onward.
        let px = matches[idx - 1].1.ticks();
        if let Some(prev) = prev_px {
            out.push((
                Timestamp::from_micros(t),
                Rat::from_integer((px - prev) as i128) * scale,
            ));
        }
        prev_px = Some(px);
        t += window_micros;
    }
    Ok(out)
}

/// Result of the correlation sweep defining the active depth.
#[derive(Debug, Clone)]
pub struct ActiveDepth {
    /// Depth maximizing the correlation, in ticks.
    pub alpha_ticks: i64,
    /// The same depth in quote currency.
    pub alpha_quote: f64,
    /// (gamma ticks, correlation) for every non-degenerate grid depth.
    pub correlation_curve: Vec<(i64, f64)>,
    /// Grid depths whose reacted-volume series was constant.
    pub degenerate_gammas: Vec<i64>,
    pub window_micros: i64,
    pub n_windows: usize,
    pub signed_correlation: bool,
}

#[derive(Debug, Clone)]
pub struct ActiveDepthConfig {
    /// Candidate depths in ticks, ascending.
    pub depth_grid: Vec<i64>,
    pub window_micros: i64,
    pub min_windows: usize,
    /// Correlate signed v* instead of |v*|. Off by default: reacted volume
    /// is unsigned, so symmetric up/down reactions would cancel.
    pub signed_correlation: bool,
}

impl ActiveDepthConfig {
    pub fn new(depth_grid: Vec<i64>) -> Self {
        ActiveDepthConfig {
            depth_grid,
            window_micros: 1_000_000,
            min_windows: 30,
            signed_correlation: false,
        }
    }
}

/// Log-spaced depth grid from 1 tick to 10% of the initial midprice.
pub fn default_depth_grid(initial_mid_ticks: i64, points: usize) -> Vec<i64> {
    let max_depth = (initial_mid_ticks / 10).max(1);
    log_depth_grid(1, max_depth, points)
}

/// Log-spaced integer grid between min and max ticks, deduplicated.
pub fn log_depth_grid(min_ticks: i64, max_ticks: i64, points: usize) -> Vec<i64> {
    let min = min_ticks.max(1);
    let max = max_ticks.max(min);
    if points <= 1 || min == max {
        return vec![min];
    }
    let lmin = (min as f64).ln();
    let lmax = (max as f64).ln();
    let mut grid: Vec<i64> = (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            (lmin + f * (lmax - lmin)).exp().round() as i64
        })
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Sweep the depth grid for the depth whose reacted volume co-moves most
/// with the match-price velocity. Frames must be sampled at the window
/// width (one second in the reference setup).
pub fn active_depth<I>(frames: I, tick: Rat, cfg: &ActiveDepthConfig) -> Result<ActiveDepth>
where
    I: Iterator<Item = Result<Frame>>,
{
    if cfg.depth_grid.is_empty() {
        return Err(Error::InvalidValue("depth grid is empty".into()));
    }
    let mut grid = cfg.depth_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    if grid[0] < 0 {
        return Err(Error::InvalidValue("depth grid must be non-negative".into()));
    }
    let scale = velocity_scale(tick, cfg.window_micros);

    // Per valid window: velocity and reacted volume cumulated over the grid.
    let mut velocities: Vec<f64> = Vec::new();
    let mut volumes: Vec<Vec<u64>> = Vec::new();
    for frame in frames {
        let frame = frame?;
        if frame.dt_micros != cfg.window_micros {
            return Err(Error::InvalidValue(format!(
                "frames sampled at {}us but active-depth window is {}us",
                frame.dt_micros, cfg.window_micros
            )));
        }
        let Some((ref_b, ref_a)) = frame.refs() else { continue };
        let Some(start_px) = frame.ref_p_star else { continue };
        let end_px = frame
            .events
            .iter()
            .rev()
            .find(|fe| fe.applied && fe.event.kind == EventKind::Match)
            .map(|fe| fe.event.price)
            .unwrap_or(start_px);
        let v = (Rat::from_integer((end_px.ticks() - start_px.ticks()) as i128) * scale)
            .to_f64()
            .unwrap_or(0.0);
        velocities.push(if cfg.signed_correlation { v } else { v.abs() });

        let mut bins = vec![0u64; grid.len()];
        for fe in &frame.events {
            if !fe.applied || fe.event.kind == EventKind::Match || fe.resolved_size.is_zero() {
                continue;
            }
            let threshold = gamma_threshold(fe.event.price, ref_b, ref_a);
            let first = grid.partition_point(|&g| g < threshold);
            if first < bins.len() {
                bins[first] += fe.resolved_size.units();
            }
        }
        // Prefix sums: bins[j] becomes the reacted volume at grid[j].
        for j in 1..bins.len() {
            bins[j] += bins[j - 1];
        }
        volumes.push(bins);
    }

    let n = velocities.len();
    if n < cfg.min_windows {
        return Err(Error::TooFewWindows {
            required: cfg.min_windows,
            actual: n,
        });
    }

    let correlations: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let ys: Vec<f64> = volumes.iter().map(|w| w[j] as f64).collect();
            pearson(&velocities, &ys)
        })
        .collect();

    let mut curve = Vec::new();
    let mut degenerate = Vec::new();
    for (j, corr) in correlations.iter().enumerate() {
        match corr {
            Some(c) => curve.push((grid[j], *c)),
            None => degenerate.push(grid[j]),
        }
    }
    if curve.is_empty() {
        return Err(Error::DegenerateSeries);
    }
    // Argmax with ties broken toward the smallest depth.
    let mut best = curve[0];
    for &(g, c) in &curve[1..] {
        if c > best.1 {
            best = (g, c);
        }
    }
    Ok(ActiveDepth {
        alpha_ticks: best.0,
        alpha_quote: (Rat::from_integer(best.0 as i128) * tick).to_f64().unwrap_or(f64::NAN),
        correlation_curve: curve,
        degenerate_gammas: degenerate,
        window_micros: cfg.window_micros,
        n_windows: n,
        signed_correlation: cfg.signed_correlation,
    })
}

/// Per-frame energy/momentum increments plus cumulative sums, with the
/// limit/market decomposition. Increments are exact rationals; convert to
/// f64 only at the output boundary.
#[derive(Debug, Clone, Default)]
pub struct PhysicsSeries {
    pub t_end_micros: Vec<i64>,
    pub e_incr: Vec<Rat>,
    pub p_incr: Vec<Rat>,
    pub e_limit: Vec<Rat>,
    pub p_limit: Vec<Rat>,
    pub e_market: Vec<Rat>,
    pub p_market: Vec<Rat>,
    /// Events excluded because no reference quotes existed yet.
    pub skipped_no_refs: u64,
}

impl PhysicsSeries {
    pub fn len(&self) -> usize {
        self.t_end_micros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_end_micros.is_empty()
    }

    /// Cumulative kinetic energy E(t): prefix sums of the increments.
    pub fn e_cum(&self) -> Vec<Rat> {
        prefix_sums(&self.e_incr)
    }

    /// Cumulative momentum P(t).
    pub fn p_cum(&self) -> Vec<Rat> {
        prefix_sums(&self.p_incr)
    }

    pub fn p_cum_market(&self) -> Vec<Rat> {
        prefix_sums(&self.p_market)
    }

    pub fn p_cum_limit(&self) -> Vec<Rat> {
        prefix_sums(&self.p_limit)
    }
}

fn prefix_sums(xs: &[Rat]) -> Vec<Rat> {
    let mut acc = Rat::zero();
    xs.iter()
        .map(|x| {
            acc += *x;
            acc
        })
        .collect()
}

/// Fold a frame stream into the energy/momentum series at a fixed active
/// depth. Sizes enter in lot units, velocities in quote units per second.
pub fn physics_series<I>(frames: I, tick: Rat, alpha_ticks: i64, dt_micros: i64) -> Result<PhysicsSeries>
where
    I: Iterator<Item = Result<Frame>>,
{
    let scale = velocity_scale(tick, dt_micros);
    // s*v and s*v^2 are accumulated in the integer tick domain and scaled
    // once per frame, which keeps every increment exact.
    let p_scale = scale;
    let e_scale = scale * scale / 2;
    let mut out = PhysicsSeries::default();
    for frame in frames {
        let frame = frame?;
        if frame.dt_micros != dt_micros {
            return Err(Error::InvalidValue(format!(
                "frames sampled at {}us but series dt is {}us",
                frame.dt_micros, dt_micros
            )));
        }
        let mut sums = [[0i128; 2]; 3]; // [total, limit, market] x [sv, sv2]
        for fe in &frame.events {
            if frame.refs().is_none() && fe.applied {
                out.skipped_no_refs += 1;
                continue;
            }
            let Some(rec) = order_velocity(fe, &frame, alpha_ticks, scale) else {
                continue;
            };
            if !rec.in_active_area {
                continue;
            }
            let s = rec.size.units() as i128;
            let d = rec.displacement_ticks as i128;
            let sv = s * d;
            let sv2 = s * d * d;
            sums[0][0] += sv;
            sums[0][1] += sv2;
            let class = match rec.aggressiveness {
                Aggressiveness::Limit => 1,
                Aggressiveness::Market => 2,
            };
            sums[class][0] += sv;
            sums[class][1] += sv2;
        }
        out.t_end_micros.push(frame.t_end.micros());
        out.p_incr.push(p_scale * sums[0][0]);
        out.e_incr.push(e_scale * sums[0][1]);
        out.p_limit.push(p_scale * sums[1][0]);
        out.e_limit.push(e_scale * sums[1][1]);
        out.p_market.push(p_scale * sums[2][0]);
        out.e_market.push(e_scale * sums[2][1]);
    }
    if out.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::ReplayMode;
    use crate::frames::sample_frames;
    use crate::types::OrderEvent;

    fn tick() -> Rat {
        Rat::new(1, 100) // 0.01
    }

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

    fn frames_of(events: Vec<OrderEvent>, dt: i64) -> Vec<Frame> {
        sample_frames(events.into_iter().map(Ok), dt, ReplayMode::Lenient)
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap()
    }

    /// Seed frame refs at b=100.00, a=100.02 and keep activity in later frames.
    fn seeded(events: Vec<OrderEvent>, dt: i64) -> Vec<Frame> {
        let mut all = vec![
            ev(1, EventKind::Open, Side::Buy, 10_000, 100, "seed-b"),
            ev(2, EventKind::Open, Side::Sell, 10_002, 100, "seed-s"),
        ];
        all.extend(events);
        frames_of(all, dt)
    }

    #[test]
    fn submit_buy_velocity_matches_hand_value() {
        // b_M = 100.00, alpha = 0.50 = 50 ticks, p = 99.80, dt = 0.1 -> +3.0/s
        let frames = seeded(vec![ev(150_000, EventKind::Open, Side::Buy, 9_980, 2, "x")], 100_000);
        let frame = &frames[1];
        let rec = order_velocity(&frame.events[0], frame, 50, velocity_scale(tick(), 100_000)).unwrap();
        assert_eq!(rec.displacement_ticks, 30);
        assert_eq!(rec.velocity, Rat::from_integer(3));
        assert_eq!(rec.velocity.to_f64().unwrap(), 3.0);
        assert!(rec.in_active_area);
        assert_eq!(rec.aggressiveness, Aggressiveness::Limit);
    }

    #[test]
    fn submit_at_active_bid_has_zero_velocity() {
        let frames = seeded(vec![ev(150_000, EventKind::Open, Side::Buy, 9_950, 2, "x")], 100_000);
        let frame = &frames[1];
        let rec = order_velocity(&frame.events[0], frame, 50, velocity_scale(tick(), 100_000)).unwrap();
        assert_eq!(rec.velocity, Rat::zero());
        assert!(rec.in_active_area);
    }

    #[test]
    fn cancel_is_exact_negative_of_submit() {
        let frames = seeded(
            vec![
                ev(150_000, EventKind::Open, Side::Buy, 9_980, 2, "x"),
                ev(160_000, EventKind::Cancel, Side::Buy, 9_980, 2, "x"),
            ],
            100_000,
        );
        let frame = &frames[1];
        let scale = velocity_scale(tick(), 100_000);
        let submit = order_velocity(&frame.events[0], frame, 50, scale).unwrap();
        let cancel = order_velocity(&frame.events[1], frame, 50, scale).unwrap();
        assert_eq!(cancel.velocity, -submit.velocity);
        assert_eq!(cancel.velocity.to_f64().unwrap(), -3.0);
    }

    #[test]
    fn crossing_buy_is_capped_at_best_ask() {
        // Marketable submission beyond a_M caps at a_M and classifies market.
        let frames = seeded(vec![ev(150_000, EventKind::Match, Side::Buy, 10_002, 1, "seed-s")], 100_000);
        let frame = &frames[1];
        let rec = order_velocity(&frame.events[0], frame, 50, velocity_scale(tick(), 100_000)).unwrap();
        assert_eq!(rec.effective_price, Price::from_ticks(10_002));
        assert_eq!(rec.aggressiveness, Aggressiveness::Market);
        // displacement = a_M - (b_M - alpha) = 10002 - 9950 = 52 ticks
        assert_eq!(rec.displacement_ticks, 52);
    }

    #[test]
    fn submit_sell_velocity_is_negative_inside_area() {
        let frames = seeded(vec![ev(150_000, EventKind::Open, Side::Sell, 10_010, 3, "x")], 100_000);
        let frame = &frames[1];
        let rec = order_velocity(&frame.events[0], frame, 50, velocity_scale(tick(), 100_000)).unwrap();
        // (10010 - (10002 + 50)) = -42 ticks
        assert_eq!(rec.displacement_ticks, -42);
        assert!(rec.in_active_area);
        assert!(rec.velocity < Rat::zero());
    }

    #[test]
    fn reacted_volume_band_examples() {
        // One submit of size 2 at depth 10 plus one cancel of size 3 at
        // depth 40: gamma 50 -> 5, gamma 20 -> 2. The cancelled order was
        // opened in the previous frame.
        let mut events = vec![
            ev(1, EventKind::Open, Side::Buy, 10_000, 100, "seed-b"),
            ev(2, EventKind::Open, Side::Sell, 10_002, 100, "seed-s"),
            ev(3, EventKind::Open, Side::Sell, 10_042, 3, "d40"),
        ];
        events.push(ev(150_000, EventKind::Open, Side::Buy, 9_990, 2, "d10"));
        events.push(ev(160_000, EventKind::Cancel, Side::Sell, 10_042, 3, "d40"));
        let frames = frames_of(events, 100_000);
        let frame = &frames[1];
        assert_eq!(reacted_volume(frame, 50), 5);
        assert_eq!(reacted_volume(frame, 20), 2);
        assert_eq!(reacted_volume(frame, 0), 0);
        // No submissions or cancellations in a window -> 0.
        let quiet = seeded(vec![ev(550_000, EventKind::Open, Side::Buy, 9_990, 2, "a")], 100_000);
        assert_eq!(reacted_volume(&quiet[1], 1_000), 0);
    }

    #[test]
    fn reacted_volume_is_monotone_in_gamma() {
        let frames = seeded(
            vec![
                ev(150_000, EventKind::Open, Side::Buy, 9_990, 2, "a"),
                ev(151_000, EventKind::Open, Side::Buy, 9_940, 7, "b"),
                ev(152_000, EventKind::Open, Side::Sell, 10_080, 4, "c"),
            ],
            100_000,
        );
        let frame = &frames[1];
        let mut prev = 0;
        for gamma in 0..120 {
            let v = reacted_volume(frame, gamma);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn empty_frame_contributes_zero() {
        let frames = seeded(vec![ev(500_000, EventKind::Open, Side::Buy, 9_990, 2, "a")], 100_000);
        let series = physics_series(frames.into_iter().map(Ok), tick(), 50, 100_000).unwrap();
        // Frames between the seed and the late event are all-zero.
        assert_eq!(series.e_incr[1], Rat::zero());
        assert_eq!(series.p_incr[1], Rat::zero());
    }

    #[test]
    fn energy_and_momentum_hand_example() {
        // Single submit buy, s = 2 lots, v = +3.0 -> e = 9.0, p = +6.0.
        let frames = seeded(vec![ev(150_000, EventKind::Open, Side::Buy, 9_980, 2, "x")], 100_000);
        let series = physics_series(frames.into_iter().map(Ok), tick(), 50, 100_000).unwrap();
        assert_eq!(series.e_incr[1], Rat::from_integer(9));
        assert_eq!(series.p_incr[1], Rat::from_integer(6));
        assert_eq!(series.e_limit[1], Rat::from_integer(9));
        assert_eq!(series.e_market[1], Rat::zero());
    }

    #[test]
    fn submit_then_cancel_cancels_momentum_not_energy() {
        let frames = seeded(
            vec![
                ev(150_000, EventKind::Open, Side::Buy, 9_980, 2, "x"),
                ev(160_000, EventKind::Cancel, Side::Buy, 9_980, 2, "x"),
            ],
            100_000,
        );
        let series = physics_series(frames.into_iter().map(Ok), tick(), 50, 100_000).unwrap();
        assert_eq!(series.p_incr[1], Rat::zero());
        assert_eq!(series.e_incr[1], Rat::from_integer(18)); // 2 * (1/2 * 2 * 9)
    }

    #[test]
    fn match_price_velocity_examples() {
        let t = tick();
        // 100.00 -> 100.30 over one second: 0.30/s.
        let matches = vec![
            (Timestamp::from_micros(500_000), Price::from_ticks(10_000)),
            (Timestamp::from_micros(1_500_000), Price::from_ticks(10_030)),
        ];
        let v = match_price_velocity(&matches, 1_000_000, t).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].1, Rat::new(30, 100));
        // Silent window: carried forward, velocity zero.
        let matches = vec![
            (Timestamp::from_micros(500_000), Price::from_ticks(10_000)),
            (Timestamp::from_micros(3_500_000), Price::from_ticks(10_000)),
        ];
        let v = match_price_velocity(&matches, 1_000_000, t).unwrap();
        assert!(v.iter().all(|(_, v)| v.is_zero()));
        assert!(matches!(
            match_price_velocity(&[], 1_000_000, t),
            Err(Error::NoMatches)
        ));
    }

    #[test]
    fn match_price_velocity_ramp_is_constant() {
        // p*(t) = p0 + c t with c = 8 ticks per second: +2 ticks per 250ms.
        let t = tick();
        let matches: Vec<(Timestamp, Price)> = (0..=96)
            .map(|i| (Timestamp::from_micros(i * 250_000), Price::from_ticks(10_000 + 2 * i)))
            .collect();
        let v = match_price_velocity(&matches, 1_000_000, t).unwrap();
        assert_eq!(v.len(), 24);
        for (_, vel) in v {
            assert_eq!(vel, Rat::new(8, 100));
        }
    }

    #[test]
    fn active_depth_recovers_injected_band() {
        // The match price toggles one tick on even windows, stays put on odd
        // ones. Reaction volume at depth 25 co-moves with |v*|; background
        // volume at depth 80 does not. The sweep must pick 25.
        let mut events = vec![
            ev(1, EventKind::Open, Side::Buy, 10_000, 1000, "seed-b"),
            ev(2, EventKind::Open, Side::Sell, 10_002, 1000, "seed-s"),
            ev(3, EventKind::Open, Side::Sell, 10_003, 1000, "seed-s2"),
            ev(4, EventKind::Match, Side::Buy, 10_002, 1, "seed-s"),
        ];
        let mut id = 0usize;
        for w in 0..200i64 {
            let t0 = 1_000_000 * (w + 1);
            let moving = w % 2 == 0;
            if moving {
                // Alternate the trade between the two resting asks.
                let (px, maker) = if w % 4 == 0 { (10_003, "seed-s2") } else { (10_002, "seed-s") };
                events.push(ev(t0 + 1_000, EventKind::Match, Side::Buy, px, 1, maker));
                // Reaction at depth 25 below the (stationary) best bid.
                for j in 0..10 {
                    events.push(ev(
                        t0 + 10_000 + j,
                        EventKind::Open,
                        Side::Buy,
                        10_000 - 25,
                        40,
                        &format!("r{id}"),
                    ));
                    id += 1;
                }
            }
            // Background at depth 80 varying on an unrelated schedule.
            let n_bg = if w % 3 == 0 { 6 } else { 2 };
            for j in 0..n_bg {
                events.push(ev(
                    t0 + 50_000 + j,
                    EventKind::Open,
                    Side::Buy,
                    10_000 - 80,
                    15,
                    &format!("g{id}"),
                ));
                id += 1;
            }
        }
        let frames = frames_of(events, 1_000_000);
        let cfg = ActiveDepthConfig::new((1..=120).collect());
        let ad = active_depth(frames.into_iter().map(Ok), tick(), &cfg).unwrap();
        assert_eq!(ad.alpha_ticks, 25);
        assert!(ad.n_windows >= 30);
        // Depths below the injected band never see any volume.
        assert!(ad.degenerate_gammas.contains(&10));
    }

    #[test]
    fn active_depth_needs_enough_windows() {
        let frames = seeded(vec![ev(1_500_000, EventKind::Open, Side::Buy, 9_990, 1, "a")], 1_000_000);
        let cfg = ActiveDepthConfig::new(vec![10, 20]);
        assert!(matches!(
            active_depth(frames.into_iter().map(Ok), tick(), &cfg),
            Err(Error::TooFewWindows { .. })
        ));
    }

    #[test]
    fn depth_grid_is_log_spaced_and_deduplicated() {
        let grid = log_depth_grid(1, 1000, 50);
        assert_eq!(*grid.first().unwrap(), 1);
        assert_eq!(*grid.last().unwrap(), 1000);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        let dflt = default_depth_grid(1_600_000, 200);
        assert_eq!(*dflt.last().unwrap(), 160_000);
    }
}
