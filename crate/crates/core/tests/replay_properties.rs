//! Property tests for the book state machine and the frame sampler.

use proptest::prelude::*;

use lobkinetics::book::{Book, ReplayMode};
use lobkinetics::frames::{depth_of, sample_frames};
use lobkinetics::types::{EventKind, OrderEvent, Price, Side, Size, Timestamp};

fn ev(ts: i64, kind: EventKind, side: Side, price: i64, size: u64, id: String) -> OrderEvent {
    OrderEvent {
        ts: Timestamp::from_micros(ts),
        kind,
        side,
        price: Price::from_ticks(price),
        size: Size::from_units(size),
        order_id: id,
    }
}

/// Random non-crossing opens: buys below 10_000, sells above.
fn opens_strategy() -> impl Strategy<Value = Vec<OrderEvent>> {
    prop::collection::vec(
        (any::<bool>(), 1i64..999, 1u64..100),
        1..40,
    )
    .prop_map(|specs| {
        specs
            .into_iter()
            .enumerate()
            .map(|(i, (is_buy, depth, size))| {
                let (side, price) = if is_buy {
                    (Side::Buy, 10_000 - depth)
                } else {
                    (Side::Sell, 10_000 + depth)
                };
                ev(i as i64 + 1, EventKind::Open, side, price, size, format!("o{i}"))
            })
            .collect()
    })
}

proptest! {
    /// Opening a set of orders and then cancelling every one of them (in a
    /// shuffled order) returns the book to its initial empty state.
    #[test]
    fn open_then_cancel_all_restores_initial_state(
        opens in opens_strategy(),
        shuffle_seed in any::<u64>(),
    ) {
        let mut book = Book::new(ReplayMode::Strict);
        for ev in &opens {
            book.apply_event(ev).unwrap();
        }
        // Deterministic shuffle of the cancel order.
        let mut order: Vec<usize> = (0..opens.len()).collect();
        let mut state = shuffle_seed;
        for i in (1..order.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            order.swap(i, j);
        }
        let mut ts = opens.len() as i64 + 1;
        for &i in &order {
            let o = &opens[i];
            book.apply_event(&ev(ts, EventKind::Cancel, o.side, o.price.ticks(), 0, o.order_id.clone()))
                .unwrap();
            ts += 1;
        }
        prop_assert_eq!(book.live_orders(), 0);
        prop_assert!(book.best_bid().is_none());
        prop_assert!(book.best_ask().is_none());
    }

    /// After every applied event the book is uncrossed.
    #[test]
    fn book_never_crosses_on_valid_streams(opens in opens_strategy()) {
        let mut book = Book::new(ReplayMode::Strict);
        for ev in &opens {
            book.apply_event(ev).unwrap();
            if let (Some(b), Some(a)) = (book.best_bid(), book.best_ask()) {
                prop_assert!(b < a);
            }
        }
    }

    /// Frames partition the stream: every event in exactly one frame, order
    /// preserved under concatenation.
    #[test]
    fn frames_partition_the_event_stream(
        gaps in prop::collection::vec(0i64..400_000, 1..60),
    ) {
        let mut ts = 5_000i64;
        let mut events = Vec::new();
        for (i, gap) in gaps.iter().enumerate() {
            ts += gap;
            events.push(ev(ts, EventKind::Open, Side::Buy, 9_000 - i as i64, 1, format!("o{i}")));
        }
        let dt = 100_000;
        let frames: Vec<_> = sample_frames(events.clone().into_iter().map(Ok), dt, ReplayMode::Strict)
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        let mut concatenated = Vec::new();
        for frame in &frames {
            for fe in &frame.events {
                // Containment in the half-open interval.
                prop_assert!(fe.event.ts.micros() > frame.t_end.micros() - dt);
                prop_assert!(fe.event.ts.micros() <= frame.t_end.micros());
                concatenated.push(fe.event.clone());
            }
        }
        prop_assert_eq!(concatenated, events);
        // Grid is contiguous.
        for pair in frames.windows(2) {
            prop_assert_eq!(pair[1].t_end.micros() - pair[0].t_end.micros(), dt);
        }
    }

    /// The same-side best quote is always at depth zero.
    #[test]
    fn depth_of_best_quotes_is_zero(bid in 1i64..100_000, spread in 1i64..500) {
        let b = Price::from_ticks(bid);
        let a = Price::from_ticks(bid + spread);
        prop_assert_eq!(depth_of(b, a, Side::Buy, b), 0);
        prop_assert_eq!(depth_of(b, a, Side::Sell, a), 0);
    }
}
