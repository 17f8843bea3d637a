//! Exact PnL accounting.
//!
//! Three equivalent forms are provided: the direct sum over orders, the
//! sold/bought totals plus position value, and a realized/unrealized split
//! driven by a lot-matching method. All amounts are in quanta; the instrument
//! multiplier is applied when rendering to currency.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::market::{Money, Order, Side, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Fifo,
    Lifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotMatch {
    pub sell_price: Tick,
    pub buy_price: Tick,
    pub quantity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedLot {
    pub side: Side,
    pub price: Tick,
    pub quantity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PnlBreakdown {
    pub realized: Money,
    pub unrealized: Money,
    pub total: Money,
}

/// Bought quantity minus sold quantity.
pub fn signed_open_position(orders: &[Order]) -> i64 {
    orders
        .iter()
        .map(|o| -o.sign() * o.quantity as i64)
        .sum()
}

/// Mark-to-market value of a signed position at `price`.
pub fn position_value(position: i64, price: Tick) -> Money {
    Money(price as i128 * position as i128)
}

/// `sum(s_h * (p_h - P) * q_h)` over all orders.
pub fn pnl_direct(orders: &[Order], price: Tick) -> Money {
    orders
        .iter()
        .map(|o| Money(o.sign() as i128 * (o.price - price) as i128 * o.quantity as i128))
        .sum()
}

/// Value sold minus value bought plus the value of the open position.
pub fn pnl_via_position(orders: &[Order], price: Tick) -> Money {
    let mut sold: i128 = 0;
    let mut bought: i128 = 0;
    for o in orders {
        let value = o.price as i128 * o.quantity as i128;
        match o.side {
            Side::Sell => sold += value,
            Side::Buy => bought += value,
        }
    }
    Money(sold - bought) + position_value(signed_open_position(orders), price)
}

/// Pairs opposite-side quantities in order sequence.
///
/// Open lots always share one side. An incoming order of the other side is
/// matched greedily against the oldest (FIFO) or newest (LIFO) open lot,
/// splitting lots where quantities differ; any remainder opens a new lot.
pub fn match_lots(orders: &[Order], method: MatchMethod) -> (Vec<LotMatch>, Vec<UnmatchedLot>) {
    let mut open: VecDeque<UnmatchedLot> = VecDeque::new();
    let mut matches = Vec::new();

    for order in orders {
        let mut remaining = order.quantity;
        while remaining > 0 {
            let lot = match open.front() {
                Some(front) if front.side != order.side => match method {
                    MatchMethod::Fifo => open.front_mut(),
                    MatchMethod::Lifo => open.back_mut(),
                },
                _ => None,
            };
            let Some(lot) = lot else { break };

            let qty = remaining.min(lot.quantity);
            let (sell_price, buy_price) = match order.side {
                Side::Sell => (order.price, lot.price),
                Side::Buy => (lot.price, order.price),
            };
            matches.push(LotMatch {
                sell_price,
                buy_price,
                quantity: qty,
            });
            lot.quantity -= qty;
            remaining -= qty;
            if lot.quantity == 0 {
                match method {
                    MatchMethod::Fifo => open.pop_front(),
                    MatchMethod::Lifo => open.pop_back(),
                };
            }
        }
        if remaining > 0 {
            open.push_back(UnmatchedLot {
                side: order.side,
                price: order.price,
                quantity: remaining,
            });
        }
    }
    (matches, open.into())
}

pub fn pnl_decomposed(matches: &[LotMatch], unmatched: &[UnmatchedLot], price: Tick) -> PnlBreakdown {
    let realized: Money = matches
        .iter()
        .map(|m| Money((m.sell_price - m.buy_price) as i128 * m.quantity as i128))
        .sum();
    let unrealized: Money = unmatched
        .iter()
        .map(|u| Money(u.side.sign() as i128 * (u.price - price) as i128 * u.quantity as i128))
        .sum();
    PnlBreakdown {
        realized,
        unrealized,
        total: realized + unrealized,
    }
}

/// Fill history of one strategy with O(1) running totals.
///
/// `pnl_at` uses the position form on running sums, so evaluating the PnL on
/// every tick does not rescan the history. Commissions are tracked apart from
/// trading PnL.
#[derive(Debug, Clone, Default)]
pub struct FillLedger {
    orders: Vec<Order>,
    signed_value: i128,
    position: i64,
    commissions: Money,
    quantity: u64,
}

impl FillLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, order: Order, commission: Money) {
        self.signed_value += order.signed_value();
        self.position -= order.sign() * order.quantity as i64;
        self.quantity += order.quantity;
        self.commissions += commission;
        self.orders.push(order);
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    pub fn position(&self) -> i64 {
        self.position
    }

    pub fn commissions(&self) -> Money {
        self.commissions
    }

    pub fn total_quantity(&self) -> u64 {
        self.quantity
    }

    /// Trading PnL at `price`, before commissions.
    pub fn gross_pnl_at(&self, price: Tick) -> Money {
        Money(self.signed_value) + position_value(self.position, price)
    }

    pub fn net_pnl_at(&self, price: Tick) -> Money {
        self.gross_pnl_at(price) - self.commissions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn o(id: u64, side: Side, price: Tick, qty: u64) -> Order {
        Order::new(id, id, side, price, qty).unwrap()
    }

    fn three_orders() -> Vec<Order> {
        vec![
            o(1, Side::Buy, 10_000, 1),
            o(2, Side::Buy, 10_100, 1),
            o(3, Side::Sell, 10_500, 1),
        ]
    }

    #[test]
    fn open_position() {
        assert_eq!(signed_open_position(&[]), 0);
        assert_eq!(
            signed_open_position(&[o(1, Side::Buy, 1, 5), o(2, Side::Sell, 1, 2)]),
            3
        );
        assert_eq!(
            signed_open_position(&[o(1, Side::Buy, 1, 1), o(2, Side::Sell, 1, 1)]),
            0
        );
    }

    #[test]
    fn position_values() {
        assert_eq!(position_value(0, 12_345), Money(0));
        assert_eq!(position_value(3, 10_400), Money(31_200));
        assert_eq!(position_value(-2, 10_000), Money(-20_000));
    }

    #[test]
    fn direct_and_position_forms() {
        assert_eq!(pnl_direct(&[], 10_000), Money(0));
        assert_eq!(pnl_via_position(&[], 10_000), Money(0));
        let one = [o(1, Side::Buy, 10_000, 1)];
        assert_eq!(pnl_direct(&one, 10_500), Money(500));
        assert_eq!(pnl_via_position(&one, 10_500), Money(500));
        let flat = [o(1, Side::Sell, 10_200, 2), o(2, Side::Buy, 10_200, 2)];
        for p in [0, 9_000, 10_200, 55_555] {
            assert_eq!(pnl_direct(&flat, p), Money(0));
        }
    }

    #[test]
    fn fifo_and_lifo_traces() {
        let orders = three_orders();
        let (m, u) = match_lots(&orders, MatchMethod::Fifo);
        assert_eq!(m, vec![LotMatch { sell_price: 10_500, buy_price: 10_000, quantity: 1 }]);
        assert_eq!(u, vec![UnmatchedLot { side: Side::Buy, price: 10_100, quantity: 1 }]);
        let b = pnl_decomposed(&m, &u, 10_400);
        assert_eq!((b.realized, b.unrealized, b.total), (Money(500), Money(300), Money(800)));

        let (m, u) = match_lots(&orders, MatchMethod::Lifo);
        assert_eq!(m, vec![LotMatch { sell_price: 10_500, buy_price: 10_100, quantity: 1 }]);
        assert_eq!(u, vec![UnmatchedLot { side: Side::Buy, price: 10_000, quantity: 1 }]);
        let b = pnl_decomposed(&m, &u, 10_400);
        assert_eq!((b.realized, b.unrealized, b.total), (Money(400), Money(400), Money(800)));
        assert_eq!(pnl_direct(&orders, 10_400), Money(800));
    }

    #[test]
    fn single_order_and_empty_matching() {
        let (m, u) = match_lots(&[o(1, Side::Sell, 10_500, 1)], MatchMethod::Fifo);
        assert!(m.is_empty());
        assert_eq!(u, vec![UnmatchedLot { side: Side::Sell, price: 10_500, quantity: 1 }]);
        assert_eq!(pnl_decomposed(&[], &[], 10_000), PnlBreakdown::default());
    }

    #[test]
    fn partial_lots_split() {
        let orders = [o(1, Side::Buy, 100, 3), o(2, Side::Sell, 110, 5)];
        let (m, u) = match_lots(&orders, MatchMethod::Fifo);
        assert_eq!(m, vec![LotMatch { sell_price: 110, buy_price: 100, quantity: 3 }]);
        assert_eq!(u, vec![UnmatchedLot { side: Side::Sell, price: 110, quantity: 2 }]);
    }

    #[test]
    fn ledger_tracks_running_totals() {
        let mut ledger = FillLedger::new();
        for order in three_orders() {
            ledger.record(order, Money(7));
        }
        assert_eq!(ledger.position(), 1);
        assert_eq!(ledger.gross_pnl_at(10_400), Money(800));
        assert_eq!(ledger.net_pnl_at(10_400), Money(800 - 21));
        assert_eq!(ledger.total_quantity(), 3);
    }

    fn arb_orders() -> impl Strategy<Value = Vec<Order>> {
        prop::collection::vec((any::<bool>(), 9_000i64..11_000, 1u64..20), 0..50).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (sell, p, q))| {
                    let side = if sell { Side::Sell } else { Side::Buy };
                    o(i as u64 + 1, side, p, q)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn all_forms_agree(orders in arb_orders(), price in 9_000i64..11_000) {
            let direct = pnl_direct(&orders, price);
            prop_assert_eq!(pnl_via_position(&orders, price), direct);
            for method in [MatchMethod::Fifo, MatchMethod::Lifo] {
                let (m, u) = match_lots(&orders, method);
                prop_assert_eq!(pnl_decomposed(&m, &u, price).total, direct);
            }
            let mut ledger = FillLedger::new();
            orders.iter().for_each(|o| ledger.record(*o, Money::ZERO));
            prop_assert_eq!(ledger.gross_pnl_at(price), direct);
        }

        #[test]
        fn matching_conserves_quantity(orders in arb_orders()) {
            for method in [MatchMethod::Fifo, MatchMethod::Lifo] {
                let (m, u) = match_lots(&orders, method);
                let matched: u64 = m.iter().map(|x| x.quantity).sum();
                for side in [Side::Buy, Side::Sell] {
                    let total: u64 = orders.iter().filter(|o| o.side == side).map(|o| o.quantity).sum();
                    let open: u64 = u.iter().filter(|l| l.side == side).map(|l| l.quantity).sum();
                    prop_assert_eq!(matched + open, total);
                }
                prop_assert!(u.windows(2).all(|w| w[0].side == w[1].side));
                prop_assert!(m.iter().all(|x| x.quantity >= 1));
            }
        }

        #[test]
        fn translation_leaves_pnl_unchanged(orders in arb_orders(), price in 9_000i64..11_000, k in -500i64..500) {
            let shifted: Vec<Order> = orders.iter().map(|o| Order { price: o.price + k, ..*o }).collect();
            prop_assert_eq!(pnl_direct(&shifted, price + k), pnl_direct(&orders, price));
        }
    }
}
