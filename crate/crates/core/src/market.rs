//! Credit accounting and the market-clearing complementarity.

use serde::Serialize;

use crate::scalar::Scalar;
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CreditMarketState {
    pub price: f64,
    /// Credits handed out, `Σ q·k`.
    pub supply: f64,
    /// Credits spent by drivers, `Σ q·x·τ`.
    pub consumption: f64,
    pub residual: f64,
}

impl CreditMarketState {
    pub fn new(scenario: &Scenario, car_shares: &[f64], price: f64) -> Self {
        let supply = scenario.total_demand() * scenario.policy.k as f64;
        let consumption = car_trips(scenario, car_shares) * scenario.policy.tau as f64;
        Self {
            price,
            supply,
            consumption,
            residual: supply - consumption,
        }
    }
}

/// Demand-weighted number of car trips, `Σ q·x`.
pub fn car_trips<T: Scalar>(scenario: &Scenario, car_shares: &[T]) -> T {
    let m_count = scenario.interval_count();
    let mut acc = T::zero();
    for (i, s) in scenario.streams.iter().enumerate() {
        for (m, &q) in s.demand.iter().enumerate() {
            if q != 0.0 {
                acc += T::cst(q) * car_shares[i * m_count + m];
            }
        }
    }
    acc
}

/// Unused credits, `Σ q·k − Σ q·x·τ`.
pub fn market_residual<T: Scalar>(scenario: &Scenario, car_shares: &[T]) -> T {
    let supply = scenario.total_demand() * scenario.policy.k as f64;
    T::cst(supply) - car_trips(scenario, car_shares) * T::cst(scenario.policy.tau as f64)
}

/// Fraction of all travellers driving.
pub fn car_fraction<T: Scalar>(scenario: &Scenario, car_shares: &[T]) -> T {
    let total = scenario.total_demand();
    if total <= 0.0 {
        return T::zero();
    }
    car_trips(scenario, car_shares) / T::cst(total)
}

/// Price component of the equilibrium residual.
///
/// Encodes `p ≥ 0 ⟂ d_max − car fraction ≥ 0` with the Fischer–Burmeister
/// function, the slack scaled by `scale`. Without a credit scheme the price
/// has nothing to clear and the component is `p` itself.
pub fn price_residual<T: Scalar>(scenario: &Scenario, car_shares: &[T], price: T, scale: f64) -> T {
    let Some(d_max) = scenario.policy.d_max() else {
        return price;
    };
    let slack = T::cst(scale) * (T::cst(d_max) - car_fraction(scenario, car_shares));
    // the tiny offset keeps the square root differentiable at the origin
    price + slack - (price * price + slack * slack + T::cst(1e-24)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{PolicyParams, ScenarioFile};

    fn scenario(k: u32, tau: u32) -> Scenario {
        let file: ScenarioFile = serde_json::from_value(serde_json::json!({
            "grid": {"start": 0.0, "interval_length": 300.0, "interval_count": 2},
            "stations": [{"id": "a", "position": 0.0}, {"id": "b", "position": 1000.0}],
            "demand_groups": [
                {"id": "g", "origin": "a", "destination": "b", "departure_time": 10.0, "demand": 30.0},
                {"id": "g", "origin": "a", "destination": "b", "departure_time": 310.0, "demand": 70.0}
            ]
        }))
        .unwrap();
        Scenario::from_file(file).unwrap().with_policy(PolicyParams::new(k, tau, 0)).unwrap()
    }

    #[test]
    fn no_driving_leaves_the_supply_unused() {
        let s = scenario(5, 8);
        assert_eq!(market_residual(&s, &[0.0f64, 0.0]), 500.0);
    }

    #[test]
    fn driving_at_the_cap_clears_the_market() {
        let s = scenario(5, 8);
        let x = [5.0f64 / 8.0, 5.0 / 8.0];
        assert!(market_residual(&s, &x).abs() < 1e-12);
        assert!((car_fraction(&s, &x) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn price_residual_vanishes_on_complementary_pairs() {
        let s = scenario(5, 8);
        // slack market, zero price
        assert!(price_residual(&s, &[0.2f64, 0.2], 0.0, 100.0).abs() < 1e-9);
        // tight market, positive price
        assert!(price_residual(&s, &[0.625f64, 0.625], 0.4, 100.0).abs() < 1e-9);
        // positive price with slack is penalised
        assert!(price_residual(&s, &[0.2f64, 0.2], 0.4, 100.0) > 0.3);
    }

    #[test]
    fn without_credits_the_price_is_its_own_residual() {
        let s = scenario(0, 0);
        assert_eq!(price_residual(&s, &[0.9f64, 0.9], 0.25, 100.0), 0.25);
    }

    #[test]
    fn market_state_for_slack_example() {
        let s = scenario(56, 64);
        let m = CreditMarketState::new(&s, &[0.83, 0.83], 0.0);
        assert!(m.residual > 0.0);
        assert!((m.supply - 5600.0).abs() < 1e-9);
    }
}
