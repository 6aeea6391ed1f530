//! Generalized costs per stream, interval and mode, and the logit split.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenario::{Mode, Scenario};

/// Cost of one alternative, broken into its parts (€).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralizedCost<T> {
    pub in_vehicle: T,
    pub waiting: T,
    pub credit: T,
    pub constant: T,
}

impl<T: Scalar> GeneralizedCost<T> {
    pub fn total(&self) -> T {
        self.in_vehicle + self.waiting + self.credit + self.constant
    }

    pub fn to_f64(&self) -> GeneralizedCost<f64> {
        GeneralizedCost {
            in_vehicle: self.in_vehicle.value(),
            waiting: self.waiting.value(),
            credit: self.credit.value(),
            constant: self.constant.value(),
        }
    }
}

/// `None` marks a mode the stream cannot use.
pub type ModeCosts<T> = [Option<GeneralizedCost<T>>; 3];

/// Assembles costs for every stream-interval (stream-major).
///
/// `travel_times` are in-vehicle seconds and `perceived_waits` are perceived
/// waiting seconds at the boarding station, both indexed like the output and
/// by [`Mode::index`].
pub fn assemble_costs<T: Scalar>(
    scenario: &Scenario,
    travel_times: &[[T; 3]],
    perceived_waits: &[[T; 3]],
    price: T,
) -> Vec<ModeCosts<T>> {
    let m_count = scenario.interval_count();
    let p = &scenario.mode_params;
    let policy = &scenario.policy;
    let alpha = T::cst(p.alpha_per_second());
    let alpha_wait = T::cst(p.waiting_alpha_per_second());
    let k = policy.k as f64;
    let tau = policy.tau as f64;

    let mut out = Vec::with_capacity(travel_times.len());
    for i in 0..scenario.stream_count() {
        let available = Mode::ALL.map(|mode| scenario.mode_available(i, mode));
        for m in 0..m_count {
            let idx = i * m_count + m;
            let entry = Mode::ALL.map(|mode| {
                if !available[mode.index()] {
                    return None;
                }
                let mi = mode.index();
                let (waiting, credit) = match mode {
                    Mode::Car => (T::zero(), T::cst(tau - k) * price),
                    _ => (
                        alpha_wait * perceived_waits[idx][mi],
                        -(T::cst(p.redemption_weights.get(mode) * k) * price),
                    ),
                };
                Some(GeneralizedCost {
                    in_vehicle: alpha * travel_times[idx][mi],
                    waiting,
                    credit,
                    constant: T::cst(p.mode_constants.get(mode)),
                })
            });
            out.push(entry);
        }
    }
    out
}

/// Logit shares of the available alternatives, max-shifted for stability.
pub fn logit_probabilities<T: Scalar>(costs: &[Option<T>; 3], theta: f64) -> Option<[T; 3]> {
    let theta = T::cst(theta);
    let mut best: Option<T> = None;
    for c in costs.iter().flatten() {
        if !c.is_finite_s() {
            return None;
        }
        best = Some(match best {
            Some(b) => b.min_s(*c),
            None => *c,
        });
    }
    let best = best?;
    let weights = costs.map(|c| match c {
        Some(c) => (-(theta * (c - best))).exp(),
        None => T::zero(),
    });
    let denom = weights[0] + weights[1] + weights[2];
    Some(weights.map(|w| w / denom))
}

/// Logit shares for every stream-interval; a non-finite available cost is an error.
pub fn choice_probabilities<T: Scalar>(
    scenario: &Scenario,
    costs: &[ModeCosts<T>],
) -> Result<Vec<[T; 3]>> {
    let m_count = scenario.interval_count();
    let theta = scenario.mode_params.theta;
    costs
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let totals = c.map(|g| g.map(|g| g.total()));
            logit_probabilities(&totals, theta).ok_or_else(|| {
                let bad = totals
                    .iter()
                    .position(|t| t.is_some_and(|t| !t.is_finite_s()))
                    .unwrap_or(0);
                Error::NonFiniteCost {
                    stream: idx / m_count,
                    interval: idx % m_count,
                    mode: Mode::ALL[bad].as_str(),
                }
            })
        })
        .collect()
}
