//! Point-queue bookkeeping: cumulative arrival and service curves and the
//! waiting area between them.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenario::{Scenario, ServiceMode, TimeGrid};

/// Piecewise-linear cumulative arrivals, stored at the grid boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalCurve<T> {
    /// `A(t_0) .. A(t_M)`; `A(t_0) = 0`.
    pub cumulative: Vec<T>,
}

impl<T: Scalar> ArrivalCurve<T> {
    pub fn from_interval_counts(counts: &[T]) -> Self {
        let mut cumulative = Vec::with_capacity(counts.len() + 1);
        let mut acc = T::zero();
        cumulative.push(acc);
        for &c in counts {
            acc += c;
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    pub fn zero(interval_count: usize) -> Self {
        Self {
            cumulative: vec![T::zero(); interval_count + 1],
        }
    }

    pub fn total(&self) -> T {
        *self.cumulative.last().expect("curve has at least one point")
    }

    /// Arrivals during interval `m`.
    pub fn arrivals_in(&self, m: usize) -> T {
        self.cumulative[m + 1] - self.cumulative[m]
    }

    pub fn to_f64(&self) -> ArrivalCurve<f64> {
        ArrivalCurve {
            cumulative: self.cumulative.iter().map(|v| v.value()).collect(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.cumulative.first().map(|v| v.value()) != Some(0.0) {
            return Err(Error::MalformedCurve("arrival curve must start at zero".into()));
        }
        for (m, w) in self.cumulative.windows(2).enumerate() {
            let (a, b) = (w[0].value(), w[1].value());
            if !(b.is_finite() && b >= a) {
                return Err(Error::MalformedCurve(format!(
                    "arrival curve decreases in interval {m} ({a} -> {b})"
                )));
            }
        }
        Ok(())
    }
}

impl ArrivalCurve<f64> {
    /// `A(t)`, constant outside the horizon.
    pub fn at(&self, grid: &TimeGrid, t: f64) -> f64 {
        if t <= grid.start {
            return 0.0;
        }
        if t >= grid.end() {
            return self.total();
        }
        let m = grid.clamp_interval(t);
        let frac = (t - grid.boundary(m)) / grid.interval_length;
        self.cumulative[m] + frac * (self.cumulative[m + 1] - self.cumulative[m])
    }

    /// Earliest `t` with `A(t) ≥ level`, or `None` if the curve never gets there.
    pub fn time_reaching(&self, grid: &TimeGrid, level: f64) -> Option<f64> {
        if level <= 0.0 {
            return Some(grid.start);
        }
        let m = self.cumulative.partition_point(|&a| a < level);
        if m >= self.cumulative.len() {
            return None;
        }
        // A(t_{m-1}) < level <= A(t_m)
        let (a0, a1) = (self.cumulative[m - 1], self.cumulative[m]);
        let frac = ((level - a0) / (a1 - a0)).clamp(0.0, 1.0);
        Some(grid.boundary(m - 1) + frac * grid.interval_length)
    }
}

/// One departure on a service curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub amount: f64,
}

/// Step curve of passengers served at one station.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ServiceCurve {
    pub jumps: Vec<Jump>,
}

impl ServiceCurve {
    pub fn total(&self) -> f64 {
        self.jumps.iter().map(|j| j.amount).sum()
    }

    /// `S(t)`, counting a jump at exactly `t`.
    pub fn at(&self, t: f64) -> f64 {
        self.jumps.iter().take_while(|j| j.time <= t).map(|j| j.amount).sum()
    }

    fn check(&self) -> Result<()> {
        for (n, j) in self.jumps.iter().enumerate() {
            if !(j.time.is_finite() && j.amount.is_finite() && j.amount >= 0.0) {
                return Err(Error::MalformedCurve(format!("service jump {n} is invalid")));
            }
            if n > 0 && j.time < self.jumps[n - 1].time {
                return Err(Error::MalformedCurve(format!(
                    "service jumps out of order at index {n}"
                )));
            }
        }
        Ok(())
    }
}

/// Builds the station curve `A_s` for `mode` from stream-major shares of that mode.
pub fn build_arrival_curve<T: Scalar>(
    scenario: &Scenario,
    station: usize,
    mode: ServiceMode,
    shares: &[T],
) -> ArrivalCurve<T> {
    build_arrival_curve_filtered(scenario, station, mode, shares, |_| true)
}

/// Like [`build_arrival_curve`] but restricted to streams accepted by `keep`.
pub fn build_arrival_curve_filtered<T: Scalar>(
    scenario: &Scenario,
    station: usize,
    mode: ServiceMode,
    shares: &[T],
    keep: impl Fn(usize) -> bool,
) -> ArrivalCurve<T> {
    let m_count = scenario.interval_count();
    let mut counts = vec![T::zero(); m_count];
    for i in scenario.streams_from(station) {
        if !keep(i) || !scenario.mode_available(i, mode.mode()) {
            continue;
        }
        let q = &scenario.streams[i].demand;
        for m in 0..m_count {
            if q[m] != 0.0 {
                counts[m] += T::cst(q[m]) * shares[i * m_count + m];
            }
        }
    }
    ArrivalCurve::from_interval_counts(&counts)
}

/// Area between an interval's arrivals and their FIFO departures
/// (passenger-seconds). Passengers never served depart at `t_M`.
pub fn waiting_area<T: Scalar>(
    grid: &TimeGrid,
    arrival: &ArrivalCurve<T>,
    service: &ServiceCurve,
    m: usize,
) -> Result<T> {
    arrival.check()?;
    service.check()?;
    Ok(interval_area(grid, arrival, service, m, &mut (0, 0.0)))
}

/// [`waiting_area`] for every interval.
pub fn waiting_areas<T: Scalar>(
    grid: &TimeGrid,
    arrival: &ArrivalCurve<T>,
    service: &ServiceCurve,
) -> Result<Vec<T>> {
    arrival.check()?;
    service.check()?;
    let mut cursor = (0, 0.0);
    Ok((0..grid.interval_count)
        .map(|m| interval_area(grid, arrival, service, m, &mut cursor))
        .collect())
}

// `cursor` holds the first jump whose cumulative upper end exceeds the
// interval's lower passenger index, and the count served before it; it only
// moves forward across intervals.
fn interval_area<T: Scalar>(
    grid: &TimeGrid,
    arrival: &ArrivalCurve<T>,
    service: &ServiceCurve,
    m: usize,
    cursor: &mut (usize, f64),
) -> T {
    let lo = arrival.cumulative[m];
    let hi = arrival.cumulative[m + 1];
    if !(hi.value() > lo.value()) {
        return T::zero();
    }
    let t_start = grid.boundary(m);
    let rate = (hi - lo) / T::cst(grid.interval_length);

    // ∫_a^b max(D − t_arr(Δ), 0) dΔ with t_arr(Δ) = t_start + (Δ − lo)/rate
    let piece = |a: T, b: T, depart: f64| -> T {
        let rel = T::cst(depart - t_start);
        let cross = lo + rel * rate;
        let u = cross.max_s(a).min_s(b);
        let du = u - a;
        if du.value() <= 0.0 {
            return T::zero();
        }
        du * rel - du * (u + a - lo - lo) / (rate + rate)
    };

    let jumps = &service.jumps;
    let (mut idx, mut below) = *cursor;
    while idx < jumps.len() && below + jumps[idx].amount <= lo.value() {
        below += jumps[idx].amount;
        idx += 1;
    }
    *cursor = (idx, below);

    let mut area = T::zero();
    let mut seg_lo = below;
    while idx < jumps.len() && seg_lo < hi.value() {
        let seg_hi = seg_lo + jumps[idx].amount;
        if seg_hi > seg_lo {
            let a = lo.max_s(T::cst(seg_lo));
            let b = hi.min_s(T::cst(seg_hi));
            if b.value() > a.value() {
                area += piece(a, b, jumps[idx].time);
            }
        }
        seg_lo = seg_hi;
        idx += 1;
    }
    if seg_lo < hi.value() {
        let a = lo.max_s(T::cst(seg_lo));
        area += piece(a, hi, grid.end());
    }
    area
}

/// Perceived waiting `η·W`; zero when nobody arrived.
pub fn perceived_wait<T: Scalar>(area: T, arrivals: T, eta: f64) -> T {
    if arrivals.value() <= 0.0 {
        T::zero()
    } else {
        T::cst(eta) * area
    }
}

/// Mean wait `W / arrivals`, zero when nobody arrived.
pub fn average_wait<T: Scalar>(area: T, arrivals: T) -> T {
    if arrivals.value() <= 0.0 {
        T::zero()
    } else {
        area / arrivals
    }
}
