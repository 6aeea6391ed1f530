//! Trip-based car accumulation dynamics and piecewise-constant travel times.

use crate::scalar::Scalar;
use crate::scenario::{Mode, ModeParams, Scenario, TimeGrid};

const KMH_TO_MS: f64 = 1.0 / 3.6;

/// Linear speed-accumulation relation with a floor, capped at `v_cap` (km/h).
pub fn speed_of<T: Scalar>(n: T, v_cap: f64, params: &ModeParams) -> T {
    let free = T::cst(v_cap) * (T::one() - n / T::cst(params.n_max));
    free.max_s(T::cst(params.v_min)).min_s(T::cst(v_cap))
}

/// Car network state over the horizon.
#[derive(Clone, Debug)]
pub struct NetworkState<T> {
    /// `n(t_m)` per interval.
    pub accumulation: Vec<T>,
    /// Car speed per interval (km/h).
    pub speed: Vec<T>,
    /// Cumulative distance clock at the boundaries (m), length `M + 1`.
    pub clock: Vec<T>,
    pub inflow: Vec<T>,
    pub outflow: Vec<T>,
}

impl<T: Scalar> NetworkState<T> {
    /// Per-interval speed of a service mode: the car speed capped at the mode's limit.
    pub fn mode_speeds(&self, mode: Mode, params: &ModeParams) -> Vec<T> {
        let cap = T::cst(params.v_cap(mode));
        self.speed.iter().map(|v| v.min_s(cap)).collect()
    }

    pub fn to_f64(&self) -> NetworkState<f64> {
        let f = |v: &Vec<T>| v.iter().map(|x| x.value()).collect::<Vec<_>>();
        NetworkState {
            accumulation: f(&self.accumulation),
            speed: f(&self.speed),
            clock: f(&self.clock),
            inflow: f(&self.inflow),
            outflow: f(&self.outflow),
        }
    }
}

/// Exit bookkeeping for one car cohort (stream `i`, interval `m`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CohortExit {
    /// Boundary index `j` at which the cohort leaves (`t_j`).
    pub boundary: usize,
    /// The trip had not covered its length by the end of the horizon.
    pub unfinished: bool,
}

#[derive(Clone, Debug)]
pub struct CarPropagation<T> {
    pub state: NetworkState<T>,
    /// Indexed `i * M + m`.
    pub exits: Vec<CohortExit>,
}

impl<T> CarPropagation<T> {
    pub fn unfinished_count(&self) -> usize {
        self.exits.iter().filter(|e| e.unfinished).count()
    }
}

/// Runs the accumulation recursion in one chronological sweep.
///
/// `car_shares` is stream-major (`i * M + m`). The cohort departing in
/// interval `m` enters at `t_m` and starts its distance clock there; it leaves
/// at the first later boundary where the clock has advanced by its trip length.
pub fn propagate_car_dynamics<T: Scalar>(scenario: &Scenario, car_shares: &[T]) -> CarPropagation<T> {
    let m_count = scenario.interval_count();
    let params = &scenario.mode_params;
    let dt = scenario.grid.interval_length;
    let streams = &scenario.streams;
    debug_assert_eq!(car_shares.len(), streams.len() * m_count);

    let mass = |i: usize, m: usize| T::cst(streams[i].demand[m]) * car_shares[i * m_count + m];

    let mut accumulation = Vec::with_capacity(m_count);
    let mut speed = Vec::with_capacity(m_count);
    let mut clock = Vec::with_capacity(m_count + 1);
    let mut inflow = Vec::with_capacity(m_count);
    let mut outflow = Vec::with_capacity(m_count);
    let mut exits = vec![
        CohortExit {
            boundary: m_count,
            unfinished: true,
        };
        streams.len() * m_count
    ];
    // cohorts still on the road, as (stream, entry interval)
    let mut active: Vec<(usize, usize)> = Vec::new();

    clock.push(T::zero());
    let mut n_prev = T::zero();
    for j in 0..m_count {
        let z_now = clock[j].value();
        let mut q_out = T::zero();
        active.retain(|&(i, e)| {
            if z_now - clock[e].value() >= streams[i].length {
                q_out += mass(i, e);
                exits[i * m_count + e] = CohortExit {
                    boundary: j,
                    unfinished: false,
                };
                false
            } else {
                true
            }
        });
        let mut q_in = T::zero();
        for (i, s) in streams.iter().enumerate() {
            if s.demand[j] != 0.0 {
                q_in += mass(i, j);
                active.push((i, j));
            }
        }
        let n = n_prev + q_in - q_out;
        let v = speed_of(n + T::cst(scenario.through_traffic[j]), params.v_max_car, params);
        clock.push(clock[j] + v * T::cst(KMH_TO_MS * dt));
        accumulation.push(n);
        speed.push(v);
        inflow.push(q_in);
        outflow.push(q_out);
        n_prev = n;
    }

    CarPropagation {
        state: NetworkState {
            accumulation,
            speed,
            clock,
            inflow,
            outflow,
        },
        exits,
    }
}

/// Accumulation per interval for a given exit schedule, without speed
/// feedback: the one-sweep operator behind [`propagate_car_dynamics`].
pub fn accumulate_with_exits<T: Scalar>(scenario: &Scenario, car_shares: &[T], exits: &[CohortExit]) -> Vec<T> {
    let m_count = scenario.interval_count();
    let streams = &scenario.streams;
    let mut out = Vec::with_capacity(m_count);
    let mut n = T::zero();
    for j in 0..m_count {
        for (i, st) in streams.iter().enumerate() {
            if st.demand[j] != 0.0 {
                n += T::cst(st.demand[j]) * car_shares[i * m_count + j];
            }
            for e in 0..j {
                let ex = exits[i * m_count + e];
                if !ex.unfinished && ex.boundary == j && st.demand[e] != 0.0 {
                    n -= T::cst(st.demand[e]) * car_shares[i * m_count + e];
                }
            }
        }
        out.push(n);
    }
    out
}

/// Time to cover `distance` metres when leaving at `depart`, with speed held
/// constant inside each grid interval. Beyond the horizon the last interval's
/// speed is extrapolated.
pub fn service_travel_time<T: Scalar>(grid: &TimeGrid, depart: f64, distance: f64, speeds_kmh: &[T]) -> T {
    if !(distance > 0.0) {
        return T::zero();
    }
    let last = grid.interval_count - 1;
    let mut j = grid.clamp_interval(depart);
    let mut t = depart.max(grid.start);
    let mut elapsed = T::cst(t - depart);
    let mut remaining = T::cst(distance);
    loop {
        let v = speeds_kmh[j] * T::cst(KMH_TO_MS);
        if j == last || t >= grid.end() {
            return elapsed + remaining / v;
        }
        let seg_end = grid.boundary(j + 1);
        let span = seg_end - t;
        let reach = v * T::cst(span);
        if reach >= remaining {
            return elapsed + remaining / v;
        }
        remaining -= reach;
        elapsed += T::cst(span);
        t = seg_end;
        j += 1;
    }
}

/// In-vehicle time for a cohort leaving at the start of interval `m`.
pub fn cohort_travel_time<T: Scalar>(grid: &TimeGrid, m: usize, distance: f64, speeds_kmh: &[T]) -> T {
    service_travel_time(grid, grid.boundary(m), distance, speeds_kmh)
}
