//! Bus and shuttle timelines along the corridor, tracked in continuous time.
//!
//! Both services run on `f64` only: their departure instants are event
//! driven and are held fixed while the solver differentiates through costs.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::mfd::service_travel_time;
use crate::queue::{ArrivalCurve, Jump, ServiceCurve};
use crate::scenario::{Scenario, ServiceMode};

#[derive(Clone, Debug, PartialEq)]
pub struct Visit {
    pub station: usize,
    /// Visit count of this vehicle at this station, from 0.
    pub visit: usize,
    pub t_arr: f64,
    /// `None` when the vehicle is still waiting at the horizon end.
    pub t_dep: Option<f64>,
    pub boarded: f64,
    pub alighted: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleTimeline {
    pub vehicle_id: usize,
    pub mode: ServiceMode,
    pub visits: Vec<Visit>,
}

/// Station arrivals of one service mode: the total curve plus one curve per
/// destination, so a boarded slice can be split FIFO by destination.
#[derive(Clone, Debug)]
pub struct StationDemand {
    pub total: ArrivalCurve<f64>,
    pub by_destination: Vec<(usize, ArrivalCurve<f64>)>,
}

impl StationDemand {
    pub fn empty(interval_count: usize) -> Self {
        Self {
            total: ArrivalCurve::zero(interval_count),
            by_destination: Vec::new(),
        }
    }

    /// Builds the station's curves from stream-major shares of `mode`.
    pub fn build(scenario: &Scenario, station: usize, mode: ServiceMode, shares: &[f64]) -> Self {
        let m_count = scenario.interval_count();
        let mut per_dest: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut total = vec![0.0; m_count];
        for i in scenario.streams_from(station) {
            if !scenario.mode_available(i, mode.mode()) {
                continue;
            }
            let st = &scenario.streams[i];
            let counts = per_dest.entry(st.destination).or_insert_with(|| vec![0.0; m_count]);
            for m in 0..m_count {
                if st.demand[m] != 0.0 {
                    let v = st.demand[m] * shares[i * m_count + m];
                    counts[m] += v;
                    total[m] += v;
                }
            }
        }
        Self {
            total: ArrivalCurve::from_interval_counts(&total),
            by_destination: per_dest
                .into_iter()
                .map(|(d, c)| (d, ArrivalCurve::from_interval_counts(&c)))
                .collect(),
        }
    }

    /// Splits passenger indices `[from, to)` of the total curve by destination.
    fn split(&self, scenario: &Scenario, from: f64, to: f64) -> Vec<(usize, f64)> {
        if to <= from {
            return Vec::new();
        }
        if self.by_destination.len() == 1 {
            return vec![(self.by_destination[0].0, to - from)];
        }
        let grid = &scenario.grid;
        let t0 = self.total.time_reaching(grid, from).unwrap_or(grid.end());
        let t1 = self.total.time_reaching(grid, to).unwrap_or(grid.end());
        let mut parts: Vec<(usize, f64)> = self
            .by_destination
            .iter()
            .map(|(d, c)| (*d, (c.at(grid, t1) - c.at(grid, t0)).max(0.0)))
            .collect();
        let sum: f64 = parts.iter().map(|p| p.1).sum();
        if sum > 0.0 {
            let scale = (to - from) / sum;
            for p in &mut parts {
                p.1 *= scale;
            }
        }
        parts
    }
}

/// Service of one mode: vehicle timelines plus the per-station service curves.
#[derive(Clone, Debug, Default)]
pub struct ServicePlan {
    pub timelines: Vec<VehicleTimeline>,
    /// Indexed by station; empty curves at stations the mode skips.
    pub curves: Vec<ServiceCurve>,
}

impl ServicePlan {
    pub fn empty(station_count: usize) -> Self {
        Self {
            timelines: Vec::new(),
            curves: vec![ServiceCurve::default(); station_count],
        }
    }
}

#[derive(Default)]
struct Load {
    by_destination: BTreeMap<usize, f64>,
}

impl Load {
    fn total(&self) -> f64 {
        self.by_destination.values().sum()
    }

    fn alight(&mut self, station: usize) -> f64 {
        self.by_destination.remove(&station).unwrap_or(0.0)
    }

    fn board(&mut self, parts: Vec<(usize, f64)>) {
        for (d, v) in parts {
            *self.by_destination.entry(d).or_insert(0.0) += v;
        }
    }
}

/// Scheduled buses from the first bus station, boarding up to the free seats.
pub fn propagate_bus_timelines(
    scenario: &Scenario,
    speeds_kmh: &[f64],
    demand: &[StationDemand],
) -> ServicePlan {
    let n_stations = scenario.stations.len();
    let mut plan = ServicePlan::empty(n_stations);
    let route = scenario.route(ServiceMode::Bus);
    if route.len() < 2 {
        return plan;
    }
    let p = &scenario.mode_params;
    let grid = &scenario.grid;
    let mut served = vec![0.0; n_stations];

    let mut bus = 0;
    loop {
        let depart = grid.start + p.bus_first_departure + bus as f64 * p.bus_interval;
        if depart >= grid.end() {
            break;
        }
        let mut load = Load::default();
        let mut visits = Vec::with_capacity(route.len());
        let mut t_arr = depart;
        for (r, &s) in route.iter().enumerate() {
            if r > 0 {
                let prev = &visits[r - 1];
                let Visit { t_dep: Some(t_prev), station: s_prev, .. } = *prev else {
                    unreachable!("bus visits always depart")
                };
                let gap = scenario.stations[s].position - scenario.stations[s_prev].position;
                t_arr = t_prev + service_travel_time(grid, t_prev, gap, speeds_kmh);
                if t_arr >= grid.end() {
                    break;
                }
            }
            let alighted = load.alight(s);
            let last = r + 1 == route.len();
            let t_dep = if r == 0 { t_arr } else { t_arr + p.bus_dwell };
            let boarded = if last || t_dep >= grid.end() {
                0.0
            } else {
                let queue = (demand[s].total.at(grid, t_dep) - served[s]).max(0.0);
                let seats = (p.bus_capacity - load.total()).max(0.0);
                let b = queue.min(seats);
                load.board(demand[s].split(scenario, served[s], served[s] + b));
                served[s] += b;
                plan.curves[s].jumps.push(Jump { time: t_dep, amount: b });
                b
            };
            visits.push(Visit {
                station: s,
                visit: 0,
                t_arr,
                t_dep: Some(t_dep),
                boarded,
                alighted,
            });
            if t_dep >= grid.end() {
                break;
            }
        }
        plan.timelines.push(VehicleTimeline {
            vehicle_id: bus,
            mode: ServiceMode::Bus,
            visits,
        });
        bus += 1;
    }
    plan
}

#[derive(Clone, Copy, Debug)]
struct Arrival {
    time: f64,
    vehicle: usize,
    route_pos: usize,
}

impl PartialEq for Arrival {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Arrival {}
impl PartialOrd for Arrival {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Arrival {
    // reversed so that BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.vehicle.cmp(&self.vehicle))
            .then_with(|| other.route_pos.cmp(&self.route_pos))
    }
}

/// Threshold-dispatched shuttles cycling first → last DRAS station and back.
pub fn propagate_dras_timelines(
    scenario: &Scenario,
    speeds_kmh: &[f64],
    demand: &[StationDemand],
) -> ServicePlan {
    let n_stations = scenario.stations.len();
    let mut plan = ServicePlan::empty(n_stations);
    let route = scenario.route(ServiceMode::Dras);
    let fleet = scenario.policy.fleet as usize;
    if route.len() < 2 || fleet == 0 {
        return plan;
    }
    let p = &scenario.mode_params;
    let grid = &scenario.grid;
    let pos = |s: usize| scenario.stations[s].position;
    let boards_here: Vec<bool> = (0..n_stations)
        .map(|s| {
            scenario
                .streams_from(s)
                .any(|i| scenario.mode_available(i, crate::scenario::Mode::Dras))
        })
        .collect();

    let mut served = vec![0.0; n_stations];
    let mut last_departure: Vec<Option<f64>> = vec![None; n_stations];
    let mut visit_count = vec![vec![0usize; n_stations]; fleet];
    let mut loads: Vec<Load> = (0..fleet).map(|_| Load::default()).collect();
    let mut timelines: Vec<VehicleTimeline> = (0..fleet)
        .map(|v| VehicleTimeline {
            vehicle_id: v,
            mode: ServiceMode::Dras,
            visits: Vec::new(),
        })
        .collect();

    let mut events = BinaryHeap::new();
    for v in 0..fleet {
        let t = grid.start + p.dras_first_launch + v as f64 * p.dras_launch_gap;
        if t < grid.end() {
            events.push(Arrival {
                time: t,
                vehicle: v,
                route_pos: 0,
            });
        }
    }

    while let Some(Arrival {
        time: t_arr,
        vehicle: v,
        route_pos: r,
    }) = events.pop()
    {
        let s = route[r];
        let load = &mut loads[v];
        let alighted = load.alight(s);
        let last = r + 1 == route.len();
        let visit = visit_count[v][s];
        visit_count[v][s] += 1;

        let (t_dep, boarded) = if last || !boards_here[s] {
            (Some(t_arr), 0.0)
        } else {
            let onboard = load.total();
            let free = (p.dras_capacity - onboard).max(0.0);
            let h = if p.dras_threshold_on_remaining_seats {
                p.occupancy_threshold * free
            } else {
                p.dras_threshold().min(free)
            };
            if h <= 0.0 {
                (Some(t_arr), 0.0)
            } else {
                let earliest = match last_departure[s] {
                    Some(prev) => t_arr.max(prev + p.min_headway),
                    None => t_arr,
                };
                match demand[s].total.time_reaching(grid, served[s] + h) {
                    Some(t_ready) if t_ready.max(earliest) < grid.end() => {
                        let t_dep = t_ready.max(earliest);
                        load.board(demand[s].split(scenario, served[s], served[s] + h));
                        served[s] += h;
                        last_departure[s] = Some(t_dep);
                        plan.curves[s].jumps.push(Jump { time: t_dep, amount: h });
                        (Some(t_dep), h)
                    }
                    _ => (None, 0.0),
                }
            }
        };

        timelines[v].visits.push(Visit {
            station: s,
            visit,
            t_arr,
            t_dep,
            boarded,
            alighted,
        });
        let Some(t_dep) = t_dep else { continue };
        let (next_pos, gap) = if last {
            (0, pos(s) - pos(route[0]))
        } else {
            (r + 1, pos(route[r + 1]) - pos(s))
        };
        let t_next = t_dep + service_travel_time(grid, t_dep, gap, speeds_kmh);
        if t_next < grid.end() {
            events.push(Arrival {
                time: t_next,
                vehicle: v,
                route_pos: next_pos,
            });
        }
    }
    plan.timelines = timelines;
    plan
}
