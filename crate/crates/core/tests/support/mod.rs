//! Independent reference computations shared by the test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use corridor_core::queue::{ArrivalCurve, Jump, ServiceCurve};
use corridor_core::scenario::TimeGrid;
use corridor_core::{load_scenario, Scenario};
use rand::Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn load(name: &str) -> Scenario {
    load_scenario(scenario_path(name)).expect("shipped scenario loads")
}

/// Waiting time of every passenger, added up one quantum at a time.
///
/// Each interval's arrivals are cut into equal quanta spread uniformly over
/// the interval; a quantum leaves with the first jump whose cumulative service
/// covers it, or at the horizon end.
pub fn brute_force_wait(grid: &TimeGrid, arrivals: &[f64], jumps: &[Jump], m: usize, quanta: usize) -> f64 {
    let lo: f64 = arrivals[..m].iter().sum();
    let count = arrivals[m];
    if count <= 0.0 {
        return 0.0;
    }
    let size = count / quanta as f64;
    let t0 = grid.boundary(m);
    let mut total = 0.0;
    for j in 0..quanta {
        let frac = (j as f64 + 0.5) / quanta as f64;
        let index = lo + frac * count;
        let t_arr = t0 + frac * grid.interval_length;
        let mut served = 0.0;
        let mut depart = grid.end();
        for jump in jumps {
            served += jump.amount;
            if served >= index {
                depart = jump.time;
                break;
            }
        }
        total += size * (depart - t_arr).max(0.0);
    }
    total
}

/// Random station queue: integer arrivals per interval and a service curve
/// that never serves more than has arrived at its jump instants.
#[derive(Clone, Debug)]
pub struct QueueInstance {
    pub grid: TimeGrid,
    pub arrivals: Vec<f64>,
    pub jumps: Vec<Jump>,
}

impl QueueInstance {
    pub fn random(rng: &mut impl Rng, intervals: usize) -> Self {
        let grid = TimeGrid::new(0.0, 300.0, intervals);
        let arrivals: Vec<f64> = (0..intervals).map(|_| rng.gen_range(0..=40) as f64).collect();
        let curve = ArrivalCurve::from_interval_counts(&arrivals);
        let mut times: Vec<f64> = (0..rng.gen_range(0..=2 * intervals))
            .map(|_| rng.gen_range(0.0..grid.end()))
            .collect();
        times.sort_by(f64::total_cmp);
        let mut jumps = Vec::new();
        let mut served = 0.0;
        for t in times {
            let room = (curve.at(&grid, t).floor() - served).max(0.0) as u32;
            let amount = rng.gen_range(0..=room) as f64;
            served += amount;
            jumps.push(Jump { time: t, amount });
        }
        Self { grid, arrivals, jumps }
    }

    pub fn curve(&self) -> ArrivalCurve<f64> {
        ArrivalCurve::from_interval_counts(&self.arrivals)
    }

    pub fn service(&self) -> ServiceCurve {
        ServiceCurve {
            jumps: self.jumps.clone(),
        }
    }

    /// Quanta per passenger so that every quantum sits inside one service
    /// segment, keeping the total at or below 10⁴.
    pub fn quanta_per_passenger(&self) -> usize {
        let total: f64 = self.arrivals.iter().sum();
        ((10_000.0 / total.max(1.0)).floor() as usize).max(1)
    }
}

/// Softmax of `−θ·c` computed directly, without shifting.
pub fn softmax_oracle(costs: &[f64], theta: f64) -> Vec<f64> {
    let w: Vec<f64> = costs.iter().map(|c| (-theta * c).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

/// Capacity, headway and causality violations of a propagated service plan.
pub fn service_violations(
    scenario: &Scenario,
    values: &[f64],
    service: &corridor_core::solver::FrozenService,
) -> Vec<String> {
    use corridor_core::queue::build_arrival_curve;
    use corridor_core::ServiceMode;

    let p = &scenario.mode_params;
    let block = scenario.stream_count() * scenario.interval_count();
    let tol = 1e-9;
    let mut out = Vec::new();
    for (mode, plan) in [(ServiceMode::Bus, &service.bus), (ServiceMode::Dras, &service.dras)] {
        let mi = mode.mode().index();
        for tl in &plan.timelines {
            let mut load = 0.0;
            for v in &tl.visits {
                load += v.boarded - v.alighted;
                if mode == ServiceMode::Bus && load > p.bus_capacity + tol {
                    out.push(format!("bus {} carries {load} at station {}", tl.vehicle_id, v.station));
                }
                if mode == ServiceMode::Dras {
                    if v.boarded > p.occupancy_threshold * p.dras_capacity + tol {
                        out.push(format!("shuttle {} boards {} at station {}", tl.vehicle_id, v.boarded, v.station));
                    }
                    if load > p.dras_capacity + tol {
                        out.push(format!("shuttle {} carries {load}", tl.vehicle_id));
                    }
                }
                if v.boarded > tol && v.t_dep.is_none() {
                    out.push(format!("{} {} boards without leaving", mode.as_str(), tl.vehicle_id));
                }
            }
        }
        for s in 0..scenario.stations.len() {
            let curve = build_arrival_curve(scenario, s, mode, &values[mi * block..(mi + 1) * block]);
            let served = &plan.curves[s];
            let scale = curve.total().max(1.0);
            for j in &served.jumps {
                let (a, sv) = (curve.at(&scenario.grid, j.time), served.at(j.time));
                if sv > a + tol * scale {
                    out.push(format!("{} station {s}: served {sv} > arrived {a} at {}", mode.as_str(), j.time));
                }
            }
            if served.total() > curve.total() + tol * scale {
                out.push(format!("{} station {s}: boarded more than arrived", mode.as_str()));
            }
            if mode == ServiceMode::Dras {
                let mut deps: Vec<f64> = plan
                    .timelines
                    .iter()
                    .flat_map(|tl| tl.visits.iter())
                    .filter(|v| v.station == s && v.boarded > 0.0)
                    .filter_map(|v| v.t_dep)
                    .collect();
                deps.sort_by(f64::total_cmp);
                for w in deps.windows(2) {
                    if w[1] - w[0] < p.min_headway - 1e-9 {
                        out.push(format!("station {s}: departures {} and {} too close", w[0], w[1]));
                    }
                }
            }
        }
    }
    out
}
