//! Result files: CSV tables and JSON summaries.
//!
//! Numbers are written with 12 significant digits so reruns compare byte for byte.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::bilevel::{ComparisonRow, GridResult, PolicyPoint, SystemTotals};
use crate::error::{Error, Result};
use crate::market::car_fraction;
use crate::scenario::{Mode, PolicyParams, Scenario, ServiceMode};
use crate::solver::{wait_table, Certificate, EquilibriumResult, Initialization, TraceRow};

/// Rounds to 12 significant digits and prints the shortest exact form.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{rounded}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// A table held in memory until written.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv_string().as_bytes())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Per stream-interval demand and mode shares.
pub fn shares_table(scenario: &Scenario, eq: &EquilibriumResult) -> Table {
    let mut t = Table::new(&[
        "stream", "origin", "destination", "interval", "t_start", "demand", "car", "bus", "dras",
    ]);
    for (i, st) in scenario.streams.iter().enumerate() {
        for m in 0..scenario.interval_count() {
            let mut row = vec![
                st.id.clone(),
                scenario.stations[st.origin].id.clone(),
                scenario.stations[st.destination].id.clone(),
                m.to_string(),
                fmt_num(scenario.grid.boundary(m)),
                fmt_num(st.demand[m]),
            ];
            row.extend(Mode::ALL.map(|mode| fmt_num(eq.decision.share(mode, i, m))));
            t.push(row);
        }
    }
    t
}

/// Demand-weighted shares per interval over all streams.
pub fn interval_shares_table(scenario: &Scenario, eq: &EquilibriumResult) -> Table {
    let mut t = Table::new(&["interval", "t_start", "car", "bus", "dras"]);
    for m in 0..scenario.interval_count() {
        let mut row = vec![m.to_string(), fmt_num(scenario.grid.boundary(m))];
        match eq.interval_shares(scenario, m) {
            Some(s) => row.extend(s.map(fmt_num)),
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        t.push(row);
    }
    t
}

/// Car accumulation and the per-mode speeds.
pub fn speeds_table(scenario: &Scenario, eq: &EquilibriumResult) -> Table {
    let mut t = Table::new(&[
        "interval", "t_start", "accumulation", "through_traffic", "inflow", "outflow", "car_kmh", "bus_kmh", "dras_kmh",
    ]);
    let state = &eq.diagnostics.pass.car.state;
    let p = &scenario.mode_params;
    let bus = state.mode_speeds(Mode::Bus, p);
    let dras = state.mode_speeds(Mode::Dras, p);
    for m in 0..scenario.interval_count() {
        t.push(vec![
            m.to_string(),
            fmt_num(scenario.grid.boundary(m)),
            fmt_num(state.accumulation[m]),
            fmt_num(scenario.through_traffic[m]),
            fmt_num(state.inflow[m]),
            fmt_num(state.outflow[m]),
            fmt_num(state.speed[m]),
            fmt_num(bus[m]),
            fmt_num(dras[m]),
        ]);
    }
    t
}

/// Station waiting per interval: area, mean and perceived wait.
pub fn waits_table(scenario: &Scenario, eq: &EquilibriumResult) -> Table {
    let mut t = Table::new(&[
        "station", "mode", "interval", "arrivals", "wait_area_s", "mean_wait_s", "perceived_wait_s",
    ]);
    let pass = &eq.diagnostics.pass;
    for (s, mode, m, area, mean, perceived) in wait_table(scenario, pass) {
        let slot = match mode {
            ServiceMode::Bus => 0,
            ServiceMode::Dras => 1,
        };
        let arrivals = pass.waits[s][slot].as_ref().map(|w| w.arrivals.arrivals_in(m)).unwrap_or(0.0);
        t.push(vec![
            scenario.stations[s].id.clone(),
            mode.as_str().into(),
            m.to_string(),
            fmt_num(arrivals),
            fmt_num(area),
            fmt_num(mean),
            fmt_num(perceived),
        ]);
    }
    t
}

pub fn market_table(scenario: &Scenario, eq: &EquilibriumResult) -> Table {
    let mut t = Table::new(&["k", "tau", "d_max", "price", "supply", "consumption", "residual", "car_fraction"]);
    let m = &eq.diagnostics.market;
    let block = eq.decision.block();
    t.push(vec![
        scenario.policy.k.to_string(),
        scenario.policy.tau.to_string(),
        opt_num(scenario.policy.d_max()),
        fmt_num(m.price),
        fmt_num(m.supply),
        fmt_num(m.consumption),
        fmt_num(m.residual),
        fmt_num(car_fraction(scenario, &eq.decision.values[..block])),
    ]);
    t
}

/// Every bus and shuttle station visit.
pub fn vehicles_table(scenario: &Scenario, eq: &EquilibriumResult) -> Table {
    let mut t = Table::new(&["mode", "vehicle", "station", "visit", "t_arr", "t_dep", "boarded", "alighted"]);
    let service = &eq.diagnostics.service;
    for plan in [&service.bus, &service.dras] {
        for tl in &plan.timelines {
            for v in &tl.visits {
                t.push(vec![
                    tl.mode.as_str().into(),
                    tl.vehicle_id.to_string(),
                    scenario.stations[v.station].id.clone(),
                    v.visit.to_string(),
                    fmt_num(v.t_arr),
                    opt_num(v.t_dep),
                    fmt_num(v.boarded),
                    fmt_num(v.alighted),
                ]);
            }
        }
    }
    t
}

pub fn trace_table(trace: &[TraceRow]) -> Table {
    let mut t = Table::new(&["iteration", "merit", "residual_norm", "step", "backtracks"]);
    for r in trace {
        t.push(vec![
            r.iteration.to_string(),
            fmt_num(r.merit),
            fmt_num(r.residual_norm),
            fmt_num(r.step),
            r.backtracks.to_string(),
        ]);
    }
    t
}

/// JSON summary of one equilibrium.
#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumSummary<'a> {
    pub scenario: &'a str,
    pub policy: PolicyParams,
    pub d_max: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
    pub merit: f64,
    pub initialization: &'a Initialization,
    pub certificate: &'a Certificate,
    pub price: f64,
    pub mode_shares: ModeShares,
    pub unfinished_car_cohorts: usize,
    pub totals: Option<SystemTotals>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ModeShares {
    pub car: f64,
    pub bus: f64,
    pub dras: f64,
}

impl From<[f64; 3]> for ModeShares {
    fn from(s: [f64; 3]) -> Self {
        Self {
            car: s[0],
            bus: s[1],
            dras: s[2],
        }
    }
}

pub fn equilibrium_summary<'a>(
    scenario: &'a Scenario,
    eq: &'a EquilibriumResult,
    totals: Option<SystemTotals>,
) -> EquilibriumSummary<'a> {
    EquilibriumSummary {
        scenario: &scenario.name,
        policy: scenario.policy,
        d_max: scenario.policy.d_max(),
        converged: eq.converged,
        iterations: eq.iterations,
        residual_norm: eq.residual_norm,
        merit: eq.merit,
        initialization: &eq.initialization,
        certificate: &eq.certificate,
        price: eq.decision.price(),
        mode_shares: eq.mode_shares(scenario).into(),
        unfinished_car_cohorts: eq.diagnostics.pass.car.unfinished_count(),
        totals,
    }
}

const POINT_COLUMNS: [&str; 21] = [
    "k",
    "tau",
    "d_max",
    "xi",
    "travel_time_cost",
    "emission_cost",
    "fleet_cost",
    "price_penalty",
    "total",
    "converged",
    "feasible",
    "price",
    "car_share",
    "bus_share",
    "dras_share",
    "in_vehicle_hours",
    "perceived_waiting_hours",
    "waiting_hours",
    "car_vkt",
    "iterations",
    "residual_norm",
];

fn point_row(p: &PolicyPoint) -> Vec<String> {
    let o = &p.objective;
    let t = &p.totals;
    vec![
        p.policy.k.to_string(),
        p.policy.tau.to_string(),
        opt_num(p.d_max()),
        p.policy.fleet.to_string(),
        fmt_num(o.travel_time),
        fmt_num(o.emission),
        fmt_num(o.fleet),
        fmt_num(o.price),
        fmt_num(p.ranked_total()),
        p.converged().to_string(),
        p.feasible.to_string(),
        fmt_num(t.price),
        fmt_num(p.mode_shares[0]),
        fmt_num(p.mode_shares[1]),
        fmt_num(p.mode_shares[2]),
        fmt_num(t.in_vehicle_hours),
        fmt_num(t.perceived_waiting_hours),
        fmt_num(t.waiting_hours),
        fmt_num(t.car_vkt),
        p.equilibrium.iterations.to_string(),
        fmt_num(p.equilibrium.residual_norm),
    ]
}

/// One row per grid point, in grid order.
pub fn sweep_table(grid: &GridResult) -> Table {
    let mut t = Table::new(&POINT_COLUMNS);
    for p in &grid.points {
        t.push(point_row(p));
    }
    t
}

/// Best points of a sweep: the global optimum, then per fleet size, then per `(k, τ)`.
pub fn optimum_table(grid: &GridResult) -> Table {
    let mut header = vec!["scope"];
    header.extend(POINT_COLUMNS);
    let mut t = Table::new(&header);
    let mut add = |scope: String, i: usize| {
        let mut row = vec![scope];
        row.extend(point_row(&grid.points[i]));
        t.push(row);
    };
    if let Some(i) = grid.optimum {
        add("global".into(), i);
    }
    for &(f, i) in &grid.best_per_fleet {
        add(format!("xi={f}"), i);
    }
    for &((k, tau), i) in &grid.best_per_ratio {
        add(format!("k={k};tau={tau}"), i);
    }
    t
}

pub fn comparison_table(rows: &[ComparisonRow]) -> Table {
    let mut t = Table::new(&[
        "scenario",
        "k",
        "tau",
        "xi",
        "in_vehicle_hours",
        "travel_time_delta_pct",
        "waiting_hours",
        "car_km",
        "bus_km",
        "dras_km",
        "fleet_cost",
        "price",
        "per_trip_charge",
        "car_share",
        "bus_share",
        "dras_share",
        "travel_time_cost",
        "emission_cost",
        "fleet_term",
        "price_penalty",
        "total",
        "objective_delta_pct",
        "converged",
    ]);
    for r in rows {
        let p = &r.point;
        let tt = &p.totals;
        let o = &p.objective;
        t.push(vec![
            r.label.into(),
            p.policy.k.to_string(),
            p.policy.tau.to_string(),
            p.policy.fleet.to_string(),
            fmt_num(tt.in_vehicle_hours),
            fmt_num(r.travel_time_delta_pct),
            fmt_num(tt.waiting_hours),
            fmt_num(tt.distance_km[0]),
            fmt_num(tt.distance_km[1]),
            fmt_num(tt.distance_km[2]),
            fmt_num(tt.fleet_cost),
            fmt_num(tt.price),
            fmt_num(tt.per_trip_charge),
            fmt_num(p.mode_shares[0]),
            fmt_num(p.mode_shares[1]),
            fmt_num(p.mode_shares[2]),
            fmt_num(o.travel_time),
            fmt_num(o.emission),
            fmt_num(o.fleet),
            fmt_num(o.price),
            fmt_num(p.ranked_total()),
            fmt_num(r.objective_delta_pct),
            p.converged().to_string(),
        ]);
    }
    t
}
