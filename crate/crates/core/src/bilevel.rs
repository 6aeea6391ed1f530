//! Planner objective over discrete policy grids.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scenario::{Mode, ObjectiveWeights, PolicyParams, Scenario};
use crate::solver::{solve_equilibrium, total_waiting, DecisionVector, EquilibriumResult};

/// Unweighted system totals behind the objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SystemTotals {
    /// Passenger-hours spent in vehicles.
    pub in_vehicle_hours: f64,
    /// Perceived waiting hours, `η·W` summed over boarding passengers.
    pub perceived_waiting_hours: f64,
    /// Actual waiting passenger-hours at stations.
    pub waiting_hours: f64,
    /// Car vehicle-kilometres of corridor travellers.
    pub car_vkt: f64,
    /// Passenger-kilometres by mode.
    pub distance_km: [f64; 3],
    /// Daily fleet cost `ξ·b` (€).
    pub fleet_cost: f64,
    pub price: f64,
    /// Net credit charge per car trip, `(τ − k)·p` (€).
    pub per_trip_charge: f64,
}

/// Weighted objective terms; `total` is their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObjectiveBreakdown {
    pub travel_time: f64,
    pub emission: f64,
    pub fleet: f64,
    pub price: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    fn new(weights: &ObjectiveWeights, scenario: &Scenario, totals: &SystemTotals, include_waiting: bool) -> Self {
        let p = &scenario.mode_params;
        let hours = totals.in_vehicle_hours + if include_waiting { totals.perceived_waiting_hours } else { 0.0 };
        let travel_time = weights.travel_time * p.value_of_time * hours;
        let emission = weights.emission * p.emission_cost * totals.car_vkt * 1000.0;
        let fleet = weights.fleet * totals.fleet_cost;
        let price = weights.price * totals.price;
        Self {
            travel_time,
            emission,
            fleet,
            price,
            total: travel_time + emission + fleet + price,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PolicyPoint {
    pub policy: PolicyParams,
    pub equilibrium: EquilibriumResult,
    pub totals: SystemTotals,
    pub objective: ObjectiveBreakdown,
    /// `ξ·b ≤ B`.
    pub feasible: bool,
    pub mode_shares: [f64; 3],
    pub total_waiting: f64,
}

impl PolicyPoint {
    pub fn converged(&self) -> bool {
        self.equilibrium.converged
    }

    /// Objective used for ranking: `+∞` unless the equilibrium converged.
    pub fn ranked_total(&self) -> f64 {
        if self.converged() {
            self.objective.total
        } else {
            f64::INFINITY
        }
    }

    pub fn d_max(&self) -> Option<f64> {
        self.policy.d_max()
    }
}

/// System totals of a solved equilibrium.
pub fn system_totals(scenario: &Scenario, eq: &EquilibriumResult) -> SystemTotals {
    let m_count = scenario.interval_count();
    let pass = &eq.diagnostics.pass;
    let d = &eq.decision;
    let mut in_vehicle = 0.0;
    let mut perceived = 0.0;
    let mut car_m = 0.0;
    let mut distance = [0.0; 3];
    for (i, st) in scenario.streams.iter().enumerate() {
        for (m, &q) in st.demand.iter().enumerate() {
            let idx = i * m_count + m;
            for mode in Mode::ALL {
                let mi = mode.index();
                let trips = q * d.share(mode, i, m);
                in_vehicle += trips * pass.travel_times[idx][mi];
                perceived += trips * pass.perceived[idx][mi];
                distance[mi] += trips * st.length / 1000.0;
            }
            car_m += q * d.share(Mode::Car, i, m) * st.length;
        }
    }
    let policy = &scenario.policy;
    let price = d.price();
    SystemTotals {
        in_vehicle_hours: in_vehicle / 3600.0,
        perceived_waiting_hours: perceived / 3600.0,
        waiting_hours: total_waiting(pass) / 3600.0,
        car_vkt: car_m / 1000.0,
        distance_km: distance,
        fleet_cost: policy.fleet as f64 * scenario.mode_params.dras_daily_cost,
        price,
        per_trip_charge: (policy.tau as f64 - policy.k as f64) * price,
    }
}

/// Solves the lower level for `policy` and prices the outcome.
pub fn evaluate_policy(
    scenario: &Scenario,
    policy: PolicyParams,
    weights: &ObjectiveWeights,
    warm_start: Option<&DecisionVector>,
) -> Result<PolicyPoint> {
    for (name, w) in [
        ("travel_time", weights.travel_time),
        ("emission", weights.emission),
        ("fleet", weights.fleet),
        ("price", weights.price),
    ] {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(invalid(format!("bilevel.weights.{name}"), "must be finite and non-negative"));
        }
    }
    let s = scenario.with_policy(policy)?;
    let equilibrium = solve_equilibrium(&s, warm_start, &s.solver)?;
    let totals = system_totals(&s, &equilibrium);
    let objective = ObjectiveBreakdown::new(weights, &s, &totals, s.bilevel.include_waiting);
    Ok(PolicyPoint {
        policy,
        feasible: totals.fleet_cost <= s.mode_params.budget,
        mode_shares: equilibrium.mode_shares(&s),
        total_waiting: totals.waiting_hours * 3600.0,
        totals,
        objective,
        equilibrium,
    })
}

/// Cartesian grid of policies in `(ξ, τ, k)` order, `k` fastest. Pairs with
/// `τ < k` are not valid credit schemes and are left out.
pub fn policy_grid(k_values: &[u32], tau_values: &[u32], fleet_values: &[u32]) -> Result<Vec<PolicyParams>> {
    for (name, v) in [("k_values", k_values), ("tau_values", tau_values), ("fleet_values", fleet_values)] {
        if v.is_empty() {
            return Err(invalid(format!("bilevel.{name}"), "must not be empty"));
        }
    }
    let mut out = Vec::new();
    for &fleet in fleet_values {
        for &tau in tau_values {
            for &k in k_values {
                let p = PolicyParams::new(k, tau, fleet);
                if p.validate().is_ok() {
                    out.push(p);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(invalid("bilevel.tau_values", "no value is at least the smallest k"));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct GridResult {
    /// In grid order.
    pub points: Vec<PolicyPoint>,
    /// Index of the best feasible converged point.
    pub optimum: Option<usize>,
    /// Best point for each fleet size, as `(ξ, index)`.
    pub best_per_fleet: Vec<(u32, usize)>,
    /// Best point for each `(k, τ)` pair, as `((k, τ), index)`.
    pub best_per_ratio: Vec<((u32, u32), usize)>,
}

fn argmin<'a>(points: &[PolicyPoint], idx: impl Iterator<Item = usize> + 'a) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in idx {
        let p = &points[i];
        if !p.feasible || !p.ranked_total().is_finite() {
            continue;
        }
        // strict comparison keeps the first index on ties
        if best.is_none_or(|b| p.ranked_total() < points[b].ranked_total()) {
            best = Some(i);
        }
    }
    best
}

/// Evaluates every policy on a pool of `jobs` threads, each warm-started from
/// the no-policy equilibrium. Output does not depend on `jobs`.
pub fn grid_search(
    scenario: &Scenario,
    policies: &[PolicyParams],
    weights: &ObjectiveWeights,
    jobs: usize,
) -> Result<GridResult> {
    let base = solve_equilibrium(&scenario.with_policy(PolicyParams::baseline())?, None, &scenario.solver)?;
    let warm = base.decision;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| invalid("jobs", e.to_string()))?;
    let points: Vec<PolicyPoint> = pool.install(|| {
        policies
            .par_iter()
            .map(|&p| evaluate_policy(scenario, p, weights, Some(&warm)))
            .collect::<Result<Vec<_>>>()
    })?;

    let optimum = argmin(&points, 0..points.len());
    let mut fleets: Vec<u32> = points.iter().map(|p| p.policy.fleet).collect();
    fleets.sort_unstable();
    fleets.dedup();
    let best_per_fleet = fleets
        .into_iter()
        .filter_map(|f| argmin(&points, (0..points.len()).filter(|&i| points[i].policy.fleet == f)).map(|i| (f, i)))
        .collect();
    let mut ratios: Vec<(u32, u32)> = points.iter().map(|p| (p.policy.k, p.policy.tau)).collect();
    ratios.sort_unstable();
    ratios.dedup();
    let best_per_ratio = ratios
        .into_iter()
        .filter_map(|r| {
            argmin(
                &points,
                (0..points.len()).filter(|&i| (points[i].policy.k, points[i].policy.tau) == r),
            )
            .map(|i| (r, i))
        })
        .collect();
    Ok(GridResult {
        points,
        optimum,
        best_per_fleet,
        best_per_ratio,
    })
}

/// The four policy combinations compared side by side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Quadrants {
    pub none: PolicyParams,
    pub tcs_only: PolicyParams,
    pub dras_only: PolicyParams,
    pub combined: PolicyParams,
}

impl Quadrants {
    /// Standard quadrants built from one credit scheme and one fleet size.
    pub fn from_levers(k: u32, tau: u32, fleet: u32) -> Self {
        Self {
            none: PolicyParams::new(0, 0, 0),
            tcs_only: PolicyParams::new(k, tau, 0),
            dras_only: PolicyParams::new(0, 0, fleet),
            combined: PolicyParams::new(k, tau, fleet),
        }
    }

    pub fn labelled(&self) -> [(&'static str, PolicyParams); 4] {
        [
            ("no_policy", self.none),
            ("tcs_only", self.tcs_only),
            ("dras_only", self.dras_only),
            ("tcs_dras", self.combined),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub label: &'static str,
    pub point: PolicyPoint,
    /// Relative change of the total objective against the first row (%).
    pub objective_delta_pct: f64,
    /// Relative change of in-vehicle hours against the first row (%).
    pub travel_time_delta_pct: f64,
}

pub fn compare_policies(
    scenario: &Scenario,
    quadrants: &Quadrants,
    weights: &ObjectiveWeights,
) -> Result<Vec<ComparisonRow>> {
    let base = solve_equilibrium(&scenario.with_policy(PolicyParams::baseline())?, None, &scenario.solver)?;
    let mut rows: Vec<ComparisonRow> = Vec::with_capacity(4);
    for (label, policy) in quadrants.labelled() {
        let point = evaluate_policy(scenario, policy, weights, Some(&base.decision))?;
        let (obj0, tt0) = rows
            .first()
            .map(|r| (r.point.ranked_total(), r.point.totals.in_vehicle_hours))
            .unwrap_or((point.ranked_total(), point.totals.in_vehicle_hours));
        rows.push(ComparisonRow {
            label,
            objective_delta_pct: pct(point.ranked_total(), obj0),
            travel_time_delta_pct: pct(point.totals.in_vehicle_hours, tt0),
            point,
        });
    }
    Ok(rows)
}

fn pct(v: f64, base: f64) -> f64 {
    if base == 0.0 || !base.is_finite() || !v.is_finite() {
        return if v == base { 0.0 } else { f64::NAN };
    }
    100.0 * (v - base) / base
}
