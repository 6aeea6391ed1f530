//! Exogenous inputs: time grid, stations, OD demand, mode and policy parameters.
//!
//! A scenario is read from a single JSON document (see
//! `scenarios/scenario.schema.json`), validated, and normalised into
//! [`Scenario`], which is immutable afterwards.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};

/// Discrete decision horizon `t_0 .. t_M`, absolute clock seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub interval_length: f64,
    pub interval_count: usize,
}

impl TimeGrid {
    pub fn new(start: f64, interval_length: f64, interval_count: usize) -> Self {
        Self {
            start,
            interval_length,
            interval_count,
        }
    }

    /// Boundary `t_m`, `m` in `0..=M`.
    #[inline]
    pub fn boundary(&self, m: usize) -> f64 {
        self.start + m as f64 * self.interval_length
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.boundary(self.interval_count)
    }

    /// Zero-based interval containing `t`, i.e. `t ∈ [t_j, t_{j+1})`.
    pub fn interval_of(&self, t: f64) -> Option<usize> {
        if !(t >= self.start && t < self.end()) {
            return None;
        }
        let j = ((t - self.start) / self.interval_length).floor() as usize;
        Some(j.min(self.interval_count - 1))
    }

    /// Like [`interval_of`](Self::interval_of) but clamps to the first/last interval.
    pub fn clamp_interval(&self, t: f64) -> usize {
        if t <= self.start {
            0
        } else {
            let j = ((t - self.start) / self.interval_length).floor();
            (j as usize).min(self.interval_count - 1)
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.start.is_finite() {
            return Err(invalid("grid.start", "must be finite"));
        }
        if !(self.interval_length > 0.0 && self.interval_length.is_finite()) {
            return Err(invalid("grid.interval_length", "must be positive"));
        }
        if self.interval_count == 0 {
            return Err(invalid("grid.interval_count", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceMode {
    Bus,
    Dras,
}

impl ServiceMode {
    pub const ALL: [ServiceMode; 2] = [ServiceMode::Bus, ServiceMode::Dras];

    pub fn as_str(self) -> &'static str {
        match self {
            ServiceMode::Bus => "bus",
            ServiceMode::Dras => "dras",
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            ServiceMode::Bus => Mode::Bus,
            ServiceMode::Dras => Mode::Dras,
        }
    }
}

/// Travel alternatives, in decision-vector block order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Car = 0,
    Bus = 1,
    Dras = 2,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Car, Mode::Bus, Mode::Dras];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Car => "car",
            Mode::Bus => "bus",
            Mode::Dras => "dras",
        }
    }

    pub fn service(self) -> Option<ServiceMode> {
        match self {
            Mode::Car => None,
            Mode::Bus => Some(ServiceMode::Bus),
            Mode::Dras => Some(ServiceMode::Dras),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Station {
    pub id: String,
    /// Distance from the corridor start (m).
    pub position: f64,
    #[serde(default)]
    pub served_by: Vec<ServiceMode>,
}

impl Station {
    pub fn serves(&self, mode: ServiceMode) -> bool {
        self.served_by.contains(&mode)
    }
}

/// A demand cohort with a single departure time. Entries sharing an `id`
/// are merged into one OD stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandGroup {
    pub id: String,
    pub origin: String,
    pub destination: String,
    /// Trip length (m); defaults to the station distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    pub departure_time: f64,
    pub demand: f64,
}

/// Demand spread over the horizon by a normal departure-time profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandProfile {
    pub id: String,
    pub origin: String,
    pub destination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    pub total: f64,
    /// Clock time of the departure peak (s).
    pub center: f64,
    /// Standard deviation of departure times (s).
    pub spread: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConstants {
    #[serde(default)]
    pub car: f64,
    #[serde(default)]
    pub bus: f64,
    #[serde(default)]
    pub dras: f64,
}

impl ModeConstants {
    pub fn get(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Car => self.car,
            Mode::Bus => self.bus,
            Mode::Dras => self.dras,
        }
    }
}

impl Default for ModeConstants {
    fn default() -> Self {
        Self {
            car: 0.0,
            bus: 0.0,
            dras: 0.0,
        }
    }
}

/// Multiplier on `k·p` earned by transit riders who sell their credits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedemptionWeights {
    pub bus: f64,
    pub dras: f64,
}

impl Default for RedemptionWeights {
    fn default() -> Self {
        Self { bus: 1.0, dras: 1.0 }
    }
}

impl RedemptionWeights {
    pub fn get(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Car => 0.0,
            Mode::Bus => self.bus,
            Mode::Dras => self.dras,
        }
    }
}

/// Mode, operation and cost parameters in file units (km/h, €/h, s, m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeParams {
    pub v_max_car: f64,
    pub v_max_bus: f64,
    pub v_max_dras: f64,
    pub v_min: f64,
    pub n_max: f64,
    /// In-vehicle value of time α (€/h).
    pub value_of_time: f64,
    /// Waiting value of time α′ (€/h).
    pub waiting_value_of_time: f64,
    /// Logit scale θ (1/€).
    pub theta: f64,
    pub mode_constants: ModeConstants,
    /// Perceived-wait weight η.
    pub eta: f64,
    pub bus_capacity: f64,
    /// Scheduled headway of buses leaving the first bus station (s).
    pub bus_interval: f64,
    /// Offset of the first bus after the horizon start (s).
    pub bus_first_departure: f64,
    pub bus_dwell: f64,
    pub dras_capacity: f64,
    /// Occupancy threshold ω.
    pub occupancy_threshold: f64,
    /// Minimum same-station DRAS departure headway (s).
    pub min_headway: f64,
    pub dras_launch_gap: f64,
    pub dras_first_launch: f64,
    /// Threshold on remaining seats `ω·(C − onboard)` instead of `ω·C`.
    pub dras_threshold_on_remaining_seats: bool,
    /// Emission offset cost β_em (€/m).
    pub emission_cost: f64,
    /// Amortised daily cost of one shuttle b (€).
    pub dras_daily_cost: f64,
    /// Fleet budget B (€/day).
    pub budget: f64,
    pub redemption_weights: RedemptionWeights,
    /// When false, stations have unlimited capacity and no waiting.
    pub operational_features: bool,
}

impl Default for ModeParams {
    fn default() -> Self {
        Self {
            v_max_car: 100.0,
            v_max_bus: 90.0,
            v_max_dras: 80.0,
            v_min: 5.0,
            n_max: 5500.0,
            value_of_time: 10.5,
            waiting_value_of_time: 26.5,
            theta: 0.1,
            mode_constants: ModeConstants::default(),
            eta: 1.0,
            bus_capacity: 60.0,
            bus_interval: 600.0,
            bus_first_departure: 0.0,
            bus_dwell: 0.0,
            dras_capacity: 20.0,
            occupancy_threshold: 0.8,
            min_headway: 60.0,
            dras_launch_gap: 240.0,
            dras_first_launch: 0.0,
            dras_threshold_on_remaining_seats: true,
            emission_cost: 0.000012,
            dras_daily_cost: 274.0,
            budget: 1.0e9,
            redemption_weights: RedemptionWeights::default(),
            operational_features: true,
        }
    }
}

impl ModeParams {
    /// Speed cap of a mode (km/h).
    pub fn v_cap(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Car => self.v_max_car,
            Mode::Bus => self.v_max_bus,
            Mode::Dras => self.v_max_dras,
        }
    }

    /// α in €/s.
    pub fn alpha_per_second(&self) -> f64 {
        self.value_of_time / 3600.0
    }

    /// α′ in €/s.
    pub fn waiting_alpha_per_second(&self) -> f64 {
        self.waiting_value_of_time / 3600.0
    }

    /// Seats that must be claimed before a shuttle departs.
    pub fn dras_threshold(&self) -> f64 {
        self.occupancy_threshold * self.dras_capacity
    }

    fn validate(&self) -> Result<()> {
        let p = |f: &str| format!("mode_params.{f}");
        let finite = [
            ("v_max_car", self.v_max_car),
            ("v_max_bus", self.v_max_bus),
            ("v_max_dras", self.v_max_dras),
            ("v_min", self.v_min),
            ("n_max", self.n_max),
            ("value_of_time", self.value_of_time),
            ("waiting_value_of_time", self.waiting_value_of_time),
            ("theta", self.theta),
            ("mode_constants.car", self.mode_constants.car),
            ("mode_constants.bus", self.mode_constants.bus),
            ("mode_constants.dras", self.mode_constants.dras),
            ("eta", self.eta),
            ("bus_capacity", self.bus_capacity),
            ("bus_interval", self.bus_interval),
            ("bus_first_departure", self.bus_first_departure),
            ("bus_dwell", self.bus_dwell),
            ("dras_capacity", self.dras_capacity),
            ("occupancy_threshold", self.occupancy_threshold),
            ("min_headway", self.min_headway),
            ("dras_launch_gap", self.dras_launch_gap),
            ("dras_first_launch", self.dras_first_launch),
            ("emission_cost", self.emission_cost),
            ("dras_daily_cost", self.dras_daily_cost),
            ("budget", self.budget),
            ("redemption_weights.bus", self.redemption_weights.bus),
            ("redemption_weights.dras", self.redemption_weights.dras),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(p(name), "must be finite"));
            }
        }
        if !(self.v_min > 0.0) {
            return Err(invalid(p("v_min"), "must be positive"));
        }
        if !(self.v_min < self.v_max_dras) {
            return Err(invalid(p("v_min"), "must be below v_max_dras"));
        }
        if !(self.v_max_dras <= self.v_max_bus && self.v_max_bus <= self.v_max_car) {
            return Err(invalid(
                p("v_max_bus"),
                "speed caps must satisfy v_max_dras <= v_max_bus <= v_max_car",
            ));
        }
        if !(self.n_max > 0.0) {
            return Err(invalid(p("n_max"), "must be positive"));
        }
        if !(self.theta > 0.0) {
            return Err(invalid(p("theta"), "must be positive"));
        }
        if !(self.occupancy_threshold > 0.0 && self.occupancy_threshold <= 1.0) {
            return Err(invalid(p("occupancy_threshold"), "must lie in (0, 1]"));
        }
        if !(self.eta > 0.0) {
            return Err(invalid(p("eta"), "must be positive"));
        }
        if self.bus_capacity < 1.0 {
            return Err(invalid(p("bus_capacity"), "must be at least 1"));
        }
        if self.dras_capacity < 1.0 {
            return Err(invalid(p("dras_capacity"), "must be at least 1"));
        }
        if !(self.bus_interval > 0.0) {
            return Err(invalid(p("bus_interval"), "must be positive"));
        }
        for (name, v) in [
            ("value_of_time", self.value_of_time),
            ("waiting_value_of_time", self.waiting_value_of_time),
            ("bus_first_departure", self.bus_first_departure),
            ("bus_dwell", self.bus_dwell),
            ("min_headway", self.min_headway),
            ("dras_launch_gap", self.dras_launch_gap),
            ("dras_first_launch", self.dras_first_launch),
            ("emission_cost", self.emission_cost),
            ("dras_daily_cost", self.dras_daily_cost),
            ("budget", self.budget),
            ("redemption_weights.bus", self.redemption_weights.bus),
            ("redemption_weights.dras", self.redemption_weights.dras),
        ] {
            if v < 0.0 {
                return Err(invalid(p(name), "must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Upper-level levers: credit endowment `k`, car charge `τ`, fleet size `ξ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    #[serde(default)]
    pub k: u32,
    #[serde(default)]
    pub tau: u32,
    #[serde(default, alias = "xi")]
    pub fleet: u32,
}

impl PolicyParams {
    pub fn new(k: u32, tau: u32, fleet: u32) -> Self {
        Self { k, tau, fleet }
    }

    pub fn baseline() -> Self {
        Self::default()
    }

    pub fn tcs_active(&self) -> bool {
        self.k > 0 || self.tau > 0
    }

    /// Maximum allowable driving rate `k/τ`.
    pub fn d_max(&self) -> Option<f64> {
        (self.tau > 0).then(|| self.k as f64 / self.tau as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tcs_active() {
            if self.tau == 0 {
                return Err(invalid("policy.tau", "must be positive when k > 0"));
            }
            if self.tau < self.k {
                return Err(invalid(
                    "policy.tau",
                    format!("tau = {} is below k = {}", self.tau, self.k),
                ));
            }
        }
        Ok(())
    }
}

/// Lower-level solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// ε_res on ‖F‖₂.
    pub residual_tol: f64,
    /// Stop when the merit changes by less than this between iterations.
    pub loss_tol: f64,
    pub max_iter: usize,
    /// Armijo constant `c`.
    pub armijo_c: f64,
    /// Backtracking shrink factor β.
    pub backtrack_factor: f64,
    pub initial_step: f64,
    /// Step multiplier after an acceptance without backtracking.
    pub step_growth: f64,
    pub max_step: f64,
    pub max_backtracks: usize,
    /// ε_sum on `|x + y + z − 1|`.
    pub sum_tol: f64,
    /// Share averaging applied when re-propagated curves raise the merit.
    pub damping: f64,
    /// Weight of the credit-market slack inside the price residual.
    pub market_scale: f64,
    /// Upper bound Ω on the credit price (€/credit).
    pub price_cap: f64,
    /// Relative tolerances of the market-clearing certificate.
    pub market_tol: f64,
    /// Blend towards uniform shares applied to warm starts (0 = none).
    pub warm_start_perturbation: f64,
    /// Extra deterministic starting points for multi-start.
    pub seeds: Vec<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-5,
            loss_tol: 1e-20,
            max_iter: 2000,
            armijo_c: 1e-4,
            backtrack_factor: 0.9,
            initial_step: 0.1,
            step_growth: 1.5,
            max_step: 1.0e3,
            max_backtracks: 80,
            sum_tol: 1e-4,
            damping: 0.5,
            market_scale: 100.0,
            price_cap: 10.0,
            market_tol: 1e-6,
            warm_start_perturbation: 0.0,
            seeds: Vec::new(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let p = |f: &str| format!("solver.{f}");
        if !(self.residual_tol > 0.0) {
            return Err(invalid(p("residual_tol"), "must be positive"));
        }
        if !(self.loss_tol >= 0.0) {
            return Err(invalid(p("loss_tol"), "must be non-negative"));
        }
        if self.max_iter == 0 {
            return Err(invalid(p("max_iter"), "must be at least 1"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(invalid(p("armijo_c"), "must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(invalid(p("backtrack_factor"), "must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0 && self.max_step >= self.initial_step) {
            return Err(invalid(p("initial_step"), "must be positive and <= max_step"));
        }
        if !(self.step_growth >= 1.0) {
            return Err(invalid(p("step_growth"), "must be >= 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid(p("damping"), "must lie in (0, 1]"));
        }
        if !(self.market_scale > 0.0) {
            return Err(invalid(p("market_scale"), "must be positive"));
        }
        if !(self.price_cap > 0.0) {
            return Err(invalid(p("price_cap"), "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.warm_start_perturbation) {
            return Err(invalid(p("warm_start_perturbation"), "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Weights γ of the planner objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub travel_time: f64,
    pub emission: f64,
    pub fleet: f64,
    pub price: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            travel_time: 1.0,
            emission: 1.0,
            fleet: 0.5,
            price: 0.05,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilevelConfig {
    pub weights: ObjectiveWeights,
    /// Add station waiting to the travel-time term of the objective.
    pub include_waiting: bool,
    pub k_values: Vec<u32>,
    pub tau_values: Vec<u32>,
    pub fleet_values: Vec<u32>,
}

/// On-disk scenario document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub grid: TimeGrid,
    pub stations: Vec<Station>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demand_groups: Vec<DemandGroup>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demand_profiles: Vec<DemandProfile>,
    /// Exogenous vehicles per interval that load the network but make no choice.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub through_traffic: Vec<f64>,
    #[serde(default)]
    pub mode_params: ModeParams,
    #[serde(default)]
    pub policy: PolicyParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub bilevel: BilevelConfig,
}

/// One OD demand stream with per-interval demand `q_i(t_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdStream {
    pub id: String,
    pub origin: usize,
    pub destination: usize,
    /// Trip length `l_i` (m).
    pub length: f64,
    pub demand: Vec<f64>,
}

impl OdStream {
    pub fn total(&self) -> f64 {
        self.demand.iter().sum()
    }
}

/// Validated scenario; immutable and shareable across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub grid: TimeGrid,
    pub stations: Vec<Station>,
    pub streams: Vec<OdStream>,
    pub through_traffic: Vec<f64>,
    pub mode_params: ModeParams,
    pub policy: PolicyParams,
    pub solver: SolverConfig,
    pub bilevel: BilevelConfig,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_json_str(&text)
}

/// Splits `total` over the grid intervals with a normal departure profile.
///
/// Mass before `t_0` or after `t_M` is folded into the first or last interval,
/// so the result sums to `total`.
pub fn discretize_demand(total: f64, center: f64, spread: f64, grid: &TimeGrid) -> Result<Vec<f64>> {
    if !(total >= 0.0 && total.is_finite()) {
        return Err(invalid("total", "must be a non-negative number"));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(invalid("spread", "must be positive"));
    }
    if !center.is_finite() {
        return Err(invalid("center", "must be finite"));
    }
    let normal = Normal::new(center, spread).map_err(|e| invalid("spread", e.to_string()))?;
    let m = grid.interval_count;
    let cdf = |j: usize| -> f64 {
        if j == 0 {
            0.0
        } else if j == m {
            1.0
        } else {
            normal.cdf(grid.boundary(j))
        }
    };
    Ok((0..m).map(|j| total * (cdf(j + 1) - cdf(j))).collect())
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        file.grid.validate()?;
        let grid = file.grid.clone();
        let m = grid.interval_count;

        if file.stations.is_empty() {
            return Err(invalid("stations", "at least one station is required"));
        }
        for (idx, s) in file.stations.iter().enumerate() {
            let field = format!("stations[{idx}]");
            if !(s.position >= 0.0 && s.position.is_finite()) {
                return Err(invalid(format!("{field}.position"), "must be non-negative"));
            }
            if idx > 0 && !(s.position > file.stations[idx - 1].position) {
                return Err(invalid(
                    format!("{field}.position"),
                    "positions must strictly increase along the corridor",
                ));
            }
            if file.stations[..idx].iter().any(|o| o.id == s.id) {
                return Err(invalid(format!("{field}.id"), format!("duplicate id `{}`", s.id)));
            }
        }
        let station_index = |id: &str, field: String| -> Result<usize> {
            file.stations
                .iter()
                .position(|s| s.id == id)
                .ok_or(Error::UnknownStation {
                    station: id.to_string(),
                    field,
                })
        };
        let resolve = |field: &str,
                       origin: &str,
                       destination: &str,
                       length: Option<f64>|
         -> Result<(usize, usize, f64)> {
            let o = station_index(origin, format!("{field}.origin"))?;
            let d = station_index(destination, format!("{field}.destination"))?;
            let gap = file.stations[d].position - file.stations[o].position;
            if !(gap > 0.0) {
                return Err(invalid(
                    format!("{field}.destination"),
                    "destination must lie downstream of the origin",
                ));
            }
            let length = length.unwrap_or(gap);
            if !(length > 0.0 && length.is_finite()) {
                return Err(invalid(format!("{field}.length"), "must be positive"));
            }
            Ok((o, d, length))
        };

        let mut streams: Vec<OdStream> = Vec::new();
        for (idx, p) in file.demand_profiles.iter().enumerate() {
            let field = format!("demand_profiles[{idx}]");
            let (o, d, length) = resolve(&field, &p.origin, &p.destination, p.length)?;
            if streams.iter().any(|s| s.id == p.id) {
                return Err(invalid(format!("{field}.id"), format!("duplicate id `{}`", p.id)));
            }
            let demand = discretize_demand(p.total, p.center, p.spread, &grid).map_err(|e| match e {
                Error::Invalid { field: f, reason } => invalid(format!("{field}.{f}"), reason),
                other => other,
            })?;
            streams.push(OdStream {
                id: p.id.clone(),
                origin: o,
                destination: d,
                length,
                demand,
            });
        }
        let n_profiles = streams.len();
        for (idx, g) in file.demand_groups.iter().enumerate() {
            let field = format!("demand_groups[{idx}]");
            let (o, d, length) = resolve(&field, &g.origin, &g.destination, g.length)?;
            if !(g.demand >= 0.0 && g.demand.is_finite()) {
                return Err(invalid(format!("{field}.demand"), "must be non-negative"));
            }
            let j = grid.interval_of(g.departure_time).ok_or_else(|| {
                invalid(
                    format!("{field}.departure_time"),
                    "must lie within [t_0, t_M)",
                )
            })?;
            if let Some(pos) = streams.iter().position(|s| s.id == g.id) {
                let s = &mut streams[pos];
                if pos < n_profiles || s.origin != o || s.destination != d || s.length != length {
                    return Err(invalid(
                        format!("{field}.id"),
                        "groups sharing an id must share origin, destination and length",
                    ));
                }
                s.demand[j] += g.demand;
            } else {
                let mut demand = vec![0.0; m];
                demand[j] = g.demand;
                streams.push(OdStream {
                    id: g.id.clone(),
                    origin: o,
                    destination: d,
                    length,
                    demand,
                });
            }
        }

        let through_traffic = if file.through_traffic.is_empty() {
            vec![0.0; m]
        } else {
            if file.through_traffic.len() != m {
                return Err(invalid(
                    "through_traffic",
                    format!("expected {m} values, got {}", file.through_traffic.len()),
                ));
            }
            if file.through_traffic.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(invalid("through_traffic", "values must be non-negative"));
            }
            file.through_traffic.clone()
        };

        file.mode_params.validate()?;
        file.policy.validate()?;
        file.solver.validate()?;

        Ok(Scenario {
            name: file.name,
            grid,
            stations: file.stations,
            streams,
            through_traffic,
            mode_params: file.mode_params,
            policy: file.policy,
            solver: file.solver,
            bilevel: file.bilevel,
        })
    }

    /// Normalised file form: every stream is written as explicit groups
    /// departing at interval midpoints.
    pub fn to_file(&self) -> ScenarioFile {
        let mut groups = Vec::new();
        for s in &self.streams {
            let gap = self.stations[s.destination].position - self.stations[s.origin].position;
            for (j, &q) in s.demand.iter().enumerate() {
                if q != 0.0 {
                    groups.push(DemandGroup {
                        id: s.id.clone(),
                        origin: self.stations[s.origin].id.clone(),
                        destination: self.stations[s.destination].id.clone(),
                        length: (s.length != gap).then_some(s.length),
                        departure_time: self.grid.boundary(j) + 0.5 * self.grid.interval_length,
                        demand: q,
                    });
                }
            }
        }
        ScenarioFile {
            name: self.name.clone(),
            grid: self.grid.clone(),
            stations: self.stations.clone(),
            demand_groups: groups,
            demand_profiles: Vec::new(),
            through_traffic: if self.through_traffic.iter().all(|v| *v == 0.0) {
                Vec::new()
            } else {
                self.through_traffic.clone()
            },
            mode_params: self.mode_params.clone(),
            policy: self.policy,
            solver: self.solver.clone(),
            bilevel: self.bilevel.clone(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serialises")
    }

    #[inline]
    pub fn interval_count(&self) -> usize {
        self.grid.interval_count
    }

    #[inline]
    pub fn stream_count(&self) -> usize {
        self.streams.len()
    }

    pub fn total_demand(&self) -> f64 {
        self.streams.iter().map(OdStream::total).sum()
    }

    /// Same scenario under another policy.
    pub fn with_policy(&self, policy: PolicyParams) -> Result<Self> {
        policy.validate()?;
        let mut s = self.clone();
        s.policy = policy;
        Ok(s)
    }

    /// Stations a service mode stops at, in corridor order.
    pub fn route(&self, mode: ServiceMode) -> Vec<usize> {
        (0..self.stations.len())
            .filter(|&s| self.stations[s].serves(mode))
            .collect()
    }

    /// Streams whose travellers board at station `s` (`I(s)`).
    pub fn streams_from(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.streams
            .iter()
            .enumerate()
            .filter(move |(_, st)| st.origin == s)
            .map(|(i, _)| i)
    }

    /// Whether mode `mode` can carry stream `i` under the current policy.
    pub fn mode_available(&self, i: usize, mode: Mode) -> bool {
        let st = &self.streams[i];
        match mode.service() {
            None => true,
            Some(svc) => {
                let served = self.stations[st.origin].serves(svc)
                    && self.stations[st.destination].serves(svc);
                match svc {
                    ServiceMode::Bus => served,
                    ServiceMode::Dras => {
                        served && (self.policy.fleet > 0 || !self.mode_params.operational_features)
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(6.0 * 3600.0, 300.0, 36)
    }

    const MINIMAL: &str = r#"{
        "grid": {"start": 21600, "interval_length": 300, "interval_count": 36},
        "stations": [
            {"id": "a", "position": 0, "served_by": ["bus", "dras"]},
            {"id": "b", "position": 28000, "served_by": ["bus", "dras"]}
        ],
        "demand_groups": []
    }"#;

    #[test]
    fn discretized_demand_sums_to_total_and_peaks_at_center() {
        let q = discretize_demand(15_000.0, 7.5 * 3600.0, 1800.0, &grid()).unwrap();
        assert_eq!(q.len(), 36);
        let sum: f64 = q.iter().sum();
        assert!((sum - 15_000.0).abs() <= 1e-9 * 15_000.0);
        let argmax = (0..36).max_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap();
        // 07:30 is the boundary between intervals 17 and 18; both straddle the peak equally.
        assert!(argmax == 17 || argmax == 18);
        assert!((q[17] - q[18]).abs() < 1e-9);
    }

    #[test]
    fn discretized_demand_zero_total() {
        let q = discretize_demand(0.0, 27_000.0, 1800.0, &grid()).unwrap();
        assert!(q.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn discretized_demand_is_symmetric_about_center() {
        let q = discretize_demand(1000.0, 7.5 * 3600.0, 1200.0, &grid()).unwrap();
        for j in 0..18 {
            assert!((q[j] - q[35 - j]).abs() < 1e-9, "interval {j}");
        }
    }

    #[test]
    fn discretize_rejects_bad_spread() {
        assert!(discretize_demand(10.0, 0.0, 0.0, &grid()).is_err());
    }

    #[test]
    fn empty_demand_is_valid() {
        let s = Scenario::from_json_str(MINIMAL).unwrap();
        assert_eq!(s.stream_count(), 0);
        assert_eq!(s.total_demand(), 0.0);
    }

    #[test]
    fn tau_below_k_is_rejected() {
        let text = MINIMAL.replace(
            r#""demand_groups": []"#,
            r#""demand_groups": [], "policy": {"k": 5, "tau": 4}"#,
        );
        match Scenario::from_json_str(&text) {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "policy.tau"),
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_station_is_reported() {
        let text = MINIMAL.replace(
            r#""demand_groups": []"#,
            r#""demand_groups": [{"id": "g", "origin": "a", "destination": "zz", "departure_time": 21700, "demand": 3}]"#,
        );
        assert!(matches!(
            Scenario::from_json_str(&text),
            Err(Error::UnknownStation { .. })
        ));
    }

    #[test]
    fn departure_outside_horizon_is_rejected() {
        let text = MINIMAL.replace(
            r#""demand_groups": []"#,
            r#""demand_groups": [{"id": "g", "origin": "a", "destination": "b", "departure_time": 32400, "demand": 3}]"#,
        );
        assert!(Scenario::from_json_str(&text).is_err());
    }

    #[test]
    fn groups_with_shared_id_merge_into_one_stream() {
        let text = MINIMAL.replace(
            r#""demand_groups": []"#,
            r#""demand_groups": [
                {"id": "g", "origin": "a", "destination": "b", "departure_time": 21700, "demand": 3},
                {"id": "g", "origin": "a", "destination": "b", "departure_time": 22000, "demand": 4}
            ]"#,
        );
        let s = Scenario::from_json_str(&text).unwrap();
        assert_eq!(s.stream_count(), 1);
        assert_eq!(s.streams[0].demand[0], 3.0);
        assert_eq!(s.streams[0].demand[1], 4.0);
        assert_eq!(s.streams[0].length, 28_000.0);
    }

    #[test]
    fn speed_ordering_is_enforced() {
        let mut mp = ModeParams::default();
        mp.v_max_bus = 120.0;
        assert!(mp.validate().is_err());
        let mut mp = ModeParams::default();
        mp.occupancy_threshold = 0.0;
        assert!(mp.validate().is_err());
    }

    #[test]
    fn policy_d_max() {
        assert_eq!(PolicyParams::new(50, 72, 0).d_max().map(|d| (d * 1000.0).round()), Some(694.0));
        assert_eq!(PolicyParams::baseline().d_max(), None);
    }
}
