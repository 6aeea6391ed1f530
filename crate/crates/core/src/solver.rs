//! Equilibrium residual, its merit gradient and the projected-gradient solver.
//!
//! A decision vector stacks car, bus and shuttle shares followed by the
//! credit price: `[x | y | z | p]`, each share block stream-major
//! (`i * M + m`). Service timelines are propagated in `f64` and frozen while
//! the residual is differentiated; they are re-propagated after every
//! accepted step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cost::{assemble_costs, choice_probabilities, GeneralizedCost, ModeCosts};
use crate::error::{Error, Result};
use crate::market::{price_residual, CreditMarketState};
use crate::mfd::{cohort_travel_time, propagate_car_dynamics, CarPropagation};
use crate::queue::{average_wait, build_arrival_curve, perceived_wait, waiting_areas, ArrivalCurve, ServiceCurve};
use crate::scalar::{Dual, Scalar};
use crate::scenario::{Mode, PolicyParams, Scenario, ServiceMode, SolverConfig};
use crate::transit::{propagate_bus_timelines, propagate_dras_timelines, ServicePlan, StationDemand};

/// Directional lanes carried by one forward-mode pass.
pub const GRADIENT_LANES: usize = 8;

/// Scalar used for gradient passes.
pub type GradientDual = Dual<GRADIENT_LANES>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionVector {
    pub streams: usize,
    pub intervals: usize,
    pub values: Vec<f64>,
}

impl DecisionVector {
    pub fn len_for(streams: usize, intervals: usize) -> usize {
        3 * streams * intervals + 1
    }

    pub fn from_values(streams: usize, intervals: usize, values: Vec<f64>) -> Result<Self> {
        let expected = Self::len_for(streams, intervals);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            streams,
            intervals,
            values,
        })
    }

    /// Equal split over the modes each stream can use, zero price.
    pub fn uniform(scenario: &Scenario) -> Self {
        let (n, m) = (scenario.stream_count(), scenario.interval_count());
        let block = n * m;
        let mut values = vec![0.0; 3 * block + 1];
        for i in 0..n {
            let avail = Mode::ALL.map(|mode| scenario.mode_available(i, mode));
            let count = avail.iter().filter(|a| **a).count() as f64;
            for mode in Mode::ALL {
                if avail[mode.index()] {
                    for t in 0..m {
                        values[mode.index() * block + i * m + t] = 1.0 / count;
                    }
                }
            }
        }
        Self {
            streams: n,
            intervals: m,
            values,
        }
    }

    /// Random point of the feasible box, shares normalised per stream-interval.
    pub fn random(scenario: &Scenario, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = Self::uniform(scenario);
        let block = d.block();
        for idx in 0..block {
            let i = idx / d.intervals;
            let w = Mode::ALL.map(|mode| {
                if scenario.mode_available(i, mode) {
                    rng.gen_range(0.05..1.0)
                } else {
                    0.0
                }
            });
            let s: f64 = w.iter().sum();
            for mode in Mode::ALL {
                d.values[mode.index() * block + idx] = w[mode.index()] / s;
            }
        }
        d
    }

    #[inline]
    pub fn block(&self) -> usize {
        self.streams * self.intervals
    }

    pub fn shares(&self, mode: Mode) -> &[f64] {
        let b = self.block();
        &self.values[mode.index() * b..(mode.index() + 1) * b]
    }

    pub fn price(&self) -> f64 {
        self.values[3 * self.block()]
    }

    pub fn share(&self, mode: Mode, stream: usize, interval: usize) -> f64 {
        self.values[mode.index() * self.block() + stream * self.intervals + interval]
    }

    /// Elementwise clamp onto `[0,1]` shares and `[0, price_cap]` price.
    pub fn project(&mut self, price_cap: f64) {
        project_slice(&mut self.values, price_cap);
    }

    pub fn is_feasible(&self, price_cap: f64) -> bool {
        let n = self.values.len();
        self.values[..n - 1].iter().all(|v| (0.0..=1.0).contains(v))
            && (0.0..=price_cap).contains(&self.values[n - 1])
    }

    /// `(1 − w)·self + w·uniform`.
    pub fn blend_uniform(&self, scenario: &Scenario, weight: f64) -> Self {
        let u = Self::uniform(scenario);
        let mut d = self.clone();
        let n = d.values.len();
        for k in 0..n - 1 {
            d.values[k] = (1.0 - weight) * d.values[k] + weight * u.values[k];
        }
        d
    }
}

pub fn project_slice(values: &mut [f64], price_cap: f64) {
    let n = values.len();
    for v in &mut values[..n - 1] {
        *v = v.clamp(0.0, 1.0);
    }
    values[n - 1] = values[n - 1].clamp(0.0, price_cap);
}

/// Bus and shuttle service held fixed during one differentiation.
#[derive(Clone, Debug)]
pub struct FrozenService {
    pub bus: ServicePlan,
    pub dras: ServicePlan,
}

impl FrozenService {
    pub fn curve(&self, mode: ServiceMode, station: usize) -> &ServiceCurve {
        match mode {
            ServiceMode::Bus => &self.bus.curves[station],
            ServiceMode::Dras => &self.dras.curves[station],
        }
    }
}

/// Runs car dynamics at `values` and propagates both transit services.
pub fn propagate_service(scenario: &Scenario, values: &[f64]) -> FrozenService {
    let n_st = scenario.stations.len();
    if !scenario.mode_params.operational_features {
        return FrozenService {
            bus: ServicePlan::empty(n_st),
            dras: ServicePlan::empty(n_st),
        };
    }
    let block = scenario.stream_count() * scenario.interval_count();
    let car = propagate_car_dynamics(scenario, &values[..block]);
    let p = &scenario.mode_params;
    let plan = |mode: ServiceMode| {
        let shares = &values[mode.mode().index() * block..(mode.mode().index() + 1) * block];
        let demand: Vec<StationDemand> = (0..n_st)
            .map(|s| StationDemand::build(scenario, s, mode, shares))
            .collect();
        let speeds = car.state.mode_speeds(mode.mode(), p);
        match mode {
            ServiceMode::Bus => propagate_bus_timelines(scenario, &speeds, &demand),
            ServiceMode::Dras => propagate_dras_timelines(scenario, &speeds, &demand),
        }
    };
    FrozenService {
        bus: plan(ServiceMode::Bus),
        dras: plan(ServiceMode::Dras),
    }
}

/// Station-level waiting of one service mode.
#[derive(Clone, Debug)]
pub struct StationWaits<T> {
    pub arrivals: ArrivalCurve<T>,
    /// Passenger-seconds per interval.
    pub area: Vec<T>,
}

/// Everything computed by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass<T> {
    pub residual: Vec<T>,
    pub car: CarPropagation<T>,
    /// In-vehicle seconds per stream-interval and mode.
    pub travel_times: Vec<[T; 3]>,
    /// Indexed `[station][bus = 0, dras = 1]`; `None` where the mode does not board.
    pub waits: Vec<[Option<StationWaits<T>>; 2]>,
    pub perceived: Vec<[T; 3]>,
    pub costs: Vec<ModeCosts<T>>,
    pub probabilities: Vec<[T; 3]>,
}

fn service_slot(mode: ServiceMode) -> usize {
    match mode {
        ServiceMode::Bus => 0,
        ServiceMode::Dras => 1,
    }
}

/// Residual `F(λ) = (shares − logit(C(λ)), price component)` with frozen service.
pub fn forward_pass<T: Scalar>(
    scenario: &Scenario,
    service: &FrozenService,
    lambda: &[T],
    market_scale: f64,
) -> Result<ForwardPass<T>> {
    let (n, m_count) = (scenario.stream_count(), scenario.interval_count());
    let block = n * m_count;
    let expected = 3 * block + 1;
    if lambda.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: lambda.len(),
        });
    }
    let grid = &scenario.grid;
    let params = &scenario.mode_params;
    let ops = params.operational_features;

    let car = propagate_car_dynamics(scenario, &lambda[..block]);
    let speeds = [Mode::Car, Mode::Bus, Mode::Dras].map(|mode| car.state.mode_speeds(mode, params));

    let mut travel_times = vec![[T::zero(); 3]; block];
    for (i, st) in scenario.streams.iter().enumerate() {
        for m in 0..m_count {
            for mode in Mode::ALL {
                travel_times[i * m_count + m][mode.index()] =
                    cohort_travel_time(grid, m, st.length, &speeds[mode.index()]);
            }
        }
    }

    let n_st = scenario.stations.len();
    let mut waits: Vec<[Option<StationWaits<T>>; 2]> = (0..n_st).map(|_| [None, None]).collect();
    let mut perceived = vec![[T::zero(); 3]; block];
    if ops {
        for s in 0..n_st {
            for mode in ServiceMode::ALL {
                let boards = scenario
                    .streams_from(s)
                    .any(|i| scenario.mode_available(i, mode.mode()));
                if !boards {
                    continue;
                }
                let mi = mode.mode().index();
                let arrivals = build_arrival_curve(scenario, s, mode, &lambda[mi * block..(mi + 1) * block]);
                let area = waiting_areas(grid, &arrivals, service.curve(mode, s))?;
                for i in scenario.streams_from(s) {
                    for m in 0..m_count {
                        perceived[i * m_count + m][mi] =
                            perceived_wait(area[m], arrivals.arrivals_in(m), params.eta);
                    }
                }
                waits[s][service_slot(mode)] = Some(StationWaits { arrivals, area });
            }
        }
    }

    let price = lambda[3 * block];
    let costs = assemble_costs(scenario, &travel_times, &perceived, price);
    let probabilities = choice_probabilities(scenario, &costs)?;

    let mut residual = Vec::with_capacity(expected);
    for mode in Mode::ALL {
        let mi = mode.index();
        for idx in 0..block {
            residual.push(lambda[mi * block + idx] - probabilities[idx][mi]);
        }
    }
    residual.push(price_residual(scenario, &lambda[..block], price, market_scale));

    Ok(ForwardPass {
        residual,
        car,
        travel_times,
        waits,
        perceived,
        costs,
        probabilities,
    })
}

pub fn merit(residual: &[f64]) -> f64 {
    0.5 * residual.iter().map(|r| r * r).sum::<f64>()
}

pub fn norm(residual: &[f64]) -> f64 {
    residual.iter().map(|r| r * r).sum::<f64>().sqrt()
}

/// `∇(½‖F‖²) = Jᵀ F` by forward-mode differentiation with frozen service.
///
/// `residual` must be `F` evaluated at `values` with the same service.
pub fn merit_gradient(
    scenario: &Scenario,
    service: &FrozenService,
    values: &[f64],
    residual: &[f64],
    market_scale: f64,
) -> Result<Vec<f64>> {
    Ok(gradient_and_curvature(scenario, service, values, residual, market_scale)?.0)
}

/// Merit gradient together with the squared Jacobian column norms
/// `diag(JᵀJ)`, which come for free from the same passes.
pub fn gradient_and_curvature(
    scenario: &Scenario,
    service: &FrozenService,
    values: &[f64],
    residual: &[f64],
    market_scale: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let jac = residual_jacobian(scenario, service, values, market_scale)?;
    let grad = jac.tr_mul(&DVector::from_column_slice(residual));
    let curv = jac.column_iter().map(|c| c.norm_squared()).collect();
    Ok((grad.as_slice().to_vec(), curv))
}

/// Jacobian of the residual with the service timelines held fixed, built
/// column block by column block with forward-mode lanes.
pub fn residual_jacobian(
    scenario: &Scenario,
    service: &FrozenService,
    values: &[f64],
    market_scale: f64,
) -> Result<DMatrix<f64>> {
    let n = values.len();
    let mut jac: Option<DMatrix<f64>> = None;
    let mut lambda: Vec<GradientDual> = values.iter().map(|&v| GradientDual::constant(v)).collect();
    for start in (0..n).step_by(GRADIENT_LANES) {
        let end = (start + GRADIENT_LANES).min(n);
        for k in start..end {
            lambda[k] = GradientDual::variable(values[k], k - start);
        }
        let pass = forward_pass(scenario, service, &lambda, market_scale)?;
        let jac = jac.get_or_insert_with(|| DMatrix::zeros(pass.residual.len(), n));
        for (row, r) in pass.residual.iter().enumerate() {
            for lane in 0..end - start {
                jac[(row, start + lane)] = r.eps[lane];
            }
        }
        for k in start..end {
            lambda[k] = GradientDual::constant(values[k]);
        }
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(0, n)))
}

/// Damped Gauss-Newton direction `(JᵀJ + μ·D)⁻¹ Jᵀ F` with `D` the column
/// scaling, or `None` when the system is not positive definite.
fn levenberg_direction(jac: &DMatrix<f64>, grad: &[f64], curv: &[f64], mu: f64) -> Option<Vec<f64>> {
    let mut normal = jac.tr_mul(jac);
    for (k, c) in curv.iter().enumerate() {
        normal[(k, k)] += mu * c.max(1.0);
    }
    let chol = normal.cholesky()?;
    let d = chol.solve(&DVector::from_column_slice(grad));
    d.iter().all(|v| v.is_finite()).then(|| d.as_slice().to_vec())
}

/// One row of the convergence trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub merit: f64,
    pub residual_norm: f64,
    pub step: f64,
    pub backtracks: usize,
}

/// Numerical checks of an equilibrium candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub residual_norm: f64,
    pub max_share_sum_error: f64,
    /// `p · residual`, credits·€.
    pub complementarity: f64,
    pub market: CreditMarketState,
    pub residual_ok: bool,
    pub share_sums_ok: bool,
    pub complementarity_ok: bool,
    pub feasibility_ok: bool,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.residual_ok && self.share_sums_ok && self.complementarity_ok && self.feasibility_ok
    }
}

pub fn certify(scenario: &Scenario, decision: &DecisionVector, residual_norm: f64, config: &SolverConfig) -> Certificate {
    let block = decision.block();
    let mut max_dev: f64 = 0.0;
    for idx in 0..block {
        let sum: f64 = Mode::ALL.iter().map(|m| decision.values[m.index() * block + idx]).sum();
        max_dev = max_dev.max((sum - 1.0).abs());
    }
    let market = CreditMarketState::new(scenario, decision.shares(Mode::Car), decision.price());
    let complementarity = market.price * market.residual;
    let tol = config.market_tol * market.supply;
    Certificate {
        residual_norm,
        max_share_sum_error: max_dev,
        complementarity,
        market,
        residual_ok: residual_norm <= config.residual_tol,
        share_sums_ok: max_dev <= config.sum_tol,
        complementarity_ok: complementarity.abs() <= tol,
        feasibility_ok: market.residual >= -tol,
    }
}

/// Where a solve started from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Initialization {
    Uniform,
    WarmStart,
    Seed { seed: u64 },
}

/// Per-interval results of the final forward pass, in `f64`.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub pass: ForwardPass<f64>,
    pub service: FrozenService,
    pub market: CreditMarketState,
}

#[derive(Clone, Debug)]
pub struct EquilibriumResult {
    pub policy: PolicyParams,
    pub decision: DecisionVector,
    pub residual_norm: f64,
    pub merit: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certificate: Certificate,
    pub initialization: Initialization,
    pub trace: Vec<TraceRow>,
    pub diagnostics: Diagnostics,
}

impl EquilibriumResult {
    /// Demand-weighted share of each mode over the horizon.
    pub fn mode_shares(&self, scenario: &Scenario) -> [f64; 3] {
        let total = scenario.total_demand();
        if total <= 0.0 {
            return [0.0; 3];
        }
        Mode::ALL.map(|mode| {
            let s = self.decision.shares(mode);
            let mut acc = 0.0;
            for (i, st) in scenario.streams.iter().enumerate() {
                for (m, q) in st.demand.iter().enumerate() {
                    acc += q * s[i * self.decision.intervals + m];
                }
            }
            acc / total
        })
    }

    /// Demand-weighted share of each mode in interval `m`, `None` without demand.
    pub fn interval_shares(&self, scenario: &Scenario, m: usize) -> Option<[f64; 3]> {
        let total: f64 = scenario.streams.iter().map(|s| s.demand[m]).sum();
        if total <= 0.0 {
            return None;
        }
        Some(Mode::ALL.map(|mode| {
            scenario
                .streams
                .iter()
                .enumerate()
                .map(|(i, st)| st.demand[m] * self.decision.share(mode, i, m))
                .sum::<f64>()
                / total
        }))
    }

    pub fn costs_f64(&self) -> Vec<[Option<GeneralizedCost<f64>>; 3]> {
        self.diagnostics.pass.costs.clone()
    }
}

struct Evaluated {
    values: Vec<f64>,
    service: FrozenService,
    residual: Vec<f64>,
    merit: f64,
}

fn evaluate(scenario: &Scenario, values: Vec<f64>, scale: f64) -> Result<Evaluated> {
    let service = propagate_service(scenario, &values);
    let residual = forward_pass(scenario, &service, &values, scale)?.residual;
    let merit = merit(&residual);
    Ok(Evaluated {
        values,
        service,
        residual,
        merit,
    })
}

/// Minimises `½‖F‖²` with damped Gauss-Newton steps, falling back to a
/// scaled projected gradient, under projected Armijo backtracking.
///
/// Non-convergence is reported through `converged = false` with the best
/// iterate; only malformed inputs produce an error.
pub fn solve_equilibrium(
    scenario: &Scenario,
    init: Option<&DecisionVector>,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    let mut starts: Vec<(Initialization, DecisionVector)> = Vec::new();
    match init {
        Some(d) => {
            let expected = DecisionVector::len_for(scenario.stream_count(), scenario.interval_count());
            if d.values.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: d.values.len(),
                });
            }
            let d = if config.warm_start_perturbation > 0.0 {
                d.blend_uniform(scenario, config.warm_start_perturbation)
            } else {
                d.clone()
            };
            starts.push((Initialization::WarmStart, d));
        }
        None => starts.push((Initialization::Uniform, DecisionVector::uniform(scenario))),
    }
    for &seed in &config.seeds {
        starts.push((Initialization::Seed { seed }, DecisionVector::random(scenario, seed)));
    }

    let mut best: Option<EquilibriumResult> = None;
    for (how, start) in starts {
        let r = solve_from(scenario, start, how, config)?;
        let better = match &best {
            None => true,
            Some(b) => (r.converged, -r.residual_norm) > (b.converged, -b.residual_norm),
        };
        if better {
            best = Some(r);
        }
        if best.as_ref().is_some_and(|b| b.converged) {
            break;
        }
    }
    Ok(best.expect("at least one start"))
}

fn solve_from(
    scenario: &Scenario,
    mut start: DecisionVector,
    initialization: Initialization,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    let scale = config.market_scale;
    let cap = config.price_cap;
    start.project(cap);
    let (streams, intervals) = (start.streams, start.intervals);

    let mut cur = evaluate(scenario, start.values, scale)?;
    let mut best_values = cur.values.clone();
    let mut best_merit = cur.merit;
    let mut trace = vec![TraceRow {
        iteration: 0,
        merit: cur.merit,
        residual_norm: norm(&cur.residual),
        step: 0.0,
        backtracks: 0,
    }];
    let mut step = config.initial_step;
    let mut mu = 1e-4;
    let mut iterations = 0;
    let mut converged = false;

    let certified = |values: &[f64], residual: &[f64]| {
        let d = DecisionVector {
            streams,
            intervals,
            values: values.to_vec(),
        };
        certify(scenario, &d, norm(residual), config).passed()
    };

    loop {
        if certified(&cur.values, &cur.residual) {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        iterations += 1;

        let jac = residual_jacobian(scenario, &cur.service, &cur.values, scale)?;
        let grad = jac.tr_mul(&DVector::from_column_slice(&cur.residual)).as_slice().to_vec();
        let curv: Vec<f64> = jac.column_iter().map(|c| c.norm_squared()).collect();

        // Projected line search along `dir` from `first`; returns the accepted
        // point and the number of backtracks.
        let search = |dir: &[f64], first: f64| -> Result<(Option<(Vec<f64>, f64)>, usize)> {
            let mut len = first;
            let mut backtracks = 0;
            loop {
                let mut cand: Vec<f64> = cur.values.iter().zip(dir).map(|(v, d)| v - len * d).collect();
                project_slice(&mut cand, cap);
                let decrease: f64 = grad.iter().zip(cur.values.iter().zip(&cand)).map(|(g, (v, c))| g * (v - c)).sum();
                if decrease <= 0.0 {
                    return Ok((None, backtracks));
                }
                let frozen = merit(&forward_pass(scenario, &cur.service, &cand, scale)?.residual);
                if frozen <= cur.merit - config.armijo_c * decrease {
                    return Ok((Some((cand, len)), backtracks));
                }
                backtracks += 1;
                if backtracks > config.max_backtracks {
                    return Ok((None, backtracks));
                }
                len *= config.backtrack_factor;
            }
        };

        let mut accepted = None;
        let mut backtracks = 0;
        if let Some(dir) = levenberg_direction(&jac, &grad, &curv, mu) {
            let (hit, bt) = search(&dir, 1.0)?;
            backtracks = bt;
            if let Some((cand, len)) = hit {
                mu = if len >= 1.0 { (mu / 3.0).max(1e-12) } else { (mu * 4.0).min(1e6) };
                accepted = Some(cand);
            } else {
                mu = (mu * 10.0).min(1e6);
            }
        }
        if accepted.is_none() {
            // diagonal scaling by the Jacobian column norms; the price column is
            // far stiffer than the share columns
            let dir: Vec<f64> = grad.iter().zip(&curv).map(|(g, c)| g / c.max(1.0)).collect();
            let (hit, bt) = search(&dir, step)?;
            backtracks += bt;
            if let Some((cand, len)) = hit {
                step = if bt == 0 { (len * config.step_growth).min(config.max_step) } else { len };
                accepted = Some(cand);
            }
        }
        let Some(cand) = accepted else {
            // no descent with the current service; a fresh propagation cannot help either
            trace.push(TraceRow {
                iteration: iterations,
                merit: cur.merit,
                residual_norm: norm(&cur.residual),
                step,
                backtracks,
            });
            break;
        };

        let mut next = evaluate(scenario, cand, scale)?;
        if next.merit > cur.merit {
            // the re-propagated service undid the gain: average with the previous iterate
            let damped: Vec<f64> = cur
                .values
                .iter()
                .zip(&next.values)
                .map(|(a, b)| a + config.damping * (b - a))
                .collect();
            next = evaluate(scenario, damped, scale)?;
        }
        let change = (cur.merit - next.merit).abs();
        cur = next;
        if cur.merit < best_merit {
            best_merit = cur.merit;
            best_values = cur.values.clone();
        }
        trace.push(TraceRow {
            iteration: iterations,
            merit: cur.merit,
            residual_norm: norm(&cur.residual),
            step,
            backtracks,
        });
        if change <= config.loss_tol {
            converged = certified(&cur.values, &cur.residual);
            break;
        }
    }

    if !converged && best_merit < cur.merit {
        cur = evaluate(scenario, best_values, scale)?;
    }
    let pass = forward_pass::<f64>(scenario, &cur.service, &cur.values, scale)?;
    let decision = DecisionVector {
        streams,
        intervals,
        values: cur.values,
    };
    let residual_norm = norm(&cur.residual);
    let certificate = certify(scenario, &decision, residual_norm, config);
    let market = certificate.market;
    Ok(EquilibriumResult {
        policy: scenario.policy,
        residual_norm,
        merit: cur.merit,
        iterations,
        converged,
        certificate,
        initialization,
        trace,
        diagnostics: Diagnostics {
            pass,
            service: cur.service,
            market,
        },
        decision,
    })
}

/// Solves `policies` in order, each starting from the previous equilibrium.
pub fn warm_start_chain(scenario: &Scenario, policies: &[PolicyParams]) -> Result<Vec<EquilibriumResult>> {
    let mut out: Vec<EquilibriumResult> = Vec::with_capacity(policies.len());
    for &policy in policies {
        let s = scenario.with_policy(policy)?;
        let init = out.last().map(|r| &r.decision);
        out.push(solve_equilibrium(&s, init, &s.solver)?);
    }
    Ok(out)
}

/// Mean waiting per station, mode and interval: `(W, AW, PAW)`.
pub fn wait_table(scenario: &Scenario, pass: &ForwardPass<f64>) -> Vec<(usize, ServiceMode, usize, f64, f64, f64)> {
    let mut rows = Vec::new();
    for (s, slots) in pass.waits.iter().enumerate() {
        for mode in ServiceMode::ALL {
            if let Some(w) = &slots[service_slot(mode)] {
                for m in 0..scenario.interval_count() {
                    let arrivals = w.arrivals.arrivals_in(m);
                    rows.push((
                        s,
                        mode,
                        m,
                        w.area[m],
                        average_wait(w.area[m], arrivals),
                        perceived_wait(w.area[m], arrivals, scenario.mode_params.eta),
                    ));
                }
            }
        }
    }
    rows
}

/// Total waiting passenger-seconds over all stations and modes.
pub fn total_waiting(pass: &ForwardPass<f64>) -> f64 {
    pass.waits
        .iter()
        .flat_map(|slots| slots.iter().flatten())
        .map(|w| w.area.iter().sum::<f64>())
        .sum()
}
