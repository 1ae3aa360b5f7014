//! Scenario runner.
//!
//! Wires plant, network, estimator, controller, buffer, and adaptation into
//! the per-period pipeline, executes seeded Monte-Carlo batches (runs in
//! parallel, each fully deterministic), and emits CSV logs, SVG plots, and
//! TOML summaries.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actuation::ActuationBuffer;
use crate::adaptation::{hc_step, pn_step, AdaptConfig, AdaptState};
use crate::config::{Algo, EstimatorInput, ScenarioSpec};
use crate::error::{Result, SimError};
use crate::estimator::EstimatorState;
use crate::linalg::zoh_substep;
use crate::metrics::{
    battery_life, csv_header, csv_row, mae, EnergyModel, MetricsLog, PeriodRecord,
};
use crate::mpc::{MpcConfig, MpcProblem};
use crate::plant::{DisturbanceProfile, PlantModel, PlantState, Setpoint};
use crate::rng::CounterRng;
use crate::svgplot::{self, Panel, Series};
use crate::wsan::{
    build_superframe, run_phase, DeliveryReport, Flow, FlowKind, FrameTiming, LinkModel,
    NetContext, NetworkState, NoiseSchedule, PdrWindow, PeriodInputs, Superframe,
};

/// One control loop, fully built: models at both rates, the condensed
/// horizon problem, and the adaptation tuning.
pub struct LoopRuntime {
    pub id: u32,
    pub sensing_flow_idx: usize,
    pub actuation_flow_idx: usize,
    /// Control-rate model used by estimator and controller.
    pub model_ctrl: PlantModel,
    /// Sub-rate model integrating the plant between control instants.
    pub model_sub: PlantModel,
    pub setpoint: Setpoint,
    pub mpc: MpcProblem,
    pub adapt_cfg: AdaptConfig,
    pub est_input: EstimatorInput,
    pub disturbance: DisturbanceProfile,
    pub x0: DVector<f64>,
    pub x_hat0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub w_cov: DMatrix<f64>,
    pub v_cov: DMatrix<f64>,
    pub eta_init: u32,
}

/// A validated, fully built scenario, shared read-only across runs.
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub flows: Vec<Flow>,
    pub frame: Superframe,
    pub timing: FrameTiming,
    pub link: LinkModel,
    pub noise: NoiseSchedule,
    pub energy: EnergyModel,
    pub loops: Vec<LoopRuntime>,
    pub periods: u64,
    pub substeps: usize,
}

impl Scenario {
    pub fn build(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let flows = spec.network.flows.clone();
        let eta_max_global =
            spec.control_loops.iter().map(|l| l.adapt.eta_max).max().unwrap_or(1);
        let frame = build_superframe(
            &flows,
            eta_max_global,
            spec.timing.frame_length_slots(),
            (spec.timing.sensing_ms / spec.timing.slot_ms) as usize,
        )?;
        let timing = spec.timing.frame_timing(spec.network.channel_base);
        let link = spec.link_model();
        let noise = spec.noise_schedule();
        let energy = spec.energy.clone();
        let substeps = spec.timing.substeps_per_period();
        let period_s = spec.timing.period_s();

        let mut loops = Vec::new();
        let mut shared_dim: Option<usize> = None;
        for l in &spec.control_loops {
            let model_ctrl = l.plant_model(period_s)?;
            let n = model_ctrl.state_dim();
            match shared_dim {
                None => shared_dim = Some(n),
                Some(d) if d == n => {}
                Some(d) => {
                    return Err(SimError::config(format!(
                        "loop {}: state dimension {n} differs from {d}; the run log format \
                         needs one shared dimension",
                        l.id
                    )))
                }
            }
            let u_bar = DVector::from_vec(vec![l.setpoint.u_bar]);
            let setpoint = match &l.setpoint.x_bar {
                Some(xb) => Setpoint { x_bar: DVector::from_vec(xb.clone()), u_bar: u_bar.clone() },
                None => model_ctrl.derive_setpoint(u_bar.clone())?,
            };
            let (a_sub, b_sub) = zoh_substep(&model_ctrl.a, &model_ctrl.b, substeps as u32)?;
            let model_sub = PlantModel {
                a: a_sub,
                b: b_sub,
                c: model_ctrl.c.clone(),
                dt: spec.timing.plant_dt_ms as f64 / 1e3,
                blowup_threshold: model_ctrl.blowup_threshold,
            };

            let shift = |bound: &Option<Vec<f64>>| {
                bound
                    .as_ref()
                    .map(|v| DVector::from_vec(v.clone()) - &setpoint.x_bar)
            };
            let cfg = MpcConfig {
                q: l.q_matrix(),
                r: DMatrix::from_element(1, 1, l.mpc.r),
                horizon: l.mpc.horizon,
                beta: l.mpc.beta,
                u_lo: DVector::from_vec(vec![l.mpc.u_min - l.setpoint.u_bar]),
                u_hi: DVector::from_vec(vec![l.mpc.u_max - l.setpoint.u_bar]),
                x_lo: shift(&l.mpc.x_min),
                x_hi: shift(&l.mpc.x_max),
                gamma: l.mpc.gamma,
            };
            let mpc = MpcProblem::new(model_ctrl.a.clone(), model_ctrl.b.clone(), cfg)?;

            let adapt_cfg = AdaptConfig {
                lambda: l.adapt.lambda,
                tau1: l.adapt.tau1,
                tau2: l.adapt.tau2,
                gamma: l.mpc.gamma,
                rho_min: l.adapt.rho_min,
                eta_max: l.adapt.eta_max,
                eta_floor: l.adapt.eta_floor,
                consts: mpc.consts.clone(),
            };
            adapt_cfg.validate()?;
            if l.adapt.eta_init < 1 || l.adapt.eta_init > l.adapt.eta_max {
                return Err(SimError::config(format!(
                    "loop {}: eta_init must lie in 1..=eta_max",
                    l.id
                )));
            }

            let vec_or = |v: &Option<Vec<f64>>| match v {
                Some(v) => DVector::from_vec(v.clone()),
                None => setpoint.x_bar.clone(),
            };
            let x0 = vec_or(&l.init.x0);
            let x_hat0 = vec_or(&l.init.x_hat0);
            loops.push(LoopRuntime {
                id: l.id,
                sensing_flow_idx: flows.iter().position(|f| f.id == l.sensing_flow).unwrap(),
                actuation_flow_idx: flows.iter().position(|f| f.id == l.actuation_flow).unwrap(),
                model_ctrl,
                model_sub,
                setpoint,
                mpc,
                adapt_cfg,
                est_input: l.estimator_input()?,
                disturbance: l.disturbance_profile(),
                x0,
                x_hat0,
                sigma0: DMatrix::identity(n, n) * l.estimator.sigma0,
                w_cov: DMatrix::identity(n, n) * l.estimator.process_noise,
                v_cov: DMatrix::identity(1, 1) * l.estimator.measurement_noise,
                eta_init: l.adapt.eta_init,
            });
        }

        let periods = spec.periods();
        if periods == 0 {
            return Err(SimError::config("scenario duration is shorter than one control period"));
        }
        Ok(Scenario {
            spec,
            flows,
            frame,
            timing,
            link,
            noise,
            energy,
            loops,
            periods,
            substeps,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Scenario::build(ScenarioSpec::from_path(path)?)
    }

    fn check_algo(&self, algo: Algo) -> Result<()> {
        if let Algo::Fixed(k) = algo {
            for l in &self.loops {
                if k > l.adapt_cfg.eta_max {
                    return Err(SimError::config(format!(
                        "fixed:{k} exceeds loop {}'s eta_max {}",
                        l.id, l.adapt_cfg.eta_max
                    )));
                }
            }
        }
        Ok(())
    }

    /// Execute one fully deterministic run.
    pub fn run_single(&self, algo: Algo, seed: u64) -> Result<MetricsLog> {
        self.check_algo(algo)?;
        let rng = CounterRng::new(seed);
        let num_flows = self.flows.len();
        let num_nodes = self.spec.network.num_nodes;
        let log_true = self.spec.scenario.log_true_lyapunov;

        // Per-flow initial transmission counts: the owning loop's initial
        // value (or the fixed count) on actuation flows, single attempts on
        // sensing flows.
        let mut net = NetworkState::new(&self.flows, num_nodes, 1);
        let mut owned_by: Vec<Option<usize>> = vec![None; num_flows];
        for (li, l) in self.loops.iter().enumerate() {
            owned_by[l.actuation_flow_idx] = Some(li);
            let eta0 = match algo {
                Algo::Fixed(k) => k,
                _ => l.eta_init,
            };
            for node in 0..num_nodes {
                net.apply_piggyback(l.actuation_flow_idx, node as u32, eta0);
            }
        }
        net.frame_boundary();

        struct LoopState {
            plant: PlantState,
            est: EstimatorState,
            buffer: ActuationBuffer,
            adapt: AdaptState,
            pdr: PdrWindow,
            inbox: Option<DVector<f64>>,
            /// Input convention values for the estimator: previous period and
            /// the one before it.
            u_prev: f64,
            u_prev2: f64,
            eta_target: u32,
            frozen: bool,
            last_x_hat: DVector<f64>,
            last_v: f64,
            last_u: f64,
            /// Sequence computed this period, applied after the actuation
            /// window resolves.
            buffer_candidate: Option<(Vec<DVector<f64>>, f64)>,
        }

        let mut states: Vec<LoopState> = self
            .loops
            .iter()
            .map(|l| {
                let eta0 = match algo {
                    Algo::Fixed(k) => k,
                    _ => l.eta_init,
                };
                Ok(LoopState {
                    plant: PlantState::new(l.x0.clone()),
                    est: EstimatorState::new(
                        l.x_hat0.clone(),
                        l.sigma0.clone(),
                        l.w_cov.clone(),
                        l.v_cov.clone(),
                    )?,
                    buffer: ActuationBuffer::new(l.mpc.horizon(), l.setpoint.u_bar.clone()),
                    adapt: AdaptState::new(eta0),
                    pdr: PdrWindow::new(self.spec.scenario.pdr_window),
                    inbox: None,
                    u_prev: l.setpoint.u_bar[0],
                    u_prev2: l.setpoint.u_bar[0],
                    eta_target: eta0,
                    frozen: false,
                    last_x_hat: l.x_hat0.clone(),
                    last_v: 0.0,
                    last_u: l.setpoint.u_bar[0],
                    buffer_candidate: None,
                })
            })
            .collect::<Result<_>>()?;

        let mut log = MetricsLog {
            records: Vec::with_capacity((self.periods as usize) * self.loops.len()),
            node_tx: vec![0; num_nodes],
            node_rx: vec![0; num_nodes],
            duration_s: self.periods as f64 * self.spec.timing.period_s(),
            unstable: false,
        };

        let ctx = NetContext {
            flows: &self.flows,
            frame: &self.frame,
            timing: &self.timing,
            link: &self.link,
            noise: &self.noise,
        };

        for t in 0..self.periods {
            let t_sec = t as f64 * self.spec.timing.period_s();
            let mut inputs = PeriodInputs::all_packets(num_flows);
            for (fi, f) in self.flows.iter().enumerate() {
                if f.kind == FlowKind::Actuation && owned_by[fi].is_none() {
                    inputs.has_packet[fi] = false;
                }
            }
            let mut report = DeliveryReport::new(num_flows, num_nodes);

            // (1) Sensing window: sample and ship measurements.
            let samples: Vec<DVector<f64>> = self
                .loops
                .iter()
                .zip(&states)
                .map(|(l, s)| l.model_sub.measure(&s.plant, &l.disturbance, t_sec))
                .collect();
            run_phase(&ctx, &mut net, FlowKind::Sensing, &inputs, t, &rng, &mut report);

            let mut row_parts: Vec<(DVector<f64>, DVector<f64>, f64, f64, f64, u32, Option<f64>)> =
                Vec::with_capacity(self.loops.len());

            for (li, l) in self.loops.iter().enumerate() {
                let s = &mut states[li];
                let x_start = s.plant.x.clone();
                let delivered_sense = report.flow_delivered[l.sensing_flow_idx];
                let prev_inbox = s.inbox.take();
                s.inbox = delivered_sense.then(|| samples[li].clone());

                if s.frozen {
                    let v_true = log_true.then(|| {
                        l.mpc.solve(&(&x_start - &l.setpoint.x_bar)).map(|sol| sol.v)
                    });
                    let v_true = match v_true {
                        Some(Ok(v)) => Some(v),
                        _ => None,
                    };
                    row_parts.push((
                        x_start,
                        s.last_x_hat.clone(),
                        s.last_u,
                        s.last_v,
                        s.pdr.ratio(),
                        s.eta_target,
                        v_true,
                    ));
                    continue;
                }

                // (2) Estimator: consume the previous period's measurement.
                // The running estimate refers to the state one period back;
                // the first sample corrects the initial estimate in place.
                if t == 1 {
                    if let Some(y) = prev_inbox.as_ref() {
                        s.est = s.est.correct(&l.model_ctrl, y)?;
                    }
                } else if t >= 2 {
                    let u_est = DVector::from_vec(vec![s.u_prev2]);
                    s.est = s.est.advance(&l.model_ctrl, &u_est, prev_inbox.as_ref())?;
                }
                // The controller plans from the predicted current state.
                let x_hat_now = if t == 0 {
                    s.est.x_hat.clone()
                } else {
                    &l.model_ctrl.a * &s.est.x_hat
                        + &l.model_ctrl.b * DVector::from_vec(vec![s.u_prev])
                };

                // (3) Horizon solve at the estimate.
                let sol = l.mpc.solve(&(&x_hat_now - &l.setpoint.x_bar))?;
                let v = sol.v;
                let u_seq_abs: Vec<DVector<f64>> =
                    sol.u_seq.iter().map(|u| u + &l.setpoint.u_bar).collect();
                let u_cmd = u_seq_abs[0][0];

                // (4) Adaptation.
                let rho = s.pdr.ratio();
                match algo {
                    Algo::Hc => {
                        let (next, cmd) = hc_step(&s.adapt, &l.adapt_cfg, v, rho, t);
                        s.adapt = next;
                        if let Some(eta) = cmd {
                            s.eta_target = eta;
                        }
                    }
                    Algo::Pn => {
                        s.eta_target = pn_step(s.eta_target, rho, l.adapt_cfg.eta_max);
                    }
                    Algo::Fixed(k) => {
                        s.eta_target = k;
                    }
                }
                inputs.piggyback[l.actuation_flow_idx] = Some(s.eta_target);

                let v_true = if log_true {
                    Some(l.mpc.solve(&(&x_start - &l.setpoint.x_bar))?.v)
                } else {
                    None
                };
                row_parts.push((x_start, x_hat_now.clone(), 0.0, v, rho, s.eta_target, v_true));
                s.last_x_hat = x_hat_now;
                s.last_v = v;
                // Stash the command sequence for the post-delivery steps.
                s.buffer_candidate = Some((u_seq_abs, u_cmd));
            }

            // (5) Actuation window.
            run_phase(&ctx, &mut net, FlowKind::Actuation, &inputs, t, &rng, &mut report);

            // (6)-(7) Delivery bookkeeping, then the plant moves.
            for (li, l) in self.loops.iter().enumerate() {
                let s = &mut states[li];
                let delivered_act = report.flow_delivered[l.actuation_flow_idx];
                if !s.frozen {
                    let (u_seq_abs, u_cmd) = s.buffer_candidate.take().expect("set above");
                    if delivered_act {
                        s.buffer.push(u_seq_abs, t)?;
                    }
                    let u_applied = s.buffer.pop(t).clone();
                    for _ in 0..self.substeps {
                        s.plant = l.model_sub.step(&s.plant, &u_applied)?;
                    }
                    if s.plant.diverged {
                        log.unstable = true;
                        s.frozen = true;
                    }
                    let u_conv = match l.est_input {
                        EstimatorInput::Commanded => u_cmd,
                        EstimatorInput::Applied => u_applied[0],
                    };
                    s.u_prev2 = s.u_prev;
                    s.u_prev = u_conv;
                    s.last_u = u_applied[0];
                    row_parts[li].2 = u_applied[0];
                }
                s.pdr.push(delivered_act);
            }
            net.frame_boundary();

            // Record rows in loop order.
            let shared_noise =
                self.noise.shared_level(&rng, t, self.timing.period_seconds(t));
            for (li, l) in self.loops.iter().enumerate() {
                let (x, x_hat, u, v, rho, eta, v_true) = row_parts[li].clone();
                log.records.push(PeriodRecord {
                    t_sec,
                    loop_id: l.id,
                    x,
                    x_hat,
                    u,
                    v,
                    rho,
                    eta_scheduled: eta,
                    delivered_sense: report.flow_delivered[l.sensing_flow_idx],
                    delivered_act: report.flow_delivered[l.actuation_flow_idx],
                    actual_tx: report.total_attempts(l.actuation_flow_idx),
                    noise_dbm: shared_noise,
                    v_true,
                });
            }
            for node in 0..num_nodes {
                log.node_tx[node] += report.node_tx[node];
                log.node_rx[node] += report.node_rx[node];
            }
        }
        Ok(log)
    }
}

/// Per-loop aggregates of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoopSummary {
    pub loop_id: u32,
    pub mae: f64,
    pub mean_eta: f64,
    pub mean_actual_tx: f64,
}

/// One run's outcome line in the batch summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub idx: u32,
    pub seed: u64,
    pub unstable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
    pub system_lifetime_days: f64,
    #[serde(rename = "loop")]
    pub loops: Vec<LoopSummary>,
}

/// Aggregates over the stable runs of a batch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoopAggregate {
    pub loop_id: u32,
    pub mae_mean: f64,
    pub mean_eta: f64,
    pub mean_actual_tx: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scenario: String,
    pub algo: String,
    pub runs: u32,
    pub base_seed: u64,
    pub duration_s: f64,
    pub unstable_runs: u32,
    pub failed_runs: u32,
    pub system_lifetime_days_mean: f64,
    pub aggregate: Vec<LoopAggregate>,
    #[serde(rename = "run")]
    pub run_summaries: Vec<RunSummary>,
}

/// Everything a batch produced, summaries plus raw logs (logs are None for
/// failed runs).
pub struct BatchOutcome {
    pub algo: Algo,
    pub summary: BatchSummary,
    pub logs: Vec<Option<MetricsLog>>,
}

pub fn summarize_run(scenario: &Scenario, idx: u32, seed: u64, log: &MetricsLog) -> Result<RunSummary> {
    let battery = battery_life(
        &log.node_tx,
        &log.node_rx,
        log.duration_s,
        &scenario.energy,
        &scenario.spec.network.powered_nodes,
    )?;
    let mut loops = Vec::new();
    for l in &scenario.loops {
        let traj: Vec<DVector<f64>> = log.records_for(l.id).map(|r| r.x.clone()).collect();
        loops.push(LoopSummary {
            loop_id: l.id,
            mae: mae(&traj, &l.setpoint.x_bar)?,
            mean_eta: log.mean_eta(l.id),
            mean_actual_tx: log.mean_actual_tx(l.id),
        });
    }
    Ok(RunSummary {
        idx,
        seed,
        unstable: log.unstable,
        failed: None,
        system_lifetime_days: battery.system_days,
        loops,
    })
}

fn aggregate(scenario: &Scenario, algo: Algo, base_seed: u64, runs: u32, outcomes: &[(RunSummary, Option<MetricsLog>)]) -> BatchSummary {
    let stable: Vec<&RunSummary> = outcomes
        .iter()
        .filter(|(s, _)| !s.unstable && s.failed.is_none())
        .map(|(s, _)| s)
        .collect();
    let mut aggregates = Vec::new();
    for l in &scenario.loops {
        let pick = |f: &dyn Fn(&LoopSummary) -> f64| -> f64 {
            let vals: Vec<f64> = stable
                .iter()
                .flat_map(|s| s.loops.iter().filter(|ls| ls.loop_id == l.id).map(|ls| f(ls)))
                .collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        };
        aggregates.push(LoopAggregate {
            loop_id: l.id,
            mae_mean: pick(&|s| s.mae),
            mean_eta: pick(&|s| s.mean_eta),
            mean_actual_tx: pick(&|s| s.mean_actual_tx),
        });
    }
    let lifetime_mean = if stable.is_empty() {
        f64::NAN
    } else {
        stable.iter().map(|s| s.system_lifetime_days).sum::<f64>() / stable.len() as f64
    };
    BatchSummary {
        scenario: scenario.spec.scenario.name.clone(),
        algo: algo.label(),
        runs,
        base_seed,
        duration_s: scenario.periods as f64 * scenario.spec.timing.period_s(),
        unstable_runs: outcomes.iter().filter(|(s, _)| s.unstable).count() as u32,
        failed_runs: outcomes.iter().filter(|(s, _)| s.failed.is_some()).count() as u32,
        system_lifetime_days_mean: lifetime_mean,
        aggregate: aggregates,
        run_summaries: outcomes.iter().map(|(s, _)| s.clone()).collect(),
    }
}

/// Run `runs` seeded simulations (seeds base_seed..base_seed+runs) in
/// parallel. A failing run is recorded and the batch continues.
pub fn run_batch(scenario: &Scenario, algo: Algo, base_seed: u64, runs: u32) -> Result<BatchOutcome> {
    scenario.check_algo(algo)?;
    if runs == 0 {
        return Err(SimError::config("runs must be at least 1"));
    }
    let results: Vec<(RunSummary, Option<MetricsLog>)> = (0..runs)
        .into_par_iter()
        .map(|idx| {
            let seed = base_seed + idx as u64;
            match scenario
                .run_single(algo, seed)
                .and_then(|log| summarize_run(scenario, idx, seed, &log).map(|s| (s, log)))
            {
                Ok((summary, log)) => (summary, Some(log)),
                Err(e) => (
                    RunSummary {
                        idx,
                        seed,
                        unstable: false,
                        failed: Some(e.to_string()),
                        system_lifetime_days: f64::NAN,
                        loops: Vec::new(),
                    },
                    None,
                ),
            }
        })
        .collect();
    let summary = aggregate(scenario, algo, base_seed, runs, &results);
    Ok(BatchOutcome {
        algo,
        summary,
        logs: results.into_iter().map(|(_, l)| l).collect(),
    })
}

/// Run the same seeds under several policies so differences are down to the
/// policy alone.
pub fn sweep(
    scenario: &Scenario,
    algos: &[Algo],
    base_seed: u64,
    runs: u32,
) -> Result<Vec<BatchOutcome>> {
    algos.iter().map(|a| run_batch(scenario, *a, base_seed, runs)).collect()
}

// ---------------------------------------------------------------------------
// Artifact emission and the report/rebuild path.

pub fn write_batch_artifacts(
    scenario: &Scenario,
    outcome: &BatchOutcome,
    out_dir: &Path,
) -> Result<()> {
    let dir = out_dir.join(outcome.algo.label());
    std::fs::create_dir_all(&dir)?;
    for (i, log) in outcome.logs.iter().enumerate() {
        if let Some(log) = log {
            write_run_csv(scenario, &dir, i as u32, log)?;
            write_nodes_csv(&dir, i as u32, log)?;
            write_run_svg(scenario, &dir, i as u32, log)?;
        }
    }
    let toml_text = toml::to_string_pretty(&outcome.summary)
        .map_err(|e| SimError::config(format!("summary serialization failed: {e}")))?;
    std::fs::write(dir.join("summary.toml"), toml_text)?;
    Ok(())
}

fn write_run_csv(scenario: &Scenario, dir: &Path, idx: u32, log: &MetricsLog) -> Result<()> {
    let n = scenario.loops[0].model_ctrl.state_dim();
    let mut text = String::with_capacity(log.records.len() * 160 + 128);
    text.push_str(&csv_header(n));
    text.push('\n');
    for r in &log.records {
        text.push_str(&csv_row(r));
        text.push('\n');
    }
    std::fs::write(dir.join(format!("run_{idx}.csv")), text)?;
    Ok(())
}

fn write_nodes_csv(dir: &Path, idx: u32, log: &MetricsLog) -> Result<()> {
    let mut text = String::from("node,tx_slots,rx_slots\n");
    for (node, (tx, rx)) in log.node_tx.iter().zip(&log.node_rx).enumerate() {
        text.push_str(&format!("{node},{tx},{rx}\n"));
    }
    std::fs::write(dir.join(format!("nodes_{idx}.csv")), text)?;
    Ok(())
}

fn write_run_svg(scenario: &Scenario, dir: &Path, idx: u32, log: &MetricsLog) -> Result<()> {
    for l in &scenario.loops {
        let recs: Vec<&PeriodRecord> = log.records_for(l.id).collect();
        if recs.is_empty() {
            continue;
        }
        let n = l.model_ctrl.state_dim();
        let states_panel = Panel {
            title: format!("loop {}: plant state", l.id),
            series: (0..n)
                .map(|i| Series {
                    label: format!("x{i}"),
                    points: recs.iter().map(|r| (r.t_sec, r.x[i])).collect(),
                    step: false,
                })
                .collect(),
            hlines: vec![],
        };
        let upper = l.mpc.safety_threshold();
        let lower = l.adapt_cfg.lambda * upper;
        let v_panel = Panel {
            title: format!("loop {}: certificate value", l.id),
            series: vec![Series {
                label: "V".to_string(),
                points: recs.iter().map(|r| (r.t_sec, r.v)).collect(),
                step: false,
            }],
            hlines: vec![
                (upper, "raise threshold".to_string()),
                (lower, "lower threshold".to_string()),
            ],
        };
        let eta_panel = Panel {
            title: format!("loop {}: scheduled transmissions", l.id),
            series: vec![Series {
                label: "eta".to_string(),
                points: recs.iter().map(|r| (r.t_sec, r.eta_scheduled as f64)).collect(),
                step: true,
            }],
            hlines: vec![],
        };
        let rho_panel = Panel {
            title: format!("loop {}: delivery ratio", l.id),
            series: vec![Series {
                label: "rho".to_string(),
                points: recs.iter().map(|r| (r.t_sec, r.rho)).collect(),
                step: false,
            }],
            hlines: vec![],
        };
        let noise_panel = Panel {
            title: "ambient noise (dBm)".to_string(),
            series: vec![Series {
                label: "noise".to_string(),
                points: recs.iter().map(|r| (r.t_sec, r.noise_dbm)).collect(),
                step: false,
            }],
            hlines: vec![],
        };
        let svg = svgplot::render(&[states_panel, v_panel, eta_panel, rho_panel, noise_panel]);
        std::fs::write(dir.join(format!("plot_{idx}_loop{}.svg", l.id)), svg)?;
    }
    Ok(())
}

/// Rebuild a batch summary from the CSV artifacts in a directory.
pub fn rebuild_summary(scenario: &Scenario, dir: &Path) -> Result<BatchSummary> {
    let n = scenario.loops[0].model_ctrl.state_dim();
    let mut idxs: Vec<u32> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().to_string();
        if let Some(rest) = name.strip_prefix("run_").and_then(|r| r.strip_suffix(".csv")) {
            if let Ok(i) = rest.parse::<u32>() {
                idxs.push(i);
            }
        }
    }
    idxs.sort_unstable();
    if idxs.is_empty() {
        return Err(SimError::config(format!("no run CSVs found in {}", dir.display())));
    }

    let mut outcomes: Vec<(RunSummary, Option<MetricsLog>)> = Vec::new();
    for idx in &idxs {
        let text = std::fs::read_to_string(dir.join(format!("run_{idx}.csv")))?;
        let mut per_loop: std::collections::BTreeMap<u32, (Vec<DVector<f64>>, Vec<u32>, Vec<u32>)> =
            std::collections::BTreeMap::new();
        let mut unstable = false;
        let mut periods = 0u64;
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 2 + 2 * n + 8 {
                return Err(SimError::config(format!(
                    "run_{idx}.csv: expected {} columns, found {}",
                    2 + 2 * n + 8,
                    cols.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| SimError::config(format!("run_{idx}.csv: bad number '{s}'")))
            };
            let loop_id: u32 = cols[1]
                .parse()
                .map_err(|_| SimError::config(format!("run_{idx}.csv: bad loop id '{}'", cols[1])))?;
            let x = DVector::from_iterator(
                n,
                cols[2..2 + n].iter().map(|s| parse(s).unwrap_or(f64::NAN)),
            );
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimError::config(format!("run_{idx}.csv: non-finite state entry")));
            }
            let blowup = scenario.loops[0].model_ctrl.blowup_threshold;
            if x.amax() > blowup {
                unstable = true;
            }
            let eta: u32 = parse(cols[2 + 2 * n + 3])? as u32;
            let actual: u32 = parse(cols[2 + 2 * n + 6])? as u32;
            let entry = per_loop.entry(loop_id).or_default();
            entry.0.push(x);
            entry.1.push(eta);
            entry.2.push(actual);
            if loop_id == scenario.loops[0].id {
                periods += 1;
            }
        }

        let nodes_text = std::fs::read_to_string(dir.join(format!("nodes_{idx}.csv")))?;
        let mut node_tx = Vec::new();
        let mut node_rx = Vec::new();
        for line in nodes_text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() == 3 {
                node_tx.push(cols[1].parse::<u64>().unwrap_or(0));
                node_rx.push(cols[2].parse::<u64>().unwrap_or(0));
            }
        }
        let duration_s = periods as f64 * scenario.spec.timing.period_s();
        let battery = battery_life(
            &node_tx,
            &node_rx,
            duration_s,
            &scenario.energy,
            &scenario.spec.network.powered_nodes,
        )?;

        let mut loops = Vec::new();
        for l in &scenario.loops {
            let (traj, etas, actuals) = per_loop
                .get(&l.id)
                .ok_or_else(|| SimError::config(format!("run_{idx}.csv: loop {} missing", l.id)))?;
            loops.push(LoopSummary {
                loop_id: l.id,
                mae: mae(traj, &l.setpoint.x_bar)?,
                mean_eta: etas.iter().map(|e| *e as f64).sum::<f64>() / etas.len() as f64,
                mean_actual_tx: actuals.iter().map(|a| *a as f64).sum::<f64>()
                    / actuals.len() as f64,
            });
        }
        outcomes.push((
            RunSummary {
                idx: *idx,
                seed: 0,
                unstable,
                failed: None,
                system_lifetime_days: battery.system_days,
                loops,
            },
            None,
        ));
    }

    let algo = scenario.algo_label_of_dir(dir);
    let mut summary = aggregate(scenario, Algo::Hc, 0, idxs.len() as u32, &outcomes);
    summary.algo = algo;
    Ok(summary)
}

impl Scenario {
    fn algo_label_of_dir(&self, dir: &Path) -> String {
        dir.file_name()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "unknown".to_string())
    }
}
