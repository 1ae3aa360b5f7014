//! Scenario configuration: a single TOML file describes the plants, the
//! controller, the adaptation law, the mesh, and the run plan. This module
//! owns parsing, validation, and conversion into the typed pieces the
//! runner wires together.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::metrics::EnergyModel;
use crate::plant::{DisturbanceProfile, PlantModel};
use crate::wsan::{Flow, FrameTiming, LinkModel, NoiseSchedule};

/// Adaptation policy selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    /// Holistic: Lyapunov value plus delivery ratio.
    Hc,
    /// Reactive baseline: delivery-ratio thresholds only.
    Pn,
    /// No adaptation; the given count stays in force.
    Fixed(u32),
}

impl Algo {
    pub fn parse(s: &str) -> Result<Algo> {
        match s {
            "hc" => Ok(Algo::Hc),
            "pn" => Ok(Algo::Pn),
            other => {
                if let Some(k) = other.strip_prefix("fixed:") {
                    let k: u32 = k
                        .parse()
                        .map_err(|_| SimError::config(format!("bad fixed count in algo '{other}'")))?;
                    if k < 1 {
                        return Err(SimError::config("fixed transmission count must be >= 1"));
                    }
                    Ok(Algo::Fixed(k))
                } else {
                    Err(SimError::config(format!(
                        "unknown algo '{other}' (expected hc, pn, or fixed:<k>)"
                    )))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Algo::Hc => "hc".to_string(),
            Algo::Pn => "pn".to_string(),
            Algo::Fixed(k) => format!("fixed{k}"),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algo::Fixed(k) => write!(f, "fixed:{k}"),
            Algo::Hc => write!(f, "hc"),
            Algo::Pn => write!(f, "pn"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: ScenarioSection,
    pub timing: TimingSection,
    pub network: NetworkSection,
    #[serde(default)]
    pub energy: EnergyModel,
    #[serde(rename = "loops")]
    pub control_loops: Vec<LoopSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub duration_s: f64,
    /// Defaults for the CLI; flags override.
    #[serde(default = "default_algo")]
    pub algo: String,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default)]
    pub seed: u64,
    /// Also evaluate the Lyapunov value at the true state every period
    /// (costs one extra solve per loop per period).
    #[serde(default)]
    pub log_true_lyapunov: bool,
    #[serde(default = "default_pdr_window")]
    pub pdr_window: usize,
}

fn default_algo() -> String {
    "hc".to_string()
}
fn default_runs() -> u32 {
    1
}
fn default_pdr_window() -> usize {
    50
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    pub period_ms: u64,
    pub slot_ms: u64,
    pub sensing_ms: u64,
    pub estimation_ms: u64,
    pub compute_ms: u64,
    pub actuation_ms: u64,
    pub plant_dt_ms: u64,
}

impl TimingSection {
    pub fn case_study() -> Self {
        TimingSection {
            period_ms: 200,
            slot_ms: 10,
            sensing_ms: 60,
            estimation_ms: 10,
            compute_ms: 30,
            actuation_ms: 80,
            plant_dt_ms: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slot_ms == 0 || self.period_ms == 0 || self.plant_dt_ms == 0 {
            return Err(SimError::config("timing: all durations must be positive"));
        }
        let spans = [
            self.period_ms,
            self.sensing_ms,
            self.estimation_ms,
            self.compute_ms,
            self.actuation_ms,
        ];
        if spans.iter().any(|s| s % self.slot_ms != 0) {
            return Err(SimError::config("timing: phase durations must be multiples of slot_ms"));
        }
        let busy = self.sensing_ms + self.estimation_ms + self.compute_ms + self.actuation_ms;
        if busy > self.period_ms {
            return Err(SimError::config(format!(
                "timing: phases take {busy} ms, longer than the {} ms period",
                self.period_ms
            )));
        }
        if self.period_ms % self.plant_dt_ms != 0 {
            return Err(SimError::config("timing: period must be a multiple of plant_dt_ms"));
        }
        Ok(())
    }

    pub fn substeps_per_period(&self) -> usize {
        (self.period_ms / self.plant_dt_ms) as usize
    }

    pub fn frame_timing(&self, channel_base: u8) -> FrameTiming {
        FrameTiming {
            slots_per_period: self.period_ms / self.slot_ms,
            sensing_slots: (self.sensing_ms / self.slot_ms) as usize,
            actuation_gap_slots: (self.estimation_ms + self.compute_ms) / self.slot_ms,
            channel_base,
            period_ms: self.period_ms,
        }
    }

    pub fn frame_length_slots(&self) -> usize {
        ((self.sensing_ms + self.actuation_ms) / self.slot_ms) as usize
    }

    pub fn period_s(&self) -> f64 {
        self.period_ms as f64 / 1e3
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub num_nodes: usize,
    #[serde(default)]
    pub powered_nodes: Vec<u32>,
    #[serde(default)]
    pub channel_base: u8,
    pub default_rssi: f64,
    #[serde(default = "default_midpoint")]
    pub snr_midpoint_db: f64,
    #[serde(default = "default_steepness")]
    pub snr_steepness_db: f64,
    pub flows: Vec<Flow>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    pub noise: NoiseSpec,
}

fn default_midpoint() -> f64 {
    17.44
}
fn default_steepness() -> f64 {
    3.1615
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: u32,
    pub b: u32,
    pub rssi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// [start_s, level_dbm] steps.
    pub segments: Vec<[f64; 2]>,
    #[serde(default = "default_shared_jitter")]
    pub jitter_shared_db: f64,
    #[serde(default)]
    pub jitter_link_db: f64,
}

fn default_shared_jitter() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub id: u32,
    pub sensing_flow: u32,
    pub actuation_flow: u32,
    pub plant: PlantSpec,
    pub setpoint: SetpointSpec,
    pub mpc: MpcSpec,
    pub adapt: AdaptSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub disturbance: Option<DisturbanceSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointSpec {
    pub u_bar: f64,
    /// Equilibrium state; derived from u_bar when omitted.
    #[serde(default)]
    pub x_bar: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSpec {
    pub q_diag: Vec<f64>,
    pub r: f64,
    pub horizon: usize,
    pub beta: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub gamma: f64,
    #[serde(default)]
    pub x_min: Option<Vec<f64>>,
    #[serde(default)]
    pub x_max: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptSpec {
    pub lambda: f64,
    pub tau1: u64,
    pub tau2: u64,
    pub rho_min: f64,
    pub eta_max: u32,
    #[serde(default = "default_eta_floor")]
    pub eta_floor: u32,
    pub eta_init: u32,
}

fn default_eta_floor() -> u32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default = "default_cov")]
    pub process_noise: f64,
    #[serde(default = "default_cov")]
    pub measurement_noise: f64,
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
    /// Which input the filter assumes drove the plant: what the controller
    /// commanded, or what the actuator actually applied.
    #[serde(default = "default_estimator_input")]
    pub input: String,
}

fn default_cov() -> f64 {
    1e-4
}
fn default_sigma0() -> f64 {
    1.0
}
fn default_estimator_input() -> String {
    "commanded".to_string()
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec {
            process_noise: default_cov(),
            measurement_noise: default_cov(),
            sigma0: default_sigma0(),
            input: default_estimator_input(),
        }
    }
}

/// Which input value the estimator's prediction step consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorInput {
    Commanded,
    Applied,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    /// True initial plant state; defaults to the setpoint state.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Initial estimate; defaults to the setpoint state.
    #[serde(default)]
    pub x_hat0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub bias: Vec<f64>,
    pub start_s: f64,
    pub end_s: f64,
}

impl ScenarioSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_validated(&text)
    }

    pub fn from_str_validated(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text)
            .map_err(|e| SimError::config(format!("config parse error: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.duration_s <= 0.0 {
            return Err(SimError::config("scenario: duration_s must be positive"));
        }
        if self.scenario.pdr_window == 0 {
            return Err(SimError::config("scenario: pdr_window must be positive"));
        }
        Algo::parse(&self.scenario.algo)?;
        self.timing.validate()?;

        if self.network.num_nodes == 0 {
            return Err(SimError::config("network: need at least one node"));
        }
        let mut flow_ids = BTreeMap::new();
        for f in &self.network.flows {
            if !f.is_valid() {
                return Err(SimError::config(format!("network: flow {} route is invalid", f.id)));
            }
            if f.route.iter().any(|n| *n as usize >= self.network.num_nodes) {
                return Err(SimError::config(format!(
                    "network: flow {} references a node outside 0..{}",
                    f.id, self.network.num_nodes
                )));
            }
            if flow_ids.insert(f.id, f.kind).is_some() {
                return Err(SimError::config(format!("network: duplicate flow id {}", f.id)));
            }
        }
        if self.network.noise.segments.is_empty() {
            return Err(SimError::config("network: noise needs at least one segment"));
        }

        if self.control_loops.is_empty() {
            return Err(SimError::config("at least one control loop is required"));
        }
        let mut loop_ids = std::collections::BTreeSet::new();
        for l in &self.control_loops {
            if !loop_ids.insert(l.id) {
                return Err(SimError::config(format!("duplicate loop id {}", l.id)));
            }
            use crate::wsan::FlowKind;
            match flow_ids.get(&l.sensing_flow) {
                Some(FlowKind::Sensing) => {}
                _ => {
                    return Err(SimError::config(format!(
                        "loop {}: sensing_flow {} is not a sensing flow",
                        l.id, l.sensing_flow
                    )))
                }
            }
            match flow_ids.get(&l.actuation_flow) {
                Some(FlowKind::Actuation) => {}
                _ => {
                    return Err(SimError::config(format!(
                        "loop {}: actuation_flow {} is not an actuation flow",
                        l.id, l.actuation_flow
                    )))
                }
            }
            l.validate_shapes()?;
            if l.adapt.eta_max as usize
                > (self.timing.actuation_ms / self.timing.slot_ms) as usize
            {
                return Err(SimError::config(format!(
                    "loop {}: eta_max exceeds the actuation window capacity",
                    l.id
                )));
            }
        }
        Ok(())
    }

    pub fn algo(&self) -> Algo {
        Algo::parse(&self.scenario.algo).expect("validated")
    }

    pub fn link_model(&self) -> LinkModel {
        let mut rssi = BTreeMap::new();
        for l in &self.network.links {
            rssi.insert((l.a, l.b), l.rssi);
        }
        LinkModel {
            rssi,
            default_rssi: self.network.default_rssi,
            midpoint_db: self.network.snr_midpoint_db,
            steepness_db: self.network.snr_steepness_db,
        }
    }

    pub fn noise_schedule(&self) -> NoiseSchedule {
        NoiseSchedule {
            segments: self.network.noise.segments.iter().map(|s| (s[0], s[1])).collect(),
            jitter_shared_db: self.network.noise.jitter_shared_db,
            jitter_link_db: self.network.noise.jitter_link_db,
        }
    }

    pub fn periods(&self) -> u64 {
        (self.scenario.duration_s / self.timing.period_s()).round() as u64
    }
}

impl LoopSection {
    fn validate_shapes(&self) -> Result<()> {
        let n = self.plant.a.len();
        if n == 0 || self.plant.a.iter().any(|row| row.len() != n) {
            return Err(SimError::config(format!("loop {}: plant.a must be square", self.id)));
        }
        if self.plant.b.len() != n || self.plant.c.len() != n {
            return Err(SimError::config(format!(
                "loop {}: plant.b and plant.c must have {n} entries",
                self.id
            )));
        }
        if self.mpc.q_diag.len() != n {
            return Err(SimError::config(format!("loop {}: mpc.q_diag must have {n} entries", self.id)));
        }
        if let Some(xb) = &self.setpoint.x_bar {
            if xb.len() != n {
                return Err(SimError::config(format!("loop {}: x_bar must have {n} entries", self.id)));
            }
        }
        for (name, v) in [("x0", &self.init.x0), ("x_hat0", &self.init.x_hat0)] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(SimError::config(format!(
                        "loop {}: init.{name} must have {n} entries",
                        self.id
                    )));
                }
            }
        }
        if let Some(d) = &self.disturbance {
            if d.end_s < d.start_s {
                return Err(SimError::config(format!(
                    "loop {}: disturbance interval is reversed",
                    self.id
                )));
            }
        }
        if !(self.mpc.u_min < self.mpc.u_max) {
            return Err(SimError::config(format!("loop {}: empty input box", self.id)));
        }
        Ok(())
    }

    /// Control-rate plant model (the per-period map).
    pub fn plant_model(&self, period_s: f64) -> Result<PlantModel> {
        let n = self.plant.a.len();
        let a = DMatrix::from_fn(n, n, |i, j| self.plant.a[i][j]);
        let b = DMatrix::from_fn(n, 1, |i, _| self.plant.b[i]);
        let c = DMatrix::from_fn(1, n, |_, j| self.plant.c[j]);
        PlantModel::new(a, b, c, period_s)
    }

    pub fn estimator_input(&self) -> Result<EstimatorInput> {
        match self.estimator.input.as_str() {
            "commanded" => Ok(EstimatorInput::Commanded),
            "applied" => Ok(EstimatorInput::Applied),
            other => Err(SimError::config(format!(
                "loop {}: estimator.input '{other}' must be 'commanded' or 'applied'",
                self.id
            ))),
        }
    }

    pub fn disturbance_profile(&self) -> DisturbanceProfile {
        match &self.disturbance {
            None => DisturbanceProfile::none(),
            Some(d) => DisturbanceProfile {
                bias: d.bias.clone(),
                start_s: d.start_s,
                end_s: d.end_s,
            },
        }
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.mpc.q_diag.clone()))
    }
}
