//! JSON scenario configuration.
//!
//! ```json
//! { "scenario": "pw_quantum", "parameters": { "d_s": 2, "d": 8, "dt": 0.5 } }
//! ```
//!
//! Unknown keys are rejected at both levels. Every tolerance must be
//! positive; `--tol-scale` multiplies all of them.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use timeless_core::classical_liouville::{HamiltonianField, LibrarySystem};
use timeless_core::generalized_constraints::GeneratorId;

pub const SCENARIOS: [(&str, &str); 5] = [
    (
        "pw_quantum",
        "cyclic clock history state, conditional dynamics, von Neumann residual",
    ),
    (
        "classical_liouville",
        "phase-space density transport and clock-conditioned joint densities",
    ),
    (
        "extended",
        "extended phase space flow with the clock as a coordinate",
    ),
    (
        "hj_correlation",
        "Hamilton-Jacobi times of a mirrored pair of subsystems",
    ),
    (
        "constraints",
        "states annihilated by total momentum or angular momentum",
    ),
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    #[serde(default = "empty_object")]
    parameters: serde_json::Value,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "scenario", content = "parameters", rename_all = "snake_case")]
pub enum Scenario {
    PwQuantum(PwParams),
    ClassicalLiouville(ClassicalParams),
    Extended(ExtendedParams),
    HjCorrelation(HjParams),
    Constraints(ConstraintParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub output_dir: Option<PathBuf>,
    /// Directory of the config file, for relative paths inside it.
    pub base_dir: Option<PathBuf>,
}

fn default_seed() -> u64 {
    0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PwParams {
    pub d_s: usize,
    pub d: usize,
    pub dt: f64,
    /// System levels as multiples of the clock frequency; defaults to `0..d_s`.
    #[serde(default)]
    pub levels: Option<Vec<i64>>,
    /// Initial system state as `[re, im]` pairs; defaults to the uniform superposition.
    #[serde(default)]
    pub phi0: Option<Vec<[f64; 2]>>,
    /// Number of clocks in the `(d·2^i, dt/2^i)` refinement sequence.
    #[serde(default = "default_refinements")]
    pub refinements: usize,
    /// Gap of an incommensurate qubit used for the degradation sweep.
    #[serde(default)]
    pub incommensurate_gap: Option<f64>,
    /// Clock sizes `d·2^i` of the degradation sweep.
    #[serde(default = "default_degradation_steps")]
    pub degradation_steps: usize,
    #[serde(default = "default_entropy_bits")]
    pub min_reduced_entropy_bits: f64,
    /// Extra seeded random initial states checked for stationarity.
    #[serde(default = "default_random_states")]
    pub random_states: usize,
    #[serde(default = "default_pw_tol")]
    pub tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_refinements() -> usize {
    3
}
fn default_degradation_steps() -> usize {
    4
}
fn default_entropy_bits() -> f64 {
    0.5
}
fn default_random_states() -> usize {
    4
}
fn default_pw_tol() -> f64 {
    1e-10
}

impl PwParams {
    pub fn levels(&self) -> Vec<i64> {
        self.levels
            .clone()
            .unwrap_or_else(|| (0..self.d_s as i64).collect())
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.d_s >= 1, "d_s must be at least 1");
        ensure!(self.d >= 2, "d must be at least 2, got {}", self.d);
        positive("dt", self.dt)?;
        positive("tol", self.tol)?;
        ensure!(
            self.levels().len() == self.d_s,
            "levels must have d_s = {} entries",
            self.d_s
        );
        if let Some(phi) = &self.phi0 {
            ensure!(
                phi.len() == self.d_s,
                "phi0 must have d_s = {} entries",
                self.d_s
            );
        }
        ensure!(self.refinements >= 1, "refinements must be at least 1");
        if let Some(g) = self.incommensurate_gap {
            positive("incommensurate_gap", g)?;
            ensure!(
                self.degradation_steps >= 2,
                "degradation_steps must be at least 2"
            );
        }
        Ok(())
    }

    fn scale(&mut self, x: f64) {
        self.tol *= x;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalParams {
    #[serde(default = "default_harmonic")]
    pub system: String,
    #[serde(default = "default_center")]
    pub center: [f64; 2],
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Transport time of the blob.
    #[serde(default = "default_quarter")]
    pub t: f64,
    #[serde(default = "default_classical_dt")]
    pub dt: f64,
    /// Horizon of the energy-drift measurement.
    #[serde(default = "default_energy_horizon")]
    pub energy_horizon: f64,
    /// Clock system of the joint density.
    #[serde(default = "default_harmonic")]
    pub clock_system: String,
    #[serde(default = "default_branches")]
    pub clock_branches: usize,
    #[serde(default = "default_clock_sigma")]
    pub clock_sigma: f64,
    #[serde(default = "default_clock_radius")]
    pub clock_radius: f64,
    /// Step of the relational-sync check.
    #[serde(default = "default_sync_step")]
    pub sync_step: f64,
    #[serde(default = "default_center_tol")]
    pub center_tol: f64,
    #[serde(default = "default_l1_tol")]
    pub semigroup_tol: f64,
    #[serde(default = "default_l1_tol")]
    pub jacobian_tol: f64,
    #[serde(default = "default_l1_tol")]
    pub conditioning_tol: f64,
    #[serde(default = "default_sync_tol")]
    pub sync_tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_harmonic() -> String {
    "harmonic(1,1)".into()
}
fn default_center() -> [f64; 2] {
    [1.0, 0.0]
}
fn default_sigma() -> f64 {
    0.1
}
fn default_samples() -> usize {
    2000
}
fn default_quarter() -> f64 {
    FRAC_PI_2
}
fn default_classical_dt() -> f64 {
    1e-3
}
fn default_energy_horizon() -> f64 {
    10.0
}
fn default_branches() -> usize {
    8
}
fn default_clock_sigma() -> f64 {
    0.25
}
fn default_clock_radius() -> f64 {
    3.5
}
fn default_sync_step() -> f64 {
    0.05
}
fn default_center_tol() -> f64 {
    1e-4
}
fn default_l1_tol() -> f64 {
    1e-6
}
fn default_sync_tol() -> f64 {
    1e-5
}

impl ClassicalParams {
    fn validate(&self) -> Result<()> {
        let h = parse_system("system", &self.system)?;
        ensure!(h.dof() == 1, "system must have one degree of freedom");
        let c = parse_system("clock_system", &self.clock_system)?;
        ensure!(c.dof() == 1, "clock_system must have one degree of freedom");
        ensure!(
            c.period().is_some(),
            "clock_system must be periodic, got {}",
            self.clock_system
        );
        for (k, v) in [
            ("sigma", self.sigma),
            ("dt", self.dt),
            ("energy_horizon", self.energy_horizon),
            ("clock_sigma", self.clock_sigma),
            ("clock_radius", self.clock_radius),
            ("sync_step", self.sync_step),
        ] {
            positive(k, v)?;
        }
        for (k, v) in self.tolerances() {
            positive(k, v)?;
        }
        ensure!(self.t.is_finite(), "t must be finite");
        ensure!(self.samples >= 2, "samples must be at least 2");
        ensure!(
            self.clock_branches >= 2,
            "clock_branches must be at least 2, got {}",
            self.clock_branches
        );
        Ok(())
    }

    fn tolerances(&self) -> [(&'static str, f64); 5] {
        [
            ("center_tol", self.center_tol),
            ("semigroup_tol", self.semigroup_tol),
            ("jacobian_tol", self.jacobian_tol),
            ("conditioning_tol", self.conditioning_tol),
            ("sync_tol", self.sync_tol),
        ]
    }

    fn scale(&mut self, x: f64) {
        self.center_tol *= x;
        self.semigroup_tol *= x;
        self.jacobian_tol *= x;
        self.conditioning_tol *= x;
        self.sync_tol *= x;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedParams {
    #[serde(default = "default_harmonic")]
    pub system: String,
    #[serde(default = "default_q0")]
    pub q0: Vec<f64>,
    #[serde(default = "default_p0")]
    pub p0: Vec<f64>,
    /// Initial clock reading.
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_extended_steps")]
    pub steps: usize,
    #[serde(default = "default_classical_dt")]
    pub dtau: f64,
    /// Trajectory rows are written every this many steps.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_extended_tol")]
    pub tol: f64,
    #[serde(default = "default_reduction_tol")]
    pub reduction_tol: f64,
}

fn default_q0() -> Vec<f64> {
    vec![0.5]
}
fn default_p0() -> Vec<f64> {
    vec![0.0]
}
fn default_extended_steps() -> usize {
    1_000_000
}
fn default_record_every() -> usize {
    10_000
}
fn default_extended_tol() -> f64 {
    1e-12
}
fn default_reduction_tol() -> f64 {
    1e-8
}

impl ExtendedParams {
    fn validate(&self) -> Result<()> {
        let h = parse_system("system", &self.system)?;
        ensure!(
            self.q0.len() == h.dof() && self.p0.len() == h.dof(),
            "q0 and p0 must have {} entries",
            h.dof()
        );
        ensure!(self.steps >= 1, "steps must be at least 1");
        ensure!(self.t0.is_finite(), "t0 must be finite");
        positive("dtau", self.dtau)?;
        positive("tol", self.tol)?;
        positive("reduction_tol", self.reduction_tol)?;
        Ok(())
    }

    fn scale(&mut self, x: f64) {
        self.tol *= x;
        self.reduction_tol *= x;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjParams {
    #[serde(default = "default_free")]
    pub system: String,
    /// Partner system; defaults to the mirror image of `system`.
    #[serde(default)]
    pub partner: Option<String>,
    #[serde(default = "default_q")]
    pub q1: f64,
    /// Defaults to `q1`.
    #[serde(default)]
    pub q2: Option<f64>,
    #[serde(default = "default_e1")]
    pub e1: f64,
    /// Rows `q = q·j/sweep`, `j = 0..=sweep`, in the correlation table.
    #[serde(default = "default_sweep")]
    pub sweep: usize,
    /// Energy transfer of the stationarity check, relative to `|e1|`.
    #[serde(default = "default_transfer")]
    pub transfer: f64,
    #[serde(default)]
    pub expected_t1: Option<f64>,
    #[serde(default)]
    pub expected_t2: Option<f64>,
    #[serde(default = "default_hj_tol")]
    pub tol: f64,
}

fn default_free() -> String {
    "free_particle(1)".into()
}
fn default_q() -> f64 {
    3.0
}
fn default_e1() -> f64 {
    0.5
}
fn default_sweep() -> usize {
    16
}
fn default_transfer() -> f64 {
    0.1
}
fn default_hj_tol() -> f64 {
    1e-6
}

impl HjParams {
    pub fn q2(&self) -> f64 {
        self.q2.unwrap_or(self.q1)
    }

    pub fn partner(&self) -> String {
        self.partner
            .clone()
            .unwrap_or_else(|| format!("mirror({})", self.system))
    }

    fn validate(&self) -> Result<()> {
        parse_system("system", &self.system)?;
        parse_system("partner", &self.partner())?;
        ensure!(
            self.q1.is_finite() && self.q2().is_finite(),
            "q1 and q2 must be finite"
        );
        ensure!(self.e1.is_finite(), "e1 must be finite");
        ensure!(self.sweep >= 1, "sweep must be at least 1");
        positive("transfer", self.transfer)?;
        positive("tol", self.tol)?;
        Ok(())
    }

    fn scale(&mut self, x: f64) {
        self.tol *= x;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintParams {
    #[serde(default = "default_ring")]
    pub generator_s: String,
    #[serde(default = "default_ring_upper")]
    pub generator_c: String,
    #[serde(default)]
    pub target: f64,
    #[serde(default = "default_shifts")]
    pub shifts: usize,
    /// Shifts are spread evenly over `[-shift_range, shift_range]`.
    #[serde(default = "default_shift_range")]
    pub shift_range: f64,
    /// Clock size and spacing of the energy-generator cross-check.
    #[serde(default = "default_branches")]
    pub energy_d: usize,
    #[serde(default = "default_energy_dt")]
    pub energy_dt: f64,
    #[serde(default)]
    pub two_particle: TwoParticleParams,
    #[serde(default = "default_pw_tol")]
    pub tol: f64,
    #[serde(default = "default_extended_tol")]
    pub momentum_tol: f64,
}

/// Missing fields fall back to the defaults individually.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoParticleParams {
    pub m1: f64,
    pub m2: f64,
    pub p_total: f64,
    pub p1: f64,
    pub q1: f64,
    pub q2: f64,
    pub steps: usize,
    pub dt: f64,
}

fn default_ring() -> String {
    "momentum_ring(8)".into()
}
fn default_ring_upper() -> String {
    "momentum_ring_upper(8)".into()
}
fn default_shifts() -> usize {
    32
}
fn default_shift_range() -> f64 {
    std::f64::consts::PI
}
fn default_energy_dt() -> f64 {
    0.25
}
impl Default for TwoParticleParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 3.0,
            p_total: 2.0,
            p1: 1.0,
            q1: 0.0,
            q2: 1.0,
            steps: 1_000_000,
            dt: 1e-3,
        }
    }
}

impl ConstraintParams {
    fn validate(&self) -> Result<()> {
        self.generator_s
            .parse::<GeneratorId>()
            .with_context(|| format!("generator_s = {:?}", self.generator_s))?;
        self.generator_c
            .parse::<GeneratorId>()
            .with_context(|| format!("generator_c = {:?}", self.generator_c))?;
        ensure!(self.target.is_finite(), "target must be finite");
        ensure!(self.shifts >= 1, "shifts must be at least 1");
        positive("shift_range", self.shift_range)?;
        ensure!(
            self.energy_d >= 2,
            "energy_d must be at least 2, got {}",
            self.energy_d
        );
        positive("energy_dt", self.energy_dt)?;
        let tp = &self.two_particle;
        positive("two_particle.m1", tp.m1)?;
        positive("two_particle.m2", tp.m2)?;
        positive("two_particle.dt", tp.dt)?;
        ensure!(tp.steps >= 1, "two_particle.steps must be at least 1");
        positive("tol", self.tol)?;
        positive("momentum_tol", self.momentum_tol)?;
        Ok(())
    }

    fn scale(&mut self, x: f64) {
        self.tol *= x;
        self.momentum_tol *= x;
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    ensure!(
        v > 0.0 && v.is_finite(),
        "{key} must be positive and finite, got {v}"
    );
    Ok(())
}

fn parse_system(key: &str, id: &str) -> Result<LibrarySystem> {
    id.parse().with_context(|| format!("{key} = {id:?}"))
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PwQuantum(_) => "pw_quantum",
            Self::ClassicalLiouville(_) => "classical_liouville",
            Self::Extended(_) => "extended",
            Self::HjCorrelation(_) => "hj_correlation",
            Self::Constraints(_) => "constraints",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PwQuantum(p) => p.validate(),
            Self::ClassicalLiouville(p) => p.validate(),
            Self::Extended(p) => p.validate(),
            Self::HjCorrelation(p) => p.validate(),
            Self::Constraints(p) => p.validate(),
        }
    }

    /// Multiplies every tolerance by `x`.
    pub fn scale_tolerances(&mut self, x: f64) -> Result<()> {
        positive("tol-scale", x)?;
        match self {
            Self::PwQuantum(p) => p.scale(x),
            Self::ClassicalLiouville(p) => p.scale(x),
            Self::Extended(p) => p.scale(x),
            Self::HjCorrelation(p) => p.scale(x),
            Self::Constraints(p) => p.scale(x),
        }
        Ok(())
    }

    /// Seed of scenarios that draw random numbers, 0 otherwise.
    pub fn seed(&self) -> u64 {
        match self {
            Self::PwQuantum(p) => p.seed,
            Self::ClassicalLiouville(p) => p.seed,
            _ => 0,
        }
    }

    /// Replaces the seed of scenarios that draw random numbers.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Self::PwQuantum(p) => p.seed = seed,
            Self::ClassicalLiouville(p) => p.seed = seed,
            _ => {}
        }
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig = serde_json::from_str(text).context("malformed config")?;
    let params = raw.parameters;
    let with = |e: serde_json::Error| anyhow::anyhow!("{} parameters: {e}", raw.scenario);
    let scenario = match raw.scenario.as_str() {
        "pw_quantum" => Scenario::PwQuantum(serde_json::from_value(params).map_err(with)?),
        "classical_liouville" => {
            Scenario::ClassicalLiouville(serde_json::from_value(params).map_err(with)?)
        }
        "extended" => Scenario::Extended(serde_json::from_value(params).map_err(with)?),
        "hj_correlation" => Scenario::HjCorrelation(serde_json::from_value(params).map_err(with)?),
        "constraints" => Scenario::Constraints(serde_json::from_value(params).map_err(with)?),
        other => {
            let known: Vec<&str> = SCENARIOS.iter().map(|(n, _)| *n).collect();
            bail!(
                "unknown scenario {other:?}; expected one of {}",
                known.join(", ")
            )
        }
    };
    scenario
        .validate()
        .with_context(|| format!("invalid {} config", scenario.name()))?;
    Ok(ScenarioConfig {
        scenario,
        output_dir: raw.output_dir,
        base_dir: None,
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    Ok(cfg)
}
