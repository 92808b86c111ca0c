//! Benchmark scenarios comparing force-controlled contact tasks across four
//! tool configurations: plain robot, robot with a passive compliant wrist,
//! and the active compliant wrist with a one- or two-stage spring. Covers
//! approach-to-contact and contour following, with seeded sensor noise and
//! Table-style aggregation.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::control::{HybridController, HybridLoopConfig, Measurements};
use crate::error::{Error, Result};
use crate::plant::{PlantConfig, PlantState, SurfaceMotion, TrajectoryPoint};

/// Benchmark scenario family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ScenarioKind {
    ContactEstablishment,
    ContourFollowing,
}

impl ScenarioKind {
    pub fn id(&self) -> &'static str {
        match self {
            ScenarioKind::ContactEstablishment => "contact-establishment",
            ScenarioKind::ContourFollowing => "contour-following",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "contact-establishment" => Ok(ScenarioKind::ContactEstablishment),
            "contour-following" => Ok(ScenarioKind::ContourFollowing),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario '{other}'"
            ))),
        }
    }
}

/// Tool configuration under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConfigId {
    RobotOnly,
    RobotRcc,
    ArccOneStage,
    ArccTwoStage,
}

impl ConfigId {
    pub const ALL: [ConfigId; 4] = [
        ConfigId::RobotOnly,
        ConfigId::RobotRcc,
        ConfigId::ArccOneStage,
        ConfigId::ArccTwoStage,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            ConfigId::RobotOnly => "robot-only",
            ConfigId::RobotRcc => "robot-rcc",
            ConfigId::ArccOneStage => "arcc-one-stage",
            ConfigId::ArccTwoStage => "arcc-two-stage",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "robot-only" => Ok(ConfigId::RobotOnly),
            "robot-rcc" => Ok(ConfigId::RobotRcc),
            "arcc-one-stage" => Ok(ConfigId::ArccOneStage),
            "arcc-two-stage" => Ok(ConfigId::ArccTwoStage),
            other => Err(Error::InvalidParameter(format!(
                "unknown configuration '{other}'"
            ))),
        }
    }

    /// True for configurations with the servo-driven compliant axis.
    pub fn is_active(&self) -> bool {
        matches!(self, ConfigId::ArccOneStage | ConfigId::ArccTwoStage)
    }
}

/// Task geometry, one variant per scenario kind.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ScenarioGeometry {
    /// Approach a flat face from a set-back start.
    Contact {
        /// Start distance to the face (m).
        offset_m: f64,
    },
    /// Follow a sinusoidal profile passing under the tool.
    Contour {
        /// Profile amplitude (m); 0 degenerates to a flat face.
        amplitude_m: f64,
        /// Profile wavelength (m).
        wavelength_m: f64,
        /// Traversal length per speed (m).
        length_m: f64,
    },
}

/// Traverse-speed ramp for the contour scenario.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpeedSchedule {
    /// First traverse speed tried (m/s).
    pub initial_m_s: f64,
    /// Ramp increment (m/s).
    pub increment_m_s: f64,
    /// Upper cap ending the ramp when contact is never lost (m/s).
    pub max_m_s: f64,
}

/// Additive white sensor noise levels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    /// Force sensor noise, one standard deviation (N).
    pub force_sigma_n: f64,
    /// Deflection sensor noise, one standard deviation (m).
    pub deflection_sigma_m: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            force_sigma_n: 0.05,
            deflection_sigma_m: 30.0e-6,
        }
    }
}

/// One benchmark scenario, fully specified.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub config: ConfigId,
    pub geometry: ScenarioGeometry,
    /// Contact force setpoint (N).
    pub f_des_n: f64,
    /// Speed ramp; contour scenarios only.
    pub speeds: Option<SpeedSchedule>,
    /// Independent repetitions with varied noise seeds.
    pub repetitions: usize,
    /// Sensor noise; `None` runs noise-free.
    pub noise: Option<NoiseSpec>,
    /// Base seed; run `i` derives its own stream from it.
    pub seed: u64,
    /// Capture a decimated trajectory in the result.
    pub record_trajectory: bool,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_des_n > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "force setpoint must be positive, got {}",
                self.f_des_n
            )));
        }
        if self.repetitions < 1 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        match (self.kind, &self.geometry) {
            (ScenarioKind::ContactEstablishment, ScenarioGeometry::Contact { offset_m }) => {
                if !(*offset_m >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "approach offset must be non-negative, got {offset_m}"
                    )));
                }
            }
            (ScenarioKind::ContourFollowing, ScenarioGeometry::Contour { amplitude_m, wavelength_m, length_m }) => {
                if !(*amplitude_m >= 0.0 && *wavelength_m > 0.0 && *length_m > 0.0) {
                    return Err(Error::InvalidParameter(
                        "contour needs amplitude >= 0, wavelength > 0, length > 0".into(),
                    ));
                }
                let s = self.speeds.ok_or_else(|| {
                    Error::InvalidParameter("contour scenario needs a speed schedule".into())
                })?;
                if !(s.initial_m_s > 0.0 && s.increment_m_s > 0.0 && s.max_m_s >= s.initial_m_s) {
                    return Err(Error::InvalidParameter(
                        "speed schedule needs initial > 0, increment > 0, max >= initial".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "scenario kind does not match its geometry".into(),
                ))
            }
        }
        Ok(())
    }
}

/// Force-error statistics at one traverse speed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpeedPoint {
    pub speed_m_s: f64,
    pub ferr_mean_n: f64,
    pub ferr_std_n: f64,
    pub lost: bool,
}

/// Outcome of one benchmark run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunResult {
    pub config: ConfigId,
    pub kind: ScenarioKind,
    pub run_index: usize,
    pub seed: u64,
    /// Contact: first motion to settled contact. Contour: warmup length.
    pub duration_s: f64,
    /// Peak force above the setpoint (N), preload-adjusted for active
    /// configurations in the contact scenario; never negative.
    pub overshoot_n: f64,
    /// Mean absolute force error over the evaluation window (N).
    pub ferr_mean_n: f64,
    /// Sample standard deviation of the absolute force error (N).
    pub ferr_std_n: f64,
    /// Largest traverse speed that kept contact (contour only, m/s).
    pub vmax_m_s: Option<f64>,
    /// Contour: contact was lost at some ramp speed.
    pub contact_lost: bool,
    /// Contact scenario failed to settle within the timeout.
    pub timed_out: bool,
    /// Peak contact force magnitude seen anywhere in the run (N).
    pub max_force_n: f64,
    /// Per-speed error series (contour only).
    pub per_speed: Vec<SpeedPoint>,
    /// Decimated trajectory, when requested.
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// Time the contact scenario may take before being flagged (simulated s).
pub const CONTACT_TIMEOUT_S: f64 = 60.0;
/// Force must stay inside +-2% of the setpoint this long to count settled.
pub const SETTLE_WINDOW_S: f64 = 0.1;
/// Relative half-width of the settle band.
pub const SETTLE_BAND_REL: f64 = 0.02;
/// Extra hold time after settling used for the error statistics.
const HOLD_WINDOW_S: f64 = 0.5;
/// Contour warmup in steady contact before the profile starts moving.
const CONTOUR_WARMUP_S: f64 = 0.4;
/// Zero-force dwell that counts as losing contact.
pub const CONTACT_LOSS_DWELL_S: f64 = 0.02;

/// Sensor source closing the force loop: the active configurations infer
/// force from spring deflection; the others read the contact sensor.
fn spring_feedback(config: ConfigId) -> bool {
    config.is_active()
}

struct OnlineStats {
    n: usize,
    mean: f64,
    m2: f64,
}

impl OnlineStats {
    fn new() -> Self {
        Self { n: 0, mean: 0.0, m2: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        if self.n == 0 { 0.0 } else { self.mean }
    }

    fn sample_std(&self) -> f64 {
        if self.n < 2 { 0.0 } else { (self.m2 / (self.n - 1) as f64).sqrt() }
    }
}

/// One closed-loop stepper: plant, sampled controller, seeded sensor noise.
struct LoopRunner {
    plant: PlantConfig,
    ctrl: HybridController,
    state: PlantState,
    step_index: usize,
    rng: ChaCha8Rng,
    force_noise: Option<Normal<f64>>,
    deflection_noise: Option<Normal<f64>>,
    spring_feedback: bool,
    last_meas: Measurements,
    max_force_n: f64,
}

impl LoopRunner {
    fn new(
        plant: PlantConfig,
        loop_cfg: &HybridLoopConfig,
        state: PlantState,
        noise: Option<NoiseSpec>,
        seed: u64,
        spring_fb: bool,
    ) -> Result<Self> {
        plant.validate()?;
        let ctrl = HybridController::new(*loop_cfg, plant.dt_sim_s)?;
        let (force_noise, deflection_noise) = match noise {
            Some(n) => (
                Some(Normal::new(0.0, n.force_sigma_n).map_err(|e| {
                    Error::InvalidParameter(format!("bad force noise level: {e}"))
                })?),
                Some(Normal::new(0.0, n.deflection_sigma_m).map_err(|e| {
                    Error::InvalidParameter(format!("bad deflection noise level: {e}"))
                })?),
            ),
            None => (None, None),
        };
        Ok(Self {
            plant,
            ctrl,
            state,
            step_index: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            force_noise,
            deflection_noise,
            spring_feedback: spring_fb,
            last_meas: Measurements { force_n: 0.0, deflection_m: 0.0 },
            max_force_n: 0.0,
        })
    }

    fn time_s(&self) -> f64 {
        self.state.t_s
    }

    fn true_contact_force_n(&self) -> f64 {
        self.plant.contact_force_n(&self.state)
    }

    /// Advances one simulation step and returns the true contact force after
    /// the step.
    fn step(&mut self) -> Result<f64> {
        if self.ctrl.arcc_tick(self.step_index) || self.ctrl.robot_tick(self.step_index) {
            let raw_force = if self.spring_feedback {
                self.plant.spring_force_on_tool_n(&self.state)
            } else {
                self.plant.contact_force_n(&self.state)
            };
            let raw_deflection = self.state.x_r_m - self.state.x_p_m;
            let f_noise = self.force_noise.as_ref().map_or(0.0, |n| n.sample(&mut self.rng));
            let x_noise = self
                .deflection_noise
                .as_ref()
                .map_or(0.0, |n| n.sample(&mut self.rng));
            self.last_meas = Measurements {
                force_n: raw_force + f_noise,
                deflection_m: raw_deflection + x_noise,
            };
        }
        let (u_m, u_r) = self.ctrl.update(self.step_index, &self.last_meas, 0.0);
        self.state = self.plant.step(&self.state, u_m, u_r)?;
        self.step_index += 1;
        let f = self.true_contact_force_n();
        self.max_force_n = self.max_force_n.max(f.abs());
        Ok(f)
    }
}

/// Initial state variants per configuration.
fn contact_initial_state(
    config: ConfigId,
    plant: &PlantConfig,
    f_des_n: f64,
) -> Result<PlantState> {
    let mut s = PlantState::resting(0.0);
    if config.is_active() {
        // preloaded against the forward travel stop: the spring is wound to
        // the force setpoint, so the deflection sensor already reads F_des
        // and the force branch idles until release at contact
        let h = plant.travel_half_stroke_m;
        let eps = f_des_n / plant.stop_stiffness_n_per_m;
        let delta_m = plant.spring.deflection_for_force_mm(f_des_n)? * 1.0e-3;
        s.x_p_m = h + eps;
        s.x_a_m = s.x_p_m + delta_m;
    }
    Ok(s)
}

fn contour_initial_state(
    config: ConfigId,
    plant: &PlantConfig,
    f_des_n: f64,
) -> Result<PlantState> {
    let mut s = PlantState::resting(0.0);
    if !plant.rigid_tool {
        // compress the spring so the tool statically presses with F_des
        let delta_m = plant.spring.deflection_for_force_mm(f_des_n)? * 1.0e-3;
        s.x_a_m = delta_m;
        let _ = config;
    }
    Ok(s)
}

fn check_wiring(config: ConfigId, loop_cfg: &HybridLoopConfig) -> Result<()> {
    if config.is_active() && loop_cfg.arcc.is_none() {
        return Err(Error::Configuration(format!(
            "configuration '{}' needs the active-axis stiffness controller",
            config.id()
        )));
    }
    if !config.is_active() && loop_cfg.robot_force.is_none() {
        return Err(Error::Configuration(format!(
            "configuration '{}' needs the robot-side stiffness controller",
            config.id()
        )));
    }
    Ok(())
}

fn run_seed(spec: &ScenarioSpec, run_index: usize) -> u64 {
    spec.seed.wrapping_add(1_000_003u64.wrapping_mul(run_index as u64))
}

/// Runs one approach-to-contact repetition: drive from the set-back start
/// until the true contact force stays inside the settle band around the
/// setpoint for the full settle window. Duration counts from first motion
/// to the settled instant; failing to settle within the timeout flags the
/// result instead of erroring.
pub fn run_contact_establishment(
    spec: &ScenarioSpec,
    plant: &PlantConfig,
    loop_cfg: &HybridLoopConfig,
    run_index: usize,
) -> Result<RunResult> {
    spec.validate()?;
    check_wiring(spec.config, loop_cfg)?;
    if spec.kind != ScenarioKind::ContactEstablishment {
        return Err(Error::InvalidParameter(
            "not a contact-establishment scenario".into(),
        ));
    }
    let offset_m = match spec.geometry {
        ScenarioGeometry::Contact { offset_m } => offset_m,
        _ => unreachable!("validated"),
    };
    let f_des = spec.f_des_n;
    let mut plant = plant.clone();
    plant.env.surface = SurfaceMotion::Static { position_m: offset_m };

    let state = contact_initial_state(spec.config, &plant, f_des)?;
    let seed = run_seed(spec, run_index);
    let mut runner = LoopRunner::new(
        plant,
        loop_cfg,
        state,
        spec.noise,
        seed,
        spring_feedback(spec.config),
    )?;

    let dt = runner.plant.dt_sim_s;
    let band = SETTLE_BAND_REL * f_des;
    let x_p0 = runner.state.x_p_m;
    let x_r0 = runner.state.x_r_m;
    let mut first_motion: Option<f64> = None;
    let mut band_since: Option<f64> = None;
    let mut settled_at: Option<f64> = None;
    let mut trajectory = spec.record_trajectory.then(Vec::new);
    let decimate = (4.0e-3 / dt).round().max(1.0) as usize;

    while runner.time_s() < CONTACT_TIMEOUT_S {
        if let Some(tr) = trajectory.as_mut() {
            if runner.step_index % decimate == 0 {
                tr.push(TrajectoryPoint::capture(&runner.plant, &runner.state));
            }
        }
        let f = runner.step()?;
        let t = runner.time_s();
        if first_motion.is_none()
            && ((runner.state.x_p_m - x_p0).abs() > 1.0e-6
                || (runner.state.x_r_m - x_r0).abs() > 1.0e-6)
        {
            first_motion = Some(t);
        }
        if (f - f_des).abs() <= band {
            let since = *band_since.get_or_insert(t);
            if t - since >= SETTLE_WINDOW_S {
                settled_at = Some(t);
                break;
            }
        } else {
            band_since = None;
        }
    }

    let timed_out = settled_at.is_none();
    let settle_t = settled_at.unwrap_or(CONTACT_TIMEOUT_S);
    let duration_s = if timed_out {
        CONTACT_TIMEOUT_S
    } else {
        settle_t - first_motion.unwrap_or(0.0)
    };

    // hold phase: error statistics around the setpoint
    let mut stats = OnlineStats::new();
    let hold_end = settle_t + HOLD_WINDOW_S;
    while runner.time_s() < hold_end {
        if let Some(tr) = trajectory.as_mut() {
            if runner.step_index % decimate == 0 {
                tr.push(TrajectoryPoint::capture(&runner.plant, &runner.state));
            }
        }
        let f = runner.step()?;
        stats.push((f - f_des).abs());
    }

    let raw_overshoot = (runner.max_force_n - f_des).max(0.0);
    let overshoot_n = if spec.config.is_active() {
        // the released preload is part of the measured peak; report the
        // excess beyond it
        (raw_overshoot - f_des).max(0.0)
    } else {
        raw_overshoot
    };

    Ok(RunResult {
        config: spec.config,
        kind: spec.kind,
        run_index,
        seed,
        duration_s,
        overshoot_n,
        ferr_mean_n: stats.mean(),
        ferr_std_n: stats.sample_std(),
        vmax_m_s: None,
        contact_lost: false,
        timed_out,
        max_force_n: runner.max_force_n,
        per_speed: Vec::new(),
        trajectory,
    })
}

/// Runs one contour repetition: for each ramp speed, a fresh traversal over
/// the full length with the profile moving under the tool; the ramp stops at
/// the first speed where the unilateral contact force stays at zero longer
/// than the loss dwell. The best speed is the last one that kept contact.
pub fn run_contour_following(
    spec: &ScenarioSpec,
    plant: &PlantConfig,
    loop_cfg: &HybridLoopConfig,
    run_index: usize,
) -> Result<RunResult> {
    spec.validate()?;
    check_wiring(spec.config, loop_cfg)?;
    if spec.kind != ScenarioKind::ContourFollowing {
        return Err(Error::InvalidParameter(
            "not a contour-following scenario".into(),
        ));
    }
    let (amplitude_m, wavelength_m, length_m) = match spec.geometry {
        ScenarioGeometry::Contour { amplitude_m, wavelength_m, length_m } => {
            (amplitude_m, wavelength_m, length_m)
        }
        _ => unreachable!("validated"),
    };
    let schedule = spec.speeds.expect("validated");
    let f_des = spec.f_des_n;
    let base_m = -f_des / plant.env.c_env_n_per_m;

    let mut per_speed: Vec<SpeedPoint> = Vec::new();
    let mut pooled = OnlineStats::new();
    let mut vmax: f64 = 0.0;
    let mut contact_lost = false;
    let mut max_force: f64 = 0.0;
    let mut trajectory: Option<Vec<TrajectoryPoint>> = None;

    let mut speed = schedule.initial_m_s;
    let mut speed_index = 0usize;
    while speed <= schedule.max_m_s + 1.0e-12 {
        let mut plant_run = plant.clone();
        plant_run.env.surface = SurfaceMotion::Static { position_m: base_m };
        let state = contour_initial_state(spec.config, &plant_run, f_des)?;
        let seed = run_seed(spec, run_index).wrapping_add(speed_index as u64);
        let mut runner = LoopRunner::new(
            plant_run,
            loop_cfg,
            state,
            spec.noise,
            seed,
            spring_feedback(spec.config),
        )?;

        // warmup against the still face
        while runner.time_s() < CONTOUR_WARMUP_S {
            runner.step()?;
        }

        // switch the face to the moving profile, phase-continuous
        runner.plant.env.surface = SurfaceMotion::ContourWave {
            base_m,
            amplitude_m,
            wavelength_m,
            traverse_speed_m_s: speed,
            start_time_s: runner.time_s(),
        };

        let record_this = spec.record_trajectory;
        let mut tr_this = record_this.then(Vec::new);
        let decimate = (4.0e-3 / runner.plant.dt_sim_s).round().max(1.0) as usize;
        let t_end = runner.time_s() + length_m / speed;
        let mut stats = OnlineStats::new();
        let mut zero_since: Option<f64> = None;
        let mut lost = false;
        while runner.time_s() < t_end {
            if let Some(tr) = tr_this.as_mut() {
                if runner.step_index % decimate == 0 {
                    tr.push(TrajectoryPoint::capture(&runner.plant, &runner.state));
                }
            }
            let f = runner.step()?;
            let t = runner.time_s();
            stats.push((f - f_des).abs());
            if f <= 0.0 {
                let since = *zero_since.get_or_insert(t);
                if t - since > CONTACT_LOSS_DWELL_S {
                    lost = true;
                    break;
                }
            } else {
                zero_since = None;
            }
        }
        max_force = max_force.max(runner.max_force_n);
        per_speed.push(SpeedPoint {
            speed_m_s: speed,
            ferr_mean_n: stats.mean(),
            ferr_std_n: stats.sample_std(),
            lost,
        });
        if record_this {
            trajectory = tr_this;
        }
        if lost {
            contact_lost = true;
            break;
        }
        vmax = speed;
        pooled_merge(&mut pooled, &stats);
        speed_index += 1;
        speed = schedule.initial_m_s + speed_index as f64 * schedule.increment_m_s;
    }

    Ok(RunResult {
        config: spec.config,
        kind: spec.kind,
        run_index,
        seed: run_seed(spec, run_index),
        duration_s: CONTOUR_WARMUP_S,
        overshoot_n: (max_force - f_des).max(0.0),
        ferr_mean_n: pooled.mean(),
        ferr_std_n: pooled.sample_std(),
        vmax_m_s: Some(vmax),
        contact_lost,
        timed_out: false,
        max_force_n: max_force,
        per_speed,
        trajectory,
    })
}

/// Folds per-speed statistics into the pooled accumulator; sufficient here
/// because only means and spreads of the same quantity are combined.
fn pooled_merge(pooled: &mut OnlineStats, other: &OnlineStats) {
    if other.n == 0 {
        return;
    }
    // parallel-variance merge
    let n1 = pooled.n as f64;
    let n2 = other.n as f64;
    let d = other.mean - pooled.mean;
    pooled.mean += d * n2 / (n1 + n2);
    pooled.m2 += other.m2 + d * d * n1 * n2 / (n1 + n2);
    pooled.n += other.n;
}

/// Per-configuration aggregate of repeated runs.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AggregateRow {
    pub config: ConfigId,
    pub kind: ScenarioKind,
    pub runs: usize,
    pub duration_mean_s: f64,
    pub duration_std_s: f64,
    pub overshoot_mean_n: f64,
    pub overshoot_std_n: f64,
    pub ferr_mean_n: f64,
    pub ferr_std_n: f64,
    pub vmax_mean_m_s: Option<f64>,
    pub vmax_std_m_s: Option<f64>,
    pub any_contact_lost: bool,
    pub any_timed_out: bool,
}

/// Groups results by configuration and scenario, reporting means and sample
/// standard deviations in the Table style.
pub fn aggregate(results: &[RunResult]) -> Result<Vec<AggregateRow>> {
    if results.is_empty() {
        return Err(Error::InvalidParameter("no results to aggregate".into()));
    }
    let mut rows: Vec<AggregateRow> = Vec::new();
    for config in ConfigId::ALL {
        for kind in [ScenarioKind::ContactEstablishment, ScenarioKind::ContourFollowing] {
            let group: Vec<&RunResult> = results
                .iter()
                .filter(|r| r.config == config && r.kind == kind)
                .collect();
            if group.is_empty() {
                continue;
            }
            let collect = |f: &dyn Fn(&RunResult) -> f64| {
                let mut s = OnlineStats::new();
                for r in &group {
                    s.push(f(r));
                }
                (s.mean(), s.sample_std())
            };
            let (duration_mean_s, duration_std_s) = collect(&|r| r.duration_s);
            let (overshoot_mean_n, overshoot_std_n) = collect(&|r| r.overshoot_n);
            let (ferr_mean_n, _) = collect(&|r| r.ferr_mean_n);
            let (ferr_std_n, _) = collect(&|r| r.ferr_std_n);
            let vmax: Vec<f64> = group.iter().filter_map(|r| r.vmax_m_s).collect();
            let (vmax_mean_m_s, vmax_std_m_s) = if vmax.is_empty() {
                (None, None)
            } else {
                let mut s = OnlineStats::new();
                for v in &vmax {
                    s.push(*v);
                }
                (Some(s.mean()), Some(s.sample_std()))
            };
            rows.push(AggregateRow {
                config,
                kind,
                runs: group.len(),
                duration_mean_s,
                duration_std_s,
                overshoot_mean_n,
                overshoot_std_n,
                ferr_mean_n,
                ferr_std_n,
                vmax_mean_m_s,
                vmax_std_m_s,
                any_contact_lost: group.iter().any(|r| r.contact_lost),
                any_timed_out: group.iter().any(|r| r.timed_out),
            });
        }
    }
    Ok(rows)
}

/// Full comparison report: raw runs, aggregates, and failure annotations.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BenchReport {
    pub results: Vec<RunResult>,
    pub rows: Vec<AggregateRow>,
    /// Human-readable notes for runs that diverged or timed out.
    pub failures: Vec<String>,
}

/// Runs every (spec, plant, loop) bundle for its full repetition count.
/// Diverging runs become annotations rather than aborting the sweep.
pub fn compare_configurations(
    bundles: &[(ScenarioSpec, PlantConfig, HybridLoopConfig)],
) -> Result<BenchReport> {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (spec, plant, loop_cfg) in bundles {
        spec.validate()?;
        for run_index in 0..spec.repetitions {
            let outcome = match spec.kind {
                ScenarioKind::ContactEstablishment => {
                    run_contact_establishment(spec, plant, loop_cfg, run_index)
                }
                ScenarioKind::ContourFollowing => {
                    run_contour_following(spec, plant, loop_cfg, run_index)
                }
            };
            match outcome {
                Ok(r) => {
                    if r.timed_out {
                        failures.push(format!(
                            "{} {} run {}: no settlement within {CONTACT_TIMEOUT_S} s",
                            spec.config.id(),
                            spec.kind.id(),
                            run_index
                        ));
                    }
                    results.push(r);
                }
                Err(Error::SimulationDiverged { t_s }) => {
                    failures.push(format!(
                        "{} {} run {}: diverged at t = {t_s:.4} s",
                        spec.config.id(),
                        spec.kind.id(),
                        run_index
                    ));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if results.is_empty() {
        return Err(Error::Configuration(
            "every benchmark run failed; nothing to report".into(),
        ));
    }
    let rows = aggregate(&results)?;
    Ok(BenchReport { results, rows, failures })
}

impl BenchReport {
    /// Writes one row per run. Speeds are reported in mm/s; the column is
    /// empty for contact rows.
    pub fn write_results_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "config,scenario,run,duration_s,overshoot_n,ferr_mean_n,ferr_std_n,vmax_mm_s,contact_lost"
        )?;
        for r in &self.results {
            let vmax = r
                .vmax_m_s
                .map(|v| format!("{:.8e}", v * 1.0e3))
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{:.8e},{:.8e},{:.8e},{:.8e},{},{}",
                r.config.id(),
                r.kind.id(),
                r.run_index,
                r.duration_s,
                r.overshoot_n,
                r.ferr_mean_n,
                r.ferr_std_n,
                vmax,
                r.contact_lost
            )?;
        }
        Ok(())
    }

    /// Writes the per-speed force-error series, averaged over repetitions.
    pub fn write_contour_series_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "config,speed_mm_s,ferr_mean_n,ferr_std_n")?;
        for config in ConfigId::ALL {
            // gather and average by speed across runs of this configuration
            let mut speeds: Vec<f64> = Vec::new();
            for r in self.results.iter().filter(|r| r.config == config) {
                for p in &r.per_speed {
                    if !speeds.iter().any(|s| (s - p.speed_m_s).abs() < 1.0e-12) {
                        speeds.push(p.speed_m_s);
                    }
                }
            }
            speeds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for s in speeds {
                let mut mean = OnlineStats::new();
                let mut std = OnlineStats::new();
                for r in self.results.iter().filter(|r| r.config == config) {
                    for p in &r.per_speed {
                        if (p.speed_m_s - s).abs() < 1.0e-12 {
                            mean.push(p.ferr_mean_n);
                            std.push(p.ferr_std_n);
                        }
                    }
                }
                writeln!(
                    w,
                    "{},{:.8e},{:.8e},{:.8e}",
                    config.id(),
                    s * 1.0e3,
                    mean.mean(),
                    std.mean()
                )?;
            }
        }
        Ok(())
    }

    /// Renders the human-readable summary. A force ceiling, when given, adds
    /// a warning on rows whose peak force exceeds it.
    pub fn to_markdown(&self, force_ceiling_n: Option<f64>) -> String {
        let mut out = String::from("# Benchmark comparison\n\n");
        out.push_str("## Contact establishment\n\n");
        out.push_str("| config | runs | duration (s) | overshoot (N) | |F err| mean (N) | |F err| std (N) | notes |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        for row in self.rows.iter().filter(|r| r.kind == ScenarioKind::ContactEstablishment) {
            let peak = self
                .results
                .iter()
                .filter(|r| r.config == row.config && r.kind == row.kind)
                .map(|r| r.max_force_n)
                .fold(0.0f64, f64::max);
            let mut notes = Vec::new();
            if row.any_timed_out {
                notes.push("timeout".to_string());
            }
            if let Some(ceiling) = force_ceiling_n {
                if peak > ceiling {
                    notes.push(format!("peak {peak:.1} N exceeds the {ceiling:.0} N ceiling"));
                }
            }
            out.push_str(&format!(
                "| {} | {} | {:.3} ± {:.3} | {:.3} ± {:.3} | {:.4} | {:.4} | {} |\n",
                row.config.id(),
                row.runs,
                row.duration_mean_s,
                row.duration_std_s,
                row.overshoot_mean_n,
                row.overshoot_std_n,
                row.ferr_mean_n,
                row.ferr_std_n,
                notes.join("; ")
            ));
        }
        out.push_str("\n## Contour following\n\n");
        out.push_str("| config | runs | max speed (mm/s) | |F err| mean (N) | |F err| std (N) | contact lost |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        for row in self.rows.iter().filter(|r| r.kind == ScenarioKind::ContourFollowing) {
            out.push_str(&format!(
                "| {} | {} | {:.1} ± {:.1} | {:.4} | {:.4} | {} |\n",
                row.config.id(),
                row.runs,
                row.vmax_mean_m_s.unwrap_or(0.0) * 1.0e3,
                row.vmax_std_m_s.unwrap_or(0.0) * 1.0e3,
                row.ferr_mean_n,
                row.ferr_std_n,
                row.any_contact_lost
            ));
        }
        if !self.failures.is_empty() {
            out.push_str("\n## Failures\n\n");
            for f in &self.failures {
                out.push_str(&format!("- {f}\n"));
            }
        }
        out
    }
}
