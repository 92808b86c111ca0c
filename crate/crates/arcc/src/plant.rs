//! Nonlinear time-domain model of the coupled system: a servo-driven active
//! axis riding on a robot flange, a two-stage flexure between the active
//! carriage and the tool, and a unilateral elastic environment.
//!
//! Coordinates are world-frame along the single controlled axis, positive
//! toward the environment. The robot is a stiff velocity source (first-order
//! lag), so contact forces never push the robot back; they act on the tool
//! mass only.

use std::io::Write;

use crate::error::{Error, Result};
use crate::lti::TransferFunction;

/// Piecewise-linear two-stage spring: soft stiffness `c1` up to the
/// transition deflection `x_t`, stiff `c2` beyond. The transition force is
/// derived as `c1 * x_t`, which makes the law continuous by construction.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TwoStageSpring {
    /// Stage-1 stiffness (N/mm).
    pub c1_n_per_mm: f64,
    /// Stage-2 stiffness (N/mm).
    pub c2_n_per_mm: f64,
    /// Transition deflection (mm).
    pub x_t_mm: f64,
    /// Odd force law when true; when false the negative side stays in
    /// stage 1 (one-sided stop spring).
    pub symmetric: bool,
}

impl TwoStageSpring {
    pub fn new(c1_n_per_mm: f64, c2_n_per_mm: f64, x_t_mm: f64) -> Result<Self> {
        let s = Self {
            c1_n_per_mm,
            c2_n_per_mm,
            x_t_mm,
            symmetric: true,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.c1_n_per_mm > 0.0 && self.c2_n_per_mm > 0.0 && self.x_t_mm > 0.0) {
            return Err(Error::InvalidParameter(
                "spring stiffnesses and transition deflection must be positive".into(),
            ));
        }
        if self.c2_n_per_mm <= self.c1_n_per_mm {
            return Err(Error::InvalidParameter(format!(
                "stage-2 stiffness ({} N/mm) must exceed stage-1 ({} N/mm)",
                self.c2_n_per_mm, self.c1_n_per_mm
            )));
        }
        Ok(())
    }

    /// Force at the transition deflection (N).
    pub fn transition_force_n(&self) -> f64 {
        self.c1_n_per_mm * self.x_t_mm
    }

    /// Spring force (N) at a deflection given in mm.
    pub fn force_n(&self, x_mm: f64) -> f64 {
        let one_sided = |x: f64| -> f64 {
            if x <= self.x_t_mm {
                self.c1_n_per_mm * x
            } else {
                self.transition_force_n() + self.c2_n_per_mm * (x - self.x_t_mm)
            }
        };
        if x_mm >= 0.0 {
            one_sided(x_mm)
        } else if self.symmetric {
            -one_sided(-x_mm)
        } else {
            self.c1_n_per_mm * x_mm
        }
    }
}

/// Spring element between the active carriage and the tool.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SpringModel {
    TwoStage(TwoStageSpring),
    /// Single linear stage (N/mm).
    Linear { c_n_per_mm: f64 },
}

/// Operating stage selector for linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpringStage {
    One,
    Two,
}

impl SpringModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpringModel::TwoStage(s) => s.validate(),
            SpringModel::Linear { c_n_per_mm } => {
                if *c_n_per_mm > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(
                        "linear spring stiffness must be positive".into(),
                    ))
                }
            }
        }
    }

    /// Spring force (N) at a deflection given in mm.
    pub fn force_n(&self, x_mm: f64) -> f64 {
        match self {
            SpringModel::TwoStage(s) => s.force_n(x_mm),
            SpringModel::Linear { c_n_per_mm } => c_n_per_mm * x_mm,
        }
    }

    /// Spring force (N) at a deflection given in m.
    pub fn force_si(&self, x_m: f64) -> f64 {
        self.force_n(x_m * 1.0e3)
    }

    /// Stored elastic energy (J) at a deflection given in m, integrated
    /// piecewise for the two-stage law.
    pub fn energy_j(&self, x_m: f64) -> f64 {
        match self {
            SpringModel::Linear { c_n_per_mm } => 0.5 * c_n_per_mm * 1.0e3 * x_m * x_m,
            SpringModel::TwoStage(s) => {
                let c1 = s.c1_n_per_mm * 1.0e3;
                let c2 = s.c2_n_per_mm * 1.0e3;
                let x_t = s.x_t_mm * 1.0e-3;
                let a = x_m.abs();
                // asymmetric springs store stage-1 energy on the negative side
                if x_m < 0.0 && !s.symmetric {
                    return 0.5 * c1 * x_m * x_m;
                }
                if a <= x_t {
                    0.5 * c1 * a * a
                } else {
                    0.5 * c1 * x_t * x_t
                        + c1 * x_t * (a - x_t)
                        + 0.5 * c2 * (a - x_t) * (a - x_t)
                }
            }
        }
    }

    /// Stiffness (N/m) of the requested stage.
    pub fn stage_stiffness_si(&self, stage: SpringStage) -> f64 {
        match self {
            SpringModel::Linear { c_n_per_mm } => c_n_per_mm * 1.0e3,
            SpringModel::TwoStage(s) => match stage {
                SpringStage::One => s.c1_n_per_mm * 1.0e3,
                SpringStage::Two => s.c2_n_per_mm * 1.0e3,
            },
        }
    }

    /// Deflection (mm) that produces a given positive force (N); inverse of
    /// the force law on the positive branch.
    pub fn deflection_for_force_mm(&self, f_n: f64) -> Result<f64> {
        if f_n < 0.0 {
            return Err(Error::InvalidParameter(
                "deflection inverse is defined for non-negative force".into(),
            ));
        }
        Ok(match self {
            SpringModel::Linear { c_n_per_mm } => f_n / c_n_per_mm,
            SpringModel::TwoStage(s) => {
                let f_t = s.transition_force_n();
                if f_n <= f_t {
                    f_n / s.c1_n_per_mm
                } else {
                    s.x_t_mm + (f_n - f_t) / s.c2_n_per_mm
                }
            }
        })
    }
}

/// Lumped physical servo parameters, kept as metadata only; the dynamics use
/// the identified `(k_m, t_m_s)` lag.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MotorPhysical {
    /// Spindle inertia (kg m^2).
    pub spindle_inertia_kg_m2: f64,
    /// Spindle gear ratio (dimensionless).
    pub gear_ratio: f64,
    /// Drivetrain efficiency (dimensionless, 0..1).
    pub efficiency: f64,
    /// Moving mass of the active carriage (kg).
    pub active_mass_kg: f64,
    /// Equivalent translated mass of the drivetrain (kg).
    pub equivalent_mass_kg: f64,
}

/// First-order velocity transmission of the active axis: commanded velocity
/// to achieved carriage velocity relative to the flange.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MotorModel {
    /// Velocity gain (dimensionless).
    pub k_m: f64,
    /// Time constant (s).
    pub t_m_s: f64,
    pub physical: Option<MotorPhysical>,
}

impl MotorModel {
    pub fn new(k_m: f64, t_m_s: f64) -> Result<Self> {
        if !(k_m > 0.0 && t_m_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "motor gain and time constant must be positive, got ({k_m}, {t_m_s})"
            )));
        }
        Ok(Self {
            k_m,
            t_m_s,
            physical: None,
        })
    }
}

/// First-order Cartesian velocity surrogate of the carrying robot.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RobotSurrogate {
    /// Velocity gain (dimensionless).
    pub k_r: f64,
    /// Time constant (s).
    pub t_r_s: f64,
}

impl RobotSurrogate {
    pub fn new(k_r: f64, t_r_s: f64) -> Result<Self> {
        if !(k_r > 0.0 && t_r_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "robot gain and time constant must be positive, got ({k_r}, {t_r_s})"
            )));
        }
        Ok(Self { k_r, t_r_s })
    }
}

/// Contact surface trajectory. Positions are the world coordinate of the
/// surface face; profile height toward the tool lowers the face coordinate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SurfaceMotion {
    Static {
        position_m: f64,
    },
    /// Sinusoidal contour traversed at constant speed: profile height
    /// `A sin(2 pi v (t - t0) / lambda)` toward the tool for `t >= t0`.
    ContourWave {
        base_m: f64,
        amplitude_m: f64,
        wavelength_m: f64,
        traverse_speed_m_s: f64,
        start_time_s: f64,
    },
}

impl SurfaceMotion {
    pub fn position_at(&self, t_s: f64) -> f64 {
        match *self {
            SurfaceMotion::Static { position_m } => position_m,
            SurfaceMotion::ContourWave {
                base_m,
                amplitude_m,
                wavelength_m,
                traverse_speed_m_s,
                start_time_s,
            } => {
                let s = traverse_speed_m_s * (t_s - start_time_s).max(0.0);
                base_m
                    - amplitude_m * (std::f64::consts::TAU * s / wavelength_m).sin()
            }
        }
    }
}

/// Elastic contact environment.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Environment {
    /// Contact stiffness (N/m).
    pub c_env_n_per_m: f64,
    pub surface: SurfaceMotion,
    /// Unilateral contact transmits force only in compression; bilateral
    /// keeps the linear law through separation (linear-analysis mode).
    pub unilateral: bool,
}

impl Environment {
    /// Contact force (N) on the tool for a tool position (m) at time t;
    /// positive force opposes penetration.
    pub fn contact_force_n(&self, x_p_m: f64, t_s: f64) -> f64 {
        let pen = x_p_m - self.surface.position_at(t_s);
        if self.unilateral {
            self.c_env_n_per_m * pen.max(0.0)
        } else {
            self.c_env_n_per_m * pen
        }
    }

    /// Penetration depth (m), positive when pressing.
    pub fn penetration_m(&self, x_p_m: f64, t_s: f64) -> f64 {
        x_p_m - self.surface.position_at(t_s)
    }
}

/// World-frame state of the coupled system. The active-axis lag has no
/// separate internal state: it acts on the carriage velocity relative to the
/// flange, `v_a - v_r`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlantState {
    /// Active carriage position (m).
    pub x_a_m: f64,
    /// Active carriage velocity (m/s).
    pub v_a_m_s: f64,
    /// Tool (passive mass) position (m).
    pub x_p_m: f64,
    /// Tool velocity (m/s).
    pub v_p_m_s: f64,
    /// Robot flange position (m).
    pub x_r_m: f64,
    /// Robot flange velocity (m/s).
    pub v_r_m_s: f64,
    /// Simulation time (s).
    pub t_s: f64,
}

impl PlantState {
    /// Everything co-located at `x_m`, at rest, at time zero.
    pub fn resting(x_m: f64) -> Self {
        Self {
            x_a_m: x_m,
            v_a_m_s: 0.0,
            x_p_m: x_m,
            v_p_m_s: 0.0,
            x_r_m: x_m,
            v_r_m_s: 0.0,
            t_s: 0.0,
        }
    }

    fn as_array(&self) -> [f64; 6] {
        [
            self.x_a_m,
            self.v_a_m_s,
            self.x_p_m,
            self.v_p_m_s,
            self.x_r_m,
            self.v_r_m_s,
        ]
    }

    fn with_array(&self, y: [f64; 6], t_s: f64) -> Self {
        Self {
            x_a_m: y[0],
            v_a_m_s: y[1],
            x_p_m: y[2],
            v_p_m_s: y[3],
            x_r_m: y[4],
            v_r_m_s: y[5],
            t_s,
        }
    }
}

/// Time derivative of [`PlantState`]; accelerations are derived quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantDerivatives {
    pub x_a_dot: f64,
    pub v_a_dot: f64,
    pub x_p_dot: f64,
    pub v_p_dot: f64,
    pub x_r_dot: f64,
    pub v_r_dot: f64,
}

impl PlantDerivatives {
    fn as_array(&self) -> [f64; 6] {
        [
            self.x_a_dot,
            self.v_a_dot,
            self.x_p_dot,
            self.v_p_dot,
            self.x_r_dot,
            self.v_r_dot,
        ]
    }
}

/// Divergence guard: any state beyond this magnitude aborts the run.
const DIVERGENCE_LIMIT: f64 = 1.0e9;

/// Full parameter set of the coupled model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlantConfig {
    /// Tool-side passive mass including payload (kg).
    pub m_p_kg: f64,
    /// Coupling damping between carriage and tool (N s/m).
    pub d_n_s_per_m: f64,
    pub spring: SpringModel,
    pub motor: MotorModel,
    pub robot: RobotSurrogate,
    pub env: Environment,
    /// Fixed integrator step (s).
    pub dt_sim_s: f64,
    /// Tool bolted rigidly to the flange (no active axis, no flexure); the
    /// compliant stage is bypassed and contact happens at the flange position.
    pub rigid_tool: bool,
    /// Travel limit of the tool relative to the flange (m); soft stops
    /// engage beyond it.
    pub travel_half_stroke_m: f64,
    /// Stop stiffness (N/m).
    pub stop_stiffness_n_per_m: f64,
}

impl PlantConfig {
    /// Checks parameter signs and that the step resolves the fastest model
    /// corner frequency at least ten times over.
    pub fn validate(&self) -> Result<()> {
        if !(self.m_p_kg > 0.0) {
            return Err(Error::Configuration("passive mass must be positive".into()));
        }
        if self.d_n_s_per_m < 0.0 {
            return Err(Error::Configuration("damping must be non-negative".into()));
        }
        self.spring.validate()?;
        if !(self.motor.k_m > 0.0 && self.motor.t_m_s > 0.0) {
            return Err(Error::Configuration("motor parameters must be positive".into()));
        }
        if !(self.robot.k_r > 0.0 && self.robot.t_r_s > 0.0) {
            return Err(Error::Configuration("robot parameters must be positive".into()));
        }
        if self.env.c_env_n_per_m < 0.0 {
            return Err(Error::Configuration(
                "contact stiffness must be non-negative".into(),
            ));
        }
        if !(self.dt_sim_s > 0.0) {
            return Err(Error::Configuration("dt_sim must be positive".into()));
        }
        if !(self.travel_half_stroke_m > 0.0) {
            return Err(Error::Configuration("half stroke must be positive".into()));
        }
        if self.stop_stiffness_n_per_m < 0.0 {
            return Err(Error::Configuration(
                "stop stiffness must be non-negative".into(),
            ));
        }
        let dt_max = 1.0 / (10.0 * self.max_corner_frequency_hz());
        if self.dt_sim_s > dt_max {
            return Err(Error::Configuration(format!(
                "dt_sim = {} s does not resolve the fastest corner frequency; need <= {:.3e} s",
                self.dt_sim_s, dt_max
            )));
        }
        Ok(())
    }

    /// Largest corner frequency (Hz) among the lags, the stiffest contact
    /// resonance, and the stop engagement resonance.
    pub fn max_corner_frequency_hz(&self) -> f64 {
        let tau = std::f64::consts::TAU;
        let c_max = self.spring.stage_stiffness_si(SpringStage::Two);
        let f_spring = ((c_max + self.env.c_env_n_per_m) / self.m_p_kg).sqrt() / tau;
        let f_stop = if self.stop_stiffness_n_per_m > 0.0 {
            (self.stop_stiffness_n_per_m / self.m_p_kg).sqrt() / tau
        } else {
            0.0
        };
        [
            1.0 / (tau * self.motor.t_m_s),
            1.0 / (tau * self.robot.t_r_s),
            f_spring,
            f_stop,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Signed soft-stop force (N) for a tool offset relative to the flange;
    /// positive pushes the tool back toward the robot.
    fn stop_force_n(&self, rel_m: f64) -> f64 {
        let h = self.travel_half_stroke_m;
        if rel_m > h {
            self.stop_stiffness_n_per_m * (rel_m - h)
        } else if rel_m < -h {
            self.stop_stiffness_n_per_m * (rel_m + h)
        } else {
            0.0
        }
    }

    /// Spring force transmitted to the tool (N), positive toward the
    /// environment; this equals the deflection-inferred force a series
    /// elastic sensor reports.
    pub fn spring_force_on_tool_n(&self, state: &PlantState) -> f64 {
        if self.rigid_tool {
            0.0
        } else {
            self.spring.force_si(state.x_a_m - state.x_p_m)
        }
    }

    /// Contact force (N) at the current state.
    pub fn contact_force_n(&self, state: &PlantState) -> f64 {
        self.env.contact_force_n(state.x_p_m, state.t_s)
    }

    /// Equations of motion under held velocity commands `u_motor` (active
    /// axis, relative to the flange) and `u_robot` (flange).
    pub fn derivatives(
        &self,
        state: &PlantState,
        u_motor_m_s: f64,
        u_robot_m_s: f64,
    ) -> PlantDerivatives {
        self.derivatives_at(state, u_motor_m_s, u_robot_m_s, state.t_s)
    }

    fn derivatives_at(
        &self,
        state: &PlantState,
        u_motor_m_s: f64,
        u_robot_m_s: f64,
        t_s: f64,
    ) -> PlantDerivatives {
        let v_r_dot = (self.robot.k_r * u_robot_m_s - state.v_r_m_s) / self.robot.t_r_s;
        if self.rigid_tool {
            // carriage and tool mirror the flange exactly
            return PlantDerivatives {
                x_a_dot: state.v_r_m_s,
                v_a_dot: v_r_dot,
                x_p_dot: state.v_r_m_s,
                v_p_dot: v_r_dot,
                x_r_dot: state.v_r_m_s,
                v_r_dot,
            };
        }
        let w = state.v_a_m_s - state.v_r_m_s;
        let v_a_dot = v_r_dot + (self.motor.k_m * u_motor_m_s - w) / self.motor.t_m_s;
        let f_spring = self.spring.force_si(state.x_a_m - state.x_p_m);
        let f_contact = self.env.contact_force_n(state.x_p_m, t_s);
        let f_stop = self.stop_force_n(state.x_p_m - state.x_r_m);
        let v_p_dot = (f_spring
            - self.d_n_s_per_m * (state.v_p_m_s - state.v_a_m_s)
            - f_contact
            - f_stop)
            / self.m_p_kg;
        PlantDerivatives {
            x_a_dot: state.v_a_m_s,
            v_a_dot,
            x_p_dot: state.v_p_m_s,
            v_p_dot,
            x_r_dot: state.v_r_m_s,
            v_r_dot,
        }
    }

    /// Advances one fixed step with classical fourth-order Runge-Kutta under
    /// held (zero-order) velocity commands.
    pub fn step(
        &self,
        state: &PlantState,
        u_motor_m_s: f64,
        u_robot_m_s: f64,
    ) -> Result<PlantState> {
        let dt = self.dt_sim_s;
        let t = state.t_s;
        let y0 = state.as_array();

        let eval = |y: [f64; 6], at: f64| -> [f64; 6] {
            let s = state.with_array(y, at);
            self.derivatives_at(&s, u_motor_m_s, u_robot_m_s, at)
                .as_array()
        };
        let add = |y: [f64; 6], k: [f64; 6], h: f64| -> [f64; 6] {
            let mut out = y;
            for i in 0..6 {
                out[i] += h * k[i];
            }
            out
        };

        let k1 = eval(y0, t);
        let k2 = eval(add(y0, k1, 0.5 * dt), t + 0.5 * dt);
        let k3 = eval(add(y0, k2, 0.5 * dt), t + 0.5 * dt);
        let k4 = eval(add(y0, k3, dt), t + dt);

        let mut y = y0;
        for i in 0..6 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !y[i].is_finite() || y[i].abs() > DIVERGENCE_LIMIT {
                return Err(Error::SimulationDiverged { t_s: t + dt });
            }
        }
        Ok(state.with_array(y, t + dt))
    }

    /// LTI blocks of the model linearized at one spring stage, with the
    /// contact stiffness included only when in contact.
    pub fn linearize(&self, stage: SpringStage, in_contact: bool) -> Result<LinearizedModels> {
        let c = self.spring.stage_stiffness_si(stage);
        let c_env = if in_contact { self.env.c_env_n_per_m } else { 0.0 };
        let d = self.d_n_s_per_m;
        let m = self.m_p_kg;
        Ok(LinearizedModels {
            g_m: TransferFunction::first_order(self.motor.k_m, self.motor.t_m_s)?,
            g_arcc: TransferFunction::new(vec![d, c], vec![m, d, c + c_env])?,
            g_env: TransferFunction::gain(c_env),
            g_r: TransferFunction::first_order(self.robot.k_r, self.robot.t_r_s)?,
        })
    }

    /// Mechanical energy (J) of the unforced spring-mass pair: tool kinetic
    /// energy plus elastic energy at the current deflection.
    pub fn mechanical_energy_j(&self, state: &PlantState) -> f64 {
        0.5 * self.m_p_kg * state.v_p_m_s * state.v_p_m_s
            + self.spring.energy_j(state.x_p_m - state.x_a_m)
    }
}

/// Linearized transfer-function set: active-axis lag `g_m`, carriage-to-tool
/// compliance `g_arcc`, contact gain `g_env`, robot lag `g_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedModels {
    pub g_m: TransferFunction,
    pub g_arcc: TransferFunction,
    pub g_env: TransferFunction,
    pub g_r: TransferFunction,
}

/// One recorded sample of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TrajectoryPoint {
    pub t_s: f64,
    pub x_a_m: f64,
    pub v_a_m_s: f64,
    pub x_p_m: f64,
    pub v_p_m_s: f64,
    pub x_r_m: f64,
    pub v_r_m_s: f64,
    pub f_spring_n: f64,
    pub f_contact_n: f64,
}

impl TrajectoryPoint {
    pub fn capture(config: &PlantConfig, state: &PlantState) -> Self {
        Self {
            t_s: state.t_s,
            x_a_m: state.x_a_m,
            v_a_m_s: state.v_a_m_s,
            x_p_m: state.x_p_m,
            v_p_m_s: state.v_p_m_s,
            x_r_m: state.x_r_m,
            v_r_m_s: state.v_r_m_s,
            f_spring_n: config.spring_force_on_tool_n(state),
            f_contact_n: config.contact_force_n(state),
        }
    }
}

/// Write trajectory samples as CSV with 9-significant-digit fields.
pub fn write_trajectory_csv<W: Write>(mut w: W, points: &[TrajectoryPoint]) -> Result<()> {
    writeln!(w, "t,x_a,v_a,x_p,v_p,x_r,v_r,f_spring,f_contact")?;
    for p in points {
        writeln!(
            w,
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            p.t_s,
            p.x_a_m,
            p.v_a_m_s,
            p.x_p_m,
            p.v_p_m_s,
            p.x_r_m,
            p.v_r_m_s,
            p.f_spring_n,
            p.f_contact_n
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear_config(c_n_per_mm: f64) -> PlantConfig {
        PlantConfig {
            m_p_kg: 1.0,
            d_n_s_per_m: 0.0,
            spring: SpringModel::Linear { c_n_per_mm },
            motor: MotorModel::new(1.0, 1.0 / (std::f64::consts::TAU * 100.0)).unwrap(),
            robot: RobotSurrogate::new(1.0, 0.0884).unwrap(),
            env: Environment {
                c_env_n_per_m: 0.0,
                surface: SurfaceMotion::Static { position_m: 1.0 },
                unilateral: true,
            },
            dt_sim_s: 1.0e-4,
            rigid_tool: false,
            travel_half_stroke_m: 0.1,
            stop_stiffness_n_per_m: 0.0,
        }
    }

    fn two_stage() -> TwoStageSpring {
        TwoStageSpring::new(5.0 / 0.6439, 40.0 / 1.499, 1.41).unwrap()
    }

    #[test]
    fn spring_anchor_points_are_reproduced() {
        let s = two_stage();
        assert!((s.force_n(0.6439) - 5.0).abs() < 1.0e-12);
        let delta = s.force_n(s.x_t_mm + 1.499) - s.force_n(s.x_t_mm);
        assert!((delta - 40.0).abs() < 1.0e-12);
        // transition force lands near 11 N
        assert!((s.transition_force_n() - 10.95).abs() < 0.01);
    }

    #[test]
    fn spring_force_is_continuous_at_the_transition() {
        let s = two_stage();
        let eps = 1.0e-12;
        let jump = (s.force_n(s.x_t_mm + eps) - s.force_n(s.x_t_mm - eps)).abs();
        assert!(jump < 1.0e-10, "jump = {jump}");
    }

    #[test]
    fn spring_force_is_odd() {
        let s = SpringModel::TwoStage(two_stage());
        for x in [0.0, 0.3, 1.0, 1.41, 2.0, 5.0] {
            assert_relative_eq!(s.force_n(-x), -s.force_n(x), max_relative = 1e-14);
        }
    }

    #[test]
    fn one_sided_spring_stays_in_stage_one_below_zero() {
        let mut s = two_stage();
        s.symmetric = false;
        assert_relative_eq!(s.force_n(-3.0), -3.0 * s.c1_n_per_mm, max_relative = 1e-14);
    }

    #[test]
    fn spring_constructor_rejects_soft_second_stage() {
        assert!(TwoStageSpring::new(10.0, 5.0, 1.0).is_err());
        assert!(TwoStageSpring::new(-1.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn deflection_inverse_round_trips_both_stages() {
        let s = SpringModel::TwoStage(two_stage());
        for f in [0.0, 2.0, 5.0, 10.95, 20.0, 50.0] {
            let x = s.deflection_for_force_mm(f).unwrap();
            assert_relative_eq!(s.force_n(x), f, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn unilateral_contact_only_pushes() {
        let env = Environment {
            c_env_n_per_m: 2.0e4,
            surface: SurfaceMotion::Static { position_m: 0.0 },
            unilateral: true,
        };
        assert_eq!(env.contact_force_n(-1.0e-3, 0.0), 0.0);
        assert_relative_eq!(env.contact_force_n(0.5e-3, 0.0), 10.0, max_relative = 1e-12);
        let bilateral = Environment {
            unilateral: false,
            ..env
        };
        assert_relative_eq!(
            bilateral.contact_force_n(-0.5e-3, 0.0),
            -10.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn tool_acceleration_matches_hand_calculation() {
        // carriage 1 mm ahead of the tool, 10 N/mm spring, nothing else
        let cfg = linear_config(10.0);
        let mut state = PlantState::resting(0.0);
        state.x_a_m = 1.0e-3;
        let d = cfg.derivatives(&state, 0.0, 0.0);
        assert_relative_eq!(d.v_p_dot, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn equilibrium_state_has_zero_derivative() {
        let cfg = linear_config(10.0);
        let d = cfg.derivatives(&PlantState::resting(0.0), 0.0, 0.0);
        for v in d.as_array() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn spring_balancing_contact_gives_static_tool() {
        // tool penetrates 0.1 mm into a 1e5 N/m surface at the origin; the
        // carriage backs the tool with exactly the matching spring force
        let mut cfg = linear_config(10.0);
        cfg.env.c_env_n_per_m = 1.0e5;
        cfg.env.surface = SurfaceMotion::Static { position_m: 0.0 };
        let pen = 1.0e-4;
        let f_contact = 1.0e5 * pen;
        let defl = cfg
            .spring
            .deflection_for_force_mm(f_contact)
            .unwrap()
            * 1.0e-3;
        let mut state = PlantState::resting(0.0);
        state.x_p_m = pen;
        state.x_a_m = pen + defl;
        let d = cfg.derivatives(&state, 0.0, 0.0);
        assert!(d.v_p_dot.abs() < 1.0e-9, "v_p_dot = {}", d.v_p_dot);
    }

    #[test]
    fn free_oscillation_returns_after_one_period() {
        // 1 kg on a 10 N/mm spring: x_p(t) = cos(100 t) mm
        let period = std::f64::consts::TAU / 100.0;
        let steps = 628usize;
        let mut cfg = linear_config(10.0);
        cfg.dt_sim_s = period / steps as f64;
        let mut state = PlantState::resting(0.0);
        state.x_p_m = 1.0e-3;
        for _ in 0..steps {
            state = cfg.step(&state, 0.0, 0.0).unwrap();
        }
        assert!((state.x_p_m - 1.0e-3).abs() < 1.0e-9);
        assert!(state.v_p_m_s.abs() < 1.0e-5);
    }

    #[test]
    fn energy_drift_stays_tiny_over_ten_thousand_steps() {
        let mut cfg = linear_config(10.0);
        cfg.dt_sim_s = 1.0e-4;
        let mut state = PlantState::resting(0.0);
        state.x_p_m = 1.0e-3;
        let e0 = cfg.mechanical_energy_j(&state);
        let mut worst = 0.0_f64;
        for _ in 0..10_000 {
            state = cfg.step(&state, 0.0, 0.0).unwrap();
            worst = worst.max((cfg.mechanical_energy_j(&state) - e0).abs() / e0);
        }
        assert!(worst < 1.0e-6, "relative drift {worst}");
    }

    fn two_stage_drift(amplitude_m: f64) -> f64 {
        let mut cfg = linear_config(10.0);
        cfg.spring = SpringModel::TwoStage(two_stage());
        cfg.dt_sim_s = 1.0e-4;
        let mut state = PlantState::resting(0.0);
        state.x_p_m = amplitude_m;
        let e0 = cfg.mechanical_energy_j(&state);
        let mut worst = 0.0_f64;
        for _ in 0..10_000 {
            state = cfg.step(&state, 0.0, 0.0).unwrap();
            worst = worst.max((cfg.mechanical_energy_j(&state) - e0).abs() / e0);
        }
        worst
    }

    #[test]
    fn energy_drift_with_two_stage_spring_stays_tiny() {
        // amplitude just past the transition exercises both stages; the
        // integrator keeps full accuracy while crossing velocities are low
        let worst = two_stage_drift(1.45e-3);
        assert!(worst < 1.0e-6, "relative drift {worst}");
    }

    #[test]
    fn deep_stage_two_oscillation_loses_bounded_accuracy() {
        // the force law is only C0 at the transition, so fast crossings cost
        // local order; the drift must still stay far below engineering noise
        let worst = two_stage_drift(2.5e-3);
        assert!(worst < 1.0e-4, "relative drift {worst}");
    }

    #[test]
    fn halving_dt_shrinks_error_at_fourth_order() {
        // smooth damped run under constant commands; endpoint Richardson ratio
        let run = |dt: f64| -> PlantState {
            let mut cfg = linear_config(10.0);
            cfg.d_n_s_per_m = 20.0;
            cfg.dt_sim_s = dt;
            let mut state = PlantState::resting(0.0);
            state.x_p_m = 1.0e-3;
            let steps = (0.5 / dt).round() as usize;
            for _ in 0..steps {
                state = cfg.step(&state, 0.02, 0.01).unwrap();
            }
            state
        };
        let norm = |a: &PlantState, b: &PlantState| -> f64 {
            let (ya, yb) = (a.as_array(), b.as_array());
            ya.iter()
                .zip(yb.iter())
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        };
        let y1 = run(2.0e-4);
        let y2 = run(1.0e-4);
        let y3 = run(0.5e-4);
        let ratio = norm(&y1, &y2) / norm(&y2, &y3);
        assert!(
            (12.0..=20.0).contains(&ratio),
            "convergence ratio {ratio} outside [12, 20]"
        );
    }

    #[test]
    fn motor_step_response_matches_first_order_law() {
        let cfg = linear_config(10.0);
        let t_m = cfg.motor.t_m_s;
        let mut cfg = cfg;
        cfg.dt_sim_s = t_m / 2000.0;
        let mut state = PlantState::resting(0.0);
        let steps = 2000usize;
        for _ in 0..steps {
            state = cfg.step(&state, 1.0, 0.0).unwrap();
        }
        // carriage velocity after one time constant
        let expected = cfg.motor.k_m * (1.0 - (-1.0_f64).exp());
        assert_relative_eq!(state.v_a_m_s, expected, max_relative = 1e-6);
    }

    #[test]
    fn rigid_tool_mirrors_the_flange() {
        let mut cfg = linear_config(10.0);
        cfg.rigid_tool = true;
        let mut state = PlantState::resting(0.0);
        for _ in 0..5000 {
            state = cfg.step(&state, 0.3, 0.05).unwrap();
        }
        assert_eq!(state.x_p_m, state.x_r_m);
        assert_eq!(state.v_p_m_s, state.v_r_m_s);
        assert!(state.x_r_m > 1.0e-4);
        assert_eq!(cfg.spring_force_on_tool_n(&state), 0.0);
    }

    #[test]
    fn runaway_command_is_reported_as_divergence() {
        let cfg = linear_config(10.0);
        let mut state = PlantState::resting(0.0);
        let mut diverged = false;
        for _ in 0..100 {
            match cfg.step(&state, 1.0e12, 0.0) {
                Ok(s) => state = s,
                Err(Error::SimulationDiverged { t_s }) => {
                    assert!(t_s > 0.0);
                    diverged = true;
                    break;
                }
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
        assert!(diverged);
    }

    #[test]
    fn soft_stop_pushes_back_beyond_the_stroke() {
        let mut cfg = linear_config(10.0);
        cfg.travel_half_stroke_m = 1.0e-3;
        cfg.stop_stiffness_n_per_m = 1.0e6;
        let mut state = PlantState::resting(0.0);
        state.x_p_m = 1.5e-3;
        let d = cfg.derivatives(&state, 0.0, 0.0);
        // spring pulls back (tool ahead of carriage) and the stop adds more
        let spring_only = -cfg.spring.force_si(1.5e-3) / cfg.m_p_kg;
        assert!(d.v_p_dot < spring_only);
    }

    #[test]
    fn linearization_blocks_have_the_documented_structure() {
        let mut cfg = linear_config(10.0);
        cfg.spring = SpringModel::TwoStage(two_stage());
        cfg.env.c_env_n_per_m = 1.0e5;
        cfg.d_n_s_per_m = 26.0;

        let free = cfg.linearize(SpringStage::One, false).unwrap();
        let c1 = cfg.spring.stage_stiffness_si(SpringStage::One);
        assert_relative_eq!(free.g_arcc.den[2], c1, max_relative = 1e-14);
        assert_relative_eq!(free.g_arcc.dc_gain().unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(free.g_env.dc_gain().unwrap(), 0.0, epsilon = 1e-14);

        let contact = cfg.linearize(SpringStage::Two, true).unwrap();
        let c2 = cfg.spring.stage_stiffness_si(SpringStage::Two);
        assert_relative_eq!(
            contact.g_arcc.den[2],
            c2 + 1.0e5,
            max_relative = 1e-14
        );
        assert_relative_eq!(contact.g_env.dc_gain().unwrap(), 1.0e5, max_relative = 1e-14);
    }

    #[test]
    fn small_signal_simulation_tracks_the_linear_model() {
        // velocity step on the active axis; tool position must match the
        // sampled response of the linearized compliance in the linear regime
        let mut cfg = linear_config(10.0);
        cfg.d_n_s_per_m = 26.0;
        cfg.env.c_env_n_per_m = 1.0e5;
        cfg.env.surface = SurfaceMotion::Static { position_m: 0.0 };
        cfg.env.unilateral = false;
        cfg.dt_sim_s = 1.0e-4;

        let u = 1.0e-4;
        let mut state = PlantState::resting(0.0);
        let mut xa = Vec::new();
        let mut xp = Vec::new();
        let steps = 4000usize;
        for _ in 0..steps {
            xa.push(state.x_a_m);
            xp.push(state.x_p_m);
            state = cfg.step(&state, u, 0.0).unwrap();
        }

        let g = cfg.linearize(SpringStage::One, true).unwrap().g_arcc;
        let dss = g
            .to_state_space()
            .unwrap()
            .discretize_zoh(cfg.dt_sim_s)
            .unwrap();
        let xp_lin = dss.simulate(&xa).unwrap();

        let scale = xp
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in (steps / 100..steps).step_by(steps / 100) {
            let err = (xp[i] - xp_lin[i]).abs() / scale;
            assert!(err < 0.01, "sample {i}: relative error {err}");
        }
    }

    #[test]
    fn moving_surface_produces_the_programmed_wave() {
        let wave = SurfaceMotion::ContourWave {
            base_m: 0.0,
            amplitude_m: 2.5e-3,
            wavelength_m: 65.0e-3,
            traverse_speed_m_s: 5.0e-3,
            start_time_s: 1.0,
        };
        assert_eq!(wave.position_at(0.0), 0.0);
        assert_eq!(wave.position_at(1.0), 0.0);
        // quarter wavelength into the traverse the bump peaks toward the tool
        let t_quarter = 1.0 + 0.25 * 65.0e-3 / 5.0e-3;
        assert_relative_eq!(wave.position_at(t_quarter), -2.5e-3, max_relative = 1e-10);
    }

    #[test]
    fn trajectory_csv_uses_the_pinned_header() {
        let cfg = linear_config(10.0);
        let state = PlantState::resting(0.0);
        let points = vec![TrajectoryPoint::capture(&cfg, &state)];
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &points).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x_a,v_a,x_p,v_p,x_r,v_r,f_spring,f_contact\n"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn config_validation_rejects_coarse_steps() {
        let mut cfg = linear_config(10.0);
        cfg.dt_sim_s = 0.1;
        assert!(matches!(cfg.validate(), Err(Error::Configuration(_))));
        cfg.dt_sim_s = 1.0e-4;
        assert!(cfg.validate().is_ok());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn spring_is_continuous_and_monotone(
                c1 in 0.5_f64..20.0,
                extra in 0.1_f64..40.0,
                x_t in 0.2_f64..3.0,
                x in -6.0_f64..6.0,
            ) {
                let s = TwoStageSpring::new(c1, c1 + extra, x_t).unwrap();
                let eps = 1.0e-9;
                let df = s.force_n(x + eps) - s.force_n(x - eps);
                prop_assert!(df >= 0.0);
                prop_assert!(df <= (c1 + extra) * 2.1 * eps);
                prop_assert!((s.force_n(-x) + s.force_n(x)).abs() < 1e-9);
            }

            #[test]
            fn unilateral_contact_is_never_negative(
                pen in -5.0e-3_f64..5.0e-3,
                c_env in 0.0_f64..1.0e6,
            ) {
                let env = Environment {
                    c_env_n_per_m: c_env,
                    surface: SurfaceMotion::Static { position_m: 0.0 },
                    unilateral: true,
                };
                prop_assert!(env.contact_force_n(pen, 0.0) >= 0.0);
            }

            #[test]
            fn time_never_decreases_across_steps(
                x0 in -1.0e-3_f64..1.0e-3,
                u in -0.01_f64..0.01,
            ) {
                let cfg = linear_config(10.0);
                let mut state = PlantState::resting(0.0);
                state.x_p_m = x0;
                for _ in 0..50 {
                    let next = cfg.step(&state, u, 0.0).unwrap();
                    prop_assert!(next.t_s > state.t_s);
                    state = next;
                }
            }
        }
    }
}
