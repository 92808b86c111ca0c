//! Controllers and loop-level analysis: classical PI tuning rules for the
//! servo cascade, the stiffness (compliance) force law, robot-side position
//! compensation, the combined two-branch controller, and the discrete
//! stability-margin gain search used to place the compliance gains.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::StateSpace;
use crate::plant::MotorModel;

/// Proportional-integral gains of one cascade loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PIGains {
    /// Proportional gain (loop-specific unit).
    pub kp: f64,
    /// Integral time constant (s).
    pub ti_s: f64,
}

/// Magnitude-optimum PI tuning for a plant `K / ((T1 s + 1)(Ts s + 1))` with
/// dominant time constant `T1` and lumped parasitic `Ts`: the dominant pole
/// is cancelled and the closed loop lands at damping 1/sqrt(2).
pub fn tune_pi_magnitude_optimum(
    plant_gain: f64,
    dominant_t_s: f64,
    parasitic_t_s: f64,
) -> Result<PIGains> {
    if !(parasitic_t_s > 0.0 && dominant_t_s > parasitic_t_s) {
        return Err(Error::InvalidParameter(format!(
            "magnitude optimum needs dominant_t > parasitic_t > 0, got ({dominant_t_s}, {parasitic_t_s})"
        )));
    }
    if !(plant_gain > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "plant gain must be positive, got {plant_gain}"
        )));
    }
    Ok(PIGains {
        kp: dominant_t_s / (2.0 * plant_gain * parasitic_t_s),
        ti_s: dominant_t_s,
    })
}

/// Symmetric-optimum PI tuning for an integrating plant
/// `K / (s (Ts s + 1))`; `a` spaces the controller zero below crossover.
pub fn tune_pi_symmetric_optimum(plant_gain: f64, parasitic_t_s: f64, a: f64) -> Result<PIGains> {
    if !(parasitic_t_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "parasitic time constant must be positive, got {parasitic_t_s}"
        )));
    }
    if !(a > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "symmetric-optimum spacing must exceed 1, got {a}"
        )));
    }
    if !(plant_gain > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "plant gain must be positive, got {plant_gain}"
        )));
    }
    Ok(PIGains {
        kp: 1.0 / (a * plant_gain * parasitic_t_s),
        ti_s: a * a * parasitic_t_s,
    })
}

/// Stiffness (compliance) force controller: commands a velocity proportional
/// to the force error through the compliance gain.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StiffnessController {
    /// Compliance gain, reciprocal of the commanded stiffness (m/(N s)).
    pub compliance_m_per_n_s: f64,
    /// Force setpoint (N).
    pub f_des_n: f64,
}

impl StiffnessController {
    pub fn new(compliance_m_per_n_s: f64, f_des_n: f64) -> Result<Self> {
        if !(compliance_m_per_n_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "compliance gain must be positive, got {compliance_m_per_n_s}"
            )));
        }
        Ok(Self {
            compliance_m_per_n_s,
            f_des_n,
        })
    }

    /// Desired velocity (m/s) for a measured force (N); pure and stateless.
    pub fn stiffness_command(&self, f_act_n: f64) -> f64 {
        self.compliance_m_per_n_s * (self.f_des_n - f_act_n)
    }
}

/// Reduces a critical gain by the 10% safety margin used when placing
/// operating gains.
pub fn apply_safety_reduction(critical_gain: f64) -> Result<f64> {
    if !(critical_gain > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "critical gain must be positive, got {critical_gain}"
        )));
    }
    Ok(0.9 * critical_gain)
}

/// Robot-side proportional centering law. `x_p_act_m` is the measured
/// deflection of the compliant stage, compression-positive (tool pushed back
/// toward the flange reads positive). Output is saturated to the robot
/// velocity limit.
pub fn position_compensation(x_p_act_m: f64, k_pc_per_s: f64, v_limit_m_s: f64) -> f64 {
    (-k_pc_per_s * x_p_act_m).clamp(-v_limit_m_s, v_limit_m_s)
}

/// Position-compensation branch parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PositionCompensation {
    /// Proportional centering gain (1/s).
    pub k_pc_per_s: f64,
}

/// Two-branch loop configuration. Exactly one force path must be present:
/// the active branch (`arcc`) for configurations with the servo axis, or the
/// robot branch (`robot_force`) when the robot itself closes the force loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HybridLoopConfig {
    pub arcc: Option<StiffnessController>,
    pub robot_force: Option<StiffnessController>,
    pub compensation: Option<PositionCompensation>,
    /// Center setpoint for the compensated deflection (m).
    pub x_center_m: f64,
    /// Active-axis velocity limit (m/s).
    pub arcc_v_limit_m_s: f64,
    /// Robot velocity limit (m/s).
    pub robot_v_limit_m_s: f64,
    /// Active branch sample time (s).
    pub dt_ctrl_arcc_s: f64,
    /// Robot branch sample time (s).
    pub dt_ctrl_robot_s: f64,
}

impl HybridLoopConfig {
    pub fn validate(&self, dt_sim_s: f64) -> Result<()> {
        if self.arcc.is_none() && self.robot_force.is_none() {
            return Err(Error::Configuration(
                "no active force path: need a stiffness controller on the active axis or the robot".into(),
            ));
        }
        if self.arcc.is_some() && self.robot_force.is_some() {
            return Err(Error::Configuration(
                "both force paths configured on one axis; pick one".into(),
            ));
        }
        for (name, dt) in [
            ("active branch", self.dt_ctrl_arcc_s),
            ("robot branch", self.dt_ctrl_robot_s),
        ] {
            if !(dt >= dt_sim_s) {
                return Err(Error::Configuration(format!(
                    "{name} sample time {dt} s must be at least the simulation step {dt_sim_s} s"
                )));
            }
            let ratio = dt / dt_sim_s;
            if (ratio - ratio.round()).abs() > 1.0e-9 * ratio {
                return Err(Error::Configuration(format!(
                    "{name} sample time {dt} s is not an integer multiple of the simulation step {dt_sim_s} s"
                )));
            }
        }
        if !(self.arcc_v_limit_m_s > 0.0 && self.robot_v_limit_m_s > 0.0) {
            return Err(Error::Configuration("velocity limits must be positive".into()));
        }
        Ok(())
    }
}

/// Measurements available to the controller at a sample instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    /// Force fed to the active force path (N): deflection-inferred spring
    /// force for configurations with the elastic axis, contact-sensor force
    /// otherwise.
    pub force_n: f64,
    /// Compliant-stage deflection (m), compression-positive.
    pub deflection_m: f64,
}

/// Sampled two-branch controller holding its outputs between ticks.
#[derive(Debug, Clone)]
pub struct HybridController {
    cfg: HybridLoopConfig,
    steps_per_arcc_tick: usize,
    steps_per_robot_tick: usize,
    u_motor_m_s: f64,
    u_robot_m_s: f64,
}

impl HybridController {
    pub fn new(cfg: HybridLoopConfig, dt_sim_s: f64) -> Result<Self> {
        cfg.validate(dt_sim_s)?;
        Ok(Self {
            cfg,
            steps_per_arcc_tick: (cfg.dt_ctrl_arcc_s / dt_sim_s).round() as usize,
            steps_per_robot_tick: (cfg.dt_ctrl_robot_s / dt_sim_s).round() as usize,
            u_motor_m_s: 0.0,
            u_robot_m_s: 0.0,
        })
    }

    pub fn config(&self) -> &HybridLoopConfig {
        &self.cfg
    }

    /// True when the robot branch samples at this simulation step.
    pub fn robot_tick(&self, step_index: usize) -> bool {
        step_index % self.steps_per_robot_tick == 0
    }

    /// True when the active branch samples at this simulation step.
    pub fn arcc_tick(&self, step_index: usize) -> bool {
        step_index % self.steps_per_arcc_tick == 0
    }

    /// Advances the controller at one simulation step and returns the held
    /// velocity commands `(u_motor, u_robot)`.
    pub fn update(
        &mut self,
        step_index: usize,
        meas: &Measurements,
        planner_ff_m_s: f64,
    ) -> (f64, f64) {
        if self.arcc_tick(step_index) {
            self.u_motor_m_s = match &self.cfg.arcc {
                Some(ctrl) => ctrl
                    .stiffness_command(meas.force_n)
                    .clamp(-self.cfg.arcc_v_limit_m_s, self.cfg.arcc_v_limit_m_s),
                None => 0.0,
            };
        }
        if self.robot_tick(step_index) {
            let mut u = planner_ff_m_s;
            if let Some(ctrl) = &self.cfg.robot_force {
                u += ctrl.stiffness_command(meas.force_n);
            }
            if self.cfg.arcc.is_some() {
                if let Some(pc) = &self.cfg.compensation {
                    u += position_compensation(
                        meas.deflection_m - self.cfg.x_center_m,
                        pc.k_pc_per_s,
                        self.cfg.robot_v_limit_m_s,
                    );
                }
            }
            self.u_robot_m_s = u.clamp(-self.cfg.robot_v_limit_m_s, self.cfg.robot_v_limit_m_s);
        }
        (self.u_motor_m_s, self.u_robot_m_s)
    }

    /// Currently held commands without advancing.
    pub fn held(&self) -> (f64, f64) {
        (self.u_motor_m_s, self.u_robot_m_s)
    }
}

/// Pole domain for stability judgement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopDomain {
    /// Poles are continuous-time; stable iff all real parts are negative.
    Continuous,
    /// Poles are discrete-time; stable iff all magnitudes are below one.
    Discrete,
}

impl LoopDomain {
    pub fn is_stable(&self, poles: &[Complex64]) -> bool {
        match self {
            LoopDomain::Continuous => poles.iter().all(|p| p.re < 0.0),
            LoopDomain::Discrete => poles.iter().all(|p| p.norm() < 1.0),
        }
    }
}

/// Outcome of the gain search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginOutcome {
    /// Gain at the stability boundary, located to 1e-6 relative.
    Critical { gain: f64 },
    /// No instability below 10^6 times the starting gain; the loop is
    /// gain-stable for practical purposes.
    GainStable { tested_up_to: f64 },
}

/// Relative gain tolerance of the margin bisection.
const MARGIN_REL_TOL: f64 = 1.0e-6;

/// Search factor cap before declaring the loop gain-stable.
const MARGIN_SEARCH_SPAN: f64 = 1.0e6;

/// Finds the smallest destabilizing loop gain by doubling from a stable
/// starting gain and geometric bisection; `poles_at` maps a candidate gain
/// to the closed-loop poles.
pub fn find_stability_margin_gain<F>(
    domain: LoopDomain,
    initial_gain: f64,
    mut poles_at: F,
) -> Result<MarginOutcome>
where
    F: FnMut(f64) -> Result<Vec<Complex64>>,
{
    if !(initial_gain > 0.0 && initial_gain.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "initial gain must be positive and finite, got {initial_gain}"
        )));
    }
    if !domain.is_stable(&poles_at(initial_gain)?) {
        return Err(Error::InvalidParameter(
            "loop is unstable at the initial gain; start lower".into(),
        ));
    }
    let mut lo = initial_gain;
    let mut hi = initial_gain;
    loop {
        hi *= 2.0;
        if hi / initial_gain > MARGIN_SEARCH_SPAN {
            return Ok(MarginOutcome::GainStable { tested_up_to: hi });
        }
        if !domain.is_stable(&poles_at(hi)?) {
            break;
        }
        lo = hi;
    }
    while (hi - lo) > MARGIN_REL_TOL * lo {
        let mid = (lo * hi).sqrt();
        if domain.is_stable(&poles_at(mid)?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MarginOutcome::Critical {
        gain: 0.5 * (lo + hi),
    })
}

/// One force loop prepared for the margin search: a continuous
/// command-to-force chain sampled at a control rate with a computational
/// delay of whole samples.
#[derive(Debug, Clone)]
pub struct MarginSetup {
    chain: StateSpace,
    discrete_chain: StateSpace,
    /// Control rate (Hz).
    pub rate_hz: f64,
    /// Computational delay in whole control samples.
    pub delay_samples: usize,
}

impl MarginSetup {
    pub fn new(chain: StateSpace, rate_hz: f64, delay_samples: usize) -> Result<Self> {
        if !(rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "control rate must be positive, got {rate_hz}"
            )));
        }
        let discrete_chain = chain.discretize_zoh(1.0 / rate_hz)?;
        Ok(Self {
            chain,
            discrete_chain,
            rate_hz,
            delay_samples,
        })
    }

    pub fn chain(&self) -> &StateSpace {
        &self.chain
    }

    /// Closed-loop state matrix at a candidate compliance gain: plant states
    /// followed by the delay line of past force outputs.
    pub fn closed_loop_matrix(&self, gain: f64) -> DMatrix<f64> {
        delayed_loop_matrix(&self.discrete_chain, gain, self.delay_samples)
    }

    /// Closed-loop discrete poles at a candidate gain.
    pub fn poles(&self, gain: f64) -> Result<Vec<Complex64>> {
        matrix_eigenvalues(&self.closed_loop_matrix(gain))
    }

    /// Runs the doubling-plus-bisection search from a small starting gain.
    pub fn critical_gain(&self, initial_gain: f64) -> Result<MarginOutcome> {
        find_stability_margin_gain(LoopDomain::Discrete, initial_gain, |g| self.poles(g))
    }
}

/// Closed-loop matrix of a discrete chain under proportional force feedback
/// `u[k] = -gain * y[k - delay]`; with zero delay the feedback uses the
/// current state output directly.
pub fn delayed_loop_matrix(dss: &StateSpace, gain: f64, delay_samples: usize) -> DMatrix<f64> {
    let n = dss.order();
    let k = delay_samples;
    let dim = n + k;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    // x[t+1] = A x[t] + B u[t], u[t] = -gain * y_delayed
    m.view_mut((0, 0), (n, n)).copy_from(&dss.a);
    if k == 0 {
        // u = -gain * C x  (plus feedthrough ignored: force chains here are
        // strictly proper)
        let feedback = &dss.b * (&dss.c * (-gain));
        let mut block = m.view_mut((0, 0), (n, n));
        block += feedback;
    } else {
        for i in 0..n {
            m[(i, n + k - 1)] = -gain * dss.b[i];
        }
        // delay line shifts: y1[t+1] = C x[t], y_{j+1}[t+1] = y_j[t]
        for j in 0..n {
            m[(n, j)] = dss.c[j];
        }
        for i in 1..k {
            m[(n + i, n + i - 1)] = 1.0;
        }
    }
    m
}

/// Eigenvalues via the real Schur decomposition, deterministically ordered.
pub fn matrix_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 100_000).ok_or(
        Error::EigenvalueFailure {
            residual: f64::INFINITY,
        },
    )?;
    let mut eigs: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });
    Ok(eigs)
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(matrix_eigenvalues(m)?
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max))
}

/// Iterates `x <- M x` from an all-ones state and returns the ratio of final
/// to initial infinity norm: decaying loops return values far below one,
/// diverging loops far above. Exits early once the ratio leaves
/// `[1e-12, 1e12]`, so marginal loops are the only expensive case.
pub fn discrete_response_growth(m: &DMatrix<f64>, steps: usize) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut x = DVector::<f64>::from_element(n, 1.0);
    let x0_norm = x.amax();
    for _ in 0..steps {
        x = m * &x;
        let ratio = x.amax() / x0_norm;
        if !ratio.is_finite() || ratio > 1.0e12 {
            return f64::INFINITY;
        }
        if ratio < 1.0e-12 {
            return ratio;
        }
    }
    x.amax() / x0_norm
}

/// Continuous command-to-force chain of the robot force loop: velocity lag
/// into position into contact stiffness. States `[v_r, x_r]`.
pub fn robot_force_chain(k_r: f64, t_r_s: f64, c_env_n_per_m: f64) -> Result<StateSpace> {
    if !(k_r > 0.0 && t_r_s > 0.0 && c_env_n_per_m > 0.0) {
        return Err(Error::InvalidParameter(
            "robot force chain needs positive gain, time constant, and contact stiffness".into(),
        ));
    }
    let a = DMatrix::from_row_slice(2, 2, &[-1.0 / t_r_s, 0.0, 1.0, 0.0]);
    let b = DVector::from_column_slice(&[k_r / t_r_s, 0.0]);
    let c = RowDVector::from_row_slice(&[0.0, c_env_n_per_m]);
    StateSpace::new(a, b, c, 0.0)
}

/// Continuous command-to-force chain of the active force loop in contact:
/// servo velocity lag driving the carriage, the elastic stage coupling to
/// the tool, the tool pressing the environment; the measured output is the
/// deflection-inferred spring force. States `[v_a, x_a, x_p, v_p]`.
pub fn arcc_force_chain(
    motor: &MotorModel,
    m_p_kg: f64,
    d_n_s_per_m: f64,
    c_spring_n_per_m: f64,
    c_env_n_per_m: f64,
) -> Result<StateSpace> {
    if !(m_p_kg > 0.0 && c_spring_n_per_m > 0.0) {
        return Err(Error::InvalidParameter(
            "active force chain needs positive tool mass and spring stiffness".into(),
        ));
    }
    if d_n_s_per_m < 0.0 || c_env_n_per_m < 0.0 {
        return Err(Error::InvalidParameter(
            "damping and contact stiffness must be non-negative".into(),
        ));
    }
    let (t_m, k_m) = (motor.t_m_s, motor.k_m);
    let (m, d, c, ce) = (m_p_kg, d_n_s_per_m, c_spring_n_per_m, c_env_n_per_m);
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            -1.0 / t_m, 0.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            d / m, c / m, -(c + ce) / m, -d / m,
        ],
    );
    let b = DVector::from_column_slice(&[k_m / t_m, 0.0, 0.0, 0.0]);
    let c_row = RowDVector::from_row_slice(&[0.0, c, -c, 0.0]);
    StateSpace::new(a, b, c_row, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::TransferFunction;
    use approx::assert_relative_eq;

    #[test]
    fn magnitude_optimum_matches_the_textbook_rule() {
        let g = tune_pi_magnitude_optimum(1.0, 0.1, 0.01).unwrap();
        assert_relative_eq!(g.kp, 5.0, max_relative = 1e-14);
        assert_relative_eq!(g.ti_s, 0.1, max_relative = 1e-14);
        // doubling the parasitic time constant halves the gain
        let g2 = tune_pi_magnitude_optimum(1.0, 0.1, 0.02).unwrap();
        assert_relative_eq!(g2.kp, 2.5, max_relative = 1e-14);
        assert!(tune_pi_magnitude_optimum(1.0, 0.01, 0.1).is_err());
    }

    #[test]
    fn magnitude_optimum_loop_shows_canonical_overshoot() {
        // with the dominant pole cancelled the closed loop is
        // 1 / (2 Ts^2 s^2 + 2 Ts s + 1): damping 0.707, overshoot e^-pi
        let ts = 0.01;
        let cl = TransferFunction::new(vec![1.0], vec![2.0 * ts * ts, 2.0 * ts, 1.0])
            .unwrap()
            .to_state_space()
            .unwrap()
            .discretize_zoh(1.0e-4)
            .unwrap();
        let y = cl.step_response(3000).unwrap();
        let peak = y.iter().fold(0.0_f64, |m, &v| m.max(v));
        let overshoot = peak - 1.0;
        assert!((0.03..=0.06).contains(&overshoot), "overshoot {overshoot}");
        assert_relative_eq!(overshoot, (-std::f64::consts::PI).exp(), max_relative = 1e-2);
    }

    #[test]
    fn symmetric_optimum_matches_the_textbook_rule() {
        let g = tune_pi_symmetric_optimum(1.0, 0.01, 2.0).unwrap();
        assert_relative_eq!(g.kp, 50.0, max_relative = 1e-14);
        assert_relative_eq!(g.ti_s, 0.04, max_relative = 1e-14);
        // gain scaling: doubling the plant gain halves Kp, Ti unchanged
        let g2 = tune_pi_symmetric_optimum(2.0, 0.01, 2.0).unwrap();
        assert_relative_eq!(g2.kp, 25.0, max_relative = 1e-14);
        assert_relative_eq!(g2.ti_s, 0.04, max_relative = 1e-14);
        assert!(tune_pi_symmetric_optimum(1.0, 0.01, 1.0).is_err());
    }

    #[test]
    fn symmetric_optimum_phase_margin_is_the_analytic_value() {
        // open loop Kp (Ti s + 1)/(Ti s) * 1/(s (Ts s + 1))
        let ts = 0.01;
        let a = 2.0;
        let g = tune_pi_symmetric_optimum(1.0, ts, a).unwrap();
        let open = TransferFunction::new(
            vec![g.kp * g.ti_s, g.kp],
            vec![g.ti_s * ts, g.ti_s, 0.0, 0.0],
        )
        .unwrap();
        // crossover by geometric bisection on |L| = 1
        let (mut lo, mut hi) = (1.0_f64, 1.0e4_f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if open.freq_response(mid).unwrap().norm() > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let wc = (lo * hi).sqrt();
        // crossover sits at 1/(a Ts) for the symmetric optimum
        assert_relative_eq!(wc, 1.0 / (a * ts), max_relative = 1e-3);
        let phase = open.freq_response(wc).unwrap().arg();
        let margin_deg = (phase + std::f64::consts::PI).to_degrees();
        let analytic = (a.atan() - (1.0 / a).atan()).to_degrees();
        assert_relative_eq!(margin_deg, analytic, max_relative = 1e-3);
        assert_relative_eq!(analytic, 36.8698976, max_relative = 1e-6);
    }

    #[test]
    fn stiffness_command_is_the_scaled_force_error() {
        let arcc = StiffnessController::new(33.0e-4, 6.0).unwrap();
        assert_eq!(arcc.stiffness_command(6.0), 0.0);
        assert_relative_eq!(arcc.stiffness_command(5.0), 33.0e-4, max_relative = 1e-14);
        let robot = StiffnessController::new(3.5e-4, 10.0).unwrap();
        assert_relative_eq!(robot.stiffness_command(0.0), 3.5e-3, max_relative = 1e-14);
    }

    #[test]
    fn safety_reduction_takes_ten_percent() {
        assert_relative_eq!(apply_safety_reduction(1.0).unwrap(), 0.9);
        assert_relative_eq!(
            apply_safety_reduction(33.0e-4 / 0.9).unwrap(),
            33.0e-4,
            max_relative = 1e-14
        );
        assert!(apply_safety_reduction(0.0).is_err());
    }

    #[test]
    fn position_compensation_centers_and_saturates() {
        assert_eq!(position_compensation(0.0, 10.0, 0.25), 0.0);
        assert_relative_eq!(
            position_compensation(1.0e-3, 10.0, 0.25),
            -0.01,
            max_relative = 1e-14
        );
        assert_eq!(position_compensation(1.0, 10.0, 0.25), -0.25);
    }

    fn arcc_loop_config() -> HybridLoopConfig {
        HybridLoopConfig {
            arcc: Some(StiffnessController::new(33.0e-4, 5.0).unwrap()),
            robot_force: None,
            compensation: Some(PositionCompensation { k_pc_per_s: 10.0 }),
            x_center_m: 0.0,
            arcc_v_limit_m_s: 0.89,
            robot_v_limit_m_s: 0.25,
            dt_ctrl_arcc_s: 1.0e-3,
            dt_ctrl_robot_s: 4.0e-3,
        }
    }

    #[test]
    fn hybrid_requires_exactly_one_force_path() {
        let mut cfg = arcc_loop_config();
        cfg.arcc = None;
        assert!(matches!(
            cfg.validate(1.0e-4),
            Err(Error::Configuration(_))
        ));
        cfg.arcc = Some(StiffnessController::new(33.0e-4, 5.0).unwrap());
        cfg.robot_force = Some(StiffnessController::new(3.5e-4, 5.0).unwrap());
        assert!(matches!(
            cfg.validate(1.0e-4),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn hybrid_rejects_misaligned_sample_times() {
        let mut cfg = arcc_loop_config();
        cfg.dt_ctrl_robot_s = 3.3e-4;
        assert!(cfg.validate(1.0e-4).is_err());
        cfg.dt_ctrl_robot_s = 4.0e-3;
        assert!(cfg.validate(1.0e-4).is_ok());
    }

    #[test]
    fn hybrid_outputs_decouple_by_branch() {
        let mut ctrl = HybridController::new(arcc_loop_config(), 1.0e-4).unwrap();
        // at setpoint force and centered: only feedforward remains
        let (um, ur) = ctrl.update(
            0,
            &Measurements {
                force_n: 5.0,
                deflection_m: 0.0,
            },
            0.01,
        );
        assert_eq!(um, 0.0);
        assert_relative_eq!(ur, 0.01, max_relative = 1e-14);
        // compressed 1 mm with zero force error: pure centering on the robot
        let (um, ur) = ctrl.update(
            0,
            &Measurements {
                force_n: 5.0,
                deflection_m: 1.0e-3,
            },
            0.0,
        );
        assert_eq!(um, 0.0);
        assert_relative_eq!(ur, -0.01, max_relative = 1e-12);
    }

    #[test]
    fn robot_only_branch_feeds_the_stiffness_command_to_the_robot() {
        let cfg = HybridLoopConfig {
            arcc: None,
            robot_force: Some(StiffnessController::new(3.5e-4, 5.0).unwrap()),
            compensation: None,
            x_center_m: 0.0,
            arcc_v_limit_m_s: 0.89,
            robot_v_limit_m_s: 0.25,
            dt_ctrl_arcc_s: 1.0e-3,
            dt_ctrl_robot_s: 4.0e-3,
        };
        let mut ctrl = HybridController::new(cfg, 1.0e-4).unwrap();
        let (um, ur) = ctrl.update(
            0,
            &Measurements {
                force_n: 0.0,
                deflection_m: 0.0,
            },
            0.0,
        );
        assert_eq!(um, 0.0);
        assert_relative_eq!(ur, 3.5e-4 * 5.0, max_relative = 1e-14);
    }

    #[test]
    fn commands_hold_between_ticks() {
        let mut ctrl = HybridController::new(arcc_loop_config(), 1.0e-4).unwrap();
        let hot = Measurements {
            force_n: 0.0,
            deflection_m: 0.0,
        };
        let cold = Measurements {
            force_n: 5.0,
            deflection_m: 0.0,
        };
        let (um0, _) = ctrl.update(0, &hot, 0.0);
        assert!(um0 > 0.0);
        // step 1 is not an active-branch tick at 1 kHz vs 10 kHz sim
        let (um1, _) = ctrl.update(1, &cold, 0.0);
        assert_eq!(um1, um0);
        // step 10 is a tick: the new measurement takes effect
        let (um10, _) = ctrl.update(10, &cold, 0.0);
        assert_eq!(um10, 0.0);
    }

    #[test]
    fn delayed_integrator_critical_gain_is_one_over_dt() {
        // ZOH integrator with one sample delay destabilizes exactly at 1/dt
        let dt = 4.0e-3;
        let chain = StateSpace::new(
            DMatrix::zeros(1, 1),
            DVector::from_column_slice(&[1.0]),
            RowDVector::from_row_slice(&[1.0]),
            0.0,
        )
        .unwrap();
        let setup = MarginSetup::new(chain, 1.0 / dt, 1).unwrap();
        match setup.critical_gain(1.0).unwrap() {
            MarginOutcome::Critical { gain } => {
                assert_relative_eq!(gain, 1.0 / dt, max_relative = 1e-5);
            }
            other => panic!("expected a critical gain, got {other:?}"),
        }
    }

    #[test]
    fn margin_result_flips_stability_within_one_percent() {
        let setup = MarginSetup::new(
            robot_force_chain(1.0, 0.0884, 1.0e5).unwrap(),
            250.0,
            1,
        )
        .unwrap();
        let crit = match setup.critical_gain(1.0e-6).unwrap() {
            MarginOutcome::Critical { gain } => gain,
            other => panic!("expected a critical gain, got {other:?}"),
        };
        let rho_low = spectral_radius(&setup.closed_loop_matrix(0.99 * crit)).unwrap();
        let rho_high = spectral_radius(&setup.closed_loop_matrix(1.01 * crit)).unwrap();
        assert!(rho_low < 1.0, "rho at 0.99x = {rho_low}");
        assert!(rho_high > 1.0, "rho at 1.01x = {rho_high}");
        // time-domain confirmation; the 0.99x pole sits barely inside the
        // circle, so give the transient room to decay
        let g_low = discrete_response_growth(&setup.closed_loop_matrix(0.99 * crit), 2_000_000);
        let g_high = discrete_response_growth(&setup.closed_loop_matrix(1.01 * crit), 2_000_000);
        assert!(g_low <= 1.0, "stable loop grew by {g_low}");
        assert!(g_high >= 10.0, "unstable loop only reached {g_high}");
    }

    #[test]
    fn first_order_loop_without_delay_is_gain_stable() {
        // closed-loop pole of K/(Ts+1) under gain g: -(1 + gK)/T, always left
        let outcome = find_stability_margin_gain(LoopDomain::Continuous, 1.0e-3, |g| {
            Ok(vec![Complex64::new(-(1.0 + g) / 0.1, 0.0)])
        })
        .unwrap();
        assert!(matches!(outcome, MarginOutcome::GainStable { .. }));
    }

    #[test]
    fn active_loop_margin_dwarfs_the_robot_loop_margin() {
        let motor = MotorModel::new(1.0, 1.0 / (std::f64::consts::TAU * 100.0)).unwrap();
        let robot = MarginSetup::new(
            robot_force_chain(1.0, 0.0884, 1.0e5).unwrap(),
            250.0,
            1,
        )
        .unwrap();
        let arcc = MarginSetup::new(
            arcc_force_chain(&motor, 1.0, 26.44, 7765.18, 1.0e5).unwrap(),
            1000.0,
            1,
        )
        .unwrap();
        let crit_robot = match robot.critical_gain(1.0e-6).unwrap() {
            MarginOutcome::Critical { gain } => gain,
            other => panic!("{other:?}"),
        };
        let crit_arcc = match arcc.critical_gain(1.0e-6).unwrap() {
            MarginOutcome::Critical { gain } => gain,
            other => panic!("{other:?}"),
        };
        assert!(
            crit_arcc / crit_robot >= 5.0,
            "ratio {} from {crit_arcc} / {crit_robot}",
            crit_arcc / crit_robot
        );
        // both land in the physically plausible decade range
        assert!((1.0e-4..1.0e-2).contains(&crit_robot), "{crit_robot}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn stiffness_command_is_linear_in_the_error(
                compliance in 1.0e-5_f64..1.0e-2,
                f_des in 0.1_f64..100.0,
                err in -50.0_f64..50.0,
                alpha in -4.0_f64..4.0,
            ) {
                let ctrl = StiffnessController::new(compliance, f_des).unwrap();
                let base = ctrl.stiffness_command(f_des - err);
                let scaled = ctrl.stiffness_command(f_des - alpha * err);
                prop_assert!((scaled - alpha * base).abs() <= 1e-12 * base.abs().max(1.0));
            }

            #[test]
            fn compensation_output_never_exceeds_the_limit(
                x in -0.5_f64..0.5,
                k in 0.0_f64..100.0,
                limit in 1.0e-3_f64..1.0,
            ) {
                let u = position_compensation(x, k, limit);
                prop_assert!(u.abs() <= limit + f64::EPSILON);
                // sign drives toward center
                if x != 0.0 && k > 0.0 {
                    prop_assert!(u * x <= 0.0);
                }
            }

            #[test]
            fn bisection_brackets_shrink_to_the_boundary(
                dt_pow in 2.0_f64..4.0,
            ) {
                // delayed integrator with analytic critical gain 1/dt
                let dt = 10.0_f64.powf(-dt_pow);
                let chain = StateSpace::new(
                    DMatrix::zeros(1, 1),
                    DVector::from_column_slice(&[1.0]),
                    RowDVector::from_row_slice(&[1.0]),
                    0.0,
                ).unwrap();
                let setup = MarginSetup::new(chain, 1.0 / dt, 1).unwrap();
                match setup.critical_gain(1.0e-2 / dt).unwrap() {
                    MarginOutcome::Critical { gain } => {
                        prop_assert!((gain * dt - 1.0).abs() < 1e-4);
                    }
                    other => prop_assert!(false, "unexpected {other:?}"),
                }
            }
        }
    }
}
