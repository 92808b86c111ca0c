//! Pinned device constants, controller gains, and ready-made scenario
//! bundles for the shipped tool configurations. Everything the CLI and the
//! benchmarks need to run without hand-assembled configs lives here.

use crate::bench::{
    ConfigId, NoiseSpec, ScenarioGeometry, ScenarioKind, ScenarioSpec, SpeedSchedule,
};
use crate::control::{
    arcc_force_chain, robot_force_chain, HybridLoopConfig, MarginSetup, PositionCompensation,
    StiffnessController,
};
use crate::error::Result;
use crate::lti::TransferFunction;
use crate::plant::{
    Environment, MotorModel, PlantConfig, RobotSurrogate, SpringModel, SurfaceMotion,
    TwoStageSpring,
};

// -- two-stage flexure, anchor-derived constants --------------------------

/// Soft-stage stiffness fixed by the 5 N at 0.6439 mm anchor (N/mm).
pub const TWO_STAGE_C1_N_PER_MM: f64 = 5.0 / 0.6439;
/// Stiff-stage stiffness fixed by the 40 N rise over 1.499 mm (N/mm).
pub const TWO_STAGE_C2_N_PER_MM: f64 = 40.0 / 1.499;
/// Stage transition deflection (mm).
pub const TWO_STAGE_XT_MM: f64 = 1.41;

/// Nominal catalog stiffness of the soft stage (N/mm).
pub const TWO_STAGE_NOMINAL_C1_N_PER_MM: f64 = 7.06;
/// Nominal catalog stiffness of the stiff stage (N/mm).
pub const TWO_STAGE_NOMINAL_C2_N_PER_MM: f64 = 26.68;

/// Single-flexure device stiffness (N/mm).
pub const SINGLE_STAGE_C_N_PER_MM: f64 = 10.0;

// -- mechanics -------------------------------------------------------------

/// Moving tool-side mass (kg).
pub const TOOL_MASS_KG: f64 = 1.0;
/// Tool-to-carriage viscous damping, 15% of critical against the soft
/// stage (N s/m).
pub const TOOL_DAMPING_N_S_PER_M: f64 = 26.44;
/// Environment contact stiffness (N/m).
pub const CONTACT_STIFFNESS_N_PER_M: f64 = 1.0e5;
/// Usable deflection from center to a travel stop, two-stage device (m).
pub const TRAVEL_HALF_STROKE_TWO_STAGE_M: f64 = 2.909e-3;
/// Usable deflection from center to a travel stop, single-stage device (m).
pub const TRAVEL_HALF_STROKE_SINGLE_M: f64 = 2.5e-3;
/// Penalty stiffness of the travel stops (N/m).
pub const STOP_STIFFNESS_N_PER_M: f64 = 1.0e6;
/// Structural force ceiling of the device; reports annotate peaks above it (N).
pub const FORCE_CEILING_N: f64 = 145.0;

// -- actuation -------------------------------------------------------------

/// Servo velocity-loop gain (dimensionless).
pub const MOTOR_GAIN: f64 = 1.0;
/// Servo velocity-loop lag, 100 Hz corner (s).
pub const MOTOR_T_S: f64 = 1.0 / (std::f64::consts::TAU * 100.0);
/// Robot velocity-loop gain (dimensionless).
pub const ROBOT_GAIN: f64 = 1.0;
/// Robot velocity-loop lag, 1.8 Hz corner (s).
pub const ROBOT_T_S: f64 = 1.0 / (std::f64::consts::TAU * 1.8);
/// Active-axis velocity limit (m/s).
pub const ARCC_V_LIMIT_M_S: f64 = 0.89;
/// Robot velocity limit (m/s).
pub const ROBOT_V_LIMIT_M_S: f64 = 0.25;

// -- sampling --------------------------------------------------------------

/// Fixed integration step (s).
pub const DT_SIM_S: f64 = 1.0e-4;
/// Active force branch sample time, 1 kHz (s).
pub const DT_CTRL_ARCC_S: f64 = 1.0e-3;
/// Robot branch sample time, 250 Hz (s).
pub const DT_CTRL_ROBOT_S: f64 = 4.0e-3;

// -- controller gains ------------------------------------------------------

/// Active-axis compliance gain (m/(N s)).
pub const COMPLIANCE_ARCC_M_PER_N_S: f64 = 33.0e-4;
/// Robot compliance gain for contact establishment (m/(N s)).
pub const COMPLIANCE_ROBOT_M_PER_N_S: f64 = 3.5e-4;
/// Robot compliance gain behind the passive wrist; its spring softens the
/// contact the robot sees, buying margin for twice the plain-robot gain.
pub const COMPLIANCE_RCC_M_PER_N_S: f64 = 7.0e-4;
/// Robot compliance gain for contour following; the plain-contact gain
/// cannot chase the 10 mm profile at all.
pub const COMPLIANCE_ROBOT_CONTOUR_M_PER_N_S: f64 = 7.0e-4;
/// Centering gain during contact establishment (1/s).
pub const KPC_CONTACT_PER_S: f64 = 25.0;
/// Centering gain during contour following (1/s); lower than the contact
/// value so the robot feed stays smooth against the moving profile.
pub const KPC_CONTOUR_PER_S: f64 = 8.0;

// -- scenario geometry -----------------------------------------------------

/// Approach set-back for contact establishment (m).
pub const CONTACT_OFFSET_M: f64 = 15.0e-3;
/// Contact-establishment force setpoint (N).
pub const CONTACT_F_DES_N: f64 = 5.0;
/// Contour-following force setpoint (N).
pub const CONTOUR_F_DES_N: f64 = 10.0;
/// Contour wavelength (m).
pub const CONTOUR_WAVELENGTH_M: f64 = 65.0e-3;
/// Traversal length per ramp speed, two wavelengths (m).
pub const CONTOUR_LENGTH_M: f64 = 0.13;
/// Contour amplitudes exercised by the benchmark suite (m).
pub const CONTOUR_AMPLITUDES_M: [f64; 2] = [2.5e-3, 10.0e-3];
/// Contour ramp: first speed and increment (m/s).
pub const CONTOUR_SPEED_STEP_M_S: f64 = 5.0e-3;
/// Contour ramp cap (m/s).
pub const CONTOUR_SPEED_MAX_M_S: f64 = 0.5;

// -- identified reference models -------------------------------------------

/// Identified robot force-loop cutoff (Hz).
pub const IDENTIFIED_ROBOT_CUTOFF_HZ: f64 = 1.8;
/// Identified active-axis cutoff with a 1.5 kg payload (Hz).
pub const IDENTIFIED_ARCC_LOADED_CUTOFF_HZ: f64 = 16.6;
/// Identified active-axis cutoff without payload (Hz).
pub const IDENTIFIED_ARCC_UNLOADED_CUTOFF_HZ: f64 = 55.9;
/// Overall model fit reported for the identification dataset (%);
/// documentation constant, the hardware data is not shipped.
pub const IDENTIFIED_FIT_PERCENT: f64 = 72.0;
/// Reported identification residual, root form (mm/s); documentation
/// constant.
pub const IDENTIFIED_RMS_MM_S: f64 = 0.274;

/// Reference hardware durations for contact establishment (s);
/// documentation constants, not reproduced by the simulation.
pub const REFERENCE_ROBOT_DURATION_S: f64 = 10.61;
pub const REFERENCE_ARCC_DURATION_S: f64 = 2.59;

fn first_order_cutoff(cutoff_hz: f64) -> TransferFunction {
    TransferFunction::first_order(1.0, 1.0 / (std::f64::consts::TAU * cutoff_hz))
        .expect("static constants")
}

/// Identified robot velocity-loop model.
pub fn identified_robot() -> TransferFunction {
    first_order_cutoff(IDENTIFIED_ROBOT_CUTOFF_HZ)
}

/// Identified active-axis model with the 1.5 kg payload.
pub fn identified_arcc_loaded() -> TransferFunction {
    first_order_cutoff(IDENTIFIED_ARCC_LOADED_CUTOFF_HZ)
}

/// Identified active-axis model without payload.
pub fn identified_arcc_unloaded() -> TransferFunction {
    first_order_cutoff(IDENTIFIED_ARCC_UNLOADED_CUTOFF_HZ)
}

/// The identified model trio, named for reports.
pub fn identified_models() -> Vec<(String, TransferFunction)> {
    vec![
        ("robot".into(), identified_robot()),
        ("arcc-loaded".into(), identified_arcc_loaded()),
        ("arcc-unloaded".into(), identified_arcc_unloaded()),
    ]
}

// -- springs ----------------------------------------------------------------

/// Two-stage flexure with the anchor-derived constants.
pub fn spring_two_stage() -> SpringModel {
    SpringModel::TwoStage(
        TwoStageSpring::new(TWO_STAGE_C1_N_PER_MM, TWO_STAGE_C2_N_PER_MM, TWO_STAGE_XT_MM)
            .expect("static constants"),
    )
}

/// Two-stage flexure with the nominal catalog constants.
pub fn spring_two_stage_nominal() -> SpringModel {
    SpringModel::TwoStage(
        TwoStageSpring::new(
            TWO_STAGE_NOMINAL_C1_N_PER_MM,
            TWO_STAGE_NOMINAL_C2_N_PER_MM,
            TWO_STAGE_XT_MM,
        )
        .expect("static constants"),
    )
}

/// Single linear flexure.
pub fn spring_single_stage() -> SpringModel {
    SpringModel::Linear {
        c_n_per_mm: SINGLE_STAGE_C_N_PER_MM,
    }
}

// -- plants -----------------------------------------------------------------

fn base_plant(spring: SpringModel, half_stroke_m: f64, rigid_tool: bool) -> PlantConfig {
    PlantConfig {
        m_p_kg: TOOL_MASS_KG,
        d_n_s_per_m: TOOL_DAMPING_N_S_PER_M,
        spring,
        motor: MotorModel::new(MOTOR_GAIN, MOTOR_T_S).expect("static constants"),
        robot: RobotSurrogate::new(ROBOT_GAIN, ROBOT_T_S).expect("static constants"),
        env: Environment {
            c_env_n_per_m: CONTACT_STIFFNESS_N_PER_M,
            surface: SurfaceMotion::Static {
                position_m: CONTACT_OFFSET_M,
            },
            unilateral: true,
        },
        dt_sim_s: DT_SIM_S,
        rigid_tool,
        travel_half_stroke_m: half_stroke_m,
        stop_stiffness_n_per_m: STOP_STIFFNESS_N_PER_M,
    }
}

/// Plant for the given tool configuration.
pub fn plant_for(config: ConfigId) -> PlantConfig {
    match config {
        ConfigId::RobotOnly => base_plant(spring_two_stage(), TRAVEL_HALF_STROKE_TWO_STAGE_M, true),
        ConfigId::RobotRcc => base_plant(spring_two_stage(), TRAVEL_HALF_STROKE_TWO_STAGE_M, false),
        ConfigId::ArccOneStage => {
            base_plant(spring_single_stage(), TRAVEL_HALF_STROKE_SINGLE_M, false)
        }
        ConfigId::ArccTwoStage => {
            base_plant(spring_two_stage(), TRAVEL_HALF_STROKE_TWO_STAGE_M, false)
        }
    }
}

// -- loops -------------------------------------------------------------------

/// Controller wiring and gains for a configuration in a scenario.
pub fn loop_for(config: ConfigId, kind: ScenarioKind, f_des_n: f64) -> HybridLoopConfig {
    let (arcc, robot_force, k_pc) = match (config.is_active(), kind) {
        (true, ScenarioKind::ContactEstablishment) => (
            Some(StiffnessController::new(COMPLIANCE_ARCC_M_PER_N_S, f_des_n).unwrap()),
            None,
            Some(KPC_CONTACT_PER_S),
        ),
        (true, ScenarioKind::ContourFollowing) => (
            Some(StiffnessController::new(COMPLIANCE_ARCC_M_PER_N_S, f_des_n).unwrap()),
            None,
            Some(KPC_CONTOUR_PER_S),
        ),
        (false, ScenarioKind::ContactEstablishment) => {
            let compliance = if config == ConfigId::RobotRcc {
                COMPLIANCE_RCC_M_PER_N_S
            } else {
                COMPLIANCE_ROBOT_M_PER_N_S
            };
            (
                None,
                Some(StiffnessController::new(compliance, f_des_n).unwrap()),
                None,
            )
        }
        (false, ScenarioKind::ContourFollowing) => (
            None,
            Some(
                StiffnessController::new(COMPLIANCE_ROBOT_CONTOUR_M_PER_N_S, f_des_n).unwrap(),
            ),
            None,
        ),
    };
    HybridLoopConfig {
        arcc,
        robot_force,
        compensation: k_pc.map(|k_pc_per_s| PositionCompensation { k_pc_per_s }),
        x_center_m: 0.0,
        arcc_v_limit_m_s: ARCC_V_LIMIT_M_S,
        robot_v_limit_m_s: ROBOT_V_LIMIT_M_S,
        dt_ctrl_arcc_s: DT_CTRL_ARCC_S,
        dt_ctrl_robot_s: DT_CTRL_ROBOT_S,
    }
}

// -- scenarios ----------------------------------------------------------------

/// Contact-establishment scenario for one configuration.
pub fn contact_scenario(config: ConfigId, repetitions: usize, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::ContactEstablishment,
        config,
        geometry: ScenarioGeometry::Contact {
            offset_m: CONTACT_OFFSET_M,
        },
        f_des_n: CONTACT_F_DES_N,
        speeds: None,
        repetitions,
        noise: Some(NoiseSpec::default()),
        seed,
        record_trajectory: false,
    }
}

/// Contour-following scenario for one configuration and amplitude.
pub fn contour_scenario(
    config: ConfigId,
    amplitude_m: f64,
    repetitions: usize,
    seed: u64,
) -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::ContourFollowing,
        config,
        geometry: ScenarioGeometry::Contour {
            amplitude_m,
            wavelength_m: CONTOUR_WAVELENGTH_M,
            length_m: CONTOUR_LENGTH_M,
        },
        f_des_n: CONTOUR_F_DES_N,
        speeds: Some(SpeedSchedule {
            initial_m_s: CONTOUR_SPEED_STEP_M_S,
            increment_m_s: CONTOUR_SPEED_STEP_M_S,
            max_m_s: CONTOUR_SPEED_MAX_M_S,
        }),
        repetitions,
        noise: Some(NoiseSpec::default()),
        seed,
        record_trajectory: false,
    }
}

/// The full benchmark cross product: contact establishment for all four
/// configurations plus contour following at both amplitudes.
pub fn bench_suite(
    seed: u64,
    contact_repetitions: usize,
    contour_repetitions: usize,
) -> Vec<(ScenarioSpec, PlantConfig, HybridLoopConfig)> {
    let mut bundles = Vec::new();
    for config in ConfigId::ALL {
        bundles.push((
            contact_scenario(config, contact_repetitions, seed),
            plant_for(config),
            loop_for(config, ScenarioKind::ContactEstablishment, CONTACT_F_DES_N),
        ));
    }
    for amplitude in CONTOUR_AMPLITUDES_M {
        for config in ConfigId::ALL {
            bundles.push((
                contour_scenario(config, amplitude, contour_repetitions, seed),
                plant_for(config),
                loop_for(config, ScenarioKind::ContourFollowing, CONTOUR_F_DES_N),
            ));
        }
    }
    bundles
}

// -- stability-margin setups ----------------------------------------------

/// Robot force loop prepared for the margin search: velocity lag into the
/// stiff contact, sampled at the robot rate with one sample of delay.
pub fn margin_setup_robot() -> Result<MarginSetup> {
    MarginSetup::new(
        robot_force_chain(ROBOT_GAIN, ROBOT_T_S, CONTACT_STIFFNESS_N_PER_M)?,
        1.0 / DT_CTRL_ROBOT_S,
        1,
    )
}

/// Active force loop prepared for the margin search: servo, soft spring
/// stage, tool, and contact, sampled at the active rate with one sample of
/// delay.
pub fn margin_setup_arcc() -> Result<MarginSetup> {
    MarginSetup::new(
        arcc_force_chain(
            &MotorModel::new(MOTOR_GAIN, MOTOR_T_S)?,
            TOOL_MASS_KG,
            TOOL_DAMPING_N_S_PER_M,
            TWO_STAGE_C1_N_PER_MM * 1.0e3,
            CONTACT_STIFFNESS_N_PER_M,
        )?,
        1.0 / DT_CTRL_ARCC_S,
        1,
    )
}
