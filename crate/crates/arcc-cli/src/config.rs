//! Run-configuration plumbing: the TOML schema with unit-suffixed keys,
//! preset resolution, flag-over-file precedence, and the reproducibility
//! artifacts (resolved config echo plus manifest) every command writes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use arcc::bench::{
    ConfigId, NoiseSpec, ScenarioGeometry, ScenarioKind, ScenarioSpec, SpeedSchedule,
};
use arcc::control::HybridLoopConfig;
use arcc::plant::{PlantConfig, SpringModel, TwoStageSpring};
use arcc::presets;

use crate::{map_arcc, warn, AppError, CommonArgs};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT: &str = "out";

// -- file schema -------------------------------------------------------------

/// Top-level TOML file. Every key a flag can also set follows flag-wins
/// precedence with a warning.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Informational; the invoked subcommand wins.
    pub command: Option<String>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub plant: PlantTable,
    #[serde(default)]
    pub scenario: ScenarioTable,
    #[serde(default)]
    pub control: ControlTable,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantTable {
    pub m_p_kg: Option<f64>,
    pub d_n_s_per_m: Option<f64>,
    pub c_env_n_per_m: Option<f64>,
    /// Switches the device to a single linear flexure.
    pub c_n_per_mm: Option<f64>,
    pub c1_n_per_mm: Option<f64>,
    pub c2_n_per_mm: Option<f64>,
    pub x_t_mm: Option<f64>,
    pub dt_sim_s: Option<f64>,
    pub travel_half_stroke_mm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTable {
    /// Tool configuration id; must agree with the preset when both appear.
    pub config: Option<String>,
    pub kind: Option<String>,
    pub offset_mm: Option<f64>,
    pub f_des_n: Option<f64>,
    pub amplitude_mm: Option<f64>,
    pub wavelength_mm: Option<f64>,
    pub length_mm: Option<f64>,
    pub speed_initial_mm_s: Option<f64>,
    pub speed_increment_mm_s: Option<f64>,
    pub speed_max_mm_s: Option<f64>,
    pub repetitions: Option<usize>,
    pub noise: Option<bool>,
    pub force_noise_sigma_n: Option<f64>,
    pub deflection_noise_sigma_um: Option<f64>,
    pub record_trajectory: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlTable {
    pub compliance_m_per_n_s: Option<f64>,
    pub k_pc_per_s: Option<f64>,
    pub arcc_v_limit_m_s: Option<f64>,
    pub robot_v_limit_m_s: Option<f64>,
    pub dt_ctrl_arcc_s: Option<f64>,
    pub dt_ctrl_robot_s: Option<f64>,
}

/// Loads and parses the optional config file, turning unknown-key errors
/// into unit-aware diagnostics.
pub fn load_file(path: Option<&Path>) -> Result<FileConfig, AppError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| AppError::config(diagnose_toml_error(&e.to_string())))
}

/// Known unit suffixes, longest first so compound units match before their
/// tails.
const UNIT_SUFFIXES: [&str; 22] = [
    "n_s_per_m",
    "mm_per_n_s",
    "m_per_n_s",
    "n_per_mm",
    "n_per_m",
    "mm_per_s",
    "m_per_s",
    "per_s",
    "mm_s",
    "m_s",
    "khz",
    "hz",
    "ms",
    "um",
    "cm",
    "mm",
    "kg",
    "kn",
    "n_s",
    "m",
    "s",
    "n",
];

fn unit_stem(key: &str) -> &str {
    for suffix in UNIT_SUFFIXES {
        if let Some(rest) = key.strip_suffix(suffix) {
            if let Some(stem) = rest.strip_suffix('_') {
                return stem;
            }
        }
    }
    key
}

/// Rewrites serde's unknown-field message: a key whose stem matches a known
/// key is a unit mismatch and the diagnostic names the expected unit.
fn diagnose_toml_error(message: &str) -> String {
    let quoted: Vec<&str> = message
        .split('`')
        .skip(1)
        .step_by(2)
        .collect();
    if message.contains("unknown field") && !quoted.is_empty() {
        let offender = quoted[0];
        for candidate in &quoted[1..] {
            if candidate != &offender && unit_stem(candidate) == unit_stem(offender) {
                return format!(
                    "config key `{offender}`: unit mismatch, expected `{candidate}`"
                );
            }
        }
        return format!("unknown config key `{offender}`");
    }
    message.trim().replace('\n', " ")
}

// -- precedence -------------------------------------------------------------

fn pick<T: PartialEq + Clone + std::fmt::Debug>(
    flag: Option<T>,
    file: Option<T>,
    default: T,
    name: &str,
) -> T {
    match (flag, file) {
        (Some(f), Some(c)) => {
            if f != c {
                warn(format!("--{name} {f:?} overrides {name} {c:?} from the config file"));
            }
            f
        }
        (Some(f), None) => f,
        (None, Some(c)) => c,
        (None, None) => default,
    }
}

/// Shared flag/file resolution: seed, output directory, preset name.
pub struct Resolved {
    pub file: FileConfig,
    pub preset: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
    pub check: bool,
}

pub fn resolve_common(args: &CommonArgs, command: &str) -> Result<Resolved, AppError> {
    let file = load_file(args.config.as_deref())?;
    if let Some(cmd) = &file.command {
        if cmd != command {
            warn(format!(
                "command `{cmd}` from the config file is overridden by the `{command}` subcommand"
            ));
        }
    }
    let preset = pick(args.preset.clone(), file.preset.clone(), String::new(), "preset");
    let preset = (!preset.is_empty()).then_some(preset);
    Ok(Resolved {
        seed: pick(args.seed, file.seed, DEFAULT_SEED, "seed"),
        out: pick(args.out.clone(), file.out_dir.clone(), PathBuf::from(DEFAULT_OUT), "out"),
        check: args.check,
        preset,
        file,
    })
}

// -- presets -----------------------------------------------------------------

pub const PRESET_SUMMARIES: [(&str, &str); 6] = [
    (
        "robot-fig4",
        "plain robot configuration; identified 1.8 Hz velocity-loop model",
    ),
    (
        "arcc-single-10n-mm",
        "active device with the single 10 N/mm flexure",
    ),
    (
        "arcc-two-stage",
        "active device with the two-stage flexure, anchor-derived constants",
    ),
    (
        "arcc-two-stage-nominal",
        "active device with the two-stage flexure, nominal catalog constants",
    ),
    (
        "paper-iv",
        "benchmark bundle: contact establishment and contour following across all four tool configurations",
    ),
    (
        "fig4",
        "frequency-response set for the identified models and the single-flexure compliance",
    ),
];

pub fn preset_help() -> String {
    let mut s = String::from("Presets:\n");
    for (name, summary) in PRESET_SUMMARIES {
        s.push_str(&format!("  {name:<24}{summary}\n"));
    }
    s.pop();
    s
}

/// A resolved device: tool configuration plus its plant with overrides
/// applied.
pub struct Device {
    pub preset: String,
    pub config: ConfigId,
    pub plant: PlantConfig,
}

fn device_from_preset(name: &str) -> Result<(ConfigId, PlantConfig), AppError> {
    match name {
        "robot-fig4" => Ok((ConfigId::RobotOnly, presets::plant_for(ConfigId::RobotOnly))),
        "arcc-single-10n-mm" => Ok((
            ConfigId::ArccOneStage,
            presets::plant_for(ConfigId::ArccOneStage),
        )),
        "arcc-two-stage" => Ok((
            ConfigId::ArccTwoStage,
            presets::plant_for(ConfigId::ArccTwoStage),
        )),
        "arcc-two-stage-nominal" => {
            let mut plant = presets::plant_for(ConfigId::ArccTwoStage);
            plant.spring = presets::spring_two_stage_nominal();
            Ok((ConfigId::ArccTwoStage, plant))
        }
        other => Err(AppError::config(format!(
            "preset `{other}` does not name a device; expected one of robot-fig4, \
             arcc-single-10n-mm, arcc-two-stage, arcc-two-stage-nominal"
        ))),
    }
}

/// Resolves the device from the preset and/or `scenario.config`, then folds
/// the `[plant]` table on top.
pub fn resolve_device(resolved: &Resolved) -> Result<Device, AppError> {
    let (preset, config, mut plant) = match (&resolved.preset, &resolved.file.scenario.config) {
        (Some(name), maybe_config) => {
            let (config, plant) = device_from_preset(name)?;
            if let Some(id) = maybe_config {
                let wanted = ConfigId::parse(id).map_err(map_arcc)?;
                if wanted != config {
                    return Err(AppError::config(format!(
                        "preset `{name}` fixes the tool configuration to `{}`, \
                         but scenario.config says `{id}`",
                        config.id()
                    )));
                }
            }
            (name.clone(), config, plant)
        }
        (None, Some(id)) => {
            let config = ConfigId::parse(id).map_err(map_arcc)?;
            (id.clone(), config, presets::plant_for(config))
        }
        (None, None) => (
            "arcc-two-stage".to_string(),
            ConfigId::ArccTwoStage,
            presets::plant_for(ConfigId::ArccTwoStage),
        ),
    };

    let t = &resolved.file.plant;
    if t.c_n_per_mm.is_some()
        && (t.c1_n_per_mm.is_some() || t.c2_n_per_mm.is_some() || t.x_t_mm.is_some())
    {
        return Err(AppError::config(
            "plant.c_n_per_mm selects a single linear flexure and cannot be combined \
             with the two-stage keys c1_n_per_mm / c2_n_per_mm / x_t_mm",
        ));
    }
    if let Some(c) = t.c_n_per_mm {
        plant.spring = SpringModel::Linear { c_n_per_mm: c };
    } else if t.c1_n_per_mm.is_some() || t.c2_n_per_mm.is_some() || t.x_t_mm.is_some() {
        let (c1, c2, x_t) = match &plant.spring {
            SpringModel::TwoStage(s) => (s.c1_n_per_mm, s.c2_n_per_mm, s.x_t_mm),
            SpringModel::Linear { .. } => (
                presets::TWO_STAGE_C1_N_PER_MM,
                presets::TWO_STAGE_C2_N_PER_MM,
                presets::TWO_STAGE_XT_MM,
            ),
        };
        plant.spring = SpringModel::TwoStage(
            TwoStageSpring::new(
                t.c1_n_per_mm.unwrap_or(c1),
                t.c2_n_per_mm.unwrap_or(c2),
                t.x_t_mm.unwrap_or(x_t),
            )
            .map_err(map_arcc)?,
        );
    }
    if let Some(v) = t.m_p_kg {
        plant.m_p_kg = v;
    }
    if let Some(v) = t.d_n_s_per_m {
        plant.d_n_s_per_m = v;
    }
    if let Some(v) = t.c_env_n_per_m {
        plant.env.c_env_n_per_m = v;
    }
    if let Some(v) = t.dt_sim_s {
        plant.dt_sim_s = v;
    }
    if let Some(v) = t.travel_half_stroke_mm {
        plant.travel_half_stroke_m = v * 1.0e-3;
    }
    plant.validate().map_err(map_arcc)?;
    Ok(Device { preset, config, plant })
}

// -- scenario and loop -------------------------------------------------------

/// Builds the scenario for a device, defaulting to contact establishment
/// with the shipped geometry.
pub fn resolve_scenario(
    resolved: &Resolved,
    device: &Device,
    default_record: bool,
) -> Result<ScenarioSpec, AppError> {
    let t = &resolved.file.scenario;
    let kind = match t.kind.as_deref() {
        None => ScenarioKind::ContactEstablishment,
        Some(s) => ScenarioKind::parse(s).map_err(map_arcc)?,
    };
    let mut spec = match kind {
        ScenarioKind::ContactEstablishment => presets::contact_scenario(
            device.config,
            t.repetitions.unwrap_or(1),
            resolved.seed,
        ),
        ScenarioKind::ContourFollowing => presets::contour_scenario(
            device.config,
            t.amplitude_mm.map_or(presets::CONTOUR_AMPLITUDES_M[1], |v| v * 1.0e-3),
            t.repetitions.unwrap_or(1),
            resolved.seed,
        ),
    };
    match &mut spec.geometry {
        ScenarioGeometry::Contact { offset_m } => {
            if let Some(v) = t.offset_mm {
                *offset_m = v * 1.0e-3;
            }
            for (key, set) in [
                ("amplitude_mm", t.amplitude_mm.is_some()),
                ("wavelength_mm", t.wavelength_mm.is_some()),
                ("length_mm", t.length_mm.is_some()),
            ] {
                if set {
                    return Err(AppError::config(format!(
                        "scenario.{key} applies to contour-following only"
                    )));
                }
            }
        }
        ScenarioGeometry::Contour {
            wavelength_m,
            length_m,
            ..
        } => {
            if t.offset_mm.is_some() {
                return Err(AppError::config(
                    "scenario.offset_mm applies to contact-establishment only",
                ));
            }
            if let Some(v) = t.wavelength_mm {
                *wavelength_m = v * 1.0e-3;
            }
            if let Some(v) = t.length_mm {
                *length_m = v * 1.0e-3;
            }
        }
    }
    if let Some(v) = t.f_des_n {
        spec.f_des_n = v;
    }
    if let Some(speeds) = &mut spec.speeds {
        if let Some(v) = t.speed_initial_mm_s {
            speeds.initial_m_s = v * 1.0e-3;
        }
        if let Some(v) = t.speed_increment_mm_s {
            speeds.increment_m_s = v * 1.0e-3;
        }
        if let Some(v) = t.speed_max_mm_s {
            speeds.max_m_s = v * 1.0e-3;
        }
    } else if t.speed_initial_mm_s.is_some()
        || t.speed_increment_mm_s.is_some()
        || t.speed_max_mm_s.is_some()
    {
        return Err(AppError::config(
            "scenario.speed_* keys apply to contour-following only",
        ));
    }
    let noise_on = t.noise.unwrap_or(true);
    if !noise_on && (t.force_noise_sigma_n.is_some() || t.deflection_noise_sigma_um.is_some()) {
        return Err(AppError::config(
            "scenario.noise = false conflicts with the noise sigma keys",
        ));
    }
    spec.noise = noise_on.then(|| {
        let mut n = NoiseSpec::default();
        if let Some(v) = t.force_noise_sigma_n {
            n.force_sigma_n = v;
        }
        if let Some(v) = t.deflection_noise_sigma_um {
            n.deflection_sigma_m = v * 1.0e-6;
        }
        n
    });
    spec.record_trajectory = t.record_trajectory.unwrap_or(default_record);
    spec.validate().map_err(map_arcc)?;
    Ok(spec)
}

/// Builds the controller wiring for the device in a scenario and applies
/// the `[control]` table.
pub fn resolve_loop(
    resolved: &Resolved,
    device: &Device,
    kind: ScenarioKind,
    f_des_n: f64,
) -> Result<HybridLoopConfig, AppError> {
    let mut lc = presets::loop_for(device.config, kind, f_des_n);
    let t = &resolved.file.control;
    if let Some(v) = t.compliance_m_per_n_s {
        match (&mut lc.arcc, &mut lc.robot_force) {
            (Some(c), _) => c.compliance_m_per_n_s = v,
            (_, Some(c)) => c.compliance_m_per_n_s = v,
            _ => unreachable!("presets always wire one force branch"),
        }
    }
    if let Some(v) = t.k_pc_per_s {
        match &mut lc.compensation {
            Some(c) => c.k_pc_per_s = v,
            None => {
                return Err(AppError::config(format!(
                    "control.k_pc_per_s applies to active configurations, not `{}`",
                    device.config.id()
                )))
            }
        }
    }
    if let Some(v) = t.arcc_v_limit_m_s {
        lc.arcc_v_limit_m_s = v;
    }
    if let Some(v) = t.robot_v_limit_m_s {
        lc.robot_v_limit_m_s = v;
    }
    if let Some(v) = t.dt_ctrl_arcc_s {
        lc.dt_ctrl_arcc_s = v;
    }
    if let Some(v) = t.dt_ctrl_robot_s {
        lc.dt_ctrl_robot_s = v;
    }
    lc.validate(device.plant.dt_sim_s).map_err(map_arcc)?;
    Ok(lc)
}

// -- reproducibility echo -----------------------------------------------------

#[derive(Serialize)]
pub struct EchoScenario {
    pub config: String,
    pub kind: String,
    pub f_des_n: f64,
    pub repetitions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_initial_mm_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_increment_mm_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_max_mm_s: Option<f64>,
    pub noise: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force_noise_sigma_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deflection_noise_sigma_um: Option<f64>,
    pub record_trajectory: bool,
}

#[derive(Serialize)]
pub struct EchoPlant {
    pub m_p_kg: f64,
    pub d_n_s_per_m: f64,
    pub c_env_n_per_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_n_per_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1_n_per_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2_n_per_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_t_mm: Option<f64>,
    pub dt_sim_s: f64,
    pub travel_half_stroke_mm: f64,
    pub rigid_tool: bool,
}

#[derive(Serialize)]
pub struct EchoControl {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compliance_m_per_n_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_pc_per_s: Option<f64>,
    pub arcc_v_limit_m_s: f64,
    pub robot_v_limit_m_s: f64,
    pub dt_ctrl_arcc_s: f64,
    pub dt_ctrl_robot_s: f64,
}

pub fn echo_scenario(spec: &ScenarioSpec) -> EchoScenario {
    let mut e = EchoScenario {
        config: spec.config.id().to_string(),
        kind: spec.kind.id().to_string(),
        f_des_n: spec.f_des_n,
        repetitions: spec.repetitions,
        offset_mm: None,
        amplitude_mm: None,
        wavelength_mm: None,
        length_mm: None,
        speed_initial_mm_s: None,
        speed_increment_mm_s: None,
        speed_max_mm_s: None,
        noise: spec.noise.is_some(),
        force_noise_sigma_n: spec.noise.as_ref().map(|n| n.force_sigma_n),
        deflection_noise_sigma_um: spec.noise.as_ref().map(|n| n.deflection_sigma_m * 1.0e6),
        record_trajectory: spec.record_trajectory,
    };
    match spec.geometry {
        ScenarioGeometry::Contact { offset_m } => e.offset_mm = Some(offset_m * 1.0e3),
        ScenarioGeometry::Contour {
            amplitude_m,
            wavelength_m,
            length_m,
        } => {
            e.amplitude_mm = Some(amplitude_m * 1.0e3);
            e.wavelength_mm = Some(wavelength_m * 1.0e3);
            e.length_mm = Some(length_m * 1.0e3);
        }
    }
    if let Some(SpeedSchedule {
        initial_m_s,
        increment_m_s,
        max_m_s,
    }) = spec.speeds
    {
        e.speed_initial_mm_s = Some(initial_m_s * 1.0e3);
        e.speed_increment_mm_s = Some(increment_m_s * 1.0e3);
        e.speed_max_mm_s = Some(max_m_s * 1.0e3);
    }
    e
}

pub fn echo_plant(plant: &PlantConfig) -> EchoPlant {
    let (c, c1, c2, x_t) = match &plant.spring {
        SpringModel::Linear { c_n_per_mm } => (Some(*c_n_per_mm), None, None, None),
        SpringModel::TwoStage(s) => (
            None,
            Some(s.c1_n_per_mm),
            Some(s.c2_n_per_mm),
            Some(s.x_t_mm),
        ),
    };
    EchoPlant {
        m_p_kg: plant.m_p_kg,
        d_n_s_per_m: plant.d_n_s_per_m,
        c_env_n_per_m: plant.env.c_env_n_per_m,
        c_n_per_mm: c,
        c1_n_per_mm: c1,
        c2_n_per_mm: c2,
        x_t_mm: x_t,
        dt_sim_s: plant.dt_sim_s,
        travel_half_stroke_mm: plant.travel_half_stroke_m * 1.0e3,
        rigid_tool: plant.rigid_tool,
    }
}

pub fn echo_control(lc: &HybridLoopConfig) -> EchoControl {
    EchoControl {
        compliance_m_per_n_s: lc
            .arcc
            .as_ref()
            .map(|c| c.compliance_m_per_n_s)
            .or_else(|| lc.robot_force.as_ref().map(|c| c.compliance_m_per_n_s)),
        k_pc_per_s: lc.compensation.as_ref().map(|c| c.k_pc_per_s),
        arcc_v_limit_m_s: lc.arcc_v_limit_m_s,
        robot_v_limit_m_s: lc.robot_v_limit_m_s,
        dt_ctrl_arcc_s: lc.dt_ctrl_arcc_s,
        dt_ctrl_robot_s: lc.dt_ctrl_robot_s,
    }
}

/// Writes the reproducibility pair: the fully resolved configuration and a
/// manifest with its hash, the seed, and the toolkit version.
pub fn write_run_artifacts(out: &Path, resolved_toml: &str, seed: u64) -> Result<(), AppError> {
    fs::create_dir_all(out)
        .map_err(|e| AppError::runtime(format!("cannot create {}: {e}", out.display())))?;
    let io = |e: std::io::Error| AppError::runtime(format!("write under {}: {e}", out.display()));
    fs::write(out.join("resolved_config.toml"), resolved_toml).map_err(io)?;
    let digest = Sha256::digest(resolved_toml.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let manifest = serde_json::json!({
        "config_sha256": hex,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let pretty = serde_json::to_string_pretty(&manifest)
        .map_err(|e| AppError::runtime(e.to_string()))?;
    fs::write(out.join("manifest.json"), pretty + "\n").map_err(io)
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String, AppError> {
    toml::to_string_pretty(value).map_err(|e| AppError::runtime(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mismatch_names_the_expected_key() {
        let err = toml::from_str::<FileConfig>("[scenario]\noffset_m = 1.0")
            .map_err(|e| diagnose_toml_error(&e.to_string()))
            .unwrap_err();
        assert!(
            err.contains("unit mismatch") && err.contains("offset_mm"),
            "{err}"
        );
    }

    #[test]
    fn unknown_key_is_named() {
        let err = toml::from_str::<FileConfig>("volume = 3")
            .map_err(|e| diagnose_toml_error(&e.to_string()))
            .unwrap_err();
        assert!(err.contains("unknown config key `volume`"), "{err}");
    }

    #[test]
    fn empty_config_parses_to_defaults() {
        let cfg: FileConfig = toml::from_str("").unwrap();
        assert!(cfg.preset.is_none() && cfg.scenario.kind.is_none());
    }

    #[test]
    fn stems_strip_unit_suffixes() {
        assert_eq!(unit_stem("offset_mm"), "offset");
        assert_eq!(unit_stem("offset_m"), "offset");
        assert_eq!(unit_stem("d_n_s_per_m"), "d");
        assert_eq!(unit_stem("compliance_m_per_n_s"), "compliance");
        assert_eq!(unit_stem("repetitions"), "repetitions");
        assert_eq!(unit_stem("noise"), "noise");
    }
}
