//! The five subcommands: scenario simulation, benchmark suite, system
//! identification, gain-limit tuning, and frequency-response export.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use arcc::bench::{
    aggregate, compare_configurations, BenchReport, ConfigId, RunResult, ScenarioKind,
    ScenarioSpec,
};
use arcc::control::{
    apply_safety_reduction, arcc_force_chain, robot_force_chain, MarginOutcome, MarginSetup,
};
use arcc::lti::{write_bode_csv, TransferFunction};
use arcc::plant::{write_trajectory_csv, PlantConfig, SpringStage};
use arcc::presets;
use arcc::sysid::{add_gaussian_noise, generate_sweep, iv_identify, IdentifiedModel, Signal};

use crate::config::{
    self, echo_control, echo_plant, echo_scenario, resolve_common, resolve_device, resolve_loop,
    resolve_scenario, to_toml, write_run_artifacts, EchoControl, EchoPlant, EchoScenario,
};
use crate::{map_arcc, AppError, CommonArgs};

const BODE_F_LO_HZ: f64 = 0.05;
const BODE_F_HI_HZ: f64 = 500.0;
const BODE_POINTS_PER_DECADE: usize = 100;
/// Parameter tolerance the identification self test must meet at 20 dB
/// output noise.
const SELF_TEST_TOL: f64 = 0.05;

fn write_file(path: &Path, content: &str) -> Result<(), AppError> {
    fs::write(path, content)
        .map_err(|e| AppError::runtime(format!("write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<File, AppError> {
    File::create(path).map_err(|e| AppError::runtime(format!("create {}: {e}", path.display())))
}

// -- simulate -----------------------------------------------------------------

#[derive(Serialize)]
struct EchoRun {
    command: String,
    preset: String,
    seed: u64,
    scenario: EchoScenario,
    plant: EchoPlant,
    control: EchoControl,
}

fn run_summary(r: &RunResult) -> String {
    match r.kind {
        ScenarioKind::ContactEstablishment => format!(
            "run {}: duration {:.3} s, overshoot {:.2} N, force error {:.3} +- {:.3} N{}",
            r.run_index,
            r.duration_s,
            r.overshoot_n,
            r.ferr_mean_n,
            r.ferr_std_n,
            if r.timed_out { " [timed out]" } else { "" },
        ),
        ScenarioKind::ContourFollowing => format!(
            "run {}: max speed {:.1} mm/s over {} ramp steps, force error {:.3} +- {:.3} N",
            r.run_index,
            r.vmax_m_s.unwrap_or(0.0) * 1.0e3,
            r.per_speed.len(),
            r.ferr_mean_n,
            r.ferr_std_n,
        ),
    }
}

pub fn simulate(args: &CommonArgs) -> Result<(), AppError> {
    let resolved = resolve_common(args, "simulate")?;
    let device = resolve_device(&resolved)?;
    let spec = resolve_scenario(&resolved, &device, true)?;
    let loop_cfg = resolve_loop(&resolved, &device, spec.kind, spec.f_des_n)?;

    let echo = to_toml(&EchoRun {
        command: "simulate".into(),
        preset: device.preset.clone(),
        seed: resolved.seed,
        scenario: echo_scenario(&spec),
        plant: echo_plant(&device.plant),
        control: echo_control(&loop_cfg),
    })?;
    write_run_artifacts(&resolved.out, &echo, resolved.seed)?;

    let bundle = (spec, device.plant, loop_cfg);
    let report = compare_configurations(std::slice::from_ref(&bundle)).map_err(map_arcc)?;

    report
        .write_results_csv(create(&resolved.out.join("results.csv"))?)
        .map_err(map_arcc)?;
    for r in &report.results {
        if let Some(points) = &r.trajectory {
            let path = resolved.out.join(format!("trajectory_run{}.csv", r.run_index));
            write_trajectory_csv(create(&path)?, points).map_err(map_arcc)?;
        }
        println!("{}", run_summary(r));
    }
    for note in &report.failures {
        println!("note: {note}");
    }
    println!("wrote {}", resolved.out.join("results.csv").display());

    if resolved.check {
        if !report.failures.is_empty() {
            return Err(AppError::check(report.failures.join("; ")));
        }
        for r in &report.results {
            if r.timed_out {
                return Err(AppError::check(format!(
                    "run {} did not settle within the timeout",
                    r.run_index
                )));
            }
            if r.kind == ScenarioKind::ContourFollowing && r.vmax_m_s.unwrap_or(0.0) <= 0.0 {
                return Err(AppError::check(format!(
                    "run {} lost contact at the first ramp speed",
                    r.run_index
                )));
            }
        }
    }
    Ok(())
}

// -- bench ---------------------------------------------------------------------

#[derive(Serialize)]
struct EchoBench {
    command: String,
    preset: String,
    seed: u64,
    contact_repetitions: usize,
    contour_repetitions: usize,
    contour_amplitudes_mm: Vec<f64>,
    noise: bool,
}

type Bundle = (ScenarioSpec, PlantConfig, arcc::control::HybridLoopConfig);

fn contact_bundles(seed: u64, repetitions: usize) -> Vec<Bundle> {
    ConfigId::ALL
        .into_iter()
        .map(|config| {
            (
                presets::contact_scenario(config, repetitions, seed),
                presets::plant_for(config),
                presets::loop_for(
                    config,
                    ScenarioKind::ContactEstablishment,
                    presets::CONTACT_F_DES_N,
                ),
            )
        })
        .collect()
}

fn contour_bundles(seed: u64, amplitude_m: f64, repetitions: usize) -> Vec<Bundle> {
    ConfigId::ALL
        .into_iter()
        .map(|config| {
            (
                presets::contour_scenario(config, amplitude_m, repetitions, seed),
                presets::plant_for(config),
                presets::loop_for(
                    config,
                    ScenarioKind::ContourFollowing,
                    presets::CONTOUR_F_DES_N,
                ),
            )
        })
        .collect()
}

fn vmax_ratio(report: &BenchReport, active: ConfigId) -> Option<f64> {
    let vmax = |config: ConfigId| -> Option<f64> {
        report
            .results
            .iter()
            .find(|r| r.config == config)
            .and_then(|r| r.vmax_m_s)
    };
    Some(vmax(active)? / vmax(ConfigId::RobotOnly)?)
}

pub fn bench(args: &CommonArgs) -> Result<(), AppError> {
    let resolved = resolve_common(args, "bench")?;
    if let Some(preset) = &resolved.preset {
        if preset != "paper-iv" {
            return Err(AppError::config(format!(
                "bench runs the `paper-iv` bundle; preset `{preset}` is not a benchmark suite"
            )));
        }
    }
    let contact_reps = resolved.file.scenario.repetitions.unwrap_or(20);
    let contour_reps = 1;

    let echo = to_toml(&EchoBench {
        command: "bench".into(),
        preset: "paper-iv".into(),
        seed: resolved.seed,
        contact_repetitions: contact_reps,
        contour_repetitions: contour_reps,
        contour_amplitudes_mm: presets::CONTOUR_AMPLITUDES_M
            .iter()
            .map(|a| a * 1.0e3)
            .collect(),
        noise: true,
    })?;
    write_run_artifacts(&resolved.out, &echo, resolved.seed)?;

    let seed = resolved.seed;
    let contact = contact_bundles(seed, contact_reps);
    let small = contour_bundles(seed, presets::CONTOUR_AMPLITUDES_M[0], contour_reps);
    let large = contour_bundles(seed, presets::CONTOUR_AMPLITUDES_M[1], contour_reps);

    // the three scenario families are independent; join before aggregation
    let (contact_report, small_report, large_report) = std::thread::scope(|scope| {
        let hc = scope.spawn(|| compare_configurations(&contact));
        let hs = scope.spawn(|| compare_configurations(&small));
        let hl = scope.spawn(|| compare_configurations(&large));
        (hc.join(), hs.join(), hl.join())
    });
    let unpack = |r: std::thread::Result<arcc::Result<BenchReport>>| -> Result<BenchReport, AppError> {
        r.map_err(|_| AppError::runtime("benchmark worker panicked"))?
            .map_err(map_arcc)
    };
    let contact_report = unpack(contact_report)?;
    let small_report = unpack(small_report)?;
    let large_report = unpack(large_report)?;

    let mut results = contact_report.results;
    results.extend(small_report.results.iter().cloned());
    results.extend(large_report.results.iter().cloned());
    let mut failures = contact_report.failures;
    failures.extend(small_report.failures.iter().cloned());
    failures.extend(large_report.failures.iter().cloned());
    let merged = BenchReport {
        rows: aggregate(&results).map_err(map_arcc)?,
        results,
        failures,
    };

    merged
        .write_results_csv(create(&resolved.out.join("results.csv"))?)
        .map_err(map_arcc)?;
    // one force-error series per contour amplitude; the 10 mm headline
    // contour keeps the short name
    large_report
        .write_contour_series_csv(create(&resolved.out.join("contour_series.csv"))?)
        .map_err(map_arcc)?;
    small_report
        .write_contour_series_csv(create(&resolved.out.join("contour_series_2.5mm.csv"))?)
        .map_err(map_arcc)?;
    let markdown = merged.to_markdown(Some(presets::FORCE_CEILING_N));
    write_file(&resolved.out.join("report.md"), &markdown)?;
    println!("{markdown}");
    println!("wrote {}", resolved.out.join("report.md").display());

    if resolved.check {
        bench_checks(&merged, &small_report, &large_report)?;
        println!("check: all benchmark orderings hold");
    }
    Ok(())
}

/// The acceptance-tagged orderings: active configurations establish contact
/// at least twice as fast as the plain robot, the passive wrist lands in
/// between, and the contour speed advantage stays in the expected band.
fn bench_checks(
    merged: &BenchReport,
    small: &BenchReport,
    large: &BenchReport,
) -> Result<(), AppError> {
    if !merged.failures.is_empty() {
        return Err(AppError::check(merged.failures.join("; ")));
    }
    let contact_mean = |config: ConfigId, f: fn(&RunResult) -> f64| -> f64 {
        let rs: Vec<_> = merged
            .results
            .iter()
            .filter(|r| r.config == config && r.kind == ScenarioKind::ContactEstablishment)
            .collect();
        rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64
    };
    let dur = |c| contact_mean(c, |r| r.duration_s);
    let (d_robot, d_rcc) = (dur(ConfigId::RobotOnly), dur(ConfigId::RobotRcc));
    let (d_one, d_two) = (dur(ConfigId::ArccOneStage), dur(ConfigId::ArccTwoStage));
    if !(d_one * 2.0 <= d_robot && d_two * 2.0 <= d_robot) {
        return Err(AppError::check(format!(
            "active configurations are not 2x faster: {d_one:.2} / {d_two:.2} vs {d_robot:.2} s"
        )));
    }
    if !(d_robot > d_rcc && d_rcc > d_two && d_rcc > d_one) {
        return Err(AppError::check(format!(
            "duration ordering broken: robot {d_robot:.2}, wrist {d_rcc:.2}, \
             active {d_one:.2} / {d_two:.2} s"
        )));
    }
    let o_robot = contact_mean(ConfigId::RobotOnly, |r| r.overshoot_n);
    let o_two = contact_mean(ConfigId::ArccTwoStage, |r| r.overshoot_n);
    if o_robot >= o_two {
        return Err(AppError::check(format!(
            "overshoot ordering broken: robot {o_robot:.2} N vs active {o_two:.2} N"
        )));
    }
    for (label, report) in [("2.5 mm", small), ("10 mm", large)] {
        for active in [ConfigId::ArccOneStage, ConfigId::ArccTwoStage] {
            let ratio = vmax_ratio(report, active)
                .ok_or_else(|| AppError::check(format!("{label}: missing contour speeds")))?;
            if !(2.0..=6.0).contains(&ratio) {
                return Err(AppError::check(format!(
                    "{label}: {} speed ratio {ratio:.2} outside [2, 6]",
                    active.id()
                )));
            }
        }
    }
    Ok(())
}

// -- identify -------------------------------------------------------------------

#[derive(Serialize)]
struct EchoIdentify {
    command: String,
    seed: u64,
    mode: String,
    order: usize,
    zeros: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_u_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_y_sha256: Option<String>,
}

fn sha256_file(path: &Path) -> Result<String, AppError> {
    let bytes = fs::read(path)
        .map_err(|e| AppError::config(format!("cannot read {}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn read_signal(path: &Path, unit: &str) -> Result<Signal, AppError> {
    let file = File::open(path)
        .map_err(|e| AppError::config(format!("cannot open {}: {e}", path.display())))?;
    Signal::read_csv(BufReader::new(file), unit).map_err(map_arcc)
}

fn zoh_response(tf: &TransferFunction, u: &Signal) -> Result<Signal, AppError> {
    let ss = tf
        .to_state_space()
        .and_then(|ss| ss.discretize_zoh(1.0 / u.sample_rate_hz))
        .map_err(map_arcc)?;
    let samples = ss.simulate(&u.samples).map_err(map_arcc)?;
    Signal::new(u.sample_rate_hz, samples, "m/s").map_err(map_arcc)
}

fn print_model(model: &IdentifiedModel) {
    println!(
        "order {} model, fit {:.1}%, rms error {:.4}, {} refinement passes",
        model.order, model.fit_percent, model.rms_error, model.iterations
    );
}

pub fn identify(
    args: &CommonArgs,
    self_test: bool,
    input_u: Option<PathBuf>,
    input_y: Option<PathBuf>,
    order: usize,
    zeros: usize,
) -> Result<(), AppError> {
    let resolved = resolve_common(args, "identify")?;
    if self_test == (input_u.is_some() && input_y.is_some()) {
        return Err(AppError::config(
            "identify needs exactly one input mode: --self-test, or --input-u with --input-y",
        ));
    }

    if self_test {
        // round trip: sweep a known model, bury it in 20 dB output noise,
        // and demand the estimate lands back on it
        let truth = match order {
            1 => presets::identified_arcc_loaded(),
            2 => TransferFunction::new(
                vec![
                    presets::TOOL_DAMPING_N_S_PER_M,
                    presets::TWO_STAGE_C1_N_PER_MM * 1.0e3,
                ],
                vec![
                    presets::TOOL_MASS_KG,
                    presets::TOOL_DAMPING_N_S_PER_M,
                    presets::TWO_STAGE_C1_N_PER_MM * 1.0e3 + presets::CONTACT_STIFFNESS_N_PER_M,
                ],
            )
            .map_err(map_arcc)?,
            n => {
                return Err(AppError::config(format!(
                    "self test covers model orders 1 and 2, not {n}"
                )))
            }
        };
        let u = generate_sweep(10.0, 120.0, 10.0, 1000.0, 1.0).map_err(map_arcc)?;
        let clean = zoh_response(&truth, &u)?;
        let rms =
            (clean.samples.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64).sqrt();
        let noisy = add_gaussian_noise(&clean, rms / 10.0, resolved.seed).map_err(map_arcc)?;
        let model = iv_identify(&u, &noisy, order, zeros).map_err(map_arcc)?;

        let echo = to_toml(&EchoIdentify {
            command: "identify".into(),
            seed: resolved.seed,
            mode: "self-test".into(),
            order,
            zeros,
            input_u_sha256: None,
            input_y_sha256: None,
        })?;
        write_run_artifacts(&resolved.out, &echo, resolved.seed)?;
        u.write_csv(create(&resolved.out.join("u.csv"))?).map_err(map_arcc)?;
        noisy.write_csv(create(&resolved.out.join("y.csv"))?).map_err(map_arcc)?;
        model
            .write_report_json(create(&resolved.out.join("id_report.json"))?)
            .map_err(map_arcc)?;
        print_model(&model);

        let worst = match order {
            1 => {
                let k = model.tf.dc_gain().map_err(map_arcc)?;
                let t = model.tf.den[0] / model.tf.den[1];
                let k_true = truth.dc_gain().map_err(map_arcc)?;
                let t_true = truth.den[0] / truth.den[1];
                (k / k_true - 1.0).abs().max((t / t_true - 1.0).abs())
            }
            _ => {
                let mut truth_poles = truth.poles().map_err(map_arcc)?;
                let mut est = model.tf.poles().map_err(map_arcc)?;
                truth_poles.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
                est.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
                truth_poles
                    .iter()
                    .zip(est.iter())
                    .map(|(p, q)| (p - q).norm() / p.norm())
                    .fold(0.0, f64::max)
            }
        };
        let ok = worst < SELF_TEST_TOL;
        println!(
            "self-test {}: worst parameter error {:.2}% at 20 dB output noise",
            if ok { "PASS" } else { "FAIL" },
            worst * 100.0
        );
        if resolved.check && !ok {
            return Err(AppError::check(format!(
                "self-test parameter error {:.2}% exceeds {:.0}%",
                worst * 100.0,
                SELF_TEST_TOL * 100.0
            )));
        }
        return Ok(());
    }

    let (u_path, y_path) = (input_u.unwrap(), input_y.unwrap());
    let u = read_signal(&u_path, "input")?;
    let y = read_signal(&y_path, "output")?;
    let model = iv_identify(&u, &y, order, zeros).map_err(map_arcc)?;

    let echo = to_toml(&EchoIdentify {
        command: "identify".into(),
        seed: resolved.seed,
        mode: "file".into(),
        order,
        zeros,
        input_u_sha256: Some(sha256_file(&u_path)?),
        input_y_sha256: Some(sha256_file(&y_path)?),
    })?;
    write_run_artifacts(&resolved.out, &echo, resolved.seed)?;
    model
        .write_report_json(create(&resolved.out.join("id_report.json"))?)
        .map_err(map_arcc)?;
    print_model(&model);
    println!("wrote {}", resolved.out.join("id_report.json").display());

    if resolved.check && model.fit_percent <= 0.0 {
        return Err(AppError::check(format!(
            "model fit {:.1}% does not beat the mean predictor",
            model.fit_percent
        )));
    }
    Ok(())
}

// -- tune -----------------------------------------------------------------------

#[derive(Serialize)]
struct LoopTuning {
    rate_hz: f64,
    delay_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    critical_compliance_m_per_n_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recommended_compliance_m_per_n_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct TuneReport {
    robot: LoopTuning,
    #[serde(skip_serializing_if = "Option::is_none")]
    arcc: Option<LoopTuning>,
}

#[derive(Serialize)]
struct EchoTune {
    command: String,
    preset: String,
    seed: u64,
    plant: EchoPlant,
}

fn tune_loop(setup: &MarginSetup, rate_hz: f64) -> Result<LoopTuning, AppError> {
    // each search spans a bounded gain range; restart from the proven-stable
    // end until the limit is bracketed or the range is clearly exhausted
    let mut initial = 1.0e-8;
    let mut last_stable = initial;
    for _ in 0..4 {
        match setup.critical_gain(initial).map_err(map_arcc)? {
            MarginOutcome::Critical { gain } => {
                return Ok(LoopTuning {
                    rate_hz,
                    delay_samples: 1,
                    critical_compliance_m_per_n_s: Some(gain),
                    recommended_compliance_m_per_n_s: Some(
                        apply_safety_reduction(gain).map_err(map_arcc)?,
                    ),
                    note: None,
                })
            }
            MarginOutcome::GainStable { tested_up_to } => {
                last_stable = tested_up_to;
                initial = tested_up_to / 2.0;
            }
        }
    }
    Ok(LoopTuning {
        rate_hz,
        delay_samples: 1,
        critical_compliance_m_per_n_s: None,
        recommended_compliance_m_per_n_s: None,
        note: Some(format!("stable at every gain tested up to {last_stable:.3e}")),
    })
}

pub fn tune(args: &CommonArgs) -> Result<(), AppError> {
    let resolved = resolve_common(args, "tune")?;
    let device = resolve_device(&resolved)?;
    let plant = &device.plant;
    let t = &resolved.file.control;
    let robot_rate = 1.0 / t.dt_ctrl_robot_s.unwrap_or(presets::DT_CTRL_ROBOT_S);
    let arcc_rate = 1.0 / t.dt_ctrl_arcc_s.unwrap_or(presets::DT_CTRL_ARCC_S);

    let robot_setup = MarginSetup::new(
        robot_force_chain(plant.robot.k_r, plant.robot.t_r_s, plant.env.c_env_n_per_m)
            .map_err(map_arcc)?,
        robot_rate,
        1,
    )
    .map_err(map_arcc)?;
    let robot = tune_loop(&robot_setup, robot_rate)?;

    let arcc = if device.config.is_active() {
        let setup = MarginSetup::new(
            arcc_force_chain(
                &plant.motor,
                plant.m_p_kg,
                plant.d_n_s_per_m,
                plant.spring.stage_stiffness_si(SpringStage::One),
                plant.env.c_env_n_per_m,
            )
            .map_err(map_arcc)?,
            arcc_rate,
            1,
        )
        .map_err(map_arcc)?;
        Some(tune_loop(&setup, arcc_rate)?)
    } else {
        None
    };

    let echo = to_toml(&EchoTune {
        command: "tune".into(),
        preset: device.preset.clone(),
        seed: resolved.seed,
        plant: echo_plant(plant),
    })?;
    write_run_artifacts(&resolved.out, &echo, resolved.seed)?;
    let report = TuneReport { robot, arcc };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| AppError::runtime(e.to_string()))?;
    write_file(&resolved.out.join("tune.json"), &(json.clone() + "\n"))?;
    println!("{json}");

    if resolved.check {
        let (Some(rc), Some(ac)) = (
            report.robot.critical_compliance_m_per_n_s,
            report
                .arcc
                .as_ref()
                .and_then(|l| l.critical_compliance_m_per_n_s),
        ) else {
            return Err(AppError::check(
                "check needs finite gain limits for both loops; \
                 run against an active configuration",
            ));
        };
        let ratio = ac / rc;
        if ratio < 5.0 {
            return Err(AppError::check(format!(
                "active/robot gain-limit ratio {ratio:.2} below 5"
            )));
        }
        println!("check: gain-limit ratio {ratio:.1} >= 5");
    }
    Ok(())
}

// -- bode -----------------------------------------------------------------------

#[derive(Serialize)]
struct EchoBode {
    command: String,
    preset: String,
    seed: u64,
    f_lo_hz: f64,
    f_hi_hz: f64,
    points_per_decade: usize,
    files: Vec<String>,
}

fn bode_models(
    resolved: &config::Resolved,
) -> Result<(String, Vec<(String, TransferFunction)>), AppError> {
    let name = resolved.preset.as_deref().unwrap_or("fig4");
    let single = presets::plant_for(ConfigId::ArccOneStage);
    let models = match name {
        "fig4" => {
            let contact = single
                .linearize(SpringStage::One, true)
                .map_err(map_arcc)?;
            let free = single
                .linearize(SpringStage::One, false)
                .map_err(map_arcc)?;
            let mut models = presets::identified_models()
                .into_iter()
                .map(|(n, tf)| (format!("bode_{n}.csv").replace('-', "_"), tf))
                .collect::<Vec<_>>();
            models.push(("bode_compliance_contact.csv".into(), contact.g_arcc));
            models.push(("bode_compliance_free.csv".into(), free.g_arcc));
            models
        }
        "robot-fig4" => vec![(
            "bode_robot.csv".to_string(),
            presets::identified_robot(),
        )],
        "arcc-single-10n-mm" | "arcc-two-stage" | "arcc-two-stage-nominal" => {
            let resolved_device = resolve_device(resolved)?;
            let contact = resolved_device
                .plant
                .linearize(SpringStage::One, true)
                .map_err(map_arcc)?;
            let free = resolved_device
                .plant
                .linearize(SpringStage::One, false)
                .map_err(map_arcc)?;
            vec![
                ("bode_motor.csv".to_string(), contact.g_m),
                ("bode_robot.csv".to_string(), contact.g_r),
                ("bode_compliance_contact.csv".to_string(), contact.g_arcc),
                ("bode_compliance_free.csv".to_string(), free.g_arcc),
            ]
        }
        other => {
            return Err(AppError::config(format!(
                "preset `{other}` has no frequency-response set; use fig4 or a device preset"
            )))
        }
    };
    Ok((name.to_string(), models))
}

pub fn bode(args: &CommonArgs) -> Result<(), AppError> {
    let resolved = resolve_common(args, "bode")?;
    let (preset, models) = bode_models(&resolved)?;

    let echo = to_toml(&EchoBode {
        command: "bode".into(),
        preset,
        seed: resolved.seed,
        f_lo_hz: BODE_F_LO_HZ,
        f_hi_hz: BODE_F_HI_HZ,
        points_per_decade: BODE_POINTS_PER_DECADE,
        files: models.iter().map(|(n, _)| n.clone()).collect(),
    })?;
    write_run_artifacts(&resolved.out, &echo, resolved.seed)?;

    for (file, tf) in &models {
        let points = tf
            .bode_points(BODE_F_LO_HZ, BODE_F_HI_HZ, BODE_POINTS_PER_DECADE)
            .map_err(map_arcc)?;
        write_bode_csv(create(&resolved.out.join(file))?, &points).map_err(map_arcc)?;
        println!("wrote {}", resolved.out.join(file).display());
    }

    if resolved.check {
        // out of contact the compliance path must pass velocity through at DC
        for (file, tf) in &models {
            if file.contains("compliance_free") {
                let dc = tf.dc_gain().map_err(map_arcc)?;
                if (dc - 1.0).abs() >= 1.0e-12 {
                    return Err(AppError::check(format!(
                        "free compliance DC gain {dc} deviates from 1"
                    )));
                }
            }
        }
        println!("check: DC invariants hold");
    }
    Ok(())
}
