//! Sweep excitation and parametric system identification: linear-chirp
//! generation, iterative instrumental-variable estimation of first- and
//! second-order models with exact inverse zero-order-hold conversion to
//! continuous time, and the fit metrics used to judge the results.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::lti::TransferFunction;

/// Uniformly sampled scalar signal with its unit carried as metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    /// Sample rate (Hz).
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
    /// Physical unit of the samples, e.g. "m/s"; informational only.
    pub unit: String,
}

impl Signal {
    pub fn new(sample_rate_hz: f64, samples: Vec<f64>, unit: impl Into<String>) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a signal needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        Ok(Self {
            sample_rate_hz,
            samples,
            unit: unit.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time span covered by the samples (s).
    pub fn duration_s(&self) -> f64 {
        (self.samples.len().saturating_sub(1)) as f64 / self.sample_rate_hz
    }

    /// Writes the two-column `t,value` form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,value")?;
        let dt = 1.0 / self.sample_rate_hz;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{:.8e},{:.8e}", i as f64 * dt, v)?;
        }
        Ok(())
    }

    /// Reads the two-column `t,value` form; the sample rate is inferred from
    /// the time column, which must be uniform.
    pub fn read_csv<R: BufRead>(r: R, unit: impl Into<String>) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty signal file".into()))??;
        if header.trim() != "t,value" {
            return Err(Error::InvalidParameter(format!(
                "expected header 't,value', got '{header}'"
            )));
        }
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (t, v) = match (parts.next(), parts.next()) {
                (Some(t), Some(v)) => (t, v),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "malformed signal row '{line}'"
                    )))
                }
            };
            times.push(t.trim().parse::<f64>().map_err(|e| {
                Error::InvalidParameter(format!("bad time value '{t}': {e}"))
            })?);
            values.push(v.trim().parse::<f64>().map_err(|e| {
                Error::InvalidParameter(format!("bad sample value '{v}': {e}"))
            })?);
        }
        if times.len() < 2 {
            return Err(Error::InvalidParameter(
                "a signal needs at least 2 samples".into(),
            ));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("time column must increase".into()));
        }
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1.0e-6 * dt {
                return Err(Error::InvalidParameter(
                    "time column is not uniformly spaced".into(),
                ));
            }
        }
        Signal::new(1.0 / dt, values, unit)
    }
}

/// Linear chirp sweeping `f_lo` to `f_hi` over the duration at constant
/// amplitude. The degenerate `f_lo = f_hi` case is a pure sinusoid.
pub fn generate_sweep(
    f_lo_hz: f64,
    f_hi_hz: f64,
    duration_s: f64,
    sample_rate_hz: f64,
    amplitude: f64,
) -> Result<Signal> {
    if !(f_lo_hz > 0.0 && f_hi_hz >= f_lo_hz) {
        return Err(Error::InvalidParameter(format!(
            "sweep needs 0 < f_lo <= f_hi, got ({f_lo_hz}, {f_hi_hz})"
        )));
    }
    if !(f_hi_hz < sample_rate_hz / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "sweep top {f_hi_hz} Hz violates the Nyquist limit of {} Hz",
            sample_rate_hz / 2.0
        )));
    }
    if !(duration_s > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter(
            "sweep duration must be positive and amplitude finite".into(),
        ));
    }
    let n = (duration_s * sample_rate_hz).round() as usize;
    if n < 2 {
        return Err(Error::InvalidParameter(
            "sweep too short for the sample rate".into(),
        ));
    }
    let rate = (f_hi_hz - f_lo_hz) / duration_s;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate_hz;
            let phase = std::f64::consts::TAU * (f_lo_hz * t + 0.5 * rate * t * t);
            amplitude * phase.sin()
        })
        .collect();
    Signal::new(sample_rate_hz, samples, "")
}

/// Adds zero-mean Gaussian noise with the given standard deviation,
/// reproducible from the seed.
pub fn add_gaussian_noise(signal: &Signal, sigma: f64, seed: u64) -> Result<Signal> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be non-negative, got {sigma}"
        )));
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParameter(format!("bad noise level: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = signal
        .samples
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect();
    Signal::new(signal.sample_rate_hz, samples, signal.unit.clone())
}

/// Identification result: the continuous-time model with its fit metrics and
/// estimation metadata.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IdentifiedModel {
    /// Continuous-time transfer function recovered by inverse ZOH mapping.
    pub tf: TransferFunction,
    /// Fit percentage 100 (1 - |y - y_hat| / |y - mean(y)|); at most 100.
    pub fit_percent: f64,
    /// Mean squared one-step output error (squared signal unit).
    pub mse: f64,
    /// Root of `mse` (signal unit).
    pub rms_error: f64,
    /// Denominator order of the model.
    pub order: usize,
    /// Instrumental-variable refinement passes actually run.
    pub iterations: usize,
    /// Input delay, in samples, assumed by the regression.
    pub instrument_lag: usize,
    /// Relative parameter change at the last refinement pass.
    pub final_relative_step: f64,
}

/// JSON identification report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IdReport {
    pub model_order: usize,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub fit_percent: f64,
    pub mse: f64,
    pub rms_error: f64,
}

impl IdentifiedModel {
    pub fn report(&self) -> IdReport {
        IdReport {
            model_order: self.order,
            numerator: self.tf.num.clone(),
            denominator: self.tf.den.clone(),
            fit_percent: self.fit_percent,
            mse: self.mse,
            rms_error: self.rms_error,
        }
    }

    pub fn write_report_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.report())
            .map_err(|e| Error::Estimation(format!("report serialization failed: {e}")))
    }
}

const IV_MAX_ITERATIONS: usize = 50;
const IV_REL_TOL: f64 = 1.0e-8;

/// Estimates a discrete model by least squares followed by iterative
/// instrumental variables (instruments are the previous model's noise-free
/// simulated outputs), then converts it to continuous time exactly through
/// the inverse of the zero-order-hold map. `order` is 1 or 2; `zeros` is the
/// number of continuous-time zeros kept (0, or 1 for order 2).
pub fn iv_identify(u: &Signal, y: &Signal, order: usize, zeros: usize) -> Result<IdentifiedModel> {
    if u.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: y.len(),
        });
    }
    if (u.sample_rate_hz - y.sample_rate_hz).abs() > 1.0e-9 * u.sample_rate_hz {
        return Err(Error::InvalidParameter(format!(
            "input and output sample rates differ: {} vs {} Hz",
            u.sample_rate_hz, y.sample_rate_hz
        )));
    }
    match (order, zeros) {
        (1, 0) | (2, 0) | (2, 1) => {}
        (1, 1) => {
            return Err(Error::InvalidParameter(
                "a first-order model with a zero is not strictly proper; use zeros = 0".into(),
            ))
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unsupported model class: order {order} with {zeros} zeros"
            )))
        }
    }
    let na = order;
    let nb = order;
    let delay = 1usize;
    if u.len() < 10 * (na + nb) {
        return Err(Error::Estimation(format!(
            "{} samples are too few for a {na}+{nb} parameter fit",
            u.len()
        )));
    }

    let mut theta = arx_least_squares(&u.samples, &y.samples, na, nb)?;
    let mut iterations = 0usize;
    let mut final_step = 0.0f64;
    for _ in 0..IV_MAX_ITERATIONS {
        let y_model = simulate_arx(&theta, na, nb, &u.samples);
        if y_model.iter().any(|v| !v.is_finite()) {
            return Err(Error::Estimation(format!(
                "instrument simulation diverged at refinement pass {iterations}; last relative step {final_step:.3e}"
            )));
        }
        let theta_next = iv_step(&u.samples, &y.samples, &y_model, na, nb)?;
        iterations += 1;
        let denom = theta.norm().max(f64::MIN_POSITIVE);
        final_step = (&theta_next - &theta).norm() / denom;
        theta = theta_next;
        if !final_step.is_finite() {
            return Err(Error::Estimation(format!(
                "parameter update lost finiteness at refinement pass {iterations}"
            )));
        }
        if final_step < IV_REL_TOL {
            break;
        }
    }

    let y_model = simulate_arx(&theta, na, nb, &u.samples);
    let dt = 1.0 / u.sample_rate_hz;
    let tf = discrete_theta_to_continuous(&theta, na, nb, zeros, dt)?;

    let y_sig = y;
    let y_hat = Signal::new(y.sample_rate_hz, y_model, y.unit.clone())?;
    let fit_percent = nrmse_fit(y_sig, &y_hat)?;
    let err = mse(y_sig, &y_hat)?;
    Ok(IdentifiedModel {
        tf,
        fit_percent,
        mse: err.mse,
        rms_error: err.rms,
        order,
        iterations,
        instrument_lag: delay,
        final_relative_step: final_step,
    })
}

/// ARX parameter order: [a_1..a_na, b_1..b_nb] for
/// y[k] = -a_1 y[k-1] - ... + b_1 u[k-1] + ...
fn arx_least_squares(u: &[f64], y: &[f64], na: usize, nb: usize) -> Result<DVector<f64>> {
    solve_correlation_system(u, y, y, na, nb, true)
}

fn iv_step(u: &[f64], y: &[f64], y_instr: &[f64], na: usize, nb: usize) -> Result<DVector<f64>> {
    solve_correlation_system(u, y, y_instr, na, nb, false)
}

/// Accumulates Z^T Phi and Z^T y over the data and solves the small square
/// system. With `y_instr = y` and `symmetric` this is ordinary least
/// squares; otherwise the instrumental-variable normal equations.
fn solve_correlation_system(
    u: &[f64],
    y: &[f64],
    y_instr: &[f64],
    na: usize,
    nb: usize,
    symmetric: bool,
) -> Result<DVector<f64>> {
    let p = na + nb;
    let k0 = na.max(nb);
    let mut ztf = DMatrix::<f64>::zeros(p, p);
    let mut zty = DVector::<f64>::zeros(p);
    let mut phi = vec![0.0f64; p];
    let mut z = vec![0.0f64; p];
    for k in k0..y.len() {
        for j in 0..na {
            phi[j] = -y[k - 1 - j];
            z[j] = -y_instr[k - 1 - j];
        }
        for j in 0..nb {
            phi[na + j] = u[k - 1 - j];
            z[na + j] = u[k - 1 - j];
        }
        for r in 0..p {
            for c in 0..p {
                ztf[(r, c)] += z[r] * phi[c];
            }
            zty[r] += z[r] * y[k];
        }
    }
    if symmetric {
        // symmetrize away accumulation round-off for the LS case
        ztf = (&ztf + ztf.transpose()) * 0.5;
    }
    let svd = ztf.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin / smax < 1.0e-13 {
        return Err(Error::RankDeficient);
    }
    svd.solve(&zty, 0.0).map_err(|_| Error::RankDeficient)
}

/// Simulates the ARX difference equation noise-free from zero initial
/// conditions.
fn simulate_arx(theta: &DVector<f64>, na: usize, nb: usize, u: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0f64; u.len()];
    for k in 0..u.len() {
        let mut acc = 0.0;
        for j in 0..na {
            if k > j {
                acc -= theta[j] * y[k - 1 - j];
            }
        }
        for j in 0..nb {
            if k > j {
                acc += theta[na + j] * u[k - 1 - j];
            }
        }
        y[k] = acc;
    }
    y
}

/// Maps the discrete ARX parameters to a continuous-time transfer function
/// by inverting the zero-order-hold discretization exactly.
fn discrete_theta_to_continuous(
    theta: &DVector<f64>,
    na: usize,
    nb: usize,
    zeros: usize,
    dt: f64,
) -> Result<TransferFunction> {
    match na {
        1 => {
            let a = -theta[0];
            let b = theta[1];
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Estimation(format!(
                    "discrete pole {a} has no stable first-order continuous counterpart"
                )));
            }
            let t = -dt / a.ln();
            let k = b / (1.0 - a);
            TransferFunction::new(vec![k], vec![t, 1.0])
        }
        2 => {
            let (a1, a2) = (theta[0], theta[1]);
            let (b1, b2) = (theta[na], theta[na + 1]);
            debug_assert_eq!(nb, 2);
            // controllable canonical discrete realization of
            // (b1 z + b2)/(z^2 + a1 z + a2)
            let ad = [[-a1, -a2], [1.0, 0.0]];
            let ac = matrix_log_2x2_scaled(&ad, dt)?;
            // integral of exp(ac t) over one sample via the augmented
            // exponential, then invert the hold map for the input vector
            let mut aug = DMatrix::<f64>::zeros(4, 4);
            for r in 0..2 {
                for c in 0..2 {
                    aug[(r, c)] = ac[r][c] * dt;
                }
                aug[(r, 2 + r)] = dt;
            }
            let e = aug.exp();
            let s = DMatrix::<f64>::from_fn(2, 2, |r, c| e[(r, 2 + c)]);
            let bd = DVector::<f64>::from_column_slice(&[1.0, 0.0]);
            let bc = s
                .lu()
                .solve(&bd)
                .ok_or_else(|| Error::Estimation("hold map is singular at this rate".into()))?;
            let c_row = [b1, b2];
            // strictly proper 2x2 state space to transfer function
            let tr = ac[0][0] + ac[1][1];
            let det = ac[0][0] * ac[1][1] - ac[0][1] * ac[1][0];
            let cb = c_row[0] * bc[0] + c_row[1] * bc[1];
            // C (A - tr I) B
            let amb = [
                ac[0][0] * bc[0] + ac[0][1] * bc[1] - tr * bc[0],
                ac[1][0] * bc[0] + ac[1][1] * bc[1] - tr * bc[1],
            ];
            let camb = c_row[0] * amb[0] + c_row[1] * amb[1];
            let den = vec![1.0, -tr, det];
            match zeros {
                1 => TransferFunction::new(vec![cb, camb], den),
                0 => {
                    // drop the sampling zero but keep the DC gain exact
                    TransferFunction::new(vec![camb], den)
                }
                _ => unreachable!("validated above"),
            }
        }
        _ => unreachable!("validated above"),
    }
}

/// Principal logarithm of a real 2x2 matrix divided by `dt`, via
/// Lagrange-Sylvester interpolation on the eigenvalues. Fails when an
/// eigenvalue sits on the closed negative real axis, where no real
/// continuous-time generator exists.
fn matrix_log_2x2_scaled(ad: &[[f64; 2]; 2], dt: f64) -> Result<[[f64; 2]; 2]> {
    let tr = ad[0][0] + ad[1][1];
    let det = ad[0][0] * ad[1][1] - ad[0][1] * ad[1][0];
    let half = Complex64::new(tr / 2.0, 0.0);
    let disc = (Complex64::new(tr * tr / 4.0 - det, 0.0)).sqrt();
    let z1 = half + disc;
    let z2 = half - disc;
    for z in [z1, z2] {
        if z.norm() < 1.0e-300 || (z.im.abs() < 1.0e-14 * z.norm().max(1.0) && z.re <= 0.0) {
            return Err(Error::Estimation(format!(
                "discrete pole {z} lies on the negative real axis; no real continuous model at this rate"
            )));
        }
    }
    let scale = z1.norm().max(z2.norm());
    let id = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_c = [[Complex64::new(0.0, 0.0); 2]; 2];
    if (z1 - z2).norm() > 1.0e-9 * scale {
        let (l1, l2) = (z1.ln(), z2.ln());
        let denom = z1 - z2;
        for r in 0..2 {
            for c in 0..2 {
                let m1 = Complex64::new(ad[r][c], 0.0) - z2 * id[r][c];
                let m2 = Complex64::new(ad[r][c], 0.0) - z1 * id[r][c];
                log_c[r][c] = (l1 * m1 - l2 * m2) / denom;
            }
        }
    } else {
        // coincident eigenvalues: log(z I + N) = ln(z) I + N/z
        let zm = (z1 + z2) / 2.0;
        for r in 0..2 {
            for c in 0..2 {
                let n = Complex64::new(ad[r][c], 0.0) - zm * id[r][c];
                log_c[r][c] = zm.ln() * id[r][c] + n / zm;
            }
        }
    }
    let mut out = [[0.0f64; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            if log_c[r][c].im.abs() > 1.0e-7 * (1.0 + log_c[r][c].norm()) {
                return Err(Error::Estimation(
                    "matrix logarithm failed to come out real".into(),
                ));
            }
            out[r][c] = log_c[r][c].re / dt;
        }
    }
    Ok(out)
}

/// Fit percentage `100 (1 - |y - y_hat| / |y - mean(y)|)`, floored at
/// -1000%. A constant reference signal leaves the measure undefined.
pub fn nrmse_fit(y: &Signal, y_hat: &Signal) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    let mean = y.samples.iter().sum::<f64>() / y.len() as f64;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (a, b) in y.samples.iter().zip(&y_hat.samples) {
        num += (a - b) * (a - b);
        den += (a - mean) * (a - mean);
    }
    if den == 0.0 {
        return Err(Error::UndefinedFit);
    }
    Ok((100.0 * (1.0 - (num / den).sqrt())).max(-1000.0))
}

/// Mean squared error and its root.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MseReport {
    /// Mean squared error (squared signal unit).
    pub mse: f64,
    /// Root mean squared error (signal unit).
    pub rms: f64,
}

pub fn mse(y: &Signal, y_hat: &Signal) -> Result<MseReport> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    let sum: f64 = y
        .samples
        .iter()
        .zip(&y_hat.samples)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let mse = sum / y.len() as f64;
    Ok(MseReport {
        mse,
        rms: mse.sqrt(),
    })
}

/// One row of the bandwidth comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthEntry {
    pub name: String,
    pub cutoff_hz: f64,
    pub poles: Vec<Complex64>,
}

/// Cutoff frequencies, poles, and the full pairwise ratio matrix for a set
/// of named models.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthReport {
    pub entries: Vec<BandwidthEntry>,
    /// `ratio[i][j]` = cutoff of model i over cutoff of model j.
    pub ratio: Vec<Vec<f64>>,
}

pub fn bandwidth_report(models: &[(String, TransferFunction)]) -> Result<BandwidthReport> {
    if models.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth comparison needs at least 2 models, got {}",
            models.len()
        )));
    }
    let mut entries = Vec::with_capacity(models.len());
    for (name, tf) in models {
        entries.push(BandwidthEntry {
            name: name.clone(),
            cutoff_hz: tf.cutoff_frequency_hz()?,
            poles: tf.poles()?,
        });
    }
    let ratio = entries
        .iter()
        .map(|a| entries.iter().map(|b| a.cutoff_hz / b.cutoff_hz).collect())
        .collect();
    Ok(BandwidthReport { entries, ratio })
}

impl BandwidthReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| model | cutoff (Hz) | poles (rad/s) |\n|---|---|---|\n");
        for e in &self.entries {
            let poles = e
                .poles
                .iter()
                .map(|p| format!("{:.4}{:+.4}i", p.re, p.im))
                .collect::<Vec<_>>()
                .join(", ");
            out.push_str(&format!("| {} | {:.4} | {} |\n", e.name, e.cutoff_hz, poles));
        }
        out.push_str("\nbandwidth ratios (row over column):\n\n| |");
        for e in &self.entries {
            out.push_str(&format!(" {} |", e.name));
        }
        out.push_str("\n|---|");
        for _ in &self.entries {
            out.push_str("---|");
        }
        out.push('\n');
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!("| {} |", e.name));
            for r in &self.ratio[i] {
                out.push_str(&format!(" {r:.3} |"));
            }
            out.push('\n');
        }
        out
    }
}
