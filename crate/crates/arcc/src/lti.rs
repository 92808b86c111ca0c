//! Transfer-function algebra, state-space realizations, and frequency-domain
//! queries for the linear models used throughout the crate.
//!
//! Coefficients are stored in descending powers of s (or z for discrete
//! systems). Frequencies are rad/s internally; every public item that speaks
//! Hz carries `hz` in its name.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use std::io::Write;

use crate::error::{Error, Result};

/// Search ceiling used by [`TransferFunction::cutoff_frequency_hz`].
pub const DEFAULT_CUTOFF_CEILING_HZ: f64 = 1.0e6;

/// Relative frequency tolerance of the cutoff bisection.
const CUTOFF_REL_TOL: f64 = 1.0e-9;

/// Log-grid resolution for cutoff bracketing, points per decade.
const CUTOFF_GRID_PER_DECADE: usize = 32;

/// Evaluate a real-coefficient polynomial (descending powers) at a complex point.
pub fn polynomial_eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        acc = acc * s + c;
    }
    acc
}

/// Multiply two polynomials given in descending powers.
pub fn polynomial_multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Expand a conjugate-closed root set into a monic real polynomial
/// (descending powers). Errors if the imaginary parts do not cancel.
pub fn polynomial_from_roots(roots: &[Complex64]) -> Result<Vec<f64>> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    let scale = coeffs
        .iter()
        .map(|c| c.norm())
        .fold(1.0_f64, f64::max);
    let mut real = Vec::with_capacity(coeffs.len());
    for c in &coeffs {
        if c.im.abs() > 1.0e-9 * scale {
            return Err(Error::InvalidParameter(
                "root set is not closed under conjugation".into(),
            ));
        }
        real.push(c.re);
    }
    Ok(real)
}

/// Roots of a real polynomial (descending powers) via the companion matrix.
///
/// Returned roots are sorted by real part, then imaginary part, so repeated
/// calls on the same polynomial produce the same ordering.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let stripped: Vec<f64> = {
        let first_nonzero = coeffs.iter().position(|&c| c != 0.0);
        match first_nonzero {
            Some(k) => coeffs[k..].to_vec(),
            None => {
                return Err(Error::InvalidParameter(
                    "cannot take roots of the zero polynomial".into(),
                ))
            }
        }
    };
    let n = stripped.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = stripped[0];
    let monic: Vec<f64> = stripped.iter().map(|&c| c / lead).collect();
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        companion[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        // bottom row holds -c_j for p(s) = s^n + c_{n-1} s^{n-1} + ... + c_0
        companion[(n - 1, j)] = -monic[n - j];
    }
    let schur = nalgebra::linalg::Schur::try_new(companion, f64::EPSILON, 100_000)
        .ok_or(Error::EigenvalueFailure {
            residual: f64::INFINITY,
        })?;
    let mut roots: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();

    // sanity: the claimed roots must actually solve the polynomial
    let scale = monic.iter().map(|c| c.abs()).fold(f64::MIN_POSITIVE, f64::max);
    let mut worst = 0.0_f64;
    for &r in &roots {
        let local = polynomial_eval(&monic, r).norm()
            / scale.max(r.norm().powi(n as i32));
        worst = worst.max(local);
    }
    if worst > 1.0e-6 {
        return Err(Error::EigenvalueFailure { residual: worst });
    }

    roots.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });
    Ok(roots)
}

/// One sample of a frequency response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPoint {
    /// Angular frequency (rad/s).
    pub omega_rad_s: f64,
    /// Complex response at that frequency.
    pub response: Complex64,
}

impl FrequencyPoint {
    pub fn freq_hz(&self) -> f64 {
        self.omega_rad_s / std::f64::consts::TAU
    }

    pub fn magnitude_db(&self) -> f64 {
        20.0 * self.response.norm().log10()
    }

    pub fn phase_deg(&self) -> f64 {
        self.response.arg().to_degrees()
    }
}

/// Rational transfer function with real coefficients in descending powers.
///
/// The denominator leading coefficient is nonzero and the numerator degree
/// never exceeds the denominator degree (proper systems only).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransferFunction {
    /// Numerator coefficients, descending powers.
    pub num: Vec<f64>,
    /// Denominator coefficients, descending powers.
    pub den: Vec<f64>,
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidSystem("non-finite coefficient".into()));
        }
        let num: Vec<f64> = {
            let k = num.iter().position(|&c| c != 0.0).unwrap_or(num.len());
            let stripped = &num[k..];
            if stripped.is_empty() {
                vec![0.0]
            } else {
                stripped.to_vec()
            }
        };
        let den: Vec<f64> = {
            let k = den
                .iter()
                .position(|&c| c != 0.0)
                .ok_or_else(|| Error::InvalidSystem("denominator is zero".into()))?;
            den[k..].to_vec()
        };
        if num.len() > den.len() {
            return Err(Error::InvalidSystem(format!(
                "improper system: numerator degree {} exceeds denominator degree {}",
                num.len() - 1,
                den.len() - 1
            )));
        }
        Ok(Self { num, den })
    }

    /// Static gain `k`.
    pub fn gain(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
        }
    }

    /// First-order lag `k / (t s + 1)`.
    pub fn first_order(k: f64, t_s: f64) -> Result<Self> {
        if t_s <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "time constant must be positive, got {t_s}"
            )));
        }
        Self::new(vec![k], vec![t_s, 1.0])
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    /// Evaluate at an arbitrary complex point.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = polynomial_eval(&self.den, s);
        if d.norm() < f64::MIN_POSITIVE {
            return Err(Error::PoleAtFrequency { omega_rad_s: s.im });
        }
        Ok(polynomial_eval(&self.num, s) / d)
    }

    /// Response at angular frequency omega (rad/s), i.e. at s = j omega.
    pub fn freq_response(&self, omega_rad_s: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega_rad_s))
    }

    /// Gain at s = 0.
    pub fn dc_gain(&self) -> Result<f64> {
        Ok(self.freq_response(0.0)?.re)
    }

    /// Denominator roots, deterministically ordered (re, then im).
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        polynomial_roots(&self.den)
    }

    /// Numerator roots, deterministically ordered (re, then im).
    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.len() == 1 && self.num[0] == 0.0 {
            return Ok(Vec::new());
        }
        polynomial_roots(&self.num)
    }

    /// Smallest f > 0 (Hz) where the magnitude falls to |G(0)| / sqrt(2),
    /// searching below [`DEFAULT_CUTOFF_CEILING_HZ`].
    pub fn cutoff_frequency_hz(&self) -> Result<f64> {
        self.cutoff_frequency_hz_below(DEFAULT_CUTOFF_CEILING_HZ)
    }

    /// Smallest f > 0 (Hz) where the magnitude falls to |G(0)| / sqrt(2).
    ///
    /// Brackets the first downward crossing on a log grid, then bisects the
    /// bracket to a relative frequency tolerance of 1e-9.
    pub fn cutoff_frequency_hz_below(&self, max_hz: f64) -> Result<f64> {
        if !(max_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff search ceiling must be positive, got {max_hz}"
            )));
        }
        let dc = self.freq_response(0.0)?.norm();
        if dc <= 0.0 {
            return Err(Error::InvalidParameter(
                "cutoff undefined: zero gain at s = 0".into(),
            ));
        }
        let target = dc / std::f64::consts::SQRT_2;
        let gap = |f_hz: f64| -> Result<f64> {
            let mag = self
                .freq_response(f_hz * std::f64::consts::TAU)?
                .norm();
            Ok(mag - target)
        };

        let f_floor = 1.0e-12_f64;
        let step = 10.0_f64.powf(1.0 / CUTOFF_GRID_PER_DECADE as f64);
        let mut lo = f_floor;
        let mut lo_gap = gap(lo)?;
        if lo_gap <= 0.0 {
            return Err(Error::CutoffNotFound { max_hz });
        }
        let mut bracket = None;
        let mut f = lo;
        while f < max_hz {
            let next = (f * step).min(max_hz);
            let g = gap(next)?;
            if g <= 0.0 {
                bracket = Some((f, next));
                break;
            }
            f = next;
            lo = next;
            lo_gap = g;
            if next >= max_hz {
                break;
            }
        }
        let (mut a, mut b) = bracket.ok_or(Error::CutoffNotFound { max_hz })?;
        let _ = (lo, lo_gap);
        while (b - a) > CUTOFF_REL_TOL * a {
            let mid = (a * b).sqrt();
            if gap(mid)? <= 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Controllable canonical state-space realization.
    pub fn to_state_space(&self) -> Result<StateSpace> {
        let n = self.order();
        let lead = self.den[0];
        let den: Vec<f64> = self.den.iter().map(|c| c / lead).collect();
        let mut num: Vec<f64> = self.num.iter().map(|c| c / lead).collect();
        // left-pad numerator to denominator length
        while num.len() < den.len() {
            num.insert(0, 0.0);
        }
        let d = num[0];
        if n == 0 {
            return Ok(StateSpace {
                a: DMatrix::zeros(0, 0),
                b: DVector::zeros(0),
                c: RowDVector::zeros(0),
                d,
                sample_time_s: None,
            });
        }
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -den[n - j];
        }
        let mut b = DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        let mut c = RowDVector::<f64>::zeros(n);
        for j in 0..n {
            // strictly proper residue after removing the feedthrough
            c[j] = num[n - j] - den[n - j] * d;
        }
        Ok(StateSpace {
            a,
            b,
            c,
            d,
            sample_time_s: None,
        })
    }

    /// Log-spaced frequency response samples between two frequencies (Hz).
    pub fn bode_points(
        &self,
        f_lo_hz: f64,
        f_hi_hz: f64,
        points_per_decade: usize,
    ) -> Result<Vec<FrequencyPoint>> {
        if !(f_lo_hz > 0.0 && f_hi_hz > f_lo_hz) {
            return Err(Error::InvalidParameter(format!(
                "bode range must satisfy 0 < f_lo < f_hi, got [{f_lo_hz}, {f_hi_hz}]"
            )));
        }
        if points_per_decade == 0 {
            return Err(Error::InvalidParameter(
                "points_per_decade must be at least 1".into(),
            ));
        }
        let decades = (f_hi_hz / f_lo_hz).log10();
        let count = ((decades * points_per_decade as f64).ceil() as usize).max(1) + 1;
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let frac = i as f64 / (count - 1).max(1) as f64;
            let f_hz = f_lo_hz * (f_hi_hz / f_lo_hz).powf(frac);
            let omega = f_hz * std::f64::consts::TAU;
            out.push(FrequencyPoint {
                omega_rad_s: omega,
                response: self.freq_response(omega)?,
            });
        }
        Ok(out)
    }
}

/// Write bode samples as `freq_hz,mag_db,phase_deg` CSV rows.
pub fn write_bode_csv<W: Write>(mut w: W, points: &[FrequencyPoint]) -> Result<()> {
    writeln!(w, "freq_hz,mag_db,phase_deg")?;
    for p in points {
        writeln!(
            w,
            "{:.8e},{:.8e},{:.8e}",
            p.freq_hz(),
            p.magnitude_db(),
            p.phase_deg()
        )?;
    }
    Ok(())
}

/// SISO state-space system. `sample_time_s` is `None` for continuous time
/// and `Some(dt)` after zero-order-hold discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
    pub sample_time_s: Option<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::InvalidSystem(format!(
                "dimension mismatch: A is {}x{}, B has {}, C has {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            sample_time_s: None,
        })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Eigenvalues of the state matrix, ordered like [`polynomial_roots`].
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        let n = self.order();
        if n == 0 {
            return Ok(Vec::new());
        }
        let schur = nalgebra::linalg::Schur::try_new(self.a.clone(), f64::EPSILON, 100_000)
            .ok_or(Error::EigenvalueFailure {
                residual: f64::INFINITY,
            })?;
        let mut poles: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
        poles.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .expect("finite eigenvalues")
        });
        Ok(poles)
    }

    /// Frequency response at omega (rad/s). Continuous systems evaluate at
    /// s = j omega, discrete ones at z = exp(j omega dt).
    pub fn freq_response(&self, omega_rad_s: f64) -> Result<Complex64> {
        let n = self.order();
        if n == 0 {
            return Ok(Complex64::new(self.d, 0.0));
        }
        let point = match self.sample_time_s {
            None => Complex64::new(0.0, omega_rad_s),
            Some(dt) => (Complex64::new(0.0, omega_rad_s * dt)).exp(),
        };
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(-self.a[(i, j)], 0.0);
            }
            m[(i, i)] += point;
        }
        let rhs = DVector::<Complex64>::from_iterator(
            n,
            self.b.iter().map(|&v| Complex64::new(v, 0.0)),
        );
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or(Error::PoleAtFrequency { omega_rad_s })?;
        let mut y = Complex64::new(self.d, 0.0);
        for j in 0..n {
            y += Complex64::new(self.c[j], 0.0) * x[j];
        }
        Ok(y)
    }

    /// Zero-order-hold discretization at sample time `dt_s`, computed from
    /// the exponential of the augmented [A B; 0 0] matrix (scaling and
    /// squaring underneath).
    pub fn discretize_zoh(&self, dt_s: f64) -> Result<StateSpace> {
        if self.sample_time_s.is_some() {
            return Err(Error::InvalidSystem(
                "system is already discrete".into(),
            ));
        }
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample time must be positive and finite, got {dt_s}"
            )));
        }
        let n = self.order();
        if n == 0 {
            let mut out = self.clone();
            out.sample_time_s = Some(dt_s);
            return Ok(out);
        }
        let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&self.a * dt_s));
        aug.view_mut((0, n), (n, 1)).copy_from(&(&self.b * dt_s));
        let e = aug.exp();
        let ad = e.view((0, 0), (n, n)).into_owned();
        let bd = DVector::from_iterator(n, (0..n).map(|i| e[(i, n)]));
        Ok(StateSpace {
            a: ad,
            b: bd,
            c: self.c.clone(),
            d: self.d,
            sample_time_s: Some(dt_s),
        })
    }

    /// Drive a discrete system with an input sequence from a zero initial
    /// state and return the outputs.
    pub fn simulate(&self, input: &[f64]) -> Result<Vec<f64>> {
        if self.sample_time_s.is_none() {
            return Err(Error::InvalidSystem(
                "time simulation requires a discrete system".into(),
            ));
        }
        let n = self.order();
        let mut x = DVector::<f64>::zeros(n);
        let mut out = Vec::with_capacity(input.len());
        for &u in input {
            let y = (&self.c * &x)[(0, 0)] + self.d * u;
            out.push(y);
            x = &self.a * &x + &self.b * u;
        }
        Ok(out)
    }

    /// Unit step response of a discrete system over `samples` steps.
    pub fn step_response(&self, samples: usize) -> Result<Vec<f64>> {
        self.simulate(&vec![1.0; samples])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn evaluates_rational_response() {
        // G(s) = (s + 2) / (s^2 + 3 s + 2) = 1 / (s + 1)
        let g = TransferFunction::new(vec![1.0, 2.0], vec![1.0, 3.0, 2.0]).unwrap();
        let r = g.freq_response(1.0).unwrap();
        let expected = Complex64::new(1.0, 0.0) / Complex64::new(1.0, 1.0);
        assert_relative_eq!(r.re, expected.re, max_relative = 1e-14);
        assert_relative_eq!(r.im, expected.im, max_relative = 1e-14);
    }

    #[test]
    fn first_order_magnitude_matches_closed_form() {
        // velocity transmission surrogate: gain 1, corner near 1.8 Hz
        let g = TransferFunction::first_order(1.0, 0.0884).unwrap();
        let omega = std::f64::consts::TAU * 1.8;
        let mag = g.freq_response(omega).unwrap().norm();
        let analytic = 1.0 / (1.0 + (omega * 0.0884).powi(2)).sqrt();
        assert_relative_eq!(mag, analytic, max_relative = 1e-13);
        assert!((mag - 0.707).abs() < 5e-4);
        assert_relative_eq!(mag, 0.70718456, max_relative = 1e-6);
    }

    #[test]
    fn pole_on_imaginary_axis_is_an_error() {
        // 1 / (s^2 + 1) has poles at +/- j
        let g = TransferFunction::new(vec![1.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            g.freq_response(1.0),
            Err(Error::PoleAtFrequency { .. })
        ));
    }

    #[test]
    fn quadratic_poles_match_the_closed_form() {
        // s^2 + 20 s + 10000: roots -10 +/- j sqrt(9900)
        let g = TransferFunction::new(vec![1.0], vec![1.0, 20.0, 10000.0]).unwrap();
        let poles = g.poles().unwrap();
        let im = 9900.0_f64.sqrt();
        assert_eq!(poles.len(), 2);
        assert_relative_eq!(poles[0].re, -10.0, max_relative = 1e-10);
        assert_relative_eq!(poles[0].im, -im, max_relative = 1e-10);
        assert_relative_eq!(poles[1].re, -10.0, max_relative = 1e-10);
        assert_relative_eq!(poles[1].im, im, max_relative = 1e-10);
    }

    #[test]
    fn repeated_roots_are_reported_with_multiplicity() {
        // (s + 1)^2
        let roots = polynomial_roots(&[1.0, 2.0, 1.0]).unwrap();
        assert_eq!(roots.len(), 2);
        for r in roots {
            assert_relative_eq!(r.re, -1.0, max_relative = 1e-6);
            assert!(r.im.abs() < 1e-6);
        }
    }

    #[test]
    fn roots_round_trip_through_reconstruction() {
        let den = vec![2.0, 14.0, 44.0, 40.0];
        let roots = polynomial_roots(&den).unwrap();
        let rebuilt = polynomial_from_roots(&roots).unwrap();
        // compare against the monic original
        for (a, b) in rebuilt.iter().zip(den.iter().map(|c| c / den[0])) {
            assert_relative_eq!(*a, b, max_relative = 1e-8, epsilon = 1e-10);
        }
    }

    #[test]
    fn first_order_cutoff_is_the_corner_frequency() {
        let t = 0.0884;
        let g = TransferFunction::first_order(1.0, t).unwrap();
        let f_c = g.cutoff_frequency_hz().unwrap();
        let analytic = 1.0 / (std::f64::consts::TAU * t);
        assert_relative_eq!(f_c, analytic, max_relative = 1e-8);
    }

    #[test]
    fn cutoff_agrees_with_a_dense_grid_scan() {
        // mildly resonant second order system
        let g = TransferFunction::new(vec![100.0], vec![1.0, 4.0, 100.0]).unwrap();
        let f_c = g.cutoff_frequency_hz().unwrap();

        let dc = g.freq_response(0.0).unwrap().norm();
        let target = dc / std::f64::consts::SQRT_2;
        let n = 1_000_000usize;
        let (f_lo, f_hi) = (1.0e-3_f64, 1.0e3_f64);
        let mut grid_cross = None;
        let mut prev = f_lo;
        for i in 1..=n {
            let f = f_lo * (f_hi / f_lo).powf(i as f64 / n as f64);
            let mag = g
                .freq_response(f * std::f64::consts::TAU)
                .unwrap()
                .norm();
            if mag <= target {
                grid_cross = Some((prev, f));
                break;
            }
            prev = f;
        }
        let (a, b) = grid_cross.expect("dense grid must find the crossing");
        assert!(f_c >= a && f_c <= b, "cutoff {f_c} outside grid cell [{a}, {b}]");
    }

    #[test]
    fn cutoff_missing_reports_the_ceiling() {
        // all-pass-like flat gain never crosses -3 dB
        let g = TransferFunction::gain(2.0);
        match g.cutoff_frequency_hz_below(1.0e4) {
            Err(Error::CutoffNotFound { max_hz }) => assert_eq!(max_hz, 1.0e4),
            other => panic!("expected CutoffNotFound, got {other:?}"),
        }
    }

    #[test]
    fn state_space_preserves_the_frequency_response() {
        // second order with a zero, order-2 denominator
        let g = TransferFunction::new(vec![3.0, 7.0], vec![1.0, 2.0, 5.0]).unwrap();
        let ss = g.to_state_space().unwrap();
        for i in 0..100 {
            let f = 1.0e-2 * (1.0e4_f64).powf(i as f64 / 99.0);
            let omega = f * std::f64::consts::TAU;
            let a = g.freq_response(omega).unwrap();
            let b = ss.freq_response(omega).unwrap();
            assert_relative_eq!(a.re, b.re, max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn biproper_system_keeps_its_feedthrough() {
        // G(s) = (s + 3) / (s + 1): D = 1
        let g = TransferFunction::new(vec![1.0, 3.0], vec![1.0, 1.0]).unwrap();
        let ss = g.to_state_space().unwrap();
        assert_relative_eq!(ss.d, 1.0);
        let omega = 2.5;
        let a = g.freq_response(omega).unwrap();
        let b = ss.freq_response(omega).unwrap();
        assert_relative_eq!(a.re, b.re, max_relative = 1e-12);
        assert_relative_eq!(a.im, b.im, max_relative = 1e-12);
    }

    #[test]
    fn pure_gain_realizes_as_zero_states() {
        let g = TransferFunction::gain(4.2);
        let ss = g.to_state_space().unwrap();
        assert_eq!(ss.order(), 0);
        assert_relative_eq!(ss.d, 4.2);
        let d = ss.discretize_zoh(0.01).unwrap();
        assert_relative_eq!(d.d, 4.2);
        assert_eq!(d.sample_time_s, Some(0.01));
    }

    #[test]
    fn zoh_of_first_order_lag_gives_the_exponential_pole() {
        let t = 0.1;
        let dt = 1.0e-3;
        let ss = TransferFunction::first_order(1.0, t)
            .unwrap()
            .to_state_space()
            .unwrap();
        let d = ss.discretize_zoh(dt).unwrap();
        assert_relative_eq!(d.a[(0, 0)], (-dt / t).exp(), max_relative = 1e-12);
        // DC gain of the discrete system must match the continuous one
        let dc = d.freq_response(0.0).unwrap().re;
        assert_relative_eq!(dc, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn zoh_of_integrator_accumulates_dt() {
        let ss = TransferFunction::new(vec![1.0], vec![1.0, 0.0])
            .unwrap()
            .to_state_space()
            .unwrap();
        let d = ss.discretize_zoh(0.02).unwrap();
        assert_relative_eq!(d.a[(0, 0)], 1.0, max_relative = 1e-14);
        assert_relative_eq!(d.b[0], 0.02, max_relative = 1e-12);
    }

    #[test]
    fn discrete_simulation_tracks_the_difference_equation() {
        let ss = TransferFunction::first_order(2.0, 0.05)
            .unwrap()
            .to_state_space()
            .unwrap()
            .discretize_zoh(0.01)
            .unwrap();
        let y = ss.step_response(400).unwrap();
        // settles to the DC gain
        assert_relative_eq!(*y.last().unwrap(), 2.0, max_relative = 1e-8);
        // strictly increasing toward the asymptote for a first-order lag
        assert!(y.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn bode_csv_has_the_pinned_header_and_row_count() {
        let g = TransferFunction::first_order(1.0, 0.1).unwrap();
        let pts = g.bode_points(0.1, 100.0, 10).unwrap();
        let mut buf = Vec::new();
        write_bode_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "freq_hz,mag_db,phase_deg");
        assert_eq!(lines.count(), pts.len());
    }

    #[test]
    fn improper_systems_are_rejected() {
        assert!(TransferFunction::new(vec![1.0, 0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn first_order_magnitude_never_increases(
                k in 0.1_f64..10.0,
                t in 1.0e-3_f64..10.0,
            ) {
                let g = TransferFunction::first_order(k, t).unwrap();
                let mut prev = f64::INFINITY;
                for i in 0..60 {
                    let omega = 1.0e-2 * (1.0e6_f64).powf(i as f64 / 59.0);
                    let mag = g.freq_response(omega).unwrap().norm();
                    prop_assert!(mag <= prev + 1e-12);
                    prev = mag;
                }
            }

            #[test]
            fn random_stable_systems_round_trip_to_state_space(
                p1 in -50.0_f64..-0.5,
                p2 in -50.0_f64..-0.5,
                wn in 1.0_f64..80.0,
                zeta in 0.05_f64..0.95,
                k in 0.2_f64..5.0,
                use_complex_pair in proptest::bool::ANY,
            ) {
                // order <= 3 with either three real poles or real + conjugate pair
                let den = if use_complex_pair {
                    polynomial_multiply(&[1.0, -p1], &[1.0, 2.0 * zeta * wn, wn * wn])
                } else {
                    polynomial_multiply(
                        &polynomial_multiply(&[1.0, -p1], &[1.0, -p2]),
                        &[1.0, 1.0],
                    )
                };
                let num = vec![k * den[den.len() - 1]];
                let g = TransferFunction::new(num, den).unwrap();
                let ss = g.to_state_space().unwrap();
                for i in 0..25 {
                    let omega = 1.0e-2 * (1.0e5_f64).powf(i as f64 / 24.0);
                    let a = g.freq_response(omega).unwrap();
                    let b = ss.freq_response(omega).unwrap();
                    prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1e-6));
                }
            }

            #[test]
            fn poles_solve_their_polynomial(
                c1 in -20.0_f64..20.0,
                c2 in 1.0_f64..400.0,
            ) {
                let den = vec![1.0, c1, c2];
                let roots = polynomial_roots(&den).unwrap();
                for r in roots {
                    let residual = polynomial_eval(&den, r).norm();
                    prop_assert!(residual < 1e-6 * c2.max(1.0));
                }
            }
        }
    }
}
