//! Sampled-signal substrate: grids, complex envelopes, spectra, transfer
//! functions, test pulses and pulse-width metrics.
//!
//! Spectra and transfer functions are stored in natural FFT bin order. Bin
//! `k` maps to the signed baseband offset `Δω_k = 2π f_k` with
//! `f_k = k·df` for `k < n/2` and `f_k = (k − n)·df` otherwise, so the
//! unpaired Nyquist bin sits on the negative side and `max |Δω| = π/dt`.
//!
//! Transform normalization approximates the continuous Fourier transform:
//! `S(Δω_k) = dt · Σ_i s_i e^{−jΔω_k t_i}` and `s_i = df · Σ_k S_k e^{+jΔω_k t_i}`,
//! which makes `Σ|s|²·dt == Σ|S|²·df` (Parseval).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Carrier wavelength assigned to generated pulses unless overridden.
pub const DEFAULT_CARRIER_WAVELENGTH: f64 = 1550e-9;

/// The time window must exceed `ANTI_WRAPAROUND_FACTOR · (width + spread)`.
pub const ANTI_WRAPAROUND_FACTOR: f64 = 4.0;

/// Fraction of spectral energy that defines a signal's occupied band.
pub const OCCUPIED_ENERGY_FRACTION: f64 = 1.0 - 1e-9;

/// Name of the width metric used by [`fwhm`] and [`broadening_factor`].
pub const WIDTH_METRIC: &str = "fwhm_intensity_linear_interp";

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Uniform time sampling and the matching DC-centred frequency-offset axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    n_samples: usize,
    dt: f64,
}

impl FrequencyGrid {
    pub fn new(n_samples: usize, dt: f64) -> Result<Self> {
        if n_samples < 2 || !n_samples.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_samples must be a power of two >= 2, got {n_samples}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { n_samples, dt })
    }

    /// Grid of `n_samples` points spanning a time window of `window` seconds.
    pub fn with_window(n_samples: usize, window: f64) -> Result<Self> {
        Self::new(n_samples, window / n_samples as f64)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn df(&self) -> f64 {
        1.0 / (self.n_samples as f64 * self.dt)
    }

    /// Total time window `n·dt`.
    pub fn window(&self) -> f64 {
        self.n_samples as f64 * self.dt
    }

    /// Signed bin index in `[−n/2, n/2)`.
    pub fn signed_index(&self, k: usize) -> i64 {
        let n = self.n_samples as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Signed baseband frequency of bin `k` in Hz.
    pub fn frequency(&self, k: usize) -> f64 {
        self.signed_index(k) as f64 * self.df()
    }

    /// Angular frequency offset `Δω` of bin `k` in rad/s.
    pub fn delta_omega(&self, k: usize) -> f64 {
        2.0 * PI * self.frequency(k)
    }

    pub fn delta_omega_axis(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| self.delta_omega(k)).collect()
    }

    /// `max |Δω| = π/dt`, attained by the Nyquist bin.
    pub fn max_delta_omega(&self) -> f64 {
        PI / self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn time_axis(&self) -> Vec<f64> {
        (0..self.n_samples).map(|i| self.time(i)).collect()
    }

    /// Index of the sample at the window centre.
    pub fn center_index(&self) -> usize {
        self.n_samples / 2
    }

    pub fn center_time(&self) -> f64 {
        self.time(self.center_index())
    }

    /// Bins with `|Δω| <= band_limit`.
    pub fn band_bins(&self, band_limit: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_samples).filter(move |&k| self.delta_omega(k).abs() <= band_limit)
    }

    pub(crate) fn ensure_same(&self, other: &FrequencyGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for FrequencyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grid(n={}, dt={:e} s)", self.n_samples, self.dt)
    }
}

/// Complex baseband envelope sampled on a grid's time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    grid: FrequencyGrid,
    samples: Vec<Complex64>,
    carrier_wavelength: f64,
}

impl Envelope {
    pub fn new(grid: FrequencyGrid, samples: Vec<Complex64>, carrier_wavelength: f64) -> Result<Self> {
        if samples.len() != grid.n_samples() {
            return Err(Error::LengthMismatch {
                expected: grid.n_samples(),
                got: samples.len(),
            });
        }
        if samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::param("samples", "non-finite sample"));
        }
        if !(carrier_wavelength.is_finite() && carrier_wavelength > 0.0) {
            return Err(Error::param(
                "carrier_wavelength",
                format!("must be positive, got {carrier_wavelength}"),
            ));
        }
        Ok(Self {
            grid,
            samples,
            carrier_wavelength,
        })
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.n_samples()],
            carrier_wavelength: DEFAULT_CARRIER_WAVELENGTH,
        }
    }

    pub fn with_carrier(mut self, carrier_wavelength: f64) -> Result<Self> {
        if !(carrier_wavelength.is_finite() && carrier_wavelength > 0.0) {
            return Err(Error::param(
                "carrier_wavelength",
                format!("must be positive, got {carrier_wavelength}"),
            ));
        }
        self.carrier_wavelength = carrier_wavelength;
        Ok(self)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn carrier_wavelength(&self) -> f64 {
        self.carrier_wavelength
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm_sqr()).collect()
    }

    /// `Σ|s_i|²·dt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.grid.dt()
    }

    pub fn scaled(&self, factor: Complex64) -> Envelope {
        Envelope {
            grid: self.grid,
            samples: self.samples.iter().map(|s| s * factor).collect(),
            carrier_wavelength: self.carrier_wavelength,
        }
    }

    /// Circular shift by `shift` samples (positive delays the signal).
    pub fn rotated(&self, shift: isize) -> Envelope {
        let n = self.samples.len() as isize;
        let s = shift.rem_euclid(n) as usize;
        let mut samples = self.samples.clone();
        samples.rotate_right(s);
        Envelope {
            grid: self.grid,
            samples,
            carrier_wavelength: self.carrier_wavelength,
        }
    }

    /// Bin-wise `a·self + b·other`.
    pub fn linear_combination(&self, a: Complex64, other: &Envelope, b: Complex64) -> Result<Envelope> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Envelope {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            carrier_wavelength: self.carrier_wavelength,
        })
    }

    pub fn to_spectrum(&self) -> Spectrum {
        to_spectrum(self)
    }

    /// Energy of the difference relative to the energy of `reference`.
    pub fn relative_energy_error(&self, reference: &Envelope) -> Result<f64> {
        self.grid.ensure_same(&reference.grid)?;
        let diff: f64 = self
            .samples
            .iter()
            .zip(&reference.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let norm: f64 = reference.samples.iter().map(|s| s.norm_sqr()).sum();
        if norm == 0.0 {
            return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Ok(diff / norm)
    }
}

/// Frequency-domain view of an [`Envelope`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: FrequencyGrid,
    bins: Vec<Complex64>,
    carrier_wavelength: f64,
}

impl Spectrum {
    pub fn new(grid: FrequencyGrid, bins: Vec<Complex64>, carrier_wavelength: f64) -> Result<Self> {
        if bins.len() != grid.n_samples() {
            return Err(Error::LengthMismatch {
                expected: grid.n_samples(),
                got: bins.len(),
            });
        }
        Ok(Self {
            grid,
            bins,
            carrier_wavelength,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// `Σ|S_k|²·df`.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.grid.df()
    }

    pub fn to_envelope(&self) -> Envelope {
        let n = self.grid.n_samples();
        let mut buf = self.bins.clone();
        inverse_plan(n).process(&mut buf);
        let df = self.grid.df();
        for s in &mut buf {
            *s *= df;
        }
        Envelope {
            grid: self.grid,
            samples: buf,
            carrier_wavelength: self.carrier_wavelength,
        }
    }

    /// Smallest `Ω` such that bins with `|Δω| <= Ω` hold at least
    /// [`OCCUPIED_ENERGY_FRACTION`] of the spectral energy.
    pub fn occupied_half_width(&self) -> f64 {
        let mut bins: Vec<(f64, f64)> = self
            .bins
            .iter()
            .enumerate()
            .map(|(k, s)| (self.grid.delta_omega(k).abs(), s.norm_sqr()))
            .collect();
        let total: f64 = bins.iter().map(|b| b.1).sum();
        if total == 0.0 {
            return 0.0;
        }
        bins.sort_by(|a, b| a.0.total_cmp(&b.0));
        let target = OCCUPIED_ENERGY_FRACTION * total;
        let mut acc = 0.0;
        for (omega, e) in bins {
            acc += e;
            if acc >= target {
                return omega;
            }
        }
        self.grid.max_delta_omega()
    }
}

pub fn to_spectrum(e: &Envelope) -> Spectrum {
    let n = e.grid.n_samples();
    let mut buf = e.samples.clone();
    forward_plan(n).process(&mut buf);
    let dt = e.grid.dt();
    for s in &mut buf {
        *s *= dt;
    }
    Spectrum {
        grid: e.grid,
        bins: buf,
        carrier_wavelength: e.carrier_wavelength,
    }
}

/// Complex frequency response sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
}

impl TransferFunction {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_samples() {
            return Err(Error::LengthMismatch {
                expected: grid.n_samples(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: FrequencyGrid, value: Complex64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_samples()],
        }
    }

    pub fn identity(grid: FrequencyGrid) -> Self {
        Self::constant(grid, Complex64::new(1.0, 0.0))
    }

    /// Samples `f(Δω)` at every bin.
    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid,
            values: (0..grid.n_samples()).map(|k| f(grid.delta_omega(k))).collect(),
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Value at `Δω = 0`.
    pub fn dc(&self) -> Complex64 {
        self.values[0]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> TransferFunction {
        TransferFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> TransferFunction {
        self.map(|v| v * factor)
    }

    /// Bin-wise product (cascade of two responses).
    pub fn cascade(&self, other: &TransferFunction) -> Result<TransferFunction> {
        self.grid.ensure_same(&other.grid)?;
        Ok(TransferFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// Largest `|H|` over bins with `|Δω| <= band_limit`.
    pub fn max_magnitude_in_band(&self, band_limit: f64) -> Result<f64> {
        let mut seen = false;
        let mut max = 0.0f64;
        for k in self.grid.band_bins(band_limit) {
            seen = true;
            max = max.max(self.values[k].norm());
        }
        if seen {
            Ok(max)
        } else {
            Err(Error::EmptyBand { band_limit })
        }
    }
}

/// Multiplies the envelope's spectrum bin-wise by `h`.
pub fn apply_tf(e: &Envelope, h: &TransferFunction) -> Result<Envelope> {
    e.grid.ensure_same(&h.grid)?;
    let mut spec = to_spectrum(e);
    for (s, v) in spec.bins.iter_mut().zip(&h.values) {
        *s *= v;
    }
    Ok(spec.to_envelope())
}

/// Two-sided baseband bandwidth `B = 2/width` of a sinc pulse with the given
/// zero-to-zero main-lobe width.
pub fn sinc_bandwidth(zero_to_zero_width: f64) -> f64 {
    2.0 / zero_to_zero_width
}

/// Zero-to-zero width of the sinc pulse occupying two-sided bandwidth `B`.
pub fn sinc_width_for_bandwidth(bandwidth: f64) -> f64 {
    2.0 / bandwidth
}

/// Minimum ratio of time window to sinc zero-to-zero width.
pub const SINC_GUARD_FACTOR: f64 = 8.0;

/// Band-limited sinc pulse centred in the window.
///
/// The pulse is synthesized from a rectangular spectrum over
/// `|f| <= 1/width` (edge bins at half weight), so it is exactly band-limited
/// to `|Δω| <= πB` with `B = 2/width`. The peak amplitude is `amplitude`.
pub fn make_sinc_pulse(grid: &FrequencyGrid, zero_to_zero_width: f64, amplitude: f64) -> Result<Envelope> {
    if !(zero_to_zero_width.is_finite() && zero_to_zero_width > 0.0) {
        return Err(Error::param(
            "zero_to_zero_width",
            format!("must be positive, got {zero_to_zero_width}"),
        ));
    }
    if !amplitude.is_finite() {
        return Err(Error::param("amplitude", "must be finite"));
    }
    let required = SINC_GUARD_FACTOR * zero_to_zero_width;
    if grid.window() < required {
        return Err(Error::WindowTooSmall {
            window_s: grid.window(),
            required_s: required,
            what: "sinc pulse guard margin",
        });
    }
    let f_edge = 1.0 / zero_to_zero_width;
    if f_edge >= 0.5 / grid.dt() {
        return Err(Error::param(
            "zero_to_zero_width",
            "pulse bandwidth exceeds the grid's Nyquist frequency",
        ));
    }
    let tol = 1e-9 * grid.df();
    let weights: Vec<f64> = (0..grid.n_samples())
        .map(|k| {
            let f = grid.frequency(k).abs();
            if (f - f_edge).abs() <= tol {
                0.5
            } else if f < f_edge {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let weight_sum: f64 = weights.iter().sum();
    // peak value of the synthesized pulse before scaling is df·Σw
    let scale = amplitude / (grid.df() * weight_sum);
    // e^{−jΔω_k t_c} with t_c = (n/2)·dt reduces to (−1)^k
    let bins = weights
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * w * scale, 0.0)
        })
        .collect();
    let spectrum = Spectrum::new(*grid, bins, DEFAULT_CARRIER_WAVELENGTH)?;
    Ok(spectrum.to_envelope())
}

/// Gaussian pulse `A·exp(−(t−t_c)²/(2t0²))` centred in the window.
pub fn make_gaussian_pulse(grid: &FrequencyGrid, t0: f64, amplitude: f64) -> Result<Envelope> {
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::param("t0", format!("must be positive, got {t0}")));
    }
    if t0 < 4.0 * grid.dt() {
        return Err(Error::param(
            "t0",
            format!("t0 = {t0:e} s is below 4·dt = {:e} s", 4.0 * grid.dt()),
        ));
    }
    if grid.window() < 16.0 * t0 {
        return Err(Error::WindowTooSmall {
            window_s: grid.window(),
            required_s: 16.0 * t0,
            what: "Gaussian pulse needs a window of 16·t0",
        });
    }
    if !amplitude.is_finite() {
        return Err(Error::param("amplitude", "must be finite"));
    }
    let tc = grid.center_time();
    let samples = (0..grid.n_samples())
        .map(|i| {
            let x = (grid.time(i) - tc) / t0;
            Complex64::new(amplitude * (-0.5 * x * x).exp(), 0.0)
        })
        .collect();
    Envelope::new(*grid, samples, DEFAULT_CARRIER_WAVELENGTH)
}

/// Full width at half maximum of `|s(t)|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseWidth {
    /// Width in seconds.
    pub fwhm: f64,
    /// Set when the intensity dips below half maximum between the outermost
    /// crossings, or a crossing falls on the window edge.
    pub ambiguous: bool,
}

/// Intensity FWHM with linear interpolation between samples, measured
/// between the outermost half-maximum crossings.
pub fn fwhm(e: &Envelope) -> Result<PulseWidth> {
    let intensity = e.intensity();
    let n = intensity.len();
    let peak = intensity.iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    let half = 0.5 * peak;
    let left = intensity.iter().position(|&v| v >= half).expect("peak exists");
    let right = intensity.iter().rposition(|&v| v >= half).expect("peak exists");

    let mut ambiguous = intensity[left..=right].iter().any(|&v| v < half);

    let lead = if left == 0 {
        ambiguous = true;
        0.0
    } else {
        let (lo, hi) = (intensity[left - 1], intensity[left]);
        (hi - half) / (hi - lo)
    };
    let trail = if right == n - 1 {
        ambiguous = true;
        0.0
    } else {
        let (hi, lo) = (intensity[right], intensity[right + 1]);
        (hi - half) / (hi - lo)
    };
    let width_samples = (right - left) as f64 + lead + trail;
    Ok(PulseWidth {
        fwhm: width_samples * e.grid.dt(),
        ambiguous,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Broadening {
    /// `width(rx)/width(tx)`.
    pub factor: f64,
    pub ambiguous: bool,
}

/// Ratio of received to transmitted intensity FWHM.
pub fn broadening_factor(tx: &Envelope, rx: &Envelope) -> Result<Broadening> {
    tx.grid.ensure_same(&rx.grid)?;
    let wt = fwhm(tx)?;
    let wr = fwhm(rx)?;
    Ok(Broadening {
        factor: wr.fwhm / wt.fwhm,
        ambiguous: wt.ambiguous || wr.ambiguous,
    })
}

/// Rejects the envelope unless the window exceeds
/// `ANTI_WRAPAROUND_FACTOR · (FWHM + spread)`.
pub fn check_wraparound(e: &Envelope, spread: f64) -> Result<()> {
    let width = match fwhm(e) {
        Ok(w) => w.fwhm,
        Err(Error::ZeroSignal) => return Ok(()),
        Err(err) => return Err(err),
    };
    let required = ANTI_WRAPAROUND_FACTOR * (width + spread.abs());
    if e.grid.window() < required {
        return Err(Error::WindowTooSmall {
            window_s: e.grid.window(),
            required_s: required,
            what: "anti-wraparound rule (window >= 4·(width + dispersive spread))",
        });
    }
    Ok(())
}
