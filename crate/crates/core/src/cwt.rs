//! Continuous wavelet transform with the Morlet wavelet.
//!
//! The transform is the discretized convolution
//! `W(τ, s) = Σ_t x(t) · s^{-1/2} · ψ*((t − τ)/s) · dt`, evaluated either
//! through FFTs ([`CwtPlan`]) or literally ([`transform_direct`]).

use std::f64::consts::{LN_2, PI};
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::matrix::Matrix;
use crate::timeseries::{TimeSeries, TimeUnit, MIN_LEN};

/// Largest series accepted by [`transform_direct`].
pub const DIRECT_MAX_LEN: usize = 1024;

/// Morlet wavelet `ψ(t) = (2c/π)^{1/4} · e^{iω₀t} · e^{−c t²}` with
/// `c = envelope_var`. The normalization gives unit energy for any `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorletParams {
    pub omega0: f64,
    pub envelope_var: f64,
}

impl Default for MorletParams {
    fn default() -> Self {
        MorletParams {
            omega0: 6.0,
            envelope_var: 0.5,
        }
    }
}

impl MorletParams {
    pub fn new(omega0: f64, envelope_var: f64) -> Result<Self> {
        let p = MorletParams {
            omega0,
            envelope_var,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 >= 5.0 && self.omega0.is_finite()) {
            return Err(Error::Config(format!(
                "omega0 = {} must be at least 5 for an admissible Morlet wavelet",
                self.omega0
            )));
        }
        if !(self.envelope_var > 0.0 && self.envelope_var.is_finite()) {
            return Err(Error::Config(format!(
                "envelope_var = {} must be positive",
                self.envelope_var
            )));
        }
        Ok(())
    }

    fn norm(&self) -> f64 {
        (2.0 * self.envelope_var / PI).powf(0.25)
    }

    /// Mother wavelet at dimensionless time `t`.
    pub fn wavelet(&self, t: f64) -> Complex64 {
        let env = self.norm() * (-self.envelope_var * t * t).exp();
        Complex64::from_polar(env, self.omega0 * t)
    }

    /// Fourier transform `Ψ(ν) = ∫ ψ(t) e^{−iνt} dt` (real valued).
    pub fn spectrum(&self, nu: f64) -> f64 {
        let c = self.envelope_var;
        self.norm() * (PI / c).sqrt() * (-(nu - self.omega0).powi(2) / (4.0 * c)).exp()
    }

    /// Ratio of Fourier period to scale: the period whose sinusoid peaks in
    /// power at scale 1.
    pub fn fourier_factor(&self) -> f64 {
        4.0 * PI / (self.omega0 + (self.omega0 * self.omega0 + 4.0 * self.envelope_var).sqrt())
    }

    /// e-folding time of the wavelet power, in units of scale (√2 for the
    /// standard envelope).
    pub fn efolding(&self) -> f64 {
        1.0 / self.envelope_var.sqrt()
    }

    /// `∫₀^∞ Ψ(ν)/ν dν`, the single-integral reconstruction constant.
    pub fn reconstruction_integral(&self) -> f64 {
        // substitute ν = e^u, dν/ν = du; composite Simpson on a smooth integrand
        let lo = (1e-6f64).ln();
        let hi = (self.omega0 + 40.0 * self.envelope_var.sqrt()).ln();
        let m = 20_000;
        let h = (hi - lo) / m as f64;
        let f = |u: f64| self.spectrum(u.exp());
        let mut acc = f(lo) + f(hi);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + k as f64 * h);
        }
        acc * h / 3.0
    }
}

/// Period of scale `s`.
pub fn scale_to_period(s: f64, p: &MorletParams) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("scale {s} must be positive")));
    }
    Ok(p.fourier_factor() * s)
}

/// Scale whose Fourier period is `period`.
pub fn period_to_scale(period: f64, p: &MorletParams) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::Domain(format!("period {period} must be positive")));
    }
    Ok(period / p.fourier_factor())
}

/// Dyadic scales `s_k = s0 · 2^{k·dj}`, `k = 0..=J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    pub s0: f64,
    pub dj: f64,
    /// Number of scale steps `J`; the grid holds `J + 1` scales.
    pub steps: usize,
    pub dt: f64,
    pub scales: Vec<f64>,
}

impl ScaleGrid {
    /// Grid with `s0 = 2·dt`, `dj = 1/12`.
    pub fn default_for(n: usize, dt: f64) -> Result<Self> {
        make_scale_grid(n, dt, 2.0 * dt, 1.0 / 12.0)
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn periods(&self, p: &MorletParams) -> Vec<f64> {
        let ff = p.fourier_factor();
        self.scales.iter().map(|s| s * ff).collect()
    }
}

pub fn make_scale_grid(n: usize, dt: f64, s0: f64, dj: f64) -> Result<ScaleGrid> {
    if n < MIN_LEN {
        return Err(Error::TooShort { len: n, min: MIN_LEN });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Scale(format!("dt = {dt} must be positive")));
    }
    if !(s0 >= 2.0 * dt * (1.0 - 1e-12)) {
        return Err(Error::Scale(format!("s0 = {s0} is below 2·dt = {}", 2.0 * dt)));
    }
    if !(dj > 0.0 && dj <= 0.25) {
        return Err(Error::Scale(format!("dj = {dj} must lie in (0, 1/4]")));
    }
    let span = (n as f64 * dt / s0).log2();
    if span < 0.0 {
        return Err(Error::Scale(format!("s0 = {s0} exceeds the series span {}", n as f64 * dt)));
    }
    let steps = (span / dj + 1e-9).floor() as usize;
    let scales = (0..=steps).map(|k| s0 * 2f64.powf(k as f64 * dj)).collect();
    Ok(ScaleGrid {
        s0,
        dj,
        steps,
        dt,
        scales,
    })
}

/// Per-time maximum reliable period; larger periods feel the zero padding.
pub fn cone_of_influence(n: usize, dt: f64, p: &MorletParams) -> Vec<f64> {
    let k = p.fourier_factor() / p.efolding();
    (0..n)
        .map(|t| k * t.min(n - 1 - t) as f64 * dt)
        .collect()
}

/// Time axis of a field, mirroring the grid of the source series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub unit: TimeUnit,
    pub t0: i64,
    pub step: i64,
    pub n: usize,
}

impl TimeAxis {
    pub fn of(x: &TimeSeries) -> Self {
        TimeAxis {
            unit: x.unit(),
            t0: x.t0(),
            step: x.step(),
            n: x.len(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n)
            .map(|i| self.unit.label(self.t0 + i as i64 * self.step))
            .collect()
    }
}

/// Grid metadata shared by every time-frequency field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub axis: TimeAxis,
    pub grid: ScaleGrid,
    pub params: MorletParams,
    pub coi: Vec<f64>,
}

impl FieldMeta {
    pub fn new(x: &TimeSeries, grid: &ScaleGrid, params: &MorletParams) -> Self {
        FieldMeta {
            axis: TimeAxis::of(x),
            grid: grid.clone(),
            params: *params,
            coi: cone_of_influence(x.len(), x.dt(), params),
        }
    }

    pub fn periods(&self) -> Vec<f64> {
        self.grid.periods(&self.params)
    }

    /// Whether cell (`row`, `t`) lies inside the cone of influence.
    pub fn in_coi(&self, row: usize, t: usize) -> bool {
        self.grid.scales[row] * self.params.fourier_factor() <= self.coi[t]
    }

    /// Boolean mask of COI-interior cells.
    pub fn coi_mask(&self) -> Matrix<bool> {
        let periods = self.periods();
        let rows = periods
            .iter()
            .map(|p| self.coi.iter().map(|c| p <= c).collect())
            .collect();
        Matrix::from_rows(rows)
    }

    pub fn same_grid(&self, other: &FieldMeta) -> bool {
        self.axis == other.axis && self.grid == other.grid && self.params == other.params
    }
}

/// Complex CWT coefficients over (scale × time).
#[derive(Clone, Debug)]
pub struct WaveletField {
    pub meta: FieldMeta,
    pub values: Matrix<Complex64>,
    pub source: String,
}

/// Reusable FFT plan for one (length, dt, wavelet, grid) combination.
pub struct CwtPlan {
    n: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Per-scale spectra of the sampled daughter wavelet, pre-divided by
    /// the FFT length.
    kernels: Vec<Vec<Complex64>>,
}

impl CwtPlan {
    pub fn new(n: usize, dt: f64, params: &MorletParams, grid: &ScaleGrid) -> Result<Self> {
        params.validate()?;
        if n < MIN_LEN {
            return Err(Error::TooShort { len: n, min: MIN_LEN });
        }
        if (grid.dt - dt).abs() > 1e-12 * dt {
            return Err(Error::Alignment(format!(
                "scale grid built for dt = {}, series has dt = {dt}",
                grid.dt
            )));
        }
        // every lag in [-(n-1), n-1] gets its own slot: the circular
        // convolution equals the linear one on [0, n)
        let fft_len = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let scale = 1.0 / fft_len as f64;
        let kernels = exec::map_range(grid.len(), |k| {
            let s = grid.scales[k];
            let amp = dt / s.sqrt();
            let mut h = vec![Complex64::new(0.0, 0.0); fft_len];
            for lag in -(n as i64 - 1)..=(n as i64 - 1) {
                // W(τ) = Σ_t x_t h(τ − t), h(m) = amp · conj ψ(−m·dt/s)
                let v = params.wavelet(-(lag as f64) * dt / s).conj() * amp;
                h[lag.rem_euclid(fft_len as i64) as usize] = v;
            }
            forward.process(&mut h);
            h.iter_mut().for_each(|c| *c *= scale);
            h
        });
        Ok(CwtPlan {
            n,
            fft_len,
            forward,
            inverse,
            kernels,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rows(&self) -> usize {
        self.kernels.len()
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "series length does not match the plan");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        buf
    }

    /// Coefficients for every scale.
    pub fn transform(&self, x: &[f64]) -> Matrix<Complex64> {
        self.transform_rows(x, 0..self.rows())
    }

    /// Coefficients for the scale rows in `rows` only.
    pub fn transform_rows(&self, x: &[f64], rows: Range<usize>) -> Matrix<Complex64> {
        let spec = self.spectrum(x);
        let first = rows.start;
        let out = exec::map_range(rows.len(), |i| {
            let kernel = &self.kernels[first + i];
            let mut buf: Vec<Complex64> = spec.iter().zip(kernel).map(|(a, b)| a * b).collect();
            self.inverse.process(&mut buf);
            buf.truncate(self.n);
            buf
        });
        Matrix::from_rows(out)
    }
}

/// FFT-based transform of `x`.
pub fn transform(x: &TimeSeries, p: &MorletParams, g: &ScaleGrid) -> Result<WaveletField> {
    let plan = CwtPlan::new(x.len(), x.dt(), p, g)?;
    Ok(WaveletField {
        meta: FieldMeta::new(x, g, p),
        values: plan.transform(x.values()),
        source: x.name().to_owned(),
    })
}

/// Literal O(n²·J) evaluation of the transform sum. Test oracle.
pub fn transform_direct(x: &TimeSeries, p: &MorletParams, g: &ScaleGrid) -> Result<WaveletField> {
    p.validate()?;
    let n = x.len();
    if n > DIRECT_MAX_LEN {
        return Err(Error::Size {
            n,
            limit: DIRECT_MAX_LEN,
        });
    }
    let dt = x.dt();
    let v = x.values();
    let rows = g
        .scales
        .iter()
        .map(|&s| {
            let amp = dt / s.sqrt();
            (0..n)
                .map(|tau| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (t, &xt) in v.iter().enumerate() {
                        let u = (t as f64 - tau as f64) * dt / s;
                        acc += p.wavelet(u).conj() * (xt * amp);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Ok(WaveletField {
        meta: FieldMeta::new(x, g, p),
        values: Matrix::from_rows(rows),
        source: x.name().to_owned(),
    })
}

/// Wavelet power `|W|²`.
pub fn power(f: &WaveletField) -> Matrix<f64> {
    f.values.map(|c| c.norm_sqr())
}

/// Inverse transform by the single-integral (real part) formula.
///
/// `x(t) ≈ 2·dj·ln2 / C · Σ_k Re W(t, s_k) / √s_k` with
/// `C = ∫₀^∞ Ψ(ν)/ν dν`. Only the band covered by the grid is recovered and
/// the mean is lost.
pub fn reconstruct(f: &WaveletField) -> Result<TimeSeries> {
    let c = f.meta.params.reconstruction_integral();
    let factor = 2.0 * f.meta.grid.dj * LN_2 / c;
    let n = f.values.cols();
    let mut out = vec![0.0; n];
    for (k, &s) in f.meta.grid.scales.iter().enumerate() {
        let inv = 1.0 / s.sqrt();
        for (o, w) in out.iter_mut().zip(f.values.row(k)) {
            *o += w.re * inv;
        }
    }
    out.iter_mut().for_each(|o| *o *= factor);
    let axis = &f.meta.axis;
    TimeSeries::with_grid(f.source.clone(), axis.unit, axis.t0, axis.step, out)
}
