//! Pairwise time-frequency measures: cross-wavelet spectrum, smoothing,
//! squared coherence, phase difference and the real wavelet correlation.
//!
//! Phase sign convention: `φ > 0` in `[0, π/2]` means the first series
//! leads the second.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::cwt::{CwtPlan, FieldMeta, MorletParams, ScaleGrid, WaveletField};
use crate::error::{Error, Result};
use crate::exec;
use crate::matrix::Matrix;
use crate::timeseries::TimeSeries;

/// Text describing the phase convention, echoed into every output header.
pub const PHASE_CONVENTION: &str =
    "phase = arg(S(W_i conj W_j)); phi in [0, pi/2] or [-pi, -pi/2]: first series leads; \
     phi in (-pi/2, 0) or (pi/2, pi): second series leads; |phi| <= pi/2: in phase";

/// Time kernels up to this many taps are applied directly, longer ones by FFT.
const DIRECT_TAPS: usize = 129;

/// Gaussian time kernel std = `time_factor · s`; boxcar across
/// `scale_octaves` octaves of scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSpec {
    pub time_factor: f64,
    pub scale_octaves: f64,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        SmoothingSpec {
            time_factor: 1.0,
            scale_octaves: 0.6,
        }
    }
}

impl SmoothingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_factor > 0.0 && self.time_factor.is_finite()) {
            return Err(Error::Config(format!(
                "time smoothing factor {} must be positive",
                self.time_factor
            )));
        }
        if !(self.scale_octaves > 0.0 && self.scale_octaves.is_finite()) {
            return Err(Error::Config(format!(
                "scale smoothing width {} must be positive",
                self.scale_octaves
            )));
        }
        Ok(())
    }
}

enum TimeKernel {
    Direct { taps: Vec<f64>, inv_norm: Vec<f64> },
    Fft { spectrum: Vec<f64>, inv_norm: Vec<f64> },
}

struct RealFft {
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

/// Precomputed smoothing operator for one (n, grid, spec).
pub struct Smoother {
    n: usize,
    kernels: Vec<TimeKernel>,
    /// Boxcar weights for scale offsets `-halo..=halo`.
    scale_weights: Vec<f64>,
    halo: usize,
    fft: RealFft,
}

/// `1 / Σ_{t∈[0,n)} g(τ − t)` for a symmetric kernel with taps at lags
/// `-m..=m`.
fn inverse_norms(taps: &[f64], n: usize) -> Vec<f64> {
    let m = (taps.len() / 2) as i64;
    let mut prefix = Vec::with_capacity(taps.len() + 1);
    prefix.push(0.0);
    for &t in taps {
        prefix.push(prefix.last().unwrap() + t);
    }
    (0..n as i64)
        .map(|tau| {
            let lo = (-m).max(tau - (n as i64 - 1));
            let hi = m.min(tau);
            1.0 / (prefix[(hi + m + 1) as usize] - prefix[(lo + m) as usize])
        })
        .collect()
}

impl Smoother {
    pub fn new(n: usize, grid: &ScaleGrid, spec: &SmoothingSpec) -> Result<Self> {
        spec.validate()?;
        let fft_len = (2 * n - 1).next_power_of_two();
        let mut planner = RealFftPlanner::<f64>::new();
        let fft = RealFft {
            len: fft_len,
            forward: planner.plan_fft_forward(fft_len),
            inverse: planner.plan_fft_inverse(fft_len),
        };
        let kernels = grid
            .scales
            .iter()
            .map(|&s| {
                let sigma = spec.time_factor * s / grid.dt;
                // e^{-32}: below f64 resolution relative to the centre tap
                let half = ((8.0 * sigma).ceil() as usize).min(n - 1);
                let taps: Vec<f64> = (-(half as i64)..=half as i64)
                    .map(|l| (-(l as f64).powi(2) / (2.0 * sigma * sigma)).exp())
                    .collect();
                let inv_norm = inverse_norms(&taps, n);
                if taps.len() <= DIRECT_TAPS {
                    TimeKernel::Direct { taps, inv_norm }
                } else {
                    let mut buf = fft.forward.make_input_vec();
                    for (i, &t) in taps.iter().enumerate() {
                        let lag = i as i64 - half as i64;
                        buf[lag.rem_euclid(fft_len as i64) as usize] = t;
                    }
                    let mut out = fft.forward.make_output_vec();
                    fft.forward.process(&mut buf, &mut out).expect("kernel fft");
                    // symmetric kernel: the spectrum is real
                    let spectrum = out.iter().map(|c| c.re / fft_len as f64).collect();
                    TimeKernel::Fft { spectrum, inv_norm }
                }
            })
            .collect();
        let half_rows = spec.scale_octaves / (2.0 * grid.dj);
        let weight = |o: i64| (half_rows + 0.5 - o.abs() as f64).clamp(0.0, 1.0);
        let mut halo = 0;
        while weight(halo as i64 + 1) > 0.0 {
            halo += 1;
        }
        let scale_weights = (-(halo as i64)..=halo as i64).map(weight).collect();
        Ok(Smoother {
            n,
            kernels,
            scale_weights,
            halo,
            fft,
        })
    }

    /// Rows of context needed on each side for scale smoothing.
    pub fn halo(&self) -> usize {
        self.halo
    }

    pub fn rows(&self) -> usize {
        self.kernels.len()
    }

    /// Normalized Gaussian smoothing of one row at scale index `k`.
    pub fn smooth_time(&self, k: usize, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(v.len(), n);
        match &self.kernels[k] {
            TimeKernel::Direct { taps, inv_norm } => {
                let m = taps.len() / 2;
                (0..n)
                    .map(|tau| {
                        // out[τ] = Σ_l g(l) v[τ − l]
                        let lo = tau.saturating_sub(m);
                        let hi = (tau + m).min(n - 1);
                        let mut acc = 0.0;
                        for t in lo..=hi {
                            acc += taps[m + tau - t] * v[t];
                        }
                        acc * inv_norm[tau]
                    })
                    .collect()
            }
            TimeKernel::Fft { spectrum, inv_norm } => {
                let mut buf = self.fft.forward.make_input_vec();
                buf[..n].copy_from_slice(v);
                let mut freq = self.fft.forward.make_output_vec();
                self.fft.forward.process(&mut buf, &mut freq).expect("forward fft");
                for (c, &g) in freq.iter_mut().zip(spectrum) {
                    *c *= g;
                }
                self.fft.inverse.process(&mut freq, &mut buf).expect("inverse fft");
                debug_assert_eq!(buf.len(), self.fft.len);
                buf.truncate(n);
                buf.iter_mut().zip(inv_norm).for_each(|(b, w)| *b *= w);
                buf
            }
        }
    }

    /// Boxcar smoothing across scales. `input` holds time-smoothed rows
    /// `first..first + input.len()`, which must cover `out` plus the halo
    /// (clipped to the grid).
    fn smooth_scale(&self, input: &[Vec<f64>], first: usize, out: Range<usize>) -> Vec<Vec<f64>> {
        let total = self.rows() as i64;
        let h = self.halo as i64;
        out.map(|k| {
            let mut acc = vec![0.0; self.n];
            let mut wsum = 0.0;
            for (i, &w) in self.scale_weights.iter().enumerate() {
                let r = k as i64 + i as i64 - h;
                if r < 0 || r >= total {
                    continue;
                }
                let row = &input[r as usize - first];
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += w * v;
                }
                wsum += w;
            }
            let inv = 1.0 / wsum;
            acc.iter_mut().for_each(|a| *a *= inv);
            acc
        })
        .collect()
    }

    /// Input rows needed to produce output rows `out`.
    pub fn input_rows(&self, out: &Range<usize>) -> Range<usize> {
        out.start.saturating_sub(self.halo)..(out.end + self.halo).min(self.rows())
    }

    /// Full time-then-scale smoothing of a real matrix.
    pub fn smooth_real(&self, m: &Matrix<f64>) -> Matrix<f64> {
        let rows = m.rows();
        let timed = exec::map_range(rows, |k| self.smooth_time(k, m.row(k)));
        Matrix::from_rows(self.smooth_scale(&timed, 0, 0..rows))
    }
}

/// `W_i · conj(W_j)` cellwise.
pub fn cross_wavelet(fi: &WaveletField, fj: &WaveletField) -> Result<Matrix<Complex64>> {
    if !fi.meta.same_grid(&fj.meta) {
        return Err(Error::Alignment(format!(
            "wavelet fields of `{}` and `{}` are on different grids",
            fi.source, fj.source
        )));
    }
    Ok(fi.values.zip_map(&fj.values, |a, b| a * b.conj()))
}

/// Smooths real and imaginary parts separately, in time then in scale.
pub fn smooth(m: &Matrix<Complex64>, g: &ScaleGrid, spec: &SmoothingSpec) -> Result<Matrix<Complex64>> {
    if m.rows() != g.len() {
        return Err(Error::Alignment(format!(
            "matrix has {} rows, grid has {} scales",
            m.rows(),
            g.len()
        )));
    }
    let s = Smoother::new(m.cols(), g, spec)?;
    let re = s.smooth_real(&m.map(|c| c.re));
    let im = s.smooth_real(&m.map(|c| c.im));
    Ok(re.zip_map(&im, |&a, &b| Complex64::new(a, b)))
}

/// Smoothed, scale-normalized cross and auto spectra of a pair for a block of
/// scale rows starting at `first`.
pub struct PairSpectra {
    pub first: usize,
    pub cross_re: Matrix<f64>,
    pub cross_im: Matrix<f64>,
    pub power_i: Matrix<f64>,
    pub power_j: Matrix<f64>,
}

impl PairSpectra {
    fn cells<T>(&self, f: impl Fn(f64, f64, f64, f64) -> T) -> Matrix<T> {
        let (r, c) = self.cross_re.shape();
        let data = (0..r * c)
            .map(|i| {
                f(
                    self.cross_re.as_slice()[i],
                    self.cross_im.as_slice()[i],
                    self.power_i.as_slice()[i],
                    self.power_j.as_slice()[i],
                )
            })
            .collect();
        Matrix::from_vec(r, c, data)
    }

    /// Squared coherence; NaN where a smoothed power vanishes.
    pub fn coherence(&self) -> Matrix<f64> {
        self.cells(|re, im, pi, pj| {
            let d = pi * pj;
            if d > 0.0 {
                ((re * re + im * im) / d).clamp(0.0, 1.0)
            } else {
                f64::NAN
            }
        })
    }

    /// Phase of the smoothed cross spectrum; NaN where it vanishes.
    pub fn phase(&self) -> Matrix<f64> {
        self.cells(|re, im, _, _| if re == 0.0 && im == 0.0 { f64::NAN } else { im.atan2(re) })
    }

    /// Real wavelet correlation; NaN where a smoothed power vanishes.
    pub fn rho(&self) -> Matrix<f64> {
        self.cells(|re, _, pi, pj| {
            let d = pi * pj;
            if d > 0.0 {
                (re / d.sqrt()).clamp(-1.0, 1.0)
            } else {
                f64::NAN
            }
        })
    }
}

/// Cached transform and smoothing plans for repeated pair computations on
/// one grid (Monte Carlo draws, every pair of a panel).
pub struct Analyzer {
    params: MorletParams,
    grid: ScaleGrid,
    cwt: CwtPlan,
    smoother: Smoother,
}

impl Analyzer {
    pub fn new(n: usize, params: &MorletParams, grid: &ScaleGrid, spec: &SmoothingSpec) -> Result<Self> {
        Ok(Analyzer {
            params: *params,
            grid: grid.clone(),
            cwt: CwtPlan::new(n, grid.dt, params, grid)?,
            smoother: Smoother::new(n, grid, spec)?,
        })
    }

    pub fn for_series(x: &TimeSeries, params: &MorletParams, grid: &ScaleGrid, spec: &SmoothingSpec) -> Result<Self> {
        if (grid.dt - x.dt()).abs() > 1e-12 * x.dt() {
            return Err(Error::Alignment(format!(
                "grid dt {} differs from series dt {}",
                grid.dt,
                x.dt()
            )));
        }
        Self::new(x.len(), params, grid, spec)
    }

    pub fn params(&self) -> &MorletParams {
        &self.params
    }

    pub fn grid(&self) -> &ScaleGrid {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.grid.len()
    }

    pub fn halo(&self) -> usize {
        self.smoother.halo()
    }

    pub fn transform(&self, x: &[f64]) -> Matrix<Complex64> {
        self.cwt.transform(x)
    }

    /// Pair spectra from precomputed transforms (all rows).
    pub fn spectra(&self, wi: &Matrix<Complex64>, wj: &Matrix<Complex64>) -> PairSpectra {
        self.spectra_block(wi, wj, 0, 0..self.rows())
    }

    /// Pair spectra for output rows `out`, computing only the transform rows
    /// needed. Results equal the corresponding rows of the full computation.
    pub fn spectra_rows(&self, xi: &[f64], xj: &[f64], out: Range<usize>) -> PairSpectra {
        let need = self.smoother.input_rows(&out);
        let wi = self.cwt.transform_rows(xi, need.clone());
        let wj = self.cwt.transform_rows(xj, need.clone());
        self.spectra_block(&wi, &wj, need.start, out)
    }

    fn spectra_block(
        &self,
        wi: &Matrix<Complex64>,
        wj: &Matrix<Complex64>,
        first: usize,
        out: Range<usize>,
    ) -> PairSpectra {
        let need = self.smoother.input_rows(&out);
        let timed = exec::map_range(need.len(), |i| {
            let k = need.start + i;
            let inv_s = 1.0 / self.grid.scales[k];
            let (ri, rj) = (wi.row(k - first), wj.row(k - first));
            let mut re = Vec::with_capacity(ri.len());
            let mut im = Vec::with_capacity(ri.len());
            let mut pi = Vec::with_capacity(ri.len());
            let mut pj = Vec::with_capacity(ri.len());
            for (a, b) in ri.iter().zip(rj) {
                let c = a * b.conj();
                re.push(c.re * inv_s);
                im.push(c.im * inv_s);
                pi.push(a.norm_sqr() * inv_s);
                pj.push(b.norm_sqr() * inv_s);
            }
            let s = &self.smoother;
            [s.smooth_time(k, &re), s.smooth_time(k, &im), s.smooth_time(k, &pi), s.smooth_time(k, &pj)]
        });
        let part = |j: usize| {
            let rows: Vec<Vec<f64>> = timed.iter().map(|t| t[j].clone()).collect();
            Matrix::from_rows(self.smoother.smooth_scale(&rows, need.start, out.clone()))
        };
        PairSpectra {
            first: out.start,
            cross_re: part(0),
            cross_im: part(1),
            power_i: part(2),
            power_j: part(3),
        }
    }

    /// Pair spectra directly from the two series.
    pub fn spectra_of(&self, xi: &[f64], xj: &[f64]) -> PairSpectra {
        let wi = self.transform(xi);
        let wj = self.transform(xj);
        self.spectra(&wi, &wj)
    }
}

/// Squared wavelet coherence field, values in [0, 1].
#[derive(Clone, Debug)]
pub struct CoherenceField {
    pub meta: FieldMeta,
    pub values: Matrix<f64>,
    pub pair: (String, String),
}

/// Per-cell confidence bounds of a phase field.
#[derive(Clone, Debug)]
pub struct PhaseBounds {
    pub level: f64,
    pub draws: usize,
    pub noise_frac: f64,
    /// Lower bound, wrapped into [−π, π].
    pub lo: Matrix<f64>,
    /// Upper bound, wrapped into [−π, π].
    pub hi: Matrix<f64>,
    /// Arc length from `lo` to `hi` through the point estimate.
    pub width: Matrix<f64>,
}

/// Phase difference field, values in [−π, π].
#[derive(Clone, Debug)]
pub struct PhaseField {
    pub meta: FieldMeta,
    pub values: Matrix<f64>,
    pub pair: (String, String),
    pub ci: Option<PhaseBounds>,
}

/// Real wavelet correlation field, values in [−1, 1].
#[derive(Clone, Debug)]
pub struct RealCorrField {
    pub meta: FieldMeta,
    pub values: Matrix<f64>,
    pub pair: (String, String),
}

/// All three pairwise measures from one set of smoothed spectra.
#[derive(Clone, Debug)]
pub struct PairFields {
    pub coherence: CoherenceField,
    pub phase: PhaseField,
    pub rho: RealCorrField,
}

pub(crate) fn check_pair(xi: &TimeSeries, xj: &TimeSeries) -> Result<()> {
    if xi.unit() != xj.unit() || xi.t0() != xj.t0() || xi.step() != xj.step() || xi.len() != xj.len() {
        return Err(Error::Alignment(format!(
            "`{}` and `{}` are not on the same time grid",
            xi.name(),
            xj.name()
        )));
    }
    Ok(())
}

fn pair_names(xi: &TimeSeries, xj: &TimeSeries) -> (String, String) {
    (xi.name().to_owned(), xj.name().to_owned())
}

/// Computes coherence, phase and ρ of a pair in one pass.
pub fn pair_fields(
    xi: &TimeSeries,
    xj: &TimeSeries,
    p: &MorletParams,
    g: &ScaleGrid,
    spec: &SmoothingSpec,
) -> Result<PairFields> {
    check_pair(xi, xj)?;
    let an = Analyzer::for_series(xi, p, g, spec)?;
    let sp = an.spectra_of(xi.values(), xj.values());
    let meta = FieldMeta::new(xi, g, p);
    let pair = pair_names(xi, xj);
    Ok(PairFields {
        coherence: CoherenceField {
            meta: meta.clone(),
            values: sp.coherence(),
            pair: pair.clone(),
        },
        phase: PhaseField {
            meta: meta.clone(),
            values: sp.phase(),
            pair: pair.clone(),
            ci: None,
        },
        rho: RealCorrField {
            meta,
            values: sp.rho(),
            pair,
        },
    })
}

pub fn squared_coherence(
    xi: &TimeSeries,
    xj: &TimeSeries,
    p: &MorletParams,
    g: &ScaleGrid,
    spec: &SmoothingSpec,
) -> Result<CoherenceField> {
    Ok(pair_fields(xi, xj, p, g, spec)?.coherence)
}

pub fn phase_difference(
    xi: &TimeSeries,
    xj: &TimeSeries,
    p: &MorletParams,
    g: &ScaleGrid,
    spec: &SmoothingSpec,
) -> Result<PhaseField> {
    Ok(pair_fields(xi, xj, p, g, spec)?.phase)
}

pub fn real_wavelet_correlation(
    xi: &TimeSeries,
    xj: &TimeSeries,
    p: &MorletParams,
    g: &ScaleGrid,
    spec: &SmoothingSpec,
) -> Result<RealCorrField> {
    Ok(pair_fields(xi, xj, p, g, spec)?.rho)
}

/// Lead/lag quadrant of a phase difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseQuadrant {
    InPhaseILeads,
    InPhaseJLeads,
    AntiPhaseILeads,
    AntiPhaseJLeads,
}

/// Quadrant of `phi`; ties on 0, ±π/2, ±π go to the side where the first
/// series leads.
pub fn classify_phase(phi: f64) -> Result<PhaseQuadrant> {
    if !(-PI..=PI).contains(&phi) {
        return Err(Error::Domain(format!("phase {phi} outside [-pi, pi]")));
    }
    Ok(if (0.0..=FRAC_PI_2).contains(&phi) {
        PhaseQuadrant::InPhaseILeads
    } else if phi > -FRAC_PI_2 && phi < 0.0 {
        PhaseQuadrant::InPhaseJLeads
    } else if phi > FRAC_PI_2 && phi < PI {
        PhaseQuadrant::AntiPhaseJLeads
    } else {
        PhaseQuadrant::AntiPhaseILeads
    })
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Mean of the defined cells of `row` over `cols`, optionally restricted to
/// cells where `mask` is true. `None` if no cell qualifies.
pub fn row_mean(values: &Matrix<f64>, row: usize, cols: Range<usize>, mask: Option<&Matrix<bool>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in cols {
        let v = *values.get(row, t);
        if v.is_nan() || mask.is_some_and(|m| !*m.get(row, t)) {
            continue;
        }
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}
