//! Red-noise Monte Carlo significance for coherence and bootstrap confidence
//! intervals for the phase difference.
//!
//! Every draw gets its own ChaCha stream derived from the master seed and the
//! draw index, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::comovement::{
    check_pair, wrap_phase, Analyzer, PhaseBounds, PhaseField, SmoothingSpec,
};
use crate::cwt::{FieldMeta, MorletParams, ScaleGrid};
use crate::error::{Error, Result};
use crate::exec;
use crate::matrix::Matrix;
use crate::timeseries::TimeSeries;

/// Minimum draws for a stable per-scale percentile.
pub const MIN_SIGNIFICANCE_DRAWS: usize = 300;
/// Minimum bootstrap replications.
pub const MIN_BOOTSTRAP_DRAWS: usize = 100;
/// Histogram resolution used to pool null coherence values.
pub const NULL_BINS: usize = 8192;

/// Working-set budget for bootstrap replications, in bytes.
const BOOTSTRAP_BUDGET: usize = 256 << 20;

const STREAM_SIGNIFICANCE: u64 = 1;
const STREAM_BOOTSTRAP: u64 = 2;

/// Generator for sub-stream `index` of the given purpose.
fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | index);
    rng
}

/// Gaussian AR(1): `x_t − mean = alpha (x_{t−1} − mean) + sigma e_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ar1Model {
    pub alpha: f64,
    pub sigma: f64,
    pub mean: f64,
}

impl Ar1Model {
    pub fn new(alpha: f64, sigma: f64, mean: f64) -> Result<Self> {
        if !(alpha.abs() < 1.0) {
            return Err(Error::Domain(format!("AR(1) coefficient {alpha} outside (-1, 1)")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("innovation std {sigma} must be positive")));
        }
        if !mean.is_finite() {
            return Err(Error::Domain("AR(1) mean must be finite".into()));
        }
        Ok(Ar1Model { alpha, sigma, mean })
    }

    /// Stationary standard deviation.
    pub fn stationary_std(&self) -> f64 {
        self.sigma / (1.0 - self.alpha * self.alpha).sqrt()
    }

    fn fill(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let mut prev: f64 = StandardNormal.sample(rng);
        prev *= self.stationary_std();
        for (i, slot) in out.iter_mut().enumerate() {
            if i > 0 {
                let e: f64 = StandardNormal.sample(rng);
                prev = self.alpha * prev + self.sigma * e;
            }
            *slot = self.mean + prev;
        }
    }
}

/// Largest |alpha| a fit may return, keeping the model stationary.
const ALPHA_LIMIT: f64 = 0.999;

/// Lag-1 autocorrelation fit with residual innovation variance.
pub fn fit_ar1(x: &TimeSeries) -> Result<Ar1Model> {
    let v = x.values();
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = v.iter().map(|a| a - mean).collect();
    let c0: f64 = d.iter().map(|a| a * a).sum();
    if c0 == 0.0 {
        return Err(Error::Degenerate(format!("`{}` has zero variance", x.name())));
    }
    let c1: f64 = d.windows(2).map(|w| w[0] * w[1]).sum();
    let alpha = (c1 / c0).clamp(-ALPHA_LIMIT, ALPHA_LIMIT);
    let sse: f64 = d.windows(2).map(|w| (w[1] - alpha * w[0]).powi(2)).sum();
    let sigma = (sse / (n - 1) as f64).sqrt();
    if !(sigma > 0.0) {
        return Err(Error::Degenerate(format!(
            "`{}` is perfectly predictable from its lag",
            x.name()
        )));
    }
    Ar1Model::new(alpha, sigma, mean)
}

/// Stationary Gaussian AR(1) draw of length `n`.
pub fn surrogate(model: &Ar1Model, n: usize, seed: u64) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![0.0; n];
    model.fill(&mut rng, &mut v);
    TimeSeries::new("surrogate", v)
}

/// Per-scale thresholds and the resulting mask.
#[derive(Clone, Debug)]
pub struct SignificanceResult {
    /// Null quantile of R² per scale row.
    pub threshold: Vec<f64>,
    /// `value > threshold` of the observed field.
    pub mask: Matrix<bool>,
    pub draws: usize,
    pub seed: u64,
    pub level: f64,
    /// Per row: true if only COI-interior cells were pooled, false if the
    /// row has no interior cells and all its cells were pooled.
    pub coi_pooled: Vec<bool>,
}

impl SignificanceResult {
    /// Recomputes the mask from thresholds for a field.
    pub fn mask_for(threshold: &[f64], values: &Matrix<f64>) -> Matrix<bool> {
        let (rows, cols) = values.shape();
        let data = (0..rows * cols)
            .map(|i| values.as_slice()[i] > threshold[i / cols])
            .collect();
        Matrix::from_vec(rows, cols, data)
    }

    /// Fraction of COI-interior cells flagged significant.
    pub fn interior_fraction(&self, meta: &FieldMeta) -> f64 {
        let (rows, cols) = self.mask.shape();
        let (mut hit, mut total) = (0usize, 0usize);
        for k in 0..rows {
            for t in 0..cols {
                if meta.in_coi(k, t) {
                    total += 1;
                    hit += *self.mask.get(k, t) as usize;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }
}

/// Value at cumulative fraction `level` of a histogram over [0, 1], with
/// linear interpolation inside the bin.
pub(crate) fn histogram_quantile(counts: &[u64], level: f64) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return f64::NAN;
    }
    let bins = counts.len() as f64;
    let target = level * total as f64;
    let mut below = 0u64;
    for (b, &c) in counts.iter().enumerate() {
        if c > 0 && (below + c) as f64 >= target {
            let frac = ((target - below as f64) / c as f64).clamp(0.0, 1.0);
            return ((b as f64 + frac) / bins).min(1.0);
        }
        below += c;
    }
    1.0
}

fn bin_of(v: f64) -> usize {
    ((v * NULL_BINS as f64) as usize).min(NULL_BINS - 1)
}

/// Monte Carlo test at the 95% level.
pub fn coherence_significance(
    xi: &TimeSeries,
    xj: &TimeSeries,
    p: &MorletParams,
    g: &ScaleGrid,
    spec: &SmoothingSpec,
    draws: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    coherence_significance_at(xi, xj, p, g, spec, draws, seed, 0.95)
}

/// Monte Carlo test of squared coherence against independent AR(1)
/// surrogates fitted to each series, thresholded per scale at `level`.
#[allow(clippy::too_many_arguments)]
pub fn coherence_significance_at(
    xi: &TimeSeries,
    xj: &TimeSeries,
    p: &MorletParams,
    g: &ScaleGrid,
    spec: &SmoothingSpec,
    draws: usize,
    seed: u64,
    level: f64,
) -> Result<SignificanceResult> {
    check_pair(xi, xj)?;
    if draws < MIN_SIGNIFICANCE_DRAWS {
        return Err(Error::Config(format!(
            "{draws} Monte Carlo draws, need at least {MIN_SIGNIFICANCE_DRAWS}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("significance level {level} outside (0, 1)")));
    }
    let mi = fit_ar1(xi)?;
    let mj = fit_ar1(xj)?;
    let an = Analyzer::for_series(xi, p, g, spec)?;
    let meta = FieldMeta::new(xi, g, p);
    let (rows, n) = (g.len(), xi.len());
    let coi_pooled: Vec<bool> = (0..rows).map(|k| (0..n).any(|t| meta.in_coi(k, t))).collect();
    let pooled = |k: usize, t: usize| !coi_pooled[k] || meta.in_coi(k, t);

    let counts = exec::fold_range(
        draws,
        || vec![0u64; rows * NULL_BINS],
        |mut acc, d| {
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            mi.fill(&mut stream_rng(seed, STREAM_SIGNIFICANCE, 2 * d as u64), &mut a);
            mj.fill(&mut stream_rng(seed, STREAM_SIGNIFICANCE, 2 * d as u64 + 1), &mut b);
            let r2 = an.spectra_of(&a, &b).coherence();
            for k in 0..rows {
                let hist = &mut acc[k * NULL_BINS..(k + 1) * NULL_BINS];
                for (t, &v) in r2.row(k).iter().enumerate() {
                    if !v.is_nan() && pooled(k, t) {
                        hist[bin_of(v)] += 1;
                    }
                }
            }
            acc
        },
        |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        },
    );
    let threshold: Vec<f64> = (0..rows)
        .map(|k| histogram_quantile(&counts[k * NULL_BINS..(k + 1) * NULL_BINS], level))
        .collect();
    let observed = an.spectra_of(xi.values(), xj.values()).coherence();
    let mask = SignificanceResult::mask_for(&threshold, &observed);
    Ok(SignificanceResult {
        threshold,
        mask,
        draws,
        seed,
        level,
        coi_pooled,
    })
}

/// Bootstrap configuration for phase confidence intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCi {
    pub level: f64,
    pub draws: usize,
    /// Noise std as a fraction of each series' sample std.
    pub noise_frac: f64,
}

impl Default for PhaseCi {
    fn default() -> Self {
        PhaseCi {
            level: 0.95,
            draws: 1000,
            noise_frac: 0.05,
        }
    }
}

impl PhaseCi {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("confidence level {} outside (0, 1)", self.level)));
        }
        if self.draws < MIN_BOOTSTRAP_DRAWS {
            return Err(Error::Config(format!(
                "{} bootstrap draws, need at least {MIN_BOOTSTRAP_DRAWS}",
                self.draws
            )));
        }
        if !(self.noise_frac > 0.0 && self.noise_frac.is_finite()) {
            return Err(Error::Config(format!("noise fraction {} must be positive", self.noise_frac)));
        }
        Ok(())
    }
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Type-7 quantile of sorted data.
fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

fn perturbed(x: &[f64], std: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if std == 0.0 {
        return x.to_vec();
    }
    let noise = Normal::new(0.0, std).expect("positive std");
    x.iter().map(|v| v + noise.sample(rng)).collect()
}

/// Phase difference with bootstrap bounds: each replication adds independent
/// Gaussian noise to both series and recomputes the phase. Bounds are
/// quantiles of the replicated phases recentred on the point estimate.
pub fn phase_bootstrap(
    xi: &TimeSeries,
    xj: &TimeSeries,
    p: &MorletParams,
    g: &ScaleGrid,
    spec: &SmoothingSpec,
    ci: &PhaseCi,
    seed: u64,
) -> Result<PhaseField> {
    check_pair(xi, xj)?;
    ci.validate()?;
    let an = Analyzer::for_series(xi, p, g, spec)?;
    let (rows, n) = (g.len(), xi.len());
    let phase = an.spectra_of(xi.values(), xj.values()).phase();
    let (si, sj) = (ci.noise_frac * sample_std(xi.values()), ci.noise_frac * sample_std(xj.values()));
    let (q_lo, q_hi) = ((1.0 - ci.level) / 2.0, (1.0 + ci.level) / 2.0);

    let per_row = ci.draws * n * std::mem::size_of::<f64>();
    let block = (BOOTSTRAP_BUDGET / per_row.max(1)).clamp(1, rows);
    let mut lo = Matrix::filled(rows, n, f64::NAN);
    let mut hi = Matrix::filled(rows, n, f64::NAN);
    let mut width = Matrix::filled(rows, n, f64::NAN);
    let mut start = 0;
    while start < rows {
        let out = start..(start + block).min(rows);
        let reps = exec::map_range(ci.draws, |r| {
            let a = perturbed(xi.values(), si, &mut stream_rng(seed, STREAM_BOOTSTRAP, 2 * r as u64));
            let b = perturbed(xj.values(), sj, &mut stream_rng(seed, STREAM_BOOTSTRAP, 2 * r as u64 + 1));
            an.spectra_rows(&a, &b, out.clone()).phase()
        });
        let cells = exec::map_range(out.len() * n, |c| {
            let (k, t) = (c / n, c % n);
            let est = *phase.get(out.start + k, t);
            if est.is_nan() {
                return (f64::NAN, f64::NAN, f64::NAN);
            }
            let mut dev: Vec<f64> = reps
                .iter()
                .map(|m| *m.get(k, t))
                .filter(|v| !v.is_nan())
                .map(|v| wrap_phase(v - est))
                .collect();
            if dev.is_empty() {
                return (f64::NAN, f64::NAN, f64::NAN);
            }
            dev.sort_by(f64::total_cmp);
            let (dl, dh) = (quantile_sorted(&dev, q_lo), quantile_sorted(&dev, q_hi));
            (wrap_phase(est + dl), wrap_phase(est + dh), dh - dl)
        });
        for (c, (l, h, w)) in cells.into_iter().enumerate() {
            let (k, t) = (out.start + c / n, c % n);
            lo.set(k, t, l);
            hi.set(k, t, h);
            width.set(k, t, w);
        }
        start = out.end;
    }
    Ok(PhaseField {
        meta: FieldMeta::new(xi, g, p),
        values: phase,
        pair: (xi.name().to_owned(), xj.name().to_owned()),
        ci: Some(PhaseBounds {
            level: ci.level,
            draws: ci.draws,
            noise_frac: ci.noise_frac,
            lo,
            hi,
            width,
        }),
    })
}

/// True if `phi` lies on the arc from `lo` to `hi` (counter-clockwise).
pub fn arc_contains(lo: f64, hi: f64, phi: f64) -> bool {
    let span = (hi - lo).rem_euclid(2.0 * std::f64::consts::PI);
    let off = (phi - lo).rem_euclid(2.0 * std::f64::consts::PI);
    off <= span + 1e-12
}
