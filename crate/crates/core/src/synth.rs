//! Seeded test signals: the two-sine coherence example, lagged white noise,
//! a white-noise / random-walk pair, and plain sine, white noise and AR(1)
//! helpers.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::significance::Ar1Model;
use crate::timeseries::{TimeSeries, TimeUnit, MIN_LEN};

/// Default std of the additive noise in the two-sine example.
pub const PAPER_SINES_NOISE: f64 = 0.1;
const PAPER_SINES_LEN: usize = 1000;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian(n: usize, std: f64, r: &mut ChaCha8Rng) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; n];
    }
    let d = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| d.sample(r)).collect()
}

fn check_len(n: usize) -> Result<()> {
    if n < MIN_LEN {
        return Err(Error::TooShort { len: n, min: MIN_LEN });
    }
    Ok(())
}

/// Deterministic part of the second series of the two-sine example at
/// `t ∈ [1, 1000]`.
pub fn paper_sine_y(t: f64) -> f64 {
    match t as i64 {
        ..=100 => t.sin() / 100.0,
        101..=350 => t.sin(),
        351..=605 => (t - 0.01).sin() / 1000.0,
        606..=900 => (t + FRAC_PI_2).sin(),
        _ => t.sin() / 100.0,
    }
}

/// `x_t = sin t + ε`, `y_t` piecewise in amplitude and phase, `t = 1..1000`,
/// ε Gaussian with std [`PAPER_SINES_NOISE`].
pub fn gen_paper_sines(seed: u64) -> (TimeSeries, TimeSeries) {
    gen_paper_sines_with(seed, PAPER_SINES_NOISE).expect("default noise is valid")
}

pub fn gen_paper_sines_with(seed: u64, noise_std: f64) -> Result<(TimeSeries, TimeSeries)> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Domain(format!("noise std {noise_std} must be non-negative")));
    }
    let n = PAPER_SINES_LEN;
    let ex = gaussian(n, noise_std, &mut rng(seed, 0));
    let ey = gaussian(n, noise_std, &mut rng(seed, 1));
    let t = |i: usize| (i + 1) as f64;
    let x = (0..n).map(|i| t(i).sin() + ex[i]).collect();
    let y = (0..n).map(|i| paper_sine_y(t(i)) + ey[i]).collect();
    Ok((
        TimeSeries::with_grid("x", TimeUnit::Index, 1, 1, x)?,
        TimeSeries::with_grid("y", TimeUnit::Index, 1, 1, y)?,
    ))
}

/// Piecewise-constant lag: `(start, lag)` breakpoints in increasing order of
/// `start`; the lag at `t` is that of the last breakpoint at or before `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagSchedule {
    pub breaks: Vec<(usize, usize)>,
}

impl Default for LagSchedule {
    /// Lag 1 on `[0, 200]`, 4 on `[201, 350]`, 8 from 351 on.
    fn default() -> Self {
        LagSchedule {
            breaks: vec![(0, 1), (201, 4), (351, 8)],
        }
    }
}

impl LagSchedule {
    pub fn constant(lag: usize) -> Self {
        LagSchedule { breaks: vec![(0, lag)] }
    }

    pub fn lag_at(&self, t: usize) -> usize {
        self.breaks
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map_or(0, |&(_, lag)| lag)
    }

    pub fn max_lag(&self) -> usize {
        self.breaks.iter().map(|&(_, l)| l).max().unwrap_or(0)
    }
}

/// `a_t = u_t`, `b_t = u_{t − lag(t)}` with `u` standard Gaussian, including
/// pre-sample values for the lags.
pub fn gen_lagged_noise(n: usize, lags: &LagSchedule, seed: u64) -> Result<(TimeSeries, TimeSeries)> {
    check_len(n)?;
    let max = lags.max_lag();
    if max >= n {
        return Err(Error::Domain(format!("lag {max} not below series length {n}")));
    }
    if lags.breaks.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Domain("lag breakpoints must be strictly increasing".into()));
    }
    let mut r = rng(seed, 0);
    // u[k] holds u_{k − max}
    let u: Vec<f64> = (0..n + max).map(|_| StandardNormal.sample(&mut r)).collect();
    let a = u[max..].to_vec();
    let b = (0..n).map(|t| u[t + max - lags.lag_at(t)]).collect();
    Ok((TimeSeries::new("a", a)?, TimeSeries::new("b", b)?))
}

/// `a_t = u_t`, `b_t = b_{t−1} + u_t` with `b_0 = u_0`.
pub fn gen_random_walk_pair(n: usize, seed: u64) -> Result<(TimeSeries, TimeSeries)> {
    check_len(n)?;
    let mut r = rng(seed, 0);
    let a: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let b = a
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    Ok((TimeSeries::new("a", a)?, TimeSeries::new("b", b)?))
}

/// `sin(2π t / period + phase)` for `t = 0..n`.
pub fn pure_sine(n: usize, period: f64, phase: f64) -> Result<TimeSeries> {
    check_len(n)?;
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::Domain(format!("period {period} must be positive")));
    }
    let w = 2.0 * std::f64::consts::PI / period;
    TimeSeries::new("sine", (0..n).map(|t| (w * t as f64 + phase).sin()).collect())
}

pub fn white_noise(n: usize, std: f64, seed: u64) -> Result<TimeSeries> {
    check_len(n)?;
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::Domain(format!("noise std {std} must be positive")));
    }
    TimeSeries::new("noise", gaussian(n, std, &mut rng(seed, 0)))
}

/// Stationary zero-mean AR(1) draw.
pub fn ar1(n: usize, alpha: f64, sigma: f64, seed: u64) -> Result<TimeSeries> {
    check_len(n)?;
    let model = Ar1Model::new(alpha, sigma, 0.0)?;
    Ok(crate::significance::surrogate(&model, n, seed)?.renamed("ar1"))
}

/// Generator selection for the `synth` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthKind {
    PaperSines { noise_std: f64 },
    LaggedNoise { lags: LagSchedule },
    RandomWalkPair,
    PureSine { period: f64, phase: f64 },
    WhiteNoise { std: f64 },
    Ar1 { alpha: f64, sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub kind: SynthKind,
    pub n: usize,
    pub seed: u64,
}

/// Runs the generator named by `spec`. The two-sine example ignores `n`.
pub fn generate(spec: &SynthSpec) -> Result<Vec<TimeSeries>> {
    let pair = |(a, b): (TimeSeries, TimeSeries)| vec![a, b];
    Ok(match &spec.kind {
        SynthKind::PaperSines { noise_std } => pair(gen_paper_sines_with(spec.seed, *noise_std)?),
        SynthKind::LaggedNoise { lags } => pair(gen_lagged_noise(spec.n, lags, spec.seed)?),
        SynthKind::RandomWalkPair => pair(gen_random_walk_pair(spec.n, spec.seed)?),
        SynthKind::PureSine { period, phase } => vec![pure_sine(spec.n, *period, *phase)?],
        SynthKind::WhiteNoise { std } => vec![white_noise(spec.n, *std, spec.seed)?],
        SynthKind::Ar1 { alpha, sigma } => vec![ar1(spec.n, *alpha, *sigma, spec.seed)?],
    })
}
