//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the report lines are
//! always printed.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use wavesync::cohesion::{
    cohesion_difference, cohesion_fixed, cohesion_from_rho, cohesion_time_varying, pairwise_rho, MemberWeights,
    WeightScheme,
};
use wavesync::comovement::{pair_fields, real_wavelet_correlation, SmoothingSpec};
use wavesync::cwt::{transform, transform_direct, FieldMeta, MorletParams, ScaleGrid};
use wavesync::significance::{coherence_significance, phase_bootstrap, PhaseCi};
use wavesync::synth::{gen_lagged_noise, gen_paper_sines, gen_random_walk_pair, LagSchedule};
use wavesync::timeseries::{make_panel, TimeSeries};
use wavesync::Matrix;

/// Series length for the calibration criterion.
const CALIBRATION_LEN: usize = 256;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn setup(n: usize) -> (MorletParams, ScaleGrid, SmoothingSpec) {
    (MorletParams::default(), ScaleGrid::default_for(n, 1.0).unwrap(), SmoothingSpec::default())
}

/// Scale rows whose period lies in `[lo, hi]`.
fn band(g: &ScaleGrid, p: &MorletParams, lo: f64, hi: f64) -> Vec<usize> {
    let ff = p.fourier_factor();
    (0..g.len()).filter(|&k| (lo..=hi).contains(&(g.scales[k] * ff))).collect()
}

/// Mean of the defined cells over `rows` × `cols`, optionally COI-interior only.
fn block_mean(m: &Matrix<f64>, rows: &[usize], cols: std::ops::Range<usize>, coi: Option<&FieldMeta>) -> f64 {
    let (mut s, mut c) = (0.0, 0usize);
    for &k in rows {
        for t in cols.clone() {
            let v = *m.get(k, t);
            if v.is_nan() || coi.is_some_and(|meta| !meta.in_coi(k, t)) {
                continue;
            }
            s += v;
            c += 1;
        }
    }
    s / c as f64
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let n = 128;
    let (p, g, _) = setup(n);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let x = TimeSeries::new("x", noise(n, 1000 + seed)).unwrap();
        let fast = transform(&x, &p, &g).unwrap();
        let slow = transform_direct(&x, &p, &g).unwrap();
        for k in 0..g.len() {
            for t in 0..n {
                if fast.meta.in_coi(k, t) {
                    let a = fast.values.get(k, t);
                    let b = slow.values.get(k, t);
                    worst = worst.max((a - b).norm() / b.norm().max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-6 && secs < 10.0,
        format!("max relative error {worst:.2e} (< 1e-6), {secs:.2} s (< 10 s)"),
    )
}

fn c2_two_sines() -> Outcome {
    let start = Instant::now();
    let (x, y) = gen_paper_sines(2024);
    let n = x.len();
    let (p, g, s) = setup(n);
    let f = pair_fields(&x, &y, &p, &g, &s).unwrap();
    let ci = phase_bootstrap(&x, &y, &p, &g, &s, &PhaseCi::default(), 2024).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rows = band(&g, &p, 2.0 * PI * 2f64.powf(-0.25), 2.0 * PI * 2f64.powf(0.25));
    // t = 1..1000 sits at index t - 1
    let seg = |a: usize, b: usize| a - 1..b;
    let r2_a = block_mean(&f.coherence.values, &rows, seg(101, 350), None);
    let r2_b = block_mean(&f.coherence.values, &rows, seg(606, 900), None);
    let abs_phi = f.phase.values.map(|v| v.abs());
    let phi = block_mean(&abs_phi, &rows, seg(606, 900), None);
    let width = &ci.ci.as_ref().unwrap().width;
    let high = (block_mean(width, &rows, seg(101, 350), None) + block_mean(width, &rows, seg(606, 900), None)) / 2.0;
    let low = [seg(1, 100), seg(351, 605), seg(901, 1000)]
        .into_iter()
        .map(|c| block_mean(width, &rows, c, None))
        .sum::<f64>()
        / 3.0;
    let pass = r2_a > 0.9 && r2_b > 0.9 && (phi - FRAC_PI_2).abs() <= 0.3 && high < low / 3.0 && secs < 60.0;
    outcome(
        pass,
        format!(
            "R² {r2_a:.3} / {r2_b:.3} (> 0.9), mean |φ| {phi:.3} (π/2 ± 0.3), CI width high {high:.3} vs low {low:.3} (< 1/3), {secs:.1} s (< 60 s)"
        ),
    )
}

fn c3_lagged_noise() -> Outcome {
    let start = Instant::now();
    let n = 512;
    let (p, g, s) = setup(n);
    let long_rows: Vec<usize> = band(&g, &p, 64.0, f64::INFINITY);
    let meta_of = |x: &TimeSeries| FieldMeta::new(x, &g, &p);
    let (mut short, mut long) = (0.0, vec![0.0; long_rows.len()]);
    let seeds = 10;
    let mut long_rows_used = long_rows.clone();
    for seed in 0..seeds {
        let (a, b) = gen_lagged_noise(n, &LagSchedule::default(), 300 + seed).unwrap();
        let rho = real_wavelet_correlation(&a, &b, &p, &g, &s).unwrap();
        let meta = meta_of(&a);
        short += block_mean(&rho.values, &[0], 0..201, None) / seeds as f64;
        long_rows_used.retain(|&k| (0..n).any(|t| meta.in_coi(k, t)));
        for (i, &k) in long_rows.iter().enumerate() {
            if (0..n).any(|t| meta.in_coi(k, t)) {
                long[i] += block_mean(&rho.values, &[k], 0..n, Some(&meta)) / seeds as f64;
            }
        }
    }
    let long_min = long_rows
        .iter()
        .zip(&long)
        .filter(|(k, _)| long_rows_used.contains(k))
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        short <= -0.8 && long_min >= 0.8 && secs < 30.0,
        format!(
            "ρ at period {:.2}: {short:.3} (≤ -0.8); min over periods ≥ 64: {long_min:.3} (≥ 0.8, {} rows); {secs:.1} s (< 30 s)",
            g.scales[0] * p.fourier_factor(),
            long_rows_used.len()
        ),
    )
}

fn c4_random_walk() -> Outcome {
    let n = 512;
    let (p, g, s) = setup(n);
    let short_rows = band(&g, &p, 2.0, 4.0);
    let seeds = 10;
    let (mut short, mut long) = (0.0, 0.0);
    let mut long_rows = Vec::new();
    for seed in 0..seeds {
        let (a, b) = gen_random_walk_pair(n, 400 + seed).unwrap();
        let rho = real_wavelet_correlation(&a, &b, &p, &g, &s).unwrap();
        let meta = FieldMeta::new(&a, &g, &p);
        // the longest period row that still has COI-interior cells
        let top = (0..g.len()).rev().find(|&k| (0..n).any(|t| meta.in_coi(k, t))).unwrap();
        long_rows = vec![top];
        short += block_mean(&rho.values, &short_rows, 0..n, Some(&meta)) / seeds as f64;
        long += block_mean(&rho.values, &long_rows, 0..n, Some(&meta)) / seeds as f64;
    }
    outcome(
        short >= 0.5 && long.abs() <= 0.3,
        format!(
            "ρ at periods 2-4: {short:.3} (≥ 0.5); at period {:.1}: {long:.3} (|·| ≤ 0.3)",
            g.scales[long_rows[0]] * p.fourier_factor()
        ),
    )
}

fn c5_calibration() -> Outcome {
    let start = Instant::now();
    let n = CALIBRATION_LEN;
    let (p, g, s) = setup(n);
    let mut fractions = Vec::new();
    for rep in 0..20u64 {
        let x = wavesync::synth::ar1(n, 0.7, 1.0, 5000 + 2 * rep).unwrap();
        let y = wavesync::synth::ar1(n, 0.7, 1.0, 5001 + 2 * rep).unwrap();
        let r = coherence_significance(&x, &y, &p, &g, &s, 1000, 77 + rep).unwrap();
        fractions.push(r.interior_fraction(&FieldMeta::new(&x, &g, &p)));
    }
    let ok = fractions.iter().filter(|f| (0.01..=0.10).contains(*f)).count();
    let secs = start.elapsed().as_secs_f64();
    let lo = fractions.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fractions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        ok >= 18,
        format!("{ok}/20 repetitions in [0.01, 0.10] (≥ 18), range {lo:.3}..{hi:.3}, n = {n}, {secs:.1} s"),
    )
}

fn max_abs_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn c6_cohesion_exactness() -> Outcome {
    let n = 256;
    let (p, g, s) = setup(n);
    let names = ["a", "b", "c", "d"];
    let shared = noise(n, 600);
    let series: Vec<TimeSeries> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let own = noise(n, 601 + i as u64);
            let mix = 0.3 * i as f64;
            TimeSeries::new(*name, shared.iter().zip(&own).map(|(a, b)| (1.0 - mix) * a + mix * b).collect()).unwrap()
        })
        .collect();
    let panel = make_panel(series.clone()).unwrap();
    let tv_weights: Vec<MemberWeights> = names
        .iter()
        .enumerate()
        .map(|(i, name)| MemberWeights {
            name: name.to_string(),
            values: (0..n).map(|t| 1.0 + (i as f64 + 1.0) * (1.0 + (t as f64 / 40.0).sin())).collect(),
        })
        .collect();

    // two members: any weights cancel
    let two = make_panel(series[..2].to_vec()).unwrap();
    let rho_ab = real_wavelet_correlation(&series[0], &series[1], &p, &g, &s).unwrap();
    let two_tv = cohesion_time_varying(&two, &tv_weights[..2], &p, &g, &s).unwrap();
    let two_fixed = cohesion_fixed(&two, &WeightScheme::fixed(17, tv_weights[..2].to_vec()), &p, &g, &s).unwrap();
    let e_two = max_abs_diff(&two_tv.values, &rho_ab.values).max(max_abs_diff(&two_fixed.values, &rho_ab.values));

    // constant sequences reduce to the fixed scheme
    let rho = pairwise_rho(&panel, &p, &g, &s).unwrap();
    let consts: Vec<MemberWeights> = tv_weights
        .iter()
        .map(|w| MemberWeights {
            name: w.name.clone(),
            values: vec![w.values[17]; n],
        })
        .collect();
    let tv_const = cohesion_from_rho(&panel, &rho, &WeightScheme::time_varying(consts)).unwrap();
    let fixed = cohesion_from_rho(&panel, &rho, &WeightScheme::fixed(17, tv_weights.clone())).unwrap();
    let e_const = max_abs_diff(&tv_const.values, &fixed.values);

    // equal weights: mean of pairwise ρ
    let equal = cohesion_from_rho(&panel, &rho, &WeightScheme::equal()).unwrap();
    let mean = Matrix::from_vec(
        g.len(),
        n,
        (0..g.len() * n)
            .map(|i| rho.iter().map(|r| r.values.as_slice()[i]).sum::<f64>() / rho.len() as f64)
            .collect(),
    );
    let e_mean = max_abs_diff(&equal.values, &mean);

    // common positive factor per date
    let scaled: Vec<MemberWeights> = tv_weights
        .iter()
        .map(|w| MemberWeights {
            name: w.name.clone(),
            values: w.values.iter().enumerate().map(|(t, v)| v * (0.5 + t as f64 / 10.0)).collect(),
        })
        .collect();
    let tv = cohesion_time_varying(&panel, &tv_weights, &p, &g, &s).unwrap();
    let tv_scaled = cohesion_time_varying(&panel, &scaled, &p, &g, &s).unwrap();
    let e_scale = max_abs_diff(&tv.values, &tv_scaled.values);

    // brute force over ordered pairs i ≠ j, each ρ computed independently
    let mut oracle = Matrix::filled(g.len(), n, 0.0);
    let mut rho_ij = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                rho_ij.push((i, j, real_wavelet_correlation(&series[i], &series[j], &p, &g, &s).unwrap()));
            }
        }
    }
    for k in 0..g.len() {
        for t in 0..n {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, j, r) in &rho_ij {
                let w = tv_weights[*i].values[t] * tv_weights[*j].values[t];
                num += w * r.values.get(k, t);
                den += w;
            }
            oracle.set(k, t, num / den);
        }
    }
    let e_oracle = max_abs_diff(&tv.values, &oracle);
    let worst = e_two.max(e_const).max(e_mean).max(e_scale).max(e_oracle);
    outcome(
        worst <= 1e-12,
        format!(
            "two-member {e_two:.1e}, constant-weight {e_const:.1e}, equal-mean {e_mean:.1e}, scaling {e_scale:.1e}, oracle {e_oracle:.1e} (all ≤ 1e-12)"
        ),
    )
}

fn c8_ramp_panel() -> Outcome {
    let n = 256;
    let (p, g, s) = setup(n);
    let base = noise(n, 800);
    let mut series = Vec::new();
    for i in 0..5 {
        let own = noise(n, 801 + i as u64);
        let mut v: Vec<f64> = base.iter().zip(&own).map(|(a, b)| a + 0.7 * b).collect();
        if i == 4 {
            v.iter_mut().enumerate().for_each(|(t, x)| *x += 2.0 * (2.0 * PI * t as f64 / 16.0).sin());
        }
        series.push(TimeSeries::new(format!("m{i}"), v).unwrap());
    }
    let panel = make_panel(series).unwrap();
    let weights: Vec<MemberWeights> = (0..5)
        .map(|i| MemberWeights {
            name: format!("m{i}"),
            values: (0..n).map(|t| if i == 4 { 1.0 + 9.0 * t as f64 / (n - 1) as f64 } else { 1.0 }).collect(),
        })
        .collect();
    let rho = pairwise_rho(&panel, &p, &g, &s).unwrap();
    let fixed = cohesion_from_rho(&panel, &rho, &WeightScheme::fixed(0, weights.clone())).unwrap();
    let tv = cohesion_from_rho(&panel, &rho, &WeightScheme::time_varying(weights)).unwrap();
    let diff = cohesion_difference(&fixed, &tv).unwrap();
    let mut max_diff: f64 = 0.0;
    let mut violations = 0;
    for i in 0..diff.as_slice().len() {
        let vals: Vec<f64> = rho.iter().map(|r| r.values.as_slice()[i]).collect();
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let d = diff.as_slice()[i].abs();
        max_diff = max_diff.max(d);
        if d > spread + 1e-12 {
            violations += 1;
        }
    }
    outcome(
        max_diff > 0.0 && violations == 0,
        format!("max |fixed - tv| {max_diff:.3} (> 0), {violations} cells above the pairwise ρ spread"),
    )
}

fn wavesync(args: &[&str], threads: &str) -> Result<(), String> {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_wavesync"))
        .args(args)
        .env("WAVESYNC_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c7_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let (data, one, three, again) = (root.join("data"), root.join("t1"), root.join("t3"), root.join("rerun"));
    let run = || -> Result<(), String> {
        wavesync(&["synth", "paper-sines", "--seed", "7", "--out", &s(&data)], "1")?;
        let input = s(&data.join("synth.csv"));
        for (dir, threads) in [(&one, "1"), (&three, "3")] {
            let args = [
                "coherence", "--input", &input, "--mc-draws", "300", "--seed", "42", "--grid", "--out", &s(dir),
            ];
            wavesync(&args, threads)?;
        }
        wavesync(&["rerun", &s(&three.join("coherence.json")), "--out", &s(&again)], "2")
    };
    if let Err(e) = run() {
        return outcome(false, format!("cli run failed: {e}"));
    }
    let (a, b, c) = (dir_files(&one), dir_files(&three), dir_files(&again));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let expected = ["coherence.csv", "coherence.json", "coherence_grid.csv"];
    let same = a == b && a == c;
    let bytes: usize = a.iter().map(|(_, v)| v.len()).sum();
    outcome(
        same && names == expected,
        format!("files {names:?} ({bytes} bytes): threads 1 vs 3 and rerun identical = {same}"),
    )
}

fn main() {
    let criteria: Vec<(u8, &str, fn() -> Outcome)> = vec![
        (1, "CWT oracle equivalence", c1_oracle_equivalence),
        (2, "two-sine coherence, phase and CI", c2_two_sines),
        (3, "lagged noise correlation", c3_lagged_noise),
        (4, "random walk correlation", c4_random_walk),
        (5, "significance calibration", c5_calibration),
        (6, "cohesion exactness", c6_cohesion_exactness),
        (7, "CLI determinism", c7_determinism),
        (8, "weighting effect on a ramp panel", c8_ramp_panel),
    ];
    let only: Option<u8> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let r = run();
        println!("criterion {id} [{}] {name}: {}", if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failed += !r.pass as usize;
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
