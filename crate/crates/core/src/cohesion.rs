//! Weighted cohesion: the weighted mean of pairwise real wavelet correlations
//! over a panel, with weights fixed at one date or varying through time.
//!
//! A pair's weight is the product of its members' weights. Sums run over
//! unordered pairs `i < j` in panel order.

use serde::{Deserialize, Serialize};

use crate::comovement::{Analyzer, RealCorrField, SmoothingSpec};
use crate::cwt::{FieldMeta, MorletParams, ScaleGrid};
use crate::error::{Error, Result};
use crate::exec;
use crate::matrix::Matrix;
use crate::timeseries::Panel;

/// Pair weight construction, echoed into output metadata.
pub const PAIR_WEIGHT_RULE: &str = "w_ij(t) = w_i(t) * w_j(t), summed over unordered pairs i < j";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    Equal,
    /// Weights taken at the grid tick `at` and held constant.
    Fixed { at: i64 },
    TimeVarying,
}

/// Weight sequence of one member, aligned to the panel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MemberWeights {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightScheme {
    pub kind: SchemeKind,
    /// Empty for the equal scheme.
    pub source: Vec<MemberWeights>,
}

impl WeightScheme {
    pub fn equal() -> Self {
        WeightScheme {
            kind: SchemeKind::Equal,
            source: Vec::new(),
        }
    }

    pub fn fixed(at: i64, source: Vec<MemberWeights>) -> Self {
        WeightScheme {
            kind: SchemeKind::Fixed { at },
            source,
        }
    }

    pub fn time_varying(source: Vec<MemberWeights>) -> Self {
        WeightScheme {
            kind: SchemeKind::TimeVarying,
            source,
        }
    }

    /// Short label such as `equal`, `fixed:1997-01` or `tv`.
    pub fn label(&self, meta: &FieldMeta) -> String {
        match self.kind {
            SchemeKind::Equal => "equal".into(),
            SchemeKind::Fixed { at } => format!("fixed:{}", meta.axis.unit.label(at)),
            SchemeKind::TimeVarying => "tv".into(),
        }
    }
}

/// Cohesion over (scale × time), values in [−1, 1]; NaN where every pair is
/// undefined.
#[derive(Clone, Debug)]
pub struct CohesionField {
    pub meta: FieldMeta,
    pub values: Matrix<f64>,
    pub scheme: SchemeKind,
    pub members: Vec<String>,
}

pub fn pair_weight(wi: f64, wj: f64) -> Result<f64> {
    if !(wi > 0.0 && wj > 0.0 && wi.is_finite() && wj.is_finite()) {
        return Err(Error::Domain(format!("weights must be positive, got {wi} and {wj}")));
    }
    Ok(wi * wj)
}

/// ρ of every unordered pair `(i, j)`, `i < j`, in panel order.
pub fn pairwise_rho(panel: &Panel, p: &MorletParams, g: &ScaleGrid, spec: &SmoothingSpec) -> Result<Vec<RealCorrField>> {
    let first = panel.first();
    let an = Analyzer::for_series(first, p, g, spec)?;
    let members = panel.members();
    let transforms = exec::map_range(members.len(), |i| an.transform(members[i].values()));
    let pairs = pair_indices(members.len());
    let meta = FieldMeta::new(first, g, p);
    let rhos = exec::map_range(pairs.len(), |q| {
        let (i, j) = pairs[q];
        an.spectra(&transforms[i], &transforms[j]).rho()
    });
    Ok(rhos
        .into_iter()
        .zip(&pairs)
        .map(|(values, &(i, j))| RealCorrField {
            meta: meta.clone(),
            values,
            pair: (members[i].name().to_owned(), members[j].name().to_owned()),
        })
        .collect())
}

/// Unordered index pairs `i < j` in lexicographic order.
pub fn pair_indices(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect()
}

/// Weighted mean of the pair fields `rho` (ordered as [`pair_indices`]) with
/// per-member weights `weights[i][t]`. Undefined ρ cells leave both the
/// numerator and the normalizer.
pub fn combine(rho: &[Matrix<f64>], weights: &[Vec<f64>]) -> Result<Matrix<f64>> {
    let pairs = pair_indices(weights.len());
    if rho.len() != pairs.len() || rho.is_empty() {
        return Err(Error::Alignment(format!(
            "{} pair fields for {} members",
            rho.len(),
            weights.len()
        )));
    }
    let (rows, n) = rho[0].shape();
    if rho.iter().any(|m| m.shape() != (rows, n)) || weights.iter().any(|w| w.len() != n) {
        return Err(Error::Alignment("pair fields and weights differ in shape".into()));
    }
    let mut omega = vec![vec![0.0; n]; pairs.len()];
    for (q, &(i, j)) in pairs.iter().enumerate() {
        for t in 0..n {
            omega[q][t] = pair_weight(weights[i][t], weights[j][t])?;
        }
    }
    let out = exec::map_range(rows, |k| {
        (0..n)
            .map(|t| {
                let mut den = 0.0;
                for (q, m) in rho.iter().enumerate() {
                    if !m.get(k, t).is_nan() {
                        den += omega[q][t];
                    }
                }
                if den == 0.0 {
                    return f64::NAN;
                }
                let mut acc = 0.0;
                for (q, m) in rho.iter().enumerate() {
                    let r = *m.get(k, t);
                    if !r.is_nan() {
                        acc += (omega[q][t] / den) * r;
                    }
                }
                acc.clamp(-1.0, 1.0)
            })
            .collect::<Vec<f64>>()
    });
    Ok(Matrix::from_rows(out))
}

fn ordered_weights(panel: &Panel, source: &[MemberWeights]) -> Result<Vec<Vec<f64>>> {
    panel
        .members()
        .iter()
        .map(|m| {
            let w = source
                .iter()
                .find(|w| w.name == m.name())
                .ok_or_else(|| Error::Config(format!("no weight sequence for `{}`", m.name())))?;
            if w.values.len() != panel.n() {
                return Err(Error::Alignment(format!(
                    "weights for `{}` have {} values, panel has {}",
                    m.name(),
                    w.values.len(),
                    panel.n()
                )));
            }
            Ok(w.values.clone())
        })
        .collect()
}

/// Per-member weight sequences realizing `scheme` on the panel grid.
pub fn scheme_weights(panel: &Panel, scheme: &WeightScheme) -> Result<Vec<Vec<f64>>> {
    let n = panel.n();
    match scheme.kind {
        SchemeKind::Equal => Ok(vec![vec![1.0; n]; panel.len()]),
        SchemeKind::Fixed { at } => {
            let idx = panel.index_of(at).ok_or_else(|| {
                Error::Config(format!(
                    "fixed-weight anchor {} is not on the panel grid",
                    panel.first().unit().label(at)
                ))
            })?;
            Ok(ordered_weights(panel, &scheme.source)?
                .into_iter()
                .map(|w| vec![w[idx]; n])
                .collect())
        }
        SchemeKind::TimeVarying => ordered_weights(panel, &scheme.source),
    }
}

fn field(panel: &Panel, rho: &[RealCorrField], weights: &[Vec<f64>], kind: SchemeKind) -> Result<CohesionField> {
    let mats: Vec<Matrix<f64>> = rho.iter().map(|r| r.values.clone()).collect();
    let values = combine(&mats, weights)?;
    Ok(CohesionField {
        meta: rho[0].meta.clone(),
        values,
        scheme: kind,
        members: panel.names(),
    })
}

/// Cohesion with any scheme from precomputed pair fields.
pub fn cohesion_from_rho(panel: &Panel, rho: &[RealCorrField], scheme: &WeightScheme) -> Result<CohesionField> {
    let w = scheme_weights(panel, scheme)?;
    field(panel, rho, &w, scheme.kind.clone())
}

/// Cohesion with constant weights (equal, or fixed at an anchor date).
pub fn cohesion_fixed(
    panel: &Panel,
    scheme: &WeightScheme,
    p: &MorletParams,
    g: &ScaleGrid,
    spec: &SmoothingSpec,
) -> Result<CohesionField> {
    if scheme.kind == SchemeKind::TimeVarying {
        return Err(Error::Config("cohesion_fixed needs an equal or fixed scheme".into()));
    }
    let w = scheme_weights(panel, scheme)?;
    field(panel, &pairwise_rho(panel, p, g, spec)?, &w, scheme.kind.clone())
}

/// Cohesion with per-date weights.
pub fn cohesion_time_varying(
    panel: &Panel,
    weights: &[MemberWeights],
    p: &MorletParams,
    g: &ScaleGrid,
    spec: &SmoothingSpec,
) -> Result<CohesionField> {
    let w = ordered_weights(panel, weights)?;
    field(panel, &pairwise_rho(panel, p, g, spec)?, &w, SchemeKind::TimeVarying)
}

/// Elementwise `a − b`.
pub fn cohesion_difference(a: &CohesionField, b: &CohesionField) -> Result<Matrix<f64>> {
    if !a.meta.same_grid(&b.meta) || a.members != b.members {
        return Err(Error::Alignment("cohesion fields differ in grid or members".into()));
    }
    Ok(a.values.zip_map(&b.values, |x, y| x - y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{make_panel, TimeSeries};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn defaults(n: usize) -> (MorletParams, ScaleGrid, SmoothingSpec) {
        (MorletParams::default(), ScaleGrid::default_for(n, 1.0).unwrap(), SmoothingSpec::default())
    }

    fn panel_of(cols: Vec<Vec<f64>>) -> Panel {
        make_panel(
            cols.into_iter()
                .enumerate()
                .map(|(i, v)| TimeSeries::new(format!("s{i}"), v).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn mw(name: &str, values: Vec<f64>) -> MemberWeights {
        MemberWeights {
            name: name.into(),
            values,
        }
    }

    #[test]
    fn pair_weight_examples() {
        assert_eq!(pair_weight(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(pair_weight(2.0, 3.0).unwrap(), 6.0);
        assert!(matches!(pair_weight(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(pair_weight(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn two_members_reduce_to_rho() {
        let n = 128;
        let (p, g, s) = defaults(n);
        let panel = panel_of(vec![noise(n, 1), noise(n, 2)]);
        let rho = pairwise_rho(&panel, &p, &g, &s).unwrap();
        let tv = cohesion_time_varying(
            &panel,
            &[mw("s0", (0..n).map(|t| 1.0 + t as f64).collect()), mw("s1", vec![0.3; n])],
            &p,
            &g,
            &s,
        )
        .unwrap();
        let eq = cohesion_fixed(&panel, &WeightScheme::equal(), &p, &g, &s).unwrap();
        assert_eq!(tv.values, rho[0].values);
        assert_eq!(eq.values, rho[0].values);
    }

    #[test]
    fn identical_members_give_one() {
        let n = 96;
        let (p, g, s) = defaults(n);
        let x = noise(n, 3);
        let panel = panel_of(vec![x.clone(), x.clone(), x]);
        let c = cohesion_fixed(&panel, &WeightScheme::equal(), &p, &g, &s).unwrap();
        assert!(c.values.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn equal_weights_average_pairs() {
        let n = 128;
        let (p, g, s) = defaults(n);
        let x = noise(n, 4);
        let panel = panel_of(vec![x.clone(), x, noise(n, 5)]);
        let rho = pairwise_rho(&panel, &p, &g, &s).unwrap();
        let c = cohesion_fixed(&panel, &WeightScheme::equal(), &p, &g, &s).unwrap();
        for i in 0..c.values.as_slice().len() {
            let mean = rho.iter().map(|r| r.values.as_slice()[i]).sum::<f64>() / 3.0;
            assert!((c.values.as_slice()[i] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn undefined_cells_are_dropped() {
        let a = Matrix::from_vec(1, 2, vec![0.5, f64::NAN]);
        let b = Matrix::from_vec(1, 2, vec![f64::NAN, f64::NAN]);
        let c = Matrix::from_vec(1, 2, vec![-0.5, f64::NAN]);
        let w = vec![vec![1.0, 1.0], vec![2.0, 1.0], vec![1.0, 1.0]];
        // pairs (0,1), (0,2), (1,2) with weights 2, 1, 2
        let out = combine(&[a, b, c], &w).unwrap();
        assert!((out.get(0, 0) - (2.0 * 0.5 - 2.0 * 0.5) / 4.0).abs() < 1e-15);
        assert!(out.get(0, 1).is_nan());
    }

    #[test]
    fn fixed_anchor_must_be_on_grid() {
        let n = 64;
        let (p, g, s) = defaults(n);
        let panel = panel_of(vec![noise(n, 1), noise(n, 2)]);
        let src = vec![mw("s0", vec![1.0; n]), mw("s1", vec![2.0; n])];
        let bad = WeightScheme::fixed(1000, src.clone());
        assert!(matches!(cohesion_fixed(&panel, &bad, &p, &g, &s), Err(Error::Config(_))));
        let missing = WeightScheme::time_varying(vec![src[0].clone()]);
        assert!(matches!(cohesion_from_rho(&panel, &[], &missing), Err(Error::Config(_))));
    }

    #[test]
    fn difference_checks_alignment() {
        let n = 64;
        let (p, g, s) = defaults(n);
        let panel = panel_of(vec![noise(n, 1), noise(n, 2)]);
        let a = cohesion_fixed(&panel, &WeightScheme::equal(), &p, &g, &s).unwrap();
        let d = cohesion_difference(&a, &a).unwrap();
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
        let mut b = a.clone();
        b.members[0] = "other".into();
        assert!(matches!(cohesion_difference(&a, &b), Err(Error::Alignment(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rho_mats(k: usize, rows: usize, n: usize, seed: u64) -> Vec<Matrix<f64>> {
            let pairs = k * (k - 1) / 2;
            (0..pairs)
                .map(|q| {
                    let v = noise(rows * n, seed * 100 + q as u64);
                    Matrix::from_vec(rows, n, v.iter().map(|x| x.tanh()).collect())
                })
                .collect()
        }

        proptest! {
            #[test]
            fn convexity_scaling_and_permutation(
                seed in 0u64..10_000,
                w in proptest::collection::vec(proptest::collection::vec(0.1f64..10.0, 6), 4),
                scale in proptest::collection::vec(0.1f64..10.0, 6),
            ) {
                let (k, rows, n) = (4, 3, 6);
                let rho = rho_mats(k, rows, n, seed);
                let c = combine(&rho, &w).unwrap();
                let pairs = pair_indices(k);
                for r in 0..rows {
                    for t in 0..n {
                        let vals: Vec<f64> = rho.iter().map(|m| *m.get(r, t)).collect();
                        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let v = *c.get(r, t);
                        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                        // brute-force oracle
                        let (mut num, mut den) = (0.0, 0.0);
                        for (q, &(i, j)) in pairs.iter().enumerate() {
                            num += w[i][t] * w[j][t] * vals[q];
                            den += w[i][t] * w[j][t];
                        }
                        prop_assert!((v - num / den).abs() < 1e-12);
                    }
                }
                let scaled: Vec<Vec<f64>> = w.iter().map(|wi| wi.iter().zip(&scale).map(|(a, b)| a * b).collect()).collect();
                let cs = combine(&rho, &scaled).unwrap();
                for (a, b) in c.as_slice().iter().zip(cs.as_slice()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
                // reverse member order: pair (i, j) becomes (k-1-j, k-1-i)
                let rev_w: Vec<Vec<f64>> = w.iter().rev().cloned().collect();
                let rev_pairs = pair_indices(k);
                let rev_rho: Vec<Matrix<f64>> = rev_pairs
                    .iter()
                    .map(|&(i, j)| {
                        let orig = (k - 1 - j, k - 1 - i);
                        rho[pairs.iter().position(|&p| p == orig).unwrap()].clone()
                    })
                    .collect();
                let cr = combine(&rev_rho, &rev_w).unwrap();
                for (a, b) in c.as_slice().iter().zip(cr.as_slice()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }

            #[test]
            fn constant_sequences_match_fixed(seed in 0u64..10_000, w in proptest::collection::vec(0.1f64..10.0, 3)) {
                let n = 64;
                let (p, g, s) = defaults(n);
                let panel = panel_of(vec![noise(n, seed), noise(n, seed + 1), noise(n, seed + 2)]);
                let rho = pairwise_rho(&panel, &p, &g, &s).unwrap();
                let src: Vec<MemberWeights> = (0..3).map(|i| mw(&format!("s{i}"), vec![w[i]; n])).collect();
                let fixed = cohesion_from_rho(&panel, &rho, &WeightScheme::fixed(10, src.clone())).unwrap();
                let tv = cohesion_from_rho(&panel, &rho, &WeightScheme::time_varying(src)).unwrap();
                prop_assert_eq!(fixed.values, tv.values);
            }
        }
    }
}
