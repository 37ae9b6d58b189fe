//! Kruskal–Wallis omnibus test, Dunn post-hoc comparisons with Bonferroni
//! correction, and Pearson correlation with strength bands.

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Family-wise significance level.
pub const ALPHA: f64 = 0.05;

/// Mid-ranks (1-based) of `values` and the tie term `Σ(t³ − t)`.
pub fn mid_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Upper tail of the chi-square distribution via the regularized upper
/// incomplete gamma function.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// Two-sided standard-normal tail probability `P(|Z| ≥ |z|)`.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KwResult {
    /// Tie-corrected statistic.
    pub h: f64,
    pub df: usize,
    pub p: f64,
    pub group_sizes: Vec<usize>,
    /// All observations identical; H reported as 0 and p as 1.
    pub degenerate: bool,
}

impl KwResult {
    pub fn significant(&self) -> bool {
        self.p < ALPHA
    }
}

struct Ranked {
    sizes: Vec<usize>,
    rank_sums: Vec<f64>,
    n: f64,
    ties: f64,
}

fn rank_groups(groups: &[Vec<f64>]) -> Result<Ranked> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: groups.len(),
        });
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::InvalidInput(format!("group {i} is empty")));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    if all.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: all.len(),
        });
    }
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite observation".into()));
    }
    let (ranks, ties) = mid_ranks(&all);
    let mut rank_sums = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for g in groups {
        rank_sums.push(ranks[offset..offset + g.len()].iter().sum());
        offset += g.len();
    }
    Ok(Ranked {
        sizes: groups.iter().map(Vec::len).collect(),
        rank_sums,
        n: all.len() as f64,
        ties,
    })
}

pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KwResult> {
    let r = rank_groups(groups)?;
    let n = r.n;
    let df = groups.len() - 1;
    let correction = 1.0 - r.ties / (n * n * n - n);
    if correction <= 0.0 {
        log::warn!("kruskal-wallis: all observations tied");
        return Ok(KwResult {
            h: 0.0,
            df,
            p: 1.0,
            group_sizes: r.sizes,
            degenerate: true,
        });
    }
    let s: f64 = r
        .rank_sums
        .iter()
        .zip(&r.sizes)
        .map(|(&sum, &size)| sum * sum / size as f64)
        .sum();
    let h = (12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / correction;
    // rounding can leave a tiny negative value when all rank means coincide
    let h = h.max(0.0);
    Ok(KwResult {
        h,
        df,
        p: chi_square_sf(h, df),
        group_sizes: r.sizes,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DunnPair {
    pub i: usize,
    pub j: usize,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
}

impl DunnPair {
    pub fn significant(&self) -> bool {
        self.p_adjusted < ALPHA
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DunnResult {
    /// Pairs in (0,1), (0,2), ..., (k−2,k−1) order.
    pub pairs: Vec<DunnPair>,
    pub comparisons: usize,
}

impl DunnResult {
    pub fn pair(&self, i: usize, j: usize) -> Option<&DunnPair> {
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }
}

/// Dunn's pairwise rank-mean test with pooled tie correction and Bonferroni
/// adjustment over all `k(k−1)/2` pairs.
pub fn dunn_posthoc(groups: &[Vec<f64>]) -> Result<DunnResult> {
    let r = rank_groups(groups)?;
    let n = r.n;
    let k = groups.len();
    let comparisons = k * (k - 1) / 2;
    let variance = n * (n + 1.0) / 12.0 - r.ties / (12.0 * (n - 1.0));
    let means: Vec<f64> = r
        .rank_sums
        .iter()
        .zip(&r.sizes)
        .map(|(&s, &m)| s / m as f64)
        .collect();
    let mut pairs = Vec::with_capacity(comparisons);
    for i in 0..k {
        for j in (i + 1)..k {
            let se = (variance * (1.0 / r.sizes[i] as f64 + 1.0 / r.sizes[j] as f64)).sqrt();
            let z = if se > 0.0 { (means[i] - means[j]) / se } else { 0.0 };
            let p_raw = normal_two_sided(z);
            pairs.push(DunnPair {
                i,
                j,
                z,
                p_raw,
                p_adjusted: (p_raw * comparisons as f64).min(1.0),
            });
        }
    }
    Ok(DunnResult { pairs, comparisons })
}

/// Descriptive band for `|r|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    VeryWeak,
    Weak,
    Moderate,
    Strong,
    VeryStrong,
}

impl Strength {
    /// Bands [0, .19], [.2, .39], [.4, .59], [.6, .79], [.8, 1]; values in the
    /// gaps fall to the lower band.
    pub fn from_r(r: f64) -> Self {
        let a = r.abs();
        if a >= 0.8 {
            Strength::VeryStrong
        } else if a >= 0.6 {
            Strength::Strong
        } else if a >= 0.4 {
            Strength::Moderate
        } else if a >= 0.2 {
            Strength::Weak
        } else {
            Strength::VeryWeak
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Strength::VeryWeak => "very weak",
            Strength::Weak => "weak",
            Strength::Moderate => "moderate",
            Strength::Strong => "strong",
            Strength::VeryStrong => "very strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PearsonResult {
    pub r: f64,
    pub n: usize,
    pub strength: Strength,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<PearsonResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "pearson inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok(PearsonResult {
        r,
        n,
        strength: Strength::from_r(r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    #[test]
    fn ranks_with_ties() {
        let (r, t) = mid_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, 6.0);
    }

    #[test]
    fn identical_groups() {
        let kw = kruskal_wallis(&[g(&[1., 2., 3.]), g(&[1., 2., 3.])]).unwrap();
        assert_eq!(kw.h, 0.0);
        assert_eq!(kw.p, 1.0);
        assert!(!kw.degenerate);
        let d = dunn_posthoc(&[g(&[1., 2., 3.]), g(&[1., 2., 3.])]).unwrap();
        assert_eq!(d.pairs[0].z, 0.0);
        assert_eq!(d.pairs[0].p_adjusted, 1.0);
    }

    #[test]
    fn all_tied_is_degenerate() {
        let kw = kruskal_wallis(&[g(&[2., 2.]), g(&[2., 2.])]).unwrap();
        assert!(kw.degenerate);
        assert_eq!((kw.h, kw.p), (0.0, 1.0));
    }

    #[test]
    fn separated_groups() {
        let groups = [g(&[1., 2., 3.]), g(&[4., 5., 6.]), g(&[7., 8., 9.])];
        let kw = kruskal_wallis(&groups).unwrap();
        assert!((kw.h - 7.2).abs() < 1e-9);
        assert_eq!(kw.df, 2);
        // chi-square(2) survival is exp(-x/2)
        assert!((kw.p - (-3.6f64).exp()).abs() < 1e-12);
        assert!((kw.p - 0.0273).abs() < 5e-5);

        let d = dunn_posthoc(&groups).unwrap();
        assert_eq!(d.comparisons, 3);
        let extreme = d.pair(0, 2).unwrap();
        assert!((extreme.z.abs() - 6.0 / 5f64.sqrt()).abs() < 1e-9);
        // scipy.stats.norm.sf(6/sqrt(5)) * 2
        assert!((extreme.p_raw - 0.007290358091535638).abs() < 1e-12);
        assert!((extreme.p_adjusted - 3.0 * 0.007290358091535638).abs() < 1e-12);
    }

    #[test]
    fn chi_square_reference_values() {
        // scipy.stats.chi2.sf
        assert!((chi_square_sf(3.84, 1) - 0.05004352124870519).abs() < 1e-12);
        assert!((chi_square_sf(11.07, 5) - 0.050009618622405425).abs() < 1e-12);
        assert!((chi_square_sf(1.0, 3) - 0.8012519569012009).abs() < 1e-12);
    }

    #[test]
    fn kw_input_errors() {
        assert!(kruskal_wallis(&[g(&[1., 2.])]).is_err());
        assert!(kruskal_wallis(&[g(&[1.]), g(&[])]).is_err());
        assert!(kruskal_wallis(&[g(&[1.]), g(&[2.])]).is_err());
    }

    #[test]
    fn six_groups_fifteen_pairs() {
        let groups: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64 + 0.5, i as f64 + 0.25]).collect();
        let d = dunn_posthoc(&groups).unwrap();
        assert_eq!(d.comparisons, 15);
        assert_eq!(d.pairs.len(), 15);
        for p in &d.pairs {
            assert!((p.p_adjusted - (15.0 * p.p_raw).min(1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn pearson_examples() {
        let x = [1., 2., 3., 4.];
        let a = pearson(&x, &x.map(|v| 2.0 * v + 1.0)).unwrap();
        assert_eq!(a.r, 1.0);
        assert_eq!(a.strength, Strength::VeryStrong);
        let b = pearson(&x, &x.map(|v| -v)).unwrap();
        assert_eq!(b.r, -1.0);
        assert_eq!(b.strength, Strength::VeryStrong);
        let c = pearson(&x, &[2., 1., 4., 3.]).unwrap();
        assert_eq!(c.r, 0.6);
        assert_eq!(c.strength, Strength::Strong);
        assert!(matches!(pearson(&x, &[1., 1., 1., 1.]), Err(Error::ConstantInput)));
        assert!(pearson(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn strength_bands() {
        assert_eq!(Strength::from_r(0.19), Strength::VeryWeak);
        assert_eq!(Strength::from_r(0.195), Strength::VeryWeak);
        assert_eq!(Strength::from_r(0.2), Strength::Weak);
        assert_eq!(Strength::from_r(-0.395), Strength::Weak);
        assert_eq!(Strength::from_r(0.41), Strength::Moderate);
        assert_eq!(Strength::from_r(0.79), Strength::Strong);
        assert_eq!(Strength::from_r(0.8), Strength::VeryStrong);
    }

    /// Tie-corrected two-sided Mann–Whitney normal approximation, no continuity correction.
    fn mann_whitney_p(a: &[f64], b: &[f64]) -> f64 {
        let (n1, n2) = (a.len() as f64, b.len() as f64);
        let n = n1 + n2;
        let mut all = a.to_vec();
        all.extend_from_slice(b);
        let (ranks, ties) = mid_ranks(&all);
        let r1: f64 = ranks[..a.len()].iter().sum();
        let u = r1 - n1 * (n1 + 1.0) / 2.0;
        let mu = n1 * n2 / 2.0;
        let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
        if var <= 0.0 {
            return 1.0;
        }
        normal_two_sided((u - mu) / var.sqrt())
    }

    fn groups_strategy(k: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0i32..12, 1..6), k)
            .prop_map(|gs| gs.into_iter().map(|g| g.into_iter().map(f64::from).collect()).collect())
            .prop_filter("N >= 3", |gs: &Vec<Vec<f64>>| gs.iter().map(Vec::len).sum::<usize>() >= 3)
    }

    proptest! {
        #[test]
        fn kw_is_rank_based(groups in groups_strategy(2..5)) {
            let a = kruskal_wallis(&groups).unwrap();
            let t: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| (v * 0.3).exp() + 7.0).collect()).collect();
            let b = kruskal_wallis(&t).unwrap();
            prop_assert!((a.h - b.h).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&a.p));
            prop_assert!(a.h >= 0.0);
        }

        #[test]
        fn dunn_antisymmetric_and_clamped(groups in groups_strategy(2..5)) {
            let d = dunn_posthoc(&groups).unwrap();
            let rev: Vec<Vec<f64>> = groups.iter().rev().cloned().collect();
            let r = dunn_posthoc(&rev).unwrap();
            let k = groups.len();
            for p in &d.pairs {
                prop_assert!(p.p_adjusted >= p.p_raw && p.p_adjusted <= 1.0);
                let q = r.pair(k - 1 - p.j, k - 1 - p.i).unwrap();
                prop_assert!((p.z + q.z).abs() < 1e-12 || (p.z - q.z).abs() < 1e-12 && p.z == 0.0);
            }
            let mut a: Vec<f64> = d.pairs.iter().map(|p| p.p_adjusted).collect();
            let mut b: Vec<f64> = r.pairs.iter().map(|p| p.p_adjusted).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn kw_two_groups_matches_mann_whitney(groups in groups_strategy(2..3)) {
            prop_assume!(groups.iter().map(Vec::len).sum::<usize>() <= 20);
            let kw = kruskal_wallis(&groups).unwrap();
            let mw = mann_whitney_p(&groups[0], &groups[1]);
            prop_assert!((kw.p - mw).abs() < 0.02, "{} vs {}", kw.p, mw);
        }

        #[test]
        fn pearson_affine_invariance(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
            a in 0.1f64..10.0, b in -50.0f64..50.0,
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Ok(base) = pearson(&x, &y) {
                let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let neg: Vec<f64> = y.iter().map(|v| -a * v).collect();
                prop_assert!((pearson(&xs, &y).unwrap().r - base.r).abs() < 1e-9);
                prop_assert!((pearson(&x, &neg).unwrap().r + base.r).abs() < 1e-9);
            }
        }
    }
}
