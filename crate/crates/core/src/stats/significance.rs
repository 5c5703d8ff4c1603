use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::metrics::average_ranks;
use crate::error::{Error, Result};

/// Up to this size Spearman p-values enumerate all permutations.
pub const SPEARMAN_EXACT_MAX: usize = 8;
/// Up to this many non-zero differences the Wilcoxon null is enumerated.
pub const WILCOXON_EXACT_MAX: usize = 25;
pub const WILCOXON_MIN_PAIRS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    McnemarExact,
    WilcoxonSignedRank,
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcnemar" | "mcnemar-exact" => Ok(TestKind::McnemarExact),
            "wilcoxon" | "wilcoxon-signed-rank" => Ok(TestKind::WilcoxonSignedRank),
            _ => Err(Error::Config(format!("unknown test `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub test: TestKind,
    /// McNemar: the smaller discordant count. Wilcoxon: the smaller signed-rank sum.
    pub statistic: f64,
    pub p_value: f64,
    pub systems: [String; 2],
    /// Discordant pairs (McNemar) or non-zero differences (Wilcoxon).
    pub n: usize,
}

impl SignificanceResult {
    pub fn with_systems(mut self, a: impl Into<String>, b: impl Into<String>) -> Self {
        self.systems = [a.into(), b.into()];
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = crate::util::mean(x);
    let my = crate::util::mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation with a two-sided p-value: exact permutation
/// test for small samples, Student-t approximation otherwise.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("spearman: {} vs {} values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::UndefinedMetric("spearman needs at least three pairs".into()));
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::UndefinedMetric("spearman of a constant vector".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let rho = pearson(&rx, &ry);
    let p_value = if n <= SPEARMAN_EXACT_MAX {
        permutation_p(&rx, &ry, rho)
    } else if rho.abs() == 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(Correlation { rho, p_value, n })
}

/// Fraction of orderings of `ry` whose |rho| reaches the observed one.
fn permutation_p(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    let threshold = rho.abs() - 1e-12;
    let mut perm = ry.to_vec();
    let n = perm.len();
    let (mut hits, mut total) = (0u64, 0u64);
    let mut count = |p: &[f64]| {
        total += 1;
        if pearson(rx, p).abs() >= threshold {
            hits += 1;
        }
    };
    // Heap's algorithm
    let mut c = vec![0usize; n];
    count(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            count(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// `P(Bin(n, 1/2) <= k)`. Linear space while `2^-n` is a normal float, so
/// small cases such as a lone `2^-n` tail come out exact; log space beyond.
fn binomial_half_cdf(n: u64, k: u64) -> f64 {
    if n <= 1000 {
        let mut pmf = 0.5f64.powi(n as i32);
        let mut acc = pmf;
        for i in 1..=k.min(n) {
            pmf *= (n - i + 1) as f64 / i as f64;
            acc += pmf;
        }
        return acc;
    }
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let mut ln_choose = 0.0;
    let mut acc = f64::NEG_INFINITY;
    for i in 0..=k.min(n) {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        acc = ln_add(acc, ln_choose);
    }
    (acc - ln_half_n).exp()
}

/// Exact two-sided McNemar test on the discordant pairs of two classifiers.
pub fn mcnemar_exact<T: PartialEq>(golds: &[T], preds_a: &[T], preds_b: &[T]) -> Result<SignificanceResult> {
    if golds.len() != preds_a.len() || golds.len() != preds_b.len() {
        return Err(Error::InvalidArgument("mcnemar: unaligned prediction vectors".into()));
    }
    let (mut b, mut c) = (0u64, 0u64);
    for ((g, a), p) in golds.iter().zip(preds_a).zip(preds_b) {
        match (a == g, p == g) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_from_counts(b, c))
}

pub fn mcnemar_from_counts(b: u64, c: u64) -> SignificanceResult {
    let n = b + c;
    let k = b.min(c);
    let p_value = if n == 0 {
        1.0
    } else {
        (2.0 * binomial_half_cdf(n, k)).min(1.0)
    };
    SignificanceResult {
        test: TestKind::McnemarExact,
        statistic: k as f64,
        p_value,
        systems: ["A".into(), "B".into()],
        n: n as usize,
    }
}

/// Two-sided Wilcoxon signed-rank test on paired values (typically the
/// per-example absolute errors of two regressors).
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<SignificanceResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("wilcoxon: unaligned inputs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Err(Error::UndefinedMetric("wilcoxon: all differences are zero".into()));
    }
    if n < WILCOXON_MIN_PAIRS {
        return Err(Error::UndefinedMetric(format!(
            "wilcoxon needs at least {WILCOXON_MIN_PAIRS} non-zero differences, got {n}"
        )));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);

    let p_value = if n <= WILCOXON_EXACT_MAX {
        // average ranks are multiples of 1/2, so doubled ranks are integers
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut dist = vec![0.0f64; max + 1];
        dist[0] = 1.0;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if dist[s] != 0.0 {
                    dist[s + r] += dist[s];
                }
            }
            reach += r;
        }
        let bound = (2.0 * w).round() as usize;
        let tail: f64 = dist[..=bound].iter().sum();
        (2.0 * tail / 2f64.powi(n as i32)).min(1.0)
    } else {
        let nf = n as f64;
        let mut ties = 0.0;
        let mut sorted = abs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
            let t = j as f64;
            ties += t * t * t - t;
            i += j;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        let z = (w - total / 2.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.cdf(z)).min(1.0)
    };
    Ok(SignificanceResult {
        test: TestKind::WilcoxonSignedRank,
        statistic: w,
        p_value,
        systems: ["A".into(), "B".into()],
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mcnemar_examples() {
        assert_eq!(mcnemar_from_counts(0, 0).p_value, 1.0);
        assert!((mcnemar_from_counts(10, 0).p_value - 1.0 / 512.0).abs() < 1e-15);
        assert_eq!(mcnemar_from_counts(5, 5).p_value, 1.0);
        let g = [1u8, 1, 0, 0, 1];
        let r = mcnemar_exact(&g, &g, &g).unwrap();
        assert_eq!((r.p_value, r.n), (1.0, 0));
    }

    #[test]
    fn wilcoxon_examples() {
        let a = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let b = [1.0; 8];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.p_value, 0.0078125);
        assert_eq!(r.statistic, 0.0);
        assert!(matches!(wilcoxon_signed_rank(&a, &a), Err(Error::UndefinedMetric(_))));
        assert!(wilcoxon_signed_rank(&a[..5], &b[..5]).is_err());
    }

    #[test]
    fn wilcoxon_large_sample_uses_normal_tail() {
        let a: Vec<f64> = (0..60).map(|i| f64::from(i % 7) + 0.5).collect();
        let b: Vec<f64> = (0..60).map(|i| f64::from((i * 3) % 5)).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        let swapped = wilcoxon_signed_rank(&b, &a).unwrap();
        assert!((r.p_value - swapped.p_value).abs() < 1e-15);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman_rho(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap().rho, 1.0);
        let r = spearman_rho(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.rho, -1.0);
        assert!((r.p_value - 2.0 / 120.0).abs() < 1e-15);
        assert!(spearman_rho(&x, &[1.0; 5]).is_err());

        let x: Vec<f64> = (0..40).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 1.7).sin() + v / 10.0).collect();
        let r = spearman_rho(&x, &y).unwrap();
        assert!(r.rho > 0.5 && r.p_value < 0.01);
    }

    proptest! {
        #[test]
        fn mcnemar_is_symmetric(b in 0u64..200, c in 0u64..200) {
            let p = mcnemar_from_counts(b, c).p_value;
            prop_assert_eq!(p, mcnemar_from_counts(c, b).p_value);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn wilcoxon_is_symmetric(pairs in proptest::collection::vec((0u8..6, 0u8..6), 8..40)) {
            let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            if let Ok(r) = wilcoxon_signed_rank(&a, &b) {
                let s = wilcoxon_signed_rank(&b, &a).unwrap();
                prop_assert_eq!(r.p_value, s.p_value);
                prop_assert!((0.0..=1.0).contains(&r.p_value));
            }
        }
    }
}
