//! Significance tests used to compare benchmark configurations.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    /// Sum of the probabilities of all tables no more likely than the
    /// observed one.
    pub two_sided: f64,
    /// Probability of a top-left count at least as large as observed.
    pub greater: f64,
    /// Probability of a top-left count at most as large as observed.
    pub less: f64,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// Fisher's exact test on `[[a, b], [c, d]]`.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> FisherResult {
    let [[a, b], [c, d]] = table.map(|r| r.map(|x| x as usize));
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    let lf = ln_factorials(n);
    let ln_choose = |n: usize, k: usize| lf[n] - lf[k] - lf[n - k];
    let denom = ln_choose(n, c1);
    let lo = c1.saturating_sub(r2);
    let hi = c1.min(r1);
    let prob = |x: usize| (ln_choose(r1, x) + ln_choose(r2, c1 - x) - denom).exp();
    let observed = prob(a);
    // relative slack so tables tied with the observed one are not lost to
    // rounding
    let cutoff = observed * (1.0 + 1e-7);
    let mut two_sided = 0.0;
    let mut greater = 0.0;
    let mut less = 0.0;
    for x in lo..=hi {
        let p = prob(x);
        if p <= cutoff {
            two_sided += p;
        }
        if x >= a {
            greater += p;
        }
        if x <= a {
            less += p;
        }
    }
    FisherResult {
        two_sided: two_sided.min(1.0),
        greater: greater.min(1.0),
        less: less.min(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Two-sided p-value of a Student t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df must be positive");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Welch's unequal-variance t-test from summary statistics (sample SDs).
pub fn welch_t(mean1: f64, sd1: f64, n1: usize, mean2: f64, sd2: f64, n2: usize) -> WelchResult {
    assert!(n1 >= 2 && n2 >= 2, "each group needs at least two samples");
    let v1 = sd1 * sd1 / n1 as f64;
    let v2 = sd2 * sd2 / n2 as f64;
    let se2 = v1 + v2;
    if se2 == 0.0 {
        return WelchResult {
            t: 0.0,
            df: (n1 + n2 - 2) as f64,
            p: 1.0,
        };
    }
    let t = (mean1 - mean2) / se2.sqrt();
    let df = se2 * se2 / (v1 * v1 / (n1 - 1) as f64 + v2 * v2 / (n2 - 1) as f64);
    WelchResult {
        t,
        df,
        p: t_two_sided_p(t, df),
    }
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn welch_t_samples(a: &[f64], b: &[f64]) -> WelchResult {
    let (m1, s1) = mean_sd(a);
    let (m2, s2) = mean_sd(b);
    welch_t(m1, s1, a.len(), m2, s2, b.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalResult {
    pub h: f64,
    pub df: usize,
    pub p: f64,
}

/// Midranks (1-based) of `values`, ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Kruskal–Wallis H with tie correction and a chi-squared p-value.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> KruskalResult {
    assert!(groups.len() >= 2, "need at least two groups");
    assert!(groups.iter().all(|g| !g.is_empty()), "groups must be non-empty");
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let ranks = midranks(&all);
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let correction = 1.0 - ties / (n * n * n - n);
    let df = groups.len() - 1;
    if correction <= 0.0 {
        // every value identical
        return KruskalResult { h: 0.0, df, p: 1.0 };
    }
    let h = (h_raw / correction).max(0.0);
    let p = ChiSquared::new(df as f64).expect("df >= 1").sf(h);
    KruskalResult { h, df, p }
}
