//! Goodness-of-fit statistics: Kolmogorov-Smirnov and chi-square.

use statrs::function::gamma::gamma_ur;

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Chi2Result {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov distribution survival Q(t) = 2 sum (-1)^{k-1} e^{-2k^2t^2}.
fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test of `data` against the CDF `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> KsResult {
    assert!(!data.is_empty());
    let mut xs = data.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
        n_effective: n,
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> KsResult {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_unstable_by(|u, v| u.partial_cmp(v).unwrap());
    b.sort_unstable_by(|u, v| u.partial_cmp(v).unwrap());
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(ne.sqrt() * d),
        n_effective: ne,
    }
}

/// Chi-square p-value: P[Chi2_df > x].
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(df / 2.0, x / 2.0)
}

/// Chi-square goodness of fit of observed counts against cell probabilities.
pub fn chi2_gof(observed: &[u64], probs: &[f64]) -> Chi2Result {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut df = observed.len().saturating_sub(1);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n as f64 * p;
        if e <= 0.0 {
            assert!(o == 0, "observed count in zero-probability cell");
            df = df.saturating_sub(1);
            continue;
        }
        stat += (o as f64 - e) * (o as f64 - e) / e;
    }
    Chi2Result {
        statistic: stat,
        df,
        p_value: chi2_sf(stat, df as f64),
    }
}

/// Two-sample chi-square homogeneity test on matched count vectors.
///
/// Cells where both samples are empty are dropped from the statistic.
pub fn chi2_two_sample(a: &[u64], b: &[u64]) -> Chi2Result {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    assert!(na > 0 && nb > 0);
    let (na, nb) = (na as f64, nb as f64);
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&oa, &ob) in a.iter().zip(b) {
        let tot = (oa + ob) as f64;
        if tot == 0.0 {
            continue;
        }
        cells += 1;
        let ea = tot * na / (na + nb);
        let eb = tot * nb / (na + nb);
        stat += (oa as f64 - ea) * (oa as f64 - ea) / ea;
        stat += (ob as f64 - eb) * (ob as f64 - eb) / eb;
    }
    let df = cells.saturating_sub(1);
    Chi2Result {
        statistic: stat,
        df,
        p_value: chi2_sf(stat, df as f64),
    }
}

/// Bin nonnegative counts as {0, 1, 2, 3, 4+}.
pub fn bin_counts_04(counts: &[u64]) -> [u64; 5] {
    let mut out = [0u64; 5];
    for &c in counts {
        out[(c as usize).min(4)] += 1;
    }
    out
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    assert!(n >= 1.0);
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
