//! Offspring laws, the population process `Z_n`, the martingale limit `W`,
//! the constant `upsilon = sum m^{-i} P[Z_i > 0]` and the cluster-size law
//! `P[T = k] = (1/upsilon) sum_i m^{-i} P[Z_i = k]`.

use crate::rng::{Stream, StreamKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GwError {
    #[error("offspring probabilities must sum to 1 (got {0})")]
    NotNormalized(f64),
    #[error("offspring mean must exceed 1 (got {0})")]
    Subcritical(f64),
    #[error("P[Z_1 = 1] must be < 1")]
    DegenerateUnit,
    #[error("negative probability for count {k}: {p}")]
    NegativeProb { k: u32, p: f64 },
    #[error("population cap {cap} exceeded at generation {generation} (Z = {z})")]
    PopulationCap { cap: u64, generation: u32, z: u64 },
    #[error("all {attempts} replicas went extinct before generation {n}")]
    AllExtinct { attempts: u64, n: u32 },
}

/// Finite-support offspring law. Supercritical by construction; the
/// Kesten-Stigum moment condition holds automatically for finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffspringLaw {
    pmf: Vec<(u32, f64)>,
    cdf: Vec<f64>,
    pub mean: f64,
    pub variant: OffspringVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OffspringVariant {
    DeterministicBinary,
    GeometricTruncated,
    Custom,
}

impl OffspringLaw {
    pub fn new(pmf: Vec<(u32, f64)>, variant: OffspringVariant) -> Result<Self, GwError> {
        let total: f64 = pmf.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GwError::NotNormalized(total));
        }
        for &(k, p) in &pmf {
            if p < 0.0 {
                return Err(GwError::NegativeProb { k, p });
            }
        }
        let mean: f64 = pmf.iter().map(|&(k, p)| k as f64 * p).sum();
        if mean <= 1.0 {
            return Err(GwError::Subcritical(mean));
        }
        let p1: f64 = pmf
            .iter()
            .filter(|&&(k, _)| k == 1)
            .map(|&(_, p)| p)
            .sum();
        if p1 >= 1.0 {
            return Err(GwError::DegenerateUnit);
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &(_, p) in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(OffspringLaw {
            pmf,
            cdf,
            mean,
            variant,
        })
    }

    /// Every particle has exactly two children.
    pub fn deterministic_binary() -> Self {
        Self::new(vec![(2, 1.0)], OffspringVariant::DeterministicBinary).unwrap()
    }

    /// Geometric truncated at `k_max`, renormalized: P[k] proportional to q^k.
    pub fn geometric_truncated(q: f64, k_max: u32) -> Result<Self, GwError> {
        assert!(q > 0.0 && q < 1.0);
        let z: f64 = (0..=k_max).map(|k| q.powi(k as i32)).sum();
        let pmf = (0..=k_max).map(|k| (k, q.powi(k as i32) / z)).collect();
        Self::new(pmf, OffspringVariant::GeometricTruncated)
    }

    pub fn custom(pmf: Vec<(u32, f64)>) -> Result<Self, GwError> {
        Self::new(pmf, OffspringVariant::Custom)
    }

    pub fn pmf(&self) -> &[(u32, f64)] {
        &self.pmf
    }

    pub fn max_children(&self) -> u32 {
        self.pmf.iter().map(|&(k, _)| k).max().unwrap_or(0)
    }

    /// One offspring count.
    #[inline]
    pub fn sample(&self, stream: &mut Stream) -> u32 {
        if self.pmf.len() == 1 {
            return self.pmf[0].0;
        }
        let u = stream.next_f64();
        for (i, &c) in self.cdf.iter().enumerate() {
            if u <= c {
                return self.pmf[i].0;
            }
        }
        self.pmf[self.pmf.len() - 1].0
    }

    /// Probability generating function `E[s^{Z_1}]`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.pmf
            .iter()
            .map(|&(k, p)| p * s.powi(k as i32))
            .sum()
    }

    /// `P[Z_i = 0]` for i = 0..=depth by iterating the pgf.
    pub fn extinction_by_depth(&self, depth: usize) -> Vec<f64> {
        let mut q = vec![0.0];
        for _ in 0..depth {
            q.push(self.pgf(*q.last().unwrap()));
        }
        q
    }

    /// Overall extinction probability (smallest fixed point of the pgf).
    pub fn extinction_probability(&self) -> f64 {
        let mut q = 0.0;
        for _ in 0..100_000 {
            let next = self.pgf(q);
            if (next - q).abs() < 1e-15 {
                return next;
            }
            q = next;
        }
        q
    }
}

/// Exact forward simulation of `Z_0..Z_n`; errors if the population exceeds `cap`.
pub fn simulate_z(
    law: &OffspringLaw,
    n: u32,
    cap: u64,
    key: StreamKey,
) -> Result<Vec<u64>, GwError> {
    let mut zs = Vec::with_capacity(n as usize + 1);
    let mut z = 1u64;
    zs.push(z);
    for g in 0..n {
        let mut next = 0u64;
        let gkey = key.child(g as u64);
        for i in 0..z {
            let mut s = gkey.child(i).stream();
            next += law.sample(&mut s) as u64;
        }
        if next > cap {
            return Err(GwError::PopulationCap {
                cap,
                generation: g + 1,
                z: next,
            });
        }
        z = next;
        zs.push(z);
        if z == 0 {
            zs.resize(n as usize + 1, 0);
            break;
        }
    }
    Ok(zs)
}

/// Approximate draws of `W = lim m^{-n} Z_n` conditioned on survival to
/// generation `n` (extinct replicas rejected).
#[derive(Debug, Clone)]
pub struct WSamples {
    pub samples: Vec<f64>,
    pub extinct_discarded: u64,
    /// Quantile drift between generation n/2 and n (stabilization diagnostic).
    pub median_drift: f64,
}

pub fn estimate_w(
    law: &OffspringLaw,
    n: u32,
    replicas: u32,
    cap: u64,
    key: StreamKey,
) -> Result<WSamples, GwError> {
    let mut samples = Vec::with_capacity(replicas as usize);
    let mut half = Vec::with_capacity(replicas as usize);
    let mut extinct = 0u64;
    let mut attempt = 0u64;
    let max_attempts = 50u64 * replicas as u64 + 100;
    while samples.len() < replicas as usize {
        if attempt >= max_attempts {
            return Err(GwError::AllExtinct {
                attempts: attempt,
                n,
            });
        }
        let zs = simulate_z(law, n, cap, key.child(attempt))?;
        attempt += 1;
        let z = zs[n as usize];
        if z == 0 {
            extinct += 1;
            continue;
        }
        samples.push(z as f64 / law.mean.powi(n as i32));
        half.push(zs[n as usize / 2] as f64 / law.mean.powi(n as i32 / 2));
    }
    let med = |v: &mut Vec<f64>| -> f64 {
        v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let m_full = med(&mut samples.clone());
    let m_half = med(&mut half);
    Ok(WSamples {
        samples,
        extinct_discarded: extinct,
        median_drift: (m_full - m_half).abs(),
    })
}

/// Cached pieces of the cluster-size law `T`.
#[derive(Debug, Clone)]
pub struct ClusterLawCache {
    /// `sum_i m^{-i} P[Z_i > 0]`.
    pub upsilon: f64,
    /// Truncation depth: geometric tail of the depth law below 1e-10.
    pub i_max: usize,
    /// Cumulative depth weights `m^{-i} P[Z_i > 0] / upsilon`.
    depth_cdf: Vec<f64>,
    /// `P[Z_i > 0]` per depth.
    pub survival_by_depth: Vec<f64>,
}

impl ClusterLawCache {
    pub fn build(law: &OffspringLaw) -> Self {
        let m = law.mean;
        // m^{-i}/(1 - 1/m) < 1e-10
        let mut i_max = 1usize;
        while m.powi(-(i_max as i32)) / (1.0 - 1.0 / m) >= 1e-10 {
            i_max += 1;
        }
        let ext = law.extinction_by_depth(i_max);
        let surv: Vec<f64> = ext.iter().map(|&q| 1.0 - q).collect();
        let weights: Vec<f64> = (0..=i_max)
            .map(|i| m.powi(-(i as i32)) * surv[i])
            .collect();
        let upsilon: f64 = weights.iter().sum();
        let mut depth_cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w / upsilon;
            depth_cdf.push(acc);
        }
        ClusterLawCache {
            upsilon,
            i_max,
            depth_cdf,
            survival_by_depth: surv,
        }
    }

    fn sample_depth(&self, stream: &mut Stream) -> usize {
        let u = stream.next_f64();
        match self
            .depth_cdf
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) | Err(i) => i.min(self.depth_cdf.len() - 1),
        }
    }
}

/// One draw of `T` with its sampler diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct TDraw {
    pub value: u64,
    pub depth: usize,
    pub rejections: u32,
    /// Drawn depth hit the truncation edge.
    pub truncated: bool,
}

/// Two-stage sampler: depth `i` with probability `m^{-i} P[Z_i>0]/upsilon`,
/// then `Z_i` conditioned on `Z_i > 0` by resimulation.
pub fn sample_t(
    law: &OffspringLaw,
    cache: &ClusterLawCache,
    key: StreamKey,
) -> Result<TDraw, GwError> {
    let mut stream = key.stream();
    let depth = cache.sample_depth(&mut stream);
    let mut rejections = 0u32;
    loop {
        let zs = simulate_z(law, depth as u32, u64::MAX, key.child(1 + rejections as u64))?;
        let z = zs[depth];
        if z > 0 {
            return Ok(TDraw {
                value: z,
                depth,
                rejections,
                truncated: depth == cache.i_max,
            });
        }
        rejections += 1;
        if rejections > 1_000_000 {
            return Err(GwError::AllExtinct {
                attempts: rejections as u64,
                n: depth as u32,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use approx::assert_relative_eq;

    #[test]
    fn binary_population_is_exact_power() {
        let law = OffspringLaw::deterministic_binary();
        let zs = simulate_z(&law, 10, 1 << 30, StreamKey::root(1)).unwrap();
        assert_eq!(zs[10], 1024);
    }

    #[test]
    fn subcritical_rejected() {
        assert_eq!(
            OffspringLaw::custom(vec![(0, 1.0)]).unwrap_err(),
            GwError::Subcritical(0.0)
        );
        assert!(OffspringLaw::custom(vec![(1, 1.0)]).is_err());
        assert!(OffspringLaw::custom(vec![(0, 0.5), (2, 0.49)]).is_err());
    }

    #[test]
    fn cap_reported() {
        let law = OffspringLaw::deterministic_binary();
        assert!(matches!(
            simulate_z(&law, 40, 1000, StreamKey::root(2)),
            Err(GwError::PopulationCap { .. })
        ));
    }

    #[test]
    fn mean_growth_matches_branching_identity() {
        // E[Z_5] = m^5 for the {0: 1/4, 2: 3/4} law, within 3 SE over 1e5 runs
        let law = OffspringLaw::custom(vec![(0, 0.25), (2, 0.75)]).unwrap();
        let key = StreamKey::root(31);
        let n = 5u32;
        let reps = 100_000u64;
        let vals: Vec<f64> = (0..reps)
            .map(|i| simulate_z(&law, n, 1 << 20, key.child(i)).unwrap()[n as usize] as f64)
            .collect();
        let (mean, se) = stats::mean_se(&vals);
        let expect = 1.5f64.powi(5);
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn binary_w_is_degenerate_one() {
        let law = OffspringLaw::deterministic_binary();
        let w = estimate_w(&law, 12, 50, 1 << 30, StreamKey::root(4)).unwrap();
        assert!(w.samples.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert_eq!(w.extinct_discarded, 0);
    }

    #[test]
    fn w_mean_times_survival_is_one() {
        // E*[W] P[survival] = E[W] = 1 under Kesten-Stigum
        let law = OffspringLaw::custom(vec![(0, 0.25), (2, 0.75)]).unwrap();
        let n = 22u32;
        let w = estimate_w(&law, n, 4000, 1 << 26, StreamKey::root(5)).unwrap();
        let (mean, se) = stats::mean_se(&w.samples);
        // survival to generation n (slightly above the eventual-survival prob)
        let p_surv_n = 1.0 - law.extinction_by_depth(n as usize)[n as usize];
        let prod = mean * p_surv_n;
        assert!(
            (prod - 1.0).abs() < 3.0 * se * p_surv_n + 0.01,
            "E*[W] P[surv] = {prod}"
        );
    }

    #[test]
    fn w_variance_stabilizes() {
        let law = OffspringLaw::custom(vec![(0, 0.25), (2, 0.75)]).unwrap();
        let v = |n: u32, seed: u64| {
            let w = estimate_w(&law, n, 3000, 1 << 26, StreamKey::root(seed)).unwrap();
            let (m, _) = stats::mean_se(&w.samples);
            w.samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (w.samples.len() - 1) as f64
        };
        let v20 = v(20, 6);
        let v30 = v(30, 7);
        assert!(
            (v20 - v30).abs() / v30 < 0.15,
            "variance drift {v20} vs {v30}"
        );
    }

    #[test]
    fn binary_upsilon_is_two() {
        let law = OffspringLaw::deterministic_binary();
        let cache = ClusterLawCache::build(&law);
        assert_relative_eq!(cache.upsilon, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn upsilon_bounds() {
        for law in [
            OffspringLaw::custom(vec![(0, 0.25), (2, 0.75)]).unwrap(),
            OffspringLaw::geometric_truncated(0.6, 8).unwrap(),
        ] {
            let cache = ClusterLawCache::build(&law);
            let m = law.mean;
            assert!(cache.upsilon >= 1.0 && cache.upsilon <= m / (m - 1.0) + 1e-9);
        }
    }

    #[test]
    fn binary_t_law_closed_form() {
        // P[T = 2^i] = 2^{-(i+1)}: chi-square over 8 bins on 1e5 draws
        let law = OffspringLaw::deterministic_binary();
        let cache = ClusterLawCache::build(&law);
        let key = StreamKey::root(8);
        let reps = 100_000u64;
        let mut counts = [0u64; 8]; // bins 1,2,4,...,64, 128+
        let mut max_rejections = 0u32;
        for i in 0..reps {
            let d = sample_t(&law, &cache, key.child(i)).unwrap();
            assert!(d.value.is_power_of_two());
            max_rejections = max_rejections.max(d.rejections);
            let bin = (d.value.trailing_zeros() as usize).min(7);
            counts[bin] += 1;
        }
        assert_eq!(max_rejections, 0, "binary never goes extinct");
        let mut probs = [0.0f64; 8];
        for (i, p) in probs.iter_mut().enumerate().take(7) {
            *p = 0.5f64.powi(i as i32 + 1);
        }
        probs[7] = 1.0 - probs[..7].iter().sum::<f64>();
        let r = stats::chi2_gof(&counts, &probs);
        assert!(r.p_value > 0.01, "chi2 p = {}", r.p_value);
    }

    #[test]
    fn t_sampler_support_for_custom_law() {
        let law = OffspringLaw::custom(vec![(0, 0.25), (3, 0.75)]).unwrap();
        let cache = ClusterLawCache::build(&law);
        let key = StreamKey::root(9);
        for i in 0..2000u64 {
            let d = sample_t(&law, &cache, key.child(i)).unwrap();
            assert!(d.value >= 1);
            // all population sizes are sums of 3-ary splits: supported values only
            if d.depth > 0 {
                assert_eq!(d.value % 3, 0, "depth {} value {}", d.depth, d.value);
            } else {
                assert_eq!(d.value, 1);
            }
        }
    }
}
