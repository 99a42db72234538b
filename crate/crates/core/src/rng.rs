//! Counter-based reproducible random streams.
//!
//! Every stochastic component in this crate draws from a [`Stream`], a small
//! splitmix64 generator whose seed is derived by hashing a key path. Particle
//! streams are keyed by the Ulam-Harris label of the particle, so a replica is
//! bit-reproducible regardless of traversal order or worker count.

/// Golden-ratio increment used by splitmix64.
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A key identifying one logical random stream.
///
/// Keys form a tree: `child(i)` derives a statistically independent subkey.
/// For BRW particles the chain of `child` calls mirrors the Ulam-Harris label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(pub u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(mix64(seed ^ GAMMA))
    }

    /// Subkey for the `i`-th child (offspring index, replica index, shard...).
    #[inline]
    pub fn child(self, i: u64) -> Self {
        StreamKey(mix64(
            self.0 ^ (i.wrapping_add(1)).wrapping_mul(GAMMA),
        ))
    }

    /// Tagged subkey, for distinct draw purposes at the same tree node.
    #[inline]
    pub fn tagged(self, tag: u64) -> Self {
        StreamKey(mix64(self.0.wrapping_add(tag.wrapping_mul(0xD1B5_4A32_D192_ED03))))
    }

    /// Open a generator on this key.
    #[inline]
    pub fn stream(self) -> Stream {
        Stream { state: self.0 }
    }
}

/// splitmix64 generator. Cheap to construct, one multiply-xor chain per draw.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        StreamKey::root(seed).stream()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform on the open interval (0, 1); never returns 0 or 1.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        let bits = self.next_u64() >> 11; // 53 bits
        (bits as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform integer in `[0, n)`.
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // multiply-shift; bias is negligible for n << 2^64
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller (used only by diagnostics).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Poisson draw by inversion for small means, normal tail-patch for large.
    pub fn next_poisson(&mut self, mean: f64) -> u64 {
        assert!(mean >= 0.0 && mean.is_finite(), "poisson mean must be finite >= 0");
        if mean == 0.0 {
            return 0;
        }
        if mean < 60.0 {
            // inversion by sequential search
            let mut k = 0u64;
            let mut p = (-mean).exp();
            let mut cum = p;
            let u = self.next_f64();
            while u > cum {
                k += 1;
                p *= mean / k as f64;
                cum += p;
                if k > 10_000 {
                    break;
                }
            }
            k
        } else {
            // split recursively: Poisson(a+b) = Poisson(a) + Poisson(b)
            let half = mean / 2.0;
            self.next_poisson(half) + self.next_poisson(mean - half)
        }
    }
}
