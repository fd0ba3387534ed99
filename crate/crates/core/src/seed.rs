//! Sub-seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! single master seed through [`derive`], keyed by a stage name and an index.
//! Streams are therefore independent of execution order and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes `(master, stage, index)` into a 64-bit sub-seed.
pub fn derive(master: u64, stage: &str, index: u64) -> u64 {
    let mut h = FNV_OFFSET;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(splitmix64(master ^ h).wrapping_add(index))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, stage: &str, index: u64) -> Rng {
    rng(derive(master, stage, index))
}

/// Standard normal draws by the Box–Muller transform, caching the second
/// value of each pair.
#[derive(Debug, Default, Clone)]
pub struct BoxMuller {
    spare: Option<f64>,
}

impl BoxMuller {
    pub fn new() -> Self {
        BoxMuller::default()
    }

    pub fn sample(&mut self, rng: &mut Rng) -> f64 {
        use rand::Rng as _;
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps ln finite.
        let u1 = 1.0 - rng.random::<f64>();
        let u2 = rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_separates_stages_and_indices() {
        let a = derive(7, "tree", 0);
        assert_eq!(a, derive(7, "tree", 0));
        assert_ne!(a, derive(7, "tree", 1));
        assert_ne!(a, derive(7, "fold", 0));
        assert_ne!(a, derive(8, "tree", 0));
    }

    #[test]
    fn box_muller_moments() {
        let mut r = rng(5);
        let mut g = BoxMuller::new();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| g.sample(&mut r)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
