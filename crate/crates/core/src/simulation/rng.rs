//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, path, agent, role)`. The address is
//! hashed into the starting state of a SplitMix64 sequence, so a stream can
//! be reconstructed anywhere without touching its neighbours and the output
//! of a simulation does not depend on the order in which paths are visited.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::model::TypeDistribution;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Agent index used for the common noise shared by all agents of a path.
pub const COMMON_AGENT: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum NoiseRole {
    /// Idiosyncratic Brownian motion `W`.
    Idiosyncratic = 1,
    /// Common Brownian motion `B`.
    Common = 2,
    /// Choice of an atom of a type distribution.
    TypeDraw = 3,
}

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    pub fn new(seed: u64, path: u64, agent: u64, role: NoiseRole) -> Self {
        let mut h = mix64(seed ^ GOLDEN);
        h = mix64(h ^ path.wrapping_mul(GOLDEN));
        h = mix64(h ^ agent.rotate_left(17));
        h = mix64(h ^ (role as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
        StreamRng { state: h }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// A single standard normal draw at the given address.
pub fn normal_at(seed: u64, path: u64, agent: u64, role: NoiseRole) -> f64 {
    StreamRng::new(seed, path, agent, role).standard_normal()
}

/// Index of the atom selected by a uniform draw `u` (inverse CDF over the
/// atoms in order).
pub fn pick_atom(d: &TypeDistribution, u: f64) -> usize {
    let mut acc = 0.0;
    for (k, atom) in d.atoms().iter().enumerate() {
        acc += atom.weight;
        if u < acc {
            return k;
        }
    }
    d.len() - 1
}
