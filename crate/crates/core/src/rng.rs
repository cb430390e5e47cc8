//! Counter-based random streams.
//!
//! A stream is identified by `(base_seed, stream_id)`. Every value it
//! produces is a pure function of that pair and a counter, so draws can be
//! keyed by (realization, step, particle) and stay identical no matter
//! which thread computes them or in what order.

use rand_core::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// 64-bit finalizer (the splitmix64 output function).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn combine(key: u64, value: u64) -> u64 {
    mix64(key ^ mix64(value.wrapping_add(GOLDEN)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub base_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub const fn new(base_seed: u64, stream_id: u64) -> Self {
        RngStream { base_seed, stream_id }
    }

    fn key(&self) -> u64 {
        combine(mix64(self.base_seed ^ 0x5851_f42d_4c95_7f2d), self.stream_id)
    }

    /// A child stream, independent of the parent and of siblings with other ids.
    pub fn substream(&self, id: u64) -> RngStream {
        RngStream { base_seed: self.base_seed, stream_id: combine(self.stream_id ^ GOLDEN, id) }
    }

    /// Sequential generator over this stream.
    pub fn rng(&self) -> CounterRng {
        CounterRng::from_key(self.key())
    }

    /// Generator keyed by two indices, e.g. (time step, particle).
    pub fn keyed(&self, a: u64, b: u64) -> CounterRng {
        CounterRng::from_key(combine(combine(self.key(), a), b))
    }
}

/// Generator whose n-th output is `mix64(key + n·γ)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn from_key(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    /// Uniform draw on (0, 1].
    #[inline]
    pub fn uniform_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
