//! Deterministic pseudo-random streams.
//!
//! Every random decision in this crate flows through [`PrngStream`], a
//! splitmix64 generator, so that datasets regenerate bit-exactly from a
//! master seed. Independent substreams are derived by hashing a textual
//! domain tag into the seed (see [`derive_stream`]), which lets generation
//! parallelize across tasks without changing output bytes.

/// splitmix64 state increment (golden ratio).
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Applies the splitmix64 output mixing function to a raw 64-bit value.
///
/// This is the finalizer alone, without the state increment; it is also
/// used to turn `seed XOR fnv1a64(tag)` into an initial stream state.
pub fn splitmix64_finalizer(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a 64-bit hash of a byte string.
pub fn fnv1a64(data: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in data.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A splitmix64 stream.
///
/// `next_u64` advances the state by the golden-ratio increment and mixes it;
/// `next_f64` maps the top 53 bits onto `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrngStream {
    state: u64,
}

impl PrngStream {
    /// Creates a stream whose first output is `splitmix64(state + gamma)`.
    pub fn from_state(state: u64) -> Self {
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        splitmix64_finalizer(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * 2f64.powi(-53)
    }

    /// Uniform index in `[0, n)`, consuming exactly one draw.
    ///
    /// Since `next_f64() < 1`, the product stays below `n` for any
    /// `n <= 2^53` and the cast never yields `n`.
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_index requires a non-empty range");
        (self.next_f64() * n as f64) as usize
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }

    /// Draws `count` distinct indices from `[0, n)`.
    ///
    /// Implemented as a partial Fisher-Yates over the index list, so the
    /// number of stream draws is exactly `count`.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n, "cannot draw {count} distinct indices from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.next_index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}

/// Derives an independent reproducible stream for a tagged domain.
///
/// `state0 = splitmix64_finalizer(master_seed XOR fnv1a64(tag))`. Tags used
/// by this crate: `cond-seqs`, `op-seqs`, `percep-holdouts`,
/// `test-tasks/<part>`, `task/<task_id>`, `episodes/<part>`,
/// `imagine/<n>`, `builtin-glyphs/<pool>`.
pub fn derive_stream(master_seed: u64, domain_tag: &str) -> PrngStream {
    PrngStream::from_state(splitmix64_finalizer(master_seed ^ fnv1a64(domain_tag)))
}
