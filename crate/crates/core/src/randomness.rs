//! Seeded, bit-accounted randomness.
//!
//! Every random decision made by the sampler goes through [`BitSource`], which
//! hands out raw bits from a ChaCha8 stream and counts each one. Uniform
//! integers are produced by rejection on `ceil(log2 m)`-bit words, so every
//! probability used by the sampler is realized exactly.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic source of uniform random bits that counts what it hands out.
#[derive(Clone, Debug)]
pub struct BitSource {
    seed: u64,
    rng: ChaCha8Rng,
    buffer: u64,
    buffered: u32,
    bits_consumed: u64,
}

impl BitSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buffer: 0,
            buffered: 0,
            bits_consumed: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of raw bits handed out so far.
    pub fn bits_consumed(&self) -> u64 {
        self.bits_consumed
    }

    /// Returns `count` fresh uniform bits in the low end of a word.
    pub fn bits(&mut self, count: u32) -> u64 {
        assert!(count <= 64, "at most 64 bits per request");
        if count == 0 {
            return 0;
        }
        self.bits_consumed += u64::from(count);
        if count <= self.buffered {
            let out = self.buffer & low_mask(count);
            self.buffer = self.buffer.checked_shr(count).unwrap_or(0);
            self.buffered -= count;
            return out;
        }
        // Drain what is left, then top up from a fresh word.
        let have = self.buffered;
        let mut out = self.buffer & low_mask(have);
        let need = count - have;
        let word = self.rng.next_u64();
        out |= (word & low_mask(need)) << have;
        self.buffer = word.checked_shr(need).unwrap_or(0);
        self.buffered = 64 - need;
        out
    }

    /// Uniform integer in `[0, m)`.
    ///
    /// Uses rejection on words of `ceil(log2 m)` bits, so the result is exactly
    /// uniform and the expected cost is below `2 * ceil(log2 m)` bits. `m == 1`
    /// costs nothing.
    pub fn uniform_int(&mut self, m: u64) -> u64 {
        assert!(m >= 1, "uniform_int needs a nonempty range");
        if m == 1 {
            return 0;
        }
        let width = 64 - (m - 1).leading_zeros();
        loop {
            let candidate = self.bits(width);
            if candidate < m {
                return candidate;
            }
        }
    }

    /// Uniform index into a slice of length `len`.
    pub fn uniform_index(&mut self, len: usize) -> usize {
        self.uniform_int(len as u64) as usize
    }

    /// `true` with probability exactly `num / den`.
    ///
    /// Degenerate probabilities (0 and 1) are answered without drawing.
    pub fn bernoulli_rational(&mut self, num: u64, den: u64) -> bool {
        assert!(
            den >= 1 && num <= den,
            "probability {num}/{den} out of range"
        );
        if num == 0 {
            return false;
        }
        if num == den {
            return true;
        }
        self.uniform_int(den) < num
    }

    /// Visits `items` in uniformly random order, without replacement, until
    /// `matches` holds.
    ///
    /// The slice is permuted in place by an incremental Fisher-Yates shuffle;
    /// only the visited prefix is randomized, so the cost is proportional to
    /// the number of items actually searched. Returns the number of items
    /// visited before the match (they occupy `items[..len]`) and the match.
    pub fn shuffled_prefix_search<T: Copy>(
        &mut self,
        items: &mut [T],
        mut matches: impl FnMut(T) -> bool,
    ) -> (usize, Option<T>) {
        let len = items.len();
        for i in 0..len {
            let j = i + self.uniform_index(len - i);
            items.swap(i, j);
            if matches(items[i]) {
                return (i, Some(items[i]));
            }
        }
        (len, None)
    }
}

fn low_mask(count: u32) -> u64 {
    if count >= 64 {
        u64::MAX
    } else {
        (1u64 << count) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_uniform;

    #[test]
    fn unit_range_is_free() {
        let mut rng = BitSource::new(3);
        for _ in 0..10 {
            assert_eq!(rng.uniform_int(1), 0);
        }
        assert_eq!(rng.bits_consumed(), 0);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = BitSource::new(11);
        let mut b = BitSource::new(11);
        let xs: Vec<u64> = (0..200).map(|_| a.uniform_int(6)).collect();
        let ys: Vec<u64> = (0..200).map(|_| b.uniform_int(6)).collect();
        assert_eq!(xs, ys);
        assert_eq!(a.bits_consumed(), b.bits_consumed());
        let mut c = BitSource::new(12);
        let zs: Vec<u64> = (0..200).map(|_| c.uniform_int(6)).collect();
        assert_ne!(xs, zs);
    }

    #[test]
    fn bit_accounting_is_exact() {
        let mut rng = BitSource::new(5);
        let mut expected = 0u64;
        for count in [1u32, 7, 64, 3, 0, 63, 13, 32, 64, 2] {
            rng.bits(count);
            expected += u64::from(count);
            assert_eq!(rng.bits_consumed(), expected);
        }
    }

    #[test]
    fn split_words_match_unsplit_stream() {
        // Requests that straddle word boundaries still read the stream in order.
        let mut whole = BitSource::new(9);
        let first = whole.bits(64);
        let second = whole.bits(64);
        let mut pieces = BitSource::new(9);
        let a = pieces.bits(40);
        let b = pieces.bits(40);
        let c = pieces.bits(48);
        assert_eq!(a, first & low_mask(40));
        assert_eq!(b, (first >> 40) | ((second & low_mask(16)) << 24));
        assert_eq!(c, second >> 16);
    }

    #[test]
    fn fair_coin_is_uniform() {
        let mut rng = BitSource::new(1);
        let mut counts = [0u64; 2];
        for _ in 0..100_000 {
            counts[rng.uniform_int(2) as usize] += 1;
        }
        let report = chi_square_uniform(&counts);
        assert!(report.p_value > 0.001, "{report:?}");
    }

    #[test]
    fn uniform_int_expected_bits_bound() {
        let mut rng = BitSource::new(2);
        for m in [3u64, 5, 6, 7, 13, 100, 1000, 1025] {
            let before = rng.bits_consumed();
            let draws = 20_000u64;
            for _ in 0..draws {
                assert!(rng.uniform_int(m) < m);
            }
            let width = 64 - (m - 1).leading_zeros();
            let mean = (rng.bits_consumed() - before) as f64 / draws as f64;
            assert!(mean <= 2.0 * f64::from(width), "m={m} mean={mean}");
        }
    }

    #[test]
    fn bernoulli_degenerate_and_third() {
        let mut rng = BitSource::new(4);
        assert!((0..1000).all(|_| !rng.bernoulli_rational(0, 5)));
        assert!((0..1000).all(|_| rng.bernoulli_rational(5, 5)));
        assert_eq!(rng.bits_consumed(), 0);
        let mut counts = [0u64; 2];
        let n = 100_000u64;
        for _ in 0..n {
            counts[usize::from(rng.bernoulli_rational(1, 3))] += 1;
        }
        let expected = [2.0 * n as f64 / 3.0, n as f64 / 3.0];
        let report = crate::stats::chi_square(&counts, &expected);
        assert!(report.p_value > 0.001, "{report:?}");
    }

    #[test]
    fn search_empty_and_all_matching() {
        let mut rng = BitSource::new(6);
        let mut empty: [u32; 0] = [];
        assert_eq!(rng.shuffled_prefix_search(&mut empty, |_| true), (0, None));
        for _ in 0..100 {
            let mut items = [1u32, 2, 3, 4];
            let (prefix, found) = rng.shuffled_prefix_search(&mut items, |_| true);
            assert_eq!(prefix, 0);
            assert!(found.is_some());
        }
        let mut items = [1u32, 2, 3];
        let (prefix, found) = rng.shuffled_prefix_search(&mut items, |_| false);
        assert_eq!((prefix, found), (3, None));
    }

    #[test]
    fn search_match_position_is_uniform() {
        let mut rng = BitSource::new(8);
        let mut counts = [0u64; 4];
        for _ in 0..100_000 {
            let mut items = [0u8, 1, 2, 3];
            let (prefix, found) = rng.shuffled_prefix_search(&mut items, |x| x == 2);
            assert_eq!(found, Some(2));
            assert!(!items[..prefix].contains(&2));
            counts[prefix] += 1;
        }
        let report = chi_square_uniform(&counts);
        assert!(report.p_value > 0.001, "{report:?}");
    }
}
