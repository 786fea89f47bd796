//! Reproducible parallel random streams.
//!
//! A draw count is cut into fixed-size chunks. Chunk `k` always uses the
//! ChaCha8 stream `k` of the run seed, so results depend only on
//! `(seed, count, chunk_size)` and never on how many threads rayon uses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const DEFAULT_CHUNK: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionPlan {
    pub chunk_size: usize,
}

impl Default for PartitionPlan {
    fn default() -> Self {
        PartitionPlan { chunk_size: DEFAULT_CHUNK }
    }
}

impl PartitionPlan {
    /// `(start, len)` of every chunk covering `count` draws.
    pub fn chunks(&self, count: usize) -> Vec<(usize, usize)> {
        let size = self.chunk_size.max(1);
        (0..count.div_ceil(size)).map(|k| (k * size, size.min(count - k * size))).collect()
    }

    pub fn rng(seed: u64, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk as u64);
        rng
    }

    /// Runs `work(chunk_index, len, rng)` on every chunk in parallel and
    /// returns the results in chunk order.
    pub fn run<T, F>(&self, seed: u64, count: usize, work: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, usize, &mut ChaCha8Rng) -> T + Sync,
    {
        self.chunks(count)
            .into_par_iter()
            .enumerate()
            .map(|(k, (_, len))| {
                let mut rng = Self::rng(seed, k);
                work(k, len, &mut rng)
            })
            .collect()
    }
}

/// Streaming mean and variance (Welford), mergeable across chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / total as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunks_cover_the_count() {
        let plan = PartitionPlan { chunk_size: 4 };
        assert_eq!(plan.chunks(10), vec![(0, 4), (4, 4), (8, 2)]);
        assert!(plan.chunks(0).is_empty());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let plan = PartitionPlan { chunk_size: 1000 };
        let work = |_: usize, len: usize, rng: &mut ChaCha8Rng| (0..len).map(|_| rng.random::<f64>()).sum::<f64>();
        let a = plan.run(7, 10_500, work);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| plan.run(7, 10_500, work));
        assert_eq!(a, b);
    }

    #[test]
    fn merged_welford_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Welford::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut left = Welford::default();
        let mut right = Welford::default();
        xs[..313].iter().for_each(|&x| left.push(x));
        xs[313..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert!((left.mean() - whole.mean()).abs() < 1e-12);
        assert!((left.variance() - whole.variance()).abs() < 1e-10);
    }
}
