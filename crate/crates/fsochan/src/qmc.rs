//! Randomized quasi-Monte Carlo: Sobol points with Joe–Kuo direction numbers
//! and hash-based nested uniform (Owen) scrambling.
//!
//! Every replicate uses an independent scramble; the spread of replicate
//! means gives the standard error. Point ranges are split into fixed chunks so
//! results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Highest supported dimension.
pub const MAX_DIM: usize = 16;

const BITS: usize = 32;
const CHUNK: u64 = 4096;

// new-joe-kuo-6.21201, dimensions 2..=16: (s, a, m_1..m_s)
const JOE_KUO: [(u32, u32, &[u32]); MAX_DIM - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

fn direction_numbers(d: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if d == 0 {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = 1 << (BITS - 1 - i);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[d - 1];
    let s = s as usize;
    for i in 0..BITS {
        if i < s {
            v[i] = m[i] << (BITS - 1 - i);
        } else {
            let mut x = v[i - s] ^ (v[i - s] >> s);
            for k in 1..s {
                if (a >> (s - 1 - k)) & 1 == 1 {
                    x ^= v[i - k];
                }
            }
            v[i] = x;
        }
    }
    v
}

/// Unscrambled Sobol sequence in Gray-code order.
#[derive(Debug, Clone)]
pub struct Sobol {
    dirs: Vec<[u32; BITS]>,
}

impl Sobol {
    pub fn new(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "Sobol dimension {dim} unsupported");
        Sobol {
            dirs: (0..dim).map(direction_numbers).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    /// Coordinate `d` of point `index` as a 32-bit fixed-point fraction.
    #[inline]
    pub fn bits(&self, index: u32, d: usize) -> u32 {
        let mut g = index ^ (index >> 1);
        let v = &self.dirs[d];
        let mut x = 0u32;
        let mut j = 0;
        while g != 0 {
            if g & 1 == 1 {
                x ^= v[j];
            }
            g >>= 1;
            j += 1;
        }
        x
    }

    pub fn point(&self, index: u32, out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate() {
            *o = self.bits(index, d) as f64 / 4294967296.0;
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn laine_karras(mut x: u32, seed: u32) -> u32 {
    x = x.wrapping_add(seed);
    x ^= x.wrapping_mul(0x6c50_b47c);
    x ^= x.wrapping_mul(0xb82f_1e52);
    x ^= x.wrapping_mul(0xc7af_e638);
    x ^= x.wrapping_mul(0x8d22_f6e6);
    x
}

#[inline]
fn nested_uniform_scramble(x: u32, seed: u32) -> u32 {
    laine_karras(x.reverse_bits(), seed).reverse_bits()
}

/// One Owen-scrambled randomization of the Sobol sequence.
#[derive(Debug, Clone)]
pub struct ScrambledSobol {
    base: Sobol,
    seeds: Vec<u32>,
}

impl ScrambledSobol {
    pub fn new(dim: usize, seed: u64, replicate: u32) -> Self {
        let base = Sobol::new(dim);
        let root = splitmix64(seed ^ splitmix64(replicate as u64 + 1));
        let seeds = (0..dim)
            .map(|d| (splitmix64(root.wrapping_add(d as u64)) >> 32) as u32)
            .collect();
        ScrambledSobol { base, seeds }
    }

    /// Point `index` in the open unit cube.
    #[inline]
    pub fn point(&self, index: u32, out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate() {
            let x = nested_uniform_scramble(self.base.bits(index, d), self.seeds[d]);
            *o = (x as f64 + 0.5) / 4294967296.0;
        }
    }
}

/// Point budget for a randomized QMC estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
pub struct Budget {
    /// Total points across all replicates.
    pub points: u64,
    pub replicates: u32,
}

impl Budget {
    pub const DEFAULT: Budget = Budget {
        points: 1 << 20,
        replicates: 16,
    };

    pub fn new(points: u64, replicates: u32) -> Self {
        Budget { points, replicates }
    }

    /// Points per replicate, rounded down to a power of two.
    pub fn per_replicate(&self) -> u64 {
        let n = (self.points / self.replicates.max(1) as u64).max(1);
        1u64 << (63 - n.leading_zeros())
    }

    pub fn is_valid(&self) -> bool {
        self.replicates >= 2 && self.points >= 2 * self.replicates as u64
            && self.per_replicate() <= 1u64 << 32
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::DEFAULT
    }
}

/// Mean and standard error of a replicated QMC estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub points: u64,
    pub replicates: u32,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            std_error: 0.0,
            points: 0,
            replicates: 0,
        }
    }
}

/// Estimates `K` integrals over the unit cube of dimension `dim` at once.
///
/// `f` receives a point and writes the `K` integrand values.
pub fn estimate<const K: usize, F>(dim: usize, budget: Budget, seed: u64, f: F) -> [Estimate; K]
where
    F: Fn(&[f64], &mut [f64; K]) + Sync,
{
    let n = budget.per_replicate();
    let reps = budget.replicates.max(2);
    let means: Vec<[f64; K]> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let seq = ScrambledSobol::new(dim, seed, r);
            let chunks = n.div_ceil(CHUNK);
            let partial: Vec<[f64; K]> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut x = [0.0; MAX_DIM];
                    let mut y = [0.0; K];
                    let mut acc = [0.0; K];
                    let end = ((c + 1) * CHUNK).min(n);
                    for i in c * CHUNK..end {
                        seq.point(i as u32, &mut x[..dim]);
                        f(&x[..dim], &mut y);
                        for k in 0..K {
                            acc[k] += y[k];
                        }
                    }
                    acc
                })
                .collect();
            let mut sum = [0.0; K];
            for p in &partial {
                for k in 0..K {
                    sum[k] += p[k];
                }
            }
            sum.map(|s| s / n as f64)
        })
        .collect();
    let mut out = [Estimate::exact(0.0); K];
    for (k, o) in out.iter_mut().enumerate() {
        let m = means.iter().map(|v| v[k]).sum::<f64>() / reps as f64;
        let var = means.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        *o = Estimate {
            mean: m,
            std_error: (var / reps as f64).sqrt(),
            points: n * reps as u64,
            replicates: reps,
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // first points of the unscrambled sequence, checked against scipy's
    // Sobol(scramble=False)
    #[test]
    fn unscrambled_prefix() {
        let s = Sobol::new(10);
        let mut p = [0.0; 10];
        s.point(0, &mut p);
        assert!(p.iter().all(|&x| x == 0.0));
        s.point(1, &mut p);
        assert!(p.iter().all(|&x| x == 0.5));
        s.point(2, &mut p);
        assert_eq!(p, [0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75, 0.75]);
        s.point(3, &mut p);
        assert_eq!(p, [0.25, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75, 0.25, 0.25, 0.25]);
        s.point(5, &mut p);
        assert_eq!(p, [0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875, 0.375, 0.375, 0.125]);
    }

    #[test]
    fn scrambled_points_stay_stratified() {
        for d in [0usize, 3, 9, 15] {
            let seq = ScrambledSobol::new(16, 77, 3);
            let m = 10;
            let mut hit = vec![false; 1 << m];
            let mut x = [0.0; 16];
            for i in 0..(1u32 << m) {
                seq.point(i, &mut x);
                let cell = (x[d] * (1u64 << m) as f64) as usize;
                assert!(!hit[cell], "dim {d}: two points in cell {cell}");
                hit[cell] = true;
            }
        }
    }

    #[test]
    fn pairs_form_a_net() {
        // the first 2^m points of dims (0, 1) hit every 2^a x 2^(m-a) box once
        let seq = ScrambledSobol::new(2, 5, 0);
        let m = 8;
        for a in 0..=m {
            let mut seen = std::collections::HashSet::new();
            let mut x = [0.0; 2];
            for i in 0..(1u32 << m) {
                seq.point(i, &mut x);
                let bx = (x[0] * (1u64 << a) as f64) as u64;
                let by = (x[1] * (1u64 << (m - a)) as f64) as u64;
                assert!(seen.insert((bx, by)));
            }
        }
    }

    #[test]
    fn estimate_is_unbiased_and_thread_independent() {
        let f = |x: &[f64], y: &mut [f64; 2]| {
            y[0] = x.iter().map(|v| v * v).sum::<f64>();
            y[1] = (x[0] * 7.0).sin() * x[5];
        };
        let b = Budget::new(1 << 14, 8);
        let [e0, e1] = estimate(6, b, 11, f);
        assert!((e0.mean - 2.0).abs() < 4.0 * e0.std_error + 1e-12);
        let exact1 = (1.0 - 7f64.cos()) / 7.0 * 0.5;
        assert!((e1.mean - exact1).abs() < 4.0 * e1.std_error + 1e-12);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let again = pool.install(|| estimate(6, b, 11, f));
        assert_eq!(again[0].mean.to_bits(), e0.mean.to_bits());
        assert_eq!(again[1].std_error.to_bits(), e1.std_error.to_bits());
    }

    #[test]
    fn budget_rounding() {
        assert_eq!(Budget::DEFAULT.per_replicate(), 1 << 16);
        assert_eq!(Budget::new(1000, 4).per_replicate(), 128);
        assert!(!Budget::new(10, 1).is_valid());
    }
}
