//! Streaming moments and deterministic parallel reduction over paths.
//!
//! Paths are split into fixed-size chunks. Each chunk is accumulated
//! sequentially, and chunk results are merged by a fixed pairwise tree, so
//! the result does not depend on how many threads ran the chunks.

use rayon::prelude::*;

use crate::error::Result;

/// Paths per reduction chunk.
pub const CHUNK: usize = 512;

/// One-pass mean/variance accumulator (Welford), mergeable (Chan et al.).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb, nn) = (self.n as f64, other.n as f64, n as f64);
        Moments {
            n,
            mean: self.mean + delta * nb / nn,
            m2: self.m2 + other.m2 + delta * delta * na * nb / nn,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub se: f64,
}

impl From<Moments> for Estimate {
    fn from(m: Moments) -> Self {
        Estimate {
            estimate: m.mean(),
            se: m.std_error(),
        }
    }
}

fn tree_merge(mut level: Vec<Vec<Moments>>) -> Vec<Moments> {
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    level.pop().unwrap_or_default()
}

/// Evaluates `sample(path, out)` for every path in `0..n_paths`; `out` has
/// `width` slots, each accumulated into its own [`Moments`].
pub fn accumulate<F>(n_paths: usize, width: usize, sample: F) -> Result<Vec<Moments>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let n_chunks = n_paths.div_ceil(CHUNK);
    let partials = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); width];
            let mut buf = vec![0.0; width];
            let end = ((c + 1) * CHUNK).min(n_paths);
            for path in c * CHUNK..end {
                sample(path as u64, &mut buf)?;
                for (a, x) in acc.iter_mut().zip(&buf) {
                    a.push(*x);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = tree_merge(partials);
    Ok(if merged.is_empty() {
        vec![Moments::default(); width]
    } else {
        merged
    })
}

/// Evaluates `score(path)` for every path and returns the largest score with
/// its payload; ties go to the lowest path index.
pub fn max_over_paths<T, F>(n_paths: usize, score: F) -> Result<Option<(u64, f64, T)>>
where
    T: Send,
    F: Fn(u64) -> Result<(f64, T)> + Sync,
{
    let all = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| score(p).map(|(s, t)| (p, s, t)))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(u64, f64, T)> = None;
    for (p, s, t) in all {
        let better = match &best {
            None => true,
            Some((_, b, _)) => s > *b || (s.is_nan() && !b.is_nan()),
        };
        if better {
            best = Some((p, s, t));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let mut m = Moments::default();
        xs.iter().for_each(|x| m.push(*x));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((m.mean() - mean).abs() < 1e-12);
        assert!((m.variance() - var).abs() < 1e-10);
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..777).map(|i| (i as f64).sin()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|x| all.push(*x));
        let (a, b) = xs.split_at(300);
        let (mut ma, mut mb) = (Moments::default(), Moments::default());
        a.iter().for_each(|x| ma.push(*x));
        b.iter().for_each(|x| mb.push(*x));
        let merged = ma.merge(&mb);
        assert_eq!(merged.count(), 777);
        assert!((merged.mean() - all.mean()).abs() < 1e-14);
        assert!((merged.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn accumulate_is_thread_count_independent() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    accumulate(5000, 2, |p, out| {
                        out[0] = ((p * 7919) % 1013) as f64 / 1013.0;
                        out[1] = out[0] * out[0];
                        Ok(())
                    })
                    .unwrap()
                })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn empty_accumulation() {
        let m = accumulate(0, 3, |_, _| Ok(())).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].count(), 0);
    }

    #[test]
    fn max_prefers_lowest_index_on_ties() {
        let best = max_over_paths(10, |p| Ok((if p % 3 == 0 { 1.0 } else { 0.0 }, p))).unwrap();
        assert_eq!(best.map(|b| b.0), Some(0));
    }
}
