//! Monte Carlo oracle for the absorbing chains.
//!
//! Every path owns a generator seeded from `(seed, path index)`, so a run is
//! reproducible no matter how paths are spread over threads.

use rand::{RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;

use super::AbsorbingChain;
use crate::error::{GvcError, Result};
use crate::spectral::{dominant_eigenpair, DEFAULT_MAX_ITER, DEFAULT_TOL_EIG};

/// Hard cap on the number of steps of a single path.
pub const DEFAULT_PATH_CAP: u64 = 10_000_000;

const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub seed: u64,
}

impl SimulationEstimate {
    /// `|mean - reference|` measured in standard errors.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = (self.mean - reference).abs();
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `|mean - reference| ≤ k·stderr + floor`
    pub fn agrees(&self, reference: f64, k: f64, floor: f64) -> bool {
        (self.mean - reference).abs() <= k * self.stderr + floor
    }
}

fn path_seed(seed: u64, path: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ path.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cumulative transition rows over `[Q | absorb]`.
struct Sampler {
    n: usize,
    width: usize,
    cum: Vec<f64>,
}

impl Sampler {
    fn new(chain: &AbsorbingChain) -> Self {
        let n = chain.n();
        let width = n + chain.k();
        let mut cum = Vec::with_capacity(n * width);
        for i in 0..n {
            let mut acc = 0.0;
            for &v in chain.q().row(i).iter().chain(chain.absorb().row(i)) {
                acc += v;
                cum.push(acc);
            }
        }
        Self { n, width, cum }
    }

    /// Next column of `[Q | absorb]` drawn from row `i`.
    fn step(&self, i: usize, u: f64) -> usize {
        let row = &self.cum[i * self.width..(i + 1) * self.width];
        let u = u * row[self.width - 1];
        // the first cell whose cumulative sum exceeds u has positive mass
        row.partition_point(|&c| c <= u).min(self.width - 1)
    }
}

/// Per-path outcomes of one simulation from a fixed start state.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    n: usize,
    start: usize,
    seed: u64,
    /// `n_paths x n` visit counts, row-major.
    visits: Vec<u32>,
    /// Steps spent in transient states (the start counts as one).
    times: Vec<u64>,
    /// Absorbing column reached.
    destinations: Vec<u32>,
    n_absorbing: usize,
}

/// Runs `n_paths` independent paths from transient state `start`.
pub fn simulate(chain: &AbsorbingChain, start: usize, seed: u64, n_paths: u64) -> Result<SimulationRun> {
    simulate_with_cap(chain, start, seed, n_paths, DEFAULT_PATH_CAP)
}

pub fn simulate_with_cap(
    chain: &AbsorbingChain,
    start: usize,
    seed: u64,
    n_paths: u64,
    cap: u64,
) -> Result<SimulationRun> {
    let n = chain.n();
    if start >= n {
        return Err(GvcError::OutOfRange(format!("start state {start} outside 0..{n}")));
    }
    if n_paths == 0 {
        return Err(GvcError::Parameter("n_paths must be at least 1".into()));
    }
    let sampler = Sampler::new(chain);
    let total = n_paths as usize;
    let mut visits = vec![0u32; total * n];
    let mut times = vec![0u64; total];
    let mut destinations = vec![0u32; total];

    visits
        .par_chunks_mut(BLOCK * n)
        .zip(times.par_chunks_mut(BLOCK))
        .zip(destinations.par_chunks_mut(BLOCK))
        .enumerate()
        .try_for_each(|(block, ((vis, tim), dst))| -> Result<()> {
            for (offset, (time, dest)) in tim.iter_mut().zip(dst.iter_mut()).enumerate() {
                let path = (block * BLOCK + offset) as u64;
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(path_seed(seed, path));
                let row = &mut vis[offset * n..(offset + 1) * n];
                let mut state = start;
                let mut steps = 0u64;
                loop {
                    row[state] = row[state].saturating_add(1);
                    steps += 1;
                    let next = sampler.step(state, rng.random::<f64>());
                    if next >= sampler.n {
                        *time = steps;
                        *dest = (next - sampler.n) as u32;
                        break;
                    }
                    if steps >= cap {
                        return Err(GvcError::PathCap { path, cap });
                    }
                    state = next;
                }
            }
            Ok(())
        })?;

    Ok(SimulationRun {
        n,
        start,
        seed,
        visits,
        times,
        destinations,
        n_absorbing: chain.k(),
    })
}

fn mean_estimate(values: impl Iterator<Item = f64>, n_paths: u64, seed: u64) -> SimulationEstimate {
    let mut sum = 0.0;
    let mut sq = 0.0;
    for v in values {
        sum += v;
        sq += v * v;
    }
    let n = n_paths as f64;
    let mean = sum / n;
    let var = if n_paths > 1 {
        ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    SimulationEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n_paths,
        seed,
    }
}

/// Sample variance with the large-sample standard error
/// `sqrt((m4 - s⁴) / N)`.
fn variance_estimate(values: &[f64], seed: u64) -> SimulationEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    let s2 = if values.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
    let m4 = m4 / n;
    let m2n = m2 / n;
    SimulationEstimate {
        mean: s2,
        stderr: ((m4 - m2n * m2n).max(0.0) / n).sqrt(),
        n_paths: values.len() as u64,
        seed,
    }
}

impl SimulationRun {
    pub fn n_paths(&self) -> u64 {
        self.times.len() as u64
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn visits(&self, path: usize) -> &[u32] {
        &self.visits[path * self.n..(path + 1) * self.n]
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn destinations(&self) -> &[u32] {
        &self.destinations
    }

    fn visit_column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.visits.iter().skip(j).step_by(self.n).map(|&v| f64::from(v))
    }

    /// Estimate of `E[X_start,j]`, compared against `L[start, j]`.
    pub fn mean_visits(&self, j: usize) -> SimulationEstimate {
        mean_estimate(self.visit_column(j), self.n_paths(), self.seed)
    }

    /// Estimate of `Var[X_start,j]`, compared against `L2[start, j]`.
    pub fn visit_variance(&self, j: usize) -> SimulationEstimate {
        let v: Vec<f64> = self.visit_column(j).collect();
        variance_estimate(&v, self.seed)
    }

    /// Estimate of the expected time to absorption, compared against `g`.
    pub fn time_mean(&self) -> SimulationEstimate {
        mean_estimate(self.times.iter().map(|&t| t as f64), self.n_paths(), self.seed)
    }

    /// Estimate of the variance of time to absorption, compared against `h`.
    pub fn time_variance(&self) -> SimulationEstimate {
        let v: Vec<f64> = self.times.iter().map(|&t| t as f64).collect();
        variance_estimate(&v, self.seed)
    }

    /// Frequency of absorption into column `k`, compared against `M[start, k]`.
    pub fn absorption_frequency(&self, k: usize) -> SimulationEstimate {
        debug_assert!(k < self.n_absorbing);
        let hits = self.destinations.iter().map(|&d| f64::from(u8::from(d as usize == k)));
        mean_estimate(hits, self.n_paths(), self.seed)
    }
}

/// Importance-sampled estimates of the two time-fraction functionals from a
/// fixed start state at horizon `t`.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionedEstimates {
    pub t: usize,
    pub start: usize,
    /// `E[X_start,j / X_start | X_start = t]` per state `j`.
    pub absorbed_at_t: Vec<SimulationEstimate>,
    /// `E[(visits to j in 0..=t) / t | X_start > t]` per state `j`.
    pub surviving_t: Vec<SimulationEstimate>,
    /// Kish effective sample sizes of the two weight sets.
    pub effective_paths: [f64; 2],
}

/// Estimates the time-fraction functionals by simulating the chain
/// conditioned to survive, with transitions
/// `Q̃_ij = Q_ij ρʳ_j / (λ ρʳ_i)`. Path weights then only depend on the last
/// state, which keeps the estimator usable at horizons where the event has
/// probability far below machine precision.
pub fn simulate_conditioned(
    chain: &AbsorbingChain,
    start: usize,
    t: usize,
    seed: u64,
    n_paths: u64,
) -> Result<ConditionedEstimates> {
    let n = chain.n();
    if start >= n {
        return Err(GvcError::OutOfRange(format!("start state {start} outside 0..{n}")));
    }
    if t == 0 || n_paths < 2 {
        return Err(GvcError::Parameter("conditioned simulation needs t >= 1 and at least 2 paths".into()));
    }
    let eig = dominant_eigenpair(chain.q(), DEFAULT_TOL_EIG, DEFAULT_MAX_ITER)?;
    let rho = &eig.rho_r;
    let mut cum = vec![0.0; n * n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += chain.q()[(i, j)] * rho[j];
            cum[i * n + j] = acc;
        }
    }
    let alpha = chain.absorption_probability();

    struct Acc {
        w1: f64,
        w1sq: f64,
        w2: f64,
        w2sq: f64,
        // Σ w f and Σ w² f, Σ w² f² per state for both functionals
        f1: Vec<[f64; 3]>,
        f2: Vec<[f64; 3]>,
    }
    let zero = || Acc {
        w1: 0.0,
        w1sq: 0.0,
        w2: 0.0,
        w2sq: 0.0,
        f1: vec![[0.0; 3]; n],
        f2: vec![[0.0; 3]; n],
    };

    let blocks = (n_paths as usize).div_ceil(BLOCK);
    let partials: Vec<Acc> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut acc = zero();
            let mut counts = vec![0u32; n];
            let lo = block * BLOCK;
            let hi = ((block + 1) * BLOCK).min(n_paths as usize);
            for path in lo..hi {
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(path_seed(seed, path as u64));
                counts.iter_mut().for_each(|c| *c = 0);
                let mut state = start;
                for step in 0..=t {
                    counts[state] += 1;
                    if step + 1 == t {
                        // weights for X = t use visits in 0..t
                        let w = alpha[state] / rho[state];
                        acc.w1 += w;
                        acc.w1sq += w * w;
                        for (j, c) in counts.iter().enumerate() {
                            let f = f64::from(*c) / t as f64;
                            let cell = &mut acc.f1[j];
                            cell[0] += w * f;
                            cell[1] += w * w * f;
                            cell[2] += w * w * f * f;
                        }
                    }
                    if step == t {
                        break;
                    }
                    let row = &cum[state * n..(state + 1) * n];
                    let u = rng.random::<f64>() * row[n - 1];
                    state = row.partition_point(|&c| c <= u).min(n - 1);
                }
                let w = 1.0 / rho[state];
                acc.w2 += w;
                acc.w2sq += w * w;
                for (j, c) in counts.iter().enumerate() {
                    let f = f64::from(*c) / t as f64;
                    let cell = &mut acc.f2[j];
                    cell[0] += w * f;
                    cell[1] += w * w * f;
                    cell[2] += w * w * f * f;
                }
            }
            acc
        })
        .collect();

    let mut total = zero();
    for p in partials {
        total.w1 += p.w1;
        total.w1sq += p.w1sq;
        total.w2 += p.w2;
        total.w2sq += p.w2sq;
        for j in 0..n {
            for k in 0..3 {
                total.f1[j][k] += p.f1[j][k];
                total.f2[j][k] += p.f2[j][k];
            }
        }
    }

    // self-normalized ratio with delta-method error
    // se² = Σ w² (f - μ)² / (Σ w)²
    let make = |sw: f64, swsq: f64, cells: &[[f64; 3]]| -> Vec<SimulationEstimate> {
        cells
            .iter()
            .map(|c| {
                let mu = c[0] / sw;
                let s = c[2] - 2.0 * mu * c[1] + mu * mu * swsq;
                SimulationEstimate {
                    mean: mu,
                    stderr: s.max(0.0).sqrt() / sw,
                    n_paths,
                    seed,
                }
            })
            .collect()
    };

    Ok(ConditionedEstimates {
        t,
        start,
        absorbed_at_t: make(total.w1, total.w1sq, &total.f1),
        surviving_t: make(total.w2, total.w2sq, &total.f2),
        effective_paths: [
            total.w1 * total.w1 / total.w1sq,
            total.w2 * total.w2 / total.w2sq,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::markov::{fundamental, time_fractions};

    fn fig1_chain() -> AbsorbingChain {
        let b = Matrix::from_rows(&[[0.0, 0.3, 0.0], [0.3, 0.0, 0.3], [0.0, 0.3, 0.0]]).unwrap();
        AbsorbingChain::new(b, Matrix::column(&[0.7, 0.4, 0.7])).unwrap()
    }

    #[test]
    fn zero_q_absorbs_at_once() {
        let chain = AbsorbingChain::new(Matrix::zeros(2, 2), Matrix::column(&[1.0, 1.0])).unwrap();
        let run = simulate(&chain, 1, 3, 1000).unwrap();
        assert!(run.times().iter().all(|&t| t == 1));
        assert_eq!(run.mean_visits(1).mean, 1.0);
        assert_eq!(run.mean_visits(0).mean, 0.0);
        assert_eq!(run.time_variance().mean, 0.0);
    }

    #[test]
    fn fig1_time_to_absorption() {
        let chain = fig1_chain();
        let stats = fundamental(&chain).unwrap();
        let run = simulate(&chain, 1, 42, 200_000).unwrap();
        let est = run.time_mean();
        assert!(est.agrees(stats.g[1], 3.0, 0.0), "{est:?} vs {}", stats.g[1]);
        let var = run.time_variance();
        assert!(var.agrees(stats.h[1], 3.0, 0.0), "{var:?} vs {}", stats.h[1]);
        for j in 0..3 {
            assert!(run.mean_visits(j).agrees(stats.l[(1, j)], 3.0, 0.0));
        }
    }

    #[test]
    fn same_seed_same_paths_any_thread_count() {
        let chain = fig1_chain();
        let a = simulate(&chain, 0, 9, 10_000).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate(&chain, 0, 9, 10_000)).unwrap();
        assert_eq!(a.times(), b.times());
        assert_eq!(a.visits(777), b.visits(777));
        let c = simulate(&chain, 0, 10, 10_000).unwrap();
        assert_ne!(a.times(), c.times());
    }

    #[test]
    fn path_cap_is_an_error() {
        let q = Matrix::from_rows(&[[0.999_999]]).unwrap();
        let chain = AbsorbingChain::new(q, Matrix::column(&[0.000_001])).unwrap();
        let err = simulate_with_cap(&chain, 0, 1, 100, 50).unwrap_err();
        assert!(matches!(err, GvcError::PathCap { cap: 50, .. }));
    }

    #[test]
    fn fig1_conditioned_fractions() {
        let chain = fig1_chain();
        let t = 200;
        let exact = time_fractions(&chain, &[0.0, 1.0, 0.0], t).unwrap();
        let est = simulate_conditioned(&chain, 1, t, 5, 20_000).unwrap();
        for j in 0..3 {
            assert!(est.absorbed_at_t[j].agrees(exact.absorbed_at_t[j], 3.0, 1e-12));
            assert!(est.surviving_t[j].agrees(exact.surviving_t[j], 3.0, 1e-12));
        }
        assert!((est.absorbed_at_t[1].mean - 0.5).abs() < 0.01);
    }
}
