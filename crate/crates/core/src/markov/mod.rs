//! Absorbing-chain engine.
//!
//! A chain is a substochastic transient matrix `Q` (row convention) plus one
//! or more absorption columns. The input chain uses `Q = Aᵀ` with value-added
//! shares as its absorption column; the output chain uses `Q = B` with
//! final-use shares, optionally split by destination country.

mod simulate;

pub use simulate::{
    simulate, simulate_conditioned, simulate_with_cap, ConditionedEstimates, SimulationEstimate, SimulationRun,
    DEFAULT_PATH_CAP,
};

use serde::Serialize;

use crate::error::{GvcError, Result};
use crate::linalg::{identity_minus, LuFactor, Matrix};
use crate::networks::{InputNetwork, OutputNetwork};
use crate::spectral::spectral_radius_bracket;

/// Row-stochasticity tolerance of `[Q | absorb]`.
pub const STOCHASTIC_TOL: f64 = 1e-10;
const BRACKET_ITERATIONS: usize = 10_000;
/// Chains with spectral radius above `1 - ABSORBING_MARGIN` are rejected.
const ABSORBING_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AbsorbingChain {
    q: Matrix,
    absorb: Matrix,
}

impl AbsorbingChain {
    /// Checks shapes, nonnegativity and that each row of `[Q | absorb]` sums to one.
    pub fn new(q: Matrix, absorb: Matrix) -> Result<Self> {
        if !q.is_square() || absorb.rows() != q.rows() || absorb.cols() == 0 {
            return Err(GvcError::Dimension(format!(
                "Q is {}x{}, absorb is {}x{}",
                q.rows(),
                q.cols(),
                absorb.rows(),
                absorb.cols()
            )));
        }
        if q.min_value() < 0.0 || absorb.min_value() < 0.0 {
            return Err(GvcError::Parameter("negative transition probability".into()));
        }
        for (i, (qs, s)) in q.row_sums().iter().zip(absorb.row_sums()).enumerate() {
            if (qs + s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(GvcError::Parameter(format!(
                    "row {i} of the transition matrix sums to {}",
                    qs + s
                )));
            }
        }
        Ok(Self { q, absorb })
    }

    /// Output chain with a single absorbing state (final use).
    pub fn output(net: &OutputNetwork) -> Result<Self> {
        Self::new(net.b.clone(), Matrix::column(&net.gamma))
    }

    /// Output chain with one absorbing state per destination country.
    pub fn output_by_country(net: &OutputNetwork) -> Result<Self> {
        Self::new(net.b.clone(), net.d_eta.clone())
    }

    /// Input chain, `Q = Aᵀ`, absorbing into value added.
    pub fn input(net: &InputNetwork) -> Result<Self> {
        Self::new(net.transient(), Matrix::column(&net.delta))
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn absorb(&self) -> &Matrix {
        &self.absorb
    }

    pub fn n(&self) -> usize {
        self.q.rows()
    }

    /// Number of absorbing states.
    pub fn k(&self) -> usize {
        self.absorb.cols()
    }

    /// Total one-step absorption probability per transient state.
    pub fn absorption_probability(&self) -> Vec<f64> {
        self.absorb.row_sums()
    }

    /// Factors `I - Q` after confirming the spectral radius of `Q` stays
    /// below `1 - 1e-8`.
    ///
    /// Power iteration brackets the radius first. When the bracket stays
    /// undecided, `g = (I - Q)⁻¹ 1` is a positive test vector and
    /// `max_i (Qg)_i / g_i` bounds the radius from above.
    pub fn factor(&self) -> Result<ChainSolver> {
        let threshold = 1.0 - ABSORBING_MARGIN;
        let (lower, upper) = spectral_radius_bracket(&self.q, threshold, BRACKET_ITERATIONS);
        if lower > threshold {
            return Err(GvcError::NotAbsorbing { radius: lower });
        }
        let lu = LuFactor::new(&identity_minus(&self.q, 1.0))
            .map_err(|_| GvcError::NotAbsorbing { radius: upper })?;
        if upper > threshold {
            let g = lu.solve_vec(&vec![1.0; self.n()])?;
            let qg = self.q.mul_vec(&g);
            let bound = g
                .iter()
                .zip(&qg)
                .map(|(gi, qi)| if *gi > 0.0 { qi / gi } else { f64::INFINITY })
                .fold(0.0f64, f64::max);
            if !(bound <= threshold) {
                return Err(GvcError::NotAbsorbing { radius: upper.min(bound) });
            }
        }
        Ok(ChainSolver { lu })
    }
}

/// One LU factorization of `I - Q`, reused for every right-hand side.
pub struct ChainSolver {
    lu: LuFactor,
}

impl ChainSolver {
    /// `(I - Q)⁻¹ rhs`
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        self.lu.solve(rhs)
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve_vec(rhs)
    }

    pub fn fundamental(&self) -> Result<ChainStatistics> {
        let l = self.lu.inverse()?;
        Ok(ChainStatistics::from_fundamental(l))
    }
}

/// Moments of visit counts and time to absorption.
#[derive(Debug, Clone)]
pub struct ChainStatistics {
    /// Expected visits `E[X_ij]`.
    pub l: Matrix,
    /// Visit variances `Var[X_ij] = L(2L_dg - I) - L_sq`.
    pub l2: Matrix,
    /// Expected time to absorption, `L1`.
    pub g: Vec<f64>,
    /// Variance of time to absorption, `(2L - I)g - g_sq`.
    pub h: Vec<f64>,
}

impl ChainStatistics {
    pub fn from_fundamental(l: Matrix) -> Self {
        let n = l.rows();
        let diag = l.diagonal();
        let l2 = Matrix::from_fn(n, n, |i, j| {
            let v = l[(i, j)];
            v * (2.0 * diag[j] - 1.0) - v * v
        });
        let g = l.row_sums();
        let lg = l.mul_vec(&g);
        let h = (0..n).map(|i| 2.0 * lg[i] - g[i] - g[i] * g[i]).collect();
        Self { l, l2, g, h }
    }
}

/// Fundamental matrix and its derived moments.
pub fn fundamental(chain: &AbsorbingChain) -> Result<ChainStatistics> {
    chain.factor()?.fundamental()
}

/// `M = (I - Q)⁻¹ absorb`: probability that a path from each transient state
/// ends in each absorbing state.
pub fn absorption_matrix(chain: &AbsorbingChain) -> Result<Matrix> {
    chain.factor()?.solve(chain.absorb())
}

/// `n x J` matrix routing each node's value-added share to its own country.
pub fn value_added_split(delta: &[f64], node_countries: &[usize], n_countries: usize) -> Matrix {
    let mut d = Matrix::zeros(delta.len(), n_countries);
    for (i, (&v, &c)) in delta.iter().zip(node_countries).enumerate() {
        d[(i, c)] = v;
    }
    d
}

/// `ζ_iĵ = Σ_r L_{i,(ĵ,r)} δ_(ĵ,r)` with `L = (I - Aᵀ)⁻¹`: where the value
/// added embodied in node `i` originates, by country.
pub fn value_added_distribution(
    input_chain: &AbsorbingChain,
    delta: &[f64],
    node_countries: &[usize],
    n_countries: usize,
) -> Result<Matrix> {
    if delta.len() != input_chain.n() || node_countries.len() != input_chain.n() {
        return Err(GvcError::Dimension("delta / country tags vs chain size".into()));
    }
    let split = value_added_split(delta, node_countries, n_countries);
    input_chain.factor()?.solve(&split)
}

/// `J x J` slice of an `n x J` distribution for one sector; row `ĵ` is the
/// distribution of node `(ĵ, sector)`. Rows of dropped nodes are zero and
/// marked absent.
#[derive(Debug, Clone, Serialize)]
pub struct IndustryMatrix {
    pub sector: usize,
    pub present: Vec<bool>,
    #[serde(skip)]
    pub matrix: Matrix,
}

pub fn industry_matrix(
    dist: &Matrix,
    economy: &crate::model::Economy,
    sector: usize,
) -> Result<IndustryMatrix> {
    let labels = economy.labels();
    let j = labels.n_countries();
    if sector == 0 || sector > labels.n_sectors() {
        return Err(GvcError::OutOfRange(format!(
            "sector {sector} outside 1..={}",
            labels.n_sectors()
        )));
    }
    if dist.rows() != economy.n() || dist.cols() != j {
        return Err(GvcError::Dimension(format!(
            "distribution is {}x{}, expected {}x{j}",
            dist.rows(),
            dist.cols(),
            economy.n()
        )));
    }
    let mut matrix = Matrix::zeros(j, j);
    let mut present = vec![false; j];
    for c in 1..=j {
        if let Some(row) = economy.row_of(c, sector) {
            matrix.row_mut(c - 1).copy_from_slice(dist.row(row));
            present[c - 1] = true;
        }
    }
    Ok(IndustryMatrix {
        sector,
        present,
        matrix,
    })
}

fn check_start(chain: &AbsorbingChain, pi: &[f64]) -> Result<()> {
    if pi.len() != chain.n() {
        return Err(GvcError::Dimension(format!(
            "start distribution has {} entries, chain has {}",
            pi.len(),
            chain.n()
        )));
    }
    if pi.iter().any(|&p| p < 0.0) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(GvcError::Parameter("start distribution is not a probability vector".into()));
    }
    Ok(())
}

/// Pushes `v` through `steps` products with `Q` (or `Qᵀ`), renormalizing
/// each step. Returns the direction and the log of the accumulated mass.
fn propagate(q: &Matrix, start: Vec<f64>, steps: usize, left: bool) -> Result<(Vec<f64>, f64)> {
    let mut v = start;
    let mut log_mass = 0.0;
    for t in 0..steps {
        let next = if left { q.vec_mul(&v) } else { q.mul_vec(&v) };
        let s: f64 = next.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(GvcError::Extinction { last_positive_t: t });
        }
        log_mass += s.ln();
        v = next.into_iter().map(|e| e / s).collect();
    }
    Ok((v, log_mass))
}

/// `P[state j at t | not absorbed by t] = (πᵀQᵗ)_j / πᵀQᵗ1`.
pub fn conditional_state_distribution(chain: &AbsorbingChain, pi: &[f64], t: usize) -> Result<Vec<f64>> {
    check_start(chain, pi)?;
    let s: f64 = pi.iter().sum();
    let start = pi.iter().map(|p| p / s).collect();
    Ok(propagate(&chain.q, start, t, true)?.0)
}

/// `P[state j at τ | not absorbed by t] = (πᵀQ^τ)_j (Q^{t-τ}1)_j / πᵀQᵗ1`.
pub fn doubly_conditional_distribution(
    chain: &AbsorbingChain,
    pi: &[f64],
    tau: usize,
    t: usize,
) -> Result<Vec<f64>> {
    if tau > t {
        return Err(GvcError::Parameter(format!("tau {tau} exceeds t {t}")));
    }
    check_start(chain, pi)?;
    let s: f64 = pi.iter().sum();
    let n = chain.n();
    let (fwd, _) = propagate(&chain.q, pi.iter().map(|p| p / s).collect(), tau, true)?;
    let (bwd, _) = propagate(&chain.q, vec![1.0 / n as f64; n], t - tau, false)
        .map_err(|e| match e {
            GvcError::Extinction { last_positive_t } => GvcError::Extinction {
                last_positive_t: tau + last_positive_t,
            },
            other => other,
        })?;
    let joint: Vec<f64> = fwd.iter().zip(&bwd).map(|(a, b)| a * b).collect();
    let total: f64 = joint.iter().sum();
    if !(total > 0.0) {
        return Err(GvcError::Extinction { last_positive_t: tau });
    }
    Ok(joint.into_iter().map(|v| v / total).collect())
}

/// Exact values of the two time-fraction functionals at horizon `t`.
#[derive(Debug, Clone, Serialize)]
pub struct TimeFractions {
    pub t: usize,
    /// `Σ_i π_i E[X_ij / X_i | X_i = t]`
    pub absorbed_at_t: Vec<f64>,
    /// `Σ_i π_i E[(visits to j in 0..=t) / t | X_i > t]`
    pub surviving_t: Vec<f64>,
}

fn propagate_all(q: &Matrix, start: Vec<f64>, steps: usize, left: bool) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    for t in 0..steps {
        let v = out.last().unwrap();
        let next = if left { q.vec_mul(v) } else { q.mul_vec(v) };
        let s: f64 = next.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(GvcError::Extinction { last_positive_t: t });
        }
        out.push(next.into_iter().map(|e| e / s).collect());
    }
    Ok(out)
}

fn normalized_product(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let joint: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let total: f64 = joint.iter().sum();
    if !(total > 0.0) {
        return Err(GvcError::Extinction { last_positive_t: 0 });
    }
    Ok(joint.into_iter().map(|v| v / total).collect())
}

/// Computes both time-fraction functionals exactly by forward and backward
/// propagation, `O(t n²)`. Requires `t ≥ 1`.
pub fn time_fractions(chain: &AbsorbingChain, pi: &[f64], t: usize) -> Result<TimeFractions> {
    if t == 0 {
        return Err(GvcError::Parameter("time fractions need t >= 1".into()));
    }
    check_start(chain, pi)?;
    let n = chain.n();
    let s: f64 = pi.iter().sum();
    let fwd = propagate_all(&chain.q, pi.iter().map(|p| p / s).collect(), t, true)?;
    let alpha = chain.absorption_probability();
    let to_absorb = propagate_all(&chain.q, alpha, t - 1, false)?;
    let to_survive = propagate_all(&chain.q, vec![1.0; n], t, false)?;

    let mut absorbed_at_t = vec![0.0; n];
    for k in 0..t {
        let d = normalized_product(&fwd[k], &to_absorb[t - 1 - k])?;
        crate::linalg::axpy(1.0 / t as f64, &d, &mut absorbed_at_t);
    }
    let mut surviving_t = vec![0.0; n];
    for k in 0..=t {
        let d = normalized_product(&fwd[k], &to_survive[t - k])?;
        crate::linalg::axpy(1.0 / t as f64, &d, &mut surviving_t);
    }
    Ok(TimeFractions {
        t,
        absorbed_at_t,
        surviving_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_chain(p: f64, q: f64) -> AbsorbingChain {
        let b = Matrix::from_rows(&[[0.0, p, 0.0], [q, 0.0, p], [0.0, q, 0.0]]).unwrap();
        let d = Matrix::from_rows(&[[1.0 - p, 0.0, 0.0], [0.0, 1.0 - p - q, 0.0], [0.0, 0.0, 1.0 - q]]).unwrap();
        AbsorbingChain::new(b, d).unwrap()
    }

    #[test]
    fn fig1_fundamental_closed_form() {
        // adjugate of I - B at p = q = 0.3, det = 0.82
        let stats = fundamental(&fig1_chain(0.3, 0.3)).unwrap();
        let adj = Matrix::from_rows(&[[0.91, 0.3, 0.09], [0.3, 1.0, 0.3], [0.09, 0.3, 0.91]]).unwrap();
        assert!(stats.l.max_abs_diff(&adj.scale(1.0 / 0.82)) < 1e-14);
        for (g, e) in stats.g.iter().zip([1.3 / 0.82, 1.6 / 0.82, 1.3 / 0.82]) {
            assert!((g - e).abs() < 1e-14);
        }
        assert!((stats.g[0] - 1.5854).abs() < 5e-5);
        assert!((stats.g[1] - 1.9512).abs() < 5e-5);
    }

    #[test]
    fn immediate_absorption() {
        let chain = AbsorbingChain::new(Matrix::zeros(3, 3), Matrix::column(&[1.0; 3])).unwrap();
        let s = fundamental(&chain).unwrap();
        assert_eq!(s.l, Matrix::identity(3));
        assert_eq!(s.g, vec![1.0; 3]);
        assert_eq!(s.h, vec![0.0; 3]);
        assert_eq!(s.l2, Matrix::zeros(3, 3));
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let q = Matrix::from_rows(&[[0.5, 0.2], [0.1, 0.1]]).unwrap();
        assert!(AbsorbingChain::new(q, Matrix::column(&[0.3, 0.5])).is_err());
    }

    #[test]
    fn rejects_non_absorbing_chain() {
        let q = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let chain = AbsorbingChain::new(q, Matrix::column(&[0.0, 0.0])).unwrap();
        assert!(matches!(fundamental(&chain), Err(GvcError::NotAbsorbing { .. })));
    }

    #[test]
    fn fig1_absorption_rows_sum_to_one() {
        let m = absorption_matrix(&fig1_chain(0.3, 0.3)).unwrap();
        for s in m.row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_state_visit_variance_by_enumeration() {
        // Var of visits to j from i, by summing P[X_ij = k] over paths until
        // the remaining mass is below 1e-12.
        let q = Matrix::from_rows(&[[0.3, 0.4], [0.2, 0.5]]).unwrap();
        let chain = AbsorbingChain::new(q.clone(), Matrix::column(&[0.3, 0.3])).unwrap();
        let stats = fundamental(&chain).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                // distribution over (current state, visits so far)
                let cap = 400;
                let mut mass = vec![vec![0.0; cap]; 2];
                mass[i][usize::from(i == j)] = 1.0;
                let mut moments = [0.0f64; 2];
                let mut alive = 1.0;
                while alive > 1e-14 {
                    let mut next = vec![vec![0.0; cap]; 2];
                    for s in 0..2 {
                        for k in 0..cap - 1 {
                            let p = mass[s][k];
                            if p == 0.0 {
                                continue;
                            }
                            let absorbed = p * 0.3;
                            moments[0] += absorbed * k as f64;
                            moments[1] += absorbed * (k * k) as f64;
                            for s2 in 0..2 {
                                next[s2][k + usize::from(s2 == j)] += p * q[(s, s2)];
                            }
                        }
                    }
                    mass = next;
                    alive = mass.iter().flatten().sum();
                }
                let var = moments[1] - moments[0] * moments[0];
                assert!((moments[0] - stats.l[(i, j)]).abs() < 1e-10);
                assert!((var - stats.l2[(i, j)]).abs() < 1e-9, "{i}{j}: {var} vs {}", stats.l2[(i, j)]);
            }
        }
    }

    #[test]
    fn conditional_t0_is_start() {
        let chain = fig1_chain(0.3, 0.3);
        let pi = [0.2, 0.5, 0.3];
        assert_eq!(conditional_state_distribution(&chain, &pi, 0).unwrap(), pi.to_vec());
        let d = doubly_conditional_distribution(&chain, &pi, 7, 7).unwrap();
        let c = conditional_state_distribution(&chain, &pi, 7).unwrap();
        for (a, b) in d.iter().zip(&c) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn fig1_chain_is_periodic() {
        // B only links 1 <-> 2 <-> 3, so conditioned distributions alternate
        // with the parity of t instead of settling.
        let chain = fig1_chain(0.3, 0.3);
        let pi = [1.0 / 3.0; 3];
        let even = conditional_state_distribution(&chain, &pi, 200).unwrap();
        let odd = conditional_state_distribution(&chain, &pi, 201).unwrap();
        for v in &even {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        for (a, b) in odd.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = doubly_conditional_distribution(&chain, &pi, 100, 200).unwrap();
        for v in &d {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aperiodic_variant_reaches_quasi_stationary_limits() {
        // self-loops shift every eigenvalue by 0.1 and break the period
        let (p, q) = (0.3, 0.3);
        let b = Matrix::from_rows(&[[0.1, p, 0.0], [q, 0.1, p], [0.0, q, 0.1]]).unwrap();
        let absorb = Matrix::column(&b.row_sums().iter().map(|s| 1.0 - s).collect::<Vec<_>>());
        let chain = AbsorbingChain::new(b, absorb).unwrap();
        let pi = [1.0 / 3.0; 3];
        let lam = (2.0 * p * q as f64).sqrt();
        let z = p + q + lam;
        let c = conditional_state_distribution(&chain, &pi, 200).unwrap();
        for (a, b) in c.iter().zip([q / z, lam / z, p / z]) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let d = doubly_conditional_distribution(&chain, &pi, 100, 200).unwrap();
        for (a, b) in d.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn fig1_time_fractions_average_out_the_period() {
        let chain = fig1_chain(0.3, 0.3);
        let tf = time_fractions(&chain, &[0.0, 1.0, 0.0], 200).unwrap();
        for (a, b) in tf.absorbed_at_t.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-12);
        }
        // t + 1 visits over t steps: sums to (t + 1) / t
        let total: f64 = tf.surviving_t.iter().sum();
        assert!((total - 201.0 / 200.0).abs() < 1e-12);
        assert!((tf.surviving_t[1] - 0.505).abs() < 1e-12);
    }

    #[test]
    fn time_fractions_at_t1_are_the_start() {
        let chain = fig1_chain(0.2, 0.4);
        let pi = [0.2, 0.5, 0.3];
        let tf = time_fractions(&chain, &pi, 1).unwrap();
        // X_i = 1 means only the start state is visited
        let alpha = chain.absorption_probability();
        let z: f64 = pi.iter().zip(&alpha).map(|(p, a)| p * a).sum();
        for j in 0..3 {
            assert!((tf.absorbed_at_t[j] - pi[j] * alpha[j] / z).abs() < 1e-14);
        }
    }

    #[test]
    fn extinction_is_reported() {
        // nilpotent Q: every path is absorbed within two steps
        let q = Matrix::from_rows(&[[0.0, 0.5], [0.0, 0.0]]).unwrap();
        let chain = AbsorbingChain::new(q, Matrix::column(&[0.5, 1.0])).unwrap();
        let err = conditional_state_distribution(&chain, &[1.0, 0.0], 5).unwrap_err();
        assert!(matches!(err, GvcError::Extinction { last_positive_t: 1 }));
    }
}
