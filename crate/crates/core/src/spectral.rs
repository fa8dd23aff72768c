//! Perron eigenpairs of nonnegative matrices, the product distribution,
//! kappa-parametrized chain lengths and rank correlation.

use serde::Serialize;

use crate::error::{GvcError, Result};
use crate::linalg::{identity_minus, sup_diff, sup_norm, LuFactor, Matrix};
use crate::networks::{InputNetwork, OutputNetwork};

pub const DEFAULT_TOL_EIG: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Dominant eigenvalue with left/right Perron vectors.
///
/// `rho_l` sums to one and `rho_r` is scaled so that `rho_l · rho_r = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub lambda: f64,
    pub rho_l: Vec<f64>,
    pub rho_r: Vec<f64>,
    pub iterations: usize,
    /// `max(‖M r - λ r‖∞ / ‖r‖∞, ‖lᵀM - λ lᵀ‖∞ / ‖l‖∞)` at exit.
    pub residual: f64,
}

struct PowerResult {
    lambda: f64,
    vector: Vec<f64>,
    iterations: usize,
    residual: f64,
}

fn apply(m: &Matrix, v: &[f64], left: bool) -> Vec<f64> {
    if left {
        m.vec_mul(v)
    } else {
        m.mul_vec(v)
    }
}

// Iterates (M + σI) with σ midway between the smallest and largest line sum.
// Those sums bracket the Perron root, and the shift makes periodic matrices
// (eigenvalues ±λ) converge.
fn power(m: &Matrix, left: bool, tol: f64, max_iter: usize) -> Result<PowerResult> {
    let n = m.rows();
    let sums = if left { m.col_sums() } else { m.row_sums() };
    let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sums.iter().copied().fold(0.0, f64::max);
    if hi == 0.0 {
        return Err(GvcError::Reducible { index: 0 });
    }
    let shift = 0.5 * (lo.max(0.0) + hi);
    let mut v = vec![1.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = apply(m, &v, left);
        let lambda = y.iter().sum::<f64>() / v.iter().sum::<f64>();
        let scale = sup_norm(&v);
        residual = y
            .iter()
            .zip(&v)
            .fold(0.0f64, |r, (yi, vi)| r.max((yi - lambda * vi).abs()))
            / scale;
        if residual <= tol {
            return Ok(PowerResult {
                lambda,
                vector: v,
                iterations: it,
                residual,
            });
        }
        let mut next: Vec<f64> = y.iter().zip(&v).map(|(yi, vi)| yi + shift * vi).collect();
        let s = sup_norm(&next);
        next.iter_mut().for_each(|e| *e /= s);
        v = next;
    }
    Err(GvcError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// First node not reachable from node 0 along positive entries, in either
/// direction; `None` when the pattern is strongly connected.
pub fn unreachable_node(m: &Matrix) -> Option<usize> {
    let n = m.rows();
    for transpose in [false, true] {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for k in 0..n {
                let v = if transpose { m[(k, i)] } else { m[(i, k)] };
                if v > 0.0 && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        if let Some(index) = seen.iter().position(|s| !s) {
            return Some(index);
        }
    }
    None
}

/// Power iteration for the dominant eigenpair of a nonnegative irreducible
/// matrix; `mᵀ` is iterated separately for the left vector.
pub fn dominant_eigenpair(m: &Matrix, tol_eig: f64, max_iter: usize) -> Result<SpectralSummary> {
    if !m.is_square() || m.rows() == 0 {
        return Err(GvcError::Dimension(format!(
            "eigenpair of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if let Some(index) = unreachable_node(m) {
        return Err(GvcError::Reducible { index });
    }
    let right = power(m, false, tol_eig, max_iter)?;
    let left = power(m, true, tol_eig, max_iter)?;
    for v in [&right.vector, &left.vector] {
        if let Some(index) = v.iter().position(|&e| !(e > 0.0)) {
            return Err(GvcError::Reducible { index });
        }
    }
    let lsum: f64 = left.vector.iter().sum();
    let rho_l: Vec<f64> = left.vector.iter().map(|v| v / lsum).collect();
    let inner: f64 = rho_l.iter().zip(&right.vector).map(|(a, b)| a * b).sum();
    let rho_r: Vec<f64> = right.vector.iter().map(|v| v / inner).collect();
    Ok(SpectralSummary {
        lambda: right.lambda,
        rho_l,
        rho_r,
        iterations: right.iterations + left.iterations,
        residual: right.residual.max(left.residual),
    })
}

/// Rigorous Collatz-Wielandt bracket `[lower, upper]` on the spectral radius
/// of a nonnegative matrix, tightened by shifted power iteration until it
/// decides whether the radius is below `threshold`.
pub fn spectral_radius_bracket(m: &Matrix, threshold: f64, max_iter: usize) -> (f64, f64) {
    let n = m.rows();
    let sums = m.row_sums();
    let hi = sums.iter().copied().fold(0.0, f64::max);
    let lo = sums.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    if hi <= threshold || n == 0 {
        return (lo.min(hi), hi);
    }
    let shift = 0.5 * (lo + hi);
    let mut v = vec![1.0; n];
    let (mut lower, mut upper) = (lo, hi);
    for _ in 0..max_iter {
        let y = m.mul_vec(&v);
        let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
        for (yi, vi) in y.iter().zip(&v) {
            let r = yi / vi;
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        lower = lower.max(rmin);
        upper = upper.min(rmax);
        if upper <= threshold || lower > threshold || upper - lower <= 1e-14 {
            break;
        }
        let mut next: Vec<f64> = y.iter().zip(&v).map(|(yi, vi)| yi + shift * vi).collect();
        let s = sup_norm(&next);
        next.iter_mut().for_each(|e| *e /= s);
        v = next;
    }
    (lower, upper)
}

/// Elementwise `rho_l * rho_r`.
pub fn product_distribution(summary: &SpectralSummary) -> Vec<f64> {
    summary
        .rho_l
        .iter()
        .zip(&summary.rho_r)
        .map(|(l, r)| l * r)
        .collect()
}

/// Outcome of comparing the product distributions of `A` and `B`.
#[derive(Debug, Clone, Serialize)]
pub struct Theorem2Check {
    pub lambda_a: f64,
    pub lambda_b: f64,
    /// `‖ρ_prod(A) - ρ_prod(B)‖∞`
    pub max_abs_difference: f64,
    /// `‖ρʳ(B) - c X⁻¹ρʳ(A)‖∞` after rescaling to `ρʳ(B)`.
    pub right_transform_residual: f64,
    /// `‖ρˡ(B) - c Xρˡ(A)‖∞` after rescaling to `ρˡ(B)`.
    pub left_transform_residual: f64,
}

fn rescaled_gap(target: &[f64], candidate: Vec<f64>) -> f64 {
    let c = target.iter().sum::<f64>() / candidate.iter().sum::<f64>();
    let scaled: Vec<f64> = candidate.iter().map(|v| v * c).collect();
    sup_diff(target, &scaled) / sup_norm(target)
}

/// Computes both product distributions independently and checks the
/// eigenvector transforms `ρʳ(B) ∝ X⁻¹ρʳ(A)` and `ρˡ(B) ∝ Xρˡ(A)`.
pub fn verify_theorem2(
    inp: &InputNetwork,
    outp: &OutputNetwork,
    x: &[f64],
    tol_eig: f64,
) -> Result<Theorem2Check> {
    let ea = dominant_eigenpair(&inp.a, tol_eig, DEFAULT_MAX_ITER)?;
    let eb = dominant_eigenpair(&outp.b, tol_eig, DEFAULT_MAX_ITER)?;
    Ok(compare_product_distributions(&ea, &eb, x))
}

pub fn compare_product_distributions(
    ea: &SpectralSummary,
    eb: &SpectralSummary,
    x: &[f64],
) -> Theorem2Check {
    let pa = product_distribution(ea);
    let pb = product_distribution(eb);
    let right = rescaled_gap(&eb.rho_r, ea.rho_r.iter().zip(x).map(|(r, xi)| r / xi).collect());
    let left = rescaled_gap(&eb.rho_l, ea.rho_l.iter().zip(x).map(|(l, xi)| l * xi).collect());
    Theorem2Check {
        lambda_a: ea.lambda,
        lambda_b: eb.lambda,
        max_abs_difference: sup_diff(&pa, &pb),
        right_transform_residual: right,
        left_transform_residual: left,
    }
}

/// `(I - κQ)⁻¹ 1` for a transient matrix `q` with Perron root `lambda`.
pub fn parametrized_rank_vector(q: &Matrix, kappa: f64, lambda: f64) -> Result<Vec<f64>> {
    if !(kappa > 0.0) {
        return Err(GvcError::Parameter(format!("kappa must be positive, got {kappa}")));
    }
    if kappa * lambda >= 1.0 {
        return Err(GvcError::Divergence {
            kappa,
            limit: 1.0 / lambda,
        });
    }
    let lu = LuFactor::new(&identity_minus(q, kappa))?;
    lu.solve_vec(&vec![1.0; q.rows()])
}

/// `u(κ) = (I - κB)⁻¹ 1`.
pub fn upstreamness_kappa(outp: &OutputNetwork, kappa: f64, lambda: f64) -> Result<Vec<f64>> {
    parametrized_rank_vector(&outp.b, kappa, lambda)
}

/// `d(κ) = (I - κAᵀ)⁻¹ 1`.
pub fn downstreamness_kappa(inp: &InputNetwork, kappa: f64, lambda: f64) -> Result<Vec<f64>> {
    parametrized_rank_vector(&inp.transient(), kappa, lambda)
}

/// Small- and large-λ approximations of the expected chain length.
#[derive(Debug, Clone, Serialize)]
pub struct LimitApproximations {
    /// `1 + Q1`
    pub low_lambda: Vec<f64>,
    /// Perron-scaled eigenvector term.
    pub high_lambda: Vec<f64>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 1.0 {
        return Err(GvcError::NotAbsorbing { radius: lambda });
    }
    Ok(())
}

/// For upstreamness: `1 + B1` and `(Σρˡ(B)) / (1 - λ) · ρʳ(B)`.
pub fn output_limit_approximations(
    outp: &OutputNetwork,
    eig_b: &SpectralSummary,
) -> Result<LimitApproximations> {
    check_lambda(eig_b.lambda)?;
    let low_lambda = outp.b.row_sums().iter().map(|s| 1.0 + s).collect();
    let c = eig_b.rho_l.iter().sum::<f64>() / (1.0 - eig_b.lambda);
    Ok(LimitApproximations {
        low_lambda,
        high_lambda: eig_b.rho_r.iter().map(|r| c * r).collect(),
    })
}

/// For downstreamness: `1 + Aᵀ1` and `(Σρʳ(A)) / (1 - λ) · ρˡ(A)`.
pub fn input_limit_approximations(
    inp: &InputNetwork,
    eig_a: &SpectralSummary,
) -> Result<LimitApproximations> {
    check_lambda(eig_a.lambda)?;
    let low_lambda = inp.a.col_sums().iter().map(|s| 1.0 + s).collect();
    let c = eig_a.rho_r.iter().sum::<f64>() / (1.0 - eig_a.lambda);
    Ok(LimitApproximations {
        low_lambda,
        high_lambda: eig_a.rho_l.iter().map(|l| c * l).collect(),
    })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(GvcError::Dimension(format!(
            "spearman needs two equal-length vectors of length >= 2 (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(GvcError::UndefinedCorrelation);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}
