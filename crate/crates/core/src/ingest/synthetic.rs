//! Generated economies: the three-country chain example and seeded random
//! tables with an optional dominant-eigenvalue target.

use rand::{RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::error::{GvcError, Result};
use crate::linalg::Matrix;
use crate::model::{Economy, Labels};
use crate::spectral::{dominant_eigenpair, DEFAULT_MAX_ITER};

/// Three single-sector countries on a line, unit gross outputs:
/// node 1 sells `p` to node 2, node 2 sells `q` to node 1 and `p` to node
/// 3, node 3 sells `q` to node 2. Everything else is consumed at home.
pub fn chain_example(p: f64, q: f64) -> Result<Economy> {
    if !(p > 0.0 && q > 0.0 && p + q < 1.0) {
        return Err(GvcError::Parameter(format!(
            "chain example needs p > 0, q > 0 and p + q < 1 (got p = {p}, q = {q})"
        )));
    }
    let z = Matrix::from_rows(&[[0.0, p, 0.0], [q, 0.0, p], [0.0, q, 0.0]])?;
    let f = Matrix::from_rows(&[
        [1.0 - p, 0.0, 0.0],
        [0.0, 1.0 - p - q, 0.0],
        [0.0, 0.0, 1.0 - q],
    ])?;
    Economy::from_components(Labels::numbered(3, 1)?, z, f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticSpec {
    pub countries: usize,
    pub sectors: usize,
    /// Fraction of `Z` cells drawn nonzero, in `(0, 1]`.
    pub density: f64,
    /// Desired dominant eigenvalue of the output network.
    pub spectral_target: Option<f64>,
    pub seed: u64,
    /// Multiplier on cross-border cells of `Z`; small values give nearly
    /// autarkic economies.
    pub coupling: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            countries: 3,
            sectors: 4,
            density: 1.0,
            spectral_target: None,
            seed: 0,
            coupling: 1.0,
        }
    }
}

impl SyntheticSpec {
    /// Parses `key=value` items such as `J=3 S=4 density=0.5 lambda=0.95
    /// seed=7 coupling=0.1` over the defaults.
    pub fn from_pairs<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        let mut spec = Self::default();
        for item in items {
            let item = item.as_ref();
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| GvcError::Parameter(format!("expected key=value, got '{item}'")))?;
            let bad = || GvcError::Parameter(format!("bad value in '{item}'"));
            match key.trim() {
                "J" | "countries" => spec.countries = value.parse().map_err(|_| bad())?,
                "S" | "sectors" => spec.sectors = value.parse().map_err(|_| bad())?,
                "density" => spec.density = value.parse().map_err(|_| bad())?,
                "lambda" | "spectral_target" => spec.spectral_target = Some(value.parse().map_err(|_| bad())?),
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                "coupling" => spec.coupling = value.parse().map_err(|_| bad())?,
                other => return Err(GvcError::Parameter(format!("unknown synthetic key '{other}'"))),
            }
        }
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.countries == 0 || self.sectors == 0 {
            return Err(GvcError::Parameter("J and S must be at least 1".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(GvcError::Parameter(format!("density {} outside (0, 1]", self.density)));
        }
        if let Some(t) = self.spectral_target {
            if !(t > 0.0 && t < 1.0) {
                return Err(GvcError::Parameter(format!("spectral target {t} outside (0, 1)")));
            }
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(GvcError::Parameter(format!("coupling {} must be positive", self.coupling)));
        }
        Ok(())
    }
}

const TARGET_TOL: f64 = 1e-3;
const MAX_BISECTIONS: usize = 60;

/// Seeded random economy.
///
/// `Z` cells are uniform on `(0, 1]` with probability `density`, plus a
/// cycle through all nodes so the network is irreducible at any density.
/// The draw is then balanced so that each node's intermediate sales equal
/// its intermediate purchases, which keeps value added nonnegative at every
/// scale. Final use is uniform on `[0.1, 1)` in every cell. Without a target, `Z`
/// is scaled so its mean row sum equals that of `F`; with one, the scale is
/// bisected (on a log scale, `F` fixed) until the output network's dominant
/// eigenvalue is within `1e-3` of it, or within a tenth of the distance to
/// 0 or 1 when that is smaller.
pub fn random_economy(spec: &SyntheticSpec) -> Result<Economy> {
    spec.check()?;
    let (j, s) = (spec.countries, spec.sectors);
    let n = j * s;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let cross = |a: usize, b: usize| if a / s != b / s { spec.coupling } else { 1.0 };
    let mut z = Matrix::from_fn(n, n, |a, b| {
        let keep = rng.random::<f64>() < spec.density;
        let v = 1.0 - rng.random::<f64>();
        if keep {
            v * cross(a, b)
        } else {
            0.0
        }
    });
    for a in 0..n {
        let b = (a + 1) % n;
        let v = 0.5 + 0.5 * rng.random::<f64>();
        z[(a, b)] = z[(a, b)].max(v * cross(a, b));
    }
    balance(&mut z)?;
    let f = Matrix::from_fn(n, j, |_, _| 0.1 + 0.9 * rng.random::<f64>());

    let zrow = z.row_sums();
    let frow = f.row_sums();
    let base = (frow.iter().sum::<f64>() / zrow.iter().sum::<f64>()).ln();
    let log_scale = match spec.spectral_target {
        None => base,
        Some(target) => bisect_scale(&z, &zrow, &frow, base, target)?,
    };
    Economy::from_components(Labels::numbered(j, s)?, z.scale(log_scale.exp()), f)
}

const BALANCE_TOL: f64 = 1e-13;
const MAX_BALANCE_SWEEPS: usize = 100_000;

/// Osborne iteration: a diagonal similarity `D Z D⁻¹` after which every node
/// buys as much intermediate input as it sells. The pattern and spectrum of
/// `Z` are unchanged, and value added `x - 1ᵀZ` then equals final use at any
/// global scale of `Z`.
fn balance(z: &mut Matrix) -> Result<()> {
    let n = z.rows();
    for _ in 0..MAX_BALANCE_SWEEPS {
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut row = 0.0;
            let mut col = 0.0;
            for k in 0..n {
                if k != i {
                    row += z[(i, k)];
                    col += z[(k, i)];
                }
            }
            if row == 0.0 || col == 0.0 {
                continue;
            }
            worst = worst.max((row - col).abs() / (row + col));
            let f = (col / row).sqrt();
            for k in 0..n {
                if k != i {
                    z[(i, k)] *= f;
                    z[(k, i)] /= f;
                }
            }
        }
        if worst <= BALANCE_TOL {
            return Ok(());
        }
    }
    Err(GvcError::NoConvergence {
        iterations: MAX_BALANCE_SWEEPS,
        residual: f64::NAN,
    })
}

fn output_lambda(z: &Matrix, zrow: &[f64], frow: &[f64], log_scale: f64) -> Result<f64> {
    let c = log_scale.exp();
    let n = z.rows();
    let b = Matrix::from_fn(n, n, |a, k| c * z[(a, k)] / (c * zrow[a] + frow[a]));
    Ok(dominant_eigenpair(&b, 1e-10, DEFAULT_MAX_ITER)?.lambda)
}

fn bisect_scale(z: &Matrix, zrow: &[f64], frow: &[f64], base: f64, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (base - 40.0, base + 40.0);
    let (l_lo, l_hi) = (
        output_lambda(z, zrow, frow, lo)?,
        output_lambda(z, zrow, frow, hi)?,
    );
    if !(l_lo <= target && target <= l_hi) {
        return Err(GvcError::InfeasibleTarget { target });
    }
    // near 0 or 1 a fixed tolerance would admit nearly decoupled or nearly
    // non-absorbing economies
    let tol = TARGET_TOL.min(0.1 * target).min(0.1 * (1.0 - target));
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let lambda = output_lambda(z, zrow, frow, mid)?;
        if (lambda - target).abs() <= tol {
            return Ok(mid);
        }
        if lambda < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(GvcError::InfeasibleTarget { target })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use crate::networks::build_output_network;

    #[test]
    fn chain_example_networks() {
        let e = chain_example(0.3, 0.3).unwrap();
        let out = build_output_network(&e).unwrap();
        let sums = out.b.row_sums();
        for (a, b) in sums.iter().zip([0.3, 0.6, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in out.gamma.iter().zip([0.7, 0.4, 0.7]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(validate(&e, 0.0).passes);
    }

    #[test]
    fn chain_example_bounds() {
        assert!(chain_example(0.5, 0.5).is_err());
        assert!(chain_example(0.0, 0.3).is_err());
        assert!(chain_example(0.45, 0.45).is_ok());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let spec = SyntheticSpec {
            countries: 3,
            sectors: 4,
            density: 0.5,
            seed: 7,
            ..SyntheticSpec::default()
        };
        let a = random_economy(&spec).unwrap();
        let b = random_economy(&spec).unwrap();
        assert_eq!(a.z(), b.z());
        assert_eq!(a.f(), b.f());
        let c = random_economy(&SyntheticSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.z(), c.z());
        assert!(validate(&a, 1e-12).passes);
    }

    #[test]
    fn hits_spectral_targets() {
        for (target, density) in [(0.95, 0.5), (0.999, 1.0), (0.05, 0.3)] {
            let spec = SyntheticSpec {
                countries: 3,
                sectors: 3,
                density,
                spectral_target: Some(target),
                seed: 3,
                ..SyntheticSpec::default()
            };
            let e = random_economy(&spec).unwrap();
            let b = build_output_network(&e).unwrap().b;
            let lambda = dominant_eigenpair(&b, 1e-12, DEFAULT_MAX_ITER).unwrap().lambda;
            assert!((lambda - target).abs() <= 1e-3, "{lambda} vs {target}");
        }
    }

    #[test]
    fn value_added_is_final_use_at_any_scale() {
        for (target, coupling) in [(None, 1.0), (Some(0.999), 1.0), (Some(0.9), 0.02)] {
            let e = random_economy(&SyntheticSpec {
                countries: 4,
                sectors: 3,
                density: 0.4,
                spectral_target: target,
                seed: 11,
                coupling,
            })
            .unwrap();
            let fd = e.final_demand();
            for ((w, f), x) in e.w().iter().zip(&fd).zip(e.x()) {
                assert!(*w > 0.0);
                assert!((w - f).abs() <= 1e-12 * x, "{w} vs {f}");
            }
        }
    }

    #[test]
    fn spec_from_pairs() {
        let spec = SyntheticSpec::from_pairs(&["J=2", "S=5", "seed=9", "lambda=0.5"]).unwrap();
        assert_eq!((spec.countries, spec.sectors, spec.seed), (2, 5, 9));
        assert_eq!(spec.spectral_target, Some(0.5));
        assert!(SyntheticSpec::from_pairs(&["density=0"]).is_err());
        assert!(SyntheticSpec::from_pairs(&["colour=red"]).is_err());
    }
}
