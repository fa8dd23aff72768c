//! World-input (column-normalized) and world-output (row-normalized) networks.

use std::io::{self, Read, Write};

use serde::Serialize;

use crate::error::{GvcError, Result};
use crate::linalg::Matrix;
use crate::model::Economy;

/// Negative absorption shares above this magnitude are reported as errors;
/// smaller ones are rounding noise and are set to zero.
const NEG_SHARE_TOL: f64 = 1e-12;

/// `a_ij = z_ij / x_j` with value-added shares `delta_j = w_j / x_j`.
#[derive(Debug, Clone)]
pub struct InputNetwork {
    pub a: Matrix,
    pub delta: Vec<f64>,
}

/// `b_ij = z_ij / x_i` with final-use shares `gamma_i = f_i / x_i` and the
/// per-destination split `eta_ij = f_ij / x_i`.
#[derive(Debug, Clone)]
pub struct OutputNetwork {
    pub b: Matrix,
    pub gamma: Vec<f64>,
    pub d_eta: Matrix,
}

fn share(num: f64, den: f64, node: usize) -> Result<f64> {
    let v = num / den;
    if v < -NEG_SHARE_TOL {
        return Err(GvcError::NegativeAbsorption { node, value: v });
    }
    Ok(v.max(0.0))
}

pub fn build_input_network(economy: &Economy) -> Result<InputNetwork> {
    let x = economy.x();
    let z = economy.z();
    let n = economy.n();
    let a = Matrix::from_fn(n, n, |i, j| z[(i, j)] / x[j]);
    let delta = (0..n)
        .map(|j| share(economy.w()[j], x[j], j))
        .collect::<Result<Vec<_>>>()?;
    Ok(InputNetwork { a, delta })
}

pub fn build_output_network(economy: &Economy) -> Result<OutputNetwork> {
    let x = economy.x();
    let z = economy.z();
    let n = economy.n();
    let b = Matrix::from_fn(n, n, |i, j| z[(i, j)] / x[i]);
    let f = economy.f();
    let d_eta = Matrix::from_fn(n, f.cols(), |i, c| f[(i, c)] / x[i]);
    let gamma = economy
        .final_demand()
        .iter()
        .enumerate()
        .map(|(i, &fi)| share(fi, x[i], i))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutputNetwork { b, gamma, d_eta })
}

impl InputNetwork {
    pub fn n(&self) -> usize {
        self.delta.len()
    }

    /// Transient matrix of the input chain, `Aᵀ`.
    pub fn transient(&self) -> Matrix {
        self.a.transpose()
    }

    /// Largest `|sum_i a_ij + delta_j - 1|` over columns.
    pub fn exhaustion_residual(&self) -> f64 {
        self.a
            .col_sums()
            .iter()
            .zip(&self.delta)
            .fold(0.0, |m, (c, d)| m.max((c + d - 1.0).abs()))
    }
}

impl OutputNetwork {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// Transient matrix of the output chain, `B`.
    pub fn transient(&self) -> &Matrix {
        &self.b
    }

    /// Largest `|sum_j b_ij + gamma_i - 1|` over rows.
    pub fn exhaustion_residual(&self) -> f64 {
        self.b
            .row_sums()
            .iter()
            .zip(&self.gamma)
            .fold(0.0, |m, (r, g)| m.max((r + g - 1.0).abs()))
    }
}

/// `max |B - X⁻¹ A X|` entrywise.
pub fn verify_similarity(inp: &InputNetwork, outp: &OutputNetwork, x: &[f64]) -> f64 {
    let n = x.len();
    assert!(inp.n() == n && outp.n() == n, "networks and x disagree on size");
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let similar = inp.a[(i, j)] * x[j] / x[i];
            worst = worst.max((outp.b[(i, j)] - similar).abs());
        }
    }
    worst
}

/// Mean entry of the domestic (diagonal) and cross-border (off-diagonal)
/// country blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockStats {
    pub diag_mean: f64,
    pub offdiag_mean: f64,
    pub diag_cells: usize,
    pub offdiag_cells: usize,
}

impl BlockStats {
    /// Cell-weighted recombination, equal to the mean over the whole matrix.
    pub fn overall_mean(&self) -> f64 {
        let cells = (self.diag_cells + self.offdiag_cells) as f64;
        (self.diag_mean * self.diag_cells as f64 + self.offdiag_mean * self.offdiag_cells as f64) / cells
    }
}

/// Block means of an `n x n` matrix on the full `J x S` grid.
pub fn block_means(m: &Matrix, j: usize, s: usize) -> Result<BlockStats> {
    if j == 0 || s == 0 || !m.is_square() || m.rows() != j * s {
        return Err(GvcError::Dimension(format!(
            "{}x{} matrix is not {j}*{s} square",
            m.rows(),
            m.cols()
        )));
    }
    let countries: Vec<usize> = (0..j * s).map(|k| k / s).collect();
    block_means_by_country(m, &countries)
}

/// Block means when rows are labelled by (0-based) country, e.g. after some
/// nodes were dropped.
pub fn block_means_by_country(m: &Matrix, countries: &[usize]) -> Result<BlockStats> {
    if !m.is_square() || m.rows() != countries.len() {
        return Err(GvcError::Dimension(format!(
            "{}x{} matrix with {} country tags",
            m.rows(),
            m.cols(),
            countries.len()
        )));
    }
    let (mut ds, mut os) = (0.0, 0.0);
    let (mut dc, mut oc) = (0usize, 0usize);
    for (i, row) in m.iter_rows().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            if countries[i] == countries[k] {
                ds += v;
                dc += 1;
            } else {
                os += v;
                oc += 1;
            }
        }
    }
    let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    Ok(BlockStats {
        diag_mean: mean(ds, dc),
        offdiag_mean: mean(os, oc),
        diag_cells: dc,
        offdiag_cells: oc,
    })
}

const DUMP_MAGIC: &[u8; 4] = b"GVCM";

/// Binary dump: `GVCM`, u32 rows, u32 cols, u32 reserved (0), then
/// row-major little-endian f64.
pub fn write_matrix_binary<W: Write>(m: &Matrix, mut out: W) -> io::Result<()> {
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&(m.rows() as u32).to_le_bytes())?;
    out.write_all(&(m.cols() as u32).to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    for v in m.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_matrix_binary<R: Read>(mut input: R) -> Result<Matrix> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..4] != DUMP_MAGIC {
        return Err(GvcError::Parse {
            line: 0,
            message: "bad magic, expected GVCM".into(),
        });
    }
    let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 8];
    for _ in 0..rows * cols {
        input.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Matrix::from_vec(rows, cols, data)
}

/// Dense CSV dump, optional header row of column names and leading row labels.
pub fn write_matrix_csv<W: Write>(
    m: &Matrix,
    row_labels: Option<&[String]>,
    col_labels: Option<&[String]>,
    mut out: W,
) -> io::Result<()> {
    if let Some(cols) = col_labels {
        if row_labels.is_some() {
            write!(out, "node,")?;
        }
        writeln!(out, "{}", cols.join(","))?;
    }
    for (i, row) in m.iter_rows().enumerate() {
        if let Some(rl) = row_labels {
            write!(out, "{},", rl[i])?;
        }
        let cells: Vec<String> = row.iter().map(|v| crate::report::fmt_sig(*v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Labels;

    fn fig1() -> Economy {
        let (p, q) = (0.3, 0.3);
        let z = Matrix::from_rows(&[[0.0, p, 0.0], [q, 0.0, p], [0.0, q, 0.0]]).unwrap();
        let f = Matrix::from_rows(&[[1.0 - p, 0.0, 0.0], [0.0, 1.0 - p - q, 0.0], [0.0, 0.0, 1.0 - q]]).unwrap();
        Economy::from_components(Labels::numbered(3, 1).unwrap(), z, f).unwrap()
    }

    #[test]
    fn fig1_networks() {
        let e = fig1();
        let out = build_output_network(&e).unwrap();
        let expect = Matrix::from_rows(&[[0.0, 0.3, 0.0], [0.3, 0.0, 0.3], [0.0, 0.3, 0.0]]).unwrap();
        assert!(out.b.max_abs_diff(&expect) < 1e-15);
        for (g, e) in out.gamma.iter().zip([0.7, 0.4, 0.7]) {
            assert!((g - e).abs() < 1e-15);
        }
        let inp = build_input_network(&e).unwrap();
        // unit outputs: A coincides with B
        assert!(inp.a.max_abs_diff(&out.b) < 1e-15);
        assert!(inp.exhaustion_residual() < 1e-10);
        assert!(out.exhaustion_residual() < 1e-10);
        assert_eq!(verify_similarity(&inp, &out, e.x()), 0.0);
    }

    #[test]
    fn pure_value_added_economy() {
        let labels = Labels::numbered(2, 1).unwrap();
        let f = Matrix::from_rows(&[[1.0, 2.0], [3.0, 0.0]]).unwrap();
        let e = Economy::from_components(labels, Matrix::zeros(2, 2), f).unwrap();
        let inp = build_input_network(&e).unwrap();
        assert_eq!(inp.a, Matrix::zeros(2, 2));
        assert_eq!(inp.delta, vec![1.0, 1.0]);
    }

    #[test]
    fn single_country_split_equals_gamma() {
        let labels = Labels::numbered(1, 2).unwrap();
        let z = Matrix::from_rows(&[[1.0, 2.0], [0.5, 0.5]]).unwrap();
        let f = Matrix::from_rows(&[[3.0], [4.0]]).unwrap();
        let e = Economy::from_components(labels, z, f).unwrap();
        let out = build_output_network(&e).unwrap();
        assert_eq!(out.d_eta.col(0), out.gamma);
    }

    #[test]
    fn exhaustive_two_by_two_blocks() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let b = block_means(&m, 2, 1).unwrap();
        assert_eq!(b.diag_mean, 0.0);
        assert_eq!(b.offdiag_mean, 1.0);
        assert!(block_means(&m, 3, 1).is_err());
    }

    #[test]
    fn domestic_only_support() {
        let m = Matrix::from_fn(6, 6, |i, j| if i / 3 == j / 3 { 0.1 } else { 0.0 });
        let b = block_means(&m, 2, 3).unwrap();
        assert_eq!(b.offdiag_mean, 0.0);
        assert!((b.diag_mean - 0.1).abs() < 1e-15);
    }

    #[test]
    fn binary_dump_roundtrip() {
        let m = Matrix::from_rows(&[[1.5, -2.0, 3.25], [0.0, 1e-300, f64::MAX]]).unwrap();
        let mut buf = Vec::new();
        write_matrix_binary(&m, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 6 * 8);
        assert_eq!(&buf[..4], b"GVCM");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &3u32.to_le_bytes());
        assert_eq!(read_matrix_binary(&buf[..]).unwrap(), m);
        assert!(read_matrix_binary(&b"XXXX\0\0\0\0\0\0\0\0\0\0\0\0"[..]).is_err());
    }
}
