//! Economy snapshots, the country-industry node mapping and the accounting
//! identities (gross output = intermediate sales + final use, value added =
//! gross output - intermediate purchases).

use serde::Serialize;

use crate::error::{GvcError, Result};
use crate::linalg::Matrix;

/// Relative accounting tolerance for synthetic (derived) economies.
pub const TAU_ACCT_SYNTHETIC: f64 = 1e-6;
/// Relative accounting tolerance for tables read from files.
pub const TAU_ACCT_INGESTED: f64 = 1e-4;
/// Nodes with gross output at or below this are dropped at ingestion.
pub const EPS_ACTIVE: f64 = 1e-9;

/// Ordered country and sector codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Labels {
    countries: Vec<String>,
    sectors: Vec<String>,
}

impl Labels {
    pub fn new(countries: Vec<String>, sectors: Vec<String>) -> Result<Self> {
        if countries.is_empty() || sectors.is_empty() {
            return Err(GvcError::Labels(
                "need at least one country and one sector".into(),
            ));
        }
        for (kind, list) in [("country", &countries), ("sector", &sectors)] {
            let mut seen = std::collections::HashSet::new();
            for code in list.iter() {
                if !seen.insert(code.as_str()) {
                    return Err(GvcError::Labels(format!("duplicate {kind} code {code:?}")));
                }
            }
        }
        Ok(Self { countries, sectors })
    }

    /// Labels `C1..CJ` and `S1..SS`.
    pub fn numbered(j: usize, s: usize) -> Result<Self> {
        Self::new(
            (1..=j).map(|i| format!("C{i}")).collect(),
            (1..=s).map(|i| format!("S{i}")).collect(),
        )
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn sectors(&self) -> &[String] {
        &self.sectors
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_sectors(&self) -> usize {
        self.sectors.len()
    }

    /// Size of the full node grid, `J * S`.
    pub fn n_nodes(&self) -> usize {
        self.countries.len() * self.sectors.len()
    }

    pub fn country_position(&self, code: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == code)
    }

    pub fn sector_position(&self, code: &str) -> Option<usize> {
        self.sectors.iter().position(|c| c == code)
    }

    /// 1-based `(country, sector)` ordinals to the 1-based flat node number
    /// `(country - 1) * S + sector`.
    pub fn flat_index(&self, country: usize, sector: usize) -> Result<usize> {
        let (j, s) = (self.n_countries(), self.n_sectors());
        if country == 0 || country > j || sector == 0 || sector > s {
            return Err(GvcError::OutOfRange(format!(
                "(country {country}, sector {sector}) outside {j}x{s}"
            )));
        }
        Ok((country - 1) * s + sector)
    }

    /// Inverse of [`Labels::flat_index`].
    pub fn unflatten(&self, flat: usize) -> Result<(usize, usize)> {
        let s = self.n_sectors();
        if flat == 0 || flat > self.n_nodes() {
            return Err(GvcError::OutOfRange(format!(
                "flat index {flat} outside 1..={}",
                self.n_nodes()
            )));
        }
        Ok(((flat - 1) / s + 1, (flat - 1) % s + 1))
    }

    /// `COUNTRY_SECTOR` label of a flat node.
    pub fn node_label(&self, flat: usize) -> String {
        match self.unflatten(flat) {
            Ok((c, s)) => format!("{}_{}", self.countries[c - 1], self.sectors[s - 1]),
            Err(_) => format!("node{flat}"),
        }
    }
}

/// A country-industry pair by 1-based ordinals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeIndex {
    pub country: usize,
    pub sector: usize,
    pub flat: usize,
}

/// One year of a world input-output table.
///
/// Rows of `z` and `f` are the active nodes, listed in `nodes` by their
/// 1-based flat number. Normally that is every node of the `J x S` grid;
/// ingestion may drop nodes with no output.
#[derive(Debug, Clone)]
pub struct Economy {
    labels: Labels,
    nodes: Vec<NodeIndex>,
    z: Matrix,
    f: Matrix,
    x: Vec<f64>,
    w: Vec<f64>,
    year: i32,
    units: String,
}

fn gross_output(z: &Matrix, f: &Matrix) -> Vec<f64> {
    z.row_sums()
        .into_iter()
        .zip(f.row_sums())
        .map(|(a, b)| a + b)
        .collect()
}

fn value_added(z: &Matrix, x: &[f64]) -> Vec<f64> {
    x.iter().zip(z.col_sums()).map(|(xi, c)| xi - c).collect()
}

impl Economy {
    /// Builds an economy over the full node grid, deriving `x` and `w`.
    pub fn from_components(labels: Labels, z: Matrix, f: Matrix) -> Result<Self> {
        let nodes = full_grid(&labels);
        Self::from_nodes(labels, nodes, z, f)
    }

    /// Like [`Economy::from_components`] over an explicit subset of nodes.
    pub fn from_nodes(labels: Labels, nodes: Vec<NodeIndex>, z: Matrix, f: Matrix) -> Result<Self> {
        check_shapes(&labels, &nodes, &z, &f)?;
        let x = gross_output(&z, &f);
        if let Some((node, &value)) = x.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(GvcError::NegativeOutput { node, value });
        }
        let w = value_added(&z, &x);
        Ok(Self {
            labels,
            nodes,
            z,
            f,
            x,
            w,
            year: 0,
            units: String::from("unspecified"),
        })
    }

    /// Economy whose `x` and `w` were read from an external table rather
    /// than derived. Only shapes are checked; run [`validate`] on it.
    pub fn from_parts(
        labels: Labels,
        z: Matrix,
        f: Matrix,
        x: Vec<f64>,
        w: Vec<f64>,
    ) -> Result<Self> {
        let nodes = full_grid(&labels);
        check_shapes(&labels, &nodes, &z, &f)?;
        if x.len() != nodes.len() || w.len() != nodes.len() {
            return Err(GvcError::Dimension(format!(
                "x has {} and w has {} entries, expected {}",
                x.len(),
                w.len(),
                nodes.len()
            )));
        }
        Ok(Self {
            labels,
            nodes,
            z,
            f,
            x,
            w,
            year: 0,
            units: String::from("unspecified"),
        })
    }

    pub fn with_year(mut self, year: i32) -> Self {
        self.year = year;
        self
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into();
        self
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn nodes(&self) -> &[NodeIndex] {
        &self.nodes
    }

    /// Number of active nodes.
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    /// Final use by destination country, `n x J`.
    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    /// Total final use per node (summed over destination countries).
    pub fn final_demand(&self) -> Vec<f64> {
        self.f.row_sums()
    }

    /// 0-based country position of each active node.
    pub fn node_countries(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.country - 1).collect()
    }

    pub fn node_labels(&self) -> Vec<String> {
        self.nodes
            .iter()
            .map(|n| self.labels.node_label(n.flat))
            .collect()
    }

    /// Row of a 1-based `(country, sector)` pair among the active nodes.
    pub fn row_of(&self, country: usize, sector: usize) -> Option<usize> {
        let flat = self.labels.flat_index(country, sector).ok()?;
        self.nodes.binary_search_by_key(&flat, |n| n.flat).ok()
    }

    /// Same economy with every monetary flow multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(GvcError::Parameter(format!("scale factor {factor}")));
        }
        Ok(Self::from_nodes(
            self.labels.clone(),
            self.nodes.clone(),
            self.z.scale(factor),
            self.f.scale(factor),
        )?
        .with_year(self.year)
        .with_units(self.units.clone()))
    }

    /// Derived economy keeping only the listed rows (0-based, ascending).
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let nodes = keep.iter().map(|&i| self.nodes[i]).collect();
        let all_j: Vec<usize> = (0..self.f.cols()).collect();
        Ok(Self::from_nodes(
            self.labels.clone(),
            nodes,
            self.z.select(keep, keep),
            self.f.select(keep, &all_j),
        )?
        .with_year(self.year)
        .with_units(self.units.clone()))
    }
}

fn full_grid(labels: &Labels) -> Vec<NodeIndex> {
    let s = labels.n_sectors();
    (0..labels.n_nodes())
        .map(|k| NodeIndex {
            country: k / s + 1,
            sector: k % s + 1,
            flat: k + 1,
        })
        .collect()
}

fn check_shapes(labels: &Labels, nodes: &[NodeIndex], z: &Matrix, f: &Matrix) -> Result<()> {
    let n = nodes.len();
    if z.rows() != n || z.cols() != n {
        return Err(GvcError::Dimension(format!(
            "Z is {}x{}, expected {n}x{n}",
            z.rows(),
            z.cols()
        )));
    }
    if f.rows() != n || f.cols() != labels.n_countries() {
        return Err(GvcError::Dimension(format!(
            "F is {}x{}, expected {n}x{}",
            f.rows(),
            f.cols(),
            labels.n_countries()
        )));
    }
    Ok(())
}

/// Accounting residuals of one node.
#[derive(Debug, Clone, Serialize)]
pub struct NodeResidual {
    pub flat: usize,
    pub label: String,
    pub output_abs: f64,
    pub output_rel: f64,
    pub value_added_abs: f64,
    pub value_added_rel: f64,
}

/// Outcome of checking the accounting identities, plus ingestion diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub passes: bool,
    pub max_output_rel: f64,
    pub max_value_added_rel: f64,
    /// Flat numbers of nodes whose relative residual exceeds the tolerance.
    pub flagged: Vec<usize>,
    pub residuals: Vec<NodeResidual>,
    pub clamped_cells: usize,
    pub clamped_mass: f64,
    pub removed_nodes: Vec<usize>,
    pub removed_mass: f64,
}

/// Checks gross output against intermediate sales plus final use, and value
/// added against gross output minus intermediate purchases, node by node.
/// Residuals are relative to gross output.
pub fn validate(economy: &Economy, tolerance: f64) -> ValidationReport {
    let x_derived = gross_output(&economy.z, &economy.f);
    let w_derived = value_added(&economy.z, &economy.x);
    let mut residuals = Vec::with_capacity(economy.n());
    let mut flagged = Vec::new();
    let (mut max_x, mut max_w) = (0.0f64, 0.0f64);
    for (k, node) in economy.nodes.iter().enumerate() {
        let output_abs = (economy.x[k] - x_derived[k]).abs();
        let value_added_abs = (economy.w[k] - w_derived[k]).abs();
        let output_rel = relative(output_abs, x_derived[k]);
        let value_added_rel = relative(value_added_abs, economy.x[k]);
        max_x = max_x.max(output_rel);
        max_w = max_w.max(value_added_rel);
        if output_rel > tolerance || value_added_rel > tolerance {
            flagged.push(node.flat);
        }
        residuals.push(NodeResidual {
            flat: node.flat,
            label: economy.labels.node_label(node.flat),
            output_abs,
            output_rel,
            value_added_abs,
            value_added_rel,
        });
    }
    ValidationReport {
        tolerance,
        passes: flagged.is_empty(),
        max_output_rel: max_x,
        max_value_added_rel: max_w,
        flagged,
        residuals,
        clamped_cells: 0,
        clamped_mass: 0.0,
        removed_nodes: Vec::new(),
        removed_mass: 0.0,
    }
}

fn relative(abs: f64, scale: f64) -> f64 {
    if abs == 0.0 {
        0.0
    } else {
        abs / scale.abs().max(f64::MIN_POSITIVE)
    }
}

/// What [`sanitize`] changed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SanitizeLog {
    pub clamped_cells: usize,
    pub clamped_mass: f64,
    pub removed_nodes: Vec<usize>,
    pub removed_mass: f64,
}

impl SanitizeLog {
    pub fn apply_to(&self, report: &mut ValidationReport) {
        report.clamped_cells = self.clamped_cells;
        report.clamped_mass = self.clamped_mass;
        report.removed_nodes = self.removed_nodes.clone();
        report.removed_mass = self.removed_mass;
    }
}

/// Clamps negative flows to zero and drops nodes whose gross output is at
/// most `eps_active`, then derives `x` and `w` on what remains.
pub fn sanitize(labels: Labels, mut z: Matrix, mut f: Matrix, eps_active: f64) -> Result<(Economy, SanitizeLog)> {
    let mut log = SanitizeLog::default();
    for m in [&mut z, &mut f] {
        for i in 0..m.rows() {
            for v in m.row_mut(i) {
                if *v < 0.0 {
                    log.clamped_cells += 1;
                    log.clamped_mass += -*v;
                    *v = 0.0;
                }
            }
        }
    }
    let mut economy = Economy::from_components(labels, z, f)?;
    loop {
        let keep: Vec<usize> = (0..economy.n()).filter(|&k| economy.x[k] > eps_active).collect();
        if keep.len() == economy.n() {
            break;
        }
        for k in 0..economy.n() {
            if economy.x[k] <= eps_active {
                log.removed_nodes.push(economy.nodes[k].flat);
                // flows touching the dropped node
                let row: f64 = economy.z.row(k).iter().sum::<f64>() + economy.f.row(k).iter().sum::<f64>();
                let col: f64 = (0..economy.n()).filter(|&i| i != k).map(|i| economy.z[(i, k)]).sum();
                log.removed_mass += row + col;
            }
        }
        if keep.is_empty() {
            return Err(GvcError::EmptyInput);
        }
        economy = economy.restrict(&keep)?;
    }
    log.removed_nodes.sort_unstable();
    Ok((economy, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1(p: f64, q: f64) -> Economy {
        let z = Matrix::from_rows(&[[0.0, p, 0.0], [q, 0.0, p], [0.0, q, 0.0]]).unwrap();
        let f = Matrix::from_rows(&[
            [1.0 - p, 0.0, 0.0],
            [0.0, 1.0 - p - q, 0.0],
            [0.0, 0.0, 1.0 - q],
        ])
        .unwrap();
        Economy::from_components(Labels::numbered(3, 1).unwrap(), z, f).unwrap()
    }

    #[test]
    fn fig1_outputs_and_value_added() {
        let e = fig1(0.3, 0.3);
        for xi in e.x() {
            assert!((xi - 1.0).abs() < 1e-15);
        }
        assert!((e.w()[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn no_intermediates_means_output_is_value_added() {
        let labels = Labels::numbered(2, 2).unwrap();
        let f = Matrix::from_fn(4, 2, |_, j| if j == 0 { 0.25 } else { 0.75 });
        let e = Economy::from_components(labels, Matrix::zeros(4, 4), f).unwrap();
        assert_eq!(e.x(), &[1.0; 4]);
        assert_eq!(e.w(), &[1.0; 4]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let labels = Labels::numbered(3, 1).unwrap();
        let err = Economy::from_components(labels, Matrix::zeros(3, 3), Matrix::zeros(4, 3));
        assert!(matches!(err, Err(GvcError::Dimension(_))));
    }

    #[test]
    fn negative_output_is_rejected() {
        let labels = Labels::numbered(1, 2).unwrap();
        let f = Matrix::from_rows(&[[-2.0], [1.0]]).unwrap();
        let z = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            Economy::from_components(labels, z, f),
            Err(GvcError::NegativeOutput { node: 0, .. })
        ));
    }

    #[test]
    fn flat_index_examples() {
        let l = Labels::numbered(44, 56).unwrap();
        assert_eq!(l.flat_index(1, 1).unwrap(), 1);
        assert_eq!(l.flat_index(2, 1).unwrap(), 57);
        assert!(l.flat_index(0, 1).is_err());
        assert!(l.flat_index(45, 1).is_err());
        assert!(l.unflatten(44 * 56 + 1).is_err());
    }

    #[test]
    fn flat_index_is_a_bijection() {
        let l = Labels::numbered(3, 4).unwrap();
        let mut seen = vec![false; 12];
        for c in 1..=3 {
            for s in 1..=4 {
                let k = l.flat_index(c, s).unwrap();
                assert!(!seen[k - 1]);
                seen[k - 1] = true;
                assert_eq!(l.unflatten(k).unwrap(), (c, s));
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn duplicate_codes_rejected() {
        assert!(Labels::new(vec!["A".into(), "A".into()], vec!["x".into()]).is_err());
        assert!(Labels::new(vec![], vec!["x".into()]).is_err());
    }

    #[test]
    fn derived_economy_validates_exactly() {
        let e = fig1(0.2, 0.4);
        let r = validate(&e, 0.0);
        assert!(r.passes);
        assert_eq!(r.max_output_rel, 0.0);
        assert_eq!(r.max_value_added_rel, 0.0);
    }

    #[test]
    fn perturbed_output_is_flagged() {
        let e = fig1(0.3, 0.3);
        let mut x = e.x().to_vec();
        x[0] *= 1.01;
        let bad = Economy::from_parts(e.labels().clone(), e.z().clone(), e.f().clone(), x, e.w().to_vec()).unwrap();
        let r = validate(&bad, 1e-4);
        assert!(!r.passes);
        assert_eq!(r.flagged, vec![1]);
        assert!((r.residuals[0].output_rel - 0.01).abs() < 1e-12);
    }

    #[test]
    fn sanitize_clamps_and_drops() {
        let labels = Labels::numbered(1, 3).unwrap();
        let z = Matrix::from_rows(&[[0.0, 1.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        let f = Matrix::from_rows(&[[2.0], [-0.25], [0.0]]).unwrap();
        let (e, log) = sanitize(labels, z, f, EPS_ACTIVE).unwrap();
        assert_eq!(log.clamped_cells, 1);
        assert_eq!(log.clamped_mass, 0.25);
        assert_eq!(log.removed_nodes, vec![3]);
        assert_eq!(e.n(), 2);
        assert_eq!(e.x(), &[3.0, 0.5]);
        assert!(validate(&e, 0.0).passes);
        assert_eq!(e.row_of(1, 2), Some(1));
        assert_eq!(e.row_of(1, 3), None);
    }
}
