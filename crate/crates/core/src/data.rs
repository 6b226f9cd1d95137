//! Dataset ingestion, per-axis normalization, test-function generators and
//! small geometric helpers.
//!
//! Site matrices are `n × d` with one site per row. Values are plain vectors
//! of length `n`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use faer::{Mat, MatRef};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-axis scale factors applied by [`Dataset::normalize`].
///
/// Normalized quantities are the raw ones divided by the factor, so the
/// identity is all ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationInfo {
    pub axis_scales: Vec<f64>,
    pub value_scale: f64,
}

impl NormalizationInfo {
    pub fn identity(d: usize) -> Self {
        Self {
            axis_scales: vec![1.0; d],
            value_scale: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.value_scale == 1.0 && self.axis_scales.iter().all(|&s| s == 1.0)
    }

    /// Maps raw site coordinates into normalized space.
    pub fn normalize_sites(&self, sites: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_dim(self.axis_scales.len(), sites.ncols())?;
        Ok(Mat::from_fn(sites.nrows(), sites.ncols(), |i, k| {
            sites[(i, k)] / self.axis_scales[k]
        }))
    }

    pub fn denormalize_sites(&self, sites: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_dim(self.axis_scales.len(), sites.ncols())?;
        Ok(Mat::from_fn(sites.nrows(), sites.ncols(), |i, k| {
            sites[(i, k)] * self.axis_scales[k]
        }))
    }

    pub fn normalize_value(&self, v: f64) -> f64 {
        v / self.value_scale
    }

    pub fn denormalize_value(&self, v: f64) -> f64 {
        v * self.value_scale
    }
}

/// Sites `X` (n × d) with responses `f|_X`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sites: Mat<f64>,
    pub values: Vec<f64>,
    pub normalization: NormalizationInfo,
}

impl Dataset {
    /// Builds a dataset with identity normalization, validating shapes and
    /// finiteness.
    pub fn new(sites: Mat<f64>, values: Vec<f64>) -> Result<Self> {
        if sites.nrows() == 0 || values.is_empty() {
            return Err(Error::NoData);
        }
        if sites.ncols() == 0 {
            return Err(Error::InvalidParameter("sites need at least one coordinate".into()));
        }
        check_dim(sites.nrows(), values.len())?;
        if !all_finite(sites.as_ref()) {
            return Err(Error::NonFinite("sites"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("values"));
        }
        let d = sites.ncols();
        Ok(Self {
            sites,
            values,
            normalization: NormalizationInfo::identity(d),
        })
    }

    /// Convenience constructor from row slices.
    pub fn from_rows(rows: &[Vec<f64>], values: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new(Mat::from_fn(rows.len(), d, |i, k| rows[i][k]), values)
    }

    pub fn n(&self) -> usize {
        self.sites.nrows()
    }

    pub fn d(&self) -> usize {
        self.sites.ncols()
    }

    pub fn site(&self, i: usize) -> Vec<f64> {
        (0..self.d()).map(|k| self.sites[(i, k)]).collect()
    }

    /// Divides every axis (and the response) by its absolute maximum.
    ///
    /// Axes that are identically zero keep factor 1. Factors compose with any
    /// normalization already recorded, so `denormalize` always returns to the
    /// original raw units.
    pub fn normalize(&self) -> Dataset {
        let d = self.d();
        let mut axis = vec![0.0f64; d];
        for k in 0..d {
            for i in 0..self.n() {
                axis[k] = axis[k].max(self.sites[(i, k)].abs());
            }
        }
        let vmax = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let axis: Vec<f64> = axis.into_iter().map(unit_if_zero).collect();
        let vmax = unit_if_zero(vmax);
        let info = NormalizationInfo {
            axis_scales: axis,
            value_scale: vmax,
        };
        let mut out = self.apply(&info);
        out.normalization = NormalizationInfo {
            axis_scales: self
                .normalization
                .axis_scales
                .iter()
                .zip(&info.axis_scales)
                .map(|(a, b)| a * b)
                .collect(),
            value_scale: self.normalization.value_scale * info.value_scale,
        };
        out
    }

    /// Normalizes raw data with factors taken from an existing fit.
    pub fn normalize_with(&self, info: &NormalizationInfo) -> Result<Dataset> {
        check_dim(info.axis_scales.len(), self.d())?;
        let mut out = self.apply(info);
        out.normalization = info.clone();
        Ok(out)
    }

    /// Returns the dataset in raw units with identity normalization.
    pub fn denormalize(&self) -> Dataset {
        let info = &self.normalization;
        Dataset {
            sites: Mat::from_fn(self.n(), self.d(), |i, k| {
                self.sites[(i, k)] * info.axis_scales[k]
            }),
            values: self.values.iter().map(|v| v * info.value_scale).collect(),
            normalization: NormalizationInfo::identity(self.d()),
        }
    }

    fn apply(&self, info: &NormalizationInfo) -> Dataset {
        Dataset {
            sites: Mat::from_fn(self.n(), self.d(), |i, k| {
                self.sites[(i, k)] / info.axis_scales[k]
            }),
            values: self.values.iter().map(|v| v / info.value_scale).collect(),
            normalization: self.normalization.clone(),
        }
    }

    /// Largest pairwise Euclidean distance between sites (exact O(n²) scan).
    pub fn diameter(&self) -> Result<f64> {
        diameter(self.sites.as_ref())
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        bounding_box(self.sites.as_ref())
    }

    /// Keeps the rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            sites: select_rows(self.sites.as_ref(), indices),
            values: indices.iter().map(|&i| self.values[i]).collect(),
            normalization: self.normalization.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W, header: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if header {
            let mut names = axis_names(self.d());
            names.push("value".to_string());
            w.write_record(&names)?;
        }
        for i in 0..self.n() {
            let mut rec: Vec<String> = (0..self.d()).map(|k| fmt_real(self.sites[(i, k)])).collect();
            rec.push(fmt_real(self.values[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, header: bool) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), header)
    }
}

fn unit_if_zero(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        1.0
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn all_finite(m: MatRef<'_, f64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

pub fn select_rows(m: MatRef<'_, f64>, rows: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), m.ncols(), |i, k| m[(rows[i], k)])
}

/// Column names used in exported tables: `x, y, z` for up to three axes,
/// `x0, x1, ...` otherwise.
pub fn axis_names(d: usize) -> Vec<String> {
    if d <= 3 {
        ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect()
    } else {
        (0..d).map(|k| format!("x{k}")).collect()
    }
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reads `d` site columns followed by one response column per row.
///
/// Row numbers in errors count data rows from 1 (a header line is not
/// counted).
pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut width: Option<usize> = None;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        let expected = *width.get_or_insert(rec.len());
        if expected < 2 {
            return Err(Error::ColumnCount {
                row,
                expected: 2,
                found: rec.len(),
            });
        }
        if rec.len() != expected {
            return Err(Error::ColumnCount {
                row,
                expected,
                found: rec.len(),
            });
        }
        for (field, text) in rec.iter().enumerate() {
            let v = f64::from_str(text)
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::ParseField {
                    row,
                    field: field + 1,
                    text: text.to_string(),
                })?;
            if field + 1 == expected {
                values.push(v);
            } else {
                coords.push(v);
            }
        }
    }
    let Some(width) = width else {
        return Err(Error::NoData);
    };
    let d = width - 1;
    let n = values.len();
    Dataset::new(Mat::from_fn(n, d, |i, k| coords[i * d + k]), values)
}

pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), has_header)
}

/// Reads a CSV of site coordinates only (no response column).
pub fn load_sites_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Mat<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut width = None;
    let mut coords = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::ColumnCount {
                row,
                expected,
                found: rec.len(),
            });
        }
        for (field, text) in rec.iter().enumerate() {
            coords.push(
                f64::from_str(text)
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::ParseField {
                        row,
                        field: field + 1,
                        text: text.to_string(),
                    })?,
            );
        }
    }
    let d = width.ok_or(Error::NoData)?;
    let n = coords.len() / d;
    Ok(Mat::from_fn(n, d, |i, k| coords[i * d + k]))
}

/// True when the first line of the file does not parse as numbers.
pub fn sniff_header(path: impl AsRef<Path>) -> Result<bool> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    Ok(first
        .split(',')
        .any(|f| f64::from_str(f.trim()).is_err()))
}

pub fn diameter(sites: MatRef<'_, f64>) -> Result<f64> {
    let n = sites.nrows();
    if n < 2 {
        return Err(Error::DiameterUndefined);
    }
    let rows = row_vectors(sites);
    let mut best = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max(sq_dist(&rows[i], &rows[j]));
        }
    }
    Ok(best.sqrt())
}

pub fn bounding_box(sites: MatRef<'_, f64>) -> Vec<(f64, f64)> {
    (0..sites.ncols())
        .map(|k| {
            (0..sites.nrows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                (lo.min(sites[(i, k)]), hi.max(sites[(i, k)]))
            })
        })
        .collect()
}

pub(crate) fn row_vectors(m: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|k| m[(i, k)]).collect())
        .collect()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A regular grid: `counts[k]` nodes along axis `k`, spaced `cell` apart
/// starting at `origin[k]`.
///
/// Nodes are enumerated in row-major order: the first axis varies slowest
/// and the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub cell: f64,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, cell: f64, counts: Vec<usize>) -> Result<Self> {
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid cell size must be positive, got {cell}")));
        }
        check_dim(origin.len(), counts.len())?;
        if origin.is_empty() || counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidParameter("grid needs positive counts on every axis".into()));
        }
        Ok(Self { origin, cell, counts })
    }

    /// Smallest grid with spacing `cell` anchored at the lower corner of the
    /// box that reaches (or just passes) its upper corner.
    pub fn covering(bbox: &[(f64, f64)], cell: f64) -> Result<Self> {
        let origin = bbox.iter().map(|b| b.0).collect();
        let counts = bbox
            .iter()
            .map(|&(lo, hi)| ((hi - lo) / cell - 1e-9).ceil().max(0.0) as usize + 1)
            .collect();
        Self::new(origin, cell, counts)
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self) -> Mat<f64> {
        let d = self.counts.len();
        let n = self.len();
        Mat::from_fn(n, d, |i, k| {
            let stride: usize = self.counts[k + 1..].iter().product();
            let idx = (i / stride) % self.counts[k];
            self.origin[k] + idx as f64 * self.cell
        })
    }
}

/// The four closed-form test surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// Gramacy & Lee, x ∈ [0.5, 2.5].
    Tf1,
    /// 1-D Schwefel, x ∈ [-500, 500].
    Tf2,
    /// Drop-wave, (x, y) ∈ [-2, 2]².
    Tf3,
    /// 2-D Schwefel, (x, y) ∈ [-500, 500]².
    Tf4,
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] = [Self::Tf1, Self::Tf2, Self::Tf3, Self::Tf4];

    pub fn dim(self) -> usize {
        match self {
            Self::Tf1 | Self::Tf2 => 1,
            Self::Tf3 | Self::Tf4 => 2,
        }
    }

    /// Per-axis sampling interval.
    pub fn domain(self) -> (f64, f64) {
        match self {
            Self::Tf1 => (0.5, 2.5),
            Self::Tf2 | Self::Tf4 => (-500.0, 500.0),
            Self::Tf3 => (-2.0, 2.0),
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        let schwefel = |t: f64| t * t.abs().sqrt().sin();
        match self {
            Self::Tf1 => {
                let x = x[0];
                (10.0 * PI * x).sin() / (2.0 * x) + (x - 1.0).powi(4)
            }
            Self::Tf2 => 418.9829 - schwefel(x[0]),
            Self::Tf3 => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                -(1.0 + (12.0 * r2.sqrt()).cos()) / (0.5 * r2 + 2.0)
            }
            Self::Tf4 => 837.9658 - schwefel(x[0]) - schwefel(x[1]),
        }
    }

    /// Default sampling: 200 equidistant points in 1-D, a 50 × 50 grid in 2-D.
    pub fn default_sampling(self) -> Sampling {
        match self.dim() {
            1 => Sampling::Equidistant(200),
            _ => Sampling::Grid(50),
        }
    }

    pub fn generate(self, sampling: Sampling) -> Result<Dataset> {
        gen_test_function(self, sampling)
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TF1" => Ok(Self::Tf1),
            "TF2" => Ok(Self::Tf2),
            "TF3" => Ok(Self::Tf3),
            "TF4" => Ok(Self::Tf4),
            _ => Err(Error::UnknownTestFunction(s.to_string())),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Tf1 => "TF1",
            Self::Tf2 => "TF2",
            Self::Tf3 => "TF3",
            Self::Tf4 => "TF4",
        };
        f.write_str(name)
    }
}

/// How sites are placed in a test function's domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// `n` equally spaced points including both endpoints (1-D only).
    Equidistant(usize),
    /// `g` points per axis, including endpoints; `g^d` sites in total.
    Grid(usize),
    /// `n` independent uniform draws in the domain box.
    Uniform { n: usize, seed: u64 },
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + i as f64 * step }).collect()
}

/// Samples a test function; the result carries identity normalization.
pub fn gen_test_function(tf: TestFunction, sampling: Sampling) -> Result<Dataset> {
    let d = tf.dim();
    let (lo, hi) = tf.domain();
    let rows: Vec<Vec<f64>> = match sampling {
        Sampling::Equidistant(n) => {
            if n < 2 {
                return Err(Error::InvalidParameter("sampling needs at least 2 points".into()));
            }
            if d != 1 {
                return Err(Error::InvalidParameter(format!(
                    "equidistant sampling is 1-D; use a grid for {tf}"
                )));
            }
            linspace(lo, hi, n).into_iter().map(|x| vec![x]).collect()
        }
        Sampling::Grid(g) => {
            if g < 2 {
                return Err(Error::InvalidParameter("grid needs at least 2 points per axis".into()));
            }
            let axis = linspace(lo, hi, g);
            let total = g.pow(d as u32);
            (0..total)
                .map(|i| {
                    (0..d)
                        .map(|k| axis[(i / g.pow((d - 1 - k) as u32)) % g])
                        .collect()
                })
                .collect()
        }
        Sampling::Uniform { n, seed } => {
            if n < 2 {
                return Err(Error::InvalidParameter("sampling needs at least 2 points".into()));
            }
            row_vectors(uniform_in_box(&vec![(lo, hi); d], n, seed)?.as_ref())
        }
    };
    let values = rows.iter().map(|r| tf.eval(r)).collect();
    Dataset::from_rows(&rows, values)
}

/// `n` seeded uniform draws in a box, `n × d`. Draws are taken row by row.
pub fn uniform_in_box(bbox: &[(f64, f64)], n: usize, seed: u64) -> Result<Mat<f64>> {
    let dists = bbox
        .iter()
        .map(|&(lo, hi)| Uniform::new_inclusive(lo, hi).map_err(|e| Error::InvalidParameter(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n * bbox.len());
    for _ in 0..n {
        draws.extend(dists.iter().map(|dist| dist.sample(&mut rng)));
    }
    let d = bbox.len();
    Ok(Mat::from_fn(n, d, |i, k| draws[i * d + k]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds1(xs: &[f64], vs: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::from_rows(&rows, vs.to_vec()).unwrap()
    }

    #[test]
    fn csv_parses_simple_rows() {
        let ds = read_csv("0,1\n1,2\n".as_bytes(), false).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.d(), 1);
        assert_eq!(ds.sites[(0, 0)], 0.0);
        assert_eq!(ds.sites[(1, 0)], 1.0);
        assert_eq!(ds.values, vec![1.0, 2.0]);
        assert!(ds.normalization.is_identity());
    }

    #[test]
    fn csv_with_header() {
        let ds = read_csv("x,y,value\n0,1,2\n3,4,5\n".as_bytes(), true).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 2));
        assert_eq!(ds.values, vec![2.0, 5.0]);
    }

    #[test]
    fn csv_empty_is_error() {
        let err = read_csv("".as_bytes(), false).unwrap_err();
        assert_eq!(err.to_string(), "no data rows");
    }

    #[test]
    fn csv_bad_field_names_row() {
        match read_csv("0,abc\n".as_bytes(), false).unwrap_err() {
            Error::ParseField { row, field, .. } => {
                assert_eq!(row, 1);
                assert_eq!(field, 2);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn csv_inconsistent_columns() {
        let err = read_csv("0,1\n1,2,3\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::ColumnCount { row: 2, expected: 2, found: 3 }));
    }

    #[test]
    fn normalize_divides_by_abs_max() {
        let ds = ds1(&[-2.0, 4.0], &[10.0, -5.0]).normalize();
        assert_eq!(ds.sites[(0, 0)], -0.5);
        assert_eq!(ds.sites[(1, 0)], 1.0);
        assert_eq!(ds.values, vec![1.0, -0.5]);
        assert_eq!(ds.normalization.axis_scales, vec![4.0]);
        assert_eq!(ds.normalization.value_scale, 10.0);
    }

    #[test]
    fn normalize_already_normalized_is_identity() {
        let ds = ds1(&[-1.0, 0.25], &[0.5, 1.0]).normalize();
        assert!((ds.normalization.axis_scales[0] - 1.0).abs() <= 1e-15);
        assert!((ds.normalization.value_scale - 1.0).abs() <= 1e-15);
        assert_eq!(ds.values, vec![0.5, 1.0]);
    }

    #[test]
    fn normalize_zero_axis_keeps_unit_factor() {
        let ds = ds1(&[0.0, 0.0], &[0.0, 0.0]).normalize();
        assert!(ds.normalization.is_identity());
        assert_eq!(ds.values, vec![0.0, 0.0]);
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(ds1(&[0.0, 2.0], &[0.0, 0.0]).diameter().unwrap(), 2.0);
        let ds = Dataset::from_rows(
            &[vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 1.0]],
            vec![0.0; 3],
        )
        .unwrap();
        assert_eq!(ds.diameter().unwrap(), 5.0);
        assert!(matches!(
            ds1(&[1.0], &[1.0]).diameter(),
            Err(Error::DiameterUndefined)
        ));
    }

    #[test]
    fn test_function_values() {
        assert!(TestFunction::Tf1.eval(&[1.0]).abs() < 1e-14);
        assert_eq!(TestFunction::Tf2.eval(&[0.0]), 418.9829);
        assert_eq!(TestFunction::Tf3.eval(&[0.0, 0.0]), -1.0);
        assert_eq!(TestFunction::Tf4.eval(&[0.0, 0.0]), 837.9658);
        assert!(matches!(
            "TF9".parse::<TestFunction>(),
            Err(Error::UnknownTestFunction(_))
        ));
        assert_eq!("tf3".parse::<TestFunction>().unwrap(), TestFunction::Tf3);
    }

    #[test]
    fn default_sampling_sizes() {
        let a = gen_test_function(TestFunction::Tf1, TestFunction::Tf1.default_sampling()).unwrap();
        assert_eq!(a.n(), 200);
        assert_eq!(a.sites[(0, 0)], 0.5);
        assert_eq!(a.sites[(199, 0)], 2.5);
        let b = gen_test_function(TestFunction::Tf3, TestFunction::Tf3.default_sampling()).unwrap();
        assert_eq!((b.n(), b.d()), (2500, 2));
        // last axis fastest
        assert_eq!(b.sites[(0, 0)], -2.0);
        assert_eq!(b.sites[(1, 0)], -2.0);
        assert!(b.sites[(1, 1)] > -2.0);
    }

    #[test]
    fn uniform_sampling_is_seeded() {
        let s = Sampling::Uniform { n: 30, seed: 11 };
        let a = gen_test_function(TestFunction::Tf4, s).unwrap();
        let b = gen_test_function(TestFunction::Tf4, s).unwrap();
        assert_eq!(a.sites, b.sites);
        assert_eq!(a.values, b.values);
        let c = gen_test_function(TestFunction::Tf4, Sampling::Uniform { n: 30, seed: 12 }).unwrap();
        assert_ne!(a.sites, c.sites);
    }

    #[test]
    fn equidistant_rejects_2d() {
        assert!(gen_test_function(TestFunction::Tf3, Sampling::Equidistant(10)).is_err());
    }

    #[test]
    fn grid_spec_row_major() {
        let g = GridSpec::new(vec![0.0, 10.0], 2.0, vec![2, 3]).unwrap();
        let nodes = g.nodes();
        assert_eq!(nodes.nrows(), 6);
        let got: Vec<(f64, f64)> = (0..6).map(|i| (nodes[(i, 0)], nodes[(i, 1)])).collect();
        assert_eq!(
            got,
            vec![(0.0, 10.0), (0.0, 12.0), (0.0, 14.0), (2.0, 10.0), (2.0, 12.0), (2.0, 14.0)]
        );
    }

    #[test]
    fn grid_covering_reaches_box() {
        let g = GridSpec::covering(&[(0.0, 180.0), (0.0, 100.0)], 20.0).unwrap();
        assert_eq!(g.counts, vec![10, 6]);
        assert!(GridSpec::new(vec![0.0], 0.0, vec![3]).is_err());
    }
}
