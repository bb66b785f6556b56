//! Training corpus, CSV ingestion and exact nearest-neighbor selection.

use std::io::Read;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RlgpError};
use crate::kernel::{pairwise_sq_dist, sq_dist, DistanceMatrix};

/// Default neighborhood size, capped at the corpus size.
pub const DEFAULT_NEIGHBORS: usize = 50;

/// Inputs (`N × d`) paired row-wise with scalar responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(RlgpError::NoRows);
        }
        if x.ncols() == 0 {
            return Err(RlgpError::InvalidInput("dataset needs at least one feature".into()));
        }
        if x.nrows() != y.len() {
            return Err(RlgpError::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(RlgpError::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }
}

/// Column layout of a CSV corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvSchema {
    /// Expected feature count, or `None` to infer it from the header.
    pub dim: Option<usize>,
}

/// Reads a CSV with header `x1,...,xd,y`.
///
/// Rows are numbered from 1 (the header is row 0) and columns from 1 in
/// error messages.
pub fn load_dataset<R: Read>(source: R, schema: CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| RlgpError::Schema(format!("cannot read header: {e}")))?
        .clone();
    let d = validate_header(&headers, schema.dim)?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| RlgpError::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != d + 1 {
            return Err(RlgpError::Schema(format!(
                "row {row} has {} columns, expected {}",
                record.len(),
                d + 1
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let value = parse_cell(cell).ok_or_else(|| RlgpError::Parse {
                row,
                column: col + 1,
                message: format!("expected a finite number, found {cell:?}"),
            })?;
            if col < d {
                xs.push(value);
            } else {
                ys.push(value);
            }
        }
    }
    if ys.is_empty() {
        return Err(RlgpError::NoRows);
    }
    let n = ys.len();
    Dataset::new(DMatrix::from_row_slice(n, d, &xs), DVector::from_vec(ys))
}

fn parse_cell(cell: &str) -> Option<f64> {
    let v: f64 = cell.parse().ok()?;
    v.is_finite().then_some(v)
}

fn validate_header(headers: &csv::StringRecord, dim: Option<usize>) -> Result<usize> {
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 2 {
        return Err(RlgpError::Schema(format!(
            "header needs x1..xd and y, found {:?}",
            cols
        )));
    }
    let d = cols.len() - 1;
    if let Some(expected) = dim {
        if expected != d {
            return Err(RlgpError::Schema(format!(
                "expected {expected} feature columns, found {d}"
            )));
        }
    }
    for (i, name) in cols[..d].iter().enumerate() {
        if *name != format!("x{}", i + 1) {
            return Err(RlgpError::Schema(format!(
                "column {} should be named x{}, found {name:?}",
                i + 1,
                i + 1
            )));
        }
    }
    if cols[d] != "y" {
        return Err(RlgpError::Schema(format!(
            "last column should be named y, found {:?}",
            cols[d]
        )));
    }
    Ok(d)
}

/// Per-feature min-max scaling to `[-0.5, 0.5]`, fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(ds: &Dataset) -> Self {
        let d = ds.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in ds.x().row_iter() {
            for (k, v) in row.iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        Self { lo, hi }
    }

    /// Maps one point; constant features map to 0.
    pub fn transform_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| {
                let span = self.hi[k] - self.lo[k];
                if span > 0.0 {
                    (v - self.lo[k]) / span - 0.5
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        let n = ds.len();
        let d = ds.dim();
        let mut out = Vec::with_capacity(n * d);
        for i in 0..n {
            out.extend(self.transform_point(&ds.row(i)));
        }
        Dataset::new(DMatrix::from_row_slice(n, d, &out), ds.y().clone())
    }
}

/// The `n` training points closest to a query, with their local geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    /// Global row indices, ordered by increasing distance to the query.
    pub indices: Vec<usize>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub query: Vec<f64>,
    /// Squared distances among the selected points.
    pub distances: DistanceMatrix,
    /// Squared distance from each selected point to the query.
    pub cross_sq_dist: DVector<f64>,
}

impl Neighborhood {
    pub fn n(&self) -> usize {
        self.indices.len()
    }

    /// Assembles a neighborhood from explicit local data.
    pub fn from_parts(
        indices: Vec<usize>,
        x: DMatrix<f64>,
        y: DVector<f64>,
        query: Vec<f64>,
    ) -> Result<Self> {
        if x.nrows() != y.len() || indices.len() != y.len() {
            return Err(RlgpError::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if query.len() != x.ncols() {
            return Err(RlgpError::DimensionMismatch {
                expected: x.ncols(),
                found: query.len(),
            });
        }
        if query.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(RlgpError::InvalidInput("non-finite neighborhood data".into()));
        }
        let distances = pairwise_sq_dist(&x)?;
        let cross_sq_dist = DVector::from_iterator(
            x.nrows(),
            x.row_iter().map(|r| {
                let row: Vec<f64> = r.iter().copied().collect();
                sq_dist(&row, &query)
            }),
        );
        Ok(Self {
            indices,
            x,
            y,
            query,
            distances,
            cross_sq_dist,
        })
    }
}

/// Exact brute-force selection of the `n` rows nearest to `query`; ties go to
/// the lower global row index.
pub fn select_neighbors(ds: &Dataset, query: &[f64], n: usize) -> Result<Neighborhood> {
    if query.len() != ds.dim() {
        return Err(RlgpError::DimensionMismatch {
            expected: ds.dim(),
            found: query.len(),
        });
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(RlgpError::InvalidInput("non-finite query".into()));
    }
    if n == 0 || n > ds.len() {
        return Err(RlgpError::InvalidArgument(format!(
            "neighborhood size must be in 1..={}, got {n}",
            ds.len()
        )));
    }
    let x = ds.x();
    let mut order: Vec<(f64, usize)> = (0..ds.len())
        .map(|i| {
            let mut acc = 0.0;
            for (k, q) in query.iter().enumerate() {
                let diff = x[(i, k)] - q;
                acc += diff * diff;
            }
            (acc, i)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if n < order.len() {
        order.select_nth_unstable_by(n - 1, cmp);
        order.truncate(n);
    }
    order.sort_by(cmp);

    let indices: Vec<usize> = order.iter().map(|&(_, i)| i).collect();
    let local_x = DMatrix::from_fn(n, ds.dim(), |r, c| x[(indices[r], c)]);
    let local_y = DVector::from_iterator(n, indices.iter().map(|&i| ds.y()[i]));
    let cross_sq_dist = DVector::from_iterator(n, order.iter().map(|&(dist, _)| dist));
    let distances = pairwise_sq_dist(&local_x)?;
    Ok(Neighborhood {
        indices,
        x: local_x,
        y: local_y,
        query: query.to_vec(),
        distances,
        cross_sq_dist,
    })
}
