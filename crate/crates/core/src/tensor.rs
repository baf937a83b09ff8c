//! Minimal dense linear algebra over row-major f32 matrices.
//!
//! Elements are 32-bit floats to match the 4-byte word size the rest of the
//! crate (cost model, buffer sizing) is built around. Dot products accumulate
//! in f64, strictly left to right, and round once to f32 at the end; this
//! keeps results reproducible across runs and keeps the two algebraically
//! equivalent module pipelines within comparison tolerance of each other.

use crate::error::{Error, Result};

/// Dense row-major matrix of f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Mat {
    /// Builds a matrix from a flat row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Argument(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Argument(format!(
                    "row {i} has length {} but row 0 has length {m}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: n, cols: m, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Row `r` as a slice.
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    /// New matrix holding the given rows of `self`, in order.
    /// Indices must be in range.
    pub fn gather_rows(&self, indices: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Mat {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Activation applied after every MLP layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// No nonlinearity; the whole MLP is a linear map.
    Identity,
    /// max(x, 0).
    Rectifier,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Self::Identity => x,
            Self::Rectifier => x.max(0.0),
        }
    }
}

/// Shared multilayer perceptron: an ordered list of weight matrices with one
/// activation kind applied after every layer. Layer `l` maps row vectors of
/// width `layers[l].rows()` to width `layers[l].cols()`. No bias terms: the
/// aggregation reordering this crate is built around relies on the layers
/// being pure weight products.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Mat>,
    activation: Activation,
}

impl Mlp {
    pub fn new(layers: Vec<Mat>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Argument("an MLP needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].cols() != w[1].rows() {
                return Err(Error::Shape {
                    op: "mlp layer chain",
                    left: (w[0].rows(), w[0].cols()),
                    right: (w[1].rows(), w[1].cols()),
                });
            }
        }
        Ok(Self { layers, activation })
    }

    pub fn layers(&self) -> &[Mat] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Input width expected by the first layer.
    pub fn input_width(&self) -> usize {
        self.layers[0].rows()
    }

    /// Output width produced by the last layer.
    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].cols()
    }

    /// Layer widths as `[input, hidden..., output]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.layers.len() + 1);
        w.push(self.input_width());
        w.extend(self.layers.iter().map(Mat::cols));
        w
    }
}

/// Standard matrix product. Each output entry is a left-to-right dot product
/// accumulated in f64 and rounded once to f32.
pub fn matmul(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "matmul",
            left: (a.rows, a.cols),
            right: (b.rows, b.cols),
        });
    }
    let mut out = vec![0.0f32; a.rows * b.cols];
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.cols {
            let mut acc = 0.0f64;
            for (k, &av) in arow.iter().enumerate() {
                acc += f64::from(av) * f64::from(b.data[k * b.cols + j]);
            }
            out[i * b.cols + j] = acc as f32;
        }
    }
    Ok(Mat {
        rows: a.rows,
        cols: b.cols,
        data: out,
    })
}

/// Runs every row of `x` through the MLP: `y = phi(...phi(x W1) W2 ...)`.
pub fn mlp_forward(x: &Mat, mlp: &Mlp) -> Result<Mat> {
    if x.cols != mlp.input_width() {
        return Err(Error::Shape {
            op: "mlp_forward",
            left: (x.rows, x.cols),
            right: (mlp.input_width(), mlp.output_width()),
        });
    }
    let mut cur = x.clone();
    for w in &mlp.layers {
        let mut y = matmul(&cur, w)?;
        let act = mlp.activation;
        for v in &mut y.data {
            *v = act.apply(*v);
        }
        cur = y;
    }
    Ok(cur)
}

/// Column-wise max over all rows, producing a 1 x cols matrix.
pub fn reduce_max_rows(x: &Mat) -> Result<Mat> {
    if x.rows == 0 {
        return Err(Error::Shape {
            op: "reduce_max_rows",
            left: (0, x.cols),
            right: (1, x.cols),
        });
    }
    let mut out = x.row(0).to_vec();
    for r in 1..x.rows {
        for (o, &v) in out.iter_mut().zip(x.row(r)) {
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(Mat {
        rows: 1,
        cols: x.cols,
        data: out,
    })
}

/// Subtracts the 1 x cols row vector `v` from every row of `x`.
pub fn sub_rowwise(x: &Mat, v: &Mat) -> Result<Mat> {
    if v.rows != 1 || v.cols != x.cols {
        return Err(Error::Shape {
            op: "sub_rowwise",
            left: (x.rows, x.cols),
            right: (v.rows, v.cols),
        });
    }
    let mut data = Vec::with_capacity(x.data.len());
    for r in 0..x.rows {
        for (a, b) in x.row(r).iter().zip(v.row(0)) {
            data.push(a - b);
        }
    }
    Ok(Mat {
        rows: x.rows,
        cols: x.cols,
        data,
    })
}

/// Max absolute entry difference, scaled by the larger of 1 and either
/// matrix's max-norm. This is the comparison used whenever two algebraic
/// routes to the same result are checked against each other.
pub fn rel_diff(a: &Mat, b: &Mat) -> f32 {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols), "rel_diff shape mismatch");
    let mut max_abs = 0.0f32;
    for (x, y) in a.data.iter().zip(&b.data) {
        max_abs = max_abs.max((x - y).abs());
    }
    max_abs / a.max_abs().max(b.max_abs()).max(1.0)
}
