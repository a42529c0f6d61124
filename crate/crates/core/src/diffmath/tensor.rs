use std::fmt;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// Values entering from outside the crate are checked for finiteness;
/// intermediate results of the tape are not re-checked.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    data: Array2<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            data: Array2::zeros((rows, cols)),
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, 1.0)
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            data: Array2::from_elem((rows, cols), value),
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::full(1, 1, value)
    }

    /// Builds a tensor from row-major data, rejecting NaN and infinities.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "from_vec",
                format!("{} values for shape {rows}x{cols}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data"));
        }
        let data = Array2::from_shape_vec((rows, cols), data).expect("length checked");
        Ok(Tensor { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("from_rows", "ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    /// Wraps an array produced by trusted internal arithmetic.
    pub(crate) fn from_array(data: Array2<f64>) -> Self {
        Tensor {
            data: data.as_standard_layout().into_owned(),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[[row, col]]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[[row, col]] = value;
    }

    /// Row-major view of all entries.
    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice().expect("tensors are kept in standard layout")
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.data.as_slice_mut().expect("tensors are kept in standard layout")
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.as_slice()[r * c..(r + 1) * c]
    }

    pub fn array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.shape(), (1, 1));
        self.data[[0, 0]]
    }

    pub fn sum(&self) -> f64 {
        self.as_slice().iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols() != other.rows() {
            return Err(Error::dim(
                "matmul",
                format!("{:?} x {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(Tensor::from_array(self.data.dot(&other.data)))
    }

    pub fn transpose(&self) -> Tensor {
        Tensor::from_array(self.data.t().to_owned())
    }

    /// Channel-wise concatenation `[self ; other]`.
    pub fn concat_cols(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows() != other.rows() {
            return Err(Error::dim(
                "concat_cols",
                format!("{} rows vs {} rows", self.rows(), other.rows()),
            ));
        }
        let out = ndarray::concatenate(Axis(1), &[self.data.view(), other.data.view()]).expect("row counts checked");
        Ok(Tensor::from_array(out))
    }

    /// Rows selected by `perm`, so row `perm[i]` of the result is row `i` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Tensor {
        assert_eq!(perm.len(), self.rows());
        let mut out = Array2::zeros(self.data.dim());
        for (old, &new) in perm.iter().enumerate() {
            out.row_mut(new).assign(&self.data.row(old));
        }
        Tensor { data: out }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_array(self.data.mapv(f))
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(Error::dim("add", format!("{:?} + {:?}", self.shape(), other.shape())));
        }
        Ok(Tensor::from_array(&self.data + &other.data))
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        self.data += &other.data;
    }

    pub fn column_sums(&self) -> Tensor {
        Tensor::from_array(self.data.sum_axis(Axis(0)).insert_axis(Axis(0)))
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}{:?}", self.shape(), self.as_slice())
    }
}
