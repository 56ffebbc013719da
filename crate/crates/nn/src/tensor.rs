use crate::error::{NnError, Result};

/// Dense row-major `f64` tensor with at most three axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(NnError::Invalid(format!("rank must be 1..=3, got {}", shape.len())));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(NnError::shape("Tensor::new", &[len], &[data.len()]));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(shape.to_vec(), vec![0.0; shape.iter().product()]).expect("valid shape")
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Self { shape: vec![n], data }
    }

    /// `rows` copies of `row` stacked into a matrix.
    pub fn broadcast_row(row: &[f64], rows: usize) -> Self {
        let mut data = Vec::with_capacity(rows * row.len());
        for _ in 0..rows {
            data.extend_from_slice(row);
        }
        Self { shape: vec![rows, row.len()], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Leading axis for a matrix; 1 for a vector.
    pub fn rows(&self) -> usize {
        if self.shape.len() == 1 {
            1
        } else {
            self.shape[0]
        }
    }

    /// Trailing axis.
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() || shape.is_empty() || shape.len() > 3 {
            return Err(NnError::shape("reshape", &shape, &self.shape));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// `self += other * scale`, elementwise.
    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(NnError::shape("add_scaled", &self.shape, &other.shape));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NnError::NonFinite(context.to_string()))
        }
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn hcat(parts: &[&Tensor]) -> Result<Self> {
        let rows = parts.first().map(|t| t.rows()).unwrap_or(0);
        for t in parts {
            if t.rows() != rows {
                return Err(NnError::shape("hcat", &[rows], &[t.rows()]));
            }
        }
        let cols: usize = parts.iter().map(|t| t.cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for t in parts {
                data.extend_from_slice(t.row(i));
            }
        }
        Self::matrix(rows, cols, data)
    }

    /// Columns `start..end` of a matrix.
    pub fn cols_range(&self, start: usize, end: usize) -> Self {
        let rows = self.rows();
        let mut data = Vec::with_capacity(rows * (end - start));
        for i in 0..rows {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        Self { shape: vec![rows, end - start], data }
    }

    /// Rows `start..end` of a matrix.
    pub fn rows_range(&self, start: usize, end: usize) -> Self {
        let c = self.cols();
        Self { shape: vec![end - start, c], data: self.data[start * c..end * c].to_vec() }
    }

    /// Row-wise concatenation of matrices with equal column counts.
    pub fn vcat(parts: &[&Tensor]) -> Result<Self> {
        let cols = parts.first().map(|t| t.cols()).unwrap_or(0);
        let mut data = Vec::new();
        let mut rows = 0;
        for t in parts {
            if t.cols() != cols {
                return Err(NnError::shape("vcat", &[cols], &[t.cols()]));
            }
            rows += t.rows();
            data.extend_from_slice(&t.data);
        }
        Self::matrix(rows, cols, data)
    }

    /// Column sums of a matrix.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        for i in 0..self.rows() {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }
}
