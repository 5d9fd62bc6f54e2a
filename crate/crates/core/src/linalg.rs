//! Minimal dense vector/matrix arithmetic on f64.
//!
//! Everything in the model is small (embedding dim times sentence length),
//! so plain row-major storage and scalar loops are all we need. Dimension
//! mismatches are programming errors and panic; data-dependent failures are
//! reported through [`crate::error::Error`] by the callers.

/// Dense vector of f64, non-empty by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn from_vec(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "vector must be non-empty");
        assert!(
            data.iter().all(|v| v.is_finite()),
            "vector entries must be finite"
        );
        Vector { data }
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector must be non-empty");
        Vector {
            data: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// self += s * other
    pub fn add_scaled(&mut self, other: &Vector, s: f64) {
        assert_eq!(self.len(), other.len(), "add_scaled: length mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// self += s * slice
    pub fn add_scaled_slice(&mut self, other: &[f64], s: f64) {
        assert_eq!(self.len(), other.len(), "add_scaled_slice: length mismatch");
        for (a, b) in self.data.iter_mut().zip(other) {
            *a += s * b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Dense row-major matrix of f64. Context-word memory iterates over rows,
/// which keeps the hot loops contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        assert!(!rows.is_empty(), "matrix must have at least one row");
        let cols = rows[0].len();
        assert!(cols > 0, "matrix must have at least one column");
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in &rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        assert!(
            data.iter().all(|v| v.is_finite()),
            "matrix entries must be finite"
        );
        Matrix {
            data,
            rows: rows.len(),
            cols,
        }
    }

    pub fn from_flat(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        assert_eq!(data.len(), rows * cols, "flat data length mismatch");
        assert!(
            data.iter().all(|v| v.is_finite()),
            "matrix entries must be finite"
        );
        Matrix { data, rows, cols }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// self += s * u v^T
    pub fn add_scaled_outer(&mut self, u: &Vector, v: &Vector, s: f64) {
        assert_eq!(self.rows, u.len(), "add_scaled_outer: row mismatch");
        assert_eq!(self.cols, v.len(), "add_scaled_outer: col mismatch");
        for r in 0..self.rows {
            let ur = s * u[r];
            let row = self.row_mut(r);
            for (c, rv) in row.iter_mut().enumerate() {
                *rv += ur * v[c];
            }
        }
    }
}

/// M x, one row dot product per output entry.
pub fn matvec(m: &Matrix, x: &Vector) -> Vector {
    assert_eq!(m.cols(), x.len(), "matvec: dimension mismatch");
    let mut out = Vector::zeros(m.rows());
    for r in 0..m.rows() {
        out[r] = m
            .row(r)
            .iter()
            .zip(x.iter())
            .map(|(a, b)| a * b)
            .sum();
    }
    out
}

/// M^T x, used when chaining gradients back through a linear map.
pub fn matvec_transposed(m: &Matrix, x: &Vector) -> Vector {
    assert_eq!(m.rows(), x.len(), "matvec_transposed: dimension mismatch");
    let mut out = Vector::zeros(m.cols());
    for r in 0..m.rows() {
        out.add_scaled_slice(m.row(r), x[r]);
    }
    out
}

/// Max-subtraction stabilized softmax. The raw exponentials overflow for
/// large scores; shifting by the max leaves the result unchanged.
pub fn softmax(g: &Vector) -> Vector {
    let max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vector::zeros(g.len());
    let mut sum = 0.0;
    for (o, v) in out.as_mut_slice().iter_mut().zip(g.iter()) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.as_mut_slice() {
        *o /= sum;
    }
    out
}

pub fn tanh_vec(x: &Vector) -> Vector {
    Vector::from_vec(x.iter().map(|v| v.tanh()).collect())
}

pub fn add(a: &Vector, b: &Vector) -> Vector {
    assert_eq!(a.len(), b.len(), "add: length mismatch");
    Vector::from_vec(a.iter().zip(b.iter()).map(|(x, y)| x + y).collect())
}

pub fn hadamard(a: &Vector, b: &Vector) -> Vector {
    assert_eq!(a.len(), b.len(), "hadamard: length mismatch");
    Vector::from_vec(a.iter().zip(b.iter()).map(|(x, y)| x * y).collect())
}

pub fn scale(a: &Vector, s: f64) -> Vector {
    Vector::from_vec(a.iter().map(|x| x * s).collect())
}

pub fn concat(a: &Vector, b: &Vector) -> Vector {
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.as_slice());
    data.extend_from_slice(b.as_slice());
    Vector::from_vec(data)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
