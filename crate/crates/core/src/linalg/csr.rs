use super::{DenseMatrix, LinalgError};

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row; this is enforced
/// by every constructor.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        if row_ptr.len() != rows + 1 {
            return Err(LinalgError::InvalidCsr("row pointer length must be rows + 1"));
        }
        if row_ptr[0] != 0 || *row_ptr.last().unwrap() != values.len() {
            return Err(LinalgError::InvalidCsr("row pointers must span the stored values"));
        }
        if col_idx.len() != values.len() {
            return Err(LinalgError::InvalidCsr("column index and value lengths differ"));
        }
        for r in 0..rows {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(LinalgError::InvalidCsr("row pointers must be nondecreasing"));
            }
            let cols_in_row = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols_in_row.iter().any(|&c| c >= cols) {
                return Err(LinalgError::InvalidCsr("column index out of range"));
            }
            if cols_in_row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LinalgError::InvalidCsr(
                    "column indices must be strictly increasing within a row",
                ));
            }
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// input order.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut sorted: Vec<(usize, usize, usize)> = triplets
            .iter()
            .enumerate()
            .map(|(i, &(r, c, _))| (r, c, i))
            .collect();
        if sorted.iter().any(|&(r, c, _)| r >= rows || c >= cols) {
            return Err(LinalgError::InvalidCsr("triplet index out of range"));
        }
        sorted.sort_unstable();
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, i) in sorted {
            let v = triplets[i].2;
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::new(rows, cols, row_ptr, col_idx, values)
    }

    /// Stores every nonzero entry of `dense`.
    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(dense.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..dense.rows() {
            for (c, &v) in dense.row(r).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Self {
            rows: dense.rows(),
            cols: dense.cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(col, value)` pairs of row `r` in column order.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                out.set(r, c, v);
            }
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each transposed row receives
        // its column indices already sorted.
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                let dst = next[c];
                col_idx[dst] = r;
                values[dst] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `self · b`. Each output entry accumulates over the stored entries of
    /// the row in column order.
    pub fn spmm(&self, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.cols != b.rows() {
            return Err(LinalgError::shape("spmm", self.shape(), b.shape()));
        }
        let m = b.cols();
        let mut out = DenseMatrix::zeros(self.rows, m);
        for r in 0..self.rows {
            let start = self.row_ptr[r];
            let end = self.row_ptr[r + 1];
            let out_row = out.row_mut(r);
            for k in start..end {
                let a = self.values[k];
                let b_row = b.row(self.col_idx[k]);
                for (o, &x) in out_row.iter_mut().zip(b_row) {
                    *o += a * x;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · b` computed without building the transpose. The summation
    /// order per output entry is increasing source row, identical to
    /// `self.transpose().spmm(b)`.
    pub fn tr_spmm(&self, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.rows != b.rows() {
            return Err(LinalgError::shape("tr_spmm", self.shape(), b.shape()));
        }
        let m = b.cols();
        let mut out = DenseMatrix::zeros(self.cols, m);
        for r in 0..self.rows {
            let b_row = b.row(r);
            for (c, a) in self.row_entries(r) {
                let out_row = out.row_mut(c);
                for (o, &x) in out_row.iter_mut().zip(b_row) {
                    *o += a * x;
                }
            }
        }
        Ok(out)
    }

    /// Sparse matrix-vector product.
    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "spmv length mismatch");
        (0..self.rows)
            .map(|r| self.row_entries(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Largest `|a_ij - a_ji|` over stored entries; `INFINITY` when not square.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Fraction of stored entries relative to a dense matrix of the same shape.
    pub fn density(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.rows as f64 * self.cols as f64)
    }
}
