use super::Matrix;

/// Compressed sparse row matrix used for (normalized) adjacencies.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r},{c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzeros of row `r` as `(col, value)` pairs, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v).sum()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && (0..self.rows).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }

    /// `self * x`.
    pub fn mul_dense(&self, x: &Matrix) -> Matrix {
        assert_eq!(self.cols, x.rows(), "sparse product shape mismatch");
        let mut out = Matrix::zeros(self.rows, x.cols());
        self.mul_block_into(x, 0, &mut out, 0, x.cols());
        out
    }

    /// `out[:, oc..oc+w] += self * x[:, xc..xc+w]`.
    pub(crate) fn mul_block_into(&self, x: &Matrix, xc: usize, out: &mut Matrix, oc: usize, w: usize) {
        let (xn, on) = (x.cols(), out.cols());
        assert!(xc + w <= xn && oc + w <= on && x.rows() == self.cols && out.rows() == self.rows);
        let xd = x.data();
        let od = out.data_mut();
        for r in 0..self.rows {
            let orow = &mut od[r * on + oc..r * on + oc + w];
            let span = self.indptr[r]..self.indptr[r + 1];
            for (&c, &v) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                axpy(orow, v, &xd[c * xn + xc..c * xn + xc + w]);
            }
        }
    }

    /// `out[:, oc..oc+w] += selfᵀ * g[:, gc..gc+w]`.
    pub(crate) fn mul_transpose_block_into(&self, g: &Matrix, gc: usize, out: &mut Matrix, oc: usize, w: usize) {
        let (gn, on) = (g.cols(), out.cols());
        assert!(gc + w <= gn && oc + w <= on && g.rows() == self.rows && out.rows() == self.cols);
        let gd = g.data();
        let od = out.data_mut();
        for r in 0..self.rows {
            let grow = &gd[r * gn + gc..r * gn + gc + w];
            let span = self.indptr[r]..self.indptr[r + 1];
            for (&c, &v) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                axpy(&mut od[c * on + oc..c * on + oc + w], v, grow);
            }
        }
    }

    /// `acc += selfᵀ * g`, without materializing the transpose.
    pub fn mul_transpose_dense_into(&self, g: &Matrix, acc: &mut Matrix) {
        assert_eq!(acc.shape(), (self.cols, g.cols()));
        self.mul_transpose_block_into(g, 0, acc, 0, g.cols());
    }
}

/// `y += a·x`, unrolled for the narrow widths the models use.
#[inline(always)]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    fn fixed<const W: usize>(y: &mut [f64], a: f64, x: &[f64]) {
        let y: &mut [f64; W] = y.try_into().expect("width");
        let x: &[f64; W] = x.try_into().expect("width");
        for j in 0..W {
            y[j] += a * x[j];
        }
    }
    match y.len() {
        2 => fixed::<2>(y, a, x),
        8 => fixed::<8>(y, a, x),
        10 => fixed::<10>(y, a, x),
        16 => fixed::<16>(y, a, x),
        32 => fixed::<32>(y, a, x),
        _ => {
            for (yv, &xv) in y.iter_mut().zip(x) {
                *yv += a * xv;
            }
        }
    }
}
