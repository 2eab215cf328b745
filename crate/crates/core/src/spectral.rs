//! Dense linear algebra: balance symmetrisation, cyclic Jacobi
//! eigendecomposition, spectra with multiplicities, heat semigroups and
//! pivoted Gaussian elimination.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::OperatorMatrix;

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ A`.
    pub fn vecmat(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scale(-1.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `max |A - Aᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        d
    }

    /// Principal submatrix on the given indices.
    pub fn submatrix(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    /// `diag(l) · A · diag(r)`.
    pub fn scale_rows_cols(&self, l: &[f64], r: &[f64]) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for (j, x) in out.row_mut(i).iter_mut().enumerate() {
                *x *= l[i] * r[j];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone)]
pub struct Balanced {
    pub s: Matrix,
    /// Diagonal of `D`.
    pub weights: Vec<f64>,
    pub defect: f64,
}

/// `S = D L D^-1` with `D = diag(weights)`.
pub fn symmetrize_balance(l: &Matrix, weights: &[f64]) -> Result<Balanced> {
    if !l.is_square() || weights.len() != l.rows() {
        return Err(Error::invalid("balance weights must match a square matrix"));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!("balance weight {w} is not positive")));
    }
    let inv: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
    let s = l.scale_rows_cols(weights, &inv);
    let defect = s.symmetry_defect();
    Ok(Balanced {
        s,
        weights: weights.to_vec(),
        defect,
    })
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: Matrix,
    /// Jacobi sweeps after the warm start.
    pub sweeps: usize,
    /// Off-diagonal Frobenius mass at termination.
    pub off_diagonal: f64,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    /// `V f(Λ) Vᵀ`.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = self.vectors.scale_rows_cols(&vec![1.0; n], &fl);
        scaled.matmul(&self.vectors.transpose())
    }
}

pub const MAX_SWEEPS: usize = 60;

/// Default termination threshold for the off-diagonal Frobenius mass.
pub fn default_tolerance(s: &Matrix) -> f64 {
    1e-13 * s.frobenius().max(1.0)
}

fn off_mass(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            acc += a[(i, j)] * a[(i, j)];
        }
    }
    (2.0 * acc).sqrt()
}

/// Householder/QR eigenvectors as rows, or `None` when QR stalls.
fn warm_start(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let eig = nalgebra::SymmetricEigen::try_new(DMatrix::from_row_slice(n, n, a.as_slice()), f64::EPSILON, 1000 * n)?;
    let q = eig.eigenvectors.transpose();
    Some(Matrix::from_rows(
        &(0..n).map(|i| q.row(i).iter().copied().collect()).collect::<Vec<_>>(),
    ))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix, started from the
/// Householder/QR basis so that large inputs need few sweeps. Terminates
/// once the off-diagonal Frobenius mass is at most `tol`.
pub fn eig_symmetric(s: &Matrix, tol: f64) -> Result<SymmetricEigen> {
    if !s.is_square() {
        return Err(Error::invalid("eigendecomposition needs a square matrix"));
    }
    let n = s.rows();
    let scale = s.max_abs().max(1.0);
    let defect = s.symmetry_defect();
    if defect > 1e-10 * scale {
        return Err(Error::invalid(format!("matrix is not symmetric (defect {defect:e})")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }

    // symmetrise exactly so rounding in the input cannot bias rotations
    let mut a = s.clone();
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    // eigenvectors are kept as rows of vt; the loop keeps a = vt·S·vtᵀ
    let mut vt = Matrix::identity(n);
    let mut off = off_mass(&a);
    if off > tol {
        if let Some(q) = warm_start(&a) {
            let mut b = q.matmul(&a).matmul(&q.transpose());
            for i in 0..n {
                for j in i + 1..n {
                    let m = 0.5 * (b[(i, j)] + b[(j, i)]);
                    b[(i, j)] = m;
                    b[(j, i)] = m;
                }
            }
            a = b;
            vt = q;
            off = off_mass(&a);
        }
    }
    // entries below this stay unrotated; together they carry at most tol / 2
    let skip = tol / (2.0 * n.max(1) as f64);

    let mut sweeps = 0;
    while off > tol {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= skip {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(p, k)];
                    let akq = a[(q, k)];
                    let np = c * akp - sn * akq;
                    let nq = sn * akp + c * akq;
                    a[(p, k)] = np;
                    a[(k, p)] = np;
                    a[(q, k)] = nq;
                    a[(k, q)] = nq;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vp = vt[(p, k)];
                    let vq = vt[(q, k)];
                    vt[(p, k)] = c * vp - sn * vq;
                    vt[(q, k)] = sn * vp + c * vq;
                }
            }
        }
        off = off_mass(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = vt[(i, k)];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
        off_diagonal: off,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenGroup {
    pub value: f64,
    pub multiplicity: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Ascending, with repetition.
    pub eigenvalues: Vec<f64>,
    /// `‖S v - λ v‖` per pair for the balanced symmetric matrix `S`.
    pub residuals: Vec<f64>,
    pub groups: Vec<EigenGroup>,
    /// Gap below which eigenvalues share a group.
    pub tolerance: f64,
    pub balance_defect: f64,
}

impl SpectrumReport {
    pub fn multiplicities(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.multiplicity).collect()
    }

    /// Multiplicity of the eigenvalue 0, using the grouping tolerance.
    pub fn zero_multiplicity(&self) -> usize {
        let gtol = grouping_tolerance(&self.eigenvalues);
        self.eigenvalues.iter().filter(|l| l.abs() <= gtol).count()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

fn grouping_tolerance(values: &[f64]) -> f64 {
    1e-8 * values.iter().fold(1.0f64, |m, l| m.max(l.abs()))
}

/// Groups ascending values whose consecutive gaps stay within the relative
/// grouping tolerance.
pub fn group_eigenvalues(values: &[f64], residuals: &[f64]) -> Vec<EigenGroup> {
    let gtol = grouping_tolerance(values);
    let mut groups: Vec<EigenGroup> = Vec::new();
    let mut start = 0;
    for i in 0..values.len() {
        let last = i + 1 == values.len() || values[i + 1] - values[i] > gtol;
        if last {
            let vs = &values[start..=i];
            groups.push(EigenGroup {
                value: vs.iter().sum::<f64>() / vs.len() as f64,
                multiplicity: vs.len(),
                max_residual: residuals[start..=i].iter().fold(0.0, |m: f64, r| m.max(*r)),
            });
            start = i + 1;
        }
    }
    groups
}

/// Balanced spectrum of an operator. Fails when an eigenvalue falls below
/// `-1e-10` (relative to the matrix scale).
pub fn spectrum(l: &OperatorMatrix) -> Result<SpectrumReport> {
    let report = spectrum_unchecked(l)?;
    let floor = -1e-10 * report.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if report.min() < floor {
        return Err(Error::NegativeSpectrum { value: report.min() });
    }
    Ok(report)
}

/// Balanced spectrum without the sign check.
pub fn spectrum_unchecked(l: &OperatorMatrix) -> Result<SpectrumReport> {
    let bal = symmetrize_balance(&l.entries, &l.balance)?;
    let eig = eig_symmetric(&bal.s, default_tolerance(&bal.s))?;
    let residuals = eigen_residuals(&bal.s, &eig);
    let groups = group_eigenvalues(&eig.values, &residuals);
    Ok(SpectrumReport {
        tolerance: grouping_tolerance(&eig.values),
        eigenvalues: eig.values,
        residuals,
        groups,
        balance_defect: bal.defect,
    })
}

pub fn eigen_residuals(s: &Matrix, eig: &SymmetricEigen) -> Vec<f64> {
    (0..eig.values.len())
        .map(|k| {
            let v = eig.vector(k);
            let sv = s.matvec(&v);
            sv.iter()
                .zip(&v)
                .map(|(a, b)| (a - eig.values[k] * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Functional calculus for a balance-symmetrisable generator:
/// `f(L) = D^-1 V f(Λ) Vᵀ D`.
#[derive(Debug, Clone)]
pub struct HeatSemigroup {
    weights: Vec<f64>,
    eig: SymmetricEigen,
}

impl HeatSemigroup {
    pub fn new(l: &OperatorMatrix) -> Result<Self> {
        Self::from_matrix(&l.entries, &l.balance)
    }

    pub fn from_matrix(l: &Matrix, weights: &[f64]) -> Result<Self> {
        let bal = symmetrize_balance(l, weights)?;
        let eig = eig_symmetric(&bal.s, default_tolerance(&bal.s))?;
        Ok(HeatSemigroup {
            weights: bal.weights,
            eig,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    fn lift(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let inv: Vec<f64> = self.weights.iter().map(|w| 1.0 / w).collect();
        self.eig.apply_function(f).scale_rows_cols(&inv, &self.weights)
    }

    /// `e^{-tL}`.
    pub fn at(&self, t: f64) -> Result<Matrix> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("heat time {t} must be nonnegative")));
        }
        if t == 0.0 {
            return Ok(Matrix::identity(self.weights.len()));
        }
        Ok(self.lift(|l| (-t * l).exp()))
    }

    /// `∫_0^t e^{-τL} dτ`.
    pub fn integral(&self, t: f64) -> Result<Matrix> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("heat time {t} must be nonnegative")));
        }
        Ok(self.lift(|l| {
            let x = l * t;
            if x.abs() < 1e-8 {
                t * (1.0 - x / 2.0 + x * x / 6.0)
            } else {
                -(-x).exp_m1() / l
            }
        }))
    }
}

/// `e^{-tL}` through the balanced eigendecomposition.
pub fn heat_operator(l: &OperatorMatrix, t: f64) -> Result<Matrix> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("heat time {t} must be nonnegative")));
    }
    HeatSemigroup::new(l)?.at(t)
}

/// Relative pivot threshold below which a matrix is declared singular.
pub const PIVOT_THRESHOLD: f64 = 1e-13;

/// Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() || b.len() != a.rows() {
        return Err(Error::invalid("linear system dimensions do not match"));
    }
    let n = a.rows();
    let scale = a.max_abs();
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv, pval) =
            (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pval > PIVOT_THRESHOLD * scale) || scale == 0.0 {
            return Err(Error::Singular {
                column: col,
                pivot: pval.max(0.0),
                scale,
            });
        }
        if piv != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(piv, k)];
                m[(piv, k)] = tmp;
            }
            x.swap(col, piv);
        }
        let d = m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[(r, k)] -= f * m[(col, k)];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[(col, k)] * x[k];
        }
        x[col] = acc / m[(col, col)];
    }
    Ok(x)
}

/// `‖Ax - b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_residual(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let scale = a.max_abs();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > PIVOT_THRESHOLD * scale) {
            return Err(Error::Singular {
                column: j,
                pivot: d,
                scale,
            });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Inverse of a lower triangular matrix.
pub fn lower_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = s / l[(i, i)];
        }
    }
    inv
}

/// Eigenvalues of the symmetric-definite pencil `A v = λ B v`, ascending.
pub fn generalized_eigenvalues(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    let l = cholesky(b)?;
    let li = lower_inverse(&l);
    let mut c = li.matmul(a).matmul(&li.transpose());
    let n = c.rows();
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = m;
            c[(j, i)] = m;
        }
    }
    Ok(eig_symmetric(&c, default_tolerance(&c))?.values)
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    let g = a.transpose().matmul(a);
    let mut g2 = g.clone();
    let n = g.rows();
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (g[(i, j)] + g[(j, i)]);
            g2[(i, j)] = m;
            g2[(j, i)] = m;
        }
    }
    let vals = eig_symmetric(&g2, default_tolerance(&g2))?.values;
    Ok(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Smallest eigenvalue of the symmetric part of `L` in the inner product
/// `⟨u, v⟩ = Σ w_i u_i v_i`.
pub fn weighted_symmetric_min(l: &Matrix, w: &[f64]) -> Result<f64> {
    let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let inv: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
    let c = l.scale_rows_cols(&s, &inv);
    let sym = c.add(&c.transpose()).scale(0.5);
    Ok(eig_symmetric(&sym, default_tolerance(&sym))?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let s = Matrix::from_rows(&[vec![3.0, 1.5], vec![1.5, 3.0]]);
        let e = eig_symmetric(&s, 1e-14).unwrap();
        assert!((e.values[0] - 1.5).abs() < 1e-14);
        assert!((e.values[1] - 4.5).abs() < 1e-14);
    }

    #[test]
    fn diagonal_input_is_fixed() {
        let s = Matrix::from_diagonal(&[2.0, -1.0, 5.0]);
        let e = eig_symmetric(&s, 1e-14).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 5.0]);
        assert_eq!(e.sweeps, 0);
        for k in 0..3 {
            assert_eq!(e.vector(k).iter().map(|x| x.abs()).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let s = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(eig_symmetric(&s, 1e-12), Err(Error::Validation(_))));
    }

    #[test]
    fn identity_weights_keep_symmetric_input() {
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let b = symmetrize_balance(&s, &[1.0, 1.0]).unwrap();
        assert_eq!(b.s, s);
        assert_eq!(b.defect, 0.0);
        assert!(symmetrize_balance(&s, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn solves_and_detects_singularity() {
        let i = Matrix::identity(3);
        assert_eq!(solve_linear(&i, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let z = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]);
        assert!(matches!(solve_linear(&z, &[1.0, 1.0]), Err(Error::Singular { .. })));
        let a = Matrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let b = [1.0, -2.0, 0.5];
        let x = solve_linear(&a, &b).unwrap();
        assert!(relative_residual(&a, &x, &b) < 1e-15);
    }

    #[test]
    fn grouping() {
        let g = group_eigenvalues(&[0.0, 1e-12, 1.0, 1.0 + 1e-10, 2.0], &[0.0; 5]);
        assert_eq!(g.iter().map(|g| g.multiplicity).collect::<Vec<_>>(), vec![2, 2, 1]);
    }

    #[test]
    fn generalized_pencil() {
        let a = Matrix::from_diagonal(&[2.0, 6.0]);
        let b = Matrix::from_diagonal(&[1.0, 2.0]);
        let v = generalized_eigenvalues(&a, &b).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
    }
}
