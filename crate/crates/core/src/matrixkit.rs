//! Small dense linear algebra over exact rationals, with an `f64` mirror.
//!
//! Everything here is sized for information matrices of a handful of
//! treatments: no blocking, no sparsity. The exact path uses Gauss–Jordan
//! elimination and a full-rank factorization for the Moore–Penrose inverse;
//! the float path goes through a symmetric eigendecomposition.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{int, to_f64, Rational};

/// Relative eigenvalue cutoff below which a float eigenvalue counts as zero.
pub const RANK_CUTOFF: f64 = 1e-10;
/// Relative tolerance for float complete-symmetry fits.
pub const SYMMETRY_FIT_TOL: f64 = 1e-9;
const FLOAT_ASYMMETRY_TOL: f64 = 1e-12;

/// Dense row-major matrix of exact rationals.
#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix { rows, cols, data: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { Rational::one() } else { Rational::zero() })
    }

    /// The all-ones matrix J.
    pub fn ones(rows: usize, cols: usize) -> Self {
        RatMatrix { rows, cols, data: vec![Rational::one(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RatMatrix { rows, cols, data }
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged matrix rows");
        Self::from_fn(n, m, |i, j| int(rows[i][j]))
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

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn trace(&self) -> Rational {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].clone()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn row_sums(&self) -> Vec<Rational> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)].clone()).sum()).collect()
    }

    pub fn max_abs(&self) -> Rational {
        self.data.iter().map(|x| x.abs()).max().unwrap_or_else(Rational::zero)
    }

    pub fn submatrix(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        assert!(row0 + rows <= self.rows && col0 + cols <= self.cols);
        Self::from_fn(rows, cols, |i, j| self[(row0 + i, col0 + j)].clone())
    }

    /// Columns of `self` followed by columns of `other`.
    pub fn hstack(&self, other: &RatMatrix) -> Self {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        })
    }

    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self::from_fn(self.rows, columns.len(), |i, j| self[(i, columns[j])].clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |i, j| self[(rows[i], j)].clone())
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (RatMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| !m[(r, col)].is_zero()) else {
                continue;
            };
            m.swap_rows(row, p);
            let inv = m[(row, col)].recip();
            for j in col..m.cols {
                let v = &m[(row, j)] * &inv;
                m[(row, j)] = v;
            }
            for r in 0..m.rows {
                if r == row || m[(r, col)].is_zero() {
                    continue;
                }
                let factor = m[(r, col)].clone();
                for j in col..m.cols {
                    let v = &m[(row, j)] * &factor;
                    m[(r, j)] -= v;
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Exact inverse of a nonsingular square matrix.
    pub fn inverse(&self) -> Option<RatMatrix> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let (reduced, pivots) = self.hstack(&RatMatrix::identity(n)).rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(reduced.submatrix(0, n, n, n))
    }

    /// Moore–Penrose inverse via a full-rank factorization `A = F G`:
    /// `A⁺ = G′(GG′)⁻¹(F′F)⁻¹F′`.
    pub fn pinv(&self) -> RatMatrix {
        let (reduced, pivots) = self.rref();
        let r = pivots.len();
        if r == 0 {
            return RatMatrix::zeros(self.cols, self.rows);
        }
        let f = self.select_columns(&pivots);
        let g = reduced.submatrix(0, 0, r, self.cols);
        let gt = g.transpose();
        let ft = f.transpose();
        let ggt_inv = (&g * &gt).inverse().expect("G has full row rank");
        let ftf_inv = (&ft * &f).inverse().expect("F has full column rank");
        &(&(&gt * &ggt_inv) * &ftf_inv) * &ft
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| to_f64(&self[(i, j)]))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl Index<(usize, usize)> for RatMatrix {
    type Output = Rational;

    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &RatMatrix {
    type Output = RatMatrix;

    fn mul(self, rhs: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = RatMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = &self[(i, l)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(l, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }
}

impl Add for &RatMatrix {
    type Output = RatMatrix;

    fn add(self, rhs: &RatMatrix) -> RatMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &RatMatrix {
    type Output = RatMatrix;

    fn sub(self, rhs: &RatMatrix) -> RatMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &RatMatrix {
    type Output = RatMatrix;

    fn neg(self) -> RatMatrix {
        self.scale(&-Rational::one())
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RatMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// A symmetric matrix carried either exactly or in floating point.
#[derive(Clone, Debug, PartialEq)]
pub enum SymMatrix {
    Exact(RatMatrix),
    Float(DMatrix<f64>),
}

impl SymMatrix {
    pub fn exact(m: RatMatrix) -> Result<Self> {
        if !m.is_symmetric() {
            return Err(Error::Domain("matrix is not symmetric".into()));
        }
        Ok(SymMatrix::Exact(m))
    }

    pub fn float(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Domain("matrix is not square".into()));
        }
        let scale = m.amax();
        let asym = (&m - m.transpose()).amax();
        if asym > FLOAT_ASYMMETRY_TOL * scale {
            return Err(Error::Domain(format!("matrix asymmetry {asym:e} exceeds tolerance")));
        }
        Ok(SymMatrix::Float(m))
    }

    pub fn order(&self) -> usize {
        match self {
            SymMatrix::Exact(m) => m.rows(),
            SymMatrix::Float(m) => m.nrows(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, SymMatrix::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&RatMatrix> {
        match self {
            SymMatrix::Exact(m) => Some(m),
            SymMatrix::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        match self {
            SymMatrix::Exact(m) => m.to_f64(),
            SymMatrix::Float(m) => m.clone(),
        }
    }
}

/// Exact positive-semidefiniteness test by symmetric elimination: a zero
/// pivot must have a zero row, and every pivot must be nonnegative.
pub fn is_psd_exact(m: &RatMatrix) -> bool {
    if !m.is_symmetric() {
        return false;
    }
    let n = m.rows();
    let mut a = m.clone();
    for p in 0..n {
        let pivot = a[(p, p)].clone();
        if pivot.is_negative() {
            return false;
        }
        if pivot.is_zero() {
            if (p + 1..n).any(|j| !a[(p, j)].is_zero()) {
                return false;
            }
            continue;
        }
        for i in p + 1..n {
            if a[(i, p)].is_zero() {
                continue;
            }
            let factor = &a[(i, p)] / &pivot;
            for j in p + 1..n {
                let v = &factor * &a[(p, j)];
                a[(i, j)] -= v;
            }
        }
    }
    true
}

/// Centering matrix `I − J/n`.
pub fn q_matrix(n: usize) -> SymMatrix {
    SymMatrix::Exact(q_exact(n))
}

pub(crate) fn q_exact(n: usize) -> RatMatrix {
    assert!(n >= 1, "centering matrix needs order >= 1");
    let off = Rational::new((-1).into(), (n as i64).into());
    let diag = Rational::one() + &off;
    RatMatrix::from_fn(n, n, |i, j| if i == j { diag.clone() } else { off.clone() })
}

/// Orthogonal projector `A (A′A)⁺ A′` onto the column span of `A`.
pub fn projector(a: &RatMatrix) -> SymMatrix {
    SymMatrix::Exact(projector_exact(a))
}

pub(crate) fn projector_exact(a: &RatMatrix) -> RatMatrix {
    let at = a.transpose();
    let gram_pinv = (&at * a).pinv();
    &(a * &gram_pinv) * &at
}

pub fn projector_f64(a: &DMatrix<f64>) -> SymMatrix {
    let gram = a.transpose() * a;
    let p = a * pinv_f64(&gram) * a.transpose();
    SymMatrix::Float((&p + p.transpose()) * 0.5)
}

/// Moore–Penrose inverse of a symmetric matrix, in the mode of its input.
pub fn pinv_sym(m: &SymMatrix) -> SymMatrix {
    match m {
        SymMatrix::Exact(x) => SymMatrix::Exact(x.pinv()),
        SymMatrix::Float(x) => SymMatrix::Float(pinv_f64(x)),
    }
}

pub(crate) fn pinv_f64(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.amax();
    let cutoff = RANK_CUTOFF * max;
    let mut out = DMatrix::zeros(n, n);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cutoff || max == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        out += (v * v.transpose()) / lambda;
    }
    out
}

/// Eigenvalues in ascending order.
pub fn eig_sym(m: &SymMatrix) -> Vec<f64> {
    let x = m.to_f64();
    if x.nrows() == 0 {
        return Vec::new();
    }
    let sym = (&x + x.transpose()) * 0.5;
    let mut values: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Outcome of fitting `aI + bJ` to a symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CompleteSymmetry {
    pub is_completely_symmetric: bool,
    pub a: f64,
    pub b: f64,
    /// Exact fitted coefficients, in rational mode.
    pub exact: Option<(Rational, Rational)>,
}

pub fn complete_symmetry(m: &SymMatrix) -> CompleteSymmetry {
    match m {
        SymMatrix::Exact(x) => {
            let (flag, a, b) = complete_symmetry_exact(x);
            CompleteSymmetry { is_completely_symmetric: flag, a: to_f64(&a), b: to_f64(&b), exact: Some((a, b)) }
        }
        SymMatrix::Float(x) => {
            let n = x.nrows();
            let off_count = n * n - n;
            let b = if off_count == 0 {
                0.0
            } else {
                (x.sum() - x.trace()) / off_count as f64
            };
            let a = x.trace() / n as f64 - b;
            let mut dev: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let fit = if i == j { a + b } else { b };
                    dev = dev.max((x[(i, j)] - fit).abs());
                }
            }
            let flag = dev <= SYMMETRY_FIT_TOL * x.amax().max(1.0);
            CompleteSymmetry { is_completely_symmetric: flag, a, b, exact: None }
        }
    }
}

/// Exact test for `M = aI + bJ`; returns the fitted `(a, b)` either way.
pub fn complete_symmetry_exact(m: &RatMatrix) -> (bool, Rational, Rational) {
    let n = m.rows();
    let mut off_sum = Rational::zero();
    let mut diag_sum = Rational::zero();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                diag_sum += &m[(i, j)];
            } else {
                off_sum += &m[(i, j)];
            }
        }
    }
    let b = if n > 1 { off_sum / int((n * n - n) as i64) } else { Rational::zero() };
    let a = diag_sum / int(n.max(1) as i64) - &b;
    let diag = &a + &b;
    let flag = m.is_square()
        && (0..n).all(|i| (0..n).all(|j| if i == j { m[(i, j)] == diag } else { m[(i, j)] == b }));
    (flag, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn scaled_q(n: usize, s: Rational) -> RatMatrix {
        q_exact(n).scale(&s)
    }

    #[test]
    fn q_small_orders() {
        assert_eq!(q_exact(1), RatMatrix::from_i64_rows(&[vec![0]]));
        let q2 = q_exact(2);
        assert_eq!(q2[(0, 0)], rat(1, 2));
        assert_eq!(q2[(0, 1)], rat(-1, 2));
        let q5 = q_exact(5);
        assert_eq!(q5[(2, 2)], rat(4, 5));
        assert_eq!(q5[(2, 3)], rat(-1, 5));
        assert_eq!(&q5 * &q5, q5);
        assert!(q5.row_sums().iter().all(Zero::is_zero));
    }

    #[test]
    fn projector_onto_constants_and_identity() {
        let ones = RatMatrix::ones(4, 1);
        let p = projector_exact(&ones);
        assert_eq!(p, RatMatrix::ones(4, 4).scale(&rat(1, 4)));
        assert_eq!(projector_exact(&RatMatrix::identity(3)), RatMatrix::identity(3));
    }

    #[test]
    fn pinv_of_scaled_centering() {
        let m = scaled_q(5, rat(3, 2));
        assert_eq!(m.pinv(), scaled_q(5, rat(2, 3)));
        assert_eq!(RatMatrix::zeros(3, 3).pinv(), RatMatrix::zeros(3, 3));
        let f = pinv_f64(&m.to_f64());
        assert!((f - scaled_q(5, rat(2, 3)).to_f64()).amax() < 1e-12);
    }

    #[test]
    fn pinv_rectangular_penrose() {
        let a = RatMatrix::from_i64_rows(&[vec![1, 2, 3], vec![2, 4, 6], vec![1, 0, 1], vec![0, 2, 2]]);
        let p = a.pinv();
        assert_eq!(&(&a * &p) * &a, a);
        assert_eq!(&(&p * &a) * &p, p);
        assert!((&a * &p).is_symmetric());
        assert!((&p * &a).is_symmetric());
    }

    #[test]
    fn eigenvalues_of_scaled_centering() {
        let ev = eig_sym(&SymMatrix::Exact(scaled_q(5, rat(3, 2))));
        assert_eq!(ev.len(), 5);
        assert!(ev[0].abs() < 1e-12);
        for &l in &ev[1..] {
            assert!((l - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_symmetry_cases() {
        let m = SymMatrix::Exact(scaled_q(5, rat(3, 2)));
        let cs = complete_symmetry(&m);
        assert!(cs.is_completely_symmetric);
        assert_eq!(cs.exact, Some((rat(3, 2), rat(-3, 10))));

        let d = RatMatrix::from_i64_rows(&[vec![1, 0], vec![0, 2]]);
        assert!(!complete_symmetry_exact(&d).0);
        assert!(!complete_symmetry(&SymMatrix::Float(d.to_f64())).is_completely_symmetric);

        let (flag, a, b) = complete_symmetry_exact(&RatMatrix::ones(3, 3));
        assert!(flag);
        assert_eq!((a, b), (int(0), int(1)));
        let f = complete_symmetry(&SymMatrix::Float(DMatrix::from_element(3, 3, 1.0)));
        assert!(f.is_completely_symmetric && f.a.abs() < 1e-15 && (f.b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn float_symmetry_validation() {
        let mut m = DMatrix::<f64>::identity(3, 3);
        assert!(SymMatrix::float(m.clone()).is_ok());
        m[(0, 1)] = 1e-3;
        assert!(SymMatrix::float(m).is_err());
        assert!(SymMatrix::exact(RatMatrix::from_i64_rows(&[vec![1, 2], vec![3, 4]])).is_err());
    }

    #[test]
    fn psd_exact_cases() {
        assert!(is_psd_exact(&q_exact(4)));
        assert!(is_psd_exact(&RatMatrix::zeros(3, 3)));
        assert!(!is_psd_exact(&RatMatrix::from_i64_rows(&[vec![1, 2], vec![2, 1]])));
        assert!(!is_psd_exact(&RatMatrix::from_i64_rows(&[vec![0, 1], vec![1, 5]])));
        assert!(is_psd_exact(&RatMatrix::from_i64_rows(&[vec![1, 1], vec![1, 1]])));
    }

    #[test]
    fn inverse_detects_singularity() {
        assert!(RatMatrix::ones(2, 2).inverse().is_none());
        let m = RatMatrix::from_i64_rows(&[vec![2, 1], vec![1, 1]]);
        assert_eq!(&m * &m.inverse().unwrap(), RatMatrix::identity(2));
    }
}
