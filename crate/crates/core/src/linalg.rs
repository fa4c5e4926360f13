//! Small dense linear-algebra helpers: exact integer null spaces, SVD ranks,
//! symmetric square roots and staged least squares.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};

type Q = Ratio<i64>;

/// Null space of an integer matrix, computed with exact rational arithmetic.
///
/// `rows` are the matrix rows, each of length `ncols`. Returns one basis
/// vector per free column of the reduced row echelon form, scaled to
/// coprime integers with a positive pivot-free entry.
pub fn exact_null_space(rows: &[Vec<i64>], ncols: usize) -> Vec<Vec<i64>> {
    let (rref, pivots) = rref(rows, ncols);
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Q::zero(); ncols];
        v[free] = Q::from_integer(1);
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -rref[r][free];
        }
        basis.push(to_integers(&v));
    }
    basis
}

/// Rank of an integer matrix, exact.
pub fn exact_rank(rows: &[Vec<i64>], ncols: usize) -> usize {
    rref(rows, ncols).1.len()
}

fn rref(rows: &[Vec<i64>], ncols: usize) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut a: Vec<Vec<Q>> = rows
        .iter()
        .map(|r| {
            debug_assert_eq!(r.len(), ncols);
            r.iter().map(|&x| Q::from_integer(x)).collect()
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row == a.len() {
            break;
        }
        let Some(p) = (row..a.len()).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].recip();
        for x in a[row].iter_mut() {
            *x *= inv;
        }
        let pivot_row = a[row].clone();
        for (r, target) in a.iter_mut().enumerate() {
            if r != row && !target[col].is_zero() {
                let f = target[col];
                for (t, p) in target.iter_mut().zip(&pivot_row) {
                    *t -= f * p;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    a.truncate(pivots.len());
    (a, pivots)
}

fn to_integers(v: &[Q]) -> Vec<i64> {
    let den = v.iter().fold(1i64, |acc, x| acc.lcm(x.denom()));
    let mut out: Vec<i64> = v.iter().map(|x| (*x * den).to_integer()).collect();
    let g = out.iter().fold(0i64, |acc, x| acc.gcd(x));
    if g > 1 {
        out.iter_mut().for_each(|x| *x /= g);
    }
    if let Some(first) = out.iter().find(|x| **x != 0) {
        if first.is_negative() {
            out.iter_mut().for_each(|x| *x = -*x);
        }
    }
    out
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: singular values above `rel_tol * σ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&max) = s.first() else { return 0 };
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * max).count()
}

/// Symmetric positive-semidefinite square root via eigendecomposition.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Maximum relative asymmetry `max|A - Aᵀ| / max|A|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

/// Minimum-norm least-squares solution of `A x = b` plus an orthonormal basis
/// of `ker A` (as columns).
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: DVector<f64>,
    pub null_basis: DMatrix<f64>,
    /// `‖A x − b‖`.
    pub residual: f64,
}

/// Solves `A x = b` in the least-squares sense, returning the minimum-norm
/// solution. Singular values below `rel_tol * σ_max` are treated as zero.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> LeastSquares {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return LeastSquares {
            solution: DVector::zeros(n),
            null_basis: DMatrix::identity(n, n),
            residual: b.norm(),
        };
    }
    // Pad to at least n rows so the SVD yields a full right basis.
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let mut bp = DVector::zeros(rows);
    bp.rows_mut(0, a.nrows()).copy_from(b);

    let svd = padded.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let tol = rel_tol * smax;
    let mut x = DVector::zeros(n);
    let mut null_cols = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let v = vt.row(i).transpose();
        if s > tol && smax > 0.0 {
            let coef = u.column(i).dot(&bp) / s;
            x += v * coef;
        } else {
            null_cols.push(v);
        }
    }
    let null_basis = if null_cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    let residual = (a * &x - b).norm();
    LeastSquares {
        solution: x,
        null_basis,
        residual,
    }
}

/// Two-stage least squares: satisfy `A₁x ≈ b₁` first, then use the remaining
/// freedom to fit `A₂x ≈ b₂`, then take the minimum-norm point. The residual
/// reported is that of the first stage.
pub fn staged_least_squares(
    primary: (&DMatrix<f64>, &DVector<f64>),
    secondary: (&DMatrix<f64>, &DVector<f64>),
    rel_tol: f64,
) -> LeastSquares {
    let first = least_squares(primary.0, primary.1, rel_tol);
    let (a2, b2) = secondary;
    if a2.nrows() == 0 || first.null_basis.ncols() == 0 {
        return first;
    }
    let target = b2 - a2 * &first.solution;
    let reduced = a2 * &first.null_basis;
    let second = least_squares(&reduced, &target, rel_tol);
    let solution = &first.solution + &first.null_basis * &second.solution;
    let null_basis = &first.null_basis * &second.null_basis;
    LeastSquares {
        residual: (primary.0 * &solution - primary.1).norm(),
        solution,
        null_basis,
    }
}
