//! Small fixed-size linear algebra helpers (2×2 symmetric problems and the
//! 3×3 systems they induce). Enough for the two-dimensional benchmark; no
//! general-purpose matrix library needed.

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

pub type Mat2<T> = [[T; 2]; 2];
pub type Vec2<T> = [T; 2];

pub fn mat_mul<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut c = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn mat_vec<T: Scalar>(a: &Mat2<T>, v: &Vec2<T>) -> Vec2<T> {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

pub fn mat_add<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn mat_sub<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

pub fn mat_scale<T: Scalar>(a: &Mat2<T>, s: T) -> Mat2<T> {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn transpose<T: Scalar>(a: &Mat2<T>) -> Mat2<T> {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn symmetrize<T: Scalar>(a: &Mat2<T>) -> Mat2<T> {
    let half = real::<T>(0.5);
    let off = (a[0][1] + a[1][0]) * half;
    [[a[0][0], off], [off, a[1][1]]]
}

pub fn frobenius<T: Scalar>(a: &Mat2<T>) -> T {
    (a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1]).sqrt()
}

pub fn identity<T: Scalar>() -> Mat2<T> {
    [[T::one(), T::zero()], [T::zero(), T::one()]]
}

pub fn determinant<T: Scalar>(a: &Mat2<T>) -> T {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn inverse<T: Scalar>(a: &Mat2<T>) -> Result<Mat2<T>> {
    let det = determinant(a);
    if det.abs() < real(1e-14) {
        return Err(Error::SingularCovariance);
    }
    let inv = T::one() / det;
    Ok([
        [a[1][1] * inv, -a[0][1] * inv],
        [-a[1][0] * inv, a[0][0] * inv],
    ])
}

/// Solve `A x = b` for 2×2 `A`.
pub fn solve2<T: Scalar>(a: &Mat2<T>, b: &Vec2<T>) -> Result<Vec2<T>> {
    Ok(mat_vec(&inverse(a)?, b))
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym_eigenvalues<T: Scalar>(a: &Mat2<T>) -> Vec2<T> {
    let half = real::<T>(0.5);
    let tr = a[0][0] + a[1][1];
    let det = determinant(a);
    let disc = (tr * tr * half * half - det).max(T::zero()).sqrt();
    [tr * half - disc, tr * half + disc]
}

pub fn is_positive_definite<T: Scalar>(a: &Mat2<T>) -> bool {
    let ev = sym_eigenvalues(a);
    ev[0] > T::zero()
}

/// Cholesky factor `L` (lower triangular) of a symmetric positive-definite
/// 2×2 matrix: `A = L Lᵀ`.
pub fn cholesky2<T: Scalar>(a: &Mat2<T>) -> Result<Mat2<T>> {
    if a[0][0] <= T::zero() {
        return Err(Error::SingularCovariance);
    }
    let l11 = a[0][0].sqrt();
    let l21 = a[1][0] / l11;
    let rest = a[1][1] - l21 * l21;
    if rest <= T::zero() {
        return Err(Error::SingularCovariance);
    }
    Ok([[l11, T::zero()], [l21, rest.sqrt()]])
}

/// Solve the symmetric Lyapunov equation `A X + X A = Q` for symmetric `X`,
/// with `A` symmetric. Reduces to a 3×3 linear system in
/// `(x₁₁, x₁₂, x₂₂)`.
pub fn solve_lyapunov_sym<T: Scalar>(a: &Mat2<T>, q: &Mat2<T>) -> Result<Mat2<T>> {
    let two = real::<T>(2.0);
    let m = [
        [two * a[0][0], two * a[0][1], T::zero()],
        [a[1][0], a[0][0] + a[1][1], a[0][1]],
        [T::zero(), two * a[1][0], two * a[1][1]],
    ];
    let rhs = [q[0][0], q[0][1], q[1][1]];
    let x = solve3(&m, &rhs)?;
    Ok([[x[0], x[1]], [x[1], x[2]]])
}

/// Gaussian elimination with partial pivoting on a 3×3 system.
pub fn solve3<T: Scalar>(a: &[[T; 3]; 3], b: &[T; 3]) -> Result<[T; 3]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| {
                m[i][col]
                    .abs()
                    .partial_cmp(&m[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if m[piv][col].abs() < real(1e-14) {
            return Err(Error::SingularCovariance);
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..3 {
                    m[r][c] = m[r][c] - f * m[col][c];
                }
                rhs[r] = rhs[r] - f * rhs[col];
            }
        }
    }
    Ok([rhs[0] / m[0][0], rhs[1] / m[1][1], rhs[2] / m[2][2]])
}
