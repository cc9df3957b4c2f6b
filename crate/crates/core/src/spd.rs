//! Dense symmetric positive-definite matrices.
//!
//! Every `Γ⁻¹ · X` product in the cost kernels goes through the Cholesky
//! factor held by [`SpdMatrix`]; explicit inverses are only formed for
//! reporting.

use ndarray::{Array1, Array2, ArrayBase, ArrayView1, ArrayView2, Data, Ix2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetric positive-definite matrix together with its lower Cholesky factor.
///
/// Immutable once built; the factor is computed at construction so a value
/// that exists is known to be positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix<T> {
    entries: Array2<T>,
    chol: Array2<T>,
}

impl<T: Real> SpdMatrix<T> {
    /// Symmetrizes `m` as `(m + mᵀ)/2` and factors it.
    pub fn new<S: Data<Elem = T>>(m: &ArrayBase<S, Ix2>) -> Result<Self> {
        let d = square_dim(m.view())?;
        if d == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let half = T::lit(0.5);
        let entries = Array2::from_shape_fn((d, d), |(i, j)| {
            if i == j {
                m[[i, i]]
            } else {
                (m[[i, j]] + m[[j, i]]) * half
            }
        });
        let chol = cholesky(entries.view())?;
        Ok(Self { entries, chol })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            entries: Array2::eye(d),
            chol: Array2::eye(d),
        }
    }

    pub fn from_diag(diag: &[T]) -> Result<Self> {
        Self::new(&Array2::from_diag(&Array1::from(diag.to_vec())))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> ArrayView2<'_, T> {
        self.entries.view()
    }

    /// Lower-triangular `L` with `L·Lᵀ = self`.
    pub fn factor(&self) -> ArrayView2<'_, T> {
        self.chol.view()
    }

    pub fn trace(&self) -> T {
        self.entries.diag().sum()
    }

    /// `ln det(M) = 2 Σ ln L_ii`.
    pub fn logdet(&self) -> T {
        let two = T::lit(2.0);
        self.chol.diag().iter().map(|&l| l.ln()).sum::<T>() * two
    }

    /// Solves `M·X = B` for a `d×k` right-hand side.
    pub fn solve<S: Data<Elem = T>>(&self, b: &ArrayBase<S, Ix2>) -> Result<Array2<T>> {
        let d = self.dim();
        if b.nrows() != d {
            return Err(Error::dim("solve right-hand side rows", d, b.nrows()));
        }
        let mut x = b.to_owned();
        let mut buf = vec![T::zero(); d];
        for mut col in x.columns_mut() {
            buf.iter_mut().zip(col.iter()).for_each(|(b, &c)| *b = c);
            self.solve_in_place(&mut buf);
            col.iter_mut().zip(&buf).for_each(|(c, &b)| *c = b);
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let d = self.dim();
        if b.len() != d {
            return Err(Error::dim("solve right-hand side", d, b.len()));
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(Array1::from(x))
    }

    /// Returns `R·M⁻¹` for an `n×d` matrix whose rows are vectors in the
    /// space of `M` (row `t` becomes `(M⁻¹ r_t)ᵀ` since `M` is symmetric).
    pub fn solve_rows<S: Data<Elem = T>>(&self, r: &ArrayBase<S, Ix2>) -> Result<Array2<T>> {
        let d = self.dim();
        if r.ncols() != d {
            return Err(Error::dim("solve_rows columns", d, r.ncols()));
        }
        let mut x = r.as_standard_layout().into_owned();
        for mut row in x.rows_mut() {
            self.solve_in_place(row.as_slice_mut().expect("standard layout row"));
        }
        Ok(x)
    }

    /// Explicit inverse, symmetrized.
    pub fn inverse(&self) -> Result<Self> {
        let inv = self.solve(&Array2::<T>::eye(self.dim()))?;
        Self::new(&inv)
    }

    /// `c·M` for `c > 0`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be positive, got {c}"
            )));
        }
        Ok(Self {
            entries: &self.entries * c,
            chol: &self.chol * c.sqrt(),
        })
    }

    /// Forward then back substitution against `L` and `Lᵀ`.
    fn solve_in_place(&self, x: &mut [T]) {
        let l = &self.chol;
        let d = x.len();
        for i in 0..d {
            let mut s = x[i];
            for k in 0..i {
                s -= l[[i, k]] * x[k];
            }
            x[i] = s / l[[i, i]];
        }
        for i in (0..d).rev() {
            let mut s = x[i];
            for k in i + 1..d {
                s -= l[[k, i]] * x[k];
            }
            x[i] = s / l[[i, i]];
        }
    }
}

fn square_dim<T>(m: ArrayView2<'_, T>) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::dim("square matrix columns", r, c));
    }
    Ok(r)
}

/// Lower Cholesky factor of a symmetric matrix. Only the lower triangle is read.
///
/// No pivoting or regularization: a non-positive (or non-finite) pivot is
/// reported as [`Error::NotPositiveDefinite`].
pub fn cholesky<T: Real>(m: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let d = square_dim(m)?;
    let mut l = Array2::<T>::zeros((d, d));
    for j in 0..d {
        let mut diag = m[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..d {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// `tr(A·B) = Σᵢⱼ A[i][j]·B[j][i]`.
pub fn trace_product<T: Real>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> Result<T> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    if ac != br {
        return Err(Error::dim("trace_product inner dimension", ac, br));
    }
    if ar != bc {
        return Err(Error::dim("trace_product outer dimension", ar, bc));
    }
    let mut acc = T::zero();
    for i in 0..ar {
        for j in 0..ac {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    Ok(acc)
}
