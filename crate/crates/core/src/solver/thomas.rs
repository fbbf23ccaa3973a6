//! Thomas algorithm for tridiagonal systems.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ThomasError {
    #[error("tridiagonal system is empty")]
    Empty,
    #[error("tridiagonal bands have mismatched lengths")]
    Shape,
    #[error("zero or non-finite pivot at row {0}")]
    ZeroPivot(usize),
}

/// `lower[k] x[k-1] + diag[k] x[k] + upper[k] x[k+1] = rhs[k]`.
///
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Strict row diagonal dominance, ignoring the unused corner entries.
    pub fn is_diagonally_dominant(&self) -> bool {
        let n = self.len();
        (0..n).all(|k| {
            let off = if k > 0 { self.lower[k].abs() } else { 0.0 } + if k + 1 < n { self.upper[k].abs() } else { 0.0 };
            self.diag[k].abs() > off
        })
    }
}

pub fn thomas_solve(sys: &TridiagonalSystem) -> Result<Vec<f64>, ThomasError> {
    let n = sys.len();
    if n == 0 {
        return Err(ThomasError::Empty);
    }
    if sys.lower.len() != n || sys.upper.len() != n || sys.rhs.len() != n {
        return Err(ThomasError::Shape);
    }
    let mut x = sys.rhs.clone();
    let mut scratch = vec![0.0; n];
    solve_in_place(&sys.lower, &sys.diag, &sys.upper, &mut x, &mut scratch)?;
    Ok(x)
}

/// Solves in place: on return `rhs` holds the solution. `scratch` must be at
/// least as long as `rhs`.
#[inline]
pub fn solve_in_place(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) -> Result<(), ThomasError> {
    let n = rhs.len();
    if n == 0 {
        return Err(ThomasError::Empty);
    }
    let (lower, diag, upper, cp) = (&lower[..n], &diag[..n], &upper[..n], &mut scratch[..n]);

    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(ThomasError::ZeroPivot(0));
    }
    cp[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for k in 1..n {
        pivot = diag[k] - lower[k] * cp[k - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(ThomasError::ZeroPivot(k));
        }
        cp[k] = upper[k] / pivot;
        rhs[k] = (rhs[k] - lower[k] * rhs[k - 1]) / pivot;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= cp[k] * rhs[k + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        let b = vec![3.0, -1.0, 2.5, 7.0];
        let sys = TridiagonalSystem {
            lower: vec![0.0; 4],
            diag: vec![1.0; 4],
            upper: vec![0.0; 4],
            rhs: b.clone(),
        };
        assert_eq!(thomas_solve(&sys).unwrap(), b);
    }

    #[test]
    fn three_by_three() {
        let sys = TridiagonalSystem {
            lower: vec![0.0, -1.0, -1.0],
            diag: vec![2.0; 3],
            upper: vec![-1.0, -1.0, 0.0],
            rhs: vec![1.0, 0.0, 1.0],
        };
        let x = thomas_solve(&sys).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_equation() {
        let sys = TridiagonalSystem {
            lower: vec![9.0],
            diag: vec![4.0],
            upper: vec![9.0],
            rhs: vec![2.0],
        };
        assert_eq!(thomas_solve(&sys).unwrap(), vec![0.5]);
    }

    #[test]
    fn errors() {
        let empty = TridiagonalSystem {
            lower: vec![],
            diag: vec![],
            upper: vec![],
            rhs: vec![],
        };
        assert_eq!(thomas_solve(&empty), Err(ThomasError::Empty));
        let singular = TridiagonalSystem {
            lower: vec![0.0, 1.0],
            diag: vec![1.0, 1.0],
            upper: vec![1.0, 0.0],
            rhs: vec![1.0, 1.0],
        };
        assert_eq!(thomas_solve(&singular), Err(ThomasError::ZeroPivot(1)));
        let ragged = TridiagonalSystem {
            lower: vec![0.0],
            ..singular
        };
        assert_eq!(thomas_solve(&ragged), Err(ThomasError::Shape));
    }
}
