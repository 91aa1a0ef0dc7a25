//! Dense complex solves with a near-singularity guard.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// LU factorization that refuses (and reports the smallest singular value of) numerically
/// singular matrices.
pub struct Factored {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Relative threshold below which a solve is declared near-singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

impl Factored {
    pub fn new(a: CMat) -> Result<Factored> {
        let lu = a.clone().lu();
        let u = lu.u();
        let mut dmin = f64::INFINITY;
        let mut dmax: f64 = 0.0;
        for i in 0..u.nrows() {
            let d = u[(i, i)].norm();
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        if !(dmin > SINGULAR_RTOL * dmax) || !dmin.is_finite() {
            // pivots are only a proxy; confirm with the singular values before failing
            let sv = a.singular_values();
            let smax = sv.max();
            let smin = sv.min();
            if !(smin > SINGULAR_RTOL * smax) {
                return Err(Error::NearSingular { sigma_min: smin, op_norm: smax });
            }
        }
        Ok(Factored { lu })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let rhs = DVector::from_column_slice(b);
        let x = self.lu.solve(&rhs).expect("factorization checked for singularity");
        x.iter().copied().collect()
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        self.lu.solve(b).expect("factorization checked for singularity")
    }
}

/// Complex matrix times complex vector.
pub fn matvec(a: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    let v = a * DVector::from_column_slice(x);
    v.iter().copied().collect()
}
