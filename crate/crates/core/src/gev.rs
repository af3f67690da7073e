//! Symmetric-definite generalized eigenproblems `L w = rho R w`.
//!
//! The main route whitens with a Cholesky factor of `R + sigma I` and solves a
//! standard symmetric problem. `sigma` is zero when `R` factors cleanly and
//! otherwise climbs a geometric ladder. [`oracle_gev`] is an independent dense
//! route (LU solve plus a Schur decomposition of a non-symmetric matrix) that
//! exists to check the main one.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative symmetry defect tolerated in both matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Largest order accepted by [`oracle_gev`].
pub const ORACLE_MAX_ORDER: usize = 100;

/// `sigma = epsilon * trace(R) / Q`, with `epsilon` starting at
/// `initial_epsilon` and multiplied by `growth` after each failed
/// factorization, up to `cap`. `sigma = 0` is always tried first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationPolicy {
    pub initial_epsilon: f64,
    pub growth: f64,
    pub cap: f64,
}

impl Default for RegularizationPolicy {
    fn default() -> Self {
        Self {
            initial_epsilon: 1e-8,
            growth: 10.0,
            cap: 1e-2,
        }
    }
}

impl RegularizationPolicy {
    /// Candidate values of `epsilon`, including the leading zero.
    pub fn ladder(&self) -> Vec<f64> {
        let mut steps = vec![0.0];
        let mut eps = self.initial_epsilon;
        // the small slack keeps the cap itself on the ladder despite rounding
        while eps <= self.cap * (1.0 + 1e-9) {
            steps.push(eps);
            eps *= self.growth;
        }
        steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GevProblem {
    /// Symmetric left-hand matrix (`C - D` for the correlation family).
    pub lhs: DMatrix<f64>,
    /// Symmetric positive semi-definite right-hand matrix (`D`).
    pub rhs: DMatrix<f64>,
    pub policy: RegularizationPolicy,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

impl GevProblem {
    pub fn new(lhs: DMatrix<f64>, rhs: DMatrix<f64>) -> Result<Self> {
        Self::with_policy(lhs, rhs, RegularizationPolicy::default())
    }

    pub fn with_policy(
        lhs: DMatrix<f64>,
        rhs: DMatrix<f64>,
        policy: RegularizationPolicy,
    ) -> Result<Self> {
        if !lhs.is_square() || !rhs.is_square() || lhs.nrows() != rhs.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "pencil needs two square matrices of one order, got {:?} and {:?}",
                lhs.shape(),
                rhs.shape()
            )));
        }
        if lhs.nrows() == 0 {
            return Err(Error::Empty("pencil of order zero"));
        }
        if lhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("left-hand matrix"));
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("right-hand matrix"));
        }
        for (name, m) in [("left-hand", &lhs), ("right-hand", &rhs)] {
            if symmetry_defect(m) > SYMMETRY_TOLERANCE * max_abs(m) {
                return Err(Error::InvalidData(format!(
                    "{name} matrix is not symmetric"
                )));
            }
        }
        Ok(Self { lhs, rhs, policy })
    }

    pub fn order(&self) -> usize {
        self.lhs.nrows()
    }

    fn sigma_scale(&self) -> f64 {
        let t = self.rhs.trace() / self.order() as f64;
        if t > 0.0 {
            t
        } else {
            1.0
        }
    }

    fn regularized_rhs(&self, sigma: f64) -> DMatrix<f64> {
        let mut r = self.rhs.clone();
        if sigma != 0.0 {
            for i in 0..r.nrows() {
                r[(i, i)] += sigma;
            }
        }
        r
    }

    /// Smallest ladder `sigma` whose shifted `R` has a usable Cholesky factor.
    ///
    /// A factor is usable when every squared pivot is at least `Q * eps` times
    /// the largest diagonal entry; rounding lets a singular matrix pass a bare
    /// Cholesky with pivots at noise level.
    fn factor(&self) -> Result<(f64, Cholesky<f64, Dyn>)> {
        let scale = self.sigma_scale();
        let q = self.order();
        let mut last_sigma = 0.0;
        for eps in self.policy.ladder() {
            let sigma = eps * scale;
            last_sigma = sigma;
            let r = self.regularized_rhs(sigma);
            let max_diag = r.diagonal().iter().fold(0.0_f64, |a, &v| a.max(v));
            if max_diag <= 0.0 {
                continue;
            }
            let Some(chol) = Cholesky::new(r) else {
                continue;
            };
            let floor = q as f64 * f64::EPSILON * max_diag;
            let l = chol.l_dirty();
            if (0..q).all(|i| l[(i, i)] * l[(i, i)] >= floor) {
                return Ok((sigma, chol));
            }
        }
        Err(Error::RegularizationExhausted { last_sigma })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GevSolution {
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Column `j` pairs with `eigenvalues[j]`, normalized so that
    /// `w^T (R + sigma I) w = 1`, with its largest-magnitude entry positive.
    pub eigenvectors: DMatrix<f64>,
    /// `sigma` added to the diagonal of `R`; one value shared by every block.
    pub applied_sigma: f64,
    /// `||L w_j - rho_j (R + sigma I) w_j||_2`.
    pub residuals: Vec<f64>,
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

pub fn solve_gev(problem: &GevProblem) -> Result<GevSolution> {
    let (sigma, chol) = problem.factor()?;
    let g = chol.l();
    let q = problem.order();

    // M = G^-1 L G^-T; L is symmetric so (G^-1 L)^T = L G^-T.
    let half = g
        .solve_lower_triangular(&problem.lhs)
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let mut m = g
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    for j in 0..q {
        for i in (j + 1)..q {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("whitened matrix"));
    }

    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..q).collect();
    // stable: exact ties keep the solver's output order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(q);
    let mut eigenvectors = DMatrix::zeros(q, q);
    for (k, &j) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(j).into_owned();
        let w = g
            .tr_solve_lower_triangular(&v)
            .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
        eigenvectors.set_column(k, &fix_sign(w));
        eigenvalues.push(eig.eigenvalues[j]);
    }

    let mut solution = GevSolution {
        eigenvalues,
        eigenvectors,
        applied_sigma: sigma,
        residuals: Vec::new(),
    };
    solution.residuals = residuals(problem, &solution)?;
    Ok(solution)
}

/// Per-pair residual norms, using the `sigma` the solver applied.
pub fn residuals(problem: &GevProblem, solution: &GevSolution) -> Result<Vec<f64>> {
    let q = problem.order();
    if solution.eigenvectors.nrows() != q
        || solution.eigenvectors.ncols() != solution.eigenvalues.len()
    {
        return Err(Error::DimensionMismatch(format!(
            "eigenvectors {:?} for order {q} with {} eigenvalues",
            solution.eigenvectors.shape(),
            solution.eigenvalues.len()
        )));
    }
    let r = problem.regularized_rhs(solution.applied_sigma);
    let lw = &problem.lhs * &solution.eigenvectors;
    let rw = &r * &solution.eigenvectors;
    Ok(solution
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &rho)| (lw.column(j) - rw.column(j) * rho).norm())
        .collect())
}

/// Eigenvalues from the brute-force route.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpectrum {
    /// Non-increasing real parts.
    pub eigenvalues: Vec<f64>,
    /// Largest imaginary part discarded, for diagnostics.
    pub max_imaginary: f64,
    pub applied_sigma: f64,
}

/// Forms `(R + sigma I)^-1 L` with a dense LU solve and takes the real
/// eigenvalues of that non-symmetric product. `sigma` follows the same ladder
/// as [`solve_gev`] so both routes look at the same pencil.
pub fn oracle_gev(problem: &GevProblem) -> Result<OracleSpectrum> {
    let q = problem.order();
    if q > ORACLE_MAX_ORDER {
        return Err(Error::DimensionMismatch(format!(
            "oracle limited to order {ORACLE_MAX_ORDER}, got {q}"
        )));
    }
    let (sigma, _) = problem.factor()?;
    let r = problem.regularized_rhs(sigma);
    let product = r
        .lu()
        .solve(&problem.lhs)
        .ok_or_else(|| Error::Eigen("regularized right-hand matrix is singular".into()))?;
    let complex = product.complex_eigenvalues();
    let max_imaginary = complex.iter().fold(0.0_f64, |a, z| a.max(z.im.abs()));
    let mut eigenvalues: Vec<f64> = complex.iter().map(|z| z.re).collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(OracleSpectrum {
        eigenvalues,
        max_imaginary,
        applied_sigma: sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    #[test]
    fn exchange_matrix() {
        let p = GevProblem::new(dmatrix![0.0, 1.0; 1.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let s = solve_gev(&p).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalues[1], -1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.eigenvectors[(0, 0)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvectors[(1, 0)], h, epsilon = 1e-14);
        // (1, -1)/sqrt2: both entries tie in magnitude, the first is made positive
        assert_abs_diff_eq!(s.eigenvectors[(0, 1)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvectors[(1, 1)], -h, epsilon = 1e-14);
        assert_eq!(s.applied_sigma, 0.0);
    }

    #[test]
    fn hand_whitening() {
        // G = diag(2, 1): G^-1 L G^-T = [[0, 1], [1, 0]]
        let p =
            GevProblem::new(dmatrix![0.0, 2.0; 2.0, 0.0], dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        let s = solve_gev(&p).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalues[1], -1.0, epsilon = 1e-14);
        // w = G^-T v = (1/2, 1)/sqrt2 for rho = 1
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.eigenvectors[(0, 0)], 0.5 * h, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvectors[(1, 0)], h, epsilon = 1e-14);
    }

    #[test]
    fn zero_rhs_gets_regularized() {
        let p = GevProblem::new(dmatrix![2.0, 0.0; 0.0, 1.0], DMatrix::zeros(2, 2)).unwrap();
        let s = solve_gev(&p).unwrap();
        assert!(s.applied_sigma > 0.0);
        assert!(s.eigenvalues.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn singular_rhs_takes_first_rung() {
        let p = GevProblem::new(DMatrix::identity(2, 2), dmatrix![1.0, 1.0; 1.0, 1.0]).unwrap();
        let s = solve_gev(&p).unwrap();
        assert_eq!(s.applied_sigma, 1e-8);
    }

    #[test]
    fn negative_definite_rhs_exhausts_ladder() {
        let p = GevProblem::new(DMatrix::identity(2, 2), -DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            solve_gev(&p),
            Err(Error::RegularizationExhausted { .. })
        ));
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        assert!(GevProblem::new(dmatrix![0.0, 1.0; 0.0, 0.0], DMatrix::identity(2, 2)).is_err());
        assert!(
            GevProblem::new(dmatrix![f64::NAN, 0.0; 0.0, 0.0], DMatrix::identity(2, 2)).is_err()
        );
        assert!(GevProblem::new(DMatrix::identity(2, 2), DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn ladder_runs_to_cap() {
        let ladder = RegularizationPolicy::default().ladder();
        assert_eq!(ladder.len(), 8);
        assert_eq!(ladder[0], 0.0);
        assert_eq!(ladder[1], 1e-8);
        assert!((ladder[7] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn oracle_diagonal() {
        let p = GevProblem::new(dmatrix![1.0, 0.0; 0.0, 3.0], DMatrix::identity(2, 2)).unwrap();
        let o = oracle_gev(&p).unwrap();
        assert_abs_diff_eq!(o.eigenvalues[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(o.eigenvalues[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn oracle_identity_pencil() {
        let r = dmatrix![4.0, 1.0, 0.5; 1.0, 3.0, 0.2; 0.5, 0.2, 2.0];
        let p = GevProblem::new(r.clone(), r).unwrap();
        for v in oracle_gev(&p).unwrap().eigenvalues {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
        for v in solve_gev(&p).unwrap().eigenvalues {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn residual_of_exact_pair_is_zero() {
        let p = GevProblem::new(dmatrix![2.0, 0.0; 0.0, 1.0], DMatrix::identity(2, 2)).unwrap();
        let s = solve_gev(&p).unwrap();
        assert_eq!(s.residuals.len(), s.eigenvalues.len());
        assert!(s.residuals.iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn perturbed_vector_has_larger_residual() {
        let p = GevProblem::new(
            dmatrix![1.0, 0.3, 0.0; 0.3, -2.0, 0.5; 0.0, 0.5, 0.7],
            dmatrix![2.0, 0.1, 0.0; 0.1, 1.0, 0.0; 0.0, 0.0, 3.0],
        )
        .unwrap();
        let s = solve_gev(&p).unwrap();
        let mut bent = s.clone();
        bent.eigenvectors[(0, 0)] += 0.1;
        let r0 = residuals(&p, &s).unwrap();
        let r1 = residuals(&p, &bent).unwrap();
        assert!(r1[0] > r0[0]);
        assert_eq!(r1.len(), 3);
    }
}
