use nalgebra::{DMatrix, DVector};

use super::plan::{JumpKind, SpectralJump};
use crate::error::{Error, Result};

/// Scaled-determinant floor below which the system counts as singular.
pub const SINGULAR_FLOOR: f64 = 1e-13;
/// Largest size for which the determinant formulas are cross-checked.
pub const CRAMER_MAX: usize = 3;

/// `u^T B v = u1 v2 - u2 v1`.
#[inline]
pub(crate) fn skew(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

/// `integral_0^x psi_i . psi_j` for two solutions with the same Cauchy data
/// and distinct eigenvalue parameters. Differentiating `psi_j^T B psi_i`
/// gives `(lambda_i - lambda_j) psi_i . psi_j`, and the boundary term at the
/// origin vanishes.
#[inline]
pub(crate) fn cross_integral(psi_i: [f64; 2], lambda_i: f64, psi_j: [f64; 2], lambda_j: f64) -> f64 {
    skew(psi_j, psi_i) / (lambda_i - lambda_j)
}

/// `m_ii(x) = integral_0^x |psi_i|^2`. For model sources this subtracts the
/// tail from the norming constant and so loses digits at large `x`.
pub(crate) fn self_integral(jump: &SpectralJump, x: f64) -> Result<f64> {
    let d = jump.diagonal_at(x)?;
    Ok(match jump.kind {
        JumpKind::Removal { norming, .. } => norming - d,
        JumpKind::Rescaling { from, .. } => from - d,
        JumpKind::Addition { .. } => d,
    })
}

/// Gel'fand-Levitan linear system at one abscissa.
#[derive(Debug, Clone)]
pub struct GLSystem {
    pub x: f64,
    /// `S = I + D M` with `D = diag(coefficients)` and `M` the Gram matrix of
    /// the sources over `[0, x]`.
    pub matrix_s: DMatrix<f64>,
    /// `H_p = -D psi_p`.
    pub columns_h: [DVector<f64>; 2],
    /// `g_p` solving `S g_p = H_p`.
    pub solution_g: [DVector<f64>; 2],
    /// `det S` (may underflow for many jumps at large `x`; see `log_abs_determinant`).
    pub determinant: f64,
    pub log_abs_determinant: f64,
    /// Determinant of the symmetric system after diagonal equilibration.
    pub scaled_determinant: f64,
    /// Source values `psi_i(x)`.
    pub sources: Vec<[f64; 2]>,
    /// Eigenvalue parameters of the sources.
    pub lambdas: Vec<f64>,
}

/// Symmetric matrix `K = D^{-1} + M` with every entry formed without
/// cancellation: off-diagonal entries from the cross-integral identity,
/// removal diagonals as minus the tail, rescaling diagonals as
/// `a^2 / (a - b)` minus the tail.
fn symmetric_matrix(jumps: &[SpectralJump], x: f64, sources: &[[f64; 2]]) -> Result<DMatrix<f64>> {
    let n = jumps.len();
    let mut k = DMatrix::zeros(n, n);
    if x == 0.0 {
        for (i, j) in jumps.iter().enumerate() {
            k[(i, i)] = j.inverse_coefficient;
        }
        return Ok(k);
    }
    for (i, ji) in jumps.iter().enumerate() {
        let d = ji.diagonal_at(x)?;
        k[(i, i)] = match ji.kind {
            JumpKind::Removal { .. } => -d,
            JumpKind::Rescaling { from, to, .. } => from * from / (from - to) - d,
            JumpKind::Addition { norming, .. } => norming + d,
        };
        for (j, jj) in jumps.iter().enumerate().skip(i + 1) {
            let m = cross_integral(sources[i], ji.lambda, sources[j], jj.lambda);
            k[(i, j)] = m;
            k[(j, i)] = m;
        }
    }
    Ok(k)
}

pub fn assemble_system(jumps: &[SpectralJump], x: f64) -> Result<GLSystem> {
    if !(x >= 0.0) {
        return Err(Error::InvalidBounds { a: 0.0, b: x });
    }
    let n = jumps.len();
    let sources: Vec<[f64; 2]> = jumps.iter().map(|j| j.value_at(x)).collect();
    let lambdas: Vec<f64> = jumps.iter().map(|j| j.lambda).collect();
    if n == 0 {
        let empty = DVector::zeros(0);
        return Ok(GLSystem {
            x,
            matrix_s: DMatrix::zeros(0, 0),
            columns_h: [empty.clone(), empty.clone()],
            solution_g: [empty.clone(), empty],
            determinant: 1.0,
            log_abs_determinant: 0.0,
            scaled_determinant: 1.0,
            sources,
            lambdas,
        });
    }
    let coeff: Vec<f64> = jumps.iter().map(|j| j.coefficient).collect();
    let k = symmetric_matrix(jumps, x, &sources)?;

    let mut scale = vec![0.0; n];
    for i in 0..n {
        let d = k[(i, i)].abs();
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::SingularSystem { x, scaled_det: 0.0 });
        }
        scale[i] = 1.0 / d.sqrt();
    }
    let k_hat = DMatrix::from_fn(n, n, |i, j| scale[i] * k[(i, j)] * scale[j]);
    let lu = k_hat.clone().lu();
    let scaled_det = lu.determinant();
    if !(scaled_det.abs() >= SINGULAR_FLOOR) {
        return Err(Error::SingularSystem { x, scaled_det });
    }

    let mut solution_g = [DVector::zeros(n), DVector::zeros(n)];
    let mut columns_h = [DVector::zeros(n), DVector::zeros(n)];
    for p in 0..2 {
        let rhs = DVector::from_fn(n, |i, _| -scale[i] * sources[i][p]);
        let g_hat = lu.solve(&rhs).ok_or(Error::SingularSystem { x, scaled_det })?;
        solution_g[p] = DVector::from_fn(n, |i, _| scale[i] * g_hat[i]);
        columns_h[p] = DVector::from_fn(n, |i, _| -coeff[i] * sources[i][p]);
    }
    let matrix_s = if x == 0.0 {
        DMatrix::identity(n, n)
    } else {
        DMatrix::from_fn(n, n, |i, j| coeff[i] * k[(i, j)])
    };

    // det S = det D det K = prod(c_i |K_ii|) det K_hat
    let mut log_abs = scaled_det.abs().ln();
    let mut sign = scaled_det.signum();
    for i in 0..n {
        log_abs += (coeff[i] * k[(i, i)]).abs().ln();
        sign *= coeff[i].signum();
    }
    let determinant = sign * log_abs.exp();
    if sign <= 0.0 {
        return Err(Error::NonPositiveDeterminant { x, determinant });
    }
    Ok(GLSystem {
        x,
        matrix_s,
        columns_h,
        solution_g,
        determinant,
        log_abs_determinant: log_abs,
        scaled_determinant: scaled_det,
        sources,
        lambdas,
    })
}

fn leibniz(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => unreachable!("determinant formulas are only used for n <= 3"),
    }
}

impl GLSystem {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// `Gamma = G(x, x) = sum_k g_k psi_k^T`.
    pub fn kernel_diagonal(&self) -> [[f64; 2]; 2] {
        let mut gamma = [[0.0; 2]; 2];
        for (k, psi) in self.sources.iter().enumerate() {
            for (p, row) in gamma.iter_mut().enumerate() {
                for (q, entry) in row.iter_mut().enumerate() {
                    *entry += self.solution_g[p][k] * psi[q];
                }
            }
        }
        gamma
    }

    /// `(p~, q~)` from `Omega~ = Omega_0 + Gamma B - B Gamma`.
    pub fn potential(&self) -> (f64, f64) {
        let g = self.kernel_diagonal();
        (-(g[0][1] + g[1][0]), self.x + g[0][0] - g[1][1])
    }

    /// `(p~, q~)` from Cramer's rule on `S` with the columns `H_p`, or
    /// `None` past [`CRAMER_MAX`] jumps.
    pub fn potential_cramer(&self) -> Option<(f64, f64)> {
        let n = self.len();
        if n > CRAMER_MAX {
            return None;
        }
        let det = leibniz(&self.matrix_s);
        let mut p_sum = 0.0;
        let mut q_sum = 0.0;
        for k in 0..n {
            for p in 0..2 {
                let mut replaced = self.matrix_s.clone();
                replaced.set_column(k, &self.columns_h[p]);
                let d = leibniz(&replaced);
                p_sum += self.sources[k][1 - p] * d;
                let sign = if p == 0 { 1.0 } else { -1.0 };
                q_sum += sign * self.sources[k][p] * d;
            }
        }
        Some((-p_sum / det, self.x + q_sum / det))
    }

    /// Solution vector `g_k = (g_{k,1}, g_{k,2})` for jump `k`.
    pub fn g(&self, k: usize) -> [f64; 2] {
        [self.solution_g[0][k], self.solution_g[1][k]]
    }
}
