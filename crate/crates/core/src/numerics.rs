//! Dense linear-algebra kernels shared by the rest of the crate.
//!
//! Everything here works on small dense matrices (block sizes up to a few
//! dozen). Eigenvalues, the SVD and the real Schur form come from `nalgebra`;
//! the Lyapunov solver is a Bartels–Stewart back substitution on top of the
//! real Schur form.

pub use nalgebra::Complex;
use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance under which a matrix is treated as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

const MAX_ITER: usize = 100_000;
const JACOBI_SWEEPS: usize = 80;

/// Numerical-rank policy: a singular value counts when it exceeds
/// `sigma_max * max(rows, cols) * relative`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance {
    pub relative: f64,
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self { relative: 1e-10 }
    }
}

impl RankTolerance {
    pub fn new(relative: f64) -> Result<Self> {
        if !(relative.is_finite() && relative > 0.0) {
            return Err(Error::InvalidInput(format!(
                "rank tolerance must be positive and finite, got {relative}"
            )));
        }
        Ok(Self { relative })
    }

    pub fn threshold(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        sigma_max * rows.max(cols) as f64 * self.relative
    }
}

/// Eigenvalues of a square matrix.
///
/// For symmetric input the values are real and sorted ascending; otherwise
/// the order is whatever the Schur iteration produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<Complex<f64>>,
    symmetric: bool,
}

impl Spectrum {
    pub fn values(&self) -> &[Complex<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when the input was detected as symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Largest real part, or `-inf` for an empty spectrum.
    pub fn max_real(&self) -> f64 {
        self.values
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn sum(&self) -> Complex<f64> {
        self.values.iter().sum()
    }

    pub fn product(&self) -> Complex<f64> {
        self.values
            .iter()
            .fold(Complex::new(1.0, 0.0), |acc, z| acc * z)
    }
}

/// Result of a definiteness test: the verdict and the extreme eigenvalue
/// that decided it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Definiteness {
    pub holds: bool,
    pub margin: f64,
}

/// Thin wrapper around a full SVD `M = U Σ Vᵀ` with square orthogonal `U`
/// and `V` and singular values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Rectangular diagonal factor with the shape of the decomposed matrix.
    pub fn sigma_matrix(&self) -> Matrix {
        let mut s = Matrix::zeros(self.u.ncols(), self.v.ncols());
        for (k, &sv) in self.singular_values.iter().enumerate() {
            s[(k, k)] = sv;
        }
        s
    }

    pub fn rank(&self, tol: RankTolerance) -> usize {
        let threshold = tol.threshold(self.sigma_max(), self.u.nrows(), self.v.nrows());
        self.singular_values
            .iter()
            .filter(|&&s| s > threshold && s > 0.0)
            .count()
    }
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::dim(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Unhalved symmetric part `M + Mᵀ`.
pub fn sym(m: &Matrix) -> Matrix {
    m + m.transpose()
}

pub fn is_symmetric(m: &Matrix, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax();
    let asym = (m - m.transpose()).amax();
    asym <= rel_tol * scale
}

pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(svd(m)?.sigma_max())
}

/// All eigenvalues of a square matrix, with multiplicity.
pub fn eigenvalues(m: &Matrix) -> Result<Spectrum> {
    ensure_square(m, "eigenvalue input")?;
    ensure_finite(m, "eigenvalue input")?;
    if m.nrows() == 0 {
        return Ok(Spectrum {
            values: Vec::new(),
            symmetric: true,
        });
    }
    if is_symmetric(m, SYMMETRY_TOL) {
        let values = symmetric_eigenvalues(m)?
            .into_iter()
            .map(|x| Complex::new(x, 0.0))
            .collect();
        return Ok(Spectrum {
            values,
            symmetric: true,
        });
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, MAX_ITER).ok_or_else(|| {
        Error::numerical(format!(
            "Schur iteration did not converge on a {0}x{0} matrix (norm {1:.3e})",
            m.nrows(),
            m.norm()
        ))
    })?;
    Ok(Spectrum {
        values: schur.complex_eigenvalues().iter().copied().collect(),
        symmetric: false,
    })
}

/// Ascending eigenvalues of the symmetric part of `m`.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    Ok(symmetric_eigen(m)?.0)
}

/// Ascending eigenvalues and matching orthonormal eigenvectors (as columns)
/// of the symmetric part of `m`.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    ensure_square(m, "symmetric eigenvalue input")?;
    ensure_finite(m, "symmetric eigenvalue input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, MAX_ITER).ok_or_else(|| {
        Error::numerical(format!("symmetric eigensolver did not converge (n = {n})"))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Max real part of the eigenvalues.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.max_real())
}

/// Extends the orthonormal columns of `q` (n×k) to a square orthogonal
/// matrix whose first k columns are `q`.
pub fn complete_orthonormal_basis(q: &Matrix) -> Matrix {
    let n = q.nrows();
    let mut cols: Vec<Vector> = q.column_iter().map(|c| c.into_owned()).collect();
    while cols.len() < n {
        // Pick the coordinate vector with the largest residual after
        // projecting out the current basis; two passes of Gram–Schmidt.
        let mut best: Option<(f64, Vector)> = None;
        for j in 0..n {
            let mut v = Vector::zeros(n);
            v[j] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dot(&v);
                    v -= c * proj;
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("n > 0 when the basis is incomplete");
        cols.push(v / norm);
    }
    if cols.is_empty() {
        return Matrix::zeros(n, 0);
    }
    Matrix::from_columns(&cols)
}

/// Full singular value decomposition with square orthogonal factors.
///
/// One-sided Jacobi on the taller orientation of `m`: columns are rotated
/// pairwise until mutually orthogonal, their norms are the singular values.
pub fn svd(m: &Matrix) -> Result<Svd> {
    ensure_finite(m, "SVD input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Svd {
            u: Matrix::identity(rows, rows),
            singular_values: Vec::new(),
            v: Matrix::identity(cols, cols),
        });
    }
    let transposed = rows < cols;
    let mut w = if transposed { m.transpose() } else { m.clone() };
    let k = w.ncols();
    let mut right = Matrix::identity(k, k);

    let tol = f64::EPSILON * w.nrows() as f64;
    // Columns below this are rounding noise; rotating them can cycle.
    let noise = (f64::EPSILON * w.norm()).powi(2);
    let mut converged = false;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                if alpha <= noise || beta <= noise {
                    continue;
                }
                let gamma = w.column(p).dot(&w.column(q));
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut right, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(format!("Jacobi SVD did not converge on a {rows}x{cols} matrix")));
    }

    let norms: Vec<f64> = (0..k).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let singular_values: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let floor = singular_values[0] * f64::EPSILON * rows.max(cols) as f64;
    let left_cols: Vec<Vector> = order
        .iter()
        .filter(|&&j| norms[j] > floor)
        .map(|&j| w.column(j) / norms[j])
        .collect();
    let left = if left_cols.is_empty() {
        Matrix::zeros(w.nrows(), 0)
    } else {
        Matrix::from_columns(&left_cols)
    };
    let left = complete_orthonormal_basis(&left);
    let right = Matrix::from_columns(&order.iter().map(|&j| right.column(j)).collect::<Vec<_>>());
    let right = complete_orthonormal_basis(&right);
    let (u, v) = if transposed { (right, left) } else { (left, right) };

    let dec = Svd { u, singular_values, v };
    let err = (&dec.u * dec.sigma_matrix() * dec.v.transpose() - m).norm();
    if !(err <= 1e-10 * m.norm().max(f64::MIN_POSITIVE)) {
        return Err(Error::numerical(format!(
            "SVD of a {rows}x{cols} matrix does not reconstruct it (error {err:.3e})"
        )));
    }
    Ok(dec)
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (a, b) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

pub fn rank(m: &Matrix, tol: RankTolerance) -> Result<usize> {
    Ok(svd(m)?.rank(tol))
}

/// Negative-definiteness of the symmetric part of `m`; the margin is
/// `λ_max`, so `holds` iff `margin < 0`.
pub fn is_negative_definite(m: &Matrix) -> Result<Definiteness> {
    let eig = symmetric_eigenvalues(m)?;
    let margin = eig.last().copied().unwrap_or(f64::NEG_INFINITY);
    Ok(Definiteness {
        holds: margin < 0.0,
        margin,
    })
}

/// Positive-definiteness of the symmetric part of `m`; the margin is `λ_min`.
pub fn is_positive_definite(m: &Matrix) -> Result<Definiteness> {
    let eig = symmetric_eigenvalues(m)?;
    let margin = eig.first().copied().unwrap_or(f64::INFINITY);
    Ok(Definiteness {
        holds: margin > 0.0,
        margin,
    })
}

/// Orthonormal bases `(B1, B2)` with `im B1 = im Mᵀ` and `im B2 = ker M`;
/// `[B1 B2]` is square orthogonal.
pub fn orthonormal_row_space_basis(m: &Matrix, tol: RankTolerance) -> Result<(Matrix, Matrix)> {
    let n = m.ncols();
    let dec = svd(m)?;
    let r = dec.rank(tol);
    let row_space = dec.v.columns(0, r).into_owned();
    let kernel = dec.v.columns(r, n - r).into_owned();
    Ok((row_space, kernel))
}

/// Solves `Fᵀ P + P F = -Q` for symmetric `P`.
///
/// Bartels–Stewart: reduce `F` to real Schur form `U S Uᵀ`, solve the
/// quasi-triangular equation block by block, transform back.
pub fn solve_lyapunov(f: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square(f, "Lyapunov matrix F")?;
    ensure_square(q, "Lyapunov right-hand side Q")?;
    ensure_finite(f, "Lyapunov matrix F")?;
    ensure_finite(q, "Lyapunov right-hand side Q")?;
    let n = f.nrows();
    if q.nrows() != n {
        return Err(Error::dim(format!(
            "Lyapunov F is {n}x{n} but Q is {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    if !is_symmetric(q, 1e-9) {
        return Err(Error::InvalidInput("Lyapunov right-hand side Q is not symmetric".into()));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let spectrum = eigenvalues(f)?;
    let f_norm = f.norm();
    let resonance_tol = 1e-9 * f_norm;
    let lams = spectrum.values();
    for i in 0..lams.len() {
        for j in i..lams.len() {
            if (lams[i] + lams[j]).norm() <= resonance_tol {
                return Err(Error::SingularEquation(format!(
                    "eigenvalues {} and {} of F sum to (numerically) zero",
                    lams[i], lams[j]
                )));
            }
        }
    }

    let schur = Schur::try_new(f.clone(), f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::numerical("real Schur form of F did not converge"))?;
    let (u, s) = schur.unpack();
    let c = u.transpose() * symmetrize(q) * &u;
    let y = solve_quasi_triangular_lyapunov(&s, &c)?;
    let mut p = symmetrize(&(&u * y * u.transpose()));

    // A few rounds of iterative refinement on the residual.
    let residual_of = |p: &Matrix| symmetrize(&(f.transpose() * p + p * f + q));
    let mut r = residual_of(&p);
    let mut residual = r.norm();
    for _ in 0..3 {
        if residual == 0.0 {
            break;
        }
        let dy = solve_quasi_triangular_lyapunov(&s, &(u.transpose() * &r * &u))?;
        let candidate = symmetrize(&(&p + &u * dy * u.transpose()));
        let next = residual_of(&candidate);
        let next_norm = next.norm();
        if !(next_norm < 0.5 * residual) {
            break;
        }
        p = candidate;
        r = next;
        residual = next_norm;
    }

    // Normalized the way a backward-stable solver is measured: relative to
    // the size of the terms being summed, not just the right-hand side.
    let bound = 1e-8 * q.norm().max(2.0 * f_norm * p.norm()).max(1.0);
    if !(residual <= bound) {
        return Err(Error::numerical(format!(
            "Lyapunov residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    if spectrum.max_real() < 0.0 && is_positive_definite(q)?.holds {
        let pd = is_positive_definite(&p)?;
        if !pd.holds {
            return Err(Error::numerical(format!(
                "Lyapunov solution is not positive definite (λ_min = {:.3e}) for Hurwitz F and Q > 0",
                pd.margin
            )));
        }
    }
    Ok(p)
}

/// Stabilizing solution of `Aᵀ Y + Y A − Y G Y + Q = 0` for symmetric
/// `G ⪰ 0` and `Q ≻ 0`, so that `A − G Y` is Hurwitz.
///
/// The stable invariant subspace of the Hamiltonian is read off its matrix
/// sign function (scaled Newton iteration); the result is then polished by
/// Newton–Kleinman steps until the residual stops improving.
pub fn solve_riccati(a: &Matrix, g: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square(a, "Riccati matrix A")?;
    let n = a.nrows();
    if g.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::dim(format!("Riccati A is {n}x{n} but G or Q has another shape")));
    }
    for (m, what) in [(a, "Riccati matrix A"), (g, "Riccati matrix G"), (q, "Riccati matrix Q")] {
        ensure_finite(m, what)?;
    }
    if !is_symmetric(g, 1e-9) || !is_symmetric(q, 1e-9) {
        return Err(Error::InvalidInput("Riccati G and Q must be symmetric".into()));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let mut z = Matrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(a);
    z.view_mut((0, n), (n, n)).copy_from(&(-g));
    z.view_mut((n, 0), (n, n)).copy_from(&(-q));
    z.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let mut converged = false;
    for _ in 0..200 {
        let lu = z.clone().lu();
        let z_inv = lu
            .try_inverse()
            .ok_or_else(|| Error::numerical("Hamiltonian has an eigenvalue on the imaginary axis"))?;
        let log_det: f64 = z.clone().lu().u().diagonal().iter().map(|d| d.abs().ln()).sum();
        let c = (-log_det / (2 * n) as f64).exp();
        let next = (&z * c + z_inv / c) * 0.5;
        ensure_finite(&next, "Hamiltonian sign iterate")?;
        let step = (&next - &z).norm();
        z = next;
        if step <= 1e-12 * z.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical("matrix sign iteration did not converge"));
    }

    // (sign + I) annihilates the stable subspace [I; Y].
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(z.view((n, n), (n, n)) + Matrix::identity(n, n)));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(z.view((0, 0), (n, n)) + Matrix::identity(n, n)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&z.view((n, 0), (n, n)));
    let y = SVD::new(lhs, true, true)
        .solve(&(-rhs), f64::EPSILON)
        .map_err(|e| Error::numerical(format!("Riccati subspace solve failed: {e}")))?;
    let mut y = symmetrize(&y);

    let residual = |y: &Matrix| (a.transpose() * y + y * a - y * g * y + q).norm();
    let mut res = residual(&y);
    for _ in 0..8 {
        let closed = a - g * &y;
        if spectral_abscissa(&closed)? >= 0.0 {
            break;
        }
        let Ok(next) = solve_lyapunov(&closed, &(q + &y * g * &y)) else {
            break;
        };
        let next_res = residual(&next);
        if !(next_res < res) {
            break;
        }
        y = next;
        res = next_res;
    }

    let scale = q.norm().max(2.0 * a.norm() * y.norm()).max(g.norm() * y.norm_squared()).max(1.0);
    if !(res <= 1e-8 * scale) {
        return Err(Error::numerical(format!("Riccati residual {res:.3e} exceeds {:.3e}", 1e-8 * scale)));
    }
    if spectral_abscissa(&(a - g * &y))? >= 0.0 {
        return Err(Error::numerical("Riccati solution is not stabilizing"));
    }
    Ok(y)
}

/// Diagonal blocks `(start, size)` of a real quasi-upper-triangular matrix.
fn schur_blocks(s: &Matrix) -> Result<Vec<(usize, usize)>> {
    let n = s.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && s[(i + 1, i)] != 0.0 {
            if i + 2 < n && s[(i + 2, i + 1)] != 0.0 {
                return Err(Error::numerical("Schur form has an unreduced 3x3 block"));
            }
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    Ok(blocks)
}

/// Solves `Sᵀ Y + Y S = -C` for quasi-upper-triangular `S`.
fn solve_quasi_triangular_lyapunov(s: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = s.nrows();
    let blocks = schur_blocks(s)?;
    let mut y = Matrix::zeros(n, n);
    for &(ri, pi) in &blocks {
        for &(cj, qj) in &blocks {
            // rhs = -C_ij - Σ_{k<i} S_kiᵀ Y_kj - Σ_{l<j} Y_il S_lj
            let mut rhs = -c.view((ri, cj), (pi, qj)).into_owned();
            if ri > 0 {
                rhs -= s.view((0, ri), (ri, pi)).transpose() * y.view((0, cj), (ri, qj));
            }
            if cj > 0 {
                rhs -= y.view((ri, 0), (pi, cj)) * s.view((0, cj), (cj, qj));
            }
            let s_ii = s.view((ri, ri), (pi, pi)).into_owned();
            let s_jj = s.view((cj, cj), (qj, qj)).into_owned();
            let block = solve_small_sylvester(&s_ii, &s_jj, &rhs)?;
            y.view_mut((ri, cj), (pi, qj)).copy_from(&block);
        }
    }
    Ok(y)
}

/// Solves `Aᵀ Y + Y B = R` for blocks of size at most 2 via the
/// vectorized (Kronecker) form.
fn solve_small_sylvester(a: &Matrix, b: &Matrix, r: &Matrix) -> Result<Matrix> {
    let (p, q) = (a.nrows(), b.nrows());
    let op = Matrix::identity(q, q).kronecker(&a.transpose()) + b.transpose().kronecker(&Matrix::identity(p, p));
    let rhs = Vector::from_column_slice(r.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularEquation("singular diagonal block in Schur-form Lyapunov solve".into()))?;
    Ok(Matrix::from_column_slice(p, q, sol.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    /// Vectorized oracle: (I ⊗ Fᵀ + Fᵀ ⊗ I) vec(P) = -vec(Q).
    fn kron_lyapunov(f: &Matrix, q: &Matrix) -> Matrix {
        let n = f.nrows();
        let i = Matrix::identity(n, n);
        let op = i.kronecker(&f.transpose()) + f.transpose().kronecker(&i);
        let rhs = -Vector::from_column_slice(q.as_slice());
        let sol = op.lu().solve(&rhs).unwrap();
        Matrix::from_column_slice(n, n, sol.as_slice())
    }

    #[test]
    fn eigenvalues_of_identity() {
        let s = eigenvalues(&Matrix::identity(2, 2)).unwrap();
        assert!(s.is_symmetric());
        assert_eq!(s.real_parts(), vec![1.0, 1.0]);
    }

    #[test]
    fn eigenvalues_of_companion_matrix() {
        let s = eigenvalues(&m(2, 2, &[0.0, 1.0, -2.0, -3.0])).unwrap();
        let mut re = s.real_parts();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 2.0).abs() < 1e-12 && (re[1] + 1.0).abs() < 1e-12);
        assert!(s.values().iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn symmetric_eigenvalues_sorted() {
        let s = eigenvalues(&m(2, 2, &[2.0, -1.0, -1.0, 2.0])).unwrap();
        let re = s.real_parts();
        assert!((re[0] - 1.0).abs() < 1e-12 && (re[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_reject_non_square() {
        assert!(matches!(eigenvalues(&Matrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn svd_examples() {
        assert_eq!(svd(&Matrix::identity(2, 2)).unwrap().singular_values, vec![1.0, 1.0]);
        let d = svd(&m(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.singular_values, vec![1.0, 0.0]);
        let d = svd(&m(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(d.singular_values, vec![1.0, 1.0]);
    }

    #[test]
    fn svd_of_wide_matrix_has_full_factors() {
        let a = m(1, 3, &[1.0, 2.0, 2.0]);
        let d = svd(&a).unwrap();
        assert_eq!(d.v.shape(), (3, 3));
        assert!((d.v.transpose() * &d.v - Matrix::identity(3, 3)).norm() < 1e-12);
        assert!((&d.u * d.sigma_matrix() * d.v.transpose() - &a).norm() < 1e-12);
        assert!((d.singular_values[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rank_examples() {
        let tol = RankTolerance::default();
        assert_eq!(rank(&Matrix::zeros(2, 2), tol).unwrap(), 0);
        assert_eq!(rank(&Matrix::identity(3, 3), tol).unwrap(), 3);
        assert_eq!(rank(&m(2, 2, &[1.0, 2.0, 2.0, 4.0]), tol).unwrap(), 1);
    }

    #[test]
    fn negative_definite_examples() {
        let d = is_negative_definite(&(-Matrix::identity(2, 2))).unwrap();
        assert!(d.holds && (d.margin + 1.0).abs() < 1e-12);
        let d = is_negative_definite(&m(2, 2, &[0.0, 0.0, 0.0, -1.0])).unwrap();
        assert!(!d.holds && d.margin.abs() < 1e-12);
        let d = is_negative_definite(&m(2, 2, &[-2.0, 1.0, 1.0, -2.0])).unwrap();
        assert!(d.holds && (d.margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn definiteness_symmetrizes_input() {
        // Skew part must not affect the verdict.
        let d = is_negative_definite(&m(2, 2, &[-1.0, 5.0, -5.0, -1.0])).unwrap();
        assert!(d.holds && (d.margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_scalar() {
        let p = solve_lyapunov(&m(1, 1, &[-1.0]), &m(1, 1, &[1.0])).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_diagonal() {
        let f = m(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let p = solve_lyapunov(&f, &Matrix::identity(2, 2)).unwrap();
        assert!((p - m(2, 2, &[0.5, 0.0, 0.0, 0.25])).norm() < 1e-14);
    }

    #[test]
    fn lyapunov_resonance_is_singular() {
        let err = solve_lyapunov(&m(1, 1, &[0.0]), &m(1, 1, &[1.0])).unwrap_err();
        assert!(matches!(err, Error::SingularEquation(_)));
        // ±i pair also resonates.
        let err = solve_lyapunov(&m(2, 2, &[0.0, 1.0, -1.0, 0.0]), &Matrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::SingularEquation(_)));
    }

    #[test]
    fn lyapunov_with_complex_pair_matches_oracle() {
        let f = m(3, 3, &[-1.0, 4.0, 0.5, -3.0, -1.0, 0.2, 0.0, 0.3, -2.0]);
        let q = m(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.3, 0.0, 0.3, 3.0]);
        let p = solve_lyapunov(&f, &q).unwrap();
        assert!((&p - kron_lyapunov(&f, &q)).norm() < 1e-10);
        assert!(is_positive_definite(&p).unwrap().holds);
    }

    #[test]
    fn lyapunov_with_antistable_jordan_block() {
        let f = m(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let q = m(2, 2, &[-2.0, 0.0, 0.0, 0.0]);
        let p = solve_lyapunov(&f, &q).unwrap();
        let expected = m(2, 2, &[0.5, -0.125, -0.125, 0.0625]);
        assert!((p - expected).norm() < 1e-13);
    }

    #[test]
    fn row_space_basis_examples() {
        let tol = RankTolerance::default();
        let (b1, b2) = orthonormal_row_space_basis(&m(2, 2, &[1.0, 0.0, 0.0, 0.0]), tol).unwrap();
        assert_eq!((b1.ncols(), b2.ncols()), (1, 1));
        assert!((b1[(0, 0)].abs() - 1.0).abs() < 1e-14 && (b2[(1, 0)].abs() - 1.0).abs() < 1e-14);

        let (b1, b2) = orthonormal_row_space_basis(&Matrix::identity(2, 2), tol).unwrap();
        assert_eq!((b1.ncols(), b2.ncols()), (2, 0));

        let (b1, b2) = orthonormal_row_space_basis(&m(2, 2, &[0.0, 1.0, 0.0, 0.0]), tol).unwrap();
        assert!((b1[(1, 0)].abs() - 1.0).abs() < 1e-14 && (b2[(0, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn block_diag_places_blocks() {
        let b = block_diag(&[m(1, 1, &[1.0]), Matrix::zeros(0, 0), m(2, 2, &[2.0, 3.0, 4.0, 5.0])]);
        assert_eq!(b, m(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 3.0, 0.0, 4.0, 5.0]));
    }

    #[test]
    fn riccati_scalar_closed_form() {
        // 2ay − gy² + q = 0 → y = (a + √(a² + gq)) / g.
        let (a, g, q) = (0.7, 2.0, 3.0);
        let y = solve_riccati(&m(1, 1, &[a]), &m(1, 1, &[g]), &m(1, 1, &[q])).unwrap();
        assert!((y[(0, 0)] - (a + (a * a + g * q).sqrt()) / g).abs() < 1e-12);
    }

    #[test]
    fn riccati_random_is_stabilizing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(1..=5);
            let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let b = Matrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
            let g = &b * b.transpose();
            let q = Matrix::identity(n, n);
            let y = solve_riccati(&a, &g, &q).unwrap();
            let res = (a.transpose() * &y + &y * &a - &y * &g * &y + &q).norm();
            assert!(res <= 1e-8 * y.norm().max(1.0), "residual {res}");
            assert!(spectral_abscissa(&(&a - &g * &y)).unwrap() < 0.0);
            assert!(is_positive_definite(&y).unwrap().holds);
        }
    }


    #[test]
    fn svd_of_wide_rank_one_matrix() {
        let row = [0.2025703663591029, 0.2535287773768715, 0.2680948256688411, -0.19241251856242442];
        let m = Matrix::from_fn(3, 4, |i, j| row[j] * [1.0, -0.7378, 1.4047][i]);
        let d = svd(&m).unwrap();
        assert_eq!(d.rank(RankTolerance::default()), 1);
        let recon = &d.u * d.sigma_matrix() * d.v.transpose();
        assert!((recon - &m).norm() < 1e-12);
        assert!((&m * d.v.columns(1, 3)).norm() < 1e-12);
    }

}
