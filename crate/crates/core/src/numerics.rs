//! Shared numerical kernels: complex small-matrix algebra, a Hermitian
//! eigensolver, fixed-step Volterra and Runge-Kutta integrators, and stable
//! evaluation of large powers of the complex cosine.
//!
//! Everything here is dependency-free by design: the matrices involved are
//! small (central-spin dimension <= ~9, oracle blocks <= ~2000), so a cyclic
//! Jacobi eigensolver and hand-rolled steppers are both simpler and easier to
//! validate than an external linear-algebra stack.
//!
//! The two steppers share a calling convention: the state is a flat
//! `&[Complex64]` owned by the caller, and the right-hand side writes its
//! result into a caller-provided buffer. Both are strictly fixed-step so that
//! different methods land on identical time grids and can be compared
//! pointwise.

use std::fmt;

pub use num_complex::Complex64;
use thiserror::Error;

/// Hard ceiling on the number of integrator steps in one solve.
pub const MAX_GRID_STEPS: usize = 10_000_000;

/// Maximum number of full Jacobi sweeps before the eigensolver gives up.
const MAX_JACOBI_SWEEPS: usize = 60;

/// Corrector tolerance for the Volterra predictor-corrector step.
const VOLTERRA_CORRECTOR_TOL: f64 = 1e-12;

/// Maximum corrector iterations per Volterra step.
const VOLTERRA_CORRECTOR_MAX_ITERS: usize = 10;

/// Errors produced by the numerical kernels.
#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("grid is invalid: {0}")]
    InvalidGrid(String),
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    EigenNoConvergence { sweeps: usize, off_norm: f64 },
    #[error("Volterra corrector stalled at step {step} (residual {residual:.3e})")]
    CorrectorStall { step: usize, residual: f64 },
    #[error("matrix dimension mismatch: {0}")]
    DimensionMismatch(String),
}

// ---------------------------------------------------------------------------
// Complex matrices
// ---------------------------------------------------------------------------

/// Dense square complex matrix, row-major storage.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Zero matrix of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    /// Identity matrix of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Build a matrix by evaluating `f(row, col)`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Wrap an existing row-major buffer; `entries.len()` must be a square.
    pub fn from_vec(dim: usize, entries: Vec<Complex64>) -> Self {
        assert_eq!(
            entries.len(),
            dim * dim,
            "ComplexMatrix::from_vec: buffer length {} does not match dim {}",
            entries.len(),
            dim
        );
        ComplexMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.entries
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.dim, rhs.dim,
            "ComplexMatrix::mul: dimension mismatch {} vs {}",
            self.dim, rhs.dim
        );
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    out.entries[r * n + c] += a * rhs.entries[k * n + c];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        let n = self.dim;
        ComplexMatrix::from_fn(n, |r, c| self.entries[c * n + r].conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }

    pub fn scale(&mut self, s: Complex64) {
        for e in &mut self.entries {
            *e *= s;
        }
    }

    pub fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim, "ComplexMatrix::add_assign: dimension mismatch");
        for (a, b) in self.entries.iter_mut().zip(rhs.entries.iter()) {
            *a += *b;
        }
    }

    /// Largest elementwise absolute difference against `rhs`.
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim, "ComplexMatrix::max_abs_diff: dimension mismatch");
        self.entries
            .iter()
            .zip(rhs.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest deviation from Hermiticity, max |A[r,c] - conj(A[c,r])|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                let d = (self.entries[r * n + c] - self.entries[c * n + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.re.is_finite() && e.im.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.entries[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[r * self.dim + c]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix(dim = {})", self.dim)?;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let e = self[(r, c)];
                write!(f, " {:+.6e}{:+.6e}i", e.re, e.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Hermitian eigensolver (cyclic Jacobi with complex rotations)
// ---------------------------------------------------------------------------

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized internally, so mild non-Hermiticity (round-off
/// level) is tolerated. Returns the eigenvalues in ascending order and the
/// matrix whose columns are the matching orthonormal eigenvectors, i.e.
/// `M = V diag(lambda) V^dagger`.
///
/// # Errors
///
/// Fails only if the off-diagonal norm has not dropped below round-off after
/// the maximum number of sweeps, which does not happen for finite input.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), NumericsError> {
    let n = m.dim();
    // Symmetrized working copy: a <- (m + m^dagger)/2.
    let mut a = ComplexMatrix::from_fn(n, |r, c| 0.5 * (m[(r, c)] + m[(c, r)].conj()));
    let mut v = ComplexMatrix::identity(n);
    if n <= 1 {
        let vals = (0..n).map(|i| a[(i, i)].re).collect();
        return Ok((vals, v));
    }

    let norm = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * norm;

    let off_norm = |a: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                s += a[(r, c)].norm_sqr();
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&a) > tol {
        sweeps += 1;
        if sweeps > MAX_JACOBI_SWEEPS {
            return Err(NumericsError::EigenNoConvergence {
                sweeps: MAX_JACOBI_SWEEPS,
                off_norm: off_norm(&a),
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let b = apq.norm();
                // Skip rotations that cannot move anything above round-off.
                if b <= 1e-300 || b <= 1e-18 * norm {
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / b; // e^{i phi} with phi = arg(a_pq)
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Stable symmetric 2x2 Schur rotation (Golub & Van Loan):
                // the phase is first peeled off a_pq, then a real rotation
                // zeroes the residual real coupling b.
                let zeta = (aqq - app) / (2.0 * b);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Combined unitary U: column p <- c|p> - s e^{-i phi}|q>,
                //                     column q <- s|p> + c e^{-i phi}|q>.
                let u_pp = Complex64::new(c, 0.0);
                let u_pq = Complex64::new(s, 0.0);
                let u_qp = -s * phase.conj();
                let u_qq = c * phase.conj();

                // A <- U^dagger A U, touching only rows/columns p and q.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                // Clamp the eliminated pair and round-off on the diagonal.
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

                // V <- V U accumulates the eigenvectors as columns.
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    // Sort ascending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = ComplexMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    Ok((vals, vecs))
}

// ---------------------------------------------------------------------------
// Time grids
// ---------------------------------------------------------------------------

/// Uniform time grid for the fixed-step integrators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub step: f64,
}

impl GridSpec {
    /// Grid from `t_start` to `t_end` with step `step`.
    pub fn new(t_start: f64, t_end: f64, step: f64) -> Self {
        GridSpec { t_start, t_end, step }
    }

    /// Grid over `[0, t_end]`.
    pub fn from_zero(t_end: f64, step: f64) -> Self {
        GridSpec { t_start: 0.0, t_end, step }
    }

    /// Number of steps (the grid has `n_steps() + 1` points).
    pub fn n_steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.step).round() as usize
    }

    /// The i-th grid time, `t_start + i * step`.
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t_start + self.step * i as f64
    }

    /// All grid times.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|i| self.time(i)).collect()
    }

    /// Check positivity, ordering and the step-count ceiling.
    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(NumericsError::InvalidGrid(format!(
                "step must be positive and finite, got {}",
                self.step
            )));
        }
        if !(self.t_end > self.t_start) {
            return Err(NumericsError::InvalidGrid(format!(
                "t_end ({}) must exceed t_start ({})",
                self.t_end, self.t_start
            )));
        }
        let n = (self.t_end - self.t_start) / self.step;
        if !n.is_finite() || n > MAX_GRID_STEPS as f64 {
            return Err(NumericsError::InvalidGrid(format!(
                "{:.3e} steps exceed the ceiling of {}",
                n, MAX_GRID_STEPS
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Volterra integro-differential solver
// ---------------------------------------------------------------------------

/// Solve `y'(t) = int_{t_start}^{t} K(t, s, y(s)) ds` on a uniform grid.
///
/// The memory integral is discretized by the trapezoidal rule over the stored
/// history; each step is advanced by a trapezoidal predictor-corrector in
/// time (corrector iterated to 1e-12 or at most 10 times). The scheme is
/// second-order accurate globally. The full trajectory is kept in memory —
/// that is inherent to the method, cost `O(n_steps * state_len)`.
///
/// `kernel(t, s, y_s, out)` must write the integrand value K(t, s, y(s)) into
/// `out` (same length as the state, overwritten, not accumulated).
///
/// # Errors
///
/// Grid validation failures and corrector stalls.
pub fn volterra_solve<K>(
    mut kernel: K,
    y0: &[Complex64],
    grid: &GridSpec,
) -> Result<Vec<Vec<Complex64>>, NumericsError>
where
    K: FnMut(f64, f64, &[Complex64], &mut [Complex64]),
{
    grid.validate()?;
    let n_steps = grid.n_steps();
    let len = y0.len();
    let h = grid.step;

    let mut ys: Vec<Vec<Complex64>> = Vec::with_capacity(n_steps + 1);
    ys.push(y0.to_vec());

    let zero = Complex64::new(0.0, 0.0);
    let mut scratch = vec![zero; len];
    let mut g_n = vec![zero; len];
    let mut hist = vec![zero; len];
    let mut y_new = vec![zero; len];
    let mut cand = vec![zero; len];

    for n in 0..n_steps {
        let t_n = grid.time(n);
        let t_n1 = grid.time(n + 1);

        // g_n = int_{t0}^{t_n} K(t_n, s, y(s)) ds by the trapezoidal rule.
        g_n.iter_mut().for_each(|e| *e = zero);
        if n > 0 {
            kernel(t_n, grid.time(0), &ys[0], &mut scratch);
            for (g, s) in g_n.iter_mut().zip(&scratch) {
                *g += 0.5 * s;
            }
            for k in 1..n {
                kernel(t_n, grid.time(k), &ys[k], &mut scratch);
                for (g, s) in g_n.iter_mut().zip(&scratch) {
                    *g += s;
                }
            }
            kernel(t_n, t_n, &ys[n], &mut scratch);
            for (g, s) in g_n.iter_mut().zip(&scratch) {
                *g += 0.5 * s;
            }
            for g in g_n.iter_mut() {
                *g *= h;
            }
        }

        // History part of g_{n+1}: everything except the endpoint at t_{n+1},
        // which depends on the unknown y_{n+1} and is iterated below.
        kernel(t_n1, grid.time(0), &ys[0], &mut scratch);
        for (g, s) in hist.iter_mut().zip(&scratch) {
            *g = 0.5 * s;
        }
        for k in 1..=n {
            kernel(t_n1, grid.time(k), &ys[k], &mut scratch);
            for (g, s) in hist.iter_mut().zip(&scratch) {
                *g += s;
            }
        }
        for g in hist.iter_mut() {
            *g *= h;
        }

        // Predictor: explicit Euler on y' = g.
        for i in 0..len {
            y_new[i] = ys[n][i] + h * g_n[i];
        }

        // Corrector: y_{n+1} = y_n + (h/2)(g_n + g_{n+1}(y_{n+1})).
        let mut residual = f64::INFINITY;
        for _ in 0..VOLTERRA_CORRECTOR_MAX_ITERS {
            kernel(t_n1, t_n1, &y_new, &mut scratch);
            residual = 0.0;
            for i in 0..len {
                let g_n1 = hist[i] + 0.5 * h * scratch[i];
                cand[i] = ys[n][i] + 0.5 * h * (g_n[i] + g_n1);
                residual = residual.max((cand[i] - y_new[i]).norm());
            }
            std::mem::swap(&mut y_new, &mut cand);
            if residual < VOLTERRA_CORRECTOR_TOL {
                break;
            }
        }
        if !(residual < VOLTERRA_CORRECTOR_TOL) {
            // A stalled corrector (fixed-point iteration not contracting)
            // signals a step size far too large for the kernel.
            return Err(NumericsError::CorrectorStall { step: n + 1, residual });
        }
        ys.push(y_new.clone());
    }
    Ok(ys)
}

// ---------------------------------------------------------------------------
// Runge-Kutta 4
// ---------------------------------------------------------------------------

/// Classical fixed-step fourth-order Runge-Kutta for `y'(t) = f(t, y)`.
///
/// `rhs(t, y, out)` writes f(t, y) into `out` (overwritten, not accumulated).
pub fn rk4_solve<F>(
    mut rhs: F,
    y0: &[Complex64],
    grid: &GridSpec,
) -> Result<Vec<Vec<Complex64>>, NumericsError>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    grid.validate()?;
    let n_steps = grid.n_steps();
    let len = y0.len();
    let h = grid.step;

    let mut ys: Vec<Vec<Complex64>> = Vec::with_capacity(n_steps + 1);
    ys.push(y0.to_vec());

    let zero = Complex64::new(0.0, 0.0);
    let mut k1 = vec![zero; len];
    let mut k2 = vec![zero; len];
    let mut k3 = vec![zero; len];
    let mut k4 = vec![zero; len];
    let mut stage = vec![zero; len];

    for n in 0..n_steps {
        let t = grid.time(n);
        let y = &ys[n];
        rhs(t, y, &mut k1);
        for i in 0..len {
            stage[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &stage, &mut k2);
        for i in 0..len {
            stage[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &stage, &mut k3);
        for i in 0..len {
            stage[i] = y[i] + h * k3[i];
        }
        rhs(t + h, &stage, &mut k4);
        let mut next = Vec::with_capacity(len);
        for i in 0..len {
            next.push(ys[n][i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
        ys.push(next);
    }
    Ok(ys)
}

// ---------------------------------------------------------------------------
// Stable cosine powers
// ---------------------------------------------------------------------------

/// `cos(z)^n` for integer `n >= 0`, stable for large `n`.
///
/// Computed through the polar form of cos(z): with cos(z) = r e^{i theta},
/// the power is exp(n ln r) * e^{i n theta}. Because n is an integer the
/// principal argument gives the exact value — no branch continuity is needed
/// — while the log-domain magnitude avoids the overflow/underflow a direct
/// repeated product hits once n ln r leaves the double range.
pub fn stable_cos_pow(n: u32, z: Complex64) -> Complex64 {
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let w = z.cos();
    let r = w.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let theta = w.arg();
    let ln_mag = (n as f64) * r.ln();
    let ang = (n as f64) * theta;
    Complex64::from_polar(ln_mag.exp(), ang)
}

/// `ln` of the magnitude and the phase angle of `cos(z)^n`, without forming
/// the (possibly overflowing) value. Returns `(ln |w|, arg w)` such that
/// `cos(z)^n = exp(ln_mag) * e^{i ang}`.
///
/// Used by kernels that divide a large cosine power by a comparably large
/// normalization: combining exponents before exponentiating keeps such ratios
/// finite for inverse temperatures where either factor alone overflows.
pub fn ln_cos_pow(n: u32, z: Complex64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let w = z.cos();
    let r = w.norm();
    if r == 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    ((n as f64) * r.ln(), (n as f64) * w.arg())
}
