//! Complex dense linear algebra shared by the channel model and the solvers.
//!
//! Vectors and matrices are plain `nalgebra` containers over `Complex64`.
//! Hermitian eigen-analysis always symmetrizes its input first, so callers
//! can hand in matrices that are Hermitian only up to round-off.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative slack allowed on negative eigenvalues before a covariance is
/// rejected as non-PSD.
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("non-finite entry encountered")]
    NonFinite,
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit-norm eigenvector of `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, i: usize) -> CVector {
        self.eigenvectors.column(i).into_owned()
    }

    /// `V diag(map(λ)) Vᴴ`.
    pub fn reconstruct_with(&self, map: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = map(lambda);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.eigenvectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|l| l)
    }
}

fn ensure_square(a: &CMatrix) -> Result<usize, NumericsError> {
    if a.nrows() != a.ncols() {
        return Err(NumericsError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.nrows())
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn eig_hermitian(a: &CMatrix) -> Result<HermitianEig, NumericsError> {
    let n = ensure_square(a)?;
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    if n == 0 {
        return Ok(HermitianEig { eigenvalues: Vec::new(), eigenvectors: CMatrix::zeros(0, 0) });
    }
    let sym = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sym.eigenvalues[j].total_cmp(&sym.eigenvalues[i]));

    let eigenvalues = order.iter().map(|&i| sym.eigenvalues[i]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = sym.eigenvectors.column(src);
        let norm = col.norm();
        eigenvectors.set_column(dst, &(col / Complex64::new(norm, 0.0)));
    }
    Ok(HermitianEig { eigenvalues, eigenvectors })
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to zero.
pub fn psd_project(a: &CMatrix) -> Result<CMatrix, NumericsError> {
    let eig = eig_hermitian(a)?;
    Ok(hermitian_part(&eig.reconstruct_with(|l| l.max(0.0))))
}

/// Top eigenpair of a Hermitian PSD matrix.
pub fn dominant_eigvec(a: &CMatrix) -> Result<(CVector, f64), NumericsError> {
    let eig = eig_hermitian(a)?;
    if eig.dim() == 0 {
        return Err(NumericsError::Dimension { expected: 1, got: 0 });
    }
    Ok((eig.eigenvector(0), eig.eigenvalues[0]))
}

/// One draw from CN(0, 1): real and imaginary parts each N(0, 1/2).
pub fn standard_cgauss<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn standard_cgauss_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| standard_cgauss(rng))
}

/// Draws `z = L u` with `L Lᴴ = covariance` (eigen square root) and
/// `u ~ CN(0, I)`.
///
/// Always consumes exactly `n` complex normals from the stream, so the
/// stream position after the call does not depend on the covariance.
pub fn sample_cgauss<R: Rng + ?Sized>(covariance: &CMatrix, rng: &mut R) -> Result<CVector, NumericsError> {
    let root = covariance_sqrt(covariance)?;
    let u = standard_cgauss_vec(root.ncols(), rng);
    Ok(&root * u)
}

/// Eigen square root `V diag(√max(λ,0))` of a PSD matrix.
pub fn covariance_sqrt(covariance: &CMatrix) -> Result<CMatrix, NumericsError> {
    let eig = eig_hermitian(covariance)?;
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |m, l| m.max(l.abs()));
    if let Some(&min) = eig.eigenvalues.last() {
        if min < -PSD_TOL * scale {
            return Err(NumericsError::NotPsd { min_eigenvalue: min });
        }
    }
    let mut root = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        root.column_mut(j).scale_mut(s);
    }
    Ok(root)
}

/// `v vᴴ`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Real part of `Tr(A B)`; equals the Frobenius inner product for Hermitian
/// `A`, `B`.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

pub fn unit_phase(z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / z.norm()
    }
}

/// Independent labeled random streams for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Fading,
    Randomization,
    Init,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Fading => 0x6661_6469_6e67,
            Stream::Randomization => 0x7261_6e64,
            Stream::Init => 0x696e_6974,
        }
    }
}

/// ChaCha20 keyed by `seed` with the stream id as the ChaCha nonce, so the
/// streams of one seed never overlap.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
