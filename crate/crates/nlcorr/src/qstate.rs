//! Complex linear-algebra substrate: state vectors, density matrices,
//! tensor products, partial traces, Pauli observables, and spin projectors.
//!
//! All types are immutable values and all operations are pure, so everything
//! here is safe to use from any number of threads.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest composite dimension accepted by tensor products.
pub const MAX_DIM: usize = 1 << 20;

pub const NORM_TOL: f64 = 1e-12;
pub const HERM_TOL: f64 = 1e-12;
pub const EIG_FLOOR: f64 = -1e-10;
pub const IMAG_TOL: f64 = 1e-10;

/// Which subsystem of a two-particle state to keep in a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    One,
    Two,
}

/// Measurement outcome label for a yes-no (binary spin) observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sign::Plus => write!(f, "+"),
            Sign::Minus => write!(f, "-"),
        }
    }
}

/// Normalized complex amplitude vector on a finite-dimensional Hilbert space.
///
/// Composite two-particle indexing is row-major: index `k = k1 * d2 + k2`
/// (particle 1 is the slow index), so `tensor` is a literal Kronecker product.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: CVector,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let v = CVector::from_vec(amps);
        let n = v.norm();
        if n < 1e-14 {
            return Err(Error::ZeroNorm(n));
        }
        Ok(StateVector { amps: v / Complex64::from(n) })
    }

    /// Wraps amplitudes that must already be normalized within `NORM_TOL`.
    pub fn from_normalized(amps: CVector) -> Result<Self> {
        let n = amps.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(StateVector { amps })
    }

    /// Wraps amplitudes without any norm check. Used by the integrator, whose
    /// contract is to measure drift rather than correct it.
    pub(crate) fn from_raw(amps: CVector) -> Self {
        StateVector { amps }
    }

    pub fn from_reals(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// Kronecker product of two states under the row-major convention.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let d = checked_dim(self.dim(), other.dim())?;
        let mut out = CVector::zeros(d);
        for i in 0..self.dim() {
            for j in 0..other.dim() {
                out[i * other.dim() + j] = self.amps[i] * other.amps[j];
            }
        }
        Ok(StateVector { amps: out })
    }

    /// Partial trace of |psi><psi| keeping the given subsystem.
    pub fn reduce(&self, keep: Subsystem, dims: (usize, usize)) -> Result<DensityMatrix> {
        let (d1, d2) = dims;
        if d1 * d2 != self.dim() {
            return Err(Error::DimensionMismatch { expected: d1 * d2, got: self.dim() });
        }
        DensityMatrix::new(partial_trace(&self.amps, keep, d1, d2))
    }

    /// <psi|X|psi>, asserted real within `IMAG_TOL`.
    pub fn expect(&self, obs: &Observable) -> Result<f64> {
        if obs.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: obs.dim() });
        }
        let v = (self.amps.adjoint() * obs.matrix() * &self.amps)[(0, 0)];
        real_part(v)
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        (self.amps.adjoint() * &other.amps)[(0, 0)]
    }

    /// Applies an operator and renormalizes; errors if the image vanishes.
    pub fn apply_normalized(&self, op: &CMatrix) -> Result<StateVector> {
        let v = op * &self.amps;
        StateVector::new(v.iter().copied().collect())
    }
}

/// Raw partial trace over the complementary subsystem of a composite vector.
pub(crate) fn partial_trace(psi: &CVector, keep: Subsystem, d1: usize, d2: usize) -> CMatrix {
    match keep {
        Subsystem::One => {
            let mut rho = CMatrix::zeros(d1, d1);
            for k in 0..d1 {
                for l in 0..d1 {
                    let mut s = Complex64::default();
                    for c in 0..d2 {
                        s += psi[k * d2 + c] * psi[l * d2 + c].conj();
                    }
                    rho[(k, l)] = s;
                }
            }
            rho
        }
        Subsystem::Two => {
            let mut rho = CMatrix::zeros(d2, d2);
            for k in 0..d2 {
                for l in 0..d2 {
                    let mut s = Complex64::default();
                    for c in 0..d1 {
                        s += psi[c * d2 + k] * psi[c * d2 + l].conj();
                    }
                    rho[(k, l)] = s;
                }
            }
            rho
        }
    }
}

/// Hermitian, positive semi-definite, unit-trace complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        let asym = hermiticity_defect(&mat);
        if asym > HERM_TOL {
            return Err(Error::NotHermitian(asym));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::NotDensity(format!("trace = {tr}")));
        }
        let eigs = hermitian_eigenvalues(&mat);
        if let Some(min) = eigs.iter().cloned().reduce(f64::min) {
            if min < EIG_FLOOR {
                return Err(Error::NotDensity(format!("negative eigenvalue {min:.3e}")));
            }
        }
        Ok(DensityMatrix { mat })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        DensityMatrix { mat: v * v.adjoint() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { mat: CMatrix::identity(dim, dim) * Complex64::from(1.0 / dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Tr(rho X), asserted real within `IMAG_TOL`.
    pub fn expect(&self, obs: &Observable) -> Result<f64> {
        if obs.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: obs.dim() });
        }
        real_part((obs.matrix() * &self.mat).trace())
    }
}

/// Complex Hermitian matrix representing a physical observable or projector.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    mat: CMatrix,
}

impl Observable {
    pub fn new(mat: CMatrix) -> Result<Self> {
        let asym = hermiticity_defect(&mat);
        if asym > HERM_TOL {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Observable { mat })
    }

    pub fn identity(dim: usize) -> Self {
        Observable { mat: CMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Observable { mat: CMatrix::zeros(dim, dim) }
    }

    pub fn sigma_x() -> Self {
        Observable { mat: cmat2([[re(0.0), re(1.0)], [re(1.0), re(0.0)]]) }
    }

    pub fn sigma_y() -> Self {
        Observable {
            mat: cmat2([
                [re(0.0), Complex64::new(0.0, -1.0)],
                [Complex64::new(0.0, 1.0), re(0.0)],
            ]),
        }
    }

    pub fn sigma_z() -> Self {
        Observable { mat: cmat2([[re(1.0), re(0.0)], [re(0.0), re(-1.0)]]) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn scale(&self, c: f64) -> Observable {
        Observable { mat: &self.mat * Complex64::from(c) }
    }

    /// Kronecker product under the row-major convention; dimensions multiply.
    pub fn tensor(&self, other: &Observable) -> Result<Observable> {
        checked_dim(self.dim(), other.dim())?;
        Ok(Observable { mat: kron(&self.mat, &other.mat) })
    }
}

/// Unit real 3-vector giving a measurement direction on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAxis {
    components: [f64; 3],
}

impl BlochAxis {
    pub fn new(components: [f64; 3]) -> Result<Self> {
        let n = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NonUnitAxis(n));
        }
        Ok(BlochAxis { components })
    }

    /// Normalizes a nonzero 3-vector into an axis.
    pub fn from_unnormalized(v: [f64; 3]) -> Result<Self> {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n < 1e-14 {
            return Err(Error::NonUnitAxis(n));
        }
        Ok(BlochAxis { components: [v[0] / n, v[1] / n, v[2] / n] })
    }

    pub const X: BlochAxis = BlochAxis { components: [1.0, 0.0, 0.0] };
    pub const Y: BlochAxis = BlochAxis { components: [0.0, 1.0, 0.0] };
    pub const Z: BlochAxis = BlochAxis { components: [0.0, 0.0, 1.0] };

    pub fn components(&self) -> [f64; 3] {
        self.components
    }

    /// a . sigma, the spin observable along this axis.
    pub fn dot_sigma(&self) -> Observable {
        let [ax, ay, az] = self.components;
        let m = Observable::sigma_x().matrix() * Complex64::from(ax)
            + Observable::sigma_y().matrix() * Complex64::from(ay)
            + Observable::sigma_z().matrix() * Complex64::from(az);
        Observable { mat: m }
    }
}

/// Spin projector E(+/-) = (I +/- a.sigma)/2. E+ + E- = I exactly by construction.
pub fn spin_projector(axis: BlochAxis, sign: Sign) -> Observable {
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    let m = (CMatrix::identity(2, 2) + axis.dot_sigma().matrix() * Complex64::from(s))
        * Complex64::from(0.5);
    Observable { mat: m }
}

/// Kronecker product with particle 1 as the slow index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// exp(-i H t) for Hermitian H, via eigendecomposition.
pub fn expm_minus_i_ht(h: &CMatrix, t: f64) -> CMatrix {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let u = &eig.eigenvectors;
    let mut d = CMatrix::zeros(h.nrows(), h.ncols());
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        d[(k, k)] = Complex64::new(0.0, -lam * t).exp();
    }
    u * d * u.adjoint()
}

/// Real eigenvalues of a (nearly) Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().collect()
}

pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    (m - m.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub(crate) fn real_part(v: Complex64) -> Result<f64> {
    if v.im.abs() >= IMAG_TOL {
        return Err(Error::ImaginaryResidue(v.im.abs()));
    }
    Ok(v.re)
}

fn checked_dim(a: usize, b: usize) -> Result<usize> {
    let d = a.checked_mul(b).ok_or(Error::DimensionOverflow(usize::MAX))?;
    if d > MAX_DIM {
        return Err(Error::DimensionOverflow(d));
    }
    Ok(d)
}

pub(crate) fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn cmat2(rows: [[Complex64; 2]; 2]) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
}
