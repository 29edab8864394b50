//! Discrete-equivalent observation models.
//!
//! The RD-MUD front-end output is `y = A R b + w` where the colored noise
//! `w` has covariance `sigma^2 A G^{-1} A^H`. The noise is synthesized from
//! first principles: the analog front-end correlates white noise with the
//! biorthogonal signatures, producing a *real* latent vector
//! `u' ~ N(0, sigma^2 G^{-1})` per branch, and the front-end projects it,
//! `w = A u'`. This reproduces the exact covariance and, unlike a circular
//! complex draw, also the real-part statistics that the detectors actually
//! consume: with a full unitary DFT `A` the statistics `Re[a_n^H y]` carry
//! noise with covariance exactly `sigma^2 G^{-1}`, matching the conventional
//! decorrelator branch-for-branch. The MF-bank output `z = G R b + u` uses
//! the coupled latent draw `u = G u' = sigma L x` for the same white vector
//! `x`, where `G = L L^T`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::C64;

/// Condition-number ceiling beyond which a Gram matrix is treated as singular.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Relative eigenvalue floor for the whitening inverse square root.
pub const WHITENING_EIGENVALUE_FLOOR: f64 = 1e-12;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = seed ^ 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn fingerprint_f64s(tag: u64, dims: (usize, usize), it: impl Iterator<Item = f64>) -> u64 {
    let mut h = fnv1a(tag, &(dims.0 as u64).to_le_bytes());
    h = fnv1a(h, &(dims.1 as u64).to_le_bytes());
    for v in it {
        h = fnv1a(h, &v.to_bits().to_le_bytes());
    }
    h
}

// ---------------------------------------------------------------------------
// Symbols and amplitudes
// ---------------------------------------------------------------------------

/// Ternary symbol vector `b` in {-1, 0, +1}^N with active support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolVector {
    entries: Vec<i8>,
    support: Vec<usize>,
}

impl SymbolVector {
    /// Build from raw entries; the support is derived from the nonzeros.
    pub fn from_entries(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().any(|&e| e < -1 || e > 1) {
            return Err(Error::param("symbol entries must lie in {-1, 0, +1}"));
        }
        let support = entries
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(i, _)| i)
            .collect();
        Ok(Self { entries, support })
    }

    /// Build a length-`n` vector active exactly on `active`.
    pub fn from_support(n: usize, active: &[(usize, i8)]) -> Result<Self> {
        let mut entries = vec![0i8; n];
        for &(idx, sym) in active {
            if idx >= n {
                return Err(Error::dim(format!("support index {idx} out of range {n}")));
            }
            if sym != 1 && sym != -1 {
                return Err(Error::param("active symbols must be +1 or -1"));
            }
            if entries[idx] != 0 {
                return Err(Error::param(format!("duplicate support index {idx}")));
            }
            entries[idx] = sym;
        }
        Self::from_entries(entries)
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    /// Number of active users `K`.
    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    /// Active indices in ascending order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

/// Known channel gains `r_1..r_N` (real, possibly negative, all nonzero).
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeProfile {
    gains: Vec<f64>,
}

impl AmplitudeProfile {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::param("amplitude profile must be nonempty"));
        }
        if gains.iter().any(|g| !g.is_finite() || *g == 0.0) {
            return Err(Error::param("gains must be finite and nonzero"));
        }
        Ok(Self { gains })
    }

    /// All gains equal to `value`.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn n(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn gain(&self, n: usize) -> f64 {
        self.gains[n]
    }

    /// `|r_max|` over `support` (all indices when empty).
    pub fn max_abs_on(&self, support: &[usize]) -> f64 {
        self.abs_iter(support).fold(0.0, f64::max)
    }

    /// `|r_min|` over `support` (all indices when empty).
    pub fn min_abs_on(&self, support: &[usize]) -> f64 {
        self.abs_iter(support).fold(f64::INFINITY, f64::min)
    }

    /// `|r^(1)| >= |r^(2)| >= ...` over `support`.
    pub fn sorted_abs_on(&self, support: &[usize]) -> Vec<f64> {
        let mut v: Vec<f64> = self.abs_iter(support).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }

    fn abs_iter<'a>(&'a self, support: &'a [usize]) -> Box<dyn Iterator<Item = f64> + 'a> {
        if support.is_empty() {
            Box::new(self.gains.iter().map(|g| g.abs()))
        } else {
            Box::new(support.iter().map(|&i| self.gains[i].abs()))
        }
    }
}

// ---------------------------------------------------------------------------
// Gram matrix
// ---------------------------------------------------------------------------

/// Signature crosscorrelation matrix `G`: symmetric positive definite.
///
/// Caches the Cholesky factor `L` (`G = L L^T`) and the eigenvalue extremes,
/// so `G^{-1}` is only ever applied through triangular solves.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    values: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    lambda_min: f64,
    lambda_max: f64,
    fingerprint: u64,
}

impl GramMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() || values.nrows() == 0 {
            return Err(Error::InvalidGram("G must be square and nonempty".into()));
        }
        let scale = values.amax().max(1.0);
        let asym = (&values - values.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::InvalidGram(format!(
                "G is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        let chol = values
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidGram("G is not positive definite".into()))?;
        let eig = values.clone().symmetric_eigen();
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        if lambda_min <= 0.0 {
            return Err(Error::InvalidGram("G is not positive definite".into()));
        }
        let fingerprint = fingerprint_f64s(
            0x47,
            (values.nrows(), values.ncols()),
            values.iter().copied(),
        );
        Ok(Self {
            values,
            chol,
            lambda_min,
            lambda_max,
            fingerprint,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is a valid Gram matrix")
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `lambda_max(G^{-1}) = 1 / lambda_min(G)`.
    pub fn lambda_max_inv(&self) -> f64 {
        1.0 / self.lambda_min
    }

    pub fn condition(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }

    pub fn has_unit_diagonal(&self, tol: f64) -> bool {
        self.values
            .diagonal()
            .iter()
            .all(|d| (d - 1.0).abs() <= tol)
    }

    /// Error when the condition estimate disqualifies `G` for inversion-based ops.
    pub fn check_invertible(&self) -> Result<()> {
        if self.condition() > GRAM_CONDITION_LIMIT {
            Err(Error::SingularGram {
                condition: self.condition(),
            })
        } else {
            Ok(())
        }
    }

    /// `G^{-1} v` by Cholesky solve.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    /// `G^{-1} X` for a complex right-hand side (two real solves).
    pub fn solve_complex(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let re = self.chol.solve(&x.map(|c| c.re));
        let im = self.chol.solve(&x.map(|c| c.im));
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            C64::new(re[(i, j)], im[(i, j)])
        })
    }

    /// Lower-triangular `L` with `G = L L^T`.
    pub fn chol_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Latent biorthogonal-branch noise: solves `L^T u' = x`, so
    /// `u' ~ N(0, G^{-1})` when `x` is standard normal.
    pub fn latent_noise(&self, x: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .transpose()
            .solve_upper_triangular(x)
            .expect("Cholesky factor has positive diagonal")
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

// ---------------------------------------------------------------------------
// Measurement matrix
// ---------------------------------------------------------------------------

/// Origin of a measurement matrix; carried through to result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Gaussian,
    PartialDft,
    Kerdock,
    File,
}

impl MatrixKind {
    pub fn label(&self) -> &'static str {
        match self {
            MatrixKind::Gaussian => "gaussian",
            MatrixKind::PartialDft => "partial-dft",
            MatrixKind::Kerdock => "kerdock",
            MatrixKind::File => "file",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(MatrixKind::Gaussian),
            "partial-dft" => Ok(MatrixKind::PartialDft),
            "kerdock" => Ok(MatrixKind::Kerdock),
            "file" => Ok(MatrixKind::File),
            other => Err(Error::param(format!("unknown matrix kind `{other}`"))),
        }
    }
}

/// `M x N` complex coefficient matrix with unit-norm columns and cached
/// coherence `mu = max_{n != l} |a_n^H a_l|`.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    values: DMatrix<C64>,
    coherence: Option<f64>,
    kind: MatrixKind,
    fingerprint: u64,
}

/// Unit-norm tolerance on columns.
pub const COLUMN_NORM_TOL: f64 = 1e-12;

/// Exact coherence of raw column data (pairwise Gram scan).
pub fn coherence_of(values: &DMatrix<C64>) -> Result<f64> {
    if values.ncols() < 2 {
        return Err(Error::UndefinedCoherence);
    }
    let gram = values.ad_mul(values);
    let mut mu = 0.0f64;
    for j in 0..gram.ncols() {
        for i in 0..j {
            mu = mu.max(gram[(i, j)].norm());
        }
    }
    Ok(mu)
}

impl MeasurementMatrix {
    /// Wrap unit-norm column data. Coherence is computed when `N >= 2`.
    pub fn new(values: DMatrix<C64>, kind: MatrixKind) -> Result<Self> {
        for (j, col) in values.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > COLUMN_NORM_TOL {
                return Err(Error::NotUnitNorm { column: j, norm });
            }
        }
        let coherence = if values.ncols() >= 2 {
            Some(coherence_of(&values)?)
        } else {
            None
        };
        Ok(Self::assemble(values, coherence, kind))
    }

    /// Normalize each column then wrap.
    pub fn new_normalized(mut values: DMatrix<C64>, kind: MatrixKind) -> Result<Self> {
        for mut col in values.column_iter_mut() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::param("cannot normalize a zero column"));
            }
            col /= C64::new(norm, 0.0);
        }
        Self::new(values, kind)
    }

    /// Wrap with a coherence already known exactly from the construction.
    ///
    /// Used by generators whose coherence is analytic (Kerdock sets); the
    /// value is spot-checked in tests rather than recomputed at `O(N^2 M)`.
    pub fn with_known_coherence(values: DMatrix<C64>, mu: f64, kind: MatrixKind) -> Result<Self> {
        for (j, col) in values.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > COLUMN_NORM_TOL {
                return Err(Error::NotUnitNorm { column: j, norm });
            }
        }
        Ok(Self::assemble(values, Some(mu), kind))
    }

    fn assemble(values: DMatrix<C64>, coherence: Option<f64>, kind: MatrixKind) -> Self {
        let fingerprint = fingerprint_f64s(
            0x41,
            (values.nrows(), values.ncols()),
            values.iter().flat_map(|c| [c.re, c.im]),
        );
        Self {
            values,
            coherence,
            kind,
            fingerprint,
        }
    }

    /// Number of correlators `M`.
    pub fn m(&self) -> usize {
        self.values.nrows()
    }

    /// Number of users `N`.
    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<C64> {
        &self.values
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    /// Cached coherence; errors for single-column matrices.
    pub fn coherence(&self) -> Result<f64> {
        self.coherence.ok_or(Error::UndefinedCoherence)
    }

    /// `max_n a_n^H A A^H a_n`, the row-energy term of the noise bound.
    pub fn row_energy(&self) -> f64 {
        let gram = self.values.ad_mul(&self.values);
        (0..gram.ncols())
            .map(|j| gram.column(j).norm_squared())
            .fold(0.0, f64::max)
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

// ---------------------------------------------------------------------------
// Noise model and synthesis
// ---------------------------------------------------------------------------

/// Front-end noise covariance `sigma^2 A G^{-1} A^H` with a factor
/// `L L^H = covariance` (for verification and external consumers).
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub sigma2: f64,
    pub covariance: DMatrix<C64>,
    pub factor: DMatrix<C64>,
}

impl NoiseModel {
    /// Relative Frobenius error of the factorization.
    pub fn factor_error(&self) -> f64 {
        let recon = &self.factor * self.factor.adjoint();
        let denom = self.covariance.norm();
        if denom == 0.0 {
            recon.norm()
        } else {
            (recon - &self.covariance).norm() / denom
        }
    }
}

/// Covariance of the RD-MUD front-end noise.
pub fn noise_covariance(a: &MeasurementMatrix, g: &GramMatrix, sigma2: f64) -> Result<NoiseModel> {
    if a.n() != g.n() {
        return Err(Error::dim(format!(
            "A has {} columns but G is {}x{}",
            a.n(),
            g.n(),
            g.n()
        )));
    }
    if sigma2 < 0.0 {
        return Err(Error::param("sigma2 must be nonnegative"));
    }
    g.check_invertible()?;
    let m = a.m();
    if sigma2 == 0.0 {
        return Ok(NoiseModel {
            sigma2,
            covariance: DMatrix::zeros(m, m),
            factor: DMatrix::zeros(m, m),
        });
    }
    let ginv_ah = g.solve_complex(&a.values().adjoint());
    let mut cov = a.values() * ginv_ah;
    cov.scale_mut(sigma2);
    // hermitize away solver round-off
    let cov = (&cov + cov.adjoint()).scale(0.5);
    let factor = psd_factor(&cov);
    Ok(NoiseModel {
        sigma2,
        covariance: cov,
        factor,
    })
}

/// Factor a Hermitian PSD matrix as `L L^H`; Cholesky when definite,
/// eigenvalue square root otherwise.
fn psd_factor(cov: &DMatrix<C64>) -> DMatrix<C64> {
    if let Some(chol) = cov.clone().cholesky() {
        return chol.l();
    }
    let eig = cov.clone().symmetric_eigen();
    let sq = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
    &eig.eigenvectors * sq
}

/// Per-trial noise synthesizer: `w = sigma * (A L^{-T}) x` for white real `x`,
/// so `E[w w^H] = sigma^2 A G^{-1} A^H` and the real parts of the detector
/// statistics carry the front-end covariance exactly.
#[derive(Debug, Clone)]
pub struct NoiseSynth {
    basis: DMatrix<C64>,
    sigma: f64,
}

impl NoiseSynth {
    pub fn new(a: &MeasurementMatrix, g: &GramMatrix, sigma2: f64) -> Result<Self> {
        if a.n() != g.n() {
            return Err(Error::dim("A and G dimension mismatch"));
        }
        if sigma2 < 0.0 {
            return Err(Error::param("sigma2 must be nonnegative"));
        }
        g.check_invertible()?;
        // basis = A L^{-T}  <=>  basis^T = L^{-1} A^T
        let l = g.chol_l().map(|x| C64::new(x, 0.0));
        let bt = l
            .solve_lower_triangular(&a.values().transpose())
            .ok_or_else(|| Error::InvalidGram("Cholesky factor not invertible".into()))?;
        Ok(Self {
            basis: bt.transpose(),
            sigma: sigma2.sqrt(),
        })
    }

    /// Build from an explicit basis (e.g. a whitened `W A L^{-T}`).
    pub fn from_basis(basis: DMatrix<C64>, sigma2: f64) -> Self {
        Self {
            basis,
            sigma: sigma2.max(0.0).sqrt(),
        }
    }

    /// The latent-to-noise map `A L^{-T}` (unscaled).
    pub fn basis(&self) -> &DMatrix<C64> {
        &self.basis
    }

    /// Latent white dimension (one draw per user branch).
    pub fn latent_len(&self) -> usize {
        self.basis.ncols()
    }

    /// Noise vector from an explicit latent draw.
    pub fn from_latent(&self, x: &[f64]) -> DVector<C64> {
        debug_assert_eq!(x.len(), self.latent_len());
        let xv = DVector::from_fn(x.len(), |i, _| C64::new(self.sigma * x[i], 0.0));
        &self.basis * xv
    }

    /// Draw one noise vector.
    pub fn draw(&self, rng: &mut ChaCha12Rng) -> DVector<C64> {
        let x = rng::normal_vec(rng, self.latent_len());
        self.from_latent(&x)
    }
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// Everything needed to regenerate an observation bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub a_fingerprint: u64,
    pub g_fingerprint: u64,
    pub sigma2: f64,
    pub seed: u64,
}

/// RD-MUD front-end output `y` with its provenance.
#[derive(Debug, Clone)]
pub struct FrontEndObservation {
    pub y: DVector<C64>,
    pub provenance: Provenance,
}

/// `A R b` accumulated over the active support only.
pub fn signal_vector(a: &DMatrix<C64>, r: &AmplitudeProfile, b: &SymbolVector) -> DVector<C64> {
    let mut y = DVector::zeros(a.nrows());
    for &n in b.support() {
        let c = C64::new(r.gain(n) * b.entries()[n] as f64, 0.0);
        y.axpy(c, &a.column(n), C64::new(1.0, 0.0));
    }
    y
}

/// Sample `y = A R b + w` with exact colored covariance; deterministic in `seed`.
pub fn sample_front_end(
    a: &MeasurementMatrix,
    g: &GramMatrix,
    r: &AmplitudeProfile,
    b: &SymbolVector,
    sigma2: f64,
    seed: u64,
) -> Result<FrontEndObservation> {
    if b.n() != a.n() || r.n() != a.n() {
        return Err(Error::dim("b, r and A must share the user dimension N"));
    }
    let mut y = signal_vector(a.values(), r, b);
    if sigma2 > 0.0 {
        let synth = NoiseSynth::new(a, g, sigma2)?;
        let mut rng = rng::stream_rng(seed, stream::FRONT_END_NOISE, 0);
        y += synth.draw(&mut rng);
    } else {
        g.check_invertible()?;
    }
    Ok(FrontEndObservation {
        y,
        provenance: Provenance {
            a_fingerprint: a.fingerprint(),
            g_fingerprint: g.fingerprint(),
            sigma2,
            seed,
        },
    })
}

/// Sample the conventional MF-bank output `z = G R b + u`, `u ~ N(0, sigma^2 G)`.
pub fn sample_mf_bank(
    g: &GramMatrix,
    r: &AmplitudeProfile,
    b: &SymbolVector,
    sigma2: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    if b.n() != g.n() || r.n() != g.n() {
        return Err(Error::dim("b, r and G must share the user dimension N"));
    }
    if sigma2 < 0.0 {
        return Err(Error::param("sigma2 must be nonnegative"));
    }
    g.check_invertible()?;
    let mut z = DVector::zeros(g.n());
    for &n in b.support() {
        z.axpy(
            r.gain(n) * b.entries()[n] as f64,
            &g.values().column(n),
            1.0,
        );
    }
    if sigma2 > 0.0 {
        let mut rng = rng::stream_rng(seed, stream::MF_BANK_NOISE, 0);
        let x = DVector::from_vec(rng::normal_vec(&mut rng, g.n()));
        z.axpy(sigma2.sqrt(), &(g.chol_l() * x), 1.0);
    }
    Ok(z)
}

// ---------------------------------------------------------------------------
// Whitening
// ---------------------------------------------------------------------------

/// Whitening transform `W = (A G^{-1} A^H)^{-1/2}` and the distorted
/// measurement matrix `A_w = W A` (columns deliberately *not* renormalized).
#[derive(Debug, Clone)]
pub struct WhitenedSystem {
    pub w: DMatrix<C64>,
    pub a_w: DMatrix<C64>,
}

pub fn whitening_transform(a: &MeasurementMatrix, g: &GramMatrix) -> Result<WhitenedSystem> {
    if a.n() != g.n() {
        return Err(Error::dim("A and G dimension mismatch"));
    }
    g.check_invertible()?;
    let ginv_ah = g.solve_complex(&a.values().adjoint());
    let s = a.values() * ginv_ah;
    let s = (&s + s.adjoint()).scale(0.5);
    let eig = s.symmetric_eigen();
    let lambda_max = eig.eigenvalues.max();
    if lambda_max <= 0.0 {
        return Err(Error::WhiteningUndefined("all eigenvalues vanish".into()));
    }
    let floor = WHITENING_EIGENVALUE_FLOOR * lambda_max;
    if let Some(l) = eig.eigenvalues.iter().find(|&&l| l < floor) {
        return Err(Error::WhiteningUndefined(format!(
            "eigenvalue {l:.3e} below floor {floor:.3e}; M likely exceeds the rank of A G^-1 A^H"
        )));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0)));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    let a_w = &w * a.values();
    Ok(WhitenedSystem { w, a_w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory;

    #[test]
    fn symbol_vector_support_matches_nonzeros() {
        let b = SymbolVector::from_entries(vec![0, 1, 0, -1, 0]).unwrap();
        assert_eq!(b.support(), &[1, 3]);
        assert_eq!(b.k(), 2);
        assert!(SymbolVector::from_entries(vec![2]).is_err());
    }

    #[test]
    fn amplitude_profile_rejects_zero_gain() {
        assert!(AmplitudeProfile::new(vec![1.0, 0.0]).is_err());
        let r = AmplitudeProfile::new(vec![-1.5, 1.0, 0.5]).unwrap();
        assert_eq!(r.max_abs_on(&[0, 2]), 1.5);
        assert_eq!(r.min_abs_on(&[0, 2]), 0.5);
        assert_eq!(r.sorted_abs_on(&[]), vec![1.5, 1.0, 0.5]);
    }

    #[test]
    fn gram_rejects_asymmetric_and_indefinite() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 0.5;
        assert!(GramMatrix::new(m).is_err());

        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 2.0;
        m[(1, 0)] = 2.0;
        assert!(GramMatrix::new(m).is_err());
    }

    #[test]
    fn latent_noise_has_ginv_covariance_shape() {
        // L^T u' = x  =>  u' = L^{-T} x; check G u' recovers L x.
        let g = factory::gram_gold(6, 31).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0]);
        let u = g.latent_noise(&x);
        let lx = g.chol_l() * &x;
        let gu = g.values() * u;
        assert!((gu - lx).amax() < 1e-12);
    }

    #[test]
    fn zero_sigma_noise_model_is_zero() {
        let a = factory::gen_partial_dft(3, 6, 1).unwrap();
        let g = GramMatrix::identity(6);
        let nm = noise_covariance(&a, &g, 0.0).unwrap();
        assert_eq!(nm.covariance.camax(), 0.0);
        assert_eq!(nm.factor.camax(), 0.0);
    }

    #[test]
    fn unitary_dft_covariance_is_identity() {
        // A = N x N unitary DFT, G = I, sigma2 = 1: covariance = A A^H = I
        let n = 8;
        let a = factory::gen_partial_dft(n, n, 4).unwrap();
        let nm = noise_covariance(&a, &GramMatrix::identity(n), 1.0).unwrap();
        assert!((nm.covariance - DMatrix::<C64>::identity(n, n)).camax() < 1e-10);
    }

    #[test]
    fn partial_dft_noise_is_amplified_by_n_over_m() {
        // tight frame A A^H = (N/M) I with G = I: every diagonal covariance
        // entry equals sigma^2 N / M
        let (m, n) = (5usize, 20usize);
        let sigma2 = 0.3;
        let a = factory::gen_partial_dft(m, n, 9).unwrap();
        let nm = noise_covariance(&a, &GramMatrix::identity(n), sigma2).unwrap();
        let want = sigma2 * n as f64 / m as f64;
        for i in 0..m {
            assert!((nm.covariance[(i, i)].re - want).abs() < 1e-10);
            assert!(nm.covariance[(i, i)].im.abs() < 1e-12);
        }
    }

    #[test]
    fn front_end_identity_noiseless_recovers_basis_vector() {
        // sigma = 0, A = I, G = I, r = 1, b = e_3  =>  y = e_3
        let n = 6;
        let a = MeasurementMatrix::new(
            DMatrix::from_fn(n, n, |i, j| C64::new((i == j) as u64 as f64, 0.0)),
            MatrixKind::File,
        )
        .unwrap();
        let g = GramMatrix::identity(n);
        let r = AmplitudeProfile::constant(n, 1.0).unwrap();
        let b = SymbolVector::from_support(n, &[(2, 1)]).unwrap();
        let obs = sample_front_end(&a, &g, &r, &b, 0.0, 9).unwrap();
        for i in 0..n {
            let want = if i == 2 { 1.0 } else { 0.0 };
            assert!((obs.y[i] - C64::new(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn front_end_noiseless_is_superposition_of_active_columns() {
        let a = factory::gen_gaussian(4, 9, 5).unwrap();
        let g = GramMatrix::identity(9);
        let r = AmplitudeProfile::new((0..9).map(|i| 0.5 + 0.1 * i as f64).collect()).unwrap();
        let b = SymbolVector::from_support(9, &[(1, -1), (4, 1), (7, 1)]).unwrap();
        let obs = sample_front_end(&a, &g, &r, &b, 0.0, 0).unwrap();
        let mut want = DVector::<C64>::zeros(4);
        for &n in b.support() {
            want.axpy(
                C64::new(r.gain(n) * b.entries()[n] as f64, 0.0),
                &a.values().column(n),
                C64::new(1.0, 0.0),
            );
        }
        assert!((obs.y - want).norm() < 1e-14);
    }

    #[test]
    fn front_end_observation_is_bit_deterministic() {
        let a = factory::gen_partial_dft(4, 10, 3).unwrap();
        let g = factory::gram_gold(10, 31).unwrap();
        let r = AmplitudeProfile::constant(10, 1.0).unwrap();
        let b = SymbolVector::from_support(10, &[(0, 1), (5, -1)]).unwrap();
        let o1 = sample_front_end(&a, &g, &r, &b, 0.01, 42).unwrap();
        let o2 = sample_front_end(&a, &g, &r, &b, 0.01, 42).unwrap();
        assert_eq!(o1.provenance, o2.provenance);
        for i in 0..4 {
            assert_eq!(o1.y[i].re.to_bits(), o2.y[i].re.to_bits());
            assert_eq!(o1.y[i].im.to_bits(), o2.y[i].im.to_bits());
        }
        let o3 = sample_front_end(&a, &g, &r, &b, 0.01, 43).unwrap();
        assert_ne!(o1.y[0].re.to_bits(), o3.y[0].re.to_bits());
    }

    #[test]
    fn mf_bank_noiseless_cases() {
        // sigma = 0, G = I  =>  z = R b
        let g = GramMatrix::identity(5);
        let r = AmplitudeProfile::new(vec![2.0, 1.0, 1.0, -3.0, 1.0]).unwrap();
        let b = SymbolVector::from_support(5, &[(0, 1), (3, -1)]).unwrap();
        let z = sample_mf_bank(&g, &r, &b, 0.0, 0).unwrap();
        assert_eq!(z.as_slice(), &[2.0, 0.0, 0.0, 3.0, 0.0]);

        // Gold-code G, b = e_1, r = 1  =>  z = first column of G
        let g = factory::gram_gold(5, 31).unwrap();
        let r = AmplitudeProfile::constant(5, 1.0).unwrap();
        let b = SymbolVector::from_support(5, &[(0, 1)]).unwrap();
        let z = sample_mf_bank(&g, &r, &b, 0.0, 0).unwrap();
        assert!((z - g.values().column(0)).amax() < 1e-15);
    }

    #[test]
    fn whitening_of_unitary_dft_is_identity() {
        let n = 8;
        let a = factory::gen_partial_dft(n, n, 2).unwrap();
        let g = GramMatrix::identity(n);
        let ws = whitening_transform(&a, &g).unwrap();
        let eye = DMatrix::<C64>::identity(n, n);
        assert!((ws.w - eye).camax() < 1e-10);
    }

    #[test]
    fn whitening_of_tight_frame_is_scalar() {
        // A A^H = (N/M) I, G = I  =>  W = sqrt(M/N) I, A_w = sqrt(M/N) A
        let (m, n) = (4, 12);
        let a = factory::gen_partial_dft(m, n, 7).unwrap();
        let g = GramMatrix::identity(n);
        let ws = whitening_transform(&a, &g).unwrap();
        let scale = (m as f64 / n as f64).sqrt();
        let want = a.values().scale(scale);
        assert!((ws.a_w - want).camax() < 1e-10);
    }

    #[test]
    fn whitening_whitens_random_instance() {
        let a = factory::gen_gaussian(4, 8, 11).unwrap();
        let g = factory::gram_gold(8, 31).unwrap();
        let ws = whitening_transform(&a, &g).unwrap();
        // W is Hermitian
        assert!((ws.w.adjoint() - &ws.w).camax() < 1e-10);
        // W (A G^-1 A^H) W^H = I
        let s = a.values() * g.solve_complex(&a.values().adjoint());
        let white = &ws.w * s * ws.w.adjoint();
        assert!((white - DMatrix::<C64>::identity(4, 4)).camax() < 1e-8);
    }

    #[test]
    fn whitening_rank_deficient_errors() {
        // M > N makes A G^-1 A^H rank deficient.
        let vals = DMatrix::from_fn(3, 2, |i, j| C64::new((i == j) as u64 as f64, 0.0));
        let a = MeasurementMatrix::new(vals, MatrixKind::File).unwrap();
        let g = GramMatrix::identity(2);
        match whitening_transform(&a, &g) {
            Err(Error::WhiteningUndefined(_)) => {}
            other => panic!("expected whitening-undefined, got {other:?}"),
        }
    }

    #[test]
    fn noise_factor_reproduces_covariance() {
        let a = factory::gen_gaussian(5, 9, 3).unwrap();
        let g = factory::gram_gold(9, 63).unwrap();
        let nm = noise_covariance(&a, &g, 0.37).unwrap();
        assert!(nm.factor_error() < 1e-8);
        let asym = (&nm.covariance - nm.covariance.adjoint()).camax() / nm.covariance.camax();
        assert!(asym < 1e-10);
    }
}
