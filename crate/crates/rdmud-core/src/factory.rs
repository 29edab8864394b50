//! Measurement-matrix and Gram-matrix generation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kerdock;
use crate::matfile;
use crate::model::{GramMatrix, MatrixKind, MeasurementMatrix};
use crate::rng::{self, stream};
use crate::C64;

/// Recipe for generating (or loading) a measurement matrix.
#[derive(Debug, Clone)]
pub struct MatrixRecipe {
    pub kind: MatrixKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// Candidates drawn by the min-coherence search (1 = single draw).
    pub search_count: usize,
    /// Source file for `MatrixKind::File`.
    pub path: Option<std::path::PathBuf>,
    /// Renormalize columns on load.
    pub normalize: bool,
}

impl MatrixRecipe {
    pub fn new(kind: MatrixKind, m: usize, n: usize, seed: u64) -> Self {
        Self {
            kind,
            m,
            n,
            seed,
            search_count: 1,
            path: None,
            normalize: false,
        }
    }

    pub fn with_search(mut self, count: usize) -> Self {
        self.search_count = count;
        self
    }

    /// Candidate `index` of this recipe's seed stream.
    pub fn generate_candidate(&self, index: u64) -> Result<MeasurementMatrix> {
        match self.kind {
            MatrixKind::Gaussian => gen_gaussian_indexed(self.m, self.n, self.seed, index),
            MatrixKind::PartialDft => gen_partial_dft_indexed(self.m, self.n, self.seed, index),
            MatrixKind::Kerdock => {
                if self.n == self.m * self.m {
                    kerdock::gen_kerdock(self.m)
                } else {
                    kerdock::gen_kerdock_subselected(self.m, self.n, self.seed.wrapping_add(index))
                }
            }
            MatrixKind::File => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::param("file recipe without a path"))?;
                load_matrix(path, self.normalize)
            }
        }
    }

    /// Single draw (candidate 0).
    pub fn generate(&self) -> Result<MeasurementMatrix> {
        self.generate_candidate(0)
    }
}

/// i.i.d. standard real Gaussian entries, columns scaled to unit norm.
pub fn gen_gaussian(m: usize, n: usize, seed: u64) -> Result<MeasurementMatrix> {
    gen_gaussian_indexed(m, n, seed, 0)
}

fn gen_gaussian_indexed(m: usize, n: usize, seed: u64, index: u64) -> Result<MeasurementMatrix> {
    check_dims(m, n)?;
    let mut rng = rng::stream_rng(seed, stream::MATRIX_GEN, index);
    let mut values = DMatrix::<C64>::zeros(m, n);
    // column-major fill so the draw order matches the storage order
    for mut col in values.column_iter_mut() {
        for v in col.iter_mut() {
            *v = C64::new(rng.sample(StandardNormal), 0.0);
        }
    }
    MeasurementMatrix::new_normalized(values, MatrixKind::Gaussian)
}

/// `M` distinct rows of the `N x N` DFT `[F]_{nm} = e^{i 2 pi n m / N}`,
/// columns scaled by `1/sqrt(M)` (every entry keeps magnitude `1/sqrt(M)`).
pub fn gen_partial_dft(m: usize, n: usize, seed: u64) -> Result<MeasurementMatrix> {
    gen_partial_dft_indexed(m, n, seed, 0)
}

fn gen_partial_dft_indexed(m: usize, n: usize, seed: u64, index: u64) -> Result<MeasurementMatrix> {
    check_dims(m, n)?;
    let mut rng = rng::stream_rng(seed, stream::MATRIX_GEN, index);
    let rows = rng::sample_distinct(&mut rng, n, m);
    let scale = 1.0 / (m as f64).sqrt();
    let step = std::f64::consts::TAU / n as f64;
    let values = DMatrix::<C64>::from_fn(m, n, |i, j| {
        let (s, c) = (step * (rows[i] as f64) * (j as f64)).sin_cos();
        C64::new(c * scale, s * scale)
    });
    MeasurementMatrix::new(values, MatrixKind::PartialDft)
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 || m > n {
        return Err(Error::param(format!(
            "matrix dimensions must satisfy 1 <= M <= N, got M={m}, N={n}"
        )));
    }
    Ok(())
}

/// Outcome of the min-coherence search.
#[derive(Debug, Clone, Copy)]
pub struct SearchReport {
    pub best_index: u64,
    pub best_mu: f64,
    pub candidates: usize,
}

/// Draw `recipe.search_count` candidates and keep the one with smallest
/// coherence; ties go to the earliest draw. Candidates are scored in
/// parallel but the winner matches the serial order exactly.
pub fn search_min_coherence(recipe: &MatrixRecipe) -> Result<(MeasurementMatrix, SearchReport)> {
    if recipe.search_count < 1 {
        return Err(Error::param("search_count must be at least 1"));
    }
    let scored: Result<Vec<(u64, f64)>> = (0..recipe.search_count as u64)
        .into_par_iter()
        .map(|i| {
            let cand = recipe.generate_candidate(i)?;
            Ok((i, cand.coherence()?))
        })
        .collect();
    let scored = scored?;
    let (best_index, best_mu) = scored
        .into_iter()
        .min_by(|a, b| (a.1, a.0).partial_cmp(&(b.1, b.0)).unwrap())
        .expect("at least one candidate");
    let best = recipe.generate_candidate(best_index)?;
    Ok((
        best,
        SearchReport {
            best_index,
            best_mu,
            candidates: recipe.search_count,
        },
    ))
}

/// Exact coherence `mu = max_{n != l} |a_n^H a_l|`.
pub fn coherence(a: &MeasurementMatrix) -> Result<f64> {
    a.coherence()
}

/// Welch lower bound `sqrt((N - M) / (M (N - 1)))`; 0 when `N <= M`
/// (orthonormal columns are achievable).
pub fn welch_bound(m: usize, n: usize) -> f64 {
    if n <= m || n < 2 {
        return 0.0;
    }
    (((n - m) as f64) / ((m * (n - 1)) as f64)).sqrt()
}

/// Gold-code Gram matrix `G = ((L+1)/L) I - (1/L) 11^T`, restricted to `N x N`.
///
/// Spectrum: `(L+1)/L` with multiplicity `N - 1` and `(L+1-N)/L` on the
/// all-ones direction.
pub fn gram_gold(n: usize, l: usize) -> Result<GramMatrix> {
    if l == 0 {
        return Err(Error::param("code length L must be positive"));
    }
    if n > l + 2 {
        return Err(Error::param(format!(
            "a length-{l} Gold family supports at most {} codewords, asked for {n}",
            l + 2
        )));
    }
    let lf = l as f64;
    let diag = 1.0; // (L+1)/L - 1/L
    let off = -1.0 / lf;
    let values = DMatrix::from_fn(n, n, |i, j| if i == j { diag } else { off });
    GramMatrix::new(values)
}

/// Simulated Gram matrix `G = U diag(eigs) U^T` for a seeded random
/// orthogonal `U` (QR of a Gaussian matrix, signs fixed by the R diagonal).
///
/// This G does not have a unit diagonal; it models a stress case with a
/// prescribed noise-amplification spectrum.
pub fn gram_from_spectrum(eigenvalues: &[f64], seed: u64) -> Result<GramMatrix> {
    if eigenvalues.is_empty() {
        return Err(Error::param("spectrum must be nonempty"));
    }
    if eigenvalues.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::param("spectrum eigenvalues must be positive"));
    }
    let n = eigenvalues.len();
    let mut rng = rng::stream_rng(seed, stream::GRAM_BASIS, 0);
    let gauss = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = gauss.qr();
    let mut u = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            u.column_mut(j).neg_mut();
        }
    }
    let g = &u
        * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(eigenvalues))
        * u.transpose();
    // exact symmetry for the Gram constructor
    let g = (&g + g.transpose()).scale(0.5);
    GramMatrix::new(g)
}

/// Parse an RDMUD-MAT file into a measurement matrix.
pub fn load_matrix(path: &std::path::Path, normalize: bool) -> Result<MeasurementMatrix> {
    let values = matfile::read_matrix(path)?;
    if normalize {
        MeasurementMatrix::new_normalized(values, MatrixKind::File)
    } else {
        MeasurementMatrix::new(values, MatrixKind::File)
    }
}

/// Write a measurement matrix in RDMUD-MAT format.
pub fn save_matrix(a: &MeasurementMatrix, path: &std::path::Path) -> Result<()> {
    matfile::write_matrix(path, a.values())
}
