//! Kerdock measurement matrices from Galois-ring exponential sums.
//!
//! For `M = 2^k` the Galois ring `R = GR(4, k) = Z4[X]/(h(X))` (with `h` a
//! basic primitive polynomial, the Hensel lift of a primitive binary
//! polynomial) has a Teichmueller set `T = {0, 1, xi, ..., xi^{2^k - 2}}` of
//! size `M`. Indexing vector components by `x in T` and columns by ring
//! elements `lambda in R`, define
//!
//! ```text
//!   u_lambda[x] = i^{tr(lambda x)} / sqrt(M),     tr : R -> Z4 the ring trace.
//! ```
//!
//! The classical exponential-sum evaluations over `T` give, for distinct
//! columns, `|<u_lambda, u_nu>| = 1/sqrt(M)` when `lambda - nu` has a unit
//! component and `0` when `lambda - nu in 2R`. The `M^2` columns therefore
//! form `M` interleaved orthonormal bases that are mutually unbiased: an
//! `M x M^2` matrix with coherence exactly `1/sqrt(M)` (the Welch bound
//! asymptote) and a tight frame, `A A^H = M I`.
//!
//! Valid sizes follow the Kerdock-code dimension restriction `M = 2^(m+1)`
//! with odd `m >= 3`, i.e. `M in {16, 64, 256, 1024, ...}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{MatrixKind, MeasurementMatrix};
use crate::rng::{self, stream};
use crate::C64;

/// Primitive binary polynomials (bit i = coefficient of X^i).
fn primitive_poly(k: usize) -> Option<u64> {
    match k {
        4 => Some(0b1_0011),         // x^4 + x + 1
        6 => Some(0b100_0011),       // x^6 + x + 1
        8 => Some(0b1_0001_1101),    // x^8 + x^4 + x^3 + x^2 + 1
        10 => Some(0b100_0000_1001), // x^10 + x^3 + 1
        _ => None,
    }
}

/// Arithmetic in GR(4, k): coefficient vectors mod 4 reduced by the monic
/// basic irreducible `h` (degree k).
struct GaloisRing {
    k: usize,
    h: Vec<u8>, // length k + 1, h[k] = 1
}

type Elem = Vec<u8>; // length k, coefficients in Z4

impl GaloisRing {
    /// Graeffe/Hensel lift: h(x^2) = f(x) f(-x) mod 4 for even-degree monic f.
    fn new(k: usize) -> Result<Self> {
        let f = primitive_poly(k).ok_or_else(|| {
            Error::UnsupportedDimension(format!("no basic primitive polynomial for degree {k}"))
        })?;
        let fc: Vec<u8> = (0..=k).map(|i| ((f >> i) & 1) as u8).collect();
        // f(-x) over Z4: negate odd coefficients
        let fneg: Vec<u8> = fc
            .iter()
            .enumerate()
            .map(|(i, &c)| if i % 2 == 1 { (4 - c) % 4 } else { c })
            .collect();
        let mut prod = vec![0u8; 2 * k + 1];
        for (i, &a) in fc.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in fneg.iter().enumerate() {
                prod[i + j] = (prod[i + j] + a * b) % 4;
            }
        }
        let mut h = vec![0u8; k + 1];
        for j in 0..=k {
            debug_assert!(
                j == 0 || prod[2 * j - 1] == 0,
                "odd coefficient survived lift"
            );
            h[j] = prod[2 * j];
        }
        debug_assert_eq!(h[k], 1, "lift is monic for even k");
        Ok(Self { k, h })
    }

    fn zero(&self) -> Elem {
        vec![0; self.k]
    }

    fn one(&self) -> Elem {
        let mut e = self.zero();
        e[0] = 1;
        e
    }

    /// The residue of X, a root of h of multiplicative order 2^k - 1.
    fn xi(&self) -> Elem {
        let mut e = self.zero();
        if self.k > 1 {
            e[1] = 1;
        }
        e
    }

    fn add(&self, a: &Elem, b: &Elem) -> Elem {
        a.iter().zip(b).map(|(x, y)| (x + y) % 4).collect()
    }

    fn sub(&self, a: &Elem, b: &Elem) -> Elem {
        a.iter().zip(b).map(|(x, y)| (x + 4 - y) % 4).collect()
    }

    fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        let k = self.k;
        let mut buf = vec![0u8; 2 * k - 1];
        for i in 0..k {
            if a[i] == 0 {
                continue;
            }
            for j in 0..k {
                buf[i + j] = (buf[i + j] + a[i] * b[j]) % 4;
            }
        }
        // reduce by monic h
        for i in (k..2 * k - 1).rev() {
            let c = buf[i];
            if c != 0 {
                buf[i] = 0;
                for j in 0..k {
                    let t = (c * self.h[j]) % 4;
                    buf[i - k + j] = (buf[i - k + j] + 4 - t) % 4;
                }
            }
        }
        buf.truncate(k);
        buf
    }

    /// Frobenius sigma(a + 2b) = a^2 + 2 b^2 with a, b Teichmueller.
    ///
    /// The unit part is recovered as a = x^(2^k); the 2-part representative
    /// is c = (x - a)/2, whose square mod 2 equals b^2 mod 2.
    fn frobenius(&self, x: &Elem) -> Elem {
        let mut a = x.clone();
        for _ in 0..self.k {
            a = self.mul(&a, &a);
        }
        let d = self.sub(x, &a);
        debug_assert!(d.iter().all(|&c| c % 2 == 0), "x - x^(2^k) must lie in 2R");
        let c: Elem = d.iter().map(|&c| c / 2).collect();
        let c2 = self.mul(&c, &c);
        let a2 = self.mul(&a, &a);
        a2.iter().zip(&c2).map(|(p, q)| (p + 2 * q) % 4).collect()
    }

    /// Ring trace tr(x) = sum of the k Frobenius conjugates, landing in Z4.
    fn trace(&self, x: &Elem) -> u8 {
        let mut acc = x.clone();
        let mut conj = x.clone();
        for _ in 1..self.k {
            conj = self.frobenius(&conj);
            acc = self.add(&acc, &conj);
        }
        debug_assert!(
            acc[1..].iter().all(|&c| c == 0),
            "trace must be a Z4 constant"
        );
        acc[0]
    }

    /// Teichmueller set: 0 followed by the powers of xi.
    fn teichmueller(&self) -> Vec<Elem> {
        let order = (1usize << self.k) - 1;
        let mut t = Vec::with_capacity(order + 1);
        t.push(self.zero());
        let mut p = self.one();
        for _ in 0..order {
            t.push(p.clone());
            p = self.mul(&p, &self.xi());
        }
        t
    }
}

/// Check and decompose a Kerdock dimension: `M = 2^(m+1)`, m odd, m >= 3.
fn kerdock_degree(m_rows: usize) -> Result<usize> {
    if !m_rows.is_power_of_two() {
        return Err(Error::UnsupportedDimension(format!(
            "Kerdock sizes are powers of two, got {m_rows}"
        )));
    }
    let k = m_rows.trailing_zeros() as usize;
    // M = 2^(m+1), m odd and >= 3  <=>  k even and >= 4
    if k < 4 || k % 2 != 0 {
        return Err(Error::UnsupportedDimension(format!(
            "Kerdock requires M = 2^(m+1) with odd m >= 3 (M in 16, 64, 256, ...), got {m_rows}"
        )));
    }
    Ok(k)
}

/// Exact coherence of the size-`M` Kerdock set: `1/sqrt(M)`.
pub fn kerdock_coherence(m_rows: usize) -> Result<f64> {
    kerdock_degree(m_rows)?;
    Ok(1.0 / (m_rows as f64).sqrt())
}

struct KerdockTables {
    /// trace(X^j * x) for basis monomial j and Teichmueller index x.
    basis_traces: Vec<Vec<u8>>,
    k: usize,
    m: usize,
}

impl KerdockTables {
    fn new(m_rows: usize) -> Result<Self> {
        let k = kerdock_degree(m_rows)?;
        let ring = GaloisRing::new(k)?;
        let teich = ring.teichmueller();
        debug_assert_eq!(teich.len(), m_rows);
        let mut basis_traces = Vec::with_capacity(k);
        let mut monomial = ring.one();
        for j in 0..k {
            let row: Vec<u8> = teich
                .iter()
                .map(|x| ring.trace(&ring.mul(&monomial, x)))
                .collect();
            basis_traces.push(row);
            if j + 1 < k {
                monomial = ring.mul(&monomial, &ring.xi());
            }
        }
        Ok(Self {
            basis_traces,
            k,
            m: m_rows,
        })
    }

    /// Column for the ring element whose base-4 digits are `lambda_index`.
    fn fill_column(&self, lambda_index: usize, out: &mut [C64]) {
        const I_POWERS: [C64; 4] = [
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, -1.0),
        ];
        let scale = 1.0 / (self.m as f64).sqrt();
        let mut digits = [0u8; 16];
        let mut v = lambda_index;
        for d in digits.iter_mut().take(self.k) {
            *d = (v % 4) as u8;
            v /= 4;
        }
        for (x, slot) in out.iter_mut().enumerate() {
            let mut phase = 0u8;
            for j in 0..self.k {
                if digits[j] != 0 {
                    phase = (phase + digits[j] * self.basis_traces[j][x]) % 4;
                }
            }
            *slot = I_POWERS[phase as usize] * scale;
        }
    }
}

/// Full `M x M^2` Kerdock matrix with coherence exactly `1/sqrt(M)`.
///
/// Materializing all `M^2` columns is practical for `M <= 256`; larger sets
/// should be drawn through [`gen_kerdock_subselected`].
pub fn gen_kerdock(m_rows: usize) -> Result<MeasurementMatrix> {
    let tables = KerdockTables::new(m_rows)?;
    let n = m_rows * m_rows;
    if n > 1 << 17 {
        return Err(Error::UnsupportedDimension(format!(
            "full Kerdock set would have {n} columns; use a column subselection"
        )));
    }
    let mut values = DMatrix::<C64>::zeros(m_rows, n);
    let mut col = vec![C64::new(0.0, 0.0); m_rows];
    for lambda in 0..n {
        tables.fill_column(lambda, &mut col);
        values.column_mut(lambda).copy_from_slice(&col);
    }
    MeasurementMatrix::with_known_coherence(
        values,
        1.0 / (m_rows as f64).sqrt(),
        MatrixKind::Kerdock,
    )
}

/// `count` distinct Kerdock columns drawn uniformly at random.
///
/// The coherence of any subselection cannot exceed `1/sqrt(M)`; the cached
/// value keeps that ceiling.
pub fn gen_kerdock_subselected(
    m_rows: usize,
    count: usize,
    seed: u64,
) -> Result<MeasurementMatrix> {
    let tables = KerdockTables::new(m_rows)?;
    let n_full = m_rows
        .checked_mul(m_rows)
        .ok_or_else(|| Error::UnsupportedDimension("Kerdock index overflow".into()))?;
    if count == 0 || count > n_full {
        return Err(Error::param(format!(
            "subselection count {count} out of range 1..={n_full}"
        )));
    }
    let mut rng = rng::stream_rng(seed, stream::SUBSELECT, 0);
    let lambdas = sample_distinct_sparse(&mut rng, n_full, count);
    let mut values = DMatrix::<C64>::zeros(m_rows, count);
    let mut col = vec![C64::new(0.0, 0.0); m_rows];
    for (j, &lambda) in lambdas.iter().enumerate() {
        tables.fill_column(lambda, &mut col);
        values.column_mut(j).copy_from_slice(&col);
    }
    MeasurementMatrix::with_known_coherence(
        values,
        1.0 / (m_rows as f64).sqrt(),
        MatrixKind::Kerdock,
    )
}

/// Distinct uniform indices from a range too large for Fisher-Yates.
fn sample_distinct_sparse(rng: &mut rand_chacha::ChaCha12Rng, n: usize, k: usize) -> Vec<usize> {
    use rand::Rng;
    if k * 2 >= n {
        return rng::sample_distinct(rng, n, k);
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let v = rng.random_range(0..n);
        if seen.insert(v) {
            out.push(v);
        }
    }
    out
}

/// Uniform random subselection of the columns of an existing matrix.
pub fn subselect_columns(
    a: &MeasurementMatrix,
    count: usize,
    seed: u64,
) -> Result<MeasurementMatrix> {
    if count == 0 || count > a.n() {
        return Err(Error::param(format!(
            "subselection count {count} out of range 1..={}",
            a.n()
        )));
    }
    let mut rng = rng::stream_rng(seed, stream::SUBSELECT, 1);
    let idx = rng::sample_distinct(&mut rng, a.n(), count);
    let mut values = DMatrix::<C64>::zeros(a.m(), count);
    for (j, &src) in idx.iter().enumerate() {
        values.column_mut(j).copy_from(&a.values().column(src));
    }
    match a.coherence() {
        // max over a subset of pairs cannot grow
        Ok(mu) => MeasurementMatrix::with_known_coherence(values, mu, a.kind()),
        Err(_) => MeasurementMatrix::new(values, a.kind()),
    }
}
