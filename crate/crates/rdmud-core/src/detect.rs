//! RD-MUD detectors and the conventional decorrelator baseline.
//!
//! All front-end detectors share the decision statistics `Re[a_n^H y]`: the
//! symbols and gains are real, so the imaginary part carries only noise and
//! interference.
//!
//! * RDD: pick the `K` largest `|Re[a_n^H y]|`, then `b_n = sgn(r_n Re[a_n^H y])`.
//! * RDDt: threshold variant, support `{n : |Re[a_n^H y]| > xi}`.
//! * RDDF: decision-feedback matching pursuit; each iteration selects the
//!   strongest residual statistic, detects that user's *binary* symbol and
//!   subtracts it from `y` to form the next residual.
//! * RDDFt: RDDF that stops once `max_n |Re[a_n^H v]| < eps` (cap N rounds).
//! * RD-LS / RD-MMSE: replace the sign stage on a detected support with a
//!   least-squares or MMSE estimate before taking signs.
//! * RD-ML: exhaustive ternary maximum likelihood, desk-scale oracle.
//! * Decorrelator: `sgn(r_n [G^{-1} z]_n)` on the MF-bank output.
//!
//! Conventions (deterministic everywhere): argmax and top-K ties go to the
//! lowest index; `sgn(0) = 0`, so a zero statistic yields an empty symbol
//! that is counted as an error for a truly active user. A detector's support
//! is always exactly the nonzero set of its symbol vector.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{
    whitening_transform, AmplitudeProfile, GramMatrix, MeasurementMatrix, WhitenedSystem,
};
use crate::C64;

/// Cap for the exhaustive RD-ML search (3^N candidates).
pub const RD_ML_DEFAULT_MAX_N: usize = 14;

fn sgn(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Estimated support and symbols, with diagnostics.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    /// Estimated symbol vector in {-1, 0, +1}^N.
    pub symbols: Vec<i8>,
    /// Nonzero indices of `symbols`, ascending.
    pub support: Vec<usize>,
    /// Iterations executed (1 for one-shot detectors).
    pub iterations: usize,
    /// First-pass decision statistics `Re[a_n^H y]`.
    pub scores: Vec<f64>,
    /// Times an iterative detector re-selected an already chosen index.
    pub reselections: usize,
}

impl DetectionResult {
    fn from_symbols(
        symbols: Vec<i8>,
        iterations: usize,
        scores: Vec<f64>,
        reselections: usize,
    ) -> Self {
        let support = symbols
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != 0)
            .map(|(i, _)| i)
            .collect();
        Self {
            symbols,
            support,
            iterations,
            scores,
            reselections,
        }
    }
}

/// `Re[A^H y]` for all users.
pub fn real_scores(a: &DMatrix<C64>, y: &DVector<C64>) -> DVector<f64> {
    a.ad_mul(y).map(|c| c.re)
}

/// Indices of the `k` largest `|scores|`; ties broken by lower index.
fn top_k_by_abs(scores: &DVector<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_unstable_by(|&i, &j| {
        scores[j]
            .abs()
            .partial_cmp(&scores[i].abs())
            .unwrap()
            .then(i.cmp(&j))
    });
    idx.truncate(k);
    idx
}

fn argmax_abs(scores: &DVector<f64>) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &s) in scores.iter().enumerate() {
        if s.abs() > best.1 {
            best = (i, s.abs());
        }
    }
    best
}

// ---------------------------------------------------------------------------
// One-shot detectors
// ---------------------------------------------------------------------------

/// Reduced-dimension decorrelating detector (top-K statistic magnitudes).
pub fn rdd(
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    k: usize,
) -> Result<DetectionResult> {
    check_front_end_dims(y, a, r)?;
    if k > a.ncols() {
        return Err(Error::param(format!("K = {k} exceeds N = {}", a.ncols())));
    }
    let scores = real_scores(a, y);
    let support = top_k_by_abs(&scores, k);
    let mut symbols = vec![0i8; a.ncols()];
    for &n in &support {
        symbols[n] = sgn(r.gain(n) * scores[n]);
    }
    Ok(DetectionResult::from_symbols(
        symbols,
        1,
        scores.as_slice().to_vec(),
        0,
    ))
}

/// RDD threshold variant: support is every statistic strictly above `xi`.
pub fn rddt(
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    xi: f64,
) -> Result<DetectionResult> {
    check_front_end_dims(y, a, r)?;
    if !(xi > 0.0) {
        return Err(Error::param("threshold xi must be positive"));
    }
    let scores = real_scores(a, y);
    let mut symbols = vec![0i8; a.ncols()];
    for n in 0..a.ncols() {
        if scores[n].abs() > xi {
            symbols[n] = sgn(r.gain(n) * scores[n]);
        }
    }
    Ok(DetectionResult::from_symbols(
        symbols,
        1,
        scores.as_slice().to_vec(),
        0,
    ))
}

// ---------------------------------------------------------------------------
// Symbol stages shared by the composed detectors
// ---------------------------------------------------------------------------

/// Least-squares symbol assignment on `support`:
/// `b_n = sgn(r_n Re[(A_S^H A_S)^{-1} A_S^H y]_n)`, zero elsewhere.
pub fn rd_ls_symbols(
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    support: &[usize],
) -> Result<Vec<i8>> {
    check_front_end_dims(y, a, r)?;
    let mut symbols = vec![0i8; a.ncols()];
    if support.is_empty() {
        return Ok(symbols);
    }
    let a_s = gather_columns(a, support);
    let gram = a_s.ad_mul(&a_s);
    let chol = gram.cholesky().ok_or(Error::LeastSquaresSingular)?;
    let est = chol.solve(&a_s.ad_mul(y));
    for (i, &n) in support.iter().enumerate() {
        symbols[n] = sgn(r.gain(n) * est[i].re);
    }
    Ok(symbols)
}

/// Precomputed `sigma^2 A G^{-1} A^H`, the noise term of the MMSE statistic
/// covariance. Reusable across trials on a fixed system.
#[derive(Debug, Clone)]
pub struct MmseContext {
    pub noise_cov: DMatrix<C64>,
}

impl MmseContext {
    pub fn new(a: &MeasurementMatrix, g: &GramMatrix, sigma2: f64) -> Result<Self> {
        Ok(Self {
            noise_cov: crate::model::noise_covariance(a, g, sigma2)?.covariance,
        })
    }

    /// White-noise context (after the whitening transform).
    pub fn white(m: usize, sigma2: f64) -> Self {
        Self {
            noise_cov: DMatrix::identity(m, m).scale(sigma2),
        }
    }
}

/// MMSE symbol assignment on `support`:
/// `b_n = sgn(r_n Re[(M y)_n])` with
/// `M = R_S A_S^H (A_S R_S^2 A_S^H + sigma^2 A G^{-1} A^H)^{-1}`.
pub fn rd_mmse_symbols_with(
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    ctx: &MmseContext,
    support: &[usize],
) -> Result<Vec<i8>> {
    check_front_end_dims(y, a, r)?;
    let mut symbols = vec![0i8; a.ncols()];
    if support.is_empty() {
        return Ok(symbols);
    }
    let m = a.nrows();
    let mut w = ctx.noise_cov.clone();
    // W += A_S R_S^2 A_S^H, accumulated as rank-one updates
    for &n in support {
        let rn2 = r.gain(n) * r.gain(n);
        let col = a.column(n);
        for i in 0..m {
            for j in 0..m {
                w[(i, j)] += col[i] * col[j].conj() * rn2;
            }
        }
    }
    let chol = w.cholesky().ok_or(Error::MmseSingular)?;
    let q = chol.solve(y);
    for &n in support {
        let est = r.gain(n) * a.column(n).dotc(&q).re;
        symbols[n] = sgn(r.gain(n) * est);
    }
    Ok(symbols)
}

/// MMSE symbols with the context computed in place.
pub fn rd_mmse_symbols(
    y: &DVector<C64>,
    a: &MeasurementMatrix,
    g: &GramMatrix,
    r: &AmplitudeProfile,
    sigma2: f64,
    support: &[usize],
) -> Result<Vec<i8>> {
    let ctx = MmseContext::new(a, g, sigma2)?;
    rd_mmse_symbols_with(y, a.values(), r, &ctx, support)
}

/// Symbol stage used by the composed detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolStage {
    /// Per-user sign detection (the plain RDD / RDDF rule).
    Sign,
    /// Least-squares interference removal on the detected support.
    LeastSquares,
    /// MMSE estimate on the detected support.
    Mmse,
}

impl SymbolStage {
    pub fn label(&self) -> &'static str {
        match self {
            SymbolStage::Sign => "sign",
            SymbolStage::LeastSquares => "ls",
            SymbolStage::Mmse => "mmse",
        }
    }
}

fn apply_stage(
    stage: SymbolStage,
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    mmse: Option<&MmseContext>,
    support: &[usize],
    sign_symbols: &[i8],
) -> Result<Vec<i8>> {
    match stage {
        SymbolStage::Sign => Ok(sign_symbols.to_vec()),
        SymbolStage::LeastSquares => rd_ls_symbols(y, a, r, support),
        SymbolStage::Mmse => {
            let ctx =
                mmse.ok_or_else(|| Error::DetectorSpec("MMSE stage requires G and sigma2".into()))?;
            rd_mmse_symbols_with(y, a, r, ctx, support)
        }
    }
}

// ---------------------------------------------------------------------------
// Decision-feedback detectors
// ---------------------------------------------------------------------------

/// RDDF: `K` rounds of matching pursuit with binary decision feedback.
pub fn rddf(
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    k: usize,
) -> Result<DetectionResult> {
    rddf_with_stage(y, a, r, k, SymbolStage::Sign, None)
}

/// RDDF with a configurable per-iteration symbol stage (the "modified RDDF"
/// variants re-estimate every detected symbol by LS or MMSE each round).
pub fn rddf_with_stage(
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    k: usize,
    stage: SymbolStage,
    mmse: Option<&MmseContext>,
) -> Result<DetectionResult> {
    check_front_end_dims(y, a, r)?;
    if k > a.ncols() {
        return Err(Error::param(format!("K = {k} exceeds N = {}", a.ncols())));
    }
    run_feedback_loop(y, a, r, FeedbackStop::FixedRounds(k), stage, mmse)
}

/// RDDFt: decision feedback that stops when the residual holds no
/// significant component, `max_n |Re[a_n^H v]| < eps` (safety cap N rounds).
pub fn rddft(
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    eps: f64,
) -> Result<DetectionResult> {
    rddft_with_stage(y, a, r, eps, SymbolStage::Sign, None)
}

pub fn rddft_with_stage(
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    eps: f64,
    stage: SymbolStage,
    mmse: Option<&MmseContext>,
) -> Result<DetectionResult> {
    check_front_end_dims(y, a, r)?;
    if !(eps > 0.0) {
        return Err(Error::param("threshold eps must be positive"));
    }
    run_feedback_loop(y, a, r, FeedbackStop::Residual(eps), stage, mmse)
}

enum FeedbackStop {
    FixedRounds(usize),
    Residual(f64),
}

fn run_feedback_loop(
    y: &DVector<C64>,
    a: &DMatrix<C64>,
    r: &AmplitudeProfile,
    stop: FeedbackStop,
    stage: SymbolStage,
    mmse: Option<&MmseContext>,
) -> Result<DetectionResult> {
    let n = a.ncols();
    let max_rounds = match stop {
        FeedbackStop::FixedRounds(k) => k,
        FeedbackStop::Residual(_) => n,
    };
    let mut symbols = vec![0i8; n];
    let mut selected: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    let mut first_scores: Vec<f64> = Vec::new();
    let mut reselections = 0usize;
    let mut rounds = 0usize;

    for round in 0..max_rounds {
        let scores = real_scores(a, &residual);
        if round == 0 {
            first_scores = scores.as_slice().to_vec();
        }
        let (n_k, peak) = argmax_abs(&scores);
        if let FeedbackStop::Residual(eps) = stop {
            if peak < eps {
                break;
            }
        }
        rounds = round + 1;
        if selected.contains(&n_k) {
            reselections += 1;
        } else {
            selected.push(n_k);
        }
        symbols[n_k] = sgn(r.gain(n_k) * scores[n_k]);
        if stage != SymbolStage::Sign {
            let mut sorted = selected.clone();
            sorted.sort_unstable();
            symbols = apply_stage(stage, y, a, r, mmse, &sorted, &symbols)?;
        }
        // residual recomputed from scratch: v = y - A R b
        residual.copy_from(y);
        for (idx, &s) in symbols.iter().enumerate() {
            if s != 0 {
                residual.axpy(
                    C64::new(-r.gain(idx) * s as f64, 0.0),
                    &a.column(idx),
                    C64::new(1.0, 0.0),
                );
            }
        }
    }
    if first_scores.is_empty() {
        first_scores = real_scores(a, y).as_slice().to_vec();
    }
    Ok(DetectionResult::from_symbols(
        symbols,
        rounds,
        first_scores,
        reselections,
    ))
}

// ---------------------------------------------------------------------------
// RD-ML (exhaustive oracle)
// ---------------------------------------------------------------------------

/// Precomputed pieces of the RD-ML objective
/// `2 Re[y^H P A R b] - b^H R A^H P A R b` with `P = (A G^{-1} A^H)^{-1}`.
#[derive(Debug, Clone)]
pub struct MlContext {
    /// `(P A R)`, mapping `y` to the linear term through `Re[C^H y]`.
    c: DMatrix<C64>,
    /// `Re[R A^H P A R]`, the quadratic form (real symmetric).
    q: DMatrix<f64>,
}

impl MlContext {
    pub fn new(a: &MeasurementMatrix, g: &GramMatrix, r: &AmplitudeProfile) -> Result<Self> {
        if a.n() != g.n() || r.n() != a.n() {
            return Err(Error::dim("A, G, r dimension mismatch"));
        }
        let s = a.values() * g.solve_complex(&a.values().adjoint());
        let s = (&s + s.adjoint()).scale(0.5);
        let chol = s.cholesky().ok_or_else(|| {
            Error::WhiteningUndefined("A G^-1 A^H singular in the ML objective".into())
        })?;
        // C = P A R
        let mut ar = a.values().clone();
        for (j, mut col) in ar.column_iter_mut().enumerate() {
            col *= C64::new(r.gain(j), 0.0);
        }
        let c = chol.solve(&ar);
        let q_c = ar.ad_mul(&c);
        let q = q_c.map(|z| z.re);
        Ok(Self { c, q })
    }

    /// Linear objective coefficients for a given observation.
    pub fn linear_term(&self, y: &DVector<C64>) -> DVector<f64> {
        self.c.ad_mul(y).map(|z| z.re)
    }

    /// Objective value of a ternary symbol vector.
    pub fn objective(&self, lin: &DVector<f64>, symbols: &[i8]) -> f64 {
        let mut val = 0.0;
        for (i, &si) in symbols.iter().enumerate() {
            if si == 0 {
                continue;
            }
            let s = si as f64;
            let mut quad = 0.0;
            for (j, &sj) in symbols.iter().enumerate() {
                if sj != 0 {
                    quad += sj as f64 * self.q[(i, j)];
                }
            }
            val += s * (2.0 * lin[i] - quad);
        }
        val
    }
}

/// Options for the exhaustive search.
#[derive(Debug, Clone, Copy)]
pub struct MlOptions {
    /// Refuse problems with more than this many users.
    pub max_n: usize,
    /// Restrict the search to supports of exactly this size.
    pub k: Option<usize>,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            max_n: RD_ML_DEFAULT_MAX_N,
            k: None,
        }
    }
}

/// Exhaustive RD-ML over `b in {-1, 0, +1}^N`; ties resolved toward the
/// lexicographically smallest vector (entries ordered -1 < 0 < +1).
pub fn rd_ml(
    y: &DVector<C64>,
    a: &MeasurementMatrix,
    g: &GramMatrix,
    r: &AmplitudeProfile,
    options: MlOptions,
) -> Result<DetectionResult> {
    let ctx = MlContext::new(a, g, r)?;
    rd_ml_with(y, &ctx, a.n(), options)
}

/// RD-ML with a precomputed context.
pub fn rd_ml_with(
    y: &DVector<C64>,
    ctx: &MlContext,
    n: usize,
    options: MlOptions,
) -> Result<DetectionResult> {
    if n > options.max_n {
        return Err(Error::ExhaustiveSearchTooLarge {
            n,
            max_n: options.max_n,
        });
    }
    let lin = ctx.linear_term(y);
    let mut digits = vec![0u8; n]; // 0 -> -1, 1 -> 0, 2 -> +1
    let mut symbols = vec![-1i8; n];
    let mut best_val = f64::NEG_INFINITY;
    let mut best: Vec<i8> = vec![0; n];
    loop {
        let active = symbols.iter().filter(|&&s| s != 0).count();
        if options.k.map_or(true, |k| active == k) {
            let val = ctx.objective(&lin, &symbols);
            if val > best_val {
                best_val = val;
                best.copy_from_slice(&symbols);
            }
        }
        // advance the big-endian ternary counter (last index fastest) so the
        // scan enumerates b in lexicographic order
        let mut pos = n;
        loop {
            if pos == 0 {
                let scores = lin.as_slice().to_vec();
                return Ok(DetectionResult::from_symbols(best, 1, scores, 0));
            }
            pos -= 1;
            if digits[pos] < 2 {
                digits[pos] += 1;
                symbols[pos] = digits[pos] as i8 - 1;
                break;
            }
            digits[pos] = 0;
            symbols[pos] = -1;
        }
    }
}

/// Objective value of an arbitrary detector output under the ML criterion.
pub fn rd_ml_objective(
    y: &DVector<C64>,
    a: &MeasurementMatrix,
    g: &GramMatrix,
    r: &AmplitudeProfile,
    symbols: &[i8],
) -> Result<f64> {
    let ctx = MlContext::new(a, g, r)?;
    Ok(ctx.objective(&ctx.linear_term(y), symbols))
}

// ---------------------------------------------------------------------------
// Conventional decorrelator
// ---------------------------------------------------------------------------

/// `b_n = sgn(r_n [G^{-1} z]_n)` on the MF-bank output (all users assumed
/// active, the classical synchronous MUD convention).
pub fn conventional_decorrelator(
    z: &DVector<f64>,
    g: &GramMatrix,
    r: &AmplitudeProfile,
) -> Result<Vec<i8>> {
    if z.len() != g.n() || r.n() != g.n() {
        return Err(Error::dim("z, G, r dimension mismatch"));
    }
    g.check_invertible()?;
    let t = g.solve(z);
    Ok((0..g.n()).map(|n| sgn(r.gain(n) * t[n])).collect())
}

// ---------------------------------------------------------------------------
// Detector specification / dispatch
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorFamily {
    Rdd,
    Rddt,
    Rddf,
    Rddft,
    RdLs,
    RdMmse,
    RdMl,
    Decorrelator,
}

impl DetectorFamily {
    pub fn label(&self) -> &'static str {
        match self {
            DetectorFamily::Rdd => "rdd",
            DetectorFamily::Rddt => "rddt",
            DetectorFamily::Rddf => "rddf",
            DetectorFamily::Rddft => "rddft",
            DetectorFamily::RdLs => "rd-ls",
            DetectorFamily::RdMmse => "rd-mmse",
            DetectorFamily::RdMl => "rd-ml",
            DetectorFamily::Decorrelator => "decorrelator",
        }
    }
}

impl std::str::FromStr for DetectorFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rdd" => DetectorFamily::Rdd,
            "rddt" => DetectorFamily::Rddt,
            "rddf" => DetectorFamily::Rddf,
            "rddft" => DetectorFamily::Rddft,
            "rd-ls" => DetectorFamily::RdLs,
            "rd-mmse" => DetectorFamily::RdMmse,
            "rd-ml" => DetectorFamily::RdMl,
            "decorrelator" => DetectorFamily::Decorrelator,
            other => return Err(Error::DetectorSpec(format!("unknown family `{other}`"))),
        })
    }
}

/// A fully-specified detector.
#[derive(Debug, Clone)]
pub struct DetectorSpec {
    pub family: DetectorFamily,
    pub k: Option<usize>,
    pub xi: Option<f64>,
    pub eps: Option<f64>,
    pub whiten: bool,
    pub symbol_stage: SymbolStage,
}

impl DetectorSpec {
    pub fn new(family: DetectorFamily) -> Self {
        Self {
            family,
            k: None,
            xi: None,
            eps: None,
            whiten: false,
            symbol_stage: SymbolStage::Sign,
        }
    }

    pub fn rdd(k: usize) -> Self {
        Self {
            k: Some(k),
            ..Self::new(DetectorFamily::Rdd)
        }
    }

    pub fn rddt(xi: f64) -> Self {
        Self {
            xi: Some(xi),
            ..Self::new(DetectorFamily::Rddt)
        }
    }

    pub fn rddf(k: usize) -> Self {
        Self {
            k: Some(k),
            ..Self::new(DetectorFamily::Rddf)
        }
    }

    pub fn rddft(eps: f64) -> Self {
        Self {
            eps: Some(eps),
            ..Self::new(DetectorFamily::Rddft)
        }
    }

    pub fn with_stage(mut self, stage: SymbolStage) -> Self {
        self.symbol_stage = stage;
        self
    }

    pub fn whitened(mut self) -> Self {
        self.whiten = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let need = |cond: bool, what: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::DetectorSpec(format!(
                    "{} requires {what}",
                    self.family.label()
                )))
            }
        };
        match self.family {
            DetectorFamily::Rdd | DetectorFamily::RdLs | DetectorFamily::RdMmse => {
                need(self.k.is_some(), "K")
            }
            DetectorFamily::Rddf => need(self.k.is_some(), "K"),
            DetectorFamily::Rddt => need(self.xi.map_or(false, |x| x > 0.0), "a positive xi"),
            DetectorFamily::Rddft => need(self.eps.map_or(false, |e| e > 0.0), "a positive eps"),
            DetectorFamily::RdMl | DetectorFamily::Decorrelator => Ok(()),
        }
    }

    /// CSV-stable label, e.g. `rddt(xi=0.8)`, `rddf+ls`, `rdd+w`.
    pub fn label(&self) -> String {
        let mut s = self.family.label().to_string();
        match self.family {
            DetectorFamily::Rddt => {
                if let Some(xi) = self.xi {
                    s = format!("rddt(xi={xi})");
                }
            }
            DetectorFamily::Rddft => {
                if let Some(eps) = self.eps {
                    s = format!("rddft(eps={eps})");
                }
            }
            _ => {}
        }
        if self.symbol_stage != SymbolStage::Sign
            && matches!(self.family, DetectorFamily::Rddf | DetectorFamily::Rddft)
        {
            s.push('+');
            s.push_str(self.symbol_stage.label());
        }
        if self.whiten {
            s.push_str("+w");
        }
        s
    }

    /// Run on a front-end observation. The decorrelator family operates on
    /// the MF-bank output instead; see [`conventional_decorrelator`].
    pub fn run_front_end(
        &self,
        y: &DVector<C64>,
        a: &MeasurementMatrix,
        g: &GramMatrix,
        r: &AmplitudeProfile,
        sigma2: f64,
    ) -> Result<DetectionResult> {
        self.validate()?;
        if self.family == DetectorFamily::Decorrelator {
            return Err(Error::DetectorSpec(
                "the decorrelator runs on the MF-bank output z, not on y".into(),
            ));
        }
        let whitened: Option<WhitenedSystem> = if self.whiten {
            Some(whitening_transform(a, g)?)
        } else {
            None
        };
        let (av, yw);
        let yv = match &whitened {
            Some(ws) => {
                av = ws.a_w.clone();
                yw = &ws.w * y;
                &yw
            }
            None => {
                av = a.values().clone();
                y
            }
        };
        let mmse =
            if self.symbol_stage == SymbolStage::Mmse || self.family == DetectorFamily::RdMmse {
                Some(match &whitened {
                    Some(_) => MmseContext::white(a.m(), sigma2),
                    None => MmseContext::new(a, g, sigma2)?,
                })
            } else {
                None
            };
        match self.family {
            DetectorFamily::Rdd => rdd(yv, &av, r, self.k.unwrap()),
            DetectorFamily::Rddt => rddt(yv, &av, r, self.xi.unwrap()),
            DetectorFamily::Rddf => rddf_with_stage(
                yv,
                &av,
                r,
                self.k.unwrap(),
                self.symbol_stage,
                mmse.as_ref(),
            ),
            DetectorFamily::Rddft => rddft_with_stage(
                yv,
                &av,
                r,
                self.eps.unwrap(),
                self.symbol_stage,
                mmse.as_ref(),
            ),
            DetectorFamily::RdLs => {
                let base = rdd(yv, &av, r, self.k.unwrap())?;
                let symbols = rd_ls_symbols(yv, &av, r, &base.support)?;
                Ok(DetectionResult::from_symbols(symbols, 1, base.scores, 0))
            }
            DetectorFamily::RdMmse => {
                let base = rdd(yv, &av, r, self.k.unwrap())?;
                let symbols =
                    rd_mmse_symbols_with(yv, &av, r, mmse.as_ref().unwrap(), &base.support)?;
                Ok(DetectionResult::from_symbols(symbols, 1, base.scores, 0))
            }
            DetectorFamily::RdMl => {
                if self.whiten {
                    return Err(Error::DetectorSpec(
                        "rd-ml already whitens internally; whiten flag unsupported".into(),
                    ));
                }
                rd_ml(
                    yv,
                    a,
                    g,
                    r,
                    MlOptions {
                        max_n: RD_ML_DEFAULT_MAX_N,
                        k: self.k,
                    },
                )
            }
            DetectorFamily::Decorrelator => unreachable!(),
        }
    }
}

fn check_front_end_dims(y: &DVector<C64>, a: &DMatrix<C64>, r: &AmplitudeProfile) -> Result<()> {
    if y.len() != a.nrows() {
        return Err(Error::dim(format!(
            "y has length {} but A has {} rows",
            y.len(),
            a.nrows()
        )));
    }
    if r.n() != a.ncols() {
        return Err(Error::dim(format!(
            "r has length {} but A has {} columns",
            r.n(),
            a.ncols()
        )));
    }
    Ok(())
}

fn gather_columns(a: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(a.nrows(), idx.len());
    for (j, &src) in idx.iter().enumerate() {
        out.column_mut(j).copy_from(&a.column(src));
    }
    out
}
