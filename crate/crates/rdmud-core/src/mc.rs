//! Reproducible Monte Carlo estimation of the probability-of-symbol-error.
//!
//! Each trial draws an active set uniformly among K-subsets, i.i.d. +/-1
//! symbols, per-trial gains, and one latent white vector that drives both
//! the RD-MUD noise `w = sigma (A L^{-T}) x` and the coupled MF-bank noise
//! `u = sigma L x` (these are the same analog noise seen through the two
//! front-ends). The per-trial RNG stream is keyed by `(master_seed, TRIAL,
//! trial_index)`, so estimates are invariant to thread count and chunking,
//! and threshold tuning shares trials across grid points (common random
//! numbers).
//!
//! A joint error (the probability-of-symbol-error event) is a wrong support
//! or a right support with any wrong symbol; the counters keep the two terms
//! separate so `joint = support_errors + symbol_errors_given_support` holds
//! exactly. Detector failures (e.g. a rank-deficient LS stage when the
//! threshold rule over-selects) are tallied separately and counted as
//! support errors, never silently dropped.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::detect::{
    conventional_decorrelator, rd_ls_symbols, rd_ml_with, rd_mmse_symbols_with, rdd,
    rddf_with_stage, rddft_with_stage, rddt, DetectionResult, DetectorFamily, DetectorSpec,
    MlContext, MlOptions, MmseContext, SymbolStage,
};
use crate::error::{Error, Result};
use crate::factory::{self, MatrixRecipe};
use crate::model::{
    whitening_transform, AmplitudeProfile, GramMatrix, MatrixKind, MeasurementMatrix, NoiseSynth,
};
use crate::rng::{self, stream};
use crate::C64;

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

/// Per-trial amplitude law.
#[derive(Debug, Clone, PartialEq)]
pub enum AmplitudeRule {
    /// Every user has the same constant gain.
    Constant(f64),
    /// Gains redrawn uniformly in `[lo, hi]` for every user each trial.
    Uniform { lo: f64, hi: f64 },
}

impl AmplitudeRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AmplitudeRule::Constant(c) => {
                if c == 0.0 || !c.is_finite() {
                    return Err(Error::param("constant gain must be finite and nonzero"));
                }
            }
            AmplitudeRule::Uniform { lo, hi } => {
                if !(lo > 0.0) || hi < lo {
                    return Err(Error::param("uniform gains need 0 < lo <= hi"));
                }
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut rand_chacha::ChaCha12Rng, n: usize) -> Vec<f64> {
        match *self {
            AmplitudeRule::Constant(c) => vec![c; n],
            AmplitudeRule::Uniform { lo, hi } => {
                (0..n).map(|_| rng.random_range(lo..=hi)).collect()
            }
        }
    }
}

/// Experiment shared by one or more detectors.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub a: Arc<MeasurementMatrix>,
    pub g: Arc<GramMatrix>,
    pub k: usize,
    pub amplitude: AmplitudeRule,
    pub sigma2: f64,
    pub master_seed: u64,
    /// Debugging mode: hold the active set fixed instead of redrawing it.
    pub fixed_support: Option<Vec<usize>>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.a.n() != self.g.n() {
            return Err(Error::dim("A and G disagree on N"));
        }
        if self.k > self.a.n() {
            return Err(Error::param("K exceeds N"));
        }
        if self.sigma2 < 0.0 {
            return Err(Error::param("sigma2 must be nonnegative"));
        }
        self.amplitude.validate()?;
        if let Some(s) = &self.fixed_support {
            if s.len() != self.k || s.iter().any(|&i| i >= self.a.n()) {
                return Err(Error::param("fixed support must be K valid indices"));
            }
        }
        Ok(())
    }
}

/// One experiment, one detector.
#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub base: ExperimentSpec,
    pub detector: DetectorSpec,
}

/// A fully-detailed trial: the drawn truth and every detector's output.
#[derive(Debug, Clone)]
pub struct TrialDetail {
    pub support: Vec<usize>,
    pub symbols: Vec<i8>,
    pub gains: Vec<f64>,
    pub results: Vec<DetectionResult>,
}

/// Outcome flags of a single trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub support_correct: bool,
    pub symbols_correct: bool,
    /// Detector raised an error (counted as a support error).
    pub failed: bool,
    pub reselections: usize,
}

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

/// Aggregated Monte Carlo estimate of the probability-of-symbol-error.
#[derive(Debug, Clone, Copy)]
pub struct PeEstimate {
    pub trials: u64,
    pub support_errors: u64,
    pub symbol_errors_given_support: u64,
    /// `support_errors + symbol_errors_given_support`.
    pub joint_errors: u64,
    pub detector_failures: u64,
    pub reselections: u64,
    /// `joint_errors / trials`.
    pub pe: f64,
    /// 95% normal-approximation half-width.
    pub ci_half_width: f64,
    pub correct_support_trials: u64,
    /// `P{b wrong | support right}`; `None` when no trial had the right support.
    pub conditional_symbol_error: Option<f64>,
}

impl PeEstimate {
    fn from_counts(trials: u64, c: Counts) -> Self {
        let joint = c.support_errors + c.symbol_errors_given_support;
        let pe = joint as f64 / trials as f64;
        let correct = trials - c.support_errors;
        PeEstimate {
            trials,
            support_errors: c.support_errors,
            symbol_errors_given_support: c.symbol_errors_given_support,
            joint_errors: joint,
            detector_failures: c.failures,
            reselections: c.reselections,
            pe,
            ci_half_width: 1.96 * (pe * (1.0 - pe) / trials as f64).sqrt(),
            correct_support_trials: correct,
            conditional_symbol_error: (correct > 0)
                .then(|| c.symbol_errors_given_support as f64 / correct as f64),
        }
    }

    /// Overlap of the 95% confidence intervals of two estimates.
    pub fn ci_overlaps(&self, other: &PeEstimate) -> bool {
        let (a_lo, a_hi) = (self.pe - self.ci_half_width, self.pe + self.ci_half_width);
        let (b_lo, b_hi) = (
            other.pe - other.ci_half_width,
            other.pe + other.ci_half_width,
        );
        a_lo <= b_hi && b_lo <= a_hi
    }

    /// Exact Clopper-Pearson interval for the joint error probability.
    pub fn clopper_pearson(&self, confidence: f64) -> (f64, f64) {
        clopper_pearson(self.joint_errors, self.trials, confidence)
    }
}

/// Exact binomial (Clopper-Pearson) confidence interval.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    use statrs::distribution::{Beta, ContinuousCDF};
    assert!(trials > 0 && (0.0..1.0).contains(&confidence));
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .unwrap()
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

#[derive(Debug, Default, Clone, Copy)]
struct Counts {
    support_errors: u64,
    symbol_errors_given_support: u64,
    failures: u64,
    reselections: u64,
}

impl Counts {
    fn absorb(&mut self, o: TrialOutcome) {
        if o.failed || !o.support_correct {
            self.support_errors += 1;
        } else if !o.symbols_correct {
            self.symbol_errors_given_support += 1;
        }
        if o.failed {
            self.failures += 1;
        }
        self.reselections += o.reselections as u64;
    }

    fn merge(mut self, o: Counts) -> Counts {
        self.support_errors += o.support_errors;
        self.symbol_errors_given_support += o.symbol_errors_given_support;
        self.failures += o.failures;
        self.reselections += o.reselections;
        self
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

struct TrialDraw {
    support: Vec<usize>,
    symbols: Vec<i8>,
    gains: Vec<f64>,
    latent: Vec<f64>,
}

fn draw_trial(base: &ExperimentSpec, trial_index: u64) -> TrialDraw {
    let n = base.a.n();
    let mut rng = rng::stream_rng(base.master_seed, stream::TRIAL, trial_index);
    let mut support = match &base.fixed_support {
        Some(s) => s.clone(),
        None => rng::sample_distinct(&mut rng, n, base.k),
    };
    support.sort_unstable();
    let mut symbols = vec![0i8; n];
    for &idx in &support {
        symbols[idx] = if rng.random::<bool>() { 1 } else { -1 };
    }
    let gains = base.amplitude.draw(&mut rng, n);
    let latent = rng::normal_vec(&mut rng, n);
    TrialDraw {
        support,
        symbols,
        gains,
        latent,
    }
}

enum SysId {
    Raw,
    Whitened,
}

struct System {
    cols: DMatrix<C64>,
    synth: NoiseSynth,
}

impl System {
    fn observation(&self, draw: &TrialDraw) -> DVector<C64> {
        let mut y = self.synth.from_latent(&draw.latent);
        for &nidx in &draw.support {
            let c = C64::new(draw.gains[nidx] * draw.symbols[nidx] as f64, 0.0);
            y.axpy(c, &self.cols.column(nidx), C64::new(1.0, 0.0));
        }
        y
    }
}

struct PreparedDetector {
    spec: DetectorSpec,
    sys: SysId,
    mmse: Option<MmseContext>,
    ml: Option<MlContext>,
}

/// Precomputed evaluation state for one experiment and a detector list.
///
/// Immutable after construction; trials evaluate in parallel against `&self`.
pub struct Engine {
    base: ExperimentSpec,
    raw: System,
    whitened: Option<System>,
    mf_chol: Option<DMatrix<f64>>,
    detectors: Vec<PreparedDetector>,
}

impl Engine {
    pub fn new(base: ExperimentSpec, detectors: &[DetectorSpec]) -> Result<Self> {
        base.validate()?;
        for d in detectors {
            d.validate()?;
        }
        let a = &base.a;
        let g = &base.g;
        let raw = System {
            cols: a.values().clone(),
            synth: NoiseSynth::new(a, g, base.sigma2)?,
        };
        let whitened = if detectors.iter().any(|d| d.whiten) {
            let ws = whitening_transform(a, g)?;
            let basis = &ws.w * raw.synth.basis();
            Some(System {
                cols: ws.a_w,
                synth: NoiseSynth::from_basis(basis, base.sigma2),
            })
        } else {
            None
        };
        let mf_chol = detectors
            .iter()
            .any(|d| d.family == DetectorFamily::Decorrelator)
            .then(|| g.chol_l());
        let mut prepared = Vec::with_capacity(detectors.len());
        for d in detectors {
            let sys = if d.whiten {
                SysId::Whitened
            } else {
                SysId::Raw
            };
            let mmse = if d.family == DetectorFamily::RdMmse || d.symbol_stage == SymbolStage::Mmse
            {
                Some(if d.whiten {
                    MmseContext::white(a.m(), base.sigma2)
                } else {
                    MmseContext::new(a, g, base.sigma2)?
                })
            } else {
                None
            };
            let ml = if d.family == DetectorFamily::RdMl {
                if d.whiten {
                    return Err(Error::DetectorSpec(
                        "rd-ml does not take the whiten flag".into(),
                    ));
                }
                match &base.amplitude {
                    AmplitudeRule::Constant(c) => {
                        let r = AmplitudeProfile::constant(a.n(), *c)?;
                        Some(MlContext::new(a, g, &r)?)
                    }
                    // per-trial gains: context rebuilt inside the trial
                    AmplitudeRule::Uniform { .. } => None,
                }
            } else {
                None
            };
            prepared.push(PreparedDetector {
                spec: d.clone(),
                sys,
                mmse,
                ml,
            });
        }
        Ok(Self {
            base,
            raw,
            whitened,
            mf_chol,
            detectors: prepared,
        })
    }

    pub fn detector_count(&self) -> usize {
        self.detectors.len()
    }

    /// Coherence of the experiment's measurement matrix (NaN if undefined).
    pub fn coherence(&self) -> f64 {
        self.base.a.coherence().unwrap_or(f64::NAN)
    }

    /// Evaluate one trial and keep the full detector outputs along with the
    /// drawn truth (detector errors propagate instead of being counted).
    pub fn run_trial_detailed(&self, trial_index: u64) -> Result<TrialDetail> {
        let draw = draw_trial(&self.base, trial_index);
        let gains = AmplitudeProfile::new(draw.gains.clone()).expect("gains are valid");
        let y_raw = self.raw.observation(&draw);
        let y_whitened = self.whitened.as_ref().map(|s| s.observation(&draw));
        let z = self.mf_observation(&draw);
        let mut results = Vec::with_capacity(self.detectors.len());
        for det in &self.detectors {
            results.push(self.run_detector(det, &draw, &gains, &y_raw, &y_whitened, &z)?);
        }
        Ok(TrialDetail {
            support: draw.support,
            symbols: draw.symbols,
            gains: draw.gains,
            results,
        })
    }

    fn mf_observation(&self, draw: &TrialDraw) -> Option<DVector<f64>> {
        self.mf_chol.as_ref().map(|l| {
            let mut z = DVector::<f64>::zeros(self.base.g.n());
            for &nidx in &draw.support {
                z.axpy(
                    draw.gains[nidx] * draw.symbols[nidx] as f64,
                    &self.base.g.values().column(nidx),
                    1.0,
                );
            }
            let x = DVector::from_column_slice(&draw.latent);
            z.axpy(self.base.sigma2.sqrt(), &(l * x), 1.0);
            z
        })
    }

    /// Evaluate every detector on trial `trial_index`.
    pub fn run_trial(&self, trial_index: u64) -> Vec<TrialOutcome> {
        let draw = draw_trial(&self.base, trial_index);
        let gains = AmplitudeProfile::new(draw.gains.clone()).expect("gains are valid");
        let y_raw = self.raw.observation(&draw);
        let y_whitened = self.whitened.as_ref().map(|s| s.observation(&draw));
        let z = self.mf_observation(&draw);

        self.detectors
            .iter()
            .map(|det| {
                let run = self.run_detector(det, &draw, &gains, &y_raw, &y_whitened, &z);
                match run {
                    Ok(res) => TrialOutcome {
                        support_correct: res.support == draw.support,
                        symbols_correct: res.symbols == draw.symbols,
                        failed: false,
                        reselections: res.reselections,
                    },
                    Err(_) => TrialOutcome {
                        support_correct: false,
                        symbols_correct: false,
                        failed: true,
                        reselections: 0,
                    },
                }
            })
            .collect()
    }

    fn run_detector(
        &self,
        det: &PreparedDetector,
        draw: &TrialDraw,
        gains: &AmplitudeProfile,
        y_raw: &DVector<C64>,
        y_whitened: &Option<DVector<C64>>,
        z: &Option<DVector<f64>>,
    ) -> Result<DetectionResult> {
        let (sys, y) = match det.sys {
            SysId::Raw => (&self.raw, y_raw),
            SysId::Whitened => (
                self.whitened.as_ref().expect("whitened system prepared"),
                y_whitened.as_ref().expect("whitened observation prepared"),
            ),
        };
        let spec = &det.spec;
        match spec.family {
            DetectorFamily::Rdd => rdd(y, &sys.cols, gains, spec.k.unwrap()),
            DetectorFamily::Rddt => rddt(y, &sys.cols, gains, spec.xi.unwrap()),
            DetectorFamily::Rddf => rddf_with_stage(
                y,
                &sys.cols,
                gains,
                spec.k.unwrap(),
                spec.symbol_stage,
                det.mmse.as_ref(),
            ),
            DetectorFamily::Rddft => rddft_with_stage(
                y,
                &sys.cols,
                gains,
                spec.eps.unwrap(),
                spec.symbol_stage,
                det.mmse.as_ref(),
            ),
            DetectorFamily::RdLs => {
                let base = rdd(y, &sys.cols, gains, spec.k.unwrap())?;
                let symbols = rd_ls_symbols(y, &sys.cols, gains, &base.support)?;
                Ok(replace_symbols(base, symbols))
            }
            DetectorFamily::RdMmse => {
                let base = rdd(y, &sys.cols, gains, spec.k.unwrap())?;
                let symbols = rd_mmse_symbols_with(
                    y,
                    &sys.cols,
                    gains,
                    det.mmse.as_ref().unwrap(),
                    &base.support,
                )?;
                Ok(replace_symbols(base, symbols))
            }
            DetectorFamily::RdMl => {
                let opts = MlOptions {
                    max_n: crate::detect::RD_ML_DEFAULT_MAX_N,
                    k: spec.k,
                };
                match &det.ml {
                    Some(ctx) => rd_ml_with(y, ctx, self.base.a.n(), opts),
                    None => {
                        let ctx = MlContext::new(&self.base.a, &self.base.g, gains)?;
                        rd_ml_with(y, &ctx, self.base.a.n(), opts)
                    }
                }
            }
            DetectorFamily::Decorrelator => {
                let z = z.as_ref().expect("MF-bank observation prepared");
                let symbols = conventional_decorrelator(z, &self.base.g, gains)?;
                Ok(replace_symbols_decorrelator(symbols, draw))
            }
        }
    }
}

fn replace_symbols(base: DetectionResult, symbols: Vec<i8>) -> DetectionResult {
    let support = symbols
        .iter()
        .enumerate()
        .filter(|(_, &s)| s != 0)
        .map(|(i, _)| i)
        .collect();
    DetectionResult {
        symbols,
        support,
        ..base
    }
}

fn replace_symbols_decorrelator(symbols: Vec<i8>, draw: &TrialDraw) -> DetectionResult {
    let support: Vec<usize> = symbols
        .iter()
        .enumerate()
        .filter(|(_, &s)| s != 0)
        .map(|(i, _)| i)
        .collect();
    let scores = draw.gains.clone();
    DetectionResult {
        symbols,
        support,
        iterations: 1,
        scores,
        reselections: 0,
    }
}

// ---------------------------------------------------------------------------
// Public estimation API
// ---------------------------------------------------------------------------

/// One trial of a single-detector spec.
pub fn run_trial(spec: &TrialSpec, trial_index: u64) -> Result<TrialOutcome> {
    let engine = Engine::new(spec.base.clone(), std::slice::from_ref(&spec.detector))?;
    Ok(engine.run_trial(trial_index)[0])
}

/// Estimate the probability-of-symbol-error of one detector.
pub fn estimate_pe(spec: &TrialSpec, trials: u64) -> Result<PeEstimate> {
    Ok(
        estimate_pe_multi(&spec.base, std::slice::from_ref(&spec.detector), trials)?
            .pop()
            .expect("one detector in, one estimate out"),
    )
}

/// Estimate several detectors on shared trials (common random numbers).
pub fn estimate_pe_multi(
    base: &ExperimentSpec,
    detectors: &[DetectorSpec],
    trials: u64,
) -> Result<Vec<PeEstimate>> {
    if trials == 0 {
        return Err(Error::param("trial count must be positive"));
    }
    let engine = Engine::new(base.clone(), detectors)?;
    let zero = || vec![Counts::default(); detectors.len()];
    let counts = (0..trials)
        .into_par_iter()
        .fold(zero, |mut acc, idx| {
            for (slot, outcome) in acc.iter_mut().zip(engine.run_trial(idx)) {
                slot.absorb(outcome);
            }
            acc
        })
        .reduce(zero, |a, b| {
            a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()
        });
    Ok(counts
        .into_iter()
        .map(|c| PeEstimate::from_counts(trials, c))
        .collect())
}

// ---------------------------------------------------------------------------
// Threshold tuning
// ---------------------------------------------------------------------------

/// Result of a threshold grid search.
#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best_threshold: f64,
    pub best: PeEstimate,
    pub grid: Vec<(f64, PeEstimate)>,
}

/// Numerically tune `xi` (RDDt) or `eps` (RDDFt) over a grid with common
/// random numbers; ties resolve to the smaller threshold.
pub fn tune_threshold(
    base: &ExperimentSpec,
    family: DetectorFamily,
    template: &DetectorSpec,
    grid: &[f64],
    trials: u64,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::param("threshold grid must be nonempty"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let detectors: Vec<DetectorSpec> = sorted
        .iter()
        .map(|&t| {
            let mut d = template.clone();
            d.family = family;
            match family {
                DetectorFamily::Rddt => d.xi = Some(t),
                DetectorFamily::Rddft => d.eps = Some(t),
                _ => {}
            }
            d
        })
        .collect();
    if !matches!(family, DetectorFamily::Rddt | DetectorFamily::Rddft) {
        return Err(Error::param("tuning applies to rddt and rddft only"));
    }
    let estimates = estimate_pe_multi(base, &detectors, trials)?;
    let mut best_idx = 0;
    for (i, e) in estimates.iter().enumerate() {
        if e.pe < estimates[best_idx].pe {
            best_idx = i;
        }
    }
    Ok(TuneResult {
        best_threshold: sorted[best_idx],
        best: estimates[best_idx],
        grid: sorted.into_iter().zip(estimates).collect(),
    })
}

// ---------------------------------------------------------------------------
// Event-G tail estimate
// ---------------------------------------------------------------------------

/// Empirical tail of the noise event `max_n |a_n^H w| >= tau`.
#[derive(Debug, Clone, Copy)]
pub struct EventGReport {
    pub tau: f64,
    pub trials: u64,
    pub violations: u64,
    pub rate: f64,
    /// The closed-form ceiling `N^{-alpha} [pi (1+alpha) ln N]^{-1/2}`.
    pub bound: f64,
}

/// Noise-only Monte Carlo of the event-G violation rate.
pub fn estimate_event_g(
    a: &MeasurementMatrix,
    g: &GramMatrix,
    sigma2: f64,
    alpha: f64,
    trials: u64,
    master_seed: u64,
) -> Result<EventGReport> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha must be positive"));
    }
    if trials == 0 {
        return Err(Error::param("trial count must be positive"));
    }
    let n = a.n() as f64;
    let tau = sigma2.sqrt()
        * (2.0 * (1.0 + alpha) * n.ln()).sqrt()
        * g.lambda_max_inv().sqrt()
        * a.row_energy().sqrt();
    let bound = n.powf(-alpha) / (std::f64::consts::PI * (1.0 + alpha) * n.ln()).sqrt();
    if sigma2 == 0.0 {
        return Ok(EventGReport {
            tau,
            trials,
            violations: 0,
            rate: 0.0,
            bound,
        });
    }
    let synth = NoiseSynth::new(a, g, sigma2)?;
    let values = a.values();
    let violations: u64 = (0..trials)
        .into_par_iter()
        .map(|idx| {
            let mut rng = rng::stream_rng(master_seed, stream::EVENT_G, idx);
            let x = rng::normal_vec(&mut rng, a.n());
            let w = synth.from_latent(&x);
            let stats = values.ad_mul(&w);
            let peak = stats.iter().map(|c| c.norm()).fold(0.0, f64::max);
            (peak >= tau) as u64
        })
        .sum();
    Ok(EventGReport {
        tau,
        trials,
        violations,
        rate: violations as f64 / trials as f64,
        bound,
    })
}

// ---------------------------------------------------------------------------
// Sweeps and CSV
// ---------------------------------------------------------------------------

/// Gram-matrix specification for experiment configs.
#[derive(Debug, Clone)]
pub enum GramSpec {
    Identity,
    Gold { l: usize },
    Spectrum { eigenvalues: Vec<f64>, seed: u64 },
    File(PathBuf),
}

impl GramSpec {
    pub fn resolve(&self, n: usize) -> Result<GramMatrix> {
        match self {
            GramSpec::Identity => Ok(GramMatrix::identity(n)),
            GramSpec::Gold { l } => factory::gram_gold(n, *l),
            GramSpec::Spectrum { eigenvalues, seed } => {
                if eigenvalues.len() != n {
                    return Err(Error::dim(format!(
                        "spectrum has {} eigenvalues but N = {n}",
                        eigenvalues.len()
                    )));
                }
                factory::gram_from_spectrum(eigenvalues, *seed)
            }
            GramSpec::File(path) => {
                let vals = crate::matfile::read_matrix(path)?;
                if vals.iter().any(|c| c.im != 0.0) {
                    return Err(Error::InvalidGram("Gram matrix file must be real".into()));
                }
                if vals.nrows() != n {
                    return Err(Error::dim(format!(
                        "Gram file is {}x{} but N = {n}",
                        vals.nrows(),
                        vals.ncols()
                    )));
                }
                GramMatrix::new(vals.map(|c| c.re))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            GramSpec::Identity => "identity".into(),
            GramSpec::Gold { l } => format!("gold({l})"),
            GramSpec::Spectrum { seed, .. } => format!("spectrum(seed={seed})"),
            GramSpec::File(p) => format!("file({})", p.display()),
        }
    }
}

/// Sweep variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    M,
    K,
    N,
    Sigma2,
    Detector,
}

impl SweepVariable {
    pub fn label(&self) -> &'static str {
        match self {
            SweepVariable::M => "M",
            SweepVariable::K => "K",
            SweepVariable::N => "N",
            SweepVariable::Sigma2 => "sigma2",
            SweepVariable::Detector => "detector",
        }
    }
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "m" => SweepVariable::M,
            "k" => SweepVariable::K,
            "n" => SweepVariable::N,
            "sigma2" => SweepVariable::Sigma2,
            "detector" => SweepVariable::Detector,
            other => return Err(Error::param(format!("unknown sweep variable `{other}`"))),
        })
    }
}

/// Per-point numerical threshold search for a threshold detector.
#[derive(Debug, Clone)]
pub struct TuneDirective {
    pub grid: Vec<f64>,
    pub trials: u64,
}

/// Fully-resolved sweep description.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub sigma2: f64,
    pub amplitude: AmplitudeRule,
    pub gram: GramSpec,
    /// Matrix template; `m`/`n` are overridden per sweep point.
    pub matrix: MatrixRecipe,
    pub detectors: Vec<DetectorSpec>,
    /// Optional tuning per detector (parallel to `detectors`; empty = none).
    pub tune: Vec<Option<TuneDirective>>,
    pub master_seed: u64,
    pub trials: u64,
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// One CSV row: a sweep point and a detector estimate.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sweep_var: String,
    pub sweep_value: String,
    pub detector: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub sigma2: f64,
    pub gram: String,
    pub matrix_kind: String,
    pub mu: f64,
    pub estimate: PeEstimate,
    pub master_seed: u64,
}

/// Matrix seed for a sweep point: fixed `(M, N)` reuse the same matrix,
/// different dimensions get a fresh stream.
pub fn point_matrix_seed(template_seed: u64, m: usize, n: usize) -> u64 {
    let mut rng = rng::stream_rng(
        template_seed,
        stream::MATRIX_GEN,
        ((m as u64) << 32) | n as u64,
    );
    rng.random::<u64>()
}

/// Run a sweep: one min-coherence matrix per `(M, N)`, every detector on
/// common trials per point, deterministic row order.
pub fn sweep(plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    if plan.values.is_empty() && plan.variable != SweepVariable::Detector {
        return Err(Error::param("sweep needs at least one value"));
    }
    let points: Vec<f64> = match plan.variable {
        SweepVariable::Detector => vec![0.0],
        _ => plan.values.clone(),
    };
    let mut rows = Vec::new();
    for &value in &points {
        let (n, m, k, sigma2) = match plan.variable {
            SweepVariable::M => (plan.n, value as usize, plan.k, plan.sigma2),
            SweepVariable::K => (plan.n, plan.m, value as usize, plan.sigma2),
            SweepVariable::N => (value as usize, plan.m, plan.k, plan.sigma2),
            SweepVariable::Sigma2 => (plan.n, plan.m, plan.k, value),
            SweepVariable::Detector => (plan.n, plan.m, plan.k, plan.sigma2),
        };
        let mut recipe = plan.matrix.clone();
        recipe.m = m;
        if recipe.kind != MatrixKind::Kerdock {
            // Kerdock column counts are part of the template; others track N
            recipe.n = n;
        }
        recipe.seed = point_matrix_seed(plan.matrix.seed, m, recipe.n);
        let (a, _report) = factory::search_min_coherence(&recipe)?;
        let g = plan.gram.resolve(a.n())?;
        let base = ExperimentSpec {
            a: Arc::new(a),
            g: Arc::new(g),
            k,
            amplitude: plan.amplitude.clone(),
            sigma2,
            master_seed: plan.master_seed,
            fixed_support: None,
        };
        // numerically tune threshold detectors at this point when requested
        let mut detectors = plan.detectors.clone();
        for (i, det) in detectors.iter_mut().enumerate() {
            let Some(directive) = plan.tune.get(i).and_then(|t| t.as_ref()) else {
                continue;
            };
            let tuned = tune_threshold(&base, det.family, det, &directive.grid, directive.trials)?;
            match det.family {
                DetectorFamily::Rddt => det.xi = Some(tuned.best_threshold),
                DetectorFamily::Rddft => det.eps = Some(tuned.best_threshold),
                _ => {
                    return Err(Error::param(
                        "tune directives apply to rddt and rddft detectors only",
                    ))
                }
            }
        }
        let estimates = estimate_pe_multi(&base, &detectors, plan.trials)?;
        for (det, est) in detectors.iter().zip(estimates) {
            let sweep_value = match plan.variable {
                SweepVariable::Detector => det.label(),
                SweepVariable::Sigma2 => format!("{sigma2}"),
                SweepVariable::M => format!("{m}"),
                SweepVariable::K => format!("{k}"),
                SweepVariable::N => format!("{n}"),
            };
            rows.push(SweepRow {
                sweep_var: plan.variable.label().to_string(),
                sweep_value,
                detector: det.label(),
                n: base.a.n(),
                m: base.a.m(),
                k,
                sigma2,
                gram: plan.gram.label(),
                matrix_kind: base.a.kind().label().to_string(),
                mu: base.a.coherence().unwrap_or(f64::NAN),
                estimate: est,
                master_seed: plan.master_seed,
            });
        }
    }
    Ok(rows)
}

/// CSV header used by every sweep artifact.
pub const CSV_HEADER: &str = "sweep_var,sweep_value,detector,N,M,K,sigma2,gram,matrix_kind,mu,\
                              trials,support_errors,joint_errors,pe,ci_halfwidth,cond_symbol_err,master_seed";

/// Deterministic CSV rendering (byte-identical for identical rows).
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cond = r
            .estimate
            .conditional_symbol_error
            .map(|c| format!("{c}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.sweep_var,
            r.sweep_value,
            r.detector,
            r.n,
            r.m,
            r.k,
            r.sigma2,
            r.gram,
            r.matrix_kind,
            r.mu,
            r.estimate.trials,
            r.estimate.support_errors,
            r.estimate.joint_errors,
            r.estimate.pe,
            r.estimate.ci_half_width,
            cond,
            r.master_seed,
        ));
    }
    out
}
