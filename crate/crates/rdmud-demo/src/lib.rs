//! Interactive browser demo: three small panels over the core crate.
//!
//! 1. `matrix_panel` — generate a measurement matrix, report coherence
//!    against the Welch bound and the distribution of column inner products.
//! 2. `detection_panel` — run one detection trial and expose the decision
//!    statistics `Re[a_n^H y]` with the true and detected supports.
//! 3. `pe_curve` — a small in-browser Monte Carlo sweep of the
//!    probability-of-symbol-error against the correlator count M.
//!
//! Build for the browser with `wasm-pack build --target web crates/rdmud-demo`
//! and open `crates/rdmud-demo/www/index.html` from a static file server.
//! Trial loops run sequentially (no worker threads are assumed).

use std::sync::Arc;

use wasm_bindgen::prelude::*;

use rdmud_core::detect::DetectorSpec;
use rdmud_core::factory::{self, MatrixRecipe};
use rdmud_core::mc::{AmplitudeRule, Engine, ExperimentSpec};
use rdmud_core::model::GramMatrix;
use rdmud_core::{MatrixKind, MeasurementMatrix};

fn parse_kind(kind: &str) -> Result<MatrixKind, JsError> {
    kind.parse::<MatrixKind>()
        .map_err(|e| JsError::new(&e.to_string()))
}

fn build_matrix(
    kind: MatrixKind,
    m: usize,
    n: usize,
    seed: u64,
    search: usize,
) -> Result<MeasurementMatrix, JsError> {
    let mut recipe = MatrixRecipe::new(kind, m, n, seed).with_search(search.max(1));
    if kind == MatrixKind::Kerdock {
        recipe.n = n;
    }
    factory::search_min_coherence(&recipe)
        .map(|(a, _)| a)
        .map_err(|e| JsError::new(&e.to_string()))
}

/// Coherence summary plus a histogram of pairwise |a_i^H a_j|.
#[wasm_bindgen(getter_with_clone)]
pub struct MatrixReport {
    pub m: u32,
    pub n: u32,
    pub mu: f64,
    pub welch: f64,
    pub row_energy: f64,
    /// Normalized counts over `bins` buckets spanning [0, 1].
    pub histogram: Vec<f64>,
}

#[wasm_bindgen]
pub fn matrix_panel(
    kind: &str,
    m: usize,
    n: usize,
    seed: u64,
    search: usize,
    bins: usize,
) -> Result<MatrixReport, JsError> {
    let kind = parse_kind(kind)?;
    let a = build_matrix(kind, m, n, seed, search)?;
    let bins = bins.clamp(4, 256);
    let mut histogram = vec![0.0f64; bins];
    let gram = a.values().ad_mul(a.values());
    let mut pairs = 0u64;
    for j in 0..a.n() {
        for i in 0..j {
            let v = gram[(i, j)].norm().min(1.0);
            let slot = ((v * bins as f64) as usize).min(bins - 1);
            histogram[slot] += 1.0;
            pairs += 1;
        }
    }
    if pairs > 0 {
        for h in &mut histogram {
            *h /= pairs as f64;
        }
    }
    Ok(MatrixReport {
        m: a.m() as u32,
        n: a.n() as u32,
        mu: a.coherence().map_err(|e| JsError::new(&e.to_string()))?,
        welch: factory::welch_bound(a.m(), a.n()),
        row_energy: a.row_energy(),
        histogram,
    })
}

/// One detection trial: statistics, truth and estimate.
#[wasm_bindgen(getter_with_clone)]
pub struct DetectionReport {
    /// `Re[a_n^H y]` for every user.
    pub scores: Vec<f64>,
    pub true_support: Vec<u32>,
    pub true_symbols: Vec<i32>,
    pub detected_support: Vec<u32>,
    pub detected_symbols: Vec<i32>,
    pub support_correct: bool,
    pub symbols_correct: bool,
}

fn detector_from(name: &str, k: usize, threshold: f64) -> Result<DetectorSpec, JsError> {
    let spec = match name {
        "rdd" => DetectorSpec::rdd(k),
        "rddf" => DetectorSpec::rddf(k),
        "rddt" => DetectorSpec::rddt(threshold),
        "rddft" => DetectorSpec::rddft(threshold),
        other => return Err(JsError::new(&format!("unknown detector `{other}`"))),
    };
    Ok(spec)
}

fn engine_for(
    kind: MatrixKind,
    m: usize,
    n: usize,
    k: usize,
    sigma2: f64,
    seed: u64,
    search: usize,
    detectors: &[DetectorSpec],
) -> Result<Engine, JsError> {
    let a = build_matrix(kind, m, n, seed, search)?;
    let base = ExperimentSpec {
        a: Arc::new(a),
        g: Arc::new(GramMatrix::identity(n)),
        k,
        amplitude: AmplitudeRule::Constant(1.0),
        sigma2,
        master_seed: seed,
        fixed_support: None,
    };
    Engine::new(base, detectors).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn detection_panel(
    kind: &str,
    m: usize,
    n: usize,
    k: usize,
    sigma2: f64,
    seed: u64,
    detector: &str,
    threshold: f64,
    trial: u64,
) -> Result<DetectionReport, JsError> {
    let kind = parse_kind(kind)?;
    let spec = detector_from(detector, k, threshold)?;
    let engine = engine_for(kind, m, n, k, sigma2, seed, 20, std::slice::from_ref(&spec))?;
    let detail = engine
        .run_trial_detailed(trial)
        .map_err(|e| JsError::new(&e.to_string()))?;
    let result = &detail.results[0];
    Ok(DetectionReport {
        scores: result.scores.clone(),
        true_support: detail.support.iter().map(|&i| i as u32).collect(),
        true_symbols: detail.symbols.iter().map(|&s| s as i32).collect(),
        detected_support: result.support.iter().map(|&i| i as u32).collect(),
        detected_symbols: result.symbols.iter().map(|&s| s as i32).collect(),
        support_correct: result.support == detail.support,
        symbols_correct: result.symbols == detail.symbols,
    })
}

/// Error-rate curve over a grid of correlator counts.
#[wasm_bindgen(getter_with_clone)]
pub struct PeCurve {
    pub m_values: Vec<u32>,
    pub mu_values: Vec<f64>,
    pub pe_rdd: Vec<f64>,
    pub pe_rddf: Vec<f64>,
}

#[wasm_bindgen]
pub fn pe_curve(
    kind: &str,
    n: usize,
    k: usize,
    sigma2: f64,
    seed: u64,
    trials: u64,
    m_values: Vec<u32>,
) -> Result<PeCurve, JsError> {
    let kind = parse_kind(kind)?;
    let trials = trials.clamp(50, 20_000);
    let detectors = [DetectorSpec::rdd(k), DetectorSpec::rddf(k)];
    let mut out = PeCurve {
        m_values: Vec::new(),
        mu_values: Vec::new(),
        pe_rdd: Vec::new(),
        pe_rddf: Vec::new(),
    };
    for &m in &m_values {
        let m = m as usize;
        if m == 0 || m > n {
            return Err(JsError::new("each M must satisfy 1 <= M <= N"));
        }
        let engine = engine_for(kind, m, n, k, sigma2, seed + m as u64, 40, &detectors)?;
        let mut errs = [0u64; 2];
        for t in 0..trials {
            for (slot, outcome) in errs.iter_mut().zip(engine.run_trial(t)) {
                if outcome.failed || !outcome.support_correct || !outcome.symbols_correct {
                    *slot += 1;
                }
            }
        }
        out.m_values.push(m as u32);
        out.mu_values.push(engine.coherence());
        out.pe_rdd.push(errs[0] as f64 / trials as f64);
        out.pe_rddf.push(errs[1] as f64 / trials as f64);
    }
    Ok(out)
}
