//! Property tests for the detectors and the matrix file format.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use rdmud_core::detect::{rdd, rddf, rddt, real_scores};
use rdmud_core::factory;
use rdmud_core::matfile;
use rdmud_core::model::{sample_front_end, AmplitudeProfile, GramMatrix, SymbolVector};
use rdmud_core::rng::{normal_vec, stream_rng};
use rdmud_core::C64;

fn instance(
    seed: u64,
    m: usize,
    n: usize,
    k: usize,
    sigma2: f64,
) -> (
    DVector<C64>,
    rdmud_core::MeasurementMatrix,
    AmplitudeProfile,
) {
    let a = factory::gen_gaussian(m, n, seed).unwrap();
    let g = GramMatrix::identity(n);
    let r = AmplitudeProfile::constant(n, 1.0).unwrap();
    let active: Vec<(usize, i8)> = (0..k)
        .map(|i| ((seed as usize + 3 * i) % n, if i % 2 == 0 { 1 } else { -1 }))
        .collect();
    let mut dedup = active.clone();
    dedup.sort_by_key(|e| e.0);
    dedup.dedup_by_key(|e| e.0);
    let b = SymbolVector::from_support(n, &dedup).unwrap();
    let y = sample_front_end(&a, &g, &r, &b, sigma2, seed).unwrap().y;
    (y, a, r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Positive scaling of y leaves RDD and RDDF decisions unchanged.
    /// Power-of-two scales keep the float arithmetic exact, so the test can
    /// demand bit-equal decisions instead of approximate ones.
    #[test]
    fn scaling_invariance(seed in 0u64..5000, exp in -9i32..9) {
        let scale = 2f64.powi(exp);
        let (y, a, r) = instance(seed, 6, 14, 2, 0.05);
        let ys = y.map(|c| c * scale);
        // RDD is one-shot: scaling y alone preserves argmax and signs
        let d1 = rdd(&y, a.values(), &r, 2).unwrap();
        let d2 = rdd(&ys, a.values(), &r, 2).unwrap();
        prop_assert_eq!(&d1.symbols, &d2.symbols);
        // RDDF feeds back absolute signal copies r_n b_n a_n, so the whole
        // observed system scales: gains move with y
        let rs = AmplitudeProfile::new(r.gains().iter().map(|g| g * scale).collect()).unwrap();
        let f1 = rddf(&y, a.values(), &r, 2).unwrap();
        let f2 = rddf(&ys, a.values(), &rs, 2).unwrap();
        prop_assert_eq!(&f1.symbols, &f2.symbols);
        // thresholds scale along with y
        let t1 = rddt(&y, a.values(), &r, 0.4).unwrap();
        let t2 = rddt(&ys, a.values(), &r, 0.4 * scale).unwrap();
        prop_assert_eq!(&t1.symbols, &t2.symbols);
    }

    /// Support is exactly the nonzero set of the symbol vector.
    #[test]
    fn support_symbol_consistency(seed in 0u64..5000, k in 1usize..5, xi in 0.05f64..2.0) {
        let (y, a, r) = instance(seed, 6, 14, 3, 0.3);
        for det in [
            rdd(&y, a.values(), &r, k).unwrap(),
            rddt(&y, a.values(), &r, xi).unwrap(),
            rddf(&y, a.values(), &r, k).unwrap(),
        ] {
            let nonzero: Vec<usize> = det
                .symbols
                .iter()
                .enumerate()
                .filter(|(_, &s)| s != 0)
                .map(|(i, _)| i)
                .collect();
            prop_assert_eq!(&det.support, &nonzero);
        }
    }

    /// RDDF agrees with an independently written matching-pursuit loop.
    #[test]
    fn rddf_matches_naive_reimplementation(seed in 0u64..3000, k in 1usize..4) {
        let (y, a, r) = instance(seed, 6, 12, 2, 0.2);
        let det = rddf(&y, a.values(), &r, k).unwrap();

        // naive oracle: recompute scores and residual by definition
        let mut b = vec![0i8; 12];
        let mut v = y.clone();
        for _ in 0..k {
            let scores = real_scores(a.values(), &v);
            let mut best = 0usize;
            for i in 1..12 {
                if scores[i].abs() > scores[best].abs() {
                    best = i;
                }
            }
            let s = r.gain(best) * scores[best];
            b[best] = if s > 0.0 { 1 } else if s < 0.0 { -1 } else { 0 };
            // v = y - A R b from scratch
            v = y.clone();
            for (idx, &sym) in b.iter().enumerate() {
                if sym != 0 {
                    v -= a.values().column(idx) * C64::new(r.gain(idx) * sym as f64, 0.0);
                }
            }
        }
        prop_assert_eq!(&det.symbols, &b);
        // final residual identity: v = y - A R b exactly as recomputed above
        let mut vr = y.clone();
        for (idx, &sym) in det.symbols.iter().enumerate() {
            if sym != 0 {
                vr -= a.values().column(idx) * C64::new(r.gain(idx) * sym as f64, 0.0);
            }
        }
        prop_assert!((vr - v).camax() < 1e-12);
    }

    /// Write/parse round trip of RDMUD-MAT text is bit exact.
    #[test]
    fn matfile_roundtrip(rows in 1usize..6, cols in 1usize..6, seed in 0u64..10_000, complex in any::<bool>()) {
        let mut rng = stream_rng(seed, 42, 0);
        let data = normal_vec(&mut rng, rows * cols * 2);
        let m = DMatrix::<C64>::from_fn(rows, cols, |i, j| {
            let base = 2 * (j * rows + i);
            C64::new(data[base], if complex { data[base + 1] } else { 0.0 })
        });
        let parsed = matfile::parse_matrix(&matfile::render_matrix(&m)).unwrap();
        for (x, y) in m.iter().zip(parsed.iter()) {
            prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
            prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }
}

#[test]
fn noiseless_corollary_regimes_small_scale() {
    // mu (2K-1) < 1 with equal gains: RDD and RDDF are exact on every
    // noiseless draw (small-scale version of the acceptance criterion).
    let recipe =
        factory::MatrixRecipe::new(rdmud_core::MatrixKind::PartialDft, 48, 64, 31).with_search(60);
    let (a, report) = factory::search_min_coherence(&recipe).unwrap();
    assert!(
        report.best_mu * 3.0 < 1.0,
        "search failed to reach mu < 1/3 (got {})",
        report.best_mu
    );
    let g = GramMatrix::identity(64);
    let r = AmplitudeProfile::constant(64, 1.0).unwrap();
    for trial in 0..500u64 {
        let mut rng = stream_rng(500, 7, trial);
        let support = rdmud_core::rng::sample_distinct(&mut rng, 64, 2);
        let active: Vec<(usize, i8)> = support
            .iter()
            .enumerate()
            .map(|(i, &idx)| (idx, if i == 0 { 1 } else { -1 }))
            .collect();
        let b = SymbolVector::from_support(64, &active).unwrap();
        let y = sample_front_end(&a, &g, &r, &b, 0.0, trial).unwrap().y;
        let d1 = rdd(&y, a.values(), &r, 2).unwrap();
        let d2 = rddf(&y, a.values(), &r, 2).unwrap();
        assert_eq!(&d1.symbols, b.entries(), "RDD failed on trial {trial}");
        assert_eq!(&d2.symbols, b.entries(), "RDDF failed on trial {trial}");
    }
}
