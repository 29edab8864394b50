//! Closed-form recovery conditions and probability-of-symbol-error bounds.
//!
//! Everything here is driven by the coherence `mu` of the measurement matrix,
//! the gain spread `|r_min|, |r_max|`, the noise amplification
//! `lambda_max(G^{-1})` and the row energy `max_n a_n^H A A^H a_n`. The noise
//! threshold
//!
//! ```text
//!   tau = sigma sqrt(2 (1+alpha) ln N) sqrt(lambda_max(G^-1)) sqrt(rowEnergy)
//! ```
//!
//! controls the event `max_n |a_n^H w| < tau`, which fails with probability
//! at most `N^-alpha [pi (1+alpha) ln N]^{-1/2}`. Under that event the RDD
//! detector is exact when `|r_min| - (2K-1) mu |r_max| >= 2 tau` and RDDF
//! when `|r_min| - (2K-1) mu |r_min| >= 2 tau`. Natural logarithms
//! throughout: the Gaussian tail algebra needs `e^{-(1+alpha) ln N} =
//! N^{-(1+alpha)}`.
//!
//! Bound evaluators return `+inf` instead of erroring when their validity
//! precondition fails, so parameter sweeps can plot "no guarantee" regions.

use crate::error::{Error, Result};
use crate::model::{AmplitudeProfile, GramMatrix, MeasurementMatrix};

/// Inputs for the condition checks and error bounds.
#[derive(Debug, Clone)]
pub struct BoundParams {
    /// Confidence exponent `alpha > 0`.
    pub alpha: f64,
    /// Total number of users.
    pub n: usize,
    /// Active users (or the upper bound `K0` for threshold detectors).
    pub k: usize,
    /// Noise variance.
    pub sigma2: f64,
    /// Coherence of the measurement matrix.
    pub mu: f64,
    /// Smallest absolute active gain.
    pub r_min: f64,
    /// Largest absolute active gain.
    pub r_max: f64,
    /// `|r^(1)| >= ... >= |r^(K)|`, used by the RDDFt threshold range.
    pub sorted_gains: Vec<f64>,
    /// `lambda_max(G^{-1})`.
    pub lambda_max_g_inv: f64,
    /// `max_n a_n^H A A^H a_n`, measured exactly from `A`.
    pub row_energy: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha must be positive"));
        }
        if self.n < 2 {
            return Err(Error::param("N must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::param("mu must lie in [0, 1]"));
        }
        if self.sigma2 < 0.0 {
            return Err(Error::param("sigma2 must be nonnegative"));
        }
        if !(self.r_min > 0.0) || self.r_max < self.r_min {
            return Err(Error::param("gains must satisfy 0 < r_min <= r_max"));
        }
        if self.lambda_max_g_inv <= 0.0 || self.row_energy < 1.0 - 1e-9 {
            return Err(Error::param(
                "lambda_max(G^-1) must be positive and rowEnergy >= 1",
            ));
        }
        Ok(())
    }

    /// Measure every matrix-dependent field from a concrete system.
    pub fn from_system(
        a: &MeasurementMatrix,
        g: &GramMatrix,
        gains: &AmplitudeProfile,
        support: &[usize],
        k: usize,
        sigma2: f64,
        alpha: f64,
    ) -> Result<Self> {
        let sorted = gains.sorted_abs_on(support);
        let params = Self {
            alpha,
            n: a.n(),
            k,
            sigma2,
            mu: a.coherence()?,
            r_min: gains.min_abs_on(support),
            r_max: gains.max_abs_on(support),
            sorted_gains: sorted,
            lambda_max_g_inv: g.lambda_max_inv(),
            row_energy: a.row_energy(),
        };
        params.validate()?;
        Ok(params)
    }

    fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Noise threshold `tau`.
    pub fn tau(&self) -> f64 {
        self.sigma()
            * (2.0 * (1.0 + self.alpha) * (self.n as f64).ln()).sqrt()
            * self.lambda_max_g_inv.sqrt()
            * self.row_energy.sqrt()
    }

    /// `SNR_min = r_min^2 / (sigma^2 lambda_max(G^{-1}))`.
    pub fn snr_min(&self) -> f64 {
        if self.sigma2 == 0.0 {
            f64::INFINITY
        } else {
            self.r_min * self.r_min / (self.sigma2 * self.lambda_max_g_inv)
        }
    }

    /// `N^{-alpha} [pi (1+alpha) ln N]^{-1/2}`, the failure probability of
    /// the event that every noise statistic stays below `tau`.
    pub fn implied_pe_bound(&self) -> f64 {
        let n = self.n as f64;
        n.powf(-self.alpha) / (std::f64::consts::PI * (1.0 + self.alpha) * n.ln()).sqrt()
    }

    /// RDD exact-recovery condition `|r_min| - (2K-1) mu |r_max| >= 2 tau`.
    pub fn check_rdd_condition(&self) -> ConditionReport {
        let tau = self.tau();
        let lhs = self.r_min - (2.0 * self.k as f64 - 1.0) * self.mu * self.r_max;
        self.report(lhs, 2.0 * tau, tau)
    }

    /// RDDF condition `|r_min| - (2K-1) mu |r_min| >= 2 tau` (the gain ratio
    /// drops out: decision feedback cancels strong users before weak ones).
    pub fn check_rddf_condition(&self) -> ConditionReport {
        let tau = self.tau();
        let lhs = self.r_min * (1.0 - (2.0 * self.k as f64 - 1.0) * self.mu);
        self.report(lhs, 2.0 * tau, tau)
    }

    fn report(&self, lhs: f64, rhs: f64, tau: f64) -> ConditionReport {
        ConditionReport {
            tau,
            lhs,
            rhs,
            holds: lhs >= rhs,
            implied_pe_bound: self.implied_pe_bound(),
        }
    }

    /// Valid RDDt threshold interval for at most `k0` active users:
    /// `(K0 mu r_max + tau, r_min - (K0-1) mu r_max - tau)`; `None` if empty.
    pub fn xi_range(&self, k0: usize) -> Option<(f64, f64)> {
        let tau = self.tau();
        let lower = k0 as f64 * self.mu * self.r_max + tau;
        let upper = self.r_min - (k0 as f64 - 1.0) * self.mu * self.r_max - tau;
        (lower < upper).then_some((lower, upper))
    }

    /// Valid RDDFt threshold interval
    /// `(tau, min_k |r^(k)| [1 - (K-k) mu] - tau)`; `None` if empty.
    pub fn eps_range(&self) -> Option<(f64, f64)> {
        if self.sorted_gains.is_empty() {
            return None;
        }
        let tau = self.tau();
        let k = self.sorted_gains.len();
        let upper = self
            .sorted_gains
            .iter()
            .enumerate()
            .map(|(i, &gain)| gain * (1.0 - ((k - (i + 1)) as f64) * self.mu) - tau)
            .fold(f64::INFINITY, f64::min);
        (tau < upper).then_some((tau, upper))
    }

    /// `beta_1 = [1 - (2K-1) mu r_max/r_min]^2 / rowEnergy` (None when the
    /// implicit nonnegativity assumption fails).
    pub fn beta1(&self) -> Option<f64> {
        let t = 1.0 - (2.0 * self.k as f64 - 1.0) * self.mu * self.r_max / self.r_min;
        (t >= 0.0).then(|| t * t / self.row_energy)
    }

    /// `beta_2 = [1 - (2K-1) mu]^2 / rowEnergy` (None unless strictly positive).
    pub fn beta2(&self) -> Option<f64> {
        let t = 1.0 - (2.0 * self.k as f64 - 1.0) * self.mu;
        (t > 0.0).then(|| t * t / self.row_energy)
    }

    /// Coherence-based RDD error bound; `+inf` when `beta_1` is invalid.
    pub fn pe_bound_rdd(&self) -> f64 {
        match self.beta1() {
            Some(beta) => pe_bound_from_beta(self.snr_min(), beta, self.n),
            None => f64::INFINITY,
        }
    }

    /// Coherence-based RDDF error bound; `+inf` when `beta_2` is invalid.
    pub fn pe_bound_rddf(&self) -> f64 {
        match self.beta2() {
            Some(beta) => pe_bound_from_beta(self.snr_min(), beta, self.n),
            None => f64::INFINITY,
        }
    }
}

/// `(2N/sqrt(pi)) [SNR beta / 2]^{-1/2} exp(-SNR beta / 8)`.
fn pe_bound_from_beta(snr_min: f64, beta: f64, n: usize) -> f64 {
    if snr_min.is_infinite() {
        return 0.0;
    }
    let x = snr_min * beta / 2.0;
    if x <= 0.0 {
        return f64::INFINITY;
    }
    (2.0 * n as f64 / std::f64::consts::PI.sqrt()) * x.powf(-0.5) * (-x / 4.0).exp()
}

/// Verdict of a recovery-condition check.
#[derive(Debug, Clone, Copy)]
pub struct ConditionReport {
    pub tau: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs >= rhs`.
    pub holds: bool,
    pub implied_pe_bound: f64,
}

/// Union bound for the conventional decorrelator:
/// `(N / (2 sqrt(pi))) (SNR/2)^{-1/2} exp(-SNR/2)`.
pub fn pe_bound_decorrelator(snr_min: f64, n: usize) -> f64 {
    if snr_min.is_infinite() {
        return 0.0;
    }
    if snr_min <= 0.0 {
        return f64::INFINITY;
    }
    (n as f64 / (2.0 * std::f64::consts::PI.sqrt()))
        * (snr_min / 2.0).powf(-0.5)
        * (-snr_min / 2.0).exp()
}

/// Partial-DFT coherence bound: `mu < sqrt(4 (2 ln N + c) / M)` holds with
/// probability at least `1 - 2 e^{-c}`. Returns `(bound, probability_floor)`.
pub fn dft_coherence_bound(m: usize, n: usize, c: f64) -> (f64, f64) {
    let bound = (4.0 * (2.0 * (n as f64).ln() + c) / m as f64).sqrt();
    (bound, 1.0 - 2.0 * (-c).exp())
}

/// Minimum `SNR_min` for the error bounds to be attainable: `8 ln N`.
pub fn snr_requirement(n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        8.0 * (n as f64).ln()
    }
}

/// Per-user error rate of the decorrelator with diagonal loading
/// `Q(|r| / (sigma sqrt([G^{-1}]_nn)))`; used as a Monte Carlo oracle.
pub fn q_function(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    1.0 - normal.cdf(x)
}
