//! Closed-form received-power laws for the SISO model with
//! `h_r,n ~ CN(0, ρ_r²)` and `h_d ~ CN(0, ρ_d²)`, the alignment factor
//! `g(Q)`, the rate expression, and Monte Carlo oracles for them.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{mse_stats, EstimationMethod};
use crate::numerics::{to_db, RngStream};

/// Largest `Q` evaluated with the alternating sum; beyond it cancellation
/// eats the precision and quadrature is used instead.
pub const ALTERNATING_SUM_MAX_Q: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormInputs {
    /// Transmit power, mW.
    pub p: f64,
    pub n: usize,
    pub rho_r2: f64,
    pub rho_d2: f64,
    pub sigma_r2: f64,
    pub sigma_d2: f64,
    pub sigma_q2: f64,
    pub q: usize,
}

impl ClosedFormInputs {
    /// Noise-free inputs with unit transmit power.
    pub fn new(n: usize, rho_r2: f64, rho_d2: f64, q: usize) -> Self {
        Self {
            p: 1.0,
            n,
            rho_r2,
            rho_d2,
            sigma_r2: 0.0,
            sigma_d2: 0.0,
            sigma_q2: 0.0,
            q,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let powers = [
            self.p,
            self.rho_r2,
            self.rho_d2,
            self.sigma_r2,
            self.sigma_d2,
            self.sigma_q2,
        ];
        if powers.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("powers must be non-negative".into()));
        }
        if self.n == 0 || self.q == 0 {
            return Err(Error::InvalidArgument("N and Q must be at least 1".into()));
        }
        Ok(())
    }

    /// `P(Nρ_r² + ρ_d²)`, the single random configuration.
    fn incoherent(&self) -> f64 {
        self.p * (self.n as f64 * self.rho_r2 + self.rho_d2)
    }

    /// `P(Nρ_r² + ρ_d² + (π/2)N·a·ρ_rρ_d + (π/4)N(N−1)·b·ρ_r²)`.
    fn with_factors(&self, cross: f64, pair: f64) -> f64 {
        let n = self.n as f64;
        let (rr, rd) = (self.rho_r2.sqrt(), self.rho_d2.sqrt());
        self.incoherent()
            + self.p
                * (FRAC_PI_2 * n * rr * rd * cross + FRAC_PI_4 * n * (n - 1.0) * self.rho_r2 * pair)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Exact,
    Upper,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn g_alternating(q: usize) -> f64 {
    let terms = q / 2; // ⌈(Q−1)/2⌉
    let mut sum = 0.0;
    for i in 1..=terms {
        let a = q - 2 * i;
        let f = if a == 0 { 2.0 } else { 1.0 / factorial(a) };
        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * f * PI.powi(a as i32);
    }
    factorial(q) / PI.powi(q as i32) * sum
}

/// Adaptive Simpson integration with an absolute tolerance.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `E[max_q cos θ_q]` by quadrature. With `u = |θ|` folded onto `[0, π]`
/// the maximum cosine is `cos` of the minimum of `Q` uniform draws, whose
/// density is `(Q/π)(1 − u/π)^(Q−1)`.
pub fn g_quadrature(q: usize) -> f64 {
    let qf = q as f64;
    // ln_1p keeps the large power smooth; powi would amplify round-off by Q
    let f = move |u: f64| u.cos() * qf / PI * ((qf - 1.0) * (-u / PI).ln_1p()).exp();
    // the mass sits within a few multiples of π/Q of the origin
    let split = (20.0 * PI / qf).min(PI);
    let head = integrate(&f, 0.0, split, 1e-13);
    let tail = if split < PI {
        integrate(&f, split, PI, 1e-13)
    } else {
        0.0
    };
    head + tail
}

/// Expected maximum of `Q` i.i.d. uniform-phase cosines.
pub fn g_of_q(q: usize) -> Result<f64> {
    match q {
        0 => Err(Error::InvalidArgument("Q must be at least 1".into())),
        1 => Ok(0.0),
        q if q <= ALTERNATING_SUM_MAX_Q => Ok(g_alternating(q)),
        q => Ok(g_quadrature(q)),
    }
}

/// Monte Carlo estimate of `E[max_q cos θ_q]` and its 3σ half-width.
pub fn mean_max_cos_oracle(q: usize, samples: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    if q == 0 {
        return Err(Error::InvalidArgument("Q must be at least 1".into()));
    }
    if samples < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least 10^4 samples, got {samples}"
        )));
    }
    const CHUNK: usize = 1 << 16;
    let chunks = samples.div_ceil(CHUNK);
    let seeds: Vec<u64> = (0..chunks).map(|_| rng.next_u64()).collect();
    let master = rng.master_seed();
    let (sum, sum_sq) = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let mut r = RngStream::new(master, seed);
            let count = CHUNK.min(samples - i * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let mut best = f64::NEG_INFINITY;
                for _ in 0..q {
                    best = best.max((r.random::<f64>() * TAU).cos());
                }
                s += best;
                s2 += best * best;
            }
            (s, s2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, 3.0 * (var / n).sqrt()))
}

/// `sin(π/Q)/(π/Q)`, the equi-partition counterpart of `g(Q)`.
pub fn equipartition_mean_cos(q: usize) -> Result<f64> {
    match q {
        0 => Err(Error::InvalidArgument("Q must be at least 1".into())),
        1 => Ok(0.0),
        q => {
            let x = PI / q as f64;
            Ok(x.sin() / x)
        }
    }
}

/// Random-configuration training: exact for `N = 1`, upper bound otherwise.
pub fn power_random_training(inp: &ClosedFormInputs) -> Result<(f64, BoundKind)> {
    inp.validate()?;
    let g = g_of_q(inp.q)?;
    let kind = if inp.n == 1 {
        BoundKind::Exact
    } else {
        BoundKind::Upper
    };
    Ok((inp.with_factors(g, g * g), kind))
}

/// Equi-partition training (exact for `N = 1`).
pub fn power_equipartition_upper(inp: &ClosedFormInputs) -> Result<f64> {
    inp.validate()?;
    let s = equipartition_mean_cos(inp.q)?;
    Ok(inp.with_factors(s, s * s))
}

/// Average received power with perfectly aligned RCs.
pub fn power_optimal(inp: &ClosedFormInputs) -> Result<f64> {
    inp.validate()?;
    Ok(inp.with_factors(1.0, 1.0))
}

/// Alignment on noisy cascaded estimates with error powers `σ_r², σ_d²`.
pub fn power_noisy_alignment(inp: &ClosedFormInputs) -> Result<f64> {
    inp.validate()?;
    let n = inp.n as f64;
    let (r2, d2) = (inp.rho_r2, inp.rho_d2);
    let er = r2 + inp.sigma_r2;
    let ed = d2 + inp.sigma_d2;
    let cross = if er > 0.0 && ed > 0.0 {
        PI * n * r2 * d2 / (2.0 * (er * ed).sqrt())
    } else {
        0.0
    };
    let pair = if er > 0.0 {
        PI * n * (n - 1.0) * r2 * r2 / (4.0 * er)
    } else {
        0.0
    };
    Ok(inp.p * (n * r2 + d2 + cross + pair))
}

/// Upper bound for random-configuration training with superimposed-channel
/// estimation error `σ_Q²`.
pub fn power_noisy_training_upper(inp: &ClosedFormInputs) -> Result<f64> {
    inp.validate()?;
    let g = g_of_q(inp.q)?;
    let n = inp.n as f64;
    let r2 = inp.rho_r2;
    let e = r2 + inp.sigma_q2;
    if !(e > 0.0) {
        return Ok(inp.incoherent());
    }
    let cross = FRAC_PI_2 * n * r2 / e.sqrt() * inp.rho_d2.sqrt() * g;
    let pair = FRAC_PI_4 * n * (n - 1.0) * r2 * r2 / e * g * g;
    Ok(inp.incoherent() + inp.p * (cross + pair))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioKind {
    Training,
    Alignment,
}

/// Large-`N` ratio of achieved to optimal received power.
pub fn asymptotic_ratio(kind: RatioKind, inp: &ClosedFormInputs) -> Result<f64> {
    inp.validate()?;
    match kind {
        RatioKind::Training => Ok(g_of_q(inp.q)?.powi(2)),
        RatioKind::Alignment => {
            let e = inp.rho_r2 + inp.sigma_r2;
            Ok(if e > 0.0 { inp.rho_r2 / e } else { 0.0 })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateInputs {
    /// Training symbols.
    pub tau: usize,
    /// Symbols per coherence interval.
    pub tau_co: usize,
    /// Transmit power, mW.
    pub tx_power: f64,
    /// Expected channel power gain `E|h|²` (linear).
    pub gain: f64,
    /// Receiver noise power, mW.
    pub noise: f64,
}

/// `((τ_co − τ)/τ_co) log₂(1 + P·gain/σ²)` in b/s/Hz.
pub fn achievable_rate(r: &RateInputs) -> Result<f64> {
    if r.tau > r.tau_co || r.tau_co == 0 {
        return Err(Error::InvalidArgument(format!(
            "training length {} exceeds coherence interval {}",
            r.tau, r.tau_co
        )));
    }
    if !(r.noise > 0.0) || !(r.gain >= 0.0) || !(r.tx_power >= 0.0) {
        return Err(Error::InvalidArgument(
            "rate inputs must be non-negative with positive noise".into(),
        ));
    }
    let prelog = (r.tau_co - r.tau) as f64 / r.tau_co as f64;
    Ok(prelog * (1.0 + r.tx_power * r.gain / r.noise).log2())
}

/// Expected channel gain `E|Σφ̂_n h_r,n + h_d|²` of a cascaded estimator,
/// per the noisy-alignment law with that estimator's error powers.
pub fn estimator_gain(
    method: EstimationMethod,
    n: usize,
    rho_r2: f64,
    rho_d2: f64,
    sigma2: f64,
) -> Result<f64> {
    let stats = mse_stats(method, n, 1, sigma2)?;
    power_noisy_alignment(&ClosedFormInputs {
        sigma_r2: stats.sigma_r2,
        sigma_d2: stats.sigma_d2,
        ..ClosedFormInputs::new(n, rho_r2, rho_d2, 1)
    })
}

/// Rate of a cascaded estimator at transmit power `tx_power`.
#[allow(clippy::too_many_arguments)]
pub fn estimator_rate(
    method: EstimationMethod,
    n: usize,
    rho_r2: f64,
    rho_d2: f64,
    sigma2: f64,
    tx_power: f64,
    noise: f64,
    tau_co: usize,
) -> Result<f64> {
    let gain = estimator_gain(method, n, rho_r2, rho_d2, sigma2)?;
    let tau = mse_stats(method, n, 1, sigma2)?.pilots;
    achievable_rate(&RateInputs {
        tau,
        tau_co,
        tx_power,
        gain,
        noise,
    })
}

/// Extra transmit power (dB) `method` needs to reach the rate of
/// `reference`. Every cascaded estimator spends `N+1` pilots, so the
/// prelogs match and the gap reduces to the ratio of expected gains.
pub fn equivalent_power_gap_db(
    method: EstimationMethod,
    reference: EstimationMethod,
    n: usize,
    rho_r2: f64,
    rho_d2: f64,
    sigma2: f64,
) -> Result<f64> {
    let a = estimator_gain(method, n, rho_r2, rho_d2, sigma2)?;
    let b = estimator_gain(reference, n, rho_r2, rho_d2, sigma2)?;
    Ok(to_db(b / a))
}
