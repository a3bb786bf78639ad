//! Downlink power minimization under SINR targets (uplink-duality fixed
//! point), RC alignment for a single user and alternating RC optimization.
//!
//! Channels are uplink column vectors `h_k`; user `k` receives `h_kᴴ w`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::channel::RcVector;
use crate::error::{Error, Result};
use crate::estimators::CascadedEstimate;
use crate::numerics::{inner, norm_sqr, solve_hermitian_pd, solve_real, CMatrix, RngStream};

const DIVERGENCE_CAP: f64 = 1e12;
const REFINE_STEPS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet {
    /// `M x K`, column `k` is `w_k`.
    pub w: CMatrix,
    pub powers: Vec<f64>,
    pub total: f64,
}

impl PrecoderSet {
    pub fn precoder(&self, k: usize) -> Vec<Complex64> {
        self.w.column(k)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub lambda: Vec<f64>,
    /// `K x K` row-major coupling matrix: `[i][i] = |h_iᴴ w̃_i|²/γ_i`,
    /// `[i][j] = −|h_jᴴ w̃_i|²`.
    pub coupling: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub phase_grid_size: usize,
    pub ao_max_rounds: usize,
    pub restarts: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iterations: 10_000,
            phase_grid_size: 64,
            ao_max_rounds: 50,
            restarts: 4,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.phase_grid_size < 2 {
            return Err(Error::InvalidArgument(
                "phase grid needs at least 2 points".into(),
            ));
        }
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument(
                "iteration counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-user SINR when user `k` receives `h_kᴴ w_j` from every stream `j`.
pub fn sinr(channels: &[Vec<Complex64>], precoders: &PrecoderSet, noise_mw: f64) -> Vec<f64> {
    let k = channels.len();
    let cols: Vec<Vec<Complex64>> = (0..precoders.w.cols())
        .map(|j| precoders.w.column(j))
        .collect();
    (0..k)
        .map(|user| {
            let h = &channels[user];
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (j, w) in cols.iter().enumerate() {
                let g = inner(h, w).norm_sqr();
                if j == user {
                    signal = g;
                } else {
                    interference += g;
                }
            }
            signal / (interference + noise_mw)
        })
        .collect()
}

fn check_inputs(channels: &[Vec<Complex64>], gamma: &[f64], noise_mw: f64) -> Result<usize> {
    let k = channels.len();
    if k == 0 || gamma.len() != k {
        return Err(Error::InvalidDimension(format!(
            "{k} channels for {} SINR targets",
            gamma.len()
        )));
    }
    let m = channels[0].len();
    if m == 0 || channels.iter().any(|h| h.len() != m) {
        return Err(Error::InvalidDimension(
            "channel vectors differ in length".into(),
        ));
    }
    if !(noise_mw > 0.0) {
        return Err(Error::InvalidArgument(
            "noise power must be positive".into(),
        ));
    }
    if gamma.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument(
            "SINR targets must be positive".into(),
        ));
    }
    if channels.iter().any(|h| !(norm_sqr(h) > 0.0)) {
        return Err(Error::InfeasibleTargets("a channel vector is zero".into()));
    }
    Ok(m)
}

/// `σ² I + Σ_j λ_j h_j h_jᴴ`.
fn dual_covariance(channels: &[Vec<Complex64>], lambda: &[f64], noise_mw: f64) -> CMatrix {
    let m = channels[0].len();
    let mut s = CMatrix::identity(m).scale_real(noise_mw);
    for (h, &l) in channels.iter().zip(lambda) {
        for r in 0..m {
            let hr = h[r] * l;
            for c in 0..m {
                s[(r, c)] += hr * h[c].conj();
            }
        }
    }
    s
}

/// Columns `S⁻¹ h_k`.
fn whitened(channels: &[Vec<Complex64>], s: &CMatrix) -> Result<CMatrix> {
    let b = CMatrix::from_columns(channels)?;
    solve_hermitian_pd(s, &b)
}

/// Minimum-power precoders meeting every SINR target.
pub fn solve_power_min(
    channels: &[Vec<Complex64>],
    gamma: &[f64],
    noise_mw: f64,
    opts: &SolveOptions,
) -> Result<(PrecoderSet, DualState)> {
    solve_power_min_from(channels, gamma, noise_mw, opts, None)
}

/// As [`solve_power_min`], optionally starting the fixed point from `init`.
pub fn solve_power_min_from(
    channels: &[Vec<Complex64>],
    gamma: &[f64],
    noise_mw: f64,
    opts: &SolveOptions,
    init: Option<&[f64]>,
) -> Result<(PrecoderSet, DualState)> {
    let m = check_inputs(channels, gamma, noise_mw)?;
    let k = channels.len();
    let lambda0: Vec<f64> = channels
        .iter()
        .zip(gamma)
        .map(|(h, g)| g * noise_mw / norm_sqr(h))
        .collect();
    if k == 1 {
        return Ok(single_user(&channels[0], gamma[0], noise_mw));
    }
    let mut lambda = match init {
        Some(l) if l.len() == k && l.iter().all(|v| *v > 0.0 && v.is_finite()) => l.to_vec(),
        _ => lambda0.clone(),
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut s = dual_covariance(channels, &lambda, noise_mw);
    while iterations < opts.max_iterations {
        iterations += 1;
        let x = whitened(channels, &s).map_err(|e| Error::InfeasibleTargets(e.to_string()))?;
        let mut change: f64 = 0.0;
        let mut next = Vec::with_capacity(k);
        for (j, h) in channels.iter().enumerate() {
            let q = inner(h, &x.column(j)).re;
            let l = gamma[j] / (1.0 + gamma[j]) / q;
            if !l.is_finite() || l > DIVERGENCE_CAP * lambda0[j] {
                return Err(Error::InfeasibleTargets(format!(
                    "dual variable of user {j} diverged"
                )));
            }
            change = change.max((l - lambda[j]).abs() / l);
            next.push(l);
        }
        lambda = next;
        s = dual_covariance(channels, &lambda, noise_mw);
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::InfeasibleTargets(format!(
            "fixed point did not converge in {iterations} iterations"
        )));
    }

    let x = whitened(channels, &s).map_err(|e| Error::InfeasibleTargets(e.to_string()))?;
    let dirs: Vec<Vec<Complex64>> = (0..k)
        .map(|j| {
            let v = x.column(j);
            let n = norm_sqr(&v).sqrt();
            v.iter().map(|z| z / n).collect()
        })
        .collect();
    let mut coupling = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            coupling[i * k + j] = if i == j {
                inner(&channels[i], &dirs[i]).norm_sqr() / gamma[i]
            } else {
                -inner(&channels[j], &dirs[i]).norm_sqr()
            };
        }
    }
    // row k of the transpose is the SINR constraint of user k
    let mut transposed = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            transposed[j * k + i] = coupling[i * k + j];
        }
    }
    let powers = solve_real(&transposed, &vec![noise_mw; k])
        .map_err(|_| Error::InfeasibleTargets("power coupling matrix is singular".into()))?;
    if powers.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::InfeasibleTargets("negative power allocation".into()));
    }
    let mut w = CMatrix::zeros(m, k);
    for j in 0..k {
        let a = powers[j].sqrt();
        for r in 0..m {
            w[(r, j)] = dirs[j][r] * a;
        }
    }
    let total = powers.iter().sum();
    Ok((
        PrecoderSet { w, powers, total },
        DualState {
            lambda,
            coupling,
            iterations,
            converged,
        },
    ))
}

/// With one user the fixed point is reached from the initial point in a
/// single step: matched filter with `p = γσ²/‖h‖²`.
fn single_user(h: &[Complex64], gamma: f64, noise_mw: f64) -> (PrecoderSet, DualState) {
    let g = norm_sqr(h);
    let p = gamma * noise_mw / g;
    let a = (p / g).sqrt();
    let w = CMatrix::column_vector(&h.iter().map(|z| z * a).collect::<Vec<_>>());
    (
        PrecoderSet {
            w,
            powers: vec![p],
            total: p,
        },
        DualState {
            lambda: vec![p],
            coupling: vec![g / gamma],
            iterations: 1,
            converged: true,
        },
    )
}

/// Phase alignment for `K = M = 1`. The stored estimates are uplink
/// values, so the downlink scalars are their conjugates; a zero product
/// falls back to phase 1.
pub fn align_rc_single_user(est: &CascadedEstimate) -> Result<RcVector> {
    if est.num_users() != 1 || est.stacks[0].rows() != 1 {
        return Err(Error::Unsupported(
            "alignment needs a single-antenna single-user estimate".into(),
        ));
    }
    let s = &est.stacks[0];
    let hd_ul = s[(0, 0)];
    let phi = (1..s.cols())
        .map(|c| {
            let p = s[(0, c)] * hd_ul.conj();
            let a = p.norm();
            if a > 0.0 && a.is_finite() {
                p / a
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    RcVector::new(phi)
}

/// Outcome of the alternating optimization.
#[derive(Clone, Debug)]
pub struct AoResult {
    pub rc: RcVector,
    pub precoders: PrecoderSet,
    /// Objective after the initial solve and after every round of the
    /// winning restart.
    pub trace: Vec<f64>,
}

struct AoProblem<'a> {
    est: &'a CascadedEstimate,
    gamma: &'a [f64],
    noise_mw: f64,
    opts: &'a SolveOptions,
}

impl AoProblem<'_> {
    fn effective(&self, phi: &RcVector) -> Result<Vec<Vec<Complex64>>> {
        (0..self.est.num_users())
            .map(|k| self.est.effective(phi, k))
            .collect()
    }

    fn power(&self, channels: &[Vec<Complex64>], warm: &mut Option<Vec<f64>>) -> f64 {
        match solve_power_min_from(
            channels,
            self.gamma,
            self.noise_mw,
            self.opts,
            warm.as_deref(),
        ) {
            Ok((p, d)) => {
                *warm = Some(d.lambda);
                p.total
            }
            Err(_) => f64::INFINITY,
        }
    }

    /// One coordinate sweep over all elements; returns the new objective.
    fn sweep(&self, phi: &mut RcVector, current: f64, warm: &mut Option<Vec<f64>>) -> Result<f64> {
        let grid = self.opts.phase_grid_size;
        let mut best_val = current;
        let mut chans = self.effective(phi)?;
        for n in 0..phi.len() {
            let old = phi.as_slice()[n].conj();
            let refl: Vec<Vec<Complex64>> =
                (0..chans.len()).map(|k| self.est.reflected(k, n)).collect();
            let base: Vec<Vec<Complex64>> = chans
                .iter()
                .zip(&refl)
                .map(|(h, r)| h.iter().zip(r).map(|(a, b)| a - old * b).collect())
                .collect();
            let eval = |theta: f64, warm: &mut Option<Vec<f64>>| {
                let c = Complex64::from_polar(1.0, -theta);
                let trial: Vec<Vec<Complex64>> = base
                    .iter()
                    .zip(&refl)
                    .map(|(h, r)| h.iter().zip(r).map(|(a, b)| a + c * b).collect())
                    .collect();
                self.power(&trial, warm)
            };
            let step = TAU / grid as f64;
            let mut cand_theta = 0.0;
            let mut cand_val = f64::INFINITY;
            for j in 0..grid {
                let t = j as f64 * step;
                let v = eval(t, warm);
                if v < cand_val {
                    cand_val = v;
                    cand_theta = t;
                }
            }
            let centre = cand_theta;
            let fine = step / REFINE_STEPS as f64;
            for j in 1..REFINE_STEPS {
                for t in [centre - j as f64 * fine, centre + j as f64 * fine] {
                    let v = eval(t, warm);
                    if v < cand_val {
                        cand_val = v;
                        cand_theta = t;
                    }
                }
            }
            if cand_val < best_val {
                best_val = cand_val;
                phi.set_phase(n, cand_theta.rem_euclid(TAU));
                let new = phi.as_slice()[n].conj();
                for ((h, b), r) in chans.iter_mut().zip(&base).zip(&refl) {
                    for ((x, y), z) in h.iter_mut().zip(b).zip(r) {
                        *x = y + new * z;
                    }
                }
            }
        }
        Ok(best_val)
    }
}

/// Alternating RC / precoder optimization on cascaded estimates: per-element
/// phase grid search with monotone acceptance, best of several random starts.
pub fn optimize_rc_ao(
    est: &CascadedEstimate,
    gamma: &[f64],
    noise_mw: f64,
    opts: &SolveOptions,
    rng: &mut RngStream,
) -> Result<AoResult> {
    opts.validate()?;
    let n = est.num_elements();
    let problem = AoProblem {
        est,
        gamma,
        noise_mw,
        opts,
    };
    if n == 0 {
        let rc = RcVector::ones(0);
        let (precoders, _) = solve_power_min(&problem.effective(&rc)?, gamma, noise_mw, opts)?;
        let trace = vec![precoders.total];
        return Ok(AoResult {
            rc,
            precoders,
            trace,
        });
    }

    let mut best: Option<(f64, RcVector, Vec<f64>)> = None;
    for _ in 0..opts.restarts {
        let mut phi = RcVector::random(n, rng);
        let mut warm = None;
        let mut value = problem.power(&problem.effective(&phi)?, &mut warm);
        let mut trace = Vec::new();
        if value.is_finite() {
            trace.push(value);
        }
        for _ in 0..opts.ao_max_rounds {
            let next = problem.sweep(&mut phi, value, &mut warm)?;
            let improvement = if value.is_finite() {
                (value - next) / value
            } else if next.is_finite() {
                f64::INFINITY
            } else {
                0.0
            };
            value = next;
            if value.is_finite() {
                trace.push(value);
            }
            if improvement < opts.tol {
                break;
            }
        }
        if value.is_finite() && best.as_ref().is_none_or(|(b, _, _)| value < *b) {
            best = Some((value, phi, trace));
        }
    }
    let (_, rc, trace) =
        best.ok_or_else(|| Error::InfeasibleTargets("no feasible RC configuration found".into()))?;
    let (precoders, _) = solve_power_min(&problem.effective(&rc)?, gamma, noise_mw, opts)?;
    Ok(AoResult {
        rc,
        precoders,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimationMethod;
    use crate::numerics::sample_cgauss;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_channels(rng: &mut RngStream, m: usize, k: usize) -> Vec<Vec<Complex64>> {
        (0..k)
            .map(|_| sample_cgauss(rng, m, 1, 1.0).unwrap().column(0))
            .collect()
    }

    #[test]
    fn single_user_matched_filter() {
        let h = vec![vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]];
        let (p, d) = solve_power_min(&h, &[10.0], 1.0, &SolveOptions::default()).unwrap();
        assert!((p.total - 10.0).abs() < 1e-9);
        assert!(p.w[(0, 0)].norm() > 0.0 && p.w[(1, 0)].norm() < 1e-12);
        assert!(d.converged && d.lambda[0] >= 0.0);
        let s = sinr(&h, &p, 1.0);
        assert!((s[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_users_decouple() {
        let h = vec![
            vec![c(2.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.5)],
        ];
        let (p, _) = solve_power_min(&h, &[10.0, 3.0], 0.1, &SolveOptions::default()).unwrap();
        assert!((p.powers[0] - 10.0 * 0.1 / 4.0).abs() < 1e-9 * p.powers[0]);
        assert!((p.powers[1] - 3.0 * 0.1 / 0.25).abs() < 1e-9 * p.powers[1]);
        assert!(inner(&h[0], &p.precoder(1)).norm() < 1e-12);
    }

    #[test]
    fn random_instance_constraints_are_tight() {
        let mut rng = RngStream::new(11, 0);
        let h = random_channels(&mut rng, 4, 2);
        let gamma = [10.0, 10.0];
        let (p, d) = solve_power_min(&h, &gamma, 1.0, &SolveOptions::default()).unwrap();
        let s = sinr(&h, &p, 1.0);
        for k in 0..2 {
            assert!((s[k] / gamma[k] - 1.0).abs() < 1e-3);
            assert!(d.coupling[k * 2 + k] > 0.0);
        }
        let total: f64 = (0..2).map(|k| norm_sqr(&p.precoder(k))).sum();
        assert!((total / p.total - 1.0).abs() < 1e-9);
        for k in 0..2 {
            let mut shrunk = p.clone();
            for r in 0..4 {
                shrunk.w[(r, k)] *= 0.99;
            }
            assert!(sinr(&h, &shrunk, 1.0)[k] < gamma[k] * (1.0 - 1e-3));
        }
    }

    #[test]
    fn noise_scaling_scales_powers() {
        let mut rng = RngStream::new(12, 0);
        let h = random_channels(&mut rng, 4, 3);
        let opts = SolveOptions {
            tol: 1e-10,
            ..SolveOptions::default()
        };
        let (a, _) = solve_power_min(&h, &[3.0; 3], 1.0, &opts).unwrap();
        let (b, _) = solve_power_min(&h, &[3.0; 3], 5.0, &opts).unwrap();
        for k in 0..3 {
            assert!((b.powers[k] / a.powers[k] - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn too_many_users_is_infeasible() {
        let mut rng = RngStream::new(13, 0);
        let h = random_channels(&mut rng, 2, 4);
        assert!(matches!(
            solve_power_min(&h, &[10.0; 4], 1.0, &SolveOptions::default()),
            Err(Error::InfeasibleTargets(_))
        ));
        assert!(matches!(
            solve_power_min(&[vec![c(0.0, 0.0)]], &[1.0], 1.0, &SolveOptions::default()),
            Err(Error::InfeasibleTargets(_))
        ));
    }

    #[test]
    fn sinr_matches_term_by_term_expansion() {
        let mut rng = RngStream::new(14, 0);
        let h = random_channels(&mut rng, 3, 2);
        let w = sample_cgauss(&mut rng, 3, 2, 1.0).unwrap();
        let set = PrecoderSet {
            powers: vec![norm_sqr(&w.column(0)), norm_sqr(&w.column(1))],
            total: 0.0,
            w: w.clone(),
        };
        let s = sinr(&h, &set, 0.3);
        let g = |k: usize, j: usize| {
            let mut acc = c(0.0, 0.0);
            for r in 0..3 {
                acc += h[k][r].conj() * w[(r, j)];
            }
            acc.norm_sqr()
        };
        assert!((s[0] - g(0, 0) / (g(0, 1) + 0.3)).abs() < 1e-12);
        assert!((s[1] - g(1, 1) / (g(1, 0) + 0.3)).abs() < 1e-12);
    }

    fn siso_estimate(hd_ul: Complex64, hr_ul: &[Complex64]) -> CascadedEstimate {
        let mut row = vec![hd_ul];
        row.extend_from_slice(hr_ul);
        CascadedEstimate {
            stacks: vec![CMatrix::from_vec(1, row.len(), row).unwrap()],
            method: EstimationMethod::Dft,
            pilot_slots: hr_ul.len() + 1,
        }
    }

    #[test]
    fn alignment_rotates_onto_direct_path() {
        // downlink scalars ĥ_r = 1, ĥ_d = i, stored as their uplink conjugates
        let est = siso_estimate(c(0.0, -1.0), &[c(1.0, 0.0)]);
        let phi = align_rc_single_user(&est).unwrap();
        assert!((phi.as_slice()[0] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((phi.as_slice()[0] * c(1.0, 0.0) - c(0.0, 1.0)).norm() < 1e-15);

        let est = siso_estimate(c(0.3, -0.4), &[c(-1.0, 2.0)]);
        let phi = align_rc_single_user(&est).unwrap();
        let g = est.effective(&phi, 0).unwrap()[0].norm();
        assert!((g - (0.5 + 5f64.sqrt())).abs() < 1e-12);

        let est = siso_estimate(c(0.0, 0.0), &[c(1.0, 0.0)]);
        assert_eq!(
            align_rc_single_user(&est).unwrap().as_slice()[0],
            c(1.0, 0.0)
        );
    }

    #[test]
    fn ao_without_ris_reduces_to_power_min() {
        let mut rng = RngStream::new(15, 0);
        let stacks: Vec<CMatrix> = (0..2)
            .map(|_| sample_cgauss(&mut rng, 4, 1, 1.0).unwrap())
            .collect();
        let est = CascadedEstimate {
            stacks: stacks.clone(),
            method: EstimationMethod::Dft,
            pilot_slots: 1,
        };
        let opts = SolveOptions::default();
        let ao = optimize_rc_ao(&est, &[10.0, 10.0], 1.0, &opts, &mut rng).unwrap();
        let chans: Vec<_> = stacks.iter().map(|s| s.column(0)).collect();
        let (direct, _) = solve_power_min(&chans, &[10.0, 10.0], 1.0, &opts).unwrap();
        assert_eq!(ao.precoders, direct);
    }

    #[test]
    fn ao_matches_closed_form_alignment_siso() {
        let mut rng = RngStream::new(16, 0);
        let row = sample_cgauss(&mut rng, 1, 6, 1.0).unwrap();
        let est = siso_estimate(row[(0, 0)], &row.row(0)[1..]);
        let ao = optimize_rc_ao(&est, &[10.0], 1e-3, &SolveOptions::default(), &mut rng).unwrap();
        let amp: f64 = row.row(0).iter().map(|z| z.norm()).sum();
        let closed = 10.0 * 1e-3 / (amp * amp);
        assert!((ao.precoders.total / closed - 1.0).abs() < 0.01);
        assert!(ao.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(ao
            .rc
            .as_slice()
            .iter()
            .all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ao_multiuser_trace_is_monotone() {
        let mut rng = RngStream::new(17, 0);
        let stacks: Vec<CMatrix> = (0..2)
            .map(|_| sample_cgauss(&mut rng, 4, 5, 1.0).unwrap())
            .collect();
        let est = CascadedEstimate {
            stacks,
            method: EstimationMethod::Dft,
            pilot_slots: 5,
        };
        let opts = SolveOptions {
            phase_grid_size: 16,
            ..SolveOptions::default()
        };
        let ao = optimize_rc_ao(&est, &[10.0, 10.0], 1.0, &opts, &mut rng).unwrap();
        assert!(ao.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((ao.precoders.total - ao.trace.last().unwrap()).abs() <= 1e-3 * ao.precoders.total);
    }
}
