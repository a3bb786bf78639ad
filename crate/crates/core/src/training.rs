//! The superimposed channel-training protocol: RC schedules over `Q`
//! periods, per-period LS estimation and precoding, and selection of the
//! period with the smallest required power.

use std::f64::consts::TAU;

use crate::beamforming::{solve_power_min, PrecoderSet, SolveOptions};
use crate::channel::{ChannelRealization, RcVector};
use crate::error::{Error, Result};
use crate::estimators::{estimate_superimposed, PilotConfig, SuperimposedEstimate};
use crate::numerics::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleMethod {
    Random,
    Equipartition,
}

#[derive(Clone, Debug)]
pub struct TrainingSchedule {
    pub method: ScheduleMethod,
    pub rc_per_period: Vec<RcVector>,
}

impl TrainingSchedule {
    pub fn periods(&self) -> usize {
        self.rc_per_period.len()
    }

    /// The first `q` periods of this schedule.
    pub fn truncated(&self, q: usize) -> Self {
        Self {
            method: self.method,
            rc_per_period: self.rc_per_period[..q.min(self.periods())].to_vec(),
        }
    }

    /// Training slots consumed with `users` pilots per period.
    pub fn pilot_slots(&self, users: usize) -> usize {
        self.periods() * users
    }
}

fn check_sizes(n: usize, q: usize) -> Result<()> {
    if n == 0 || q == 0 {
        return Err(Error::InvalidArgument(format!(
            "schedules need N >= 1 and Q >= 1, got N = {n}, Q = {q}"
        )));
    }
    Ok(())
}

/// Every phase i.i.d. uniform on [0, 2π).
pub fn schedule_random(n: usize, q: usize, rng: &mut RngStream) -> Result<TrainingSchedule> {
    check_sizes(n, q)?;
    Ok(TrainingSchedule {
        method: ScheduleMethod::Random,
        rc_per_period: (0..q).map(|_| RcVector::random(n, rng)).collect(),
    })
}

/// Per element, the `Q` phases form a regular Q-gon rotated by a random
/// initial phase.
pub fn schedule_equipartition(n: usize, q: usize, rng: &mut RngStream) -> Result<TrainingSchedule> {
    check_sizes(n, q)?;
    let initial: Vec<f64> = (0..n).map(|_| rng.unit_phase().arg()).collect();
    let rc_per_period = (0..q)
        .map(|p| {
            let shift = TAU * p as f64 / q as f64;
            RcVector::from_phases(&initial.iter().map(|t| t + shift).collect::<Vec<_>>())
        })
        .collect();
    Ok(TrainingSchedule {
        method: ScheduleMethod::Equipartition,
        rc_per_period,
    })
}

/// Largest violation of `Σ_q' Im(φ_q',n conj(φ_q,n)) = 0` over all `q, n`.
pub fn balance_residual(schedule: &TrainingSchedule) -> f64 {
    let n = schedule.rc_per_period.first().map_or(0, RcVector::len);
    let mut worst: f64 = 0.0;
    for e in 0..n {
        for q in &schedule.rc_per_period {
            let s: f64 = schedule
                .rc_per_period
                .iter()
                .map(|p| (p.as_slice()[e] * q.as_slice()[e].conj()).im)
                .sum();
            worst = worst.max(s.abs());
        }
    }
    worst
}

/// Bits needed to signal the selected period index.
pub fn signalling_bits(q: usize) -> u32 {
    if q <= 1 {
        0
    } else {
        usize::BITS - (q - 1).leading_zeros()
    }
}

#[derive(Clone, Debug)]
pub struct PeriodOutcome {
    pub q: usize,
    pub estimate: SuperimposedEstimate,
    /// `None` when the targets are infeasible on this period's estimates.
    pub precoders: Option<PrecoderSet>,
    /// Required total power, `+∞` when infeasible.
    pub total_power: f64,
}

#[derive(Clone, Debug)]
pub struct SelectionResult {
    pub q_hat: usize,
    pub rc: RcVector,
    pub estimate: SuperimposedEstimate,
    pub precoders: PrecoderSet,
    pub outcomes: Vec<PeriodOutcome>,
}

/// Runs every training period and selects the feasible one with the lowest
/// power (smallest index on ties).
#[allow(clippy::too_many_arguments)]
pub fn run_training(
    ch: &ChannelRealization,
    schedule: &TrainingSchedule,
    pilots: &PilotConfig,
    noise_bs_mw: f64,
    gamma: &[f64],
    noise_user_mw: f64,
    opts: &SolveOptions,
    rng: &mut RngStream,
) -> Result<SelectionResult> {
    let mut outcomes = Vec::with_capacity(schedule.periods());
    for (q, phi) in schedule.rc_per_period.iter().enumerate() {
        let estimate = estimate_superimposed(ch, phi, pilots, noise_bs_mw, rng)?;
        let (precoders, total_power) =
            match solve_power_min(&estimate.channels(), gamma, noise_user_mw, opts) {
                Ok((p, _)) => {
                    let t = p.total;
                    (Some(p), t)
                }
                Err(Error::InfeasibleTargets(_)) => (None, f64::INFINITY),
                Err(e) => return Err(e),
            };
        outcomes.push(PeriodOutcome {
            q,
            estimate,
            precoders,
            total_power,
        });
    }
    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if o.total_power.is_finite() && best.is_none_or(|b| o.total_power < outcomes[b].total_power)
        {
            best = Some(i);
        }
    }
    let q_hat = best.ok_or(Error::InfeasibleTrial)?;
    let chosen = &outcomes[q_hat];
    Ok(SelectionResult {
        q_hat,
        rc: schedule.rc_per_period[q_hat].clone(),
        estimate: chosen.estimate.clone(),
        precoders: chosen
            .precoders
            .clone()
            .expect("selected period is feasible"),
        outcomes,
    })
}
