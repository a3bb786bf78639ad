//! Monte Carlo orchestration: one work item per (sweep value, trial).

use rayon::prelude::*;

use super::preset::{ExperimentSpec, Metric, Protocol, SweepPoint};
use crate::beamforming::{
    align_rc_single_user, optimize_rc_ao, sinr, solve_power_min, PrecoderSet,
};
use crate::channel::{sample_channels, ChannelRealization, RcVector};
use crate::error::{Error, Result};
use crate::estimators::{
    dft_training_matrix, inject_cascaded_errors, mse_stats, onoff_estimate_single_user,
    orthogonal_pilots, simulate_uplink_cascaded, CascadedEstimate, EstimationMethod, LsEstimator,
    PilotConfig,
};
use crate::numerics::{norm_sqr, to_db, RngStream};
use crate::training::{run_training, schedule_equipartition, schedule_random, TrainingSchedule};

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub sweep_value: f64,
    pub trial: usize,
    /// Minimum transmit power meeting the targets on the true channels with
    /// the protocol's RC, mW; `+∞` when infeasible. `None` for the
    /// received-power metric.
    pub transmit_power_mw: Option<f64>,
    /// `P |h|²` for the single-user received-power metric, mW.
    pub received_power_mw: Option<f64>,
    /// SINR of each user on the true channels with the protocol's precoders.
    pub sinrs: Vec<f64>,
    pub feasible: bool,
    pub pilot_slots: usize,
}

impl TrialRecord {
    /// The value reported in the `power_mw` column.
    pub fn power_mw(&self) -> f64 {
        self.received_power_mw
            .or(self.transmit_power_mw)
            .unwrap_or(f64::INFINITY)
    }

    /// `10 log10` of the mean linear SINR, `-∞` without precoders.
    pub fn mean_sinr_db(&self) -> f64 {
        if self.sinrs.is_empty() {
            return f64::NEG_INFINITY;
        }
        to_db(self.sinrs.iter().sum::<f64>() / self.sinrs.len() as f64)
    }
}

/// Everything shared by the trials of one sweep point.
struct PointContext {
    value: f64,
    point: SweepPoint,
    pilots: PilotConfig,
    dft: Option<LsEstimator>,
}

impl PointContext {
    fn new(spec: &ExperimentSpec, value: f64) -> Result<Self> {
        let point = spec.point(value)?;
        let s = &point.scenario;
        let pilots = orthogonal_pilots(s.num_users(), s.pilot_power_mw)?;
        let dft = if spec.protocol == Protocol::Dft {
            let g = dft_training_matrix(s.geometry.num_elements(), &pilots)?;
            Some(LsEstimator::new(g, s.num_users())?)
        } else {
            None
        };
        Ok(Self {
            value,
            point,
            pilots,
            dft,
        })
    }
}

/// Per-trial random streams, keyed by trial index so that every sweep value
/// sees the same draws (paired comparisons across the sweep).
struct TrialStreams {
    channel: RngStream,
    schedule: RngStream,
    noise: RngStream,
    ao: RngStream,
}

impl TrialStreams {
    fn new(seed: u64, trial: usize) -> Self {
        let key = trial as u64;
        Self {
            channel: RngStream::for_purpose(seed, key, "channel"),
            schedule: RngStream::for_purpose(seed, key, "schedule"),
            noise: RngStream::for_purpose(seed, key, "noise"),
            ao: RngStream::for_purpose(seed, key, "ao"),
        }
    }
}

/// RC and (optionally) the precoders designed on the estimates.
type Design = (RcVector, Option<PrecoderSet>);

fn estimate_cascaded(
    spec: &ExperimentSpec,
    ctx: &PointContext,
    ch: &ChannelRealization,
    noise_bs: f64,
    rng: &mut RngStream,
) -> Result<CascadedEstimate> {
    let s = &ctx.point.scenario;
    let n = ch.num_elements();
    let k = ch.num_users();
    match spec.protocol {
        Protocol::Dft => {
            let ls = ctx.dft.as_ref().expect("DFT estimator prepared");
            let y = simulate_uplink_cascaded(ch, ls.training_matrix(), noise_bs, rng)?;
            ls.estimate(&y, EstimationMethod::Dft)
        }
        Protocol::OnOff if k == 1 => {
            onoff_estimate_single_user(ch, noise_bs, s.pilot_power_mw, rng)
        }
        Protocol::OnOff | Protocol::ThreePhase => {
            let method = if spec.protocol == Protocol::OnOff {
                EstimationMethod::OnOff
            } else {
                EstimationMethod::ThreePhase
            };
            let stats = mse_stats(method, n, k, noise_bs / s.pilot_power_mw)?;
            Ok(inject_cascaded_errors(ch, &stats, method, rng))
        }
        Protocol::Optimal => Ok(CascadedEstimate {
            stacks: ch.cascaded_all().to_vec(),
            method: EstimationMethod::Dft,
            pilot_slots: 0,
        }),
        _ => unreachable!("training protocols do not estimate cascaded channels"),
    }
}

fn design_from_estimate(
    spec: &ExperimentSpec,
    ctx: &PointContext,
    est: &CascadedEstimate,
    rng: &mut RngStream,
) -> Result<Design> {
    let s = &ctx.point.scenario;
    if est.num_users() == 1 && est.stacks[0].rows() == 1 {
        let rc = align_rc_single_user(est)?;
        if spec.metric == Metric::ReceivedPower {
            return Ok((rc, None));
        }
        let h = vec![est.effective(&rc, 0)?];
        let w = solve_power_min(&h, &s.sinr_targets, s.noise_user_mw, &spec.opts)?.0;
        return Ok((rc, Some(w)));
    }
    if est.num_elements() == 0 {
        let h: Vec<_> = (0..est.num_users()).map(|k| est.direct(k)).collect();
        let w = solve_power_min(&h, &s.sinr_targets, s.noise_user_mw, &spec.opts)?.0;
        return Ok((RcVector::ones(0), Some(w)));
    }
    let ao = optimize_rc_ao(est, &s.sinr_targets, s.noise_user_mw, &spec.opts, rng)?;
    Ok((ao.rc, Some(ao.precoders)))
}

fn schedule_for(
    spec: &ExperimentSpec,
    n: usize,
    q: usize,
    rng: &mut RngStream,
) -> Result<TrainingSchedule> {
    match spec.protocol {
        Protocol::TrainingEquipartition => schedule_equipartition(n, q, rng),
        Protocol::SingleRandom => schedule_random(n, 1, rng),
        _ => schedule_random(n, q, rng),
    }
}

/// Runs one trial end to end: channels, protocol, evaluation on the true
/// channels.
fn run_trial(spec: &ExperimentSpec, ctx: &PointContext, trial: usize) -> Result<TrialRecord> {
    let s = &ctx.point.scenario;
    let mut streams = TrialStreams::new(spec.master_seed, trial);
    let ch = sample_channels(s, &mut streams.channel)?;
    let (n, k) = (ch.num_elements(), ch.num_users());
    let noise_bs = if spec.noiseless { 0.0 } else { s.noise_bs_mw };

    let (design, pilot_slots) = if spec.protocol.is_training() {
        let sched = schedule_for(spec, n, ctx.point.periods, &mut streams.schedule)?;
        let slots = sched.pilot_slots(k);
        let sel = run_training(
            &ch,
            &sched,
            &ctx.pilots,
            noise_bs,
            &s.sinr_targets,
            s.noise_user_mw,
            &spec.opts,
            &mut streams.noise,
        );
        match sel {
            Ok(sel) => (Ok((sel.rc, Some(sel.precoders))), slots),
            Err(e) => (Err(e), slots),
        }
    } else {
        let slots = if spec.protocol == Protocol::Optimal {
            0
        } else {
            (n + 1) * k
        };
        let design = estimate_cascaded(spec, ctx, &ch, noise_bs, &mut streams.noise)
            .and_then(|est| design_from_estimate(spec, ctx, &est, &mut streams.ao));
        (design, slots)
    };

    let mut record = TrialRecord {
        sweep_value: ctx.value,
        trial,
        transmit_power_mw: None,
        received_power_mw: None,
        sinrs: Vec::new(),
        feasible: false,
        pilot_slots,
    };
    let (rc, precoders) = match design {
        Ok(d) => d,
        Err(Error::InfeasibleTrial) | Err(Error::InfeasibleTargets(_)) => {
            if spec.metric == Metric::TransmitPower {
                record.transmit_power_mw = Some(f64::INFINITY);
            }
            return Ok(record);
        }
        Err(e) => return Err(e),
    };
    let h_true = ch.superimposed_all(&rc)?;
    match spec.metric {
        Metric::ReceivedPower => {
            let p = ctx.point.tx_power_mw * norm_sqr(&h_true[0]);
            record.received_power_mw = Some(p);
            record.sinrs = vec![p / s.noise_user_mw];
            record.feasible = true;
        }
        Metric::TransmitPower => {
            match solve_power_min(&h_true, &s.sinr_targets, s.noise_user_mw, &spec.opts) {
                Ok((w, _)) => {
                    record.transmit_power_mw = Some(w.total);
                    record.feasible = true;
                }
                Err(Error::InfeasibleTargets(_)) => record.transmit_power_mw = Some(f64::INFINITY),
                Err(e) => return Err(e),
            }
            if let Some(w) = precoders {
                record.sinrs = sinr(&h_true, &w, s.noise_user_mw);
            }
        }
    }
    Ok(record)
}

/// Runs every (sweep value, trial) pair on `threads` workers. Records are
/// ordered by sweep value, then trial, whatever the scheduling.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let contexts = spec
        .sweep
        .values
        .iter()
        .map(|&v| PointContext::new(spec, v))
        .collect::<Result<Vec<_>>>()?;
    let items: Vec<(usize, usize)> = (0..contexts.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        items
            .par_iter()
            .map(|&(p, t)| run_trial(spec, &contexts[p], t))
            .collect()
    })
}
