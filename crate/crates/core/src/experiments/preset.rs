//! Scenario presets for the figures of the evaluation section.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::beamforming::SolveOptions;
use crate::channel::{distance, path_loss, ArrayGeometry, LinkParams, Point, ScenarioConfig};
use crate::error::{Error, Result};
use crate::numerics::from_db;

/// BS–RIS separation, m.
pub const D0: f64 = 50.0;
/// Offset of the single-user line from the BS–RIS axis, m.
pub const D_V: f64 = 3.0;
/// Noise power at the BS and at the users (−70 dBm), mW.
pub const NOISE_MW: f64 = 1e-7;
/// Coherence interval used by every preset. Not a published value.
pub const DEFAULT_TAU_CO: usize = 1000;
/// Fixed number of RIS columns along x.
pub const RIS_NX: usize = 10;

/// dBm to mW.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    from_db(dbm)
}

/// Splits `N` over the URA: 10 columns when `N` is a multiple of 10,
/// otherwise a single row of `N` elements.
pub fn ris_layout(n: usize) -> (usize, usize) {
    if n >= RIS_NX && n.is_multiple_of(RIS_NX) {
        (RIS_NX, n / RIS_NX)
    } else {
        (n, 1)
    }
}

/// Where the users sit, so that distance sweeps can move them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Layout {
    /// One user on the line parallel to the BS–RIS axis, `d` m from the BS
    /// horizontally and `d_v` m off the axis.
    SisoLine { d: f64, d_v: f64 },
    /// Three users on a semicircle around the BS and three on a semicircle
    /// around the RIS.
    MimoRings { bs_radius: f64, ris_radius: f64 },
}

const RING_ANGLES_DEG: [f64; 3] = [30.0, 90.0, 150.0];

impl Layout {
    pub fn user_positions(&self) -> Vec<Point> {
        match *self {
            Layout::SisoLine { d, d_v } => vec![[d_v, d, 0.0]],
            Layout::MimoRings {
                bs_radius,
                ris_radius,
            } => {
                let mut out = Vec::with_capacity(6);
                for a in RING_ANGLES_DEG {
                    let t = a * PI / 180.0;
                    out.push([bs_radius * t.cos(), bs_radius * t.sin(), 0.0]);
                }
                for a in RING_ANGLES_DEG {
                    let t = a * PI / 180.0;
                    out.push([ris_radius * t.cos(), D0 - ris_radius * t.sin(), 0.0]);
                }
                out
            }
        }
    }

    pub fn with_distance(self, d: f64) -> Result<Self> {
        match self {
            Layout::SisoLine { d_v, .. } => Ok(Layout::SisoLine { d, d_v }),
            Layout::MimoRings { .. } => Err(Error::Unsupported(
                "distance sweeps apply to the single-user line layout".into(),
            )),
        }
    }
}

/// Single-user line geometry: `(d_BU, d_IU)`.
pub fn siso_distances(d: f64) -> (f64, f64) {
    (
        (d * d + D_V * D_V).sqrt(),
        ((D0 - d).powi(2) + D_V * D_V).sqrt(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    OnOff,
    ThreePhase,
    Dft,
    TrainingRandom,
    TrainingEquipartition,
    Optimal,
    SingleRandom,
}

impl Protocol {
    pub const ALL: [Protocol; 7] = [
        Protocol::OnOff,
        Protocol::ThreePhase,
        Protocol::Dft,
        Protocol::TrainingRandom,
        Protocol::TrainingEquipartition,
        Protocol::Optimal,
        Protocol::SingleRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::OnOff => "onoff",
            Protocol::ThreePhase => "three-phase",
            Protocol::Dft => "dft",
            Protocol::TrainingRandom => "training-random",
            Protocol::TrainingEquipartition => "training-equipartition",
            Protocol::Optimal => "optimal",
            Protocol::SingleRandom => "single-random",
        }
    }

    pub fn is_estimation(self) -> bool {
        matches!(self, Protocol::OnOff | Protocol::ThreePhase | Protocol::Dft)
    }

    pub fn is_training(self) -> bool {
        matches!(
            self,
            Protocol::TrainingRandom | Protocol::TrainingEquipartition | Protocol::SingleRandom
        )
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "protocol",
                name: s.to_string(),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVar {
    N,
    Q,
    D,
    P,
    Gamma,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::N => "N",
            SweepVar::Q => "Q",
            SweepVar::D => "d",
            SweepVar::P => "P",
            SweepVar::Gamma => "gamma",
        }
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" => Ok(SweepVar::N),
            "Q" => Ok(SweepVar::Q),
            "d" => Ok(SweepVar::D),
            "P" => Ok(SweepVar::P),
            "gamma" => Ok(SweepVar::Gamma),
            _ => Err(Error::Unknown {
                kind: "sweep variable",
                name: s.to_string(),
            }),
        }
    }
}

/// Sweep values are in natural display units: `N`, `Q` counts, `d` in m,
/// `P` in dBm and `gamma` in dB.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Periods {
    Fixed(usize),
    /// `Q = N + 1`, the pilot budget of cascaded estimation.
    NPlusOne,
}

/// What the `power_mw` column reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Minimum BS transmit power meeting the SINR targets on the true
    /// channels with the protocol's RC.
    TransmitPower,
    /// Single-user received power `P |h|²` at a fixed transmit power.
    ReceivedPower,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub id: String,
    pub scenario: ScenarioConfig,
    pub layout: Layout,
    pub protocol: Protocol,
    pub periods: Periods,
    pub sweep: Sweep,
    pub metric: Metric,
    /// Transmit power for the received-power metric, mW.
    pub tx_power_mw: f64,
    /// Estimation without BS noise.
    pub noiseless: bool,
    pub trials: usize,
    pub master_seed: u64,
    pub opts: SolveOptions,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.opts.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::InvalidArgument("sweep has no values".into()));
        }
        if self.metric == Metric::ReceivedPower && self.scenario.num_users() != 1 {
            return Err(Error::Unsupported(
                "received-power metric is single-user".into(),
            ));
        }
        for &v in &self.sweep.values {
            let whole = v >= 1.0 && v.fract() == 0.0;
            match self.sweep.var {
                SweepVar::N | SweepVar::Q if !whole => {
                    return Err(Error::InvalidArgument(format!(
                        "{} sweep needs positive integers, got {v}",
                        self.sweep.var.name()
                    )))
                }
                SweepVar::D if !(v.is_finite() && v > 0.0) => {
                    return Err(Error::InvalidArgument(format!(
                        "distance {v} is not positive"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Scenario for one sweep point.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub scenario: ScenarioConfig,
    pub periods: usize,
    pub tx_power_mw: f64,
}

impl ExperimentSpec {
    pub fn point(&self, value: f64) -> Result<SweepPoint> {
        let mut scenario = self.scenario.clone();
        let mut layout = self.layout;
        let mut tx_power_mw = self.tx_power_mw;
        let mut fixed_q = None;
        match self.sweep.var {
            SweepVar::N => {
                let (nx, nz) = ris_layout(value as usize);
                scenario.geometry.ris_nx = nx;
                scenario.geometry.ris_nz = nz;
            }
            SweepVar::Q => fixed_q = Some(value as usize),
            SweepVar::D => layout = layout.with_distance(value)?,
            SweepVar::P => tx_power_mw = dbm_to_mw(value),
            SweepVar::Gamma => scenario
                .sinr_targets
                .iter_mut()
                .for_each(|g| *g = from_db(value)),
        }
        scenario.geometry.user_positions = layout.user_positions();
        scenario.validate()?;
        let n = scenario.geometry.num_elements();
        let periods = fixed_q.unwrap_or(match self.periods {
            Periods::Fixed(q) => q,
            Periods::NPlusOne => n + 1,
        });
        Ok(SweepPoint {
            scenario,
            periods,
            tx_power_mw,
        })
    }
}

fn base_geometry(bs_antennas: usize, n: usize, layout: &Layout) -> ArrayGeometry {
    let (ris_nx, ris_nz) = ris_layout(n);
    ArrayGeometry {
        bs_antennas,
        bs_center: [0.0; 3],
        ris_center: [0.0, D0, 0.0],
        ris_nx,
        ris_nz,
        element_spacing: 0.5,
        user_positions: layout.user_positions(),
    }
}

/// Single-user scenario on the line layout: LoS BS–RIS link, Rayleigh
/// RIS–user and BS–user links.
pub fn siso_line_scenario(
    bs_antennas: usize,
    n: usize,
    d: f64,
    pilot_power_mw: f64,
    gamma: f64,
) -> ScenarioConfig {
    let layout = Layout::SisoLine { d, d_v: D_V };
    ScenarioConfig {
        geometry: base_geometry(bs_antennas, n, &layout),
        bs_ris: LinkParams::new(2.0, f64::INFINITY),
        ris_user: vec![LinkParams::new(2.8, 0.0)],
        bs_user: vec![LinkParams::new(3.5, 0.0)],
        noise_bs_mw: NOISE_MW,
        noise_user_mw: NOISE_MW,
        pilot_power_mw,
        sinr_targets: vec![gamma],
        tau_co: DEFAULT_TAU_CO,
    }
}

/// Six-user scenario with the two user rings.
pub fn mimo_scenario(
    bs_antennas: usize,
    n: usize,
    pilot_power_mw: f64,
    gamma: f64,
) -> ScenarioConfig {
    let layout = Layout::MimoRings {
        bs_radius: 15.0,
        ris_radius: 3.0,
    };
    let far = (LinkParams::new(3.5, 0.0), LinkParams::new(2.8, 0.0));
    let near = (LinkParams::new(2.8, 0.0), LinkParams::new(3.5, 0.0));
    let (ris_user, bs_user) = [far, far, far, near, near, near].into_iter().unzip();
    ScenarioConfig {
        geometry: base_geometry(bs_antennas, n, &layout),
        bs_ris: LinkParams::new(2.0, from_db(5.0)),
        ris_user,
        bs_user,
        noise_bs_mw: NOISE_MW,
        noise_user_mw: NOISE_MW,
        pilot_power_mw,
        sinr_targets: vec![gamma; 6],
        tau_co: DEFAULT_TAU_CO,
    }
}

/// `(ρ_r², ρ_d²)` of the single-user line at horizontal distance `d`:
/// mean power of one cascaded coefficient and of the direct link.
pub fn siso_channel_powers(scenario: &ScenarioConfig) -> Result<(f64, f64)> {
    let g = &scenario.geometry;
    let user = g.user_positions[0];
    let bi = path_loss(distance(g.bs_center, g.ris_center), &scenario.bs_ris)?;
    let iu = path_loss(distance(g.ris_center, user), &scenario.ris_user[0])?;
    let bu = path_loss(distance(g.bs_center, user), &scenario.bs_user[0])?;
    Ok((bi * iu, bu))
}

pub const PRESET_IDS: [&str; 12] = [
    "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13", "fig14", "fig15", "fig16",
    "fig17",
];

/// One-line description of a preset, for listings.
pub fn describe(id: &str) -> Result<&'static str> {
    Ok(match id {
        "fig6" => "SISO rate pipeline, N=500, pilots -30 dBm, sweep P (dBm)",
        "fig7" => "SISO rate pipeline, N=500, pilots 10 dBm, sweep P (dBm)",
        "fig8" => "SISO received power vs Q, N=1, noiseless training",
        "fig9" => "SISO received power vs Q, N=5, noiseless training",
        "fig10" => "SISO received power vs Q, N=1, pilots 15 dBm",
        "fig11" => "SISO received power vs Q, N=5, pilots 15 dBm",
        "fig12" => "MISO M=4 transmit power vs N, d=50 m, gamma=10 dB, Q=N+1",
        "fig13" => "MISO M=4 transmit power vs N, d=40 m, gamma=10 dB, Q=N+1",
        "fig14" => "MISO M=4 transmit power vs d, N=30, gamma=10 dB, Q=N+1",
        "fig15" => "MIMO K=6 ring layout, single point N=20, gamma=10 dB",
        "fig16" => "MIMO K=6 transmit power vs N, beta_BI=5 dB, gamma=10 dB",
        "fig17" => "MIMO K=6 transmit power vs gamma (dB), N=20",
        _ => {
            return Err(Error::Unknown {
                kind: "preset",
                name: id.to_string(),
            })
        }
    })
}

fn range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step).round() as usize;
    (0..=count).map(|i| start + step * i as f64).collect()
}

/// The parameterization of a figure.
pub fn preset(id: &str) -> Result<ExperimentSpec> {
    describe(id)?;
    let gamma = from_db(10.0);
    let low_snr = dbm_to_mw(15.0);
    let siso =
        |n: usize, pilots_dbm: f64| siso_line_scenario(1, n, 50.0, dbm_to_mw(pilots_dbm), gamma);
    let line = |d: f64| Layout::SisoLine { d, d_v: D_V };
    let rings = Layout::MimoRings {
        bs_radius: 15.0,
        ris_radius: 3.0,
    };
    let spec =
        |scenario, layout, protocol, periods, sweep, metric, noiseless, trials| ExperimentSpec {
            id: id.to_string(),
            scenario,
            layout,
            protocol,
            periods,
            sweep,
            metric,
            tx_power_mw: 1.0,
            noiseless,
            trials,
            master_seed: 42,
            opts: SolveOptions::default(),
        };
    let q_sweep = Sweep {
        var: SweepVar::Q,
        values: range(1.0, 10.0, 1.0),
    };
    Ok(match id {
        "fig6" | "fig7" => spec(
            siso(500, if id == "fig6" { -30.0 } else { 10.0 }),
            line(50.0),
            Protocol::Dft,
            Periods::NPlusOne,
            Sweep {
                var: SweepVar::P,
                values: range(-10.0, 30.0, 5.0),
            },
            Metric::ReceivedPower,
            false,
            1000,
        ),
        "fig8" | "fig9" => spec(
            siso(if id == "fig8" { 1 } else { 5 }, 15.0),
            line(50.0),
            Protocol::TrainingRandom,
            Periods::Fixed(1),
            q_sweep,
            Metric::ReceivedPower,
            true,
            20_000,
        ),
        "fig10" | "fig11" => spec(
            siso(if id == "fig10" { 1 } else { 5 }, 15.0),
            line(50.0),
            Protocol::TrainingRandom,
            Periods::Fixed(1),
            q_sweep,
            Metric::ReceivedPower,
            false,
            20_000,
        ),
        "fig12" | "fig13" => {
            let d = if id == "fig12" { 50.0 } else { 40.0 };
            spec(
                siso_line_scenario(4, 30, d, low_snr, gamma),
                line(d),
                Protocol::TrainingRandom,
                Periods::NPlusOne,
                Sweep {
                    var: SweepVar::N,
                    values: range(10.0, 60.0, 10.0),
                },
                Metric::TransmitPower,
                false,
                2000,
            )
        }
        "fig14" => spec(
            siso_line_scenario(4, 30, 50.0, low_snr, gamma),
            line(50.0),
            Protocol::OnOff,
            Periods::NPlusOne,
            Sweep {
                var: SweepVar::D,
                values: range(30.0, 60.0, 5.0),
            },
            Metric::TransmitPower,
            false,
            500,
        ),
        "fig15" => spec(
            mimo_scenario(8, 20, low_snr, gamma),
            rings,
            Protocol::TrainingRandom,
            Periods::NPlusOne,
            Sweep {
                var: SweepVar::N,
                values: vec![20.0],
            },
            Metric::TransmitPower,
            false,
            200,
        ),
        "fig16" => spec(
            mimo_scenario(8, 20, low_snr, gamma),
            rings,
            Protocol::TrainingRandom,
            Periods::NPlusOne,
            Sweep {
                var: SweepVar::N,
                values: range(20.0, 80.0, 20.0),
            },
            Metric::TransmitPower,
            false,
            200,
        ),
        "fig17" => spec(
            mimo_scenario(8, 20, low_snr, gamma),
            rings,
            Protocol::TrainingRandom,
            Periods::NPlusOne,
            Sweep {
                var: SweepVar::Gamma,
                values: range(0.0, 12.0, 2.0),
            },
            Metric::TransmitPower,
            false,
            200,
        ),
        _ => unreachable!("describe() rejects unknown ids"),
    })
}
