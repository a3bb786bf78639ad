//! TOML experiment files. Quantities are plain numbers (linear, mW) or
//! strings with a unit suffix: `"-70dBm"`, `"5dB"`, `"0.1mW"`, `"inf"`.

use std::path::Path;

use serde::Deserialize;

use super::preset::{
    mimo_scenario, preset, ris_layout, siso_line_scenario, ExperimentSpec, Layout, Metric, Periods,
    Protocol, Sweep, SweepVar, D_V,
};
use crate::beamforming::SolveOptions;
use crate::error::{Error, Result};
use crate::numerics::from_db;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    /// Linear value: dBm becomes mW, dB becomes a power ratio.
    pub fn linear(&self) -> Result<f64> {
        let text = match self {
            Quantity::Number(x) => return Ok(*x),
            Quantity::Text(t) => t.trim(),
        };
        let bad = || Error::Config(format!("cannot read quantity {text:?}"));
        if text.eq_ignore_ascii_case("inf") {
            return Ok(f64::INFINITY);
        }
        let (body, convert): (&str, fn(f64) -> f64) = if let Some(b) = text.strip_suffix("dBm") {
            (b, from_db)
        } else if let Some(b) = text.strip_suffix("dB") {
            (b, from_db)
        } else if let Some(b) = text.strip_suffix("mW") {
            (b, |x| x)
        } else {
            (text, |x| x)
        };
        body.trim().parse::<f64>().map(convert).map_err(|_| bad())
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub var: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// `"siso"` (line layout) or `"mimo"` (user rings); only without a preset.
    pub layout: Option<String>,
    pub bs_antennas: Option<usize>,
    pub elements: Option<usize>,
    /// Horizontal BS–user distance of the line layout, m.
    pub distance: Option<f64>,
    pub element_spacing: Option<f64>,
    pub pilot_power: Option<Quantity>,
    pub noise_bs: Option<Quantity>,
    pub noise_user: Option<Quantity>,
    pub sinr_target: Option<Quantity>,
    pub tau_co: Option<usize>,
    pub bs_ris_exponent: Option<f64>,
    pub bs_ris_beta: Option<Quantity>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub protocol: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub noiseless: Option<bool>,
    /// `"transmit"` or `"received"`.
    pub metric: Option<String>,
    pub tx_power: Option<Quantity>,
    /// A count or `"N+1"`.
    pub periods: Option<toml::Value>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub scenario: ScenarioSection,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn base_spec(scenario: &ScenarioSection) -> Result<ExperimentSpec> {
    let layout_name = scenario
        .layout
        .as_deref()
        .ok_or_else(|| cfg_err("either `preset` or `scenario.layout` is required"))?;
    let gamma = from_db(10.0);
    let pilots = from_db(15.0);
    let n = scenario.elements.unwrap_or(1);
    let (scn, layout) = match layout_name {
        "siso" => {
            let d = scenario.distance.unwrap_or(50.0);
            let m = scenario.bs_antennas.unwrap_or(1);
            (
                siso_line_scenario(m, n, d, pilots, gamma),
                Layout::SisoLine { d, d_v: D_V },
            )
        }
        "mimo" => (
            mimo_scenario(scenario.bs_antennas.unwrap_or(8), n, pilots, gamma),
            Layout::MimoRings {
                bs_radius: 15.0,
                ris_radius: 3.0,
            },
        ),
        other => return Err(cfg_err(format!("unknown layout {other:?}"))),
    };
    let metric = if scn.num_users() == 1 && scn.geometry.bs_antennas == 1 {
        Metric::ReceivedPower
    } else {
        Metric::TransmitPower
    };
    Ok(ExperimentSpec {
        id: format!("custom-{layout_name}"),
        scenario: scn,
        layout,
        protocol: Protocol::TrainingRandom,
        periods: Periods::NPlusOne,
        sweep: Sweep {
            var: SweepVar::N,
            values: vec![n as f64],
        },
        metric,
        tx_power_mw: 1.0,
        noiseless: false,
        trials: 100,
        master_seed: 42,
        opts: SolveOptions::default(),
    })
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies this file on top of its preset (or a bare layout).
    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        let sc = &self.scenario;
        let mut spec = match &self.preset {
            Some(id) => {
                if sc.layout.is_some() {
                    return Err(cfg_err(
                        "`scenario.layout` cannot be combined with a preset",
                    ));
                }
                preset(id)?
            }
            None => base_spec(sc)?,
        };
        if let Some(p) = &self.protocol {
            spec.protocol = p.parse()?;
        }
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(s) = self.seed {
            spec.master_seed = s;
        }
        if let Some(b) = self.noiseless {
            spec.noiseless = b;
        }
        if let Some(m) = &self.metric {
            spec.metric = match m.as_str() {
                "transmit" => Metric::TransmitPower,
                "received" => Metric::ReceivedPower,
                other => return Err(cfg_err(format!("unknown metric {other:?}"))),
            };
        }
        if let Some(p) = &self.tx_power {
            spec.tx_power_mw = p.linear()?;
        }
        if let Some(p) = &self.periods {
            spec.periods = match p {
                toml::Value::Integer(q) if *q >= 1 => Periods::Fixed(*q as usize),
                toml::Value::String(s) if s == "N+1" => Periods::NPlusOne,
                other => {
                    return Err(cfg_err(format!(
                        "periods must be a positive count or \"N+1\", got {other}"
                    )))
                }
            };
        }
        if let Some(sw) = &self.sweep {
            spec.sweep = Sweep {
                var: sw.var.parse()?,
                values: sw.values.clone(),
            };
        }

        let s = &mut spec.scenario;
        if let Some(m) = sc.bs_antennas {
            s.geometry.bs_antennas = m;
        }
        if let Some(n) = sc.elements {
            (s.geometry.ris_nx, s.geometry.ris_nz) = ris_layout(n);
        }
        if let Some(d) = sc.distance {
            spec.layout = spec.layout.with_distance(d)?;
            s.geometry.user_positions = spec.layout.user_positions();
        }
        if let Some(x) = sc.element_spacing {
            s.geometry.element_spacing = x;
        }
        if let Some(q) = &sc.pilot_power {
            s.pilot_power_mw = q.linear()?;
        }
        if let Some(q) = &sc.noise_bs {
            s.noise_bs_mw = q.linear()?;
        }
        if let Some(q) = &sc.noise_user {
            s.noise_user_mw = q.linear()?;
        }
        if let Some(q) = &sc.sinr_target {
            let g = q.linear()?;
            s.sinr_targets.iter_mut().for_each(|t| *t = g);
        }
        if let Some(t) = sc.tau_co {
            s.tau_co = t;
        }
        if let Some(e) = sc.bs_ris_exponent {
            s.bs_ris.exponent = e;
        }
        if let Some(b) = &sc.bs_ris_beta {
            s.bs_ris.rician_beta = b.linear()?;
        }
        spec.validate()?;
        Ok(spec)
    }
}
