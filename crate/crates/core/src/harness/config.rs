//! Experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::units::{Decibels, Frequency, Length, Power};
use crate::agent::{config_hash, AgentConfig};
use crate::channel::{cost231_pathloss_db, Link, Terrain};
use crate::env::{ActionSpace, EnvParams, OUTAGE_SINR_DB, PREAMBLE_SAMPLES};
use crate::jamming::{CorrelationSchedule, JammerModel, ScheduleShape};
use crate::numerics::db_to_linear;
use crate::policies::HeuristicConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Frames per evaluation run.
    pub frames: usize,
    /// Training iterations.
    pub iterations: u64,
    pub system: SystemConfig,
    pub jamming: JammingConfig,
    pub protocol: ProtocolConfig,
    pub agent: AgentConfig,
    pub heuristic: HeuristicSection,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
    pub switch: SwitchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub users: usize,
    pub rx_antennas: usize,
    pub tx_antennas: usize,
    pub streams: usize,
    pub paths: usize,
    pub sinusoids: usize,
    pub carrier: Frequency,
    pub sample_rate: Frequency,
    pub doppler: Frequency,
    pub transmit_power: Power,
    pub noise_power: Power,
    pub noise_figure: Decibels,
    pub bs_height: Length,
    pub ue_height: Length,
    pub jammer_height: Length,
    pub bs_distance: Length,
    pub jammer_distance: Length,
    pub terrain: Terrain,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            users: 4,
            rx_antennas: 8,
            tx_antennas: 12,
            streams: 3,
            paths: 8,
            sinusoids: 16,
            carrier: Frequency::new(447e6),
            sample_rate: Frequency::new(400e3),
            doppler: Frequency::new(8.28),
            transmit_power: Power::from_dbm(44.0),
            noise_power: Power::from_dbm(-120.9),
            noise_figure: Decibels::new(7.0),
            bs_height: Length::new(50.0),
            ue_height: Length::new(2.0),
            jammer_height: Length::new(2.0),
            bs_distance: Length::new(100.0),
            jammer_distance: Length::new(100.0),
            terrain: Terrain::Suburban,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JammingConfig {
    pub jammers: usize,
    /// Transmit power of each jammer.
    pub power: Power,
    pub schedule: ScheduleShape,
    /// Schedule period in samples.
    pub period: u64,
    pub rho_max: f64,
    pub rho_min: f64,
}

impl Default for JammingConfig {
    fn default() -> Self {
        JammingConfig {
            jammers: 2,
            power: Power::from_dbm(30.0),
            schedule: ScheduleShape::SawtoothDown,
            period: 5000,
            rho_max: 1.0,
            rho_min: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub estimation: Vec<usize>,
    pub data: Vec<usize>,
    pub preamble: usize,
    pub outage_threshold: Decibels,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            estimation: vec![10, 20, 30, 40],
            data: vec![200, 250, 300, 350],
            preamble: PREAMBLE_SAMPLES,
            outage_threshold: Decibels::new(OUTAGE_SINR_DB),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicSection {
    pub threshold: Decibels,
    pub monitor_samples: usize,
}

impl Default for HeuristicSection {
    fn default() -> Self {
        let h = HeuristicConfig::default();
        HeuristicSection {
            threshold: Decibels::new(h.threshold_db),
            monitor_samples: h.monitor_samples,
        }
    }
}

impl HeuristicSection {
    pub fn to_config(&self) -> HeuristicConfig {
        HeuristicConfig {
            threshold_db: self.threshold.db,
            monitor_samples: self.monitor_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub checkpoint_every: u64,
    pub rolling_window: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            checkpoint_every: 1000,
            rolling_window: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub jamming_powers: Vec<Power>,
    pub policies: Vec<PolicySpec>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            jamming_powers: [10.0, 15.0, 20.0, 25.0, 30.0, 35.0]
                .map(Power::from_dbm)
                .to_vec(),
            policies: vec![
                PolicySpec::UpperBound,
                PolicySpec::FixedAverage,
                PolicySpec::Heuristic,
                PolicySpec::Learned,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchConfig {
    /// Iteration at which the schedule direction reverses.
    pub at_iteration: u64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            at_iteration: 20_000,
        }
    }
}

/// Policy selector used on the command line and in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySpec {
    UpperBound,
    /// A single fixed action, by one-based number.
    Fixed(usize),
    /// Every fixed action in turn, averaged.
    FixedAverage,
    Heuristic,
    Learned,
}

impl std::str::FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "upper-bound" => Ok(PolicySpec::UpperBound),
            "fixed" | "fixed-average" => Ok(PolicySpec::FixedAverage),
            "heuristic" => Ok(PolicySpec::Heuristic),
            "learned" => Ok(PolicySpec::Learned),
            _ => match s.strip_prefix("fixed:").map(str::parse::<usize>) {
                Some(Ok(a)) => Ok(PolicySpec::Fixed(a)),
                _ => Err(format!(
                    "unknown policy {s:?}; expected upper-bound, fixed, fixed:<action>, heuristic or learned"
                )),
            },
        }
    }
}

impl std::fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicySpec::UpperBound => write!(f, "upper-bound"),
            PolicySpec::Fixed(a) => write!(f, "fixed:{a}"),
            PolicySpec::FixedAverage => write!(f, "fixed"),
            PolicySpec::Heuristic => write!(f, "heuristic"),
            PolicySpec::Learned => write!(f, "learned"),
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            frames: 2000,
            iterations: 20_000,
            system: SystemConfig::default(),
            jamming: JammingConfig::default(),
            protocol: ProtocolConfig::default(),
            agent: AgentConfig::default(),
            heuristic: HeuristicSection::default(),
            output: OutputConfig::default(),
            sweep: SweepConfig::default(),
            switch: SwitchConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::config("<document>", e.message()))?;
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().message().to_owned())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        let positive = |path: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(path, format!("must be positive, got {v}")))
            }
        };
        if s.users == 0 {
            return Err(Error::config("system.users", "must be at least 1"));
        }
        if s.streams == 0 || s.tx_antennas < s.streams {
            return Err(Error::config(
                "system.streams",
                "need 1 <= streams <= tx_antennas",
            ));
        }
        if s.rx_antennas < self.jamming.jammers + s.streams {
            return Err(Error::config(
                "system.rx_antennas",
                "must be at least jammers + streams",
            ));
        }
        if s.paths == 0 || s.sinusoids == 0 {
            return Err(Error::config(
                "system.paths",
                "paths and sinusoids must be positive",
            ));
        }
        positive("system.sample_rate", s.sample_rate.hz)?;
        positive("system.carrier", s.carrier.hz)?;
        positive("system.transmit_power", s.transmit_power.watts)?;
        positive("system.noise_power", s.noise_power.watts)?;
        positive("system.bs_distance", s.bs_distance.metres)?;
        positive("system.jammer_distance", s.jammer_distance.metres)?;
        if !(s.doppler.hz >= 0.0) {
            return Err(Error::config("system.doppler", "must be non-negative"));
        }
        if self.jamming.jammers == 0 {
            return Err(Error::config("jamming.jammers", "must be at least 1"));
        }
        if self.frames == 0 {
            return Err(Error::config("frames", "must be at least 1"));
        }
        self.schedule()
            .map_err(|e| Error::config("jamming", e.to_string()))?;
        ActionSpace::new(self.protocol.estimation.clone(), self.protocol.data.clone())
            .map_err(|e| Error::config("protocol", e.to_string()))?;
        self.agent.validate()?;
        if self.output.rolling_window == 0 {
            return Err(Error::config("output.rolling_window", "must be at least 1"));
        }
        if self.heuristic.monitor_samples == 0 {
            return Err(Error::config(
                "heuristic.monitor_samples",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<CorrelationSchedule> {
        let j = &self.jamming;
        CorrelationSchedule::new(j.schedule.clone(), j.period, j.rho_max, j.rho_min)
    }

    /// Receiver noise variance including the noise figure.
    pub fn noise_var(&self) -> f64 {
        self.system.noise_power.watts * db_to_linear(self.system.noise_figure.db)
    }

    pub fn bs_pathloss_db(&self) -> Result<f64> {
        let s = &self.system;
        cost231_pathloss_db(
            &Link {
                carrier_mhz: s.carrier.hz / 1e6,
                tx_height_m: s.bs_height.metres,
                rx_height_m: s.ue_height.metres,
                distance_m: s.bs_distance.metres,
            },
            s.terrain,
        )
    }

    pub fn jammer_pathloss_db(&self) -> Result<f64> {
        let s = &self.system;
        cost231_pathloss_db(
            &Link {
                carrier_mhz: s.carrier.hz / 1e6,
                tx_height_m: s.jammer_height.metres,
                rx_height_m: s.ue_height.metres,
                distance_m: s.jammer_distance.metres,
            },
            s.terrain,
        )
    }

    pub fn env_params(&self) -> Result<EnvParams> {
        let s = &self.system;
        let nj = self.jamming.jammers;
        let eta = db_to_linear(self.bs_pathloss_db()?);
        let eta_j = db_to_linear(self.jammer_pathloss_db()?);
        Ok(EnvParams {
            n_users: s.users,
            n_rx: s.rx_antennas,
            n_tx: s.tx_antennas,
            n_streams: s.streams,
            n_paths: s.paths,
            n_sinusoids: s.sinusoids,
            doppler_hz: s.doppler.hz,
            sample_rate_hz: s.sample_rate.hz,
            p_t: s.transmit_power.watts,
            noise_var: self.noise_var(),
            eta: vec![eta; s.users],
            jammer_eta: vec![vec![eta_j; nj]; s.users],
            jammers: JammerModel::new(vec![self.jamming.power.watts; nj], self.schedule()?)?,
            actions: ActionSpace::new(
                self.protocol.estimation.clone(),
                self.protocol.data.clone(),
            )?,
            preamble_samples: self.protocol.preamble,
            outage_db: self.protocol.outage_threshold.db,
        })
    }

    /// Identifies the configuration a trained network belongs to: anything
    /// that changes the network's inputs, outputs or architecture.
    pub fn network_hash(&self) -> [u8; 32] {
        let a = &self.agent;
        let description = format!(
            "users={} jammers={} actions={:?}x{:?} history={} cells={} projection={} value={} advantage={}",
            self.system.users,
            self.jamming.jammers,
            self.protocol.estimation,
            self.protocol.data,
            a.history,
            a.cells.unwrap_or(a.history),
            a.projection,
            a.value_hidden,
            a.advantage_hidden,
        );
        config_hash(&description)
    }
}
