//! Problem instances: user channels, noise, bandwidth, transmit budget and the
//! linear power-consumption model.
//!
//! Everything inside a [`Scenario`] is stored in linear units (watts, hertz).
//! dBm only shows up at the configuration boundary through [`dbm_to_watts`]
//! and [`ScenarioConfig`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while validating a scenario.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("number of transmit antennas must be at least 1")]
    NoAntennas,
    #[error("channel of user {user} has length {len}, expected {nt}")]
    ChannelLength { user: usize, len: usize, nt: usize },
    #[error("channel of user {user} has a non-finite entry")]
    NonFiniteChannel { user: usize },
    #[error("both user channels are zero")]
    ZeroChannels,
    #[error("noise power of user {user} must be finite and strictly positive, got {value}")]
    InvalidNoise { user: usize, value: f64 },
    #[error("bandwidth must be finite and strictly positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("transmit power budget must be finite and strictly positive, got {0}")]
    InvalidBudget(f64),
    #[error("eta must be in (0,1]")]
    InvalidEta(f64),
    #[error("{name} must be finite and nonnegative, got {value}")]
    NegativePower { name: &'static str, value: f64 },
    #[error("cannot parse angle '{0}'")]
    BadAngle(String),
}

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(value_dbm: f64) -> f64 {
    10f64.powf((value_dbm - 30.0) / 10.0)
}

/// Converts a power level in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Builds the two test channels `h1 = [1, ..., 1]` and
/// `h2 = gamma * [1, e^{j theta}, ..., e^{j (nt-1) theta}]`.
///
/// `gamma` sets the gain disparity between the users and `theta` the angle
/// between their channel directions.
pub fn make_channels(gamma: f64, theta: f64, nt: usize) -> [Vec<Complex64>; 2] {
    let h1 = vec![Complex64::new(1.0, 0.0); nt];
    let h2 = (0..nt)
        .map(|i| Complex64::from_polar(gamma, theta * i as f64))
        .collect();
    [h1, h2]
}

/// Parses an angle written either as a plain number of radians (`0.6981`) or
/// symbolically in terms of pi (`pi`, `2pi/9`, `-pi/4`, `2*pi/9`, `0.5pi`).
pub fn parse_angle(text: &str) -> Result<f64, ScenarioError> {
    let bad = || ScenarioError::BadAngle(text.to_string());
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let lower = compact.to_ascii_lowercase();
    if lower.is_empty() {
        return Err(bad());
    }
    if let Ok(v) = lower.parse::<f64>() {
        return if v.is_finite() { Ok(v) } else { Err(bad()) };
    }
    let (numerator, denominator) = match lower.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (lower.as_str(), None),
    };
    let pos = numerator.find("pi").ok_or_else(bad)?;
    if pos + 2 != numerator.len() {
        return Err(bad());
    }
    let coeff = numerator[..pos].trim_end_matches('*');
    let coeff = match coeff {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let denom = match denominator {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None => 1.0,
    };
    if denom == 0.0 || !coeff.is_finite() || !denom.is_finite() {
        return Err(bad());
    }
    Ok(coeff * PI / denom)
}

/// Transmit budget and the linear power-consumption model of the base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// Transmit power budget (W).
    pub p_t: f64,
    /// Power-amplifier efficiency in (0, 1].
    pub eta: f64,
    /// Dynamic power per active RF chain (W).
    pub p_dyn: f64,
    /// Static power (W).
    pub p_sta: f64,
}

impl Default for PowerModel {
    /// 40 dBm budget, 30 dBm static power, eta = 0.35 and 30 dBm per RF chain.
    fn default() -> Self {
        Self {
            p_t: dbm_to_watts(40.0),
            eta: 0.35,
            p_dyn: dbm_to_watts(30.0),
            p_sta: dbm_to_watts(30.0),
        }
    }
}

impl PowerModel {
    pub fn from_dbm(p_t_dbm: f64, p_dyn_dbm: f64, p_sta_dbm: f64, eta: f64) -> Self {
        Self {
            p_t: dbm_to_watts(p_t_dbm),
            eta,
            p_dyn: dbm_to_watts(p_dyn_dbm),
            p_sta: dbm_to_watts(p_sta_dbm),
        }
    }
}

/// One validated two-user problem instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    nt: usize,
    channels: [Vec<Complex64>; 2],
    noise_power: [f64; 2],
    bandwidth: f64,
    power: PowerModel,
}

impl Scenario {
    pub fn new(
        channels: [Vec<Complex64>; 2],
        noise_power: [f64; 2],
        bandwidth: f64,
        power: PowerModel,
    ) -> Result<Self, ScenarioError> {
        let nt = channels[0].len();
        if nt == 0 {
            return Err(ScenarioError::NoAntennas);
        }
        for (user, h) in channels.iter().enumerate() {
            if h.len() != nt {
                return Err(ScenarioError::ChannelLength {
                    user: user + 1,
                    len: h.len(),
                    nt,
                });
            }
            if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(ScenarioError::NonFiniteChannel { user: user + 1 });
            }
        }
        if channels
            .iter()
            .all(|h| h.iter().all(|c| c.norm_sqr() == 0.0))
        {
            return Err(ScenarioError::ZeroChannels);
        }
        for (user, &n0) in noise_power.iter().enumerate() {
            if !(n0.is_finite() && n0 > 0.0) {
                return Err(ScenarioError::InvalidNoise {
                    user: user + 1,
                    value: n0,
                });
            }
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(ScenarioError::InvalidBandwidth(bandwidth));
        }
        if !(power.p_t.is_finite() && power.p_t > 0.0) {
            return Err(ScenarioError::InvalidBudget(power.p_t));
        }
        if !(power.eta.is_finite() && power.eta > 0.0 && power.eta <= 1.0) {
            return Err(ScenarioError::InvalidEta(power.eta));
        }
        for (name, value) in [("p_dyn", power.p_dyn), ("p_sta", power.p_sta)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ScenarioError::NegativePower { name, value });
            }
        }
        Ok(Self {
            nt,
            channels,
            noise_power,
            bandwidth,
            power,
        })
    }

    /// The parametric two-user deployment from [`make_channels`] with unit
    /// noise variance and unit bandwidth.
    pub fn two_user(
        gamma: f64,
        theta: f64,
        nt: usize,
        power: PowerModel,
    ) -> Result<Self, ScenarioError> {
        if nt == 0 {
            return Err(ScenarioError::NoAntennas);
        }
        Self::new(make_channels(gamma, theta, nt), [1.0, 1.0], 1.0, power)
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn channel(&self, user: usize) -> &[Complex64] {
        &self.channels[user]
    }

    pub fn channels(&self) -> &[Vec<Complex64>; 2] {
        &self.channels
    }

    /// Noise power `N_0 = W * sigma^2` seen by `user` (0-based).
    pub fn noise(&self, user: usize) -> f64 {
        self.noise_power[user]
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn power_model(&self) -> &PowerModel {
        &self.power
    }

    pub fn p_t(&self) -> f64 {
        self.power.p_t
    }

    pub fn eta(&self) -> f64 {
        self.power.eta
    }

    /// `P_cir = nt * P_dyn + P_sta`.
    pub fn circuit_power(&self) -> f64 {
        self.nt as f64 * self.power.p_dyn + self.power.p_sta
    }

    /// Total consumed power for a given transmit power.
    pub fn total_power(&self, transmit_power: f64) -> f64 {
        transmit_power / self.power.eta + self.circuit_power()
    }

    /// Received signal power `|h_user^H p|^2`.
    pub fn gain(&self, user: usize, p: &[Complex64]) -> f64 {
        inner(&self.channels[user], p).norm_sqr()
    }

    /// Copy of this scenario with a different power model; channels are kept.
    pub fn with_power_model(&self, power: PowerModel) -> Result<Self, ScenarioError> {
        Self::new(
            self.channels.clone(),
            self.noise_power,
            self.bandwidth,
            power,
        )
    }
}

/// `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// An angle that may be given numerically or as text such as `"2pi/9"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Radians(f64),
    Text(String),
}

impl AngleSpec {
    pub fn radians(&self) -> Result<f64, ScenarioError> {
        match self {
            AngleSpec::Radians(v) if v.is_finite() => Ok(*v),
            AngleSpec::Radians(v) => Err(ScenarioError::BadAngle(v.to_string())),
            AngleSpec::Text(s) => parse_angle(s),
        }
    }
}

/// JSON configuration of a scenario. Missing keys take the default
/// deployment values (4 antennas, 40 dBm budget, 30 dBm static power,
/// eta = 0.35, unit bandwidth and noise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub nt: usize,
    pub gamma: f64,
    pub theta: AngleSpec,
    pub p_t_dbm: f64,
    pub p_dyn_dbm: f64,
    pub p_sta_dbm: f64,
    pub eta: f64,
    pub bandwidth_hz: f64,
    /// Noise power `N_0` per user in watts (already integrated over the band).
    pub noise_power: [f64; 2],
    /// Explicit channels as `[[re, im], ...]` per user; overrides gamma/theta/nt.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<[Vec<[f64; 2]>; 2]>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            nt: 4,
            gamma: 1.0,
            theta: AngleSpec::Radians(2.0 * PI / 9.0),
            p_t_dbm: 40.0,
            p_dyn_dbm: 30.0,
            p_sta_dbm: 30.0,
            eta: 0.35,
            bandwidth_hz: 1.0,
            noise_power: [1.0, 1.0],
            channels: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn power_model(&self) -> PowerModel {
        PowerModel::from_dbm(self.p_t_dbm, self.p_dyn_dbm, self.p_sta_dbm, self.eta)
    }

    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let channels = match &self.channels {
            Some([a, b]) => {
                let conv = |v: &Vec<[f64; 2]>| -> Vec<Complex64> {
                    v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
                };
                [conv(a), conv(b)]
            }
            None => {
                if self.nt == 0 {
                    return Err(ScenarioError::NoAntennas);
                }
                make_channels(self.gamma, self.theta.radians()?, self.nt)
            }
        };
        Scenario::new(
            channels,
            self.noise_power,
            self.bandwidth_hz,
            self.power_model(),
        )
    }
}
