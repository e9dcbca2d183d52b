//! Forward model: SINRs, achievable rates, weighted sum rate and energy
//! efficiency of SDMA, NOMA and RSMA for a given set of precoders.
//!
//! Each scheme is evaluated with its own formulas. The conversions that embed
//! an SDMA or NOMA operating point into RSMA ([`sdma_as_rsma`],
//! [`noma_as_rsma`]) are exposed separately so the superset relation can be
//! checked rather than assumed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::scenario::{norm_sqr, Scenario};

/// Relative slack on the transmit power budget.
pub const POWER_TOLERANCE: f64 = 1e-8;
/// Absolute slack (bit/s) when checking a common-rate split.
pub const SPLIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("transmit power {power} exceeds the budget {budget}")]
    PowerBudgetViolation { power: f64, budget: f64 },
    #[error("common-rate split {requested} exceeds the decodable common rate {available}")]
    SplitExceedsCommonRate { requested: f64, available: f64 },
    #[error("common-rate shares must be finite and nonnegative, got ({0}, {1})")]
    NegativeSplit(f64, f64),
    #[error("precoder has length {len}, expected {nt}")]
    DimensionMismatch { len: usize, nt: usize },
    #[error("precoder set has a common stream but the scheme has none")]
    UnexpectedCommonStream,
}

/// Decoding order of the NOMA receivers: which user's message is decoded first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodingOrder {
    /// User 1 is decoded first, i.e. user 2 runs SIC.
    OneFirst,
    /// User 2 is decoded first, i.e. user 1 runs SIC.
    TwoFirst,
}

impl DecodingOrder {
    pub const BOTH: [DecodingOrder; 2] = [DecodingOrder::OneFirst, DecodingOrder::TwoFirst];

    /// 0-based index of the user decoded first.
    pub fn first(self) -> usize {
        match self {
            DecodingOrder::OneFirst => 0,
            DecodingOrder::TwoFirst => 1,
        }
    }

    /// 0-based index of the user decoded second.
    pub fn second(self) -> usize {
        1 - self.first()
    }

    /// The order as 1-based user labels, e.g. `[1, 2]`.
    pub fn labels(self) -> [u8; 2] {
        [self.first() as u8 + 1, self.second() as u8 + 1]
    }
}

impl Serialize for DecodingOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.labels().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DecodingOrder {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match <[u8; 2]>::deserialize(deserializer)? {
            [1, 2] => Ok(DecodingOrder::OneFirst),
            [2, 1] => Ok(DecodingOrder::TwoFirst),
            other => Err(serde::de::Error::custom(format!(
                "decoding order must be [1,2] or [2,1], got {other:?}"
            ))),
        }
    }
}

/// A multiple-access scheme, with the NOMA decoding order made explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sdma,
    Noma(DecodingOrder),
    Rsma,
}

/// A scheme family as selected by a user; NOMA leaves the order open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Rsma,
    Sdma,
    Noma,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Rsma, SchemeKind::Sdma, SchemeKind::Noma];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Rsma => "rsma",
            SchemeKind::Sdma => "sdma",
            SchemeKind::Noma => "noma",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rsma" | "rs" => Ok(SchemeKind::Rsma),
            "sdma" | "mu-lp" | "mulp" => Ok(SchemeKind::Sdma),
            "noma" | "sc-sic" | "scsic" => Ok(SchemeKind::Noma),
            other => Err(format!(
                "unknown scheme '{other}' (expected rsma, sdma or noma)"
            )),
        }
    }
}

impl Scheme {
    pub fn kind(self) -> SchemeKind {
        match self {
            Scheme::Sdma => SchemeKind::Sdma,
            Scheme::Noma(_) => SchemeKind::Noma,
            Scheme::Rsma => SchemeKind::Rsma,
        }
    }

    pub fn order(self) -> Option<DecodingOrder> {
        match self {
            Scheme::Noma(order) => Some(order),
            _ => None,
        }
    }
}

/// Beamforming vectors: an optional common-stream precoder and one private
/// precoder per user. All streams have unit power, so the transmit power is
/// the sum of squared precoder norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecoderSet {
    pub common: Option<Vec<Complex64>>,
    pub private: [Vec<Complex64>; 2],
}

impl PrecoderSet {
    pub fn new(common: Option<Vec<Complex64>>, private: [Vec<Complex64>; 2]) -> Self {
        Self { common, private }
    }

    pub fn zeros(nt: usize, with_common: bool) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); nt];
        Self {
            common: with_common.then(|| z.clone()),
            private: [z.clone(), z],
        }
    }

    /// `tr(P P^H)`.
    pub fn transmit_power(&self) -> f64 {
        self.common.as_deref().map_or(0.0, norm_sqr)
            + norm_sqr(&self.private[0])
            + norm_sqr(&self.private[1])
    }

    fn common_or_zero(&self) -> &[Complex64] {
        self.common.as_deref().unwrap_or(&[])
    }

    fn has_common_power(&self) -> bool {
        self.common.as_deref().is_some_and(|c| norm_sqr(c) > 0.0)
    }

    fn check_dims(&self, nt: usize) -> Result<(), SchemeError> {
        let vecs = self.private.iter().chain(self.common.iter());
        for v in vecs {
            if v.len() != nt {
                return Err(SchemeError::DimensionMismatch { len: v.len(), nt });
            }
        }
        Ok(())
    }

    /// Checks `tr(P P^H) <= P_t` up to [`POWER_TOLERANCE`].
    pub fn check_power(&self, scenario: &Scenario) -> Result<f64, SchemeError> {
        let power = self.transmit_power();
        if !power.is_finite() || power > scenario.p_t() * (1.0 + POWER_TOLERANCE) {
            return Err(SchemeError::PowerBudgetViolation {
                power,
                budget: scenario.p_t(),
            });
        }
        Ok(power)
    }

    /// Multiplies every precoder by the same real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |v: &Vec<Complex64>| v.iter().map(|c| c * factor).collect::<Vec<_>>();
        Self {
            common: self.common.as_ref().map(scale),
            private: [scale(&self.private[0]), scale(&self.private[1])],
        }
    }
}

/// Shares `(C_1, C_2)` of the common rate allocated to each user.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CommonRateSplit {
    pub c1: f64,
    pub c2: f64,
}

impl CommonRateSplit {
    pub fn new(c1: f64, c2: f64) -> Self {
        Self { c1, c2 }
    }

    pub fn get(&self, user: usize) -> f64 {
        [self.c1, self.c2][user]
    }

    pub fn total(&self) -> f64 {
        self.c1 + self.c2
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.c1, self.c2]
    }
}

/// Nonnegative rate weights `(u_1, u_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub u1: f64,
    pub u2: f64,
}

impl WeightVector {
    pub fn new(u1: f64, u2: f64) -> Option<Self> {
        let ok = u1.is_finite() && u2.is_finite() && u1 >= 0.0 && u2 >= 0.0 && u1 + u2 > 0.0;
        ok.then_some(Self { u1, u2 })
    }

    pub fn equal() -> Self {
        Self { u1: 1.0, u2: 1.0 }
    }

    pub fn get(&self, user: usize) -> f64 {
        [self.u1, self.u2][user]
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.u1, self.u2]
    }

    pub fn max(&self) -> f64 {
        self.u1.max(self.u2)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            u1: self.u1 * factor,
            u2: self.u2 * factor,
        }
    }

    /// Weighted sum `u_1 x_1 + u_2 x_2`.
    pub fn dot(&self, x: [f64; 2]) -> f64 {
        self.u1 * x[0] + self.u2 * x[1]
    }
}

/// Rates, weighted sum rate and energy efficiency of one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Achievable rate of user 1 (bit/s), including its common share for RSMA.
    pub rate_user1: f64,
    pub rate_user2: f64,
    /// Decodable common rate `R_c` (RSMA and NOMA-as-RSMA only).
    pub common_rate: Option<f64>,
    pub wsr: f64,
    /// Weighted energy efficiency (bit/J).
    pub ee: f64,
    /// Transmit power `tr(P P^H)` (W).
    pub power_w: f64,
}

impl RateReport {
    pub fn per_user_rate(&self) -> [f64; 2] {
        [self.rate_user1, self.rate_user2]
    }
}

fn rate(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * (1.0 + sinr).log2()
}

/// SDMA (MU-LP): each user treats the other stream as noise.
pub fn sdma_rates(p: &PrecoderSet, s: &Scenario) -> [f64; 2] {
    let w = s.bandwidth();
    let r = |k: usize| {
        let j = 1 - k;
        let sinr = s.gain(k, &p.private[k]) / (s.gain(k, &p.private[j]) + s.noise(k));
        rate(w, sinr)
    };
    [r(0), r(1)]
}

/// The three NOMA SINRs for a decoding order, in the order
/// `(gamma_first, gamma_second->first, gamma_second)`.
pub fn noma_sinrs(p: &PrecoderSet, order: DecodingOrder, s: &Scenario) -> [f64; 3] {
    let (a, b) = (order.first(), order.second());
    let first = s.gain(a, &p.private[a]) / (s.gain(a, &p.private[b]) + s.noise(a));
    let second_decodes_first = s.gain(b, &p.private[a]) / (s.gain(b, &p.private[b]) + s.noise(b));
    let second = s.gain(b, &p.private[b]) / s.noise(b);
    [first, second_decodes_first, second]
}

/// NOMA (SC-SIC) rates indexed by user. The first-decoded user's rate is
/// limited by what the SIC user can decode.
pub fn noma_rates(p: &PrecoderSet, order: DecodingOrder, s: &Scenario) -> [f64; 2] {
    let w = s.bandwidth();
    let [g1, g21, g2] = noma_sinrs(p, order, s);
    let mut out = [0.0; 2];
    out[order.first()] = rate(w, g1).min(rate(w, g21));
    out[order.second()] = rate(w, g2);
    out
}

/// Rates of an RSMA operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsmaRates {
    /// `C_k + R_k` per user.
    pub per_user: [f64; 2],
    /// Private rates `R_k`.
    pub private: [f64; 2],
    /// Common rate decodable at each user, `R_{c,k}`.
    pub common_at_user: [f64; 2],
    /// `R_c = min_k R_{c,k}`.
    pub common_rate: f64,
}

/// Common-stream rate achievable at each user; zero without a common stream.
pub fn rsma_common_rates(p: &PrecoderSet, s: &Scenario) -> [f64; 2] {
    let w = s.bandwidth();
    let pc = p.common_or_zero();
    let r = |k: usize| {
        if pc.is_empty() {
            return 0.0;
        }
        let interference = s.gain(k, &p.private[0]) + s.gain(k, &p.private[1]);
        rate(w, s.gain(k, pc) / (interference + s.noise(k)))
    };
    [r(0), r(1)]
}

/// RSMA rates for precoders and a split of the common rate. Fails when the
/// split is not decodable by both users.
pub fn rsma_rates(
    p: &PrecoderSet,
    c: &CommonRateSplit,
    s: &Scenario,
) -> Result<RsmaRates, SchemeError> {
    if !(c.c1.is_finite() && c.c2.is_finite() && c.c1 >= 0.0 && c.c2 >= 0.0) {
        return Err(SchemeError::NegativeSplit(c.c1, c.c2));
    }
    let common_at_user = rsma_common_rates(p, s);
    let common_rate = common_at_user[0].min(common_at_user[1]);
    if c.total() > common_rate + SPLIT_TOLERANCE {
        return Err(SchemeError::SplitExceedsCommonRate {
            requested: c.total(),
            available: common_rate,
        });
    }
    // after SIC of the common stream the private SINRs are the SDMA ones
    let private = sdma_rates(p, s);
    Ok(RsmaRates {
        per_user: [c.c1 + private[0], c.c2 + private[1]],
        private,
        common_at_user,
        common_rate,
    })
}

/// Per-user rates and common rate of an operating point under `scheme`.
fn scheme_rates(
    scheme: Scheme,
    p: &PrecoderSet,
    split: Option<&CommonRateSplit>,
    s: &Scenario,
) -> Result<([f64; 2], Option<f64>), SchemeError> {
    p.check_dims(s.nt())?;
    match scheme {
        Scheme::Sdma | Scheme::Noma(_) if p.has_common_power() => {
            Err(SchemeError::UnexpectedCommonStream)
        }
        Scheme::Sdma => Ok((sdma_rates(p, s), None)),
        Scheme::Noma(order) => Ok((noma_rates(p, order, s), None)),
        Scheme::Rsma => {
            let split = split.copied().unwrap_or_default();
            let r = rsma_rates(p, &split, s)?;
            Ok((r.per_user, Some(r.common_rate)))
        }
    }
}

/// Full report for an operating point. `split` is only read for RSMA; `None`
/// there means a zero split.
pub fn evaluate(
    scheme: Scheme,
    p: &PrecoderSet,
    split: Option<&CommonRateSplit>,
    weights: &WeightVector,
    s: &Scenario,
) -> Result<RateReport, SchemeError> {
    let power = p.check_power(s)?;
    let (per_user, common_rate) = scheme_rates(scheme, p, split, s)?;
    let wsr = weights.dot(per_user);
    Ok(RateReport {
        rate_user1: per_user[0],
        rate_user2: per_user[1],
        common_rate,
        wsr,
        ee: wsr / s.total_power(power),
        power_w: power,
    })
}

/// Weighted energy efficiency `sum_k u_k R_k / (tr(P P^H)/eta + P_cir)`.
pub fn evaluate_ee(
    scheme: Scheme,
    p: &PrecoderSet,
    split: Option<&CommonRateSplit>,
    weights: &WeightVector,
    s: &Scenario,
) -> Result<f64, SchemeError> {
    evaluate(scheme, p, split, weights, s).map(|r| r.ee)
}

/// Individual energy efficiencies `(EE_1, EE_2)`: each user's rate over the
/// total consumed power.
pub fn individual_ee(
    scheme: Scheme,
    p: &PrecoderSet,
    split: Option<&CommonRateSplit>,
    s: &Scenario,
) -> Result<[f64; 2], SchemeError> {
    let power = p.check_power(s)?;
    let (per_user, _) = scheme_rates(scheme, p, split, s)?;
    let total = s.total_power(power);
    Ok([per_user[0] / total, per_user[1] / total])
}

/// Embeds SDMA precoders into RSMA: zero common stream, zero split.
pub fn sdma_as_rsma(p: &PrecoderSet) -> (PrecoderSet, CommonRateSplit) {
    let nt = p.private[0].len();
    let rs = PrecoderSet {
        common: Some(vec![Complex64::new(0.0, 0.0); nt]),
        private: p.private.clone(),
    };
    (rs, CommonRateSplit::default())
}

/// Embeds a NOMA point into RSMA: the first-decoded user's stream becomes the
/// common stream and that user takes the whole NOMA rate as its common share.
pub fn noma_as_rsma(
    p: &PrecoderSet,
    order: DecodingOrder,
    s: &Scenario,
) -> (PrecoderSet, CommonRateSplit) {
    let (a, b) = (order.first(), order.second());
    let nt = p.private[0].len();
    let rates = noma_rates(p, order, s);
    let mut private = [
        vec![Complex64::new(0.0, 0.0); nt],
        vec![Complex64::new(0.0, 0.0); nt],
    ];
    private[b] = p.private[b].clone();
    let mut shares = [0.0; 2];
    shares[a] = rates[a];
    (
        PrecoderSet {
            common: Some(p.private[a].clone()),
            private,
        },
        CommonRateSplit::new(shares[0], shares[1]),
    )
}

/// Inverse of [`noma_as_rsma`] for the precoders: the common stream is handed
/// back to the first-decoded user.
pub fn rsma_to_noma_precoders(p: &PrecoderSet, order: DecodingOrder) -> PrecoderSet {
    let nt = p.private[0].len();
    let mut private = p.private.clone();
    private[order.first()] = p
        .common
        .clone()
        .unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); nt]);
    PrecoderSet {
        common: None,
        private,
    }
}
