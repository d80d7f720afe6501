//! Pulse-level Monte Carlo of the three-party session.
//!
//! Alice and Bob interfere at node AB, Bob and Charlie at node BC. Bob's
//! pulse is split and both halves carry the same phase. Each node has two
//! threshold detectors behind a balanced beam splitter; one click announces
//! `+` or `-`, zero or two clicks announce `?`.
//!
//! Pulses are processed in fixed blocks of [`BLOCK_PULSES`]. Block `i` draws
//! from a ChaCha8 stream `(seed, i)`, so results do not depend on how many
//! threads run the blocks.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coherent::SignalSign;
use crate::error::{Error, Result};
use crate::keyrate::{holevo_closed, transmittance_from_distance, Announcement};
use crate::linalg::binary_entropy;

pub const BLOCK_PULSES: u64 = 1 << 16;

pub const DEFAULT_Y0: f64 = 2.45e-6;
pub const DEFAULT_DARK_COUNT: f64 = 1e-6;
pub const DEFAULT_REPETITION_RATE: f64 = 1e9;

/// Ordered bit string.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct KeyBits(Vec<bool>);

impl KeyBits {
    pub fn new(bits: Vec<bool>) -> Self {
        KeyBits(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.0
    }

    /// Keeps the first `len` bits.
    pub fn truncated(&self, len: usize) -> KeyBits {
        KeyBits(self.0[..len.min(self.0.len())].to_vec())
    }

    /// Bitwise XOR over the common prefix.
    pub fn xor(&self, other: &KeyBits) -> KeyBits {
        KeyBits(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    /// Positions that differ over the common prefix.
    pub fn mismatches(&self, other: &KeyBits) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    fn extend(&mut self, other: KeyBits) {
        self.0.extend(other.0);
    }
}

impl fmt::Display for KeyBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for KeyBits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Validation(format!("invalid key bit {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(KeyBits)
    }
}

impl Serialize for KeyBits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KeyBits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<Vec<bool>> for KeyBits {
    fn from(bits: Vec<bool>) -> Self {
        KeyBits(bits)
    }
}

/// Threshold detector with background clicks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub y0: f64,
    pub dark_count_prob: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            y0: DEFAULT_Y0,
            dark_count_prob: DEFAULT_DARK_COUNT,
        }
    }
}

impl DetectorModel {
    pub const NOISELESS: DetectorModel = DetectorModel {
        y0: 0.0,
        dark_count_prob: 0.0,
    };

    /// Probability of a click with no light, `1 - (1 - Y0)(1 - p_dark)`.
    pub fn background(&self) -> f64 {
        1.0 - (1.0 - self.y0) * (1.0 - self.dark_count_prob)
    }

    /// `1 - (1 - background) e^{-m}` for mean photon number `m` at the detector.
    pub fn click_probability(&self, m: f64) -> f64 {
        1.0 - (1.0 - self.background()) * (-m).exp()
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [("y0", self.y0), ("dark_count_prob", self.dark_count_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(name, p, "0 <= p <= 1"));
            }
        }
        Ok(())
    }
}

/// Click probabilities of the bright and dark port for one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeDetectors {
    pub bright: f64,
    pub dark: f64,
}

impl NodeDetectors {
    pub fn new(mu_at_node: f64, detector: &DetectorModel) -> Self {
        NodeDetectors {
            bright: detector.click_probability(2.0 * mu_at_node),
            dark: detector.click_probability(0.0),
        }
    }

    /// `(p(+), p(-), p(?))` for the given input phases.
    pub fn distribution(&self, left: SignalSign, right: SignalSign) -> (f64, f64, f64) {
        let (p_plus_port, p_minus_port) = self.port_probabilities(left, right);
        let plus = p_plus_port * (1.0 - p_minus_port);
        let minus = p_minus_port * (1.0 - p_plus_port);
        (plus, minus, 1.0 - plus - minus)
    }

    fn port_probabilities(&self, left: SignalSign, right: SignalSign) -> (f64, f64) {
        if left == right {
            (self.bright, self.dark)
        } else {
            (self.dark, self.bright)
        }
    }

    /// Resolves one round from two uniform draws in `[0, 1)`.
    pub fn detect(&self, left: SignalSign, right: SignalSign, u_plus: f64, u_minus: f64) -> Detection {
        let (p_plus_port, p_minus_port) = self.port_probabilities(left, right);
        match (u_plus < p_plus_port, u_minus < p_minus_port) {
            (true, false) => Detection::Single(Announcement::Plus),
            (false, true) => Detection::Single(Announcement::Minus),
            (true, true) => Detection::Double,
            (false, false) => Detection::None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detection {
    None,
    Single(Announcement),
    Double,
}

impl Detection {
    pub fn announcement(self) -> Announcement {
        match self {
            Detection::Single(a) => a,
            _ => Announcement::Inconclusive,
        }
    }
}

/// Ideal-visibility interference of two calibrated pulses of mean photon
/// number `mu_at_node` each. `u_plus` and `u_minus` are the detectors' draws.
pub fn interfere_and_detect(
    phase_left: SignalSign,
    phase_right: SignalSign,
    mu_at_node: f64,
    detector: &DetectorModel,
    u_plus: f64,
    u_minus: f64,
) -> Announcement {
    NodeDetectors::new(mu_at_node, detector)
        .detect(phase_left, phase_right, u_plus, u_minus)
        .announcement()
}

/// Source intensity that arrives at the node with `target_mu_at_node` after an
/// arm of transmittance `arm_transmittance`.
pub fn calibrate_source_intensity(target_mu_at_node: f64, arm_transmittance: f64) -> Result<f64> {
    if !(target_mu_at_node >= 0.0 && target_mu_at_node.is_finite()) {
        return Err(Error::domain("target_mu_at_node", target_mu_at_node, "finite target >= 0"));
    }
    if !(arm_transmittance > 0.0 && arm_transmittance <= 1.0) {
        return Err(Error::domain("arm_transmittance", arm_transmittance, "0 < t <= 1"));
    }
    Ok(target_mu_at_node / arm_transmittance)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiftRole {
    /// Inverts its bit on a `-` announcement.
    Flipper,
    Keeper,
}

/// Drops `?` rounds and applies the flip rule. Returns `(mine, partner's)`.
pub fn sift_pair(
    my_bits: &[bool],
    partner_bits: &[bool],
    announcements: &[Announcement],
    role: SiftRole,
) -> Result<(KeyBits, KeyBits)> {
    if my_bits.len() != partner_bits.len() || my_bits.len() != announcements.len() {
        return Err(Error::Validation(format!(
            "sifting inputs differ in length: {} bits, {} partner bits, {} announcements",
            my_bits.len(),
            partner_bits.len(),
            announcements.len()
        )));
    }
    let mut mine = Vec::new();
    let mut theirs = Vec::new();
    for ((&a, &b), &delta) in my_bits.iter().zip(partner_bits).zip(announcements) {
        let flip = match delta {
            Announcement::Inconclusive => continue,
            Announcement::Plus => false,
            Announcement::Minus => true,
        };
        match role {
            SiftRole::Flipper => {
                mine.push(a ^ flip);
                theirs.push(b);
            }
            SiftRole::Keeper => {
                mine.push(a);
                theirs.push(b ^ flip);
            }
        }
    }
    Ok((KeyBits(mine), KeyBits(theirs)))
}

/// Bob's public XOR of his two sifted keys.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairReconciliation {
    pub announcement: KeyBits,
    pub common_ab: KeyBits,
    pub common_bc: KeyBits,
}

impl PairReconciliation {
    /// What Alice recovers for `k_BC` from her own `k_AB`.
    pub fn recover_bc(&self, k_ab: &KeyBits) -> KeyBits {
        self.announcement.xor(&k_ab.truncated(self.announcement.len()))
    }

    /// What Charlie recovers for `k_AB` from his own `k_BC`.
    pub fn recover_ab(&self, k_bc: &KeyBits) -> KeyBits {
        self.announcement.xor(&k_bc.truncated(self.announcement.len()))
    }
}

/// Trims the longer key's trailing bits and announces `k_AB ⊕ k_BC`.
pub fn reconcile_pair(k_ab: &KeyBits, k_bc: &KeyBits) -> PairReconciliation {
    let n = k_ab.len().min(k_bc.len());
    let common_ab = k_ab.truncated(n);
    let common_bc = k_bc.truncated(n);
    PairReconciliation {
        announcement: common_ab.xor(&common_bc),
        common_ab,
        common_bc,
    }
}

fn default_y0() -> f64 {
    DEFAULT_Y0
}
fn default_dark() -> f64 {
    DEFAULT_DARK_COUNT
}
fn default_rate() -> f64 {
    DEFAULT_REPETITION_RATE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub n_pulses: u64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_c: f64,
    /// `[l_A, l_B, l_B', l_C]` in km.
    pub arm_lengths_km: [f64; 4],
    #[serde(default = "default_y0")]
    pub y0: f64,
    #[serde(default = "default_dark")]
    pub dark_count_prob: f64,
    #[serde(default = "default_rate")]
    pub repetition_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ec_efficiency: f64,
}

impl SessionConfig {
    /// One intensity for all sources and a total length split into four equal arms.
    pub fn symmetric(mu: f64, total_km: f64, n_pulses: u64) -> Self {
        SessionConfig {
            n_pulses,
            mu_a: mu,
            mu_b: mu,
            mu_c: mu,
            arm_lengths_km: [total_km / 4.0; 4],
            y0: DEFAULT_Y0,
            dark_count_prob: DEFAULT_DARK_COUNT,
            repetition_rate: DEFAULT_REPETITION_RATE,
            seed: 0,
            ec_efficiency: 0.0,
        }
    }

    pub fn detector(&self) -> DetectorModel {
        DetectorModel {
            y0: self.y0,
            dark_count_prob: self.dark_count_prob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::Validation("n_pulses must be at least 1".into()));
        }
        for (name, mu) in [("mu_a", self.mu_a), ("mu_b", self.mu_b), ("mu_c", self.mu_c)] {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(Error::domain(name, mu, "finite intensity >= 0"));
            }
        }
        for &l in &self.arm_lengths_km {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::domain("arm_length_km", l, "finite length >= 0"));
            }
        }
        self.detector().validate()?;
        if !(self.repetition_rate > 0.0 && self.repetition_rate.is_finite()) {
            return Err(Error::domain("repetition_rate", self.repetition_rate, "rate > 0 Hz"));
        }
        if !(self.ec_efficiency >= 0.0 && self.ec_efficiency.is_finite()) {
            return Err(Error::domain("ec_efficiency", self.ec_efficiency, "finite f >= 0"));
        }
        Ok(())
    }
}

/// Calibrated operating point of one link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinkCalibration {
    /// `sqrt(mu_left mu_right)`
    pub mu: f64,
    /// End-to-end transmittance, product of the two arms.
    pub eta: f64,
    /// Mean photon number of each pulse arriving at the node, `mu·√η`.
    pub mu_at_node: f64,
    /// Calibrated source intensities of the left and right party.
    pub source_left: f64,
    pub source_right: f64,
}

impl LinkCalibration {
    pub fn new(mu_left: f64, mu_right: f64, km_left: f64, km_right: f64) -> Result<Self> {
        let t_left = transmittance_from_distance(km_left)?;
        let t_right = transmittance_from_distance(km_right)?;
        // equal arrival at the geometric mean of the uncalibrated arrivals
        let target = (mu_left * t_left * mu_right * t_right).sqrt();
        Ok(LinkCalibration {
            mu: (mu_left * mu_right).sqrt(),
            eta: t_left * t_right,
            mu_at_node: target,
            source_left: calibrate_source_intensity(target, t_left)?,
            source_right: calibrate_source_intensity(target, t_right)?,
        })
    }

    /// A link with no light is not run.
    pub fn is_dark(&self) -> bool {
        self.mu == 0.0
    }

    pub fn holevo(&self) -> f64 {
        if self.is_dark() {
            0.0
        } else {
            holevo_closed(self.mu, self.eta)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkStats {
    pub conclusive: u64,
    pub double_clicks: u64,
    pub errors: u64,
    pub qber: f64,
    pub chi: f64,
    pub skr_per_pulse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionResult {
    pub config: SessionConfig,
    pub link_ab: LinkCalibration,
    pub link_bc: LinkCalibration,
    pub alice_ab: KeyBits,
    pub bob_ab: KeyBits,
    pub bob_bc: KeyBits,
    pub charlie_bc: KeyBits,
    pub stats_ab: LinkStats,
    pub stats_bc: LinkStats,
    pub qber_ab: f64,
    pub qber_bc: f64,
    /// Conclusive fraction per pulse of the weaker link.
    pub sifted_rate: f64,
    /// Holevo deduction of the bottleneck link.
    pub chi: f64,
    pub skr_per_pulse: f64,
    pub skr_bps: f64,
}

/// Everything in a [`SessionResult`] except the key material.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionSummary {
    pub config: SessionConfig,
    pub link_ab: LinkCalibration,
    pub link_bc: LinkCalibration,
    pub stats_ab: LinkStats,
    pub stats_bc: LinkStats,
    pub sifted_len_ab: usize,
    pub sifted_len_bc: usize,
    pub qber_ab: f64,
    pub qber_bc: f64,
    pub sifted_rate: f64,
    pub chi: f64,
    pub skr_per_pulse: f64,
    pub skr_bps: f64,
}

impl SessionResult {
    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            config: self.config.clone(),
            link_ab: self.link_ab,
            link_bc: self.link_bc,
            stats_ab: self.stats_ab.clone(),
            stats_bc: self.stats_bc.clone(),
            sifted_len_ab: self.alice_ab.len(),
            sifted_len_bc: self.bob_bc.len(),
            qber_ab: self.qber_ab,
            qber_bc: self.qber_bc,
            sifted_rate: self.sifted_rate,
            chi: self.chi,
            skr_per_pulse: self.skr_per_pulse,
            skr_bps: self.skr_bps,
        }
    }

    /// Runs Bob's announcement and returns each party's final key `K = k_AB`.
    pub fn agree(&self) -> ThreePartyKeys {
        let rec = reconcile_pair(&self.bob_ab, &self.bob_bc);
        let n = rec.announcement.len();
        ThreePartyKeys {
            alice: self.alice_ab.truncated(n),
            bob: rec.common_ab.clone(),
            charlie: rec.recover_ab(&self.charlie_bc),
            announcement: rec.announcement,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ThreePartyKeys {
    pub alice: KeyBits,
    pub bob: KeyBits,
    pub charlie: KeyBits,
    pub announcement: KeyBits,
}

impl ThreePartyKeys {
    pub fn all_agree(&self) -> bool {
        self.alice == self.bob && self.bob == self.charlie
    }
}

#[derive(Default)]
struct BlockOutput {
    alice_ab: KeyBits,
    bob_ab: KeyBits,
    bob_bc: KeyBits,
    charlie_bc: KeyBits,
    double_ab: u64,
    double_bc: u64,
}

fn announce(node: &NodeDetectors, dark: bool, left: SignalSign, right: SignalSign, rng: &mut ChaCha8Rng) -> Detection {
    let (u_plus, u_minus): (f64, f64) = (rng.random(), rng.random());
    if dark {
        Detection::None
    } else {
        node.detect(left, right, u_plus, u_minus)
    }
}

fn simulate_block(
    seed: u64,
    block: u64,
    pulses: usize,
    ab: (&NodeDetectors, bool),
    bc: (&NodeDetectors, bool),
) -> Result<BlockOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);

    let mut ka = Vec::with_capacity(pulses);
    let mut kb = Vec::with_capacity(pulses);
    let mut kc = Vec::with_capacity(pulses);
    let mut delta_ab = Vec::with_capacity(pulses);
    let mut delta_bc = Vec::with_capacity(pulses);
    let mut out = BlockOutput::default();

    for _ in 0..pulses {
        let r = rng.next_u64();
        let (a, b, c) = (r & 1 == 1, r & 2 == 2, r & 4 == 4);
        let (sa, sb, sc) = (SignalSign::from_bit(a), SignalSign::from_bit(b), SignalSign::from_bit(c));
        let d1 = announce(ab.0, ab.1, sa, sb, &mut rng);
        let d2 = announce(bc.0, bc.1, sb, sc, &mut rng);
        out.double_ab += (d1 == Detection::Double) as u64;
        out.double_bc += (d2 == Detection::Double) as u64;
        ka.push(a);
        kb.push(b);
        kc.push(c);
        delta_ab.push(d1.announcement());
        delta_bc.push(d2.announcement());
    }

    let (alice, bob) = sift_pair(&ka, &kb, &delta_ab, SiftRole::Flipper)?;
    let (bob2, charlie) = sift_pair(&kb, &kc, &delta_bc, SiftRole::Keeper)?;
    out.alice_ab = alice;
    out.bob_ab = bob;
    out.bob_bc = bob2;
    out.charlie_bc = charlie;
    Ok(out)
}

fn link_stats(
    link: &LinkCalibration,
    mine: &KeyBits,
    theirs: &KeyBits,
    double_clicks: u64,
    n_pulses: u64,
    ec_efficiency: f64,
) -> Result<LinkStats> {
    let conclusive = mine.len() as u64;
    let errors = mine.mismatches(theirs) as u64;
    let qber = if conclusive == 0 { 0.0 } else { errors as f64 / conclusive as f64 };
    let chi = link.holevo();
    let leak = if ec_efficiency == 0.0 { 0.0 } else { ec_efficiency * binary_entropy(qber)? };
    let skr = conclusive as f64 / n_pulses as f64 * (1.0 - chi - leak).max(0.0);
    Ok(LinkStats {
        conclusive,
        double_clicks,
        errors,
        qber,
        chi,
        skr_per_pulse: skr,
    })
}

pub fn run_session(config: &SessionConfig) -> Result<SessionResult> {
    config.validate()?;
    let [la, lb, lb2, lc] = config.arm_lengths_km;
    let link_ab = LinkCalibration::new(config.mu_a, config.mu_b, la, lb)?;
    let link_bc = LinkCalibration::new(config.mu_b, config.mu_c, lb2, lc)?;
    let detector = config.detector();
    let node_ab = NodeDetectors::new(link_ab.mu_at_node, &detector);
    let node_bc = NodeDetectors::new(link_bc.mu_at_node, &detector);

    let n = config.n_pulses;
    let blocks = n.div_ceil(BLOCK_PULSES);
    let outputs = (0..blocks)
        .into_par_iter()
        .map(|i| {
            let pulses = (n - i * BLOCK_PULSES).min(BLOCK_PULSES) as usize;
            simulate_block(
                config.seed,
                i,
                pulses,
                (&node_ab, link_ab.is_dark()),
                (&node_bc, link_bc.is_dark()),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut all = BlockOutput::default();
    for block in outputs {
        all.alice_ab.extend(block.alice_ab);
        all.bob_ab.extend(block.bob_ab);
        all.bob_bc.extend(block.bob_bc);
        all.charlie_bc.extend(block.charlie_bc);
        all.double_ab += block.double_ab;
        all.double_bc += block.double_bc;
    }

    let f = config.ec_efficiency;
    let stats_ab = link_stats(&link_ab, &all.alice_ab, &all.bob_ab, all.double_ab, n, f)?;
    let stats_bc = link_stats(&link_bc, &all.charlie_bc, &all.bob_bc, all.double_bc, n, f)?;
    let bottleneck = if stats_bc.skr_per_pulse < stats_ab.skr_per_pulse { &stats_bc } else { &stats_ab };
    let skr = bottleneck.skr_per_pulse;
    let chi = bottleneck.chi;
    let sifted_rate = stats_ab.conclusive.min(stats_bc.conclusive) as f64 / n as f64;

    Ok(SessionResult {
        config: config.clone(),
        link_ab,
        link_bc,
        qber_ab: stats_ab.qber,
        qber_bc: stats_bc.qber,
        alice_ab: all.alice_ab,
        bob_ab: all.bob_ab,
        bob_bc: all.bob_bc,
        charlie_bc: all.charlie_bc,
        stats_ab,
        stats_bc,
        sifted_rate,
        chi,
        skr_per_pulse: skr,
        skr_bps: skr * config.repetition_rate,
    })
}
