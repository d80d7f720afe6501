//! Collective-attack key rates in the loss-only channel.
//!
//! The pipeline is: loss POVM `{F+, F-, F?}` on the two-mode subspace, Born
//! probabilities of each announcement given the sign pair, Eve's post
//! measurement states `√F^δ|φ_k,φ_l> / norm`, their mixtures, Holevo
//! information, and finally the Devetak–Winter rate per conclusive round.
//! The closed forms (`*_closed`) are kept alongside as an independent route.
//!
//! `eta` is always the end-to-end transmittance of one link
//! (party -> node -> party); each arm of a symmetric link contributes `√η`.

use std::fmt;

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent::{basis_coeffs, check_mu, pairs_with_parity, real_matrix, CoherentBasisCoeffs, SignalSign};
use crate::error::{Error, Result};
use crate::linalg::{binary_entropy, outer, von_neumann_entropy, HermitianOperator, ModeVector};

/// Born probabilities at or below this are treated as impossible branches.
pub const IMPOSSIBLE_BRANCH_TOL: f64 = 1e-15;

/// Fibre attenuation in dB/km.
pub const FIBRE_LOSS_DB_PER_KM: f64 = 0.2;

/// Public result of one interference round at a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Announcement {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "?")]
    Inconclusive,
}

impl Announcement {
    pub const ALL: [Announcement; 3] = [Announcement::Plus, Announcement::Minus, Announcement::Inconclusive];
    pub const CONCLUSIVE: [Announcement; 2] = [Announcement::Plus, Announcement::Minus];

    pub fn symbol(self) -> char {
        match self {
            Announcement::Plus => '+',
            Announcement::Minus => '-',
            Announcement::Inconclusive => '?',
        }
    }

    pub fn is_conclusive(self) -> bool {
        self != Announcement::Inconclusive
    }

    /// The relative phase a conclusive announcement asserts.
    pub fn parity(self) -> Option<SignalSign> {
        match self {
            Announcement::Plus => Some(SignalSign::Plus),
            Announcement::Minus => Some(SignalSign::Minus),
            Announcement::Inconclusive => None,
        }
    }
}

impl fmt::Display for Announcement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Eve's loss-only measurement at a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossPovm {
    pub mu: f64,
    pub eta: f64,
    /// `e^{-√η μ}`
    pub xi: f64,
    /// `e^{-2(1-√η)μ}`
    pub omega: f64,
    pub coeffs: CoherentBasisCoeffs,
    pub f_plus: HermitianOperator,
    pub f_minus: HermitianOperator,
    pub f_inconclusive: HermitianOperator,
}

impl LossPovm {
    pub fn element(&self, delta: Announcement) -> &HermitianOperator {
        match delta {
            Announcement::Plus => &self.f_plus,
            Announcement::Minus => &self.f_minus,
            Announcement::Inconclusive => &self.f_inconclusive,
        }
    }

    pub fn sum(&self) -> HermitianOperator {
        self.f_plus + self.f_minus + self.f_inconclusive
    }

    fn signal(&self, sa: SignalSign, sb: SignalSign) -> ModeVector {
        self.coeffs.signal(sa, sb)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain("eta", eta, "0 < eta <= 1"))
    }
}

/// `1 - e^{-x}` without cancellation.
fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

pub fn loss_povm(mu: f64, eta: f64) -> Result<LossPovm> {
    check_mu(mu)?;
    if mu == 0.0 {
        return Err(Error::domain("mu", mu, "mu > 0 for the loss POVM"));
    }
    check_eta(eta)?;

    let coeffs = basis_coeffs(mu)?;
    let root_eta = eta.sqrt();
    let xi = (-root_eta * mu).exp();
    let omega = (-2.0 * (1.0 - root_eta) * mu).exp();
    let xi_sq = xi * xi;

    // ξ²Ω = e^{-2μ}; the differences below go through expm1.
    let one_minus_xi_sq = one_minus_exp_neg(2.0 * root_eta * mu);
    let one_minus_x2o2 = one_minus_exp_neg(4.0 * mu - 2.0 * root_eta * mu);
    let one_plus_x2o2 = 1.0 + (-4.0 * mu + 2.0 * root_eta * mu).exp();
    let one_minus_omega = one_minus_exp_neg(2.0 * (1.0 - root_eta) * mu);
    let one_minus_omega_sq = one_minus_exp_neg(4.0 * (1.0 - root_eta) * mu);

    let c0s = coeffs.c0_sq();
    let c1s = coeffs.c1_sq();
    let c0_4 = c0s * c0s;
    let c1_4 = c1s * c1s;
    let c01 = c0s * c1s;

    let a = one_minus_xi_sq * one_minus_x2o2 / 8.0;
    let b = one_minus_xi_sq * one_plus_x2o2 / 8.0;
    let conclusive = |s: f64| {
        Matrix4::new(
            a / c0_4, s * a / c01, 0.0, 0.0,
            s * a / c01, a / c1_4, 0.0, 0.0,
            0.0, 0.0, b / c01, s * b / c01,
            0.0, 0.0, s * b / c01, b / c01,
        )
    };
    let q = one_minus_omega_sq / (4.0 * c01);
    let inconclusive = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        (1.0 + omega).powi(2) / (4.0 * c0_4),
        one_minus_omega * one_minus_omega / (4.0 * c1_4),
        q,
        q,
    ))
    .scale(xi_sq);

    Ok(LossPovm {
        mu,
        eta,
        xi,
        omega,
        coeffs,
        f_plus: HermitianOperator::try_new(real_matrix(&conclusive(1.0)))?,
        f_minus: HermitianOperator::try_new(real_matrix(&conclusive(-1.0)))?,
        f_inconclusive: HermitianOperator::try_new(real_matrix(&inconclusive))?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnouncementProbabilities {
    pub plus: f64,
    pub minus: f64,
    pub inconclusive: f64,
}

impl AnnouncementProbabilities {
    pub fn get(&self, delta: Announcement) -> f64 {
        match delta {
            Announcement::Plus => self.plus,
            Announcement::Minus => self.minus,
            Announcement::Inconclusive => self.inconclusive,
        }
    }
}

/// `p(δ | φ_k, φ_l) = <φ_k,φ_l| F^δ |φ_k,φ_l>` for signals of intensity `mu`.
pub fn announcement_probability(
    povm: &LossPovm,
    sa: SignalSign,
    sb: SignalSign,
    mu: f64,
) -> Result<AnnouncementProbabilities> {
    if (mu - povm.mu).abs() > 1e-12 * povm.mu.max(1.0) {
        return Err(Error::Validation(format!(
            "signal intensity {mu} does not match POVM intensity {}",
            povm.mu
        )));
    }
    let v = povm.signal(sa, sb);
    Ok(AnnouncementProbabilities {
        plus: v.expectation(&povm.f_plus),
        minus: v.expectation(&povm.f_minus),
        inconclusive: v.expectation(&povm.f_inconclusive),
    })
}

/// `|Θ^δ_{k,l}> = √F^δ |φ_k,φ_l> / sqrt(p(δ|k,l))`.
pub fn eve_conditional_state(
    povm: &LossPovm,
    delta: Announcement,
    sa: SignalSign,
    sb: SignalSign,
) -> Result<ModeVector> {
    let element = povm.element(delta);
    let v = povm.signal(sa, sb);
    let probability = v.expectation(element);
    if probability <= IMPOSSIBLE_BRANCH_TOL {
        return Err(Error::ImpossibleBranch {
            announcement: delta.symbol(),
            left: sa.symbol(),
            right: sb.symbol(),
            probability,
        });
    }
    let theta = element.psd_sqrt().apply(&v);
    theta
        .normalized()
        .ok_or_else(|| Error::Validation("conditional state vanished".into()))
}

/// Eve's side information after announcement `δ`, split by Alice's bit.
#[derive(Clone, Debug)]
pub struct EveState {
    pub delta: Announcement,
    /// `p(δ)` averaged over uniformly chosen sign pairs.
    pub probability: f64,
    /// `(p(k|δ), ρ^{k,δ})` for `k = 0, 1`; branches with `p(k|δ) = 0` are omitted.
    pub conditional: Vec<(f64, HermitianOperator)>,
    /// `ρ^δ = Σ_k p(k|δ) ρ^{k,δ}`
    pub mixture: HermitianOperator,
}

pub fn eve_state(povm: &LossPovm, delta: Announcement) -> Result<EveState> {
    if !delta.is_conclusive() {
        return Err(Error::Validation(
            "no key is extracted from inconclusive rounds".into(),
        ));
    }
    let element = povm.element(delta);
    let root = element.psd_sqrt();
    let mut joint = 0.0;
    let mut conditional = Vec::with_capacity(2);

    for k in SignalSign::BOTH {
        let mut weight_k = 0.0;
        let mut rho_k = HermitianOperator::zero();
        for l in SignalSign::BOTH {
            let v = povm.signal(k, l);
            let p = 0.25 * v.expectation(element);
            if p <= 0.25 * IMPOSSIBLE_BRANCH_TOL {
                continue;
            }
            let theta = root
                .apply(&v)
                .normalized()
                .ok_or_else(|| Error::Validation("conditional state vanished".into()))?;
            rho_k = rho_k + outer(&theta).scale(p);
            weight_k += p;
        }
        if weight_k > 0.0 {
            conditional.push((weight_k, rho_k.scale(1.0 / weight_k)));
            joint += weight_k;
        }
    }
    if joint <= 0.0 {
        return Err(Error::ImpossibleBranch {
            announcement: delta.symbol(),
            left: '*',
            right: '*',
            probability: joint,
        });
    }
    let mut mixture = HermitianOperator::zero();
    for (w, rho) in conditional.iter_mut() {
        *w /= joint;
        mixture = mixture + rho.scale(*w);
    }
    Ok(EveState {
        delta,
        probability: joint,
        conditional,
        mixture,
    })
}

/// `ρ^δ_E`, trace 1 and rank at most 2.
pub fn eve_mixture(povm: &LossPovm, delta: Announcement) -> Result<HermitianOperator> {
    Ok(eve_state(povm, delta)?.mixture)
}

/// `χ(K:E) = S(ρ^δ) - Σ_k p(k|δ) S(ρ^{k,δ})` in bits.
pub fn holevo(povm: &LossPovm, delta: Announcement) -> Result<f64> {
    if !delta.is_conclusive() {
        return Err(Error::domain("delta", f64::NAN, "delta in {+, -}"));
    }
    let state = eve_state(povm, delta)?;
    let mut chi = von_neumann_entropy(&state.mixture)?;
    for (w, rho) in &state.conditional {
        chi -= w * von_neumann_entropy(rho)?;
    }
    Ok(chi.max(0.0))
}

fn check_delta_ec(delta_ec: f64) -> Result<()> {
    if delta_ec >= 0.0 && delta_ec.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("delta_ec", delta_ec, "finite delta_ec >= 0"))
    }
}

/// `max(1 - δ_EC - χ, 0)` per conclusive round.
pub fn devetak_winter_rate(povm: &LossPovm, delta: Announcement, delta_ec: f64) -> Result<f64> {
    check_delta_ec(delta_ec)?;
    Ok((1.0 - delta_ec - holevo(povm, delta)?).max(0.0))
}

/// `1 - e^{-2√η μ}`: probability of a conclusive announcement.
pub fn sift_probability(mu: f64, eta: f64) -> f64 {
    one_minus_exp_neg(2.0 * eta.sqrt() * mu)
}

/// Overlap `<Θ_{0,0}|Θ_{1,1}> = e^{-4μ(1-√η)} e^{-2μ√η}` of Eve's two states.
pub fn eve_overlap(mu: f64, eta: f64) -> f64 {
    let r = eta.sqrt();
    (-4.0 * mu * (1.0 - r) - 2.0 * mu * r).exp()
}

/// `h((1 - overlap)/2)`
pub fn holevo_closed(mu: f64, eta: f64) -> f64 {
    let z = (0.5 * (1.0 - eve_overlap(mu, eta))).clamp(0.0, 1.0);
    binary_entropy(z).unwrap_or(0.0)
}

pub fn devetak_winter_closed(mu: f64, eta: f64, delta_ec: f64) -> f64 {
    (1.0 - delta_ec - holevo_closed(mu, eta)).max(0.0)
}

/// `(1 - e^{-2√η μ}) (1 - h(...))` for one link.
pub fn link_rate_closed(mu: f64, eta: f64, delta_ec: f64) -> f64 {
    sift_probability(mu, eta) * devetak_winter_closed(mu, eta, delta_ec)
}

/// `η = 10^{-0.2 L / 10}`.
pub fn transmittance_from_distance(km: f64) -> Result<f64> {
    if !(km >= 0.0 && km.is_finite()) {
        return Err(Error::domain("distance_km", km, "finite distance >= 0"));
    }
    Ok(10f64.powf(-FIBRE_LOSS_DB_PER_KM * km / 10.0))
}

/// Intensities and transmittances of the AB and BC links.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub mu1: f64,
    pub mu2: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl ChannelParams {
    pub fn new(mu1: f64, mu2: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let p = ChannelParams { mu1, mu2, eta1, eta2 };
        p.validate()?;
        Ok(p)
    }

    pub fn symmetric(mu: f64, eta: f64) -> Result<Self> {
        Self::new(mu, mu, eta, eta)
    }

    /// End-to-end fibre length of each link.
    pub fn from_link_km(mu1: f64, mu2: f64, link1_km: f64, link2_km: f64) -> Result<Self> {
        Self::new(
            mu1,
            mu2,
            transmittance_from_distance(link1_km)?,
            transmittance_from_distance(link2_km)?,
        )
    }

    /// Per-arm lengths `[l_A, l_B, l_B', l_C]`.
    pub fn from_arm_km(mu1: f64, mu2: f64, arms: [f64; 4]) -> Result<Self> {
        let mut t = [0.0; 4];
        for (ti, &km) in t.iter_mut().zip(&arms) {
            *ti = transmittance_from_distance(km)?;
        }
        Self::new(mu1, mu2, t[0] * t[1], t[2] * t[3])
    }

    /// Total length `L = l_A + l_B + l_B' + l_C` split into four equal arms.
    pub fn from_total_km(mu1: f64, mu2: f64, total_km: f64) -> Result<Self> {
        Self::from_arm_km(mu1, mu2, [total_km / 4.0; 4])
    }

    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu1)?;
        check_mu(self.mu2)?;
        check_eta(self.eta1)?;
        check_eta(self.eta2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Ab,
    Bc,
}

/// One link evaluated through the POVM pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinkRate {
    pub mu: f64,
    pub eta: f64,
    /// `p(+) + p(-)`
    pub sift: f64,
    /// Holevo information per conclusive round (bits).
    pub holevo: f64,
    /// Devetak–Winter rate per conclusive round (bits).
    pub rate: f64,
    /// `Σ_δ p(δ) r(ρ^δ)`, bits per pulse.
    pub secret_per_pulse: f64,
}

pub fn link_rate(mu: f64, eta: f64, delta_ec: f64) -> Result<LinkRate> {
    check_mu(mu)?;
    check_eta(eta)?;
    check_delta_ec(delta_ec)?;
    if mu == 0.0 {
        return Ok(LinkRate {
            mu,
            eta,
            sift: 0.0,
            holevo: 0.0,
            rate: (1.0 - delta_ec).max(0.0),
            secret_per_pulse: 0.0,
        });
    }
    let povm = loss_povm(mu, eta)?;
    let mut sift = 0.0;
    let mut secret = 0.0;
    let mut chi_weighted = 0.0;
    for delta in Announcement::CONCLUSIVE {
        let state = eve_state(&povm, delta)?;
        let mut chi = von_neumann_entropy(&state.mixture)?;
        for (w, rho) in &state.conditional {
            chi -= w * von_neumann_entropy(rho)?;
        }
        let chi = chi.max(0.0);
        let r = (1.0 - delta_ec - chi).max(0.0);
        sift += state.probability;
        secret += state.probability * r;
        chi_weighted += state.probability * chi;
    }
    Ok(LinkRate {
        mu,
        eta,
        sift,
        holevo: chi_weighted / sift,
        rate: secret / sift,
        secret_per_pulse: secret,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KeyRateResult {
    pub rate_ab: f64,
    pub rate_bc: f64,
    pub sift_ab: f64,
    pub sift_bc: f64,
    pub holevo_ab: f64,
    pub holevo_bc: f64,
    /// Bits per pulse, `min(sift_ab·rate_ab, sift_bc·rate_bc)`.
    pub r_infinity: f64,
    pub delta_ec: f64,
}

impl KeyRateResult {
    /// The link attaining the minimum; AB on ties.
    pub fn bottleneck(&self) -> Link {
        if self.sift_bc * self.rate_bc < self.sift_ab * self.rate_ab {
            Link::Bc
        } else {
            Link::Ab
        }
    }
}

pub fn asymptotic_rate(params: &ChannelParams, delta_ec: f64) -> Result<KeyRateResult> {
    params.validate()?;
    let ab = link_rate(params.mu1, params.eta1, delta_ec)?;
    let bc = link_rate(params.mu2, params.eta2, delta_ec)?;
    Ok(KeyRateResult {
        rate_ab: ab.rate,
        rate_bc: bc.rate,
        sift_ab: ab.sift,
        sift_bc: bc.sift,
        holevo_ab: ab.holevo,
        holevo_bc: bc.holevo,
        r_infinity: ab.secret_per_pulse.min(bc.secret_per_pulse),
        delta_ec,
    })
}

/// Evaluates many parameter points concurrently; output order follows input order.
pub fn sweep(points: &[ChannelParams], delta_ec: f64) -> Result<Vec<KeyRateResult>> {
    points.par_iter().map(|p| asymptotic_rate(p, delta_ec)).collect()
}

/// Grid argmax of the rate for links `(eta1, eta2)` sharing one intensity.
/// Ties go to the smaller intensity.
pub fn optimize_intensity_links(eta1: f64, eta2: f64, mu_grid: &[f64], delta_ec: f64) -> Result<(f64, f64)> {
    if mu_grid.is_empty() {
        return Err(Error::Usage("intensity grid is empty".into()));
    }
    if let Some(&bad) = mu_grid.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::domain("mu", bad, "grid intensities must be > 0"));
    }
    let rates = mu_grid
        .par_iter()
        .map(|&mu| asymptotic_rate(&ChannelParams::new(mu, mu, eta1, eta2)?, delta_ec).map(|r| (mu, r.r_infinity)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = rates[0];
    for &(mu, rate) in &rates[1..] {
        if rate > best.1 || (rate == best.1 && mu < best.0) {
            best = (mu, rate);
        }
    }
    Ok(best)
}

/// Symmetric-link intensity optimization; returns `(mu_star, rate_star)`.
pub fn optimize_intensity(eta: f64, mu_grid: &[f64]) -> Result<(f64, f64)> {
    optimize_intensity_links(eta, eta, mu_grid, 0.0)
}

/// Signal pairs contributing to announcement `delta` in the loss-only channel.
pub fn contributing_pairs(delta: Announcement) -> Vec<(SignalSign, SignalSign)> {
    match delta.parity() {
        Some(parity) => pairs_with_parity(parity).to_vec(),
        None => SignalSign::BOTH
            .iter()
            .flat_map(|&a| SignalSign::BOTH.map(|b| (a, b)))
            .collect(),
    }
}
