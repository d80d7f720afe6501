//! Minimum-error discrimination of correlated vs anti-correlated pulse pairs.
//!
//! Two numbers are reported for every intensity and neither replaces the
//! other:
//!
//! * `q_helstrom`, the Helstrom bound evaluated by brute force on the
//!   trace-1 mixtures built in [`crate::coherent`]. Analytically this is
//!   `e^{-4μ}/2`.
//! * `q_closed_pair` / `q_closed_triple`, the closed forms
//!   `(e^{-4μ}+3)/8` and `1 - (1 - q_pair)^2`.
//!
//! The two disagree for every `μ > 0`. The closed form equals
//! `½(1 - e^{-2μ} cosh μ sinh μ)`, whereas the trace norm of
//! `½(ρ₋ - ρ₊)` on the constructed mixtures is `4 e^{-2μ} cosh μ sinh μ`,
//! not `e^{-2μ} cosh μ sinh μ`.

use serde::Serialize;

use crate::coherent::{check_mu, correlated_mixture, SignalSign};
use crate::error::{Error, Result};
use crate::linalg::{trace_norm, HermitianOperator};

/// How two error probabilities are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComposeMode {
    /// Independent nodes: an error at either node spoils the joint guess,
    /// `1 - (1-q1)(1-q2)`.
    Node,
    /// Bit-level XOR of two independently wrong guesses,
    /// `q1(1-q2) + q2(1-q1)`.
    Xor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiscriminationResult {
    pub mu: f64,
    pub q_helstrom: f64,
    pub q_closed_pair: f64,
    pub q_closed_triple: f64,
    /// `q_helstrom` composed over two independent nodes.
    pub q_helstrom_triple: f64,
}

/// `½(1 - ‖½(ρ1 - ρ0)‖₁)` for equal priors.
pub fn helstrom_error(rho0: &HermitianOperator, rho1: &HermitianOperator) -> Result<f64> {
    rho0.check_density()?;
    rho1.check_density()?;
    let half_diff = (*rho1 - *rho0).scale(0.5);
    Ok((0.5 * (1.0 - trace_norm(&half_diff))).clamp(0.0, 0.5))
}

pub fn qmin_pair_closed(mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(((-4.0 * mu).exp() + 3.0) / 8.0)
}

/// `½(1 - e^{-2μ} cosh μ sinh μ)`, the hyperbolic form of the pair bound.
pub fn qmin_pair_closed_hyperbolic(mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(0.5 * (1.0 - (-2.0 * mu).exp() * mu.cosh() * mu.sinh()))
}

pub fn qmin_triple_closed(mu: f64) -> Result<f64> {
    let q = qmin_pair_closed(mu)?;
    compose_error(q, q, ComposeMode::Node)
}

/// `(-e^{-8μ} + 10 e^{-4μ} + 39)/64`, the expanded form of the triple bound.
pub fn qmin_triple_closed_expanded(mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok((-(-8.0 * mu).exp() + 10.0 * (-4.0 * mu).exp() + 39.0) / 64.0)
}

pub fn compose_error(q1: f64, q2: f64, mode: ComposeMode) -> Result<f64> {
    for (name, q) in [("q1", q1), ("q2", q2)] {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::domain(name, q, "0 <= q <= 1"));
        }
    }
    Ok(match mode {
        ComposeMode::Node => 1.0 - (1.0 - q1) * (1.0 - q2),
        ComposeMode::Xor => q1 * (1.0 - q2) + q2 * (1.0 - q1),
    })
}

/// Both bounds at one intensity.
pub fn discriminate(mu: f64) -> Result<DiscriminationResult> {
    let plus = correlated_mixture(SignalSign::Plus, mu)?;
    let minus = correlated_mixture(SignalSign::Minus, mu)?;
    let q_helstrom = helstrom_error(&plus, &minus)?;
    Ok(DiscriminationResult {
        mu,
        q_helstrom,
        q_closed_pair: qmin_pair_closed(mu)?,
        q_closed_triple: qmin_triple_closed(mu)?,
        q_helstrom_triple: compose_error(q_helstrom, q_helstrom, ComposeMode::Node)?,
    })
}
