//! Phase-encoded coherent states restricted to their two-dimensional span.
//!
//! `|±α> = c0|e0> ± c1|e1>` with `c0 = e^{-μ/2} sqrt(cosh μ)` and
//! `c1 = e^{-μ/2} sqrt(sinh μ)`. A pair of such states lives in the
//! 4-dimensional product space ordered `{e0e0, e1e1, e0e1, e1e0}`.

use std::fmt;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{outer, HermitianOperator, ModeVector};

/// Phase of a pulse, `e^{iπk}` for the key bit `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl SignalSign {
    pub const BOTH: [SignalSign; 2] = [SignalSign::Plus, SignalSign::Minus];

    /// Bit 0 encodes phase 0, bit 1 encodes phase π.
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            SignalSign::Minus
        } else {
            SignalSign::Plus
        }
    }

    pub fn bit(self) -> bool {
        self == SignalSign::Minus
    }

    pub fn factor(self) -> f64 {
        match self {
            SignalSign::Plus => 1.0,
            SignalSign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            SignalSign::Plus => '+',
            SignalSign::Minus => '-',
        }
    }

    /// `+` when both signs agree.
    pub fn relative(self, other: SignalSign) -> SignalSign {
        if self == other {
            SignalSign::Plus
        } else {
            SignalSign::Minus
        }
    }
}

impl fmt::Display for SignalSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoherentBasisCoeffs {
    pub mu: f64,
    pub c0: f64,
    pub c1: f64,
}

impl CoherentBasisCoeffs {
    pub fn c0_sq(&self) -> f64 {
        self.c0 * self.c0
    }

    pub fn c1_sq(&self) -> f64 {
        self.c1 * self.c1
    }

    /// `|sa√μ, sb√μ>` as the tensor product of the single-mode expansions.
    pub fn signal(&self, sa: SignalSign, sb: SignalSign) -> ModeVector {
        let a = [self.c0, sa.factor() * self.c1];
        let b = [self.c0, sb.factor() * self.c1];
        ModeVector::from_real([a[0] * b[0], a[1] * b[1], a[0] * b[1], a[1] * b[0]])
    }
}

pub(crate) fn check_mu(mu: f64) -> Result<()> {
    if mu >= 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("mu", mu, "finite mu >= 0"))
    }
}

pub fn basis_coeffs(mu: f64) -> Result<CoherentBasisCoeffs> {
    check_mu(mu)?;
    // e^{-μ}cosh μ = (1 + e^{-2μ})/2 and e^{-μ}sinh μ = (1 - e^{-2μ})/2, the
    // latter through expm1 so small μ keeps full relative precision.
    let c0_sq = 0.5 * (1.0 + (-2.0 * mu).exp());
    let c1_sq = -0.5 * (-2.0 * mu).exp_m1();
    Ok(CoherentBasisCoeffs {
        mu,
        c0: c0_sq.sqrt(),
        c1: c1_sq.sqrt(),
    })
}

pub fn signal_vector(sa: SignalSign, sb: SignalSign, mu: f64) -> Result<ModeVector> {
    Ok(basis_coeffs(mu)?.signal(sa, sb))
}

/// The two sign pairs whose relative phase equals `parity`.
pub fn pairs_with_parity(parity: SignalSign) -> [(SignalSign, SignalSign); 2] {
    use SignalSign::{Minus, Plus};
    match parity {
        Plus => [(Plus, Plus), (Minus, Minus)],
        Minus => [(Plus, Minus), (Minus, Plus)],
    }
}

/// Trace-1 equal mixture of the two signal pairs of the given parity.
pub fn correlated_mixture(parity: SignalSign, mu: f64) -> Result<HermitianOperator> {
    let coeffs = basis_coeffs(mu)?;
    let [(a1, b1), (a2, b2)] = pairs_with_parity(parity);
    Ok((outer(&coeffs.signal(a1, b1)) + outer(&coeffs.signal(a2, b2))).scale(0.5))
}

/// The joint-state matrices in the conventional unnormalized layout:
/// trace 2, with off-diagonal signs that make the `+`
/// matrix equal to twice the constructed anti-correlated mixture (and vice
/// versa). Kept for side-by-side reporting only; nothing downstream uses it.
pub fn trace_two_joint_state(parity: SignalSign, mu: f64) -> Result<Matrix4<f64>> {
    let k = basis_coeffs(mu)?;
    let (c0s, c1s) = (k.c0_sq(), k.c1_sq());
    let x = 2.0 * c0s * c1s;
    let s = match parity {
        SignalSign::Plus => -1.0,
        SignalSign::Minus => 1.0,
    };
    Ok(Matrix4::new(
        2.0 * c0s * c0s, s * x, 0.0, 0.0,
        s * x, 2.0 * c1s * c1s, 0.0, 0.0,
        0.0, 0.0, x, s * x,
        0.0, 0.0, s * x, x,
    ))
}

pub(crate) fn real_matrix(m: &Matrix4<f64>) -> Matrix4<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}
