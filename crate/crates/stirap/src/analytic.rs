//! Closed-form amplitude solutions, final populations, and resonance
//! conditions for the three-level ladder.
//!
//! Everything in this module is an exact function of the dimensionless pulse
//! product AT via the rapidity η with sinh η = 1/(2AT) and the accumulated
//! action I(t) = AT·cosh η·arctan(e^{t/T}). Amplitudes carry a fixed reality
//! pattern: b₁ and b₃ are purely real, b₂ is purely imaginary.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::pulses::PulseParams;
use crate::state::AmplitudeVector;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalyticError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("resonance index n=1 gives AT=0 for the null condition")]
    DegenerateResonance,
}

/// The rapidity η and the product AT it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaParams {
    pub at: f64,
    pub eta: f64,
}

impl EtaParams {
    pub fn sinh_eta(&self) -> f64 {
        self.eta.sinh()
    }

    pub fn cosh_eta(&self) -> f64 {
        self.eta.cosh()
    }

    pub fn tanh_eta(&self) -> f64 {
        self.eta.tanh()
    }

    pub fn sech_eta(&self) -> f64 {
        self.eta.cosh().recip()
    }
}

/// Rapidity for a given area product: η = asinh(1/(2·at)).
pub fn eta_of(at: f64) -> Result<EtaParams, AnalyticError> {
    if !at.is_finite() || at <= 0.0 {
        return Err(AnalyticError::InvalidParameter(format!(
            "area product at must be finite and > 0, got {at}"
        )));
    }
    Ok(EtaParams { at, eta: (0.5 / at).asinh() })
}

/// Accumulated action I(t) = AT·cosh η·arctan(e^{t/T}).
///
/// Monotone increasing from 0 at t→−∞ to (π/2)·AT·cosh η at t→+∞.
pub fn action_integral(t: f64, params: &PulseParams) -> f64 {
    let eta = eta_of(params.area_product()).expect("PulseParams guarantees at > 0");
    params.area_product() * eta.cosh_eta() * (t / params.width()).exp().atan()
}

fn pack3(b1: f64, b2_im: f64, b3: f64) -> AmplitudeVector {
    AmplitudeVector::new(
        vec![C64::new(b1, 0.0), C64::new(0.0, b2_im), C64::new(b3, 0.0)],
        1e-12,
    )
    .expect("closed forms are unit-norm")
}

/// Exact counterintuitive-order amplitudes at time `t` for the sech pair,
/// starting from (1, 0, 0) at t→−∞.
///
/// `t = ±∞` is accepted and evaluates the exact limits.
pub fn counterintuitive_amplitudes(t: f64, params: &PulseParams) -> AmplitudeVector {
    let at = params.area_product();
    let eta = eta_of(at).expect("PulseParams guarantees at > 0");
    if t == f64::NEG_INFINITY {
        return pack3(1.0, 0.0, 0.0);
    }
    if t == f64::INFINITY {
        return counterintuitive_final(at).expect("at > 0");
    }
    let (th, se) = (eta.tanh_eta(), eta.sech_eta());
    let phi = (t / params.width()).exp().atan();
    let i2 = 2.0 * action_integral(t, params);
    let bracket = se * se + th * th * i2.cos();
    let b1 = th * phi.sin() * i2.sin() + phi.cos() * bracket;
    let b2_im = -2.0 * th * se * (i2 / 2.0).sin().powi(2);
    let b3 = th * phi.cos() * i2.sin() - phi.sin() * bracket;
    pack3(b1, b2_im, b3)
}

/// t→+∞ limit of [`counterintuitive_amplitudes`]:
/// b₁ = tanh η·sin(πAT cosh η),
/// b₂ = −2i·(tanh η/cosh η)·sin²(πAT cosh η/2),
/// b₃ = −1 + tanh²η·(1 − cos(πAT cosh η)).
pub fn counterintuitive_final(at: f64) -> Result<AmplitudeVector, AnalyticError> {
    let eta = eta_of(at)?;
    let (th, se) = (eta.tanh_eta(), eta.sech_eta());
    let angle = PI * at * eta.cosh_eta();
    let b1 = th * angle.sin();
    let b2_im = -2.0 * th * se * (angle / 2.0).sin().powi(2);
    let b3 = -1.0 + th * th * (1.0 - angle.cos());
    Ok(pack3(b1, b2_im, b3))
}

/// Exact intuitive-order amplitudes at time `t` for the mirrored sech pair,
/// starting from (1, 0, 0) at t→−∞. The mixing angle runs from π/2 down to 0.
pub fn intuitive_amplitudes(t: f64, params: &PulseParams) -> AmplitudeVector {
    let at = params.area_product();
    let eta = eta_of(at).expect("PulseParams guarantees at > 0");
    if t == f64::NEG_INFINITY {
        return pack3(1.0, 0.0, 0.0);
    }
    if t == f64::INFINITY {
        return intuitive_final(at).expect("at > 0");
    }
    let (th, se) = (eta.tanh_eta(), eta.sech_eta());
    let phi = (-t / params.width()).exp().atan();
    let i2 = 2.0 * action_integral(t, params);
    let b1 = phi.sin() * i2.cos() + phi.cos() * th * i2.sin();
    let b2_im = -se * i2.sin();
    let b3 = phi.cos() * i2.cos() - phi.sin() * th * i2.sin();
    pack3(b1, b2_im, b3)
}

/// t→+∞ limit of [`intuitive_amplitudes`]:
/// b₁ = tanh η·sin(πAT cosh η),
/// b₂ = −i·sech η·sin(πAT cosh η),
/// b₃ = cos(πAT cosh η).
pub fn intuitive_final(at: f64) -> Result<AmplitudeVector, AnalyticError> {
    let eta = eta_of(at)?;
    let angle = PI * at * eta.cosh_eta();
    Ok(pack3(
        eta.tanh_eta() * angle.sin(),
        -eta.sech_eta() * angle.sin(),
        angle.cos(),
    ))
}

/// Final level-3 amplitude for the exponential pair:
/// b₃(∞) = −1 + sech²(πAT). Monotone decreasing in AT, from 0 at AT=0
/// towards −1.
pub fn exponential_final(at: f64) -> Result<f64, AnalyticError> {
    if !at.is_finite() || at < 0.0 {
        return Err(AnalyticError::InvalidParameter(format!(
            "area product at must be finite and ≥ 0, got {at}"
        )));
    }
    Ok(-1.0 + crate::math::sech(PI * at).powi(2))
}

/// Which resonance family to solve for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceKind {
    /// Complete counterintuitive transfer: (4n)² − (2AT)² = 1.
    CiComplete,
    /// Complete intuitive transfer: (2n)² − (2AT)² = 1.
    InComplete,
    /// Null intuitive transfer: [2(n−½)]² − (2AT)² = 1.
    InNull,
}

/// Solve the selected resonance identity for the area product AT.
///
/// Feeding the result to the matching final-population operation reproduces
/// |b₃|² = 1 (complete) or 0 (null) exactly.
pub fn resonance_product(kind: ResonanceKind, n: u32) -> Result<f64, AnalyticError> {
    if n < 1 {
        return Err(AnalyticError::InvalidParameter("n must be ≥ 1".into()));
    }
    let n = n as f64;
    let lhs = match kind {
        ResonanceKind::CiComplete => 4.0 * n,
        ResonanceKind::InComplete => 2.0 * n,
        ResonanceKind::InNull => {
            if n < 2.0 {
                return Err(AnalyticError::DegenerateResonance);
            }
            2.0 * (n - 0.5)
        }
    };
    Ok((lhs * lhs - 1.0).sqrt() / 2.0)
}
