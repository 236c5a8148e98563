//! Pulse families and the adiabatic-frame quantities they induce.
//!
//! Every scheme supplies two nonnegative couplings λ₁(t) (levels 1↔2) and
//! λ₂(t) (levels 2↔3). In the adiabatic frame the relevant quantities are the
//! effective Rabi magnitude R₂ = √(λ₁²+λ₂²), the mixing angle
//! φ = atan2(λ₁, λ₂) ∈ [0, π/2], and its rate φ̇.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::math::sech;

/// Real-valued function of time, shareable across threads.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PulseError {
    #[error("invalid pulse parameter: {0}")]
    InvalidParameter(String),
    #[error("custom scheme violates f1²+f2²=1 at t={t}: residual {residual:e}")]
    SchemeInvariantViolation { t: f64, residual: f64 },
    #[error("mixing angle undefined: both couplings vanish at t={t}")]
    AngleUndefined { t: f64 },
    #[error("pulse-area quadrature did not converge")]
    AreaNotConverged,
}

/// Scaling parameters of a pulse pair: coupling amplitude `A` (rad per unit
/// time) and width `T` (unit time). The dimensionless product `A·T` controls
/// all final populations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams {
    amplitude: f64,
    width: f64,
}

impl PulseParams {
    pub fn new(amplitude: f64, width: f64) -> Result<Self, PulseError> {
        if !amplitude.is_finite() || amplitude <= 0.0 {
            return Err(PulseError::InvalidParameter(format!(
                "amplitude A must be finite and > 0, got {amplitude}"
            )));
        }
        if !width.is_finite() || width <= 0.0 {
            return Err(PulseError::InvalidParameter(format!(
                "width T must be finite and > 0, got {width}"
            )));
        }
        Ok(Self { amplitude, width })
    }

    /// Unit-width parameters with the given area product: A = at, T = 1.
    pub fn from_area_product(at: f64) -> Result<Self, PulseError> {
        Self::new(at, 1.0)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// The dimensionless product A·T.
    pub fn area_product(&self) -> f64 {
        self.amplitude * self.width
    }
}

/// A user-supplied separable pulse pair λ₁ = f₁·g, λ₂ = f₂·g with
/// f₁² + f₂² = 1 at every sampled instant.
///
/// If analytic derivatives of f₁ and f₂ are supplied, φ̇ is computed from the
/// quotient formula φ̇ = ḟ₁f₂ − f₁ḟ₂ (valid on the unit f-circle); otherwise a
/// central finite difference with step `fd_step` (default 1e−6·T) is used.
#[derive(Clone)]
pub struct CustomSeparable {
    pub f1: TimeFn,
    pub f2: TimeFn,
    pub g: TimeFn,
    pub df1: Option<TimeFn>,
    pub df2: Option<TimeFn>,
    pub fd_step: Option<f64>,
}

impl CustomSeparable {
    pub fn new(f1: TimeFn, f2: TimeFn, g: TimeFn) -> Self {
        Self { f1, f2, g, df1: None, df2: None, fd_step: None }
    }

    pub fn with_derivatives(mut self, df1: TimeFn, df2: TimeFn) -> Self {
        self.df1 = Some(df1);
        self.df2 = Some(df2);
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = Some(step);
        self
    }
}

/// One of the built-in pulse families, or a custom separable pair.
///
/// Built-ins (u = t/T):
/// - counterintuitive sech: λ₁ = A√((1+tanh u)/2)·sech u,
///   λ₂ = A√((1−tanh u)/2)·sech u (λ₂ precedes λ₁),
/// - intuitive sech: the same two pulses with roles swapped,
/// - exponential pair: λ₁ = A(1+e^{−u})^{−1/2}, λ₂ = A(1+e^{u})^{−1/2}
///   (constant R₂ = A, infinite pulse area).
#[derive(Clone)]
pub enum PulseScheme {
    CounterintuitiveSech,
    IntuitiveSech,
    ExponentialPair,
    CustomSeparable(CustomSeparable),
}

impl fmt::Debug for PulseScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl PulseScheme {
    /// Serialized lowercase token for this scheme.
    pub fn token(&self) -> &'static str {
        match self {
            Self::CounterintuitiveSech => "ci-sech",
            Self::IntuitiveSech => "in-sech",
            Self::ExponentialPair => "exp-pair",
            Self::CustomSeparable(_) => "custom",
        }
    }

    /// Parse a scheme token. Custom schemes carry closures and cannot be
    /// built from a token.
    pub fn from_token(token: &str) -> Result<Self, PulseError> {
        match token {
            "ci-sech" => Ok(Self::CounterintuitiveSech),
            "in-sech" => Ok(Self::IntuitiveSech),
            "exp-pair" => Ok(Self::ExponentialPair),
            "custom" => Err(PulseError::InvalidParameter(
                "custom schemes cannot be constructed from a token".into(),
            )),
            other => Err(PulseError::InvalidParameter(format!(
                "unknown scheme token '{other}'"
            ))),
        }
    }
}

/// Adiabatic-frame quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticFrame {
    /// Effective Rabi magnitude R₂ = √(λ₁²+λ₂²), rad/time.
    pub r2: f64,
    /// Mixing angle φ = atan2(λ₁, λ₂) ∈ [0, π/2].
    pub phi: f64,
    /// Mixing-angle rate φ̇, rad/time.
    pub phi_dot: f64,
}

/// Evaluate the coupling pair (λ₁, λ₂) at time `t`.
pub fn eval_couplings(
    scheme: &PulseScheme,
    params: &PulseParams,
    t: f64,
) -> Result<(f64, f64), PulseError> {
    let a = params.amplitude();
    let u = t / params.width();
    match scheme {
        PulseScheme::CounterintuitiveSech => {
            let s = sech(u);
            let th = u.tanh();
            Ok((a * ((1.0 + th) / 2.0).sqrt() * s, a * ((1.0 - th) / 2.0).sqrt() * s))
        }
        PulseScheme::IntuitiveSech => {
            let s = sech(u);
            let th = u.tanh();
            Ok((a * ((1.0 - th) / 2.0).sqrt() * s, a * ((1.0 + th) / 2.0).sqrt() * s))
        }
        PulseScheme::ExponentialPair => {
            let l1 = a / (1.0 + (-u).exp()).sqrt();
            let l2 = a / (1.0 + u.exp()).sqrt();
            Ok((l1, l2))
        }
        PulseScheme::CustomSeparable(c) => {
            let (f1, f2, g) = ((c.f1)(t), (c.f2)(t), (c.g)(t));
            let residual = (f1 * f1 + f2 * f2 - 1.0).abs();
            if residual > 1e-12 {
                return Err(PulseError::SchemeInvariantViolation { t, residual });
            }
            let (l1, l2) = (f1 * g, f2 * g);
            if !l1.is_finite() || !l2.is_finite() {
                return Err(PulseError::InvalidParameter(format!(
                    "custom couplings not finite at t={t}"
                )));
            }
            Ok((l1, l2))
        }
    }
}

/// Adiabatic-frame quantities (R₂, φ, φ̇) at time `t`.
///
/// Built-in schemes use the closed forms; a custom scheme uses atan2 of its
/// couplings and either the supplied derivatives or a central finite
/// difference for φ̇. Built-in sech schemes approach (0,0) only
/// asymptotically, so their φ is taken from the closed form (which tends to
/// the correct limit, 0 or π/2) rather than raising an error when the
/// couplings underflow.
pub fn adiabatic_frame(
    scheme: &PulseScheme,
    params: &PulseParams,
    t: f64,
) -> Result<AdiabaticFrame, PulseError> {
    let a = params.amplitude();
    let big_t = params.width();
    let u = t / big_t;
    match scheme {
        PulseScheme::CounterintuitiveSech => Ok(AdiabaticFrame {
            r2: a * sech(u),
            phi: u.exp().atan(),
            phi_dot: sech(u) / (2.0 * big_t),
        }),
        PulseScheme::IntuitiveSech => Ok(AdiabaticFrame {
            r2: a * sech(u),
            phi: (-u).exp().atan(),
            phi_dot: -sech(u) / (2.0 * big_t),
        }),
        PulseScheme::ExponentialPair => Ok(AdiabaticFrame {
            // λ₁²+λ₂² = A² identically for this pair.
            r2: a,
            phi: (u / 2.0).exp().atan(),
            phi_dot: sech(u / 2.0) / (4.0 * big_t),
        }),
        PulseScheme::CustomSeparable(c) => {
            let (l1, l2) = eval_couplings(scheme, params, t)?;
            if l1 == 0.0 && l2 == 0.0 {
                return Err(PulseError::AngleUndefined { t });
            }
            let phi = l1.atan2(l2);
            let phi_dot = match (&c.df1, &c.df2) {
                (Some(df1), Some(df2)) => {
                    let (f1, f2) = ((c.f1)(t), (c.f2)(t));
                    // On the unit f-circle the quotient formula reduces to
                    // φ̇ = ḟ₁f₂ − f₁ḟ₂.
                    let (d1, d2) = (df1(t), df2(t));
                    (d1 * f2 - f1 * d2) / (f1 * f1 + f2 * f2)
                }
                _ => {
                    let h = c.fd_step.unwrap_or(1e-6 * big_t);
                    let fwd = eval_couplings(scheme, params, t + h)?;
                    let bwd = eval_couplings(scheme, params, t - h)?;
                    (fwd.0.atan2(fwd.1) - bwd.0.atan2(bwd.1)) / (2.0 * h)
                }
            };
            Ok(AdiabaticFrame { r2: l1.hypot(l2), phi, phi_dot })
        }
    }
}

/// Time integral of R₂(t) over the whole line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseArea {
    Finite(f64),
    Infinite,
}

/// Pulse area ∫R₂ dt. Sech pairs give AπT exactly; the exponential pair has
/// constant R₂ = A and therefore no finite area. Custom schemes are
/// integrated numerically over symmetric windows of doubling length until the
/// result settles; growth without convergence is reported as an error.
pub fn pulse_area(scheme: &PulseScheme, params: &PulseParams) -> Result<PulseArea, PulseError> {
    match scheme {
        PulseScheme::CounterintuitiveSech | PulseScheme::IntuitiveSech => {
            Ok(PulseArea::Finite(params.amplitude() * PI * params.width()))
        }
        PulseScheme::ExponentialPair => Ok(PulseArea::Infinite),
        PulseScheme::CustomSeparable(_) => custom_area(scheme, params),
    }
}

fn custom_area(scheme: &PulseScheme, params: &PulseParams) -> Result<PulseArea, PulseError> {
    let big_t = params.width();
    let r2 = |t: f64| -> Result<f64, PulseError> {
        let (l1, l2) = eval_couplings(scheme, params, t)?;
        Ok(l1.hypot(l2))
    };
    // Composite Simpson over [-half, half] with resolution tied to T.
    let simpson = |half: f64| -> Result<f64, PulseError> {
        let n = ((2.0 * half / (big_t / 64.0)).ceil() as usize).next_multiple_of(2);
        let h = 2.0 * half / n as f64;
        let mut acc = r2(-half)? + r2(half)?;
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * r2(-half + i as f64 * h)?;
        }
        Ok(acc * h / 3.0)
    };
    let mut half = 16.0 * big_t;
    let mut prev = simpson(half)?;
    let mut settled = 0;
    for _ in 0..9 {
        half *= 2.0;
        let next = simpson(half)?;
        if (next - prev).abs() <= 1e-9 * next.abs().max(1.0) {
            settled += 1;
            if settled >= 2 {
                return Ok(PulseArea::Finite(next));
            }
        } else {
            settled = 0;
        }
        prev = next;
    }
    Err(PulseError::AreaNotConverged)
}
