//! Direct numerical integration of the 2-, 3-, and 4-level time-dependent
//! Schrödinger equations (ħ = 1), plus the SU(2)→SO(3) amplitude map.
//!
//! The integrator is fixed-step RK4, chosen over adaptive schemes so that
//! identical inputs give bit-identical trajectories. Norm drift is monitored
//! and reported, never corrected.

use std::io::{self, BufRead, Write};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::pulses::{adiabatic_frame, eval_couplings, PulseError, PulseParams, PulseScheme};
use crate::state::{AmplitudeVector, NormViolation};

#[derive(Debug, Error)]
pub enum PropagateError {
    #[error("norm drift {drift:e} exceeded tolerance {tol:e}; time step too coarse")]
    NormDriftExceeded { drift: f64, tol: f64 },
    #[error("dimension mismatch: model dimension {expected}, state dimension {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Hadamard coefficients violate c10²+c11²=1: norm² = {norm_sq}")]
    HadamardNormViolation { norm_sq: f64 },
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error("time-series parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    NormViolation(#[from] NormViolation),
    #[error(transparent)]
    Pulse(#[from] PulseError),
}

/// Which level structure to integrate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// H₂ = ½(λ₁σ₁ + λ₂σ₃) in the bare basis.
    TwoLevelBare,
    /// H₂ᵃᵈ = ½(R₂σ₃ − φ̇σ₂) in the adiabatic basis.
    TwoLevelAdiabatic,
    /// The three-level ladder H₃ = λ₁J₁ + λ₂J₃.
    ThreeLevel,
    /// The four-level gate Hamiltonian with λ₁₀ = c₁₀λ₁, λ₁₁ = c₁₁λ₁;
    /// collapses exactly onto [`ModelKind::ThreeLevel`] when c₁₀²+c₁₁² = 1.
    Hadamard { c10: f64, c11: f64 },
}

impl ModelKind {
    pub fn dim(&self) -> usize {
        match self {
            Self::TwoLevelBare | Self::TwoLevelAdiabatic => 2,
            Self::ThreeLevel => 3,
            Self::Hadamard { .. } => 4,
        }
    }
}

/// A level structure together with the pulse scheme driving it.
#[derive(Debug, Clone)]
pub struct LevelModel {
    pub kind: ModelKind,
    pub scheme: PulseScheme,
    pub params: PulseParams,
}

impl LevelModel {
    pub fn new(kind: ModelKind, scheme: PulseScheme, params: PulseParams) -> Result<Self, PropagateError> {
        if let ModelKind::Hadamard { c10, c11 } = kind {
            let norm_sq = c10 * c10 + c11 * c11;
            if (norm_sq - 1.0).abs() > 1e-12 {
                return Err(PropagateError::HadamardNormViolation { norm_sq });
            }
        }
        Ok(Self { kind, scheme, params })
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }
}

/// Integration method. RK4 is the only implemented scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk4,
}

/// Time window, step, and norm-drift tolerance for one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    t_min: f64,
    t_max: f64,
    dt: f64,
    method: Method,
    norm_tolerance: f64,
}

impl IntegratorConfig {
    pub fn new(t_min: f64, t_max: f64, dt: f64, norm_tolerance: f64) -> Result<Self, PropagateError> {
        if !t_min.is_finite() || !t_max.is_finite() || t_min >= t_max {
            return Err(PropagateError::InvalidConfig(format!(
                "need finite t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if !dt.is_finite() || dt <= 0.0 || dt > (t_max - t_min) / 100.0 {
            return Err(PropagateError::InvalidConfig(format!(
                "need 0 < dt ≤ (t_max−t_min)/100, got dt={dt}"
            )));
        }
        if !norm_tolerance.is_finite() || norm_tolerance <= 0.0 {
            return Err(PropagateError::InvalidConfig("norm_tolerance must be > 0".into()));
        }
        Ok(Self { t_min, t_max, dt, method: Method::Rk4, norm_tolerance })
    }

    /// Default window for the sech pairs: [−15T, 15T], dt = 1e−3·T. The
    /// couplings outside are below 1e−12·A, so truncation sits well under the
    /// oracle tolerances.
    pub fn sech_window(params: &PulseParams) -> Self {
        let t = params.width();
        Self::new(-15.0 * t, 15.0 * t, 1e-3 * t, 1e-8).expect("static window is valid")
    }

    /// Default window for the exponential pair: [−25T, 45T]. λ₂ decays as
    /// e^{−t/2T}, so level 3 decouples even though λ₁ persists.
    pub fn exponential_window(params: &PulseParams) -> Self {
        let t = params.width();
        Self::new(-25.0 * t, 45.0 * t, 1e-3 * t, 1e-8).expect("static window is valid")
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self, PropagateError> {
        Self::new(self.t_min, self.t_max, dt, self.norm_tolerance)?;
        self.dt = dt;
        Ok(self)
    }

    pub fn with_norm_tolerance(mut self, tol: f64) -> Result<Self, PropagateError> {
        Self::new(self.t_min, self.t_max, self.dt, tol)?;
        self.norm_tolerance = tol;
        Ok(self)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn norm_tolerance(&self) -> f64 {
        self.norm_tolerance
    }

    /// Number of uniform steps covering the window; the actual step is
    /// span/n, which equals `dt` whenever `dt` divides the span.
    pub fn n_steps(&self) -> usize {
        (((self.t_max - self.t_min) / self.dt).round() as usize).max(100)
    }
}

/// A sampled trajectory: one state per time, plus the recorded norm drift.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    states: Vec<AmplitudeVector>,
    norm_drift: f64,
}

impl TimeSeries {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[AmplitudeVector] {
        &self.states
    }

    pub fn final_state(&self) -> &AmplitudeVector {
        self.states.last().expect("time series is never empty")
    }

    /// Max over samples of |1 − Σ|bᵢ|²|.
    pub fn norm_drift(&self) -> f64 {
        self.norm_drift
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with a mandatory header; all values at 17 significant digits:
    /// `t,re1,im1,…,pop1,…,norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.states[0].dim();
        let mut header = String::from("t");
        for i in 1..=dim {
            header.push_str(&format!(",re{i},im{i}"));
        }
        for i in 1..=dim {
            header.push_str(&format!(",pop{i}"));
        }
        header.push_str(",norm");
        writeln!(w, "{header}")?;
        for (t, state) in self.times.iter().zip(&self.states) {
            let mut row = g17(*t);
            for z in state.entries() {
                row.push(',');
                row.push_str(&g17(z.re));
                row.push(',');
                row.push_str(&g17(z.im));
            }
            for p in state.populations() {
                row.push(',');
                row.push_str(&g17(p));
            }
            row.push(',');
            row.push_str(&g17(state.norm_sq()));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    /// Parse a CSV produced by [`TimeSeries::write_csv`]. The norm drift is
    /// recomputed from the parsed samples.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, PropagateError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| PropagateError::Parse("empty input".into()))?
            .map_err(|e| PropagateError::Parse(e.to_string()))?;
        let cols = header.split(',').count();
        if cols < 5 || (cols - 2) % 3 != 0 {
            return Err(PropagateError::Parse(format!("unexpected column count {cols}")));
        }
        let dim = (cols - 2) / 3;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for line in lines {
            let line = line.map_err(|e| PropagateError::Parse(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| PropagateError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?;
            if fields.len() != cols {
                return Err(PropagateError::Parse(format!(
                    "row has {} fields, expected {cols}",
                    fields.len()
                )));
            }
            times.push(fields[0]);
            let entries = (0..dim)
                .map(|i| C64::new(fields[1 + 2 * i], fields[2 + 2 * i]))
                .collect();
            states.push(AmplitudeVector::new_unchecked(entries));
        }
        if times.is_empty() {
            return Err(PropagateError::Parse("no data rows".into()));
        }
        let norm_drift = states
            .iter()
            .map(|s| (1.0 - s.norm_sq()).abs())
            .fold(0.0, f64::max);
        Ok(Self { times, states, norm_drift })
    }

    /// JSON form with an explicit schema tag.
    pub fn to_json(&self) -> String {
        let states: Vec<Vec<[f64; 2]>> = self
            .states
            .iter()
            .map(|s| s.entries().iter().map(|z| [z.re, z.im]).collect())
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "schema": "time-series.v1",
            "times": self.times,
            "states": states,
            "norm_drift": self.norm_drift,
        }))
        .expect("time series serializes")
    }
}

pub(crate) fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// A dense n×n Hermitian matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    dim: usize,
    elems: Vec<C64>,
}

impl Hamiltonian {
    fn zeros(dim: usize) -> Self {
        Self { dim, elems: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.elems[row * self.dim + col]
    }

    fn set(&mut self, row: usize, col: usize, v: C64) {
        self.elems[row * self.dim + col] = v;
    }

    /// out = −i·H·psi, the right-hand side of i ψ̇ = Hψ.
    pub fn apply_rhs(&self, psi: &[C64], out: &mut [C64]) {
        let n = self.dim;
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..n {
                acc += self.elems[r * n + c] * psi[c];
            }
            *o = C64::new(acc.im, -acc.re); // multiply by −i
        }
    }
}

fn fill_hamiltonian(model: &LevelModel, t: f64, h: &mut Hamiltonian) -> Result<(), PropagateError> {
    match model.kind {
        ModelKind::TwoLevelBare => {
            let (l1, l2) = eval_couplings(&model.scheme, &model.params, t)?;
            h.set(0, 0, C64::new(0.5 * l2, 0.0));
            h.set(0, 1, C64::new(0.5 * l1, 0.0));
            h.set(1, 0, C64::new(0.5 * l1, 0.0));
            h.set(1, 1, C64::new(-0.5 * l2, 0.0));
        }
        ModelKind::TwoLevelAdiabatic => {
            let f = adiabatic_frame(&model.scheme, &model.params, t)?;
            h.set(0, 0, C64::new(0.5 * f.r2, 0.0));
            h.set(0, 1, C64::new(0.0, 0.5 * f.phi_dot));
            h.set(1, 0, C64::new(0.0, -0.5 * f.phi_dot));
            h.set(1, 1, C64::new(-0.5 * f.r2, 0.0));
        }
        ModelKind::ThreeLevel => {
            let (l1, l2) = eval_couplings(&model.scheme, &model.params, t)?;
            fill_ladder(h, l1, l2);
        }
        ModelKind::Hadamard { c10, c11 } => {
            let (l1, l2) = eval_couplings(&model.scheme, &model.params, t)?;
            h.set(0, 2, C64::new(c10 * l1, 0.0));
            h.set(2, 0, C64::new(c10 * l1, 0.0));
            h.set(1, 2, C64::new(c11 * l1, 0.0));
            h.set(2, 1, C64::new(c11 * l1, 0.0));
            h.set(2, 3, C64::new(l2, 0.0));
            h.set(3, 2, C64::new(l2, 0.0));
        }
    }
    Ok(())
}

fn fill_ladder(h: &mut Hamiltonian, l1: f64, l2: f64) {
    h.set(0, 1, C64::new(l1, 0.0));
    h.set(1, 0, C64::new(l1, 0.0));
    h.set(1, 2, C64::new(l2, 0.0));
    h.set(2, 1, C64::new(l2, 0.0));
}

/// The instantaneous Hamiltonian of `model` at time `t`.
pub fn build_hamiltonian(model: &LevelModel, t: f64) -> Result<Hamiltonian, PropagateError> {
    if let ModelKind::Hadamard { c10, c11 } = model.kind {
        let norm_sq = c10 * c10 + c11 * c11;
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(PropagateError::HadamardNormViolation { norm_sq });
        }
    }
    let mut h = Hamiltonian::zeros(model.dim());
    fill_hamiltonian(model, t, &mut h)?;
    Ok(h)
}

fn rk4_run<F>(
    dim: usize,
    mut fill: F,
    initial: &AmplitudeVector,
    config: &IntegratorConfig,
) -> Result<TimeSeries, PropagateError>
where
    F: FnMut(f64, &mut Hamiltonian) -> Result<(), PropagateError>,
{
    if initial.dim() != dim {
        return Err(PropagateError::DimensionMismatch { expected: dim, got: initial.dim() });
    }
    if (initial.norm_sq() - 1.0).abs() > 1e-10 {
        return Err(NormViolation { norm_sq: initial.norm_sq(), tol: 1e-10 }.into());
    }

    let n = config.n_steps();
    let h = (config.t_max - config.t_min) / n as f64;
    let mut psi: Vec<C64> = initial.entries().to_vec();

    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(config.t_min);
    states.push(AmplitudeVector::new_unchecked(psi.clone()));

    let mut ham_start = Hamiltonian::zeros(dim);
    let mut ham_mid = Hamiltonian::zeros(dim);
    let mut ham_end = Hamiltonian::zeros(dim);
    fill(config.t_min, &mut ham_start)?;

    let zero = C64::new(0.0, 0.0);
    let mut k1 = vec![zero; dim];
    let mut k2 = vec![zero; dim];
    let mut k3 = vec![zero; dim];
    let mut k4 = vec![zero; dim];
    let mut tmp = vec![zero; dim];

    let mut norm_drift: f64 = 0.0;
    for step in 0..n {
        let t = config.t_min + step as f64 * h;
        fill(t + 0.5 * h, &mut ham_mid)?;
        fill(t + h, &mut ham_end)?;

        ham_start.apply_rhs(&psi, &mut k1);
        for i in 0..dim {
            tmp[i] = psi[i] + 0.5 * h * k1[i];
        }
        ham_mid.apply_rhs(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = psi[i] + 0.5 * h * k2[i];
        }
        ham_mid.apply_rhs(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = psi[i] + h * k3[i];
        }
        ham_end.apply_rhs(&tmp, &mut k4);
        for i in 0..dim {
            psi[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }

        std::mem::swap(&mut ham_start, &mut ham_end);
        times.push(config.t_min + (step + 1) as f64 * h);
        states.push(AmplitudeVector::new_unchecked(psi.clone()));
        let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        norm_drift = norm_drift.max((1.0 - norm_sq).abs());
    }

    if norm_drift > config.norm_tolerance {
        return Err(PropagateError::NormDriftExceeded {
            drift: norm_drift,
            tol: config.norm_tolerance,
        });
    }
    Ok(TimeSeries { times, states, norm_drift })
}

/// Integrate i ψ̇ = H(t) ψ with fixed-step RK4 from `initial`.
pub fn integrate(
    model: &LevelModel,
    initial: &AmplitudeVector,
    config: &IntegratorConfig,
) -> Result<TimeSeries, PropagateError> {
    if let ModelKind::Hadamard { c10, c11 } = model.kind {
        let norm_sq = c10 * c10 + c11 * c11;
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(PropagateError::HadamardNormViolation { norm_sq });
        }
    }
    rk4_run(model.dim(), |t, h| fill_hamiltonian(model, t, h), initial, config)
}

/// Integrate the three-level ladder with arbitrary coupling waveforms
/// (λ₁, λ₂)(t), e.g. composite pulse sequences.
pub fn integrate_with_couplings<F>(
    couplings: F,
    initial: &AmplitudeVector,
    config: &IntegratorConfig,
) -> Result<TimeSeries, PropagateError>
where
    F: Fn(f64) -> Result<(f64, f64), PulseError>,
{
    rk4_run(
        3,
        |t, h| {
            let (l1, l2) = couplings(t)?;
            fill_ladder(h, l1, l2);
            Ok(())
        },
        initial,
        config,
    )
}

/// Map adiabatic two-level amplitudes (a₁, a₂) at mixing angle φ onto the
/// three-level amplitudes:
/// b₁ = −sin φ·(a₁a₂*+a₁*a₂) + cos φ·(|a₁|²−|a₂|²),
/// b₂ = −(a₁a₂*−a₁*a₂),
/// b₃ = −cos φ·(a₁a₂*+a₁*a₂) − sin φ·(|a₁|²−|a₂|²).
pub fn su2_to_so3_map(a1: C64, a2: C64, phi: f64) -> Result<AmplitudeVector, PropagateError> {
    let norm_sq = a1.norm_sqr() + a2.norm_sqr();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(NormViolation { norm_sq, tol: 1e-10 }.into());
    }
    let cross = a1 * a2.conj();
    let x = 2.0 * cross.re;
    let y = 2.0 * cross.im;
    let z = a1.norm_sqr() - a2.norm_sqr();
    let (s, c) = phi.sin_cos();
    Ok(AmplitudeVector::new_unchecked(vec![
        C64::new(-s * x + c * z, 0.0),
        C64::new(0.0, -y),
        C64::new(-c * x - s * z, 0.0),
    ]))
}

/// Integrate from the all-population-on-level-1 initial condition and return
/// the per-level populations together with the final state.
pub fn final_populations(
    model: &LevelModel,
    config: &IntegratorConfig,
) -> Result<(Vec<f64>, AmplitudeVector), PropagateError> {
    let initial = match model.kind {
        // b₁(−∞) = 1 embeds as (c₁₀, c₁₁, 0, 0) in the gate basis.
        ModelKind::Hadamard { c10, c11 } => AmplitudeVector::new(
            vec![C64::new(c10, 0.0), C64::new(c11, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            1e-10,
        )?,
        _ => AmplitudeVector::basis_state(model.dim(), 0),
    };
    let series = integrate(model, &initial, config)?;
    let last = series.final_state().clone();
    Ok((last.populations(), last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use approx::assert_abs_diff_eq;

    fn ci_model(at: f64) -> LevelModel {
        LevelModel::new(
            ModelKind::ThreeLevel,
            PulseScheme::CounterintuitiveSech,
            PulseParams::from_area_product(at).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn three_level_hamiltonian_structure() {
        let h = build_hamiltonian(&ci_model(1.0), 0.0).unwrap();
        let lam = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(h.get(0, 1).re, lam, epsilon = 1e-15);
        assert_abs_diff_eq!(h.get(1, 2).re, lam, epsilon = 1e-15);
        for i in 0..3 {
            assert_eq!(h.get(i, i), C64::new(0.0, 0.0));
        }
        assert_eq!(h.get(0, 2), C64::new(0.0, 0.0));
    }

    #[test]
    fn adiabatic_hamiltonian_matches_frame() {
        let model = LevelModel::new(
            ModelKind::TwoLevelAdiabatic,
            PulseScheme::CounterintuitiveSech,
            PulseParams::new(2.0, 1.0).unwrap(),
        )
        .unwrap();
        let h = build_hamiltonian(&model, 0.0).unwrap();
        assert_abs_diff_eq!(h.get(0, 0).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.get(0, 1).im, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(h.get(1, 0).im, -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(h.get(1, 1).re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn hadamard_hamiltonian_row_structure() {
        let model = LevelModel::new(
            ModelKind::Hadamard { c10: 0.6, c11: 0.8 },
            PulseScheme::CounterintuitiveSech,
            PulseParams::new(1.0, 1.0).unwrap(),
        )
        .unwrap();
        let h = build_hamiltonian(&model, 0.0).unwrap();
        let lam = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(h.get(2, 0).re, 0.6 * lam, epsilon = 1e-15);
        assert_abs_diff_eq!(h.get(2, 1).re, 0.8 * lam, epsilon = 1e-15);
        assert_eq!(h.get(2, 2), C64::new(0.0, 0.0));
        assert_abs_diff_eq!(h.get(2, 3).re, lam, epsilon = 1e-15);
        assert_eq!(h.get(0, 1), C64::new(0.0, 0.0));
        assert_eq!(h.get(0, 3), C64::new(0.0, 0.0));
    }

    #[test]
    fn hadamard_norm_violation_rejected() {
        let bad = LevelModel::new(
            ModelKind::Hadamard { c10: 0.6, c11: 0.9 },
            PulseScheme::CounterintuitiveSech,
            PulseParams::new(1.0, 1.0).unwrap(),
        );
        assert!(matches!(bad, Err(PropagateError::HadamardNormViolation { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 1.0, 1e-3, 1e-8).is_ok());
        assert!(IntegratorConfig::new(1.0, 0.0, 1e-3, 1e-8).is_err());
        assert!(IntegratorConfig::new(0.0, 1.0, 0.5, 1e-8).is_err()); // dt > span/100
        assert!(IntegratorConfig::new(0.0, 1.0, -1e-3, 1e-8).is_err());
    }

    #[test]
    fn zero_coupling_evolution_is_identity() {
        let cfg = IntegratorConfig::new(-5.0, 5.0, 1e-2, 1e-12).unwrap();
        let initial = AmplitudeVector::basis_state(3, 0);
        let series = integrate_with_couplings(|_| Ok((0.0, 0.0)), &initial, &cfg).unwrap();
        assert_eq!(series.final_state(), &initial);
        assert_eq!(series.norm_drift(), 0.0);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let cfg = IntegratorConfig::sech_window(&PulseParams::new(1.0, 1.0).unwrap());
        let initial = AmplitudeVector::basis_state(2, 0);
        match integrate(&ci_model(1.0), &initial, &cfg) {
            Err(PropagateError::DimensionMismatch { expected: 3, got: 2 }) => {}
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn coarse_step_triggers_norm_drift_error() {
        let model = ci_model(50.0);
        let cfg = IntegratorConfig::new(-15.0, 15.0, 0.3, 1e-8).unwrap();
        match integrate(&model, &AmplitudeVector::basis_state(3, 0), &cfg) {
            Err(PropagateError::NormDriftExceeded { .. }) => {}
            other => panic!("expected norm drift error, got {other:?}"),
        }
    }

    #[test]
    fn unitarity_across_schemes() {
        // drift stays below 1e-9 at dt = 1e-3·T up to A·T = 10
        for (scheme, window) in [
            (PulseScheme::CounterintuitiveSech, IntegratorConfig::sech_window as fn(&PulseParams) -> _),
            (PulseScheme::IntuitiveSech, IntegratorConfig::sech_window),
            (PulseScheme::ExponentialPair, IntegratorConfig::exponential_window),
        ] {
            for amplitude in [3.0, 10.0] {
                let params = PulseParams::new(amplitude, 1.0).unwrap();
                let model = LevelModel::new(ModelKind::ThreeLevel, scheme.clone(), params).unwrap();
                let cfg = window(&params).with_norm_tolerance(1e-9).unwrap();
                let series = integrate(&model, &AmplitudeVector::basis_state(3, 0), &cfg).unwrap();
                assert!(series.norm_drift() <= 1e-9, "drift {}", series.norm_drift());
            }
        }
    }

    #[test]
    fn final_populations_spot_value() {
        // |b₃(∞)|² at at = 1 equals the square of the closed-form amplitude
        let params = PulseParams::from_area_product(1.0).unwrap();
        let model =
            LevelModel::new(ModelKind::ThreeLevel, PulseScheme::CounterintuitiveSech, params)
                .unwrap();
        let (pops, _) =
            final_populations(&model, &IntegratorConfig::sech_window(&params)).unwrap();
        assert_abs_diff_eq!(pops[2], 0.37649700194133356, epsilon = 1e-5);
        assert_abs_diff_eq!(pops.iter().sum::<f64>(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rk4_tracks_counterintuitive_closed_form() {
        // Oracle agreement at four reference area products, both pulse orders.
        for at in [0.5, 1.0, 15f64.sqrt() / 2.0, 3.0] {
            let params = PulseParams::from_area_product(at).unwrap();
            let cfg = IntegratorConfig::sech_window(&params);
            for intuitive in [false, true] {
                let scheme = if intuitive {
                    PulseScheme::IntuitiveSech
                } else {
                    PulseScheme::CounterintuitiveSech
                };
                let model = LevelModel::new(ModelKind::ThreeLevel, scheme, params).unwrap();
                let series =
                    integrate(&model, &AmplitudeVector::basis_state(3, 0), &cfg).unwrap();
                let mut worst: f64 = 0.0;
                for (t, state) in series.times().iter().zip(series.states()) {
                    let reference = if intuitive {
                        analytic::intuitive_amplitudes(*t, &params)
                    } else {
                        analytic::counterintuitive_amplitudes(*t, &params)
                    };
                    worst = worst.max(state.distance(&reference));
                }
                assert!(worst <= 1e-5, "at={at} intuitive={intuitive}: max err {worst:e}");
            }
        }
    }

    #[test]
    fn exponential_endpoint_matches_closed_form() {
        let params = PulseParams::from_area_product(1.0).unwrap();
        let model =
            LevelModel::new(ModelKind::ThreeLevel, PulseScheme::ExponentialPair, params).unwrap();
        let cfg = IntegratorConfig::exponential_window(&params);
        let (pops, last) = final_populations(&model, &cfg).unwrap();
        let expected = analytic::exponential_final(1.0).unwrap();
        assert_abs_diff_eq!(last.entries()[2].re, expected, epsilon = 1e-3);
        assert_abs_diff_eq!(pops.iter().sum::<f64>(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rk4_convergence_is_fourth_order() {
        // Start both runs from the exact analytic state at t_min so the
        // measured error is pure truncation, then halve dt.
        let params = PulseParams::from_area_product(1.0).unwrap();
        let model = LevelModel::new(
            ModelKind::ThreeLevel,
            PulseScheme::CounterintuitiveSech,
            params,
        )
        .unwrap();
        let initial = analytic::counterintuitive_amplitudes(-10.0, &params);
        let err_at = |dt: f64| -> f64 {
            let cfg = IntegratorConfig::new(-10.0, 10.0, dt, 1e-6).unwrap();
            let series = integrate(&model, &initial, &cfg).unwrap();
            series
                .times()
                .iter()
                .zip(series.states())
                .map(|(t, s)| s.distance(&analytic::counterintuitive_amplitudes(*t, &params)))
                .fold(0.0, f64::max)
        };
        let ratio = err_at(0.02) / err_at(0.01);
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn adiabatic_two_level_maps_onto_three_level() {
        // Integrate the adiabatic two-level system, map through Eqs. of the
        // SU(2) representation at φ(t), and compare against the direct
        // three-level integration, pointwise.
        let params = PulseParams::from_area_product(1.0).unwrap();
        let cfg = IntegratorConfig::sech_window(&params);
        let two = LevelModel::new(
            ModelKind::TwoLevelAdiabatic,
            PulseScheme::CounterintuitiveSech,
            params,
        )
        .unwrap();
        let three = LevelModel::new(
            ModelKind::ThreeLevel,
            PulseScheme::CounterintuitiveSech,
            params,
        )
        .unwrap();
        let a = integrate(&two, &AmplitudeVector::basis_state(2, 0), &cfg).unwrap();
        let b = integrate(&three, &AmplitudeVector::basis_state(3, 0), &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for ((t, sa), sb) in a.times().iter().zip(a.states()).zip(b.states()) {
            let phi = adiabatic_frame(&PulseScheme::CounterintuitiveSech, &params, *t)
                .unwrap()
                .phi;
            let mapped = su2_to_so3_map(sa.entries()[0], sa.entries()[1], phi).unwrap();
            worst = worst.max(mapped.distance(sb));
        }
        assert!(worst <= 1e-6, "max pointwise deviation {worst:e}");
    }

    #[test]
    fn su2_map_spot_values() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let b = su2_to_so3_map(one, zero, 0.0).unwrap();
        assert_eq!(b.entries(), &[one, zero, zero]);
        let b = su2_to_so3_map(one, zero, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(b.entries()[0].re.abs() < 1e-16);
        assert_abs_diff_eq!(b.entries()[2].re, -1.0, epsilon = 1e-15);
        let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let b = su2_to_so3_map(r, r, 0.0).unwrap();
        assert!(b.entries()[0].re.abs() < 1e-15);
        assert_abs_diff_eq!(b.entries()[2].re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn su2_map_rejects_bad_norm_and_preserves_good_norm() {
        let err = su2_to_so3_map(C64::new(0.9, 0.0), C64::new(0.0, 0.0), 0.3);
        assert!(matches!(err, Err(PropagateError::NormViolation(_))));
        // sampled unit inputs stay unit-norm after the map
        for k in 0..50 {
            let alpha = 0.13 * k as f64;
            let beta = 0.71 * k as f64;
            let a1 = C64::from_polar((alpha.sin().powi(2)).sqrt(), 1.3 * alpha);
            let a2 = C64::from_polar((1.0 - a1.norm_sqr()).sqrt(), -0.4 * beta);
            let b = su2_to_so3_map(a1, a2, beta).unwrap();
            assert_abs_diff_eq!(b.norm_sq(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn hadamard_trajectory_collapses_to_three_level() {
        let params = PulseParams::from_area_product(1.0).unwrap();
        let cfg = IntegratorConfig::sech_window(&params);
        let gate = LevelModel::new(
            ModelKind::Hadamard { c10: 0.6, c11: 0.8 },
            PulseScheme::CounterintuitiveSech,
            params,
        )
        .unwrap();
        let (_, _) = final_populations(&gate, &cfg).unwrap();
        let four = integrate(
            &gate,
            &AmplitudeVector::new(
                vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
                1e-10,
            )
            .unwrap(),
            &cfg,
        )
        .unwrap();
        let three = integrate(
            &LevelModel::new(ModelKind::ThreeLevel, PulseScheme::CounterintuitiveSech, params)
                .unwrap(),
            &AmplitudeVector::basis_state(3, 0),
            &cfg,
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for (s4, s3) in four.states().iter().zip(three.states()) {
            let b1 = s3.entries()[0];
            worst = worst.max((s4.entries()[0] - 0.6 * b1).norm());
            worst = worst.max((s4.entries()[1] - 0.8 * b1).norm());
            worst = worst.max((s4.entries()[2] - s3.entries()[1]).norm());
            worst = worst.max((s4.entries()[3] - s3.entries()[2]).norm());
        }
        assert!(worst <= 1e-8, "embedding deviation {worst:e}");
    }

    #[test]
    fn real_initial_state_keeps_reality_pattern_exactly() {
        // The invariant subspace (Re b₁, Im b₂, Re b₃) is preserved by every
        // RK4 stage, so the complementary parts stay identically zero.
        let params = PulseParams::from_area_product(2.0).unwrap();
        let cfg = IntegratorConfig::sech_window(&params);
        for scheme in [PulseScheme::CounterintuitiveSech, PulseScheme::IntuitiveSech] {
            let model = LevelModel::new(ModelKind::ThreeLevel, scheme, params).unwrap();
            let series = integrate(&model, &AmplitudeVector::basis_state(3, 0), &cfg).unwrap();
            for s in series.states() {
                assert_eq!(s.entries()[0].im, 0.0);
                assert_eq!(s.entries()[1].re, 0.0);
                assert_eq!(s.entries()[2].im, 0.0);
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let params = PulseParams::from_area_product(1.0).unwrap();
        let model =
            LevelModel::new(ModelKind::ThreeLevel, PulseScheme::CounterintuitiveSech, params)
                .unwrap();
        let cfg = IntegratorConfig::new(-2.0, 2.0, 0.04, 1e-8).unwrap();
        let series = integrate(&model, &AmplitudeVector::basis_state(3, 0), &cfg).unwrap();
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let parsed = TimeSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(parsed.times(), series.times());
        assert_eq!(parsed.states(), series.states());
        assert_eq!(parsed.norm_drift(), series.norm_drift());
    }
}
