//! Composite numerical experiments: analytic-vs-numeric verification,
//! parameter sweeps, double-STIRAP phase manipulation, and the Hadamard-gate
//! reduction check.
//!
//! Everything here works at unit pulse width (T = 1, A = at), which is the
//! only combination the closed forms depend on.

use std::io::{self, BufRead, Write};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::exec;
use crate::propagate::{
    self, g17, IntegratorConfig, LevelModel, ModelKind, PropagateError, TimeSeries,
};
use crate::pulses::{eval_couplings, PulseError, PulseParams, PulseScheme};
use crate::state::AmplitudeVector;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("pulse windows overlap: delay {delay} below the minimum separation {min}")]
    WindowOverlap { delay: f64, min: f64 },
    #[error("report parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Propagate(#[from] PropagateError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Which closed-form family an experiment checks against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyScheme {
    Ci,
    In,
    Exp,
}

impl VerifyScheme {
    pub fn token(&self) -> &'static str {
        match self {
            Self::Ci => "ci",
            Self::In => "in",
            Self::Exp => "exp",
        }
    }

    pub fn from_token(token: &str) -> Result<Self, ExperimentError> {
        match token {
            "ci" => Ok(Self::Ci),
            "in" => Ok(Self::In),
            "exp" => Ok(Self::Exp),
            other => Err(ExperimentError::Parse(format!("unknown scheme token '{other}'"))),
        }
    }

    fn pulse_scheme(&self) -> PulseScheme {
        match self {
            Self::Ci => PulseScheme::CounterintuitiveSech,
            Self::In => PulseScheme::IntuitiveSech,
            Self::Exp => PulseScheme::ExponentialPair,
        }
    }

    fn window(&self, params: &PulseParams) -> IntegratorConfig {
        match self {
            Self::Exp => IntegratorConfig::exponential_window(params),
            _ => IntegratorConfig::sech_window(params),
        }
    }
}

fn three_level(scheme: &VerifyScheme, params: PulseParams) -> Result<LevelModel, PropagateError> {
    LevelModel::new(ModelKind::ThreeLevel, scheme.pulse_scheme(), params)
}

fn run_three_level(
    scheme: &VerifyScheme,
    at: f64,
) -> Result<(TimeSeries, PulseParams), ExperimentError> {
    let params = PulseParams::from_area_product(at)?;
    let model = three_level(scheme, params)?;
    let cfg = scheme.window(&params);
    let series = propagate::integrate(&model, &AmplitudeVector::basis_state(3, 0), &cfg)?;
    Ok((series, params))
}

/// Outcome of one analytic-vs-numeric comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyReport {
    pub scheme: VerifyScheme,
    pub at: f64,
    pub tol: f64,
    /// Max pointwise state distance (sech pairs) or the endpoint-amplitude
    /// deviation (exponential pair).
    pub max_error: f64,
    pub pass: bool,
}

/// Compare the numerical trajectory against the closed form: pointwise for
/// the sech pairs, final-value-only for the exponential pair.
pub fn verify_analytic(
    scheme: VerifyScheme,
    at: f64,
    tol: f64,
) -> Result<VerifyReport, ExperimentError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(ExperimentError::InvalidRange(format!("tolerance must be > 0, got {tol}")));
    }
    let (series, params) = run_three_level(&scheme, at)?;
    let max_error = match scheme {
        VerifyScheme::Exp => {
            let b3 = series.final_state().entries()[2];
            let expected = analytic::exponential_final(at)?;
            (b3 - C64::new(expected, 0.0)).norm()
        }
        _ => {
            let mut worst: f64 = 0.0;
            for (t, state) in series.times().iter().zip(series.states()) {
                let reference = match scheme {
                    VerifyScheme::Ci => analytic::counterintuitive_amplitudes(*t, &params),
                    _ => analytic::intuitive_amplitudes(*t, &params),
                };
                worst = worst.max(state.distance(&reference));
            }
            worst
        }
    };
    Ok(VerifyReport { scheme, at, tol, max_error, pass: max_error <= tol })
}

/// Whether a sweep also runs the numerical integrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Closed forms only (fast).
    AnalyticOnly,
    /// Closed forms plus RK4 endpoints and their absolute error.
    WithNumeric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub at: f64,
    pub p3_analytic: f64,
    pub p3_numeric: Option<f64>,
    pub abs_error: Option<f64>,
}

/// Final-population sweep over the area product.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub scheme: VerifyScheme,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_SCHEMA: &str = "sweep.v1";
pub const DOUBLE_STIRAP_SCHEMA: &str = "double-stirap.v1";

/// |b₃(∞)|² over evenly spaced area products. Rows are independent and run
/// in parallel (with the `parallel` feature); row order is fixed by index.
pub fn sweep(
    scheme: VerifyScheme,
    at_min: f64,
    at_max: f64,
    samples: usize,
    mode: SweepMode,
) -> Result<SweepTable, ExperimentError> {
    if !at_min.is_finite() || !at_max.is_finite() || at_min <= 0.0 || at_max <= at_min {
        return Err(ExperimentError::InvalidRange(format!(
            "need 0 < at_min < at_max, got [{at_min}, {at_max}]"
        )));
    }
    if samples < 2 {
        return Err(ExperimentError::InvalidRange(format!("need ≥ 2 samples, got {samples}")));
    }
    let step = (at_max - at_min) / (samples - 1) as f64;
    let rows = exec::map_indexed(samples, |i| -> Result<SweepRow, ExperimentError> {
        let at = at_min + i as f64 * step;
        let p3_analytic = match scheme {
            VerifyScheme::Ci => analytic::counterintuitive_final(at)?.populations()[2],
            VerifyScheme::In => analytic::intuitive_final(at)?.populations()[2],
            VerifyScheme::Exp => analytic::exponential_final(at)?.powi(2),
        };
        let p3_numeric = match mode {
            SweepMode::AnalyticOnly => None,
            SweepMode::WithNumeric => {
                let (series, _) = run_three_level(&scheme, at)?;
                Some(series.final_state().populations()[2])
            }
        };
        Ok(SweepRow {
            at,
            p3_analytic,
            p3_numeric,
            abs_error: p3_numeric.map(|p| (p3_analytic - p).abs()),
        })
    });
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_, _>>()?;
    Ok(SweepTable { scheme, rows })
}

impl SweepTable {
    /// CSV with schema and scheme recorded in comment header fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# schema: {SWEEP_SCHEMA}")?;
        writeln!(w, "# scheme: {}", self.scheme.token())?;
        writeln!(w, "at,p3_analytic,p3_numeric,abs_error")?;
        for row in &self.rows {
            let num = row.p3_numeric.map(g17).unwrap_or_default();
            let err = row.abs_error.map(g17).unwrap_or_default();
            writeln!(w, "{},{},{},{}", g17(row.at), g17(row.p3_analytic), num, err)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, ExperimentError> {
        let mut scheme = None;
        let mut rows = Vec::new();
        let mut saw_schema = false;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("schema:") {
                    saw_schema = true;
                    if v.trim() != SWEEP_SCHEMA {
                        return Err(ExperimentError::Parse(format!(
                            "unexpected schema '{}'",
                            v.trim()
                        )));
                    }
                } else if let Some(v) = rest.strip_prefix("scheme:") {
                    scheme = Some(VerifyScheme::from_token(v.trim())?);
                }
                continue;
            }
            if line.is_empty() || line.starts_with("at,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(ExperimentError::Parse(format!(
                    "row has {} fields, expected 4",
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64, ExperimentError> {
                s.parse().map_err(|e| ExperimentError::Parse(format!("{e}: '{s}'")))
            };
            let opt = |s: &str| -> Result<Option<f64>, ExperimentError> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    parse(s).map(Some)
                }
            };
            rows.push(SweepRow {
                at: parse(fields[0])?,
                p3_analytic: parse(fields[1])?,
                p3_numeric: opt(fields[2])?,
                abs_error: opt(fields[3])?,
            });
        }
        if !saw_schema {
            return Err(ExperimentError::Parse("missing schema header".into()));
        }
        let scheme =
            scheme.ok_or_else(|| ExperimentError::Parse("missing scheme header".into()))?;
        if rows.is_empty() {
            return Err(ExperimentError::Parse("no data rows".into()));
        }
        Ok(Self { scheme, rows })
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "at": r.at,
                    "p3_analytic": r.p3_analytic,
                    "p3_numeric": r.p3_numeric,
                    "abs_error": r.abs_error,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "schema": SWEEP_SCHEMA,
            "scheme": self.scheme.token(),
            "rows": rows,
        }))
        .expect("sweep table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        if v["schema"].as_str() != Some(SWEEP_SCHEMA) {
            return Err(ExperimentError::Parse("unexpected or missing schema".into()));
        }
        let scheme = VerifyScheme::from_token(
            v["scheme"].as_str().ok_or_else(|| ExperimentError::Parse("missing scheme".into()))?,
        )?;
        let rows = v["rows"]
            .as_array()
            .ok_or_else(|| ExperimentError::Parse("missing rows".into()))?
            .iter()
            .map(|r| {
                Ok(SweepRow {
                    at: r["at"].as_f64().ok_or_else(|| ExperimentError::Parse("bad at".into()))?,
                    p3_analytic: r["p3_analytic"]
                        .as_f64()
                        .ok_or_else(|| ExperimentError::Parse("bad p3_analytic".into()))?,
                    p3_numeric: r["p3_numeric"].as_f64(),
                    abs_error: r["abs_error"].as_f64(),
                })
            })
            .collect::<Result<_, ExperimentError>>()?;
        Ok(Self { scheme, rows })
    }
}

/// Result of a counterintuitive-then-intuitive pulse sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleStirapReport {
    pub at: f64,
    /// Delay between the two pulse centers, in units of T.
    pub delay: f64,
    pub final_state: AmplitudeVector,
    /// |b₁|² at the end of the second pulse.
    pub return_population: f64,
    /// arg b₁ at the end, in (−π, π]. Reported as measured; the inter-pulse
    /// Hamiltonian vanishes on resonance, so no delay dependence is asserted.
    pub b1_phase: f64,
}

/// Minimum pulse-center separation, in units of T.
pub const MIN_PULSE_SEPARATION: f64 = 10.0;

/// Two consecutive STIRAP processes: a counterintuitive pair centered at 0
/// transfers 1→3, then an intuitive pair centered at `delay` transfers back
/// 3→1. Integrated as one composite coupling waveform over
/// [−15, delay + 15].
///
/// `at = 0` is the trivial zero-coupling sequence (the state never moves).
pub fn double_stirap(at: f64, delay: f64, dt: f64) -> Result<DoubleStirapReport, ExperimentError> {
    if at < 0.0 || !at.is_finite() {
        return Err(ExperimentError::InvalidRange(format!("need at ≥ 0, got {at}")));
    }
    if delay < MIN_PULSE_SEPARATION {
        return Err(ExperimentError::WindowOverlap { delay, min: MIN_PULSE_SEPARATION });
    }
    let config = IntegratorConfig::new(-15.0, delay + 15.0, dt, 1e-8)?;
    let initial = AmplitudeVector::basis_state(3, 0);
    let series = if at == 0.0 {
        propagate::integrate_with_couplings(|_| Ok((0.0, 0.0)), &initial, &config)?
    } else {
        let params = PulseParams::from_area_product(at)?;
        let ci = PulseScheme::CounterintuitiveSech;
        let inn = PulseScheme::IntuitiveSech;
        propagate::integrate_with_couplings(
            |t| {
                let (a1, a2) = eval_couplings(&ci, &params, t)?;
                let (b1, b2) = eval_couplings(&inn, &params, t - delay)?;
                Ok((a1 + b1, a2 + b2))
            },
            &initial,
            &config,
        )?
    };
    let final_state = series.final_state().clone();
    let b1 = final_state.entries()[0];
    Ok(DoubleStirapReport {
        at,
        delay,
        return_population: b1.norm_sqr(),
        b1_phase: b1.arg(),
        final_state,
    })
}

impl DoubleStirapReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# schema: {DOUBLE_STIRAP_SCHEMA}")?;
        writeln!(w, "at,delay,re1,im1,re2,im2,re3,im3,return_population,b1_phase")?;
        let e = self.final_state.entries();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            g17(self.at),
            g17(self.delay),
            g17(e[0].re),
            g17(e[0].im),
            g17(e[1].re),
            g17(e[1].im),
            g17(e[2].re),
            g17(e[2].im),
            g17(self.return_population),
            g17(self.b1_phase)
        )
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, ExperimentError> {
        let mut saw_schema = false;
        let mut report = None;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("schema:") {
                    saw_schema = true;
                    if v.trim() != DOUBLE_STIRAP_SCHEMA {
                        return Err(ExperimentError::Parse(format!(
                            "unexpected schema '{}'",
                            v.trim()
                        )));
                    }
                }
                continue;
            }
            if line.is_empty() || line.starts_with("at,") {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| ExperimentError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?;
            if fields.len() != 10 {
                return Err(ExperimentError::Parse(format!(
                    "row has {} fields, expected 10",
                    fields.len()
                )));
            }
            report = Some(Self {
                at: fields[0],
                delay: fields[1],
                final_state: AmplitudeVector::new(
                    vec![
                        C64::new(fields[2], fields[3]),
                        C64::new(fields[4], fields[5]),
                        C64::new(fields[6], fields[7]),
                    ],
                    1e-6,
                )
                .map_err(|e| ExperimentError::Parse(e.to_string()))?,
                return_population: fields[8],
                b1_phase: fields[9],
            });
        }
        if !saw_schema {
            return Err(ExperimentError::Parse("missing schema header".into()));
        }
        report.ok_or_else(|| ExperimentError::Parse("no data row".into()))
    }

    pub fn to_json(&self) -> String {
        let state: Vec<[f64; 2]> =
            self.final_state.entries().iter().map(|z| [z.re, z.im]).collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "schema": DOUBLE_STIRAP_SCHEMA,
            "at": self.at,
            "delay": self.delay,
            "final_state": state,
            "return_population": self.return_population,
            "b1_phase": self.b1_phase,
        }))
        .expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        if v["schema"].as_str() != Some(DOUBLE_STIRAP_SCHEMA) {
            return Err(ExperimentError::Parse("unexpected or missing schema".into()));
        }
        let state = v["final_state"]
            .as_array()
            .ok_or_else(|| ExperimentError::Parse("missing final_state".into()))?;
        let entries: Vec<C64> = state
            .iter()
            .map(|p| {
                let re = p[0].as_f64().ok_or_else(|| ExperimentError::Parse("bad re".into()))?;
                let im = p[1].as_f64().ok_or_else(|| ExperimentError::Parse("bad im".into()))?;
                Ok(C64::new(re, im))
            })
            .collect::<Result<_, ExperimentError>>()?;
        let get = |key: &str| -> Result<f64, ExperimentError> {
            v[key].as_f64().ok_or_else(|| ExperimentError::Parse(format!("missing {key}")))
        };
        Ok(Self {
            at: get("at")?,
            delay: get("delay")?,
            final_state: AmplitudeVector::new(entries, 1e-6)
                .map_err(|e| ExperimentError::Parse(e.to_string()))?,
            return_population: get("return_population")?,
            b1_phase: get("b1_phase")?,
        })
    }
}

/// Max trajectory deviation of the 4-level gate embedding from c·b₁ of the
/// plain three-level run: max over t of |b₁₀ − c₁₀b₁| and |b₁₁ − c₁₁b₁|.
pub fn hadamard_check(c10: f64, c11: f64, at: f64) -> Result<f64, ExperimentError> {
    let params = PulseParams::from_area_product(at)?;
    let gate = LevelModel::new(
        ModelKind::Hadamard { c10, c11 },
        PulseScheme::CounterintuitiveSech,
        params,
    )?;
    let cfg = IntegratorConfig::sech_window(&params);
    let initial = AmplitudeVector::new(
        vec![C64::new(c10, 0.0), C64::new(c11, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        1e-10,
    )
    .map_err(PropagateError::from)?;
    let four = propagate::integrate(&gate, &initial, &cfg)?;
    let three = propagate::integrate(
        &three_level(&VerifyScheme::Ci, params)?,
        &AmplitudeVector::basis_state(3, 0),
        &cfg,
    )?;
    let mut worst: f64 = 0.0;
    for (s4, s3) in four.states().iter().zip(three.states()) {
        let b1 = s3.entries()[0];
        worst = worst.max((s4.entries()[0] - c10 * b1).norm());
        worst = worst.max((s4.entries()[1] - c11 * b1).norm());
    }
    Ok(worst)
}

/// Trajectory maxima of the components that must stay empty for a real
/// initial state: (max |Im b₁|, max |Re b₂|, max |Im b₃|).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    pub max_im_b1: f64,
    pub max_re_b2: f64,
    pub max_im_b3: f64,
}

pub fn separation_check(
    scheme: VerifyScheme,
    at: f64,
) -> Result<SeparationReport, ExperimentError> {
    let (series, _) = run_three_level(&scheme, at)?;
    let mut report = SeparationReport { max_im_b1: 0.0, max_re_b2: 0.0, max_im_b3: 0.0 };
    for s in series.states() {
        report.max_im_b1 = report.max_im_b1.max(s.entries()[0].im.abs());
        report.max_re_b2 = report.max_re_b2.max(s.entries()[1].re.abs());
        report.max_im_b3 = report.max_im_b3.max(s.entries()[2].im.abs());
    }
    Ok(report)
}
