//! 1-D three-channel split-operator propagator for the space- and
//! time-dependent Schrödinger equation with STIRAP couplings.
//!
//! One step applies exp(−i(V+λ)Δt/2ħ) — a 3×3 real-symmetric matrix
//! exponential per grid point, built from the channel potentials plus the
//! instantaneous couplings — then a full kinetic step in the transform
//! domain (multiplication by exp(−iħk²Δt/2m_c) per channel), then the second
//! half-step. Both half-steps evaluate the couplings at the step midpoint,
//! which keeps the scheme second order in Δt. Every factor is unitary, so
//! the discrete norm is preserved to rounding per step.
//!
//! The boundary is periodic (implied by the transform-based kinetic step); a
//! clipping monitor reports when probability reaches the grid edges instead
//! of silently wrapping.
//!
//! Snapshot layout (little-endian): header `n: u32, x_min: f64, x_max: f64,
//! n_channels: u32`, then per channel, per grid point, interleaved re/im
//! doubles.

use std::io::{self, BufRead, Read, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::propagate::g17;
use crate::pulses::{eval_couplings, PulseError, PulseParams, PulseScheme};

#[derive(Debug, Error)]
pub enum SplitOpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("wavepacket clipped: boundary density {density:e} of the norm (grid too small)")]
    PacketClipped { density: f64 },
    #[error("channel phase ill-defined: overlap magnitude {overlap:e} below 0.5")]
    PhaseIllDefined { overlap: f64 },
    #[error("snapshot/trace parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Uniform spatial grid with the conjugate momentum layout of the discrete
/// transform: index i < ⌈n/2⌉ carries k = 2πi/(n·dx), the rest carry the
/// negative frequencies 2π(i−n)/(n·dx); for even n the Nyquist sample i=n/2
/// lands on the negative branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, SplitOpError> {
        if !x_min.is_finite() || !x_max.is_finite() || x_min >= x_max {
            return Err(SplitOpError::InvalidParameter(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n < 16 {
            return Err(SplitOpError::InvalidParameter(format!("need n ≥ 16, got {n}")));
        }
        Ok(Self { x_min, x_max, n, dx: (x_max - x_min) / n as f64 })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn k(&self, i: usize) -> f64 {
        let span = self.n as f64 * self.dx;
        if i < self.n.div_ceil(2) {
            std::f64::consts::TAU * i as f64 / span
        } else {
            std::f64::consts::TAU * (i as f64 - self.n as f64) / span
        }
    }
}

/// Potential shape of one channel.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialShape {
    /// V = ½·m·ω²·(x − center)²; ω = 0 gives a free channel.
    Harmonic { omega: f64, center: f64 },
    /// Arbitrary real samples on the grid (length must match).
    Sampled(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPotential {
    pub mass: f64,
    pub shape: PotentialShape,
}

/// The three channel potentials and masses.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPotentials {
    pub channels: [ChannelPotential; 3],
}

impl ChannelPotentials {
    /// Three identical harmonic channels.
    pub fn identical_harmonic(mass: f64, omega: f64, center: f64) -> Self {
        let ch = ChannelPotential { mass, shape: PotentialShape::Harmonic { omega, center } };
        Self { channels: [ch.clone(), ch.clone(), ch] }
    }

    /// Three identical free channels.
    pub fn free(mass: f64) -> Self {
        Self::identical_harmonic(mass, 0.0, 0.0)
    }

    fn sample(&self, grid: &Grid1D) -> Result<[Vec<f64>; 3], SplitOpError> {
        let mut out: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (c, slot) in self.channels.iter().zip(out.iter_mut()) {
            if !c.mass.is_finite() || c.mass <= 0.0 {
                return Err(SplitOpError::InvalidParameter(format!(
                    "channel mass must be finite and > 0, got {}",
                    c.mass
                )));
            }
            *slot = match &c.shape {
                PotentialShape::Harmonic { omega, center } => (0..grid.n())
                    .map(|i| 0.5 * c.mass * omega * omega * (grid.x(i) - center).powi(2))
                    .collect(),
                PotentialShape::Sampled(v) => {
                    if v.len() != grid.n() {
                        return Err(SplitOpError::InvalidParameter(format!(
                            "sampled potential has {} points, grid has {}",
                            v.len(),
                            grid.n()
                        )));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(SplitOpError::InvalidParameter(
                            "sampled potential contains non-finite values".into(),
                        ));
                    }
                    v.clone()
                }
            };
        }
        Ok(out)
    }
}

/// Three spatial channels of complex samples on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavepacket {
    grid: Grid1D,
    channels: [Vec<C64>; 3],
}

impl Wavepacket {
    /// Wrap raw channel data (norm is the caller's responsibility).
    pub fn from_channels(grid: Grid1D, channels: [Vec<C64>; 3]) -> Result<Self, SplitOpError> {
        for ch in &channels {
            if ch.len() != grid.n() {
                return Err(SplitOpError::InvalidParameter(format!(
                    "channel has {} samples, grid has {}",
                    ch.len(),
                    grid.n()
                )));
            }
        }
        Ok(Self { grid, channels })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn channel(&self, c: usize) -> &[C64] {
        &self.channels[c]
    }

    /// Σ_c Σ_x |ψ_c(x)|²·dx.
    pub fn total_norm(&self) -> f64 {
        (0..3).map(|c| self.channel_norm(c)).sum()
    }

    pub fn channel_norm(&self, c: usize) -> f64 {
        self.channels[c].iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    /// Position expectation ⟨x⟩ of one channel (0 for an empty channel).
    pub fn mean_x(&self, c: usize) -> f64 {
        let w = self.channel_norm(c);
        if w < 1e-12 {
            return 0.0;
        }
        let s: f64 = self.channels[c]
            .iter()
            .enumerate()
            .map(|(i, z)| self.grid.x(i) * z.norm_sqr())
            .sum();
        s * self.grid.dx / w
    }

    /// Position spread Δx of one channel (0 for an empty channel).
    pub fn width_x(&self, c: usize) -> f64 {
        let w = self.channel_norm(c);
        if w < 1e-12 {
            return 0.0;
        }
        let mean = self.mean_x(c);
        let s: f64 = self.channels[c]
            .iter()
            .enumerate()
            .map(|(i, z)| (self.grid.x(i) - mean).powi(2) * z.norm_sqr())
            .sum();
        (s * self.grid.dx / w).sqrt()
    }

    /// Momentum expectation ⟨p⟩ = ħ⟨k⟩ of one channel, from the spectral
    /// first moment.
    pub fn mean_p(&self, c: usize, hbar: f64) -> f64 {
        if self.channel_norm(c) < 1e-12 {
            return 0.0;
        }
        let (m1, _, w) = self.spectral_moments(c);
        hbar * m1 / w
    }

    /// Momentum spread Δp of one channel.
    pub fn width_p(&self, c: usize, hbar: f64) -> f64 {
        if self.channel_norm(c) < 1e-12 {
            return 0.0;
        }
        let (m1, m2, w) = self.spectral_moments(c);
        let mean = m1 / w;
        hbar * (m2 / w - mean * mean).max(0.0).sqrt()
    }

    // Raw spectral moments (Σk|ψ̃|², Σk²|ψ̃|², Σ|ψ̃|²); normalization cancels
    // in the ratios.
    fn spectral_moments(&self, c: usize) -> (f64, f64, f64) {
        let mut buf = self.channels[c].clone();
        FftPlanner::new().plan_fft_forward(self.grid.n()).process(&mut buf);
        let mut w = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, z) in buf.iter().enumerate() {
            let k = self.grid.k(i);
            let p = z.norm_sqr();
            w += p;
            m1 += k * p;
            m2 += k * k * p;
        }
        (m1, m2, w)
    }

    /// Probability mass in the outermost cell on each side (summed over
    /// channels); the clipping monitor compares it against the total norm.
    pub fn boundary_density(&self) -> f64 {
        let n = self.grid.n();
        self.channels
            .iter()
            .map(|ch| (ch[0].norm_sqr() + ch[n - 1].norm_sqr()) * self.grid.dx)
            .sum()
    }

    fn scale(&mut self, factor: f64) {
        for ch in self.channels.iter_mut() {
            for z in ch.iter_mut() {
                *z *= factor;
            }
        }
    }

    /// Write the documented little-endian binary snapshot.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.grid.n() as u32).to_le_bytes())?;
        w.write_all(&self.grid.x_min().to_le_bytes())?;
        w.write_all(&self.grid.x_max().to_le_bytes())?;
        w.write_all(&3u32.to_le_bytes())?;
        for ch in &self.channels {
            for z in ch {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Read a binary snapshot written by [`Wavepacket::write_snapshot`].
    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, SplitOpError> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let x_min = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let x_max = f64::from_le_bytes(b8);
        r.read_exact(&mut b4)?;
        let n_channels = u32::from_le_bytes(b4);
        if n_channels != 3 {
            return Err(SplitOpError::Parse(format!(
                "snapshot has {n_channels} channels, expected 3"
            )));
        }
        let grid = Grid1D::new(x_min, x_max, n)
            .map_err(|e| SplitOpError::Parse(format!("bad snapshot grid: {e}")))?;
        let mut channels: [Vec<C64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for ch in channels.iter_mut() {
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut b8)?;
                let re = f64::from_le_bytes(b8);
                r.read_exact(&mut b8)?;
                let im = f64::from_le_bytes(b8);
                data.push(C64::new(re, im));
            }
            *ch = data;
        }
        Ok(Self { grid, channels })
    }

    /// JSON snapshot for small grids.
    pub fn to_json(&self) -> String {
        let channels: Vec<Vec<[f64; 2]>> = self
            .channels
            .iter()
            .map(|ch| ch.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "schema": "wavepacket.v1",
            "n": self.grid.n(),
            "x_min": self.grid.x_min(),
            "x_max": self.grid.x_max(),
            "channels": channels,
        }))
        .expect("wavepacket serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SplitOpError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SplitOpError::Parse(e.to_string()))?;
        let n = v["n"].as_u64().ok_or_else(|| SplitOpError::Parse("missing n".into()))? as usize;
        let x_min =
            v["x_min"].as_f64().ok_or_else(|| SplitOpError::Parse("missing x_min".into()))?;
        let x_max =
            v["x_max"].as_f64().ok_or_else(|| SplitOpError::Parse("missing x_max".into()))?;
        let grid = Grid1D::new(x_min, x_max, n)
            .map_err(|e| SplitOpError::Parse(format!("bad grid: {e}")))?;
        let chans = v["channels"]
            .as_array()
            .ok_or_else(|| SplitOpError::Parse("missing channels".into()))?;
        if chans.len() != 3 {
            return Err(SplitOpError::Parse("expected 3 channels".into()));
        }
        let mut channels: [Vec<C64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (slot, ch) in channels.iter_mut().zip(chans) {
            let points =
                ch.as_array().ok_or_else(|| SplitOpError::Parse("channel not a list".into()))?;
            if points.len() != n {
                return Err(SplitOpError::Parse("channel length mismatch".into()));
            }
            *slot = points
                .iter()
                .map(|p| {
                    let re = p[0].as_f64().ok_or_else(|| SplitOpError::Parse("bad re".into()))?;
                    let im = p[1].as_f64().ok_or_else(|| SplitOpError::Parse("bad im".into()))?;
                    Ok(C64::new(re, im))
                })
                .collect::<Result<_, SplitOpError>>()?;
        }
        Ok(Self { grid, channels })
    }
}

/// Normalized minimum-uncertainty Gaussian in channel 1:
/// ψ(x) = [2π(Δx)²]^{−1/4}·exp[−(x−⟨x⟩)²/4(Δx)² + i⟨p⟩x/ħ].
pub fn make_gaussian(
    grid: &Grid1D,
    x_mean: f64,
    p_mean: f64,
    dx_width: f64,
    hbar: f64,
) -> Result<Wavepacket, SplitOpError> {
    if !dx_width.is_finite() || dx_width < 2.0 * grid.dx() {
        return Err(SplitOpError::InvalidParameter(format!(
            "packet width {dx_width} under-resolved: need ≥ 2·dx = {}",
            2.0 * grid.dx()
        )));
    }
    if x_mean - 4.0 * dx_width < grid.x_min() || x_mean + 4.0 * dx_width > grid.x_max() {
        return Err(SplitOpError::InvalidParameter(
            "packet center must sit ≥ 4 widths from the grid edges".into(),
        ));
    }
    if !hbar.is_finite() || hbar <= 0.0 {
        return Err(SplitOpError::InvalidParameter("hbar must be > 0".into()));
    }
    let amp = (std::f64::consts::TAU * dx_width * dx_width).powf(-0.25);
    let mut ch0 = Vec::with_capacity(grid.n());
    for i in 0..grid.n() {
        let x = grid.x(i);
        let envelope = amp * (-(x - x_mean).powi(2) / (4.0 * dx_width * dx_width)).exp();
        ch0.push(C64::from_polar(envelope, p_mean * x / hbar));
    }
    let zeros = vec![C64::new(0.0, 0.0); grid.n()];
    let mut packet = Wavepacket { grid: *grid, channels: [ch0, zeros.clone(), zeros] };
    let norm = packet.total_norm();
    let edge = packet.boundary_density() / norm;
    if edge > 1e-10 {
        return Err(SplitOpError::PacketClipped { density: edge });
    }
    packet.scale(norm.sqrt().recip());
    Ok(packet)
}

/// Coupling drive: scheme and parameters, evaluated at t − center.
#[derive(Debug, Clone)]
pub struct Drive {
    pub scheme: PulseScheme,
    pub params: PulseParams,
    /// Time offset of the pulse center, so the pulse window can be placed
    /// anywhere inside the evolution window.
    pub center: f64,
}

/// Step size, action scale, and the coupling drive (None leaves the three
/// channels uncoupled).
#[derive(Debug, Clone)]
pub struct SplitOpConfig {
    pub dt: f64,
    pub hbar: f64,
    pub drive: Option<Drive>,
}

impl SplitOpConfig {
    pub fn new(dt: f64, hbar: f64, drive: Option<Drive>) -> Result<Self, SplitOpError> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(SplitOpError::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        if !hbar.is_finite() || hbar <= 0.0 {
            return Err(SplitOpError::InvalidParameter(format!("hbar must be > 0, got {hbar}")));
        }
        Ok(Self { dt, hbar, drive })
    }
}

/// One row of the observable trace emitted by [`SplitOperator::evolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub norms: [f64; 3],
    pub mean_x: [f64; 3],
    pub mean_p: [f64; 3],
    pub width_x: [f64; 3],
    pub total_norm: f64,
}

/// Observable trace sampled at a fixed step stride.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolveTrace {
    pub rows: Vec<TraceRow>,
}

impl EvolveTrace {
    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("trace has at least the initial sample")
    }

    /// CSV with a mandatory header, 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for tag in ["norm", "mean_x", "mean_p", "width_x"] {
            for c in 1..=3 {
                header.push_str(&format!(",{tag}{c}"));
            }
        }
        header.push_str(",total_norm");
        writeln!(w, "{header}")?;
        for row in &self.rows {
            let mut line = g17(row.t);
            for block in [&row.norms, &row.mean_x, &row.mean_p, &row.width_x] {
                for v in block.iter() {
                    line.push(',');
                    line.push_str(&g17(*v));
                }
            }
            line.push(',');
            line.push_str(&g17(row.total_norm));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, SplitOpError> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 || line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| SplitOpError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?;
            if fields.len() != 14 {
                return Err(SplitOpError::Parse(format!(
                    "row has {} fields, expected 14",
                    fields.len()
                )));
            }
            rows.push(TraceRow {
                t: fields[0],
                norms: [fields[1], fields[2], fields[3]],
                mean_x: [fields[4], fields[5], fields[6]],
                mean_p: [fields[7], fields[8], fields[9]],
                width_x: [fields[10], fields[11], fields[12]],
                total_norm: fields[13],
            });
        }
        if rows.is_empty() {
            return Err(SplitOpError::Parse("no data rows".into()));
        }
        Ok(Self { rows })
    }
}

/// A prepared propagator: sampled potentials, transform plans, and the
/// coupling drive.
pub struct SplitOperator {
    grid: Grid1D,
    config: SplitOpConfig,
    potentials: [Vec<f64>; 3],
    masses: [f64; 3],
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl SplitOperator {
    pub fn new(
        grid: Grid1D,
        config: SplitOpConfig,
        potentials: &ChannelPotentials,
    ) -> Result<Self, SplitOpError> {
        let sampled = potentials.sample(&grid)?;
        let masses = [
            potentials.channels[0].mass,
            potentials.channels[1].mass,
            potentials.channels[2].mass,
        ];
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(grid.n());
        let ifft = planner.plan_fft_inverse(grid.n());
        Ok(Self { grid, config, potentials: sampled, masses, fft, ifft })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn couplings_at(&self, t: f64) -> Result<(f64, f64), SplitOpError> {
        match &self.config.drive {
            Some(d) => Ok(eval_couplings(&d.scheme, &d.params, t - d.center)?),
            None => Ok((0.0, 0.0)),
        }
    }

    fn kinetic_multipliers(&self, h: f64) -> [Vec<C64>; 3] {
        let mut out: [Vec<C64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = (0..self.grid.n())
                .map(|i| {
                    let k = self.grid.k(i);
                    C64::from_polar(1.0, -self.config.hbar * k * k * h / (2.0 * self.masses[c]))
                })
                .collect();
        }
        out
    }

    /// Advance `state` by one step of size `config.dt` starting at time `t`.
    pub fn step(&self, state: &mut Wavepacket, t: f64) -> Result<(), SplitOpError> {
        let kin = self.kinetic_multipliers(self.config.dt);
        self.step_with(state, t, self.config.dt, &kin)
    }

    fn step_with(
        &self,
        state: &mut Wavepacket,
        t: f64,
        h: f64,
        kinetic: &[Vec<C64>; 3],
    ) -> Result<(), SplitOpError> {
        if state.grid != self.grid {
            return Err(SplitOpError::InvalidParameter(
                "wavepacket grid does not match the propagator grid".into(),
            ));
        }
        // couplings at the step midpoint keep the split second order
        let (l1, l2) = self.couplings_at(t + 0.5 * h)?;
        let tau = h / (2.0 * self.config.hbar);

        self.potential_half_step(state, l1, l2, tau);
        self.kinetic_full_step(state, kinetic);
        self.potential_half_step(state, l1, l2, tau);
        Ok(())
    }

    fn potential_half_step(&self, state: &mut Wavepacket, l1: f64, l2: f64, tau: f64) {
        let [ch0, ch1, ch2] = &mut state.channels;
        apply_potential_chunks(
            ch0,
            ch1,
            ch2,
            &self.potentials[0],
            &self.potentials[1],
            &self.potentials[2],
            l1,
            l2,
            tau,
        );
    }

    fn kinetic_full_step(&self, state: &mut Wavepacket, kinetic: &[Vec<C64>; 3]) {
        let inv_n = 1.0 / self.grid.n() as f64;
        for (ch, kin) in state.channels.iter_mut().zip(kinetic) {
            self.fft.process(ch);
            for (z, m) in ch.iter_mut().zip(kin) {
                *z *= m;
            }
            self.ifft.process(ch);
            for z in ch.iter_mut() {
                *z *= inv_n;
            }
        }
    }

    /// Evolve from `t0` to `t1` in uniform steps of ≈`config.dt`, recording
    /// observables every `stride` steps (and always at both endpoints).
    ///
    /// Fails with [`SplitOpError::PacketClipped`] if the boundary density
    /// exceeds 1e−8 of the norm at any recorded sample.
    pub fn evolve(
        &self,
        state: &mut Wavepacket,
        t0: f64,
        t1: f64,
        stride: usize,
    ) -> Result<EvolveTrace, SplitOpError> {
        if !t0.is_finite() || !t1.is_finite() || t1 <= t0 {
            return Err(SplitOpError::InvalidParameter(format!(
                "need t1 > t0, got [{t0}, {t1}]"
            )));
        }
        let stride = stride.max(1);
        let n_steps = (((t1 - t0) / self.config.dt).round() as usize).max(1);
        let h = (t1 - t0) / n_steps as f64;
        let kinetic = self.kinetic_multipliers(h);

        let mut trace = EvolveTrace::default();
        self.record(state, t0, &mut trace)?;
        for step in 0..n_steps {
            let t = t0 + step as f64 * h;
            self.step_with(state, t, h, &kinetic)?;
            let done = step + 1 == n_steps;
            if (step + 1) % stride == 0 || done {
                self.record(state, t0 + (step + 1) as f64 * h, &mut trace)?;
            }
        }
        Ok(trace)
    }

    fn record(
        &self,
        state: &Wavepacket,
        t: f64,
        trace: &mut EvolveTrace,
    ) -> Result<(), SplitOpError> {
        let total = state.total_norm();
        let edge = state.boundary_density() / total;
        if edge > 1e-8 {
            return Err(SplitOpError::PacketClipped { density: edge });
        }
        trace.rows.push(TraceRow {
            t,
            norms: [state.channel_norm(0), state.channel_norm(1), state.channel_norm(2)],
            mean_x: [state.mean_x(0), state.mean_x(1), state.mean_x(2)],
            mean_p: [
                state.mean_p(0, self.config.hbar),
                state.mean_p(1, self.config.hbar),
                state.mean_p(2, self.config.hbar),
            ],
            width_x: [state.width_x(0), state.width_x(1), state.width_x(2)],
            total_norm: total,
        });
        Ok(())
    }
}

/// One-shot step: build a propagator for this grid and apply a single step.
pub fn split_step(
    state: &mut Wavepacket,
    t: f64,
    config: &SplitOpConfig,
    potentials: &ChannelPotentials,
) -> Result<(), SplitOpError> {
    SplitOperator::new(state.grid, config.clone(), potentials)?.step(state, t)
}

/// One-shot evolution over [t0, t1]; see [`SplitOperator::evolve`].
pub fn evolve(
    state: &mut Wavepacket,
    t0: f64,
    t1: f64,
    config: &SplitOpConfig,
    potentials: &ChannelPotentials,
    stride: usize,
) -> Result<EvolveTrace, SplitOpError> {
    SplitOperator::new(state.grid, config.clone(), potentials)?.evolve(state, t0, t1, stride)
}

/// Phase of one channel against a reference field: arg⟨ref|ψ_channel⟩ in
/// (−π, π]. Ill-defined (error) when the overlap magnitude is below 0.5.
pub fn channel_phase(
    state: &Wavepacket,
    channel: usize,
    reference: &[C64],
) -> Result<f64, SplitOpError> {
    if reference.len() != state.grid.n() {
        return Err(SplitOpError::InvalidParameter(
            "reference length does not match the grid".into(),
        ));
    }
    let overlap: C64 = reference
        .iter()
        .zip(state.channel(channel))
        .map(|(r, z)| r.conj() * z)
        .sum::<C64>()
        * state.grid.dx();
    if overlap.norm() < 0.5 {
        return Err(SplitOpError::PhaseIllDefined { overlap: overlap.norm() });
    }
    Ok(overlap.arg())
}

// ---------------------------------------------------------------------------
// per-point coupled potential step
// ---------------------------------------------------------------------------

const PAR_CHUNK: usize = 64;

#[allow(clippy::too_many_arguments)]
fn apply_potential_chunks(
    ch0: &mut [C64],
    ch1: &mut [C64],
    ch2: &mut [C64],
    v0: &[f64],
    v1: &[f64],
    v2: &[f64],
    l1: f64,
    l2: f64,
    tau: f64,
) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ch0.par_chunks_mut(PAR_CHUNK)
            .zip(ch1.par_chunks_mut(PAR_CHUNK))
            .zip(ch2.par_chunks_mut(PAR_CHUNK))
            .zip(
                v0.par_chunks(PAR_CHUNK)
                    .zip(v1.par_chunks(PAR_CHUNK))
                    .zip(v2.par_chunks(PAR_CHUNK)),
            )
            .for_each(|(((a, b), c), ((pa, pb), pc))| {
                apply_potential_block(a, b, c, pa, pb, pc, l1, l2, tau);
            });
    }
    #[cfg(not(feature = "parallel"))]
    {
        let n = ch0.len();
        let mut start = 0;
        while start < n {
            let end = (start + PAR_CHUNK).min(n);
            apply_potential_block(
                &mut ch0[start..end],
                &mut ch1[start..end],
                &mut ch2[start..end],
                &v0[start..end],
                &v1[start..end],
                &v2[start..end],
                l1,
                l2,
                tau,
            );
            start = end;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn apply_potential_block(
    ch0: &mut [C64],
    ch1: &mut [C64],
    ch2: &mut [C64],
    v0: &[f64],
    v1: &[f64],
    v2: &[f64],
    l1: f64,
    l2: f64,
    tau: f64,
) {
    for i in 0..ch0.len() {
        // W = diag(V₁,V₂,V₃) plus couplings on the (1,2) and (2,3) positions
        let w = [[v0[i], l1, 0.0], [l1, v1[i], l2], [0.0, l2, v2[i]]];
        let (vals, q) = eigh3(w);
        let psi = [ch0[i], ch1[i], ch2[i]];
        // y = Qᵀψ; y_k ← e^{−i·E_k·τ}·y_k; ψ ← Q·y
        let mut y = [C64::new(0.0, 0.0); 3];
        for k in 0..3 {
            y[k] = q[0][k] * psi[0] + q[1][k] * psi[1] + q[2][k] * psi[2];
            y[k] *= C64::from_polar(1.0, -vals[k] * tau);
        }
        ch0[i] = q[0][0] * y[0] + q[0][1] * y[1] + q[0][2] * y[2];
        ch1[i] = q[1][0] * y[0] + q[1][1] * y[1] + q[1][2] * y[2];
        ch2[i] = q[2][0] * y[0] + q[2][1] * y[1] + q[2][2] * y[2];
    }
}

/// Eigen-decomposition of a 3×3 real-symmetric matrix by cyclic Jacobi
/// rotations: returns (eigenvalues, eigenvectors as columns).
pub(crate) fn eigh3(a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut m = a;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..30 {
        let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
        if off <= (1e-15 * scale) * (1e-15 * scale) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = m[p][q];
            if apq.abs() <= 1e-300 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for r in 0..3 {
                let (mrp, mrq) = (m[r][p], m[r][q]);
                m[r][p] = c * mrp - s * mrq;
                m[r][q] = s * mrp + c * mrq;
            }
            for rc in 0..3 {
                let (mpc, mqc) = (m[p][rc], m[q][rc]);
                m[p][rc] = c * mpc - s * mqc;
                m[q][rc] = s * mpc + c * mqc;
            }
            for r in 0..3 {
                let (vrp, vrq) = (v[r][p], v[r][q]);
                v[r][p] = c * vrp - s * vrq;
                v[r][q] = s * vrp + c * vrq;
            }
        }
    }
    ([m[0][0], m[1][1], m[2][2]], v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagate::{self, IntegratorConfig, LevelModel, ModelKind};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn grid() -> Grid1D {
        Grid1D::new(-20.0, 20.0, 512).unwrap()
    }

    fn free_config(dt: f64) -> SplitOpConfig {
        SplitOpConfig::new(dt, 1.0, None).unwrap()
    }

    fn ci_drive(at: f64) -> Drive {
        Drive {
            scheme: PulseScheme::CounterintuitiveSech,
            params: PulseParams::from_area_product(at).unwrap(),
            center: 0.0,
        }
    }

    fn distance(a: &Wavepacket, b: &Wavepacket) -> f64 {
        let dx = a.grid().dx();
        let mut acc = 0.0;
        for c in 0..3 {
            for (za, zb) in a.channel(c).iter().zip(b.channel(c)) {
                acc += (za - zb).norm_sqr();
            }
        }
        (acc * dx).sqrt()
    }

    #[test]
    fn eigh3_reconstructs_random_symmetric_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let mut w = [[0.0f64; 3]; 3];
            for r in 0..3 {
                for c in r..3 {
                    let x = rng.random_range(-5.0..5.0);
                    w[r][c] = x;
                    w[c][r] = x;
                }
            }
            let (vals, q) = eigh3(w);
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|r| q[r][i] * q[r][j]).sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expected).abs() < 1e-13);
                }
            }
            for r in 0..3 {
                for c in 0..3 {
                    let rec: f64 = (0..3).map(|k| q[r][k] * vals[k] * q[c][k]).sum();
                    assert!((rec - w[r][c]).abs() < 1e-12, "({r},{c})");
                }
            }
        }
    }

    #[test]
    fn grid_k_layout() {
        let g = Grid1D::new(0.0, 8.0, 16).unwrap();
        let dk = TAU / 8.0;
        assert_eq!(g.k(0), 0.0);
        assert_abs_diff_eq!(g.k(1), dk, epsilon = 1e-15);
        assert_abs_diff_eq!(g.k(7), 7.0 * dk, epsilon = 1e-15);
        assert_abs_diff_eq!(g.k(8), -8.0 * dk, epsilon = 1e-15); // Nyquist, negative branch
        assert_abs_diff_eq!(g.k(15), -dk, epsilon = 1e-15);
        assert!(Grid1D::new(0.0, 1.0, 8).is_err());
        assert!(Grid1D::new(1.0, 0.0, 32).is_err());
    }

    #[test]
    fn gaussian_moments_match_request() {
        let g = grid();
        let packet = make_gaussian(&g, 0.5, 2.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(packet.total_norm(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(packet.mean_x(0), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(packet.mean_p(0, 1.0), 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(packet.width_x(0), 1.0, epsilon = 1e-6);
        // minimum uncertainty: Δx·Δp = ħ/2
        let product = packet.width_x(0) * packet.width_p(0, 1.0);
        assert_abs_diff_eq!(product, 0.5, epsilon = 1e-6);
        assert_eq!(packet.channel_norm(1), 0.0);
        assert_eq!(packet.channel_norm(2), 0.0);
    }

    #[test]
    fn gaussian_construction_guards() {
        let g = grid();
        assert!(matches!(
            make_gaussian(&g, 18.0, 0.0, 1.0, 1.0),
            Err(SplitOpError::InvalidParameter(_))
        ));
        assert!(matches!(
            make_gaussian(&g, 0.0, 0.0, 0.05, 1.0),
            Err(SplitOpError::InvalidParameter(_))
        ));
        // wide packet with tails reaching the boundary
        match make_gaussian(&g, 0.0, 0.0, 4.0, 1.0) {
            Err(SplitOpError::PacketClipped { density }) => assert!(density > 1e-10),
            other => panic!("expected clipping, got {other:?}"),
        }
    }

    #[test]
    fn free_step_keeps_spectrum_magnitude_and_norm() {
        let g = grid();
        let mut packet = make_gaussian(&g, 0.0, 1.0, 1.0, 1.0).unwrap();
        let before = packet.clone();
        let cfg = free_config(0.01);
        split_step(&mut packet, 0.0, &cfg, &ChannelPotentials::free(1.0)).unwrap();
        assert_abs_diff_eq!(packet.total_norm(), 1.0, epsilon = 1e-13);
        // kinetic-only phase: |ψ̃(k)| unchanged
        let mut fa = before.channel(0).to_vec();
        let mut fb = packet.channel(0).to_vec();
        FftPlanner::new().plan_fft_forward(g.n()).process(&mut fa);
        FftPlanner::new().plan_fft_forward(g.n()).process(&mut fb);
        for (a, b) in fa.iter().zip(&fb) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn per_step_unitarity_with_couplings() {
        let g = grid();
        let mut packet = make_gaussian(&g, 0.0, 0.0, 1.0, 1.0).unwrap();
        let cfg = SplitOpConfig::new(1e-3, 1.0, Some(ci_drive(2.0))).unwrap();
        let op = SplitOperator::new(g, cfg, &ChannelPotentials::identical_harmonic(1.0, 1.0, 0.0))
            .unwrap();
        for i in 0..20 {
            op.step(&mut packet, -0.5 + 1e-3 * i as f64).unwrap();
            assert!((packet.total_norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn coherent_state_tracks_classical_motion() {
        // displaced ground-width packet in a harmonic well: ⟨x⟩ = x₀·cos(ωt)
        let g = grid();
        let (mass, omega, x0) = (1.0f64, 1.0f64, 2.0f64);
        let width = (1.0 / (2.0 * mass * omega)).sqrt();
        let mut packet = make_gaussian(&g, x0, 0.0, width, 1.0).unwrap();
        let period = TAU / omega;
        let dt = period / 2000.0;
        let cfg = free_config(dt);
        let pots = ChannelPotentials::identical_harmonic(mass, omega, 0.0);
        let trace = evolve(&mut packet, 0.0, period, &cfg, &pots, 100).unwrap();
        for row in &trace.rows {
            let expected = x0 * (omega * row.t).cos();
            assert!(
                (row.mean_x[0] - expected).abs() <= 1e-3 * x0,
                "t={}: ⟨x⟩={} vs {}",
                row.t,
                row.mean_x[0],
                expected
            );
            assert!((row.total_norm - 1.0).abs() <= 1e-10);
        }
        let last = trace.final_row();
        assert_abs_diff_eq!(last.mean_x[0], x0, epsilon = 1e-3 * x0);
    }

    #[test]
    fn free_gaussian_spreading_matches_closed_form() {
        // Δx(t) = Δx₀·√(1 + (ħt/2mΔx₀²)²)
        let g = grid();
        let mut packet = make_gaussian(&g, 0.0, 0.0, 1.0, 1.0).unwrap();
        let cfg = free_config(1e-3);
        let trace =
            evolve(&mut packet, 0.0, 3.0, &cfg, &ChannelPotentials::free(1.0), 500).unwrap();
        for row in &trace.rows {
            let expected = (1.0 + (row.t / 2.0).powi(2)).sqrt();
            assert!(
                ((row.width_x[0] - expected) / expected).abs() <= 1e-4,
                "t={}: Δx={} vs {}",
                row.t,
                row.width_x[0],
                expected
            );
        }
        assert_abs_diff_eq!(trace.final_row().width_x[0], 1.8027756377319946, epsilon = 2e-4);
    }

    #[test]
    fn zero_coupling_keeps_channel_populations() {
        let g = grid();
        let mut packet = make_gaussian(&g, 0.0, 0.0, 1.0, 1.0).unwrap();
        let cfg = free_config(1e-2);
        let pots = ChannelPotentials::identical_harmonic(1.0, 0.7, 0.3);
        let trace = evolve(&mut packet, 0.0, 4.0, &cfg, &pots, 50).unwrap();
        for row in &trace.rows {
            assert!((row.norms[0] - 1.0).abs() < 1e-10);
            assert!(row.norms[1].abs() < 1e-15 && row.norms[2].abs() < 1e-15);
        }
    }

    #[test]
    fn dt_halving_is_second_order() {
        // Richardson against a dt/8 reference over a fixed window with both
        // potentials and couplings active.
        let g = Grid1D::new(-15.0, 15.0, 256).unwrap();
        let pots = ChannelPotentials::identical_harmonic(1.0, 1.0, 0.0);
        let run = |dt: f64| -> Wavepacket {
            let mut packet = make_gaussian(&g, 0.0, 0.0, 1.0, 1.0).unwrap();
            let cfg = SplitOpConfig::new(dt, 1.0, Some(ci_drive(1.0))).unwrap();
            let op = SplitOperator::new(g, cfg, &pots).unwrap();
            op.evolve(&mut packet, -2.0, 2.0, usize::MAX).unwrap();
            packet
        };
        let reference = run(0.04 / 8.0);
        let err_full = distance(&run(0.04), &reference);
        let err_half = distance(&run(0.02), &reference);
        let ratio = err_full / err_half;
        assert!((3.5..=4.5).contains(&ratio), "Richardson ratio {ratio}");
    }

    #[test]
    fn channel_populations_match_level_only_dynamics() {
        // identical potentials in every channel: the spatial problem must
        // reproduce the pure three-level populations
        let at = 1.0;
        let g = Grid1D::new(-10.0, 10.0, 128).unwrap();
        let pots = ChannelPotentials::identical_harmonic(1.0, 1.0, 0.0);
        let mut packet = make_gaussian(&g, 0.0, 0.0, 1.0, 1.0).unwrap();
        let cfg = SplitOpConfig::new(1e-3, 1.0, Some(ci_drive(at))).unwrap();
        let op = SplitOperator::new(g, cfg, &pots).unwrap();
        let trace = op.evolve(&mut packet, -15.0, 15.0, 5000).unwrap();

        let params = PulseParams::from_area_product(at).unwrap();
        let model =
            LevelModel::new(ModelKind::ThreeLevel, PulseScheme::CounterintuitiveSech, params)
                .unwrap();
        let (pops, _) =
            propagate::final_populations(&model, &IntegratorConfig::sech_window(&params)).unwrap();
        let last = trace.final_row();
        for c in 0..3 {
            assert!(
                (last.norms[c] - pops[c]).abs() <= 1e-3,
                "channel {c}: {} vs {}",
                last.norms[c],
                pops[c]
            );
        }
    }

    #[test]
    fn reduced_amplitudes_keep_reality_pattern() {
        // Overlap of each channel against the couplings-off reference plays
        // the role of the level amplitudes; the closed-form reality pattern
        // must survive in that interaction-frame sense.
        let g = Grid1D::new(-10.0, 10.0, 128).unwrap();
        let pots = ChannelPotentials::identical_harmonic(1.0, 1.0, 0.0);
        let cfg_on = SplitOpConfig::new(2e-3, 1.0, Some(ci_drive(1.0))).unwrap();
        let cfg_off = SplitOpConfig::new(2e-3, 1.0, None).unwrap();
        let op_on = SplitOperator::new(g, cfg_on, &pots).unwrap();
        let op_off = SplitOperator::new(g, cfg_off, &pots).unwrap();
        let mut driven = make_gaussian(&g, 0.0, 0.0, 1.0, 1.0).unwrap();
        let mut reference = driven.clone();
        let dx = g.dx();
        let steps = 15000usize;
        let h = 30.0 / steps as f64;
        for step in 0..steps {
            let t = -15.0 + step as f64 * h;
            op_on.step(&mut driven, t).unwrap();
            op_off.step(&mut reference, t).unwrap();
            if (step + 1) % 1500 == 0 {
                let beta: Vec<C64> = (0..3)
                    .map(|c| {
                        reference
                            .channel(0)
                            .iter()
                            .zip(driven.channel(c))
                            .map(|(r, z)| r.conj() * z)
                            .sum::<C64>()
                            * dx
                    })
                    .collect();
                assert!(beta[0].im.abs() <= 1e-6, "Im β₁ = {:e}", beta[0].im);
                assert!(beta[1].re.abs() <= 1e-6, "Re β₂ = {:e}", beta[1].re);
                assert!(beta[2].im.abs() <= 1e-6, "Im β₃ = {:e}", beta[2].im);
            }
        }
    }

    #[test]
    fn channel_phase_spot_values() {
        let g = grid();
        let packet = make_gaussian(&g, 0.0, 0.0, 1.0, 1.0).unwrap();
        let reference: Vec<C64> = packet.channel(0).to_vec();
        assert_eq!(channel_phase(&packet, 0, &reference).unwrap(), 0.0);
        let flipped: Vec<C64> = reference.iter().map(|z| -z).collect();
        let phase = channel_phase(&packet, 0, &flipped).unwrap();
        assert_abs_diff_eq!(phase.abs(), std::f64::consts::PI, epsilon = 1e-12);
        // empty channel: overlap vanishes
        assert!(matches!(
            channel_phase(&packet, 1, &reference),
            Err(SplitOpError::PhaseIllDefined { .. })
        ));
    }

    #[test]
    fn moving_packet_eventually_clips() {
        let g = Grid1D::new(-12.0, 12.0, 128).unwrap();
        let mut packet = make_gaussian(&g, -5.0, 3.0, 1.0, 1.0).unwrap();
        let cfg = free_config(1e-2);
        match evolve(&mut packet, 0.0, 8.0, &cfg, &ChannelPotentials::free(1.0), 10) {
            Err(SplitOpError::PacketClipped { .. }) => {}
            other => panic!("expected clipping, got {other:?}"),
        }
    }

    #[test]
    fn snapshot_round_trips() {
        let g = Grid1D::new(-5.0, 5.0, 64).unwrap();
        let mut packet = make_gaussian(&g, 0.0, 1.0, 0.6, 1.0).unwrap();
        let cfg = SplitOpConfig::new(1e-2, 1.0, Some(ci_drive(1.0))).unwrap();
        let pots = ChannelPotentials::identical_harmonic(1.0, 0.5, 0.0);
        for i in 0..5 {
            split_step(&mut packet, -0.2 + 1e-2 * i as f64, &cfg, &pots).unwrap();
        }
        let mut buf = Vec::new();
        packet.write_snapshot(&mut buf).unwrap();
        let back = Wavepacket::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, packet);

        let back = Wavepacket::from_json(&packet.to_json()).unwrap();
        assert_eq!(back, packet);
    }

    #[test]
    fn trace_csv_round_trips() {
        let g = grid();
        let mut packet = make_gaussian(&g, 0.0, 0.0, 1.0, 1.0).unwrap();
        let cfg = free_config(1e-2);
        let trace =
            evolve(&mut packet, 0.0, 1.0, &cfg, &ChannelPotentials::free(1.0), 20).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let parsed = EvolveTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(parsed, trace);
    }
}
