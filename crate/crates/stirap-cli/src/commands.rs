//! Subcommand implementations. Artifacts (CSV/JSON) are written with
//! full-precision numbers; identical arguments produce byte-identical files.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use stirap::berry::{self, Band, ClosedPath};
use stirap::experiments::{self, SweepMode, VerifyScheme};
use stirap::propagate::{self, IntegratorConfig, LevelModel, ModelKind};
use stirap::pulses::{adiabatic_frame, eval_couplings, PulseParams, PulseScheme};
use stirap::splitop::{
    make_gaussian, ChannelPotentials, Drive, Grid1D, SplitOpConfig, SplitOperator,
};
use stirap::AmplitudeVector;

use crate::config::{resolve, resolve_opt, FileConfig};
use crate::errors::CliError;

#[derive(Parser)]
#[command(
    name = "stirap",
    version,
    about = "Adiabatic three-level (STIRAP) simulations, sweeps, wavepackets, and Berry-phase geometry"
)]
pub struct Cli {
    /// Optional key=value config file; explicit flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Tabulate couplings and adiabatic-frame quantities over a time window
    Pulses(PulsesArgs),
    /// Integrate a level model and write the trajectory
    Simulate(SimulateArgs),
    /// Sweep final populations over the area product
    Sweep(SweepArgs),
    /// Monopole flux over a sphere, or the Berry phase of a closed loop
    Berry(BerryArgs),
    /// Split-operator wavepacket evolution with optional STIRAP drive
    Wavepacket(WavepacketArgs),
    /// Check the numerical propagator against the closed forms
    Verify(VerifyArgs),
    /// Two consecutive STIRAP processes (counterintuitive, then intuitive)
    DoubleStirap(DoubleStirapArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Pulses(a) => cmd_pulses(a, &cfg),
        Command::Simulate(a) => cmd_simulate(a, &cfg),
        Command::Sweep(a) => cmd_sweep(a, &cfg),
        Command::Berry(a) => cmd_berry(a, &cfg),
        Command::Wavepacket(a) => cmd_wavepacket(a, &cfg),
        Command::Verify(a) => cmd_verify(a, &cfg),
        Command::DoubleStirap(a) => cmd_double_stirap(a, &cfg),
    }
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Json,
}

fn parse_format(token: &str) -> Result<OutputFormat, CliError> {
    match token {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(CliError::validation(format!("format must be csv or json, got '{other}'"))),
    }
}

fn parse_band(token: &str) -> Result<Band, CliError> {
    match token {
        "plus" => Ok(Band::Plus),
        "minus" => Ok(Band::Minus),
        other => Err(CliError::validation(format!("band must be plus or minus, got '{other}'"))),
    }
}

fn parse_mesh(token: &str) -> Result<(usize, usize), CliError> {
    let (a, b) = token
        .split_once('x')
        .ok_or_else(|| CliError::validation(format!("mesh must look like 100x200, got '{token}'")))?;
    let n_theta = a
        .parse()
        .map_err(|_| CliError::validation(format!("bad mesh theta count '{a}'")))?;
    let n_phi =
        b.parse().map_err(|_| CliError::validation(format!("bad mesh phi count '{b}'")))?;
    Ok((n_theta, n_phi))
}

fn write_artifact(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)?;
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write_artifact(path, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

/// A (scheme-independent) amplitude/width pair from --a/--t/--at, with the
/// area product taking precedence through --at.
fn resolve_pulse_params(
    a: Option<f64>,
    t: Option<f64>,
    at: Option<f64>,
    cfg: &FileConfig,
) -> Result<PulseParams, CliError> {
    let width = resolve(t, cfg, "t", 1.0)?;
    let a = resolve_opt(a, cfg, "a")?;
    let at = resolve_opt(at, cfg, "at")?;
    let params = match (a, at) {
        (Some(_), Some(_)) => {
            return Err(CliError::validation("--a and --at are mutually exclusive".into()))
        }
        (Some(a), None) => PulseParams::new(a, width),
        (None, Some(at)) => PulseParams::new(at / width, width),
        (None, None) => PulseParams::new(1.0 / width, width),
    };
    Ok(params?)
}

fn resolve_scheme(flag: Option<String>, cfg: &FileConfig) -> Result<PulseScheme, CliError> {
    let token = resolve(flag, cfg, "scheme", "ci-sech".to_string())?;
    Ok(PulseScheme::from_token(&token)?)
}

// ---------------------------------------------------------------------------
// pulses
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct PulsesArgs {
    /// Scheme token: ci-sech, in-sech, exp-pair
    #[arg(long)]
    scheme: Option<String>,
    /// Coupling amplitude A (rad per unit time)
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Pulse width T (unit time)
    #[arg(long, allow_negative_numbers = true)]
    t: Option<f64>,
    /// Area product A·T (alternative to --a)
    #[arg(long, allow_negative_numbers = true)]
    at: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    /// Number of sample rows
    #[arg(long)]
    samples: Option<usize>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
}

fn cmd_pulses(args: PulsesArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let scheme = resolve_scheme(args.scheme, cfg)?;
    let params = resolve_pulse_params(args.a, args.t, args.at, cfg)?;
    let t_min = resolve(args.t_min, cfg, "t-min", -15.0 * params.width())?;
    let t_max = resolve(args.t_max, cfg, "t-max", 15.0 * params.width())?;
    let samples = resolve(args.samples, cfg, "samples", 601usize)?;
    let format = parse_format(&resolve(args.format, cfg, "format", "csv".to_string())?)?;
    if samples < 2 || t_min >= t_max {
        return Err(CliError::validation("need samples ≥ 2 and t-min < t-max".into()));
    }

    let step = (t_max - t_min) / (samples - 1) as f64;
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = t_min + i as f64 * step;
        let (l1, l2) = eval_couplings(&scheme, &params, t)?;
        let frame = adiabatic_frame(&scheme, &params, t)?;
        rows.push((t, l1, l2, frame));
    }

    let bytes = match format {
        OutputFormat::Csv => {
            let mut text = String::from("t,lambda1,lambda2,r2,phi,phi_dot\n");
            for (t, l1, l2, f) in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    g17(*t),
                    g17(*l1),
                    g17(*l2),
                    g17(f.r2),
                    g17(f.phi),
                    g17(f.phi_dot)
                ));
            }
            text.into_bytes()
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|(t, l1, l2, f)| {
                    serde_json::json!({
                        "t": t, "lambda1": l1, "lambda2": l2,
                        "r2": f.r2, "phi": f.phi, "phi_dot": f.phi_dot,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "schema": "pulses.v1",
                "scheme": scheme.token(),
                "a": params.amplitude(),
                "t": params.width(),
                "rows": rows,
            });
            let mut bytes = serde_json::to_string_pretty(&doc).expect("serializes").into_bytes();
            bytes.push(b'\n');
            bytes
        }
    };
    emit(args.out.as_deref(), &bytes)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SimulateArgs {
    /// Level model: three-level, two-level, two-level-adiabatic, hadamard
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    at: Option<f64>,
    /// Hadamard coefficient on |10⟩ (defaults to 1/√2)
    #[arg(long, allow_negative_numbers = true)]
    c10: Option<f64>,
    /// Hadamard coefficient on |11⟩ (defaults to 1/√2)
    #[arg(long, allow_negative_numbers = true)]
    c11: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    norm_tol: Option<f64>,
    /// Trajectory output path (summary only when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

fn cmd_simulate(args: SimulateArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let scheme = resolve_scheme(args.scheme, cfg)?;
    let params = resolve_pulse_params(args.a, args.t, args.at, cfg)?;
    let model_token = resolve(args.model, cfg, "model", "three-level".to_string())?;
    let kind = match model_token.as_str() {
        "two-level" => ModelKind::TwoLevelBare,
        "two-level-adiabatic" => ModelKind::TwoLevelAdiabatic,
        "three-level" => ModelKind::ThreeLevel,
        "hadamard" => ModelKind::Hadamard {
            c10: resolve(args.c10, cfg, "c10", FRAC_1_SQRT_2)?,
            c11: resolve(args.c11, cfg, "c11", FRAC_1_SQRT_2)?,
        },
        other => {
            return Err(CliError::validation(format!("unknown model '{other}'")));
        }
    };
    let defaults = match scheme {
        PulseScheme::ExponentialPair => IntegratorConfig::exponential_window(&params),
        _ => IntegratorConfig::sech_window(&params),
    };
    let run_config = IntegratorConfig::new(
        resolve(args.t_min, cfg, "t-min", defaults.t_min())?,
        resolve(args.t_max, cfg, "t-max", defaults.t_max())?,
        resolve(args.dt, cfg, "dt", defaults.dt())?,
        resolve(args.norm_tol, cfg, "norm-tol", defaults.norm_tolerance())?,
    )?;
    let format = parse_format(&resolve(args.format, cfg, "format", "csv".to_string())?)?;

    let model = LevelModel::new(kind, scheme, params)?;
    let initial = match kind {
        ModelKind::Hadamard { c10, c11 } => AmplitudeVector::new(
            vec![
                num_complex::Complex64::new(c10, 0.0),
                num_complex::Complex64::new(c11, 0.0),
                num_complex::Complex64::new(0.0, 0.0),
                num_complex::Complex64::new(0.0, 0.0),
            ],
            1e-10,
        )
        .map_err(|e| CliError::validation(e.to_string()))?,
        _ => AmplitudeVector::basis_state(kind.dim(), 0),
    };
    let series = propagate::integrate(&model, &initial, &run_config)?;

    if let Some(path) = &args.out {
        match format {
            OutputFormat::Csv => {
                let mut bytes = Vec::new();
                series.write_csv(&mut bytes)?;
                write_artifact(path, &bytes)?;
            }
            OutputFormat::Json => {
                let mut text = series.to_json();
                text.push('\n');
                write_artifact(path, text.as_bytes())?;
            }
        }
    }

    let pops = series.final_state().populations();
    let pops: Vec<String> = pops.iter().map(|p| format!("{p:.6}")).collect();
    println!(
        "final populations: [{}]  norm drift: {:.3e}",
        pops.join(", "),
        series.norm_drift()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SweepArgs {
    /// Closed-form family: ci, in, exp
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    at_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    at_max: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Also integrate each row numerically and record the absolute error
    #[arg(long)]
    numeric: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

fn cmd_sweep(args: SweepArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let scheme = VerifyScheme::from_token(&resolve(args.scheme, cfg, "scheme", "ci".to_string())?)?;
    let at_min = resolve(args.at_min, cfg, "at-min", 0.5)?;
    let at_max = resolve(args.at_max, cfg, "at-max", 5.0)?;
    let samples = resolve(args.samples, cfg, "samples", 10usize)?;
    let numeric = args.numeric || cfg.get::<bool>("numeric")?.unwrap_or(false);
    let format = parse_format(&resolve(args.format, cfg, "format", "csv".to_string())?)?;

    let mode = if numeric { SweepMode::WithNumeric } else { SweepMode::AnalyticOnly };
    let table = experiments::sweep(scheme, at_min, at_max, samples, mode)?;
    let bytes = match format {
        OutputFormat::Csv => {
            let mut bytes = Vec::new();
            table.write_csv(&mut bytes)?;
            bytes
        }
        OutputFormat::Json => {
            let mut text = table.to_json();
            text.push('\n');
            text.into_bytes()
        }
    };
    emit(args.out.as_deref(), &bytes)
}

// ---------------------------------------------------------------------------
// berry
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct BerryArgs {
    /// Flux quadrature over a sphere: sphere:<radius>
    #[arg(long)]
    flux: Option<String>,
    /// Quadrature mesh, e.g. 100x200
    #[arg(long)]
    mesh: Option<String>,
    /// Closed loop: equator, latitude:<theta>, or csv:<path>
    #[arg(long = "loop")]
    loop_spec: Option<String>,
    /// Points on a generated loop
    #[arg(long)]
    points: Option<usize>,
    /// Radius of a generated loop
    #[arg(long, allow_negative_numbers = true)]
    radius: Option<f64>,
    /// Traversal orientation: 1 or -1
    #[arg(long, allow_negative_numbers = true)]
    orientation: Option<i8>,
    /// Energy band: plus or minus
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

fn cmd_berry(args: BerryArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let band = parse_band(&resolve(args.band, cfg, "band", "plus".to_string())?)?;
    let format = parse_format(&resolve(args.format, cfg, "format", "csv".to_string())?)?;
    let flux_spec = resolve_opt(args.flux, cfg, "flux")?;
    let loop_spec = resolve_opt(args.loop_spec, cfg, "loop")?;

    match (flux_spec, loop_spec) {
        (Some(_), Some(_)) => {
            Err(CliError::validation("--flux and --loop are mutually exclusive".into()))
        }
        (None, None) => Err(CliError::validation("need one of --flux or --loop".into())),
        (Some(spec), None) => {
            let radius = spec
                .strip_prefix("sphere:")
                .ok_or_else(|| {
                    CliError::validation(format!("flux spec must be sphere:<radius>, got '{spec}'"))
                })?
                .parse::<f64>()
                .map_err(|e| CliError::validation(format!("bad sphere radius: {e}")))?;
            let mesh = parse_mesh(&resolve(args.mesh, cfg, "mesh", "100x200".to_string())?)?;
            let flux = berry::sphere_flux(radius, mesh, band)?;
            let charge = flux / (4.0 * std::f64::consts::PI);
            println!(
                "flux = {flux:.6} rad  charge = {charge:.6}  (band {}, radius {radius}, mesh {}x{})",
                band.token(),
                mesh.0,
                mesh.1
            );
            if let Some(path) = &args.out {
                let bytes = match format {
                    OutputFormat::Csv => format!(
                        "# schema: berry-flux.v1\nband,radius,n_theta,n_phi,flux,charge\n{},{},{},{},{},{}\n",
                        band.token(),
                        g17(radius),
                        mesh.0,
                        mesh.1,
                        g17(flux),
                        g17(charge)
                    )
                    .into_bytes(),
                    OutputFormat::Json => {
                        let doc = serde_json::json!({
                            "schema": "berry-flux.v1",
                            "band": band.token(),
                            "radius": radius,
                            "mesh": [mesh.0, mesh.1],
                            "flux": flux,
                            "charge": charge,
                        });
                        let mut b = serde_json::to_string_pretty(&doc).expect("serializes").into_bytes();
                        b.push(b'\n');
                        b
                    }
                };
                write_artifact(path, &bytes)?;
            }
            Ok(())
        }
        (None, Some(spec)) => {
            let points = resolve(args.points, cfg, "points", 1000usize)?;
            let radius = resolve(args.radius, cfg, "radius", 1.0)?;
            let orientation = resolve(args.orientation, cfg, "orientation", 1i8)?;
            let path = if spec == "equator" {
                ClosedPath::equator(radius, points, orientation)?
            } else if let Some(theta) = spec.strip_prefix("latitude:") {
                let theta = theta
                    .parse::<f64>()
                    .map_err(|e| CliError::validation(format!("bad latitude angle: {e}")))?;
                ClosedPath::latitude(theta, radius, points, orientation)?
            } else if let Some(file) = spec.strip_prefix("csv:") {
                let text = std::fs::read_to_string(file)?;
                ClosedPath::from_csv_str(&text, orientation)?
            } else {
                return Err(CliError::validation(format!(
                    "loop spec must be equator, latitude:<theta>, or csv:<path>, got '{spec}'"
                )));
            };
            let res = berry::loop_phase(&path, band)?;
            println!(
                "loop phase = {:.6} rad  solid angle = {:.6} sr  flux = {:.6} rad  charge = {:.6}  (band {})",
                res.loop_phase,
                res.solid_angle,
                res.flux,
                res.charge,
                band.token()
            );
            if let Some(out) = &args.out {
                let bytes = match format {
                    OutputFormat::Csv => format!(
                        "# schema: berry-loop.v1\nband,loop_phase,solid_angle,flux,charge\n{},{},{},{},{}\n",
                        band.token(),
                        g17(res.loop_phase),
                        g17(res.solid_angle),
                        g17(res.flux),
                        g17(res.charge)
                    )
                    .into_bytes(),
                    OutputFormat::Json => {
                        let doc = serde_json::json!({
                            "schema": "berry-loop.v1",
                            "band": band.token(),
                            "loop_phase": res.loop_phase,
                            "solid_angle": res.solid_angle,
                            "flux": res.flux,
                            "charge": res.charge,
                        });
                        let mut b = serde_json::to_string_pretty(&doc).expect("serializes").into_bytes();
                        b.push(b'\n');
                        b
                    }
                };
                write_artifact(out, &bytes)?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// wavepacket
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct WavepacketArgs {
    #[arg(long, allow_negative_numbers = true)]
    x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x_max: Option<f64>,
    /// Grid points
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    x_mean: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p_mean: Option<f64>,
    /// Initial packet width Δx
    #[arg(long, allow_negative_numbers = true)]
    width: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mass: Option<f64>,
    /// Harmonic frequency of all three channels (0 = free)
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    /// Harmonic center of all three channels
    #[arg(long, allow_negative_numbers = true)]
    center: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    hbar: Option<f64>,
    /// Area product of the drive; omit for uncoupled channels
    #[arg(long, allow_negative_numbers = true)]
    at: Option<f64>,
    #[arg(long)]
    scheme: Option<String>,
    /// Time offset of the pulse center
    #[arg(long, allow_negative_numbers = true)]
    pulse_center: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Record observables every this many steps
    #[arg(long)]
    stride: Option<usize>,
    /// Observable-trace output path
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// Final-state snapshot path (.json for JSON, anything else binary)
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

fn cmd_wavepacket(args: WavepacketArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let grid = Grid1D::new(
        resolve(args.x_min, cfg, "x-min", -20.0)?,
        resolve(args.x_max, cfg, "x-max", 20.0)?,
        resolve(args.n, cfg, "n", 512usize)?,
    )?;
    let hbar = resolve(args.hbar, cfg, "hbar", 1.0)?;
    let mut packet = make_gaussian(
        &grid,
        resolve(args.x_mean, cfg, "x-mean", 0.0)?,
        resolve(args.p_mean, cfg, "p-mean", 0.0)?,
        resolve(args.width, cfg, "width", 1.0)?,
        hbar,
    )?;
    let potentials = ChannelPotentials::identical_harmonic(
        resolve(args.mass, cfg, "mass", 1.0)?,
        resolve(args.omega, cfg, "omega", 1.0)?,
        resolve(args.center, cfg, "center", 0.0)?,
    );
    let drive = match resolve_opt(args.at, cfg, "at")? {
        None => None,
        Some(at) => {
            let scheme = resolve_scheme(args.scheme, cfg)?;
            Some(Drive {
                scheme,
                params: PulseParams::from_area_product(at)?,
                center: resolve(args.pulse_center, cfg, "pulse-center", 0.0)?,
            })
        }
    };
    let t_min = resolve(args.t_min, cfg, "t-min", -15.0)?;
    let t_max = resolve(args.t_max, cfg, "t-max", 15.0)?;
    let dt = resolve(args.dt, cfg, "dt", 1e-3)?;
    let stride = resolve(args.stride, cfg, "stride", 100usize)?;
    let format = parse_format(&resolve(args.format, cfg, "format", "csv".to_string())?)?;

    let op = SplitOperator::new(grid, SplitOpConfig::new(dt, hbar, drive)?, &potentials)?;
    let trace = op.evolve(&mut packet, t_min, t_max, stride)?;

    if let Some(path) = &args.out {
        let bytes = match format {
            OutputFormat::Csv => {
                let mut bytes = Vec::new();
                trace.write_csv(&mut bytes)?;
                bytes
            }
            OutputFormat::Json => {
                let rows: Vec<serde_json::Value> = trace
                    .rows
                    .iter()
                    .map(|r| {
                        serde_json::json!({
                            "t": r.t,
                            "norms": r.norms,
                            "mean_x": r.mean_x,
                            "mean_p": r.mean_p,
                            "width_x": r.width_x,
                            "total_norm": r.total_norm,
                        })
                    })
                    .collect();
                let doc = serde_json::json!({ "schema": "wavepacket-trace.v1", "rows": rows });
                let mut b = serde_json::to_string_pretty(&doc).expect("serializes").into_bytes();
                b.push(b'\n');
                b
            }
        };
        write_artifact(path, &bytes)?;
    }
    if let Some(path) = &args.snapshot {
        if path.extension().is_some_and(|e| e == "json") {
            let mut text = packet.to_json();
            text.push('\n');
            write_artifact(path, text.as_bytes())?;
        } else {
            let mut bytes = Vec::new();
            packet.write_snapshot(&mut bytes)?;
            write_artifact(path, &bytes)?;
        }
    }

    let last = trace.final_row();
    println!(
        "final channel populations: [{:.6}, {:.6}, {:.6}]  total norm: {:.6}",
        last.norms[0], last.norms[1], last.norms[2], last.total_norm
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct VerifyArgs {
    /// Closed-form family: ci, in, exp
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    at: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Optional JSON report path
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_verify(args: VerifyArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let scheme = VerifyScheme::from_token(&resolve(args.scheme, cfg, "scheme", "ci".to_string())?)?;
    let at = resolve(args.at, cfg, "at", 1.0)?;
    let tol = resolve(args.tol, cfg, "tol", 1e-5)?;
    let report = experiments::verify_analytic(scheme, at, tol)?;
    println!(
        "verify {} at={}: max error {:.3e} (tol {:.1e}) -> {}",
        scheme.token(),
        at,
        report.max_error,
        tol,
        if report.pass { "PASS" } else { "FAIL" }
    );
    if let Some(path) = &args.out {
        let doc = serde_json::json!({
            "schema": "verify.v1",
            "scheme": scheme.token(),
            "at": at,
            "tol": tol,
            "max_error": report.max_error,
            "pass": report.pass,
        });
        let mut bytes = serde_json::to_string_pretty(&doc).expect("serializes").into_bytes();
        bytes.push(b'\n');
        write_artifact(path, &bytes)?;
    }
    if !report.pass {
        return Err(CliError::numerical(format!(
            "verification failed: max error {:.3e} exceeds tolerance {:.1e}",
            report.max_error, tol
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// double-stirap
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct DoubleStirapArgs {
    #[arg(long, allow_negative_numbers = true)]
    at: Option<f64>,
    /// Delay between the two pulse centers (units of T)
    #[arg(long, allow_negative_numbers = true)]
    delay: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

fn cmd_double_stirap(args: DoubleStirapArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let at = resolve(args.at, cfg, "at", 1.0)?;
    let delay = resolve(args.delay, cfg, "delay", 20.0)?;
    let dt = resolve(args.dt, cfg, "dt", 1e-3)?;
    let format = parse_format(&resolve(args.format, cfg, "format", "json".to_string())?)?;
    let report = experiments::double_stirap(at, delay, dt)?;
    println!(
        "return population = {:.6}  b1 phase = {:.6} rad  (at={at}, delay={delay})",
        report.return_population, report.b1_phase
    );
    if let Some(path) = &args.out {
        let bytes = match format {
            OutputFormat::Csv => {
                let mut bytes = Vec::new();
                report.write_csv(&mut bytes)?;
                bytes
            }
            OutputFormat::Json => {
                let mut text = report.to_json();
                text.push('\n');
                text.into_bytes()
            }
        };
        write_artifact(path, &bytes)?;
    }
    Ok(())
}
