use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Continuous-variable qubits on the transverse mode of a laser beam.
#[derive(Debug, Parser)]
#[command(name = "cvq", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print T, phi, N_arb and the Bloch vector of a qubit state.
    State(StateCmd),
    /// Tabulate the Wigner function on an automatically sized grid.
    Wigner(WignerCmd),
    /// Tabulate the position and momentum distributions.
    Marginals(MarginalsCmd),
    /// Gaussian-beam radius, wavefront radius and Gouy phase along z.
    Beam(BeamCmd),
    /// Render a synthetic CCD frame (PGM + JSON sidecar).
    Ccd(CcdCmd),
    /// Analyze a CCD frame: Gaussian fit and, in the momentum plane, the relative phase.
    Fit(FitCmd),
    /// Focal-plane statistics along a path of (T, phi) settings.
    Sweep(SweepCmd),
    /// Mode-keyed link: basis Gram matrix and Monte-Carlo decoding errors.
    Mdm(MdmCmd),
    /// BB84-style key distribution through a graded-index fiber.
    Qkd(QkdCmd),
    /// Regenerate the data behind a figure.
    Reproduce(ReproduceCmd),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrameArgs {
    /// Waist radius (m; accepts mm/um/nm suffixes).
    #[arg(long, default_value = "0.12mm", value_parser = parse_length)]
    pub w0: f64,
    /// Wavelength.
    #[arg(long, default_value = "780nm", value_parser = parse_length)]
    pub lambda: f64,
}

/// Beam separation; the laboratory value alpha = 1.1 when none is given.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DisplacementArgs {
    /// Coherent amplitude, cos(theta_d) = exp(-alpha^2).
    #[arg(long, conflicts_with_all = ["d", "d_over_w0"])]
    pub alpha: Option<f64>,
    /// Beam displacement d.
    #[arg(long, value_parser = parse_length, conflicts_with = "d_over_w0")]
    pub d: Option<f64>,
    /// Beam displacement in units of w0.
    #[arg(long = "d-over-w0")]
    pub d_over_w0: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StateArgs {
    /// Transmittance of the first beam splitter.
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Relative phase (radians, or multiples of pi such as 0.98pi, pi/2).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Typical state: vac, coh, cat_plus, cat_minus, x_minus, x_plus, p_minus, p_plus.
    #[arg(long, conflicts_with_all = ["t", "phi", "bloch"])]
    pub kind: Option<String>,
    /// Bloch vector "x,y,z" (unit length).
    #[arg(long, conflicts_with_all = ["t", "phi"], allow_hyphen_values = true)]
    pub bloch: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StateCmd {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub disp: DisplacementArgs,
    #[command(flatten)]
    pub frame: FrameArgs,
    /// Manifest path.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitsArg {
    Si,
    Nd,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Closed,
    Numeric,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WignerCmd {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub disp: DisplacementArgs,
    #[command(flatten)]
    pub frame: FrameArgs,
    /// Points per axis.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = UnitsArg::Si)]
    pub units: UnitsArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Closed)]
    pub method: MethodArg,
    /// CSV path (columns x,p,W or X,P,W).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MarginalsCmd {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub disp: DisplacementArgs,
    #[command(flatten)]
    pub frame: FrameArgs,
    #[arg(long, default_value_t = 512)]
    pub points: usize,
    /// CSV path (columns x,I_x,p,I_p).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BeamCmd {
    #[command(flatten)]
    pub frame: FrameArgs,
    /// Largest |z|; three Rayleigh ranges when omitted.
    #[arg(long = "z-max", value_parser = parse_length)]
    pub z_max: Option<f64>,
    #[arg(long, default_value_t = 61)]
    pub steps: usize,
    /// CSV path (columns z,w,R,gouy).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneArg {
    Position,
    Momentum,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CcdArgs {
    #[arg(long, value_enum, default_value_t = PlaneArg::Momentum)]
    pub plane: PlaneArg,
    /// Lens focal length.
    #[arg(long, default_value = "145mm", value_parser = parse_length)]
    pub f: f64,
    /// Lens-system rotation angle.
    #[arg(long = "theta-l", default_value = "pi/2", value_parser = parse_angle)]
    pub theta_l: f64,
    #[arg(long, default_value_t = 720)]
    pub nx: usize,
    #[arg(long, default_value_t = 480)]
    pub ny: usize,
    #[arg(long, default_value = "6.5um", value_parser = parse_length)]
    pub pitch: f64,
    #[arg(long = "bit-depth", default_value_t = 8)]
    pub bit_depth: u32,
    /// Constant offset in counts.
    #[arg(long, default_value_t = 0.0)]
    pub background: f64,
    /// Counts of the brightest noiseless pixel above background.
    #[arg(long = "peak-counts", default_value_t = 230.0, conflicts_with = "exposure_scale")]
    pub peak_counts: f64,
    /// Counts per unit pixel probability (overrides --peak-counts).
    #[arg(long = "exposure-scale")]
    pub exposure_scale: Option<f64>,
    #[arg(long, default_value_t = 0.97)]
    pub visibility: f64,
    #[arg(long = "shot-noise")]
    pub shot_noise: bool,
    /// Extra imaginary amplitude on the displaced beam (tilt).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub tilt: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CcdCmd {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub disp: DisplacementArgs,
    #[command(flatten)]
    pub frame: FrameArgs,
    #[command(flatten)]
    pub ccd: CcdArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// PGM path; the sidecar, profile and manifest share its stem.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitCmd {
    /// PGM frame; a JSON sidecar with the same stem is used when present.
    #[arg(long)]
    pub image: PathBuf,
    /// Transmittance used for the phase estimate (momentum plane only).
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[command(flatten)]
    pub disp: DisplacementArgs,
    #[command(flatten)]
    pub frame: FrameArgs,
    /// Focal length when the frame has no sidecar.
    #[arg(long, value_parser = parse_length)]
    pub f: Option<f64>,
    /// Pixel pitch when the frame has no sidecar.
    #[arg(long, value_parser = parse_length)]
    pub pitch: Option<f64>,
    /// Result JSON path.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepCmd {
    #[command(flatten)]
    pub disp: DisplacementArgs,
    #[command(flatten)]
    pub frame: FrameArgs,
    /// Explicit path "T:phi;T:phi;..." (phi accepts pi multiples).
    #[arg(long, conflicts_with_all = ["t_from", "t_to", "phi_from", "phi_to"], allow_hyphen_values = true)]
    pub path: Option<String>,
    #[arg(long = "T-from", default_value_t = 0.5)]
    pub t_from: f64,
    #[arg(long = "T-to", default_value_t = 0.5)]
    pub t_to: f64,
    #[arg(long = "phi-from", default_value = "-pi", value_parser = parse_angle, allow_hyphen_values = true)]
    pub phi_from: f64,
    #[arg(long = "phi-to", default_value = "pi", value_parser = parse_angle, allow_hyphen_values = true)]
    pub phi_to: f64,
    #[arg(long, default_value_t = 101)]
    pub steps: usize,
    /// CSV path.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MdmCmd {
    #[command(flatten)]
    pub disp: DisplacementArgs,
    #[command(flatten)]
    pub frame: FrameArgs,
    /// four_cat, twelve_state or four_hg_reference.
    #[arg(long, default_value = "four_cat")]
    pub scheme: String,
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    /// Standard deviation of the channel rotation.
    #[arg(long = "sigma-theta", default_value = "0", value_parser = parse_angle)]
    pub sigma_theta: f64,
    /// Standard deviation of each component of the additive overlap noise.
    #[arg(long = "overlap-noise", default_value_t = 0.0)]
    pub overlap_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path for the protocol statistics.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QkdCmd {
    #[command(flatten)]
    pub disp: DisplacementArgs,
    #[command(flatten)]
    pub frame: FrameArgs,
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    /// Standard deviation of the optical path length.
    #[arg(long = "sigma-z", default_value = "0", value_parser = parse_length)]
    pub sigma_z: f64,
    /// Fiber zigzag period cT'.
    #[arg(long, default_value = "1mm", value_parser = parse_length)]
    pub period: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path for the protocol statistics.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig2,
    Fig4,
    Fig5,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReproduceCmd {
    #[arg(value_enum)]
    pub figure: Figure,
    /// Points per axis of the Wigner maps.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "shot-noise")]
    pub shot_noise: bool,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Lengths in metres with an optional m, mm, um, µm or nm suffix.
pub fn parse_length(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = [("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6), ("nm", 1e-9), ("m", 1.0)]
        .iter()
        .find_map(|(suffix, scale)| s.strip_suffix(suffix).map(|n| (n, *scale)))
        .unwrap_or((s, 1.0));
    let v: f64 = num.trim().parse().map_err(|_| format!("not a length: `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("not a finite length: `{s}`"));
    }
    Ok(v * scale)
}

/// Angles in radians, or as multiples of pi: `pi`, `-0.72pi`, `pi/2`, `3pi/4`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let bad = || format!("not an angle: `{s}`");
    let v = match s.find("pi") {
        None => s.parse::<f64>().map_err(|_| bad())?,
        Some(at) => {
            let coeff = match s[..at].trim().trim_end_matches('*') {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => c.parse::<f64>().map_err(|_| bad())?,
            };
            let rest = s[at + 2..].trim();
            let div = match rest.strip_prefix('/') {
                Some(d) => d.trim().parse::<f64>().map_err(|_| bad())?,
                None if rest.is_empty() => 1.0,
                None => return Err(bad()),
            };
            coeff * std::f64::consts::PI / div
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}
