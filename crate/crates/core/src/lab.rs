//! Synthetic CCD frames and the profile analysis chain.
//!
//! A frame images either the focal plane (position plane) or the output of a
//! single-lens system (momentum plane for θ_L = π/2). The optical axis falls on
//! column `nx/2` and row `ny/2`; pixels are sampled at their centers.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ModeFrame, HBAR};
use crate::io::Pgm;
use crate::propagation::rotate_phase_space;
use crate::qubit::{make_qubit_state, OverlapAngle, QubitParams};
use crate::rng::stream_rng;
use crate::state::{coherent_wavefunction, CoherentTerm, SuperpositionState};
use crate::wigner::{i_vac, i_vac_momentum, marginal_momentum, marginal_position};

/// Focal length of the imaging lens in the laboratory setup.
pub const LAB_FOCAL_LENGTH: f64 = 0.145;
/// Interferometer visibility measured in the laboratory setup.
pub const LAB_VISIBILITY: f64 = 0.97;
/// Relative residual above which a Gaussian fit is reported as poor.
pub const POOR_FIT_RSS: f64 = 1e-2;

/// How counts scale with intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Exposure {
    /// Counts per unit of detected probability on a pixel.
    Scale(f64),
    /// Scale chosen so the brightest noiseless pixel reaches this many counts above background.
    PeakCounts(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdConfig {
    pub nx: usize,
    pub ny: usize,
    /// Pixel pitch in metres.
    pub pitch: f64,
    pub bit_depth: u32,
    /// Constant offset in counts.
    pub background: f64,
    pub exposure: Exposure,
    /// Interferometer visibility; scales the cross terms only.
    pub visibility: f64,
    /// Poisson shot noise on the signal counts.
    pub shot_noise: bool,
    pub seed: u64,
}

impl Default for CcdConfig {
    fn default() -> Self {
        Self {
            nx: 720,
            ny: 480,
            pitch: 6.5e-6,
            bit_depth: 8,
            background: 0.0,
            exposure: Exposure::PeakCounts(230.0),
            visibility: 1.0,
            shot_noise: false,
            seed: 0,
        }
    }
}

impl CcdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 32 || self.ny < 1 {
            return Err(Error::param("nx", "sensor needs at least 32 columns and 1 row"));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::param("pitch", "must be positive"));
        }
        if ![8, 12, 16].contains(&self.bit_depth) {
            return Err(Error::param("bit_depth", "must be 8, 12 or 16"));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::param("visibility", "must lie in [0, 1]"));
        }
        if !(self.background.is_finite() && self.background >= 0.0) {
            return Err(Error::param("background", "must be non-negative"));
        }
        let scale = match self.exposure {
            Exposure::Scale(s) | Exposure::PeakCounts(s) => s,
        };
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::param("exposure_scale", "must be positive"));
        }
        Ok(())
    }

    pub fn max_count(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }

    pub fn column_x(&self, col: usize) -> f64 {
        (col as f64 - (self.nx / 2) as f64) * self.pitch
    }

    pub fn row_y(&self, row: usize) -> f64 {
        (row as f64 - (self.ny / 2) as f64) * self.pitch
    }
}

/// Which plane the sensor sits in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plane", rename_all = "snake_case")]
pub enum Plane {
    /// Focal plane imaged one to one.
    Position,
    /// Output of a lens system of focal length `f` and rotation angle `theta_l`.
    Momentum { f: f64, theta_l: f64 },
}

impl Plane {
    pub fn momentum(f: f64) -> Self {
        Plane::Momentum { f, theta_l: FRAC_PI_2 }
    }

    /// Effective rotation angle and magnification on the sensor.
    ///
    /// The lens system maps (x, v) to cos θ·x + f sin²θ·v; in units of the mode
    /// this is a quadrature at angle θ_eff scaled by r.
    fn rotation(&self, frame: &ModeFrame) -> Result<(f64, f64)> {
        match *self {
            Plane::Position => Ok((0.0, 1.0)),
            Plane::Momentum { f, theta_l } => {
                if !(f.is_finite() && f > 0.0) {
                    return Err(Error::param("f", "focal length must be positive"));
                }
                if !(theta_l > 0.0 && theta_l <= PI) {
                    return Err(Error::param("theta_L", "must lie in (0, pi]"));
                }
                let c = theta_l.cos();
                let s = f * theta_l.sin().powi(2) / frame.rayleigh_range();
                Ok((s.atan2(c), c.hypot(s)))
            }
        }
    }
}

/// Quantized sensor frame, row-major `ny × nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdImage {
    pub config: CcdConfig,
    pub plane: Plane,
    pub counts: Vec<u16>,
    /// Counts per unit pixel probability actually used.
    pub scale: f64,
    pub saturated: bool,
}

/// JSON companion of a PGM frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdSidecar {
    pub config: CcdConfig,
    pub plane: Plane,
    pub scale: f64,
    pub saturated: bool,
}

impl CcdImage {
    pub fn at(&self, row: usize, col: usize) -> u16 {
        self.counts[row * self.config.nx + col]
    }

    pub fn to_pgm(&self) -> Pgm {
        Pgm {
            width: self.config.nx,
            height: self.config.ny,
            maxval: self.config.max_count(),
            data: self.counts.clone(),
        }
    }

    pub fn sidecar(&self) -> CcdSidecar {
        CcdSidecar {
            config: self.config.clone(),
            plane: self.plane,
            scale: self.scale,
            saturated: self.saturated,
        }
    }

    pub fn from_parts(pgm: Pgm, sidecar: CcdSidecar) -> Result<Self> {
        sidecar.config.validate()?;
        if pgm.width != sidecar.config.nx || pgm.height != sidecar.config.ny || pgm.maxval != sidecar.config.max_count()
        {
            return Err(Error::Format("pgm geometry does not match its sidecar".into()));
        }
        Ok(Self {
            config: sidecar.config,
            plane: sidecar.plane,
            counts: pgm.data,
            scale: sidecar.scale,
            saturated: sidecar.saturated,
        })
    }

    /// Raw image from a PGM without a sidecar: laboratory pitch, position plane.
    pub fn from_pgm(pgm: Pgm) -> Result<Self> {
        let bit_depth = match pgm.maxval {
            255 => 8,
            4095 => 12,
            65535 => 16,
            m => return Err(Error::Format(format!("unsupported maxval {m}"))),
        };
        let config = CcdConfig {
            nx: pgm.width,
            ny: pgm.height,
            bit_depth,
            ..CcdConfig::default()
        };
        config.validate()?;
        Ok(Self {
            config,
            plane: Plane::Position,
            saturated: pgm.data.iter().any(|&v| v == pgm.maxval),
            counts: pgm.data,
            scale: f64::NAN,
        })
    }
}

/// Adds `delta` to the imaginary amplitude of every displaced term, modelling
/// a tilt of the coherent beam (it shifts the momentum-plane image).
pub fn tilt_displaced_terms(state: &SuperpositionState, delta: f64) -> Result<SuperpositionState> {
    let terms: Vec<CoherentTerm> = state
        .terms()
        .iter()
        .map(|t| {
            let mut t = *t;
            if t.alpha_x.re != 0.0 {
                t.alpha_x += Complex64::new(0.0, delta);
            }
            t
        })
        .collect();
    SuperpositionState::new(*state.frame(), terms)
}

/// Noiseless detected probability per pixel, row-major.
pub fn expected_pixel_probabilities(state: &SuperpositionState, plane: &Plane, config: &CcdConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let frame = state.frame();
    let (theta, r) = plane.rotation(frame)?;
    let rotated = rotate_phase_space(state, theta);
    let w0 = frame.w0();
    let terms = rotated.terms();
    let xf: Vec<Vec<Complex64>> = terms
        .iter()
        .map(|t| {
            (0..config.nx)
                .map(|c| t.coeff * coherent_wavefunction(t.alpha_x, w0, config.column_x(c) / r))
                .collect()
        })
        .collect();
    let yf: Vec<Vec<Complex64>> = terms
        .iter()
        .map(|t| {
            (0..config.ny)
                .map(|j| coherent_wavefunction(t.alpha_y, w0, config.row_y(j) / r))
                .collect()
        })
        .collect();
    let area = config.pitch * config.pitch / (r * r);
    let v = config.visibility;
    let mut out = vec![0.0; config.nx * config.ny];
    let mut amps = vec![Complex64::new(0.0, 0.0); terms.len()];
    for j in 0..config.ny {
        for c in 0..config.nx {
            for (i, a) in amps.iter_mut().enumerate() {
                *a = xf[i][c] * yf[i][j];
            }
            let incoherent: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            let total = amps.iter().sum::<Complex64>().norm_sqr();
            out[j * config.nx + c] = (incoherent + v * (total - incoherent)).max(0.0) * area;
        }
    }
    Ok(out)
}

/// Renders a quantized sensor frame.
pub fn render_ccd(state: &SuperpositionState, plane: &Plane, config: &CcdConfig) -> Result<CcdImage> {
    let prob = expected_pixel_probabilities(state, plane, config)?;
    let peak = prob.iter().fold(0.0f64, |m, &v| m.max(v));
    let scale = match config.exposure {
        Exposure::Scale(s) => s,
        Exposure::PeakCounts(c) => {
            if peak <= 0.0 {
                return Err(Error::EmptyState);
            }
            c / peak
        }
    };
    let max = config.max_count() as f64;
    let nx = config.nx;
    let mut counts = Vec::with_capacity(prob.len());
    for (row, chunk) in prob.chunks(nx).enumerate() {
        let mut rng = config.shot_noise.then(|| stream_rng(config.seed, row as u64));
        for &p in chunk {
            let mean = p * scale;
            let signal = match rng.as_mut() {
                Some(rng) if mean > 0.0 => {
                    rng.sample(Poisson::new(mean).map_err(|e| Error::param("exposure", e.to_string()))?)
                }
                _ => mean,
            };
            counts.push((signal + config.background).round().clamp(0.0, max) as u16);
        }
    }
    let top = config.max_count();
    if counts.iter().all(|&v| v == top) {
        return Err(Error::Saturated);
    }
    Ok(CcdImage {
        config: config.clone(),
        plane: *plane,
        saturated: counts.iter().any(|&v| v == top),
        counts,
        scale,
    })
}

/// Normalized column profile of a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub values: Vec<f64>,
    pub pitch: f64,
    /// Column of the optical axis.
    pub axis_col: usize,
}

impl Profile {
    /// Sensor coordinate of sample `i` relative to the axis, in metres.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.axis_col as f64) * self.pitch
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("col,x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{:.12e},{v:.12e}\n", self.x(i)));
        }
        out
    }
}

const BORDER_COLUMNS: usize = 8;

/// Sums columns, subtracts the median of the 8 + 8 border column sums, clips
/// at zero and normalizes to unit sum.
pub fn profile_from_image(image: &CcdImage) -> Result<Profile> {
    let cfg = &image.config;
    if image.counts.iter().all(|&v| v == cfg.max_count()) {
        return Err(Error::Saturated);
    }
    let mut sums = vec![0.0f64; cfg.nx];
    for row in image.counts.chunks(cfg.nx) {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v as f64;
        }
    }
    let mut border: Vec<f64> = sums[..BORDER_COLUMNS]
        .iter()
        .chain(&sums[cfg.nx - BORDER_COLUMNS..])
        .copied()
        .collect();
    border.sort_by(|a, b| a.total_cmp(b));
    let background = 0.5 * (border[BORDER_COLUMNS - 1] + border[BORDER_COLUMNS]);
    let mut values: Vec<f64> = sums.iter().map(|s| (s - background).max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyProfile);
    }
    values.iter_mut().for_each(|v| *v /= total);
    Ok(Profile {
        values,
        pitch: cfg.pitch,
        axis_col: cfg.nx / 2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    /// Center relative to the axis, metres.
    pub center: f64,
    /// 1/e² intensity radius, metres.
    pub radius: f64,
    /// Residual sum of squares relative to Σy².
    pub rss: f64,
    pub iterations: usize,
    /// Residual above [`POOR_FIT_RSS`]: the profile is not Gaussian.
    pub poor: bool,
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let m = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn gaussian_rss(xs: &[f64], ys: &[f64], p: &[f64; 3]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (y - p[0] * (-2.0 * ((x - p[1]) / p[2]).powi(2)).exp()).powi(2))
        .sum()
}

/// Levenberg–Marquardt fit of A·exp(−2(x−c)²/w²), initialized from moments.
pub fn fit_gaussian_profile(profile: &Profile) -> Result<GaussianFit> {
    let nonzero = profile.values.iter().filter(|&&v| v > 0.0).count();
    if nonzero < 8 {
        return Err(Error::param(
            "profile",
            format!("needs at least 8 non-zero samples, found {nonzero}"),
        ));
    }
    // Pixel units keep the normal equations well conditioned.
    let xs: Vec<f64> = (0..profile.values.len())
        .map(|i| i as f64 - profile.axis_col as f64)
        .collect();
    let ys = &profile.values;
    let sum: f64 = ys.iter().sum();
    let mean = xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sum;
    let var = xs.iter().zip(ys).map(|(x, y)| (x - mean).powi(2) * y).sum::<f64>() / sum;
    let peak = ys.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut p = [peak, mean, 2.0 * var.sqrt().max(0.5)];
    let sy2: f64 = ys.iter().map(|y| y * y).sum();
    let mut rss = gaussian_rss(&xs, ys, &p);
    let mut lambda = 1e-3;
    const MAX_ITER: usize = 200;
    for iter in 1..=MAX_ITER {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (x, y) in xs.iter().zip(ys) {
            let u = (x - p[1]) / p[2];
            let e = (-2.0 * u * u).exp();
            let r = y - p[0] * e;
            let j = [e, p[0] * e * 4.0 * u / p[2], p[0] * e * 4.0 * u * u / p[2]];
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut accepted = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] *= 1.0 + lambda;
            }
            let Some(step) = solve3(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).abs()];
            let trial_rss = gaussian_rss(&xs, ys, &trial);
            if trial_rss <= rss {
                let small = step
                    .iter()
                    .zip(&trial)
                    .all(|(s, t)| s.abs() <= 1e-10 * t.abs().max(1e-12));
                let stalled = rss - trial_rss <= 1e-15 * sy2;
                p = trial;
                rss = trial_rss;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small || stalled {
                    return Ok(finish_fit(profile, p, rss / sy2, iter));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: a stationary point.
            return Ok(finish_fit(profile, p, rss / sy2, iter));
        }
    }
    Err(Error::FitNonConvergence {
        iterations: MAX_ITER,
        params: p.to_vec(),
        rss: rss / sy2,
    })
}

fn finish_fit(profile: &Profile, p: [f64; 3], rss: f64, iterations: usize) -> GaussianFit {
    GaussianFit {
        amplitude: p[0],
        center: p[1] * profile.pitch,
        radius: p[2] * profile.pitch,
        rss,
        iterations,
        poor: rss > POOR_FIT_RSS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    /// Estimated relative phase in (−π, π].
    pub phi: f64,
    /// Fitted fringe amplitude relative to the envelope amplitude.
    pub contrast: f64,
    /// Fringe amplitude and residual RMS, in profile units.
    pub fringe: f64,
    pub noise: f64,
}

/// Fits the momentum-plane fringe pattern g(x')·(1 + C·cos(φ − d·k·x'/f)) with
/// the vacuum envelope g fixed by the optics.
///
/// Amplitude and fringe contrast C are nuisance parameters, so visibility
/// losses do not bias φ.
pub fn estimate_relative_phase(profile: &Profile, d: f64, frame: &ModeFrame, t: f64, f: f64) -> Result<PhaseEstimate> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::param("T", "fringes need 0 < T < 1"));
    }
    if !(d > 0.0) {
        return Err(Error::param("d", "must be positive"));
    }
    if !(f > 0.0) {
        return Err(Error::param("f", "must be positive"));
    }
    let k = frame.k();
    let w_m = 2.0 * f / (k * frame.w0());
    let kappa = d * k / f;
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    let mut rows = Vec::new();
    for (i, &y) in profile.values.iter().enumerate() {
        let x = profile.x(i);
        if x.abs() > 3.0 * w_m {
            continue;
        }
        let g = (-2.0 * (x / w_m).powi(2)).exp();
        let basis = [g, g * (kappa * x).cos(), g * (kappa * x).sin()];
        for a in 0..3 {
            atb[a] += basis[a] * y;
            for b in 0..3 {
                ata[a][b] += basis[a] * basis[b];
            }
        }
        rows.push((basis, y));
    }
    if rows.len() < 8 {
        return Err(Error::param("profile", "too few samples inside the momentum envelope"));
    }
    let coef = solve3(ata, atb).ok_or_else(|| Error::param("profile", "singular fringe fit"))?;
    let ss: f64 = rows
        .iter()
        .map(|(b, y)| (y - b[0] * coef[0] - b[1] * coef[1] - b[2] * coef[2]).powi(2))
        .sum();
    let noise = (ss / (rows.len() - 3) as f64).sqrt();
    let fringe = coef[1].hypot(coef[2]);
    if !(fringe > 3.0 * noise) {
        return Err(Error::PhaseUnidentifiable { fringe, noise });
    }
    Ok(PhaseEstimate {
        phi: crate::qubit::signed_angle(coef[2].atan2(coef[1])),
        contrast: fringe / coef[0],
        fringe,
        noise,
    })
}

/// One panel of the laboratory figures: synthetic measurement, theory and the
/// SQL reference, all as probability per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPanel {
    pub id: String,
    pub label: String,
    pub plane: Plane,
    pub t: f64,
    pub phi: f64,
    pub phi_estimate: Option<f64>,
    pub measured: Vec<f64>,
    pub theory: Vec<f64>,
    pub sql: Vec<f64>,
    pub axis_col: usize,
}

impl ScenarioPanel {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_px,measured,theory,sql\n");
        for i in 0..self.theory.len() {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e}\n",
                i as i64 - self.axis_col as i64,
                self.measured[i],
                self.theory[i],
                self.sql[i]
            ));
        }
        out
    }
}

/// Settings shared by the laboratory scenario panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSettings {
    pub frame: ModeFrame,
    pub alpha: f64,
    pub f: f64,
    pub ccd: CcdConfig,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self {
            frame: ModeFrame::laboratory(),
            alpha: 1.1,
            f: LAB_FOCAL_LENGTH,
            ccd: CcdConfig {
                visibility: LAB_VISIBILITY,
                ..CcdConfig::default()
            },
        }
    }
}

fn theory_curve(cfg: &CcdConfig, plane: &Plane, frame: &ModeFrame, density: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..cfg.nx)
        .map(|c| {
            let x = cfg.column_x(c);
            match *plane {
                Plane::Position => density(x) * cfg.pitch,
                Plane::Momentum { f, .. } => {
                    let jac = HBAR * frame.k() / f;
                    density(x * jac) * jac * cfg.pitch
                }
            }
        })
        .collect()
}

fn panel(
    id: &str,
    label: &str,
    params: QubitParams,
    plane: Plane,
    settings: &ScenarioSettings,
    sql: impl Fn(f64) -> f64,
) -> Result<ScenarioPanel> {
    let frame = &settings.frame;
    let state = make_qubit_state(params, *frame)?;
    let image = render_ccd(&state, &plane, &settings.ccd)?;
    let measured = profile_from_image(&image)?;
    let theory = match plane {
        Plane::Position => theory_curve(&settings.ccd, &plane, frame, |x| marginal_position(&params, frame, x)),
        Plane::Momentum { .. } => theory_curve(&settings.ccd, &plane, frame, |p| marginal_momentum(&params, frame, p)),
    };
    let phi_estimate = match plane {
        Plane::Momentum { f, .. } if params.t() > 0.0 && params.t() < 1.0 => {
            Some(estimate_relative_phase(&measured, params.d(), frame, params.t(), f)?.phi)
        }
        _ => None,
    };
    Ok(ScenarioPanel {
        id: id.into(),
        label: label.into(),
        plane,
        t: params.t(),
        phi: params.phi_signed(),
        phi_estimate,
        theory,
        sql: theory_curve(&settings.ccd, &plane, frame, sql),
        measured: measured.values,
        axis_col: measured.axis_col,
    })
}

/// Vacuum/coherent panels (`fig4`) and the four equator states (`fig5`).
pub fn scenario_reports(figure: &str, settings: &ScenarioSettings) -> Result<Vec<ScenarioPanel>> {
    let frame = settings.frame;
    let theta = OverlapAngle::from_alpha(settings.alpha)?;
    let d = theta.displacement(&frame);
    let mom = Plane::momentum(settings.f);
    let vac_x = move |x: f64| i_vac(&frame, x);
    let vac_p = move |p: f64| i_vac_momentum(&frame, p);
    match figure {
        "fig4" => {
            let vac = QubitParams::new(1.0, 0.0, d)?;
            let coh = QubitParams::new(0.0, 0.0, d)?;
            Ok(vec![
                panel("a-1", "vacuum", vac, Plane::Position, settings, vac_x)?,
                panel("a-2", "vacuum", vac, mom, settings, vac_p)?,
                panel("b-1", "coherent", coh, Plane::Position, settings, vac_x)?,
                panel("b-2", "coherent", coh, mom, settings, vac_p)?,
            ])
        }
        "fig5" => {
            let half_x = move |x: f64| i_vac(&frame, x - d / 2.0);
            let mut out = Vec::new();
            for (id, label, phi) in FIG5_STATES {
                let params = QubitParams::new(0.5, phi * PI, d)?;
                out.push(panel(
                    &format!("{id}-1"),
                    label,
                    params,
                    Plane::Position,
                    settings,
                    half_x,
                )?);
                out.push(panel(&format!("{id}-2"), label, params, mom, settings, vac_p)?);
            }
            Ok(out)
        }
        other => Err(Error::param("figure", format!("unknown laboratory figure `{other}`"))),
    }
}

/// Equator states of the laboratory run: panel id, label and φ/π.
pub const FIG5_STATES: [(&str, &str, f64); 4] = [
    ("a", "odd cat-like", 0.98),
    ("b", "even cat-like", -0.18),
    ("c", "p_x- like", -0.72),
    ("d", "p_x+ like", 0.57),
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{make_typical_state, TypicalKind};

    fn lab_state(kind: TypicalKind) -> (QubitParams, SuperpositionState) {
        make_typical_state(kind, OverlapAngle::from_alpha(1.1).unwrap(), ModeFrame::laboratory()).unwrap()
    }

    fn fit_radius_px(kind: TypicalKind, plane: Plane) -> GaussianFit {
        let (_, s) = lab_state(kind);
        let img = render_ccd(&s, &plane, &CcdConfig::default()).unwrap();
        fit_gaussian_profile(&profile_from_image(&img).unwrap()).unwrap()
    }

    #[test]
    fn momentum_plane_vacuum_width() {
        let fit = fit_radius_px(TypicalKind::Vac, Plane::momentum(LAB_FOCAL_LENGTH));
        let px = fit.radius / 6.5e-6;
        assert!((px - 46.0).abs() <= 1.0, "{px}");
        let f = ModeFrame::laboratory();
        let expected = f.lambda() * LAB_FOCAL_LENGTH / (PI * f.w0());
        assert!((fit.radius - expected).abs() / expected < 5e-3);
        assert!(!fit.poor);
    }

    #[test]
    fn position_plane_vacuum_and_coherent() {
        let f = ModeFrame::laboratory();
        let vac = fit_radius_px(TypicalKind::Vac, Plane::Position);
        assert!((vac.radius - f.w0()).abs() / f.w0() < 5e-3);
        assert!(vac.center.abs() < 0.5 * 6.5e-6);
        let coh = fit_radius_px(TypicalKind::Coh, Plane::Position);
        let d = OverlapAngle::from_alpha(1.1).unwrap().displacement(&f);
        assert!((coh.center - d).abs() < 0.5 * 6.5e-6);
    }

    #[test]
    fn two_peak_profile_is_flagged() {
        let fit = fit_radius_px(TypicalKind::CatMinus, Plane::Position);
        assert!(fit.poor, "rss {}", fit.rss);
    }

    #[test]
    fn odd_cat_has_dark_center_in_momentum_plane() {
        let (_, s) = lab_state(TypicalKind::CatMinus);
        let img = render_ccd(&s, &Plane::momentum(LAB_FOCAL_LENGTH), &CcdConfig::default()).unwrap();
        for row in 0..img.config.ny {
            assert_eq!(img.at(row, 360), 0);
        }
        let bright = CcdConfig {
            background: 12.0,
            ..CcdConfig::default()
        };
        let img = render_ccd(&s, &Plane::momentum(LAB_FOCAL_LENGTH), &bright).unwrap();
        assert_eq!(img.at(240, 360), 12);
    }

    #[test]
    fn round_trip_matches_marginals() {
        let frame = ModeFrame::laboratory();
        let mom = Plane::momentum(LAB_FOCAL_LENGTH);
        let cfg = CcdConfig::default();
        for kind in TypicalKind::ALL {
            let (params, s) = lab_state(kind);
            for plane in [Plane::Position, mom] {
                let prof = profile_from_image(&render_ccd(&s, &plane, &cfg).unwrap()).unwrap();
                let theory = match plane {
                    Plane::Position => theory_curve(&cfg, &plane, &frame, |x| marginal_position(&params, &frame, x)),
                    _ => theory_curve(&cfg, &plane, &frame, |p| marginal_momentum(&params, &frame, p)),
                };
                let peak = theory.iter().fold(0.0f64, |m, &v| m.max(v));
                let rms = (prof
                    .values
                    .iter()
                    .zip(&theory)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    / theory.len() as f64)
                    .sqrt();
                assert!(rms <= 2.0 / 255.0 * peak, "{kind:?} {plane:?}: {}", rms / peak);
                assert!((prof.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn visibility_increases_contrast() {
        let (_, s) = lab_state(TypicalKind::CatMinus);
        let mut last = -1.0;
        for v in [0.8, 0.9, 0.97, 1.0] {
            let cfg = CcdConfig {
                visibility: v,
                ..CcdConfig::default()
            };
            let prof = profile_from_image(&render_ccd(&s, &Plane::momentum(LAB_FOCAL_LENGTH), &cfg).unwrap()).unwrap();
            let max = prof.values.iter().fold(0.0f64, |m, &x| m.max(x));
            let center = prof.values[prof.axis_col];
            let contrast = (max - center) / (max + center);
            assert!(contrast > last, "{v}: {contrast} <= {last}");
            last = contrast;
        }
    }

    #[test]
    fn phase_recovery_at_laboratory_conditions() {
        let settings = ScenarioSettings::default();
        let theta = OverlapAngle::from_alpha(1.1).unwrap();
        let d = theta.displacement(&settings.frame);
        let mut total = 0.0;
        for k in -7..=8 {
            let phi = k as f64 * PI / 8.0;
            let params = QubitParams::new(0.5, phi, d).unwrap();
            let s = make_qubit_state(params, settings.frame).unwrap();
            let img = render_ccd(&s, &Plane::momentum(settings.f), &settings.ccd).unwrap();
            let est = estimate_relative_phase(&profile_from_image(&img).unwrap(), d, &settings.frame, 0.5, settings.f)
                .unwrap();
            let err = crate::qubit::signed_angle(est.phi - phi).abs();
            assert!(err < 0.03 * PI, "{phi}: {}", est.phi);
            total += err;
        }
        assert!(total / 16.0 <= 0.03 * PI);
    }

    #[test]
    fn phase_estimation_errors() {
        let settings = ScenarioSettings::default();
        let (_, vac) = lab_state(TypicalKind::Vac);
        let d = OverlapAngle::from_alpha(1.1).unwrap().displacement(&settings.frame);
        let prof = profile_from_image(&render_ccd(&vac, &Plane::momentum(settings.f), &settings.ccd).unwrap()).unwrap();
        assert!(estimate_relative_phase(&prof, d, &settings.frame, 1.0, settings.f).is_err());
        assert!(matches!(
            estimate_relative_phase(&prof, d, &settings.frame, 0.5, settings.f),
            Err(Error::PhaseUnidentifiable { .. })
        ));
    }

    #[test]
    fn degenerate_images() {
        let cfg = CcdConfig::default();
        let flat = CcdImage {
            config: cfg.clone(),
            plane: Plane::Position,
            counts: vec![17; cfg.nx * cfg.ny],
            scale: 1.0,
            saturated: false,
        };
        assert!(matches!(profile_from_image(&flat), Err(Error::EmptyProfile)));
        let (_, s) = lab_state(TypicalKind::Vac);
        let hot = CcdConfig {
            background: 400.0,
            ..cfg.clone()
        };
        assert!(matches!(render_ccd(&s, &Plane::Position, &hot), Err(Error::Saturated)));
        let deep = CcdConfig { bit_depth: 10, ..cfg };
        assert!(render_ccd(&s, &Plane::Position, &deep).is_err());
    }

    #[test]
    fn shot_noise_is_seeded() {
        let (_, s) = lab_state(TypicalKind::CatPlus);
        let cfg = CcdConfig {
            shot_noise: true,
            seed: 42,
            ..CcdConfig::default()
        };
        let a = render_ccd(&s, &Plane::Position, &cfg).unwrap();
        let b = render_ccd(&s, &Plane::Position, &cfg).unwrap();
        assert_eq!(a, b);
        let c = render_ccd(&s, &Plane::Position, &CcdConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn tilt_shifts_momentum_image() {
        let (_, coh) = lab_state(TypicalKind::Coh);
        let frame = ModeFrame::laboratory();
        // Five pixels on the sensor: κ0 = k·x'/f and κ0 = 2√2·Im α/w0.
        let shift = 5.0 * 6.5e-6;
        let delta = shift * frame.k() / LAB_FOCAL_LENGTH * frame.w0() / (2.0 * 2f64.sqrt());
        let tilted = tilt_displaced_terms(&coh, delta).unwrap();
        let mom = Plane::momentum(LAB_FOCAL_LENGTH);
        let cfg = CcdConfig::default();
        let a = fit_gaussian_profile(&profile_from_image(&render_ccd(&coh, &mom, &cfg).unwrap()).unwrap()).unwrap();
        let b = fit_gaussian_profile(&profile_from_image(&render_ccd(&tilted, &mom, &cfg).unwrap()).unwrap()).unwrap();
        assert!(((b.center - a.center) / 6.5e-6 - 5.0).abs() < 0.1);
    }

    #[test]
    fn pgm_and_sidecar_round_trip() {
        let (_, s) = lab_state(TypicalKind::PMinus);
        let img = render_ccd(&s, &Plane::momentum(LAB_FOCAL_LENGTH), &CcdConfig::default()).unwrap();
        let pgm = Pgm::decode(&img.to_pgm().encode()).unwrap();
        let side: CcdSidecar = serde_json::from_str(&crate::io::to_json(&img.sidecar()).unwrap()).unwrap();
        assert_eq!(CcdImage::from_parts(pgm, side).unwrap(), img);
    }

    #[test]
    fn scenario_panels() {
        let settings = ScenarioSettings::default();
        let fig4 = scenario_reports("fig4", &settings).unwrap();
        let fig5 = scenario_reports("fig5", &settings).unwrap();
        assert_eq!((fig4.len(), fig5.len()), (4, 8));
        for p in fig4.iter().chain(&fig5) {
            assert!((p.theory.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{}", p.id);
            assert!((p.sql.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{}", p.id);
        }
        // Odd cat-like position panel: two peaks around a near-zero center.
        let a1 = &fig5[0];
        let d_px = OverlapAngle::from_alpha(1.1).unwrap().displacement(&settings.frame) / 6.5e-6;
        let mid = a1.axis_col + (d_px / 2.0).round() as usize;
        let peak = a1.theory.iter().fold(0.0f64, |m, &v| m.max(v));
        assert!(a1.theory[mid] < 0.01 * peak);
        // Even cat-like momentum panel: peak near the axis, narrower than the SQL.
        let b2 = &fig5[3];
        let width = |c: &[f64]| {
            let m: f64 = c.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>() / c.iter().sum::<f64>();
            c.iter()
                .enumerate()
                .map(|(i, v)| (i as f64 - m).powi(2) * v)
                .sum::<f64>()
                / c.iter().sum::<f64>()
        };
        let argmax = b2
            .theory
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((argmax as i64 - b2.axis_col as i64).abs() < 10);
        assert!(width(&b2.theory) < width(&b2.sql));
        for (p, (_, _, phi)) in fig5.iter().skip(1).step_by(2).zip(FIG5_STATES) {
            let est = p.phi_estimate.unwrap();
            assert!(crate::qubit::signed_angle(est - phi * PI).abs() < 0.03 * PI);
        }
    }
}
