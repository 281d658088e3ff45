//! Reduced Wigner function of the x-mode, its marginals and quadrature moments.
//!
//! Positions are in metres and momenta in kg·m/s internally (p = ħκ for a
//! transverse wavenumber κ). The nondimensional axes X = √2(x − x_ref)/w0 and
//! P = w0·p/(√2ħ) are an output option; in them the vacuum has variance 1/2
//! and W_nd = ħ·W.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ModeFrame, HBAR};
use crate::qubit::QubitParams;
use crate::state::{coherent_wavefunction, SuperpositionState};

/// Vacuum Wigner function exp(−2x²/w0² − w0²p²/(2ħ²))/(πħ).
pub fn w_vac(frame: &ModeFrame, x: f64, p: f64) -> f64 {
    let w0 = frame.w0();
    let u = x / w0;
    let v = w0 * p / HBAR;
    (-2.0 * u * u - 0.5 * v * v).exp() / (PI * HBAR)
}

/// Position density of the vacuum, √(2/π)/w0 · exp(−2x²/w0²).
pub fn i_vac(frame: &ModeFrame, x: f64) -> f64 {
    let w0 = frame.w0();
    let u = x / w0;
    (2.0 / PI).sqrt() / w0 * (-2.0 * u * u).exp()
}

/// Momentum density of the vacuum, w0/(√(2π)ħ) · exp(−w0²p²/(2ħ²)).
pub fn i_vac_momentum(frame: &ModeFrame, p: f64) -> f64 {
    let w0 = frame.w0();
    let v = w0 * p / HBAR;
    w0 / ((2.0 * PI).sqrt() * HBAR) * (-0.5 * v * v).exp()
}

fn cos_theta(frame: &ModeFrame, d: f64) -> f64 {
    let a = frame.displacement_to_alpha(d);
    (-a * a).exp()
}

/// Closed-form Wigner function of √T|vac⟩ + e^{iφ}√(1−T)|coh(d)⟩.
pub fn wigner_closed_form(params: &QubitParams, frame: &ModeFrame, x: f64, p: f64) -> f64 {
    let (t, d) = (params.t(), params.d());
    let cross = 2.0 * params.cross_weight() * w_vac(frame, x - d / 2.0, p) * (params.phi() - d * p / HBAR).cos();
    (t * w_vac(frame, x, p) + (1.0 - t) * w_vac(frame, x - d, p) + cross) / params.norm_factor(frame)
}

/// Position distribution I(x) = ∫W dp.
pub fn marginal_position(params: &QubitParams, frame: &ModeFrame, x: f64) -> f64 {
    let (t, d) = (params.t(), params.d());
    let cross = 2.0 * params.cross_weight() * i_vac(frame, x - d / 2.0) * cos_theta(frame, d) * params.phi().cos();
    (t * i_vac(frame, x) + (1.0 - t) * i_vac(frame, x - d) + cross) / params.norm_factor(frame)
}

/// Momentum distribution Ĩ(p) = ∫W dx.
pub fn marginal_momentum(params: &QubitParams, frame: &ModeFrame, p: f64) -> f64 {
    let fringe = 1.0 + 2.0 * params.cross_weight() * (params.phi() - params.d() * p / HBAR).cos();
    i_vac_momentum(frame, p) * fringe / params.norm_factor(frame)
}

/// Output axes for maps and tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Si,
    Nondimensional,
}

/// Rectangular (x, p) sampling grid; bounds are stored in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl PhaseSpaceGrid {
    pub fn new(x: (f64, f64), nx: usize, p: (f64, f64), np: usize) -> Result<Self> {
        if nx < 2 || np < 2 {
            return Err(Error::param("grid", "need at least 2 points per axis"));
        }
        if !(x.1 > x.0) || !(p.1 > p.0) || !x.0.is_finite() || !x.1.is_finite() || !p.0.is_finite() || !p.1.is_finite()
        {
            return Err(Error::param("grid", "bounds must be finite with max > min"));
        }
        Ok(Self {
            x_min: x.0,
            x_max: x.1,
            nx,
            p_min: p.0,
            p_max: p.1,
            np,
        })
    }

    /// Grid given in nondimensional (X, P) coordinates about `x_ref`.
    pub fn nondimensional(
        frame: &ModeFrame,
        x_ref: f64,
        big_x: (f64, f64),
        nx: usize,
        big_p: (f64, f64),
        np: usize,
    ) -> Result<Self> {
        Self::new(
            (frame.nd_to_x(big_x.0, x_ref), frame.nd_to_x(big_x.1, x_ref)),
            nx,
            (frame.nd_to_p(big_p.0), frame.nd_to_p(big_p.1)),
            np,
        )
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ps(&self) -> Vec<f64> {
        (0..self.np).map(|j| self.p(j)).collect()
    }
}

/// Sampled Wigner function; `values[i * np + j]` holds W(x_i, p_j) in 1/(m·kg·m/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerMap {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
}

impl WignerMap {
    pub fn from_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let values = (0..grid.nx)
            .into_par_iter()
            .flat_map_iter(|i| {
                let x = grid.x(i);
                (0..grid.np).map(move |j| (x, grid.p(j)))
            })
            .map(|(x, p)| f(x, p))
            .collect();
        Self { grid, values }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.np + j]
    }

    /// Trapezoid-rule ∫∫W dx dp over the grid window.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for i in 0..g.nx {
            let wi = if i == 0 || i == g.nx - 1 { 0.5 } else { 1.0 };
            for j in 0..g.np {
                let wj = if j == 0 || j == g.np - 1 { 0.5 } else { 1.0 };
                acc += wi * wj * self.at(i, j);
            }
        }
        acc * g.dx() * g.dp()
    }

    /// Trapezoid ∫W dp for every x sample.
    pub fn position_marginal(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.nx)
            .map(|i| {
                let s: f64 = (0..g.np)
                    .map(|j| if j == 0 || j == g.np - 1 { 0.5 } else { 1.0 } * self.at(i, j))
                    .sum();
                s * g.dp()
            })
            .collect()
    }

    /// Trapezoid ∫W dx for every p sample.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.np)
            .map(|j| {
                let s: f64 = (0..g.nx)
                    .map(|i| if i == 0 || i == g.nx - 1 { 0.5 } else { 1.0 } * self.at(i, j))
                    .sum();
                s * g.dx()
            })
            .collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with header `x,p,W` (SI) or `X,P,W` (nondimensional about `x_ref`).
    pub fn to_csv(&self, frame: &ModeFrame, units: Units, x_ref: f64) -> String {
        let g = &self.grid;
        let mut out = String::with_capacity(g.nx * g.np * 64);
        out.push_str(match units {
            Units::Si => "x,p,W\n",
            Units::Nondimensional => "X,P,W\n",
        });
        for i in 0..g.nx {
            for j in 0..g.np {
                let (x, p, w) = match units {
                    Units::Si => (g.x(i), g.p(j), self.at(i, j)),
                    Units::Nondimensional => (
                        frame.x_to_nd(g.x(i), x_ref),
                        frame.p_to_nd(g.p(j)),
                        self.at(i, j) * HBAR,
                    ),
                };
                out.push_str(&format!("{x:.12e},{p:.12e},{w:.12e}\n"));
            }
        }
        out
    }
}

const INITIAL_STEPS_PER_W0: f64 = 64.0;
const WINDOW_W0: f64 = 8.0;
const MAX_REFINEMENTS: usize = 4;
const RICHARDSON_TOL: f64 = 1e-11;

/// Integrand F(s) = Σ c_j c̄_k ⟨y_k|y_j⟩ φ_j(x + s/2) φ̄_k(x − s/2) for one x.
struct RowIntegrand<'a> {
    state: &'a SuperpositionState,
    y_overlap: Vec<Complex64>,
    s_lo: f64,
    s_hi: f64,
}

impl<'a> RowIntegrand<'a> {
    fn new(state: &'a SuperpositionState, window: f64) -> Self {
        let terms = state.terms();
        let n = terms.len();
        let w0 = state.frame().w0();
        let mut y_overlap = Vec::with_capacity(n * n);
        for j in terms {
            for k in terms {
                y_overlap.push(j.coeff * k.coeff.conj() * crate::state::coherent_overlap(j.alpha_y, k.alpha_y));
            }
        }
        let centers: Vec<f64> = terms
            .iter()
            .map(|t| crate::state::center_and_tilt(t.alpha_x, w0).0)
            .collect();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &centers {
            for b in &centers {
                lo = lo.min(a - b);
                hi = hi.max(a - b);
            }
        }
        Self {
            state,
            y_overlap,
            s_lo: lo - window * w0,
            s_hi: hi + window * w0,
        }
    }

    fn samples(&self, x: f64, n: usize) -> Vec<Complex64> {
        let terms = self.state.terms();
        let w0 = self.state.frame().w0();
        let h = (self.s_hi - self.s_lo) / n as f64;
        (0..=n)
            .map(|m| {
                let s = self.s_lo + m as f64 * h;
                let fwd: Vec<Complex64> = terms
                    .iter()
                    .map(|t| coherent_wavefunction(t.alpha_x, w0, x + 0.5 * s))
                    .collect();
                let bwd: Vec<Complex64> = terms
                    .iter()
                    .map(|t| coherent_wavefunction(t.alpha_x, w0, x - 0.5 * s).conj())
                    .collect();
                let mut acc = Complex64::new(0.0, 0.0);
                let nt = terms.len();
                for j in 0..nt {
                    for k in 0..nt {
                        acc += self.y_overlap[j * nt + k] * fwd[j] * bwd[k];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Trapezoid sums of F(s)·e^{−isκ} on the full sample set and on every
/// second sample, for every κ in `kappas`.
fn fourier_trapezoid(samples: &[Complex64], s_lo: f64, h: f64, kappas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() - 1;
    let mut fine = vec![Complex64::new(0.0, 0.0); kappas.len()];
    let mut coarse = vec![Complex64::new(0.0, 0.0); kappas.len()];
    let uniform = kappas.len() > 2 && {
        let d = kappas[1] - kappas[0];
        kappas.windows(2).all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d.abs())
    };
    for (m, f) in samples.iter().enumerate() {
        let s = s_lo + m as f64 * h;
        let end = m == 0 || m == n;
        let wf = if end { 0.5 } else { 1.0 };
        let wc = if m % 2 == 1 {
            0.0
        } else if end {
            0.5
        } else {
            1.0
        };
        if uniform {
            let mut phase = Complex64::from_polar(1.0, -s * kappas[0]);
            let step = Complex64::from_polar(1.0, -s * (kappas[1] - kappas[0]));
            for j in 0..kappas.len() {
                let v = f * phase;
                fine[j] += v * wf;
                coarse[j] += v * wc;
                phase *= step;
            }
        } else {
            for (j, k) in kappas.iter().enumerate() {
                let v = f * Complex64::from_polar(1.0, -s * k);
                fine[j] += v * wf;
                coarse[j] += v * wc;
            }
        }
    }
    let norm = 1.0 / (2.0 * PI * HBAR);
    (
        fine.iter().map(|z| z.re * h * norm).collect(),
        coarse.iter().map(|z| z.re * 2.0 * h * norm).collect(),
    )
}

/// W(x, p_j) for every momentum in `ps`, by trapezoid quadrature over the
/// separation variable with step halving until successive estimates agree.
fn wigner_row(integrand: &RowIntegrand<'_>, x: f64, ps: &[f64]) -> Result<Vec<f64>> {
    let w0 = integrand.state.frame().w0();
    let span = integrand.s_hi - integrand.s_lo;
    let kappas: Vec<f64> = ps.iter().map(|p| p / HBAR).collect();
    // Finest sampling must resolve the fastest oscillation e^{−isκ}.
    let kmax = kappas.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let steps_per_w0 = INITIAL_STEPS_PER_W0.max(2.0 * kmax * w0);
    let mut n = 2 * ((span / w0 * steps_per_w0).ceil() as usize).max(2);
    let scale = 1.0 / (PI * HBAR);
    let mut last_delta = f64::INFINITY;
    for _ in 0..=MAX_REFINEMENTS {
        let samples = integrand.samples(x, n);
        let edge = samples[0].norm().max(samples[n].norm());
        let peak = samples.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if peak > 0.0 && edge > 1e-12 * peak {
            return Err(Error::QuadratureNonConvergence {
                location: format!("x = {x:e} (window edge {:.3e} of peak)", edge / peak),
                delta: edge / peak,
                levels: 0,
            });
        }
        let h = span / n as f64;
        let (fine, coarse) = fourier_trapezoid(&samples, integrand.s_lo, h, &kappas);
        last_delta = fine.iter().zip(&coarse).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        if last_delta <= RICHARDSON_TOL {
            return Ok(fine);
        }
        n *= 2;
    }
    Err(Error::QuadratureNonConvergence {
        location: format!("x = {x:e}"),
        delta: last_delta,
        levels: MAX_REFINEMENTS,
    })
}

/// W(x, p) of an arbitrary superposition by direct quadrature of
/// (1/2πħ)∫ψ(x+s/2)ψ*(x−s/2)e^{−isp/ħ}ds, with the y dependence integrated
/// out analytically through the y-factor overlaps.
pub fn wigner_numeric(state: &SuperpositionState, grid: &PhaseSpaceGrid) -> Result<WignerMap> {
    let integrand = RowIntegrand::new(state, WINDOW_W0);
    let ps = grid.ps();
    let rows: Vec<Vec<f64>> = (0..grid.nx)
        .into_par_iter()
        .map(|i| wigner_row(&integrand, grid.x(i), &ps))
        .collect::<Result<_>>()?;
    Ok(WignerMap {
        grid: *grid,
        values: rows.into_iter().flatten().collect(),
    })
}

/// Single-point version of [`wigner_numeric`].
pub fn wigner_numeric_point(state: &SuperpositionState, x: f64, p: f64) -> Result<f64> {
    let integrand = RowIntegrand::new(state, WINDOW_W0);
    Ok(wigner_row(&integrand, x, &[p])?[0])
}

/// Mean and variance of the rotated quadrature X cos θ + P sin θ, with
/// X = √2·x/w0 measured from the optical axis and P = w0·p/(√2ħ).
pub fn quadrature_moments(state: &SuperpositionState, theta_l: f64) -> (f64, f64) {
    let terms = state.terms();
    let mut e1 = Complex64::new(0.0, 0.0);
    let mut e2 = Complex64::new(0.0, 0.0);
    let mut en = Complex64::new(0.0, 0.0);
    for k in terms {
        for j in terms {
            let w = k.coeff.conj() * j.coeff * j.mode_overlap(k);
            let (bj, bk) = (j.alpha_x * SQRT_2, k.alpha_x * SQRT_2);
            e1 += w * bj;
            e2 += w * bj * bj;
            en += w * bk.conj() * bj;
        }
    }
    let rot = Complex64::from_polar(1.0, -theta_l);
    let mean = SQRT_2 * (rot * e1).re;
    let second = (rot * rot * e2).re + en.re + 0.5;
    (mean, second - mean * mean)
}

/// Standard deviations and centroids in SI units: (⟨x⟩, Δx, ⟨p⟩, Δp).
pub fn position_momentum_spread(state: &SuperpositionState) -> (f64, f64, f64, f64) {
    let frame = state.frame();
    let (mx, vx) = quadrature_moments(state, 0.0);
    let (mp, vp) = quadrature_moments(state, PI / 2.0);
    (
        frame.nd_to_x(mx, 0.0),
        vx.sqrt() * frame.w0() / SQRT_2,
        frame.nd_to_p(mp),
        frame.nd_to_p(vp.sqrt()),
    )
}

/// Grid centered on the state's centroid spanning ±4 standard deviations per
/// axis, widened by 1.5× until the boundary magnitude is below 1e−8 of the peak.
pub fn auto_grid(state: &SuperpositionState, nx: usize, np: usize) -> Result<PhaseSpaceGrid> {
    let (mx, sx, mp, sp) = position_momentum_spread(state);
    let integrand = RowIntegrand::new(state, WINDOW_W0);
    let mut half = (4.0 * sx, 4.0 * sp);
    let peak = {
        let coarse = PhaseSpaceGrid::new((mx - 3.0 * sx, mx + 3.0 * sx), 33, (mp - 3.0 * sp, mp + 3.0 * sp), 33)?;
        let ps = coarse.ps();
        let mut m = 0.0f64;
        for i in 0..coarse.nx {
            for v in wigner_row(&integrand, coarse.x(i), &ps)? {
                m = m.max(v.abs());
            }
        }
        m
    };
    for _ in 0..12 {
        let grid = PhaseSpaceGrid::new((mx - half.0, mx + half.0), nx, (mp - half.1, mp + half.1), np)?;
        let ps = grid.ps();
        let mut edge = 0.0f64;
        for &i in &[0, grid.nx - 1] {
            for v in wigner_row(&integrand, grid.x(i), &ps)? {
                edge = edge.max(v.abs());
            }
        }
        let rim = [grid.p_min, grid.p_max];
        for i in 0..grid.nx {
            for v in wigner_row(&integrand, grid.x(i), &rim)? {
                edge = edge.max(v.abs());
            }
        }
        if edge <= 1e-8 * peak {
            return Ok(grid);
        }
        half = (half.0 * 1.5, half.1 * 1.5);
    }
    Err(Error::QuadratureNonConvergence {
        location: "auto grid sizing".into(),
        delta: f64::NAN,
        levels: 12,
    })
}

/// Grid minimum, its location and the integrated negative volume (as a positive number).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    pub min_value: f64,
    pub location: (f64, f64),
    pub negative_volume: f64,
}

/// Magnitude below which quadrature values count as zero, relative to 1/(πħ).
pub const NEGATIVITY_FLOOR: f64 = 1e-11;

/// Scans a map for negative values; values within [`NEGATIVITY_FLOOR`] of zero
/// are quadrature round-off and are treated as zero.
pub fn negativity_of(map: &WignerMap) -> NegativityReport {
    let g = &map.grid;
    let floor = NEGATIVITY_FLOOR / (PI * HBAR);
    let mut best = (f64::INFINITY, 0, 0);
    let mut neg = 0.0;
    for i in 0..g.nx {
        for j in 0..g.np {
            let raw = map.at(i, j);
            let v = if raw < 0.0 && raw > -floor { 0.0 } else { raw };
            if v < best.0 {
                best = (v, i, j);
            }
            if v < 0.0 {
                neg -= v;
            }
        }
    }
    NegativityReport {
        min_value: best.0,
        location: (g.x(best.1), g.p(best.2)),
        negative_volume: neg * g.dx() * g.dp(),
    }
}

pub fn negativity_scan(state: &SuperpositionState, grid: &PhaseSpaceGrid) -> Result<NegativityReport> {
    Ok(negativity_of(&wigner_numeric(state, grid)?))
}
