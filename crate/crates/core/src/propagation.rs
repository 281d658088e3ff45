//! Paraxial free-space propagation, ray matrices and phase-space rotations.
//!
//! The envelope obeys ∂Ψ/∂z = (i/2k)∇⊥²Ψ, i.e. the Schrödinger equation of a
//! free particle of mass m' = ħk/c with time z/c. A Gaussian beam is
//! Ψ ∝ exp(ikx²/(2q)) with q(z) = z − i·z_R.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ModeFrame;
use crate::state::{center_and_tilt, SuperpositionState};

/// Gaussian-beam parameters of the vacuum mode at distance `z` from the focus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    pub z: f64,
    /// 1/e² intensity radius.
    pub w: f64,
    /// Wavefront radius; `f64::INFINITY` at the waist.
    pub r: f64,
    /// Gouy phase −arctan(z/z_R) of the two-dimensional beam.
    pub gouy: f64,
    /// Complex beam parameter q = z − i·z_R, so 1/q = 1/R + 2i/(k w²).
    pub q: Complex64,
}

pub fn beam_params_at(frame: &ModeFrame, z: f64) -> BeamParams {
    let zr = frame.rayleigh_range();
    let w = frame.w0() * (1.0 + (z / zr).powi(2)).sqrt();
    let r = if z == 0.0 {
        f64::INFINITY
    } else {
        z * (1.0 + (zr / z).powi(2))
    };
    BeamParams {
        z,
        w,
        r,
        gouy: -(z / zr).atan(),
        q: Complex64::new(z, -zr),
    }
}

/// 2×2 ray-transfer matrix acting on (x, v_x) with v_x = p_x/(ħk).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayMatrix {
    pub const IDENTITY: RayMatrix = RayMatrix {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Matrix product `self · rhs` (rhs acts first).
    pub fn then_after(&self, rhs: &RayMatrix) -> RayMatrix {
        RayMatrix {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn apply(&self, x: f64, v: f64) -> (f64, f64) {
        (self.a * x + self.b * v, self.c * x + self.d * v)
    }

    pub fn max_abs_diff(&self, other: &RayMatrix) -> f64 {
        [self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn ray_free(z: f64) -> RayMatrix {
    RayMatrix {
        a: 1.0,
        b: z,
        c: 0.0,
        d: 1.0,
    }
}

pub fn ray_lens(f: f64) -> Result<RayMatrix> {
    if f == 0.0 || !f.is_finite() {
        return Err(Error::param("f", "focal length must be finite and non-zero"));
    }
    Ok(RayMatrix {
        a: 1.0,
        b: 0.0,
        c: -1.0 / f,
        d: 1.0,
    })
}

/// Product of the matrices in written order; the last element acts first.
pub fn compose(elements: &[RayMatrix]) -> RayMatrix {
    elements.iter().fold(RayMatrix::IDENTITY, |acc, m| acc.then_after(m))
}

/// Lens of focal length `f` with equal spacings L1 = L2 = f(1 − cos θ_L)
/// before and after it, which rotates phase space by θ_L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensSystem {
    pub f: f64,
    pub theta_l: f64,
}

impl LensSystem {
    pub fn new(f: f64, theta_l: f64) -> Result<Self> {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::param("f", "focal length must be positive"));
        }
        if !(theta_l > 0.0 && theta_l <= PI) {
            return Err(Error::param("theta_L", format!("must lie in (0, pi], got {theta_l}")));
        }
        Ok(Self { f, theta_l })
    }

    pub fn spacing(&self) -> f64 {
        self.f * (1.0 - self.theta_l.cos())
    }

    /// Conversion factor f0 = f·sin θ_L between slope and position.
    pub fn f0(&self) -> f64 {
        self.f * self.theta_l.sin()
    }

    /// free(L2) · lens(f) · free(L1).
    pub fn composed(&self) -> RayMatrix {
        let l = self.spacing();
        compose(&[ray_free(l), ray_lens(self.f).expect("validated"), ray_free(l)])
    }

    /// [[cos θ, f0 sin θ], [−sin θ/f0, cos θ]].
    pub fn rotation_matrix(&self) -> RayMatrix {
        let (s, c) = self.theta_l.sin_cos();
        let f0 = self.f0();
        // sin θ/f0 = 1/f, including the θ_L = π limit where f0 = 0.
        let lower = if f0 != 0.0 { -s / f0 } else { -1.0 / self.f };
        RayMatrix {
            a: c,
            b: f0 * s,
            c: lower,
            d: c,
        }
    }
}

/// CCD-plane coordinate x' = p_x·f/(ħk) of the momentum image behind a θ_L = π/2 lens system.
pub fn momentum_plane_coordinate(frame: &ModeFrame, f: f64, p: f64) -> f64 {
    p * f / (crate::frame::HBAR * frame.k())
}

pub fn momentum_from_plane_coordinate(frame: &ModeFrame, f: f64, x_prime: f64) -> f64 {
    x_prime * crate::frame::HBAR * frame.k() / f
}

/// Graded-index fiber; `period` is the ray zigzag length cT' = 2πc/ω_GI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub period: f64,
}

impl FiberSpec {
    pub fn new(period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::param("period", "cT' must be positive"));
        }
        Ok(Self { period })
    }

    pub fn from_omega(omega_gi: f64) -> Result<Self> {
        Self::new(TAU * crate::frame::C / omega_gi)
    }

    pub fn rotation_angle(&self, length: f64) -> f64 {
        TAU * length / self.period
    }
}

/// Rotates phase space by θ about the optical axis: every amplitude α → α·e^{−iθ}
/// on both transverse axes. θ = π/2 maps positions onto momenta.
pub fn rotate_phase_space(state: &SuperpositionState, theta: f64) -> SuperpositionState {
    let r = Complex64::from_polar(1.0, -theta);
    state.map_amplitudes(|a| a * r)
}

pub fn gi_fiber_evolve(state: &SuperpositionState, length: f64, fiber: &FiberSpec) -> Result<SuperpositionState> {
    if !(length >= 0.0) {
        return Err(Error::param("length", "must be non-negative"));
    }
    Ok(rotate_phase_space(state, fiber.rotation_angle(length)))
}

/// One transverse factor of a coherent term after free propagation over `z`.
///
/// The displaced, tilted Gaussian follows from the centered beam by a
/// Galilean boost: its center drifts as x0 + κ0·z/k.
pub fn propagated_coherent(alpha: Complex64, frame: &ModeFrame, z: f64, x: f64) -> Complex64 {
    let w0 = frame.w0();
    let k = frame.k();
    let zr = frame.rayleigh_range();
    let (x0, kappa0) = center_and_tilt(alpha, w0);
    let q0 = Complex64::new(0.0, -zr);
    let q = Complex64::new(z, -zr);
    let u = x - x0 - kappa0 * z / k;
    let norm = (2.0 / (PI * w0 * w0)).powf(0.25);
    let gaussian = (q0 / q).sqrt() * (Complex64::i() * k * u * u / (2.0 * q)).exp();
    let phase = kappa0 * (x - 0.5 * x0) - kappa0 * kappa0 * z / (2.0 * k);
    gaussian * Complex64::from_polar(norm, phase)
}

/// A superposition evaluated at the plane z.
#[derive(Debug, Clone)]
pub struct PropagatedState {
    pub state: SuperpositionState,
    pub z: f64,
}

impl PropagatedState {
    pub fn envelope(&self, x: f64, y: f64) -> Complex64 {
        let f = self.state.frame();
        self.state
            .terms()
            .iter()
            .map(|t| {
                t.coeff * propagated_coherent(t.alpha_x, f, self.z, x) * propagated_coherent(t.alpha_y, f, self.z, y)
            })
            .sum()
    }

    /// x factor of an x-separable state, normalized on its own.
    pub fn x_envelope(&self, x: f64) -> Result<Complex64> {
        if !self.state.is_x_separable() {
            return Err(Error::param(
                "state",
                "terms have different y amplitudes; no separate x envelope",
            ));
        }
        let f = self.state.frame();
        let y_norm = self.state.terms()[0].mode_overlap(&self.state.terms()[0]).re.sqrt();
        Ok(self
            .state
            .terms()
            .iter()
            .map(|t| t.coeff * propagated_coherent(t.alpha_x, f, self.z, x))
            .sum::<Complex64>()
            * y_norm)
    }

    pub fn sample_x(&self, grid: &SampleGrid) -> Result<EnvelopeSamples> {
        let values = grid.xs().map(|x| self.x_envelope(x)).collect::<Result<_>>()?;
        Ok(EnvelopeSamples { grid: *grid, values })
    }
}

pub fn propagate_analytic(state: &SuperpositionState, z: f64) -> PropagatedState {
    PropagatedState {
        state: state.clone(),
        z,
    }
}

/// Uniform 1D sampling: n points starting at `x0` with spacing `dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl SampleGrid {
    pub fn new(x0: f64, dx: f64, n: usize) -> Result<Self> {
        if n < 2 || !(dx > 0.0) || !x0.is_finite() {
            return Err(Error::param("grid", "need n >= 2 and dx > 0"));
        }
        Ok(Self { x0, dx, n })
    }

    /// n points spanning [lo, hi].
    pub fn spanning(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::param("grid", "hi must exceed lo"));
        }
        Self::new(lo, (hi - lo) / (n.max(2) - 1) as f64, n)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    pub fn last(&self) -> f64 {
        self.x(self.n - 1)
    }
}

/// Complex envelope samples on one transverse axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSamples {
    pub grid: SampleGrid,
    pub values: Vec<Complex64>,
}

impl EnvelopeSamples {
    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn centroid(&self) -> f64 {
        let p = self.power();
        self.grid
            .xs()
            .zip(&self.values)
            .map(|(x, v)| x * v.norm_sqr())
            .sum::<f64>()
            * self.grid.dx
            / p
    }

    /// 1/e² radius from the second moment, w = 2·√⟨(x − ⟨x⟩)²⟩.
    pub fn moment_radius(&self) -> f64 {
        let p = self.power();
        let c = self.centroid();
        let var = self
            .grid
            .xs()
            .zip(&self.values)
            .map(|(x, v)| (x - c).powi(2) * v.norm_sqr())
            .sum::<f64>()
            * self.grid.dx
            / p;
        2.0 * var.sqrt()
    }

    /// Relative RMS difference sqrt(Σ|a−b|² / Σ|b|²) against a reference on the same grid.
    pub fn relative_rms(&self, reference: &EnvelopeSamples) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = reference.values.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }

    pub fn scaled_sum(&self, a: Complex64, other: &EnvelopeSamples, b: Complex64) -> EnvelopeSamples {
        EnvelopeSamples {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| a * u + b * v)
                .collect(),
        }
    }

    /// CSV with header `x,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,re,im\n");
        for (x, v) in self.grid.xs().zip(&self.values) {
            out.push_str(&format!("{x:.12e},{:.12e},{:.12e}\n", v.re, v.im));
        }
        out
    }
}

/// Free propagation of sampled 1D envelopes by direct summation of the
/// Fresnel kernel K(x, x'; z) = √(k/(2πiz))·exp(ik(x−x')²/(2z)).
///
/// The input step must resolve the kernel chirp over the output window, and
/// the output window must keep the power to within 1e−6; either failure is an error.
pub fn propagate_kernel(input: &EnvelopeSamples, z: f64, k: f64, output: &SampleGrid) -> Result<EnvelopeSamples> {
    if z == 0.0 {
        if input.grid != *output {
            return Err(Error::param(
                "output",
                "at z = 0 the output grid must equal the input grid",
            ));
        }
        return Ok(input.clone());
    }
    let peak = input.values.iter().fold(0.0f64, |m, v| m.max(v.norm_sqr()));
    let support: Vec<f64> = input
        .grid
        .xs()
        .zip(&input.values)
        .filter(|(_, v)| v.norm_sqr() > 1e-20 * peak)
        .map(|(x, _)| x)
        .collect();
    if support.is_empty() {
        return Err(Error::EmptyState);
    }
    let (s_lo, s_hi) = (support[0], support[support.len() - 1]);
    let reach = (output.last() - s_lo).abs().max((output.x0 - s_hi).abs());
    let max_phase_step = k * reach * input.grid.dx / z.abs();
    if max_phase_step > PI / 2.0 {
        return Err(Error::param(
            "dx",
            format!("input step undersamples the kernel chirp (phase step {max_phase_step:.3} rad > pi/2)"),
        ));
    }
    let pref = (Complex64::new(k / (TAU * z), 0.0) / Complex64::i()).sqrt() * input.grid.dx;
    let xin: Vec<f64> = input.grid.xs().collect();
    let values: Vec<Complex64> = (0..output.n)
        .into_par_iter()
        .map(|i| {
            let x = output.x(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (xp, v) in xin.iter().zip(&input.values) {
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let dx = x - xp;
                acc += v * Complex64::from_polar(1.0, k * dx * dx / (2.0 * z));
            }
            acc * pref
        })
        .collect();
    let out = EnvelopeSamples { grid: *output, values };
    let lost = (input.power() - out.power()) / input.power();
    if lost.abs() > 1e-6 {
        return Err(Error::WindowUndersampled { lost });
    }
    Ok(out)
}

/// Sampling suited to the kernel: input step resolving the chirp and an output
/// window of ±8 w(z) beyond the state's extent.
pub fn kernel_grids(state: &SuperpositionState, z: f64) -> Result<(SampleGrid, SampleGrid)> {
    let frame = state.frame();
    let w0 = frame.w0();
    let k = frame.k();
    let beam = beam_params_at(frame, z);
    let centers: Vec<(f64, f64)> = state
        .terms()
        .iter()
        .map(|t| {
            let (x0, k0) = center_and_tilt(t.alpha_x, w0);
            (x0, x0 + k0 * z / k)
        })
        .collect();
    let in_lo = centers.iter().map(|c| c.0).fold(f64::INFINITY, f64::min) - 8.0 * w0;
    let in_hi = centers.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max) + 8.0 * w0;
    let out_lo = centers.iter().map(|c| c.1).fold(f64::INFINITY, f64::min) - 8.0 * beam.w;
    let out_hi = centers.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max) + 8.0 * beam.w;
    let reach = (out_hi - in_lo).abs().max((out_lo - in_hi).abs());
    let chirp_step = if z == 0.0 {
        f64::INFINITY
    } else {
        PI / 4.0 * z.abs() / (k * reach)
    };
    let dx_in = (w0 / 16.0).min(chirp_step);
    let n_in = ((in_hi - in_lo) / dx_in).ceil() as usize + 1;
    let input = SampleGrid::new(in_lo, dx_in, n_in)?;
    let dx_out = beam.w / 32.0;
    let n_out = ((out_hi - out_lo) / dx_out).ceil() as usize + 1;
    Ok((input, SampleGrid::new(out_lo, dx_out, n_out)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{make_typical_state, OverlapAngle, TypicalKind};
    use crate::state::{fidelity, CoherentTerm};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn frame() -> ModeFrame {
        ModeFrame::new(0.12e-3, 780e-9).unwrap()
    }

    fn typical(kind: TypicalKind) -> SuperpositionState {
        make_typical_state(kind, OverlapAngle::from_alpha(FRAC_1_SQRT_2).unwrap(), frame())
            .unwrap()
            .1
    }

    #[test]
    fn beam_parameter_examples() {
        let f = frame();
        let zr = f.rayleigh_range();
        assert!((zr - 0.05800).abs() / 0.058 < 1e-3);
        let b0 = beam_params_at(&f, 0.0);
        assert_eq!(b0.w, f.w0());
        assert!(b0.r.is_infinite());
        let b = beam_params_at(&f, zr);
        assert!((b.w - 2f64.sqrt() * f.w0()).abs() < 1e-15);
        for z in [-0.2, 0.01, 0.3] {
            let b = beam_params_at(&f, z);
            assert_eq!(b.w, beam_params_at(&f, -z).w);
            let inv = 1.0 / b.q;
            let expected = Complex64::new(1.0 / b.r, 2.0 / (f.k() * b.w * b.w));
            assert!((inv - expected).norm() < 1e-12 * expected.norm());
        }
    }

    #[test]
    fn diffraction_limit_of_vacuum() {
        let f = frame();
        let dx = f.w0() / 2.0;
        let dv = 1.0 / (f.k() * f.w0());
        assert!((dx * dv - 1.0 / (2.0 * f.k())).abs() * f.k() < 1e-12);
        let (_, sx, _, sp) = crate::wigner::position_momentum_spread(&typical(TypicalKind::Vac));
        let sv = sp / (crate::frame::HBAR * f.k());
        assert!((sx * sv * 2.0 * f.k() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ray_matrices() {
        assert_eq!(ray_free(0.0), RayMatrix::IDENTITY);
        assert!(ray_lens(0.0).is_err());
        let f = 0.145;
        let m = compose(&[ray_free(f), ray_lens(f).unwrap(), ray_free(f)]);
        assert!(
            m.max_abs_diff(&RayMatrix {
                a: 0.0,
                b: f,
                c: -1.0 / f,
                d: 0.0
            }) < 1e-15
        );
        for theta in [PI / 6.0, PI / 3.0, PI / 2.0, 2.0, PI] {
            let sys = LensSystem::new(f, theta).unwrap();
            let (a, b) = (sys.composed(), sys.rotation_matrix());
            assert!(a.max_abs_diff(&b) < 1e-12, "{theta}: {a:?} vs {b:?}");
            assert!((a.det() - 1.0).abs() < 1e-12);
        }
        assert!(LensSystem::new(f, 0.0).is_err());
    }

    #[test]
    fn composition_order() {
        let m = compose(&[ray_free(2.0), ray_lens(1.0).unwrap()]);
        // Lens first, then free space: x' = x + 2(v − x).
        assert_eq!(m.apply(1.0, 0.0), (-1.0, -1.0));
    }

    #[test]
    fn analytic_vacuum_width_and_coherent_drift() {
        let f = frame();
        let zr = f.rayleigh_range();
        for z in [0.0, 0.5 * zr, 2.0 * zr] {
            let s = propagate_analytic(&typical(TypicalKind::Vac), z);
            let w = beam_params_at(&f, z).w;
            let ratio = s.x_envelope(w).unwrap().norm_sqr() / s.x_envelope(0.0).unwrap().norm_sqr();
            assert!((ratio - (-2.0f64).exp()).abs() < 1e-12);
        }
        let coh = typical(TypicalKind::Coh);
        let d = f.alpha_to_displacement(FRAC_1_SQRT_2);
        let (grid, _) = kernel_grids(&coh, zr).unwrap();
        let grid = SampleGrid::spanning(grid.x0 - 10.0 * f.w0(), grid.last() + 10.0 * f.w0(), 4001).unwrap();
        let samples = propagate_analytic(&coh, zr).sample_x(&grid).unwrap();
        assert!((samples.centroid() - d).abs() < 1e-9 * f.w0());
        assert!((samples.power() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tilted_term_drifts_linearly() {
        let f = frame();
        let zr = f.rayleigh_range();
        let tilt = CoherentTerm::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.2, 0.3),
            Complex64::new(0.0, 0.0),
        );
        let s = SuperpositionState::new(f, vec![tilt]).unwrap();
        let (x0, k0) = center_and_tilt(tilt.alpha_x, f.w0());
        let grid = SampleGrid::spanning(x0 - 20.0 * f.w0(), x0 + 20.0 * f.w0(), 6001).unwrap();
        let at = propagate_analytic(&s, zr).sample_x(&grid).unwrap();
        assert!((at.centroid() - (x0 + k0 * zr / f.k())).abs() < 1e-9 * f.w0());
    }

    #[test]
    fn kernel_matches_analytic_and_is_linear() {
        let f = frame();
        let zr = f.rayleigh_range();
        let cat = typical(TypicalKind::CatMinus);
        let (gin, gout) = kernel_grids(&cat, zr).unwrap();
        let input = propagate_analytic(&cat, 0.0).sample_x(&gin).unwrap();
        let kern = propagate_kernel(&input, zr, f.k(), &gout).unwrap();
        let exact = propagate_analytic(&cat, zr).sample_x(&gout).unwrap();
        assert!(kern.relative_rms(&exact) < 1e-6, "{}", kern.relative_rms(&exact));

        let vac = propagate_analytic(&typical(TypicalKind::Vac), 0.0)
            .sample_x(&gin)
            .unwrap();
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(-0.7, 0.4));
        let mixed = input.scaled_sum(a, &vac, b);
        let lhs = propagate_kernel(&mixed, zr, f.k(), &gout).unwrap();
        let rhs = kern.scaled_sum(a, &propagate_kernel(&vac, zr, f.k(), &gout).unwrap(), b);
        assert!(lhs.relative_rms(&rhs) < 1e-10);
    }

    #[test]
    fn kernel_vacuum_widths() {
        let f = frame();
        let vac = typical(TypicalKind::Vac);
        for m in [0.5, 1.0, 3.0] {
            let z = m * f.rayleigh_range();
            let (gin, gout) = kernel_grids(&vac, z).unwrap();
            let input = propagate_analytic(&vac, 0.0).sample_x(&gin).unwrap();
            let out = propagate_kernel(&input, z, f.k(), &gout).unwrap();
            let w = beam_params_at(&f, z).w;
            assert!((out.moment_radius() - w).abs() / w < 1e-3);
        }
    }

    #[test]
    fn kernel_detects_undersampling() {
        let f = frame();
        let vac = typical(TypicalKind::Vac);
        let z = f.rayleigh_range();
        let (gin, _) = kernel_grids(&vac, z).unwrap();
        let input = propagate_analytic(&vac, 0.0).sample_x(&gin).unwrap();
        let narrow = SampleGrid::spanning(-0.5 * f.w0(), 0.5 * f.w0(), 50).unwrap();
        assert!(matches!(
            propagate_kernel(&input, z, f.k(), &narrow),
            Err(Error::WindowUndersampled { .. })
        ));
        let coarse = SampleGrid::spanning(-8.0 * f.w0(), 8.0 * f.w0(), 20).unwrap();
        let input = propagate_analytic(&vac, 0.0).sample_x(&coarse).unwrap();
        assert!(propagate_kernel(&input, 0.01 * z, f.k(), &coarse).is_err());
    }

    #[test]
    fn unitarity_of_analytic_propagation() {
        let f = frame();
        let cat = typical(TypicalKind::CatMinus);
        for z in [0.0, 2.0 * f.rayleigh_range()] {
            let grid = SampleGrid::spanning(-30.0 * f.w0(), 31.0 * f.w0(), 8001).unwrap();
            let s = propagate_analytic(&cat, z).sample_x(&grid).unwrap();
            assert!((s.power() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rotations() {
        let cat = typical(TypicalKind::XMinus);
        let full = rotate_phase_space(&cat, TAU);
        assert!((fidelity(&cat, &full).unwrap() - 1.0).abs() < 1e-12);
        let composed = rotate_phase_space(&rotate_phase_space(&cat, 0.7), 1.9);
        let direct = rotate_phase_space(&cat, 2.6);
        assert!((fidelity(&composed, &direct).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_rotation_maps_momentum_onto_position() {
        let f = frame();
        let (params, state) =
            make_typical_state(TypicalKind::XMinus, OverlapAngle::from_alpha(FRAC_1_SQRT_2).unwrap(), f).unwrap();
        let rotated = rotate_phase_space(&state, PI / 2.0);
        // X_rot = P_orig, i.e. x = w0² p/(2ħ); density transforms with dp/dx = 2ħ/w0².
        let hbar = crate::frame::HBAR;
        let jac = 2.0 * hbar / (f.w0() * f.w0());
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in 0..200 {
            let x = -4.0 * f.w0() + i as f64 * 0.04 * f.w0();
            let rot: f64 = {
                let n = 2000;
                let h = 24.0 * f.w0() / n as f64;
                (0..=n)
                    .map(|j| rotated.wavefunction(x, -12.0 * f.w0() + j as f64 * h).norm_sqr())
                    .sum::<f64>()
                    * h
            };
            let orig = crate::wigner::marginal_momentum(&params, &f, x * jac) * jac;
            err += (rot - orig).powi(2);
            norm += orig * orig;
        }
        assert!((err / norm).sqrt() < 1e-8);
        // Lens-plane scaling: x' = p f/(ħk) equals the rotation scaling when f = z_R.
        let zr = f.rayleigh_range();
        let p = 1.3 * hbar / f.w0();
        assert!((momentum_plane_coordinate(&f, zr, p) - p / jac).abs() < 1e-18);
    }

    #[test]
    fn fiber_rotation() {
        let state = typical(TypicalKind::PPlus);
        let fiber = FiberSpec::new(1e-3).unwrap();
        let back = gi_fiber_evolve(&state, 1e-3, &fiber).unwrap();
        assert!((fidelity(&state, &back).unwrap() - 1.0).abs() < 1e-12);
        let quarter = gi_fiber_evolve(&state, 0.25e-3, &fiber).unwrap();
        let direct = rotate_phase_space(&state, PI / 2.0);
        assert!((fidelity(&quarter, &direct).unwrap() - 1.0).abs() < 1e-12);
        let jitter = gi_fiber_evolve(&state, 780e-9, &fiber).unwrap();
        assert!((fiber.rotation_angle(780e-9) - 4.9e-3).abs() < 1e-4);
        assert!(fidelity(&state, &jitter).unwrap() > 0.9999);
        assert!(gi_fiber_evolve(&state, -1.0, &fiber).is_err());
        let from_omega = FiberSpec::from_omega(TAU * crate::frame::C / 1e-3).unwrap();
        assert!((from_omega.period - 1e-3).abs() < 1e-15);
    }
}
