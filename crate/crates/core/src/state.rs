//! Displaced-Gaussian (coherent) terms and their finite superpositions.
//!
//! Amplitudes follow the transverse-mode convention cos θ_d = ⟨vac|coh⟩ =
//! exp(−|α|²): a real amplitude α displaces the beam by d = √2·w0·α and an
//! imaginary part tilts it by a transverse wavenumber 2√2·Im α / w0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ModeFrame;

/// ⟨β|α⟩ for two coherent terms, so that ⟨0|α⟩ = e^{−|α|²} for real α.
pub fn coherent_overlap(alpha: Complex64, beta: Complex64) -> Complex64 {
    (-alpha.norm_sqr() - beta.norm_sqr() + 2.0 * beta.conj() * alpha).exp()
}

/// Normalized 1D coherent wavefunction ⟨x|α⟩ along one transverse axis.
pub fn coherent_wavefunction(alpha: Complex64, w0: f64, x: f64) -> Complex64 {
    let (x0, kappa0) = center_and_tilt(alpha, w0);
    let u = (x - x0) / w0;
    let amp = (2.0 / (std::f64::consts::PI * w0 * w0)).powf(0.25) * (-u * u).exp();
    Complex64::from_polar(amp, kappa0 * (x - 0.5 * x0))
}

/// Normalized 1D momentum-space wavefunction over the transverse wavenumber κ = p/ħ.
pub fn coherent_wavefunction_k(alpha: Complex64, w0: f64, kappa: f64) -> Complex64 {
    let (x0, kappa0) = center_and_tilt(alpha, w0);
    let v = w0 * (kappa - kappa0) / 2.0;
    let amp = (w0 * w0 / (2.0 * std::f64::consts::PI)).powf(0.25) * (-v * v).exp();
    Complex64::from_polar(amp, -x0 * (kappa - 0.5 * kappa0))
}

/// Beam center x0 (m) and tilt wavenumber κ0 (rad/m) of a coherent amplitude.
pub fn center_and_tilt(alpha: Complex64, w0: f64) -> (f64, f64) {
    let beta = alpha * std::f64::consts::SQRT_2;
    (w0 * beta.re, 2.0 * beta.im / w0)
}

/// One displaced-Gaussian term of a superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentTerm {
    pub coeff: Complex64,
    pub alpha_x: Complex64,
    pub alpha_y: Complex64,
}

impl CoherentTerm {
    pub fn new(coeff: Complex64, alpha_x: Complex64, alpha_y: Complex64) -> Self {
        Self {
            coeff,
            alpha_x,
            alpha_y,
        }
    }

    /// Term displaced along x only, by a real amplitude.
    pub fn along_x(coeff: Complex64, alpha: f64) -> Self {
        Self::new(coeff, Complex64::new(alpha, 0.0), Complex64::new(0.0, 0.0))
    }

    /// Overlap of the unweighted term wavefunctions, ⟨other|self⟩.
    pub fn mode_overlap(&self, other: &CoherentTerm) -> Complex64 {
        coherent_overlap(self.alpha_x, other.alpha_x) * coherent_overlap(self.alpha_y, other.alpha_y)
    }
}

/// Normalized finite sum of coherent terms sharing one mode frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionState {
    frame: ModeFrame,
    terms: Vec<CoherentTerm>,
    norm: f64,
    collapsed: bool,
}

impl SuperpositionState {
    /// Builds and normalizes the state; `norm` caches ⟨ψ|ψ⟩ of the input sum.
    pub fn new(frame: ModeFrame, terms: Vec<CoherentTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyState);
        }
        for t in &terms {
            let finite = [t.coeff, t.alpha_x, t.alpha_y]
                .iter()
                .all(|z| z.re.is_finite() && z.im.is_finite());
            if !finite {
                return Err(Error::param("terms", "non-finite coefficient or amplitude"));
            }
        }
        let norm = bilinear(&terms, &terms).re;
        if !(norm > 1e-300) {
            return Err(Error::EmptyState);
        }
        let scale = 1.0 / norm.sqrt();
        let terms = terms
            .into_iter()
            .map(|t| CoherentTerm {
                coeff: t.coeff * scale,
                ..t
            })
            .collect();
        Ok(Self {
            frame,
            terms,
            norm,
            collapsed: false,
        })
    }

    pub fn vacuum(frame: ModeFrame) -> Self {
        Self::new(frame, vec![CoherentTerm::along_x(Complex64::new(1.0, 0.0), 0.0)]).expect("vacuum is normalizable")
    }

    pub(crate) fn mark_collapsed(mut self) -> Self {
        self.collapsed = true;
        self
    }

    pub fn frame(&self) -> &ModeFrame {
        &self.frame
    }

    pub fn terms(&self) -> &[CoherentTerm] {
        &self.terms
    }

    /// ⟨ψ|ψ⟩ of the sum before normalization.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// True when a two-beam construction degenerated to a single Gaussian (d = 0).
    pub fn is_collapsed(&self) -> bool {
        self.collapsed
    }

    /// All terms share the same y amplitude, so the state factorizes in x and y.
    pub fn is_x_separable(&self) -> bool {
        let ay = self.terms[0].alpha_y;
        self.terms.iter().all(|t| t.alpha_y == ay)
    }

    /// Envelope ψ(x, y) at the focal plane.
    pub fn wavefunction(&self, x: f64, y: f64) -> Complex64 {
        let w0 = self.frame.w0();
        self.terms
            .iter()
            .map(|t| t.coeff * coherent_wavefunction(t.alpha_x, w0, x) * coherent_wavefunction(t.alpha_y, w0, y))
            .sum()
    }

    /// Momentum-space wavefunction over transverse wavenumbers (κx, κy).
    pub fn wavefunction_k(&self, kx: f64, ky: f64) -> Complex64 {
        let w0 = self.frame.w0();
        self.terms
            .iter()
            .map(|t| t.coeff * coherent_wavefunction_k(t.alpha_x, w0, kx) * coherent_wavefunction_k(t.alpha_y, w0, ky))
            .sum()
    }

    /// y-integrated intensity |ψ|² along x, per metre.
    pub fn position_density(&self, x: f64) -> f64 {
        let w0 = self.frame.w0();
        let amps: Vec<Complex64> = self
            .terms
            .iter()
            .map(|t| t.coeff * coherent_wavefunction(t.alpha_x, w0, x))
            .collect();
        self.y_traced(&amps)
    }

    /// ky-integrated intensity over the transverse wavenumber κx, per rad/m.
    pub fn wavenumber_density(&self, kappa: f64) -> f64 {
        let w0 = self.frame.w0();
        let amps: Vec<Complex64> = self
            .terms
            .iter()
            .map(|t| t.coeff * coherent_wavefunction_k(t.alpha_x, w0, kappa))
            .collect();
        self.y_traced(&amps)
    }

    fn y_traced(&self, amps: &[Complex64]) -> f64 {
        let mut acc = 0.0;
        for (i, ti) in self.terms.iter().enumerate() {
            acc += amps[i].norm_sqr();
            for (j, tj) in self.terms.iter().enumerate().skip(i + 1) {
                let oy = coherent_overlap(tj.alpha_y, ti.alpha_y);
                acc += 2.0 * (amps[i].conj() * amps[j] * oy).re;
            }
        }
        acc.max(0.0)
    }

    /// Applies a displacement D_x(γx)·D_y(γy) to every term.
    pub fn displaced(&self, gamma_x: Complex64, gamma_y: Complex64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| CoherentTerm {
                coeff: t.coeff * displacement_phase(gamma_x, t.alpha_x) * displacement_phase(gamma_y, t.alpha_y),
                alpha_x: t.alpha_x + gamma_x,
                alpha_y: t.alpha_y + gamma_y,
            })
            .collect();
        Self {
            frame: self.frame,
            terms,
            norm: self.norm,
            collapsed: self.collapsed,
        }
    }

    /// Maps every amplitude through `f`, keeping coefficients; used by phase-space rotations.
    pub(crate) fn map_amplitudes(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| CoherentTerm {
                coeff: t.coeff,
                alpha_x: f(t.alpha_x),
                alpha_y: f(t.alpha_y),
            })
            .collect();
        Self {
            frame: self.frame,
            terms,
            norm: self.norm,
            collapsed: self.collapsed,
        }
    }
}

/// Phase picked up by D(γ)|α⟩ = e^{i·Im(2γᾱ)}|α+γ⟩ in this amplitude convention.
fn displacement_phase(gamma: Complex64, alpha: Complex64) -> Complex64 {
    Complex64::from_polar(1.0, (2.0 * gamma * alpha.conj()).im)
}

fn bilinear(bra: &[CoherentTerm], ket: &[CoherentTerm]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for b in bra {
        for k in ket {
            acc += b.coeff.conj() * k.coeff * k.mode_overlap(b);
        }
    }
    acc
}

/// ⟨a|b⟩, antilinear in the first argument.
pub fn inner_product(a: &SuperpositionState, b: &SuperpositionState) -> Result<Complex64> {
    if a.frame != b.frame {
        return Err(Error::FrameMismatch);
    }
    Ok(bilinear(&a.terms, &b.terms))
}

/// |⟨a|b⟩|² for states known to share a frame.
pub fn fidelity(a: &SuperpositionState, b: &SuperpositionState) -> Result<f64> {
    inner_product(a, b).map(|z| z.norm_sqr())
}
