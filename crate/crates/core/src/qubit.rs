//! Two-beam qubit construction: interferometer parameters (T, φ, d), the
//! eight typical states and the maps between (T, φ) and the Bloch sphere
//! spanned by the orthonormal pole states {|x−⟩, |x+⟩}.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ModeFrame;
use crate::state::{CoherentTerm, SuperpositionState};

/// Wraps an angle to [0, 2π).
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Representative of an angle in (−π, π].
pub fn signed_angle(phi: f64) -> f64 {
    let w = wrap_angle(phi);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Non-orthogonality of the vacuum and coherent beams, cos θ_d = ⟨vac|coh⟩ = e^{−|α|²}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapAngle {
    theta_d: f64,
}

impl OverlapAngle {
    pub fn new(theta_d: f64) -> Result<Self> {
        if !(theta_d > 0.0 && theta_d < PI / 2.0) {
            return Err(Error::param("theta_d", format!("must lie in (0, pi/2), got {theta_d}")));
        }
        Ok(Self { theta_d })
    }

    pub fn from_alpha(alpha: f64) -> Result<Self> {
        let cos = (-alpha * alpha).exp();
        Self::new(cos.acos())
    }

    pub fn from_displacement(d: f64, frame: &ModeFrame) -> Result<Self> {
        Self::from_alpha(frame.displacement_to_alpha(d))
    }

    pub fn theta_d(&self) -> f64 {
        self.theta_d
    }

    pub fn cos(&self) -> f64 {
        self.theta_d.cos()
    }

    pub fn sin(&self) -> f64 {
        self.theta_d.sin()
    }

    /// Real amplitude |α| = √(−ln cos θ_d).
    pub fn alpha(&self) -> f64 {
        (-self.cos().ln()).sqrt()
    }

    pub fn displacement(&self, frame: &ModeFrame) -> f64 {
        frame.alpha_to_displacement(self.alpha())
    }

    /// N₊ = 1 + cos θ_d, normalization of the even cat.
    pub fn n_plus(&self) -> f64 {
        1.0 + self.cos()
    }

    /// N₋ = 1 − cos θ_d, normalization of the odd cat.
    pub fn n_minus(&self) -> f64 {
        1.0 - self.cos()
    }
}

/// Interferometer settings: transmittance T, relative phase φ and displacement d (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    t: f64,
    phi: f64,
    d: f64,
}

impl QubitParams {
    pub fn new(t: f64, phi: f64, d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::param("T", format!("must lie in [0, 1], got {t}")));
        }
        if !phi.is_finite() {
            return Err(Error::param("phi", "must be finite"));
        }
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::param("d", format!("must be non-negative, got {d}")));
        }
        Ok(Self {
            t,
            phi: wrap_angle(phi),
            d,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Relative phase in [0, 2π).
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Relative phase in (−π, π].
    pub fn phi_signed(&self) -> f64 {
        signed_angle(self.phi)
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Cross-term weight √(T(1−T)).
    pub fn cross_weight(&self) -> f64 {
        (self.t * (1.0 - self.t)).sqrt()
    }

    pub fn overlap_angle(&self, frame: &ModeFrame) -> Result<OverlapAngle> {
        OverlapAngle::from_displacement(self.d, frame)
    }

    /// N_arb evaluated directly from the stored displacement; valid for d = 0 too.
    pub fn norm_factor(&self, frame: &ModeFrame) -> f64 {
        let alpha = frame.displacement_to_alpha(self.d);
        1.0 + 2.0 * self.cross_weight() * (-alpha * alpha).exp() * self.phi.cos()
    }
}

/// Unit Bloch vector in the {|x−⟩, |x+⟩} basis (|x−⟩ at the north pole).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub xq: f64,
    pub yq: f64,
    pub zq: f64,
}

impl BlochVector {
    /// Accepts vectors within 1e−9 of unit length and renormalizes them.
    pub fn new(xq: f64, yq: f64, zq: f64) -> Result<Self> {
        let r = (xq * xq + yq * yq + zq * zq).sqrt();
        if !r.is_finite() || (r - 1.0).abs() > 1e-9 {
            return Err(Error::param(
                "bloch",
                format!("vector must have unit length, got |b| = {r}"),
            ));
        }
        Ok(Self {
            xq: xq / r,
            yq: yq / r,
            zq: zq / r,
        })
    }

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            xq: theta.sin() * phi.cos(),
            yq: theta.sin() * phi.sin(),
            zq: theta.cos(),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.xq * self.xq + self.yq * self.yq + self.zq * self.zq).sqrt()
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        ((self.xq - other.xq).powi(2) + (self.yq - other.yq).powi(2) + (self.zq - other.zq).powi(2)).sqrt()
    }
}

/// N_arb = 1 + 2√(T(1−T))·cos θ_d·cos φ.
pub fn normalization_factor(t: f64, phi: f64, theta: OverlapAngle) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("T", format!("must lie in [0, 1], got {t}")));
    }
    let n = 1.0 + 2.0 * (t * (1.0 - t)).sqrt() * theta.cos() * phi.cos();
    if n <= 1e-15 {
        return Err(Error::DegenerateNormalization { value: n });
    }
    Ok(n)
}

/// √T·|vac⟩ + e^{iφ}√(1−T)·|coh(d)⟩, normalized.
///
/// Zero-weight beams are dropped. With d = 0 both beams coincide and the state
/// collapses to one Gaussian, reported through [`SuperpositionState::is_collapsed`].
pub fn make_qubit_state(params: QubitParams, frame: ModeFrame) -> Result<SuperpositionState> {
    let alpha = frame.displacement_to_alpha(params.d);
    let a = Complex64::new(params.t.sqrt(), 0.0);
    let b = Complex64::from_polar((1.0 - params.t).sqrt(), params.phi);
    if params.d == 0.0 {
        let coeff = a + b;
        if coeff.norm() <= 1e-15 {
            return Err(Error::DegenerateNormalization {
                value: coeff.norm_sqr(),
            });
        }
        return Ok(SuperpositionState::new(frame, vec![CoherentTerm::along_x(coeff, 0.0)])?.mark_collapsed());
    }
    let mut terms = Vec::with_capacity(2);
    if params.t > 0.0 {
        terms.push(CoherentTerm::along_x(a, 0.0));
    }
    if params.t < 1.0 {
        terms.push(CoherentTerm::along_x(b, alpha));
    }
    if terms.len() == 2 {
        let theta = OverlapAngle::from_alpha(alpha)?;
        normalization_factor(params.t, params.phi, theta)?;
    }
    SuperpositionState::new(frame, terms)
}

/// The eight typical states of the two-beam qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypicalKind {
    Vac,
    Coh,
    CatPlus,
    CatMinus,
    XMinus,
    XPlus,
    PMinus,
    PPlus,
}

impl TypicalKind {
    pub const ALL: [TypicalKind; 8] = [
        TypicalKind::Vac,
        TypicalKind::Coh,
        TypicalKind::CatMinus,
        TypicalKind::CatPlus,
        TypicalKind::XMinus,
        TypicalKind::XPlus,
        TypicalKind::PMinus,
        TypicalKind::PPlus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TypicalKind::Vac => "vac",
            TypicalKind::Coh => "coh",
            TypicalKind::CatPlus => "cat_plus",
            TypicalKind::CatMinus => "cat_minus",
            TypicalKind::XMinus => "x_minus",
            TypicalKind::XPlus => "x_plus",
            TypicalKind::PMinus => "p_minus",
            TypicalKind::PPlus => "p_plus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }

    /// Generating (T, φ) for this state at overlap angle θ_d.
    pub fn params(&self, theta: OverlapAngle) -> (f64, f64) {
        let (s, th) = (theta.sin(), theta.theta_d());
        match self {
            TypicalKind::Vac => (1.0, 0.0),
            TypicalKind::Coh => (0.0, 0.0),
            TypicalKind::CatPlus => (0.5, 0.0),
            TypicalKind::CatMinus => (0.5, PI),
            TypicalKind::XMinus => ((1.0 + s) / 2.0, PI),
            TypicalKind::XPlus => ((1.0 - s) / 2.0, PI),
            TypicalKind::PMinus => (0.5, -(PI - th)),
            TypicalKind::PPlus => (0.5, PI - th),
        }
    }
}

pub fn make_typical_state(
    kind: TypicalKind,
    theta: OverlapAngle,
    frame: ModeFrame,
) -> Result<(QubitParams, SuperpositionState)> {
    let (t, phi) = kind.params(theta);
    let params = QubitParams::new(t, phi, theta.displacement(&frame))?;
    let state = make_qubit_state(params, frame)?;
    Ok((params, state))
}

/// Inverts the Bloch parametrization back to interferometer settings.
///
/// At the removable singularity x_q = cos θ_d, y_q = 0 (the bare vacuum or
/// coherent beam) the phase is set to 0.
pub fn bloch_to_params(b: BlochVector, theta: OverlapAngle, frame: &ModeFrame) -> Result<QubitParams> {
    let (c, s) = (theta.cos(), theta.sin());
    let den = 1.0 - b.xq * c;
    if den <= 0.0 {
        return Err(Error::InvalidBloch { denominator: den });
    }
    let t = (0.5 * (1.0 + b.zq * s / den)).clamp(0.0, 1.0);
    let (re, im) = (b.xq - c, b.yq * s);
    let phi = if re.hypot(im) < 1e-14 { 0.0 } else { im.atan2(re) };
    QubitParams::new(t, phi, theta.displacement(frame))
}

/// Projects √T|vac⟩ + e^{iφ}√(1−T)|coh⟩ on the pole states and returns its Bloch vector.
///
/// Only (T, φ) are read from `params`; the overlap angle is taken from `theta`.
pub fn params_to_bloch(params: QubitParams, theta: OverlapAngle) -> BlochVector {
    let c = theta.cos();
    let (cd, sd) = ((theta.theta_d() / 2.0).cos(), (theta.theta_d() / 2.0).sin());
    let (plus, minus) = (cd + sd, cd - sd);
    let a = Complex64::new(params.t.sqrt(), 0.0);
    let b = Complex64::from_polar((1.0 - params.t).sqrt(), params.phi);
    // ⟨vac|ψ⟩ and ⟨coh|ψ⟩ up to the common normalization.
    let on_vac = a + b * c;
    let on_coh = a * c + b;
    // |x−⟩ ∝ (c_d+s_d)|vac⟩ − (c_d−s_d)|coh⟩ and |x+⟩ ∝ −(c_d−s_d)|vac⟩ + (c_d+s_d)|coh⟩.
    let u_minus = on_vac * plus - on_coh * minus;
    let u_plus = on_coh * plus - on_vac * minus;
    let n = u_minus.norm_sqr() + u_plus.norm_sqr();
    let cross = u_minus.conj() * u_plus;
    BlochVector {
        xq: 2.0 * cross.re / n,
        yq: 2.0 * cross.im / n,
        zq: (u_minus.norm_sqr() - u_plus.norm_sqr()) / n,
    }
}
