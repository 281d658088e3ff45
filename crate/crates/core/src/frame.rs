//! Mode conventions: the vacuum beam waist and wavelength fix every length,
//! momentum and angle scale used elsewhere in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum (m/s).
pub const C: f64 = 299_792_458.0;

/// Beam waist and wavelength of the vacuum transverse mode.
///
/// `w0` is the intensity-1/e² radius at the focal plane. The transverse
/// momentum of a plane-wave component with transverse wavenumber `kx` is
/// `ħ·kx`, so every wavefunction is independent of ħ; only Wigner and
/// momentum-density normalizations carry it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeFrame {
    w0: f64,
    lambda: f64,
}

impl ModeFrame {
    pub fn new(w0: f64, lambda: f64) -> Result<Self> {
        if !(w0.is_finite() && w0 > 0.0) {
            return Err(Error::param("w0", format!("must be positive, got {w0}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
        }
        Ok(Self { w0, lambda })
    }

    /// The laboratory frame: w0 = 0.12 mm, λ = 780 nm.
    pub fn laboratory() -> Self {
        Self {
            w0: 0.12e-3,
            lambda: 780e-9,
        }
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Wavenumber k = 2π/λ (rad/m).
    pub fn k(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda
    }

    /// Rayleigh range z_R = k·w0²/2.
    pub fn rayleigh_range(&self) -> f64 {
        self.k() * self.w0 * self.w0 / 2.0
    }

    /// Mass of the equivalent free particle, m' = ħk/c.
    pub fn effective_mass(&self) -> f64 {
        HBAR * self.k() / C
    }

    /// Nondimensional position X = √2·(x − center)/w0.
    pub fn x_to_nd(&self, x: f64, center: f64) -> f64 {
        std::f64::consts::SQRT_2 * (x - center) / self.w0
    }

    pub fn nd_to_x(&self, big_x: f64, center: f64) -> f64 {
        center + big_x * self.w0 / std::f64::consts::SQRT_2
    }

    /// Nondimensional momentum P = w0·p/(√2ħ).
    pub fn p_to_nd(&self, p: f64) -> f64 {
        self.w0 * p / (std::f64::consts::SQRT_2 * HBAR)
    }

    pub fn nd_to_p(&self, big_p: f64) -> f64 {
        big_p * std::f64::consts::SQRT_2 * HBAR / self.w0
    }

    /// Displacement d corresponding to a real amplitude α: d = √2·w0·α.
    pub fn alpha_to_displacement(&self, alpha: f64) -> f64 {
        std::f64::consts::SQRT_2 * self.w0 * alpha
    }

    pub fn displacement_to_alpha(&self, d: f64) -> f64 {
        d / (std::f64::consts::SQRT_2 * self.w0)
    }
}

impl Default for ModeFrame {
    fn default() -> Self {
        Self::laboratory()
    }
}
