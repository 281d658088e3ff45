//! Beam-profile sweeps, mode-keyed links, CV-qubit QKD and the dephased mixture.
//!
//! Basis states used by the links are centered on the optical axis: the two
//! beams of an x-axis state sit at ∓α/2, and the y-axis states are their
//! copies along y. Phase-space rotations act about that axis.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ModeFrame, HBAR};
use crate::propagation::{rotate_phase_space, FiberSpec};
use crate::qubit::{make_qubit_state, make_typical_state, OverlapAngle, QubitParams, TypicalKind};
use crate::rng::stream_rng;
use crate::state::{inner_product, CoherentTerm, SuperpositionState};
use crate::wigner::{marginal_position, quadrature_moments, w_vac, PhaseSpaceGrid, WignerMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub phi: f64,
    /// Position spread, metres.
    pub dx: f64,
    /// Vacuum spread w0/2 for reference.
    pub dx_sql: f64,
    /// ⟨v_x⟩ = ⟨p_x⟩/(ħk).
    pub mean_vx: f64,
    /// Position intensity at the midpoint d/2 between the beams, 1/m.
    pub center_intensity: f64,
}

/// Focal-plane statistics along a path of interferometer settings (T, φ).
pub fn profile_sweep(path: &[(f64, f64)], d: f64, frame: &ModeFrame) -> Result<Vec<SweepPoint>> {
    if path.is_empty() {
        return Err(Error::param("path", "needs at least one (T, phi) point"));
    }
    path.iter()
        .map(|&(t, phi)| {
            let params = QubitParams::new(t, phi, d)?;
            let state = make_qubit_state(params, *frame)?;
            let (_, var_x) = quadrature_moments(&state, 0.0);
            let (mean_p, _) = quadrature_moments(&state, PI / 2.0);
            Ok(SweepPoint {
                t,
                phi: params.phi_signed(),
                dx: var_x.sqrt() * frame.w0() / std::f64::consts::SQRT_2,
                dx_sql: frame.w0() / 2.0,
                mean_vx: frame.nd_to_p(mean_p) / (HBAR * frame.k()),
                center_intensity: marginal_position(&params, frame, d / 2.0),
            })
        })
        .collect()
}

/// CSV with header `T,phi,dx,dx_sql,mean_vx,center_intensity`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    crate::io::csv_table(
        &["T", "phi", "dx", "dx_sql", "mean_vx", "center_intensity"],
        points
            .iter()
            .map(|p| vec![p.t, p.phi, p.dx, p.dx_sql, p.mean_vx, p.center_intensity]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisScheme {
    /// Even and odd cats along x and along y.
    FourCat,
    /// The six equator-and-pole states along x plus their y copies.
    TwelveState,
    /// The non-orthogonal pair {vac, coh}.
    FourHgReference,
}

impl BasisScheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "four_cat" => Some(Self::FourCat),
            "twelve_state" => Some(Self::TwelveState),
            "four_hg_reference" => Some(Self::FourHgReference),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::FourCat => "four_cat",
            Self::TwelveState => "twelve_state",
            Self::FourHgReference => "four_hg_reference",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BasisSet {
    pub name: String,
    pub labels: Vec<String>,
    pub states: Vec<SuperpositionState>,
    /// gram[i][j] = ⟨b_i|b_j⟩.
    pub gram: Vec<Vec<Complex64>>,
}

impl BasisSet {
    pub fn new(name: &str, entries: Vec<(String, SuperpositionState)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::param("basis", "needs at least one state"));
        }
        let (labels, states): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let gram = states
            .iter()
            .map(|a| states.iter().map(|b| inner_product(a, b)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.into(),
            labels,
            states,
            gram,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest |G − 1| entry.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }

    /// Index of the state with the largest |⟨b_i|ψ⟩|², lowest index on ties.
    pub fn decide(&self, psi: &SuperpositionState) -> Result<usize> {
        let overlaps = self
            .states
            .iter()
            .map(|b| inner_product(b, psi))
            .collect::<Result<Vec<_>>>()?;
        Ok(argmax(overlaps.iter().map(|o| o.norm_sqr())))
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// a·|u⟩ + b·|v⟩ with equal amplitudes merged, renormalized.
fn combine(u: &SuperpositionState, a: Complex64, v: &SuperpositionState, b: Complex64) -> Result<SuperpositionState> {
    let mut terms: Vec<CoherentTerm> = Vec::new();
    let scaled = u.terms().iter().map(|t| (t, a)).chain(v.terms().iter().map(|t| (t, b)));
    for (t, c) in scaled {
        let coeff = t.coeff * c;
        match terms
            .iter_mut()
            .find(|s| s.alpha_x == t.alpha_x && s.alpha_y == t.alpha_y)
        {
            Some(s) => s.coeff += coeff,
            None => terms.push(CoherentTerm { coeff, ..*t }),
        }
    }
    terms.retain(|t| t.coeff.norm() > 0.0);
    SuperpositionState::new(*u.frame(), terms)
}

fn swap_axes(s: &SuperpositionState) -> Result<SuperpositionState> {
    let terms = s
        .terms()
        .iter()
        .map(|t| CoherentTerm::new(t.coeff, t.alpha_y, t.alpha_x))
        .collect();
    SuperpositionState::new(*s.frame(), terms)
}

/// Typical state translated so its two beams sit at ∓α/2 on the x axis.
pub fn centered_typical(kind: TypicalKind, theta: OverlapAngle, frame: ModeFrame) -> Result<SuperpositionState> {
    let (_, s) = make_typical_state(kind, theta, frame)?;
    Ok(s.displaced(Complex64::new(-theta.alpha() / 2.0, 0.0), Complex64::new(0.0, 0.0)))
}

fn equator_set(
    up: &SuperpositionState,
    down: &SuperpositionState,
    axis: &str,
) -> Result<Vec<(String, SuperpositionState)>> {
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let i = Complex64::new(0.0, FRAC_1_SQRT_2);
    let suffix = if axis == "x" { String::new() } else { format!("_{axis}") };
    Ok(vec![
        (format!("up{suffix}"), up.clone()),
        (format!("down{suffix}"), down.clone()),
        (format!("p{axis}-"), combine(up, r, down, i)?),
        (format!("p{axis}+"), combine(up, r, down, -i)?),
        (format!("{axis}-"), combine(up, r, down, r)?),
        (format!("{axis}+"), combine(up, r, down, -r)?),
    ])
}

pub fn build_basis(scheme: BasisScheme, theta: OverlapAngle, frame: ModeFrame) -> Result<BasisSet> {
    let up = centered_typical(TypicalKind::CatPlus, theta, frame)?;
    let down = centered_typical(TypicalKind::CatMinus, theta, frame)?;
    let entries = match scheme {
        BasisScheme::FourCat => vec![
            ("up".to_string(), up.clone()),
            ("down".to_string(), down.clone()),
            ("up_y".to_string(), swap_axes(&up)?),
            ("down_y".to_string(), swap_axes(&down)?),
        ],
        BasisScheme::TwelveState => {
            let mut v = equator_set(&up, &down, "x")?;
            v.extend(equator_set(&swap_axes(&up)?, &swap_axes(&down)?, "y")?);
            v
        }
        BasisScheme::FourHgReference => vec![
            ("vac".to_string(), centered_typical(TypicalKind::Vac, theta, frame)?),
            ("coh".to_string(), centered_typical(TypicalKind::Coh, theta, frame)?),
        ],
    };
    BasisSet::new(scheme.name(), entries)
}

/// Source of the phase-space rotation applied by the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Jitter {
    /// Rotation angle ~ N(0, sigma), radians.
    Rotation { sigma: f64 },
    /// Path-length error ~ N(0, sigma) metres in a graded-index fiber.
    Path { sigma: f64, fiber: FiberSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub jitter: Jitter,
    /// Standard deviation of each real component of the additive overlap noise.
    pub overlap_noise_sigma: f64,
}

impl ChannelModel {
    pub fn rotation(sigma: f64) -> Self {
        Self {
            jitter: Jitter::Rotation { sigma },
            overlap_noise_sigma: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let s = match self.jitter {
            Jitter::Rotation { sigma } | Jitter::Path { sigma, .. } => sigma,
        };
        if !(s >= 0.0 && s.is_finite()) || !(self.overlap_noise_sigma >= 0.0 && self.overlap_noise_sigma.is_finite()) {
            return Err(Error::param("channel", "sigmas must be finite and non-negative"));
        }
        Ok(())
    }

    fn sample_angle(&self, rng: &mut impl Rng) -> f64 {
        match self.jitter {
            Jitter::Rotation { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            Jitter::Path { sigma, fiber } => fiber.rotation_angle(sigma * rng.sample::<f64, _>(StandardNormal)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolStats {
    pub rounds: u64,
    pub sifted: u64,
    pub errors: u64,
    /// errors / sifted; the bit error rate for mode-keyed links.
    pub qber: f64,
    /// Rounds measured in the other basis and how often they read the wrong bit.
    pub mismatched: u64,
    pub mismatched_errors: u64,
}

impl ProtocolStats {
    fn from_counts(rounds: u64, sifted: u64, errors: u64, mismatched: u64, mismatched_errors: u64) -> Self {
        Self {
            rounds,
            sifted,
            errors,
            qber: if sifted > 0 { errors as f64 / sifted as f64 } else { 0.0 },
            mismatched,
            mismatched_errors,
        }
    }

    pub fn sift_rate(&self) -> f64 {
        self.sifted as f64 / self.rounds as f64
    }

    pub fn mismatched_error_rate(&self) -> f64 {
        if self.mismatched == 0 {
            0.0
        } else {
            self.mismatched_errors as f64 / self.mismatched as f64
        }
    }

    /// Three-sigma binomial half-width around a reference rate `p`.
    pub fn binomial_3sigma(&self, p: f64) -> f64 {
        3.0 * (p * (1.0 - p) / self.sifted.max(1) as f64).sqrt()
    }
}

/// Decodes `n` uniformly chosen basis symbols after a noisy channel.
pub fn psk_link_simulate(n: u64, basis: &BasisSet, channel: &ChannelModel, seed: u64) -> Result<ProtocolStats> {
    if n == 0 {
        return Err(Error::param("n", "needs at least one round"));
    }
    channel.validate()?;
    let m = basis.len();
    let noise = Normal::new(0.0, channel.overlap_noise_sigma)
        .map_err(|e| Error::param("overlap_noise_sigma", e.to_string()))?;
    let errors = (0..n)
        .into_par_iter()
        .map(|round| -> Result<u64> {
            let mut rng = stream_rng(seed, round);
            let sent = rng.gen_range(0..m);
            let theta = channel.sample_angle(&mut rng);
            let psi = rotate_phase_space(&basis.states[sent], theta);
            let mut best = (0, f64::NEG_INFINITY);
            for (i, b) in basis.states.iter().enumerate() {
                let mut o = inner_product(b, &psi)?;
                if channel.overlap_noise_sigma > 0.0 {
                    o += Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
                }
                if o.norm_sqr() > best.1 {
                    best = (i, o.norm_sqr());
                }
            }
            Ok(u64::from(best.0 != sent))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(ProtocolStats::from_counts(n, n, errors, 0, 0))
}

/// The four states sent in CV-qubit QKD, in the order x−, x+, p−, p+.
pub fn qkd_states(theta: OverlapAngle, frame: ModeFrame) -> Result<[SuperpositionState; 4]> {
    Ok([
        centered_typical(TypicalKind::XMinus, theta, frame)?,
        centered_typical(TypicalKind::XPlus, theta, frame)?,
        centered_typical(TypicalKind::PMinus, theta, frame)?,
        centered_typical(TypicalKind::PPlus, theta, frame)?,
    ])
}

/// BB84-style run: random basis {x, p} and bit on each side, fiber rotation
/// 2π·δz/cT' with δz ~ N(0, σ_z), Born-rule measurement in the receiver's basis.
///
/// The rotated state can leave the qubit span, so the two outcome
/// probabilities are renormalized to sum to one.
pub fn qkd_simulate(
    n: u64,
    theta: OverlapAngle,
    path_jitter_sigma: f64,
    fiber: &FiberSpec,
    seed: u64,
) -> Result<ProtocolStats> {
    if n == 0 {
        return Err(Error::param("n", "needs at least one round"));
    }
    if !(path_jitter_sigma >= 0.0 && path_jitter_sigma.is_finite()) {
        return Err(Error::param("sigma_z", "must be finite and non-negative"));
    }
    let frame = ModeFrame::laboratory();
    let states = qkd_states(theta, frame)?;
    let counts = (0..n)
        .into_par_iter()
        .map(|round| -> Result<[u64; 4]> {
            let mut rng = stream_rng(seed, round);
            let basis_a = rng.gen_range(0..2usize);
            let bit = rng.gen_range(0..2usize);
            let basis_b = rng.gen_range(0..2usize);
            let dz = path_jitter_sigma * rng.sample::<f64, _>(StandardNormal);
            let psi = rotate_phase_space(&states[2 * basis_a + bit], fiber.rotation_angle(dz));
            let p0 = inner_product(&states[2 * basis_b], &psi)?.norm_sqr();
            let p1 = inner_product(&states[2 * basis_b + 1], &psi)?.norm_sqr();
            let outcome = usize::from(rng.gen::<f64>() * (p0 + p1) >= p0);
            let wrong = u64::from(outcome != bit);
            Ok(if basis_a == basis_b {
                [1, wrong, 0, 0]
            } else {
                [0, 0, 1, wrong]
            })
        })
        .try_reduce(
            || [0; 4],
            |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]),
        )?;
    Ok(ProtocolStats::from_counts(
        n, counts[0], counts[1], counts[2], counts[3],
    ))
}

/// Equal-weight ensemble of the two beams left after averaging the relative phase.
#[derive(Debug, Clone)]
pub struct DephasedMixture {
    pub frame: ModeFrame,
    pub d: f64,
    pub components: Vec<(f64, SuperpositionState)>,
}

impl DephasedMixture {
    /// Tr ρ² from the component overlaps.
    pub fn purity(&self) -> Result<f64> {
        let mut acc = 0.0;
        for (wa, a) in &self.components {
            for (wb, b) in &self.components {
                acc += wa * wb * inner_product(a, b)?.norm_sqr();
            }
        }
        Ok(acc)
    }

    /// (W_vac + W_coh)/2.
    pub fn wigner(&self, x: f64, p: f64) -> f64 {
        0.5 * (w_vac(&self.frame, x, p) + w_vac(&self.frame, x - self.d, p))
    }

    pub fn wigner_map(&self, grid: PhaseSpaceGrid) -> WignerMap {
        WignerMap::from_fn(grid, |x, p| self.wigner(x, p))
    }

    pub fn position_marginal(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, s)| w * s.position_density(x)).sum()
    }
}

pub fn dephased_mixture(d: f64, frame: ModeFrame) -> Result<DephasedMixture> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::param("d", "must be positive"));
    }
    let theta = OverlapAngle::from_displacement(d, &frame)?;
    let vac = make_typical_state(TypicalKind::Vac, theta, frame)?.1;
    let coh = make_typical_state(TypicalKind::Coh, theta, frame)?.1;
    Ok(DephasedMixture {
        frame,
        d,
        components: vec![(0.5, vac), (0.5, coh)],
    })
}
