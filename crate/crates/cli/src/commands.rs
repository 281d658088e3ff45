use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use cvq_core::apps::{
    build_basis, profile_sweep, psk_link_simulate, qkd_simulate, sweep_csv, BasisScheme, ChannelModel, Jitter,
    ProtocolStats,
};
use cvq_core::io::{csv_table, write_json, write_text, Pgm};
use cvq_core::lab::{
    estimate_relative_phase, fit_gaussian_profile, profile_from_image, render_ccd, scenario_reports,
    tilt_displaced_terms, CcdConfig, CcdImage, CcdSidecar, Exposure, Plane, ScenarioSettings,
};
use cvq_core::propagation::{beam_params_at, FiberSpec};
use cvq_core::wigner::{
    auto_grid, marginal_momentum, marginal_position, negativity_of, wigner_closed_form, wigner_numeric, Units,
    WignerMap,
};
use cvq_core::{
    bloch_to_params, make_qubit_state, normalization_factor, params_to_bloch, BlochVector, ModeFrame, OverlapAngle,
    QubitParams, SuperpositionState, TypicalKind,
};

use crate::args::*;
use crate::{CliError, OUT_DIR_ENV};

type CmdResult = Result<(), CliError>;

pub fn dispatch(cmd: Command, out: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::State(c) => state(c, out),
        Command::Wigner(c) => wigner(c, out),
        Command::Marginals(c) => marginals(c, out),
        Command::Beam(c) => beam(c, out),
        Command::Ccd(c) => ccd(c, out),
        Command::Fit(c) => fit(c, out),
        Command::Sweep(c) => sweep(c, out),
        Command::Mdm(c) => mdm(c, out),
        Command::Qkd(c) => qkd(c, out),
        Command::Reproduce(c) => reproduce(c, out),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::invalid("E_IO", format!("{}: {e}", path.display()))
}

fn say(out: &mut dyn Write, text: String) -> CmdResult {
    out.write_all(text.as_bytes())
        .map_err(|e| io_err(Path::new("<stdout>"), e))
}

fn frame_of(a: &FrameArgs) -> Result<ModeFrame, CliError> {
    Ok(ModeFrame::new(a.w0, a.lambda)?)
}

fn theta_of(a: &DisplacementArgs, frame: &ModeFrame) -> Result<OverlapAngle, CliError> {
    Ok(match (a.alpha, a.d, a.d_over_w0) {
        (Some(alpha), _, _) => OverlapAngle::from_alpha(alpha)?,
        (_, Some(d), _) => OverlapAngle::from_displacement(d, frame)?,
        (_, _, Some(r)) => OverlapAngle::from_displacement(r * frame.w0(), frame)?,
        _ => OverlapAngle::from_alpha(1.1)?,
    })
}

fn parse_bloch(s: &str) -> Result<BlochVector, CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("--bloch expects three comma-separated numbers, got `{s}`")))?;
    if parts.len() != 3 {
        return Err(CliError::usage(format!(
            "--bloch expects three components, got {}",
            parts.len()
        )));
    }
    Ok(BlochVector::new(parts[0], parts[1], parts[2])?)
}

struct Resolved {
    label: String,
    params: QubitParams,
    state: SuperpositionState,
}

fn resolve_state(a: &StateArgs, theta: OverlapAngle, frame: ModeFrame) -> Result<Resolved, CliError> {
    let d = theta.displacement(&frame);
    let (label, params) = if let Some(name) = &a.kind {
        let kind = TypicalKind::parse(name).ok_or_else(|| {
            CliError::invalid(
                "E_PARAM",
                format!("invalid parameter `kind`: unknown typical state `{name}`"),
            )
        })?;
        let (t, phi) = kind.params(theta);
        (kind.name().to_string(), QubitParams::new(t, phi, d)?)
    } else if let Some(b) = &a.bloch {
        ("bloch".to_string(), bloch_to_params(parse_bloch(b)?, theta, &frame)?)
    } else {
        (
            "custom".to_string(),
            QubitParams::new(a.t.unwrap_or(0.5), a.phi.unwrap_or(0.0), d)?,
        )
    };
    normalization_factor(params.t(), params.phi(), theta)?;
    let state = make_qubit_state(params, frame)?;
    Ok(Resolved { label, params, state })
}

/// Output path: the flag, else the default name in `$CVQ_OUT_DIR` or the working directory.
fn output_path(flag: &Option<PathBuf>, default_name: &str) -> PathBuf {
    match flag {
        Some(p) => p.clone(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Path::new(&dir).join(default_name),
            _ => PathBuf::from(default_name),
        },
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a C,
    outputs: Vec<String>,
    results: Value,
}

fn write_manifest<C: Serialize>(
    path: &Path,
    command: &str,
    config: &C,
    outputs: &[&Path],
    results: Value,
) -> CmdResult {
    let m = Manifest {
        tool: "cvq",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        outputs: outputs.iter().map(|p| file_name(p)).collect(),
        results,
    };
    Ok(write_json(path, &m)?)
}

fn pi_units(v: f64) -> f64 {
    v / PI
}

fn state(c: StateCmd, out: &mut dyn Write) -> CmdResult {
    let frame = frame_of(&c.frame)?;
    let theta = theta_of(&c.disp, &frame)?;
    let r = resolve_state(&c.state, theta, frame)?;
    let n_arb = normalization_factor(r.params.t(), r.params.phi(), theta)?;
    let b = params_to_bloch(r.params, theta);
    let phi = r.params.phi_signed();
    say(
        out,
        format!(
            "state = {}\nT = {:.6}\nphi = {:.6}pi\nN_arb = {:.6}\ntheta_d = {:.6}pi\nalpha = {:.6}\nd = {:.6e} m\nbloch = ({:.6}, {:.6}, {:.6})\n",
            r.label,
            r.params.t(),
            pi_units(phi),
            n_arb,
            pi_units(theta.theta_d()),
            theta.alpha(),
            r.params.d(),
            b.xq,
            b.yq,
            b.zq
        ),
    )?;
    let manifest = output_path(&c.out, "state.manifest.json");
    write_manifest(
        &manifest,
        "state",
        &c,
        &[],
        json!({
            "state": r.label,
            "T": r.params.t(),
            "phi": phi,
            "phi_over_pi": pi_units(phi),
            "n_arb": n_arb,
            "theta_d_over_pi": pi_units(theta.theta_d()),
            "alpha": theta.alpha(),
            "d": r.params.d(),
            "bloch": [b.xq, b.yq, b.zq],
        }),
    )
}

fn wigner_map(r: &Resolved, frame: &ModeFrame, n: usize, method: MethodArg) -> Result<WignerMap, CliError> {
    if n < 2 {
        return Err(CliError::invalid(
            "E_PARAM",
            "invalid parameter `grid`: needs at least 2 points per axis",
        ));
    }
    let grid = auto_grid(&r.state, n, n)?;
    Ok(match method {
        MethodArg::Closed => {
            let params = r.params;
            let f = *frame;
            WignerMap::from_fn(grid, move |x, p| wigner_closed_form(&params, &f, x, p))
        }
        MethodArg::Numeric => wigner_numeric(&r.state, &grid)?,
    })
}

fn map_summary(map: &WignerMap) -> Value {
    let neg = negativity_of(map);
    json!({
        "integral": map.integral(),
        "min": map.min(),
        "max": map.max(),
        "min_location": [neg.location.0, neg.location.1],
        "negative_volume": neg.negative_volume,
        "grid": map.grid,
    })
}

fn wigner(c: WignerCmd, out: &mut dyn Write) -> CmdResult {
    let frame = frame_of(&c.frame)?;
    let theta = theta_of(&c.disp, &frame)?;
    let r = resolve_state(&c.state, theta, frame)?;
    let map = wigner_map(&r, &frame, c.grid, c.method)?;
    let units = match c.units {
        UnitsArg::Si => Units::Si,
        UnitsArg::Nd => Units::Nondimensional,
    };
    let path = output_path(&c.out, "wigner.csv");
    write_text(&path, &map.to_csv(&frame, units, r.params.d() / 2.0))?;
    let summary = map_summary(&map);
    say(
        out,
        format!("wrote {} (integral {:.9})\n", path.display(), map.integral()),
    )?;
    write_manifest(&sibling(&path, ".manifest.json"), "wigner", &c, &[&path], summary)
}

fn marginals(c: MarginalsCmd, out: &mut dyn Write) -> CmdResult {
    let frame = frame_of(&c.frame)?;
    let theta = theta_of(&c.disp, &frame)?;
    let r = resolve_state(&c.state, theta, frame)?;
    if c.points < 2 {
        return Err(CliError::invalid(
            "E_PARAM",
            "invalid parameter `points`: needs at least 2",
        ));
    }
    let grid = auto_grid(&r.state, c.points, c.points)?;
    let rows = (0..c.points).map(|i| {
        let (x, p) = (grid.x(i), grid.p(i));
        vec![
            x,
            marginal_position(&r.params, &frame, x),
            p,
            marginal_momentum(&r.params, &frame, p),
        ]
    });
    let path = output_path(&c.out, "marginals.csv");
    write_text(&path, &csv_table(&["x", "I_x", "p", "I_p"], rows))?;
    say(out, format!("wrote {}\n", path.display()))?;
    write_manifest(
        &sibling(&path, ".manifest.json"),
        "marginals",
        &c,
        &[&path],
        json!({ "grid": grid }),
    )
}

fn beam(c: BeamCmd, out: &mut dyn Write) -> CmdResult {
    let frame = frame_of(&c.frame)?;
    let z_max = c.z_max.unwrap_or(3.0 * frame.rayleigh_range());
    if !(z_max > 0.0) || c.steps < 2 {
        return Err(CliError::invalid(
            "E_PARAM",
            "invalid parameter `z-max`/`steps`: need z-max > 0 and at least 2 steps",
        ));
    }
    let rows = (0..c.steps).map(|i| {
        let z = -z_max + 2.0 * z_max * i as f64 / (c.steps - 1) as f64;
        let b = beam_params_at(&frame, z);
        vec![z, b.w, b.r, b.gouy]
    });
    let path = output_path(&c.out, "beam.csv");
    write_text(&path, &csv_table(&["z", "w", "R", "gouy"], rows))?;
    say(
        out,
        format!("z_R = {:.6e} m\nwrote {}\n", frame.rayleigh_range(), path.display()),
    )?;
    write_manifest(
        &sibling(&path, ".manifest.json"),
        "beam",
        &c,
        &[&path],
        json!({ "rayleigh_range": frame.rayleigh_range(), "k": frame.k() }),
    )
}

fn plane_of(a: &CcdArgs) -> Plane {
    match a.plane {
        PlaneArg::Position => Plane::Position,
        PlaneArg::Momentum => Plane::Momentum {
            f: a.f,
            theta_l: a.theta_l,
        },
    }
}

fn analyze(
    image: &CcdImage,
    frame: &ModeFrame,
    t: Option<f64>,
    d: f64,
) -> Result<(cvq_core::lab::Profile, Value), CliError> {
    let profile = profile_from_image(image)?;
    let mut results = serde_json::Map::new();
    results.insert("saturated".into(), json!(image.saturated));
    match fit_gaussian_profile(&profile) {
        Ok(fit) => {
            results.insert("gaussian_fit".into(), json!(fit));
            results.insert("radius_px".into(), json!(fit.radius / profile.pitch));
            results.insert("center_px".into(), json!(fit.center / profile.pitch));
        }
        Err(e) => {
            results.insert("gaussian_fit_error".into(), json!(format!("{}: {e}", e.code())));
        }
    }
    if let (Plane::Momentum { f, .. }, Some(t)) = (image.plane, t) {
        if t > 0.0 && t < 1.0 {
            let est = estimate_relative_phase(&profile, d, frame, t, f)?;
            results.insert("phi_estimate".into(), json!(est.phi));
            results.insert("phi_estimate_over_pi".into(), json!(pi_units(est.phi)));
            results.insert("fringe_contrast".into(), json!(est.contrast));
        }
    }
    Ok((profile, Value::Object(results)))
}

fn ccd(c: CcdCmd, out: &mut dyn Write) -> CmdResult {
    let frame = frame_of(&c.frame)?;
    let theta = theta_of(&c.disp, &frame)?;
    let r = resolve_state(&c.state, theta, frame)?;
    let state = if c.ccd.tilt != 0.0 {
        tilt_displaced_terms(&r.state, c.ccd.tilt)?
    } else {
        r.state.clone()
    };
    let config = CcdConfig {
        nx: c.ccd.nx,
        ny: c.ccd.ny,
        pitch: c.ccd.pitch,
        bit_depth: c.ccd.bit_depth,
        background: c.ccd.background,
        exposure: match c.ccd.exposure_scale {
            Some(s) => Exposure::Scale(s),
            None => Exposure::PeakCounts(c.ccd.peak_counts),
        },
        visibility: c.ccd.visibility,
        shot_noise: c.ccd.shot_noise,
        seed: c.seed,
    };
    let image = render_ccd(&state, &plane_of(&c.ccd), &config)?;
    let path = output_path(&c.out, "ccd.pgm");
    let sidecar = sibling(&path, ".json");
    let profile_path = sibling(&path, ".profile.csv");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    image.to_pgm().write(&path)?;
    write_json(&sidecar, &image.sidecar())?;
    let (profile, results) = analyze(&image, &frame, Some(r.params.t()), r.params.d())?;
    write_text(&profile_path, &profile.to_csv())?;
    say(out, format!("wrote {}\n", path.display()))?;
    write_manifest(
        &sibling(&path, ".manifest.json"),
        "ccd",
        &c,
        &[&path, &sidecar, &profile_path],
        results,
    )
}

fn fit(c: FitCmd, out: &mut dyn Write) -> CmdResult {
    let frame = frame_of(&c.frame)?;
    let theta = theta_of(&c.disp, &frame)?;
    let pgm = Pgm::read(&c.image)?;
    let sidecar_path = c.image.with_extension("json");
    let image = if sidecar_path.exists() {
        let text = std::fs::read_to_string(&sidecar_path).map_err(|e| io_err(&sidecar_path, e))?;
        let side: CcdSidecar = serde_json::from_str(&text)
            .map_err(|e| CliError::invalid("E_FORMAT", format!("{}: {e}", sidecar_path.display())))?;
        CcdImage::from_parts(pgm, side)?
    } else {
        let mut img = CcdImage::from_pgm(pgm)?;
        if let Some(p) = c.pitch {
            img.config.pitch = p;
        }
        if let Some(f) = c.f {
            img.plane = Plane::momentum(f);
        }
        img
    };
    let (_, results) = analyze(&image, &frame, c.t, theta.displacement(&frame))?;
    let stem = c
        .image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    let path = output_path(&c.out, &format!("{stem}.fit.json"));
    let mut summary = String::new();
    if let Some(px) = results.get("radius_px").and_then(Value::as_f64) {
        summary.push_str(&format!("radius = {px:.3} px\n"));
    }
    if let Some(px) = results.get("center_px").and_then(Value::as_f64) {
        summary.push_str(&format!("center = {px:.3} px\n"));
    }
    if let Some(phi) = results.get("phi_estimate_over_pi").and_then(Value::as_f64) {
        summary.push_str(&format!("phi = {phi:.4}pi\n"));
    }
    say(out, summary)?;
    write_manifest(&path, "fit", &c, &[], results)
}

fn sweep_path(c: &SweepCmd) -> Result<Vec<(f64, f64)>, CliError> {
    if let Some(spec) = &c.path {
        return spec
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|pair| {
                let (t, phi) = pair
                    .split_once(':')
                    .ok_or_else(|| CliError::usage(format!("--path entries look like T:phi, got `{pair}`")))?;
                let t: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad T in `{pair}`")))?;
                Ok((t, parse_angle(phi).map_err(CliError::usage)?))
            })
            .collect();
    }
    if c.steps < 1 {
        return Err(CliError::invalid(
            "E_PARAM",
            "invalid parameter `steps`: needs at least 1",
        ));
    }
    let n = c.steps;
    Ok((0..n)
        .map(|i| {
            let s = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            (
                c.t_from + s * (c.t_to - c.t_from),
                c.phi_from + s * (c.phi_to - c.phi_from),
            )
        })
        .collect())
}

fn sweep(c: SweepCmd, out: &mut dyn Write) -> CmdResult {
    let frame = frame_of(&c.frame)?;
    let theta = theta_of(&c.disp, &frame)?;
    let pts = profile_sweep(&sweep_path(&c)?, theta.displacement(&frame), &frame)?;
    let path = output_path(&c.out, "sweep.csv");
    write_text(&path, &sweep_csv(&pts))?;
    say(out, format!("wrote {} ({} points)\n", path.display(), pts.len()))?;
    write_manifest(
        &sibling(&path, ".manifest.json"),
        "sweep",
        &c,
        &[&path],
        json!({ "points": pts.len() }),
    )
}

fn stats_csv(s: &ProtocolStats, seed: u64) -> String {
    format!(
        "n,sifted,errors,qber,mismatched,mismatched_errors,seed\n{},{},{},{:.12e},{},{},{}\n",
        s.rounds, s.sifted, s.errors, s.qber, s.mismatched, s.mismatched_errors, seed
    )
}

fn mdm(c: MdmCmd, out: &mut dyn Write) -> CmdResult {
    let frame = frame_of(&c.frame)?;
    let theta = theta_of(&c.disp, &frame)?;
    let scheme = BasisScheme::parse(&c.scheme).ok_or_else(|| {
        CliError::invalid(
            "E_PARAM",
            format!("invalid parameter `scheme`: unknown basis scheme `{}`", c.scheme),
        )
    })?;
    let basis = build_basis(scheme, theta, frame)?;
    let channel = ChannelModel {
        jitter: Jitter::Rotation { sigma: c.sigma_theta },
        overlap_noise_sigma: c.overlap_noise,
    };
    let stats = psk_link_simulate(c.n, &basis, &channel, c.seed)?;
    let path = output_path(&c.out, "mdm.csv");
    write_text(&path, &stats_csv(&stats, c.seed))?;
    say(
        out,
        format!("BER = {:.6} ({} / {})\n", stats.qber, stats.errors, stats.rounds),
    )?;
    let gram: Vec<Vec<[f64; 2]>> = basis
        .gram
        .iter()
        .map(|row| row.iter().map(|g| [g.re, g.im]).collect())
        .collect();
    write_manifest(
        &sibling(&path, ".manifest.json"),
        "mdm",
        &c,
        &[&path],
        json!({
            "stats": stats,
            "labels": basis.labels,
            "gram": gram,
            "orthonormality_defect": basis.orthonormality_defect(),
        }),
    )
}

fn qkd(c: QkdCmd, out: &mut dyn Write) -> CmdResult {
    let frame = frame_of(&c.frame)?;
    let theta = theta_of(&c.disp, &frame)?;
    let fiber = FiberSpec::new(c.period)?;
    let stats = qkd_simulate(c.n, theta, c.sigma_z, &fiber, c.seed)?;
    let path = output_path(&c.out, "qkd.csv");
    write_text(&path, &stats_csv(&stats, c.seed))?;
    say(
        out,
        format!(
            "QBER = {:.6} ({} / {} sifted), sift rate {:.4}\n",
            stats.qber,
            stats.errors,
            stats.sifted,
            stats.sift_rate()
        ),
    )?;
    write_manifest(
        &sibling(&path, ".manifest.json"),
        "qkd",
        &c,
        &[&path],
        json!({
            "stats": stats,
            "sift_rate": stats.sift_rate(),
            "mismatched_error_rate": stats.mismatched_error_rate(),
            "rotation_sigma": fiber.rotation_angle(c.sigma_z),
        }),
    )
}

/// Linear 16-bit rendering of a map: rows run from the largest p down, columns along x.
fn wigner_pgm(map: &WignerMap) -> Result<(Pgm, f64, f64), CliError> {
    let (lo, hi) = (map.min(), map.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let g = &map.grid;
    let mut data = Vec::with_capacity(g.nx * g.np);
    for j in (0..g.np).rev() {
        for i in 0..g.nx {
            data.push(((map.at(i, j) - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16);
        }
    }
    Ok((Pgm::new(g.nx, g.np, 65535, data)?, lo, hi))
}

fn reproduce(c: ReproduceCmd, out: &mut dyn Write) -> CmdResult {
    let name = match c.figure {
        Figure::Fig2 => "fig2",
        Figure::Fig4 => "fig4",
        Figure::Fig5 => "fig5",
    };
    let dir = output_path(&c.out, name);
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut outputs: Vec<PathBuf> = Vec::new();
    let mut results = serde_json::Map::new();
    match c.figure {
        Figure::Fig2 => {
            let frame = ModeFrame::laboratory();
            let theta = OverlapAngle::from_displacement(frame.w0(), &frame)?;
            for kind in TypicalKind::ALL {
                let (t, phi) = kind.params(theta);
                let params = QubitParams::new(t, phi, frame.w0())?;
                let r = Resolved {
                    label: kind.name().into(),
                    params,
                    state: make_qubit_state(params, frame)?,
                };
                let map = wigner_map(&r, &frame, c.grid, MethodArg::Closed)?;
                let stem = format!("fig2_{}", kind.name());
                let csv = dir.join(format!("{stem}.csv"));
                write_text(&csv, &map.to_csv(&frame, Units::Nondimensional, frame.w0() / 2.0))?;
                let (pgm, lo, hi) = wigner_pgm(&map)?;
                let pgm_path = dir.join(format!("{stem}.pgm"));
                pgm.write(&pgm_path)?;
                let side = dir.join(format!("{stem}.json"));
                write_json(
                    &side,
                    &json!({ "state": kind.name(), "grid": map.grid, "w_min": lo, "w_max": hi, "maxval": 65535 }),
                )?;
                results.insert(kind.name().into(), map_summary(&map));
                outputs.extend([csv, pgm_path, side]);
            }
        }
        Figure::Fig4 | Figure::Fig5 => {
            let mut settings = ScenarioSettings::default();
            settings.ccd.seed = c.seed;
            settings.ccd.shot_noise = c.shot_noise;
            for panel in scenario_reports(name, &settings)? {
                let csv = dir.join(format!("{name}_{}.csv", panel.id));
                write_text(&csv, &panel.to_csv())?;
                results.insert(
                    panel.id.clone(),
                    json!({
                        "label": panel.label,
                        "plane": panel.plane,
                        "T": panel.t,
                        "phi_over_pi": pi_units(panel.phi),
                        "phi_estimate_over_pi": panel.phi_estimate.map(pi_units),
                    }),
                );
                outputs.push(csv);
            }
        }
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    say(out, format!("wrote {} files to {}\n", outputs.len(), dir.display()))?;
    write_manifest(&dir.join("manifest.json"), name, &c, &refs, Value::Object(results))
}
