use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::path::Path;
use std::time::{Duration, Instant};

use cvq_core::apps::{build_basis, qkd_simulate, BasisScheme};
use cvq_core::lab::{
    fit_gaussian_profile, profile_from_image, render_ccd, scenario_reports, CcdConfig, Plane, ScenarioSettings,
    FIG5_STATES,
};
use cvq_core::propagation::{
    beam_params_at, kernel_grids, propagate_analytic, propagate_kernel, FiberSpec, LensSystem,
};
use cvq_core::qubit::signed_angle;
use cvq_core::wigner::{
    auto_grid, marginal_momentum, marginal_position, quadrature_moments, wigner_closed_form, wigner_numeric_point,
    WignerMap,
};
use cvq_core::{
    bloch_to_params, inner_product, make_typical_state, params_to_bloch, BlochVector, ModeFrame, OverlapAngle,
    QubitParams, SuperpositionState, TypicalKind, HBAR,
};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn lab() -> ModeFrame {
    ModeFrame::laboratory()
}

fn at_w0(kind: TypicalKind) -> (QubitParams, SuperpositionState) {
    let f = lab();
    let th = OverlapAngle::from_displacement(f.w0(), &f).unwrap();
    make_typical_state(kind, th, f).unwrap()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn rayleigh() -> Outcome {
    let zr = lab().rayleigh_range();
    let rel = (zr - 0.060).abs() / 0.060;
    Ok((
        rel <= 0.05,
        format!("z_R = {:.2} mm, {:.1}% from 60 mm", zr * 1e3, rel * 100.0),
    ))
}

fn overlap_angle() -> Outcome {
    let th = OverlapAngle::from_alpha(1.1).map_err(e)?.theta_d() / PI;
    Ok(((th - 0.40).abs() <= 0.01, format!("theta_d = {th:.4}pi")))
}

fn vacuum_width() -> Outcome {
    let (_, vac) = make_typical_state(TypicalKind::Vac, OverlapAngle::from_alpha(1.1).map_err(e)?, lab()).map_err(e)?;
    let img = render_ccd(&vac, &Plane::momentum(0.145), &CcdConfig::default()).map_err(e)?;
    let fit = fit_gaussian_profile(&profile_from_image(&img).map_err(e)?).map_err(e)?;
    let px = fit.radius / 6.5e-6;
    Ok(((px - 46.0).abs() <= 1.0, format!("1/e^2 half-width {px:.2} px")))
}

fn closed_map(params: QubitParams, state: &SuperpositionState, n: usize) -> Result<WignerMap, String> {
    let f = lab();
    let grid = auto_grid(state, n, n).map_err(e)?;
    Ok(WignerMap::from_fn(grid, move |x, p| {
        wigner_closed_form(&params, &f, x, p)
    }))
}

fn normalization() -> Outcome {
    let mut worst = 0.0f64;
    for kind in TypicalKind::ALL {
        let (params, state) = at_w0(kind);
        let map = closed_map(params, &state, 256)?;
        worst = worst.max((map.integral() - 1.0).abs());
    }
    Ok((worst <= 1e-6, format!("max |integral - 1| = {worst:.2e} over 8 states")))
}

fn odd_cat_negativity() -> Outcome {
    let f = lab();
    let (params, state) = at_w0(TypicalKind::CatMinus);
    let target = -1.0 / (PI * HBAR);
    let closed = wigner_closed_form(&params, &f, f.w0() / 2.0, 0.0);
    let quad = wigner_numeric_point(&state, f.w0() / 2.0, 0.0).map_err(e)?;
    let map = closed_map(params, &state, 257)?;
    let rel_c = (closed / target - 1.0).abs();
    let rel_q = (quad / target - 1.0).abs();
    let is_min = map.min() >= closed * (1.0 + 1e-9);
    Ok((
        rel_c <= 1e-6 && rel_q <= 1e-6 && is_min,
        format!("closed-form rel err {rel_c:.1e}, quadrature rel err {rel_q:.1e}, global minimum {is_min}"),
    ))
}

fn marginals() -> Outcome {
    let f = lab();
    let d = f.w0();
    let mut worst = 0.0f64;
    let mut count = 0;
    for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for phi in [-0.75 * PI, 0.0, 0.4 * PI, PI] {
            let params = QubitParams::new(t, phi, d).map_err(e)?;
            let state = cvq_core::make_qubit_state(params, f).map_err(e)?;
            let map = closed_map(params, &state, 257)?;
            let g = map.grid;
            let (ix, ip) = (map.position_marginal(), map.momentum_marginal());
            let sx = (0..g.nx)
                .map(|i| marginal_position(&params, &f, g.x(i)))
                .collect::<Vec<_>>();
            let sp = (0..g.np)
                .map(|j| marginal_momentum(&params, &f, g.p(j)))
                .collect::<Vec<_>>();
            let px = sx.iter().copied().fold(0.0, f64::max);
            let pp = sp.iter().copied().fold(0.0, f64::max);
            for i in 0..g.nx {
                worst = worst.max((ix[i] - sx[i]).abs() / px);
            }
            for j in 0..g.np {
                worst = worst.max((ip[j] - sp[j]).abs() / pp);
            }
            count += 1;
        }
    }
    Ok((
        worst <= 1e-8,
        format!("{count} parameter points, max deviation {worst:.1e} of peak"),
    ))
}

fn squeezing() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let checks = [
        (TypicalKind::XMinus, 0.0, "VarX(x_minus)"),
        (TypicalKind::XPlus, 0.0, "VarX(x_plus)"),
        (TypicalKind::CatPlus, PI / 2.0, "VarP(cat_plus)"),
        (TypicalKind::PMinus, PI / 2.0, "VarP(p_minus)"),
        (TypicalKind::PPlus, PI / 2.0, "VarP(p_plus)"),
    ];
    for (kind, angle, label) in checks {
        let (_, s) = at_w0(kind);
        let (_, var) = quadrature_moments(&s, angle);
        let below = var < 0.5 - 1e-9;
        ok &= below;
        parts.push(format!(
            "{label} = {var:.6}{}",
            if below { "" } else { " (not below 1/2)" }
        ));
    }
    Ok((ok, parts.join(", ")))
}

fn bloch_roundtrip() -> Outcome {
    let f = lab();
    let mut worst = 0.0f64;
    for th in [0.25, 0.40, 0.45] {
        let theta = OverlapAngle::new(th * PI).map_err(e)?;
        for i in 1..=20 {
            for j in 0..40 {
                let b = BlochVector::from_angles(PI * i as f64 / 21.0, TAU * j as f64 / 40.0);
                let p = bloch_to_params(b, theta, &f).map_err(e)?;
                worst = worst.max(params_to_bloch(p, theta).distance(&b));
                let q = bloch_to_params(params_to_bloch(p, theta), theta, &f).map_err(e)?;
                worst = worst
                    .max((q.t() - p.t()).abs())
                    .max(signed_angle(q.phi() - p.phi()).abs() * p.t().min(1.0 - p.t()));
            }
        }
    }
    Ok((worst <= 1e-10, format!("800 points x 3 angles, max error {worst:.1e}")))
}

fn propagation() -> Outcome {
    let f = lab();
    let vac = SuperpositionState::vacuum(f);
    let mut worst_w = 0.0f64;
    for m in [0.5, 1.0, 3.0] {
        let z = m * f.rayleigh_range();
        let (gin, gout) = kernel_grids(&vac, z).map_err(e)?;
        let input = propagate_analytic(&vac, 0.0).sample_x(&gin).map_err(e)?;
        let out = propagate_kernel(&input, z, f.k(), &gout).map_err(e)?;
        let w = beam_params_at(&f, z).w;
        worst_w = worst_w.max((out.moment_radius() - w).abs() / w);
    }
    let mut worst_m = 0.0f64;
    for th in [PI / 6.0, PI / 3.0, PI / 2.0] {
        let sys = LensSystem::new(0.145, th).map_err(e)?;
        worst_m = worst_m.max(sys.composed().max_abs_diff(&sys.rotation_matrix()));
    }
    Ok((
        worst_w <= 1e-3 && worst_m <= 1e-12,
        format!(
            "max width error {:.2e}%, max matrix deviation {worst_m:.1e}",
            worst_w * 100.0
        ),
    ))
}

fn phase_recovery() -> Outcome {
    let settings = ScenarioSettings::default();
    let panels = scenario_reports("fig5", &settings).map_err(e)?;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (id, _, phi) in FIG5_STATES {
        let panel = panels
            .iter()
            .find(|p| p.id == format!("{id}-2"))
            .ok_or("missing panel")?;
        let est = panel.phi_estimate.ok_or("no estimate")? / PI;
        let err = signed_angle((est - phi) * PI).abs() / PI;
        worst = worst.max(err);
        parts.push(format!("{phi:+.2}pi -> {est:+.4}pi"));
    }
    Ok((worst <= 0.03, format!("{}; max error {worst:.4}pi", parts.join(", "))))
}

fn orthogonality() -> Outcome {
    let th = OverlapAngle::from_alpha(1.1).map_err(e)?;
    let twelve = build_basis(BasisScheme::TwelveState, th, lab()).map_err(e)?;
    let four = build_basis(BasisScheme::FourCat, th, lab()).map_err(e)?;
    let ix = |l: &str| twelve.index_of(l).ok_or(format!("no {l}"));
    let g = |a: &str, b: &str| -> Result<f64, String> { Ok(twelve.gram[ix(a)?][ix(b)?].norm()) };
    let xx = g("x-", "x+")?;
    let pp = g("px-", "px+")?;
    let xp = (g("x-", "px-")? - FRAC_1_SQRT_2).abs();
    let cat = four.orthonormality_defect();
    let direct = inner_product(&twelve.states[ix("x-")?], &twelve.states[ix("x+")?])
        .map_err(e)?
        .norm();
    Ok((
        xx.max(pp).max(xp).max(cat).max(direct) <= 1e-12,
        format!("|<x-|x+>| = {xx:.1e}, |<p-|p+>| = {pp:.1e}, ||<x-|p->| - 1/sqrt2| = {xp:.1e}, four-cat Gram defect {cat:.4}"),
    ))
}

fn protocols() -> Outcome {
    let th = OverlapAngle::from_alpha(1.1).map_err(e)?;
    let fiber = FiberSpec::new(1e-3).map_err(e)?;
    let n = 100_000;
    let s0 = qkd_simulate(n, th, 0.0, &fiber, 7).map_err(e)?;
    let s1 = qkd_simulate(n, th, 780e-9, &fiber, 7).map_err(e)?;
    let s2 = qkd_simulate(n, th, 10e-3, &fiber, 7).map_err(e)?;
    let ok = s0.qber == 0.0 && s1.qber < 1e-3 && (s2.qber - 0.5).abs() <= s2.binomial_3sigma(0.5);
    Ok((
        ok,
        format!(
            "QBER {:.5} (sigma 0), {:.5} (780 nm), {:.4} +/- {:.4} (10 mm)",
            s0.qber,
            s1.qber,
            s2.qber,
            s2.binomial_3sigma(0.5)
        ),
    ))
}

fn run_into(dir: &Path, figure: &str) -> Result<(), String> {
    let argv = [
        "cvq",
        "reproduce",
        figure,
        "--seed",
        "11",
        "--out",
        dir.to_str().unwrap(),
    ];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    match cvq_cli::run(argv, &mut out, &mut err) {
        0 => Ok(()),
        code => Err(format!(
            "{figure} exited {code}: {}",
            String::from_utf8_lossy(&err).trim()
        )),
    }
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = std::fs::read_dir(dir)
        .map_err(e)?
        .map(|entry| {
            let p = entry.map_err(e)?.path();
            Ok((
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).map_err(e)?,
            ))
        })
        .collect::<Result<Vec<_>, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let mut total = 0;
    let mut ok = true;
    for figure in ["fig2", "fig4", "fig5"] {
        let (a, b) = (tempfile::tempdir().map_err(e)?, tempfile::tempdir().map_err(e)?);
        run_into(a.path(), figure)?;
        run_into(b.path(), figure)?;
        let (sa, sb) = (snapshot(a.path())?, snapshot(b.path())?);
        total += sa.len();
        ok &= !sa.is_empty() && sa == sb;
    }
    Ok((ok, format!("{total} files compared byte for byte")))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "Rayleigh range",
            limit: Duration::from_millis(1),
            run: rayleigh,
        },
        Criterion {
            id: 2,
            name: "overlap angle",
            limit: Duration::from_millis(1),
            run: overlap_angle,
        },
        Criterion {
            id: 3,
            name: "momentum-plane vacuum width",
            limit: Duration::from_secs(1),
            run: vacuum_width,
        },
        Criterion {
            id: 4,
            name: "Wigner normalization",
            limit: Duration::from_secs(30),
            run: normalization,
        },
        Criterion {
            id: 5,
            name: "odd-cat negativity",
            limit: Duration::from_secs(10),
            run: odd_cat_negativity,
        },
        Criterion {
            id: 6,
            name: "marginal consistency",
            limit: Duration::from_secs(60),
            run: marginals,
        },
        Criterion {
            id: 7,
            name: "squeezing",
            limit: Duration::from_secs(5),
            run: squeezing,
        },
        Criterion {
            id: 8,
            name: "Bloch round trip",
            limit: Duration::from_secs(5),
            run: bloch_roundtrip,
        },
        Criterion {
            id: 9,
            name: "propagation",
            limit: Duration::from_secs(60),
            run: propagation,
        },
        Criterion {
            id: 10,
            name: "phase-estimation recovery",
            limit: Duration::from_secs(30),
            run: phase_recovery,
        },
        Criterion {
            id: 11,
            name: "orthogonality",
            limit: Duration::from_secs(1),
            run: orthogonality,
        },
        Criterion {
            id: 12,
            name: "protocol suite",
            limit: Duration::from_secs(60),
            run: protocols,
        },
        Criterion {
            id: 13,
            name: "determinism",
            limit: Duration::from_secs(120),
            run: determinism,
        },
    ];
    let mut failed = 0;
    for c in criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((ok, d)) => (ok && took <= c.limit, d),
            Err(msg) => (false, format!("error: {msg}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({detail}; {:.3} ms, limit {:?})",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64() * 1e3,
            c.limit
        );
    }
    println!("{} of 13 criteria passed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
