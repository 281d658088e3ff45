use cvq_core::propagation::{kernel_grids, propagate_analytic, propagate_kernel, rotate_phase_space};
use cvq_core::wigner::quadrature_moments;
use cvq_core::{make_typical_state, ModeFrame, OverlapAngle, TypicalKind};
use std::f64::consts::PI;

#[test]
fn kernel_agrees_with_analytic_for_every_typical_state() {
    let f = ModeFrame::laboratory();
    let th = OverlapAngle::from_alpha(1.1).unwrap();
    for kind in TypicalKind::ALL {
        let (_, s) = make_typical_state(kind, th, f).unwrap();
        for m in [0.3, 1.0, 2.0] {
            let z = m * f.rayleigh_range();
            let (gin, gout) = kernel_grids(&s, z).unwrap();
            let input = propagate_analytic(&s, 0.0).sample_x(&gin).unwrap();
            let kern = propagate_kernel(&input, z, f.k(), &gout).unwrap();
            let exact = propagate_analytic(&s, z).sample_x(&gout).unwrap();
            let err = kern.relative_rms(&exact);
            assert!(err < 1e-6, "{kind:?} at {m} z_R: {err}");
            assert!((kern.power() / input.power() - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn quarter_turns_exchange_quadratures() {
    let f = ModeFrame::laboratory();
    let th = OverlapAngle::from_alpha(1.1).unwrap();
    for kind in TypicalKind::ALL {
        let (_, s) = make_typical_state(kind, th, f).unwrap();
        let r = rotate_phase_space(&s, PI / 2.0);
        let (mx, vx) = quadrature_moments(&s, 0.0);
        let (mp, vp) = quadrature_moments(&r, PI / 2.0);
        let (mpx, vpx) = quadrature_moments(&s, PI / 2.0);
        let (mrx, vrx) = quadrature_moments(&r, 0.0);
        assert!((vx - vp).abs() < 1e-10 && (vpx - vrx).abs() < 1e-10, "{kind:?}");
        assert!((mx + mp).abs() < 1e-10 || (mx - mp).abs() < 1e-10, "{kind:?}");
        assert!((mpx - mrx).abs() < 1e-10 || (mpx + mrx).abs() < 1e-10, "{kind:?}");
    }
}
