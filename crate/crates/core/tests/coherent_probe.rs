use num_complex::Complex64;
use thicket_core::coherent_probe::*;
use thicket_core::interval_sets::IntervalUnion;
use thicket_core::spectral_lab::{evolve, GridField, GridSpec};
use thicket_core::Error;

/// Adaptive Gauss–Kronrod 7/15 on `[a, b]`, absolute tolerance `tol`.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    const XK: [f64; 8] = [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ];
    const WK: [f64; 8] = [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ];
    const WG: [f64; 4] = [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ];
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let v = f(c - r * XK[i]) + f(c + r * XK[i]);
        kron += WK[i] * v;
        if i % 2 == 1 {
            gauss += WG[i / 2] * v;
        }
    }
    let (kron, gauss) = (kron * r, gauss * r);
    if (kron - gauss).abs() <= tol || depth == 0 {
        return kron;
    }
    gk15(f, a, c, 0.5 * tol, depth - 1) + gk15(f, c, b, 0.5 * tol, depth - 1)
}

fn oracle_g(p: &ProbeParams, t: f64, x: f64) -> Complex64 {
    let phase = |u: f64| {
        let xi = p.xi0 + u;
        let m = p.chi.eval(u) * (-u * u / (2.0 * p.h) - t * xi.abs().powf(p.s) * p.h.powf(-p.s)).exp();
        (m, x * xi / p.h)
    };
    let w = p.chi.w;
    let re = gk15(&|u| { let (m, a) = phase(u); m * a.cos() }, -w, w, 1e-15, 40);
    let im = gk15(&|u| { let (m, a) = phase(u); m * a.sin() }, -w, w, 1e-15, 40);
    Complex64::new(re, im)
}

#[test]
fn values_match_adaptive_quadrature() {
    let p = ProbeParams::new(0.5, 0.01);
    for (t, x) in [(0.0, 0.0), (0.3, 0.0), (0.5, 0.07), (1.0, -0.2)] {
        let got = eval_g(&p, t, x).unwrap();
        let want = oracle_g(&p, t, x);
        assert!((got - want).norm() <= 1e-8 * want.norm(), "t = {t}, x = {x}: {got} vs {want}");
    }
}

#[test]
fn agrees_with_the_spectral_semigroup() {
    // g(t + δ) = e^{-δ(-Δ)^{s/2}} g(t), checked against the periodic FFT flow
    let p = ProbeParams::new(0.5, 2f64.powi(-6));
    let grid = GridSpec::new(16.0, 4096).unwrap();
    for (t, delta) in [(0.0, 0.2), (0.3, 0.5)] {
        let start = GridField::from_fn(grid, |x| eval_g(&p, t, x).unwrap()).unwrap();
        let moved = evolve(&start, delta, p.s).unwrap();
        let direct = GridField::from_fn(grid, |x| eval_g(&p, t + delta, x).unwrap()).unwrap();
        let diff: f64 = moved.values().iter().zip(direct.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
            * grid.dx();
        let rel = (diff / direct.norm_sq()).sqrt();
        assert!(rel <= 1e-6, "t = {t}, δ = {delta}: {rel:e}");
    }
}

#[test]
fn plancherel_matches_the_spatial_integral() {
    let p = ProbeParams::new(0.5, 2f64.powi(-6));
    let grid = GridSpec::new(16.0, 4096).unwrap();
    for t in [0.0, 0.4] {
        let f = GridField::from_fn(grid, |x| eval_g(&p, t, x).unwrap()).unwrap();
        let want = plancherel_norm_sq(&p, t).unwrap();
        assert!((f.norm_sq() / want - 1.0).abs() < 1e-8, "t = {t}");
    }
}

#[test]
fn far_field_is_negligible() {
    for h in [2f64.powi(-6), 2f64.powi(-8)] {
        let p = ProbeParams::new(0.5, h);
        for t in [0.0, 0.5, 1.0] {
            for x in [100.0, -150.0] {
                let v = eval_g(&p, t, x).unwrap().norm();
                assert!(v < 1e-8 * h.sqrt(), "h = {h}, t = {t}, x = {x}: {v}");
            }
        }
    }
}

#[test]
fn interior_error_decreases_with_h() {
    let p = ProbeParams::new(0.5, 0.01);
    let opts = InteriorOptions { hs: dyadic_hs(4, 8), ..Default::default() };
    let rep = check_interior_asymptotics(&p, 1.0, 0.25, &opts).unwrap();
    assert!(rep.decreasing, "{rep:?}");
    assert!(rep.order > 0.3, "{}", rep.order);
    assert!(rep.rows.last().unwrap().max_rel_error < 0.05);
}

#[test]
fn exterior_decay_and_certificate() {
    let p = ProbeParams::new(0.5, 0.01);
    let rep =
        check_exterior_decay(&p, 1.0, 0.25, &[0.5, 1.0, 2.0], &ExteriorOptions::default()).unwrap();
    assert!(rep.c > 0.0 && rep.resolved_hs >= 3, "{} {}", rep.c, rep.resolved_hs);
    // the bound sits above every sample it was built from
    for row in &rep.rows {
        let b = rep.certificate.bound_for(&p.with_h(row.h), 1.0).unwrap();
        assert!(row.max_abs * row.x * row.x <= b);
    }
    let a = rep.prefactor_ratio(0.5, 1.0).unwrap();
    assert!(a >= 2.0, "{a}");
}

#[test]
fn unvalidated_h_is_rejected() {
    let p = ProbeParams::new(1.0 / 3.0, 0.01);
    let opts = ExteriorOptions { hs: dyadic_hs(4, 7), ..Default::default() };
    let rep = check_exterior_decay(&p, 0.1, 0.25, &[0.5, 1.0], &opts).unwrap();
    let cfg = NecessityConfig { hs: vec![2f64.powi(-9)], ..Default::default() };
    let err = necessity_experiment(&IntervalUnion::empty(), &p, &cfg, &rep.certificate).unwrap_err();
    assert!(matches!(err, Error::DecayNotValidated { .. }), "{err}");
    // another s is another family
    let other = ProbeParams::new(0.5, 2f64.powi(-5));
    assert!(matches!(
        rep.certificate.bound_for(&other, 0.1),
        Err(Error::DecayNotValidated { .. })
    ));
}

#[test]
fn full_line_ratio_is_at_most_one_over_t() {
    let p = ProbeParams::new(1.0 / 3.0, 0.01);
    let opts = ExteriorOptions { hs: dyadic_hs(4, 8), ..Default::default() };
    let rep = check_exterior_decay(&p, 0.1, 0.25, &[0.5, 1.0, 2.0, 4.0], &opts).unwrap();
    let cfg = NecessityConfig { hs: dyadic_hs(6, 8), ..Default::default() };
    let out = necessity_experiment(&IntervalUnion::empty(), &p, &cfg, &rep.certificate).unwrap();
    for row in &out.rows {
        assert!(row.ratio <= (1.0 + 1e-9) / cfg.t_final, "{row:?}");
        assert!((row.lhs / row.lhs_plancherel - 1.0).abs() < 1e-3, "{row:?}");
    }
}

#[test]
fn bad_parameters_are_rejected() {
    assert!(eval_g(&ProbeParams::new(1.0, 0.01), 0.0, 0.0).is_err());
    assert!(eval_g(&ProbeParams::new(0.5, -1.0), 0.0, 0.0).is_err());
    assert!(eval_g(&ProbeParams::new(0.5, 0.01), -1.0, 0.0).is_err());
    let few = ProbeParams { quad_points: MIN_QUAD_POINTS - 1, ..ProbeParams::new(0.5, 0.01) };
    assert!(eval_g(&few, 0.0, 0.0).is_err());
    let p = ProbeParams::new(0.5, 0.01);
    assert!(check_exterior_decay(&p, 1.0, 0.25, &[0.2], &ExteriorOptions::default()).is_err());
}

#[test]
fn interior_norm_lower_bound_is_stable() {
    for s in [1.0 / 3.0, 0.5] {
        let p = ProbeParams::new(s, 0.01);
        let rep = interior_norm_bound(&p, 0.5, 0.25, &dyadic_hs(4, 10)).unwrap();
        assert!(rep.stable, "{rep:?}");
        // the damping rate of the centre frequency, T |ξ0|^s
        assert!((rep.big_c / 0.5 - 1.0).abs() < 0.05, "{}", rep.big_c);
        for (h, n) in &rep.rows {
            assert!(*n >= rep.c * (-rep.big_c * h.powf(-s)).exp() * (1.0 - 1e-12));
        }
    }
}

#[test]
fn interior_norm_over_a_wide_window_is_the_full_norm() {
    let p = ProbeParams::new(0.5, 2f64.powi(-6));
    for t in [0.0, 0.3] {
        let n = interior_norm(&p, t, 3.0).unwrap();
        let want = plancherel_norm_sq(&p, t).unwrap().sqrt();
        assert!((n / want - 1.0).abs() < 1e-9, "t = {t}: {n} vs {want}");
    }
    assert!(interior_norm(&p, 0.3, 0.0).is_err());
}
