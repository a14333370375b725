//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thicket_core::coherent_probe::*;
use thicket_core::interval_sets::*;
use thicket_core::rational::{int, rat, to_f64, Rational};
use thicket_core::spectral_lab::*;

use common::sphere::{observability_quotient, sphere_minimum, spectral_quotient};
use common::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn geom(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

fn svc_half() -> SvcParams {
    // r_n = (1/2) exp(-2^{n/2})
    SvcParams::parametric(rat(1, 2), int(1), rat(1, 2))
}

/// `ω = [-4, 4] \ (K - 1/2)` for the `α = 1/2` set at depth 12.
fn svc_half_omega() -> IntervalUnion {
    let k = svc_construct(&svc_half(), 12).unwrap().translate(&rat(-1, 2));
    k.complement_window(&Interval::new(int(-4), int(4)).unwrap()).unwrap()
}

fn c1_exact_half_ratio() -> Outcome {
    let p = SvcParams::constant(rat(1, 2));
    let set = SvcSet::new(&p, 20).unwrap();
    let lengths = set.lengths();
    let mut bad = 0;
    for n in 1..=20 {
        let expected = (Rational::one() - rat(1, 2)) / int(2) * &lengths[n - 1];
        bad += (lengths[n] != expected) as usize;
        let kn = SvcSet::new(&p, n).unwrap();
        let two_n = Rational::new(BigInt::one(), BigInt::one() << n);
        bad += (kn.measure() != two_n) as usize;
    }
    let k = set.to_union().unwrap();
    bad += (k.len() != 1 << 20) as usize;
    bad += (k.measure() != Rational::new(BigInt::one(), BigInt::one() << 20)) as usize;
    // endpoints are in 4^-20 Z: compare lengths as integers over 2^40
    let units = |q: &Rational| {
        let (p, d) = (q.numer().to_u128().unwrap(), q.denom().to_u128().unwrap());
        assert_eq!((1u128 << 40) % d, 0);
        p * ((1u128 << 40) / d)
    };
    let len = units(&lengths[20]);
    bad += (len != 1) as usize;
    bad += k.intervals().iter().filter(|iv| units(&iv.hi) - units(&iv.lo) != len).count();
    ensure(bad == 0, format!("depth 20, {} intervals, mismatches {bad}", k.len()))
}

fn c2_sweep_vs_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases: Vec<(Vec<(i128, i128)>, i128)> = (0..200)
        .map(|_| {
            let pieces = random_dyadic_union(&mut rng, 64);
            let l = rng.gen_range(1..(1i128 << (UNIT_BITS - 2)));
            (pieces, l)
        })
        .collect();
    let step = to_f64(&units_to_rational(GRID_STEP));
    let results: Vec<(bool, bool, bool)> = cases
        .par_iter()
        .map(|(pieces, l)| {
            let k = to_union(pieces);
            let sweep = min_local_measure(&k, &units_to_rational(*l)).unwrap();
            let (mass, _) = grid_max_mass(pieces, *l);
            let grid = Rational::new(BigInt::from(2 * l - mass), BigInt::from(2 * l));
            let gap = to_f64(&((&grid - &sweep.theta) * units_to_rational(2 * l)));
            let within = grid >= sweep.theta && gap <= 2.0 * step;
            let on_grid = rational_to_units(&sweep.argmin_x).is_some_and(|u| u % GRID_STEP == 0);
            (within, on_grid, !on_grid || grid == sweep.theta)
        })
        .collect();
    let within = results.iter().filter(|r| r.0).count();
    let on_grid = results.iter().filter(|r| r.1).count();
    let exact = results.iter().filter(|r| r.2).count();
    ensure(
        within == 200 && exact == 200,
        format!("{within}/200 within 2 step, {on_grid} argmins on the grid, all exact there: {}", exact == 200),
    )
}

fn c3_sandwich() -> Outcome {
    let ls = log_spaced_scales(-12.0, -4.0, 12);
    let rep = verify_svc_bounds(&svc_half(), 24, &ls, &BoundsOptions::default()).unwrap();
    let ok = rep.pass && rep.rows.iter().all(|r| r.pass);
    ensure(ok, format!("depth 24, 12 scales, c = {:.4e}, C = {:.4e}", rep.c(), rep.big_c()))
}

fn c4_alpha_recovery() -> Outcome {
    let set = SvcSet::new(&svc_half(), 24).unwrap();
    let profile = thickness_profile(&set, &log_spaced_scales(-12.0, -4.0, 16)).unwrap();
    let fit = fit_alpha(&profile).unwrap();
    ensure(
        (fit.alpha_hat - 0.5).abs() <= 0.05 && fit.r2 >= 0.95,
        format!("alpha_hat = {:.4}, r2 = {:.4}", fit.alpha_hat, fit.r2),
    )
}

fn c5_growth_dichotomy() -> Outcome {
    let grid = GridSpec::new(8.0, 4096).unwrap();
    let half = IntervalUnion::single(int(0), int(4)).unwrap();
    let a = fit_spectral_growth(&half, &geom(2.5, 250.0, 16), &grid).unwrap();
    let b = fit_spectral_growth(&svc_half_omega(), &geom(100.0, 1e4, 16), &grid).unwrap();
    ensure(
        (0.4..=0.6).contains(&a.exponent) && (0.15..=0.35).contains(&b.exponent),
        format!(
            "half window e = {:.3} (r2 {:.3}), svc complement e = {:.3} (r2 {:.3})",
            a.exponent, a.r2, b.exponent, b.r2
        ),
    )
}

fn c6_gramian_oracle() -> Outcome {
    // ω is a union of pieces at least 1 long, so at least 8 cells
    let grid = GridSpec::new(8.0, 64).unwrap();
    // |ξ_1|² = π²/16, |ξ_2|² = π²/4: bands of 1, 3 and 5 modes
    let lambdas = [0.3, 1.2, 2.6, 4.0];
    let ss = [1.0 / 3.0, 0.5, 1.0, 2.0];
    let worst: Vec<(f64, String)> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + i);
            let pieces = rng.gen_range(1..=3);
            let mut ivs = Vec::new();
            for _ in 0..pieces {
                let a = rng.gen_range(-32..=24);
                let b = rng.gen_range(a + 8..=(a + 20).min(32));
                ivs.push(Interval::new(rat(a, 8), rat(b, 8)).unwrap());
            }
            let omega = IntervalUnion::new(ivs).unwrap();
            let lambda = lambdas[rng.gen_range(0..lambdas.len())];
            let band = BandProjector::new(&grid, lambda).unwrap();
            let m = band.len();
            if i % 2 == 0 {
                let d = spectral_constant(&omega, lambda, &grid).unwrap();
                let brute = sphere_minimum(&mut rng, m, 4000, spectral_quotient(&omega, grid, &band.modes));
                ((d - brute).abs() / brute, format!("spectral {omega} m={m}"))
            } else {
                let t = rng.gen_range(0.2..1.0);
                let s = ss[rng.gen_range(0..ss.len())];
                let c = observability_constant(&omega, t, s, lambda, &grid, 8).unwrap();
                let q = observability_quotient(&omega, grid, &band.modes, t, s, 8);
                let brute = 1.0 / sphere_minimum(&mut rng, m, 4000, q);
                ((c - brute).abs() / brute, format!("observability {omega} m={m} T={t:.3} s={s:.3}"))
            }
        })
        .collect();
    let (err, which) = worst.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    ensure(err <= 1e-3, format!("50 instances, worst relative error {err:.2e} ({which})"))
}

fn c7_semigroup() -> Outcome {
    let grid = GridSpec::new(8.0, 256).unwrap();
    let ss = [1.0 / 3.0, 0.5, 1.0, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut law, mut contraction) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let s = ss[i % 4];
        let coeffs = (0..grid.points)
            .map(|_| num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = GridField::from_coeffs(grid, coeffs).unwrap();
        let (t1, t2) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let a = evolve(&evolve(&f, t1, s).unwrap(), t2, s).unwrap();
        let b = evolve(&f, t1 + t2, s).unwrap();
        let diff: f64 = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm_sqr()).sum();
        law = law.max((diff / b.coeff_norm_sq()).sqrt());
        contraction = contraction.max(b.norm_sq() / f.norm_sq() - 1.0);
    }
    ensure(
        law <= 1e-12 && contraction <= 1e-12,
        format!("100 fields, semigroup defect {law:.2e}, worst norm growth {contraction:.2e}"),
    )
}

fn c8_coherent_asymptotics() -> Outcome {
    let p = ProbeParams::new(0.5, 0.01);
    let hs = dyadic_hs(4, 10);
    let eta = determine_eta(&p, 1.0, &hs, &[0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4], 0.1).unwrap();
    let interior = check_interior_asymptotics(&p, 1.0, eta, &InteriorOptions { hs: hs.clone(), ..Default::default() })
        .unwrap();
    let exterior = check_exterior_decay(
        &p,
        1.0,
        eta,
        &[2.0 * eta, 4.0 * eta, 8.0 * eta],
        &ExteriorOptions { hs, ..Default::default() },
    )
    .unwrap();
    let target = 1.0 - p.s;
    ensure(
        interior.decreasing && (interior.order - target).abs() <= 0.3 && exterior.c > 0.0,
        format!(
            "eta = {eta}, order {:.3} (target {target}), decreasing {}, exterior c = {:.4}",
            interior.order, interior.decreasing, exterior.c
        ),
    )
}

fn c9_necessity() -> Outcome {
    let base = ProbeParams::new(1.0 / 3.0, 0.01);
    let config = NecessityConfig::default();
    let ext = check_exterior_decay(
        &base,
        config.t_final,
        0.25,
        &[0.5, 1.0, 2.0, 4.0],
        &ExteriorOptions { hs: dyadic_hs(4, 10), ..Default::default() },
    )
    .unwrap();
    let run = |params: SvcParams, depth: usize| {
        let set = SvcSet::new(&params, depth).unwrap();
        let (k, _) = center_worst_point(&set, &rat(1, 10)).unwrap();
        necessity_experiment(&k, &base, &config, &ext.certificate).unwrap()
    };
    // α' = 2 and α = 0.2
    let thin = run(SvcParams::parametric(rat(1, 2), int(1), int(2)), 5);
    let thick = run(SvcParams::parametric(rat(1, 2), int(1), rat(1, 5)), 8);
    ensure(
        thin.growth >= 10.0 && thick.spread <= 3.0,
        format!("alpha' = 2 growth x{:.3e}, alpha = 0.2 spread x{:.3}", thin.growth, thick.spread),
    )
}

fn c10_lebeau_robbiano() -> Outcome {
    let grid = GridSpec::new(8.0, 4096).unwrap();
    let omega = svc_half_omega();
    let lr = calibrate_lr_constants(&omega, 1.0, 0.5, &geom(100.0, 1e4, 10), &grid).unwrap();
    let ts = geom(0.1, 1.0, 6);
    let measured: Vec<f64> = ts
        .par_iter()
        .map(|&t| observability_estimate(&omega, t, 1.0, 400.0, &grid, 32).unwrap().c_meas)
        .collect();
    let fitted = fit_c1(&lr, ts[0], measured[0]).unwrap();
    let mut worst = f64::INFINITY;
    for (t, c) in ts.iter().zip(&measured).skip(1) {
        worst = worst.min(predicted_cobs(&fitted, *t).unwrap() / t / c);
    }
    ensure(
        worst >= 1.0,
        format!("d0 = {:.4}, d1 = {:.4}, c1 = {:.4e}, min predicted/measured {worst:.4}", lr.d0, lr.d1, fitted.c1),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 10] = [
        ("1 svc exactness", c1_exact_half_ratio, 1),
        ("2 sweep vs grid", c2_sweep_vs_grid, 30),
        ("3 svc sandwich", c3_sandwich, 60),
        ("4 alpha recovery", c4_alpha_recovery, 60),
        ("5 spectral growth", c5_growth_dichotomy, 300),
        ("6 gramian oracle", c6_gramian_oracle, 120),
        ("7 semigroup", c7_semigroup, 10),
        ("8 coherent asymptotics", c8_coherent_asymptotics, 300),
        ("9 necessity", c9_necessity, 600),
        ("10 lebeau-robbiano", c10_lebeau_robbiano, 600),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>())));
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        failed += !ok as usize;
        println!(
            "{} criterion {name}: {detail} [{:.2} s, limit {limit} s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
