use rayon::prelude::*;
use serde_json::{json, Value};

use thicket_core::coherent_probe::{
    check_exterior_decay, check_interior_asymptotics, determine_eta, interior_norm_bound,
    necessity_experiment, ExteriorOptions, InteriorOptions,
};
use thicket_core::interval_sets::{
    fit_alpha, svc_construct, verify_svc_bounds, BoundsOptions, IntervalUnion, ThicknessProfile,
    ThicknessSample,
};
use thicket_core::rational::{format_rational, Rational};
use thicket_core::spectral_lab::{
    calibrate_lr_constants, fit_c1, fit_growth_from_values, fit_lr_from_values, observability_estimate, predicted_cobs,
    spectral_constant, GridSpec, LRConstants,
};
use thicket_core::Error;

use crate::config::{CommandName, ExperimentConfig};
use crate::error::{invalid, CliError};
use crate::params::*;

/// A finished run: one table plus the structured result.
pub struct Artifact {
    pub config: ExperimentConfig,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub result: Value,
}

/// 17 significant digits, enough to round-trip a double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn rat(q: &Rational) -> String {
    format_rational(q)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    match cfg.command {
        CommandName::SvcBuild => svc_build(cfg),
        CommandName::Thickness => thickness(cfg),
        CommandName::FitAlpha => fit_alpha_cmd(cfg),
        CommandName::SvcVerify => svc_verify(cfg),
        CommandName::Spectral => spectral(cfg),
        CommandName::Observability => observability(cfg),
        CommandName::ProbeAsymptotics => probe_asymptotics(cfg),
        CommandName::Necessity => necessity(cfg),
    }
}

fn svc_build(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: SvcBuildParams = cfg.typed()?;
    let k = svc_construct(&p.svc, p.depth)?;
    let rows = k.intervals().iter().map(|iv| vec![rat(&iv.lo), rat(&iv.hi)]).collect();
    let result = json!({
        "intervals": to_value(&k),
        "count": k.len(),
        "measure": rat(&k.measure()),
    });
    Ok(Artifact { config: cfg.resolved(&p), columns: vec!["lo", "hi"], rows, result })
}

fn profile_of(set: &ResolvedSet, ls: &[Rational]) -> Result<ThicknessProfile, CliError> {
    let samples = ls
        .par_iter()
        .map(|l| {
            set.min_local_measure(l)
                .map(|m| ThicknessSample { l: l.clone(), theta: m.theta, argmin_x: m.argmin_x })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut samples = samples;
    samples.sort_by(|a, b| a.l.cmp(&b.l));
    Ok(ThicknessProfile { samples, domain_note: "omega = R \\ K".into() })
}

/// Smallest `Leb(ω ∩ [x-L, x+L]) / 2L` over `x ∈ 2^-k Z` near the hull of `K`.
fn grid_theta(k: &IntervalUnion, l: &Rational, exp: u32) -> Result<Rational, CliError> {
    let Some(hull) = k.hull() else {
        return Ok(Rational::from_integer(1.into()));
    };
    if exp > 24 {
        return Err(invalid("grid_check_exp above 24 is too fine"));
    }
    let step = Rational::new(1.into(), (1u64 << exp).into());
    let lo = ((&hull.lo - l) / &step).floor().to_integer();
    let hi = ((&hull.hi + l) / &step).ceil().to_integer();
    let count: u64 = (&hi - &lo).try_into().map_err(|_| invalid("grid check range too large"))?;
    if count > 1 << 26 {
        return Err(invalid("grid check range too large"));
    }
    let two_l = l * Rational::from_integer(2.into());
    let min = (0..=count)
        .into_par_iter()
        .map(|i| {
            let x = Rational::from_integer(&lo + i) * &step;
            (&two_l - k.measure_in(&(&x - l), &(&x + l))) / &two_l
        })
        .min()
        .expect("nonempty grid");
    Ok(min)
}

fn on_grid(x: &Rational, exp: u32) -> bool {
    (x * Rational::from_integer((1u64 << exp).into())).is_integer()
}

fn thickness(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: ThicknessParams = cfg.typed()?;
    let set = p.set.resolve(cfg.seed)?;
    let ls = p.scales.values()?;
    let profile = profile_of(&set, &ls)?;
    let rows = profile
        .samples
        .iter()
        .map(|s| vec![rat(&s.l), rat(&s.theta), rat(&s.argmin_x), String::new(), String::new()])
        .collect();
    let mut result = to_value(&profile);
    if let Some(exp) = p.grid_check_exp {
        let k = set.union()?;
        let checks = profile
            .samples
            .iter()
            .map(|s| {
                let g = grid_theta(&k, &s.l, exp)?;
                Ok(json!({
                    "L": rat(&s.l),
                    "grid_theta": rat(&g),
                    "grid_at_least_sweep": g >= s.theta,
                    "argmin_on_grid": on_grid(&s.argmin_x, exp),
                    "equal": g == s.theta,
                }))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        result["grid_check"] = Value::Array(checks);
    }
    Ok(Artifact {
        config: cfg.resolved(&p),
        columns: vec!["L", "theta", "argmin_x", "lower_bound", "upper_bound"],
        rows,
        result,
    })
}

fn fit_alpha_cmd(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: FitAlphaParams = cfg.typed()?;
    let set = p.set.resolve(cfg.seed)?;
    let profile = profile_of(&set, &p.scales.values()?)?;
    let fit = fit_alpha(&profile)?;
    let rows = vec![vec![num(fit.alpha_hat), num(fit.c_hat), num(fit.big_c_hat), num(fit.r2), fit.samples.to_string()]];
    Ok(Artifact {
        config: cfg.resolved(&p),
        columns: vec!["alpha_hat", "c_hat", "C_hat", "r2", "samples"],
        rows,
        result: json!({ "fit": to_value(&fit), "profile": to_value(&profile) }),
    })
}

fn svc_verify(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: SvcVerifyParams = cfg.typed()?;
    let ls = p.scales.values()?;
    let rep = verify_svc_bounds(&p.svc, p.depth, &ls, &BoundsOptions { kappa: p.kappa.0.clone() })?;
    let rows = rep
        .rows
        .iter()
        .map(|r| vec![rat(&r.l), rat(&r.theta), rat(&r.argmin_x), num(r.lower()), num(r.upper())])
        .collect();
    Ok(Artifact {
        config: cfg.resolved(&p),
        columns: vec!["L", "theta", "argmin_x", "lower_bound", "upper_bound"],
        rows,
        result: json!({ "report": to_value(&rep), "c": rep.c(), "C": rep.big_c() }),
    })
}

fn measure_d(omega: &IntervalUnion, lambdas: &[f64], grid: &GridSpec) -> Result<Vec<f64>, CliError> {
    Ok(lambdas.par_iter().map(|&l| spectral_constant(omega, l, grid)).collect::<Result<Vec<_>, Error>>()?)
}

fn fits_growth(lambdas: &[f64]) -> bool {
    let (lo, hi) = lambdas.iter().fold((f64::INFINITY, 0f64), |(a, b), &l| (a.min(l), b.max(l)));
    lambdas.len() >= 8 && lo > 0.0 && hi / lo >= 100.0
}

fn spectral(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: SpectralParams = cfg.typed()?;
    let grid = p.grid.spec()?;
    let omega = p.omega.resolve(&grid, cfg.seed)?;
    let lambdas = p.lambdas.values()?;
    let d = measure_d(&omega, &lambdas, &grid)?;
    let rows = lambdas.iter().zip(&d).map(|(l, d)| vec![num(*l), num(*d)]).collect();
    let growth = if fits_growth(&lambdas) {
        match fit_growth_from_values(&lambdas, &d) {
            Ok(g) => json!({ "exponent": g.exponent, "r2": g.r2 }),
            // d ≡ 1 on a fully observed window: no growth to fit
            Err(Error::FitFailed(why)) => json!({ "skipped": why }),
            Err(e) => return Err(e.into()),
        }
    } else {
        json!({ "skipped": "needs at least 8 values of lambda over two decades" })
    };
    let lr = match &p.calibrate {
        Some(c) => Some(fit_lr_from_values(&lambdas, &d, c.s, c.alpha)?),
        None => None,
    };
    Ok(Artifact {
        config: cfg.resolved(&p),
        columns: vec!["lambda", "d_lambda"],
        rows,
        result: json!({
            "omega_measure": rat(&omega.measure()),
            "growth": growth,
            "lr_constants": lr.as_ref().map(to_value),
        }),
    })
}

fn observability(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: ObservabilityParams = cfg.typed()?;
    let grid = p.grid.spec()?;
    let omega = p.omega.resolve(&grid, cfg.seed)?;
    let ts = p.t.values()?;
    let estimates = ts
        .par_iter()
        .map(|&t| observability_estimate(&omega, t, p.s, p.lambda_max, &grid, p.quad_nodes))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut lr: Option<LRConstants> = match &p.lr {
        Some(LrSource::Given(lr)) => Some(lr.clone()),
        Some(LrSource::Calibrate { alpha, lambdas }) => {
            Some(calibrate_lr_constants(&omega, p.s, *alpha, &lambdas.values()?, &grid)?)
        }
        None => None,
    };
    if p.fit_c1 {
        let base = lr.as_ref().ok_or_else(|| invalid("fit_c1 needs LR constants"))?;
        lr = Some(fit_c1(base, ts[0], estimates[0].c_meas)?);
    }
    let predicted = match &lr {
        Some(lr) => ts.iter().map(|&t| predicted_cobs(lr, t).map(|c| Some(c / t))).collect::<Result<Vec<_>, _>>()?,
        None => vec![None; ts.len()],
    };
    let rows = ts
        .iter()
        .zip(&estimates)
        .zip(&predicted)
        .map(|((t, e), c)| vec![num(*t), num(e.c_meas), c.map(num).unwrap_or_default()])
        .collect();
    // the prediction is an upper bound; the fitted T says nothing
    let skip = usize::from(p.fit_c1);
    let worst = predicted
        .iter()
        .zip(&estimates)
        .skip(skip)
        .filter_map(|(c, e)| c.map(|c| c / e.c_meas))
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))));
    Ok(Artifact {
        config: cfg.resolved(&p),
        columns: vec!["T", "C_meas", "C_predicted"],
        rows,
        result: json!({
            "estimates": to_value(&estimates),
            "lr_constants": lr.as_ref().map(to_value),
            "min_predicted_over_measured": worst,
        }),
    })
}

fn probe_asymptotics(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: ProbeAsymptoticsParams = cfg.typed()?;
    let hs = p.hs.values()?;
    let base = p.probe(hs[0]);
    let eta = match p.eta {
        Some(eta) => eta,
        None => determine_eta(&base, p.t, &hs, &p.eta_candidates, p.eta_threshold)?,
    };
    let interior =
        check_interior_asymptotics(&base, p.t, eta, &InteriorOptions { hs: hs.clone(), ..Default::default() })?;
    let xs = p.exterior_x.clone().unwrap_or_else(|| vec![2.0 * eta, 4.0 * eta, 8.0 * eta]);
    let exterior = check_exterior_decay(&base, p.t, eta, &xs, &ExteriorOptions { hs: hs.clone(), ..Default::default() })?;
    let norm = if hs.len() >= 4 { Some(interior_norm_bound(&base, p.t, eta, &hs)?) } else { None };
    let rows = interior
        .rows
        .iter()
        .map(|r| {
            let n = norm.as_ref().and_then(|n| n.rows.iter().find(|(h, _)| *h == r.h)).map(|(_, v)| num(*v));
            vec![num(r.h), num(r.max_rel_error), num(r.worst_t), num(r.worst_x), num(r.modulus_error), n.unwrap_or_default()]
        })
        .collect();
    Ok(Artifact {
        config: cfg.resolved(&p),
        columns: vec!["h", "max_rel_error", "worst_t", "worst_x", "modulus_error", "interior_norm"],
        rows,
        result: json!({
            "probe_params": to_value(&base),
            "beta": base.beta(),
            "eta": eta,
            "interior": to_value(&interior),
            "exterior": to_value(&exterior),
            "norm_bound": norm.as_ref().map(to_value),
        }),
    })
}

fn necessity(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let p: NecessityParams = cfg.typed()?;
    let set = p.set.resolve(cfg.seed)?;
    let mut k = set.union()?;
    let mut centered_at = None;
    if let Some(l) = &p.center_scale {
        let m = set.min_local_measure(&l.0)?;
        k = k.translate(&-m.argmin_x.clone());
        centered_at = Some(json!({ "L": rat(&l.0), "theta": rat(&m.theta), "argmin_x": rat(&m.argmin_x) }));
    }
    let exp = &p.experiment;
    let base = p.probe(*exp.hs.first().ok_or_else(|| invalid("/parameters/experiment/hs: empty"))?);
    let ext_hs = p.exterior.hs.values()?;
    let ext = check_exterior_decay(
        &base,
        exp.t_final,
        p.exterior.eta,
        &p.exterior.x,
        &ExteriorOptions { hs: ext_hs, ..Default::default() },
    )?;
    let report = necessity_experiment(&k, &base, exp, &ext.certificate)?;
    let rows = report
        .rows
        .iter()
        .map(|r| vec![num(r.h), num(r.t_max), num(r.lhs), num(r.rhs), num(r.ratio), num(r.eta), num(r.radius)])
        .collect();
    Ok(Artifact {
        config: cfg.resolved(&p),
        columns: vec!["h", "t_max", "lhs", "rhs", "ratio", "eta", "R"],
        rows,
        result: json!({
            "probe_params": to_value(&base),
            "centered_at": centered_at,
            "certificate": to_value(&ext.certificate),
            "exterior_c": ext.c,
            "rows": to_value(&report.rows),
            "growth": report.growth,
            "spread": report.spread,
        }),
    })
}
