//! Per-command flags, folded into the JSON parameters so that flags and
//! config files go through one schema.

use serde_json::{json, Map, Value};

use thicket_core::rational::parse_rational;

use crate::config::CommandName;
use crate::error::{invalid, CliError};

#[derive(clap::Args, Default)]
pub struct Flags {
    /// Constant gap ratio r_n = r, as "p/q".
    #[arg(long, value_name = "RAT")]
    r_const: Option<String>,
    /// Gap ratios r_0, r_1, ... (the last one repeats).
    #[arg(long, value_name = "RAT,...", value_delimiter = ',')]
    ratios: Option<Vec<String>>,
    /// r_n = first * ratio^n.
    #[arg(long, value_name = "FIRST,RATIO", value_delimiter = ',')]
    geometric: Option<Vec<String>>,
    /// r_n = c exp(-C 2^(n alpha)), rounded.
    #[arg(long, value_name = "c,C,ALPHA", value_delimiter = ',')]
    parametric: Option<Vec<String>>,
    #[arg(long)]
    precision_bits: Option<u32>,
    #[arg(long)]
    budget_bits: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    /// Translate the constructed set by this rational.
    #[arg(long, value_name = "RAT", allow_hyphen_values = true)]
    shift: Option<String>,

    /// The set K (omega = R \ K): full-line, svc or intervals.
    #[arg(long, value_name = "KIND")]
    set: Option<String>,
    /// Intervals as "a:b,c:d" with rational ends.
    #[arg(long, value_name = "A:B,...", allow_hyphen_values = true)]
    intervals: Option<String>,
    /// Observed set for the spectral commands, "a:b,c:d"; defaults to the
    /// window minus K when a set is given.
    #[arg(long, value_name = "A:B,...", allow_hyphen_values = true)]
    omega: Option<String>,

    /// Scales L, as rationals.
    #[arg(long = "L", value_name = "RAT,...", value_delimiter = ',')]
    l: Option<Vec<String>>,
    /// Scales 2^e for e from LO to HI.
    #[arg(long, value_name = "LO,HI,COUNT", value_delimiter = ',', allow_hyphen_values = true)]
    log_scales: Option<Vec<f64>>,
    #[arg(long, value_name = "RAT")]
    kappa: Option<String>,
    #[arg(long)]
    grid_check_exp: Option<u32>,

    /// Window length of the periodic grid.
    #[arg(long = "X")]
    x: Option<f64>,
    /// Grid points (a power of two).
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_name = "LO,HI,COUNT", value_delimiter = ',')]
    lambda_range: Option<Vec<f64>>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    quad_nodes: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    /// Final time, or times for `observability`.
    #[arg(long = "T", value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long = "T-range", value_name = "LO,HI,COUNT", value_delimiter = ',')]
    t_range: Option<Vec<f64>>,

    #[arg(long)]
    xi0: Option<f64>,
    #[arg(long)]
    quad_points: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    hs: Option<Vec<f64>>,
    /// h = 2^-k for k from K_LO to K_HI.
    #[arg(long, value_name = "K_LO,K_HI", value_delimiter = ',')]
    hs_dyadic: Option<Vec<i32>>,
    /// Scale at which the worst point of K is moved to the origin.
    #[arg(long = "center-L", value_name = "RAT")]
    center_l: Option<String>,
    #[arg(long)]
    r: Option<f64>,

    /// Any parameter as PATH=JSON, e.g. `grid.N=512`; plain text is taken as a string.
    #[arg(long = "param", value_name = "PATH=VALUE")]
    params: Vec<String>,
}

fn rat_str(text: &str) -> Result<String, CliError> {
    parse_rational(text)?;
    Ok(text.trim().to_string())
}

fn quads(text: &str) -> Result<Value, CliError> {
    let mut out = Vec::new();
    for piece in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (a, b) = piece
            .split_once(':')
            .ok_or_else(|| invalid(format!("interval {piece:?} is not of the form a:b")))?;
        let (a, b) = (parse_rational(a)?, parse_rational(b)?);
        out.push(json!([a.numer().to_string(), a.denom().to_string(), b.numer().to_string(), b.denom().to_string()]));
    }
    Ok(Value::Array(out))
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(invalid(format!("bad parameter path {path:?}")));
        }
        let obj = match node {
            Value::Object(m) => m,
            _ => return Err(invalid(format!("parameter path {path:?} crosses a non-object"))),
        };
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("path has at least one key")
}

fn range(v: &[f64]) -> Value {
    json!({ "lo": v[0], "hi": v[1], "count": v[2] as usize })
}

impl Flags {
    fn svc(&self) -> Result<Option<Value>, CliError> {
        let mut modes = Vec::new();
        if let Some(r) = &self.r_const {
            modes.push(json!({ "mode": "explicit", "ratios": [rat_str(r)?] }));
        }
        if let Some(rs) = &self.ratios {
            let rs = rs.iter().map(|r| rat_str(r)).collect::<Result<Vec<_>, _>>()?;
            modes.push(json!({ "mode": "explicit", "ratios": rs }));
        }
        if let Some(g) = &self.geometric {
            modes.push(json!({ "mode": "geometric", "first": rat_str(&g[0])?, "ratio": rat_str(&g[1])? }));
        }
        if let Some(p) = &self.parametric {
            modes.push(json!({ "mode": "parametric", "c": rat_str(&p[0])?, "C": rat_str(&p[1])?, "alpha": rat_str(&p[2])? }));
        }
        if modes.len() > 1 {
            return Err(invalid("give only one of --r-const, --ratios, --geometric, --parametric"));
        }
        let Some(mut svc) = modes.pop() else {
            if self.precision_bits.is_some() || self.budget_bits.is_some() {
                return Err(invalid("--precision-bits and --budget-bits need a gap-ratio flag"));
            }
            return Ok(None);
        };
        if let Some(b) = self.precision_bits {
            svc["precision_bits"] = json!(b);
        }
        if let Some(b) = self.budget_bits {
            svc["denominator_budget_bits"] = json!(b);
        }
        Ok(Some(svc))
    }

    /// The set K described by the flags, if any.
    fn set(&self, svc: Option<Value>) -> Result<Option<Value>, CliError> {
        let kind = match (&self.set, &self.intervals, &svc) {
            (Some(k), _, _) => k.as_str(),
            (None, Some(_), _) => "intervals",
            (None, None, Some(_)) => "svc",
            (None, None, None) => return Ok(None),
        };
        Ok(Some(match kind {
            "full-line" => json!("full-line"),
            "intervals" => {
                let text = self.intervals.as_deref().ok_or_else(|| invalid("--set intervals needs --intervals"))?;
                json!({ "intervals": quads(text)? })
            }
            "svc" => {
                let params = svc.ok_or_else(|| invalid("--set svc needs a gap-ratio flag such as --r-const"))?;
                let depth = self.depth.ok_or_else(|| invalid("--set svc needs --depth"))?;
                let mut spec = json!({ "params": params, "depth": depth });
                if let Some(s) = &self.shift {
                    spec["shift"] = json!(rat_str(s)?);
                }
                json!({ "svc": spec })
            }
            other => return Err(invalid(format!("unknown --set {other:?}; use full-line, svc or intervals"))),
        }))
    }

    pub fn apply(&self, cmd: CommandName, params: &mut Value) -> Result<(), CliError> {
        use CommandName::*;
        arity("--geometric", &self.geometric, 2)?;
        arity("--parametric", &self.parametric, 3)?;
        arity("--log-scales", &self.log_scales, 3)?;
        arity("--lambda-range", &self.lambda_range, 3)?;
        arity("--T-range", &self.t_range, 3)?;
        arity("--hs-dyadic", &self.hs_dyadic, 2)?;
        let svc = self.svc()?;
        match cmd {
            SvcBuild | SvcVerify => {
                if let Some(svc) = svc {
                    set_path(params, "svc", svc)?;
                }
                if let Some(d) = self.depth {
                    set_path(params, "depth", json!(d))?;
                }
                if self.set.is_some() || self.intervals.is_some() || self.shift.is_some() {
                    return Err(invalid(format!("{cmd} builds its own set; --set, --intervals and --shift do not apply")));
                }
            }
            Thickness | FitAlpha | Necessity => {
                if let Some(set) = self.set(svc)? {
                    set_path(params, "set", set)?;
                }
            }
            Spectral | Observability => {
                let omega = match (&self.omega, self.set(svc)?) {
                    (Some(text), None) => Some(json!({ "intervals": quads(text)? })),
                    (None, Some(k)) => Some(json!({ "complement-of": k })),
                    (None, None) => None,
                    (Some(_), Some(_)) => return Err(invalid("give --omega or a set K, not both")),
                };
                if let Some(o) = omega {
                    set_path(params, "omega", o)?;
                }
            }
            ProbeAsymptotics => {}
        }
        if self.omega.is_some() && !matches!(cmd, Spectral | Observability) {
            return Err(invalid(format!("--omega does not apply to {cmd}")));
        }

        if let Some(ls) = &self.l {
            let ls = ls.iter().map(|l| rat_str(l)).collect::<Result<Vec<_>, _>>()?;
            set_path(params, "scales", json!({ "list": ls }))?;
        }
        if let Some(v) = &self.log_scales {
            set_path(params, "scales", json!({ "log": { "lo_exp": v[0], "hi_exp": v[1], "count": v[2] as usize } }))?;
        }
        if let Some(k) = &self.kappa {
            set_path(params, "kappa", json!(rat_str(k)?))?;
        }
        if let Some(e) = self.grid_check_exp {
            set_path(params, "grid_check_exp", json!(e))?;
        }
        if let Some(x) = self.x {
            set_path(params, "grid.X", json!(x))?;
        }
        if let Some(n) = self.n {
            set_path(params, "grid.N", json!(n))?;
        }
        if let Some(l) = &self.lambdas {
            set_path(params, "lambdas", json!({ "list": l }))?;
        }
        if let Some(v) = &self.lambda_range {
            set_path(params, "lambdas", json!({ "geometric": range(v) }))?;
        }
        if let Some(v) = self.lambda_max {
            set_path(params, "lambda_max", json!(v))?;
        }
        if let Some(v) = self.quad_nodes {
            set_path(params, "quad_nodes", json!(v))?;
        }
        if let Some(v) = self.s {
            set_path(params, "s", json!(v))?;
        }
        if let Some(ts) = &self.t {
            match cmd {
                Observability => set_path(params, "T", json!({ "list": ts }))?,
                _ if ts.len() != 1 => return Err(invalid(format!("{cmd} takes a single --T"))),
                Necessity => set_path(params, "experiment.T", json!(ts[0]))?,
                _ => set_path(params, "T", json!(ts[0]))?,
            }
        }
        if let Some(v) = &self.t_range {
            set_path(params, "T", json!({ "geometric": range(v) }))?;
        }
        if let Some(v) = self.xi0 {
            set_path(params, "xi0", json!(v))?;
        }
        if let Some(v) = self.quad_points {
            set_path(params, "quad_points", json!(v))?;
        }
        if let Some(v) = self.eta {
            let key = if cmd == Necessity { "exterior.eta" } else { "eta" };
            set_path(params, key, json!(v))?;
        }
        let hs = match (&self.hs, &self.hs_dyadic) {
            (Some(_), Some(_)) => return Err(invalid("give --hs or --hs-dyadic, not both")),
            (Some(hs), None) => Some(hs.clone()),
            (None, Some(k)) => Some((k[0]..=k[1]).map(|k| 2f64.powi(-k)).collect::<Vec<_>>()),
            (None, None) => None,
        };
        if let Some(hs) = hs {
            let key = if cmd == Necessity { "experiment.hs" } else { "hs" };
            let value = if cmd == Necessity { json!(hs) } else { json!({ "list": hs }) };
            set_path(params, key, value)?;
        }
        if let Some(l) = &self.center_l {
            set_path(params, "center_scale", json!(rat_str(l)?))?;
        }
        if let Some(r) = self.r {
            set_path(params, "experiment.r", json!(r))?;
        }
        for p in &self.params {
            let (path, text) =
                p.split_once('=').ok_or_else(|| invalid(format!("--param {p:?} is not PATH=VALUE")))?;
            let value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()));
            set_path(params, path.trim(), value)?;
        }
        Ok(())
    }
}

fn arity<T>(flag: &str, v: &Option<Vec<T>>, n: usize) -> Result<(), CliError> {
    match v {
        Some(v) if v.len() != n => Err(invalid(format!("{flag} takes {n} comma-separated values, got {}", v.len()))),
        _ => Ok(()),
    }
}
