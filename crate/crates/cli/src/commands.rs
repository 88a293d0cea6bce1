//! The five commands. Each returns the JSON it prints plus an exit code, and
//! writes its artifacts into the output directory.

use crate::config::{check_positive, config_err, ConfigError, RunConfig};
use anyhow::{anyhow, bail, Context, Result};
use choquard_core::energy::stationarity;
use choquard_core::fiber::{fiber_curve, g4_diagnose, log_taus, FiberCurve};
use choquard_core::io::{read_field, write_atomic, write_field};
use choquard_core::minimize::{certify, solve};
use choquard_core::problem::validate;
use choquard_core::thresholds::{ConstantSource, ThresholdBundle};
use choquard_core::{Field, Grid, RieszKernel};
use serde_json::{json, Map, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub struct Done {
    pub json: Value,
    pub code: u8,
}

impl Done {
    fn ok(json: Value) -> Self {
        Self { json, code: 0 }
    }
}

/// Run-dependent facts kept apart from the scientific content.
struct Meta {
    command: &'static str,
    started: SystemTime,
    clock: Instant,
    threads: usize,
}

impl Meta {
    fn start(command: &'static str, threads: usize) -> Self {
        Self { command, started: SystemTime::now(), clock: Instant::now(), threads }
    }

    /// Timestamps, host and thread count; only for commands whose output is
    /// not expected to be byte-stable.
    fn timed(&self) -> Value {
        let started = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        json!({
            "tool": "choquard",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "started_unix": started,
            "elapsed_s": self.clock.elapsed().as_secs_f64(),
            "threads": self.threads,
            "host": host_name(),
        })
    }

    fn stable(&self) -> Value {
        json!({ "tool": "choquard", "version": env!("CARGO_PKG_VERSION"), "command": self.command })
    }
}

fn host_name() -> String {
    std::env::var("HOSTNAME")
        .ok()
        .or_else(|| fs::read_to_string("/etc/hostname").ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_default()
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.output_dir.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let out = Self { dir };
        out.text("config.toml", &cfg.to_toml()?)?;
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn text(&self, name: &str, s: &str) -> Result<()> {
        let p = self.path(name);
        write_atomic(&p, s.as_bytes()).with_context(|| format!("writing {}", p.display()))
    }

    fn json(&self, name: &str, v: &Value) -> Result<()> {
        self.text(name, &(serde_json::to_string_pretty(v)? + "\n"))
    }

    fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))?;
        let p = self.path(name);
        write_atomic(&p, &bytes).with_context(|| format!("writing {}", p.display()))
    }
}

/// The bundle as one flat object; provenance becomes `<field>_provenance`.
fn flat_bundle(bundle: &ThresholdBundle) -> Result<Map<String, Value>> {
    let Value::Object(mut obj) = serde_json::to_value(bundle)? else {
        bail!("bundle did not serialize to an object");
    };
    if let Some(Value::Object(prov)) = obj.remove("provenance") {
        for (k, v) in prov {
            obj.insert(format!("{k}_provenance"), v);
        }
    }
    Ok(obj)
}

fn kernel_for(cfg: &RunConfig, alpha: f64) -> Result<RieszKernel> {
    let grid = Grid::new(3, cfg.grid.m, cfg.grid.l).map_err(config_err)?;
    RieszKernel::new(&grid, alpha).map_err(config_err)
}

fn bundle_for(cfg: &RunConfig, r: &crate::config::Resolved, kernel: Option<&RieszKernel>) -> Result<ThresholdBundle> {
    let owned;
    let kernel = match (cfg.constants.source, kernel) {
        (ConstantSource::Exact, _) => None,
        (ConstantSource::Trial, Some(k)) => Some(k),
        (ConstantSource::Trial, None) => {
            owned = kernel_for(cfg, r.params.alpha)?;
            Some(&owned)
        }
    };
    ThresholdBundle::compute(&r.params, &r.nl, kernel, cfg.constants.source).map_err(config_err)
}

pub fn constants(cfg: &RunConfig, threads: usize) -> Result<Done> {
    let meta = Meta::start("constants", threads);
    let r = cfg.resolve(None)?;
    let bundle = bundle_for(cfg, &r, None)?;
    let mut obj = flat_bundle(&bundle)?;
    obj.insert("growth_conditions_satisfied".into(), json!(validate(&r.params, &r.nl)?.all_satisfied()));
    obj.insert("meta".into(), meta.stable());
    let v = Value::Object(obj);
    Out::new(cfg)?.json("constants.json", &v)?;
    Ok(Done::ok(v))
}

pub fn threshold(cfg: &RunConfig, threads: usize) -> Result<Done> {
    let meta = Meta::start("threshold", threads);
    let r = cfg.resolve(None)?;
    let bundle = bundle_for(cfg, &r, None)?;
    let rho = r.params.rho;
    if bundle.rho0.is_none() {
        bail!(ConfigError(format!("no positive window: rho = {rho}, and this G gives no finite rho0")));
    }
    let bar = bundle.barrier();
    let (r0, r1) = bar.roots(rho).map_err(config_err)?;
    let t = &cfg.threshold;
    let lo = t.t_min.unwrap_or(0.1 * r0);
    let hi = t.t_max.unwrap_or(10.0 * r1);
    check_positive("threshold.t_min", lo)?;
    if !(hi > lo) || t.samples < 2 {
        bail!(ConfigError(format!("threshold grid needs t_max > t_min and samples >= 2, got [{lo}, {hi}] x {}", t.samples)));
    }
    let ts = log_taus(lo, hi, t.samples).map_err(config_err)?;

    let mut obj = flat_bundle(&bundle)?;
    obj.insert("t_min".into(), json!(lo));
    obj.insert("t_max".into(), json!(hi));
    obj.insert("samples".into(), json!(t.samples));
    obj.insert("h_csv".into(), json!("h.csv"));
    obj.insert("meta".into(), meta.stable());
    let v = Value::Object(obj);
    let out = Out::new(cfg)?;
    out.csv("h.csv", &["t", "h"], ts.iter().map(|&t| vec![format!("{t:e}"), format!("{:e}", bar.h(rho, t))]))?;
    out.json("threshold.json", &v)?;
    Ok(Done::ok(v))
}

fn fiber_rows(curve: &FiberCurve) -> Vec<Vec<String>> {
    (0..curve.len())
        .filter(|&i| curve.resolved[i])
        .map(|i| {
            vec![
                format!("{:e}", curve.taus[i]),
                format!("{:e}", curve.values[i]),
                format!("{:e}", curve.kinetic[i]),
                format!("{:e}", curve.interaction[i]),
                curve.d_lower[i].map(|d| format!("{d:e}")).unwrap_or_default(),
            ]
        })
        .collect()
}

const FIBER_HEADER: [&str; 5] = ["tau", "phi", "kinetic", "interaction", "d_lower"];

fn fiber_summary(curve: &FiberCurve) -> Value {
    let unresolved: Vec<f64> = (0..curve.len()).filter(|&i| !curve.resolved[i]).map(|i| curve.taus[i]).collect();
    json!({
        "csv": "fiber.csv",
        "samples": curve.len(),
        "resolved": curve.len() - unresolved.len(),
        "unresolved_taus": unresolved,
        "phi_at_1_slope": curve.phi_at_1_slope,
        "relative_slope_at_1": curve.relative_slope_at_1(),
        "variation": curve.variation,
        "detected_maxima": curve.detected_maxima,
        "g4": g4_diagnose(curve),
    })
}

fn fiber_taus(cfg: &RunConfig) -> Result<Vec<f64>> {
    let f = &cfg.fiber;
    log_taus(f.tau_min, f.tau_max, f.samples).map_err(config_err)
}

pub fn solve_cmd(cfg: &RunConfig, threads: usize) -> Result<Done> {
    let meta = Meta::start("solve", threads);
    let r = cfg.resolve(None)?;
    let kernel = kernel_for(cfg, r.params.alpha)?;
    let bundle = bundle_for(cfg, &r, Some(&kernel))?;
    let opts = cfg.solver.options();
    opts.check().map_err(config_err)?;
    let taus = if cfg.solver.fiber { Some(fiber_taus(cfg)?) } else { None };
    let out = Out::new(cfg)?;

    let report = solve(&r.params, &r.nl, &kernel, &bundle, &opts).map_err(config_err)?;
    let residuals = stationarity(&r.params, &r.nl, &kernel, &report.u_star)?;
    write_field(&out.path("u_star.chqf"), &report.u_star).context("writing u_star.chqf")?;
    let fiber = match &taus {
        Some(t) => {
            let curve = fiber_curve(&r.params, &r.nl, &kernel, &report.u_star, t)?;
            out.csv("fiber.csv", &FIBER_HEADER, fiber_rows(&curve))?;
            Some(fiber_summary(&curve))
        }
        None => None,
    };

    let accepted = report.converged
        && ((report.checks.all && !report.outside_theory) || cfg.solver.outside_theory);
    let status = if !report.converged {
        "not-converged"
    } else if accepted {
        "ok"
    } else {
        "not-certified"
    };
    let v = json!({
        "status": status,
        "config": cfg,
        "validation": validate(&r.params, &r.nl)?,
        "bundle": flat_bundle(&bundle)?,
        "report": report,
        "residuals": residuals,
        "fiber": fiber,
        "field": "u_star.chqf",
        "meta": meta.timed(),
    });
    out.json("report.json", &v)?;
    Ok(Done { json: v, code: if accepted { 0 } else { 2 } })
}

fn load_field(path: &Path) -> Result<Field> {
    read_field(path).with_context(|| format!("reading field {}", path.display()))
}

pub fn fiber_cmd(cfg: &RunConfig, field: &Path, threads: usize) -> Result<Done> {
    let meta = Meta::start("fiber", threads);
    let u = load_field(field)?;
    let r = cfg.resolve(Some(u.mass()))?;
    let kernel = RieszKernel::new(u.grid(), r.params.alpha).map_err(config_err)?;
    let taus = fiber_taus(cfg)?;
    let curve = fiber_curve(&r.params, &r.nl, &kernel, &u, &taus).map_err(config_err)?;
    let out = Out::new(cfg)?;
    out.csv("fiber.csv", &FIBER_HEADER, fiber_rows(&curve))?;
    let mut v = fiber_summary(&curve);
    v["field"] = json!(field);
    v["meta"] = meta.timed();
    out.json("fiber.json", &v)?;
    Ok(Done::ok(v))
}

/// Residuals of any field; reports values and never fails on them.
pub fn verify_cmd(cfg: &RunConfig, field: &Path, threads: usize) -> Result<Done> {
    let meta = Meta::start("verify", threads);
    let u = load_field(field)?;
    let expected = Grid::new(3, cfg.grid.m, cfg.grid.l).map_err(config_err)?;
    u.grid().ensure_same(&expected).map_err(config_err)?;
    let r = cfg.resolve(Some(u.mass()))?;
    let kernel = RieszKernel::new(u.grid(), r.params.alpha).map_err(config_err)?;
    let bundle = bundle_for(cfg, &r, Some(&kernel))?;
    let st = stationarity(&r.params, &r.nl, &kernel, &u)?;
    let r_cap = cfg.solver.r_cap.or(bundle.r0);
    let level = bundle.lower_critical_level(r.params.rho);
    let v = json!({
        "field": field,
        "rho": r.params.rho,
        "mass_rel_dev": (st.mass - r.params.rho).abs() / r.params.rho,
        "r_cap": r_cap,
        "lower_critical_level": level,
        "residuals": st,
        "checks": certify(&st, r_cap, level),
        "meta": meta.timed(),
    });
    Out::new(cfg)?.json("verify.json", &v)?;
    Ok(Done::ok(v))
}
