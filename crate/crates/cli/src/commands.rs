use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaxlab::asymptotics::{build_chapman_enskog, check_viscosity, compare_chapman_enskog, compare_to_linear};
use relaxlab::decay::{DecayReport, Norm};
use relaxlab::expansion::{check_expansion_residuals, expand_infinity, expand_zero, Family, InfinityExpansion, Regime, ZeroExpansion};
use relaxlab::grid::GridField;
use relaxlab::kernel1d::{eval_k, measure_remainder, Block};
use relaxlab::linalg::{max_abs, Mat};
use relaxlab::nonlinear::{default_initial_data, measure_solution_decay, simulate, Scheme, SimOptions, Trajectory};
use relaxlab::sk::{default_directions, estimate_dissipation_constant, log_space};
use relaxlab::validate_h1;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{CommandKind, RunConfig, SystemSource};
use crate::output::{OutputDir, Section};
use crate::{core_error, UsageError};

/// Result of one subcommand.
pub struct Outcome {
    pub pass: bool,
    pub text: String,
}

pub const TRAJECTORY: &str = "trajectory.json";

pub fn rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn section_key(cfg: &RunConfig, suffix: Option<&str>) -> String {
    let command = serde_json::to_value(cfg.command).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    let mut key = command;
    if let Some(s) = &cfg.system {
        key.push(':');
        key.push_str(&s.label());
    }
    if let Some(suffix) = suffix {
        key.push(':');
        key.push_str(suffix);
    }
    key
}

/// File-name form of the system label, e.g. `p_system_2_1`.
fn slug(cfg: &RunConfig) -> String {
    let label = cfg.system.as_ref().map(SystemSource::label).unwrap_or_default();
    let raw: String = label.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    raw.split('_').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("_")
}

fn section(cfg: &RunConfig, provenance: Vec<Value>, results: Value, pass: bool) -> Section {
    Section {
        command: section_key(cfg, None).split(':').next().unwrap_or_default().to_string(),
        system: cfg.system.as_ref().map(SystemSource::label),
        provenance,
        results,
        pass,
    }
}

fn norms_for(m: usize) -> Vec<Norm> {
    if m == 1 {
        vec![Norm::L1, Norm::L2, Norm::Inf]
    } else {
        vec![Norm::L2, Norm::Inf]
    }
}

fn family_summary(f: &Family) -> Value {
    json!({
        "speed": f.speed,
        "basis": rows(&f.r),
        "subfamilies": f.sub.iter().map(|s| json!({
            "value": [s.value.re, s.value.im],
            "multiplicity": s.multiplicity,
            "defective": s.is_defective(),
        })).collect::<Vec<_>>(),
    })
}

fn zero_summary(ex: &ZeroExpansion) -> Value {
    json!({
        "families": ex.families.iter().map(family_summary).collect::<Vec<_>>(),
        "p0": rows(&ex.p0),
        "p1": rows(&ex.p1),
        "p2": rows(&ex.p2),
    })
}

fn infinity_summary(ex: &InfinityExpansion) -> Value {
    json!({ "families": ex.families.iter().map(family_summary).collect::<Vec<_>>() })
}

fn directions(m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = default_directions(m);
    if m >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-3 {
                dirs.push(v.iter().map(|x| x / norm).collect());
            }
        }
    }
    dirs
}

pub fn analyze(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Outcome> {
    let (raw, m, cd) = cfg.load_system()?;
    let h1 = validate_h1(&raw);
    let a0_inv = raw.a0.clone().try_inverse().ok_or_else(|| UsageError("A0 is singular".into()))?;
    let gram_defect = max_abs(&(m.transpose() * &m - a0_inv));
    let (lo, hi, count) = cfg.rho;
    let rho = log_space(lo, hi, count);
    let zetas = directions(cd.m, cfg.seed);
    let sk = estimate_dissipation_constant(&cd, &rho, &zetas);
    let mut expansions = Vec::new();
    let mut residuals_pass = true;
    let near = log_space(1e-3, 1e-1, 8);
    let far = log_space(1e1, 1e3, 8);
    for zeta in &zetas {
        let zero = expand_zero(&cd, zeta).map_err(core_error)?;
        let inf = expand_infinity(&cd, zeta).map_err(core_error)?;
        let rz = check_expansion_residuals(&cd, zeta, &near, Regime::Zero).map_err(core_error)?;
        let ri = check_expansion_residuals(&cd, zeta, &far, Regime::Infinity).map_err(core_error)?;
        residuals_pass &= rz.passes && ri.passes;
        expansions.push(json!({
            "zeta": zeta,
            "zero": zero_summary(&zero),
            "infinity": infinity_summary(&inf),
            "residuals": { "zero": rz, "infinity": ri },
        }));
    }
    let pass = h1.passes && sk.holds && residuals_pass;
    let results = json!({
        "h1": h1,
        "cd_form": {
            "M": rows(&m),
            "M_inv": rows(&cd.transform_inv),
            "A": cd.a.iter().map(rows).collect::<Vec<_>>(),
            "B": rows(&cd.b),
            "D": rows(&cd.d),
            "gram_defect": gram_defect,
        },
        "sk": sk,
        "expansions": expansions,
    });
    let provenance = vec![
        json!({ "operation": "validate_h1", "inputs": { "system": cfg.system } }),
        json!({ "operation": "to_cd_form", "inputs": { "system": cfg.system } }),
        json!({ "operation": "estimate_dissipation_constant", "inputs": { "rho": [lo, hi, count], "directions": zetas, "seed": cfg.seed } }),
        json!({ "operation": "expand_zero", "inputs": { "directions": zetas } }),
        json!({ "operation": "expand_infinity", "inputs": { "directions": zetas } }),
        json!({ "operation": "check_expansion_residuals", "inputs": { "zero_rho": near, "infinity_rho": far } }),
    ];
    let mut text = String::new();
    let label = cfg.system.as_ref().map(SystemSource::label).unwrap_or_default();
    writeln!(text, "system {label}: m = {}, n1 = {}, n2 = {}", cd.m, cd.n1, cd.n2)?;
    writeln!(text, "H1: {}", if h1.passes { "ok" } else { "violated" })?;
    writeln!(text, "M = {:?}", rows(&m))?;
    for (a, mat) in cd.a.iter().enumerate() {
        writeln!(text, "A~[{a}] = {:?}", rows(mat))?;
    }
    writeln!(text, "B~ = {:?}", rows(&cd.b))?;
    writeln!(text, "|M^T M - A0^-1| = {gram_defect:.3e}")?;
    writeln!(text, "SK holds: {}, c = {:.6}", sk.holds, sk.c_estimate)?;
    if let Some(w) = &sk.violation {
        writeln!(text, "SK witness at zeta {:?}: {:?}", w.zeta, w.vector)?;
    }
    writeln!(text, "expansion residual checks: {}", if residuals_pass { "pass" } else { "fail" })?;
    let name = format!("analyze_{}", slug(cfg));
    out.write_json(&format!("{name}.json"), &results)?;
    out.write(&format!("{name}.txt"), text.as_bytes())?;
    out.add_section(&section_key(cfg, None), section(cfg, provenance, results, pass))?;
    Ok(Outcome { pass, text })
}

pub fn kernel(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Outcome> {
    let (_, _, cd) = cfg.load_system()?;
    if cd.m != 1 {
        return Err(UsageError("the kernel subcommand needs a one-dimensional system".into()).into());
    }
    let t = cfg.t_final_or(1);
    let grid = cfg.grid_for(&cd, t, 1 << 14)?;
    let window = cfg.fit_window.unwrap_or((t / 10.0, t));
    let times = log_space(window.0, window.1, 12);
    let zero = expand_zero(&cd, &[1.0]).map_err(core_error)?;
    let x = grid.axis_coordinates(0);
    let field = eval_k(&cd, &zero, t, &x).map_err(core_error)?;
    let remainder = measure_remainder(&cd, &times, &grid).map_err(core_error)?;
    let mut csv = String::from("t");
    for b in Block::ALL {
        write!(csv, ",sup_{}", b.label())?;
    }
    csv.push('\n');
    for (i, t) in remainder.times.iter().enumerate() {
        write!(csv, "{t:.17e}")?;
        for b in Block::ALL {
            write!(csv, ",{:.17e}", remainder.block(b).sup[i])?;
        }
        csv.push('\n');
    }
    out.write(&format!("kernel_{}.csv", slug(cfg)), field.to_csv().as_bytes())?;
    out.write(&format!("remainder_{}.csv", slug(cfg)), csv.as_bytes())?;
    let sups: serde_json::Map<String, Value> =
        Block::ALL.iter().map(|&b| (b.label().to_string(), json!(field.block_sup(b)))).collect();
    let results = json!({
        "kernel": { "t": t, "points": x.len(), "max_imag": field.max_imag(), "block_sup": sups },
        "remainder": remainder,
    });
    let grid_json = json!({ "n": grid.sizes, "l": grid.half_length });
    let provenance = vec![
        json!({ "operation": "eval_k", "inputs": { "t": t, "grid": grid_json } }),
        json!({ "operation": "measure_remainder", "inputs": { "times": times, "grid": grid_json } }),
    ];
    let pass = remainder.passes;
    let mut text = format!("K(t = {t}) on {} points, max imaginary part {:.2e}\n", x.len(), field.max_imag());
    for b in Block::ALL {
        let f = remainder.block(b);
        writeln!(
            text,
            "remainder {}: exponent {:.3} (expected {} +- {}) {}",
            b.label(),
            f.exponent,
            f.expected,
            f.tolerance,
            if f.pass { "pass" } else { "FAIL" }
        )?;
    }
    out.add_section(&section_key(cfg, None), section(cfg, provenance, results, pass))?;
    Ok(Outcome { pass, text })
}

/// Stored description of a simulation for later comparisons.
#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryStore {
    system: SystemSource,
    times: Vec<f64>,
    dt: f64,
    steps: usize,
    order: usize,
    linear: bool,
    delta: f64,
    fields: Vec<String>,
}

fn decay_text(report: &DecayReport) -> String {
    let mut text = String::new();
    for r in &report.rows {
        let _ = writeln!(
            text,
            "{:<8} beta={} p={:<3} fitted {:>7.3} theory {:>6.3} +- {:.2} residual {:.3} {}",
            r.variable,
            r.beta,
            r.p.label(),
            r.fitted,
            r.theoretical,
            r.tolerance,
            r.residual,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    text
}

pub fn simulate_cmd(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Outcome> {
    let (_, _, cd) = cfg.load_system()?;
    if cd.m > 2 {
        return Err(UsageError("simulations support one and two space dimensions".into()).into());
    }
    let t = cfg.t_final_or(cd.m);
    let grid = cfg.grid_for(&cd, t, if cd.m == 1 { 4096 } else { 256 })?;
    let dt = cfg.dt_for(&cd, &grid)?;
    let w0 = default_initial_data(&cd, &grid, cfg.delta);
    let traj = simulate(&cd, &w0, t, dt, &SimOptions { samples: cfg.samples, linear: cfg.linear }).map_err(core_error)?;
    let norms = norms_for(cd.m);
    let report = measure_solution_decay(&traj, &norms, cfg.beta_max, cfg.fit_window).map_err(core_error)?;
    let masses: Vec<Vec<f64>> = traj.fields.iter().map(|f| f.integrals()[..cd.n1].to_vec()).collect();
    let mass_drift = masses.iter().flat_map(|m| m.iter().zip(&masses[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
    let mut files = Vec::new();
    for (k, f) in traj.fields.iter().enumerate() {
        let name = format!("fields/w_{k:04}.bin");
        let mut buf = Vec::new();
        f.write_binary(&mut buf).map_err(core_error)?;
        out.write(&name, &buf)?;
        files.push(name);
    }
    let last = traj.fields.last().expect("trajectories hold the initial sample");
    out.write("slice_final.csv", last.slice_csv().as_bytes())?;
    out.write("decay.csv", report.to_csv().as_bytes())?;
    let store = TrajectoryStore {
        system: cfg.system.clone().expect("validated"),
        times: traj.times.clone(),
        dt: traj.scheme.dt,
        steps: traj.scheme.steps,
        order: traj.scheme.order,
        linear: traj.scheme.linear,
        delta: cfg.delta,
        fields: files,
    };
    out.write_json(TRAJECTORY, &store)?;
    let grid_json = json!({ "n": grid.sizes, "l": grid.half_length });
    let results = json!({
        "scheme": traj.scheme,
        "grid": grid_json,
        "t_final": t,
        "delta": cfg.delta,
        "mass_drift": mass_drift,
        "decay": report,
    });
    let provenance = vec![
        json!({ "operation": "default_initial_data", "inputs": { "delta": cfg.delta, "grid": grid_json } }),
        json!({ "operation": "simulate", "inputs": { "t_final": t, "dt": dt, "samples": cfg.samples, "linear": cfg.linear } }),
        json!({ "operation": "measure_solution_decay", "inputs": { "norms": norms, "beta_max": cfg.beta_max, "window": report.window } }),
    ];
    let pass = report.passes();
    let mut text = format!(
        "{} steps of dt = {:.4} to T = {t}, mass drift {mass_drift:.2e}\n",
        traj.scheme.steps, traj.scheme.dt
    );
    text.push_str(&decay_text(&report));
    let suffix = cfg.linear.then_some("linear");
    out.add_section(&section_key(cfg, suffix), section(cfg, provenance, results, pass))?;
    Ok(Outcome { pass, text })
}

fn load_trajectory(cfg: &RunConfig) -> anyhow::Result<(TrajectoryStore, Trajectory)> {
    let path = cfg.out.join(TRAJECTORY);
    let text = fs::read_to_string(&path)
        .map_err(|e| UsageError(format!("no stored trajectory at {} ({e}); run `simulate` first", path.display())))?;
    let store: TrajectoryStore =
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    if let Some(s) = &cfg.system {
        if *s != store.system {
            return Err(UsageError(format!(
                "trajectory in {} was computed for {}, not {}",
                cfg.out.display(),
                store.system.label(),
                s.label()
            ))
            .into());
        }
    }
    let raw = store.system.load()?;
    let cd = relaxlab::to_cd_form(&raw).map_err(core_error)?.1;
    let mut fields = Vec::with_capacity(store.fields.len());
    for name in &store.fields {
        let p = cfg.out.join(name);
        let file = fs::File::open(&p).with_context(|| format!("opening {}", p.display()))?;
        fields.push(GridField::read_binary(&mut BufReader::new(file)).map_err(core_error)?);
    }
    let scheme = Scheme { dt: store.dt, steps: store.steps, order: store.order, dealiasing: "2/3", linear: store.linear };
    let traj = Trajectory { cd, times: store.times.clone(), fields, scheme };
    Ok((store, traj))
}

pub fn compare(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Outcome> {
    let (store, traj) = load_trajectory(cfg)?;
    let mut cfg = cfg.clone();
    cfg.system = Some(store.system.clone());
    let norms = norms_for(traj.cd.m);
    let (report, kind, extra, provenance) = if cfg.chapman_enskog {
        let ops = build_chapman_enskog(&traj.cd).map_err(core_error)?;
        let checks: Vec<_> = directions(traj.cd.m, cfg.seed).iter().map(|z| check_viscosity(&ops, &traj.cd, z)).collect();
        let report = compare_chapman_enskog(&traj, &ops, &norms, cfg.beta_max, cfg.fit_window, cfg.mu).map_err(core_error)?;
        let extra = json!({
            "drift": ops.drift.iter().map(rows).collect::<Vec<_>>(),
            "viscosity": ops.viscosity.iter().map(|r| r.iter().map(rows).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "quadratic": ops.quadratic.as_ref().map(|q| q.iter().map(rows).collect::<Vec<_>>()),
            "viscosity_checks": checks,
            "mu": cfg.mu,
        });
        let provenance = vec![
            json!({ "operation": "build_chapman_enskog", "inputs": { "system": store.system } }),
            json!({ "operation": "compare_chapman_enskog", "inputs": { "mu": cfg.mu, "norms": norms, "beta_max": cfg.beta_max, "window": report.window } }),
        ];
        (report, "chapman_enskog", extra, provenance)
    } else {
        let report = compare_to_linear(&traj, &norms, cfg.beta_max, cfg.fit_window, cfg.cutoff_a).map_err(core_error)?;
        let provenance = vec![json!({
            "operation": "compare_to_linear",
            "inputs": { "cutoff_a": cfg.cutoff_a, "norms": norms, "beta_max": cfg.beta_max, "window": report.window },
        })];
        (report, "linear", json!({ "cutoff_a": cfg.cutoff_a }), provenance)
    };
    out.write(&format!("compare_{kind}_{}.csv", slug(&cfg)), report.to_csv().as_bytes())?;
    let pass = report.passes();
    let text = format!("{kind} comparison against {} (delta = {})\n{}", store.system.label(), store.delta, decay_text(&report));
    let results = json!({ "comparison": kind, "operators": extra, "decay": report });
    out.add_section(&section_key(&cfg, Some(kind)), section(&cfg, provenance, results, pass))?;
    Ok(Outcome { pass, text })
}

#[derive(Serialize)]
struct CriterionStatus {
    criterion: usize,
    name: &'static str,
    status: &'static str,
    evidence: Vec<String>,
    detail: String,
}

fn get<'a>(v: &'a Value, path: &[&str]) -> Option<&'a Value> {
    path.iter().try_fold(v, |v, k| match k.parse::<usize>() {
        Ok(i) => v.get(i),
        Err(_) => v.get(*k),
    })
}

fn num(v: &Value, path: &[&str]) -> Option<f64> {
    get(v, path).and_then(Value::as_f64)
}

fn matrix_close(v: Option<&Value>, want: &[&[f64]], tol: f64) -> bool {
    let Some(rows) = v.and_then(Value::as_array) else { return false };
    rows.len() == want.len()
        && rows.iter().zip(want).all(|(r, w)| {
            r.as_array()
                .is_some_and(|r| r.len() == w.len() && r.iter().zip(*w).all(|(x, y)| x.as_f64().is_some_and(|x| (x - y).abs() <= tol)))
        })
}

fn decay_row<'a>(results: &'a Value, variable: &str, p: &str) -> Option<&'a Value> {
    get(results, &["decay", "rows"])?.as_array()?.iter().find(|r| {
        r["variable"] == variable && r["beta"] == 0 && r["p"] == p
    })
}

fn row_fitted(results: &Value, variable: &str, p: &str) -> Option<(f64, bool, f64)> {
    let r = decay_row(results, variable, p)?;
    Some((r["fitted"].as_f64()?, r["pass"].as_bool()?, r["residual"].as_f64()?))
}

type Check = Result<(bool, String), String>;

fn criterion_1(s: &Value) -> Check {
    let r = 3f64.sqrt();
    let m_ok = matrix_close(get(s, &["cd_form", "M"]), &[&[1.0, 0.0], &[-1.0 / r, 1.0 / r]], 1e-10);
    let a_ok = matrix_close(get(s, &["cd_form", "A", "0"]), &[&[1.0, r], &[r, -1.0]], 1e-10);
    let b_ok = matrix_close(get(s, &["cd_form", "B"]), &[&[0.0, 0.0], &[0.0, -1.0]], 1e-10);
    let gram = num(s, &["cd_form", "gram_defect"]).ok_or("missing gram defect")?;
    Ok((m_ok && a_ok && b_ok && gram <= 1e-10, format!("M {m_ok}, A {a_ok}, B {b_ok}, gram defect {gram:.1e}")))
}

fn criterion_2(s: &Value) -> Check {
    let e = get(s, &["expansions", "0"]).ok_or("missing expansions")?;
    let fam = get(e, &["zero", "families"]).and_then(Value::as_array).ok_or("missing families")?;
    let zero_ok = fam.len() == 1
        && num(&fam[0], &["speed"]).is_some_and(|x| x.abs() < 1e-12)
        && num(&fam[0], &["subfamilies", "0", "value", "0"]).is_some_and(|x| (x + 1.0).abs() < 1e-12)
        && get(&fam[0], &["subfamilies", "0", "defective"]) == Some(&Value::Bool(false))
        && matrix_close(get(e, &["zero", "p1"]), &[&[0.0, -1.0], &[-1.0, 0.0]], 1e-12);
    let inf = get(e, &["infinity", "families"]).and_then(Value::as_array).ok_or("missing families")?;
    let mut speeds: Vec<f64> = inf.iter().filter_map(|f| num(f, &["speed"])).collect();
    speeds.sort_by(f64::total_cmp);
    let inf_ok = speeds.len() == 2
        && (speeds[0] + 1.0).abs() < 1e-12
        && (speeds[1] - 1.0).abs() < 1e-12
        && inf.iter().all(|f| {
            get(f, &["subfamilies"]).and_then(Value::as_array).is_some_and(|s| {
                s.iter().all(|s| num(s, &["value", "0"]).is_some_and(|b| (b + 0.5).abs() < 1e-12))
            })
        });
    let slopes = |regime: &str| -> Vec<f64> {
        get(e, &["residuals", regime, "fits"])
            .and_then(Value::as_array)
            .map(|fits| fits.iter().filter_map(|f| f["slope"].as_f64()).collect())
            .unwrap_or_default()
    };
    let zmin = slopes("zero").into_iter().fold(f64::INFINITY, f64::min);
    let imax = slopes("infinity").into_iter().fold(f64::NEG_INFINITY, f64::max);
    let ok = zero_ok && inf_ok && zmin >= 2.7 && imax <= -0.7;
    Ok((ok, format!("zero expansion {zero_ok}, infinity expansion {inf_ok}, slopes {zmin:.2} / {imax:.2}")))
}

fn criterion_3(s: &Value) -> Check {
    let c = num(s, &["sk", "c_estimate"]).ok_or("missing c_estimate")?;
    Ok(((0.45..=0.55).contains(&c), format!("c = {c:.6}")))
}

fn criterion_4(s: &Value) -> Check {
    let blocks = get(s, &["remainder", "blocks"]).and_then(Value::as_array).ok_or("missing remainder")?;
    let detail = blocks
        .iter()
        .map(|b| format!("{} {:.3}", b["block"].as_str().unwrap_or("?"), b["exponent"].as_f64().unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((get(s, &["remainder", "passes"]) == Some(&Value::Bool(true)), detail))
}

fn criterion_5(s: &Value) -> Check {
    let (c, cp, _) = row_fitted(s, "u_c", "2").ok_or("missing u_c row")?;
    let (d, dp, _) = row_fitted(s, "u_d", "2").ok_or("missing u_d row")?;
    Ok((cp && dp, format!("L0 {c:.3}, L- {d:.3}")))
}

fn criterion_6(s: &Value) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in ["2", "inf", "1"] {
        for var in ["u", "u_d"] {
            let (f, pass, _) = row_fitted(s, var, p).ok_or(format!("missing {var}/{p} row"))?;
            ok &= pass;
            parts.push(format!("{var}/{p} {f:.3}"));
        }
    }
    Ok((ok, parts.join(", ")))
}

fn criterion_7(s: &Value) -> Check {
    let (d, _, res) = row_fitted(s, "u_c-u_p", "inf").ok_or("missing u_c-u_p row")?;
    let (u, _, _) = row_fitted(s, "u_c", "inf").ok_or("missing u_c row")?;
    Ok((d <= -0.65 && d <= u - 0.25 && res <= 0.1, format!("u_c-u_p {d:.3}, u_c {u:.3}")))
}

fn criterion_8(sim: &Value, ce: &Value) -> Check {
    let (rho, _, r1) = row_fitted(sim, "u_c", "inf").ok_or("missing u_c row")?;
    let (v, _, r2) = row_fitted(sim, "u_d", "inf").ok_or("missing u_d row")?;
    let (d, _, r3) = row_fitted(ce, "u_c-u_p", "inf").ok_or("missing u_c-u_p row")?;
    let ok = (rho + 1.0).abs() <= 0.15 && (v + 1.5).abs() <= 0.2 && d <= -1.3 && r1.max(r2).max(r3) <= 0.1;
    Ok((ok, format!("rho {rho:.3}, v {v:.3}, rho-rho_p {d:.3}")))
}

pub fn report(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Outcome> {
    let report = out.load_report()?;
    let find = |prefix: &str| report.sections.iter().find(|(k, _)| k.starts_with(prefix));
    let mut statuses = Vec::new();
    let mut record = |criterion: usize, name: &'static str, evidence: Vec<String>, check: Option<Check>| {
        let (status, detail) = match check {
            None => ("not_run", "no matching output".to_string()),
            Some(Ok((true, d))) => ("pass", d),
            Some(Ok((false, d))) => ("fail", d),
            Some(Err(e)) => ("fail", e),
        };
        statuses.push(CriterionStatus { criterion, name, status, evidence, detail });
    };
    let single = |prefix: &str, f: fn(&Value) -> Check| match find(prefix) {
        Some((k, s)) => (vec![k.clone()], Some(f(&s.results))),
        None => (vec![], None),
    };
    let (e, c) = single("analyze:p_system(2,1)", criterion_1);
    record(1, "C-D form exactness", e, c);
    let (e, c) = single("analyze:p_system(1,0)", criterion_2);
    record(2, "spectral expansion", e, c);
    let (e, c) = single("analyze:p_system(1,0)", criterion_3);
    record(3, "SK analysis", e, c);
    let (e, c) = single("kernel:p_system(1,0)", criterion_4);
    record(4, "1-D remainder rates", e, c);
    let linear: Vec<_> = report.sections.iter().filter(|(k, _)| k.starts_with("simulate:") && k.ends_with(":linear")).collect();
    let check5 = (!linear.is_empty()).then(|| {
        linear.iter().try_fold((true, String::new()), |(ok, acc), (k, s)| {
            let (pass, d) = criterion_5(&s.results)?;
            Ok((ok && pass, format!("{acc}{}{k}: {d}", if acc.is_empty() { "" } else { "; " })))
        })
    });
    record(5, "linear decay", linear.iter().map(|(k, _)| (*k).clone()).collect(), check5);
    let (e, c) = single("simulate:p_system(1,0)", criterion_6);
    let c = if e.iter().any(|k| k.ends_with(":linear")) { None } else { c };
    record(6, "nonlinear decay", e, c);
    let (e, c) = single("compare:p_system(1,0):chapman_enskog", criterion_7);
    record(7, "Chapman-Enskog", e, c);
    let sim = report.sections.iter().find(|(k, _)| k.starts_with("simulate:euler_damping(2") && !k.ends_with(":linear"));
    let ce = report.sections.iter().find(|(k, _)| k.starts_with("compare:euler_damping(2") && k.ends_with(":chapman_enskog"));
    match (sim, ce) {
        (Some((ks, s)), Some((kc, c))) => record(8, "2-D damped Euler", vec![ks.clone(), kc.clone()], Some(criterion_8(&s.results, &c.results))),
        _ => record(8, "2-D damped Euler", vec![], None),
    }
    record(9, "property suites", vec![], None);
    let pass = statuses.iter().all(|s| s.status != "fail");
    let mut text = String::new();
    for s in &statuses {
        writeln!(text, "criterion {}: {:<7} {:<20} {}", s.criterion, s.status, s.name, s.detail)?;
    }
    let summary = json!({ "criteria": statuses, "sections": report.sections.keys().collect::<Vec<_>>() });
    out.write_json("summary.json", &summary)?;
    let provenance = vec![json!({ "operation": "report", "inputs": { "sections": report.sections.keys().collect::<Vec<_>>() } })];
    let mut cfg = cfg.clone();
    cfg.system = None;
    debug_assert_eq!(cfg.command, CommandKind::Report);
    out.add_section("report", section(&cfg, provenance, summary, pass))?;
    Ok(Outcome { pass, text })
}
