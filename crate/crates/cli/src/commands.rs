use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use hsinv::distributions::delta_coefficients;
use hsinv::geometry::corrected_drift;
use hsinv::hermite::Projector;
use hsinv::invariance::{
    check_chart, check_levelset, check_simultaneous, check_sphere, check_stratonovich, overall_verdict,
    InvarianceReport, Verdict,
};
use hsinv::sde::{path_increments, simulate_paths, step_count};
use hsinv::spde::{common_noise_experiment, compare_trajectories, shift_trajectory, write_distance_csv, SpdeTrajectory};
use hsinv::TruncationScheme;

use crate::config::Config;
use crate::registry::{build, BuiltIn, ModelSpec, SdeEntry};
use crate::{render, UsageError};

pub struct Context {
    pub cfg: Config,
    pub argv: Vec<String>,
    pub subcommand: &'static str,
    pub out_given: bool,
}

pub enum Outcome {
    Success,
    VerdictFailed,
}

/// Output directory; files are listed in the manifest in write order.
struct RunDir {
    path: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("cannot create run directory {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let target = self.path.join(name);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&target, contents).with_context(|| format!("cannot write {}", target.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Config snapshot plus manifest; rerunning with `--config <dir>/config.toml`
    /// reproduces every output.
    fn finish(mut self, ctx: &Context, extra: Value) -> Result<()> {
        self.write("config.toml", ctx.cfg.to_toml())?;
        let manifest = json!({
            "manifest_version": 1,
            "subcommand": ctx.subcommand,
            "argv": ctx.argv,
            "seed": ctx.cfg.seed,
            "versions": {
                "hsinv": hsinv::VERSION,
                "hsinv-cli": env!("CARGO_PKG_VERSION"),
            },
            "config": ctx.cfg,
            "outputs": self.outputs,
            "details": extra,
        });
        self.write_json("manifest.json", &manifest)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn model(ctx: &Context) -> Result<BuiltIn> {
    let spec = ModelSpec::parse(&ctx.cfg.model)?;
    Ok(build(&spec, &ctx.cfg)?)
}

pub fn transform(ctx: &Context, function: Option<String>) -> Result<Outcome> {
    let t = &ctx.cfg.transform;
    let name = function.unwrap_or_else(|| t.function.clone());
    let scheme = TruncationScheme::new(t.dimension, t.max_degree)?;
    let d = t.dimension;
    let exact: Option<fn(&[f64]) -> f64> = match name.as_str() {
        "gaussian" => Some(|x| (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()),
        "sech" => Some(|x| x.iter().map(|v| 1.0 / v.cosh()).product()),
        "delta" => None,
        other => {
            return Err(UsageError(format!("unknown function '{other}'; expected gaussian, sech or delta")).into());
        }
    };
    let coefficients = match exact {
        Some(f) => Projector::for_scheme(scheme)?.project(f)?,
        None => {
            let point = if t.point.is_empty() { vec![0.0; d] } else { t.point.clone() };
            delta_coefficients(&point, &scheme)?
        }
    };
    let mut run = RunDir::create(&ctx.cfg.out)?;
    run.write_json("coefficients.json", &coefficients)?;
    let norms: Vec<Value> = t
        .norms
        .iter()
        .map(|&p| json!({ "p": p, "norm": coefficients.norm_p(p) }))
        .collect();
    run.write_json("norms.json", &json!({ "function": name, "scheme": scheme.to_string(), "norms": norms }))?;
    if d == 1 {
        let basis = scheme.basis();
        let mut csv = String::from(if exact.is_some() { "x,reconstruction,exact\n" } else { "x,reconstruction\n" });
        for x in linspace(t.grid_min, t.grid_max, t.grid_points) {
            let r = coefficients.reconstruct_with(&basis, &[x]);
            match exact {
                Some(f) => csv.push_str(&format!("{x},{r},{}\n", f(&[x]))),
                None => csv.push_str(&format!("{x},{r}\n")),
            }
        }
        run.write("reconstruction.csv", csv)?;
    }
    println!("{name}: {} coefficients on {scheme}", coefficients.len());
    run.finish(ctx, json!({ "function": name }))?;
    Ok(Outcome::Success)
}

/// Verdict-bearing reports, then the sufficient-only simultaneous check.
fn sde_reports(e: &SdeEntry, ctx: &Context) -> Result<(Vec<InvarianceReport>, Vec<InvarianceReport>, Value)> {
    let inv = &ctx.cfg.invariance;
    let model = e.model.as_ref();
    let sample = e.manifold.sample(inv.samples, ctx.cfg.seed);
    let mut reports = check_levelset(model, &e.manifold, &sample, inv.tolerance)?;
    if e.sphere {
        reports.extend(check_sphere(model, &sample, inv.tolerance));
    }
    reports.extend(check_stratonovich(model, &e.manifold, &sample, inv.tolerance));
    let drift = |x: &[f64]| corrected_drift(model, x);
    let columns: Vec<Box<dyn Fn(&[f64]) -> DVector<f64> + Sync>> = (0..model.noise_count())
        .map(|j| Box::new(move |x: &[f64]| model.diffusion(x).column(j).into_owned()) as Box<_>)
        .collect();
    let mut fields: Vec<&(dyn Fn(&[f64]) -> DVector<f64> + Sync)> = vec![&drift];
    fields.extend(columns.iter().map(|c| c.as_ref()));
    let mut simultaneous = check_simultaneous(&fields, &e.manifold, &sample, inv.radius, inv.tolerance)?;
    simultaneous.condition = "simultaneous-tangency".into();
    let info = json!({
        "manifold": format!("{:?}", e.manifold.kind()),
        "samples": sample.len(),
        "rejected": sample.rejected,
    });
    Ok((reports, vec![simultaneous], info))
}

pub fn check_invariance(ctx: &Context) -> Result<Outcome> {
    let (name, reports, supplementary, info) = match model(ctx)? {
        BuiltIn::Sde(e) => {
            let (reports, supplementary, info) = sde_reports(&e, ctx)?;
            (e.model.name(), reports, supplementary, info)
        }
        BuiltIn::Spde(m) => {
            let inv = &ctx.cfg.invariance;
            let d = m.dimension();
            // points along the diagonal of [-range, range]^d
            let points: Vec<Vec<f64>> = linspace(-inv.chart_range, inv.chart_range, inv.chart_points.max(1))
                .into_iter()
                .map(|s| vec![s; d])
                .collect();
            let check = check_chart(&m, &m.orbit_chart(), &points, inv.tolerance)?;
            let info = json!({ "manifold": "translation orbit", "chart_points": points.len() });
            (ctx.cfg.model.clone(), check.reports(), vec![], info)
        }
    };
    let verdict = overall_verdict(&reports);
    let report = json!({
        "model": name,
        "verdict": verdict,
        "tolerance": ctx.cfg.invariance.tolerance,
        "seed": ctx.cfg.seed,
        "details": info,
        "reports": reports,
        "supplementary": supplementary,
    });
    let mut run = RunDir::create(&ctx.cfg.out)?;
    run.write_json("report.json", &report)?;
    run.finish(ctx, json!({ "model": name, "verdict": verdict }))?;
    println!("{name}: verdict {verdict} ({} conditions)", reports.len());
    Ok(if verdict == Verdict::Pass {
        Outcome::Success
    } else {
        Outcome::VerdictFailed
    })
}

pub fn simulate_sde(ctx: &Context) -> Result<Outcome> {
    let BuiltIn::Sde(e) = model(ctx)? else {
        return Err(UsageError(format!("{} is an SPDE model; use simulate-spde", ctx.cfg.model)).into());
    };
    let s = &ctx.cfg.sde;
    let model = e.model.as_ref();
    let x0 = s.x0.clone().unwrap_or_else(|| e.x0.clone());
    if x0.len() != model.dimension() {
        return Err(UsageError(format!("sde.x0 has {} entries, model dimension is {}", x0.len(), model.dimension())).into());
    }
    let paths = simulate_paths(model, &x0, s.horizon, s.dt, ctx.cfg.seed, s.paths)?;
    let mut run = RunDir::create(&ctx.cfg.out)?;
    for (i, t) in paths.iter().enumerate() {
        let mut buf = Vec::new();
        t.write_csv(&mut buf)?;
        run.write(&format!("paths/path_{i:04}.csv"), buf)?;
    }
    let steps = paths[0].times.len();
    let mut csv = String::from("t,mean_deviation,max_deviation\n");
    let mut max_dev = vec![0.0f64; paths.len()];
    for k in 0..steps {
        let devs: Vec<f64> = paths.iter().map(|t| e.manifold.value(&t.states[k]).norm()).collect();
        for (m, v) in max_dev.iter_mut().zip(&devs) {
            *m = m.max(*v);
        }
        let mean = devs.iter().sum::<f64>() / devs.len() as f64;
        let max = devs.iter().copied().fold(0.0, f64::max);
        csv.push_str(&format!("{},{mean},{max}\n", paths[0].times[k]));
    }
    run.write("deviation.csv", csv)?;
    let summary = json!({
        "model": model.name(),
        "manifold": format!("{:?}", e.manifold.kind()),
        "seed": ctx.cfg.seed,
        "paths": paths.len(),
        "dt": s.dt,
        "horizon": s.horizon,
        "x0": x0,
        "final_states": paths.iter().map(|t| t.final_state().to_vec()).collect::<Vec<_>>(),
        "max_deviation": max_dev,
    });
    run.write_json("summary.json", &summary)?;
    run.finish(ctx, json!({ "model": model.name() }))?;
    println!("{}: {} paths of {} steps", model.name(), paths.len(), steps - 1);
    Ok(Outcome::Success)
}

pub fn simulate_spde(ctx: &Context) -> Result<Outcome> {
    let BuiltIn::Spde(m) = model(ctx)? else {
        return Err(UsageError(format!("{} is an SDE model; use simulate-sde", ctx.cfg.model)).into());
    };
    let s = &ctx.cfg.spde;
    let seed = ctx.cfg.seed;
    if s.x0.len() != m.dimension() {
        return Err(UsageError(format!("spde.x0 has {} entries, model dimension is {}", s.x0.len(), m.dimension())).into());
    }
    let steps = step_count(s.horizon, s.dt)?;
    let increments = path_increments(seed, 0, steps, m.noise_count(), s.dt);
    let profile = m.translated_profile_solution(&s.x0, s.dt, &increments)?.with_seed(seed);
    let y0 = m.translated_profile(&s.x0)?;
    let galerkin = m.galerkin_integrate(&y0, s.dt, &increments)?.with_seed(seed);
    let p = s.regularity.unwrap_or_else(|| m.profile().default_regularity());
    let series = compare_trajectories(&profile, &galerkin, p)?;

    let mut run = RunDir::create(&ctx.cfg.out)?;
    run.write("profile.json", profile.to_json()?)?;
    run.write("galerkin.json", galerkin.to_json()?)?;
    let mut buf = Vec::new();
    write_distance_csv(&series, &mut buf)?;
    run.write("distance.csv", buf)?;
    if let Some(shifts) = shift_trajectory(&profile, &increments, seed) {
        let mut buf = Vec::new();
        shifts.write_csv(&mut buf)?;
        run.write("shift.csv", buf)?;
    }
    let sup = series.iter().map(|x| x.1).fold(0.0, f64::max);
    let mut summary = json!({
        "model": ctx.cfg.model,
        "scheme": m.scheme().to_string(),
        "seed": seed,
        "dt": s.dt,
        "horizon": s.horizon,
        "x0": s.x0,
        "regularity": p,
        "sup_distance": sup,
        "final_distance": series.last().map(|x| x.1),
    });
    if s.paths > 1 {
        let study = common_noise_experiment(&m, &s.x0, s.horizon, &[s.dt, s.dt / 2.0], s.paths, seed, p)?;
        run.write_json("coupling.json", &study)?;
        summary["coupling_ratios"] = json!(study.ratios);
        summary["truncation_floor"] = json!(study.truncation_floor);
    }
    run.write_json("summary.json", &summary)?;
    run.finish(ctx, json!({ "model": ctx.cfg.model }))?;
    println!("{}: {steps} steps, sup distance {sup:e} in S_{p}", ctx.cfg.model);
    Ok(Outcome::Success)
}

fn load_trajectory(path: &Path) -> Result<SpdeTrajectory> {
    let text = fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    Ok(SpdeTrajectory::from_json(&text)
        .map_err(|e| UsageError(format!("{} is not an SPDE trajectory: {e}", path.display())))?)
}

pub fn compare(ctx: &Context, left: Option<PathBuf>, right: Option<PathBuf>) -> Result<Outcome> {
    let c = &ctx.cfg.compare;
    let (Some(left), Some(right)) = (left.or_else(|| c.left.clone()), right.or_else(|| c.right.clone())) else {
        return Err(UsageError("compare needs --left and --right (or compare.left / compare.right)".into()).into());
    };
    let a = load_trajectory(&left)?;
    let b = load_trajectory(&right)?;
    let p = c.regularity.unwrap_or(a.regularity);
    let series = compare_trajectories(&a, &b, p)?;
    let mut run = RunDir::create(&ctx.cfg.out)?;
    let mut buf = Vec::new();
    write_distance_csv(&series, &mut buf)?;
    run.write("distance.csv", buf)?;
    let sup = series.iter().map(|x| x.1).fold(0.0, f64::max);
    run.write_json(
        "compare.json",
        &json!({
            "left": left,
            "right": right,
            "regularity": p,
            "points": series.len(),
            "sup_distance": sup,
            "final_distance": series.last().map(|x| x.1),
        }),
    )?;
    run.finish(ctx, json!({ "left": left, "right": right }))?;
    println!("sup distance {sup:e} in S_{p} over {} times", series.len());
    Ok(Outcome::Success)
}

pub fn report(ctx: &Context, input: Option<PathBuf>) -> Result<Outcome> {
    let input = input.unwrap_or_else(|| ctx.cfg.out.clone());
    let files: Vec<PathBuf> = if input.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(&input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        v
    } else if input.is_file() {
        vec![input.clone()]
    } else {
        return Err(UsageError(format!("no such run directory or file: {}", input.display())).into());
    };
    if files.is_empty() {
        return Err(UsageError(format!("no JSON outputs in {}", input.display())).into());
    }
    let mut text = String::new();
    for f in &files {
        let raw = fs::read_to_string(f)?;
        let value: Value =
            serde_json::from_str(&raw).map_err(|e| UsageError(format!("{} is not valid JSON: {e}", f.display())))?;
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        text.push_str(&render::render(&name, &value));
        text.push('\n');
    }
    print!("{text}");
    if ctx.out_given {
        fs::create_dir_all(&ctx.cfg.out)?;
        fs::write(ctx.cfg.out.join("report.txt"), &text)?;
    }
    Ok(Outcome::Success)
}
