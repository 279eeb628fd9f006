//! Pipeline stages behind the `shockfront` binary. Each stage reads its
//! inputs from and writes its outputs to `output_dir`; nothing else is shared.

pub mod config;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use shockfront::essential::{essential_spectrum_plotdata, region_signature, write_borders_csv, RegionLabel};
use shockfront::linalg::C64;
use shockfront::pde::{initial_state, run_perturbation_experiment, write_snapshot_csv, DecayReport};
use shockfront::reduced::{
    fast_bundle_path, fast_probe_root_scan, find_slow_eigenvalues, slow_evans, slow_shoot, FastRoot, SlowOptions,
    SlowPath,
};
use shockfront::riccati::{Direction, RiccatiEvans};
use shockfront::wave::{singular_wavespeed, solve_wave_bvp_with, SlowEnd, WaveProfile};
use shockfront::winding::{contour_report, localize_spectrum, SpectralContour, SpectralReport};
use shockfront::Model;

pub use config::{Command, ContourSpec, Format, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input for stage `{stage}`: {path}")]
    MissingInput { stage: &'static str, path: PathBuf },
    #[error("stage `{stage}` failed: {source}")]
    Numerical {
        stage: &'static str,
        #[source]
        source: shockfront::Error,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingInput { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn stage<T>(name: &'static str, r: shockfront::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Numerical { stage: name, source })
}

fn write_json<T: Serialize>(path: &Path, value: &T, stage_name: &'static str) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    stage(stage_name, std::fs::write(path, text + "\n").map_err(Into::into))
}

fn c64(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

/// Files written by a run, relative to `output_dir`.
#[derive(Debug, Default)]
struct Outputs(Vec<String>);

impl Outputs {
    fn add(&mut self, cfg: &RunConfig, name: &str) -> PathBuf {
        self.0.push(name.to_string());
        cfg.output_dir.join(name)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    /// Seconds since the Unix epoch; the only field that varies between
    /// otherwise identical runs.
    timestamp: u64,
    config: &'a RunConfig,
    outputs: &'a [String],
}

/// Runs the configured command and writes `manifest.json` next to its outputs.
pub fn run(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    let model = Model::new(cfg.model.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = Outputs::default();
    match cfg.command {
        Command::Wave => {
            run_wave(cfg, &model, &mut out)?;
        }
        Command::Essential => run_essential(cfg, &model, &mut out)?,
        Command::Evans => run_evans(cfg, &mut out)?,
        Command::Winding => {
            run_winding(cfg, &cfg.winding.contour, "winding", &mut out)?;
        }
        Command::Fast => {
            run_fast(cfg, &mut out)?;
        }
        Command::Slow => {
            run_slow(cfg, &model, &mut out)?;
        }
        Command::Simulate => {
            run_simulate(cfg, &model, &mut out)?;
        }
        Command::ReproduceAll => reproduce_all(cfg, &model, &mut out)?,
    }
    let manifest = Manifest {
        program: "shockfront",
        version: env!("CARGO_PKG_VERSION"),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config: cfg,
        outputs: &out.0,
    };
    write_json(&cfg.output_dir.join("manifest.json"), &manifest, "manifest")
}

#[derive(Serialize)]
struct WaveSummary {
    c0: f64,
    eps: f64,
    c: f64,
    boundary_residual: f64,
    intervals: usize,
}

fn run_wave(cfg: &RunConfig, model: &Model, out: &mut Outputs) -> Result<WaveProfile> {
    let c0 = stage("wave", singular_wavespeed(model, cfg.wave.c_bracket))?;
    let wave = stage("wave", solve_wave_bvp_with(model, cfg.wave.eps, c0, &cfg.wave.bvp))?;
    let path = out.add(cfg, "wave.csv");
    out.0.push("wave.json".into());
    stage("wave", wave.write_csv(&path))?;
    let summary = WaveSummary {
        c0,
        eps: wave.eps,
        c: wave.c,
        boundary_residual: wave.residuals.boundary,
        intervals: wave.residuals.intervals,
    };
    write_json(&out.add(cfg, "wave_summary.json"), &summary, "wave")?;
    Ok(wave)
}

fn load_wave(cfg: &RunConfig, stage_name: &'static str) -> Result<WaveProfile> {
    let path = cfg.wave_file();
    if !path.exists() {
        return Err(CliError::MissingInput { stage: stage_name, path });
    }
    stage(stage_name, WaveProfile::read_csv(&path))
}

#[derive(Serialize)]
struct RegionProbe {
    lambda: [f64; 2],
    region: Option<RegionLabel>,
    error: Option<String>,
}

fn run_essential(cfg: &RunConfig, model: &Model, out: &mut Outputs) -> Result<()> {
    let e = &cfg.essential;
    let m = model.with_eps_c(e.eps.unwrap_or(model.eps()), e.c.unwrap_or(model.c()));
    let borders = stage("essential", essential_spectrum_plotdata(e.k_range, e.n, &m))?;
    match cfg.format {
        Format::Csv => stage("essential", write_borders_csv(&borders, &out.add(cfg, "essential_borders.csv")))?,
        Format::Json => write_json(&out.add(cfg, "essential_borders.json"), &borders, "essential")?,
    }
    let probes: Vec<RegionProbe> = e
        .probes
        .iter()
        .map(|&p| match region_signature(c64(p), &m) {
            Ok(r) => RegionProbe { lambda: p, region: Some(r), error: None },
            Err(err) => RegionProbe { lambda: p, region: None, error: Some(err.to_string()) },
        })
        .collect();
    write_json(&out.add(cfg, "essential_regions.json"), &probes, "essential")
}

#[derive(Serialize)]
struct EvansValue {
    lambda: [f64; 2],
    value: Option<[f64; 2]>,
    error: Option<String>,
}

fn run_evans(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let wave = load_wave(cfg, "evans")?;
    let mut ev = RiccatiEvans::new(&wave);
    ev.opts = cfg.evans.riccati;
    let values: Vec<EvansValue> = cfg
        .evans
        .lambdas
        .iter()
        .map(|&l| match ev.eval(c64(l)) {
            Ok(v) => EvansValue { lambda: l, value: Some([v.re, v.im]), error: None },
            Err(e) => EvansValue { lambda: l, value: None, error: Some(e.to_string()) },
        })
        .collect();
    write_json(&out.add(cfg, "evans.json"), &values, "evans")
}

fn run_winding(cfg: &RunConfig, spec: &ContourSpec, name: &str, out: &mut Outputs) -> Result<SpectralReport> {
    let wave = load_wave(cfg, "winding")?;
    let mut ev = RiccatiEvans::new(&wave);
    ev.opts = cfg.winding.riccati;
    let w = &cfg.winding;
    let report = match spec {
        ContourSpec::Localize => stage("winding", localize_spectrum(&ev, wave.model(), &w.localize))?,
        other => {
            let contour = match *other {
                ContourSpec::Circle { center, radius } => SpectralContour::circle(c64(center), radius),
                ContourSpec::SemicircleWithDetour { radius, detour } => {
                    SpectralContour::semicircle_with_detour(radius, detour)
                }
                ContourSpec::Rectangle { re, im } => SpectralContour::rectangle(re, im),
                ContourSpec::Localize => unreachable!(),
            };
            stage("winding", contour_report(&ev, contour, &w.contour_options))?
        }
    };
    if let Some(c) = &report.contour {
        match cfg.format {
            Format::Csv => stage("winding", c.write_csv(&out.add(cfg, &format!("{name}_contour.csv"))))?,
            Format::Json => write_json(&out.add(cfg, &format!("{name}_contour.json")), c, "winding")?,
        }
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        winding: i32,
        roots: &'a [shockfront::winding::LocatedPoint],
        poles: &'a [shockfront::winding::LocatedPoint],
        excluded: &'a [[f64; 4]],
        evaluations: usize,
    }
    let summary = Summary {
        winding: report.winding,
        roots: &report.roots,
        poles: &report.poles,
        excluded: &report.excluded,
        evaluations: report.evaluations,
    };
    write_json(&out.add(cfg, &format!("{name}.json")), &summary, "winding")?;
    Ok(report)
}

#[derive(Serialize)]
struct PathRow {
    xi_or_u: f64,
    coords: Vec<[f64; 2]>,
}

fn write_path(cfg: &RunConfig, out: &mut Outputs, name: &str, header: &[&str], rows: &[PathRow]) -> Result<()> {
    match cfg.format {
        Format::Json => write_json(&out.add(cfg, &format!("{name}.json")), &rows, "paths"),
        Format::Csv => {
            let path = out.add(cfg, &format!("{name}.csv"));
            let mut text = String::from("xi_or_U");
            for h in header {
                text += &format!(",re_{h},im_{h}");
            }
            text.push('\n');
            for r in rows {
                text += &format!("{:.17e}", r.xi_or_u);
                for c in &r.coords {
                    text += &format!(",{:.17e},{:.17e}", c[0], c[1]);
                }
                text.push('\n');
            }
            stage("paths", std::fs::write(path, text).map_err(Into::into))
        }
    }
}

#[derive(Serialize)]
struct FastSummary {
    interval: (f64, f64),
    n: usize,
    roots: Vec<FastRoot>,
}

fn run_fast(cfg: &RunConfig, out: &mut Outputs) -> Result<Vec<FastRoot>> {
    let wave = load_wave(cfg, "fast")?;
    let f = &cfg.fast;
    let roots = stage("fast", fast_probe_root_scan(&wave, f.interval, f.n, &f.probe))?;
    let lam = C64::new(f.path_lambda, 0.0);
    for (dir, name) in [(Direction::UnstableForward, "fast_path_unstable"), (Direction::StableBackward, "fast_path_stable")] {
        let end = match dir {
            Direction::UnstableForward => wave.right(),
            Direction::StableBackward => wave.left(),
        };
        let path = stage("fast", fast_bundle_path(&wave, lam, dir, end, &f.probe))?;
        let rows: Vec<PathRow> = path
            .xi
            .iter()
            .zip(&path.beta)
            .map(|(x, b)| PathRow { xi_or_u: *x, coords: b.iter().map(|z| [z.re, z.im]).collect() })
            .collect();
        write_path(cfg, out, name, &["beta1", "beta2", "beta3"], &rows)?;
    }
    let summary = FastSummary { interval: f.interval, n: f.n, roots };
    write_json(&out.add(cfg, "fast_roots.json"), &summary, "fast")?;
    Ok(summary.roots)
}

#[derive(Serialize)]
struct SlowSummary {
    c0: f64,
    section: f64,
    roots: Vec<f64>,
    e_s_at_zero: f64,
}

fn run_slow(cfg: &RunConfig, model: &Model, out: &mut Outputs) -> Result<SlowSummary> {
    let s = &cfg.slow;
    let c0 = match s.c0 {
        Some(c) => c,
        None => stage("slow", singular_wavespeed(model, cfg.wave.c_bracket))?,
    };
    let roots = stage("slow", find_slow_eigenvalues(model, s.interval, s.n, c0, &s.options))?;
    let e0 = stage("slow", slow_evans(model, C64::new(0.0, 0.0), c0, &s.options))?.e_s.norm();
    write_json(&out.add(cfg, "slow_roots.json"), &roots, "slow")?;
    let lam = C64::new(s.path_lambda, 0.0);
    // Paths all the way to a section next to the opposite end.
    for (end, sec, name) in [(SlowEnd::Right, 0.02, "slow_path_unstable"), (SlowEnd::Left, 0.98, "slow_path_stable")] {
        let mut path = SlowPath::default();
        let opts = SlowOptions { section: sec, ..s.options };
        stage("slow", slow_shoot(model, lam, c0, end, &opts, Some(&mut path)))?;
        let rows: Vec<PathRow> = path
            .ubar
            .iter()
            .zip(&path.pv)
            .map(|(u, pv)| PathRow { xi_or_u: *u, coords: pv.iter().map(|z| [z.re, z.im]).collect() })
            .collect();
        write_path(cfg, out, name, &["P", "V"], &rows)?;
    }
    let summary = SlowSummary { c0, section: s.options.section, roots, e_s_at_zero: e0 };
    write_json(&out.add(cfg, "slow_summary.json"), &summary, "slow")?;
    Ok(summary)
}

fn run_simulate(cfg: &RunConfig, model: &Model, out: &mut Outputs) -> Result<(DecayReport, f64)> {
    let s = &cfg.simulate;
    let c0 = stage("simulate", singular_wavespeed(model, cfg.wave.c_bracket))?;
    let wave = stage("simulate", solve_wave_bvp_with(model, s.sim.eps, c0, &s.bvp))?;
    let mut sim = s.sim.clone();
    if s.auto_dt {
        sim.dt = sim.max_stable_dt(wave.model());
    }
    let report = stage("simulate", run_perturbation_experiment(&wave, &sim))?;
    write_json(&out.add(cfg, "decay_report.json"), &report, "simulate")?;
    let x = sim.grid();
    let u0 = initial_state(&wave, &sim);
    let u = &report.final_state;
    for (data, name) in [(&u0, "snapshot_initial"), (u, "snapshot_final")] {
        match cfg.format {
            Format::Csv => stage("simulate", write_snapshot_csv(&x, data, &out.add(cfg, &format!("{name}.csv"))))?,
            Format::Json => write_json(&out.add(cfg, &format!("{name}.json")), &(&x, data), "simulate")?,
        }
    }
    Ok((report, wave.c))
}

#[derive(Serialize)]
struct SummaryRow {
    quantity: String,
    computed: String,
    reference: String,
    agrees: bool,
}

fn row(quantity: &str, computed: String, reference: &str, agrees: bool) -> SummaryRow {
    SummaryRow { quantity: quantity.into(), computed, reference: reference.into(), agrees }
}

fn reproduce_all(cfg: &RunConfig, model: &Model, out: &mut Outputs) -> Result<()> {
    let mut rows = Vec::new();
    let wave = run_wave(cfg, model, out)?;
    let c0 = stage("wave", singular_wavespeed(model, cfg.wave.c_bracket))?;
    rows.push(row("singular wavespeed c0", format!("{c0:.10}"), "0.1968109995", (c0 - 0.1968109995).abs() < 1e-7));
    rows.push(row(
        &format!("wavespeed c at eps = {:e}", wave.eps),
        format!("{:.6}", wave.c),
        "0.19686",
        (wave.c - 0.19686).abs() < 2e-4,
    ));
    let mut cfg = cfg.clone();
    cfg.wave.file = Some(cfg.output_dir.join("wave.csv"));
    run_essential(&cfg, model, out)?;
    let big = run_winding(&cfg, &cfg.winding.contour.clone(), "winding_large", out)?;
    rows.push(row("winding on the large contour", big.winding.to_string(), "0", big.winding == 0));
    let loc = run_winding(&cfg, &ContourSpec::Localize, "localization", out)?;
    let fmt = |pts: &[shockfront::winding::LocatedPoint]| {
        pts.iter().map(|p| format!("{:.5}{:+.5}i", p.center.re, p.center.im)).collect::<Vec<_>>().join(", ")
    };
    let near = |pts: &[shockfront::winding::LocatedPoint], x: f64, tol: f64| {
        pts.len() == 1 && (pts[0].center - C64::new(x, 0.0)).norm() < tol
    };
    let roots_ok = loc.roots.len() == 2
        && loc.roots.iter().any(|p| p.center.norm() < 0.1)
        && loc.roots.iter().any(|p| (p.center.re + 0.8).abs() < 0.01);
    rows.push(row("roots of E_T", fmt(&loc.roots), "0, -0.8", roots_ok));
    rows.push(row("poles of E_T", fmt(&loc.poles), "-0.29", near(&loc.poles, -0.29, 0.01)));
    let fast = run_fast(&cfg, out)?;
    let fast_txt = fast
        .iter()
        .map(|r| format!("{:.3} (beta2 gap {:.3})", r.lambda, r.beta2_gap))
        .collect::<Vec<_>>()
        .join(", ");
    let fast_ok = fast.len() == 1
        && ((fast[0].lambda - 3718.025) / 3718.025).abs() < 0.01
        && (fast[0].beta2_gap + 5.08).abs() < 0.1;
    rows.push(row("fast E_f zeros in [0, 5000]", fast_txt, "3718.025 (beta2 gap -5.08)", fast_ok));
    let slow = run_slow(&cfg, model, out)?;
    let slow_ok = slow.roots.len() == 2 && (slow.roots[0] + 0.80031).abs() < 1e-3 && slow.roots[1].abs() < 1e-6;
    rows.push(row(
        "slow eigenvalues",
        slow.roots.iter().map(|r| format!("{r:.6}")).collect::<Vec<_>>().join(", "),
        "-0.80031, 0",
        slow_ok,
    ));
    let (decay, c_sim) = run_simulate(&cfg, model, out)?;
    let speed_ok = ((decay.fitted_speed - c_sim) / c_sim).abs() < 0.05;
    rows.push(row(
        "simulated front speed",
        format!("{:.5} (wave c {:.5})", decay.fitted_speed, c_sim),
        "c(eps) within 5%",
        speed_ok,
    ));
    rows.push(row(
        "perturbation decay rate",
        format!("{:.4}", decay.fitted_rate),
        "same order as -0.8",
        decay.fitted_rate < 0.0 && (decay.fitted_rate / -0.8) < 3.0 && (decay.fitted_rate / -0.8) > 1.0 / 3.0,
    ));
    write_json(&out.add(&cfg, "summary.json"), &rows, "summary")?;
    let mut md = String::from("| quantity | computed | reference | agrees |\n|---|---|---|---|\n");
    for r in &rows {
        md += &format!("| {} | {} | {} | {} |\n", r.quantity, r.computed, r.reference, if r.agrees { "yes" } else { "no" });
    }
    stage("summary", std::fs::write(out.add(&cfg, "summary.md"), md).map_err(Into::into))
}
