use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{DensityMethodArg, Format, RunConfig};
use super::svg::{Plot, Series};
use super::CliError;
use crate::angular::{is_rotation_scaling, AngularCoeffs};
use crate::density::{
    density_backward_difference, density_closed_form, density_game_printed, density_rotation_closed_form,
    density_rotation_printed, trig_moments, Domain, PhaseDensity,
};
use crate::export::{self, fmt_f64};
use crate::linalg::Vec2;
use crate::lyapunov::{
    lambda_closed_form, lambda_monte_carlo, lambda_quadrature, sweep, sweep_roots, MonteCarloConfig, SweepParam,
    SweepSpec,
};
use crate::model::{characteristic_roots, game_half_trace, gamma_offsets, linearize, stationary_state};
use crate::sim::{simulate, Scheme, SimulationSpec, Trajectory};
use crate::Error;

/// Bisection width for sweep roots.
const ROOT_TOL: f64 = 1e-3;
/// Points per polyline in plots; longer series are thinned.
const MAX_PLOT_POINTS: usize = 4000;

pub(crate) fn output_path(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<PathBuf, CliError> {
    let io_err = |e: io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err)?;
    Ok(path.to_path_buf())
}

fn write_svg(path: &Path, plot: &Plot) -> Result<PathBuf, CliError> {
    write_file(path, |w| w.write_all(plot.render().as_bytes()))
}

/// Shortest round-trip form, in scientific notation outside `[1e-4, 1e15)`.
fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{}", v + 0.0)
    } else {
        format!("{v:e}")
    }
}

fn fmt_complex(z: num_complex::Complex64) -> String {
    if z.im == 0.0 {
        num(z.re)
    } else {
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{} {sign} {}i", num(z.re), num(z.im.abs()))
    }
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::Io(format!("cannot write to stdout: {e}"))
}

fn mc_config(cfg: &RunConfig) -> MonteCarloConfig {
    MonteCarloConfig {
        horizon: cfg.horizon,
        step: cfg.h,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        burn_in_fraction: cfg.burn_in,
        integrator: cfg.mc_integrator,
    }
}

pub fn analyze(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let game = &cfg.game;
    let x0 = stationary_state(game);
    let gamma = gamma_offsets(game);
    let sys = linearize(game);
    let roots = characteristic_roots(&sys);
    let coeffs = AngularCoeffs::new(sys);
    let a = sys.a;

    let mut rows: Vec<(&str, f64)> = vec![
        ("x10", x0.x10),
        ("x20", x0.x20),
        ("gamma1", gamma.gamma1),
        ("gamma2", gamma.gamma2),
        ("a11", a[0][0]),
        ("a12", a[0][1]),
        ("a21", a[1][0]),
        ("a22", a[1][1]),
        ("mu1_re", roots.mu1.re),
        ("mu1_im", roots.mu1.im),
        ("mu2_re", roots.mu2.re),
        ("mu2_im", roots.mu2.im),
        ("half_trace", roots.half_trace()),
        ("half_trace_closed_form", game_half_trace(game)),
    ];
    let mut notes = Vec::new();

    let density = match is_rotation_scaling(&sys) {
        Some((alpha, beta)) if beta != 0.0 => density_rotation_closed_form(&coeffs, alpha, beta, cfg.grid),
        _ => density_closed_form(&coeffs, cfg.grid, cfg.fpe),
    };
    match density {
        Ok(p) => {
            rows.push(("lambda_quadrature", lambda_quadrature(&coeffs, &p).value));
            let m = trig_moments(&p);
            match lambda_closed_form(game, &m) {
                Ok(est) => {
                    rows.push(("d2", m.c2_moment));
                    rows.push(("e2", m.s2_moment));
                    rows.push(("lambda_closed_form", est.value));
                }
                Err(Error::NotRotationScaling) => notes.push("closed-form lambda needs rotation-scaling b".to_string()),
                Err(e) => notes.push(format!("closed-form lambda unavailable: {e}")),
            }
        }
        Err(e) => notes.push(format!("lambda unavailable: {e}")),
    }

    match cfg.format {
        Format::Csv => {
            writeln!(out, "quantity,value").map_err(stdout_err)?;
            for (k, v) in &rows {
                writeln!(out, "{k},{}", fmt_f64(*v)).map_err(stdout_err)?;
            }
        }
        Format::Text => {
            let get = |k: &str| rows.iter().find(|r| r.0 == k).map(|r| r.1);
            let mut text = String::new();
            text.push_str(&format!("stationary state   x10 = {}  x20 = {}\n", num(x0.x10), num(x0.x20)));
            text.push_str(&format!("gamma offsets      g1 = {}  g2 = {}\n", num(gamma.gamma1), num(gamma.gamma2)));
            text.push_str(&format!("A = [[{}, {}], [{}, {}]]\n", num(a[0][0]), num(a[0][1]), num(a[1][0]), num(a[1][1])));
            text.push_str(&format!("roots              mu1 = {}  mu2 = {}\n", fmt_complex(roots.mu1), fmt_complex(roots.mu2)));
            text.push_str(&format!(
                "half trace         {}  (closed form {})\n",
                num(roots.half_trace()),
                num(game_half_trace(game))
            ));
            if let Some(l) = get("lambda_quadrature") {
                text.push_str(&format!("lambda quadrature  {}\n", num(l)));
            }
            if let Some(l) = get("lambda_closed_form") {
                text.push_str(&format!(
                    "lambda closed form {}  (D2 = {}, E2 = {})\n",
                    num(l),
                    num(get("d2").unwrap_or(f64::NAN)),
                    num(get("e2").unwrap_or(f64::NAN))
                ));
            }
            if let Some(l) = get("lambda_quadrature") {
                let verdict = if l < 0.0 { "almost surely stable" } else { "not almost surely stable" };
                text.push_str(&format!("verdict            {verdict}\n"));
            }
            for n in &notes {
                text.push_str(&format!("note: {n}\n"));
            }
            out.write_all(text.as_bytes()).map_err(stdout_err)?;
        }
    }
    Ok(())
}

pub fn run_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = SweepSpec {
        grid: cfg.grid,
        monte_carlo: mc_config(cfg),
        ..SweepSpec::new(cfg.sweep_param, cfg.from, cfg.to, cfg.steps, cfg.sweep_method)
    };
    let result = sweep(&cfg.game, &spec)?;
    let valid = result.points.iter().filter(|p| p.lambda.is_some()).count();
    if valid == 0 {
        let reason = result.points[0].gap.clone().unwrap_or_default();
        return Err(CliError::Numeric(format!("every sweep point failed (first: {reason})")));
    }
    let roots = sweep_roots(&cfg.game, &spec, &result, ROOT_TOL);

    let csv = write_file(&output_path(&cfg.output, "_sweep.csv"), |w| export::write_sweep(w, &result))?;
    let roots_csv = write_file(&output_path(&cfg.output, "_roots.csv"), |w| export::write_roots(w, &roots))?;

    let name = match cfg.sweep_param {
        SweepParam::Alpha => "alpha",
        SweepParam::Beta => "beta",
    };
    let mut segments = vec![Vec::new()];
    for p in &result.points {
        match p.lambda {
            Some(l) => segments.last_mut().unwrap().push((p.param, l)),
            None if !segments.last().unwrap().is_empty() => segments.push(Vec::new()),
            None => {}
        }
    }
    let gaps = result.points.len() - valid;
    let plot = Plot {
        title: format!("Lyapunov exponent vs {name} ({})", result.method.name()),
        x_label: name.to_string(),
        y_label: "lambda".to_string(),
        series: vec![Series {
            label: result.method.name().to_string(),
            segments,
            dashed: false,
        }],
        zero_line: true,
        markers: roots.iter().map(|r| (r.root, 0.0)).collect(),
        notes: if gaps > 0 { vec![format!("{gaps} point(s) skipped")] } else { Vec::new() },
    };
    let svg = write_svg(&output_path(&cfg.output, "_sweep.svg"), &plot)?;

    let mut text = format!(
        "{} points ({} skipped), {} sign change(s)\n",
        result.points.len(),
        gaps,
        roots.len()
    );
    for r in &roots {
        text.push_str(&format!("  root {name} = {}  in [{}, {}]\n", num(r.root), num(r.lo), num(r.hi)));
    }
    for p in result.points.iter().filter(|p| p.gap.is_some()) {
        text.push_str(&format!("  skipped {name} = {}: {}\n", num(p.param), p.gap.as_deref().unwrap_or("")));
    }
    text.push_str(&format!("wrote {}\nwrote {}\nwrote {}\n", csv.display(), roots_csv.display(), svg.display()));
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn rotation_params(cfg: &RunConfig, method: DensityMethodArg) -> Result<(f64, f64), CliError> {
    is_rotation_scaling(&linearize(&cfg.game)).ok_or_else(|| {
        CliError::Config(format!("density method {} needs rotation-scaling b", method.name()))
    })
}

fn compute_density(cfg: &RunConfig, coeffs: &AngularCoeffs, method: DensityMethodArg) -> Result<PhaseDensity, CliError> {
    let p = match method {
        DensityMethodArg::ClosedForm => density_closed_form(coeffs, cfg.grid, cfg.fpe)?,
        DensityMethodArg::BackwardDifference => density_backward_difference(coeffs, cfg.grid, cfg.fpe)?,
        DensityMethodArg::Rotation => {
            let (alpha, beta) = rotation_params(cfg, method)?;
            density_rotation_closed_form(coeffs, alpha, beta, cfg.grid)?
        }
        DensityMethodArg::Printed => {
            let (alpha, beta) = rotation_params(cfg, method)?;
            density_game_printed(&cfg.game, alpha, beta, cfg.grid)?
        }
        DensityMethodArg::RotationPrinted => {
            let (alpha, beta) = rotation_params(cfg, method)?;
            density_rotation_printed(coeffs, alpha, beta, cfg.grid)?
        }
    };
    let converted = match (p.domain(), cfg.domain) {
        (Domain::Full, Domain::Half) => p.to_half()?,
        (Domain::Half, Domain::Full) => p.to_full()?,
        _ => p,
    };
    Ok(converted)
}

pub fn run_density(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let coeffs = AngularCoeffs::new(linearize(&cfg.game));
    let mut methods = cfg.density_methods.clone();
    methods.dedup();
    let mut text = String::new();
    let mut series = Vec::new();
    let mut notes = Vec::new();
    for method in methods {
        let p = compute_density(cfg, &coeffs, method)?;
        if let Some(min) = p.diagnostics.negative_min {
            let _ = writeln!(err, "warning: {} density went negative (min {min}); clamped to 0", method.name());
            notes.push(format!("{}: negative values clamped", method.name()));
        }
        if p.diagnostics.nonperiodic_printed_form {
            let _ = writeln!(err, "warning: the published {} form is not periodic for these parameters", method.name());
            notes.push(format!("{}: published form is not periodic", method.name()));
        }
        let path = write_file(&output_path(&cfg.output, &format!("_density_{}.csv", method.name())), |w| {
            export::write_density(w, &p)
        })?;
        text.push_str(&format!(
            "{:<20} lambda = {}  D2 = {}  E2 = {}\nwrote {}\n",
            method.name(),
            num(lambda_quadrature(&coeffs, &p).value),
            num(trig_moments(&p).c2_moment),
            num(trig_moments(&p).s2_moment),
            path.display()
        ));
        let pts: Vec<(f64, f64)> = p.grid().iter().copied().zip(p.values().iter().copied()).collect();
        series.push(Series::new(method.name(), thin(&pts)));
    }
    let plot = Plot {
        title: "Stationary phase density".to_string(),
        x_label: "theta".to_string(),
        y_label: "p(theta)".to_string(),
        series,
        zero_line: false,
        markers: Vec::new(),
        notes,
    };
    let svg = write_svg(&output_path(&cfg.output, "_density.svg"), &plot)?;
    text.push_str(&format!("wrote {}\n", svg.display()));
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn thin<T: Copy>(points: &[T]) -> Vec<T> {
    if points.len() <= MAX_PLOT_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_PLOT_POINTS);
    let mut v: Vec<T> = points.iter().step_by(stride).copied().collect();
    if (points.len() - 1) % stride != 0 {
        v.push(points[points.len() - 1]);
    }
    v
}

fn distance(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn run_simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let game = &cfg.game;
    let gamma = gamma_offsets(game);
    let stationary = stationary_state(game).as_vec();
    let base = cfg.x0.unwrap_or(stationary);
    let start = [base[0] + cfg.perturbation[0], base[1] + cfg.perturbation[1]];
    let spec = SimulationSpec {
        scheme: cfg.scheme,
        step: cfg.h,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
        keep_every: cfg.keep_every,
    };
    let sde = simulate(game, &gamma, start, &spec)?;
    let ode = if cfg.deterministic {
        Some(simulate(game, &gamma, start, &SimulationSpec { scheme: Scheme::OdeRk4, ..spec })?)
    } else {
        None
    };

    let mut text = String::new();
    let mut wrote = vec![write_file(&output_path(&cfg.output, "_trajectory.csv"), |w| {
        export::write_trajectory(w, &sde)
    })?];
    if let Some(ode) = &ode {
        wrote.push(write_file(&output_path(&cfg.output, "_ode.csv"), |w| export::write_trajectory(w, ode))?);
    }

    let mut notes = Vec::new();
    let describe = |t: &Trajectory, text: &mut String, notes: &mut Vec<String>| {
        let end = t.last();
        text.push_str(&format!(
            "{:<15} t = {}  x = ({}, {})  |x - x0| = {}\n",
            t.scheme.name(),
            num(t.times.last().copied().unwrap_or(0.0)),
            num(end[0]),
            num(end[1]),
            num(distance(end, stationary))
        ));
        if let Some(n) = t.truncated_at {
            text.push_str(&format!("  {} path left the valid region after step {n}\n", t.scheme.name()));
            notes.push(format!("{} truncated at n = {n}", t.scheme.name()));
        }
    };
    describe(&sde, &mut text, &mut notes);
    if let Some(ode) = &ode {
        describe(ode, &mut text, &mut notes);
    }

    let runs: Vec<&Trajectory> = std::iter::once(&sde).chain(ode.as_ref()).collect();
    let mut series = Vec::new();
    for t in &runs {
        let dashed = t.scheme == Scheme::OdeRk4;
        for (i, comp) in ["x1", "x2"].iter().enumerate() {
            let pts: Vec<(f64, f64)> = t.indices.iter().zip(&t.states).map(|(&n, x)| (n as f64, x[i])).collect();
            series.push(Series {
                label: format!("{comp} {}", t.scheme.name()),
                segments: vec![thin(&pts)],
                dashed,
            });
        }
    }
    let time_plot = Plot {
        title: "Quantities over time".to_string(),
        x_label: "n".to_string(),
        y_label: "x".to_string(),
        series,
        zero_line: false,
        markers: Vec::new(),
        notes: notes.clone(),
    };
    wrote.push(write_svg(&output_path(&cfg.output, "_timeseries.svg"), &time_plot)?);

    let phase_plot = Plot {
        title: "Phase portrait".to_string(),
        x_label: "x1".to_string(),
        y_label: "x2".to_string(),
        series: runs
            .iter()
            .map(|t| Series {
                label: t.scheme.name().to_string(),
                segments: vec![thin(&t.states.iter().map(|x| (x[0], x[1])).collect::<Vec<_>>())],
                dashed: t.scheme == Scheme::OdeRk4,
            })
            .collect(),
        zero_line: false,
        markers: vec![(stationary[0], stationary[1])],
        notes,
    };
    wrote.push(write_svg(&output_path(&cfg.output, "_phase.svg"), &phase_plot)?);

    for p in wrote {
        text.push_str(&format!("wrote {}\n", p.display()));
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

pub fn run_mc_lambda(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let mc = mc_config(cfg);
    let est = lambda_monte_carlo(&linearize(&cfg.game), &mc)?;
    let se = est.standard_error().unwrap_or(0.0);
    let text = match cfg.format {
        Format::Csv => format!(
            "lambda,stderr,n_paths,horizon,h,seed\n{},{},{},{},{},{}\n",
            fmt_f64(est.value),
            fmt_f64(se),
            mc.n_paths,
            fmt_f64(mc.horizon),
            fmt_f64(mc.step),
            mc.seed
        ),
        Format::Text => format!(
            "lambda = {} +/- {} (standard error, {} paths, T = {}, h = {}, seed {})\n",
            num(est.value),
            num(se),
            mc.n_paths,
            num(mc.horizon),
            num(mc.step),
            mc.seed
        ),
    };
    out.write_all(text.as_bytes()).map_err(stdout_err)
}
