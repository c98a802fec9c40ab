use std::fs;
use std::path::{Path, PathBuf};

use radkernel::checks::{self, all_pass, Check, SuiteOptions};
use radkernel::coefficients::{
    build_coefficients_with, conormal_factor, ellipticity_bounds, radial_trace, Family, Shell,
};
use radkernel::grid::{AngularGrid, ShellGrid, SpaceTimeField};
use radkernel::inverse_radial::{identify, Identification, Method, RadialInverseInput, SolveOptions};
use radkernel::manufactured::radial_named;
use radkernel::Exec;

use crate::config::RunConfig;
use crate::csvio::{num, read_field, read_profile, write_field, write_profile, write_report, write_rows};
use crate::CliError;

pub struct Context {
    pub config: RunConfig,
    /// `true` when a config file was given.
    pub explicit: bool,
    pub out: PathBuf,
    pub exec: Exec,
    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    pub workers: usize,
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

pub fn manufacture(ctx: &Context) -> Result<(), CliError> {
    let (input, k) = radial_named(&ctx.config.problem.preset, ctx.config.grids.n_r)?;
    ensure_dir(&ctx.out)?;
    write_inputs(&ctx.out, &input, &k)?;
    println!("wrote {} ({} preset, n_r = {})", ctx.out.display(), ctx.config.problem.preset, ctx.config.grids.n_r);
    Ok(())
}

fn write_inputs(dir: &Path, input: &RadialInverseInput, k: &SpaceTimeField) -> Result<(), CliError> {
    write_field(&dir.join("u.csv"), &input.u)?;
    write_field(&dir.join("f_tilde.csv"), &input.f_tilde)?;
    write_profile(&dir.join("g.csv"), "t", input.u.time.nodes(), &input.g)?;
    write_profile(&dir.join("lambda.csv"), "r", input.u.radial.nodes(), &input.lambda)?;
    write_field(&dir.join("k_true.csv"), k)
}

/// Loads `u, f̃, g, λ` (and `k_true` when present) from a directory.
fn read_inputs(dir: &Path, cfg: &RunConfig) -> Result<(RadialInverseInput, Option<SpaceTimeField>), CliError> {
    let need = |name: &str| {
        let p = dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::Config(format!("missing input file {}", p.display())))
        }
    };
    let u = read_field(&need("u.csv")?)?;
    let f_tilde = read_field(&need("f_tilde.csv")?)?;
    if f_tilde.radial != u.radial || f_tilde.time != u.time {
        return Err(CliError::Config("u.csv and f_tilde.csv use different grids".into()));
    }
    let g = read_profile(&need("g.csv")?, "t", u.time.nodes())?;
    let lambda = read_profile(&need("lambda.csv")?, "r", u.radial.nodes())?;
    let k_true = match dir.join("k_true.csv") {
        p if p.is_file() => Some(read_field(&p)?),
        _ => None,
    };
    let input = RadialInverseInput { dimension: cfg.dimension()?, u, f_tilde, g, lambda, m: cfg.measurement.m };
    Ok((input, k_true))
}

fn solve_options(ctx: &Context, method: Option<Method>) -> Result<SolveOptions, CliError> {
    Ok(SolveOptions {
        method: match method {
            Some(m) => m,
            None => ctx.config.method()?,
        },
        tol: ctx.config.solver.tol,
        max_iter: ctx.config.solver.max_iter,
        exec: ctx.exec,
    })
}

fn write_identification(
    dir: &Path,
    out: &Identification,
    k_true: Option<&SpaceTimeField>,
    tolerance: f64,
) -> Result<Option<f64>, CliError> {
    let mut entries: Vec<(String, f64)> =
        out.diagnostics.entries().into_iter().map(|(k, v)| (k.to_owned(), v)).collect();
    let error = k_true.map(|k| out.k.max_diff(k) / k.sup_norm().max(f64::MIN_POSITIVE));
    if let Some(e) = error {
        entries.push(("error".into(), e));
        entries.push(("error_tolerance".into(), tolerance));
    }
    ensure_dir(dir)?;
    write_field(&dir.join("k_est.csv"), &out.k)?;
    write_profile(&dir.join("h.csv"), "t", out.k.time.nodes(), &out.h)?;
    write_field(&dir.join("q.csv"), &out.q)?;
    write_report(&dir.join("diagnostics.csv"), &entries)?;
    Ok(error)
}

pub fn identify_cmd(ctx: &Context, method: Option<Method>, sweep: Option<Vec<usize>>) -> Result<(), CliError> {
    let opts = solve_options(ctx, method)?;
    let tol = ctx.config.solver.error_tolerance;
    if let Some(ns) = sweep {
        if ctx.config.io.input.is_some() {
            return Err(CliError::Config("--sweep runs presets and cannot be combined with io.input".into()));
        }
        return sweep_cmd(ctx, &opts, &ns);
    }
    let (input, k_true) = match &ctx.config.io.input {
        Some(dir) => read_inputs(dir, &ctx.config)?,
        None => {
            let (input, k) = radial_named(&ctx.config.problem.preset, ctx.config.grids.n_r)?;
            (input, Some(k))
        }
    };
    let out = identify(&input, &opts)?;
    let error = write_identification(&ctx.out, &out, k_true.as_ref(), tol)?;
    for (k, v) in out.diagnostics.entries() {
        println!("{k:>22} {v:.6e}");
    }
    if let Some(e) = error {
        println!("{:>22} {e:.6e}", "error");
    }
    Ok(())
}

/// One subdirectory per grid size, run on the configured worker pool.
fn sweep_cmd(ctx: &Context, opts: &SolveOptions, ns: &[usize]) -> Result<(), CliError> {
    let preset = ctx.config.problem.preset.as_str();
    let tol = ctx.config.solver.error_tolerance;
    // Entries already run side by side, so each solve stays sequential.
    let inner = SolveOptions { exec: Exec::Sequential, ..*opts };
    let run = |n: usize| -> Result<f64, CliError> {
        let (input, k) = radial_named(preset, n)?;
        let out = identify(&input, &inner)?;
        let dir = ctx.out.join(format!("n_r={n}"));
        Ok(write_identification(&dir, &out, Some(&k), tol)?.unwrap_or(f64::NAN))
    };
    let errors: Vec<f64> = par_map(ctx, ns, run)?;
    let mut rows = Vec::new();
    for (j, (&n, &e)) in ns.iter().zip(&errors).enumerate() {
        let order = if j == 0 { f64::NAN } else { (errors[j - 1] / e).ln() / (n as f64 / ns[j - 1] as f64).ln() };
        println!("n_r = {n:>4}  error = {e:.4e}  order = {order:.3}");
        rows.push([n.to_string(), num(e), if j == 0 { String::new() } else { num(order) }]);
    }
    ensure_dir(&ctx.out)?;
    write_rows(&ctx.out.join("sweep.csv"), ["n_r", "error", "order"], &rows)
}

#[cfg(feature = "parallel")]
fn par_map<F>(ctx: &Context, ns: &[usize], f: F) -> Result<Vec<f64>, CliError>
where
    F: Fn(usize) -> Result<f64, CliError> + Sync + Send,
{
    use rayon::prelude::*;
    if ctx.workers > 1 {
        return ns.par_iter().map(|&n| f(n)).collect();
    }
    ns.iter().map(|&n| f(n)).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<F>(_ctx: &Context, ns: &[usize], f: F) -> Result<Vec<f64>, CliError>
where
    F: Fn(usize) -> Result<f64, CliError>,
{
    ns.iter().map(|&n| f(n)).collect()
}

/// Runs the invariant suite. Returns `false` when any check fails.
pub fn verify(ctx: &Context, sweep: Option<Vec<usize>>) -> Result<bool, CliError> {
    let spec = if ctx.explicit { Some(ctx.config.coefficient_spec()?) } else { None };
    let mut results = checks::run_suite(&SuiteOptions { seed: ctx.config.solver.seed, spec })?;
    if let Some(ns) = sweep {
        let rows = checks::convergence_sweep(&ctx.config.problem.preset, &ns, ctx.exec)?;
        for row in rows.iter().filter(|r| r.order.is_some()) {
            results.push(Check::within(format!("sweep_order_n_r={}", row.n), row.order.unwrap_or(f64::NAN), 1.5, 2.5));
        }
    }
    for c in &results {
        println!(
            "{} {:<36} {:>12.4e}  (threshold {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    let failures: Vec<&str> = results.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if !failures.is_empty() {
        eprintln!("failed: {}", failures.join(", "));
    }
    if ctx.explicit || ctx.config.io.out.is_some() {
        ensure_dir(&ctx.out)?;
        let rows: Vec<[String; 4]> =
            results.iter().map(|c| [c.name.clone(), num(c.value), num(c.threshold), c.passed.to_string()]).collect();
        write_rows(&ctx.out.join("verify.csv"), ["check", "value", "threshold", "passed"], &rows)?;
    }
    Ok(all_pass(&results))
}

pub fn coeff_report(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let spec = cfg.coefficient_spec()?;
    let dim = cfg.dimension()?;
    let grid = ShellGrid::new(cfg.radial_grid()?, AngularGrid::new(dim, cfg.grids.n_phi, cfg.grids.n_theta)?);
    let coeffs = build_coefficients_with(&spec, &grid, ctx.exec)?;
    let (nr, np, nt) = grid.shape();
    let points: Vec<_> = (0..nr * np * nt).map(|idx| grid.point(idx / (np * nt), (idx / nt) % np, idx % nt)).collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let dirs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [s, s, 0.0], [s, 0.0, s], [0.0, s, -s]];
    let (lo, hi) = ellipticity_bounds(&spec, &points, &dirs)?;

    let mut entries: Vec<(String, f64)> = vec![("ellipticity_lower".into(), lo), ("ellipticity_upper".into(), hi)];
    let trace = |h: &dyn Fn(f64) -> f64| {
        points.iter().fold(0.0f64, |m, &x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            m.max((radial_trace(&spec.a_tensor(x), x) - h(r)).abs())
        })
    };
    match &spec.family {
        Family::RadialAbcd(abcd) => {
            entries.push(("radial_trace_residual".into(), trace(&|r| abcd.trace(r))));
            entries.push(("margin_a_minus_bplus_dminus".into(), abcd.lower_bound(&grid.radial)));
            let radii = (cfg.problem.r1, cfg.problem.r2);
            entries.push(("conormal_inner".into(), conormal_factor(&spec, radii, Shell::Inner)?));
            entries.push(("conormal_outer".into(), conormal_factor(&spec, radii, Shell::Outer)?));
        }
        _ => entries.push(("radial_trace_residual".into(), trace(&|_| 0.0))),
    }
    entries.push(("asymmetry".into(), coeffs.asymmetry()));
    entries.push(("k1_spread".into(), coeffs.k1_spread()));
    for (k, v) in &entries {
        println!("{k:>28} {v:.6e}");
    }
    ensure_dir(&ctx.out)?;
    write_report(&ctx.out.join("coeff_report.csv"), &entries)
}
