//! The invariant suite behind `verify`. Each check returns a named residual
//! with its threshold; random cases come from a seeded ChaCha stream, so a
//! run is reproducible.

use std::f64::consts::PI;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coefficients::{
    build_coefficients, ellipticity_bounds, radial_trace, sample_point, CoefficientSpec, Family, FirstOrder,
    PolynomialSeries, Radial, RadialAbcd, SecondOrder, Spatial, Vector,
};
use crate::error::{Error, Result};
use crate::forward::{solve_forward, Scheme};
use crate::functionals::{j_quantities, phi1_apply, phi_apply, psi1_unchecked, psi_apply, Measurement, U0Data};
use crate::grid::{
    cumulative_right_uniform, AngularField, AngularGrid, Dimension, RadialGrid, ShellGrid, SpaceTimeField,
};
use crate::inverse_radial::{
    apply_l1, assemble, build_kernel, contraction_bound, contraction_profile, ibp_identity, identify, kappa1,
    select_sigma, weighted_norm, Method, RadialInverseInput, SolveOptions,
};
use crate::kernel_init::{compute_k0, initial_hq};
use crate::manufactured::{
    constant_state, general_problem, heat_decay, radial_named, GeneralConfig, R1, R2, RADIAL_PRESETS,
};
use crate::operators::{apply_a, apply_a1};
use crate::Exec;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value ≤ threshold`; NaN fails.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value >= threshold }
    }

    /// Passes when `lo ≤ value ≤ hi`; the threshold column reports `hi`.
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, threshold: hi, passed: (lo..=hi).contains(&value) }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self { name: name.into(), value: v, threshold: 1.0, passed: ok }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `c₀ + c₁ sin(ω r + p)` with random parameters.
#[derive(Debug, Clone, Copy)]
struct Wave {
    c0: f64,
    c1: f64,
    w: f64,
    p: f64,
}

impl Wave {
    fn random(rng: &mut impl Rng, c0: (f64, f64), c1: (f64, f64)) -> Self {
        Self {
            c0: rng.random_range(c0.0..=c0.1),
            c1: rng.random_range(c1.0..=c1.1),
            w: rng.random_range(0.5..=3.0),
            p: rng.random_range(0.0..=2.0 * PI),
        }
    }

    fn eval(&self, r: f64) -> f64 {
        self.c0 + self.c1 * (self.w * r + self.p).sin()
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Observed orders `log₂(e_{j}/e_{j+1})` for errors on successively halved grids.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

/// Integration-by-parts identity on random `(α, λ)`, relative to `|κ κ₁|`.
pub fn ibp_identity_check(rng: &mut impl Rng, cases: usize, n_nodes: usize) -> Result<Check> {
    let grid = RadialGrid::new(R1, R2, n_nodes)?;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let a = Wave::random(rng, (-2.0, 2.0), (0.0, 1.5));
        let l = Wave::random(rng, (1.0, 2.0), (0.0, 0.9));
        let alpha = grid.sample(|r| a.eval(r));
        let lambda = grid.sample(|r| l.eval(r));
        let (lhs, rhs) = ibp_identity(&alpha, &lambda, &grid)?;
        let kk1 = kappa1(&alpha, &lambda, &grid) / grid.integral(&lambda);
        worst = worst.max((lhs - rhs).abs() / kk1.abs());
    }
    Ok(Check::at_most("ibp_identity", worst, 1e-6))
}

/// `1 + L Φ[Bu₀] = exp(∫_r^{R₂} Φ[Bu₀]/Φ[Cu₀])` on random data, plus the
/// closed case `Φ[Bu₀] = Φ[Cu₀] ≡ 1`.
pub fn exp_identity_check(rng: &mut impl Rng, cases: usize, n_nodes: usize) -> Result<Vec<Check>> {
    let grid = RadialGrid::new(R1, R2, n_nodes)?;
    let residual = |pb: Vec<f64>, pc: Vec<f64>| -> Result<f64> {
        let u = U0Data::new(&grid, pb.clone(), pc, 0.1)?;
        let l = u.l_apply(&pb)?;
        Ok(l.iter().zip(u.eexp()).fold(0.0f64, |m, (l, e)| m.max((1.0 + l - e).abs())))
    };
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let b = Wave::random(rng, (-1.0, 1.0), (0.0, 1.0));
        let c = Wave::random(rng, (1.0, 2.0), (0.0, 0.8));
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        worst = worst.max(residual(grid.sample(|r| b.eval(r)), grid.sample(|r| sign * c.eval(r)))?);
    }
    let closed = {
        let u = U0Data::new(&grid, vec![1.0; n_nodes], vec![1.0; n_nodes], 0.1)?;
        let l = u.l_apply(&vec![1.0; n_nodes])?;
        grid.nodes().iter().zip(&l).fold(0.0f64, |m, (r, l)| m.max((1.0 + l - (R2 - r).exp()).abs()))
    };
    Ok(vec![Check::at_most("exp_identity", worst, 1e-6), Check::at_most("exp_identity_closed", closed, 1e-6)])
}

/// A random radial problem with a known kernel.
pub fn random_radial_problem(rng: &mut impl Rng, n: usize) -> Result<(RadialInverseInput, SpaceTimeField)> {
    let radial = RadialGrid::with_cells(R1, R2, n)?;
    let time = crate::grid::TimeGrid::new(1.0, n)?;
    let (c, d, e) = (rng.random_range(0.5..=2.0), rng.random_range(0.0..=1.0), rng.random_range(-0.5..=0.5));
    let k = SpaceTimeField::from_fn(&radial, &time, |t, r| (-c * t).exp() * (1.0 + d * r) + e * (r * t).sin());
    let (a, b) = (rng.random_range(-0.5..=0.5), rng.random_range(0.0..=1.0));
    let u = SpaceTimeField::from_fn(&radial, &time, |t, r| r * r * (1.0 + a * t) + b * t * r + 0.1 * t * t * r.sin());
    let l = Wave::random(rng, (1.0, 2.0), (0.0, 0.5));
    let lambda = radial.sample(|r| l.eval(r));
    let dimension = if rng.random_bool(0.5) { Dimension::Three } else { Dimension::Two };
    let (f_tilde, g) = crate::forward::manufacture(&k, &u, dimension, &lambda)?;
    Ok((RadialInverseInput { dimension, u, f_tilde, g, lambda, m: 0.5 }, k))
}

/// Measured `‖L₁ q‖_σ / ‖q‖_σ` against the bound, the bound against 1/2, and
/// the Picard iteration count.
pub fn contraction_check(rng: &mut impl Rng, cases: usize, n: usize) -> Result<Vec<Check>> {
    let mut excess = f64::NEG_INFINITY;
    let mut worst_bound: f64 = 0.0;
    let mut worst_iter = 0usize;
    for _ in 0..cases {
        let (input, _) = random_radial_problem(rng, n)?;
        let asm = assemble(&input)?;
        let kernel = build_kernel(&asm, Exec::default())?;
        let profile = contraction_profile(&asm, &kernel.g1);
        let (sigma, bound) = select_sigma(&profile, &asm.time)?;
        debug_assert_eq!(bound, contraction_bound(&profile, &asm.time, sigma));
        worst_bound = worst_bound.max(bound);
        for _ in 0..3 {
            let mut q = kernel.w.clone();
            q.values.mapv_inplace(|_| rng.random_range(-1.0..=1.0));
            let lq = apply_l1(&asm, &kernel.g1, &q, Exec::default());
            let measured = weighted_norm(&lq, sigma) / weighted_norm(&q, sigma);
            excess = excess.max(measured - bound);
        }
        let out = identify(&input, &SolveOptions { method: Method::Picard, ..Default::default() })?;
        worst_iter = worst_iter.max(out.diagnostics.iterations);
    }
    Ok(vec![
        Check::at_most("contraction_measured_minus_bound", excess, 1e-10),
        Check::at_most("contraction_bound", worst_bound, 0.5),
        Check::at_most("picard_iterations", worst_iter as f64, 40.0),
    ])
}

/// Largest relative difference between time marching and Picard over the presets.
pub fn cross_method_check(n: usize) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for name in RADIAL_PRESETS {
        let (input, _) = radial_named(name, n)?;
        let a = identify(&input, &SolveOptions::default())?;
        let b = identify(&input, &SolveOptions { method: Method::Picard, ..Default::default() })?;
        let d = a.k.max_diff(&b.k);
        if d > 0.0 {
            worst = worst.max(d / a.k.sup_norm());
        }
    }
    Ok(Check::at_most("cross_method", worst, 1e-8))
}

/// Relative error of the recovered kernel for a preset at each `n`.
pub fn round_trip_errors(preset: &str, ns: &[usize], exec: Exec) -> Result<Vec<f64>> {
    ns.iter()
        .map(|&n| {
            let (input, k) = radial_named(preset, n)?;
            let out = identify(&input, &SolveOptions { exec, ..Default::default() })?;
            Ok(out.k.max_diff(&k) / k.sup_norm())
        })
        .collect()
}

/// Error at 64 and Richardson ratios across `{16, 32, 64}` on the 3D preset.
pub fn round_trip_check() -> Result<Vec<Check>> {
    let e = round_trip_errors("radial3d", &[16, 32, 64], Exec::Sequential)?;
    Ok(vec![
        Check::at_most("round_trip_error_64", e[2], 0.02),
        Check::within("round_trip_ratio_16_32", e[0] / e[1], 3.0, 5.0),
        Check::within("round_trip_ratio_32_64", e[1] / e[2], 3.0, 5.0),
    ])
}

/// A random `RadialAbcd` tensor with `a - b⁺ - d⁻ ≥ 0.2` on the shell.
pub fn random_abcd(rng: &mut impl Rng) -> RadialAbcd {
    let a0 = rng.random_range(1.5..=2.5);
    let a1 = rng.random_range(-0.2..=0.2);
    let b0 = rng.random_range(-0.3..=0.3);
    let d0 = rng.random_range(-0.3..=0.3);
    let c0 = rng.random_range(0.0..=0.3);
    let cw = rng.random_range(0.0..=0.5);
    RadialAbcd {
        a: Radial::analytic(move |r| a0 + a1 * r),
        b: Radial::analytic(move |r| b0 * r),
        c: Spatial::analytic(move |x| c0 * (1.0 + cw * x[0] * x[0])),
        d: Radial::Constant(d0),
    }
}

/// Trace property, series null direction and the quadratic-form bound on
/// `samples` random points. With `spec`, the trace and bound are checked on
/// that tensor; otherwise on a random one.
pub fn coefficient_checks(rng: &mut impl Rng, spec: Option<&CoefficientSpec>, samples: usize) -> Result<Vec<Check>> {
    let owned;
    let spec = match spec {
        Some(s) => s,
        None => {
            owned = CoefficientSpec::new(Dimension::Three, Family::RadialAbcd(random_abcd(rng)));
            &owned
        }
    };
    let dim = spec.dimension;
    let points: Vec<Vector> = (0..samples).map(|_| sample_point(rng, dim, R1, R2)).collect();
    let mut out = Vec::new();
    if let Some(abcd) = spec.family.abcd() {
        let mut trace: f64 = 0.0;
        let mut bound: f64 = f64::NEG_INFINITY;
        for &x in &points {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let a = spec.a_tensor(x);
            let series = match &spec.family {
                Family::Sum(_, s) => radial_trace(&s.tensor(x), x),
                _ => 0.0,
            };
            let h = abcd.trace(r);
            trace = trace.max((radial_trace(&a, x) - series - h).abs() / h.abs().max(1.0));
            let xi = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
            let (lo, _) = ellipticity_bounds(spec, &[x], &[xi]).unwrap_or((f64::NEG_INFINITY, f64::NEG_INFINITY));
            bound = bound.max(abcd.ellipticity_margin(r) - lo);
        }
        out.push(Check::at_most("radial_trace", trace, 1e-12));
        out.push(Check::at_most("quadratic_form_bound", bound, 1e-12));
    }
    // Every series monomial annihilates the radial direction.
    let mut null: f64 = 0.0;
    for _ in 0..samples {
        let x = sample_point(rng, Dimension::Three, R1, R2);
        for n in 1..=3 {
            let a = PolynomialSeries::monomial(n, x);
            let mut s = 0.0;
            let mut scale = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    s += x[j] * x[k] * a[j][k];
                    scale += (x[j] * x[k] * a[j][k]).abs();
                }
            }
            null = null.max(s.abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    out.push(Check::at_most("series_null_direction", null, 1e-12));
    Ok(out)
}

/// `sup |Φ[Ãw] - Ã₁ Φ[w] - Φ₁[w]|` and `|Ψ[Ãw] - Ψ₁[w]|` on a 3D grid with
/// `n` radial cells and `2n × n` angular nodes. `ψ` must vanish on both shells.
pub fn decomposition_residuals(
    spec: &CoefficientSpec,
    n: usize,
    w: &dyn Fn(Vector) -> f64,
    lambda: &dyn Fn(f64, f64) -> f64,
    psi: &dyn Fn(f64, f64, f64) -> f64,
) -> Result<(f64, f64)> {
    let grid = ShellGrid::new(RadialGrid::with_cells(R1, R2, n)?, AngularGrid::new(spec.dimension, 2 * n, n)?);
    let coeffs = build_coefficients(spec, &grid)?;
    let meas = Measurement::from_fns(&grid, lambda, psi);
    let wf = AngularField::from_cartesian(&grid, w);
    let aw = apply_a(&coeffs, &wf);
    let lhs = phi_apply(&meas.lambda, &aw, &grid)?;
    let a1 = apply_a1(&coeffs.k1, &phi_apply(&meas.lambda, &wf, &grid)?, &grid.radial);
    let p1 = phi1_apply(&meas.lambda, &coeffs, &wf)?;
    let phi = (0..lhs.len()).fold(0.0f64, |m, i| m.max((lhs[i] - a1[i] - p1[i]).abs()));
    let psi_res = (psi_apply(&meas.psi, &aw, &grid)? - psi1_unchecked(&meas.psi, &coeffs, &wf)?).abs();
    Ok((phi, psi_res))
}

/// Observed orders of both decomposition residuals on random smooth cases.
pub fn decomposition_check(rng: &mut impl Rng, cases: usize, ns: &[usize]) -> Result<Vec<Check>> {
    let mut worst_phi = f64::INFINITY;
    let mut worst_psi = f64::INFINITY;
    for _ in 0..cases {
        let spec = CoefficientSpec::new(Dimension::Three, Family::RadialAbcd(random_abcd(rng)));
        let p: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        let w =
            move |x: Vector| (p[0] * x[0] + p[1] * x[1] + p[2] * x[2]).sin() + p[3] * x[0] * x[1] + p[4] * x[2] * x[2];
        let (l1, l2) = (rng.random_range(-0.3..=0.3), rng.random_range(-0.3..=0.3));
        let lam = move |ph: f64, th: f64| 1.0 + l1 * th.cos() + l2 * ph.sin() * th.sin();
        let s = p[5];
        let psi = move |r: f64, ph: f64, th: f64| {
            (r - R1) * (R2 - r) * (1.0 + 0.5 * s * th.cos() + 0.3 * ph.cos() * th.sin())
        };
        let mut ep = Vec::new();
        let mut es = Vec::new();
        for &n in ns {
            let (a, b) = decomposition_residuals(&spec, n, &w, &lam, &psi)?;
            ep.push(a);
            es.push(b);
        }
        worst_phi = worst_phi.min(*observed_orders(&ep).last().expect("two levels"));
        worst_psi = worst_psi.min(*observed_orders(&es).last().expect("two levels"));
    }
    Ok(vec![
        Check::at_least("phi_decomposition_order", worst_phi, 1.5),
        Check::at_least("psi_decomposition_order", worst_psi, 1.5),
    ])
}

/// `k₀` and the `(h̃₀, q̃₀)` round trip against the manufactured kernel.
pub fn k0_check(dimension: Dimension, ns: &[usize]) -> Result<Vec<Check>> {
    let mut ek = Vec::new();
    let mut er = Vec::new();
    for &n in ns {
        let p = general_problem(&GeneralConfig::new(dimension, n))?;
        let init = compute_k0(&p.data)?;
        let kt = p.k_true.row_vec(0);
        ek.push(init.k0.iter().zip(&kt).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
        let radial = &p.data.grid().radial;
        let (h, q) = initial_hq(&init.k0, radial)?;
        let e = cumulative_right_uniform(&q, radial.spacing());
        er.push(kt.iter().zip(&e).fold(0.0f64, |m, (k, e)| m.max((k - (h - e)).abs())));
    }
    let tag = if dimension == Dimension::Two { "2d" } else { "3d" };
    let mut out = Vec::new();
    for (j, r) in ek.windows(2).map(|e| e[0] / e[1]).enumerate() {
        out.push(Check::within(format!("k0_ratio_{tag}_{j}"), r, 3.0, 5.0));
    }
    for (j, r) in er.windows(2).map(|e| e[0] / e[1]).enumerate() {
        out.push(Check::within(format!("hq_round_trip_ratio_{tag}_{j}"), r, 3.0, 5.0));
    }
    Ok(out)
}

pub fn forward_checks() -> Result<Vec<Check>> {
    let (p, exact) = heat_decay(64, Scheme::CrankNicolson)?;
    let u = solve_forward(&p)?;
    let heat = u.max_diff(&exact) / exact.sup_norm();
    let c = 3.0;
    let mut steady: f64 = 0.0;
    for dim in [Dimension::Two, Dimension::Three] {
        let u = solve_forward(&constant_state(dim, 32, c)?)?;
        steady = steady.max(u.values.iter().fold(0.0f64, |m, v| m.max((v - c).abs())));
    }
    Ok(vec![Check::at_most("heat_decay_error", heat, 0.01), Check::at_most("steady_state", steady, 1e-12)])
}

/// `Φ[J(u₀)] ≡ 0` on random data, and the solvability error for `ψ = μ(r) λ(x')`.
pub fn annihilation_check(rng: &mut impl Rng, cases: usize, n: usize) -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    let mut composite_ok = true;
    for case in 0..cases {
        let dim = if case % 2 == 0 { Dimension::Three } else { Dimension::Two };
        let grid = ShellGrid::new(RadialGrid::with_cells(R1, R2, n)?, AngularGrid::new(dim, 2 * n, n)?);
        let bs = rng.random_range(0.1..=0.5);
        let cs = rng.random_range(0.0..=0.5);
        let spec = CoefficientSpec::new(dim, Family::RadialAbcd(random_abcd(rng)))
            .with_b(SecondOrder::Scalar(Spatial::analytic(move |x| 1.0 + bs * x[0])))
            .with_c(FirstOrder::Radial(Spatial::analytic(move |x| 1.0 + cs * x[1] * x[1])));
        let coeffs = build_coefficients(&spec, &grid)?;
        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.3..=0.3));
        let u0 = AngularField::from_cartesian(&grid, |x| {
            x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + p[0] * x[0] + p[1] * x[1] * x[2] + p[2] * x[2] * x[2]
        });
        let (l1, l2) = (rng.random_range(-0.3..=0.3), rng.random_range(-0.3..=0.3));
        let lam = move |ph: f64, th: f64| 1.0 + l1 * th.cos() + l2 * ph.cos() * th.sin();
        let meas = Measurement::from_fns(&grid, lam, |r, ph, th| {
            (r - R1) * (R2 - r) * (1.0 + th.cos().powi(2) + 0.4 * ph.sin() * th.sin())
        });
        let (_, jq) = j_quantities(&coeffs, &u0, &meas, 1e-3)?;
        let pj = phi_apply(&meas.lambda, &jq.j, &grid)?;
        let abs_j = jq.j.map(f64::abs);
        let scale = sup(&phi_apply(&meas.lambda.mapv(f64::abs), &abs_j, &grid)?);
        worst = worst.max(sup(&pj) / scale);

        let psi = AngularField {
            values: Array3::from_shape_fn(grid.shape(), |(i, m, l)| {
                let r = grid.radial.nodes()[i];
                (r - R1) * (R2 - r) * meas.lambda[[m, l]]
            }),
        };
        let composite = Measurement::new(&grid, meas.lambda.clone(), psi)?;
        composite_ok &= matches!(j_quantities(&coeffs, &u0, &composite, 1e-3), Err(Error::Solvability { .. }));
    }
    Ok(vec![Check::at_most("annihilation", worst, 1e-8), Check::flag("composite_psi_rejected", composite_ok)])
}

/// Errors and observed orders of the radial round trip over `ns`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub error: f64,
    /// `None` on the first row.
    pub order: Option<f64>,
}

pub fn convergence_sweep(preset: &str, ns: &[usize], exec: Exec) -> Result<Vec<SweepRow>> {
    let errors = round_trip_errors(preset, ns, exec)?;
    Ok(ns
        .iter()
        .zip(&errors)
        .enumerate()
        .map(|(j, (&n, &error))| SweepRow {
            n,
            error,
            order: (j > 0).then(|| (errors[j - 1] / error).ln() / (n as f64 / ns[j - 1] as f64).ln()),
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Tensor for the coefficient checks; a random one when `None`.
    pub spec: Option<CoefficientSpec>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 7, spec: None }
    }
}

/// Every invariant, in a fixed order.
pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<Check>> {
    let mut r = rng(opts.seed);
    let mut out = Vec::new();
    out.extend(round_trip_check()?);
    out.push(ibp_identity_check(&mut r, 20, 201)?);
    out.extend(exp_identity_check(&mut r, 20, 201)?);
    out.extend(contraction_check(&mut r, 10, 32)?);
    out.push(cross_method_check(32)?);
    out.extend(coefficient_checks(&mut r, opts.spec.as_ref(), 10_000)?);
    out.extend(decomposition_check(&mut r, 5, &[16, 32, 64])?);
    out.extend(k0_check(Dimension::Two, &[8, 16, 32])?);
    out.extend(k0_check(Dimension::Three, &[8, 16, 32])?);
    out.extend(forward_checks()?);
    out.extend(annihilation_check(&mut r, 10, 12)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_constructors() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert!(Check::at_least("a", 2.0, 1.5).passed);
        assert!(!Check::within("a", 5.1, 3.0, 5.0).passed);
        assert!(!Check::flag("a", false).passed);
    }

    #[test]
    fn orders_of_pure_power_law() {
        let e = [1.0, 0.25, 0.0625];
        assert_eq!(observed_orders(&e), vec![2.0, 2.0]);
    }

    #[test]
    fn asymmetry_breaks_the_trace_check() {
        let mut r = rng(1);
        let spec = CoefficientSpec::laplacian(Dimension::Three);
        assert!(all_pass(&coefficient_checks(&mut r, Some(&spec), 200).unwrap()));
        let mut bad = spec.clone();
        bad.asymmetry = 1e-3;
        let c = coefficient_checks(&mut r, Some(&bad), 200).unwrap();
        assert!(!c.iter().find(|c| c.name == "radial_trace").unwrap().passed);
    }

    #[test]
    fn identities_hold_on_small_samples() {
        let mut r = rng(2);
        assert!(ibp_identity_check(&mut r, 3, 201).unwrap().passed);
        assert!(all_pass(&exp_identity_check(&mut r, 3, 201).unwrap()));
    }

    #[test]
    fn sweep_reports_orders() {
        let rows = convergence_sweep("radial3d", &[8, 16], Exec::default()).unwrap();
        assert!(rows[0].order.is_none());
        let o = rows[1].order.unwrap();
        assert!((1.5..=2.5).contains(&o), "{o}");
    }
}
