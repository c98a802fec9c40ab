//! Analytic test problems with known kernels.
//!
//! [`general_problem`] builds data for the general (angular) problem from
//!
//! ```text
//! u(t, x)  = U₀(x) + t U₁(x) + t²/2 U₂(x)
//! k(t, r)  = κ(r) e^{-t},  κ(r) = 1 + r²/2
//! u₁(t, x) = u(t, x) + b(r) (t + t²/2)(1 + 0.4 x₁),  b(r) = (r - R₁)²(R₂ - r)²
//! ```
//!
//! so `v = D_t u - D_t u₁` is non-zero inside and vanishes with its radial
//! derivative on both shells. The memory integrals have closed forms, and
//! `A`, `B`, `C` of the polynomials `U_j` are taken by Cartesian finite
//! differences of closures, independent of the grid operators.
//!
//! [`radial_preset`] is the radial problem `k = e^{-t}(1 + r)`, `u = r² + t r`;
//! [`radial_named`] adds the other radial presets.

use ndarray::Array3;

use crate::coefficients::{
    build_coefficients_with, CoefficientSpec, Family, FirstOrder, Radial, RadialAbcd, SecondOrder, Spatial, Vector,
};
use crate::error::Result;
use crate::exec::Exec;
use crate::forward::{manufacture, BoundaryData, ForwardProblem, Scheme};
use crate::functionals::{phi_apply, psi_apply, BoundaryPair, Measurement};
use crate::grid::{AngularField, AngularGrid, Dimension, RadialGrid, ShellGrid, SpaceTimeField, TimeGrid};
use crate::inverse_radial::RadialInverseInput;
use crate::kernel_init::{ProblemData, TimeSeries};
use crate::operators::{divergence_form_at, first_order_at};

pub const R1: f64 = 1.0;
pub const R2: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct GeneralConfig {
    pub dimension: Dimension,
    pub n_r_cells: usize,
    pub n_phi: usize,
    pub n_theta: usize,
    pub n_t: usize,
    pub t_max: f64,
    pub bcs: BoundaryPair,
    pub spec: CoefficientSpec,
    pub m: f64,
    pub exec: Exec,
}

impl GeneralConfig {
    /// Angular resolution tied to the radial one: `n_φ = 2n`, `n_θ = n`.
    pub fn new(dimension: Dimension, n: usize) -> Self {
        Self {
            dimension,
            n_r_cells: n,
            n_phi: 2 * n,
            n_theta: n,
            n_t: 8,
            t_max: 0.2,
            bcs: BoundaryPair::DD,
            spec: default_spec(dimension),
            m: 0.1,
            exec: Exec::default(),
        }
    }
}

/// Anisotropic `RadialAbcd` tensor with `B = (1 + r/10) I`, `C = D_r`.
pub fn default_spec(dimension: Dimension) -> CoefficientSpec {
    CoefficientSpec::new(
        dimension,
        Family::RadialAbcd(RadialAbcd {
            a: Radial::analytic(|r| 1.0 + 0.2 * r),
            b: Radial::analytic(|r| 0.1 * r),
            c: Spatial::analytic(|x| 0.05 * (1.0 + x[0] * x[0])),
            d: Radial::Constant(0.3),
        }),
    )
    .with_b(SecondOrder::Scalar(Spatial::analytic(|x| 1.0 + 0.1 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())))
    .with_c(FirstOrder::Radial(Spatial::Constant(1.0)))
}

fn r2(x: Vector) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
}

fn u_parts() -> [fn(Vector) -> f64; 3] {
    [
        |x| r2(x) + 0.3 * x[0] * x[0] + 0.3 * x[2] * x[2],
        |x| x[1] + 0.5 * x[0] * x[2] + 0.2 * r2(x),
        |x| 0.4 * x[0] - 0.1 * r2(x),
    ]
}

pub fn kappa(r: f64) -> f64 {
    1.0 + 0.5 * r * r
}

pub fn kappa_prime(r: f64) -> f64 {
    r
}

fn bump(r: f64) -> f64 {
    (r - R1).powi(2) * (R2 - r).powi(2)
}

fn tilt(x: Vector) -> f64 {
    1.0 + 0.4 * x[0]
}

pub fn lambda_fn(_phi: f64, theta: f64) -> f64 {
    1.0 + 0.2 * theta.cos()
}

pub fn psi_fn(r: f64, phi: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    (r - R1) * (R2 - r) * (1.0 + c * c + s * s * phi.cos().powi(2))
}

/// Closed-form memory integrals `∫₀ᵗ e^{-(t-s)} s^j/j! ds` and their derivatives.
fn e_terms(t: f64) -> ([f64; 3], [f64; 3]) {
    let e = (-t).exp();
    ([1.0 - e, t - 1.0 + e, 0.5 * t * t - t + 1.0 - e], [e, 1.0 - e, t - 1.0 + e])
}

#[derive(Debug, Clone)]
pub struct GeneralProblem {
    pub data: ProblemData,
    pub k_true: SpaceTimeField,
    pub v_true: TimeSeries,
    pub h_true: Vec<f64>,
    pub q_true: SpaceTimeField,
}

fn field(grid: &ShellGrid, exec: Exec, f: impl Fn(usize, Vector) -> f64 + Sync + Send) -> AngularField {
    let (nr, np, nt) = grid.shape();
    let flat = exec.map(nr * np * nt, |idx| {
        let (i, rest) = (idx / (np * nt), idx % (np * nt));
        f(i, grid.point(i, rest / nt, rest % nt))
    });
    AngularField { values: Array3::from_shape_vec((nr, np, nt), flat).expect("shape") }
}

pub fn general_problem(cfg: &GeneralConfig) -> Result<GeneralProblem> {
    let radial = RadialGrid::with_cells(R1, R2, cfg.n_r_cells)?;
    let angular = AngularGrid::new(cfg.dimension, cfg.n_phi, cfg.n_theta)?;
    let grid = ShellGrid::new(radial.clone(), angular);
    let time = TimeGrid::new(cfg.t_max, cfg.n_t)?;
    let spec = &cfg.spec;
    let coeffs = build_coefficients_with(spec, &grid, cfg.exec)?;
    let meas = Measurement::from_fns(&grid, lambda_fn, psi_fn);
    let dim = cfg.dimension;
    let exec = cfg.exec;

    let parts = u_parts();
    let at = |i: usize| {
        let w = parts[i];
        let tf = |x: Vector| spec.a_tensor(x);
        let bf = |x: Vector| spec.b_tensor(x);
        let wf = move |x: Vector| w(x);
        (
            field(&grid, exec, |_, x| w(x)),
            field(&grid, exec, |_, x| divergence_form_at(dim, &tf, &wf, x)),
            field(&grid, exec, |_, x| divergence_form_at(dim, &bf, &wf, x)),
            field(&grid, exec, |_, x| first_order_at(dim, spec.c_vector(x), &wf, x)),
        )
    };
    let (u0, au0, bu0, cu0) = at(0);
    let (u1f, au1, bu1, cu1) = at(1);
    let (u2f, au2, bu2, cu2) = at(2);
    let r = radial.nodes().to_vec();
    let shape_b = field(&grid, exec, |i, x| bump(r[i]) * tilt(x));

    let lin = |fs: &[(&AngularField, f64)]| {
        let mut out = AngularField::zeros(&grid);
        for (f, c) in fs {
            out.values.scaled_add(*c, &f.values);
        }
        out
    };
    let kap: Vec<f64> = r.iter().map(|&r| kappa(r)).collect();
    let kapp: Vec<f64> = r.iter().map(|&r| kappa_prime(r)).collect();

    let mut u1s = Vec::new();
    let mut du1s = Vec::new();
    let mut d2u1s = Vec::new();
    let mut dfs = Vec::new();
    let mut v_true = Vec::new();
    let mut g2 = Vec::new();
    let mut g1 = SpaceTimeField::zeros(&radial, &time);
    for (k, &t) in time.nodes().iter().enumerate() {
        let u = lin(&[(&u0, 1.0), (&u1f, t), (&u2f, 0.5 * t * t)]);
        let row = phi_apply(&meas.lambda, &u, &grid)?;
        g1.values.row_mut(k).assign(&ndarray::ArrayView1::from(&row));
        g2.push(psi_apply(&meas.psi, &u, &grid)?);
        u1s.push(lin(&[(&u, 1.0), (&shape_b, t + 0.5 * t * t)]));
        du1s.push(lin(&[(&u1f, 1.0), (&u2f, t), (&shape_b, 1.0 + t)]));
        d2u1s.push(lin(&[(&u2f, 1.0), (&shape_b, 1.0)]));
        v_true.push(shape_b.map(|b| -(1.0 + t) * b));

        let (_, de) = e_terms(t);
        let mem_b = lin(&[(&bu0, de[0]), (&bu1, de[1]), (&bu2, de[2])]).scale_radial(&kap);
        let mem_c = lin(&[(&cu0, de[0]), (&cu1, de[1]), (&cu2, de[2])]).scale_radial(&kapp);
        let df = lin(&[(&u2f, 1.0), (&au1, -1.0), (&au2, -t), (&mem_b, -1.0), (&mem_c, -1.0)]);
        dfs.push(df);
    }
    let f0 = lin(&[(&u1f, 1.0), (&au0, -1.0)]);

    let k_true = SpaceTimeField::from_fn(&radial, &time, |t, r| kappa(r) * (-t).exp());
    let q_true = SpaceTimeField::from_fn(&radial, &time, |t, r| kappa_prime(r) * (-t).exp());
    let h_true = time.sample(|t| kappa(R2) * (-t).exp());
    let data = ProblemData {
        spec: spec.clone(),
        coeffs,
        time,
        bcs: cfg.bcs,
        meas,
        m: cfg.m,
        u0,
        u1: u1s,
        du1: du1s,
        d2u1: d2u1s,
        f0,
        df: dfs,
        g1,
        g2,
    };
    Ok(GeneralProblem { data, k_true, v_true, h_true, q_true })
}

/// Radial manufactured problem on `[1, 2] × [0, T]`: `k = e^{-t}(1 + r)`,
/// `u = r² + t r`, `λ ≡ 1`.
pub fn radial_preset(
    dimension: Dimension,
    n_r_cells: usize,
    n_t: usize,
    t_max: f64,
) -> Result<(RadialInverseInput, SpaceTimeField)> {
    let radial = RadialGrid::with_cells(R1, R2, n_r_cells)?;
    let time = TimeGrid::new(t_max, n_t)?;
    let k_true = SpaceTimeField::from_fn(&radial, &time, |t, r| (-t).exp() * (1.0 + r));
    let u = SpaceTimeField::from_fn(&radial, &time, |t, r| r * r + t * r);
    let lambda = vec![1.0; radial.n_nodes()];
    let (f_tilde, g) = manufacture(&k_true, &u, dimension, &lambda)?;
    Ok((RadialInverseInput { dimension, u, f_tilde, g, lambda, m: 0.5 }, k_true))
}

/// Closed form of `f̃` for [`radial_preset`]:
/// `c₀(1 - e^{-t}) + c₁(t - 1 + e^{-t})`, `c₀ = 2r + 2n(1 + r)`, `c₁ = 1 + (n-1)(1 + r)/r`.
pub fn radial_preset_f_tilde(n: usize, t: f64, r: f64) -> f64 {
    let n = n as f64;
    let c0 = 2.0 * r + (1.0 + r) * 2.0 * n;
    let c1 = 1.0 + (1.0 + r) * (n - 1.0) / r;
    let e = (-t).exp();
    c0 * (1.0 - e) + c1 * (t - 1.0 + e)
}

/// Named radial identification problems shipped as presets.
pub const RADIAL_PRESETS: [&str; 4] = ["radial3d", "radial2d", "zero_kernel", "weighted"];

/// A preset by name at `n` radial cells and `n` time steps, with its true kernel.
pub fn radial_named(name: &str, n: usize) -> Result<(RadialInverseInput, SpaceTimeField)> {
    match name {
        "radial3d" => radial_preset(Dimension::Three, n, n, 1.0),
        "radial2d" => radial_preset(Dimension::Two, n, n, 1.0),
        "zero_kernel" => {
            let (mut input, mut k) = radial_preset(Dimension::Three, n, n, 1.0)?;
            k.values.fill(0.0);
            let (f, g) = manufacture(&k, &input.u, input.dimension, &input.lambda)?;
            input.f_tilde = f;
            input.g = g;
            Ok((input, k))
        }
        "weighted" => {
            // Non-constant λ and a kernel that is not separable in (t, r).
            let radial = RadialGrid::with_cells(R1, R2, n)?;
            let time = TimeGrid::new(0.5, n)?;
            let k = SpaceTimeField::from_fn(&radial, &time, |t, r| (-2.0 * t * r).exp() + 0.5 * r.cos());
            let u = SpaceTimeField::from_fn(&radial, &time, |t, r| r * r * (1.0 + 0.2 * t) + (t * r).sin());
            let lambda = radial.sample(|r| 1.0 + r);
            let dim = Dimension::Three;
            let (f_tilde, g) = manufacture(&k, &u, dim, &lambda)?;
            Ok((RadialInverseInput { dimension: dim, u, f_tilde, g, lambda, m: 0.5 }, k))
        }
        other => Err(crate::Error::Config(format!("unknown radial preset '{other}'"))),
    }
}

/// Pure heat decay in 3D: `u = e^{-π²t} sin(π(r - R₁))/r` with `k ≡ 0` and
/// homogeneous Dirichlet data, on `[0, 0.1]` with `n` cells and `n` steps.
pub fn heat_decay(n: usize, scheme: Scheme) -> Result<(ForwardProblem, SpaceTimeField)> {
    use std::f64::consts::PI;
    let grid = RadialGrid::with_cells(R1, R2, n)?;
    let time = TimeGrid::new(0.1, n)?;
    let exact = SpaceTimeField::from_fn(&grid, &time, |t, r| (-PI * PI * t).exp() * (PI * (r - R1)).sin() / r);
    let p = ForwardProblem {
        dimension: Dimension::Three,
        kernel: SpaceTimeField::zeros(&grid, &time),
        u0: exact.row_vec(0),
        source: SpaceTimeField::zeros(&grid, &time),
        inner: BoundaryData::Dirichlet(vec![0.0; n + 1]),
        outer: BoundaryData::Dirichlet(vec![0.0; n + 1]),
        scheme,
    };
    Ok((p, exact))
}

/// `u ≡ c` with `k ≡ 0`, no source and zero flux on both shells.
pub fn constant_state(dimension: Dimension, n: usize, c: f64) -> Result<ForwardProblem> {
    let grid = RadialGrid::with_cells(R1, R2, n)?;
    let time = TimeGrid::new(1.0, n)?;
    Ok(ForwardProblem {
        dimension,
        kernel: SpaceTimeField::zeros(&grid, &time),
        u0: vec![c; n + 1],
        source: SpaceTimeField::zeros(&grid, &time),
        inner: BoundaryData::Neumann(vec![0.0; n + 1]),
        outer: BoundaryData::Neumann(vec![0.0; n + 1]),
        scheme: Scheme::ImplicitEuler,
    })
}
