//! Forward solver and data manufacture for the radial problem
//!
//! ```text
//! D_t u = Δₙ u + ∫₀ᵗ k(t-s, r) Δₙ u(s) ds + ∫₀ᵗ D_r k(t-s, r) D_r u(s) ds + f,
//! Δₙ = D_r² + (n-1) r⁻¹ D_r,
//! ```
//!
//! with Dirichlet or Neumann data on each shell.
//!
//! Diffusion is implicit (Euler or Crank–Nicolson). The memory integrals use
//! trapezoid product integration; every past node is explicit, and the
//! current node enters through `k(0, ·)`, which is time independent, so the
//! step matrix is factored once.

use nalgebra::{DMatrix, DVector};

use crate::coefficients::{conormal_factor, CoefficientSpec, Shell};
use crate::error::{check_len, Error, Result};
use crate::grid::{derivative_uniform, second_derivative_uniform, Dimension, RadialGrid, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    ImplicitEuler,
    #[default]
    CrankNicolson,
}

/// Boundary data on one shell, one value per time node.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    Dirichlet(Vec<f64>),
    /// Outward conormal derivative `∂u/∂ν`.
    Neumann(Vec<f64>),
}

impl BoundaryData {
    fn values(&self) -> &[f64] {
        match self {
            BoundaryData::Dirichlet(v) | BoundaryData::Neumann(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardProblem {
    pub dimension: Dimension,
    pub kernel: SpaceTimeField,
    pub u0: Vec<f64>,
    pub source: SpaceTimeField,
    pub inner: BoundaryData,
    pub outer: BoundaryData,
    pub scheme: Scheme,
}

/// `Δₙ` as a dense matrix, central in the interior. Boundary rows are left zero.
fn operator_matrices(grid: &RadialGrid, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let nr = grid.n_nodes();
    let h = grid.spacing();
    let r = grid.nodes();
    let mut d1 = DMatrix::zeros(nr, nr);
    let mut lap = DMatrix::zeros(nr, nr);
    for i in 1..nr - 1 {
        d1[(i, i - 1)] = -0.5 / h;
        d1[(i, i + 1)] = 0.5 / h;
        let drift = (n as f64 - 1.0) / r[i];
        lap[(i, i - 1)] = 1.0 / (h * h) - drift * 0.5 / h;
        lap[(i, i)] = -2.0 / (h * h);
        lap[(i, i + 1)] = 1.0 / (h * h) + drift * 0.5 / h;
    }
    (d1, lap)
}

/// Radial conormal sign `∂u/∂ν = s D_r u` for `Δ`: `-1` inner, `+1` outer.
fn conormal_sign(dim: Dimension, r1: f64, r2: f64, shell: Shell) -> f64 {
    conormal_factor(&CoefficientSpec::laplacian(dim), (r1, r2), shell).expect("laplacian is radial_abcd").signum()
}

pub fn solve_forward(p: &ForwardProblem) -> Result<SpaceTimeField> {
    let grid = &p.kernel.radial;
    let time = &p.kernel.time;
    let nr = grid.n_nodes();
    let nt = time.n_nodes();
    check_len(nr, p.u0.len())?;
    check_len(nt * nr, p.source.values.len())?;
    check_len(nt, p.inner.values().len())?;
    check_len(nt, p.outer.values().len())?;
    if nr < 4 {
        return Err(Error::Config("forward solve needs at least 4 radial nodes".into()));
    }
    let n = p.dimension.n();
    let (h, dt) = (grid.spacing(), time.step());
    let (d1, lap) = operator_matrices(grid, n);
    let k = &p.kernel;
    let kr = k.d_r();
    let theta = match p.scheme {
        Scheme::ImplicitEuler => 1.0,
        Scheme::CrankNicolson => 0.5,
    };

    // Memory at the current node: (dt/2)(k(0) Δ + D_r k(0) D_r).
    let k0 = DMatrix::from_diagonal(&DVector::from_row_slice(&k.row_vec(0)));
    let kr0 = DMatrix::from_diagonal(&DVector::from_row_slice(&kr.row_vec(0)));
    let mem_now = (&k0 * &lap + &kr0 * &d1) * (0.5 * dt);
    let mut m = DMatrix::identity(nr, nr) - (&lap + &mem_now) * (theta * dt);
    let (r1, r2) = (grid.r_min(), grid.r_max());
    for (row, data, shell) in [(0, &p.inner, Shell::Inner), (nr - 1, &p.outer, Shell::Outer)] {
        m.row_mut(row).fill(0.0);
        match data {
            BoundaryData::Dirichlet(_) => m[(row, row)] = 1.0,
            BoundaryData::Neumann(_) => {
                let s = conormal_sign(p.dimension, r1, r2, shell) / (2.0 * h);
                if row == 0 {
                    m[(0, 0)] = -3.0 * s;
                    m[(0, 1)] = 4.0 * s;
                    m[(0, 2)] = -s;
                } else {
                    m[(row, row)] = 3.0 * s;
                    m[(row, row - 1)] = -4.0 * s;
                    m[(row, row - 2)] = s;
                }
            }
        }
    }
    let lu = m.lu();
    if lu.determinant().abs() < f64::EPSILON * 1e-3 || !lu.determinant().is_finite() {
        return Err(Error::Solver("singular forward step matrix (degenerate boundary rows)".into()));
    }

    let mut u = SpaceTimeField::zeros(grid, time);
    u.values.row_mut(0).assign(&ndarray::ArrayView1::from(&p.u0));
    let mut laps: Vec<DVector<f64>> = Vec::with_capacity(nt);
    let mut drs: Vec<DVector<f64>> = Vec::with_capacity(nt);
    let u0 = DVector::from_row_slice(&p.u0);
    laps.push(&lap * &u0);
    drs.push(&d1 * &u0);
    // Full memory M(t_j), kept for the explicit half of Crank–Nicolson.
    let mut mem_prev = DVector::zeros(nr);

    for step in 0..nt - 1 {
        let j = step + 1;
        // Explicit part of M(t_j): nodes 0..j-1 with trapezoid weights.
        let mut hist = DVector::zeros(nr);
        for l in 0..j {
            let w = if l == 0 { 0.5 * dt } else { dt };
            for i in 0..nr {
                hist[i] += w * (k.values[[j - l, i]] * laps[l][i] + kr.values[[j - l, i]] * drs[l][i]);
            }
        }
        let un = DVector::from_row_slice(&u.row_vec(step));
        let fj = DVector::from_row_slice(&p.source.row_vec(j));
        let fn_ = DVector::from_row_slice(&p.source.row_vec(step));
        let mut rhs = &un + (&hist + &fj) * (theta * dt);
        if theta < 1.0 {
            rhs += (&laps[step] + &mem_prev + &fn_) * ((1.0 - theta) * dt);
        }
        rhs[0] = p.inner.values()[j];
        rhs[nr - 1] = p.outer.values()[j];
        let next = lu.solve(&rhs).ok_or_else(|| Error::Solver("forward step solve failed".into()))?;
        u.values.row_mut(j).assign(&ndarray::ArrayView1::from(next.as_slice()));
        laps.push(&lap * &next);
        drs.push(&d1 * &next);
        mem_prev = hist + &mem_now * &next;
    }
    Ok(u)
}

/// `f̃(t, r) = ∫₀ᵗ {D_r k(t-s) D_r u(s) + k(t-s) Δₙ u(s)} ds` and
/// `g(t) = ∫ λ k(t, ·) dr`. Radial derivatives by second-order differences,
/// time integrals by the trapezoid rule; `f̃(0, ·) = 0`.
pub fn manufacture(
    k_true: &SpaceTimeField,
    u: &SpaceTimeField,
    dimension: Dimension,
    lambda: &[f64],
) -> Result<(SpaceTimeField, Vec<f64>)> {
    let grid = &k_true.radial;
    let time = &k_true.time;
    check_len(k_true.values.len(), u.values.len())?;
    check_len(grid.n_nodes(), lambda.len())?;
    let nr = grid.n_nodes();
    let nt = time.n_nodes();
    let h = grid.spacing();
    let r = grid.nodes();
    let n = dimension.n() as f64;
    let kr = k_true.d_r();
    let lap: Vec<Vec<f64>> = (0..nt)
        .map(|j| {
            let row = u.row_vec(j);
            let d1 = derivative_uniform(&row, h);
            let d2 = second_derivative_uniform(&row, h);
            (0..nr).map(|i| d2[i] + (n - 1.0) / r[i] * d1[i]).collect()
        })
        .collect();
    let du: Vec<Vec<f64>> = (0..nt).map(|j| derivative_uniform(&u.row_vec(j), h)).collect();
    let dt = time.step();
    let mut f = SpaceTimeField::zeros(grid, time);
    for j in 1..nt {
        for i in 0..nr {
            let term = |l: usize| kr.values[[j - l, i]] * du[l][i] + k_true.values[[j - l, i]] * lap[l][i];
            let mut s = 0.5 * (term(0) + term(j));
            for l in 1..j {
                s += term(l);
            }
            f.values[[j, i]] = s * dt;
        }
    }
    let g = (0..nt)
        .map(|j| {
            let prod: Vec<f64> = (0..nr).map(|i| lambda[i] * k_true.values[[j, i]]).collect();
            grid.integral(&prod)
        })
        .collect();
    Ok((f, g))
}
