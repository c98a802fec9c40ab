//! The differential operators `A`, `B`, `C` on sampled fields, plus
//! Cartesian finite-difference versions on closures used as oracles.
//!
//! Grid versions go through the spherical chain rule: the Cartesian gradient
//! is assembled from `D_r`, `D_φ`, `D_θ`, multiplied by the tensor, and the
//! divergence is taken with the same chain rule.

use ndarray::{Array3, Zip};

use crate::coefficients::{CoefficientField, Tensor, Vector};
use crate::grid::{derivative_uniform, second_derivative_uniform, AngularField, Dimension, RadialGrid, ShellGrid};

/// Cartesian gradient of `w` at every node.
pub fn gradient(w: &AngularField, grid: &ShellGrid) -> [AngularField; 3] {
    let dr = w.d_r(grid);
    let dp = w.d_phi(grid);
    let dt = w.d_theta_scalar(grid);
    let ang = &grid.angular;
    let r = grid.radial.nodes();
    let shape = w.values.dim();
    let mut g = [Array3::zeros(shape), Array3::zeros(shape), Array3::zeros(shape)];
    for ((i, m, l), &vr) in dr.values.indexed_iter() {
        let (cp, sp) = (ang.cos_phi()[m], ang.sin_phi()[m]);
        let (ct, st) = (ang.cos_theta()[l], ang.sin_theta()[l]);
        let vp = dp.values[[i, m, l]] / (r[i] * st);
        let vt = dt.values[[i, m, l]] / r[i];
        g[0][[i, m, l]] = cp * st * vr - sp * vp + cp * ct * vt;
        g[1][[i, m, l]] = sp * st * vr + cp * vp + sp * ct * vt;
        g[2][[i, m, l]] = ct * vr - st * vt;
    }
    g.map(|values| AngularField { values })
}

/// `Σ_j D_{x_j} F_j`.
pub fn divergence(flux: &[AngularField; 3], grid: &ShellGrid) -> AngularField {
    let mut out = AngularField::zeros(grid);
    let parts = match grid.dimension() {
        Dimension::Two => 2,
        Dimension::Three => 3,
    };
    for (j, f) in flux.iter().enumerate().take(parts) {
        let g = gradient(f, grid);
        out.values += &g[j].values;
    }
    out
}

/// `Σ_{j,k} D_{x_j}(t_{jk} D_{x_k} w)` for a sampled tensor field.
pub fn apply_divergence_form(t: &Array3<Tensor>, w: &AngularField, grid: &ShellGrid) -> AngularField {
    let g = gradient(w, grid);
    let flux: [AngularField; 3] = std::array::from_fn(|j| {
        let mut values = Array3::zeros(w.values.dim());
        Zip::indexed(&mut values).for_each(|(i, m, l), v| {
            let a = &t[[i, m, l]];
            *v = (0..3).map(|k| a[j][k] * g[k].values[[i, m, l]]).sum();
        });
        AngularField { values }
    });
    let mut out = divergence(&flux, grid);
    extrapolate_ends(&mut out);
    out
}

/// Replaces the two end nodes at each shell by cubic extrapolation from the
/// next four. Nested one-sided differences are only first order there.
fn extrapolate_ends(f: &mut AngularField) {
    let nr = f.values.dim().0;
    if nr < 8 {
        return;
    }
    let (_, np, nt) = f.values.dim();
    let v = &mut f.values;
    for m in 0..np {
        for l in 0..nt {
            let p = |i: usize| v[[i, m, l]];
            let (a, b, c, d) = (p(2), p(3), p(4), p(5));
            let (e, g, h, k) = (p(nr - 3), p(nr - 4), p(nr - 5), p(nr - 6));
            v[[0, m, l]] = 10.0 * a - 20.0 * b + 15.0 * c - 4.0 * d;
            v[[1, m, l]] = 4.0 * a - 6.0 * b + 4.0 * c - d;
            v[[nr - 1, m, l]] = 10.0 * e - 20.0 * g + 15.0 * h - 4.0 * k;
            v[[nr - 2, m, l]] = 4.0 * e - 6.0 * g + 4.0 * h - k;
        }
    }
}

pub fn apply_a(coeffs: &CoefficientField, w: &AngularField) -> AngularField {
    apply_divergence_form(&coeffs.a, w, &coeffs.grid)
}

pub fn apply_b(coeffs: &CoefficientField, w: &AngularField) -> AngularField {
    apply_divergence_form(&coeffs.b, w, &coeffs.grid)
}

/// `Σ_j c_j D_{x_j} w`.
pub fn apply_c(coeffs: &CoefficientField, w: &AngularField) -> AngularField {
    let g = gradient(w, &coeffs.grid);
    let mut values = Array3::zeros(w.values.dim());
    Zip::indexed(&mut values).for_each(|(i, m, l), v| {
        let c = &coeffs.c[[i, m, l]];
        *v = (0..3).map(|k| c[k] * g[k].values[[i, m, l]]).sum();
    });
    AngularField { values }
}

/// `Ã₁ g = D_r(k₁ D_r g)`, expanded as `k₁ g'' + k₁' g'` so the end nodes
/// stay second order.
pub fn apply_a1(k1: &[f64], g: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let h = grid.spacing();
    let dg = derivative_uniform(g, h);
    let d2g = second_derivative_uniform(g, h);
    let dk = derivative_uniform(k1, h);
    (0..g.len()).map(|i| k1[i] * d2g[i] + dk[i] * dg[i]).collect()
}

/// Fourth-order central derivative of `f` along axis `k` at `x`.
fn partial(f: &dyn Fn(Vector) -> f64, x: Vector, k: usize, eps: f64) -> f64 {
    let at = |s: f64| {
        let mut y = x;
        y[k] += s;
        f(y)
    };
    (-at(2.0 * eps) + 8.0 * at(eps) - 8.0 * at(-eps) + at(-2.0 * eps)) / (12.0 * eps)
}

/// Step used by the Cartesian oracles.
pub const ORACLE_STEP: f64 = 1e-3;

/// `Σ_{j,k} D_j(t_{jk} D_k w)` at `x` by nested fourth-order differences.
pub fn divergence_form_at(dim: Dimension, t: &dyn Fn(Vector) -> Tensor, w: &dyn Fn(Vector) -> f64, x: Vector) -> f64 {
    let n = dim.n();
    let eps = ORACLE_STEP;
    (0..n)
        .map(|j| {
            let flux = |y: Vector| {
                let a = t(y);
                (0..n).map(|k| a[j][k] * partial(w, y, k, eps)).sum::<f64>()
            };
            partial(&flux, x, j, eps)
        })
        .sum()
}

/// `Σ_j c_j D_j w` at `x`.
pub fn first_order_at(dim: Dimension, c: Vector, w: &dyn Fn(Vector) -> f64, x: Vector) -> f64 {
    (0..dim.n()).map(|j| c[j] * partial(w, x, j, ORACLE_STEP)).sum()
}
