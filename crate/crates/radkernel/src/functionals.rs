//! Measurement functionals and the operators of the reduction.
//!
//! * `Φ[v](r) = ∫ sinθ dθ ∫ λ(R₂x') v(rx') dφ` (3D) or `∫ λ v dφ` (2D);
//! * `Ψ[v] = ∫ r^{n-1} dr ∫∫ ψ v`;
//! * `Φ₁`, `Ψ₁`, the remainders in `Φ[Ãw] = Ã₁Φ[w] + Φ₁[w]` and `Ψ[Ãw] = Ψ₁[w]`;
//! * `E q(r) = ∫_r^{R₂} q`, the operator `L` and the `J` quantities.
//!
//! Every exponential `exp(∫_r^η Φ[Bu₀]/Φ[Cu₀])` is read off one cached
//! fourth-order cumulative integral `X`, and `L` integrates the exponential
//! exactly on each cell. With that pairing `1 + L(Φ[Bu₀]) = exp(X(R₂) - X)`
//! holds to rounding.

use ndarray::{Array2, Array3};

use crate::coefficients::CoefficientField;
use crate::error::{check_len, Error, Result};
use crate::exec::Exec;
use crate::grid::{
    cumulative_left_corrected, cumulative_right_uniform, derivative_uniform, AngularField, RadialGrid, ShellGrid,
    SpaceTimeField,
};
use crate::operators::{apply_b, apply_c};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Dirichlet,
    Neumann,
}

/// Boundary conditions `(H, K)`: `H` on the outer shell `R₂`, `K` on the inner shell `R₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryPair {
    pub outer: Bc,
    pub inner: Bc,
}

impl BoundaryPair {
    pub const DD: Self = Self { outer: Bc::Dirichlet, inner: Bc::Dirichlet };
    pub const NN: Self = Self { outer: Bc::Neumann, inner: Bc::Neumann };

    /// Parses `"DD"`, `"DN"`, `"ND"`, `"NN"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bc = |c: char| match c {
            'D' | 'd' => Ok(Bc::Dirichlet),
            'N' | 'n' => Ok(Bc::Neumann),
            _ => Err(Error::Config(format!("unknown boundary condition {s:?}"))),
        };
        let cs: Vec<char> = s.trim().chars().filter(|c| c.is_alphabetic()).collect();
        if cs.len() != 2 {
            return Err(Error::Config(format!("boundary pair must be two letters, got {s:?}")));
        }
        Ok(Self { outer: bc(cs[0])?, inner: bc(cs[1])? })
    }
}

/// Weights `λ` (angular samples `[φ][θ]`) and `ψ` (a full field).
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub lambda: Array2<f64>,
    pub psi: AngularField,
}

impl Measurement {
    pub fn new(grid: &ShellGrid, lambda: Array2<f64>, psi: AngularField) -> Result<Self> {
        let (_, np, nt) = grid.shape();
        if lambda.dim() != (np, nt) {
            return Err(Error::shape(np * nt, lambda.len()));
        }
        psi.check_shape(grid)?;
        Ok(Self { lambda, psi })
    }

    pub fn from_fns(grid: &ShellGrid, lambda: impl Fn(f64, f64) -> f64, psi: impl Fn(f64, f64, f64) -> f64) -> Self {
        let a = &grid.angular;
        let lambda = Array2::from_shape_fn((a.n_phi(), a.n_theta()), |(m, l)| lambda(a.phi()[m], a.theta()[l]));
        Self { lambda, psi: AngularField::from_spherical(grid, psi) }
    }

    /// `ψ` must vanish on every shell carrying a Dirichlet condition.
    pub fn check_psi(&self, grid: &ShellGrid, bcs: BoundaryPair) -> Result<()> {
        let scale = self.psi.sup_norm().max(f64::MIN_POSITIVE);
        let nr = grid.radial.n_nodes();
        for (bc, i) in [(bcs.inner, 0), (bcs.outer, nr - 1)] {
            if bc != Bc::Dirichlet {
                continue;
            }
            let v = self.psi.values.index_axis(ndarray::Axis(0), i).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if v > 1e-12 * scale {
                return Err(Error::Admissibility {
                    node: i,
                    r: grid.radial.nodes()[i],
                    reason: format!("ψ = {v:.3e} on a Dirichlet shell"),
                });
            }
        }
        Ok(())
    }
}

pub fn phi_apply(lambda: &Array2<f64>, v: &AngularField, grid: &ShellGrid) -> Result<Vec<f64>> {
    v.check_shape(grid)?;
    let a = &grid.angular;
    if lambda.dim() != (a.n_phi(), a.n_theta()) {
        return Err(Error::shape(a.len(), lambda.len()));
    }
    Ok(v.values
        .outer_iter()
        .map(|slab| {
            let mut s = 0.0;
            for ((m, l), x) in slab.indexed_iter() {
                s += a.theta_weights()[l] * lambda[[m, l]] * x;
            }
            s * a.phi_step()
        })
        .collect())
}

pub fn psi_apply(psi: &AngularField, v: &AngularField, grid: &ShellGrid) -> Result<f64> {
    v.check_shape(grid)?;
    psi.check_shape(grid)?;
    let a = &grid.angular;
    let n = grid.dimension().n() as i32;
    let profile: Vec<f64> = v
        .values
        .outer_iter()
        .zip(psi.values.outer_iter())
        .zip(grid.radial.nodes())
        .map(|((vs, ps), r)| {
            let mut s = 0.0;
            for ((m, l), x) in vs.indexed_iter() {
                s += a.theta_weights()[l] * ps[[m, l]] * x;
            }
            s * a.phi_step() * r.powi(n - 1)
        })
        .collect();
    Ok(grid.radial.integral(&profile))
}

/// Angular field with the angular samples `[φ][θ]` broadcast over `r`.
fn broadcast(grid: &ShellGrid, ang: &Array2<f64>) -> AngularField {
    AngularField { values: Array3::from_shape_fn(grid.shape(), |(_, m, l)| ang[[m, l]]) }
}

fn angular_field(grid: &ShellGrid, f: impl Fn(usize, usize, usize) -> f64) -> AngularField {
    AngularField { values: Array3::from_shape_fn(grid.shape(), |(i, m, l)| f(i, m, l)) }
}

/// `D_φ(v sinφ)`, `D_φ(v cosφ)`, `D_θ(v sin²θ)`, `D_θ(v sin2θ)` by the
/// product rule, differencing only the scalar field `v`. The `θ` pair is zero in 2D.
fn trig_products(grid: &ShellGrid, v: &AngularField) -> [AngularField; 4] {
    let ang = &grid.angular;
    let (sp, cp, st, ct) = (ang.sin_phi(), ang.cos_phi(), ang.sin_theta(), ang.cos_theta());
    let vp = v.d_phi(grid);
    let vt = v.d_theta_scalar(grid);
    let theta = if ang.has_theta() { 1.0 } else { 0.0 };
    let x = |i: usize, m: usize, l: usize| v.values[[i, m, l]];
    [
        angular_field(grid, |i, m, l| vp.values[[i, m, l]] * sp[m] + x(i, m, l) * cp[m]),
        angular_field(grid, |i, m, l| vp.values[[i, m, l]] * cp[m] - x(i, m, l) * sp[m]),
        angular_field(grid, |i, m, l| {
            theta * (vt.values[[i, m, l]] * st[l] * st[l] + 2.0 * x(i, m, l) * st[l] * ct[l])
        }),
        angular_field(grid, |i, m, l| {
            let cos2 = ct[l] * ct[l] - st[l] * st[l];
            theta * 2.0 * (vt.values[[i, m, l]] * st[l] * ct[l] + x(i, m, l) * cos2)
        }),
    ]
}

pub fn phi1_apply(lambda: &Array2<f64>, coeffs: &CoefficientField, w: &AngularField) -> Result<Vec<f64>> {
    phi1_apply_with(lambda, coeffs, w, Exec::default())
}

/// `Φ₁[w](r)`. The terms of `w` itself are evaluated after moving the
/// angular derivatives onto `w` (periodic in `φ`, and the `θ` products carry
/// `sin θ`), so constants are annihilated exactly.
pub fn phi1_apply_with(
    lambda: &Array2<f64>,
    coeffs: &CoefficientField,
    w: &AngularField,
    exec: Exec,
) -> Result<Vec<f64>> {
    let grid = &coeffs.grid;
    w.check_shape(grid)?;
    let ang = &grid.angular;
    if lambda.dim() != (ang.n_phi(), ang.n_theta()) {
        return Err(Error::shape(ang.len(), lambda.len()));
    }
    let (nr, np, nt) = grid.shape();
    let st = ang.sin_theta();
    let reps = Array3::from_shape_fn((nr, np, nt), |(i, m, l)| coeffs.rep(i, m, l));

    let lam = broadcast(grid, lambda);
    let p2 = angular_field(grid, |i, m, l| lam.values[[i, m, l]] * reps[[i, m, l]].k[1]);
    let p3 = angular_field(grid, |i, m, l| lam.values[[i, m, l]] * reps[[i, m, l]].k[2] * st[l]);
    let dp_p2 = p2.d_phi(grid);
    let dt_p3 = p3.d_theta(grid);
    let dr_p2 = p2.d_r(grid);
    let dr_p3 = p3.d_r(grid);
    let [s_phi, c_phi, s2, t2] = trig_products(grid, &lam);

    let wr = w.d_r(grid);
    let wp = w.d_phi(grid);
    let wt = w.d_theta_scalar(grid);
    let r = grid.radial.nodes();

    Ok(exec.map(nr, |i| {
        let ri = r[i];
        let mut total = 0.0;
        for m in 0..np {
            for l in 0..nt {
                let idx = [i, m, l];
                let rep = &reps[idx];
                let brace = |j: usize| {
                    rep.f[j] * s_phi.values[idx] - rep.g[j] * c_phi.values[idx] + rep.h[j] * s2.values[idx]
                        - 0.5 * rep.l[j] * t2.values[idx]
                };
                let (xr, xp, xt) = (wr.values[idx], wp.values[idx] / (ri * st[l]), wt.values[idx] / ri);
                // w {D_φ P₂/r + D_θ P₃/r - D_r D_φ P₂ - D_r D_θ P₃} / r, by parts.
                let t_w = (-wp.values[idx] * p2.values[idx] / ri - wt.values[idx] * p3.values[idx] / ri
                    + wp.values[idx] * dr_p2.values[idx]
                    + wt.values[idx] * dr_p3.values[idx])
                    / ri;
                let t_r = xr * (brace(0) - dp_p2.values[idx] - dt_p3.values[idx]) / ri;
                let t_p = xp * brace(1) / ri;
                let t_t = xt * brace(2) / ri;
                total += ang.flat_weight(l) * (t_w + t_r + t_p + t_t);
            }
        }
        total
    }))
}

/// `Ψ₁[w]`; `ψ` must vanish on Dirichlet shells.
pub fn psi1_apply(meas: &Measurement, coeffs: &CoefficientField, w: &AngularField, bcs: BoundaryPair) -> Result<f64> {
    let grid = &coeffs.grid;
    meas.check_psi(grid, bcs)?;
    psi1_unchecked(&meas.psi, coeffs, w)
}

pub(crate) fn psi1_unchecked(psi: &AngularField, coeffs: &CoefficientField, w: &AngularField) -> Result<f64> {
    let grid = &coeffs.grid;
    w.check_shape(grid)?;
    psi.check_shape(grid)?;
    let ang = &grid.angular;
    let (nr, np, nt) = grid.shape();
    let n = grid.dimension().n() as i32;
    let r = grid.radial.nodes();
    let st = ang.sin_theta();

    let rpsi = angular_field(grid, |i, m, l| r[i].powi(n - 1) * psi.values[[i, m, l]]).d_r(grid);
    let [ps, pc, p2, p3] = trig_products(grid, psi);
    let wr = w.d_r(grid);
    let wp = w.d_phi(grid);
    let wt = w.d_theta_scalar(grid);

    let profile: Vec<f64> = (0..nr)
        .map(|i| {
            let ri = r[i];
            let mut s = 0.0;
            for m in 0..np {
                for l in 0..nt {
                    let idx = [i, m, l];
                    let rep = coeffs.rep(i, m, l);
                    let x = [wr.values[idx], wp.values[idx] / (ri * st[l]), wt.values[idx] / ri];
                    let mut acc = 0.0;
                    for j in 0..3 {
                        let ang_part = rep.f[j] * ps.values[idx] - rep.g[j] * pc.values[idx]
                            + rep.h[j] * p2.values[idx]
                            - 0.5 * rep.l[j] * p3.values[idx];
                        acc += x[j] * (rep.k[j] * rpsi.values[idx] * st[l] - ri.powi(n - 2) * ang_part);
                    }
                    s += ang.flat_weight(l) * acc;
                }
            }
            s
        })
        .collect();
    Ok(-grid.radial.integral(&profile))
}

/// `E q(r) = ∫_r^{R₂} q`.
pub fn e_apply(q: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    check_len(grid.n_nodes(), q.len())?;
    Ok(cumulative_right_uniform(q, grid.spacing()))
}

/// `E` applied to every time slice.
pub fn e_apply_field(q: &SpaceTimeField) -> SpaceTimeField {
    let mut out = q.clone();
    for (k, mut row) in out.values.outer_iter_mut().enumerate() {
        let e = cumulative_right_uniform(&q.row_vec(k), q.radial.spacing());
        row.assign(&ndarray::ArrayView1::from(&e));
    }
    out
}

/// `h (e^{sh} - 1)/(sh)` without cancellation.
fn exp_cell(s: f64, h: f64) -> f64 {
    let x = s * h;
    if x.abs() < 1e-8 {
        h * (1.0 + 0.5 * x)
    } else {
        h * x.exp_m1() / x
    }
}

/// `Φ[Bu₀]`, `Φ[Cu₀]` and what is derived from their ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct U0Data {
    grid: RadialGrid,
    phi_b: Vec<f64>,
    phi_c: Vec<f64>,
    m: f64,
    ratio: Vec<f64>,
    /// `X(r) = ∫_{R₁}^r ratio`, fourth order.
    x: Vec<f64>,
}

impl U0Data {
    pub fn new(grid: &RadialGrid, phi_b: Vec<f64>, phi_c: Vec<f64>, m: f64) -> Result<Self> {
        check_len(grid.n_nodes(), phi_b.len())?;
        check_len(grid.n_nodes(), phi_c.len())?;
        if !(m > 0.0) {
            return Err(Error::Config(format!("the lower bound m must be positive, got {m}")));
        }
        for (i, (&c, &r)) in phi_c.iter().zip(grid.nodes()).enumerate() {
            if !(c.abs() >= m) {
                return Err(Error::Degeneracy { quantity: "|Φ[Cu₀]|".into(), node: i, r, value: c.abs(), bound: m });
            }
        }
        let ratio: Vec<f64> = phi_b.iter().zip(&phi_c).map(|(b, c)| b / c).collect();
        let x = cumulative_left_corrected(&ratio, grid.spacing());
        Ok(Self { grid: grid.clone(), phi_b, phi_c, m, ratio, x })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }
    pub fn phi_b(&self) -> &[f64] {
        &self.phi_b
    }
    pub fn phi_c(&self) -> &[f64] {
        &self.phi_c
    }
    pub fn ratio(&self) -> &[f64] {
        &self.ratio
    }
    pub fn m(&self) -> f64 {
        self.m
    }

    /// `J₀ = |Φ[Cu₀]|`.
    pub fn j0(&self) -> Vec<f64> {
        self.phi_c.iter().map(|c| c.abs()).collect()
    }

    /// `exp(∫_r^{R₂} ratio)`.
    pub fn eexp(&self) -> Vec<f64> {
        let last = *self.x.last().expect("non-empty");
        self.x.iter().map(|x| (last - x).exp()).collect()
    }

    /// `L g(r) = ∫_r^{R₂} exp(∫_r^η ratio) g(η)/Φ[Cu₀](η) dη`.
    pub fn l_apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.n_nodes(), g.len())?;
        let h = self.grid.spacing();
        let n = g.len();
        let big_g: Vec<f64> = g.iter().zip(&self.phi_c).map(|(g, c)| g / c).collect();
        let dg = derivative_uniform(&big_g, h);
        // Cell contributions relative to the left node of each cell.
        let cell: Vec<f64> = (0..n - 1)
            .map(|i| {
                let avg = 0.5 * (big_g[i] + big_g[i + 1]) - h * (dg[i + 1] - dg[i]) / 12.0;
                let s = (self.x[i + 1] - self.x[i]) / h;
                avg * exp_cell(s, h)
            })
            .collect();
        let mut out = vec![0.0; n];
        // out[j] = Σ_{i≥j} e^{X_i - X_j} cell[i], by backward recursion.
        for j in (0..n - 1).rev() {
            out[j] = cell[j] + (self.x[j + 1] - self.x[j]).exp() * out[j + 1];
        }
        Ok(out)
    }

    /// `J₂ = -ratio · exp(∫_r^{R₂} ratio)`.
    pub fn j2(&self) -> Vec<f64> {
        self.ratio.iter().zip(self.eexp()).map(|(q, e)| -q * e).collect()
    }

    /// `J₃ g = (g + Φ[Bu₀] L g) / Φ[Cu₀]`.
    pub fn j3_apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        let lg = self.l_apply(g)?;
        Ok((0..g.len()).map(|i| (g[i] + self.phi_b[i] * lg[i]) / self.phi_c[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JQuantities {
    pub j0: Vec<f64>,
    /// `J(u₀) = (Bu₀ - ratio · Cu₀) exp(∫_r^{R₂} ratio)`.
    pub j: AngularField,
    pub j1: f64,
    pub j2: Vec<f64>,
}

/// `J` quantities from precomputed `Bu₀`, `Cu₀`.
pub fn j_quantities_from(
    grid: &ShellGrid,
    bu0: &AngularField,
    cu0: &AngularField,
    meas: &Measurement,
    m: f64,
) -> Result<(U0Data, JQuantities)> {
    let phi_b = phi_apply(&meas.lambda, bu0, grid)?;
    let phi_c = phi_apply(&meas.lambda, cu0, grid)?;
    let u0 = U0Data::new(&grid.radial, phi_b, phi_c, m)?;
    let eexp = u0.eexp();
    let ratio = u0.ratio().to_vec();
    let j = bu0.zip_map(&cu0.scale_radial(&ratio), |b, c| b - c).scale_radial(&eexp);
    let j1 = psi_apply(&meas.psi, &j, grid)?;
    let threshold = 1e-10 * j.sup_norm() * grid.measure();
    if !(j1.abs() >= threshold) {
        return Err(Error::Solvability { quantity: "J₁".into(), value: j1, threshold });
    }
    let jq = JQuantities { j0: u0.j0(), j, j1, j2: u0.j2() };
    Ok((u0, jq))
}

pub fn j_quantities(
    coeffs: &CoefficientField,
    u0: &AngularField,
    meas: &Measurement,
    m: f64,
) -> Result<(U0Data, JQuantities)> {
    let bu0 = apply_b(coeffs, u0);
    let cu0 = apply_c(coeffs, u0);
    j_quantities_from(&coeffs.grid, &bu0, &cu0, meas, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{build_coefficients, CoefficientSpec, Family, Radial, RadialAbcd};
    use crate::grid::{AngularGrid, Dimension};
    use std::f64::consts::PI;

    fn shell(dim: Dimension, n: usize) -> ShellGrid {
        ShellGrid::new(RadialGrid::with_cells(1.0, 2.0, n).unwrap(), AngularGrid::new(dim, 2 * n, n).unwrap())
    }

    #[test]
    fn phi_examples() {
        for (dim, full) in [(Dimension::Three, 4.0 * PI), (Dimension::Two, 2.0 * PI)] {
            let g = shell(dim, 8);
            let one = Array2::from_elem((g.angular.n_phi(), g.angular.n_theta()), 1.0);
            let v = AngularField::from_spherical(&g, |r, _, _| r * r);
            let out = phi_apply(&one, &v, &g).unwrap();
            for (o, r) in out.iter().zip(g.radial.nodes()) {
                assert!((o - full * r * r).abs() < 1e-12);
            }
        }
        let g = shell(Dimension::Three, 8);
        let one = Array2::from_elem((16, 8), 1.0);
        let x3 = AngularField::from_cartesian(&g, |x| x[2]);
        assert!(phi_apply(&one, &x3, &g).unwrap().iter().all(|v| v.abs() < 1e-13));
        let m = Measurement::from_fns(&g, |_, t| t.cos(), |_, _, _| 1.0);
        let ones = AngularField::from_spherical(&g, |_, _, _| 1.0);
        assert!(phi_apply(&m.lambda, &ones, &g).unwrap().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn psi_examples() {
        let g = shell(Dimension::Three, 16);
        let one = AngularField::from_spherical(&g, |_, _, _| 1.0);
        let vol = psi_apply(&one, &one, &g).unwrap();
        assert!((vol - 4.0 * PI * 7.0 / 3.0).abs() < 1e-10);
        let zero = AngularField::zeros(&g);
        assert_eq!(psi_apply(&zero, &one, &g).unwrap(), 0.0);
        let r = AngularField::from_spherical(&g, |r, _, _| r);
        let v = psi_apply(&r, &r, &g).unwrap();
        assert!((v - 4.0 * PI * 31.0 / 5.0).abs() < 1e-3);
    }

    #[test]
    fn multiplicativity_is_exact() {
        let g = shell(Dimension::Three, 8);
        let m = Measurement::from_fns(&g, |p, t| 1.0 + 0.3 * p.sin() * t.sin(), |_, _, _| 1.0);
        let u = AngularField::from_cartesian(&g, |x| x[0] + x[1] * x[2]);
        let w: Vec<f64> = g.radial.sample(|r| r.exp());
        let lhs = phi_apply(&m.lambda, &u.scale_radial(&w), &g).unwrap();
        let rhs = phi_apply(&m.lambda, &u, &g).unwrap();
        for i in 0..w.len() {
            assert!((lhs[i] - w[i] * rhs[i]).abs() <= 1e-13 * w[i] * 20.0);
        }
    }

    #[test]
    fn phi1_annihilates_constants_and_matches_isotropic_case() {
        for dim in [Dimension::Two, Dimension::Three] {
            let g = shell(dim, 24);
            let a = Radial::analytic(|r| 1.0 + 0.5 * r);
            let spec = CoefficientSpec::new(dim, Family::RadialAbcd(RadialAbcd::isotropic(a.clone())));
            let coeffs = build_coefficients(&spec, &g).unwrap();
            let one = Array2::from_elem((g.angular.n_phi(), g.angular.n_theta()), 1.0);
            let c = AngularField::from_spherical(&g, |_, _, _| 3.0);
            assert!(phi1_apply(&one, &coeffs, &c).unwrap().iter().all(|v| v.abs() < 1e-10));

            let w = AngularField::from_spherical(&g, |r, _, _| (r * 1.3).sin());
            let out = phi1_apply(&one, &coeffs, &w).unwrap();
            let factor = match dim {
                Dimension::Two => 2.0 * PI,
                Dimension::Three => 8.0 * PI,
            };
            for (i, &r) in g.radial.nodes().iter().enumerate().skip(1).take(11) {
                let expect = factor * a.eval(r) / r * 1.3 * (1.3 * r).cos();
                assert!((out[i] - expect).abs() < 2e-2 * expect.abs().max(1.0), "{dim:?} {i} {} {expect}", out[i]);
            }
        }
    }

    #[test]
    fn psi1_of_constant_and_zero_weight() {
        let g = shell(Dimension::Three, 8);
        let coeffs = build_coefficients(&CoefficientSpec::laplacian(Dimension::Three), &g).unwrap();
        let m = Measurement::from_fns(&g, |_, _| 1.0, |r, _, t| (r - 1.0) * (2.0 - r) * (1.0 + t.cos()));
        let c = AngularField::from_spherical(&g, |_, _, _| 2.0);
        assert!(psi1_apply(&m, &coeffs, &c, BoundaryPair::DD).unwrap().abs() < 1e-10);
        let z = Measurement::from_fns(&g, |_, _| 1.0, |_, _, _| 0.0);
        let w = AngularField::from_cartesian(&g, |x| x[0] * x[1]);
        assert_eq!(psi1_apply(&z, &coeffs, &w, BoundaryPair::DD).unwrap(), 0.0);
        let bad = Measurement::from_fns(&g, |_, _| 1.0, |_, _, _| 1.0);
        assert!(matches!(psi1_apply(&bad, &coeffs, &w, BoundaryPair::DD), Err(Error::Admissibility { .. })));
        assert!(psi1_apply(&bad, &coeffs, &w, BoundaryPair::NN).is_ok());
    }

    #[test]
    fn e_examples() {
        let g = RadialGrid::new(1.0, 2.0, 21).unwrap();
        let e = e_apply(&vec![1.0; 21], &g).unwrap();
        for (v, r) in e.iter().zip(g.nodes()) {
            assert!((v - (2.0 - r)).abs() < 1e-14);
        }
        assert!(e_apply(&vec![0.0; 21], &g).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn l_examples() {
        let g = RadialGrid::new(1.0, 2.0, 41).unwrap();
        let u = U0Data::new(&g, vec![0.0; 41], vec![1.0; 41], 0.5).unwrap();
        assert!(u.l_apply(&vec![0.0; 41]).unwrap().iter().all(|v| *v == 0.0));
        let q = g.sample(|r| 2.0 * r);
        let lq = u.l_apply(&q).unwrap();
        for (v, r) in lq.iter().zip(g.nodes()) {
            assert!((v - (4.0 - r * r)).abs() < 1e-12);
        }

        let u = U0Data::new(&g, vec![1.0; 41], vec![1.0; 41], 0.5).unwrap();
        let l = u.l_apply(&vec![1.0; 41]).unwrap();
        for (v, r) in l.iter().zip(g.nodes()) {
            assert!((1.0 + v - (2.0 - r).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn degeneracy_names_node() {
        let g = RadialGrid::new(1.0, 2.0, 5).unwrap();
        match U0Data::new(&g, vec![0.0; 5], vec![1.0, 1.0, 0.01, 1.0, 1.0], 0.1) {
            Err(Error::Degeneracy { node, .. }) => assert_eq!(node, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn l_against_nested_quadrature() {
        // Oracle: double integral by fine trapezoid, independent of X.
        let g = RadialGrid::new(1.0, 2.0, 81).unwrap();
        let pb = g.sample(|r| 0.5 * r.sin());
        let pc = g.sample(|r| 1.0 + 0.2 * r);
        let u = U0Data::new(&g, pb, pc, 0.5).unwrap();
        let gg = g.sample(|r| r.cos());
        let l = u.l_apply(&gg).unwrap();
        let ratio = |r: f64| 0.5 * r.sin() / (1.0 + 0.2 * r);
        let fine = 4000;
        for (j, &r) in g.nodes().iter().enumerate().step_by(10) {
            let h = (2.0 - r) / fine as f64;
            let mut inner = 0.0;
            let mut total = 0.0;
            let mut prev = r.cos() / (1.0 + 0.2 * r);
            for k in 1..=fine {
                let e0 = r + (k - 1) as f64 * h;
                let e1 = e0 + h;
                inner += 0.5 * h * (ratio(e0) + ratio(e1));
                let cur = inner.exp() * e1.cos() / (1.0 + 0.2 * e1);
                total += 0.5 * h * (prev + cur);
                prev = cur;
            }
            assert!((l[j] - total).abs() < 1e-5, "{j}: {} {}", l[j], total);
        }
    }

    #[test]
    fn annihilation_and_composite_measurement() {
        let g = shell(Dimension::Three, 10);
        let coeffs = build_coefficients(&CoefficientSpec::laplacian(Dimension::Three), &g).unwrap();
        let u0 =
            AngularField::from_cartesian(&g, |x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + 0.3 * x[2] * x[2] + x[0]);
        let meas = Measurement::from_fns(
            &g,
            |_, t| 1.0 + 0.2 * t.cos(),
            |r, p, t| (r - 1.0) * (2.0 - r) * (1.0 + t.cos().powi(2) + 0.3 * t.sin() * p.cos()),
        );
        let (_, jq) = j_quantities(&coeffs, &u0, &meas, 1e-3).unwrap();
        let pj = phi_apply(&meas.lambda, &jq.j, &g).unwrap();
        let scale = jq.j.sup_norm();
        assert!(pj.iter().all(|v| v.abs() <= 1e-12 * scale.max(1.0)));

        // ψ(r, x') = μ(r) λ(x') makes Ψ a functional of Φ.
        let lam = meas.lambda.clone();
        let psi = AngularField {
            values: Array3::from_shape_fn(g.shape(), |(i, m, l)| {
                let r = g.radial.nodes()[i];
                (r - 1.0) * (2.0 - r) * lam[[m, l]]
            }),
        };
        let comp = Measurement { lambda: lam, psi };
        assert!(matches!(j_quantities(&coeffs, &u0, &comp, 1e-3), Err(Error::Solvability { .. })));
    }
}
