//! Data of the general problem, its consistency checks, and the closed-form
//! initial kernel `k₀ = k(0, ·)`.
//!
//! `k₀` solves `D_r k₀ Φ[Cu₀] + k₀ Φ[Bu₀] = l̃₁` together with the scalar
//! constraint `Ψ[D_r k₀ Cu₀ + k₀ Bu₀] = N₂⁰(0) - Ψ₁[v₀]`, giving
//! `k₀ = C exp(∫_r^{R₂} Φ[Bu₀]/Φ[Cu₀]) - L l̃₁`.

use crate::coefficients::{conormal_factor, CoefficientField, CoefficientSpec, Shell};
use crate::error::{check_len, Error, Result};
use crate::functionals::{
    j_quantities, phi1_apply, phi_apply, psi1_apply, psi_apply, Bc, BoundaryPair, JQuantities, Measurement, U0Data,
};
use crate::grid::{derivative_uniform, AngularField, ShellGrid, SpaceTimeField, TimeGrid};
use crate::operators::{apply_a, apply_a1, apply_b, apply_c};

/// One angular field per time node.
pub type TimeSeries = Vec<AngularField>;

#[derive(Debug, Clone)]
pub struct ProblemData {
    pub spec: CoefficientSpec,
    pub coeffs: CoefficientField,
    pub time: TimeGrid,
    pub bcs: BoundaryPair,
    pub meas: Measurement,
    /// Lower bound for `|Φ[Cu₀]|`.
    pub m: f64,
    pub u0: AngularField,
    pub u1: TimeSeries,
    pub du1: TimeSeries,
    pub d2u1: TimeSeries,
    pub f0: AngularField,
    pub df: TimeSeries,
    pub g1: SpaceTimeField,
    pub g2: Vec<f64>,
}

impl ProblemData {
    pub fn grid(&self) -> &ShellGrid {
        &self.coeffs.grid
    }

    pub fn check_shapes(&self) -> Result<()> {
        let grid = self.grid();
        let nt = self.time.n_nodes();
        self.u0.check_shape(grid)?;
        self.f0.check_shape(grid)?;
        for series in [&self.u1, &self.du1, &self.d2u1, &self.df] {
            check_len(nt, series.len())?;
            for f in series {
                f.check_shape(grid)?;
            }
        }
        check_len(nt, self.g2.len())?;
        check_len(nt, self.g1.values.nrows())?;
        check_len(grid.radial.n_nodes(), self.g1.values.ncols())?;
        if nt < 4 {
            return Err(Error::Data("second time derivatives of g₁, g₂ need 4 time nodes".into()));
        }
        self.meas.check_psi(grid, self.bcs)
    }

    /// `v₀ = A u₀ + f(0) - D_t u₁(0)`.
    pub fn v0(&self) -> AngularField {
        let au0 = apply_a(&self.coeffs, &self.u0);
        au0.zip_map(&self.f0, |a, f| a + f).zip_map(&self.du1[0], |a, d| a - d)
    }

    pub fn dg1(&self) -> SpaceTimeField {
        self.g1.d_t()
    }

    pub fn d2g1(&self) -> SpaceTimeField {
        let mut out = self.g1.clone();
        for i in 0..self.g1.radial.n_nodes() {
            let d = self.time.second_derivative(&self.g1.column_vec(i)).expect("checked");
            out.values.column_mut(i).assign(&ndarray::ArrayView1::from(&d));
        }
        out
    }

    pub fn dg2(&self) -> Vec<f64> {
        derivative_uniform(&self.g2, self.time.step())
    }

    pub fn d2g2(&self) -> Vec<f64> {
        self.time.second_derivative(&self.g2).expect("checked")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
}

impl Residual {
    pub fn pass(&self) -> bool {
        self.value <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub residuals: Vec<Residual>,
}

impl ConsistencyReport {
    pub fn pass(&self) -> bool {
        self.residuals.iter().all(Residual::pass)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn shell_values(f: &AngularField, i: usize) -> impl Iterator<Item = f64> + '_ {
    f.values.index_axis(ndarray::Axis(0), i).into_iter().copied()
}

/// Residuals of the compatibility conditions at `t = 0`. Each passes when
/// it is at most `tol · max(1, scale)`, with `scale` the size of the data it compares.
pub fn validate_consistency(data: &ProblemData, tol: f64) -> Result<ConsistencyReport> {
    data.check_shapes()?;
    let grid = data.grid();
    let nr = grid.radial.n_nodes();
    let mut out = Vec::new();
    let mut push = |name: &str, value: f64, scale: f64| {
        out.push(Residual { name: name.into(), value, threshold: tol * scale.max(1.0) });
    };

    let diff0 = data.u0.zip_map(&data.u1[0], |a, b| a - b);
    let v0 = data.v0();
    let radii = (grid.radial.r_min(), grid.radial.r_max());
    for (bc, i, shell, label) in
        [(data.bcs.inner, 0, Shell::Inner, "inner"), (data.bcs.outer, nr - 1, Shell::Outer, "outer")]
    {
        match bc {
            Bc::Dirichlet => {
                push(&format!("u0_trace_{label}"), sup(shell_values(&diff0, i)), data.u0.sup_norm());
                push(&format!("v0_trace_{label}"), sup(shell_values(&v0, i)), v0.sup_norm());
            }
            Bc::Neumann => {
                let factor = conormal_factor(&data.spec, radii, shell).unwrap_or(1.0).abs();
                let d = diff0.d_r(grid);
                push(&format!("u0_flux_{label}"), factor * sup(shell_values(&d, i)), data.u0.sup_norm());
                let dv = v0.d_r(grid);
                push(&format!("v0_flux_{label}"), factor * sup(shell_values(&dv, i)), v0.sup_norm());
            }
        }
    }

    let lam = &data.meas.lambda;
    let phi_u0 = phi_apply(lam, &data.u0, grid)?;
    let g10 = data.g1.row_vec(0);
    push("phi_u0", sup(phi_u0.iter().zip(&g10).map(|(a, b)| a - b)), sup(g10.iter().copied()));
    let psi_u0 = psi_apply(&data.meas.psi, &data.u0, grid)?;
    push("psi_u0", (psi_u0 - data.g2[0]).abs(), data.g2[0].abs());

    let dg1 = data.dg1().row_vec(0);
    let phi_v0 = phi_apply(lam, &v0, grid)?;
    let phi_du1 = phi_apply(lam, &data.du1[0], grid)?;
    push("phi_v0", sup((0..nr).map(|i| phi_v0[i] - dg1[i] + phi_du1[i])), sup(dg1.iter().copied()));
    let dg2 = data.dg2()[0];
    let psi_v0 = psi_apply(&data.meas.psi, &v0, grid)?;
    let psi_du1 = psi_apply(&data.meas.psi, &data.du1[0], grid)?;
    push("psi_v0", (psi_v0 - dg2 + psi_du1).abs(), dg2.abs());
    Ok(ConsistencyReport { residuals: out })
}

/// `N₁⁰(t_k, ·) = D_t²g₁ - Ã₁ D_t g₁ - Φ₁[D_t u₁] - Φ[D_t f]` at one time node.
pub fn n10_at(data: &ProblemData, k: usize, dg1: &SpaceTimeField, d2g1: &SpaceTimeField) -> Result<Vec<f64>> {
    let grid = data.grid();
    let a1 = apply_a1(&data.coeffs.k1, &dg1.row_vec(k), &grid.radial);
    let p1 = phi1_apply(&data.meas.lambda, &data.coeffs, &data.du1[k])?;
    let pf = phi_apply(&data.meas.lambda, &data.df[k], grid)?;
    let d2 = d2g1.row_vec(k);
    Ok((0..d2.len()).map(|i| d2[i] - a1[i] - p1[i] - pf[i]).collect())
}

/// `N₂⁰(t_k) = D_t²g₂ - Ψ₁[D_t u₁] - Ψ[D_t f]`.
pub fn n20_at(data: &ProblemData, k: usize, d2g2: &[f64]) -> Result<f64> {
    let p1 = psi1_apply(&data.meas, &data.coeffs, &data.du1[k], data.bcs)?;
    let pf = psi_apply(&data.meas.psi, &data.df[k], data.grid())?;
    Ok(d2g2[k] - p1 - pf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerms0 {
    pub n10: Vec<f64>,
    pub n20: f64,
    /// `l̃₁ = N₁⁰(0, ·) - Φ₁[v₀]`.
    pub l1: Vec<f64>,
    pub psi1_v0: f64,
    pub phi1_v0: Vec<f64>,
}

pub fn source_terms_t0(data: &ProblemData) -> Result<SourceTerms0> {
    data.check_shapes()?;
    let n10 = n10_at(data, 0, &data.dg1(), &data.d2g1())?;
    let n20 = n20_at(data, 0, &data.d2g2())?;
    let v0 = data.v0();
    let phi1_v0 = phi1_apply(&data.meas.lambda, &data.coeffs, &v0)?;
    let psi1_v0 = psi1_apply(&data.meas, &data.coeffs, &v0, data.bcs)?;
    let l1 = n10.iter().zip(&phi1_v0).map(|(n, p)| n - p).collect();
    Ok(SourceTerms0 { n10, n20, l1, psi1_v0, phi1_v0 })
}

#[derive(Debug, Clone)]
pub struct InitialKernel {
    pub k0: Vec<f64>,
    pub c: f64,
    pub sources: SourceTerms0,
    pub u0data: U0Data,
    pub j: JQuantities,
    pub bu0: AngularField,
    pub cu0: AngularField,
    /// `l̃₂` as a field.
    pub l2: AngularField,
}

/// `k₀` from precomputed source terms.
pub fn k0_from_parts(
    grid: &ShellGrid,
    u0data: &U0Data,
    j1: f64,
    bu0: &AngularField,
    cu0: &AngularField,
    psi: &AngularField,
    sources: &SourceTerms0,
) -> Result<(Vec<f64>, f64, AngularField)> {
    let l1 = &sources.l1;
    let ratio = u0data.ratio();
    // I(r) = ∫_{R₂}^r exp(∫_r^η ratio) l̃₁/Φ[Cu₀] dη = -L l̃₁.
    let int: Vec<f64> = u0data.l_apply(l1)?.into_iter().map(|v| -v).collect();
    let phi_c = u0data.phi_c();
    let nr = l1.len();
    let cpart: Vec<f64> = (0..nr).map(|i| l1[i] / phi_c[i] - ratio[i] * int[i]).collect();
    let l2 = cu0.scale_radial(&cpart).zip_map(&bu0.scale_radial(&int), |a, b| a + b);
    let c = (sources.n20 - sources.psi1_v0 - psi_apply(psi, &l2, grid)?) / j1;
    let eexp = u0data.eexp();
    let k0 = (0..nr).map(|i| c * eexp[i] + int[i]).collect();
    Ok((k0, c, l2))
}

pub fn compute_k0(data: &ProblemData) -> Result<InitialKernel> {
    let sources = source_terms_t0(data)?;
    let (u0data, j) = j_quantities(&data.coeffs, &data.u0, &data.meas, data.m)?;
    let bu0 = apply_b(&data.coeffs, &data.u0);
    let cu0 = apply_c(&data.coeffs, &data.u0);
    let (k0, c, l2) = k0_from_parts(data.grid(), &u0data, j.j1, &bu0, &cu0, &data.meas.psi, &sources)?;
    Ok(InitialKernel { k0, c, sources, u0data, j, bu0, cu0, l2 })
}

/// `(h̃₀, q̃₀) = (k₀(R₂), k₀')`.
pub fn initial_hq(k0: &[f64], grid: &crate::grid::RadialGrid) -> Result<(f64, Vec<f64>)> {
    check_len(grid.n_nodes(), k0.len())?;
    Ok((*k0.last().expect("non-empty"), derivative_uniform(k0, grid.spacing())))
}

/// Residuals of the two defining relations of `k₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K0Residuals {
    /// `sup |D_r k₀ Φ[Cu₀] + k₀ Φ[Bu₀] - l̃₁|`.
    pub ode: f64,
    /// `|Ψ[D_r k₀ Cu₀ + k₀ Bu₀] - N₂⁰(0) + Ψ₁[v₀]|`.
    pub constraint: f64,
}

pub fn k0_residuals(data: &ProblemData, init: &InitialKernel) -> Result<K0Residuals> {
    let grid = data.grid();
    let h = grid.radial.spacing();
    let dk = derivative_uniform(&init.k0, h);
    let (pb, pc) = (init.u0data.phi_b(), init.u0data.phi_c());
    let ode = sup((0..dk.len()).map(|i| dk[i] * pc[i] + init.k0[i] * pb[i] - init.sources.l1[i]));
    let field = init.cu0.scale_radial(&dk).zip_map(&init.bu0.scale_radial(&init.k0), |a, b| a + b);
    let lhs = psi_apply(&data.meas.psi, &field, grid)?;
    let constraint = (lhs - init.sources.n20 + init.sources.psi1_v0).abs();
    Ok(K0Residuals { ode, constraint })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cumulative_right_uniform, RadialGrid};

    #[test]
    fn initial_hq_examples() {
        let g = RadialGrid::new(1.0, 2.0, 11).unwrap();
        let (h, q) = initial_hq(&[5.0; 11], &g).unwrap();
        assert_eq!(h, 5.0);
        assert!(q.iter().all(|v| v.abs() < 1e-13));
        let (h, q) = initial_hq(&g.sample(|r| r), &g).unwrap();
        assert_eq!(h, 2.0);
        assert!(q.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn reconstruction_round_trip() {
        let g = RadialGrid::new(1.0, 2.0, 41).unwrap();
        let k0 = g.sample(|r| (r * 1.7).sin() + r * r);
        let (h, q) = initial_hq(&k0, &g).unwrap();
        let e = cumulative_right_uniform(&q, g.spacing());
        let err = k0.iter().zip(&e).fold(0.0f64, |m, (k, e)| m.max((k - (h - e)).abs()));
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn trivial_l1_gives_pure_exponential() {
        let g = RadialGrid::new(1.0, 2.0, 21).unwrap();
        let pb = vec![0.0; 21];
        let pc = vec![2.0; 21];
        let u = U0Data::new(&g, pb, pc, 0.5).unwrap();
        let sg = ShellGrid::new(g.clone(), crate::grid::AngularGrid::new_2d(8).unwrap());
        let one = AngularField::from_spherical(&sg, |_, _, _| 1.0);
        let src =
            SourceTerms0 { n10: vec![0.0; 21], n20: 3.0, l1: vec![0.0; 21], psi1_v0: 1.0, phi1_v0: vec![0.0; 21] };
        let (k0, c, l2) = k0_from_parts(&sg, &u, 4.0, &one, &one, &one, &src).unwrap();
        assert_eq!(c, 0.5);
        assert!(k0.iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert_eq!(l2.sup_norm(), 0.0);
    }
}
