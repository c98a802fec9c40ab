//! Fixed-point operators of the general problem and single Picard sweeps of
//! the `(h, q)` system, for a supplied state `v`.
//!
//! Here `h(t) = k(t, R₂)`, `q = D_r k` and `k = h - E q`.
//!
//! ```text
//! N₁(v, h, q)(t) = -∫₀ᵗ (h - Eq)(t - s) [Bv + z₀](s) ds - ∫₀ᵗ q(t - s) [Cv + z₁](s) ds
//! N₂ = J₃ (Φ[N₁] - Φ₁[v])
//! N₃ = J₁⁻¹ { Ψ[N₁] - Ψ[N₂ Cu₀] + Ψ[E(N₂) Bu₀] - Ψ₁[v] }
//! h ← h₀ + N₃,   q ← q₀ + J₂ N₃ + N₂
//! ```
//!
//! Time convolutions are trapezoid sums and every operator acts per time slice.

use crate::coefficients::CoefficientField;
use crate::error::{check_len, Result};
use crate::exec::Exec;
use crate::functionals::{
    e_apply, j_quantities_from, phi1_apply, phi_apply, psi1_apply, psi_apply, JQuantities, U0Data,
};
use crate::grid::{AngularField, ShellGrid, SpaceTimeField, TimeGrid};
use crate::kernel_init::{n10_at, n20_at, ProblemData, TimeSeries};
use crate::operators::{apply_a, apply_b, apply_c};

#[derive(Debug, Clone)]
pub struct ReductionState {
    pub v: TimeSeries,
    pub h: Vec<f64>,
    pub q: SpaceTimeField,
    /// `B D_t u₁`.
    pub z0: TimeSeries,
    /// `C D_t u₁`.
    pub z1: TimeSeries,
    /// `A D_t u₁ - D_t² u₁ + D_t f`.
    pub z2: TimeSeries,
}

/// `z₀, z₁, z₂` from the data.
pub fn z_terms(data: &ProblemData) -> (TimeSeries, TimeSeries, TimeSeries) {
    let c = &data.coeffs;
    let z0 = data.du1.iter().map(|d| apply_b(c, d)).collect();
    let z1 = data.du1.iter().map(|d| apply_c(c, d)).collect();
    let z2 = (0..data.du1.len())
        .map(|k| apply_a(c, &data.du1[k]).zip_map(&data.d2u1[k], |a, b| a - b).zip_map(&data.df[k], |a, b| a + b))
        .collect();
    (z0, z1, z2)
}

impl ReductionState {
    pub fn new(data: &ProblemData, v: TimeSeries, h: Vec<f64>, q: SpaceTimeField) -> Result<Self> {
        let nt = data.time.n_nodes();
        check_len(nt, v.len())?;
        check_len(nt, h.len())?;
        check_len(nt, q.values.nrows())?;
        check_len(data.grid().radial.n_nodes(), q.values.ncols())?;
        for f in &v {
            f.check_shape(data.grid())?;
        }
        let (z0, z1, z2) = z_terms(data);
        Ok(Self { v, h, q, z0, z1, z2 })
    }
}

/// Trapezoid weight of node `s` in `∫₀^{t_k}`.
fn trap(s: usize, k: usize, dt: f64) -> f64 {
    if s == 0 || s == k {
        0.5 * dt
    } else {
        dt
    }
}

pub fn n1_eval(state: &ReductionState, coeffs: &CoefficientField, time: &TimeGrid) -> Result<TimeSeries> {
    n1_eval_with(state, coeffs, time, Exec::default())
}

pub fn n1_eval_with(
    state: &ReductionState,
    coeffs: &CoefficientField,
    time: &TimeGrid,
    exec: Exec,
) -> Result<TimeSeries> {
    let grid = &coeffs.grid;
    let nt = time.n_nodes();
    check_len(nt, state.v.len())?;
    check_len(nt, state.h.len())?;
    check_len(nt, state.z0.len())?;
    check_len(nt, state.z1.len())?;
    let bz: TimeSeries = (0..nt).map(|s| apply_b(coeffs, &state.v[s]).zip_map(&state.z0[s], |a, b| a + b)).collect();
    let cz: TimeSeries = (0..nt).map(|s| apply_c(coeffs, &state.v[s]).zip_map(&state.z1[s], |a, b| a + b)).collect();
    // k = h - E q on the radial grid, per time node.
    let k: Vec<Vec<f64>> = (0..nt)
        .map(|t| {
            let e = e_apply(&state.q.row_vec(t), &grid.radial)?;
            Ok(e.iter().map(|e| state.h[t] - e).collect())
        })
        .collect::<Result<_>>()?;
    let dt = time.step();
    Ok(exec.map(nt, |t| {
        let mut out = AngularField::zeros(grid);
        // Empty window at t = 0.
        for s in 0..=t {
            if t == 0 {
                break;
            }
            let term =
                bz[s].scale_radial(&k[t - s]).zip_map(&cz[s].scale_radial(&state.q.row_vec(t - s)), |a, b| a + b);
            out.values.scaled_add(-trap(s, t, dt), &term.values);
        }
        out
    }))
}

/// `Ψ[g Cu₀] - Ψ[E(g) Bu₀]` for a radial profile `g`.
fn psi_pair(g: &[f64], red: &Reduction, grid: &ShellGrid, psi: &AngularField) -> Result<f64> {
    let eg = e_apply(g, &grid.radial)?;
    Ok(psi_apply(psi, &red.cu0.scale_radial(g), grid)? - psi_apply(psi, &red.bu0.scale_radial(&eg), grid)?)
}

/// Time profiles of the data-only terms.
#[derive(Debug, Clone)]
pub struct SourceProfiles {
    pub n10: SpaceTimeField,
    pub n20: Vec<f64>,
    pub n30: SpaceTimeField,
    pub n0: Vec<f64>,
    pub h0: Vec<f64>,
    pub q0: SpaceTimeField,
}

/// Everything a sweep needs besides the state.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub u0data: U0Data,
    pub j: JQuantities,
    pub bu0: AngularField,
    pub cu0: AngularField,
    pub profiles: SourceProfiles,
}

impl Reduction {
    pub fn new(data: &ProblemData) -> Result<Self> {
        data.check_shapes()?;
        let bu0 = apply_b(&data.coeffs, &data.u0);
        let cu0 = apply_c(&data.coeffs, &data.u0);
        let (u0data, j) = j_quantities_from(data.grid(), &bu0, &cu0, &data.meas, data.m)?;
        let mut red = Self {
            u0data,
            j,
            bu0,
            cu0,
            profiles: SourceProfiles {
                n10: data.g1.clone(),
                n20: Vec::new(),
                n30: data.g1.clone(),
                n0: Vec::new(),
                h0: Vec::new(),
                q0: data.g1.clone(),
            },
        };
        red.profiles = source_profiles_with(data, &red)?;
        Ok(red)
    }

    /// `J₄ = J₁⁻¹ { Ψ[J₃Φ₁[v₀] Cu₀] - Ψ[E(J₃Φ₁[v₀]) Bu₀] - Ψ₁[v₀] }`.
    pub fn j4(&self, data: &ProblemData) -> Result<f64> {
        let v0 = data.v0();
        let j3p = self.j3_phi1_v0(data)?;
        let psi1 = psi1_apply(&data.meas, &data.coeffs, &v0, data.bcs)?;
        Ok((psi_pair(&j3p, self, data.grid(), &data.meas.psi)? - psi1) / self.j.j1)
    }

    fn j3_phi1_v0(&self, data: &ProblemData) -> Result<Vec<f64>> {
        let p = phi1_apply(&data.meas.lambda, &data.coeffs, &data.v0())?;
        self.u0data.j3_apply(&p)
    }

    /// `(h̃₀, q̃₀) = (h₀(0) + J₄, q₀(0) + J₂ J₄ - J₃ Φ₁[v₀])`.
    pub fn initial_values(&self, data: &ProblemData) -> Result<(f64, Vec<f64>)> {
        let j4 = self.j4(data)?;
        let j3p = self.j3_phi1_v0(data)?;
        let q0 = self.profiles.q0.row_vec(0);
        let q = (0..q0.len()).map(|i| q0[i] + self.j.j2[i] * j4 - j3p[i]).collect();
        Ok((self.profiles.h0[0] + j4, q))
    }
}

pub fn source_profiles(data: &ProblemData) -> Result<SourceProfiles> {
    Ok(Reduction::new(data)?.profiles)
}

fn source_profiles_with(data: &ProblemData, red: &Reduction) -> Result<SourceProfiles> {
    let grid = data.grid();
    let nt = data.time.n_nodes();
    let (dg1, d2g1, d2g2) = (data.dg1(), data.d2g1(), data.d2g2());
    let mut n10 = data.g1.clone();
    let mut n30 = data.g1.clone();
    let mut q0 = data.g1.clone();
    let mut n20 = Vec::with_capacity(nt);
    let mut n0 = Vec::with_capacity(nt);
    let mut h0 = Vec::with_capacity(nt);
    for k in 0..nt {
        let a = n10_at(data, k, &dg1, &d2g1)?;
        let n2 = n20_at(data, k, &d2g2)?;
        let n3 = red.u0data.j3_apply(&a)?;
        let nn0 = n2 - psi_pair(&n3, red, grid, &data.meas.psi)?;
        let hk = nn0 / red.j.j1;
        let qk: Vec<f64> = (0..n3.len()).map(|i| red.j.j2[i] * hk + n3[i]).collect();
        n10.values.row_mut(k).assign(&ndarray::ArrayView1::from(&a));
        n30.values.row_mut(k).assign(&ndarray::ArrayView1::from(&n3));
        q0.values.row_mut(k).assign(&ndarray::ArrayView1::from(&qk));
        n20.push(n2);
        n0.push(nn0);
        h0.push(hk);
    }
    Ok(SourceProfiles { n10, n20, n30, n0, h0, q0 })
}

/// `N₂` and `N₃` for a state, per time node.
pub fn n2_n3(state: &ReductionState, data: &ProblemData, red: &Reduction) -> Result<(SpaceTimeField, Vec<f64>)> {
    let grid = data.grid();
    let n1 = n1_eval(state, &data.coeffs, &data.time)?;
    let mut n2 = state.q.clone();
    let mut n3 = Vec::with_capacity(n1.len());
    for (k, n1k) in n1.iter().enumerate() {
        let p = phi_apply(&data.meas.lambda, n1k, grid)?;
        let p1 = phi1_apply(&data.meas.lambda, &data.coeffs, &state.v[k])?;
        let diff: Vec<f64> = p.iter().zip(&p1).map(|(a, b)| a - b).collect();
        let n2k = red.u0data.j3_apply(&diff)?;
        let psi1 = psi1_apply(&data.meas, &data.coeffs, &state.v[k], data.bcs)?;
        let val =
            (psi_apply(&data.meas.psi, n1k, grid)? - psi_pair(&n2k, red, grid, &data.meas.psi)? - psi1) / red.j.j1;
        n2.values.row_mut(k).assign(&ndarray::ArrayView1::from(&n2k));
        n3.push(val);
    }
    Ok((n2, n3))
}

/// One sweep `(h, q) ← (h₀ + N₃, q₀ + J₂ N₃ + N₂)`.
pub fn picard_update(
    state: &ReductionState,
    data: &ProblemData,
    red: &Reduction,
) -> Result<(Vec<f64>, SpaceTimeField)> {
    let (n2, n3) = n2_n3(state, data, red)?;
    let p = &red.profiles;
    let h: Vec<f64> = p.h0.iter().zip(&n3).map(|(a, b)| a + b).collect();
    let mut q = p.q0.clone();
    for (k, n3k) in n3.iter().enumerate() {
        for (i, j2) in red.j.j2.iter().enumerate() {
            q.values[[k, i]] += j2 * n3k + n2.values[[k, i]];
        }
    }
    Ok((h, q))
}

/// `sup |h_a - h_b| + sup |q_a - q_b|`.
pub fn sweep_distance(h_a: &[f64], q_a: &SpaceTimeField, h_b: &[f64], q_b: &SpaceTimeField) -> f64 {
    let dh = h_a.iter().zip(h_b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    dh + q_a.max_diff(q_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Dimension;
    use crate::manufactured::{general_problem, GeneralConfig};

    fn problem(n: usize) -> crate::manufactured::GeneralProblem {
        general_problem(&GeneralConfig::new(Dimension::Two, n)).unwrap()
    }

    fn zero_state(data: &ProblemData) -> ReductionState {
        let nt = data.time.n_nodes();
        let v = vec![AngularField::zeros(data.grid()); nt];
        let q = SpaceTimeField::zeros(&data.grid().radial, &data.time);
        ReductionState::new(data, v, vec![0.0; nt], q).unwrap()
    }

    #[test]
    fn n1_trivial_and_zero_at_start() {
        let p = problem(8);
        let d = &p.data;
        let mut st = zero_state(d);
        let n1 = n1_eval(&st, &d.coeffs, &d.time).unwrap();
        assert!(n1.iter().all(|f| f.sup_norm() == 0.0));
        st.v = p.v_true.clone();
        st.h = p.h_true.clone();
        st.q = p.q_true.clone();
        let n1 = n1_eval(&st, &d.coeffs, &d.time).unwrap();
        assert_eq!(n1[0].sup_norm(), 0.0);
        assert!(n1[3].sup_norm() > 0.0);
    }

    #[test]
    fn n1_matches_direct_quadrature() {
        let p = problem(8);
        let d = &p.data;
        let mut st = zero_state(d);
        // v(s) = s w: then -∫₀ᵗ Bv = -t²/2 Bw, exact for the trapezoid rule.
        let w = p.v_true[0].clone();
        st.v = d.time.nodes().iter().map(|&s| w.map(|x| s * x)).collect();
        st.h = vec![1.0; d.time.n_nodes()];
        st.z0 = vec![AngularField::zeros(d.grid()); d.time.n_nodes()];
        let n1 = n1_eval(&st, &d.coeffs, &d.time).unwrap();
        let bw = apply_b(&d.coeffs, &w);
        for (k, &t) in d.time.nodes().iter().enumerate() {
            let oracle = bw.map(|x| -0.5 * t * t * x);
            let err = n1[k].zip_map(&oracle, |a, b| a - b).sup_norm();
            assert!(err <= 1e-12 * (1.0 + bw.sup_norm()), "{k} {err}");
        }
    }

    #[test]
    fn n1_linear_in_h_q() {
        let p = problem(8);
        let d = &p.data;
        let mut a = zero_state(d);
        a.v = p.v_true.clone();
        let mut b = a.clone();
        let mut ab = a.clone();
        a.h = d.time.sample(|t| 1.0 + t);
        a.q = SpaceTimeField::from_fn(&d.grid().radial, &d.time, |t, r| r * t);
        b.h = d.time.sample(|t| t.cos());
        b.q = SpaceTimeField::from_fn(&d.grid().radial, &d.time, |t, r| (r + t).sin());
        ab.h = a.h.iter().zip(&b.h).map(|(x, y)| x + y).collect();
        ab.q.values = &a.q.values + &b.q.values;
        // With v fixed, N₁(v, h, q) - N₁(v, 0, 0) is linear in (h, q).
        let base = n1_eval(&ab.clone_with_zero_hq(), &d.coeffs, &d.time).unwrap();
        let na = n1_eval(&a, &d.coeffs, &d.time).unwrap();
        let nb = n1_eval(&b, &d.coeffs, &d.time).unwrap();
        let nab = n1_eval(&ab, &d.coeffs, &d.time).unwrap();
        for k in 0..na.len() {
            let lhs = &nab[k].values;
            let rhs = &na[k].values + &nb[k].values - &base[k].values;
            let err = (lhs - &rhs).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(err <= 1e-12 * (1.0 + lhs.iter().fold(0.0f64, |m, x| m.max(x.abs()))));
        }
    }

    impl ReductionState {
        fn clone_with_zero_hq(&self) -> Self {
            let mut s = self.clone();
            s.h.iter_mut().for_each(|h| *h = 0.0);
            s.q.values.fill(0.0);
            s
        }
    }

    #[test]
    fn zero_data_gives_zero_profiles() {
        let mut p = problem(8);
        let d = &mut p.data;
        for s in [&mut d.u1, &mut d.du1, &mut d.d2u1, &mut d.df] {
            s.iter_mut().for_each(|f| f.values.fill(0.0));
        }
        d.f0.values.fill(0.0);
        d.g1.values.fill(0.0);
        d.g2.iter_mut().for_each(|g| *g = 0.0);
        let pr = source_profiles(d).unwrap();
        assert_eq!(pr.n10.sup_norm(), 0.0);
        assert_eq!(pr.q0.sup_norm(), 0.0);
        assert!(pr.n20.iter().chain(&pr.n0).chain(&pr.h0).all(|v| *v == 0.0));
    }

    #[test]
    fn homogeneous_sweep_is_fixed() {
        let p = problem(8);
        let d = &p.data;
        let red = Reduction::new(d).unwrap();
        let mut st = zero_state(d);
        st.z0.iter_mut().chain(st.z1.iter_mut()).for_each(|f| f.values.fill(0.0));
        st.h = red.profiles.h0.clone();
        st.q = red.profiles.q0.clone();
        // h, q enter N₁ only against Bv + z₀ and Cv + z₁, both zero.
        let (h, q) = picard_update(&st, d, &red).unwrap();
        assert_eq!(h, red.profiles.h0);
        assert_eq!(q.max_diff(&red.profiles.q0), 0.0);
    }

    #[test]
    fn initial_values_match_k0() {
        use crate::kernel_init::{compute_k0, initial_hq};
        let err = |n: usize| {
            let p = problem(n);
            let d = &p.data;
            let red = Reduction::new(d).unwrap();
            let init = compute_k0(d).unwrap();
            let (h_ref, q_ref) = initial_hq(&init.k0, &d.grid().radial).unwrap();
            let (h, q) = red.initial_values(d).unwrap();
            let dq = q.iter().zip(&q_ref).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            // The sweep reproduces the same pair at t = 0.
            let mut st = zero_state(d);
            st.v = p.v_true.clone();
            st.v[0] = d.v0();
            let (hs, qs) = picard_update(&st, d, &red).unwrap();
            let ds = (hs[0] - h).abs() + qs.row_vec(0).iter().zip(&q).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(ds < 1e-10, "{ds}");
            (h - h_ref).abs() + dq
        };
        let (e1, e2) = (err(8), err(16));
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn truth_is_near_fixed_point_and_sweeps_contract() {
        let residual = |n: usize| {
            let p = problem(n);
            let d = &p.data;
            let red = Reduction::new(d).unwrap();
            let st = ReductionState::new(d, p.v_true.clone(), p.h_true.clone(), p.q_true.clone()).unwrap();
            let (h, q) = picard_update(&st, d, &red).unwrap();
            sweep_distance(&h, &q, &p.h_true, &p.q_true)
        };
        let (r1, r2) = (residual(8), residual(16));
        assert!(r2 < r1 / 3.0, "{r1} {r2}");

        let p = problem(8);
        let d = &p.data;
        let red = Reduction::new(d).unwrap();
        let mut st =
            ReductionState::new(d, p.v_true.clone(), red.profiles.h0.clone(), red.profiles.q0.clone()).unwrap();
        let mut last = f64::INFINITY;
        for _ in 0..3 {
            let (h, q) = picard_update(&st, d, &red).unwrap();
            let dist = sweep_distance(&h, &q, &st.h, &st.q);
            assert!(dist < last, "{dist} {last}");
            last = dist;
            st.h = h;
            st.q = q;
        }
    }
}
