//! Feshbach reduction of `H_k` to the singular set `G`.
//!
//! With `H_{G'G'} = R_{G'G'} Δ_{G'}`, the Schur complement of the `G'` block is
//! `N_{d'} δ + D_{d',d''}` where
//! `D_{d',d''} = w_{d',d''} − Σ_{b,c∈G'} (w_{d',b}/N_b)(R⁻¹)_{bc} w_{c,d''}`.
//! Two independent evaluation paths are provided: the series form through
//! `R⁻¹` ([`Resolvent`]) and dense block elimination of `H_k`
//! ([`Reducer::schur_oracle`]); they agree to rounding.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{Model, ZERO};
use crate::freecurve::{active_tubes, n_full_at, other, sign, w_coord, z_coord, KPoint, I};
use crate::lattice::DualPoint;
use crate::operator::{check_lu, rss_bound, tail_budget, CMat, IndexWindow, RggCertificate, SINGULAR_DENOMINATOR};

type Lu = LU<C, Dyn, Dyn>;

/// A window with the `k`-independent parts of `w` precomputed:
/// `w_{bc}(k) = Q_{bc} − 2 k·Â(b−c)` with `Q_{bc} = q̂(b−c) − 2c·Â(b−c)`.
#[derive(Clone, Debug)]
pub struct Reducer {
    pub model: Model,
    pub window: IndexWindow,
    pts: Vec<[f64; 2]>,
    g_idx: Vec<usize>,
    gp_idx: Vec<usize>,
    q0: CMat,
    a1: CMat,
    a2: CMat,
}

impl Reducer {
    pub fn new(model: &Model, window: IndexWindow) -> Self {
        let lat = &model.lattice;
        let all = &window.all_points;
        let n = all.len();
        let pts: Vec<[f64; 2]> = all.iter().map(|b| lat.point(*b)).collect();
        let g_idx = window.g_set.iter().map(|d| all.binary_search(d).expect("G inside window")).collect();
        let gp_idx = (0..n).filter(|i| !window.g_set.contains(&all[*i])).collect();
        let mut q0 = CMat::zeros(n, n);
        let mut a1 = CMat::zeros(n, n);
        let mut a2 = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let diff = all[i] - all[j];
                let a = model.a.get(diff);
                let q = model.q.get(diff);
                q0[(i, j)] = q - 2.0 * (a[0] * pts[j][0] + a[1] * pts[j][1]);
                a1[(i, j)] = a[0];
                a2[(i, j)] = a[1];
            }
        }
        Reducer { model: model.clone(), window, pts, g_idx, gp_idx, q0, a1, a2 }
    }

    /// The reducer for `G = {0}` (`G = {0, d}`) with the model's window radius.
    pub fn for_g(model: &Model, g: &[DualPoint]) -> Self {
        let w = IndexWindow::around(&model.lattice, g, model.params.window_radius);
        Self::new(model, w)
    }

    pub fn g_set(&self) -> &[DualPoint] {
        &self.window.g_set
    }

    pub fn len(&self) -> usize {
        self.window.all_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.all_points.is_empty()
    }

    fn pos(&self, d: DualPoint) -> Result<usize> {
        self.window
            .all_points
            .binary_search(&d)
            .map_err(|_| Error::InvalidParameter(format!("{d} is not in the index window")))
    }

    /// Position of `d` in `G`.
    pub fn g_pos(&self, d: DualPoint) -> Result<usize> {
        self.window
            .g_set
            .iter()
            .position(|x| *x == d)
            .ok_or_else(|| Error::InvalidParameter(format!("{d} is not in G")))
    }

    /// `N_b(k)` for every window point.
    pub fn denominators(&self, k: &KPoint) -> Vec<C> {
        self.pts.iter().map(|p| n_full_at(*p, k)).collect()
    }

    /// `w(k)` on the window.
    pub fn w_matrix(&self, k: &KPoint) -> CMat {
        &self.q0 - (&self.a1 * (2.0 * k.k1) + &self.a2 * (2.0 * k.k2))
    }

    /// `H_k` on the window.
    pub fn hk(&self, k: &KPoint) -> CMat {
        let mut h = self.w_matrix(k);
        for (i, n) in self.denominators(k).into_iter().enumerate() {
            h[(i, i)] += n;
        }
        h
    }

    /// `∂H_k/∂k_i` on the window: `2(k_i + b_i)δ − 2Â_i(b−c)`.
    pub fn dhk(&self, k: &KPoint, i: usize) -> CMat {
        let mut h = if i == 0 { &self.a1 * C::new(-2.0, 0.0) } else { &self.a2 * C::new(-2.0, 0.0) };
        let ki = if i == 0 { k.k1 } else { k.k2 };
        for (j, p) in self.pts.iter().enumerate() {
            h[(j, j)] += 2.0 * (ki + p[i]);
        }
        h
    }

    /// Factorises `R_{G'G'}(k)` without region checks (used when sampling
    /// holomorphic functions on circles that may leave the tubes).
    pub fn resolvent_unchecked(&self, k: &KPoint) -> Result<Resolvent<'_>> {
        let n_all = self.denominators(k);
        let m = self.gp_idx.len();
        let mut ninv = Vec::with_capacity(m);
        for &i in &self.gp_idx {
            let n = n_all[i];
            if n.norm() < SINGULAR_DENOMINATOR {
                return Err(Error::SingularDenominator { b: self.window.all_points[i], modulus: n.norm() });
            }
            ninv.push(1.0 / n);
        }
        let w = self.w_matrix(k);
        let mut r = CMat::from_fn(m, m, |a, b| w[(self.gp_idx[a], self.gp_idx[b])] * ninv[b]);
        for a in 0..m {
            r[(a, a)] += 1.0;
        }
        let lu = r.clone().lu();
        check_lu(&lu)?;
        Ok(Resolvent { red: self, k: *k, n_all, ninv, w, r, lu })
    }

    /// Factorises `R_{G'G'}(k)` after checking the reduction hypotheses:
    /// `|N_b| ≥ ε|v|` on `G'` and the Neumann certificate `rss_bound < 17/18`.
    pub fn resolvent(&self, k: &KPoint) -> Result<Resolvent<'_>> {
        let bound = rss_bound(&self.model, k);
        if bound >= crate::operator::NEUMANN_LIMIT {
            return Err(Error::CertificateFail { bound });
        }
        self.window.bind(&self.model.lattice, k, self.model.params.epsilon)?;
        self.resolvent_unchecked(k)
    }

    /// The reduced `|G|×|G|` matrix `[N δ + D]` as the Schur complement of
    /// the dense `H_k` with respect to its `G'` block.
    pub fn schur_oracle(&self, k: &KPoint) -> Result<CMat> {
        Ok(self.schur_oracle_with_derivatives(k, false)?.0)
    }

    /// The Schur complement and, optionally, its `k1` and `k2` derivatives
    /// `dS = dH_GG − dH_GG' X − Y dH_G'G + Y dH_G'G' X` with
    /// `X = H'⁻¹H_G'G`, `Y = H_GG'H'⁻¹`.
    pub fn schur_oracle_with_derivatives(&self, k: &KPoint, derivs: bool) -> Result<(CMat, Option<[CMat; 2]>)> {
        let h = self.hk(k);
        let (g, gp) = (&self.g_idx, &self.gp_idx);
        let hgg = h.select_rows(g.iter()).select_columns(g.iter());
        let hgp = h.select_rows(g.iter()).select_columns(gp.iter());
        let hpg = h.select_rows(gp.iter()).select_columns(g.iter());
        let hpp = h.select_rows(gp.iter()).select_columns(gp.iter());
        let lu = hpp.clone().lu();
        check_lu(&lu)?;
        let x = lu.solve(&hpg).ok_or_else(|| Error::NumericallySingular("H_G'G' solve".into()))?;
        let s = &hgg - &hgp * &x;
        if !derivs {
            return Ok((s, None));
        }
        let lut = hpp.transpose().lu();
        let y =
            lut.solve(&hgp.transpose()).ok_or_else(|| Error::NumericallySingular("H_G'G'^T solve".into()))?.transpose();
        let mut ds = Vec::with_capacity(2);
        for i in 0..2 {
            let dh = self.dhk(k, i);
            let dgg = dh.select_rows(g.iter()).select_columns(g.iter());
            let dgp = dh.select_rows(g.iter()).select_columns(gp.iter());
            let dpg = dh.select_rows(gp.iter()).select_columns(g.iter());
            let dpp = dh.select_rows(gp.iter()).select_columns(gp.iter());
            ds.push(dgg - &dgp * &x - &y * &dpg + &y * (dpp * &x));
        }
        let [d1, d2]: [CMat; 2] = ds.try_into().expect("two derivatives");
        Ok((s, Some([d1, d2])))
    }

    /// Smallest singular value of `H_k` on the window and the largest one
    /// (the scale used by kernel tolerances).
    pub fn kernel_check(&self, k: &KPoint) -> (f64, f64) {
        let h = self.hk(k);
        let sv = h.svd(false, false).singular_values;
        (sv.min(), sv.max())
    }

    /// Estimated truncation error carried by values computed on this window.
    pub fn tail_budget(&self, k: &KPoint) -> f64 {
        tail_budget(&self.model, &self.window, k)
    }

    /// Requires the set of tubes containing `k` to be exactly `G`, and `|v| > R`.
    pub fn check_region(&self, k: &KPoint) -> Result<()> {
        let p = &self.model.params;
        if !(k.v_norm() > p.radius_r) {
            return Err(Error::RegionViolation(format!(
                "|v| = {:.4} does not exceed R = {:.4}",
                k.v_norm(),
                p.radius_r
            )));
        }
        let tubes = active_tubes(&self.model.lattice, k, p.epsilon, f64::INFINITY)?;
        let mut bs: Vec<DualPoint> = tubes.iter().map(|t| t.b).collect();
        bs.dedup();
        let mut g = self.window.g_set.clone();
        g.sort();
        if bs != g {
            return Err(Error::RegionViolation(format!("k lies in the tubes of {bs:?}, expected exactly {g:?}")));
        }
        Ok(())
    }

    /// `N_0(k) + D_{0,0}(k)` for `G = {0}`, with region checks.
    pub fn f_regular(&self, k: &KPoint) -> Result<C> {
        if self.window.g_set != [DualPoint::ZERO] {
            return Err(Error::InvalidParameter("f_regular needs G = {0}".into()));
        }
        self.check_region(k)?;
        let res = self.resolvent(k)?;
        Ok(res.n(DualPoint::ZERO)? + res.d_entry(DualPoint::ZERO, DualPoint::ZERO)?)
    }

    /// `(N_0 + D_00)(N_d + D_dd) − D_0d D_d0` for `G = {0, d}`, with region checks.
    pub fn f_handle(&self, k: &KPoint) -> Result<C> {
        if self.window.g_set.len() != 2 {
            return Err(Error::InvalidParameter("f_handle needs |G| = 2".into()));
        }
        self.check_region(k)?;
        let res = self.resolvent(k)?;
        res.reduced_det()
    }
}

/// `R_{G'G'}(k)` factorised for one `k`; all coefficient sums at this `k`
/// share the factorisation.
pub struct Resolvent<'a> {
    pub red: &'a Reducer,
    pub k: KPoint,
    n_all: Vec<C>,
    ninv: Vec<C>,
    w: CMat,
    r: CMat,
    lu: Lu,
}

impl<'a> Resolvent<'a> {
    /// `N_d(k)` for a point of the window.
    pub fn n(&self, d: DualPoint) -> Result<C> {
        Ok(self.n_all[self.red.pos(d)?])
    }

    /// `R_{G'G'}` itself.
    pub fn r_matrix(&self) -> &CMat {
        &self.r
    }

    /// `1/N_b` on `G'`.
    pub fn inverse_denominators(&self) -> &[C] {
        &self.ninv
    }

    /// Dense `R⁻¹` on `G'`.
    pub fn inverse(&self) -> Result<CMat> {
        self.lu.try_inverse().ok_or_else(|| Error::NumericallySingular("R inverse".into()))
    }

    pub fn certificate(&self) -> Result<RggCertificate> {
        let m = self.r.nrows();
        let id = CMat::identity(m, m);
        let inv = self.inverse()?;
        let r_minus_i = crate::operator::schur_norm(&(&self.r - &id));
        let bound = rss_bound(&self.red.model, &self.k);
        Ok(RggCertificate {
            rss_bound: bound,
            r_minus_i,
            rinv_minus_i: crate::operator::schur_norm(&(inv - id)),
            inverse_bound: 18.0 * r_minus_i,
            certified: bound < crate::operator::NEUMANN_LIMIT,
        })
    }

    /// `R⁻¹ v` for `v` indexed by `G'`.
    pub fn solve(&self, v: &DVector<C>) -> Result<DVector<C>> {
        self.lu.solve(v).ok_or_else(|| Error::NumericallySingular("R solve".into()))
    }

    /// `Σ_{b,c∈G'} (u_b/N_b)(R⁻¹)_{bc} v_c` for vectors indexed by `G'`.
    pub fn phi_vec(&self, u: &[C], v: &[C]) -> Result<C> {
        let x = self.solve(&DVector::from_column_slice(v))?;
        Ok(u.iter().zip(&self.ninv).zip(x.iter()).map(|((u, n), x)| u * n * x).sum())
    }

    /// Many `phi_vec` sums sharing one multi-right-hand-side solve:
    /// result `[i][j] = Φ(us[i], vs[j])`.
    pub fn phi_matrix(&self, us: &[Vec<C>], vs: &[Vec<C>]) -> Result<Vec<Vec<C>>> {
        let m = self.ninv.len();
        let rhs = DMatrix::from_fn(m, vs.len(), |a, j| vs[j][a]);
        let x = self.lu.solve(&rhs).ok_or_else(|| Error::NumericallySingular("R solve".into()))?;
        Ok(us
            .iter()
            .map(|u| (0..vs.len()).map(|j| (0..m).map(|a| u[a] * self.ninv[a] * x[(a, j)]).sum()).collect())
            .collect())
    }

    /// `Φ_{d',d''}(k) = Σ_{b,c∈G'} f(d'−b)/N_b (R⁻¹)_{bc} g(c−d'')`.
    pub fn phi_sum(
        &self,
        f: impl Fn(DualPoint) -> C,
        g: impl Fn(DualPoint) -> C,
        dp: DualPoint,
        dpp: DualPoint,
    ) -> Result<C> {
        let pts = &self.red.window.gprime;
        let u: Vec<C> = pts.iter().map(|b| f(dp - *b)).collect();
        let v: Vec<C> = pts.iter().map(|c| g(*c - dpp)).collect();
        self.phi_vec(&u, &v)
    }

    fn row(&self, mat: &CMat, d: DualPoint) -> Result<Vec<C>> {
        let i = self.red.pos(d)?;
        Ok(self.red.gp_idx.iter().map(|&j| mat[(i, j)]).collect())
    }

    fn col(&self, mat: &CMat, d: DualPoint) -> Result<Vec<C>> {
        let j = self.red.pos(d)?;
        Ok(self.red.gp_idx.iter().map(|&i| mat[(i, j)]).collect())
    }

    /// `D_{d',d''}(k)` by the series form.
    pub fn d_entry(&self, dp: DualPoint, dpp: DualPoint) -> Result<C> {
        let (i, j) = (self.red.pos(dp)?, self.red.pos(dpp)?);
        let u = self.row(&self.w, dp)?;
        let v = self.col(&self.w, dpp)?;
        Ok(self.w[(i, j)] - self.phi_vec(&u, &v)?)
    }

    /// `[N δ + D]` on `G` by the series form.
    pub fn reduced_matrix(&self) -> Result<CMat> {
        let g = &self.red.window.g_set;
        let us: Vec<Vec<C>> = g.iter().map(|d| self.row(&self.w, *d)).collect::<Result<_>>()?;
        let vs: Vec<Vec<C>> = g.iter().map(|d| self.col(&self.w, *d)).collect::<Result<_>>()?;
        let phi = self.phi_matrix(&us, &vs)?;
        let mut out = CMat::zeros(g.len(), g.len());
        for (a, &da) in g.iter().enumerate() {
            for (b, &db) in g.iter().enumerate() {
                let (i, j) = (self.red.pos(da)?, self.red.pos(db)?);
                let n = if a == b { self.n_all[i] } else { ZERO };
                out[(a, b)] = n + self.w[(i, j)] - phi[a][b];
            }
        }
        Ok(out)
    }

    /// `det [N δ + D]` for `|G| = 2` (the handle equation), or the single
    /// entry when `|G| = 1`.
    pub fn reduced_det(&self) -> Result<C> {
        let m = self.reduced_matrix()?;
        Ok(match m.nrows() {
            1 => m[(0, 0)],
            2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
            _ => m.determinant(),
        })
    }

    /// The quadratic-in-`k` coefficients of `D_{d',d''}`.
    pub fn bc_coefficients(&self, dp: DualPoint, dpp: DualPoint) -> Result<CoefficientSet> {
        let red = self.red;
        let (i, j) = (red.pos(dp)?, red.pos(dpp)?);
        let us = vec![self.row(&red.a1, dp)?, self.row(&red.a2, dp)?, self.row(&red.q0, dp)?];
        let vs = vec![self.col(&red.a1, dpp)?, self.col(&red.a2, dpp)?, self.col(&red.q0, dpp)?];
        let p = self.phi_matrix(&us, &vs)?;
        let a = [red.a1[(i, j)], red.a2[(i, j)]];
        Ok(CoefficientSet {
            b11: -4.0 * p[0][0],
            b22: -4.0 * p[1][1],
            b12_plus_21: -4.0 * (p[0][1] + p[1][0]),
            c1: -2.0 * a[0] + 2.0 * p[2][0] + 2.0 * p[0][2],
            c2: -2.0 * a[1] + 2.0 * p[2][1] + 2.0 * p[1][2],
            c0: red.q0[(i, j)] - p[2][2],
        })
    }

    /// The `w, z` coefficients of `D_{d',d''}` around `d'` for the index `ν`.
    pub fn jklm(&self, dp: DualPoint, dpp: DualPoint, nu: u8) -> Result<JklmSet> {
        let bc = self.bc_coefficients(dp, dpp)?;
        Ok(jklm_from_bc(&bc, self.red.model.lattice.point(dp), nu))
    }

    /// The frame `(w_{ν,d'}, z_{ν,d'})` at this `k`.
    pub fn wz(&self, nu: u8, dp: DualPoint) -> WzFrame {
        let lat = &self.red.model.lattice;
        WzFrame { nu, dprime: dp, w: w_coord(lat, nu, dp, &self.k), z: z_coord(lat, nu, dp, &self.k) }
    }
}

/// Coefficients of `D_{d',d''} = B11 k1² + B22 k2² + (B12+B21) k1k2 + C1 k1 + C2 k2 + C0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub b11: C,
    pub b22: C,
    pub b12_plus_21: C,
    pub c1: C,
    pub c2: C,
    pub c0: C,
}

impl CoefficientSet {
    pub fn reassemble(&self, k: &KPoint) -> C {
        let (k1, k2) = (k.k1, k.k2);
        self.b11 * k1 * k1 + self.b22 * k2 * k2 + self.b12_plus_21 * k1 * k2 + self.c1 * k1 + self.c2 * k2 + self.c0
    }
}

/// The frame `w = k1+d'1 + i s_ν (k2+d'2)`, `z = k1+d'1 − i s_ν (k2+d'2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WzFrame {
    pub nu: u8,
    pub dprime: DualPoint,
    pub w: C,
    pub z: C,
}

/// Coefficients of `D = J_{ν'} w² + J_ν z² + K wz + L_{ν'} w + L_ν z + M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JklmSet {
    pub nu: u8,
    pub j_nu: C,
    pub j_nuprime: C,
    pub k: C,
    pub l_nu: C,
    pub l_nuprime: C,
    pub m: C,
}

impl JklmSet {
    pub fn reassemble(&self, w: C, z: C) -> C {
        self.j_nuprime * w * w + self.j_nu * z * z + self.k * w * z + self.l_nuprime * w + self.l_nu * z + self.m
    }
}

/// `J_μ = ¼(B11 − B22 + i s_μ B×)`, `K = ½(B11 + B22)`,
/// `L_μ = −d'1 B11 − i s_μ d'2 B22 − ½(d'2 + i s_μ d'1) B× + ½(C1 + i s_μ C2)`,
/// `M = d'1² B11 + d'2² B22 + d'1 d'2 B× − d'1 C1 − d'2 C2 + C0`.
pub fn jklm_from_bc(bc: &CoefficientSet, dp: [f64; 2], nu: u8) -> JklmSet {
    let j = |mu: u8| 0.25 * (bc.b11 - bc.b22 + I * sign(mu) * bc.b12_plus_21);
    let l = |mu: u8| {
        let s = sign(mu);
        -dp[0] * bc.b11 - I * s * dp[1] * bc.b22 - 0.5 * (dp[1] + I * s * dp[0]) * bc.b12_plus_21
            + 0.5 * (bc.c1 + I * s * bc.c2)
    };
    let m = dp[0] * dp[0] * bc.b11 + dp[1] * dp[1] * bc.b22 + dp[0] * dp[1] * bc.b12_plus_21
        - dp[0] * bc.c1
        - dp[1] * bc.c2
        + bc.c0;
    JklmSet {
        nu,
        j_nu: j(nu),
        j_nuprime: j(other(nu)),
        k: 0.5 * (bc.b11 + bc.b22),
        l_nu: l(nu),
        l_nuprime: l(other(nu)),
        m,
    }
}
