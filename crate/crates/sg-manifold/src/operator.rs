//! The constrained linearization around the boosted kink at one velocity u:
//!
//!   row 1:  u ∂ξθ − ψ + λ ∂uθ0
//!   row 2:  −∂x²θ + cos(θ_K(γ(x−ξ))) θ + u ∂ξψ + λ ∂uψ0
//!   per-ξ:  weighted x-quadrature of θ·θ_K'(γ(x−ξ)) + ψ·(−uγθ_K''(γ(x−ξ))) = 0
//!
//! discretized with centered differences and homogeneous Dirichlet values for
//! θ, ψ on the grid boundary and for λ at the two end ξ-nodes. The square
//! system has 2·Nξ·Nx + Nξ rows. `apply` evaluates the operator matrix-free;
//! `solve` goes through a direct factorization.
//!
//! Factorization layout: eliminating ψ row-by-row (row 1 is diagonal in ψ)
//! leaves a θ-system whose ξ-coupling comes only from u²∂ξ(∂ξ·), i.e. ξ-nodes
//! of equal parity two steps apart. Ordering θ by ξ-line therefore yields two
//! independent block-tridiagonal chains with constant scalar off-diagonal
//! coupling e = u²/(2hξ)², plus a border of λ unknowns against the
//! orthogonality rows. We run a block-Thomas pass with stored block inverses
//! and close the border with a dense Schur complement. One step of iterative
//! refinement against the matrix-free operator polishes the result to solver
//! tolerance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, GridFn2D, PairZ, TripleY};
use crate::kink::KinkFields;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub alpha: u32,
    /// Carry the (1+ξ²+x²)^α weight inside the orthogonality quadrature.
    pub orthogonality_weighted: bool,
    /// Relative residual demanded from `solve` after refinement.
    pub solve_tol: f64,
    /// Crude condition estimate above which assembly refuses to proceed.
    pub condition_bound: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            alpha: 1,
            orthogonality_weighted: true,
            solve_tol: 1e-10,
            condition_bound: 1e13,
        }
    }
}

struct Chain {
    /// Global ξ indices along the chain, ascending.
    xi_idx: Vec<usize>,
    /// Stored inverses of the Schur blocks S_k.
    inv: Vec<DMatrix<f64>>,
    /// Scalar coupling between consecutive chain blocks.
    e: f64,
}

impl Chain {
    /// Solve the chain system in place; `rhs[k]` holds the block for chain
    /// position k, one column per right-hand side.
    fn solve(&self, rhs: &mut [DMatrix<f64>]) {
        let m = self.xi_idx.len();
        debug_assert_eq!(rhs.len(), m);
        // forward: z_k = b_k − e·Inv_{k−1} z_{k−1}
        for k in 1..m {
            let prev = &self.inv[k - 1] * &rhs[k - 1];
            rhs[k] -= prev * self.e;
        }
        // backward: x_last = Inv z; x_k = Inv_k (z_k − e x_{k+1})
        rhs[m - 1] = &self.inv[m - 1] * &rhs[m - 1];
        for k in (0..m - 1).rev() {
            let corr = &rhs[k + 1] * self.e;
            rhs[k] -= corr;
            rhs[k] = &self.inv[k] * &rhs[k];
        }
    }
}

pub struct OperatorHandle {
    u: f64,
    grids: Arc<Grid2D>,
    opts: SolverOptions,
    kf: KinkFields,
    /// Quadrature × weight factor of the orthogonality rows, per node.
    wt: GridFn2D,
    chains: Vec<Chain>,
    border_lu: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    cond_est: f64,
}

impl OperatorHandle {
    /// Assemble and factor the operator at velocity `u`.
    pub fn assemble(u: f64, grids: Arc<Grid2D>, opts: SolverOptions) -> Result<Self> {
        if u.abs() >= 1.0 {
            return Err(Error::OutOfRange(format!("|u| = {} must be < 1", u.abs())));
        }
        let kf = KinkFields::new(grids.clone(), u)?;
        let alpha = opts.alpha;
        let weighted = opts.orthogonality_weighted;
        let wt = GridFn2D::from_fn(grids.clone(), |xi, x| {
            if weighted {
                (1.0 + xi * xi + x * x).powi(alpha as i32)
            } else {
                1.0
            }
        });
        // fold the x-quadrature weights in once
        let mut wt = wt;
        for i in 0..grids.xi.n() {
            for j in 0..grids.x.n() {
                *wt.at_mut(i, j) *= grids.x.quad_weight(j);
            }
        }

        let nxi = grids.xi.n();
        let nx = grids.x.n();
        let nx_int = nx - 2;
        let h_xi = grids.xi.h();
        let h_x = grids.x.h();
        let tr = u / (2.0 * h_xi);
        let e = tr * tr;

        let mut pivot_min = f64::INFINITY;
        let mut pivot_max = 0.0_f64;

        // the two parity chains over interior ξ indices
        let mut chains = Vec::with_capacity(2);
        for parity in [1usize, 0] {
            let xi_idx: Vec<usize> = (1..nxi - 1).filter(|i| i % 2 == parity).collect();
            if xi_idx.is_empty() {
                continue;
            }
            let mut inv: Vec<DMatrix<f64>> = Vec::with_capacity(xi_idx.len());
            for (k, &i) in xi_idx.iter().enumerate() {
                let neighbors = (i >= 2) as u32 + (i + 2 <= nxi - 1) as u32;
                // count of interior ψ-lines feeding this row
                let cnt = ((i - 1 >= 1) as u32 + (i + 1 <= nxi - 2) as u32) as f64;
                debug_assert!(neighbors >= 1);
                let mut t = DMatrix::zeros(nx_int, nx_int);
                for jj in 0..nx_int {
                    let j = jj + 1;
                    t[(jj, jj)] = 2.0 / (h_x * h_x) + kf.v_pot.at(i, j) - e * cnt;
                    if jj > 0 {
                        t[(jj, jj - 1)] = -1.0 / (h_x * h_x);
                    }
                    if jj + 1 < nx_int {
                        t[(jj, jj + 1)] = -1.0 / (h_x * h_x);
                    }
                }
                if k > 0 {
                    t -= &inv[k - 1] * (e * e);
                }
                let lu = t.lu();
                let udiag = lu.u();
                for d in 0..nx_int {
                    let p = udiag[(d, d)].abs();
                    pivot_min = pivot_min.min(p);
                    pivot_max = pivot_max.max(p);
                }
                let sinv = lu.try_inverse().ok_or_else(|| {
                    Error::numerical(
                        "operator-factorization",
                        None,
                        format!("singular chain block at xi index {i} (u = {u})"),
                    )
                })?;
                inv.push(sinv);
            }
            chains.push(Chain { xi_idx, inv, e });
        }

        let mut handle = Self {
            u,
            grids: grids.clone(),
            opts,
            kf,
            wt,
            chains,
            // placeholder, replaced below
            border_lu: DMatrix::identity(1, 1).lu(),
            cond_est: 0.0,
        };

        // border Schur complement over the interior λ unknowns
        let ni = nxi - 2;
        let mut schur = DMatrix::zeros(ni, ni);
        // G diagonal: ∂(constraint_i)/∂λ(i) = Σ_j wt·b·t2θ(i,j)
        for i in 1..nxi - 1 {
            let mut gii = 0.0;
            for j in 0..nx {
                gii += handle.wt.at(i, j) * handle.kf.con_b.at(i, j) * handle.kf.t2_theta.at(i, j);
            }
            schur[(i - 1, i - 1)] = gii;
        }
        // subtract C P^{-1} M, processed in column batches
        const BATCH: usize = 64;
        let mut col = 0;
        while col < ni {
            let width = BATCH.min(ni - col);
            let mut fields = vec![0.0; nxi * nx * width];
            for c in 0..width {
                let lam_index = col + c + 1; // global ξ index of this λ column
                let mut lam = vec![0.0; nxi];
                lam[lam_index] = 1.0;
                let field = handle.lambda_columns(&lam);
                for (dst, src) in fields[c * nxi * nx..(c + 1) * nxi * nx]
                    .iter_mut()
                    .zip(field.iter())
                {
                    *dst = *src;
                }
            }
            let solved = handle.core_solve_multi(&fields, width);
            for c in 0..width {
                let theta = &solved[c * nxi * nx..(c + 1) * nxi * nx];
                let cy = handle.constraint_theta_part(theta);
                for r in 0..ni {
                    schur[(r, col + c)] -= cy[r];
                }
            }
            col += width;
        }
        let lu = schur.lu();
        let udiag = lu.u();
        for d in 0..ni {
            let p = udiag[(d, d)].abs();
            pivot_min = pivot_min.min(p);
            pivot_max = pivot_max.max(p);
        }
        handle.border_lu = lu;
        handle.cond_est = if pivot_min > 0.0 {
            pivot_max / pivot_min
        } else {
            f64::INFINITY
        };
        if handle.cond_est > handle.opts.condition_bound {
            return Err(Error::IllConditioned {
                achieved: handle.cond_est,
                tol: handle.opts.condition_bound,
                context: format!("factorization pivot-ratio estimate at u = {u}"),
            });
        }
        Ok(handle)
    }

    #[inline]
    pub fn u(&self) -> f64 {
        self.u
    }

    #[inline]
    pub fn grids(&self) -> &Arc<Grid2D> {
        &self.grids
    }

    #[inline]
    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn kink_fields(&self) -> &KinkFields {
        &self.kf
    }

    /// Row count of the conceptual square system: 2·Nξ·Nx + Nξ.
    pub fn system_size(&self) -> usize {
        2 * self.grids.len() + self.grids.xi.n()
    }

    /// Pivot-ratio estimate gathered during factorization.
    pub fn condition_estimate(&self) -> f64 {
        self.cond_est
    }

    /// Matrix-free forward operator. Interior rows carry the discretized
    /// operator; boundary rows return the Dirichlet values themselves.
    /// Orthogonality rows are membership conditions and not part of the range.
    pub fn apply(&self, y: &TripleY) -> Result<PairZ> {
        if !y.theta.same_grid(&self.kf.v_pot) {
            return Err(Error::ShapeMismatch("apply: grid mismatch".into()));
        }
        let g = &self.grids;
        let (nxi, nx) = (g.xi.n(), g.x.n());
        let (h_xi, h_x) = (g.xi.h(), g.x.h());
        let u = self.u;
        let mut out = PairZ::zeros(g.clone());
        for i in 0..nxi {
            for j in 0..nx {
                if i == 0 || i == nxi - 1 || j == 0 || j == nx - 1 {
                    *out.v.at_mut(i, j) = y.theta.at(i, j);
                    *out.w.at_mut(i, j) = y.psi.at(i, j);
                    continue;
                }
                let dxi_theta = (y.theta.at(i + 1, j) - y.theta.at(i - 1, j)) / (2.0 * h_xi);
                let dxi_psi = (y.psi.at(i + 1, j) - y.psi.at(i - 1, j)) / (2.0 * h_xi);
                let dxx_theta = (y.theta.at(i, j + 1) - 2.0 * y.theta.at(i, j)
                    + y.theta.at(i, j - 1))
                    / (h_x * h_x);
                let lam = y.lambda.at(i);
                *out.v.at_mut(i, j) =
                    u * dxi_theta - y.psi.at(i, j) + lam * self.kf.t2_theta.at(i, j);
                *out.w.at_mut(i, j) = -dxx_theta
                    + self.kf.v_pot.at(i, j) * y.theta.at(i, j)
                    + u * dxi_psi
                    + lam * self.kf.t2_psi.at(i, j);
            }
        }
        Ok(out)
    }

    /// Per-ξ orthogonality quadrature Σ_j wt(i,j)·[θ·a + ψ·b](i,j).
    pub fn constraint_values(&self, theta: &GridFn2D, psi: &GridFn2D) -> Vec<f64> {
        let g = &self.grids;
        let mut out = vec![0.0; g.xi.n()];
        for i in 0..g.xi.n() {
            let mut acc = 0.0;
            for j in 0..g.x.n() {
                acc += self.wt.at(i, j)
                    * (theta.at(i, j) * self.kf.con_a.at(i, j)
                        + psi.at(i, j) * self.kf.con_b.at(i, j));
            }
            out[i] = acc;
        }
        out
    }

    /// Solve the bordered system for a right-hand side in the range space,
    /// with homogeneous orthogonality rows. The result satisfies the interior
    /// equations and every constraint row to solver tolerance.
    pub fn solve(&self, rhs: &PairZ) -> Result<TripleY> {
        if !rhs.v.same_grid(&self.kf.v_pot) {
            return Err(Error::ShapeMismatch("solve: grid mismatch".into()));
        }
        let nxi = self.grids.xi.n();
        let zeros_c = vec![0.0; nxi];
        let mut sol = self.solve_raw(rhs.v.values(), rhs.w.values(), &zeros_c)?;

        let scale = rhs.v.max_abs() + rhs.w.max_abs();
        if scale == 0.0 {
            return Ok(sol);
        }
        for _ in 0..2 {
            let (r1, r2, rc) = self.residual_of(&sol, rhs);
            if max_abs(&r1).max(max_abs(&r2)).max(max_abs(&rc)) / scale <= self.opts.solve_tol {
                return Ok(sol);
            }
            let corr = self.solve_raw(&r1, &r2, &rc)?;
            sol.axpy(1.0, &corr);
        }
        let (r1, r2, rc) = self.residual_of(&sol, rhs);
        let achieved = max_abs(&r1).max(max_abs(&r2)).max(max_abs(&rc)) / scale;
        if achieved <= self.opts.solve_tol {
            Ok(sol)
        } else {
            Err(Error::IllConditioned {
                achieved,
                tol: self.opts.solve_tol,
                context: format!("solve at u = {}", self.u),
            })
        }
    }

    /// Full-system residual of a candidate solution: interior rows of both
    /// equation blocks plus the orthogonality rows.
    fn residual_of(&self, y: &TripleY, rhs: &PairZ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let applied = self.apply(y).expect("grids verified");
        let nxi = self.grids.xi.n();
        let nx = self.grids.x.n();
        let mut r1 = vec![0.0; nxi * nx];
        let mut r2 = vec![0.0; nxi * nx];
        for i in 1..nxi - 1 {
            for j in 1..nx - 1 {
                let idx = i * nx + j;
                r1[idx] = rhs.v.values()[idx] - applied.v.values()[idx];
                r2[idx] = rhs.w.values()[idx] - applied.w.values()[idx];
            }
        }
        let mut rc = self.constraint_values(&y.theta, &y.psi);
        for v in &mut rc {
            *v = -*v;
        }
        rc[0] = 0.0;
        rc[nxi - 1] = 0.0;
        (r1, r2, rc)
    }

    /// One direct pass through the factorization (no refinement). `con_rhs`
    /// holds the right-hand side of the orthogonality rows per ξ-node.
    fn solve_raw(&self, f1: &[f64], f2: &[f64], con_rhs: &[f64]) -> Result<TripleY> {
        let g = &self.grids;
        let (nxi, nx) = (g.xi.n(), g.x.n());
        let h_xi = g.xi.h();
        let tr = self.u / (2.0 * h_xi);
        let ni = nxi - 2;

        // reduced right-hand side r = f2 + u Dξ f1 (boundary-aware)
        let mut red = vec![0.0; nxi * nx];
        for i in 1..nxi - 1 {
            for j in 1..nx - 1 {
                let mut v = f2[i * nx + j];
                if i + 1 <= nxi - 2 {
                    v += tr * f1[(i + 1) * nx + j];
                }
                if i - 1 >= 1 {
                    v -= tr * f1[(i - 1) * nx + j];
                }
                red[i * nx + j] = v;
            }
        }

        let y = self.core_solve_multi(&red, 1);

        // border right-hand side: g + Σ wt·b·f1 − C y
        let cy = self.constraint_theta_part(&y);
        let mut rhs_b = DVector::zeros(ni);
        for i in 1..nxi - 1 {
            let mut acc = con_rhs[i];
            for j in 0..nx {
                acc += self.wt.at(i, j) * self.kf.con_b.at(i, j) * f1[i * nx + j];
            }
            rhs_b[i - 1] = acc - cy[i - 1];
        }
        let lam_int = self.border_lu.solve(&rhs_b).ok_or_else(|| {
            Error::numerical(
                "operator-solve",
                None,
                format!("border Schur solve failed at u = {}", self.u),
            )
        })?;

        let mut lam = vec![0.0; nxi];
        for i in 1..nxi - 1 {
            lam[i] = lam_int[i - 1];
        }
        let mcols = self.lambda_columns(&lam);
        let w = self.core_solve_multi(&mcols, 1);

        let mut theta = vec![0.0; nxi * nx];
        for idx in 0..nxi * nx {
            theta[idx] = y[idx] - w[idx];
        }

        // back-substitute ψ
        let mut psi = vec![0.0; nxi * nx];
        for i in 1..nxi - 1 {
            for j in 1..nx - 1 {
                let dxi = (theta[(i + 1) * nx + j] - theta[(i - 1) * nx + j]) / (2.0 * h_xi);
                psi[i * nx + j] =
                    self.u * dxi + lam[i] * self.kf.t2_theta.at(i, j) - f1[i * nx + j];
            }
        }

        Ok(TripleY {
            theta: GridFn2D::from_values(g.clone(), theta)?,
            psi: GridFn2D::from_values(g.clone(), psi)?,
            lambda: crate::grid::GridFn1D::from_values(Arc::new(g.xi.clone()), lam)?,
        })
    }

    /// Apply the λ-to-θ-equation border columns: out(i,j) = λ(i)·t2ψ(i,j)
    /// + tr·(λ(i+1)·t2θ(i+1,j) − λ(i−1)·t2θ(i−1,j)) over interior rows.
    fn lambda_columns(&self, lam: &[f64]) -> Vec<f64> {
        let g = &self.grids;
        let (nxi, nx) = (g.xi.n(), g.x.n());
        let tr = self.u / (2.0 * g.xi.h());
        let mut out = vec![0.0; nxi * nx];
        for i in 1..nxi - 1 {
            for j in 1..nx - 1 {
                let mut v = lam[i] * self.kf.t2_psi.at(i, j);
                if i + 1 <= nxi - 2 {
                    v += tr * lam[i + 1] * self.kf.t2_theta.at(i + 1, j);
                }
                if i - 1 >= 1 {
                    v -= tr * lam[i - 1] * self.kf.t2_theta.at(i - 1, j);
                }
                out[i * nx + j] = v;
            }
        }
        out
    }

    /// θ-part of the orthogonality rows in the reduced system:
    /// Σ_j wt·a·θ(i,j) + tr·Σ_j wt·b·(θ(i+1,j) − θ(i−1,j)), per interior i.
    fn constraint_theta_part(&self, theta: &[f64]) -> Vec<f64> {
        let g = &self.grids;
        let (nxi, nx) = (g.xi.n(), g.x.n());
        let tr = self.u / (2.0 * g.xi.h());
        let mut out = vec![0.0; nxi - 2];
        for i in 1..nxi - 1 {
            let mut acc = 0.0;
            for j in 0..nx {
                let w = self.wt.at(i, j);
                acc += w * self.kf.con_a.at(i, j) * theta[i * nx + j];
                let mut dxi = 0.0;
                if i + 1 <= nxi - 1 {
                    dxi += theta[(i + 1) * nx + j];
                }
                if i >= 1 {
                    dxi -= theta[(i - 1) * nx + j];
                }
                acc += w * self.kf.con_b.at(i, j) * tr * dxi;
            }
            out[i - 1] = acc;
        }
        out
    }

    /// Solve the ψ-eliminated θ-core for `width` interleaved right-hand
    /// sides stored as full-grid arrays (boundary entries ignored).
    fn core_solve_multi(&self, rhs_fields: &[f64], width: usize) -> Vec<f64> {
        let g = &self.grids;
        let (nxi, nx) = (g.xi.n(), g.x.n());
        let nx_int = nx - 2;
        let field_len = nxi * nx;
        let mut out = vec![0.0; field_len * width];
        for chain in &self.chains {
            let mut blocks: Vec<DMatrix<f64>> = chain
                .xi_idx
                .iter()
                .map(|&i| {
                    DMatrix::from_fn(nx_int, width, |jj, c| {
                        rhs_fields[c * field_len + i * nx + jj + 1]
                    })
                })
                .collect();
            chain.solve(&mut blocks);
            for (k, &i) in chain.xi_idx.iter().enumerate() {
                for c in 0..width {
                    for jj in 0..nx_int {
                        out[c * field_len + i * nx + jj + 1] = blocks[k][(jj, c)];
                    }
                }
            }
        }
        out
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Matrix-free forward operator without a factorization: assembles only the
/// closed-form ingredient fields. Interior rows carry the discretized
/// operator, boundary rows the Dirichlet values.
pub fn apply_operator(u: f64, y: &TripleY) -> Result<PairZ> {
    let grids = y.theta.grid().clone();
    let kf = KinkFields::new(grids.clone(), u)?;
    let g = &grids;
    let (nxi, nx) = (g.xi.n(), g.x.n());
    let (h_xi, h_x) = (g.xi.h(), g.x.h());
    let mut out = PairZ::zeros(g.clone());
    for i in 0..nxi {
        for j in 0..nx {
            if i == 0 || i == nxi - 1 || j == 0 || j == nx - 1 {
                *out.v.at_mut(i, j) = y.theta.at(i, j);
                *out.w.at_mut(i, j) = y.psi.at(i, j);
                continue;
            }
            let dxi_theta = (y.theta.at(i + 1, j) - y.theta.at(i - 1, j)) / (2.0 * h_xi);
            let dxi_psi = (y.psi.at(i + 1, j) - y.psi.at(i - 1, j)) / (2.0 * h_xi);
            let dxx_theta = (y.theta.at(i, j + 1) - 2.0 * y.theta.at(i, j) + y.theta.at(i, j - 1))
                / (h_x * h_x);
            let lam = y.lambda.at(i);
            *out.v.at_mut(i, j) = u * dxi_theta - y.psi.at(i, j) + lam * kf.t2_theta.at(i, j);
            *out.w.at_mut(i, j) = -dxx_theta
                + kf.v_pot.at(i, j) * y.theta.at(i, j)
                + u * dxi_psi
                + lam * kf.t2_psi.at(i, j);
        }
    }
    Ok(out)
}

/// Maximum orthogonality defect of a candidate Y-element at velocity `u`:
/// the largest per-ξ quadrature value, normalized by the field magnitude.
pub fn symplectic_defect(y: &TripleY, u: f64, opts: &SolverOptions) -> Result<f64> {
    let grids = y.theta.grid().clone();
    let handle_free = KinkFields::new(grids.clone(), u)?;
    let g = &grids;
    let alpha = opts.alpha;
    let weighted = opts.orthogonality_weighted;
    let mut worst = 0.0_f64;
    for i in 0..g.xi.n() {
        let xi = g.xi.node(i);
        let mut acc = 0.0;
        for j in 0..g.x.n() {
            let x = g.x.node(j);
            let w = if weighted {
                (1.0 + xi * xi + x * x).powi(alpha as i32)
            } else {
                1.0
            } * g.x.quad_weight(j);
            acc += w
                * (y.theta.at(i, j) * handle_free.con_a.at(i, j)
                    + y.psi.at(i, j) * handle_free.con_b.at(i, j));
        }
        worst = worst.max(acc.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid1D, GridFn1D};

    fn small_grid() -> Arc<Grid2D> {
        let xi = Grid1D::uniform(-6.0, 6.0, 25).unwrap();
        let x = Grid1D::uniform(-9.0, 9.0, 37).unwrap();
        Grid2D::new(xi, x, 1.0).unwrap()
    }

    /// Smooth right-hand side exactly zero near the grid boundary.
    fn bump_pair(grids: &Arc<Grid2D>, cx: f64, cxx: f64, s: f64) -> PairZ {
        let mask = |xi: f64, x: f64, g: &Grid2D| {
            let mxi = 1.0 - ((xi - g.xi.min()) / (g.xi.max() - g.xi.min()) * 2.0 - 1.0).powi(8);
            let mx = 1.0 - ((x - g.x.min()) / (g.x.max() - g.x.min()) * 2.0 - 1.0).powi(8);
            mxi.max(0.0) * mx.max(0.0)
        };
        let g2 = grids.clone();
        let v = GridFn2D::from_fn(grids.clone(), |xi, x| {
            mask(xi, x, &g2) * (-(xi - cx).powi(2) / s - (x - cxx).powi(2) / s).exp()
        });
        let g2 = grids.clone();
        let w = GridFn2D::from_fn(grids.clone(), |xi, x| {
            mask(xi, x, &g2) * 0.7 * (-(xi + cx).powi(2) / s - (x + cxx).powi(2) / s).exp()
        });
        PairZ { v, w }
    }

    #[test]
    fn system_size_matches_formula() {
        let g = small_grid();
        let h = OperatorHandle::assemble(0.1, g.clone(), SolverOptions::default()).unwrap();
        assert_eq!(h.system_size(), 2 * 25 * 37 + 25);
    }

    #[test]
    fn apply_zero_is_zero() {
        let g = small_grid();
        let h = OperatorHandle::assemble(0.15, g.clone(), SolverOptions::default()).unwrap();
        let z = h.apply(&TripleY::zeros(g)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn at_rest_row1_is_minus_psi() {
        let g = small_grid();
        let h = OperatorHandle::assemble(0.0, g.clone(), SolverOptions::default()).unwrap();
        let mut y = TripleY::zeros(g.clone());
        y.psi = GridFn2D::from_fn(g.clone(), |xi, x| (xi * 0.2).cos() * (-x * x / 8.0).exp());
        y.lambda = GridFn1D::from_fn(Arc::new(g.xi.clone()), |xi| (-xi * xi).exp());
        let out = h.apply(&y).unwrap();
        // t2θ ≡ 0 at u = 0, so row 1 = −ψ on interior rows
        for i in 1..g.xi.n() - 1 {
            for j in 1..g.x.n() - 1 {
                assert!((out.v.at(i, j) + y.psi.at(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn solve_zero_returns_zero() {
        let g = small_grid();
        let h = OperatorHandle::assemble(0.12, g.clone(), SolverOptions::default()).unwrap();
        let sol = h.solve(&PairZ::zeros(g)).unwrap();
        assert_eq!(sol.max_abs(), 0.0);
    }

    #[test]
    fn roundtrip_on_smooth_rhs() {
        let g = small_grid();
        for &u in &[0.0, 0.12, -0.18] {
            let h = OperatorHandle::assemble(u, g.clone(), SolverOptions::default()).unwrap();
            let rhs = bump_pair(&g, 0.8, -1.2, 3.0);
            let sol = h.solve(&rhs).unwrap();
            let back = h.apply(&sol).unwrap();
            let scale = rhs.v.max_abs() + rhs.w.max_abs();
            let mut err = 0.0_f64;
            for idx in 0..g.len() {
                err = err.max((back.v.values()[idx] - rhs.v.values()[idx]).abs());
                err = err.max((back.w.values()[idx] - rhs.w.values()[idx]).abs());
            }
            assert!(err / scale < 1e-8, "u = {u}: rel err {}", err / scale);
        }
    }

    #[test]
    fn solve_satisfies_orthogonality_rows() {
        let g = small_grid();
        let h = OperatorHandle::assemble(0.17, g.clone(), SolverOptions::default()).unwrap();
        let rhs = bump_pair(&g, -0.5, 0.9, 2.0);
        let sol = h.solve(&rhs).unwrap();
        let con = h.constraint_values(&sol.theta, &sol.psi);
        let scale = sol.theta.max_abs().max(sol.psi.max_abs()).max(1e-300);
        for (i, c) in con.iter().enumerate() {
            assert!(c.abs() / scale < 1e-10, "xi row {i}: {c}");
        }
    }

    #[test]
    fn manufactured_solution_recovered() {
        let g = small_grid();
        let u = 0.15;
        let h = OperatorHandle::assemble(u, g.clone(), SolverOptions::default()).unwrap();
        // smooth candidate with boundary-vanishing bumps
        let base = bump_pair(&g, 0.0, 0.5, 2.5);
        let mut cand = TripleY::zeros(g.clone());
        cand.theta = base.v.clone();
        cand.psi = base.w.clone();
        cand.lambda = GridFn1D::from_fn(Arc::new(g.xi.clone()), |xi| {
            let t = (xi - g.xi.min()) / (g.xi.max() - g.xi.min()) * 2.0 - 1.0;
            (1.0 - t.powi(8)).max(0.0) * (-xi * xi / 4.0).exp()
        });
        *cand.lambda.at_mut(0) = 0.0;
        let n = cand.lambda.values().len();
        *cand.lambda.at_mut(n - 1) = 0.0;
        // project θ so the constraint rows hold exactly
        let con = h.constraint_values(&cand.theta, &cand.psi);
        for i in 0..g.xi.n() {
            // subtract c · a(ξ,·) on interior x-columns with c chosen per row
            let mut denom = 0.0;
            for j in 1..g.x.n() - 1 {
                denom += h.wt.at(i, j) * h.kf.con_a.at(i, j) * h.kf.con_a.at(i, j);
            }
            let c = con[i] / denom;
            for j in 1..g.x.n() - 1 {
                *cand.theta.at_mut(i, j) -= c * h.kf.con_a.at(i, j);
            }
            // re-zero boundary ξ rows
            if i == 0 || i == g.xi.n() - 1 {
                for j in 0..g.x.n() {
                    *cand.theta.at_mut(i, j) = 0.0;
                }
            }
        }
        // boundary x-columns must stay zero for the candidate to lie in the
        // Dirichlet space; the bump construction guarantees that.
        let rhs = h.apply(&cand).unwrap();
        let sol = h.solve(&rhs).unwrap();
        let scale = cand.max_abs();
        let mut err = 0.0_f64;
        for idx in 0..g.len() {
            err = err.max((sol.theta.values()[idx] - cand.theta.values()[idx]).abs());
            err = err.max((sol.psi.values()[idx] - cand.psi.values()[idx]).abs());
        }
        for i in 0..g.xi.n() {
            err = err.max((sol.lambda.at(i) - cand.lambda.at(i)).abs());
        }
        assert!(err / scale < 1e-8, "rel err {}", err / scale);
    }

    #[test]
    fn sign_flip_symmetry_under_velocity_reversal() {
        // Operator pieces: transport and t2θ flip sign with u, potential and
        // t2ψ are even. Probe via apply on separated inputs.
        let g = small_grid();
        let hp = OperatorHandle::assemble(0.14, g.clone(), SolverOptions::default()).unwrap();
        let hm = OperatorHandle::assemble(-0.14, g.clone(), SolverOptions::default()).unwrap();
        let mut y_theta = TripleY::zeros(g.clone());
        y_theta.theta =
            GridFn2D::from_fn(g.clone(), |xi, x| (-(xi * xi) / 6.0 - x * x / 6.0).exp());
        let op = hp.apply(&y_theta).unwrap();
        let om = hm.apply(&y_theta).unwrap();
        for i in 2..g.xi.n() - 2 {
            for j in 2..g.x.n() - 2 {
                // v-row on pure θ input: u∂ξθ — odd in u
                assert!((op.v.at(i, j) + om.v.at(i, j)).abs() < 1e-13);
                // w-row on pure θ input: −∂x²θ + Vθ — even in u
                assert!((op.w.at(i, j) - om.w.at(i, j)).abs() < 1e-13);
            }
        }
        let mut y_lam = TripleY::zeros(g.clone());
        y_lam.lambda = GridFn1D::from_fn(Arc::new(g.xi.clone()), |xi| (-xi * xi / 3.0).exp());
        let opl = hp.apply(&y_lam).unwrap();
        let oml = hm.apply(&y_lam).unwrap();
        for i in 2..g.xi.n() - 2 {
            for j in 2..g.x.n() - 2 {
                // λ·t2θ odd, λ·t2ψ even
                assert!((opl.v.at(i, j) + oml.v.at(i, j)).abs() < 1e-13);
                assert!((opl.w.at(i, j) - oml.w.at(i, j)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn condition_bound_violation_is_reported() {
        let g = small_grid();
        let opts = SolverOptions {
            condition_bound: 10.0,
            ..SolverOptions::default()
        };
        let err = OperatorHandle::assemble(0.1, g, opts);
        assert!(matches!(err, Err(crate::error::Error::IllConditioned { .. })));
    }

    #[test]
    fn solutions_continuous_in_u() {
        let g = small_grid();
        let rhs = bump_pair(&g, 0.3, 0.1, 2.0);
        let base = OperatorHandle::assemble(0.1, g.clone(), SolverOptions::default())
            .unwrap()
            .solve(&rhs)
            .unwrap();
        let du = 1e-3;
        let pert = OperatorHandle::assemble(0.1 + du, g.clone(), SolverOptions::default())
            .unwrap()
            .solve(&rhs)
            .unwrap();
        let mut diff = pert.clone();
        diff.axpy(-1.0, &base);
        let rel = diff.max_abs() / base.max_abs();
        assert!(rel < 50.0 * du, "du-continuity: rel change {rel}");
        assert!(rel > 0.0);
    }
}
