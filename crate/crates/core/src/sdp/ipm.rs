//! Infeasible-start primal-dual interior-point method (HKM direction, Mehrotra
//! predictor-corrector) on the real standard form produced by `embed::compile`.

use super::embed::{project_embedded, RealCoef, RealProblem};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub x: Vec<DMatrix<f64>>,
    pub s: Vec<DMatrix<f64>>,
    pub x_lp: DVector<f64>,
    pub z_lp: DVector<f64>,
    pub x_free: DVector<f64>,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Converged,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    Stalled,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub tol: f64,
    pub max_iter: usize,
    pub infeasibility_tol: f64,
}

/// Scaled-space progress measures of one iterate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Measures {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub pobj: f64,
    pub dobj: f64,
    pub mu: f64,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rlp: DVector<f64>,
    rf: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dx_lp: DVector<f64>,
    dz_lp: DVector<f64>,
    dx_free: DVector<f64>,
    dy: DVector<f64>,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl RealProblem {
    fn nu(&self) -> f64 {
        (self.dims.iter().sum::<usize>() + self.lp_cols.len()) as f64
    }

    /// `A(X) + A_l x_l + B x_f`.
    fn apply_a(
        &self,
        xs: &[DMatrix<f64>],
        x_lp: &DVector<f64>,
        x_free: &DVector<f64>,
    ) -> DVector<f64> {
        let mut out = &self.free * x_free;
        for (rows, x) in self.block_rows.iter().zip(xs) {
            for (i, coef) in rows {
                out[*i] += coef.inner(x);
            }
        }
        for (l, &(i, v)) in self.lp_cols.iter().enumerate() {
            out[i] += v * x_lp[l];
        }
        out
    }

    fn apply_at_block(&self, b: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dims[b];
        let mut out = DMatrix::zeros(n, n);
        for (i, coef) in &self.block_rows[b] {
            coef.add_scaled_to(y[*i], &mut out);
        }
        out
    }

    fn apply_at_lp(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.lp_cols.len(),
            self.lp_cols.iter().map(|&(i, v)| v * y[i]),
        )
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let rp = &self.b - self.apply_a(&it.x, &it.x_lp, &it.x_free);
        let rd = (0..self.dims.len())
            .map(|b| &self.c[b] - self.apply_at_block(b, &it.y) - &it.s[b])
            .collect();
        let rlp = &self.c_lp - self.apply_at_lp(&it.y) - &it.z_lp;
        let rf = &self.c_free - self.free.transpose() * &it.y;
        Residuals { rp, rd, rlp, rf }
    }

    fn objective_norm(&self) -> f64 {
        (self.c.iter().map(|m| m.norm_squared()).sum::<f64>()
            + self.c_lp.norm_squared()
            + self.c_free.norm_squared())
        .sqrt()
    }

    fn primal_objective(&self, it: &Iterate) -> f64 {
        self.c.iter().zip(&it.x).map(|(c, x)| c.dot(x)).sum::<f64>()
            + self.c_lp.dot(&it.x_lp)
            + self.c_free.dot(&it.x_free)
    }

    fn measures(&self, it: &Iterate, r: &Residuals) -> Measures {
        let pobj = self.primal_objective(it);
        let dobj = self.b.dot(&it.y);
        let comp: f64 =
            it.x.iter().zip(&it.s).map(|(x, s)| x.dot(s)).sum::<f64>() + it.x_lp.dot(&it.z_lp);
        let dual_sq = r.rd.iter().map(|m| m.norm_squared()).sum::<f64>()
            + r.rlp.norm_squared()
            + r.rf.norm_squared();
        Measures {
            primal: r.rp.norm() / (1.0 + self.b.norm()),
            dual: dual_sq.sqrt() / (1.0 + self.objective_norm()),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            pobj,
            dobj,
            mu: comp / self.nu(),
        }
    }

    /// Schur complement `M_ij = tr(A_i X A_j S⁻¹) + Σ_l A_li A_lj x_l/z_l`.
    fn schur_matrix(&self, it: &Iterate, s_inv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.m, self.m);
        for (b, rows) in self.block_rows.iter().enumerate() {
            let x = &it.x[b];
            let si = &s_inv[b];
            let dense: Vec<usize> = (0..rows.len())
                .filter(|&k| matches!(rows[k].1, RealCoef::Dense(_)))
                .collect();
            let sparse: Vec<usize> = (0..rows.len())
                .filter(|&k| matches!(rows[k].1, RealCoef::Sparse(_)))
                .collect();

            for (dj, &kj) in dense.iter().enumerate() {
                let (rj, RealCoef::Dense(aj)) = &rows[kj] else {
                    unreachable!()
                };
                let g = x * aj * si;
                for &ki in dense.iter().take(dj + 1) {
                    let (ri, coef) = &rows[ki];
                    let v = coef.inner(&g);
                    add_sym(&mut m, *ri, *rj, v);
                }
                for &ki in &sparse {
                    let (ri, coef) = &rows[ki];
                    let v = coef.inner(&g);
                    add_sym(&mut m, *ri, *rj, v);
                }
            }
            for (a, &ka) in sparse.iter().enumerate() {
                let (ri, RealCoef::Sparse(ei)) = &rows[ka] else {
                    unreachable!()
                };
                for &kb in &sparse[a..] {
                    let (rj, RealCoef::Sparse(ej)) = &rows[kb] else {
                        unreachable!()
                    };
                    // Σ A_i[p,q]·X[q,r]·A_j[r,s]·S⁻¹[s,p]
                    let mut v = 0.0;
                    for &(p, q, ai) in ei {
                        for &(r, s, aj) in ej {
                            v += ai * x[(q, r)] * aj * si[(s, p)];
                        }
                    }
                    add_sym(&mut m, *ri, *rj, v);
                }
            }
        }
        for (l, &(i, v)) in self.lp_cols.iter().enumerate() {
            m[(i, i)] += v * v * it.x_lp[l] / it.z_lp[l];
        }
        m
    }
}

fn add_sym(m: &mut DMatrix<f64>, i: usize, j: usize, v: f64) {
    m[(i, j)] += v;
    if i != j {
        m[(j, i)] += v;
    }
}

/// Largest `α` with `X + α·dX ⪰ 0` (infinite when dX ⪰ 0).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lmin = sym(&w).symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Factor {
    chol: Cholesky<f64, Dyn>,
    /// `M⁻¹B` and the Cholesky of `BᵀM⁻¹B` for eliminating free variables.
    m_inv_b: DMatrix<f64>,
    free_schur: Option<Cholesky<f64, Dyn>>,
}

fn factor(m: DMatrix<f64>, free: &DMatrix<f64>) -> Option<Factor> {
    let n = m.nrows();
    let diag_max = (0..n)
        .map(|i| m[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut reg = 0.0;
    let chol = loop {
        let mut trial = m.clone();
        for i in 0..n {
            trial[(i, i)] += reg;
        }
        if let Some(c) = trial.cholesky() {
            break c;
        }
        reg = if reg == 0.0 {
            1e-14 * diag_max
        } else {
            reg * 100.0
        };
        if reg > 1e-4 * diag_max {
            return None;
        }
    };
    let (m_inv_b, free_schur) = if free.ncols() > 0 {
        let m_inv_b = chol.solve(free);
        let fs = free.transpose() * &m_inv_b;
        let fs = sym(&fs);
        (m_inv_b, Some(fs.cholesky()?))
    } else {
        (DMatrix::zeros(n, 0), None)
    };
    Some(Factor {
        chol,
        m_inv_b,
        free_schur,
    })
}

fn solve_direction(
    p: &RealProblem,
    it: &Iterate,
    s_inv: &[DMatrix<f64>],
    fac: &Factor,
    res: &Residuals,
    rc: &[DMatrix<f64>],
    rc_lp: &DVector<f64>,
) -> Direction {
    // h = r_p − A(Rc − X·R_d·S⁻¹) − A_l(rc_l − x∘r_l/z)
    let nb = p.dims.len();
    let mut tmp: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
    for b in 0..nb {
        let t = &rc[b] - &it.x[b] * &res.rd[b] * &s_inv[b];
        tmp.push(sym(&t));
    }
    let lp_tmp = DVector::from_iterator(
        p.lp_cols.len(),
        (0..p.lp_cols.len()).map(|l| rc_lp[l] - it.x_lp[l] * res.rlp[l] / it.z_lp[l]),
    );
    let zero_free = DVector::zeros(p.free.ncols());
    let h = &res.rp - p.apply_a(&tmp, &lp_tmp, &zero_free);

    let u = fac.chol.solve(&h);
    let (dy, dx_free) = match &fac.free_schur {
        Some(fs) => {
            let rhs = p.free.transpose() * &u - &res.rf;
            let dxf = fs.solve(&rhs);
            (&u - &fac.m_inv_b * &dxf, dxf)
        }
        None => (u, DVector::zeros(0)),
    };

    let mut dx = Vec::with_capacity(nb);
    let mut ds = Vec::with_capacity(nb);
    for b in 0..nb {
        let dsb = &res.rd[b] - p.apply_at_block(b, &dy);
        let dxb = &rc[b] - sym(&(&it.x[b] * &dsb * &s_inv[b]));
        dx.push(dxb);
        ds.push(dsb);
    }
    let dz_lp = &res.rlp - p.apply_at_lp(&dy);
    let dx_lp = DVector::from_iterator(
        p.lp_cols.len(),
        (0..p.lp_cols.len()).map(|l| rc_lp[l] - it.x_lp[l] * dz_lp[l] / it.z_lp[l]),
    );
    Direction {
        dx,
        ds,
        dx_lp,
        dz_lp,
        dx_free,
        dy,
    }
}

fn step_lengths(it: &Iterate, d: &Direction) -> (f64, f64) {
    let mut ap = max_step_lp(&it.x_lp, &d.dx_lp);
    let mut ad = max_step_lp(&it.z_lp, &d.dz_lp);
    for b in 0..it.x.len() {
        ap = ap.min(max_step_psd(&it.x[b], &d.dx[b]));
        ad = ad.min(max_step_psd(&it.s[b], &d.ds[b]));
    }
    (ap, ad)
}

pub(crate) fn initial_point(p: &RealProblem) -> Iterate {
    let row_norms: Vec<f64> = {
        let mut sq = vec![0.0f64; p.m];
        for rows in &p.block_rows {
            for (i, c) in rows {
                sq[*i] += c.norm_sqr();
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    };
    let mut x = Vec::new();
    let mut s = Vec::new();
    for (b, &n) in p.dims.iter().enumerate() {
        let nf = n as f64;
        let mut xi = 10f64.max(nf.sqrt());
        let mut eta = 10f64.max(nf.sqrt()).max(p.c[b].norm());
        for (i, c) in &p.block_rows[b] {
            xi = xi.max(nf * (1.0 + p.b[*i].abs()) / (1.0 + row_norms[*i]));
            eta = eta.max(c.norm_sqr().sqrt());
        }
        x.push(DMatrix::identity(n, n) * xi);
        s.push(DMatrix::identity(n, n) * eta);
    }
    let n_lp = p.lp_cols.len();
    let x_lp = DVector::from_element(n_lp, 10.0);
    let z_lp = DVector::from_element(n_lp, 10.0);
    Iterate {
        x,
        s,
        x_lp,
        z_lp,
        x_free: DVector::zeros(p.free.ncols()),
        y: DVector::zeros(p.m),
    }
}

/// Runs the solver. `accept` is consulted whenever the scaled measures drop below
/// the internal tolerance; returning `false` tightens that tolerance and continues.
pub(crate) fn run(
    p: &RealProblem,
    settings: Settings,
    mut accept: impl FnMut(&Iterate) -> bool,
) -> (Iterate, Outcome, usize, Measures) {
    let mut it = initial_point(p);
    let mut internal_tol = settings.tol * 0.1;
    let mut stall = 0usize;
    let nb = p.dims.len();
    let c_norm = p.objective_norm();
    // late iterations can lose feasibility to rounding; keep the best point seen
    let mut best: Option<(f64, Iterate, Measures)> = None;
    let finish = |it: Iterate, meas: Measures, best: Option<(f64, Iterate, Measures)>| match best {
        Some((score, b, m)) if score < meas.primal.max(meas.dual).max(meas.gap) => (b, m),
        _ => (it, meas),
    };

    for iter in 0..settings.max_iter {
        let res = p.residuals(&it);
        let meas = p.measures(&it, &res);
        if !(meas.pobj.is_finite() && meas.dobj.is_finite() && meas.mu.is_finite()) {
            let (it, meas) = finish(it, meas, best);
            return (it, Outcome::Stalled, iter, meas);
        }
        let score = meas.primal.max(meas.dual).max(meas.gap);
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, it.clone(), meas));
        }

        if meas.primal <= internal_tol && meas.dual <= internal_tol && meas.gap <= internal_tol {
            if accept(&it) {
                return (it, Outcome::Converged, iter, meas);
            }
            internal_tol *= 0.1;
            if internal_tol < 1e-15 {
                return (it, Outcome::Stalled, iter, meas);
            }
        }

        // dual ray: bᵀy → ∞ while Aᵀy + S stays bounded
        if meas.dobj > 0.0 {
            let bounded = (res
                .rd
                .iter()
                .zip(&p.c)
                .map(|(r, c)| (c - r).norm_squared())
                .sum::<f64>()
                + (&p.c_lp - &res.rlp).norm_squared()
                + (&p.c_free - &res.rf).norm_squared())
            .sqrt();
            if bounded / meas.dobj < settings.infeasibility_tol {
                return (it, Outcome::PrimalInfeasible, iter, meas);
            }
        }
        // primal ray: ⟨C,X⟩ → −∞ while A(X) stays bounded
        if meas.pobj < 0.0 {
            let ax = (&p.b - &res.rp).norm();
            if ax / (-meas.pobj) < settings.infeasibility_tol && c_norm > 0.0 {
                return (it, Outcome::DualInfeasible, iter, meas);
            }
        }

        let mut s_inv = Vec::with_capacity(nb);
        for b in 0..nb {
            match it.s[b].clone().cholesky() {
                Some(c) => s_inv.push(sym(&c.inverse())),
                None => {
                    let (it, meas) = finish(it, meas, best);
                    return (it, Outcome::Stalled, iter, meas);
                }
            }
        }
        let m = p.schur_matrix(&it, &s_inv);
        let Some(fac) = factor(m, &p.free) else {
            let (it, meas) = finish(it, meas, best);
            return (it, Outcome::Stalled, iter, meas);
        };

        // predictor
        let rc: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
        let rc_lp = -&it.x_lp;
        let aff = solve_direction(p, &it, &s_inv, &fac, &res, &rc, &rc_lp);
        let (ap_max, ad_max) = step_lengths(&it, &aff);
        let ap_aff = ap_max.min(1.0);
        let ad_aff = ad_max.min(1.0);
        let mut comp_aff = 0.0;
        for b in 0..nb {
            let xa = &it.x[b] + &aff.dx[b] * ap_aff;
            let sa = &it.s[b] + &aff.ds[b] * ad_aff;
            comp_aff += xa.dot(&sa);
        }
        comp_aff += (&it.x_lp + &aff.dx_lp * ap_aff).dot(&(&it.z_lp + &aff.dz_lp * ad_aff));
        let mu_aff = comp_aff / p.nu();
        let sigma = (mu_aff / meas.mu).max(0.0).powi(3).min(1.0);

        // corrector
        let target = sigma * meas.mu;
        let rc: Vec<DMatrix<f64>> = (0..nb)
            .map(|b| &s_inv[b] * target - &it.x[b] - sym(&(&aff.dx[b] * &aff.ds[b] * &s_inv[b])))
            .collect();
        let rc_lp = DVector::from_iterator(
            p.lp_cols.len(),
            (0..p.lp_cols.len())
                .map(|l| (target - aff.dx_lp[l] * aff.dz_lp[l]) / it.z_lp[l] - it.x_lp[l]),
        );
        let dir = solve_direction(p, &it, &s_inv, &fac, &res, &rc, &rc_lp);
        let (ap_max, ad_max) = step_lengths(&it, &dir);
        let gamma = 0.9 + 0.09 * ap_aff.min(ad_aff);
        let ap = (gamma * ap_max).min(1.0);
        let ad = (gamma * ad_max).min(1.0);

        for b in 0..nb {
            it.x[b] += &dir.dx[b] * ap;
            it.s[b] += &dir.ds[b] * ad;
            project_embedded(&mut it.x[b]);
            project_embedded(&mut it.s[b]);
        }
        it.x_lp += &dir.dx_lp * ap;
        it.x_free += &dir.dx_free * ap;
        it.z_lp += &dir.dz_lp * ad;
        it.y += &dir.dy * ad;

        if ap.max(ad) < 1e-9 {
            stall += 1;
            if stall >= 5 {
                let res = p.residuals(&it);
                let meas = p.measures(&it, &res);
                let (it, meas) = finish(it, meas, best);
                return (it, Outcome::Stalled, iter + 1, meas);
            }
        } else {
            stall = 0;
        }
    }
    let res = p.residuals(&it);
    let meas = p.measures(&it, &res);
    let (it, meas) = finish(it, meas, best);
    (it, Outcome::MaxIter, settings.max_iter, meas)
}
