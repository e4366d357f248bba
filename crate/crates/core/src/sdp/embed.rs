//! Real-symmetric embedding of Hermitian blocks and compilation of a complex
//! [`SdpProblem`] into the real standard form the interior-point solver uses.
//!
//! A Hermitian `X = A + iB` maps to `[[A, −B], [B, A]]`. Coefficients are embedded
//! with an extra factor ½ so that `⟨emb(C)/2, emb(X)⟩ = Re tr(C·X)`.

use super::problem::{Coef, SdpProblem, Sense};
use crate::numerics::CMatrix;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `[[Re M, −Im M], [Im M, Re M]]`.
pub fn embed_hermitian(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i + n, j)] = z.im;
            out[(i, j + n)] = -z.im;
        }
    }
    out
}

/// Projection back onto the embedded subspace: `A = (X₁₁ + X₂₂)/2`, `B = (X₂₁ − X₁₂)/2`.
pub fn unembed(x: &DMatrix<f64>) -> CMatrix {
    let n = x.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(
            0.5 * (x[(i, j)] + x[(i + n, j + n)]),
            0.5 * (x[(i + n, j)] - x[(i, j + n)]),
        )
    })
}

/// Re-imposes the embedded structure and symmetry on a real iterate.
pub(crate) fn project_embedded(x: &mut DMatrix<f64>) {
    let n = x.nrows() / 2;
    for j in 0..n {
        for i in 0..=j {
            let re = 0.25 * (x[(i, j)] + x[(j, i)] + x[(i + n, j + n)] + x[(j + n, i + n)]);
            // imaginary part of entry (i, j) is antisymmetric in (i, j)
            let im_ij = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
            let im_ji = 0.5 * (x[(j + n, i)] - x[(j, i + n)]);
            let im = 0.5 * (im_ij - im_ji);
            x[(i, j)] = re;
            x[(j, i)] = re;
            x[(i + n, j + n)] = re;
            x[(j + n, i + n)] = re;
            x[(i + n, j)] = im;
            x[(j, i + n)] = im;
            x[(j + n, i)] = -im;
            x[(i, j + n)] = -im;
        }
    }
}

/// Real symmetric coefficient.
#[derive(Debug, Clone)]
pub(crate) enum RealCoef {
    Dense(DMatrix<f64>),
    /// Full expansion: both `(p, q)` and `(q, p)` are listed for off-diagonal entries.
    Sparse(Vec<(usize, usize, f64)>),
}

impl RealCoef {
    fn from_complex(c: &Coef, n: usize) -> Self {
        match c {
            Coef::Dense(m) => RealCoef::Dense(embed_hermitian(m).scale(0.5)),
            Coef::Sparse(entries) => {
                let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len() * 8);
                for &(p, q, c) in entries {
                    let (re, im) = (0.5 * c.re, 0.5 * c.im);
                    if p == q {
                        out.push((p, p, re));
                        out.push((p + n, p + n, re));
                    } else {
                        out.push((p, q, re));
                        out.push((q, p, re));
                        out.push((p + n, q + n, re));
                        out.push((q + n, p + n, re));
                        out.push((p, q + n, -im));
                        out.push((q + n, p, -im));
                        out.push((q, p + n, im));
                        out.push((p + n, q, im));
                    }
                }
                out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
                let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(out.len());
                for e in out {
                    match merged.last_mut() {
                        Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                        _ => merged.push(e),
                    }
                }
                merged.retain(|e| e.2 != 0.0);
                RealCoef::Sparse(merged)
            }
        }
    }

    pub(crate) fn norm_sqr(&self) -> f64 {
        match self {
            RealCoef::Dense(m) => m.norm_squared(),
            RealCoef::Sparse(e) => e.iter().map(|x| x.2 * x.2).sum(),
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        match self {
            RealCoef::Dense(m) => *m *= s,
            RealCoef::Sparse(e) => e.iter_mut().for_each(|x| x.2 *= s),
        }
    }

    /// `tr(A·Y) = Σ_pq A_pq·Y_qp`.
    pub(crate) fn inner(&self, y: &DMatrix<f64>) -> f64 {
        match self {
            RealCoef::Dense(a) => {
                let n = a.nrows();
                let mut acc = 0.0;
                for q in 0..n {
                    for p in 0..n {
                        acc += a[(p, q)] * y[(q, p)];
                    }
                }
                acc
            }
            RealCoef::Sparse(e) => e.iter().map(|&(p, q, v)| v * y[(q, p)]).sum(),
        }
    }

    /// `out += s·A`.
    pub(crate) fn add_scaled_to(&self, s: f64, out: &mut DMatrix<f64>) {
        match self {
            RealCoef::Dense(a) => *out += a * s,
            RealCoef::Sparse(e) => {
                for &(p, q, v) in e {
                    out[(p, q)] += s * v;
                }
            }
        }
    }
}

/// Real standard form:
/// `min Σ⟨C_b, X_b⟩ + c_lᵀx_l + c_fᵀx_f  s.t.  Σ⟨A_ib, X_b⟩ + (A_l x_l)_i + (B x_f)_i = b_i`
/// with `X_b ⪰ 0`, `x_l ≥ 0`, `x_f` free.
#[derive(Debug, Clone)]
pub(crate) struct RealProblem {
    pub dims: Vec<usize>,
    pub m: usize,
    /// Per block: `(row, coefficient)`.
    pub block_rows: Vec<Vec<(usize, RealCoef)>>,
    /// Per nonnegative variable: `(row, coefficient)`.
    pub lp_cols: Vec<(usize, f64)>,
    /// `m × n_free`.
    pub free: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: Vec<DMatrix<f64>>,
    pub c_lp: DVector<f64>,
    pub c_free: DVector<f64>,
}

/// Scale factors applied during compilation.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    /// Row `i` of the compiled problem is row `i` of the original divided by `row[i]`.
    pub row: Vec<f64>,
    /// Primal variables are divided by `primal`.
    pub primal: f64,
    /// Objective (and hence dual variables) divided by `dual`.
    pub dual: f64,
}

fn merge_coefs(a: RealCoef, b: RealCoef) -> RealCoef {
    match (a, b) {
        (RealCoef::Sparse(mut x), RealCoef::Sparse(y)) => {
            x.extend(y);
            RealCoef::Sparse(x)
        }
        (RealCoef::Dense(mut d), other) | (other, RealCoef::Dense(mut d)) => {
            other.add_scaled_to(1.0, &mut d);
            RealCoef::Dense(d)
        }
    }
}

pub(crate) fn compile(p: &SdpProblem) -> (RealProblem, Scaling) {
    let m = p.constraints.len();
    let dims: Vec<usize> = p.blocks.iter().map(|b| 2 * b.dim).collect();
    let mut block_rows: Vec<Vec<(usize, RealCoef)>> = vec![Vec::new(); p.blocks.len()];
    let mut lp_cols = Vec::new();
    let n_free = p.scalars.len();
    let mut free = DMatrix::zeros(m, n_free);
    let mut b = DVector::zeros(m);

    for (i, con) in p.constraints.iter().enumerate() {
        for (blk, coef) in &con.expr.blocks {
            block_rows[*blk].push((i, RealCoef::from_complex(coef, p.blocks[*blk].dim)));
        }
        for &(s, v) in &con.expr.scalars {
            free[(i, s)] += v;
        }
        match con.sense {
            Sense::Eq => {}
            Sense::Ge => lp_cols.push((i, -1.0)),
            Sense::Le => lp_cols.push((i, 1.0)),
        }
        b[i] = con.rhs;
    }

    // merge repeated (row, block) entries so each block lists a row at most once
    for rows in block_rows.iter_mut() {
        rows.sort_by_key(|(i, _)| *i);
        let mut merged: Vec<(usize, RealCoef)> = Vec::with_capacity(rows.len());
        for (i, coef) in rows.drain(..) {
            if merged.last().is_some_and(|(j, _)| *j == i) {
                let (_, prev) = merged.pop().expect("checked above");
                merged.push((i, merge_coefs(prev, coef)));
            } else {
                merged.push((i, coef));
            }
        }
        *rows = merged;
    }

    let mut c: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    for (blk, coef) in &p.objective.blocks {
        RealCoef::from_complex(coef, p.blocks[*blk].dim).add_scaled_to(1.0, &mut c[*blk]);
    }
    let c_lp = DVector::zeros(lp_cols.len());
    let mut c_free: DVector<f64> = DVector::zeros(n_free);
    for &(s, v) in &p.objective.scalars {
        c_free[s] += v;
    }

    // row normalization
    let mut row_norm_sqr = vec![0.0f64; m];
    for rows in &block_rows {
        for (i, coef) in rows {
            row_norm_sqr[*i] += coef.norm_sqr();
        }
    }
    for &(i, v) in &lp_cols {
        row_norm_sqr[i] += v * v;
    }
    for i in 0..m {
        row_norm_sqr[i] += free.row(i).norm_squared();
    }
    let row: Vec<f64> = row_norm_sqr
        .iter()
        .map(|&s| if s > 0.0 { s.sqrt() } else { 1.0 })
        .collect();
    for rows in block_rows.iter_mut() {
        for (i, coef) in rows.iter_mut() {
            coef.scale(1.0 / row[*i]);
        }
    }
    for (i, v) in lp_cols.iter_mut() {
        *v /= row[*i];
    }
    for i in 0..m {
        let s = 1.0 / row[i];
        free.row_mut(i).scale_mut(s);
        b[i] *= s;
    }

    let b_max = b.amax();
    let primal = if b_max > 0.0 { b_max } else { 1.0 };
    b /= primal;
    let c_norm = (c.iter().map(|m| m.norm_squared()).sum::<f64>() + c_free.norm_squared()).sqrt();
    let dual = if c_norm > 0.0 { c_norm } else { 1.0 };
    for cb in c.iter_mut() {
        *cb /= dual;
    }
    c_free /= dual;

    (
        RealProblem {
            dims,
            m,
            block_rows,
            lp_cols,
            free,
            b,
            c,
            c_lp,
            c_free,
        },
        Scaling { row, primal, dual },
    )
}
