//! Complex Hermitian SDP description.
//!
//! `minimize ⟨C, X⟩ + cᵀx  s.t.  ⟨A_i, X⟩ + b_iᵀx ⋈ rhs_i,  X_b ⪰ 0,  x free`
//! with `⟨A, X⟩ = Re tr(A·X)` summed over blocks.

use crate::numerics::{frobenius_norm, hermitian_deviation, CMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Hermitian coefficient matrix of one block.
#[derive(Debug, Clone, PartialEq)]
pub enum Coef {
    Dense(CMatrix),
    /// `(p, q, c)` sets `A_pq = c` and `A_qp = conj(c)`; on the diagonal only `Re c` counts.
    /// Repeated positions add up.
    Sparse(Vec<(usize, usize, Complex64)>),
}

impl Coef {
    /// Coefficient with `⟨A, X⟩ = Re X_pq`.
    pub fn re_entry(p: usize, q: usize) -> Self {
        let v = if p == q { 1.0 } else { 0.5 };
        Coef::Sparse(vec![(p, q, Complex64::new(v, 0.0))])
    }

    /// Coefficient with `⟨A, X⟩ = Im X_pq` (`p ≠ q`).
    pub fn im_entry(p: usize, q: usize) -> Self {
        debug_assert_ne!(p, q, "diagonal of a Hermitian matrix is real");
        Coef::Sparse(vec![(p, q, Complex64::new(0.0, 0.5))])
    }

    /// `c·I_n` restricted to indices `offset..offset+n`.
    pub fn scaled_identity(offset: usize, n: usize, c: f64) -> Self {
        Coef::Sparse(
            (offset..offset + n)
                .map(|i| (i, i, Complex64::new(c, 0.0)))
                .collect(),
        )
    }

    /// `M` placed at rows/cols `offset..` of a larger block.
    pub fn embedded(m: &CMatrix, offset: usize, dim: usize) -> Self {
        let mut full = CMatrix::zeros(dim, dim);
        full.view_mut((offset, offset), m.shape()).copy_from(m);
        Coef::Dense(full)
    }

    pub fn to_dense(&self, dim: usize) -> CMatrix {
        match self {
            Coef::Dense(m) => m.clone(),
            Coef::Sparse(entries) => {
                let mut m = CMatrix::zeros(dim, dim);
                for &(p, q, c) in entries {
                    if p == q {
                        m[(p, p)] += Complex64::new(c.re, 0.0);
                    } else {
                        m[(p, q)] += c;
                        m[(q, p)] += c.conj();
                    }
                }
                m
            }
        }
    }

    /// `Re tr(A·X)`.
    pub fn inner(&self, x: &CMatrix) -> f64 {
        match self {
            Coef::Dense(a) => crate::numerics::real_inner(a, x),
            Coef::Sparse(entries) => entries
                .iter()
                .map(|&(p, q, c)| {
                    if p == q {
                        c.re * x[(p, p)].re
                    } else {
                        2.0 * (c * x[(q, p)]).re
                    }
                })
                .sum(),
        }
    }

    pub(crate) fn max_index(&self) -> Option<usize> {
        match self {
            Coef::Dense(_) => None,
            Coef::Sparse(e) => e.iter().map(|&(p, q, _)| p.max(q)).max(),
        }
    }
}

/// Linear functional over blocks and free scalars.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub blocks: Vec<(usize, Coef)>,
    pub scalars: Vec<(usize, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn block(mut self, block: usize, coef: Coef) -> Self {
        self.blocks.push((block, coef));
        self
    }

    pub fn scalar(mut self, index: usize, coef: f64) -> Self {
        self.scalars.push((index, coef));
        self
    }

    pub fn eval(&self, blocks: &[CMatrix], scalars: &[f64]) -> f64 {
        let mut v = 0.0;
        for (b, c) in &self.blocks {
            v += c.inner(&blocks[*b]);
        }
        for &(s, c) in &self.scalars {
            v += c * scalars[s];
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Eq,
    Ge,
    Le,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Eq => "=",
            Sense::Ge => ">=",
            Sense::Le => "<=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub dim: usize,
}

/// Minimization problem over Hermitian PSD blocks and free scalars.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<Block>,
    pub scalars: Vec<String>,
    pub objective: LinExpr,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize) -> usize {
        self.blocks.push(Block {
            name: name.into(),
            dim,
        });
        self.blocks.len() - 1
    }

    pub fn add_scalar(&mut self, name: impl Into<String>) -> usize {
        self.scalars.push(name.into());
        self.scalars.len() - 1
    }

    pub fn set_objective(&mut self, expr: LinExpr) {
        self.objective = expr;
    }

    pub fn add_constraint(&mut self, expr: LinExpr, sense: Sense, rhs: f64) -> usize {
        self.constraints.push(Constraint { expr, sense, rhs });
        self.constraints.len() - 1
    }

    /// Checks indices, coefficient shapes and Hermitian symmetry.
    pub fn validate(&self) -> Result<(), String> {
        let check_expr = |e: &LinExpr, what: &str| -> Result<(), String> {
            for (b, c) in &e.blocks {
                let block = self
                    .blocks
                    .get(*b)
                    .ok_or_else(|| format!("{what}: block index {b} out of range"))?;
                match c {
                    Coef::Dense(m) => {
                        if m.shape() != (block.dim, block.dim) {
                            return Err(format!(
                                "{what}: coefficient for block '{}' is {}x{}, expected {}x{}",
                                block.name,
                                m.nrows(),
                                m.ncols(),
                                block.dim,
                                block.dim
                            ));
                        }
                        let dev = hermitian_deviation(m);
                        if dev > 1e-12 * frobenius_norm(m).max(1.0) {
                            return Err(format!(
                                "{what}: coefficient for block '{}' is not Hermitian",
                                block.name
                            ));
                        }
                    }
                    Coef::Sparse(_) => {
                        if let Some(mx) = c.max_index() {
                            if mx >= block.dim {
                                return Err(format!(
                                    "{what}: sparse index {mx} exceeds block '{}' of dim {}",
                                    block.name, block.dim
                                ));
                            }
                        }
                    }
                }
            }
            for (s, v) in &e.scalars {
                if *s >= self.scalars.len() {
                    return Err(format!("{what}: scalar index {s} out of range"));
                }
                if !v.is_finite() {
                    return Err(format!("{what}: non-finite scalar coefficient"));
                }
            }
            Ok(())
        };
        if self.blocks.iter().any(|b| b.dim == 0) {
            return Err("zero-dimensional block".into());
        }
        check_expr(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check_expr(&c.expr, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(format!("constraint {i}: non-finite right-hand side"));
            }
        }
        Ok(())
    }

    /// Plain-text conic dump: block sizes followed by one triplet line per
    /// nonzero coefficient, in a layout close to SDPA's sparse format.
    pub fn dump_conic(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "# hermitian sdp: minimize <C,X> + c'x");
        let _ = writeln!(out, "blocks {}", self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let _ = writeln!(out, "block {i} {} {}", b.dim, b.name);
        }
        let _ = writeln!(out, "scalars {}", self.scalars.len());
        for (i, s) in self.scalars.iter().enumerate() {
            let _ = writeln!(out, "scalar {i} {s}");
        }
        let write_expr = |out: &mut String, tag: &str, e: &LinExpr| {
            for (b, c) in &e.blocks {
                let dense = c.to_dense(self.blocks[*b].dim);
                for p in 0..dense.nrows() {
                    for q in p..dense.ncols() {
                        let v = dense[(p, q)];
                        if v != Complex64::new(0.0, 0.0) {
                            let _ = writeln!(out, "{tag} X {b} {p} {q} {:e} {:e}", v.re, v.im);
                        }
                    }
                }
            }
            for (s, v) in &e.scalars {
                let _ = writeln!(out, "{tag} x {s} {v:e}");
            }
        };
        write_expr(&mut out, "obj", &self.objective);
        let _ = writeln!(out, "constraints {}", self.constraints.len());
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(out, "con {i} {} {:e}", c.sense, c.rhs);
            write_expr(&mut out, &format!("a {i}"), &c.expr);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{hermitian_part, real_inner};
    use crate::random::{complex_gaussian_matrix, seeded_rng};

    #[test]
    fn entry_selectors() {
        let x = hermitian_part(&complex_gaussian_matrix(3, 3, 1.0, &mut seeded_rng(1, 0)));
        assert!((Coef::re_entry(0, 2).inner(&x) - x[(0, 2)].re).abs() < 1e-15);
        assert!((Coef::im_entry(0, 2).inner(&x) - x[(0, 2)].im).abs() < 1e-15);
        assert!((Coef::im_entry(2, 0).inner(&x) - x[(2, 0)].im).abs() < 1e-15);
        assert!((Coef::re_entry(1, 1).inner(&x) - x[(1, 1)].re).abs() < 1e-15);
    }

    #[test]
    fn sparse_matches_dense() {
        let x = hermitian_part(&complex_gaussian_matrix(4, 4, 1.0, &mut seeded_rng(2, 0)));
        let c = Coef::Sparse(vec![
            (0, 1, Complex64::new(0.3, -0.7)),
            (2, 2, Complex64::new(1.5, 0.0)),
            (3, 1, Complex64::new(-0.2, 0.4)),
            (0, 1, Complex64::new(0.1, 0.0)),
        ]);
        let dense = c.to_dense(4);
        assert!(hermitian_deviation(&dense) == 0.0);
        assert!((c.inner(&x) - real_inner(&dense, &x)).abs() < 1e-13);
    }

    #[test]
    fn validation_catches_bad_shapes() {
        let mut p = SdpProblem::new();
        let b = p.add_block("X", 2);
        p.add_constraint(
            LinExpr::new().block(b, Coef::re_entry(0, 2)),
            Sense::Eq,
            1.0,
        );
        assert!(p.validate().is_err());

        let mut p = SdpProblem::new();
        let b = p.add_block("X", 2);
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        p.add_constraint(LinExpr::new().block(b, Coef::Dense(m)), Sense::Eq, 1.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn dump_lists_blocks_and_constraints() {
        let mut p = SdpProblem::new();
        let b = p.add_block("X", 2);
        let t = p.add_scalar("t");
        p.set_objective(LinExpr::new().scalar(t, -1.0));
        p.add_constraint(
            LinExpr::new().block(b, Coef::re_entry(0, 1)).scalar(t, 1.0),
            Sense::Ge,
            2.0,
        );
        let text = p.dump_conic();
        assert!(text.contains("block 0 2 X"));
        assert!(text.contains("con 0 >= 2e0"));
        assert!(text.contains("a 0 X 0 0 1 5e-1 0e0"));
        assert!(text.contains("obj x 0 -1e0"));
    }
}
