//! Products with a factor pair folded along one mode and unfolded along
//! another, computed without forming either the fold or the unfolding.
//!
//! Let `T = fold_i(U V^T)` and let `l` be the mode other than `i` and `j`.
//! Column `p` of `V`, viewed as an `I_j x I_l` matrix `M_p`, holds the slice
//! `M_p[x_j, x_l] = v_p[x_j * s_j + x_l * s_l]` where `s` are the mode-`i`
//! column strides. Then
//!
//! ```text
//! a^T T_<j>  at column (x_i, x_l) = sum_p U[x_i, p] * (M_p^T a)[x_l]
//! (T_<j> b)[x_j]                  = sum_p (M_p (B^T u_p))[x_j]
//! ```
//!
//! where `B[x_i, x_l]` is `b` reshaped along the mode-`j` column strides.
//! Each rank-one component needs one length-`I_l` intermediate, so the work
//! is `O(k (I_j I_l + I_i I_l))` and the extra space is `O(I_l)`.

use crate::error::{NortError, Result};
use crate::tensor::{FactorPair, Mode};

/// Reusable intermediate buffer for the kernels in this module.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    buf: Vec<f64>,
}

impl Scratch {
    pub fn new() -> Self {
        Scratch::default()
    }

    fn take(&mut self, len: usize) -> &mut [f64] {
        if self.buf.len() < len {
            self.buf.resize(len, 0.0);
        }
        let s = &mut self.buf[..len];
        s.fill(0.0);
        s
    }
}

fn check_cross(f: &FactorPair, target: Mode) -> Result<()> {
    if f.mode() == target {
        return Err(NortError::shape(format!(
            "cross-mode kernel called with source and target mode {target}"
        )));
    }
    Ok(())
}

/// Strided index helper: position of (x_a, x_b) given the two strides.
#[inline(always)]
fn at(xa: usize, sa: usize, xb: usize, sb: usize) -> usize {
    xa * sa + xb * sb
}

/// `out += alpha * a^T [fold_i(U V^T)]_<target>`.
pub fn kron_rmatvec_into(
    alpha: f64,
    f: &FactorPair,
    target: Mode,
    a: &[f64],
    out: &mut [f64],
    scratch: &mut Scratch,
) -> Result<()> {
    check_cross(f, target)?;
    let shape = f.shape();
    let (i, j) = (f.mode(), target);
    let l = i.third(j);
    if a.len() != shape.dim(j) || out.len() != shape.unfolded_cols(j) {
        return Err(NortError::shape(format!(
            "kron_rmatvec: a has {} (want {}), out has {} (want {})",
            a.len(),
            shape.dim(j),
            out.len(),
            shape.unfolded_cols(j)
        )));
    }
    let (ni, nj, nl) = (shape.dim(i), shape.dim(j), shape.dim(l));
    let src = shape.col_strides(i);
    let dst = shape.col_strides(j);
    let (vs_j, vs_l) = (src[j.index()], src[l.index()]);
    let (os_i, os_l) = (dst[i.index()], dst[l.index()]);
    let (u, v) = (f.u().as_slice(), f.v().as_slice());
    let vrows = f.v().nrows();

    let w = scratch.take(nl);
    for p in 0..f.rank() {
        let vp = &v[p * vrows..(p + 1) * vrows];
        let up = &u[p * ni..(p + 1) * ni];
        // w = M_p^T a
        if vs_j == 1 {
            for (xl, wl) in w.iter_mut().enumerate() {
                let base = xl * vs_l;
                *wl = a.iter().zip(&vp[base..base + nj]).map(|(x, y)| x * y).sum();
            }
        } else {
            w.fill(0.0);
            for (xj, &aj) in a.iter().enumerate() {
                let base = xj * vs_j;
                for (wl, &vv) in w.iter_mut().zip(&vp[base..base + nl]) {
                    *wl += aj * vv;
                }
            }
        }
        // out[(x_i, x_l)] += alpha * u_p[x_i] * w[x_l]
        if os_i == 1 {
            for (xl, &wl) in w.iter().enumerate() {
                let s = alpha * wl;
                let base = xl * os_l;
                for (o, &uu) in out[base..base + ni].iter_mut().zip(up) {
                    *o += s * uu;
                }
            }
        } else {
            for (xi, &uu) in up.iter().enumerate() {
                let s = alpha * uu;
                let base = xi * os_i;
                for (o, &wl) in out[base..base + nl].iter_mut().zip(w.iter()) {
                    *o += s * wl;
                }
            }
        }
    }
    debug_assert_eq!(at(ni - 1, os_i, nl - 1, os_l) + 1, out.len());
    Ok(())
}

/// `out += alpha * [fold_i(U V^T)]_<target> b`.
pub fn kron_matvec_into(
    alpha: f64,
    f: &FactorPair,
    target: Mode,
    b: &[f64],
    out: &mut [f64],
    scratch: &mut Scratch,
) -> Result<()> {
    check_cross(f, target)?;
    let shape = f.shape();
    let (i, j) = (f.mode(), target);
    let l = i.third(j);
    if b.len() != shape.unfolded_cols(j) || out.len() != shape.dim(j) {
        return Err(NortError::shape(format!(
            "kron_matvec: b has {} (want {}), out has {} (want {})",
            b.len(),
            shape.unfolded_cols(j),
            out.len(),
            shape.dim(j)
        )));
    }
    let (ni, nj, nl) = (shape.dim(i), shape.dim(j), shape.dim(l));
    let src = shape.col_strides(i);
    let dst = shape.col_strides(j);
    let (vs_j, vs_l) = (src[j.index()], src[l.index()]);
    let (bs_i, bs_l) = (dst[i.index()], dst[l.index()]);
    let (u, v) = (f.u().as_slice(), f.v().as_slice());
    let vrows = f.v().nrows();

    let q = scratch.take(nl);
    for p in 0..f.rank() {
        let vp = &v[p * vrows..(p + 1) * vrows];
        let up = &u[p * ni..(p + 1) * ni];
        // q = B^T u_p
        if bs_i == 1 {
            for (xl, ql) in q.iter_mut().enumerate() {
                let base = xl * bs_l;
                *ql = up.iter().zip(&b[base..base + ni]).map(|(x, y)| x * y).sum();
            }
        } else {
            q.fill(0.0);
            for (xi, &ui) in up.iter().enumerate() {
                let base = xi * bs_i;
                for (ql, &bb) in q.iter_mut().zip(&b[base..base + nl]) {
                    *ql += ui * bb;
                }
            }
        }
        // out[x_j] += alpha * sum_l M_p[x_j, x_l] q[x_l]
        if vs_j == 1 {
            for (xl, &ql) in q.iter().enumerate() {
                let s = alpha * ql;
                let base = xl * vs_l;
                for (o, &vv) in out.iter_mut().zip(&vp[base..base + nj]) {
                    *o += s * vv;
                }
            }
        } else {
            for (xj, o) in out.iter_mut().enumerate() {
                let base = xj * vs_j;
                let dot: f64 = q.iter().zip(&vp[base..base + nl]).map(|(x, y)| x * y).sum();
                *o += alpha * dot;
            }
        }
    }
    debug_assert_eq!(at(nj - 1, vs_j, nl - 1, vs_l) + 1, vrows);
    Ok(())
}

/// `a^T [fold_i(U V^T)]_<target>` as a fresh vector.
pub fn kron_rmatvec(f: &FactorPair, target: Mode, a: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; f.shape().unfolded_cols(target)];
    kron_rmatvec_into(1.0, f, target, a, &mut out, &mut Scratch::new())?;
    Ok(out)
}

/// `[fold_i(U V^T)]_<target> b` as a fresh vector.
pub fn kron_matvec(f: &FactorPair, target: Mode, b: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; f.shape().dim(target)];
    kron_matvec_into(1.0, f, target, b, &mut out, &mut Scratch::new())?;
    Ok(out)
}

/// `out += alpha * U (V^T b)`, the same-mode product.
pub(crate) fn lowrank_matvec_into(alpha: f64, f: &FactorPair, b: &[f64], out: &mut [f64]) {
    let (u, v) = (f.u().as_slice(), f.v().as_slice());
    let (m, n) = (f.u().nrows(), f.v().nrows());
    for p in 0..f.rank() {
        let t: f64 = v[p * n..(p + 1) * n]
            .iter()
            .zip(b)
            .map(|(x, y)| x * y)
            .sum();
        let s = alpha * t;
        for (o, &uu) in out.iter_mut().zip(&u[p * m..(p + 1) * m]) {
            *o += s * uu;
        }
    }
}

/// `out += alpha * V (U^T a)`.
pub(crate) fn lowrank_rmatvec_into(alpha: f64, f: &FactorPair, a: &[f64], out: &mut [f64]) {
    let (u, v) = (f.u().as_slice(), f.v().as_slice());
    let (m, n) = (f.u().nrows(), f.v().nrows());
    for p in 0..f.rank() {
        let t: f64 = u[p * m..(p + 1) * m]
            .iter()
            .zip(a)
            .map(|(x, y)| x * y)
            .sum();
        let s = alpha * t;
        for (o, &vv) in out.iter_mut().zip(&v[p * n..(p + 1) * n]) {
            *o += s * vv;
        }
    }
}
