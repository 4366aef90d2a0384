use std::cell::RefCell;
use std::sync::Arc;

use super::kron::{
    kron_matvec_into, kron_rmatvec_into, lowrank_matvec_into, lowrank_rmatvec_into, Scratch,
};
use crate::error::{NortError, Result};
use crate::svd::LinearOperator;
use crate::tensor::{DenseTensor3, FactorPair, FactorTensor, Mode, Shape3, SparseTensor3};

/// Weighted sum of folded factor pairs plus at most one weighted sparse tensor.
#[derive(Debug, Clone)]
pub struct SplrOperator {
    low_rank: FactorTensor,
    sparse: Option<(f64, SparseTensor3)>,
}

impl SplrOperator {
    pub fn new(low_rank: FactorTensor, sparse: Option<(f64, SparseTensor3)>) -> Result<Self> {
        let sparse = match sparse {
            Some((c, s)) => {
                if s.shape() != low_rank.shape() {
                    return Err(NortError::shape(format!(
                        "sparse term {} vs low-rank terms {}",
                        s.shape(),
                        low_rank.shape()
                    )));
                }
                if !c.is_finite() {
                    return Err(NortError::Domain(format!("sparse coefficient {c}")));
                }
                (c != 0.0 && s.nnz() > 0).then_some((c, s))
            }
            None => None,
        };
        Ok(SplrOperator { low_rank, sparse })
    }

    pub fn from_terms(
        shape: Shape3,
        terms: Vec<(f64, Arc<FactorPair>)>,
        sparse: Option<(f64, SparseTensor3)>,
    ) -> Result<Self> {
        SplrOperator::new(FactorTensor::new(shape, terms)?, sparse)
    }

    #[inline]
    pub fn shape(&self) -> Shape3 {
        self.low_rank.shape()
    }

    pub fn low_rank(&self) -> &FactorTensor {
        &self.low_rank
    }

    pub fn sparse(&self) -> Option<&(f64, SparseTensor3)> {
        self.sparse.as_ref()
    }

    /// The mode-`mode` unfolding as a linear operator.
    pub fn view(&self, mode: Mode) -> ModeView<'_> {
        ModeView {
            op: self,
            mode,
            scratch: RefCell::new(Scratch::new()),
        }
    }

    /// Dense materialization, for oracles and small problems only.
    pub fn to_dense(&self) -> DenseTensor3 {
        let mut t = self.low_rank.to_dense();
        if let Some((c, s)) = &self.sparse {
            for (idx, v) in s.iter() {
                t.set(idx, t.get(idx) + c * v);
            }
        }
        t
    }

    /// Upper bound on the rank of the mode unfolding of the low-rank part.
    /// A pair folded along mode `i` has mode-`j` rank at most `k * I_l`.
    pub fn low_rank_rank_bound(&self, mode: Mode) -> usize {
        let shape = self.shape();
        let bound: usize = self
            .low_rank
            .terms()
            .iter()
            .map(|(_, f)| {
                if f.mode() == mode {
                    f.rank()
                } else {
                    f.rank() * shape.dim(f.mode().third(mode))
                }
            })
            .sum();
        bound.min(shape.dim(mode)).min(shape.unfolded_cols(mode))
    }
}

/// Mode unfolding of a [`SplrOperator`], `I_mode x (I_x / I_mode)`.
pub struct ModeView<'a> {
    op: &'a SplrOperator,
    mode: Mode,
    scratch: RefCell<Scratch>,
}

impl ModeView<'_> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn accumulate_matvec(&self, b: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut scratch = self.scratch.borrow_mut();
        for (c, f) in self.op.low_rank.terms() {
            if f.mode() == self.mode {
                lowrank_matvec_into(*c, f, b, out);
            } else {
                kron_matvec_into(*c, f, self.mode, b, out, &mut scratch)
                    .expect("dimensions checked by caller");
            }
        }
        if let Some((c, s)) = &self.op.sparse {
            sparse_matvec_into(*c, s, self.mode, b, out);
        }
    }

    fn accumulate_rmatvec(&self, a: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut scratch = self.scratch.borrow_mut();
        for (c, f) in self.op.low_rank.terms() {
            if f.mode() == self.mode {
                lowrank_rmatvec_into(*c, f, a, out);
            } else {
                kron_rmatvec_into(*c, f, self.mode, a, out, &mut scratch)
                    .expect("dimensions checked by caller");
            }
        }
        if let Some((c, s)) = &self.op.sparse {
            sparse_rmatvec_into(*c, s, self.mode, a, out);
        }
    }
}

impl LinearOperator for ModeView<'_> {
    fn nrows(&self) -> usize {
        self.op.shape().dim(self.mode)
    }

    fn ncols(&self) -> usize {
        self.op.shape().unfolded_cols(self.mode)
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols(), "matvec input length");
        assert_eq!(y.len(), self.nrows(), "matvec output length");
        self.accumulate_matvec(x, y);
    }

    fn rmatvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows(), "rmatvec input length");
        assert_eq!(y.len(), self.ncols(), "rmatvec output length");
        self.accumulate_rmatvec(x, y);
    }
}

fn sparse_matvec_into(alpha: f64, s: &SparseTensor3, mode: Mode, b: &[f64], out: &mut [f64]) {
    let pat = s.pattern();
    for ((&r, &c), &v) in pat.rows(mode).iter().zip(pat.cols(mode)).zip(s.values()) {
        out[r] += alpha * v * b[c];
    }
}

fn sparse_rmatvec_into(alpha: f64, s: &SparseTensor3, mode: Mode, a: &[f64], out: &mut [f64]) {
    let pat = s.pattern();
    for ((&r, &c), &v) in pat.rows(mode).iter().zip(pat.cols(mode)).zip(s.values()) {
        out[c] += alpha * v * a[r];
    }
}

/// `S_<mode> b` for a sparse tensor.
pub fn sparse_matvec(s: &SparseTensor3, mode: Mode, b: &[f64]) -> Result<Vec<f64>> {
    let shape = s.shape();
    if b.len() != shape.unfolded_cols(mode) {
        return Err(NortError::shape(format!(
            "sparse_matvec: vector of length {}, mode-{mode} unfolding has {} columns",
            b.len(),
            shape.unfolded_cols(mode)
        )));
    }
    let mut out = vec![0.0; shape.dim(mode)];
    sparse_matvec_into(1.0, s, mode, b, &mut out);
    Ok(out)
}

/// `a^T S_<mode>` for a sparse tensor.
pub fn sparse_rmatvec(s: &SparseTensor3, mode: Mode, a: &[f64]) -> Result<Vec<f64>> {
    let shape = s.shape();
    if a.len() != shape.dim(mode) {
        return Err(NortError::shape(format!(
            "sparse_rmatvec: vector of length {}, mode-{mode} unfolding has {} rows",
            a.len(),
            shape.dim(mode)
        )));
    }
    let mut out = vec![0.0; shape.unfolded_cols(mode)];
    sparse_rmatvec_into(1.0, s, mode, a, &mut out);
    Ok(out)
}

/// Checked `Z_<mode> b`.
pub fn splr_matvec(view: &ModeView<'_>, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != view.ncols() {
        return Err(NortError::shape(format!(
            "splr_matvec: vector of length {}, view has {} columns",
            b.len(),
            view.ncols()
        )));
    }
    let mut out = vec![0.0; view.nrows()];
    view.accumulate_matvec(b, &mut out);
    Ok(out)
}

/// Checked `a^T Z_<mode>`.
pub fn splr_rmatvec(view: &ModeView<'_>, a: &[f64]) -> Result<Vec<f64>> {
    if a.len() != view.nrows() {
        return Err(NortError::shape(format!(
            "splr_rmatvec: vector of length {}, view has {} rows",
            a.len(),
            view.nrows()
        )));
    }
    let mut out = vec![0.0; view.ncols()];
    view.accumulate_rmatvec(a, &mut out);
    Ok(out)
}

/// Frobenius inner product of two folded factor pairs.
fn pair_inner(a: &FactorPair, b: &FactorPair, scratch: &mut Scratch) -> f64 {
    if a.rank() == 0 || b.rank() == 0 {
        return 0.0;
    }
    if a.mode() == b.mode() {
        // trace(V_a U_a^T U_b V_b^T) = sum((U_a^T U_b) .* (V_a^T V_b))
        let uu = a.u().tr_mul(b.u());
        let vv = a.v().tr_mul(b.v());
        return uu.component_mul(&vv).sum();
    }
    // sum_p u_p^T [fold_b]_<mode a> v_p
    let mut col = vec![0.0; a.u().nrows()];
    let mut total = 0.0;
    for p in 0..a.rank() {
        col.fill(0.0);
        let vp: Vec<f64> = a.v().column(p).iter().copied().collect();
        kron_matvec_into(1.0, b, a.mode(), &vp, &mut col, scratch)
            .expect("shapes agree within a factor tensor");
        total += a
            .u()
            .column(p)
            .iter()
            .zip(&col)
            .map(|(x, y)| x * y)
            .sum::<f64>();
    }
    total
}

/// `<X, Y>` for two factor-form tensors, without densifying either.
pub fn factor_inner(x: &FactorTensor, y: &FactorTensor) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(NortError::shape(format!("{} vs {}", x.shape(), y.shape())));
    }
    let mut scratch = Scratch::new();
    let mut total = 0.0;
    for (ca, a) in x.terms() {
        for (cb, b) in y.terms() {
            total += ca * cb * pair_inner(a, b, &mut scratch);
        }
    }
    Ok(total)
}

/// `||X||_F` for a factor-form tensor. Clamped at zero against rounding.
pub fn factor_norm(x: &FactorTensor) -> f64 {
    let mut scratch = Scratch::new();
    let terms = x.terms();
    let mut total = 0.0;
    for (ia, (ca, a)) in terms.iter().enumerate() {
        total += ca * ca * pair_inner(a, a, &mut scratch);
        for (cb, b) in &terms[ia + 1..] {
            total += 2.0 * ca * cb * pair_inner(a, b, &mut scratch);
        }
    }
    total.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_pair(rng: &mut ChaCha8Rng, mode: Mode, shape: Shape3, k: usize) -> FactorPair {
        let u = DMatrix::from_fn(shape.dim(mode), k, |_, _| rng.random_range(-1.0..1.0));
        let v = DMatrix::from_fn(shape.unfolded_cols(mode), k, |_, _| {
            rng.random_range(-1.0..1.0)
        });
        FactorPair::new(mode, shape, u, v).unwrap()
    }

    fn rand_sparse(rng: &mut ChaCha8Rng, shape: Shape3, n: usize) -> SparseTensor3 {
        let lins = rand::seq::index::sample(rng, shape.numel(), n);
        let entries = lins
            .iter()
            .map(|l| (shape.delinear(l), rng.random_range(-1.0..1.0)))
            .collect();
        SparseTensor3::from_entries(shape, entries).unwrap()
    }

    #[test]
    fn empty_sparse_gives_zero() {
        let shape = Shape3::new(3, 4, 2).unwrap();
        let s = SparseTensor3::empty(shape);
        assert_eq!(
            sparse_matvec(&s, Mode::First, &[1.0; 8]).unwrap(),
            vec![0.0; 3]
        );
        assert_eq!(
            sparse_rmatvec(&s, Mode::Third, &[1.0; 2]).unwrap(),
            vec![0.0; 12]
        );
    }

    #[test]
    fn single_entry_sparse() {
        let shape = Shape3::new(3, 4, 2).unwrap();
        let s = SparseTensor3::from_entries(shape, vec![([0, 0, 0], 2.5)]).unwrap();
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        assert_eq!(
            sparse_matvec(&s, Mode::First, &e1).unwrap(),
            vec![2.5, 0.0, 0.0]
        );
    }

    #[test]
    fn sparse_matches_dense_oracle() {
        let shape = Shape3::new(6, 5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = rand_sparse(&mut rng, shape, 25);
        let dense = s.to_dense();
        for mode in Mode::ALL {
            let m = dense.unfold(mode);
            let b: Vec<f64> = (0..m.ncols())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let a: Vec<f64> = (0..m.nrows())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let want = &m * DMatrix::from_column_slice(b.len(), 1, &b);
            let got = sparse_matvec(&s, mode, &b).unwrap();
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() <= 1e-14);
            }
            let want = m.tr_mul(&DMatrix::from_column_slice(a.len(), 1, &a));
            let got = sparse_rmatvec(&s, mode, &a).unwrap();
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() <= 1e-14);
            }
        }
        assert!(sparse_matvec(&s, Mode::First, &[0.0; 3]).is_err());
    }

    #[test]
    fn same_mode_factor_only() {
        let shape = Shape3::new(5, 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Arc::new(rand_pair(&mut rng, Mode::First, shape, 2));
        let op = SplrOperator::from_terms(shape, vec![(0.5, f.clone())], None).unwrap();
        let b: Vec<f64> = (0..6).map(|x| x as f64).collect();
        let got = splr_matvec(&op.view(Mode::First), &b).unwrap();
        let want = f.u() * f.v().tr_mul(&DMatrix::from_column_slice(6, 1, &b)) * 0.5;
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-14);
        }
    }

    #[test]
    fn zero_operator() {
        let shape = Shape3::new(3, 3, 3).unwrap();
        let op = SplrOperator::from_terms(shape, vec![], None).unwrap();
        let v = op.view(Mode::Second);
        assert_eq!(splr_matvec(&v, &[1.0; 9]).unwrap(), vec![0.0; 3]);
        assert_eq!(splr_rmatvec(&v, &[1.0; 3]).unwrap(), vec![0.0; 9]);
        assert!(splr_matvec(&v, &[1.0; 3]).is_err());
    }

    #[test]
    fn zero_coefficients_dropped() {
        let shape = Shape3::new(3, 3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = Arc::new(rand_pair(&mut rng, Mode::First, shape, 1));
        let s = rand_sparse(&mut rng, shape, 4);
        let op = SplrOperator::from_terms(shape, vec![(0.0, f)], Some((0.0, s))).unwrap();
        assert!(op.low_rank().terms().is_empty());
        assert!(op.sparse().is_none());
    }

    #[test]
    fn full_operator_matches_dense() {
        let shape = Shape3::new(7, 6, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let terms = vec![
            (0.5, Arc::new(rand_pair(&mut rng, Mode::First, shape, 2))),
            (0.5, Arc::new(rand_pair(&mut rng, Mode::Second, shape, 3))),
        ];
        let s = rand_sparse(&mut rng, shape, 30);
        let op = SplrOperator::from_terms(shape, terms, Some((-0.3, s))).unwrap();
        let dense = op.to_dense();
        for mode in Mode::ALL {
            let m = dense.unfold(mode);
            let view = op.view(mode);
            let b: Vec<f64> = (0..m.ncols())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let want = &m * DMatrix::from_column_slice(b.len(), 1, &b);
            let got = splr_matvec(&view, &b).unwrap();
            let scale = want.norm();
            let err: f64 = got
                .iter()
                .zip(want.iter())
                .map(|(g, w)| (g - w).powi(2))
                .sum();
            assert!(err.sqrt() <= 1e-12 * scale);
        }
    }

    #[test]
    fn factor_norm_matches_dense() {
        let shape = Shape3::new(5, 4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut x = FactorTensor::zeros(shape);
        for (c, mode) in [(0.7, Mode::First), (-0.2, Mode::Third), (1.1, Mode::First)] {
            x.push(c, Arc::new(rand_pair(&mut rng, mode, shape, 2)))
                .unwrap();
        }
        let mut y = FactorTensor::zeros(shape);
        y.push(0.4, Arc::new(rand_pair(&mut rng, Mode::Second, shape, 3)))
            .unwrap();
        let (dx, dy) = (x.to_dense(), y.to_dense());
        assert!((factor_norm(&x) - dx.fro_norm()).abs() <= 1e-12 * dx.fro_norm());
        let want = dx.inner(&dy).unwrap();
        assert!((factor_inner(&x, &y).unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn rank_bound_counts_cross_mode_growth() {
        let shape = Shape3::new(20, 20, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let terms = vec![
            (1.0, Arc::new(rand_pair(&mut rng, Mode::First, shape, 2))),
            (1.0, Arc::new(rand_pair(&mut rng, Mode::Second, shape, 2))),
        ];
        let op = SplrOperator::from_terms(shape, terms, None).unwrap();
        assert_eq!(op.low_rank_rank_bound(Mode::First), 2 + 2 * 3);
        assert_eq!(op.low_rank_rank_bound(Mode::Third), 3);
    }
}
