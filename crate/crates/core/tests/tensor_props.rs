mod common;

use std::collections::HashSet;

use common::*;
use nort::{sparse_residual, DenseTensor3, Mode, Shape3};
use proptest::prelude::*;

fn shape_strategy() -> impl Strategy<Value = Shape3> {
    (1usize..=7, 1usize..=6, 1usize..=5).prop_map(|(a, b, c)| Shape3::new(a, b, c).unwrap())
}

proptest! {
    #[test]
    fn unfold_positions_are_a_bijection(shape in shape_strategy()) {
        for mode in Mode::ALL {
            let mut seen = HashSet::new();
            for lin in 0..shape.numel() {
                let idx = shape.delinear(lin);
                prop_assert_eq!(shape.linear(idx), lin);
                let (r, c) = shape.unfold_pos(mode, idx);
                prop_assert!(r < shape.dim(mode) && c < shape.unfolded_cols(mode));
                prop_assert!(seen.insert((r, c)));
                prop_assert_eq!(shape.fold_pos(mode, r, c), idx);
            }
        }
    }

    #[test]
    fn fold_inverts_unfold(shape in shape_strategy(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = DenseTensor3::from_fn(shape, |_| rand::Rng::random_range(&mut r, -1.0..1.0));
        for mode in Mode::ALL {
            let m = t.unfold(mode);
            prop_assert_eq!(m.nrows(), shape.dim(mode));
            let back = DenseTensor3::fold(&m, mode, shape).unwrap();
            prop_assert_eq!(back.as_slice(), t.as_slice());
        }
    }

    #[test]
    fn unfolding_columns_run_lower_mode_fastest(shape in shape_strategy()) {
        // Mode-2 unfolding: column index is i1 + I1 * i3.
        let [i1, _, _] = shape.dims();
        for lin in 0..shape.numel() {
            let [a, b, c] = shape.delinear(lin);
            prop_assert_eq!(shape.unfold_pos(Mode::Second, [a, b, c]), (b, a + i1 * c));
        }
    }

    #[test]
    fn sparse_residual_matches_dense(shape in shape_strategy(), seed in any::<u64>(), k in 0usize..3) {
        let mut r = rng(seed);
        let x = random_point(shape, 3, k, &mut r);
        let nnz = (shape.numel() / 3).max(1);
        let obs = random_sparse(shape, nnz, &mut r);
        let res = sparse_residual(&x, &obs).unwrap();
        let dense = x.to_dense();
        prop_assert!(res.same_pattern(&obs));
        for ((idx, got), (_, o)) in res.iter().zip(obs.iter()) {
            prop_assert!((got - (dense.get(idx) - o)).abs() <= 1e-12);
        }
    }
}
