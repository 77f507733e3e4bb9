//! Round-trip invariants of the update kernels over random sizes and seeds.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use incbeam_core::linalg::{
    block_augment_inverse, block_reduce_inverse, pinv_add_column, pinv_remove_column,
    rank_one_update_inverse, rel_frobenius, CMatrix, CVector, Pseudoinverse, SquareInverse,
};

fn cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * FRAC_1_SQRT_2
    })
}

fn cvec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    cmat(rng, n, 1).column(0).into_owned()
}

fn shifted(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    cmat(rng, n, n) + CMatrix::identity(n, n) * Complex64::new(n as f64 + 1.0, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn augment_then_reduce_returns_the_block(seed in any::<u64>(), n in 1usize..12, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = shifted(&mut rng, n + m);
        let a_inv = SquareInverse::invert(&x.view((0, 0), (n, n)).into_owned()).unwrap();
        let full = block_augment_inverse(
            &a_inv,
            &x.view((0, n), (n, m)).into_owned(),
            &x.view((n, 0), (m, n)).into_owned(),
            &x.view((n, n), (m, m)).into_owned(),
        )
        .unwrap();
        let back = block_reduce_inverse(&full, n).unwrap();
        prop_assert!(rel_frobenius(back.matrix(), a_inv.matrix()) < 1e-10);
    }

    #[test]
    fn rank_one_update_then_downdate_is_identity(seed in any::<u64>(), n in 1usize..16, coeff in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = cmat(&mut rng, n, n);
        let pd = &b * b.adjoint() + CMatrix::identity(n, n);
        let inv = SquareInverse::invert(&pd).unwrap();
        let v = cvec(&mut rng, n);
        let up = rank_one_update_inverse(&inv, &v, coeff).unwrap();
        let back = rank_one_update_inverse(&up, &v, -coeff).unwrap();
        prop_assert!(rel_frobenius(back.matrix(), inv.matrix()) < 1e-9);
    }

    #[test]
    fn pinv_add_then_remove_is_identity(seed in any::<u64>(), nt in 2usize..24, frac in 0.0f64..1.0) {
        let k = ((nt - 1) as f64 * frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = cmat(&mut rng, nt, k);
        let (g, _) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let added = pinv_add_column(&g, &h, &cvec(&mut rng, nt)).unwrap();
        prop_assert_eq!(added.k(), k + 1);
        if k == 0 {
            prop_assert!(pinv_remove_column(&added, 0).is_err());
        } else {
            let back = pinv_remove_column(&added, k).unwrap();
            prop_assert!(rel_frobenius(back.matrix(), g.matrix()) < 1e-9);
        }
    }

    #[test]
    fn removal_keeps_columns_dual_to_remaining_channels(seed in any::<u64>(), nt in 2usize..24, frac in 0.0f64..1.0) {
        let k = 2 + ((nt - 2) as f64 * frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = cmat(&mut rng, nt, k);
        let (g, _) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let idx = rng.random_range(0..k);
        let removed = pinv_remove_column(&g, idx).unwrap();
        let prod = removed.matrix().ad_mul(&h.remove_column(idx));
        prop_assert!(rel_frobenius(&prod, &CMatrix::identity(k - 1, k - 1)) < 1e-9);
    }
}
