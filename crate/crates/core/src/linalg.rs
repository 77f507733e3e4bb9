//! Incremental maintenance of matrix inverses and channel pseudoinverses.
//!
//! Three kernels cover every update the beamformers need:
//!
//! * partitioned (Schur complement) inversion, to grow an inverse by a
//!   border or to shrink it back to a leading block;
//! * the Sherman–Morrison rank-one update `(A + c·v vᴴ)⁻¹`, with `c < 0`
//!   giving downdates;
//! * direct column insertion/removal on the pseudoinverse `G = H(HᴴH)⁻¹`,
//!   which only touches the columns of `G` and costs `O(nt·k)`.
//!
//! Everything here is a pure function of its inputs. Singularity thresholds
//! are relative to the max-norm of the data involved, since channel gains in
//! a cell span many orders of magnitude.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{BeamError, Result};
use crate::flops;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative threshold below which a pivot is treated as zero.
pub const SINGULAR_REL: f64 = 1e-12;
/// Relative threshold on `‖g_idx‖²` when removing a pseudoinverse column.
pub const REMOVE_REL: f64 = 1e-14;
/// Relative residual below which a new channel counts as linearly dependent.
pub const DEPENDENT_REL: f64 = 1e-10;

/// Field the kernels operate over: real for coupling matrices, complex for
/// anything built from channels.
pub trait Scalar: ComplexField<RealField = f64> + Copy {
    /// Real flops per multiply-accumulate.
    const MAC_FLOPS: u64;
}

impl Scalar for f64 {
    const MAC_FLOPS: u64 = 2;
}

impl Scalar for Complex64 {
    const MAC_FLOPS: u64 = flops::CMAC;
}

fn count<T: Scalar>(macs: usize) {
    flops::add(T::MAC_FLOPS * macs as u64);
}

/// Largest entry modulus.
pub fn max_norm<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.modulus()))
}

/// `‖x − y‖_F / ‖y‖_F`, falling back to the absolute difference when `y = 0`.
pub fn rel_frobenius<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> f64 {
    let diff = (x - y).norm();
    let base = y.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// The stored inverse of some square matrix `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareInverse<T: Scalar = Complex64> {
    inv: DMatrix<T>,
}

impl<T: Scalar> SquareInverse<T> {
    /// Wraps a matrix that is already an inverse.
    pub fn from_inverse(inv: DMatrix<T>) -> Result<Self> {
        if !inv.is_square() {
            return Err(BeamError::Dimension(format!(
                "inverse must be square, got {}x{}",
                inv.nrows(),
                inv.ncols()
            )));
        }
        if inv.iter().any(|x| !(x.real().is_finite() && x.imaginary().is_finite())) {
            return Err(BeamError::SingularUpdate("non-finite inverse entry".into()));
        }
        Ok(Self { inv })
    }

    /// Inverts `a` from scratch with partial-pivoting LU.
    pub fn invert(a: &DMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(BeamError::Dimension(format!(
                "cannot invert a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        if n == 0 {
            return Ok(Self { inv: DMatrix::zeros(0, 0) });
        }
        let scale = max_norm(a);
        let lu = a.clone().lu();
        let min_pivot = lu
            .u()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |acc, x| acc.min(x.modulus()));
        if !(min_pivot > SINGULAR_REL * scale) {
            return Err(BeamError::SingularUpdate(format!(
                "pivot {min_pivot:e} below threshold at scale {scale:e}"
            )));
        }
        count::<T>(n * n * n);
        let inv = lu
            .try_inverse()
            .ok_or_else(|| BeamError::SingularUpdate("LU inverse failed".into()))?;
        Self::from_inverse(inv)
    }

    /// Identity of size `n`, the inverse of itself.
    pub fn identity(n: usize) -> Self {
        Self { inv: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.inv.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.inv
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.inv
    }

    /// `inv · rhs`.
    pub fn apply(&self, rhs: &DVector<T>) -> DVector<T> {
        count::<T>(self.dim() * self.dim());
        &self.inv * rhs
    }
}

fn invert_pivot_block<T: Scalar>(block: &DMatrix<T>, scale: f64) -> Result<DMatrix<T>> {
    if block.nrows() == 1 {
        let s = block[(0, 0)];
        if !(s.modulus() > SINGULAR_REL * scale) {
            return Err(BeamError::SingularUpdate(format!(
                "scalar pivot {:e} below threshold at scale {scale:e}",
                s.modulus()
            )));
        }
        return Ok(DMatrix::from_element(1, 1, T::one() / s));
    }
    let lu = block.clone().lu();
    let min_pivot = lu
        .u()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |acc, x| acc.min(x.modulus()));
    if !(min_pivot > SINGULAR_REL * scale) {
        return Err(BeamError::SingularUpdate(format!(
            "block pivot {min_pivot:e} below threshold at scale {scale:e}"
        )));
    }
    let m = block.nrows();
    count::<T>(m * m * m);
    lu.try_inverse()
        .ok_or_else(|| BeamError::SingularUpdate("pivot block inverse failed".into()))
}

/// Inverse of the bordered matrix `[[A, B], [C, D]]` given `A⁻¹`.
///
/// With `E = (D − C A⁻¹ B)⁻¹` the result is
/// `[[A⁻¹ + A⁻¹B E C A⁻¹, −A⁻¹B E], [−E C A⁻¹, E]]`. For a one-row border
/// the only inversion is a scalar reciprocal.
pub fn block_augment_inverse<T: Scalar>(
    a_inv: &SquareInverse<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    d: &DMatrix<T>,
) -> Result<SquareInverse<T>> {
    let n = a_inv.dim();
    let m = d.nrows();
    if !d.is_square() || b.shape() != (n, m) || c.shape() != (m, n) {
        return Err(BeamError::Dimension(format!(
            "border shapes b={:?} c={:?} d={:?} do not fit a {n}x{n} block",
            b.shape(),
            c.shape(),
            d.shape()
        )));
    }
    if m == 0 {
        return Ok(a_inv.clone());
    }
    let ai = a_inv.matrix();
    let ai_b = ai * b;
    let c_ai = c * ai;
    let c_ai_b = c * &ai_b;
    count::<T>(2 * n * n * m + m * m * n);

    let schur = d - &c_ai_b;
    let scale = max_norm(d).max(max_norm(&c_ai_b));
    let e = invert_pivot_block(&schur, scale)?;

    let ai_b_e = &ai_b * &e;
    let e_c_ai = &e * &c_ai;
    let top_left = ai + &ai_b_e * &c_ai;
    count::<T>(2 * n * m * m + n * n * m);

    let mut full = DMatrix::zeros(n + m, n + m);
    full.view_mut((0, 0), (n, n)).copy_from(&top_left);
    full.view_mut((0, n), (n, m)).copy_from(&(-ai_b_e));
    full.view_mut((n, 0), (m, n)).copy_from(&(-e_c_ai));
    full.view_mut((n, n), (m, m)).copy_from(&e);
    SquareInverse::from_inverse(full)
}

/// Recovers `A⁻¹` from the inverse of `[[A, B], [C, D]]`, where `A` is the
/// leading `split × split` block.
///
/// Partitioning the full inverse as `[[P, Q], [R, E]]` gives
/// `A⁻¹ = P − Q E⁻¹ R`.
pub fn block_reduce_inverse<T: Scalar>(
    full_inv: &SquareInverse<T>,
    split: usize,
) -> Result<SquareInverse<T>> {
    let dim = full_inv.dim();
    if split > dim {
        return Err(BeamError::Dimension(format!("split {split} exceeds dimension {dim}")));
    }
    let m = dim - split;
    if m == 0 {
        return Ok(full_inv.clone());
    }
    let full = full_inv.matrix();
    let p = full.view((0, 0), (split, split));
    let q = full.view((0, split), (split, m));
    let r = full.view((split, 0), (m, split));
    let e = full.view((split, split), (m, m)).into_owned();
    let e_inv = invert_pivot_block(&e, max_norm(full))?;
    count::<T>(split * m * m + split * split * m);
    let reduced = p - q * (e_inv * r);
    SquareInverse::from_inverse(reduced)
}

/// Removes row and column `idx` from the matrix whose inverse is `full_inv`.
///
/// Equivalent to permuting `idx` to the last position and calling
/// [`block_reduce_inverse`] with a one-wide border.
pub fn block_reduce_inverse_at<T: Scalar>(
    full_inv: &SquareInverse<T>,
    idx: usize,
) -> Result<SquareInverse<T>> {
    let dim = full_inv.dim();
    if idx >= dim {
        return Err(BeamError::InvalidArgument(format!("index {idx} out of range for {dim}")));
    }
    let full = full_inv.matrix();
    let e = full[(idx, idx)];
    if !(e.modulus() > SINGULAR_REL * max_norm(full)) {
        return Err(BeamError::SingularUpdate(format!(
            "pivot {:e} at index {idx} below threshold",
            e.modulus()
        )));
    }
    let keep: Vec<usize> = (0..dim).filter(|&i| i != idx).collect();
    let p = full.select_rows(&keep).select_columns(&keep);
    let q = full.column(idx).select_rows(&keep);
    let r = full.row(idx).select_columns(&keep);
    count::<T>((dim - 1) * (dim - 1));
    let reduced = p - (q * r) * (T::one() / e);
    SquareInverse::from_inverse(reduced)
}

/// `(A + coeff·v vᴴ)⁻¹` from `A⁻¹` in `O(n²)`.
///
/// Negative `coeff` removes a previously added term.
pub fn rank_one_update_inverse<T: Scalar>(
    a_inv: &SquareInverse<T>,
    v: &DVector<T>,
    coeff: f64,
) -> Result<SquareInverse<T>> {
    let n = a_inv.dim();
    if v.len() != n {
        return Err(BeamError::Dimension(format!("vector length {} vs dimension {n}", v.len())));
    }
    let ai = a_inv.matrix();
    let ai_v = ai * v;
    // (vᴴA⁻¹)ᴴ, so the correction is A⁻¹v · yᴴ.
    let y = ai.ad_mul(v);
    let quad = v.dotc(&ai_v);
    count::<T>(3 * n * n);

    let scaled = quad.scale(coeff);
    let denom = T::one() + scaled;
    if !(denom.modulus() > SINGULAR_REL * scaled.modulus().max(1.0)) {
        return Err(BeamError::SingularUpdate(format!(
            "rank-one denominator {:e}",
            denom.modulus()
        )));
    }
    let factor = T::from_real(coeff) / denom;
    let mut updated = ai.clone();
    updated.gerc(-factor, &ai_v, &y, T::one());
    SquareInverse::from_inverse(updated)
}

/// Pseudoinverse `G = H(HᴴH)⁻¹` of a full-column-rank channel matrix.
///
/// Column `g_j` is orthogonal to every channel except `h_j`, and
/// `g_jᴴ h_j = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pseudoinverse {
    g: CMatrix,
}

impl Pseudoinverse {
    pub fn from_matrix(g: CMatrix) -> Self {
        Self { g }
    }

    /// Empty pseudoinverse of a system with `nt` antennas and no users.
    pub fn empty(nt: usize) -> Self {
        Self { g: CMatrix::zeros(nt, 0) }
    }

    pub fn nt(&self) -> usize {
        self.g.nrows()
    }

    pub fn k(&self) -> usize {
        self.g.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.g
    }

    pub fn into_matrix(self) -> CMatrix {
        self.g
    }

    /// Recomputes `G` and `(HᴴH)⁻¹` from a thin QR factorization of `H`.
    ///
    /// This is the escape hatch for accumulated drift after a long chain of
    /// incremental updates.
    pub fn refresh_from_scratch(h: &CMatrix) -> Result<(Self, SquareInverse)> {
        let (nt, k) = h.shape();
        if k > nt {
            return Err(BeamError::RankDeficient(format!("{k} users exceed {nt} antennas")));
        }
        if k == 0 {
            return Ok((Self::empty(nt), SquareInverse::identity(0)));
        }
        let col_scale = h.column_iter().fold(0.0f64, |acc, c| acc.max(c.norm()));
        let qr = h.clone().qr();
        let r = qr.r();
        let min_diag = r.diagonal().iter().fold(f64::INFINITY, |acc, x| acc.min(x.modulus()));
        if !(min_diag > DEPENDENT_REL * col_scale) {
            return Err(BeamError::RankDeficient(format!(
                "R diagonal {min_diag:e} at column scale {col_scale:e}"
            )));
        }
        let r_inv = r
            .solve_upper_triangular(&CMatrix::identity(k, k))
            .ok_or_else(|| BeamError::RankDeficient("triangular solve failed".into()))?;
        let q = qr.q();
        let g = q * r_inv.adjoint();
        let gram_inv = &r_inv * r_inv.adjoint();
        flops::add_cmac(2 * nt * k * k + nt * k * k + k * k * k);
        Ok((Self { g }, SquareInverse::from_inverse(gram_inv)?))
    }

    /// `(HᴴH)⁻¹`, recovered from `G` alone as `GᴴG`.
    pub fn gram_inverse(&self) -> SquareInverse {
        flops::add_cmac(self.nt() * self.k() * self.k());
        SquareInverse { inv: self.g.adjoint() * &self.g }
    }
}

/// Pseudoinverse of `H` with column `idx` deleted, in `O(nt·k)`.
///
/// Each surviving column becomes `g_j − (g_idxᴴ g_j / g_idxᴴ g_idx)·g_idx`,
/// the minimum-norm vector in `span{g_j, g_idx}` that keeps `ĝ_jᴴ h_j = 1`.
pub fn pinv_remove_column(g: &Pseudoinverse, idx: usize) -> Result<Pseudoinverse> {
    let k = g.k();
    if idx >= k {
        return Err(BeamError::InvalidArgument(format!("column {idx} out of range for {k}")));
    }
    if k == 1 {
        return Err(BeamError::EmptyResult);
    }
    let gm = g.matrix();
    let removed = gm.column(idx);
    let removed_sq = removed.norm_squared();
    let scale = max_norm(gm).powi(2);
    if !(removed_sq > REMOVE_REL * scale) {
        return Err(BeamError::SingularUpdate(format!(
            "removed column norm² {removed_sq:e} at scale {scale:e}"
        )));
    }
    let nt = g.nt();
    let mut out = CMatrix::zeros(nt, k - 1);
    for (dst, j) in (0..k).filter(|&j| j != idx).enumerate() {
        let gj = gm.column(j);
        let coef = removed.dotc(&gj) / removed_sq;
        out.set_column(dst, &(gj - removed * coef));
    }
    flops::add_cmac(2 * nt * (k - 1) + nt);
    Ok(Pseudoinverse { g: out })
}

/// Pseudoinverse of `[H, h_new]` from that of `H`, in `O(nt·k)`.
///
/// The new column is `c·(h_new − G Hᴴ h_new)`, scaled so that it has unit
/// inner product with `h_new`; every old column then sheds its component
/// along that vector so it becomes orthogonal to `h_new`.
pub fn pinv_add_column(g: &Pseudoinverse, h: &CMatrix, h_new: &CVector) -> Result<Pseudoinverse> {
    let (nt, k) = h.shape();
    if g.matrix().shape() != (nt, k) || h_new.len() != nt {
        return Err(BeamError::Dimension(format!(
            "pseudoinverse {:?}, channels {:?}, new channel {}",
            g.matrix().shape(),
            h.shape(),
            h_new.len()
        )));
    }
    if k >= nt {
        return Err(BeamError::RankDeficient(format!("already {k} users on {nt} antennas")));
    }
    let gm = g.matrix();
    let residual = if k == 0 {
        h_new.clone()
    } else {
        let proj = h.ad_mul(h_new);
        h_new - gm * proj
    };
    flops::add_cmac(2 * nt * k + nt);
    let res_sq = residual.norm_squared();
    let h_norm = h_new.norm();
    if !(res_sq.sqrt() > DEPENDENT_REL * h_norm) {
        return Err(BeamError::RankDeficient(format!(
            "new channel residual {:e} relative to norm {h_norm:e}",
            res_sq.sqrt()
        )));
    }
    let g_new = residual.unscale(res_sq);
    let pivot = h_new.dotc(&g_new);

    let mut out = CMatrix::zeros(nt, k + 1);
    for j in 0..k {
        let gj = gm.column(j);
        let coef = h_new.dotc(&gj) / pivot;
        out.set_column(j, &(gj - &g_new * coef));
    }
    out.set_column(k, &g_new);
    flops::add_cmac(2 * nt * k + 2 * nt);
    Ok(Pseudoinverse { g: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_cmatrix(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMatrix {
        CMatrix::from_fn(r, k, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_hpd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let x = random_cmatrix(rng, n, n);
        &x * x.adjoint() + CMatrix::identity(n, n)
    }

    /// Moore–Penrose pseudoinverse transposed to the `H(HᴴH)⁻¹` layout,
    /// through the SVD rather than any normal-equation route.
    fn svd_pinv(h: &CMatrix) -> CMatrix {
        h.clone().pseudo_inverse(1e-14).unwrap().adjoint()
    }

    #[test]
    fn augment_identity_with_zero_border_is_identity() {
        let out = block_augment_inverse(
            &SquareInverse::<Complex64>::identity(2),
            &CMatrix::zeros(2, 1),
            &CMatrix::zeros(1, 2),
            &CMatrix::from_element(1, 1, c(1.0)),
        )
        .unwrap();
        assert_eq!(out.matrix(), &CMatrix::identity(3, 3));
    }

    #[test]
    fn augment_scalar_matches_hand_inverse() {
        let out = block_augment_inverse(
            &SquareInverse::from_inverse(dmatrix![1.0]).unwrap(),
            &dmatrix![0.5],
            &dmatrix![0.5],
            &dmatrix![1.0],
        )
        .unwrap();
        let expected = dmatrix![4.0 / 3.0, -2.0 / 3.0; -2.0 / 3.0, 4.0 / 3.0];
        assert!((out.matrix() - expected).amax() < 1e-15);
    }

    #[test]
    fn augment_random_hpd_matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let full = random_hpd(&mut rng, 5);
        let a = full.view((0, 0), (4, 4)).into_owned();
        let out = block_augment_inverse(
            &SquareInverse::invert(&a).unwrap(),
            &full.view((0, 4), (4, 1)).into_owned(),
            &full.view((4, 0), (1, 4)).into_owned(),
            &full.view((4, 4), (1, 1)).into_owned(),
        )
        .unwrap();
        let direct = full.try_inverse().unwrap();
        assert!(rel_frobenius(out.matrix(), &direct) < 1e-10);
    }

    #[test]
    fn augment_rejects_singular_schur_complement() {
        // [[1, 1], [1, 1]] is singular.
        let err = block_augment_inverse(
            &SquareInverse::from_inverse(dmatrix![1.0]).unwrap(),
            &dmatrix![1.0],
            &dmatrix![1.0],
            &dmatrix![1.0],
        )
        .unwrap_err();
        assert!(matches!(err, BeamError::SingularUpdate(_)));
    }

    #[test]
    fn augment_with_wide_border() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let full = random_hpd(&mut rng, 6);
        let a = full.view((0, 0), (3, 3)).into_owned();
        let out = block_augment_inverse(
            &SquareInverse::invert(&a).unwrap(),
            &full.view((0, 3), (3, 3)).into_owned(),
            &full.view((3, 0), (3, 3)).into_owned(),
            &full.view((3, 3), (3, 3)).into_owned(),
        )
        .unwrap();
        assert!(rel_frobenius(out.matrix(), &full.try_inverse().unwrap()) < 1e-10);
    }

    #[test]
    fn reduce_identity() {
        let out = block_reduce_inverse(&SquareInverse::<f64>::identity(3), 2).unwrap();
        assert_eq!(out.matrix(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn reduce_recovers_scalar_block() {
        let full = SquareInverse::invert(&dmatrix![1.0, 0.5; 0.5, 1.0]).unwrap();
        let out = block_reduce_inverse(&full, 1).unwrap();
        assert!((out.matrix()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reduce_rejects_singular_trailing_block() {
        let full = SquareInverse::from_inverse(dmatrix![1.0, 2.0; 3.0, 0.0]).unwrap();
        assert!(matches!(
            block_reduce_inverse(&full, 1),
            Err(BeamError::SingularUpdate(_))
        ));
    }

    #[test]
    fn reduce_round_trips_augment() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let full = random_hpd(&mut rng, 6);
        let a = full.view((0, 0), (5, 5)).into_owned();
        let a_inv = SquareInverse::invert(&a).unwrap();
        let aug = block_augment_inverse(
            &a_inv,
            &full.view((0, 5), (5, 1)).into_owned(),
            &full.view((5, 0), (1, 5)).into_owned(),
            &full.view((5, 5), (1, 1)).into_owned(),
        )
        .unwrap();
        let back = block_reduce_inverse(&aug, 5).unwrap();
        assert!(rel_frobenius(back.matrix(), a_inv.matrix()) < 1e-10);
    }

    #[test]
    fn reduce_at_interior_index_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let full = random_hpd(&mut rng, 5);
        let full_inv = SquareInverse::invert(&full).unwrap();
        let keep = [0, 1, 3, 4];
        let sub = full.select_rows(&keep).select_columns(&keep);
        let out = block_reduce_inverse_at(&full_inv, 2).unwrap();
        assert!(rel_frobenius(out.matrix(), &sub.try_inverse().unwrap()) < 1e-10);
    }

    #[test]
    fn rank_one_on_identity() {
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let out = rank_one_update_inverse(&SquareInverse::<f64>::identity(2), &v, 1.0).unwrap();
        assert_eq!(out.matrix(), &dmatrix![0.5, 0.0; 0.0, 1.0]);
    }

    #[test]
    fn rank_one_zero_vector_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a_inv = SquareInverse::invert(&random_hpd(&mut rng, 4)).unwrap();
        let out = rank_one_update_inverse(&a_inv, &CVector::zeros(4), 3.0).unwrap();
        assert_eq!(out, a_inv);
    }

    #[test]
    fn rank_one_matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_hpd(&mut rng, 8);
        let v = random_cmatrix(&mut rng, 8, 1).column(0).into_owned();
        let out = rank_one_update_inverse(&SquareInverse::invert(&a).unwrap(), &v, 0.7).unwrap();
        let direct = (a + (&v * v.adjoint()).scale(0.7)).try_inverse().unwrap();
        assert!(rel_frobenius(out.matrix(), &direct) < 1e-10);
    }

    #[test]
    fn rank_one_downdate_to_singular_is_rejected() {
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let err = rank_one_update_inverse(&SquareInverse::<f64>::identity(2), &v, -1.0).unwrap_err();
        assert!(matches!(err, BeamError::SingularUpdate(_)));
    }

    #[test]
    fn remove_column_with_orthogonal_channels_is_noop_on_survivors() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0), c(3.0), c(0.5)]))
            .insert_rows(3, 1, c(0.0));
        let (g, _) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let out = pinv_remove_column(&g, 1).unwrap();
        assert_eq!(out.matrix().column(0), g.matrix().column(0));
        assert_eq!(out.matrix().column(1), g.matrix().column(2));
    }

    #[test]
    fn remove_column_matches_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_cmatrix(&mut rng, 6, 4);
        let (g, _) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let out = pinv_remove_column(&g, 2).unwrap();
        let reduced = h.clone().remove_column(2);
        assert!(rel_frobenius(out.matrix(), &svd_pinv(&reduced)) < 1e-9);
        let gram = out.matrix().adjoint() * &reduced;
        assert!(max_norm(&(gram - CMatrix::identity(3, 3))) < 1e-9);
    }

    #[test]
    fn remove_down_to_one_column_gives_scaled_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h = random_cmatrix(&mut rng, 5, 2);
        let (g, _) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let out = pinv_remove_column(&g, 1).unwrap();
        let h1 = h.column(0);
        let expected = h1.unscale(h1.norm_squared());
        assert!((out.matrix().column(0) - expected).norm() < 1e-12);
    }

    #[test]
    fn remove_last_column_is_empty_result() {
        let (g, _) = Pseudoinverse::refresh_from_scratch(&CMatrix::identity(3, 1)).unwrap();
        assert_eq!(pinv_remove_column(&g, 0), Err(BeamError::EmptyResult));
    }

    #[test]
    fn add_orthogonal_column() {
        let h = CMatrix::identity(4, 2).scale(2.0);
        let (g, _) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let h_new = CVector::from_vec(vec![c(0.0), c(0.0), Complex64::new(0.0, 3.0), c(0.0)]);
        let out = pinv_add_column(&g, &h, &h_new).unwrap();
        assert_eq!(out.matrix().columns(0, 2), g.matrix().columns(0, 2));
        let expected = h_new.unscale(9.0);
        assert!((out.matrix().column(2) - expected).norm() < 1e-15);
    }

    #[test]
    fn add_to_empty() {
        let h_new = CVector::from_vec(vec![c(1.0), Complex64::new(0.0, 1.0), c(2.0)]);
        let out = pinv_add_column(&Pseudoinverse::empty(3), &CMatrix::zeros(3, 0), &h_new).unwrap();
        let expected = h_new.unscale(6.0);
        assert!((out.matrix().column(0) - expected).norm() < 1e-15);
    }

    #[test]
    fn add_column_matches_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let h = random_cmatrix(&mut rng, 8, 5);
        let h_new = random_cmatrix(&mut rng, 8, 1).column(0).into_owned();
        let (g, _) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let out = pinv_add_column(&g, &h, &h_new).unwrap();
        let mut full = h.clone().insert_column(5, c(0.0));
        full.set_column(5, &h_new);
        assert!(rel_frobenius(out.matrix(), &svd_pinv(&full)) < 1e-9);
    }

    #[test]
    fn add_dependent_column_is_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let h = random_cmatrix(&mut rng, 6, 3);
        let (g, _) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let h_new = h.column(0) * c(2.0) - h.column(2);
        assert!(matches!(
            pinv_add_column(&g, &h, &h_new),
            Err(BeamError::RankDeficient(_))
        ));
    }

    #[test]
    fn add_to_square_system_is_rank_deficient() {
        let h = CMatrix::identity(2, 2);
        let (g, _) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let h_new = CVector::from_vec(vec![c(1.0), c(1.0)]);
        assert!(matches!(
            pinv_add_column(&g, &h, &h_new),
            Err(BeamError::RankDeficient(_))
        ));
    }

    #[test]
    fn gram_inverse_from_pinv_matches_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = random_cmatrix(&mut rng, 7, 4);
        let (g, gram_inv) = Pseudoinverse::refresh_from_scratch(&h).unwrap();
        let direct = (h.adjoint() * &h).try_inverse().unwrap();
        assert!(rel_frobenius(gram_inv.matrix(), &direct) < 1e-10);
        assert!(rel_frobenius(g.gram_inverse().matrix(), &direct) < 1e-10);
    }

    #[test]
    fn refresh_rejects_dependent_columns() {
        let mut h = CMatrix::identity(4, 3);
        let col = h.column(0) + h.column(1);
        h.set_column(2, &col);
        assert!(matches!(
            Pseudoinverse::refresh_from_scratch(&h),
            Err(BeamError::RankDeficient(_))
        ));
    }
}
