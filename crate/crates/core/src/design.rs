//! From-scratch beamformer designs for SINR-constrained power minimization.
//!
//! Every design splits into unit-norm directions `u_k` and power loads
//! `β_k = ‖w_k‖²`. Directions come from the channels alone (MRT), from the
//! channel pseudoinverse (ZF), or from the dual variables `ν` of the
//! power-minimization problem (optimal). Power loads then solve the coupling
//! system `A β = σ²`, which makes every SINR constraint tight.
//!
//! The optimal `ν` is the fixed point of
//! `1/ν_k = h_kᴴ (I + Σ_j ν_j h_j h_jᴴ)⁻¹ h_k (1 + 1/γ_k)`, and the optimal
//! direction for user `k` is parallel to `M⁻¹ h_k` with
//! `M = I + Σ_j ν_j h_j h_jᴴ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::error::{BeamError, Result};
use crate::flops;
use crate::linalg::{CMatrix, Pseudoinverse, SquareInverse, SINGULAR_REL};

/// Relative tolerance on negative power loads before a design is declared
/// infeasible.
pub const NEGATIVE_LOAD_REL: f64 = 1e-12;

/// Per-user SINR targets on a linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrTargets(Vec<f64>);

impl SinrTargets {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(BeamError::InvalidArgument("SINR targets must be positive".into()));
        }
        Ok(Self(gamma))
    }

    pub fn uniform(k: usize, gamma: f64) -> Result<Self> {
        Self::new(vec![gamma; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn with_changed(&self, idx: usize, gamma: f64) -> Result<Self> {
        let mut g = self.0.clone();
        g[idx] = gamma;
        Self::new(g)
    }

    pub fn with_appended(&self, gamma: f64) -> Result<Self> {
        let mut g = self.0.clone();
        g.push(gamma);
        Self::new(g)
    }

    pub fn without(&self, idx: usize) -> Self {
        let mut g = self.0.clone();
        g.remove(idx);
        Self(g)
    }
}

/// Unit-norm beamforming directions, one column per user.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    u: CMatrix,
}

impl DirectionSet {
    /// Normalizes each column of `raw` and rotates it so that `h_kᴴ u_k` is
    /// real and positive.
    pub fn normalized(mut raw: CMatrix, h: &CMatrix) -> Result<Self> {
        for k in 0..raw.ncols() {
            let norm = raw.column(k).norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(BeamError::DegenerateChannel(k));
            }
            let gain = h.column(k).dotc(&raw.column(k));
            let phase = if gain.norm() > 0.0 {
                gain.conj() / gain.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            let scale = phase / norm;
            for x in raw.column_mut(k).iter_mut() {
                *x *= scale;
            }
        }
        flops::add_cmac(3 * raw.len());
        Ok(Self { u: raw })
    }

    pub fn empty(nt: usize) -> Self {
        Self { u: CMatrix::zeros(nt, 0) }
    }

    /// Wraps columns that are already unit-norm and phase-aligned.
    pub(crate) fn from_unit_columns(u: CMatrix) -> Self {
        Self { u }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }
}

/// Per-user transmit powers `β_k` in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLoading {
    beta: DVector<f64>,
}

impl PowerLoading {
    pub fn new(beta: DVector<f64>) -> Self {
        Self { beta }
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn total(&self) -> f64 {
        self.beta.sum()
    }
}

/// Coupling matrix: `A_ii = |h_iᴴ u_i|²/γ_i`, `A_ij = −|h_iᴴ u_j|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    a: DMatrix<f64>,
}

impl CouplingMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

/// Directions, power loads and the resulting beamformers `w_k = √β_k·u_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub directions: DirectionSet,
    pub power: PowerLoading,
    pub w: CMatrix,
    pub total_power: f64,
    pub achieved_sinr: Vec<f64>,
}

impl Design {
    pub fn assemble(directions: DirectionSet, power: PowerLoading, ch: &ChannelMatrix) -> Self {
        let mut w = directions.matrix().clone();
        for (k, &b) in power.beta().iter().enumerate() {
            let amp = b.max(0.0).sqrt();
            w.column_mut(k).iter_mut().for_each(|x| *x *= amp);
        }
        let total_power = power.total();
        let achieved_sinr = compute_sinr(ch, &w);
        Self { directions, power, w, total_power, achieved_sinr }
    }

    pub fn empty(nt: usize) -> Self {
        Self {
            directions: DirectionSet::empty(nt),
            power: PowerLoading::new(DVector::zeros(0)),
            w: CMatrix::zeros(nt, 0),
            total_power: 0.0,
            achieved_sinr: Vec::new(),
        }
    }

    /// Largest `|SINR_k − γ_k| / γ_k`.
    pub fn max_sinr_rel_error(&self, gamma: &SinrTargets) -> f64 {
        self.achieved_sinr
            .iter()
            .zip(gamma.as_slice())
            .fold(0.0, |acc, (s, g)| acc.max((s - g).abs() / g))
    }
}

/// Dual variables of the SINR constraints and the cached inverse
/// `M⁻¹ = (I + Σ_j ν_j h_j h_jᴴ)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub nu: Vec<f64>,
    pub m_inv: SquareInverse,
    pub converged: bool,
    pub iterations: usize,
}

impl DualState {
    /// `I + Σ_j ν_j h_j h_jᴴ` for the given channels.
    pub fn gram(ch: &ChannelMatrix, nu: &[f64]) -> CMatrix {
        let nt = ch.nt();
        let mut m = CMatrix::identity(nt, nt);
        for (k, &v) in nu.iter().enumerate() {
            let h = ch.h().column(k);
            m.gerc(Complex64::new(v, 0.0), &h, &h, Complex64::new(1.0, 0.0));
        }
        flops::add_cmac(nt * nt * nu.len());
        m
    }

    /// Dual state with `M⁻¹` formed and inverted from scratch.
    pub fn from_nu(ch: &ChannelMatrix, nu: Vec<f64>) -> Result<Self> {
        let m_inv = SquareInverse::invert(&Self::gram(ch, &nu))?;
        Ok(Self { nu, m_inv, converged: false, iterations: 0 })
    }

    /// `max |(M⁻¹ M − I)_ij|` against the channels the state belongs to.
    pub fn inverse_error(&self, ch: &ChannelMatrix) -> f64 {
        let m = Self::gram(ch, &self.nu);
        let nt = ch.nt();
        let prod = self.m_inv.matrix() * m - CMatrix::identity(nt, nt);
        crate::linalg::max_norm(&prod)
    }

    /// Per-user residual `|ν_k h_kᴴ M⁻¹ h_k (1 + 1/γ_k) − 1|`.
    pub fn residuals(&self, ch: &ChannelMatrix, gamma: &SinrTargets) -> Vec<f64> {
        (0..ch.k())
            .map(|k| {
                let q = quad_form(&self.m_inv, ch, k);
                (self.nu[k] * q * (1.0 + 1.0 / gamma.get(k)) - 1.0).abs()
            })
            .collect()
    }
}

/// `h_kᴴ M⁻¹ h_k`, real for Hermitian `M`.
pub fn quad_form(m_inv: &SquareInverse, ch: &ChannelMatrix, k: usize) -> f64 {
    let h = ch.h().column(k);
    let mh = m_inv.matrix() * h;
    flops::add_cmac(ch.nt() * ch.nt() + ch.nt());
    h.dotc(&mh).re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Stop when the largest relative change of any `ν_k` in a sweep is at
    /// most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500 }
    }
}

/// How to extract the optimal directions from a dual state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionMode {
    /// `u_k ∝ M⁻¹ h_k`.
    #[default]
    ClosedForm,
    /// Principal eigenvector of `(ν_k/γ_k) h_k h_kᴴ − Σ_{j≠k} ν_j h_j h_jᴴ`.
    PowerIteration,
}

pub fn mrt_directions(ch: &ChannelMatrix) -> Result<DirectionSet> {
    if let Some(k) = (0..ch.k()).find(|&k| !(ch.h().column(k).norm() > 0.0)) {
        return Err(BeamError::DegenerateChannel(k));
    }
    DirectionSet::normalized(ch.h().clone(), ch.h())
}

/// Normalized columns of `G = H(HᴴH)⁻¹`, and `G` itself.
pub fn zf_directions(ch: &ChannelMatrix) -> Result<(DirectionSet, Pseudoinverse)> {
    let (g, _) = Pseudoinverse::refresh_from_scratch(ch.h())?;
    let dirs = DirectionSet::normalized(g.matrix().clone(), ch.h())?;
    Ok((dirs, g))
}

/// Solves the dual fixed point starting from `ν_k = γ_k/‖h_k‖²`.
pub fn solve_dual_fixed_point(
    ch: &ChannelMatrix,
    gamma: &SinrTargets,
    opts: FixedPointOptions,
) -> Result<DualState> {
    let init = (0..ch.k())
        .map(|k| gamma.get(k) / ch.h().column(k).norm_squared())
        .collect();
    solve_dual_fixed_point_from(ch, gamma, init, opts)
}

/// Gauss–Seidel sweeps over the users from a given starting point.
///
/// Each step solves user `k`'s equation exactly with the others held fixed,
/// which gives `ν_k = γ_k / (h_kᴴ M₋ₖ⁻¹ h_k)` with `M₋ₖ` the matrix without
/// user `k`'s term.
///
/// The sweeps only need the quadratic forms `h_jᴴ M⁻¹ h_k`, so they run on
/// the `K×K` matrix `Q = Hᴴ M⁻¹ H = R (I + D R)⁻¹` with `R = HᴴH` and
/// `D = diag(ν)`. A change of one `ν_k` is a rank-one update of `Q`, and `Q`
/// is rebuilt from scratch at the end of every sweep. `M⁻¹` itself is
/// inverted once, after convergence.
pub fn solve_dual_fixed_point_from(
    ch: &ChannelMatrix,
    gamma: &SinrTargets,
    init: Vec<f64>,
    opts: FixedPointOptions,
) -> Result<DualState> {
    let k_users = ch.k();
    if gamma.len() != k_users || init.len() != k_users {
        return Err(BeamError::Dimension(format!(
            "{} targets and {} initial duals for {k_users} users",
            gamma.len(),
            init.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(BeamError::InvalidArgument("tolerance must be positive".into()));
    }
    if let Some(k) = (0..k_users).find(|&k| !(ch.h().column(k).norm() > 0.0)) {
        return Err(BeamError::DegenerateChannel(k));
    }
    if let Some(k) = init.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(BeamError::InvalidArgument(format!("initial dual {k} must be finite and nonnegative")));
    }
    if k_users == 0 {
        let mut state = DualState::from_nu(ch, init)?;
        state.converged = true;
        return Ok(state);
    }
    let r = ch.h().ad_mul(ch.h());
    flops::add_cmac(ch.nt() * k_users * k_users);
    let mut nu = init;
    let mut q = projected_inverse(&r, &nu)?;
    let mut last_change = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let mut max_change: f64 = 0.0;
        for k in 0..k_users {
            let qkk = q[(k, k)].re;
            let old = nu[k];
            let q_loo = qkk / (1.0 - old * qkk);
            let new = gamma.get(k) / q_loo;
            if !(new.is_finite() && new > 0.0) {
                return Err(BeamError::ConvergenceFailure { iterations: iter, residual: f64::NAN });
            }
            max_change = max_change.max((new - old).abs() / new);
            let delta = new - old;
            let denom = 1.0 + delta * qkk;
            if !(denom.abs() > SINGULAR_REL) {
                return Err(BeamError::SingularUpdate(format!("dual step denominator {denom:e}")));
            }
            let col = q.column(k).into_owned();
            let row = q.row(k).adjoint();
            q.gerc(Complex64::new(-delta / denom, 0.0), &col, &row, Complex64::new(1.0, 0.0));
            flops::add_cmac(k_users * k_users);
            nu[k] = new;
        }
        q = projected_inverse(&r, &nu)?;
        last_change = max_change;
        if max_change <= opts.tol {
            let mut state = DualState::from_nu(ch, nu)?;
            state.converged = true;
            state.iterations = iter;
            return Ok(state);
        }
    }
    Err(BeamError::ConvergenceFailure { iterations: opts.max_iter, residual: last_change })
}

/// `Hᴴ M⁻¹ H = R (I + D R)⁻¹` for the Gram matrix `R = HᴴH`.
fn projected_inverse(r: &CMatrix, nu: &[f64]) -> Result<CMatrix> {
    let k = r.nrows();
    let mut a = CMatrix::identity(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] += r[(i, j)] * nu[i];
        }
    }
    let a_inv = SquareInverse::invert(&a)?;
    flops::add_cmac(k * k * k);
    Ok(r * a_inv.matrix())
}

/// Optimal directions for the given dual state.
pub fn optimal_directions(
    ch: &ChannelMatrix,
    dual: &DualState,
    gamma: &SinrTargets,
    mode: DirectionMode,
) -> Result<DirectionSet> {
    let (nt, k) = ch.h().shape();
    if dual.nu.len() != k || dual.m_inv.dim() != nt || gamma.len() != k {
        return Err(BeamError::Dimension("dual state does not match channels".into()));
    }
    match mode {
        DirectionMode::ClosedForm => {
            flops::add_cmac(nt * nt * k);
            DirectionSet::normalized(dual.m_inv.matrix() * ch.h(), ch.h())
        }
        DirectionMode::PowerIteration => {
            let mut raw = CMatrix::zeros(nt, k);
            for user in 0..k {
                raw.set_column(user, &principal_eigvec(ch, &dual.nu, gamma, user)?);
            }
            DirectionSet::normalized(raw, ch.h())
        }
    }
}

const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_MAX: usize = 500;

/// Principal eigenvector of `B_k = (ν_k/γ_k) h_k h_kᴴ − Σ_{j≠k} ν_j h_j h_jᴴ`.
///
/// `B_k` has a single positive eigenvalue; every other eigenvalue lies in
/// `[−s, 0]` where `s = Σ_{j≠k} ν_j ‖h_j‖²`. Shifting by `s/2` makes the
/// wanted eigenvalue dominant in magnitude. `B_k` is applied in factored
/// form, `O(nt·K)` per iteration.
fn principal_eigvec(
    ch: &ChannelMatrix,
    nu: &[f64],
    gamma: &SinrTargets,
    user: usize,
) -> Result<nalgebra::DVector<Complex64>> {
    let h = ch.h();
    let (nt, k) = h.shape();
    let weights: Vec<f64> = (0..k)
        .map(|j| if j == user { nu[j] / gamma.get(j) } else { -nu[j] })
        .collect();
    let shift = 0.5
        * (0..k)
            .filter(|&j| j != user)
            .map(|j| nu[j] * h.column(j).norm_squared())
            .sum::<f64>();
    let hk = h.column(user);
    let align = |v: &mut nalgebra::DVector<Complex64>| {
        let p = hk.dotc(v);
        let n = v.norm();
        if p.norm() > 0.0 && n > 0.0 {
            let s = p.conj() / (p.norm() * n);
            v.iter_mut().for_each(|x| *x *= s);
        }
    };
    let mut x = hk.normalize();
    let mut delta = f64::INFINITY;
    for _ in 0..POWER_ITER_MAX {
        let mut proj = h.ad_mul(&x);
        for (p, w) in proj.iter_mut().zip(&weights) {
            *p *= *w;
        }
        let mut next = h * proj + &x * Complex64::new(shift, 0.0);
        flops::add_cmac(2 * nt * k + nt);
        align(&mut next);
        delta = (&next - &x).norm();
        x = next;
        if delta <= POWER_ITER_TOL {
            return Ok(x);
        }
    }
    Err(BeamError::ConvergenceFailure { iterations: POWER_ITER_MAX, residual: delta })
}

pub fn build_coupling_matrix(
    ch: &ChannelMatrix,
    dirs: &DirectionSet,
    gamma: &SinrTargets,
) -> Result<CouplingMatrix> {
    let (nt, k) = ch.h().shape();
    if dirs.matrix().shape() != (nt, k) || gamma.len() != k {
        return Err(BeamError::Dimension("directions do not match channels".into()));
    }
    let cross = ch.h().ad_mul(dirs.matrix());
    flops::add_cmac(nt * k * k);
    let a = DMatrix::from_fn(k, k, |i, j| {
        let g = cross[(i, j)].norm_sqr();
        if i == j {
            g / gamma.get(i)
        } else {
            -g
        }
    });
    Ok(CouplingMatrix { a })
}

/// `β = A⁻¹ σ²`, with the inverse returned for later incremental updates.
pub fn power_load_with_inverse(
    a: &CouplingMatrix,
    sigma2: &[f64],
) -> Result<(PowerLoading, SquareInverse<f64>)> {
    let a_inv = SquareInverse::invert(a.matrix())?;
    let power = power_from_inverse(&a_inv, sigma2)?;
    Ok((power, a_inv))
}

pub fn power_load(a: &CouplingMatrix, sigma2: &[f64]) -> Result<PowerLoading> {
    power_load_with_inverse(a, sigma2).map(|(p, _)| p)
}

/// `β = A⁻¹ σ²` from a cached inverse; negative loads mean infeasible.
pub fn power_from_inverse(a_inv: &SquareInverse<f64>, sigma2: &[f64]) -> Result<PowerLoading> {
    if sigma2.len() != a_inv.dim() {
        return Err(BeamError::Dimension(format!(
            "{} noise powers for a {}-user coupling matrix",
            sigma2.len(),
            a_inv.dim()
        )));
    }
    let beta = a_inv.apply(&DVector::from_column_slice(sigma2));
    clamp_loads(beta)
}

fn clamp_loads(mut beta: DVector<f64>) -> Result<PowerLoading> {
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(BeamError::Infeasible { min_load: f64::NAN });
    }
    let scale = beta.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
    let min = beta.min();
    if min < -NEGATIVE_LOAD_REL * scale {
        return Err(BeamError::Infeasible { min_load: min });
    }
    beta.iter_mut().for_each(|b| *b = b.max(0.0));
    Ok(PowerLoading::new(beta))
}

/// Decoupled ZF power loads `β_k = γ_k σ_k² / |h_kᴴ u_k|²`.
pub fn zf_power_load(
    ch: &ChannelMatrix,
    dirs: &DirectionSet,
    gamma: &SinrTargets,
) -> Result<PowerLoading> {
    let (nt, k) = ch.h().shape();
    if dirs.matrix().shape() != (nt, k) || gamma.len() != k {
        return Err(BeamError::Dimension("directions do not match channels".into()));
    }
    flops::add_cmac(nt * k);
    let beta = DVector::from_fn(k, |i, _| {
        let g = ch.h().column(i).dotc(&dirs.matrix().column(i)).norm_sqr();
        gamma.get(i) * ch.noise()[i] / g
    });
    clamp_loads(beta)
}

/// Received SINR of every user under beamformers `w`.
pub fn compute_sinr(ch: &ChannelMatrix, w: &CMatrix) -> Vec<f64> {
    let cross = ch.h().ad_mul(w);
    flops::add_cmac(ch.nt() * ch.k() * w.ncols());
    (0..ch.k())
        .map(|k| {
            let signal = cross[(k, k)].norm_sqr();
            let interference: f64 = (0..w.ncols())
                .filter(|&j| j != k)
                .map(|j| cross[(k, j)].norm_sqr())
                .sum();
            signal / (interference + ch.noise()[k])
        })
        .collect()
}

/// `h_kᴴ Q_k h_k − σ_k²` with `Q_k = w_k w_kᴴ/γ_k − Σ_{j≠k} w_j w_jᴴ`;
/// nonnegative exactly when user `k` meets its target.
pub fn constraint_margin(ch: &ChannelMatrix, w: &CMatrix, gamma: &SinrTargets) -> Vec<f64> {
    let cross = ch.h().ad_mul(w);
    (0..ch.k())
        .map(|k| {
            let interference: f64 = (0..w.ncols())
                .filter(|&j| j != k)
                .map(|j| cross[(k, j)].norm_sqr())
                .sum();
            cross[(k, k)].norm_sqr() / gamma.get(k) - interference - ch.noise()[k]
        })
        .collect()
}

/// Beamforming scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Mrt,
    Zf,
    Optimal,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Mrt => "MRT",
            Scheme::Zf => "ZF",
            Scheme::Optimal => "OPT",
        }
    }
}

/// Full redesign of `scheme` for the given channels and targets.
pub fn redesign(ch: &ChannelMatrix, gamma: &SinrTargets, scheme: Scheme) -> Result<Design> {
    if ch.k() == 0 {
        return Ok(Design::empty(ch.nt()));
    }
    let dirs = match scheme {
        Scheme::Mrt => mrt_directions(ch)?,
        Scheme::Zf => zf_directions(ch)?.0,
        Scheme::Optimal => {
            let dual = solve_dual_fixed_point(ch, gamma, FixedPointOptions::default())?;
            optimal_directions(ch, &dual, gamma, DirectionMode::ClosedForm)?
        }
    };
    let power = match scheme {
        Scheme::Zf => zf_power_load(ch, &dirs, gamma)?,
        _ => power_load(&build_coupling_matrix(ch, &dirs, gamma)?, ch.noise())?,
    };
    Ok(Design::assemble(dirs, power, ch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_norm, CVector};
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_channel(seed: u64, nt: usize, k: usize) -> ChannelMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = CMatrix::from_fn(nt, k, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        ChannelMatrix::new(h, vec![0.1; k]).unwrap()
    }

    /// Channels along distinct coordinate axes with assorted gains/phases.
    fn orthogonal_channel() -> ChannelMatrix {
        let mut h = CMatrix::zeros(5, 3);
        h[(0, 0)] = c(1.0, 1.0);
        h[(2, 1)] = c(0.0, -2.0);
        h[(4, 2)] = c(0.3, 0.0);
        ChannelMatrix::new(h, vec![1.0, 0.5, 2.0]).unwrap()
    }

    fn dir_distance(a: &DirectionSet, b: &DirectionSet) -> f64 {
        max_norm(&(a.matrix() - b.matrix()))
    }

    #[test]
    fn mrt_normalizes_channel() {
        let h = CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]);
        let ch = ChannelMatrix::new(h, vec![1.0]).unwrap();
        let u = mrt_directions(&ch).unwrap();
        let s = 0.5f64.sqrt();
        assert!((u.matrix()[(0, 0)] - c(s, 0.0)).norm() < 1e-15);
        assert!((u.matrix()[(1, 0)] - c(0.0, s)).norm() < 1e-15);
    }

    #[test]
    fn mrt_of_orthonormal_channels_is_identity() {
        let ch = ChannelMatrix::new(CMatrix::identity(4, 3), vec![1.0; 3]).unwrap();
        assert_eq!(mrt_directions(&ch).unwrap().matrix(), &CMatrix::identity(4, 3));
    }

    #[test]
    fn mrt_rejects_zero_channel() {
        let ch = ChannelMatrix::new(CMatrix::zeros(3, 2), vec![1.0; 2]).unwrap();
        assert_eq!(mrt_directions(&ch), Err(BeamError::DegenerateChannel(0)));
    }

    #[test]
    fn unit_norm_directions() {
        let ch = random_channel(1, 6, 4);
        for dirs in [mrt_directions(&ch).unwrap(), zf_directions(&ch).unwrap().0] {
            for col in dirs.matrix().column_iter() {
                assert!((col.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zf_equals_mrt_for_orthogonal_channels() {
        let ch = orthogonal_channel();
        let zf = zf_directions(&ch).unwrap().0;
        assert!(dir_distance(&zf, &mrt_directions(&ch).unwrap()) < 1e-15);
    }

    #[test]
    fn zf_nulls_interference() {
        let ch = random_channel(2, 6, 3);
        let (dirs, g) = zf_directions(&ch).unwrap();
        let gh = g.matrix().adjoint() * ch.h();
        assert!(max_norm(&(gh - CMatrix::identity(3, 3))) < 1e-9);
        let cross = ch.h().ad_mul(dirs.matrix());
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(cross[(i, j)].norm() < 1e-9 * ch.h().column(i).norm());
                }
            }
        }
    }

    #[test]
    fn zf_single_user_is_mrt() {
        let ch = random_channel(3, 4, 1);
        let zf = zf_directions(&ch).unwrap().0;
        assert!(dir_distance(&zf, &mrt_directions(&ch).unwrap()) < 1e-14);
    }

    #[test]
    fn zf_rejects_too_many_users() {
        let ch = random_channel(4, 3, 4);
        assert!(matches!(zf_directions(&ch), Err(BeamError::RankDeficient(_))));
    }

    #[test]
    fn single_user_dual_closed_form() {
        let ch = random_channel(5, 4, 1);
        let gamma = SinrTargets::uniform(1, 3.0).unwrap();
        let dual = solve_dual_fixed_point(&ch, &gamma, FixedPointOptions::default()).unwrap();
        let expected = 3.0 / ch.h().column(0).norm_squared();
        assert!((dual.nu[0] / expected - 1.0).abs() < 1e-12);
        assert!(dual.converged);
    }

    #[test]
    fn orthogonal_dual_closed_form() {
        let ch = orthogonal_channel();
        let gamma = SinrTargets::new(vec![1.0, 2.0, 4.0]).unwrap();
        let dual = solve_dual_fixed_point(&ch, &gamma, FixedPointOptions::default()).unwrap();
        for k in 0..3 {
            let expected = gamma.get(k) / ch.h().column(k).norm_squared();
            assert!((dual.nu[k] / expected - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_residual_small() {
        let ch = random_channel(6, 4, 2);
        let gamma = SinrTargets::uniform(2, 1.0).unwrap();
        let dual = solve_dual_fixed_point(&ch, &gamma, FixedPointOptions::default()).unwrap();
        assert!(dual.residuals(&ch, &gamma).iter().all(|&r| r < 1e-8));
        assert!(dual.inverse_error(&ch) < 1e-8);
    }

    #[test]
    fn fixed_point_reports_iteration_cap() {
        let ch = random_channel(7, 4, 3);
        let gamma = SinrTargets::uniform(3, 10.0).unwrap();
        let opts = FixedPointOptions { tol: 1e-14, max_iter: 1 };
        assert!(matches!(
            solve_dual_fixed_point(&ch, &gamma, opts),
            Err(BeamError::ConvergenceFailure { iterations: 1, .. })
        ));
    }

    #[test]
    fn single_user_optimal_direction_is_mrt() {
        let ch = random_channel(8, 5, 1);
        let gamma = SinrTargets::uniform(1, 2.0).unwrap();
        let dual = solve_dual_fixed_point(&ch, &gamma, FixedPointOptions::default()).unwrap();
        let mrt = mrt_directions(&ch).unwrap();
        for mode in [DirectionMode::ClosedForm, DirectionMode::PowerIteration] {
            let u = optimal_directions(&ch, &dual, &gamma, mode).unwrap();
            assert!(dir_distance(&u, &mrt) < 1e-9);
        }
    }

    #[test]
    fn orthogonal_optimal_directions_are_mrt() {
        let ch = orthogonal_channel();
        let gamma = SinrTargets::uniform(3, 2.0).unwrap();
        let dual = solve_dual_fixed_point(&ch, &gamma, FixedPointOptions::default()).unwrap();
        let u = optimal_directions(&ch, &dual, &gamma, DirectionMode::ClosedForm).unwrap();
        assert!(dir_distance(&u, &mrt_directions(&ch).unwrap()) < 1e-14);
    }

    #[test]
    fn closed_form_and_power_iteration_agree() {
        let ch = random_channel(9, 8, 4);
        let gamma = SinrTargets::uniform(4, 1.0).unwrap();
        let dual = solve_dual_fixed_point(&ch, &gamma, FixedPointOptions::default()).unwrap();
        let a = optimal_directions(&ch, &dual, &gamma, DirectionMode::ClosedForm).unwrap();
        let b = optimal_directions(&ch, &dual, &gamma, DirectionMode::PowerIteration).unwrap();
        for k in 0..4 {
            assert!((a.matrix().column(k) - b.matrix().column(k)).norm() < 1e-6);
        }
    }

    #[test]
    fn coupling_matrix_entries() {
        let ch = random_channel(10, 5, 3);
        let gamma = SinrTargets::new(vec![1.0, 2.0, 0.5]).unwrap();
        let dirs = mrt_directions(&ch).unwrap();
        let a = build_coupling_matrix(&ch, &dirs, &gamma).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let hi = ch.column(i);
                let uj: CVector = dirs.matrix().column(j).into_owned();
                let mut g = 0.0;
                let mut acc = c(0.0, 0.0);
                for n in 0..5 {
                    acc += hi[n].conj() * uj[n];
                }
                g += acc.norm_sqr();
                let expected = if i == j { g / gamma.get(i) } else { -g };
                assert!((a.matrix()[(i, j)] - expected).abs() < 1e-14);
            }
        }
        assert!((0..3).all(|i| a.matrix()[(i, i)] > 0.0));
    }

    #[test]
    fn coupling_is_diagonal_for_zf() {
        let ch = random_channel(11, 6, 3);
        let gamma = SinrTargets::uniform(3, 2.0).unwrap();
        let dirs = zf_directions(&ch).unwrap().0;
        let a = build_coupling_matrix(&ch, &dirs, &gamma).unwrap();
        let off = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { a.matrix()[(i, j)] });
        assert!(off.amax() < 1e-20 * a.matrix().amax().max(1.0) + 1e-18);
    }

    #[test]
    fn single_user_power_load() {
        let ch = random_channel(12, 4, 1);
        let gamma = SinrTargets::uniform(1, 3.0).unwrap();
        for dirs in [mrt_directions(&ch).unwrap(), zf_directions(&ch).unwrap().0] {
            let beta = power_load(&build_coupling_matrix(&ch, &dirs, &gamma).unwrap(), ch.noise())
                .unwrap();
            let expected = 3.0 * 0.1 / ch.h().column(0).norm_squared();
            assert!((beta.beta()[0] / expected - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zf_power_load_matches_general_solve() {
        let ch = random_channel(13, 6, 4);
        let gamma = SinrTargets::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let dirs = zf_directions(&ch).unwrap().0;
        let direct = zf_power_load(&ch, &dirs, &gamma).unwrap();
        let general =
            power_load(&build_coupling_matrix(&ch, &dirs, &gamma).unwrap(), ch.noise()).unwrap();
        let rel = (direct.beta() - general.beta()).amax() / general.beta().amax();
        assert!(rel < 1e-12);
    }

    #[test]
    fn mrt_with_nearly_parallel_channels_is_infeasible() {
        let h = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.05, 0.0)]);
        let ch = ChannelMatrix::new(h, vec![1.0, 1.0]).unwrap();
        let gamma = SinrTargets::uniform(2, 10.0).unwrap();
        let dirs = mrt_directions(&ch).unwrap();
        let a = build_coupling_matrix(&ch, &dirs, &gamma).unwrap();
        assert!(matches!(power_load(&a, ch.noise()), Err(BeamError::Infeasible { .. })));
    }

    #[test]
    fn singular_coupling_matrix() {
        let a = CouplingMatrix { a: DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) };
        assert!(matches!(power_load(&a, &[1.0, 1.0]), Err(BeamError::SingularUpdate(_))));
    }

    #[test]
    fn assemble_totals() {
        let ch = random_channel(14, 3, 2);
        let dirs = mrt_directions(&ch).unwrap();
        let zero = Design::assemble(dirs.clone(), PowerLoading::new(dvector![0.0, 0.0]), &ch);
        assert_eq!(zero.total_power, 0.0);
        assert_eq!(zero.w, CMatrix::zeros(3, 2));
        let d = Design::assemble(dirs, PowerLoading::new(dvector![1.0, 2.0]), &ch);
        assert_eq!(d.total_power, 3.0);
        let by_norm: f64 = d.w.column_iter().map(|c| c.norm_squared()).sum();
        assert!((by_norm - 3.0).abs() < 1e-12 * 3.0);
        for (k, b) in [1.0, 2.0].iter().enumerate() {
            assert!((d.w.column(k).norm_squared() / b - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_user_sinr() {
        let ch = random_channel(15, 4, 1);
        let u = mrt_directions(&ch).unwrap();
        let d = Design::assemble(u, PowerLoading::new(dvector![0.7]), &ch);
        let expected = 0.7 * ch.h().column(0).norm_squared() / 0.1;
        assert!((d.achieved_sinr[0] / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn every_scheme_meets_targets_with_equality() {
        let ch = random_channel(16, 6, 3);
        let gamma = SinrTargets::new(vec![1.0, 2.0, 1.5]).unwrap();
        for scheme in [Scheme::Zf, Scheme::Optimal, Scheme::Mrt] {
            let d = redesign(&ch, &gamma, scheme).unwrap();
            assert!(d.max_sinr_rel_error(&gamma) < 1e-6, "{scheme:?}");
        }
        let zf = redesign(&ch, &gamma, Scheme::Zf).unwrap();
        assert!(zf.max_sinr_rel_error(&gamma) < 1e-12);
    }

    #[test]
    fn margins() {
        let ch = random_channel(17, 6, 3);
        let gamma = SinrTargets::uniform(3, 2.0).unwrap();
        let d = redesign(&ch, &gamma, Scheme::Optimal).unwrap();
        for (k, m) in constraint_margin(&ch, &d.w, &gamma).iter().enumerate() {
            assert!(m.abs() <= 1e-6 * ch.noise()[k]);
        }
        let zero = constraint_margin(&ch, &CMatrix::zeros(6, 3), &gamma);
        assert!(zero.iter().zip(ch.noise()).all(|(m, s)| (m + s).abs() < 1e-18));
        let doubled = d.w.scale(2f64.sqrt());
        assert!(constraint_margin(&ch, &doubled, &gamma).iter().all(|&m| m > 0.0));
    }

    #[test]
    fn optimal_is_cheapest() {
        for seed in 0..20 {
            let ch = random_channel(100 + seed, 6, 3);
            let gamma = SinrTargets::uniform(3, 2.0).unwrap();
            let opt = redesign(&ch, &gamma, Scheme::Optimal).unwrap().total_power;
            let zf = redesign(&ch, &gamma, Scheme::Zf).unwrap().total_power;
            assert!(opt <= zf * (1.0 + 1e-9));
            if let Ok(mrt) = redesign(&ch, &gamma, Scheme::Mrt) {
                assert!(opt <= mrt.total_power * (1.0 + 1e-9));
            }
        }
    }
}
