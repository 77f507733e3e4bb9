//! Incremental redesign when a user joins, leaves, or changes its SINR
//! target.
//!
//! What has to change depends on the scheme:
//!
//! | event        | MRT dirs | ZF dirs | OPT dirs | MRT PL | ZF PL | OPT PL |
//! |--------------|----------|---------|----------|--------|-------|--------|
//! | user out     | NC       | C       | C        | C      | NC    | C      |
//! | user in      | NC       | C       | C        | C      | NC    | C      |
//! | target change| NC       | NC      | C        | C      | NC    | C      |
//!
//! ZF power loads are decoupled per user and are simply re-evaluated. MRT
//! keeps `A⁻¹` and edits it with bordered inverses or a rank-one update. ZF
//! directions come from editing the pseudoinverse directly or through the
//! bordered `(HᴴH)⁻¹`. The optimal scheme adjusts only the affected user's
//! dual variable, re-derives all directions from the cached `M⁻¹`, and then
//! recomputes the power loads in full.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::design::{
    build_coupling_matrix, mrt_directions, optimal_directions, power_from_inverse,
    power_load, power_load_with_inverse, solve_dual_fixed_point,
    solve_dual_fixed_point_from, zf_power_load, Design, DirectionMode, DirectionSet,
    DualState, FixedPointOptions, PowerLoading, Scheme, SinrTargets,
};
use crate::error::{BeamError, Result};
use crate::flops;
use crate::linalg::{
    block_augment_inverse, block_reduce_inverse_at, max_norm, pinv_add_column,
    pinv_remove_column, rank_one_update_inverse, CMatrix, CVector, Pseudoinverse, SquareInverse,
};

/// Route for updating ZF directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZfMethod {
    /// Edit the columns of `G` directly, `O(nt·K)`.
    #[default]
    Direct,
    /// Border or shrink `(HᴴH)⁻¹`, then form `G = H (HᴴH)⁻¹`, `O(nt·K²)`.
    Block,
}

/// How the optimal scheme re-estimates dual variables after a change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NuMode {
    /// Re-solve the full fixed point, warm-started from the current duals.
    ExactRefit,
    /// `ν = γ / (hᴴ M₋⁻¹ h)` from the cached inverse without that user.
    #[default]
    InverseApprox,
    /// `ν ≈ γ / ‖h‖²`, exact when the channels are orthogonal.
    OrthogonalApprox,
}

impl NuMode {
    pub fn label(self) -> &'static str {
        match self {
            NuMode::ExactRefit => "exact_refit",
            NuMode::InverseApprox => "inverse_approx",
            NuMode::OrthogonalApprox => "orthogonal_approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdatePolicy {
    pub zf_method: ZfMethod,
    pub nu_mode: NuMode,
    pub fixed_point: FixedPointOptions,
}

/// A change to the served user set.
#[derive(Debug, Clone, PartialEq)]
pub enum ChangeEvent {
    UserIn { h: CVector, gamma: f64, sigma2: f64 },
    UserOut { index: usize },
    GammaChange { index: usize, gamma: f64 },
}

/// Cached ZF state: the pseudoinverse and, when known, `(HᴴH)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfState {
    pub pinv: Pseudoinverse,
    pub gram_inv: Option<SquareInverse>,
}

impl ZfState {
    fn gram_inv_or_derive(&self) -> SquareInverse {
        self.gram_inv.clone().unwrap_or_else(|| self.pinv.gram_inverse())
    }
}

/// A served system together with everything cached for incremental updates.
#[derive(Debug, Clone, PartialEq)]
pub struct LiveSystem {
    pub channel: ChannelMatrix,
    pub gamma: SinrTargets,
    pub scheme: Scheme,
    pub design: Design,
    pub zf: Option<ZfState>,
    pub dual: Option<DualState>,
    pub a_inv: Option<SquareInverse<f64>>,
    user_ids: Vec<u64>,
    next_id: u64,
}

/// Worst-case cache deviations of a [`LiveSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Audit {
    /// `max |GᴴH − I|`.
    pub pinv_identity: f64,
    /// `max |(HᴴH)⁻¹·HᴴH − I|`, when cached.
    pub gram_inverse: f64,
    /// `max |M⁻¹M − I|`.
    pub dual_inverse: f64,
    /// `max |A⁻¹A − I|`.
    pub coupling_inverse: f64,
    /// Largest relative SINR miss.
    pub sinr: f64,
}

impl Audit {
    /// Every cache within `cache_tol`, every SINR within `sinr_tol`.
    pub fn passes(&self, cache_tol: f64, sinr_tol: f64) -> bool {
        self.pinv_identity <= cache_tol
            && self.gram_inverse <= cache_tol
            && self.dual_inverse <= cache_tol
            && self.coupling_inverse <= cache_tol
            && self.sinr <= sinr_tol
    }
}

impl LiveSystem {
    /// Designs `scheme` for the given users from scratch.
    pub fn from_scratch(
        channel: ChannelMatrix,
        gamma: SinrTargets,
        scheme: Scheme,
        opts: FixedPointOptions,
    ) -> Result<Self> {
        if gamma.len() != channel.k() {
            return Err(BeamError::Dimension(format!(
                "{} targets for {} users",
                gamma.len(),
                channel.k()
            )));
        }
        let k = channel.k();
        let mut sys = Self {
            design: Design::empty(channel.nt()),
            channel,
            gamma,
            scheme,
            zf: None,
            dual: None,
            a_inv: None,
            user_ids: (0..k as u64).collect(),
            next_id: k as u64,
        };
        if k == 0 {
            match scheme {
                Scheme::Mrt => sys.a_inv = Some(SquareInverse::identity(0)),
                Scheme::Zf => {
                    sys.zf = Some(ZfState {
                        pinv: Pseudoinverse::empty(sys.nt()),
                        gram_inv: Some(SquareInverse::identity(0)),
                    })
                }
                Scheme::Optimal => sys.dual = Some(solve_dual_fixed_point(&sys.channel, &sys.gamma, opts)?),
            }
            return Ok(sys);
        }
        match scheme {
            Scheme::Mrt => {
                let dirs = mrt_directions(&sys.channel)?;
                let a = build_coupling_matrix(&sys.channel, &dirs, &sys.gamma)?;
                let (power, a_inv) = power_load_with_inverse(&a, sys.channel.noise())?;
                sys.a_inv = Some(a_inv);
                sys.design = Design::assemble(dirs, power, &sys.channel);
            }
            Scheme::Zf => {
                let (pinv, gram_inv) = Pseudoinverse::refresh_from_scratch(sys.channel.h())?;
                let dirs = DirectionSet::normalized(pinv.matrix().clone(), sys.channel.h())?;
                let power = zf_power_load(&sys.channel, &dirs, &sys.gamma)?;
                sys.zf = Some(ZfState { pinv, gram_inv: Some(gram_inv) });
                sys.design = Design::assemble(dirs, power, &sys.channel);
            }
            Scheme::Optimal => {
                let dual = solve_dual_fixed_point(&sys.channel, &sys.gamma, opts)?;
                sys.design = opt_design(&sys.channel, &dual, &sys.gamma)?;
                sys.dual = Some(dual);
            }
        }
        Ok(sys)
    }

    pub fn k(&self) -> usize {
        self.channel.k()
    }

    pub fn nt(&self) -> usize {
        self.channel.nt()
    }

    /// Stable identifiers of the served users, in column order.
    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    pub fn index_of(&self, user_id: u64) -> Option<usize> {
        self.user_ids.iter().position(|&id| id == user_id)
    }

    /// Applies one change and returns the updated system.
    pub fn apply(&self, event: &ChangeEvent, policy: &UpdatePolicy) -> Result<Self> {
        match event {
            ChangeEvent::UserIn { h, gamma, sigma2 } => self.user_in(h, *gamma, *sigma2, policy),
            ChangeEvent::UserOut { index } => self.user_out(*index, policy),
            ChangeEvent::GammaChange { index, gamma } => self.gamma_change(*index, *gamma, policy),
        }
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.k() {
            return Err(BeamError::InvalidArgument(format!(
                "user index {index} out of range for {} users",
                self.k()
            )));
        }
        Ok(())
    }

    fn user_in(&self, h_new: &CVector, gamma_new: f64, sigma2: f64, policy: &UpdatePolicy) -> Result<Self> {
        let channel = self.channel.with_user(h_new, sigma2)?;
        let gamma = self.gamma.with_appended(gamma_new)?;
        let mut next = Self {
            channel,
            gamma,
            scheme: self.scheme,
            design: Design::empty(self.nt()),
            zf: None,
            dual: None,
            a_inv: None,
            user_ids: self.user_ids.iter().copied().chain([self.next_id]).collect(),
            next_id: self.next_id + 1,
        };
        match self.scheme {
            Scheme::Mrt => {
                let a_inv = self.cached_a_inv()?;
                let (power, a_inv) = mrt_pl_user_in(
                    a_inv,
                    &self.channel,
                    self.design.directions.matrix(),
                    h_new,
                    gamma_new,
                    next.channel.noise(),
                )?;
                let dirs = append_direction(&self.design.directions, h_new)?;
                next.a_inv = Some(a_inv);
                next.design = Design::assemble(dirs, power, &next.channel);
            }
            Scheme::Zf => {
                let (zf, dirs) = zf_user_in(self.cached_zf()?, self.channel.h(), h_new, policy.zf_method)?;
                let power = zf_power_load(&next.channel, &dirs, &next.gamma)?;
                next.zf = Some(zf);
                next.design = Design::assemble(dirs, power, &next.channel);
            }
            Scheme::Optimal => {
                let dual = opt_user_in(
                    self.cached_dual()?,
                    &self.channel,
                    &self.gamma,
                    h_new,
                    gamma_new,
                    policy.nu_mode,
                    policy.fixed_point,
                )?;
                next.design = opt_design(&next.channel, &dual, &next.gamma)?;
                next.dual = Some(dual);
            }
        }
        Ok(next)
    }

    fn user_out(&self, index: usize, policy: &UpdatePolicy) -> Result<Self> {
        self.check_index(index)?;
        let channel = self.channel.without_user(index);
        let gamma = self.gamma.without(index);
        let mut user_ids = self.user_ids.clone();
        user_ids.remove(index);
        let mut next = Self {
            channel,
            gamma,
            scheme: self.scheme,
            design: Design::empty(self.nt()),
            zf: None,
            dual: None,
            a_inv: None,
            user_ids,
            next_id: self.next_id,
        };
        match self.scheme {
            Scheme::Mrt => {
                let (power, a_inv) = mrt_pl_user_out(self.cached_a_inv()?, index, next.channel.noise())?;
                // The survivors keep their directions untouched.
                let dirs = DirectionSet::from_unit_columns(
                    self.design.directions.matrix().clone().remove_column(index),
                );
                next.a_inv = Some(a_inv);
                next.design = Design::assemble(dirs, power, &next.channel);
            }
            Scheme::Zf => match zf_user_out(self.cached_zf()?, self.channel.h(), index, policy.zf_method) {
                Ok((zf, dirs)) => {
                    let power = zf_power_load(&next.channel, &dirs, &next.gamma)?;
                    next.zf = Some(zf);
                    next.design = Design::assemble(dirs, power, &next.channel);
                }
                Err(BeamError::EmptyResult) => {
                    next.zf = Some(ZfState {
                        pinv: Pseudoinverse::empty(self.nt()),
                        gram_inv: Some(SquareInverse::identity(0)),
                    });
                }
                Err(e) => return Err(e),
            },
            Scheme::Optimal => {
                let dual = opt_user_out(
                    self.cached_dual()?,
                    &self.channel,
                    &self.gamma,
                    index,
                    policy.nu_mode,
                    policy.fixed_point,
                )?;
                next.design = opt_design(&next.channel, &dual, &next.gamma)?;
                next.dual = Some(dual);
            }
        }
        Ok(next)
    }

    fn gamma_change(&self, index: usize, gamma_new: f64, policy: &UpdatePolicy) -> Result<Self> {
        self.check_index(index)?;
        let gamma = self.gamma.with_changed(index, gamma_new)?;
        let mut next = Self { gamma, ..self.clone() };
        match self.scheme {
            Scheme::Mrt => {
                let (power, a_inv) = mrt_pl_gamma_change(
                    self.cached_a_inv()?,
                    index,
                    self.gamma.get(index),
                    gamma_new,
                    &self.channel.column(index),
                    &self.design.directions.matrix().column(index).into_owned(),
                    self.channel.noise(),
                )?;
                next.a_inv = Some(a_inv);
                next.design = Design::assemble(self.design.directions.clone(), power, &next.channel);
            }
            Scheme::Zf => {
                let dirs = &self.design.directions;
                let gain = self.channel.h().column(index).dotc(&dirs.matrix().column(index)).norm_sqr();
                flops::add_cmac(self.nt());
                let mut beta = self.design.power.beta().clone();
                beta[index] = gamma_new * self.channel.noise()[index] / gain;
                next.design = Design::assemble(dirs.clone(), PowerLoading::new(beta), &next.channel);
            }
            Scheme::Optimal => {
                let dual = opt_gamma_change(
                    self.cached_dual()?,
                    &self.channel,
                    &self.gamma,
                    index,
                    gamma_new,
                    policy.nu_mode,
                    policy.fixed_point,
                )?;
                next.design = opt_design(&next.channel, &dual, &next.gamma)?;
                next.dual = Some(dual);
            }
        }
        Ok(next)
    }

    fn cached_a_inv(&self) -> Result<&SquareInverse<f64>> {
        self.a_inv
            .as_ref()
            .ok_or_else(|| BeamError::InvalidArgument("MRT system without cached A⁻¹".into()))
    }

    fn cached_zf(&self) -> Result<&ZfState> {
        self.zf
            .as_ref()
            .ok_or_else(|| BeamError::InvalidArgument("ZF system without cached pseudoinverse".into()))
    }

    fn cached_dual(&self) -> Result<&DualState> {
        self.dual
            .as_ref()
            .ok_or_else(|| BeamError::InvalidArgument("optimal system without dual state".into()))
    }

    /// Measures how far every cached quantity has drifted from its
    /// definition.
    pub fn audit(&self) -> Audit {
        let h = self.channel.h();
        let k = self.k();
        let mut audit = Audit { sinr: self.design.max_sinr_rel_error(&self.gamma), ..Audit::default() };
        if let Some(zf) = &self.zf {
            let gh = zf.pinv.matrix().adjoint() * h;
            audit.pinv_identity = max_norm(&(gh - CMatrix::identity(k, k)));
            if let Some(gi) = &zf.gram_inv {
                let prod = gi.matrix() * (h.adjoint() * h);
                audit.gram_inverse = max_norm(&(prod - CMatrix::identity(k, k)));
            }
        }
        if let Some(dual) = &self.dual {
            audit.dual_inverse = dual.inverse_error(&self.channel);
        }
        if let Some(a_inv) = &self.a_inv {
            if let Ok(a) = build_coupling_matrix(&self.channel, &self.design.directions, &self.gamma) {
                let prod = a_inv.matrix() * a.matrix();
                audit.coupling_inverse = max_norm(&(prod - DMatrix::identity(k, k)));
            } else {
                audit.coupling_inverse = f64::INFINITY;
            }
        }
        audit
    }
}

fn opt_design(ch: &ChannelMatrix, dual: &DualState, gamma: &SinrTargets) -> Result<Design> {
    if ch.k() == 0 {
        return Ok(Design::empty(ch.nt()));
    }
    let dirs = optimal_directions(ch, dual, gamma, DirectionMode::ClosedForm)?;
    let power = opt_power_load(ch, &dirs, gamma)?;
    Ok(Design::assemble(dirs, power, ch))
}

fn append_direction(dirs: &DirectionSet, h_new: &CVector) -> Result<DirectionSet> {
    let norm = h_new.norm();
    let k = dirs.k();
    if !(norm > 0.0) {
        return Err(BeamError::DegenerateChannel(k));
    }
    let mut u = dirs.matrix().clone().insert_column(k, Complex64::new(0.0, 0.0));
    u.set_column(k, &h_new.unscale(norm));
    flops::add_cmac(h_new.len());
    Ok(DirectionSet::from_unit_columns(u))
}

/// ZF state after appending `h_new` to channels `h`; directions are not
/// formed.
pub fn zf_pinv_user_in(zf: &ZfState, h: &CMatrix, h_new: &CVector, method: ZfMethod) -> Result<ZfState> {
    let (nt, k) = h.shape();
    match method {
        ZfMethod::Direct => Ok(ZfState { pinv: pinv_add_column(&zf.pinv, h, h_new)?, gram_inv: None }),
        ZfMethod::Block => {
            if k >= nt {
                return Err(BeamError::RankDeficient(format!("already {k} users on {nt} antennas")));
            }
            let gram_inv = zf.gram_inv_or_derive();
            let hb = h.ad_mul(h_new);
            let b = DMatrix::from_iterator(k, 1, hb.iter().copied());
            let d = DMatrix::from_element(1, 1, Complex64::new(h_new.norm_squared(), 0.0));
            flops::add_cmac(nt * (k + 1));
            let gram_inv = block_augment_inverse(&gram_inv, &b, &b.adjoint(), &d).map_err(|e| match e {
                BeamError::SingularUpdate(msg) => BeamError::RankDeficient(msg),
                other => other,
            })?;
            let g = append_column(h, h_new) * gram_inv.matrix();
            flops::add_cmac(nt * (k + 1) * (k + 1));
            Ok(ZfState { pinv: Pseudoinverse::from_matrix(g), gram_inv: Some(gram_inv) })
        }
    }
}

/// ZF state after removing user `index` from channels `h`; directions are
/// not formed. Returns [`BeamError::EmptyResult`] when the last user leaves.
pub fn zf_pinv_user_out(zf: &ZfState, h: &CMatrix, index: usize, method: ZfMethod) -> Result<ZfState> {
    let (nt, k) = h.shape();
    if index >= k {
        return Err(BeamError::InvalidArgument(format!("user index {index} out of range for {k}")));
    }
    if k == 1 {
        return Err(BeamError::EmptyResult);
    }
    match method {
        ZfMethod::Direct => Ok(ZfState { pinv: pinv_remove_column(&zf.pinv, index)?, gram_inv: None }),
        ZfMethod::Block => {
            let gram_inv = block_reduce_inverse_at(&zf.gram_inv_or_derive(), index)?;
            let g = h.clone().remove_column(index) * gram_inv.matrix();
            flops::add_cmac(nt * (k - 1) * (k - 1));
            Ok(ZfState { pinv: Pseudoinverse::from_matrix(g), gram_inv: Some(gram_inv) })
        }
    }
}

fn append_column(h: &CMatrix, h_new: &CVector) -> CMatrix {
    let k = h.ncols();
    let mut out = h.clone().insert_column(k, Complex64::new(0.0, 0.0));
    out.set_column(k, h_new);
    out
}

/// ZF state and directions after appending `h_new` to channels `h`.
pub fn zf_user_in(
    zf: &ZfState,
    h: &CMatrix,
    h_new: &CVector,
    method: ZfMethod,
) -> Result<(ZfState, DirectionSet)> {
    let state = zf_pinv_user_in(zf, h, h_new, method)?;
    let dirs = DirectionSet::normalized(state.pinv.matrix().clone(), &append_column(h, h_new))?;
    Ok((state, dirs))
}

/// ZF state and directions after removing user `index` from channels `h`.
///
/// Returns [`BeamError::EmptyResult`] when the last user leaves.
pub fn zf_user_out(
    zf: &ZfState,
    h: &CMatrix,
    index: usize,
    method: ZfMethod,
) -> Result<(ZfState, DirectionSet)> {
    let state = zf_pinv_user_out(zf, h, index, method)?;
    let dirs = DirectionSet::normalized(state.pinv.matrix().clone(), &h.clone().remove_column(index))?;
    Ok((state, dirs))
}

/// Dual estimate for a newcomer: `γ / (hᴴ M⁻¹ h)` with the cached `M⁻¹`,
/// which does not yet include the newcomer.
pub fn nu_inverse_approx(m_inv: &SquareInverse, h: &CVector, gamma: f64) -> f64 {
    let mh = m_inv.matrix() * h;
    flops::add_cmac(h.len() * h.len() + h.len());
    gamma / h.dotc(&mh).re
}

/// Dual estimate `γ / ‖h‖²`.
pub fn nu_orthogonal_approx(h: &CVector, gamma: f64) -> f64 {
    flops::add_cmac(h.len());
    gamma / h.norm_squared()
}

/// Dual state after `h_new` joins with target `gamma_new`.
///
/// In the approximate modes only the newcomer's `ν` is computed; the
/// incumbents keep theirs and `M⁻¹` absorbs the new term by a rank-one
/// update. The result is flagged unconverged.
pub fn opt_user_in(
    dual: &DualState,
    ch: &ChannelMatrix,
    gamma: &SinrTargets,
    h_new: &CVector,
    gamma_new: f64,
    mode: NuMode,
    opts: FixedPointOptions,
) -> Result<DualState> {
    let nu_new = match mode {
        NuMode::OrthogonalApprox => nu_orthogonal_approx(h_new, gamma_new),
        NuMode::InverseApprox | NuMode::ExactRefit => nu_inverse_approx(&dual.m_inv, h_new, gamma_new),
    };
    if !(nu_new.is_finite() && nu_new > 0.0) {
        return Err(BeamError::DegenerateChannel(ch.k()));
    }
    let mut nu = dual.nu.clone();
    nu.push(nu_new);
    match mode {
        NuMode::ExactRefit => {
            let ch_next = ch.with_user(h_new, 1.0)?;
            solve_dual_fixed_point_from(&ch_next, &gamma.with_appended(gamma_new)?, nu, opts)
        }
        _ => {
            let m_inv = rank_one_update_inverse(&dual.m_inv, h_new, nu_new)?;
            Ok(DualState { nu, m_inv, converged: false, iterations: 0 })
        }
    }
}

/// Dual state after user `index` leaves: its `ν` is dropped and its term
/// downdated out of `M⁻¹`; the others keep their values.
pub fn opt_user_out(
    dual: &DualState,
    ch: &ChannelMatrix,
    gamma: &SinrTargets,
    index: usize,
    mode: NuMode,
    opts: FixedPointOptions,
) -> Result<DualState> {
    if index >= dual.nu.len() {
        return Err(BeamError::InvalidArgument(format!("user index {index} out of range")));
    }
    let mut nu = dual.nu.clone();
    let removed = nu.remove(index);
    match mode {
        NuMode::ExactRefit => {
            solve_dual_fixed_point_from(&ch.without_user(index), &gamma.without(index), nu, opts)
        }
        _ => {
            let m_inv = rank_one_update_inverse(&dual.m_inv, &ch.column(index), -removed)?;
            Ok(DualState { nu, m_inv, converged: false, iterations: 0 })
        }
    }
}

/// Dual state after user `index` moves to target `gamma_new`.
///
/// The inverse mode evaluates `γ̂ / (hᴴ M₋ᵢ⁻¹ h)` on the leave-one-out
/// inverse obtained by downdating `M⁻¹`, then puts the user back with its new
/// weight. From a converged start this equals `ν·γ̂/γ`.
pub fn opt_gamma_change(
    dual: &DualState,
    ch: &ChannelMatrix,
    gamma: &SinrTargets,
    index: usize,
    gamma_new: f64,
    mode: NuMode,
    opts: FixedPointOptions,
) -> Result<DualState> {
    if index >= dual.nu.len() {
        return Err(BeamError::InvalidArgument(format!("user index {index} out of range")));
    }
    if !(gamma_new > 0.0 && gamma_new.is_finite()) {
        return Err(BeamError::InvalidArgument("SINR target must be positive".into()));
    }
    let h = ch.column(index);
    let old = dual.nu[index];
    let mut nu = dual.nu.clone();
    match mode {
        NuMode::OrthogonalApprox => {
            let new = nu_orthogonal_approx(&h, gamma_new);
            nu[index] = new;
            let m_inv = rank_one_update_inverse(&dual.m_inv, &h, new - old)?;
            Ok(DualState { nu, m_inv, converged: false, iterations: 0 })
        }
        NuMode::InverseApprox | NuMode::ExactRefit => {
            let loo = rank_one_update_inverse(&dual.m_inv, &h, -old)?;
            let new = nu_inverse_approx(&loo, &h, gamma_new);
            nu[index] = new;
            if mode == NuMode::ExactRefit {
                return solve_dual_fixed_point_from(ch, &gamma.with_changed(index, gamma_new)?, nu, opts);
            }
            let m_inv = rank_one_update_inverse(&loo, &h, new)?;
            Ok(DualState { nu, m_inv, converged: false, iterations: 0 })
        }
    }
}

/// Optimal-scheme power loads: the coupling matrix is rebuilt and solved.
pub fn opt_power_load(ch: &ChannelMatrix, dirs: &DirectionSet, gamma: &SinrTargets) -> Result<PowerLoading> {
    power_load(&build_coupling_matrix(ch, dirs, gamma)?, ch.noise())
}

/// MRT power loads after a target change: one diagonal entry of `A` moves,
/// applied to `A⁻¹` as a rank-one update along `e_index`.
pub fn mrt_pl_gamma_change(
    a_inv: &SquareInverse<f64>,
    index: usize,
    gamma_old: f64,
    gamma_new: f64,
    h_index: &CVector,
    u_index: &CVector,
    sigma2: &[f64],
) -> Result<(PowerLoading, SquareInverse<f64>)> {
    let k = a_inv.dim();
    if index >= k {
        return Err(BeamError::InvalidArgument(format!("user index {index} out of range for {k}")));
    }
    let gain = h_index.dotc(u_index).norm_sqr();
    flops::add_cmac(h_index.len());
    let delta = gain * (1.0 / gamma_new - 1.0 / gamma_old);
    let a_inv = if delta == 0.0 {
        a_inv.clone()
    } else {
        let mut e = DVector::zeros(k);
        e[index] = 1.0;
        rank_one_update_inverse(a_inv, &e, delta)?
    };
    Ok((power_from_inverse(&a_inv, sigma2)?, a_inv))
}

/// MRT power loads after `h_new` joins: `A⁻¹` gains one bordering row and
/// column. `sigma2` covers all users including the newcomer.
pub fn mrt_pl_user_in(
    a_inv: &SquareInverse<f64>,
    h: &ChannelMatrix,
    u: &CMatrix,
    h_new: &CVector,
    gamma_new: f64,
    sigma2: &[f64],
) -> Result<(PowerLoading, SquareInverse<f64>)> {
    let k = h.k();
    let norm = h_new.norm();
    if !(norm > 0.0) {
        return Err(BeamError::DegenerateChannel(k));
    }
    let u_new = h_new.unscale(norm);
    // Column K: interference the newcomer's beam causes at each incumbent.
    let to_incumbents = h.h().ad_mul(&u_new);
    // Row K: interference each incumbent beam causes at the newcomer.
    let from_incumbents = u.ad_mul(h_new);
    flops::add_cmac(2 * h.nt() * k + h.nt());
    let b = DMatrix::from_fn(k, 1, |i, _| -to_incumbents[i].norm_sqr());
    let c = DMatrix::from_fn(1, k, |_, j| -from_incumbents[j].norm_sqr());
    let d = DMatrix::from_element(1, 1, norm * norm / gamma_new);
    let a_inv = block_augment_inverse(a_inv, &b, &c, &d)?;
    Ok((power_from_inverse(&a_inv, sigma2)?, a_inv))
}

/// MRT power loads after user `index` leaves: row and column `index` are
/// removed from `A` through its inverse. `sigma2` covers the remaining users.
pub fn mrt_pl_user_out(
    a_inv: &SquareInverse<f64>,
    index: usize,
    sigma2: &[f64],
) -> Result<(PowerLoading, SquareInverse<f64>)> {
    let a_inv = if a_inv.dim() == 1 && index == 0 {
        SquareInverse::identity(0)
    } else {
        block_reduce_inverse_at(a_inv, index)?
    };
    Ok((power_from_inverse(&a_inv, sigma2)?, a_inv))
}
