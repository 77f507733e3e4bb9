//! Random user drops and Rayleigh channel realizations for a single cell.
//!
//! Users are placed uniformly over a disk around the base station. The
//! large-scale gain combines log-distance path loss (3D distance, so the
//! mast height bounds it at the cell center) with log-normal shadowing;
//! small-scale fading is i.i.d. circular complex Gaussian.
//!
//! Randomness comes from ChaCha20 streams keyed by `(master seed, drop id,
//! purpose)`, so positions, shadowing and fading never share draws and a
//! drop is reproducible regardless of which thread generates it.

use std::hash::{DefaultHasher, Hash, Hasher};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{BeamError, Result};
use crate::linalg::{CMatrix, CVector};

/// Cell layout and propagation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub radius_km: f64,
    pub bs_height_m: f64,
    pub path_loss_exponent: f64,
    pub shadowing_std_db: f64,
    pub noise_dbm: f64,
    /// Gain at the 1 m reference distance. Shifts every power figure by a
    /// constant and leaves all comparisons unchanged.
    pub path_loss_intercept_db: f64,
}

impl Default for CellGeometry {
    fn default() -> Self {
        Self {
            radius_km: 0.75,
            bs_height_m: 25.0,
            path_loss_exponent: 3.52,
            shadowing_std_db: 8.0,
            noise_dbm: -90.0,
            path_loss_intercept_db: 0.0,
        }
    }
}

impl CellGeometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(BeamError::InvalidArgument(what.to_string()));
        if !(self.radius_km > 0.0 && self.radius_km.is_finite()) {
            return bad("radius_km must be positive");
        }
        if !(self.path_loss_exponent > 2.0 && self.path_loss_exponent.is_finite()) {
            return bad("path_loss_exponent must exceed 2");
        }
        if !(self.shadowing_std_db >= 0.0 && self.shadowing_std_db.is_finite()) {
            return bad("shadowing_std_db must be nonnegative");
        }
        if !(self.bs_height_m >= 0.0 && self.bs_height_m.is_finite()) {
            return bad("bs_height_m must be nonnegative");
        }
        if !self.noise_dbm.is_finite() || !self.path_loss_intercept_db.is_finite() {
            return bad("noise_dbm and path_loss_intercept_db must be finite");
        }
        Ok(())
    }

    /// Noise power in watts.
    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Large-scale gain in dB at 3D distance `distance_m`, before shadowing.
    pub fn path_gain_db(&self, distance_m: f64) -> f64 {
        self.path_loss_intercept_db - 10.0 * self.path_loss_exponent * distance_m.log10()
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Identifies one Monte-Carlo drop within a seeded experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DropSeed {
    pub master: u64,
    pub drop_id: u64,
}

impl DropSeed {
    pub fn new(master: u64, drop_id: u64) -> Self {
        Self { master, drop_id }
    }

    fn rng(self, purpose: Stream) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master);
        rng.set_stream(self.drop_id.wrapping_mul(Stream::COUNT).wrapping_add(purpose as u64));
        rng
    }
}

impl From<u64> for DropSeed {
    fn from(master: u64) -> Self {
        Self { master, drop_id: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
enum Stream {
    Positions = 0,
    Shadowing = 1,
    Fading = 2,
}

impl Stream {
    const COUNT: u64 = 4;
}

/// One dropped user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPlacement {
    pub horizontal_m: f64,
    pub distance_m: f64,
    pub gain_db: f64,
}

impl UserPlacement {
    /// Linear power gain.
    pub fn gain(&self) -> f64 {
        db_to_linear(self.gain_db)
    }
}

/// Places `k` users uniformly over the cell disk and draws their
/// large-scale gains.
pub fn drop_users(
    geom: &CellGeometry,
    k: usize,
    seed: impl Into<DropSeed>,
) -> Result<Vec<UserPlacement>> {
    geom.validate()?;
    if k == 0 {
        return Err(BeamError::InvalidArgument("need at least one user".into()));
    }
    let seed = seed.into();
    let mut pos_rng = seed.rng(Stream::Positions);
    let mut shadow_rng = seed.rng(Stream::Shadowing);
    let shadowing = Normal::new(0.0, geom.shadowing_std_db)
        .map_err(|e| BeamError::InvalidArgument(e.to_string()))?;
    let radius_m = geom.radius_km * 1000.0;

    Ok((0..k)
        .map(|_| {
            let horizontal_m = radius_m * pos_rng.random::<f64>().sqrt();
            let distance_m = horizontal_m.hypot(geom.bs_height_m);
            let gain_db = geom.path_gain_db(distance_m) + shadowing.sample(&mut shadow_rng);
            UserPlacement { horizontal_m, distance_m, gain_db }
        })
        .collect())
}

/// Channel matrix with one column per user, plus per-user noise powers.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    h: CMatrix,
    noise_w: Vec<f64>,
}

impl ChannelMatrix {
    pub fn new(h: CMatrix, noise_w: Vec<f64>) -> Result<Self> {
        if noise_w.len() != h.ncols() {
            return Err(BeamError::Dimension(format!(
                "{} noise powers for {} users",
                noise_w.len(),
                h.ncols()
            )));
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(BeamError::InvalidArgument("non-finite channel entry".into()));
        }
        if noise_w.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(BeamError::InvalidArgument("noise powers must be positive".into()));
        }
        Ok(Self { h, noise_w })
    }

    /// System with `nt` antennas and no users.
    pub fn empty(nt: usize) -> Self {
        Self { h: CMatrix::zeros(nt, 0), noise_w: Vec::new() }
    }

    pub fn nt(&self) -> usize {
        self.h.nrows()
    }

    pub fn k(&self) -> usize {
        self.h.ncols()
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn column(&self, k: usize) -> CVector {
        self.h.column(k).into_owned()
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise_w
    }

    /// The first `k` users.
    pub fn leading(&self, k: usize) -> Self {
        Self {
            h: self.h.columns(0, k).into_owned(),
            noise_w: self.noise_w[..k].to_vec(),
        }
    }

    pub fn without_user(&self, idx: usize) -> Self {
        let mut noise_w = self.noise_w.clone();
        noise_w.remove(idx);
        Self { h: self.h.clone().remove_column(idx), noise_w }
    }

    pub fn with_user(&self, h_new: &CVector, noise_w: f64) -> Result<Self> {
        if h_new.len() != self.nt() {
            return Err(BeamError::Dimension(format!(
                "channel of length {} on {} antennas",
                h_new.len(),
                self.nt()
            )));
        }
        let k = self.k();
        let mut h = self.h.clone().insert_column(k, Complex64::new(0.0, 0.0));
        h.set_column(k, h_new);
        let mut noise = self.noise_w.clone();
        noise.push(noise_w);
        Self::new(h, noise)
    }

    /// Stable fingerprint of the channel and noise values, used to check that
    /// every scheme in a drop sees the same realization.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.h.shape().hash(&mut hasher);
        for z in self.h.iter() {
            z.re.to_bits().hash(&mut hasher);
            z.im.to_bits().hash(&mut hasher);
        }
        for s in &self.noise_w {
            s.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }
}

/// Draws `h_k = √gain_k · g_k` with `g_k ~ CN(0, I)` for each user.
///
/// Users are drawn in order from one fading stream, so the channels of the
/// first `k − 1` users do not depend on whether a `k`-th user is drawn.
pub fn sample_channels(
    gains: &[f64],
    nt: usize,
    geom: &CellGeometry,
    seed: impl Into<DropSeed>,
) -> Result<ChannelMatrix> {
    if nt == 0 {
        return Err(BeamError::InvalidArgument("need at least one antenna".into()));
    }
    if gains.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
        return Err(BeamError::InvalidArgument("gains must be finite and nonnegative".into()));
    }
    let mut rng = seed.into().rng(Stream::Fading);
    let mut h = CMatrix::zeros(nt, gains.len());
    for (k, &gain) in gains.iter().enumerate() {
        let amp = (gain / 2.0).sqrt();
        for i in 0..nt {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            h[(i, k)] = Complex64::new(amp * re, amp * im);
        }
    }
    ChannelMatrix::new(h, vec![geom.noise_watts(); gains.len()])
}

/// Drops `k` users and samples their channels in one go.
pub fn realize(
    geom: &CellGeometry,
    nt: usize,
    k: usize,
    seed: impl Into<DropSeed>,
) -> Result<ChannelMatrix> {
    let seed = seed.into();
    let gains: Vec<f64> = drop_users(geom, k, seed)?.iter().map(UserPlacement::gain).collect();
    sample_channels(&gains, nt, geom, seed)
}
