//! Multi-user NOMA: Poisson user drops over a two-disk cell, joint
//! distance-based clustering and power control, and the two-user detection
//! flow (direct decoding at the far user, two-pass SIC at the near user).
//!
//! Users are dropped inside one narrow beam sector: the k-th farthest
//! cell-center user is paired with the k-th farthest cell-edge user, the near
//! user's power inverts its distance-based path loss (`p1 = rho_rx d1^a`),
//! and the far user receives `p2 = min(mu rho_rx d2^a, P_max/N - p1)`.
//! Large-scale fading uses the equivalent THz path-loss-exponent model, so
//! `sigma_H = d^(-a/2)`; the spatial structure comes from the channel module
//! at each user's distance.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::channel::{linear_geometry, los_channel, ChannelParams};
use crate::constellation::Constellation;
use crate::detect::{detect_superposed, ChannelFactors, DetectorKind, StreamPlan};
use crate::linalg::ComplexMatrix;
use crate::{Error, Result};
use num_complex::Complex64 as C64;

/// Exact dBm to watts conversion.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Multi-user scenario parameters. Defaults follow the simulation parameter
/// table: 10 m cell, 5 m center disk, 0.1 pairs/m^2, path-loss exponent 2.2,
/// 100 mW per SA, PC parameter 10, -100 dBm sensitivity, 16 BS SAs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NomaScenario {
    /// Inner (cell-center) disk radius R_N, meters.
    pub inner_radius_m: f64,
    /// Cell radius R_C, meters.
    pub cell_radius_m: f64,
    /// PPP density in the inner disk, users per m^2.
    pub density_inner: f64,
    /// PPP density in the outer annulus, users per m^2.
    pub density_outer: f64,
    /// Path-loss exponent of the equivalent THz model.
    pub path_loss_exponent: f64,
    /// Receiver sensitivity rho_rx, watts.
    pub rx_sensitivity_w: f64,
    /// Maximum transmit power P_max, watts.
    pub max_power_w: f64,
    /// NOMA power-control parameter mu (>= 1).
    pub pc_parameter: f64,
    /// BS subarray count N.
    pub bs_sas: usize,
    /// Width of the beam sector users are dropped in, radians.
    pub sector_width_rad: f64,
    /// Minimum user distance, meters (keeps the path gain finite).
    pub min_distance_m: f64,
}

impl Default for NomaScenario {
    fn default() -> Self {
        Self {
            inner_radius_m: 5.0,
            cell_radius_m: 10.0,
            density_inner: 0.1,
            density_outer: 0.1,
            path_loss_exponent: 2.2,
            rx_sensitivity_w: dbm_to_watts(-100.0),
            max_power_w: 0.1 * 16.0,
            pc_parameter: 10.0,
            bs_sas: 16,
            sector_width_rad: 10f64.to_radians(),
            min_distance_m: 0.5,
        }
    }
}

impl NomaScenario {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.inner_radius_m && self.inner_radius_m < self.cell_radius_m) {
            return Err(Error::InvalidArgument("need 0 < R_N < R_C".into()));
        }
        if !(self.density_inner > 0.0 && self.density_outer > 0.0) {
            return Err(Error::InvalidArgument("densities must be positive".into()));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::InvalidArgument("path-loss exponent must be positive".into()));
        }
        if !(self.max_power_w > 0.0 && self.rx_sensitivity_w > 0.0) {
            return Err(Error::InvalidArgument("powers must be positive".into()));
        }
        if self.pc_parameter < 1.0 {
            return Err(Error::InvalidArgument("PC parameter mu must be >= 1".into()));
        }
        if self.bs_sas == 0 {
            return Err(Error::InvalidArgument("BS needs at least one SA".into()));
        }
        if !(0.0 < self.min_distance_m && self.min_distance_m < self.inner_radius_m) {
            return Err(Error::InvalidArgument("need 0 < d_min < R_N".into()));
        }
        Ok(())
    }

    /// Mean pair count `E[K] = lambda_1 pi R_N^2`.
    pub fn mean_pairs(&self) -> f64 {
        self.density_inner * std::f64::consts::PI * self.inner_radius_m.powi(2)
    }

    /// Per-pair power budget `P_max / N`.
    pub fn pair_budget_w(&self) -> f64 {
        self.max_power_w / self.bs_sas as f64
    }
}

/// One dropped user: distance from the BS and angle within the sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPosition {
    pub distance_m: f64,
    pub angle_rad: f64,
}

/// A user drop with the same Poisson count in both disks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDrop {
    pub inner: Vec<UserPosition>,
    pub outer: Vec<UserPosition>,
}

impl UserDrop {
    pub fn pair_count(&self) -> usize {
        self.inner.len()
    }
}

/// Drop `K ~ Poisson(lambda_1 pi R_N^2)` users uniformly (by area) in the
/// inner disk sector and the same number in the outer annulus sector.
pub fn drop_users(s: &NomaScenario, rng: &mut impl Rng) -> Result<UserDrop> {
    s.validate()?;
    let mean = s.mean_pairs();
    let k = Poisson::new(mean)
        .map_err(|e| Error::InvalidArgument(format!("invalid PPP mean {mean}: {e}")))?
        .sample(rng) as usize;
    if k == 0 {
        return Err(Error::EmptyDrop);
    }
    let place = |lo: f64, hi: f64, rng: &mut dyn rand::RngCore| -> UserPosition {
        let u: f64 = rng.random();
        let distance_m = (lo * lo + u * (hi * hi - lo * lo)).sqrt();
        let angle_rad = rng.random_range(-s.sector_width_rad / 2.0..s.sector_width_rad / 2.0);
        UserPosition { distance_m, angle_rad }
    };
    let inner = (0..k).map(|_| place(s.min_distance_m, s.inner_radius_m, rng)).collect();
    let outer = (0..k).map(|_| place(s.inner_radius_m, s.cell_radius_m, rng)).collect();
    Ok(UserDrop { inner, outer })
}

/// A clustered pair with its allocated powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAllocation {
    /// Index into the inner-user list.
    pub inner_index: usize,
    /// Index into the outer-user list.
    pub outer_index: usize,
    pub d1_m: f64,
    pub d2_m: f64,
    /// Near-user power (channel inversion).
    pub p1_w: f64,
    /// Far-user power.
    pub p2_w: f64,
}

/// The output of the clustering/power-control pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub pairs: Vec<PairAllocation>,
}

/// Joint distance-based clustering and power control: match the k-th farthest
/// inner user with the k-th farthest outer user, invert the near user's
/// path loss, and give the far user `min(mu rho d2^a, P_max/N - p1)`.
pub fn jdcp(inner: &[f64], outer: &[f64], s: &NomaScenario) -> Result<ClusterPlan> {
    s.validate()?;
    let k = inner.len().min(outer.len());
    if inner.len() != outer.len() {
        log::warn!(
            "unequal group sizes ({} inner, {} outer); truncating to {k} pairs",
            inner.len(),
            outer.len()
        );
    }

    let sort_desc = |d: &[f64]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap().then(a.cmp(&b)));
        idx
    };
    let inner_order = sort_desc(inner);
    let outer_order = sort_desc(outer);

    let budget = s.pair_budget_w();
    let mut pairs = Vec::with_capacity(k);
    for rank in 0..k {
        let i1 = inner_order[rank];
        let i2 = outer_order[rank];
        let d1 = inner[i1];
        let d2 = outer[i2];
        let p1 = s.rx_sensitivity_w * d1.powf(s.path_loss_exponent);
        let headroom = budget - p1;
        if headroom <= 0.0 {
            return Err(Error::BudgetExhausted(format!(
                "pair {rank}: p1 = {p1:.3e} W exceeds the per-pair budget {budget:.3e} W"
            )));
        }
        let p2 = (s.pc_parameter * s.rx_sensitivity_w * d2.powf(s.path_loss_exponent))
            .min(headroom);
        pairs.push(PairAllocation { inner_index: i1, outer_index: i2, d1_m: d1, d2_m: d2, p1_w: p1, p2_w: p2 });
    }
    Ok(ClusterPlan { pairs })
}

/// How per-user channels are generated for the NOMA links: symmetric linear
/// arrays at the carrier, with spatial tuning applied per user or replaced by
/// a detuned spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NomaLinkGeometry {
    pub carrier_hz: f64,
    /// SA count at the BS and at both users (N = M1 = M2).
    pub n_sas: usize,
    /// Tune the near user's channel to its own distance.
    pub tune_near: bool,
    /// Tune the far user's channel to its own distance.
    pub tune_far: bool,
    /// SA spacing as a fraction of the per-user optimum when untuned.
    pub detune_factor: f64,
}

impl Default for NomaLinkGeometry {
    fn default() -> Self {
        Self { carrier_hz: 300e9, n_sas: 16, tune_near: true, tune_far: true, detune_factor: 0.1 }
    }
}

/// One NOMA pair's channels. `h1`/`h2` carry unit average entry gain times
/// the large-scale coefficient `sigma_H = d^(-a/2)`.
#[derive(Debug, Clone)]
pub struct NomaLink {
    pub pair: PairAllocation,
    pub h1: ComplexMatrix,
    pub h2: ComplexMatrix,
    pub sigma_h1: f64,
    pub sigma_h2: f64,
}

/// Generate per-pair channel matrices at the two users' distances. The near
/// user is user 1, so `sigma_h1 >= sigma_h2` whenever `d1 <= d2`.
pub fn build_noma_links(
    plan: &ClusterPlan,
    s: &NomaScenario,
    geometry: &NomaLinkGeometry,
) -> Result<Vec<NomaLink>> {
    let user_channel = |d: f64, tuned: bool| -> Result<ComplexMatrix> {
        let detune = if tuned { 1.0 } else { geometry.detune_factor };
        let geom = linear_geometry(geometry.n_sas, geometry.carrier_hz, d, detune)?;
        Ok(los_channel(&geom, &ChannelParams::default())?.normalized().h)
    };
    plan.pairs
        .iter()
        .map(|pair| {
            let sigma_h1 = pair.d1_m.powf(-s.path_loss_exponent / 2.0);
            let sigma_h2 = pair.d2_m.powf(-s.path_loss_exponent / 2.0);
            let h1 = user_channel(pair.d1_m, geometry.tune_near)?
                .scale(C64::new(sigma_h1, 0.0));
            let h2 = user_channel(pair.d2_m, geometry.tune_far)?
                .scale(C64::new(sigma_h2, 0.0));
            Ok(NomaLink { pair: pair.clone(), h1, h2, sigma_h1, sigma_h2 })
        })
        .collect()
}

/// The two-stream plan of one NOMA pair: both users transmit from all `N`
/// SAs, the far user at the higher power.
pub fn pair_stream_plan(
    n: usize,
    order: usize,
    p1_w: f64,
    p2_w: f64,
) -> Result<StreamPlan> {
    if p2_w <= p1_w {
        return Err(Error::InvalidPlan(format!(
            "NOMA needs p2 > p1, got p1 = {p1_w:.3e}, p2 = {p2_w:.3e}"
        )));
    }
    StreamPlan::contiguous(
        n,
        vec![
            (n, Constellation::build_qam(order, p1_w)?),
            (n, Constellation::build_qam(order, p2_w)?),
        ],
    )
}

/// Detect one NOMA pair: user 2 decodes its own vector directly, treating
/// `x1` as unknown interference; user 1 runs two-pass SIC where the first
/// pass's `x2` estimate is used for cancellation only and never returned.
/// Returns `(user 1 bits for x1, user 2 bits for x2)`.
pub fn noma_detect_pair(
    y1: &[C64],
    y2: &[C64],
    h1: &ComplexMatrix,
    h2: &ComplexMatrix,
    plan: &StreamPlan,
    kind: DetectorKind,
    factors1: &ChannelFactors,
    factors2: &ChannelFactors,
) -> Result<(Vec<u8>, Vec<u8>)> {
    let near = detect_superposed(y1, h1, plan, kind, factors1)?;
    let far = detect_superposed(y2, h2, plan, kind, factors2)?;
    Ok((near.streams[0].bits.clone(), far.streams[1].bits.clone()))
}
