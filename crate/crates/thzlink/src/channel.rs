//! Channel generation: deterministic THz line-of-sight channels with
//! molecular absorption and steering/beamforming gains, Saleh-Valenzuela
//! clustered multipath, an i.i.d. Gaussian benchmark, and the spatial-tuning
//! geometry helpers (optimal subarray separation, Rayleigh distance).
//!
//! Geometry convention: transmit subarrays (SAs) lie on a uniform grid in the
//! `z = 0` plane, receive SAs on a parallel plane at `z = D`, broadside
//! aligned; SA grids are centered on the link axis. Antenna elements (AEs)
//! inside an SA form a corner-anchored `Q x Q` grid with spacing `delta`.
//! Elevation is measured from the `z` axis, so broadside means `theta = 0`.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{inner, ComplexMatrix};
use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Array-of-subarrays geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Tx SA grid rows (M_t).
    pub tx_rows: usize,
    /// Tx SA grid columns (N_t).
    pub tx_cols: usize,
    /// Rx SA grid rows (M_r).
    pub rx_rows: usize,
    /// Rx SA grid columns (N_r).
    pub rx_cols: usize,
    /// AEs per SA side (Q); each SA carries Q^2 elements.
    pub ae_per_side: usize,
    /// AE spacing inside an SA, meters.
    pub ae_spacing_m: f64,
    /// SA spacing, meters. Tuning with idle AEs allows any positive value.
    pub sa_spacing_m: f64,
    /// Carrier frequency, Hz.
    pub carrier_hz: f64,
    /// Broadside Tx-Rx distance, meters.
    pub distance_m: f64,
}

impl ArrayGeometry {
    /// Vectorized Tx SA count `N`.
    pub fn n(&self) -> usize {
        self.tx_rows * self.tx_cols
    }

    /// Vectorized Rx SA count `M`.
    pub fn m(&self) -> usize {
        self.rx_rows * self.rx_cols
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_rows == 0 || self.tx_cols == 0 || self.rx_rows == 0 || self.rx_cols == 0 {
            return Err(Error::InvalidArgument("SA grid counts must be >= 1".into()));
        }
        if self.ae_per_side == 0 {
            return Err(Error::InvalidArgument("AEs per SA side must be >= 1".into()));
        }
        if !(self.ae_spacing_m > 0.0 && self.sa_spacing_m > 0.0) {
            return Err(Error::InvalidArgument("AE and SA spacings must be positive".into()));
        }
        if !(self.carrier_hz > 0.0 && self.distance_m > 0.0) {
            return Err(Error::InvalidArgument("carrier and distance must be positive".into()));
        }
        Ok(())
    }

    /// Center position of Tx SA `n` (row-major index), plane `z = 0`.
    pub fn tx_sa_position(&self, n: usize) -> [f64; 3] {
        grid_position(n, self.tx_rows, self.tx_cols, self.sa_spacing_m, 0.0)
    }

    /// Center position of Rx SA `m`, plane `z = D`.
    pub fn rx_sa_position(&self, m: usize) -> [f64; 3] {
        grid_position(m, self.rx_rows, self.rx_cols, self.sa_spacing_m, self.distance_m)
    }

    /// Corner-anchored AE coordinates inside one SA (`psi_z = 0`).
    pub fn ae_positions(&self) -> Vec<[f64; 3]> {
        let q = self.ae_per_side;
        let d = self.ae_spacing_m;
        let mut out = Vec::with_capacity(q * q);
        for p in 0..q {
            for s in 0..q {
                out.push([p as f64 * d, s as f64 * d, 0.0]);
            }
        }
        out
    }
}

fn grid_position(idx: usize, rows: usize, cols: usize, spacing: f64, z: f64) -> [f64; 3] {
    let (i, j) = (idx / cols, idx % cols);
    [
        (i as f64 - (rows as f64 - 1.0) / 2.0) * spacing,
        (j as f64 - (cols as f64 - 1.0) / 2.0) * spacing,
        z,
    ]
}

/// Propagation and beamforming parameters of a LoS channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Molecular absorption coefficient K(f), 1/m. Supplied, not computed.
    pub k_abs_per_m: f64,
    /// Transmit antenna amplitude gain.
    pub gain_tx: f64,
    /// Receive antenna amplitude gain.
    pub gain_rx: f64,
    /// Transmit azimuth/elevation of departure, radians.
    pub tx_azimuth_rad: f64,
    pub tx_elevation_rad: f64,
    /// Receive azimuth/elevation of arrival, radians.
    pub rx_azimuth_rad: f64,
    pub rx_elevation_rad: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            k_abs_per_m: 0.0,
            gain_tx: 1.0,
            gain_rx: 1.0,
            tx_azimuth_rad: 0.0,
            tx_elevation_rad: 0.0,
            rx_azimuth_rad: 0.0,
            rx_elevation_rad: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_abs_per_m < 0.0 {
            return Err(Error::InvalidArgument("K_abs must be >= 0".into()));
        }
        if !(self.gain_tx > 0.0 && self.gain_rx > 0.0) {
            return Err(Error::InvalidArgument("antenna gains must be positive".into()));
        }
        Ok(())
    }
}

/// Saleh-Valenzuela multipath parameters. The paper names the distribution
/// families; the defaults here are documented configuration, not paper values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathParams {
    /// Number of clusters; zero reduces the channel to pure LoS.
    pub n_clusters: usize,
    /// Mean number of rays per cluster beyond the leading ray (Poisson).
    pub mean_extra_rays: f64,
    /// Cluster power decay factor Gamma, seconds.
    pub cluster_decay_s: f64,
    /// Ray power decay factor gamma, seconds.
    pub ray_decay_s: f64,
    /// Cluster inter-arrival rate, 1/s (exponential arrivals).
    pub cluster_rate_hz: f64,
    /// Ray inter-arrival rate within a cluster, 1/s.
    pub ray_rate_hz: f64,
    /// Ray angle spread: two-component zero-mean Gaussian mixture.
    pub angle_mix_weight: f64,
    pub angle_sigma1_rad: f64,
    pub angle_sigma2_rad: f64,
}

impl Default for MultipathParams {
    fn default() -> Self {
        Self {
            n_clusters: 3,
            mean_extra_rays: 4.0,
            cluster_decay_s: 1.0e-9,
            ray_decay_s: 2.0e-10,
            cluster_rate_hz: 2.0e9,
            ray_rate_hz: 1.0e10,
            angle_mix_weight: 0.7,
            angle_sigma1_rad: 0.05,
            angle_sigma2_rad: 0.25,
        }
    }
}

impl MultipathParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cluster_decay_s > 0.0 && self.ray_decay_s > 0.0) {
            return Err(Error::InvalidArgument("decay factors must be positive".into()));
        }
        if !(self.cluster_rate_hz > 0.0 && self.ray_rate_hz > 0.0) {
            return Err(Error::InvalidArgument("arrival rates must be positive".into()));
        }
        if self.mean_extra_rays < 0.0 {
            return Err(Error::InvalidArgument("mean ray count must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.angle_mix_weight) {
            return Err(Error::InvalidArgument("mixture weight must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Closed-form expected NLoS entry power at broadside distance `d`:
    /// spreading x absorption x the double-exponential arrival decay, with the
    /// cluster/ray arrival processes integrated out (geometric sums of the
    /// exponential-arrival Laplace transforms, Poisson ray counts via the PGF).
    pub fn expected_nlos_entry_power(
        &self,
        carrier_hz: f64,
        distance_m: f64,
        k_abs_per_m: f64,
        gain_tx: f64,
        gain_rx: f64,
    ) -> f64 {
        let spread = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * carrier_hz * distance_m);
        let base = (gain_tx * gain_rx * spread).powi(2) * (-k_abs_per_m * distance_m).exp();
        // E[exp(-Exp(rate)/decay)] = rate*decay / (rate*decay + 1).
        let q = self.cluster_rate_hz * self.cluster_decay_s
            / (self.cluster_rate_hz * self.cluster_decay_s + 1.0);
        let cluster_sum = if self.n_clusters == 0 {
            0.0
        } else {
            (1.0 - q.powi(self.n_clusters as i32)) / (1.0 - q)
        };
        let p = self.ray_rate_hz * self.ray_decay_s / (self.ray_rate_hz * self.ray_decay_s + 1.0);
        // Leading ray at tau = 0 plus Poisson(mean) later rays.
        let ray_sum = (1.0 - p * (-self.mean_extra_rays * (1.0 - p)).exp()) / (1.0 - p);
        base * cluster_sum * ray_sum
    }
}

/// Channel kind label carried by a realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    Los,
    Multipath,
    Gaussian,
}

/// A generated channel matrix with provenance.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
    pub kind: ChannelKind,
    /// Distance-dependent large-scale coefficient, when modeled separately.
    pub sigma_h: Option<f64>,
}

impl ChannelRealization {
    /// Rescale so the average entry gain is one (`||H||_F^2 = M N`).
    pub fn normalized(&self) -> Self {
        let scale = ((self.h.rows() * self.h.cols()) as f64).sqrt() / self.h.fro_norm();
        Self {
            h: self.h.scale(C64::new(scale, 0.0)),
            kind: self.kind,
            sigma_h: self.sigma_h,
        }
    }
}

/// LoS path gain of Eq. type `(c / 4 pi f d) e^{-K d / 2} e^{-j 2 pi f d / c}`.
pub fn los_path_gain(carrier_hz: f64, distance_m: f64, k_abs_per_m: f64) -> Result<C64> {
    if !(carrier_hz > 0.0) || !(distance_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "los_path_gain needs positive f and d, got f = {carrier_hz}, d = {distance_m}"
        )));
    }
    if k_abs_per_m < 0.0 {
        return Err(Error::InvalidArgument("K_abs must be >= 0".into()));
    }
    let spread = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * carrier_hz * distance_m);
    let absorb = (-0.5 * k_abs_per_m * distance_m).exp();
    let phase = -2.0 * std::f64::consts::PI * carrier_hz * distance_m / SPEED_OF_LIGHT;
    Ok(C64::from_polar(spread * absorb, phase))
}

/// Plane-wave unit direction for azimuth `phi` and elevation `theta`
/// (measured from the z axis).
#[inline]
pub fn direction(phi: f64, theta: f64) -> [f64; 3] {
    [phi.cos() * theta.sin(), phi.sin() * theta.sin(), theta.cos()]
}

/// Ideal analog steering vector over the given AE coordinates: entries
/// `(1/sqrt(len)) e^{j psi . k(phi, theta)}`, unit norm.
pub fn steering_vector(phi: f64, theta: f64, wavelength_m: f64, positions: &[[f64; 3]]) -> Vec<C64> {
    let k = 2.0 * std::f64::consts::PI / wavelength_m;
    let u = direction(phi, theta);
    let norm = 1.0 / (positions.len() as f64).sqrt();
    positions
        .iter()
        .map(|p| C64::from_polar(norm, k * (p[0] * u[0] + p[1] * u[1] + p[2] * u[2])))
        .collect()
}

/// Deterministic THz LoS channel: `h_{m,n} = (a_r* a_t) G_r G_t alpha(d_{m,n})`
/// with exact 3D SA-center distances.
pub fn los_channel(geom: &ArrayGeometry, params: &ChannelParams) -> Result<ChannelRealization> {
    geom.validate()?;
    params.validate()?;
    let lambda = geom.wavelength_m();
    let ae = geom.ae_positions();
    let a_t = steering_vector(params.tx_azimuth_rad, params.tx_elevation_rad, lambda, &ae);
    let a_r = steering_vector(params.rx_azimuth_rad, params.rx_elevation_rad, lambda, &ae);
    let bf = inner(&a_r, &a_t) * params.gain_rx * params.gain_tx;

    let (m, n) = (geom.m(), geom.n());
    let mut h = ComplexMatrix::zeros(m, n);
    for rx in 0..m {
        let pr = geom.rx_sa_position(rx);
        for tx in 0..n {
            let pt = geom.tx_sa_position(tx);
            let d = ((pr[0] - pt[0]).powi(2) + (pr[1] - pt[1]).powi(2) + (pr[2] - pt[2]).powi(2))
                .sqrt();
            h[(rx, tx)] = bf * los_path_gain(geom.carrier_hz, d, params.k_abs_per_m)?;
        }
    }
    Ok(ChannelRealization { h, kind: ChannelKind::Los, sigma_h: None })
}

/// Saleh-Valenzuela multipath channel: the LoS term plus a sum of randomly
/// arriving clusters and rays. Ray gains are complex Gaussian with
/// mean-square power following the printed spreading x absorption x
/// double-exponential decay profile at the broadside distance; ray geometry
/// enters through plane-wave phases at the SA centers (intra-SA patterns are
/// absorbed into the scalar gains).
pub fn multipath_channel(
    geom: &ArrayGeometry,
    params: &ChannelParams,
    mp: &MultipathParams,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    mp.validate()?;
    let mut real = los_channel(geom, params)?;
    if mp.n_clusters == 0 {
        return Ok(ChannelRealization { kind: ChannelKind::Multipath, ..real });
    }

    let lambda = geom.wavelength_m();
    let k_wave = 2.0 * std::f64::consts::PI / lambda;
    let (m, n) = (geom.m(), geom.n());
    let d0 = geom.distance_m;
    let spread = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * geom.carrier_hz * d0);
    let base_var = (params.gain_tx * params.gain_rx * spread).powi(2)
        * (-params.k_abs_per_m * d0).exp();

    let cluster_gap = Exp::new(mp.cluster_rate_hz).expect("validated rate");
    let ray_gap = Exp::new(mp.ray_rate_hz).expect("validated rate");
    let n_extra = Poisson::new(mp.mean_extra_rays.max(f64::MIN_POSITIVE)).expect("validated mean");

    let sample_offset = |rng: &mut dyn rand::RngCore| -> f64 {
        let sigma = if rng.random::<f64>() < mp.angle_mix_weight {
            mp.angle_sigma1_rad
        } else {
            mp.angle_sigma2_rad
        };
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    };

    let mut tau_cluster = 0.0;
    for v in 0..mp.n_clusters {
        if v > 0 {
            tau_cluster += cluster_gap.sample(rng);
        }
        // Cluster-level departure/arrival angles.
        let caz_t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let cel_t = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
        let caz_r = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let cel_r = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);

        let rays = 1 + if mp.mean_extra_rays > 0.0 { n_extra.sample(rng) as usize } else { 0 };
        let mut tau_ray = 0.0;
        for u in 0..rays {
            if u > 0 {
                tau_ray += ray_gap.sample(rng);
            }
            let var = base_var
                * (-tau_cluster / mp.cluster_decay_s).exp()
                * (-tau_ray / mp.ray_decay_s).exp();
            let sd = (var / 2.0).sqrt();
            let g = C64::new(
                sd * rng.sample::<f64, _>(StandardNormal),
                sd * rng.sample::<f64, _>(StandardNormal),
            );
            let u_t = direction(caz_t + sample_offset(rng), cel_t + sample_offset(rng));
            let u_r = direction(caz_r + sample_offset(rng), cel_r + sample_offset(rng));

            for rx in 0..m {
                let pr = geom.rx_sa_position(rx);
                let phase_r = k_wave * (pr[0] * u_r[0] + pr[1] * u_r[1] + pr[2] * u_r[2]);
                for tx in 0..n {
                    let pt = geom.tx_sa_position(tx);
                    let phase_t = k_wave * (pt[0] * u_t[0] + pt[1] * u_t[1] + pt[2] * u_t[2]);
                    real.h[(rx, tx)] += g * C64::from_polar(1.0, phase_r - phase_t);
                }
            }
        }
    }
    Ok(ChannelRealization { kind: ChannelKind::Multipath, ..real })
}

/// Benchmark channel with i.i.d. CN(0, 1) entries.
pub fn gaussian_channel(m: usize, n: usize, rng: &mut impl Rng) -> ChannelRealization {
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    let h = ComplexMatrix::from_fn(m, n, |_, _| {
        C64::new(
            sd * rng.sample::<f64, _>(StandardNormal),
            sd * rng.sample::<f64, _>(StandardNormal),
        )
    });
    ChannelRealization { h, kind: ChannelKind::Gaussian, sigma_h: None }
}

/// Optimal SA separation `sqrt(z D lambda / M)` for odd `z`; at this spacing
/// the LoS channel of a symmetric M-SA linear arrangement becomes orthogonal.
pub fn optimal_sa_separation(distance_m: f64, wavelength_m: f64, m: usize, z: usize) -> Result<f64> {
    if z % 2 == 0 || z == 0 {
        return Err(Error::InvalidArgument(format!("z must be odd and >= 1, got {z}")));
    }
    if !(distance_m > 0.0 && wavelength_m > 0.0) || m == 0 {
        return Err(Error::InvalidArgument("distance, wavelength, M must be positive".into()));
    }
    Ok((z as f64 * distance_m * wavelength_m / m as f64).sqrt())
}

/// Rayleigh distance `2 ((M - 1) Delta)^2 / lambda`: the range beyond which
/// separation tuning stops providing spatial multiplexing.
pub fn rayleigh_distance(sa_spacing_m: f64, m: usize, wavelength_m: f64) -> f64 {
    let aperture = (m.saturating_sub(1)) as f64 * sa_spacing_m;
    2.0 * aperture * aperture / wavelength_m
}

/// Interpolate a molecular absorption coefficient from a two-column table
/// (frequency_Hz, K_abs_per_m), sorted by frequency. Linear between rows,
/// clamped at the ends.
pub fn interpolate_k_abs(table: &[(f64, f64)], carrier_hz: f64) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::InvalidArgument("empty absorption table".into()));
    }
    if table.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidArgument(
            "absorption table must be strictly increasing in frequency".into(),
        ));
    }
    if carrier_hz <= table[0].0 {
        return Ok(table[0].1);
    }
    if carrier_hz >= table[table.len() - 1].0 {
        return Ok(table[table.len() - 1].1);
    }
    let i = table.partition_point(|&(f, _)| f < carrier_hz);
    let (f0, k0) = table[i - 1];
    let (f1, k1) = table[i];
    Ok(k0 + (k1 - k0) * (carrier_hz - f0) / (f1 - f0))
}

/// Convenience geometry for the tuned/detuned test scenarios: symmetric
/// linear arrays of `n` SAs with spacing `Delta_opt(z = 1)` scaled by
/// `detune` (1.0 means perfectly tuned).
pub fn linear_geometry(n: usize, carrier_hz: f64, distance_m: f64, detune: f64) -> Result<ArrayGeometry> {
    let lambda = SPEED_OF_LIGHT / carrier_hz;
    let opt = optimal_sa_separation(distance_m, lambda, n, 1)?;
    Ok(ArrayGeometry {
        tx_rows: 1,
        tx_cols: n,
        rx_rows: 1,
        rx_cols: n,
        ae_per_side: 1,
        ae_spacing_m: lambda / 2.0,
        sa_spacing_m: opt * detune,
        carrier_hz,
        distance_m,
    })
}
