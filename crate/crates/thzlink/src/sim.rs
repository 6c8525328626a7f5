//! Monte Carlo BER engine: trial generation, noise injection, detection
//! dispatch, error counting, early stopping, confidence intervals, and
//! reproducible parallel RNG.
//!
//! Reproducibility contract: every random draw of a trial comes from a
//! counter-based stream keyed by `(seed, snr point, trial index, substream)`,
//! and per-point accumulation is an order-independent integer sum, so a run
//! produces byte-identical CSV at any worker count. All detectors of a sweep
//! share each trial's channel, bits, and noise (common random numbers),
//! which makes paired detector comparisons cheap.
//!
//! Early stopping: an SNR point stops once every detector has accumulated
//! `min_bit_errors` (or at `max_trials`); trials are processed in fixed-size
//! batches so the stopping decision itself is worker-independent. BER is
//! always `errors / bits simulated` with the actual trial count recorded.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    gaussian_channel, los_channel, multipath_channel, ArrayGeometry, ChannelParams,
    MultipathParams,
};
use crate::detect::{detect_superposed, ChannelFactors, DetectorKind, StreamPlan};
use crate::linalg::ComplexMatrix;
use crate::noma::{
    build_noma_links, drop_users, jdcp, noma_detect_pair, pair_stream_plan, NomaLink,
    NomaLinkGeometry, NomaScenario,
};
use crate::{Error, Result};

/// Substream identifiers for the per-trial RNG keying.
pub mod substream {
    pub const CHANNEL: u64 = 0;
    pub const BITS: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const SCENARIO: u64 = 3;
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn digest(seed: u64, point: u64, trial: u64, sub: u64, tweak: u64) -> u64 {
    let mut z = seed ^ tweak;
    z = mix(z.wrapping_add(point.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    z = mix(z.wrapping_add(trial.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)));
    z = mix(z.wrapping_add(sub.wrapping_mul(0x1656_67B1_9E37_79F9)));
    z
}

/// Counter-based per-trial RNG: a ChaCha stream keyed by
/// `(seed, point, trial, substream)`. Identical inputs give identical
/// streams on any thread.
pub fn trial_rng(seed: u64, point: u64, trial: u64, sub: u64) -> ChaCha8Rng {
    const TWEAKS: [u64; 4] = [
        0x243F_6A88_85A3_08D3,
        0x1319_8A2E_0370_7344,
        0xA409_3822_299F_31D0,
        0x082E_FA98_EC4E_6C89,
    ];
    let mut key = [0u8; 32];
    for (i, tweak) in TWEAKS.iter().enumerate() {
        key[i * 8..(i + 1) * 8]
            .copy_from_slice(&digest(seed, point, trial, sub, *tweak).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Draw a CN(0, sigma2) vector.
pub fn cn_vector(len: usize, sigma2: f64, rng: &mut impl rand::Rng) -> Vec<C64> {
    let sd = (sigma2 / 2.0).sqrt();
    (0..len)
        .map(|_| {
            C64::new(
                sd * rng.sample::<f64, _>(StandardNormal),
                sd * rng.sample::<f64, _>(StandardNormal),
            )
        })
        .collect()
}

/// How an SNR grid value maps to a noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SnrMode {
    /// `sigma^2 = (sum of stream powers) / 10^(snr/10)`, intended for
    /// channels normalized to unit average entry gain.
    TransmitNormalized,
    /// The grid sets sigma^2 directly on a dB scale anchored at a reference
    /// power: `sigma^2 = reference * 10^(-snr/10)`; the SNR column is then
    /// derived metadata. NOMA sweeps anchor at the receiver sensitivity.
    Physical { reference_w: f64 },
}

impl SnrMode {
    /// Parse a config-file mode name.
    pub fn parse(name: &str, reference_w: f64) -> Result<Self> {
        match name {
            "transmit-normalized" => Ok(SnrMode::TransmitNormalized),
            "physical" => Ok(SnrMode::Physical { reference_w }),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

/// Noise variance for an SNR grid point.
pub fn snr_to_sigma2(snr_db: f64, total_power_w: f64, mode: SnrMode) -> f64 {
    let anchor = match mode {
        SnrMode::TransmitNormalized => total_power_w,
        SnrMode::Physical { reference_w } => reference_w,
    };
    anchor * 10f64.powf(-snr_db / 10.0)
}

/// Inverse of [`snr_to_sigma2`].
pub fn sigma2_to_snr(sigma2_w: f64, total_power_w: f64, mode: SnrMode) -> f64 {
    let anchor = match mode {
        SnrMode::TransmitNormalized => total_power_w,
        SnrMode::Physical { reference_w } => reference_w,
    };
    10.0 * (anchor / sigma2_w).log10()
}

/// 95% normal-approximation binomial confidence half-width on `errors`
/// successes out of `bits` Bernoulli trials. Zero errors give a zero
/// half-width under this approximation (a documented limitation).
pub fn binomial_ci(errors: u64, bits: u64) -> f64 {
    if bits == 0 {
        return 0.0;
    }
    let p = errors as f64 / bits as f64;
    1.96 * (p * (1.0 - p) / bits as f64).sqrt()
}

/// One-sided sign-test p-value: probability that a fair coin shows at least
/// `wins` heads in `wins + losses` flips. Exact summation for small counts,
/// normal approximation with continuity correction beyond.
pub fn sign_test_p_value(wins: u64, losses: u64) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    if n <= 10_000 {
        let ln_half = (0.5f64).ln();
        let mut p = 0.0;
        for k in wins..=n {
            let ln_binom = libm::lgamma(n as f64 + 1.0)
                - libm::lgamma(k as f64 + 1.0)
                - libm::lgamma((n - k) as f64 + 1.0);
            p += (ln_binom + n as f64 * ln_half).exp();
        }
        p.min(1.0)
    } else {
        let mean = n as f64 / 2.0;
        let sd = (n as f64 / 4.0).sqrt();
        let z = (wins as f64 - 0.5 - mean) / sd;
        crate::analysis::q_function(z)
    }
}

/// Channel specification for a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ChannelSpec {
    /// i.i.d. CN(0,1), redrawn every trial.
    Gaussian { m: usize, n: usize },
    /// Deterministic THz LoS channel, generated once per sweep.
    ThzLos { geometry: ArrayGeometry, params: ChannelParams, normalize: bool },
    /// LoS plus Saleh-Valenzuela multipath, redrawn every trial.
    ThzMultipath {
        geometry: ArrayGeometry,
        params: ChannelParams,
        multipath: MultipathParams,
        normalize: bool,
    },
    /// Exactly diagonal channel with the given real gains (test scenarios).
    Diagonal { gains: Vec<f64> },
}

impl ChannelSpec {
    /// Deterministic kinds are generated once and shared by every trial.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, ChannelSpec::ThzLos { .. } | ChannelSpec::Diagonal { .. })
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            ChannelSpec::Gaussian { m, n } => (*m, *n),
            ChannelSpec::ThzLos { geometry, .. } | ChannelSpec::ThzMultipath { geometry, .. } => {
                (geometry.m(), geometry.n())
            }
            ChannelSpec::Diagonal { gains } => (gains.len(), gains.len()),
        }
    }

    /// Generate a realization; `rng` is consumed only by random kinds.
    pub fn generate(&self, rng: &mut impl rand::Rng) -> Result<ComplexMatrix> {
        match self {
            ChannelSpec::Gaussian { m, n } => Ok(gaussian_channel(*m, *n, rng).h),
            ChannelSpec::ThzLos { geometry, params, normalize } => {
                let ch = los_channel(geometry, params)?;
                Ok(if *normalize { ch.normalized().h } else { ch.h })
            }
            ChannelSpec::ThzMultipath { geometry, params, multipath, normalize } => {
                let ch = multipath_channel(geometry, params, multipath, rng)?;
                Ok(if *normalize { ch.normalized().h } else { ch.h })
            }
            ChannelSpec::Diagonal { gains } => Ok(ComplexMatrix::from_diag(
                &gains.iter().map(|&g| C64::new(g, 0.0)).collect::<Vec<_>>(),
            )),
        }
    }
}

/// What is being simulated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Scenario {
    /// Point-to-point superposition coding over one channel.
    SingleUser { channel: ChannelSpec, plan: StreamPlan },
    /// Two-user NOMA over a dropped cell (deterministic per-pair LoS links).
    Noma {
        scenario: NomaScenario,
        geometry: NomaLinkGeometry,
        modulation_order: usize,
        /// Redraw budget when a drop comes up empty.
        max_redraws: u32,
    },
}

/// Full sweep configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub detectors: Vec<DetectorKind>,
    pub snr_db_grid: Vec<f64>,
    pub snr_mode: SnrMode,
    pub max_trials: u64,
    pub min_bit_errors: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() {
            return Err(Error::InvalidArgument("no detectors selected".into()));
        }
        if self.snr_db_grid.is_empty() || self.snr_db_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("SNR grid must be finite and non-empty".into()));
        }
        if self.snr_db_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("SNR grid must be strictly increasing".into()));
        }
        if self.max_trials == 0 {
            return Err(Error::InvalidArgument("max_trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// Where a CSV row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordSource {
    Simulate,
    Theory,
}

impl std::fmt::Display for RecordSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecordSource::Simulate => "simulate",
            RecordSource::Theory => "theory",
        })
    }
}

/// One (detector, stream, SNR) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub detector: DetectorKind,
    /// Stream label: `s1..sk` for single-user plans, `u1`/`u2` for NOMA.
    pub stream: String,
    pub snr_db: f64,
    pub sigma2_w: f64,
    pub trials: u64,
    pub bit_errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub ci95: f64,
    pub source: RecordSource,
}

/// CSV header shared by simulation and theory outputs.
pub const CSV_HEADER: &str = "detector,stream,snr_db,sigma2_w,trials,bit_errors,ber,ci95,source";

/// Scientific notation with 9 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// Render records as CSV (header row mandatory).
pub fn records_to_csv(records: &[BerRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.detector,
            r.stream,
            fmt_float(r.snr_db),
            fmt_float(r.sigma2_w),
            r.trials,
            r.bit_errors,
            fmt_float(r.ber),
            fmt_float(r.ci95),
            r.source
        ));
    }
    out
}

const BATCH_TRIALS: u64 = 512;

/// Run the Monte Carlo BER sweep described by `cfg`.
///
/// Trials are distributed over the ambient rayon pool; results are
/// bit-identical at any worker count for a fixed `(seed, cfg)`.
pub fn run_ber_sweep(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    match &cfg.scenario {
        Scenario::SingleUser { channel, plan } => run_single_user(cfg, channel, plan),
        Scenario::Noma { scenario, geometry, modulation_order, max_redraws } => {
            run_noma(cfg, scenario, geometry, *modulation_order, *max_redraws)
        }
    }
}

fn hamming(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

fn run_single_user(
    cfg: &SimConfig,
    channel: &ChannelSpec,
    plan: &StreamPlan,
) -> Result<Vec<BerRecord>> {
    let (_m, n) = channel.dims();
    if n != plan.n() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {n} transmit SAs, plan expects {}",
            plan.n()
        )));
    }
    let n_det = cfg.detectors.len();
    let n_streams = plan.streams().len();
    let bits_per_stream: Vec<u64> = (0..n_streams)
        .map(|i| {
            (plan.columns(i).len() * plan.streams()[i].constellation.bits_per_symbol()) as u64
        })
        .collect();

    // Deterministic kinds: one realization and one factor set for the sweep.
    let fixed: Option<(ComplexMatrix, ChannelFactors)> = if channel.is_deterministic() {
        let h = channel.generate(&mut trial_rng(cfg.seed, 0, 0, substream::CHANNEL))?;
        let factors = ChannelFactors::prepare(&h, plan, &cfg.detectors)?;
        Some((h, factors))
    } else {
        None
    };

    let mut records = Vec::new();
    for (point, &snr_db) in cfg.snr_db_grid.iter().enumerate() {
        let sigma2 = snr_to_sigma2(snr_db, plan.total_power(), cfg.snr_mode);
        let mut errors = vec![0u64; n_det * n_streams];
        let mut trials_done = 0u64;

        while trials_done < cfg.max_trials {
            let batch_end = (trials_done + BATCH_TRIALS).min(cfg.max_trials);
            let batch: Vec<Vec<u64>> = (trials_done..batch_end)
                .into_par_iter()
                .map(|trial| -> Result<Vec<u64>> {
                    single_user_trial(
                        cfg, channel, plan, fixed.as_ref(), point as u64, trial, sigma2,
                    )
                })
                .collect::<Result<_>>()?;
            for counts in &batch {
                for (acc, &e) in errors.iter_mut().zip(counts) {
                    *acc += e;
                }
            }
            trials_done = batch_end;
            if cfg.min_bit_errors > 0 {
                let all_reached = (0..n_det).all(|d| {
                    (0..n_streams).map(|s| errors[d * n_streams + s]).sum::<u64>()
                        >= cfg.min_bit_errors
                });
                if all_reached {
                    break;
                }
            }
        }

        for (d, &det) in cfg.detectors.iter().enumerate() {
            for s in 0..n_streams {
                let bits = trials_done * bits_per_stream[s];
                let e = errors[d * n_streams + s];
                records.push(BerRecord {
                    detector: det,
                    stream: format!("s{}", s + 1),
                    snr_db,
                    sigma2_w: sigma2,
                    trials: trials_done,
                    bit_errors: e,
                    bits,
                    ber: if bits > 0 { e as f64 / bits as f64 } else { 0.0 },
                    ci95: binomial_ci(e, bits),
                    source: RecordSource::Simulate,
                });
            }
        }
    }
    Ok(records)
}

#[allow(clippy::too_many_arguments)]
fn single_user_trial(
    cfg: &SimConfig,
    channel: &ChannelSpec,
    plan: &StreamPlan,
    fixed: Option<&(ComplexMatrix, ChannelFactors)>,
    point: u64,
    trial: u64,
    sigma2: f64,
) -> Result<Vec<u64>> {
    let n_det = cfg.detectors.len();
    let n_streams = plan.streams().len();

    let drawn;
    let (h, factors) = match fixed {
        Some((h, f)) => (h, f),
        None => {
            let mut ch_rng = trial_rng(cfg.seed, point, trial, substream::CHANNEL);
            let h = channel.generate(&mut ch_rng)?;
            let factors = ChannelFactors::prepare(&h, plan, &cfg.detectors)?;
            drawn = (h, factors);
            (&drawn.0, &drawn.1)
        }
    };

    // Bits, symbols, superposition.
    let mut bits_rng = trial_rng(cfg.seed, point, trial, substream::BITS);
    let mut tx_bits: Vec<Vec<u8>> = Vec::with_capacity(n_streams);
    let mut y = {
        let mut noise_rng = trial_rng(cfg.seed, point, trial, substream::NOISE);
        cn_vector(h.rows(), sigma2, &mut noise_rng)
    };
    for i in 0..n_streams {
        let c = &plan.streams()[i].constellation;
        let cols = plan.columns(i);
        let nbits = cols.len() * c.bits_per_symbol();
        let bits: Vec<u8> =
            (0..nbits).map(|_| u8::from(bits_rng.random::<bool>())).collect();
        let sv = c.modulate(&bits)?;
        for (j, &col) in cols.iter().enumerate() {
            for row in 0..h.rows() {
                y[row] += h[(row, col)] * sv.points[j];
            }
        }
        tx_bits.push(bits);
    }

    // Common random numbers: every detector sees the same trial.
    let mut errors = vec![0u64; n_det * n_streams];
    for (d, &kind) in cfg.detectors.iter().enumerate() {
        let res = detect_superposed(&y, h, plan, kind, factors)?;
        for s in 0..n_streams {
            errors[d * n_streams + s] = hamming(&res.streams[s].bits, &tx_bits[s]);
        }
    }
    Ok(errors)
}

fn run_noma(
    cfg: &SimConfig,
    scenario: &NomaScenario,
    geometry: &NomaLinkGeometry,
    order: usize,
    max_redraws: u32,
) -> Result<Vec<BerRecord>> {
    scenario.validate()?;
    // One seeded drop per run; pairs are fixed across the sweep.
    let mut drop_rng = trial_rng(cfg.seed, 0, 0, substream::SCENARIO);
    let mut drop = None;
    for _ in 0..=max_redraws {
        match drop_users(scenario, &mut drop_rng) {
            Ok(d) => {
                drop = Some(d);
                break;
            }
            Err(Error::EmptyDrop) => continue,
            Err(e) => return Err(e),
        }
    }
    let drop = drop.ok_or(Error::EmptyDrop)?;
    let inner: Vec<f64> = drop.inner.iter().map(|u| u.distance_m).collect();
    let outer: Vec<f64> = drop.outer.iter().map(|u| u.distance_m).collect();
    let cluster = jdcp(&inner, &outer, scenario)?;
    let links = build_noma_links(&cluster, scenario, geometry)?;
    let n = geometry.n_sas;

    // Per-pair plans and factors, computed once (links are deterministic).
    struct PairCtx {
        link: NomaLink,
        plan: StreamPlan,
        f1: ChannelFactors,
        f2: ChannelFactors,
    }
    let pairs: Vec<PairCtx> = links
        .into_iter()
        .map(|link| -> Result<PairCtx> {
            let plan = pair_stream_plan(n, order, link.pair.p1_w, link.pair.p2_w)?;
            let f1 = ChannelFactors::prepare(&link.h1, &plan, &cfg.detectors)?;
            let f2 = ChannelFactors::prepare(&link.h2, &plan, &cfg.detectors)?;
            Ok(PairCtx { link, plan, f1, f2 })
        })
        .collect::<Result<_>>()?;

    let n_det = cfg.detectors.len();
    let bits_per_user = (n * Constellation_bits(order)?) as u64;
    let bits_per_trial = bits_per_user * pairs.len() as u64;

    let mut records = Vec::new();
    for (point, &snr_db) in cfg.snr_db_grid.iter().enumerate() {
        let sigma2 = snr_to_sigma2(snr_db, scenario.rx_sensitivity_w, cfg.snr_mode);
        let mut errors = vec![0u64; n_det * 2];
        let mut trials_done = 0u64;

        while trials_done < cfg.max_trials {
            let batch_end = (trials_done + BATCH_TRIALS).min(cfg.max_trials);
            let batch: Vec<Vec<u64>> = (trials_done..batch_end)
                .into_par_iter()
                .map(|trial| -> Result<Vec<u64>> {
                    let mut errors = vec![0u64; n_det * 2];
                    let mut bits_rng = trial_rng(cfg.seed, point as u64, trial, substream::BITS);
                    let mut noise_rng =
                        trial_rng(cfg.seed, point as u64, trial, substream::NOISE);
                    for ctx in &pairs {
                        let c1 = &ctx.plan.streams()[0].constellation;
                        let c2 = &ctx.plan.streams()[1].constellation;
                        let b1: Vec<u8> = (0..bits_per_user)
                            .map(|_| u8::from(bits_rng.random::<bool>()))
                            .collect();
                        let b2: Vec<u8> = (0..bits_per_user)
                            .map(|_| u8::from(bits_rng.random::<bool>()))
                            .collect();
                        let x1 = c1.modulate(&b1)?;
                        let x2 = c2.modulate(&b2)?;
                        let tx: Vec<C64> =
                            x1.points.iter().zip(&x2.points).map(|(a, b)| a + b).collect();
                        let mut y1 = ctx.link.h1.mul_vec(&tx);
                        let mut y2 = ctx.link.h2.mul_vec(&tx);
                        for (v, nz) in y1.iter_mut().zip(cn_vector(n, sigma2, &mut noise_rng)) {
                            *v += nz;
                        }
                        for (v, nz) in y2.iter_mut().zip(cn_vector(n, sigma2, &mut noise_rng)) {
                            *v += nz;
                        }
                        for (d, &kind) in cfg.detectors.iter().enumerate() {
                            let (bits_u1, bits_u2) = noma_detect_pair(
                                &y1, &y2, &ctx.link.h1, &ctx.link.h2, &ctx.plan, kind, &ctx.f1,
                                &ctx.f2,
                            )?;
                            errors[d * 2] += hamming(&bits_u1, &b1);
                            errors[d * 2 + 1] += hamming(&bits_u2, &b2);
                        }
                    }
                    Ok(errors)
                })
                .collect::<Result<_>>()?;
            for counts in &batch {
                for (acc, &e) in errors.iter_mut().zip(counts) {
                    *acc += e;
                }
            }
            trials_done = batch_end;
            if cfg.min_bit_errors > 0 {
                let all_reached = (0..n_det)
                    .all(|d| errors[d * 2] + errors[d * 2 + 1] >= cfg.min_bit_errors);
                if all_reached {
                    break;
                }
            }
        }

        for (d, &det) in cfg.detectors.iter().enumerate() {
            for user in 0..2usize {
                let bits = trials_done * bits_per_trial;
                let e = errors[d * 2 + user];
                records.push(BerRecord {
                    detector: det,
                    stream: format!("u{}", user + 1),
                    snr_db,
                    sigma2_w: sigma2,
                    trials: trials_done,
                    bit_errors: e,
                    bits,
                    ber: if bits > 0 { e as f64 / bits as f64 } else { 0.0 },
                    ci95: binomial_ci(e, bits),
                    source: RecordSource::Simulate,
                });
            }
        }
    }
    Ok(records)
}

#[allow(non_snake_case)]
fn Constellation_bits(order: usize) -> Result<usize> {
    if !crate::constellation::SUPPORTED_ORDERS.contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    Ok(order.ilog2() as usize)
}
