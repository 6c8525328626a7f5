//! Closed-form BER evaluators and the flop-count complexity model.
//!
//! The bit-error expressions come in two flavors:
//!
//! * *Conditional* forms evaluated on realized diagonal values `r_nn` /
//!   `r̊_nn` of a fixed (e.g. deterministic THz) channel.
//! * *Rayleigh-averaged* forms for Gaussian channels, built on the
//!   `G(z, γ̄, L)` function: the average BER of Gray-mapped L-QAM over z-fold
//!   maximal-ratio Rayleigh diversity with mean branch SNR `γ̄`. `G` is
//!   realized here by numerically averaging the exact AWGN QAM bit error
//!   rate over the Gamma(z, γ̄) SNR density.
//!
//! The printed error expressions are bit-exact for BPSK; for higher orders
//! the Q-function kernel is replaced by the exact AWGN Gray-QAM bit error
//! rate at the same effective SNR.
//!
//! All functions here are pure and freely parallel.

use serde::{Deserialize, Serialize};

use crate::detect::DetectorKind;
use crate::{Error, Result};

/// Gaussian tail function `Q(x) = integral_x^inf e^{-z^2/2} / sqrt(2 pi) dz`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Exact bit error rate of Gray-mapped square L-QAM (or BPSK) on AWGN at
/// symbol SNR `gamma` (= E_s / sigma^2 with complex noise variance sigma^2).
pub fn awgn_qam_ber(gamma: f64, order: usize) -> Result<f64> {
    if gamma < 0.0 {
        return Err(Error::InvalidArgument(format!("negative SNR {gamma}")));
    }
    if order == 2 {
        return Ok(q_function((2.0 * gamma).sqrt()));
    }
    if !crate::constellation::SUPPORTED_ORDERS.contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    // Per-axis PAM decomposition of square QAM with the reflected-Gray map.
    let l = order as f64;
    let i_levels = (order as f64).sqrt().round() as usize; // levels per axis
    let bits_per_axis = i_levels.ilog2() as usize;
    let a = (3.0 * gamma / (l - 1.0)).sqrt();

    let mut total = 0.0;
    for k in 1..=bits_per_axis {
        let upper = ((1.0 - 0.5f64.powi(k as i32)) * i_levels as f64) as usize;
        let mut pk = 0.0;
        for i in 0..upper {
            let t = (i * (1 << (k - 1))) / i_levels;
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            let coeff = (1u64 << (k - 1)) as f64
                - ((i * (1 << (k - 1))) as f64 / i_levels as f64 + 0.5).floor();
            pk += sign * coeff * 2.0 * q_function((2 * i + 1) as f64 * a);
        }
        total += pk / i_levels as f64;
    }
    Ok(total / bits_per_axis as f64)
}

/// One-bit slicing-error amplitude `beta` for a scaled L-QAM stream at power
/// `p`. The printed form `2 sqrt(p) / (log2 L - 1)` degenerates for BPSK,
/// where the neighbor distance is exactly `2 sqrt(p)`.
pub fn slicing_error_amplitude(order: usize, power: f64) -> f64 {
    if order == 2 {
        2.0 * power.sqrt()
    } else {
        2.0 * power.sqrt() / ((order as f64).log2() - 1.0)
    }
}

/// Average BER of Gray L-QAM over z-fold maximal-ratio Rayleigh diversity
/// with mean branch SNR `gbar`: the AWGN BER averaged over the Gamma(z, gbar)
/// density of the post-combining SNR.
pub fn g_avg_ber(z: usize, gbar: f64, order: usize) -> Result<f64> {
    if z == 0 {
        return Err(Error::InvalidArgument("diversity order z must be >= 1".into()));
    }
    if gbar < 0.0 || !gbar.is_finite() {
        return Err(Error::InvalidArgument(format!("mean branch SNR {gbar} invalid")));
    }
    if order != 2 && !crate::constellation::SUPPORTED_ORDERS.contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    if gbar == 0.0 {
        return awgn_qam_ber(0.0, order);
    }

    // The integrand is BER(gamma) * pdf(gamma); both factors decay, so the
    // integral can be truncated at whichever scale dies first.
    let qcap = 9.5f64; // Q(9.5) ~ 1e-21
    let ber_cap = if order == 2 {
        qcap * qcap / 2.0
    } else {
        qcap * qcap * (order as f64 - 1.0) / 3.0
    };
    let zf = z as f64;
    let tail_cap = gbar * (zf + 40.0 * zf.sqrt() + 40.0);
    let upper = ber_cap.min(tail_cap);

    let ln_norm = -libm::lgamma(zf) - zf * gbar.ln();
    let pdf = |g: f64| -> f64 {
        if g <= 0.0 {
            if z == 1 {
                (ln_norm).exp()
            } else {
                0.0
            }
        } else {
            (ln_norm + (zf - 1.0) * g.ln() - g / gbar).exp()
        }
    };
    let f = |g: f64| awgn_qam_ber(g, order).unwrap() * pdf(g);

    // Composite Simpson; the truncation above leaves a single smooth scale.
    let panels = 4096usize;
    let h = upper / panels as f64;
    let mut acc = f(0.0) + f(upper);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    Ok((acc * h / 3.0).clamp(0.0, 1.0))
}

/// Inputs of the per-stream BER expressions. Detection of stream `i` sees
/// interference from the not-yet-decoded stream `i-1` and a SIC residual from
/// the previously decoded stream `i+1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BerSpec {
    /// Layer count N (streams are assumed equal-size in the analysis).
    pub layers: usize,
    /// Constellation order L.
    pub order: usize,
    /// Power p_i of the stream being detected.
    pub power: f64,
    /// Complex noise variance sigma^2.
    pub noise_var: f64,
    /// Interferer power p_{i-1} (0 when absent).
    pub interferer_power: f64,
    /// Large-scale coefficient sigma_{H,i-1} of the interferer.
    pub interferer_sigma_h: f64,
    /// Power p_{i+1} of the previously decoded stream (0 when absent).
    pub sic_power: f64,
    /// Large-scale coefficient sigma_{H,i+1}.
    pub sic_sigma_h: f64,
    /// Aggregate BER of the previously decoded stream (the SIC residual rate).
    pub sic_residual_ber: f64,
}

impl BerSpec {
    /// Single-stream spec with no interference and no SIC residual.
    pub fn single(layers: usize, order: usize, power: f64, noise_var: f64) -> Self {
        Self {
            layers,
            order,
            power,
            noise_var,
            interferer_power: 0.0,
            interferer_sigma_h: 1.0,
            sic_power: 0.0,
            sic_sigma_h: 1.0,
            sic_residual_ber: 0.0,
        }
    }

    /// Effective interference-plus-noise variance
    /// `sigma^2 + p_{i-1} sigma_{H,i-1}^2 + P^{(i+1)} sigma_{H,i+1}^2 beta_{i+1}^2`.
    pub fn effective_noise_var(&self) -> f64 {
        let beta_next = slicing_error_amplitude(self.order, self.sic_power);
        self.noise_var
            + self.interferer_power * self.interferer_sigma_h.powi(2)
            + self.sic_residual_ber * self.sic_sigma_h.powi(2) * beta_next.powi(2)
    }
}

/// The complete set of binary error-indicator patterns over the layers above
/// layer `n`: 2^(N-n) patterns for the QRD recursion, but only 2 for the
/// punctured case, where upper layers depend on the root alone.
#[derive(Debug, Clone)]
pub struct ErrorPatternSet {
    pub patterns: Vec<Vec<bool>>,
}

impl ErrorPatternSet {
    /// All 2^k patterns over `k` layers (QRD case).
    pub fn qrd(k: usize) -> Self {
        let patterns = (0..1usize << k)
            .map(|mask| (0..k).map(|b| mask >> b & 1 == 1).collect())
            .collect();
        Self { patterns }
    }

    /// The punctured case: only the root decision propagates.
    pub fn punctured() -> Self {
        Self { patterns: vec![vec![false], vec![true]] }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// Per-layer conditional PNC bit error probabilities on realized punctured
/// diagonal values `diag[n] = r̊_{n+1,n+1}` (layer order 1..N, root last):
/// the root layer is a single tail term; every other layer mixes the
/// root-correct and root-error branches, the latter with the extra
/// `beta_i^2` interference-plus-noise inflation.
pub fn pnc_conditional_ber(spec: &BerSpec, diag: &[f64]) -> Result<Vec<f64>> {
    let n = spec.layers;
    if diag.len() != n {
        return Err(Error::LengthMismatch(format!(
            "expected {n} diagonal values, got {}",
            diag.len()
        )));
    }
    let sigma_eff = spec.effective_noise_var();
    let beta_own_sq = slicing_error_amplitude(spec.order, spec.power).powi(2);

    let root = awgn_qam_ber(diag[n - 1].powi(2) * spec.power / sigma_eff, spec.order)?;
    let mut out = Vec::with_capacity(n);
    for &r in diag.iter().take(n - 1) {
        let ok = awgn_qam_ber(r * r * spec.power / sigma_eff, spec.order)?;
        let err = awgn_qam_ber(r * r * spec.power / (sigma_eff + beta_own_sq), spec.order)?;
        out.push(ok * (1.0 - root) + err * root);
    }
    out.push(root);
    Ok(out)
}

/// Maximum layer count for the QRD error-pattern recursion (2^N patterns).
pub const DEFAULT_PATTERN_CAP: usize = 12;

/// Per-layer conditional NC bit error probabilities on realized diagonal
/// values, via the recursion over the complete error-pattern set: layer `n`
/// conditions on every pattern of slicing errors above it, each inflating
/// the effective noise by `beta_i^2` per erred layer.
pub fn nc_conditional_ber(spec: &BerSpec, diag: &[f64]) -> Result<Vec<f64>> {
    nc_conditional_ber_capped(spec, diag, DEFAULT_PATTERN_CAP)
}

/// [`nc_conditional_ber`] with an explicit pattern cap.
pub fn nc_conditional_ber_capped(spec: &BerSpec, diag: &[f64], cap: usize) -> Result<Vec<f64>> {
    let n = spec.layers;
    if diag.len() != n {
        return Err(Error::LengthMismatch(format!(
            "expected {n} diagonal values, got {}",
            diag.len()
        )));
    }
    if n > cap {
        return Err(Error::PatternExplosion { n, cap });
    }
    let sigma_eff = spec.effective_noise_var();
    let beta_own_sq = slicing_error_amplitude(spec.order, spec.power).powi(2);
    let gamma = |r: f64, errs: u32| -> f64 {
        r * r * spec.power / (sigma_eff + beta_own_sq * errs as f64)
    };

    let root = awgn_qam_ber(gamma(diag[n - 1], 0), spec.order)?;
    let mut out = vec![0.0; n];
    out[n - 1] = root;

    // pattern_probs[mask] = probability of the error pattern `mask` over the
    // layers already detected (bit count = number of erred layers).
    let mut pattern_probs = vec![1.0 - root, root];
    for layer in (0..n - 1).rev() {
        let r = diag[layer];
        let mut ber = 0.0;
        let mut next = vec![0.0; pattern_probs.len() * 2];
        for (mask, &prob) in pattern_probs.iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            let p_err = awgn_qam_ber(gamma(r, mask.count_ones()), spec.order)?;
            ber += p_err * prob;
            next[mask << 1] += prob * (1.0 - p_err);
            next[(mask << 1) | 1] += prob * p_err;
        }
        out[layer] = ber;
        pattern_probs = next;
    }
    Ok(out)
}

/// Rayleigh-averaged BER of one stream for the four analyzed detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AvgBer {
    /// Per-layer BER, layer order 1..N (root last).
    pub per_layer: Vec<f64>,
    /// Bit-weighted stream mean (all layers share one constellation).
    pub stream_mean: f64,
    /// The expression as printed: the per-layer mean for NC/PNC, the plain
    /// sum over layers for CD/PCD (which can exceed 1 at low SNR).
    pub as_printed: f64,
    /// `min(stream_mean, 0.5)`.
    pub stream_mean_clamped: f64,
}

/// Rayleigh-averaged per-stream BER for NC, PNC, CD, or PCD on a Gaussian
/// channel. Diversity orders follow the chi-squared law of the diagonals:
/// `2(N - n + 1)` degrees of freedom for QRD layers, collapsing to 4 (2-fold
/// diversity) for every punctured layer; chase variants force the root
/// error rate to zero.
pub fn avg_ber_rayleigh(kind: DetectorKind, spec: &BerSpec) -> Result<AvgBer> {
    let n = spec.layers;
    let sigma_eff = spec.effective_noise_var();
    let beta_own_sq = slicing_error_amplitude(spec.order, spec.power).powi(2);
    let gbar0 = spec.power / sigma_eff;

    let per_layer: Vec<f64> = match kind {
        DetectorKind::Pnc | DetectorKind::Pcd => {
            let root = if kind == DetectorKind::Pnc {
                g_avg_ber(1, gbar0, spec.order)?
            } else {
                0.0
            };
            let ok = g_avg_ber(2, gbar0, spec.order)?;
            let err = g_avg_ber(2, spec.power / (sigma_eff + beta_own_sq), spec.order)?;
            let upper = ok * (1.0 - root) + err * root;
            let mut v = vec![upper; n - 1];
            v.push(root);
            v
        }
        DetectorKind::Nc | DetectorKind::Cd => {
            if n > DEFAULT_PATTERN_CAP {
                return Err(Error::PatternExplosion { n, cap: DEFAULT_PATTERN_CAP });
            }
            let root = if kind == DetectorKind::Nc {
                g_avg_ber(1, gbar0, spec.order)?
            } else {
                0.0
            };
            let mut out = vec![0.0; n];
            out[n - 1] = root;
            let mut pattern_probs = vec![1.0 - root, root];
            for layer in (0..n - 1).rev() {
                let z = n - layer; // N - n + 1 in 1-based layer terms
                let mut ber = 0.0;
                let mut next = vec![0.0; pattern_probs.len() * 2];
                for (mask, &prob) in pattern_probs.iter().enumerate() {
                    if prob == 0.0 {
                        continue;
                    }
                    let gbar =
                        spec.power / (sigma_eff + beta_own_sq * mask.count_ones() as f64);
                    let p_err = g_avg_ber(z, gbar, spec.order)?;
                    ber += p_err * prob;
                    next[mask << 1] += prob * (1.0 - p_err);
                    next[(mask << 1) | 1] += prob * p_err;
                }
                out[layer] = ber;
                pattern_probs = next;
            }
            out
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "no averaged closed form for {other:?}; the paper analyzes NC/PNC/CD/PCD"
            )))
        }
    };

    let stream_mean = per_layer.iter().sum::<f64>() / n as f64;
    let as_printed = match kind {
        DetectorKind::Cd | DetectorKind::Pcd => per_layer.iter().sum::<f64>(),
        _ => stream_mean,
    };
    Ok(AvgBer {
        per_layer,
        stream_mean,
        as_printed,
        stream_mean_clamped: stream_mean.min(0.5),
    })
}

/// Chained per-stream theory for an equal-size superposition-coding plan:
/// streams are detected highest-power first; each stream's SIC residual rate
/// is the aggregate BER of the stream decoded before it.
///
/// `powers` follows plan order (stream 1 first, so strictly increasing);
/// `channel` selects Rayleigh averaging or conditional evaluation on fixed
/// diagonals.
pub fn sc_stream_theory(
    kind: DetectorKind,
    layers: usize,
    order: usize,
    powers: &[f64],
    noise_var: f64,
    channel: &TheoryChannel,
) -> Result<Vec<StreamTheory>> {
    let k = powers.len();
    if k == 0 {
        return Err(Error::InvalidArgument("at least one stream required".into()));
    }
    let mut results: Vec<Option<StreamTheory>> = vec![None; k];
    let mut prev: Option<(f64, f64)> = None; // (p_{i+1}, aggregate BER)
    for i in (0..k).rev() {
        let spec = BerSpec {
            layers,
            order,
            power: powers[i],
            noise_var,
            interferer_power: if i > 0 { powers[i - 1] } else { 0.0 },
            interferer_sigma_h: 1.0,
            sic_power: prev.map_or(0.0, |(p, _)| p),
            sic_sigma_h: 1.0,
            sic_residual_ber: prev.map_or(0.0, |(_, b)| b),
        };
        let (per_layer, stream_ber) = match channel {
            TheoryChannel::Rayleigh => {
                let avg = avg_ber_rayleigh(kind, &spec)?;
                (avg.per_layer, avg.stream_mean_clamped)
            }
            TheoryChannel::FixedDiag(diag) => {
                let per_layer = match kind {
                    DetectorKind::Pnc | DetectorKind::Pcd => {
                        let mut v = pnc_conditional_ber(&spec, diag)?;
                        if kind == DetectorKind::Pcd {
                            chase_root_to_zero(&spec, diag, &mut v)?;
                        }
                        v
                    }
                    DetectorKind::Nc | DetectorKind::Cd => {
                        let mut v = nc_conditional_ber(&spec, diag)?;
                        if kind == DetectorKind::Cd {
                            let root_free =
                                nc_conditional_root_free(&spec, diag)?;
                            v = root_free;
                        }
                        v
                    }
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "no conditional closed form for {other:?}"
                        )))
                    }
                };
                let mean = per_layer.iter().sum::<f64>() / per_layer.len() as f64;
                (per_layer, mean.min(0.5))
            }
        };
        prev = Some((powers[i], stream_ber));
        results[i] = Some(StreamTheory { stream: i, per_layer, ber: stream_ber });
    }
    Ok(results.into_iter().map(Option::unwrap).collect())
}

/// Conditional chase variants: exhaustive root search removes root errors.
fn chase_root_to_zero(spec: &BerSpec, diag: &[f64], v: &mut [f64]) -> Result<()> {
    let sigma_eff = spec.effective_noise_var();
    let n = spec.layers;
    for (slot, &r) in v.iter_mut().zip(diag).take(n - 1) {
        *slot = awgn_qam_ber(r * r * spec.power / sigma_eff, spec.order)?;
    }
    v[n - 1] = 0.0;
    Ok(())
}

fn nc_conditional_root_free(spec: &BerSpec, diag: &[f64]) -> Result<Vec<f64>> {
    // NC recursion with the root forced correct (P_N = 0).
    let mut spec_root_free = spec.clone();
    spec_root_free.layers = spec.layers;
    let mut v = nc_root_forced(spec, diag)?;
    v[spec_root_free.layers - 1] = 0.0;
    Ok(v)
}

fn nc_root_forced(spec: &BerSpec, diag: &[f64]) -> Result<Vec<f64>> {
    let n = spec.layers;
    if n > DEFAULT_PATTERN_CAP {
        return Err(Error::PatternExplosion { n, cap: DEFAULT_PATTERN_CAP });
    }
    let sigma_eff = spec.effective_noise_var();
    let beta_own_sq = slicing_error_amplitude(spec.order, spec.power).powi(2);
    let mut out = vec![0.0; n];
    let mut pattern_probs = vec![1.0, 0.0]; // root always correct
    for layer in (0..n - 1).rev() {
        let r = diag[layer];
        let mut ber = 0.0;
        let mut next = vec![0.0; pattern_probs.len() * 2];
        for (mask, &prob) in pattern_probs.iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            let gamma = r * r * spec.power / (sigma_eff + beta_own_sq * mask.count_ones() as f64);
            let p_err = awgn_qam_ber(gamma, spec.order)?;
            ber += p_err * prob;
            next[mask << 1] += prob * (1.0 - p_err);
            next[(mask << 1) | 1] += prob * p_err;
        }
        out[layer] = ber;
        pattern_probs = next;
    }
    Ok(out)
}

/// Channel assumption for [`sc_stream_theory`].
#[derive(Debug, Clone)]
pub enum TheoryChannel {
    /// i.i.d. Rayleigh entries; uses the averaged G-function forms.
    Rayleigh,
    /// Fixed channel; conditional forms on these realized diagonal values.
    FixedDiag(Vec<f64>),
}

/// Theory output for one stream.
#[derive(Debug, Clone)]
pub struct StreamTheory {
    pub stream: usize,
    pub per_layer: Vec<f64>,
    pub ber: f64,
}

// ---------------------------------------------------------------------------
// Complexity model
// ---------------------------------------------------------------------------

/// Real-operation pair used across the complexity model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCount {
    pub rad: u64,
    pub rml: u64,
}

impl PhaseCount {
    pub fn flops(&self) -> u64 {
        self.rad + self.rml
    }
}

/// An epsilon flop polynomial value, kept as exact rationals (epsilon_3 has
/// denominator 3) alongside nearest-integer roundings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Epsilon {
    pub rad_num: i128,
    pub rad_den: i128,
    pub rml_num: i128,
    pub rml_den: i128,
}

impl Epsilon {
    fn integral(rad: i128, rml: i128) -> Self {
        Self { rad_num: rad, rad_den: 1, rml_num: rml, rml_den: 1 }
    }

    pub fn rad_f64(&self) -> f64 {
        self.rad_num as f64 / self.rad_den as f64
    }

    pub fn rml_f64(&self) -> f64 {
        self.rml_num as f64 / self.rml_den as f64
    }

    /// Nearest-integer rounding of the rational values.
    pub fn rounded(&self) -> PhaseCount {
        PhaseCount {
            rad: self.rad_f64().round().max(0.0) as u64,
            rml: self.rml_f64().round().max(0.0) as u64,
        }
    }

    pub fn flops_f64(&self) -> f64 {
        self.rad_f64() + self.rml_f64()
    }
}

/// The printed flop polynomials: `which = 1` is the punctured-product saving
/// per matrix-vector product, `2` the QRD cost, `3` the puncturing cost.
pub fn flops_epsilon(which: u8, n: u64) -> Result<Epsilon> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("epsilon polynomials need N >= 2, got {n}")));
    }
    let n = n as i128;
    Ok(match which {
        1 => Epsilon::integral(n * n - 3 * n + 2, 2 * n * n - 6 * n + 4),
        2 => Epsilon::integral(4 * n * n * n - n * n - n, 4 * n * n * n + 3 * n * n),
        3 => Epsilon {
            rad_num: 2 * (8 * n * n * n - 15 * n * n + 4 * n - 12),
            rad_den: 3,
            rml_num: 16 * n * n * n - 21 * n * n + 8 * n - 60,
            rml_den: 3,
        },
        other => {
            return Err(Error::InvalidArgument(format!("epsilon index {other} not in 1..=3")))
        }
    })
}

/// Complex multiplications of a dense upper-triangular product `R x`.
pub fn triangular_product_cmuls(n: u64) -> u64 {
    n * (n + 1) / 2
}

/// Complex multiplications saved by the punctured product `R̊ x` relative to
/// `R x`: `(N - 2)(N - 1) / 2`.
pub fn punctured_product_saving_cmuls(n: u64) -> u64 {
    (n - 1) * (n - 2) / 2
}

/// Fraction of product-phase multiplications removed by puncturing.
pub fn multiplication_saving_fraction(n: u64) -> f64 {
    punctured_product_saving_cmuls(n) as f64 / triangular_product_cmuls(n) as f64
}

/// Closed-form cost of one PNC back-substitution over `s` layers under the
/// crate's counting convention: the root division is 2 RML; every other
/// layer spends one complex multiply, one complex subtract, and a division.
pub fn pnc_backsub_cost(s: u64) -> PhaseCount {
    PhaseCount { rad: 4 * (s - 1), rml: 6 * s - 4 }
}

/// Closed-form cost of one NC back-substitution over `s` layers.
pub fn nc_backsub_cost(s: u64) -> PhaseCount {
    PhaseCount { rad: 2 * s * (s - 1), rml: 2 * s * s }
}

/// Per-detection-call complexity report: the decomposition and puncturing
/// phases are amortized once per channel and reported from the epsilon cost
/// model; the detection phase carries instrumented counters from an actual
/// call.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub decomposition: PhaseCount,
    pub puncturing: PhaseCount,
    pub detection: PhaseCount,
}

impl ComplexityReport {
    pub fn rad(&self) -> u64 {
        self.decomposition.rad + self.puncturing.rad + self.detection.rad
    }

    pub fn rml(&self) -> u64 {
        self.decomposition.rml + self.puncturing.rml + self.detection.rml
    }

    pub fn flops(&self) -> u64 {
        self.rad() + self.rml()
    }
}

/// One row of the detector savings table.
#[derive(Debug, Clone)]
pub struct SavingsRow {
    pub from: DetectorKind,
    pub to: DetectorKind,
    /// Decomposition cost in flops (epsilon_2, times N for the LORD/SSD row).
    pub qrd_flops: f64,
    /// Puncturing cost in flops (epsilon_3, times N for SSD).
    pub puncturing_flops: f64,
    /// Flops saved over `frames` frames: multiples of epsilon_1.
    pub saving_flops: u64,
}

/// The savings table: puncturing removes `epsilon_1` per product, once per
/// stream for PNC, per root candidate for PCD, and per root candidate and
/// layer ordering for SSD, across `frames` detected frames.
pub fn savings_table(
    frames: u64,
    n_streams: u64,
    n: u64,
    x_order: u64,
) -> Result<Vec<SavingsRow>> {
    let e1 = flops_epsilon(1, n)?;
    let e2 = flops_epsilon(2, n)?;
    let e3 = flops_epsilon(3, n)?;
    let e1_flops = (e1.rad_num + e1.rml_num) as u64; // integral for epsilon_1
    Ok(vec![
        SavingsRow {
            from: DetectorKind::Nc,
            to: DetectorKind::Pnc,
            qrd_flops: e2.flops_f64(),
            puncturing_flops: e3.flops_f64(),
            saving_flops: frames * n_streams * e1_flops,
        },
        SavingsRow {
            from: DetectorKind::Cd,
            to: DetectorKind::Pcd,
            qrd_flops: e2.flops_f64(),
            puncturing_flops: e3.flops_f64(),
            saving_flops: frames * n_streams * x_order * e1_flops,
        },
        SavingsRow {
            from: DetectorKind::Lord,
            to: DetectorKind::Ssd,
            qrd_flops: n as f64 * e2.flops_f64(),
            puncturing_flops: n as f64 * e3.flops_f64(),
            saving_flops: frames * n_streams * n * x_order * e1_flops,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Numerical-integration oracle for Q: Simpson over [x, x + 40].
    fn q_oracle(x: f64) -> f64 {
        let a = x;
        let b = x + 40.0;
        let n = 400_000;
        let h = (b - a) / n as f64;
        let f = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn q_function_basics() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((q_function(1.6449) - 0.05).abs() < 1e-4);
        for &x in &[-2.0, -0.5, 0.3, 1.0, 3.0] {
            assert!((q_function(-x) - (1.0 - q_function(x))).abs() < 1e-14);
        }
    }

    #[test]
    fn q_function_matches_integration_oracle() {
        for &x in &[0.0, 0.5, 1.0, 2.0, 4.0] {
            assert!((q_function(x) - q_oracle(x)).abs() < 1e-12, "x = {x}");
        }
    }

    /// Independent AWGN QAM BER oracle: per-axis decision-region scan using
    /// the constellation module's Gray map.
    fn awgn_ber_oracle(gamma: f64, order: usize) -> f64 {
        use crate::constellation::Constellation;
        let c = Constellation::build_qam(order, 1.0).unwrap();
        let sigma_axis = (1.0 / gamma / 2.0).sqrt(); // per-axis noise std at p = 1
        if order == 2 {
            return q_function(1.0 / sigma_axis);
        }
        let lax = (order as f64).sqrt() as usize;
        let bits_axis = lax.ilog2() as usize;
        // Recover sorted levels and their gray labels from the point table.
        let mut levels: Vec<f64> = Vec::new();
        for &p in c.points() {
            if !levels.iter().any(|&l| (l - p.re).abs() < 1e-12) {
                levels.push(p.re);
            }
        }
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let gray = |i: usize| i ^ (i >> 1);
        let mut bit_errs = 0.0;
        for t in 0..lax {
            for r in 0..lax {
                // Probability of landing in decision region r given level t.
                let lo = if r == 0 {
                    f64::NEG_INFINITY
                } else {
                    (levels[r - 1] + levels[r]) / 2.0
                };
                let hi = if r == lax - 1 {
                    f64::INFINITY
                } else {
                    (levels[r] + levels[r + 1]) / 2.0
                };
                let p_region = q_function((lo - levels[t]) / sigma_axis)
                    - q_function((hi - levels[t]) / sigma_axis);
                bit_errs +=
                    p_region * (gray(t) ^ gray(r)).count_ones() as f64 / bits_axis as f64;
            }
        }
        bit_errs / lax as f64
    }

    #[test]
    fn awgn_ber_known_points() {
        // QPSK exact: Q(sqrt(gamma)).
        for &g in &[0.5, 2.0, 10.0] {
            let got = awgn_qam_ber(g, 4).unwrap();
            assert!((got - q_function(g.sqrt())).abs() < 1e-14, "gamma {g}");
        }
        // BPSK exact: Q(sqrt(2 gamma)).
        assert!((awgn_qam_ber(3.0, 2).unwrap() - q_function(6.0f64.sqrt())).abs() < 1e-15);
        // Zero SNR is a coin flip for every order.
        for &l in &[2usize, 4, 16, 64] {
            assert!((awgn_qam_ber(0.0, l).unwrap() - 0.5).abs() < 1e-12, "L = {l}");
        }
    }

    #[test]
    fn awgn_ber_matches_decision_region_oracle() {
        for &l in &[4usize, 16, 64] {
            for &g in &[0.3, 1.0, 5.0, 20.0, 100.0] {
                let got = awgn_qam_ber(g, l).unwrap();
                let want = awgn_ber_oracle(g, l);
                assert!((got - want).abs() < 1e-12, "L = {l}, gamma = {g}: {got} vs {want}");
            }
        }
    }

    /// Closed-form z-fold MRC BPSK average BER, the classic diversity result,
    /// used as an independent oracle for the quadrature-based G.
    fn mrc_bpsk_oracle(z: usize, gbar: f64) -> f64 {
        let mu = (gbar / (1.0 + gbar)).sqrt();
        let a = 0.5 * (1.0 - mu);
        let b = 0.5 * (1.0 + mu);
        let mut sum = 0.0;
        for k in 0..z {
            let binom = (0..k).fold(1.0, |acc, j| acc * (z + j) as f64 / (j + 1) as f64);
            sum += binom * b.powi(k as i32);
        }
        a.powi(z as i32) * sum
    }

    #[test]
    fn g_matches_mrc_bpsk_closed_form() {
        assert!((g_avg_ber(1, 1.0, 2).unwrap() - 0.146_446_609).abs() < 1e-6);
        for &z in &[1usize, 2, 4] {
            for &g in &[0.2, 1.0, 10.0, 200.0] {
                let got = g_avg_ber(z, g, 2).unwrap();
                let want = mrc_bpsk_oracle(z, g);
                assert!(
                    (got - want).abs() < 1e-9 * want.max(1e-12),
                    "z = {z}, gbar = {g}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn g_zero_snr_and_monotonicity() {
        assert!((g_avg_ber(3, 0.0, 2).unwrap() - 0.5).abs() < 1e-12);
        for &l in &[2usize, 16] {
            let mut last = 0.6;
            for &g in &[0.1, 1.0, 10.0, 100.0, 1000.0] {
                let v = g_avg_ber(2, g, l).unwrap();
                assert!(v < last, "G must decrease in gbar (L = {l})");
                last = v;
            }
        }
        for &g in &[0.5, 5.0, 50.0] {
            let mut last = 1.0;
            for z in 1..=4 {
                let v = g_avg_ber(z, g, 4).unwrap();
                assert!(v <= last + 1e-12, "G must not increase in z");
                last = v;
            }
        }
    }

    #[test]
    fn pattern_set_cardinalities() {
        for k in 0..6 {
            assert_eq!(ErrorPatternSet::qrd(k).len(), 1 << k);
        }
        assert_eq!(ErrorPatternSet::punctured().len(), 2);
    }

    #[test]
    fn pnc_conditional_reduces_to_root_q() {
        // Single layer: nothing above the root.
        let spec = BerSpec::single(1, 2, 1.0, 0.5);
        let out = pnc_conditional_ber(&spec, &[1.3]).unwrap();
        let expect = q_function((2.0_f64 * 1.3 * 1.3 / 0.5).sqrt());
        assert!((out[0] - expect).abs() < 1e-14);
        // NC at N = 1 is the same single term.
        let nc = nc_conditional_ber(&spec, &[1.3]).unwrap();
        assert!((nc[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn nc_all_correct_term_dominates_at_high_snr() {
        let spec = BerSpec::single(3, 2, 1.0, 1e-3);
        let diag = [1.0, 1.2, 2.0];
        let out = nc_conditional_ber(&spec, &diag).unwrap();
        for (&r, &got) in diag.iter().zip(&out) {
            let plain = q_function((2.0 * r * r / 1e-3).sqrt());
            assert!((got - plain).abs() <= 1e-12 + plain * 1e-6, "layer r = {r}");
        }
    }

    #[test]
    fn conditional_limit_half_at_infinite_noise() {
        let spec = BerSpec::single(3, 2, 1.0, 1e18);
        let out = pnc_conditional_ber(&spec, &[1.0, 1.0, 1.0]).unwrap();
        for p in out {
            assert!((p - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn nc_pattern_cap() {
        let spec = BerSpec::single(13, 2, 1.0, 1.0);
        let diag = vec![1.0; 13];
        assert!(matches!(
            nc_conditional_ber(&spec, &diag),
            Err(Error::PatternExplosion { n: 13, cap: 12 })
        ));
    }

    #[test]
    fn pcd_printed_form_at_n2() {
        let spec = BerSpec::single(2, 4, 1.0, 0.25);
        let avg = avg_ber_rayleigh(DetectorKind::Pcd, &spec).unwrap();
        let g = g_avg_ber(2, 1.0 / 0.25, 4).unwrap();
        assert!((avg.as_printed - g).abs() < 1e-12, "(N-1) G at N = 2 is just G");
        assert_eq!(avg.per_layer[1], 0.0, "chase root is exhaustive");
    }

    #[test]
    fn pnc_average_mixture_form() {
        // With no interference and no SIC residual the printed PNC average at
        // a layer below the root is G(2,.)(1 - P_N) + G(2, inflated) P_N.
        let spec = BerSpec::single(4, 2, 2.0, 0.5);
        let avg = avg_ber_rayleigh(DetectorKind::Pnc, &spec).unwrap();
        let root = g_avg_ber(1, 4.0, 2).unwrap();
        let beta_sq = 4.0 * 2.0;
        let expect = g_avg_ber(2, 4.0, 2).unwrap() * (1.0 - root)
            + g_avg_ber(2, 2.0 / (0.5 + beta_sq), 2).unwrap() * root;
        assert!((avg.per_layer[0] - expect).abs() < 1e-12);
        assert!((avg.per_layer[3] - root).abs() < 1e-12);
    }

    #[test]
    fn averaged_ber_monotone_in_snr() {
        for kind in [DetectorKind::Nc, DetectorKind::Pnc, DetectorKind::Cd, DetectorKind::Pcd] {
            let mut last = 1.0;
            for &sigma2 in &[4.0, 1.0, 0.25, 0.05, 0.01] {
                let spec = BerSpec::single(4, 4, 1.0, sigma2);
                let avg = avg_ber_rayleigh(kind, &spec).unwrap();
                assert!(
                    avg.stream_mean <= last + 1e-12,
                    "{kind:?} not monotone at sigma2 = {sigma2}"
                );
                assert!(avg.stream_mean >= 0.0 && avg.stream_mean <= 1.0);
                assert!(avg.stream_mean_clamped <= 0.5);
                last = avg.stream_mean;
            }
        }
    }

    #[test]
    fn epsilon_hand_values() {
        let e1 = flops_epsilon(1, 4).unwrap();
        assert_eq!((e1.rad_num, e1.rml_num), (6, 12));
        let e2 = flops_epsilon(2, 2).unwrap();
        assert_eq!((e2.rad_num, e2.rml_num), (26, 44));
        let e3 = flops_epsilon(3, 4).unwrap();
        // (2/3)(512 - 240 + 16 - 12) = 184, (1024 - 336 + 32 - 60)/3 = 220.
        assert_eq!((e3.rad_num, e3.rad_den), (552, 3));
        assert!((e3.rad_f64() - 184.0).abs() < 1e-12);
        assert_eq!((e3.rml_num, e3.rml_den), (660, 3));
        assert!((e3.rml_f64() - 220.0).abs() < 1e-12);
        assert!(flops_epsilon(1, 1).is_err());
        assert!(flops_epsilon(4, 8).is_err());
    }

    #[test]
    fn multiplication_saving_fractions() {
        assert_eq!(punctured_product_saving_cmuls(16), 105);
        assert_eq!(triangular_product_cmuls(16), 136);
        assert!((multiplication_saving_fraction(16) - 105.0 / 136.0).abs() < 1e-15);
        assert!((multiplication_saving_fraction(16) - 0.772).abs() < 1e-3);
        assert_eq!(punctured_product_saving_cmuls(32), 465);
        assert_eq!(triangular_product_cmuls(32), 528);
        assert!((multiplication_saving_fraction(32) - 0.8807).abs() < 1e-4);
    }

    #[test]
    fn savings_table_rows() {
        let rows = savings_table(1, 1, 8, 16).unwrap();
        let e1 = flops_epsilon(1, 8).unwrap();
        let e1_flops = (e1.rad_num + e1.rml_num) as u64;
        assert_eq!(rows[0].saving_flops, e1_flops, "PNC saving at J = |S| = 1 is epsilon_1");
        assert_eq!(rows[1].saving_flops, 16 * e1_flops);
        assert_eq!(rows[2].saving_flops, 8 * 16 * e1_flops, "SSD saves N |X| times PNC");
        // J = 100, |S| = 3, N = 16, |X| = 16.
        let rows = savings_table(100, 3, 16, 16).unwrap();
        let e1_16 = flops_epsilon(1, 16).unwrap();
        assert_eq!(
            rows[2].saving_flops,
            100 * 3 * 16 * 16 * (e1_16.rad_num + e1_16.rml_num) as u64
        );
    }

    #[test]
    fn sc_theory_chains_sic_residual() {
        let out = sc_stream_theory(
            DetectorKind::Pnc,
            2,
            2,
            &[1.0, 100.0],
            0.5,
            &TheoryChannel::Rayleigh,
        )
        .unwrap();
        assert_eq!(out.len(), 2);
        // Stream 2 (highest power, detected first) sees interference from
        // stream 1 but no SIC residual.
        let spec2 = BerSpec {
            layers: 2,
            order: 2,
            power: 100.0,
            noise_var: 0.5,
            interferer_power: 1.0,
            interferer_sigma_h: 1.0,
            sic_power: 0.0,
            sic_sigma_h: 1.0,
            sic_residual_ber: 0.0,
        };
        let direct = avg_ber_rayleigh(DetectorKind::Pnc, &spec2).unwrap();
        assert!((out[1].ber - direct.stream_mean_clamped).abs() < 1e-12);
    }
}
