//! Scaled square-QAM constellations with per-axis reflected Gray mapping,
//! plus modulation, nearest-point slicing, and bit demapping.
//!
//! The base constellation has unit average symbol energy (amplitude levels
//! `{±1, ±3, ...}` normalized by `sqrt(2(L-1)/3)`, or `{-1, +1}` for BPSK)
//! and is scaled by `sqrt(p)`, so `p` is exactly the per-symbol power of the
//! stream carrying it.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Supported modulation orders.
pub const SUPPORTED_ORDERS: [usize; 4] = [2, 4, 16, 64];

/// A scaled Gray-mapped QAM constellation.
///
/// Symbols are addressed by *label*: the integer whose bits (MSB first) are
/// the bits the symbol carries. For square QAM the high half of the label
/// Gray-codes the in-phase level and the low half the quadrature level, so
/// nearest neighbors along either axis differ in exactly one bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constellation {
    order: usize,
    power: f64,
    bits_per_symbol: usize,
    /// Scaled amplitude levels per axis, ascending. BPSK uses the real axis only.
    levels: Vec<f64>,
    /// Point for each label, `points[label]`.
    points: Vec<C64>,
}

/// Reflected Gray code of an index.
#[inline]
fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl Constellation {
    /// Build a scaled L-QAM constellation with average symbol energy `p`.
    pub fn build_qam(order: usize, power: f64) -> Result<Self> {
        if !SUPPORTED_ORDERS.contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "constellation power must be positive, got {power}"
            )));
        }
        let amp = power.sqrt();
        if order == 2 {
            return Ok(Self {
                order,
                power,
                bits_per_symbol: 1,
                levels: vec![-amp, amp],
                points: vec![C64::new(-amp, 0.0), C64::new(amp, 0.0)],
            });
        }

        let bits_per_symbol = order.ilog2() as usize;
        let half_bits = bits_per_symbol / 2;
        let lax = 1usize << half_bits; // levels per axis
        let norm = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let scale = amp / norm;
        let levels: Vec<f64> =
            (0..lax).map(|k| scale * (2.0 * k as f64 - (lax as f64 - 1.0))).collect();

        let mut points = vec![C64::ZERO; order];
        for i_idx in 0..lax {
            for q_idx in 0..lax {
                let label = (gray(i_idx) << half_bits) | gray(q_idx);
                points[label] = C64::new(levels[i_idx], levels[q_idx]);
            }
        }
        Ok(Self { order, power, bits_per_symbol, levels, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Point carried by a label.
    #[inline]
    pub fn point(&self, label: usize) -> C64 {
        self.points[label]
    }

    /// All points, indexed by label.
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// Nearest level index with the documented tie-break toward the larger
    /// level (half-up rounding on the level grid).
    #[inline]
    fn quantize_axis(&self, x: f64) -> usize {
        let lax = self.levels.len();
        let step = if lax > 1 { self.levels[1] - self.levels[0] } else { 1.0 };
        let t = (x - self.levels[0]) / step;
        ((t + 0.5).floor() as i64).clamp(0, lax as i64 - 1) as usize
    }

    /// Nearest-point slicing: `argmin_x |v - x|` over the constellation, with
    /// ties broken toward the candidate with larger real part, then larger
    /// imaginary part. Returns the label.
    #[inline]
    pub fn slice(&self, v: C64) -> usize {
        let half_bits = self.bits_per_symbol / 2;
        if self.order == 2 {
            return usize::from(v.re >= 0.0);
        }
        let i_idx = self.quantize_axis(v.re);
        let q_idx = self.quantize_axis(v.im);
        (gray(i_idx) << half_bits) | gray(q_idx)
    }

    /// Map a bit string (values 0/1, MSB-first per symbol) to symbol labels.
    pub fn modulate(&self, bits: &[u8]) -> Result<SymbolVector> {
        let b = self.bits_per_symbol;
        if bits.len() % b != 0 {
            return Err(Error::LengthMismatch(format!(
                "{} bits not divisible by {b} bits/symbol",
                bits.len()
            )));
        }
        let labels: Vec<usize> = bits
            .chunks(b)
            .map(|chunk| chunk.iter().fold(0usize, |acc, &bit| (acc << 1) | bit as usize))
            .collect();
        Ok(SymbolVector::from_labels(self, labels))
    }

    /// Recover the bit string from symbol labels.
    pub fn demap(&self, sv: &SymbolVector) -> Vec<u8> {
        let b = self.bits_per_symbol;
        let mut bits = Vec::with_capacity(sv.labels.len() * b);
        for &label in &sv.labels {
            for k in (0..b).rev() {
                bits.push(((label >> k) & 1) as u8);
            }
        }
        bits
    }
}

/// A vector of constellation symbols, carrying both the labels and the
/// complex points they map to. Every entry is a member of the source
/// constellation by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector {
    pub labels: Vec<usize>,
    pub points: Vec<C64>,
}

impl SymbolVector {
    pub fn from_labels(c: &Constellation, labels: Vec<usize>) -> Self {
        let points = labels.iter().map(|&l| c.point(l)).collect();
        Self { labels, points }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent nearest-point oracle: exhaustive distance scan with the
    /// documented tie-break.
    fn slice_oracle(c: &Constellation, v: C64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (label, &x) in c.points().iter().enumerate() {
            let d = (v - x).norm_sqr();
            let better = d < best_d
                || (d == best_d
                    && (x.re > c.point(best).re
                        || (x.re == c.point(best).re && x.im > c.point(best).im)));
            if better {
                best = label;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn bpsk_points() {
        let c = Constellation::build_qam(2, 1.0).unwrap();
        let mut pts: Vec<f64> = c.points().iter().map(|z| z.re).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![-1.0, 1.0]);
        assert!(c.points().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn qpsk_points_at_power_two() {
        let c = Constellation::build_qam(4, 2.0).unwrap();
        for &p in c.points() {
            assert!((p.re.abs() - 1.0).abs() < 1e-12);
            assert!((p.im.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qam16_levels_and_mean_energy() {
        let c = Constellation::build_qam(16, 1.0).unwrap();
        let s = 10.0f64.sqrt();
        let mut lv = c.levels.clone();
        lv.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in lv.iter().zip([-3.0 / s, -1.0 / s, 1.0 / s, 3.0 / s]) {
            assert!((got - want).abs() < 1e-12);
        }
        // Mean |x|^2 by enumeration.
        let mean: f64 = c.points().iter().map(|z| z.norm_sqr()).sum::<f64>() / 16.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_normalization_all_orders() {
        for &order in &SUPPORTED_ORDERS {
            for &p in &[0.01, 1.0, 7.5, 1000.0] {
                let c = Constellation::build_qam(order, p).unwrap();
                let mean: f64 =
                    c.points().iter().map(|z| z.norm_sqr()).sum::<f64>() / order as f64;
                assert!((mean - p).abs() <= 1e-12 * p, "L={order} p={p} mean={mean}");
            }
        }
    }

    #[test]
    fn unsupported_order_rejected() {
        assert!(matches!(Constellation::build_qam(8, 1.0), Err(Error::UnsupportedOrder(8))));
        assert!(matches!(Constellation::build_qam(32, 1.0), Err(Error::UnsupportedOrder(32))));
    }

    #[test]
    fn slice_nearest_quadrant() {
        let c = Constellation::build_qam(4, 2.0).unwrap();
        let got = c.point(c.slice(C64::new(1.2, 0.9)));
        assert!((got - C64::new(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn slice_tie_break_bpsk() {
        let c = Constellation::build_qam(2, 1.0).unwrap();
        assert_eq!(c.point(c.slice(C64::ZERO)), C64::new(1.0, 0.0));
    }

    #[test]
    fn slice_tie_break_qam_midpoints() {
        let c = Constellation::build_qam(16, 1.0).unwrap();
        // Exactly between levels 1/sqrt(10) and 3/sqrt(10): choose the larger.
        let mid = 2.0 / 10.0f64.sqrt();
        let got = c.point(c.slice(C64::new(mid, -mid)));
        assert!((got.re - 3.0 / 10.0f64.sqrt()).abs() < 1e-12);
        assert!((got.im + 1.0 / 10.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.slice(C64::new(mid, -mid)), slice_oracle(&c, C64::new(mid, -mid)));
    }

    #[test]
    fn slice_matches_oracle_16qam() {
        let c = Constellation::build_qam(16, 1.0).unwrap();
        let v = C64::new(0.1, -0.8);
        assert_eq!(c.slice(v), slice_oracle(&c, v));
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..2000 {
            let v = C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            assert_eq!(c.slice(v), slice_oracle(&c, v), "v = {v}");
        }
    }

    #[test]
    fn slicing_is_idempotent_on_members() {
        for &order in &SUPPORTED_ORDERS {
            let c = Constellation::build_qam(order, 3.0).unwrap();
            for label in 0..order {
                assert_eq!(c.slice(c.point(label)), label);
            }
        }
    }

    #[test]
    fn roundtrip_all_labels() {
        for &order in &[4usize, 16] {
            let c = Constellation::build_qam(order, 1.0).unwrap();
            let b = c.bits_per_symbol();
            for label in 0..order {
                let bits: Vec<u8> = (0..b).rev().map(|k| ((label >> k) & 1) as u8).collect();
                let sv = c.modulate(&bits).unwrap();
                assert_eq!(sv.labels, vec![label]);
                assert_eq!(c.demap(&sv), bits);
            }
        }
    }

    #[test]
    fn modulate_rejects_ragged_bits() {
        let c = Constellation::build_qam(4, 1.0).unwrap();
        assert!(matches!(c.modulate(&[1, 0, 1]), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        for &order in &[4usize, 16, 64] {
            let c = Constellation::build_qam(order, 1.0).unwrap();
            let step = c.levels[1] - c.levels[0];
            for (a, &pa) in c.points().iter().enumerate() {
                for (b, &pb) in c.points().iter().enumerate() {
                    let dx = (pa - pb).norm();
                    // Axis-adjacent pair: exactly one grid step apart.
                    if a < b && (dx - step).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "labels {a} and {b}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn modulate_demap_roundtrip(bits in proptest::collection::vec(0u8..2, 0..96)) {
            for &order in &SUPPORTED_ORDERS {
                let c = Constellation::build_qam(order, 2.5).unwrap();
                let b = c.bits_per_symbol();
                let take = bits.len() - bits.len() % b;
                let sv = c.modulate(&bits[..take]).unwrap();
                prop_assert_eq!(c.demap(&sv), &bits[..take]);
            }
        }
    }
}
