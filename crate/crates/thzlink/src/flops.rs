//! Instrumented complex arithmetic for the complexity model.
//!
//! Counting convention (real operations):
//!
//! * complex x complex multiply: 4 RML + 2 RAD
//! * complex add/subtract: 2 RAD
//! * complex x real multiply (or divide by a real): 2 RML
//! * squared magnitude |z|^2: 2 RML + 1 RAD
//!
//! Counted kernels skip entries that are exactly zero, so punctured and
//! diagonal matrices are charged only for their structural nonzeros.
//! Slicing is a quantization, not arithmetic, and is never counted.

use num_complex::Complex64 as C64;

use crate::linalg::ComplexMatrix;

/// Receiver for operation counts. Detection kernels are generic over this so
/// the uncounted path compiles to nothing.
pub trait FlopSink {
    #[inline]
    fn cmul(&mut self) {}
    #[inline]
    fn cadd(&mut self) {}
    #[inline]
    fn rml(&mut self, _n: u64) {}
    #[inline]
    fn rad(&mut self, _n: u64) {}
}

/// Zero-cost sink for production detection calls.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCount;

impl FlopSink for NoCount {}

/// Accumulating counter. Complex operations contribute to both the complex
/// tallies and the derived real-operation tallies.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FlopCounter {
    /// Complex multiplications.
    pub cmul: u64,
    /// Complex additions/subtractions.
    pub cadd: u64,
    /// Real multiplications, including those inside complex ops.
    pub rml: u64,
    /// Real additions, including those inside complex ops.
    pub rad: u64,
}

impl FlopSink for FlopCounter {
    #[inline]
    fn cmul(&mut self) {
        self.cmul += 1;
        self.rml += 4;
        self.rad += 2;
    }
    #[inline]
    fn cadd(&mut self) {
        self.cadd += 1;
        self.rad += 2;
    }
    #[inline]
    fn rml(&mut self, n: u64) {
        self.rml += n;
    }
    #[inline]
    fn rad(&mut self, n: u64) {
        self.rad += n;
    }
}

impl FlopCounter {
    pub fn flops(&self) -> u64 {
        self.rml + self.rad
    }
}

/// Counted matrix-vector product. Entries that are exactly zero (structural
/// zeros of punctured or diagonal matrices) cost nothing.
pub fn counted_matvec<S: FlopSink>(a: &ComplexMatrix, x: &[C64], sink: &mut S) -> Vec<C64> {
    assert_eq!(a.cols(), x.len());
    let mut out = vec![C64::ZERO; a.rows()];
    for i in 0..a.rows() {
        let mut acc = C64::ZERO;
        let mut terms = 0u64;
        for j in 0..a.cols() {
            let e = a[(i, j)];
            if e == C64::ZERO {
                continue;
            }
            sink.cmul();
            let prod = e * x[j];
            if terms > 0 {
                sink.cadd();
            }
            acc += prod;
            terms += 1;
        }
        out[i] = acc;
    }
    out
}

/// Counted `M* y` (conjugate-transpose matrix-vector product), used for the
/// nulling step `Q* y` or `W* y`.
pub fn counted_nulling<S: FlopSink>(m: &ComplexMatrix, y: &[C64], sink: &mut S) -> Vec<C64> {
    assert_eq!(m.rows(), y.len());
    let mut out = vec![C64::ZERO; m.cols()];
    for j in 0..m.cols() {
        let mut acc = C64::ZERO;
        for i in 0..m.rows() {
            sink.cmul();
            if i > 0 {
                sink.cadd();
            }
            acc += m[(i, j)].conj() * y[i];
        }
        out[j] = acc;
    }
    out
}

/// Counted squared residual `||y - v||^2`.
pub fn counted_residual_norm_sqr<S: FlopSink>(y: &[C64], v: &[C64], sink: &mut S) -> f64 {
    assert_eq!(y.len(), v.len());
    let mut acc = 0.0;
    for (a, b) in y.iter().zip(v) {
        sink.cadd(); // subtraction
        sink.rml(2); // |z|^2
        sink.rad(1);
        acc += (a - b).norm_sqr();
    }
    if y.len() > 1 {
        sink.rad(y.len() as u64 - 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{qr_decompose, wr_decompose};
    use rand::SeedableRng;

    fn random_square(n: usize, seed: u64) -> ComplexMatrix {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    #[test]
    fn diagonal_product_counts_n_cmuls() {
        let n = 6;
        let d = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(1.5 + i as f64, 0.0)
            } else {
                C64::ZERO
            }
        });
        let x = vec![C64::new(1.0, -1.0); n];
        let mut c = FlopCounter::default();
        counted_matvec(&d, &x, &mut c);
        assert_eq!(c.cmul, n as u64);
        assert_eq!(c.cadd, 0);
    }

    #[test]
    fn punctured_product_saves_printed_multiplications() {
        // R x vs punctured R x at N = 16: the complex-multiplication count
        // difference is (N - 2)(N - 1) / 2 = 105, out of N (N + 1) / 2 = 136.
        let n = 16;
        let h = random_square(n, 1);
        let r = qr_decompose(&h).unwrap().r;
        let rp = wr_decompose(&h).unwrap().rp;
        let x = vec![C64::new(1.0, 1.0); n];

        let mut cr = FlopCounter::default();
        counted_matvec(&r, &x, &mut cr);
        let mut cp = FlopCounter::default();
        counted_matvec(&rp, &x, &mut cp);

        assert_eq!(cr.cmul, (n * (n + 1) / 2) as u64);
        assert_eq!(cp.cmul, (2 * n - 1) as u64);
        assert_eq!(cr.cmul - cp.cmul, 105);
    }

    #[test]
    fn nulling_counts_full_products() {
        let m = random_square(4, 2);
        let y = vec![C64::ONE; 4];
        let mut c = FlopCounter::default();
        let out = counted_nulling(&m, &y, &mut c);
        assert_eq!(c.cmul, 16);
        assert_eq!(c.cadd, 12);
        let expect = m.hermitian().mul_vec(&y);
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn counter_real_op_bookkeeping() {
        let mut c = FlopCounter::default();
        c.cmul();
        c.cadd();
        c.rml(2);
        assert_eq!(c.rml, 6);
        assert_eq!(c.rad, 4);
        assert_eq!(c.flops(), 10);
    }
}
