//! Dense complex linear algebra and the two channel decompositions every
//! detector in this crate is built on.
//!
//! Two factorizations are provided:
//!
//! * [`qr_decompose`]: `H = Q R` with orthonormal `Q` and upper-triangular `R`
//!   whose diagonal is real and positive, computed with Householder
//!   reflections and a final diagonal phase correction.
//! * [`wr_decompose`]: the punctured variant `W* H = R̊`, where `R̊` keeps only
//!   the diagonal and the last column nonzero. Column `u < N` of `W` is the
//!   unit-norm vector in the column space of `H` orthogonal to every column
//!   of `H` except columns `u` and `N`; column `N` of `W` is the last column
//!   of `Q`. With unit-norm columns, every element of the transformed noise
//!   `W* n` keeps variance sigma^2 (noise coloring across rows is accepted).
//!
//! All operations are pure functions of their inputs and safe to call from
//! concurrent workers.

use num_complex::Complex64;

use crate::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Relative rank tolerance applied to decomposition pivots, scaled by the
/// Frobenius norm of the input. Untuned THz LoS channels are near-singular;
/// detection must fail loudly rather than return garbage.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::ZERO; rows * cols] }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::ONE;
        }
        m
    }

    /// Build from a closure over `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from nested row slices; all rows must share one length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        Self { rows: nrows, cols: ncols, data: rows.concat() }
    }

    /// Square matrix with the given diagonal.
    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    /// Plain transpose.
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "inner dimensions must agree");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Copy of column `j`.
    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Overwrite column `j`.
    pub fn set_col(&mut self, j: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for (i, x) in v.iter().enumerate() {
            self[(i, j)] = *x;
        }
    }

    /// Matrix with the listed columns of `self`, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |r, c| self[(r, idx[c])])
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Entry-wise difference `self - rhs`.
    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Multiply every entry by a scalar.
    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Squared L2 norm of a complex vector.
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Inner product `a* b` (conjugating the first argument).
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Result of [`qr_decompose`]: `H = Q R` with `Q* Q = I` and upper-triangular
/// `R` whose diagonal entries are real and positive.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: ComplexMatrix,
    pub r: ComplexMatrix,
}

/// Result of [`wr_decompose`]: `W* H = R̊` with unit-norm `W` columns and
/// `R̊` nonzero only on the diagonal (real, positive) and in the last column.
#[derive(Debug, Clone)]
pub struct WrFactors {
    pub w: ComplexMatrix,
    pub rp: ComplexMatrix,
}

/// Thin QR decomposition of an `M x N` matrix (`M >= N >= 1`) by Householder
/// reflections, with a final diagonal phase correction forcing a real,
/// positive diagonal on `R`.
pub fn qr_decompose(h: &ComplexMatrix) -> Result<QrFactors> {
    qr_decompose_with_tol(h, DEFAULT_RANK_TOL)
}

/// [`qr_decompose`] with an explicit relative rank tolerance: the
/// decomposition fails with [`Error::RankDeficient`] when any diagonal pivot
/// falls below `rel_tol * ||H||_F`.
pub fn qr_decompose_with_tol(h: &ComplexMatrix, rel_tol: f64) -> Result<QrFactors> {
    let (m, n) = (h.rows(), h.cols());
    if m < n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "qr_decompose requires M >= N >= 1, got {m} x {n}"
        )));
    }
    let tol_abs = rel_tol * h.fro_norm();

    let mut a = h.clone();
    // Householder vectors, one per column, each of length m - k.
    let mut reflectors: Vec<Vec<C64>> = Vec::with_capacity(n);

    for k in 0..n {
        let x0 = a[(k, k)];
        let col_norm = (k..m).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        // alpha = -e^{j arg(x0)} ||x|| avoids cancellation in v[0].
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::ONE };
        let alpha = -phase * col_norm;

        let mut v: Vec<C64> = (k..m).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm_sqr = norm_sqr(&v);

        if vnorm_sqr > 0.0 {
            // A := (I - 2 v v*/v*v) A on the trailing block.
            for j in k..n {
                let s: C64 =
                    v.iter().enumerate().map(|(i, vi)| vi.conj() * a[(k + i, j)]).sum();
                let coeff = s * (2.0 / vnorm_sqr);
                for (i, vi) in v.iter().enumerate() {
                    a[(k + i, j)] -= coeff * vi;
                }
            }
        }
        a[(k, k)] = alpha;
        for i in k + 1..m {
            a[(i, k)] = C64::ZERO;
        }
        reflectors.push(v);
    }

    // Thin Q: apply reflectors in reverse order to the first n columns of I.
    let mut q = ComplexMatrix::from_fn(m, n, |r, c| {
        if r == c {
            C64::ONE
        } else {
            C64::ZERO
        }
    });
    for k in (0..n).rev() {
        let v = &reflectors[k];
        let vnorm_sqr = norm_sqr(v);
        if vnorm_sqr == 0.0 {
            continue;
        }
        for j in 0..n {
            let s: C64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * q[(k + i, j)]).sum();
            let coeff = s * (2.0 / vnorm_sqr);
            for (i, vi) in v.iter().enumerate() {
                q[(k + i, j)] -= coeff * vi;
            }
        }
    }

    // Diagonal phase correction: r_kk <- |r_kk| > 0, compensated in Q.
    let mut r = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r[(i, j)] = a[(i, j)];
        }
    }
    for k in 0..n {
        let d = r[(k, k)];
        let mag = d.norm();
        if mag < tol_abs || mag == 0.0 {
            return Err(Error::RankDeficient(format!(
                "QR pivot {k} has magnitude {mag:.3e} below tolerance {tol_abs:.3e}"
            )));
        }
        let ph = d / mag;
        for j in k..n {
            r[(k, j)] *= ph.conj();
        }
        r[(k, k)] = C64::new(mag, 0.0);
        for i in 0..m {
            q[(i, k)] *= ph;
        }
    }

    Ok(QrFactors { q, r })
}

/// Punctured WR decomposition of an `M x N` matrix (`M >= N >= 1`).
///
/// For `N <= 2` there are no entries to puncture and the result coincides
/// exactly with [`qr_decompose`] (same algorithm path). Otherwise each column
/// `u < N` of `W` is the normalized residual of `h_u` after projecting out
/// the span of all other columns except `h_N`; the residual norm becomes the
/// (real, positive) diagonal entry of `R̊`.
pub fn wr_decompose(h: &ComplexMatrix) -> Result<WrFactors> {
    wr_decompose_with_tol(h, DEFAULT_RANK_TOL)
}

/// [`wr_decompose`] with an explicit relative rank tolerance.
pub fn wr_decompose_with_tol(h: &ComplexMatrix, rel_tol: f64) -> Result<WrFactors> {
    let (m, n) = (h.rows(), h.cols());
    let qr = qr_decompose_with_tol(h, rel_tol)?;
    if n <= 2 {
        return Ok(WrFactors { w: qr.q, rp: qr.r });
    }
    let tol_abs = rel_tol * h.fro_norm();

    let mut w = ComplexMatrix::zeros(m, n);
    let mut rp = ComplexMatrix::zeros(n, n);
    let h_last = h.col(n - 1);

    for u in 0..n - 1 {
        let keep: Vec<usize> = (0..n).filter(|&v| v != u && v != n - 1).collect();
        let others = h.select_cols(&keep);
        // A rank-deficient nulling basis means H itself is rank deficient.
        let basis = qr_decompose_with_tol(&others, rel_tol)?.q;

        let h_u = h.col(u);
        let coeffs: Vec<C64> = (0..basis.cols()).map(|j| inner(&basis.col(j), &h_u)).collect();
        let mut resid = h_u.clone();
        for (j, c) in coeffs.iter().enumerate() {
            for i in 0..m {
                resid[i] -= c * basis[(i, j)];
            }
        }
        let norm = norm_sqr(&resid).sqrt();
        if norm < tol_abs {
            return Err(Error::RankDeficient(format!(
                "nulling projection for column {u} has norm {norm:.3e} below tolerance {tol_abs:.3e}"
            )));
        }
        let w_u: Vec<C64> = resid.iter().map(|z| z / norm).collect();
        // w_u* h_u = ||resid|| is real and positive by construction.
        rp[(u, u)] = C64::new(norm, 0.0);
        rp[(u, n - 1)] = inner(&w_u, &h_last);
        w.set_col(u, &w_u);
    }

    // Root column: W's last column is the last column of Q.
    w.set_col(n - 1, &qr.q.col(n - 1));
    rp[(n - 1, n - 1)] = qr.r[(n - 1, n - 1)];

    Ok(WrFactors { w, rp })
}

/// Bottom-right `S x S` submatrix of a square (punctured) upper-triangular
/// matrix; preserves the triangular structure.
pub fn trailing_submatrix(r: &ComplexMatrix, s: usize) -> Result<ComplexMatrix> {
    let n = r.cols();
    if r.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "trailing_submatrix expects a square matrix, got {} x {n}",
            r.rows()
        )));
    }
    if s == 0 || s > n {
        return Err(Error::OutOfRange(format!("S = {s} outside 1..={n}")));
    }
    let off = n - s;
    Ok(ComplexMatrix::from_fn(s, s, |i, j| r[(off + i, off + j)]))
}

/// Singular values in descending order, via cyclic Jacobi iteration on the
/// Hermitian Gram matrix `H* H`. Intended for the small, dense matrices this
/// crate works with.
pub fn singular_values(h: &ComplexMatrix) -> Vec<f64> {
    let mut g = h.hermitian().mul(h);
    let n = g.cols();
    if n == 0 {
        return Vec::new();
    }
    let scale = g.fro_norm().max(f64::MIN_POSITIVE);
    let eps = 1e-30 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += g[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < eps {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = g[(p, q)];
                let b = apq.norm();
                if b <= eps / (n as f64) {
                    continue;
                }
                let app = g[(p, p)].re;
                let aqq = g[(q, q)].re;
                let tau = (aqq - app) / (2.0 * b);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let ph = apq / b;

                // Unitary rotation on columns p, q and rows p, q.
                for i in 0..n {
                    let gip = g[(i, p)];
                    let giq = g[(i, q)];
                    g[(i, p)] = gip * c + giq * s * ph.conj();
                    g[(i, q)] = -gip * s * ph + giq * c;
                }
                for j in 0..n {
                    let gpj = g[(p, j)];
                    let gqj = g[(q, j)];
                    g[(p, j)] = gpj * c + gqj * s * ph;
                    g[(q, j)] = -gpj * s * ph.conj() + gqj * c;
                }
            }
        }
    }

    let mut sv: Vec<f64> = (0..n).map(|i| g[(i, i)].re.max(0.0).sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Ratio of largest to smallest singular value (`f64::INFINITY` when the
/// smallest vanishes).
pub fn condition_number(h: &ComplexMatrix) -> f64 {
    let sv = singular_values(h);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(m: usize, n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        use rand_distr::StandardNormal;
        ComplexMatrix::from_fn(m, n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                * std::f64::consts::FRAC_1_SQRT_2
        })
    }

    fn assert_qr_invariants(h: &ComplexMatrix, f: &QrFactors) {
        let n = h.cols();
        let qhq = f.q.hermitian().mul(&f.q);
        let ortho = qhq.sub(&ComplexMatrix::identity(n)).fro_norm();
        assert!(ortho <= 1e-10 * n as f64, "orthonormality defect {ortho:.3e}");
        let recon = f.q.mul(&f.r).sub(h).fro_norm();
        assert!(recon <= 1e-10 * h.fro_norm(), "reconstruction defect {recon:.3e}");
        for i in 0..n {
            let d = f.r[(i, i)];
            assert!(d.re > 0.0 && d.im.abs() <= 1e-12);
            for j in 0..i {
                assert_eq!(f.r[(i, j)], C64::ZERO, "below-diagonal entry not zero");
            }
        }
    }

    fn assert_wr_invariants(h: &ComplexMatrix, f: &WrFactors) {
        let n = h.cols();
        let wh = f.w.hermitian().mul(h);
        let defect = wh.sub(&f.rp).fro_norm();
        assert!(defect <= 1e-9 * h.fro_norm(), "W*H - Rp defect {defect:.3e}");
        for u in 0..n {
            let col_norm = norm_sqr(&f.w.col(u)).sqrt();
            assert!((col_norm - 1.0).abs() <= 1e-12, "W column {u} norm {col_norm}");
            let d = f.rp[(u, u)];
            assert!(d.re > 0.0 && d.im == 0.0);
            for v in 0..n {
                if v != u && v + 1 != n {
                    assert_eq!(f.rp[(u, v)], C64::ZERO);
                    assert!(wh[(u, v)].norm() <= 1e-10, "puncture leak at ({u},{v})");
                }
            }
        }
    }

    #[test]
    fn qr_identity_is_exact() {
        let h = ComplexMatrix::identity(4);
        let f = qr_decompose(&h).unwrap();
        assert_eq!(f.q, ComplexMatrix::identity(4));
        assert_eq!(f.r, ComplexMatrix::identity(4));
    }

    #[test]
    fn qr_column_permutation() {
        let h = ComplexMatrix::from_rows(&[
            vec![C64::ZERO, C64::ONE],
            vec![C64::ONE, C64::ZERO],
        ]);
        let f = qr_decompose(&h).unwrap();
        let recon = f.q.mul(&f.r).sub(&h).fro_norm();
        assert!(recon < 1e-14);
        // Positive-diagonal QR of a permutation is the permutation itself.
        assert!((f.q[(0, 1)] - C64::ONE).norm() < 1e-14);
        assert!((f.q[(1, 0)] - C64::ONE).norm() < 1e-14);
        assert!(f.r.sub(&ComplexMatrix::identity(2)).fro_norm() < 1e-14);
    }

    #[test]
    fn qr_random_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[2usize, 4, 8, 16] {
            for _ in 0..40 {
                let h = random_matrix(n, n, &mut rng);
                let f = qr_decompose(&h).unwrap();
                assert_qr_invariants(&h, &f);
            }
        }
    }

    #[test]
    fn qr_tall_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_matrix(8, 3, &mut rng);
        let f = qr_decompose(&h).unwrap();
        assert_qr_invariants(&h, &f);
    }

    #[test]
    fn qr_rejects_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut h = random_matrix(4, 4, &mut rng);
        let c = h.col(0);
        h.set_col(2, &c);
        assert!(matches!(qr_decompose(&h), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn qr_rejects_wide_matrix() {
        let h = ComplexMatrix::zeros(2, 3);
        assert!(matches!(qr_decompose(&h), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn qr_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = random_matrix(6, 6, &mut rng);
        let f1 = qr_decompose(&h).unwrap();
        let f2 = qr_decompose(&h).unwrap();
        assert_eq!(f1.q, f2.q);
        assert_eq!(f1.r, f2.r);
    }

    #[test]
    fn wr_diagonal_is_exact() {
        let diag = [C64::new(2.0, 0.0), C64::new(0.5, 0.0), C64::new(3.0, 0.0)];
        let h = ComplexMatrix::from_diag(&diag);
        let f = wr_decompose(&h).unwrap();
        for u in 0..3 {
            assert_eq!(f.rp[(u, u)], diag[u]);
            for i in 0..3 {
                let expect = if i == u { C64::ONE } else { C64::ZERO };
                assert_eq!(f.w[(i, u)], expect);
            }
        }
        assert_eq!(f.rp[(0, 2)], C64::ZERO);
        assert_eq!(f.rp[(1, 2)], C64::ZERO);
    }

    #[test]
    fn wr_equals_qr_for_n2() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = random_matrix(2, 2, &mut rng);
            let qr = qr_decompose(&h).unwrap();
            let wr = wr_decompose(&h).unwrap();
            assert_eq!(wr.w, qr.q, "N=2 must take the QR path bit-for-bit");
            assert_eq!(wr.rp, qr.r);
        }
    }

    #[test]
    fn wr_random_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for &n in &[3usize, 4, 8, 16] {
            for _ in 0..20 {
                let h = random_matrix(n, n, &mut rng);
                let f = wr_decompose(&h).unwrap();
                assert_wr_invariants(&h, &f);
            }
        }
    }

    #[test]
    fn wr_structural_zeros_4x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_matrix(4, 4, &mut rng);
        let f = wr_decompose(&h).unwrap();
        let wh = f.w.hermitian().mul(&h);
        for &(u, v) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            assert!(wh[(u, v)].norm() <= 1e-10);
        }
        for u in 0..4 {
            assert!(f.rp[(u, u)].re > 0.0 && f.rp[(u, u)].im == 0.0);
        }
    }

    #[test]
    fn wr_root_column_matches_qr() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h = random_matrix(5, 5, &mut rng);
        let qr = qr_decompose(&h).unwrap();
        let wr = wr_decompose(&h).unwrap();
        assert_eq!(wr.w.col(4), qr.q.col(4));
        assert_eq!(wr.rp[(4, 4)], qr.r[(4, 4)]);
    }

    #[test]
    fn trailing_submatrix_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let h = random_matrix(4, 4, &mut rng);
        let r = qr_decompose(&h).unwrap().r;

        let full = trailing_submatrix(&r, 4).unwrap();
        assert_eq!(full, r);

        let one = trailing_submatrix(&r, 1).unwrap();
        assert_eq!(one[(0, 0)], r[(3, 3)]);

        let two = trailing_submatrix(&r, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(two[(i, j)], r[(2 + i, 2 + j)]);
            }
        }
        assert_eq!(two[(1, 0)], C64::ZERO, "triangular structure preserved");

        assert!(matches!(trailing_submatrix(&r, 5), Err(Error::OutOfRange(_))));
        assert!(matches!(trailing_submatrix(&r, 0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn singular_values_of_diagonal() {
        let h = ComplexMatrix::from_diag(&[
            C64::new(0.0, 3.0),
            C64::new(1.0, 0.0),
            C64::new(-2.0, 0.0),
        ]);
        let sv = singular_values(&h);
        assert!((sv[0] - 3.0).abs() < 1e-12);
        assert!((sv[1] - 2.0).abs() < 1e-12);
        assert!((sv[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn condition_of_unitary_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let h = random_matrix(6, 6, &mut rng);
        let q = qr_decompose(&h).unwrap().q;
        let c = condition_number(&q);
        assert!((c - 1.0).abs() < 1e-8, "cond(Q) = {c}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn qr_and_wr_invariants_hold(seed in any::<u64>(), n in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_matrix(n, n, &mut rng);
            if let Ok(f) = qr_decompose(&h) {
                assert_qr_invariants(&h, &f);
            }
            if let Ok(f) = wr_decompose(&h) {
                assert_wr_invariants(&h, &f);
            }
        }
    }
}
