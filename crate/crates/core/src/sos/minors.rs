//! Principal minors and the Sylvester-type PSD test.
//!
//! A symmetric matrix is positive semidefinite iff every principal minor is
//! non-negative, so all 511 minors of the 9x9 matrix are checked.

// Dense kernels read better with explicit row and column indices.
#![allow(clippy::needless_range_loop)]

use super::matrix::{CertificateMatrix, IndexSet, DIM};

/// Default threshold below which a minor counts as negative.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

/// Relative pivot size below which the Schur-complement enumeration falls
/// back to pivoted LU for a subtree.
const SCHUR_PIVOT_RTOL: f64 = 1e-10;

/// Determinant of a dense `n x n` matrix (row-major, `n <= DIM`) by LU with
/// partial pivoting. Destroys `a`.
pub fn det_lu(a: &mut [[f64; DIM]; DIM], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col][col].abs();
        for (r, row) in a.iter().enumerate().take(n).skip(col + 1) {
            if row[col].abs() > best {
                best = row[col].abs();
                pivot = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for r in col + 1..n {
            let f = a[r][col] / p;
            if f == 0.0 {
                continue;
            }
            for c in col + 1..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

/// Copy of `[Q]_{I,I}` packed into the top-left corner.
pub fn submatrix(q: &CertificateMatrix, set: IndexSet) -> ([[f64; DIM]; DIM], usize) {
    let mut out = [[0.0; DIM]; DIM];
    let idx = set.to_vec();
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            out[r][c] = q.0[i][j];
        }
    }
    (out, idx.len())
}

/// `Det [Q]_{I,I}` by LU with partial pivoting.
pub fn principal_minor(q: &CertificateMatrix, set: IndexSet) -> f64 {
    let (mut sub, n) = submatrix(q, set);
    det_lu(&mut sub, n)
}

/// Smallest pivot ratio for which the cofactors are taken from the inverse.
const ADJUGATE_PIVOT_RTOL: f64 = 1e-6;

/// Cofactor matrix of the leading `n x n` block: `C[m][n] = (-1)^(m+n) M_mn`.
///
/// Well-conditioned blocks use `C = det(A) A^-T` from one pivoted LU. Blocks
/// with a small pivot ratio fall back to the (n-1)x(n-1) determinants, so the
/// result stays well defined for singular blocks.
pub fn cofactor_matrix(a: &[[f64; DIM]; DIM], n: usize) -> [[f64; DIM]; DIM] {
    if n == 1 {
        let mut out = [[0.0; DIM]; DIM];
        out[0][0] = 1.0;
        return out;
    }
    cofactors_by_inverse(a, n).unwrap_or_else(|| cofactors_by_minors(a, n))
}

fn cofactors_by_inverse(a: &[[f64; DIM]; DIM], n: usize) -> Option<[[f64; DIM]; DIM]> {
    let mut lu = *a;
    let mut perm: [usize; DIM] = std::array::from_fn(|i| i);
    let mut det = 1.0;
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if lu[r][col].abs() > lu[pivot][col].abs() {
                pivot = r;
            }
        }
        if pivot != col {
            lu.swap(pivot, col);
            perm.swap(pivot, col);
            det = -det;
        }
        let p = lu[col][col];
        pmin = pmin.min(p.abs());
        pmax = pmax.max(p.abs());
        if p == 0.0 {
            return None;
        }
        det *= p;
        for r in col + 1..n {
            let f = lu[r][col] / p;
            lu[r][col] = f;
            for c in col + 1..n {
                lu[r][c] -= f * lu[col][c];
            }
        }
    }
    if pmin < ADJUGATE_PIVOT_RTOL * pmax {
        return None;
    }
    // Solve A X = I column by column; C[m][k] = det * X[k][m].
    let mut out = [[0.0; DIM]; DIM];
    for e in 0..n {
        let mut y = [0.0; DIM];
        for i in 0..n {
            let mut v = if perm[i] == e { 1.0 } else { 0.0 };
            for j in 0..i {
                v -= lu[i][j] * y[j];
            }
            y[i] = v;
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for j in i + 1..n {
                v -= lu[i][j] * y[j];
            }
            y[i] = v / lu[i][i];
        }
        // y is column e of the inverse
        for (m, yv) in y.iter().enumerate().take(n) {
            out[e][m] = det * yv;
        }
    }
    Some(out)
}

fn cofactors_by_minors(a: &[[f64; DIM]; DIM], n: usize) -> [[f64; DIM]; DIM] {
    let mut out = [[0.0; DIM]; DIM];
    for (skip_r, out_row) in out.iter_mut().enumerate().take(n) {
        for (skip_c, entry) in out_row.iter_mut().enumerate().take(n) {
            let mut minor = [[0.0; DIM]; DIM];
            for (rr, r) in (0..n).filter(|r| *r != skip_r).enumerate() {
                for (cc, c) in (0..n).filter(|c| *c != skip_c).enumerate() {
                    minor[rr][cc] = a[r][c];
                }
            }
            let sign = if (skip_r + skip_c) % 2 == 0 { 1.0 } else { -1.0 };
            *entry = sign * det_lu(&mut minor, n - 1);
        }
    }
    out
}

/// All principal minors, indexed by subset mask (entry 0 is unused).
///
/// Walks subsets depth-first, extending the current set with larger indices.
/// The minor of `I + {j}` is `det(I) * S_jj` with `S` the Schur complement of
/// `[Q]_{I,I}`; eliminating `j` gives the complement for the child. Subtrees
/// below a negligible pivot are recomputed with pivoted LU.
pub fn all_principal_minors(q: &CertificateMatrix) -> [f64; 1 << DIM] {
    let mut out = [0.0; 1 << DIM];
    let scale = q.max_abs().max(f64::MIN_POSITIVE);
    descend(q, &q.0, 1.0, 0, 0, scale, &mut out);
    out
}

fn descend(
    q: &CertificateMatrix,
    schur: &[[f64; DIM]; DIM],
    det: f64,
    set: u16,
    start: usize,
    scale: f64,
    out: &mut [f64; 1 << DIM],
) {
    for j in start..DIM {
        let pivot = schur[j][j];
        let child = set | (1 << j);
        out[child as usize] = det * pivot;
        if j + 1 == DIM {
            continue;
        }
        if pivot.abs() > SCHUR_PIVOT_RTOL * scale {
            let mut next = *schur;
            for r in j + 1..DIM {
                let f = schur[r][j] / pivot;
                for c in j + 1..DIM {
                    next[r][c] = schur[r][c] - f * schur[j][c];
                }
            }
            descend(q, &next, det * pivot, child, j + 1, scale, out);
        } else {
            fill_by_lu(q, child, j + 1, out);
        }
    }
}

fn fill_by_lu(q: &CertificateMatrix, set: u16, start: usize, out: &mut [f64; 1 << DIM]) {
    for j in start..DIM {
        let child = set | (1 << j);
        out[child as usize] = principal_minor(q, IndexSet::from_mask(child).expect("non-empty"));
        fill_by_lu(q, child, j + 1, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdStatus {
    pub is_psd: bool,
    pub worst_index_set: IndexSet,
    pub worst_value: f64,
}

/// Checks all 511 principal minors. The reported worst set is the minimizer,
/// ties broken by smaller cardinality and then lexicographically.
pub fn psd_status(q: &CertificateMatrix, tol: f64) -> PsdStatus {
    debug_assert!(tol >= 0.0);
    let minors = all_principal_minors(q);
    let mut worst = IndexSet::singleton(0);
    let mut worst_value = minors[worst.mask() as usize];
    for set in IndexSet::all().skip(1) {
        let v = minors[set.mask() as usize];
        if v < worst_value || (v == worst_value && set.tie_break_cmp(&worst).is_lt()) {
            worst = set;
            worst_value = v;
        }
    }
    PsdStatus {
        is_psd: worst_value >= -tol,
        worst_index_set: worst,
        worst_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng) -> CertificateMatrix {
        let mut m = CertificateMatrix::zeros();
        for i in 0..DIM {
            for j in 0..=i {
                let v = rng.random_range(-2.0..2.0);
                m.0[i][j] = v;
                m.0[j][i] = v;
            }
        }
        m
    }

    /// Laplace expansion along the first row; independent of LU.
    fn cofactor_det(a: &[Vec<f64>]) -> f64 {
        let n = a.len();
        if n == 1 {
            return a[0][0];
        }
        (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> = a[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[0][c] * cofactor_det(&minor)
            })
            .sum()
    }

    fn as_vecs(q: &CertificateMatrix, set: IndexSet) -> Vec<Vec<f64>> {
        let idx = set.to_vec();
        idx.iter().map(|&i| idx.iter().map(|&j| q.0[i][j]).collect()).collect()
    }

    #[test]
    fn singleton_minor_is_diagonal_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_symmetric(&mut rng);
        for m in 0..DIM {
            assert_eq!(principal_minor(&q, IndexSet::singleton(m)), q.0[m][m]);
        }
    }

    #[test]
    fn identity_minors_are_one() {
        let q = CertificateMatrix::identity();
        for set in IndexSet::all() {
            assert_eq!(principal_minor(&q, set), 1.0);
        }
        let st = psd_status(&q, DEFAULT_PSD_TOL);
        assert!(st.is_psd);
        assert_eq!(st.worst_value, 1.0);
        assert_eq!(st.worst_index_set, IndexSet::singleton(0));
    }

    #[test]
    fn negative_last_diagonal_is_detected() {
        let mut d = [1.0; DIM];
        d[8] = -1e-3;
        let st = psd_status(&CertificateMatrix::diagonal(d), DEFAULT_PSD_TOL);
        assert!(!st.is_psd);
        assert_eq!(st.worst_index_set, IndexSet::singleton(8));
        assert_eq!(st.worst_value, -1e-3);
    }

    #[test]
    fn lu_matches_laplace_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let q = random_symmetric(&mut rng);
            let full = IndexSet::FULL;
            let lu = principal_minor(&q, full);
            let laplace = cofactor_det(&as_vecs(&q, full));
            assert_relative_eq!(lu, laplace, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn schur_enumeration_matches_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let mut q = random_symmetric(&mut rng);
            if trial % 5 == 0 {
                // exact zeros on the diagonal exercise the LU fallback
                q.0[2][2] = 0.0;
                q.0[5][5] = 0.0;
            }
            let all = all_principal_minors(&q);
            for set in IndexSet::all() {
                let lu = principal_minor(&q, set);
                let fast = all[set.mask() as usize];
                assert!(
                    (lu - fast).abs() <= 1e-9 * (1.0 + lu.abs()),
                    "set {set}: lu {lu} vs schur {fast}"
                );
            }
        }
    }

    #[test]
    fn cofactors_satisfy_adjugate_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_symmetric(&mut rng);
        let set = IndexSet::from_indices(&[0, 2, 3, 7]).unwrap();
        let (a, n) = submatrix(&q, set);
        let c = cofactor_matrix(&a, n);
        let det = principal_minor(&q, set);
        // A * C^T = det * I
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| a[i][k] * c[j][k]).sum();
                let expect = if i == j { det } else { 0.0 };
                assert!((v - expect).abs() < 1e-10, "({i},{j}) {v} vs {expect}");
            }
        }
    }

    #[test]
    fn inverse_and_minor_cofactors_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let q = random_symmetric(&mut rng);
            let (a, n) = submatrix(&q, IndexSet::FULL);
            let fast = cofactors_by_inverse(&a, n).expect("random matrix is regular");
            let slow = cofactors_by_minors(&a, n);
            for i in 0..n {
                for j in 0..n {
                    assert_relative_eq!(fast[i][j], slow[i][j], max_relative = 1e-8, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn singular_block_has_nonzero_cofactors() {
        let mut q = CertificateMatrix::zeros();
        q.0[0][0] = 1.0;
        q.0[1][1] = 0.0;
        let (a, n) = submatrix(&q, IndexSet::from_indices(&[0, 1]).unwrap());
        let c = cofactor_matrix(&a, n);
        assert_eq!(c[1][1], 1.0);
        assert_eq!(c[0][0], 0.0);
    }
}
