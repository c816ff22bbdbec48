//! Eigen, singular value and Cholesky decompositions for the small dense
//! matrices that appear in the solvers (dimensions up to a few dozen).

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, HermitianMatrix, UpperTriangular};
use crate::error::{dimension, domain, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Eigenvalues in descending order with the matching unit eigenvectors as
/// columns of `vectors`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Thin singular value decomposition `H = U diag(σ) V` where `U` has
/// orthonormal columns and `V` orthonormal rows; `σ` is descending and has
/// `min(rows, cols)` entries.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
pub fn herm_eig(a: &HermitianMatrix) -> Eigen {
    let n = a.dim();
    let mut m = a.as_matrix().clone();
    let mut v = ComplexMatrix::identity(n);
    let fro = m.frobenius_norm();
    if fro == 0.0 || n < 2 {
        return sorted(m, v);
    }
    let target = (f64::EPSILON * fro).powi(2);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off <= target {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    sorted(m, v)
}

/// One Jacobi rotation annihilating entry (p, q).
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let b = m[(p, q)];
    let babs = b.norm();
    if babs == 0.0 {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * babs);
    let t = if theta.is_infinite() {
        0.0
    } else {
        let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
        sgn / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    if t == 0.0 {
        m[(p, q)] = ZERO;
        m[(q, p)] = ZERO;
        return;
    }
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let phase = (b / babs).conj();
    // J = diag(1, e^{-iφ}) · [[c, s], [-s, c]] restricted to rows/cols p, q.
    let jpp = Complex64::new(c, 0.0);
    let jpq = Complex64::new(s, 0.0);
    let jqp = phase * (-s);
    let jqq = phase * c;
    let n = m.rows();
    // M <- M J
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = mkp * jpp + mkq * jqp;
        m[(k, q)] = mkp * jpq + mkq * jqq;
    }
    // M <- J† M
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = jpp.conj() * mpk + jqp.conj() * mqk;
        m[(q, k)] = jpq.conj() * mpk + jqq.conj() * mqk;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = Complex64::new(app - t * babs, 0.0);
    m[(q, q)] = Complex64::new(aqq + t * babs, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

fn sorted(m: ComplexMatrix, v: ComplexMatrix) -> Eigen {
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[(b, b)].re.total_cmp(&m[(a, a)].re));
    let values = order.iter().map(|&k| m[(k, k)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    Eigen { values, vectors }
}

/// Thin SVD through the eigendecomposition of the smaller Gram matrix.
pub fn svd(h: &ComplexMatrix) -> Svd {
    let (r, t) = (h.rows(), h.cols());
    let k = r.min(t);
    let scale = h.max_abs();
    if t <= r {
        // H†H = V† Σ² V, so the eigenvectors are the columns of V†.
        let gram = HermitianMatrix::symmetrize(&h.adjoint() * h);
        let eig = herm_eig(&gram);
        let sigma: Vec<f64> = eig.values[..k].iter().map(|&x| x.max(0.0).sqrt()).collect();
        let mut v = ComplexMatrix::zeros(k, t);
        for i in 0..k {
            for j in 0..t {
                v[(i, j)] = eig.vectors[(j, i)].conj();
            }
        }
        let hv = h * &eig.vectors;
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(k);
        for (i, &s) in sigma.iter().enumerate() {
            if s > 1e-13 * scale.max(f64::MIN_POSITIVE) * (k as f64) {
                cols.push(hv.column(i).iter().map(|z| z / s).collect());
            } else {
                break;
            }
        }
        complete_basis(&mut cols, r, k);
        let mut u = ComplexMatrix::zeros(r, k);
        for (j, col) in cols.iter().enumerate() {
            u.set_column(j, col);
        }
        Svd { u, sigma, v }
    } else {
        let ha = h.adjoint();
        let flipped = svd(&ha);
        // H† = U' Σ V'  ⇒  H = V'† Σ U'†.
        Svd {
            u: flipped.v.adjoint(),
            sigma: flipped.sigma,
            v: flipped.u.adjoint(),
        }
    }
}

/// Extends a list of orthonormal vectors of length `n` to `want` vectors with
/// Gram-Schmidt against the standard basis.
fn complete_basis(cols: &mut Vec<Vec<Complex64>>, n: usize, want: usize) {
    let mut e = 0;
    while cols.len() < want && e < n {
        let mut cand = vec![ZERO; n];
        cand[e] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for c in cols.iter() {
                let proj: Complex64 = c.iter().zip(&cand).map(|(a, b)| a.conj() * b).sum();
                for (x, a) in cand.iter_mut().zip(c) {
                    *x -= proj * a;
                }
            }
        }
        let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(cand.into_iter().map(|z| z / norm).collect());
        }
        e += 1;
    }
}

/// `T†T`.
pub fn ut_gram(t: &UpperTriangular) -> HermitianMatrix {
    let m = t.as_matrix();
    HermitianMatrix::symmetrize(&m.adjoint() * m)
}

/// Upper Cholesky factor `T` with `T†T = A` for positive semidefinite `A`.
///
/// Eigenvalues down to `−1e-12·‖A‖_max` are treated as zero; anything more
/// negative is a domain error. Zero pivots produce zero rows.
pub fn chol_upper(a: &HermitianMatrix) -> Result<UpperTriangular> {
    let n = a.dim();
    let norm = a.as_matrix().max_abs();
    let eig = herm_eig(a);
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -1e-12 * norm {
        return Err(domain!(
            "matrix is indefinite (smallest eigenvalue {min:e})"
        ));
    }
    let work = if min < 0.0 {
        let clamped: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0)).collect();
        HermitianMatrix::from_eigen(&eig.vectors, &clamped)
    } else {
        a.clone()
    };
    let m = work.as_matrix();
    let pivot_tol = 1e-14 * norm * n as f64;
    let mut t = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let mut d = m[(i, i)].re;
        for k in 0..i {
            d -= t[(k, i)].norm_sqr();
        }
        if d <= pivot_tol {
            continue;
        }
        let tii = d.sqrt();
        t[(i, i)] = Complex64::new(tii, 0.0);
        for j in i + 1..n {
            let mut acc = m[(i, j)];
            for k in 0..i {
                acc -= t[(k, i)].conj() * t[(k, j)];
            }
            t[(i, j)] = acc / tii;
        }
    }
    UpperTriangular::new(t)
}

/// Hermitian square root of a PSD matrix (negative eigenvalues clamped).
pub fn psd_sqrt(a: &HermitianMatrix) -> HermitianMatrix {
    let eig = herm_eig(a);
    let roots: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0).sqrt()).collect();
    HermitianMatrix::from_eigen(&eig.vectors, &roots)
}

/// `ln det(I + S Q)` in nats, from the eigenvalues of `Q^{1/2} S Q^{1/2}`.
pub fn log_det_plus(s: &HermitianMatrix, q: &HermitianMatrix) -> Result<f64> {
    if s.dim() != q.dim() {
        return Err(dimension!(
            "log_det_plus needs equal sizes, got {} and {}",
            s.dim(),
            q.dim()
        ));
    }
    let root = psd_sqrt(q);
    let inner = &(root.as_matrix() * s.as_matrix()) * root.as_matrix();
    let eig = herm_eig(&HermitianMatrix::symmetrize(inner));
    Ok(eig.values.iter().map(|&x| x.max(0.0).ln_1p()).sum())
}

/// `ln det(I + F S F†)` for `Q = F†F`, evaluated with a Cholesky factorization
/// of the (well conditioned, ≥ I) matrix `I + F S F†`. This is the inner-loop
/// form used by the Monte Carlo estimators.
pub(crate) fn log_det_plus_factored(s: &ComplexMatrix, f: &ComplexMatrix) -> Result<f64> {
    let inner = &(f * s) * &f.adjoint();
    ln_det_identity_plus(&inner)
}

/// `ln det(I + A)` for Hermitian PSD `A`.
pub(crate) fn ln_det_identity_plus(a: &ComplexMatrix) -> Result<f64> {
    let n = a.rows();
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    ln_det_pd(&b).ok_or_else(|| Error::Numerical("I + A is not positive definite".into()))
}

/// `ln det(A)` for Hermitian positive definite `A`, or `None` when a pivot is
/// not strictly positive.
pub(crate) fn ln_det_pd(a: &ComplexMatrix) -> Option<f64> {
    let n = a.rows();
    let mut l = a.clone();
    let mut acc = 0.0;
    for j in 0..n {
        let mut d = l[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        acc += 2.0 * djj.ln();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = l[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn herm_from(n: usize, vals: &[f64]) -> HermitianMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        let mut it = vals.iter();
        for i in 0..n {
            m[(i, i)] = c(*it.next().unwrap(), 0.0);
            for j in i + 1..n {
                let z = c(*it.next().unwrap(), *it.next().unwrap());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        HermitianMatrix::new(m).unwrap()
    }

    fn general_from(r: usize, t: usize, vals: &[f64]) -> ComplexMatrix {
        let data = (0..r * t)
            .map(|k| c(vals[2 * k], vals[2 * k + 1]))
            .collect();
        ComplexMatrix::new(r, t, data).unwrap()
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = herm_eig(&HermitianMatrix::identity(2));
        assert_eq!(e.values, vec![1.0, 1.0]);
        assert!((&e.vectors - &ComplexMatrix::identity(2)).max_abs() < 1e-15);

        let e = herm_eig(&HermitianMatrix::from_diag(&[1.0, 2.0]));
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_of_complex_two_by_two() {
        // λ² − 2λ = 0.
        let a = HermitianMatrix::new(
            ComplexMatrix::from_rows(&[
                vec![c(1.0, 0.0), c(0.0, 1.0)],
                vec![c(0.0, -1.0), c(1.0, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap();
        let e = herm_eig(&a);
        assert!((e.values[0] - 2.0).abs() < 1e-14);
        assert!(e.values[1].abs() < 1e-14);
    }

    #[test]
    fn svd_basic_cases() {
        let z = svd(&ComplexMatrix::zeros(2, 3));
        assert!(z.sigma.iter().all(|&s| s == 0.0));
        assert_eq!(z.u.cols(), 2);

        let d = svd(&ComplexMatrix::from_diag(&[3.0, 4.0]));
        assert!((d.sigma[0] - 4.0).abs() < 1e-14 && (d.sigma[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn ut_gram_examples() {
        let t = UpperTriangular::new(
            ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let g = ut_gram(&t);
        let want = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 2.0]]).unwrap();
        assert!((g.as_matrix() - &want).max_abs() < 1e-15);
        assert_eq!(g.trace(), 3.0);
        assert_eq!(t.gram_trace(), 3.0);

        let q = [0.3f64, 0.7];
        let diag =
            UpperTriangular::new(ComplexMatrix::from_diag(&[q[0].sqrt(), q[1].sqrt()])).unwrap();
        let g = ut_gram(&diag);
        assert!((g[(0, 0)].re - 0.3).abs() < 1e-15 && (g[(1, 1)].re - 0.7).abs() < 1e-15);
    }

    #[test]
    fn chol_examples() {
        let t = chol_upper(&HermitianMatrix::identity(3)).unwrap();
        assert!((t.as_matrix() - &ComplexMatrix::identity(3)).max_abs() < 1e-15);

        let a = HermitianMatrix::new(
            ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 2.0]]).unwrap(),
        )
        .unwrap();
        let t = chol_upper(&a).unwrap();
        let want = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!((t.as_matrix() - &want).max_abs() < 1e-14);

        let rank1 = HermitianMatrix::new(
            ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let t = chol_upper(&rank1).unwrap();
        let want = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!((t.as_matrix() - &want).max_abs() < 1e-12);
    }

    #[test]
    fn chol_rejects_indefinite() {
        let a = HermitianMatrix::from_diag(&[1.0, -0.1]);
        assert!(matches!(chol_upper(&a), Err(Error::Domain(_))));
        // Within tolerance: clamped.
        let a = HermitianMatrix::from_diag(&[1.0, -1e-14]);
        assert!(chol_upper(&a).is_ok());
    }

    #[test]
    fn log_det_plus_examples() {
        let z = HermitianMatrix::symmetrize(ComplexMatrix::zeros(2, 2));
        assert_eq!(
            log_det_plus(&z, &HermitianMatrix::identity(2)).unwrap(),
            0.0
        );

        let s = HermitianMatrix::from_diag(&[2.0, 1.0]);
        let q = HermitianMatrix::from_diag(&[0.5, 0.5]);
        let want = 2f64.ln() + 1.5f64.ln();
        assert!((log_det_plus(&s, &q).unwrap() - want).abs() < 1e-14);

        let i3 = HermitianMatrix::identity(3);
        assert!((log_det_plus(&i3, &i3).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-14);

        assert!(log_det_plus(&i3, &HermitianMatrix::identity(2)).is_err());
    }

    #[test]
    fn ln_det_pd_matches_eigen() {
        let a = herm_from(3, &[3.0, 0.5, 0.1, 0.2, -0.3, 2.0, 0.4, 0.0, 1.5]);
        let eig = herm_eig(&a);
        let want: f64 = eig.values.iter().map(|x| x.ln()).sum();
        assert!((ln_det_pd(a.as_matrix()).unwrap() - want).abs() < 1e-13);
        assert!(ln_det_pd(HermitianMatrix::from_diag(&[1.0, 0.0]).as_matrix()).is_none());
    }

    fn hermitian_strategy() -> impl Strategy<Value = HermitianMatrix> {
        (1usize..7).prop_flat_map(|n| {
            prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| herm_from(n, &v))
        })
    }

    fn general_strategy() -> impl Strategy<Value = ComplexMatrix> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, t)| {
            prop::collection::vec(-3.0f64..3.0, 2 * r * t).prop_map(move |v| general_from(r, t, &v))
        })
    }

    proptest! {
        #[test]
        fn eig_reconstructs(a in hermitian_strategy()) {
            let e = herm_eig(&a);
            let n = a.dim();
            let scale = a.as_matrix().max_abs().max(1e-300);
            let av = a.as_matrix() * &e.vectors;
            let vl = &e.vectors * &ComplexMatrix::from_diag(&e.values);
            prop_assert!((&av - &vl).max_abs() <= 1e-10 * scale);
            let utu = &e.vectors.adjoint() * &e.vectors;
            prop_assert!((&utu - &ComplexMatrix::identity(n)).max_abs() <= 1e-10);
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn svd_reconstructs(h in general_strategy()) {
            let d = svd(&h);
            let k = h.rows().min(h.cols());
            let rec = &(&d.u * &ComplexMatrix::from_diag(&d.sigma)) * &d.v;
            prop_assert!((&rec - &h).max_abs() <= 1e-10 * h.max_abs().max(1.0));
            let utu = &d.u.adjoint() * &d.u;
            let vvt = &d.v * &d.v.adjoint();
            prop_assert!((&utu - &ComplexMatrix::identity(k)).max_abs() <= 1e-9);
            prop_assert!((&vvt - &ComplexMatrix::identity(k)).max_abs() <= 1e-9);
            prop_assert!(d.sigma.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn chol_inverts_gram(n in 1usize..6, vals in prop::collection::vec(-2.0f64..2.0, 64), diag in prop::collection::vec(0.1f64..3.0, 6)) {
            let mut m = ComplexMatrix::zeros(n, n);
            let mut it = vals.iter();
            for i in 0..n {
                m[(i, i)] = c(diag[i], 0.0);
                for j in i + 1..n {
                    m[(i, j)] = c(*it.next().unwrap(), *it.next().unwrap());
                }
            }
            let t = UpperTriangular::new(m).unwrap();
            let back = chol_upper(&ut_gram(&t)).unwrap();
            let scale = t.as_matrix().max_abs().max(1.0);
            prop_assert!((back.as_matrix() - t.as_matrix()).max_abs() <= 1e-10 * scale * scale);
            let g = ut_gram(&t);
            prop_assert!((g.trace() - t.gram_trace()).abs() <= 1e-12 * t.gram_trace());
        }

        #[test]
        fn log_det_plus_is_symmetric(vals in prop::collection::vec(-2.0f64..2.0, 18), vals2 in prop::collection::vec(-2.0f64..2.0, 18)) {
            // Build PSD matrices as B B†.
            let b1 = general_from(3, 3, &vals);
            let b2 = general_from(3, 3, &vals2);
            let s = HermitianMatrix::symmetrize(&b1 * &b1.adjoint());
            let q = HermitianMatrix::symmetrize(&b2 * &b2.adjoint());
            let a = log_det_plus(&s, &q).unwrap();
            let b = log_det_plus(&q, &s).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            prop_assert!(a >= 0.0);
            let f = chol_upper(&q).unwrap();
            let fast = log_det_plus_factored(s.as_matrix(), f.as_matrix()).unwrap();
            prop_assert!((a - fast).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
