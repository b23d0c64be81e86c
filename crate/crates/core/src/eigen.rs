//! Dense symmetric eigen-decomposition for small stencil matrices.

use crate::math::{abs, sqrt};

/// Cyclic Jacobi eigen-decomposition of a symmetric `M x M` matrix.
///
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn symmetric_eigen<const M: usize>(a: &[[f64; M]; M]) -> ([f64; M], [[f64; M]; M]) {
    let mut a = *a;
    let mut v = [[0.0; M]; M];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a.iter().flatten().fold(0.0, |m, x| m.max(abs(*x)));
    if scale == 0.0 {
        return ([0.0; M], v);
    }
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..M {
            for q in p + 1..M {
                off += a[p][q] * a[p][q];
            }
        }
        if sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..M {
            for q in p + 1..M {
                let apq = a[p][q];
                if abs(apq) <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (abs(theta) + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..M {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..M {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut w = [0.0; M];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = a[i][i];
    }
    (w, v)
}

/// Clamps negative eigenvalues of a symmetric matrix to zero, in place.
///
/// Returns `true` when the matrix was modified.
pub fn project_psd<const M: usize>(a: &mut [[f64; M]; M]) -> bool {
    let (w, v) = symmetric_eigen(a);
    if w.iter().all(|&x| x >= 0.0) {
        return false;
    }
    for i in 0..M {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..M {
                if w[k] > 0.0 {
                    s += v[i][k] * w[k] * v[j][k];
                }
            }
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonalizes_known_matrix() {
        let a = [[2.0, 1.0], [1.0, 2.0]];
        let (mut w, _) = symmetric_eigen(&a);
        w.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((w[0] - 1.0).abs() < 1e-13 && (w[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        let mut a = [[0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..=i {
                let v = ((i * 7 + j * 3) % 11) as f64 - 5.0;
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let (w, v) = symmetric_eigen(&a);
        for i in 0..5 {
            for j in 0..5 {
                let r: f64 = (0..5).map(|k| v[i][k] * w[k] * v[j][k]).sum();
                assert!((r - a[i][j]).abs() < 1e-12);
                let o: f64 = (0..5).map(|k| v[k][i] * v[k][j]).sum();
                assert!((o - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_clamps_negative_modes() {
        let mut a = [[1.0, 2.0], [2.0, 1.0]]; // eigenvalues 3, -1
        assert!(project_psd(&mut a));
        let (w, _) = symmetric_eigen(&a);
        assert!(w.iter().all(|&x| x > -1e-12));
        assert!((a[0][0] - 1.5).abs() < 1e-12 && (a[0][1] - 1.5).abs() < 1e-12);
        let mut b = [[2.0, 0.0], [0.0, 1.0]];
        assert!(!project_psd(&mut b));
    }
}
