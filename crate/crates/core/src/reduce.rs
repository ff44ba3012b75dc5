//! LLL reduction of 3-dimensional lattice bases.
//!
//! Rows are basis vectors. The reduced basis spans the same lattice, so for
//! a point `Γg` of `SL3(Z)\SL3(R)` it is just another coset representative.

use nalgebra::Matrix3;

use crate::forms::GroupElement;

const LOVASZ: f64 = 0.99;
const MAX_SWAPS: usize = 10_000;

/// A reduced basis `basis = transform · original` with `transform` in
/// `GL3(Z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduced {
    pub basis: Matrix3<f64>,
    pub transform: [[i64; 3]; 3],
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn gram_schmidt(b: &[[f64; 3]; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3], [f64; 3]) {
    let mut star = *b;
    let mut mu = [[0.0; 3]; 3];
    let mut norms = [0.0; 3];
    for i in 0..3 {
        for j in 0..i {
            mu[i][j] = if norms[j] > 0.0 {
                dot(&b[i], &star[j]) / norms[j]
            } else {
                0.0
            };
            for l in 0..3 {
                star[i][l] -= mu[i][j] * star[j][l];
            }
        }
        norms[i] = dot(&star[i], &star[i]);
    }
    (star, mu, norms)
}

/// LLL with Lovász constant 0.99.
pub fn lll(basis: &Matrix3<f64>) -> Reduced {
    let mut b = [[0.0; 3]; 3];
    for (i, row) in b.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = basis[(i, j)];
        }
    }
    let mut u = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

    let mut k = 1;
    let mut swaps = 0;
    while k < 3 && swaps < MAX_SWAPS {
        for j in (0..k).rev() {
            let (_, mu, _) = gram_schmidt(&b);
            let r = mu[k][j].round();
            if r != 0.0 {
                let ri = r as i64;
                for l in 0..3 {
                    b[k][l] -= r * b[j][l];
                    u[k][l] -= ri * u[j][l];
                }
            }
        }
        let (_, mu, norms) = gram_schmidt(&b);
        if norms[k] >= (LOVASZ - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1] {
            k += 1;
        } else {
            b.swap(k, k - 1);
            u.swap(k, k - 1);
            swaps += 1;
            k = (k - 1).max(1);
        }
    }

    Reduced {
        basis: Matrix3::from_fn(|i, j| b[i][j]),
        transform: u,
    }
}

/// LLL-reduced representative of the same point of `SL3(Z)\SL3(R)`.
///
/// A reduction with `det(transform) = −1` is corrected by negating a row, so
/// the result stays in `SL3(R)`.
pub fn reduce_point(g: &GroupElement) -> GroupElement {
    let r = lll(g.matrix());
    let mut m = r.basis;
    if m.determinant() < 0.0 {
        for j in 0..3 {
            m[(0, j)] = -m[(0, j)];
        }
    }
    GroupElement::new_unchecked(m)
}

/// `n · transform` for an integer row vector.
#[inline]
pub fn apply_transform(m: [i64; 3], t: &[[i64; 3]; 3]) -> [i64; 3] {
    [
        m[0] * t[0][0] + m[1] * t[1][0] + m[2] * t[2][0],
        m[0] * t[0][1] + m[1] * t[1][1] + m[2] * t[2][1],
        m[0] * t[0][2] + m[1] * t[1][2] + m[2] * t[2][2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn int_det(t: &[[i64; 3]; 3]) -> i64 {
        t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) - t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0])
            + t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0])
    }

    #[test]
    fn reduces_skewed_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let m = Matrix3::<f64>::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if m.determinant().abs() < 0.1 {
                continue;
            }
            // skew with a large unipotent
            let mut shear = Matrix3::identity();
            shear[(0, 1)] = rng.random_range(-500.0..500.0);
            shear[(1, 2)] = rng.random_range(-500.0..500.0);
            let skewed = shear * m;
            let r = lll(&skewed);
            assert_eq!(int_det(&r.transform).abs(), 1);
            let tm = Matrix3::from_fn(|i, j| r.transform[i][j] as f64);
            assert!((tm * skewed - r.basis).norm() < 1e-6 * skewed.norm());
            assert!(r.basis.norm() < 10.0 * m.norm() + 10.0);
        }
    }

    #[test]
    fn reduced_point_keeps_determinant() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 37.0;
        m[(2, 0)] = -11.0;
        let g = GroupElement::new(m).unwrap();
        let r = reduce_point(&g);
        assert!((r.matrix().determinant() - 1.0).abs() < 1e-9);
        assert!(r.hs_norm() < 2.0);
    }
}
