//! Determinant-normalized indefinite ternary quadratic forms and the right
//! action of `SL3(R)` on them.
//!
//! Vectors are row vectors throughout: a form with symmetric matrix `S`
//! takes the value `v S vᵀ` at `v`, and `g` acts by `Q^g(v) = Q(v g)`, whose
//! matrix is `g S gᵀ`.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Determinant tolerance for forms and group elements.
pub const DET_TOLERANCE: f64 = 1e-9;

const SINGULAR_DET: f64 = 1e-12;
const DEGENERATE_EIGENVALUE: f64 = 1e-10;

/// Value of the base form `x² + y² − z²`.
#[inline]
pub fn q0_eval(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] - v[2] * v[2]
}

/// Row-vector product `v · m`.
#[inline]
pub fn row_mul(v: [f64; 3], m: &Matrix3<f64>) -> [f64; 3] {
    [
        v[0] * m[(0, 0)] + v[1] * m[(1, 0)] + v[2] * m[(2, 0)],
        v[0] * m[(0, 1)] + v[1] * m[(1, 1)] + v[2] * m[(2, 1)],
        v[0] * m[(0, 2)] + v[1] * m[(1, 2)] + v[2] * m[(2, 2)],
    ]
}

/// Integer row vector as floats.
#[inline]
pub fn to_f64(n: [i64; 3]) -> [f64; 3] {
    [n[0] as f64, n[1] as f64, n[2] as f64]
}

/// A real 3×3 matrix of determinant one.
///
/// Its rows span the unimodular lattice `Z³g`; as a transporter it carries
/// `Q₀` to `Q₀^g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement(Matrix3<f64>);

impl GroupElement {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let det = m.determinant();
        if (det - 1.0).abs() > DET_TOLERANCE {
            return Err(Error::NotUnimodular { det });
        }
        Ok(Self(m))
    }

    /// Rescales `m` by `det^{-1/3}`. Fails unless `det m > 0`.
    pub fn normalized(m: Matrix3<f64>) -> Result<Self> {
        let det = m.determinant();
        if det <= SINGULAR_DET {
            return Err(Error::NotUnimodular { det });
        }
        Ok(Self(m * det.powf(-1.0 / 3.0)))
    }

    /// Wraps a matrix whose determinant is one by construction
    /// (products, inverses, integral changes of basis).
    pub(crate) fn new_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &GroupElement) -> GroupElement {
        Self(self.0 * rhs.0)
    }

    pub fn inverse(&self) -> GroupElement {
        // det = 1, so the inverse always exists
        Self(self.0.try_inverse().expect("unimodular matrix is invertible"))
    }

    /// Hilbert–Schmidt norm `sqrt(tr(gᵀg))`.
    pub fn hs_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Operator norm `‖g‖₂`, the largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.0.singular_values().max()
    }

    /// Ratio of extreme singular values.
    pub fn condition_number(&self) -> f64 {
        let sv = self.0.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Lattice point `n · g`.
    #[inline]
    pub fn apply(&self, n: [i64; 3]) -> [f64; 3] {
        row_mul(to_f64(n), &self.0)
    }
}

/// An indefinite ternary form of signature (2,1) and `|det| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TernaryForm {
    s: Matrix3<f64>,
}

impl TernaryForm {
    /// The base form `x² + y² − z²`.
    pub fn q0() -> Self {
        Self {
            s: Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -1.0)),
        }
    }

    /// Builds a form from its upper triangle `[s11, s12, s13, s22, s23, s33]`,
    /// normalizing the determinant.
    pub fn from_upper(u: [f64; 6]) -> Result<Self> {
        normalize(&symmetric_from_upper(u))
    }

    pub fn upper(&self) -> [f64; 6] {
        let s = &self.s;
        [
            s[(0, 0)],
            s[(0, 1)],
            s[(0, 2)],
            s[(1, 1)],
            s[(1, 2)],
            s[(2, 2)],
        ]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.s
    }

    pub fn determinant(&self) -> f64 {
        self.s.determinant()
    }

    /// Sorted eigenvalues (descending).
    pub fn eigenvalues(&self) -> [f64; 3] {
        eigenvalues_desc(&self.s)
    }

    pub fn eval(&self, v: [f64; 3]) -> f64 {
        eval(self, v)
    }

    /// Coefficients of `n₃ ↦ Q(n₁, n₂, n₃) = a n₃² + b n₃ + c`.
    #[inline]
    pub fn fiber_coefficients(&self, n1: f64, n2: f64) -> (f64, f64, f64) {
        let s = &self.s;
        let a = s[(2, 2)];
        let b = 2.0 * (s[(0, 2)] * n1 + s[(1, 2)] * n2);
        let c = s[(0, 0)] * n1 * n1 + 2.0 * s[(0, 1)] * n1 * n2 + s[(1, 1)] * n2 * n2;
        (a, b, c)
    }
}

impl Serialize for TernaryForm {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.upper().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for TernaryForm {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let u = <[f64; 6]>::deserialize(de)?;
        TernaryForm::from_upper(u).map_err(serde::de::Error::custom)
    }
}

fn symmetric_from_upper(u: [f64; 6]) -> Matrix3<f64> {
    Matrix3::new(u[0], u[1], u[2], u[1], u[3], u[4], u[2], u[4], u[5])
}

fn eigenvalues_desc(s: &Matrix3<f64>) -> [f64; 3] {
    let ev = SymmetricEigen::new(*s).eigenvalues;
    let mut e = [ev[0], ev[1], ev[2]];
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

/// Number of (positive, negative) eigenvalues; `None` if any eigenvalue is
/// degenerate.
pub fn signature(s: &Matrix3<f64>) -> Option<(usize, usize)> {
    let e = eigenvalues_desc(s);
    if e.iter().any(|x| x.abs() < DEGENERATE_EIGENVALUE) {
        return None;
    }
    let pos = e.iter().filter(|x| **x > 0.0).count();
    Some((pos, 3 - pos))
}

/// `Q^g`, the form with matrix `g S gᵀ`.
pub fn act(q: &TernaryForm, g: &GroupElement) -> TernaryForm {
    let m = g.matrix();
    let mut s = m * q.s * m.transpose();
    // keep S exactly symmetric
    for i in 0..3 {
        for j in (i + 1)..3 {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    TernaryForm { s }
}

/// `v S vᵀ`.
#[inline]
pub fn eval(q: &TernaryForm, v: [f64; 3]) -> f64 {
    let s = &q.s;
    s[(0, 0)] * v[0] * v[0]
        + s[(1, 1)] * v[1] * v[1]
        + s[(2, 2)] * v[2] * v[2]
        + 2.0 * (s[(0, 1)] * v[0] * v[1] + s[(0, 2)] * v[0] * v[2] + s[(1, 2)] * v[1] * v[2])
}

/// Value at an integer vector. All enumeration code goes through this so
/// that different search strategies agree bit for bit.
#[inline]
pub fn eval_int(q: &TernaryForm, n: [i64; 3]) -> f64 {
    eval(q, to_f64(n))
}

/// Scales a symmetric matrix of signature (2,1) to `|det| = 1`.
pub fn normalize(s: &Matrix3<f64>) -> Result<TernaryForm> {
    let det = s.determinant();
    if det.abs() < SINGULAR_DET {
        return Err(Error::ZeroDeterminant { det });
    }
    match signature(s) {
        Some((2, 1)) => {}
        _ => {
            return Err(Error::WrongSignature {
                eigenvalues: eigenvalues_desc(s),
            })
        }
    }
    let scale = det.abs().powf(-1.0 / 3.0);
    let mut m = s * scale;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    Ok(TernaryForm { s: m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_g(rng: &mut impl Rng) -> GroupElement {
        loop {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            if m.determinant() > 0.1 {
                return GroupElement::normalized(m).unwrap();
            }
        }
    }

    #[test]
    fn base_form_values() {
        assert_eq!(q0_eval([1.0, 0.0, 0.0]), 1.0);
        assert_eq!(q0_eval([0.0, 0.0, 1.0]), -1.0);
        assert_eq!(q0_eval([3.0, 4.0, 5.0]), 0.0);
        assert_eq!(eval(&TernaryForm::q0(), [1.0, 1.0, 1.0]), 1.0);
    }

    #[test]
    fn act_identity_and_diagonal() {
        let q0 = TernaryForm::q0();
        assert_eq!(act(&q0, &GroupElement::identity()), q0);
        let g = GroupElement::new(Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, 0.5, 1.0)))
            .unwrap();
        assert_eq!(act(&q0, &g).upper(), [4.0, 0.0, 0.0, 0.25, 0.0, -1.0]);
    }

    #[test]
    fn unipotent_transport() {
        let mut m = Matrix3::identity();
        m[(0, 2)] = 1.0;
        let g = GroupElement::new(m).unwrap();
        let q = act(&TernaryForm::q0(), &g);
        assert_eq!(eval(&q, [1.0, 1.0, 1.0]), -2.0);
    }

    #[test]
    fn eval_matches_transported_base_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let g = random_g(&mut rng);
            let v: [f64; 3] = [
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ];
            let q = act(&TernaryForm::q0(), &g);
            let direct = q0_eval(row_mul(v, g.matrix()));
            let via = eval(&q, v);
            let scale = 1.0 + direct.abs().max(v.iter().map(|x| x * x).sum::<f64>() * g.hs_norm().powi(2));
            assert!((direct - via).abs() <= 1e-9 * scale, "{direct} vs {via}");
        }
    }

    #[test]
    fn composition_is_a_right_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = act(&TernaryForm::q0(), &random_g(&mut rng));
        for _ in 0..100 {
            let g1 = random_g(&mut rng);
            let g2 = random_g(&mut rng);
            let lhs = act(&act(&q, &g1), &g2);
            let rhs = act(&q, &g2.mul(&g1));
            for (a, b) in lhs.upper().iter().zip(rhs.upper()) {
                assert_relative_eq!(*a, b, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn sylvester_signature_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let q = act(&TernaryForm::q0(), &random_g(&mut rng));
            assert_eq!(signature(q.matrix()), Some((2, 1)));
            assert!((q.determinant().abs() - 1.0).abs() < DET_TOLERANCE);
        }
    }

    #[test]
    fn normalize_cases() {
        let d = |a: f64, b: f64, c: f64| Matrix3::from_diagonal(&nalgebra::Vector3::new(a, b, c));
        assert_eq!(normalize(&d(1.0, 1.0, -1.0)).unwrap(), TernaryForm::q0());
        let n = normalize(&d(8.0, 8.0, -8.0)).unwrap();
        for (a, b) in n.upper().iter().zip(TernaryForm::q0().upper()) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(matches!(
            normalize(&d(1.0, 1.0, 1.0)),
            Err(Error::WrongSignature { .. })
        ));
        assert!(matches!(
            normalize(&d(1.0, -1.0, -1.0)),
            Err(Error::WrongSignature { .. })
        ));
        assert!(matches!(
            normalize(&d(1.0, 1.0, 0.0)),
            Err(Error::ZeroDeterminant { .. })
        ));
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let q = act(&TernaryForm::q0(), &random_g(&mut rng));
            let scaled = q.matrix() * rng.random_range(0.1..10.0);
            let once = normalize(&scaled).unwrap();
            let twice = normalize(once.matrix()).unwrap();
            for (a, b) in once.upper().iter().zip(twice.upper()) {
                assert_relative_eq!(*a, b, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn json_is_upper_triangle() {
        let g = GroupElement::new(Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, 0.5, 1.0)))
            .unwrap();
        let q = act(&TernaryForm::q0(), &g);
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(json, "[4.0,0.0,0.0,0.25,0.0,-1.0]");
        let back: TernaryForm = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn group_element_rejects_bad_determinant() {
        assert!(GroupElement::new(Matrix3::identity() * 2.0).is_err());
        assert!(GroupElement::normalized(-Matrix3::<f64>::identity()).is_err());
    }
}
