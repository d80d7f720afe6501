//! Dense complex linear algebra on the 4-dimensional two-mode subspace.
//!
//! Basis ordering is fixed throughout the crate as
//! `{|e0,e0>, |e1,e1>, |e0,e1>, |e1,e0>}`. Every operator here is 4x4, so the
//! eigensolver is chosen for accuracy only.

use std::fmt;
use std::ops::{Add, Sub};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Entrywise tolerance for `H[i][j] == conj(H[j][i])`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on trace and negative eigenvalues for density operators and POVM elements.
pub const DENSITY_TOL: f64 = 1e-10;
/// Eigenvalues at or below this are treated as exact zeros in entropies.
pub const ENTROPY_CLAMP: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Probability amplitudes on the two-mode subspace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeVector(Vector4<Complex64>);

impl ModeVector {
    pub fn new(amplitudes: [Complex64; 4]) -> Self {
        ModeVector(Vector4::from(amplitudes))
    }

    pub fn from_real(amplitudes: [f64; 4]) -> Self {
        ModeVector(Vector4::from(amplitudes.map(|a| Complex64::new(a, 0.0))))
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn as_vector(&self) -> &Vector4<Complex64> {
        &self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm_squared().sqrt();
        (n > 0.0).then(|| ModeVector(self.0.unscale(n)))
    }

    /// `<self|other>`
    pub fn inner(&self, other: &ModeVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    /// `<v|H|v>`; real because `H` is hermitian.
    pub fn expectation(&self, op: &HermitianOperator) -> f64 {
        self.0.dotc(&(op.0 * self.0)).re
    }
}

/// A 4x4 complex matrix that has passed the hermiticity check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermitianOperator(Matrix4<Complex64>);

impl HermitianOperator {
    /// Validates hermiticity and returns the exactly-symmetrized operator.
    ///
    /// The error names the first offending entry pair in row-major order.
    pub fn try_new(m: Matrix4<Complex64>) -> Result<Self> {
        for row in 0..4 {
            for col in row..4 {
                let value = m[(row, col)];
                let mirror = m[(col, row)].conj();
                if !value.re.is_finite() || !value.im.is_finite() || (value - mirror).norm() > HERMITIAN_TOL {
                    return Err(Error::NonHermitian {
                        row,
                        col,
                        value: value.to_string(),
                        mirror: mirror.to_string(),
                    });
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    pub fn from_real_rows(rows: [[f64; 4]; 4]) -> Result<Self> {
        Self::try_new(Matrix4::from_fn(|i, j| Complex64::new(rows[i][j], 0.0)))
    }

    pub fn diagonal(d: [f64; 4]) -> Self {
        HermitianOperator(Matrix4::from_fn(|i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                ZERO
            }
        }))
    }

    pub fn identity() -> Self {
        Self::diagonal([1.0; 4])
    }

    pub fn zero() -> Self {
        HermitianOperator(Matrix4::zeros())
    }

    fn symmetrized(m: Matrix4<Complex64>) -> Self {
        HermitianOperator((m + m.adjoint()).unscale(2.0))
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianOperator(self.0.scale(s))
    }

    /// `U H U^dagger`. The caller supplies a unitary `U`.
    pub fn conjugate_by(&self, u: &Matrix4<Complex64>) -> Self {
        Self::symmetrized(u * self.0 * u.adjoint())
    }

    pub fn apply(&self, v: &ModeVector) -> ModeVector {
        ModeVector(self.0 * v.0)
    }

    /// Eigenvalues (descending) with matching orthonormal eigenvectors as columns.
    pub fn eigen(&self) -> ([f64; 4], Matrix4<Complex64>) {
        let eig = self.0.symmetric_eigen();
        let mut order = [0usize, 1, 2, 3];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.map(|k| eig.eigenvalues[k]);
        let vectors = Matrix4::from_fn(|i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    /// Unique PSD square root; eigenvalues below zero (rounding) are clamped.
    pub fn psd_sqrt(&self) -> Self {
        let (values, vectors) = self.eigen();
        let roots = Matrix4::from_fn(|i, j| {
            if i == j {
                Complex64::new(values[i].max(0.0).sqrt(), 0.0)
            } else {
                ZERO
            }
        });
        Self::symmetrized(vectors * roots * vectors.adjoint())
    }

    /// Eigenvalues `>= -1e-10`.
    pub fn check_psd(&self) -> Result<()> {
        let min = eigenvalues_hermitian(self)[3];
        if min < -DENSITY_TOL {
            return Err(Error::Validation(format!(
                "operator is not positive semidefinite: smallest eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    /// PSD with unit trace.
    pub fn check_density(&self) -> Result<()> {
        let trace = self.trace();
        if (trace - 1.0).abs() > DENSITY_TOL {
            return Err(Error::Validation(format!(
                "density operator must have trace 1, got {trace}"
            )));
        }
        self.check_psd()
    }
}

impl Add for HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> Self {
        HermitianOperator(self.0 + rhs.0)
    }
}

impl Sub for HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> Self {
        HermitianOperator(self.0 - rhs.0)
    }
}

impl fmt::Display for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..4 {
            let row: Vec<String> = (0..4)
                .map(|j| {
                    let z = self.0[(i, j)];
                    if z.im == 0.0 {
                        format!("{:>12.6}", z.re)
                    } else {
                        format!("{:>12.6}{:+.6}i", z.re, z.im)
                    }
                })
                .collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Spectrum in descending order.
pub fn eigenvalues_hermitian(op: &HermitianOperator) -> [f64; 4] {
    op.eigen().0
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(op: &HermitianOperator) -> f64 {
    eigenvalues_hermitian(op).iter().map(|l| l.abs()).sum()
}

/// `S(rho) = -Tr(rho log2 rho)` in bits, with `0 log 0 := 0`.
pub fn von_neumann_entropy(rho: &HermitianOperator) -> Result<f64> {
    rho.check_density()?;
    Ok(eigenvalues_hermitian(rho)
        .iter()
        .filter(|&&l| l > ENTROPY_CLAMP)
        .map(|&l| -l * l.log2())
        .sum())
}

/// `h(z) = -z log2 z - (1-z) log2 (1-z)`.
pub fn binary_entropy(z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain("z", z, "0 <= z <= 1"));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(z) + term(1.0 - z))
}

/// `|v><v|`
pub fn outer(v: &ModeVector) -> HermitianOperator {
    HermitianOperator::symmetrized(v.0 * v.0.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_spectrum(got: [f64; 4], want: [f64; 4]) {
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-10, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        assert_spectrum(eigenvalues_hermitian(&HermitianOperator::identity()), [1.0; 4]);
        let d = HermitianOperator::diagonal([0.0, 0.5, 0.0, 0.5]);
        assert_spectrum(eigenvalues_hermitian(&d), [0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn complex_offdiagonal_spectrum() {
        // [[2, i], [-i, 2]] has eigenvalues 3 and 1.
        let mut m = Matrix4::zeros();
        m[(0, 0)] = c(2.0, 0.0);
        m[(1, 1)] = c(2.0, 0.0);
        m[(0, 1)] = c(0.0, 1.0);
        m[(1, 0)] = c(0.0, -1.0);
        m[(3, 3)] = c(-1.0, 0.0);
        let op = HermitianOperator::try_new(m).unwrap();
        assert_spectrum(eigenvalues_hermitian(&op), [3.0, 1.0, 0.0, -1.0]);
        assert!((trace_norm(&op) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_names_entry_pair() {
        let mut m = Matrix4::zeros();
        m[(1, 2)] = c(0.5, 0.0);
        m[(2, 1)] = c(0.4, 0.0);
        match HermitianOperator::try_new(m) {
            Err(Error::NonHermitian { row: 1, col: 2, .. }) => {}
            other => panic!("expected NonHermitian(1,2), got {other:?}"),
        }
        let mut m = Matrix4::zeros();
        m[(3, 3)] = c(1.0, 1e-3);
        assert!(matches!(
            HermitianOperator::try_new(m),
            Err(Error::NonHermitian { row: 3, col: 3, .. })
        ));
    }

    #[test]
    fn trace_norm_examples() {
        assert_eq!(trace_norm(&HermitianOperator::diagonal([1.0, -1.0, 0.0, 0.0])), 2.0);
        assert_eq!(trace_norm(&HermitianOperator::zero()), 0.0);
    }

    #[test]
    fn entropy_examples() {
        let pure = outer(&ModeVector::from_real([0.6, 0.0, 0.8, 0.0]));
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-12);
        let half = HermitianOperator::diagonal([0.5, 0.5, 0.0, 0.0]);
        assert!((von_neumann_entropy(&half).unwrap() - 1.0).abs() < 1e-12);
        let mixed = HermitianOperator::diagonal([0.25; 4]);
        assert!((von_neumann_entropy(&mixed).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_bad_trace() {
        let op = HermitianOperator::diagonal([0.5, 0.4, 0.0, 0.0]);
        assert!(matches!(von_neumann_entropy(&op), Err(Error::Validation(_))));
    }

    #[test]
    fn entropy_rejects_negative_spectrum() {
        let op = HermitianOperator::diagonal([1.2, -0.2, 0.0, 0.0]);
        assert!(matches!(von_neumann_entropy(&op), Err(Error::Validation(_))));
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        // direct evaluation of the h formula
        assert!((binary_entropy(0.164840).unwrap() - 0.645_763_652_168_541_6).abs() < 1e-12);
        assert!(matches!(binary_entropy(-0.01), Err(Error::Domain { .. })));
        assert!(matches!(binary_entropy(1.01), Err(Error::Domain { .. })));
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn outer_examples() {
        let e0 = outer(&ModeVector::from_real([1.0, 0.0, 0.0, 0.0]));
        assert_eq!(e0, HermitianOperator::diagonal([1.0, 0.0, 0.0, 0.0]));
        let e1 = outer(&ModeVector::from_real([0.0, 1.0, 0.0, 0.0]));
        assert_eq!(e1, HermitianOperator::diagonal([0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn binary_entropy_matches_diagonal_von_neumann() {
        for i in 0..100 {
            let z = i as f64 / 99.0;
            let rho = HermitianOperator::diagonal([z, 1.0 - z, 0.0, 0.0]);
            let s = von_neumann_entropy(&rho).unwrap();
            assert!((s - binary_entropy(z).unwrap()).abs() < 1e-12, "z = {z}");
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let v = ModeVector::from_real([0.3, -0.2, 0.5, 0.1]);
        let w = ModeVector::new([c(0.1, 0.2), c(0.0, -0.4), c(0.3, 0.0), c(0.2, 0.1)]);
        let op = outer(&v) + outer(&w).scale(2.0) + HermitianOperator::diagonal([0.1, 0.0, 0.05, 0.0]);
        let root = op.psd_sqrt();
        let back = root.matrix() * root.matrix();
        assert!((back - op.matrix()).norm() < 1e-12);
    }

    fn arb_vector() -> impl Strategy<Value = ModeVector> {
        prop::array::uniform8(-1.0f64..1.0).prop_map(|a| {
            ModeVector::new([c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]), c(a[6], a[7])])
        })
    }

    fn arb_hermitian() -> impl Strategy<Value = HermitianOperator> {
        prop::array::uniform16(-1.0f64..1.0).prop_map(|a| {
            let m = Matrix4::from_fn(|i, j| c(a[4 * i + j], a[4 * j + i] * if i < j { 1.0 } else { -1.0 }));
            HermitianOperator::symmetrized(m)
        })
    }

    proptest! {
        #[test]
        fn spectrum_sums_to_trace(h in arb_hermitian()) {
            let sum: f64 = eigenvalues_hermitian(&h).iter().sum();
            prop_assert!((sum - h.trace()).abs() < 1e-10);
        }

        #[test]
        fn spectrum_is_descending(h in arb_hermitian()) {
            let l = eigenvalues_hermitian(&h);
            prop_assert!(l.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn trace_norm_bounds_trace(h in arb_hermitian(), v in arb_vector()) {
            prop_assert!(trace_norm(&h) + 1e-12 >= h.trace().abs());
            let psd = outer(&v);
            prop_assert!((trace_norm(&psd) - psd.trace()).abs() < 1e-10);
        }

        #[test]
        fn outer_is_rank_one(v in arb_vector()) {
            let l = eigenvalues_hermitian(&outer(&v));
            prop_assert!((l[0] - v.norm_squared()).abs() < 1e-10);
            for x in &l[1..] {
                prop_assert!(x.abs() < 1e-10);
            }
        }

        #[test]
        fn diagonal_entropy_is_permutation_invariant(raw in prop::array::uniform4(0.01f64..1.0), perm in Just([2usize, 0, 3, 1])) {
            let total: f64 = raw.iter().sum();
            let p = raw.map(|x| x / total);
            let q = [p[perm[0]], p[perm[1]], p[perm[2]], p[perm[3]]];
            let a = von_neumann_entropy(&HermitianOperator::diagonal(p)).unwrap();
            let b = von_neumann_entropy(&HermitianOperator::diagonal(q)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1e-12..=2.0 + 1e-12).contains(&a));
        }
    }
}
