//! Density matrices, displacement amplitudes and test-state families.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::RngCore;

use crate::field::{Dimension, DisplacementIndex};
use crate::matrix::{spectral_sum, vector_norm, ComplexMatrix};
use crate::qudit::{displacement, displacement_observable, displacement_trace};
use crate::rng::{complex_normal, substream};
use crate::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = -1e-9;

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        let defect = matrix.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {} is not 1", tr)));
        }
        let min = matrix.eigenvalues_hermitian()[0];
        if min < PSD_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:e} is negative")));
        }
        Ok(DensityMatrix { matrix })
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        DensityMatrix { matrix }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { matrix: ComplexMatrix::identity(dim).scale((1.0 / dim as f64).into()) }
    }

    /// `|ψ⟩⟨ψ|` for a nonzero vector, normalised.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm = vector_norm(psi);
        if psi.is_empty() || !norm.is_finite() || norm <= 0.0 {
            return Err(Error::InvalidState("state vector has zero or non-finite norm".into()));
        }
        let unit: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        Ok(DensityMatrix { matrix: ComplexMatrix::outer(&unit, &unit) })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `ρ*`, the entrywise conjugate in the computational basis.
    pub fn conj(&self) -> Self {
        DensityMatrix { matrix: self.matrix.conj() }
    }

    /// `Tr(O ρ)`.
    pub fn expectation(&self, observable: &ComplexMatrix) -> Complex64 {
        observable.trace_product(&self.matrix)
    }

    pub fn tensor(&self, other: &Self) -> Self {
        DensityMatrix { matrix: self.matrix.kron(&other.matrix) }
    }

    pub fn check_dim(&self, d: Dimension) -> Result<()> {
        if self.dim() != d.get() {
            return Err(Error::DimensionMismatch { expected: d.get(), found: self.dim() });
        }
        Ok(())
    }

    pub(crate) fn dimension(&self) -> Result<Dimension> {
        Dimension::new(self.dim())
    }
}

/// Clips negative eigenvalues of the Hermitian part and renormalises.
pub fn project_psd(matrix: &ComplexMatrix) -> Result<DensityMatrix> {
    let eig = matrix.hermitian_eigen();
    let clipped: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::InvalidState("no positive spectrum to project onto".into()));
    }
    let weights: Vec<f64> = clipped.iter().map(|x| x / total).collect();
    Ok(DensityMatrix { matrix: spectral_sum(&eig.vectors, &weights) })
}

/// Displacement amplitudes `y_{q,p}`, possibly partial.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeTable {
    d: Dimension,
    values: Vec<Option<Complex64>>,
}

impl AmplitudeTable {
    /// Table with only `y_{0,0} = 1` filled in.
    pub fn new(d: Dimension) -> Self {
        let mut values = alloc::vec![None; d.get() * d.get()];
        values[0] = Some(Complex64::new(1.0, 0.0));
        AmplitudeTable { d, values }
    }

    pub fn dimension(&self) -> Dimension {
        self.d
    }

    pub fn set(&mut self, idx: DisplacementIndex, y: Complex64) {
        self.values[idx.flat(self.d)] = Some(y);
    }

    pub fn get(&self, idx: DisplacementIndex) -> Option<Complex64> {
        self.values[idx.flat(self.d)]
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing() == 0
    }

    /// `(idx, y)` for every filled entry in index order.
    pub fn iter(&self) -> impl Iterator<Item = (DisplacementIndex, Complex64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|y| (DisplacementIndex::from_flat(self.d, k), y)))
    }

    /// Largest `|y*_{q,p} − y_{−q,−p}|` over filled pairs.
    pub fn conjugation_defect(&self) -> f64 {
        self.iter()
            .filter_map(|(idx, y)| self.get(idx.neg(self.d)).map(|z| (y.conj() - z).norm()))
            .fold(0.0, f64::max)
    }
}

/// `y_{q,p} = Tr(D_{q,p} ρ)` for all `d²` indices.
pub fn amplitudes(rho: &DensityMatrix) -> Result<AmplitudeTable> {
    let d = rho.dimension()?;
    amplitudes_in(d, rho)
}

pub fn amplitudes_in(d: Dimension, rho: &DensityMatrix) -> Result<AmplitudeTable> {
    rho.check_dim(d)?;
    let values = d.indices().map(|idx| Some(displacement_trace(d, idx, rho.matrix()))).collect();
    Ok(AmplitudeTable { d, values })
}

/// Raw Bloch reconstruction and its smallest eigenvalue.
#[derive(Clone, Debug)]
pub struct BlochReconstruction {
    pub matrix: ComplexMatrix,
    pub min_eigenvalue: f64,
}

impl BlochReconstruction {
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= PSD_TOL
    }
}

/// `ρ = (1/d) Σ_{q,p} y_{q,p} D†_{q,p}`.
pub fn bloch_reconstruct(table: &AmplitudeTable) -> Result<BlochReconstruction> {
    let missing = table.missing();
    if missing > 0 {
        return Err(Error::IncompleteTable(missing));
    }
    let d = table.d;
    let n = d.get();
    let mut acc = ComplexMatrix::zeros(n);
    for (idx, y) in table.iter() {
        let dag = displacement(d, idx).dagger();
        for i in 0..n {
            for j in 0..n {
                let z = dag[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    acc[(i, j)] += y * z;
                }
            }
        }
    }
    let matrix = acc.scale((1.0 / n as f64).into());
    let min_eigenvalue = matrix.eigenvalues_hermitian()[0];
    Ok(BlochReconstruction { matrix, min_eigenvalue })
}

/// Sign `r ∈ {+1, −1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn of(x: f64) -> Sign {
        if x >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestStateKind {
    MaximallyMixed,
    HaarPure,
    /// `(I + r ε E_{q,p})/d`.
    Spiked { idx: DisplacementIndex, sign: Sign, eps: f64 },
}

pub fn make_test_state(d: Dimension, kind: TestStateKind, seed: u64) -> Result<DensityMatrix> {
    match kind {
        TestStateKind::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(d.get())),
        TestStateKind::HaarPure => Ok(haar_pure(d.get(), &mut substream(seed, 0))),
        TestStateKind::Spiked { idx, sign, eps } => spiked_state(d, idx, sign, eps),
    }
}

pub fn spiked_state(d: Dimension, idx: DisplacementIndex, sign: Sign, eps: f64) -> Result<DensityMatrix> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must lie in (0, 1)")));
    }
    if idx.is_zero() {
        return Err(Error::InvalidParameter("spiked state needs idx ≠ (0,0)".into()));
    }
    let e = displacement_observable(d, idx);
    let n = d.get() as f64;
    let m = &ComplexMatrix::identity(d.get()) + &e.scale((sign.value() * eps).into());
    let m = m.scale((1.0 / n).into());
    // Hermitian by construction; only the spectrum needs checking.
    if m.eigenvalues_hermitian()[0] < PSD_TOL {
        return Err(Error::InvalidParameter(format!("eps = {eps} makes the spiked state non-positive")));
    }
    Ok(DensityMatrix::new_unchecked(m))
}

/// Haar-random pure state of dimension `n`.
pub fn haar_pure<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> DensityMatrix {
    loop {
        let psi: Vec<Complex64> = (0..n).map(|_| complex_normal(rng)).collect();
        if let Ok(rho) = DensityMatrix::pure(&psi) {
            return rho;
        }
    }
}

/// Random mixed state `G G† / Tr(G G†)` with a `n × rank` Ginibre matrix `G`.
pub fn random_mixed<R: RngCore + ?Sized>(n: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let cols: Vec<Vec<Complex64>> = (0..rank.max(1)).map(|_| (0..n).map(|_| complex_normal(rng)).collect()).collect();
    let mut m = ComplexMatrix::zeros(n);
    for v in &cols {
        m = &m + &ComplexMatrix::outer(v, v);
    }
    let tr = m.trace().re;
    DensityMatrix::new_unchecked(m.scale((1.0 / tr).into()))
}

/// Random matrix with i.i.d. complex Gaussian entries.
pub fn random_matrix<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| complex_normal(rng))
}

/// Random Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = random_matrix(n, rng);
    (&g + &g.dagger()).scale(0.5.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: usize) -> Dimension {
        Dimension::new(d).unwrap()
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let bad_trace = ComplexMatrix::identity(2);
        assert!(matches!(DensityMatrix::new(bad_trace), Err(Error::InvalidState(_))));
        let mut nh = ComplexMatrix::identity(2).scale(0.5.into());
        nh[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(matches!(DensityMatrix::new(nh), Err(Error::NotHermitian(_))));
        let neg = ComplexMatrix::diagonal(&[Complex64::new(1.5, 0.0), Complex64::new(-0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(neg.clone()), Err(Error::InvalidState(_))));
        let fixed = project_psd(&neg).unwrap();
        assert!((fixed.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_state_amplitudes() {
        let d = dim(5);
        let t = amplitudes(&DensityMatrix::maximally_mixed(5)).unwrap();
        for (idx, y) in t.iter() {
            let expected = if idx.is_zero() { 1.0 } else { 0.0 };
            assert!((y - expected).norm() < 1e-15);
        }
        assert_eq!(t.dimension(), d);
    }

    #[test]
    fn ground_state_amplitudes() {
        let mut e0 = alloc::vec![Complex64::new(0.0, 0.0); 3];
        e0[0] = Complex64::new(1.0, 0.0);
        let t = amplitudes(&DensityMatrix::pure(&e0).unwrap()).unwrap();
        for (idx, y) in t.iter() {
            let expected = if idx.q == 0 { 1.0 } else { 0.0 };
            assert!((y - expected).norm() < 1e-15, "{idx}");
        }
    }

    #[test]
    fn bloch_round_trip_and_errors() {
        let d = dim(5);
        let rho = make_test_state(d, TestStateKind::HaarPure, 11).unwrap();
        let rec = bloch_reconstruct(&amplitudes(&rho).unwrap()).unwrap();
        assert!(rec.matrix.max_abs_diff(rho.matrix()) < 1e-10);
        assert!(rec.is_psd());
        let origin = bloch_reconstruct(&{
            let mut t = AmplitudeTable::new(d);
            for idx in d.nonzero_indices() {
                t.set(idx, Complex64::new(0.0, 0.0));
            }
            t
        })
        .unwrap();
        assert!(origin.matrix.max_abs_diff(DensityMatrix::maximally_mixed(5).matrix()) < 1e-15);
        assert_eq!(bloch_reconstruct(&AmplitudeTable::new(d)).unwrap_err(), Error::IncompleteTable(24));
    }

    #[test]
    fn noisy_table_reports_negative_spectrum() {
        let d = dim(3);
        let mut t = AmplitudeTable::new(d);
        for idx in d.nonzero_indices() {
            t.set(idx, Complex64::new(0.9, 0.0));
        }
        let rec = bloch_reconstruct(&t).unwrap();
        assert!(!rec.is_psd());
    }

    #[test]
    fn test_states() {
        let d = dim(3);
        let mm = make_test_state(d, TestStateKind::MaximallyMixed, 0).unwrap();
        assert!(mm.matrix().max_abs_diff(&ComplexMatrix::identity(3).scale((1.0 / 3.0).into())) < 1e-15);
        let spiked = make_test_state(
            d,
            TestStateKind::Spiked { idx: DisplacementIndex { q: 0, p: 1 }, sign: Sign::Plus, eps: 0.3 },
            0,
        )
        .unwrap();
        let ev = spiked.matrix().eigenvalues_hermitian();
        assert!(ev.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!((spiked.matrix().trace().re - 1.0).abs() < 1e-12);
        assert!(DensityMatrix::new(spiked.matrix().clone()).is_ok());
        let a = make_test_state(dim(5), TestStateKind::HaarPure, 7).unwrap();
        let b = make_test_state(dim(5), TestStateKind::HaarPure, 7).unwrap();
        assert_eq!(a, b);
        for eps in [0.0, 1.0, -0.2] {
            let kind = TestStateKind::Spiked { idx: DisplacementIndex { q: 1, p: 0 }, sign: Sign::Minus, eps };
            assert!(make_test_state(d, kind, 0).is_err());
        }
    }

    #[test]
    fn spiked_amplitudes_have_expected_modulus() {
        let d = dim(7);
        let idx = DisplacementIndex { q: 1, p: 2 };
        let rho = spiked_state(d, idx, Sign::Minus, 0.4).unwrap();
        let t = amplitudes(&rho).unwrap();
        let target = 0.4 / 2f64.sqrt();
        assert!((t.get(idx).unwrap().norm() - target).abs() < 1e-12);
        assert!((t.get(idx.neg(d)).unwrap().norm() - target).abs() < 1e-12);
        for (k, y) in t.iter() {
            if k != idx && k != idx.neg(d) && !k.is_zero() {
                assert!(y.norm() < 1e-12);
            }
        }
    }
}
