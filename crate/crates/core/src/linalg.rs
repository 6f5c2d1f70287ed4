//! Bipartite states, reduced density matrices and Schmidt decompositions.
//!
//! Everything here is a pure function of its inputs; all values are immutable
//! after construction. Eigen- and Schmidt decompositions are made
//! deterministic by sorting probabilities in descending order and fixing the
//! phase of each vector so that its largest-magnitude entry is real and
//! positive. Ties inside a degeneracy cluster are broken lexicographically on
//! the phase-fixed vectors; clusters are reported to the caller and never
//! silently rotated.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const NORM_TOLERANCE: f64 = 1e-8;
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-10;
pub const UNITARITY_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_DEGENERACY_TOLERANCE: f64 = 1e-9;

/// Which factor of the bipartition to keep under the partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    APrime,
}

/// A pure state of a bipartite system, stored as the `dim_a x dim_b`
/// amplitude matrix with entry `(i, j)` multiplying `|i>_A (x) |j>_A'`.
#[derive(Debug, Clone)]
pub struct BipartiteState {
    amplitudes: CMat,
}

impl BipartiteState {
    /// Wraps an amplitude matrix, rejecting inputs whose Frobenius norm
    /// deviates from 1 by more than `NORM_TOLERANCE`.
    pub fn new(amplitudes: CMat) -> Result<Self> {
        let deviation = (amplitudes.norm() - 1.0).abs();
        if deviation > NORM_TOLERANCE {
            return Err(Error::NotNormalized {
                deviation,
                tolerance: NORM_TOLERANCE,
            });
        }
        Ok(Self { amplitudes })
    }

    /// Rescales the amplitudes to unit norm before wrapping them.
    pub fn normalized(amplitudes: CMat) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                message: "zero state cannot be normalized".into(),
            });
        }
        Ok(Self {
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    pub fn dim_a(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn dim_b(&self) -> usize {
        self.amplitudes.ncols()
    }

    pub fn amplitudes(&self) -> &CMat {
        &self.amplitudes
    }

    /// The state as a vector on the joint space, row-major:
    /// entry `i * dim_b + j` is amplitude `(i, j)`.
    pub fn joint_vector(&self) -> CVec {
        let (na, nb) = (self.dim_a(), self.dim_b());
        CVec::from_fn(na * nb, |k, _| self.amplitudes[(k / nb, k % nb)])
    }

    /// Rebuilds a state from a joint-space vector.
    pub fn from_joint(joint: &CVec, dim_a: usize, dim_b: usize) -> Result<Self> {
        if joint.len() != dim_a * dim_b {
            return Err(Error::DimensionMismatch {
                message: format!(
                    "joint vector has length {} but dim_a * dim_b = {}",
                    joint.len(),
                    dim_a * dim_b
                ),
            });
        }
        Self::new(CMat::from_fn(dim_a, dim_b, |i, j| joint[i * dim_b + j]))
    }
}

/// A Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: CMat,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace. Positivity is checked where the
    /// spectrum is actually computed ([`eigen_decompose`]).
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                message: format!("{}x{} matrix is not square", entries.nrows(), entries.ncols()),
            });
        }
        let herm = hermiticity_deviation(&entries);
        if herm > HERMITICITY_TOLERANCE {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let trace_dev = (entries.trace().re - 1.0).abs().max(entries.trace().im.abs());
        if trace_dev > TRACE_TOLERANCE {
            return Err(Error::BadTrace { deviation: trace_dev });
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }
}

/// Spectral decomposition of a density matrix: probabilities sorted in
/// descending order, phase-fixed orthonormal eigenvectors (one column per
/// probability) and the clusters of indices that are degenerate within
/// `degeneracy_tolerance`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub probabilities: Vec<f64>,
    pub vectors: CMat,
    pub degeneracy_tolerance: f64,
    /// Maximal runs of indices whose probabilities differ pairwise-adjacently
    /// by less than the tolerance. Singletons are omitted.
    pub clusters: Vec<Vec<usize>>,
}

impl SpectralDecomposition {
    /// Rebuilds `sum_i p_i |v_i><v_i|`.
    pub fn reconstruct(&self) -> CMat {
        let n = self.vectors.nrows();
        let mut out = CMat::zeros(n, n);
        for (k, &p) in self.probabilities.iter().enumerate() {
            let v = self.vectors.column(k);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += C64::new(p, 0.0) * v[i] * v[j].conj();
                }
            }
        }
        out
    }
}

/// Schmidt decomposition `|Psi> = sum_i c_i |psi_i> (x) |psi'_i>` with
/// coefficients sorted in descending order.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    /// Columns are the `|psi_i>` in H_A.
    pub left_vectors: CMat,
    /// Columns are the `|psi'_i>` in H_A'.
    pub right_vectors: CMat,
}

impl SchmidtDecomposition {
    /// Rebuilds the amplitude matrix `sum_i c_i |psi_i><conj psi'_i|`.
    pub fn reconstruct(&self) -> CMat {
        let (na, nb) = (self.left_vectors.nrows(), self.right_vectors.nrows());
        let mut out = CMat::zeros(na, nb);
        for (k, &c) in self.coefficients.iter().enumerate() {
            let l = self.left_vectors.column(k);
            let r = self.right_vectors.column(k);
            for i in 0..na {
                for j in 0..nb {
                    out[(i, j)] += C64::new(c, 0.0) * l[i] * r[j];
                }
            }
        }
        out
    }

    /// Joint-space vector of branch `k`, row-major over (A, A').
    pub fn joint_branch(&self, k: usize) -> CVec {
        let (na, nb) = (self.left_vectors.nrows(), self.right_vectors.nrows());
        let l = self.left_vectors.column(k);
        let r = self.right_vectors.column(k);
        CVec::from_fn(na * nb, |m, _| l[m / nb] * r[m % nb])
    }
}

fn hermiticity_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Partial trace of `|state><state|` over the complementary factor.
pub fn reduced_density_matrix(state: &BipartiteState, side: Side) -> Result<DensityMatrix> {
    let psi = state.amplitudes();
    let rho = match side {
        // rho_ik = sum_j Psi_ij conj(Psi_kj)
        Side::A => psi * psi.adjoint(),
        // rho'_jl = sum_i Psi_ij conj(Psi_il) = (Psi^H Psi)^T
        Side::APrime => (psi.adjoint() * psi).transpose(),
    };
    DensityMatrix::new(rho)
}

/// Rotates a vector so its largest-magnitude entry is real and positive.
/// The first index attaining the maximum wins.
fn phase_fix(v: &mut CVec) {
    let mut best = 0;
    let mut best_mag = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best] / C64::new(best_mag, 0.0);
        let rot = phase.conj();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

fn lex_less(a: &CVec, b: &CVec) -> bool {
    lex_cmp(a, b) == std::cmp::Ordering::Less
}

fn lex_cmp(a: &CVec, b: &CVec) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        if x.re != y.re {
            return x.re.partial_cmp(&y.re).unwrap_or(std::cmp::Ordering::Equal);
        }
        if x.im != y.im {
            return x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal);
        }
    }
    std::cmp::Ordering::Equal
}

/// Sorted, phase-fixed spectral decomposition of a density matrix.
///
/// Probabilities are sorted in descending order; pairs within
/// `degeneracy_tolerance` are ordered lexicographically on their phase-fixed
/// eigenvectors and reported as clusters. Two calls on the same input produce
/// bit-identical results.
pub fn eigen_decompose(
    rho: &DensityMatrix,
    degeneracy_tolerance: f64,
) -> Result<SpectralDecomposition> {
    let herm = hermiticity_deviation(rho.entries());
    if herm > HERMITICITY_TOLERANCE {
        return Err(Error::NotHermitian { deviation: herm });
    }
    let eig = rho.entries().clone().symmetric_eigen();
    let n = rho.dim();

    let mut items: Vec<(f64, CVec)> = (0..n)
        .map(|k| {
            let mut v: CVec = eig.eigenvectors.column(k).into_owned();
            phase_fix(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();

    // numerical PSD check
    if let Some(min) = items.iter().map(|(p, _)| *p).reduce(f64::min) {
        if min < -1e-10 {
            return Err(Error::InvalidParameter {
                name: "rho",
                message: format!("smallest eigenvalue {min:.3e} below -1e-10; not PSD"),
            });
        }
    }

    // strict descending sort first (a total order), then a lexicographic
    // reorder within each adjacent-gap cluster; mixing the tolerance into a
    // single comparator would not be transitive
    items.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| lex_cmp(&a.1, &b.1))
    });
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        let joined = i < n && (items[i - 1].0 - items[i].0).abs() < degeneracy_tolerance;
        if !joined {
            if i - start > 1 {
                items[start..i].sort_by(|a, b| lex_cmp(&a.1, &b.1));
                clusters.push((start..i).collect());
            }
            start = i;
        }
    }

    let probabilities: Vec<f64> = items.iter().map(|(p, _)| *p).collect();
    let mut vectors = CMat::zeros(n, n);
    for (k, (_, v)) in items.iter().enumerate() {
        vectors.set_column(k, v);
    }

    Ok(SpectralDecomposition {
        probabilities,
        vectors,
        degeneracy_tolerance,
        clusters,
    })
}

/// Schmidt decomposition via SVD of the amplitude matrix. Coefficients are
/// sorted descending; left vectors are phase-fixed and the compensating phase
/// is carried by the right vectors so the reconstruction is exact.
pub fn schmidt_decompose(state: &BipartiteState) -> Result<SchmidtDecomposition> {
    let (na, nb) = (state.dim_a(), state.dim_b());
    let svd = state.amplitudes().clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let k = svd.singular_values.len();

    let mut items: Vec<(f64, CVec, CVec)> = (0..k)
        .map(|m| {
            let mut l: CVec = u.column(m).into_owned();
            // right vector m is row m of V^H, unconjugated: Psi = sum c |l><r^T|
            let mut r = CVec::from_fn(nb, |j, _| vt[(m, j)]);
            let before = l.clone();
            phase_fix(&mut l);
            // carry the phase over to the right factor
            if let Some(i) = (0..na).find(|&i| before[i].norm() > 0.0) {
                let rot = l[i] / before[i];
                for z in r.iter_mut() {
                    *z *= rot.conj();
                }
            }
            (svd.singular_values[m], l, r)
        })
        .collect();

    items.sort_by(|a, b| {
        if (a.0 - b.0).abs() < DEFAULT_DEGENERACY_TOLERANCE {
            if lex_less(&a.1, &b.1) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        } else {
            b.0.partial_cmp(&a.0).unwrap()
        }
    });

    let coefficients: Vec<f64> = items.iter().map(|(c, _, _)| *c).collect();
    let mut left_vectors = CMat::zeros(na, k);
    let mut right_vectors = CMat::zeros(nb, k);
    for (m, (_, l, r)) in items.iter().enumerate() {
        left_vectors.set_column(m, l);
        right_vectors.set_column(m, r);
    }

    Ok(SchmidtDecomposition {
        coefficients,
        left_vectors,
        right_vectors,
    })
}

/// Applies a unitary on the joint space (row-major ordering, see
/// [`BipartiteState::joint_vector`]).
pub fn apply_unitary(state: &BipartiteState, u: &CMat) -> Result<BipartiteState> {
    let dim = state.dim_a() * state.dim_b();
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::DimensionMismatch {
            message: format!("unitary is {}x{}, joint space has dimension {dim}", u.nrows(), u.ncols()),
        });
    }
    let gram = u.adjoint() * u;
    let mut dev: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let expect = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            dev = dev.max((gram[(i, j)] - expect).norm());
        }
    }
    if dev > UNITARITY_TOLERANCE {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let joint = u * state.joint_vector();
    BipartiteState::from_joint(&joint, state.dim_a(), state.dim_b())
}
