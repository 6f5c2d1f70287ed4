//! Coarse-grained particle models on a spatial lattice: the Gaussian
//! decoherence kernel and its localization transition, block coarse-graining,
//! a boundary-respecting image-sum kernel for a particle in a box, and a
//! spin-bath environment model.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::linalg::{C64, CMat, CVec, DensityMatrix};
use crate::{Error, Result};

/// Uniform spatial grid with spacing `epsilon`; site `j` sits at
/// `origin + j * epsilon`.
#[derive(Debug, Clone)]
pub struct LatticeGrid {
    pub epsilon: f64,
    pub n_sites: usize,
    pub origin: f64,
}

impl LatticeGrid {
    pub fn new(epsilon: f64, n_sites: usize, origin: f64) -> Result<Self> {
        if epsilon <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                message: format!("lattice spacing must be positive, got {epsilon}"),
            });
        }
        if n_sites == 0 {
            return Err(Error::InvalidParameter {
                name: "n_sites",
                message: "grid needs at least one site".into(),
            });
        }
        Ok(Self { epsilon, n_sites, origin })
    }

    pub fn x(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.epsilon
    }

    pub fn span(&self) -> f64 {
        (self.n_sites.saturating_sub(1)) as f64 * self.epsilon
    }
}

const LATTICE_NORM_TOLERANCE: f64 = 1e-10;

/// A particle state sampled on a lattice, normalized in the grid measure:
/// `epsilon * sum_j |psi_j|^2 = 1`.
#[derive(Debug, Clone)]
pub struct LatticeWaveFunction {
    pub grid: LatticeGrid,
    pub amplitudes: CVec,
}

impl LatticeWaveFunction {
    pub fn new(grid: LatticeGrid, amplitudes: CVec) -> Result<Self> {
        if amplitudes.len() != grid.n_sites {
            return Err(Error::DimensionMismatch {
                message: format!(
                    "{} amplitudes on a grid of {} sites",
                    amplitudes.len(),
                    grid.n_sites
                ),
            });
        }
        let total = grid.epsilon * amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if (total - 1.0).abs() > LATTICE_NORM_TOLERANCE {
            return Err(Error::NotNormalized {
                deviation: (total - 1.0).abs(),
                tolerance: LATTICE_NORM_TOLERANCE,
            });
        }
        Ok(Self { grid, amplitudes })
    }

    /// Rescales arbitrary sampled amplitudes into the grid measure.
    pub fn normalized(grid: LatticeGrid, amplitudes: CVec) -> Result<Self> {
        let total = grid.epsilon * amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if total <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                message: "zero wave function cannot be normalized".into(),
            });
        }
        let scale = C64::new(1.0 / total.sqrt(), 0.0);
        Self::new(grid, amplitudes.map(|z| z * scale))
    }

    /// Gaussian packet `exp(-(x - center)^2 / (4 sigma^2))`, normalized on
    /// the grid; `sigma` is the position standard deviation of `|psi|^2`.
    pub fn gaussian(grid: LatticeGrid, center: f64, sigma: f64) -> Result<Self> {
        if sigma <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                message: format!("packet width must be positive, got {sigma}"),
            });
        }
        let amps = CVec::from_fn(grid.n_sites, |j, _| {
            let d = grid.x(j) - center;
            C64::new((-d * d / (4.0 * sigma * sigma)).exp(), 0.0)
        });
        Self::normalized(grid, amps)
    }

    /// Constant-amplitude state over the whole grid.
    pub fn uniform(grid: LatticeGrid) -> Result<Self> {
        let amps = CVec::from_element(grid.n_sites, C64::new(1.0, 0.0));
        Self::normalized(grid, amps)
    }
}

/// Position-basis density matrix after Gaussian decoherence at coherence
/// length `ell`:
///
/// `rho_jk = epsilon * psi_j conj(psi_k) * exp(-(x_j - x_k)^2 / ell^2)`.
///
/// The diagonal is untouched, so the trace is 1 by the wave-function
/// normalization.
pub fn gaussian_decohered_rho(psi: &LatticeWaveFunction, ell: f64) -> Result<DensityMatrix> {
    if ell <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "ell",
            message: format!("coherence length must be positive, got {ell}"),
        });
    }
    let n = psi.grid.n_sites;
    let eps = psi.grid.epsilon;
    let mut rho = CMat::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let d = psi.grid.x(j) - psi.grid.x(k);
            let damp = (-d * d / (ell * ell)).exp();
            let v = psi.amplitudes[j] * psi.amplitudes[k].conj() * eps * damp;
            rho[(j, k)] = v;
            rho[(k, j)] = v.conj();
        }
    }
    DensityMatrix::new(rho)
}

/// Spectrum of [`gaussian_decohered_rho`] computed with high *relative*
/// accuracy, as squared singular values of an explicit square-root factor.
///
/// The kernel splits exactly as
/// `exp(-(x-y)^2/ell^2) = sum_m A_m(x) A_m(y)` with
/// `A_m(x) = exp(-x^2/ell^2) (sqrt(2) x / ell)^m / sqrt(m!)`, so
/// `rho = B B^T` for the real factor `B_jm = sqrt(eps) psi_j A_m(x_j)`.
/// Small eigenvalues come out with relative error on the order of
/// `machine_eps * sqrt(p_0 / p_n)`, far below the absolute-accuracy floor
/// `machine_eps * p_0` of a dense eigensolver. Requires a real nonnegative
/// wave function (the factor must stay real).
pub fn gaussian_factored_spectrum(psi: &LatticeWaveFunction, ell: f64) -> Result<Vec<f64>> {
    if ell <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "ell",
            message: format!("coherence length must be positive, got {ell}"),
        });
    }
    if psi.amplitudes.iter().any(|z| z.im != 0.0 || z.re < 0.0) {
        return Err(Error::InvalidParameter {
            name: "psi",
            message: "factored spectrum needs a real nonnegative wave function".into(),
        });
    }
    let n = psi.grid.n_sites;
    let eps = psi.grid.epsilon;
    // expansion order: the series in 2 x y / ell^2 is superexponentially
    // convergent once m exceeds max(2 x^2 / ell^2); add a fixed margin
    let s = (0..n)
        .map(|j| {
            let x = psi.grid.x(j);
            2.0 * x * x / (ell * ell)
        })
        .fold(0.0f64, f64::max);
    let m_max = (s.ceil() as usize + 60).min(4 * n.max(16));
    let mut b = DMatrix::<f64>::zeros(n, m_max);
    for j in 0..n {
        let x = psi.grid.x(j);
        let base = eps.sqrt() * psi.amplitudes[j].re * (-x * x / (ell * ell)).exp();
        let ratio = std::f64::consts::SQRT_2 * x / ell;
        let mut term = base;
        for m in 0..m_max {
            b[(j, m)] = term;
            term *= ratio / ((m + 1) as f64).sqrt();
        }
    }
    let svd = b.svd(false, false);
    let mut probs: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    probs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    probs.truncate(n);
    Ok(probs)
}

/// Decoherence factor for a particle confined to `[0, well_width]`, built
/// from Gaussian images with period `2 * well_width` so that it vanishes at
/// both walls:
///
/// `D(x, y) = sum_n [exp(-a(x-y-2nL)^2) - exp(-a(x+y-2nL)^2)]`.
///
/// The sum is truncated once additional images contribute less than 1e-16.
pub fn image_sum_factor(a: f64, well_width: f64, x: f64, y: f64) -> f64 {
    let period = 2.0 * well_width;
    let term = |u: f64| (-a * u * u).exp();
    let mut total = term(x - y) - term(x + y);
    for n in 1..10_000 {
        let shift = n as f64 * period;
        let add = term(x - y - shift) - term(x + y - shift) + term(x - y + shift)
            - term(x + y + shift);
        total += add;
        let worst = term((x - y).abs() + shift - period).max(term((x + y).abs() + shift - period));
        if worst < 1e-16 {
            break;
        }
    }
    total
}

/// Density matrix `psi(x) conj(psi(y)) D(x, y)` with the boundary-respecting
/// image-sum factor, trace-normalized. The grid must lie strictly inside
/// `(0, well_width)`. Unlike the free-space kernel the image sum does not fix
/// the diagonal, so the trace is normalized explicitly.
pub fn image_sum_decohered_rho(
    psi: &LatticeWaveFunction,
    a: f64,
    well_width: f64,
) -> Result<DensityMatrix> {
    if a <= 0.0 || well_width <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "a",
            message: format!("kernel strength and well width must be positive, got a = {a}, L = {well_width}"),
        });
    }
    let n = psi.grid.n_sites;
    if psi.grid.x(0) <= 0.0 || psi.grid.x(n - 1) >= well_width {
        return Err(Error::InvalidParameter {
            name: "grid",
            message: "grid sites must lie strictly inside the well".into(),
        });
    }
    let mut rho = CMat::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let d = image_sum_factor(a, well_width, psi.grid.x(j), psi.grid.x(k));
            let v = psi.amplitudes[j] * psi.amplitudes[k].conj() * C64::new(d, 0.0);
            rho[(j, k)] = v;
            rho[(k, j)] = v.conj();
        }
    }
    let trace = rho.trace().re;
    if trace <= 0.0 {
        return Err(Error::BadTrace { deviation: (trace - 1.0).abs() });
    }
    rho /= C64::new(trace, 0.0);
    DensityMatrix::new(rho)
}

/// Coherence length `ell_prefactor / sqrt(t)`.
pub fn coherence_length(t: f64, ell_prefactor: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!("time must be positive, got {t}"),
        });
    }
    Ok(ell_prefactor / t.sqrt())
}

/// Clamps a coherence length to a physical floor. Returns the effective
/// length and whether clamping occurred.
pub fn clamp_coherence_length(ell: f64, ell_min: f64) -> (f64, bool) {
    if ell < ell_min {
        (ell_min, true)
    } else {
        (ell, false)
    }
}

/// Inverse-participation-ratio localization length `epsilon / sum_j |v_j|^4`
/// of a unit vector on the grid. A single-site vector gives `epsilon`; a
/// uniform vector over `n` sites gives `n * epsilon`.
pub fn localization_length(vector: &CVec, epsilon: f64) -> Result<f64> {
    let norm = vector.norm();
    if norm == 0.0 {
        return Err(Error::InvalidParameter {
            name: "vector",
            message: "zero vector has no localization length".into(),
        });
    }
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { deviation: (norm - 1.0).abs(), tolerance: 1e-8 });
    }
    let ipr: f64 = vector.iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum();
    Ok(epsilon / ipr)
}

/// Block probabilities `p_j = epsilon * sum_{sites in block j} |psi|^2`.
/// Trailing sites that do not fill a block are padded with zero amplitude.
pub fn coarse_grained_probabilities(psi: &LatticeWaveFunction, block: usize) -> Result<Vec<f64>> {
    if block == 0 {
        return Err(Error::InvalidParameter {
            name: "block",
            message: "block size must be at least 1".into(),
        });
    }
    let n = psi.grid.n_sites;
    let n_blocks = n.div_ceil(block);
    let eps = psi.grid.epsilon;
    let mut probs = vec![0.0; n_blocks];
    for (j, z) in psi.amplitudes.iter().enumerate() {
        probs[j / block] += eps * z.norm_sqr();
    }
    Ok(probs)
}

/// Environment of `N` independent spins coupled to the particle position.
#[derive(Debug, Clone)]
pub struct SpinBath {
    pub couplings: Vec<f64>,
    /// `(2/N) * sum_a g_a^2`, cached at construction.
    pub lambda_sq: f64,
}

impl SpinBath {
    pub fn new(couplings: Vec<f64>) -> Result<Self> {
        if couplings.is_empty() {
            return Err(Error::InvalidParameter {
                name: "couplings",
                message: "spin bath needs at least one spin".into(),
            });
        }
        let n = couplings.len() as f64;
        let lambda_sq = 2.0 / n * couplings.iter().map(|g| g * g).sum::<f64>();
        Ok(Self { couplings, lambda_sq })
    }

    pub fn n_spins(&self) -> usize {
        self.couplings.len()
    }
}

/// Environment-state overlap across a position split `dx` after time `t`.
#[derive(Debug, Clone, Copy)]
pub struct BathOverlap {
    /// `prod_a cos(2 g_a dx t)`.
    pub exact: f64,
    /// `exp(-N lambda^2 t^2 dx^2)`.
    pub gaussian: f64,
}

pub fn spin_bath_overlap(bath: &SpinBath, t: f64, dx: f64) -> BathOverlap {
    let exact = bath
        .couplings
        .iter()
        .map(|g| (2.0 * g * dx * t).cos())
        .product();
    let n = bath.n_spins() as f64;
    let gaussian = (-n * bath.lambda_sq * t * t * dx * dx).exp();
    BathOverlap { exact, gaussian }
}

/// Convenience: eigenvalue spectrum with per-eigenvector localization
/// lengths, as emitted by the localization scenario.
pub fn localization_profile(
    psi: &LatticeWaveFunction,
    ell: f64,
    degeneracy_tolerance: f64,
) -> Result<Vec<(f64, f64)>> {
    let rho = gaussian_decohered_rho(psi, ell)?;
    let spec = crate::linalg::eigen_decompose(&rho, degeneracy_tolerance)?;
    let eps = psi.grid.epsilon;
    spec.probabilities
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let v: DVector<Complex<f64>> = spec.vectors.column(k).into_owned();
            Ok((p, localization_length(&v, eps)?))
        })
        .collect()
}
