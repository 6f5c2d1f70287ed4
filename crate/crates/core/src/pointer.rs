//! Measurement-device models: pointer states defined purely by their overlap
//! (Gram) schedule, collapse-time estimates, avoided-crossing spectra, the
//! environment-split block structure and imperfect devices.
//!
//! Pointer states are never modeled microscopically. Every quantity of
//! interest depends only on the pairwise overlaps, so devices are specified
//! by a Gram matrix and realized as concrete vectors only when a matrix
//! representation is needed, via a deterministic pivoted factorization.

use crate::linalg::{C64, CMat, CVec, DensityMatrix};
use crate::{Error, Result};

/// Overlap exponents below this are exact zeros in linear-domain arithmetic
/// but are still reported in log form.
pub const LOG_UNDERFLOW_FLOOR: f64 = -700.0;

/// A complex number carried as log-magnitude plus unit phase, so overlaps
/// like `exp(-1e7)` survive for reporting even though they underflow.
#[derive(Debug, Clone, Copy)]
pub struct LogComplex {
    pub log_magnitude: f64,
    pub phase: C64,
}

impl LogComplex {
    pub fn from_value(z: C64) -> Self {
        let m = z.norm();
        if m == 0.0 {
            Self { log_magnitude: f64::NEG_INFINITY, phase: C64::new(1.0, 0.0) }
        } else {
            Self { log_magnitude: m.ln(), phase: z / C64::new(m, 0.0) }
        }
    }

    pub fn from_log(log_magnitude: f64, phase: C64) -> Self {
        Self { log_magnitude, phase }
    }

    /// Linear-domain value; exact 0 below the underflow floor.
    pub fn value(&self) -> C64 {
        if self.log_magnitude < LOG_UNDERFLOW_FLOOR {
            C64::new(0.0, 0.0)
        } else {
            self.phase * C64::new(self.log_magnitude.exp(), 0.0)
        }
    }
}

/// `|<M_i|M_j>| = exp(-N X^2 / eps^2)`, returned in log form.
pub fn pointer_overlap(n_constituents: usize, distance: f64, resolution: f64) -> Result<LogComplex> {
    if resolution <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            message: format!("resolution must be positive, got {resolution}"),
        });
    }
    if n_constituents == 0 || distance < 0.0 {
        return Err(Error::InvalidParameter {
            name: "n_constituents",
            message: "need N >= 1 and X >= 0".into(),
        });
    }
    let exponent = -(n_constituents as f64) * distance * distance / (resolution * resolution);
    Ok(LogComplex::from_log(exponent, C64::new(1.0, 0.0)))
}

/// Collapse-time estimate `T eps / (X sqrt(N))`.
pub fn collapse_time(t_measure: f64, epsilon: f64, distance: f64, n_constituents: usize) -> Result<f64> {
    if t_measure <= 0.0 || epsilon <= 0.0 || distance <= 0.0 || n_constituents == 0 {
        return Err(Error::InvalidParameter {
            name: "collapse_time",
            message: "all arguments must be positive".into(),
        });
    }
    Ok(t_measure * epsilon / (distance * (n_constituents as f64).sqrt()))
}

/// A family of pointer states given by its overlap schedule
/// `Delta_ij(t)` with `Delta_ii = 1`.
pub struct PointerFamily {
    pub n_outcomes: usize,
    pub embedding_dim: usize,
    schedule: Box<dyn Fn(usize, usize, f64) -> LogComplex + Send + Sync>,
}

impl std::fmt::Debug for PointerFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointerFamily")
            .field("n_outcomes", &self.n_outcomes)
            .field("embedding_dim", &self.embedding_dim)
            .finish_non_exhaustive()
    }
}

impl PointerFamily {
    pub fn new(
        n_outcomes: usize,
        embedding_dim: usize,
        schedule: Box<dyn Fn(usize, usize, f64) -> LogComplex + Send + Sync>,
    ) -> Result<Self> {
        if n_outcomes == 0 || embedding_dim < n_outcomes {
            return Err(Error::InvalidParameter {
                name: "embedding_dim",
                message: format!(
                    "need n_outcomes >= 1 and embedding_dim >= n_outcomes, got {n_outcomes} and {embedding_dim}"
                ),
            });
        }
        Ok(Self { n_outcomes, embedding_dim, schedule })
    }

    /// Default schedule
    /// `Delta_ij(t) = exp[-(t / t_rise)^2 N X^2 (i - j)^2 / eps^2]`:
    /// all states coincide at t = 0 and separate at the macroscopic-distance
    /// floor for t >> t_rise.
    pub fn gaussian_schedule(
        n_outcomes: usize,
        t_rise: f64,
        n_constituents: usize,
        distance: f64,
        resolution: f64,
    ) -> Result<Self> {
        if t_rise <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "t_rise",
                message: format!("rise time must be positive, got {t_rise}"),
            });
        }
        let floor = pointer_overlap(n_constituents, distance, resolution)?.log_magnitude;
        let schedule = move |i: usize, j: usize, t: f64| {
            let sep = (i as f64 - j as f64) * (i as f64 - j as f64);
            let u = t / t_rise;
            LogComplex::from_log(u * u * floor * sep, C64::new(1.0, 0.0))
        };
        Self::new(n_outcomes, n_outcomes, Box::new(schedule))
    }

    pub fn overlap(&self, i: usize, j: usize, t: f64) -> LogComplex {
        if i == j {
            LogComplex::from_log(0.0, C64::new(1.0, 0.0))
        } else {
            (self.schedule)(i, j, t)
        }
    }

    /// Linear-domain Gram matrix `G_ij(t) = Delta_ij(t)`.
    pub fn gram(&self, t: f64) -> CMat {
        CMat::from_fn(self.n_outcomes, self.n_outcomes, |i, j| self.overlap(i, j, t).value())
    }
}

const GRAM_TOLERANCE: f64 = 1e-10;

/// Pivoted Cholesky factorization of a Hermitian PSD Gram matrix. Returns
/// vectors `v_j` with `<v_i, v_j> = G_ij` within 1e-10, embedded in
/// `embedding_dim`. Pivot order is the descending residual diagonal (ties to
/// the smaller index), making the realization deterministic.
pub fn realize_gram(gram: &CMat, embedding_dim: usize) -> Result<Vec<CVec>> {
    let n = gram.nrows();
    if gram.ncols() != n || embedding_dim < n {
        return Err(Error::DimensionMismatch {
            message: format!("Gram is {}x{}, embedding dimension {embedding_dim}", gram.nrows(), gram.ncols()),
        });
    }
    let mut l = CMat::zeros(n, n);
    let mut diag: Vec<f64> = (0..n).map(|i| gram[(i, i)].re).collect();
    let mut pivoted = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for step in 0..n {
        let mut pivot = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            if !pivoted[i] && diag[i] > best {
                best = diag[i];
                pivot = i;
            }
        }
        if let Some((bad, &value)) = diag
            .iter()
            .enumerate()
            .filter(|(i, _)| !pivoted[*i])
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        {
            if value < -GRAM_TOLERANCE {
                return Err(Error::IndefiniteGram { index: bad, value });
            }
        }
        if best <= GRAM_TOLERANCE * GRAM_TOLERANCE {
            // remaining residual is numerically zero; rank-deficient Gram
            break;
        }
        pivoted[pivot] = true;
        order.push(pivot);
        let root = best.sqrt();
        l[(pivot, step)] = C64::new(root, 0.0);
        for q in 0..n {
            if pivoted[q] {
                continue;
            }
            let mut s = gram[(q, pivot)];
            for m in 0..step {
                s -= l[(q, m)] * l[(pivot, m)].conj();
            }
            let entry = s / C64::new(root, 0.0);
            l[(q, step)] = entry;
            diag[q] -= entry.norm_sqr();
        }
        diag[pivot] = 0.0;
    }
    // v_j = conj(row j of L), zero-padded to the embedding dimension
    let vectors = (0..n)
        .map(|j| CVec::from_fn(embedding_dim, |k, _| if k < n { l[(j, k)].conj() } else { C64::new(0.0, 0.0) }))
        .collect();
    Ok(vectors)
}

/// Concrete vectors realizing the family's overlap schedule at time `t`.
pub fn realize_pointer_states(family: &PointerFamily, t: f64) -> Result<Vec<CVec>> {
    realize_gram(&family.gram(t), family.embedding_dim)
}

/// Device density matrix `rho = sum_j p_j |M_j(t)><M_j(t)|` in the realized
/// embedding.
pub fn pointer_model_rho(family: &PointerFamily, probs: &[f64], t: f64) -> Result<DensityMatrix> {
    if probs.len() != family.n_outcomes {
        return Err(Error::DimensionMismatch {
            message: format!("{} probabilities for {} outcomes", probs.len(), family.n_outcomes),
        });
    }
    let vectors = realize_pointer_states(family, t)?;
    let d = family.embedding_dim;
    let mut rho = CMat::zeros(d, d);
    for (v, &p) in vectors.iter().zip(probs.iter()) {
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] += C64::new(p, 0.0) * v[i] * v[j].conj();
            }
        }
    }
    DensityMatrix::new(rho)
}

/// Two-level avoided crossing
/// `rho = [[p0 + a(t - t0), p0 Delta], [p0 conj(Delta), p0 - a(t - t0)]]`.
#[derive(Debug, Clone)]
pub struct CrossoverParams {
    pub p0: f64,
    pub a: f64,
    pub delta: C64,
    pub t0: f64,
}

impl CrossoverParams {
    pub fn new(p0: f64, a: f64, delta: C64, t0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p0) || p0 == 0.0 {
            return Err(Error::InvalidParameter {
                name: "p0",
                message: format!("need 0 < p0 < 1, got {p0}"),
            });
        }
        if a == 0.0 {
            return Err(Error::InvalidParameter {
                name: "a",
                message: "level velocity must be nonzero".into(),
            });
        }
        Ok(Self { p0, a, delta, t0 })
    }

    /// Width of the switching window, `|p0 Delta / a|`.
    pub fn window(&self) -> f64 {
        (self.p0 * self.delta.norm() / self.a).abs()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CrossoverPoint {
    pub p_plus: f64,
    pub p_minus: f64,
    /// Mixing angle in [0, pi/2], computed after rotating Delta real-positive.
    pub theta: f64,
    /// Phase rotation applied to Delta before computing theta.
    pub delta_rotation: C64,
    /// True exactly when Delta = 0: the levels really cross and theta jumps.
    pub degenerate: bool,
}

pub fn crossover_spectrum(params: &CrossoverParams, t: f64) -> CrossoverPoint {
    let x = params.a * (t - params.t0);
    let d = params.p0 * params.delta.norm();
    let r = (x * x + d * d).sqrt();
    let delta_rotation = if params.delta.norm() > 0.0 {
        (params.delta / C64::new(params.delta.norm(), 0.0)).conj()
    } else {
        C64::new(1.0, 0.0)
    };
    if d == 0.0 {
        // exact crossing: theta jumps from 0 to pi/2 at t0
        let theta = if x < 0.0 {
            0.0
        } else if x > 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            std::f64::consts::FRAC_PI_4
        };
        return CrossoverPoint {
            p_plus: params.p0 + r,
            p_minus: params.p0 - r,
            theta,
            delta_rotation,
            degenerate: true,
        };
    }
    let theta = (x + r).atan2(d);
    CrossoverPoint { p_plus: params.p0 + r, p_minus: params.p0 - r, theta, delta_rotation, degenerate: false }
}

/// One outcome sector of the environment-split model: weights `Z_aj(t)` over
/// the `m_j` clustered device states and the Gram matrix of the attached
/// environment states. The clustered states are expressed in an orthonormal
/// within-block basis.
#[derive(Debug, Clone)]
pub struct Block {
    pub weights: CVec,
    pub env_gram: CMat,
}

/// Environment-split device model: outer probabilities `p_j`, one [`Block`]
/// per outcome.
#[derive(Debug, Clone)]
pub struct BlockModel {
    pub outer_probs: Vec<f64>,
    pub blocks: Vec<Block>,
}

impl BlockModel {
    pub fn new(outer_probs: Vec<f64>, blocks: Vec<Block>) -> Result<Self> {
        if outer_probs.len() != blocks.len() {
            return Err(Error::DimensionMismatch {
                message: format!("{} probabilities for {} blocks", outer_probs.len(), blocks.len()),
            });
        }
        let total: f64 = outer_probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::BadTrace { deviation: (total - 1.0).abs() });
        }
        for (j, block) in blocks.iter().enumerate() {
            let m = block.weights.len();
            if block.env_gram.nrows() != m || block.env_gram.ncols() != m {
                return Err(Error::DimensionMismatch {
                    message: format!("block {j}: {m} weights but {}x{} env Gram", block.env_gram.nrows(), block.env_gram.ncols()),
                });
            }
            let norm: f64 = block.weights.iter().map(|z| z.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::NotNormalized { deviation: (norm - 1.0).abs(), tolerance: 1e-10 });
            }
        }
        Ok(Self { outer_probs, blocks })
    }
}

/// Block-diagonal device density matrix together with the block index of
/// every basis vector.
#[derive(Debug, Clone)]
pub struct SplitBlockRho {
    pub rho: DensityMatrix,
    pub block_of_index: Vec<usize>,
}

/// Assembles `rho = sum_j p_j R^(j)` with
/// `R^(j)_ab = Z_aj conj(Z_bj) <E_bj|E_aj>` in the within-block bases.
/// Each block carries trace `p_j`.
pub fn split_block_rho(model: &BlockModel) -> Result<SplitBlockRho> {
    let dim: usize = model.blocks.iter().map(|b| b.weights.len()).sum();
    let mut rho = CMat::zeros(dim, dim);
    let mut block_of_index = Vec::with_capacity(dim);
    let mut offset = 0;
    for (j, block) in model.blocks.iter().enumerate() {
        let m = block.weights.len();
        for a in 0..m {
            block_of_index.push(j);
            for b in 0..m {
                let env = block.env_gram[(b, a)];
                rho[(offset + a, offset + b)] = C64::new(model.outer_probs[j], 0.0)
                    * block.weights[a]
                    * block.weights[b].conj()
                    * env;
            }
        }
        offset += m;
    }
    Ok(SplitBlockRho { rho: DensityMatrix::new(rho)?, block_of_index })
}

/// Block probabilities of an imperfect device.
///
/// The device, particle and environment state is
/// `sum_{aij} sqrt(p_j) Z[a][(i, j)] |M_ai> |psi_j> |E_aij>` with the
/// environment states orthonormal in all labels. Tracing the particle and
/// environment out leaves a diagonal device matrix, so the probability that
/// the device sits in cluster `i` is `sum_{a, j} p_j |Z[a][(i, j)]|^2`.
/// The weights must reproduce a normalized total state.
pub fn imperfect_measurement_blocks(p: &[f64], z: &[CMat]) -> Result<Vec<f64>> {
    let n = p.len();
    if z.is_empty() {
        return Err(Error::InvalidParameter {
            name: "z",
            message: "need at least one environment sheet".into(),
        });
    }
    for sheet in z {
        if sheet.nrows() != n || sheet.ncols() != n {
            return Err(Error::DimensionMismatch {
                message: format!("weight sheet is {}x{} for {} outcomes", sheet.nrows(), sheet.ncols(), n),
            });
        }
    }
    let mut norm = 0.0;
    let mut blocks = vec![0.0; n];
    for sheet in z {
        for i in 0..n {
            for j in 0..n {
                let w = p[j] * sheet[(i, j)].norm_sqr();
                norm += w;
                blocks[i] += w;
            }
        }
    }
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { deviation: (norm - 1.0).abs(), tolerance: 1e-10 });
    }
    Ok(blocks)
}
