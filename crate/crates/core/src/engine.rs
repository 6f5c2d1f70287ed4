//! Branch dynamics across coarse time steps: continuous-time probability
//! currents and one-way rates, branch matching between consecutive Schmidt
//! decompositions, the discrete transition kernel and reproducible Monte
//! Carlo trajectory sampling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{schmidt_decompose, BipartiteState, C64, CMat, SchmidtDecomposition};
use crate::{Error, Result};

pub type RMat = DMatrix<f64>;

/// Schmidt decomposition at one coarse time step, with the branch
/// probabilities `p_i = c_i^2`.
#[derive(Debug, Clone)]
pub struct BranchFrame {
    pub time: f64,
    pub schmidt: SchmidtDecomposition,
    pub probabilities: Vec<f64>,
}

impl BranchFrame {
    pub fn from_state(state: &BipartiteState, time: f64) -> Result<Self> {
        let schmidt = schmidt_decompose(state)?;
        let probabilities = schmidt.coefficients.iter().map(|c| c * c).collect();
        Ok(Self { time, schmidt, probabilities })
    }

    pub fn n_branches(&self) -> usize {
        self.probabilities.len()
    }
}

/// Per-step conditional probabilities `p_ij` (column-stochastic, one-way)
/// in the labels of the earlier frame, with the matching that aligned them
/// and the antisymmetric current matrix the kernel was built from.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    pub step_index: usize,
    pub matrix: RMat,
    pub matching: Vec<usize>,
    pub j_matrix: RMat,
}

/// One sampled trajectory: `(step index, branch label)` records.
#[derive(Debug, Clone)]
pub struct BranchHistory {
    pub records: Vec<(usize, usize)>,
    pub rng_seed: u64,
}

/// Branch matching between two frames: `permutation[j]` is the later-frame
/// branch identified with earlier-frame branch `j`, plus the raw score
/// matrix `s[(i, j)] = |Re <Psi_i(next)| U |Psi_j(prev)>|`.
#[derive(Debug, Clone)]
pub struct Matching {
    pub permutation: Vec<usize>,
    pub scores: RMat,
}

/// Stream-split seed for trajectory `k`: `base ^ splitmix64(k)`, so
/// trajectories are independent of scheduling order.
pub fn derive_seed(base_seed: u64, k: u64) -> u64 {
    let mut z = k.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    base_seed ^ (z ^ (z >> 31))
}

fn min_gap(probabilities: &[f64]) -> f64 {
    probabilities
        .windows(2)
        .map(|w| (w[0] - w[1]).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Probability currents `J_ij = 2 sqrt(p_i p_j) Re <Psi_j|(d/dt + iH)|Psi_i>`
/// along a differentiable family of states. The time derivative of each
/// branch is a central finite difference with the neighbouring branches
/// phase-aligned to the central ones, so the phase convention of the
/// decomposition contributes no spurious derivative.
pub fn continuous_j_matrix(
    state_path: &dyn Fn(f64) -> Result<BipartiteState>,
    hamiltonian: &CMat,
    t: f64,
    fd_step: f64,
    degeneracy_tolerance: f64,
) -> Result<RMat> {
    if fd_step <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "fd_step",
            message: format!("finite-difference step must be positive, got {fd_step}"),
        });
    }
    let mid = BranchFrame::from_state(&state_path(t)?, t)?;
    let gap = min_gap(&mid.probabilities);
    if gap < degeneracy_tolerance {
        return Err(Error::DegenerateSpectrum { time: t, gap, tolerance: degeneracy_tolerance });
    }
    let lo = BranchFrame::from_state(&state_path(t - fd_step)?, t - fd_step)?;
    let hi = BranchFrame::from_state(&state_path(t + fd_step)?, t + fd_step)?;
    let n = mid.n_branches();
    if lo.n_branches() != n || hi.n_branches() != n {
        return Err(Error::DimensionMismatch {
            message: "branch count changed across the finite-difference stencil".into(),
        });
    }

    // phase-align neighbour branches to the central ones
    let align = |frame: &BranchFrame, i: usize, center: &nalgebra::DVector<C64>| -> Result<nalgebra::DVector<C64>> {
        let v = frame.schmidt.joint_branch(i);
        let overlap: C64 = v.dotc(center);
        let mag = overlap.norm();
        if mag < 0.5 {
            return Err(Error::MatchingFailed {
                message: format!(
                    "branch {i} overlap {mag:.3} across the stencil; reduce fd_step or the gap is too small"
                ),
            });
        }
        let phase = overlap / C64::new(mag, 0.0);
        Ok(v * phase)
    };

    let centers: Vec<_> = (0..n).map(|i| mid.schmidt.joint_branch(i)).collect();
    let mut derivs = Vec::with_capacity(n);
    for i in 0..n {
        let vl = align(&lo, i, &centers[i])?;
        let vh = align(&hi, i, &centers[i])?;
        derivs.push((vh - vl) / C64::new(2.0 * fd_step, 0.0));
    }

    let mut j = RMat::zeros(n, n);
    for a in 0..n {
        let h_psi_a = hamiltonian * &centers[a];
        for b in 0..n {
            if a == b {
                continue;
            }
            let dt_term: C64 = centers[b].dotc(&derivs[a]);
            let h_term: C64 = centers[b].dotc(&h_psi_a);
            let re = (dt_term + C64::new(0.0, 1.0) * h_term).re;
            j[(a, b)] = 2.0 * (mid.probabilities[a] * mid.probabilities[b]).sqrt() * re;
        }
    }
    Ok(j)
}

/// One-way transition rates `T_ij = max(J_ij, 0) / p_j`. Branches with zero
/// probability have zero outgoing rates; a positive current out of such a
/// branch leaves the rate undefined and is rejected.
pub fn continuous_rates(j: &RMat, p: &[f64]) -> Result<RMat> {
    let n = p.len();
    if j.nrows() != n || j.ncols() != n {
        return Err(Error::DimensionMismatch {
            message: format!("{}x{} current matrix for {n} probabilities", j.nrows(), j.ncols()),
        });
    }
    let mut t = RMat::zeros(n, n);
    for col in 0..n {
        for row in 0..n {
            if row == col {
                continue;
            }
            let flow = j[(row, col)];
            if flow > 0.0 {
                if p[col] == 0.0 {
                    return Err(Error::UndefinedRate { index: col, flow });
                }
                t[(row, col)] = flow / p[col];
            }
        }
    }
    Ok(t)
}

/// Maximum-weight perfect matching (Hungarian algorithm) on an n x n score
/// matrix indexed `(row, col)`. Returns `assign[col] = row` maximizing the
/// total score.
fn hungarian_max(scores: &RMat) -> Vec<usize> {
    let n = scores.nrows();
    // minimize cost = max_score - score, classic potentials formulation
    let top = scores.iter().cloned().fold(0.0f64, f64::max);
    let cost = |i: usize, j: usize| top - scores[(i, j)];

    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row (1-based) matched to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[j - 1] = p[j] - 1;
    }
    assign
}

/// Identifies each earlier-frame branch with a later-frame branch by
/// maximum-weight matching on `|Re <Psi_i(next)| U |Psi_j(prev)>|`.
pub fn match_branches(
    prev: &BranchFrame,
    next: &BranchFrame,
    u_step: &CMat,
) -> Result<Matching> {
    let n = prev.n_branches();
    if next.n_branches() != n {
        return Err(Error::DimensionMismatch {
            message: format!("{} branches then {}", n, next.n_branches()),
        });
    }
    let prev_vecs: Vec<_> = (0..n).map(|j| u_step * prev.schmidt.joint_branch(j)).collect();
    let next_vecs: Vec<_> = (0..n).map(|i| next.schmidt.joint_branch(i)).collect();
    let mut scores = RMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let overlap: C64 = next_vecs[i].dotc(&prev_vecs[j]);
            scores[(i, j)] = overlap.re.abs();
        }
    }
    if scores.iter().all(|s| *s < 1e-12) {
        return Err(Error::MatchingFailed {
            message: "all overlaps vanish; the frames are unrelated (step too large)".into(),
        });
    }
    // assign[j] = i over scores indexed (i, j): transpose for column-wise form
    let permutation = hungarian_max(&scores.transpose());
    Ok(Matching { permutation, scores })
}

fn build_kernel(
    prev: &BranchFrame,
    next: &BranchFrame,
    u_step: &CMat,
    matching: &[usize],
    step_index: usize,
    repair: bool,
) -> Result<(TransitionKernel, f64)> {
    let n = prev.n_branches();
    if next.n_branches() != n || matching.len() != n {
        return Err(Error::DimensionMismatch {
            message: "frames and matching must agree on the branch count".into(),
        });
    }
    // V_ab = sqrt(p'_perm(a) p_b) Re <Psi_perm(a)(next)| U |Psi_b(prev)>,
    // expressed in the earlier frame's labels
    let prev_vecs: Vec<_> = (0..n).map(|j| u_step * prev.schmidt.joint_branch(j)).collect();
    let mut v = RMat::zeros(n, n);
    for a in 0..n {
        let nv = next.schmidt.joint_branch(matching[a]);
        for b in 0..n {
            let overlap: C64 = nv.dotc(&prev_vecs[b]);
            v[(a, b)] = (next.probabilities[matching[a]] * prev.probabilities[b]).sqrt() * overlap.re;
        }
    }
    let j_matrix = &v - v.transpose();

    let mut matrix = RMat::zeros(n, n);
    for col in 0..n {
        for row in 0..n {
            if row == col {
                continue;
            }
            let flow = j_matrix[(row, col)];
            if flow > 0.0 && prev.probabilities[col] > 0.0 {
                matrix[(row, col)] = flow / prev.probabilities[col];
            }
        }
    }
    let mut clamped = 0.0;
    for col in 0..n {
        let off: f64 = (0..n).filter(|&r| r != col).map(|r| matrix[(r, col)]).sum();
        let diag = 1.0 - off;
        if diag < -1e-10 {
            if repair {
                // scale the outgoing flow down to what the column can afford
                clamped += -diag * prev.probabilities[col];
                let scale = 1.0 / off;
                for r in 0..n {
                    if r != col {
                        matrix[(r, col)] *= scale;
                    }
                }
                matrix[(col, col)] = 0.0;
            } else {
                return Err(Error::InfeasibleStep { step: step_index, branch: col, value: diag });
            }
        } else {
            matrix[(col, col)] = diag.max(0.0);
        }
    }
    Ok((
        TransitionKernel { step_index, matrix, matching: matching.to_vec(), j_matrix },
        clamped,
    ))
}

/// Discrete transition kernel between two matched frames. Off-diagonal
/// entries are `max(J_ab, 0) / p_b`; diagonals complete each column.
/// A column that would need a negative diagonal is rejected with the advice
/// to halve the step (see [`discrete_kernel_repaired`] for the opt-in
/// clamping repair).
pub fn discrete_kernel(
    prev: &BranchFrame,
    next: &BranchFrame,
    u_step: &CMat,
    matching: &[usize],
    step_index: usize,
) -> Result<TransitionKernel> {
    build_kernel(prev, next, u_step, matching, step_index, false).map(|(k, _)| k)
}

/// Like [`discrete_kernel`] but clamps infeasible columns (scaling their
/// outgoing flow to the available probability) and reports the total
/// clamped probability mass.
pub fn discrete_kernel_repaired(
    prev: &BranchFrame,
    next: &BranchFrame,
    u_step: &CMat,
    matching: &[usize],
    step_index: usize,
) -> Result<(TransitionKernel, f64)> {
    build_kernel(prev, next, u_step, matching, step_index, true)
}

fn sample_index(weights: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn sample_column(matrix: &RMat, col: usize, rng: &mut ChaCha8Rng) -> usize {
    let diag = matrix[(col, col)];
    if diag == 1.0 {
        return col;
    }
    let u: f64 = rng.random();
    if u < diag {
        return col;
    }
    let n = matrix.nrows();
    let mut acc = diag;
    let mut last = col;
    for i in 0..n {
        if i == col {
            continue;
        }
        let w = matrix[(i, col)];
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples one trajectory through a kernel chain. The initial branch comes
/// from `initial_probs`; each later step samples the column of the current
/// branch. Deterministic in `seed`.
pub fn sample_history(
    kernels: &[TransitionKernel],
    initial_probs: &[f64],
    seed: u64,
) -> BranchHistory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut branch = sample_index(initial_probs.iter().cloned(), rng.random());
    let mut records = Vec::with_capacity(kernels.len() + 1);
    records.push((0usize, branch));
    for (n, kernel) in kernels.iter().enumerate() {
        branch = sample_column(&kernel.matrix, branch, &mut rng);
        records.push((n + 1, branch));
    }
    BranchHistory { records, rng_seed: seed }
}

/// Per-step branch occupancy counts of an ensemble, plus the histories
/// themselves when requested.
#[derive(Debug, Clone)]
pub struct Ensemble {
    /// `occupancy[step][branch]` over all trajectories.
    pub occupancy: Vec<Vec<u64>>,
    pub histories: Option<Vec<BranchHistory>>,
}

/// Runs `n_traj` independent trajectories with per-trajectory seeds
/// `derive_seed(base_seed, k)`. Trajectories are sampled in parallel and
/// merged by index, so the result is independent of scheduling order.
pub fn run_ensemble(
    kernels: &[TransitionKernel],
    initial_probs: &[f64],
    n_traj: usize,
    base_seed: u64,
    keep_histories: bool,
) -> Ensemble {
    let n_steps = kernels.len() + 1;
    let n_branch = initial_probs.len();
    if keep_histories {
        let histories: Vec<BranchHistory> = (0..n_traj as u64)
            .into_par_iter()
            .map(|k| sample_history(kernels, initial_probs, derive_seed(base_seed, k)))
            .collect();
        let mut occupancy = vec![vec![0u64; n_branch]; n_steps];
        for h in &histories {
            for &(step, branch) in &h.records {
                occupancy[step][branch] += 1;
            }
        }
        Ensemble { occupancy, histories: Some(histories) }
    } else {
        let occupancy = (0..n_traj as u64)
            .into_par_iter()
            .map(|k| sample_history(kernels, initial_probs, derive_seed(base_seed, k)))
            .fold(
                || vec![vec![0u64; n_branch]; n_steps],
                |mut acc, h| {
                    for &(step, branch) in &h.records {
                        acc[step][branch] += 1;
                    }
                    acc
                },
            )
            .reduce(
                || vec![vec![0u64; n_branch]; n_steps],
                |mut a, b| {
                    for (ra, rb) in a.iter_mut().zip(b.iter()) {
                        for (ca, cb) in ra.iter_mut().zip(rb.iter()) {
                            *ca += cb;
                        }
                    }
                    a
                },
            );
        Ensemble { occupancy, histories: None }
    }
}
