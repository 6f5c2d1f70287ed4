//! Closed-form decay ladder and the Geiger-counter ensemble: a particle
//! decaying with rate constant `gamma` watched by a device of temporal
//! resolution `eta` that records the decay window.

use num_complex::Complex;
use rayon::prelude::*;

use crate::engine::{derive_seed, sample_history, RMat, TransitionKernel};
use crate::linalg::{BipartiteState, C64, CMat};
use crate::{Error, Result};

/// Parameters of the decay scenario. `(2 gamma)^-1` is the lifetime, `eta`
/// the device resolution, `tau` the support width of the decay-product
/// overlap, `e0` the undecayed energy (phase only) and `lambda_coupling` the
/// perturbation strength.
#[derive(Debug, Clone)]
pub struct DecayParams {
    pub gamma: f64,
    pub eta: f64,
    pub n_steps: usize,
    pub e0: f64,
    pub tau: f64,
    pub lambda_coupling: f64,
}

impl DecayParams {
    pub fn new(
        gamma: f64,
        eta: f64,
        n_steps: usize,
        e0: f64,
        tau: f64,
        lambda_coupling: f64,
    ) -> Result<Self> {
        if gamma < 0.0 || eta <= 0.0 || tau < 0.0 || n_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "gamma",
                message: format!(
                    "need gamma >= 0, eta > 0, tau >= 0 and n_steps >= 1, got gamma = {gamma}, eta = {eta}, tau = {tau}, n_steps = {n_steps}"
                ),
            });
        }
        if gamma * tau >= 0.01 {
            return Err(Error::InvalidParameter {
                name: "tau",
                message: format!("gamma * tau = {} must stay below 0.01", gamma * tau),
            });
        }
        if gamma * eta >= 0.1 {
            return Err(Error::InvalidParameter {
                name: "eta",
                message: format!("gamma * eta = {} must stay below 0.1", gamma * eta),
            });
        }
        Ok(Self { gamma, eta, n_steps, e0, tau, lambda_coupling })
    }

    /// Phase-free parameters with `tau = eta / 100` and the coupling that a
    /// flat decay-product overlap would need to produce `gamma`.
    pub fn simple(gamma: f64, eta: f64, n_steps: usize) -> Result<Self> {
        let tau = eta / 100.0;
        let lambda = if gamma > 0.0 { (gamma / tau).sqrt() } else { 0.0 };
        Self::new(gamma, eta, n_steps, 0.0, tau, lambda)
    }
}

/// Decay rate from the perturbative quadrature, with the energy-shift
/// (imaginary) part reported separately.
#[derive(Debug, Clone, Copy)]
pub struct DecayRate {
    pub rate: f64,
    pub energy_shift: f64,
    /// True when the shift exceeds 1% of the rate.
    pub shift_significant: bool,
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> C64,
    a: f64,
    b: f64,
    fa: C64,
    fb: C64,
    fm: C64,
    whole: C64,
    tol: f64,
    depth: usize,
) -> C64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
    let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
    let refined = left + right;
    if depth == 0 || (refined - whole).norm() < 15.0 * tol {
        refined + (refined - whole) / 15.0
    } else {
        adaptive_simpson(f, a, m, fa, fm, flm, left, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, fm, fb, frm, right, tol / 2.0, depth - 1)
    }
}

/// `gamma = lambda^2 * Re int_0^tau <BC| e^{-i H0 t} |BC> dt` by adaptive
/// quadrature to a tolerance of `1e-10 * lambda^2 * tau`.
pub fn decay_gamma(
    lambda_coupling: f64,
    overlap_fn: &dyn Fn(f64) -> C64,
    tau: f64,
) -> Result<DecayRate> {
    if tau <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tau",
            message: format!("support width must be positive, got {tau}"),
        });
    }
    let l2 = lambda_coupling * lambda_coupling;
    let fa = overlap_fn(0.0);
    let fb = overlap_fn(tau);
    let fm = overlap_fn(0.5 * tau);
    let whole = (fa + fm * 4.0 + fb) * (tau / 6.0);
    let tol = 1e-10 * tau;
    let integral = adaptive_simpson(overlap_fn, 0.0, tau, fa, fb, fm, whole, tol, 40);
    let rate = l2 * integral.re;
    let energy_shift = l2 * integral.im;
    let shift_significant = energy_shift.abs() > 0.01 * rate.abs();
    Ok(DecayRate { rate, energy_shift, shift_significant })
}

/// The probability ladder after `n` windows and its deviation from 1.
#[derive(Debug, Clone)]
pub struct DecayWeights {
    /// `p_0 = exp(-2 n gamma eta)` (undecayed), then
    /// `p_j = 2 gamma eta exp(-2 gamma (j-1) eta)` for windows 1..=n.
    pub probs: Vec<f64>,
    /// `1 - sum(probs)`; second order in `gamma * eta` per window.
    pub deficit: f64,
}

pub fn decay_weights(params: &DecayParams, n: usize) -> Result<DecayWeights> {
    if n > params.n_steps {
        return Err(Error::InvalidParameter {
            name: "n",
            message: format!("window {n} beyond the configured {} steps", params.n_steps),
        });
    }
    let ge = params.gamma * params.eta;
    let mut probs = Vec::with_capacity(n + 1);
    probs.push((-2.0 * n as f64 * ge).exp());
    for j in 1..=n {
        probs.push(2.0 * ge * (-2.0 * (j - 1) as f64 * ge).exp());
    }
    let deficit = 1.0 - probs.iter().sum::<f64>();
    Ok(DecayWeights { probs, deficit })
}

/// Closed-form transition kernel for the step from `t_n` to `t_{n+1}`, on
/// the full label space `{0, 1, ..., n_steps}`. The only transition is
/// resting-to-window: `p_{(n+1), 0} = 2 eta gamma`; decayed labels are
/// absorbing.
pub fn decay_kernel(params: &DecayParams, n: usize) -> Result<TransitionKernel> {
    if n >= params.n_steps {
        return Err(Error::InvalidParameter {
            name: "n",
            message: format!("step {n} beyond the configured {} steps", params.n_steps),
        });
    }
    let dim = params.n_steps + 1;
    let ge = params.gamma * params.eta;
    let mut matrix = RMat::identity(dim, dim);
    matrix[(0, 0)] = 1.0 - 2.0 * ge;
    matrix[(n + 1, 0)] = 2.0 * ge;
    let mut j_matrix = RMat::zeros(dim, dim);
    let current = 2.0 * ge * (-2.0 * n as f64 * ge).exp();
    j_matrix[(n + 1, 0)] = current;
    j_matrix[(0, n + 1)] = -current;
    Ok(TransitionKernel { step_index: n, matrix, matching: (0..dim).collect(), j_matrix })
}

/// Joint device-and-decay-products state at time `t`. The device basis is
/// `|M_0>, |M_1>, ...` (outcome `j` records a decay in window `j`), treated
/// as exactly orthogonal sectors, and the second factor holds `|A>` plus one
/// orthogonal dispersed-products sector per window. Window amplitudes are
/// chosen so the state norm is exactly 1.
pub fn decay_full_state(params: &DecayParams, n_outcomes: usize, t: f64) -> Result<BipartiteState> {
    if t < 0.0 {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!("time must be nonnegative, got {t}"),
        });
    }
    let complete = (t / params.eta).floor() as usize;
    if n_outcomes < complete + 1 {
        return Err(Error::DimensionMismatch {
            message: format!("{n_outcomes} outcomes cannot hold {complete} decay windows"),
        });
    }
    let g = params.gamma;
    let mut m = CMat::zeros(n_outcomes, n_outcomes);
    m[(0, 0)] = C64::from_polar((-g * t).exp(), -params.e0 * t);
    for j in 1..n_outcomes {
        let start = (j - 1) as f64 * params.eta;
        if start >= t {
            break;
        }
        let end = (j as f64 * params.eta).min(t);
        let weight = (-2.0 * g * start).exp() - (-2.0 * g * end).exp();
        m[(j, j)] = C64::from_polar(weight.sqrt(), -params.e0 * start);
    }
    BipartiteState::new(m)
}

/// Step unitary taking [`decay_full_state`] at `t_n` to `t_{n+1}`: a 2 x 2
/// rotation between the surviving component and the newly opened window,
/// identity elsewhere.
pub fn decay_step_unitary(params: &DecayParams, n: usize, n_outcomes: usize) -> Result<CMat> {
    if n + 1 >= n_outcomes {
        return Err(Error::DimensionMismatch {
            message: format!("step {n} opens window {} beyond {n_outcomes} outcomes", n + 1),
        });
    }
    let dim = n_outcomes * n_outcomes;
    let c = (-params.gamma * params.eta).exp();
    let s = (1.0 - c * c).sqrt();
    let phase = Complex::from_polar(1.0, -params.e0 * params.eta);
    let rest = 0; // joint index of |M_0> (x) |A>
    let window = (n + 1) * n_outcomes + (n + 1);
    let mut u = CMat::identity(dim, dim);
    u[(rest, rest)] = phase * c;
    u[(window, rest)] = C64::new(s, 0.0);
    u[(rest, window)] = -phase * s;
    u[(window, window)] = C64::new(c, 0.0);
    Ok(u)
}

/// Ensemble summary of the Geiger-counter Monte Carlo.
#[derive(Debug, Clone)]
pub struct GeigerResult {
    /// Trajectories whose first decay fell in window `j` (index 0 unused).
    pub first_decay_counts: Vec<u64>,
    /// Trajectories still undecayed after the last step.
    pub undecayed: u64,
    /// Trajectories in the resting state at each step.
    pub survival: Vec<u64>,
    /// Reverse or decayed-to-decayed transitions observed (must be 0).
    pub violations: u64,
    pub n_trajectories: usize,
}

/// Samples `n_traj` device histories through the closed-form kernel chain,
/// verifying the absorbing-chain property trajectory by trajectory.
pub fn simulate_geiger(params: &DecayParams, n_traj: usize, seed: u64) -> Result<GeigerResult> {
    let kernels: Vec<TransitionKernel> =
        (0..params.n_steps).map(|n| decay_kernel(params, n)).collect::<Result<_>>()?;
    let dim = params.n_steps + 1;
    let mut initial = vec![0.0; dim];
    initial[0] = 1.0;

    struct Acc {
        first: Vec<u64>,
        undecayed: u64,
        survival: Vec<u64>,
        violations: u64,
    }
    let zero = || Acc {
        first: vec![0; dim],
        undecayed: 0,
        survival: vec![0; dim],
        violations: 0,
    };
    let acc = (0..n_traj as u64)
        .into_par_iter()
        .map(|k| sample_history(&kernels, &initial, derive_seed(seed, k)))
        .fold(zero, |mut acc, h| {
            let mut decayed_into = None;
            for window in h.records.windows(2) {
                let (prev, next) = (window[0].1, window[1].1);
                if prev != next {
                    if prev != 0 || decayed_into.is_some() {
                        acc.violations += 1;
                    }
                    decayed_into = Some(next);
                }
            }
            for &(step, branch) in &h.records {
                if branch == 0 {
                    acc.survival[step] += 1;
                }
            }
            match decayed_into {
                Some(j) => acc.first[j] += 1,
                None => acc.undecayed += 1,
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for (x, y) in a.first.iter_mut().zip(b.first.iter()) {
                *x += y;
            }
            for (x, y) in a.survival.iter_mut().zip(b.survival.iter()) {
                *x += y;
            }
            a.undecayed += b.undecayed;
            a.violations += b.violations;
            a
        });
    Ok(GeigerResult {
        first_decay_counts: acc.first,
        undecayed: acc.undecayed,
        survival: acc.survival,
        violations: acc.violations,
        n_trajectories: n_traj,
    })
}
