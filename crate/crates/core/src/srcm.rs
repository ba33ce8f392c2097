//! The homogeneous multi-stop estimator: a phase-1 rough estimate from
//! geometric slot probabilities and a phase-2 balls-and-bins refinement.
//! Running it once per type is the T-Rep baseline.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::binomial;
use crate::channel::{BitMatrix, SlotOutcome};
use crate::config::ProtocolConfig;
use crate::error::{invalid, Result};
use crate::protocol::{self, Deployment, ProtocolOutcome, Scheme};
use crate::rng::BitPool;

const MAX_W: u32 = 100_000;
const MAX_J: u32 = 64;

/// Smallest W with Σ_{i=⌊(W+1)/2⌋}^{W} C(W,i)(1−δ)^i δ^{W−i} ≥ 1−δ.
pub fn select_w(delta: f64) -> Result<u32> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    let target = 1.0 - delta;
    for w in 1..=MAX_W {
        let lhs = binomial::upper_tail(w as u64, w.div_ceil(2) as u64, 1.0 - delta);
        if lhs >= target - 1e-12 {
            return Ok(w);
        }
    }
    Err(invalid(format!("no W up to {MAX_W} satisfies the majority condition")))
}

/// p̄(i) for slots i = 1..=t.
pub fn slot_probabilities(t: u32) -> Vec<f64> {
    (1..=t)
        .map(|i| {
            let e = if i < t { i } else { t - 1 };
            0.5f64.powi(e as i32)
        })
        .collect()
}

/// One node's transmissions in one trial; slot i is bit i−1.
pub fn draw_trial_pattern<R: RngCore>(pool: &mut BitPool<'_, R>, t: u32) -> u64 {
    let mut s = 0u64;
    for i in 1..=t {
        let e = if i < t { i } else { t - 1 };
        if pool.one_in_pow2(e) {
            s |= 1 << (i - 1);
        }
    }
    s
}

/// Channel bit vector of one phase-1 trial with `n_active` fresh nodes.
pub fn phase1_trial<R: RngCore>(n_active: usize, t: u32, rng: &mut R) -> u64 {
    let mut pool = BitPool::new(rng);
    (0..n_active).fold(0, |acc, _| acc | draw_trial_pattern(&mut pool, t))
}

fn bit(y: u64, i: u32) -> bool {
    (y >> (i - 1)) & 1 == 1
}

/// Estimate of the highest busy slot: probe slots 1, 2, 4, …, t and
/// binary-search below the first empty probe.
pub fn probe_and_search(y: u64, t: u32) -> u32 {
    debug_assert!(t.is_power_of_two());
    let mut first_zero = None;
    let mut j = 1;
    let mut pos = 1;
    while pos <= t {
        if !bit(y, pos) {
            first_zero = Some(j);
            break;
        }
        j += 1;
        pos *= 2;
    }
    let jz = match first_zero {
        None => return t,
        Some(1) => return 0,
        Some(jz) => jz,
    };
    // Slot 2^(jz-2) is known busy; slot 2^(jz-1) is known empty.
    let mut lo = 1u32 << (jz - 2);
    let mut hi = (1u32 << (jz - 1)) - 1;
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if bit(y, mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// ñ = 0.794 · 2^(mean v).
pub fn rough_estimate(v: &[u32]) -> f64 {
    assert!(!v.is_empty(), "rough estimate needs at least one trial");
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
    0.794 * mean.exp2()
}

/// OR-accumulated phase-1 vectors of one type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase1State {
    pub t: u32,
    pub y: Vec<u64>,
}

impl Phase1State {
    pub fn new(trials: u32, t: u32) -> Self {
        Phase1State {
            t,
            y: vec![0; trials as usize],
        }
    }

    pub fn absorb(&mut self, trial: usize, s: u64) {
        self.y[trial] |= s;
    }

    pub fn v(&self) -> Vec<u32> {
        self.y.iter().map(|&y| probe_and_search(y, self.t)).collect()
    }

    pub fn rough_estimate(&self) -> f64 {
        rough_estimate(&self.v())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase2Params {
    pub p: f64,
    pub i: u32,
}

impl Phase2Params {
    pub fn transmit_probability(&self) -> f64 {
        0.5f64.powi(self.i as i32)
    }
}

/// p = min(1, 1.6ℓ/ñ) and the power of two nearest to it.
pub fn compute_pi(n_tilde: f64, ell: u32) -> Phase2Params {
    assert!(n_tilde > 0.0 && ell >= 1);
    let p = (1.6 * ell as f64 / n_tilde).min(1.0);
    let mut best = 1;
    let mut best_gap = f64::INFINITY;
    for j in 1..=MAX_J {
        let gap = (0.5f64.powi(j as i32) - p).abs();
        if gap < best_gap {
            best = j;
            best_gap = gap;
        }
    }
    Phase2Params { p, i: best }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// No empty block was left; `value` is the sentinel 2·1.6ℓ/rate.
    pub saturated: bool,
}

/// ln(z/ℓ) / ln(1 − rate/ℓ).
pub fn final_estimate(z: u32, ell: u32, rate: f64) -> Estimate {
    assert!(z <= ell);
    let l = ell as f64;
    if z == 0 {
        return Estimate {
            value: 2.0 * 1.6 * l / rate,
            saturated: true,
        };
    }
    let value = if z == ell {
        0.0
    } else {
        (z as f64 / l).ln() / (-rate / l).ln_1p()
    };
    Estimate {
        value,
        saturated: false,
    }
}

/// A node's phase-2 choice, drawn once and reused at every stop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Phase2Draw {
    pub block: u32,
    /// Transmits whenever `level >= I`, so P(transmit) = 2^-I.
    pub level: u32,
}

impl Phase2Draw {
    pub fn draw<R: Rng>(rng: &mut R, ell: u32) -> Self {
        let block = rng.random_range(0..ell);
        let level = rng.next_u64().trailing_ones();
        Phase2Draw { block, level }
    }

    pub fn transmits(&self, i: u32) -> bool {
        self.level >= i
    }
}

#[derive(Clone, Debug)]
pub struct Phase2Trial {
    pub row: BitMatrix,
    pub outcomes: Vec<SlotOutcome>,
}

/// One balls-and-bins frame with `n_active` fresh nodes; the returned row is
/// OR-ed with `prev` (a 1 × ℓ grid).
pub fn phase2_trial<R: Rng>(
    n_active: usize,
    ell: u32,
    i: u32,
    rng: &mut R,
    prev: &BitMatrix,
) -> Result<Phase2Trial> {
    if prev.rows() != 1 || prev.cols() != ell as usize {
        return Err(invalid("previous row must be 1 x ell"));
    }
    let mut counts = vec![0u32; ell as usize];
    for _ in 0..n_active {
        let d = Phase2Draw::draw(rng, ell);
        if d.transmits(i) {
            counts[d.block as usize] += 1;
        }
    }
    let mut row = prev.clone();
    let outcomes = counts
        .iter()
        .enumerate()
        .map(|(h, &c)| {
            if c > 0 {
                row.set(0, h);
            }
            match c {
                0 => SlotOutcome::Empty,
                1 => SlotOutcome::Alpha,
                _ => SlotOutcome::Collision,
            }
        })
        .collect();
    Ok(Phase2Trial { row, outcomes })
}

/// T-Rep: phases 1 and 2 run separately for every type at every stop.
pub fn run_trep<R: Rng>(
    deployment: &Deployment,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<ProtocolOutcome> {
    protocol::run(Scheme::Trep, deployment, config, rng)
}
