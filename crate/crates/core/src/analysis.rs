//! Expected slot counts and per-node energy of HSRC-M1 at one stop.

use serde::{Deserialize, Serialize};

use crate::binomial;
use crate::error::{invalid, Result};

pub use crate::energy::EnergyParams;

/// What the MBS faces at one stop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopContext {
    /// n̄_b, active nodes of each type within range.
    pub n_bar: Vec<u32>,
    /// ξ_b, activity probability of the tagged node.
    pub xi: Vec<f64>,
    /// ψ_b, whether the tagged node is within range.
    pub psi: Vec<bool>,
    /// I_b of each type.
    pub i: Vec<u32>,
    pub ell: u32,
    pub t: u32,
    pub w: u32,
    pub slot_width_bits: u32,
}

impl StopContext {
    pub fn types(&self) -> usize {
        self.n_bar.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.types();
        if t < 2 {
            return Err(invalid("the analysis needs at least two types"));
        }
        if self.xi.len() != t || self.psi.len() != t || self.i.len() != t {
            return Err(invalid("n_bar, xi, psi and i must all have T entries"));
        }
        if self.xi.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(invalid("xi must lie in [0,1]"));
        }
        if self.i.contains(&0) {
            return Err(invalid("I must be at least 1"));
        }
        if self.ell == 0 || self.slot_width_bits == 0 || self.t == 0 || self.w == 0 {
            return Err(invalid("ell, t, W and the slot width must be positive"));
        }
        Ok(())
    }

    /// π_b = ξ_b ψ_b 2^-I_b.
    pub fn pi(&self, b: usize) -> f64 {
        if self.psi[b] {
            self.xi[b] * 0.5f64.powi(self.i[b] as i32)
        } else {
            0.0
        }
    }

    fn u(&self, b: usize, n: u32) -> f64 {
        uv(n, self.i[b], self.ell).0
    }

    fn v(&self, b: usize, n: u32) -> f64 {
        uv(n, self.i[b], self.ell).1
    }

    fn bp1(&self) -> f64 {
        self.ell.div_ceil(self.slot_width_bits) as f64
    }
}

/// Probabilities that none (u) or exactly one (v) of n nodes transmits in a
/// given block when each does so with probability 2^-I/ℓ.
pub fn uv(n: u32, i: u32, ell: u32) -> (f64, f64) {
    let p = 0.5f64.powi(i as i32) / ell as f64;
    let u = (1.0 - p).powi(n as i32);
    let v = if n == 0 {
        0.0
    } else {
        n as f64 * p * (1.0 - p).powi(n as i32 - 1)
    };
    (u, v)
}

/// Probabilities of the three ways a block collides in every step-1 slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QProbs {
    /// Two or more type-1 nodes.
    pub q1: f64,
    /// One type-1 node and at least one of every other type.
    pub q2: f64,
    /// No type-1 node and at least two of every other type.
    pub q3: f64,
}

impl QProbs {
    pub fn total(&self) -> f64 {
        self.q1 + self.q2 + self.q3
    }
}

pub fn q_probs(ctx: &StopContext) -> QProbs {
    let (u1, v1) = uv(ctx.n_bar[0], ctx.i[0], ctx.ell);
    let mut busy = 1.0;
    let mut crowded = 1.0;
    for b in 1..ctx.types() {
        let (u, v) = uv(ctx.n_bar[b], ctx.i[b], ctx.ell);
        busy *= 1.0 - u;
        crowded *= 1.0 - u - v;
    }
    QProbs {
        q1: 1.0 - u1 - v1,
        q2: v1 * busy,
        q3: u1 * crowded,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub e_k: f64,
    pub e_r: f64,
    pub e_zbp: f64,
    pub delta2: f64,
    pub delta1: f64,
    pub delta_stop: f64,
}

pub fn expected_counts(ctx: &StopContext) -> ExpectedCounts {
    let q = q_probs(ctx);
    let l = ctx.ell as f64;
    let tm1 = ctx.types() as f64 - 1.0;
    let e_k = l * q.total();
    let e_r = l * q.q1;
    let sw = ctx.slot_width_bits as u64;
    let e_ceil = binomial::expect(ctx.ell as u64, q.total().clamp(0.0, 1.0), |k| k.div_ceil(sw) as f64);
    let e_zbp = ctx.bp1() + e_ceil;
    let delta2 = tm1 * l + e_k + tm1 * e_r + e_zbp;
    let delta1 = ctx.t as f64 * ctx.w as f64 * ctx.types() as f64;
    ExpectedCounts {
        e_k,
        e_r,
        e_zbp,
        delta2,
        delta1,
        delta_stop: delta1 + delta2,
    }
}

/// Expected energy of one node in each radio state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateEnergy {
    pub tx: f64,
    pub rx: f64,
    pub idle: f64,
}

impl StateEnergy {
    pub fn total(&self) -> f64 {
        self.tx + self.rx + self.idle
    }
}

pub fn energy_phase1(b: usize, ctx: &StopContext, params: &EnergyParams) -> StateEnergy {
    let a = if ctx.psi[b] { ctx.xi[b] } else { 0.0 };
    let (t, w) = (ctx.t as f64, ctx.w as f64);
    StateEnergy {
        tx: a * w * params.gamma_p1_tx,
        rx: 0.0,
        idle: ((t - 1.0) * a + t * (1.0 - a)) * w * params.idle(b),
    }
}

pub fn energy_phase2_type1(ctx: &StopContext, params: &EnergyParams) -> Result<StateEnergy> {
    let pi = ctx.pi(0);
    let delta2 = expected_counts(ctx).delta2;
    if pi == 0.0 {
        return Ok(StateEnergy {
            idle: params.idle(0) * delta2,
            ..Default::default()
        });
    }
    if ctx.n_bar[0] == 0 {
        return Err(invalid("type-1 node counted as active but n_bar[0] = 0"));
    }
    let u_others = ctx.u(0, ctx.n_bar[0] - 1);
    let qb1 = 1.0 - u_others;
    let qb2 = u_others * (1..ctx.types()).map(|b| 1.0 - ctx.u(b, ctx.n_bar[b])).product::<f64>();
    let tm1 = ctx.types() as f64 - 1.0;
    let bp1 = ctx.bp1();
    Ok(StateEnergy {
        tx: (tm1 + qb1 + qb2) * pi * params.gamma_alpha,
        rx: pi * bp1 * params.rx(0),
        idle: params.idle(0) * ((1.0 - pi) * delta2 + pi * (delta2 - (tm1 + bp1 + qb1 + qb2))),
    })
}

pub fn energy_phase2_typeb(b: usize, ctx: &StopContext, params: &EnergyParams) -> Result<StateEnergy> {
    if b == 0 || b >= ctx.types() {
        return Err(crate::Error::TypeOutOfRange {
            index: b,
            types: ctx.types(),
        });
    }
    let pi = ctx.pi(b);
    let q1 = q_probs(ctx).q1;
    let delta2 = expected_counts(ctx).delta2;
    let (u1, v1) = uv(ctx.n_bar[0], ctx.i[0], ctx.ell);
    let others = (1..ctx.types()).filter(|&i| i != b);
    let busy: f64 = others.clone().map(|i| 1.0 - ctx.u(i, ctx.n_bar[i])).product();
    let crowded: f64 = others
        .map(|i| 1.0 - ctx.u(i, ctx.n_bar[i]) - ctx.v(i, ctx.n_bar[i]))
        .product();
    let qh1 = v1 * busy;
    let qh2 = if ctx.n_bar[b] == 0 {
        0.0
    } else {
        u1 * (1.0 - ctx.u(b, ctx.n_bar[b] - 1)) * crowded
    };
    let bp1 = ctx.bp1();
    Ok(StateEnergy {
        tx: (1.0 + q1) * pi * params.tx(b),
        rx: (bp1 + q1 + qh1 + qh2) * pi * params.rx(b),
        idle: params.idle(b) * ((1.0 - pi) * delta2 + pi * (delta2 - (1.0 + bp1 + 2.0 * q1 + qh1 + qh2))),
    })
}

/// Phase-1 plus phase-2 expected energy of a type-b node at this stop.
pub fn stop_energy(b: usize, ctx: &StopContext, params: &EnergyParams) -> Result<f64> {
    let p2 = if b == 0 {
        energy_phase2_type1(ctx, params)?
    } else {
        energy_phase2_typeb(b, ctx, params)?
    };
    Ok(energy_phase1(b, ctx, params).total() + p2.total())
}
