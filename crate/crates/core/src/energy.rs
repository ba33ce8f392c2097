//! Per-slot energy costs and the per-node ledger filled in by the simulator.

use serde::{Deserialize, Serialize};

/// Energy per slot. Vectors are indexed by type; a vector shorter than T
/// repeats its last entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// γ̄_b
    pub gamma_idle: Vec<f64>,
    /// γ̂_b
    pub gamma_rx: Vec<f64>,
    /// γ^α_1
    pub gamma_alpha: f64,
    /// γ^β_b, entry 0 unused
    pub gamma_beta: Vec<f64>,
    /// γ′
    pub gamma_p1_tx: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            gamma_idle: vec![0.1],
            gamma_rx: vec![1.0],
            gamma_alpha: 1.5,
            gamma_beta: vec![1.5],
            gamma_p1_tx: 1.5,
        }
    }
}

fn pick(v: &[f64], b: usize) -> f64 {
    match v.get(b) {
        Some(x) => *x,
        None => *v.last().unwrap_or(&0.0),
    }
}

impl EnergyParams {
    pub fn idle(&self, b: usize) -> f64 {
        pick(&self.gamma_idle, b)
    }

    pub fn rx(&self, b: usize) -> f64 {
        pick(&self.gamma_rx, b)
    }

    /// Phase-2 transmit cost: α for type 0, β otherwise.
    pub fn tx(&self, b: usize) -> f64 {
        if b == 0 {
            self.gamma_alpha
        } else {
            pick(&self.gamma_beta, b)
        }
    }

    pub fn is_valid(&self) -> bool {
        let all = self
            .gamma_idle
            .iter()
            .chain(&self.gamma_rx)
            .chain(&self.gamma_beta)
            .chain([&self.gamma_alpha, &self.gamma_p1_tx]);
        let mut ok = true;
        for x in all {
            ok &= x.is_finite() && *x >= 0.0;
        }
        ok && !self.gamma_idle.is_empty() && !self.gamma_rx.is_empty()
    }
}

/// Slot counts spent by one node in each radio state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotUsage {
    pub p1_tx: u64,
    pub p1_idle: u64,
    pub p2_tx: u64,
    pub p2_rx: u64,
    pub p2_idle: u64,
}

impl SlotUsage {
    pub fn energy(&self, b: usize, params: &EnergyParams) -> f64 {
        self.p1_tx as f64 * params.gamma_p1_tx
            + self.p1_idle as f64 * params.idle(b)
            + self.p2_tx as f64 * params.tx(b)
            + self.p2_rx as f64 * params.rx(b)
            + self.p2_idle as f64 * params.idle(b)
    }

    pub fn phase2_energy(&self, b: usize, params: &EnergyParams) -> f64 {
        self.p2_tx as f64 * params.tx(b)
            + self.p2_rx as f64 * params.rx(b)
            + self.p2_idle as f64 * params.idle(b)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub usage: Vec<SlotUsage>,
}

impl EnergyLedger {
    pub fn new(nodes: usize) -> Self {
        EnergyLedger {
            usage: vec![SlotUsage::default(); nodes],
        }
    }

    /// Mean energy over all nodes; `types[k]` is node k's type.
    pub fn mean_energy(&self, types: &[usize], params: &EnergyParams) -> f64 {
        if self.usage.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .usage
            .iter()
            .zip(types)
            .map(|(u, &b)| u.energy(b, params))
            .sum();
        total / self.usage.len() as f64
    }
}
