//! Multi-stop driver shared by T-Rep, HSRC-M1 and HSRC-M2.
//!
//! Every active node draws its random choices once per replicate: one
//! phase-1 pattern per trial and one phase-2 (block, level) pair. A node seen
//! from several stops therefore lands in the same slots each time, and the
//! OR across stops counts it once. Phase 1 and the phase-2 draws are
//! identical for all three schemes, so one seed couples them exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::BitMatrix;
use crate::config::{EstimatorRate, ProtocolConfig};
use crate::energy::EnergyLedger;
use crate::error::{invalid, Result};
use crate::hsrc_m1::{self, M1StopTrace};
use crate::hsrc_m2;
use crate::rng::BitPool;
use crate::srcm::{self, compute_pi, final_estimate, Estimate, Phase1State, Phase2Draw, Phase2Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Trep,
    HsrcM1,
    HsrcM2,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Trep, Scheme::HsrcM1, Scheme::HsrcM2];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Trep => "trep",
            Scheme::HsrcM1 => "hsrc_m1",
            Scheme::HsrcM2 => "hsrc_m2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub type_index: usize,
    pub active: bool,
}

/// Nodes and, for every stop, the indices of the nodes within range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub types: usize,
    pub nodes: Vec<NodeInfo>,
    pub stops: Vec<Vec<u32>>,
}

impl Deployment {
    pub fn validate(&self) -> Result<()> {
        if self.types == 0 {
            return Err(invalid("at least one node type is required"));
        }
        if self.stops.is_empty() {
            return Err(invalid("at least one stop is required"));
        }
        for n in &self.nodes {
            if n.type_index >= self.types {
                return Err(crate::error::Error::TypeOutOfRange {
                    index: n.type_index,
                    types: self.types,
                });
            }
        }
        for stop in &self.stops {
            if stop.iter().any(|&k| k as usize >= self.nodes.len()) {
                return Err(invalid("stop refers to a missing node"));
            }
        }
        Ok(())
    }

    /// n_b: distinct active nodes of each type seen from at least one stop.
    pub fn true_counts(&self) -> Vec<u32> {
        let mut seen = vec![false; self.nodes.len()];
        let mut counts = vec![0u32; self.types];
        for stop in &self.stops {
            for &k in stop {
                let k = k as usize;
                let n = self.nodes[k];
                if n.active && !seen[k] {
                    seen[k] = true;
                    counts[n.type_index] += 1;
                }
            }
        }
        counts
    }

    pub fn node_types(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.type_index).collect()
    }
}

/// Number of transmitting nodes of each type in each block of one frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLoad {
    types: usize,
    blocks: usize,
    counts: Vec<u32>,
}

impl BlockLoad {
    pub fn new(types: usize, blocks: usize) -> Self {
        BlockLoad {
            types,
            blocks,
            counts: vec![0; types * blocks],
        }
    }

    /// From (type, block) pairs of transmitting nodes.
    pub fn from_transmitters(types: usize, blocks: usize, tx: &[(usize, usize)]) -> Self {
        let mut load = BlockLoad::new(types, blocks);
        for &(b, h) in tx {
            load.add(b, h);
        }
        load
    }

    pub fn add(&mut self, b: usize, h: usize) {
        self.counts[h * self.types + b] += 1;
    }

    pub fn types(&self) -> usize {
        self.types
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn count(&self, h: usize, b: usize) -> u32 {
        self.counts[h * self.types + b]
    }

    pub fn block(&self, h: usize) -> &[u32] {
        &self.counts[h * self.types..(h + 1) * self.types]
    }

    /// Ground truth: X(b, h) = 1 iff some type-b node transmitted in block h.
    pub fn presence(&self) -> BitMatrix {
        let mut m = BitMatrix::new(self.types, self.blocks);
        for h in 0..self.blocks {
            for b in 0..self.types {
                if self.count(h, b) > 0 {
                    m.set(b, h);
                }
            }
        }
        m
    }
}

/// Phase-2 slots of one stop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase2Slots {
    pub step1: u64,
    pub broadcast: u64,
    pub resolution: u64,
    /// Broadcast packets of nested rounds (HSRC-M2 only).
    pub nested_broadcast: u64,
}

impl Phase2Slots {
    pub fn total(&self) -> u64 {
        self.step1 + self.broadcast + self.resolution + self.nested_broadcast
    }
}

/// Transmit and receive slots of each transmitting node, by (block, type).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Participation {
    types: usize,
    pub tx: Vec<u32>,
    pub rx: Vec<u32>,
}

impl Participation {
    pub fn new(types: usize, blocks: usize) -> Self {
        Participation {
            types,
            tx: vec![0; types * blocks],
            rx: vec![0; types * blocks],
        }
    }

    pub fn add_tx(&mut self, h: usize, b: usize, n: u32) {
        self.tx[h * self.types + b] += n;
    }

    pub fn add_rx(&mut self, h: usize, b: usize, n: u32) {
        self.rx[h * self.types + b] += n;
    }

    pub fn tx(&self, h: usize, b: usize) -> u32 {
        self.tx[h * self.types + b]
    }

    pub fn rx(&self, h: usize, b: usize) -> u32 {
        self.rx[h * self.types + b]
    }
}

#[derive(Clone, Debug)]
pub struct Phase2Stop {
    pub bits: BitMatrix,
    pub slots: Phase2Slots,
    pub participation: Participation,
    pub m1: Option<M1StopTrace>,
}

/// Balls-and-bins frame per type: ℓ slots for each of the T types.
pub fn trep_phase2_stop(load: &BlockLoad) -> Phase2Stop {
    let (types, blocks) = (load.types(), load.blocks());
    let mut participation = Participation::new(types, blocks);
    for h in 0..blocks {
        for b in 0..types {
            if load.count(h, b) > 0 {
                participation.add_tx(h, b, 1);
            }
        }
    }
    Phase2Stop {
        bits: load.presence(),
        slots: Phase2Slots {
            step1: (types * blocks) as u64,
            ..Default::default()
        },
        participation,
        m1: None,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StopReport {
    pub phase1_slots: u64,
    pub phase2: Phase2Slots,
    pub n_tilde: Vec<f64>,
    pub params: Vec<Phase2Params>,
    /// Estimates from the cumulative grid after this stop.
    pub estimates: Vec<f64>,
    pub m1: Option<M1StopTrace>,
}

impl StopReport {
    pub fn slots(&self) -> u64 {
        self.phase1_slots + self.phase2.total()
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub scheme: Scheme,
    pub estimates: Vec<Estimate>,
    pub truth: Vec<u32>,
    pub bits: BitMatrix,
    pub stops: Vec<StopReport>,
    pub total_slots: u64,
    pub ledger: EnergyLedger,
}

struct NodeDraws {
    /// Index into `patterns`/`phase2` for active nodes.
    slot: Vec<u32>,
    patterns: Vec<u64>,
    phase2: Vec<Phase2Draw>,
}

fn draw_nodes<R: Rng>(dep: &Deployment, trials: usize, t: u32, ell: u32, rng: &mut R) -> NodeDraws {
    let active = dep.nodes.iter().filter(|n| n.active).count();
    let mut slot = vec![u32::MAX; dep.nodes.len()];
    let mut patterns = Vec::with_capacity(active * trials);
    {
        let mut pool = BitPool::new(rng);
        let mut next = 0u32;
        for (k, n) in dep.nodes.iter().enumerate() {
            if n.active {
                slot[k] = next;
                next += 1;
                for _ in 0..trials {
                    patterns.push(srcm::draw_trial_pattern(&mut pool, t));
                }
            }
        }
    }
    let phase2 = (0..active).map(|_| Phase2Draw::draw(rng, ell)).collect();
    NodeDraws {
        slot,
        patterns,
        phase2,
    }
}

fn estimator_rate(rate: EstimatorRate, params: &Phase2Params) -> f64 {
    match rate {
        EstimatorRate::P => params.p,
        EstimatorRate::TwoPowI => params.transmit_probability(),
    }
}

/// Runs `scheme` over every stop of `deployment`.
pub fn run<R: Rng>(
    scheme: Scheme,
    deployment: &Deployment,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<ProtocolOutcome> {
    deployment.validate()?;
    let acc = &config.accuracy;
    acc.validate()?;
    let types = deployment.types;
    match scheme {
        Scheme::Trep => {}
        Scheme::HsrcM1 if !(2..=32).contains(&types) => {
            return Err(invalid(format!("HSRC-M1 needs 2 <= T <= 32, got {types}")));
        }
        Scheme::HsrcM2 if !(2..=hsrc_m2::MAX_TYPES).contains(&types) => {
            return Err(invalid(format!(
                "HSRC-M2 needs 2 <= T <= {}, got {types}",
                hsrc_m2::MAX_TYPES
            )));
        }
        _ => {}
    }
    let m2 = match scheme {
        Scheme::HsrcM2 => Some(hsrc_m2::M2Engine::for_types(types)?),
        _ => None,
    };

    let trials = acc.trials as usize;
    let t = acc.trial_len;
    let ell = acc.ell;
    let draws = draw_nodes(deployment, trials, t, ell, rng);

    let mut phase1: Vec<Phase1State> = (0..types).map(|_| Phase1State::new(acc.trials, t)).collect();
    let mut bits = BitMatrix::new(types, ell as usize);
    let mut ledger = EnergyLedger::new(deployment.nodes.len());
    let mut reports = Vec::with_capacity(deployment.stops.len());
    let mut params = vec![Phase2Params { p: 1.0, i: 1 }; types];
    let p1_window = t as u64 * acc.trials as u64;
    let mut total_slots = 0u64;

    for stop in &deployment.stops {
        // Phase 1: W trials of t slots for each type.
        for &k in stop {
            let k = k as usize;
            let node = deployment.nodes[k];
            if !node.active {
                continue;
            }
            let base = draws.slot[k] as usize * trials;
            for w in 0..trials {
                phase1[node.type_index].absorb(w, draws.patterns[base + w]);
            }
        }
        let n_tilde: Vec<f64> = phase1.iter().map(|s| s.rough_estimate()).collect();
        for b in 0..types {
            params[b] = compute_pi(n_tilde[b], ell);
        }

        // Phase 2.
        let mut load = BlockLoad::new(types, ell as usize);
        for &k in stop {
            let k = k as usize;
            let node = deployment.nodes[k];
            if node.active {
                let d = draws.phase2[draws.slot[k] as usize];
                if d.transmits(params[node.type_index].i) {
                    load.add(node.type_index, d.block as usize);
                }
            }
        }
        let res = match scheme {
            Scheme::Trep => trep_phase2_stop(&load),
            Scheme::HsrcM1 => hsrc_m1::phase2_stop(&load, acc.slot_width_bits)?,
            Scheme::HsrcM2 => m2
                .as_ref()
                .expect("engine built above")
                .phase2_stop(&load, acc.slot_width_bits, config.nested_bp)?,
        };
        bits.or_assign(&res.bits)?;

        let p2_total = res.slots.total();
        for u in ledger.usage.iter_mut() {
            u.p1_idle += p1_window;
            u.p2_idle += p2_total;
        }
        for &k in stop {
            let k = k as usize;
            let node = deployment.nodes[k];
            if !node.active {
                continue;
            }
            let u = &mut ledger.usage[k];
            let base = draws.slot[k] as usize * trials;
            let sent: u64 = draws.patterns[base..base + trials]
                .iter()
                .map(|s| s.count_ones() as u64)
                .sum();
            u.p1_tx += sent;
            u.p1_idle -= sent;
            let d = draws.phase2[draws.slot[k] as usize];
            if d.transmits(params[node.type_index].i) {
                let h = d.block as usize;
                let tx = res.participation.tx(h, node.type_index) as u64;
                let rx = res.participation.rx(h, node.type_index) as u64;
                u.p2_tx += tx;
                u.p2_rx += rx;
                u.p2_idle -= tx + rx;
            }
        }

        let phase1_slots = p1_window * types as u64;
        total_slots += phase1_slots + p2_total;
        let estimates = (0..types)
            .map(|b| {
                let z = bits.count_zeros(b) as u32;
                final_estimate(z, ell, estimator_rate(config.estimator_rate, &params[b])).value
            })
            .collect();
        reports.push(StopReport {
            phase1_slots,
            phase2: res.slots,
            n_tilde,
            params: params.clone(),
            estimates,
            m1: res.m1,
        });
    }

    let estimates = (0..types)
        .map(|b| {
            let z = bits.count_zeros(b) as u32;
            final_estimate(z, ell, estimator_rate(config.estimator_rate, &params[b]))
        })
        .collect();
    Ok(ProtocolOutcome {
        scheme,
        estimates,
        truth: deployment.true_counts(),
        bits,
        stops: reports,
        total_slots,
        ledger,
    })
}
