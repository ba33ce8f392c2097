//! HSRC-M1 phase 2: the three-step protocol.
//!
//! Step 1 uses blocks of T−1 slots. Type 0 sends α in every slot of its block
//! and type b ≥ 1 sends β in slot b only. Blocks whose slots all collide are
//! resolved by a one-slot-per-block α round for type 0 (step 2) and, when
//! that collides too, one β slot per remaining type (step 3).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{BitMatrix, BlockOutcome, SlotAccumulator, SlotOutcome, Symbol};
use crate::config::ProtocolConfig;
use crate::error::{Error, Result};
use crate::protocol::{self, BlockLoad, Deployment, Participation, Phase2Slots, Phase2Stop, ProtocolOutcome, Scheme};

/// Symbols of type `b` over the T−1 slots of a block; `None` is silence.
pub fn m1_combination(b: usize, types: usize) -> Result<Vec<Option<Symbol>>> {
    if types < 2 || b >= types {
        return Err(Error::TypeOutOfRange { index: b, types });
    }
    Ok((0..types - 1)
        .map(|j| {
            if b == 0 {
                Some(Symbol::Alpha)
            } else if j + 1 == b {
                Some(Symbol::Beta)
            } else {
                None
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum M1Verdict {
    /// Presence of every type.
    Resolved(Vec<bool>),
    AllAmbiguous,
}

/// Decodes a step-1 block of T−1 slots.
pub fn m1_decode_step1(block: &[SlotOutcome]) -> Result<M1Verdict> {
    use SlotOutcome::*;
    if block.is_empty() {
        return Err(Error::InconsistentBlock("empty block".into()));
    }
    if block.iter().all(|&s| s == Collision) {
        return Ok(M1Verdict::AllAmbiguous);
    }
    let bad = || Error::InconsistentBlock(BlockOutcome(block.to_vec()).to_string());
    let mut present = vec![false; block.len() + 1];
    if block.iter().any(|&s| s == Empty || s == Beta) {
        for (j, &s) in block.iter().enumerate() {
            present[j + 1] = match s {
                Empty => false,
                Beta | Collision => true,
                Alpha => return Err(bad()),
            };
        }
    } else {
        present[0] = true;
        for (j, &s) in block.iter().enumerate() {
            present[j + 1] = match s {
                Alpha => false,
                Collision => true,
                _ => return Err(bad()),
            };
        }
    }
    Ok(M1Verdict::Resolved(present))
}

/// Step-1 outcome of block `h` for the group of types `offset..offset+g`.
pub fn m1_block_outcome(load: &BlockLoad, offset: usize, g: usize, h: usize) -> BlockOutcome {
    let counts = &load.block(h)[offset..offset + g];
    BlockOutcome(
        (1..g)
            .map(|j| {
                let mut acc = SlotAccumulator::new();
                acc.add(counts[0], Symbol::Alpha);
                acc.add(counts[j], Symbol::Beta);
                acc.outcome()
            })
            .collect(),
    )
}

/// Step-1 outcomes of `blocks` for the types `offset..offset+g`.
pub fn m1_step1(load: &BlockLoad, offset: usize, g: usize, blocks: &[usize]) -> Vec<BlockOutcome> {
    blocks
        .iter()
        .map(|&h| m1_block_outcome(load, offset, g, h))
        .collect()
}

/// Result of steps 2 and 3 for the all-collision blocks of a frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step23 {
    /// Presence mask (bit j = local type j) per ambiguous block.
    pub presence: Vec<u32>,
    /// Ambiguous blocks whose step-2 slot collided.
    pub listed: Vec<bool>,
    pub r: u32,
}

/// Steps 2 and 3 for the all-collision `ambiguous` blocks.
pub fn m1_step2_step3(load: &BlockLoad, offset: usize, g: usize, ambiguous: &[usize]) -> Step23 {
    let others: u32 = ((1u32 << g) - 1) & !1;
    let mut presence = Vec::with_capacity(ambiguous.len());
    let mut listed = Vec::with_capacity(ambiguous.len());
    for &h in ambiguous {
        let counts = &load.block(h)[offset..offset + g];
        let mut step2 = SlotAccumulator::new();
        step2.add(counts[0], Symbol::Alpha);
        match step2.outcome() {
            // Every slot collided without type 0: two or more of each other type.
            SlotOutcome::Empty => {
                presence.push(others);
                listed.push(false);
            }
            SlotOutcome::Alpha => {
                presence.push(others | 1);
                listed.push(false);
            }
            _ => {
                let mut mask = 1u32;
                for (j, &c) in counts.iter().enumerate().skip(1) {
                    let mut s = SlotAccumulator::new();
                    s.add(c, Symbol::Beta);
                    if !s.outcome().is_empty() {
                        mask |= 1 << j;
                    }
                }
                presence.push(mask);
                listed.push(true);
            }
        }
    }
    let r = listed.iter().filter(|&&x| x).count() as u32;
    Step23 { presence, listed, r }
}

/// Per-stop step counts of HSRC-M1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct M1StopTrace {
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "R")]
    pub r: u32,
    pub bp1_slots: u64,
    pub bp2_slots: u64,
    pub slots: u64,
    #[serde(skip)]
    pub outcomes: Vec<BlockOutcome>,
}

/// How a frame's broadcast packets are charged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BpCharge {
    Top,
    Nested,
    Free,
}

pub(crate) struct Frame<'a> {
    pub load: &'a BlockLoad,
    pub part: &'a mut Participation,
    pub slots: &'a mut Phase2Slots,
    pub slot_width: u32,
}

impl Frame<'_> {
    pub(crate) fn charge_bp(&mut self, bp: BpCharge, n: u64) -> u64 {
        match bp {
            BpCharge::Top => {
                self.slots.broadcast += n;
                n
            }
            BpCharge::Nested => {
                self.slots.nested_broadcast += n;
                n
            }
            BpCharge::Free => 0,
        }
    }
}

pub(crate) fn ceil_div(a: u64, b: u32) -> u64 {
    a.div_ceil(b as u64)
}

/// Runs the three steps over `blocks` for the types `offset..offset+g` and
/// returns the decoded presence mask of every block.
pub(crate) fn three_step_frame(
    frame: &mut Frame<'_>,
    offset: usize,
    g: usize,
    blocks: &[usize],
    bp: BpCharge,
) -> Result<(Vec<u32>, M1StopTrace)> {
    assert!(g >= 2, "a three-step frame needs at least two types");
    let load = frame.load;
    let outcomes = m1_step1(load, offset, g, blocks);
    let step1 = ((g - 1) * blocks.len()) as u64;
    frame.slots.step1 += step1;

    let bp1 = frame.charge_bp(bp, ceil_div(blocks.len() as u64, frame.slot_width));
    let mut masks = vec![0u32; blocks.len()];
    let mut ambiguous = Vec::new();
    let mut ambiguous_pos = Vec::new();
    for (pos, (&h, out)) in blocks.iter().zip(&outcomes).enumerate() {
        for j in 0..g {
            if load.count(h, offset + j) > 0 {
                let tx = if j == 0 { (g - 1) as u32 } else { 1 };
                frame.part.add_tx(h, offset + j, tx);
                frame.part.add_rx(h, offset + j, bp1 as u32);
            }
        }
        match m1_decode_step1(out.slots())? {
            M1Verdict::Resolved(p) => {
                masks[pos] = p
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x)
                    .fold(0, |m, (j, _)| m | (1 << j));
            }
            M1Verdict::AllAmbiguous => {
                ambiguous.push(h);
                ambiguous_pos.push(pos);
            }
        }
    }

    let k = ambiguous.len() as u32;
    let s23 = m1_step2_step3(load, offset, g, &ambiguous);
    let bp2 = frame.charge_bp(bp, ceil_div(k as u64, frame.slot_width));
    frame.slots.resolution += k as u64 + (g as u64 - 1) * s23.r as u64;
    for (i, (&h, &pos)) in ambiguous.iter().zip(&ambiguous_pos).enumerate() {
        masks[pos] = s23.presence[i];
        if load.count(h, offset) > 0 {
            frame.part.add_tx(h, offset, 1);
        }
        for j in 1..g {
            if load.count(h, offset + j) > 0 {
                if bp2 > 0 {
                    frame.part.add_rx(h, offset + j, 1);
                }
                if s23.listed[i] {
                    frame.part.add_tx(h, offset + j, 1);
                }
            }
        }
    }
    let slots = step1 + bp1 + bp2 + k as u64 + (g as u64 - 1) * s23.r as u64;
    let trace = M1StopTrace {
        k,
        r: s23.r,
        bp1_slots: bp1,
        bp2_slots: bp2,
        slots,
        outcomes,
    };
    Ok((masks, trace))
}

/// One stop of HSRC-M1 phase 2 on the given load.
pub fn phase2_stop(load: &BlockLoad, slot_width: u32) -> Result<Phase2Stop> {
    let types = load.types();
    let blocks: Vec<usize> = (0..load.blocks()).collect();
    let mut part = Participation::new(types, load.blocks());
    let mut slots = Phase2Slots::default();
    let (masks, trace) = {
        let mut frame = Frame {
            load,
            part: &mut part,
            slots: &mut slots,
            slot_width,
        };
        three_step_frame(&mut frame, 0, types, &blocks, BpCharge::Top)?
    };
    let mut bits = BitMatrix::new(types, load.blocks());
    for (h, m) in masks.iter().enumerate() {
        for b in 0..types {
            if m >> b & 1 == 1 {
                bits.set(b, h);
            }
        }
    }
    Ok(Phase2Stop {
        bits,
        slots,
        participation: part,
        m1: Some(trace),
    })
}

pub fn run_hsrc_m1<R: Rng>(
    deployment: &Deployment,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<ProtocolOutcome> {
    protocol::run(Scheme::HsrcM1, deployment, config, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use SlotOutcome::*;

    fn block(s: &str) -> Vec<SlotOutcome> {
        BlockOutcome::parse(s).unwrap().0
    }

    #[test]
    fn combinations() {
        use Symbol::*;
        assert_eq!(m1_combination(0, 4).unwrap(), vec![Some(Alpha); 3]);
        assert_eq!(m1_combination(1, 4).unwrap(), vec![Some(Beta), None, None]);
        assert_eq!(m1_combination(1, 2).unwrap(), vec![Some(Beta)]);
        assert!(m1_combination(4, 4).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(
            m1_decode_step1(&block("E E E")).unwrap(),
            M1Verdict::Resolved(vec![false; 4])
        );
        assert_eq!(
            m1_decode_step1(&block("C A A")).unwrap(),
            M1Verdict::Resolved(vec![true, true, false, false])
        );
        assert_eq!(m1_decode_step1(&block("C C C")).unwrap(), M1Verdict::AllAmbiguous);
        assert!(m1_decode_step1(&[Alpha, Empty]).is_err());
    }

    #[test]
    fn step1_examples() {
        let one = BlockLoad::from_transmitters(4, 1, &[(0, 0)]);
        assert_eq!(m1_block_outcome(&one, 0, 4, 0), BlockOutcome(vec![Alpha; 3]));
        let two = BlockLoad::from_transmitters(4, 1, &[(0, 0), (1, 0)]);
        assert_eq!(m1_block_outcome(&two, 0, 4, 0), BlockOutcome(vec![Collision, Alpha, Alpha]));
        let pair = BlockLoad::from_transmitters(4, 1, &[(0, 0), (0, 0)]);
        assert!(m1_block_outcome(&pair, 0, 4, 0).all_collision());
    }

    #[test]
    fn step23_examples() {
        let load = BlockLoad::from_transmitters(3, 1, &[(0, 0), (1, 0), (2, 0)]);
        let s = m1_step2_step3(&load, 0, 3, &[0]);
        assert_eq!((s.presence[0], s.r), (0b111, 0));

        let load = BlockLoad::from_transmitters(4, 1, &[(0, 0), (0, 0)]);
        let s = m1_step2_step3(&load, 0, 4, &[0]);
        assert_eq!((s.presence[0], s.r), (0b0001, 1));

        let empty = m1_step2_step3(&load, 0, 4, &[]);
        assert_eq!(empty.r, 0);
    }

    #[test]
    fn empty_stop_accounting() {
        let load = BlockLoad::new(4, 200);
        let out = phase2_stop(&load, 96).unwrap();
        assert_eq!(out.slots.total(), 3 * 200 + 3);
        let tr = out.m1.unwrap();
        assert_eq!((tr.k, tr.r, tr.bp2_slots), (0, 0, 0));
    }
}
