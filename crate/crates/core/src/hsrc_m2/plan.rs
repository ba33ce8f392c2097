//! Step-2 resolution schedules.
//!
//! A plan is a short list of slots, each naming the unsure types that
//! transmit and with which symbol. Exclusive groups ("exactly one of S") share
//! slots: a pair needs one slot with one member sending β, larger groups pair
//! members up as α/β so that every slot tells three cases apart. Any other
//! unsure type gets a slot of its own. Every plan is checked against all
//! multiplicity vectors consistent with the step-1 outcome.

use std::collections::HashMap;

use crate::channel::{outcome_code, BlockOutcome, SlotAccumulator, Symbol};
use crate::error::{Error, Result};

use super::decoder::{count, exact_one_sets, members, presence, DecoderTable, NotSure, Packed};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanSlot {
    /// (type, symbol) of every transmitting type.
    pub roles: Vec<(usize, Symbol)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step2Plan {
    pub slots: Vec<PlanSlot>,
    /// Plan outcome code to the presence mask of all types.
    decode: HashMap<usize, u32>,
}

impl Step2Plan {
    fn outcome_code(slots: &[PlanSlot], counts: impl Fn(usize) -> u32) -> usize {
        let out: Vec<_> = slots
            .iter()
            .map(|s| {
                let mut acc = SlotAccumulator::new();
                for &(b, sym) in &s.roles {
                    acc.add(counts(b), sym);
                }
                acc.outcome()
            })
            .collect();
        outcome_code(&out)
    }

    /// Builds the decode map, or `None` if two vectors with different
    /// presence produce the same plan outcome.
    fn verify(slots: Vec<PlanSlot>, vectors: &[Packed], types: usize) -> Option<Step2Plan> {
        let mut decode = HashMap::new();
        for &v in vectors {
            let code = Self::outcome_code(&slots, |b| count(v, b));
            let p = presence(v, types);
            if *decode.entry(code).or_insert(p) != p {
                return None;
            }
        }
        Some(Step2Plan { slots, decode })
    }

    /// Presence mask of all types given the actual node counts of the block.
    pub fn resolve(&self, counts: &[u32]) -> Option<u32> {
        let code = Self::outcome_code(&self.slots, |b| counts[b]);
        self.decode.get(&code).copied()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step2Resolution {
    Plan(Step2Plan),
    /// Every slot collided: rerun the scheme on each (offset, size) group.
    Split(Vec<(usize, usize)>),
}

impl Step2Resolution {
    /// Step-2 slots, not counting nested rounds.
    pub fn slots(&self) -> usize {
        match self {
            Step2Resolution::Plan(p) => p.len(),
            Step2Resolution::Split(_) => 0,
        }
    }
}

/// Halves of a group: ⌈g/2⌉ types first, then ⌊g/2⌋.
pub fn split_groups(g: usize) -> Vec<(usize, usize)> {
    let first = g.div_ceil(2);
    vec![(0, first), (first, g - first)]
}

fn group_slots(group: &[usize]) -> Vec<PlanSlot> {
    if group.len() == 2 {
        return vec![PlanSlot {
            roles: vec![(group[0], Symbol::Beta)],
        }];
    }
    let n = (group.len() - 1).div_ceil(2);
    (0..n)
        .map(|i| {
            let mut roles = vec![(group[2 * i], Symbol::Alpha)];
            if let Some(&b) = group.get(2 * i + 1) {
                roles.push((b, Symbol::Beta));
            }
            PlanSlot { roles }
        })
        .collect()
}

fn dedicated(b: usize) -> PlanSlot {
    PlanSlot {
        roles: vec![(b, Symbol::Beta)],
    }
}

fn prune(mut plan: Step2Plan, vectors: &[Packed], types: usize) -> Step2Plan {
    let mut i = plan.slots.len();
    while i > 0 {
        i -= 1;
        let mut slots = plan.slots.clone();
        slots.remove(i);
        if let Some(p) = Step2Plan::verify(slots, vectors, types) {
            plan = p;
        }
    }
    plan
}

pub(crate) fn plan_for(table: &DecoderTable, code: usize) -> Result<Step2Resolution> {
    let types = table.types();
    if code == table.all_collision_code() && types >= 4 {
        return Ok(Step2Resolution::Split(split_groups(types)));
    }
    let entry = table.entry(code)?;
    let unsure = entry.status.unsure_mask();
    let vectors = &entry.vectors;

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut taken = 0u32;
    let structured: Vec<Vec<usize>> = entry
        .status
        .not_sure
        .iter()
        .filter_map(|n| match n {
            NotSure::OneOf(s) => Some(s.clone()),
            _ => None,
        })
        .collect();
    if !structured.is_empty() {
        groups = structured;
    } else {
        let mut sets = exact_one_sets(unsure, vectors, types);
        sets.sort_by_key(|s| (std::cmp::Reverse(s.count_ones()), *s));
        for s in sets {
            if s & taken == 0 {
                taken |= s;
                groups.push(members(s));
            }
        }
    }
    let grouped = groups.iter().flatten().fold(0u32, |m, &b| m | 1 << b);
    let mut slots: Vec<PlanSlot> = members(unsure & !grouped).into_iter().map(dedicated).collect();
    for g in &groups {
        slots.extend(group_slots(g));
    }

    let plan = match Step2Plan::verify(slots, vectors, types) {
        Some(p) => p,
        None => {
            let all = members(unsure).into_iter().map(dedicated).collect();
            Step2Plan::verify(all, vectors, types).ok_or_else(|| {
                Error::InconsistentBlock(format!(
                    "no step-2 plan resolves {}",
                    BlockOutcome::from_code(code, table.slots())
                ))
            })?
        }
    };
    Ok(Step2Resolution::Plan(prune(plan, vectors, types)))
}

/// Step-2 schedule for a step-1 outcome of the T-type scheme.
pub fn schedule_step2(block: &BlockOutcome, types: usize) -> Result<Step2Resolution> {
    let table = DecoderTable::for_types(types)?;
    if block.len() != table.slots() {
        return Err(Error::InvalidParameter(format!("block has {} slots, expected {}", block.len(), table.slots())));
    }
    plan_for(&table, block.code())
}
