use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use crate::channel::{BitMatrix, BlockOutcome};
use crate::config::{NestedBp, ProtocolConfig};
use crate::error::{Error, Result};
use crate::hsrc_m1::{self, ceil_div, three_step_frame, BpCharge, Frame};
use crate::protocol::{self, BlockLoad, Deployment, Participation, Phase2Slots, Phase2Stop, ProtocolOutcome, Scheme};

use super::decoder::{Chi, DecoderTable};
use super::plan::{plan_for, Step2Resolution};
use super::MAX_TYPES;

/// Decoder, χ and step-2 plans of one group size.
#[derive(Debug)]
pub(crate) struct Level {
    table: Arc<DecoderTable>,
    chi: Chi,
    plans: Vec<Option<Step2Resolution>>,
}

impl Level {
    fn build(types: usize) -> Result<Level> {
        let table = DecoderTable::for_types(types)?;
        let chi = Chi::from_table(&table);
        let n_codes = 1usize << (2 * table.slots());
        let mut plans = vec![None; n_codes];
        for code in table.reachable().collect::<Vec<_>>() {
            plans[code] = Some(plan_for(&table, code)?);
        }
        Ok(Level { table, chi, plans })
    }

    fn cached(types: usize) -> Result<Arc<Level>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Level>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(l) = cache.lock().expect("level cache poisoned").get(&types) {
            return Ok(l.clone());
        }
        let level = Arc::new(Level::build(types)?);
        cache
            .lock()
            .expect("level cache poisoned")
            .entry(types)
            .or_insert(level.clone());
        Ok(level)
    }
}

/// Precomputed tables for a T-type deployment and every group size its
/// recursion reaches.
#[derive(Clone, Debug)]
pub struct M2Engine {
    types: usize,
    levels: HashMap<usize, Arc<Level>>,
}

impl M2Engine {
    pub fn for_types(types: usize) -> Result<M2Engine> {
        if !(2..=MAX_TYPES).contains(&types) {
            return Err(Error::InvalidParameter(format!(
                "HSRC-M2 needs 2 <= T <= {MAX_TYPES}, got {types}"
            )));
        }
        let mut levels = HashMap::new();
        let mut todo = vec![types];
        while let Some(g) = todo.pop() {
            if g < 4 || levels.contains_key(&g) {
                continue;
            }
            levels.insert(g, Level::cached(g)?);
            todo.push(g.div_ceil(2));
            todo.push(g / 2);
        }
        Ok(M2Engine { types, levels })
    }

    pub fn types(&self) -> usize {
        self.types
    }

    /// b′ of the top level, 0 when T ≤ 3.
    pub fn bp_bits(&self) -> u32 {
        self.levels.get(&self.types).map_or(0, |l| l.chi.bits())
    }

    pub fn phase2_stop(&self, load: &BlockLoad, slot_width: u32, nested: NestedBp) -> Result<Phase2Stop> {
        if load.types() != self.types {
            return Err(Error::InvalidParameter(format!("load has {} types, engine expects {}", load.types(), self.types)));
        }
        if self.types <= 3 {
            return hsrc_m1::phase2_stop(load, slot_width);
        }
        let blocks: Vec<usize> = (0..load.blocks()).collect();
        let mut part = Participation::new(self.types, load.blocks());
        let mut slots = Phase2Slots::default();
        let masks = {
            let mut frame = Frame {
                load,
                part: &mut part,
                slots: &mut slots,
                slot_width,
            };
            let nested = match nested {
                NestedBp::Count => BpCharge::Nested,
                NestedBp::Free => BpCharge::Free,
            };
            self.frame(&mut frame, 0, self.types, &blocks, BpCharge::Top, nested)?
        };
        let mut bits = BitMatrix::new(self.types, load.blocks());
        for (h, m) in masks.iter().enumerate() {
            for b in 0..self.types {
                if m >> b & 1 == 1 {
                    bits.set(b, h);
                }
            }
        }
        Ok(Phase2Stop {
            bits,
            slots,
            participation: part,
            m1: None,
        })
    }

    /// Two-step frame over `blocks` for types `offset..offset+g`; returns the
    /// presence mask (bit j = type offset+j) of every block.
    fn frame(
        &self,
        f: &mut Frame<'_>,
        offset: usize,
        g: usize,
        blocks: &[usize],
        bp: BpCharge,
        nested: BpCharge,
    ) -> Result<Vec<u32>> {
        if blocks.is_empty() {
            return Ok(Vec::new());
        }
        if g <= 3 {
            return three_step_frame(f, offset, g, blocks, bp).map(|(m, _)| m);
        }
        let level = &self.levels[&g];
        let symbols = &level.table.symbols;
        f.slots.step1 += (symbols.slots * blocks.len()) as u64;
        let bp_slots = f.charge_bp(bp, ceil_div(level.chi.bits() as u64 * blocks.len() as u64, f.slot_width));

        let mut masks = vec![0u32; blocks.len()];
        let mut split_pos = Vec::new();
        let mut split_blocks = Vec::new();
        let mut split = None;
        for (pos, &h) in blocks.iter().enumerate() {
            let counts = &f.load.block(h)[offset..offset + g];
            for (j, &c) in counts.iter().enumerate() {
                if c > 0 {
                    f.part.add_tx(h, offset + j, symbols.transmissions(j));
                    f.part.add_rx(h, offset + j, bp_slots as u32);
                }
            }
            let code = symbols.outcome_code(counts);
            let res = level.plans[code].as_ref().ok_or_else(|| {
                Error::InconsistentBlock(format!(
                    "{} is unreachable for T = {g}",
                    BlockOutcome::from_code(code, symbols.slots)
                ))
            })?;
            match res {
                Step2Resolution::Plan(plan) => {
                    f.slots.resolution += plan.len() as u64;
                    for slot in &plan.slots {
                        for &(j, _) in &slot.roles {
                            if counts[j] > 0 {
                                f.part.add_tx(h, offset + j, 1);
                            }
                        }
                    }
                    masks[pos] = plan.resolve(counts).ok_or_else(|| {
                        Error::InconsistentBlock(format!(
                            "step-2 outcome not in plan for {}",
                            BlockOutcome::from_code(code, symbols.slots)
                        ))
                    })?;
                }
                Step2Resolution::Split(groups) => {
                    split = Some(groups);
                    split_pos.push(pos);
                    split_blocks.push(h);
                }
            }
        }
        if let Some(groups) = split {
            for &(go, gs) in groups {
                let sub = self.frame(f, offset + go, gs, &split_blocks, nested, nested)?;
                for (&pos, m) in split_pos.iter().zip(sub) {
                    masks[pos] |= m << go;
                }
            }
        }
        Ok(masks)
    }
}

pub fn run_hsrc_m2<R: Rng>(
    deployment: &Deployment,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<ProtocolOutcome> {
    protocol::run(Scheme::HsrcM2, deployment, config, rng)
}

fn join(types: &[usize]) -> String {
    types.iter().map(|b| (b + 1).to_string()).collect::<Vec<_>>().join(" ")
}

/// Every reachable step-1 outcome of the T-type scheme with its verdicts,
/// χ code and step-2 slot count. Types are numbered from 1.
pub fn dump_decoder_csv(types: usize) -> Result<String> {
    let level = Level::build(types)?;
    let mut out = String::from("outcome,active,inactive,not_sure,chi_code,step2_slots\n");
    for code in level.table.reachable() {
        let st = level.table.status(code)?;
        let not_sure = st.not_sure_text();
        let plan = match level.plans[code].as_ref().expect("reachable") {
            Step2Resolution::Plan(p) => p.len().to_string(),
            Step2Resolution::Split(_) => "split".to_string(),
        };
        let chi = level.chi.code(st.unsure_mask()).expect("member of chi");
        let outcome: String = BlockOutcome::from_code(code, level.table.slots())
            .slots()
            .iter()
            .map(|s| s.letter())
            .collect();
        writeln!(
            out,
            "{outcome},{},{},\"{not_sure}\",{chi},{plan}",
            join(&st.active()),
            join(&st.inactive())
        )
        .expect("writing to a string");
    }
    Ok(out)
}
