//! HSRC-M2 phase 2: the recursive two-step protocol.
//!
//! Step 1 uses blocks of η_T slots in which every type sends its own mix of
//! α and β. The MBS decodes each block by brute force over the multiplicity
//! vectors {0, 1, ≥2}^T, broadcasts which types are still in doubt, and step 2
//! resolves them with a few extra slots. Blocks that collide in every slot are
//! split into two halves that rerun the scheme for their own size.

mod decoder;
mod engine;
mod plan;

pub use decoder::{
    consistency_decode, enumerate_chi, Chi, DecoderTable, NotSure, TypeStatus, Verdict,
};
pub use engine::{dump_decoder_csv, run_hsrc_m2, M2Engine};
pub use plan::{schedule_step2, PlanSlot, Step2Plan, Step2Resolution};

use crate::channel::{outcome_code, BlockOutcome, SlotAccumulator, Symbol};
use crate::error::{Error, Result};
use crate::hsrc_m1::m1_combination;

/// Largest T the exhaustive decoder is built for.
pub const MAX_TYPES: usize = 12;

/// η_T: T/2 for even T, (T−1)/2 for odd T.
pub fn eta(types: usize) -> usize {
    types / 2
}

/// Symbols of type `b` over the η_T slots of a block.
pub fn m2_combination(b: usize, types: usize) -> Result<Vec<Option<Symbol>>> {
    if types < 2 || b >= types {
        return Err(Error::TypeOutOfRange { index: b, types });
    }
    if types <= 3 {
        return m1_combination(b, types);
    }
    let n = eta(types);
    // One-based type number.
    let k = b + 1;
    let mut out = vec![None; n];
    if types % 2 == 1 && k == types {
        out[0] = Some(Symbol::Beta);
        out[n - 1] = Some(Symbol::Alpha);
    } else if k <= n {
        for s in out.iter_mut().take(k) {
            *s = Some(Symbol::Alpha);
        }
    } else {
        for s in out.iter_mut().skip(n - (k - n)) {
            *s = Some(Symbol::Beta);
        }
    }
    Ok(out)
}

/// Step-1 symbols of every type for one group size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolTable {
    pub types: usize,
    pub slots: usize,
    pub symbols: Vec<Vec<Option<Symbol>>>,
}

impl SymbolTable {
    /// The HSRC-M2 table, which for T ≤ 3 is the HSRC-M1 one.
    pub fn for_types(types: usize) -> Result<Self> {
        let symbols = (0..types)
            .map(|b| m2_combination(b, types))
            .collect::<Result<Vec<_>>>()?;
        Ok(SymbolTable {
            types,
            slots: symbols[0].len(),
            symbols,
        })
    }

    /// Block outcome when `counts[b]` type-b nodes transmit.
    pub fn outcome(&self, counts: &[u32]) -> BlockOutcome {
        BlockOutcome(
            (0..self.slots)
                .map(|s| {
                    let mut acc = SlotAccumulator::new();
                    for (b, &c) in counts.iter().enumerate() {
                        if let Some(sym) = self.symbols[b][s] {
                            acc.add(c, sym);
                        }
                    }
                    acc.outcome()
                })
                .collect(),
        )
    }

    pub fn outcome_code(&self, counts: &[u32]) -> usize {
        outcome_code(self.outcome(counts).slots())
    }

    /// Slots in which type `b` transmits.
    pub fn transmissions(&self, b: usize) -> u32 {
        self.symbols[b].iter().filter(|s| s.is_some()).count() as u32
    }
}
