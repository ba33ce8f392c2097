//! Exhaustive consistency decoder and the ambiguity classes χ(T).

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::channel::{BlockOutcome, SlotOutcome, Symbol};
use crate::error::{Error, Result};

use super::{SymbolTable, MAX_TYPES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Active,
    Inactive,
    Unsure,
}

/// One item of the "not sure" list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NotSure {
    /// Presence of this type is unknown.
    Type(usize),
    /// Exactly one node of exactly one of these types transmitted.
    OneOf(Vec<usize>),
    /// The present types among the unsure ones form one of these sets
    /// (or a subset of one of them).
    OneOfSets(Vec<Vec<usize>>),
}

fn braces(types: &[usize]) -> String {
    let inner: Vec<String> = types.iter().map(|b| (b + 1).to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

/// Types are printed from 1: `3`, `one of {5,6}`, `one of {{4,6},{4,5,7}}`.
impl fmt::Display for NotSure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NotSure::Type(b) => write!(f, "{}", b + 1),
            NotSure::OneOf(s) => write!(f, "one of {}", braces(s)),
            NotSure::OneOfSets(s) => {
                let inner: Vec<String> = s.iter().map(|x| braces(x)).collect();
                write!(f, "one of {{{}}}", inner.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeStatus {
    pub verdicts: Vec<Verdict>,
    pub not_sure: Vec<NotSure>,
}

impl TypeStatus {
    fn with(&self, v: Verdict) -> Vec<usize> {
        (0..self.verdicts.len()).filter(|&b| self.verdicts[b] == v).collect()
    }

    pub fn active(&self) -> Vec<usize> {
        self.with(Verdict::Active)
    }

    pub fn inactive(&self) -> Vec<usize> {
        self.with(Verdict::Inactive)
    }

    pub fn unsure(&self) -> Vec<usize> {
        self.with(Verdict::Unsure)
    }

    pub fn unsure_mask(&self) -> u32 {
        mask_of(&self.unsure())
    }

    pub fn active_mask(&self) -> u32 {
        mask_of(&self.active())
    }

    /// The not-sure list joined with `; `.
    pub fn not_sure_text(&self) -> String {
        let items: Vec<String> = self.not_sure.iter().map(|n| n.to_string()).collect();
        items.join("; ")
    }
}

pub(crate) fn mask_of(types: &[usize]) -> u32 {
    types.iter().fold(0, |m, &b| m | 1 << b)
}

pub(crate) fn members(mask: u32) -> Vec<usize> {
    (0..32).filter(|&b| mask >> b & 1 == 1).collect()
}

/// Multiplicity vector with two bits per type, each 0, 1 or 2 (meaning ≥2).
pub(crate) type Packed = u32;

pub(crate) fn count(v: Packed, b: usize) -> u32 {
    (v >> (2 * b)) & 3
}

pub(crate) fn presence(v: Packed, types: usize) -> u32 {
    (0..types).filter(|&b| count(v, b) > 0).fold(0, |m, b| m | 1 << b)
}

pub(crate) fn pack(counts: &[u32]) -> Packed {
    counts
        .iter()
        .enumerate()
        .fold(0, |v, (b, &c)| v | (c.min(2) << (2 * b)))
}

#[derive(Clone, Debug)]
pub(crate) struct OutcomeEntry {
    pub status: TypeStatus,
    /// Consistent vectors; left empty for the all-collision outcome.
    pub vectors: Vec<Packed>,
}

/// Decoder verdicts for every reachable step-1 outcome of one group size.
#[derive(Clone, Debug)]
pub struct DecoderTable {
    pub symbols: SymbolTable,
    entries: Vec<Option<OutcomeEntry>>,
}

fn slot_outcome(a: u32, b: u32) -> SlotOutcome {
    match (a, b) {
        (0, 0) => SlotOutcome::Empty,
        (1, 0) => SlotOutcome::Alpha,
        (0, 1) => SlotOutcome::Beta,
        _ => SlotOutcome::Collision,
    }
}

impl DecoderTable {
    /// Enumerates {0,1,2}^T once; cached per T.
    pub fn for_types(types: usize) -> Result<Arc<DecoderTable>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<DecoderTable>>>> = OnceLock::new();
        if !(2..=MAX_TYPES).contains(&types) {
            return Err(Error::InvalidParameter(format!(
                "decoder supports 2 <= T <= {MAX_TYPES}, got {types}"
            )));
        }
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().expect("decoder cache poisoned").get(&types) {
            return Ok(t.clone());
        }
        let table = Arc::new(Self::build(SymbolTable::for_types(types)?));
        cache
            .lock()
            .expect("decoder cache poisoned")
            .entry(types)
            .or_insert(table.clone());
        Ok(table)
    }

    fn build(symbols: SymbolTable) -> DecoderTable {
        let (t, slots) = (symbols.types, symbols.slots);
        let n_codes = 1usize << (2 * slots);
        let all_c = n_codes - 1;
        let mut always = vec![u32::MAX; n_codes];
        let mut ever = vec![0u32; n_codes];
        let mut seen = vec![false; n_codes];
        let mut vectors: Vec<Vec<Packed>> = vec![Vec::new(); n_codes];

        let mut digits = vec![0u32; t];
        let mut a = vec![0u32; slots];
        let mut bsum = vec![0u32; slots];
        let apply = |j: usize, delta: i32, a: &mut [u32], bsum: &mut [u32]| {
            for s in 0..slots {
                match symbols.symbols[j][s] {
                    Some(Symbol::Alpha) => a[s] = (a[s] as i32 + delta) as u32,
                    Some(Symbol::Beta) => bsum[s] = (bsum[s] as i32 + delta) as u32,
                    None => {}
                }
            }
        };
        loop {
            let code = (0..slots).fold(0, |c, s| c * 4 + slot_outcome(a[s], bsum[s]).index());
            let v = pack(&digits);
            let p = presence(v, t);
            seen[code] = true;
            always[code] &= p;
            ever[code] |= p;
            if code != all_c {
                vectors[code].push(v);
            }
            let mut j = 0;
            while j < t {
                if digits[j] < 2 {
                    digits[j] += 1;
                    apply(j, 1, &mut a, &mut bsum);
                    break;
                }
                digits[j] = 0;
                apply(j, -2, &mut a, &mut bsum);
                j += 1;
            }
            if j == t {
                break;
            }
        }

        let entries = (0..n_codes)
            .map(|code| {
                if !seen[code] {
                    return None;
                }
                let vs = std::mem::take(&mut vectors[code]);
                let verdicts = (0..t)
                    .map(|b| {
                        if always[code] >> b & 1 == 1 {
                            Verdict::Active
                        } else if ever[code] >> b & 1 == 0 {
                            Verdict::Inactive
                        } else {
                            Verdict::Unsure
                        }
                    })
                    .collect::<Vec<_>>();
                let unsure = (0..t)
                    .filter(|&b| verdicts[b] == Verdict::Unsure)
                    .fold(0, |m, b| m | 1 << b);
                let not_sure = if code == all_c {
                    members(unsure).into_iter().map(NotSure::Type).collect()
                } else {
                    structure(unsure, &vs, t)
                };
                Some(OutcomeEntry {
                    status: TypeStatus { verdicts, not_sure },
                    vectors: vs,
                })
            })
            .collect();
        DecoderTable { symbols, entries }
    }

    pub fn types(&self) -> usize {
        self.symbols.types
    }

    pub fn slots(&self) -> usize {
        self.symbols.slots
    }

    pub fn is_reachable(&self, code: usize) -> bool {
        self.entries.get(code).is_some_and(|e| e.is_some())
    }

    /// Reachable outcome codes in increasing (lexicographic) order.
    pub fn reachable(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.entries.len()).filter(|&c| self.is_reachable(c))
    }

    pub(crate) fn entry(&self, code: usize) -> Result<&OutcomeEntry> {
        self.entries
            .get(code)
            .and_then(|e| e.as_ref())
            .ok_or_else(|| {
                Error::InconsistentBlock(format!(
                    "{} is unreachable for T = {}",
                    BlockOutcome::from_code(code, self.slots()),
                    self.types()
                ))
            })
    }

    pub fn status(&self, code: usize) -> Result<&TypeStatus> {
        self.entry(code).map(|e| &e.status)
    }

    pub fn all_collision_code(&self) -> usize {
        (1usize << (2 * self.slots())) - 1
    }
}

/// Sets S ⊆ `unsure` (|S| ≥ 2) with exactly one node among them in every
/// consistent vector; only maximal ones are returned.
pub(crate) fn exact_one_sets(unsure: u32, vectors: &[Packed], types: usize) -> Vec<u32> {
    let mut sigs: Vec<(u32, u32)> = vectors
        .iter()
        .map(|&v| {
            let ones = (0..types).filter(|&b| count(v, b) == 1).fold(0, |m, b| m | 1 << b);
            let zeros = (0..types).filter(|&b| count(v, b) == 0).fold(0, |m, b| m | 1 << b);
            (ones & unsure, zeros & unsure)
        })
        .collect();
    sigs.sort_unstable();
    sigs.dedup();
    // Candidates: types that never reach two nodes.
    let exact = sigs.iter().fold(unsure, |m, &(o, z)| m & (o | z));
    let cand = members(exact);
    let mut found: Vec<u32> = Vec::new();
    for sub in 1u32..(1 << cand.len()) {
        if sub.count_ones() < 2 {
            continue;
        }
        let s = (0..cand.len())
            .filter(|&i| sub >> i & 1 == 1)
            .fold(0, |m, i| m | 1 << cand[i]);
        if sigs.iter().all(|&(o, _)| (s & o).count_ones() == 1) {
            found.push(s);
        }
    }
    let maximal: Vec<u32> = found
        .iter()
        .copied()
        .filter(|&s| !found.iter().any(|&o| o != s && o & s == s))
        .collect();
    maximal
}

/// Maximal presence patterns restricted to `unsure`.
pub(crate) fn presence_patterns(unsure: u32, vectors: &[Packed], types: usize) -> Vec<u32> {
    let mut pats: Vec<u32> = vectors.iter().map(|&v| presence(v, types) & unsure).collect();
    pats.sort_unstable();
    pats.dedup();
    pats.iter()
        .copied()
        .filter(|&p| !pats.iter().any(|&o| o != p && o & p == p))
        .collect()
}

fn structure(unsure: u32, vectors: &[Packed], types: usize) -> Vec<NotSure> {
    if unsure == 0 {
        return Vec::new();
    }
    let sets = exact_one_sets(unsure, vectors, types);
    let overlap = sets
        .iter()
        .enumerate()
        .any(|(i, &a)| sets[i + 1..].iter().any(|&b| a & b != 0));
    if overlap {
        let mut pats: Vec<Vec<usize>> = presence_patterns(unsure, vectors, types)
            .into_iter()
            .map(members)
            .collect();
        pats.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        return vec![NotSure::OneOfSets(pats)];
    }
    let grouped = sets.iter().fold(0, |m, &s| m | s);
    let mut out: Vec<NotSure> = members(unsure & !grouped)
        .into_iter()
        .map(NotSure::Type)
        .collect();
    let mut groups: Vec<Vec<usize>> = sets.into_iter().map(members).collect();
    groups.sort();
    out.extend(groups.into_iter().map(NotSure::OneOf));
    out
}

/// Verdicts implied by a step-1 block outcome of the T-type scheme.
pub fn consistency_decode(block: &BlockOutcome, types: usize) -> Result<TypeStatus> {
    let table = DecoderTable::for_types(types)?;
    if block.len() != table.slots() {
        return Err(Error::InvalidParameter(format!("block has {} slots, expected {}", block.len(), table.slots())));
    }
    table.status(block.code()).cloned()
}

/// χ(T): distinct unsure sets over all reachable outcomes. The empty set has
/// code 0; the others follow in order of first appearance when outcomes are
/// scanned lexicographically (E < α < β < C, slot 1 first).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chi {
    pub members: Vec<u32>,
}

impl Chi {
    pub fn from_table(table: &DecoderTable) -> Chi {
        let mut members = vec![0u32];
        for code in table.reachable() {
            let m = table.status(code).expect("reachable").unsure_mask();
            if !members.contains(&m) {
                members.push(m);
            }
        }
        Chi { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// b′(T) = ⌈log2 |χ(T)|⌉.
    pub fn bits(&self) -> u32 {
        (self.members.len() as u32).next_power_of_two().trailing_zeros()
    }

    pub fn code(&self, unsure_mask: u32) -> Option<usize> {
        self.members.iter().position(|&m| m == unsure_mask)
    }

    /// Members as sorted type lists.
    pub fn sets(&self) -> Vec<Vec<usize>> {
        self.members.iter().map(|&m| members(m)).collect()
    }
}

pub fn enumerate_chi(types: usize) -> Result<Chi> {
    Ok(Chi::from_table(&*DecoderTable::for_types(types)?))
}
