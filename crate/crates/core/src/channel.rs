//! Slot-level channel model and the presence-bit grid.
//!
//! The receiver only distinguishes four outcomes per slot. Two transmitters
//! always collide, even when they send the same symbol.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Alpha,
    Beta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SlotOutcome {
    Empty,
    Alpha,
    Beta,
    Collision,
}

impl SlotOutcome {
    pub const ALL: [SlotOutcome; 4] = [
        SlotOutcome::Empty,
        SlotOutcome::Alpha,
        SlotOutcome::Beta,
        SlotOutcome::Collision,
    ];

    pub fn index(self) -> usize {
        match self {
            SlotOutcome::Empty => 0,
            SlotOutcome::Alpha => 1,
            SlotOutcome::Beta => 2,
            SlotOutcome::Collision => 3,
        }
    }

    pub fn from_index(i: usize) -> SlotOutcome {
        Self::ALL[i]
    }

    pub fn is_empty(self) -> bool {
        self == SlotOutcome::Empty
    }

    pub fn letter(self) -> char {
        match self {
            SlotOutcome::Empty => 'E',
            SlotOutcome::Alpha => 'A',
            SlotOutcome::Beta => 'B',
            SlotOutcome::Collision => 'C',
        }
    }

    pub fn from_letter(c: char) -> Option<SlotOutcome> {
        match c {
            'E' | '0' => Some(SlotOutcome::Empty),
            'A' | 'a' | 'α' => Some(SlotOutcome::Alpha),
            'B' | 'b' | 'β' => Some(SlotOutcome::Beta),
            'C' => Some(SlotOutcome::Collision),
            _ => None,
        }
    }
}

impl From<Symbol> for SlotOutcome {
    fn from(s: Symbol) -> Self {
        match s {
            Symbol::Alpha => SlotOutcome::Alpha,
            Symbol::Beta => SlotOutcome::Beta,
        }
    }
}

/// Outcome of a slot given the transmitting nodes and their symbols.
pub fn resolve_slot<I>(transmissions: &[(I, Symbol)]) -> SlotOutcome {
    match transmissions {
        [] => SlotOutcome::Empty,
        [(_, s)] => (*s).into(),
        _ => SlotOutcome::Collision,
    }
}

/// Incremental form of [`resolve_slot`] for groups of identical transmitters.
#[derive(Clone, Copy, Debug, Default)]
pub struct SlotAccumulator {
    count: u32,
    symbol: Option<Symbol>,
}

impl SlotAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// `count` nodes transmit `symbol`.
    pub fn add(&mut self, count: u32, symbol: Symbol) {
        if count == 0 {
            return;
        }
        self.count = self.count.saturating_add(count);
        self.symbol = Some(symbol);
    }

    pub fn outcome(&self) -> SlotOutcome {
        match (self.count, self.symbol) {
            (0, _) => SlotOutcome::Empty,
            (1, Some(s)) => s.into(),
            _ => SlotOutcome::Collision,
        }
    }
}

/// Outcomes of the slots of one block.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockOutcome(pub Vec<SlotOutcome>);

impl BlockOutcome {
    pub fn slots(&self) -> &[SlotOutcome] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn all_collision(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|&s| s == SlotOutcome::Collision)
    }

    /// Base-4 code with the first slot most significant, so numeric order is
    /// lexicographic order under E < A < B < C.
    pub fn code(&self) -> usize {
        outcome_code(&self.0)
    }

    pub fn from_code(code: usize, len: usize) -> Self {
        BlockOutcome(outcomes_from_code(code, len))
    }

    /// Parses strings such as `"C B B"`, `"CBB"` or `"C β β"`.
    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(SlotOutcome::from_letter)
            .collect::<Option<Vec<_>>>()
            .map(BlockOutcome)
    }
}

impl fmt::Display for BlockOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", s.letter())?;
        }
        Ok(())
    }
}

pub fn outcome_code(slots: &[SlotOutcome]) -> usize {
    slots.iter().fold(0, |acc, s| acc * 4 + s.index())
}

pub fn outcomes_from_code(mut code: usize, len: usize) -> Vec<SlotOutcome> {
    let mut out = vec![SlotOutcome::Empty; len];
    for slot in out.iter_mut().rev() {
        *slot = SlotOutcome::from_index(code % 4);
        code /= 4;
    }
    out
}

/// `rows × cols` grid of presence bits: X(b, i) for type b and block i.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BitMatrix {
            rows,
            cols,
            words_per_row,
            words: vec![0; rows * words_per_row],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(row < self.rows && col < self.cols);
        let w = self.words[row * self.words_per_row + col / 64];
        (w >> (col % 64)) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize) {
        assert!(row < self.rows && col < self.cols);
        self.words[row * self.words_per_row + col / 64] |= 1 << (col % 64);
    }

    pub fn set_to(&mut self, row: usize, col: usize, value: bool) {
        assert!(row < self.rows && col < self.cols);
        let w = &mut self.words[row * self.words_per_row + col / 64];
        if value {
            *w |= 1 << (col % 64);
        } else {
            *w &= !(1 << (col % 64));
        }
    }

    pub fn count_ones(&self, row: usize) -> usize {
        let start = row * self.words_per_row;
        self.words[start..start + self.words_per_row]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// z_b: number of empty blocks in row `row`.
    pub fn count_zeros(&self, row: usize) -> usize {
        self.cols - self.count_ones(row)
    }

    pub fn or_assign(&mut self, other: &BitMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                left: (self.rows, self.cols),
                right: (other.rows, other.cols),
            });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (0..self.cols).filter(move |&c| self.get(r, c)).map(move |c| (r, c))
        })
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: String = (0..self.cols)
                .map(|c| if self.get(r, c) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

/// Element-wise OR of the cumulative grid and a per-stop grid.
pub fn or_accumulate(prev: &BitMatrix, cur: &BitMatrix) -> Result<BitMatrix> {
    let mut out = prev.clone();
    out.or_assign(cur)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_examples() {
        let none: [(u32, Symbol); 0] = [];
        assert_eq!(resolve_slot(&none), SlotOutcome::Empty);
        assert_eq!(resolve_slot(&[(7, Symbol::Alpha)]), SlotOutcome::Alpha);
        assert_eq!(
            resolve_slot(&[(7, Symbol::Alpha), (9, Symbol::Alpha)]),
            SlotOutcome::Collision
        );
        assert_eq!(
            resolve_slot(&[(7, Symbol::Beta), (9, Symbol::Alpha)]),
            SlotOutcome::Collision
        );
    }

    #[test]
    fn accumulator_matches_resolve() {
        let mut acc = SlotAccumulator::new();
        assert_eq!(acc.outcome(), SlotOutcome::Empty);
        acc.add(0, Symbol::Alpha);
        assert_eq!(acc.outcome(), SlotOutcome::Empty);
        acc.add(1, Symbol::Beta);
        assert_eq!(acc.outcome(), SlotOutcome::Beta);
        acc.add(1, Symbol::Beta);
        assert_eq!(acc.outcome(), SlotOutcome::Collision);
    }

    #[test]
    fn or_examples() {
        let zero = BitMatrix::new(3, 7);
        assert_eq!(or_accumulate(&zero, &zero).unwrap(), zero);

        let mut a = BitMatrix::new(3, 7);
        a.set(1, 3);
        assert_eq!(or_accumulate(&a, &a).unwrap(), a);

        let mut b = BitMatrix::new(3, 7);
        b.set(2, 5);
        let c = or_accumulate(&a, &b).unwrap();
        assert_eq!(c.ones().collect::<Vec<_>>(), vec![(1, 3), (2, 5)]);
        assert!(or_accumulate(&a, &BitMatrix::new(3, 8)).is_err());
    }

    #[test]
    fn codes_are_lexicographic() {
        let a = BlockOutcome::parse("E C").unwrap();
        let b = BlockOutcome::parse("A E").unwrap();
        assert!(a.code() < b.code());
        for code in 0..64 {
            assert_eq!(BlockOutcome::from_code(code, 3).code(), code);
        }
        assert_eq!(BlockOutcome::parse("C β β").unwrap().to_string(), "C B B");
    }

    #[test]
    fn wide_rows() {
        let mut m = BitMatrix::new(2, 130);
        m.set(1, 129);
        m.set(1, 0);
        assert_eq!(m.count_ones(1), 2);
        assert_eq!(m.count_zeros(0), 130);
        m.set_to(1, 0, false);
        assert!(!m.get(1, 0));
    }
}
