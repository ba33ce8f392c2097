//! Rows of the published step-1 decoding tables for T = 7 and T = 8.
//! Types are numbered from 1.
#![allow(dead_code)]

use hsrc_core::channel::{BlockOutcome, Symbol};
use hsrc_core::hsrc_m2::{consistency_decode, m2_combination};

/// (outcome, active, inactive, not sure)
pub type Row = (&'static str, &'static str, &'static str, &'static str);

pub const T7: &[Row] = &[
    ("CBB", "1", "2 3 4 7", "one of {5,6}"),
    ("AAC", "4", "1 5 6 7", "one of {2,3}"),
    ("BBC", "", "1 2 3", "one of {{4,6},{4,5,7}}"),
    ("CAA", "", "4 5 6", "one of {{1,3},{1,2,7}}"),
    ("CCE", "2", "3 4 5 6 7", "1"),
    ("CCA", "2", "4 5 6", "1; one of {3,7}"),
    ("CCB", "2", "3 7", "1; one of {4,5,6}"),
    ("ECC", "5", "1 2 3 6 7", "4"),
    ("ACC", "5", "6 7", "4; one of {1,2,3}"),
    ("BCC", "5", "1 2 3", "4; one of {6,7}"),
    ("CEC", "", "2 3 5 6", "1; 4; 7"),
    ("CAC", "", "5 6", "1; 4; 7; one of {2,3}"),
    ("CBC", "", "2 3", "1; 4; 7; one of {5,6}"),
];

pub const T8: &[Row] = &[
    ("CBBB", "1", "2 3 4 5 6", "one of {7,8}"),
    ("AAAC", "5", "1 2 6 7 8", "one of {3,4}"),
    ("CCEE", "2", "3 4 5 6 7 8", "1"),
    ("CCEB", "2 5", "3 4 6 7 8", "1"),
    ("CCAE", "2 3", "4 5 6 7 8", "1"),
    ("CCAA", "2 4", "3 5 6 7 8", "1"),
    ("CCAB", "2 3 5", "4 6 7 8", "1"),
    ("CCBB", "2", "3 4 5", "1; one of {6,7,8}"),
    ("CAAC", "1 5", "2 6 7 8", "one of {3,4}"),
    ("CBBC", "1 5", "2 3 4 6", "one of {7,8}"),
    ("EECC", "6", "1 2 3 4 7 8", "5"),
    ("EBCC", "6 7", "1 2 3 4 8", "5"),
    ("AECC", "1 6", "2 3 4 7 8", "5"),
    ("AACC", "6", "1 7 8", "5; one of {2,3,4}"),
    ("ABCC", "1 6 7", "2 3 4 8", "5"),
    ("BBCC", "6 8", "1 2 3 4 7", "5"),
    ("CCCE", "3", "4 5 6 7 8", "1; 2"),
    ("CCCA", "3 4", "5 6 7 8", "1; 2"),
    ("CCCB", "3", "4", "1; 2; one of {5,6,7,8}"),
    ("CCEC", "2 5", "3 4 6 7 8", "1"),
    ("CCAC", "2 5", "6 7 8", "1; one of {3,4}"),
    ("CCBC", "2 5", "3 4", "1; one of {6,7,8}"),
    ("CECC", "1 6", "2 3 4 7 8", "5"),
    ("CACC", "1 6", "7 8", "5; one of {2,3,4}"),
    ("CBCC", "1 6", "2 3 4", "5; one of {7,8}"),
    ("ECCC", "7", "1 2 3 4 8", "5; 6"),
    ("ACCC", "7", "8", "5; 6; one of {1,2,3,4}"),
    ("BCCC", "7 8", "1 2 3 4", "5; 6"),
];

pub fn one_based(types: &[usize]) -> String {
    types.iter().map(|b| (b + 1).to_string()).collect::<Vec<_>>().join(" ")
}

pub fn check_rows(rows: &[Row], t: usize) -> Vec<String> {
    let mut failures = Vec::new();
    for &(outcome, active, inactive, not_sure) in rows {
        let st = consistency_decode(&BlockOutcome::parse(outcome).unwrap(), t).unwrap();
        let got = (one_based(&st.active()), one_based(&st.inactive()), st.not_sure_text());
        let want = (active.to_string(), inactive.to_string(), not_sure.to_string());
        if got != want {
            failures.push(format!("T={t} {outcome}: got {got:?}, table {want:?}"));
        }
    }
    failures
}

/// Symbol table as strings over a (α), b (β) and 0 (silence).
pub fn render(t: usize) -> Vec<String> {
    (0..t)
        .map(|b| {
            m2_combination(b, t)
                .unwrap()
                .iter()
                .map(|s| match s {
                    Some(Symbol::Alpha) => 'a',
                    Some(Symbol::Beta) => 'b',
                    None => '0',
                })
                .collect()
        })
        .collect()
}

