//! Optimal MBS tour: choose and order stops so that every node is covered,
//! node energy stays within budget and travel cost is minimal.
//!
//! Stop 0 is the charging station. It covers no node and starts and ends
//! every tour.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const EXACT_STOP_LIMIT: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TourInstance {
    /// c[u][v]; infinite when there is no link.
    pub costs: Vec<Vec<f64>>,
    /// X[k][m], node × stop.
    pub coverage: Vec<Vec<bool>>,
    /// η[k][m], node × stop.
    pub energy: Vec<Vec<f64>>,
    /// η̄
    pub budget: f64,
}

impl TourInstance {
    /// Stops including the charging station.
    pub fn stops(&self) -> usize {
        self.costs.len()
    }

    pub fn nodes(&self) -> usize {
        self.coverage.len()
    }

    pub fn check(&self) -> Result<()> {
        let s = self.stops();
        if s < 2 {
            return Err(invalid("an instance needs the charging station and at least one stop"));
        }
        if self.costs.iter().any(|r| r.len() != s) {
            return Err(invalid("cost matrix must be square"));
        }
        if self.energy.len() != self.nodes() {
            return Err(invalid("coverage and energy must list the same nodes"));
        }
        for (k, (x, e)) in self.coverage.iter().zip(&self.energy).enumerate() {
            if x.len() != s || e.len() != s {
                return Err(invalid(format!("node {k} must have one entry per stop")));
            }
            if x[0] {
                return Err(invalid(format!("node {k} is covered by the charging station")));
            }
            if e.iter().any(|v| !(*v >= 0.0) || v.is_infinite()) {
                return Err(invalid(format!("node {k} has a negative or non-finite energy")));
            }
        }
        if self.budget.is_nan() {
            return Err(invalid("budget must be a number"));
        }
        Ok(())
    }

    /// Σ_k η[k][m] X[k][m]
    pub fn stop_energy(&self, m: usize) -> f64 {
        self.coverage
            .iter()
            .zip(&self.energy)
            .filter(|(x, _)| x[m])
            .map(|(_, e)| e[m])
            .sum()
    }

    /// Cost of 0 → stops → 0.
    pub fn tour_cost(&self, interior: &[usize]) -> f64 {
        let mut prev = 0;
        let mut cost = 0.0;
        for &m in interior.iter().chain(std::iter::once(&0)) {
            cost += self.costs[prev][m];
            prev = m;
        }
        cost
    }

    /// Parses the sectioned text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut stops: Option<usize> = None;
        let mut costs = Vec::new();
        let mut coverage = Vec::new();
        let mut energy = Vec::new();
        let mut budget = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_ascii_lowercase();
                continue;
            }
            let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
            let reals = || {
                fields
                    .iter()
                    .map(|f| parse_real(f).ok_or_else(|| err(format!("not a number: {f}"))))
                    .collect::<Result<Vec<f64>>>()
            };
            match section.as_str() {
                "stops" => {
                    let n = line.parse().map_err(|_| err(format!("bad stop count: {line}")))?;
                    stops = Some(n);
                }
                "costs" => costs.push(reals()?),
                "coverage" => coverage.push(
                    fields
                        .iter()
                        .map(|f| match *f {
                            "0" => Ok(false),
                            "1" => Ok(true),
                            _ => Err(err(format!("coverage entries are 0 or 1, got {f}"))),
                        })
                        .collect::<Result<Vec<bool>>>()?,
                ),
                "energy" => energy.push(reals()?),
                "budget" => {
                    let v = reals()?;
                    if v.len() != 1 || budget.is_some() {
                        return Err(err("budget is a single number".into()));
                    }
                    budget = Some(v[0]);
                }
                "" => return Err(err("data before the first section".into())),
                other => return Err(err(format!("unknown section [{other}]"))),
            }
        }
        let missing = |name: &str| Error::Parse {
            line: 0,
            message: format!("missing [{name}] section"),
        };
        let stops = stops.ok_or_else(|| missing("stops"))?;
        if costs.len() != stops {
            return Err(invalid(format!("[costs] has {} rows for {stops} stops", costs.len())));
        }
        let inst = TourInstance {
            costs,
            coverage,
            energy,
            budget: budget.ok_or_else(|| missing("budget"))?,
        };
        inst.check()?;
        Ok(inst)
    }

    /// Inverse of [`TourInstance::parse`].
    pub fn to_text(&self) -> String {
        let real = |v: f64| if v.is_infinite() { "inf".to_string() } else { v.to_string() };
        let mut s = format!("[stops]\n{}\n\n[costs]\n", self.stops());
        for row in &self.costs {
            s += &row.iter().map(|&v| real(v)).collect::<Vec<_>>().join(" ");
            s.push('\n');
        }
        s += "\n[coverage]\n";
        for row in &self.coverage {
            s += &row.iter().map(|&x| if x { "1" } else { "0" }).collect::<Vec<_>>().join(" ");
            s.push('\n');
        }
        s += "\n[energy]\n";
        for row in &self.energy {
            s += &row.iter().map(|&v| real(v)).collect::<Vec<_>>().join(" ");
            s.push('\n');
        }
        s += &format!("\n[budget]\n{}\n", real(self.budget));
        s
    }
}

fn parse_real(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "∞" => Some(f64::INFINITY),
        _ => s.parse().ok(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    /// m_0 = 0, m_1, …, m_Ĥ, 0
    pub stops: Vec<usize>,
    pub cost: f64,
    pub energy: f64,
    pub covered: usize,
}

impl Tour {
    pub fn from_interior(inst: &TourInstance, interior: &[usize]) -> Tour {
        let mut stops = Vec::with_capacity(interior.len() + 2);
        stops.push(0);
        stops.extend_from_slice(interior);
        stops.push(0);
        let covered = inst
            .coverage
            .iter()
            .filter(|x| interior.iter().any(|&m| x[m]))
            .count();
        Tour {
            stops,
            cost: inst.tour_cost(interior),
            energy: interior.iter().map(|&m| inst.stop_energy(m)).sum(),
            covered,
        }
    }

    pub fn interior(&self) -> &[usize] {
        let n = self.stops.len();
        if n < 2 {
            &[]
        } else {
            &self.stops[1..n - 1]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Endpoints,
    StopOutOfRange(usize),
    RepeatedStop(usize),
    /// Ĥ = 0.
    NoStops,
    MissingLink { from: usize, to: usize },
    Uncovered(Vec<usize>),
    Budget { spent: f64, budget: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Endpoints => write!(f, "tour must start and end at stop 0"),
            Violation::StopOutOfRange(m) => write!(f, "stop {m} does not exist"),
            Violation::RepeatedStop(m) => write!(f, "stop {m} visited more than once"),
            Violation::NoStops => write!(f, "tour visits no stop"),
            Violation::MissingLink { from, to } => write!(f, "no link from {from} to {to}"),
            Violation::Uncovered(k) => write!(f, "{} node(s) not covered", k.len()),
            Violation::Budget { spent, budget } => write!(f, "node energy {spent} exceeds budget {budget}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a full stop sequence (including both zeros) against every
/// constraint and reports each one it breaks.
pub fn validate(inst: &TourInstance, tour: &[usize]) -> Feasibility {
    let mut v = Vec::new();
    if tour.len() < 2 || tour[0] != 0 || tour[tour.len() - 1] != 0 {
        v.push(Violation::Endpoints);
    }
    let interior: Vec<usize> = if tour.len() >= 2 {
        tour[1..tour.len() - 1].to_vec()
    } else {
        tour.iter().copied().filter(|&m| m != 0).collect()
    };
    if interior.is_empty() {
        v.push(Violation::NoStops);
    }
    let mut seen = vec![false; inst.stops()];
    let mut valid = Vec::new();
    for &m in &interior {
        if m == 0 || m >= inst.stops() {
            v.push(Violation::StopOutOfRange(m));
        } else if seen[m] {
            v.push(Violation::RepeatedStop(m));
        } else {
            seen[m] = true;
            valid.push(m);
        }
    }
    let mut prev = 0;
    for &m in valid.iter().chain(std::iter::once(&0)) {
        if inst.costs[prev][m].is_infinite() {
            v.push(Violation::MissingLink { from: prev, to: m });
        }
        prev = m;
    }
    let uncovered: Vec<usize> = (0..inst.nodes())
        .filter(|&k| !valid.iter().any(|&m| inst.coverage[k][m]))
        .collect();
    if !uncovered.is_empty() {
        v.push(Violation::Uncovered(uncovered));
    }
    let spent: f64 = valid.iter().map(|&m| inst.stop_energy(m)).sum();
    if spent > inst.budget {
        v.push(Violation::Budget {
            spent,
            budget: inst.budget,
        });
    }
    Feasibility { violations: v }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Covered,
    BudgetExceeded,
    StopsExhausted,
}

/// The nearest-unvisited-stop heuristic: keep moving to the cheapest next
/// stop (lowest index on ties) until all nodes are covered or the energy
/// spent so far exceeds the budget.
pub fn greedy_tour(inst: &TourInstance) -> (Tour, Termination) {
    let mut covered = vec![false; inst.nodes()];
    let mut n_covered = 0;
    let mut spent = 0.0;
    let mut unvisited: Vec<usize> = (1..inst.stops()).collect();
    let mut current = 0;
    let mut interior = Vec::new();
    let reason = loop {
        if n_covered == inst.nodes() {
            break Termination::Covered;
        }
        if spent > inst.budget {
            break Termination::BudgetExceeded;
        }
        let next = unvisited
            .iter()
            .enumerate()
            .filter(|(_, &m)| inst.costs[current][m].is_finite())
            .min_by(|a, b| inst.costs[current][*a.1].total_cmp(&inst.costs[current][*b.1]));
        let Some((pos, &m)) = next else {
            break Termination::StopsExhausted;
        };
        unvisited.remove(pos);
        for k in 0..inst.nodes() {
            if inst.coverage[k][m] {
                spent += inst.energy[k][m];
                if !covered[k] {
                    covered[k] = true;
                    n_covered += 1;
                }
            }
        }
        interior.push(m);
        current = m;
    };
    (Tour::from_interior(inst, &interior), reason)
}

struct Search<'a> {
    inst: &'a TourInstance,
    stop_energy: Vec<f64>,
    prune_on_cost: bool,
    best: Option<(f64, Vec<usize>)>,
    path: Vec<usize>,
    cover_count: Vec<u32>,
    uncovered: usize,
    used: Vec<bool>,
}

impl Search<'_> {
    fn better(&self, cost: f64, path: &[usize]) -> bool {
        match &self.best {
            None => true,
            Some((c, p)) => cost < *c || (cost == *c && path < p.as_slice()),
        }
    }

    fn visit(&mut self, m: usize, cost: f64, energy: f64) {
        let inst = self.inst;
        let energy = energy + self.stop_energy[m];
        if energy > inst.budget {
            return;
        }
        if self.prune_on_cost && self.best.as_ref().is_some_and(|(c, _)| cost > *c) {
            return;
        }
        self.path.push(m);
        self.used[m] = true;
        for k in 0..inst.nodes() {
            if inst.coverage[k][m] {
                if self.cover_count[k] == 0 {
                    self.uncovered -= 1;
                }
                self.cover_count[k] += 1;
            }
        }
        if self.uncovered == 0 {
            let total = cost + inst.costs[m][0];
            if total.is_finite() && self.better(total, &self.path) {
                self.best = Some((total, self.path.clone()));
            }
        }
        for next in 1..inst.stops() {
            let c = inst.costs[m][next];
            if !self.used[next] && c.is_finite() {
                self.visit(next, cost + c, energy);
            }
        }
        for k in 0..inst.nodes() {
            if inst.coverage[k][m] {
                self.cover_count[k] -= 1;
                if self.cover_count[k] == 0 {
                    self.uncovered += 1;
                }
            }
        }
        self.used[m] = false;
        self.path.pop();
    }
}

fn search_from(inst: &TourInstance, first: usize) -> Option<(f64, Vec<usize>)> {
    let c0 = inst.costs[0][first];
    if !c0.is_finite() {
        return None;
    }
    let mut s = Search {
        inst,
        stop_energy: (0..inst.stops()).map(|m| inst.stop_energy(m)).collect(),
        prune_on_cost: inst.costs.iter().flatten().all(|&c| c >= 0.0),
        best: None,
        path: Vec::new(),
        cover_count: vec![0; inst.nodes()],
        uncovered: inst.nodes(),
        used: vec![false; inst.stops()],
    };
    s.visit(first, c0, 0.0);
    s.best
}

/// Minimum-cost feasible tour by enumerating every ordered subset of stops;
/// among equal costs the lexicographically smallest stop sequence wins.
/// `None` when no tour is feasible.
pub fn exact_tour(inst: &TourInstance, max_stops: usize) -> Result<Option<Tour>> {
    inst.check()?;
    let limit = max_stops.min(EXACT_STOP_LIMIT);
    let m = inst.stops() - 1;
    if m > limit {
        return Err(Error::InstanceTooLarge { stops: m, limit });
    }
    let firsts: Vec<usize> = (1..inst.stops()).collect();
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        firsts.par_iter().map(|&f| search_from(inst, f)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = firsts.iter().map(|&f| search_from(inst, f)).collect();
    let best = results
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(best.map(|(_, path)| Tour::from_interior(inst, &path)))
}

/// TSP instance as an OMT instance: node k sits at stop k+1 only, every node
/// spends one unit, and the budget is unlimited. Stop 0 is the first city of
/// the TSP, so `costs` must have one more row than there are other cities.
pub fn tsp_reduction(costs: &[Vec<f64>]) -> TourInstance {
    let s = costs.len();
    let nodes = s.saturating_sub(1);
    TourInstance {
        costs: costs.to_vec(),
        coverage: (0..nodes).map(|k| (0..s).map(|m| m == k + 1).collect()).collect(),
        energy: vec![vec![1.0; s]; nodes],
        budget: f64::INFINITY,
    }
}
