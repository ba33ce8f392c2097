//! Network geometry and population draws of the simulation setups.

use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::protocol::{Deployment, NodeInfo};

/// Coverage radius of the MBS.
pub const DEFAULT_RANGE: f64 = FRAC_PI_4;

/// Placement attempts per node before giving up on covering it.
const MAX_PLACEMENT_TRIES: u32 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkModel {
    /// Unit square, four stops.
    I,
    /// 2×1 rectangle, eight stops.
    II,
}

impl NetworkModel {
    pub fn region(self) -> (f64, f64) {
        match self {
            NetworkModel::I => (1.0, 1.0),
            NetworkModel::II => (2.0, 1.0),
        }
    }

    /// Stop coordinates in visiting order.
    pub fn stops(self) -> Vec<(f64, f64)> {
        match self {
            NetworkModel::I => vec![(0.75, 0.75), (0.25, 0.75), (0.25, 0.25), (0.75, 0.25)],
            NetworkModel::II => vec![
                (1.75, 0.75),
                (1.25, 0.75),
                (0.75, 0.75),
                (0.25, 0.75),
                (0.25, 0.25),
                (0.75, 0.25),
                (1.25, 0.25),
                (1.75, 0.25),
            ],
        }
    }
}

/// Population law of the setup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Model I, every type has D nodes active with probability q.
    I,
    /// Model I, D_b and q_b drawn around the means.
    II,
    /// Model II, D_b and q_b drawn around the means.
    III,
}

impl Scenario {
    pub fn model(self) -> NetworkModel {
        match self {
            Scenario::I | Scenario::II => NetworkModel::I,
            Scenario::III => NetworkModel::II,
        }
    }

    pub fn randomized(self) -> bool {
        self != Scenario::I
    }
}

fn default_range() -> f64 {
    DEFAULT_RANGE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub types: usize,
    /// D, or D̄ when the scenario randomizes.
    pub d: u32,
    /// q, or q̄ when the scenario randomizes.
    pub q: f64,
    #[serde(default = "default_range")]
    pub range: f64,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, types: usize, d: u32, q: f64) -> Self {
        ScenarioConfig {
            scenario,
            types,
            d,
            q,
            range: DEFAULT_RANGE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.types == 0 {
            return Err(invalid("at least one node type is required"));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(invalid(format!("q must lie in [0,1], got {}", self.q)));
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(invalid(format!("coverage range must be positive, got {}", self.range)));
        }
        let (w, h) = self.scenario.model().region();
        let reach = self
            .scenario
            .model()
            .stops()
            .iter()
            .map(|&(x, y)| x.max(w - x).hypot(y.max(h - y)))
            .fold(0.0, f64::max);
        if self.range > reach + 1.0 {
            return Err(invalid("coverage range is far larger than the region"));
        }
        Ok(())
    }
}

/// Per-type sizes and activity of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationDraw {
    /// D_b
    pub counts: Vec<u32>,
    /// q_b
    pub q: Vec<f64>,
    /// Type of every node, grouped by type.
    pub node_types: Vec<usize>,
    pub active: Vec<bool>,
}

pub fn draw_population<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> Result<PopulationDraw> {
    config.validate()?;
    let t = config.types;
    let (counts, q) = if config.scenario.randomized() {
        let lo = config.d.div_ceil(2);
        let hi = config.d * 3 / 2;
        let half = config.q.min(1.0 - config.q);
        let (qlo, qhi) = ((config.q - half).max(0.0), (config.q + half).min(1.0));
        let mut counts = Vec::with_capacity(t);
        let mut q = Vec::with_capacity(t);
        for _ in 0..t {
            counts.push(rng.random_range(lo..=hi));
            q.push(if qhi > qlo { rng.random_range(qlo..=qhi) } else { qlo });
        }
        (counts, q)
    } else {
        (vec![config.d; t], vec![config.q; t])
    };
    let mut node_types = Vec::new();
    let mut active = Vec::new();
    for b in 0..t {
        for _ in 0..counts[b] {
            node_types.push(b);
            active.push(rng.random_bool(q[b]));
        }
    }
    Ok(PopulationDraw {
        counts,
        q,
        node_types,
        active,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub type_index: usize,
    pub x: f64,
    pub y: f64,
    pub active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub types: usize,
    pub counts: Vec<u32>,
    pub q: Vec<f64>,
    pub nodes: Vec<Node>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopPlan {
    /// Stops in visiting order.
    pub stops: Vec<(f64, f64)>,
    pub range: f64,
}

impl StopPlan {
    pub fn for_model(model: NetworkModel, range: f64) -> Self {
        StopPlan {
            stops: model.stops(),
            range,
        }
    }

    pub fn covers(&self, m: usize, x: f64, y: f64) -> bool {
        let (sx, sy) = self.stops[m];
        (x - sx).hypot(y - sy) <= self.range
    }

    pub fn covered(&self, x: f64, y: f64) -> bool {
        (0..self.stops.len()).any(|m| self.covers(m, x, y))
    }
}

/// Draws the population and places every node uniformly in the region,
/// redrawing positions that no stop reaches.
pub fn build_model<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> Result<(Population, StopPlan)> {
    let draw = draw_population(config, rng)?;
    let model = config.scenario.model();
    let plan = StopPlan::for_model(model, config.range);
    let (w, h) = model.region();
    let mut nodes = Vec::with_capacity(draw.node_types.len());
    for (k, (&b, &active)) in draw.node_types.iter().zip(&draw.active).enumerate() {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let (x, y) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
            if plan.covered(x, y) {
                placed = Some((x, y));
                break;
            }
        }
        let (x, y) = placed.ok_or(Error::UncoveredNode(k))?;
        nodes.push(Node {
            type_index: b,
            x,
            y,
            active,
        });
    }
    Ok((
        Population {
            types: config.types,
            counts: draw.counts,
            q: draw.q,
            nodes,
        },
        plan,
    ))
}

/// Nodes in range of each stop, as the protocol driver consumes them.
pub fn coverage_sets(population: &Population, plan: &StopPlan) -> Result<Deployment> {
    let mut stops = vec![Vec::new(); plan.stops.len()];
    for (k, n) in population.nodes.iter().enumerate() {
        let mut any = false;
        for (m, stop) in stops.iter_mut().enumerate() {
            if plan.covers(m, n.x, n.y) {
                stop.push(k as u32);
                any = true;
            }
        }
        if !any {
            return Err(Error::UncoveredNode(k));
        }
    }
    let nodes = population
        .nodes
        .iter()
        .map(|n| NodeInfo {
            type_index: n.type_index,
            active: n.active,
        })
        .collect();
    Ok(Deployment {
        types: population.types,
        nodes,
        stops,
    })
}

/// n_b^(m): distinct active nodes of each type seen by stops 0..=m, for every m.
pub fn cumulative_counts(dep: &Deployment) -> Vec<Vec<u32>> {
    let mut seen = vec![false; dep.nodes.len()];
    let mut counts = vec![0u32; dep.types];
    let mut out = Vec::with_capacity(dep.stops.len());
    for stop in &dep.stops {
        for &k in stop {
            let n = dep.nodes[k as usize];
            if n.active && !seen[k as usize] {
                seen[k as usize] = true;
                counts[n.type_index] += 1;
            }
        }
        out.push(counts.clone());
    }
    out
}

/// A complete replicate setup.
#[derive(Clone, Debug)]
pub struct Generated {
    pub population: Population,
    pub plan: StopPlan,
    pub deployment: Deployment,
}

pub fn generate<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> Result<Generated> {
    let (population, plan) = build_model(config, rng)?;
    let deployment = coverage_sets(&population, &plan)?;
    Ok(Generated {
        population,
        plan,
        deployment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn stop_counts() {
        assert_eq!(NetworkModel::I.stops().len(), 4);
        assert_eq!(NetworkModel::II.stops().len(), 8);
        assert!((DEFAULT_RANGE - 0.785).abs() < 1e-3);
    }

    #[test]
    fn center_is_seen_by_all_stops() {
        let plan = StopPlan::for_model(NetworkModel::I, DEFAULT_RANGE);
        assert!((0..4).all(|m| plan.covers(m, 0.5, 0.5)));
        assert!(plan.covers(2, 0.25, 0.25));
    }

    #[test]
    fn scenario_one_population() {
        let cfg = ScenarioConfig::new(Scenario::I, 4, 300, 0.6);
        let mut rng = RngStream::new(1, 0).rng();
        let g = generate(&cfg, &mut rng).unwrap();
        assert_eq!(g.population.nodes.len(), 1200);
        assert_eq!(g.deployment.stops.len(), 4);
        let active = g.population.nodes.iter().filter(|n| n.active).count() as f64;
        assert!((active / 1200.0 - 0.6).abs() < 0.06);
        let cum = cumulative_counts(&g.deployment);
        assert_eq!(cum.last().unwrap(), &g.deployment.true_counts());
    }

    #[test]
    fn randomized_ranges() {
        let cfg = ScenarioConfig::new(Scenario::II, 5, 1000, 0.3);
        let mut rng = RngStream::new(2, 0).rng();
        for _ in 0..50 {
            let d = draw_population(&cfg, &mut rng).unwrap();
            assert!(d.counts.iter().all(|&c| (500..=1500).contains(&c)));
            assert!(d.q.iter().all(|&q| (0.0..=0.6).contains(&q)));
        }
    }

    #[test]
    fn bad_config() {
        assert!(ScenarioConfig::new(Scenario::I, 0, 10, 0.5).validate().is_err());
        assert!(ScenarioConfig::new(Scenario::I, 2, 10, 1.5).validate().is_err());
        let mut c = ScenarioConfig::new(Scenario::III, 2, 10, 0.5);
        c.range = -1.0;
        assert!(c.validate().is_err());
    }
}
