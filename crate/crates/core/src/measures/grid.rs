use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative tolerance for declaring a grid uniform.
pub const UNIFORM_RTOL: f64 = 1e-12;

/// Strictly increasing time nodes `t_0 < t_1 < ... < t_M`, `M >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

/// Where a time falls on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    /// Exactly on node `k`.
    Node(usize),
    /// Strictly inside interval `k` (between nodes `k` and `k + 1`), with
    /// interpolation fraction in `(0, 1)`.
    Interval(usize, f64),
}

impl TimeGrid {
    /// `M` equal intervals on `[t0, t1]`. The last node is exactly `t1`.
    pub fn uniform(t0: f64, t1: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("grid needs at least one interval"));
        }
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::domain(format!(
                "grid needs finite t0 < t1, got [{t0}, {t1}]"
            )));
        }
        let span = t1 - t0;
        let nodes = (0..=m)
            .map(|k| {
                if k == m {
                    t1
                } else {
                    t0 + span * (k as f64) / (m as f64)
                }
            })
            .collect();
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::domain("grid needs at least two nodes"));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("grid nodes must be finite"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("grid nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t_start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn mid(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    /// Index of the node bit-equal to `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.nodes
            .binary_search_by(|x| x.total_cmp(&t))
            .ok()
    }

    /// Index of the node within `rtol * span` of `t`.
    pub fn index_near(&self, t: f64, rtol: f64) -> Option<usize> {
        let tol = rtol * self.span();
        let pos = self.nodes.partition_point(|&x| x < t);
        [pos.checked_sub(1), Some(pos)]
            .into_iter()
            .flatten()
            .filter(|&k| k < self.nodes.len())
            .find(|&k| (self.nodes[k] - t).abs() <= tol)
    }

    pub fn locate(&self, t: f64) -> Result<Location> {
        if !(t >= self.t_start() && t <= self.t_end()) {
            return Err(Error::domain(format!(
                "time {t} outside grid [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        let pos = self.nodes.partition_point(|&x| x < t);
        if self.nodes[pos] == t {
            return Ok(Location::Node(pos));
        }
        let k = pos - 1;
        let frac = (t - self.nodes[k]) / self.dt(k);
        Ok(Location::Interval(k, frac))
    }

    /// Sub-grid on nodes `ka..=kb`.
    pub fn slice(&self, ka: usize, kb: usize) -> Result<Self> {
        if ka >= kb || kb >= self.nodes.len() {
            return Err(Error::domain(format!(
                "invalid node range [{ka}, {kb}] for grid with {} nodes",
                self.nodes.len()
            )));
        }
        Ok(Self {
            nodes: self.nodes[ka..=kb].to_vec(),
        })
    }

    /// Joins two grids sharing the junction node.
    pub fn concat(&self, other: &TimeGrid) -> Result<Self> {
        if self.t_end() != other.t_start() {
            return Err(Error::domain(format!(
                "grids do not meet: {} vs {}",
                self.t_end(),
                other.t_start()
            )));
        }
        let mut nodes = self.nodes.clone();
        nodes.extend_from_slice(&other.nodes[1..]);
        Ok(Self { nodes })
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.span() / self.intervals() as f64;
        (0..self.intervals()).all(|k| (self.dt(k) - h).abs() <= UNIFORM_RTOL * h.abs().max(1.0))
    }
}

/// Wire form `{t0, t1, M}`; `nodes` is only written when regenerating the
/// uniform grid would not reproduce the nodes bit for bit.
#[derive(Serialize, Deserialize)]
struct GridRepr {
    t0: f64,
    t1: f64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<f64>>,
}

impl Serialize for TimeGrid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let regenerated = TimeGrid::uniform(self.t_start(), self.t_end(), self.intervals()).ok();
        let nodes = match regenerated {
            Some(g) if g.nodes == self.nodes => None,
            _ => Some(self.nodes.clone()),
        };
        GridRepr {
            t0: self.t_start(),
            t1: self.t_end(),
            m: self.intervals(),
            nodes,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TimeGrid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = GridRepr::deserialize(d)?;
        let grid = match repr.nodes {
            Some(nodes) => {
                if nodes.len() != repr.m + 1 {
                    return Err(serde::de::Error::custom("grid.nodes length must be M + 1"));
                }
                TimeGrid::from_nodes(nodes)
            }
            None => TimeGrid::uniform(repr.t0, repr.t1, repr.m),
        };
        grid.map_err(serde::de::Error::custom)
    }
}
