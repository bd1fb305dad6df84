use serde::Serialize;

use crate::error::{Error, Result};

/// Origin of a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Scheduled,
    Jump,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Scheduled => "scheduled",
            NodeKind::Jump => "jump",
        }
    }
}

/// Where the scheduled nodes go; jump times are added during simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub horizon: f64,
    pub n_scheduled: usize,
    /// Extra scheduled nodes, e.g. observation times that must be hit exactly.
    pub extra_times: Vec<f64>,
}

impl GridSpec {
    pub fn new(horizon: f64, n_scheduled: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::config("space.T", "must be a positive finite number"));
        }
        if n_scheduled == 0 {
            return Err(Error::config("space.nScheduled", "must be >= 1"));
        }
        Ok(GridSpec {
            horizon,
            n_scheduled,
            extra_times: Vec::new(),
        })
    }

    pub fn with_extra_times(mut self, times: &[f64]) -> Self {
        self.extra_times.extend_from_slice(times);
        self
    }

    /// Uniform scheduled times plus extras, sorted and deduplicated.
    pub fn scheduled_times(&self) -> Vec<f64> {
        let n = self.n_scheduled;
        let mut times: Vec<f64> = (0..=n).map(|i| self.horizon * i as f64 / n as f64).collect();
        times[n] = self.horizon;
        times.extend(self.extra_times.iter().copied().filter(|t| *t > 0.0 && *t < self.horizon));
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

/// Strictly increasing nodes from 0 to T.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    kinds: Vec<NodeKind>,
}

impl TimeGrid {
    /// Builds a grid from possibly unsorted nodes; coincident times merge and
    /// a jump marker wins over a scheduled one.
    pub fn from_nodes(mut nodes: Vec<(f64, NodeKind)>) -> Result<Self> {
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut times: Vec<f64> = Vec::with_capacity(nodes.len());
        let mut kinds: Vec<NodeKind> = Vec::with_capacity(nodes.len());
        for (t, k) in nodes {
            if !t.is_finite() {
                return Err(Error::GridMismatch { time: t });
            }
            if times.last() == Some(&t) {
                if k == NodeKind::Jump {
                    *kinds.last_mut().unwrap() = NodeKind::Jump;
                }
            } else {
                times.push(t);
                kinds.push(k);
            }
        }
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::GridMismatch {
                time: times.first().copied().unwrap_or(f64::NAN),
            });
        }
        Ok(TimeGrid { times, kinds })
    }

    pub fn scheduled(spec: &GridSpec) -> Self {
        let nodes = spec.scheduled_times().into_iter().map(|t| (t, NodeKind::Scheduled)).collect();
        TimeGrid::from_nodes(nodes).expect("scheduled grid is valid by construction")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn dt(&self, cell: usize) -> f64 {
        self.times[cell + 1] - self.times[cell]
    }

    /// Index of the node at time `t`, matched within 1e-12·T.
    pub fn node_at(&self, t: f64) -> Result<usize> {
        let tol = 1e-12 * self.horizon();
        let i = self.times.partition_point(|s| *s < t - tol);
        match self.times.get(i) {
            Some(s) if (s - t).abs() <= tol => Ok(i),
            _ => Err(Error::GridMismatch { time: t }),
        }
    }

    /// Index of the last node at or before `t`.
    pub fn node_before(&self, t: f64) -> usize {
        self.times.partition_point(|s| *s <= t).saturating_sub(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheduled_grid_is_uniform_with_extras() {
        let spec = GridSpec::new(1.0, 4).unwrap().with_extra_times(&[0.3, 0.5, 1.0]);
        let grid = TimeGrid::scheduled(&spec);
        assert_eq!(grid.times(), &[0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
        assert!(grid.kinds().iter().all(|k| *k == NodeKind::Scheduled));
        assert_eq!(grid.node_at(0.3).unwrap(), 2);
        assert_eq!(grid.node_at(1.0).unwrap(), 5);
        assert!(grid.node_at(0.31).is_err());
        assert_eq!(grid.node_before(0.6), 3);
    }

    #[test]
    fn coincident_jump_marks_node() {
        let grid = TimeGrid::from_nodes(vec![
            (0.0, NodeKind::Scheduled),
            (0.5, NodeKind::Scheduled),
            (0.5, NodeKind::Jump),
            (1.0, NodeKind::Scheduled),
        ])
        .unwrap();
        assert_eq!(grid.len(), 3);
        assert_eq!(grid.kinds()[1], NodeKind::Jump);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(0.0, 4).is_err());
        assert!(GridSpec::new(1.0, 0).is_err());
        assert!(TimeGrid::from_nodes(vec![(0.5, NodeKind::Scheduled), (1.0, NodeKind::Scheduled)]).is_err());
    }
}
