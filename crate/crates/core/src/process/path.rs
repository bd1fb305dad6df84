use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::grid::{GridSpec, NodeKind, TimeGrid};
use super::standard::StandardLevySpec;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// A realized sequence of standard Lévy martingales on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    increments: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    jump_log: Vec<Vec<(f64, f64)>>,
}

fn cumulative(increments: &[f64]) -> Vec<f64> {
    let mut values = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for d in increments {
        acc += d;
        values.push(acc);
    }
    values
}

impl SamplePath {
    /// A path from explicit per-cell increments, one vector per component.
    pub fn from_increments(grid: TimeGrid, increments: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_jumps(grid, increments, None)
    }

    pub(crate) fn with_jumps(
        grid: TimeGrid,
        increments: Vec<Vec<f64>>,
        jump_log: Option<Vec<Vec<(f64, f64)>>>,
    ) -> Result<Self> {
        for inc in &increments {
            if inc.len() != grid.cells() {
                return Err(Error::dims("path increments", grid.cells(), inc.len()));
            }
        }
        let values = increments.iter().map(|inc| cumulative(inc)).collect();
        let jump_log = jump_log.unwrap_or_else(|| vec![Vec::new(); increments.len()]);
        Ok(SamplePath {
            grid,
            increments,
            values,
            jump_log,
        })
    }

    pub fn zero(grid: TimeGrid, components: usize) -> Self {
        let increments = vec![vec![0.0; grid.cells()]; components];
        Self::from_increments(grid, increments).expect("shapes agree")
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.increments.len()
    }

    /// Per-cell increments of component `j` (0-based).
    pub fn increments(&self, j: usize) -> &[f64] {
        &self.increments[j]
    }

    /// Cumulative values of component `j` at every node.
    pub fn values(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn value(&self, j: usize, node: usize) -> f64 {
        self.values[j][node]
    }

    pub fn terminal(&self, j: usize) -> f64 {
        *self.values[j].last().unwrap()
    }

    /// Jump times and sizes of component `j`.
    pub fn jump_log(&self, j: usize) -> &[(f64, f64)] {
        &self.jump_log[j]
    }

    /// Writes the columnar dump: time, kind, then one column per component.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let names: Vec<String> = (1..=self.components()).map(|j| format!("M{j}")).collect();
        let columns: Vec<&[f64]> = self.values.iter().map(Vec::as_slice).collect();
        super::write_columnar(out, &self.grid, &names, &columns)
    }
}

/// Simulates one path of the sequence described by `specs`.
///
/// Jump times are exact (exponential interarrivals) and become grid nodes;
/// Brownian parts are drawn per refined cell; each cell is compensated by
/// −Σ aν·Δt.
pub fn simulate_paths(specs: &[StandardLevySpec], grid: &GridSpec, seed: u64, path_index: u64) -> Result<SamplePath> {
    let horizon = grid.horizon;
    let mut nodes: Vec<(f64, NodeKind)> = grid
        .scheduled_times()
        .into_iter()
        .map(|t| (t, NodeKind::Scheduled))
        .collect();

    let mut jump_log: Vec<Vec<(f64, f64)>> = Vec::with_capacity(specs.len());
    for (j, spec) in specs.iter().enumerate() {
        let mut rng = stream(seed, path_index, j, Purpose::JumpTimes);
        let mut log = Vec::new();
        for jump in spec.jumps() {
            let wait = Exp::new(jump.intensity).expect("intensity validated at construction");
            let mut t = wait.sample(&mut rng);
            while t <= horizon {
                log.push((t, jump.size));
                t += wait.sample(&mut rng);
            }
        }
        log.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes.extend(log.iter().map(|(t, _)| (*t, NodeKind::Jump)));
        jump_log.push(log);
    }

    let time_grid = TimeGrid::from_nodes(nodes)?;
    let times = time_grid.times();
    let mut increments = Vec::with_capacity(specs.len());
    for (j, spec) in specs.iter().enumerate() {
        let mut rng = stream(seed, path_index, j, Purpose::Brownian);
        let drift = spec.compensator_rate();
        let mut inc: Vec<f64> = (0..time_grid.cells())
            .map(|c| {
                let dt = times[c + 1] - times[c];
                let mut d = -drift * dt;
                if spec.sigma() > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    d += spec.sigma() * dt.sqrt() * z;
                }
                d
            })
            .collect();
        for (t, size) in &jump_log[j] {
            // Jumps land at the right end of their cell.
            let node = times.partition_point(|s| s < t);
            inc[node - 1] += size;
        }
        increments.push(inc);
    }
    SamplePath::with_jumps(time_grid, increments, Some(jump_log))
}

/// Simulation recipe shared by Monte Carlo loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    pub drivers: Vec<StandardLevySpec>,
    pub grid: GridSpec,
}

impl Sampler {
    pub fn new(drivers: Vec<StandardLevySpec>, grid: GridSpec) -> Self {
        Sampler { drivers, grid }
    }

    pub fn sample(&self, seed: u64, path_index: u64) -> Result<SamplePath> {
        simulate_paths(&self.drivers, &self.grid, seed, path_index)
    }

    pub fn with_extra_times(&self, times: &[f64]) -> Self {
        Sampler {
            drivers: self.drivers.clone(),
            grid: self.grid.clone().with_extra_times(times),
        }
    }
}
