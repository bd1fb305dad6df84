use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::process::{LevyPath, SamplePath, TimeGrid};
use crate::space::{HSOperator, HVector, SeqH};

/// Value types an integrand can take.
pub trait Carrier: Clone + Send + Sync {
    /// Squared norm in the carrier's own Hilbert space.
    fn norm_squared(&self) -> f64;
}

impl Carrier for HVector {
    fn norm_squared(&self) -> f64 {
        HVector::norm_squared(self)
    }
}

impl Carrier for SeqH {
    fn norm_squared(&self) -> f64 {
        SeqH::norm_squared(self)
    }
}

impl Carrier for HSOperator {
    fn norm_squared(&self) -> f64 {
        self.matrix().norm_squared()
    }
}

/// Where an integrand value on a grid cell is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Left endpoint: predictable, the correct choice.
    #[default]
    Left,
    /// Right endpoint: anticipates the increment. Only for fault injection.
    Right,
}

/// The path data an integrand may read.
#[derive(Debug, Clone, Copy)]
pub struct PathSource<'a> {
    pub driver: &'a SamplePath,
    pub levy: Option<&'a LevyPath>,
}

impl<'a> From<&'a SamplePath> for PathSource<'a> {
    fn from(driver: &'a SamplePath) -> Self {
        PathSource { driver, levy: None }
    }
}

impl<'a> From<&'a LevyPath> for PathSource<'a> {
    fn from(levy: &'a LevyPath) -> Self {
        PathSource {
            driver: levy.driver(),
            levy: Some(levy),
        }
    }
}

/// Read access to a path up to and including one node.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    source: PathSource<'a>,
    node: usize,
}

impl<'a> PathView<'a> {
    pub fn new(source: PathSource<'a>, node: usize) -> Self {
        PathView { source, node }
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn time(&self) -> f64 {
        self.source.driver.grid().times()[self.node]
    }

    pub fn components(&self) -> usize {
        self.source.driver.components()
    }

    /// M^j at the current node (0-based `j`).
    pub fn driver(&self, j: usize) -> f64 {
        self.source.driver.value(j, self.node)
    }

    /// M^j at an earlier node.
    pub fn driver_at(&self, j: usize, node: usize) -> f64 {
        assert!(node <= self.node, "integrand looked ahead of its node");
        self.source.driver.value(j, node)
    }

    /// L at the current node in reference coordinates of U, when available.
    pub fn levy(&self) -> Option<DVector<f64>> {
        self.source.levy.map(|l| l.value(self.node))
    }
}

/// X_0·1_{0} + Σ X_i·1_{(t_i, t_{i+1}]} with breakpoints 0 = t_1 < … < t_{n+1} = T.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleIntegrand<V> {
    breakpoints: Vec<f64>,
    values: Vec<V>,
}

fn check_breakpoints(breakpoints: &[f64]) -> Result<()> {
    if breakpoints.len() < 2 {
        return Err(Error::config("integrand.breakpoints", "need at least two breakpoints"));
    }
    if breakpoints[0] != 0.0 {
        return Err(Error::config("integrand.breakpoints", "first breakpoint must be 0"));
    }
    if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config("integrand.breakpoints", "breakpoints must be strictly increasing"));
    }
    Ok(())
}

impl<V: Clone> SimpleIntegrand<V> {
    /// `values` holds X_0, X_1, …, X_n: one more than the number of intervals.
    pub fn new(breakpoints: Vec<f64>, values: Vec<V>) -> Result<Self> {
        check_breakpoints(&breakpoints)?;
        if values.len() != breakpoints.len() {
            return Err(Error::dims("simple integrand values", breakpoints.len(), values.len()));
        }
        Ok(SimpleIntegrand { breakpoints, values })
    }

    /// A process constant on (0, T].
    pub fn constant(horizon: f64, value: V) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![value.clone(), value])
    }

    /// Builds each X_i from the path observed up to t_i (X_0 from time 0),
    /// which makes the integrand adapted by construction.
    pub fn adapted<F>(breakpoints: Vec<f64>, source: PathSource<'_>, mut value_at: F) -> Result<Self>
    where
        F: FnMut(usize, PathView<'_>) -> V,
    {
        check_breakpoints(&breakpoints)?;
        let grid = source.driver.grid();
        let mut values = Vec::with_capacity(breakpoints.len());
        values.push(value_at(0, PathView::new(source, 0)));
        for (i, t) in breakpoints[..breakpoints.len() - 1].iter().enumerate() {
            let node = grid.node_at(*t)?;
            values.push(value_at(i + 1, PathView::new(source, node)));
        }
        Ok(SimpleIntegrand { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// X_0, X_1, …, X_n.
    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn try_map<W, F>(&self, f: F) -> Result<SimpleIntegrand<W>>
    where
        F: FnMut(&V) -> Result<W>,
    {
        Ok(SimpleIntegrand {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(f).collect::<Result<_>>()?,
        })
    }

    /// Grid nodes of the breakpoints; the last breakpoint must be the horizon.
    pub(crate) fn breakpoint_nodes(&self, grid: &TimeGrid) -> Result<Vec<usize>> {
        let nodes = self
            .breakpoints
            .iter()
            .map(|t| grid.node_at(*t))
            .collect::<Result<Vec<_>>>()?;
        if *nodes.last().unwrap() != grid.len() - 1 {
            return Err(Error::GridMismatch {
                time: *self.breakpoints.last().unwrap(),
            });
        }
        Ok(nodes)
    }
}

type Evaluator<V> = dyn Fn(&PathView<'_>) -> V + Send + Sync;

/// An integrand given by a deterministic function of the observed path,
/// sampled once per grid cell.
pub struct GridIntegrand<V> {
    evaluator: Box<Evaluator<V>>,
}

impl<V> GridIntegrand<V> {
    pub fn new<F>(evaluator: F) -> Self
    where
        F: Fn(&PathView<'_>) -> V + Send + Sync + 'static,
    {
        GridIntegrand {
            evaluator: Box::new(evaluator),
        }
    }

    pub fn eval(&self, view: &PathView<'_>) -> V {
        (self.evaluator)(view)
    }
}

impl<V> std::fmt::Debug for GridIntegrand<V> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("GridIntegrand(..)")
    }
}

/// Either integrand family, borrowed.
#[derive(Debug)]
pub enum Integrand<'a, V> {
    Simple(&'a SimpleIntegrand<V>),
    Grid(&'a GridIntegrand<V>),
}

impl<V> Clone for Integrand<'_, V> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<V> Copy for Integrand<'_, V> {}

impl<'a, V> From<&'a SimpleIntegrand<V>> for Integrand<'a, V> {
    fn from(x: &'a SimpleIntegrand<V>) -> Self {
        Integrand::Simple(x)
    }
}

impl<'a, V> From<&'a GridIntegrand<V>> for Integrand<'a, V> {
    fn from(x: &'a GridIntegrand<V>) -> Self {
        Integrand::Grid(x)
    }
}

/// Integrand values per grid cell: entry `c` applies on (t_c, t_{c+1}].
#[derive(Debug, Clone, PartialEq)]
pub struct Realized<V> {
    cells: Vec<V>,
}

impl<V> Realized<V> {
    pub fn new(cells: Vec<V>) -> Self {
        Realized { cells }
    }

    pub fn cells(&self) -> &[V] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn map<W>(&self, f: impl FnMut(&V) -> W) -> Realized<W> {
        Realized {
            cells: self.cells.iter().map(f).collect(),
        }
    }

    pub fn try_map<W>(&self, f: impl FnMut(&V) -> Result<W>) -> Result<Realized<W>> {
        Ok(Realized {
            cells: self.cells.iter().map(f).collect::<Result<_>>()?,
        })
    }
}

/// Samples an integrand on every cell of the source path's grid.
pub fn realize<V: Clone>(x: Integrand<'_, V>, source: PathSource<'_>, sampling: Sampling) -> Result<Realized<V>> {
    let grid = source.driver.grid();
    let cells = grid.cells();
    let left: Vec<V> = match x {
        Integrand::Simple(s) => {
            let nodes = s.breakpoint_nodes(grid)?;
            let mut out = Vec::with_capacity(cells);
            for (i, w) in nodes.windows(2).enumerate() {
                for _ in w[0]..w[1] {
                    out.push(s.values[i + 1].clone());
                }
            }
            out
        }
        Integrand::Grid(g) => {
            let offset = usize::from(sampling == Sampling::Right);
            let cells = (0..cells).map(|c| g.eval(&PathView::new(source, c + offset))).collect();
            return Ok(Realized { cells });
        }
    };
    let cells = match sampling {
        Sampling::Left => left,
        // The right-continuous version: the value that starts at t_{c+1}.
        Sampling::Right => (0..cells).map(|c| left[(c + 1).min(cells - 1)].clone()).collect(),
    };
    Ok(Realized { cells })
}
