use super::integrand::{Carrier, Realized};
use crate::error::{Error, Result};
use crate::process::TimeGrid;
use crate::space::HVector;

/// A real-valued finite-variation process on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl BracketPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// ⟨M^j, M^k⟩_t = δ_jk·t for a standard sequence.
pub fn angle_bracket(grid: &TimeGrid, j: usize, k: usize) -> BracketPath {
    let values = if j == k {
        grid.times().to_vec()
    } else {
        vec![0.0; grid.len()]
    };
    BracketPath {
        grid: grid.clone(),
        values,
    }
}

fn cumulate(grid: &TimeGrid, density: impl Iterator<Item = f64>) -> BracketPath {
    let mut values = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    values.push(0.0);
    for (c, d) in density.enumerate() {
        acc += d * grid.dt(c);
        values.push(acc);
    }
    BracketPath {
        grid: grid.clone(),
        values,
    }
}

/// ∫ ⟨X_s, Y_s⟩_H d⟨M^j, M^k⟩_s with left-point integrand values.
pub fn covariation_integral(
    x: &Realized<HVector>,
    y: &Realized<HVector>,
    grid: &TimeGrid,
    j: usize,
    k: usize,
) -> Result<BracketPath> {
    if x.len() != grid.cells() || y.len() != grid.cells() {
        return Err(Error::GridMismatch { time: grid.horizon() });
    }
    if j != k {
        return Ok(angle_bracket(grid, j, k));
    }
    Ok(cumulate(grid, x.cells().iter().zip(y.cells()).map(|(a, b)| a.inner(b))))
}

/// ∫ ‖X_s‖² ds in the carrier's norm: the right-hand side of the isometry.
pub fn energy<V: Carrier>(x: &Realized<V>, grid: &TimeGrid) -> Result<BracketPath> {
    if x.len() != grid.cells() {
        return Err(Error::GridMismatch { time: grid.horizon() });
    }
    Ok(cumulate(grid, x.cells().iter().map(Carrier::norm_squared)))
}
