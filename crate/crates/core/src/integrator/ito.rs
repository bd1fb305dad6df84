use nalgebra::{DMatrix, DVector};

use super::integrand::{realize, Integrand, Realized, Sampling, SimpleIntegrand};
use crate::error::{Error, Result};
use crate::process::{LevyPath, SamplePath, TimeGrid};
use crate::space::{HSOperator, HVector, SeqH};

/// An H-valued integral process on a grid; column `n` is the value at node `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralPath {
    grid: TimeGrid,
    values: DMatrix<f64>,
}

impl IntegralPath {
    pub fn zeros(grid: TimeGrid, dim_h: usize) -> Self {
        let nodes = grid.len();
        IntegralPath {
            grid,
            values: DMatrix::zeros(dim_h, nodes),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim_h(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn value(&self, node: usize) -> HVector {
        HVector::new(self.values.column(node).into_owned())
    }

    pub fn terminal(&self) -> HVector {
        self.value(self.values.ncols() - 1)
    }

    /// max over nodes of ‖value‖_H.
    pub fn sup_norm(&self) -> f64 {
        self.values.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn add_assign(&mut self, other: &IntegralPath) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                time: other.grid.horizon(),
            });
        }
        if self.dim_h() != other.dim_h() {
            return Err(Error::dims("integral dimension", self.dim_h(), other.dim_h()));
        }
        self.values += &other.values;
        Ok(())
    }

    /// Writes the columnar dump: time, kind, then one column per H coordinate.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.values.row_iter().map(|r| r.iter().copied().collect()).collect();
        let names: Vec<String> = (1..=rows.len()).map(|k| format!("h{k}")).collect();
        let columns: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        crate::process::write_columnar(out, &self.grid, &names, &columns)
    }
}

fn check_index(path: &SamplePath, j: usize) -> Result<()> {
    if j >= path.components() {
        return Err(Error::IndexOutOfRange {
            index: j + 1,
            len: path.components(),
        });
    }
    Ok(())
}

fn check_cells<V>(x: &Realized<V>, grid: &TimeGrid) -> Result<()> {
    if x.len() != grid.cells() {
        return Err(Error::GridMismatch { time: grid.horizon() });
    }
    Ok(())
}

/// Left-point sum Σ_c X_c ΔM_c, cumulated over nodes.
pub fn ito_h_realized(x: &Realized<HVector>, increments: &[f64], grid: &TimeGrid) -> Result<IntegralPath> {
    check_cells(x, grid)?;
    if increments.len() != grid.cells() {
        return Err(Error::dims("increments", grid.cells(), increments.len()));
    }
    let dim = x.cells()[0].dim();
    let mut out = IntegralPath::zeros(grid.clone(), dim);
    let mut acc = DVector::zeros(dim);
    for (c, (xc, dm)) in x.cells().iter().zip(increments).enumerate() {
        if xc.dim() != dim {
            return Err(Error::dims("integrand dimension", dim, xc.dim()));
        }
        acc.axpy(*dm, xc.coords(), 1.0);
        out.values.set_column(c + 1, &acc);
    }
    Ok(out)
}

/// X•M^j for an H-valued integrand and the 0-based component `j`, computed
/// coordinatewise in the fixed basis of H.
pub fn ito_h(x: Integrand<'_, HVector>, path: &SamplePath, j: usize, sampling: Sampling) -> Result<IntegralPath> {
    check_index(path, j)?;
    let realized = realize(x, path.into(), sampling)?;
    ito_h_realized(&realized, path.increments(j), path.grid())
}

/// The same integral through an explicit orthonormal basis (f_k) of H:
/// Σ_k (⟨X, f_k⟩ • M^j) f_k. The columns of `basis` hold the f_k.
pub fn ito_h_in_basis(x: &Realized<HVector>, path: &SamplePath, j: usize, basis: &DMatrix<f64>) -> Result<IntegralPath> {
    check_index(path, j)?;
    let grid = path.grid();
    check_cells(x, grid)?;
    let dim = basis.nrows();
    let mut scalar = DMatrix::zeros(basis.ncols(), grid.len());
    let mut acc = DVector::zeros(basis.ncols());
    for (c, (xc, dm)) in x.cells().iter().zip(path.increments(j)).enumerate() {
        if xc.dim() != dim {
            return Err(Error::dims("integrand dimension", dim, xc.dim()));
        }
        let coeffs = basis.tr_mul(xc.coords());
        acc.axpy(*dm, &coeffs, 1.0);
        scalar.set_column(c + 1, &acc);
    }
    Ok(IntegralPath {
        grid: grid.clone(),
        values: basis * scalar,
    })
}

/// Term paths Σ_c (column j of cell c)·ΔM^j_c, one per component.
fn column_terms<'a, I>(cells: I, ms: &SamplePath) -> Result<Vec<IntegralPath>>
where
    I: ExactSizeIterator<Item = &'a DMatrix<f64>>,
{
    let grid = ms.grid();
    if cells.len() != grid.cells() {
        return Err(Error::GridMismatch { time: grid.horizon() });
    }
    let modes = ms.components();
    let mut terms: Vec<DMatrix<f64>> = Vec::new();
    let mut acc: Vec<DVector<f64>> = Vec::new();
    for (c, m) in cells.enumerate() {
        if m.ncols() != modes {
            return Err(Error::dims("ℓ²(H) length", modes, m.ncols()));
        }
        if c == 0 {
            terms = vec![DMatrix::zeros(m.nrows(), grid.len()); modes];
            acc = vec![DVector::zeros(m.nrows()); modes];
        } else if m.nrows() != acc[0].len() {
            return Err(Error::dims("integrand dimension", acc[0].len(), m.nrows()));
        }
        for j in 0..modes {
            acc[j].axpy(ms.increments(j)[c], &m.column(j), 1.0);
            terms[j].set_column(c + 1, &acc[j]);
        }
    }
    Ok(terms
        .into_iter()
        .map(|values| IntegralPath {
            grid: grid.clone(),
            values,
        })
        .collect())
}

/// The terms X^j • M^j of an ℓ²(H)-valued integral.
pub fn seq_terms_realized(x: &Realized<SeqH>, ms: &SamplePath) -> Result<Vec<IntegralPath>> {
    column_terms(x.cells().iter().map(SeqH::matrix), ms)
}

/// Σ_j X^j • M^j with the terms added in the given order.
pub fn ito_seq_ordered(x: &Realized<SeqH>, ms: &SamplePath, order: &[usize]) -> Result<IntegralPath> {
    let terms = seq_terms_realized(x, ms)?;
    sum_terms(&terms, order)
}

pub(crate) fn sum_terms(terms: &[IntegralPath], order: &[usize]) -> Result<IntegralPath> {
    let first = terms.first().ok_or(Error::dims("series terms", 1, 0))?;
    let mut total = IntegralPath::zeros(first.grid.clone(), first.dim_h());
    for &j in order {
        let term = terms.get(j).ok_or(Error::IndexOutOfRange {
            index: j + 1,
            len: terms.len(),
        })?;
        total.add_assign(term)?;
    }
    Ok(total)
}

pub fn ito_seq_realized(x: &Realized<SeqH>, ms: &SamplePath) -> Result<IntegralPath> {
    let order: Vec<usize> = (0..ms.components()).collect();
    ito_seq_ordered(x, ms, &order)
}

/// Σ_j X^j • M^j for an ℓ²(H)-valued integrand, summed in ascending j.
pub fn ito_seq(x: Integrand<'_, SeqH>, ms: &SamplePath, sampling: Sampling) -> Result<IntegralPath> {
    let realized = realize(x, ms.into(), sampling)?;
    ito_seq_realized(&realized, ms)
}

/// X • L for L regarded in ℓ²_λ: the standard components
/// M^j = λ_j^(−1/2)⟨L, g_j^(λ)⟩_{ℓ²_λ} are exactly the stored ℓ²_λ
/// coordinates of L, so they are read off without rescaling.
pub fn ito_l2lambda(x: Integrand<'_, SeqH>, l: &LevyPath, sampling: Sampling) -> Result<IntegralPath> {
    let realized = realize(x, l.into(), sampling)?;
    if let Some(bad) = realized.cells().iter().find(|w| w.len() != l.spec().modes()) {
        return Err(Error::SpecMismatch(format!(
            "integrand has {} entries but the covariance has {} modes",
            bad.len(),
            l.spec().modes()
        )));
    }
    ito_seq_realized(&realized, l.driver())
}

fn check_operator_modes(x: &Realized<HSOperator>, l: &LevyPath) -> Result<()> {
    match x.cells().iter().find(|s| s.modes() != l.spec().modes()) {
        Some(s) => Err(Error::SpecMismatch(format!(
            "operator has {} columns but the covariance has {} modes",
            s.modes(),
            l.spec().modes()
        ))),
        None => Ok(()),
    }
}

/// The terms ξ^j • M^j with ξ^j = X e_j, for an already realized integrand.
///
/// Ψ_λ(X) has entries X e_j, which are the stored columns of X, so the
/// ℓ²(H) view is read in place.
pub fn series_terms_realized(x: &Realized<HSOperator>, l: &LevyPath) -> Result<Vec<IntegralPath>> {
    check_operator_modes(x, l)?;
    column_terms(x.cells().iter().map(HSOperator::matrix), l.driver())
}

/// The terms ξ^j • M^j of the series representation of X • L.
pub fn series_terms(x: Integrand<'_, HSOperator>, l: &LevyPath, sampling: Sampling) -> Result<Vec<IntegralPath>> {
    let realized = realize(x, l.into(), sampling)?;
    series_terms_realized(&realized, l)
}

pub fn ito_general_realized(x: &Realized<HSOperator>, l: &LevyPath) -> Result<IntegralPath> {
    let terms = series_terms_realized(x, l)?;
    let order: Vec<usize> = (0..terms.len()).collect();
    sum_terms(&terms, &order)
}

/// X • L = Ψ_λ(X) • Φ_λ(L) for an L₂⁰(H)-valued integrand.
pub fn ito_general(x: Integrand<'_, HSOperator>, l: &LevyPath, sampling: Sampling) -> Result<IntegralPath> {
    let realized = realize(x, l.into(), sampling)?;
    ito_general_realized(&realized, l)
}

/// Σ_i X_i (M^j_{t_{i+1}} − M^j_{t_i}) evaluated directly at the breakpoints.
pub fn simple_closed_form_h(x: &SimpleIntegrand<HVector>, path: &SamplePath, j: usize) -> Result<HVector> {
    check_index(path, j)?;
    let nodes = x.breakpoint_nodes(path.grid())?;
    let dim = x.values()[0].dim();
    let mut acc = DVector::zeros(dim);
    for (i, w) in nodes.windows(2).enumerate() {
        let dm = path.value(j, w[1]) - path.value(j, w[0]);
        acc.axpy(dm, x.values()[i + 1].coords(), 1.0);
    }
    Ok(HVector::new(acc))
}

/// Σ_i Σ_j X_i^j (M^j_{t_{i+1}} − M^j_{t_i}).
pub fn simple_closed_form_seq(x: &SimpleIntegrand<SeqH>, path: &SamplePath) -> Result<HVector> {
    let nodes = x.breakpoint_nodes(path.grid())?;
    let dim = x.values()[0].dim_h();
    let mut acc = DVector::zeros(dim);
    for (i, w) in nodes.windows(2).enumerate() {
        let xi = &x.values()[i + 1];
        if xi.len() != path.components() {
            return Err(Error::dims("ℓ²(H) length", path.components(), xi.len()));
        }
        let dm = DVector::from_fn(path.components(), |j, _| path.value(j, w[1]) - path.value(j, w[0]));
        acc += xi.matrix() * dm;
    }
    Ok(HVector::new(acc))
}

/// Σ_i X_i (L_{t_{i+1}} − L_{t_i}) for bounded X_i ∈ L(U, H) given as
/// matrices on reference coordinates of U.
pub fn simple_closed_form_operator(x: &SimpleIntegrand<DMatrix<f64>>, l: &LevyPath) -> Result<HVector> {
    let nodes = x.breakpoint_nodes(l.grid())?;
    let dim = x.values()[0].nrows();
    let mut acc = DVector::zeros(dim);
    for (i, w) in nodes.windows(2).enumerate() {
        let xi = &x.values()[i + 1];
        if xi.ncols() != l.spec().modes() {
            return Err(Error::dims("operator columns", l.spec().modes(), xi.ncols()));
        }
        acc += xi * (l.values().column(w[1]) - l.values().column(w[0]));
    }
    Ok(HVector::new(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::GridIntegrand;
    use crate::process::{assemble_levy, GridSpec};
    use crate::space::{make_covariance, BasisChoice};

    fn fixed(horizon: f64, cells: usize, increments: Vec<Vec<f64>>) -> SamplePath {
        let grid = TimeGrid::scheduled(&GridSpec::new(horizon, cells).unwrap());
        SamplePath::from_increments(grid, increments).unwrap()
    }

    #[test]
    fn worked_h_case() {
        let path = fixed(2.0, 2, vec![vec![1.0, -0.5]]);
        let x = SimpleIntegrand::new(
            vec![0.0, 1.0, 2.0],
            vec![HVector::zeros(2), HVector::from_slice(&[1.0, 0.0]), HVector::from_slice(&[0.0, 2.0])],
        )
        .unwrap();
        let out = ito_h(Integrand::Simple(&x), &path, 0, Sampling::Left).unwrap();
        assert_eq!(out.terminal().as_slice(), &[1.0, -1.0]);
        assert_eq!(out.value(0).as_slice(), &[0.0, 0.0]);
        assert_eq!(simple_closed_form_h(&x, &path, 0).unwrap().as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn zero_cases() {
        let path = fixed(1.0, 4, vec![vec![0.3, -0.2, 0.1, 0.4]]);
        let zero = SimpleIntegrand::constant(1.0, HVector::zeros(3)).unwrap();
        let out = ito_h(Integrand::Simple(&zero), &path, 0, Sampling::Left).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));

        let flat = fixed(1.0, 4, vec![vec![0.0; 4]]);
        let one = SimpleIntegrand::constant(1.0, HVector::from_slice(&[1.0, 2.0])).unwrap();
        let out = ito_h(Integrand::Simple(&one), &flat, 0, Sampling::Left).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));
        assert!(ito_h(Integrand::Simple(&one), &flat, 1, Sampling::Left).is_err());
    }

    #[test]
    fn worked_seq_case() {
        let path = fixed(1.0, 1, vec![vec![0.3], vec![-0.1]]);
        let x = SimpleIntegrand::constant(1.0, SeqH::new(DMatrix::from_row_slice(1, 2, &[1.0, 2.0]))).unwrap();
        let out = ito_seq(Integrand::Simple(&x), &path, Sampling::Left).unwrap();
        assert!((out.terminal().as_slice()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_entry_seq_equals_h() {
        let path = fixed(1.0, 4, vec![vec![0.3, -0.2, 0.1, 0.4], vec![1.0, 1.0, -1.0, 0.5]]);
        let x = GridIntegrand::new(|v: &crate::integrator::PathView<'_>| {
            SeqH::new(DMatrix::from_column_slice(2, 2, &[0.0, 0.0, 1.0 + v.driver(0), v.time()]))
        });
        let seq = ito_seq(Integrand::Grid(&x), &path, Sampling::Left).unwrap();
        let h = GridIntegrand::new(|v: &crate::integrator::PathView<'_>| HVector::from_slice(&[1.0 + v.driver(0), v.time()]));
        let single = ito_h(Integrand::Grid(&h), &path, 1, Sampling::Left).unwrap();
        assert_eq!(seq, single);
    }

    #[test]
    fn worked_general_case() {
        let spec = make_covariance(vec![0.5, 0.25], BasisChoice::Identity).unwrap();
        let l = assemble_levy(&spec, fixed(1.0, 1, vec![vec![1.0], vec![2.0]])).unwrap();
        let s = crate::space::restrict_bounded_operator(&spec, &DMatrix::from_row_slice(1, 2, &[1.0, 3.0])).unwrap();
        let x = SimpleIntegrand::constant(1.0, s).unwrap();
        let total = ito_general(Integrand::Simple(&x), &l, Sampling::Left).unwrap();
        let expected = 0.5_f64.sqrt() + 0.5 * 2.0 * 3.0;
        assert!((total.terminal().as_slice()[0] - expected).abs() < 1e-14);

        let terms = series_terms(Integrand::Simple(&x), &l, Sampling::Left).unwrap();
        assert!((terms[0].terminal().as_slice()[0] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((terms[1].terminal().as_slice()[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn operator_columns_must_match_modes() {
        let spec = make_covariance(vec![0.5, 0.25], BasisChoice::Identity).unwrap();
        let l = assemble_levy(&spec, fixed(1.0, 1, vec![vec![1.0], vec![2.0]])).unwrap();
        let x = SimpleIntegrand::constant(1.0, HSOperator::zeros(1, 3)).unwrap();
        assert!(matches!(
            ito_general(Integrand::Simple(&x), &l, Sampling::Left),
            Err(Error::SpecMismatch(_))
        ));
    }

    #[test]
    fn explicit_basis_route_matches() {
        let path = fixed(1.0, 3, vec![vec![0.3, -0.2, 0.7]]);
        let x = Realized::new(vec![
            HVector::from_slice(&[1.0, 2.0]),
            HVector::from_slice(&[-1.0, 0.5]),
            HVector::from_slice(&[0.25, 3.0]),
        ]);
        let direct = ito_h_realized(&x, path.increments(0), path.grid()).unwrap();
        let (c, s) = (0.3_f64.cos(), 0.3_f64.sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let rebased = ito_h_in_basis(&x, &path, 0, &rot).unwrap();
        assert!((direct.values() - rebased.values()).norm() < 1e-14);
    }
}
