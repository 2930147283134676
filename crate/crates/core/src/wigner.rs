//! Wigner functions through the displaced-parity identity
//! `W(x, p) = (1/pi) Tr[T(-V) rho T(-V)^dag Pi]` with `V = (x, p)` and
//! `hbar = 1`.
//!
//! | quantity               | general `hbar`       | here        |
//! |------------------------|----------------------|-------------|
//! | Wigner prefactor       | `1/(2 pi hbar)`      | `1/(2 pi)`  |
//! | displaced parity       | `1/(pi hbar)`        | `1/pi`      |
//! | vacuum `W(0, 0)`       | `1/(pi hbar)`        | `1/pi`      |

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::bosonic::LEAKAGE_TOL;
use crate::error::{Error, Result};
use crate::gkp::{Displacer, PhaseVector};
use crate::quantum::{DensityMatrix, StateVector, C64};

/// Boundary value above which a grid is considered too small for its state.
pub const COVERAGE_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub x_values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// `values[(i, j)] = W(x_i, p_j)`.
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    /// `x,p,w` rows, `x` outermost.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,p,w\n");
        for (i, x) in self.x_values.iter().enumerate() {
            for (j, p) in self.p_values.iter().enumerate() {
                let _ = writeln!(s, "{x:.16e},{p:.16e},{:.16e}", self.values[(i, j)]);
            }
        }
        s
    }

    /// Trapezoid estimate of the integral over the grid.
    pub fn integral(&self) -> f64 {
        let rows: Vec<f64> = (0..self.x_values.len())
            .map(|i| trapezoid(&self.p_values, &self.values.row(i).iter().copied().collect::<Vec<_>>()))
            .collect();
        trapezoid(&self.x_values, &rows)
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    /// Largest `|W|` on the grid boundary.
    pub fn boundary_max(&self) -> f64 {
        let (nx, np) = self.values.shape();
        let mut m = 0.0f64;
        for i in 0..nx {
            for j in 0..np {
                if i == 0 || j == 0 || i + 1 == nx || j + 1 == np {
                    m = m.max(self.values[(i, j)].abs());
                }
            }
        }
        m
    }

    /// `W(x_i, p_j)` for the nearest grid point.
    pub fn at(&self, x: f64, p: f64) -> f64 {
        let nearest = |vals: &[f64], t: f64| {
            (0..vals.len()).min_by(|&a, &b| (vals[a] - t).abs().total_cmp(&(vals[b] - t).abs())).unwrap_or(0)
        };
        self.values[(nearest(&self.x_values, x), nearest(&self.p_values, p))]
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Fock dimension that holds a `dim`-level state after a shift of length
/// `reach`: the photon number can grow to about `(sqrt(dim) + |alpha|)^2`,
/// plus a tail margin. The leakage guard still checks every result.
pub fn working_dim(dim: usize, reach: f64) -> usize {
    let alpha = reach / 2f64.sqrt();
    let edge = (dim as f64).sqrt() + alpha;
    dim.max((edge * edge + 8.0 * edge + 16.0).ceil() as usize)
}

/// `Tr[T(-V) rho T(-V)^dag Pi]` as a complex number; the imaginary part is
/// roundoff for Hermitian `rho`. Evaluated in a padded space so that the
/// shifted state is not clipped by the truncation.
pub fn displaced_parity(rho: &DensityMatrix, x: f64, p: f64) -> Result<C64> {
    let dim = working_dim(rho.dim(), x.hypot(p));
    let rho = rho.padded(dim);
    let d = Displacer::new(dim)?;
    let t = d.operator(PhaseVector::new(-x, -p))?;
    let m = t.matrix() * rho.matrix() * t.matrix().adjoint();
    if m[(dim - 1, dim - 1)].re >= LEAKAGE_TOL {
        return Err(Error::Leakage(format!("displaced state reaches Fock level {} at ({x}, {p})", dim - 1)));
    }
    Ok((0..dim).map(|n| if n % 2 == 0 { m[(n, n)] } else { -m[(n, n)] }).sum())
}

pub fn wigner_point(rho: &DensityMatrix, x: f64, p: f64) -> Result<f64> {
    Ok(displaced_parity(rho, x, p)?.re / PI)
}

fn pure_components(rho: &DensityMatrix) -> Vec<(f64, StateVector)> {
    let eig = SymmetricEigen::new(rho.matrix().clone());
    (0..rho.dim())
        .filter(|&k| eig.eigenvalues[k] > 1e-14)
        .map(|k| {
            let v = eig.eigenvectors.column(k).into_owned();
            (eig.eigenvalues[k], StateVector::new(v).expect("eigenvector is finite"))
        })
        .collect()
}

fn parity_weight(psi: &StateVector) -> f64 {
    psi.amplitudes().iter().enumerate().map(|(n, z)| if n % 2 == 0 { z.norm_sqr() } else { -z.norm_sqr() }).sum()
}

/// Dense grid on `[x0, x1] x [p0, p1]`. Each eigenvector of `rho` is shifted
/// in position once per column and then in momentum per point, so every
/// point costs a few dense matrix-vector products.
pub fn wigner_grid(rho: &DensityMatrix, x_range: (f64, f64), p_range: (f64, f64), nx: usize, np: usize) -> Result<WignerGrid> {
    if nx == 0 || np == 0 {
        return Err(Error::InvalidParameter("grid needs at least one point per axis".into()));
    }
    let xs = linspace(x_range.0, x_range.1, nx);
    let ps = linspace(p_range.0, p_range.1, np);
    let reach = |r: (f64, f64)| r.0.abs().max(r.1.abs());
    let dim = working_dim(rho.dim(), reach(x_range).hypot(reach(p_range)));
    let d = Displacer::new(dim)?;
    let comps: Vec<(f64, StateVector)> = pure_components(rho).into_iter().map(|(w, v)| (w, v.padded(dim))).collect();
    let columns: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| -> Result<Vec<f64>> {
            let shifted: Vec<(f64, StateVector)> = comps
                .iter()
                .map(|(w, psi)| Ok((*w, d.apply(PhaseVector::new(-x, 0.0), psi)?)))
                .collect::<Result<_>>()?;
            ps.iter()
                .map(|&p| {
                    let mut acc = 0.0;
                    for (w, phi) in &shifted {
                        acc += w * parity_weight(&d.apply(PhaseVector::new(0.0, -p), phi)?);
                    }
                    Ok(acc / PI)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(nx, np, |i, j| columns[i][j]);
    Ok(WignerGrid { x_values: xs, p_values: ps, values })
}

#[derive(Clone, Debug)]
pub struct Marginals {
    pub x_values: Vec<f64>,
    /// `int W(x, p) dp`.
    pub rho_x: Vec<f64>,
    pub p_values: Vec<f64>,
    /// `int W(x, p) dx`.
    pub rho_p: Vec<f64>,
    /// False when the grid boundary carries `|W| > 1e-4`.
    pub covered: bool,
}

impl Marginals {
    pub fn norms(&self) -> (f64, f64) {
        (trapezoid(&self.x_values, &self.rho_x), trapezoid(&self.p_values, &self.rho_p))
    }
}

pub fn marginals(grid: &WignerGrid) -> Marginals {
    let (nx, np) = grid.values.shape();
    let rho_x = (0..nx).map(|i| trapezoid(&grid.p_values, &grid.values.row(i).iter().copied().collect::<Vec<_>>())).collect();
    let rho_p = (0..np).map(|j| trapezoid(&grid.x_values, &grid.values.column(j).iter().copied().collect::<Vec<_>>())).collect();
    Marginals {
        x_values: grid.x_values.clone(),
        rho_x,
        p_values: grid.p_values.clone(),
        rho_p,
        covered: grid.boundary_max() <= COVERAGE_TOL,
    }
}

/// Vacuum Wigner function `(1/pi) exp(-(x^2 + p^2))`.
pub fn vacuum_wigner(x: f64, p: f64) -> f64 {
    (-(x * x + p * p)).exp() / PI
}
