//! Quasi-static turbine torque as a function of speed and guide-vane opening.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Anything that can report the net mechanical torque (N·m) at a normalized
/// speed and opening.
pub trait TorqueMap {
    fn torque(&self, omega: f64, opening: f64) -> f64;
}

/// Analytic hill chart `T(ω, o) = T_ref·(o·(1 + 0.5·o) − k·ω·(0.3 + o))`.
///
/// The default coefficients are calibrated against the startup times of the
/// reference schedule (standard parameters synchronize in roughly 48 s,
/// the slow/low-opening startup needs about 110 s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillChart {
    /// Torque scale (N·m).
    pub t_ref: f64,
    /// Speed self-regulation slope.
    pub k: f64,
}

impl Default for HillChart {
    fn default() -> Self {
        Self {
            t_ref: 1.78e6,
            k: 0.33,
        }
    }
}

impl TorqueMap for HillChart {
    fn torque(&self, omega: f64, opening: f64) -> f64 {
        self.t_ref * (opening * (1.0 + 0.5 * opening) - self.k * omega * (0.3 + opening))
    }
}

impl HillChart {
    /// Sample the chart on a uniform grid.
    pub fn sample(
        &self,
        omega_max: f64,
        n_omega: usize,
        opening_max: f64,
        n_opening: usize,
    ) -> Result<TorqueSurface> {
        if n_omega < 2 || n_opening < 2 {
            return Err(Error::InvalidSurface("grid needs at least 2 nodes per axis".into()));
        }
        let omega_grid = linspace(0.0, omega_max, n_omega);
        let opening_grid = linspace(0.0, opening_max, n_opening);
        let mut torque = Vec::with_capacity(n_omega * n_opening);
        for &w in &omega_grid {
            for &o in &opening_grid {
                torque.push(self.torque(w, o));
            }
        }
        TorqueSurface::new(omega_grid, opening_grid, torque)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Torque sampled on a rectangular (ω, o) grid, queried by bilinear
/// interpolation. Queries outside the grid are clamped to its edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueSurface {
    omega_grid: Vec<f64>,
    opening_grid: Vec<f64>,
    /// Row-major: `torque[i * n_opening + j]` is the value at
    /// `(omega_grid[i], opening_grid[j])`.
    torque: Vec<f64>,
}

impl TorqueSurface {
    pub fn new(omega_grid: Vec<f64>, opening_grid: Vec<f64>, torque: Vec<f64>) -> Result<Self> {
        check_axis("omega", &omega_grid)?;
        check_axis("opening", &opening_grid)?;
        if torque.len() != omega_grid.len() * opening_grid.len() {
            return Err(Error::InvalidSurface(format!(
                "expected {}x{} torque values, got {}",
                omega_grid.len(),
                opening_grid.len(),
                torque.len()
            )));
        }
        if torque.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSurface("non-finite torque value".into()));
        }
        Ok(Self {
            omega_grid,
            opening_grid,
            torque,
        })
    }

    /// The default synthetic surface: [`HillChart::default`] on a 25×25 grid
    /// spanning ω ∈ [0, 2] and o ∈ [0, 1].
    pub fn synthetic_default() -> Self {
        HillChart::default()
            .sample(2.0, 25, 1.0, 25)
            .expect("default hill chart grid is valid")
    }

    pub fn omega_grid(&self) -> &[f64] {
        &self.omega_grid
    }

    pub fn opening_grid(&self) -> &[f64] {
        &self.opening_grid
    }

    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.torque[i * self.opening_grid.len() + j]
    }

    /// Bilinear interpolation of the four nodes enclosing `(omega, opening)`.
    pub fn lookup(&self, omega: f64, opening: f64) -> f64 {
        let (i, tx) = locate(&self.omega_grid, omega);
        let (j, ty) = locate(&self.opening_grid, opening);
        let f00 = self.node(i, j);
        let f01 = self.node(i, j + 1);
        let f10 = self.node(i + 1, j);
        let f11 = self.node(i + 1, j + 1);
        (1.0 - tx) * ((1.0 - ty) * f00 + ty * f01) + tx * ((1.0 - ty) * f10 + ty * f11)
    }

    /// Returns human-readable violations of the physical shape constraints:
    /// torque non-increasing in ω for each opening and non-decreasing in o
    /// for each speed.
    pub fn monotonicity_violations(&self) -> Vec<String> {
        let (nw, no) = (self.omega_grid.len(), self.opening_grid.len());
        let mut out = Vec::new();
        for j in 0..no {
            for i in 1..nw {
                if self.node(i, j) > self.node(i - 1, j) {
                    out.push(format!("torque increases with speed at node ({i}, {j})"));
                }
            }
        }
        for i in 0..nw {
            for j in 1..no {
                if self.node(i, j) < self.node(i, j - 1) {
                    out.push(format!("torque decreases with opening at node ({i}, {j})"));
                }
            }
        }
        out
    }

    /// Speed at which the interpolated torque crosses zero for a fixed
    /// opening, if the crossing lies inside the grid.
    pub fn equilibrium_speed(&self, opening: f64) -> Option<f64> {
        let w = &self.omega_grid;
        for i in 1..w.len() {
            let a = self.lookup(w[i - 1], opening);
            let b = self.lookup(w[i], opening);
            if a > 0.0 && b <= 0.0 {
                return Some(w[i - 1] + (w[i] - w[i - 1]) * a / (a - b));
            }
        }
        None
    }

    /// Reads the CSV grid format: the header row holds the opening grid
    /// (first cell is a label and ignored), each following row starts with
    /// an ω value followed by the torques at every opening.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = rdr.records();
        let header = rows
            .next()
            .ok_or_else(|| Error::InvalidSurface("empty torque file".into()))??;
        let opening_grid = header
            .iter()
            .skip(1)
            .map(parse_cell)
            .collect::<Result<Vec<_>>>()?;
        let mut omega_grid = Vec::new();
        let mut torque = Vec::new();
        for rec in rows {
            let rec = rec?;
            if rec.len() != opening_grid.len() + 1 {
                return Err(Error::InvalidSurface(format!(
                    "row has {} cells, expected {}",
                    rec.len(),
                    opening_grid.len() + 1
                )));
            }
            omega_grid.push(parse_cell(&rec[0])?);
            for cell in rec.iter().skip(1) {
                torque.push(parse_cell(cell)?);
            }
        }
        Self::new(omega_grid, opening_grid, torque)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["omega\\opening".to_string()];
        header.extend(self.opening_grid.iter().map(|o| o.to_string()));
        wtr.write_record(&header)?;
        for (i, w) in self.omega_grid.iter().enumerate() {
            let mut row = vec![w.to_string()];
            row.extend((0..self.opening_grid.len()).map(|j| self.node(i, j).to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl TorqueMap for TorqueSurface {
    fn torque(&self, omega: f64, opening: f64) -> f64 {
        self.lookup(omega, opening)
    }
}

fn parse_cell(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::InvalidSurface(format!("cannot parse '{s}' as a number")))
}

fn check_axis(name: &str, grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidSurface(format!("{name} grid needs at least 2 nodes")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSurface(format!("{name} grid has non-finite values")));
    }
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidSurface(format!("{name} grid is not strictly increasing")));
    }
    Ok(())
}

/// Cell index and local coordinate in [0, 1] for `x`, clamped to the grid.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[last] {
        return (last - 1, 1.0);
    }
    // first node strictly greater than x
    let hi = grid.partition_point(|&g| g <= x);
    let i = hi - 1;
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
}
