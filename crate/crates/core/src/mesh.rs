//! Uniform grids, grid functions with analytic or sampled exterior data, and
//! node regions.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{adaptive_to_infinity, power_integral};

/// One coordinate axis: `nodes` equispaced points from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, nodes: usize) -> Result<Self> {
        if nodes < 8 {
            return Err(invalid(format!("an axis needs at least eight nodes, got {nodes}")));
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(invalid(format!("axis bounds must satisfy min < max, got [{min}, {max}]")));
        }
        Ok(Self { min, max, nodes })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.nodes - 1) as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }
}

/// Cartesian grid in one or two dimensions.  Values are stored row major
/// with the first axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn uniform(min: f64, max: f64, nodes: usize) -> Result<Self> {
        Ok(Self { axes: vec![Axis::new(min, max, nodes)?] })
    }

    /// Grid with spacing `h` whose node `offset` sits at `anchor`.
    pub fn with_spacing(anchor: f64, offset: usize, h: f64, nodes: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("spacing must be positive"));
        }
        let min = anchor - offset as f64 * h;
        Self::uniform(min, min + (nodes - 1) as f64 * h, nodes)
    }

    pub fn planar(x: Axis, y: Axis) -> Result<Self> {
        Ok(Self { axes: vec![Axis::new(x.min, x.max, x.nodes)?, Axis::new(y.min, y.max, y.nodes)?] })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spacing of the first axis.
    pub fn spacing(&self) -> f64 {
        self.axes[0].spacing()
    }

    pub fn min(&self) -> f64 {
        self.axes[0].min
    }

    pub fn max(&self) -> f64 {
        self.axes[0].max
    }

    /// Coordinate of node `i` of a one dimensional grid.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.axes[0].coord(i)
    }

    /// Coordinates of the flat node index `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        let mut rest = i;
        self.axes
            .iter()
            .map(|a| {
                let k = rest % a.nodes;
                rest /= a.nodes;
                a.coord(k)
            })
            .collect()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.axes[0].nodes).map(|i| self.x(i)).collect()
    }

    pub(crate) fn require_1d(&self) -> Result<()> {
        if self.dim() != 1 {
            return Err(Error::Unsupported("this operation is implemented on one dimensional grids".into()));
        }
        Ok(())
    }

    /// Index of the node nearest to `x` (1D).
    pub fn nearest(&self, x: f64) -> usize {
        let t = ((x - self.min()) / self.spacing()).round();
        t.clamp(0.0, (self.axes[0].nodes - 1) as f64) as usize
    }
}

/// Far field of exterior data on one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tail {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude |y - origin|^exponent`
    Power {
        amplitude: f64,
        exponent: f64,
        origin: f64,
    },
}

impl Tail {
    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            Tail::Zero => 0.0,
            Tail::Constant { value } => value,
            Tail::Power { amplitude, exponent, origin } => amplitude * (y - origin).abs().powf(exponent),
        }
    }

    /// Growth exponent (0 for bounded tails).
    pub fn growth(&self) -> f64 {
        match *self {
            Tail::Power { exponent, .. } => exponent.max(0.0),
            _ => 0.0,
        }
    }
}

/// Exterior data beyond one end of a one dimensional grid: linearly
/// interpolated samples at increasing distances from the edge followed by
/// an analytic tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideExterior {
    /// `(distance beyond the edge, value)`, distances strictly increasing.
    #[serde(default)]
    pub samples: Vec<(f64, f64)>,
    pub tail: Tail,
}

impl SideExterior {
    pub fn analytic(tail: Tail) -> Self {
        Self { samples: Vec::new(), tail }
    }

    /// Drops samples so that consecutive kept distances differ by at least
    /// `rel` times the distance (and at least `min_gap`); the last sample is
    /// always kept.
    pub fn thinned(&self, rel: f64, min_gap: f64) -> Self {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let n = self.samples.len();
        for (k, &(d, v)) in self.samples.iter().enumerate() {
            let prev = out.last().map_or(0.0, |p| p.0);
            if k + 1 == n || d - prev >= (rel * d).max(min_gap) {
                out.push((d, v));
            }
        }
        Self { samples: out, tail: self.tail }
    }

    /// Distance beyond which the tail applies.
    pub fn sampled_extent(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0)
    }

    /// Value at distance `d >= 0` beyond an edge located at `edge`, with
    /// `sign = +1` on the right and `-1` on the left.  `edge_value` is the
    /// grid value used below the first sample.
    pub fn value(&self, d: f64, edge: f64, sign: f64, edge_value: f64) -> f64 {
        if self.samples.is_empty() || d > self.sampled_extent() {
            return self.tail.value(edge + sign * d);
        }
        let k = self.samples.partition_point(|s| s.0 < d);
        let (d0, v0) = if k == 0 { (0.0, edge_value) } else { self.samples[k - 1] };
        let (d1, v1) = self.samples[k];
        if d1 <= d0 {
            return v1;
        }
        v0 + (v1 - v0) * (d - d0) / (d1 - d0)
    }
}

/// Values prescribed outside the grid, described per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exterior {
    pub left: SideExterior,
    pub right: SideExterior,
}

/// Which end of a one dimensional grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Exterior {
    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        let t = if c == 0.0 { Tail::Zero } else { Tail::Constant { value: c } };
        Self { left: SideExterior::analytic(t), right: SideExterior::analytic(t) }
    }

    /// `amplitude |y - origin|^exponent` on one side, zero on the other.
    pub fn power(amplitude: f64, exponent: f64, origin: f64, side: Side) -> Self {
        let p = SideExterior::analytic(Tail::Power { amplitude, exponent, origin });
        let z = SideExterior::analytic(Tail::Zero);
        match side {
            Side::Left => Self { left: p, right: z },
            Side::Right => Self { left: z, right: p },
        }
    }

    pub fn sides(left: SideExterior, right: SideExterior) -> Self {
        Self { left, right }
    }

    pub fn side(&self, side: Side) -> &SideExterior {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Largest tail growth exponent.
    pub fn growth(&self) -> f64 {
        self.left.tail.growth().max(self.right.tail.growth())
    }

    /// Fails unless the tails are integrable against `|y|^{-1-2s}`.
    pub fn validate(&self, s: f64) -> Result<()> {
        for side in [&self.left, &self.right] {
            if let Tail::Power { exponent, .. } = side.tail {
                if exponent >= 2.0 * s {
                    return Err(Error::NonIntegrableTail { exponent, limit: 2.0 * s });
                }
            }
            if side.samples.windows(2).any(|w| w[1].0 <= w[0].0) || side.samples.first().is_some_and(|s| s.0 < 0.0) {
                return Err(invalid("exterior sample distances must be nonnegative and increasing"));
            }
        }
        Ok(())
    }

    /// Constant value if the exterior is spatially uniform.
    pub fn uniform_value(&self) -> Option<f64> {
        if !self.left.samples.is_empty() || !self.right.samples.is_empty() {
            return None;
        }
        let v = |t: Tail| match t {
            Tail::Zero => Some(0.0),
            Tail::Constant { value } => Some(value),
            Tail::Power { .. } => None,
        };
        match (v(self.left.tail), v(self.right.tail)) {
            (Some(a), Some(b)) if a == b => Some(a),
            _ => None,
        }
    }

    fn blow_up(&self, x0: f64, r: f64, s: f64) -> Self {
        let f = |side: &SideExterior| SideExterior {
            samples: side.samples.iter().map(|&(d, v)| (d / r, v / r.powf(s))).collect(),
            tail: match side.tail {
                Tail::Zero => Tail::Zero,
                Tail::Constant { value } => Tail::Constant { value: value / r.powf(s) },
                Tail::Power { amplitude, exponent, origin } => {
                    Tail::Power { amplitude: amplitude * r.powf(exponent - s), exponent, origin: (origin - x0) / r }
                }
            },
        };
        Self { left: f(&self.left), right: f(&self.right) }
    }
}

/// Nodal values on a grid together with the exterior data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub exterior: Exterior,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, exterior: Exterior) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid values must be finite"));
        }
        if grid.dim() == 2 && exterior.uniform_value().is_none() {
            return Err(Error::Unsupported("planar grids take zero or constant exterior data".into()));
        }
        Ok(Self { grid, values, exterior })
    }

    /// Samples `f` at the nodes.
    pub fn from_fn(grid: Grid, exterior: Exterior, f: impl Fn(f64) -> f64) -> Result<Self> {
        grid.require_1d()?;
        let values = grid.coords().into_iter().map(f).collect();
        Self::new(grid, values, exterior)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Piecewise linear interpolant inside the grid, exterior data outside.
    pub fn value_at(&self, y: f64) -> f64 {
        let g = &self.grid;
        if g.dim() == 2 {
            return self.value_at_2d(&[y, 0.0]);
        }
        let (a, b) = (g.min(), g.max());
        if y < a {
            return self.exterior.left.value(a - y, a, -1.0, self.values[0]);
        }
        if y > b {
            return self.exterior.right.value(y - b, b, 1.0, self.values[self.values.len() - 1]);
        }
        let h = g.spacing();
        let t = (y - a) / h;
        let n = self.values.len();
        let i = (t.floor() as usize).min(n - 2);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Bilinear interpolant on a planar grid.
    pub fn value_at_2d(&self, p: &[f64]) -> f64 {
        let ax = self.grid.axes();
        if ax.len() == 1 {
            return self.value_at(p[0]);
        }
        let outside = ax.iter().zip(p).any(|(a, &x)| x < a.min || x > a.max);
        if outside {
            return self.exterior.uniform_value().unwrap_or(0.0);
        }
        let mut idx = [0usize; 2];
        let mut w = [0.0; 2];
        for d in 0..2 {
            let t = (p[d] - ax[d].min) / ax[d].spacing();
            idx[d] = (t.floor() as usize).min(ax[d].nodes - 2);
            w[d] = t - idx[d] as f64;
        }
        let nx = ax[0].nodes;
        let v = |i: usize, j: usize| self.values[i + nx * j];
        let (i, j) = (idx[0], idx[1]);
        v(i, j) * (1.0 - w[0]) * (1.0 - w[1])
            + v(i + 1, j) * w[0] * (1.0 - w[1])
            + v(i, j + 1) * (1.0 - w[0]) * w[1]
            + v(i + 1, j + 1) * w[0] * w[1]
    }

    /// `u_r(x) = u(x0 + r x) / r^s` on the rescaled grid.
    pub fn blow_up(&self, x0: f64, r: f64, s: f64) -> Result<Self> {
        self.grid.require_1d()?;
        if !(r > 0.0) {
            return Err(invalid("blow-up radius must be positive"));
        }
        let g = &self.grid;
        let grid = Grid::uniform((g.min() - x0) / r, (g.max() - x0) / r, g.len())?;
        let scale = r.powf(-s);
        Ok(Self { grid, values: self.values.iter().map(|v| v * scale).collect(), exterior: self.exterior.blow_up(x0, r, s) })
    }

    /// `u_r` resampled onto `target` by linear interpolation.  Whatever part
    /// of the blown-up source grid lies outside `target` becomes exterior
    /// samples, so no information beyond interpolation is lost.
    pub fn blow_up_onto(&self, x0: f64, r: f64, s: f64, target: &Grid) -> Result<Self> {
        self.grid.require_1d()?;
        target.require_1d()?;
        let b = self.blow_up(x0, r, s)?;
        let values = target.coords().into_iter().map(|y| b.value_at(y)).collect();
        let (lo, hi) = (b.grid.min(), b.grid.max());
        let coords = b.grid.coords();
        let side = |sign: f64| -> SideExterior {
            let (edge, src_edge, ext) =
                if sign > 0.0 { (target.max(), hi, &b.exterior.right) } else { (target.min(), lo, &b.exterior.left) };
            let mut samples: Vec<(f64, f64)> = Vec::new();
            let dist = |x: f64| sign * (x - edge);
            let mut grid_part: Vec<(f64, f64)> = coords.iter().zip(&b.values).map(|(&x, &v)| (dist(x), v)).filter(|p| p.0 > 0.0).collect();
            grid_part.sort_by(|a, c| a.0.total_cmp(&c.0));
            samples.extend(grid_part);
            let offset = dist(src_edge);
            for &(d, v) in &ext.samples {
                if d + offset > 0.0 {
                    samples.push((d + offset, v));
                }
            }
            samples.dedup_by(|a, c| a.0 <= c.0);
            SideExterior { samples, tail: ext.tail }
        };
        let exterior = Exterior { left: side(-1.0), right: side(1.0) };
        Self::new(target.clone(), values, exterior)
    }

    /// `x -> u(x - shift)`.
    pub fn translate(&self, shift: f64) -> Result<Self> {
        self.grid.require_1d()?;
        let g = &self.grid;
        let grid = Grid::uniform(g.min() + shift, g.max() + shift, g.len())?;
        let f = |side: &SideExterior| SideExterior {
            samples: side.samples.clone(),
            tail: match side.tail {
                Tail::Power { amplitude, exponent, origin } => Tail::Power { amplitude, exponent, origin: origin + shift },
                t => t,
            },
        };
        Ok(Self { grid, values: self.values.clone(), exterior: Exterior { left: f(&self.exterior.left), right: f(&self.exterior.right) } })
    }

    /// `x -> u(-x)`.
    pub fn reflect(&self) -> Result<Self> {
        self.grid.require_1d()?;
        let g = &self.grid;
        let grid = Grid::uniform(-g.max(), -g.min(), g.len())?;
        let f = |side: &SideExterior| SideExterior {
            samples: side.samples.clone(),
            tail: match side.tail {
                Tail::Power { amplitude, exponent, origin } => Tail::Power { amplitude, exponent, origin: -origin },
                t => t,
            },
        };
        let values = self.values.iter().rev().copied().collect();
        Ok(Self { grid, values, exterior: Exterior { left: f(&self.exterior.right), right: f(&self.exterior.left) } })
    }

    /// Writes `x,value` rows (or `x,y,value` on planar grids) and a JSON
    /// sidecar `<path>.exterior.json` with the grid and exterior data.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        if self.grid.dim() == 1 {
            out.push_str("x,value\n");
        } else {
            out.push_str("x,y,value\n");
        }
        for (i, v) in self.values.iter().enumerate() {
            for c in self.grid.point(i) {
                out.push_str(&format!("{c:.17e},"));
            }
            out.push_str(&format!("{v:.17e}\n"));
        }
        fs::File::create(path)?.write_all(out.as_bytes())?;
        let side = Sidecar { grid: self.grid.clone(), exterior: self.exterior.clone() };
        let json = serde_json::to_string_pretty(&side).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(sidecar_path(path), json)?;
        Ok(())
    }

    /// Reads a file written by [`GridFunction::write_csv`].  Without a sidecar
    /// the grid is inferred from the coordinates and the exterior is zero.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
        let cols = header.split(',').count();
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 2)))?;
            if fields.len() != cols {
                return Err(Error::Parse(format!("line {}: expected {cols} fields", ln + 2)));
            }
            coords.push(fields[..cols - 1].to_vec());
            values.push(fields[cols - 1]);
        }
        let side = sidecar_path(path);
        if side.exists() {
            let sc: Sidecar = serde_json::from_str(&fs::read_to_string(side)?).map_err(|e| Error::Parse(e.to_string()))?;
            return Self::new(sc.grid, values, sc.exterior);
        }
        if cols != 2 {
            return Err(Error::Parse("planar files need their sidecar".into()));
        }
        let n = coords.len();
        if n < 2 {
            return Err(Error::Parse("need at least two rows".into()));
        }
        let grid = Grid::uniform(coords[0][0], coords[n - 1][0], n)?;
        let h = grid.spacing();
        for (i, c) in coords.iter().enumerate() {
            if (c[0] - grid.x(i)).abs() > 1e-9 * h.max(c[0].abs()) {
                return Err(Error::Parse(format!("row {} is off the uniform grid", i + 2)));
            }
        }
        Self::new(grid, values, Exterior::zero())
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    grid: Grid,
    exterior: Exterior,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".exterior.json");
    PathBuf::from(s)
}

/// Set of grid nodes, stored as sorted disjoint half-open flat index ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    ranges: Vec<(usize, usize)>,
}

impl Region {
    pub fn empty() -> Self {
        Self { ranges: Vec::new() }
    }

    pub fn from_indices(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        idx.dedup();
        let mut ranges: Vec<(usize, usize)> = Vec::new();
        for i in idx {
            match ranges.last_mut() {
                Some(r) if r.1 == i => r.1 = i + 1,
                _ => ranges.push((i, i + 1)),
            }
        }
        Self { ranges }
    }

    fn filter(grid: &Grid, keep: impl Fn(&[f64]) -> bool) -> Self {
        Self::from_indices((0..grid.len()).filter(|&i| keep(&grid.point(i))).collect())
    }

    /// Nodes in the interval `(a, b)` (or `[a, b]` when `closed`).  Node
    /// coordinates within `1e-9 h` of an endpoint count as on it.
    pub fn interval(grid: &Grid, a: f64, b: f64, closed: bool) -> Result<Self> {
        grid.require_1d()?;
        if !(b > a) {
            return Err(invalid("interval must be nonempty"));
        }
        let tol = 1e-9 * grid.spacing();
        Ok(Self::filter(grid, |p| {
            let x = p[0];
            if closed {
                x >= a - tol && x <= b + tol
            } else {
                x > a + tol && x < b - tol
            }
        }))
    }

    /// Nodes in an axis-parallel box on a planar grid.
    pub fn planar_box(grid: &Grid, lo: [f64; 2], hi: [f64; 2], closed: bool) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(invalid("boxes need a planar grid"));
        }
        let tol = 1e-9 * grid.spacing();
        Ok(Self::filter(grid, |p| {
            (0..2).all(|d| if closed { p[d] >= lo[d] - tol && p[d] <= hi[d] + tol } else { p[d] > lo[d] + tol && p[d] < hi[d] - tol })
        }))
    }

    /// Nodes in a disc (or interval of radius `r` in 1D).
    pub fn ball(grid: &Grid, center: &[f64], r: f64, closed: bool) -> Result<Self> {
        if center.len() != grid.dim() {
            return Err(invalid("center has the wrong dimension"));
        }
        let tol = 1e-9 * grid.spacing();
        Ok(Self::filter(grid, |p| {
            let d = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if closed {
                d <= r + tol
            } else {
                d < r - tol
            }
        }))
    }

    /// All nodes of the grid.
    pub fn all(grid: &Grid) -> Self {
        Self { ranges: vec![(0, grid.len())] }
    }

    /// Grid nodes not in the region.
    pub fn complement(&self, grid: &Grid) -> Self {
        let mut out = Vec::new();
        let mut start = 0;
        for &(a, b) in &self.ranges {
            if a > start {
                out.push((start, a));
            }
            start = b;
        }
        if start < grid.len() {
            out.push((start, grid.len()));
        }
        Self { ranges: out }
    }

    pub fn contains(&self, i: usize) -> bool {
        let k = self.ranges.partition_point(|r| r.1 <= i);
        k < self.ranges.len() && self.ranges[k].0 <= i
    }

    pub fn indices(&self) -> Vec<usize> {
        self.ranges.iter().flat_map(|&(a, b)| a..b).collect()
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.iter().map(|r| r.1 - r.0).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn first(&self) -> Option<usize> {
        self.ranges.first().map(|r| r.0)
    }

    pub fn last(&self) -> Option<usize> {
        self.ranges.last().map(|r| r.1 - 1)
    }
}

/// Nonlocal tail `R^{2s} int_{|y - x0| > R} |u(y)| |y - x0|^{-n-2s} dy`.
///
/// In one dimension the piecewise linear interpolant is integrated exactly
/// against the power weight; analytic tails use closed forms when centred
/// at `x0` and quadrature otherwise.  On planar grids the grid part uses
/// the trapezoid rule and the (uniform) exterior the complement identity.
pub fn tail(u: &GridFunction, radius: f64, x0: &[f64], s: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(invalid("tail radius must be positive"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("order must lie in (0,1)"));
    }
    u.exterior.validate(s)?;
    if u.grid.dim() == 2 {
        return tail_2d(u, radius, x0, s);
    }
    let x0 = x0[0];
    let p = -1.0 - 2.0 * s;
    let g = &u.grid;
    let mut total = 0.0;
    // Linear pieces [y0, y1] with values v0, v1.
    let linear = |y0: f64, y1: f64, v0: f64, v1: f64| linear_piece_tail(y0, y1, v0, v1, x0, radius, p);
    for i in 0..g.len() - 1 {
        total += linear(g.x(i), g.x(i + 1), u.values[i], u.values[i + 1]);
    }
    let n = u.values.len();
    for (side, edge, sign, ev) in [(&u.exterior.left, g.min(), -1.0, u.values[0]), (&u.exterior.right, g.max(), 1.0, u.values[n - 1])] {
        let mut prev = (0.0, ev);
        for &(d, v) in &side.samples {
            let (ya, yb) = (edge + sign * prev.0, edge + sign * d);
            let (lo, hi, vlo, vhi) = if sign > 0.0 { (ya, yb, prev.1, v) } else { (yb, ya, v, prev.1) };
            total += linear(lo, hi, vlo, vhi);
            prev = (d, v);
        }
        let start = edge + sign * prev.0;
        total += analytic_tail_integral(&side.tail, start, sign, x0, radius, s)?;
    }
    Ok(total * radius.powf(2.0 * s))
}

fn linear_piece_tail(y0: f64, y1: f64, v0: f64, v1: f64, x0: f64, radius: f64, p: f64) -> f64 {
    if y1 <= y0 {
        return 0.0;
    }
    // split at a sign change of the linear interpolant, and at x0
    let mut cuts = vec![y0, y1];
    if v0 * v1 < 0.0 {
        cuts.push(y0 + (y1 - y0) * v0 / (v0 - v1));
    }
    for c in [x0 - radius, x0 + radius] {
        if c > y0 && c < y1 {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let slope = (v1 - v0) / (y1 - y0);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        if (mid - x0).abs() <= radius {
            continue;
        }
        let sgn = if v0 + slope * (mid - y0) >= 0.0 { 1.0 } else { -1.0 };
        // |u| = sgn (c0 + c1 t) with t = |y - x0|
        let (ta, tb) = ((a - x0).abs(), (b - x0).abs());
        let (t0, t1) = if ta < tb { (ta, tb) } else { (tb, ta) };
        let dir = if mid > x0 { 1.0 } else { -1.0 };
        // u(y) = v0 + slope (y - y0) with y = x0 + dir t
        let c0 = v0 + slope * (x0 - y0);
        let c1 = slope * dir;
        acc += sgn * (c0 * power_integral(t0, t1, p) + c1 * power_integral(t0, t1, p + 1.0));
    }
    acc
}

fn analytic_tail_integral(tail: &Tail, start: f64, sign: f64, x0: f64, radius: f64, s: f64) -> Result<f64> {
    // int over y beyond `start` in direction `sign`, restricted to |y-x0|>R
    let p = -1.0 - 2.0 * s;
    // distance from x0 along the direction where integration begins
    let first = sign * (start - x0);
    match *tail {
        Tail::Zero => Ok(0.0),
        Tail::Constant { value } => {
            // region: y = start + sign*d, d >= 0; t = |y - x0|
            Ok(value.abs() * power_region_integral(first, radius, p))
        }
        Tail::Power { amplitude, exponent, origin } => {
            if origin == x0 && first >= 0.0 {
                let t0 = first.max(radius);
                return Ok(amplitude.abs() * power_integral(t0, f64::INFINITY, p + exponent));
            }
            let a = amplitude.abs();
            let f = |d: f64| {
                let y = start + sign * d;
                let t = (y - x0).abs();
                if t <= radius {
                    0.0
                } else {
                    a * (y - origin).abs().powf(exponent) * t.powf(p)
                }
            };
            // break at the points where |y - x0| = R or y = origin
            let mut cuts: Vec<f64> =
                [x0 - radius, x0 + radius, origin, x0].iter().map(|&y| sign * (y - start)).filter(|&d| d > 0.0).collect();
            cuts.push(0.0);
            cuts.sort_by(f64::total_cmp);
            let mut acc = 0.0;
            let mut g = f;
            for w in cuts.windows(2) {
                acc += crate::quadrature::adaptive(&mut g, w[0], w[1], 1e-15, 1e-12)?.0;
            }
            let d_last = *cuts.last().unwrap();
            let c = (x0 - origin).abs();
            let bound = |d: f64| {
                let t = (first + d).max(radius);
                a * (t + c).powf(exponent) * t.powf(-2.0 * s) / (2.0 * s - exponent)
            };
            let len0 = (d_last + first.abs()).max(radius);
            acc += adaptive_to_infinity(&mut g, d_last, len0, bound, 1e-12)?;
            Ok(acc)
        }
    }
}

/// `int t^p` over `{ t = |y - x0| : y = start + sign d, d >= 0 } \ [0, R]`.
fn power_region_integral(first: f64, radius: f64, p: f64) -> f64 {
    if first >= 0.0 {
        power_integral(first.max(radius), f64::INFINITY, p)
    } else {
        // passes through x0: near part [0, -first] then [0, inf)
        let back = -first;
        let near = if back > radius { power_integral(radius, back, p) } else { 0.0 };
        near + power_integral(radius, f64::INFINITY, p)
    }
}

fn tail_2d(u: &GridFunction, radius: f64, x0: &[f64], s: f64) -> Result<f64> {
    let ax = u.grid.axes();
    let (hx, hy) = (ax[0].spacing(), ax[1].spacing());
    let p = -2.0 - 2.0 * s;
    let mut grid_part = 0.0;
    let mut window_weight = 0.0;
    for j in 0..ax[1].nodes {
        for i in 0..ax[0].nodes {
            let wx = if i == 0 || i + 1 == ax[0].nodes { 0.5 } else { 1.0 };
            let wy = if j == 0 || j + 1 == ax[1].nodes { 0.5 } else { 1.0 };
            let (x, y) = (ax[0].coord(i), ax[1].coord(j));
            let d = ((x - x0[0]).powi(2) + (y - x0[1]).powi(2)).sqrt();
            if d > radius {
                let w = wx * wy * hx * hy * d.powf(p);
                grid_part += w * u.values[i + ax[0].nodes * j].abs();
                window_weight += w;
            }
        }
    }
    let c = u.exterior.uniform_value().unwrap_or(0.0).abs();
    let full = 2.0 * std::f64::consts::PI * radius.powf(-2.0 * s) / (2.0 * s);
    Ok(radius.powf(2.0 * s) * (grid_part + c * (full - window_weight)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_of_constant_is_explicit() {
        for &s in &[0.25, 0.5, 0.75] {
            let g = Grid::uniform(-0.5, 2.0, 101).unwrap();
            let u = GridFunction::from_fn(g, Exterior::constant(1.0), |_| 1.0).unwrap();
            for &(r, x0) in &[(1.0, 0.0), (0.3, 0.7), (4.0, 1.0)] {
                let t = tail(&u, r, &[x0], s).unwrap();
                assert!((t - 1.0 / s).abs() < 1e-10, "s={s} r={r}: {t}");
            }
        }
    }

    #[test]
    fn tail_of_power_far_field() {
        let g = Grid::uniform(-0.5, 0.5, 11).unwrap();
        let ext = Exterior::sides(
            SideExterior::analytic(Tail::Power { amplitude: 1.0, exponent: 0.5, origin: 0.0 }),
            SideExterior::analytic(Tail::Power { amplitude: 1.0, exponent: 0.5, origin: 0.0 }),
        );
        let u = GridFunction::from_fn(g, ext, |x: f64| x.abs().sqrt()).unwrap();
        let t = tail(&u, 1.0, &[0.0], 0.5).unwrap();
        // exponent 1/2 is not below 2s = 1 only when s <= 1/4; here 4 = 2 / s
        assert!((t - 4.0).abs() < 1e-12);
        assert!(matches!(tail(&u, 1.0, &[0.0], 0.25), Err(Error::NonIntegrableTail { .. })));
    }

    #[test]
    fn tail_with_off_centre_power_uses_quadrature() {
        let s = 0.6;
        let g = Grid::uniform(-1.0, 1.0, 21).unwrap();
        let ext = Exterior::power(2.0, 0.3, 0.5, Side::Right);
        let u = GridFunction::from_fn(g, ext, |_| 0.0).unwrap();
        let t = tail(&u, 0.5, &[0.0], s).unwrap();
        let mut f = |y: f64| 2.0 * (y - 0.5).powf(0.3) * y.powf(-1.0 - 2.0 * s);
        // oracle: substitute y = 1/w on (1, inf)
        let mut g = |w: f64| if w == 0.0 { 0.0 } else { f(1.0 / w) / (w * w) };
        let (v, _) = crate::quadrature::adaptive(&mut g, 0.0, 1.0, 1e-14, 1e-13).unwrap();
        let expect = 0.5f64.powf(2.0 * s) * v;
        assert!((t / expect - 1.0).abs() < 1e-9, "{t} vs {expect}");
        let _ = &mut f;
    }

    #[test]
    fn planar_tail_of_constant() {
        let g = Grid::planar(Axis::new(-1.0, 1.0, 41).unwrap(), Axis::new(-1.0, 1.0, 41).unwrap()).unwrap();
        let u = GridFunction::new(g, vec![1.0; 41 * 41], Exterior::constant(1.0)).unwrap();
        let t = tail(&u, 0.5, &[0.0, 0.0], 0.5).unwrap();
        assert!((t - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn blow_up_composes() {
        let g = Grid::uniform(-1.0, 3.0, 41).unwrap();
        let ext = Exterior::power(1.5, 0.4, 0.2, Side::Right);
        let u = GridFunction::from_fn(g, ext, |x: f64| x.max(0.0).powf(0.4)).unwrap();
        let a = u.blow_up(0.2, 0.5, 0.5).unwrap().blow_up(0.0, 0.25, 0.5).unwrap();
        let b = u.blow_up(0.2, 0.125, 0.5).unwrap();
        for &y in &[-3.0, 0.0, 1.7, 25.0, 400.0] {
            let (va, vb) = (a.value_at(y), b.value_at(y));
            assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0), "{y}: {va} {vb}");
            let direct = u.value_at(0.2 + 0.125 * y) / 0.125f64.powf(0.5);
            assert!((vb - direct).abs() <= 1e-12 * vb.abs().max(1.0));
        }
    }

    #[test]
    fn blow_up_onto_smaller_window_keeps_outside_data() {
        let g = Grid::uniform(-1.0, 3.0, 401).unwrap();
        let ext = Exterior::power(1.0, 1.5, 0.0, Side::Right);
        let u = GridFunction::from_fn(g, ext, |x: f64| x.max(0.0).powf(1.5)).unwrap();
        let target = Grid::uniform(-1.0, 2.0, 61).unwrap();
        let b = u.blow_up_onto(0.0, 0.5, 0.5, &target).unwrap();
        for &y in &[-0.7f64, 0.0, 0.3, 1.9, 2.5, 5.9, 7.0, 40.0] {
            let expect = 0.5 * y.max(0.0).powf(1.5);
            let got = b.value_at(y);
            assert!((got - expect).abs() <= 2e-3 * expect.max(1.0), "{y}: {got} vs {expect}");
        }
        let identity = u.blow_up_onto(0.0, 1.0, 0.5, &u.grid).unwrap();
        for (a, b) in identity.values.iter().zip(&u.values) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn translate_and_reflect() {
        let g = Grid::uniform(0.0, 2.0, 21).unwrap();
        let u = GridFunction::from_fn(g, Exterior::power(1.0, 0.5, 0.0, Side::Right), |x: f64| x.sqrt()).unwrap();
        let t = u.translate(1.0).unwrap();
        let r = u.reflect().unwrap();
        for &y in &[0.3f64, 1.7, 2.0, 9.0] {
            assert!((t.value_at(y + 1.0) - u.value_at(y)).abs() < 1e-14);
            assert!((r.value_at(-y) - u.value_at(y)).abs() < 1e-14);
        }
        assert_eq!(r.value_at(3.0), 0.0);
    }

    #[test]
    fn sampled_exterior_interpolates() {
        let side = SideExterior { samples: vec![(1.0, 2.0), (3.0, 6.0)], tail: Tail::Constant { value: 7.0 } };
        let g = Grid::uniform(-6.0, 1.0, 8).unwrap();
        let u = GridFunction::new(g, vec![0.0; 8], Exterior::sides(SideExterior::analytic(Tail::Zero), side)).unwrap();
        assert_eq!(u.value_at(1.5), 1.0);
        assert_eq!(u.value_at(3.0), 4.0);
        assert_eq!(u.value_at(10.0), 7.0);
        assert_eq!(u.value_at(-9.0), 0.0);
    }

    #[test]
    fn regions() {
        let g = Grid::uniform(-2.0, 2.0, 9).unwrap();
        let open = Region::interval(&g, -1.0, 1.0, false).unwrap();
        assert_eq!(open.indices(), vec![3, 4, 5]);
        let closed = Region::interval(&g, -1.0, 1.0, true).unwrap();
        assert_eq!(closed.indices(), vec![2, 3, 4, 5, 6]);
        let c = closed.complement(&g);
        assert_eq!(c.indices(), vec![0, 1, 7, 8]);
        assert!(c.contains(8) && !c.contains(4));
        let p = Grid::planar(Axis::new(0.0, 1.0, 9).unwrap(), Axis::new(0.0, 1.0, 9).unwrap()).unwrap();
        let b = Region::ball(&p, &[0.5, 0.5], 0.3, true).unwrap();
        assert_eq!(b.len(), 21);
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("nlfb-mesh-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("u.csv");
        let g = Grid::uniform(-1.0, 1.0, 17).unwrap();
        let u = GridFunction::from_fn(g, Exterior::power(0.5, 0.2, 1.0, Side::Right), |x: f64| x.sin()).unwrap();
        u.write_csv(&path).unwrap();
        let v = GridFunction::read_csv(&path).unwrap();
        assert_eq!(u, v);
        fs::remove_file(sidecar_path(&path)).unwrap();
        let w = GridFunction::read_csv(&path).unwrap();
        assert_eq!(w.values, u.values);
        assert_eq!(w.exterior, Exterior::zero());
    }
}
