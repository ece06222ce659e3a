//! Grids, tabulated densities and the Fourier transforms linking Wigner
//! functions, characteristic functions and homodyne marginals.
//!
//! Coordinates: a characteristic field C(x, p) is the transform
//! ∫∫ W(x', p') e^{−i(x x' + p p')} dx' dp', so that C(x, p) = C_ρ(α) with
//! α = (x + ip)/√2.

use std::f64::consts::{PI, SQRT_2};
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::PhasePoint;

pub const DEFAULT_HALF_WIDTH: f64 = 8.0;
pub const DEFAULT_POINTS: usize = 512;
const ALIAS_THRESHOLD: f64 = 1e-7;
const BINARY_MAGIC: &[u8; 8] = b"CVGRID01";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub center: f64,
    pub half_width: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(center: f64, half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid("half_width", format!("must be positive, got {half_width}")));
        }
        if !center.is_finite() {
            return Err(Error::invalid("center", "must be finite"));
        }
        if points < 2 {
            return Err(Error::invalid("points", "need at least two grid points"));
        }
        Ok(Axis { center, half_width, points })
    }

    /// Axis usable by the FFT transforms: a power of two with at least 64 nodes.
    pub fn fft(center: f64, half_width: f64, points: usize) -> Result<Self> {
        if !points.is_power_of_two() || points < 64 {
            return Err(Error::invalid("points", format!("FFT axes need a power of two >= 64, got {points}")));
        }
        Axis::new(center, half_width, points)
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lower() + i as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// The reciprocal axis produced by a forward transform of this one.
    pub fn reciprocal(&self) -> Axis {
        Axis {
            center: 0.0,
            half_width: PI / self.step(),
            points: self.points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("axes", "grid needs at least one axis"));
        }
        Ok(GridSpec { axes })
    }

    pub fn line(half_width: f64, points: usize) -> Result<Self> {
        GridSpec::new(vec![Axis::new(0.0, half_width, points)?])
    }

    pub fn square(half_width: f64, points: usize) -> Result<Self> {
        let axis = Axis::new(0.0, half_width, points)?;
        GridSpec::new(vec![axis, axis])
    }

    /// Default FFT grid: half width 8, 512 points per axis.
    pub fn default_fft() -> Self {
        let axis = Axis::fft(0.0, DEFAULT_HALF_WIDTH, DEFAULT_POINTS).expect("valid default axis");
        GridSpec { axes: vec![axis, axis] }
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step()).product()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    /// Coordinates of a flat (row-major, first axis slowest) index.
    pub fn coords(&self, mut flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            out[d] = axis.node(flat % axis.points);
            flat /= axis.points;
        }
        out
    }
}

/// Real values tabulated on a grid, row-major with the first axis slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Table {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Table { grid, values })
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Table { grid, values }
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks that the grid captures the probability mass of a density.
    pub fn check_mass(&self, tolerance: f64) -> Result<()> {
        let mass = self.mass();
        if !mass.is_finite() {
            return Err(Error::NonFinite("density mass".into()));
        }
        if mass < 1.0 - tolerance {
            return Err(Error::GridTooSmall { mass, tolerance });
        }
        Ok(())
    }

    /// Zeroes entries below `floor` (and all negatives), then renormalizes.
    /// Fails when the discarded negative mass exceeds `max_negative`.
    pub fn clip_and_normalize(&mut self, max_negative: f64) -> Result<()> {
        let vol = self.grid.cell_volume();
        let negative: f64 = self.values.iter().filter(|v| **v < 0.0).map(|v| -v * vol).sum();
        if negative > max_negative {
            return Err(Error::NegativeDensity { mass: negative });
        }
        for v in &mut self.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NonFinite("density mass after clipping".into()));
        }
        for v in &mut self.values {
            *v /= mass;
        }
        Ok(())
    }
}

/// Complex values on a two-axis grid, row-major with the x axis slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl Field2D {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if grid.rank() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: grid.rank() });
        }
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Field2D { grid, values })
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> Complex64) -> Result<Self> {
        if grid.rank() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: grid.rank() });
        }
        let (ax, ay) = (grid.axes[0], grid.axes[1]);
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..ax.points {
            let x = ax.node(i);
            for j in 0..ay.points {
                values.push(f(x, ay.node(j)));
            }
        }
        Ok(Field2D { grid, values })
    }

    pub fn from_real(table: &Table) -> Result<Self> {
        Field2D::new(table.grid.clone(), table.values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid.axes[0].points, self.grid.axes[1].points)
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.axes[1].points + j]
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.cell_volume()
    }

    pub fn real_table(&self) -> Table {
        Table {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    /// Fraction of Σ|v|² sitting on the outermost frame of the grid.
    pub fn boundary_energy(&self) -> f64 {
        let (nx, ny) = self.shape();
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut edge = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                    edge += self.at(i, j).norm_sqr();
                }
            }
        }
        edge / total
    }

    /// CSV with columns x, p, re, im.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "p", "re", "im"])?;
        let (ax, ay) = (self.grid.axes[0], self.grid.axes[1]);
        for i in 0..ax.points {
            for j in 0..ay.points {
                let v = self.at(i, j);
                w.write_record(&[
                    format!("{:e}", ax.node(i)),
                    format!("{:e}", ay.node(j)),
                    format!("{:e}", v.re),
                    format!("{:e}", v.im),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        write_grid_binary(out, &self.grid, GridValues::Complex(&self.values))
    }

    pub fn read_binary<R: Read>(input: R) -> Result<Self> {
        let (grid, values) = read_grid_binary(input)?;
        let values = match values {
            OwnedGridValues::Real(v) => v.into_iter().map(|re| Complex64::new(re, 0.0)).collect(),
            OwnedGridValues::Complex(v) => v,
        };
        Field2D::new(grid, values)
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(file))
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Field2D::read_binary(std::io::BufReader::new(file))
    }
}

enum GridValues<'a> {
    Real(&'a [f64]),
    Complex(&'a [Complex64]),
}

enum OwnedGridValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Table {
    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        write_grid_binary(out, &self.grid, GridValues::Real(&self.values))
    }

    pub fn read_binary<R: Read>(input: R) -> Result<Self> {
        let (grid, values) = read_grid_binary(input)?;
        match values {
            OwnedGridValues::Real(v) => Table::new(grid, v),
            OwnedGridValues::Complex(_) => Err(Error::Parse("expected a real-valued grid".into())),
        }
    }
}

// Layout: magic, u32 axis count, per axis (f64 center, f64 half_width,
// u64 points), u8 kind (0 real, 1 complex), then little-endian f64 values.
fn write_grid_binary<W: Write>(mut out: W, grid: &GridSpec, values: GridValues<'_>) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(grid.axes.len() as u32).to_le_bytes())?;
    for a in &grid.axes {
        out.write_all(&a.center.to_le_bytes())?;
        out.write_all(&a.half_width.to_le_bytes())?;
        out.write_all(&(a.points as u64).to_le_bytes())?;
    }
    match values {
        GridValues::Real(v) => {
            out.write_all(&[0u8])?;
            for x in v {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        GridValues::Complex(v) => {
            out.write_all(&[1u8])?;
            for z in v {
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_grid_binary<R: Read>(mut input: R) -> Result<(GridSpec, OwnedGridValues)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Parse("bad grid file magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4) as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::Parse(format!("implausible axis count {rank}")));
    }
    let mut axes = Vec::with_capacity(rank);
    for _ in 0..rank {
        input.read_exact(&mut b8)?;
        let center = f64::from_le_bytes(b8);
        input.read_exact(&mut b8)?;
        let half_width = f64::from_le_bytes(b8);
        input.read_exact(&mut b8)?;
        let points = u64::from_le_bytes(b8) as usize;
        axes.push(Axis::new(center, half_width, points)?);
    }
    let grid = GridSpec::new(axes)?;
    let mut kind = [0u8; 1];
    input.read_exact(&mut kind)?;
    let n = grid.len();
    let mut read_f64 = |input: &mut R| -> Result<f64> {
        input.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let values = match kind[0] {
        0 => OwnedGridValues::Real((0..n).map(|_| read_f64(&mut input)).collect::<Result<_>>()?),
        1 => OwnedGridValues::Complex(
            (0..n)
                .map(|_| Ok(Complex64::new(read_f64(&mut input)?, read_f64(&mut input)?)))
                .collect::<Result<_>>()?,
        ),
        k => return Err(Error::Parse(format!("unknown value kind {k}"))),
    };
    Ok((grid, values))
}

fn fft_axes(grid: &GridSpec) -> Result<(Axis, Axis)> {
    if grid.rank() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: grid.rank() });
    }
    let (ax, ay) = (grid.axes[0], grid.axes[1]);
    for a in [ax, ay] {
        Axis::fft(a.center, a.half_width, a.points)?;
    }
    Ok((ax, ay))
}

/// In-place 2D transform of a row-major nx × ny array.
fn fft2(values: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (fx, fy) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    for row in values.chunks_mut(ny) {
        fy.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); nx];
    for j in 0..ny {
        for i in 0..nx {
            column[i] = values[i * ny + j];
        }
        fx.process(&mut column);
        for i in 0..nx {
            values[i * ny + j] = column[i];
        }
    }
}

fn alternating(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn check_wigner(w: &Field2D) -> Result<()> {
    let residue = w.max_imag();
    if residue > 1e-9 {
        return Err(Error::Validation(format!("Wigner field has imaginary residue {residue:.3e}")));
    }
    let total = w.integral().re;
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Validation(format!("Wigner field integrates to {total}")));
    }
    Ok(())
}

fn check_aliasing(f: &Field2D) -> Result<()> {
    let energy = f.boundary_energy();
    if energy > ALIAS_THRESHOLD {
        return Err(Error::Aliasing { energy, threshold: ALIAS_THRESHOLD });
    }
    Ok(())
}

/// C(x, p) = ∫∫ W(x', p') e^{−i(x x' + p p')} on the reciprocal grid.
pub fn characteristic_from_wigner(w: &Field2D) -> Result<Field2D> {
    let (ax, ay) = fft_axes(&w.grid)?;
    check_wigner(w)?;
    check_aliasing(w)?;
    let (nx, ny) = (ax.points, ay.points);
    let (kx, ky) = (ax.reciprocal(), ay.reciprocal());
    let mut buf: Vec<Complex64> = (0..nx * ny)
        .map(|idx| w.values[idx] * (alternating(idx / ny) * alternating(idx % ny)))
        .collect();
    fft2(&mut buf, nx, ny, false);
    let scale = ax.step() * ay.step();
    for i in 0..nx {
        let phase_x = Complex64::from_polar(1.0, -kx.node(i) * ax.lower());
        for j in 0..ny {
            let phase_y = Complex64::from_polar(1.0, -ky.node(j) * ay.lower());
            buf[i * ny + j] *= phase_x * phase_y * scale;
        }
    }
    Field2D::new(GridSpec { axes: vec![kx, ky] }, buf)
}

/// Inverse of [`characteristic_from_wigner`]; the output grid is centred at 0.
pub fn wigner_from_characteristic(c: &Field2D) -> Result<Field2D> {
    let (kx, ky) = fft_axes(&c.grid)?;
    if kx.center != 0.0 || ky.center != 0.0 {
        return Err(Error::invalid("grid", "characteristic grid must be centred at the origin"));
    }
    let origin = c.at(kx.points / 2, ky.points / 2);
    if (origin - Complex64::new(1.0, 0.0)).norm() > 1e-6 {
        return Err(Error::Validation(format!("characteristic at origin is {origin}, expected 1")));
    }
    check_aliasing(c)?;
    let (nx, ny) = (kx.points, ky.points);
    let ax = kx.reciprocal();
    let ay = ky.reciprocal();
    let mut buf = c.values.clone();
    for i in 0..nx {
        let phase_x = Complex64::from_polar(1.0, kx.node(i) * ax.lower());
        for j in 0..ny {
            let phase_y = Complex64::from_polar(1.0, ky.node(j) * ay.lower());
            buf[i * ny + j] *= phase_x * phase_y;
        }
    }
    fft2(&mut buf, nx, ny, true);
    let scale = kx.step() * ky.step() / (4.0 * PI * PI);
    for (idx, v) in buf.iter_mut().enumerate() {
        *v *= scale * alternating(idx / ny) * alternating(idx % ny);
    }
    Field2D::new(GridSpec { axes: vec![ax, ay] }, buf)
}

/// Homodyne density of x_θ = cos θ x̂ + sin θ p̂ from a tabulated Wigner function.
///
/// Uses the Fourier slice relation: the 1D transform of P_θ is the
/// characteristic function along the ray at angle θ, evaluated here by a
/// direct separable sum over the Wigner grid, then inverted with one FFT.
pub fn homodyne_pdf_from_wigner(w: &Field2D, theta: f64) -> Result<Table> {
    let (ax, ay) = fft_axes(&w.grid)?;
    check_wigner(w)?;
    if ax.center != 0.0 || ay.center != 0.0 || ax.half_width != ay.half_width || ax.points != ay.points {
        return Err(Error::invalid("grid", "homodyne marginal needs a square grid centred at the origin"));
    }
    let n = ax.points;
    let q_axis = Axis::new(0.0, ax.half_width, n)?;
    let k_axis = q_axis.reciprocal();
    let (c, s) = (theta.cos(), theta.sin());
    let xs = ax.nodes();
    let ps = ay.nodes();
    let cell = ax.step() * ay.step();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    for (jk, slot) in spectrum.iter_mut().enumerate() {
        let kappa = k_axis.node(jk);
        let ey: Vec<Complex64> = ps.iter().map(|&p| Complex64::from_polar(1.0, -kappa * s * p)).collect();
        for (i, r) in row_sums.iter_mut().enumerate() {
            let row = &w.values[i * n..(i + 1) * n];
            *r = row.iter().zip(&ey).map(|(v, e)| v.re * e).sum();
        }
        let total: Complex64 = xs
            .iter()
            .zip(&row_sums)
            .map(|(&x, r)| r * Complex64::from_polar(1.0, -kappa * c * x))
            .sum();
        *slot = total * cell;
    }
    // P(q_i) = (Δκ/2π) Σ_j S(κ_j) e^{iκ_j q_i}
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .enumerate()
        .map(|(j, v)| v * Complex64::from_polar(1.0, k_axis.node(j) * q_axis.lower()))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = k_axis.step() / (2.0 * PI);
    let values: Vec<f64> = buf
        .iter()
        .enumerate()
        .map(|(i, v)| v.re * scale * alternating(i))
        .collect();
    let table = Table::new(GridSpec::new(vec![q_axis])?, values)?;
    let edge = table.values[0].abs().max(table.values[n - 1].abs());
    let peak = table.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if edge > 1e-6 * peak.max(1e-300) {
        return Err(Error::GridTooSmall { mass: 1.0 - edge * q_axis.step(), tolerance: 1e-6 });
    }
    Ok(table)
}

/// Unbiased single-copy estimate of C_ρ(α) from homodyne outcomes at phase arg α:
/// the empirical mean of exp(−i√2|α|q).
pub fn direct_cf_from_homodyne(samples: &[f64], alpha: &PhasePoint) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if alpha.modes() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: alpha.modes() });
    }
    let zeta = SQRT_2 * alpha.components()[0].norm();
    if zeta == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for &q in samples {
        let (s, c) = (zeta * q).sin_cos();
        re += c;
        im -= s;
    }
    let n = samples.len() as f64;
    Ok(Complex64::new(re / n, im / n))
}
