//! Five-dimensional nadir lookup grid: construction, caching and interpolation.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tracing::{info, warn};

use super::sim::{simulate_nadir, SimConfig};
use crate::error::{Error, Result};
use crate::frpe::OperatingPoint;
use crate::io::{fmt_sig, round_sig};
use crate::scalar::Real;

pub const GRID_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "pfha-nadir-grid";

pub const AXIS_NAMES: [&str; 5] = ["loss_mw", "inertia_gva_s", "demand_gw", "response_mw", "dc_mw"];

pub const LOSS: usize = 0;
pub const INERTIA: usize = 1;
pub const DEMAND: usize = 2;
pub const RESPONSE: usize = 3;
pub const DC: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
}

impl Side {
    fn as_str(self) -> &'static str {
        match self {
            Side::Low => "low",
            Side::High => "high",
        }
    }
}

/// Axis extensions stored beyond the primary box: (axis, side).
///
/// One step past the high loss end, both ends of inertia, demand and response.
/// The low loss end (negative loss) and DC are not extended.
pub const BOUNDARY_SCHEME: [(usize, Side); 7] = [
    (LOSS, Side::High),
    (INERTIA, Side::Low),
    (INERTIA, Side::High),
    (DEMAND, Side::Low),
    (DEMAND, Side::High),
    (RESPONSE, Side::Low),
    (RESPONSE, Side::High),
];

/// Ascending coordinate values for the five axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes<T = f64> {
    pub axes: [Vec<T>; 5],
}

fn linspace<T: Real>(lo: f64, hi: f64, n: usize) -> Vec<T> {
    (0..n).map(|i| T::lit(round_sig(lo + (hi - lo) * i as f64 / (n - 1) as f64))).collect()
}

impl<T: Real> Default for GridAxes<T> {
    fn default() -> Self {
        Self {
            axes: [
                linspace(200.0, 1800.0, 7),
                linspace(80.0, 350.0, 7),
                linspace(15.0, 45.0, 5),
                linspace(500.0, 3000.0, 5),
                linspace(0.0, 1200.0, 5),
            ],
        }
    }
}

impl<T: Real> GridAxes<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, axis) in AXIS_NAMES.iter().zip(&self.axes) {
            if axis.len() < 2 || axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config(format!("grid axis {name} must hold at least two ascending values")));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> [usize; 5] {
        [0, 1, 2, 3, 4].map(|a| self.axes[a].len())
    }

    pub fn primary_len(&self) -> usize {
        self.shape().iter().product()
    }

    fn strides(&self) -> [usize; 5] {
        strides(&self.shape())
    }

    /// Coordinates of a primary node from its flat row-major index.
    pub fn node(&self, flat: usize) -> [T; 5] {
        let idx = unravel(flat, &self.shape());
        [0, 1, 2, 3, 4].map(|a| self.axes[a][idx[a]])
    }

    fn extension(&self, axis: usize, side: Side) -> T {
        let a = &self.axes[axis];
        let n = a.len();
        match side {
            Side::Low => a[0] - (a[1] - a[0]),
            Side::High => a[n - 1] + (a[n - 1] - a[n - 2]),
        }
    }
}

fn strides<const N: usize>(shape: &[usize; N]) -> [usize; N] {
    let mut s = [1usize; N];
    for a in (0..N.saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}

fn unravel<const N: usize>(mut flat: usize, shape: &[usize; N]) -> [usize; N] {
    let mut idx = [0usize; N];
    for a in (0..N).rev() {
        idx[a] = flat % shape[a];
        flat /= shape[a];
    }
    idx
}

/// Values on a one-step extension of a primary axis, over the other four axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySlab<T = f64> {
    pub axis: usize,
    pub side: Side,
    pub coordinate: T,
    /// Row-major over the remaining four axes in their usual order.
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NadirGrid<T = f64> {
    pub axes: GridAxes<T>,
    /// Primary node values, row-major in axis order.
    pub values: Vec<T>,
    pub slabs: Vec<BoundarySlab<T>>,
    /// One flag per stored point (primary first, then slabs in order).
    pub boundary_filled_mask: Vec<bool>,
    pub config_hash: String,
}

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// Number of primary simulations run by this process; lets callers detect cache hits.
pub static SIMULATIONS_RUN: AtomicUsize = AtomicUsize::new(0);

/// Stable digest of everything that determines grid contents.
pub fn config_hash<T: Real>(cfg: &SimConfig<T>, axes: &GridAxes<T>) -> String {
    let mut text = format!("v{GRID_FORMAT_VERSION};");
    let num = |t: &mut String, x: T| {
        let _ = write!(t, "{:e},", x.as_f64());
    };
    for x in [cfg.f0, cfg.step_s, cfg.horizon_s, cfg.load_damping_coeff] {
        num(&mut text, x);
    }
    let g = &cfg.governor;
    for x in [g.delay_s, g.ramp_s, g.droop] {
        num(&mut text, x);
    }
    let d = &cfg.dc;
    for x in [d.deadband_hz, d.full_delivery_hz, d.delay_s, d.ramp_s, d.creep_fraction] {
        num(&mut text, x);
    }
    for s in [&cfg.dm, &cfg.dr] {
        for x in [s.volume_fraction, s.deadband_hz, s.full_delivery_hz, s.delay_s, s.ramp_s] {
            num(&mut text, x);
        }
    }
    text.push(';');
    for b in &cfg.static_response {
        num(&mut text, b.trigger_hz);
        num(&mut text, b.block_mw);
    }
    for axis in &axes.axes {
        text.push(';');
        for x in axis {
            num(&mut text, *x);
        }
    }
    for (axis, side) in BOUNDARY_SCHEME {
        let _ = write!(text, ";{axis}{}", side.as_str());
    }
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Runs every primary simulation and nearest-neighbour fills the boundary slabs.
pub fn build_grid<T: Real>(cfg: &SimConfig<T>, axes: &GridAxes<T>) -> Result<NadirGrid<T>> {
    cfg.validate()?;
    axes.validate()?;
    let n = axes.primary_len();
    let results: Vec<Result<T>> = (0..n)
        .into_par_iter()
        .map(|flat| {
            let c = axes.node(flat);
            let point = OperatingPoint::new(c[LOSS], c[INERTIA], c[DEMAND], c[RESPONSE], c[DC]);
            let v = simulate_nadir(&point, cfg)
                .map_err(|e| Error::GridCell { coords: c.map(|x| x.as_f64()), source: Box::new(e) })?;
            let rounded = T::lit(round_sig(v.as_f64()));
            if !(rounded > T::zero()) || !rounded.is_finite() {
                return Err(Error::GridCell {
                    coords: c.map(|x| x.as_f64()),
                    source: Box::new(Error::Numeric(format!("nadir {v}"))),
                });
            }
            Ok(rounded)
        })
        .collect();
    SIMULATIONS_RUN.fetch_add(n, Ordering::Relaxed);
    let values = results.into_iter().collect::<Result<Vec<T>>>()?;

    let shape = axes.shape();
    let primary_strides = axes.strides();
    let mut slabs = Vec::with_capacity(BOUNDARY_SCHEME.len());
    for (axis, side) in BOUNDARY_SCHEME {
        let face = match side {
            Side::Low => 0,
            Side::High => shape[axis] - 1,
        };
        let rest: Vec<usize> = (0..5).filter(|a| *a != axis).collect();
        let rest_shape = [shape[rest[0]], shape[rest[1]], shape[rest[2]], shape[rest[3]]];
        let len: usize = rest_shape.iter().product();
        let slab_values = (0..len)
            .map(|flat| {
                let idx = unravel(flat, &rest_shape);
                let mut offset = face * primary_strides[axis];
                for (k, a) in rest.iter().enumerate() {
                    offset += idx[k] * primary_strides[*a];
                }
                values[offset]
            })
            .collect();
        slabs.push(BoundarySlab { axis, side, coordinate: axes.extension(axis, side), values: slab_values });
    }
    let boundary: usize = slabs.iter().map(|s| s.values.len()).sum();
    let mut mask = vec![false; n];
    mask.extend(std::iter::repeat_n(true, boundary));
    Ok(NadirGrid { axes: axes.clone(), values, slabs, boundary_filled_mask: mask, config_hash: config_hash(cfg, axes) })
}

/// Lower node index and fractional position of `v` on an ascending axis; `v` must lie inside.
#[inline]
fn locate<T: Real>(axis: &[T], v: T) -> (usize, T) {
    let n = axis.len();
    let i = axis.partition_point(|x| *x <= v).saturating_sub(1).min(n - 2);
    let t = (v - axis[i]) / (axis[i + 1] - axis[i]);
    (i, t.max(T::zero()).min(T::one()))
}

/// Multilinear interpolation on a row-major block of up to five dimensions.
fn multilinear<T: Real>(axes: &[&[T]], values: &[T], q: &[T]) -> T {
    let d = axes.len();
    let mut base = [0usize; 5];
    let mut frac = [T::zero(); 5];
    let mut stride = [1usize; 5];
    for a in (0..d).rev() {
        let (i, t) = locate(axes[a], q[a]);
        base[a] = i;
        frac[a] = t;
        if a + 1 < d {
            stride[a] = stride[a + 1] * axes[a + 1].len();
        }
    }
    // Corner values with the first axis as the most significant bit, then
    // collapsed one axis at a time as `a + t (b - a)`, which is exact on ties.
    let mut v = [T::zero(); 32];
    for (corner, slot) in v.iter_mut().enumerate().take(1usize << d) {
        let mut offset = 0;
        for a in 0..d {
            let upper = (corner >> (d - 1 - a)) & 1 == 1;
            offset += (base[a] + usize::from(upper && frac[a] != T::zero())) * stride[a];
        }
        *slot = values[offset];
    }
    for a in (0..d).rev() {
        let t = frac[a];
        for i in 0..(1usize << a) {
            v[i] = v[2 * i] + t * (v[2 * i + 1] - v[2 * i]);
        }
    }
    v[0]
}

impl<T: Real> NadirGrid<T> {
    pub fn primary_len(&self) -> usize {
        self.values.len()
    }

    pub fn boundary_len(&self) -> usize {
        self.slabs.iter().map(|s| s.values.len()).sum()
    }

    pub fn total_len(&self) -> usize {
        self.primary_len() + self.boundary_len()
    }

    /// Stored value at a primary node.
    pub fn node_value(&self, idx: [usize; 5]) -> T {
        let s = self.axes.strides();
        self.values[(0..5).map(|a| idx[a] * s[a]).sum::<usize>()]
    }

    fn primary(&self, q: &[T; 5]) -> T {
        let axes: [&[T]; 5] = [0, 1, 2, 3, 4].map(|a| self.axes.axes[a].as_slice());
        multilinear(&axes, &self.values, q)
    }

    /// Median nadir at an arbitrary query.
    ///
    /// Inside the primary box this is plain multilinear interpolation. A query
    /// outside on exactly one extended axis blends towards the boundary slab.
    /// Losses below the first loss node scale the edge value down in
    /// proportion, so a vanishing loss gives a vanishing nadir. Anything else
    /// is clamped to the box with a one-time warning.
    pub fn interpolate(&self, query: [T; 5]) -> T {
        let loss_lo = self.axes.axes[LOSS][0];
        if query[LOSS] < loss_lo && loss_lo > T::zero() {
            let mut edge = query;
            edge[LOSS] = loss_lo;
            return self.interpolate(edge) * (query[LOSS].max(T::zero()) / loss_lo);
        }
        let mut clamped = query;
        let mut outside = Vec::new();
        for a in 0..5 {
            let axis = &self.axes.axes[a];
            let (lo, hi) = (axis[0], axis[axis.len() - 1]);
            if query[a] < lo {
                clamped[a] = lo;
                outside.push((a, Side::Low));
            } else if query[a] > hi {
                clamped[a] = hi;
                outside.push((a, Side::High));
            }
        }
        if outside.is_empty() {
            return self.primary(&query);
        }
        if let [(axis, side)] = outside[..] {
            if let Some(slab) = self.slabs.iter().find(|s| s.axis == axis && s.side == side) {
                let edge = clamped[axis];
                let span = slab.coordinate - edge;
                let t = (query[axis] - edge) / span;
                if t <= T::one() {
                    let rest: Vec<usize> = (0..5).filter(|a| *a != axis).collect();
                    let rest_axes: Vec<&[T]> = rest.iter().map(|a| self.axes.axes[*a].as_slice()).collect();
                    let rest_q: Vec<T> = rest.iter().map(|a| clamped[*a]).collect();
                    let inner = self.primary(&clamped);
                    let outer = multilinear(&rest_axes, &slab.values, &rest_q);
                    return inner + t * (outer - inner);
                }
            }
        }
        if !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
            warn!(?outside, "nadir grid query outside the stored range; clamping (further warnings suppressed)");
        }
        self.primary(&clamped)
    }

    /// Writes the text grid file.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::file(path, e))?;
        w.flush().map_err(|e| Error::file(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{MAGIC} {GRID_FORMAT_VERSION}")?;
        writeln!(w, "config_hash {}", self.config_hash)?;
        for (name, axis) in AXIS_NAMES.iter().zip(&self.axes.axes) {
            let vals: Vec<String> = axis.iter().map(|x| fmt_sig(x.as_f64())).collect();
            writeln!(w, "axis {name} {}", vals.join(" "))?;
        }
        for s in &self.slabs {
            writeln!(w, "slab {} {} {}", AXIS_NAMES[s.axis], s.side.as_str(), fmt_sig(s.coordinate.as_f64()))?;
        }
        writeln!(w, "values {}", self.total_len())?;
        for v in self.values.iter().chain(self.slabs.iter().flat_map(|s| s.values.iter())) {
            writeln!(w, "{}", fmt_sig(v.as_f64()))?;
        }
        writeln!(w, "mask {}", self.boundary_filled_mask.len())?;
        for m in &self.boundary_filled_mask {
            writeln!(w, "{}", u8::from(*m))?;
        }
        Ok(())
    }

    /// Reads just the config hash from a grid file header.
    pub fn read_hash(path: &Path) -> Result<String> {
        let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| Error::file(path, "truncated grid header"))?.map_err(|e| Error::file(path, e))
        };
        check_magic(&next()?, path)?;
        let hash_line = next()?;
        hash_line
            .strip_prefix("config_hash ")
            .map(str::to_string)
            .ok_or_else(|| Error::file(path, "missing config hash"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text).map_err(|m| Error::file(path, m))
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let mut next = || lines.next().ok_or_else(|| "truncated grid file".to_string());
        check_magic(next()?, Path::new("")).map_err(|e| e.to_string())?;
        let config_hash = next()?.strip_prefix("config_hash ").ok_or("missing config hash")?.to_string();
        let num = |s: &str| s.parse::<f64>().map(T::lit).map_err(|e| format!("bad number `{s}`: {e}"));
        let mut axes: [Vec<T>; 5] = Default::default();
        for (a, name) in AXIS_NAMES.iter().enumerate() {
            let line = next()?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some("axis") || parts.next() != Some(name) {
                return Err(format!("expected axis {name}"));
            }
            axes[a] = parts.map(num).collect::<std::result::Result<_, _>>()?;
        }
        let axes = GridAxes { axes };
        axes.validate().map_err(|e| e.to_string())?;
        let mut slab_heads = Vec::new();
        let mut line = next()?;
        while let Some(rest) = line.strip_prefix("slab ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [name, side, coord] = parts[..] else {
                return Err(format!("malformed slab line `{line}`"));
            };
            let axis = AXIS_NAMES.iter().position(|n| *n == name).ok_or(format!("unknown axis `{name}`"))?;
            let side = match side {
                "low" => Side::Low,
                "high" => Side::High,
                other => return Err(format!("unknown side `{other}`")),
            };
            slab_heads.push((axis, side, num(coord)?));
            line = next()?;
        }
        let count: usize = line
            .strip_prefix("values ")
            .ok_or("missing values section")?
            .trim()
            .parse()
            .map_err(|_| "bad value count")?;
        let shape = axes.shape();
        let primary = axes.primary_len();
        let slab_sizes: Vec<usize> = slab_heads.iter().map(|(a, _, _)| primary / shape[*a]).collect();
        if count != primary + slab_sizes.iter().sum::<usize>() {
            return Err(format!("value count {count} does not match axes"));
        }
        let mut all = Vec::with_capacity(count);
        for _ in 0..count {
            all.push(num(next()?.trim())?);
        }
        let mask_count: usize = next()?
            .strip_prefix("mask ")
            .ok_or("missing mask section")?
            .trim()
            .parse()
            .map_err(|_| "bad mask count")?;
        if mask_count != count {
            return Err("mask length does not match values".into());
        }
        let mut mask = Vec::with_capacity(count);
        for _ in 0..count {
            mask.push(match next()?.trim() {
                "0" => false,
                "1" => true,
                other => return Err(format!("bad mask entry `{other}`")),
            });
        }
        let mut rest = all.split_off(primary);
        let mut slabs = Vec::new();
        for ((axis, side, coordinate), size) in slab_heads.into_iter().zip(slab_sizes) {
            let tail = rest.split_off(size);
            slabs.push(BoundarySlab { axis, side, coordinate, values: rest });
            rest = tail;
        }
        Ok(NadirGrid { axes, values: all, slabs, boundary_filled_mask: mask, config_hash })
    }
}

fn check_magic(line: &str, path: &Path) -> Result<()> {
    let expected = format!("{MAGIC} {GRID_FORMAT_VERSION}");
    if line.trim() == expected {
        Ok(())
    } else {
        Err(Error::file(path, format!("not a version {GRID_FORMAT_VERSION} nadir grid file")))
    }
}

/// Loads a cached grid whose hash matches, or builds and caches a fresh one.
///
/// Returns the grid and whether the cache was hit.
pub fn load_or_build<T: Real>(path: &Path, cfg: &SimConfig<T>, axes: &GridAxes<T>) -> Result<(NadirGrid<T>, bool)> {
    let hash = config_hash(cfg, axes);
    if path.exists() {
        match NadirGrid::<T>::read_hash(path) {
            Ok(h) if h == hash => {
                let grid = NadirGrid::read(path)?;
                info!(path = %path.display(), "nadir grid cache hit");
                return Ok((grid, true));
            }
            Ok(_) => info!(path = %path.display(), "nadir grid cache stale; rebuilding"),
            Err(e) => warn!(error = %e, "unreadable nadir grid cache; rebuilding"),
        }
    }
    let grid = build_grid(cfg, axes)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    grid.write(path)?;
    Ok((grid, false))
}
