//! Periodic grids on `[-L, L)^m`, multi-component fields and their transforms.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RLXFLD01";

/// Uniform periodic grid with `sizes[a]` points along axis `a` (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub sizes: Vec<usize>,
    pub half_length: f64,
}

impl Grid {
    pub fn new(sizes: Vec<usize>, half_length: f64) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > 3 {
            return Err(Error::Dimension(format!("grid dimension must be 1, 2 or 3, got {}", sizes.len())));
        }
        if let Some(&bad) = sizes.iter().find(|&&n| n < 4 || !n.is_power_of_two()) {
            return Err(Error::GridTooSmall(format!("grid size {bad} is not a power of two >= 4")));
        }
        if !(half_length > 0.0) {
            return Err(Error::GridTooSmall(format!("half length {half_length} must be positive")));
        }
        Ok(Self { sizes, half_length })
    }

    pub fn uniform(m: usize, n: usize, half_length: f64) -> Result<Self> {
        Self::new(vec![n; m], half_length)
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self, axis: usize) -> f64 {
        2.0 * self.half_length / self.sizes[axis] as f64
    }

    /// Volume of one cell.
    pub fn cell(&self) -> f64 {
        (0..self.dim()).map(|a| self.dx(a)).product()
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        -self.half_length + i as f64 * self.dx(axis)
    }

    pub fn axis_coordinates(&self, axis: usize) -> Vec<f64> {
        (0..self.sizes[axis]).map(|i| self.coordinate(axis, i)).collect()
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.sizes[a];
            idx /= self.sizes[a];
        }
        out
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = self.coordinate(a, ix[a]);
        }
        x
    }

    /// Signed integer frequency of FFT index `k` along `axis`.
    pub fn frequency(&self, axis: usize, k: usize) -> i64 {
        let n = self.sizes[axis];
        if k < n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// Angular wavenumber `pi k / L`; the Nyquist index maps to 0 so that every
    /// mode has its conjugate partner on the grid.
    pub fn wavenumber(&self, axis: usize, k: usize) -> f64 {
        if k == self.sizes[axis] / 2 {
            0.0
        } else {
            std::f64::consts::PI * self.frequency(axis, k) as f64 / self.half_length
        }
    }

    pub fn xi(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut xi = [0.0; 3];
        for a in 0..self.dim() {
            xi[a] = self.wavenumber(a, ix[a]);
        }
        xi
    }

    /// True when the mode survives the two-thirds dealiasing rule.
    pub fn dealias_keep(&self, idx: usize) -> bool {
        let ix = self.unravel(idx);
        (0..self.dim()).all(|a| 3 * self.frequency(a, ix[a]).unsigned_abs() as usize <= self.sizes[a])
    }
}

struct Plans {
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

fn plans(sizes: &[usize]) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<Vec<usize>, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("plan cache poisoned");
    map.entry(sizes.to_vec())
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
                inverse: sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
            })
        })
        .clone()
}

/// In-place unnormalized multi-dimensional FFT of one component.
fn fft_nd(sizes: &[usize], buf: &mut [Complex64], inverse: bool) {
    let plans = plans(sizes);
    let total = buf.len();
    for axis in 0..sizes.len() {
        let n = sizes[axis];
        let fft = if inverse { &plans.inverse[axis] } else { &plans.forward[axis] };
        let stride: usize = sizes[axis + 1..].iter().product();
        if stride == 1 {
            fft.process(buf);
            continue;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let block = n * stride;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for i in 0..n {
                    line[i] = buf[base + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for i in 0..n {
                    buf[base + i * stride] = line[i];
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }
}

/// Forward transform of every component of a real field.
pub fn forward(sizes: &[usize], data: &[f64], components: usize) -> Vec<Complex64> {
    let len = data.len() / components;
    let mut out: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    out.par_chunks_mut(len).for_each(|c| fft_nd(sizes, c, false));
    out
}

/// Inverse transform keeping the real part.
pub fn inverse_real(sizes: &[usize], mut spec: Vec<Complex64>, components: usize) -> Vec<f64> {
    let len = spec.len() / components;
    spec.par_chunks_mut(len).for_each(|c| fft_nd(sizes, c, true));
    spec.into_iter().map(|z| z.re).collect()
}

/// Inverse transform keeping the full complex result.
pub fn inverse_complex(sizes: &[usize], mut spec: Vec<Complex64>, components: usize) -> Vec<Complex64> {
    let len = spec.len() / components;
    spec.par_chunks_mut(len).for_each(|c| fft_nd(sizes, c, true));
    spec
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Physical(Vec<f64>),
    Spectral(Vec<Complex64>),
}

/// `n`-component field on a grid, stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub n: usize,
    pub data: FieldData,
}

impl GridField {
    pub fn zeros(grid: &Grid, n: usize) -> Self {
        Self { grid: grid.clone(), n, data: FieldData::Physical(vec![0.0; n * grid.len()]) }
    }

    pub fn from_physical(grid: &Grid, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * grid.len() {
            return Err(Error::Dimension(format!("{} samples for {n} components on {} points", data.len(), grid.len())));
        }
        Ok(Self { grid: grid.clone(), n, data: FieldData::Physical(data) })
    }

    pub fn from_spectral(grid: &Grid, n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * grid.len() {
            return Err(Error::Dimension(format!("{} modes for {n} components on {} points", data.len(), grid.len())));
        }
        Ok(Self { grid: grid.clone(), n, data: FieldData::Spectral(data) })
    }

    /// Samples `f(x, out)` at every grid point.
    pub fn from_fn(grid: &Grid, n: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let len = grid.len();
        let mut data = vec![0.0; n * len];
        let mut val = vec![0.0; n];
        for idx in 0..len {
            let x = grid.point(idx);
            f(&x[..grid.dim()], &mut val);
            for c in 0..n {
                data[c * len + idx] = val[c];
            }
        }
        Self { grid: grid.clone(), n, data: FieldData::Physical(data) }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.data, FieldData::Spectral(_))
    }

    pub fn to_spectral(&self) -> Self {
        match &self.data {
            FieldData::Spectral(_) => self.clone(),
            FieldData::Physical(d) => Self {
                grid: self.grid.clone(),
                n: self.n,
                data: FieldData::Spectral(forward(&self.grid.sizes, d, self.n)),
            },
        }
    }

    pub fn to_physical(&self) -> Self {
        match &self.data {
            FieldData::Physical(_) => self.clone(),
            FieldData::Spectral(s) => Self {
                grid: self.grid.clone(),
                n: self.n,
                data: FieldData::Physical(inverse_real(&self.grid.sizes, s.clone(), self.n)),
            },
        }
    }

    /// Physical samples, transforming if needed.
    pub fn physical(&self) -> Vec<f64> {
        match self.to_physical().data {
            FieldData::Physical(d) => d,
            FieldData::Spectral(_) => unreachable!(),
        }
    }

    pub fn spectral(&self) -> Vec<Complex64> {
        match self.to_spectral().data {
            FieldData::Spectral(d) => d,
            FieldData::Physical(_) => unreachable!(),
        }
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        let len = self.grid.len();
        self.physical()[c * len..(c + 1) * len].to_vec()
    }

    /// Field made of the listed components.
    pub fn select(&self, comps: &[usize]) -> Self {
        let len = self.grid.len();
        let d = self.physical();
        let mut out = Vec::with_capacity(comps.len() * len);
        for &c in comps {
            out.extend_from_slice(&d[c * len..(c + 1) * len]);
        }
        Self { grid: self.grid.clone(), n: comps.len(), data: FieldData::Physical(out) }
    }

    /// Applies `m` (rows x n) pointwise.
    pub fn map_matrix(&self, m: &crate::linalg::Mat) -> Self {
        let len = self.grid.len();
        let d = self.physical();
        let rows = m.nrows();
        let mut out = vec![0.0; rows * len];
        for r in 0..rows {
            for c in 0..self.n {
                let w = m[(r, c)];
                if w != 0.0 {
                    for i in 0..len {
                        out[r * len + i] += w * d[c * len + i];
                    }
                }
            }
        }
        Self { grid: self.grid.clone(), n: rows, data: FieldData::Physical(out) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b) = (self.physical(), other.physical());
        Self {
            grid: self.grid.clone(),
            n: self.n,
            data: FieldData::Physical(a.iter().zip(&b).map(|(x, y)| x - y).collect()),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = (self.physical(), other.physical());
        Self {
            grid: self.grid.clone(),
            n: self.n,
            data: FieldData::Physical(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        }
    }

    pub fn sup(&self) -> f64 {
        self.physical().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Integral of each component over the box.
    pub fn integrals(&self) -> Vec<f64> {
        let len = self.grid.len();
        let d = self.physical();
        let cell = self.grid.cell();
        (0..self.n).map(|c| d[c * len..(c + 1) * len].iter().sum::<f64>() * cell).collect()
    }

    /// `L^2` norm computed from the spectrum (Parseval).
    pub fn l2_norm_spectral(&self) -> f64 {
        let s = self.spectral();
        let len = self.grid.len() as f64;
        (s.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell() / len).sqrt()
    }

    /// Spectral partial derivative along the axes listed in `orders`
    /// (`orders[a]` derivatives along axis `a`).
    pub fn derivative(&self, orders: &[usize]) -> Self {
        if orders.iter().all(|&o| o == 0) {
            return self.to_physical();
        }
        let len = self.grid.len();
        let mut s = self.spectral();
        let grid = &self.grid;
        s.par_chunks_mut(len).for_each(|comp| {
            for (idx, z) in comp.iter_mut().enumerate() {
                let xi = grid.xi(idx);
                let mut f = Complex64::new(1.0, 0.0);
                for (a, &o) in orders.iter().enumerate() {
                    f *= Complex64::new(0.0, xi[a]).powu(o as u32);
                }
                *z *= f;
            }
        });
        Self { grid: self.grid.clone(), n: self.n, data: FieldData::Spectral(s) }.to_physical()
    }

    /// Pointwise Euclidean norm over components (and derivative tensor entries)
    /// of the `beta`-th derivative.
    pub fn derivative_magnitude(&self, beta: usize) -> Vec<f64> {
        let m = self.grid.dim();
        let len = self.grid.len();
        let mut acc = vec![0.0; len];
        // ordered index tuples in m^beta, grouped by their multi-index
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for code in 0..m.pow(beta as u32) {
            let mut orders = vec![0; m];
            let mut c = code;
            for _ in 0..beta {
                orders[c % m] += 1;
                c /= m;
            }
            *counts.entry(orders).or_insert(0) += 1;
        }
        let mut keys: Vec<_> = counts.into_iter().collect();
        keys.sort();
        for (orders, mult) in keys {
            let d = self.derivative(&orders).physical();
            for c in 0..self.n {
                for i in 0..len {
                    acc[i] += mult as f64 * d[c * len + i] * d[c * len + i];
                }
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    /// `||D^beta u||_p` with the pointwise Euclidean norm.
    pub fn norm(&self, beta: usize, p: crate::decay::Norm) -> f64 {
        let mag = self.derivative_magnitude(beta);
        let cell = self.grid.cell();
        match p {
            crate::decay::Norm::L1 => mag.iter().sum::<f64>() * cell,
            crate::decay::Norm::L2 => (mag.iter().map(|x| x * x).sum::<f64>() * cell).sqrt(),
            crate::decay::Norm::Inf => mag.iter().fold(0.0, |m, x| m.max(*x)),
        }
    }

    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        for &n in &self.grid.sizes {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        w.write_all(&self.grid.half_length.to_le_bytes())?;
        match &self.data {
            FieldData::Physical(d) => {
                w.write_all(&[0u8])?;
                for x in d {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            FieldData::Spectral(d) => {
                w.write_all(&[1u8])?;
                for z in d {
                    w.write_all(&z.re.to_le_bytes())?;
                    w.write_all(&z.im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a grid field container".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut dyn Read| -> Result<usize> {
            r.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf) as usize)
        };
        let m = read_u32(r)?;
        let n = read_u32(r)?;
        let sizes = (0..m).map(|_| read_u32(r)).collect::<Result<Vec<_>>>()?;
        let mut f = [0u8; 8];
        r.read_exact(&mut f)?;
        let grid = Grid::new(sizes, f64::from_le_bytes(f))?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let count = n * grid.len();
        let mut next = || -> Result<f64> {
            r.read_exact(&mut f)?;
            Ok(f64::from_le_bytes(f))
        };
        match flag[0] {
            0 => {
                let d = (0..count).map(|_| next()).collect::<Result<Vec<_>>>()?;
                Self::from_physical(&grid, n, d)
            }
            1 => {
                let d = (0..count).map(|_| Ok(Complex64::new(next()?, next()?))).collect::<Result<Vec<_>>>()?;
                Self::from_spectral(&grid, n, d)
            }
            other => Err(Error::Format(format!("unknown representation flag {other}"))),
        }
    }

    /// Slice along the first axis through the centre of the others, as CSV
    /// with columns `x,u0,u1,...`.
    pub fn slice_csv(&self) -> String {
        let d = self.physical();
        let len = self.grid.len();
        let stride: usize = self.grid.sizes[1..].iter().product();
        let centre: usize = (1..self.grid.dim())
            .map(|a| (self.grid.sizes[a] / 2) * self.grid.sizes[a + 1..].iter().product::<usize>())
            .sum();
        let mut out = String::from("x");
        for c in 0..self.n {
            out.push_str(&format!(",u{c}"));
        }
        out.push('\n');
        for i in 0..self.grid.sizes[0] {
            let idx = i * stride + centre;
            out.push_str(&format!("{:.17e}", self.grid.coordinate(0, i)));
            for c in 0..self.n {
                out.push_str(&format!(",{:.17e}", d[c * len + idx]));
            }
            out.push('\n');
        }
        out
    }
}
