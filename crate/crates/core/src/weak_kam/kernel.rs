use std::io::{self, Read, Write};

use rayon::prelude::*;

use super::action::{ActionContext, ActionOptions, ActionResult};
use super::grid::node_coords;
use super::WeakKamError;
use crate::dynamics::TonelliSystem;

pub const KERNEL_MAGIC: &[u8; 8] = b"GBKERNEL";
pub const MAX_NODES_1D: usize = 2048;
pub const MAX_NODES_2D: usize = 64;

/// `K[i][j] = A^{t_step}(x_i, x_j)` over all grid nodes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionKernel {
    pub n: usize,
    pub resolution: usize,
    pub t_step: f64,
    pub segments: usize,
    pub winding: i32,
    values: Vec<f64>,
}

impl ActionKernel {
    pub fn from_values(n: usize, resolution: usize, t_step: f64, values: Vec<f64>) -> Result<Self, WeakKamError> {
        let nodes = resolution.pow(n as u32);
        if values.len() != nodes * nodes {
            return Err(WeakKamError::ResolutionMismatch { kernel: values.len(), grid: nodes * nodes });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(WeakKamError::InvalidArgument("kernel entries must be finite".into()));
        }
        Ok(Self { n, resolution, t_step, segments: 0, winding: 0, values })
    }

    pub fn nodes(&self) -> usize {
        self.resolution.pow(self.n as u32)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nodes() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.nodes();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Magic `GBKERNEL`, `u32` n, `u32` resolution, `f64` t_step, then the
    /// entries row-major as `f64`; all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(KERNEL_MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.resolution as u32).to_le_bytes())?;
        w.write_all(&self.t_step.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != KERNEL_MAGIC {
            return Err(bad("bad kernel magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let resolution = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let t_step = f64::from_le_bytes(b8);
        if !(1..=2).contains(&n) {
            return Err(bad("kernel dimension must be 1 or 2"));
        }
        let nodes = resolution.pow(n as u32);
        let mut values = Vec::with_capacity(nodes * nodes);
        for _ in 0..nodes * nodes {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Self::from_values(n, resolution, t_step, values).map_err(|e| bad(&e.to_string()))
    }
}

fn build_row(ctx: &ActionContext, n: usize, resolution: usize, i: usize) -> Result<Vec<f64>, WeakKamError> {
    let nodes = resolution.pow(n as u32);
    let x = node_coords(n, resolution, i);
    let mut row = Vec::with_capacity(nodes);
    let mut warm: Option<ActionResult> = None;
    for j in 0..nodes {
        let y = node_coords(n, resolution, j);
        let r = ctx.evaluate_warm(x.as_slice(), y.as_slice(), warm.as_ref())?;
        row.push(r.value);
        warm = Some(r);
    }
    Ok(row)
}

/// Rows are independent and built in parallel; each row is sequential with
/// warm starts, so the result does not depend on the worker count.
pub fn build_kernel(sys: &TonelliSystem, resolution: usize, t_step: f64, opts: ActionOptions) -> Result<ActionKernel, WeakKamError> {
    let n = sys.dim();
    let limit = if n == 1 { MAX_NODES_1D } else { MAX_NODES_2D };
    if resolution > limit {
        return Err(WeakKamError::InvalidArgument(format!("resolution {resolution} exceeds the kernel budget {limit} for n = {n}")));
    }
    if resolution < super::grid::MIN_RESOLUTION {
        return Err(WeakKamError::InvalidArgument(format!("resolution {resolution} below {}", super::grid::MIN_RESOLUTION)));
    }
    let ctx = ActionContext::new(sys, t_step, opts)?;
    let nodes = resolution.pow(n as u32);
    let rows: Vec<Result<Vec<f64>, WeakKamError>> = (0..nodes).into_par_iter().map(|i| build_row(&ctx, n, resolution, i)).collect();
    let mut values = Vec::with_capacity(nodes * nodes);
    for r in rows {
        values.extend(r?);
    }
    Ok(ActionKernel { n, resolution, t_step, segments: opts.segments, winding: opts.winding, values })
}
