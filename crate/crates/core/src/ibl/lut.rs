use crate::brdf::{alpha, geometry_smith};
use crate::error::{ensure, Result};
use crate::map::Map;
use crate::math::{ggx_half_vector, hammersley, DVec3};

/// GGX samples per table cell.
pub const LUT_SAMPLES: u32 = 1024;

/// Split-sum scale and bias `(A, B)` with `R = A f0 + B`.
///
/// Stored on an `N x N` grid of node values: column `i` is
/// `cos = i / (N - 1)` and row `j` is `roughness = j / (N - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrdfLut {
    pub table: Map,
}

impl BrdfLut {
    pub fn size(&self) -> usize {
        self.table.width()
    }

    pub fn from_map(table: Map) -> Result<Self> {
        ensure!(
            table.channels() == 2 && table.width() == table.height() && table.width() >= 2,
            Dimensions,
            "BRDF table must be N x N x 2, got {}x{}x{}",
            table.height(),
            table.width(),
            table.channels()
        );
        Ok(BrdfLut { table })
    }

    /// Bilinear lookup between nodes; inputs clamp to `[0, 1]`.
    pub fn lookup(&self, cos: f64, roughness: f64) -> (f64, f64) {
        let n = self.size();
        let (i0, fx) = cell(cos, n);
        let (j0, fy) = cell(roughness, n);
        let t = |i: usize, j: usize, c: usize| self.table.get(i, j, c);
        let lerp2 = |c: usize| {
            let a = t(i0, j0, c) * (1.0 - fx) + t(i0 + 1, j0, c) * fx;
            let b = t(i0, j0 + 1, c) * (1.0 - fx) + t(i0 + 1, j0 + 1, c) * fx;
            a * (1.0 - fy) + b * fy
        };
        (lerp2(0), lerp2(1))
    }

    /// Values along the roughness axis at a fixed `cos`, interpolated in `cos`.
    pub fn row_at(&self, cos: f64) -> Vec<[f64; 2]> {
        let n = self.size();
        let (i0, fx) = cell(cos, n);
        (0..n)
            .map(|j| {
                let f = |c| self.table.get(i0, j, c) * (1.0 - fx) + self.table.get(i0 + 1, j, c) * fx;
                [f(0), f(1)]
            })
            .collect()
    }
}

/// Segment index and fraction of `t` on an `n`-node grid over `[0, 1]`.
/// The last node belongs to the last segment.
#[inline]
pub(crate) fn cell(t: f64, n: usize) -> (usize, f64) {
    let s = t.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (s.floor() as usize).min(n - 2);
    (i, s - i as f64)
}

/// Smallest `n.v` the table is evaluated at.
const MIN_COS: f64 = 1e-4;

/// Integrates `A` and `B` with GGX-importance-sampled half vectors.
pub fn split_sum_cell(cos: f64, roughness: f64, samples: u32) -> (f64, f64) {
    let nv = cos.max(MIN_COS);
    let v = DVec3::new((1.0 - nv * nv).max(0.0).sqrt(), 0.0, nv);
    let a = alpha(roughness);
    let (mut sa, mut sb) = (0.0, 0.0);
    for k in 0..samples {
        let h = ggx_half_vector(hammersley(k, samples), a);
        let vh = v.dot(h);
        let l = 2.0 * vh * h - v;
        if l.z <= 0.0 || vh <= 0.0 {
            continue;
        }
        let g = geometry_smith(nv, l.z, roughness);
        let g_vis = g * vh / (h.z * nv);
        let fc = (1.0 - vh).powi(5);
        sa += (1.0 - fc) * g_vis;
        sb += fc * g_vis;
    }
    (sa / samples as f64, sb / samples as f64)
}

pub fn compute_brdf_lut(size: usize) -> Result<BrdfLut> {
    ensure!(
        size >= 16,
        Precondition,
        "BRDF table size must be at least 16, got {size}"
    );
    let denom = (size - 1) as f64;
    let table = Map::from_fn(size, size, 2, |i, j, p| {
        let (a, b) = split_sum_cell(i as f64 / denom, j as f64 / denom, LUT_SAMPLES);
        p[0] = a;
        p[1] = b;
    });
    Ok(BrdfLut { table })
}
