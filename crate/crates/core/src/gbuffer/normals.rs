use std::collections::VecDeque;

use crate::map::Map;
use crate::math::DVec3;

use super::CameraIntrinsics;

/// Ring of the 8 neighbors, counter-clockwise in image space.
const RING: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Below this coherence (length of the mean of the eight unit fan normals)
/// the window does not describe a surface.
const MIN_COHERENCE: f64 = 0.25;

const FALLBACK: DVec3 = DVec3::new(0.0, 0.0, -1.0);

#[derive(Debug, Clone)]
pub struct PseudoNormals {
    pub normals: Map,
    /// Set where the 3x3 window was degenerate (collinear or incoherent).
    pub degenerate: Vec<bool>,
}

/// Normals derived from a depth map by fanning cross products over each
/// pixel's 3x3 window of unprojected points.
///
/// Pixels without a fully covered window (image border, mask boundary) take
/// the normal of the nearest pixel that has one. Unmasked pixels get
/// `(0, 0, -1)`.
pub fn pseudo_normal(depth: &Map, mask: &[bool], intr: &CameraIntrinsics) -> PseudoNormals {
    let (w, h) = (depth.width(), depth.height());
    assert_eq!(mask.len(), w * h, "mask size");
    let masked = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask[y as usize * w + x as usize]
    };
    let point = |x: usize, y: usize| intr.pixel_ray(x, y) * depth.get(x, y, 0);

    let mut normals = Map::new(w, h, 3);
    let mut degenerate = vec![false; w * h];
    let mut solved = vec![false; w * h];
    let mut queue = VecDeque::new();

    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let interior = x > 0
                && y > 0
                && x + 1 < w
                && y + 1 < h
                && masked(xi, yi)
                && RING.iter().all(|&(dx, dy)| masked(xi + dx, yi + dy));
            if !interior {
                normals.set3(x, y, FALLBACK);
                continue;
            }
            let center = point(x, y);
            let tangents = RING.map(|(dx, dy)| point((xi + dx) as usize, (yi + dy) as usize) - center);
            let mut sum = DVec3::ZERO;
            for k in 0..8 {
                let c = tangents[k].cross(tangents[(k + 1) % 8]);
                let scale = tangents[k].length() * tangents[(k + 1) % 8].length();
                let len = c.length();
                if len > 1e-12 * scale && len > 0.0 {
                    sum += c / len;
                }
            }
            let coherence = sum.length() / 8.0;
            if coherence < MIN_COHERENCE {
                normals.set3(x, y, FALLBACK);
                degenerate[y * w + x] = true;
                continue;
            }
            let mut n = sum.normalize();
            if n.dot(center) > 0.0 {
                n = -n;
            }
            normals.set3(x, y, n);
            solved[y * w + x] = true;
            queue.push_back((x, y));
        }
    }

    // Multi-source flood fill from solved pixels to the remaining masked ones.
    let mut reached = solved.clone();
    while let Some((x, y)) = queue.pop_front() {
        let n = normals.get3(x, y);
        for &(dx, dy) in &RING {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            let i = ny * w + nx;
            if reached[i] || degenerate[i] {
                continue;
            }
            reached[i] = true;
            if mask[i] {
                normals.set3(nx, ny, n);
            }
            queue.push_back((nx, ny));
        }
    }
    for i in 0..w * h {
        if mask[i] && !reached[i] && !degenerate[i] {
            // No interior pixel anywhere: nothing to copy from.
            degenerate[i] = true;
        }
    }

    PseudoNormals { normals, degenerate }
}
