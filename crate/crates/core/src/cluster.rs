//! Flat-kernel mean-shift over SAE pixels and selection of the cluster
//! under inspection.
//!
//! Every point seeds its own trajectory. Disc queries are answered from
//! per-row prefix sums over the bounding box of the points, so one query
//! costs `O(β)` rows regardless of density, and trajectories that reach an
//! already seen point set stop there. All arithmetic is done in
//! coordinates relative to the bounding box corner, which makes the result
//! bit-identical under integer translation of the input.

use std::collections::HashMap;

use thiserror::Error;

use crate::motion::SaePoints;
use crate::types::CameraModel;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("no points to cluster")]
    EmptyInput,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
}

/// Wide enough that both rings of one countersink, whose sides tangent to the
/// sweep direction emit no events, still fall in a single cluster.
pub const DEFAULT_BANDWIDTH_PX: f64 = 60.0;
const SHIFT_TOL: f64 = 1e-3;
const MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: usize,
    /// Mean of the members.
    pub centroid: (f64, f64),
    /// Members in row-major order.
    pub members: Vec<(u16, u16)>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn points_f64(&self) -> Vec<(f64, f64)> {
        self.members
            .iter()
            .map(|&(x, y)| (x as f64, y as f64))
            .collect()
    }
}

/// Disc queries over the unique points. Compact point sets get dense
/// per-row prefix sums over their bounding box; sparse ones keep the points
/// sorted by (y, x) and binary-search each row.
enum RowIndex {
    Dense {
        width: usize,
        height: usize,
        /// Per-row running (count, x sum), one leading zero per row.
        prefix: Vec<[u32; 2]>,
    },
    Sparse {
        height: usize,
        xs: Vec<u32>,
        row_start: Vec<usize>,
        cum_x: Vec<u64>,
    },
}

/// Bounding-box cells per point above which the sparse layout is used.
const DENSE_CELLS_PER_POINT: usize = 64;

impl RowIndex {
    /// `local` must be sorted by (y, x) and lie in `width × height`.
    fn new(local: &[(usize, usize)], width: usize, height: usize) -> Self {
        // dense x sums must fit in u32
        let fits = (width as u64).pow(2) < u32::MAX as u64;
        if fits && width * height <= DENSE_CELLS_PER_POINT * local.len().max(1) {
            Self::dense(local, width, height)
        } else {
            Self::sparse(local, height)
        }
    }

    fn dense(local: &[(usize, usize)], width: usize, height: usize) -> Self {
        let stride = width + 1;
        let mut prefix = vec![[0u32; 2]; stride * height];
        for &(x, y) in local {
            prefix[y * stride + x + 1] = [1, x as u32];
        }
        for row in prefix.chunks_exact_mut(stride) {
            for x in 1..stride {
                row[x][0] += row[x - 1][0];
                row[x][1] += row[x - 1][1];
            }
        }
        Self::Dense {
            width,
            height,
            prefix,
        }
    }

    fn sparse(local: &[(usize, usize)], height: usize) -> Self {
        let mut row_start = vec![0usize; height + 1];
        for &(_, y) in local {
            row_start[y + 1] += 1;
        }
        for y in 0..height {
            row_start[y + 1] += row_start[y];
        }
        let xs: Vec<u32> = local.iter().map(|&(x, _)| x as u32).collect();
        let mut cum_x = Vec::with_capacity(xs.len() + 1);
        cum_x.push(0u64);
        for &x in &xs {
            cum_x.push(cum_x.last().unwrap() + x as u64);
        }
        Self::Sparse {
            height,
            xs,
            row_start,
            cum_x,
        }
    }

    fn height(&self) -> usize {
        match self {
            Self::Dense { height, .. } | Self::Sparse { height, .. } => *height,
        }
    }

    /// Count and x sum of the points on row `y` with `x0 <= x <= x1`.
    #[inline(always)]
    fn span(&self, y: usize, x0: i64, x1: i64) -> (u64, u64) {
        match self {
            Self::Dense { width, prefix, .. } => {
                let (x0, x1) = (x0.max(0), x1.min(*width as i64 - 1));
                if x1 < x0 {
                    return (0, 0);
                }
                let row = y * (width + 1);
                let (a, b) = (prefix[row + x0 as usize], prefix[row + x1 as usize + 1]);
                ((b[0] - a[0]) as u64, (b[1] - a[1]) as u64)
            }
            Self::Sparse {
                xs,
                row_start,
                cum_x,
                ..
            } => {
                let (lo, hi) = (row_start[y], row_start[y + 1]);
                if lo == hi {
                    return (0, 0);
                }
                let row = &xs[lo..hi];
                let a = lo + row.partition_point(|&x| (x as i64) < x0);
                let b = lo + row.partition_point(|&x| (x as i64) <= x1);
                ((b - a) as u64, cum_x[b] - cum_x[a])
            }
        }
    }

    /// Number of points and their coordinate sums inside the closed disc.
    fn disc(&self, cx: f64, cy: f64, radius: f64) -> (u64, u64, u64) {
        let y0 = ceil_i(cy - radius).max(0);
        let y1 = floor_i(cy + radius).min(self.height() as i64 - 1);
        let (mut n, mut sx, mut sy) = (0u64, 0u64, 0u64);
        for yi in y0..=y1 {
            let dy = yi as f64 - cy;
            let half = (radius * radius - dy * dy).max(0.0).sqrt();
            let x0 = ceil_i(cx - half);
            let x1 = floor_i(cx + half);
            if x1 >= x0 {
                let (c, s) = self.span(yi as usize, x0, x1);
                n += c;
                sx += s;
                sy += c * yi as u64;
            }
        }
        (n, sx, sy)
    }

    /// `disc` for a center on a pixel, using precomputed row extents.
    fn disc_at(&self, x: i64, y: i64, stencil: &Stencil) -> (u64, u64, u64) {
        let y0 = (y + stencil.dy0).max(0);
        let y1 = (y + stencil.dy1).min(self.height() as i64 - 1);
        let (mut n, mut sx, mut sy) = (0u64, 0u64, 0u64);
        for yi in y0..=y1 {
            let [l, r] = stencil.dx[(yi - y - stencil.dy0) as usize];
            let (c, s) = self.span(yi as usize, x + l, x + r);
            n += c;
            sx += s;
            sy += c * yi as u64;
        }
        (n, sx, sy)
    }
}

/// Row extents of the closed disc around a pixel center, derived with the
/// same arithmetic as `RowIndex::disc`.
struct Stencil {
    dy0: i64,
    dy1: i64,
    dx: Vec<[i64; 2]>,
}

impl Stencil {
    fn new(radius: f64) -> Self {
        let dy0 = ceil_i(-radius);
        let dy1 = floor_i(radius);
        let dx = (dy0..=dy1)
            .map(|dy| {
                let dy = dy as f64;
                let half = (radius * radius - dy * dy).max(0.0).sqrt();
                [ceil_i(-half), floor_i(half)]
            })
            .collect();
        Self { dy0, dy1, dx }
    }
}

// `f64::ceil` and `floor` are library calls on baseline x86-64; these are
// exact for the pixel-scale magnitudes used here.
#[inline(always)]
fn ceil_i(v: f64) -> i64 {
    let t = v as i64;
    if (t as f64) < v {
        t + 1
    } else {
        t
    }
}

#[inline(always)]
fn floor_i(v: f64) -> i64 {
    let t = v as i64;
    if (t as f64) > v {
        t - 1
    } else {
        t
    }
}

/// Integer sums of the points under the kernel. A trajectory that has moved
/// to the mean of such a set continues identically regardless of how it
/// got there.
type DiscKey = (u64, u64, u64);

/// Runs one trajectory to its mode, reusing the outcome of any earlier
/// trajectory that moved to the same mean.
fn converge(
    index: &RowIndex,
    start: (usize, usize),
    bandwidth: f64,
    stencil: &Stencil,
    memo: &mut HashMap<DiscKey, (f64, f64)>,
    path: &mut Vec<DiscKey>,
) -> (f64, f64) {
    path.clear();
    let mut p = (start.0 as f64, start.1 as f64);
    let mut mode = None;
    for it in 0..MAX_ITERS {
        let (n, sx, sy) = if it == 0 {
            index.disc_at(start.0 as i64, start.1 as i64, stencil)
        } else {
            index.disc(p.0, p.1, bandwidth)
        };
        if n == 0 {
            break;
        }
        let next = (sx as f64 / n as f64, sy as f64 / n as f64);
        let shift = (next.0 - p.0).hypot(next.1 - p.1);
        p = next;
        if shift < SHIFT_TOL {
            break;
        }
        let key = (n, sx, sy);
        if let Some(&m) = memo.get(&key) {
            mode = Some(m);
            break;
        }
        path.push(key);
    }
    let mode = mode.unwrap_or(p);
    for key in path.drain(..) {
        memo.insert(key, mode);
    }
    mode
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Groups modes whose pairwise distance is below `radius`, chaining
/// transitively. Returns a group label per mode.
fn merge_modes(modes: &[(f64, f64)], radius: f64) -> Vec<usize> {
    // most trajectories end on bit-identical modes; merge distinct ones only,
    // each represented by its first point
    let mut first: HashMap<(u64, u64), usize> = HashMap::new();
    let mut uniq: Vec<usize> = Vec::new();
    let slot: Vec<usize> = modes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            *first
                .entry((m.0.to_bits(), m.1.to_bits()))
                .or_insert_with(|| {
                    uniq.push(i);
                    uniq.len() - 1
                })
        })
        .collect();

    let n = uniq.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let cell = radius.max(1e-9);
    let key = |p: (f64, f64)| ((p.0 / cell).floor() as i64, (p.1 / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (u, &i) in uniq.iter().enumerate() {
        grid.entry(key(modes[i])).or_default().push(u);
    }
    let r2 = radius * radius;
    for (u, &i) in uniq.iter().enumerate() {
        let m = modes[i];
        let (kx, ky) = key(m);
        for gx in kx - 1..=kx + 1 {
            for gy in ky - 1..=ky + 1 {
                let Some(cell) = grid.get(&(gx, gy)) else {
                    continue;
                };
                for &v in cell {
                    if v <= u {
                        continue;
                    }
                    let o = modes[uniq[v]];
                    if (o.0 - m.0).powi(2) + (o.1 - m.1).powi(2) < r2 {
                        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    // representatives are increasing in point index, so the smallest slot in
    // a component is its first point
    slot.iter().map(|&u| uniq[find(&mut parent, u)]).collect()
}

/// Flat-kernel mean-shift. Clusters are numbered in order of their first
/// member in row-major order.
pub fn mean_shift(points: &SaePoints, bandwidth: f64) -> Result<Vec<Cluster>, ClusterError> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(ClusterError::InvalidBandwidth(bandwidth));
    }
    if points.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    let mut pts = points.points.clone();
    pts.sort_unstable_by_key(|&(x, y)| (y, x));
    pts.dedup();

    let min_x = pts.iter().map(|p| p.0).min().unwrap_or(0) as usize;
    let min_y = pts.iter().map(|p| p.1).min().unwrap_or(0) as usize;
    let max_x = pts.iter().map(|p| p.0).max().unwrap_or(0) as usize;
    let max_y = pts.iter().map(|p| p.1).max().unwrap_or(0) as usize;
    let local: Vec<(usize, usize)> = pts
        .iter()
        .map(|&(x, y)| (x as usize - min_x, y as usize - min_y))
        .collect();
    let index = RowIndex::new(&local, max_x - min_x + 1, max_y - min_y + 1);

    let stencil = Stencil::new(bandwidth);
    let mut memo = HashMap::new();
    let mut path = Vec::new();
    let modes: Vec<(f64, f64)> = local
        .iter()
        .map(|&p| converge(&index, p, bandwidth, &stencil, &mut memo, &mut path))
        .collect();
    let labels = merge_modes(&modes, bandwidth / 2.0);

    // labels are union-find roots, which are the smallest member index, so
    // ordering by root is ordering by first member
    let mut roots: Vec<usize> = labels.clone();
    roots.sort_unstable();
    roots.dedup();
    let mut clusters: Vec<Cluster> = roots
        .iter()
        .enumerate()
        .map(|(id, _)| Cluster {
            id,
            centroid: (0.0, 0.0),
            members: Vec::new(),
        })
        .collect();
    let mut sums = vec![(0u64, 0u64); roots.len()];
    for (i, &p) in pts.iter().enumerate() {
        let id = roots.binary_search(&labels[i]).expect("label is a root");
        clusters[id].members.push(p);
        sums[id].0 += local[i].0 as u64;
        sums[id].1 += local[i].1 as u64;
    }
    for (c, (sx, sy)) in clusters.iter_mut().zip(sums) {
        let n = c.members.len() as f64;
        c.centroid = (sx as f64 / n + min_x as f64, sy as f64 / n + min_y as f64);
    }
    Ok(clusters)
}

fn pp_distance(c: &Cluster, cam: &CameraModel) -> f64 {
    let (u0, v0) = cam.principal_point();
    (c.centroid.0 - u0).hypot(c.centroid.1 - v0)
}

/// Cluster whose centroid is closest to the principal point; ties go to the
/// lower id.
pub fn select_inspection_cluster<'a>(
    clusters: &'a [Cluster],
    cam: &CameraModel,
) -> Result<&'a Cluster, ClusterError> {
    clusters
        .iter()
        .min_by(|a, b| {
            pp_distance(a, cam)
                .total_cmp(&pp_distance(b, cam))
                .then(a.id.cmp(&b.id))
        })
        .ok_or(ClusterError::EmptyInput)
}

/// All clusters with centroid within `radius_px` of the principal point,
/// nearest first.
pub fn select_within_radius<'a>(
    clusters: &'a [Cluster],
    cam: &CameraModel,
    radius_px: f64,
) -> Vec<&'a Cluster> {
    let mut out: Vec<&Cluster> = clusters
        .iter()
        .filter(|c| pp_distance(c, cam) <= radius_px)
        .collect();
    out.sort_by(|a, b| {
        pp_distance(a, cam)
            .total_cmp(&pp_distance(b, cam))
            .then(a.id.cmp(&b.id))
    });
    out
}
