//! SLIC superpixels: k-means over joint CIELAB color and pixel position with a
//! local search window, followed by optional connectivity enforcement.

use alloc::collections::BTreeMap;
use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::types::Image;

/// Per-pixel segment IDs, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMap {
    height: usize,
    width: usize,
    num_segments: usize,
    data: Vec<u32>,
}

impl SuperpixelMap {
    /// The segment count is taken as `max(id) + 1`.
    pub fn new(height: usize, width: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "superpixel map {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        let num_segments = data.iter().max().map_or(0, |&m| m as usize + 1);
        Ok(Self { height, width, num_segments, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u32> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.data[row * self.width + col]
    }

    /// Pixel count of each segment ID.
    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_segments];
        for &id in &self.data {
            sizes[id as usize] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    pub n_segments: usize,
    /// Spatial weight `m`.
    pub compactness: f64,
    pub iterations: usize,
    pub enforce_connectivity: bool,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self { n_segments: 100, compactness: 10.0, iterations: 10, enforce_connectivity: true }
    }
}

impl SlicParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::invalid("n_segments must be >= 1"));
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(Error::invalid(format!("compactness must be > 0, got {}", self.compactness)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        Ok(())
    }
}

/// sRGB (D65) to CIELAB for every pixel; grayscale is replicated to RGB.
pub fn rgb_to_lab(img: &Image) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(img.num_pixels());
    for row in 0..img.height() {
        for col in 0..img.width() {
            out.push(srgb_to_lab(img.rgb(row, col)));
        }
    }
    out
}

const WHITE_D65: [f64; 3] = [0.95047, 1.0, 1.08883];

fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            math::powf((c + 0.055) / 1.055, 2.4)
        }
    });
    let [r, g, b] = lin;
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let f = |t: f64| {
        const DELTA: f64 = 6.0 / 29.0;
        if t > DELTA * DELTA * DELTA {
            math::cbrt(t)
        } else {
            t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
        }
    };
    let (fx, fy, fz) = (f(x / WHITE_D65[0]), f(y / WHITE_D65[1]), f(z / WHITE_D65[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Result of a SLIC run with per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct SlicTrace {
    pub map: SuperpixelMap,
    /// Total assignment cost `sum D^2` after each assignment step.
    pub energies: Vec<f64>,
    /// Grid step `S`.
    pub step: f64,
    /// Number of seeds placed on the grid.
    pub seeds: usize,
}

/// Runs SLIC and returns the final superpixel map.
pub fn slic(img: &Image, params: &SlicParams) -> Result<SuperpixelMap> {
    slic_with_trace(img, params).map(|t| t.map)
}

#[derive(Clone, Copy)]
struct Center {
    lab: [f64; 3],
    y: f64,
    x: f64,
}

/// Runs SLIC and keeps the assignment energy of every iteration.
///
/// A pixel may always keep its current center even when that center has
/// drifted out of the search window; together with the mean update this makes
/// the energy sequence non-increasing.
pub fn slic_with_trace(img: &Image, params: &SlicParams) -> Result<SlicTrace> {
    params.validate()?;
    let (h, w) = (img.height(), img.width());
    let n_pixels = h * w;
    if n_pixels == 0 {
        return Err(Error::invalid("empty image"));
    }
    if params.n_segments > n_pixels {
        return Err(Error::TooManySegments { requested: params.n_segments, pixels: n_pixels });
    }
    let lab = rgb_to_lab(img);
    let step = math::sqrt(n_pixels as f64 / params.n_segments as f64);
    let mut centers = seed_centers(&lab, h, w, params.n_segments);
    let spatial = (params.compactness / step) * (params.compactness / step);

    let dist2 = |c: &Center, idx: usize| {
        let p = &lab[idx];
        let dl = p[0] - c.lab[0];
        let da = p[1] - c.lab[1];
        let db = p[2] - c.lab[2];
        let dy = (idx / w) as f64 - c.y;
        let dx = (idx % w) as f64 - c.x;
        dl * dl + da * da + db * db + (dy * dy + dx * dx) * spatial
    };

    let mut labels = vec![usize::MAX; n_pixels];
    let mut best = vec![f64::INFINITY; n_pixels];
    let mut energies = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        for idx in 0..n_pixels {
            best[idx] = match labels[idx] {
                usize::MAX => f64::INFINITY,
                c => dist2(&centers[c], idx),
            };
        }
        for (ci, c) in centers.iter().enumerate() {
            let r0 = math::ceil_clamped(c.y - step, h);
            let r1 = math::floor_clamped(c.y + step, h);
            let c0 = math::ceil_clamped(c.x - step, w);
            let c1 = math::floor_clamped(c.x + step, w);
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let idx = row * w + col;
                    let d = dist2(c, idx);
                    if d < best[idx] {
                        best[idx] = d;
                        labels[idx] = ci;
                    }
                }
            }
        }
        for idx in 0..n_pixels {
            if labels[idx] == usize::MAX {
                let (ci, d) = centers
                    .iter()
                    .enumerate()
                    .map(|(ci, c)| (ci, dist2(c, idx)))
                    .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
                labels[idx] = ci;
                best[idx] = d;
            }
        }
        energies.push(best.iter().sum());

        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (idx, &ci) in labels.iter().enumerate() {
            let s = &mut sums[ci];
            s[0] += lab[idx][0];
            s[1] += lab[idx][1];
            s[2] += lab[idx][2];
            s[3] += (idx / w) as f64;
            s[4] += (idx % w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                *c = Center { lab: [s[0] / s[5], s[1] / s[5], s[2] / s[5]], y: s[3] / s[5], x: s[4] / s[5] };
            }
        }
    }

    let raw = SuperpixelMap::new(h, w, labels.iter().map(|&l| l as u32).collect())?;
    let map = if params.enforce_connectivity {
        let min_size = math::ceil_usize(step * step / 4.0);
        enforce_connectivity(&raw, min_size)
    } else {
        densify(&raw)
    };
    Ok(SlicTrace { map, energies, step, seeds: centers.len() })
}

/// Grid seeds (cell centers of a `ny x nx` grid with `ny * nx ~ n`), each moved
/// to the lowest-gradient pixel of its 3x3 neighborhood when that is strictly
/// lower than the gradient under the seed.
fn seed_centers(lab: &[[f64; 3]], h: usize, w: usize, n: usize) -> Vec<Center> {
    let ny = (math::round(math::sqrt(n as f64 * h as f64 / w as f64)) as usize).clamp(1, h);
    let nx = (math::round(n as f64 / ny as f64) as usize).clamp(1, w);
    let gradient = |r: usize, c: usize| {
        let at = |r: usize, c: usize| &lab[r * w + c];
        let (up, down) = (at(r.saturating_sub(1), c), at((r + 1).min(h - 1), c));
        let (left, right) = (at(r, c.saturating_sub(1)), at(r, (c + 1).min(w - 1)));
        let mut g = 0.0;
        for i in 0..3 {
            let dv = down[i] - up[i];
            let dh = right[i] - left[i];
            g += dv * dv + dh * dh;
        }
        g
    };
    let mut centers = Vec::with_capacity(ny * nx);
    for i in 0..ny {
        for j in 0..nx {
            let mut y = (i as f64 + 0.5) * h as f64 / ny as f64 - 0.5;
            let mut x = (j as f64 + 0.5) * w as f64 / nx as f64 - 0.5;
            let ry = (math::round(y).max(0.0) as usize).min(h - 1);
            let rx = (math::round(x).max(0.0) as usize).min(w - 1);
            let (mut best_r, mut best_c, mut best_g) = (ry, rx, gradient(ry, rx));
            let mut moved = false;
            for r in ry.saturating_sub(1)..=(ry + 1).min(h - 1) {
                for c in rx.saturating_sub(1)..=(rx + 1).min(w - 1) {
                    let g = gradient(r, c);
                    if g < best_g {
                        (best_r, best_c, best_g) = (r, c, g);
                        moved = true;
                    }
                }
            }
            if moved {
                y = best_r as f64;
                x = best_c as f64;
            }
            centers.push(Center { lab: lab[best_r * w + best_c], y, x });
        }
    }
    centers
}

/// Renumbers segment IDs densely in order of first appearance (row-major).
fn densify(sp: &SuperpixelMap) -> SuperpixelMap {
    let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
    let data = sp
        .data()
        .iter()
        .map(|&id| {
            let next = remap.len() as u32;
            *remap.entry(id).or_insert(next)
        })
        .collect();
    SuperpixelMap::new(sp.height(), sp.width(), data).expect("same shape")
}

/// Splits segments into 4-connected components and merges every component
/// smaller than `min_size` into the neighboring component sharing the longest
/// boundary with it (ties to the lowest segment ID). Components are visited in
/// row-major order of their first pixel; IDs are re-densified afterwards.
pub fn enforce_connectivity(sp: &SuperpixelMap, min_size: usize) -> SuperpixelMap {
    let (h, w) = (sp.height(), sp.width());
    let ids = sp.data();
    let n = h * w;
    let mut comp = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut segment_of: Vec<u32> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let c = members.len();
        let seg = ids[start];
        let mut pixels = Vec::new();
        comp[start] = c;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            pixels.push(idx);
            for nb in neighbors4(idx, h, w).into_iter().flatten() {
                if comp[nb] == usize::MAX && ids[nb] == seg {
                    comp[nb] = c;
                    queue.push_back(nb);
                }
            }
        }
        members.push(pixels);
        segment_of.push(seg);
    }

    let mut parent: Vec<usize> = (0..members.len()).collect();
    fn find(parent: &mut [usize], mut c: usize) -> usize {
        while parent[c] != c {
            parent[c] = parent[parent[c]];
            c = parent[c];
        }
        c
    }
    for c in 0..members.len() {
        if members[c].len() >= min_size {
            continue;
        }
        let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
        for &idx in &members[c] {
            for nb in neighbors4(idx, h, w).into_iter().flatten() {
                let r = find(&mut parent, comp[nb]);
                if r != c {
                    *shared.entry(r).or_insert(0) += 1;
                }
            }
        }
        let target = shared
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| (segment_of[*b.0], *b.0).cmp(&(segment_of[*a.0], *a.0))))
            .map(|(&r, _)| r);
        if let Some(r) = target {
            parent[c] = r;
            let moved = core::mem::take(&mut members[c]);
            members[r].extend(moved);
        }
    }

    let roots: Vec<u32> = (0..n).map(|idx| find(&mut parent, comp[idx]) as u32).collect();
    densify(&SuperpixelMap::new(h, w, roots).expect("same shape"))
}

fn neighbors4(idx: usize, h: usize, w: usize) -> [Option<usize>; 4] {
    let (r, c) = (idx / w, idx % w);
    [(r > 0).then(|| idx - w), (r + 1 < h).then(|| idx + w), (c > 0).then(|| idx - 1), (c + 1 < w).then(|| idx + 1)]
}
