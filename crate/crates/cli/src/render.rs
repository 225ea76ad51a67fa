//! Grayscale images of wave fields and prediction grids.

use std::path::Path;

use crackwave::lattice::LatticeModel;
use crackwave::{Error, Result};
use image::{GrayImage, Luma};

/// Pixel-to-particle lookup for a plate, row 0 at the top edge.
///
/// Pixels whose nearest particle was removed by a crack have no owner and
/// render black.
#[derive(Debug, Clone)]
pub struct PixelMap {
    pub width: u32,
    pub height: u32,
    owner: Vec<Option<usize>>,
}

impl PixelMap {
    pub fn new(model: &LatticeModel, width: u32, height: u32) -> Self {
        let (pw, ph) = (model.spec.width, model.spec.height);
        // Uniform buckets about one particle each.
        let nb = (model.particles.len() as f64).sqrt().ceil().max(1.0) as usize;
        let (bw, bh) = (pw / nb as f64, ph / nb as f64);
        let bucket_of = |x: f64, y: f64| {
            let i = ((x / bw) as usize).min(nb - 1);
            let j = ((y / bh) as usize).min(nb - 1);
            (i, j)
        };
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nb * nb];
        for p in &model.particles {
            let (i, j) = bucket_of(p.position[0], p.position[1]);
            buckets[j * nb + i].push(p.id);
        }
        let mut owner = Vec::with_capacity((width * height) as usize);
        for py in 0..height {
            for px in 0..width {
                let x = (px as f64 + 0.5) / width as f64 * pw;
                let y = ph - (py as f64 + 0.5) / height as f64 * ph;
                let (ci, cj) = bucket_of(x, y);
                let mut best = (f64::INFINITY, usize::MAX);
                for ring in 0..nb {
                    // Everything beyond this ring is at least `ring` buckets away.
                    if best.0.sqrt() < ring.saturating_sub(1) as f64 * bw.min(bh) {
                        break;
                    }
                    let (i0, i1) = (ci.saturating_sub(ring), (ci + ring).min(nb - 1));
                    let (j0, j1) = (cj.saturating_sub(ring), (cj + ring).min(nb - 1));
                    for j in j0..=j1 {
                        for i in i0..=i1 {
                            if i.abs_diff(ci) != ring && j.abs_diff(cj) != ring {
                                continue;
                            }
                            for &id in &buckets[j * nb + i] {
                                let q = model.particles[id].position;
                                let d = (q[0] - x).powi(2) + (q[1] - y).powi(2);
                                if d < best.0 || (d == best.0 && id < best.1) {
                                    best = (d, id);
                                }
                            }
                        }
                    }
                }
                owner.push((best.1 != usize::MAX && !model.particles[best.1].removed).then_some(best.1));
            }
        }
        PixelMap { width, height, owner }
    }

    pub fn owner(&self, px: u32, py: u32) -> Option<usize> {
        self.owner[(py * self.width + px) as usize]
    }
}

/// Displacement magnitude, scaled so the largest value in the frame is white.
pub fn frame_image(map: &PixelMap, displacement: &[[f64; 2]]) -> GrayImage {
    let mag = |id: usize| displacement[id][0].hypot(displacement[id][1]);
    let peak = map.owner.iter().flatten().map(|&id| mag(id)).fold(0.0, f64::max);
    GrayImage::from_fn(map.width, map.height, |px, py| match map.owner(px, py) {
        Some(id) if peak > 0.0 => Luma([(255.0 * mag(id) / peak).round() as u8]),
        _ => Luma([0]),
    })
}

/// Tiles `rows x cols` grids of values in `[0, 1]` left to right, top to
/// bottom, `columns` per line, each cell `scale` pixels wide with a
/// `gap`-pixel mid-gray border.
pub fn mosaic(grids: &[&[f64]], rows: usize, cols: usize, columns: usize, scale: u32, gap: u32) -> GrayImage {
    let columns = columns.max(1);
    let lines = grids.len().div_ceil(columns).max(1);
    let tile_w = cols as u32 * scale + gap;
    let tile_h = rows as u32 * scale + gap;
    let mut img = GrayImage::from_pixel(columns as u32 * tile_w + gap, lines as u32 * tile_h + gap, Luma([128]));
    for (k, grid) in grids.iter().enumerate() {
        let ox = gap + (k % columns) as u32 * tile_w;
        let oy = gap + (k / columns) as u32 * tile_h;
        for r in 0..rows {
            for c in 0..cols {
                let v = (255.0 * grid[r * cols + c].clamp(0.0, 1.0)).round() as u8;
                for dy in 0..scale {
                    for dx in 0..scale {
                        img.put_pixel(ox + c as u32 * scale + dx, oy + r as u32 * scale + dy, Luma([v]));
                    }
                }
            }
        }
    }
    img
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })
}
