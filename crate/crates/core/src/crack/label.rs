//! Binary ground-truth images of a crack.
//!
//! Pixels are stored row-major with row 0 at the top edge of the plate
//! (`y = height`) and column 0 at the left edge (`x = 0`).
//!
//! The text form is a plain PBM (`P1`) whose comment line carries the
//! metadata:
//!
//! ```text
//! P1
//! # resolution=100x100 pixel_pitch=0.0001,0.0001
//! 100 100
//! 0000...   one line of digits per row
//! ```

use serde::{Deserialize, Serialize};

use super::CrackSegment;
use crate::error::{Error, Result};
use crate::lattice::PlateSpec;

pub const FINE_RESOLUTION: usize = 100;
pub const COARSE_RESOLUTION: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    /// Physical pixel size `(x, y)` in metres.
    pub pixel_pitch: [f64; 2],
    /// One byte per pixel, 0 or 1.
    pub bits: Vec<u8>,
}

impl LabelImage {
    pub fn empty(width: usize, height: usize, pixel_pitch: [f64; 2]) -> Self {
        LabelImage {
            width,
            height,
            pixel_pitch,
            bits: vec![0; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col] != 0
    }

    pub fn set(&mut self, row: usize, col: usize) {
        self.bits[row * self.width + col] = 1;
    }

    pub fn lit_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.lit_count() == 0
    }

    pub fn lit_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(move |(i, _)| (i / w, i % w))
    }

    pub fn to_pbm(&self) -> String {
        let mut s = format!(
            "P1\n# resolution={}x{} pixel_pitch={},{}\n{} {}\n",
            self.width, self.height, self.pixel_pitch[0], self.pixel_pitch[1], self.width, self.height
        );
        for row in self.bits.chunks(self.width) {
            s.extend(row.iter().map(|&b| if b != 0 { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }

    pub fn from_pbm(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            what: "label image",
            reason: reason.to_string(),
        };
        let mut pitch = None;
        let mut tokens = Vec::new();
        for line in text.lines() {
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                if let Some(p) = comment.split_whitespace().find_map(|kv| kv.strip_prefix("pixel_pitch=")) {
                    let parts: Vec<f64> = p.split(',').filter_map(|v| v.parse().ok()).collect();
                    if parts.len() != 2 {
                        return Err(bad("malformed pixel_pitch"));
                    }
                    pitch = Some([parts[0], parts[1]]);
                }
                continue;
            }
            tokens.extend(line.split_whitespace());
        }
        let mut it = tokens.into_iter();
        if it.next() != Some("P1") {
            return Err(bad("missing P1 magic"));
        }
        let mut dim = || -> Result<usize> {
            it.next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("missing or malformed dimensions"))
        };
        let (width, height) = (dim()?, dim()?);
        let pixel_pitch = pitch.ok_or_else(|| bad("missing pixel_pitch metadata"))?;
        let mut bits = Vec::with_capacity(width * height);
        for tok in it {
            for ch in tok.chars() {
                match ch {
                    '0' => bits.push(0),
                    '1' => bits.push(1),
                    _ => return Err(bad("raster holds a non-binary digit")),
                }
            }
        }
        if bits.len() != width * height {
            return Err(bad(&format!("expected {} pixels, found {}", width * height, bits.len())));
        }
        Ok(LabelImage {
            width,
            height,
            pixel_pitch,
            bits,
        })
    }

    /// Rows packed MSB-first, each row padded to a whole byte.
    pub fn pack_bits(&self) -> Vec<u8> {
        let stride = self.width.div_ceil(8);
        let mut out = vec![0u8; stride * self.height];
        for (r, c) in self.lit_pixels() {
            out[r * stride + c / 8] |= 0x80 >> (c % 8);
        }
        out
    }

    pub fn unpack_bits(width: usize, height: usize, pixel_pitch: [f64; 2], packed: &[u8]) -> Result<Self> {
        let stride = width.div_ceil(8);
        if packed.len() != stride * height {
            return Err(Error::Format {
                what: "packed label",
                reason: format!("expected {} bytes, found {}", stride * height, packed.len()),
            });
        }
        let mut img = LabelImage::empty(width, height, pixel_pitch);
        for r in 0..height {
            for c in 0..width {
                if packed[r * stride + c / 8] & (0x80 >> (c % 8)) != 0 {
                    img.set(r, c);
                }
            }
        }
        Ok(img)
    }
}

/// Supercover rasterization of a segment on a `resolution x resolution` grid
/// spanning the plate.
///
/// Every pixel whose interior the segment passes through is lit; when the
/// segment crosses a pixel corner exactly, both side neighbours are lit too.
pub fn rasterize_label(seg: Option<&CrackSegment>, plate: &PlateSpec, resolution: usize) -> LabelImage {
    let pitch = [plate.width / resolution as f64, plate.height / resolution as f64];
    let mut img = LabelImage::empty(resolution, resolution, pitch);
    let Some(seg) = seg else {
        return img;
    };
    // grid coordinates: u to the right, v downward from the top edge
    let to_grid = |p: [f64; 2]| [p[0] / pitch[0], (plate.height - p[1]) / pitch[1]];
    let (p0, p1) = (to_grid(seg.a), to_grid(seg.b));
    let last = resolution as i64 - 1;
    let cell = |x: f64| (x.floor() as i64).clamp(0, last);
    let mut light = |i: i64, j: i64| {
        if (0..=last).contains(&i) && (0..=last).contains(&j) {
            img.set(j as usize, i as usize);
        }
    };
    let (mut i, mut j) = (cell(p0[0]), cell(p0[1]));
    light(i, j);
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    let axis = |start: f64, idx: i64, delta: f64| -> (i64, f64, f64) {
        if delta > 0.0 {
            (1, ((idx + 1) as f64 - start) / delta, 1.0 / delta)
        } else if delta < 0.0 {
            (-1, (start - idx as f64) / -delta, -1.0 / delta)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (si, mut ti, dti) = axis(p0[0], i, d[0]);
    let (sj, mut tj, dtj) = axis(p0[1], j, d[1]);
    const CORNER_EPS: f64 = 1e-12;
    let budget = (2 * resolution + 4) as i64;
    for _ in 0..budget {
        let t = ti.min(tj);
        if t >= 1.0 {
            break;
        }
        if (ti - tj).abs() <= CORNER_EPS {
            light(i + si, j);
            light(i, j + sj);
            i += si;
            j += sj;
            ti += dti;
            tj += dtj;
        } else if ti < tj {
            i += si;
            ti += dti;
        } else {
            j += sj;
            tj += dtj;
        }
        light(i, j);
    }
    img
}

/// Output pixels overlapped by each source pixel, as `(row, col)` index ranges.
///
/// Works in integer units of `1 / (src·dst)` of the plate side, so overlaps
/// are exact for any pair of resolutions.
pub fn cell_map(src: usize, dst: usize, index: usize) -> std::ops::RangeInclusive<usize> {
    let lo = index * dst;
    let hi = (index + 1) * dst;
    (lo / src)..=((hi - 1) / src)
}

fn overlap(src: usize, dst: usize, s: usize, d: usize) -> usize {
    let (a0, a1) = (s * dst, (s + 1) * dst);
    let (b0, b1) = (d * src, (d + 1) * src);
    a1.min(b1).saturating_sub(a0.max(b0))
}

/// Fraction of each `dst x dst` output pixel covered by lit source pixels.
pub fn coverage(image: &LabelImage, dst: usize) -> Vec<f64> {
    assert_eq!(image.width, image.height, "labels are square");
    let src = image.width;
    let mut acc = vec![0usize; dst * dst];
    for (r, c) in image.lit_pixels() {
        for dr in cell_map(src, dst, r) {
            let oy = overlap(src, dst, r, dr);
            for dc in cell_map(src, dst, c) {
                acc[dr * dst + dc] += oy * overlap(src, dst, c, dc);
            }
        }
    }
    let area = (src * src) as f64;
    acc.into_iter().map(|a| a as f64 / area).collect()
}

/// Area-weighted reduction to `dst x dst`; a pixel is lit when any of its
/// area is covered.
pub fn downsample_label(image: &LabelImage, dst: usize) -> LabelImage {
    let scale = [
        image.pixel_pitch[0] * image.width as f64 / dst as f64,
        image.pixel_pitch[1] * image.height as f64 / dst as f64,
    ];
    let mut out = LabelImage::empty(dst, dst, scale);
    for (k, f) in coverage(image, dst).into_iter().enumerate() {
        if f > 0.0 {
            out.bits[k] = 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plate() -> PlateSpec {
        PlateSpec::dataset_default()
    }

    fn seg(a: [f64; 2], b: [f64; 2]) -> CrackSegment {
        CrackSegment { a, b }
    }

    #[test]
    fn no_crack_is_blank() {
        assert!(rasterize_label(None, &plate(), 100).is_empty());
    }

    #[test]
    fn horizontal_span_of_five_pixels() {
        let img = rasterize_label(Some(&seg([0.00105, 0.00555], [0.00155, 0.00555])), &plate(), 100);
        let n = img.lit_count();
        assert!(n == 5 || n == 6, "lit {n}");
        let rows: std::collections::BTreeSet<_> = img.lit_pixels().map(|(r, _)| r).collect();
        assert_eq!(rows.len(), 1);
        // y = 0.00555 is 44.5 pixels below the top edge
        assert_eq!(*rows.iter().next().unwrap(), 44);
    }

    #[test]
    fn grid_aligned_span_lights_exactly_five() {
        let img = rasterize_label(Some(&seg([0.001, 0.00505], [0.0015, 0.00505])), &plate(), 100);
        assert!((5..=6).contains(&img.lit_count()));
    }

    #[test]
    fn diagonal_lights_rows_and_columns_evenly() {
        let img = rasterize_label(Some(&seg([0.00203, 0.00211], [0.00703, 0.00711])), &plate(), 100);
        let mut rows = [0usize; 100];
        let mut cols = [0usize; 100];
        for (r, c) in img.lit_pixels() {
            rows[r] += 1;
            cols[c] += 1;
        }
        let r: Vec<_> = rows.iter().copied().filter(|&x| x > 0).collect();
        let c: Vec<_> = cols.iter().copied().filter(|&x| x > 0).collect();
        let (rmin, rmax) = (r.iter().min().unwrap(), r.iter().max().unwrap());
        let (cmin, cmax) = (c.iter().min().unwrap(), c.iter().max().unwrap());
        assert!(rmax - rmin <= 1 && cmax - cmin <= 1);
        assert!((r.len() as i64 - c.len() as i64).abs() <= 1);
    }

    #[test]
    fn exact_corner_crossing_is_supercover() {
        // passes through grid corners: both side neighbours are lit
        let img = rasterize_label(Some(&seg([0.0020, 0.0080], [0.0040, 0.0060])), &plate(), 100);
        assert!(img.lit_count() >= 20);
    }

    #[test]
    fn segment_on_right_edge_stays_in_bounds() {
        let img = rasterize_label(Some(&seg([0.009, 0.005], [0.01, 0.005])), &plate(), 100);
        assert!(img.lit_pixels().all(|(_, c)| c >= 89));
        assert!(img.get(50, 99) || img.get(49, 99));
    }

    #[test]
    fn downsample_trivial_cases() {
        let zero = LabelImage::empty(100, 100, [1e-4, 1e-4]);
        assert!(downsample_label(&zero, 16).is_empty());
        let mut one = zero.clone();
        one.bits.iter_mut().for_each(|b| *b = 1);
        let d = downsample_label(&one, 16);
        assert_eq!(d.lit_count(), 256);
        assert!(coverage(&one, 16).iter().all(|&f| (f - 1.0).abs() < 1e-12));
        assert!((d.pixel_pitch[0] - 0.01 / 16.0).abs() < 1e-18);
    }

    #[test]
    fn single_corner_pixel_maps_to_corner() {
        let mut img = LabelImage::empty(100, 100, [1e-4, 1e-4]);
        img.set(0, 0);
        let d = downsample_label(&img, 16);
        assert_eq!(d.lit_count(), 1);
        assert!(d.get(0, 0));
    }

    #[test]
    fn straddling_pixel_hits_two_cells() {
        // source pixel 6 spans [96, 112] in units of 1/1600, crossing 100
        assert_eq!(cell_map(100, 16, 6), 0..=1);
        assert_eq!(cell_map(100, 16, 5), 0..=0);
        assert_eq!(cell_map(100, 16, 99), 15..=15);
    }

    #[test]
    fn pbm_round_trip() {
        let img = rasterize_label(Some(&seg([0.001, 0.002], [0.008, 0.007])), &plate(), 100);
        let text = img.to_pbm();
        assert!(text.starts_with("P1\n# resolution=100x100 pixel_pitch="));
        assert_eq!(LabelImage::from_pbm(&text).unwrap(), img);
        assert!(LabelImage::from_pbm("P1\n2 2\n0101\n").is_err());
        assert!(LabelImage::from_pbm("P1\n# pixel_pitch=1,1\n2 2\n010\n").is_err());
    }

    #[test]
    fn packed_round_trip() {
        let img = rasterize_label(Some(&seg([0.0001, 0.0099], [0.0099, 0.0001])), &plate(), 100);
        let packed = img.pack_bits();
        assert_eq!(packed.len(), 13 * 100);
        assert_eq!(LabelImage::unpack_bits(100, 100, img.pixel_pitch, &packed).unwrap(), img);
    }
}
