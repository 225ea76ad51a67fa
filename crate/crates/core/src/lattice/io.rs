//! Binary container for lattice models.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "WLTC"
//! 4       2         version (u16) = 1
//! 6       2         reserved (u16) = 0
//! 8       4         particle count n (u32)
//! 12      4         element count m (u32)
//! 16      40        width, height, youngs_modulus, density, thickness (f64 x5)
//! 56      4         requested particle count (u32)
//! 60      8         seed (u64)
//! 68      8         jitter (f64)
//! 76      16·n      particle positions (x, y: f64)
//! ..      8·n       particle cell areas (f64)
//! ..      1·n       particle flags (u8: bit0 removed, bit1 x fixed, bit2 y fixed)
//! ..      8·m       element endpoints (a, b: u32)
//! ..      24·m      element attributes (length, area, orientation: f64)
//! ..      1·m       element flags (u8: bit0 active)
//! ```

use super::geometry::{self, Cell};
use super::{LatticeElement, LatticeModel, Particle, PlateSpec};
use crate::error::{Error, Result};
use crate::lattice::CsrMatrix;

pub const MAGIC: &[u8; 4] = b"WLTC";
pub const VERSION: u16 = 1;

pub fn encode(model: &LatticeModel) -> Vec<u8> {
    let n = model.particles.len();
    let m = model.elements.len();
    let mut out = Vec::with_capacity(76 + 33 * n + 33 * m);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    let s = &model.spec;
    for v in [s.width, s.height, s.youngs_modulus, s.density, s.thickness] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(s.n_particles as u32).to_le_bytes());
    out.extend_from_slice(&s.seed.to_le_bytes());
    out.extend_from_slice(&s.jitter.to_le_bytes());
    for p in &model.particles {
        out.extend_from_slice(&p.position[0].to_le_bytes());
        out.extend_from_slice(&p.position[1].to_le_bytes());
    }
    for p in &model.particles {
        out.extend_from_slice(&p.cell_area.to_le_bytes());
    }
    for p in &model.particles {
        let flags = u8::from(p.removed) | u8::from(model.fixed[2 * p.id]) << 1 | u8::from(model.fixed[2 * p.id + 1]) << 2;
        out.push(flags);
    }
    for e in &model.elements {
        out.extend_from_slice(&(e.node_a as u32).to_le_bytes());
        out.extend_from_slice(&(e.node_b as u32).to_le_bytes());
    }
    for e in &model.elements {
        for v in [e.length, e.area, e.orientation] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for e in &model.elements {
        out.push(u8::from(e.active));
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::Format {
            what: "lattice container",
            reason: format!("truncated at byte {}", self.pos),
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a container and reassembles the global matrices.
pub fn decode(bytes: &[u8]) -> Result<LatticeModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format {
            what: "lattice container",
            reason: "bad magic".into(),
        });
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format {
            what: "lattice container",
            reason: format!("unsupported version {version}"),
        });
    }
    r.u16()?;
    let n = r.u32()? as usize;
    let m = r.u32()? as usize;
    let spec = PlateSpec {
        width: r.f64()?,
        height: r.f64()?,
        youngs_modulus: r.f64()?,
        density: r.f64()?,
        thickness: r.f64()?,
        n_particles: r.u32()? as usize,
        seed: r.u64()?,
        jitter: r.f64()?,
    };
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push([r.f64()?, r.f64()?]);
    }
    let mut areas = Vec::with_capacity(n);
    for _ in 0..n {
        areas.push(r.f64()?);
    }
    let mut fixed = vec![false; 2 * n];
    let mut particles = Vec::with_capacity(n);
    for i in 0..n {
        let flags = r.u8()?;
        fixed[2 * i] = flags & 2 != 0;
        fixed[2 * i + 1] = flags & 4 != 0;
        particles.push(Particle {
            id: i,
            position: positions[i],
            cell_area: areas[i],
            removed: flags & 1 != 0,
        });
    }
    let mut pairs = Vec::with_capacity(m);
    for _ in 0..m {
        pairs.push((r.u32()? as usize, r.u32()? as usize));
    }
    let mut attrs = Vec::with_capacity(m);
    for _ in 0..m {
        attrs.push((r.f64()?, r.f64()?, r.f64()?));
    }
    let mut elements = Vec::with_capacity(m);
    for (id, (&(a, b), &(length, area, orientation))) in pairs.iter().zip(&attrs).enumerate() {
        if a >= n || b >= n {
            return Err(Error::Format {
                what: "lattice container",
                reason: format!("element {id} references particle out of range"),
            });
        }
        elements.push(LatticeElement {
            id,
            node_a: a,
            node_b: b,
            length,
            area,
            orientation,
            active: r.u8()? & 1 != 0,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format {
            what: "lattice container",
            reason: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &elements {
        neighbors[e.node_a].push(e.node_b);
        neighbors[e.node_b].push(e.node_a);
    }
    let cells: Vec<Cell> = (0..n)
        .map(|i| {
            geometry::voronoi_cell(
                positions[i],
                neighbors[i].iter().map(|&j| (j, positions[j])),
                spec.width,
                spec.height,
            )
        })
        .collect();
    let mut model = LatticeModel {
        spec,
        particles,
        elements,
        cells,
        stiffness: CsrMatrix::zeros(0),
        mass: Vec::new(),
        fixed,
        isolated: Vec::new(),
    };
    model.reassemble()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::generate_lattice;

    fn spec() -> PlateSpec {
        PlateSpec {
            n_particles: 64,
            seed: 42,
            ..PlateSpec::dataset_default()
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = encode(&generate_lattice(&spec()).unwrap());
        let b = encode(&generate_lattice(&spec()).unwrap());
        assert_eq!(a, b);
        assert_eq!(&a[..4], b"WLTC");
        assert_eq!(u16::from_le_bytes([a[4], a[5]]), 1);
    }

    #[test]
    fn decode_restores_model() {
        let mut m = generate_lattice(&spec()).unwrap();
        m.remove_particles(&[10, 11]);
        m.reassemble().unwrap();
        let back = decode(&encode(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_input_is_rejected() {
        let bytes = encode(&generate_lattice(&spec()).unwrap());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
    }
}
