//! Compact binary field files and CSV export.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic   "IBFD"          4 bytes
//! version u32             currently 1
//! dims    u32
//! axes    dims × (lo f64, hi f64, n u64)
//! values  len × f64       row-major, last axis fastest
//! ```

use std::io::{self, Read, Write};

use invberge::{Axis, ProductGrid, ScalarField};

pub const MAGIC: &[u8; 4] = b"IBFD";
pub const VERSION: u32 = 1;

pub fn write_field(w: &mut impl Write, field: &ScalarField) -> io::Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for a in grid.axes() {
        w.write_all(&a.lo().to_le_bytes())?;
        w.write_all(&a.hi().to_le_bytes())?;
        w.write_all(&(a.len() as u64).to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_array<const N: usize>(r: &mut impl Read) -> io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_field(r: &mut impl Read) -> io::Result<ScalarField> {
    if &read_array::<4>(r)? != MAGIC {
        return Err(invalid("not a field file (bad magic)"));
    }
    let version = u32::from_le_bytes(read_array(r)?);
    if version != VERSION {
        return Err(invalid(format!("unsupported field file version {version}")));
    }
    let dims = u32::from_le_bytes(read_array(r)?) as usize;
    if dims == 0 || dims > 64 {
        return Err(invalid(format!("implausible dimension count {dims}")));
    }
    let mut axes = Vec::with_capacity(dims);
    for _ in 0..dims {
        let lo = f64::from_le_bytes(read_array(r)?);
        let hi = f64::from_le_bytes(read_array(r)?);
        let n = u64::from_le_bytes(read_array(r)?) as usize;
        axes.push(Axis::new(lo, hi, n).map_err(|e| invalid(e.to_string()))?);
    }
    let grid = ProductGrid::new(axes).map_err(|e| invalid(e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(f64::from_le_bytes(read_array(r)?));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(invalid("trailing bytes after field values"));
    }
    ScalarField::new_extended(grid, values).map_err(|e| invalid(e.to_string()))
}

/// Header `x1,…,xd,<value_name>`, then one row per grid point in row-major
/// order. Numbers use the shortest representation that round-trips.
pub fn write_csv(w: &mut impl Write, field: &ScalarField, value_name: &str) -> io::Result<()> {
    let grid = field.grid();
    let header: Vec<String> = (1..=grid.dim()).map(|k| format!("x{k}")).chain([value_name.to_string()]).collect();
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for (l, v) in field.values().iter().enumerate() {
        line.clear();
        for c in grid.coords(l) {
            line.push_str(&format!("{c:?},"));
        }
        line.push_str(&format!("{v:?}"));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use invberge::build_grid;

    #[test]
    fn binary_round_trip() {
        let g = build_grid(&[(0.0, 1.0, 3), (-2.0, 2.0, 4)]).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] * 0.1 + x[1] / 3.0).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 2 * 24 + 12 * 8);
        let back = read_field(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid(), f.grid());
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert!(read_field(&mut &b"NOPE0000"[..]).is_err());
        let g = build_grid(&[(0.0, 1.0, 2)]).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &ScalarField::constant(g, 1.0).unwrap()).unwrap();
        assert!(read_field(&mut &buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(read_field(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn csv_rows() {
        let g = build_grid(&[(0.0, 1.0, 2), (0.0, 1.0, 2)]).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] - x[1]).unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, &f, "theta").unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "x1,x2,theta\n0.0,0.0,0.0\n0.0,1.0,-1.0\n1.0,0.0,1.0\n1.0,1.0,0.0\n");
    }
}
