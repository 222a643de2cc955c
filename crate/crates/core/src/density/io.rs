//! Flat dumps of cell values behind a one-line JSON header.
//!
//! Both formats start with `{"dim":..,"cells_per_axis":..,"origin":[..],"side":..}`
//! followed by a newline. The CSV body has one value per line in grid order;
//! the binary body is the values as little-endian `f64`.

use std::io::{BufRead, Write};

use super::{Grid, GridDensity};
use crate::{Error, Result};

impl GridDensity {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, self.grid())?;
        writeln!(w)?;
        for v in self.values() {
            writeln!(w, "{v:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<GridDensity> {
        let grid = read_header(&mut r)?;
        let mut values = Vec::with_capacity(grid.num_cells());
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v = line
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            values.push(v);
        }
        GridDensity::new(grid, values)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, self.grid())?;
        writeln!(w)?;
        for v in self.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut r: R) -> Result<GridDensity> {
        let grid = read_header(&mut r)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != grid.num_cells() * 8 {
            return Err(Error::Parse(format!(
                "expected {} bytes of values, found {}",
                grid.num_cells() * 8,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        GridDensity::new(grid, values)
    }
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Grid> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    if header.trim().is_empty() {
        return Err(Error::Parse("missing JSON header".into()));
    }
    Ok(serde_json::from_str(header.trim())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridDensity {
        let grid = Grid::new(2, 3, vec![-0.5, 0.25], 2.0).unwrap();
        GridDensity::from_fn(grid, |x| 1.0 + x[0] * x[0] + 0.1 * x[1]).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = GridDensity::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        assert_eq!(GridDensity::read_binary(buf.as_slice()).unwrap(), d);
        buf.pop();
        assert!(GridDensity::read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn header_is_validated() {
        let bad = "{\"dim\":1,\"cells_per_axis\":0,\"origin\":[0.0],\"side\":1.0}\n";
        assert!(GridDensity::read_csv(bad.as_bytes()).is_err());
        let short = "{\"dim\":1,\"cells_per_axis\":2,\"origin\":[0.0],\"side\":1.0}\n1.0\n";
        assert!(GridDensity::read_csv(short.as_bytes()).is_err());
        assert!(GridDensity::read_csv("".as_bytes()).is_err());
    }
}
