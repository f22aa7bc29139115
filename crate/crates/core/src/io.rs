//! Field export and import: CSV with an `x,y,value` header and legacy
//! ASCII VTK `STRUCTURED_POINTS`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{CellField, Grid, ScalarField};

const HEADER: [&str; 3] = ["x", "y", "value"];

/// Writes every node row-major, `j` outer; masked nodes carry their zero.
pub fn write_csv(field: &ScalarField, out: impl Write) -> Result<()> {
    let grid = field.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(std::io::Error::from)?;
    for n in 0..grid.node_count() {
        let [x, y] = grid.position(n);
        w.serialize((x, y, field.get(n))).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the active cells at their centers, row-major.
pub fn write_cell_csv(field: &CellField, out: impl Write) -> Result<()> {
    let grid = field.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(std::io::Error::from)?;
    for &c in grid.active_cells() {
        let [x, y] = grid.cell_center(c);
        w.serialize((x, y, field.get(c))).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads nodal values written by [`write_csv`]. Rows may come in any order
/// and may omit nodes (left at zero); rows off the lattice are rejected and
/// values at masked nodes are dropped.
pub fn read_csv(grid: &Arc<Grid>, input: impl Read) -> Result<ScalarField> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if headers.iter().map(str::trim).ne(HEADER) {
        return Err(Error::Parse(format!("expected header x,y,value, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let origin = grid.position(0);
    let h = grid.h();
    let mut values = vec![0.0; grid.node_count()];
    for (line, row) in r.deserialize::<(f64, f64, f64)>().enumerate() {
        let (x, y, v) = row.map_err(|e| Error::Parse(e.to_string()))?;
        let (fi, fj) = ((x - origin[0]) / h, (y - origin[1]) / h);
        let (i, j) = (fi.round(), fj.round());
        let on_lattice = (fi - i).abs() < 1e-6 && (fj - j).abs() < 1e-6;
        if !on_lattice || i < 0.0 || j < 0.0 || i as usize >= grid.nx() || j as usize >= grid.ny() {
            return Err(Error::Parse(format!("row {}: ({x}, {y}) is not a grid node", line + 2)));
        }
        values[grid.node_id(i as usize, j as usize)] = v;
    }
    ScalarField::from_nodal(grid, values)
}

fn vtk_header(grid: &Grid, title: &str, mut w: impl Write) -> Result<()> {
    let [ox, oy] = grid.position(0);
    let h = grid.h();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} 1", grid.nx(), grid.ny())?;
    writeln!(w, "ORIGIN {ox} {oy} 0")?;
    writeln!(w, "SPACING {h} {h} 1")?;
    Ok(())
}

fn vtk_scalars(name: &str, values: impl Iterator<Item = f64>, mut w: impl Write) -> Result<()> {
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        if v.is_nan() {
            writeln!(w, "NaN")?;
        } else {
            writeln!(w, "{v}")?;
        }
    }
    Ok(())
}

/// Point data with `NaN` on masked nodes.
pub fn write_vtk(field: &ScalarField, name: &str, mut out: impl Write) -> Result<()> {
    let grid = field.grid();
    vtk_header(grid, name, &mut out)?;
    writeln!(out, "POINT_DATA {}", grid.node_count())?;
    let values = (0..grid.node_count()).map(|n| if grid.is_interior(n) { field.get(n) } else { f64::NAN });
    vtk_scalars(name, values, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Cell data with `NaN` on inactive cells.
pub fn write_cell_vtk(field: &CellField, name: &str, mut out: impl Write) -> Result<()> {
    let grid = field.grid();
    vtk_header(grid, name, &mut out)?;
    writeln!(out, "CELL_DATA {}", grid.cell_count())?;
    let mut values = vec![f64::NAN; grid.cell_count()];
    for &c in grid.active_cells() {
        values[c] = field.get(c);
    }
    vtk_scalars(name, values.into_iter(), &mut out)?;
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `<stem>.csv` and `<stem>.vtk` into `dir`.
pub fn save_field(field: &ScalarField, dir: &Path, stem: &str) -> Result<()> {
    write_csv(field, create(&dir.join(format!("{stem}.csv")))?)?;
    write_vtk(field, stem, create(&dir.join(format!("{stem}.vtk")))?)
}

/// Cell-field counterpart of [`save_field`].
pub fn save_cell_field(field: &CellField, dir: &Path, stem: &str) -> Result<()> {
    write_cell_csv(field, create(&dir.join(format!("{stem}.csv")))?)?;
    write_cell_vtk(field, stem, create(&dir.join(format!("{stem}.vtk")))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;

    #[test]
    fn csv_round_trips_bit_exactly() {
        let g = Grid::build(DomainSpec::unit_disk(), 0.1).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() * y + 1.0 / 3.0);
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        assert!(buf.starts_with(b"x,y,value\n"));
        let back = read_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn csv_rejects_bad_input() {
        let g = Grid::build(DomainSpec::UnitSquare, 0.25).unwrap();
        assert!(matches!(read_csv(&g, "a,b,c\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_csv(&g, "x,y,value\n0.1,0,1\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_csv(&g, "x,y,value\n0.25,0.5,oops\n".as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn vtk_marks_masked_nodes_with_nan() {
        let g = Grid::build(DomainSpec::UnitSquare, 0.25).unwrap();
        let f = ScalarField::constant(&g, 2.0);
        let mut buf = Vec::new();
        write_vtk(&f, "u", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let dims = format!("DATASET STRUCTURED_POINTS\nDIMENSIONS {} {} 1\n", g.nx(), g.ny());
        assert!(text.contains(&dims));
        let data: Vec<&str> = text.lines().skip_while(|l| *l != "LOOKUP_TABLE default").skip(1).collect();
        assert_eq!(data.len(), g.node_count());
        assert_eq!(data.iter().filter(|v| **v == "NaN").count(), g.node_count() - 9);
        assert_eq!(data.iter().filter(|v| **v == "2").count(), 9);
    }
}
