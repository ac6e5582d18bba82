//! Plain-text mesh files.
//!
//! Line 1: "V T" (vertex and triangle counts). Then V lines "x y b" with
//! b in {0,1} the boundary flag, then T lines "i j k" of 0-based,
//! counter-clockwise vertex indices. Coordinates are rendered with 17
//! significant digits so a write/read round trip is bit exact.

use super::TriMesh;
use crate::{Error, Result};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub fn write_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{} {}", mesh.n_vertices(), mesh.n_triangles())?;
    for v in 0..mesh.n_vertices() {
        let p = mesh.vertex(v);
        writeln!(f, "{:.16e} {:.16e} {}", p[0], p[1], mesh.is_boundary(v) as u8)?;
    }
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        writeln!(f, "{} {} {}", tri[0], tri[1], tri[2])?;
    }
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines().enumerate();

    let (line_no, header) = next_content_line(&mut lines)?
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty mesh file".into() })?;
    let mut it = header.split_whitespace();
    let nv: usize = parse_field(it.next(), line_no, "vertex count")?;
    let nt: usize = parse_field(it.next(), line_no, "triangle count")?;
    if it.next().is_some() {
        return Err(Error::Parse { line: line_no, msg: "expected exactly 'V T'".into() });
    }

    let mut vertices = Vec::with_capacity(nv);
    let mut flags = Vec::with_capacity(nv);
    for k in 0..nv {
        let (line_no, line) = next_content_line(&mut lines)?.ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("unexpected end of file: expected {nv} vertices, got {k}"),
        })?;
        let mut it = line.split_whitespace();
        let x: f64 = parse_field(it.next(), line_no, "x coordinate")?;
        let y: f64 = parse_field(it.next(), line_no, "y coordinate")?;
        let b: u8 = parse_field(it.next(), line_no, "boundary flag")?;
        if b > 1 {
            return Err(Error::Parse { line: line_no, msg: format!("boundary flag {b} not in {{0,1}}") });
        }
        vertices.push([x, y]);
        flags.push(b == 1);
    }

    let mut triangles = Vec::with_capacity(nt);
    for k in 0..nt {
        let (line_no, line) = next_content_line(&mut lines)?.ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("unexpected end of file: expected {nt} triangles, got {k}"),
        })?;
        let mut it = line.split_whitespace();
        let tri: [usize; 3] = [
            parse_field(it.next(), line_no, "vertex index")?,
            parse_field(it.next(), line_no, "vertex index")?,
            parse_field(it.next(), line_no, "vertex index")?,
        ];
        for &v in &tri {
            if v >= nv {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("triangle index {v} out of range (V={nv})"),
                });
            }
        }
        let area = super::signed_area(&vertices, &tri);
        if area <= 0.0 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("triangle has negative area {area:.3e} (clockwise orientation?)"),
            });
        }
        triangles.push(tri);
    }

    let mesh = TriMesh::new(vertices, triangles).map_err(|e| Error::Parse {
        line: 1,
        msg: format!("invalid mesh: {e}"),
    })?;
    for (v, &flag) in flags.iter().enumerate() {
        if mesh.is_boundary(v) != flag {
            return Err(Error::Parse {
                line: 2 + v,
                msg: format!(
                    "boundary flag mismatch at vertex {v}: file says {}, topology says {}",
                    flag as u8,
                    mesh.is_boundary(v) as u8
                ),
            });
        }
    }
    Ok(mesh)
}

type NumberedLines<'a> = std::iter::Enumerate<std::io::Lines<BufReader<std::fs::File>>>;

fn next_content_line(lines: &mut NumberedLines) -> Result<Option<(usize, String)>> {
    for (idx, line) in lines.by_ref() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        return Ok(Some((idx + 1, trimmed.to_string())));
    }
    Ok(None)
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    let field = field.ok_or_else(|| Error::Parse { line, msg: format!("missing {what}") })?;
    field.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse {what}: '{field}'") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_square_trimesh;

    fn tmpfile(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("dmg_mesh_io_{}_{name}", std::process::id()));
        p
    }

    #[test]
    fn roundtrip_identity() {
        let mesh = generate_square_trimesh(3, None).unwrap();
        let path = tmpfile("roundtrip.txt");
        write_mesh(&mesh, &path).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(mesh.n_vertices(), back.n_vertices());
        assert_eq!(mesh.triangles(), back.triangles());
        for v in 0..mesh.n_vertices() {
            assert_eq!(mesh.vertex(v), back.vertex(v));
            assert_eq!(mesh.is_boundary(v), back.is_boundary(v));
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn out_of_range_index_names_line() {
        let path = tmpfile("badindex.txt");
        std::fs::write(&path, "3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 5\n").unwrap();
        let err = read_mesh(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 5"), "{msg}");
        assert!(msg.contains("out of range"), "{msg}");
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let path = tmpfile("cw.txt");
        std::fs::write(&path, "3 1\n0 0 1\n1 0 1\n0 1 1\n0 2 1\n").unwrap();
        let err = read_mesh(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("negative area"), "{msg}");
        assert!(msg.contains("line 5"), "{msg}");
        std::fs::remove_file(path).ok();
    }
}
