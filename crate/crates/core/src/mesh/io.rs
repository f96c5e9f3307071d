//! Line-oriented mesh text format.
//!
//! ```text
//! dmfem-mesh v1
//! vertices N
//! x y boundary_flag        (N lines, flag 0 or 1)
//! cells M
//! v0 v1 v2                 (M lines, counterclockwise)
//! patches P
//! deg nd facet_v0 facet_v1 (P lines)
//! ```
//!
//! Coordinates are written with 17 significant digits so a write/read cycle
//! reproduces them exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{uniform_cells, Cell, Mesh, Patch, Point2};
use crate::error::{Error, Result};

pub const MESH_HEADER: &str = "dmfem-mesh v1";

pub fn write_mesh<W: Write>(mut w: W, mesh: &Mesh, patches: &[Patch]) -> std::io::Result<()> {
    writeln!(w, "{MESH_HEADER}")?;
    writeln!(w, "vertices {}", mesh.num_vertices())?;
    for (p, &b) in mesh.vertices().iter().zip(mesh.boundary_vertex()) {
        writeln!(w, "{:.16e} {:.16e} {}", p.x, p.y, u8::from(b))?;
    }
    writeln!(w, "cells {}", mesh.num_cells())?;
    for c in mesh.cells() {
        writeln!(w, "{} {} {}", c.v[0], c.v[1], c.v[2])?;
    }
    writeln!(w, "patches {}", patches.len())?;
    for p in patches {
        let [a, b] = p.facet_vertices(mesh);
        writeln!(w, "{} {} {} {}", p.deg_cell, p.nd_cell, a, b)?;
    }
    Ok(())
}

pub fn write_mesh_file(path: impl AsRef<Path>, mesh: &Mesh, patches: &[Patch]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_mesh(&mut w, mesh, patches).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        loop {
            self.line += 1;
            match self.inner.next() {
                None => return Err(self.err("unexpected end of file")),
                Some(Err(e)) => return Err(self.err(&e.to_string())),
                Some(Ok(s)) if s.trim().is_empty() => continue,
                Some(Ok(s)) => return Ok(s),
            }
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.to_string(),
        }
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let s = self.next_line()?;
        let mut it = s.split_whitespace();
        if it.next() != Some(name) {
            return Err(self.err(&format!("expected section `{name}`")));
        }
        let count = it
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| self.err(&format!("missing count for `{name}`")))?;
        Ok(count)
    }

    fn fields<T: std::str::FromStr, const K: usize>(&mut self) -> Result<[T; K]> {
        let s = self.next_line()?;
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() != K {
            return Err(self.err(&format!("expected {K} fields, found {}", parts.len())));
        }
        let mut out = Vec::with_capacity(K);
        for p in parts {
            out.push(
                p.parse::<T>()
                    .map_err(|_| self.err(&format!("bad value `{p}`")))?,
            );
        }
        Ok(out.try_into().ok().unwrap())
    }
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<(Mesh, Vec<Patch>)> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    if lines.next_line()?.trim() != MESH_HEADER {
        return Err(lines.err("missing `dmfem-mesh v1` header"));
    }

    let nv = lines.section("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for _ in 0..nv {
        let [x, y, flag]: [String; 3] = lines.fields()?;
        let parse = |s: &str| s.parse::<f64>().ok();
        let (Some(x), Some(y)) = (parse(&x), parse(&y)) else {
            return Err(lines.err("bad coordinate"));
        };
        let flag = match flag.as_str() {
            "0" => false,
            "1" => true,
            _ => return Err(lines.err("boundary flag must be 0 or 1")),
        };
        vertices.push(Point2::new(x, y));
        boundary.push(flag);
    }

    let nc = lines.section("cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let v: [usize; 3] = lines.fields()?;
        cells.push(Cell { v });
    }

    let np = lines.section("patches")?;
    let mut raw_patches = Vec::with_capacity(np);
    for _ in 0..np {
        let p: [usize; 4] = lines.fields()?;
        raw_patches.push((lines.line, p));
    }

    let grid = detect_grid(nv, &cells);
    let h = match grid {
        Some(n) => 1.0 / n as f64,
        None => max_diameter(&vertices, &cells),
    };
    let mesh = Mesh::new(vertices, cells, boundary, h)?.with_grid(grid);
    mesh.validate_unit_square()?;

    let mut patches = Vec::with_capacity(np);
    for (line, [deg, nd, a, b]) in raw_patches {
        let p = Patch::new(&mesh, deg, nd)?;
        let key = if a < b { [a, b] } else { [b, a] };
        if p.facet_vertices(&mesh) != key {
            return Err(Error::Parse {
                line,
                msg: format!("facet ({a}, {b}) is not shared by cells {deg} and {nd}"),
            });
        }
        patches.push(p);
    }
    Ok((mesh, patches))
}

pub fn read_mesh_file(path: impl AsRef<Path>) -> Result<(Mesh, Vec<Patch>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_mesh(BufReader::new(file))
}

fn detect_grid(nv: usize, cells: &[Cell]) -> Option<usize> {
    let side = (nv as f64).sqrt().round() as usize;
    if side < 3 || side * side != nv {
        return None;
    }
    let n = side - 1;
    (cells.len() == 2 * n * n && uniform_cells(n) == cells).then_some(n)
}

fn max_diameter(vertices: &[Point2], cells: &[Cell]) -> f64 {
    cells
        .iter()
        .flat_map(|c| (0..3).map(move |e| vertices[c.v[e]].dist(vertices[c.v[(e + 1) % 3]])))
        .fold(0.0, f64::max)
}
