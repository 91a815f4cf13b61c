//! Plain-text file formats: meshes, solutions, CSV reports.
//!
//! The mesh format is line-based for regression-fixture diffing:
//!
//! ```text
//! h 0.05          # target edge length
//! v <x> <y>       # vertex, 0-based implicit index
//! t <i> <j> <k>   # triangle
//! b <i>           # boundary node
//! u <i> <value>   # nodal value (solution files only)
//! ```
//!
//! Floats print with Rust's shortest round-trip formatting, so write/read
//! is exact and reruns are byte-identical.

use crate::error::MeshError;
use crate::mesh::Mesh;
use crate::point::Point2;
use std::fmt::Write as _;

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "h {}", mesh.h_max);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {}", v.x, v.y);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
    }
    for b in &mesh.boundary_nodes {
        let _ = writeln!(out, "b {b}");
    }
    out
}

pub fn write_solution(mesh: &Mesh, values: &[f64]) -> String {
    let mut out = write_mesh(mesh);
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "u {i} {v}");
    }
    out
}

pub struct ParsedSolution {
    pub mesh: Mesh,
    pub values: Vec<f64>,
}

pub fn read_mesh(text: &str) -> Result<Mesh, MeshError> {
    read_solution(text).map(|p| p.mesh)
}

pub fn read_solution(text: &str) -> Result<ParsedSolution, MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut boundary_nodes = Vec::new();
    let mut values: Vec<(usize, f64)> = Vec::new();
    let mut h_max = 0.0;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap();
        let mut next_f64 = || -> Result<f64, MeshError> {
            it.next()
                .ok_or(MeshError::Parse {
                    line: ln + 1,
                    msg: "missing field".into(),
                })?
                .parse()
                .map_err(|e| MeshError::Parse {
                    line: ln + 1,
                    msg: format!("bad number: {e}"),
                })
        };
        match tag {
            "h" => h_max = next_f64()?,
            "v" => {
                let x = next_f64()?;
                let y = next_f64()?;
                vertices.push(Point2::new(x, y));
            }
            "t" => {
                let i = next_f64()? as u32;
                let j = next_f64()? as u32;
                let k = next_f64()? as u32;
                triangles.push([i, j, k]);
            }
            "b" => boundary_nodes.push(next_f64()? as u32),
            "u" => {
                let i = next_f64()? as usize;
                let v = next_f64()?;
                values.push((i, v));
            }
            other => {
                return Err(MeshError::Parse {
                    line: ln + 1,
                    msg: format!("unknown record '{other}'"),
                })
            }
        }
    }
    // Boundary edges are recoverable from incidence: edges on one triangle.
    let mut incidence = std::collections::BTreeMap::new();
    for t in &triangles {
        for e in 0..3 {
            let a: u32 = t[e];
            let b: u32 = t[(e + 1) % 3];
            *incidence.entry((a.min(b), a.max(b))).or_insert(0u32) += 1;
        }
    }
    let boundary_edges: Vec<[u32; 2]> = incidence
        .iter()
        .filter(|(_, &c)| c == 1)
        .map(|(&(a, b), _)| [a, b])
        .collect();
    let mut vals = vec![0.0; vertices.len()];
    let has_values = !values.is_empty();
    for (i, v) in values {
        if i >= vals.len() {
            return Err(MeshError::Parse {
                line: 0,
                msg: format!("solution index {i} out of range"),
            });
        }
        vals[i] = v;
    }
    Ok(ParsedSolution {
        mesh: Mesh {
            vertices,
            triangles,
            boundary_nodes,
            boundary_edges,
            h_max,
            boundary_parents: None,
        },
        values: if has_values { vals } else { Vec::new() },
    })
}

/// Vertex dump: one "x y" pair per line, index-ordered.
pub fn write_vertices(points: &[Point2]) -> String {
    let mut out = String::new();
    for p in points {
        let _ = writeln!(out, "{} {}", p.x, p.y);
    }
    out
}

/// Solver trace CSV.
pub fn write_trace_csv(trace: &[crate::solver::TraceRow]) -> String {
    let mut out = String::from("iteration,energy,pg_norm,step,max_element_gradient\n");
    for row in trace {
        let _ = writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12e},{:.12e}",
            row.iteration, row.energy, row.pg_norm, row.step, row.max_element_gradient
        );
    }
    out
}
