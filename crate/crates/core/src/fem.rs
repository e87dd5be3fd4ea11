//! P1 finite elements on triangulations of the unit square.
//!
//! Assembles `-∇·(κ∇u) = 1` in Ω = (0,1)² with `u = 0` on ∂Ω. The coefficient
//! is given at mesh nodes and averaged over the three vertices of each
//! triangle; Dirichlet nodes are eliminated so the system only involves the
//! interior degrees of freedom.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};
use crate::sparse::CsrMatrix;

const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    resolution: Option<usize>,
}

impl TriMesh {
    /// Structured mesh of `r × r` square cells, each split into two right
    /// triangles along the diagonal from its lower-left to upper-right corner.
    /// Node `(i, j)` sits at `(i/r, j/r)` with index `j (r+1) + i`.
    pub fn structured(r: usize) -> Result<Self> {
        if r < 2 {
            return Err(Error::MeshTooCoarse(r));
        }
        let stride = r + 1;
        let h = 1.0 / r as f64;
        let mut nodes = Vec::with_capacity(stride * stride);
        for j in 0..stride {
            for i in 0..stride {
                let coord = |k: usize| if k == r { 1.0 } else { k as f64 * h };
                nodes.push([coord(i), coord(j)]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * r * r);
        for j in 0..r {
            for i in 0..r {
                let v00 = j * stride + i;
                let v10 = v00 + 1;
                let v01 = v00 + stride;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut mesh = Self::from_parts(nodes, triangles)?;
        mesh.resolution = Some(r);
        Ok(mesh)
    }

    /// Builds a mesh from raw nodes and triangles. Triangles are reoriented
    /// counterclockwise; degenerate triangles are rejected.
    pub fn from_parts(nodes: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= nodes.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing node")));
            }
            let area = signed_area(&nodes, tri);
            if !(area.abs() > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        let boundary = nodes
            .iter()
            .map(|&[x, y]| {
                x.abs() < BOUNDARY_TOL
                    || (x - 1.0).abs() < BOUNDARY_TOL
                    || y.abs() < BOUNDARY_TOL
                    || (y - 1.0).abs() < BOUNDARY_TOL
            })
            .collect();
        Ok(Self { nodes, triangles, boundary, resolution: None })
    }

    /// Reads a node file (`x y` per line) and a triangle file (`i j k` per
    /// line, 0-based). Blank lines and lines starting with `#` are skipped.
    pub fn import(nodes_path: &Path, triangles_path: &Path) -> Result<Self> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::ArtifactNotFound(p.to_path_buf()),
                _ => Error::Io(e),
            })
        };
        let nodes = parse_rows::<f64, 2>(&read(nodes_path)?, "node")?;
        let triangles = parse_rows::<usize, 3>(&read(triangles_path)?, "triangle")?;
        Self::from_parts(nodes, triangles)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn resolution(&self) -> Option<usize> {
        self.resolution
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&v| self.boundary[v]).collect()
    }

    /// Interior nodes in increasing order; position `k` is degree of freedom `k`.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&v| !self.boundary[v]).collect()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Row sums of the P1 mass matrix: each node receives a third of the area
    /// of every triangle it belongs to.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.n_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let third = self.triangle_area(t) / 3.0;
            for &v in tri {
                mass[v] += third;
            }
        }
        mass
    }

    /// SHA-256 over node coordinates and triangle connectivity, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.nodes.len() as u64).to_le_bytes());
        for [x, y] in &self.nodes {
            hasher.update(x.to_le_bytes());
            hasher.update(y.to_le_bytes());
        }
        hasher.update((self.triangles.len() as u64).to_le_bytes());
        for tri in &self.triangles {
            for &v in tri {
                hasher.update((v as u64).to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn signed_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|v| nodes[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn parse_rows<T: std::str::FromStr, const N: usize>(text: &str, what: &str) -> Result<Vec<[T; N]>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<T> = line
            .split_whitespace()
            .map(|f| f.parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidMesh(format!("unparsable {what} on line {}", lineno + 1)))?;
        let row: [T; N] = fields
            .try_into()
            .map_err(|_| Error::InvalidMesh(format!("{what} on line {} needs {N} fields", lineno + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Assembled system `A u = b` on the interior degrees of freedom.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
}

impl LinearSystem {
    pub fn new(a: CsrMatrix, b: Vec<f64>) -> Result<Self> {
        check_len(a.n_rows(), b.len())?;
        check_len(a.n_rows(), a.n_cols())?;
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

/// Reusable assembler: the sparsity pattern, element stiffness matrices and
/// scatter positions depend only on the mesh and are computed once.
#[derive(Debug, Clone)]
pub struct Assembler {
    n_nodes: usize,
    dof_nodes: Vec<usize>,
    triangles: Vec<[usize; 3]>,
    /// Unit-coefficient element stiffness, row-major 3×3 per triangle.
    local: Vec<[f64; 9]>,
    /// CSR slot of each local entry, `usize::MAX` when it touches the boundary.
    slots: Vec<[usize; 9]>,
    pattern: CsrMatrix,
    load: Vec<f64>,
}

impl Assembler {
    pub fn new(mesh: &TriMesh) -> Self {
        let n_nodes = mesh.n_nodes();
        let dof_nodes = mesh.interior_nodes();
        let mut dof_of = vec![usize::MAX; n_nodes];
        for (k, &v) in dof_nodes.iter().enumerate() {
            dof_of[v] = k;
        }
        let n = dof_nodes.len();

        let mut local = Vec::with_capacity(mesh.triangles().len());
        let mut load = vec![0.0; n];
        let mut entries = Vec::new();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let area = mesh.triangle_area(t);
            let [p0, p1, p2] = tri.map(|v| mesh.nodes()[v]);
            // gradients of the barycentric coordinates, scaled by 2·area
            let g = [[p1[1] - p2[1], p2[0] - p1[0]], [p2[1] - p0[1], p0[0] - p2[0]], [p0[1] - p1[1], p1[0] - p0[0]]];
            let mut k = [0.0; 9];
            for a in 0..3 {
                for b in 0..3 {
                    k[3 * a + b] = (g[a][0] * g[b][0] + g[a][1] * g[b][1]) / (4.0 * area);
                }
            }
            local.push(k);
            for &v in tri {
                if dof_of[v] != usize::MAX {
                    load[dof_of[v]] += area;
                }
            }
            for &va in tri {
                for &vb in tri {
                    if dof_of[va] != usize::MAX && dof_of[vb] != usize::MAX {
                        entries.push((dof_of[va], dof_of[vb], 0.0));
                    }
                }
            }
        }
        load.iter_mut().for_each(|b| *b /= 3.0);
        let pattern = CsrMatrix::from_triplets(n, n, entries);
        let slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [usize::MAX; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        let (i, j) = (dof_of[tri[a]], dof_of[tri[b]]);
                        if i != usize::MAX && j != usize::MAX {
                            let (cols, _) = pattern.row(i);
                            s[3 * a + b] = pattern.indptr()[i] + cols.binary_search(&j).expect("in pattern");
                        }
                    }
                }
                s
            })
            .collect();
        Self { n_nodes, dof_nodes, triangles: mesh.triangles().to_vec(), local, slots, pattern, load }
    }

    /// Number of interior degrees of freedom.
    pub fn dim(&self) -> usize {
        self.dof_nodes.len()
    }

    /// Mesh node of each degree of freedom.
    pub fn dof_nodes(&self) -> &[usize] {
        &self.dof_nodes
    }

    /// Assembles the system for a strictly positive nodal coefficient.
    pub fn assemble(&self, coefficient: &[f64]) -> Result<LinearSystem> {
        check_len(self.n_nodes, coefficient.len())?;
        if let Some((node, &value)) = coefficient.iter().enumerate().find(|(_, &c)| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidCoefficient { node, value });
        }
        let mut a = self.pattern.clone();
        let values = a.data_mut();
        for ((tri, k), slots) in self.triangles.iter().zip(&self.local).zip(&self.slots) {
            let kappa = (coefficient[tri[0]] + coefficient[tri[1]] + coefficient[tri[2]]) / 3.0;
            for (e, &slot) in slots.iter().enumerate() {
                if slot != usize::MAX {
                    values[slot] += kappa * k[e];
                }
            }
        }
        Ok(LinearSystem { a, b: self.load.clone() })
    }

    /// Scatters interior values into a nodal vector with zero boundary values.
    pub fn to_nodal(&self, u: &[f64]) -> Vec<f64> {
        let mut nodal = vec![0.0; self.n_nodes];
        for (&v, &x) in self.dof_nodes.iter().zip(u) {
            nodal[v] = x;
        }
        nodal
    }
}

/// One-shot assembly; prefer [`Assembler`] when assembling many coefficients.
pub fn assemble(mesh: &TriMesh, coefficient: &[f64]) -> Result<LinearSystem> {
    Assembler::new(mesh).assemble(coefficient)
}
