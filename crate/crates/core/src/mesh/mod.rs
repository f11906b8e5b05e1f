//! Conforming 2D triangulations with edge topology, refinement and geometry queries.
//!
//! Triangles are stored counterclockwise with the local vertex 0 being the
//! refinement (newest) vertex, so local edge 0 (opposite vertex 0) is
//! the refinement edge. Local edge `i` is always the edge opposite local vertex `i`.

mod generate;
mod geometry;
mod refine;

pub use generate::{generate_domain, Domain};
pub use geometry::GeometryTables;

use std::collections::HashMap;

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("unknown domain `{0}` (expected square, lshape or tshape)")]
    UnknownDomain(String),
    #[error("subdivision count {n0} is incompatible with domain {domain}: {reason}")]
    BadSubdivision {
        domain: &'static str,
        n0: usize,
        reason: &'static str,
    },
    #[error("triangle {0} has non-positive signed area {1:e}")]
    Degenerate(usize, f64),
    #[error("triangle {tri} references vertex {vertex} but the mesh has {n_vertices} vertices")]
    VertexOutOfRange {
        tri: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("triangle index {0} out of range")]
    TriangleOutOfRange(usize),
    #[error("refinement closure did not terminate after {0} steps")]
    ClosureDidNotTerminate(usize),
    #[error("vertex {vertex} lies inside edge ({a}, {b}): mesh is not conforming")]
    HangingVertex { vertex: usize, a: usize, b: usize },
}

/// A conforming triangulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    edge_tris: Vec<(usize, Option<usize>)>,
    parents: Vec<Option<usize>>,
    generation: u32,
}

impl Mesh {
    /// Builds a mesh from raw vertex coordinates and counterclockwise triangles.
    ///
    /// The first vertex of each triangle is taken as its refinement vertex.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let parents = vec![None; triangles.len()];
        Self::assemble(vertices, triangles, parents, 0)
    }

    fn assemble(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        parents: Vec<Option<usize>>,
        generation: u32,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange {
                        tri: t,
                        vertex: v,
                        n_vertices: nv,
                    });
                }
            }
            let a = signed_area(&vertices, tri);
            if a <= 0.0 || !a.is_finite() {
                return Err(MeshError::Degenerate(t, a));
            }
        }

        // (lo, hi, triangle, local edge), sorted so edge numbering is a pure
        // function of the connectivity.
        let mut incidences: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                incidences.push((a.min(b), a.max(b), t, i));
            }
        }
        incidences.sort_unstable();

        let mut edges = Vec::new();
        let mut edge_tris: Vec<(usize, Option<usize>)> = Vec::new();
        let mut tri_edges = vec![[usize::MAX; 3]; triangles.len()];
        let mut k = 0;
        while k < incidences.len() {
            let (lo, hi, t, i) = incidences[k];
            let mut j = k + 1;
            while j < incidences.len() && incidences[j].0 == lo && incidences[j].1 == hi {
                j += 1;
            }
            if j - k > 2 {
                return Err(MeshError::NonManifoldEdge(lo, hi));
            }
            let e = edges.len();
            edges.push([lo, hi]);
            tri_edges[t][i] = e;
            if j - k == 2 {
                let (_, _, t2, i2) = incidences[k + 1];
                tri_edges[t2][i2] = e;
                edge_tris.push((t, Some(t2)));
            } else {
                edge_tris.push((t, None));
            }
            k = j;
        }

        Ok(Self {
            vertices,
            triangles,
            edges,
            tri_edges,
            edge_tris,
            parents,
            generation,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Edges as `[lo, hi]` vertex pairs with `lo < hi`.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge indices of a triangle; entry `i` is the edge opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn edge_triangles(&self, e: usize) -> (usize, Option<usize>) {
        self.edge_tris[e]
    }

    pub fn is_boundary(&self, e: usize) -> bool {
        self.edge_tris[e].1.is_none()
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.edge_tris.iter().filter(|(_, o)| o.is_none()).count()
    }

    /// Index of the triangle each triangle was refined from, if any.
    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }

    /// Fixed unit normal: the lo→hi tangent rotated by −90°.
    pub fn edge_normal(&self, e: usize) -> Point {
        let t = self.edge_tangent(e);
        [t[1], -t[0]]
    }

    /// Unit tangent `t_e = (−n₂, n₁)`, pointing from the lower to the higher vertex index.
    pub fn edge_tangent(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        let len = dist(p, q);
        [(q[0] - p[0]) / len, (q[1] - p[1]) / len]
    }

    /// `+1` when the global normal of local edge `i` points out of triangle `t`.
    pub fn edge_sign(&self, t: usize, i: usize) -> f64 {
        let tri = &self.triangles[t];
        if tri[(i + 1) % 3] < tri[(i + 2) % 3] {
            1.0
        } else {
            -1.0
        }
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let p = self.triangle_points(t);
                (0..3)
                    .map(|i| {
                        let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
                        let u = [b[0] - a[0], b[1] - a[1]];
                        let v = [c[0] - a[0], c[1] - a[1]];
                        let cos = (u[0] * v[0] + u[1] * v[1]) / (dist(a, b) * dist(a, c));
                        cos.clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks that no vertex lies in the relative interior of an edge.
    ///
    /// A hanging vertex always splits a one-sided edge, so only boundary-flagged
    /// edges and their endpoints need to be compared.
    pub fn check_conformity(&self) -> Result<(), MeshError> {
        let boundary: Vec<usize> = (0..self.n_edges()).filter(|&e| self.is_boundary(e)).collect();
        let mut candidates: Vec<usize> = boundary.iter().flat_map(|&e| self.edges[e]).collect();
        candidates.sort_unstable();
        candidates.dedup();
        for &e in &boundary {
            let [a, b] = self.edges[e];
            let (p, q) = (self.vertices[a], self.vertices[b]);
            let len = dist(p, q);
            for &v in &candidates {
                if v == a || v == b {
                    continue;
                }
                let x = self.vertices[v];
                let cross = (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
                if cross.abs() > 1e-12 * len * len {
                    continue;
                }
                let s = ((x[0] - p[0]) * (q[0] - p[0]) + (x[1] - p[1]) * (q[1] - p[1])) / (len * len);
                if s > 1e-12 && s < 1.0 - 1e-12 {
                    return Err(MeshError::HangingVertex { vertex: v, a, b });
                }
            }
        }
        Ok(())
    }

    /// Reorders the triangles: triangle `perm[k]` of `self` becomes triangle `k`.
    pub fn permute_triangles(&self, perm: &[usize]) -> Result<Self, MeshError> {
        let triangles = perm.iter().map(|&t| self.triangles[t]).collect();
        let parents = perm.iter().map(|&t| self.parents[t]).collect();
        Self::assemble(self.vertices.clone(), triangles, parents, self.generation)
    }

    /// Red refinement: every triangle is split into four similar children through
    /// its edge midpoints.
    pub fn uniform_refine(&self) -> Self {
        refine::uniform_refine(self)
    }

    /// Newest-vertex bisection of the marked triangles with conformity closure.
    pub fn bisect_marked(&self, marked: &[usize]) -> Result<Self, MeshError> {
        refine::bisect_marked(self, marked)
    }

    pub fn geometry(&self) -> Result<GeometryTables, MeshError> {
        GeometryTables::new(self)
    }

    /// Vertex pair → edge index lookup.
    pub fn edge_lookup(&self) -> HashMap<(usize, usize), usize> {
        self.edges.iter().enumerate().map(|(e, &[a, b])| ((a, b), e)).collect()
    }
}

pub(crate) fn signed_area(vertices: &[Point], tri: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

pub(crate) fn dist(p: Point, q: Point) -> f64 {
    (q[0] - p[0]).hypot(q[1] - p[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> Mesh {
        Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn unit_triangle_geometry() {
        let m = unit_triangle();
        assert_eq!(m.area(0), 0.5);
        let g = m.geometry().unwrap();
        assert!((g.h_t[0] - 2f64.sqrt()).abs() < 1e-15);
        let e = m.edge_lookup()[&(0, 1)];
        assert_eq!(m.edge_length(e), 1.0);
        let n = m.edge_normal(e);
        assert_eq!(n, [0.0, -1.0]);
        let t = m.edge_tangent(e);
        assert_eq!(t, [-n[1], n[0]]);
    }

    #[test]
    fn rejects_clockwise_triangle() {
        let err = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]]).unwrap_err();
        assert!(matches!(err, MeshError::Degenerate(0, _)));
    }

    #[test]
    fn rejects_non_manifold_edge() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [2.0, 1.0]];
        // Three triangles on the edge (0, 1); two of them overlap.
        let t = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        assert_eq!(Mesh::from_parts(v, t).unwrap_err(), MeshError::NonManifoldEdge(0, 1));
    }

    #[test]
    fn edge_signs_are_opposite_across_interior_edges() {
        let m = generate_domain(Domain::LShape, 2).unwrap();
        for e in 0..m.n_edges() {
            if let (t0, Some(t1)) = m.edge_triangles(e) {
                let i0 = m.triangle_edges(t0).iter().position(|&x| x == e).unwrap();
                let i1 = m.triangle_edges(t1).iter().position(|&x| x == e).unwrap();
                assert_eq!(m.edge_sign(t0, i0), -m.edge_sign(t1, i1));
            }
        }
    }

    #[test]
    fn edge_sign_matches_outward_normal() {
        let m = generate_domain(Domain::TShape, 6).unwrap();
        for t in 0..m.n_triangles() {
            let c = m.centroid(t);
            for (i, &e) in m.triangle_edges(t).iter().enumerate() {
                let n = m.edge_normal(e);
                let mid = m.edge_midpoint(e);
                let out = n[0] * (mid[0] - c[0]) + n[1] * (mid[1] - c[1]);
                assert_eq!(out.signum(), m.edge_sign(t, i));
            }
        }
    }

    #[test]
    fn rebuilding_edges_gives_identical_normals() {
        let m = generate_domain(Domain::LShape, 3).unwrap().uniform_refine();
        let again = Mesh::from_parts(m.vertices().to_vec(), m.triangles().to_vec()).unwrap();
        assert_eq!(m.edges(), again.edges());
        for e in 0..m.n_edges() {
            assert_eq!(m.edge_normal(e), again.edge_normal(e));
        }
    }

    #[test]
    fn detects_hanging_vertex() {
        // Left triangle split at the midpoint of the shared edge, right one not.
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [2.0, 0.5], [1.0, 0.5]];
        let t = vec![[0, 1, 4], [0, 4, 2], [3, 2, 1]];
        let m = Mesh::from_parts(v, t).unwrap();
        assert!(matches!(m.check_conformity(), Err(MeshError::HangingVertex { vertex: 4, .. })));
    }
}
