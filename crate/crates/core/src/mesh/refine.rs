use std::collections::HashMap;

use super::{Mesh, MeshError};

pub(super) fn uniform_refine(mesh: &Mesh) -> Mesh {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend((0..mesh.n_edges()).map(|e| mesh.edge_midpoint(e)));

    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    let mut parents = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, &[v0, v1, v2]) in mesh.triangles.iter().enumerate() {
        let [e0, e1, e2] = mesh.tri_edges[t];
        let (m12, m20, m01) = (nv + e0, nv + e1, nv + e2);
        // Each child is the parent scaled by 1/2 (the middle one by −1/2), with
        // vertex labels carried over so the refinement edges stay parallel to the
        // parent's.
        triangles.push([v0, m01, m20]);
        triangles.push([m01, v1, m12]);
        triangles.push([m20, m12, v2]);
        triangles.push([m12, m20, m01]);
        parents.extend([Some(t); 4]);
    }
    Mesh::assemble(vertices, triangles, parents, mesh.generation + 1)
        .expect("red refinement of a valid mesh is valid")
}

pub(super) fn bisect_marked(mesh: &Mesh, marked: &[usize]) -> Result<Mesh, MeshError> {
    let nt = mesh.n_triangles();
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    let mut edge_marked = vec![false; mesh.n_edges()];
    let mut queue = Vec::with_capacity(marked.len());
    for &t in marked {
        if t >= nt {
            return Err(MeshError::TriangleOutOfRange(t));
        }
        let e = mesh.tri_edges[t][0];
        if !edge_marked[e] {
            edge_marked[e] = true;
            let (a, b) = mesh.edge_tris[e];
            queue.push(a);
            queue.extend(b);
        }
    }

    // Closure: a triangle with any marked edge must have its refinement edge marked.
    let cap = 4 * (nt + mesh.n_edges()) + 16;
    let mut steps = 0;
    while let Some(t) = queue.pop() {
        steps += 1;
        if steps > cap {
            return Err(MeshError::ClosureDidNotTerminate(steps));
        }
        let [r, e1, e2] = mesh.tri_edges[t];
        if !edge_marked[r] && (edge_marked[e1] || edge_marked[e2]) {
            edge_marked[r] = true;
            let (a, b) = mesh.edge_tris[r];
            for n in std::iter::once(a).chain(b) {
                if n != t {
                    queue.push(n);
                }
            }
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, &m) in edge_marked.iter().enumerate() {
        if m {
            midpoint.insert((mesh.edges[e][0], mesh.edges[e][1]), vertices.len());
            vertices.push(mesh.edge_midpoint(e));
        }
    }

    let mut triangles = Vec::with_capacity(nt + 2 * midpoint.len());
    let mut parents = Vec::with_capacity(triangles.capacity());
    for (t, &tri) in mesh.triangles.iter().enumerate() {
        bisect_recursive(tri, t, &midpoint, &mut triangles, &mut parents);
    }
    Mesh::assemble(vertices, triangles, parents, mesh.generation + 1)
}

/// Bisects `[v0, v1, v2]` across `(v1, v2)` if that edge carries a midpoint, then
/// recurses into the children, whose refinement edges are the parent's other two edges.
fn bisect_recursive(
    tri: [usize; 3],
    parent: usize,
    midpoint: &HashMap<(usize, usize), usize>,
    out: &mut Vec<[usize; 3]>,
    parents: &mut Vec<Option<usize>>,
) {
    let [v0, v1, v2] = tri;
    match midpoint.get(&(v1.min(v2), v1.max(v2))) {
        None => {
            out.push(tri);
            parents.push(Some(parent));
        }
        Some(&m) => {
            bisect_recursive([m, v0, v1], parent, midpoint, out, parents);
            bisect_recursive([m, v2, v0], parent, midpoint, out, parents);
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::mesh::{generate_domain, Domain};

    #[test]
    fn red_refinement_counts() {
        let m = generate_domain(Domain::Square, 1).unwrap();
        let r = m.uniform_refine();
        assert_eq!(r.n_triangles(), 8);
        assert_eq!(r.n_vertices(), 9);
        assert_eq!(r.generation(), 1);
        let g0 = m.geometry().unwrap();
        let g1 = r.geometry().unwrap();
        for (t, p) in r.parents().iter().enumerate() {
            let p = p.unwrap();
            assert!((g1.h_t[t] - 0.5 * g0.h_t[p]).abs() < 1e-15);
        }
    }

    #[test]
    fn red_refinement_conserves_area() {
        let mut m = generate_domain(Domain::TShape, 6).unwrap();
        for _ in 0..3 {
            m = m.uniform_refine();
        }
        assert!((m.total_area() - 2.0).abs() < 2e-12);
        m.check_conformity().unwrap();
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = generate_domain(Domain::LShape, 2).unwrap();
        assert_eq!(m.bisect_marked(&[]).unwrap(), m);
    }

    #[test]
    fn single_mark_closes_over_shared_diagonal() {
        let m = generate_domain(Domain::Square, 1).unwrap();
        let r = m.bisect_marked(&[0]).unwrap();
        assert_eq!(r.n_triangles(), 4);
        assert_eq!(r.n_vertices(), 5);
        assert_eq!(r.vertices()[4], [0.5, 0.5]);
        r.check_conformity().unwrap();
    }

    #[test]
    fn out_of_range_mark_is_rejected() {
        let m = generate_domain(Domain::Square, 1).unwrap();
        assert!(m.bisect_marked(&[7]).is_err());
    }

    #[test]
    fn bisecting_everything_halves_areas() {
        let m = generate_domain(Domain::LShape, 2).unwrap();
        let all: Vec<usize> = (0..m.n_triangles()).collect();
        let r = m.bisect_marked(&all).unwrap();
        assert_eq!(r.n_triangles(), 2 * m.n_triangles());
        for (t, p) in r.parents().iter().enumerate() {
            assert!((r.area(t) - 0.5 * m.area(p.unwrap())).abs() < 1e-15);
        }
    }

    #[test]
    fn corner_refinement_stays_conforming() {
        let mut m = generate_domain(Domain::LShape, 2).unwrap();
        for _ in 0..12 {
            let marked: Vec<usize> = (0..m.n_triangles())
                .filter(|&t| {
                    let c = m.centroid(t);
                    c[0].hypot(c[1]) < 0.3
                })
                .collect();
            m = m.bisect_marked(&marked).unwrap();
            m.check_conformity().unwrap();
        }
        assert!((m.total_area() - 3.0).abs() < 1e-12);
        assert!(m.min_angle() > std::f64::consts::FRAC_PI_4 - 1e-12);
    }
}
