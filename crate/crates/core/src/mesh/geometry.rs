use super::{Mesh, MeshError};

/// Per-element, per-edge and per-vertex measures used by assembly and the estimators.
#[derive(Clone, Debug)]
pub struct GeometryTables {
    /// Element diameter (longest edge).
    pub h_t: Vec<f64>,
    pub area: Vec<f64>,
    pub edge_length: Vec<f64>,
    /// Triangles incident to each vertex, ascending.
    pub patches: Vec<Vec<usize>>,
    pub patch_area: Vec<f64>,
}

impl GeometryTables {
    pub fn new(mesh: &Mesh) -> Result<Self, MeshError> {
        let nt = mesh.n_triangles();
        let edge_length: Vec<f64> = (0..mesh.n_edges()).map(|e| mesh.edge_length(e)).collect();
        let mut h_t = Vec::with_capacity(nt);
        let mut area = Vec::with_capacity(nt);
        let mut patches = vec![Vec::new(); mesh.n_vertices()];
        for t in 0..nt {
            let a = mesh.area(t);
            if a <= 0.0 || !a.is_finite() {
                return Err(MeshError::Degenerate(t, a));
            }
            area.push(a);
            h_t.push(
                mesh.triangle_edges(t)
                    .iter()
                    .map(|&e| edge_length[e])
                    .fold(0.0, f64::max),
            );
            for &v in &mesh.triangles()[t] {
                patches[v].push(t);
            }
        }
        let patch_area = patches.iter().map(|p| p.iter().map(|&t| area[t]).sum()).collect();
        Ok(Self {
            h_t,
            area,
            edge_length,
            patches,
            patch_area,
        })
    }
}
