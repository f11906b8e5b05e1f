use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Mesh, MeshError, Point};

/// The test domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// `(0,1)²`
    Square,
    /// `(−1,1)² \ (−1,0)²`
    #[serde(rename = "lshape")]
    LShape,
    /// `(−1,1)² \ ((−1,−1/3)×(−1,1/2) ∪ (1/3,1)×(−1,1/2))`
    #[serde(rename = "tshape")]
    TShape,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Square => "square",
            Domain::LShape => "lshape",
            Domain::TShape => "tshape",
        }
    }

    pub fn area(self) -> f64 {
        match self {
            Domain::Square => 1.0,
            Domain::LShape => 3.0,
            Domain::TShape => 4.0 - 2.0 * (2.0 / 3.0) * 1.5,
        }
    }

    fn bounding_box(self) -> ([f64; 2], [f64; 2]) {
        match self {
            Domain::Square => ([0.0, 0.0], [1.0, 1.0]),
            Domain::LShape | Domain::TShape => ([-1.0, -1.0], [1.0, 1.0]),
        }
    }

    fn contains(self, p: Point) -> bool {
        let [x, y] = p;
        match self {
            Domain::Square => true,
            Domain::LShape => !(x < 0.0 && y < 0.0),
            Domain::TShape => !(y < 0.5 && (x < -1.0 / 3.0 || x > 1.0 / 3.0)),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "square" => Ok(Domain::Square),
            "lshape" | "l-shape" => Ok(Domain::LShape),
            "tshape" | "t-shape" => Ok(Domain::TShape),
            _ => Err(MeshError::UnknownDomain(s.to_string())),
        }
    }
}

/// Structured triangulation of a test domain with `n0` cells per unit length.
///
/// Every grid square is cut along its `/` diagonal; the right-angle vertex is the
/// refinement vertex, so each diagonal is the refinement edge of both of its
/// triangles.
pub fn generate_domain(domain: Domain, n0: usize) -> Result<Mesh, MeshError> {
    if n0 == 0 {
        return Err(MeshError::BadSubdivision {
            domain: domain.name(),
            n0,
            reason: "need at least one cell per unit length",
        });
    }
    if domain == Domain::TShape && n0 % 6 != 0 {
        return Err(MeshError::BadSubdivision {
            domain: domain.name(),
            n0,
            reason: "re-entrant corners (±1/3, 1/2) are grid points only when n0 is a multiple of 6",
        });
    }

    let (lo, hi) = domain.bounding_box();
    let h = 1.0 / n0 as f64;
    let nx = ((hi[0] - lo[0]) * n0 as f64).round() as usize;
    let ny = ((hi[1] - lo[1]) * n0 as f64).round() as usize;
    let coord = |i: usize, j: usize| -> Point { [lo[0] + i as f64 * h, lo[1] + j as f64 * h] };

    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = coord(i, j);
            if domain.contains([c[0] + 0.5 * h, c[1] + 0.5 * h]) {
                cells.push((i, j));
            }
        }
    }
    // Row-major vertex numbering over the vertices actually used.
    let mut used: Vec<(usize, usize)> = cells
        .iter()
        .flat_map(|&(i, j)| [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)])
        .collect();
    used.sort_unstable_by_key(|&(i, j)| (j, i));
    used.dedup();
    for (i, j) in used {
        index.insert((i, j), vertices.len());
        vertices.push(coord(i, j));
    }

    let mut triangles = Vec::with_capacity(2 * cells.len());
    for (i, j) in cells {
        let bl = index[&(i, j)];
        let br = index[&(i + 1, j)];
        let tl = index[&(i, j + 1)];
        let tr = index[&(i + 1, j + 1)];
        triangles.push([br, tr, bl]);
        triangles.push([tl, bl, tr]);
    }
    Mesh::from_parts(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_square() {
        let m = generate_domain(Domain::Square, 1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.n_edges(), 5);
        assert_eq!(m.n_boundary_edges(), 4);
    }

    #[test]
    fn lshape_area() {
        let m = generate_domain(Domain::LShape, 2).unwrap();
        assert!((m.total_area() - 3.0).abs() < 1e-12);
        m.check_conformity().unwrap();
    }

    #[test]
    fn tshape_area_and_corners() {
        let m = generate_domain(Domain::TShape, 6).unwrap();
        assert!((m.total_area() - 2.0).abs() < 1e-12);
        assert!((Domain::TShape.area() - 2.0).abs() < 1e-15);
        for corner in [[-1.0 / 3.0, 0.5], [1.0 / 3.0, 0.5]] {
            assert!(m
                .vertices()
                .iter()
                .any(|v| (v[0] - corner[0]).abs() < 1e-14 && (v[1] - corner[1]).abs() < 1e-14));
        }
    }

    #[test]
    fn tshape_requires_multiple_of_six() {
        assert!(matches!(
            generate_domain(Domain::TShape, 4),
            Err(MeshError::BadSubdivision { n0: 4, .. })
        ));
        assert!(generate_domain(Domain::Square, 0).is_err());
    }

    #[test]
    fn parses_names() {
        assert_eq!("TShape".parse::<Domain>().unwrap(), Domain::TShape);
        assert_eq!(
            "disk".parse::<Domain>().unwrap_err(),
            MeshError::UnknownDomain("disk".into())
        );
    }

    #[test]
    fn boundary_edges_per_domain() {
        // Perimeter / h for the structured meshes.
        let m = generate_domain(Domain::TShape, 6).unwrap();
        assert_eq!(m.n_boundary_edges(), 48);
        let m = generate_domain(Domain::LShape, 2).unwrap();
        assert_eq!(m.n_boundary_edges(), 16);
    }
}
