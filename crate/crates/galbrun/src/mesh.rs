//! Conforming tetrahedral meshes of a box with full face topology.
//!
//! Structured meshes use the Kuhn split (six tetrahedra per subcube sharing
//! the main diagonal), which red-refines into half-scale copies of itself and
//! therefore keeps the shape-regularity constant fixed across the refinement
//! family. Refinement picks the octahedron diagonal geometrically (shortest,
//! ties broken by the opposite-edge length gap and then vertex ids), so the
//! rule is deterministic and insensitive to vertex renumbering.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{cross, det3, distance, dot, norm, scale, sub, Mat3, Vec3};
use crate::{from_f64, Real};

/// Axis-aligned box domain.
#[derive(Debug, Clone, Copy)]
pub struct AxisBox<R> {
    pub lo: Vec3<R>,
    pub hi: Vec3<R>,
}

impl<R: Real> AxisBox<R> {
    pub fn unit() -> Self {
        AxisBox { lo: [R::zero(); 3], hi: [R::one(); 3] }
    }

    pub fn volume(&self) -> R {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1]) * (self.hi[2] - self.lo[2])
    }
}

/// One face of the mesh with its incidence and geometry.
#[derive(Debug, Clone)]
pub struct Face<R> {
    /// Vertex ids in ascending order (the canonical order used for face
    /// polynomial bases).
    pub vertices: [usize; 3],
    /// First incident tet; the stored normal points out of it.
    pub tet_first: usize,
    /// Second incident tet for interior faces.
    pub tet_second: Option<usize>,
    /// Unit normal oriented out of `tet_first`.
    pub normal: Vec3<R>,
    pub area: R,
    pub diameter: R,
}

impl<R> Face<R> {
    pub fn is_boundary(&self) -> bool {
        self.tet_second.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh<R> {
    pub vertices: Vec<Vec3<R>>,
    /// Tetrahedra as vertex ids, positively oriented (signed volume > 0).
    pub tets: Vec<[usize; 4]>,
    pub faces: Vec<Face<R>>,
    /// Face ids of each tet; entry `i` is the face opposite local vertex `i`.
    pub tet_faces: Vec<[usize; 4]>,
    /// Tet diameters.
    pub h_tet: Vec<R>,
    pub h_max: R,
}

impl<R: Real> Mesh<R> {
    /// Build a mesh from raw vertices and tets, deriving face topology.
    ///
    /// Every tet must be positively oriented; every face must have one or
    /// two incident tets (conformity).
    pub fn from_raw(vertices: Vec<Vec3<R>>, tets: Vec<[usize; 4]>) -> Result<Self> {
        if tets.is_empty() {
            return Err(Error::invalid("mesh must contain at least one tet"));
        }
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                if v >= vertices.len() {
                    return Err(Error::invalid(format!("tet {t} references missing vertex {v}")));
                }
            }
            let vol = signed_volume(&vertices, tet);
            if vol <= R::zero() {
                return Err(Error::invalid(format!(
                    "tet {t} is degenerate or negatively oriented (signed volume {vol})"
                )));
            }
        }

        // Collect faces; BTreeMap keyed on sorted vertex triples gives a
        // deterministic face numbering.
        let mut table: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for i in 0..4 {
                let mut key = [tet[(i + 1) % 4], tet[(i + 2) % 4], tet[(i + 3) % 4]];
                key.sort_unstable();
                table.entry(key).or_default().push(t);
            }
        }

        let mut faces = Vec::with_capacity(table.len());
        let mut face_id: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        for (key, incident) in &table {
            match incident.len() {
                1 | 2 => {}
                n => {
                    return Err(Error::invalid(format!(
                        "face {key:?} has {n} incident tets; mesh is not conforming"
                    )))
                }
            }
            let mut inc = incident.clone();
            inc.sort_unstable();
            let a = vertices[key[0]];
            let b = vertices[key[1]];
            let c = vertices[key[2]];
            let cr = cross(sub(b, a), sub(c, a));
            let two_area = norm(cr);
            let area = two_area * from_f64::<R>(0.5);
            let mut normal = scale(R::one() / two_area, cr);
            // orient out of the first incident tet
            let tet0 = &tets[inc[0]];
            let centroid_tet = centroid4(&vertices, tet0);
            let centroid_face = centroid3(a, b, c);
            if dot(normal, sub(centroid_face, centroid_tet)) < R::zero() {
                normal = scale(-R::one(), normal);
            }
            let diameter = distance(a, b).max(distance(b, c)).max(distance(a, c));
            face_id.insert(*key, faces.len());
            faces.push(Face {
                vertices: *key,
                tet_first: inc[0],
                tet_second: inc.get(1).copied(),
                normal,
                area,
                diameter,
            });
        }

        let mut tet_faces = Vec::with_capacity(tets.len());
        for tet in &tets {
            let mut ids = [0usize; 4];
            for i in 0..4 {
                let mut key = [tet[(i + 1) % 4], tet[(i + 2) % 4], tet[(i + 3) % 4]];
                key.sort_unstable();
                ids[i] = face_id[&key];
            }
            tet_faces.push(ids);
        }

        let h_tet: Vec<R> = tets.iter().map(|t| tet_diameter(&vertices, t)).collect();
        let h_max = h_tet.iter().cloned().fold(R::zero(), R::max);

        Ok(Mesh { vertices, tets, faces, tet_faces, h_tet, h_max })
    }

    /// Kuhn triangulation of `box_domain` with `n` subdivisions per axis:
    /// each of the n^3 subcubes is split into six tets around its main
    /// diagonal.
    pub fn build_structured_cube(n: usize, box_domain: AxisBox<R>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("subdivision count n must be at least 1"));
        }
        for d in 0..3 {
            if !(box_domain.hi[d] > box_domain.lo[d]) {
                return Err(Error::invalid(format!(
                    "box is degenerate along axis {d}: [{}, {}]",
                    box_domain.lo[d], box_domain.hi[d]
                )));
            }
        }
        let np = n + 1;
        let idx = |i: usize, j: usize, k: usize| i + np * (j + np * k);
        let mut vertices = Vec::with_capacity(np * np * np);
        for k in 0..np {
            for j in 0..np {
                for i in 0..np {
                    let frac = |m: usize| from_f64::<R>(m as f64 / n as f64);
                    vertices.push([
                        box_domain.lo[0] + (box_domain.hi[0] - box_domain.lo[0]) * frac(i),
                        box_domain.lo[1] + (box_domain.hi[1] - box_domain.lo[1]) * frac(j),
                        box_domain.lo[2] + (box_domain.hi[2] - box_domain.lo[2]) * frac(k),
                    ]);
                }
            }
        }
        // One tet per permutation of the three axis steps.
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut tets = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMS {
                        let mut corner = [i, j, k];
                        let v0 = idx(corner[0], corner[1], corner[2]);
                        corner[perm[0]] += 1;
                        let v1 = idx(corner[0], corner[1], corner[2]);
                        corner[perm[1]] += 1;
                        let v2 = idx(corner[0], corner[1], corner[2]);
                        corner[perm[2]] += 1;
                        let v3 = idx(corner[0], corner[1], corner[2]);
                        let mut tet = [v0, v1, v2, v3];
                        if signed_volume(&vertices, &tet) < R::zero() {
                            tet.swap(2, 3);
                        }
                        tets.push(tet);
                    }
                }
            }
        }
        Self::from_raw(vertices, tets)
    }

    /// Uniform red refinement: each tet is replaced by four corner children
    /// and four children of the interior octahedron, split around the
    /// geometrically chosen diagonal.
    pub fn refine_uniform(&self) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3<R>>| -> usize {
            let key = (a.min(b), a.max(b));
            if let Some(&m) = midpoint.get(&key) {
                return m;
            }
            let half = from_f64::<R>(0.5);
            let pa = vertices[key.0];
            let pb = vertices[key.1];
            let m = vertices.len();
            vertices.push([
                half * (pa[0] + pb[0]),
                half * (pa[1] + pb[1]),
                half * (pa[2] + pb[2]),
            ]);
            midpoint.insert(key, m);
            m
        };

        let mut tets = Vec::with_capacity(8 * self.tets.len());
        for tet in &self.tets {
            let v = *tet;
            let mut m = [[0usize; 4]; 4];
            for a in 0..4 {
                for b in (a + 1)..4 {
                    let mm = mid(v[a], v[b], &mut vertices);
                    m[a][b] = mm;
                    m[b][a] = mm;
                }
            }
            // corner children
            for a in 0..4 {
                let mut child = [0usize; 4];
                for b in 0..4 {
                    child[b] = if a == b { v[a] } else { m[a][b] };
                }
                push_oriented(&mut tets, &vertices, child);
            }
            // Octahedron diagonal: candidates connect midpoints of opposite
            // edge pairs. Pick the shortest; break ties by the smaller gap
            // between the two opposite edge lengths, then by vertex ids.
            let pairs: [([usize; 2], [usize; 2]); 3] =
                [([0, 1], [2, 3]), ([0, 2], [1, 3]), ([0, 3], [1, 2])];
            let mut best: Option<(R, R, usize)> = None;
            for (c, (ea, eb)) in pairs.iter().enumerate() {
                let pa = vertices[m[ea[0]][ea[1]]];
                let pb = vertices[m[eb[0]][eb[1]]];
                let diag = distance(pa, pb);
                let la = distance(vertices[v[ea[0]]], vertices[v[ea[1]]]);
                let lb = distance(vertices[v[eb[0]]], vertices[v[eb[1]]]);
                let gap = (la - lb).abs();
                let better = match &best {
                    None => true,
                    Some((bd, bg, _)) => {
                        let tol = from_f64::<R>(1e-12) * self.h_max;
                        if diag < *bd - tol {
                            true
                        } else if diag > *bd + tol {
                            false
                        } else {
                            gap < *bg - tol
                        }
                    }
                };
                if better {
                    best = Some((diag, gap, c));
                }
            }
            let (ea, eb) = pairs[best.unwrap().2];
            let d1 = m[ea[0]][ea[1]];
            let d2 = m[eb[0]][eb[1]];
            // quad cycle around the diagonal
            let cycle = [
                m[ea[0]][eb[0]],
                m[ea[0]][eb[1]],
                m[ea[1]][eb[1]],
                m[ea[1]][eb[0]],
            ];
            for q in 0..4 {
                let child = [d1, d2, cycle[q], cycle[(q + 1) % 4]];
                push_oriented(&mut tets, &vertices, child);
            }
        }
        Self::from_raw(vertices, tets)
    }

    pub fn tet_vertices(&self, t: usize) -> [Vec3<R>; 4] {
        let tet = self.tets[t];
        [
            self.vertices[tet[0]],
            self.vertices[tet[1]],
            self.vertices[tet[2]],
            self.vertices[tet[3]],
        ]
    }

    /// Affine map of tet `t`: x = v0 + J xi with J columns the edge vectors.
    pub fn tet_jacobian(&self, t: usize) -> (Vec3<R>, Mat3<R>) {
        let v = self.tet_vertices(t);
        let mut j = [[R::zero(); 3]; 3];
        for col in 0..3 {
            for row in 0..3 {
                j[row][col] = v[col + 1][row] - v[0][row];
            }
        }
        (v[0], j)
    }

    pub fn tet_volume(&self, t: usize) -> R {
        signed_volume(&self.vertices, &self.tets[t]) // positive by invariant
    }

    pub fn total_volume(&self) -> R {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).fold(R::zero(), |a, b| a + b)
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| !f.is_boundary()).count()
    }

    pub fn num_boundary_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_boundary()).count()
    }

    /// Measured shape-regularity constant: max over tets and their faces of
    /// h_tet / h_face.
    pub fn shape_regularity(&self) -> R {
        let mut worst = R::zero();
        for (t, faces) in self.tet_faces.iter().enumerate() {
            for &f in faces {
                worst = worst.max(self.h_tet[t] / self.faces[f].diameter);
            }
        }
        worst
    }

    /// Physical coordinates of a barycentric point of tet `t`.
    pub fn point_from_barycentric(&self, t: usize, lambda: [R; 4]) -> Vec3<R> {
        let v = self.tet_vertices(t);
        let mut out = [R::zero(); 3];
        for i in 0..4 {
            for d in 0..3 {
                out[d] += lambda[i] * v[i][d];
            }
        }
        out
    }

    /// Barycentric coordinates of a face quadrature point with respect to an
    /// incident tet. `face_lambda` refers to the face's canonical (sorted)
    /// vertex order.
    pub fn face_point_in_tet(&self, face: usize, t: usize, face_lambda: [R; 3]) -> [R; 4] {
        let f = &self.faces[face];
        let tet = self.tets[t];
        let mut lambda = [R::zero(); 4];
        for (k, &fv) in f.vertices.iter().enumerate() {
            let local = tet
                .iter()
                .position(|&tv| tv == fv)
                .expect("face vertex not found in tet; face/tet mismatch");
            lambda[local] = face_lambda[k];
        }
        lambda
    }

    /// Line-oriented debug dump with `vertices`, `tets` and `faces` sections.
    pub fn dump_ascii(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(s, "vertices {}", self.vertices.len()).unwrap();
        for v in &self.vertices {
            writeln!(s, "{} {} {}", v[0], v[1], v[2]).unwrap();
        }
        writeln!(s, "tets {}", self.tets.len()).unwrap();
        for t in &self.tets {
            writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]).unwrap();
        }
        writeln!(s, "faces {}", self.faces.len()).unwrap();
        for f in &self.faces {
            let second = f.tet_second.map(|t| t as i64).unwrap_or(-1);
            writeln!(
                s,
                "{} {} {} {} {} {} {} {} {} {}",
                f.vertices[0],
                f.vertices[1],
                f.vertices[2],
                f.tet_first,
                second,
                f.normal[0],
                f.normal[1],
                f.normal[2],
                f.area,
                f.diameter
            )
            .unwrap();
        }
        s
    }
}

fn push_oriented<R: Real>(tets: &mut Vec<[usize; 4]>, vertices: &[Vec3<R>], mut tet: [usize; 4]) {
    if signed_volume(vertices, &tet) < R::zero() {
        tet.swap(2, 3);
    }
    tets.push(tet);
}

fn signed_volume<R: Real>(vertices: &[Vec3<R>], tet: &[usize; 4]) -> R {
    let a = vertices[tet[0]];
    let b = vertices[tet[1]];
    let c = vertices[tet[2]];
    let d = vertices[tet[3]];
    let m = [
        [b[0] - a[0], c[0] - a[0], d[0] - a[0]],
        [b[1] - a[1], c[1] - a[1], d[1] - a[1]],
        [b[2] - a[2], c[2] - a[2], d[2] - a[2]],
    ];
    det3(&m) / from_f64::<R>(6.0)
}

fn tet_diameter<R: Real>(vertices: &[Vec3<R>], tet: &[usize; 4]) -> R {
    let mut h = R::zero();
    for a in 0..4 {
        for b in (a + 1)..4 {
            h = h.max(distance(vertices[tet[a]], vertices[tet[b]]));
        }
    }
    h
}

fn centroid4<R: Real>(vertices: &[Vec3<R>], tet: &[usize; 4]) -> Vec3<R> {
    let quarter = from_f64::<R>(0.25);
    let mut c = [R::zero(); 3];
    for &v in tet {
        for d in 0..3 {
            c[d] += vertices[v][d];
        }
    }
    scale(quarter, c)
}

fn centroid3<R: Real>(a: Vec3<R>, b: Vec3<R>, c: Vec3<R>) -> Vec3<R> {
    let third = R::one() / from_f64::<R>(3.0);
    [
        third * (a[0] + b[0] + c[0]),
        third * (a[1] + b[1] + c[1]),
        third * (a[2] + b[2] + c[2]),
    ]
}
