//! Test particle geometry: a convex icosahedron plus a dense sphere, and
//! their projected density along the beam axis.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{center, RealGrid};

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn normalized(self) -> Self {
        let norm = (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        Quaternion {
            w: self.w / norm,
            x: self.x / norm,
            y: self.y / norm,
            z: self.z / norm,
        }
    }

    /// Shortest-arc rotation taking unit vector `from` onto unit vector `to`.
    pub fn between(from: [f64; 3], to: [f64; 3]) -> Self {
        let d = dot(from, to);
        if d < -1.0 + 1e-12 {
            // antiparallel: rotate by pi about any axis orthogonal to `from`
            let axis = if from[0].abs() < 0.9 {
                cross(from, [1.0, 0.0, 0.0])
            } else {
                cross(from, [0.0, 1.0, 0.0])
            };
            return Quaternion {
                w: 0.0,
                x: axis[0],
                y: axis[1],
                z: axis[2],
            }
            .normalized();
        }
        let c = cross(from, to);
        Quaternion {
            w: 1.0 + d,
            x: c[0],
            y: c[1],
            z: c[2],
        }
        .normalized()
    }

    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let q = [self.x, self.y, self.z];
        let t = cross(q, v).map(|c| 2.0 * c);
        let qt = cross(q, t);
        [
            v[0] + self.w * t[0] + qt[0],
            v[1] + self.w * t[1] + qt[1],
            v[2] + self.w * t[2] + qt[2],
        ]
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

const PHI: f64 = 1.618_033_988_749_895;

/// Vertices of the icosahedron with edge length 2, circumradius `sqrt(1 + PHI^2)`.
fn unit_vertices() -> Vec<[f64; 3]> {
    let mut v = Vec::with_capacity(12);
    for a in [-1.0, 1.0] {
        for b in [-PHI, PHI] {
            v.push([0.0, a, b]);
            v.push([a, b, 0.0]);
            v.push([b, 0.0, a]);
        }
    }
    v
}

/// Reference vertex that the default orientation maps onto `+x`.
pub fn reference_vertex() -> [f64; 3] {
    let r = (1.0 + PHI * PHI).sqrt();
    [0.0, 1.0 / r, PHI / r]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Icosahedron {
    /// Distance between opposing vertices, in pixels.
    pub circumdiameter: f64,
    pub orientation: Quaternion,
    /// Scattering power per unit path length.
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub diameter: f64,
    /// Center offset from the grid center, `[x (columns), y (rows), z (beam)]`.
    pub center: [f64; 3],
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub icosahedron: Option<Icosahedron>,
    pub sphere: Option<Sphere>,
}

/// Half-space `normal · p <= offset`.
#[derive(Clone, Copy, Debug)]
struct Face {
    normal: [f64; 3],
    offset: f64,
}

impl Icosahedron {
    /// Vertex coordinates in pixels, relative to the particle center.
    pub fn vertices(&self) -> Vec<[f64; 3]> {
        let scale = 0.5 * self.circumdiameter / (1.0 + PHI * PHI).sqrt();
        unit_vertices()
            .into_iter()
            .map(|v| self.orientation.rotate(v.map(|c| c * scale)))
            .collect()
    }

    fn faces(&self) -> Vec<Face> {
        let verts = self.vertices();
        let edge = self.circumdiameter / (1.0 + PHI * PHI).sqrt();
        let is_edge = |a: [f64; 3], b: [f64; 3]| {
            let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            (dot(d, d).sqrt() - edge).abs() < 1e-6 * edge
        };
        let mut faces = Vec::with_capacity(20);
        for i in 0..12 {
            for j in i + 1..12 {
                if !is_edge(verts[i], verts[j]) {
                    continue;
                }
                for k in j + 1..12 {
                    if !(is_edge(verts[i], verts[k]) && is_edge(verts[j], verts[k])) {
                        continue;
                    }
                    let (a, b, c) = (verts[i], verts[j], verts[k]);
                    let mut normal = cross(
                        [b[0] - a[0], b[1] - a[1], b[2] - a[2]],
                        [c[0] - a[0], c[1] - a[1], c[2] - a[2]],
                    );
                    let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0, (a[2] + b[2] + c[2]) / 3.0];
                    if dot(normal, centroid) < 0.0 {
                        normal = normal.map(|x| -x);
                    }
                    let len = dot(normal, normal).sqrt();
                    let normal = normal.map(|x| x / len);
                    faces.push(Face {
                        normal,
                        offset: dot(normal, a),
                    });
                }
            }
        }
        debug_assert_eq!(faces.len(), 20);
        faces
    }

    /// Length of the intersection of the line `(x, y, z)`, `z` free, with the
    /// solid. Slab intersection over the face half-spaces.
    fn chord(faces: &[Face], x: f64, y: f64) -> f64 {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for f in faces {
            let rhs = f.offset - f.normal[0] * x - f.normal[1] * y;
            let nz = f.normal[2];
            if nz.abs() < 1e-12 {
                if rhs < 0.0 {
                    return 0.0;
                }
            } else if nz > 0.0 {
                hi = hi.min(rhs / nz);
            } else {
                lo = lo.max(rhs / nz);
            }
        }
        (hi - lo).max(0.0)
    }
}

impl Sphere {
    pub fn chord(&self, x: f64, y: f64) -> f64 {
        let r = 0.5 * self.diameter;
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let d2 = dx * dx + dy * dy;
        if d2 >= r * r {
            0.0
        } else {
            2.0 * (r * r - d2).sqrt()
        }
    }
}

impl Particle {
    /// The default test particle: icosahedron with one vertex on `+x` and a
    /// sphere centered on that vertex.
    pub fn vertex_sphere(circumdiameter: f64, sphere_diameter: f64, density_ratio: f64) -> Self {
        let orientation = Quaternion::between(reference_vertex(), [1.0, 0.0, 0.0]);
        Particle {
            icosahedron: Some(Icosahedron {
                circumdiameter,
                orientation,
                density: 1.0,
            }),
            sphere: Some(Sphere {
                diameter: sphere_diameter,
                center: [0.5 * circumdiameter, 0.0, 0.0],
                density: density_ratio,
            }),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.icosahedron.is_none() && self.sphere.is_none() {
            return invalid("particle has no components");
        }
        if let Some(ico) = &self.icosahedron {
            if !(ico.circumdiameter > 0.0 && ico.density > 0.0) {
                return invalid("icosahedron diameter and density must be positive");
            }
        }
        if let Some(s) = &self.sphere {
            if !(s.diameter > 0.0 && s.density > 0.0) {
                return invalid("sphere diameter and density must be positive");
            }
        }
        Ok(())
    }

    /// In-plane bounding box `(xmin, xmax, ymin, ymax)` relative to the grid center.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        if let Some(ico) = &self.icosahedron {
            for v in ico.vertices() {
                b = (b.0.min(v[0]), b.1.max(v[0]), b.2.min(v[1]), b.3.max(v[1]));
            }
        }
        if let Some(s) = &self.sphere {
            let r = 0.5 * s.diameter;
            b = (
                b.0.min(s.center[0] - r),
                b.1.max(s.center[0] + r),
                b.2.min(s.center[1] - r),
                b.3.max(s.center[1] + r),
            );
        }
        b
    }
}

/// Projected density of `particle` on an `n x n` grid, particle centered on
/// the grid center. Column offset is `x`, row offset is `y`.
pub fn project_particle(particle: &Particle, n: usize) -> Result<RealGrid> {
    particle.validate()?;
    let (xmin, xmax, ymin, ymax) = particle.extent();
    let half = n as f64 / 2.0;
    let c = center(n) as f64;
    if xmax - xmin >= half || ymax - ymin >= half {
        return invalid(format!(
            "particle extent {:.1}x{:.1} px is not below half the {n}-pixel grid",
            xmax - xmin,
            ymax - ymin
        ));
    }
    if c + xmin < 0.0 || c + xmax > (n - 1) as f64 || c + ymin < 0.0 || c + ymax > (n - 1) as f64 {
        return invalid("particle does not fit inside the grid");
    }
    let faces = particle.icosahedron.as_ref().map(|ico| ico.faces());
    Ok(RealGrid::from_fn(n, |i, j| {
        let x = j as f64 - c;
        let y = i as f64 - c;
        let mut v = 0.0;
        if let (Some(ico), Some(faces)) = (&particle.icosahedron, &faces) {
            v += ico.density * Icosahedron::chord(faces, x, y);
        }
        if let Some(s) = &particle.sphere {
            v += s.density * s.chord(x, y);
        }
        v
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_only(diameter: f64, density: f64) -> Particle {
        Particle {
            icosahedron: None,
            sphere: Some(Sphere {
                diameter,
                center: [0.0, 0.0, 0.0],
                density,
            }),
        }
    }

    #[test]
    fn sphere_chord_through_center_is_diameter() {
        let p = project_particle(&sphere_only(4.0, 3.0), 32).unwrap();
        assert!((p[(16, 16)] - 12.0).abs() < 1e-12);
        assert_eq!(p[(16, 18)], 0.0);
        assert_eq!(p[(16, 19)], 0.0);
    }

    #[test]
    fn default_orientation_puts_vertex_on_x() {
        let p = Particle::vertex_sphere(20.0, 4.0, 50.0);
        let ico = p.icosahedron.as_ref().unwrap();
        let far = ico
            .vertices()
            .into_iter()
            .fold(f64::NEG_INFINITY, |m, v| m.max(v[0]));
        assert!((far - 10.0).abs() < 1e-9);
        assert_eq!(ico.faces().len(), 20);
    }

    #[test]
    fn chord_through_center_hits_opposite_vertices() {
        // vertex along the beam axis: the central ray passes vertex to vertex
        let ico = Icosahedron {
            circumdiameter: 20.0,
            orientation: Quaternion::between(reference_vertex(), [0.0, 0.0, 1.0]),
            density: 1.0,
        };
        let faces = ico.faces();
        assert!((Icosahedron::chord(&faces, 0.0, 0.0) - 20.0).abs() < 1e-9);
        assert_eq!(Icosahedron::chord(&faces, 10.5, 0.0), 0.0);
    }

    #[test]
    fn oversized_particle_is_rejected() {
        let p = Particle::vertex_sphere(20.0, 4.0, 50.0);
        assert!(project_particle(&p, 32).is_err());
        assert!(project_particle(&p, 64).is_ok());
    }
}
