use super::{Geometry, ShapeSpec};
use crate::cloud::SemanticClass;
use crate::Vec3;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub class: SemanticClass,
    pub instance: u32,
}

/// Roots of `a t² + 2 h t + c = 0` in ascending order.
fn quadratic(a: f64, h: f64, c: f64) -> Option<(f64, f64)> {
    if a.abs() < 1e-14 {
        if h.abs() < 1e-14 {
            return None;
        }
        let t = -c / (2.0 * h);
        return Some((t, t));
    }
    let disc = h * h - a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    // numerically stable pair
    let q = -(h + h.signum() * s);
    let (t0, t1) = if q != 0.0 {
        (q / a, c / q)
    } else {
        (-h / a, -h / a)
    };
    Some(if t0 <= t1 { (t0, t1) } else { (t1, t0) })
}

/// First root beyond the origin whose local point passes `accept`.
fn first_root(roots: Option<(f64, f64)>, accept: impl Fn(f64) -> bool) -> Option<f64> {
    let (t0, t1) = roots?;
    [t0, t1].into_iter().find(|&t| t > EPS && accept(t))
}

/// Nearest intersection with `t > 0` of the ray `origin + t·direction`.
pub fn ray_primitive_intersect(origin: &Vec3, direction: &Vec3, shape: &ShapeSpec) -> Option<Hit> {
    let t = match shape.geometry {
        Geometry::Ground { half_size } => {
            if direction.z.abs() < 1e-15 {
                return None;
            }
            let t = (shape.position.z - origin.z) / direction.z;
            let p = origin + direction * t;
            let inside = (p.x - shape.position.x).abs() <= half_size
                && (p.y - shape.position.y).abs() <= half_size;
            (t > EPS && inside).then_some(t)
        }
        geometry => {
            let o = shape.to_local(origin);
            let d = shape.rotation().inverse_transform_vector(direction);
            match geometry {
                Geometry::Plane { half_x, half_y } => {
                    if d.z.abs() < 1e-15 {
                        return None;
                    }
                    let t = -o.z / d.z;
                    let p = o + d * t;
                    (t > EPS && p.x.abs() <= half_x && p.y.abs() <= half_y).then_some(t)
                }
                Geometry::Sphere { radius } => first_root(
                    quadratic(d.dot(&d), o.dot(&d), o.dot(&o) - radius * radius),
                    |_| true,
                ),
                Geometry::Cylinder { radius, height } => {
                    let a = d.x * d.x + d.y * d.y;
                    let h = o.x * d.x + o.y * d.y;
                    let c = o.x * o.x + o.y * o.y - radius * radius;
                    let roots = if a < 1e-15 { None } else { quadratic(a, h, c) };
                    first_root(roots, |t| (o.z + t * d.z).abs() <= height / 2.0)
                }
                Geometry::Cone { radius, height } => {
                    let k2 = (radius / height).powi(2);
                    let w = height - o.z;
                    let a = d.x * d.x + d.y * d.y - k2 * d.z * d.z;
                    let h = o.x * d.x + o.y * d.y + k2 * w * d.z;
                    let c = o.x * o.x + o.y * o.y - k2 * w * w;
                    first_root(quadratic(a, h, c), |t| {
                        let z = o.z + t * d.z;
                        (0.0..=height).contains(&z)
                    })
                }
                Geometry::Ground { .. } => unreachable!(),
            }
        }
    }?;
    Some(Hit {
        t,
        class: shape.kind(),
        instance: shape.instance,
    })
}
