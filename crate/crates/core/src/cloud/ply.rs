use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{SemanticClass, StructuredCloud};
use crate::error::{Error, Result};

/// Writes every valid point as an ASCII PLY vertex coloured by its class.
/// `classes` is indexed by grid cell; entries for invalid cells are ignored.
pub fn export_ply(
    cloud: &StructuredCloud,
    classes: &[SemanticClass],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if classes.len() != cloud.len() {
        return Err(Error::Param(format!(
            "{} classes for {} cells",
            classes.len(),
            cloud.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ply(cloud, classes, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_ply<W: Write>(
    cloud: &StructuredCloud,
    classes: &[SemanticClass],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.valid_count())?;
    for prop in ["x", "y", "z"] {
        writeln!(w, "property float {prop}")?;
    }
    for prop in ["red", "green", "blue"] {
        writeln!(w, "property uchar {prop}")?;
    }
    writeln!(w, "end_header")?;
    for (idx, class) in classes.iter().enumerate() {
        if let Some(p) = cloud.position(idx) {
            let [r, g, b] = class.color();
            writeln!(w, "{:.6} {:.6} {:.6} {r} {g} {b}", p.x, p.y, p.z)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SphericalPoint;

    fn render(cloud: &StructuredCloud, classes: &[SemanticClass]) -> String {
        let mut buf = Vec::new();
        write_ply(cloud, classes, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    fn vertex_count(ply: &str) -> usize {
        let line = ply
            .lines()
            .find(|l| l.starts_with("element vertex"))
            .unwrap();
        line.rsplit(' ').next().unwrap().parse().unwrap()
    }

    #[test]
    fn single_plane_point_is_red() {
        let mut pts = vec![SphericalPoint::new(0.0, 0.0, 0.0); 4];
        pts[2] = SphericalPoint::new(0.0, 0.0, 5.0);
        let cloud = StructuredCloud::new(2, 2, pts).unwrap();
        let ply = render(
            &cloud,
            &[
                SemanticClass::Cone,
                SemanticClass::Cone,
                SemanticClass::Plane,
                SemanticClass::Cone,
            ],
        );
        assert_eq!(vertex_count(&ply), 1);
        let body: Vec<_> = ply
            .lines()
            .skip_while(|l| *l != "end_header")
            .skip(1)
            .collect();
        assert_eq!(body, vec!["5.000000 0.000000 0.000000 255 0 0"]);
    }

    #[test]
    fn empty_cloud_is_valid_ply() {
        let cloud =
            StructuredCloud::new(1, 3, vec![SphericalPoint::new(0.0, 0.0, 0.0); 3]).unwrap();
        let ply = render(&cloud, &[SemanticClass::Plane; 3]);
        assert_eq!(vertex_count(&ply), 0);
        assert!(ply.ends_with("end_header\n"));
    }

    #[test]
    fn full_grid_vertex_count() {
        let pts = (0..32 * 360)
            .map(|i| SphericalPoint::new(-0.01 * (i / 360) as f64, (i % 360) as f64 * 0.0174, 10.0))
            .collect();
        let cloud = StructuredCloud::new(32, 360, pts).unwrap();
        let ply = render(&cloud, &vec![SemanticClass::Sphere; 32 * 360]);
        assert_eq!(vertex_count(&ply), 11520);
        assert_eq!(
            ply.lines().skip_while(|l| *l != "end_header").count() - 1,
            11520
        );
    }
}
