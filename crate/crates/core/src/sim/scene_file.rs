//! Plain-text scene descriptions.
//!
//! ```text
//! seed <u64>
//! lidar <beams> <theta_min> <theta_max> <step> <r_min> <r_max> <sigma> <ox> <oy> <oz>
//! <kind> <instance> <x> <y> <z> <roll> <pitch> <yaw> [size...]
//! ```
//!
//! Angles are radians. Kinds: `ground [half_size]`, `plane <half_x> <half_y>`,
//! `sphere <radius>`, `cylinder <radius> <height>`, `cone <radius> <height>`.
//! Missing `seed`/`lidar` lines fall back to 0 and the default sensor.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Geometry, LidarSpec, SceneSpec, ShapeSpec};
use crate::error::{Error, Result};
use crate::Vec3;

pub fn save_scene(scene: &SceneSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_scene(scene, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneSpec> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_scene(BufReader::new(file), path)
}

pub fn write_scene<W: Write>(scene: &SceneSpec, w: &mut W) -> std::io::Result<()> {
    let l = &scene.lidar;
    writeln!(w, "seed {}", scene.seed)?;
    writeln!(
        w,
        "lidar {} {} {} {} {} {} {} {} {} {}",
        l.n_beams,
        l.theta_min,
        l.theta_max,
        l.horizontal_step,
        l.r_min,
        l.r_max,
        l.noise_sigma,
        l.origin.x,
        l.origin.y,
        l.origin.z
    )?;
    for s in &scene.shapes {
        let (kind, sizes): (&str, Vec<f64>) = match s.geometry {
            Geometry::Ground { half_size } if half_size.is_infinite() => ("ground", vec![]),
            Geometry::Ground { half_size } => ("ground", vec![half_size]),
            Geometry::Plane { half_x, half_y } => ("plane", vec![half_x, half_y]),
            Geometry::Sphere { radius } => ("sphere", vec![radius]),
            Geometry::Cylinder { radius, height } => ("cylinder", vec![radius, height]),
            Geometry::Cone { radius, height } => ("cone", vec![radius, height]),
        };
        let [roll, pitch, yaw] = s.orientation;
        write!(
            w,
            "{kind} {} {} {} {} {roll} {pitch} {yaw}",
            s.instance, s.position.x, s.position.y, s.position.z
        )?;
        for v in sizes {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_scene<R: BufRead>(reader: R, path: impl AsRef<Path>) -> Result<SceneSpec> {
    let path = path.as_ref();
    let mut scene = SceneSpec {
        shapes: Vec::new(),
        lidar: LidarSpec::default(),
        seed: 0,
    };
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |msg: String| Error::parse(path, line_no, msg);
        let mut fields = body.split_whitespace();
        let kind = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        let floats = |want: usize| -> Result<Vec<f64>> {
            if rest.len() != want {
                return Err(err(format!(
                    "{kind}: expected {want} fields, found {}",
                    rest.len()
                )));
            }
            rest.iter()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| err(format!("bad number '{t}'")))
                })
                .collect()
        };
        match kind {
            "seed" => {
                if rest.len() != 1 {
                    return Err(err("seed: expected one value".into()));
                }
                scene.seed = rest[0]
                    .parse()
                    .map_err(|_| err(format!("bad seed '{}'", rest[0])))?;
            }
            "lidar" => {
                let v = floats(10)?;
                if v[0].fract() != 0.0 || v[0] < 0.0 {
                    return Err(err("lidar: beam count must be a whole number".into()));
                }
                scene.lidar = LidarSpec {
                    n_beams: v[0] as usize,
                    theta_min: v[1],
                    theta_max: v[2],
                    horizontal_step: v[3],
                    r_min: v[4],
                    r_max: v[5],
                    noise_sigma: v[6],
                    origin: Vec3::new(v[7], v[8], v[9]),
                };
            }
            "ground" | "plane" | "sphere" | "cylinder" | "cone" => {
                let n_sizes = match kind {
                    // bounded ground takes an optional half size
                    "ground" => rest.len().saturating_sub(7).min(1),
                    "sphere" => 1,
                    _ => 2,
                };
                let Some((inst, _)) = rest.split_first() else {
                    return Err(err(format!("{kind}: missing instance id")));
                };
                let instance: u32 = inst
                    .parse()
                    .map_err(|_| err(format!("bad instance id '{inst}'")))?;
                let rest = &rest[1..];
                if rest.len() != 6 + n_sizes {
                    return Err(err(format!(
                        "{kind}: expected {} fields after the id, found {}",
                        6 + n_sizes,
                        rest.len()
                    )));
                }
                let v: Vec<f64> = rest
                    .iter()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| err(format!("bad number '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                let geometry = match kind {
                    "ground" => Geometry::Ground {
                        half_size: v.get(6).copied().unwrap_or(f64::INFINITY),
                    },
                    "plane" => Geometry::Plane {
                        half_x: v[6],
                        half_y: v[7],
                    },
                    "sphere" => Geometry::Sphere { radius: v[6] },
                    "cylinder" => Geometry::Cylinder {
                        radius: v[6],
                        height: v[7],
                    },
                    _ => Geometry::Cone {
                        radius: v[6],
                        height: v[7],
                    },
                };
                scene.shapes.push(ShapeSpec::new(
                    instance,
                    Vec3::new(v[0], v[1], v[2]),
                    [v[3], v[4], v[5]],
                    geometry,
                ));
            }
            other => return Err(err(format!("unknown record '{other}'"))),
        }
    }
    scene.validate().map_err(|e| match e {
        Error::Scene(msg) => Error::parse(path, 0, msg),
        e => e,
    })?;
    Ok(scene)
}
