//! Randomised scene layouts and train/val/test datasets of scans.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    mirror_cloud, save_scene, simulate_scan, Geometry, LidarSpec, MirrorAxis, SceneSpec, ShapeSpec,
};
use crate::cloud::{load_cloud, save_cloud, StructuredCloud};
use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub scenes: usize,
    /// Sensor positions per scene.
    pub shifts: usize,
    /// Spacing of the sensor-position grid in metres.
    pub shift_step: f64,
    pub sensor_height: f64,
    pub layout: SceneLayout,
    pub train_frac: f64,
    pub val_frac: f64,
    /// Add x, y and xy mirrored copies of every training scan.
    pub augment: bool,
    pub lidar: LidarSpec,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            scenes: 24,
            shifts: 12,
            shift_step: 1.5,
            sensor_height: 10.0,
            layout: SceneLayout::default(),
            train_frac: 0.6,
            val_frac: 0.1,
            augment: true,
            lidar: LidarSpec::default(),
            seed: 0,
        }
    }
}

impl DatasetConfig {
    fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.shifts == 0 {
            return Err(Error::Param(
                "dataset needs at least one scene and one shift".into(),
            ));
        }
        let ok = |f: f64| (0.0..=1.0).contains(&f);
        if !(ok(self.train_frac) && ok(self.val_frac) && self.train_frac + self.val_frac <= 1.0) {
            return Err(Error::Param(
                "split fractions must lie in [0, 1] and sum to at most 1".into(),
            ));
        }
        if !(self.shift_step >= 0.0 && self.sensor_height > 0.0) {
            return Err(Error::Param(
                "shift step must be >= 0 and sensor height > 0".into(),
            ));
        }
        self.lidar.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Param(format!("unknown split '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mirror {
    None,
    X,
    Y,
    XY,
}

impl Mirror {
    pub const ALL: [Mirror; 4] = [Mirror::None, Mirror::X, Mirror::Y, Mirror::XY];

    pub fn name(self) -> &'static str {
        match self {
            Mirror::None => "none",
            Mirror::X => "x",
            Mirror::Y => "y",
            Mirror::XY => "xy",
        }
    }

    pub fn apply(self, cloud: &StructuredCloud) -> StructuredCloud {
        match self {
            Mirror::None => cloud.clone(),
            Mirror::X => mirror_cloud(cloud, MirrorAxis::X),
            Mirror::Y => mirror_cloud(cloud, MirrorAxis::Y),
            Mirror::XY => mirror_cloud(&mirror_cloud(cloud, MirrorAxis::X), MirrorAxis::Y),
        }
    }
}

impl fmt::Display for Mirror {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mirror {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mirror::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Param(format!("unknown mirror '{s}'")))
    }
}

/// One simulated scan of the dataset before augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub scene: usize,
    pub shift: usize,
    pub split: Split,
    pub spec: SceneSpec,
}

impl DatasetItem {
    pub fn file_name(&self) -> String {
        format!("scene{:03}_shift{:02}.slc", self.scene, self.shift)
    }

    /// The scan together with its mirrored copies when augmentation applies.
    pub fn mirrors(&self, augment: bool) -> &'static [Mirror] {
        if augment && self.split == Split::Train {
            &Mirror::ALL
        } else {
            &Mirror::ALL[..1]
        }
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over the combined key
    let mut z =
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sensor offsets on a square grid, nearest first.
fn shift_offsets(count: usize, step: f64) -> Vec<(f64, f64)> {
    let reach = (count as f64).sqrt().ceil() as i64 + 1;
    let mut cells: Vec<(i64, i64)> = (-reach..=reach)
        .flat_map(|i| (-reach..=reach).map(move |j| (i, j)))
        .collect();
    cells.sort_by(|a, b| {
        let key =
            |&(i, j): &(i64, i64)| (i * i + j * j, (j as f64).atan2(i as f64).rem_euclid(TAU));
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    cells
        .into_iter()
        .take(count)
        .map(|(i, j)| (i as f64 * step, j as f64 * step))
        .collect()
}

/// Extent and object statistics of randomly generated scenes: a walled
/// square yard with a ground patch up to the walls and free-standing
/// objects inside. Lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneLayout {
    /// Range of the yard half side.
    pub yard_half: (f64, f64),
    pub wall_height: (f64, f64),
    /// Range of object distances from the yard centre.
    pub object_distance: (f64, f64),
    /// Multiplier on the base object sizes.
    pub object_scale: f64,
    /// Inclusive range of the object count.
    pub objects: (usize, usize),
}

impl Default for SceneLayout {
    fn default() -> Self {
        SceneLayout {
            yard_half: (35.0, 45.0),
            wall_height: (6.0, 14.0),
            object_distance: (15.0, 32.0),
            object_scale: 2.5,
            objects: (10, 14),
        }
    }
}

/// A random scene: ground patch (instance 1), four yard walls, then the
/// objects, centred on the origin with the ground at z = 0.
pub fn random_scene<R: Rng>(rng: &mut R, layout: &SceneLayout) -> Vec<ShapeSpec> {
    let half = rng.random_range(layout.yard_half.0..=layout.yard_half.1);
    let yaw0 = rng.random_range(0.0..FRAC_PI_2);
    let mut shapes = vec![ShapeSpec::new(
        1,
        Vec3::zeros(),
        [0.0; 3],
        Geometry::Ground {
            half_size: half * 1.05,
        },
    )];
    // the ground patch is axis aligned; walls rotate with the yard, so the
    // patch is sized to reach under every wall
    shapes[0].geometry = Geometry::Ground {
        half_size: half * std::f64::consts::SQRT_2,
    };
    for w in 0..4 {
        let az = yaw0 + w as f64 * FRAC_PI_2;
        let height = rng.random_range(layout.wall_height.0..=layout.wall_height.1);
        // a square yard: each wall spans the full side, corners overlap slightly
        shapes.push(ShapeSpec::new(
            2 + w,
            Vec3::new(half * az.cos(), half * az.sin(), height / 2.0),
            [FRAC_PI_2, 0.0, az + FRAC_PI_2],
            Geometry::Plane {
                half_x: half * 1.02,
                half_y: height / 2.0,
            },
        ));
    }

    let k = layout.object_scale;
    let mut placed: Vec<(f64, f64, f64)> = Vec::new();
    let mut try_place = |rng: &mut R, radius: f64| -> Option<(f64, f64)> {
        for _ in 0..50 {
            let d = rng.random_range(layout.object_distance.0..layout.object_distance.1);
            let a = rng.random_range(0.0..TAU);
            let (x, y) = (d * a.cos(), d * a.sin());
            let clear = placed.iter().all(|&(px, py, pr)| {
                ((px - x).powi(2) + (py - y).powi(2)).sqrt() > pr + radius + k
            });
            if clear {
                placed.push((x, y, radius));
                return Some((x, y));
            }
        }
        None
    };

    let mut next_id = 6u32;
    let n_objects = rng.random_range(layout.objects.0..=layout.objects.1);
    for i in 0..n_objects {
        let kind = (i + rng.random_range(0..4)) % 4;
        let shape = match kind {
            0 => {
                let half_w = k * rng.random_range(1.0..3.5);
                let half_h = k * rng.random_range(0.8..2.0);
                let Some((x, y)) = try_place(rng, half_w) else {
                    continue;
                };
                let tilt = if rng.random_bool(0.3) {
                    rng.random_range(-0.5..0.5)
                } else {
                    0.0
                };
                ShapeSpec::new(
                    next_id,
                    Vec3::new(x, y, half_h),
                    [FRAC_PI_2 + tilt, 0.0, rng.random_range(0.0..PI)],
                    Geometry::Plane {
                        half_x: half_w,
                        half_y: half_h,
                    },
                )
            }
            1 => {
                let radius = k * rng.random_range(0.4..1.5);
                let height = k * rng.random_range(1.5..4.0);
                let Some((x, y)) = try_place(rng, radius) else {
                    continue;
                };
                let tilt = if rng.random_bool(0.25) {
                    rng.random_range(-0.4..0.4)
                } else {
                    0.0
                };
                ShapeSpec::new(
                    next_id,
                    Vec3::new(x, y, height / 2.0),
                    [tilt, 0.0, rng.random_range(0.0..TAU)],
                    Geometry::Cylinder { radius, height },
                )
            }
            2 => {
                let radius = k * rng.random_range(0.6..1.8);
                let Some((x, y)) = try_place(rng, radius) else {
                    continue;
                };
                let z = radius * rng.random_range(0.6..1.3);
                ShapeSpec::new(
                    next_id,
                    Vec3::new(x, y, z),
                    [0.0; 3],
                    Geometry::Sphere { radius },
                )
            }
            _ => {
                let radius = k * rng.random_range(0.8..2.0);
                let height = radius * rng.random_range(1.2..2.5);
                let Some((x, y)) = try_place(rng, radius) else {
                    continue;
                };
                ShapeSpec::new(
                    next_id,
                    Vec3::new(x, y, 0.0),
                    [0.0, 0.0, rng.random_range(0.0..TAU)],
                    Geometry::Cone { radius, height },
                )
            }
        };
        shapes.push(shape);
        next_id += 1;
    }
    shapes
}

/// Scenes, sensor shifts and split assignment, without simulating.
///
/// Splits are drawn per scan after a seeded shuffle, `train_frac` and
/// `val_frac` of them rounded to the nearest count.
pub fn plan_dataset(config: &DatasetConfig) -> Result<Vec<DatasetItem>> {
    config.validate()?;
    let offsets = shift_offsets(config.shifts, config.shift_step);
    let mut items = Vec::with_capacity(config.scenes * config.shifts);
    for scene in 0..config.scenes {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, scene as u64, u64::MAX));
        let shapes = random_scene(&mut rng, &config.layout);
        for (shift, &(dx, dy)) in offsets.iter().enumerate() {
            let lidar = LidarSpec {
                origin: Vec3::new(dx, dy, config.sensor_height),
                ..config.lidar.clone()
            };
            items.push(DatasetItem {
                scene,
                shift,
                split: Split::Test,
                spec: SceneSpec {
                    shapes: shapes.clone(),
                    lidar,
                    seed: mix(config.seed, scene as u64, shift as u64),
                },
            });
        }
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(
        config.seed,
        u64::MAX,
        u64::MAX,
    )));
    let n = items.len() as f64;
    let n_train = (config.train_frac * n).round() as usize;
    let n_val = ((config.val_frac * n).round() as usize).min(items.len() - n_train);
    for (rank, &i) in order.iter().enumerate() {
        items[i].split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Cloud file, relative to the manifest directory.
    pub path: PathBuf,
    pub split: Split,
    pub scene: usize,
    pub shift: usize,
    pub mirror: Mirror,
}

/// Index of a generated dataset. Mirrored entries point at the unmirrored
/// file and are mirrored on load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<StructuredCloud> {
        let cloud = load_cloud(self.root.join(&entry.path))?;
        Ok(entry.mirror.apply(&cloud))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "# path split scene shift mirror")?;
            for e in &self.entries {
                writeln!(
                    w,
                    "{} {} {} {} {}",
                    e.path.display(),
                    e.split,
                    e.scene,
                    e.shift,
                    e.mirror
                )?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }

    /// Read a manifest; entry paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |msg: String| Error::parse(path, n + 1, msg);
            let f: Vec<&str> = body.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", f.len())));
            }
            entries.push(ManifestEntry {
                path: PathBuf::from(f[0]),
                split: f[1].parse().map_err(|e: Error| err(e.to_string()))?,
                scene: f[2]
                    .parse()
                    .map_err(|_| err(format!("bad scene index '{}'", f[2])))?,
                shift: f[3]
                    .parse()
                    .map_err(|_| err(format!("bad shift index '{}'", f[3])))?,
                mirror: f[4].parse().map_err(|e: Error| err(e.to_string()))?,
            });
        }
        Ok(Manifest {
            root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            entries,
        })
    }
}

/// Simulate every planned scan into `out_dir`, writing `scenes/`,
/// `clouds/` and `manifest.txt`.
pub fn generate_dataset(config: &DatasetConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out = out_dir.as_ref();
    let items = plan_dataset(config)?;
    for sub in ["scenes", "clouds"] {
        fs::create_dir_all(out.join(sub)).map_err(|e| Error::io(out.join(sub), e))?;
    }
    let mut entries = Vec::new();
    for item in &items {
        if item.shift == 0 {
            save_scene(
                &item.spec,
                out.join("scenes")
                    .join(format!("scene{:03}.scene", item.scene)),
            )?;
        }
        let cloud = simulate_scan(&item.spec)?;
        let rel = Path::new("clouds").join(item.file_name());
        save_cloud(&cloud, out.join(&rel))?;
        for &mirror in item.mirrors(config.augment) {
            entries.push(ManifestEntry {
                path: rel.clone(),
                split: item.split,
                scene: item.scene,
                shift: item.shift,
                mirror,
            });
        }
    }
    let manifest = Manifest {
        root: out.to_path_buf(),
        entries,
    };
    manifest.save(out.join("manifest.txt"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifts_start_at_origin_and_are_distinct() {
        let o = shift_offsets(12, 1.5);
        assert_eq!(o.len(), 12);
        assert_eq!(o[0], (0.0, 0.0));
        for i in 0..o.len() {
            for j in i + 1..o.len() {
                assert_ne!(o[i], o[j]);
            }
        }
    }

    #[test]
    fn plan_is_deterministic_with_requested_splits() {
        let config = DatasetConfig::default();
        let a = plan_dataset(&config).unwrap();
        let b = plan_dataset(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 288);
        let count = |s| a.iter().filter(|i| i.split == s).count();
        assert_eq!(
            (count(Split::Train), count(Split::Val), count(Split::Test)),
            (173, 29, 86)
        );
        for item in &a {
            item.spec.validate().unwrap();
        }
        let other = plan_dataset(&DatasetConfig { seed: 1, ..config }).unwrap();
        assert_ne!(a[0].spec.shapes, other[0].spec.shapes);
    }

    #[test]
    fn scenes_contain_every_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut kinds = std::collections::HashSet::new();
        for _ in 0..5 {
            kinds.extend(
                random_scene(&mut rng, &SceneLayout::default())
                    .iter()
                    .map(|s| s.kind()),
            );
        }
        assert_eq!(kinds.len(), 5);
    }

    #[test]
    fn generated_manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let config = DatasetConfig {
            scenes: 2,
            shifts: 2,
            lidar: LidarSpec {
                n_beams: 4,
                horizontal_step: 10f64.to_radians(),
                ..LidarSpec::default()
            },
            ..DatasetConfig::default()
        };
        let manifest = generate_dataset(&config, dir.path()).unwrap();
        let train = manifest.split(Split::Train).count();
        let n_train_scans = plan_dataset(&config)
            .unwrap()
            .iter()
            .filter(|i| i.split == Split::Train)
            .count();
        assert_eq!(train, 4 * n_train_scans);
        let back = Manifest::load(dir.path().join("manifest.txt")).unwrap();
        assert_eq!(back, manifest);
        for e in &back.entries {
            let cloud = back.load_entry(e).unwrap();
            assert_eq!((cloud.rows(), cloud.cols()), (4, 36));
        }
    }
}
