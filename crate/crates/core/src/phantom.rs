//! Susceptibility phantoms: geometric primitives inside an ellipsoidal
//! brain mask, with an optional overwriting lesion.
//!
//! A phantom is described by a plain-text config of `key = value` lines plus
//! repeated `[sphere]` / `[cuboid]` / `[cylinder]` / `[lesion]` sections; see
//! [`PhantomSpec::to_config_string`] for the exact shape.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mask::ellipsoid_mask;
use crate::volume::Volume3;

/// Susceptibility magnitude cap, in ppm.
pub const MAX_ABS_CHI: f64 = 10.0;

/// Default lesion susceptibility, in ppm.
pub const LESION_CHI_PPM: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn parse(s: &str) -> Option<Axis> {
        match s {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// One susceptibility source. Coordinates and sizes are in voxels,
/// susceptibility in ppm.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
        chi: f64,
    },
    Cuboid {
        center: [f64; 3],
        half_size: [f64; 3],
        chi: f64,
    },
    Cylinder {
        center: [f64; 3],
        radius: f64,
        half_length: f64,
        axis: Axis,
        chi: f64,
    },
}

impl Primitive {
    fn chi(&self) -> f64 {
        match self {
            Primitive::Sphere { chi, .. }
            | Primitive::Cuboid { chi, .. }
            | Primitive::Cylinder { chi, .. } => *chi,
        }
    }

    fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        match self {
            Primitive::Sphere { center, radius, .. } => {
                let dx = x - center[0];
                let dy = y - center[1];
                let dz = z - center[2];
                dx * dx + dy * dy + dz * dz <= radius * radius
            }
            Primitive::Cuboid { center, half_size, .. } => {
                (x - center[0]).abs() <= half_size[0]
                    && (y - center[1]).abs() <= half_size[1]
                    && (z - center[2]).abs() <= half_size[2]
            }
            Primitive::Cylinder {
                center,
                radius,
                half_length,
                axis,
                ..
            } => {
                let d = [x - center[0], y - center[1], z - center[2]];
                let (along, r0, r1) = match axis {
                    Axis::X => (d[0], d[1], d[2]),
                    Axis::Y => (d[1], d[0], d[2]),
                    Axis::Z => (d[2], d[0], d[1]),
                };
                along.abs() <= *half_length && r0 * r0 + r1 * r1 <= radius * radius
            }
        }
    }

    /// Axis-aligned bounding box (min, max) in voxel coordinates.
    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            Primitive::Sphere { center, radius, .. } => (
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
            Primitive::Cuboid { center, half_size, .. } => (
                [
                    center[0] - half_size[0],
                    center[1] - half_size[1],
                    center[2] - half_size[2],
                ],
                [
                    center[0] + half_size[0],
                    center[1] + half_size[1],
                    center[2] + half_size[2],
                ],
            ),
            Primitive::Cylinder {
                center,
                radius,
                half_length,
                axis,
                ..
            } => {
                let (rx, ry, rz) = match axis {
                    Axis::X => (*half_length, *radius, *radius),
                    Axis::Y => (*radius, *half_length, *radius),
                    Axis::Z => (*radius, *radius, *half_length),
                };
                (
                    [center[0] - rx, center[1] - ry, center[2] - rz],
                    [center[0] + rx, center[1] + ry, center[2] + rz],
                )
            }
        }
    }

    fn validate(&self, dims: [usize; 3]) -> Result<()> {
        let degenerate = match self {
            Primitive::Sphere { radius, .. } => *radius <= 0.0,
            Primitive::Cuboid { half_size, .. } => half_size.iter().any(|&h| h <= 0.0),
            Primitive::Cylinder { radius, half_length, .. } => {
                *radius <= 0.0 || *half_length <= 0.0
            }
        };
        if degenerate {
            return Err(Error::DegeneratePrimitive(format!("{self:?}")));
        }
        if self.chi().abs() > MAX_ABS_CHI {
            return Err(Error::InvalidArgument(format!(
                "susceptibility magnitude {} exceeds {} ppm",
                self.chi(),
                MAX_ABS_CHI
            )));
        }
        let (lo, hi) = self.bounds();
        for i in 0..3 {
            if lo[i] < 0.0 || hi[i] > dims[i] as f64 {
                return Err(Error::InvalidArgument(format!(
                    "primitive does not fit inside dims {dims:?}: {self:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Lesion: a sphere whose susceptibility overwrites the tissue underneath.
#[derive(Debug, Clone, PartialEq)]
pub struct Lesion {
    pub center: [f64; 3],
    pub radius: f64,
    pub chi: f64,
}

/// Declarative phantom description.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub mask_center: [f64; 3],
    pub mask_radii: [f64; 3],
    pub primitives: Vec<Primitive>,
    pub lesion: Option<Lesion>,
    /// Extra primitives drawn at generation time from the caller's RNG.
    pub random_primitives: usize,
    /// Magnitude bound for randomly drawn susceptibilities, ppm.
    pub random_chi_max: f64,
}

impl PhantomSpec {
    /// Empty phantom with an ellipsoid mask filling most of the volume.
    pub fn new(dims: [usize; 3], voxel_size: [f64; 3]) -> Self {
        let center = [
            dims[0] as f64 / 2.0,
            dims[1] as f64 / 2.0,
            dims[2] as f64 / 2.0,
        ];
        let radii = [
            dims[0] as f64 * 0.36,
            dims[1] as f64 * 0.36,
            dims[2] as f64 * 0.33,
        ];
        Self {
            dims,
            voxel_size,
            mask_center: center,
            mask_radii: radii,
            primitives: Vec::new(),
            lesion: None,
            random_primitives: 0,
            random_chi_max: 0.2,
        }
    }

    /// Serializes to the plain-text config format parsed by [`PhantomSpec::parse`].
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        writeln!(s, "dims = {} {} {}", self.dims[0], self.dims[1], self.dims[2]).unwrap();
        writeln!(
            s,
            "voxel_size = {} {} {}",
            self.voxel_size[0], self.voxel_size[1], self.voxel_size[2]
        )
        .unwrap();
        writeln!(
            s,
            "mask_center = {} {} {}",
            self.mask_center[0], self.mask_center[1], self.mask_center[2]
        )
        .unwrap();
        writeln!(
            s,
            "mask_radii = {} {} {}",
            self.mask_radii[0], self.mask_radii[1], self.mask_radii[2]
        )
        .unwrap();
        if self.random_primitives > 0 {
            writeln!(s, "random_primitives = {}", self.random_primitives).unwrap();
            writeln!(s, "random_chi_max = {}", self.random_chi_max).unwrap();
        }
        for p in &self.primitives {
            match p {
                Primitive::Sphere { center, radius, chi } => {
                    writeln!(s, "\n[sphere]").unwrap();
                    writeln!(s, "center = {} {} {}", center[0], center[1], center[2]).unwrap();
                    writeln!(s, "radius = {radius}").unwrap();
                    writeln!(s, "chi = {chi}").unwrap();
                }
                Primitive::Cuboid { center, half_size, chi } => {
                    writeln!(s, "\n[cuboid]").unwrap();
                    writeln!(s, "center = {} {} {}", center[0], center[1], center[2]).unwrap();
                    writeln!(
                        s,
                        "half_size = {} {} {}",
                        half_size[0], half_size[1], half_size[2]
                    )
                    .unwrap();
                    writeln!(s, "chi = {chi}").unwrap();
                }
                Primitive::Cylinder {
                    center,
                    radius,
                    half_length,
                    axis,
                    chi,
                } => {
                    writeln!(s, "\n[cylinder]").unwrap();
                    writeln!(s, "center = {} {} {}", center[0], center[1], center[2]).unwrap();
                    writeln!(s, "radius = {radius}").unwrap();
                    writeln!(s, "half_length = {half_length}").unwrap();
                    writeln!(s, "axis = {}", axis.name()).unwrap();
                    writeln!(s, "chi = {chi}").unwrap();
                }
            }
        }
        if let Some(l) = &self.lesion {
            writeln!(s, "\n[lesion]").unwrap();
            writeln!(s, "center = {} {} {}", l.center[0], l.center[1], l.center[2]).unwrap();
            writeln!(s, "radius = {}", l.radius).unwrap();
            writeln!(s, "chi = {}", l.chi).unwrap();
        }
        s
    }

    /// Parses the plain-text config format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = PhantomSpec::new([1, 1, 1], [1.0; 3]);
        spec.mask_center = [f64::NAN; 3];
        let mut dims_seen = false;

        #[derive(Default)]
        struct Section {
            name: String,
            line: usize,
            center: Option<[f64; 3]>,
            radius: Option<f64>,
            half_size: Option<[f64; 3]>,
            half_length: Option<f64>,
            axis: Option<Axis>,
            chi: Option<f64>,
        }

        let mut pending: Option<Section> = None;

        fn finish(spec: &mut PhantomSpec, sec: Section) -> Result<()> {
            let line = sec.line;
            let need = |v: Option<f64>, what: &str| {
                v.ok_or_else(|| Error::ConfigParse {
                    line,
                    message: format!("[{}] missing `{}`", sec.name, what),
                })
            };
            let center = sec.center.ok_or_else(|| Error::ConfigParse {
                line,
                message: format!("[{}] missing `center`", sec.name),
            })?;
            match sec.name.as_str() {
                "sphere" => spec.primitives.push(Primitive::Sphere {
                    center,
                    radius: need(sec.radius, "radius")?,
                    chi: need(sec.chi, "chi")?,
                }),
                "cuboid" => spec.primitives.push(Primitive::Cuboid {
                    center,
                    half_size: sec.half_size.ok_or_else(|| Error::ConfigParse {
                        line,
                        message: "[cuboid] missing `half_size`".into(),
                    })?,
                    chi: need(sec.chi, "chi")?,
                }),
                "cylinder" => spec.primitives.push(Primitive::Cylinder {
                    center,
                    radius: need(sec.radius, "radius")?,
                    half_length: need(sec.half_length, "half_length")?,
                    axis: sec.axis.ok_or_else(|| Error::ConfigParse {
                        line,
                        message: "[cylinder] missing `axis`".into(),
                    })?,
                    chi: need(sec.chi, "chi")?,
                }),
                "lesion" => {
                    spec.lesion = Some(Lesion {
                        center,
                        radius: need(sec.radius, "radius")?,
                        chi: sec.chi.unwrap_or(LESION_CHI_PPM),
                    })
                }
                other => {
                    return Err(Error::ConfigParse {
                        line,
                        message: format!("unknown section [{other}]"),
                    })
                }
            }
            Ok(())
        }

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::ConfigParse {
                    line,
                    message: "unterminated section header".into(),
                })?;
                if let Some(sec) = pending.take() {
                    finish(&mut spec, sec)?;
                }
                pending = Some(Section {
                    name: name.trim().to_string(),
                    line,
                    ..Section::default()
                });
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigParse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let floats = || -> Result<Vec<f64>> {
                value
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::ConfigParse {
                            line,
                            message: format!("bad number `{t}`"),
                        })
                    })
                    .collect()
            };
            let triple = || -> Result<[f64; 3]> {
                let v = floats()?;
                if v.len() != 3 {
                    return Err(Error::ConfigParse {
                        line,
                        message: format!("`{key}` expects 3 values"),
                    });
                }
                Ok([v[0], v[1], v[2]])
            };
            let scalar = || -> Result<f64> {
                let v = floats()?;
                if v.len() != 1 {
                    return Err(Error::ConfigParse {
                        line,
                        message: format!("`{key}` expects 1 value"),
                    });
                }
                Ok(v[0])
            };

            if let Some(sec) = pending.as_mut() {
                match key {
                    "center" => sec.center = Some(triple()?),
                    "radius" => sec.radius = Some(scalar()?),
                    "half_size" => sec.half_size = Some(triple()?),
                    "half_length" => sec.half_length = Some(scalar()?),
                    "axis" => {
                        sec.axis = Some(Axis::parse(value).ok_or_else(|| Error::ConfigParse {
                            line,
                            message: format!("bad axis `{value}`"),
                        })?)
                    }
                    "chi" => sec.chi = Some(scalar()?),
                    other => {
                        return Err(Error::ConfigParse {
                            line,
                            message: format!("unknown key `{other}` in [{}]", sec.name),
                        })
                    }
                }
            } else {
                match key {
                    "dims" => {
                        let t = triple()?;
                        spec.dims = [t[0] as usize, t[1] as usize, t[2] as usize];
                        dims_seen = true;
                        // Defaults derived from dims unless stated explicitly.
                        let d = PhantomSpec::new(spec.dims, spec.voxel_size);
                        if spec.mask_center[0].is_nan() {
                            spec.mask_center = d.mask_center;
                            spec.mask_radii = d.mask_radii;
                        }
                    }
                    "voxel_size" => spec.voxel_size = triple()?,
                    "mask_center" => spec.mask_center = triple()?,
                    "mask_radii" => spec.mask_radii = triple()?,
                    "random_primitives" => spec.random_primitives = scalar()? as usize,
                    "random_chi_max" => spec.random_chi_max = scalar()?,
                    other => {
                        return Err(Error::ConfigParse {
                            line,
                            message: format!("unknown key `{other}`"),
                        })
                    }
                }
            }
        }
        if let Some(sec) = pending.take() {
            finish(&mut spec, sec)?;
        }
        if !dims_seen {
            return Err(Error::ConfigParse {
                line: 0,
                message: "missing `dims`".into(),
            });
        }
        Ok(spec)
    }
}

fn draw_primitive(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Primitive {
    let chi = rng.gen_range(-spec.random_chi_max..=spec.random_chi_max);
    // Centers concentrate inside the mask so sources contribute to the label.
    let center = [
        spec.mask_center[0] + rng.gen_range(-0.7..0.7) * spec.mask_radii[0],
        spec.mask_center[1] + rng.gen_range(-0.7..0.7) * spec.mask_radii[1],
        spec.mask_center[2] + rng.gen_range(-0.7..0.7) * spec.mask_radii[2],
    ];
    let max_r = spec.mask_radii.iter().cloned().fold(f64::MAX, f64::min) * 0.45;
    match rng.gen_range(0u32..3) {
        0 => Primitive::Sphere {
            center,
            radius: rng.gen_range(1.5..max_r.max(1.6)),
            chi,
        },
        1 => Primitive::Cuboid {
            center,
            half_size: [
                rng.gen_range(1.0..max_r.max(1.1)),
                rng.gen_range(1.0..max_r.max(1.1)),
                rng.gen_range(1.0..max_r.max(1.1)),
            ],
            chi,
        },
        _ => Primitive::Cylinder {
            center,
            radius: rng.gen_range(1.0..(max_r * 0.8).max(1.1)),
            half_length: rng.gen_range(1.5..max_r.max(1.6)),
            axis: match rng.gen_range(0u32..3) {
                0 => Axis::X,
                1 => Axis::Y,
                _ => Axis::Z,
            },
            chi,
        },
    }
}

/// Rasterizes the phantom: susceptibility label (ppm) and binary brain mask.
///
/// Fixed primitives superpose; randomly drawn ones (when requested) are
/// clipped to the volume; the lesion overwrites whatever lies underneath it.
pub fn generate_phantom(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Result<(Volume3, Volume3)> {
    for p in &spec.primitives {
        p.validate(spec.dims)?;
    }
    if let Some(l) = &spec.lesion {
        if l.radius <= 0.0 {
            return Err(Error::DegeneratePrimitive("lesion with zero radius".into()));
        }
        if l.chi.abs() > MAX_ABS_CHI {
            return Err(Error::InvalidArgument(format!(
                "lesion susceptibility {} exceeds {} ppm",
                l.chi, MAX_ABS_CHI
            )));
        }
    }
    let mask = ellipsoid_mask(spec.dims, spec.voxel_size, spec.mask_center, spec.mask_radii)?;

    let mut primitives = spec.primitives.clone();
    for _ in 0..spec.random_primitives {
        primitives.push(draw_primitive(spec, rng));
    }

    let [nx, ny, nz] = spec.dims;
    let mut chi = vec![0.0; nx * ny * nz];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let idx = x + nx * (y + ny * z);
                if mask.data()[idx] == 0.0 {
                    continue;
                }
                let (fx, fy, fz) = (x as f64, y as f64, z as f64);
                let mut v = 0.0;
                for p in &primitives {
                    if p.contains(fx, fy, fz) {
                        v += p.chi();
                    }
                }
                if let Some(l) = &spec.lesion {
                    let dx = fx - l.center[0];
                    let dy = fy - l.center[1];
                    let dz = fz - l.center[2];
                    if dx * dx + dy * dy + dz * dz <= l.radius * l.radius {
                        v = l.chi;
                    }
                }
                chi[idx] = v;
            }
        }
    }
    Ok((
        Volume3::from_parts(spec.dims, spec.voxel_size, chi),
        mask,
    ))
}

/// Binary mask of the lesion region clipped to the brain mask, for ROI stats.
pub fn lesion_mask(spec: &PhantomSpec, mask: &Volume3) -> Option<Volume3> {
    let lesion = spec.lesion.as_ref()?;
    let out = Volume3::from_fn(spec.dims, spec.voxel_size, |x, y, z| {
        let dx = x as f64 - lesion.center[0];
        let dy = y as f64 - lesion.center[1];
        let dz = z as f64 - lesion.center[2];
        let inside = dx * dx + dy * dy + dz * dz <= lesion.radius * lesion.radius;
        if inside && mask.at(x, y, z) != 0.0 {
            1.0
        } else {
            0.0
        }
    })
    .ok()?;
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, StreamDomain};

    fn rng() -> ChaCha8Rng {
        stream_rng(7, StreamDomain::PhantomGen, 0)
    }

    #[test]
    fn empty_spec_gives_zero_chi() {
        let spec = PhantomSpec::new([16, 16, 16], [1.0; 3]);
        let (chi, mask) = generate_phantom(&spec, &mut rng()).unwrap();
        assert_eq!(chi.norm_l2(), 0.0);
        assert!(mask.count_nonzero() > 0);
    }

    #[test]
    fn sphere_inside_reads_value() {
        let mut spec = PhantomSpec::new([32, 32, 32], [1.0; 3]);
        spec.primitives.push(Primitive::Sphere {
            center: [16.0, 16.0, 16.0],
            radius: 4.0,
            chi: 0.1,
        });
        let (chi, _) = generate_phantom(&spec, &mut rng()).unwrap();
        assert!((chi.at(16, 16, 16) - 0.1).abs() < 1e-15);
        assert_eq!(chi.at(2, 2, 2), 0.0);
    }

    #[test]
    fn lesion_overwrites_tissue() {
        let mut spec = PhantomSpec::new([32, 32, 32], [1.0; 3]);
        spec.primitives.push(Primitive::Sphere {
            center: [16.0, 16.0, 16.0],
            radius: 6.0,
            chi: 0.1,
        });
        spec.lesion = Some(Lesion {
            center: [16.0, 16.0, 16.0],
            radius: 2.0,
            chi: LESION_CHI_PPM,
        });
        let (chi, _) = generate_phantom(&spec, &mut rng()).unwrap();
        assert!((chi.at(16, 16, 16) - 0.8).abs() < 1e-15);
        // Outside lesion, inside sphere: tissue value survives.
        assert!((chi.at(16, 16, 20) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn degenerate_primitive_rejected() {
        let mut spec = PhantomSpec::new([16, 16, 16], [1.0; 3]);
        spec.primitives.push(Primitive::Sphere {
            center: [8.0, 8.0, 8.0],
            radius: 0.0,
            chi: 0.1,
        });
        assert!(matches!(
            generate_phantom(&spec, &mut rng()),
            Err(Error::DegeneratePrimitive(_))
        ));
    }

    #[test]
    fn oversized_primitive_rejected() {
        let mut spec = PhantomSpec::new([16, 16, 16], [1.0; 3]);
        spec.primitives.push(Primitive::Sphere {
            center: [8.0, 8.0, 8.0],
            radius: 20.0,
            chi: 0.1,
        });
        assert!(generate_phantom(&spec, &mut rng()).is_err());
    }

    #[test]
    fn config_round_trip() {
        let mut spec = PhantomSpec::new([32, 32, 32], [1.0; 3]);
        spec.primitives.push(Primitive::Sphere {
            center: [16.0, 12.0, 16.0],
            radius: 4.0,
            chi: 0.1,
        });
        spec.primitives.push(Primitive::Cuboid {
            center: [20.0, 20.0, 16.0],
            half_size: [2.0, 3.0, 2.0],
            chi: -0.05,
        });
        spec.primitives.push(Primitive::Cylinder {
            center: [12.0, 20.0, 16.0],
            radius: 2.0,
            half_length: 4.0,
            axis: Axis::Z,
            chi: 0.2,
        });
        spec.lesion = Some(Lesion {
            center: [16.0, 16.0, 20.0],
            radius: 2.0,
            chi: 0.8,
        });
        let text = spec.to_config_string();
        let parsed = PhantomSpec::parse(&text).unwrap();
        assert_eq!(parsed, spec);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "dims = 8 8 8\nvoxel_size = 1 1 oops\n";
        match PhantomSpec::parse(text) {
            Err(Error::ConfigParse { line: 2, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn random_primitives_are_deterministic() {
        let mut spec = PhantomSpec::new([24, 24, 24], [1.0; 3]);
        spec.random_primitives = 4;
        let (a, _) = generate_phantom(&spec, &mut rng()).unwrap();
        let (b, _) = generate_phantom(&spec, &mut rng()).unwrap();
        assert_eq!(a.data(), b.data());
    }
}
