//! Template libraries and their binary file format.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "TUBT" | version u32
//! n0 u32 | spread u32 | magnitude_threshold f32
//! fx fy cx cy f64 | width height u32
//! template count u32
//! per template:
//!   rotation w x y z f64 | distance f64 | in_plane_deg f64
//!   anchor x y i32
//!   feature count u32, then dx i16 | dy i16 | bin u8 each
//!   silhouette run count u32, then runs u32 (column-major, background first)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::{Quaternion, UnitQuaternion};
use sha2::{Digest, Sha256};

use crate::dataset::rle::{self, Rle};
use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::geometry::{
    build_library, CameraIntrinsics, Feature, Template, TemplateParams, TubeModel, ViewSampling, Viewpoint,
};

const MAGIC: &[u8; 4] = b"TUBT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateLibrary {
    pub features: FeatureParams,
    pub intrinsics: CameraIntrinsics,
    pub templates: Vec<Template>,
}

impl TemplateLibrary {
    /// Renders templates for every sampled viewpoint. Returns the library
    /// and the number of viewpoints that produced no template.
    pub fn generate(
        model: &TubeModel,
        sampling: &ViewSampling,
        intrinsics: &CameraIntrinsics,
        features: &FeatureParams,
        limits: &TemplateParams,
    ) -> Result<(Self, usize)> {
        let (templates, skipped) = build_library(model, sampling, intrinsics, features, limits)?;
        if templates.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        Ok((
            TemplateLibrary {
                features: features.clone(),
                intrinsics: *intrinsics,
                templates,
            },
            skipped,
        ))
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let io = |e| Error::LibraryFormat(format!("write failed: {e}"));
        let fp = &self.features;
        let k = &self.intrinsics;
        let check = |v: i32, what: &str| {
            i16::try_from(v).map_err(|_| Error::LibraryFormat(format!("{what} offset {v} exceeds i16")))
        };
        w.write_all(MAGIC).map_err(io)?;
        w.write_u32::<LE>(VERSION).map_err(io)?;
        w.write_u32::<LE>(fp.n0 as u32).map_err(io)?;
        w.write_u32::<LE>(fp.spread).map_err(io)?;
        w.write_f32::<LE>(fp.magnitude_threshold).map_err(io)?;
        for v in [k.fx, k.fy, k.cx, k.cy] {
            w.write_f64::<LE>(v).map_err(io)?;
        }
        w.write_u32::<LE>(k.width).map_err(io)?;
        w.write_u32::<LE>(k.height).map_err(io)?;
        w.write_u32::<LE>(self.templates.len() as u32).map_err(io)?;
        for t in &self.templates {
            let q = t.viewpoint.rotation.quaternion();
            for v in [q.w, q.i, q.j, q.k, t.viewpoint.distance, t.viewpoint.in_plane_deg] {
                w.write_f64::<LE>(v).map_err(io)?;
            }
            w.write_i32::<LE>(t.anchor.0).map_err(io)?;
            w.write_i32::<LE>(t.anchor.1).map_err(io)?;
            w.write_u32::<LE>(t.features.len() as u32).map_err(io)?;
            for f in &t.features {
                w.write_i16::<LE>(check(f.dx, "dx")?).map_err(io)?;
                w.write_i16::<LE>(check(f.dy, "dy")?).map_err(io)?;
                w.write_u8(f.bin).map_err(io)?;
            }
            let r = rle::encode(&t.silhouette);
            w.write_u32::<LE>(r.counts.len() as u32).map_err(io)?;
            for c in r.counts {
                w.write_u32::<LE>(c).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let io = |e: std::io::Error| Error::LibraryFormat(format!("truncated or unreadable: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::LibraryFormat("bad magic".into()));
        }
        let version = r.read_u32::<LE>().map_err(io)?;
        if version != VERSION {
            return Err(Error::UnsupportedSchemaVersion(version.to_string()));
        }
        let features = FeatureParams {
            n0: r.read_u32::<LE>().map_err(io)? as usize,
            spread: r.read_u32::<LE>().map_err(io)?,
            magnitude_threshold: r.read_f32::<LE>().map_err(io)?,
        };
        let mut kf = [0f64; 4];
        for v in &mut kf {
            *v = r.read_f64::<LE>().map_err(io)?;
        }
        let intrinsics = CameraIntrinsics {
            fx: kf[0],
            fy: kf[1],
            cx: kf[2],
            cy: kf[3],
            width: r.read_u32::<LE>().map_err(io)?,
            height: r.read_u32::<LE>().map_err(io)?,
        };
        intrinsics.validate()?;
        let count = r.read_u32::<LE>().map_err(io)? as usize;
        let mut templates = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let mut v = [0f64; 6];
            for x in &mut v {
                *x = r.read_f64::<LE>().map_err(io)?;
            }
            let q = Quaternion::new(v[0], v[1], v[2], v[3]);
            if !((q.norm() - 1.0).abs() < 1e-9) {
                return Err(Error::LibraryFormat(format!("rotation norm {} is not 1", q.norm())));
            }
            // written from unit quaternions; renormalizing would perturb the last bits
            let rotation = UnitQuaternion::new_unchecked(q);
            let anchor = (r.read_i32::<LE>().map_err(io)?, r.read_i32::<LE>().map_err(io)?);
            let nf = r.read_u32::<LE>().map_err(io)? as usize;
            let mut feats = Vec::with_capacity(nf.min(4096));
            for _ in 0..nf {
                let dx = r.read_i16::<LE>().map_err(io)? as i32;
                let dy = r.read_i16::<LE>().map_err(io)? as i32;
                let bin = r.read_u8().map_err(io)?;
                if bin as usize >= features.n0 {
                    return Err(Error::LibraryFormat(format!("feature bin {bin} out of range")));
                }
                feats.push(Feature { dx, dy, bin });
            }
            let nr = r.read_u32::<LE>().map_err(io)? as usize;
            let mut counts = Vec::with_capacity(nr.min(1 << 16));
            for _ in 0..nr {
                counts.push(r.read_u32::<LE>().map_err(io)?);
            }
            let silhouette = rle::decode(&Rle {
                size: [intrinsics.height, intrinsics.width],
                counts,
            })?;
            templates.push(Template {
                features: feats,
                anchor,
                viewpoint: Viewpoint {
                    rotation,
                    distance: v[4],
                    in_plane_deg: v[5],
                },
                silhouette,
            });
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(io)? != 0 {
            return Err(Error::LibraryFormat("trailing bytes".into()));
        }
        Ok(TemplateLibrary {
            features,
            intrinsics,
            templates,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    /// Hex SHA-256 of the serialized library.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_bytes()?)))
    }
}
