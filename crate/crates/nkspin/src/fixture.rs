//! Tensor fixture files: quadrupole and Zeeman tensors of the ground and
//! excited levels plus named field directions.

use crate::levels::{solve_levels, FieldVector, LevelStructure, TensorParams};
use crate::spin::SpinQuantum;
use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const EU_YSO: &str = include_str!("../fixtures/eu_yso.toml");

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed fixture: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid fixture: {0}")]
    Invalid(String),
    #[error("unknown direction {0:?}")]
    UnknownDirection(String),
}

#[derive(Debug, Clone, Deserialize)]
struct ZeemanComponents {
    xx: f64,
    yy: f64,
    zz: f64,
    xy: f64,
    xz: f64,
    yz: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct LevelFile {
    d_mhz: f64,
    e_mhz: f64,
    euler_zyz_rad: [f64; 3],
    zeeman_khz_per_mt: ZeemanComponents,
}

#[derive(Debug, Clone, Deserialize)]
struct DirectionFile {
    theta_deg: f64,
    phi_deg: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct FixtureFile {
    name: String,
    version: u32,
    doublets: usize,
    rf_axis: [f64; 3],
    ground: LevelFile,
    excited: LevelFile,
    #[serde(default)]
    directions: BTreeMap<String, DirectionFile>,
}

impl From<&LevelFile> for TensorParams {
    fn from(l: &LevelFile) -> Self {
        let z = &l.zeeman_khz_per_mt;
        TensorParams {
            d: l.d_mhz,
            e: l.e_mhz,
            euler_zyz: l.euler_zyz_rad,
            m: Matrix3::new(z.xx, z.xy, z.xz, z.xy, z.yy, z.yz, z.xz, z.yz, z.zz),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub version: u32,
    pub spin: SpinQuantum,
    pub ground: TensorParams,
    pub excited: TensorParams,
    /// Unit direction of the RF drive field.
    pub rf_axis: Vector3<f64>,
    /// Named directions as (θ, φ) in radians.
    pub directions: BTreeMap<String, (f64, f64)>,
}

impl Fixture {
    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        let file: FixtureFile = toml::from_str(text)?;
        let spin = SpinQuantum::new(file.doublets).map_err(|e| FixtureError::Invalid(e.to_string()))?;
        let axis = Vector3::from(file.rf_axis);
        if axis.norm() == 0.0 {
            return Err(FixtureError::Invalid("rf_axis is the zero vector".into()));
        }
        let directions = file.directions.iter().map(|(k, d)| (k.clone(), (d.theta_deg.to_radians(), d.phi_deg.to_radians()))).collect();
        Ok(Self {
            name: file.name,
            version: file.version,
            spin,
            ground: (&file.ground).into(),
            excited: (&file.excited).into(),
            rf_axis: axis.normalize(),
            directions,
        })
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// The checked-in Eu:Y₂SiO₅ fixture.
    pub fn eu_yso() -> Self {
        Self::parse(EU_YSO).expect("bundled fixture parses")
    }

    pub fn field(&self, direction: &str, b: f64) -> Result<FieldVector, FixtureError> {
        let (theta, phi) = self.directions.get(direction).ok_or_else(|| FixtureError::UnknownDirection(direction.to_string()))?;
        Ok(FieldVector::new(b, *theta, *phi))
    }

    pub fn ground_levels(&self, field: &FieldVector) -> LevelStructure {
        solve_levels(&self.ground, field, self.spin)
    }

    pub fn excited_levels(&self, field: &FieldVector) -> LevelStructure {
        solve_levels(&self.excited, field, self.spin)
    }
}
