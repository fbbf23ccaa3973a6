//! Temperature-dependent material properties.
//!
//! Each property is a piecewise-linear table in temperature. Outside the
//! tabulated range values are clamped to the end knots; [`RangePolicy::Strict`]
//! turns that into an error instead.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("material `{material}`: {property} table is empty")]
    EmptyTable {
        material: String,
        property: &'static str,
    },
    #[error("material `{material}`: {property} temperatures must be strictly increasing")]
    NonIncreasing {
        material: String,
        property: &'static str,
    },
    #[error("material `{material}`: {property} values must be {requirement}")]
    BadValue {
        material: String,
        property: &'static str,
        requirement: &'static str,
    },
    #[error("material `{material}`: density must be positive")]
    BadDensity { material: String },
    #[error("temperature {temperature} outside table range [{lo}, {hi}]")]
    OutOfRange { temperature: f64, lo: f64, hi: f64 },
    #[error("material `{material}` has no resistivity table")]
    MissingResistivity { material: String },
    #[error("material `{material}`: {property} table covers [{lo}, {hi}], run needs [{need_lo}, {need_hi}]")]
    Coverage {
        material: String,
        property: &'static str,
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },
    #[error("unknown material `{0}`")]
    Unknown(String),
    #[error("duplicate material `{0}`")]
    Duplicate(String),
    #[error("reading material file: {0}")]
    Io(String),
    #[error("parsing material file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangePolicy {
    #[default]
    Clamp,
    Strict,
}

/// How the conductivity at a face between two cells is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HalfPointRule {
    /// `lambda_m((T_a + T_b) / 2)` with the lower-index cell's table.
    #[default]
    MeanTemperature,
    /// `(lambda_m(T_a) + lambda_m(T_b)) / 2` with the lower-index cell's table.
    MeanConductivity,
    /// Harmonic mean of each side evaluated with its own table.
    TwoSidedHarmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    HeatCapacity,
    Conductivity,
    Resistivity,
}

impl Property {
    fn name(self) -> &'static str {
        match self {
            Property::HeatCapacity => "heat_capacity",
            Property::Conductivity => "conductivity",
            Property::Resistivity => "resistivity",
        }
    }
}

/// Piecewise-linear table `T -> value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PropertyTable {
    temps: Vec<f64>,
    values: Vec<f64>,
}

impl From<Vec<[f64; 2]>> for PropertyTable {
    fn from(pairs: Vec<[f64; 2]>) -> Self {
        let (temps, values) = pairs.into_iter().map(|[t, v]| (t, v)).unzip();
        PropertyTable { temps, values }
    }
}

impl From<PropertyTable> for Vec<[f64; 2]> {
    fn from(table: PropertyTable) -> Self {
        table
            .temps
            .iter()
            .zip(&table.values)
            .map(|(&t, &v)| [t, v])
            .collect()
    }
}

impl PropertyTable {
    pub fn new(pairs: &[(f64, f64)]) -> Self {
        PropertyTable {
            temps: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(&[(0.0, value), (1.0e6, value)])
    }

    /// Linear `value = a + b T` sampled at the two end temperatures.
    pub fn linear(a: f64, b: f64, lo: f64, hi: f64) -> Self {
        Self::new(&[(lo, a + b * lo), (hi, a + b * hi)])
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.temps[0], self.temps[self.temps.len() - 1])
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.domain();
        t >= lo && t <= hi
    }

    fn check(&self, material: &str, property: &'static str, allow_zero: bool) -> Result<(), MaterialError> {
        if self.temps.is_empty() {
            return Err(MaterialError::EmptyTable {
                material: material.into(),
                property,
            });
        }
        if self.temps.windows(2).any(|w| !(w[1] > w[0])) || self.temps.iter().any(|t| !t.is_finite()) {
            return Err(MaterialError::NonIncreasing {
                material: material.into(),
                property,
            });
        }
        let ok = |v: &f64| v.is_finite() && if allow_zero { *v >= 0.0 } else { *v > 0.0 };
        if !self.values.iter().all(ok) {
            return Err(MaterialError::BadValue {
                material: material.into(),
                property,
                requirement: if allow_zero { "non-negative" } else { "positive" },
            });
        }
        Ok(())
    }

    /// Interpolated value, clamped to the end knots outside the table.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.temps.len();
        if n == 1 || t <= self.temps[0] {
            return self.values[0];
        }
        if t >= self.temps[n - 1] {
            return self.values[n - 1];
        }
        let k = self.temps.partition_point(|&x| x <= t);
        let (t0, t1) = (self.temps[k - 1], self.temps[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        if t == t0 {
            return v0;
        }
        v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
    }

    pub fn eval_checked(&self, t: f64, policy: RangePolicy) -> Result<Evaluation, MaterialError> {
        let clamped = !self.contains(t);
        if clamped && policy == RangePolicy::Strict {
            let (lo, hi) = self.domain();
            return Err(MaterialError::OutOfRange {
                temperature: t,
                lo,
                hi,
            });
        }
        Ok(Evaluation {
            value: self.eval(t),
            clamped,
        })
    }
}

/// A property value and whether the temperature had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialTable {
    pub name: String,
    /// Density, independent of temperature.
    pub density: f64,
    pub heat_capacity: PropertyTable,
    pub conductivity: PropertyTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resistivity: Option<PropertyTable>,
}

impl MaterialTable {
    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(MaterialError::BadDensity {
                material: self.name.clone(),
            });
        }
        self.heat_capacity.check(&self.name, "heat_capacity", false)?;
        self.conductivity.check(&self.name, "conductivity", false)?;
        if let Some(chi) = &self.resistivity {
            chi.check(&self.name, "resistivity", true)?;
        }
        Ok(())
    }

    pub fn table(&self, which: Property) -> Result<&PropertyTable, MaterialError> {
        match which {
            Property::HeatCapacity => Ok(&self.heat_capacity),
            Property::Conductivity => Ok(&self.conductivity),
            Property::Resistivity => self.resistivity.as_ref().ok_or_else(|| MaterialError::MissingResistivity {
                material: self.name.clone(),
            }),
        }
    }

    pub fn eval_property(&self, which: Property, t: f64, policy: RangePolicy) -> Result<f64, MaterialError> {
        Ok(self.table(which)?.eval_checked(t, policy)?.value)
    }

    /// Volumetric heat capacity `rho * c_V(T)`.
    #[inline]
    pub fn capacity(&self, t: f64) -> f64 {
        self.density * self.heat_capacity.eval(t)
    }

    /// Checks that every table covers `[lo, hi]`.
    pub fn check_coverage(&self, lo: f64, hi: f64) -> Result<(), MaterialError> {
        let tables = [
            (Property::HeatCapacity, Some(&self.heat_capacity)),
            (Property::Conductivity, Some(&self.conductivity)),
            (Property::Resistivity, self.resistivity.as_ref()),
        ];
        for (which, table) in tables {
            let Some(table) = table else { continue };
            let (tlo, thi) = table.domain();
            if tlo > lo || thi < hi {
                return Err(MaterialError::Coverage {
                    material: self.name.clone(),
                    property: which.name(),
                    lo: tlo,
                    hi: thi,
                    need_lo: lo,
                    need_hi: hi,
                });
            }
        }
        Ok(())
    }

    /// Constant-property material, mostly for tests.
    pub fn uniform(name: &str, density: f64, heat_capacity: f64, conductivity: f64) -> Self {
        MaterialTable {
            name: name.into(),
            density,
            heat_capacity: PropertyTable::constant(heat_capacity),
            conductivity: PropertyTable::constant(conductivity),
            resistivity: None,
        }
    }
}

/// Conductivity at the mean temperature of two neighbouring cells.
pub fn half_point_lambda(table: &MaterialTable, t_a: f64, t_b: f64) -> f64 {
    table.conductivity.eval(0.5 * (t_a + t_b))
}

/// Face conductivity between cell `a` (lower index) and cell `b`.
#[inline]
pub fn face_conductivity(rule: HalfPointRule, a: &MaterialTable, b: &MaterialTable, t_a: f64, t_b: f64) -> f64 {
    match rule {
        HalfPointRule::MeanTemperature => a.conductivity.eval(0.5 * (t_a + t_b)),
        HalfPointRule::MeanConductivity => 0.5 * (a.conductivity.eval(t_a) + a.conductivity.eval(t_b)),
        HalfPointRule::TwoSidedHarmonic => {
            let (la, lb) = (a.conductivity.eval(t_a), b.conductivity.eval(t_b));
            2.0 * la * lb / (la + lb)
        }
    }
}

/// Materials resolved per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMaterials {
    layers: Vec<MaterialTable>,
}

impl LayerMaterials {
    pub fn new(layers: Vec<MaterialTable>) -> Result<Self, MaterialError> {
        for m in &layers {
            m.validate()?;
        }
        Ok(LayerMaterials { layers })
    }

    /// Picks the named materials out of a library, one per layer.
    pub fn from_library(library: &MaterialLibrary, names: &[String]) -> Result<Self, MaterialError> {
        let layers = names
            .iter()
            .map(|n| library.get(n).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(layers)
    }

    #[inline]
    pub fn layer(&self, m: usize) -> &MaterialTable {
        &self.layers[m]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MaterialTable> {
        self.layers.iter()
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MaterialFile {
    material: Vec<MaterialTable>,
}

/// All materials defined in a material file, by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialLibrary {
    materials: BTreeMap<String, MaterialTable>,
}

impl MaterialLibrary {
    pub fn parse(text: &str) -> Result<Self, MaterialError> {
        let file: MaterialFile = toml::from_str(text).map_err(|e| MaterialError::Parse(e.to_string()))?;
        let mut materials = BTreeMap::new();
        for m in file.material {
            m.validate()?;
            if materials.contains_key(&m.name) {
                return Err(MaterialError::Duplicate(m.name));
            }
            materials.insert(m.name.clone(), m);
        }
        Ok(MaterialLibrary { materials })
    }

    pub fn load(path: &Path) -> Result<Self, MaterialError> {
        let text = std::fs::read_to_string(path).map_err(|e| MaterialError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, name: &str) -> Result<&MaterialTable, MaterialError> {
        self.materials
            .get(name)
            .ok_or_else(|| MaterialError::Unknown(name.to_string()))
    }

    pub fn to_toml(&self) -> String {
        let file = MaterialFile {
            material: self.materials.values().cloned().collect(),
        };
        toml::to_string(&file).expect("material tables serialize")
    }
}
