use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dirac::{DiracKernelRep, Dims, DEFAULT_TOL};
use crate::discretize::builtin_hamiltonian;
use crate::energy::{Hamiltonian, QuadraticHamiltonian, ResistiveRelation};
use crate::error::{PhsError, Result};
use crate::integrate::Scheme;
use crate::system::{check_components, AssemblyReport, Causality, PhsSystem};

pub const SYSTEM_FILE_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HamiltonianSpec {
    Quadratic {
        #[serde(rename = "H")]
        h: Vec<Vec<f64>>,
        #[serde(default)]
        b: Option<Vec<f64>>,
        #[serde(default)]
        c: f64,
    },
    Builtin {
        name: String,
        #[serde(default)]
        params: Value,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResistiveSpec {
    LinearGraph {
        #[serde(rename = "R")]
        r: Vec<Vec<f64>>,
    },
    Parametric {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
    None,
}

/// JSON description of an assembled system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFileV1 {
    pub version: String,
    pub dims: Dims,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub hamiltonian: HamiltonianSpec,
    pub resistive: ResistiveSpec,
    pub causality: Vec<Causality>,
    #[serde(default)]
    pub metadata: Value,
}

/// Optional simulation defaults stored under `metadata`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    /// One input expression per port channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<String>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(name: &str, data: &[Vec<f64>], shape: (usize, usize)) -> Result<DMatrix<f64>> {
    if data.len() != shape.0 || data.iter().any(|r| r.len() != shape.1) {
        return Err(PhsError::Dimension(format!("{name} must be {}x{}", shape.0, shape.1)));
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| data[i][j]))
}

/// Components parsed from a system file, before any validation.
#[derive(Debug, Clone)]
pub struct SystemParts {
    pub dirac: DiracKernelRep,
    pub hamiltonian: Hamiltonian,
    pub resistive: ResistiveRelation,
    pub causality: Vec<Causality>,
}

impl SystemParts {
    pub fn report(&self, tol: f64) -> Result<AssemblyReport> {
        check_components(&self.dirac, &self.hamiltonian, &self.resistive, &self.causality, tol)
    }

    pub fn assemble(self, tol: f64) -> Result<PhsSystem> {
        PhsSystem::assemble_with_tol(self.dirac, self.hamiltonian, self.resistive, self.causality, tol)
    }
}

impl SystemFileV1 {
    pub fn from_system(sys: &PhsSystem, metadata: Value) -> Result<Self> {
        let dims = sys.dims();
        let hamiltonian = match sys.hamiltonian() {
            Hamiltonian::Quadratic(q) => HamiltonianSpec::Quadratic {
                h: rows(q.h()),
                b: Some(q.b().iter().copied().collect()),
                c: q.c(),
            },
            Hamiltonian::General(g) => match g.builtin() {
                Some(tag) => HamiltonianSpec::Builtin {
                    name: tag.name.clone(),
                    params: tag.params.clone(),
                },
                None => {
                    return Err(PhsError::InvalidArgument(
                        "Hamiltonian has no serializable form (not quadratic or builtin)".into(),
                    ))
                }
            },
        };
        let resistive = match sys.resistive() {
            _ if dims.n_r == 0 => ResistiveSpec::None,
            ResistiveRelation::LinearGraph { r } => ResistiveSpec::LinearGraph { r: rows(r) },
            ResistiveRelation::Parametric { a, b } => ResistiveSpec::Parametric { a: rows(a), b: rows(b) },
            ResistiveRelation::Modulated { .. } => {
                return Err(PhsError::InvalidArgument("modulated resistive relations cannot be serialized".into()))
            }
        };
        Ok(Self {
            version: SYSTEM_FILE_VERSION.into(),
            dims,
            f: rows(sys.dirac().f()),
            g: rows(sys.dirac().g()),
            hamiltonian,
            resistive,
            causality: sys.causality().to_vec(),
            metadata,
        })
    }

    pub fn parts(&self) -> Result<SystemParts> {
        if self.version != SYSTEM_FILE_VERSION {
            return Err(PhsError::Parse(format!("unsupported system file version '{}'", self.version)));
        }
        let d = self.dims;
        let n = d.n();
        let dirac = DiracKernelRep::new(d, matrix("F", &self.f, (n, n))?, matrix("G", &self.g, (n, n))?)?;
        let hamiltonian = match &self.hamiltonian {
            HamiltonianSpec::Quadratic { h, b, c } => {
                let hm = matrix("H", h, (d.n_s, d.n_s))?;
                let bv = match b {
                    Some(b) if b.len() != d.n_s => return Err(PhsError::Dimension(format!("b must have length {}", d.n_s))),
                    Some(b) => DVector::from_row_slice(b),
                    None => DVector::zeros(d.n_s),
                };
                QuadraticHamiltonian::new(hm, bv, *c)?.into()
            }
            HamiltonianSpec::Builtin { name, params } => builtin_hamiltonian(name, params)?,
        };
        let resistive = match &self.resistive {
            ResistiveSpec::LinearGraph { r } => ResistiveRelation::linear(matrix("R", r, (d.n_r, d.n_r))?)?,
            ResistiveSpec::Parametric { a, b } => {
                let m = a.first().map_or(0, |r| r.len());
                ResistiveRelation::parametric(matrix("A", a, (d.n_r, m))?, matrix("B", b, (d.n_r, m))?)?
            }
            ResistiveSpec::None if d.n_r == 0 => ResistiveRelation::none(),
            ResistiveSpec::None => {
                return Err(PhsError::Dimension(format!("resistive type 'none' with n_r = {}", d.n_r)))
            }
        };
        Ok(SystemParts {
            dirac,
            hamiltonian,
            resistive,
            causality: self.causality.clone(),
        })
    }

    /// Parses and assembles with the default tolerance.
    pub fn to_system(&self) -> Result<PhsSystem> {
        self.parts()?.assemble(DEFAULT_TOL)
    }

    pub fn defaults(&self) -> Result<SimulationDefaults> {
        if self.metadata.is_null() {
            return Ok(SimulationDefaults::default());
        }
        serde_json::from_value(self.metadata.clone()).or_else(|_| {
            // unrelated metadata: keep only recognised keys that parse
            let mut d = SimulationDefaults::default();
            let get = |k: &str| self.metadata.get(k).cloned();
            d.x0 = get("x0").and_then(|v| serde_json::from_value(v).ok());
            d.t0 = get("t0").and_then(|v| v.as_f64());
            d.t1 = get("t1").and_then(|v| v.as_f64());
            d.dt = get("dt").and_then(|v| v.as_f64());
            d.scheme = get("scheme").and_then(|v| serde_json::from_value(v).ok());
            d.inputs = get("inputs").and_then(|v| serde_json::from_value(v).ok());
            Ok(d)
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PhsError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system file serializes")
    }
}

pub fn read_system_file(path: &Path) -> Result<SystemFileV1> {
    SystemFileV1::from_json(&std::fs::read_to_string(path)?)
}

pub fn write_system_file(path: &Path, file: &SystemFileV1) -> Result<()> {
    std::fs::write(path, file.to_json() + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{damped_oscillator, oscillator, string_system, ForceLaw, StringSpec};

    #[test]
    fn round_trip_preserves_matrices() {
        for sys in [oscillator(), damped_oscillator(0.5).unwrap()] {
            let file = SystemFileV1::from_system(&sys, Value::Null).unwrap();
            let back = SystemFileV1::from_json(&file.to_json()).unwrap();
            assert_eq!(back, file);
            let rebuilt = back.to_system().unwrap();
            assert_eq!(rebuilt.dirac().f(), sys.dirac().f());
            assert_eq!(rebuilt.dirac().g(), sys.dirac().g());
        }
    }

    #[test]
    fn builtin_string_round_trip() {
        let s = string_system(&StringSpec::new(4, ForceLaw::Tanh { stiffness: 1.0 })).unwrap();
        let file = SystemFileV1::from_system(&s.system, Value::Null).unwrap();
        assert!(matches!(file.hamiltonian, HamiltonianSpec::Builtin { .. }));
        let sys = SystemFileV1::from_json(&file.to_json()).unwrap().to_system().unwrap();
        let x = DVector::from_element(9, 0.2);
        assert_eq!(sys.hamiltonian().eval(&x).unwrap(), s.system.hamiltonian().eval(&x).unwrap());
    }

    #[test]
    fn shape_and_version_errors() {
        let mut file = SystemFileV1::from_system(&oscillator(), Value::Null).unwrap();
        file.f.pop();
        assert!(matches!(file.parts(), Err(PhsError::Dimension(_))));
        let mut file = SystemFileV1::from_system(&oscillator(), Value::Null).unwrap();
        file.version = "2".into();
        assert!(matches!(file.parts(), Err(PhsError::Parse(_))));
        assert!(matches!(SystemFileV1::from_json("{"), Err(PhsError::Parse(_))));
    }

    #[test]
    fn defaults_are_read_from_metadata() {
        let meta = serde_json::json!({"t1": 2.0, "dt": 0.01, "scheme": "discrete_gradient", "note": "x"});
        let file = SystemFileV1::from_system(&oscillator(), meta).unwrap();
        let d = file.defaults().unwrap();
        assert_eq!(d.t1, Some(2.0));
        assert_eq!(d.scheme, Some(Scheme::DiscreteGradient));
    }
}
