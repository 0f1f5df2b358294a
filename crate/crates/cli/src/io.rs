//! JSON file schemas and their conversions to the library types.
//!
//! Every schema is strict: unknown fields are rejected so that passing
//! the wrong kind of file fails at parse time rather than downstream.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use weakot_core::duality::DualPotential;
use weakot_core::lifted::{LiftedAtom, LiftedPlan};
use weakot_core::measures::{Coupling, DiscreteMeasure};

use crate::Failure;

/// A finitely supported measure: `{"points": [[...]], "weights": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MeasureFile {
    pub fn from_measure(m: &DiscreteMeasure) -> Self {
        MeasureFile {
            points: m.points().to_vec(),
            weights: m.weights().to_vec(),
        }
    }

    pub fn into_measure(self) -> weakot_core::Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.points, self.weights)
    }
}

/// A coupling: `{"mu": <measure>, "nu": <measure>, "matrix": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingFile {
    pub mu: MeasureFile,
    pub nu: MeasureFile,
    pub matrix: Vec<Vec<f64>>,
}

impl CouplingFile {
    pub fn from_coupling(pi: &Coupling) -> Self {
        CouplingFile {
            mu: MeasureFile::from_measure(pi.mu()),
            nu: MeasureFile::from_measure(pi.nu()),
            matrix: pi.matrix().to_vec(),
        }
    }

    pub fn into_coupling(self) -> weakot_core::Result<Coupling> {
        Coupling::new(
            self.mu.into_measure()?,
            self.nu.into_measure()?,
            self.matrix,
        )
    }
}

/// One atom of a lifted plan: a location, a kernel, and a weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftedAtomFile {
    pub x: Vec<f64>,
    pub p: MeasureFile,
    pub w: f64,
}

/// A lifted plan: `{"atoms": [{"x": [...], "p": <measure>, "w": r}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftedPlanFile {
    pub atoms: Vec<LiftedAtomFile>,
}

impl LiftedPlanFile {
    pub fn into_plan(self) -> weakot_core::Result<LiftedPlan> {
        let atoms = self
            .atoms
            .into_iter()
            .map(|a| LiftedAtom::new(a.x, a.p.into_measure()?, a.w))
            .collect::<weakot_core::Result<Vec<_>>>()?;
        LiftedPlan::new(atoms)
    }
}

/// A dual potential: `{"support": [[...]], "values": [...], "L": r}`.
/// The Lipschitz bound `L` is optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    pub support: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

impl PotentialFile {
    pub fn from_potential(psi: &DualPotential) -> Self {
        PotentialFile {
            support: psi.support().to_vec(),
            values: psi.values().to_vec(),
            l: psi.lipschitz(),
        }
    }

    pub fn into_potential(self, l: Option<f64>) -> weakot_core::Result<DualPotential> {
        DualPotential::new(self.support, self.values, self.l.or(l))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("cannot parse {}: {e}", path.display())))
}

fn reject(path: &Path) -> impl FnOnce(weakot_core::Error) -> Failure + '_ {
    move |e| Failure::input(format!("{}: {e}", path.display()))
}

pub fn load_measure(path: &Path) -> Result<DiscreteMeasure, Failure> {
    let file: MeasureFile = read_json(path)?;
    file.into_measure().map_err(reject(path))
}

pub fn load_coupling(path: &Path) -> Result<Coupling, Failure> {
    let file: CouplingFile = read_json(path)?;
    file.into_coupling().map_err(reject(path))
}

pub fn load_plan(path: &Path) -> Result<LiftedPlan, Failure> {
    let file: LiftedPlanFile = read_json(path)?;
    file.into_plan().map_err(reject(path))
}

pub fn load_potential(path: &Path, l: Option<f64>) -> Result<DualPotential, Failure> {
    let file: PotentialFile = read_json(path)?;
    if file.l.is_some() && l.is_some() {
        return Err(Failure::input(format!(
            "{} already carries a Lipschitz bound; --L conflicts with it",
            path.display()
        )));
    }
    file.into_potential(l).map_err(reject(path))
}
