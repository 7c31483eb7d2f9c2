//! Model documents: a semi-explicit DAE `ẋ = g(x, z)`, `0 = h(x, z)`.

use std::collections::BTreeSet;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Bindings, Expr, FUNCTION_NAMES};
use crate::matrix::Mat;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub states: Vec<String>,
    pub algebraics: Vec<String>,
    pub odes: Vec<Expr>,
    pub constraints: Vec<Expr>,
    pub guess_x: Vec<f64>,
    pub guess_z: Vec<f64>,
    pub comment: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    states: Vec<String>,
    #[serde(default)]
    algebraics: Vec<String>,
    odes: Vec<String>,
    #[serde(default)]
    constraints: Vec<String>,
    guess: RawGuess,
    #[serde(default)]
    comment: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGuess {
    x: Vec<f64>,
    #[serde(default)]
    z: Vec<f64>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses and validates a JSON model document.
pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let raw: RawModel =
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
    let parse_all = |srcs: &[String]| -> Result<Vec<Expr>> {
        srcs.iter().map(|s| parse_expr(s)).collect()
    };
    let model = ModelSpec {
        name: raw.name,
        states: raw.states,
        algebraics: raw.algebraics,
        odes: parse_all(&raw.odes)?,
        constraints: parse_all(&raw.constraints)?,
        guess_x: raw.guess.x,
        guess_z: raw.guess.z,
        comment: raw.comment,
    };
    model.validate()?;
    Ok(model)
}

impl ModelSpec {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn m(&self) -> usize {
        self.algebraics.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::InvalidModel("empty system: no states".into()));
        }
        if self.odes.len() != self.states.len() {
            return Err(Error::Arity {
                what: "odes for states".into(),
                expected: self.states.len(),
                found: self.odes.len(),
            });
        }
        if self.constraints.len() != self.algebraics.len() {
            return Err(Error::Arity {
                what: "constraints for algebraics".into(),
                expected: self.algebraics.len(),
                found: self.constraints.len(),
            });
        }
        if self.guess_x.len() != self.states.len() {
            return Err(Error::Arity {
                what: "guess.x entries".into(),
                expected: self.states.len(),
                found: self.guess_x.len(),
            });
        }
        if self.guess_z.len() != self.algebraics.len() {
            return Err(Error::Arity {
                what: "guess.z entries".into(),
                expected: self.algebraics.len(),
                found: self.guess_z.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for name in self.states.iter().chain(&self.algebraics) {
            if !is_identifier(name) {
                return Err(Error::InvalidModel(format!("`{name}` is not an identifier")));
            }
            if FUNCTION_NAMES.contains(&name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "`{name}` is reserved for a function"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidModel(format!("duplicate variable `{name}`")));
            }
        }
        for e in self.odes.iter().chain(&self.constraints) {
            if let Some(v) = e.variables().into_iter().find(|v| !seen.contains(v.as_str())) {
                return Err(Error::UnknownVariable(v));
            }
        }
        if self.guess_x.iter().chain(&self.guess_z).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite guess".into()));
        }
        Ok(())
    }

    /// All variable names, states first.
    pub fn variables(&self) -> Vec<String> {
        self.states.iter().chain(&self.algebraics).cloned().collect()
    }

    fn eval_all<T: Scalar>(&self, es: &[Expr], x: &[T], z: &[T]) -> Result<Vec<T>> {
        let names = self.variables();
        let values: Vec<T> = x.iter().chain(z).copied().collect();
        if x.len() != self.n() || z.len() != self.m() {
            return Err(Error::shape(format!(
                "point has {} states and {} algebraics, model has {} and {}",
                x.len(),
                z.len(),
                self.n(),
                self.m()
            )));
        }
        let env = Bindings {
            names: &names,
            values: &values,
        };
        es.iter().map(|e| e.eval(&env)).collect()
    }

    pub fn eval_g<T: Scalar>(&self, x: &[T], z: &[T]) -> Result<Vec<T>> {
        self.eval_all(&self.odes, x, z)
    }

    pub fn eval_h<T: Scalar>(&self, x: &[T], z: &[T]) -> Result<Vec<T>> {
        self.eval_all(&self.constraints, x, z)
    }

    pub fn guess<T: Scalar>(&self) -> (Vec<T>, Vec<T>) {
        (
            self.guess_x.iter().map(|&v| T::lit(v)).collect(),
            self.guess_z.iter().map(|&v| T::lit(v)).collect(),
        )
    }
}

/// First derivatives of a list of expressions, one row per expression and one
/// column per variable.
#[derive(Debug, Clone)]
pub struct SymbolicJacobian {
    names: Vec<String>,
    cols: usize,
    entries: Vec<Expr>,
}

impl SymbolicJacobian {
    pub fn new(es: &[Expr], wrt: &[String], names: Vec<String>) -> Self {
        let entries = es
            .iter()
            .flat_map(|e| wrt.iter().map(move |v| crate::expr::differentiate(e, v)))
            .collect();
        Self {
            names,
            cols: wrt.len(),
            entries,
        }
    }

    pub fn eval<T: Scalar>(&self, values: &[T]) -> Result<Mat<T>> {
        let env = Bindings {
            names: &self.names,
            values,
        };
        let data = self
            .entries
            .iter()
            .map(|e| e.eval(&env))
            .collect::<Result<Vec<T>>>()?;
        let rows = if self.cols == 0 { 0 } else { data.len() / self.cols };
        Mat::from_vec(rows, self.cols, data)
    }
}
