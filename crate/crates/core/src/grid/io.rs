//! JSON model files.
//!
//! ```json
//! {
//!   "name": "two-machine",
//!   "n": 2,
//!   "Y": [{"from": 1, "to": 2, "re": -1.0, "im": 5.8}],
//!   "V": [1.0, 1.0],
//!   "Pm": [0.5, -0.5],
//!   "inertia": [1.0, 1.0],
//!   "damping": [0.2, 1.0],
//!   "omega_s": 1.0
//! }
//! ```
//!
//! `Y` entries use 1-based generator indices and give either the complex
//! admittance (`re`, `im`) or its polar form (`mag`, `angle` in radians).
//! Off-diagonal entries fill both `(j, k)` and `(k, j)`. Optional fields:
//! `damping_sensitivity`, `equilibrium`, `delta_guess` and `absorb_offset`
//! (moves the constant mismatch `Pm - Pe(equilibrium)` out of `Pm`).

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PowerGridModel;
use crate::error::{Error, Result};
use crate::linalg::RMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YEntry {
    pub from: usize,
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mag: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

fn default_omega_s() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub name: Option<String>,
    pub n: usize,
    #[serde(rename = "Y")]
    pub y: Vec<YEntry>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    #[serde(rename = "Pm")]
    pub pm: Vec<f64>,
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    #[serde(default = "default_omega_s")]
    pub omega_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_sensitivity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_guess: Option<Vec<f64>>,
    #[serde(default)]
    pub absorb_offset: bool,
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PowerGridModel> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<PowerGridModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(&file, text)
}

fn at_key(text: &str, key: &str, message: String) -> Error {
    let (line, column) = key_offset(text, key).map_or((0, 0), |o| line_col(text, o));
    Error::ModelFormat { line, column, message }
}

fn at_element(text: &str, key: &str, idx: usize, message: String) -> Error {
    let (line, column) = element_offset(text, key, idx).map_or((0, 0), |o| line_col(text, o));
    Error::ModelFormat { line, column, message }
}

fn build(file: &ModelFile, text: &str) -> Result<PowerGridModel> {
    let n = file.n;
    if n < 2 {
        return Err(at_key(text, "n", format!("need at least two generators, got {n}")));
    }
    let vectors: [(&str, Option<&Vec<f64>>); 7] = [
        ("V", Some(&file.v)),
        ("Pm", Some(&file.pm)),
        ("inertia", Some(&file.inertia)),
        ("damping", Some(&file.damping)),
        ("damping_sensitivity", file.damping_sensitivity.as_ref()),
        ("equilibrium", file.equilibrium.as_ref()),
        ("delta_guess", file.delta_guess.as_ref()),
    ];
    for (key, vec) in vectors {
        let Some(vec) = vec else { continue };
        if vec.len() != n {
            return Err(at_key(text, key, format!("{key} has {} entries, expected {n}", vec.len())));
        }
        if !vec.iter().all(|x| x.is_finite()) {
            return Err(at_key(text, key, format!("{key} has non-finite entries")));
        }
    }
    if let Some(j) = file.v.iter().position(|&x| x <= 0.0) {
        return Err(at_element(text, "V", j, format!("voltage of generator {} must be positive", j + 1)));
    }
    if let Some(j) = file.inertia.iter().position(|&x| x <= 0.0) {
        return Err(at_element(text, "inertia", j, format!("inertia of generator {} must be positive", j + 1)));
    }
    if let Some(j) = file.damping.iter().position(|&x| x < 0.0) {
        return Err(at_element(text, "damping", j, format!("damping of generator {} must be nonnegative", j + 1)));
    }
    if !(file.omega_s.is_finite() && file.omega_s > 0.0) {
        return Err(at_key(text, "omega_s", "omega_s must be positive".into()));
    }

    let mut y = RMatrix::zeros(n, n);
    let mut theta = RMatrix::zeros(n, n);
    let mut set = vec![vec![false; n]; n];
    for (i, e) in file.y.iter().enumerate() {
        let err = |msg: String| at_element(text, "Y", i, msg);
        if !(1..=n).contains(&e.from) || !(1..=n).contains(&e.to) {
            return Err(err(format!("generator index out of range 1..={n}")));
        }
        let (mag, angle) = match (e.re, e.im, e.mag, e.angle) {
            (Some(re), Some(im), None, None) => {
                let z = Complex64::new(re, im);
                (z.norm(), z.arg())
            }
            (None, None, Some(mag), Some(angle)) => {
                if mag < 0.0 {
                    return Err(err("mag must be nonnegative".into()));
                }
                (mag, angle)
            }
            _ => return Err(err("give either re and im, or mag and angle".into())),
        };
        if !(mag.is_finite() && angle.is_finite()) {
            return Err(err("non-finite admittance".into()));
        }
        let (j, k) = (e.from - 1, e.to - 1);
        for (a, b) in [(j, k), (k, j)] {
            if set[a][b] && ((y[(a, b)] - mag).abs() > 1e-12 || (theta[(a, b)] - angle).abs() > 1e-12) {
                return Err(err(format!("conflicting admittance for ({}, {})", a + 1, b + 1)));
            }
            set[a][b] = true;
            y[(a, b)] = mag;
            theta[(a, b)] = angle;
        }
    }

    let to_vec = |v: &Vec<f64>| DVector::from_column_slice(v);
    let mut model = PowerGridModel {
        name: file.name.clone().unwrap_or_default(),
        y_mag: y,
        theta,
        v: to_vec(&file.v),
        pm: to_vec(&file.pm),
        inertia: to_vec(&file.inertia),
        damping: to_vec(&file.damping),
        omega_s: file.omega_s,
        damping_sensitivity: file.damping_sensitivity.as_ref().map(to_vec),
        absorbed_offset: None,
        equilibrium: file.equilibrium.as_ref().map(to_vec),
        delta_guess: file.delta_guess.as_ref().map(to_vec),
    };
    if !model.is_connected() {
        return Err(at_key(text, "Y", "network graph is not connected".into()));
    }
    model.validate()?;
    if file.absorb_offset {
        let eq = model
            .equilibrium
            .clone()
            .ok_or_else(|| at_key(text, "absorb_offset", "absorb_offset needs an equilibrium".into()))?;
        model.absorb_offset(&eq);
    }
    Ok(model)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |p| offset - p - 1) + 1;
    (line, column)
}

/// Byte tokens of a JSON text: structural characters and string spans,
/// with the depth at which each occurs.
fn scan(text: &str) -> Vec<(usize, u8, usize, Option<usize>)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' => {
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                out.push((start, b'"', depth, Some(i)));
            }
            c @ (b'{' | b'[') => {
                out.push((i, c, depth, None));
                depth += 1;
            }
            c @ (b'}' | b']') => {
                depth = depth.saturating_sub(1);
                out.push((i, c, depth, None));
            }
            c @ (b',' | b':') => out.push((i, c, depth, None)),
            _ => {}
        }
        i += 1;
    }
    out
}

/// Offset of `"key"` in the top-level object.
fn key_offset(text: &str, key: &str) -> Option<usize> {
    let toks = scan(text);
    toks.iter().enumerate().find_map(|(t, &(start, c, depth, end))| {
        let end = end?;
        let is_key = c == b'"' && depth == 1 && &text[start + 1..end] == key;
        let followed = toks.get(t + 1).is_some_and(|n| n.1 == b':');
        (is_key && followed).then_some(start)
    })
}

/// Offset of the `idx`-th element of the top-level array `key`.
fn element_offset(text: &str, key: &str, idx: usize) -> Option<usize> {
    let start = key_offset(text, key)?;
    let bytes = text.as_bytes();
    let open = start + text[start..].find('[')?;
    let mut count = 0;
    let mut depth = 0i32;
    let mut in_str = false;
    let mut expecting = true;
    let mut i = open + 1;
    while i < bytes.len() {
        let c = bytes[i];
        if in_str {
            if c == b'\\' {
                i += 1;
            } else if c == b'"' {
                in_str = false;
            }
        } else if depth == 0 && c == b']' {
            return None;
        } else if depth == 0 && c == b',' {
            count += 1;
            expecting = true;
        } else if !c.is_ascii_whitespace() {
            if expecting && depth == 0 {
                if count == idx {
                    return Some(i);
                }
                expecting = false;
            }
            match c {
                b'"' => in_str = true,
                b'{' | b'[' => depth += 1,
                b'}' | b']' => depth -= 1,
                _ => {}
            }
        }
        i += 1;
    }
    None
}
