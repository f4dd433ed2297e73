//! The JSON game file.
//!
//! ```json
//! {
//!   "version": 1,
//!   "dims": [{"N": 3, "p": [0.3, 0.3], "q": [0.1, 0.1]}],
//!   "mixing": {"preset": {"type": "r_of_d", "r": 1}},
//!   "start": [2]
//! }
//! ```
//!
//! `p` and `q` may also be single numbers for constant rates. Instead of a
//! preset, `mixing` may list `subsets` (1-based dimensions) with `coeffs`,
//! each coefficient a number or a square matrix over all cells.

use kronruin_core::{preset_r_of_d, BirthDeathSpec, Coefficients, GameSpec, Matrix};
use serde_json::Value;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone)]
pub struct GameFile {
    pub game: GameSpec,
    pub start: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub horizon: Option<usize>,
    pub eps: Option<f64>,
}

/// A validation failure, with the path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn err<T>(field: impl Into<String>, message: impl Into<String>) -> Result<T, FieldError> {
    Err(FieldError {
        field: field.into(),
        message: message.into(),
    })
}

fn number(v: &Value, field: &str) -> Result<f64, FieldError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => err(field, "expected a finite number"),
    }
}

fn count(v: &Value, field: &str) -> Result<usize, FieldError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| FieldError {
            field: field.into(),
            message: "expected a nonnegative integer".into(),
        })
}

fn rates(v: Option<&Value>, field: &str, len: usize) -> Result<Vec<f64>, FieldError> {
    match v {
        None => err(field, "missing"),
        Some(Value::Array(a)) => {
            if a.len() != len {
                return err(field, format!("expected {len} entries, found {}", a.len()));
            }
            a.iter().enumerate().map(|(i, x)| number(x, &format!("{field}[{i}]"))).collect()
        }
        Some(x) => Ok(vec![number(x, field)?; len]),
    }
}

fn matrix(v: &Value, field: &str, n: usize) -> Result<Matrix, FieldError> {
    let Some(rows) = v.as_array() else {
        return err(field, "expected a number or a matrix");
    };
    if rows.len() != n {
        return err(field, format!("expected {n} rows, found {}", rows.len()));
    }
    let mut data = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        let f = format!("{field}[{i}]");
        let Some(row) = row.as_array() else {
            return err(f, "expected an array");
        };
        if row.len() != n {
            return err(f, format!("expected {n} entries, found {}", row.len()));
        }
        for (j, x) in row.iter().enumerate() {
            data.push(number(x, &format!("{field}[{i}][{j}]"))?);
        }
    }
    Matrix::from_vec(n, n, data).map_err(|e| FieldError {
        field: field.into(),
        message: e.to_string(),
    })
}

pub fn parse(text: &str) -> Result<GameFile, FieldError> {
    let root: Value = serde_json::from_str(text).map_err(|e| FieldError {
        field: "(document)".into(),
        message: format!("invalid JSON: {e}"),
    })?;
    let Some(obj) = root.as_object() else {
        return err("(document)", "expected a JSON object");
    };
    match obj.get("version") {
        None => return err("version", "missing"),
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(_) => return err("version", format!("unsupported, expected {SCHEMA_VERSION}")),
    }

    let Some(dims_v) = obj.get("dims") else {
        return err("dims", "missing");
    };
    let Some(dims_a) = dims_v.as_array() else {
        return err("dims", "expected an array");
    };
    if dims_a.is_empty() {
        return err("dims", "at least one dimension is required");
    }
    let mut dims = Vec::with_capacity(dims_a.len());
    for (j, d) in dims_a.iter().enumerate() {
        let f = format!("dims[{j}]");
        let Some(d) = d.as_object() else {
            return err(f, "expected an object");
        };
        let n = match d.get("N") {
            None => return err(format!("{f}.N"), "missing"),
            Some(v) => count(v, &format!("{f}.N"))?,
        };
        if n == 0 {
            return err(format!("{f}.N"), "must be at least 1");
        }
        let p = rates(d.get("p"), &format!("{f}.p"), n - 1)?;
        let q = rates(d.get("q"), &format!("{f}.q"), n - 1)?;
        let spec = BirthDeathSpec::new(n, p, q).map_err(|e| FieldError {
            field: f.clone(),
            message: e.to_string(),
        })?;
        dims.push(spec);
    }
    let d = dims.len();
    let cells: usize = dims.iter().map(BirthDeathSpec::n).product();

    let Some(mixing) = obj.get("mixing").and_then(Value::as_object) else {
        return err("mixing", "missing or not an object");
    };
    let game = if let Some(preset) = mixing.get("preset") {
        match preset.get("type").and_then(Value::as_str) {
            Some("r_of_d") => {}
            Some(other) => return err("mixing.preset.type", format!("unknown preset {other:?}")),
            None => return err("mixing.preset.type", "missing"),
        }
        let r = match preset.get("r") {
            None => return err("mixing.preset.r", "missing"),
            Some(v) => count(v, "mixing.preset.r")?,
        };
        if r == 0 || r > d {
            return err("mixing.preset.r", format!("must lie in 1..={d}"));
        }
        preset_r_of_d(dims, r).map_err(|e| FieldError {
            field: "mixing.preset".into(),
            message: e.to_string(),
        })?
    } else {
        let Some(subsets_a) = mixing.get("subsets").and_then(Value::as_array) else {
            return err("mixing.subsets", "missing or not an array (or give mixing.preset)");
        };
        let mut subsets = Vec::with_capacity(subsets_a.len());
        for (k, a) in subsets_a.iter().enumerate() {
            let f = format!("mixing.subsets[{k}]");
            let Some(a) = a.as_array() else {
                return err(f, "expected an array of dimensions");
            };
            let mut set = Vec::with_capacity(a.len());
            for (i, x) in a.iter().enumerate() {
                let j = count(x, &format!("{f}[{i}]"))?;
                if j == 0 || j > d {
                    return err(format!("{f}[{i}]"), format!("dimension must lie in 1..={d}"));
                }
                set.push(j - 1);
            }
            subsets.push(set);
        }
        let Some(coeffs_a) = mixing.get("coeffs").and_then(Value::as_array) else {
            return err("mixing.coeffs", "missing or not an array");
        };
        if coeffs_a.len() != subsets.len() {
            return err(
                "mixing.coeffs",
                format!("expected {} coefficients, found {}", subsets.len(), coeffs_a.len()),
            );
        }
        let coeffs = if coeffs_a.iter().all(Value::is_number) {
            Coefficients::Scalars(
                coeffs_a
                    .iter()
                    .enumerate()
                    .map(|(k, v)| number(v, &format!("mixing.coeffs[{k}]")))
                    .collect::<Result<_, _>>()?,
            )
        } else {
            Coefficients::Matrices(
                coeffs_a
                    .iter()
                    .enumerate()
                    .map(|(k, v)| matrix(v, &format!("mixing.coeffs[{k}]"), cells))
                    .collect::<Result<_, _>>()?,
            )
        };
        GameSpec::new(dims, subsets, coeffs).map_err(|e| FieldError {
            field: "mixing".into(),
            message: e.to_string(),
        })?
    };

    let start = match obj.get("start") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let Some(a) = v.as_array() else {
                return err("start", "expected an array of 1-based coordinates");
            };
            let cell: Vec<usize> = a
                .iter()
                .enumerate()
                .map(|(i, x)| count(x, &format!("start[{i}]")))
                .collect::<Result<_, _>>()?;
            check_start(&game, &cell).map_err(|m| FieldError {
                field: "start".into(),
                message: m,
            })?;
            Some(cell)
        }
    };
    let opt_count = |key: &str| -> Result<Option<usize>, FieldError> {
        obj.get(key).filter(|v| !v.is_null()).map(|v| count(v, key)).transpose()
    };
    let seed = obj
        .get("seed")
        .filter(|v| !v.is_null())
        .map(|v| v.as_u64().ok_or_else(|| FieldError {
            field: "seed".into(),
            message: "expected a nonnegative 64-bit integer".into(),
        }))
        .transpose()?;
    let runs = opt_count("runs")?;
    if runs == Some(0) {
        return err("runs", "must be at least 1");
    }
    let horizon = opt_count("horizon")?;
    let eps = obj.get("eps").filter(|v| !v.is_null()).map(|v| number(v, "eps")).transpose()?;
    if eps.is_some_and(|e| e <= 0.0) {
        return err("eps", "must be positive");
    }
    Ok(GameFile {
        game,
        start,
        seed,
        runs,
        horizon,
        eps,
    })
}

/// Checks that `cell` has one coordinate per dimension, each in range.
pub fn check_start(game: &GameSpec, cell: &[usize]) -> Result<(), String> {
    let sizes = game.sizes();
    if cell.len() != sizes.len() {
        return Err(format!("expected {} coordinates, found {}", sizes.len(), cell.len()));
    }
    for (j, (c, n)) in cell.iter().zip(&sizes).enumerate() {
        if *c == 0 || c > n {
            return Err(format!("coordinate {} = {c} must lie in 1..={n}", j + 1));
        }
    }
    Ok(())
}
