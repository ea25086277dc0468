#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

pub const SCHEMA: &str = include_str!("../../schema/report.schema.json");
pub const GOLDEN: &str = "tests/golden/example_report.json";
pub const UPDATE_GOLDEN_VAR: &str = "SPARSECMD_UPDATE_GOLDEN";

pub fn sparsecmd(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsecmd"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Validates `inst` against the subset of JSON Schema 2020-12 that the bundled
/// report schema uses. Unknown keywords are a test failure, so the schema
/// cannot silently outgrow the checker.
pub fn schema_errors(schema: &Value, inst: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    check(schema, schema, inst, "$", &mut errors);
    errors
}

fn resolve<'a>(root: &'a Value, reference: &str) -> &'a Value {
    let pointer = reference
        .strip_prefix('#')
        .unwrap_or_else(|| panic!("non-local $ref {reference}"));
    root.pointer(pointer)
        .unwrap_or_else(|| panic!("dangling $ref {reference}"))
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64() || v.as_f64().is_some_and(|f| f.fract() == 0.0),
        other => panic!("unknown type {other}"),
    }
}

fn check(root: &Value, schema: &Value, inst: &Value, path: &str, errors: &mut Vec<String>) {
    let obj = schema.as_object().expect("schema node is an object");
    for (key, rule) in obj {
        match key.as_str() {
            "$schema" | "$id" | "title" | "description" | "$defs" => {}
            "$ref" => check(
                root,
                resolve(root, rule.as_str().expect("string $ref")),
                inst,
                path,
                errors,
            ),
            "type" => {
                let names: Vec<&str> = match rule {
                    Value::String(s) => vec![s.as_str()],
                    Value::Array(a) => a.iter().map(|t| t.as_str().expect("type name")).collect(),
                    _ => panic!("bad type keyword"),
                };
                if !names.iter().any(|n| type_matches(n, inst)) {
                    errors.push(format!("{path}: expected {names:?}, got {inst}"));
                }
            }
            "enum" => {
                if !rule.as_array().expect("enum array").contains(inst) {
                    errors.push(format!("{path}: {inst} not in {rule}"));
                }
            }
            "required" => {
                if let Some(o) = inst.as_object() {
                    for name in rule.as_array().expect("required array") {
                        let name = name.as_str().expect("field name");
                        if !o.contains_key(name) {
                            errors.push(format!("{path}: missing {name}"));
                        }
                    }
                }
            }
            "properties" => {
                if let Some(o) = inst.as_object() {
                    for (name, sub) in rule.as_object().expect("properties object") {
                        if let Some(v) = o.get(name) {
                            check(root, sub, v, &format!("{path}.{name}"), errors);
                        }
                    }
                }
            }
            "additionalProperties" => {
                assert_eq!(
                    rule,
                    &Value::Bool(false),
                    "only additionalProperties: false is supported"
                );
                if let Some(o) = inst.as_object() {
                    let known = obj.get("properties").and_then(Value::as_object);
                    for name in o.keys() {
                        if !known.is_some_and(|k| k.contains_key(name)) {
                            errors.push(format!("{path}: unexpected field {name}"));
                        }
                    }
                }
            }
            "items" => {
                if let Some(a) = inst.as_array() {
                    for (i, v) in a.iter().enumerate() {
                        check(root, rule, v, &format!("{path}[{i}]"), errors);
                    }
                }
            }
            "minItems" | "maxItems" => {
                if let Some(a) = inst.as_array() {
                    let bound = rule.as_u64().expect("count") as usize;
                    let ok = if key == "minItems" {
                        a.len() >= bound
                    } else {
                        a.len() <= bound
                    };
                    if !ok {
                        errors.push(format!("{path}: {} items violates {key} {bound}", a.len()));
                    }
                }
            }
            "minimum" | "exclusiveMinimum" => {
                if let Some(x) = inst.as_f64() {
                    let bound = rule.as_f64().expect("numeric bound");
                    let ok = if key == "minimum" {
                        x >= bound
                    } else {
                        x > bound
                    };
                    if !ok {
                        errors.push(format!("{path}: {x} violates {key} {bound}"));
                    }
                }
            }
            "oneOf" => {
                let branches = rule.as_array().expect("oneOf array");
                let matching = branches
                    .iter()
                    .filter(|b| {
                        let mut sub = Vec::new();
                        check(root, b, inst, path, &mut sub);
                        sub.is_empty()
                    })
                    .count();
                if matching != 1 {
                    errors.push(format!("{path}: matches {matching} oneOf branches"));
                }
            }
            other => panic!("schema keyword {other} is not supported by the test validator"),
        }
    }
}

/// Same shape, same strings/bools/integers, floats within `rel`.
pub fn json_close(a: &Value, b: &Value, rel: f64, path: &str, diffs: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                match (x.get(k), y.get(k)) {
                    (Some(u), Some(v)) => json_close(u, v, rel, &format!("{path}.{k}"), diffs),
                    _ => diffs.push(format!("{path}.{k}: present on one side only")),
                }
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                json_close(u, v, rel, &format!("{path}[{i}]"), diffs);
            }
        }
        (Value::Number(x), Value::Number(y)) if x.is_f64() || y.is_f64() => {
            let (u, v) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (u - v).abs() > rel * u.abs().max(v.abs()).max(1e-300) && (u - v).abs() > 1e-15 {
                diffs.push(format!("{path}: {u} vs {v}"));
            }
        }
        _ if a == b => {}
        _ => diffs.push(format!("{path}: {a} vs {b}")),
    }
}

use rand::Rng;
use sparsecmd_core::plant::validate_plant;
use sparsecmd_core::{Matrix, PlantModel, ReferenceData, SplineBasis};

/// `A = M − (‖M‖₁ + margin)I` is stable; redraw until reachable and observable.
pub fn random_basis(rng: &mut impl Rng, max_order: usize, max_count: usize) -> SplineBasis {
    let n = rng.gen_range(1..=max_order);
    let plant = loop {
        let m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = m.shift_diag(-(m.norm_1() + rng.gen_range(0.1..1.0)));
        let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = PlantModel::new(a, b, c).unwrap();
        if validate_plant(&p).unwrap().passed() {
            break p;
        }
    };
    let count = rng.gen_range(1..=max_count);
    let mut t = 0.0;
    let instants: Vec<f64> = (0..count)
        .map(|_| {
            t += rng.gen_range(0.2..1.0);
            t
        })
        .collect();
    let values = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SplineBasis::new(plant, ReferenceData::new(instants, values).unwrap()).unwrap()
}

/// `U diag(σ) Vᵀ` with Haar-ish orthogonal factors and `σ ∈ [lo, hi]`.
pub fn random_well_conditioned(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> Matrix {
    let u = random_orthogonal(rng, rows);
    let v = random_orthogonal(rng, cols);
    let k = rows.min(cols);
    let s: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..=hi)).collect();
    Matrix::from_fn(rows, cols, |i, j| {
        (0..k).map(|l| u[(i, l)] * s[l] * v[(j, l)]).sum()
    })
}

fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for q in &cols {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}
