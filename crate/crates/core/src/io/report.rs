//! JSON report fragments. Every float is rounded to 7 significant digits.

use serde::Serialize;
use serde_json::{json, Map, Number, Value};

use crate::certificate::{CandidateRecord, Certificate, CombinationScan, FailureReport};
use crate::linalg;
use crate::signal::{SignalViolation, SwitchingSignal};
use crate::system::{family_bound_m, Instance};
use crate::verify::{DecayEstimate, PrefixNorms};

pub fn round_sig7(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.6e}").parse().expect("formatted float parses")
}

/// Shortest decimal form of `x` rounded to 7 significant digits; `inf`,
/// `-inf` and `NaN` for non-finite values.
pub fn fmt_sig7(x: f64) -> String {
    match Number::from_f64(round_sig7(x)) {
        Some(n) => n.to_string(),
        None => x.to_string(),
    }
}

/// A rounded JSON number, or a string for non-finite values.
pub fn num(x: f64) -> Value {
    match Number::from_f64(round_sig7(x)) {
        Some(n) => Value::Number(n),
        None => Value::String(x.to_string()),
    }
}

/// Serializes `value` and rounds every float in it.
pub fn rounded<T: Serialize>(value: &T) -> Value {
    fn walk(v: Value) -> Value {
        match v {
            Value::Number(n) if n.is_f64() => num(n.as_f64().expect("f64 number")),
            Value::Array(items) => Value::Array(items.into_iter().map(walk).collect()),
            Value::Object(map) => {
                Value::Object(map.into_iter().map(|(k, v)| (k, walk(v))).collect())
            }
            other => other,
        }
    }
    walk(serde_json::to_value(value).expect("report values serialize"))
}

pub fn instance_summary(instance: &Instance, names: &[String]) -> Value {
    let family = &instance.family;
    let subsystems: Vec<Value> = (1..=family.len())
        .map(|k| {
            let a = family.matrix(k);
            json!({
                "index": k,
                "name": names.get(k - 1).cloned().unwrap_or_else(|| format!("A{k}")),
                "spectral_radius": num(linalg::spectral_radius(a).unwrap_or(f64::NAN)),
                "spectral_norm": num(linalg::spectral_norm(a).unwrap_or(f64::NAN)),
            })
        })
        .collect();
    let edges: Vec<[usize; 2]> = instance.graph.edges().map(|(u, v)| [u, v]).collect();
    json!({
        "dimension": family.dimension(),
        "delta": instance.bounds.delta,
        "Delta": instance.bounds.max,
        "edges": edges,
        "M": num(family_bound_m(family)),
        "subsystems": subsystems,
    })
}

pub fn scan(scan: &CombinationScan) -> Value {
    json!({
        "stable": scan.stable.len(),
        "exhausted": rounded(&scan.exhausted),
    })
}

pub fn certificate(cert: &Certificate) -> Value {
    let c = &cert.combination;
    let eigenvalues: Vec<Value> = linalg::eigenvalues(&c.combo)
        .map(|ev| {
            let mut ev: Vec<_> = ev.into_iter().collect();
            ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
            ev.iter()
                .map(|z| json!({ "re": num(z.re), "im": num(z.im) }))
                .collect()
        })
        .unwrap_or_default();
    json!({
        "kind": cert.kind.as_str(),
        "combination": {
            "i": c.i,
            "j": c.j,
            "p": c.p,
            "q": c.q,
            "m": c.m,
            "mbar": c.mbar,
            "rho": num(c.rho),
            "matrix": c.combo.to_rows().iter().map(|r| r.iter().map(|&x| num(x)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "eigenvalues": eigenvalues,
        },
        "paths": rounded(&cert.paths),
        "commutator_bounds": rounded(&cert.bounds),
        "quantities": rounded(&cert.quantities),
        "lambda": num(cert.lambda),
        "lambda_max": num(cert.lambda_max),
        "lhs": num(cert.lhs),
        "M": num(cert.big_m),
    })
}

fn candidate(r: &CandidateRecord) -> Value {
    json!({
        "kind": r.kind.as_str(),
        "i": r.i,
        "j": r.j,
        "p": r.p,
        "q": r.q,
        "m": r.m,
        "rho": num(r.rho),
        "paths": rounded(&r.paths),
        "lhs_at_zero": num(r.lhs_at_zero),
        "lhs_at_lambda": r.lhs_at_lambda.map_or(Value::Null, num),
    })
}

pub fn failure(report: &FailureReport) -> Value {
    json!({
        "message": "no certificate found within the search caps",
        "candidates": report.candidates.iter().map(candidate).collect::<Vec<_>>(),
    })
}

pub fn signal(signal: &SwitchingSignal, violations: &[SignalViolation]) -> Value {
    let blocks = |bs: &[crate::signal::Block]| -> Vec<[u64; 2]> {
        bs.iter()
            .map(|b| [b.index as u64, u64::from(b.dwell)])
            .collect()
    };
    let mut out = Map::new();
    match signal.generator() {
        Some(g) => {
            out.insert("kind".into(), rounded(&g.kind));
            out.insert("seq1".into(), json!(blocks(&g.seq1)));
            out.insert("seq2".into(), json!(blocks(&g.seq2)));
        }
        None => {
            out.insert("kind".into(), json!("explicit"));
        }
    }
    out.insert("horizon".into(), json!(signal.horizon()));
    out.insert("blocks".into(), json!(signal.blocks().len()));
    out.insert("admissible".into(), json!(violations.is_empty()));
    out.insert("violations".into(), rounded(&violations));
    Value::Object(out)
}

pub fn simulation(
    prefix: &PrefixNorms,
    trials: usize,
    seed: u64,
    estimate: Option<(f64, &DecayEstimate)>,
) -> Value {
    let mut out = Map::new();
    out.insert("trials".into(), json!(trials));
    out.insert("seed".into(), json!(seed));
    out.insert("prefix_steps".into(), json!(prefix.norms.len()));
    out.insert(
        "final_prefix_norm".into(),
        prefix.norms.last().map_or(Value::Null, |&n| num(n)),
    );
    if let Some((lambda, e)) = estimate {
        out.insert(
            "decay".into(),
            json!({
                "lambda": num(lambda),
                "c_hat": num(e.c_hat),
                "lambda_hat": num(e.lambda_hat),
                "satisfied": e.satisfied,
                "envelope_holds": e.envelope_holds,
                "trajectories_hold": e.trajectories_hold,
                "underflow": e.underflow,
            }),
        );
    }
    Value::Object(out)
}
