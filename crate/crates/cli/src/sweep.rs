//! Parameter sweeps emitted as CSV.

use serde_json::Value;

use ifc_core::model::parse_spec_value;
use ifc_core::outer_bound::region_with_mode;
use ifc_core::{Family, Spec};

use crate::{Failure, GlobalOpts, Outcome};

pub const HEADER: &str = "parameter,upper_kra,upper_etw,tin_lower,gap";

/// Twelve significant digits, scientific notation.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

fn set_entry(doc: &mut Value, pointer: &str, value: f64) -> Result<(), Failure> {
    let slot = doc
        .pointer_mut(pointer)
        .ok_or_else(|| Failure::usage(format!("schema error at '{pointer}': no such entry in template")))?;
    match slot {
        Value::Number(_) => *slot = value.into(),
        Value::Array(pair) if pair.len() == 2 => {
            pair[0] = value.into();
            pair[1] = 0.0.into();
        }
        _ => {
            return Err(Failure::usage(format!(
                "schema error at '{pointer}': swept entry must be a number or a [re, im] pair"
            )))
        }
    }
    Ok(())
}

pub fn run(
    opts: &GlobalOpts,
    template: &Value,
    pointers: &[String],
    from: f64,
    to: f64,
    steps: usize,
) -> Result<Outcome, Failure> {
    if steps == 0 {
        return Err(Failure::usage("--steps must be at least 1"));
    }
    if !from.is_finite() || !to.is_finite() {
        return Err(Failure::usage("sweep range must be finite"));
    }
    let cfg = opts.optimizer()?;
    let mut out = String::from(HEADER);
    out.push('\n');
    let mut consistent = true;
    for i in 0..steps {
        let x = if steps == 1 {
            from
        } else {
            from + (to - from) * i as f64 / (steps - 1) as f64
        };
        let mut doc = template.clone();
        for p in pointers {
            set_entry(&mut doc, p, x)?;
        }
        let h = match parse_spec_value(&doc)? {
            Spec::Channel(h) => h,
            Spec::Noise(_) => return Err(Failure::usage("sweep template must be a channel spec")),
        };
        let report = region_with_mode(&h, &cfg, &[Family::Kra, Family::Etw], true)?;
        consistent &= report.consistent;
        let best = |f: Family| {
            report
                .inequalities
                .iter()
                .filter(|q| q.family == f && q.subset.len() == h.k())
                .map(|q| q.value)
                .fold(f64::INFINITY, f64::min)
        };
        let (kra, etw) = (best(Family::Kra), best(Family::Etw));
        let lower = report.lower_bounds.best();
        let gap = kra.min(etw) - lower;
        out.push_str(&[x, kra, etw, lower, gap].map(fmt12).join(","));
        out.push('\n');
    }
    Ok(Outcome {
        stdout: out,
        code: if consistent { 0 } else { 4 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(0.0), "0.00000000000e0");
        assert_eq!(fmt12(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt12(2.0), "2.00000000000e0");
    }

    #[test]
    fn pointer_targets() {
        let mut doc: Value = serde_json::from_str(r#"{"H":[[[1,0],[0.5,0.2]]],"x":3}"#).unwrap();
        set_entry(&mut doc, "/H/0/1", 0.7).unwrap();
        assert_eq!(doc.pointer("/H/0/1").unwrap(), &serde_json::json!([0.7, 0.0]));
        set_entry(&mut doc, "/x", 1.5).unwrap();
        assert_eq!(doc["x"], 1.5);
        assert!(set_entry(&mut doc, "/nope", 1.0).is_err());
        assert!(set_entry(&mut doc, "/H", 1.0).is_err());
    }
}
