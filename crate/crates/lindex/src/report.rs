//! Uniform result shape for every check, plus CSV helpers.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::multiindex::MultiIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Indeterminate => 2,
        }
    }

    /// Fail dominates indeterminate, which dominates pass.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Indeterminate, _) | (_, Indeterminate) => Indeterminate,
            _ => Pass,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<MultiIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Witness {
    pub fn at(z: &[C64]) -> Witness {
        Witness {
            point: Some(point_repr(z)),
            ..Default::default()
        }
    }

    pub fn index(mut self, k: MultiIndex) -> Witness {
        self.index = Some(k);
        self
    }

    pub fn value(mut self, v: f64) -> Witness {
        self.value = Some(v);
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Witness {
        self.note = Some(s.into());
        self
    }
}

pub fn point_repr(z: &[C64]) -> Vec<[f64; 2]> {
    z.iter().map(|w| [w.re, w.im]).collect()
}

pub fn point_string(z: &[C64]) -> String {
    let parts: Vec<String> = z.iter().map(|w| format!("{}{:+}i", w.re, w.im)).collect();
    format!("({})", parts.join(", "))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub check: String,
    pub verdict: Verdict,
    pub constants: BTreeMap<String, f64>,
    pub worst_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub samples_used: usize,
    pub samples_skipped: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CriterionReport {
    pub fn new(check: impl Into<String>) -> CriterionReport {
        CriterionReport {
            check: check.into(),
            verdict: Verdict::Pass,
            constants: BTreeMap::new(),
            worst_margin: f64::INFINITY,
            witness: None,
            samples_used: 0,
            samples_skipped: 0,
            notes: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, v: f64) {
        self.constants.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Applies the skip rule: more than 10% skipped samples makes a pass indeterminate.
    pub fn apply_skip_rule(&mut self) {
        let total = self.samples_used + self.samples_skipped;
        if self.verdict == Verdict::Pass && total > 0 && self.samples_skipped * 10 > total {
            self.verdict = Verdict::Indeterminate;
            self.note("more than 10% of samples were 0/0 and skipped");
        }
    }
}

/// `printf("%.17g", x)`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..17).contains(&exp) {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let prec = (16 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", prec, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV text with a header row and `%.17g` cells.
pub fn to_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|&v| fmt_g17(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
