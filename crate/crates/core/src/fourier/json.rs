use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{FieldShape, FourierField, Parity};
use super::layout::TorusIndex;
use crate::error::{Error, Result};

/// One stored coefficient vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffEntry {
    pub k: Vec<i32>,
    pub l: i32,
    /// Action exponent vector.
    pub power: Vec<u32>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Serialized form of a [`FourierField`]; zero coefficient vectors are omitted
/// and entries are ordered by `(power, l, k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDoc {
    pub d: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub q_y: usize,
    pub r: f64,
    pub parity: Parity,
    #[serde(default = "default_time")]
    pub time: bool,
    pub coeffs: Vec<CoeffEntry>,
}

fn default_time() -> bool {
    true
}

/// Tolerance for parity and reality checks on loaded documents.
const LOAD_TOL: f64 = 1e-12;

impl FourierField {
    pub fn to_doc(&self) -> FieldDoc {
        let lay = self.layout();
        let m = self.m();
        let mut coeffs = Vec::new();
        for (p, alpha) in lay.monomials.iter().enumerate() {
            for (mode, idx) in lay.modes.iter().enumerate() {
                let o = self.offset(p, mode);
                let v = &self.coeffs()[o..o + m];
                if v.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                    continue;
                }
                coeffs.push(CoeffEntry {
                    k: idx.k.clone(),
                    l: idx.l,
                    power: alpha.clone(),
                    re: v.iter().map(|c| c.re).collect(),
                    im: v.iter().map(|c| c.im).collect(),
                });
            }
        }
        FieldDoc {
            d: self.d(),
            m,
            n: self.cutoff(),
            q_y: self.q_y(),
            r: self.radius(),
            parity: self.parity(),
            time: self.time(),
            coeffs,
        }
    }

    /// Rebuilds a field, rejecting out-of-range indices and documents whose
    /// coefficients violate the reality condition or the declared parity.
    pub fn from_doc(doc: &FieldDoc) -> Result<Self> {
        if doc.d == 0 || doc.m == 0 {
            return Err(Error::Validation("field needs d >= 1 and m >= 1".into()));
        }
        if !(doc.r >= 0.0) || !doc.r.is_finite() {
            return Err(Error::Validation(format!("radius {} is not a finite nonnegative number", doc.r)));
        }
        let mut f = FourierField::zeros(FieldShape::new(doc.d, doc.m, doc.n, doc.q_y, doc.r, doc.time));
        for (i, e) in doc.coeffs.iter().enumerate() {
            let ctx = |msg: String| Error::Validation(format!("coeffs[{i}]: {msg}"));
            if e.k.len() != doc.d {
                return Err(ctx(format!("k has length {}, expected {}", e.k.len(), doc.d)));
            }
            if e.power.len() != doc.d {
                return Err(ctx(format!("power has length {}, expected {}", e.power.len(), doc.d)));
            }
            if e.re.len() != doc.m || e.im.len() != doc.m {
                return Err(ctx(format!("re/im must have length {}", doc.m)));
            }
            if !doc.time && e.l != 0 {
                return Err(ctx("time-independent field with l != 0".into()));
            }
            let idx = TorusIndex::new(e.k.clone(), e.l);
            if idx.order() > doc.n {
                return Err(ctx(format!("|k| + |l| = {} exceeds N = {}", idx.order(), doc.n)));
            }
            if e.power.iter().sum::<u32>() as usize > doc.q_y {
                return Err(ctx(format!("power {:?} exceeds q_y = {}", e.power, doc.q_y)));
            }
            if e.re.iter().chain(&e.im).any(|v| !v.is_finite()) {
                return Err(ctx("non-finite coefficient".into()));
            }
            let vals: Vec<Complex64> = e.re.iter().zip(&e.im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            f.set_coeff(&idx, &e.power, &vals)?;
        }
        let real = f.reality_defect();
        if real > LOAD_TOL {
            return Err(Error::Validation(format!("coefficients are not conjugate symmetric (defect {real:.3e})")));
        }
        f.tagged(doc.parity)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("field documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FieldDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("field document (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        })?;
        Self::from_doc(&doc)
    }
}
