use serde::{Deserialize, Serialize};

use super::domain::GridDomain;
use super::field::NormField;
use crate::convex_kernel::{Norm2, DEFAULT_SAMPLES};
use crate::error::{Error, Result};

/// On-disk description of a norm field.
///
/// Preset fields carry only a name (`l2`, `linf`, `lp:<p>`, ...); custom fields
/// list the gauge samples of every node in grid order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldFile {
    pub domain: GridDomain,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauges: Option<Vec<Vec<f64>>>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl FieldFile {
    pub fn into_field(self) -> Result<NormField> {
        if self.preset == "custom" {
            let gauges = self
                .gauges
                .ok_or_else(|| Error::Parse("custom field needs a 'gauges' array".into()))?;
            let norms: Result<Vec<Norm2>> = gauges.into_iter().map(Norm2::from_gauge).collect();
            return NormField::new(self.domain, norms?);
        }
        if self.gauges.is_some() {
            return Err(Error::Parse("'gauges' is only allowed with preset 'custom'".into()));
        }
        NormField::constant(self.domain, &Norm2::preset(&self.preset, self.samples)?)
    }

    pub fn from_field(field: &NormField) -> Self {
        FieldFile {
            domain: *field.domain(),
            samples: field.samples(),
            preset: "custom".into(),
            gauges: Some(field.norms().iter().map(|m| m.gauge().to_vec()).collect()),
        }
    }
}

pub fn field_from_json(text: &str) -> Result<NormField> {
    let file: FieldFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_field()
}

pub fn field_to_json(field: &NormField) -> String {
    serde_json::to_string(&FieldFile::from_field(field)).expect("field serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_and_custom_round_trip() {
        let text = r#"{"domain":{"x0":0,"y0":0,"x1":1,"y1":1,"nx":3,"ny":3},"samples":16,"preset":"linf"}"#;
        let f = field_from_json(text).unwrap();
        assert_eq!(f.samples(), 16);
        let back = field_from_json(&field_to_json(&f)).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(field_from_json("{"), Err(Error::Parse(_))));
        let text = r#"{"domain":{"x0":0,"y0":0,"x1":1,"y1":1,"nx":3,"ny":3},"preset":"custom"}"#;
        assert!(matches!(field_from_json(text), Err(Error::Parse(_))));
        let text = r#"{"domain":{"x0":0,"y0":0,"x1":1,"y1":1,"nx":3,"ny":3},"preset":"l9"}"#;
        assert!(matches!(field_from_json(text), Err(Error::Parse(_))));
    }
}
