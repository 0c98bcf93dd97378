//! Field schemas for structured model output: declaration, wire rendering,
//! and validation of parsed JSON against the declared fields.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The kinds of fields a structured response may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    String,
    StringList,
    Boolean,
}

impl FieldKind {
    fn json_schema(&self) -> serde_json::Value {
        match self {
            FieldKind::String => serde_json::json!({"type": "string"}),
            FieldKind::StringList => {
                serde_json::json!({"type": "array", "items": {"type": "string"}})
            }
            FieldKind::Boolean => serde_json::json!({"type": "boolean"}),
        }
    }

    fn describe(&self) -> &'static str {
        match self {
            FieldKind::String => "a string",
            FieldKind::StringList => "a list of strings",
            FieldKind::Boolean => "a boolean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub required: bool,
}

impl FieldSpec {
    pub fn required(name: impl Into<String>, kind: FieldKind) -> Self {
        Self {
            name: name.into(),
            kind,
            required: true,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("schema has no fields")]
    Empty,
    #[error("duplicate field name {0:?}")]
    DuplicateField(String),
}

/// A named set of output fields the model must produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub name: String,
    pub fields: Vec<FieldSpec>,
}

impl SchemaSpec {
    pub fn new(name: impl Into<String>, fields: Vec<FieldSpec>) -> Result<Self, SchemaError> {
        if fields.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                return Err(SchemaError::DuplicateField(f.name.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            fields,
        })
    }

    /// The `response_format` object for the chat-completions wire protocol.
    /// Strict mode requires every property to be listed as required, so the
    /// wire `required` array names all fields regardless of local optionality.
    pub fn to_response_format(&self) -> serde_json::Value {
        let mut properties = serde_json::Map::new();
        let mut required = Vec::new();
        for f in &self.fields {
            properties.insert(f.name.clone(), f.kind.json_schema());
            required.push(serde_json::Value::String(f.name.clone()));
        }
        serde_json::json!({
            "type": "json_schema",
            "json_schema": {
                "name": self.name,
                "strict": true,
                "schema": {
                    "type": "object",
                    "properties": properties,
                    "required": required,
                    "additionalProperties": false
                }
            }
        })
    }

    /// One-line description of the expected object, used in prompts and in
    /// corrective retry instructions.
    pub fn shape_hint(&self) -> String {
        let fields: Vec<String> = self
            .fields
            .iter()
            .map(|f| format!("\"{}\": {}", f.name, f.kind.describe()))
            .collect();
        format!("a single JSON object with fields {{{}}}", fields.join(", "))
    }

    /// Check a parsed JSON value against the schema and convert it into a
    /// field map. Unknown keys are ignored; a `null` optional field counts
    /// as absent. The error string is human-readable and fed back to the
    /// model on retry.
    pub fn validate(&self, value: &serde_json::Value) -> Result<FieldMap, String> {
        let obj = value
            .as_object()
            .ok_or_else(|| "top-level JSON value is not an object".to_string())?;
        let mut out = FieldMap::new();
        for f in &self.fields {
            match obj.get(&f.name) {
                None | Some(serde_json::Value::Null) => {
                    if f.required {
                        return Err(format!("required field \"{}\" is missing", f.name));
                    }
                }
                Some(v) => {
                    let parsed = match (f.kind, v) {
                        (FieldKind::String, serde_json::Value::String(s)) => {
                            FieldValue::Str(s.clone())
                        }
                        (FieldKind::Boolean, serde_json::Value::Bool(b)) => FieldValue::Bool(*b),
                        (FieldKind::StringList, serde_json::Value::Array(items)) => {
                            let mut list = Vec::with_capacity(items.len());
                            for item in items {
                                match item.as_str() {
                                    Some(s) => list.push(s.to_owned()),
                                    None => {
                                        return Err(format!(
                                            "field \"{}\" must contain only strings",
                                            f.name
                                        ))
                                    }
                                }
                            }
                            FieldValue::List(list)
                        }
                        _ => {
                            return Err(format!(
                                "field \"{}\" must be {}",
                                f.name,
                                f.kind.describe()
                            ))
                        }
                    };
                    out.insert(f.name.clone(), parsed);
                }
            }
        }
        Ok(out)
    }
}

/// A validated structured-output field value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Str(String),
    List(Vec<String>),
    Bool(bool),
}

impl FieldValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            FieldValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            FieldValue::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            FieldValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Str(s) => f.write_str(s),
            FieldValue::List(v) => write!(f, "{}", v.join(", ")),
            FieldValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Field name → validated value.
pub type FieldMap = BTreeMap<String, FieldValue>;

#[cfg(test)]
mod tests {
    use super::*;

    fn two_field_schema() -> SchemaSpec {
        SchemaSpec::new(
            "highlighting",
            vec![
                FieldSpec::required("answer", FieldKind::String),
                FieldSpec::required("text_extracts", FieldKind::StringList),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_duplicate_field_names() {
        let err = SchemaSpec::new(
            "s",
            vec![
                FieldSpec::required("x", FieldKind::String),
                FieldSpec::required("x", FieldKind::Boolean),
            ],
        )
        .unwrap_err();
        assert_eq!(err, SchemaError::DuplicateField("x".into()));
    }

    #[test]
    fn validates_well_formed_object() {
        let schema = two_field_schema();
        let value = serde_json::json!({"answer": "x", "text_extracts": ["y", "z"]});
        let map = schema.validate(&value).unwrap();
        assert_eq!(map["answer"].as_str(), Some("x"));
        assert_eq!(
            map["text_extracts"].as_list(),
            Some(&["y".to_string(), "z".to_string()][..])
        );
    }

    #[test]
    fn reports_missing_and_mistyped_fields() {
        let schema = two_field_schema();
        let missing = schema
            .validate(&serde_json::json!({"answer": "x"}))
            .unwrap_err();
        assert!(missing.contains("text_extracts"));
        let mistyped = schema
            .validate(&serde_json::json!({"answer": 5, "text_extracts": []}))
            .unwrap_err();
        assert!(mistyped.contains("answer"));
        let bad_item = schema
            .validate(&serde_json::json!({"answer": "x", "text_extracts": [1]}))
            .unwrap_err();
        assert!(bad_item.contains("only strings"));
    }

    #[test]
    fn response_format_lists_all_fields_as_required() {
        let rf = two_field_schema().to_response_format();
        assert_eq!(rf["type"], "json_schema");
        assert_eq!(rf["json_schema"]["strict"], true);
        let required = rf["json_schema"]["schema"]["required"].as_array().unwrap();
        assert_eq!(required.len(), 2);
        assert_eq!(
            rf["json_schema"]["schema"]["additionalProperties"],
            serde_json::Value::Bool(false)
        );
    }
}
