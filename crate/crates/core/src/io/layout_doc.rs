use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::scene::{InstanceLayout, Learnable};

pub const LAYOUT_VERSION: u64 = 1;

/// Serialized scene layout: what an external language model is asked to
/// produce. Units are meters, +z is up, yaw is in degrees about +z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub version: u64,
    pub scene_prompt: String,
    pub instances: Vec<InstanceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub id: String,
    pub prompt: String,
    pub center: [f64; 3],
    /// Box size along the layout's own x, y, z axes before yaw.
    pub extents: [f64; 3],
    pub scale_factor: f64,
    pub yaw_degrees: f64,
    #[serde(default)]
    pub learnable: Learnable,
}

/// One schema violation, located by a JSON path such as
/// `instances[0].extents[1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("{} schema violation(s):\n{}", .0.len(), .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Schema(Vec<Violation>),
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn unknown_fields(&mut self, obj: &Map<String, Value>, allowed: &[&str], path: &str) {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                let p = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                self.fail(p, "unknown field");
            }
        }
    }

    fn string(&mut self, obj: &Map<String, Value>, key: &str, path: &str) -> Option<String> {
        let p = join(path, key);
        match obj.get(key) {
            None => self.fail(p, "missing required field"),
            Some(Value::String(s)) if s.trim().is_empty() => self.fail(p, "must be a non-empty string"),
            Some(Value::String(s)) => return Some(s.clone()),
            Some(_) => self.fail(p, "must be a string"),
        }
        None
    }

    fn number(&mut self, v: Option<&Value>, p: &str) -> Option<f64> {
        match v {
            None => self.fail(p, "missing required field"),
            Some(Value::Number(n)) => match n.as_f64() {
                Some(x) if x.is_finite() => return Some(x),
                _ => self.fail(p, "must be a finite number"),
            },
            Some(_) => self.fail(p, "must be a number"),
        }
        None
    }

    fn vec3(&mut self, obj: &Map<String, Value>, key: &str, path: &str, positive: bool) -> Option<[f64; 3]> {
        let p = join(path, key);
        let arr = match obj.get(key) {
            None => {
                self.fail(p, "missing required field");
                return None;
            }
            Some(Value::Array(a)) if a.len() == 3 => a,
            Some(_) => {
                self.fail(p, "must be an array of 3 numbers");
                return None;
            }
        };
        let mut out = [0.0; 3];
        let mut ok = true;
        for (k, v) in arr.iter().enumerate() {
            let pk = format!("{p}[{k}]");
            match self.number(Some(v), &pk) {
                Some(x) if positive && x <= 0.0 => {
                    self.fail(pk, format!("must be > 0, got {x}"));
                    ok = false;
                }
                Some(x) => out[k] = x,
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn learnable(&mut self, v: Option<&Value>, path: &str) -> Learnable {
        let p = join(path, "learnable");
        let mut out = Learnable::NONE;
        let Some(v) = v else { return out };
        let Value::Object(obj) = v else {
            self.fail(p, "must be an object");
            return out;
        };
        self.unknown_fields(obj, &["center", "scale", "yaw", "opacity"], &p);
        for (key, slot) in [("center", &mut out.center), ("scale", &mut out.scale), ("yaw", &mut out.yaw), ("opacity", &mut out.opacity)] {
            match obj.get(key) {
                None => {}
                Some(Value::Bool(b)) => *slot = *b,
                Some(_) => self.fail(join(&p, key), "must be a boolean"),
            }
        }
        out
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Parses and validates a layout document, reporting every violation found.
pub fn parse_layout(bytes: &[u8]) -> Result<LayoutDocument, LayoutError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| LayoutError::Syntax(e.to_string()))?;
    let mut c = Checker { violations: Vec::new() };
    let Value::Object(root) = &value else {
        return Err(LayoutError::Schema(vec![Violation {
            path: "$".into(),
            message: "document must be a JSON object".into(),
        }]));
    };
    c.unknown_fields(root, &["version", "scene_prompt", "instances"], "");
    let version = match root.get("version") {
        None => {
            c.fail("version", "missing required field");
            None
        }
        Some(Value::Number(n)) if n.as_u64() == Some(LAYOUT_VERSION) => Some(LAYOUT_VERSION),
        Some(v) => {
            c.fail("version", format!("unsupported version {v}, expected {LAYOUT_VERSION}"));
            None
        }
    };
    let scene_prompt = c.string(root, "scene_prompt", "");

    let mut instances = Vec::new();
    match root.get("instances") {
        None => c.fail("instances", "missing required field"),
        Some(Value::Array(items)) => {
            let mut first_seen: BTreeMap<String, usize> = BTreeMap::new();
            for (i, item) in items.iter().enumerate() {
                let path = format!("instances[{i}]");
                let Value::Object(obj) = item else {
                    c.fail(path, "must be an object");
                    continue;
                };
                c.unknown_fields(obj, &["id", "prompt", "center", "extents", "scale_factor", "yaw_degrees", "learnable"], &path);
                let id = c.string(obj, "id", &path);
                if let Some(id) = &id {
                    if let Some(&j) = first_seen.get(id) {
                        c.fail(join(&path, "id"), format!("duplicate id {id:?} (also instances[{j}].id)"));
                    } else {
                        first_seen.insert(id.clone(), i);
                    }
                }
                let prompt = c.string(obj, "prompt", &path);
                let center = c.vec3(obj, "center", &path, false);
                let extents = c.vec3(obj, "extents", &path, true);
                let scale_factor = c.number(obj.get("scale_factor"), &join(&path, "scale_factor"));
                if let Some(k) = scale_factor {
                    if k <= 0.0 {
                        c.fail(join(&path, "scale_factor"), format!("must be > 0, got {k}"));
                    }
                }
                let yaw_degrees = c.number(obj.get("yaw_degrees"), &join(&path, "yaw_degrees"));
                let learnable = c.learnable(obj.get("learnable"), &path);
                if let (Some(id), Some(prompt), Some(center), Some(extents), Some(scale_factor), Some(yaw_degrees)) =
                    (id, prompt, center, extents, scale_factor, yaw_degrees)
                {
                    instances.push(InstanceSpec {
                        id,
                        prompt,
                        center,
                        extents,
                        scale_factor,
                        yaw_degrees,
                        learnable,
                    });
                }
            }
        }
        Some(_) => c.fail("instances", "must be an array"),
    }

    if !c.violations.is_empty() {
        return Err(LayoutError::Schema(c.violations));
    }
    Ok(LayoutDocument {
        version: version.expect("checked"),
        scene_prompt: scene_prompt.expect("checked"),
        instances,
    })
}

impl LayoutDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout documents always serialize")
    }

    /// Layouts with yaw converted to radians.
    pub fn to_layouts(&self) -> Vec<InstanceLayout> {
        self.instances
            .iter()
            .map(|s| {
                InstanceLayout::new(
                    s.id.clone(),
                    s.prompt.clone(),
                    Vector3::from(s.center),
                    Vector3::from(s.extents),
                    s.scale_factor,
                    s.yaw_degrees.to_radians(),
                )
                .expect("validated document")
                .with_learnable(s.learnable)
            })
            .collect()
    }

    /// Document describing `layouts`, reusing this document's entry for any
    /// layout it still describes exactly (so e.g. `yaw_degrees` keeps its
    /// original text instead of a radians round trip).
    pub fn sync<'a>(&self, scene_prompt: impl Into<String>, layouts: impl IntoIterator<Item = &'a InstanceLayout>) -> Self {
        let instances = layouts
            .into_iter()
            .map(|l| {
                self.instances
                    .iter()
                    .find(|s| s.id == l.id && s.to_layout().as_ref() == Ok(l))
                    .cloned()
                    .unwrap_or_else(|| InstanceSpec::from_layout(l))
            })
            .collect();
        Self { version: LAYOUT_VERSION, scene_prompt: scene_prompt.into(), instances }
    }

    pub fn from_layouts<'a>(scene_prompt: impl Into<String>, layouts: impl IntoIterator<Item = &'a InstanceLayout>) -> Self {
        Self {
            version: LAYOUT_VERSION,
            scene_prompt: scene_prompt.into(),
            instances: layouts.into_iter().map(InstanceSpec::from_layout).collect(),
        }
    }
}

impl InstanceSpec {
    pub fn from_layout(l: &InstanceLayout) -> Self {
        Self {
            id: l.id.clone(),
            prompt: l.prompt.clone(),
            center: [l.center.x, l.center.y, l.center.z],
            extents: [l.extents.x, l.extents.y, l.extents.z],
            scale_factor: l.scale_factor,
            yaw_degrees: l.yaw.to_degrees(),
            learnable: l.learnable,
        }
    }

    /// Validates the spec as a standalone instance.
    pub fn to_layout(&self) -> Result<InstanceLayout, LayoutError> {
        let doc = LayoutDocument {
            version: LAYOUT_VERSION,
            scene_prompt: "-".into(),
            instances: vec![self.clone()],
        };
        let checked = parse_layout(doc.to_json().as_bytes())?;
        Ok(checked.to_layouts().remove(0))
    }
}
