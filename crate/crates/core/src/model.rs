//! Static structure of the observed system: packages, classes, and the
//! stable class ordering shared by the city and the scatter history.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stable, system-wide class identifier.
pub type ClassId = String;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate class id `{0}`")]
    DuplicateClassId(ClassId),
    #[error("orphan class `{id}`: {reason}")]
    OrphanClass { id: ClassId, reason: String },
    #[error("class `{id}` has negative {field}")]
    NegativeMetric { id: ClassId, field: &'static str },
    #[error("model declares no classes")]
    EmptyModel,
    #[error("class `{0}` has an empty package path")]
    EmptyPackagePath(ClassId),
    #[error("package `{0}` is declared twice under the same parent")]
    DuplicatePackage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassInfo {
    pub id: ClassId,
    pub name: String,
    pub package_path: Vec<String>,
    pub num_methods: u64,
    pub num_attributes: u64,
}

/// A node of the package tree. `classes` holds class ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PackageNode {
    pub name: String,
    pub children: Vec<PackageNode>,
    pub classes: Vec<ClassId>,
}

/// Unvalidated model content, as carried by the `model` wire record and
/// stored in model files.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
    pub packages: Vec<PackageRecord>,
    pub classes: Vec<ClassRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PackageRecord {
    pub name: String,
    #[serde(default)]
    pub children: Vec<PackageRecord>,
    #[serde(default)]
    pub classes: Vec<ClassId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassRecord {
    pub id: ClassId,
    pub name: String,
    pub package_path: Vec<String>,
    pub num_methods: i64,
    pub num_attributes: i64,
}

/// Validated, immutable system structure.
///
/// The package tree is stored canonically: children sorted by name and
/// classes sorted by (name, id). Two models with the same content compare
/// equal regardless of the order their record listed things in. The root
/// node is anonymous; top-level packages are its children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemModel {
    root: PackageNode,
    classes: BTreeMap<ClassId, ClassInfo>,
    revision: u64,
}

impl SystemModel {
    pub fn root(&self) -> &PackageNode {
        &self.root
    }

    pub fn classes(&self) -> &BTreeMap<ClassId, ClassInfo> {
        &self.classes
    }

    pub fn class(&self, id: &str) -> Option<&ClassInfo> {
        self.classes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.classes.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Builds a model from classes alone, deriving the package tree from
    /// each class's package path.
    pub fn from_classes(
        classes: impl IntoIterator<Item = ClassInfo>,
    ) -> Result<SystemModel, ModelError> {
        let record = ModelRecord {
            revision: None,
            packages: Vec::new(),
            classes: classes
                .into_iter()
                .map(|c| ClassRecord {
                    id: c.id,
                    name: c.name,
                    package_path: c.package_path,
                    num_methods: c.num_methods as i64,
                    num_attributes: c.num_attributes as i64,
                })
                .collect(),
        };
        validate_model(&record)
    }

    /// Converts back to wire form, with an explicit package tree.
    pub fn to_record(&self) -> ModelRecord {
        fn pkg(node: &PackageNode) -> PackageRecord {
            PackageRecord {
                name: node.name.clone(),
                children: node.children.iter().map(pkg).collect(),
                classes: node.classes.clone(),
            }
        }
        ModelRecord {
            revision: Some(self.revision),
            packages: self.root.children.iter().map(pkg).collect(),
            classes: self
                .classes
                .values()
                .map(|c| ClassRecord {
                    id: c.id.clone(),
                    name: c.name.clone(),
                    package_path: c.package_path.clone(),
                    num_methods: c.num_methods as i64,
                    num_attributes: c.num_attributes as i64,
                })
                .collect(),
        }
    }
}

/// Checks a candidate model and builds the canonical [`SystemModel`].
///
/// An empty `packages` list means the tree is derived from the classes'
/// package paths. Otherwise the declared tree must list every class exactly
/// once, at the location named by its package path.
pub fn validate_model(candidate: &ModelRecord) -> Result<SystemModel, ModelError> {
    if candidate.classes.is_empty() {
        return Err(ModelError::EmptyModel);
    }

    let mut classes = BTreeMap::new();
    for c in &candidate.classes {
        if c.num_methods < 0 {
            return Err(ModelError::NegativeMetric { id: c.id.clone(), field: "numMethods" });
        }
        if c.num_attributes < 0 {
            return Err(ModelError::NegativeMetric { id: c.id.clone(), field: "numAttributes" });
        }
        if c.package_path.is_empty() {
            return Err(ModelError::EmptyPackagePath(c.id.clone()));
        }
        let info = ClassInfo {
            id: c.id.clone(),
            name: c.name.clone(),
            package_path: c.package_path.clone(),
            num_methods: c.num_methods as u64,
            num_attributes: c.num_attributes as u64,
        };
        if classes.insert(c.id.clone(), info).is_some() {
            return Err(ModelError::DuplicateClassId(c.id.clone()));
        }
    }

    let mut root = if candidate.packages.is_empty() {
        derive_tree(&classes)
    } else {
        declared_tree(&candidate.packages, &classes)?
    };
    canonicalize(&mut root, &classes);

    Ok(SystemModel { root, classes, revision: candidate.revision.unwrap_or(1) })
}

/// Replaces `model` with the full snapshot in `update`. The result carries
/// `model.revision() + 1`; on error nothing changes because `model` is
/// never mutated.
pub fn apply_model_update(
    model: &SystemModel,
    update: &ModelRecord,
) -> Result<SystemModel, ModelError> {
    let mut next = validate_model(update)?;
    next.revision = model.revision + 1;
    Ok(next)
}

/// Depth-first order of class ids: within each package its classes come
/// first (by name, then id), then its sub-packages (by name).
pub fn class_order(model: &SystemModel) -> Vec<ClassId> {
    fn walk(node: &PackageNode, out: &mut Vec<ClassId>) {
        out.extend(node.classes.iter().cloned());
        for child in &node.children {
            walk(child, out);
        }
    }
    let mut out = Vec::with_capacity(model.classes.len());
    walk(&model.root, &mut out);
    out
}

fn derive_tree(classes: &BTreeMap<ClassId, ClassInfo>) -> PackageNode {
    let mut root = PackageNode::default();
    for info in classes.values() {
        let mut node = &mut root;
        for segment in &info.package_path {
            let idx = match node.children.iter().position(|c| &c.name == segment) {
                Some(i) => i,
                None => {
                    node.children.push(PackageNode { name: segment.clone(), ..Default::default() });
                    node.children.len() - 1
                }
            };
            node = &mut node.children[idx];
        }
        node.classes.push(info.id.clone());
    }
    root
}

fn declared_tree(
    packages: &[PackageRecord],
    classes: &BTreeMap<ClassId, ClassInfo>,
) -> Result<PackageNode, ModelError> {
    fn build(
        rec: &PackageRecord,
        path: &mut Vec<String>,
        classes: &BTreeMap<ClassId, ClassInfo>,
        seen: &mut BTreeSet<ClassId>,
    ) -> Result<PackageNode, ModelError> {
        path.push(rec.name.clone());
        for id in &rec.classes {
            let Some(info) = classes.get(id) else {
                return Err(ModelError::OrphanClass {
                    id: id.clone(),
                    reason: "listed in package tree but not declared".into(),
                });
            };
            if info.package_path != *path {
                return Err(ModelError::OrphanClass {
                    id: id.clone(),
                    reason: format!(
                        "listed under `{}` but its package path is `{}`",
                        path.join("."),
                        info.package_path.join(".")
                    ),
                });
            }
            if !seen.insert(id.clone()) {
                return Err(ModelError::OrphanClass {
                    id: id.clone(),
                    reason: "listed in more than one package".into(),
                });
            }
        }
        let children = build_level(&rec.children, path, classes, seen)?;
        path.pop();
        Ok(PackageNode { name: rec.name.clone(), children, classes: rec.classes.clone() })
    }

    fn build_level(
        recs: &[PackageRecord],
        path: &mut Vec<String>,
        classes: &BTreeMap<ClassId, ClassInfo>,
        seen: &mut BTreeSet<ClassId>,
    ) -> Result<Vec<PackageNode>, ModelError> {
        let mut names = BTreeSet::new();
        let mut out = Vec::with_capacity(recs.len());
        for rec in recs {
            if !names.insert(rec.name.as_str()) {
                let mut full = path.clone();
                full.push(rec.name.clone());
                return Err(ModelError::DuplicatePackage(full.join(".")));
            }
            out.push(build(rec, path, classes, seen)?);
        }
        Ok(out)
    }

    let mut seen = BTreeSet::new();
    let children = build_level(packages, &mut Vec::new(), classes, &mut seen)?;
    if let Some(missing) = classes.keys().find(|id| !seen.contains(*id)) {
        return Err(ModelError::OrphanClass {
            id: missing.clone(),
            reason: "declared but not listed in the package tree".into(),
        });
    }
    Ok(PackageNode { name: String::new(), children, classes: Vec::new() })
}

fn canonicalize(node: &mut PackageNode, classes: &BTreeMap<ClassId, ClassInfo>) {
    node.classes.sort_by(|a, b| {
        let (ca, cb) = (&classes[a], &classes[b]);
        ca.name.cmp(&cb.name).then_with(|| ca.id.cmp(&cb.id))
    });
    node.children.sort_by(|a, b| a.name.cmp(&b.name));
    for child in &mut node.children {
        canonicalize(child, classes);
    }
}
