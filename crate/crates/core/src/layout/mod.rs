//! City geometry: metric-mapped buildings packed into nested package
//! districts, plus the call-count color ramp.

mod color;
mod pack;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClassId, ClassInfo};

pub use color::{color_for, ColorValue};
pub use pack::layout_city;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("layout parameter `{0}` must be positive")]
    NonPositive(&'static str),
    #[error("malformed scene document: {0}")]
    MalformedScene(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorScale {
    Linear,
    #[default]
    Log,
}

impl std::str::FromStr for ColorScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ColorScale::Linear),
            "log" => Ok(ColorScale::Log),
            other => Err(format!("unknown color scale `{other}` (expected linear|log)")),
        }
    }
}

/// Free parameters of the encodings, in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutConfig {
    /// Height per method.
    pub unit_height: f64,
    pub min_height: f64,
    /// Footprint area per attribute.
    pub unit_area: f64,
    pub min_side: f64,
    /// Gap between sibling buildings and districts.
    pub margin: f64,
    /// Border inside every district.
    pub district_pad: f64,
    /// Calls per window that map to full red.
    pub color_ref: u64,
    pub color_scale: ColorScale,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            unit_height: 1.0,
            min_height: 0.5,
            unit_area: 1.0,
            min_side: 1.0,
            margin: 1.0,
            district_pad: 1.0,
            color_ref: 1000,
            color_scale: ColorScale::Log,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let fields = [
            ("unitHeight", self.unit_height),
            ("minHeight", self.min_height),
            ("unitArea", self.unit_area),
            ("minSide", self.min_side),
            ("margin", self.margin),
            ("districtPad", self.district_pad),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LayoutError::NonPositive(name));
            }
        }
        if self.color_ref == 0 {
            return Err(LayoutError::NonPositive("colorRef"));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub z: f64,
    pub width: f64,
    pub depth: f64,
}

impl Rect {
    pub fn max_x(&self) -> f64 {
        self.x + self.width
    }

    pub fn max_z(&self) -> f64 {
        self.z + self.depth
    }

    pub fn inset(&self, by: f64) -> Rect {
        Rect { x: self.x + by, z: self.z + by, width: self.width - 2.0 * by, depth: self.depth - 2.0 * by }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Building {
    pub class_id: ClassId,
    pub x: f64,
    pub z: f64,
    pub side: f64,
    pub height: f64,
}

impl Building {
    pub fn footprint(&self) -> Rect {
        Rect { x: self.x, z: self.z, width: self.side, depth: self.side }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct District {
    pub package_path: Vec<String>,
    pub bounds: Rect,
    pub children: Vec<District>,
    pub buildings: Vec<Building>,
    pub depth_level: u32,
}

impl District {
    /// Pre-order walk over this district and all nested districts.
    pub fn walk(&self) -> Vec<&District> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            out.extend(out[i].children.iter());
            i += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CityScene {
    pub root: District,
    pub model_revision: u64,
    pub extent: Rect,
}

impl CityScene {
    pub fn buildings(&self) -> impl Iterator<Item = &Building> {
        self.root.walk().into_iter().flat_map(|d| d.buildings.iter())
    }

    pub fn building(&self, class_id: &str) -> Option<&Building> {
        self.buildings().find(|b| b.class_id == class_id)
    }

    /// Uniformly rescales the scene so its longer ground edge equals
    /// `scale`, with the corner staying at the origin.
    pub fn normalized(&self, scale: f64) -> CityScene {
        let longest = self.extent.width.max(self.extent.depth);
        let k = if longest > 0.0 { scale / longest } else { 1.0 };
        let rect = |r: &Rect| Rect {
            x: (r.x - self.extent.x) * k,
            z: (r.z - self.extent.z) * k,
            width: r.width * k,
            depth: r.depth * k,
        };
        fn district(d: &District, k: f64, rect: &dyn Fn(&Rect) -> Rect) -> District {
            District {
                package_path: d.package_path.clone(),
                bounds: rect(&d.bounds),
                children: d.children.iter().map(|c| district(c, k, rect)).collect(),
                buildings: d
                    .buildings
                    .iter()
                    .map(|b| {
                        let fp = rect(&b.footprint());
                        Building {
                            class_id: b.class_id.clone(),
                            x: fp.x,
                            z: fp.z,
                            side: fp.width,
                            height: b.height * k,
                        }
                    })
                    .collect(),
                depth_level: d.depth_level,
            }
        }
        CityScene {
            root: district(&self.root, k, &rect),
            model_revision: self.model_revision,
            extent: rect(&self.extent),
        }
    }
}

/// `(height, side)` of a class's building.
pub fn building_dimensions(class: &ClassInfo, cfg: &LayoutConfig) -> (f64, f64) {
    let height = (cfg.unit_height * class.num_methods as f64).max(cfg.min_height);
    let side = (cfg.unit_area * class.num_attributes as f64).sqrt().max(cfg.min_side);
    (height, side)
}

pub fn scene_serialize(scene: &CityScene) -> String {
    serde_json::to_string(scene).expect("scenes always serialize")
}

pub fn scene_parse(doc: &str) -> Result<CityScene, LayoutError> {
    serde_json::from_str(doc).map_err(|e| LayoutError::MalformedScene(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemModel;

    fn info(m: u64, a: u64) -> ClassInfo {
        ClassInfo {
            id: "app.A".into(),
            name: "A".into(),
            package_path: vec!["app".into()],
            num_methods: m,
            num_attributes: a,
        }
    }

    #[test]
    fn clamp_floor_and_linearity() {
        let cfg = LayoutConfig::default();
        assert_eq!(building_dimensions(&info(0, 0), &cfg), (cfg.min_height, cfg.min_side));
        let cfg = LayoutConfig { unit_height: 1.0, min_height: 0.1, ..Default::default() };
        assert_eq!(building_dimensions(&info(3, 0), &cfg).0, 3.0);
        assert_eq!(building_dimensions(&info(6, 0), &cfg).0, 6.0);
        let cfg = LayoutConfig { unit_area: 2.0, min_side: 0.1, ..Default::default() };
        assert_eq!(building_dimensions(&info(0, 8), &cfg).1, 4.0);
    }

    #[test]
    fn config_validation() {
        assert!(LayoutConfig::default().validate().is_ok());
        let bad = LayoutConfig { margin: 0.0, ..Default::default() };
        assert_eq!(bad.validate(), Err(LayoutError::NonPositive("margin")));
        let bad = LayoutConfig { color_ref: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = LayoutConfig { unit_area: f64::NAN, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_class_at_padded_corner() {
        let cfg = LayoutConfig::default();
        let model = SystemModel::from_classes([info(3, 2)]).unwrap();
        let scene = layout_city(&model, &cfg);
        assert!(scene.root.buildings.is_empty());
        assert_eq!(scene.root.children.len(), 1);
        let app = &scene.root.children[0];
        assert_eq!(app.package_path, vec!["app".to_string()]);
        assert_eq!(app.buildings.len(), 1);
        let b = &app.buildings[0];
        assert_eq!((b.x, b.z), (app.bounds.x + cfg.district_pad, app.bounds.z + cfg.district_pad));
        assert_eq!(b.height, 3.0);
        assert_eq!(b.side, 2f64.sqrt());
        assert_eq!(scene.extent, scene.root.bounds);
        assert_eq!(scene.model_revision, 1);
    }

    #[test]
    fn scene_round_trip_and_truncation() {
        let model = SystemModel::from_classes([info(3, 2)]).unwrap();
        let scene = layout_city(&model, &LayoutConfig::default());
        let doc = scene_serialize(&scene);
        assert_eq!(scene_parse(&doc).unwrap(), scene);
        assert!(matches!(scene_parse(&doc[..doc.len() / 2]), Err(LayoutError::MalformedScene(_))));
        assert!(matches!(scene_parse("{}"), Err(LayoutError::MalformedScene(_))));
    }

    #[test]
    fn normalization_fits_scale() {
        let classes = (0..30).map(|i| ClassInfo {
            id: format!("p{}.C{i}", i % 3),
            name: format!("C{i}"),
            package_path: vec![format!("p{}", i % 3)],
            num_methods: i,
            num_attributes: i * 2,
        });
        let model = SystemModel::from_classes(classes).unwrap();
        let scene = layout_city(&model, &LayoutConfig::default());
        let n = scene.normalized(2.0);
        assert!((n.extent.width.max(n.extent.depth) - 2.0).abs() < 1e-12);
        assert_eq!(n.buildings().count(), 30);
        let ratio = |s: &CityScene| {
            let b = s.building("p1.C4").unwrap();
            b.height / b.side
        };
        assert!((ratio(&scene) - ratio(&n)).abs() < 1e-9);
    }
}
