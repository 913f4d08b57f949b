//! Nested city packing.
//!
//! Each district is sized bottom-up from its contents: buildings (square
//! footprints) and sub-districts (already sized) are rigid rectangles
//! packed into shelves in class order. The shelf width is chosen among a
//! fixed set of candidates to make the district as close to square as
//! possible, so the result is a squarified nested packing whose items keep
//! their exact metric-mapped sizes.

use super::{building_dimensions, Building, CityScene, District, LayoutConfig, Rect};
use crate::model::{PackageNode, SystemModel};

/// Shelf widths tried, as multiples of the side of a square holding all
/// items and their margins.
const WIDTH_FACTORS: [f64; 21] = [
    0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2, 1.25, 1.3, 1.35, 1.4,
    1.45, 1.5, 1.55, 1.6,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Packing {
    pub width: f64,
    pub depth: f64,
}

/// Places rigid `(width, depth)` items left to right in rows no wider than
/// `row_width` (a single item wider than that gets its own row). Returns
/// item offsets and the packed extent.
pub(crate) fn shelf_pack(
    sizes: &[(f64, f64)],
    margin: f64,
    row_width: f64,
) -> (Vec<(f64, f64)>, Packing) {
    let mut positions = Vec::with_capacity(sizes.len());
    let (mut x, mut row_z, mut row_depth, mut width) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(w, d) in sizes {
        if x > 0.0 && x + w > row_width {
            row_z += row_depth + margin;
            x = 0.0;
            row_depth = 0.0;
        }
        positions.push((x, row_z));
        width = width.max(x + w);
        row_depth = row_depth.max(d);
        x += w + margin;
    }
    (positions, Packing { width, depth: row_z + row_depth })
}

/// Shelf packing with the most square-like extent among the candidate
/// widths. Ties go to the smaller area, then the earlier candidate.
pub(crate) fn pack_items(sizes: &[(f64, f64)], margin: f64) -> (Vec<(f64, f64)>, Packing) {
    if sizes.is_empty() {
        return (Vec::new(), Packing { width: 0.0, depth: 0.0 });
    }
    let widest = sizes.iter().map(|s| s.0).fold(0.0, f64::max);
    let area: f64 = sizes.iter().map(|(w, d)| (w + margin) * (d + margin)).sum();
    let side = area.sqrt();

    let mut best: Option<(Vec<(f64, f64)>, Packing)> = None;
    let key = |p: &Packing| (p.width.max(p.depth), p.width * p.depth);
    for factor in WIDTH_FACTORS {
        let candidate = shelf_pack(sizes, margin, widest.max(side * factor));
        let better = match &best {
            None => true,
            Some((_, b)) => key(&candidate.1) < key(b),
        };
        if better {
            best = Some(candidate);
        }
    }
    best.expect("at least one candidate")
}

/// District content measured bottom-up, before absolute placement.
struct Measured<'a> {
    node: &'a PackageNode,
    width: f64,
    depth: f64,
    buildings: Vec<(usize, (f64, f64))>,
    children: Vec<(Measured<'a>, (f64, f64))>,
}

fn measure<'a>(node: &'a PackageNode, model: &SystemModel, cfg: &LayoutConfig) -> Measured<'a> {
    let children: Vec<Measured<'a>> =
        node.children.iter().map(|c| measure(c, model, cfg)).collect();

    let mut sizes = Vec::with_capacity(node.classes.len() + children.len());
    for id in &node.classes {
        let (_, side) = building_dimensions(&model.classes()[id], cfg);
        sizes.push((side, side));
    }
    sizes.extend(children.iter().map(|c| (c.width, c.depth)));

    let (positions, packing) = pack_items(&sizes, cfg.margin);
    let n = node.classes.len();
    Measured {
        node,
        width: packing.width + 2.0 * cfg.district_pad,
        depth: packing.depth + 2.0 * cfg.district_pad,
        buildings: (0..n).map(|i| (i, positions[i])).collect(),
        children: children.into_iter().zip(positions[n..].iter().copied()).collect(),
    }
}

fn place(
    m: Measured<'_>,
    x: f64,
    z: f64,
    path: Vec<String>,
    level: u32,
    model: &SystemModel,
    cfg: &LayoutConfig,
) -> District {
    let inner_x = x + cfg.district_pad;
    let inner_z = z + cfg.district_pad;
    let buildings = m
        .buildings
        .iter()
        .map(|&(i, (bx, bz))| {
            let id = &m.node.classes[i];
            let (height, side) = building_dimensions(&model.classes()[id], cfg);
            Building { class_id: id.clone(), x: inner_x + bx, z: inner_z + bz, side, height }
        })
        .collect();
    let children = m
        .children
        .into_iter()
        .map(|(child, (cx, cz))| {
            let mut child_path = path.clone();
            child_path.push(child.node.name.clone());
            place(child, inner_x + cx, inner_z + cz, child_path, level + 1, model, cfg)
        })
        .collect();
    District {
        package_path: path,
        bounds: Rect { x, z, width: m.width, depth: m.depth },
        children,
        buildings,
        depth_level: level,
    }
}

/// Lays out the whole city with its corner at the origin. The root
/// district is the anonymous top of the package tree.
pub fn layout_city(model: &SystemModel, cfg: &LayoutConfig) -> CityScene {
    let measured = measure(model.root(), model, cfg);
    let root = place(measured, 0.0, 0.0, Vec::new(), 0, model, cfg);
    CityScene { extent: root.bounds, root, model_revision: model.revision() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shelf_breaks_rows() {
        let (pos, p) = shelf_pack(&[(2.0, 1.0), (2.0, 3.0), (2.0, 2.0)], 1.0, 5.0);
        assert_eq!(pos, vec![(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)]);
        assert_eq!(p, Packing { width: 5.0, depth: 6.0 });
    }

    #[test]
    fn oversized_item_gets_own_row() {
        let (pos, p) = shelf_pack(&[(10.0, 1.0), (1.0, 1.0)], 0.5, 3.0);
        assert_eq!(pos, vec![(0.0, 0.0), (0.0, 1.5)]);
        assert_eq!(p.width, 10.0);
    }

    #[test]
    fn equal_squares_pack_near_square() {
        let sizes = vec![(1.0, 1.0); 16];
        let (_, p) = pack_items(&sizes, 1.0);
        assert_eq!((p.width, p.depth), (7.0, 7.0));
    }
}
